//! Sparse low-diameter cover of item pairs by shared-item triples.
//!
//! Aggregation needs every pair's variance linked to every other's through
//! chains of jointly estimated triples. Vertices are unordered item pairs;
//! an edge joins two pairs sharing an item and is annotated with the
//! three-item menu that estimates both. One complete binary tree over the
//! other items, per item, gives about `n^2` edges total while keeping every
//! pair within logarithmic hops of every other.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use crate::error::{EstimateError, EstimateResult};

/// An edge of the pair graph: two item pairs sharing one item, plus the
/// sorted triple formed by their union.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairEdge {
    /// First endpoint, as an ordered item pair.
    pub a: (usize, usize),
    /// Second endpoint, as an ordered item pair.
    pub b: (usize, usize),
    /// The union of the endpoints, ascending.
    pub triple: [usize; 3],
}

/// Graph over all item pairs whose edges carry triple annotations.
#[derive(Debug, Clone)]
pub struct ItemPairGraph {
    n: usize,
    vertices: Vec<(usize, usize)>,
    index: BTreeMap<(usize, usize), usize>,
    edges: Vec<PairEdge>,
    adjacency: Vec<Vec<(usize, usize)>>,
}

/// Builds the per-item binary-tree cover over `n` items.
///
/// For each item `i`, the remaining items are arranged as a complete
/// binary tree (heap order over the ascending list); each tree edge
/// `(parent, child)` links the pairs `{i, parent}` and `{i, child}`. The
/// union over items has exactly `n (n - 2)` edges, is connected, and has
/// diameter at most `4 (floor(log2 n) + 1)`.
///
/// # Errors
/// [`EstimateError::TooFewItems`] when `n < 3`.
pub fn build_subgraph(n: usize) -> EstimateResult<ItemPairGraph> {
    if n < 3 {
        return Err(EstimateError::TooFewItems { n });
    }
    let mut vertices = Vec::with_capacity(n * (n - 1) / 2);
    let mut index = BTreeMap::new();
    for i in 0..n {
        for j in (i + 1)..n {
            index.insert((i, j), vertices.len());
            vertices.push((i, j));
        }
    }

    let pair_of = |x: usize, y: usize| if x < y { (x, y) } else { (y, x) };
    let mut edges = Vec::with_capacity(n * (n - 2));
    for i in 0..n {
        let others: Vec<usize> = (0..n).filter(|&x| x != i).collect();
        for pos in 1..others.len() {
            let parent = others[(pos - 1) / 2];
            let child = others[pos];
            let mut triple = [i, parent, child];
            triple.sort_unstable();
            edges.push(PairEdge {
                a: pair_of(i, parent),
                b: pair_of(i, child),
                triple,
            });
        }
    }

    let mut adjacency = vec![Vec::new(); vertices.len()];
    for (edge_id, edge) in edges.iter().enumerate() {
        let a = index[&edge.a];
        let b = index[&edge.b];
        adjacency[a].push((b, edge_id));
        adjacency[b].push((a, edge_id));
    }
    Ok(ItemPairGraph {
        n,
        vertices,
        index,
        edges,
        adjacency,
    })
}

impl ItemPairGraph {
    /// Number of items covered.
    pub fn n(&self) -> usize {
        self.n
    }

    /// All item pairs, ascending lexicographically; vertex ids are
    /// positions in this list.
    pub fn vertices(&self) -> &[(usize, usize)] {
        &self.vertices
    }

    /// All edges with their triple annotations.
    pub fn edges(&self) -> &[PairEdge] {
        &self.edges
    }

    /// The vertex id of an item pair (either order).
    pub fn vertex_index(&self, i: usize, j: usize) -> Option<usize> {
        let key = if i < j { (i, j) } else { (j, i) };
        self.index.get(&key).copied()
    }

    /// Neighbors of a vertex as `(neighbor id, edge id)` pairs.
    pub fn neighbors(&self, vertex: usize) -> &[(usize, usize)] {
        &self.adjacency[vertex]
    }

    /// The distinct triples annotating the edges, ascending; at most
    /// `n (n - 2)` of them.
    pub fn select_triples(&self) -> Vec<[usize; 3]> {
        let set: BTreeSet<[usize; 3]> = self.edges.iter().map(|e| e.triple).collect();
        set.into_iter().collect()
    }

    /// Hop distances from `root` to every vertex.
    pub fn bfs_distances(&self, root: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.vertices.len()];
        dist[root] = 0;
        let mut queue = std::collections::VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            for &(w, _) in &self.adjacency[v] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    /// Exact diameter in hops, by breadth-first search from every vertex.
    ///
    /// # Panics
    /// If the graph is disconnected, which the construction rules out.
    pub fn diameter(&self) -> usize {
        (0..self.vertices.len())
            .into_par_iter()
            .map(|v| {
                let far = *self.bfs_distances(v).iter().max().expect("nonempty");
                assert!(far != usize::MAX, "pair graph must be connected");
                far
            })
            .max()
            .unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_items_give_a_triangle() {
        let g = build_subgraph(3).unwrap();
        assert_eq!(g.vertices(), &[(0, 1), (0, 2), (1, 2)]);
        assert_eq!(g.edges().len(), 3);
        assert_eq!(g.diameter(), 1);
        assert_eq!(g.select_triples(), vec![[0, 1, 2]]);
    }

    #[test]
    fn four_items_give_eight_tree_edges() {
        let g = build_subgraph(4).unwrap();
        assert_eq!(g.vertices().len(), 6);
        assert_eq!(g.edges().len(), 8);
        assert!(g.select_triples().len() <= 16);
    }

    #[test]
    fn edges_share_exactly_one_item_and_annotate_their_union() {
        let g = build_subgraph(7).unwrap();
        for edge in g.edges() {
            let items: BTreeSet<usize> =
                [edge.a.0, edge.a.1, edge.b.0, edge.b.1].into_iter().collect();
            assert_eq!(items.len(), 3, "endpoints must share one item: {edge:?}");
            let triple: Vec<usize> = edge.triple.to_vec();
            assert_eq!(items.into_iter().collect::<Vec<_>>(), triple);
        }
    }

    #[test]
    fn counts_and_diameter_obey_their_bounds() {
        for n in [3usize, 5, 8, 16, 33] {
            let g = build_subgraph(n).unwrap();
            assert_eq!(g.vertices().len(), n * (n - 1) / 2);
            assert_eq!(g.edges().len(), n * (n - 2));
            assert!(g.select_triples().len() <= n * n);
            let bound = 4 * ((n as f64).log2().floor() as usize + 1);
            assert!(
                g.diameter() <= bound,
                "diameter {} exceeds bound {bound} at n = {n}",
                g.diameter()
            );
        }
    }

    #[test]
    fn every_pair_is_reachable_from_the_reference_pair() {
        let g = build_subgraph(9).unwrap();
        let root = g.vertex_index(0, 1).unwrap();
        let dist = g.bfs_distances(root);
        assert!(dist.iter().all(|&d| d != usize::MAX));
    }

    #[test]
    fn fewer_than_three_items_are_rejected() {
        assert!(matches!(
            build_subgraph(2),
            Err(EstimateError::TooFewItems { n: 2 })
        ));
    }
}
