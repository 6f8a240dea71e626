//! Best-of-three observation counts: the sufficient statistic for
//! three-item estimation, plus halfspace/cone event frequencies and CSV
//! round-tripping.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use corum_core::sampling::Ranking;
use corum_core::triple::{PERMUTATIONS3, PERM_LABELS};

use crate::error::{EstimateError, EstimateResult};

/// The three position-space difference vectors, as index pairs: entry `d`
/// holds `(p, q)` meaning the comparison `X_p - X_q` between the positions
/// of an ordered triple.
pub const DIFF_PAIRS: [(usize, usize); 3] = [(0, 1), (1, 2), (0, 2)];

/// A comparison direction: one of the three difference vectors, possibly
/// negated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SignedDiff {
    /// Index into [`DIFF_PAIRS`].
    pub diff: usize,
    /// `true` for `X_p - X_q >= 0`, `false` for the reversed comparison.
    pub positive: bool,
}

impl SignedDiff {
    /// Convenience constructor.
    pub fn new(diff: usize, positive: bool) -> Self {
        assert!(diff < 3, "difference index must be 0, 1, or 2");
        Self { diff, positive }
    }
}

/// Whether permutation `slot` ranks position `p` above position `q`.
fn position_beats(slot: usize, p: usize, q: usize) -> bool {
    let perm = &PERMUTATIONS3[slot];
    let rank_of = |x: usize| perm.iter().position(|&r| r == x).expect("position in 0..3");
    rank_of(p) < rank_of(q)
}

/// Whether permutation `slot` satisfies the signed comparison.
fn slot_satisfies(slot: usize, c: SignedDiff) -> bool {
    let (p, q) = DIFF_PAIRS[c.diff];
    position_beats(slot, p, q) == c.positive
}

/// Observation counts for one ordered item triple, indexed by the six
/// orderings in [`PERM_LABELS`] order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TripleCounts {
    triple: [usize; 3],
    counts: [u64; 6],
}

impl TripleCounts {
    /// Builds counts for `triple`; at least one observation is required.
    ///
    /// # Errors
    /// [`EstimateError::NotEnoughSamples`] when all counts are zero.
    pub fn new(triple: [usize; 3], counts: [u64; 6]) -> EstimateResult<Self> {
        if counts.iter().sum::<u64>() == 0 {
            return Err(EstimateError::NotEnoughSamples {
                total: 0.0,
                min: 1.0,
            });
        }
        Ok(Self { triple, counts })
    }

    /// The ordered item triple these counts describe.
    pub fn triple(&self) -> [usize; 3] {
        self.triple
    }

    /// Counts per ordering, in [`PERM_LABELS`] order.
    pub fn counts(&self) -> &[u64; 6] {
        &self.counts
    }

    /// Total number of observations.
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Empirical ordering frequencies.
    pub fn frequencies(&self) -> TripleFrequencies {
        let total = self.total() as f64;
        let mut freqs = [0.0; 6];
        for (f, &c) in freqs.iter_mut().zip(&self.counts) {
            *f = c as f64 / total;
        }
        TripleFrequencies {
            triple: self.triple,
            freqs,
            total,
        }
    }
}

/// Ordering frequencies with an effective sample size. Sampled data comes
/// from [`TripleCounts::frequencies`]; exact probabilities enter through
/// [`TripleFrequencies::from_probabilities`] with a large pseudo-total.
#[derive(Debug, Clone, PartialEq)]
pub struct TripleFrequencies {
    triple: [usize; 3],
    freqs: [f64; 6],
    total: f64,
}

impl TripleFrequencies {
    /// Wraps exact (or externally computed) ordering probabilities. The
    /// `pseudo_total` plays the role of a sample size when clamping
    /// frequencies and calibrating residual tolerances; pass a large value
    /// (e.g. `1e12`) for noise-free probabilities.
    pub fn from_probabilities(
        triple: [usize; 3],
        probs: [f64; 6],
        pseudo_total: f64,
    ) -> EstimateResult<Self> {
        if pseudo_total < 1.0 {
            return Err(EstimateError::NotEnoughSamples {
                total: pseudo_total,
                min: 1.0,
            });
        }
        Ok(Self {
            triple,
            freqs: probs,
            total: pseudo_total,
        })
    }

    /// The ordered item triple.
    pub fn triple(&self) -> [usize; 3] {
        self.triple
    }

    /// Ordering frequencies in [`PERM_LABELS`] order.
    pub fn freqs(&self) -> &[f64; 6] {
        &self.freqs
    }

    /// Effective sample size.
    pub fn total(&self) -> f64 {
        self.total
    }

    /// Smallest ordering frequency: the empirical observability margin.
    pub fn min_frequency(&self) -> f64 {
        self.freqs.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Frequency of the halfspace event defined by one signed comparison: the
/// sum of the (three) ordering frequencies consistent with it.
pub fn halfspace_frequency(freqs: &TripleFrequencies, c: SignedDiff) -> f64 {
    (0..6)
        .filter(|&slot| slot_satisfies(slot, c))
        .map(|slot| freqs.freqs[slot])
        .sum()
}

/// Frequency of the cone event where both signed comparisons hold: the sum
/// of the one or two consistent ordering frequencies.
///
/// # Panics
/// When both comparisons use the same difference vector.
pub fn cone_frequency(freqs: &TripleFrequencies, c1: SignedDiff, c2: SignedDiff) -> f64 {
    assert_ne!(c1.diff, c2.diff, "cone events need two distinct differences");
    (0..6)
        .filter(|&slot| slot_satisfies(slot, c1) && slot_satisfies(slot, c2))
        .map(|slot| freqs.freqs[slot])
        .sum()
}

/// Tallies full three-item rankings over `triple` into counts.
///
/// # Errors
/// [`EstimateError::EmptyRankings`] for an empty list;
/// [`EstimateError::MixedTriples`] when a ranking is not a permutation of
/// `triple`.
pub fn counts_from_rankings(
    triple: [usize; 3],
    rankings: &[Ranking],
) -> EstimateResult<TripleCounts> {
    if rankings.is_empty() {
        return Err(EstimateError::EmptyRankings);
    }
    let mut counts = [0u64; 6];
    for ranking in rankings {
        let slot = ranking_slot(triple, ranking)?;
        counts[slot] += 1;
    }
    TripleCounts::new(triple, counts)
}

/// Maps a ranking of `triple` to its permutation slot.
fn ranking_slot(triple: [usize; 3], ranking: &Ranking) -> EstimateResult<usize> {
    let order = ranking.order();
    let mismatch = || EstimateError::MixedTriples {
        expected: triple,
        found: order.to_vec(),
    };
    if order.len() != 3 {
        return Err(mismatch());
    }
    let mut perm = [0usize; 3];
    for (rank, &item) in order.iter().enumerate() {
        perm[rank] = triple.iter().position(|&t| t == item).ok_or_else(mismatch)?;
    }
    PERMUTATIONS3
        .iter()
        .position(|p| *p == perm)
        .ok_or_else(mismatch)
}

/// Writes counts as CSV rows `i,j,k,perm,count` (with a header), one row
/// per ordering per triple. Round-trips bit-exactly through
/// [`read_counts_csv`].
pub fn write_counts_csv<W: Write>(writer: W, tables: &[TripleCounts]) -> EstimateResult<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(["i", "j", "k", "perm", "count"])?;
    for table in tables {
        let [i, j, k] = table.triple;
        for (slot, &count) in table.counts.iter().enumerate() {
            out.write_record([
                i.to_string(),
                j.to_string(),
                k.to_string(),
                PERM_LABELS[slot].to_string(),
                count.to_string(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads counts CSV, accepting missing permutation rows as zero counts and
/// summing duplicate rows. Returns one table per triple, sorted by triple.
///
/// # Errors
/// [`EstimateError::ParseRow`] names the offending line for malformed rows;
/// a triple whose rows are all zero fails the total >= 1 invariant.
pub fn read_counts_csv<R: Read>(reader: R) -> EstimateResult<Vec<TripleCounts>> {
    let mut input = csv::Reader::from_reader(reader);
    let mut tables: BTreeMap<[usize; 3], [u64; 6]> = BTreeMap::new();
    for record in input.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let fail = |detail: String| EstimateError::ParseRow { line, detail };
        if record.len() != 5 {
            return Err(fail(format!("expected 5 fields, got {}", record.len())));
        }
        let mut items = [0usize; 3];
        for (slot, item) in items.iter_mut().enumerate() {
            *item = record[slot]
                .trim()
                .parse()
                .map_err(|e| fail(format!("bad item index {:?}: {e}", &record[slot])))?;
        }
        if items[0] == items[1] || items[1] == items[2] || items[0] == items[2] {
            return Err(fail(format!("triple {items:?} has repeated items")));
        }
        let label = record[3].trim();
        let slot = PERM_LABELS
            .iter()
            .position(|&l| l == label)
            .ok_or_else(|| fail(format!("unknown permutation code {label:?}")))?;
        let count: u64 = record[4]
            .trim()
            .parse()
            .map_err(|e| fail(format!("bad count {:?}: {e}", &record[4])))?;
        tables.entry(items).or_insert([0; 6])[slot] += count;
    }
    tables
        .into_iter()
        .map(|(triple, counts)| TripleCounts::new(triple, counts))
        .collect()
}

/// Convenience file wrappers around the CSV readers/writers.
pub fn save_counts_csv(path: &Path, tables: &[TripleCounts]) -> EstimateResult<()> {
    write_counts_csv(std::fs::File::create(path)?, tables)
}

/// Reads a counts CSV file; see [`read_counts_csv`].
pub fn load_counts_csv(path: &Path) -> EstimateResult<Vec<TripleCounts>> {
    read_counts_csv(std::fs::File::open(path)?)
}
