//! Expected-maximum welfare of item menus by Monte-Carlo enumeration.
//!
//! The welfare of offering a menu `R` is `E[max_{i in R} X_i]`. All menus of
//! the requested size are scored against common random utility draws, which
//! removes most of the Monte-Carlo noise from menu *comparisons*.

use itertools::Itertools;

use crate::error::{CoreError, CoreResult};
use crate::model::ProbitModel;
use crate::sampling::UtilitySampler;

/// Cap on the number of menus an exhaustive welfare search may enumerate.
pub const MENU_ENUMERATION_CAP: u128 = 100_000;

/// A welfare-maximization query: choose `menu_size` of the candidates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WelfareQuery {
    /// Items the menu may draw from.
    pub candidate_items: Vec<usize>,
    /// Exact menu size.
    pub menu_size: usize,
    /// Monte-Carlo utility draws shared by all menus.
    pub mc_samples: u64,
}

/// Monte-Carlo value of one menu.
#[derive(Debug, Clone, PartialEq)]
pub struct MenuValue {
    /// Menu items in ascending order.
    pub menu: Vec<usize>,
    /// Estimated `E[max over the menu]`.
    pub value: f64,
    /// Standard error of the estimate.
    pub std_error: f64,
}

/// Full result of a welfare search.
#[derive(Debug, Clone, PartialEq)]
pub struct WelfareTable {
    /// Index into `table` of the best menu (ties break to the
    /// lexicographically smallest menu).
    pub best: usize,
    /// All enumerated menus in lexicographic order.
    pub table: Vec<MenuValue>,
}

impl WelfareTable {
    /// The winning menu's value row.
    pub fn best_menu(&self) -> &MenuValue {
        &self.table[self.best]
    }
}

/// `C(n, k)` with saturation, for enumeration-cap checks.
fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i + 1) as u128;
        if acc > MENU_ENUMERATION_CAP.saturating_mul(1_000) {
            return u128::MAX;
        }
    }
    acc
}

impl ProbitModel {
    /// Scores every size-`menu_size` menu of the candidates by Monte-Carlo
    /// expected maximum utility and returns the full table plus the winner.
    ///
    /// # Arguments
    /// * `query` - candidates, menu size, and the shared MC draw count.
    /// * `seed` - RNG seed; equal seeds give identical tables.
    ///
    /// # Errors
    /// [`CoreError::SubsetTooSmall`] when the menu size is zero or exceeds
    /// the candidate count, [`CoreError::EnumerationTooLarge`] past the
    /// enumeration cap, plus item validation and factorization errors.
    pub fn expected_max_welfare(&self, query: &WelfareQuery, seed: u64) -> CoreResult<WelfareTable> {
        if query.menu_size == 0 || query.menu_size > query.candidate_items.len() {
            return Err(CoreError::SubsetTooSmall {
                len: query.candidate_items.len(),
            });
        }
        self.validate_items(&query.candidate_items, 1)?;
        let count = binomial(query.candidate_items.len(), query.menu_size);
        if count > MENU_ENUMERATION_CAP {
            return Err(CoreError::EnumerationTooLarge {
                count,
                cap: MENU_ENUMERATION_CAP,
            });
        }

        let mut candidates = query.candidate_items.clone();
        candidates.sort_unstable();
        let menus: Vec<Vec<usize>> = candidates
            .iter()
            .copied()
            .combinations(query.menu_size)
            .collect();

        let mut sums = vec![0.0f64; menus.len()];
        let mut sq_sums = vec![0.0f64; menus.len()];
        let mut sampler = UtilitySampler::new(self, seed)?;
        for _ in 0..query.mc_samples {
            let x = sampler.draw();
            for (m, menu) in menus.iter().enumerate() {
                let best = menu
                    .iter()
                    .map(|&i| x[i])
                    .fold(f64::NEG_INFINITY, f64::max);
                sums[m] += best;
                sq_sums[m] += best * best;
            }
        }

        let draws = query.mc_samples as f64;
        let table: Vec<MenuValue> = menus
            .into_iter()
            .enumerate()
            .map(|(m, menu)| {
                let value = sums[m] / draws;
                let var = ((sq_sums[m] - sums[m] * sums[m] / draws) / (draws - 1.0).max(1.0))
                    .max(0.0);
                MenuValue {
                    menu,
                    value,
                    std_error: (var / draws).sqrt(),
                }
            })
            .collect();

        let mut best = 0usize;
        for (m, row) in table.iter().enumerate() {
            // Strict comparison keeps the lexicographically first menu on ties.
            if row.value > table[best].value {
                best = m;
            }
        }
        Ok(WelfareTable { best, table })
    }
}
