//! Randomization distribution of a test statistic under fixed-margins
//! re-assignment: exact enumeration when the number of assignments is small,
//! seeded Monte Carlo draws otherwise.

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::seed::rng_for;

/// Largest number of assignments enumerated exhaustively.
pub const EXACT_LIMIT: u128 = 100_000;

/// Relative slack when comparing a re-randomized statistic with the observed
/// one; values within it count as at least as extreme.
pub const TIE_RTOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TestStatistic {
    /// Treated mean minus control mean of the response.
    #[default]
    DiffMeans,
    /// Ratio of the response and take-up mean differences (Wald / two-stage).
    TwoStage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RandMethod {
    FisherExact,
    FisherMonteCarlo,
    LargeSample,
}

/// `C(n, k)`, saturating at `u128::MAX`.
pub fn binomial_coefficient(n: usize, k: usize) -> u128 {
    let k = k.min(n - k.min(n));
    let mut c: u128 = 1;
    for i in 0..k {
        c = match c.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    c
}

/// Whether `candidate` is at least as extreme as `observed` in absolute value.
/// Undefined statistics (division by a zero take-up difference) count as extreme.
pub fn at_least_as_extreme(candidate: f64, observed: f64) -> bool {
    if !candidate.is_finite() {
        return true;
    }
    candidate.abs() >= observed.abs() * (1.0 - TIE_RTOL)
}

/// Response columns inside the window and the observed assignment.
pub(crate) struct Arm<'a> {
    pub y: &'a [f64],
    pub d: Option<&'a [f64]>,
    pub n_treated: usize,
    total_y: f64,
    total_d: f64,
}

impl<'a> Arm<'a> {
    pub(crate) fn new(y: &'a [f64], d: Option<&'a [f64]>, n_treated: usize) -> Self {
        Arm {
            y,
            d,
            n_treated,
            total_y: y.iter().sum(),
            total_d: d.map_or(0.0, |d| d.iter().sum()),
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.y.len()
    }

    /// Statistic for the assignment whose treated units are `treated`.
    pub(crate) fn statistic(&self, treated: &[usize], stat: TestStatistic) -> f64 {
        let nt = self.n_treated as f64;
        let nc = (self.len() - self.n_treated) as f64;
        let sy: f64 = treated.iter().map(|&i| self.y[i]).sum();
        let dy = sy / nt - (self.total_y - sy) / nc;
        match stat {
            TestStatistic::DiffMeans => dy,
            TestStatistic::TwoStage => {
                let d = self.d.expect("two-stage statistic needs take-up");
                let sd: f64 = treated.iter().map(|&i| d[i]).sum();
                let dd = sd / nt - (self.total_d - sd) / nc;
                dy / dd
            }
        }
    }
}

pub(crate) struct PermutationOutcome {
    pub p_value: f64,
    pub method: RandMethod,
    pub assignments: u64,
}

/// Two-sided randomization p-value of `observed` over fixed-margins
/// re-assignments of `arm`.
pub(crate) fn permutation_p(
    arm: &Arm<'_>,
    observed: f64,
    stat: TestStatistic,
    reps: usize,
    seed: u64,
) -> PermutationOutcome {
    let n = arm.len();
    let k = arm.n_treated;
    let total = binomial_coefficient(n, k);
    if total <= EXACT_LIMIT {
        let mut idx: Vec<usize> = (0..k).collect();
        let mut hits: u64 = 0;
        let mut m: u64 = 0;
        loop {
            m += 1;
            if at_least_as_extreme(arm.statistic(&idx, stat), observed) {
                hits += 1;
            }
            if !next_combination(&mut idx, n) {
                break;
            }
        }
        PermutationOutcome {
            p_value: hits as f64 / m as f64,
            method: RandMethod::FisherExact,
            assignments: m,
        }
    } else {
        let hits = (0..reps as u64)
            .into_par_iter()
            .filter(|&r| {
                let mut rng = rng_for(seed, r);
                let draw = sample(&mut rng, n, k).into_vec();
                at_least_as_extreme(arm.statistic(&draw, stat), observed)
            })
            .count() as u64;
        // The observed assignment is part of the reference set.
        let m = reps as u64 + 1;
        PermutationOutcome {
            p_value: (hits + 1) as f64 / m as f64,
            method: RandMethod::FisherMonteCarlo,
            assignments: m,
        }
    }
}

/// Advances `idx` (strictly increasing, values `< n`) to the next
/// combination in lexicographic order; false after the last one.
pub(crate) fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if idx[i] < n - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_coefficients() {
        assert_eq!(binomial_coefficient(6, 3), 20);
        assert_eq!(binomial_coefficient(14, 7), 3432);
        assert_eq!(binomial_coefficient(5, 0), 1);
        assert_eq!(binomial_coefficient(5, 5), 1);
        assert_eq!(binomial_coefficient(500, 250), u128::MAX);
    }

    #[test]
    fn enumerates_every_combination_once() {
        let mut idx = vec![0, 1, 2];
        let mut seen = std::collections::HashSet::new();
        loop {
            assert!(seen.insert(idx.clone()));
            if !next_combination(&mut idx, 6) {
                break;
            }
        }
        assert_eq!(seen.len(), 20);
    }

    #[test]
    fn six_units_hand_count() {
        // {1,2,3} control, {4,5,6} treated: |diff| = 3 is reached only by
        // the observed split and its mirror image.
        let y = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let treated = [3usize, 4, 5];
        let arm = Arm::new(&y, None, 3);
        let obs = arm.statistic(&treated, TestStatistic::DiffMeans);
        assert_eq!(obs, 3.0);
        let out = permutation_p(&arm, obs, TestStatistic::DiffMeans, 0, 0);
        assert_eq!(out.method, RandMethod::FisherExact);
        assert_eq!(out.assignments, 20);
        assert_eq!(out.p_value, 2.0 / 20.0);
    }

    #[test]
    fn monte_carlo_is_seed_deterministic() {
        let y: Vec<f64> = (0..60).map(|i| (i as f64 * 0.7).sin()).collect();
        let arm = Arm::new(&y, None, 30);
        let t: Vec<usize> = (30..60).collect();
        let obs = arm.statistic(&t, TestStatistic::DiffMeans);
        let a = permutation_p(&arm, obs, TestStatistic::DiffMeans, 999, 5023);
        let b = permutation_p(&arm, obs, TestStatistic::DiffMeans, 999, 5023);
        assert_eq!(a.method, RandMethod::FisherMonteCarlo);
        assert_eq!(a.p_value, b.p_value);
        assert!(a.p_value >= 1.0 / 1000.0);
    }
}
