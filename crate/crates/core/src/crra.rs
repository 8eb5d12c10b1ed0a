//! Expected CRRA utility rankings of lotteries and the σ intervals on which each
//! ranking holds.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{RasError, Result};
use crate::menu::PreferenceOrdering;

/// Range of σ searched for ranking changes.
pub const SIGMA_RANGE: (f64, f64) = (-1.0, 1.0);
/// Cutoff search stops this far below σ = 1, where zero payoffs become −∞.
pub const SIGMA_GUARD: f64 = 1e-6;
const RELATIVE_TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lottery {
    pub label: String,
    /// (payoff, probability) pairs.
    pub outcomes: Vec<(f64, f64)>,
}

impl Lottery {
    pub fn new(label: impl Into<String>, outcomes: Vec<(f64, f64)>) -> Result<Self> {
        let label = label.into();
        if outcomes.is_empty() {
            return Err(RasError::Validation(format!(
                "lottery {label} has no outcomes"
            )));
        }
        if outcomes
            .iter()
            .any(|&(x, p)| !(x >= 0.0 && x.is_finite() && (0.0..=1.0).contains(&p)))
        {
            return Err(RasError::Validation(format!(
                "lottery {label} needs non-negative payoffs and probabilities in [0, 1]"
            )));
        }
        let total: f64 = outcomes.iter().map(|o| o.1).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(RasError::Validation(format!(
                "lottery {label} probabilities sum to {total}"
            )));
        }
        Ok(Self { label, outcomes })
    }

    pub fn expected_value(&self) -> f64 {
        self.outcomes.iter().map(|(x, p)| x * p).sum()
    }

    /// Ranking key under CRRA utility u(x) = x^(1−σ)/(1−σ), or ln x at σ = 1.
    ///
    /// For σ ≥ 1 a zero payoff is worth −∞, so lotteries are compared first by the
    /// probability of a positive payoff and then by expected utility over positive payoffs.
    pub fn crra_key(&self, sigma: f64) -> (f64, f64) {
        if sigma < 1.0 {
            let eu = self
                .outcomes
                .iter()
                .map(|&(x, p)| p * crra_utility(x, sigma))
                .sum();
            return (1.0, eu);
        }
        let positive = self.outcomes.iter().filter(|o| o.0 > 0.0);
        let mass = positive.clone().map(|o| o.1).sum::<f64>();
        let eu = positive.map(|&(x, p)| p * crra_utility(x, sigma)).sum();
        // only lotteries with some zero payoff are pushed down
        let mass = if self.outcomes.iter().any(|&(x, p)| x == 0.0 && p > 0.0) {
            mass - 2.0
        } else {
            1.0
        };
        (mass, eu)
    }
}

pub fn crra_utility(x: f64, sigma: f64) -> f64 {
    if sigma == 1.0 {
        x.ln()
    } else {
        x.powf(1.0 - sigma) / (1.0 - sigma)
    }
}

fn compare_keys(a: (f64, f64), b: (f64, f64)) -> Ordering {
    let close = |x: f64, y: f64| (x - y).abs() <= RELATIVE_TIE_TOL * x.abs().max(y.abs()).max(1.0);
    if !close(a.0, b.0) {
        return a.0.total_cmp(&b.0);
    }
    if close(a.1, b.1) {
        Ordering::Equal
    } else {
        a.1.total_cmp(&b.1)
    }
}

/// Indices of `lotteries`, best first, with ties left in input order.
fn sort_by_utility(lotteries: &[Lottery], sigma: f64) -> (Vec<usize>, bool) {
    let keys: Vec<(f64, f64)> = lotteries.iter().map(|l| l.crra_key(sigma)).collect();
    let mut order: Vec<usize> = (0..lotteries.len()).collect();
    order.sort_by(|&a, &b| compare_keys(keys[b], keys[a]));
    let tie = order
        .windows(2)
        .any(|w| compare_keys(keys[w[0]], keys[w[1]]) == Ordering::Equal);
    (order, tie)
}

/// Ordering by descending expected CRRA utility. A tie means σ sits on a cutoff and is
/// reported as a domain error.
pub fn crra_rank(lotteries: &[Lottery], sigma: f64) -> Result<PreferenceOrdering> {
    if !(SIGMA_RANGE.0..=SIGMA_RANGE.1).contains(&sigma) {
        return Err(RasError::Config(format!("sigma {sigma} outside [-1, 1]")));
    }
    if lotteries.is_empty() {
        return Err(RasError::Validation("no lotteries".into()));
    }
    let (order, tie) = sort_by_utility(lotteries, sigma);
    if tie {
        return Err(RasError::Domain(format!(
            "sigma {sigma} is a cutoff: two lotteries tie"
        )));
    }
    PreferenceOrdering::new(order)
}

/// A maximal σ interval with one ranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrraInterval {
    pub lower: f64,
    pub upper: f64,
    /// Labels best first.
    pub ordering: Vec<String>,
    #[serde(skip)]
    pub rank: Vec<usize>,
}

/// Scans σ over [−1, 1 − guard] at `step`, locating every ranking change by bisection
/// to 1e−9. The last interval is closed at σ = 1.
pub fn crra_ordering_table(lotteries: &[Lottery], step: f64) -> Result<Vec<CrraInterval>> {
    if !(step > 0.0 && step <= 1e-4) {
        return Err(RasError::Config(format!(
            "grid step must be in (0, 1e-4], got {step}"
        )));
    }
    if lotteries.is_empty() {
        return Err(RasError::Validation("no lotteries".into()));
    }
    let rank = |s: f64| sort_by_utility(lotteries, s).0;
    let (lo, hi) = (SIGMA_RANGE.0, SIGMA_RANGE.1 - SIGMA_GUARD);
    let n_steps = ((hi - lo) / step).ceil() as usize;
    let mut intervals = Vec::new();
    let mut start = lo;
    let mut current = rank(lo);
    let mut prev_sigma = lo;
    for k in 1..=n_steps {
        let s = (lo + k as f64 * step).min(hi);
        let r = rank(s);
        if r != current {
            let (mut a, mut b) = (prev_sigma, s);
            while b - a > 1e-9 {
                let mid = 0.5 * (a + b);
                if rank(mid) == current {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            let cut = 0.5 * (a + b);
            intervals.push((start, cut, current));
            start = cut;
            current = r;
        }
        prev_sigma = s;
    }
    intervals.push((start, SIGMA_RANGE.1, current));
    Ok(intervals
        .into_iter()
        .map(|(lower, upper, rank)| CrraInterval {
            lower,
            upper,
            ordering: rank.iter().map(|&i| lotteries[i].label.clone()).collect(),
            rank,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lottery_experiment::{lotteries, outside_lottery};

    fn all_six() -> Vec<Lottery> {
        let mut v = lotteries();
        v.push(outside_lottery());
        v
    }

    /// Rank (1 = best) of each lottery l1..l5, lo.
    fn ranks(sigma: f64) -> Vec<usize> {
        let o = crra_rank(&all_six(), sigma).unwrap();
        (0..6).map(|i| o.position(i) + 1).collect()
    }

    #[test]
    fn ranks_by_risk_aversion() {
        assert_eq!(ranks(-1.0), vec![1, 5, 3, 2, 4, 6]);
        assert_eq!(ranks(0.0), vec![1, 5, 3, 2, 4, 6]);
        assert_eq!(ranks(0.25), vec![2, 5, 4, 1, 3, 6]);
        assert_eq!(ranks(0.3), vec![5, 2, 4, 3, 1, 6]);
        assert_eq!(ranks(0.5), vec![5, 1, 3, 4, 2, 6]);
        assert_eq!(ranks(0.75), vec![6, 1, 4, 5, 3, 2]);
        assert_eq!(ranks(1.0), vec![6, 1, 4, 5, 3, 2]);
    }

    #[test]
    fn log_utility_and_ties() {
        let l = Lottery::new("x", vec![(4.0, 0.5), (16.0, 0.5)]).unwrap();
        assert!((l.crra_key(1.0).1 - 8f64.ln()).abs() < 1e-12);
        let sure = Lottery::new("s", vec![(8.0, 1.0)]).unwrap();
        assert!(matches!(
            crra_rank(&[l.clone(), sure], 1.0),
            Err(RasError::Domain(_))
        ));
        assert!(crra_rank(&[l], 1.5).is_err());
        assert!(Lottery::new("bad", vec![(1.0, 0.6), (2.0, 0.6)]).is_err());
    }

    #[test]
    fn six_orderings_and_cutoffs() {
        let table = crra_ordering_table(&lotteries(), 1e-4).unwrap();
        let expected: [&[&str]; 6] = [
            &["l1", "l4", "l3", "l5", "l2"],
            &["l4", "l1", "l5", "l3", "l2"],
            &["l4", "l5", "l1", "l3", "l2"],
            &["l5", "l4", "l2", "l3", "l1"],
            &["l5", "l2", "l4", "l3", "l1"],
            &["l2", "l5", "l3", "l4", "l1"],
        ];
        assert_eq!(table.len(), 6);
        for (row, want) in table.iter().zip(expected) {
            assert_eq!(row.ordering, want);
        }
        let cutoffs: Vec<f64> = table[..5].iter().map(|r| r.upper).collect();
        for (c, want) in cutoffs.iter().zip([0.2287, 0.2606, 0.2728, 0.2832, 0.3001]) {
            assert!((c - want).abs() < 1e-3, "{c} vs {want}");
        }
        let fine = crra_ordering_table(&lotteries(), 1e-5).unwrap();
        for (a, b) in table.iter().zip(&fine) {
            assert!((a.upper - b.upper).abs() < 1e-5);
        }
    }
}
