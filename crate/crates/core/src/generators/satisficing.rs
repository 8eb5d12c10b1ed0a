//! Search with satisficing: items are searched in a random order and search stops at the
//! first item whose utility clears a random threshold τ(t). If nothing clears it, the
//! whole menu is considered.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::attention::AttentionRule;
use crate::choice::ChoiceDataset;
use crate::error::{dim_check, RasError, Result};
use crate::lattice::SetIndex;
use crate::menu::{ConsiderationSet, PreferenceOrdering, MAX_ITEMS};
use crate::rng::stream_rng;

const FOSD_TOL: f64 = 1e-12;
const FOSD_GRID: usize = 2001;
/// Orderings are enumerated for the closed form and the uniform search distribution.
const MAX_SEARCH_ITEMS: usize = 8;

/// Distribution of the satisficing threshold in one period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdDist {
    Normal {
        mean: f64,
        sd: f64,
    },
    /// Point mass; `-inf` means the first searched item is always accepted.
    Constant {
        value: f64,
    },
}

impl ThresholdDist {
    fn validate(&self) -> Result<()> {
        match *self {
            Self::Normal { mean, sd } if mean.is_finite() && sd > 0.0 && sd.is_finite() => Ok(()),
            Self::Constant { value } if !value.is_nan() => Ok(()),
            _ => Err(RasError::Config(format!(
                "invalid threshold distribution {self:?}"
            ))),
        }
    }

    /// Pr(τ ≤ x), the probability that utility x satisfices.
    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Self::Normal { mean, sd } => Normal::new(mean, sd).map_or(f64::NAN, |n| n.cdf(x)),
            Self::Constant { value } => f64::from(u8::from(x >= value)),
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Normal { mean, sd } => {
                let z: f64 = rng.sample(rand_distr::StandardNormal);
                mean + sd * z
            }
            Self::Constant { value } => value,
        }
    }

    fn grid_anchors(&self) -> Vec<f64> {
        match *self {
            Self::Normal { mean, sd } => vec![mean - 8.0 * sd, mean + 8.0 * sd],
            Self::Constant { value } if value.is_finite() => vec![value],
            Self::Constant { .. } => vec![],
        }
    }
}

/// Distribution over search orders, each a permutation of the items (searched first to last).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchDistribution {
    orders: Vec<Vec<usize>>,
    probs: Vec<f64>,
}

impl SearchDistribution {
    pub fn new(orders: Vec<Vec<usize>>, probs: Vec<f64>) -> Result<Self> {
        dim_check("search order probabilities", orders.len(), probs.len())?;
        let n = orders.first().map_or(0, Vec::len);
        if n == 0 {
            return Err(RasError::Config("no search orders given".into()));
        }
        for o in &orders {
            if o.len() != n {
                return Err(RasError::Config(format!(
                    "search order {o:?} is not a permutation of 0..{n}"
                )));
            }
            PreferenceOrdering::new(o.clone()).map_err(|_| {
                RasError::Config(format!("search order {o:?} is not a permutation of 0..{n}"))
            })?;
        }
        if probs.iter().any(|p| !(*p >= 0.0)) || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(RasError::Config(
                "search order probabilities must be a distribution".into(),
            ));
        }
        Ok(Self { orders, probs })
    }

    /// Every order of `n` items equally likely.
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 || n > MAX_SEARCH_ITEMS {
            return Err(RasError::Config(format!(
                "uniform search needs 1..={MAX_SEARCH_ITEMS} items, got {n}"
            )));
        }
        let mut orders = Vec::new();
        let mut perm: Vec<usize> = (0..n).collect();
        loop {
            orders.push(perm.clone());
            if !crate::menu::next_permutation(&mut perm) {
                break;
            }
        }
        let p = 1.0 / orders.len() as f64;
        let probs = vec![p; orders.len()];
        Ok(Self { orders, probs })
    }

    pub fn n_items(&self) -> usize {
        self.orders[0].len()
    }

    pub fn orders(&self) -> &[Vec<usize>] {
        &self.orders
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

/// Fixed utilities, one threshold distribution per period and a search distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SatisficingModel {
    utilities: Vec<f64>,
    thresholds: Vec<ThresholdDist>,
    search: SearchDistribution,
}

impl SatisficingModel {
    /// Thresholds must rise over time in the first-order stochastic sense (later stoppers
    /// are pickier), checked by comparing CDFs on a grid.
    pub fn new(
        utilities: Vec<f64>,
        thresholds: Vec<ThresholdDist>,
        search: SearchDistribution,
    ) -> Result<Self> {
        let n = utilities.len();
        if n == 0 || n > MAX_ITEMS {
            return Err(RasError::Config(format!("invalid number of items {n}")));
        }
        dim_check("search order length", n, search.n_items())?;
        if utilities.iter().any(|u| !u.is_finite()) {
            return Err(RasError::Config("utilities must be finite".into()));
        }
        let mut sorted = utilities.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(RasError::Config(
                "utilities must be strictly ordered".into(),
            ));
        }
        if thresholds.is_empty() {
            return Err(RasError::Config("at least one period is required".into()));
        }
        for d in &thresholds {
            d.validate()?;
        }
        check_fosd(&thresholds)?;
        Ok(Self {
            utilities,
            thresholds,
            search,
        })
    }

    pub fn n_items(&self) -> usize {
        self.utilities.len()
    }

    pub fn d_t(&self) -> usize {
        self.thresholds.len()
    }

    pub fn utilities(&self) -> &[f64] {
        &self.utilities
    }

    pub fn thresholds(&self) -> &[ThresholdDist] {
        &self.thresholds
    }

    pub fn search(&self) -> &SearchDistribution {
        &self.search
    }

    /// The preference implied by utilities, best first.
    pub fn preference(&self) -> PreferenceOrdering {
        let mut rank: Vec<usize> = (0..self.n_items()).collect();
        rank.sort_by(|&a, &b| self.utilities[b].total_cmp(&self.utilities[a]));
        PreferenceOrdering::new(rank).expect("sorted indices form a permutation")
    }

    fn best_in(&self, mask: u64) -> usize {
        (0..self.n_items())
            .filter(|&i| mask >> i & 1 == 1)
            .max_by(|&a, &b| self.utilities[a].total_cmp(&self.utilities[b]))
            .expect("non-empty set")
    }
}

fn check_fosd(thresholds: &[ThresholdDist]) -> Result<()> {
    let anchors: Vec<f64> = thresholds
        .iter()
        .flat_map(ThresholdDist::grid_anchors)
        .collect();
    let lo = anchors.iter().copied().reduce(f64::min).unwrap_or(0.0);
    let hi = anchors.iter().copied().reduce(f64::max).unwrap_or(0.0);
    let mut grid: Vec<f64> = if hi > lo {
        (0..FOSD_GRID)
            .map(|k| lo + (hi - lo) * k as f64 / (FOSD_GRID - 1) as f64)
            .collect()
    } else {
        vec![lo]
    };
    for d in thresholds {
        if let ThresholdDist::Constant { value } = d {
            if value.is_finite() {
                grid.extend([*value, value - 1e-9 * value.abs().max(1.0)]);
            }
        }
    }
    for (t, w) in thresholds.windows(2).enumerate() {
        if let Some(x) = grid.iter().find(|&&x| w[1].cdf(x) > w[0].cdf(x) + FOSD_TOL) {
            return Err(RasError::Config(format!(
                "threshold in period {} does not first-order dominate period {} at x = {x}",
                t + 2,
                t + 1
            )));
        }
    }
    Ok(())
}

fn require_plain_sets(sets: &SetIndex, model: &SatisficingModel) -> Result<()> {
    dim_check("menu items", model.n_items(), sets.n_items())?;
    if sets.outside_mode() {
        return Err(RasError::Config(
            "satisficing search is defined without an outside option".into(),
        ));
    }
    Ok(())
}

/// Exact consideration-set probabilities: along a search order the set is the prefix
/// ending at the first item whose running-maximum utility clears τ, else the whole menu.
pub fn satisficing_exact_rule(sets: &SetIndex, model: &SatisficingModel) -> Result<AttentionRule> {
    require_plain_sets(sets, model)?;
    let full = sets.full_index();
    let rows = model
        .thresholds
        .iter()
        .map(|dist| {
            let mut row = vec![0.0; sets.len()];
            for (order, &p) in model.search.orders.iter().zip(&model.search.probs) {
                let mut mask = 0u64;
                let mut best = f64::NEG_INFINITY;
                let mut stopped_before = 0.0;
                for &item in order {
                    mask |= 1 << item;
                    best = best.max(model.utilities[item]);
                    let stopped = dist.cdf(best);
                    let s = sets
                        .index_of(ConsiderationSet::new(mask)?)
                        .expect("prefix is admissible");
                    row[s] += p * (stopped - stopped_before);
                    stopped_before = stopped;
                }
                row[full] += p * (1.0 - stopped_before);
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    AttentionRule::homogeneous(sets.clone(), rows)
}

/// Closed-form α(A|t) = Σ_σ Pr(σ)·Pr(τ(t) ≤ max utility on the longest prefix of σ inside A),
/// and α(S|t) = 1. `t` is zero-based.
pub fn satisficing_alpha(model: &SatisficingModel, set: ConsiderationSet, t: usize) -> Result<f64> {
    let n = model.n_items();
    let dist = model
        .thresholds
        .get(t)
        .ok_or_else(|| RasError::Validation(format!("period {} out of range", t + 1)))?;
    if set.mask() >> n != 0 {
        return Err(RasError::Validation(format!(
            "set {:#b} has items outside the menu",
            set.mask()
        )));
    }
    if set.len() == n {
        return Ok(1.0);
    }
    Ok(model
        .search
        .orders
        .iter()
        .zip(&model.search.probs)
        .map(|(order, &p)| {
            let best = order
                .iter()
                .take_while(|&&i| set.contains(i))
                .map(|&i| model.utilities[i])
                .reduce(f64::max);
            best.map_or(0.0, |u| p * dist.cdf(u))
        })
        .sum())
}

/// Simulated consideration sets and choices, `n_draws` agents per period.
#[derive(Debug, Clone)]
pub struct SatisficingOutput {
    /// Empirical μ̂(A|t).
    pub rule: AttentionRule,
    pub choices: ChoiceDataset,
    pub n_draws: usize,
}

/// Simulates the search process. Period t draws thresholds from its own distribution on
/// random stream t of `seed`.
pub fn gen_satisficing(
    sets: &SetIndex,
    model: &SatisficingModel,
    n_draws: usize,
    seed: u64,
) -> Result<SatisficingOutput> {
    require_plain_sets(sets, model)?;
    if n_draws == 0 {
        return Err(RasError::Config("n_draws must be positive".into()));
    }
    let order_dist = WeightedIndex::new(&model.search.probs)
        .map_err(|e| RasError::Config(format!("search order probabilities: {e}")))?;
    let n = model.n_items();
    let per_period: Vec<(Vec<u64>, Vec<u64>)> = (0..model.d_t())
        .into_par_iter()
        .map(|t| {
            let mut rng = stream_rng(seed, t as u64);
            let dist = model.thresholds[t];
            let mut set_counts = vec![0u64; sets.len()];
            let mut choice_counts = vec![0u64; n];
            let mut mask_counts = std::collections::HashMap::<u64, u64>::new();
            for _ in 0..n_draws {
                let order = &model.search.orders[order_dist.sample(&mut rng)];
                let tau = dist.sample(&mut rng);
                let mut mask = 0u64;
                let mut stopped = false;
                for &item in order {
                    mask |= 1 << item;
                    if model.utilities[item] >= tau {
                        stopped = true;
                        break;
                    }
                }
                if !stopped {
                    mask = u64::MAX >> (64 - n);
                }
                *mask_counts.entry(mask).or_default() += 1;
            }
            for (mask, c) in mask_counts {
                let s = sets
                    .index_of(ConsiderationSet::new(mask).expect("non-empty"))
                    .expect("every non-empty set is admissible");
                set_counts[s] += c;
                choice_counts[model.best_in(mask)] += c;
            }
            (set_counts, choice_counts)
        })
        .collect();
    let rows: Vec<Vec<f64>> = per_period
        .iter()
        .map(|(s, _)| s.iter().map(|&c| c as f64 / n_draws as f64).collect())
        .collect();
    let counts: Vec<Vec<u64>> = per_period.into_iter().map(|(_, c)| c).collect();
    Ok(SatisficingOutput {
        rule: AttentionRule::homogeneous(sets.clone(), rows)?,
        choices: ChoiceDataset::from_counts(&counts)?,
        n_draws,
    })
}
