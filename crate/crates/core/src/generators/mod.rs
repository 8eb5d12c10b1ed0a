//! Attention-rule generators with known monotonicity properties, used as test oracles
//! and for synthetic data.

mod satisficing;

pub use satisficing::{
    gen_satisficing, satisficing_alpha, satisficing_exact_rule, SatisficingModel,
    SatisficingOutput, SearchDistribution, ThresholdDist,
};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::attention::AttentionRule;
use crate::error::{dim_check, RasError, Result};
use crate::lattice::SetIndex;
use crate::menu::ConsiderationSet;

/// Top-N search: at period t (1-based) the first min(t, n) items of `search_order`
/// are considered, plus the outside option in outside mode. `search_order` lists every
/// item once; the outside option may be left out.
pub fn gen_topn(sets: &SetIndex, d_t: usize, search_order: &[usize]) -> Result<AttentionRule> {
    let n = sets.n_items();
    let forced = sets.forced_item().map_or(0, |i| 1u64 << i);
    let listed = search_order.iter().try_fold(0u64, |m, &i| {
        (i < n && m & (1 << i) == 0).then_some(m | (1 << i))
    });
    match listed {
        Some(m) if m | forced == (u64::MAX >> (64 - n)) => {}
        _ => {
            return Err(RasError::Validation(format!(
                "search order {search_order:?} is not an ordering of the {n}-item menu"
            )))
        }
    }
    let rows = (1..=d_t)
        .map(|t| {
            let k = t.min(search_order.len());
            let mask = search_order[..k].iter().fold(forced, |m, &i| m | (1 << i));
            let idx = sets
                .index_of(ConsiderationSet::new(mask)?)
                .ok_or_else(|| RasError::Domain(format!("set {mask:#b} is not admissible")))?;
            let mut row = vec![0.0; sets.len()];
            row[idx] = 1.0;
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    AttentionRule::homogeneous(sets.clone(), rows)
}

/// Per-item consideration probabilities γ[pref][t][item].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<Vec<f64>>>", into = "Vec<Vec<Vec<f64>>>")]
pub struct GammaSchedule {
    gamma: Vec<Vec<Vec<f64>>>,
}

impl GammaSchedule {
    pub fn new(gamma: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let d_t = gamma.first().map_or(0, Vec::len);
        let n = gamma.first().and_then(|b| b.first()).map_or(0, Vec::len);
        if d_t == 0 || n == 0 {
            return Err(RasError::Validation("empty gamma schedule".into()));
        }
        for (i, block) in gamma.iter().enumerate() {
            if block.len() != d_t || block.iter().any(|r| r.len() != n) {
                return Err(RasError::Dimension(format!(
                    "preference {i} is not {d_t} x {n}"
                )));
            }
            if let Some(v) = block.iter().flatten().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(RasError::Validation(format!("gamma {v} outside [0, 1]")));
            }
            for t in 1..d_t {
                for a in 0..n {
                    if block[t][a] < block[t - 1][a] {
                        return Err(RasError::Validation(format!(
                            "gamma for item {a} falls between periods {t} and {}",
                            t + 1
                        )));
                    }
                }
            }
        }
        Ok(Self { gamma })
    }

    /// One preference, `rows[t][item]`.
    pub fn homogeneous(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(vec![rows])
    }

    pub fn d_pref(&self) -> usize {
        self.gamma.len()
    }

    pub fn d_t(&self) -> usize {
        self.gamma[0].len()
    }

    pub fn n_items(&self) -> usize {
        self.gamma[0][0].len()
    }

    pub fn get(&self, pref: usize, t: usize, item: usize) -> f64 {
        self.gamma[pref][t][item]
    }
}

impl TryFrom<Vec<Vec<Vec<f64>>>> for GammaSchedule {
    type Error = RasError;

    fn try_from(g: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        Self::new(g)
    }
}

impl From<GammaSchedule> for Vec<Vec<Vec<f64>>> {
    fn from(s: GammaSchedule) -> Self {
        s.gamma
    }
}

/// Independent consideration: μ(A) = Π_{a∈A} γ(a) · Π_{b∉A} (1 − γ(b)). In outside
/// mode the outside option must have γ = 1; otherwise mass is conditioned on a
/// non-empty set.
pub fn gen_mm(sets: &SetIndex, schedule: &GammaSchedule) -> Result<AttentionRule> {
    let n = sets.n_items();
    dim_check("gamma items", n, schedule.n_items())?;
    if let Some(o) = sets.forced_item() {
        for i in 0..schedule.d_pref() {
            for t in 0..schedule.d_t() {
                if schedule.get(i, t, o) != 1.0 {
                    return Err(RasError::Config(
                        "the outside option must be considered with probability 1".into(),
                    ));
                }
            }
        }
    }
    let mut blocks = Vec::with_capacity(schedule.d_pref());
    for i in 0..schedule.d_pref() {
        let mut rows = Vec::with_capacity(schedule.d_t());
        for t in 0..schedule.d_t() {
            let g = |a: usize| schedule.get(i, t, a);
            let mut row: Vec<f64> = sets
                .sets()
                .iter()
                .map(|s| {
                    (0..n)
                        .map(|a| if s.contains(a) { g(a) } else { 1.0 - g(a) })
                        .product()
                })
                .collect();
            if sets.forced_item().is_none() {
                let empty: f64 = (0..n).map(|a| 1.0 - g(a)).product();
                let mass = 1.0 - empty;
                if mass <= 0.0 {
                    return Err(RasError::Domain(format!(
                        "period {} of preference {i} considers nothing",
                        t + 1
                    )));
                }
                for v in &mut row {
                    *v /= mass;
                }
            }
            rows.push(row);
        }
        blocks.push(rows);
    }
    AttentionRule::from_blocks(sets.clone(), &blocks)
}

/// α(A) = Π_{b∉A} (1 − γ(b)) for one period's γ.
pub fn mm_alpha(gamma: &[f64], set: ConsiderationSet) -> f64 {
    gamma
        .iter()
        .enumerate()
        .filter(|(b, _)| !set.contains(*b))
        .map(|(_, g)| 1.0 - g)
        .product()
}

/// Probability that a drifting Brownian saliency score v·t + σB_t clears `tau` at time t.
pub fn diffusion_gamma(drift: f64, sigma: f64, tau: f64, t: f64) -> f64 {
    let z = (tau - drift * t) / (t.sqrt() * sigma);
    1.0 - Normal::standard().cdf(z)
}

/// Saliency diffusion: γ_t(a) = 1 − Φ((τ_a(t) − v_a·t)/(√t·σ)) at t = 1..d_t, then
/// [`gen_mm`]. `thresholds[t][item]` must be nonnegative and must not rise over time.
/// With a negative drift γ can still fall; the schedule check then reports it.
pub fn gen_diffusion(
    sets: &SetIndex,
    drifts: &[f64],
    sigma: f64,
    thresholds: &[Vec<f64>],
) -> Result<AttentionRule> {
    let n = sets.n_items();
    dim_check("drifts", n, drifts.len())?;
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(RasError::Config(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    if thresholds.is_empty() {
        return Err(RasError::Config(
            "at least one period of thresholds is required".into(),
        ));
    }
    for row in thresholds {
        dim_check("thresholds per period", n, row.len())?;
    }
    let outside = sets.forced_item();
    for (t, row) in thresholds.iter().enumerate() {
        if let Some(a) = (0..n).find(|&a| Some(a) != outside && !(row[a] >= 0.0)) {
            return Err(RasError::Config(format!(
                "threshold for item {a} in period {} must be nonnegative, got {}",
                t + 1,
                row[a]
            )));
        }
    }
    for t in 1..thresholds.len() {
        for a in 0..n {
            if thresholds[t][a] > thresholds[t - 1][a] {
                return Err(RasError::Config(format!(
                    "threshold for item {a} increases between periods {t} and {}",
                    t + 1
                )));
            }
        }
    }
    let rows = thresholds
        .iter()
        .enumerate()
        .map(|(t, taus)| {
            (0..n)
                .map(|a| {
                    if Some(a) == outside {
                        1.0
                    } else {
                        diffusion_gamma(drifts[a], sigma, taus[a], (t + 1) as f64)
                    }
                })
                .collect()
        })
        .collect();
    gen_mm(sets, &GammaSchedule::homogeneous(rows)?)
}
