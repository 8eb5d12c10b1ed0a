//! Simulation estimator: sample K monotone attention rules, fit the preference
//! distribution to each by simplex-constrained least squares, keep the closest fit.

use rayon::prelude::*;
use serde::Serialize;

use crate::attention::AttentionRule;
use crate::choice::{ChoiceDataset, PreferenceDistribution};
use crate::error::{dim_check, RasError, Result};
use crate::lattice::SetIndex;
use crate::matrix::{build_choice_transform, design_matrix, ChoiceTransform};
use crate::menu::OrderingSet;
use crate::qp::{simplex_least_squares, QpOptions};
use crate::rng::derive_seed;
use crate::sampler::{sample_attention_rule, SamplerConfig};

pub const SCHEMA_VERSION: u32 = 1;

/// Fits p on the simplex to minimize ‖U·A·P − Π̂‖²; returns p and the minimized distance.
pub fn solve_p(
    rule: &AttentionRule,
    transform: &ChoiceTransform,
    pi: &ChoiceDataset,
) -> Result<(PreferenceDistribution, f64)> {
    solve_p_with(rule, transform, pi, &QpOptions::default())
}

pub fn solve_p_with(
    rule: &AttentionRule,
    transform: &ChoiceTransform,
    pi: &ChoiceDataset,
    opts: &QpOptions,
) -> Result<(PreferenceDistribution, f64)> {
    dim_check("periods", pi.n_periods(), rule.d_t())?;
    dim_check("items", pi.n_items(), transform.n_items())?;
    let m = design_matrix(rule, transform)?;
    let sol = simplex_least_squares(&m, &pi.vec(), 0.0, 1.0, opts)?;
    let p = PreferenceDistribution::from_solver(sol.x);
    let distance = (&m * p.to_dvector() - pi.vec()).norm_squared();
    Ok((p, distance))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    pub sims: usize,
    /// Simulation `k` samples with seed `derive_seed(sampler.seed, k)`.
    pub sampler: SamplerConfig,
    pub qp: QpOptions,
}

impl EstimatorConfig {
    pub fn new(sims: usize, sampler: SamplerConfig) -> Self {
        Self {
            sims,
            sampler,
            qp: QpOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimationResult {
    pub schema_version: u32,
    pub best_index: usize,
    pub best_p: PreferenceDistribution,
    pub best_distance: f64,
    pub best_rule: AttentionRule,
    /// `None` where the fit failed.
    pub per_sim_distances: Vec<Option<f64>>,
    pub failures: usize,
    pub sims: usize,
    pub seed: Option<u64>,
}

impl EstimationResult {
    /// Smallest distance among the first `k` simulations.
    pub fn best_distance_within(&self, k: usize) -> Option<f64> {
        self.per_sim_distances[..k.min(self.per_sim_distances.len())]
            .iter()
            .flatten()
            .copied()
            .min_by(f64::total_cmp)
    }
}

/// Seed of simulation `k`.
pub fn simulation_seed(base: u64, k: usize) -> u64 {
    derive_seed(base, k as u64)
}

fn sample_sim(
    sets: &SetIndex,
    d_pref: usize,
    config: &EstimatorConfig,
    k: usize,
) -> Result<AttentionRule> {
    let sampler = config
        .sampler
        .with_seed(simulation_seed(config.sampler.seed, k));
    Ok(sample_attention_rule(sets, d_pref, &sampler)?.rule)
}

/// Argmin with ties to the smallest index.
fn pick_best(fits: &[Option<(PreferenceDistribution, f64)>]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (k, fit) in fits.iter().enumerate() {
        if let Some((_, d)) = fit {
            if best.is_none_or(|(_, b)| *d < b) {
                best = Some((k, *d));
            }
        }
    }
    best.map(|(k, _)| k)
}

fn assemble(
    fits: Vec<Option<(PreferenceDistribution, f64)>>,
    rule_of: impl Fn(usize) -> Result<AttentionRule>,
    seed: Option<u64>,
) -> Result<EstimationResult> {
    let sims = fits.len();
    let best_index = pick_best(&fits).ok_or(RasError::AllSimulationsFailed(sims))?;
    let per_sim_distances: Vec<Option<f64>> =
        fits.iter().map(|f| f.as_ref().map(|(_, d)| *d)).collect();
    let failures = per_sim_distances.iter().filter(|d| d.is_none()).count();
    let (best_p, best_distance) = fits[best_index].clone().expect("best fit exists");
    Ok(EstimationResult {
        schema_version: SCHEMA_VERSION,
        best_index,
        best_p,
        best_distance,
        best_rule: rule_of(best_index)?,
        per_sim_distances,
        failures,
        sims,
        seed,
    })
}

fn fit_or_skip(
    k: usize,
    fit: Result<(PreferenceDistribution, f64)>,
) -> Option<(PreferenceDistribution, f64)> {
    match fit {
        Ok(f) => Some(f),
        Err(e) => {
            log::warn!("simulation {k} skipped: {e}");
            None
        }
    }
}

/// Runs `config.sims` simulations in parallel and returns the best fit.
pub fn estimate(
    pi: &ChoiceDataset,
    sets: &SetIndex,
    orderings: &OrderingSet,
    config: &EstimatorConfig,
) -> Result<EstimationResult> {
    if config.sims == 0 {
        return Err(RasError::Config(
            "at least one simulation is required".into(),
        ));
    }
    dim_check("items", sets.n_items(), pi.n_items())?;
    let transform = build_choice_transform(sets, orderings)?;
    let sampler = SamplerConfig {
        d_t: pi.n_periods(),
        ..config.sampler.clone()
    };
    let config = EstimatorConfig {
        sampler,
        ..config.clone()
    };
    let d_pref = orderings.len();
    let fits: Vec<_> = (0..config.sims)
        .into_par_iter()
        .map(|k| {
            let fit = sample_sim(sets, d_pref, &config, k)
                .and_then(|rule| solve_p_with(&rule, &transform, pi, &config.qp));
            fit_or_skip(k, fit)
        })
        .collect();
    assemble(
        fits,
        |k| sample_sim(sets, d_pref, &config, k),
        Some(config.sampler.seed),
    )
}

/// Fits every rule of a given pool, e.g. one that contains a known true rule.
pub fn estimate_from_rules(
    pi: &ChoiceDataset,
    transform: &ChoiceTransform,
    rules: &[AttentionRule],
    qp: &QpOptions,
) -> Result<EstimationResult> {
    if rules.is_empty() {
        return Err(RasError::Config("the rule pool is empty".into()));
    }
    let fits: Vec<_> = rules
        .par_iter()
        .enumerate()
        .map(|(k, rule)| fit_or_skip(k, solve_p_with(rule, transform, pi, qp)))
        .collect();
    assemble(fits, |k| Ok(rules[k].clone()), None)
}
