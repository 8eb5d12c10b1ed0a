//! Hit-and-run generation of time-monotone attention rules.
//!
//! Each preference block is a chain of rows e⁰, e¹, … with e^{t+1} = e^t + γ·ξ, where
//! the accumulated direction ψ = zeta(ξ) is ≤ 0 on proper subsets and 0 on the full
//! set. Accumulated attention therefore never rises and every row keeps unit mass.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::attention::AttentionRule;
use crate::error::{dim_check, RasError, Result};
use crate::lattice::SetIndex;
use crate::rng::stream_rng;

/// How step directions are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DirectionScheme {
    /// Moves each set's mass onto a random mix of its supersets. ψ ≤ 0 by construction
    /// and the whole segment up to the target row is feasible, so the chain moves even
    /// from a vertex such as the outside-only row.
    UpwardTransport,
    /// Draws ψ with i.i.d. negative half-normal entries on proper subsets and recovers
    /// ξ by Möbius inversion. From a sparse row the step interval is usually empty.
    MoebiusConstructive,
    /// Draws Gaussian ξ with Σξ = 0 and keeps it when zeta(ξ) has a single sign.
    SignRejection,
}

impl std::str::FromStr for DirectionScheme {
    type Err = RasError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "upward-transport" | "transport" => Ok(Self::UpwardTransport),
            "moebius-constructive" | "moebius" => Ok(Self::MoebiusConstructive),
            "sign-rejection" | "rejection" => Ok(Self::SignRejection),
            other => Err(RasError::Config(format!(
                "unknown direction scheme {other:?}"
            ))),
        }
    }
}

/// Distribution of the step length on the feasible interval [0, γ_max].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GammaDraw {
    Uniform,
    /// Always step to the boundary.
    Maximal,
}

/// Row at the first period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialRow {
    /// The outside-only row in outside mode, uniform mass on singletons otherwise.
    Default,
    Fixed(Vec<f64>),
    /// A flat Dirichlet draw over the admissible sets, independently per block.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub d_t: usize,
    pub seed: u64,
    pub initial_row: InitialRow,
    pub gamma_draw: GammaDraw,
    pub scheme: DirectionScheme,
    /// Proposal budget per step for [`DirectionScheme::SignRejection`].
    pub max_direction_tries: usize,
}

impl SamplerConfig {
    pub fn new(d_t: usize, seed: u64) -> Self {
        Self {
            d_t,
            seed,
            initial_row: InitialRow::Default,
            gamma_draw: GammaDraw::Uniform,
            scheme: DirectionScheme::UpwardTransport,
            max_direction_tries: 1000,
        }
    }

    pub fn with_scheme(mut self, scheme: DirectionScheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_initial_row(mut self, initial_row: InitialRow) -> Self {
        self.initial_row = initial_row;
        self
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }
}

/// Mass 1 on the singleton {outside}: index 0 of an outside-mode enumeration.
pub fn initial_row_outside(sets: &SetIndex) -> Result<Vec<f64>> {
    if !sets.outside_mode() {
        return Err(RasError::Config(
            "the outside-only row needs outside-option mode".into(),
        ));
    }
    let mut row = vec![0.0; sets.len()];
    row[0] = 1.0;
    Ok(row)
}

/// Uniform mass on the singletons.
pub fn initial_row_singletons(sets: &SetIndex) -> Vec<f64> {
    let singles: Vec<usize> = (0..sets.len())
        .filter(|&s| sets.set(s).len() == 1)
        .collect();
    let mut row = vec![0.0; sets.len()];
    for &s in &singles {
        row[s] = 1.0 / singles.len() as f64;
    }
    row
}

pub fn default_initial_row(sets: &SetIndex) -> Vec<f64> {
    if sets.outside_mode() {
        initial_row_outside(sets).expect("outside mode checked")
    } else {
        initial_row_singletons(sets)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub row: Vec<f64>,
    pub gamma: f64,
    pub gamma_max: f64,
    /// No feasible movement was found; `row` is unchanged.
    pub zero_step: bool,
}

/// Largest γ keeping every entry of row + γ·ξ inside [0, 1]; 0 when no constraint binds.
pub fn feasible_gamma(row: &[f64], xi: &[f64]) -> f64 {
    let mut g = f64::INFINITY;
    for (&e, &x) in row.iter().zip(xi) {
        if x < 0.0 {
            g = g.min(e / -x);
        } else if x > 0.0 {
            g = g.min((1.0 - e) / x);
        }
    }
    if g.is_finite() {
        g.max(0.0)
    } else {
        0.0
    }
}

/// Advances `row` along a direction with ψ = zeta(ξ) ≤ 0.
pub fn step(
    row: &[f64],
    sets: &SetIndex,
    scheme: DirectionScheme,
    gamma_draw: GammaDraw,
    max_tries: usize,
    rng: &mut ChaCha8Rng,
) -> Result<StepOutcome> {
    dim_check("row length", sets.len(), row.len())?;
    let xi = match scheme {
        DirectionScheme::UpwardTransport => transport_direction(row, sets, rng),
        DirectionScheme::MoebiusConstructive => moebius_direction(sets, rng)?,
        DirectionScheme::SignRejection => rejection_direction(sets, max_tries, rng)?,
    };
    let gamma_max = xi.as_deref().map_or(0.0, |xi| feasible_gamma(row, xi));
    let Some(xi) = xi.filter(|_| gamma_max > 0.0) else {
        return Ok(StepOutcome {
            row: row.to_vec(),
            gamma: 0.0,
            gamma_max,
            zero_step: true,
        });
    };
    let gamma = match gamma_draw {
        GammaDraw::Uniform => rng.random::<f64>() * gamma_max,
        GammaDraw::Maximal => gamma_max,
    };
    let mut next: Vec<f64> = row
        .iter()
        .zip(&xi)
        .map(|(e, x)| (e + gamma * x).clamp(0.0, 1.0))
        .collect();
    let s: f64 = next.iter().sum();
    for v in &mut next {
        *v /= s;
    }
    Ok(StepOutcome {
        row: next,
        gamma,
        gamma_max,
        zero_step: false,
    })
}

/// Reduced coordinates of the free bits of `sets`; set `s` has reduced mask `s + offset`.
fn offset(sets: &SetIndex) -> usize {
    usize::from(!sets.outside_mode())
}

fn transport_direction(row: &[f64], sets: &SetIndex, rng: &mut ChaCha8Rng) -> Option<Vec<f64>> {
    const MAX_TARGETS: usize = 64;
    let off = offset(sets);
    let bits = (sets.len() + off).trailing_zeros() as usize;
    let full = (1usize << bits) - 1;
    let mut target = vec![0.0; row.len()];
    for (s, &mass) in row.iter().enumerate() {
        if mass <= 0.0 {
            continue;
        }
        let reduced = s + off;
        let missing = full & !reduced;
        let n_missing = missing.count_ones() as usize;
        let supersets: Vec<usize> = if n_missing < 7 {
            // every superset, including the set itself
            let mut out = Vec::with_capacity(1 << n_missing);
            let mut sub = missing;
            loop {
                out.push(reduced | sub);
                if sub == 0 {
                    break;
                }
                sub = (sub - 1) & missing;
            }
            out
        } else {
            (0..MAX_TARGETS)
                .map(|_| reduced | (missing & rng.random::<u64>() as usize))
                .collect()
        };
        let weights: Vec<f64> = supersets.iter().map(|_| Exp1.sample(rng)).collect();
        let total: f64 = weights.iter().sum();
        for (&sup, w) in supersets.iter().zip(&weights) {
            target[sup - off] += mass * w / total;
        }
    }
    let xi: Vec<f64> = target.iter().zip(row).map(|(v, e)| v - e).collect();
    xi.iter().any(|&x| x != 0.0).then_some(xi)
}

fn moebius_direction(sets: &SetIndex, rng: &mut ChaCha8Rng) -> Result<Option<Vec<f64>>> {
    let full = sets.full_index();
    let psi: Vec<f64> = (0..sets.len())
        .map(|s| {
            if s == full {
                0.0
            } else {
                let z: f64 = StandardNormal.sample(rng);
                -z.abs()
            }
        })
        .collect();
    Ok(Some(sets.moebius(&psi)?))
}

fn rejection_direction(
    sets: &SetIndex,
    max_tries: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Option<Vec<f64>>> {
    let full = sets.full_index();
    for _ in 0..max_tries {
        let mut xi: Vec<f64> = (0..sets.len())
            .map(|_| StandardNormal.sample(rng))
            .collect();
        let mean = xi.iter().sum::<f64>() / xi.len() as f64;
        for v in &mut xi {
            *v -= mean;
        }
        let psi = sets.zeta(&xi)?;
        let proper = psi
            .iter()
            .enumerate()
            .filter(|&(s, _)| s != full)
            .map(|(_, v)| *v);
        if proper.clone().all(|v| v <= 0.0) {
            return Ok(Some(xi));
        }
        if proper.clone().all(|v| v >= 0.0) {
            return Ok(Some(xi.iter().map(|v| -v).collect()));
        }
    }
    Ok(None)
}

/// Flat Dirichlet draw of length `len`.
pub fn random_row(len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let w: Vec<f64> = (0..len).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = w.iter().sum();
    w.iter().map(|x| x / total).collect()
}

/// A sampled rule with the number of steps that could not move.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledRule {
    pub rule: AttentionRule,
    pub zero_steps: usize,
}

/// Stacks one independent chain per preference block (stream `pref` of `config.seed`).
pub fn sample_attention_rule(
    sets: &SetIndex,
    d_pref: usize,
    config: &SamplerConfig,
) -> Result<SampledRule> {
    if config.d_t == 0 || d_pref == 0 {
        return Err(RasError::Config(
            "sampling needs at least one period and preference".into(),
        ));
    }
    let fixed = match &config.initial_row {
        InitialRow::Fixed(row) => {
            dim_check("initial row length", sets.len(), row.len())?;
            AttentionRule::homogeneous(sets.clone(), vec![row.clone()])?;
            Some(row.clone())
        }
        InitialRow::Default => Some(default_initial_row(sets)),
        InitialRow::Random => None,
    };
    let mut zero_steps = 0;
    let mut blocks = Vec::with_capacity(d_pref);
    for pref in 0..d_pref {
        let mut rng = stream_rng(config.seed, pref as u64);
        let mut rows = Vec::with_capacity(config.d_t);
        rows.push(match &fixed {
            Some(row) => row.clone(),
            None => random_row(sets.len(), &mut rng),
        });
        for _ in 1..config.d_t {
            let out = step(
                rows.last().expect("non-empty"),
                sets,
                config.scheme,
                config.gamma_draw,
                config.max_direction_tries,
                &mut rng,
            )?;
            zero_steps += usize::from(out.zero_step);
            rows.push(out.row);
        }
        blocks.push(rows);
    }
    Ok(SampledRule {
        rule: AttentionRule::from_blocks(sets.clone(), &blocks)?,
        zero_steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attention::{check_time_monotonicity, MONOTONICITY_TOL};
    use crate::menu::Menu;
    use rand::SeedableRng;

    fn outside_sets(n: usize) -> SetIndex {
        let menu = Menu::new((0..n).map(|i| format!("i{i}")))
            .unwrap()
            .with_outside(n - 1)
            .unwrap();
        SetIndex::new(&menu, true).unwrap()
    }

    const SCHEMES: [DirectionScheme; 3] = [
        DirectionScheme::UpwardTransport,
        DirectionScheme::MoebiusConstructive,
        DirectionScheme::SignRejection,
    ];

    #[test]
    fn outside_initial_rows() {
        let row = initial_row_outside(&outside_sets(6)).unwrap();
        assert_eq!(row.len(), 32);
        assert_eq!(row.iter().filter(|&&v| v == 1.0).count(), 1);
        let two = outside_sets(2);
        let row = initial_row_outside(&two).unwrap();
        assert_eq!(row, vec![1.0, 0.0]);
        assert_eq!(two.zeta(&row).unwrap()[0], 1.0);
        assert!(initial_row_outside(&SetIndex::full(3).unwrap()).is_err());
        let singles = initial_row_singletons(&SetIndex::full(3).unwrap());
        assert_eq!(singles.iter().filter(|&&v| v > 0.0).count(), 3);
    }

    #[test]
    fn zero_direction_leaves_the_row() {
        let row = vec![0.25, 0.25, 0.5];
        assert_eq!(feasible_gamma(&row, &[0.0, 0.0, 0.0]), 0.0);
        assert_eq!(feasible_gamma(&row, &[-0.5, 0.0, 0.5]), 0.5);
    }

    #[test]
    fn steps_keep_the_outside_singleton_nonincreasing() {
        let sets = outside_sets(4);
        for scheme in SCHEMES {
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let mut row = initial_row_outside(&sets).unwrap();
            for _ in 0..200 {
                let out = step(&row, &sets, scheme, GammaDraw::Uniform, 100, &mut rng).unwrap();
                assert!(out.row[0] <= row[0] + 1e-15);
                assert!(out.gamma <= out.gamma_max);
                row = out.row;
            }
        }
    }

    #[test]
    fn long_chains_stay_monotone() {
        for scheme in SCHEMES {
            let sets = SetIndex::full(4).unwrap();
            let config = SamplerConfig::new(1000, 11).with_scheme(scheme);
            let sampled = sample_attention_rule(&sets, 1, &config).unwrap();
            let report = check_time_monotonicity(&sampled.rule, MONOTONICITY_TOL);
            assert!(report.passes, "{scheme:?}: {:?}", report.violations.first());
        }
    }

    #[test]
    fn single_period_is_the_initial_row() {
        let sets = outside_sets(3);
        let sampled = sample_attention_rule(&sets, 3, &SamplerConfig::new(1, 5)).unwrap();
        for pref in 0..3 {
            assert_eq!(
                sampled.rule.block_row(pref, 0),
                initial_row_outside(&sets).unwrap()
            );
        }
    }

    #[test]
    fn random_initial_rows_differ_by_block_and_stay_monotone() {
        let sets = SetIndex::full(3).unwrap();
        let config = SamplerConfig::new(4, 8).with_initial_row(InitialRow::Random);
        let sampled = sample_attention_rule(&sets, 3, &config).unwrap();
        let first: Vec<Vec<f64>> = (0..3).map(|p| sampled.rule.block_row(p, 0)).collect();
        assert_ne!(first[0], first[1]);
        for row in &first {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(row.iter().all(|&x| x > 0.0));
        }
        assert!(check_time_monotonicity(&sampled.rule, MONOTONICITY_TOL).passes);
        let fixed = vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0];
        let sampled = sample_attention_rule(
            &sets,
            2,
            &config.with_initial_row(InitialRow::Fixed(fixed.clone())),
        )
        .unwrap();
        assert_eq!(sampled.rule.block_row(1, 0), fixed);
        let bad = SamplerConfig::new(2, 0).with_initial_row(InitialRow::Fixed(vec![1.0]));
        assert!(sample_attention_rule(&sets, 1, &bad).is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        let sets = outside_sets(6);
        let config = SamplerConfig::new(6, 2024);
        let a = sample_attention_rule(&sets, 6, &config).unwrap();
        let b = sample_attention_rule(&sets, 6, &config).unwrap();
        assert_eq!(a, b);
        let c = sample_attention_rule(&sets, 6, &config.with_seed(2025)).unwrap();
        assert_ne!(a.rule, c.rule);
    }

    #[test]
    fn transport_chain_leaves_the_starting_vertex() {
        let sets = outside_sets(4);
        let start = initial_row_outside(&sets).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut row = start.clone();
        let mut moved = false;
        for _ in 0..100 {
            row = step(
                &row,
                &sets,
                DirectionScheme::UpwardTransport,
                GammaDraw::Uniform,
                1,
                &mut rng,
            )
            .unwrap()
            .row;
            if row.iter().zip(&start).any(|(a, b)| (a - b).abs() > 0.01) {
                moved = true;
                break;
            }
        }
        assert!(moved);
    }

    #[test]
    fn scheme_names_parse() {
        assert_eq!(
            "transport".parse::<DirectionScheme>().unwrap(),
            DirectionScheme::UpwardTransport
        );
        assert_eq!(
            "moebius-constructive".parse::<DirectionScheme>().unwrap(),
            DirectionScheme::MoebiusConstructive
        );
        assert!("other".parse::<DirectionScheme>().is_err());
    }
}
