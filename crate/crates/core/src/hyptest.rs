//! Specification test for a fixed attention rule: a weighted distance statistic with a
//! shrunken preference cone and a recentered per-period multinomial bootstrap.

use nalgebra::{DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rayon::prelude::*;
use serde::Serialize;

use crate::attention::AttentionRule;
use crate::choice::ChoiceDataset;
use crate::error::{dim_check, RasError, Result};
use crate::estimator::SCHEMA_VERSION;
use crate::matrix::{design_matrix, ChoiceTransform};
use crate::qp::{bounded_least_squares, simplex_least_squares, QpOptions};
use crate::rng::stream_rng;

/// Variances at or below this are treated as zero by the generalized inverse.
pub const VARIANCE_EPS: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq)]
pub struct TestConfig {
    /// Shrinkage τ_n; `None` picks [`default_tau`].
    pub tau: Option<f64>,
    pub boot: usize,
    pub alpha: f64,
    pub seed: u64,
    /// Impose Σp = 1 in addition to p ≥ τ_n/d.
    pub simplex_sum: bool,
    pub qp: QpOptions,
}

impl TestConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            tau: None,
            boot: 999,
            alpha: 0.05,
            seed,
            simplex_sum: true,
            qp: QpOptions::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.boot == 0 {
            return Err(RasError::Config(
                "at least one bootstrap replication is required".into(),
            ));
        }
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return Err(RasError::Config(format!(
                "alpha must lie in (0, 0.5), got {}",
                self.alpha
            )));
        }
        if let Some(tau) = self.tau {
            if !(tau >= 0.0 && tau.is_finite()) {
                return Err(RasError::Config(format!(
                    "tau must be nonnegative, got {tau}"
                )));
            }
        }
        Ok(())
    }
}

/// min(√(ln d / n), 1/(2d)).
pub fn default_tau(d_pref: usize, n: u64) -> f64 {
    let d = d_pref as f64;
    ((d.ln() / n as f64).sqrt()).min(1.0 / (2.0 * d))
}

/// Per-cell variances Ω̂ and their generalized inverse, row-major over (period, item).
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceWeights {
    pub omega: Vec<f64>,
    pub inverse: Vec<f64>,
}

impl VarianceWeights {
    pub fn all_zero(&self) -> bool {
        self.inverse.iter().all(|&w| w == 0.0)
    }
}

/// Ω̂_ii = π̂_i(1 − π̂_i)/n_t; inverse 1/Ω̂_ii above [`VARIANCE_EPS`], else 0.
pub fn variance_weights(pi: &ChoiceDataset) -> Result<VarianceWeights> {
    let counts = pi.period_counts().ok_or_else(|| {
        RasError::Validation("variance weights need per-period sample sizes".into())
    })?;
    let mut omega = Vec::with_capacity(pi.n_periods() * pi.n_items());
    for (t, &n_t) in counts.iter().enumerate() {
        for j in 0..pi.n_items() {
            let p = pi.get(t, j);
            omega.push(p * (1.0 - p) / n_t as f64);
        }
    }
    Ok(weights_from_omega(omega))
}

fn weights_from_omega(omega: Vec<f64>) -> VarianceWeights {
    let inverse = omega
        .iter()
        .map(|&o| if o > VARIANCE_EPS { 1.0 / o } else { 0.0 })
        .collect();
    VarianceWeights { omega, inverse }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Statistic {
    pub t_n: f64,
    pub p_tau: Vec<f64>,
    /// η̂ = Û·A·P_τ, row-major over (period, item).
    pub eta_hat: Vec<f64>,
    /// Every weight was zero, so the statistic is trivially 0.
    pub degenerate: bool,
}

/// n · min over p ≥ τ/d (and Σp = 1 unless disabled) of Σ w_i (π̂_i − (M·p)_i)².
pub fn statistic_from_design(
    m: &DMatrix<f64>,
    pi_vec: &DVector<f64>,
    weights: &VarianceWeights,
    tau: f64,
    n: u64,
    simplex_sum: bool,
    qp: &QpOptions,
) -> Result<Statistic> {
    dim_check("weights", m.nrows(), weights.inverse.len())?;
    dim_check("data", m.nrows(), pi_vec.len())?;
    let d = m.ncols();
    let lower = tau / d as f64;
    let sw: Vec<f64> = weights.inverse.iter().map(|w| w.sqrt()).collect();
    let mw = DMatrix::from_fn(m.nrows(), d, |r, c| m[(r, c)] * sw[r]);
    let bw = DVector::from_fn(m.nrows(), |r, _| pi_vec[r] * sw[r]);
    let sol = if simplex_sum {
        simplex_least_squares(&mw, &bw, lower, 1.0, qp)?
    } else {
        bounded_least_squares(&mw, &bw, lower, qp)?
    };
    let eta = m * DVector::from_column_slice(&sol.x);
    let quad: f64 = (0..m.nrows())
        .map(|r| weights.inverse[r] * (pi_vec[r] - eta[r]).powi(2))
        .sum();
    let degenerate = weights.all_zero();
    Ok(Statistic {
        t_n: n as f64 * quad,
        p_tau: sol.x,
        eta_hat: eta.iter().copied().collect(),
        degenerate,
    })
}

pub fn test_statistic(
    pi: &ChoiceDataset,
    rule: &AttentionRule,
    transform: &ChoiceTransform,
    weights: &VarianceWeights,
    tau: f64,
    n: u64,
    simplex_sum: bool,
) -> Result<Statistic> {
    dim_check("periods", rule.d_t(), pi.n_periods())?;
    let m = design_matrix(rule, transform)?;
    statistic_from_design(
        &m,
        &pi.vec(),
        weights,
        tau,
        n,
        simplex_sum,
        &QpOptions::default(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestResult {
    pub schema_version: u32,
    pub t_n: f64,
    pub critical_value: f64,
    pub p_value: f64,
    pub reject: bool,
    pub alpha: f64,
    pub tau: f64,
    pub boot: usize,
    pub seed: u64,
    pub simplex_sum: bool,
    pub p_tau: Vec<f64>,
    /// Recentering target, one row per period.
    pub eta_hat: Vec<Vec<f64>>,
    pub degenerate_weights: bool,
    #[serde(skip)]
    pub boot_stats: Vec<f64>,
}

/// Multinomial resample of each period with its observed sample size.
fn resample(pi: &ChoiceDataset, counts: &[u64], rng: &mut impl rand::Rng) -> Result<Vec<f64>> {
    let n_items = pi.n_items();
    let mut out = Vec::with_capacity(pi.n_periods() * n_items);
    for (t, &n_t) in counts.iter().enumerate() {
        let row: Vec<f64> = (0..n_items).map(|j| pi.get(t, j)).collect();
        let dist = WeightedIndex::new(&row)
            .map_err(|e| RasError::Domain(format!("period {} cannot be resampled: {e}", t + 1)))?;
        let mut tally = vec![0u64; n_items];
        for _ in 0..n_t {
            tally[dist.sample(rng)] += 1;
        }
        out.extend(tally.iter().map(|&c| c as f64 / n_t as f64));
    }
    Ok(out)
}

/// T_n and its recentered bootstrap distribution with Û held fixed.
pub fn bootstrap_test(
    pi: &ChoiceDataset,
    rule: &AttentionRule,
    transform: &ChoiceTransform,
    config: &TestConfig,
) -> Result<TestResult> {
    config.validate()?;
    dim_check("periods", rule.d_t(), pi.n_periods())?;
    let counts = pi
        .period_counts()
        .ok_or_else(|| RasError::Validation("the bootstrap needs per-period sample sizes".into()))?
        .to_vec();
    let n: u64 = counts.iter().sum();
    let m = design_matrix(rule, transform)?;
    let d = m.ncols();
    let tau = config.tau.unwrap_or_else(|| default_tau(d, n));
    if config.simplex_sum && tau > 1.0 + 1e-12 {
        return Err(RasError::Config(format!(
            "tau {tau} leaves no point with p >= tau/d summing to 1"
        )));
    }
    let pi_vec = pi.vec();
    let weights = variance_weights(pi)?;
    let stat = statistic_from_design(
        &m,
        &pi_vec,
        &weights,
        tau,
        n,
        config.simplex_sum,
        &config.qp,
    )?;
    if stat.degenerate {
        log::warn!("all variance weights are zero; the statistic is identically 0");
    }
    let n_items = pi.n_items();

    let boot_stats: Vec<f64> = (0..config.boot)
        .into_par_iter()
        .map(|l| {
            let mut rng = stream_rng(config.seed, l as u64);
            let raw = resample(pi, &counts, &mut rng)?;
            let omega: Vec<f64> = raw
                .iter()
                .enumerate()
                .map(|(i, &p)| p * (1.0 - p) / counts[i / n_items] as f64)
                .collect();
            let w = weights_from_omega(omega);
            let centered = DVector::from_fn(raw.len(), |i, _| raw[i] - pi_vec[i] + stat.eta_hat[i]);
            Ok(
                statistic_from_design(&m, &centered, &w, tau, n, config.simplex_sum, &config.qp)?
                    .t_n,
            )
        })
        .collect::<Result<_>>()?;

    let exceed = boot_stats.iter().filter(|&&b| b >= stat.t_n).count();
    let p_value = (1 + exceed) as f64 / (config.boot + 1) as f64;
    let mut sorted = boot_stats.clone();
    sorted.sort_by(f64::total_cmp);
    let k =
        (((1.0 - config.alpha) * (config.boot + 1) as f64).ceil() as usize).clamp(1, config.boot);
    let critical_value = sorted[k - 1];
    Ok(TestResult {
        schema_version: SCHEMA_VERSION,
        t_n: stat.t_n,
        critical_value,
        p_value,
        reject: stat.t_n > critical_value,
        alpha: config.alpha,
        tau,
        boot: config.boot,
        seed: config.seed,
        simplex_sum: config.simplex_sum,
        p_tau: stat.p_tau,
        eta_hat: stat.eta_hat.chunks(n_items).map(<[f64]>::to_vec).collect(),
        degenerate_weights: stat.degenerate,
        boot_stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::choice::PreferenceDistribution;
    use crate::lattice::SetIndex;
    use crate::matrix::{build_choice_transform, predict_choices};
    use crate::menu::OrderingSet;
    use crate::sampler::{sample_attention_rule, SamplerConfig};

    fn two_item_model() -> (AttentionRule, ChoiceTransform) {
        let sets = SetIndex::full(2).unwrap();
        let ords = OrderingSet::all(2).unwrap();
        let t = build_choice_transform(&sets, &ords).unwrap();
        // pref 0 sees {a}, then {a,b}; pref 1 sees {a,b} throughout
        let rule = AttentionRule::from_blocks(
            sets,
            &[
                vec![vec![0.6, 0.0, 0.4], vec![0.2, 0.0, 0.8]],
                vec![vec![0.0, 0.3, 0.7], vec![0.0, 0.1, 0.9]],
            ],
        )
        .unwrap();
        (rule, t)
    }

    #[test]
    fn variance_weight_examples() {
        let pi = ChoiceDataset::from_rows(&[vec![0.5, 0.5], vec![0.0, 1.0]])
            .unwrap()
            .with_counts(vec![100, 50])
            .unwrap();
        let w = variance_weights(&pi).unwrap();
        assert!((w.omega[0] - 0.0025).abs() < 1e-15);
        assert!((w.inverse[0] - 400.0).abs() < 1e-9);
        assert_eq!(&w.inverse[2..], &[0.0, 0.0]);
        let no_counts = ChoiceDataset::from_rows(&[vec![0.5, 0.5]]).unwrap();
        assert!(variance_weights(&no_counts).is_err());
    }

    #[test]
    fn default_tau_respects_the_cap() {
        assert_eq!(default_tau(1, 100), 0.0);
        assert!((default_tau(6, 1_000_000) - (6f64.ln() / 1e6).sqrt()).abs() < 1e-15);
        assert_eq!(default_tau(6, 10), 1.0 / 12.0);
    }

    #[test]
    fn exact_model_data_gives_zero_statistic() {
        let (rule, t) = two_item_model();
        let p = PreferenceDistribution::new(vec![0.3, 0.7]).unwrap();
        let pi = predict_choices(&rule, &t, &p)
            .unwrap()
            .with_counts(vec![200, 200])
            .unwrap();
        let w = variance_weights(&pi).unwrap();
        let s = test_statistic(&pi, &rule, &t, &w, 0.0, 400, true).unwrap();
        assert!(s.t_n < 1e-12);
        assert!((s.p_tau[0] - 0.3).abs() < 1e-8);
    }

    #[test]
    fn zero_weights_are_degenerate() {
        let (rule, t) = two_item_model();
        let pi = ChoiceDataset::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]])
            .unwrap()
            .with_counts(vec![10, 10])
            .unwrap();
        let w = variance_weights(&pi).unwrap();
        let s = test_statistic(&pi, &rule, &t, &w, 0.0, 20, true).unwrap();
        assert_eq!(s.t_n, 0.0);
        assert!(s.degenerate);
    }

    #[test]
    fn statistic_matches_grid_search() {
        let (rule, t) = two_item_model();
        let pi = ChoiceDataset::from_rows(&[vec![0.9, 0.1], vec![0.2, 0.8]])
            .unwrap()
            .with_counts(vec![80, 120])
            .unwrap();
        let w = variance_weights(&pi).unwrap();
        let m = design_matrix(&rule, &t).unwrap();
        let b = pi.vec();
        for tau in [0.0, 0.2, 0.6] {
            let s = test_statistic(&pi, &rule, &t, &w, tau, 200, true).unwrap();
            let lower = tau / 2.0;
            let mut best = f64::INFINITY;
            for k in 0..=1000 {
                let p0 = lower + (1.0 - 2.0 * lower) * k as f64 / 1000.0;
                let p = DVector::from_vec(vec![p0, 1.0 - p0]);
                let r = &m * p - &b;
                let q: f64 = r.iter().zip(&w.inverse).map(|(ri, wi)| wi * ri * ri).sum();
                best = best.min(200.0 * q);
            }
            assert!(s.t_n <= best + 1e-9);
            assert!(
                (best - s.t_n).abs() < 1e-4 * best.max(1.0),
                "tau {tau}: {} vs {best}",
                s.t_n
            );
        }
    }

    #[test]
    fn infeasible_tau_and_bad_config() {
        let (rule, t) = two_item_model();
        let pi = ChoiceDataset::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]])
            .unwrap()
            .with_counts(vec![10, 10])
            .unwrap();
        let mut cfg = TestConfig::new(1);
        cfg.tau = Some(1.5);
        assert!(matches!(
            bootstrap_test(&pi, &rule, &t, &cfg),
            Err(RasError::Config(_))
        ));
        cfg.tau = None;
        cfg.alpha = 0.7;
        assert!(matches!(
            bootstrap_test(&pi, &rule, &t, &cfg),
            Err(RasError::Config(_))
        ));
    }

    #[test]
    fn bootstrap_is_reproducible_and_consistent() {
        let sets = SetIndex::full(3).unwrap();
        let ords = OrderingSet::all(3).unwrap();
        let t = build_choice_transform(&sets, &ords).unwrap();
        let rule = sample_attention_rule(&sets, 6, &SamplerConfig::new(3, 8))
            .unwrap()
            .rule;
        let pi = predict_choices(&rule, &t, &PreferenceDistribution::uniform(6))
            .unwrap()
            .with_counts(vec![300, 300, 300])
            .unwrap();
        let mut cfg = TestConfig::new(4);
        cfg.boot = 99;
        let a = bootstrap_test(&pi, &rule, &t, &cfg).unwrap();
        let b = bootstrap_test(&pi, &rule, &t, &cfg).unwrap();
        assert_eq!(a, b);
        assert!((0.0..=1.0).contains(&a.p_value));
        assert_eq!(a.reject, a.t_n > a.critical_value);
        assert!(a.boot_stats.iter().all(|&s| s >= 0.0));
        assert!(!a.reject);
    }

    #[test]
    fn bootstrap_mean_tracks_the_recentering_target() {
        let (rule, t) = two_item_model();
        let pi = ChoiceDataset::from_rows(&[vec![0.7, 0.3], vec![0.4, 0.6]])
            .unwrap()
            .with_counts(vec![400, 400])
            .unwrap();
        let w = variance_weights(&pi).unwrap();
        let stat = test_statistic(&pi, &rule, &t, &w, 0.1, 800, true).unwrap();
        let counts = pi.period_counts().unwrap().to_vec();
        let b = pi.vec();
        let mut mean = [0.0; 4];
        let reps = 2000;
        for l in 0..reps {
            let raw = resample(&pi, &counts, &mut stream_rng(3, l)).unwrap();
            for i in 0..4 {
                mean[i] += (raw[i] - b[i] + stat.eta_hat[i]) / reps as f64;
            }
        }
        for (m, e) in mean.iter().zip(&stat.eta_hat) {
            assert!((m - e).abs() < 0.005);
        }
    }

    #[test]
    fn p_value_is_invariant_to_weight_scale() {
        // with τ = 0, scaling every weight by c scales T_n and each T* by c
        let (rule, t) = two_item_model();
        let m = design_matrix(&rule, &t).unwrap();
        let b = DVector::from_vec(vec![0.9, 0.1, 0.2, 0.8]);
        let w = weights_from_omega(vec![0.01, 0.01, 0.02, 0.02]);
        let w3 = weights_from_omega(vec![0.01 / 3.0, 0.01 / 3.0, 0.02 / 3.0, 0.02 / 3.0]);
        let qp = QpOptions::default();
        let s1 = statistic_from_design(&m, &b, &w, 0.0, 10, true, &qp).unwrap();
        let s3 = statistic_from_design(&m, &b, &w3, 0.0, 10, true, &qp).unwrap();
        assert!((s3.t_n - 3.0 * s1.t_n).abs() < 1e-9 * s3.t_n.max(1.0));
        assert_eq!(s1.p_tau.len(), s3.p_tau.len());
        for (a, c) in s1.p_tau.iter().zip(&s3.p_tau) {
            assert!((a - c).abs() < 1e-8);
        }
    }
}
