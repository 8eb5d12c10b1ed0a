use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use serde::Deserialize;

use ras_core::attention::AttentionRule;
use ras_core::choice::{ChoiceDataset, PreferenceDistribution};
use ras_core::error::{RasError, Result};
use ras_core::generators::{
    gen_diffusion, gen_mm, gen_satisficing, gen_topn, GammaSchedule, SatisficingModel,
    SearchDistribution, ThresholdDist,
};
use ras_core::io;
use ras_core::lattice::SetIndex;
use ras_core::matrix::{build_choice_transform, predict_choices};
use ras_core::menu::{Menu, OrderingSet, PreferenceOrdering};
use ras_core::rng::stream_rng;

use crate::GeneratorKind;

/// Model configuration; fields beyond the common ones are read by the matching model.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GenerateConfig {
    items: Vec<String>,
    #[serde(default)]
    outside: Option<String>,
    #[serde(default)]
    periods: Option<usize>,
    /// Orderings (labels best first) and their shares; ignored by satisficing.
    #[serde(default)]
    preferences: Vec<Vec<String>>,
    #[serde(default)]
    weights: Option<Vec<f64>>,
    /// Draw this many choices per period instead of writing exact frequencies.
    #[serde(default)]
    sample_size: Option<Vec<u64>>,
    #[serde(default)]
    seed: u64,

    #[serde(default)]
    search_order: Option<Vec<String>>,
    /// γ per period per item.
    #[serde(default)]
    gamma: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    drifts: Option<Vec<f64>>,
    #[serde(default)]
    sigma: Option<f64>,
    /// Diffusion thresholds per period per item.
    #[serde(default)]
    thresholds: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    utilities: Option<Vec<f64>>,
    #[serde(default)]
    threshold_dists: Option<Vec<ThresholdDist>>,
    #[serde(default)]
    search: Option<SearchConfig>,
    #[serde(default)]
    draws: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SearchConfig {
    orders: Vec<Vec<String>>,
    probs: Vec<f64>,
}

fn required<T>(v: Option<T>, name: &str, model: GeneratorKind) -> Result<T> {
    v.ok_or_else(|| RasError::Config(format!("{model:?} model needs `{name}`")))
}

fn indices(menu: &Menu, labels: &[String]) -> Result<Vec<usize>> {
    labels.iter().map(|l| menu.index_of(l)).collect()
}

/// Multinomial draw of `n` choices per period.
fn sample_counts(pi: &ChoiceDataset, sizes: &[u64], seed: u64) -> Result<Vec<Vec<u64>>> {
    if sizes.len() != pi.n_periods() {
        return Err(RasError::Config(format!(
            "sample_size has {} entries for {} periods",
            sizes.len(),
            pi.n_periods()
        )));
    }
    pi.rows()
        .iter()
        .zip(sizes)
        .enumerate()
        .map(|(t, (row, &n))| {
            let dist = WeightedIndex::new(row)
                .map_err(|e| RasError::Domain(format!("period {}: {e}", t + 1)))?;
            let mut rng = stream_rng(seed, t as u64);
            let mut counts = vec![0u64; row.len()];
            for _ in 0..n {
                counts[dist.sample(&mut rng)] += 1;
            }
            Ok(counts)
        })
        .collect()
}

pub fn run(
    kind: GeneratorKind,
    config: &Path,
    out: &Path,
    counts_out: Option<&Path>,
    rule_out: Option<&Path>,
) -> Result<()> {
    let cfg: GenerateConfig = serde_json::from_reader(io::open(config)?)?;
    let mut menu = Menu::new(cfg.items.clone())?;
    if let Some(o) = &cfg.outside {
        menu = menu.with_outside_label(o)?;
    }
    let sets = SetIndex::new(&menu, cfg.outside.is_some())?;

    let (rule, mut data) = if kind == GeneratorKind::Satisficing {
        let utilities = required(cfg.utilities.clone(), "utilities", kind)?;
        let dists = required(cfg.threshold_dists.clone(), "threshold_dists", kind)?;
        let search = match &cfg.search {
            Some(s) => SearchDistribution::new(
                s.orders
                    .iter()
                    .map(|o| indices(&menu, o))
                    .collect::<Result<_>>()?,
                s.probs.clone(),
            )?,
            None => SearchDistribution::uniform(menu.len())?,
        };
        let model = SatisficingModel::new(utilities, dists, search)?;
        let sim = gen_satisficing(&sets, &model, required(cfg.draws, "draws", kind)?, cfg.seed)?;
        (sim.rule, sim.choices)
    } else {
        let rule = base_rule(kind, &cfg, &menu, &sets)?;
        if cfg.preferences.is_empty() {
            return Err(RasError::Config(
                "`preferences` must list at least one ordering".into(),
            ));
        }
        let orderings = OrderingSet::new(
            cfg.preferences
                .iter()
                .map(|o| PreferenceOrdering::from_labels(&menu, o))
                .collect::<Result<_>>()?,
        )?;
        let p = match &cfg.weights {
            Some(w) => PreferenceDistribution::new(w.clone())?,
            None => PreferenceDistribution::uniform(orderings.len()),
        };
        let rule = rule.replicate(orderings.len())?;
        let transform = build_choice_transform(&sets, &orderings)?;
        let data = predict_choices(&rule, &transform, &p)?;
        (rule, data)
    };

    let labels: Vec<String> = (1..=data.n_periods()).map(|t| t.to_string()).collect();
    data = data.with_labels(labels.clone())?;
    if let Some(sizes) = &cfg.sample_size {
        let counts = sample_counts(&data, sizes, cfg.seed)?;
        data = ChoiceDataset::from_counts(&counts)?.with_labels(labels)?;
    }
    io::write_pi_csv(io::create(out)?, &cfg.items, &data)?;
    if let Some(path) = counts_out {
        let counts = data.period_counts().ok_or_else(|| {
            RasError::Config("counts need `sample_size` (or the satisficing model)".into())
        })?;
        io::write_counts_csv(io::create(path)?, data.period_labels(), counts)?;
    }
    if let Some(path) = rule_out {
        io::write_json(io::create(path)?, &rule)?;
    }
    println!(
        "wrote {} periods x {} items to {}",
        data.n_periods(),
        data.n_items(),
        out.display()
    );
    Ok(())
}

fn base_rule(
    kind: GeneratorKind,
    cfg: &GenerateConfig,
    menu: &Menu,
    sets: &SetIndex,
) -> Result<AttentionRule> {
    match kind {
        GeneratorKind::Topn => {
            let order = indices(
                menu,
                &required(cfg.search_order.clone(), "search_order", kind)?,
            )?;
            gen_topn(sets, required(cfg.periods, "periods", kind)?, &order)
        }
        GeneratorKind::Mm => gen_mm(
            sets,
            &GammaSchedule::homogeneous(required(cfg.gamma.clone(), "gamma", kind)?)?,
        ),
        GeneratorKind::Diffusion => gen_diffusion(
            sets,
            &required(cfg.drifts.clone(), "drifts", kind)?,
            required(cfg.sigma, "sigma", kind)?,
            &required(cfg.thresholds.clone(), "thresholds", kind)?,
        ),
        GeneratorKind::Satisficing => unreachable!("handled by the caller"),
    }
}
