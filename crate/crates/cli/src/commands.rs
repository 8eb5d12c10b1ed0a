use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use clap::Args;
use serde::Serialize;

use ras_core::choice::ChoiceDataset;
use ras_core::cluster::cluster_times;
use ras_core::crra::{crra_ordering_table, CrraInterval, Lottery};
use ras_core::error::{RasError, Result};
use ras_core::estimator::{
    estimate as run_estimate, EstimationResult, EstimatorConfig, SCHEMA_VERSION,
};
use ras_core::homogeneous::{survivor_search, RejectedPrefix, SurvivalOptions};
use ras_core::hyptest::{bootstrap_test, TestConfig, TestResult};
use ras_core::io;
use ras_core::lattice::SetIndex;
use ras_core::lottery_experiment;
use ras_core::matrix::build_choice_transform;
use ras_core::menu::{Menu, OrderingSet, PreferenceOrdering};
use ras_core::sampler::{DirectionScheme, InitialRow, SamplerConfig};

/// Largest menu for `--orderings full`.
const FULL_ORDERINGS_MAX_ITEMS: usize = 6;

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Choice frequencies CSV (header `period,<items>`).
    #[arg(long)]
    pub pi: std::path::PathBuf,
    /// `crra` (experiment lotteries), `full` (every ordering) or a JSON file of label lists.
    #[arg(long, default_value = "crra")]
    pub orderings: String,
    /// Number of simulated attention rules.
    #[arg(long, default_value_t = 1000)]
    pub sims: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Outside option label; defaults to `lO` if present, else the last column.
    #[arg(long)]
    pub outside: Option<String>,
    /// Treat the outside option as an ordinary item (every non-empty set admissible).
    #[arg(long)]
    pub no_outside: bool,
    /// Hit-and-run direction scheme.
    #[arg(long, default_value = "upward-transport")]
    pub scheme: DirectionScheme,
    /// Start every simulated chain from a random row instead of the outside-only row
    /// (or uniform singletons without an outside option).
    #[arg(long)]
    pub random_initial_row: bool,
}

struct Model {
    items: Vec<String>,
    pi: ChoiceDataset,
    sets: SetIndex,
    orderings: OrderingSet,
}

impl Model {
    fn ordering_labels(&self) -> Vec<Vec<String>> {
        self.orderings
            .iter()
            .map(|o| o.rank().iter().map(|&i| self.items[i].clone()).collect())
            .collect()
    }
}

fn load_model(args: &ModelArgs) -> Result<Model> {
    let (items, pi) = io::read_pi_csv(io::open(&args.pi)?)?;
    let mut menu = Menu::new(items.clone())?;
    if !args.no_outside {
        let label = match &args.outside {
            Some(l) => l.clone(),
            None if items.iter().any(|l| l == "lO") => "lO".to_owned(),
            None => items.last().cloned().unwrap_or_default(),
        };
        menu = menu.with_outside_label(&label)?;
    }
    let sets = SetIndex::new(&menu, !args.no_outside)?;
    let orderings = load_orderings(&args.orderings, &menu)?;
    Ok(Model {
        items,
        pi,
        sets,
        orderings,
    })
}

fn load_orderings(source: &str, menu: &Menu) -> Result<OrderingSet> {
    match source {
        "crra" => {
            let have: BTreeSet<&str> = menu.items().iter().map(String::as_str).collect();
            let want: BTreeSet<&str> = lottery_experiment::LABELS.into_iter().collect();
            if have != want {
                return Err(RasError::Config(format!(
                    "crra orderings need the items {:?}",
                    lottery_experiment::LABELS
                )));
            }
            let crra = lottery_experiment::crra_orderings()?;
            let mapped = crra
                .iter()
                .map(|o| {
                    let labels: Vec<&str> = o
                        .rank()
                        .iter()
                        .map(|&i| lottery_experiment::LABELS[i])
                        .collect();
                    PreferenceOrdering::from_labels(menu, &labels)
                })
                .collect::<Result<Vec<_>>>()?;
            OrderingSet::new(mapped)
        }
        "full" => {
            if menu.len() > FULL_ORDERINGS_MAX_ITEMS {
                return Err(RasError::Config(format!(
                    "full orderings are limited to {FULL_ORDERINGS_MAX_ITEMS} items"
                )));
            }
            OrderingSet::all(menu.len())
        }
        path => {
            let lists: Vec<Vec<String>> = serde_json::from_reader(io::open(Path::new(path))?)?;
            let orderings = lists
                .iter()
                .map(|l| PreferenceOrdering::from_labels(menu, l))
                .collect::<Result<Vec<_>>>()?;
            OrderingSet::new(orderings)
        }
    }
}

fn emit<T: Serialize>(
    value: &T,
    out: Option<&Path>,
    summary: impl FnOnce() -> String,
) -> Result<()> {
    match out {
        Some(path) => {
            io::write_json(io::create(path)?, value)?;
            print!("{}", summary());
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            io::write_json(&mut lock, value)?;
            writeln!(lock)?;
        }
    }
    Ok(())
}

pub fn cluster(
    input: &Path,
    periods: usize,
    out: &Path,
    counts_out: Option<&Path>,
    items: Option<Vec<String>>,
    allow_empty_first: bool,
) -> Result<()> {
    let obs = io::read_raw_csv(io::open(input)?)?;
    let items = items.unwrap_or_else(|| {
        let seen: BTreeSet<&str> = obs.iter().map(|o| o.choice.as_str()).collect();
        seen.into_iter().map(str::to_owned).collect()
    });
    let menu = Menu::new(items.clone())?;
    let (clustering, data) = cluster_times(&obs, &menu, periods, allow_empty_first)?;
    io::write_pi_csv(io::create(out)?, &items, &data)?;
    if let Some(path) = counts_out {
        io::write_counts_csv(
            io::create(path)?,
            data.period_labels(),
            &clustering.period_counts,
        )?;
    }
    println!("{} observations in {} periods", obs.len(), data.n_periods());
    for (t, ((lo, hi), n)) in clustering
        .ranges
        .iter()
        .zip(&clustering.period_counts)
        .enumerate()
    {
        println!("period {}: {n} answers, {lo}..{hi} s", t + 1);
    }
    Ok(())
}

#[derive(Serialize)]
struct SurviveOutput<'a> {
    schema_version: u32,
    items: &'a [String],
    tol: f64,
    never_chosen_rule: bool,
    vacuous: bool,
    survivors: Vec<Vec<String>>,
    rejected_prefixes: &'a [RejectedPrefix],
}

pub fn survive(pi: &Path, tol: f64, never_chosen_rule: bool, out: Option<&Path>) -> Result<()> {
    let (items, data) = io::read_pi_csv(io::open(pi)?)?;
    let report = survivor_search(
        &data,
        &SurvivalOptions {
            tol,
            never_chosen_rule,
        },
    )?;
    let survivors: Vec<Vec<String>> = report
        .survivors
        .iter()
        .map(|o| o.rank().iter().map(|&i| items[i].clone()).collect())
        .collect();
    let output = SurviveOutput {
        schema_version: SCHEMA_VERSION,
        items: &items,
        tol,
        never_chosen_rule,
        vacuous: report.vacuous,
        survivors: survivors.clone(),
        rejected_prefixes: &report.rejected,
    };
    emit(&output, out, || {
        let mut s = format!("{} surviving orderings\n", survivors.len());
        for o in &survivors {
            s += &format!("  {}\n", o.join(" > "));
        }
        s
    })
}

#[derive(Serialize)]
struct EstimateOutput<'a> {
    items: &'a [String],
    orderings: Vec<Vec<String>>,
    outside_mode: bool,
    #[serde(flatten)]
    result: &'a EstimationResult,
}

fn run_estimation(args: &ModelArgs, model: &Model) -> Result<EstimationResult> {
    let mut sampler = SamplerConfig::new(model.pi.n_periods(), args.seed).with_scheme(args.scheme);
    if args.random_initial_row {
        sampler = sampler.with_initial_row(InitialRow::Random);
    }
    run_estimate(
        &model.pi,
        &model.sets,
        &model.orderings,
        &EstimatorConfig::new(args.sims, sampler),
    )
}

fn preference_summary(labels: &[Vec<String>], p: &[f64]) -> String {
    labels
        .iter()
        .zip(p)
        .map(|(o, p)| format!("  {p:.5}  {}\n", o.join(" > ")))
        .collect()
}

pub fn estimate(args: &ModelArgs, out: Option<&Path>) -> Result<()> {
    let model = load_model(args)?;
    let result = run_estimation(args, &model)?;
    let orderings = model.ordering_labels();
    let output = EstimateOutput {
        items: &model.items,
        orderings: orderings.clone(),
        outside_mode: !args.no_outside,
        result: &result,
    };
    emit(&output, out, || {
        format!(
            "best of {} simulations: distance {:.6e} (simulation {})\n{}",
            result.sims,
            result.best_distance,
            result.best_index,
            preference_summary(&orderings, result.best_p.as_slice())
        )
    })
}

#[derive(Serialize)]
struct TestOutput<'a> {
    items: &'a [String],
    orderings: Vec<Vec<String>>,
    estimated_p: &'a [f64],
    estimation_distance: f64,
    sims: usize,
    #[serde(flatten)]
    result: &'a TestResult,
}

#[allow(clippy::too_many_arguments)]
pub fn test(
    args: &ModelArgs,
    counts: &Path,
    boot: usize,
    alpha: f64,
    tau: &str,
    simplex_sum: bool,
    out: Option<&Path>,
) -> Result<()> {
    let mut model = load_model(args)?;
    let counts = io::read_counts_csv(io::open(counts)?)?;
    if counts.len() != model.pi.n_periods() {
        return Err(RasError::Validation(format!(
            "{} counts for {} periods",
            counts.len(),
            model.pi.n_periods()
        )));
    }
    for ((label, _), want) in counts.iter().zip(model.pi.period_labels()) {
        if label != want {
            return Err(RasError::Validation(format!(
                "count for period {label:?} where {want:?} was expected"
            )));
        }
    }
    model.pi = model
        .pi
        .clone()
        .with_counts(counts.iter().map(|c| c.1).collect())?;
    let tau =
        match tau {
            "auto" => None,
            v => Some(v.parse::<f64>().map_err(|_| {
                RasError::Config(format!("tau must be a number or auto, got {v:?}"))
            })?),
        };
    let fit = run_estimation(args, &model)?;
    let transform = build_choice_transform(&model.sets, &model.orderings)?;
    let config = TestConfig {
        tau,
        boot,
        alpha,
        simplex_sum,
        ..TestConfig::new(args.seed)
    };
    let result = bootstrap_test(&model.pi, &fit.best_rule, &transform, &config)?;
    let orderings = model.ordering_labels();
    let output = TestOutput {
        items: &model.items,
        orderings,
        estimated_p: fit.best_p.as_slice(),
        estimation_distance: fit.best_distance,
        sims: fit.sims,
        result: &result,
    };
    emit(&output, out, || {
        format!(
            "T_n = {:.6}, critical value {:.6}, p-value {:.4}: {} at alpha = {}\n",
            result.t_n,
            result.critical_value,
            result.p_value,
            if result.reject {
                "reject"
            } else {
                "do not reject"
            },
            result.alpha
        )
    })
}

#[derive(Serialize)]
struct CrraTableOutput<'a> {
    schema_version: u32,
    step: f64,
    intervals: &'a [CrraInterval],
}

pub fn crra_table(lotteries: Option<&Path>, step: f64, out: Option<&Path>) -> Result<()> {
    let lotteries: Vec<Lottery> = match lotteries {
        Some(path) => {
            let raw: Vec<Lottery> = serde_json::from_reader(io::open(path)?)?;
            raw.into_iter()
                .map(|l| Lottery::new(l.label, l.outcomes))
                .collect::<Result<_>>()?
        }
        None => lottery_experiment::lotteries(),
    };
    let table = crra_ordering_table(&lotteries, step)?;
    let output = CrraTableOutput {
        schema_version: SCHEMA_VERSION,
        step,
        intervals: &table,
    };
    emit(&output, out, || {
        table
            .iter()
            .map(|r| {
                format!(
                    "  [{:.4}, {:.4}]  {}\n",
                    r.lower,
                    r.upper,
                    r.ordering.join(" > ")
                )
            })
            .collect()
    })
}
