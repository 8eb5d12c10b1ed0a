mod commands;
mod generate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use ras_core::error::RasError;

/// Random attention span models: preference recovery from choices and stopping times.
#[derive(Debug, Parser)]
#[command(name = "ras", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Group raw answers into periods by stopping time and write choice frequencies.
    Cluster {
        /// CSV with columns respondent_id,stopping_time,choice.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 6)]
        periods: usize,
        #[arg(long)]
        out: PathBuf,
        /// Also write per-period sample sizes.
        #[arg(long)]
        counts_out: Option<PathBuf>,
        /// Comma-separated item labels in column order; defaults to the sorted labels seen.
        #[arg(long, value_delimiter = ',')]
        items: Option<Vec<String>>,
        /// Cluster all times when nobody answered in zero seconds.
        #[arg(long)]
        allow_empty_first: bool,
    },
    /// Orderings that survive the single-preference rejection test.
    Survive {
        #[arg(long)]
        pi: PathBuf,
        #[arg(long, default_value_t = ras_core::homogeneous::REJECTION_TOL)]
        tol: f64,
        /// Do not reject orderings that rank a never-chosen item above a chosen one.
        #[arg(long)]
        no_never_chosen: bool,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulation estimate of the preference distribution.
    Estimate {
        #[command(flatten)]
        model: commands::ModelArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Bootstrap specification test at the estimated attention rule.
    Test {
        #[command(flatten)]
        model: commands::ModelArgs,
        /// CSV with columns period,count.
        #[arg(long)]
        counts: PathBuf,
        #[arg(long, default_value_t = 999)]
        boot: usize,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Lower bound on each preference share, or `auto`.
        #[arg(long, default_value = "auto")]
        tau: String,
        /// Drop the constraint that preference shares sum to one.
        #[arg(long)]
        no_sum_constraint: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Synthetic choice data from a known attention model.
    Generate {
        #[arg(long, value_enum)]
        model: GeneratorKind,
        /// JSON model configuration.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        counts_out: Option<PathBuf>,
        /// Write the attention rule as JSON.
        #[arg(long)]
        rule_out: Option<PathBuf>,
    },
    /// σ intervals of the CRRA rankings of a set of lotteries.
    CrraTable {
        /// JSON list of {label, outcomes: [[payoff, probability], ...]}; defaults to the
        /// five experiment lotteries.
        #[arg(long)]
        lotteries: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-4)]
        step: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GeneratorKind {
    Topn,
    Mm,
    Satisficing,
    Diffusion,
}

fn run(cli: Cli) -> Result<(), RasError> {
    match cli.command {
        Command::Cluster {
            input,
            periods,
            out,
            counts_out,
            items,
            allow_empty_first,
        } => commands::cluster(
            &input,
            periods,
            &out,
            counts_out.as_deref(),
            items,
            allow_empty_first,
        ),
        Command::Survive {
            pi,
            tol,
            no_never_chosen,
            out,
        } => commands::survive(&pi, tol, !no_never_chosen, out.as_deref()),
        Command::Estimate { model, out } => commands::estimate(&model, out.as_deref()),
        Command::Test {
            model,
            counts,
            boot,
            alpha,
            tau,
            no_sum_constraint,
            out,
        } => commands::test(
            &model,
            &counts,
            boot,
            alpha,
            &tau,
            !no_sum_constraint,
            out.as_deref(),
        ),
        Command::Generate {
            model,
            config,
            out,
            counts_out,
            rule_out,
        } => generate::run(
            model,
            &config,
            &out,
            counts_out.as_deref(),
            rule_out.as_deref(),
        ),
        Command::CrraTable {
            lotteries,
            step,
            out,
        } => commands::crra_table(lotteries.as_deref(), step, out.as_deref()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}
