use std::fs::File;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use grrr_cli::{
    convert_mode, dataset_hash, emit_report, emit_studies, estimate_studies, parse_dataset,
    run_analysis, AnalysisConfig, CliError, Format, Model, StudiesReport, Variance,
};
use grrr_core::variance::{DEFAULT_BOOTSTRAP_REPLICATES, DEFAULT_ZERO_CORRECTION};
use grrr_core::{baseline_risk, BaselineWeighting, StudyTable};

#[derive(Parser)]
#[command(
    name = "grrr",
    version,
    about = "Meta-analysis on the generalised relative risk reduction scale"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a random-effects model and report the pooled effect.
    Analyze(AnalyzeArgs),
    /// Convert an odds ratio and its interval at a baseline risk.
    Convert(ConvertArgs),
    /// Per-study estimates and intervals only.
    Estimate(EstimateArgs),
}

#[derive(Args)]
struct InputArgs {
    /// CSV with header study_id,events_treatment,n_treatment,events_control,n_control; `-` reads stdin.
    #[arg(long)]
    input: PathBuf,
    /// Read the first pair of count columns as the control arm.
    #[arg(long)]
    control_first: bool,
}

#[derive(Args)]
struct EstimateFlags {
    #[arg(long, value_enum, default_value = "exact")]
    variance: Variance,
    #[arg(long, default_value_t = DEFAULT_ZERO_CORRECTION)]
    zero_correction: f64,
    #[arg(long, default_value_t = DEFAULT_BOOTSTRAP_REPLICATES)]
    bootstrap_reps: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_enum)]
    model: Model,
    #[command(flatten)]
    flags: EstimateFlags,
    /// The counted event is undesirable (default).
    #[arg(long, conflicts_with = "benefit")]
    harm: bool,
    /// The counted event is desirable.
    #[arg(long)]
    benefit: bool,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    flags: EstimateFlags,
}

#[derive(Clone, Copy, ValueEnum)]
enum Weighting {
    Weighted,
    Unweighted,
}

#[derive(Args)]
struct ConvertArgs {
    #[arg(long = "or")]
    or_value: f64,
    /// Interval endpoints as `L,U`.
    #[arg(long, value_name = "L,U", value_parser = parse_pair)]
    or_ci: (f64, f64),
    #[arg(
        long,
        required_unless_present = "baseline_from",
        conflicts_with = "baseline_from"
    )]
    baseline_risk: Option<f64>,
    /// Take the baseline risk from the control arms of a dataset.
    #[arg(long)]
    baseline_from: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "weighted")]
    weighting: Weighting,
    #[arg(long)]
    control_first: bool,
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (l, u) = s.split_once(',').ok_or("expected `L,U`")?;
    let num = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("`{x}`: {e}"));
    Ok((num(l)?, num(u)?))
}

fn read_tables(path: &Path, control_first: bool) -> grrr_cli::Result<Vec<StudyTable>> {
    if path == Path::new("-") {
        let mut buf = Vec::new();
        io::stdin().read_to_end(&mut buf)?;
        parse_dataset(&buf[..], control_first)
    } else {
        let f = File::open(path)
            .map_err(|e| io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
        parse_dataset(f, control_first)
    }
}

fn config_from(flags: &EstimateFlags, model: Model, event_is_harm: bool) -> AnalysisConfig {
    AnalysisConfig {
        model,
        variance: flags.variance,
        zero_correction: flags.zero_correction,
        bootstrap_reps: flags.bootstrap_reps,
        seed: flags.seed,
        alpha: flags.alpha,
        baseline_risk: None,
        event_is_harm,
    }
}

fn configure_threads() -> grrr_cli::Result<()> {
    let Ok(v) = std::env::var("GRRR_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|n| *n > 0).ok_or_else(|| {
        CliError::Config(format!(
            "GRRR_THREADS must be a positive integer, got `{v}`"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(e.to_string()))
}

fn run(cli: Cli) -> grrr_cli::Result<Vec<u8>> {
    configure_threads()?;
    match cli.command {
        Command::Analyze(a) => {
            let tables = read_tables(&a.input.input, a.input.control_first)?;
            let config = config_from(&a.flags, a.model, !a.benefit);
            let report = run_analysis(&config, &tables)?;
            for id in &report.fit.discarded {
                eprintln!("note: study {id} carries no information and was set aside");
            }
            emit_report(&report, a.flags.format)
        }
        Command::Estimate(a) => {
            let tables = read_tables(&a.input.input, a.input.control_first)?;
            let config = config_from(&a.flags, Model::DirectMl, true);
            let studies = estimate_studies(&config, &tables)?;
            emit_studies(
                &StudiesReport {
                    studies,
                    dataset_sha256: dataset_hash(&tables),
                },
                a.flags.format,
            )
        }
        Command::Convert(a) => {
            let p = match (a.baseline_risk, &a.baseline_from) {
                (Some(p), _) => p,
                (None, Some(path)) => {
                    let tables = read_tables(path, a.control_first)?;
                    let w = match a.weighting {
                        Weighting::Weighted => BaselineWeighting::Weighted,
                        Weighting::Unweighted => BaselineWeighting::Unweighted,
                    };
                    baseline_risk(&tables, w)?
                }
                (None, None) => unreachable!("clap requires one baseline source"),
            };
            let c = convert_mode(a.or_value, a.or_ci, p)?;
            let mut out =
                serde_json::to_vec_pretty(&c).map_err(|e| CliError::Output(e.to_string()))?;
            out.push(b'\n');
            Ok(out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(bytes) => {
            let mut stdout = io::stdout().lock();
            if let Err(e) = stdout.write_all(&bytes).and_then(|_| stdout.flush()) {
                eprintln!("error: {e}");
                return ExitCode::FAILURE;
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
