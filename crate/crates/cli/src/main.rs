use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use shadow_core::experiments::{
    emit_csv, parse_grid, parse_int_grid, rows_to_csv, run_on_records, simulate_records, Scenario,
    ScenarioConfig, ScenarioKind,
};
use shadow_core::io::{load_records, save_records, RecordsFile};
use shadow_core::validate::{format_table, run_checks};

/// LS, RLS and classical-shadow estimation experiments.
#[derive(Parser, Debug)]
#[command(name = "shadows", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// LS error across the underdetermined, interpolating and overdetermined regimes.
    DoubleDescent(RunArgs),
    /// RLS error for each regularization value.
    MuSweep(RunArgs),
    /// RLS against CS on the same records.
    RlsVsCs(RunArgs),
    /// RLS and CS on Haar-random rank-1 observables.
    RandomObs(RunArgs),
    /// CS with the global inverse on a global/local mixture ensemble.
    Mismatch(RunArgs),
    /// Fixed total M·L with varying shots per setting.
    Multishot(RunArgs),
    /// Empirical CS error against the closed-form multishot MSE.
    Theorem1(RunArgs),
    /// Runs the invariant suite and prints a pass/fail table.
    Validate,
}

#[derive(Args, Debug, Default)]
struct RunArgs {
    #[arg(long)]
    qubits: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    /// Comma list or power-of-two range, e.g. `4,16,64` or `2^2..2^11`.
    #[arg(long)]
    m_grid: Option<String>,
    #[arg(long)]
    l_grid: Option<String>,
    /// One or more RLS regularization values.
    #[arg(long)]
    mu: Option<String>,
    #[arg(long)]
    eta_grid: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON scenario; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = default_workers())]
    workers: usize,
    /// Writes the records of trial 0 at the largest grid point.
    #[arg(long)]
    dump_records: Option<PathBuf>,
    /// Estimates from these records instead of simulating.
    #[arg(long, conflicts_with = "dump_records")]
    load_records: Option<PathBuf>,
    /// Allows more than seven qubits.
    #[arg(long)]
    force: bool,
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn to_usize(v: Vec<u64>) -> Result<Vec<usize>> {
    v.into_iter()
        .map(|x| usize::try_from(x).context("grid value too large"))
        .collect()
}

impl RunArgs {
    fn flag_config(&self) -> Result<ScenarioConfig> {
        Ok(ScenarioConfig {
            qubits: self.qubits,
            trials: self.trials,
            m_grid: self
                .m_grid
                .as_deref()
                .map(|g| {
                    parse_int_grid(g)
                        .map_err(anyhow::Error::from)
                        .and_then(to_usize)
                })
                .transpose()
                .context("--m-grid")?,
            l_grid: self
                .l_grid
                .as_deref()
                .map(parse_int_grid)
                .transpose()
                .context("--l-grid")?,
            mu: self
                .mu
                .as_deref()
                .map(parse_grid)
                .transpose()
                .context("--mu")?,
            eta_grid: self
                .eta_grid
                .as_deref()
                .map(parse_grid)
                .transpose()
                .context("--eta-grid")?,
            seed: self.seed,
            force: self.force.then_some(true),
            ..Default::default()
        })
    }

    fn scenario(&self, kind: ScenarioKind) -> Result<Scenario> {
        let file = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                ScenarioConfig::from_json(&text)
                    .with_context(|| format!("parsing {}", path.display()))?
            }
            None => ScenarioConfig::default(),
        };
        Ok(Scenario::from_config(
            kind,
            file.overridden_by(self.flag_config()?),
        )?)
    }
}

fn write_output(csv: &str, rows: &[shadow_core::ResultRow], out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => emit_csv(rows, path)?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn dump(s: &Scenario, path: &Path) -> Result<()> {
    let shots = s.l_grid[0];
    let settings = match s.kind {
        ScenarioKind::Multishot => s
            .m_grid
            .iter()
            .filter(|&&n| (n as u64).is_multiple_of(shots))
            .map(|&n| n / shots as usize)
            .max()
            .context("no M·L total is divisible by the first L")?,
        _ => *s.m_grid.iter().max().expect("validated nonempty"),
    };
    let eta = (s.kind == ScenarioKind::Mismatch).then(|| s.eta_grid[0]);
    let records = simulate_records(s, 0, eta, shots, settings)?;
    let file = RecordsFile {
        dim: s.dim(),
        shots,
        seed: s.seed,
        records,
    };
    save_records(path, &file)?;
    log::info!("wrote {settings} records to {}", path.display());
    Ok(())
}

fn run(kind: ScenarioKind, args: &RunArgs) -> Result<()> {
    let s = args.scenario(kind)?;
    let rows = match &args.load_records {
        Some(path) => {
            let file = load_records(path)?;
            run_on_records(&s, &file.records)?
        }
        None => {
            if let Some(path) = &args.dump_records {
                dump(&s, path)?;
            }
            log::info!(
                "{}: {} qubits, {} trials, {} workers",
                kind.id(),
                s.qubits,
                s.trials,
                args.workers
            );
            shadow_core::run_scenario(&s, args.workers)?
        }
    };
    let csv = if args.out.is_none() {
        rows_to_csv(&rows)
    } else {
        String::new()
    };
    write_output(&csv, &rows, args.out.as_deref())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::Validate => {
            let results = run_checks();
            print!("{}", format_table(&results));
            return if results.iter().all(|r| r.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            };
        }
        Command::DoubleDescent(a) => (ScenarioKind::DoubleDescent, a),
        Command::MuSweep(a) => (ScenarioKind::MuSweep, a),
        Command::RlsVsCs(a) => (ScenarioKind::RlsVsCs, a),
        Command::RandomObs(a) => (ScenarioKind::RandomObservables, a),
        Command::Mismatch(a) => (ScenarioKind::Mismatch, a),
        Command::Multishot(a) => (ScenarioKind::Multishot, a),
        Command::Theorem1(a) => (ScenarioKind::Theorem1Check, a),
    };
    match run(kind, &args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 2 when the input was rejected, 1 for anything that failed while running.
fn exit_code(e: &anyhow::Error) -> u8 {
    use shadow_core::Error as E;
    let rejected = e.chain().any(|cause| {
        matches!(
            cause.downcast_ref::<E>(),
            Some(E::InvalidArgument(_) | E::ResourceGuard(_) | E::Parse { .. })
        )
    });
    if rejected {
        2
    } else {
        1
    }
}
