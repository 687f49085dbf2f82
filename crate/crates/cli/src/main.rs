use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use krauscope::harness::suite::shot_scaling_config;
use krauscope::harness::{
    povm_ambiguity, run_experiment, run_suite, write_csv, ExperimentConfig, ExperimentReport, Kind,
    ModeConfig, Sweep,
};
use krauscope::serial::SerializedOperator;
use krauscope::CMatrix;
use krauscope_cli::{load_config, ConfigError};

const SEED_VAR: &str = "KRAUSCOPE_SEED";
const DEFAULT_SHOTS: u64 = 10_000;

#[derive(Parser)]
#[command(
    name = "krauscope",
    version,
    about = "Simulate direct characterization of quantum operations and check it against oracles",
    arg_required_else_help = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Replaces the config seeds with this single seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    mode: Option<ModeArg>,
    /// Shots per reconstruction in sampled mode.
    #[arg(long, global = true)]
    shots: Option<u64>,
    /// Coupling angle in radians.
    #[arg(long, global = true, allow_negative_numbers = true)]
    theta: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Reconstruct a hidden operator and compare it with the oracle.
    Characterize {
        #[arg(value_enum)]
        target: TargetArg,
    },
    /// Scan δθ (observables) or the shot count.
    Sweep {
        #[arg(value_enum)]
        axis: AxisArg,
    },
    /// Run the full invariant suite.
    Verify,
    /// Worked examples.
    Demo {
        #[arg(value_enum)]
        name: DemoArg,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Exact,
    Sampled,
}

#[derive(Clone, Copy, ValueEnum)]
enum TargetArg {
    Kraus,
    Povm,
    Unitary,
    Observable,
    Density,
}

impl From<TargetArg> for Kind {
    fn from(t: TargetArg) -> Self {
        match t {
            TargetArg::Kraus => Kind::Kraus,
            TargetArg::Povm => Kind::Povm,
            TargetArg::Unitary => Kind::Unitary,
            TargetArg::Observable => Kind::Observable,
            TargetArg::Density => Kind::Density,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    Dtheta,
    Shots,
}

#[derive(Clone, Copy, ValueEnum)]
enum DemoArg {
    PovmAmbiguity,
}

enum Failure {
    Usage(String),
    Validation(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Validation(e.to_string())
    }
}

impl From<krauscope::Error> for Failure {
    fn from(e: krauscope::Error) -> Self {
        Failure::Validation(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Validation(format!("output error: {e}"))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: &Cli) -> Result<ExitCode, Failure> {
    match cli.command {
        Command::Characterize { target } => {
            let kind = Kind::from(target);
            let cfg = match &cli.config {
                Some(path) => {
                    let cfg = load_config(path)?;
                    if cfg.kind != kind {
                        return Err(Failure::Validation(format!(
                            "config is for kind {}, not {}",
                            cfg.kind.name(),
                            kind.name()
                        )));
                    }
                    cfg
                }
                None => ExperimentConfig::new(kind, 2, vec![default_seed()?]),
            };
            report(cli, cfg)
        }
        Command::Sweep { axis } => {
            let cfg = match (&cli.config, axis) {
                (Some(path), _) => {
                    let cfg = load_config(path)?;
                    let matches = matches!(
                        (&cfg.sweep, axis),
                        (Some(Sweep::DeltaTheta { .. }), AxisArg::Dtheta)
                            | (Some(Sweep::Shots { .. }), AxisArg::Shots)
                    );
                    if !matches {
                        return Err(Failure::Validation(
                            "config has no sweep along the requested axis".into(),
                        ));
                    }
                    cfg
                }
                (None, AxisArg::Dtheta) => {
                    let first = default_seed()?;
                    let mut cfg = ExperimentConfig::new(Kind::Observable, 3, (first..first + 10).collect());
                    cfg.sweep = Some(Sweep::DeltaTheta {
                        values: vec![0.1, 0.05, 0.025, 0.0125],
                    });
                    cfg
                }
                (None, AxisArg::Shots) => {
                    let mut cfg = shot_scaling_config();
                    cfg.seeds = vec![default_seed()?];
                    cfg
                }
            };
            report(cli, cfg)
        }
        Command::Verify => {
            let checks = run_suite();
            let all = checks.iter().all(|c| c.passed);
            match cli.format {
                Some(Format::Json) => emit(cli, |w| {
                    serde_json::to_writer_pretty(&mut *w, &checks).map_err(io::Error::other)?;
                    writeln!(w)
                })?,
                Some(Format::Csv) => return Err(Failure::Usage("verify has no csv output".into())),
                None => emit(cli, |w| {
                    for c in &checks {
                        let tag = if c.passed { "PASS" } else { "FAIL" };
                        writeln!(w, "criterion {} [{tag}] {}: {} ({:.2}s)", c.id, c.name, c.detail, c.seconds)?;
                    }
                    Ok(())
                })?,
            }
            Ok(if all { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Demo {
            name: DemoArg::PovmAmbiguity,
        } => {
            let demo = povm_ambiguity()?;
            match cli.format {
                Some(Format::Json) => {
                    let op = |m: &CMatrix| SerializedOperator::from(m);
                    let value = serde_json::json!({
                        "kraus": op(&demo.kraus),
                        "kraus_tilde": op(&demo.kraus_tilde),
                        "povm": op(&demo.povm),
                        "povm_tilde": op(&demo.povm_tilde),
                        "kraus_distance": demo.kraus_distance,
                        "povm_error": demo.povm_error,
                    });
                    emit(cli, |w| writeln!(w, "{value:#}"))?;
                }
                Some(Format::Csv) => return Err(Failure::Usage("demo has no csv output".into())),
                None => emit(cli, |w| {
                    writeln!(w, "Two Kraus operators for the same outcome, reconstructed:")?;
                    write_matrix(w, "A0 = I/sqrt2", &demo.kraus)?;
                    write_matrix(w, "A0~ = (X+Z)/2", &demo.kraus_tilde)?;
                    writeln!(w, "|A0 - A0~|_F = {:.6}", demo.kraus_distance)?;
                    writeln!(w, "Their POVM elements E0 = A0^dag A0, reconstructed:")?;
                    write_matrix(w, "from A0", &demo.povm)?;
                    write_matrix(w, "from A0~", &demo.povm_tilde)?;
                    writeln!(w, "max |E0 - I/2|_F = {:.3e}", demo.povm_error)
                })?,
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

/// `KRAUSCOPE_SEED` when set, else 0. Only used when no config supplies
/// seeds; `--seed` overrides both.
fn default_seed() -> Result<u64, Failure> {
    match std::env::var(SEED_VAR) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Failure::Usage(format!("{SEED_VAR}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(0),
    }
}

fn apply_overrides(cli: &Cli, cfg: &mut ExperimentConfig) -> Result<(), Failure> {
    if let Some(seed) = cli.seed {
        cfg.seeds = vec![seed];
    }
    if let Some(theta) = cli.theta {
        cfg.theta = theta;
    }
    match (cli.mode, cli.shots) {
        (Some(ModeArg::Exact), Some(_)) => {
            return Err(Failure::Usage("--shots needs sampled mode".into()));
        }
        (Some(ModeArg::Exact), None) => cfg.mode = ModeConfig::Exact,
        (Some(ModeArg::Sampled), shots) | (None, shots @ Some(_)) => {
            let current = match cfg.mode {
                ModeConfig::Sampled { shots } => shots,
                ModeConfig::Exact => DEFAULT_SHOTS,
            };
            cfg.mode = ModeConfig::Sampled {
                shots: shots.unwrap_or(current),
            };
        }
        (None, None) => {}
    }
    Ok(())
}

fn report(cli: &Cli, mut cfg: ExperimentConfig) -> Result<ExitCode, Failure> {
    apply_overrides(cli, &mut cfg)?;
    let report = run_experiment(&cfg)?;
    write_report(cli, &report)?;
    let s = &report.summary;
    let max = s.max_frobenius_error.map_or("n/a".into(), |e| format!("{e:.3e}"));
    eprintln!(
        "{} runs, {} failed, max Frobenius error {max}, {:.2}s",
        s.runs, s.failures, report.wall_time_s
    );
    if s.failures > 0 {
        for run in &report.runs {
            if let krauscope::harness::RunOutcome::Failed { error } = &run.outcome {
                eprintln!("seed {}: {error}", run.seed);
            }
        }
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

fn write_report(cli: &Cli, report: &ExperimentReport) -> Result<(), Failure> {
    match cli.format.unwrap_or(Format::Json) {
        Format::Json => emit(cli, |w| {
            serde_json::to_writer_pretty(&mut *w, report).map_err(io::Error::other)?;
            writeln!(w)
        }),
        Format::Csv => emit(cli, |w| write_csv(report, w).map_err(io::Error::other)),
    }
}

fn emit(cli: &Cli, body: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<(), Failure> {
    match &cli.out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            body(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            body(&mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn write_matrix(w: &mut dyn Write, label: &str, m: &CMatrix) -> io::Result<()> {
    writeln!(w, "  {label}:")?;
    for i in 0..m.rows() {
        let row: Vec<String> = (0..m.cols())
            .map(|j| {
                let z = m[(i, j)];
                // avoid printing -0.0000
                let clean = |x: f64| if x.abs() < 5e-5 { 0.0 } else { x };
                format!("{:+.4}{:+.4}i", clean(z.re), clean(z.im))
            })
            .collect();
        writeln!(w, "    [ {} ]", row.join("  "))?;
    }
    Ok(())
}
