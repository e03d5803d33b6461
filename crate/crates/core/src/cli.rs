//! The `mmru` command line.
//!
//! Exit codes: 0 success, 2 bad usage or configuration, 3 failure while
//! running.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::estimators::{estimate_all, MomentEstimates};
use crate::format::g12;
use crate::harness::scenario::{composition_case, power_family};
use crate::harness::{
    builtin_scenarios, find_builtin, parse_scenario_family_file, parse_scenario_file, power_curve,
    run_replications, write_histogram_csv, write_meta_sidecar, write_power_csv, write_summary_csv,
    HarnessError, Metadata, ScenarioSpec, SeedSource,
};
use crate::inference::{run_test, InferenceError, TestResult};
use crate::sampling::SimRng;
use crate::urn::{write_trajectory_csv, StageRecord, Urn};

pub const SEED_ENV: &str = "MMRU_DEFAULT_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(
    name = "mmru",
    version,
    about = "Randomly reinforced urn simulation, estimation and testing"
)]
pub struct Cli {
    /// Base seed; overrides the scenario's and MMRU_DEFAULT_SEED.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file (a directory for `figures`); standard output if absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Worker threads; 0 uses every core. Never changes the results.
    #[arg(long, global = true, default_value_t = 0)]
    pub parallelism: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
#[group(required = false, multiple = false)]
pub struct Source {
    /// Built-in scenario name.
    #[arg(long)]
    pub scenario: Option<String>,
    /// TOML scenario file.
    #[arg(long)]
    pub scenario_file: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one path and write its trajectory.
    Simulate {
        #[command(flatten)]
        source: Source,
        /// Number of stages.
        #[arg(long)]
        n: Option<u64>,
        /// Keep every this-many stages.
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
        record_every: u64,
    },
    /// Run one path and print the moment estimates as JSON.
    Estimate {
        #[command(flatten)]
        source: Source,
        /// Number of stages; defaults to the scenario's horizon.
        #[arg(long)]
        n: Option<u64>,
    },
    /// Run one path and test equality of the k0 largest means.
    Test {
        #[command(flatten)]
        source: Source,
        /// Number of stages; defaults to the scenario's horizon.
        #[arg(long)]
        n: Option<u64>,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Arms tested; defaults to all of them.
        #[arg(long)]
        k0: Option<usize>,
    },
    /// Empirical power over a scenario family.
    Power {
        /// Built-in family (`fig4`).
        #[arg(long, conflicts_with = "scenario_file")]
        family: Option<String>,
        /// TOML file with a `[[scenario]]` family.
        #[arg(long)]
        scenario_file: Option<PathBuf>,
        /// Replications per scenario; defaults to the scenario's own.
        #[arg(long)]
        reps: Option<u64>,
        /// Number of stages; defaults to the scenario's horizon.
        #[arg(long)]
        n: Option<u64>,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Arms tested; defaults to all of them.
        #[arg(long)]
        k0: Option<usize>,
    },
    /// Terminal-composition histograms of the composition experiments.
    Figures {
        /// 1: start (6,6,6); 2: start (6,3,6). Both when absent.
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
        figure: Option<u8>,
        /// Replications per scenario; defaults to the scenario's own.
        #[arg(long)]
        reps: Option<u64>,
        /// Number of stages; defaults to the scenario's horizon.
        #[arg(long)]
        n: Option<u64>,
    },
    /// Check a scenario and print its true moments.
    Validate {
        #[command(flatten)]
        source: Source,
    },
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Runtime(m) => m,
        }
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        if e.is_config() {
            Failure::Usage(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(format!("{}: {e}", path.display()))
}

/// Every built-in scenario with its true means, for `--help`.
pub fn builtin_listing() -> String {
    let mut s = String::from("Built-in scenarios (true means m_1, m_2, ...):\n");
    for spec in builtin_scenarios() {
        let means: Vec<String> = spec.true_moments.m.iter().map(|&m| g12(m)).collect();
        s.push_str(&format!("  {:<12} m = ({})\n", spec.name, means.join(", ")));
    }
    s.push_str(&format!(
        "\nWithout --seed, the base seed is read from {SEED_ENV}, then from the scenario.\n\
         Exit codes: 0 success, 2 usage or configuration error, 3 runtime failure."
    ));
    s
}

fn command() -> clap::Command {
    Cli::command().after_help(builtin_listing())
}

/// Parse `args` (including the program name) and run. Returns the exit
/// code; diagnostics go to `err`, results to `out` unless `--out` is set.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let rendered = e.render().to_string();
            let _ = if code == 0 {
                write!(out, "{rendered}")
            } else {
                write!(err, "{rendered}")
            };
            return code;
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return 2;
        }
    };
    match dispatch(&cli, out) {
        Ok(()) => 0,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message());
            f.code()
        }
    }
}

/// Resolved seed: flag, then environment, then the scenario's own.
fn seed_override(cli: &Cli) -> Result<Option<(u64, SeedSource)>, Failure> {
    if let Some(s) = cli.seed {
        return Ok(Some((s, SeedSource::Flag)));
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(|s| Some((s, SeedSource::Environment)))
            .map_err(|_| Failure::Usage(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}

struct Prepared {
    spec: ScenarioSpec,
    metadata: Metadata,
}

fn prepare(
    cli: &Cli,
    mut spec: ScenarioSpec,
    n: Option<u64>,
    reps: Option<u64>,
) -> Result<Prepared, Failure> {
    if let Some(n) = n {
        spec.horizon = n;
    }
    if let Some(r) = reps {
        if r == 0 {
            return Err(Failure::Usage("--reps must be at least 1".into()));
        }
        spec.replications = r;
    }
    let mut source = SeedSource::Scenario;
    if let Some((seed, src)) = seed_override(cli)? {
        spec.base_seed = seed;
        source = src;
    }
    let mut metadata = Metadata::for_spec(&spec);
    metadata.seed_source = source;
    Ok(Prepared { spec, metadata })
}

fn load(source: &Source) -> Result<ScenarioSpec, Failure> {
    match (&source.scenario, &source.scenario_file) {
        (Some(name), None) => find_builtin(name).ok_or_else(|| {
            let names: Vec<String> = builtin_scenarios().into_iter().map(|s| s.name).collect();
            Failure::Usage(format!(
                "unknown scenario {name:?}; built-in scenarios: {}",
                names.join(", ")
            ))
        }),
        (None, Some(path)) => Ok(parse_scenario_file(path)?),
        _ => Err(Failure::Usage(
            "give exactly one of --scenario or --scenario-file".into(),
        )),
    }
}

/// Writer for `--out`, or `stdout`.
fn sink<'a>(
    path: Option<&Path>,
    stdout: &'a mut dyn Write,
) -> Result<Box<dyn Write + 'a>, Failure> {
    match path {
        Some(p) => {
            let f = File::create(p).map_err(|e| io_failure(p, e))?;
            Ok(Box::new(BufWriter::new(f)))
        }
        None => Ok(Box::new(stdout)),
    }
}

fn emit_json<T: Serialize>(
    path: Option<&Path>,
    stdout: &mut dyn Write,
    value: &T,
) -> Result<(), Failure> {
    let shown = path
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("<stdout>"));
    let mut w = sink(path, stdout)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| io_failure(&shown, e))?;
    writeln!(w)
        .and_then(|_| w.flush())
        .map_err(|e| io_failure(&shown, e))
}

fn emit_csv(
    path: Option<&Path>,
    stdout: &mut dyn Write,
    meta: &impl Serialize,
    body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>,
) -> Result<(), Failure> {
    let shown = path
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("<stdout>"));
    let mut w = sink(path, stdout)?;
    body(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| io_failure(&shown, e))?;
    drop(w);
    if let Some(p) = path {
        write_meta_sidecar(p, meta)?;
    }
    Ok(())
}

fn json_only(cli: &Cli, what: &str) -> Result<(), Failure> {
    if cli.format == Some(Format::Csv) {
        return Err(Failure::Usage(format!("{what} writes JSON only")));
    }
    Ok(())
}

fn check_k0(k0: usize, d: usize) -> Result<(), Failure> {
    if k0 < 2 || k0 > d {
        return Err(Failure::Usage(format!("--k0 {k0} must lie in 2..={d}")));
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<(), Failure> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Failure::Usage(format!(
            "--alpha {alpha} must lie in (0, 1)"
        )));
    }
    Ok(())
}

/// One path of `spec` on stream 0 of its base seed.
fn one_path(spec: &ScenarioSpec, record_every: u64) -> Result<(Urn, Vec<StageRecord>), Failure> {
    let mut urn = Urn::new(spec.config.clone()).map_err(|e| Failure::Usage(e.to_string()))?;
    let mut rng = SimRng::new(spec.base_seed, 0);
    let records = urn
        .run(spec.horizon, &mut rng, record_every)
        .map_err(|e| Failure::Runtime(e.to_string()))?;
    Ok((urn, records))
}

#[derive(Serialize)]
struct Trajectory<'a> {
    metadata: &'a Metadata,
    records: &'a [StageRecord],
}

#[derive(Serialize)]
struct WithMetadata<'a, T> {
    #[serde(flatten)]
    value: &'a T,
    metadata: &'a Metadata,
}

#[derive(Serialize)]
struct ScenarioReport {
    name: String,
    description: String,
    d: usize,
    means: Vec<f64>,
    variances: Vec<f64>,
    true_t: usize,
    horizon: u64,
    replications: u64,
    base_seed: u64,
    deviations: Vec<String>,
}

impl From<&ScenarioSpec> for ScenarioReport {
    fn from(s: &ScenarioSpec) -> Self {
        Self {
            name: s.name.clone(),
            description: s.description.clone(),
            d: s.dim(),
            means: s.true_moments.m.clone(),
            variances: s.true_moments.variances(),
            true_t: s.true_t,
            horizon: s.horizon,
            replications: s.replications,
            base_seed: s.base_seed,
            deviations: s.deviations.clone(),
        }
    }
}

fn dispatch(cli: &Cli, stdout: &mut dyn Write) -> Result<(), Failure> {
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Simulate {
            source,
            n,
            record_every,
        } => {
            let p = prepare(cli, load(source)?, *n, None)?;
            let (urn, records) = one_path(&p.spec, *record_every)?;
            match cli.format.unwrap_or(Format::Csv) {
                Format::Csv => emit_csv(out, stdout, &p.metadata, |w| {
                    write_trajectory_csv(w, urn.state().dim(), &records)
                }),
                Format::Json => emit_json(
                    out,
                    stdout,
                    &Trajectory {
                        metadata: &p.metadata,
                        records: &records,
                    },
                ),
            }
        }
        Command::Estimate { source, n } => {
            json_only(cli, "estimate")?;
            let p = prepare(cli, load(source)?, *n, None)?;
            let (urn, _) = one_path(&p.spec, 0)?;
            let est: MomentEstimates =
                estimate_all(urn.state()).map_err(|e| Failure::Runtime(e.to_string()))?;
            emit_json(
                out,
                stdout,
                &WithMetadata {
                    value: &est,
                    metadata: &p.metadata,
                },
            )
        }
        Command::Test {
            source,
            n,
            alpha,
            k0,
        } => {
            json_only(cli, "test")?;
            check_alpha(*alpha)?;
            let p = prepare(cli, load(source)?, *n, None)?;
            let k0 = k0.unwrap_or(p.spec.dim());
            check_k0(k0, p.spec.dim())?;
            let (urn, _) = one_path(&p.spec, 0)?;
            let result: TestResult = run_test(urn.state(), k0, *alpha).map_err(|e| match e {
                InferenceError::InvalidArms(m) => Failure::Usage(m),
                e => Failure::Runtime(e.to_string()),
            })?;
            emit_json(
                out,
                stdout,
                &WithMetadata {
                    value: &result,
                    metadata: &p.metadata,
                },
            )
        }
        Command::Power {
            family,
            scenario_file,
            reps,
            n,
            alpha,
            k0,
        } => {
            check_alpha(*alpha)?;
            if *reps == Some(0) {
                return Err(Failure::Usage("--reps must be at least 1".into()));
            }
            let members = match (family.as_deref(), scenario_file) {
                (_, Some(path)) => parse_scenario_family_file(path)?,
                (None | Some("fig4"), None) => power_family(),
                (Some(other), None) => {
                    return Err(Failure::Usage(format!(
                        "unknown family {other:?}; built-in families: fig4"
                    )))
                }
            };
            let mut specs = Vec::with_capacity(members.len());
            for m in members {
                let p = prepare(cli, m, *n, *reps)?;
                if let Some(k0) = k0 {
                    check_k0(*k0, p.spec.dim())?;
                }
                specs.push((p.spec, p.metadata.seed_source));
            }
            let family: Vec<ScenarioSpec> = specs.iter().map(|(s, _)| s.clone()).collect();
            let mut curve = power_curve(&family, *alpha, *k0, cli.parallelism)?;
            for (meta, (_, src)) in curve.metadata.iter_mut().zip(&specs) {
                meta.seed_source = *src;
            }
            match cli.format.unwrap_or(Format::Csv) {
                Format::Csv => {
                    emit_csv(out, stdout, &curve.metadata, |w| write_power_csv(w, &curve))
                }
                Format::Json => emit_json(out, stdout, &curve),
            }
        }
        Command::Figures { figure, reps, n } => {
            let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
            if !dir.is_dir() {
                return Err(Failure::Runtime(format!(
                    "{}: output directory does not exist",
                    dir.display()
                )));
            }
            let starts: &[[u64; 3]] = match figure {
                Some(1) => &[[6, 6, 6]],
                Some(_) => &[[6, 3, 6]],
                None => &[[6, 6, 6], [6, 3, 6]],
            };
            for &start in starts {
                for case in ['a', 'b', 'c', 'd'] {
                    let p = prepare(cli, composition_case(case, start), *n, *reps)?;
                    let mut summary = run_replications(&p.spec, cli.parallelism, None)?;
                    summary.metadata = p.metadata;
                    let name = &summary.scenario;
                    match cli.format.unwrap_or(Format::Csv) {
                        Format::Csv => {
                            let hist = dir.join(format!("{name}-histogram.csv"));
                            emit_csv(Some(&hist), stdout, &summary.metadata, |w| {
                                write_histogram_csv(w, &summary)
                            })?;
                            let rows = dir.join(format!("{name}-summary.csv"));
                            emit_csv(Some(&rows), stdout, &summary.metadata, |w| {
                                write_summary_csv(w, &summary)
                            })?;
                            writeln!(stdout, "{}\n{}", hist.display(), rows.display())
                                .map_err(|e| io_failure(Path::new("<stdout>"), e))?;
                        }
                        Format::Json => {
                            let path = dir.join(format!("{name}.json"));
                            emit_json(Some(&path), stdout, &summary)?;
                            writeln!(stdout, "{}", path.display())
                                .map_err(|e| io_failure(Path::new("<stdout>"), e))?;
                        }
                    }
                }
            }
            Ok(())
        }
        Command::Validate { source } => {
            json_only(cli, "validate")?;
            let specs = match (&source.scenario, &source.scenario_file) {
                (None, Some(path)) => parse_scenario_family_file(path)?,
                _ => vec![load(source)?],
            };
            let reports: Vec<ScenarioReport> = specs.iter().map(ScenarioReport::from).collect();
            emit_json(out, stdout, &reports)
        }
    }
}
