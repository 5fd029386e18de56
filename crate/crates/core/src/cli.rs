//! Command-line front end: `converge`, `efficiency`, `simulate`, `table1`
//! and `scheme`.
//!
//! Settings are resolved as command-line flags, then an optional TOML file
//! given with `--config`, then preset defaults. Failures end with one line
//! on stderr of the form
//!
//! ```text
//! rdsplit-error code=3 kind=numerical message="..."
//! ```
//!
//! with exit code 2 for configuration errors and 3 for numerical failures.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::compositions::{
    build_order, format_scheme, lie_trotter, load_scheme, save_scheme, IntegrateOptions, LoadOptions, Scheme,
    SchemeError, StepError, CONSTRUCTED_SUM_TOL,
};
use crate::erroranalysis::{strang_error_terms, table1_csv, ErrorAnalysisError};
use crate::harness::{
    self, default_dt_grid, estimate_order, write_atomic, HarnessError, NormVariant, SnapshotMatrix, StudyOptions,
    FLAG_FAILED,
};
use crate::problems::{linpot_initial, preset, Problem, ProblemKind};
use crate::spectral::{make_grid, Field};
use crate::subflows::{standard_potential, NonlinearFlowChoice};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "rdsplit", version, about = "Complex-coefficient splitting for 1D reaction-diffusion problems")]
pub struct Cli {
    /// TOML file with default settings; command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Error against a reference solution for each scheme and step.
    Converge(StudyArgs),
    /// Like `converge`, run serially with median-of-three timings.
    Efficiency(StudyArgs),
    /// Integrate a preset and write space-time snapshot matrices.
    Simulate(SimulateArgs),
    /// Sup-norms of the six Strang error terms.
    Table1(Table1Args),
    /// Print, validate or save a composition scheme.
    Scheme(SchemeArgs),
}

#[derive(Debug, Args, Default)]
pub struct StudyArgs {
    #[arg(long)]
    pub preset: Option<String>,
    /// Nominal orders to construct (1 is Lie-Trotter, 2 Strang).
    #[arg(long, value_delimiter = ',')]
    pub orders: Option<Vec<u32>>,
    /// Scheme files to include alongside the constructed orders.
    #[arg(long = "scheme-file")]
    pub scheme_files: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub dt_grid: Option<Vec<f64>>,
    #[arg(long)]
    pub t_final: Option<f64>,
    #[arg(long)]
    pub reference_dt: Option<f64>,
    /// Directory for cached reference solutions.
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    /// `caption` or `with-dx`.
    #[arg(long)]
    pub norm: Option<NormVariant>,
    /// `exact` or `midpoint` (Gray-Scott only).
    #[arg(long)]
    pub nonlinear: Option<NonlinearFlowChoice>,
    /// Maximum number of concurrently running cells.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Output CSV; standard output when omitted.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args, Default)]
pub struct SimulateArgs {
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub order: Option<u32>,
    #[arg(long)]
    pub scheme_file: Option<PathBuf>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Required: the presets carry no canonical final time.
    #[arg(long)]
    pub t_final: Option<f64>,
    #[arg(long)]
    pub snapshot_stride: Option<usize>,
    #[arg(long)]
    pub nonlinear: Option<NonlinearFlowChoice>,
    /// Directory receiving `<preset>-u.csv` (and `<preset>-v.csv`).
    #[arg(long, short)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Args, Default)]
pub struct Table1Args {
    /// Diffusivity; repeat for several columns.
    #[arg(long = "D")]
    pub d: Vec<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args, Default)]
pub struct SchemeArgs {
    #[arg(long, conflicts_with = "file")]
    pub order: Option<u32>,
    #[arg(long)]
    pub file: Option<PathBuf>,
    #[arg(long)]
    pub print: bool,
    #[arg(long)]
    pub validate: bool,
    #[arg(long)]
    pub save: Option<PathBuf>,
    /// Load files whose stages have negative real parts.
    #[arg(long)]
    pub allow_inadmissible: bool,
}

/// Settings read from `--config`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub preset: Option<String>,
    pub orders: Option<Vec<u32>>,
    pub scheme_files: Option<Vec<PathBuf>>,
    pub dt_grid: Option<Vec<f64>>,
    pub t_final: Option<f64>,
    pub reference_dt: Option<f64>,
    pub cache_dir: Option<PathBuf>,
    pub norm: Option<NormVariant>,
    pub nonlinear: Option<String>,
    pub jobs: Option<usize>,
    pub output: Option<PathBuf>,
    pub order: Option<u32>,
    pub dt: Option<f64>,
    pub snapshot_stride: Option<usize>,
    pub output_dir: Option<PathBuf>,
    #[serde(rename = "D")]
    pub d: Option<Vec<f64>>,
    pub n: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CommandKind {
    Converge,
    Efficiency,
    Simulate,
    Table1,
    Scheme,
}

/// Fully merged settings of one invocation.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub command: CommandKind,
    pub preset: Option<String>,
    pub orders: Vec<u32>,
    pub scheme_files: Vec<PathBuf>,
    pub dt_grid: Option<Vec<f64>>,
    pub t_final: Option<f64>,
    pub reference_dt: Option<f64>,
    pub cache_dir: Option<PathBuf>,
    pub norm: NormVariant,
    pub nonlinear: Option<NonlinearFlowChoice>,
    pub jobs: Option<usize>,
    pub output: Option<PathBuf>,
    pub order: Option<u32>,
    pub dt: Option<f64>,
    pub snapshot_stride: Option<usize>,
    pub output_dir: Option<PathBuf>,
    pub d_values: Vec<f64>,
    pub n: Option<usize>,
    pub scheme_file: Option<PathBuf>,
    pub print: bool,
    pub validate: bool,
    pub save: Option<PathBuf>,
    pub allow_inadmissible: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Numerical(_) => "numerical",
        }
    }

    /// The machine-readable last line written to stderr.
    pub fn status_line(&self) -> String {
        let msg = self.to_string().replace('\\', "\\\\").replace('"', "\\\"").replace('\n', " ");
        format!("rdsplit-error code={} kind={} message=\"{}\"", self.exit_code(), self.kind(), msg)
    }
}

fn config(msg: impl std::fmt::Display) -> CliError {
    CliError::Config(msg.to_string())
}

impl From<SchemeError> for CliError {
    fn from(e: SchemeError) -> Self {
        config(e)
    }
}

impl From<StepError> for CliError {
    fn from(e: StepError) -> Self {
        match e {
            StepError::RaggedTiling { .. } | StepError::BadStep(_) => config(e),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Step(s) => s.into(),
            HarnessError::Spectral(s) => CliError::Numerical(s.to_string()),
            other => config(other),
        }
    }
}

impl From<ErrorAnalysisError> for CliError {
    fn from(e: ErrorAnalysisError) -> Self {
        match e {
            ErrorAnalysisError::TooLarge(_) | ErrorAnalysisError::Csv(_) => config(e),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

fn over<T>(slot: &mut Option<T>, flag: Option<T>) {
    if flag.is_some() {
        *slot = flag;
    }
}

fn read_file_config(path: &Path) -> Result<FileConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| config(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| config(format!("{}: {}", path.display(), e.message())))
}

impl RunConfig {
    /// Merges parsed flags over the optional config file.
    pub fn resolve(cli: Cli) -> Result<Self, CliError> {
        let file = match &cli.config {
            Some(p) => read_file_config(p)?,
            None => FileConfig::default(),
        };
        let file_nonlinear =
            file.nonlinear.as_deref().map(str::parse::<NonlinearFlowChoice>).transpose().map_err(config)?;
        let mut cfg = RunConfig {
            command: CommandKind::Scheme,
            preset: file.preset,
            orders: file.orders.unwrap_or_else(|| vec![2, 4, 6, 8]),
            scheme_files: file.scheme_files.unwrap_or_default(),
            dt_grid: file.dt_grid,
            t_final: file.t_final,
            reference_dt: file.reference_dt,
            cache_dir: file.cache_dir,
            norm: file.norm.unwrap_or_default(),
            nonlinear: file_nonlinear,
            jobs: file.jobs,
            output: file.output,
            order: file.order,
            dt: file.dt,
            snapshot_stride: file.snapshot_stride,
            output_dir: file.output_dir,
            d_values: file.d.unwrap_or_default(),
            n: file.n,
            scheme_file: None,
            print: false,
            validate: false,
            save: None,
            allow_inadmissible: false,
        };
        match cli.command {
            Command::Converge(a) => {
                cfg.command = CommandKind::Converge;
                cfg.apply_study(a);
            }
            Command::Efficiency(a) => {
                cfg.command = CommandKind::Efficiency;
                cfg.apply_study(a);
            }
            Command::Simulate(a) => {
                cfg.command = CommandKind::Simulate;
                over(&mut cfg.preset, a.preset);
                over(&mut cfg.order, a.order);
                cfg.scheme_file = a.scheme_file;
                over(&mut cfg.dt, a.dt);
                over(&mut cfg.t_final, a.t_final);
                over(&mut cfg.snapshot_stride, a.snapshot_stride);
                over(&mut cfg.nonlinear, a.nonlinear);
                over(&mut cfg.output_dir, a.output_dir);
            }
            Command::Table1(a) => {
                cfg.command = CommandKind::Table1;
                if !a.d.is_empty() {
                    cfg.d_values = a.d;
                }
                over(&mut cfg.n, a.n);
                over(&mut cfg.output, a.output);
            }
            Command::Scheme(a) => {
                cfg.command = CommandKind::Scheme;
                if a.order.is_some() {
                    cfg.order = a.order;
                    cfg.scheme_file = None;
                } else {
                    cfg.scheme_file = a.file;
                }
                cfg.print = a.print;
                cfg.validate = a.validate;
                cfg.save = a.save;
                cfg.allow_inadmissible = a.allow_inadmissible;
            }
        }
        Ok(cfg)
    }

    fn apply_study(&mut self, a: StudyArgs) {
        over(&mut self.preset, a.preset);
        if let Some(o) = a.orders {
            self.orders = o;
        }
        if !a.scheme_files.is_empty() {
            self.scheme_files = a.scheme_files;
        }
        over(&mut self.dt_grid, a.dt_grid);
        over(&mut self.t_final, a.t_final);
        over(&mut self.reference_dt, a.reference_dt);
        over(&mut self.cache_dir, a.cache_dir);
        if let Some(n) = a.norm {
            self.norm = n;
        }
        over(&mut self.nonlinear, a.nonlinear);
        over(&mut self.jobs, a.jobs);
        over(&mut self.output, a.output);
    }

    fn problem(&self) -> Result<Problem, CliError> {
        let name = self.preset.as_deref().ok_or_else(|| config("--preset is required"))?;
        let mut p = preset(name).map_err(config)?;
        if let Some(choice) = self.nonlinear {
            p.nonlinear = choice;
        }
        Ok(p)
    }
}

/// Scheme for a nominal order; 1 is Lie-Trotter.
pub fn scheme_for_order(order: u32) -> Result<Scheme, SchemeError> {
    match order {
        1 => Ok(lie_trotter()),
        p => build_order(p),
    }
}

fn load(path: &Path, allow_inadmissible: bool, err: &mut dyn Write) -> Result<Scheme, CliError> {
    let loaded = load_scheme(path, LoadOptions { allow_inadmissible })?;
    for w in &loaded.warnings {
        let _ = writeln!(err, "warning: {}: {w}", path.display());
    }
    Ok(loaded.scheme)
}

fn emit(output: Option<&Path>, text: &str, out: &mut dyn Write) -> Result<(), CliError> {
    match output {
        Some(path) => write_atomic(path, text.as_bytes()).map_err(config),
        None => out.write_all(text.as_bytes()).map_err(|e| config(format!("stdout: {e}"))),
    }
}

/// Executes a resolved configuration, writing results to files or `out` and
/// diagnostics to `err`.
pub fn run(cfg: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    match cfg.command {
        CommandKind::Converge | CommandKind::Efficiency => run_study(cfg, out, err),
        CommandKind::Simulate => run_simulate(cfg, err),
        CommandKind::Table1 => run_table1(cfg, out),
        CommandKind::Scheme => run_scheme(cfg, out, err),
    }
}

fn run_study(cfg: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let problem = cfg.problem()?;
    let t_final = cfg
        .t_final
        .or(problem.t_final)
        .ok_or_else(|| config(format!("preset {} has no study final time; pass --t-final", problem.name)))?;
    let reference_dt = cfg.reference_dt.unwrap_or(problem.reference_dt);
    let dt_grid = cfg.dt_grid.clone().unwrap_or_else(|| default_dt_grid(&problem));
    let mut schemes = cfg.orders.iter().map(|&p| scheme_for_order(p)).collect::<Result<Vec<_>, _>>()?;
    for f in &cfg.scheme_files {
        schemes.push(load(f, false, err)?);
    }
    if schemes.is_empty() {
        return Err(config("no schemes selected"));
    }
    let timing = cfg.command == CommandKind::Efficiency;
    let opts = StudyOptions { norm: cfg.norm, timing, jobs: if timing { Some(1) } else { cfg.jobs } };
    let table = harness::convergence_study(
        &problem,
        &schemes,
        &dt_grid,
        t_final,
        reference_dt,
        cfg.cache_dir.as_deref(),
        &opts,
    )?;
    let failed = table.records.iter().filter(|r| r.has_flag(FLAG_FAILED)).count();
    if failed > 0 {
        let _ = writeln!(err, "warning: {failed} cell(s) failed and are flagged in the output");
    }
    for name in table.scheme_names() {
        let window = (f64::MIN_POSITIVE, f64::MAX);
        match estimate_order(&table, name, window) {
            Ok(fit) => {
                let _ = writeln!(err, "{name}: fitted order {:.3} over {} points", fit.slope, fit.points);
            }
            Err(e) => {
                let _ = writeln!(err, "{name}: no order estimate ({e})");
            }
        }
    }
    emit(cfg.output.as_deref(), &table.to_csv()?, out)
}

fn run_simulate(cfg: &RunConfig, err: &mut dyn Write) -> Result<(), CliError> {
    let problem = cfg.problem()?;
    let t_final = cfg.t_final.ok_or_else(|| config("simulate requires --t-final"))?;
    let dt = cfg.dt.or(problem.default_dt).ok_or_else(|| config("preset has no default step; pass --dt"))?;
    let dir = cfg.output_dir.as_deref().ok_or_else(|| config("simulate requires --output-dir"))?;
    let scheme = match &cfg.scheme_file {
        Some(f) => load(f, false, err)?,
        None => scheme_for_order(cfg.order.unwrap_or(DEFAULT_SIMULATE_ORDER))?,
    };
    let stride = cfg.snapshot_stride.unwrap_or(problem.snapshot_stride).max(1);
    let traj = problem.run(&scheme, dt, t_final, IntegrateOptions { snapshot_stride: Some(stride) })?;
    fs::create_dir_all(dir).map_err(|e| config(format!("{}: {e}", dir.display())))?;
    let species: &[&str] = match problem.kind {
        ProblemKind::LinearPotential => &["u"],
        ProblemKind::GrayScott => &["u", "v"],
    };
    for (i, s) in species.iter().enumerate() {
        let m = SnapshotMatrix::from_snapshots(&traj.snapshots, i);
        let path = dir.join(format!("{}-{s}.csv", problem.name));
        write_atomic(&path, m.to_csv().as_bytes()).map_err(config)?;
    }
    let _ = writeln!(err, "{}: {} steps of {dt} with {}", problem.name, traj.steps, scheme.name);
    Ok(())
}

/// Scheme used by `simulate` when neither `--order` nor `--scheme-file` is
/// given.
pub const DEFAULT_SIMULATE_ORDER: u32 = 4;

fn run_table1(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let ds = if cfg.d_values.is_empty() { vec![10.0, 0.01] } else { cfg.d_values.clone() };
    let n = cfg.n.unwrap_or(1024);
    let grid = make_grid(n, -std::f64::consts::PI, std::f64::consts::PI).map_err(config)?;
    let u = Field::from_real_fn(grid.clone(), linpot_initial);
    let f = Field::from_real_fn(grid, standard_potential);
    let cols = ds.iter().map(|&d| strang_error_terms(&u, d, &f)).collect::<Result<Vec<_>, _>>()?;
    emit(cfg.output.as_deref(), &table1_csv(&cols), out)
}

fn run_scheme(cfg: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let scheme = match (&cfg.scheme_file, cfg.order) {
        (Some(f), _) => load(f, cfg.allow_inadmissible, err)?,
        (None, Some(p)) => scheme_for_order(p)?,
        (None, None) => return Err(config("scheme needs --order or --file")),
    };
    if cfg.validate {
        scheme.check_consistency(CONSTRUCTED_SUM_TOL)?;
        scheme.check_admissible()?;
        let _ = writeln!(
            out,
            "valid: {} stages, nominal order {}, max |arg| = {:.6}, consistency defect {:e}",
            scheme.len(),
            scheme.nominal_order,
            scheme.max_abs_arg(),
            scheme.consistency_defect()
        );
    }
    if let Some(path) = &cfg.save {
        save_scheme(&scheme, path)?;
    }
    if cfg.print || (!cfg.validate && cfg.save.is_none()) {
        let _ = out.write_all(format_scheme(&scheme).as_bytes());
    }
    Ok(())
}

/// Parses arguments, runs, and returns the process exit code.
pub fn run_with_io<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = write!(err, "{}", e.render());
            if code == 0 {
                return EXIT_OK;
            }
            let first = e.to_string().lines().next().unwrap_or_default().trim_start_matches("error: ").to_string();
            let _ = writeln!(err, "{}", config(first).status_line());
            return EXIT_CONFIG;
        }
    };
    let result = RunConfig::resolve(cli).and_then(|cfg| run(&cfg, out, err));
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "{}", e.status_line());
            e.exit_code()
        }
    }
}

/// Entry point for the binary.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with_io(args, &mut stdout.lock(), &mut stderr.lock())
}
