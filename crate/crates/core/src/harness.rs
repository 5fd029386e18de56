//! Reference solutions, error norms, convergence and efficiency studies and
//! order estimation.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::compositions::{build_order, step_count, IntegrateOptions, Scheme, SchemeError, StepError};
use crate::problems::{Problem, ProblemKind, State};
use crate::spectral::{Field, SpectralError};

/// Records whose error falls below this multiple of the round-off floor are
/// excluded from slope fits.
pub const FLOOR_MULTIPLE: f64 = 10.0;

pub const CSV_HEADER: [&str; 6] = ["scheme", "order", "dt", "error", "wall_seconds", "flags"];

pub const FLAG_FAILED: &str = "failed";
pub const FLAG_ROUNDOFF: &str = "roundoff";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Scheme(#[from] SchemeError),
    #[error(transparent)]
    Step(#[from] StepError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("states have different shapes")]
    ShapeMismatch,
    #[error("dt grid must be strictly decreasing and positive")]
    BadGrid,
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("csv row {row}: {message}")]
    CsvRow { row: usize, message: String },
    #[error("thread pool: {0}")]
    Pool(String),
}

#[derive(Debug, Error, PartialEq)]
pub enum OrderError {
    #[error("scheme '{0}' has no records")]
    UnknownScheme(String),
    #[error("only {found} usable records in the window (need at least 3)")]
    TooFewPoints { found: usize },
    #[error("every record in the window is below the round-off floor")]
    AllBelowFloor,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.to_path_buf(), source }
}

/// How the per-species norm treats the grid spacing.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormVariant {
    /// As each figure caption prints it: `sqrt(sum |d|^2) * dx` for the
    /// linear problem and no `dx` for Gray-Scott.
    #[default]
    Caption,
    /// `sqrt(sum |d|^2) * dx` for every problem.
    WithDx,
}

impl std::str::FromStr for NormVariant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "caption" => Ok(Self::Caption),
            "with-dx" => Ok(Self::WithDx),
            _ => Err(format!("unknown norm variant '{s}' (expected caption or with-dx)")),
        }
    }
}

/// `sqrt(sum |candidate - reference|^2) * dx`.
pub fn error_l2(candidate: &Field, reference: &Field, dx: f64) -> Result<f64, SpectralError> {
    Ok(l2_sum(candidate, reference)?.sqrt() * dx)
}

fn l2_sum(a: &Field, b: &Field) -> Result<f64, SpectralError> {
    if !a.same_grid(b) {
        return Err(SpectralError::GridMismatch);
    }
    Ok(a.values().iter().zip(b.values()).map(|(x, y)| (x - y).norm_sqr()).sum())
}

/// The problem-appropriate error: one species for the linear problem, the
/// sum of per-species norms for Gray-Scott.
pub fn state_error(kind: ProblemKind, candidate: &State, reference: &State, norm: NormVariant) -> Result<f64, HarnessError> {
    let cand = candidate.species();
    let refs = reference.species();
    if cand.len() != refs.len() {
        return Err(HarnessError::ShapeMismatch);
    }
    let dx = match (kind, norm) {
        (ProblemKind::GrayScott, NormVariant::Caption) => 1.0,
        _ => candidate.grid().dx(),
    };
    let mut total = 0.0;
    for (c, r) in cand.iter().zip(&refs) {
        total += error_l2(c, r, dx)?;
    }
    Ok(total)
}

/// Error level below which time-discretisation error is indistinguishable
/// from round-off: `eps * sqrt(n) * max|u_ref|`.
pub fn roundoff_floor(reference: &State) -> f64 {
    f64::EPSILON * (reference.grid().n() as f64).sqrt() * reference.norm_inf()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyRecord {
    #[serde(rename = "scheme")]
    pub scheme_name: String,
    #[serde(rename = "order")]
    pub order_nominal: u32,
    pub dt: f64,
    pub error: f64,
    pub wall_seconds: f64,
    /// `;`-separated markers such as `failed` or `roundoff`.
    pub flags: String,
}

impl StudyRecord {
    pub fn has_flag(&self, flag: &str) -> bool {
        self.flags.split(';').any(|f| f == flag)
    }

    fn add_flag(&mut self, flag: &str) {
        if !self.has_flag(flag) {
            if !self.flags.is_empty() {
                self.flags.push(';');
            }
            self.flags.push_str(flag);
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudyTable {
    pub records: Vec<StudyRecord>,
    pub problem_name: String,
    pub reference_dt: f64,
    /// Base round-off floor; see [`FLOOR_MULTIPLE`].
    pub roundoff_floor: f64,
}

impl StudyTable {
    pub fn new(problem_name: impl Into<String>, reference_dt: f64, roundoff_floor: f64, records: Vec<StudyRecord>) -> Self {
        let mut t = Self { records, problem_name: problem_name.into(), reference_dt, roundoff_floor };
        t.sort();
        t.flag_roundoff();
        t
    }

    /// Orders by scheme name, then by decreasing `dt`.
    pub fn sort(&mut self) {
        self.records
            .sort_by(|a, b| a.scheme_name.cmp(&b.scheme_name).then(b.dt.total_cmp(&a.dt)));
    }

    fn flag_roundoff(&mut self) {
        let cut = FLOOR_MULTIPLE * self.roundoff_floor;
        for r in &mut self.records {
            if r.error.is_finite() && r.error < cut {
                r.add_flag(FLAG_ROUNDOFF);
            }
        }
    }

    pub fn scheme_names(&self) -> Vec<&str> {
        let mut names: Vec<&str> = self.records.iter().map(|r| r.scheme_name.as_str()).collect();
        names.dedup();
        names
    }

    pub fn for_scheme<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a StudyRecord> + 'a {
        self.records.iter().filter(move |r| r.scheme_name == name)
    }

    pub fn to_csv(&self) -> Result<String, HarnessError> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        w.write_record(CSV_HEADER)?;
        for r in &self.records {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().map_err(|e| HarnessError::Csv(e.into_error().into()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Reads a table written by [`StudyTable::to_csv`]. The problem name,
    /// reference step and floor are not part of the schema and come back
    /// empty.
    pub fn from_csv(text: &str) -> Result<Self, HarnessError> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let headers = r.headers()?.clone();
        let expected = CSV_HEADER;
        if headers.iter().ne(expected.iter().copied()) {
            return Err(HarnessError::CsvRow {
                row: 0,
                message: format!("header must be {}", expected.join(",")),
            });
        }
        let mut records = Vec::new();
        for (i, row) in r.deserialize().enumerate() {
            let rec: StudyRecord = row?;
            if !(rec.dt > 0.0) {
                return Err(HarnessError::CsvRow { row: i + 1, message: format!("dt {} must be positive", rec.dt) });
            }
            records.push(rec);
        }
        Ok(Self { records, problem_name: String::new(), reference_dt: f64::NAN, roundoff_floor: 0.0 })
    }
}

/// Least-squares fit of `log(error)` against `log(dt)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrderFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit in natural-log units.
    pub residual: f64,
    pub points: usize,
}

pub fn fit_log_log(points: &[(f64, f64)]) -> OrderFit {
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    OrderFit { slope, intercept, residual: (ss / n).sqrt(), points: points.len() }
}

/// Fitted convergence order of one scheme over `window = (dt_min, dt_max)`,
/// inclusive, skipping failed records and records in the round-off plateau.
pub fn estimate_order(table: &StudyTable, scheme_name: &str, window: (f64, f64)) -> Result<OrderFit, OrderError> {
    let (lo, hi) = (window.0.min(window.1), window.0.max(window.1));
    let slack = 1e-12;
    let all: Vec<&StudyRecord> = table.for_scheme(scheme_name).collect();
    if all.is_empty() {
        return Err(OrderError::UnknownScheme(scheme_name.to_string()));
    }
    let in_window: Vec<&StudyRecord> = all
        .into_iter()
        .filter(|r| r.dt >= lo * (1.0 - slack) && r.dt <= hi * (1.0 + slack))
        .filter(|r| !r.has_flag(FLAG_FAILED) && r.error.is_finite())
        .collect();
    let cut = FLOOR_MULTIPLE * table.roundoff_floor;
    let usable: Vec<(f64, f64)> =
        in_window.iter().filter(|r| r.error >= cut && r.error > 0.0).map(|r| (r.dt, r.error)).collect();
    if usable.is_empty() && !in_window.is_empty() {
        return Err(OrderError::AllBelowFloor);
    }
    if usable.len() < 3 {
        return Err(OrderError::TooFewPoints { found: usable.len() });
    }
    Ok(fit_log_log(&usable))
}

/// Dyadic steps `2^-lo_exp .. 2^-hi_exp`, coarsest first.
pub fn dyadic_grid(lo_exp: i32, hi_exp: i32) -> Vec<f64> {
    (lo_exp..=hi_exp).map(|e| 2f64.powi(-e)).collect()
}

/// Default convergence grid for the linear-potential presets.
pub fn linpot_dt_grid() -> Vec<f64> {
    dyadic_grid(4, 14)
}

/// Default convergence grid for the Gray-Scott presets.
pub fn gray_scott_dt_grid() -> Vec<f64> {
    vec![0.1, 0.05, 0.02, 0.01, 0.005, 0.002, 0.001]
}

pub fn default_dt_grid(problem: &Problem) -> Vec<f64> {
    match problem.kind {
        ProblemKind::LinearPotential => linpot_dt_grid(),
        ProblemKind::GrayScott => gray_scott_dt_grid(),
    }
}

/// The scheme used for reference solutions.
pub fn reference_scheme() -> Scheme {
    build_order(8).expect("order 8 is constructible")
}

fn cache_key(problem: &Problem, t_final: f64, scheme: &Scheme, dt: f64) -> String {
    let mut text = format!("rdsplit-{};", env!("CARGO_PKG_VERSION"));
    text.push_str(&problem.fingerprint());
    write!(text, ";t_final={:016x};dt={:016x};scheme={}", t_final.to_bits(), dt.to_bits(), scheme.name).unwrap();
    for s in &scheme.stages {
        for c in [s.a, s.b] {
            write!(text, ";{:016x}{:016x}", c.re.to_bits(), c.im.to_bits()).unwrap();
        }
    }
    hex(&Sha256::digest(text.as_bytes()))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn state_bytes(state: &State) -> Vec<u8> {
    let mut out = Vec::new();
    for f in state.species() {
        for c in f.values() {
            out.extend_from_slice(&c.re.to_le_bytes());
            out.extend_from_slice(&c.im.to_le_bytes());
        }
    }
    out
}

fn state_from_bytes(template: &State, bytes: &[u8]) -> Option<State> {
    let n = template.grid().n();
    let species = template.species().len();
    if bytes.len() != species * n * 16 {
        return None;
    }
    let values: Vec<Complex64> = bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().unwrap());
            let im = f64::from_le_bytes(c[8..].try_into().unwrap());
            Complex64::new(re, im)
        })
        .collect();
    let grid = template.grid().clone();
    let field = |k: usize| Field::new(grid.clone(), values[k * n..(k + 1) * n].to_vec()).ok();
    Some(match template {
        State::Scalar(_) => State::Scalar(field(0)?),
        State::Pair(_) => State::Pair(crate::subflows::GSState { u: field(0)?, v: field(1)? }),
    })
}

/// Where a reference solution came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReferenceOrigin {
    Computed,
    Cached,
    /// A cache entry existed but failed its hash check.
    Recomputed,
}

/// Order-8 solution at step `dt_ref`, read from or written to `cache_dir`
/// when one is given.
///
/// Cache entries are `<key>.bin` (little-endian `(re, im)` pairs, species
/// concatenated) plus a `<key>.txt` sidecar with the key and the content
/// hash.
pub fn reference_solution(
    problem: &Problem,
    t_final: f64,
    dt_ref: f64,
    cache_dir: Option<&Path>,
) -> Result<(State, ReferenceOrigin), HarnessError> {
    let scheme = reference_scheme();
    step_count(dt_ref, t_final)?;
    let compute = || -> Result<State, HarnessError> {
        Ok(problem.run(&scheme, dt_ref, t_final, IntegrateOptions::default())?.final_state)
    };
    let Some(dir) = cache_dir else {
        return Ok((compute()?, ReferenceOrigin::Computed));
    };
    let key = cache_key(problem, t_final, &scheme, dt_ref);
    let bin = dir.join(format!("{key}.bin"));
    let side = dir.join(format!("{key}.txt"));
    let mut origin = ReferenceOrigin::Computed;
    if bin.exists() || side.exists() {
        if let Some(state) = read_cached(problem, &key, &bin, &side) {
            return Ok((state, ReferenceOrigin::Cached));
        }
        origin = ReferenceOrigin::Recomputed;
    }
    let state = compute()?;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let bytes = state_bytes(&state);
    let sidecar = format!(
        "key {key}\ncontent-sha256 {}\nproblem {}\nt_final {t_final:e}\ndt {dt_ref:e}\nscheme {}\n",
        hex(&Sha256::digest(&bytes)),
        problem.name,
        scheme.name
    );
    write_atomic(&bin, &bytes)?;
    write_atomic(&side, sidecar.as_bytes())?;
    Ok((state, origin))
}

fn read_cached(problem: &Problem, key: &str, bin: &Path, side: &Path) -> Option<State> {
    let sidecar = fs::read_to_string(side).ok()?;
    let field = |name: &str| {
        sidecar.lines().find_map(|l| l.strip_prefix(name).and_then(|r| r.strip_prefix(' ')).map(str::to_string))
    };
    if field("key")? != key {
        return None;
    }
    let bytes = fs::read(bin).ok()?;
    if hex(&Sha256::digest(&bytes)) != field("content-sha256")? {
        return None;
    }
    state_from_bytes(&problem.initial_state(), &bytes)
}

/// Writes through a temporary file in the target directory and renames it
/// into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(dir))?;
    tmp.write_all(bytes).map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| HarnessError::Io { path: path.to_path_buf(), source: e.error })?;
    Ok(())
}

#[derive(Clone, Debug)]
pub struct StudyOptions {
    pub norm: NormVariant,
    /// Serialise cells and record the median of three timed runs.
    pub timing: bool,
    /// Cap on concurrently running cells; `None` uses every core.
    pub jobs: Option<usize>,
}

impl Default for StudyOptions {
    fn default() -> Self {
        Self { norm: NormVariant::Caption, timing: false, jobs: None }
    }
}

fn run_cell(
    problem: &Problem,
    scheme: &Scheme,
    dt: f64,
    t_final: f64,
    reference: &State,
    opts: &StudyOptions,
) -> StudyRecord {
    let mut rec = StudyRecord {
        scheme_name: scheme.name.clone(),
        order_nominal: scheme.nominal_order,
        dt,
        error: f64::NAN,
        wall_seconds: f64::NAN,
        flags: String::new(),
    };
    let reps = if opts.timing { 3 } else { 1 };
    let mut times = Vec::with_capacity(reps);
    let mut last = None;
    for _ in 0..reps {
        let start = Instant::now();
        let out = problem.run(scheme, dt, t_final, IntegrateOptions::default());
        times.push(start.elapsed().as_secs_f64().max(f64::MIN_POSITIVE));
        match out {
            Ok(traj) => last = Some(traj.final_state),
            Err(_) => {
                rec.add_flag(FLAG_FAILED);
                return rec;
            }
        }
    }
    times.sort_by(f64::total_cmp);
    rec.wall_seconds = times[times.len() / 2];
    match last.map(|s| state_error(problem.kind, &s, reference, opts.norm)) {
        Some(Ok(e)) if e.is_finite() => rec.error = e,
        _ => rec.add_flag(FLAG_FAILED),
    }
    rec
}

fn check_dt_grid(dt_grid: &[f64], t_final: f64) -> Result<(), HarnessError> {
    if dt_grid.iter().any(|&d| !(d > 0.0)) || dt_grid.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(HarnessError::BadGrid);
    }
    for &dt in dt_grid {
        step_count(dt, t_final)?;
    }
    Ok(())
}

/// Runs every `(scheme, dt)` cell against a given reference state. Failed
/// cells are kept with the `failed` flag.
pub fn convergence_study_against(
    problem: &Problem,
    schemes: &[Scheme],
    dt_grid: &[f64],
    t_final: f64,
    reference: &State,
    reference_dt: f64,
    opts: &StudyOptions,
) -> Result<StudyTable, HarnessError> {
    check_dt_grid(dt_grid, t_final)?;
    let cells: Vec<(&Scheme, f64)> = schemes.iter().flat_map(|s| dt_grid.iter().map(move |&dt| (s, dt))).collect();
    let records: Vec<StudyRecord> = if opts.timing {
        cells.iter().map(|(s, dt)| run_cell(problem, s, *dt, t_final, reference, opts)).collect()
    } else {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(j) = opts.jobs {
            builder = builder.num_threads(j.max(1));
        }
        let pool = builder.build().map_err(|e| HarnessError::Pool(e.to_string()))?;
        pool.install(|| cells.par_iter().map(|(s, dt)| run_cell(problem, s, *dt, t_final, reference, opts)).collect())
    };
    let floor = roundoff_floor(reference);
    Ok(StudyTable::new(problem.name.clone(), reference_dt, floor, records))
}

/// Computes (or loads) the reference and runs the study against it.
pub fn convergence_study(
    problem: &Problem,
    schemes: &[Scheme],
    dt_grid: &[f64],
    t_final: f64,
    reference_dt: f64,
    cache_dir: Option<&Path>,
    opts: &StudyOptions,
) -> Result<StudyTable, HarnessError> {
    check_dt_grid(dt_grid, t_final)?;
    let (reference, _) = reference_solution(problem, t_final, reference_dt, cache_dir)?;
    convergence_study_against(problem, schemes, dt_grid, t_final, &reference, reference_dt, opts)
}

/// Schemes of the given nominal orders (2 is Strang).
pub fn schemes_for_orders(orders: &[u32]) -> Result<Vec<Scheme>, SchemeError> {
    orders.iter().map(|&p| build_order(p)).collect()
}

/// Space-time matrix of one species: one row per snapshot time, one column
/// per grid node. Values are real parts.
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotMatrix {
    pub nodes: Vec<f64>,
    pub times: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
}

impl SnapshotMatrix {
    /// Collects species `index` from a trajectory's snapshots.
    pub fn from_snapshots(snapshots: &[(f64, State)], index: usize) -> Self {
        let nodes = snapshots.first().map(|(_, s)| s.grid().nodes().collect()).unwrap_or_default();
        let times = snapshots.iter().map(|(t, _)| *t).collect();
        let rows = snapshots.iter().map(|(_, s)| s.species()[index].real_parts()).collect();
        Self { nodes, times, rows }
    }

    /// Header `t,<x_0>,...,<x_{n-1}>`, then one row per time.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for x in &self.nodes {
            write!(out, ",{x:e}").unwrap();
        }
        out.push('\n');
        for (t, row) in self.times.iter().zip(&self.rows) {
            write!(out, "{t:e}").unwrap();
            for v in row {
                write!(out, ",{v:e}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, HarnessError> {
        let bad = |row: usize, message: String| HarnessError::CsvRow { row, message };
        let parse = |row: usize, v: &str| v.parse::<f64>().map_err(|e| bad(row, format!("'{v}': {e}")));
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad(0, "empty file".into()))?;
        let mut cols = header.split(',');
        if cols.next() != Some("t") {
            return Err(bad(0, "header must start with 't'".into()));
        }
        let nodes = cols.map(|c| parse(0, c)).collect::<Result<Vec<_>, _>>()?;
        let (mut times, mut rows) = (Vec::new(), Vec::new());
        for (i, line) in lines.enumerate() {
            let vals = line.split(',').map(|c| parse(i + 1, c)).collect::<Result<Vec<_>, _>>()?;
            if vals.len() != nodes.len() + 1 {
                return Err(bad(i + 1, format!("{} columns, expected {}", vals.len(), nodes.len() + 1)));
            }
            times.push(vals[0]);
            rows.push(vals[1..].to_vec());
        }
        Ok(Self { nodes, times, rows })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compositions::strang;
    use crate::problems::preset;
    use crate::spectral::make_grid;

    fn record(scheme: &str, dt: f64, error: f64) -> StudyRecord {
        StudyRecord {
            scheme_name: scheme.into(),
            order_nominal: 2,
            dt,
            error,
            wall_seconds: 1.0,
            flags: String::new(),
        }
    }

    #[test]
    fn l2_of_identical_fields_is_zero() {
        let g = make_grid(16, 0.0, 1.0).unwrap();
        let f = Field::from_real_fn(g.clone(), |x| x.sin());
        assert_eq!(error_l2(&f, &f, g.dx()).unwrap(), 0.0);
    }

    #[test]
    fn l2_of_constant_difference() {
        let g = make_grid(64, 0.0, 2.0).unwrap();
        let c = 0.3;
        let f = Field::from_real_fn(g.clone(), |x| x * x);
        let h = Field::from_real_fn(g.clone(), |x| x * x + c);
        let want = c * 64f64.sqrt() * g.dx();
        assert!((error_l2(&h, &f, g.dx()).unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn l2_is_homogeneous() {
        let g = make_grid(32, -1.0, 1.0).unwrap();
        let f = Field::from_real_fn(g.clone(), |x| x.cos());
        let h = Field::from_real_fn(g.clone(), |x| x.exp());
        let a = Complex64::new(-2.5, 0.0);
        let base = error_l2(&f, &h, g.dx()).unwrap();
        let scaled = error_l2(&f.scaled(a), &h.scaled(a), g.dx()).unwrap();
        assert!((scaled - 2.5 * base).abs() <= 1e-14 * scaled);
    }

    #[test]
    fn l2_rejects_grid_mismatch() {
        let f = Field::zeros(make_grid(16, 0.0, 1.0).unwrap());
        let h = Field::zeros(make_grid(16, 0.0, 2.0).unwrap());
        assert!(error_l2(&f, &h, 1.0).is_err());
    }

    #[test]
    fn gray_scott_norm_sums_species() {
        let p = preset("gs-low").unwrap();
        let a = p.initial_state();
        let State::Pair(mut s) = a.clone() else { panic!() };
        for c in s.u.values_mut() {
            *c += 1.0;
        }
        for c in s.v.values_mut() {
            *c += 2.0;
        }
        let b = State::Pair(s);
        let n = p.grid.n() as f64;
        let caption = state_error(p.kind, &b, &a, NormVariant::Caption).unwrap();
        assert!((caption - 3.0 * n.sqrt()).abs() < 1e-10);
        let with_dx = state_error(p.kind, &b, &a, NormVariant::WithDx).unwrap();
        assert!((with_dx - 3.0 * n.sqrt() * p.grid.dx()).abs() < 1e-12);
    }

    #[test]
    fn exact_power_law_slope() {
        let recs = dyadic_grid(2, 8).into_iter().map(|dt| record("s", dt, 7.0 * dt.powi(3))).collect();
        let t = StudyTable::new("p", 1e-6, 0.0, recs);
        let fit = estimate_order(&t, "s", (1e-3, 1.0)).unwrap();
        assert!((fit.slope - 3.0).abs() < 1e-12);
        assert!(fit.residual < 1e-12);
        assert_eq!(fit.points, 7);
    }

    #[test]
    fn floor_records_are_excluded() {
        let floor = 1e-14;
        let recs: Vec<StudyRecord> =
            dyadic_grid(1, 12).into_iter().map(|dt| record("s", dt, (1e-2 * dt.powi(4)).max(floor))).collect();
        let t = StudyTable::new("p", 1e-6, floor, recs);
        let flagged = t.records.iter().filter(|r| r.has_flag(FLAG_ROUNDOFF)).count();
        assert!(flagged > 0);
        let fit = estimate_order(&t, "s", (1e-9, 1.0)).unwrap();
        assert!((fit.slope - 4.0).abs() < 1e-12);
        assert!(t.records.iter().filter(|r| !r.has_flag(FLAG_ROUNDOFF)).all(|r| r.error >= 10.0 * floor));
    }

    #[test]
    fn order_errors() {
        let recs = vec![record("s", 0.5, 1e-20), record("s", 0.25, 1e-20), record("s", 0.125, 1e-20)];
        let t = StudyTable::new("p", 1e-6, 1e-16, recs);
        assert_eq!(estimate_order(&t, "s", (0.1, 1.0)), Err(OrderError::AllBelowFloor));
        assert_eq!(estimate_order(&t, "x", (0.1, 1.0)), Err(OrderError::UnknownScheme("x".into())));
        assert_eq!(estimate_order(&t, "s", (0.2, 1.0)), Err(OrderError::AllBelowFloor));
        let t2 = StudyTable::new("p", 1e-6, 0.0, vec![record("s", 0.5, 1.0), record("s", 0.25, 0.5)]);
        assert_eq!(estimate_order(&t2, "s", (0.1, 1.0)), Err(OrderError::TooFewPoints { found: 2 }));
    }

    #[test]
    fn table_sorting_and_csv_round_trip() {
        let mut failed = record("b", 0.1, f64::NAN);
        failed.add_flag(FLAG_FAILED);
        let recs = vec![record("b", 0.01, 1e-5), record("a", 0.01, 0.1 / 3.0), failed, record("a", 0.1, 2.0)];
        let t = StudyTable::new("p", 1e-4, 0.0, recs);
        let order: Vec<(&str, f64)> = t.records.iter().map(|r| (r.scheme_name.as_str(), r.dt)).collect();
        assert_eq!(order, vec![("a", 0.1), ("a", 0.01), ("b", 0.1), ("b", 0.01)]);
        let csv = t.to_csv().unwrap();
        assert!(csv.starts_with("scheme,order,dt,error,wall_seconds,flags\n"));
        let back = StudyTable::from_csv(&csv).unwrap();
        assert_eq!(back.records.len(), 4);
        for (x, y) in back.records.iter().zip(&t.records) {
            assert_eq!(x.scheme_name, y.scheme_name);
            assert_eq!(x.dt.to_bits(), y.dt.to_bits());
            assert!(x.error.to_bits() == y.error.to_bits() || (x.error.is_nan() && y.error.is_nan()));
            assert_eq!(x.flags, y.flags);
        }
        assert!(back.records[2].has_flag(FLAG_FAILED));
    }

    #[test]
    fn empty_table_keeps_its_header() {
        let t = StudyTable::new("p", 1.0, 0.0, vec![]);
        let csv = t.to_csv().unwrap();
        assert_eq!(csv, "scheme,order,dt,error,wall_seconds,flags\n");
        assert!(StudyTable::from_csv(&csv).unwrap().records.is_empty());
    }

    #[test]
    fn snapshot_csv_round_trip() {
        let p = preset("gs-chaos").unwrap();
        let traj = p.run(&strang(), 0.25, 0.5, IntegrateOptions { snapshot_stride: Some(1) }).unwrap();
        let m = SnapshotMatrix::from_snapshots(&traj.snapshots, 1);
        assert_eq!(m.times, vec![0.0, 0.25, 0.5]);
        assert_eq!(m.nodes.len(), 256);
        let back = SnapshotMatrix::from_csv(&m.to_csv()).unwrap();
        assert_eq!(back, m);
        assert!(SnapshotMatrix::from_csv("t,1\n0,1,2\n").is_err());
    }

    #[test]
    fn csv_reader_rejects_bad_header() {
        assert!(StudyTable::from_csv("a,b\n1,2\n").is_err());
    }

    #[test]
    fn dt_grids_tile_their_final_times() {
        for dt in linpot_dt_grid() {
            step_count(dt, 1.0).unwrap();
        }
        for dt in gray_scott_dt_grid() {
            step_count(dt, 10.0).unwrap();
        }
        assert_eq!(linpot_dt_grid().len(), 11);
        assert!(check_dt_grid(&[0.1, 0.2], 1.0).is_err());
        assert!(check_dt_grid(&[0.3], 1.0).is_err());
    }

    #[test]
    fn reference_cache_round_trip_and_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let p = preset("gs-low").unwrap();
        let (a, o1) = reference_solution(&p, 0.1, 0.05, Some(dir.path())).unwrap();
        assert_eq!(o1, ReferenceOrigin::Computed);
        let (b, o2) = reference_solution(&p, 0.1, 0.05, Some(dir.path())).unwrap();
        assert_eq!(o2, ReferenceOrigin::Cached);
        assert_eq!(a, b);
        let bin = fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().path())
            .find(|p| p.extension().is_some_and(|e| e == "bin"))
            .unwrap();
        let mut bytes = fs::read(&bin).unwrap();
        bytes[3] ^= 0x40;
        fs::write(&bin, bytes).unwrap();
        let (c, o3) = reference_solution(&p, 0.1, 0.05, Some(dir.path())).unwrap();
        assert_eq!(o3, ReferenceOrigin::Recomputed);
        assert_eq!(a, c);
    }

    #[test]
    fn study_flags_failed_cells_and_continues() {
        let p = preset("gs-low").unwrap();
        let (reference, _) = reference_solution(&p, 0.2, 0.1, None).unwrap();
        let mut bad = strang();
        bad.name = "zero-b".into();
        bad.stages[0].b = Complex64::new(f64::NAN, 0.0);
        let t = convergence_study_against(&p, &[strang(), bad], &[0.2, 0.1], 0.2, &reference, 0.1, &StudyOptions::default())
            .unwrap();
        assert_eq!(t.records.len(), 4);
        assert!(t.for_scheme("zero-b").all(|r| r.has_flag(FLAG_FAILED)));
        assert!(t.for_scheme("strang").all(|r| !r.has_flag(FLAG_FAILED) && r.error.is_finite()));
    }

    #[test]
    fn strang_error_ratios_near_four() {
        let p = preset("linpot-low").unwrap();
        let (reference, _) = reference_solution(&p, 0.25, 2f64.powi(-10), None).unwrap();
        let grid = dyadic_grid(5, 8);
        let t = convergence_study_against(&p, &[strang()], &grid, 0.25, &reference, 2f64.powi(-10), &StudyOptions::default())
            .unwrap();
        let errs: Vec<f64> = t.records.iter().map(|r| r.error).collect();
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
        }
    }
}
