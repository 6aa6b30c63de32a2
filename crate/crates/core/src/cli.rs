//! Command-line front end. Settings come from an optional `key=value` config
//! file, overridden by flags. Errors are reported on stderr as one line,
//! `error code=<c> kind=<kind> reason="<message>"`, and the process exits
//! with 2 (invalid input or geometry), 3 (no convergence) or 4 (singular
//! system or degenerate scale).

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::assembly::{solve_v, SingleLayer, TracePair};
use crate::error::Error;
use crate::export::{self, fmt_real, RobinReport};
use crate::geometry::{parse_curve_spec, CurveKind, MultiCurve, Vec2};
use crate::kernels::{circle_closed_forms, g, g0, grad_g, omega, KernelParams};
use crate::robin::{check_criteria, robin_matrix, with_interior_origin, Prediction, RobinMatrix};
use crate::scales::{
    find_roots_on_grid, padded_interval, sigma_min_dips, sigma_min_scan, uniform_grid, ScanOptions,
    SigmaDip,
};

/// Relative asymmetry of `Λ` above which `robin` refines `N`.
pub const ASYMMETRY_THRESHOLD: f64 = 1e-7;
/// Largest `N` tried by `robin` before giving up.
pub const MAX_N: usize = 1024;
/// Node counts of the convergence study.
pub const CONVERGE_NS: [usize; 5] = [32, 64, 128, 256, 512];
const DEFAULT_SCAN_POINTS: usize = 32;

#[derive(Parser, Debug)]
#[command(name = "bislp", version, about = "Biharmonic single-layer potential toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Robin matrix, eigenvalues, determinant and class.
    Robin(Flags),
    /// Degenerate scales by eigenvalue continuation.
    Scales(Flags),
    /// Minimal-energy or single-layer solve with field evaluation.
    Solve(Flags),
    /// Convergence of the Robin matrix in N.
    Converge(Flags),
    /// Finite-difference checks of the kernels.
    KernelCheck(Flags),
}

#[derive(Args, Debug, Clone, Default)]
pub struct Flags {
    /// File of `key=value` lines; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Curve spec, e.g. `circle:r=1+circle:r=0.3,cx=0.2`.
    #[arg(long)]
    pub curve: Option<String>,
    /// Kernel length scale κ0 > 0 (default 1).
    #[arg(long, allow_hyphen_values = true)]
    pub kappa0: Option<f64>,
    /// Kernel constant κ1 (default 0).
    #[arg(long, allow_hyphen_values = true)]
    pub kappa1: Option<f64>,
    /// Nodes per curve (even, at least 8).
    #[arg(long)]
    pub n: Option<usize>,
    /// Probe circle radius.
    #[arg(long)]
    pub probe: Option<f64>,
    /// Scale grid `lo:hi:count`.
    #[arg(long)]
    pub grid: Option<String>,
    /// Eigenvalue tolerance for classification and root multiplicity (default 1e-6).
    #[arg(long)]
    pub tol: Option<f64>,
    /// Output file (robin, solve, converge) or directory (scales).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Add the smallest-singular-value cross-check to `scales`.
    #[arg(long)]
    pub sigma_min: bool,
    /// Boundary data for `solve`: `affine:a0,a1,a2`, `point:zx,zy` or `g:k`.
    #[arg(long, allow_hyphen_values = true)]
    pub data: Option<String>,
    /// `bordered` (minimal-energy extension) or `inverse` (V⁻¹).
    #[arg(long)]
    pub mode: Option<String>,
    /// Evaluation grid `x0:x1:nx,y0:y1:ny`.
    #[arg(long, allow_hyphen_values = true)]
    pub points: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveMode {
    Bordered,
    Inverse,
}

#[derive(Clone, Debug, PartialEq)]
pub enum DataSource {
    Affine([f64; 3]),
    Point(Vec2),
    G(usize),
}

/// Fully resolved settings of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub curve: String,
    pub kappa0: f64,
    pub kappa1: f64,
    pub n: usize,
    pub probe: Option<f64>,
    pub grid: Option<(f64, f64, usize)>,
    pub tol: f64,
    pub out: Option<PathBuf>,
    pub sigma_min: bool,
    pub data: DataSource,
    pub mode: SolveMode,
    pub points: ((f64, f64, usize), (f64, f64, usize)),
}

/// A failed run: exit code, short kind and message.
#[derive(Clone, Debug, PartialEq)]
pub struct Failure {
    pub code: i32,
    pub kind: &'static str,
    pub reason: String,
}

impl Failure {
    fn invalid(reason: impl Into<String>) -> Self {
        Self {
            code: 2,
            kind: "invalid-input",
            reason: reason.into(),
        }
    }

    pub fn line(&self) -> String {
        format!(
            "error code={} kind={} reason=\"{}\"",
            self.code,
            self.kind,
            self.reason.replace('"', "'")
        )
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let (code, kind) = match &e {
            Error::InvalidInput(_) => (2, "invalid-input"),
            Error::Parse(_) => (2, "parse"),
            Error::DegenerateParametrization { .. } => (2, "degenerate-parametrization"),
            Error::Geometry(_) => (2, "geometry"),
            Error::OriginNotInterior => (2, "origin"),
            Error::SingularEvaluation => (2, "singular-evaluation"),
            Error::NearBoundary { .. } => (2, "near-boundary"),
            Error::FitFailure(_) => (3, "fit"),
            Error::LinearAlgebra(_) => (4, "linear-algebra"),
            Error::SingularBordered { .. } => (4, "singular-bordered"),
            Error::DegenerateScale { .. } => (4, "degenerate-scale"),
        };
        Self {
            code,
            kind,
            reason: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self {
            code: 2,
            kind: "io",
            reason: e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// Parses `key=value` lines; `#` starts a comment, `-` and `_` are
/// interchangeable in keys.
pub fn parse_config(text: &str) -> CliResult<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Failure::invalid(format!("config line {} has no '='", i + 1)))?;
        map.insert(k.trim().to_ascii_lowercase().replace('-', "_"), v.trim().to_string());
    }
    Ok(map)
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> CliResult<T> {
    v.trim()
        .parse()
        .map_err(|_| Failure::invalid(format!("{key}: cannot parse '{v}'")))
}

fn parse_range(key: &str, v: &str) -> CliResult<(f64, f64, usize)> {
    let parts: Vec<&str> = v.split(':').collect();
    if parts.len() != 3 {
        return Err(Failure::invalid(format!("{key}: expected lo:hi:count, got '{v}'")));
    }
    Ok((
        parse_num(key, parts[0])?,
        parse_num(key, parts[1])?,
        parse_num(key, parts[2])?,
    ))
}

fn parse_data(v: &str) -> CliResult<DataSource> {
    let (kind, args) = v
        .split_once(':')
        .ok_or_else(|| Failure::invalid(format!("data: expected kind:args, got '{v}'")))?;
    let nums: Vec<f64> = args
        .split(',')
        .map(|s| parse_num("data", s))
        .collect::<CliResult<_>>()?;
    match (kind.to_ascii_lowercase().as_str(), nums.as_slice()) {
        ("affine", [a, b, c]) => Ok(DataSource::Affine([*a, *b, *c])),
        ("point", [x, y]) => Ok(DataSource::Point(Vec2::new(*x, *y))),
        ("g", [k]) if [0.0, 1.0, 2.0].contains(k) => Ok(DataSource::G(*k as usize)),
        _ => Err(Failure::invalid(format!("data: unsupported source '{v}'"))),
    }
}

impl RunConfig {
    /// Merges the config file (if any) with flags; flags win.
    pub fn resolve(flags: &Flags) -> CliResult<Self> {
        let file = match &flags.config {
            Some(path) => parse_config(&std::fs::read_to_string(path)?)?,
            None => BTreeMap::new(),
        };
        let known = [
            "curve", "kappa0", "kappa1", "n", "probe", "grid", "tol", "out", "sigma_min", "data",
            "mode", "points",
        ];
        if let Some(k) = file.keys().find(|k| !known.contains(&k.as_str())) {
            return Err(Failure::invalid(format!("unknown config key '{k}'")));
        }
        let get = |k: &str| file.get(k).map(String::as_str);

        let curve = flags
            .curve
            .clone()
            .or_else(|| get("curve").map(String::from))
            .ok_or_else(|| Failure::invalid("no curve given (--curve or config key 'curve')"))?;
        let kappa0 = match flags.kappa0 {
            Some(v) => v,
            None => get("kappa0").map(|v| parse_num("kappa0", v)).transpose()?.unwrap_or(1.0),
        };
        let kappa1 = match flags.kappa1 {
            Some(v) => v,
            None => get("kappa1").map(|v| parse_num("kappa1", v)).transpose()?.unwrap_or(0.0),
        };
        let n = match flags.n {
            Some(v) => v,
            None => get("n").map(|v| parse_num("n", v)).transpose()?.unwrap_or(128),
        };
        let probe = match flags.probe {
            Some(v) => Some(v),
            None => get("probe").map(|v| parse_num("probe", v)).transpose()?,
        };
        let grid = match flags.grid.as_deref().or(get("grid")) {
            Some(v) => Some(parse_range("grid", v)?),
            None => None,
        };
        let tol = match flags.tol {
            Some(v) => v,
            None => get("tol").map(|v| parse_num("tol", v)).transpose()?.unwrap_or(1e-6),
        };
        let out = flags.out.clone().or_else(|| get("out").map(PathBuf::from));
        let sigma_min = flags.sigma_min
            || match get("sigma_min") {
                Some(v) => parse_num::<bool>("sigma_min", v)?,
                None => false,
            };
        let data = parse_data(flags.data.as_deref().or(get("data")).unwrap_or("affine:0,1,0"))?;
        let mode = match flags.mode.as_deref().or(get("mode")).unwrap_or("bordered") {
            "bordered" => SolveMode::Bordered,
            "inverse" => SolveMode::Inverse,
            other => return Err(Failure::invalid(format!("mode: unknown '{other}'"))),
        };
        let points_spec = flags.points.as_deref().or(get("points")).unwrap_or("-3:3:7,-3:3:7");
        let (px, py) = points_spec
            .split_once(',')
            .ok_or_else(|| Failure::invalid("points: expected x0:x1:nx,y0:y1:ny"))?;
        let points = (parse_range("points", px)?, parse_range("points", py)?);

        if !(kappa0 > 0.0 && kappa0.is_finite()) {
            return Err(Failure::invalid(format!("kappa0 must be positive, got {kappa0}")));
        }
        if n < 8 || !n.is_multiple_of(2) {
            return Err(Failure::invalid(format!("n must be even and at least 8, got {n}")));
        }
        if let Some((lo, hi, count)) = grid {
            if !(lo > 0.0 && hi > lo && count >= 2) {
                return Err(Failure::invalid("grid bounds must satisfy 0 < lo < hi, count >= 2"));
            }
        }
        if !(tol > 0.0) {
            return Err(Failure::invalid("tol must be positive"));
        }
        Ok(Self {
            curve,
            kappa0,
            kappa1,
            n,
            probe,
            grid,
            tol,
            out,
            sigma_min,
            data,
            mode,
            points,
        })
    }

    pub fn params(&self) -> CliResult<KernelParams> {
        Ok(KernelParams::new(self.kappa0, self.kappa1)?)
    }

    fn geometry(&self) -> CliResult<MultiCurve> {
        Ok(parse_curve_spec(&self.curve)?)
    }

    fn scan_options(&self) -> ScanOptions {
        ScanOptions {
            n: self.n,
            probe: self.probe,
            tol: self.tol,
        }
    }
}

/// Parses arguments, runs, and returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if code == 0 {
                write!(stdout, "{e}")
            } else {
                writeln!(stderr, "{}", Failure::invalid(e.kind().to_string()).line())
                    .and_then(|_| write!(stderr, "{e}"))
            };
            return code;
        }
    };
    match dispatch(&cli.command, stdout, stderr) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(stderr, "{}", f.line());
            f.code
        }
    }
}

fn dispatch(cmd: &Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult<i32> {
    match cmd {
        Command::Robin(f) => cmd_robin(&RunConfig::resolve(f)?, stdout, stderr),
        Command::Scales(f) => cmd_scales(&RunConfig::resolve(f)?, stdout, stderr),
        Command::Solve(f) => cmd_solve(&RunConfig::resolve(f)?, stdout, stderr),
        Command::Converge(f) => cmd_converge(&RunConfig::resolve(f)?, stdout),
        Command::KernelCheck(f) => cmd_kernel_check(f, stdout),
    }
}

fn emit(out: &Option<PathBuf>, contents: &str, stdout: &mut dyn Write) -> CliResult<()> {
    match out {
        Some(path) => export::write_file(path, contents)?,
        None => stdout.write_all(contents.as_bytes())?,
    }
    Ok(())
}

fn prediction_name(p: Prediction) -> &'static str {
    match p {
        Prediction::PositiveDefinite => "positive",
        Prediction::NegativeDefinite => "negative",
        Prediction::Inconclusive => "inconclusive",
    }
}

/// Robin matrix with `N` doubled until the asymmetry is below threshold.
pub fn converged_robin(multi: &MultiCurve, params: KernelParams, cfg: &RunConfig) -> CliResult<(RobinMatrix, bool)> {
    let mut n = cfg.n;
    loop {
        let mut lambda = robin_matrix(multi, params, n, cfg.probe)?;
        lambda.reclassify(cfg.tol);
        if lambda.relative_asymmetry() <= ASYMMETRY_THRESHOLD {
            return Ok((lambda, true));
        }
        if 2 * n > MAX_N {
            return Ok((lambda, false));
        }
        n *= 2;
    }
}

pub fn cmd_robin(cfg: &RunConfig, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult<i32> {
    let params = cfg.params()?;
    let multi = cfg.geometry()?;
    let (lambda, converged) = converged_robin(&multi, params, cfg)?;
    let prediction = check_criteria(&multi, &params)?.prediction;
    let report = RobinReport::new(&cfg.curve, (cfg.kappa0, cfg.kappa1), &lambda, prediction_name(prediction));
    emit(&cfg.out, &report.to_json(), stdout)?;
    if multi.len() > lambda.exterior.len() {
        writeln!(
            stderr,
            "note: exterior boundary is curves {:?}; {} nested curve(s) ignored",
            lambda.exterior,
            multi.len() - lambda.exterior.len()
        )?;
    }
    if !converged {
        return Err(Failure {
            code: 3,
            kind: "no-convergence",
            reason: format!(
                "relative asymmetry {:e} above {ASYMMETRY_THRESHOLD:e} at N = {}",
                lambda.relative_asymmetry(),
                lambda.n
            ),
        });
    }
    Ok(0)
}

/// Nearest located dip for every root, for the cross-check column.
fn nearest_dips(roots: &[f64], dips: &[SigmaDip]) -> Vec<Option<f64>> {
    roots
        .iter()
        .map(|r| {
            dips.iter()
                .map(|d| d.rho)
                .min_by(|a, b| (a - r).abs().total_cmp(&(b - r).abs()))
        })
        .collect()
}

pub fn cmd_scales(cfg: &RunConfig, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult<i32> {
    let params = cfg.params()?;
    let multi = cfg.geometry()?;
    let (lo, hi, count) = match cfg.grid {
        Some(g) => g,
        None => {
            let (lo, hi) = padded_interval(&multi)?;
            (lo, hi, DEFAULT_SCAN_POINTS)
        }
    };
    let grid = uniform_grid(lo, hi, count)?;
    let mut scan = find_roots_on_grid(&multi, params, &grid, &cfg.scan_options())?;
    if cfg.grid.is_none() {
        scan.interval = Some((lo, hi));
    }
    for w in &scan.warnings {
        writeln!(stderr, "warning: {w}")?;
    }

    let (sigma, dips) = if cfg.sigma_min {
        let s = sigma_min_scan(&multi, params, &scan.grid, cfg.n)?;
        let dips = sigma_min_dips(&multi, params, &s, cfg.n, 1e-6)?;
        (Some(s.into_iter().map(|v| v.1).collect::<Vec<_>>()), Some(dips))
    } else {
        (None, None)
    };

    let branches = export::branches_csv(&scan, sigma.as_deref());
    let mut roots = export::roots_csv(&scan);
    if let Some(dips) = &dips {
        let rhos: Vec<f64> = scan.roots.iter().map(|r| r.rho).collect();
        let nearest = nearest_dips(&rhos, dips);
        let mut lines = roots.lines();
        let mut with_dip = format!("{},nearest_dip\n", lines.next().unwrap_or_default());
        for (line, d) in lines.zip(nearest) {
            let d = d.map(fmt_real).unwrap_or_else(|| "nan".into());
            with_dip.push_str(&format!("{line},{d}\n"));
        }
        roots = with_dip;
    }
    match &cfg.out {
        Some(dir) => {
            export::write_file(&dir.join("branches.csv"), &branches)?;
            export::write_file(&dir.join("roots.csv"), &roots)?;
        }
        None => stdout.write_all(roots.as_bytes())?,
    }
    Ok(0)
}

fn axis((lo, hi, count): (f64, f64, usize)) -> CliResult<Vec<f64>> {
    match count {
        0 => Err(Failure::invalid("points: count must be positive")),
        1 => Ok(vec![lo]),
        _ => Ok((0..count)
            .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
            .collect()),
    }
}

fn boundary_data<'a>(data: &'a DataSource, params: &'a KernelParams) -> impl Fn(Vec2, Vec2) -> (f64, f64) + 'a {
    move |x, n| match data {
        DataSource::Affine(a) => (a[0] + a[1] * x.x + a[2] * x.y, a[1] * n.x + a[2] * n.y),
        DataSource::Point(z) => {
            let d = x - *z;
            (g0(d, params), d.dot(&n) * (2.0 * (d.norm() / params.kappa0()).ln() + 1.0) / (8.0 * PI))
        }
        DataSource::G(k) => (
            g(x, *k, params).unwrap_or(f64::NAN),
            grad_g(x, *k, params).map(|v| v.dot(&n)).unwrap_or(f64::NAN),
        ),
    }
}

pub fn cmd_solve(cfg: &RunConfig, stdout: &mut dyn Write, _stderr: &mut dyn Write) -> CliResult<i32> {
    let params = cfg.params()?;
    let multi = cfg.geometry()?;
    let layer = SingleLayer::new(&multi, params, cfg.n)?;
    let p = TracePair::from_fn(layer.discretization(), boundary_data(&cfg.data, &params));
    if p.p0.iter().chain(&p.p1).any(|v| !v.is_finite()) {
        return Err(Failure::invalid("boundary data is singular on the curve"));
    }
    let v = layer.assemble_v();
    let q = match cfg.mode {
        SolveMode::Bordered => v.build_bordered()?.solve_trace(&p)?,
        SolveMode::Inverse => match solve_v(&v, &p) {
            Ok(q) => q,
            Err(Error::DegenerateScale { condition }) => {
                let nearest = nearest_degenerate_scale(&multi, params, cfg)
                    .map(|r| format!("{r:.9}"))
                    .unwrap_or_else(|| "none".into());
                return Err(Failure {
                    code: 4,
                    kind: "degenerate-scale",
                    reason: format!("V is singular (condition {condition:e}); nearest rho*={nearest}"),
                });
            }
            Err(e) => return Err(e.into()),
        },
    };

    let mut out = String::from("x,y,u,lap_u\n");
    let mut skipped = 0usize;
    for y in axis(cfg.points.1)? {
        for x in axis(cfg.points.0)? {
            match layer.eval_field(&q, Vec2::new(x, y)) {
                Ok(f) => out.push_str(&format!("{},{},{},{}\n", fmt_real(x), fmt_real(y), fmt_real(f.u), fmt_real(f.lap))),
                Err(Error::NearBoundary { .. }) => skipped += 1,
                Err(e) => return Err(e.into()),
            }
        }
    }
    out.push_str(&format!("# warnings,near_boundary_skipped={skipped}\n"));
    emit(&cfg.out, &out, stdout)?;
    Ok(0)
}

/// Degenerate scale closest to 1.
fn nearest_degenerate_scale(multi: &MultiCurve, params: KernelParams, cfg: &RunConfig) -> Option<f64> {
    let (lo, hi) = padded_interval(multi).ok()?;
    let grid = uniform_grid(lo.min(0.9), hi.max(1.1), 16).ok()?;
    let scan = find_roots_on_grid(multi, params, &grid, &cfg.scan_options()).ok()?;
    scan.roots
        .iter()
        .map(|r| r.rho)
        .min_by(|a, b| (a - 1.0).abs().total_cmp(&(b - 1.0).abs()))
}

/// Closed-form `Λ` when the exterior boundary is one circle centred at the
/// origin used for `Λ`.
fn closed_form_lambda(multi: &MultiCurve, params: &KernelParams) -> Option<[f64; 3]> {
    let (ext, _) = with_interior_origin(&multi.exterior_boundary()).ok()?;
    if ext.len() != 1 {
        return None;
    }
    let c = &ext.curves()[0];
    match c.kind() {
        CurveKind::Circle { radius } if c.center().norm() < 1e-12 * radius => {
            circle_closed_forms(*radius, params).ok().map(|cf| cf.lambda)
        }
        _ => None,
    }
}

pub fn cmd_converge(cfg: &RunConfig, stdout: &mut dyn Write) -> CliResult<i32> {
    let params = cfg.params()?;
    let multi = cfg.geometry()?;
    let exact = closed_form_lambda(&multi, &params);
    let runs: Vec<RobinMatrix> = CONVERGE_NS
        .iter()
        .map(|&n| robin_matrix(&multi, params, n, cfg.probe))
        .collect::<crate::Result<_>>()?;
    let reference = runs.last().expect("non-empty").matrix;
    let mut out = String::from("n,error_vs_reference,error_vs_closed_form,asymmetry\n");
    for r in &runs {
        let vs_ref = (r.matrix - reference).amax();
        let vs_exact = exact
            .map(|l| {
                let d = nalgebra::Matrix3::from_diagonal(&nalgebra::Vector3::from(l));
                (r.matrix - d).amax()
            })
            .unwrap_or(f64::NAN);
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.n,
            fmt_real(vs_ref),
            if vs_exact.is_nan() { "nan".into() } else { fmt_real(vs_exact) },
            fmt_real(r.asymmetry)
        ));
    }
    emit(&cfg.out, &out, stdout)?;
    Ok(0)
}

/// Deterministic points in the annulus `0.3 < |x| < 3` (golden-angle spiral).
fn check_points(count: usize) -> Vec<Vec2> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|i| {
            let r = 0.3 + 2.7 * (i as f64 + 0.5) / count as f64;
            let a = golden * i as f64;
            Vec2::new(r * a.cos(), r * a.sin())
        })
        .collect()
}

/// Largest relative errors of finite-difference gradients and Laplacians
/// of the kernels at 100 points.
pub fn kernel_check(params: &KernelParams) -> (f64, f64) {
    let mut grad_err: f64 = 0.0;
    let mut lap_err: f64 = 0.0;
    for x in check_points(100) {
        let h = 1e-5 * x.norm();
        let e = [Vec2::new(h, 0.0), Vec2::new(0.0, h)];
        for j in 0..2 {
            let fd = (g0(x + e[j], params) - g0(x - e[j], params)) / (2.0 * h);
            let exact = -g(x, j + 1, params).expect("nonzero point");
            grad_err = grad_err.max((fd - exact).abs() / exact.abs().max(1e-3));
        }
        let hl = 2e-4 * x.norm();
        for k in 0..3 {
            let f = |y: Vec2| g(y, k, params).expect("nonzero point");
            let fd = (f(x + Vec2::new(hl, 0.0)) + f(x - Vec2::new(hl, 0.0)) + f(x + Vec2::new(0.0, hl))
                + f(x - Vec2::new(0.0, hl))
                - 4.0 * f(x))
                / (hl * hl);
            let exact = omega(x, k, params).expect("nonzero point");
            lap_err = lap_err.max((fd - exact).abs() / exact.abs().max(1e-3));
        }
    }
    (grad_err, lap_err)
}

fn cmd_kernel_check(flags: &Flags, stdout: &mut dyn Write) -> CliResult<i32> {
    let params = KernelParams::new(flags.kappa0.unwrap_or(1.0), flags.kappa1.unwrap_or(0.0))?;
    let (grad_err, lap_err) = kernel_check(&params);
    let ok = grad_err < 1e-6 && lap_err < 1e-5;
    let report = format!(
        "gradient_max_rel_error={}\nlaplacian_max_rel_error={}\nstatus={}\n",
        fmt_real(grad_err),
        fmt_real(lap_err),
        if ok { "pass" } else { "fail" }
    );
    emit(&flags.out, &report, stdout)?;
    if ok {
        Ok(0)
    } else {
        Err(Failure {
            code: 3,
            kind: "kernel-check",
            reason: "finite-difference checks exceeded tolerance".into(),
        })
    }
}

/// Convenience for callers holding a path to a config file.
pub fn flags_from_config(path: &Path) -> Flags {
    Flags {
        config: Some(path.to_path_buf()),
        ..Flags::default()
    }
}
