//! Degenerate scales: values of `ρ` at which `Λ` of `ρΓe` is singular, found
//! by continuing its eigenvalue branches across a grid and bisecting sign
//! changes, and cross-checked against dips of the smallest singular value of
//! the discretized `V`.

use std::f64::consts::E;

use rayon::prelude::*;

use crate::assembly::SingleLayer;
use crate::error::{Error, Result};
use crate::geometry::MultiCurve;
use crate::kernels::KernelParams;
use crate::robin::{robin_matrix, with_interior_origin};

/// Relative padding of the admissible interval `(1/(eR+), 1/(eR-))`.
pub const INTERVAL_PADDING: f64 = 0.1;

/// Refinement depth for cells where branch pairing is ambiguous.
const MAX_REFINE_DEPTH: usize = 4;

/// Scan settings shared by all grid points.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanOptions {
    pub n: usize,
    pub probe: Option<f64>,
    /// Absolute multiplier in the multiplicity tolerance `tol · max(1, ‖Λ‖)`.
    pub tol: f64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            n: 128,
            probe: None,
            tol: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScaleRoot {
    pub rho: f64,
    /// Continued branches vanishing at `rho`.
    pub branches: Vec<usize>,
    pub multiplicity: usize,
    /// Eigenvalues of `Λ` at `rho`, ascending.
    pub eigenvalues: [f64; 3],
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScaleScanResult {
    pub grid: Vec<f64>,
    /// `branches[i][b]`: value of continued branch `b` at `grid[i]`.
    pub branches: Vec<[f64; 3]>,
    /// Ascending eigenvalues at each grid point.
    pub sorted: Vec<[f64; 3]>,
    pub determinants: Vec<f64>,
    pub norms: Vec<f64>,
    pub roots: Vec<ScaleRoot>,
    /// Padded admissible interval, when the scan was built from it.
    pub interval: Option<(f64, f64)>,
    pub params: KernelParams,
    pub warnings: Vec<String>,
}

/// `(0.9 / (e R+), 1.1 / (e R-))` for the geometry with its origin inside.
pub fn padded_interval(multi: &MultiCurve) -> Result<(f64, f64)> {
    let (moved, _) = with_interior_origin(&multi.exterior_boundary())?;
    let r = moved.bounding_radii()?;
    Ok((
        (1.0 - INTERVAL_PADDING) / (E * r.outer),
        (1.0 + INTERVAL_PADDING) / (E * r.inner),
    ))
}

/// Uniform grid of `count` points on `[lo, hi]`.
pub fn uniform_grid(lo: f64, hi: f64, count: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo && count >= 2) {
        return Err(Error::InvalidInput(format!(
            "grid needs 0 < lo < hi and at least 2 points, got {lo}:{hi}:{count}"
        )));
    }
    Ok((0..count)
        .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
        .collect())
}

/// Shared origin for every scale: the input origin when it is inside,
/// otherwise the centroid of the first exterior curve.
fn template(multi: &MultiCurve) -> Result<MultiCurve> {
    Ok(with_interior_origin(multi)?.0)
}

#[derive(Clone, Copy)]
struct Sample {
    eigenvalues: [f64; 3],
    determinant: f64,
    norm: f64,
}

fn sample_at(base: &MultiCurve, params: KernelParams, opts: &ScanOptions, rho: f64) -> Result<Sample> {
    let scaled = base.scale_about_origin(rho)?;
    let probe = opts.probe.map(|p| p * rho);
    let lambda = robin_matrix(&scaled, params, opts.n, probe)?;
    Ok(Sample {
        eigenvalues: lambda.eigenvalues,
        determinant: lambda.determinant,
        norm: lambda.norm(),
    })
}

const PERMUTATIONS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

/// Assigns sorted eigenvalues to branches by matching a prediction. Returns
/// the assignment and whether a competing assignment was nearly as good
/// while giving materially different branches.
fn pair(prediction: &[f64; 3], values: &[f64; 3], tol: f64) -> ([f64; 3], bool) {
    let mut scored: Vec<(f64, [f64; 3])> = PERMUTATIONS
        .iter()
        .map(|perm| {
            let assigned = [values[perm[0]], values[perm[1]], values[perm[2]]];
            let cost: f64 = (0..3).map(|b| (assigned[b] - prediction[b]).powi(2)).sum();
            (cost, assigned)
        })
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (best_cost, best) = scored[0];
    let ambiguous = scored[1..].iter().any(|(cost, other)| {
        let differs = (0..3).any(|b| (other[b] - best[b]).abs() > tol);
        differs && (cost - best_cost) <= 1e-3 * best_cost.max(tol * tol)
    });
    (best, ambiguous)
}

fn predict(branches: &[[f64; 3]], grid: &[f64], rho: f64) -> [f64; 3] {
    let k = branches.len();
    if k < 2 {
        return branches[k - 1];
    }
    let (r0, r1) = (grid[k - 2], grid[k - 1]);
    let s = (rho - r1) / (r1 - r0);
    [0, 1, 2].map(|b| branches[k - 1][b] + s * (branches[k - 1][b] - branches[k - 2][b]))
}

/// Eigenvalues of `Λ(ρΓe)` on a grid, continued into three branches.
pub fn scan_eigenvalues(
    multi: &MultiCurve,
    params: KernelParams,
    grid: &[f64],
    opts: &ScanOptions,
) -> Result<ScaleScanResult> {
    if grid.len() < 2 || grid.windows(2).any(|w| !(w[1] > w[0])) || !(grid[0] > 0.0) {
        return Err(Error::InvalidInput("scale grid must be positive and increasing".into()));
    }
    let base = template(multi)?;
    let samples: Vec<Sample> = grid
        .par_iter()
        .map(|&rho| sample_at(&base, params, opts, rho))
        .collect::<Result<_>>()?;

    let mut rhos = vec![grid[0]];
    let mut out = vec![samples[0].eigenvalues];
    let mut sorted = vec![samples[0].eigenvalues];
    let mut dets = vec![samples[0].determinant];
    let mut norms = vec![samples[0].norm];
    let mut warnings = Vec::new();

    for (i, s) in samples.iter().enumerate().skip(1) {
        // Refine the cell while the pairing is ambiguous.
        let mut pending = vec![(grid[i], *s, 0usize)];
        while let Some((rho, sample, depth)) = pending.pop() {
            let tol = opts.tol * sample.norm.max(1.0);
            let (assigned, ambiguous) = pair(&predict(&out, &rhos, rho), &sample.eigenvalues, tol);
            let last = *rhos.last().unwrap();
            if ambiguous && depth < MAX_REFINE_DEPTH {
                let mid = 0.5 * (last + rho);
                let mid_sample = sample_at(&base, params, opts, mid)?;
                pending.push((rho, sample, depth + 1));
                pending.push((mid, mid_sample, depth + 1));
                continue;
            }
            if ambiguous {
                warnings.push(format!(
                    "ambiguous branch pairing between rho = {last} and {rho} after refinement"
                ));
            }
            rhos.push(rho);
            out.push(assigned);
            sorted.push(sample.eigenvalues);
            dets.push(sample.determinant);
            norms.push(sample.norm);
        }
    }

    Ok(ScaleScanResult {
        grid: rhos,
        branches: out,
        sorted,
        determinants: dets,
        norms,
        roots: Vec::new(),
        interval: None,
        params,
        warnings,
    })
}

/// Eigenvalue of `Λ(ρΓe)` on branch `b`, chosen as the one closest to the
/// linear interpolant of the branch across the cell `[i, i+1]`.
fn branch_value(
    base: &MultiCurve,
    params: KernelParams,
    opts: &ScanOptions,
    scan: &ScaleScanResult,
    i: usize,
    b: usize,
    rho: f64,
) -> Result<f64> {
    let (r0, r1) = (scan.grid[i], scan.grid[i + 1]);
    let s = (rho - r0) / (r1 - r0);
    let guess = scan.branches[i][b] + s * (scan.branches[i + 1][b] - scan.branches[i][b]);
    let ev = sample_at(base, params, opts, rho)?.eigenvalues;
    Ok(*ev
        .iter()
        .min_by(|x, y| (*x - guess).abs().total_cmp(&(*y - guess).abs()))
        .unwrap())
}

/// Root of a branch bracketed by a sign change in cell `i` (Illinois false
/// position with a bisection safeguard).
fn bracketed_root(
    base: &MultiCurve,
    params: KernelParams,
    opts: &ScanOptions,
    scan: &ScaleScanResult,
    i: usize,
    b: usize,
) -> Result<f64> {
    let (mut a, mut c) = (scan.grid[i], scan.grid[i + 1]);
    let (mut fa, mut fc) = (scan.branches[i][b], scan.branches[i + 1][b]);
    let mut side = 0i8;
    for it in 0..80 {
        if (c - a).abs() <= 1e-13 * c.abs() {
            break;
        }
        let mut m = (a * fc - c * fa) / (fc - fa);
        if it % 4 == 3 || !(m > a.min(c) && m < a.max(c)) {
            m = 0.5 * (a + c);
        }
        let fm = branch_value(base, params, opts, scan, i, b, m)?;
        if fm == 0.0 {
            return Ok(m);
        }
        if fm.signum() == fc.signum() {
            c = m;
            fc = fm;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = m;
            fa = fm;
            if side == 1 {
                fc *= 0.5;
            }
            side = 1;
        }
        if fm.abs() < 1e-15 * scan.norms[i].max(1.0) {
            return Ok(m);
        }
    }
    Ok(if fa.abs() < fc.abs() { a } else { c })
}

/// Golden-section minimum of `f` on `[a, b]`.
pub(crate) fn golden_min(mut a: f64, mut b: f64, rel_tol: f64, f: impl Fn(f64) -> Result<f64>) -> Result<(f64, f64)> {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (f(x1)?, f(x2)?);
    while (b - a) > rel_tol * (a.abs() + b.abs()) {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2)?;
        }
    }
    Ok(if f1 < f2 { (x1, f1) } else { (x2, f2) })
}

/// Locates roots on every continued branch of a finished scan and merges
/// coincident ones.
pub fn locate_roots(multi: &MultiCurve, opts: &ScanOptions, scan: &mut ScaleScanResult) -> Result<()> {
    let base = template(multi)?;
    let params = scan.params;
    let mut candidates: Vec<(f64, usize)> = Vec::new();
    let cells = scan.grid.len() - 1;
    for b in 0..3 {
        for i in 0..cells {
            let (f0, f1) = (scan.branches[i][b], scan.branches[i + 1][b]);
            if f0 == 0.0 {
                candidates.push((scan.grid[i], b));
            } else if f0 * f1 < 0.0 {
                candidates.push((bracketed_root(&base, params, opts, scan, i, b)?, b));
            }
        }
        if scan.branches[cells][b] == 0.0 {
            candidates.push((scan.grid[cells], b));
        }
        // Touching zeros: interior local minima of |λ| without a sign change.
        for i in 1..cells {
            let (l, m, r) = (
                scan.branches[i - 1][b],
                scan.branches[i][b],
                scan.branches[i + 1][b],
            );
            if l * m > 0.0 && m * r > 0.0 && m.abs() < l.abs() && m.abs() < r.abs() {
                let cell = |rho: f64| -> Result<f64> {
                    let j = if rho < scan.grid[i] { i - 1 } else { i };
                    Ok(branch_value(&base, params, opts, scan, j, b, rho)?.abs())
                };
                let (rho, v) = golden_min(scan.grid[i - 1], scan.grid[i + 1], 1e-12, cell)?;
                if v < opts.tol * scan.norms[i].max(1.0) {
                    candidates.push((rho, b));
                }
            }
        }
    }
    candidates.sort_by(|x, y| x.0.total_cmp(&y.0));

    let mut roots: Vec<ScaleRoot> = Vec::new();
    for (rho, b) in candidates {
        match roots.last_mut() {
            Some(last) if (rho - last.rho).abs() <= 1e-6 * rho => {
                last.branches.push(b);
                let k = last.branches.len() as f64;
                last.rho += (rho - last.rho) / k;
            }
            _ => roots.push(ScaleRoot {
                rho,
                branches: vec![b],
                multiplicity: 0,
                eigenvalues: [0.0; 3],
            }),
        }
    }
    for root in &mut roots {
        let s = sample_at(&base, params, opts, root.rho)?;
        let tol = opts.tol * s.norm.max(1.0);
        root.eigenvalues = s.eigenvalues;
        root.multiplicity = s.eigenvalues.iter().filter(|v| v.abs() < tol).count();
        root.branches.sort_unstable();
        root.branches.dedup();
    }
    scan.roots = roots;
    Ok(())
}

/// Scan of an arbitrary grid followed by root location.
pub fn find_roots_on_grid(
    multi: &MultiCurve,
    params: KernelParams,
    grid: &[f64],
    opts: &ScanOptions,
) -> Result<ScaleScanResult> {
    let mut scan = scan_eigenvalues(multi, params, grid, opts)?;
    locate_roots(multi, opts, &mut scan)?;
    Ok(scan)
}

/// Degenerate scales inside the padded admissible interval, scanned with
/// `points` uniform grid points.
pub fn find_degenerate_scales(
    multi: &MultiCurve,
    params: KernelParams,
    points: usize,
    opts: &ScanOptions,
) -> Result<ScaleScanResult> {
    let (lo, hi) = padded_interval(multi)?;
    let grid = uniform_grid(lo, hi, points)?;
    let mut scan = find_roots_on_grid(multi, params, &grid, opts)?;
    scan.interval = Some((lo, hi));
    Ok(scan)
}

/// Smallest singular value of the Sobolev-scaled `V` of `ρΓ` (holes
/// included).
pub fn sigma_min_at(multi: &MultiCurve, params: KernelParams, n: usize, rho: f64) -> Result<f64> {
    let base = template(multi)?;
    sigma_min_scaled(&base, params, n, rho)
}

fn sigma_min_scaled(base: &MultiCurve, params: KernelParams, n: usize, rho: f64) -> Result<f64> {
    let scaled = base.scale_about_origin(rho)?;
    let v = SingleLayer::new(&scaled, params, n)?.assemble_v();
    Ok(*v.scaled_singular_values().last().expect("non-empty"))
}

/// `(ρ, σ_min)` over a grid.
pub fn sigma_min_scan(multi: &MultiCurve, params: KernelParams, grid: &[f64], n: usize) -> Result<Vec<(f64, f64)>> {
    let base = template(multi)?;
    grid.par_iter()
        .map(|&rho| Ok((rho, sigma_min_scaled(&base, params, n, rho)?)))
        .collect()
}

/// A local minimum of `σ_min`, refined between grid points.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SigmaDip {
    pub rho: f64,
    pub sigma: f64,
    /// `σ_min` at the dip over the median of the scan.
    pub depth: f64,
}

/// Refines every interior local minimum of a `σ_min` scan and keeps those
/// deeper than `threshold · median`.
pub fn sigma_min_dips(
    multi: &MultiCurve,
    params: KernelParams,
    scan: &[(f64, f64)],
    n: usize,
    threshold: f64,
) -> Result<Vec<SigmaDip>> {
    let base = template(multi)?;
    let mut values: Vec<f64> = scan.iter().map(|s| s.1).collect();
    values.sort_by(|a, b| a.total_cmp(b));
    let median = values[values.len() / 2];
    let mut dips = Vec::new();
    for i in 0..scan.len() {
        let left = if i > 0 { scan[i - 1].1 } else { f64::INFINITY };
        let right = if i + 1 < scan.len() { scan[i + 1].1 } else { f64::INFINITY };
        if !(scan[i].1 <= left && scan[i].1 <= right) {
            continue;
        }
        let lo = if i > 0 { scan[i - 1].0 } else { scan[i].0 };
        let hi = if i + 1 < scan.len() { scan[i + 1].0 } else { scan[i].0 };
        let (rho, sigma) = golden_min(lo, hi, 1e-10, |r| sigma_min_scaled(&base, params, n, r))?;
        if sigma < threshold * median {
            dips.push(SigmaDip {
                rho,
                sigma,
                depth: sigma / median,
            });
        }
    }
    Ok(dips)
}
