//! Nyström discretization of the single-layer trace operator `V`, the
//! moment-constrained bordered system that realizes the minimal-energy
//! extension of a trace pair, and evaluation of the resulting fields.
//!
//! Unknowns are ordered `[q0 (all curves), q1 (all curves)]` and rows
//! `[Dirichlet traces, Neumann traces]`. Within a curve the log-singular
//! kernels use the trigonometric product rule; between curves the plain
//! trapezoidal rule.

use std::f64::consts::TAU;
use std::ops::Range;

use nalgebra::{DMatrix, DVector, LU, Dyn};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{sample, CurveSample, MultiCurve, Vec2};
use crate::kernels::{
    affine, affine_normal, field_kernels, split_trace_kernels, trace_kernels_unchecked,
    CurvePoint, KernelParams,
};
use crate::quadrature::QuadratureRule;

/// Minimum distance, in grid spacings, for off-curve field evaluation.
pub const NEAR_BOUNDARY_SPACINGS: f64 = 5.0;

/// Sampled curves and their quadrature rules.
#[derive(Clone, Debug)]
pub struct Discretization {
    multi: MultiCurve,
    samples: Vec<CurveSample>,
    rules: Vec<QuadratureRule>,
    offsets: Vec<usize>,
}

impl Discretization {
    pub fn new(multi: &MultiCurve, n: usize) -> Result<Self> {
        Self::with_counts(multi, &vec![n; multi.len()])
    }

    /// One node count per curve.
    pub fn with_counts(multi: &MultiCurve, counts: &[usize]) -> Result<Self> {
        if counts.len() != multi.len() {
            return Err(Error::InvalidInput(format!(
                "{} node counts given for {} curves",
                counts.len(),
                multi.len()
            )));
        }
        let mut samples = Vec::with_capacity(counts.len());
        let mut rules = Vec::with_capacity(counts.len());
        let mut offsets = vec![0];
        for (curve, &n) in multi.curves().iter().zip(counts) {
            rules.push(QuadratureRule::new(n)?);
            samples.push(sample(curve, n)?);
            offsets.push(offsets.last().unwrap() + n);
        }
        Ok(Self {
            multi: multi.clone(),
            samples,
            rules,
            offsets,
        })
    }

    pub fn multi(&self) -> &MultiCurve {
        &self.multi
    }

    pub fn samples(&self) -> &[CurveSample] {
        &self.samples
    }

    pub fn total_nodes(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn curve_count(&self) -> usize {
        self.samples.len()
    }

    pub fn curve_range(&self, k: usize) -> Range<usize> {
        self.offsets[k]..self.offsets[k + 1]
    }

    /// Node counts per curve.
    pub fn counts(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.len()).collect()
    }

    /// `(curve, local index)` of a global node index.
    pub fn locate(&self, global: usize) -> (usize, usize) {
        let k = self.offsets.partition_point(|&o| o <= global) - 1;
        (k, global - self.offsets[k])
    }

    fn nodes(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.samples
            .iter()
            .enumerate()
            .flat_map(|(k, s)| (0..s.len()).map(move |i| (k, i)))
    }

    /// Global lists of points, normals and arc-length weights.
    pub fn flat_points(&self) -> Vec<Vec2> {
        self.nodes().map(|(k, i)| self.samples[k].points[i]).collect()
    }

    pub fn flat_normals(&self) -> Vec<Vec2> {
        self.nodes().map(|(k, i)| self.samples[k].normals[i]).collect()
    }

    pub fn flat_weights(&self) -> Vec<f64> {
        self.nodes().map(|(k, i)| self.samples[k].weight(i)).collect()
    }

    fn curve_point(&self, k: usize, i: usize) -> CurvePoint {
        let s = &self.samples[k];
        CurvePoint {
            t: s.t[i],
            point: s.points[i],
            normal: s.normals[i],
            speed: s.speeds[i],
            accel_normal: s.curvatures[i] * s.speeds[i] * s.speeds[i],
        }
    }

    fn curve_point_at(&self, k: usize, t: f64) -> CurvePoint {
        let c = &self.multi.curves()[k];
        CurvePoint {
            t,
            point: c.point(t),
            normal: c.normal(t),
            speed: c.derivative(t).norm(),
            accel_normal: c.second_derivative(t).dot(&c.normal(t)),
        }
    }
}

/// Nodal values of a trace pair `(Dirichlet, Neumann)` on every curve.
#[derive(Clone, Debug, PartialEq)]
pub struct TracePair {
    pub p0: Vec<f64>,
    pub p1: Vec<f64>,
}

impl TracePair {
    /// Samples `f(x, n) = (u(x), ∂n u(x))` at every node.
    pub fn from_fn(disc: &Discretization, f: impl Fn(Vec2, Vec2) -> (f64, f64)) -> Self {
        let (p0, p1) = disc
            .flat_points()
            .into_iter()
            .zip(disc.flat_normals())
            .map(|(x, n)| f(x, n))
            .unzip();
        Self { p0, p1 }
    }

    /// Total trace of the affine function `a · X`.
    pub fn affine(disc: &Discretization, a: [f64; 3]) -> Self {
        Self::from_fn(disc, |x, n| {
            (dot3(&a, &affine(x)), dot3(&a, &affine_normal(n)))
        })
    }

    pub fn len(&self) -> usize {
        self.p0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p0.is_empty()
    }

    fn stacked(&self) -> DVector<f64> {
        DVector::from_iterator(2 * self.len(), self.p0.iter().chain(&self.p1).cloned())
    }

    pub fn max_abs_diff(&self, other: &TracePair) -> f64 {
        self.p0
            .iter()
            .zip(&other.p0)
            .chain(self.p1.iter().zip(&other.p1))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Densities `(q0, q1)` on every curve plus the affine coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteDensity {
    pub q0: Vec<f64>,
    pub q1: Vec<f64>,
    pub affine: [f64; 3],
}

impl DiscreteDensity {
    pub fn zeros(m: usize) -> Self {
        Self {
            q0: vec![0.0; m],
            q1: vec![0.0; m],
            affine: [0.0; 3],
        }
    }

    fn from_stacked(m: usize, v: &DVector<f64>, affine: [f64; 3]) -> Self {
        Self {
            q0: v.rows(0, m).iter().cloned().collect(),
            q1: v.rows(m, m).iter().cloned().collect(),
            affine,
        }
    }

    fn stacked(&self) -> DVector<f64> {
        DVector::from_iterator(2 * self.q0.len(), self.q0.iter().chain(&self.q1).cloned())
    }

    pub fn max_abs(&self) -> f64 {
        self.q0.iter().chain(&self.q1).map(|v| v.abs()).fold(0.0, f64::max)
    }
}

#[inline]
fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// The single-layer operator on a discretized curve set.
#[derive(Clone, Debug)]
pub struct SingleLayer {
    disc: Discretization,
    params: KernelParams,
}

/// Values of a field and its derivatives at a point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FieldValue {
    pub u: f64,
    pub grad: Vec2,
    pub lap: f64,
    pub grad_lap: Vec2,
}

impl SingleLayer {
    pub fn new(multi: &MultiCurve, params: KernelParams, n: usize) -> Result<Self> {
        Ok(Self {
            disc: Discretization::new(multi, n)?,
            params,
        })
    }

    pub fn from_discretization(disc: Discretization, params: KernelParams) -> Self {
        Self { disc, params }
    }

    pub fn discretization(&self) -> &Discretization {
        &self.disc
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn total_nodes(&self) -> usize {
        self.disc.total_nodes()
    }

    /// Row-pair `(Dirichlet, Neumann)` of `V` for a target on curve `k`,
    /// each of length `2M`. `node` is the target's local node index when it
    /// sits on the grid.
    fn trace_rows(&self, k: usize, target: &CurvePoint, node: Option<usize>) -> [Vec<f64>; 2] {
        let m = self.total_nodes();
        let mut rows = [vec![0.0; 2 * m], vec![0.0; 2 * m]];
        let p = &self.params;
        for (l, s) in self.disc.samples.iter().enumerate() {
            let range = self.disc.curve_range(l);
            if l == k {
                let rule = &self.disc.rules[l];
                let h = rule.trapezoid_weight();
                let off_grid = match node {
                    Some(_) => None,
                    None => Some((rule.log_weights(target.t), rule.sin2_log_weights(target.t))),
                };
                for j in 0..s.len() {
                    let source = self.disc.curve_point(l, j);
                    let split = split_trace_kernels(target, &source, p);
                    let (rw, sw) = match (&off_grid, node) {
                        (Some((r, s)), _) => (r[j], s[j]),
                        (None, Some(i)) => (rule.log_weight_at_nodes(i, j), rule.sin2_log_weight_at_nodes(i, j)),
                        (None, None) => unreachable!(),
                    };
                    for a in 0..2 {
                        for b in 0..2 {
                            rows[a][b * m + range.start + j] =
                                source.speed * (sw * split.sin2_log[a][b] + rw * split.log[a][b] + h * split.smooth[a][b]);
                        }
                    }
                }
            } else {
                for j in 0..s.len() {
                    let w = s.weight(j);
                    let kern = trace_kernels_unchecked(target.point - s.points[j], target.normal, s.normals[j], p);
                    for a in 0..2 {
                        for b in 0..2 {
                            rows[a][b * m + range.start + j] = w * kern[a][b];
                        }
                    }
                }
            }
        }
        rows
    }

    /// Dirichlet and Neumann traces of `𝒮q + a·X` at parameter `t` of curve
    /// `k`, valid at and between nodes.
    pub fn trace_at(&self, q: &DiscreteDensity, k: usize, t: f64) -> (f64, f64) {
        let target = self.disc.curve_point_at(k, t);
        let rows = self.trace_rows(k, &target, None);
        let dens = q.stacked();
        let d = rows[0].iter().zip(dens.iter()).map(|(a, b)| a * b).sum::<f64>()
            + dot3(&q.affine, &affine(target.point));
        let n = rows[1].iter().zip(dens.iter()).map(|(a, b)| a * b).sum::<f64>()
            + dot3(&q.affine, &affine_normal(target.normal));
        (d, n)
    }

    /// Applies the discrete `V` plus the affine trace, without assembling.
    pub fn apply_trace(&self, q: &DiscreteDensity) -> TracePair {
        let m = self.total_nodes();
        let dens = q.stacked();
        let (p0, p1) = (0..m)
            .into_par_iter()
            .map(|g| {
                let (k, i) = self.disc.locate(g);
                let target = self.disc.curve_point(k, i);
                let rows = self.trace_rows(k, &target, Some(i));
                let d = rows[0].iter().zip(dens.iter()).map(|(a, b)| a * b).sum::<f64>()
                    + dot3(&q.affine, &affine(target.point));
                let n = rows[1].iter().zip(dens.iter()).map(|(a, b)| a * b).sum::<f64>()
                    + dot3(&q.affine, &affine_normal(target.normal));
                (d, n)
            })
            .unzip();
        TracePair { p0, p1 }
    }

    /// Field `𝒮q + a·X` and its gradient, Laplacian and Laplacian gradient.
    pub fn eval_field(&self, q: &DiscreteDensity, x: Vec2) -> Result<FieldValue> {
        self.check_clearance(x)?;
        Ok(self.eval_field_unchecked(q, x))
    }

    fn check_clearance(&self, x: Vec2) -> Result<()> {
        for (k, s) in self.disc.samples.iter().enumerate() {
            let minimum = NEAR_BOUNDARY_SPACINGS * s.max_spacing();
            let distance = s
                .points
                .iter()
                .map(|y| (x - y).norm())
                .fold(f64::INFINITY, f64::min);
            if distance < minimum {
                return Err(Error::NearBoundary {
                    curve: k,
                    distance,
                    minimum,
                });
            }
        }
        Ok(())
    }

    pub(crate) fn eval_field_unchecked(&self, q: &DiscreteDensity, x: Vec2) -> FieldValue {
        let mut out = FieldValue::default();
        let mut g = 0;
        for s in &self.disc.samples {
            for j in 0..s.len() {
                let w = s.weight(j);
                let (a, b) = (w * q.q0[g], w * q.q1[g]);
                g += 1;
                if a == 0.0 && b == 0.0 {
                    continue;
                }
                let k = field_kernels(x - s.points[j], s.normals[j], &self.params);
                out.u += a * k.value[0] + b * k.value[1];
                out.grad += k.grad[0] * a + k.grad[1] * b;
                out.lap += a * k.lap[0] + b * k.lap[1];
                out.grad_lap += k.grad_lap[0] * a + k.grad_lap[1] * b;
            }
        }
        out.u += dot3(&q.affine, &affine(x));
        out.grad += Vec2::new(q.affine[1], q.affine[2]);
        out
    }

    /// Evaluates the field at many points in parallel.
    pub fn eval_field_many(&self, q: &DiscreteDensity, xs: &[Vec2]) -> Result<Vec<FieldValue>> {
        xs.par_iter().map(|&x| self.eval_field(q, x)).collect()
    }

    /// Quadrature of `∫ q0 X + q1 ∂nX ds` over all curves.
    pub fn moment_vector(&self, q: &DiscreteDensity) -> [f64; 3] {
        let mut out = [0.0; 3];
        let mut g = 0;
        for s in &self.disc.samples {
            for j in 0..s.len() {
                let w = s.weight(j);
                let x = affine(s.points[j]);
                let dn = affine_normal(s.normals[j]);
                for c in 0..3 {
                    out[c] += w * (q.q0[g] * x[c] + q.q1[g] * dn[c]);
                }
                g += 1;
            }
        }
        out
    }

    pub fn assemble_v(&self) -> DiscreteOperatorV {
        let m = self.total_nodes();
        let rows: Vec<[Vec<f64>; 2]> = (0..m)
            .into_par_iter()
            .map(|g| {
                let (k, i) = self.disc.locate(g);
                self.trace_rows(k, &self.disc.curve_point(k, i), Some(i))
            })
            .collect();
        let mut matrix = DMatrix::zeros(2 * m, 2 * m);
        for (g, [dir, neu]) in rows.into_iter().enumerate() {
            for c in 0..2 * m {
                matrix[(g, c)] = dir[c];
                matrix[(m + g, c)] = neu[c];
            }
        }
        DiscreteOperatorV {
            layer: self.clone(),
            matrix,
        }
    }

    /// Total trace of the field of `q` rebuilt from its stacked form.
    pub fn density_from_stacked(&self, v: &[f64], affine: [f64; 3]) -> DiscreteDensity {
        let m = self.total_nodes();
        DiscreteDensity::from_stacked(m, &DVector::from_column_slice(v), affine)
    }
}

/// Assembles the discrete single-layer trace operator.
pub fn assemble_v(multi: &MultiCurve, params: KernelParams, n: usize) -> Result<DiscreteOperatorV> {
    Ok(SingleLayer::new(multi, params, n)?.assemble_v())
}

/// Nyström matrix of `V`: `[[D0, D1], [N0, N1]]`.
#[derive(Clone, Debug)]
pub struct DiscreteOperatorV {
    layer: SingleLayer,
    matrix: DMatrix<f64>,
}

impl DiscreteOperatorV {
    pub fn layer(&self) -> &SingleLayer {
        &self.layer
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn apply(&self, q: &DiscreteDensity) -> TracePair {
        let m = self.layer.total_nodes();
        let p = &self.matrix * q.stacked();
        TracePair {
            p0: p.rows(0, m).iter().cloned().collect(),
            p1: p.rows(m, m).iter().cloned().collect(),
        }
    }

    /// `W V` with `W` the arc-length weights repeated on both trace rows;
    /// symmetric for the continuous operator.
    pub fn weighted(&self) -> DMatrix<f64> {
        let w = self.layer.disc.flat_weights();
        let m = w.len();
        let mut out = self.matrix.clone();
        for r in 0..2 * m {
            out.row_mut(r).scale_mut(w[r % m]);
        }
        out
    }

    /// `‖WV - (WV)ᵀ‖_F / ‖WV‖_F`.
    pub fn relative_asymmetry(&self) -> f64 {
        let wv = self.weighted();
        (&wv - wv.transpose()).norm() / wv.norm()
    }

    /// `V` expressed in orthonormal Fourier coordinates and rescaled so that
    /// it acts between the natural Sobolev scales: Dirichlet rows and `q0`
    /// columns by `((1+m²)/ℓ²)^{3/4}`, Neumann rows and `q1` columns by
    /// `((1+m²)/ℓ²)^{1/4}`, with `ℓ` the mean radius `L/2π` of each curve.
    /// Its singular values stay of order one, whatever the size of each
    /// curve, unless the operator is close to singular.
    pub fn sobolev_scaled(&self) -> DMatrix<f64> {
        SpectralFrame::new(&self.layer.disc).congruence(&self.matrix)
    }

    /// Singular values of the Sobolev-scaled matrix, descending.
    pub fn scaled_singular_values(&self) -> Vec<f64> {
        let mut s: Vec<f64> = self.sobolev_scaled().singular_values().iter().cloned().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        s
    }

    /// Singular values of the raw Nyström matrix, descending.
    pub fn singular_values(&self) -> Vec<f64> {
        let mut s: Vec<f64> = self.matrix.singular_values().iter().cloned().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        s
    }

    pub fn build_bordered(&self) -> Result<BorderedSystem> {
        build_bordered(self)
    }
}

/// Block-diagonal orthonormal Fourier basis `Q` over all curves and both
/// density components, with the Sobolev weights `w` of each column.
struct SpectralFrame {
    basis: DMatrix<f64>,
    weights: DVector<f64>,
}

impl SpectralFrame {
    fn new(disc: &Discretization) -> Self {
        let m = disc.total_nodes();
        let mut basis = DMatrix::zeros(2 * m, 2 * m);
        let mut weights = DVector::zeros(2 * m);
        for k in 0..disc.curve_count() {
            let range = disc.curve_range(k);
            let n = range.len();
            let (q, freq) = fourier_basis(n);
            // Mean radius L/2π makes the weights dimensionless.
            let s = &disc.samples()[k];
            let ell = s.speeds.iter().sum::<f64>() / n as f64;
            for block in 0..2 {
                let off = block * m + range.start;
                basis.view_mut((off, off), (n, n)).copy_from(&q);
                let order = if block == 0 { 0.75 } else { 0.25 };
                for (c, f) in freq.iter().enumerate() {
                    weights[off + c] = ((1.0 + f * f) / (ell * ell)).powf(order);
                }
            }
        }
        Self { basis, weights }
    }

    /// `W Qᵀ A Q W`.
    fn congruence(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = self.basis.transpose() * a * &self.basis;
        scale_rows_cols(&mut out, &self.weights, &self.weights);
        out
    }
}

fn scale_rows_cols(a: &mut DMatrix<f64>, rows: &DVector<f64>, cols: &DVector<f64>) {
    for c in 0..a.ncols() {
        for r in 0..a.nrows() {
            a[(r, c)] *= rows[r] * cols[c];
        }
    }
}

/// Orthonormal real Fourier basis on `n` uniform nodes (columns) and the
/// frequency of each column.
fn fourier_basis(n: usize) -> (DMatrix<f64>, Vec<f64>) {
    let mut q = DMatrix::zeros(n, n);
    let mut freq = vec![0.0; n];
    let a = (1.0 / n as f64).sqrt();
    let b = (2.0 / n as f64).sqrt();
    for i in 0..n {
        let t = TAU * i as f64 / n as f64;
        q[(i, 0)] = a;
        for f in 1..n / 2 {
            q[(i, 2 * f - 1)] = b * (f as f64 * t).cos();
            q[(i, 2 * f)] = b * (f as f64 * t).sin();
        }
        q[(i, n - 1)] = a * if i % 2 == 0 { 1.0 } else { -1.0 };
    }
    for f in 1..n / 2 {
        freq[2 * f - 1] = f as f64;
        freq[2 * f] = f as f64;
    }
    freq[n - 1] = (n / 2) as f64;
    (q, freq)
}

/// `[[V, X], [M, 0]]`: single-layer traces plus affine traces, closed by the
/// vanishing of the moment vector. Square of size `2M + 3`.
///
/// The system is factorized in Sobolev-scaled Fourier coordinates (see
/// [`DiscreteOperatorV::sobolev_scaled`]) with unit-norm border rows and
/// columns; in nodal coordinates the `q0` block alone has condition `O(N³)`.
#[derive(Clone, Debug)]
pub struct BorderedSystem {
    layer: SingleLayer,
    matrix: DMatrix<f64>,
    scaled: DMatrix<f64>,
    basis: DMatrix<f64>,
    weights: DVector<f64>,
    border_cols: [f64; 3],
    lu: LU<f64, Dyn, Dyn>,
}

pub fn build_bordered(v: &DiscreteOperatorV) -> Result<BorderedSystem> {
    let layer = v.layer.clone();
    let m = layer.total_nodes();
    let size = 2 * m + 3;
    let mut matrix = DMatrix::zeros(size, size);
    matrix.view_mut((0, 0), (2 * m, 2 * m)).copy_from(&v.matrix);
    let points = layer.disc.flat_points();
    let normals = layer.disc.flat_normals();
    let weights = layer.disc.flat_weights();
    for g in 0..m {
        let x = affine(points[g]);
        let dn = affine_normal(normals[g]);
        for c in 0..3 {
            matrix[(g, 2 * m + c)] = x[c];
            matrix[(m + g, 2 * m + c)] = dn[c];
            matrix[(2 * m + c, g)] = weights[g] * x[c];
            matrix[(2 * m + c, m + g)] = weights[g] * dn[c];
        }
    }

    let frame = SpectralFrame::new(&layer.disc);
    let mut scaled = DMatrix::zeros(size, size);
    scaled
        .view_mut((0, 0), (2 * m, 2 * m))
        .copy_from(&frame.congruence(&v.matrix));
    let mut cols = frame.basis.transpose() * matrix.view((0, 2 * m), (2 * m, 3));
    let mut rows = matrix.view((2 * m, 0), (3, 2 * m)) * &frame.basis;
    let mut border_cols = [0.0; 3];
    for c in 0..3 {
        for r in 0..2 * m {
            cols[(r, c)] *= frame.weights[r];
            rows[(c, r)] *= frame.weights[r];
        }
        border_cols[c] = cols.column(c).norm();
        let row_norm = rows.row(c).norm();
        if border_cols[c] == 0.0 || row_norm == 0.0 {
            return Err(Error::SingularBordered { rcond: 0.0 });
        }
        cols.column_mut(c).unscale_mut(border_cols[c]);
        rows.row_mut(c).unscale_mut(row_norm);
    }
    scaled.view_mut((0, 2 * m), (2 * m, 3)).copy_from(&cols);
    scaled.view_mut((2 * m, 0), (3, 2 * m)).copy_from(&rows);

    let lu = scaled.clone().lu();
    if !lu.is_invertible() {
        return Err(Error::SingularBordered { rcond: 0.0 });
    }
    Ok(BorderedSystem {
        layer,
        matrix,
        scaled,
        basis: frame.basis,
        weights: frame.weights,
        border_cols,
        lu,
    })
}

impl BorderedSystem {
    pub fn layer(&self) -> &SingleLayer {
        &self.layer
    }

    /// The bordered matrix in nodal coordinates.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// `σ_min / σ_max` of the matrix that is actually factorized.
    pub fn reciprocal_condition(&self) -> f64 {
        let s = self.scaled.singular_values();
        s.min() / s.max()
    }

    /// Solves `V q + γ(a·X) = p`, `A(q) = 0`; the field `𝒮q + a·X` is the
    /// minimal-energy extension of `p`.
    pub fn solve_trace(&self, p: &TracePair) -> Result<DiscreteDensity> {
        let m = self.layer.total_nodes();
        if p.len() != m {
            return Err(Error::InvalidInput(format!(
                "trace has {} nodes, system has {m}",
                p.len()
            )));
        }
        let mut rhs = DVector::zeros(2 * m + 3);
        let projected = self.basis.tr_mul(&p.stacked()).component_mul(&self.weights);
        rhs.rows_mut(0, 2 * m).copy_from(&projected);
        let sol = self
            .lu
            .solve(&rhs)
            .ok_or_else(|| Error::LinearAlgebra("bordered solve failed".into()))?;
        let q = &self.basis * sol.rows(0, 2 * m).component_mul(&self.weights);
        let affine = [0, 1, 2].map(|c| sol[2 * m + c] / self.border_cols[c]);
        Ok(DiscreteDensity::from_stacked(m, &q, affine))
    }
}

/// Condition number above which `V` is treated as singular.
pub const DEGENERATE_CONDITION: f64 = 1e12;

/// Solves `V q = p` directly (no affine part).
pub fn solve_v(v: &DiscreteOperatorV, p: &TracePair) -> Result<DiscreteDensity> {
    let m = v.layer.total_nodes();
    if p.len() != m {
        return Err(Error::InvalidInput(format!(
            "trace has {} nodes, operator has {m}",
            p.len()
        )));
    }
    let s = v.scaled_singular_values();
    let condition = s[0] / s[s.len() - 1];
    if !(condition < DEGENERATE_CONDITION) {
        return Err(Error::DegenerateScale { condition });
    }
    let sol = v
        .matrix
        .clone()
        .lu()
        .solve(&p.stacked())
        .ok_or_else(|| Error::LinearAlgebra("LU solve of V failed".into()))?;
    Ok(DiscreteDensity::from_stacked(m, &sol, [0.0; 3]))
}

/// Coefficients of the far-field expansion
/// `A·G + B ω0 + C (x1²-x2²)/|x|² + D x1x2/|x|² + O(1/|x|)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FarFieldExpansion {
    pub a: [f64; 3],
    pub b: f64,
    pub c: f64,
    pub d: f64,
    /// RMS residual of the fit relative to the RMS field value.
    pub relative_residual: f64,
}

/// Least-squares fit of the far-field expansion of `𝒮q` (the affine part of
/// `q` is ignored) from samples on origin-centred circles.
///
/// Four `O(1/|x|)` harmonics are fitted alongside as nuisance terms.
pub fn far_field_fit(layer: &SingleLayer, q: &DiscreteDensity, radii: &[f64]) -> Result<FarFieldExpansion> {
    if radii.len() < 3 {
        return Err(Error::InvalidInput("far-field fit needs at least 3 radii".into()));
    }
    let outer = layer.disc.multi().bounding_radii()?.outer;
    if let Some(r) = radii.iter().find(|&&r| r < 4.0 * outer) {
        return Err(Error::InvalidInput(format!(
            "far-field radius {r} is below 4 R+ = {}",
            4.0 * outer
        )));
    }
    let per_circle = 64;
    let p = layer.params;
    let bare = DiscreteDensity {
        affine: [0.0; 3],
        ..q.clone()
    };
    let points: Vec<Vec2> = radii
        .iter()
        .flat_map(|&r| crate::geometry::circle_points(r, per_circle))
        .collect();
    let values: Vec<f64> = points
        .par_iter()
        .map(|&x| layer.eval_field_unchecked(&bare, x).u)
        .collect();
    let cols = 10;
    let mut a = DMatrix::zeros(points.len(), cols);
    for (i, x) in points.iter().enumerate() {
        let r2 = x.norm_squared();
        let row = [
            crate::kernels::g0(*x, &p),
            crate::kernels::g(*x, 1, &p)?,
            crate::kernels::g(*x, 2, &p)?,
            crate::kernels::omega(*x, 0, &p)?,
            (x.x * x.x - x.y * x.y) / r2,
            x.x * x.y / r2,
            x.x / r2,
            x.y / r2,
            (x.x * x.x * x.x - 3.0 * x.x * x.y * x.y) / (r2 * r2),
            (3.0 * x.x * x.x * x.y - x.y * x.y * x.y) / (r2 * r2),
        ];
        for (c, v) in row.iter().enumerate() {
            a[(i, c)] = *v;
        }
    }
    let norms: Vec<f64> = (0..cols).map(|c| a.column(c).norm()).collect();
    for c in 0..cols {
        if norms[c] == 0.0 {
            return Err(Error::FitFailure(format!("basis column {c} vanishes")));
        }
        a.column_mut(c).unscale_mut(norms[c]);
    }
    let b = DVector::from_vec(values);
    let svd = a.clone().svd(true, true);
    let (smax, smin) = (svd.singular_values.max(), svd.singular_values.min());
    if !(smin > 1e-13 * smax) {
        return Err(Error::FitFailure(format!(
            "basis is ill-conditioned (σ ratio {:e})",
            smin / smax
        )));
    }
    let coef = svd
        .solve(&b, 0.0)
        .map_err(|e| Error::FitFailure(e.to_string()))?;
    let residual = (&a * &coef - &b).norm();
    let scaled: Vec<f64> = (0..cols).map(|c| coef[c] / norms[c]).collect();
    Ok(FarFieldExpansion {
        a: [scaled[0], scaled[1], scaled[2]],
        b: scaled[3],
        c: scaled[4],
        d: scaled[5],
        relative_residual: residual / b.norm().max(f64::MIN_POSITIVE),
    })
}

/// Sample points `t_i + π/N` halfway between the nodes of each curve.
pub fn midpoint_parameters(disc: &Discretization) -> Vec<(usize, f64)> {
    disc.samples
        .iter()
        .enumerate()
        .flat_map(|(k, s)| {
            let h = TAU / s.len() as f64;
            s.t.iter().map(move |&t| (k, t + 0.5 * h))
        })
        .collect()
}

/// Trigonometric interpolation of nodal values on one curve at parameter `t`.
pub fn trig_interpolate(values: &[f64], t: f64) -> f64 {
    let n = values.len();
    let half = n / 2;
    let mut out = 0.0;
    for (j, v) in values.iter().enumerate() {
        let tj = TAU * j as f64 / n as f64;
        // Dirichlet-type cardinal function for an even number of nodes.
        let d = t - tj;
        let mut k = 0.5;
        for m in 1..half {
            k += (m as f64 * d).cos();
        }
        k += 0.5 * (half as f64 * d).cos();
        out += v * k * 2.0 / n as f64;
    }
    out
}
