//! The Robin matrix `Λ = ([G_j, γG_k])` of the exterior boundary, computed by
//! transferring the bracket to a probe circle, together with its
//! classification, the sufficient definiteness criteria and the
//! reconstruction `𝒮†` of the single-layer potential with prescribed trace.

use std::f64::consts::{E, TAU};

use nalgebra::Matrix3;
use rayon::prelude::*;

use crate::assembly::{
    midpoint_parameters, trig_interpolate, BorderedSystem, DiscreteDensity, SingleLayer, TracePair,
    NEAR_BOUNDARY_SPACINGS,
};
use crate::error::{Error, Result};
use crate::geometry::{circle_points, MultiCurve, Vec2};
use crate::kernels::{g, grad_g, grad_omega, omega, KernelParams};

/// Trapezoid nodes on the probe circle.
pub const PROBE_NODES: usize = 256;

/// Default relative tolerance for calling `Λ` singular.
pub const DEFAULT_CLASSIFY_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Definiteness {
    Positive,
    Negative,
    Indefinite,
    Singular,
}

impl Definiteness {
    pub fn as_str(&self) -> &'static str {
        match self {
            Definiteness::Positive => "positive",
            Definiteness::Negative => "negative",
            Definiteness::Indefinite => "indefinite",
            Definiteness::Singular => "singular",
        }
    }
}

/// Singular when `min |λ| < tol · max(1, max |λ|)`; otherwise by sign pattern.
pub fn classify_eigenvalues(eigenvalues: &[f64; 3], tol: f64) -> Definiteness {
    let largest = eigenvalues.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let smallest = eigenvalues.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
    if smallest < tol * largest.max(1.0) {
        Definiteness::Singular
    } else if eigenvalues.iter().all(|&v| v > 0.0) {
        Definiteness::Positive
    } else if eigenvalues.iter().all(|&v| v < 0.0) {
        Definiteness::Negative
    } else {
        Definiteness::Indefinite
    }
}

/// Ascending eigenvalues of a symmetric 3×3 matrix.
pub fn sorted_eigenvalues(m: &Matrix3<f64>) -> [f64; 3] {
    let e = m.symmetric_eigenvalues();
    let mut v = [e[0], e[1], e[2]];
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

#[derive(Clone, Debug, PartialEq)]
pub struct RobinMatrix {
    /// `(Λ + Λᵀ) / 2`.
    pub matrix: Matrix3<f64>,
    /// `‖Λ - Λᵀ‖_F` of the computed matrix.
    pub asymmetry: f64,
    pub eigenvalues: [f64; 3],
    pub determinant: f64,
    pub class: Definiteness,
    pub probe_radius: f64,
    pub n: usize,
    /// Translation applied to the geometry before computing.
    pub shift: Vec2,
    /// Indices of the exterior-boundary curves in the input.
    pub exterior: Vec<usize>,
}

impl RobinMatrix {
    /// Frobenius norm of the symmetrized matrix.
    pub fn norm(&self) -> f64 {
        self.matrix.norm()
    }

    pub fn relative_asymmetry(&self) -> f64 {
        self.asymmetry / self.norm().max(f64::MIN_POSITIVE)
    }

    pub fn reclassify(&mut self, tol: f64) {
        self.class = classify_eigenvalues(&self.eigenvalues, tol);
    }
}

/// Translates `multi` so that the origin lies inside it, if it does not.
/// Returns the shifted geometry and the shift.
pub fn with_interior_origin(multi: &MultiCurve) -> Result<(MultiCurve, Vec2)> {
    if multi.origin_inside() {
        return Ok((multi.clone(), Vec2::zeros()));
    }
    let moved = multi.normalized()?;
    let shift = moved.curves()[0].center() - multi.curves()[0].center();
    Ok((moved, shift))
}

/// Probe-circle machinery for one exterior boundary and one discretization.
#[derive(Clone, Debug)]
pub struct RobinContext {
    system: BorderedSystem,
    probe_radius: f64,
    shift: Vec2,
    exterior: Vec<usize>,
    n: usize,
}

impl RobinContext {
    /// Restricts `multi` to its exterior boundary, moves the origin inside
    /// if needed and factorizes the bordered system. The probe radius
    /// defaults to `2 max(R+, κ0)`, enlarged when the nodes are coarse.
    pub fn new(multi: &MultiCurve, params: KernelParams, n: usize, probe: Option<f64>) -> Result<Self> {
        let exterior = multi.exterior_indices();
        let (gamma_e, shift) = with_interior_origin(&multi.exterior_boundary())?;
        let radii = gamma_e.bounding_radii()?;
        let layer = SingleLayer::new(&gamma_e, params, n)?;
        let spacing = layer
            .discretization()
            .samples()
            .iter()
            .map(|s| s.max_spacing())
            .fold(0.0, f64::max);
        let probe_radius = probe.unwrap_or_else(|| {
            (2.0 * radii.outer.max(params.kappa0()))
                .max(radii.outer + 2.0 * NEAR_BOUNDARY_SPACINGS * spacing)
        });
        if !(probe_radius > radii.outer + NEAR_BOUNDARY_SPACINGS * spacing) {
            return Err(Error::Geometry(format!(
                "probe radius {probe_radius} does not clear the curves (R+ = {})",
                radii.outer
            )));
        }
        let system = layer.assemble_v().build_bordered()?;
        Ok(Self {
            system,
            probe_radius,
            shift,
            exterior,
            n,
        })
    }

    pub fn system(&self) -> &BorderedSystem {
        &self.system
    }

    pub fn layer(&self) -> &SingleLayer {
        self.system.layer()
    }

    pub fn probe_radius(&self) -> f64 {
        self.probe_radius
    }

    pub fn shift(&self) -> Vec2 {
        self.shift
    }

    /// Total trace of `G_k` on the (shifted) exterior boundary.
    pub fn trace_of_g(&self, k: usize) -> TracePair {
        let p = *self.layer().params();
        TracePair::from_fn(self.layer().discretization(), |x, n| {
            (
                g(x, k, &p).expect("origin is interior"),
                grad_g(x, k, &p).expect("origin is interior").dot(&n),
            )
        })
    }

    /// `[G_j, p]` for `j = 0, 1, 2`, with `p` given on the exterior-boundary
    /// nodes.
    pub fn bracket_vector(&self, p: &TracePair) -> Result<[f64; 3]> {
        let q = self.system.solve_trace(p)?;
        self.bracket_of_extension(&q)
    }

    /// The bracket of the field `𝒮q + a·X`, read on the probe circle.
    pub fn bracket_of_extension(&self, q: &DiscreteDensity) -> Result<[f64; 3]> {
        let r = self.probe_radius;
        let params = *self.layer().params();
        let w = TAU * r / PROBE_NODES as f64;
        let points = circle_points(r, PROBE_NODES);
        let fields = self.layer().eval_field_many(q, &points)?;
        let mut out = [0.0; 3];
        for (j, slot) in out.iter_mut().enumerate() {
            let terms: Vec<f64> = points
                .par_iter()
                .zip(&fields)
                .map(|(&x, f)| -> Result<f64> {
                    let n = -x / r;
                    Ok(-grad_omega(x, j, &params)?.dot(&n) * f.u
                        + omega(x, j, &params)? * f.grad.dot(&n)
                        - grad_g(x, j, &params)?.dot(&n) * f.lap
                        + g(x, j, &params)? * f.grad_lap.dot(&n))
                })
                .collect::<Result<_>>()?;
            *slot = w * terms.iter().sum::<f64>();
        }
        Ok(out)
    }

    /// Extensions `𝖲γG_k` (as densities) for `k = 0, 1, 2`.
    pub fn extensions_of_g(&self) -> Result<Vec<DiscreteDensity>> {
        (0..3)
            .into_par_iter()
            .map(|k| self.system.solve_trace(&self.trace_of_g(k)))
            .collect()
    }

    pub fn robin_matrix(&self) -> Result<RobinMatrix> {
        let columns: Vec<[f64; 3]> = self
            .extensions_of_g()?
            .iter()
            .map(|q| self.bracket_of_extension(q))
            .collect::<Result<_>>()?;
        let raw = Matrix3::from_fn(|j, k| columns[k][j]);
        let matrix = (raw + raw.transpose()) * 0.5;
        let eigenvalues = sorted_eigenvalues(&matrix);
        Ok(RobinMatrix {
            matrix,
            asymmetry: (raw - raw.transpose()).norm(),
            eigenvalues,
            determinant: matrix.determinant(),
            class: classify_eigenvalues(&eigenvalues, DEFAULT_CLASSIFY_TOL),
            probe_radius: self.probe_radius,
            n: self.n,
            shift: self.shift,
            exterior: self.exterior.clone(),
        })
    }
}

/// Robin matrix of the exterior boundary of `multi`.
pub fn robin_matrix(multi: &MultiCurve, params: KernelParams, n: usize, probe: Option<f64>) -> Result<RobinMatrix> {
    RobinContext::new(multi, params, n, probe)?.robin_matrix()
}

/// Prediction of the sufficient criteria on `(κ0, κ1)` and the bounding radii.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Prediction {
    PositiveDefinite,
    NegativeDefinite,
    Inconclusive,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CriteriaReport {
    pub prediction: Prediction,
    pub inner_radius: f64,
    pub outer_radius: f64,
    pub computed: Option<Definiteness>,
}

impl CriteriaReport {
    /// False only when a definite prediction is contradicted by `computed`.
    pub fn consistent(&self) -> bool {
        match (self.prediction, self.computed) {
            (Prediction::PositiveDefinite, Some(c)) => c == Definiteness::Positive,
            (Prediction::NegativeDefinite, Some(c)) => c == Definiteness::Negative,
            _ => true,
        }
    }
}

/// `κ0 > e R+` and `κ1 > (κ0/e)²` predict a positive definite `Λ`;
/// `κ0 < e R-` and `κ1 < (κ0/e)²` a negative definite one. Radii are taken
/// about the origin after moving it inside if necessary.
pub fn check_criteria(multi: &MultiCurve, params: &KernelParams) -> Result<CriteriaReport> {
    let (moved, _) = with_interior_origin(&multi.exterior_boundary())?;
    let radii = moved.bounding_radii()?;
    let (k0, k1) = (params.kappa0(), params.kappa1());
    let threshold = (k0 / E).powi(2);
    let prediction = if k0 > E * radii.outer && k1 > threshold {
        Prediction::PositiveDefinite
    } else if k0 < E * radii.inner && k1 < threshold {
        Prediction::NegativeDefinite
    } else {
        Prediction::Inconclusive
    };
    Ok(CriteriaReport {
        prediction,
        inner_radius: radii.inner,
        outer_radius: radii.outer,
        computed: None,
    })
}

/// The potential `𝒮†p` built from minimal-energy extensions and `Λ`.
///
/// Inside the region enclosed by `Γe` it equals `𝖲_Γ p`; outside it adds
/// `c · (G - 𝖲_{Γe} γG)` with `c = Λ⁻¹ [G, p_e]`.
#[derive(Clone, Debug)]
pub struct SDagger {
    full: SingleLayer,
    extension: DiscreteDensity,
    exterior_layer: SingleLayer,
    g_extensions: Vec<DiscreteDensity>,
    coefficients: [f64; 3],
    shift: Vec2,
    bracket: [f64; 3],
}

impl SDagger {
    /// `p` is given on the nodes of every curve of `multi` (holes included),
    /// discretized with `n` nodes per curve.
    pub fn new(multi: &MultiCurve, params: KernelParams, n: usize, p: &TracePair) -> Result<Self> {
        let ctx = RobinContext::new(multi, params, n, None)?;
        let lambda = ctx.robin_matrix()?;
        if lambda.class == Definiteness::Singular {
            let condition = lambda.eigenvalues.iter().map(|v| v.abs()).fold(0.0, f64::max)
                / lambda.eigenvalues.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
            return Err(Error::DegenerateScale { condition });
        }
        let shift = ctx.shift();
        let full_multi = multi.translated(shift);
        let full = SingleLayer::new(&full_multi, params, n)?;
        if p.len() != full.total_nodes() {
            return Err(Error::InvalidInput(format!(
                "trace has {} nodes, geometry has {}",
                p.len(),
                full.total_nodes()
            )));
        }
        let extension = full.assemble_v().build_bordered()?.solve_trace(p)?;

        let p_e = restrict_to_exterior(&full, multi, p);
        let bracket = ctx.bracket_vector(&p_e)?;
        let inv = lambda
            .matrix
            .try_inverse()
            .ok_or(Error::DegenerateScale { condition: f64::INFINITY })?;
        let c = inv * nalgebra::Vector3::from(bracket);
        Ok(Self {
            full,
            extension,
            exterior_layer: ctx.layer().clone(),
            g_extensions: ctx.extensions_of_g()?,
            coefficients: [c[0], c[1], c[2]],
            shift,
            bracket,
        })
    }

    /// `Λ⁻¹ [G, p_e]`.
    pub fn coefficients(&self) -> [f64; 3] {
        self.coefficients
    }

    pub fn bracket(&self) -> [f64; 3] {
        self.bracket
    }

    /// Translation between input coordinates and the working frame.
    pub fn shift(&self) -> Vec2 {
        self.shift
    }

    pub fn full_layer(&self) -> &SingleLayer {
        &self.full
    }

    /// `𝒮†p` at a point given in input coordinates.
    pub fn value(&self, x: Vec2) -> Result<f64> {
        let y = x + self.shift;
        let mut u = self.full.eval_field(&self.extension, y)?.u;
        if !self.exterior_layer.discretization().multi().contains(y) {
            for k in 0..3 {
                let gk = g(y, k, self.full.params())?;
                let sk = self.exterior_layer.eval_field(&self.g_extensions[k], y)?.u;
                u += self.coefficients[k] * (gk - sk);
            }
        }
        Ok(u)
    }

    /// Traces of `𝒮†p` at parameter `t` of curve `k` of the full geometry,
    /// taken from the exterior side.
    pub fn trace_at(&self, k: usize, t: f64) -> (f64, f64) {
        let (mut d, mut n) = self.full.trace_at(&self.extension, k, t);
        let multi = self.full.discretization().multi();
        if multi.is_exterior(k) {
            let local = multi.exterior_indices().iter().position(|&i| i == k).expect("exterior curve");
            let curve = &multi.curves()[k];
            let (x, nx) = (curve.point(t), curve.normal(t));
            let params = self.full.params();
            for j in 0..3 {
                let (sd, sn) = self.exterior_layer.trace_at(&self.g_extensions[j], local, t);
                let gd = g(x, j, params).expect("origin is interior");
                let gn = grad_g(x, j, params).expect("origin is interior").dot(&nx);
                d += self.coefficients[j] * (gd - sd);
                n += self.coefficients[j] * (gn - sn);
            }
        }
        (d, n)
    }
}

fn restrict_to_exterior(full: &SingleLayer, multi: &MultiCurve, p: &TracePair) -> TracePair {
    let disc = full.discretization();
    let mut out = TracePair {
        p0: Vec::new(),
        p1: Vec::new(),
    };
    for k in multi.exterior_indices() {
        let r = disc.curve_range(k);
        out.p0.extend_from_slice(&p.p0[r.clone()]);
        out.p1.extend_from_slice(&p.p1[r]);
    }
    out
}

/// `max |γ(𝒮†p) - p|` over the midpoints between nodes, with `p` extended
/// off the nodes by trigonometric interpolation.
pub fn sdagger_trace_residual(multi: &MultiCurve, params: KernelParams, n: usize, p: &TracePair) -> Result<f64> {
    let sd = SDagger::new(multi, params, n, p)?;
    let disc = sd.full_layer().discretization();
    let residual = midpoint_parameters(disc)
        .into_par_iter()
        .map(|(k, t)| {
            let r = disc.curve_range(k);
            let e0 = trig_interpolate(&p.p0[r.clone()], t);
            let e1 = trig_interpolate(&p.p1[r], t);
            let (d, nn) = sd.trace_at(k, t);
            (d - e0).abs().max((nn - e1).abs())
        })
        .reduce(|| 0.0, f64::max);
    Ok(residual)
}

#[cfg(test)]
mod tests;
