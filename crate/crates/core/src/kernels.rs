//! The biharmonic fundamental solution
//! `G0(x) = (|x|² ln(|x|/κ0) + κ1) / 8π`, the companion functions `G1`, `G2`,
//! their Laplacians `ω0`, `ω1`, `ω2`, and the trace kernels of the
//! single-layer operator in direct and log-split form.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::Vec2;

const EIGHT_PI: f64 = 8.0 * PI;
const TWO_PI: f64 = 2.0 * PI;

/// Normalization `(κ0, κ1)` of the fundamental solution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelParams {
    kappa0: f64,
    kappa1: f64,
}

impl KernelParams {
    pub fn new(kappa0: f64, kappa1: f64) -> Result<Self> {
        if !(kappa0 > 0.0 && kappa0.is_finite()) {
            return Err(Error::InvalidInput(format!("kappa0 must be positive, got {kappa0}")));
        }
        if !kappa1.is_finite() {
            return Err(Error::InvalidInput("kappa1 must be finite".into()));
        }
        Ok(Self { kappa0, kappa1 })
    }

    pub fn kappa0(&self) -> f64 {
        self.kappa0
    }

    pub fn kappa1(&self) -> f64 {
        self.kappa1
    }

    #[inline]
    fn log_ratio(&self, r: f64) -> f64 {
        (r / self.kappa0).ln()
    }
}

impl Default for KernelParams {
    /// `κ0 = 1`, `κ1 = 0`.
    fn default() -> Self {
        Self {
            kappa0: 1.0,
            kappa1: 0.0,
        }
    }
}

/// The affine basis `X = (1, x1, x2)`.
#[inline]
pub fn affine(x: Vec2) -> [f64; 3] {
    [1.0, x.x, x.y]
}

/// Normal derivative `∂nX = (0, n1, n2)`.
#[inline]
pub fn affine_normal(n: Vec2) -> [f64; 3] {
    [0.0, n.x, n.y]
}

fn nonzero(x: Vec2) -> Result<f64> {
    let r = x.norm();
    if r > 0.0 {
        Ok(r)
    } else {
        Err(Error::SingularEvaluation)
    }
}

/// `G0(x)`, continuously extended by `κ1/8π` at the origin.
pub fn g0(x: Vec2, p: &KernelParams) -> f64 {
    g0_flagged(x, p).0
}

/// `G0(x)` with a flag raised when `x = 0`, where derivatives are singular.
pub fn g0_flagged(x: Vec2, p: &KernelParams) -> (f64, bool) {
    let r2 = x.norm_squared();
    if r2 == 0.0 {
        return (p.kappa1 / EIGHT_PI, true);
    }
    ((r2 * p.log_ratio(r2.sqrt()) + p.kappa1) / EIGHT_PI, false)
}

/// `G_j = -∂G0/∂x_j` for `j = 1, 2`; `G_0` for `j = 0`.
pub fn g(x: Vec2, j: usize, p: &KernelParams) -> Result<f64> {
    let r = nonzero(x)?;
    Ok(g_unchecked(x, r, j, p))
}

#[inline]
fn g_unchecked(x: Vec2, r: f64, j: usize, p: &KernelParams) -> f64 {
    let l = p.log_ratio(r);
    match j {
        0 => (r * r * l + p.kappa1) / EIGHT_PI,
        1 => -x.x * (2.0 * l + 1.0) / EIGHT_PI,
        2 => -x.y * (2.0 * l + 1.0) / EIGHT_PI,
        _ => panic!("kernel index {j} out of range"),
    }
}

/// Gradient of `G_j`.
pub fn grad_g(x: Vec2, j: usize, p: &KernelParams) -> Result<Vec2> {
    let r = nonzero(x)?;
    let l = p.log_ratio(r);
    let grad0 = x * (2.0 * l + 1.0) / EIGHT_PI;
    Ok(match j {
        0 => grad0,
        1 | 2 => {
            // -Hess(G0) e_j
            let e = if j == 1 { Vec2::x() } else { Vec2::y() };
            -(e * (2.0 * l + 1.0) + x * (2.0 * x.dot(&e) / (r * r))) / EIGHT_PI
        }
        _ => panic!("kernel index {j} out of range"),
    })
}

/// `ω_j = ΔG_j`.
pub fn omega(x: Vec2, j: usize, p: &KernelParams) -> Result<f64> {
    let r = nonzero(x)?;
    Ok(match j {
        0 => (p.log_ratio(r) + 1.0) / TWO_PI,
        1 => -x.x / (TWO_PI * r * r),
        2 => -x.y / (TWO_PI * r * r),
        _ => panic!("kernel index {j} out of range"),
    })
}

/// Gradient of `ω_j`.
pub fn grad_omega(x: Vec2, j: usize, _p: &KernelParams) -> Result<Vec2> {
    let r = nonzero(x)?;
    let r2 = r * r;
    Ok(match j {
        0 => x / (TWO_PI * r2),
        1 | 2 => {
            let e = if j == 1 { Vec2::x() } else { Vec2::y() };
            -(e / r2 - x * (2.0 * x.dot(&e) / (r2 * r2))) / TWO_PI
        }
        _ => panic!("kernel index {j} out of range"),
    })
}

/// Kernels of the field `u(x) = ∫ G0(x-y) q0 + ∂n(y) G0(x-y) q1 ds(y)` and of
/// its derivatives, for a single source point. Index 0 multiplies `q0`,
/// index 1 multiplies `q1`.
#[derive(Clone, Copy, Debug)]
pub struct FieldKernels {
    pub value: [f64; 2],
    pub grad: [Vec2; 2],
    pub lap: [f64; 2],
    pub grad_lap: [Vec2; 2],
}

/// Field kernels at offset `d = x - y` for a source with unit normal `ny`.
#[inline]
pub fn field_kernels(d: Vec2, ny: Vec2, p: &KernelParams) -> FieldKernels {
    let r2 = d.norm_squared();
    let l = 0.5 * r2.ln() - p.kappa0.ln();
    let c = 2.0 * l + 1.0;
    let dn = d.dot(&ny);
    FieldKernels {
        value: [(r2 * l + p.kappa1) / EIGHT_PI, -dn * c / EIGHT_PI],
        grad: [
            d * (c / EIGHT_PI),
            -(ny * c + d * (2.0 * dn / r2)) / EIGHT_PI,
        ],
        lap: [(l + 1.0) / TWO_PI, -dn / (TWO_PI * r2)],
        grad_lap: [
            d / (TWO_PI * r2),
            -(ny / r2 - d * (2.0 * dn / (r2 * r2))) / TWO_PI,
        ],
    }
}

/// Direct trace kernels `[[K_D0, K_D1], [K_N0, K_N1]]` between a target
/// `(x, nx)` and a source `(y, ny)`:
/// `G0(x-y)`, `∂n(y) G0`, `∂n(x) G0`, `∂n(x) ∂n(y) G0`.
pub fn trace_kernels(x: Vec2, y: Vec2, nx: Vec2, ny: Vec2, p: &KernelParams) -> Result<[[f64; 2]; 2]> {
    let d = x - y;
    nonzero(d)?;
    Ok(trace_kernels_unchecked(d, nx, ny, p))
}

#[inline]
pub(crate) fn trace_kernels_unchecked(d: Vec2, nx: Vec2, ny: Vec2, p: &KernelParams) -> [[f64; 2]; 2] {
    let r2 = d.norm_squared();
    let l = 0.5 * r2.ln() - p.kappa0.ln();
    let c = 2.0 * l + 1.0;
    let (dnx, dny) = (d.dot(&nx), d.dot(&ny));
    [
        [(r2 * l + p.kappa1) / EIGHT_PI, -dny * c / EIGHT_PI],
        [
            dnx * c / EIGHT_PI,
            -(nx.dot(&ny) * c + 2.0 * dnx * dny / r2) / EIGHT_PI,
        ],
    ]
}

/// A point of a parametrized curve as seen by the split kernels.
#[derive(Clone, Copy, Debug)]
pub struct CurvePoint {
    pub t: f64,
    pub point: Vec2,
    pub normal: Vec2,
    pub speed: f64,
    /// `x''(t) · n(t)`.
    pub accel_normal: f64,
}

/// Trace kernels written as
/// `sin2_log · 4 sin² ln(4 sin²) + log · ln(4 sin²) + smooth` with the
/// argument `(t-s)/2`, all coefficients smooth in `(t, s)` on a single
/// curve. Kernels whose log factor vanishes like `(t-s)²` (all but the
/// `(1, 1)` one) carry it in `sin2_log` and have `log = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitKernels {
    pub sin2_log: [[f64; 2]; 2],
    pub log: [[f64; 2]; 2],
    pub smooth: [[f64; 2]; 2],
}

/// Log-split trace kernels between a target and a source on the same curve.
///
/// Each kernel has the form `f ln r + g` with `f`, `g` smooth; writing
/// `ln r = ½ ln(4 sin²((t-s)/2)) + ½ ln(r² / 4 sin²((t-s)/2))` gives
/// `log = f/2` and `smooth = f · ½ ln(r²/4 sin²) + g`. When `f` vanishes
/// like `(t-s)²` the log term is rewritten as `f/(8 sin²) · 4 sin² ln(4 sin²)`.
/// At `t = s`, `r²/4 sin² → |x'|²` and `d·n/4 sin² → ±x''·n/2`.
pub fn split_trace_kernels(target: &CurvePoint, source: &CurvePoint, p: &KernelParams) -> SplitKernels {
    let ln_k0 = p.kappa0.ln();
    let (nx, ny) = (target.normal, source.normal);
    let d = target.point - source.point;
    let r2 = d.norm_squared();
    let sin_half = (0.5 * (target.t - source.t)).sin();
    let four_sin2 = 4.0 * sin_half * sin_half;

    if four_sin2 == 0.0 || r2 == 0.0 {
        let half_ln_q = target.speed.ln();
        let f11 = -2.0 * nx.dot(&ny) / EIGHT_PI;
        let g11 = -nx.dot(&ny) * (1.0 - 2.0 * ln_k0) / EIGHT_PI;
        let a = -target.accel_normal / (2.0 * EIGHT_PI);
        return SplitKernels {
            sin2_log: [[target.speed * target.speed / (2.0 * EIGHT_PI), a], [a, 0.0]],
            log: [[0.0, 0.0], [0.0, 0.5 * f11]],
            smooth: [
                [p.kappa1 / EIGHT_PI, 0.0],
                [0.0, f11 * half_ln_q + g11],
            ],
        };
    }

    let half_ln_q = 0.5 * (r2.ln() - four_sin2.ln());
    let (dnx, dny) = (d.dot(&nx), d.dot(&ny));
    let one_minus = 1.0 - 2.0 * ln_k0;
    let f = [
        [r2 / EIGHT_PI, -2.0 * dny / EIGHT_PI],
        [2.0 * dnx / EIGHT_PI, -2.0 * nx.dot(&ny) / EIGHT_PI],
    ];
    let g = [
        [(-r2 * ln_k0 + p.kappa1) / EIGHT_PI, -dny * one_minus / EIGHT_PI],
        [
            dnx * one_minus / EIGHT_PI,
            -(nx.dot(&ny) * one_minus + 2.0 * dnx * dny / r2) / EIGHT_PI,
        ],
    ];
    let mut out = SplitKernels {
        sin2_log: [[0.0; 2]; 2],
        log: [[0.0; 2]; 2],
        smooth: [[0.0; 2]; 2],
    };
    for a in 0..2 {
        for b in 0..2 {
            if (a, b) == (1, 1) {
                out.log[a][b] = 0.5 * f[a][b];
            } else {
                out.sin2_log[a][b] = 0.5 * f[a][b] / four_sin2;
            }
            out.smooth[a][b] = f[a][b] * half_ln_q + g[a][b];
        }
    }
    out
}

/// The constants `ν_j(R)`, `λ_j(R)` of an origin-centred circle of radius `R`:
/// outside the circle, the minimal-energy extension of the trace of `G_k` is
/// `ν_k ω_k + λ_k X_k`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CircleConstants {
    pub nu: [f64; 3],
    pub lambda: [f64; 3],
}

pub fn circle_closed_forms(radius: f64, p: &KernelParams) -> Result<CircleConstants> {
    if !(radius > 0.0) {
        return Err(Error::InvalidInput(format!("radius must be positive, got {radius}")));
    }
    let l = p.log_ratio(radius);
    let r2 = radius * radius;
    let nu0 = r2 / 4.0 * (2.0 * l + 1.0);
    let nu1 = -r2 / 4.0;
    let lambda0 = -r2 / (4.0 * PI) * (l + l * l) + (p.kappa1 - r2) / EIGHT_PI;
    let lambda1 = -(l + 1.0) / (4.0 * PI);
    Ok(CircleConstants {
        nu: [nu0, nu1, nu1],
        lambda: [lambda0, lambda1, lambda1],
    })
}
