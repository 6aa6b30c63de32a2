//! Smooth closed curves, their samples, and multi-connected unions.
//!
//! Every built-in curve is parametrized counterclockwise on `[0, 2π)`.
//! Normals point into the bounded region enclosed by each curve.

mod spec;

use std::f64::consts::{PI, TAU};

use nalgebra::Vector2;

use crate::error::{Error, Result};

pub use spec::parse_curve_spec;

pub type Vec2 = Vector2<f64>;

/// Samples per curve used for containment, distance and centroid scans.
const DENSE_SAMPLES: usize = 4096;

#[derive(Clone, Debug, PartialEq)]
pub enum CurveKind {
    Circle { radius: f64 },
    Ellipse { a: f64, b: f64 },
    /// `scale * (cos t + 0.65 cos 2t - 0.65, 1.5 sin t)`
    Kite { scale: f64 },
    /// Star-shaped curve `r(t) (cos t, sin t)` with a trigonometric radius.
    TrigPolynomial {
        c0: f64,
        cos: Vec<f64>,
        sin: Vec<f64>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamCurve {
    kind: CurveKind,
    center: Vec2,
}

impl ParamCurve {
    pub fn circle(radius: f64, center: Vec2) -> Result<Self> {
        positive("circle radius", radius)?;
        Self::checked(CurveKind::Circle { radius }, center)
    }

    pub fn ellipse(a: f64, b: f64, center: Vec2) -> Result<Self> {
        positive("ellipse semi-axis a", a)?;
        positive("ellipse semi-axis b", b)?;
        Self::checked(CurveKind::Ellipse { a, b }, center)
    }

    pub fn kite(scale: f64, center: Vec2) -> Result<Self> {
        positive("kite scale", scale)?;
        Self::checked(CurveKind::Kite { scale }, center)
    }

    /// Radius `c0 + Σ cos[k-1] cos(kt) + sin[k-1] sin(kt)`; must stay positive.
    pub fn trig_polynomial(c0: f64, cos: Vec<f64>, sin: Vec<f64>, center: Vec2) -> Result<Self> {
        if cos.len() != sin.len() {
            return Err(Error::InvalidInput(
                "trig polynomial needs as many sine as cosine coefficients".into(),
            ));
        }
        let curve = Self {
            kind: CurveKind::TrigPolynomial { c0, cos, sin },
            center,
        };
        for i in 0..DENSE_SAMPLES {
            let t = TAU * i as f64 / DENSE_SAMPLES as f64;
            let (r, _, _) = curve.radial(t);
            if !(r > 0.0) {
                return Err(Error::Geometry(format!(
                    "trig polynomial radius {r} is not positive at t = {t}"
                )));
            }
        }
        Self::checked(curve.kind, center)
    }

    fn checked(kind: CurveKind, center: Vec2) -> Result<Self> {
        if !(center.x.is_finite() && center.y.is_finite()) {
            return Err(Error::InvalidInput("curve center must be finite".into()));
        }
        Ok(Self { kind, center })
    }

    pub fn kind(&self) -> &CurveKind {
        &self.kind
    }

    pub fn center(&self) -> Vec2 {
        self.center
    }

    fn radial(&self, t: f64) -> (f64, f64, f64) {
        match &self.kind {
            CurveKind::TrigPolynomial { c0, cos, sin } => {
                let (mut r, mut dr, mut ddr) = (*c0, 0.0, 0.0);
                for (k, (a, b)) in cos.iter().zip(sin).enumerate() {
                    let k = (k + 1) as f64;
                    let (s, c) = (k * t).sin_cos();
                    r += a * c + b * s;
                    dr += k * (-a * s + b * c);
                    ddr -= k * k * (a * c + b * s);
                }
                (r, dr, ddr)
            }
            _ => unreachable!("radial form only exists for trig polynomials"),
        }
    }

    pub fn point(&self, t: f64) -> Vec2 {
        let (s, c) = t.sin_cos();
        let local = match &self.kind {
            CurveKind::Circle { radius } => Vec2::new(radius * c, radius * s),
            CurveKind::Ellipse { a, b } => Vec2::new(a * c, b * s),
            CurveKind::Kite { scale } => {
                *scale * Vec2::new(c + 0.65 * (2.0 * t).cos() - 0.65, 1.5 * s)
            }
            CurveKind::TrigPolynomial { .. } => self.radial(t).0 * Vec2::new(c, s),
        };
        self.center + local
    }

    pub fn derivative(&self, t: f64) -> Vec2 {
        let (s, c) = t.sin_cos();
        match &self.kind {
            CurveKind::Circle { radius } => Vec2::new(-radius * s, radius * c),
            CurveKind::Ellipse { a, b } => Vec2::new(-a * s, b * c),
            CurveKind::Kite { scale } => {
                *scale * Vec2::new(-s - 1.3 * (2.0 * t).sin(), 1.5 * c)
            }
            CurveKind::TrigPolynomial { .. } => {
                let (r, dr, _) = self.radial(t);
                dr * Vec2::new(c, s) + r * Vec2::new(-s, c)
            }
        }
    }

    pub fn second_derivative(&self, t: f64) -> Vec2 {
        let (s, c) = t.sin_cos();
        match &self.kind {
            CurveKind::Circle { radius } => Vec2::new(-radius * c, -radius * s),
            CurveKind::Ellipse { a, b } => Vec2::new(-a * c, -b * s),
            CurveKind::Kite { scale } => {
                *scale * Vec2::new(-c - 2.6 * (2.0 * t).cos(), -1.5 * s)
            }
            CurveKind::TrigPolynomial { .. } => {
                let (r, dr, ddr) = self.radial(t);
                (ddr - r) * Vec2::new(c, s) + 2.0 * dr * Vec2::new(-s, c)
            }
        }
    }

    /// Inward unit normal `(-x2', x1') / |x'|`.
    pub fn normal(&self, t: f64) -> Vec2 {
        let d = self.derivative(t);
        Vec2::new(-d.y, d.x) / d.norm()
    }

    /// The curve mapped by `x -> rho x`.
    pub fn scaled(&self, rho: f64) -> Self {
        let kind = match &self.kind {
            CurveKind::Circle { radius } => CurveKind::Circle {
                radius: radius * rho,
            },
            CurveKind::Ellipse { a, b } => CurveKind::Ellipse {
                a: a * rho,
                b: b * rho,
            },
            CurveKind::Kite { scale } => CurveKind::Kite { scale: scale * rho },
            CurveKind::TrigPolynomial { c0, cos, sin } => CurveKind::TrigPolynomial {
                c0: c0 * rho,
                cos: cos.iter().map(|v| v * rho).collect(),
                sin: sin.iter().map(|v| v * rho).collect(),
            },
        };
        Self {
            kind,
            center: self.center * rho,
        }
    }

    pub fn translated(&self, shift: Vec2) -> Self {
        Self {
            kind: self.kind.clone(),
            center: self.center + shift,
        }
    }

    fn dense_points(&self, n: usize) -> Vec<Vec2> {
        (0..n)
            .map(|i| self.point(TAU * i as f64 / n as f64))
            .collect()
    }

    /// Winding number of the curve about `z`, or `None` when `z` lies within
    /// `tol` of the dense polygon.
    pub fn winding_number(&self, z: Vec2, tol: f64) -> Option<i64> {
        winding_of_polygon(&self.dense_points(DENSE_SAMPLES), z, tol)
    }

    /// Area and centroid of the enclosed region (Green's theorem).
    pub fn area_centroid(&self) -> (f64, Vec2) {
        let n = DENSE_SAMPLES;
        let h = TAU / n as f64;
        let (mut area, mut mx, mut my) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let t = h * i as f64;
            let x = self.point(t);
            let d = self.derivative(t);
            area += 0.5 * (x.x * d.y - x.y * d.x);
            mx += 0.5 * x.x * x.x * d.y;
            my -= 0.5 * x.y * x.y * d.x;
        }
        area *= h;
        (area, Vec2::new(mx * h / area, my * h / area))
    }

    /// Extremum of `|x(t)|` over the curve, refined from a dense scan.
    fn radius_extremum(&self, largest: bool) -> f64 {
        let n = DENSE_SAMPLES;
        let h = TAU / n as f64;
        let sign = if largest { -1.0 } else { 1.0 };
        let objective = |t: f64| sign * self.point(t).norm_squared();
        let best = (0..n)
            .min_by(|&i, &j| objective(h * i as f64).total_cmp(&objective(h * j as f64)))
            .unwrap_or(0);
        let t = golden_section(objective, h * (best as f64 - 1.0), h * (best as f64 + 1.0));
        (sign * objective(t)).max(0.0).sqrt()
    }
}

fn positive(what: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::Parse(format!("{what} must be positive, got {value}")))
    }
}

fn winding_of_polygon(points: &[Vec2], z: Vec2, tol: f64) -> Option<i64> {
    let mut total = 0.0;
    for (i, p) in points.iter().enumerate() {
        let q = points[(i + 1) % points.len()];
        let (a, b) = (p - z, q - z);
        if a.norm() <= tol {
            return None;
        }
        total += (a.x * b.y - a.y * b.x).atan2(a.dot(&b));
    }
    Some((total / TAU).round() as i64)
}

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() < 1e-15 * (1.0 + a.abs()) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Nodes, derivatives and inward normals of a curve on a uniform grid.
#[derive(Clone, Debug)]
pub struct CurveSample {
    pub t: Vec<f64>,
    pub points: Vec<Vec2>,
    pub tangents: Vec<Vec2>,
    pub speeds: Vec<f64>,
    pub normals: Vec<Vec2>,
    pub curvatures: Vec<f64>,
}

impl CurveSample {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Trapezoid arc-length weight `2π |x'(t_i)| / N`.
    pub fn weight(&self, i: usize) -> f64 {
        TAU / self.len() as f64 * self.speeds[i]
    }

    /// Largest arc-length distance between neighbouring nodes.
    pub fn max_spacing(&self) -> f64 {
        let h = TAU / self.len() as f64;
        h * self.speeds.iter().cloned().fold(0.0, f64::max)
    }
}

pub fn sample(curve: &ParamCurve, n: usize) -> Result<CurveSample> {
    if n < 8 || !n.is_multiple_of(2) {
        return Err(Error::InvalidInput(format!(
            "node count must be even and at least 8, got {n}"
        )));
    }
    let mut s = CurveSample {
        t: Vec::with_capacity(n),
        points: Vec::with_capacity(n),
        tangents: Vec::with_capacity(n),
        speeds: Vec::with_capacity(n),
        normals: Vec::with_capacity(n),
        curvatures: Vec::with_capacity(n),
    };
    for i in 0..n {
        let t = TAU * i as f64 / n as f64;
        let d = curve.derivative(t);
        let speed = d.norm();
        if !(speed > 0.0 && speed.is_finite()) {
            return Err(Error::DegenerateParametrization { t, speed });
        }
        let dd = curve.second_derivative(t);
        s.t.push(t);
        s.points.push(curve.point(t));
        s.tangents.push(d);
        s.speeds.push(speed);
        s.normals.push(Vec2::new(-d.y, d.x) / speed);
        s.curvatures.push((d.x * dd.y - d.y * dd.x) / speed.powi(3));
    }
    Ok(s)
}

/// Radii of origin-centred circles bounding the curve set.
///
/// `inner` is the largest radius whose disk lies in the closure of the
/// bounded region; `outer` the smallest radius whose disk contains every curve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundingRadii {
    pub inner: f64,
    pub outer: f64,
}

/// A finite disjoint union of Jordan curves.
#[derive(Clone, Debug)]
pub struct MultiCurve {
    curves: Vec<ParamCurve>,
    exterior: Vec<bool>,
    radii: Option<BoundingRadii>,
}

impl MultiCurve {
    /// Checks disjointness, classifies the exterior boundary and caches the
    /// bounding radii when the origin is interior.
    pub fn new(curves: Vec<ParamCurve>) -> Result<Self> {
        if curves.is_empty() {
            return Err(Error::InvalidInput("at least one curve is required".into()));
        }
        let dense: Vec<Vec<Vec2>> = curves.iter().map(|c| c.dense_points(1024)).collect();
        let extent = dense
            .iter()
            .flatten()
            .map(|p| p.norm())
            .fold(1.0f64, f64::max);
        let tol = 1e-9 * extent;
        for i in 0..curves.len() {
            for j in (i + 1)..curves.len() {
                let gap = dense[i]
                    .iter()
                    .flat_map(|p| dense[j].iter().map(move |q| (p - q).norm()))
                    .fold(f64::INFINITY, f64::min);
                if gap <= tol {
                    return Err(Error::Geometry(format!(
                        "curves {i} and {j} touch (minimum sample distance {gap:e})"
                    )));
                }
            }
        }
        let mut multi = Self {
            curves,
            exterior: Vec::new(),
            radii: None,
        };
        multi.exterior = multi.classify(&dense, tol)?;
        multi.radii = multi.compute_radii();
        Ok(multi)
    }

    pub fn single(curve: ParamCurve) -> Result<Self> {
        Self::new(vec![curve])
    }

    /// `exterior[i]` is true when curve `i` is not enclosed by any other curve.
    fn classify(&self, dense: &[Vec<Vec2>], tol: f64) -> Result<Vec<bool>> {
        let n = self.curves.len();
        let mut exterior = vec![true; n];
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                // Probe several points of curve i so crossings are caught.
                let mut seen = None;
                for k in (0..dense[i].len()).step_by(dense[i].len() / 16) {
                    let w = winding_of_polygon(&dense[j], dense[i][k], tol).ok_or_else(|| {
                        Error::Geometry(format!("curve {i} has a point on curve {j}"))
                    })?;
                    match seen {
                        None => seen = Some(w),
                        Some(prev) if prev != w => {
                            return Err(Error::Geometry(format!("curves {i} and {j} intersect")))
                        }
                        _ => {}
                    }
                }
                if seen.unwrap_or(0) != 0 {
                    exterior[i] = false;
                }
            }
        }
        Ok(exterior)
    }

    fn compute_radii(&self) -> Option<BoundingRadii> {
        if !self.origin_inside() {
            return None;
        }
        let outer = self
            .curves
            .iter()
            .map(|c| c.radius_extremum(true))
            .fold(0.0, f64::max);
        let inner = self
            .exterior_iter()
            .map(|c| c.radius_extremum(false))
            .fold(f64::INFINITY, f64::min);
        Some(BoundingRadii { inner, outer })
    }

    pub fn curves(&self) -> &[ParamCurve] {
        &self.curves
    }

    pub fn len(&self) -> usize {
        self.curves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.curves.is_empty()
    }

    pub fn is_exterior(&self, i: usize) -> bool {
        self.exterior[i]
    }

    pub fn exterior_flags(&self) -> &[bool] {
        &self.exterior
    }

    pub fn exterior_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.exterior[i]).collect()
    }

    fn exterior_iter(&self) -> impl Iterator<Item = &ParamCurve> {
        self.curves
            .iter()
            .zip(&self.exterior)
            .filter_map(|(c, &e)| e.then_some(c))
    }

    /// The exterior boundary Γe as a curve set of its own.
    pub fn exterior_boundary(&self) -> MultiCurve {
        let curves: Vec<ParamCurve> = self.exterior_iter().cloned().collect();
        let exterior = vec![true; curves.len()];
        let mut multi = Self {
            curves,
            exterior,
            radii: None,
        };
        multi.radii = multi.compute_radii();
        multi
    }

    /// True when `z` is enclosed by at least one curve.
    pub fn contains(&self, z: Vec2) -> bool {
        self.exterior_iter()
            .any(|c| c.winding_number(z, 0.0).unwrap_or(1) != 0)
    }

    pub fn origin_inside(&self) -> bool {
        self.contains(Vec2::zeros())
    }

    pub fn bounding_radii(&self) -> Result<BoundingRadii> {
        self.radii.ok_or(Error::OriginNotInterior)
    }

    pub fn scale_about_origin(&self, rho: f64) -> Result<MultiCurve> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::InvalidInput(format!("scale must be positive, got {rho}")));
        }
        Ok(Self {
            curves: self.curves.iter().map(|c| c.scaled(rho)).collect(),
            exterior: self.exterior.clone(),
            radii: self.radii.map(|r| BoundingRadii {
                inner: r.inner * rho,
                outer: r.outer * rho,
            }),
        })
    }

    pub fn translated(&self, shift: Vec2) -> MultiCurve {
        let mut multi = Self {
            curves: self.curves.iter().map(|c| c.translated(shift)).collect(),
            exterior: self.exterior.clone(),
            radii: None,
        };
        multi.radii = multi.compute_radii();
        multi
    }

    /// Translates so that the centroid of the region enclosed by the first
    /// exterior curve sits at the origin.
    pub fn normalized(&self) -> Result<MultiCurve> {
        let first = self
            .exterior_iter()
            .next()
            .ok_or_else(|| Error::Geometry("no exterior curve".into()))?;
        let (_, centroid) = first.area_centroid();
        let moved = self.translated(-centroid);
        if !moved.origin_inside() {
            return Err(Error::OriginNotInterior);
        }
        Ok(moved)
    }

    /// Distance from `z` to the curve set, taken over dense samples.
    pub fn distance_to(&self, z: Vec2) -> f64 {
        self.curves
            .iter()
            .flat_map(|c| c.dense_points(DENSE_SAMPLES))
            .map(|p| (p - z).norm())
            .fold(f64::INFINITY, f64::min)
    }
}

/// Points of a circle of radius `r` about the origin (`n` uniform angles).
pub fn circle_points(r: f64, n: usize) -> Vec<Vec2> {
    (0..n)
        .map(|i| {
            let a = 2.0 * PI * i as f64 / n as f64;
            Vec2::new(r * a.cos(), r * a.sin())
        })
        .collect()
}
