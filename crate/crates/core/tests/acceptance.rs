//! Acceptance suite: one PASS/FAIL line per criterion. Exits non-zero when
//! any criterion fails.

#![allow(clippy::needless_range_loop)]

use std::f64::consts::{E, PI};
use std::time::Instant;

use nalgebra::{DMatrix, Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use bislp::assembly::{assemble_v, far_field_fit, solve_v, DiscreteDensity, SingleLayer, TracePair};
use bislp::geometry::{parse_curve_spec, MultiCurve, ParamCurve, Vec2};
use bislp::kernels::{circle_closed_forms, g0, KernelParams};
use bislp::robin::{robin_matrix, sdagger_trace_residual, with_interior_origin, Definiteness, RobinContext, SDagger};
use bislp::scales::{find_degenerate_scales, sigma_min_dips, sigma_min_scan, ScanOptions};

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn std_params() -> KernelParams {
    KernelParams::default()
}

fn spec(s: &str) -> MultiCurve {
    parse_curve_spec(s).expect("valid spec")
}

fn builtins() -> Vec<(&'static str, MultiCurve)> {
    vec![
        ("circle", spec("circle:r=1")),
        ("ellipse", spec("ellipse:a=2,b=1")),
        ("kite", spec("kite")),
    ]
}

fn outer_radius(multi: &MultiCurve) -> f64 {
    let (moved, _) = with_interior_origin(&multi.exterior_boundary()).unwrap();
    moved.bounding_radii().unwrap().outer
}

fn smooth_trace(layer: &SingleLayer, seed: u64) -> TracePair {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
    TracePair::from_fn(layer.discretization(), |x, n| {
        (
            c[0] + c[1] * x.x + c[2] * (0.5 * x.y).sin() + c[3] * x.x * x.y,
            c[4] * n.x + c[5] * n.y * x.x + c[6] + c[7] * (x.x - x.y).cos(),
        )
    })
}

fn circle_robin() -> Outcome {
    let start = Instant::now();
    let lambda = robin_matrix(&spec("circle:r=1"), std_params(), 256, Some(2.0)).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let exact = [-1.0 / (8.0 * PI), -1.0 / (4.0 * PI), -1.0 / (4.0 * PI)];
    let mut diag: f64 = 0.0;
    let mut off: f64 = 0.0;
    for j in 0..3 {
        for k in 0..3 {
            if j == k {
                diag = diag.max((lambda.matrix[(j, k)] - exact[j]).abs());
            } else {
                off = off.max(lambda.matrix[(j, k)].abs());
            }
        }
    }
    outcome(
        diag <= 1e-7 && off <= 1e-8 && secs < 5.0,
        format!("diag err {diag:.2e} (<=1e-7), off-diag {off:.2e} (<=1e-8), {secs:.2}s (<5s)"),
    )
}

fn circle_scale() -> Outcome {
    let multi = spec("circle:r=1");
    let start = Instant::now();
    let scan = find_degenerate_scales(&multi, std_params(), 32, &ScanOptions::default()).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let Some(root) = scan
        .roots
        .iter()
        .min_by(|a, b| (a.rho - 1.0 / E).abs().total_cmp(&(b.rho - 1.0 / E).abs()))
    else {
        return outcome(false, "no root found");
    };
    let sigma = sigma_min_scan(&multi, std_params(), &scan.grid, 128).unwrap();
    let dips = sigma_min_dips(&multi, std_params(), &sigma, 128, 1e-6).unwrap();
    let dip_gap = dips
        .iter()
        .map(|d| (d.rho - root.rho).abs())
        .fold(f64::INFINITY, f64::min);
    let err = (root.rho - 1.0 / E).abs();
    outcome(
        err <= 1e-6 && root.multiplicity == 2 && dip_gap <= 1e-3 && secs < 60.0,
        format!(
            "rho*={:.9} err {err:.2e} (<=1e-6), multiplicity {}, dip gap {dip_gap:.2e} (<=1e-3), scan {secs:.2}s (<60s)",
            root.rho, root.multiplicity
        ),
    )
}

fn bracket_identity() -> Outcome {
    let mut worst: f64 = 0.0;
    for (_, multi) in builtins() {
        let ctx = RobinContext::new(&multi, std_params(), 256, None).unwrap();
        for k in 0..3 {
            let mut a = [0.0; 3];
            a[k] = 1.0;
            let b = ctx
                .bracket_vector(&TracePair::affine(ctx.layer().discretization(), a))
                .unwrap();
            for j in 0..3 {
                worst = worst.max((b[j] - a[j]).abs());
            }
        }
    }
    outcome(worst <= 1e-9, format!("max |[G_j, X_k] - delta_jk| = {worst:.2e} (<=1e-9)"))
}

fn symmetry_and_probe() -> Outcome {
    let mut asym: f64 = 0.0;
    let mut probe: f64 = 0.0;
    for (_, multi) in builtins() {
        let rp = outer_radius(&multi);
        let a = robin_matrix(&multi, std_params(), 256, Some(2.0 * rp)).unwrap();
        let b = robin_matrix(&multi, std_params(), 256, Some(4.0 * rp)).unwrap();
        asym = asym.max(a.relative_asymmetry()).max(b.relative_asymmetry());
        probe = probe.max((a.matrix - b.matrix).norm() / a.norm());
    }
    outcome(
        asym < 1e-7 && probe < 1e-6,
        format!("relative asymmetry {asym:.2e} (<1e-7), probe change {probe:.2e} (<1e-6)"),
    )
}

fn eigenvalues(multi: &MultiCurve) -> [f64; 3] {
    robin_matrix(multi, std_params(), 256, None).unwrap().eigenvalues
}

fn monotonicity() -> Outcome {
    let circle = eigenvalues(&spec("circle:r=1"));
    let ellipse = eigenvalues(&spec("ellipse:a=1,b=0.5"));
    let kite = spec("kite");
    let (kite_moved, _) = with_interior_origin(&kite).unwrap();
    let r = kite_moved.bounding_radii().unwrap().outer;
    let enclosing = MultiCurve::single(ParamCurve::circle(r, Vec2::zeros()).unwrap()).unwrap();
    let kite_ev = eigenvalues(&kite_moved);
    let enclosing_ev = eigenvalues(&enclosing);
    let margin = (0..3)
        .map(|j| (ellipse[j] - circle[j]).min(kite_ev[j] - enclosing_ev[j]))
        .fold(f64::INFINITY, f64::min);
    outcome(
        margin >= -1e-7,
        format!("min over j of lambda_j(inner) - lambda_j(outer) = {margin:.3e} (>= -1e-7)"),
    )
}

fn hole_invariance() -> Outcome {
    let annulus = spec("circle:r=1+circle:r=0.3,cx=0.2");
    let outer = spec("circle:r=1");
    let opts = ScanOptions::default();
    let roots = |m: &MultiCurve| {
        let scan = find_degenerate_scales(m, std_params(), 32, &opts).unwrap();
        let sigma = sigma_min_scan(m, std_params(), &scan.grid, 128).unwrap();
        let dips = sigma_min_dips(m, std_params(), &sigma, 128, 1e-6).unwrap();
        (scan.roots.iter().map(|r| r.rho).collect::<Vec<_>>(), dips)
    };
    let (ra, da) = roots(&annulus);
    let (ro, d_o) = roots(&outer);
    if ra.len() != 1 || ro.len() != 1 {
        return outcome(false, format!("roots annulus {ra:?}, outer {ro:?}"));
    }
    let nearest = |dips: &[bislp::scales::SigmaDip], r: f64| {
        dips.iter()
            .map(|d| d.rho)
            .min_by(|a, b| (a - r).abs().total_cmp(&(b - r).abs()))
            .unwrap_or(f64::NAN)
    };
    let root_gap = (ra[0] - ro[0]).abs();
    let dip_gap = (nearest(&da, ra[0]) - nearest(&d_o, ro[0])).abs();
    outcome(
        root_gap <= 1e-6 && dip_gap <= 1e-3,
        format!("rho* gap {root_gap:.2e} (<=1e-6), sigma_min dip gap {dip_gap:.2e} (<=1e-3)"),
    )
}

fn random_geometry(rng: &mut ChaCha8Rng) -> MultiCurve {
    let s = rng.random_range(0.4..2.0);
    let c = Vec2::new(rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2)) * s;
    let curve = match rng.random_range(0..3) {
        0 => ParamCurve::circle(s, c),
        1 => ParamCurve::ellipse(s, s * rng.random_range(0.4..0.9), c),
        _ => ParamCurve::kite(s, c),
    }
    .unwrap();
    MultiCurve::single(curve).unwrap()
}

/// `(geometry, κ)` satisfying the positive (`true`) or negative criterion.
fn criterion_cases(positive: bool) -> Vec<(MultiCurve, KernelParams)> {
    let mut rng = ChaCha8Rng::seed_from_u64(if positive { 31 } else { 37 });
    (0..5)
        .map(|_| {
            let multi = random_geometry(&mut rng);
            let (moved, _) = with_interior_origin(&multi).unwrap();
            let radii = moved.bounding_radii().unwrap();
            let params = if positive {
                let k0 = E * radii.outer * 1.05 * rng.random_range(1.0..1.5);
                KernelParams::new(k0, 1.05 * (k0 / E).powi(2) * rng.random_range(1.0..2.0))
            } else {
                let k0 = E * radii.inner * 0.95 * rng.random_range(0.5..1.0);
                KernelParams::new(k0, (k0 / E).powi(2) * rng.random_range(-1.0..0.95))
            };
            (multi, params.unwrap())
        })
        .collect()
}

fn definiteness() -> Outcome {
    let mut violations = Vec::new();
    for (positive, expected) in [(true, Definiteness::Positive), (false, Definiteness::Negative)] {
        for (i, (multi, params)) in criterion_cases(positive).into_iter().enumerate() {
            let lambda = robin_matrix(&multi, params, 128, None).unwrap();
            if lambda.class != expected {
                violations.push(format!("{}#{i}:{:?}", expected.as_str(), lambda.eigenvalues));
            }
        }
    }
    outcome(
        violations.is_empty(),
        format!("10 cases, {} violations {violations:?}", violations.len()),
    )
}

fn ellipticity() -> Outcome {
    let mut worst = f64::INFINITY;
    for (multi, params) in criterion_cases(true) {
        let (moved, _) = with_interior_origin(&multi).unwrap();
        let wv = assemble_v(&moved, params, 256).unwrap().weighted();
        let sym: DMatrix<f64> = (&wv + wv.transpose()) * 0.5;
        let min = sym.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min);
        worst = worst.min(min);
    }
    outcome(worst > 0.0, format!("min eigenvalue of sym(WV) over 5 cases = {worst:.3e} (>0)"))
}

fn interior_points(multi: &MultiCurve, layer: &SingleLayer, count: usize) -> Vec<Vec2> {
    let q = DiscreteDensity::zeros(layer.total_nodes());
    let mut pts = Vec::new();
    for i in 0..60 {
        for j in 0..60 {
            let x = Vec2::new(-2.0 + 4.0 * i as f64 / 59.0, -2.0 + 4.0 * j as f64 / 59.0);
            if multi.contains(x) && layer.eval_field(&q, x).is_ok() {
                pts.push(x);
            }
        }
    }
    let stride = pts.len() / count;
    pts.into_iter().step_by(stride.max(1)).take(count).collect()
}

fn manufactured() -> Outcome {
    let multi = spec("kite");
    let params = std_params();
    let z = Vec2::new(3.0, 0.0);
    let layer = SingleLayer::new(&multi, params, 256).unwrap();
    let p = TracePair::from_fn(layer.discretization(), |x, n| {
        let d = x - z;
        (g0(d, &params), d.dot(&n) * (2.0 * d.norm().ln() + 1.0) / (8.0 * PI))
    });
    let q = layer.assemble_v().build_bordered().unwrap().solve_trace(&p).unwrap();
    let pts = interior_points(&multi, &layer, 20);
    let err = pts
        .iter()
        .map(|&x| (layer.eval_field(&q, x).unwrap().u - g0(x - z, &params)).abs())
        .fold(0.0, f64::max);
    outcome(
        pts.len() == 20 && err <= 1e-6,
        format!("{} interior points, max error {err:.2e} (<=1e-6)", pts.len()),
    )
}

fn far_field() -> Outcome {
    let multi = spec("kite");
    let layer = SingleLayer::new(&multi, std_params(), 128).unwrap();
    let m = layer.total_nodes();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut fit_err: f64 = 0.0;
    for _ in 0..3 {
        let coeffs: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let disc = layer.discretization();
        let mut q = DiscreteDensity::zeros(m);
        for g in 0..m {
            let (k, i) = disc.locate(g);
            let t = disc.samples()[k].t[i];
            q.q0[g] = coeffs[0] + coeffs[1] * t.cos() + coeffs[2] * (2.0 * t).sin();
            q.q1[g] = coeffs[3] + coeffs[4] * t.sin() + coeffs[5] * (3.0 * t).cos();
        }
        let fit = far_field_fit(&layer, &q, &[20.0, 40.0, 80.0, 160.0]).unwrap();
        let a = Vector3::from(layer.moment_vector(&q));
        let diff = (Vector3::from(fit.a) - a).norm() / (1.0 + a.norm());
        fit_err = fit_err.max(diff);
    }

    let p = smooth_trace(&layer, 3);
    let q = layer.assemble_v().build_bordered().unwrap().solve_trace(&p).unwrap();
    let radii = [1e2, 1e3, 1e4];
    let rms: Vec<f64> = radii
        .iter()
        .map(|&r| {
            let vals: Vec<f64> = (0..64)
                .map(|i| {
                    let th = 2.0 * PI * i as f64 / 64.0;
                    layer.eval_field(&q, Vec2::new(r * th.cos(), r * th.sin())).unwrap().lap
                })
                .collect();
            (vals.iter().map(|v| v * v).sum::<f64>() / 64.0).sqrt()
        })
        .collect();
    let xs: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let ys: Vec<f64> = rms.iter().map(|v| v.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / 3.0, ys.iter().sum::<f64>() / 3.0);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    let decay_ok = (slope + 1.0).abs() <= 0.05;
    outcome(
        fit_err <= 1e-6 && decay_ok,
        format!("A fit rel err {fit_err:.2e} (<=1e-6), Laplacian decay exponent {slope:.4} (target -1 within 5%)"),
    )
}

fn sdagger() -> Outcome {
    let multi = spec("ellipse:a=2,b=1");
    let params = std_params();
    let n = 256;
    let layer = SingleLayer::new(&multi, params, n).unwrap();
    let mut residual: f64 = 0.0;
    let mut diff: f64 = 0.0;
    for seed in [1, 2, 3] {
        let p = smooth_trace(&layer, seed);
        residual = residual.max(sdagger_trace_residual(&multi, params, n, &p).unwrap());
        let sd = SDagger::new(&multi, params, n, &p).unwrap();
        let v = assemble_v(&multi, params, n).unwrap();
        let q = solve_v(&v, &p).unwrap();
        for x in [
            Vec2::new(0.0, 0.0),
            Vec2::new(0.8, 0.2),
            Vec2::new(-1.0, -0.3),
            Vec2::new(3.0, 0.5),
            Vec2::new(-2.0, 2.0),
            Vec2::new(10.0, -7.0),
        ] {
            diff = diff.max((sd.value(x).unwrap() - v.layer().eval_field(&q, x).unwrap().u).abs());
        }
    }
    outcome(
        residual < 1e-7 && diff < 1e-7,
        format!("trace residual {residual:.2e} (<1e-7), |S-dagger p - S V^-1 p| {diff:.2e} (<1e-7)"),
    )
}

/// Errors at or below this level count as saturated at roundoff.
const ROUNDOFF_FLOOR: f64 = 1e-13;

fn convergence() -> Outcome {
    let multi = spec("circle:r=1");
    let exact = circle_closed_forms(1.0, &std_params()).unwrap().lambda;
    let d = Matrix3::from_diagonal(&Vector3::from(exact));
    let ns = [32, 64, 128, 256, 512];
    let errs: Vec<f64> = ns
        .iter()
        .map(|&n| (robin_matrix(&multi, std_params(), n, None).unwrap().matrix - d).amax())
        .collect();
    let ok = errs
        .windows(2)
        .take(3)
        .all(|w| w[1] <= w[0] / 100.0 || w[1] <= ROUNDOFF_FLOOR)
        && errs[3..].iter().all(|&e| e <= ROUNDOFF_FLOOR);
    let listed: Vec<String> = ns.iter().zip(&errs).map(|(n, e)| format!("N={n}:{e:.1e}")).collect();
    outcome(
        ok,
        format!("{} (>=100x per doubling or <= {ROUNDOFF_FLOOR:.0e})", listed.join(" ")),
    )
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("circle Robin matrix", circle_robin),
        ("circle degenerate scale", circle_scale),
        ("bracket identity", bracket_identity),
        ("symmetry and probe independence", symmetry_and_probe),
        ("monotonicity", monotonicity),
        ("hole invariance", hole_invariance),
        ("definiteness criteria", definiteness),
        ("strong ellipticity surrogate", ellipticity),
        ("interior manufactured solution", manufactured),
        ("far-field consistency", far_field),
        ("S-dagger reconstruction", sdagger),
        ("convergence", convergence),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {}: {} ({})",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            name,
            o.detail
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
