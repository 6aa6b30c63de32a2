use std::f64::consts::PI;

use approx::assert_abs_diff_eq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::assembly::{assemble_v, solve_v};
use crate::geometry::ParamCurve;
use crate::kernels::circle_closed_forms;

fn std() -> KernelParams {
    KernelParams::default()
}

fn single(c: ParamCurve) -> MultiCurve {
    MultiCurve::single(c).unwrap()
}

fn circle(r: f64) -> MultiCurve {
    single(ParamCurve::circle(r, Vec2::zeros()).unwrap())
}

fn ellipse() -> MultiCurve {
    single(ParamCurve::ellipse(2.0, 1.0, Vec2::zeros()).unwrap())
}

fn kite() -> MultiCurve {
    single(ParamCurve::kite(1.0, Vec2::new(0.3, 0.0)).unwrap())
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

#[test]
fn classify_examples() {
    assert_eq!(classify_eigenvalues(&[-3.0, -2.0, -1.0], 1e-6), Definiteness::Negative);
    assert_eq!(classify_eigenvalues(&[1.0, 2.0, 3.0], 1e-6), Definiteness::Positive);
    assert_eq!(classify_eigenvalues(&[-1.0, 2.0, 3.0], 1e-6), Definiteness::Indefinite);
    assert_eq!(classify_eigenvalues(&[-1.0, 1e-9, 3.0], 1e-6), Definiteness::Singular);
    let c = circle_closed_forms(1.0, &KernelParams::new(1.0, 10.0).unwrap()).unwrap();
    assert_abs_diff_eq!(c.lambda[0], 9.0 / (8.0 * PI), epsilon = 1e-15);
    let mut ev = c.lambda;
    ev.sort_by(|a, b| a.total_cmp(b));
    assert_eq!(classify_eigenvalues(&ev, 1e-6), Definiteness::Indefinite);
}

#[test]
fn bracket_of_affine_traces_is_identity() {
    for multi in [circle(1.0), ellipse(), kite()] {
        let ctx = RobinContext::new(&multi, std(), 128, None).unwrap();
        for k in 0..3 {
            let mut a = [0.0; 3];
            a[k] = 1.0;
            let b = ctx
                .bracket_vector(&TracePair::affine(ctx.layer().discretization(), a))
                .unwrap();
            for j in 0..3 {
                assert_abs_diff_eq!(b[j], a[j], epsilon = 1e-9);
            }
        }
    }
}

#[test]
fn circle_matches_closed_forms() {
    for (r, params) in [
        (1.0, std()),
        (0.5, std()),
        (2.0, std()),
        (1.0, KernelParams::new(1.7, -0.4).unwrap()),
    ] {
        let lambda = robin_matrix(&circle(r), params, 128, None).unwrap();
        let c = circle_closed_forms(r, &params).unwrap();
        for j in 0..3 {
            for k in 0..3 {
                let expected = if j == k { c.lambda[j] } else { 0.0 };
                assert_abs_diff_eq!(lambda.matrix[(j, k)], expected, epsilon = 1e-9);
            }
        }
        assert!(lambda.relative_asymmetry() < 1e-7);
    }
}

#[test]
fn degenerate_circle_drops_rank_two() {
    let r = (-1.0f64).exp();
    let lambda = robin_matrix(&circle(r), std(), 128, Some(2.0)).unwrap();
    assert_abs_diff_eq!(lambda.eigenvalues[0], -(-2.0f64).exp() / (8.0 * PI), epsilon = 1e-9);
    assert!(lambda.eigenvalues[1].abs() < 1e-7 && lambda.eigenvalues[2].abs() < 1e-7);
    assert_eq!(lambda.class, Definiteness::Singular);
}

#[test]
fn holes_do_not_change_lambda() {
    let annulus = MultiCurve::new(vec![
        ParamCurve::circle(1.0, Vec2::zeros()).unwrap(),
        ParamCurve::circle(0.3, Vec2::new(0.2, 0.0)).unwrap(),
    ])
    .unwrap();
    let a = robin_matrix(&annulus, std(), 128, None).unwrap();
    let b = robin_matrix(&circle(1.0), std(), 128, None).unwrap();
    assert_eq!(a.exterior, vec![0]);
    assert!((a.matrix - b.matrix).amax() < 1e-9);
}

#[test]
fn probe_independence_and_symmetry() {
    for multi in [ellipse(), kite()] {
        let rp = multi.bounding_radii().unwrap().outer;
        let a = robin_matrix(&multi, std(), 128, Some(2.0 * rp)).unwrap();
        let b = robin_matrix(&multi, std(), 128, Some(4.0 * rp)).unwrap();
        assert!((a.matrix - b.matrix).norm() < 1e-7 * a.norm(), "{:e}", (a.matrix - b.matrix).norm());
        assert!(a.relative_asymmetry() < 1e-7, "{:e}", a.relative_asymmetry());
        assert_abs_diff_eq!(
            a.determinant,
            a.eigenvalues.iter().product::<f64>(),
            epsilon = 1e-12 * a.determinant.abs()
        );
    }
}

#[test]
fn origin_is_moved_inside_when_needed() {
    let off = single(ParamCurve::circle(1.0, Vec2::new(5.0, -2.0)).unwrap());
    let lambda = robin_matrix(&off, std(), 64, None).unwrap();
    assert_abs_diff_eq!(lambda.shift.x, -5.0, epsilon = 1e-9);
    assert_abs_diff_eq!(lambda.shift.y, 2.0, epsilon = 1e-9);
    assert_abs_diff_eq!(lambda.matrix[(1, 1)], -1.0 / (4.0 * PI), epsilon = 1e-9);
}

#[test]
fn criteria_examples() {
    let k0 = 2.0 * E * 1.1;
    let params = KernelParams::new(k0, 1.1 * (k0 / E).powi(2)).unwrap();
    let report = check_criteria(&ellipse(), &params).unwrap();
    assert_eq!(report.prediction, Prediction::PositiveDefinite);
    let lambda = robin_matrix(&ellipse(), params, 128, None).unwrap();
    assert_eq!(lambda.class, Definiteness::Positive, "{:?}", lambda.eigenvalues);

    let report = check_criteria(&circle(1.0), &std()).unwrap();
    assert_eq!(report.prediction, Prediction::NegativeDefinite);

    let params = KernelParams::new(1.0, 10.0).unwrap();
    let report = check_criteria(&circle(1.0), &params).unwrap();
    assert_eq!(report.prediction, Prediction::Inconclusive);
    let lambda = robin_matrix(&circle(1.0), params, 64, None).unwrap();
    assert_eq!(lambda.class, Definiteness::Indefinite);
}

#[test]
fn moment_of_inverse_matches_lambda_inverse_bracket() {
    let multi = ellipse();
    let ctx = RobinContext::new(&multi, std(), 128, None).unwrap();
    let lambda = ctx.robin_matrix().unwrap();
    let p = smooth_trace(ctx.layer(), 5);
    let b = nalgebra::Vector3::from(ctx.bracket_vector(&p).unwrap());
    let expected = lambda.matrix.try_inverse().unwrap() * b;
    let v = assemble_v(&multi, std(), 128).unwrap();
    let q = solve_v(&v, &p).unwrap();
    let m = v.layer().moment_vector(&q);
    for c in 0..3 {
        assert!(
            (m[c] - expected[c]).abs() < 1e-7 * (1.0 + expected.norm()),
            "{m:?} vs {expected:?}"
        );
    }
}

#[test]
fn sdagger_reproduces_affine_and_inverse() {
    let multi = circle(1.0);
    let layer = SingleLayer::new(&multi, std(), 128).unwrap();
    let p = TracePair::affine(layer.discretization(), [0.0, 1.0, 0.0]);
    assert!(sdagger_trace_residual(&multi, std(), 128, &p).unwrap() < 1e-8);

    let multi = ellipse();
    let n = 128;
    let layer = SingleLayer::new(&multi, std(), n).unwrap();
    let p = smooth_trace(&layer, 9);
    assert!(sdagger_trace_residual(&multi, std(), n, &p).unwrap() < 1e-7);

    let sd = SDagger::new(&multi, std(), n, &p).unwrap();
    let v = assemble_v(&multi, std(), n).unwrap();
    let q = solve_v(&v, &p).unwrap();
    let mut worst: f64 = 0.0;
    for x in [
        Vec2::new(0.0, 0.0),
        Vec2::new(0.8, 0.2),
        Vec2::new(3.0, 0.5),
        Vec2::new(-2.0, 2.0),
        Vec2::new(10.0, -7.0),
    ] {
        let a = sd.value(x).unwrap();
        let b = v.layer().eval_field(&q, x).unwrap().u;
        worst = worst.max((a - b).abs());
    }
    assert!(worst < 1e-7, "{worst:e}");
}

#[test]
fn sdagger_refuses_degenerate_scale() {
    let multi = circle((-1.0f64).exp());
    let layer = SingleLayer::new(&multi, std(), 64).unwrap();
    let p = TracePair::affine(layer.discretization(), [1.0, 0.0, 0.0]);
    assert!(matches!(
        SDagger::new(&multi, std(), 64, &p),
        Err(Error::DegenerateScale { .. })
    ));
}
