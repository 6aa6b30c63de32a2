//! Periodic quadrature on `[0, 2π)`: the trapezoidal rule and the
//! trigonometric product rules for integrands carrying the factor
//! `ln(4 sin²((t-s)/2))` or `4 sin²((t-s)/2) ln(4 sin²((t-s)/2))`.

use std::collections::BinaryHeap;
use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};

/// Uniform periodic rule with `N = 2n` nodes `t_i = 2πi/N`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    n: usize,
    /// `log_table[k] = R(t_k)`: product weight for a node at offset `k`.
    log_table: Vec<f64>,
    /// The same for the kernel `4 sin²(τ/2) ln(4 sin²(τ/2))`.
    sin2_log_table: Vec<f64>,
}

impl QuadratureRule {
    pub fn new(n: usize) -> Result<Self> {
        if n < 8 || !n.is_multiple_of(2) {
            return Err(Error::InvalidInput(format!(
                "quadrature needs an even node count of at least 8, got {n}"
            )));
        }
        let log_table = (0..n).map(|k| log_weight(n, TAU * k as f64 / n as f64)).collect();
        let sin2_log_table = (0..n).map(|k| sin2_log_weight(n, TAU * k as f64 / n as f64)).collect();
        Ok(Self {
            n,
            log_table,
            sin2_log_table,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn node(&self, i: usize) -> f64 {
        TAU * i as f64 / self.n as f64
    }

    pub fn trapezoid_weight(&self) -> f64 {
        TAU / self.n as f64
    }

    /// Product weight coupling target node `i` with source node `j`.
    #[inline]
    pub fn log_weight_at_nodes(&self, i: usize, j: usize) -> f64 {
        self.log_table[(i + self.n - j) % self.n]
    }

    /// Product weights `R_j(t)` for an arbitrary target parameter `t`.
    pub fn log_weights(&self, t: f64) -> Vec<f64> {
        (0..self.n).map(|j| log_weight(self.n, t - self.node(j))).collect()
    }

    /// Product weight for `4 sin² ln(4 sin²)` between nodes `i` and `j`.
    #[inline]
    pub fn sin2_log_weight_at_nodes(&self, i: usize, j: usize) -> f64 {
        self.sin2_log_table[(i + self.n - j) % self.n]
    }

    /// Product weights for `4 sin² ln(4 sin²)` at an arbitrary target `t`.
    pub fn sin2_log_weights(&self, t: f64) -> Vec<f64> {
        (0..self.n).map(|j| sin2_log_weight(self.n, t - self.node(j))).collect()
    }
}

/// `R(τ) = -(2π/n) Σ_{m=1}^{n-1} cos(mτ)/m - (π/n²) cos(nτ)` with `N = 2n`.
fn log_weight(n_nodes: usize, tau: f64) -> f64 {
    let n = n_nodes / 2;
    let nf = n as f64;
    let sum: f64 = (1..n).map(|m| (m as f64 * tau).cos() / m as f64).sum();
    -TAU / nf * sum - PI / (nf * nf) * (nf * tau).cos()
}

/// Fourier coefficients of `4 sin²(τ/2) ln(4 sin²(τ/2))`:
/// `2, -3/2, 2/(m(m²-1))` for `m = 0, 1, ≥ 2`.
fn sin2_log_coefficient(m: usize) -> f64 {
    match m {
        0 => 2.0,
        1 => -1.5,
        _ => {
            let m = m as f64;
            2.0 / (m * (m * m - 1.0))
        }
    }
}

/// `S(τ) = (2π/N) [c_0 + 2 Σ_{m=1}^{n-1} c_m cos(mτ) + c_n cos(nτ)]`.
fn sin2_log_weight(n_nodes: usize, tau: f64) -> f64 {
    let n = n_nodes / 2;
    let sum: f64 = (1..n).map(|m| sin2_log_coefficient(m) * (m as f64 * tau).cos()).sum();
    TAU / n_nodes as f64
        * (sin2_log_coefficient(0) + 2.0 * sum + sin2_log_coefficient(n) * (n as f64 * tau).cos())
}

/// `(2π/N) Σ f(t_i)` for samples on a uniform periodic grid.
pub fn trapezoid_integrate(values: &[f64]) -> f64 {
    TAU / values.len() as f64 * values.iter().sum::<f64>()
}

/// Approximates `∫ A(t) ln(4 sin²((t - s)/2)) dt + ∫ B(t) dt` over one period,
/// with `s = t_target` a grid node.
pub fn log_product_integrate(rule: &QuadratureRule, a: &[f64], b: &[f64], target: usize) -> f64 {
    assert_eq!(a.len(), rule.len());
    assert_eq!(b.len(), rule.len());
    let singular: f64 = a
        .iter()
        .enumerate()
        .map(|(j, v)| rule.log_weight_at_nodes(target, j) * v)
        .sum();
    singular + trapezoid_integrate(b)
}

pub mod reference {
    //! Globally adaptive Gauss-Kronrod (7/15) integration, used as an
    //! independent oracle in tests and diagnostics.

    use super::*;

    const XGK: [f64; 8] = [
        0.991_455_371_120_812_6,
        0.949_107_912_342_758_5,
        0.864_864_423_359_769_1,
        0.741_531_185_599_394_4,
        0.586_087_235_467_691_1,
        0.405_845_151_377_397_2,
        0.207_784_955_007_898_5,
        0.0,
    ];
    const WGK: [f64; 8] = [
        0.022_935_322_010_529_22,
        0.063_092_092_629_978_55,
        0.104_790_010_322_250_2,
        0.140_653_259_715_525_9,
        0.169_004_726_639_267_9,
        0.190_350_578_064_785_4,
        0.204_432_940_075_298_9,
        0.209_482_141_084_727_8,
    ];
    const WG: [f64; 4] = [
        0.129_484_966_168_869_7,
        0.279_705_391_489_276_7,
        0.381_830_050_505_118_9,
        0.417_959_183_673_469_4,
    ];

    struct Piece {
        a: f64,
        b: f64,
        value: f64,
        error: f64,
    }

    impl PartialEq for Piece {
        fn eq(&self, other: &Self) -> bool {
            self.error == other.error
        }
    }
    impl Eq for Piece {}
    impl PartialOrd for Piece {
        fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(other))
        }
    }
    impl Ord for Piece {
        fn cmp(&self, other: &Self) -> std::cmp::Ordering {
            self.error.total_cmp(&other.error)
        }
    }

    fn kronrod(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> Piece {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let fc = f(c);
        let mut k = WGK[7] * fc;
        let mut g = WG[3] * fc;
        for i in 0..7 {
            let pair = f(c - h * XGK[i]) + f(c + h * XGK[i]);
            k += WGK[i] * pair;
            if i % 2 == 1 {
                g += WG[i / 2] * pair;
            }
        }
        Piece {
            a,
            b,
            value: k * h,
            error: ((k - g) * h).abs(),
        }
    }

    /// Integrates `f` over `[a, b]` until the summed error estimate drops
    /// below `tol` (absolute).
    pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        let mut heap = BinaryHeap::new();
        heap.push(kronrod(&f, a, b));
        for _ in 0..20_000 {
            let total: f64 = heap.iter().map(|p| p.error).sum();
            if total < tol {
                break;
            }
            let worst = heap.pop().expect("non-empty heap");
            let mid = 0.5 * (worst.a + worst.b);
            if mid <= worst.a || mid >= worst.b {
                heap.push(worst);
                break;
            }
            heap.push(kronrod(&f, worst.a, mid));
            heap.push(kronrod(&f, mid, worst.b));
        }
        // Sum small contributions first.
        let mut values: Vec<f64> = heap.into_iter().map(|p| p.value).collect();
        values.sort_by(|x, y| x.abs().total_cmp(&y.abs()));
        values.iter().sum()
    }

    /// `∫_0^{2π} f(t) dt` for a periodic `f` whose only singularity is at
    /// `t = s`, splitting the period there.
    pub fn integrate_periodic_around(f: impl Fn(f64) -> f64, s: f64, tol: f64) -> f64 {
        integrate(|u| f(s + u), 0.0, TAU, tol)
    }
}

#[cfg(test)]
mod tests {
    use super::reference::{integrate, integrate_periodic_around};
    use super::*;
    use approx::assert_abs_diff_eq;

    fn sampled(n: usize, f: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..n).map(|i| f(TAU * i as f64 / n as f64)).collect()
    }

    fn log_factor(t: f64, s: f64) -> f64 {
        (4.0 * (0.5 * (t - s)).sin().powi(2)).ln()
    }

    #[test]
    fn trapezoid_examples() {
        assert_abs_diff_eq!(trapezoid_integrate(&[1.0; 16]), TAU, epsilon = 1e-15);
        assert_abs_diff_eq!(trapezoid_integrate(&sampled(16, f64::cos)), 0.0, epsilon = 1e-15);
        let oracle = integrate(|t| t.sin().exp(), 0.0, TAU, 1e-14);
        assert_abs_diff_eq!(oracle, 7.954_926_521_012_845, epsilon = 1e-12);
        let v = trapezoid_integrate(&sampled(32, |t| t.sin().exp()));
        assert_abs_diff_eq!(v, oracle, epsilon = 1e-12);
    }

    #[test]
    fn log_integral_examples() {
        let n = 32;
        let rule = QuadratureRule::new(n).unwrap();
        let zeros = vec![0.0; n];
        for target in [0, 5, 17] {
            let s = rule.node(target);
            let ones = vec![1.0; n];
            assert_abs_diff_eq!(log_product_integrate(&rule, &ones, &zeros, target), 0.0, epsilon = 1e-14);

            for m in [1.0, 2.0] {
                let a = sampled(n, |t| (m * (t - s)).cos());
                let oracle = integrate_periodic_around(|t| (m * (t - s)).cos() * log_factor(t, s), s, 1e-13);
                assert_abs_diff_eq!(oracle, -TAU / m, epsilon = 1e-11);
                let v = log_product_integrate(&rule, &a, &zeros, target);
                assert_abs_diff_eq!(v, oracle, epsilon = 1e-11);
            }
        }
    }

    #[test]
    fn log_weights_are_exact_for_low_degree_trig_polynomials() {
        let n = 16;
        let rule = QuadratureRule::new(n).unwrap();
        let s = 0.37;
        let w = rule.log_weights(s);
        for m in 0..(n / 2) {
            for phase in [0.0, 0.4] {
                let f = |t: f64| (m as f64 * t + phase).cos();
                let v: f64 = (0..n).map(|j| w[j] * f(rule.node(j))).sum();
                // ∫ cos(m t + φ) ln(4 sin²((t-s)/2)) dt = -(2π/m) cos(m s + φ)
                let exact = if m == 0 { 0.0 } else { -TAU / m as f64 * f(s) };
                assert_abs_diff_eq!(v, exact, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn spectral_convergence_for_analytic_density() {
        let a = |t: f64| 1.0 / (1.2 + (t - 0.3).cos());
        let s_of = |rule: &QuadratureRule| rule.node(3);
        let mut errors = Vec::new();
        for n in [32, 64] {
            let rule = QuadratureRule::new(n).unwrap();
            let s = s_of(&rule);
            let oracle = integrate_periodic_around(|t| a(t) * log_factor(t, s), s, 1e-14);
            let v = log_product_integrate(&rule, &sampled(n, a), &vec![0.0; n], 3);
            errors.push((v - oracle).abs());
        }
        assert!(errors[0] / errors[1].max(1e-16) >= 100.0, "{errors:?}");
    }

    #[test]
    fn translation_invariance() {
        let n = 64;
        let rule = QuadratureRule::new(n).unwrap();
        let f = |t: f64| (t.sin() + 0.3 * (2.0 * t).cos()).exp();
        let a0 = sampled(n, |t| f(t - rule.node(0)));
        let b0 = sampled(n, |t| f(t - rule.node(0)).sqrt());
        let v0 = log_product_integrate(&rule, &a0, &b0, 0);
        for k in [1, 9, 40] {
            let a = sampled(n, |t| f(t - rule.node(k)));
            let b = sampled(n, |t| f(t - rule.node(k)).sqrt());
            let v = log_product_integrate(&rule, &a, &b, k);
            assert_abs_diff_eq!(v, v0, epsilon = 1e-13);
        }
    }

    #[test]
    fn node_weights_match_general_weights() {
        let rule = QuadratureRule::new(24).unwrap();
        let w = rule.log_weights(rule.node(7));
        for (j, wj) in w.iter().enumerate() {
            assert_abs_diff_eq!(*wj, rule.log_weight_at_nodes(7, j), epsilon = 1e-14);
        }
    }

    #[test]
    fn sin2_log_weights_are_exact_for_low_degree_trig_polynomials() {
        let n = 16;
        let rule = QuadratureRule::new(n).unwrap();
        let kernel = |t: f64, s: f64| 4.0 * (0.5 * (t - s)).sin().powi(2) * log_factor(t, s);
        for s in [0.37, rule.node(5)] {
            let w = rule.sin2_log_weights(s);
            for m in 0..(n / 2) {
                for phase in [0.0, 0.4] {
                    let f = |t: f64| (m as f64 * t + phase).cos();
                    let v: f64 = (0..n).map(|j| w[j] * f(rule.node(j))).sum();
                    let oracle = integrate_periodic_around(|t| f(t) * kernel(t, s), s, 1e-14);
                    assert_abs_diff_eq!(v, oracle, epsilon = 1e-12);
                }
            }
        }
        let w = rule.sin2_log_weights(rule.node(5));
        for (j, wj) in w.iter().enumerate() {
            assert_abs_diff_eq!(*wj, rule.sin2_log_weight_at_nodes(5, j), epsilon = 1e-14);
        }
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(QuadratureRule::new(6).is_err());
        assert!(QuadratureRule::new(15).is_err());
    }
}
