//! CSV tables and JSON reports. Every real is written with 17 significant
//! digits so that files round-trip exactly and identical runs produce
//! identical bytes.
//!
//! Schemas:
//! - matrix: one row per matrix row, comma separated, no header.
//! - density: `curve,index,t,q0,q1` and a trailing `# affine,a0,a1,a2` line.
//! - branches: `rho,lambda1,lambda2,lambda3,det[,sigma_min]`; lambdas are
//!   the continued branches.
//! - roots: `rho,multiplicity,branches,lambda1,lambda2,lambda3` with
//!   branches joined by `;`.
//! - field: `x,y,u,lap_u`.
//! - convergence: `n,error_vs_reference,error_vs_closed_form,asymmetry`
//!   (`nan` when not available).

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::assembly::{DiscreteDensity, Discretization};
use crate::robin::RobinMatrix;
use crate::scales::ScaleScanResult;

/// `{:.16e}`: 17 significant digits.
pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

fn join(values: impl IntoIterator<Item = f64>) -> String {
    values.into_iter().map(fmt_real).collect::<Vec<_>>().join(",")
}

pub fn matrix_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for r in 0..m.nrows() {
        out.push_str(&join(m.row(r).iter().cloned()));
        out.push('\n');
    }
    out
}

pub fn density_csv(disc: &Discretization, q: &DiscreteDensity) -> String {
    let mut out = String::from("curve,index,t,q0,q1\n");
    for g in 0..disc.total_nodes() {
        let (k, i) = disc.locate(g);
        let t = disc.samples()[k].t[i];
        let _ = writeln!(out, "{k},{i},{}", join([t, q.q0[g], q.q1[g]]));
    }
    let _ = writeln!(out, "# affine,{}", join(q.affine));
    out
}

pub fn branches_csv(scan: &ScaleScanResult, sigma_min: Option<&[f64]>) -> String {
    let mut out = String::from("rho,lambda1,lambda2,lambda3,det");
    if sigma_min.is_some() {
        out.push_str(",sigma_min");
    }
    out.push('\n');
    for (i, rho) in scan.grid.iter().enumerate() {
        let b = scan.branches[i];
        out.push_str(&join([*rho, b[0], b[1], b[2], scan.determinants[i]]));
        if let Some(s) = sigma_min {
            let _ = write!(out, ",{}", fmt_real(s[i]));
        }
        out.push('\n');
    }
    out
}

pub fn roots_csv(scan: &ScaleScanResult) -> String {
    let mut out = String::from("rho,multiplicity,branches,lambda1,lambda2,lambda3\n");
    for r in &scan.roots {
        let branches: Vec<String> = r.branches.iter().map(|b| b.to_string()).collect();
        let _ = writeln!(
            out,
            "{},{},{},{}",
            fmt_real(r.rho),
            r.multiplicity,
            branches.join(";"),
            join(r.eigenvalues)
        );
    }
    out
}

/// Flat record of a Robin matrix computation.
#[derive(Clone, Debug, Serialize)]
pub struct RobinReport {
    pub curve: String,
    pub kappa0: f64,
    pub kappa1: f64,
    pub n: usize,
    pub probe_radius: f64,
    pub shift: [f64; 2],
    pub exterior_curves: Vec<usize>,
    pub lambda: [[f64; 3]; 3],
    pub eigenvalues: [f64; 3],
    pub determinant: f64,
    pub class: String,
    pub asymmetry: f64,
    pub relative_asymmetry: f64,
    pub prediction: String,
}

impl RobinReport {
    pub fn new(curve: &str, kappa: (f64, f64), lambda: &RobinMatrix, prediction: &str) -> Self {
        Self {
            curve: curve.to_string(),
            kappa0: kappa.0,
            kappa1: kappa.1,
            n: lambda.n,
            probe_radius: lambda.probe_radius,
            shift: [lambda.shift.x, lambda.shift.y],
            exterior_curves: lambda.exterior.clone(),
            lambda: [0, 1, 2].map(|j| [0, 1, 2].map(|k| lambda.matrix[(j, k)])),
            eigenvalues: lambda.eigenvalues,
            determinant: lambda.determinant,
            class: lambda.class.as_str().to_string(),
            asymmetry: lambda.asymmetry,
            relative_asymmetry: lambda.relative_asymmetry(),
            prediction: prediction.to_string(),
        }
    }

    /// Pretty JSON; `serde_json` prints the shortest round-trip form of each
    /// real, which is deterministic.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

pub fn write_file(path: &Path, contents: &str) -> io::Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    std::fs::write(path, contents)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reals_round_trip_with_17_digits() {
        for v in [0.1, -1.0 / 3.0, std::f64::consts::PI * 1e-300, 1e300, 0.0] {
            let s = fmt_real(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_real(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn matrix_rows_are_row_major() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let csv = matrix_csv(&m);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with("1.0000000000000000e0,2.0"));
    }
}
