//! Eigensolvers for the non-backtracking operator: a dense oracle for small
//! instances, a restarted Arnoldi method for sparse ones, the outlier/bulk
//! split, and the Ihara-Bass checks.

mod arnoldi;
mod dense;
mod ihara_bass;

pub use arnoldi::{arnoldi_topk, ArnoldiOpts};
pub use dense::dense_spectrum;
pub use ihara_bass::{ihara_bass_residual, unweighted_quadratic_spectrum};

use ndarray::Array1;
use num_complex::Complex64;

use crate::nbop::{apply_c, NBOperator};

/// Computed eigen-data of `B`: eigenvalues sorted by decreasing modulus,
/// eigenvectors where retained, and explicit residuals.
#[derive(Debug, Clone)]
pub struct SpectralReport {
    pub eigenvalues: Vec<Complex64>,
    /// Eigenvector per eigenvalue where retained (aligned with `eigenvalues`).
    pub vectors: Vec<Option<Array1<Complex64>>>,
    /// `‖Bξ - λξ‖ / ‖ξ‖` where the vector is retained.
    pub residuals: Vec<Option<f64>>,
    /// Convergence flag per pair (always true for the dense path).
    pub converged: Vec<bool>,
    pub method: &'static str,
}

impl SpectralReport {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Largest defect of conjugate pairing: for each eigenvalue with
    /// `|Im λ| > tol`, the distance from `conj(λ)` to the nearest reported
    /// eigenvalue.
    pub fn conjugate_pairing_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for &l in &self.eigenvalues {
            if l.im.abs() <= 1e-12 * l.norm().max(1.0) {
                continue;
            }
            let conj = l.conj();
            let best = self
                .eigenvalues
                .iter()
                .map(|&x| (x - conj).norm())
                .fold(f64::INFINITY, f64::min);
            worst = worst.max(best);
        }
        worst
    }
}

/// Result of splitting a report at a modulus threshold.
#[derive(Debug, Clone)]
pub struct OutlierSplit {
    pub threshold: f64,
    /// Indices into the report, modulus above the threshold.
    pub outliers: Vec<usize>,
    /// The remaining indices.
    pub bulk: Vec<usize>,
    /// Max modulus among non-outliers (0 when the bulk is empty).
    pub bulk_radius_hat: f64,
}

/// Splits eigenvalues into outliers (`|λ| > threshold`) and bulk. The default
/// threshold for a model is `(1 + margin)(sqrt(rho) ∨ L)` with margin 0.1.
pub fn split_outliers(report: &SpectralReport, threshold: f64) -> OutlierSplit {
    assert!(threshold > 0.0, "threshold must be positive");
    let mut outliers = Vec::new();
    let mut bulk = Vec::new();
    for (i, l) in report.eigenvalues.iter().enumerate() {
        if l.norm() > threshold {
            outliers.push(i);
        } else {
            bulk.push(i);
        }
    }
    let bulk_radius_hat = bulk
        .iter()
        .map(|&i| report.eigenvalues[i].norm())
        .fold(0.0f64, f64::max);
    OutlierSplit { threshold, outliers, bulk, bulk_radius_hat }
}

/// Default outlier threshold `(1 + margin)(sqrt(rho) ∨ L)`.
pub fn default_threshold(rho: f64, weight_bound: f64, margin: f64) -> f64 {
    (1.0 + margin) * rho.max(0.0).sqrt().max(weight_bound)
}

pub(crate) fn residual(op: &NBOperator, value: Complex64, vector: &Array1<Complex64>) -> f64 {
    let norm = vector.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return f64::INFINITY;
    }
    let bx = apply_c(op, vector);
    let mut defect = 0.0;
    for (b, x) in bx.iter().zip(vector.iter()) {
        defect += (b - value * x).norm_sqr();
    }
    defect.sqrt() / norm
}

pub(crate) fn sort_desc_modulus(values: &mut [Complex64]) {
    values.sort_by(|a, b| {
        b.norm()
            .partial_cmp(&a.norm())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.arg().partial_cmp(&b.arg()).unwrap_or(std::cmp::Ordering::Equal))
    });
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report_from(values: Vec<Complex64>) -> SpectralReport {
        let n = values.len();
        SpectralReport {
            eigenvalues: values,
            vectors: vec![None; n],
            residuals: vec![None; n],
            converged: vec![true; n],
            method: "test",
        }
    }

    #[test]
    fn split_outliers_edges() {
        let r = report_from(vec![
            Complex64::new(3.0, 0.0),
            Complex64::new(0.5, 0.5),
            Complex64::new(-0.2, 0.0),
        ]);
        let s = split_outliers(&r, 1.0);
        assert_eq!(s.outliers, vec![0]);
        assert_eq!(s.bulk, vec![1, 2]);
        assert!((s.bulk_radius_hat - 0.5f64.hypot(0.5)).abs() < 1e-15);

        // all below threshold: empty outlier set
        let s2 = split_outliers(&r, 10.0);
        assert!(s2.outliers.is_empty());

        // threshold near zero: everything is an outlier
        let s3 = split_outliers(&r, 1e-300);
        assert_eq!(s3.outliers.len(), 3);
        assert_eq!(s3.bulk_radius_hat, 0.0);
    }

    #[test]
    fn conjugate_defect_detects_missing_partner() {
        let ok = report_from(vec![Complex64::new(1.0, 2.0), Complex64::new(1.0, -2.0)]);
        assert!(ok.conjugate_pairing_defect() < 1e-15);
        let bad = report_from(vec![Complex64::new(1.0, 2.0), Complex64::new(0.9, -2.0)]);
        assert!(bad.conjugate_pairing_defect() > 0.09);
    }
}
