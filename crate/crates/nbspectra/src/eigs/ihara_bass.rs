//! Ihara-Bass checks: the deformed-Laplacian residual for weighted graphs and
//! the 2n quadratic linearization for unweighted ones.
//!
//! For an eigenpair `(λ, x)` of `B` off the poles `λ² = W_ij²`, the lifted
//! vector `y = S* D_W x` lies in the kernel of
//! `Δ(λ) = I - Ã(λ) + D̃(λ)` with
//! `Ã(λ)_ij = 1{i∼j} λ W_ij / (λ² - W_ij²)` and
//! `D̃(λ)_ii = Σ_{j∼i} W_ij² / (λ² - W_ij²)`.

use ndarray::Array1;
use ndarray_linalg::Eig;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::nbop::{build, vertex_lift_c};
use crate::sample::WeightedGraph;

use super::sort_desc_modulus;

/// Relative pole-distance floor: requires `min |λ² - W_ij²| > 1e-8 L²`.
const POLE_REL_TOL: f64 = 1e-8;

/// `‖Δ(λ) y‖ / ‖y‖` with `y = S* D_W x`.
pub fn ihara_bass_residual(
    graph: &WeightedGraph,
    lambda: Complex64,
    x: &Array1<Complex64>,
) -> Result<f64> {
    let op = build(graph);
    if x.len() != op.dim() {
        return Err(Error::DimensionMismatch { expected: op.dim(), got: x.len() });
    }
    let l2 = graph.max_abs_weight().powi(2);
    let lam2 = lambda * lambda;
    let min_pole = graph
        .edges()
        .iter()
        .map(|e| (lam2 - e.w * e.w).norm())
        .fold(f64::INFINITY, f64::min);
    if min_pole <= POLE_REL_TOL * l2.max(f64::MIN_POSITIVE) {
        return Err(Error::PoleProximity(min_pole));
    }

    let y = vertex_lift_c(&op, x);
    let ynorm = y.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    if ynorm == 0.0 {
        return Err(Error::ZeroVector);
    }

    // Δ(λ) y = y - Ã(λ) y + D̃(λ) y, accumulated edge by edge
    let mut out = y.clone();
    for e in graph.edges() {
        let (i, j) = (e.u as usize, e.v as usize);
        let w = e.w;
        let denom = lam2 - w * w;
        let a = lambda * w / denom;
        let dterm = w * w / denom;
        out[i] += -a * y[j] + dterm * y[i];
        out[j] += -a * y[i] + dterm * y[j];
    }
    let rnorm = out.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    Ok(rnorm / ynorm)
}

/// Spectrum of an unweighted `B` through the `2n x 2n` linearization of the
/// quadratic `λ² - λ A + (D - I)`, plus `±1` with multiplicity `m - n` each.
///
/// Rejects weighted input and graphs with `m < n` (trees and forests have a
/// wholly nilpotent `B`, and the `±1` factors would need negative
/// multiplicity).
pub fn unweighted_quadratic_spectrum(graph: &WeightedGraph) -> Result<Vec<Complex64>> {
    if graph.edges().iter().any(|e| (e.w - 1.0).abs() > 1e-12) {
        return Err(Error::WeightedInput(
            "quadratic linearization needs unit weights".into(),
        ));
    }
    let n = graph.n();
    let m = graph.m();
    if m < n {
        return Err(Error::InvalidModel(format!(
            "m = {m} < n = {n}: tree-like input rejected (B is nilpotent)"
        )));
    }
    // companion block matrix [[A, -(D - I)], [I, 0]]
    let mut c = ndarray::Array2::<f64>::zeros((2 * n, 2 * n));
    for e in graph.edges() {
        let (i, j) = (e.u as usize, e.v as usize);
        c[[i, j]] = 1.0;
        c[[j, i]] = 1.0;
    }
    for v in 0..n {
        c[[v, n + v]] = -(graph.degree(v) as f64 - 1.0);
        c[[n + v, v]] = 1.0;
    }
    let (vals, _) = c
        .eig()
        .map_err(|e| Error::Backend(format!("dgeev(companion): {e}")))?;
    let mut out: Vec<Complex64> = vals.to_vec();
    for _ in 0..(m - n) {
        out.push(Complex64::new(1.0, 0.0));
        out.push(Complex64::new(-1.0, 0.0));
    }
    sort_desc_modulus(&mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigs::dense_spectrum;
    use crate::model::{families, WeightLaw};
    use crate::nbop::build;
    use crate::sample::{sample_graph, Edge, WeightedGraph};

    fn triangle() -> WeightedGraph {
        WeightedGraph::new(
            3,
            vec![
                Edge { u: 0, v: 1, w: 1.0 },
                Edge { u: 0, v: 2, w: 1.0 },
                Edge { u: 1, v: 2, w: 1.0 },
            ],
        )
        .unwrap()
    }

    #[test]
    fn triangle_eigenpair_in_kernel() {
        let g = triangle();
        let op = build(&g);
        let rep = dense_spectrum(&op).unwrap();
        // pick the eigenpair at omega = exp(2 pi i / 3)
        let omega = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0);
        let idx = rep
            .eigenvalues
            .iter()
            .position(|l| (l - omega).norm() < 1e-9)
            .unwrap();
        let x = rep.vectors[idx].as_ref().unwrap();
        let r = ihara_bass_residual(&g, rep.eigenvalues[idx], x).unwrap();
        assert!(r < 1e-10, "residual {r}");
    }

    #[test]
    fn dense_eigenpair_sweep() {
        let model =
            families::erdos_renyi(50, 5.0, WeightLaw::uniform_interval(0.5, 1.5).unwrap())
                .unwrap();
        let g = sample_graph(&model, 23);
        let op = build(&g);
        let rep = dense_spectrum(&op).unwrap();
        let l2 = g.max_abs_weight().powi(2);
        let mut checked = 0;
        for (i, &l) in rep.eigenvalues.iter().enumerate() {
            if l.norm() <= 0.1 {
                continue;
            }
            let lam2 = l * l;
            let min_pole = g
                .edges()
                .iter()
                .map(|e| (lam2 - e.w * e.w).norm())
                .fold(f64::INFINITY, f64::min);
            if min_pole <= 1e-6 * l2 {
                continue; // off-pole pairs only
            }
            let x = rep.vectors[i].as_ref().unwrap();
            let r = ihara_bass_residual(&g, l, x).unwrap();
            assert!(r <= 1e-8, "eigenvalue {l}: residual {r}");
            checked += 1;
        }
        assert!(checked > 10);
    }

    #[test]
    fn non_eigenpair_has_large_residual() {
        let g = triangle();
        let lambda = Complex64::new(0.37, 0.0);
        let x = Array1::from_iter(
            (0..6).map(|i| Complex64::new(((i * 13 + 5) % 7) as f64 - 3.0, (i % 3) as f64)),
        );
        let r = ihara_bass_residual(&g, lambda, &x).unwrap();
        assert!(r > 1e-2, "generic-position residual {r}");
    }

    #[test]
    fn pole_proximity_rejected() {
        let g = triangle();
        let x = Array1::from_elem(6, Complex64::new(1.0, 0.0));
        assert!(matches!(
            ihara_bass_residual(&g, Complex64::new(1.0, 0.0), &x),
            Err(Error::PoleProximity(_))
        ));
    }

    #[test]
    fn quadratic_matches_triangle() {
        // roots of lambda^2 - mu lambda + 1 for mu in {2, -1, -1}: m - n = 0.
        // lambda = 1 is a defective double root of the companion, so dgeev
        // only resolves it to O(sqrt(eps)).
        let spec = unweighted_quadratic_spectrum(&triangle()).unwrap();
        assert_eq!(spec.len(), 6);
        let dense = dense_spectrum(&build(&triangle())).unwrap();
        for (a, b) in spec.iter().zip(dense.eigenvalues.iter()) {
            assert!((a.norm() - b.norm()).abs() < 1e-6);
        }
        let ones = spec
            .iter()
            .filter(|&&l| (l - Complex64::new(1.0, 0.0)).norm() < 1e-6)
            .count();
        assert_eq!(ones, 2);
    }

    #[test]
    fn quadratic_matches_dense_oracle_on_k4_and_random() {
        let k4 = WeightedGraph::new(
            4,
            [(0u32, 1u32), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
                .iter()
                .map(|&(u, v)| Edge { u, v, w: 1.0 })
                .collect(),
        )
        .unwrap();
        let model = families::erdos_renyi(40, 5.0, WeightLaw::constant(1.0)).unwrap();
        let mut graphs = vec![k4];
        for seed in 0..4 {
            let g = sample_graph(&model, seed);
            if g.m() >= g.n() {
                graphs.push(g);
            }
        }
        for g in &graphs {
            let quad = unweighted_quadratic_spectrum(g).unwrap();
            let dense = dense_spectrum(&build(g)).unwrap();
            assert_eq!(quad.len(), dense.len());
            for (a, b) in quad.iter().zip(dense.eigenvalues.iter()) {
                assert!(
                    (a.norm() - b.norm()).abs() < 1e-7,
                    "modulus mismatch {a} vs {b}"
                );
            }
        }
    }

    #[test]
    fn quadratic_rejects_trees_and_weights() {
        let path = WeightedGraph::new(
            3,
            vec![Edge { u: 0, v: 1, w: 1.0 }, Edge { u: 1, v: 2, w: 1.0 }],
        )
        .unwrap();
        assert!(matches!(
            unweighted_quadratic_spectrum(&path),
            Err(Error::InvalidModel(_))
        ));
        let weighted = WeightedGraph::new(
            3,
            vec![
                Edge { u: 0, v: 1, w: 2.0 },
                Edge { u: 0, v: 2, w: 1.0 },
                Edge { u: 1, v: 2, w: 1.0 },
            ],
        )
        .unwrap();
        assert!(matches!(
            unweighted_quadratic_spectrum(&weighted),
            Err(Error::WeightedInput(_))
        ));
    }
}
