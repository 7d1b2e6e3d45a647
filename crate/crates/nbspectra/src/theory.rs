//! Deterministic predictions: the covariance matrices of the candidate
//! vectors and their limits, predicted outliers and bulk radius, the
//! adjacency phase-transition values, block-model overlap formulas, and the
//! scalar-product diagnostics comparing operator quantities with their
//! tree-side targets.
//!
//! Scale convention: the paper normalizes `mu_1 = 1`; nothing here rescales
//! the model destructively. Formulas that assume the normalization divide by
//! `mu_1` internally (`L̃ = L / mu_1`, `rho / mu_1²`).

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    expectation_matrices, k_matvec, GraphModel, SpectralData, WeightAssignment, WeightLawKind,
};
use crate::nbop::{self, choose_ell, NBOperator};
use crate::sample::LabelSpace;

/// Covariance matrices of the candidate vectors:
/// `Γ_U^{(t)}_ij = Σ_{s=0}^t ⟨P·1, K^s φ^{i,j}⟩ / (μ_i μ_j)^s` and
/// `Γ_V^{(t)}_ij = Σ_{s=0}^t ⟨K·1, K^s φ^{i,j}⟩ / (μ_i μ_j)^{s+1}`,
/// computed by iterated `K`-matvec on `φ^{i,j} = φ_i ∘ φ_j`.
pub fn gamma_matrices(
    sd: &SpectralData,
    model: &GraphModel,
    t: usize,
) -> (Array2<f64>, Array2<f64>) {
    let r0 = sd.r0;
    assert!(r0 >= 1, "gamma matrices need r0 >= 1");
    let p1 = model.degree_vector();
    let k1 = k_matvec(model, &Array1::ones(model.n()));
    let mut gamma_u = Array2::zeros((r0, r0));
    let mut gamma_v = Array2::zeros((r0, r0));
    for i in 0..r0 {
        for j in i..r0 {
            let mut w: Array1<f64> =
                (&sd.phi.column(i).to_owned() * &sd.phi.column(j).to_owned()).to_owned();
            let mumu = sd.mu[i] * sd.mu[j];
            let (mut gu, mut gv) = (0.0, 0.0);
            let mut denom = 1.0;
            for _s in 0..=t {
                gu += p1.dot(&w) / denom;
                gv += k1.dot(&w) / (denom * mumu);
                w = k_matvec(model, &w);
                denom *= mumu;
            }
            gamma_u[[i, j]] = gu;
            gamma_u[[j, i]] = gu;
            gamma_v[[i, j]] = gv;
            gamma_v[[j, i]] = gv;
        }
    }
    (gamma_u, gamma_v)
}

const GAMMA_DENSE_LIMIT: usize = 4000;

/// Limit `γ_i = ⟨P·1, (I - μ_i^{-2} K)^{-1} φ^{i,i}⟩` of `Γ_U^{(t)}_{ii}`,
/// computed by a linear solve (the series route lives in
/// [`gamma_matrices`], so the two stay independent checks of each other).
pub fn gamma_limit(sd: &SpectralData, model: &GraphModel, i: usize) -> Result<f64> {
    if i >= sd.r0 {
        return Err(Error::InvalidModel(format!("index {i} outside r0 = {}", sd.r0)));
    }
    let mu2 = sd.mu[i] * sd.mu[i];
    if sd.rho >= mu2 {
        return Err(Error::Degenerate(format!(
            "resolvent series diverges: rho = {} >= mu_i^2 = {mu2}",
            sd.rho
        )));
    }
    let n = model.n();
    if n > GAMMA_DENSE_LIMIT {
        return Err(Error::SizeExceeded(format!(
            "gamma_limit dense solve limited to n <= {GAMMA_DENSE_LIMIT}"
        )));
    }
    use ndarray_linalg::Solve;
    let (_, kmat) = expectation_matrices(model);
    let phi_ii: Array1<f64> =
        (&sd.phi.column(i).to_owned() * &sd.phi.column(i).to_owned()).to_owned();
    let mut a = Array2::eye(n);
    a.scaled_add(-1.0 / mu2, &kmat);
    let x = a
        .solve(&phi_ii)
        .map_err(|e| Error::Backend(format!("resolvent solve: {e}")))?;
    Ok(model.degree_vector().dot(&x))
}

/// One-sided overlap bound with its vacuousness flag (the radicand of
/// `sqrt(1 - r d² L̃² rho/mu_i²)` is clamped at zero).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OverlapBound {
    pub value: f64,
    pub vacuous: bool,
}

/// Adjacency phase-transition values for one informative eigenvalue.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BbpPrediction {
    /// `nu_i = mu_i + rho / mu_i`.
    pub nu: f64,
    /// `sqrt(1 - rho / mu_i²)`.
    pub overlap: f64,
    /// Theorem hypothesis `mu_i² >= 2 L²`, recorded as a flag.
    pub mu_sq_ge_2l2: bool,
}

/// All deterministic predictions for the spectrum of `B`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Prediction {
    pub schema_version: u32,
    pub n: usize,
    /// Propagation depth from the depth formula.
    pub ell: usize,
    /// Predicted outliers `mu_i`, `i <= r0`.
    pub outliers: Vec<f64>,
    /// `sqrt(rho) ∨ L`.
    pub bulk_radius: f64,
    /// `C0^{1/ell} (sqrt(rho) ∨ L)` when a constant is supplied.
    pub bulk_radius_inflated: Option<f64>,
    /// `C0 mu_1 tau^{ell/2}`; the absolute constant inside `C0` is not
    /// derivable from theory, so this is a formula evaluation only.
    pub sigma: f64,
    pub c0: f64,
    pub c0_note: String,
    /// Eigenvector overlap lower bounds per informative eigenvalue.
    pub overlap_lower: Vec<OverlapBound>,
    /// Adjacency-side predictions where `mu_i² > rho`.
    pub bbp: Vec<Option<BbpPrediction>>,
    /// `sqrt(1 - 1/(alpha mu_i²))` when the model is an unweighted
    /// equal-degree block model.
    pub sbm_overlap: Option<Vec<f64>>,
}

const C0_NOTE: &str = "absolute constant in C0 not pinned by theory; sigma is a formula evaluation, never a test tolerance";

/// Fills a [`Prediction`] from the deterministic side. `c0` defaults to 1.
pub fn predict_b_spectrum(
    sd: &SpectralData,
    model: &GraphModel,
    c0: Option<f64>,
) -> Result<Prediction> {
    if sd.r0 == 0 {
        return Err(Error::NoInformativeEigenvalue);
    }
    let n = model.n();
    let d = model.sparsity();
    if d <= 1.0 {
        return Err(Error::InvalidModel(format!(
            "depth formula needs sparsity d > 1, got {d}"
        )));
    }
    let ell = choose_ell(n, d, sd.ltilde);
    let mu1 = sd.mu[0].abs();
    let bulk_radius = sd.rho.max(0.0).sqrt().max(sd.weight_bound);
    let c0_val = c0.unwrap_or(1.0);
    let sigma = c0_val * mu1 * sd.tau.powf(ell as f64 / 2.0);
    let bulk_radius_inflated = c0.map(|c| c.powf(1.0 / ell as f64) * bulk_radius);

    let mut overlap_lower = Vec::with_capacity(sd.r0);
    let mut bbp = Vec::with_capacity(sd.r0);
    for i in 0..sd.r0 {
        let mu2 = sd.mu[i] * sd.mu[i];
        let radicand =
            1.0 - sd.r as f64 * d * d * sd.ltilde * sd.ltilde * sd.rho / mu2;
        overlap_lower.push(OverlapBound {
            value: radicand.max(0.0).sqrt(),
            vacuous: radicand <= 0.0,
        });
        bbp.push(if mu2 > sd.rho {
            Some(BbpPrediction {
                nu: sd.mu[i] + sd.rho / sd.mu[i],
                overlap: (1.0 - sd.rho / mu2).sqrt(),
                mu_sq_ge_2l2: mu2 >= 2.0 * sd.weight_bound * sd.weight_bound,
            })
        } else {
            None
        });
    }

    let sbm_overlap = unweighted_equal_degree_alpha(model).map(|alpha| {
        (0..sd.r0)
            .map(|i| {
                let ratio = sd.mu[i] / alpha;
                (1.0 - 1.0 / (alpha * ratio * ratio)).max(0.0).sqrt()
            })
            .collect()
    });

    Ok(Prediction {
        schema_version: 1,
        n,
        ell,
        outliers: sd.mu[..sd.r0].to_vec(),
        bulk_radius,
        bulk_radius_inflated,
        sigma,
        c0: c0_val,
        c0_note: C0_NOTE.to_string(),
        overlap_lower,
        bbp,
        sbm_overlap,
    })
}

/// `alpha` when the model is an unweighted block model with `P·1 = alpha·1`.
fn unweighted_equal_degree_alpha(model: &GraphModel) -> Option<f64> {
    let unit = match model.weights() {
        WeightAssignment::Uniform(law) => matches!(law.kind(), WeightLawKind::Constant(c) if (c - 1.0).abs() < 1e-12),
        _ => false,
    };
    if !unit {
        return None;
    }
    let deg = model.degree_vector();
    let alpha = deg[0];
    if alpha <= 1.0 {
        return None;
    }
    let equal = deg.iter().all(|&x| (x - alpha).abs() <= 1e-9 * alpha.max(1.0));
    equal.then_some(alpha)
}

/// `(nu_i, overlap)` of the adjacency phase transition for eigenvalue `i`.
pub fn predict_bbp(sd: &SpectralData, i: usize) -> Result<BbpPrediction> {
    if i >= sd.r0 {
        return Err(Error::InvalidModel(format!("index {i} outside r0 = {}", sd.r0)));
    }
    let mu2 = sd.mu[i] * sd.mu[i];
    if mu2 <= sd.rho {
        return Err(Error::Degenerate(format!(
            "below transition: mu_i^2 = {mu2} <= rho = {}",
            sd.rho
        )));
    }
    Ok(BbpPrediction {
        nu: sd.mu[i] + sd.rho / sd.mu[i],
        overlap: (1.0 - sd.rho / mu2).sqrt(),
        mu_sq_ge_2l2: mu2 >= 2.0 * sd.weight_bound * sd.weight_bound,
    })
}

/// `sqrt(1 - 1/(alpha mu²))` for the unweighted block model; errors below
/// the Kesten-Stigum point `alpha mu² <= 1`.
pub fn predict_sbm_overlap(alpha: f64, mu_ratio: f64) -> Result<f64> {
    let ks = alpha * mu_ratio * mu_ratio;
    if ks <= 1.0 {
        return Err(Error::Degenerate(format!(
            "below Kesten-Stigum point: alpha mu^2 = {ks} <= 1"
        )));
    }
    Ok((1.0 - 1.0 / ks).sqrt())
}

/// Gap ratio and signal-to-noise ratio of the two-community labeled model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabeledPrediction {
    /// `tau = 2((a E_P[w²] + b E_Q[w²]) ∨ L) / (a E_P[w] - b E_Q[w])²`
    /// for the supplied weight function.
    pub tau: f64,
    /// `beta = 1/2 ∫ (af - bg)²/(af + bg) dm`, the ratio at the optimal
    /// weight function (independent of the supplied one).
    pub beta: f64,
    /// Detection feasible by the tau route: `tau < 1`.
    pub tau_feasible: bool,
    /// Detection feasible by the beta route: `beta > 1`.
    pub beta_feasible: bool,
}

/// Evaluates `tau` for a given weight function and the optimal-weight `beta`
/// on a finite label space.
pub fn labeled_tau_beta(
    a: f64,
    b: f64,
    space: &LabelSpace,
    w: &[f64],
) -> Result<LabeledPrediction> {
    space.validate()?;
    if w.len() != space.labels.len() {
        return Err(Error::InvalidModel("weight table length mismatch".into()));
    }
    let mut ep_w = 0.0;
    let mut eq_w = 0.0;
    let mut ep_w2 = 0.0;
    let mut eq_w2 = 0.0;
    let mut bound = 0.0f64;
    for (k, &wk) in w.iter().enumerate() {
        ep_w += space.p_in[k] * wk;
        eq_w += space.p_out[k] * wk;
        ep_w2 += space.p_in[k] * wk * wk;
        eq_w2 += space.p_out[k] * wk * wk;
        if space.p_in[k] + space.p_out[k] > 0.0 {
            bound = bound.max(wk.abs());
        }
    }
    let denom = a * ep_w - b * eq_w;
    if denom.abs() < 1e-14 {
        return Err(Error::Degenerate("a E_P[w] = b E_Q[w]".into()));
    }
    let tau = 2.0 * (a * ep_w2 + b * eq_w2).max(bound) / (denom * denom);

    // beta from the Radon-Nikodym densities w.r.t. m = P + Q
    let mut beta = 0.0;
    for k in 0..space.labels.len() {
        let mass = space.p_in[k] + space.p_out[k];
        if mass == 0.0 {
            continue;
        }
        let f = space.p_in[k] / mass;
        let g = space.p_out[k] / mass;
        let num = a * f - b * g;
        let den = a * f + b * g;
        if den > 0.0 {
            beta += 0.5 * mass * num * num / den;
        }
    }
    Ok(LabeledPrediction {
        tau,
        beta,
        tau_feasible: tau < 1.0,
        beta_feasible: beta > 1.0,
    })
}

/// One compared quantity of the scalar-product diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticRow {
    pub name: &'static str,
    pub i: usize,
    pub j: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
}

/// Compares the pseudo-eigenvector scalar products on a sampled operator with
/// their deterministic targets, for all pairs `(i, j)` of informative
/// eigenvalues at depth `t`:
/// `⟨B^t χ_i, χ_j⟩` vs `μ_i^t ⟨φ_i, D_P φ_j⟩`,
/// `⟨B^t χ_i, D_W χ̌_j⟩` vs `μ_i^{t+1} δ_ij`,
/// the `u`- and `v`-Gram matrices vs `Γ_U^{(t)}`, `Γ_V^{(t)}`, and the
/// squared increment norm vs its `r d³ L̃² ρ^{t+1}` budget.
pub fn pseudo_eigen_diagnostics(
    op: &NBOperator,
    sd: &SpectralData,
    model: &GraphModel,
    t: usize,
) -> Vec<DiagnosticRow> {
    let r0 = sd.r0;
    let (gamma_u, gamma_v) = gamma_matrices(sd, model, t);
    let p1 = model.degree_vector();

    // propagate chi_i and the adjoint side once per i
    let mut chis = Vec::with_capacity(r0);
    let mut bt_chis = Vec::with_capacity(r0);
    let mut bt1_chis = Vec::with_capacity(r0);
    let mut adj_dw = Vec::with_capacity(r0);
    for i in 0..r0 {
        let chi = nbop::t_lift(op, &sd.phi.column(i));
        let mut bt = chi.clone();
        for _ in 0..t {
            bt = nbop::apply(op, &bt);
        }
        let bt1 = nbop::apply(op, &bt);
        let mut v = nbop::weight_diag(op, &nbop::reversal(op, &chi));
        for _ in 0..t {
            v = nbop::apply_adjoint(op, &v);
        }
        chis.push(chi);
        bt_chis.push(bt);
        bt1_chis.push(bt1);
        adj_dw.push(v);
    }

    let mut rows = Vec::new();
    for i in 0..r0 {
        for j in 0..r0 {
            let mui_t = sd.mu[i].powi(t as i32);

            let lhs = bt_chis[i].dot(&chis[j]);
            let phi_dp_phi = sd
                .phi
                .column(i)
                .iter()
                .zip(sd.phi.column(j))
                .zip(p1.iter())
                .map(|((a, b), d)| a * b * d)
                .sum::<f64>();
            let rhs = mui_t * phi_dp_phi;
            rows.push(DiagnosticRow { name: "bt_chi_pairing", i, j, lhs, rhs, gap: (lhs - rhs).abs() });

            let dw_chk_j = nbop::weight_diag(op, &nbop::reversal(op, &chis[j]));
            let lhs = bt_chis[i].dot(&dw_chk_j);
            let rhs = if i == j { sd.mu[i].powi(t as i32 + 1) } else { 0.0 };
            rows.push(DiagnosticRow { name: "bt_chi_dw", i, j, lhs, rhs, gap: (lhs - rhs).abs() });

            let lhs = bt_chis[i].dot(&bt_chis[j]);
            let rhs = mui_t * sd.mu[j].powi(t as i32) * gamma_u[[i, j]];
            rows.push(DiagnosticRow { name: "u_gram", i, j, lhs, rhs, gap: (lhs - rhs).abs() });

            let lhs = adj_dw[i].dot(&adj_dw[j]);
            let rhs = sd.mu[i].powi(t as i32 + 1) * sd.mu[j].powi(t as i32 + 1) * gamma_v[[i, j]];
            rows.push(DiagnosticRow { name: "v_gram", i, j, lhs, rhs, gap: (lhs - rhs).abs() });

            if i == j {
                let incr = &bt1_chis[i] - &(&bt_chis[i] * sd.mu[i]);
                let lhs = incr.dot(&incr);
                let budget = sd.r as f64
                    * model.sparsity().powi(3)
                    * sd.ltilde
                    * sd.ltilde
                    * sd.rho.powi(t as i32 + 1);
                rows.push(DiagnosticRow {
                    name: "increment_budget",
                    i,
                    j,
                    lhs,
                    rhs: budget,
                    gap: (lhs - budget).max(0.0),
                });
            }
        }
    }
    rows
}

/// Exact `⟨1, K^t φ ∘ φ'⟩` with its delocalization bound `r d² L̃² ρ^t`
/// (evaluated in the `mu_1 = 1` convention, where both sides are
/// scale-invariant) and the parameter `Ψ = d L² / ρ`.
#[derive(Debug, Clone)]
pub struct KtScalar {
    pub value: f64,
    pub bound: f64,
    pub psi: f64,
}

pub fn kt_scalar(
    model: &GraphModel,
    sd: &SpectralData,
    phi: &Array1<f64>,
    phi2: &Array1<f64>,
    t: usize,
) -> KtScalar {
    let mut w: Array1<f64> = (phi * phi2).to_owned();
    for _ in 0..t {
        w = k_matvec(model, &w);
    }
    let value = w.sum();
    let d = model.sparsity();
    let bound = sd.r as f64 * d * d * sd.ltilde * sd.ltilde * sd.rho.powi(t as i32);
    let psi = d * sd.weight_bound * sd.weight_bound / sd.rho;
    KtScalar { value, bound, psi }
}
