//! Deterministic side of the model: the couple `(P, W)`, its expectation
//! matrices `Q` and `K`, derived spectral parameters, and the admissibility
//! checks.
//!
//! `Q = P ∘ E[W]` and `K = P ∘ E[W ∘ W]` are the entrywise mean and second
//! moment of the weighted adjacency matrix. Everything downstream (predicted
//! outliers, bulk radius, overlap bounds) is a function of their spectra.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, UPLO};

use crate::error::{Error, Result};

/// A bounded weight distribution with closed-form moments.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightLawKind {
    Constant(f64),
    FiniteDiscrete { values: Vec<f64>, probs: Vec<f64> },
    UniformInterval { lo: f64, hi: f64 },
}

/// Weight law together with its bound `L` and first two moments.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightLaw {
    kind: WeightLawKind,
    bound: f64,
    m1: f64,
    m2: f64,
}

impl WeightLaw {
    pub fn constant(c: f64) -> Self {
        WeightLaw {
            kind: WeightLawKind::Constant(c),
            bound: c.abs(),
            m1: c,
            m2: c * c,
        }
    }

    pub fn finite_discrete(values: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.len() != probs.len() {
            return Err(Error::InvalidLaw(
                "finite-discrete law needs matching nonempty value/prob lists".into(),
            ));
        }
        if probs.iter().any(|&p| p < 0.0) {
            return Err(Error::InvalidLaw("negative probability".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidLaw(format!(
                "probabilities sum to {total}, expected 1"
            )));
        }
        let bound = values.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        let m1: f64 = values.iter().zip(&probs).map(|(&v, &p)| v * p).sum();
        let m2: f64 = values.iter().zip(&probs).map(|(&v, &p)| v * v * p).sum();
        Ok(WeightLaw {
            kind: WeightLawKind::FiniteDiscrete { values, probs },
            bound,
            m1,
            m2,
        })
    }

    pub fn uniform_interval(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidLaw(format!("bad interval [{lo}, {hi}]")));
        }
        Ok(WeightLaw {
            kind: WeightLawKind::UniformInterval { lo, hi },
            bound: lo.abs().max(hi.abs()),
            m1: 0.5 * (lo + hi),
            m2: (lo * lo + lo * hi + hi * hi) / 3.0,
        })
    }

    /// Rademacher weights: ±1 with probability 1/2 each (mean zero).
    pub fn rademacher() -> Self {
        WeightLaw::finite_discrete(vec![-1.0, 1.0], vec![0.5, 0.5]).unwrap()
    }

    pub fn kind(&self) -> &WeightLawKind {
        &self.kind
    }

    /// Almost-sure bound `L` on `|W|`.
    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn mean(&self) -> f64 {
        self.m1
    }

    pub fn second_moment(&self) -> f64 {
        self.m2
    }

    /// The law of `c·W`.
    pub fn scaled(&self, c: f64) -> Self {
        match &self.kind {
            WeightLawKind::Constant(v) => WeightLaw::constant(c * v),
            WeightLawKind::FiniteDiscrete { values, probs } => WeightLaw::finite_discrete(
                values.iter().map(|&v| c * v).collect(),
                probs.clone(),
            )
            .expect("scaling preserves law validity"),
            WeightLawKind::UniformInterval { lo, hi } => {
                let (a, b) = if c >= 0.0 { (c * lo, c * hi) } else { (c * hi, c * lo) };
                if a == b {
                    WeightLaw::constant(a)
                } else {
                    WeightLaw::uniform_interval(a, b).expect("scaled interval stays valid")
                }
            }
        }
    }

    pub fn sample(&self, rng: &mut rand_chacha::ChaCha8Rng) -> f64 {
        use rand::Rng;
        match &self.kind {
            WeightLawKind::Constant(v) => *v,
            WeightLawKind::FiniteDiscrete { values, probs } => {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                for (v, p) in values.iter().zip(probs) {
                    acc += p;
                    if u < acc {
                        return *v;
                    }
                }
                *values.last().unwrap()
            }
            WeightLawKind::UniformInterval { lo, hi } => rng.gen_range(*lo..*hi),
        }
    }
}

/// Edge-probability structure: dense matrix at desk scale, or the symbolic
/// block form `P = Θ M Θ*` for block models (kept symbolic so spectra are
/// computed on the k×k matrix and lifted, never on the n×n one).
#[derive(Debug, Clone)]
pub enum EdgeProbabilities {
    Dense(Array2<f64>),
    Block {
        /// Per-vertex block label in `[k]`.
        theta: Vec<usize>,
        /// k×k symmetric matrix of per-pair probabilities (already divided by n).
        m: Array2<f64>,
    },
}

/// Weight-law assignment per vertex pair.
#[derive(Debug, Clone)]
pub enum WeightAssignment {
    /// One law for every pair.
    Uniform(WeightLaw),
    /// Law depends on the block pair; only valid with block probabilities.
    PerBlock(Array2<WeightLaw>),
    /// Deterministic per-pair weights given by a symmetric matrix
    /// (matrix-completion models).
    PerPairConstant(Array2<f64>),
}

/// The couple `(P, W)`: edge probabilities plus per-pair weight laws, with a
/// declared sparsity bound `d` such that `P_ij ≤ d/n`.
#[derive(Debug, Clone)]
pub struct GraphModel {
    n: usize,
    probs: EdgeProbabilities,
    weights: WeightAssignment,
    d: f64,
}

impl GraphModel {
    pub fn new(
        n: usize,
        probs: EdgeProbabilities,
        weights: WeightAssignment,
        d: f64,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidModel("empty vertex set".into()));
        }
        match &probs {
            EdgeProbabilities::Dense(p) => {
                if p.nrows() != n || p.ncols() != n {
                    return Err(Error::InvalidModel(format!(
                        "P is {}x{}, expected {n}x{n}",
                        p.nrows(),
                        p.ncols()
                    )));
                }
                for i in 0..n {
                    for j in 0..n {
                        let v = p[[i, j]];
                        if !(0.0..=1.0).contains(&v) {
                            return Err(Error::InvalidModel(format!("P[{i},{j}] = {v}")));
                        }
                        if (v - p[[j, i]]).abs() > 1e-14 {
                            return Err(Error::InvalidModel("P not symmetric".into()));
                        }
                    }
                }
            }
            EdgeProbabilities::Block { theta, m } => {
                let k = m.nrows();
                if m.ncols() != k || theta.len() != n {
                    return Err(Error::InvalidModel("block shape mismatch".into()));
                }
                if theta.iter().any(|&t| t >= k) {
                    return Err(Error::InvalidModel("block label out of range".into()));
                }
                for a in 0..k {
                    for b in 0..k {
                        let v = m[[a, b]];
                        if !(0.0..=1.0).contains(&v) || (v - m[[b, a]]).abs() > 1e-14 {
                            return Err(Error::InvalidModel(format!("bad block prob M[{a},{b}]")));
                        }
                    }
                }
            }
        }
        match (&probs, &weights) {
            (EdgeProbabilities::Dense(_), WeightAssignment::PerBlock(_)) => {
                return Err(Error::InvalidModel(
                    "per-block weights require block probabilities".into(),
                ));
            }
            (_, WeightAssignment::PerPairConstant(w)) => {
                if w.nrows() != n || w.ncols() != n {
                    return Err(Error::InvalidModel("weight matrix shape mismatch".into()));
                }
            }
            (EdgeProbabilities::Block { m, .. }, WeightAssignment::PerBlock(laws)) => {
                if laws.nrows() != m.nrows() || laws.ncols() != m.ncols() {
                    return Err(Error::InvalidModel("per-block law shape mismatch".into()));
                }
            }
            _ => {}
        }
        let model = GraphModel { n, probs, weights, d };
        let pmax = model.max_prob();
        if pmax > (d / n as f64) * (1.0 + 1e-12) || pmax > 1.0 {
            return Err(Error::InvalidModel(format!(
                "sparsity violated: max P_ij = {pmax:.6} > d/n = {:.6}",
                d / n as f64
            )));
        }
        Ok(model)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Declared sparsity bound `d` (so `P_ij ≤ d/n`).
    pub fn sparsity(&self) -> f64 {
        self.d
    }

    pub fn probs(&self) -> &EdgeProbabilities {
        &self.probs
    }

    pub fn weights(&self) -> &WeightAssignment {
        &self.weights
    }

    pub fn prob(&self, i: usize, j: usize) -> f64 {
        match &self.probs {
            EdgeProbabilities::Dense(p) => p[[i, j]],
            EdgeProbabilities::Block { theta, m } => m[[theta[i], theta[j]]],
        }
    }

    fn max_prob(&self) -> f64 {
        match &self.probs {
            EdgeProbabilities::Dense(p) => p.iter().fold(0.0f64, |a, &v| a.max(v)),
            EdgeProbabilities::Block { m, .. } => m.iter().fold(0.0f64, |a, &v| a.max(v)),
        }
    }

    /// First and second moment of the weight law of pair `(i, j)`.
    pub fn weight_moments(&self, i: usize, j: usize) -> (f64, f64) {
        match &self.weights {
            WeightAssignment::Uniform(law) => (law.mean(), law.second_moment()),
            WeightAssignment::PerBlock(laws) => {
                let (a, b) = self.block_pair(i, j);
                let law = &laws[[a, b]];
                (law.mean(), law.second_moment())
            }
            WeightAssignment::PerPairConstant(w) => {
                let v = w[[i, j]];
                (v, v * v)
            }
        }
    }

    fn block_pair(&self, i: usize, j: usize) -> (usize, usize) {
        match &self.probs {
            EdgeProbabilities::Block { theta, .. } => (theta[i], theta[j]),
            EdgeProbabilities::Dense(_) => unreachable!("per-block weights imply block probs"),
        }
    }

    pub fn sample_weight(&self, i: usize, j: usize, rng: &mut rand_chacha::ChaCha8Rng) -> f64 {
        match &self.weights {
            WeightAssignment::Uniform(law) => law.sample(rng),
            WeightAssignment::PerBlock(laws) => {
                let (a, b) = self.block_pair(i, j);
                laws[[a, b]].sample(rng)
            }
            WeightAssignment::PerPairConstant(w) => w[[i, j]],
        }
    }

    /// Almost-sure bound on `|W_ij|` over all pairs.
    pub fn weight_bound(&self) -> f64 {
        match &self.weights {
            WeightAssignment::Uniform(law) => law.bound(),
            WeightAssignment::PerBlock(laws) => {
                laws.iter().fold(0.0f64, |a, l| a.max(l.bound()))
            }
            WeightAssignment::PerPairConstant(w) => {
                w.iter().fold(0.0f64, |a, &v| a.max(v.abs()))
            }
        }
    }

    /// Average degrees `d_i = Σ_j P_ij`.
    pub fn degree_vector(&self) -> Array1<f64> {
        match &self.probs {
            EdgeProbabilities::Dense(p) => p.sum_axis(ndarray::Axis(1)),
            EdgeProbabilities::Block { theta, m } => {
                let sizes = block_sizes(theta, m.nrows());
                let mut row = vec![0.0; m.nrows()];
                for (a, r) in row.iter_mut().enumerate() {
                    *r = (0..m.nrows()).map(|b| sizes[b] as f64 * m[[a, b]]).sum();
                }
                Array1::from_iter(theta.iter().map(|&t| row[t]))
            }
        }
    }

    /// Multiplies every weight law by the constant `c`; `Q` scales by `c`
    /// and `K` by `c²`.
    pub fn scaled_weights(&self, c: f64) -> Self {
        let weights = match &self.weights {
            WeightAssignment::Uniform(law) => WeightAssignment::Uniform(law.scaled(c)),
            WeightAssignment::PerBlock(laws) => {
                WeightAssignment::PerBlock(laws.map(|l| l.scaled(c)))
            }
            WeightAssignment::PerPairConstant(w) => {
                WeightAssignment::PerPairConstant(w.map(|&v| c * v))
            }
        };
        GraphModel { weights, ..self.clone() }
    }
}

pub(crate) fn block_sizes(theta: &[usize], k: usize) -> Vec<usize> {
    let mut sizes = vec![0usize; k];
    for &t in theta {
        sizes[t] += 1;
    }
    sizes
}

/// Dense expectation matrices `Q_ij = P_ij · E[W_ij]` and
/// `K_ij = P_ij · E[W_ij²]`.
pub fn expectation_matrices(model: &GraphModel) -> (Array2<f64>, Array2<f64>) {
    let n = model.n();
    let mut q = Array2::zeros((n, n));
    let mut k = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let p = model.prob(i, j);
            if p != 0.0 {
                let (m1, m2) = model.weight_moments(i, j);
                q[[i, j]] = p * m1;
                k[[i, j]] = p * m2;
            }
        }
    }
    (q, k)
}

/// Eigen-data of `Q` and `K` plus the derived class parameters.
#[derive(Debug, Clone)]
pub struct SpectralData {
    /// Eigenvalues of `Q` sorted by decreasing modulus (all of them for the
    /// dense path, the `r` structural ones for the block path).
    pub mu: Vec<f64>,
    /// Matching orthonormal eigenvectors, one column per entry of `mu`.
    pub phi: Array2<f64>,
    /// Rank of `Q` (relative threshold `1e-10 · |mu_1|`).
    pub r: usize,
    /// Spectral radius of `K`.
    pub rho: f64,
    /// Rank of `K`.
    pub s: usize,
    /// Number of informative eigenvalues: `|mu_i| > max(sqrt(rho), L)`.
    pub r0: usize,
    /// Tightest admissible gap ratio `(sqrt(rho) ∨ L) / |mu_{r0}|`.
    pub tau: f64,
    /// Almost-sure weight bound `L`.
    pub weight_bound: f64,
    /// `L / |mu_1|`.
    pub ltilde: f64,
    /// Delocalization constant: `sqrt(n) · max_{k ≤ r} ||phi_k||_inf`.
    pub b: f64,
}

const RANK_RELATIVE_TOL: f64 = 1e-10;

fn sorted_by_modulus(vals: &Array1<f64>) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..vals.len()).collect();
    idx.sort_by(|&a, &b| {
        vals[b]
            .abs()
            .partial_cmp(&vals[a].abs())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    idx
}

/// Spectral data from dense symmetric `Q`, `K` and the weight bound `L`.
///
/// Fails with [`Error::NoInformativeEigenvalue`] when no eigenvalue of `Q`
/// clears the threshold `max(sqrt(rho), L)`.
pub fn spectral_data(q: &Array2<f64>, k: &Array2<f64>, weight_bound: f64) -> Result<SpectralData> {
    let n = q.nrows();
    if q.ncols() != n || k.nrows() != n || k.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: q.ncols() });
    }
    let (q_vals, q_vecs) = q
        .eigh(UPLO::Lower)
        .map_err(|e| Error::Backend(format!("eigh(Q): {e}")))?;
    let (k_vals, _) = k
        .eigh(UPLO::Lower)
        .map_err(|e| Error::Backend(format!("eigh(K): {e}")))?;

    let order = sorted_by_modulus(&q_vals);
    let mu: Vec<f64> = order.iter().map(|&i| q_vals[i]).collect();
    let mut phi = Array2::zeros((n, n));
    for (c, &i) in order.iter().enumerate() {
        phi.column_mut(c).assign(&q_vecs.column(i));
    }
    let rho = k_vals.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let k_top = rho;
    let s = k_vals
        .iter()
        .filter(|&&v| v.abs() > RANK_RELATIVE_TOL * k_top.max(f64::MIN_POSITIVE))
        .count();
    finish_spectral_data(mu, phi, rho, s, weight_bound, n)
}

fn finish_spectral_data(
    mu: Vec<f64>,
    phi: Array2<f64>,
    rho: f64,
    s: usize,
    weight_bound: f64,
    n: usize,
) -> Result<SpectralData> {
    let mu1 = mu.first().copied().unwrap_or(0.0).abs();
    let r = mu
        .iter()
        .filter(|&&v| v.abs() > RANK_RELATIVE_TOL * mu1.max(f64::MIN_POSITIVE))
        .count();
    let threshold = rho.max(0.0).sqrt().max(weight_bound);
    let r0 = mu
        .iter()
        .take(r)
        .filter(|&&v| v.abs() > threshold)
        .count();
    if r0 == 0 {
        return Err(Error::NoInformativeEigenvalue);
    }
    let tau = threshold / mu[r0 - 1].abs();
    let b = (n as f64).sqrt()
        * (0..r)
            .map(|c| phi.column(c).iter().fold(0.0f64, |a, &v| a.max(v.abs())))
            .fold(0.0f64, f64::max);
    Ok(SpectralData {
        mu,
        phi,
        r,
        rho,
        s,
        r0,
        tau,
        weight_bound,
        ltilde: weight_bound / mu1,
        b,
    })
}

/// Spectral data straight from a model, dispatching on its structure: block
/// models go through the k×k lifted eigenproblem, dense ones through the full
/// symmetric solve.
pub fn spectral_data_from_model(model: &GraphModel) -> Result<SpectralData> {
    match (&model.probs, &model.weights) {
        (EdgeProbabilities::Block { theta, m }, w) => {
            let k = m.nrows();
            let sizes = block_sizes(theta, k);
            if sizes.iter().any(|&s| s == 0) {
                // fall back: empty blocks break the lift
                let (q, kk) = expectation_matrices(model);
                return spectral_data(&q, &kk, model.weight_bound());
            }
            let mut q_blk = Array2::zeros((k, k));
            let mut k_blk = Array2::zeros((k, k));
            for a in 0..k {
                for b in 0..k {
                    let (m1, m2) = match w {
                        WeightAssignment::Uniform(law) => (law.mean(), law.second_moment()),
                        WeightAssignment::PerBlock(laws) => {
                            (laws[[a, b]].mean(), laws[[a, b]].second_moment())
                        }
                        WeightAssignment::PerPairConstant(_) => {
                            let (q, kk) = expectation_matrices(model);
                            return spectral_data(&q, &kk, model.weight_bound());
                        }
                    };
                    q_blk[[a, b]] = m[[a, b]] * m1;
                    k_blk[[a, b]] = m[[a, b]] * m2;
                }
            }
            let (mu, phi) = lifted_block_eigen(&q_blk, &sizes, theta)?;
            let (k_vals, _) = symmetrized_block_eigen(&k_blk, &sizes)?;
            let rho = k_vals.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
            let s = k_vals
                .iter()
                .filter(|&&v| v.abs() > RANK_RELATIVE_TOL * rho.max(f64::MIN_POSITIVE))
                .count();
            finish_spectral_data(mu, phi, rho, s, model.weight_bound(), model.n())
        }
        _ => {
            let (q, k) = expectation_matrices(model);
            spectral_data(&q, &k, model.weight_bound())
        }
    }
}

/// Eigen-decomposition of the symmetrized block matrix
/// `D_s^{1/2} M D_s^{1/2}` with `D_s = diag(block sizes)`; its eigenvalues
/// are the nonzero eigenvalues of `Θ M Θ*`.
fn symmetrized_block_eigen(
    m_blk: &Array2<f64>,
    sizes: &[usize],
) -> Result<(Array1<f64>, Array2<f64>)> {
    let k = m_blk.nrows();
    let mut sym = Array2::zeros((k, k));
    for a in 0..k {
        for b in 0..k {
            sym[[a, b]] = (sizes[a] as f64).sqrt() * m_blk[[a, b]] * (sizes[b] as f64).sqrt();
        }
    }
    sym.eigh(UPLO::Lower)
        .map_err(|e| Error::Backend(format!("eigh(block): {e}")))
}

fn lifted_block_eigen(
    q_blk: &Array2<f64>,
    sizes: &[usize],
    theta: &[usize],
) -> Result<(Vec<f64>, Array2<f64>)> {
    let (vals, vecs) = symmetrized_block_eigen(q_blk, sizes)?;
    let order = sorted_by_modulus(&vals);
    let n = theta.len();
    let k = sizes.len();
    let mu: Vec<f64> = order.iter().map(|&i| vals[i]).collect();
    // phi_x = psi_{theta(x)} / sqrt(size of block theta(x)); columns stay
    // orthonormal because the psi are.
    let mut phi = Array2::zeros((n, k));
    for (c, &i) in order.iter().enumerate() {
        for (x, &t) in theta.iter().enumerate() {
            phi[[x, c]] = vecs[[t, i]] / (sizes[t] as f64).sqrt();
        }
    }
    Ok((mu, phi))
}

/// Per-condition admissibility report for the class `C_n(r, d, b, tau, L)`.
#[derive(Debug, Clone)]
pub struct ConditionReport {
    pub name: &'static str,
    pub value: f64,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct ClassReport {
    pub conditions: Vec<ConditionReport>,
    pub warnings: Vec<String>,
    pub r: usize,
    pub s: usize,
    pub d: f64,
    pub b: f64,
    pub tau: f64,
    pub weight_bound: f64,
    pub min_degree: f64,
    pub min_k_row: f64,
    pub pass: bool,
}

const K_ROW_WARN_FLOOR: f64 = 1e-6;

/// Checks membership in the admissibility class: rank structure,
/// delocalization, sparsity, boundedness, and the threshold-gap condition.
/// Low degrees and near-zero `K·1` entries are reported as warnings, not
/// failures.
pub fn class_check(model: &GraphModel, sd: &SpectralData) -> ClassReport {
    let n = model.n() as f64;
    let mut conditions = Vec::new();
    let mut warnings = Vec::new();

    // 1. rank of K at most r^2 (recorded; never enforced as an error).
    conditions.push(ConditionReport {
        name: "rank: s <= r^2",
        value: sd.s as f64,
        pass: sd.s <= sd.r * sd.r,
    });
    // 2. delocalization: measured b, finite by construction.
    conditions.push(ConditionReport {
        name: "delocalization b",
        value: sd.b,
        pass: sd.b.is_finite(),
    });
    // 3. sparsity P_ij <= d/n for the declared d.
    let pmax = model.max_prob();
    conditions.push(ConditionReport {
        name: "sparsity: max P_ij <= d/n",
        value: pmax * n,
        pass: pmax <= model.sparsity() / n * (1.0 + 1e-12),
    });
    // 4. independent entries: holds by construction of the samplers.
    conditions.push(ConditionReport {
        name: "independent weights",
        value: 1.0,
        pass: true,
    });
    // 5. |W| <= L almost surely: holds for every bounded law in the crate.
    conditions.push(ConditionReport {
        name: "bounded weights",
        value: sd.weight_bound,
        pass: sd.weight_bound.is_finite(),
    });
    // 6. threshold gap: tau < 1.
    conditions.push(ConditionReport {
        name: "threshold gap tau < 1",
        value: sd.tau,
        pass: sd.tau < 1.0,
    });

    let degrees = model.degree_vector();
    let min_degree = degrees.iter().fold(f64::INFINITY, |a, &v| a.min(v));
    if min_degree < 1.0 {
        warnings.push(format!("min average degree {min_degree:.4} < 1"));
    }
    let k1 = k_matvec(model, &Array1::ones(model.n()));
    let min_k_row = k1.iter().fold(f64::INFINITY, |a, &v| a.min(v));
    if min_k_row < K_ROW_WARN_FLOOR {
        warnings.push(format!(
            "min entry of K·1 = {min_k_row:.3e} is not bounded away from zero"
        ));
    }

    let pass = conditions.iter().all(|c| c.pass);
    ClassReport {
        conditions,
        warnings,
        r: sd.r,
        s: sd.s,
        d: model.sparsity(),
        b: sd.b,
        tau: sd.tau,
        weight_bound: sd.weight_bound,
        min_degree,
        min_k_row,
        pass,
    }
}

/// `K v` without materializing `K` for block models.
pub fn k_matvec(model: &GraphModel, v: &Array1<f64>) -> Array1<f64> {
    moment_matvec(model, v, false)
}

/// `Q v` without materializing `Q` for block models.
pub fn q_matvec(model: &GraphModel, v: &Array1<f64>) -> Array1<f64> {
    moment_matvec(model, v, true)
}

fn moment_matvec(model: &GraphModel, v: &Array1<f64>, first_moment: bool) -> Array1<f64> {
    let n = model.n();
    assert_eq!(v.len(), n, "vector length mismatch");
    match (&model.probs, &model.weights) {
        (EdgeProbabilities::Block { theta, m }, w)
            if !matches!(w, WeightAssignment::PerPairConstant(_)) =>
        {
            let k = m.nrows();
            let mut block_sums = vec![0.0f64; k];
            for (x, &t) in theta.iter().enumerate() {
                block_sums[t] += v[x];
            }
            let mut row = vec![0.0f64; k];
            for (a, r) in row.iter_mut().enumerate() {
                for b in 0..k {
                    let (m1, m2) = match w {
                        WeightAssignment::Uniform(law) => (law.mean(), law.second_moment()),
                        WeightAssignment::PerBlock(laws) => {
                            (laws[[a, b]].mean(), laws[[a, b]].second_moment())
                        }
                        WeightAssignment::PerPairConstant(_) => unreachable!(),
                    };
                    let mom = if first_moment { m1 } else { m2 };
                    *r += m[[a, b]] * mom * block_sums[b];
                }
            }
            Array1::from_iter(theta.iter().map(|&t| row[t]))
        }
        _ => {
            let (q, kk) = expectation_matrices(model);
            if first_moment {
                q.dot(v)
            } else {
                kk.dot(v)
            }
        }
    }
}

/// Convenience constructors for the standard test models.
pub mod families {
    use super::*;

    /// Homogeneous model: `P_ij = d0/n` for all pairs, one weight law.
    pub fn erdos_renyi(n: usize, d0: f64, law: WeightLaw) -> Result<GraphModel> {
        let m = Array2::from_elem((1, 1), d0 / n as f64);
        GraphModel::new(
            n,
            EdgeProbabilities::Block { theta: vec![0; n], m },
            WeightAssignment::Uniform(law),
            d0,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn er_dense(n: usize, d0: f64) -> GraphModel {
        let p = Array2::from_elem((n, n), d0 / n as f64);
        GraphModel::new(
            n,
            EdgeProbabilities::Dense(p),
            WeightAssignment::Uniform(WeightLaw::constant(1.0)),
            d0,
        )
        .unwrap()
    }

    #[test]
    fn law_moments_match_closed_forms() {
        let c = WeightLaw::constant(3.0);
        assert_eq!((c.mean(), c.second_moment(), c.bound()), (3.0, 9.0, 3.0));

        let d = WeightLaw::finite_discrete(vec![-1.0, 2.0], vec![0.25, 0.75]).unwrap();
        assert!((d.mean() - (0.25 * -1.0 + 0.75 * 2.0)).abs() < 1e-15);
        assert!((d.second_moment() - (0.25 + 0.75 * 4.0)).abs() < 1e-15);
        assert_eq!(d.bound(), 2.0);

        let u = WeightLaw::uniform_interval(-1.0, 2.0).unwrap();
        assert!((u.mean() - 0.5).abs() < 1e-15);
        assert!((u.second_moment() - 1.0).abs() < 1e-15);
        assert_eq!(u.bound(), 2.0);
        // m1^2 <= m2 <= L^2
        assert!(u.mean().powi(2) <= u.second_moment());
        assert!(u.second_moment() <= u.bound().powi(2));
    }

    #[test]
    fn law_rejects_bad_probs() {
        assert!(WeightLaw::finite_discrete(vec![1.0, 2.0], vec![0.5, 0.6]).is_err());
        assert!(WeightLaw::finite_discrete(vec![1.0], vec![-1.0]).is_err());
        assert!(WeightLaw::uniform_interval(2.0, 1.0).is_err());
    }

    #[test]
    fn expectation_matrices_unit_weights() {
        // W ≡ 1 on any P gives Q = P and K = P.
        let model = er_dense(6, 3.0);
        let (q, k) = expectation_matrices(&model);
        let p = Array2::from_elem((6, 6), 0.5);
        assert!(q.iter().zip(p.iter()).all(|(a, b)| (a - b).abs() < 1e-15));
        assert!(k.iter().zip(p.iter()).all(|(a, b)| (a - b).abs() < 1e-15));
    }

    #[test]
    fn expectation_matrices_centered_weights() {
        // W = ±1 with prob 1/2: Q = 0, K = P.
        let n = 5;
        let p = Array2::from_elem((n, n), 0.4);
        let model = GraphModel::new(
            n,
            EdgeProbabilities::Dense(p.clone()),
            WeightAssignment::Uniform(WeightLaw::rademacher()),
            2.0,
        )
        .unwrap();
        let (q, k) = expectation_matrices(&model);
        assert!(q.iter().all(|&v| v.abs() < 1e-15));
        assert!(k.iter().zip(p.iter()).all(|(a, b)| (a - b).abs() < 1e-15));
    }

    #[test]
    fn expectation_matrices_direct_substitution() {
        // n=4, P ≡ 0.5, W ≡ 3 → Q ≡ 1.5, K ≡ 4.5.
        let n = 4;
        let p = Array2::from_elem((n, n), 0.5);
        let model = GraphModel::new(
            n,
            EdgeProbabilities::Dense(p),
            WeightAssignment::Uniform(WeightLaw::constant(3.0)),
            2.0,
        )
        .unwrap();
        let (q, k) = expectation_matrices(&model);
        assert!(q.iter().all(|&v| (v - 1.5).abs() < 1e-15));
        assert!(k.iter().all(|&v| (v - 4.5).abs() < 1e-15));
    }

    #[test]
    fn spectral_data_rank_one() {
        // P = (d0/n)·all-ones, W ≡ 1, d0 = 4: mu1 = 4, rho = 4, r0 = 1, tau = 0.5.
        let model = er_dense(100, 4.0);
        let (q, k) = expectation_matrices(&model);
        let sd = spectral_data(&q, &k, 1.0).unwrap();
        assert!((sd.mu[0] - 4.0).abs() < 1e-10);
        assert!((sd.rho - 4.0).abs() < 1e-10);
        assert_eq!(sd.r, 1);
        assert_eq!(sd.r0, 1);
        assert!((sd.tau - 0.5).abs() < 1e-12);
        // b = 1 for the constant eigenvector.
        assert!((sd.b - 1.0).abs() < 1e-8);
    }

    #[test]
    fn spectral_data_two_block() {
        // Symmetric 2-block, pi = (1/2, 1/2), W ≡ 1: mu = {(a+b)/2, (a-b)/2}.
        let n = 200;
        let (a, b) = (16.0, 4.0);
        let nf = n as f64;
        let mut theta = vec![0usize; n];
        for t in theta.iter_mut().skip(n / 2) {
            *t = 1;
        }
        let m = ndarray::arr2(&[[a / nf, b / nf], [b / nf, a / nf]]);
        let model = GraphModel::new(
            n,
            EdgeProbabilities::Block { theta, m },
            WeightAssignment::Uniform(WeightLaw::constant(1.0)),
            a,
        )
        .unwrap();
        let sd = spectral_data_from_model(&model).unwrap();
        assert!((sd.mu[0] - (a + b) / 2.0).abs() < 1e-10);
        assert!((sd.mu[1] - (a - b) / 2.0).abs() < 1e-10);
        assert_eq!(sd.r0, 2);
        // block path and dense path agree
        let (q, k) = expectation_matrices(&model);
        let sd_dense = spectral_data(&q, &k, 1.0).unwrap();
        assert!((sd.mu[0] - sd_dense.mu[0]).abs() < 1e-8);
        assert!((sd.mu[1] - sd_dense.mu[1]).abs() < 1e-8);
        assert!((sd.rho - sd_dense.rho).abs() < 1e-8);
    }

    #[test]
    fn spectral_data_centered_is_error() {
        // Q = 0 from centered weights: no informative eigenvalue.
        let n = 5;
        let p = Array2::from_elem((n, n), 0.4);
        let model = GraphModel::new(
            n,
            EdgeProbabilities::Dense(p),
            WeightAssignment::Uniform(WeightLaw::rademacher()),
            2.0,
        )
        .unwrap();
        let (q, k) = expectation_matrices(&model);
        match spectral_data(&q, &k, 1.0) {
            Err(Error::NoInformativeEigenvalue) => {}
            other => panic!("expected NoInformativeEigenvalue, got {other:?}"),
        }
    }

    #[test]
    fn class_check_sparsity_failure() {
        // A model whose declared d underestimates max P_ij fails condition 3.
        let n = 10;
        let mut p = Array2::from_elem((n, n), 0.2);
        p[[0, 1]] = 0.4;
        p[[1, 0]] = 0.4;
        // declare d = 4 so d/n = 0.4: valid construction
        let model = GraphModel::new(
            n,
            EdgeProbabilities::Dense(p),
            WeightAssignment::Uniform(WeightLaw::constant(1.0)),
            4.0,
        )
        .unwrap();
        let (q, k) = expectation_matrices(&model);
        let sd = spectral_data(&q, &k, 1.0).unwrap();
        // re-declare a smaller d to simulate "some P_ij = 2d/n"
        let bad = GraphModel { d: 2.0, ..model };
        let report = class_check(&bad, &sd);
        let sparsity = report
            .conditions
            .iter()
            .find(|c| c.name.starts_with("sparsity"))
            .unwrap();
        assert!(!sparsity.pass);
        assert!(!report.pass);
    }

    #[test]
    fn class_check_er_and_sbm_degrees() {
        let model = families::erdos_renyi(50, 4.0, WeightLaw::constant(1.0)).unwrap();
        let sd = spectral_data_from_model(&model).unwrap();
        let report = class_check(&model, &sd);
        assert!(report.pass);
        assert!((report.b - 1.0).abs() < 1e-8);
        assert!((report.min_degree - 4.0).abs() < 1e-12);
        assert!(report.warnings.is_empty());
    }

    #[test]
    fn scale_covariance() {
        // c·W scales Q by c, K by c^2, mu by c, rho by c^2 (c = 2).
        let model = er_dense(40, 4.0);
        let scaled = model.scaled_weights(2.0);
        let (q, k) = expectation_matrices(&model);
        let (q2, k2) = expectation_matrices(&scaled);
        for (a, b) in q.iter().zip(q2.iter()) {
            assert!((2.0 * a - b).abs() < 1e-14);
        }
        for (a, b) in k.iter().zip(k2.iter()) {
            assert!((4.0 * a - b).abs() < 1e-14);
        }
        let sd = spectral_data(&q, &k, 1.0).unwrap();
        let sd2 = spectral_data(&q2, &k2, 2.0).unwrap();
        assert!((sd2.mu[0] - 2.0 * sd.mu[0]).abs() < 1e-9);
        assert!((sd2.rho - 4.0 * sd.rho).abs() < 1e-9);
    }

    #[test]
    fn rho_lower_bound_after_normalization() {
        // rho / mu1^2 >= 1/d.
        for d0 in [2.0, 4.0, 9.0] {
            let model = er_dense(60, d0);
            let (q, k) = expectation_matrices(&model);
            let sd = spectral_data(&q, &k, 1.0).unwrap();
            assert!(sd.rho / sd.mu[0].powi(2) >= 1.0 / d0 - 1e-12);
        }
    }

    #[test]
    fn k_matvec_block_matches_dense() {
        let n = 30;
        let mut theta = vec![0usize; n];
        for t in theta.iter_mut().skip(17) {
            *t = 1;
        }
        let m = ndarray::arr2(&[[0.3, 0.1], [0.1, 0.25]]);
        let laws = ndarray::arr2(&[
            [WeightLaw::constant(1.0), WeightLaw::rademacher()],
            [WeightLaw::rademacher(), WeightLaw::constant(2.0)],
        ]);
        let model = GraphModel::new(
            n,
            EdgeProbabilities::Block { theta, m },
            WeightAssignment::PerBlock(laws),
            9.0,
        )
        .unwrap();
        let v = Array1::from_iter((0..n).map(|i| (i as f64 * 0.37).sin()));
        let fast = k_matvec(&model, &v);
        let (q, k) = expectation_matrices(&model);
        let slow = k.dot(&v);
        for (a, b) in fast.iter().zip(slow.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        let fast_q = q_matvec(&model, &v);
        let slow_q = q.dot(&v);
        for (a, b) in fast_q.iter().zip(slow_q.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
