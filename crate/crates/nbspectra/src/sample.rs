//! Samplers for every random object: inhomogeneous graphs `G(P, W)`, block
//! model instances with ground truth, matrix-completion reveal masks, and the
//! labeled Galton-Watson trees.
//!
//! All samplers are pure functions of `(model, seed)`: edge presence and
//! weights are drawn from streams keyed by the pair itself, so the output
//! never depends on visit order and is reproducible byte for byte.

use ndarray::Array2;
use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{
    block_sizes, EdgeProbabilities, GraphModel, WeightAssignment, WeightLaw,
};
use crate::rng::{self, StreamTag};

/// An undirected edge with its weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub u: u32,
    pub v: u32,
    pub w: f64,
}

/// A sampled weighted graph: canonical edge list plus per-vertex incidence.
#[derive(Debug, Clone)]
pub struct WeightedGraph {
    n: usize,
    edges: Vec<Edge>,
    /// `adjacency[v]` lists `(neighbor, edge index)` pairs.
    adjacency: Vec<Vec<(u32, u32)>>,
}

impl WeightedGraph {
    /// Builds a graph from an edge list; rejects self-loops and duplicates.
    pub fn new(n: usize, mut edges: Vec<Edge>) -> Result<Self> {
        for e in edges.iter_mut() {
            if e.u == e.v {
                return Err(Error::InvalidModel(format!("self-loop at vertex {}", e.u)));
            }
            if e.u as usize >= n || e.v as usize >= n {
                return Err(Error::InvalidModel(format!(
                    "edge ({}, {}) out of range n = {n}",
                    e.u, e.v
                )));
            }
            if e.u > e.v {
                std::mem::swap(&mut e.u, &mut e.v);
            }
        }
        edges.sort_by_key(|e| (e.u, e.v));
        if edges.windows(2).any(|w| (w[0].u, w[0].v) == (w[1].u, w[1].v)) {
            return Err(Error::InvalidModel("duplicate undirected edge".into()));
        }
        let mut adjacency = vec![Vec::new(); n];
        for (idx, e) in edges.iter().enumerate() {
            adjacency[e.u as usize].push((e.v, idx as u32));
            adjacency[e.v as usize].push((e.u, idx as u32));
        }
        Ok(WeightedGraph { n, edges, adjacency })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[(u32, u32)] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn max_abs_weight(&self) -> f64 {
        self.edges.iter().fold(0.0f64, |a, e| a.max(e.w.abs()))
    }
}

/// Number of failures before the first success of a Bernoulli(p) sequence.
fn geometric(rng: &mut rand_chacha::ChaCha8Rng, p: f64) -> u64 {
    if p >= 1.0 {
        return 0;
    }
    if p <= 0.0 {
        return u64::MAX;
    }
    let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let g = u.ln() / (1.0 - p).ln();
    if g >= u64::MAX as f64 {
        u64::MAX
    } else {
        g as u64
    }
}

/// Samples `G(P, W)`: each unordered pair is included independently with
/// probability `P_uv` and assigned one weight drawn from its law.
pub fn sample_graph(model: &GraphModel, seed: u64) -> WeightedGraph {
    let n = model.n();
    let mut edges = Vec::new();
    match model.probs() {
        EdgeProbabilities::Dense(p) => {
            for i in 0..n {
                for j in (i + 1)..n {
                    let pij = p[[i, j]];
                    if pij > 0.0 && rng::uniform_u01(seed, StreamTag::EdgePresence, i as u64, j as u64) < pij
                    {
                        edges.push(draw_edge(model, seed, i, j));
                    }
                }
            }
        }
        EdgeProbabilities::Block { theta, m } => {
            let k = m.nrows();
            let members = block_members(theta, k);
            for a in 0..k {
                for b in a..k {
                    let p = m[[a, b]];
                    if p <= 0.0 {
                        continue;
                    }
                    let pair_id = (a * k + b) as u64;
                    let mut stream = rng::stream(seed, StreamTag::EdgePresence, pair_id, 0);
                    sample_block_pair(&members[a], &members[b], a == b, p, &mut stream, |i, j| {
                        edges.push(draw_edge(model, seed, i, j));
                    });
                }
            }
        }
    }
    WeightedGraph::new(n, edges).expect("sampler emits valid edges")
}

fn draw_edge(model: &GraphModel, seed: u64, i: usize, j: usize) -> Edge {
    let (lo, hi) = if i < j { (i, j) } else { (j, i) };
    let mut wstream = rng::stream(seed, StreamTag::EdgeWeight, lo as u64, hi as u64);
    Edge {
        u: lo as u32,
        v: hi as u32,
        w: model.sample_weight(lo, hi, &mut wstream),
    }
}

/// Geometric skip-sampling over all pairs of a block pair: O(edges + rows)
/// instead of one Bernoulli draw per pair.
fn sample_block_pair(
    left: &[usize],
    right: &[usize],
    same_block: bool,
    p: f64,
    stream: &mut rand_chacha::ChaCha8Rng,
    mut emit: impl FnMut(usize, usize),
) {
    let mut gap = geometric(stream, p);
    for (row, &i) in left.iter().enumerate() {
        let cols: &[usize] = if same_block { &right[row + 1..] } else { right };
        let len = cols.len() as u64;
        let mut pos = 0u64;
        while pos.saturating_add(gap) < len {
            pos += gap;
            emit(i, cols[pos as usize]);
            pos += 1;
            gap = geometric(stream, p);
        }
        gap -= len - pos;
    }
}

pub(crate) fn block_members(theta: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut members = vec![Vec::new(); k];
    for (v, &t) in theta.iter().enumerate() {
        members[t].push(v);
    }
    members
}

/// A block model with its planted assignment and the spectrum of the
/// normalized block matrix `diag(pi) M0`.
#[derive(Debug, Clone)]
pub struct SbmModel {
    pub model: GraphModel,
    pub theta: Vec<usize>,
    /// Eigenvalues of `diag(pi) M0`, sorted by decreasing modulus. The model
    /// is conventionally normalized so the top modulus is 1; the actual value
    /// is reported here rather than enforced.
    pub block_eigenvalues: Vec<f64>,
    pub alpha: f64,
}

/// Builds `SBM(n, pi, (alpha/n) M0)` with deterministic quota assignment:
/// block `k` gets `floor(pi_k n)` vertices, the remainder joins block 0.
pub fn make_sbm(n: usize, pi: &[f64], m0: &Array2<f64>, alpha: f64) -> Result<SbmModel> {
    let k = pi.len();
    if k == 0 || m0.nrows() != k || m0.ncols() != k {
        return Err(Error::InvalidModel("pi / M0 shape mismatch".into()));
    }
    if pi.iter().any(|&p| p <= 0.0) {
        return Err(Error::InvalidModel("pi entries must be positive".into()));
    }
    let total: f64 = pi.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidModel(format!("pi sums to {total}")));
    }
    let m0_max = m0.iter().fold(0.0f64, |a, &v| a.max(v));
    if alpha * m0_max > n as f64 {
        return Err(Error::ProbabilityOverflow(format!(
            "alpha * max M0 = {} > n = {n}",
            alpha * m0_max
        )));
    }

    let mut sizes: Vec<usize> = pi.iter().map(|&p| (p * n as f64).floor() as usize).collect();
    let assigned: usize = sizes.iter().sum();
    sizes[0] += n - assigned;
    let mut theta = Vec::with_capacity(n);
    for (block, &sz) in sizes.iter().enumerate() {
        theta.extend(std::iter::repeat(block).take(sz));
    }

    let m = m0.map(|&v| alpha * v / n as f64);
    let model = GraphModel::new(
        n,
        EdgeProbabilities::Block { theta: theta.clone(), m },
        WeightAssignment::Uniform(WeightLaw::constant(1.0)),
        alpha * m0_max,
    )?;

    // spectrum of diag(pi) M0 via the symmetric form diag(pi)^1/2 M0 diag(pi)^1/2
    let mut sym = Array2::zeros((k, k));
    for a in 0..k {
        for b in 0..k {
            sym[[a, b]] = pi[a].sqrt() * m0[[a, b]] * pi[b].sqrt();
        }
    }
    use ndarray_linalg::{Eigh, UPLO};
    let (vals, _) = sym
        .eigh(UPLO::Lower)
        .map_err(|e| Error::Backend(format!("eigh(diag(pi) M0): {e}")))?;
    let mut block_eigenvalues: Vec<f64> = vals.to_vec();
    block_eigenvalues.sort_by(|a, b| b.abs().partial_cmp(&a.abs()).unwrap());

    Ok(SbmModel { model, theta, block_eigenvalues, alpha })
}

/// One sampled community instance: graph, planted labels, optional edge
/// labels aligned with the edge list.
#[derive(Debug, Clone)]
pub struct CommunityInstance {
    pub graph: WeightedGraph,
    pub theta: Vec<usize>,
    pub labels: Option<Vec<f64>>,
}

/// Finite label space shared by the within/across distributions.
#[derive(Debug, Clone)]
pub struct LabelSpace {
    pub labels: Vec<f64>,
    pub p_in: Vec<f64>,
    pub p_out: Vec<f64>,
}

impl LabelSpace {
    pub fn validate(&self) -> Result<()> {
        let k = self.labels.len();
        if k == 0 || self.p_in.len() != k || self.p_out.len() != k {
            return Err(Error::InvalidModel("label space shape mismatch".into()));
        }
        for probs in [&self.p_in, &self.p_out] {
            if probs.iter().any(|&p| p < 0.0) || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidModel("label probabilities must sum to 1".into()));
            }
        }
        Ok(())
    }
}

/// Two-community labeled block model: within-block edges appear with
/// probability `a/n` and carry labels from `p_in`, across-block edges with
/// probability `b/n` and labels from `p_out`; the edge weight is `w(label)`.
#[derive(Debug, Clone)]
pub struct LabeledSbm {
    pub n: usize,
    pub a: f64,
    pub b: f64,
    pub space: LabelSpace,
    /// Weight attached to each label.
    pub weight_table: Vec<f64>,
}

pub fn make_labeled_sbm(
    n: usize,
    a: f64,
    b: f64,
    space: LabelSpace,
    weight_table: Vec<f64>,
) -> Result<LabeledSbm> {
    if a < 0.0 || b < 0.0 {
        return Err(Error::InvalidModel("a, b must be nonnegative".into()));
    }
    space.validate()?;
    if weight_table.len() != space.labels.len() {
        return Err(Error::InvalidModel("weight table length mismatch".into()));
    }
    if a.max(b) > n as f64 {
        return Err(Error::ProbabilityOverflow(format!("max(a, b) = {} > n", a.max(b))));
    }
    Ok(LabeledSbm { n, a, b, space, weight_table })
}

impl LabeledSbm {
    /// The deterministic couple `(P, W)`: the weight law of a block pair is
    /// the pushforward of its label distribution through the weight table.
    pub fn model(&self) -> Result<GraphModel> {
        let nf = self.n as f64;
        let half = self.n / 2;
        let theta: Vec<usize> = (0..self.n).map(|v| usize::from(v >= half)).collect();
        let m = ndarray::arr2(&[
            [self.a / nf, self.b / nf],
            [self.b / nf, self.a / nf],
        ]);
        let law_in = WeightLaw::finite_discrete(self.weight_table.clone(), self.space.p_in.clone())?;
        let law_out =
            WeightLaw::finite_discrete(self.weight_table.clone(), self.space.p_out.clone())?;
        let laws = ndarray::arr2(&[
            [law_in.clone(), law_out.clone()],
            [law_out, law_in],
        ]);
        GraphModel::new(
            self.n,
            EdgeProbabilities::Block { theta, m },
            WeightAssignment::PerBlock(laws),
            self.a.max(self.b),
        )
    }

    /// Samples an instance, recording the drawn label of every edge.
    pub fn sample(&self, seed: u64) -> Result<CommunityInstance> {
        let half = self.n / 2;
        let theta: Vec<usize> = (0..self.n).map(|v| usize::from(v >= half)).collect();
        let nf = self.n as f64;
        let mut edges = Vec::new();
        let mut labels = Vec::new();
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                let within = theta[i] == theta[j];
                let p = if within { self.a / nf } else { self.b / nf };
                if rng::uniform_u01(seed, StreamTag::EdgePresence, i as u64, j as u64) < p {
                    let mut lstream = rng::stream(seed, StreamTag::EdgeLabel, i as u64, j as u64);
                    let probs = if within { &self.space.p_in } else { &self.space.p_out };
                    let idx = draw_index(probs, &mut lstream);
                    edges.push(Edge {
                        u: i as u32,
                        v: j as u32,
                        w: self.weight_table[idx],
                    });
                    labels.push(self.space.labels[idx]);
                }
            }
        }
        // edges are emitted in (u, v) order already, so labels stay aligned
        let graph = WeightedGraph::new(self.n, edges)?;
        Ok(CommunityInstance { graph, theta, labels: Some(labels) })
    }
}

fn draw_index(probs: &[f64], rng: &mut rand_chacha::ChaCha8Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Outcome of a reveal mask: the revealed graph together with the effective
/// parameters used for scaling.
#[derive(Debug, Clone)]
pub struct RevealedGraph {
    pub graph: WeightedGraph,
    /// `2d - d/n`, the symmetrized mean degree.
    pub d_tilde: f64,
    /// Probability actually used per pair: `min(1, d_tilde/n)`.
    pub pair_probability: f64,
    /// Factor mapping eigenvalues of `M` to expected outliers of `B`:
    /// `pair_probability * n / d_tilde` (1 in the sparse regime).
    pub eigen_scale: f64,
}

/// Reveals each unordered pair with probability `d_tilde/n` where
/// `d_tilde = 2d - d/n` (one symmetrized Bernoulli draw per pair), and puts
/// weight `(n/d_tilde) M_ij` on revealed pairs.
pub fn reveal_mask(m: &Array2<f64>, d: f64, seed: u64) -> Result<RevealedGraph> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: m.ncols() });
    }
    for i in 0..n {
        for j in 0..n {
            if (m[[i, j]] - m[[j, i]]).abs() > 1e-12 {
                return Err(Error::InvalidModel("M not symmetric".into()));
            }
        }
    }
    let nf = n as f64;
    let d_tilde = 2.0 * d - d / nf;
    if d_tilde <= 0.0 {
        return Ok(RevealedGraph {
            graph: WeightedGraph::new(n, Vec::new())?,
            d_tilde,
            pair_probability: 0.0,
            eigen_scale: 0.0,
        });
    }
    let p = (d_tilde / nf).min(1.0);
    let scale = nf / d_tilde;
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng::uniform_u01(seed, StreamTag::EdgePresence, i as u64, j as u64) < p {
                edges.push(Edge {
                    u: i as u32,
                    v: j as u32,
                    w: scale * m[[i, j]],
                });
            }
        }
    }
    Ok(RevealedGraph {
        graph: WeightedGraph::new(n, edges)?,
        d_tilde,
        pair_probability: p,
        eigen_scale: p * scale,
    })
}

/// One node of a labeled rooted tree.
#[derive(Debug, Clone)]
pub struct TreeNode {
    pub parent: Option<usize>,
    pub depth: usize,
    /// Mark in `[n]` pointing back to a vertex of the model.
    pub mark: usize,
    /// Weight of the edge to the parent (0 for the root).
    pub weight_to_parent: f64,
}

/// A Galton-Watson tree with vertex marks and edge weights, stored as an
/// arena in breadth-first order.
#[derive(Debug, Clone)]
pub struct LabeledTree {
    pub nodes: Vec<TreeNode>,
    pub children: Vec<Vec<usize>>,
}

impl LabeledTree {
    pub fn root(&self) -> usize {
        0
    }

    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    pub fn population_at_depth(&self, t: usize) -> usize {
        self.nodes.iter().filter(|n| n.depth == t).count()
    }
}

/// Cached sampling structures for the mark distributions
/// `pi_x = (P_{x,1}, ..., P_{x,n}) / d_x`.
enum MarkSampler<'a> {
    Dense {
        p: &'a Array2<f64>,
        cdf_cache: std::collections::HashMap<usize, Vec<f64>>,
    },
    Block {
        theta: &'a [usize],
        members: Vec<Vec<usize>>,
        /// Per source block: CDF over target blocks weighted by size·prob.
        block_cdf: Vec<Vec<f64>>,
    },
}

impl<'a> MarkSampler<'a> {
    fn new(model: &'a GraphModel) -> Self {
        match model.probs() {
            EdgeProbabilities::Dense(p) => MarkSampler::Dense {
                p,
                cdf_cache: std::collections::HashMap::new(),
            },
            EdgeProbabilities::Block { theta, m } => {
                let k = m.nrows();
                let sizes = block_sizes(theta, k);
                let members = block_members(theta, k);
                let mut block_cdf = Vec::with_capacity(k);
                for a in 0..k {
                    let mut cdf = Vec::with_capacity(k);
                    let mut acc = 0.0;
                    for b in 0..k {
                        acc += sizes[b] as f64 * m[[a, b]];
                        cdf.push(acc);
                    }
                    block_cdf.push(cdf);
                }
                MarkSampler::Block { theta, members, block_cdf }
            }
        }
    }

    fn draw(&mut self, from: usize, rng: &mut rand_chacha::ChaCha8Rng) -> usize {
        match self {
            MarkSampler::Dense { p, cdf_cache } => {
                let cdf = cdf_cache.entry(from).or_insert_with(|| {
                    let row = p.row(from);
                    let mut acc = 0.0;
                    row.iter()
                        .map(|&v| {
                            acc += v;
                            acc
                        })
                        .collect()
                });
                let total = *cdf.last().unwrap();
                let u: f64 = rng.gen_range(0.0..total);
                match cdf.binary_search_by(|x| x.partial_cmp(&u).unwrap()) {
                    Ok(i) | Err(i) => i.min(cdf.len() - 1),
                }
            }
            MarkSampler::Block { theta, members, block_cdf } => {
                let cdf = &block_cdf[theta[from]];
                let total = *cdf.last().unwrap();
                let u: f64 = rng.gen_range(0.0..total);
                let blk = match cdf.binary_search_by(|x| x.partial_cmp(&u).unwrap()) {
                    Ok(i) | Err(i) => i.min(cdf.len() - 1),
                };
                let who = rng.gen_range(0..members[blk].len());
                members[blk][who]
            }
        }
    }
}

/// Samples the inhomogeneous Galton-Watson tree `(T, o)` to the requested
/// depth: each node with mark `x` gets `Poi(d_x)` children, child marks are
/// i.i.d. from `pi_x`, and the edge weight is drawn from the law of the pair.
pub fn sample_gw_tree(
    model: &GraphModel,
    root: usize,
    depth: usize,
    seed: u64,
) -> Result<LabeledTree> {
    let n = model.n();
    if root >= n {
        return Err(Error::InvalidModel(format!("root {root} out of range")));
    }
    let degrees = model.degree_vector();
    if degrees[root] <= 0.0 {
        return Err(Error::InvalidModel("root has zero average degree".into()));
    }
    // Poisson truncation: P(Poi(d) > 10 d + 50) < 1e-12.
    let cap = (10.0 * model.sparsity() + 50.0) as usize;

    let mut sampler = MarkSampler::new(model);
    let mut nodes = vec![TreeNode { parent: None, depth: 0, mark: root, weight_to_parent: 0.0 }];
    let mut children = vec![Vec::new()];
    let mut frontier = vec![0usize];
    let mut counter = 0u64;
    for level in 0..depth {
        let mut next = Vec::new();
        for &node in &frontier {
            let mark = nodes[node].mark;
            let mut stream = rng::stream(seed, StreamTag::TreeNode, counter, 0);
            counter += 1;
            let offspring = rng::poisson(&mut stream, degrees[mark], cap);
            for _ in 0..offspring {
                let child_mark = sampler.draw(mark, &mut stream);
                let mut wstream = rng::stream(seed, StreamTag::TreeNode, counter, 1);
                counter += 1;
                let w = model.sample_weight(mark, child_mark, &mut wstream);
                let id = nodes.len();
                nodes.push(TreeNode {
                    parent: Some(node),
                    depth: level + 1,
                    mark: child_mark,
                    weight_to_parent: w,
                });
                children.push(Vec::new());
                children[node].push(id);
                next.push(id);
            }
        }
        frontier = next;
        if frontier.is_empty() {
            break;
        }
    }
    Ok(LabeledTree { nodes, children })
}
