//! Pairwise binary Ising models over spins in `{-1, +1}`.
//!
//! The joint law is `P(x) ∝ exp(Σ_{s<t} θ_st x_s x_t)`; each unordered pair
//! contributes once. Nodes are 0-indexed in memory and pairs are stored in
//! lexicographic order `(0,1), (0,2), …, (0,p-1), (1,2), …`. Text formats use
//! 1-indexed nodes (see [`crate::io`]).

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::par::{self, Exec};

/// Largest `p` accepted by [`exact_joint_distribution`].
pub const MAX_ENUMERATION_P: usize = 20;

/// Number of unordered pairs on `p` nodes.
pub fn num_pairs(p: usize) -> usize {
    p * p.saturating_sub(1) / 2
}

/// Position of the pair `{s, t}` in the lexicographic pair order.
///
/// Panics if `s == t` or either node is out of range.
pub fn pair_index(p: usize, s: usize, t: usize) -> usize {
    assert!(s != t && s < p && t < p, "invalid pair ({s}, {t}) for p = {p}");
    let (s, t) = if s < t { (s, t) } else { (t, s) };
    s * (2 * p - s - 1) / 2 + (t - s - 1)
}

/// Inverse of [`pair_index`].
pub fn pair_of(p: usize, mut idx: usize) -> (usize, usize) {
    assert!(idx < num_pairs(p), "pair index {idx} out of range for p = {p}");
    let mut s = 0;
    loop {
        let row = p - s - 1;
        if idx < row {
            return (s, s + 1 + idx);
        }
        idx -= row;
        s += 1;
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
pub(crate) fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Symmetric coupling vector of an Ising model on `p` nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsingParameter {
    p: usize,
    weights: Vec<f64>,
}

impl IsingParameter {
    /// All-zero parameter (independent uniform spins).
    pub fn zeros(p: usize) -> Result<Self> {
        if p < 2 {
            return domain(format!("an Ising model needs p >= 2 nodes, got {p}"));
        }
        Ok(Self {
            p,
            weights: vec![0.0; num_pairs(p)],
        })
    }

    pub fn from_weights(p: usize, weights: Vec<f64>) -> Result<Self> {
        if p < 2 {
            return domain(format!("an Ising model needs p >= 2 nodes, got {p}"));
        }
        if weights.len() != num_pairs(p) {
            return domain(format!(
                "expected {} pair weights for p = {p}, got {}",
                num_pairs(p),
                weights.len()
            ));
        }
        if let Some(i) = weights.iter().position(|w| !w.is_finite()) {
            let (s, t) = pair_of(p, i);
            return domain(format!("non-finite weight on pair ({s}, {t})"));
        }
        Ok(Self { p, weights })
    }

    /// Builds a parameter from `(s, t, weight)` triples (0-indexed); unlisted pairs are zero.
    pub fn from_edges(p: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut theta = Self::zeros(p)?;
        for &(s, t, w) in edges {
            if s == t || s >= p || t >= p {
                return domain(format!("edge ({s}, {t}) out of range for p = {p}"));
            }
            if !w.is_finite() {
                return domain(format!("non-finite weight on pair ({s}, {t})"));
            }
            theta.weights[pair_index(p, s, t)] = w;
        }
        Ok(theta)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn get(&self, s: usize, t: usize) -> f64 {
        self.weights[pair_index(self.p, s, t)]
    }

    pub fn set(&mut self, s: usize, t: usize, w: f64) {
        assert!(w.is_finite(), "non-finite weight");
        self.weights[pair_index(self.p, s, t)] = w;
    }

    /// Nonzero pairs as `(s, t, weight)` with `s < t`, in pair order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w != 0.0)
            .map(|(i, &w)| {
                let (s, t) = pair_of(self.p, i);
                (s, t, w)
            })
    }

    /// Indices of nonzero pairs.
    pub fn support(&self) -> Vec<usize> {
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w != 0.0)
            .map(|(i, _)| i)
            .collect()
    }

    /// `Σ_{t≠r} θ_rt x_t`.
    pub fn local_field(&self, r: usize, x: &[i8]) -> f64 {
        let mut m = 0.0;
        for (t, &xt) in x.iter().enumerate() {
            if t != r {
                m += self.get(r, t) * f64::from(xt);
            }
        }
        m
    }

    /// `Σ_{s<t} θ_st x_s x_t`.
    pub fn energy(&self, x: &[i8]) -> f64 {
        let mut e = 0.0;
        let mut k = 0;
        for s in 0..self.p {
            let xs = f64::from(x[s]);
            for &xt in &x[s + 1..] {
                e += self.weights[k] * xs * f64::from(xt);
                k += 1;
            }
        }
        e
    }

    /// Entrywise sum, used for `θ̄ + Δ`.
    pub fn add(&self, other: &IsingParameter) -> Result<IsingParameter> {
        if self.p != other.p {
            return domain(format!("p mismatch: {} vs {}", self.p, other.p));
        }
        let weights = self
            .weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| a + b)
            .collect();
        IsingParameter::from_weights(self.p, weights)
    }

    /// The regression parameter `θ_{\r}` of node `r`.
    pub fn node_view(&self, r: usize) -> NodeView {
        assert!(r < self.p, "node {r} out of range");
        let weights = (0..self.p)
            .filter(|&t| t != r)
            .map(|t| self.get(r, t))
            .collect();
        NodeView {
            r,
            p: self.p,
            weights,
        }
    }

    /// Neighbors of `r` (nonzero couplings), ascending.
    pub fn neighbors(&self, r: usize) -> Vec<usize> {
        (0..self.p)
            .filter(|&t| t != r && self.get(r, t) != 0.0)
            .collect()
    }

    pub fn max_degree(&self) -> usize {
        (0..self.p)
            .map(|r| self.neighbors(r).len())
            .max()
            .unwrap_or(0)
    }
}

/// The per-node parameter `θ_{\r}`: couplings from `r` to every other node,
/// ordered by ascending node index with `r` skipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeView {
    pub r: usize,
    pub p: usize,
    pub weights: Vec<f64>,
}

impl NodeView {
    pub fn zeros(p: usize, r: usize) -> Self {
        assert!(r < p, "node {r} out of range");
        Self {
            r,
            p,
            weights: vec![0.0; p - 1],
        }
    }

    pub fn new(p: usize, r: usize, weights: Vec<f64>) -> Result<Self> {
        if r >= p {
            return domain(format!("node {r} out of range for p = {p}"));
        }
        if weights.len() != p - 1 {
            return domain(format!(
                "node view needs {} weights, got {}",
                p - 1,
                weights.len()
            ));
        }
        Ok(Self { r, p, weights })
    }

    /// Node associated with covariate slot `j`.
    pub fn covariate_node(&self, j: usize) -> usize {
        covariate_node(self.r, j)
    }

    /// Covariate slot of `node`, or `None` for `node == r`.
    pub fn covariate_index(&self, node: usize) -> Option<usize> {
        covariate_index(self.r, node)
    }

    /// `Σ_j θ_j x_{node(j)}`.
    pub fn local_field(&self, x: &[i8]) -> f64 {
        let mut m = 0.0;
        for (j, w) in self.weights.iter().enumerate() {
            m += w * f64::from(x[covariate_node(self.r, j)]);
        }
        m
    }
}

pub(crate) fn covariate_node(r: usize, j: usize) -> usize {
    if j < r {
        j
    } else {
        j + 1
    }
}

pub(crate) fn covariate_index(r: usize, node: usize) -> Option<usize> {
    use std::cmp::Ordering::*;
    match node.cmp(&r) {
        Less => Some(node),
        Equal => None,
        Greater => Some(node - 1),
    }
}

/// `n × p` matrix of spins, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleMatrix {
    n: usize,
    p: usize,
    values: Vec<i8>,
}

impl SampleMatrix {
    pub fn new(p: usize, values: Vec<i8>) -> Result<Self> {
        if p == 0 {
            return domain("sample matrix needs p >= 1 columns");
        }
        if values.is_empty() || !values.len().is_multiple_of(p) {
            return domain(format!(
                "sample buffer of length {} is not a nonempty multiple of p = {p}",
                values.len()
            ));
        }
        if let Some(i) = values.iter().position(|&v| v != 1 && v != -1) {
            return domain(format!(
                "entry ({}, {}) is {}, spins must be -1 or +1",
                i / p,
                i % p,
                values[i]
            ));
        }
        Ok(Self {
            n: values.len() / p,
            p,
            values,
        })
    }

    pub fn from_rows(rows: &[Vec<i8>]) -> Result<Self> {
        let Some(first) = rows.first() else {
            return domain("sample matrix needs at least one row");
        };
        let p = first.len();
        if let Some(i) = rows.iter().position(|r| r.len() != p) {
            return domain(format!("row {i} has {} entries, expected {p}", rows[i].len()));
        }
        Self::new(p, rows.concat())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn row(&self, i: usize) -> &[i8] {
        &self.values[i * self.p..(i + 1) * self.p]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[i8]> + '_ {
        self.values.chunks_exact(self.p)
    }

    pub fn values(&self) -> &[i8] {
        &self.values
    }

    /// Every spin negated.
    pub fn negated(&self) -> SampleMatrix {
        SampleMatrix {
            n: self.n,
            p: self.p,
            values: self.values.iter().map(|v| -v).collect(),
        }
    }

    /// Stacks row blocks of equal width.
    pub fn concat(parts: &[SampleMatrix]) -> Result<SampleMatrix> {
        let Some(first) = parts.first() else {
            return domain("nothing to concatenate");
        };
        if parts.iter().any(|m| m.p != first.p) {
            return domain("sample matrices have different widths");
        }
        let values = parts.iter().flat_map(|m| m.values.iter().copied()).collect();
        SampleMatrix::new(first.p, values)
    }
}

pub(crate) fn check_spins(x: &[i8], p: usize) -> Result<()> {
    if x.len() != p {
        return domain(format!("spin vector has {} entries, expected {p}", x.len()));
    }
    if let Some(i) = x.iter().position(|&v| v != 1 && v != -1) {
        return domain(format!("spin {i} is {}, must be -1 or +1", x[i]));
    }
    Ok(())
}

/// Exhaustive probability table over `{-1,+1}^p`.
///
/// Configuration `c` has `x_s = +1` iff bit `s` of `c` is set.
#[derive(Debug, Clone)]
pub struct JointTable {
    p: usize,
    probs: Vec<f64>,
    log_partition: f64,
}

impl JointTable {
    pub fn p(&self) -> usize {
        self.p
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// `ln Z`, the log of the enumerated sum of unnormalized weights.
    pub fn log_partition(&self) -> f64 {
        self.log_partition
    }

    pub fn index_of(x: &[i8]) -> usize {
        x.iter()
            .enumerate()
            .filter(|(_, &v)| v > 0)
            .fold(0, |acc, (s, _)| acc | (1 << s))
    }

    pub fn prob(&self, x: &[i8]) -> f64 {
        self.probs[Self::index_of(x)]
    }

    pub fn iter(&self) -> impl Iterator<Item = (Vec<i8>, f64)> + '_ {
        self.probs
            .iter()
            .enumerate()
            .map(|(c, &pr)| (config(self.p, c), pr))
    }
}

/// Spin vector of configuration index `c`.
pub fn config(p: usize, c: usize) -> Vec<i8> {
    (0..p).map(|s| if c >> s & 1 == 1 { 1 } else { -1 }).collect()
}

/// Exact joint distribution by enumerating all `2^p` configurations.
pub fn exact_joint_distribution(theta: &IsingParameter) -> Result<JointTable> {
    exact_joint_distribution_with(theta, Exec::default())
}

pub fn exact_joint_distribution_with(theta: &IsingParameter, exec: Exec) -> Result<JointTable> {
    let p = theta.p();
    if p > MAX_ENUMERATION_P {
        return Err(Error::Capacity {
            what: "exact enumeration",
            p,
            max: MAX_ENUMERATION_P,
        });
    }
    if theta.weights().iter().any(|w| !w.is_finite()) {
        return domain("non-finite coupling");
    }
    let size = 1usize << p;
    let chunk = 4096;
    let energies: Vec<f64> = par::map_indexed(exec, size.div_ceil(chunk), |b| {
        (b * chunk..((b + 1) * chunk).min(size))
            .map(|c| theta.energy(&config(p, c)))
            .collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect();
    let max_e = energies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = energies.iter().map(|e| (e - max_e).exp()).collect();
    let z: f64 = probs.iter().sum();
    for pr in &mut probs {
        *pr /= z;
    }
    Ok(JointTable {
        p,
        probs,
        log_partition: max_e + z.ln(),
    })
}

/// `P(X_r = x_r | x_{\r})` under `theta`.
pub fn conditional_prob(theta: &IsingParameter, r: usize, x: &[i8]) -> Result<f64> {
    check_spins(x, theta.p())?;
    if r >= theta.p() {
        return domain(format!("node {r} out of range"));
    }
    let m = theta.local_field(r, x);
    Ok(sigmoid(2.0 * f64::from(x[r]) * m))
}

/// `E[X_r | x_{\r}] = tanh(Σ_t θ_rt x_t)`.
pub fn conditional_mean(theta: &IsingParameter, r: usize, x: &[i8]) -> f64 {
    theta.local_field(r, x).tanh()
}

fn check_view(view: &NodeView, samples: &SampleMatrix) -> Result<()> {
    if samples.p() != view.weights.len() + 1 || samples.p() != view.p {
        return domain(format!(
            "node view has {} covariates but samples have p = {}",
            view.weights.len(),
            samples.p()
        ));
    }
    Ok(())
}

/// Rescaled negative conditional log-likelihood of node `view.r`:
/// `-(1/n) Σ_i log P(x_r^i | x_{\r}^i)`.
pub fn node_loss(view: &NodeView, samples: &SampleMatrix) -> Result<f64> {
    check_view(view, samples)?;
    let sum: f64 = samples
        .rows()
        .map(|x| softplus(-2.0 * f64::from(x[view.r]) * view.local_field(x)))
        .sum();
    Ok(sum / samples.n() as f64)
}

/// Gradient of [`node_loss`]: `-(1/n) Σ_i x_u^i (x_r^i - tanh(m^i))`.
pub fn node_loss_gradient(view: &NodeView, samples: &SampleMatrix) -> Result<Vec<f64>> {
    check_view(view, samples)?;
    let mut g = vec![0.0; view.weights.len()];
    for x in samples.rows() {
        let resid = f64::from(x[view.r]) - view.local_field(x).tanh();
        for (j, gj) in g.iter_mut().enumerate() {
            *gj -= f64::from(x[covariate_node(view.r, j)]) * resid;
        }
    }
    let n = samples.n() as f64;
    g.iter_mut().for_each(|gj| *gj /= n);
    Ok(g)
}

/// `η(u; θ) = 4 e^{2 u_r m} / (e^{2 u_r m} + 1)^2` with `m = Σ_t θ_rt u_t`,
/// the conditional variance of `X_r`.
pub fn variance_weight(u: &[i8], theta: &IsingParameter, r: usize) -> Result<f64> {
    check_spins(u, theta.p())?;
    if r >= theta.p() {
        return domain(format!("node {r} out of range"));
    }
    Ok(eta(theta.local_field(r, u)))
}

/// `1 / cosh²(m)`, which equals `4σ(2m)σ(-2m)`.
pub(crate) fn eta(m: f64) -> f64 {
    let c = m.cosh();
    1.0 / (c * c)
}
