//! Two-step meta-learning recovery.
//!
//! Step one pools the samples of `K` auxiliary tasks and solves one ℓ1 node
//! regression per node, recovering the support union `supp(θ̄)`. Step two
//! fits the novel task with each node's regression restricted to its
//! neighbors in the recovered union.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::ising::{IsingParameter, SampleMatrix};
use crate::par::{self, Exec};
use crate::solver::{solve_node_l1, solve_restricted_pooled, SolverConfig, SolverReport};

/// `β √(ln p / (nK))`, the auxiliary-task regularization schedule.
pub fn lambda_aux(p: usize, n: usize, k: usize, beta: f64) -> Result<f64> {
    if p < 2 || n == 0 || k == 0 {
        return domain(format!("lambda_aux needs p >= 2, n >= 1, K >= 1 (got p={p}, n={n}, K={k})"));
    }
    if !(beta > 0.0) {
        return domain(format!("beta must be positive, got {beta}"));
    }
    Ok(beta * ((p as f64).ln() / (n as f64 * k as f64)).sqrt())
}

/// `β √(ln d / n_novel)`, the novel-task regularization schedule.
pub fn lambda_novel(d: usize, n_novel: usize, beta: f64) -> Result<f64> {
    if d < 2 {
        return domain(format!("lambda_novel needs d >= 2 (ln d must be positive), got d = {d}"));
    }
    if n_novel == 0 {
        return domain("n_novel must be at least 1");
    }
    if !(beta > 0.0) {
        return domain(format!("beta must be positive, got {beta}"));
    }
    Ok(beta * ((d as f64).ln() / n_novel as f64).sqrt())
}

/// Minimum coupling magnitude guaranteed to be included: `(10 / C_min) √d λ`.
pub fn beta_min_threshold(c_min: f64, d: usize, lambda: f64) -> Result<f64> {
    if !(c_min > 0.0) {
        return domain(format!("C_min must be positive, got {c_min}"));
    }
    Ok(10.0 / c_min * (d as f64).sqrt() * lambda)
}

/// Set of node pairs `s < t`, each with a sign.
///
/// Serializes as `{"p": .., "edges": [{"s": .., "t": .., "sign": ..}]}` with
/// 0-based nodes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "EdgeSetRepr", try_from = "EdgeSetRepr")]
pub struct SignedEdgeSet {
    p: usize,
    entries: BTreeMap<(usize, usize), i8>,
}

#[derive(Serialize, Deserialize)]
struct EdgeRepr {
    s: usize,
    t: usize,
    sign: i8,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeSetRepr {
    p: usize,
    edges: Vec<EdgeRepr>,
}

impl From<SignedEdgeSet> for EdgeSetRepr {
    fn from(set: SignedEdgeSet) -> Self {
        let edges = set.entries.into_iter().map(|((s, t), sign)| EdgeRepr { s, t, sign }).collect();
        Self { p: set.p, edges }
    }
}

impl TryFrom<EdgeSetRepr> for SignedEdgeSet {
    type Error = Error;

    fn try_from(repr: EdgeSetRepr) -> Result<Self> {
        let mut set = SignedEdgeSet::new(repr.p);
        for e in repr.edges {
            set.insert(e.s, e.t, e.sign)?;
        }
        Ok(set)
    }
}

impl SignedEdgeSet {
    pub fn new(p: usize) -> Self {
        Self {
            p,
            entries: BTreeMap::new(),
        }
    }

    /// Signed support of a parameter.
    pub fn from_parameter(theta: &IsingParameter) -> Self {
        let mut set = Self::new(theta.p());
        for (s, t, w) in theta.edges() {
            set.entries.insert((s, t), if w > 0.0 { 1 } else { -1 });
        }
        set
    }

    /// Every pair, signed `+1`.
    pub fn complete(p: usize) -> Self {
        let mut set = Self::new(p);
        for s in 0..p {
            for t in s + 1..p {
                set.entries.insert((s, t), 1);
            }
        }
        set
    }

    /// Inserts `{s, t}`; fails on out-of-range nodes, self loops, bad signs or duplicates.
    pub fn insert(&mut self, s: usize, t: usize, sign: i8) -> Result<()> {
        if s == t || s >= self.p || t >= self.p {
            return domain(format!("pair ({s}, {t}) invalid for p = {}", self.p));
        }
        if sign != 1 && sign != -1 {
            return domain(format!("sign must be +1 or -1, got {sign}"));
        }
        let key = (s.min(t), s.max(t));
        if self.entries.contains_key(&key) {
            return domain(format!("duplicate pair ({}, {})", key.0, key.1));
        }
        self.entries.insert(key, sign);
        Ok(())
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn sign(&self, s: usize, t: usize) -> Option<i8> {
        self.entries.get(&(s.min(t), s.max(t))).copied()
    }

    pub fn contains(&self, s: usize, t: usize) -> bool {
        self.sign(s, t).is_some()
    }

    /// `(s, t, sign)` in lexicographic order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, i8)> + '_ {
        self.entries.iter().map(|(&(s, t), &g)| (s, t, g))
    }

    /// Signed neighborhood of `r`, ascending by node.
    pub fn neighbors(&self, r: usize) -> Vec<(usize, i8)> {
        let mut out: Vec<(usize, i8)> = self
            .iter()
            .filter_map(|(s, t, g)| {
                if s == r {
                    Some((t, g))
                } else if t == r {
                    Some((s, g))
                } else {
                    None
                }
            })
            .collect();
        out.sort_unstable();
        out
    }

    /// Unsigned containment.
    pub fn is_subset_of(&self, other: &SignedEdgeSet) -> bool {
        self.entries.keys().all(|k| other.entries.contains_key(k))
    }

    pub fn same_pairs(&self, other: &SignedEdgeSet) -> bool {
        self.entries.len() == other.entries.len() && self.is_subset_of(other)
    }
}

/// How the two endpoint regressions of a pair are combined into one edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReconcileRule {
    /// Edge present iff both endpoint estimates are nonzero.
    And,
    /// Edge present iff either endpoint estimate is nonzero.
    Or,
    /// Edge decided by the endpoint estimate of larger magnitude.
    #[default]
    Max,
}

impl std::str::FromStr for ReconcileRule {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "and" => Ok(Self::And),
            "or" => Ok(Self::Or),
            "max" => Ok(Self::Max),
            other => Err(format!("unknown reconcile rule '{other}' (expected and, or, max)")),
        }
    }
}

impl std::fmt::Display for ReconcileRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::And => "and",
            Self::Or => "or",
            Self::Max => "max",
        })
    }
}

/// Per-node reports and the edge set reconciled from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryResult {
    pub per_node: Vec<SolverReport>,
    pub edge_set: SignedEdgeSet,
    pub lambda_used: f64,
    pub reconcile_rule: ReconcileRule,
    pub zero_threshold: f64,
    pub all_converged: bool,
}

impl RecoveryResult {
    /// Each node's own signed neighborhood estimate, before reconciliation.
    pub fn node_neighborhoods(&self) -> Vec<Vec<(usize, i8)>> {
        self.per_node
            .iter()
            .map(|rep| rep.signed_neighborhood(self.zero_threshold))
            .collect()
    }

    /// True iff every node's own neighborhood equals its neighborhood in
    /// `truth` (with signs when `signed`).
    pub fn neighborhoods_match(&self, truth: &SignedEdgeSet, signed: bool) -> bool {
        self.node_neighborhoods().iter().enumerate().all(|(r, est)| {
            let want = truth.neighbors(r);
            if signed {
                *est == want
            } else {
                est.len() == want.len() && est.iter().zip(&want).all(|(a, b)| a.0 == b.0)
            }
        })
    }
}

/// Combines per-node estimates into one signed edge set.
pub fn reconcile(per_node: &[SolverReport], rule: ReconcileRule, zero_threshold: f64) -> SignedEdgeSet {
    let p = per_node.len();
    let mut set = SignedEdgeSet::new(p);
    let coef = |r: usize, t: usize| {
        let view = &per_node[r].estimate;
        view.weights[view.covariate_index(t).unwrap()]
    };
    for s in 0..p {
        for t in s + 1..p {
            let a = coef(s, t);
            let b = coef(t, s);
            let (sel_a, sel_b) = (a.abs() > zero_threshold, b.abs() > zero_threshold);
            let keep = match rule {
                ReconcileRule::And => sel_a && sel_b,
                ReconcileRule::Or => sel_a || sel_b,
                ReconcileRule::Max => a.abs().max(b.abs()) > zero_threshold,
            };
            if keep {
                let dominant = if a.abs() >= b.abs() { a } else { b };
                set.entries.insert((s, t), if dominant > 0.0 { 1 } else { -1 });
            }
        }
    }
    set
}

fn check_sets(sample_sets: &[SampleMatrix]) -> Result<usize> {
    let Some(first) = sample_sets.first() else {
        return domain("no sample sets given");
    };
    if sample_sets.iter().any(|s| s.p() != first.p()) {
        return domain("sample sets have different node counts");
    }
    Ok(first.p())
}

/// Recovers the support union by pooled ℓ1 regression at every node.
pub fn recover_support_union(
    sample_sets: &[SampleMatrix],
    lambda: f64,
    config: &SolverConfig,
    reconcile_rule: ReconcileRule,
) -> Result<RecoveryResult> {
    recover_support_union_with(sample_sets, lambda, config, reconcile_rule, Exec::default())
}

pub fn recover_support_union_with(
    sample_sets: &[SampleMatrix],
    lambda: f64,
    config: &SolverConfig,
    reconcile_rule: ReconcileRule,
    exec: Exec,
) -> Result<RecoveryResult> {
    let p = check_sets(sample_sets)?;
    let per_node = par::try_map_indexed(exec, p, |r| solve_node_l1(r, sample_sets, lambda, config))?;
    Ok(assemble(per_node, lambda, config, reconcile_rule))
}

/// Fits the novel task with node `r` restricted to its neighbors in `union`.
pub fn estimate_novel(
    samples: &SampleMatrix,
    union: &SignedEdgeSet,
    lambda: f64,
    config: &SolverConfig,
    reconcile_rule: ReconcileRule,
) -> Result<RecoveryResult> {
    estimate_novel_with(samples, union, lambda, config, reconcile_rule, Exec::default())
}

pub fn estimate_novel_with(
    samples: &SampleMatrix,
    union: &SignedEdgeSet,
    lambda: f64,
    config: &SolverConfig,
    reconcile_rule: ReconcileRule,
    exec: Exec,
) -> Result<RecoveryResult> {
    if union.p() != samples.p() {
        return domain(format!("union has p = {} but samples have p = {}", union.p(), samples.p()));
    }
    let sets = std::slice::from_ref(samples);
    let per_node = par::try_map_indexed(exec, samples.p(), |r| {
        let allowed: Vec<usize> = union.neighbors(r).into_iter().map(|(t, _)| t).collect();
        solve_restricted_pooled(r, sets, &allowed, lambda, config)
    })?;
    Ok(assemble(per_node, lambda, config, reconcile_rule))
}

fn assemble(per_node: Vec<SolverReport>, lambda: f64, config: &SolverConfig, rule: ReconcileRule) -> RecoveryResult {
    let edge_set = reconcile(&per_node, rule, config.zero_threshold);
    RecoveryResult {
        all_converged: per_node.iter().all(|r| r.converged),
        per_node,
        edge_set,
        lambda_used: lambda,
        reconcile_rule: rule,
        zero_threshold: config.zero_threshold,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub exact_match: bool,
}

/// Harmonic mean of precision and recall (0 when both are 0).
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Precision, recall and F1 of `estimated` against `truth`.
///
/// A pair counts as correct when it is in both sets and, if `signed`, the
/// signs agree. An empty estimate has precision 1 when the truth is also
/// empty and 0 otherwise; an empty truth has recall 1.
pub fn score(estimated: &SignedEdgeSet, truth: &SignedEdgeSet, signed: bool) -> Result<Score> {
    if estimated.p() != truth.p() {
        return domain(format!("p mismatch: {} vs {}", estimated.p(), truth.p()));
    }
    let correct = estimated
        .iter()
        .filter(|&(s, t, g)| match truth.sign(s, t) {
            Some(h) => !signed || g == h,
            None => false,
        })
        .count();
    let precision = if estimated.is_empty() {
        if truth.is_empty() {
            1.0
        } else {
            0.0
        }
    } else {
        correct as f64 / estimated.len() as f64
    };
    let recall = if truth.is_empty() {
        1.0
    } else {
        correct as f64 / truth.len() as f64
    };
    let exact_match = if signed {
        estimated == truth
    } else {
        estimated.same_pairs(truth)
    };
    Ok(Score {
        precision,
        recall,
        f1: f1_score(precision, recall),
        exact_match,
    })
}
