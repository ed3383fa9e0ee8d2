//! ℓ1-regularized node-wise logistic regression.
//!
//! For node `r` the program is
//!
//! ```text
//! minimize  (1/K) Σ_k ℓ^(k)(θ) + λ ‖θ‖₁     over θ ∈ R^{p-1}
//! ```
//!
//! where `ℓ^(k)` is the node loss of task `k`. With `K = 1` this is ordinary
//! neighborhood regression. The solver is accelerated proximal gradient
//! (soft-thresholding prox) with backtracking, function-value and
//! gradient-direction restarts, and a KKT stopping rule, so every converged
//! report carries its own optimality certificate.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::ising::{covariate_index, covariate_node, node_loss, node_loss_gradient, sigmoid, softplus, NodeView, SampleMatrix};

/// How samples from different tasks are weighted in the pooled loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskWeighting {
    /// Every task contributes `1/K` regardless of its sample count.
    #[default]
    EqualTasks,
    /// Every sample contributes `1/N` where `N` is the total sample count.
    PerSample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Stop once the KKT residual is at most this.
    pub tol: f64,
    pub max_iters: usize,
    /// Step size tried on the first iteration.
    pub initial_step: f64,
    /// Backtracking factor, in `(0, 1)`.
    pub shrink: f64,
    /// A step `t` is accepted when the smooth loss lies below its quadratic
    /// model with curvature `(1 - sufficient_decrease) / t`.
    pub sufficient_decrease: f64,
    /// Coefficients with magnitude below this are reported as zero.
    pub zero_threshold: f64,
    pub weighting: TaskWeighting,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iters: 50_000,
            initial_step: 1.0,
            shrink: 0.5,
            sufficient_decrease: 1e-4,
            zero_threshold: 1e-6,
            weighting: TaskWeighting::EqualTasks,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return domain(format!("tol must be positive, got {}", self.tol));
        }
        if self.max_iters == 0 {
            return domain("max_iters must be at least 1");
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return domain(format!("shrink must lie in (0, 1), got {}", self.shrink));
        }
        if !(self.initial_step > 0.0) {
            return domain("initial_step must be positive");
        }
        if !(0.0..1.0).contains(&self.sufficient_decrease) {
            return domain("sufficient_decrease must lie in [0, 1)");
        }
        if !(self.zero_threshold >= 0.0) {
            return domain("zero_threshold must be nonnegative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub estimate: NodeView,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Penalized objective at the estimate.
    pub objective: f64,
    /// Smallest eigenvalue of the loss Hessian restricted to the nonzero
    /// coordinates. Near zero means the minimizer may not be unique.
    pub active_hessian_min_eig: Option<f64>,
}

impl SolverReport {
    /// Signed neighborhood `{(t, sign θ_rt)}` after thresholding.
    pub fn signed_neighborhood(&self, zero_threshold: f64) -> Vec<(usize, i8)> {
        self.estimate
            .weights
            .iter()
            .enumerate()
            .filter(|(_, w)| w.abs() > zero_threshold)
            .map(|(j, &w)| (covariate_node(self.estimate.r, j), if w > 0.0 { 1 } else { -1 }))
            .collect()
    }
}

/// Pooled loss restricted to a set of covariate columns, with duplicate rows merged.
///
/// Row `i` stores `z_i = x_r x_{cols}`; the loss is `Σ_i w_i softplus(-2 z_i·θ)`.
#[derive(Debug, Clone)]
pub(crate) struct NodeProblem {
    dim: usize,
    rows: Vec<f64>,
    weights: Vec<f64>,
}

impl NodeProblem {
    pub(crate) fn build(
        r: usize,
        sample_sets: &[SampleMatrix],
        cols: &[usize],
        weighting: TaskWeighting,
    ) -> Result<Self> {
        let Some(first) = sample_sets.first() else {
            return domain("no sample sets given");
        };
        let p = first.p();
        if sample_sets.iter().any(|s| s.p() != p) {
            return domain("sample sets have different node counts");
        }
        if r >= p {
            return domain(format!("node {r} out of range for p = {p}"));
        }
        if let Some(&c) = cols.iter().find(|&&c| c == r || c >= p) {
            return domain(format!("covariate {c} is invalid for node {r}"));
        }
        let total: usize = sample_sets.iter().map(|s| s.n()).sum();
        let k = sample_sets.len() as f64;
        let mut merged: BTreeMap<Vec<i8>, f64> = BTreeMap::new();
        for set in sample_sets {
            let w = match weighting {
                TaskWeighting::EqualTasks => 1.0 / (k * set.n() as f64),
                TaskWeighting::PerSample => 1.0 / total as f64,
            };
            for x in set.rows() {
                let key: Vec<i8> = cols.iter().map(|&c| x[r] * x[c]).collect();
                *merged.entry(key).or_insert(0.0) += w;
            }
        }
        let dim = cols.len();
        let mut rows = Vec::with_capacity(merged.len() * dim);
        let mut weights = Vec::with_capacity(merged.len());
        for (key, w) in merged {
            rows.extend(key.into_iter().map(f64::from));
            weights.push(w);
        }
        Ok(Self { dim, rows, weights })
    }

    fn margins<'a>(&'a self, theta: &'a [f64]) -> impl Iterator<Item = (&'a [f64], f64, f64)> + 'a {
        self.weights.iter().enumerate().map(move |(i, &w)| {
            let z = &self.rows[i * self.dim..(i + 1) * self.dim];
            let t: f64 = z.iter().zip(theta).map(|(a, b)| a * b).sum();
            (z, w, t)
        })
    }

    #[cfg(test)]
    pub(crate) fn loss(&self, theta: &[f64]) -> f64 {
        self.margins(theta).map(|(_, w, t)| w * softplus(-2.0 * t)).sum()
    }

    pub(crate) fn loss_grad(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut loss = 0.0;
        for (z, w, t) in self.margins(theta) {
            loss += w * softplus(-2.0 * t);
            let c = -2.0 * w * sigmoid(-2.0 * t);
            for (g, zj) in grad.iter_mut().zip(z) {
                *g += c * zj;
            }
        }
        loss
    }

    /// Hessian `Σ_i w_i η_i z_i z_iᵀ` on the given coordinates.
    pub(crate) fn hessian(&self, theta: &[f64], coords: &[usize]) -> DMatrix<f64> {
        let m = coords.len();
        let mut h = DMatrix::zeros(m, m);
        for (z, w, t) in self.margins(theta) {
            let s = sigmoid(2.0 * t);
            let eta = 4.0 * s * (1.0 - s);
            for a in 0..m {
                for b in 0..m {
                    h[(a, b)] += w * eta * z[coords[a]] * z[coords[b]];
                }
            }
        }
        h
    }
}

fn soft_threshold(v: f64, thr: f64) -> f64 {
    if v > thr {
        v - thr
    } else if v < -thr {
        v + thr
    } else {
        0.0
    }
}

fn l1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

/// Largest subgradient-optimality violation at `theta` given the loss gradient.
pub(crate) fn kkt_from_gradient(theta: &[f64], grad: &[f64], lambda: f64) -> f64 {
    theta
        .iter()
        .zip(grad)
        .map(|(&t, &g)| {
            if t != 0.0 {
                (g + lambda * t.signum()).abs()
            } else {
                (g.abs() - lambda).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

pub(crate) struct RawSolution {
    pub theta: Vec<f64>,
    pub kkt: f64,
    pub iterations: usize,
    pub converged: bool,
    pub objective: f64,
    pub hessian_min_eig: Option<f64>,
}

/// Relative size below which loss differences are treated as rounding noise.
const FV_NOISE: f64 = 1e-10;

pub(crate) fn minimize(problem: &NodeProblem, lambda: f64, config: &SolverConfig, init: &[f64]) -> RawSolution {
    let dim = problem.dim;
    let mut x = init.to_vec();
    let mut gx = vec![0.0; dim];
    let mut fx = problem.loss_grad(&x, &mut gx);
    let mut big_fx = fx + lambda * l1(&x);
    let mut kkt = kkt_from_gradient(&x, &gx, lambda);

    let mut y = x.clone();
    let mut gy = gx.clone();
    let mut fy = fx;
    let mut momentum = 1.0f64;
    let mut step = config.initial_step;
    let mut z = vec![0.0; dim];
    let mut gz = vec![0.0; dim];
    let mut iterations = 0;

    while kkt > config.tol && iterations < config.max_iters {
        iterations += 1;
        let fz = loop {
            for j in 0..dim {
                z[j] = soft_threshold(y[j] - step * gy[j], step * lambda);
            }
            let fz = problem.loss_grad(&z, &mut gz);
            let (mut lin, mut sq, mut curv) = (0.0, 0.0, 0.0);
            for j in 0..dim {
                let d = z[j] - y[j];
                lin += gy[j] * d;
                sq += d * d;
                curv += (gz[j] - gy[j]) * d;
            }
            let slack = (1.0 - config.sufficient_decrease) * sq / step;
            // Near the optimum the change in loss drowns in summation error,
            // so curvature is judged from gradients instead.
            let accepted = if 0.5 * slack > FV_NOISE * fy.abs().max(1.0) {
                fz <= fy + lin + 0.5 * slack
            } else {
                curv <= slack
            };
            if accepted || step < 1e-20 {
                break fz;
            }
            step *= config.shrink;
        };
        let big_fz = fz + lambda * l1(&z);
        let at_x = y == x;
        if big_fz > big_fx && !at_x {
            // momentum overshoot: restart from the current iterate
            momentum = 1.0;
            y.copy_from_slice(&x);
            gy.copy_from_slice(&gx);
            fy = fx;
            continue;
        }
        debug_assert!(
            big_fz <= big_fx + 1e-12 * big_fx.abs().max(1.0),
            "objective increased: {big_fx} -> {big_fz}"
        );
        // gradient-direction restart when the momentum points uphill
        let uphill: f64 = (0..dim).map(|j| (y[j] - z[j]) * (z[j] - x[j])).sum();
        if uphill > 0.0 {
            momentum = 1.0;
        }
        let next = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
        let beta = (momentum - 1.0) / next;
        for j in 0..dim {
            y[j] = z[j] + beta * (z[j] - x[j]);
        }
        momentum = next;
        std::mem::swap(&mut x, &mut z);
        std::mem::swap(&mut gx, &mut gz);
        fx = fz;
        big_fx = big_fz;
        kkt = kkt_from_gradient(&x, &gx, lambda);
        if beta == 0.0 {
            gy.copy_from_slice(&gx);
            fy = fx;
        } else {
            fy = problem.loss_grad(&y, &mut gy);
        }
    }

    let active: Vec<usize> = (0..dim).filter(|&j| x[j] != 0.0).collect();
    let hessian_min_eig = if active.is_empty() {
        None
    } else {
        let h = problem.hessian(&x, &active);
        Some(SymmetricEigen::new(h).eigenvalues.min())
    };
    RawSolution {
        objective: big_fx,
        converged: kkt <= config.tol,
        theta: x,
        kkt,
        iterations,
        hessian_min_eig,
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return domain(format!("lambda must be finite and nonnegative, got {lambda}"));
    }
    Ok(())
}

fn p_of(sample_sets: &[SampleMatrix]) -> Result<usize> {
    match sample_sets.first() {
        Some(s) => Ok(s.p()),
        None => domain("no sample sets given"),
    }
}

/// Solves the pooled ℓ1 node regression for node `r`, starting from zero.
pub fn solve_node_l1(r: usize, sample_sets: &[SampleMatrix], lambda: f64, config: &SolverConfig) -> Result<SolverReport> {
    let p = p_of(sample_sets)?;
    if r >= p {
        return domain(format!("node {r} out of range for p = {p}"));
    }
    solve_node_l1_from(r, sample_sets, lambda, config, &vec![0.0; p - 1])
}

/// [`solve_node_l1`] from an arbitrary starting point.
pub fn solve_node_l1_from(
    r: usize,
    sample_sets: &[SampleMatrix],
    lambda: f64,
    config: &SolverConfig,
    init: &[f64],
) -> Result<SolverReport> {
    let all: Vec<usize> = (0..p_of(sample_sets)?).filter(|&t| t != r).collect();
    solve_on_columns(r, sample_sets, &all, lambda, config, Some(init))
}

/// Solves node `r`'s ℓ1 regression with every coordinate outside `allowed`
/// fixed at zero.
pub fn solve_node_restricted(
    r: usize,
    samples: &SampleMatrix,
    allowed: &[usize],
    lambda: f64,
    config: &SolverConfig,
) -> Result<SolverReport> {
    solve_restricted_pooled(r, std::slice::from_ref(samples), allowed, lambda, config)
}

/// [`solve_node_restricted`] over several pooled sample sets.
pub fn solve_restricted_pooled(
    r: usize,
    sample_sets: &[SampleMatrix],
    allowed: &[usize],
    lambda: f64,
    config: &SolverConfig,
) -> Result<SolverReport> {
    let mut cols = allowed.to_vec();
    cols.sort_unstable();
    cols.dedup();
    solve_on_columns(r, sample_sets, &cols, lambda, config, None)
}

fn solve_on_columns(
    r: usize,
    sample_sets: &[SampleMatrix],
    cols: &[usize],
    lambda: f64,
    config: &SolverConfig,
    init_full: Option<&[f64]>,
) -> Result<SolverReport> {
    check_lambda(lambda)?;
    config.validate()?;
    let p = p_of(sample_sets)?;
    let problem = NodeProblem::build(r, sample_sets, cols, config.weighting)?;
    let init: Vec<f64> = match init_full {
        Some(v) => {
            if v.len() != p - 1 {
                return domain(format!("initial point has {} entries, expected {}", v.len(), p - 1));
            }
            cols.iter().map(|&c| v[covariate_index(r, c).unwrap()]).collect()
        }
        None => vec![0.0; cols.len()],
    };
    let raw = minimize(&problem, lambda, config, &init);
    let mut full = vec![0.0; p - 1];
    for (&c, &v) in cols.iter().zip(&raw.theta) {
        full[covariate_index(r, c).unwrap()] = v;
    }
    Ok(SolverReport {
        estimate: NodeView::new(p, r, full)?,
        kkt_residual: raw.kkt,
        iterations: raw.iterations,
        converged: raw.converged,
        objective: raw.objective,
        active_hessian_min_eig: raw.hessian_min_eig,
    })
}

/// Equal-weight average of the per-task node losses.
pub fn pooled_loss(view: &NodeView, sample_sets: &[SampleMatrix]) -> Result<f64> {
    p_of(sample_sets)?;
    let mut total = 0.0;
    for s in sample_sets {
        total += node_loss(view, s)?;
    }
    Ok(total / sample_sets.len() as f64)
}

/// Equal-weight average of the per-task node-loss gradients.
pub fn pooled_loss_gradient(view: &NodeView, sample_sets: &[SampleMatrix]) -> Result<Vec<f64>> {
    p_of(sample_sets)?;
    let mut total = vec![0.0; view.weights.len()];
    for s in sample_sets {
        for (t, g) in total.iter_mut().zip(node_loss_gradient(view, s)?) {
            *t += g;
        }
    }
    let k = sample_sets.len() as f64;
    total.iter_mut().for_each(|t| *t /= k);
    Ok(total)
}

/// KKT residual of `estimate` for the pooled program with penalty `lambda`:
/// the max over coordinates of `|∇ℓ + λ sign θ|` on nonzeros and
/// `max(0, |∇ℓ| - λ)` on zeros.
pub fn kkt_residual(estimate: &NodeView, sample_sets: &[SampleMatrix], lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    let g = pooled_loss_gradient(estimate, sample_sets)?;
    Ok(kkt_from_gradient(&estimate.weights, &g, lambda))
}

/// `‖∇ℓ(0)‖_∞` for node `r`: the smallest λ whose solution is identically zero.
pub fn lambda_max(r: usize, sample_sets: &[SampleMatrix]) -> Result<f64> {
    let p = p_of(sample_sets)?;
    let g = pooled_loss_gradient(&NodeView::zeros(p, r), sample_sets)?;
    Ok(g.iter().fold(0.0, |m, v| m.max(v.abs())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gibbs::gibbs_sample;
    use crate::ising::IsingParameter;
    use crate::seed;
    use rand::Rng;

    fn data(seed: u64, n: usize) -> (IsingParameter, SampleMatrix) {
        let theta = IsingParameter::from_edges(5, &[(0, 1, 0.5), (0, 2, -0.5), (1, 3, 0.5), (3, 4, -0.5)]).unwrap();
        let s = gibbs_sample(&theta, n, 20, &mut seed::stream(seed, &[])).unwrap();
        (theta, s)
    }

    #[test]
    fn converges_on_many_distinct_rows() {
        use crate::generator::{mixed_couplings, random_max_degree_graph, sample_task_family, DeltaSpec};
        let mut rng = seed::stream(1, &[]);
        let edges = random_max_degree_graph(12, 3, &mut rng, 10_000).unwrap();
        let theta = mixed_couplings(12, &edges, &mut rng).unwrap();
        let family = sample_task_family(&theta, &DeltaSpec::BernoulliMask { q: 0.9 }, 30, &mut rng).unwrap();
        let sets: Vec<SampleMatrix> =
            family.task_params.iter().map(|t| gibbs_sample(t, 200, 10, &mut rng).unwrap()).collect();
        let lambda = (12f64.ln() / 6000.0).sqrt();
        let cfg = SolverConfig { max_iters: 2_000, ..SolverConfig::default() };
        for r in 0..12 {
            let rep = solve_node_l1(r, &sets, lambda, &cfg).unwrap();
            assert!(rep.converged, "node {r}: residual {:e} after {}", rep.kkt_residual, rep.iterations);
        }
    }

    #[test]
    fn large_lambda_gives_zero() {
        let (_, s) = data(1, 400);
        let sets = [s];
        let lmax = lambda_max(0, &sets).unwrap();
        let rep = solve_node_l1(0, &sets, lmax * 1.0001, &SolverConfig::default()).unwrap();
        assert!(rep.estimate.weights.iter().all(|&w| w == 0.0));
        assert!(rep.converged);
        assert_eq!(rep.kkt_residual, 0.0);
        assert_eq!(kkt_residual(&rep.estimate, &sets, lmax).unwrap(), 0.0);
    }

    #[test]
    fn converged_solutions_are_certified() {
        let (_, s) = data(2, 2000);
        let sets = [s];
        let cfg = SolverConfig::default();
        for r in 0..5 {
            for &lambda in &[0.01, 0.03, 0.1] {
                let rep = solve_node_l1(r, &sets, lambda, &cfg).unwrap();
                assert!(rep.converged, "node {r} λ {lambda}");
                assert!(rep.kkt_residual <= cfg.tol);
                let check = kkt_residual(&rep.estimate, &sets, lambda).unwrap();
                assert!(check <= cfg.tol * 1.01, "{check}");
                let mut bumped = rep.estimate.clone();
                bumped.weights[0] += 0.1;
                assert!(kkt_residual(&bumped, &sets, lambda).unwrap() > check);
            }
        }
    }

    #[test]
    fn restart_from_random_point_agrees() {
        let (_, s) = data(3, 1500);
        let sets = [s];
        let cfg = SolverConfig::default();
        let mut rng = seed::stream(99, &[]);
        for r in 0..5 {
            let a = solve_node_l1(r, &sets, 0.02, &cfg).unwrap();
            let init: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let b = solve_node_l1_from(r, &sets, 0.02, &cfg, &init).unwrap();
            assert!(a.converged && b.converged);
            for (x, y) in a.estimate.weights.iter().zip(&b.estimate.weights) {
                assert!((x - y).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn pooled_loss_is_task_average() {
        let (_, a) = data(4, 300);
        let (_, b) = data(5, 700);
        let sets = [a.clone(), b.clone()];
        let view = NodeView::new(5, 2, vec![0.3, -0.2, 0.1, 0.05]).unwrap();
        let pooled = pooled_loss(&view, &sets).unwrap();
        let avg = 0.5 * (node_loss(&view, &a).unwrap() + node_loss(&view, &b).unwrap());
        assert!((pooled - avg).abs() < 1e-12);
        let cols: Vec<usize> = (0..5).filter(|&t| t != 2).collect();
        let prob = NodeProblem::build(2, &sets, &cols, TaskWeighting::EqualTasks).unwrap();
        assert!((prob.loss(&view.weights) - avg).abs() < 1e-12);
    }

    #[test]
    fn per_sample_weighting_matches_concatenation() {
        let (_, a) = data(6, 300);
        let (_, b) = data(7, 700);
        let cfg = SolverConfig {
            weighting: TaskWeighting::PerSample,
            ..SolverConfig::default()
        };
        let split = solve_node_l1(1, &[a.clone(), b.clone()], 0.03, &cfg).unwrap();
        let joined = solve_node_l1(1, &[SampleMatrix::concat(&[a, b]).unwrap()], 0.03, &SolverConfig::default()).unwrap();
        for (x, y) in split.estimate.weights.iter().zip(&joined.estimate.weights) {
            assert!((x - y).abs() < 1e-8);
        }
    }

    #[test]
    fn empty_restriction() {
        let (_, s) = data(8, 100);
        let rep = solve_node_restricted(0, &s, &[], 0.05, &SolverConfig::default()).unwrap();
        assert!(rep.estimate.weights.iter().all(|&w| w == 0.0));
        assert!((rep.objective - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(rep.converged);
    }

    #[test]
    fn vacuous_restriction_matches_unrestricted() {
        let (_, s) = data(9, 800);
        let cfg = SolverConfig::default();
        let all = [1, 2, 3, 4];
        let a = solve_node_restricted(0, &s, &all, 0.02, &cfg).unwrap();
        let b = solve_node_l1(0, std::slice::from_ref(&s), 0.02, &cfg).unwrap();
        for (x, y) in a.estimate.weights.iter().zip(&b.estimate.weights) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn restriction_zeroes_outside() {
        let (_, s) = data(10, 800);
        let rep = solve_node_restricted(3, &s, &[1, 4], 0.01, &SolverConfig::default()).unwrap();
        for (j, &w) in rep.estimate.weights.iter().enumerate() {
            let node = rep.estimate.covariate_node(j);
            if node != 1 && node != 4 {
                assert_eq!(w, 0.0);
            }
        }
        assert!(rep.converged);
    }

    #[test]
    fn input_validation() {
        let (_, s) = data(11, 50);
        let cfg = SolverConfig::default();
        assert!(solve_node_l1(0, std::slice::from_ref(&s), -1.0, &cfg).is_err());
        assert!(solve_node_l1(7, std::slice::from_ref(&s), 0.1, &cfg).is_err());
        assert!(solve_node_l1(0, &[], 0.1, &cfg).is_err());
        assert!(solve_node_restricted(0, &s, &[0], 0.1, &cfg).is_err());
        let other = SampleMatrix::new(3, vec![1, 1, 1]).unwrap();
        assert!(solve_node_l1(0, &[s, other], 0.1, &cfg).is_err());
        let bad = SolverConfig { shrink: 1.0, ..SolverConfig::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn separable_data_without_penalty_does_not_converge() {
        // x_0 == x_1 in every row: the unpenalized optimum is at infinity
        let rows: Vec<Vec<i8>> = vec![vec![1, 1], vec![-1, -1], vec![1, 1]];
        let s = SampleMatrix::from_rows(&rows).unwrap();
        let cfg = SolverConfig { max_iters: 200, ..SolverConfig::default() };
        let rep = solve_node_l1(0, &[s], 0.0, &cfg).unwrap();
        assert!(!rep.converged);
        assert_eq!(rep.iterations, 200);
    }
}
