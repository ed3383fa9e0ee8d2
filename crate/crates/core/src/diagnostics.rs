//! Fisher-information diagnostics for the recovery conditions.
//!
//! For node `r` the Fisher matrix evaluated at `θ` is
//! `Q = (1/K) Σ_k E[η(X^(k); θ) X^(k)_{\r} X^(k)_{\r}ᵀ]`. It is computed either
//! from samples or, for small `p` and finite-support perturbations, exactly by
//! enumerating every configuration of every task distribution. From `Q` and
//! the neighbor set `S` of `r` we read off the dependency constants
//! (`C_min = λ_min(Q_SS)`, `D_max = λ_max(E[X Xᵀ])`) and the incoherence
//! `‖Q_{S^c S} Q_SS^{-1}‖_∞`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::generator::DeltaSpec;
use crate::ising::{covariate_node, eta, exact_joint_distribution, IsingParameter, SampleMatrix};
use crate::par::{self, Exec};

/// Largest `p` for exact population quantities.
pub const MAX_POPULATION_P: usize = 14;

/// Eigen-decompositions must satisfy `‖Qv − λv‖ ≤ EIGEN_RESIDUAL_TOL`.
pub const EIGEN_RESIDUAL_TOL: f64 = 1e-8;

/// Stopping tolerance for [`find_assumption3_root`].
pub const ROOT_TOL: f64 = 1e-8;

/// `Q_SS` is treated as singular when `λ_min ≤ SINGULAR_RTOL · λ_max`.
const SINGULAR_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FisherSource {
    Population,
    Sample,
}

#[derive(Debug, Clone, Serialize)]
pub struct FisherReport {
    pub r: usize,
    /// `(p-1) × (p-1)` Fisher matrix, rows in covariate order.
    pub q: Vec<Vec<f64>>,
    /// Covariate second-moment matrix `E[X_{\r} X_{\r}ᵀ]`.
    pub second_moment: Vec<Vec<f64>>,
    /// Neighbors of `r` (node indices).
    pub s_r: Vec<usize>,
    /// `λ_min(Q_SS)`; `+∞` when `S` is empty.
    pub c_min: f64,
    pub d_max: f64,
    /// `‖Q_{S^c S} Q_SS^{-1}‖_∞`, absent when `Q_SS` is singular.
    pub incoherence: Option<f64>,
    /// `λ_max(Q_SS) / λ_min(Q_SS)`.
    pub condition: f64,
    pub source: FisherSource,
}

impl FisherReport {
    pub fn q_matrix(&self) -> DMatrix<f64> {
        to_matrix(&self.q)
    }

    /// Covariate slots of the neighbor set.
    pub fn s_slots(&self) -> Vec<usize> {
        self.s_r.iter().map(|&t| if t < self.r { t } else { t - 1 }).collect()
    }

    /// Covariate slots outside the neighbor set.
    pub fn sc_slots(&self) -> Vec<usize> {
        let s = self.s_slots();
        (0..self.q.len()).filter(|j| !s.contains(j)).collect()
    }
}

fn to_matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let m = rows.len();
    DMatrix::from_fn(m, m, |a, b| rows[a][b])
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|a| (0..m.ncols()).map(|b| m[(a, b)]).collect()).collect()
}

/// Eigenvalues of a symmetric matrix, ascending, with a residual check on
/// every eigenpair.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    let eig = SymmetricEigen::new(m.clone());
    let scale = m.amax().max(1.0);
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        let v = eig.eigenvectors.column(k);
        let resid = (m * v - v * lam).norm();
        if resid > EIGEN_RESIDUAL_TOL * scale {
            return Err(Error::Domain(format!("eigenpair {k} residual {resid:e} exceeds tolerance")));
        }
    }
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    Ok(vals)
}

fn submatrix(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |a, b| m[(rows[a], cols[b])])
}

fn build_report(
    r: usize,
    q: DMatrix<f64>,
    second: DMatrix<f64>,
    s_r: Vec<usize>,
    source: FisherSource,
) -> Result<FisherReport> {
    let mut report = FisherReport {
        r,
        q: to_rows(&q),
        second_moment: to_rows(&second),
        s_r,
        c_min: f64::INFINITY,
        d_max: 0.0,
        incoherence: None,
        condition: 1.0,
        source,
    };
    let (c_min, d_max) = dependency_check(&report)?;
    report.c_min = c_min;
    report.d_max = d_max;
    let s = report.s_slots();
    if !s.is_empty() {
        let ev = symmetric_eigenvalues(&submatrix(&q, &s, &s))?;
        report.condition = ev[ev.len() - 1] / ev[0];
    }
    report.incoherence = incoherence_check(&report).ok();
    Ok(report)
}

/// Sample Fisher matrix at `theta_eval`, averaged over tasks with equal weight.
pub fn sample_fisher(theta_eval: &IsingParameter, sample_sets: &[SampleMatrix], r: usize) -> Result<FisherReport> {
    let p = theta_eval.p();
    if sample_sets.is_empty() {
        return domain("no sample sets given");
    }
    if sample_sets.iter().any(|s| s.p() != p) {
        return domain("sample sets do not match the parameter's p");
    }
    if r >= p {
        return domain(format!("node {r} out of range"));
    }
    let view = theta_eval.node_view(r);
    let m = p - 1;
    let mut q = DMatrix::zeros(m, m);
    let mut second = DMatrix::zeros(m, m);
    let k = sample_sets.len() as f64;
    let mut xr = vec![0.0; m];
    for set in sample_sets {
        let w = 1.0 / (k * set.n() as f64);
        for x in set.rows() {
            for (j, v) in xr.iter_mut().enumerate() {
                *v = f64::from(x[covariate_node(r, j)]);
            }
            let e = eta(view.local_field(x));
            for a in 0..m {
                for b in 0..m {
                    let xx = xr[a] * xr[b];
                    q[(a, b)] += w * e * xx;
                    second[(a, b)] += w * xx;
                }
            }
        }
    }
    build_report(r, q, second, theta_eval.neighbors(r), FisherSource::Sample)
}

fn check_population(theta_bar: &IsingParameter, r: usize) -> Result<()> {
    if theta_bar.p() > MAX_POPULATION_P {
        return Err(Error::Capacity {
            what: "population diagnostics",
            p: theta_bar.p(),
            max: MAX_POPULATION_P,
        });
    }
    if r >= theta_bar.p() {
        return domain(format!("node {r} out of range"));
    }
    Ok(())
}

/// Task distributions `θ̄ + Δ` with their probabilities.
fn task_atoms(theta_bar: &IsingParameter, spec: &DeltaSpec) -> Result<Vec<(IsingParameter, f64)>> {
    spec.atoms(theta_bar)?
        .into_iter()
        .map(|(delta, pr)| Ok((theta_bar.add(&delta)?, pr)))
        .collect()
}

/// Population Fisher matrix at `θ̄`, the expectation taken over the
/// perturbation distribution and each task's exact law.
pub fn population_fisher(theta_bar: &IsingParameter, delta_spec: &DeltaSpec, r: usize) -> Result<FisherReport> {
    check_population(theta_bar, r)?;
    let p = theta_bar.p();
    let m = p - 1;
    let view = theta_bar.node_view(r);
    let atoms = task_atoms(theta_bar, delta_spec)?;
    // flattened [Q | second moment]
    let mut acc = vec![0.0; 2 * m * m];
    for (task, prob) in &atoms {
        let table = exact_joint_distribution(task)?;
        let probs = table.probs();
        let part = par::chunked_sum(Exec::default(), probs.len(), 256, 2 * m * m, |c, out| {
            let x = crate::ising::config(p, c);
            let w = prob * probs[c];
            let e = eta(view.local_field(&x));
            for a in 0..m {
                let xa = f64::from(x[covariate_node(r, a)]);
                for b in 0..m {
                    let xx = xa * f64::from(x[covariate_node(r, b)]);
                    out[a * m + b] += w * e * xx;
                    out[m * m + a * m + b] += w * xx;
                }
            }
        });
        for (t, v) in acc.iter_mut().zip(part) {
            *t += v;
        }
    }
    let q = DMatrix::from_fn(m, m, |a, b| acc[a * m + b]);
    let second = DMatrix::from_fn(m, m, |a, b| acc[m * m + a * m + b]);
    build_report(r, q, second, theta_bar.neighbors(r), FisherSource::Population)
}

/// `(C_min, D_max)`: smallest eigenvalue of `Q_SS` (`+∞` for empty `S`) and
/// largest eigenvalue of the covariate second-moment matrix.
pub fn dependency_check(report: &FisherReport) -> Result<(f64, f64)> {
    let s = report.s_slots();
    let q = report.q_matrix();
    let c_min = if s.is_empty() {
        f64::INFINITY
    } else {
        symmetric_eigenvalues(&submatrix(&q, &s, &s))?[0]
    };
    let second = symmetric_eigenvalues(&to_matrix(&report.second_moment))?;
    let d_max = second.last().copied().unwrap_or(0.0);
    Ok((c_min, d_max))
}

/// `‖Q_{S^c S} Q_SS^{-1}‖_∞`, the maximum absolute row sum.
pub fn incoherence_check(report: &FisherReport) -> Result<f64> {
    let s = report.s_slots();
    let sc = report.sc_slots();
    if s.is_empty() || sc.is_empty() {
        return Ok(0.0);
    }
    let q = report.q_matrix();
    let qss = submatrix(&q, &s, &s);
    let ev = symmetric_eigenvalues(&qss)?;
    let (lo, hi) = (ev[0], ev[ev.len() - 1]);
    if lo <= SINGULAR_RTOL * hi.abs().max(f64::MIN_POSITIVE) {
        return Err(Error::Singular {
            condition: if lo > 0.0 { hi / lo } else { f64::INFINITY },
        });
    }
    let inv = qss
        .clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or(Error::Singular { condition: hi / lo })?;
    let prod = submatrix(&q, &sc, &s) * inv;
    Ok((0..prod.nrows())
        .map(|a| prod.row(a).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max))
}

/// Componentwise value of the symmetry quantity
/// `E_Δ E_{X~θ̄+Δ}[ X_{\r} (E_θ̄[X_r|X_{\r}] − E_{θ̄+Δ}[X_r|X_{\r}]) ]`,
/// one entry per covariate.
pub fn assumption3_vector(theta_bar: &IsingParameter, delta_spec: &DeltaSpec, r: usize) -> Result<Vec<f64>> {
    check_population(theta_bar, r)?;
    let p = theta_bar.p();
    let m = p - 1;
    let base = theta_bar.node_view(r);
    let mut acc = vec![0.0; m];
    for (task, prob) in task_atoms(theta_bar, delta_spec)? {
        let view = task.node_view(r);
        let table = exact_joint_distribution(&task)?;
        let probs = table.probs();
        let part = par::chunked_sum(Exec::default(), probs.len(), 256, m, |c, out| {
            let x = crate::ising::config(p, c);
            let diff = base.local_field(&x).tanh() - view.local_field(&x).tanh();
            let w = prob * probs[c] * diff;
            for (a, o) in out.iter_mut().enumerate() {
                *o += w * f64::from(x[covariate_node(r, a)]);
            }
        });
        for (t, v) in acc.iter_mut().zip(part) {
            *t += v;
        }
    }
    Ok(acc)
}

/// Infinity norm of [`assumption3_vector`].
pub fn assumption3_norm(theta_bar: &IsingParameter, delta_spec: &DeltaSpec, r: usize) -> Result<f64> {
    Ok(assumption3_vector(theta_bar, delta_spec, r)?
        .iter()
        .fold(0.0, |m, v| m.max(v.abs())))
}

/// Finds the family parameter `a` at which the symmetry quantity vanishes.
///
/// `family(a)` builds `(θ̄, Δ spec)`. The signed scalar tracked by bisection
/// is the coordinate of [`assumption3_vector`] with the largest magnitude at
/// the lower bracket end. Stops when its magnitude is at most [`ROOT_TOL`].
pub fn find_assumption3_root<F>(family: F, bracket: (f64, f64), r: usize) -> Result<f64>
where
    F: Fn(f64) -> Result<(IsingParameter, DeltaSpec)>,
{
    let (mut lo, mut hi) = bracket;
    if !(lo < hi) {
        return domain(format!("bracket [{lo}, {hi}] is empty"));
    }
    let eval = |a: f64| -> Result<Vec<f64>> {
        let (theta, spec) = family(a)?;
        assumption3_vector(&theta, &spec, r)
    };
    let v_lo = eval(lo)?;
    let coord = (0..v_lo.len())
        .max_by(|&a, &b| v_lo[a].abs().total_cmp(&v_lo[b].abs()))
        .ok_or_else(|| Error::Domain("family has no covariates".into()))?;
    let signed = |a: f64| -> Result<f64> { Ok(eval(a)?[coord]) };
    let mut f_lo = v_lo[coord];
    let f_hi = signed(hi)?;
    if f_lo.abs() <= ROOT_TOL {
        return Ok(lo);
    }
    if f_hi.abs() <= ROOT_TOL {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::Bracket { lo, hi, f_lo, f_hi });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let f_mid = signed(mid)?;
        if f_mid.abs() <= ROOT_TOL || hi - lo < 1e-15 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
