//! Random graphs, couplings and task families.
//!
//! A task family is a deterministic common parameter `θ̄` plus `K` i.i.d.
//! perturbations `Δ^(k)`, with task parameters `θ̄^(k) = θ̄ + Δ^(k)`. Every
//! perturbation is supported inside `supp(θ̄)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::ising::{num_pairs, IsingParameter};

/// Default cap on rejection-sampling attempts in [`random_max_degree_graph`].
pub const DEFAULT_MAX_ATTEMPTS: usize = 10_000;

/// Largest `|supp(θ̄)|` for which a Bernoulli mask is expanded into atoms.
pub const MAX_MASK_EXPANSION: usize = 12;

/// Tolerance on the total mass of a finite-support spec.
const PROB_SUM_TOL: f64 = 1e-9;

/// One atom of a finite-support perturbation distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaAtom {
    /// Perturbation weights in pair order.
    pub delta: Vec<f64>,
    pub probability: f64,
}

/// Distribution of the per-task perturbation `Δ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DeltaSpec {
    /// `Δ ≡ 0`.
    #[default]
    None,
    /// Each edge of `θ̄` survives independently with probability `q`,
    /// i.e. `Δ_st = θ̄_st (X_st - 1)` with `X_st ~ Bernoulli(q)`.
    BernoulliMask { q: f64 },
    /// Finitely many perturbation vectors with given probabilities.
    FiniteSupport { atoms: Vec<DeltaAtom> },
}

impl DeltaSpec {
    /// Checks the spec against `theta_bar`: probabilities and support containment.
    pub fn validate(&self, theta_bar: &IsingParameter) -> Result<()> {
        match self {
            DeltaSpec::None => Ok(()),
            DeltaSpec::BernoulliMask { q } => {
                if !(0.0..=1.0).contains(q) {
                    return domain(format!("mask probability {q} outside [0, 1]"));
                }
                Ok(())
            }
            DeltaSpec::FiniteSupport { atoms } => {
                if atoms.is_empty() {
                    return domain("finite-support spec has no atoms");
                }
                let m = num_pairs(theta_bar.p());
                let mut total = 0.0;
                for (i, atom) in atoms.iter().enumerate() {
                    if atom.delta.len() != m {
                        return domain(format!(
                            "atom {i} has {} entries, expected {m}",
                            atom.delta.len()
                        ));
                    }
                    if !(atom.probability >= 0.0 && atom.probability <= 1.0) {
                        return domain(format!("atom {i} has probability {}", atom.probability));
                    }
                    if atom.delta.iter().any(|d| !d.is_finite()) {
                        return domain(format!("atom {i} has a non-finite entry"));
                    }
                    for (k, (&d, &w)) in atom.delta.iter().zip(theta_bar.weights()).enumerate() {
                        if d != 0.0 && w == 0.0 {
                            let (s, t) = crate::ising::pair_of(theta_bar.p(), k);
                            return domain(format!(
                                "atom {i} perturbs pair ({s}, {t}) outside supp(theta_bar)"
                            ));
                        }
                    }
                    total += atom.probability;
                }
                if (total - 1.0).abs() > PROB_SUM_TOL {
                    return domain(format!("atom probabilities sum to {total}, not 1"));
                }
                Ok(())
            }
        }
    }

    /// The distribution as an explicit list of `(Δ, probability)` atoms.
    ///
    /// A Bernoulli mask expands to `2^|S|` atoms and is refused when
    /// `|S| > MAX_MASK_EXPANSION`.
    pub fn atoms(&self, theta_bar: &IsingParameter) -> Result<Vec<(IsingParameter, f64)>> {
        self.validate(theta_bar)?;
        let p = theta_bar.p();
        match self {
            DeltaSpec::None => Ok(vec![(IsingParameter::zeros(p)?, 1.0)]),
            DeltaSpec::FiniteSupport { atoms } => atoms
                .iter()
                .map(|a| Ok((IsingParameter::from_weights(p, a.delta.clone())?, a.probability)))
                .collect(),
            DeltaSpec::BernoulliMask { q } => {
                let support = theta_bar.support();
                if support.len() > MAX_MASK_EXPANSION {
                    return Err(Error::Unsupported(format!(
                        "Bernoulli mask over {} edges exceeds the expansion limit of {MAX_MASK_EXPANSION}",
                        support.len()
                    )));
                }
                let mut out = Vec::with_capacity(1 << support.len());
                for mask in 0u32..1 << support.len() {
                    let mut delta = vec![0.0; num_pairs(p)];
                    let mut prob = 1.0;
                    for (b, &k) in support.iter().enumerate() {
                        if mask >> b & 1 == 1 {
                            prob *= q;
                        } else {
                            prob *= 1.0 - q;
                            delta[k] = -theta_bar.weights()[k];
                        }
                    }
                    if prob > 0.0 {
                        out.push((IsingParameter::from_weights(p, delta)?, prob));
                    }
                }
                Ok(out)
            }
        }
    }

    /// Draws one `Δ`.
    pub fn draw<R: Rng + ?Sized>(&self, theta_bar: &IsingParameter, rng: &mut R) -> Result<IsingParameter> {
        match self {
            DeltaSpec::None => IsingParameter::zeros(theta_bar.p()),
            DeltaSpec::BernoulliMask { q } => bernoulli_mask_delta(theta_bar, *q, rng),
            DeltaSpec::FiniteSupport { atoms } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut chosen = atoms.len() - 1;
                for (i, a) in atoms.iter().enumerate() {
                    acc += a.probability;
                    if u < acc {
                        chosen = i;
                        break;
                    }
                }
                IsingParameter::from_weights(theta_bar.p(), atoms[chosen].delta.clone())
            }
        }
    }
}

/// `θ̄` together with `K` sampled task parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskFamily {
    pub theta_bar: IsingParameter,
    pub delta_spec: DeltaSpec,
    pub deltas: Vec<IsingParameter>,
    pub task_params: Vec<IsingParameter>,
}

impl TaskFamily {
    pub fn k(&self) -> usize {
        self.task_params.len()
    }

    pub fn p(&self) -> usize {
        self.theta_bar.p()
    }
}

/// Random graph with maximum degree at most `d`.
///
/// Each pair is an edge independently with probability `d / (p - 1)`; the
/// whole graph is redrawn until its maximum degree is `<= d`.
pub fn random_max_degree_graph<R: Rng + ?Sized>(
    p: usize,
    d: usize,
    rng: &mut R,
    max_attempts: usize,
) -> Result<Vec<(usize, usize)>> {
    if p < 2 {
        return domain(format!("need p >= 2 nodes, got {p}"));
    }
    if d > p - 1 {
        return domain(format!("max degree {d} exceeds p - 1 = {}", p - 1));
    }
    let prob = d as f64 / (p - 1) as f64;
    let mut degree = vec![0usize; p];
    for _ in 0..max_attempts {
        degree.iter_mut().for_each(|v| *v = 0);
        let mut edges = Vec::new();
        for s in 0..p {
            for t in s + 1..p {
                if rng.random_bool(prob) {
                    edges.push((s, t));
                    degree[s] += 1;
                    degree[t] += 1;
                }
            }
        }
        if degree.iter().all(|&v| v <= d) {
            return Ok(edges);
        }
    }
    Err(Error::Generation {
        p,
        d,
        attempts: max_attempts,
    })
}

/// Mixed couplings: `±0.5` with equal probability on every listed edge.
pub fn mixed_couplings<R: Rng + ?Sized>(
    p: usize,
    edges: &[(usize, usize)],
    rng: &mut R,
) -> Result<IsingParameter> {
    let weighted: Vec<_> = edges
        .iter()
        .map(|&(s, t)| (s, t, if rng.random_bool(0.5) { 0.5 } else { -0.5 }))
        .collect();
    IsingParameter::from_edges(p, &weighted)
}

/// One Bernoulli-mask draw: `Δ_st = 0` with probability `q`, `-θ̄_st` otherwise.
pub fn bernoulli_mask_delta<R: Rng + ?Sized>(
    theta_bar: &IsingParameter,
    q: f64,
    rng: &mut R,
) -> Result<IsingParameter> {
    if !(0.0..=1.0).contains(&q) {
        return domain(format!("mask probability {q} outside [0, 1]"));
    }
    let delta = theta_bar
        .weights()
        .iter()
        .map(|&w| {
            if w != 0.0 && !rng.random_bool(q) {
                -w
            } else {
                0.0
            }
        })
        .collect();
    IsingParameter::from_weights(theta_bar.p(), delta)
}

/// Draws `k` i.i.d. perturbations and the corresponding task parameters.
pub fn sample_task_family<R: Rng + ?Sized>(
    theta_bar: &IsingParameter,
    delta_spec: &DeltaSpec,
    k: usize,
    rng: &mut R,
) -> Result<TaskFamily> {
    if k == 0 {
        return domain("a task family needs K >= 1");
    }
    delta_spec.validate(theta_bar)?;
    let mut deltas = Vec::with_capacity(k);
    let mut task_params = Vec::with_capacity(k);
    for _ in 0..k {
        let delta = delta_spec.draw(theta_bar, rng)?;
        task_params.push(theta_bar.add(&delta)?);
        deltas.push(delta);
    }
    Ok(TaskFamily {
        theta_bar: theta_bar.clone(),
        delta_spec: delta_spec.clone(),
        deltas,
        task_params,
    })
}

/// Three-node family with `θ̄ = (1, 1, 1)` whose tasks are, with equal
/// probability, one of the three two-edge graphs with both couplings `a`.
pub fn symmetric_triangle_family(a: f64) -> Result<(IsingParameter, DeltaSpec)> {
    let theta_bar = IsingParameter::from_weights(3, vec![1.0, 1.0, 1.0])?;
    let third = 1.0 / 3.0;
    let atoms = [
        vec![a - 1.0, a - 1.0, -1.0],
        vec![a - 1.0, -1.0, a - 1.0],
        vec![-1.0, a - 1.0, a - 1.0],
    ]
    .into_iter()
    .map(|delta| DeltaAtom {
        delta,
        probability: third,
    })
    .collect();
    Ok((theta_bar, DeltaSpec::FiniteSupport { atoms }))
}
