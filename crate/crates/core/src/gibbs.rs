//! Gibbs sampling of Ising models.
//!
//! Each sample is produced by its own chain: a uniform random start followed
//! by `sweeps` systematic passes over nodes `0..p`, each node redrawn from its
//! conditional law. Chains use independent streams derived from one master
//! seed, so the output is the same whether rows are generated sequentially or
//! in parallel.

use rand::Rng;

use crate::error::{domain, Result};
use crate::ising::{sigmoid, IsingParameter, SampleMatrix};
use crate::par::{self, Exec};
use crate::seed;

/// Sweep count used by the synthetic experiments unless overridden.
pub const DEFAULT_SWEEPS: usize = 10;

/// Draws `n` samples from `theta`.
pub fn gibbs_sample<R: Rng + ?Sized>(
    theta: &IsingParameter,
    n: usize,
    sweeps: usize,
    rng: &mut R,
) -> Result<SampleMatrix> {
    gibbs_sample_with(theta, n, sweeps, rng, Exec::default())
}

pub fn gibbs_sample_with<R: Rng + ?Sized>(
    theta: &IsingParameter,
    n: usize,
    sweeps: usize,
    rng: &mut R,
    exec: Exec,
) -> Result<SampleMatrix> {
    if n == 0 {
        return domain("need at least one sample");
    }
    if sweeps == 0 {
        return domain("need at least one sweep");
    }
    let p = theta.p();
    let mut coupling = vec![0.0; p * p];
    for (s, t, w) in theta.edges() {
        coupling[s * p + t] = w;
        coupling[t * p + s] = w;
    }
    let master: u64 = rng.random();
    let rows = par::map_indexed(exec, n, |i| {
        let mut rng = seed::stream(master, &[i as u64]);
        run_chain(&coupling, p, sweeps, &mut rng)
    });
    SampleMatrix::new(p, rows.concat())
}

fn run_chain<R: Rng>(coupling: &[f64], p: usize, sweeps: usize, rng: &mut R) -> Vec<i8> {
    let mut x: Vec<i8> = (0..p).map(|_| if rng.random_bool(0.5) { 1 } else { -1 }).collect();
    for _ in 0..sweeps {
        for r in 0..p {
            let row = &coupling[r * p..(r + 1) * p];
            let m: f64 = row.iter().zip(&x).map(|(w, &v)| w * f64::from(v)).sum();
            let u: f64 = rng.random();
            x[r] = if u < sigmoid(2.0 * m) { 1 } else { -1 };
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ising::exact_joint_distribution;

    #[test]
    fn uncoupled_means_are_near_zero() {
        let theta = IsingParameter::zeros(5).unwrap();
        let mut rng = seed::stream(1, &[]);
        let n = 10_000;
        let s = gibbs_sample(&theta, n, 1, &mut rng).unwrap();
        for j in 0..5 {
            let mean: f64 = s.rows().map(|x| f64::from(x[j])).sum::<f64>() / n as f64;
            assert!(mean.abs() < 3.0 / (n as f64).sqrt(), "node {j}: {mean}");
        }
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let theta = IsingParameter::from_edges(4, &[(0, 1, 0.5), (1, 2, -0.5), (0, 3, 0.7)]).unwrap();
        let a = gibbs_sample_with(&theta, 500, 10, &mut seed::stream(3, &[]), Exec::Sequential).unwrap();
        let b = gibbs_sample_with(&theta, 500, 10, &mut seed::stream(3, &[]), Exec::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn pairwise_moments_match_enumeration() {
        let theta = IsingParameter::from_edges(
            5,
            &[(0, 1, 0.5), (1, 2, -0.5), (2, 3, 0.5), (3, 4, 0.5), (0, 4, -0.5)],
        )
        .unwrap();
        let table = exact_joint_distribution(&theta).unwrap();
        let n = 40_000;
        let s = gibbs_sample(&theta, n, 50, &mut seed::stream(4, &[])).unwrap();
        for a in 0..5 {
            for b in a + 1..5 {
                let exact: f64 = table.iter().map(|(x, pr)| pr * f64::from(x[a] * x[b])).sum();
                let emp: f64 = s.rows().map(|x| f64::from(x[a] * x[b])).sum::<f64>() / n as f64;
                let sd = ((1.0 - exact * exact) / n as f64).sqrt();
                assert!((emp - exact).abs() <= 4.0 * sd, "({a},{b}): {emp} vs {exact}");
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let theta = IsingParameter::zeros(3).unwrap();
        let mut rng = seed::stream(0, &[]);
        assert!(gibbs_sample(&theta, 0, 10, &mut rng).is_err());
        assert!(gibbs_sample(&theta, 10, 0, &mut rng).is_err());
    }
}
