//! Seeded synthetic experiments.
//!
//! Each trial draws a random max-degree graph with mixed couplings, a task
//! family, and Gibbs samples, then runs recovery and scores it against the
//! generator's ground truth. Trial `i` uses generator streams derived from
//! `(seed, i)` only, so results do not depend on thread count or on which
//! other trials run.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::generator::{mixed_couplings, random_max_degree_graph, sample_task_family, DeltaSpec, DEFAULT_MAX_ATTEMPTS};
use crate::gibbs::{gibbs_sample_with, DEFAULT_SWEEPS};
use crate::ising::{IsingParameter, SampleMatrix};
use crate::par::{self, Exec};
use crate::recovery::{
    estimate_novel_with, lambda_aux, lambda_novel, recover_support_union_with, score, ReconcileRule, RecoveryResult,
    SignedEdgeSet,
};
use crate::seed;
use crate::solver::SolverConfig;

const TAG_UNION: u64 = 1;
const TAG_NOVEL: u64 = 2;

/// Where the novel-task experiment takes its support union from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnionSource {
    /// `supp(θ̄)` from the generator.
    Truth,
    /// A fresh pooled recovery with `n = union_c` samples per auxiliary task.
    #[default]
    Estimated,
}

impl std::str::FromStr for UnionSource {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "truth" => Ok(Self::Truth),
            "estimated" => Ok(Self::Estimated),
            other => Err(format!("unknown union source '{other}' (expected truth or estimated)")),
        }
    }
}

fn default_trials() -> usize {
    100
}
fn default_beta() -> f64 {
    1.0
}
fn default_sweeps() -> usize {
    DEFAULT_SWEEPS
}
fn default_delta() -> DeltaSpec {
    DeltaSpec::BernoulliMask { q: 0.9 }
}
fn default_union_c() -> f64 {
    50.0
}
fn default_c_grid() -> Vec<f64> {
    vec![5.0, 25.0, 50.0, 100.0, 200.0]
}
fn default_c_star_grid() -> Vec<f64> {
    vec![5.0, 50.0, 200.0]
}
fn default_failure_budget() -> f64 {
    1.0
}

/// One experiment, as read from a TOML config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub p: usize,
    /// Maximum node degree of the random graph.
    pub d: usize,
    /// Number of auxiliary tasks; `⌈d³ ln p⌉` when absent.
    #[serde(default)]
    pub k: Option<usize>,
    /// Union experiment sweep: each `C` gives `n = ⌈C⌉` samples per auxiliary task.
    #[serde(default = "default_c_grid")]
    pub c_grid: Vec<f64>,
    /// Novel experiment sweep: each `C*` gives `n_novel = ⌈C* d³ ln d⌉`.
    #[serde(default = "default_c_star_grid")]
    pub c_star_grid: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_beta")]
    pub beta_aux: f64,
    #[serde(default = "default_beta")]
    pub beta_novel: f64,
    #[serde(default = "default_sweeps")]
    pub gibbs_sweeps: usize,
    pub seed: u64,
    #[serde(default)]
    pub reconcile: ReconcileRule,
    #[serde(default = "default_delta")]
    pub delta: DeltaSpec,
    #[serde(default)]
    pub union_source: UnionSource,
    /// `C` of the union recovery feeding the novel experiment.
    #[serde(default = "default_union_c")]
    pub union_c: f64,
    /// Score with signs. Defaults to unsigned for the union experiment and
    /// signed for the novel one.
    #[serde(default)]
    pub signed: Option<bool>,
    /// Largest tolerated fraction of trials with a non-converged solve.
    #[serde(default = "default_failure_budget")]
    pub failure_budget: f64,
    #[serde(default)]
    pub solver: SolverConfig,
}

impl ExperimentConfig {
    /// Config with every optional field at its default.
    pub fn new(p: usize, d: usize, seed: u64) -> Self {
        Self {
            p,
            d,
            k: None,
            c_grid: default_c_grid(),
            c_star_grid: default_c_star_grid(),
            trials: default_trials(),
            beta_aux: 1.0,
            beta_novel: 1.0,
            gibbs_sweeps: DEFAULT_SWEEPS,
            seed,
            reconcile: ReconcileRule::default(),
            delta: default_delta(),
            union_source: UnionSource::default(),
            union_c: default_union_c(),
            signed: None,
            failure_budget: default_failure_budget(),
            solver: SolverConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.p < 2 {
            return bad(format!("p must be at least 2, got {}", self.p));
        }
        if self.d > self.p - 1 {
            return bad(format!("d = {} exceeds p - 1 = {}", self.d, self.p - 1));
        }
        if self.k == Some(0) {
            return bad("k must be positive".into());
        }
        if self.trials == 0 {
            return bad("trials must be positive".into());
        }
        if self.gibbs_sweeps == 0 {
            return bad("gibbs_sweeps must be positive".into());
        }
        if !(self.beta_aux > 0.0 && self.beta_novel > 0.0) {
            return bad("beta_aux and beta_novel must be positive".into());
        }
        for &c in self.c_grid.iter().chain(&self.c_star_grid).chain(std::iter::once(&self.union_c)) {
            if !(c > 0.0 && c.is_finite()) {
                return bad(format!("sweep values must be positive, got {c}"));
            }
        }
        if !(0.0..=1.0).contains(&self.failure_budget) {
            return bad("failure_budget must lie in [0, 1]".into());
        }
        self.solver.validate().map_err(|e| Error::Config(e.to_string()))?;
        if let DeltaSpec::FiniteSupport { .. } = self.delta {
            return bad("random-graph experiments need delta kind 'none' or 'bernoulli-mask'".into());
        }
        if let DeltaSpec::BernoulliMask { q } = self.delta {
            if !(0.0..=1.0).contains(&q) {
                return bad(format!("mask probability {q} outside [0, 1]"));
            }
        }
        Ok(())
    }

    /// Number of auxiliary tasks, `⌈d³ ln p⌉` unless fixed.
    pub fn num_tasks(&self) -> usize {
        self.k.unwrap_or_else(|| task_count_rule(self.p, self.d))
    }

    /// `⌈C* d³ ln d⌉`.
    pub fn n_novel(&self, c_star: f64) -> usize {
        novel_sample_rule(c_star, self.d)
    }

    /// SHA-256 of the canonical JSON encoding of the config.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// `⌈d³ ln p⌉`, at least 1.
pub fn task_count_rule(p: usize, d: usize) -> usize {
    ((d as f64).powi(3) * (p as f64).ln()).ceil().max(1.0) as usize
}

/// `⌈C* d³ ln d⌉`, at least 1.
pub fn novel_sample_rule(c_star: f64, d: usize) -> usize {
    (c_star * (d as f64).powi(3) * (d as f64).ln()).ceil().max(1.0) as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Union,
    Novel,
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Union => "union",
            Self::Novel => "novel",
        })
    }
}

/// One trial at one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub experiment: ExperimentKind,
    pub p: usize,
    pub d: usize,
    pub k: usize,
    /// `C` for the union experiment, `C*` for the novel one.
    pub c: f64,
    /// Samples per task fed to the recovery being scored.
    pub n: usize,
    pub trial: usize,
    pub lambda: f64,
    pub true_edges: usize,
    pub estimated_edges: usize,
    pub success: bool,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub converged: bool,
    pub wall_ms: f64,
}

/// Per-trial outcome with the recovery kept for optional dumps.
#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub row: ResultRow,
    pub recovery: RecoveryResult,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub c: f64,
    pub n: usize,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub mean_precision: f64,
    pub mean_recall: f64,
    pub mean_f1: f64,
    pub nonconverged: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub experiment: ExperimentKind,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub k: usize,
    pub points: Vec<SweepPoint>,
    /// Fraction of trials with at least one non-converged solve.
    pub nonconverged_fraction: f64,
}

impl Summary {
    pub fn point(&self, c: f64) -> Option<&SweepPoint> {
        self.points.iter().find(|pt| pt.c == c)
    }

    pub fn over_failure_budget(&self) -> bool {
        self.nonconverged_fraction > self.config.failure_budget
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub outcomes: Vec<TrialOutcome>,
    pub summary: Summary,
}

impl ExperimentOutput {
    pub fn rows(&self) -> impl Iterator<Item = &ResultRow> {
        self.outcomes.iter().map(|o| &o.row)
    }

    /// Writes one CSV row per trial, ordered by sweep point then trial.
    /// `wall_ms` is only included with `timings`, since it breaks
    /// byte-for-byte reproducibility.
    pub fn write_csv<W: Write>(&self, out: W, timings: bool) -> Result<()> {
        write_rows_csv(self.rows(), out, timings)
    }
}

pub fn write_rows_csv<'a, W: Write>(rows: impl Iterator<Item = &'a ResultRow>, out: W, timings: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![
        "experiment", "p", "d", "k", "c", "n", "trial", "lambda", "true_edges", "estimated_edges", "success",
        "precision", "recall", "f1", "converged",
    ];
    if timings {
        header.push("wall_ms");
    }
    w.write_record(&header).map_err(csv_err)?;
    for r in rows {
        let mut rec = vec![
            r.experiment.to_string(),
            r.p.to_string(),
            r.d.to_string(),
            r.k.to_string(),
            r.c.to_string(),
            r.n.to_string(),
            r.trial.to_string(),
            r.lambda.to_string(),
            r.true_edges.to_string(),
            r.estimated_edges.to_string(),
            u8::from(r.success).to_string(),
            r.precision.to_string(),
            r.recall.to_string(),
            r.f1.to_string(),
            u8::from(r.converged).to_string(),
        ];
        if timings {
            rec.push(format!("{:.3}", r.wall_ms));
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

/// Ground-truth common parameter of trial `trial`, plus the stream that continues from it.
fn draw_common(cfg: &ExperimentConfig, tag: u64, trial: usize) -> Result<(IsingParameter, seed::StreamRng)> {
    let mut rng = seed::stream(cfg.seed, &[tag, trial as u64]);
    let edges = random_max_degree_graph(cfg.p, cfg.d, &mut rng, DEFAULT_MAX_ATTEMPTS)?;
    let theta_bar = mixed_couplings(cfg.p, &edges, &mut rng)?;
    Ok((theta_bar, rng))
}

fn sample_tasks(
    tasks: &[IsingParameter],
    n: usize,
    sweeps: usize,
    seed_value: u64,
    path: &[u64],
    exec: Exec,
) -> Result<Vec<SampleMatrix>> {
    par::try_map_indexed(exec, tasks.len(), |k| {
        let mut p = path.to_vec();
        p.push(k as u64);
        let mut rng = seed::stream(seed_value, &p);
        gibbs_sample_with(&tasks[k], n, sweeps, &mut rng, exec)
    })
}

/// Every node's neighborhood in `result` equals its neighborhood in `truth`.
///
/// Neighborhoods are read from the reconciled edge set, so under the `max`
/// and `or` rules this is edge-set equality.
pub fn trial_success(result: &RecoveryResult, truth: &SignedEdgeSet, signed: bool) -> bool {
    if signed {
        result.edge_set == *truth
    } else {
        result.edge_set.same_pairs(truth)
    }
}

fn ceil_n(c: f64) -> usize {
    c.ceil().max(1.0) as usize
}

/// Union-recovery sweep over `config.c_grid`.
pub fn run_union_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    run_union_experiment_with(config, Exec::default())
}

pub fn run_union_experiment_with(config: &ExperimentConfig, exec: Exec) -> Result<ExperimentOutput> {
    config.validate()?;
    let k = config.num_tasks();
    let signed = config.signed.unwrap_or(false);
    let grid = &config.c_grid;
    let jobs = grid.len() * config.trials;
    let outcomes = par::try_map_indexed(exec, jobs, |job| {
        let (ci, trial) = (job / config.trials, job % config.trials);
        let start = Instant::now();
        let (theta_bar, mut rng) = draw_common(config, TAG_UNION, trial)?;
        let family = sample_task_family(&theta_bar, &config.delta, k, &mut rng)?;
        let n = ceil_n(grid[ci]);
        let samples = sample_tasks(
            &family.task_params,
            n,
            config.gibbs_sweeps,
            config.seed,
            &[TAG_UNION, trial as u64, 1 + ci as u64],
            exec,
        )?;
        let lambda = lambda_aux(config.p, n, k, config.beta_aux)?;
        let recovery = recover_support_union_with(&samples, lambda, &config.solver, config.reconcile, exec)?;
        let truth = SignedEdgeSet::from_parameter(&theta_bar);
        let sc = score(&recovery.edge_set, &truth, signed)?;
        let row = ResultRow {
            experiment: ExperimentKind::Union,
            p: config.p,
            d: config.d,
            k,
            c: grid[ci],
            n,
            trial,
            lambda,
            true_edges: truth.len(),
            estimated_edges: recovery.edge_set.len(),
            success: recovery.all_converged && trial_success(&recovery, &truth, signed),
            precision: sc.precision,
            recall: sc.recall,
            f1: sc.f1,
            converged: recovery.all_converged,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        };
        Ok::<_, Error>(TrialOutcome { row, recovery })
    })?;
    Ok(finish(ExperimentKind::Union, config, k, grid, outcomes))
}

/// Novel-task sweep over `config.c_star_grid`.
pub fn run_novel_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    run_novel_experiment_with(config, Exec::default())
}

pub fn run_novel_experiment_with(config: &ExperimentConfig, exec: Exec) -> Result<ExperimentOutput> {
    config.validate()?;
    if config.d < 2 {
        return Err(Error::Config("the novel experiment needs d >= 2".into()));
    }
    let k = config.num_tasks();
    let signed = config.signed.unwrap_or(true);
    let grid = &config.c_star_grid;

    // per trial: the union and the novel task parameter, shared by all C* points
    let setups = par::try_map_indexed(exec, config.trials, |trial| {
        let (theta_bar, mut rng) = draw_common(config, TAG_NOVEL, trial)?;
        let family = sample_task_family(&theta_bar, &config.delta, k + 1, &mut rng)?;
        let novel = family.task_params[k].clone();
        let (union, union_converged) = match config.union_source {
            UnionSource::Truth => (SignedEdgeSet::from_parameter(&theta_bar), true),
            UnionSource::Estimated => {
                let n = ceil_n(config.union_c);
                let samples = sample_tasks(
                    &family.task_params[..k],
                    n,
                    config.gibbs_sweeps,
                    config.seed,
                    &[TAG_NOVEL, trial as u64, 0],
                    exec,
                )?;
                let lambda = lambda_aux(config.p, n, k, config.beta_aux)?;
                let rec = recover_support_union_with(&samples, lambda, &config.solver, config.reconcile, exec)?;
                (rec.edge_set, rec.all_converged)
            }
        };
        Ok::<_, Error>((novel, union, union_converged))
    })?;

    let jobs = grid.len() * config.trials;
    let outcomes = par::try_map_indexed(exec, jobs, |job| {
        let (ci, trial) = (job / config.trials, job % config.trials);
        let start = Instant::now();
        let (novel, union, union_converged) = &setups[trial];
        let n_novel = config.n_novel(grid[ci]);
        let mut rng = seed::stream(config.seed, &[TAG_NOVEL, trial as u64, 1 + ci as u64]);
        let samples = gibbs_sample_with(novel, n_novel, config.gibbs_sweeps, &mut rng, exec)?;
        let lambda = lambda_novel(config.d, n_novel, config.beta_novel)?;
        let recovery = estimate_novel_with(&samples, union, lambda, &config.solver, config.reconcile, exec)?;
        let truth = SignedEdgeSet::from_parameter(novel);
        let sc = score(&recovery.edge_set, &truth, signed)?;
        let converged = recovery.all_converged && *union_converged;
        let row = ResultRow {
            experiment: ExperimentKind::Novel,
            p: config.p,
            d: config.d,
            k,
            c: grid[ci],
            n: n_novel,
            trial,
            lambda,
            true_edges: truth.len(),
            estimated_edges: recovery.edge_set.len(),
            success: converged && trial_success(&recovery, &truth, signed),
            precision: sc.precision,
            recall: sc.recall,
            f1: sc.f1,
            converged,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        };
        Ok::<_, Error>(TrialOutcome { row, recovery })
    })?;
    Ok(finish(ExperimentKind::Novel, config, k, grid, outcomes))
}

fn finish(
    kind: ExperimentKind,
    config: &ExperimentConfig,
    k: usize,
    grid: &[f64],
    outcomes: Vec<TrialOutcome>,
) -> ExperimentOutput {
    let points = grid
        .iter()
        .enumerate()
        .map(|(ci, &c)| {
            let rows: Vec<&ResultRow> = outcomes[ci * config.trials..(ci + 1) * config.trials]
                .iter()
                .map(|o| &o.row)
                .collect();
            let t = rows.len() as f64;
            let successes = rows.iter().filter(|r| r.success).count();
            SweepPoint {
                c,
                n: rows[0].n,
                trials: rows.len(),
                successes,
                success_rate: successes as f64 / t,
                mean_precision: rows.iter().map(|r| r.precision).sum::<f64>() / t,
                mean_recall: rows.iter().map(|r| r.recall).sum::<f64>() / t,
                mean_f1: rows.iter().map(|r| r.f1).sum::<f64>() / t,
                nonconverged: rows.iter().filter(|r| !r.converged).count(),
            }
        })
        .collect();
    let nonconverged = outcomes.iter().filter(|o| !o.row.converged).count();
    let summary = Summary {
        experiment: kind,
        config_hash: config.hash(),
        config: config.clone(),
        k,
        points,
        nonconverged_fraction: nonconverged as f64 / outcomes.len().max(1) as f64,
    };
    ExperimentOutput { outcomes, summary }
}
