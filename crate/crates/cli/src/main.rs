use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use ising_meta::diagnostics::{dependency_check, incoherence_check, population_fisher, sample_fisher};
use ising_meta::experiment::{run_novel_experiment, run_union_experiment, ExperimentConfig, ExperimentOutput, UnionSource};
use ising_meta::generator::{mixed_couplings, random_max_degree_graph, sample_task_family, DEFAULT_MAX_ATTEMPTS};
use ising_meta::gibbs::{gibbs_sample, DEFAULT_SWEEPS};
use ising_meta::io::{self, SampleFormat};
use ising_meta::recovery::{
    estimate_novel, lambda_aux, lambda_novel, recover_support_union, score, ReconcileRule, RecoveryResult,
};
use ising_meta::{seed, DeltaSpec, Error, SampleMatrix, SignedEdgeSet, SolverConfig};

const EXIT_CONFIG: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

#[derive(Parser)]
#[command(name = "ising-meta", version, about = "Support-union and novel-task structure recovery for Ising model families")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a random graph, mixed couplings and a task family; write edge lists.
    Generate(GenerateArgs),
    /// Gibbs-sample an edge-list model into a CSV.
    Sample(SampleArgs),
    /// Pooled recovery of the support union from per-task sample files.
    RecoverUnion(RecoverUnionArgs),
    /// Restricted estimation of one task's signed neighborhoods.
    EstimateNovel(EstimateNovelArgs),
    /// Fisher diagnostics for one node, as JSON.
    Diagnose(DiagnoseArgs),
    /// Run the union-recovery sweep.
    ExperimentUnion(ExperimentArgs),
    /// Run the novel-task sweep.
    ExperimentNovel(ExperimentArgs),
    /// Compare an estimated edge set with a reference.
    Score(ScoreArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    p: usize,
    #[arg(long)]
    d: usize,
    /// Number of tasks; `⌈d³ ln p⌉` when omitted.
    #[arg(long)]
    k: Option<usize>,
    /// Keep probability of the Bernoulli edge mask; 1 gives identical tasks.
    #[arg(long, default_value_t = 0.9)]
    mask_q: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SampleArgs {
    /// Edge-list model file.
    #[arg(long)]
    theta: PathBuf,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = DEFAULT_SWEEPS)]
    sweeps: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SampleInput {
    /// Sample CSV files, one per task.
    #[arg(long = "samples", num_args = 1..)]
    samples: Vec<PathBuf>,
    /// TOML manifest listing the per-task files.
    #[arg(long, conflicts_with = "samples")]
    manifest: Option<PathBuf>,
    /// Entries are 0/1 instead of -1/+1.
    #[arg(long)]
    binary01: bool,
    /// Files start with a header row.
    #[arg(long)]
    header: bool,
}

impl SampleInput {
    fn load(&self) -> anyhow::Result<Vec<SampleMatrix>> {
        let sets = match &self.manifest {
            Some(m) => io::ingest_manifest(m)?,
            None => io::ingest_samples(&self.samples, SampleFormat { binary01: self.binary01, header: self.header })?,
        };
        Ok(sets)
    }
}

#[derive(Args)]
struct SolveArgs {
    /// Regularization level; derived from --beta when omitted.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, default_value = "max")]
    reconcile: ReconcileRule,
    /// Solver settings as a TOML file.
    #[arg(long)]
    solver: Option<PathBuf>,
}

impl SolveArgs {
    fn solver_config(&self) -> anyhow::Result<SolverConfig> {
        let cfg = match &self.solver {
            Some(path) => toml::from_str(&fs::read_to_string(path)?)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?,
            None => SolverConfig::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct RecoverUnionArgs {
    #[command(flatten)]
    input: SampleInput,
    #[command(flatten)]
    solve: SolveArgs,
    /// RecoveryResult JSON; printed to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateNovelArgs {
    #[arg(long)]
    samples: PathBuf,
    #[arg(long)]
    binary01: bool,
    #[arg(long)]
    header: bool,
    /// Support union, as recover-union JSON or an edge list.
    #[arg(long)]
    union: PathBuf,
    /// Maximum degree used for the default regularization level.
    #[arg(long)]
    d: Option<usize>,
    #[command(flatten)]
    solve: SolveArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DiagnoseArgs {
    /// Edge-list model at which the Fisher matrix is evaluated.
    #[arg(long)]
    theta: PathBuf,
    /// Node, numbered from 1.
    #[arg(long)]
    node: usize,
    /// Keep probability of a Bernoulli edge mask for the population matrix.
    #[arg(long)]
    mask_q: Option<f64>,
    /// Use the sample Fisher matrix of these files instead of the population one.
    #[command(flatten)]
    input: SampleInput,
}

#[derive(Args)]
struct ExperimentArgs {
    /// TOML experiment config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    c_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    c_star_grid: Option<Vec<f64>>,
    #[arg(long)]
    beta_aux: Option<f64>,
    #[arg(long)]
    beta_novel: Option<f64>,
    #[arg(long)]
    gibbs_sweeps: Option<usize>,
    #[arg(long)]
    reconcile: Option<ReconcileRule>,
    #[arg(long)]
    mask_q: Option<f64>,
    #[arg(long)]
    union_source: Option<UnionSource>,
    #[arg(long)]
    union_c: Option<f64>,
    #[arg(long)]
    signed: Option<bool>,
    #[arg(long)]
    failure_budget: Option<f64>,
    #[arg(long)]
    out_dir: PathBuf,
    /// Add a wall_ms column to results.csv.
    #[arg(long)]
    timings: bool,
    /// Write each trial's RecoveryResult under out_dir/dumps.
    #[arg(long)]
    dump: bool,
}

impl ExperimentArgs {
    fn config(&self) -> anyhow::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
            }
            None => {
                let (Some(p), Some(d), Some(seed)) = (self.p, self.d, self.seed) else {
                    return Err(Error::Config("without --config, --p, --d and --seed are required".into()).into());
                };
                ExperimentConfig::new(p, d, seed)
            }
        };
        macro_rules! set {
            ($($field:ident),*) => {$(if let Some(v) = &self.$field { cfg.$field = v.clone(); })*};
        }
        set!(p, d, seed, trials, c_grid, c_star_grid, beta_aux, beta_novel, gibbs_sweeps, reconcile, union_source, union_c, failure_budget);
        if self.k.is_some() {
            cfg.k = self.k;
        }
        if self.signed.is_some() {
            cfg.signed = self.signed;
        }
        if let Some(q) = self.mask_q {
            cfg.delta = DeltaSpec::BernoulliMask { q };
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct ScoreArgs {
    /// Estimate, as recover-union JSON or an edge list.
    #[arg(long)]
    estimated: PathBuf,
    /// Reference, as recover-union JSON or an edge list.
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    signed: bool,
}

/// Reads a RecoveryResult JSON, a SignedEdgeSet JSON, or an edge list.
fn read_edge_set(path: &Path) -> anyhow::Result<SignedEdgeSet> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if text.trim_start().starts_with('{') {
        if let Ok(result) = serde_json::from_str::<RecoveryResult>(&text) {
            return Ok(result.edge_set);
        }
        let set: SignedEdgeSet = serde_json::from_str(&text)
            .map_err(|e| Error::Parse { path: path.to_path_buf(), line: e.line(), msg: e.to_string() })?;
        return Ok(set);
    }
    Ok(SignedEdgeSet::from_parameter(&io::parse_edge_list(&text, path)?))
}

fn emit_json(value: &impl serde::Serialize, out: Option<&Path>) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn generate(args: &GenerateArgs) -> anyhow::Result<()> {
    let mut rng = seed::stream(args.seed, &[]);
    let edges = random_max_degree_graph(args.p, args.d, &mut rng, DEFAULT_MAX_ATTEMPTS)?;
    let theta_bar = mixed_couplings(args.p, &edges, &mut rng)?;
    let k = args.k.unwrap_or_else(|| ising_meta::experiment::task_count_rule(args.p, args.d));
    let family = sample_task_family(&theta_bar, &DeltaSpec::BernoulliMask { q: args.mask_q }, k, &mut rng)?;
    fs::create_dir_all(&args.out_dir)?;
    io::write_edge_list(&args.out_dir.join("theta_bar.txt"), &theta_bar)?;
    let width = k.to_string().len();
    for (i, task) in family.task_params.iter().enumerate() {
        io::write_edge_list(&args.out_dir.join(format!("task_{:0width$}.txt", i + 1)), task)?;
    }
    Ok(())
}

fn sample(args: &SampleArgs) -> anyhow::Result<()> {
    let theta = io::read_edge_list(&args.theta)?;
    let samples = gibbs_sample(&theta, args.n, args.sweeps, &mut seed::stream(args.seed, &[]))?;
    io::write_samples(&args.out, &samples)?;
    Ok(())
}

fn recover_union(args: &RecoverUnionArgs) -> anyhow::Result<()> {
    let sets = args.input.load()?;
    let total: usize = sets.iter().map(SampleMatrix::n).sum();
    let lambda = match args.solve.lambda {
        Some(l) => l,
        None => lambda_aux(sets[0].p(), total, 1, args.solve.beta)?,
    };
    let result = recover_support_union(&sets, lambda, &args.solve.solver_config()?, args.solve.reconcile)?;
    emit_json(&result, args.out.as_deref())
}

fn estimate_novel_cmd(args: &EstimateNovelArgs) -> anyhow::Result<()> {
    let samples = io::read_samples(&args.samples, SampleFormat { binary01: args.binary01, header: args.header })?;
    let union = read_edge_set(&args.union)?;
    let lambda = match (args.solve.lambda, args.d) {
        (Some(l), _) => l,
        (None, Some(d)) => lambda_novel(d, samples.n(), args.solve.beta)?,
        (None, None) => return Err(Error::Config("give --lambda or --d".into()).into()),
    };
    let result = estimate_novel(&samples, &union, lambda, &args.solve.solver_config()?, args.solve.reconcile)?;
    emit_json(&result, args.out.as_deref())
}

fn diagnose(args: &DiagnoseArgs) -> anyhow::Result<()> {
    let theta = io::read_edge_list(&args.theta)?;
    if args.node == 0 || args.node > theta.p() {
        return Err(Error::Config(format!("--node must lie in 1..={}", theta.p())).into());
    }
    let r = args.node - 1;
    let report = if args.input.samples.is_empty() && args.input.manifest.is_none() {
        let spec = args.mask_q.map_or(DeltaSpec::None, |q| DeltaSpec::BernoulliMask { q });
        population_fisher(&theta, &spec, r)?
    } else {
        sample_fisher(&theta, &args.input.load()?, r)?
    };
    let (c_min, d_max) = dependency_check(&report)?;
    let incoherence = incoherence_check(&report).ok();
    let out = json!({
        "report": report,
        "c_min": c_min,
        "d_max": d_max,
        "incoherence": incoherence,
    });
    emit_json(&out, None)
}

fn write_experiment(out: &ExperimentOutput, args: &ExperimentArgs) -> anyhow::Result<()> {
    let dir = &args.out_dir;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let csv = fs::File::create(dir.join("results.csv"))?;
    out.write_csv(std::io::BufWriter::new(csv), args.timings)?;
    emit_json(&out.summary, Some(&dir.join("summary.json")))?;
    if args.dump {
        let dumps = dir.join("dumps");
        fs::create_dir_all(&dumps)?;
        for (ci, chunk) in out.outcomes.chunks(out.summary.config.trials).enumerate() {
            for o in chunk {
                emit_json(&o.recovery, Some(&dumps.join(format!("point{:02}_trial{:04}.json", ci, o.row.trial))))?;
            }
        }
    }
    for pt in &out.summary.points {
        eprintln!("C = {:>8}  n = {:>6}  success = {:.3}  F1 = {:.3}", pt.c, pt.n, pt.success_rate, pt.mean_f1);
    }
    Ok(())
}

fn experiment(args: &ExperimentArgs, novel: bool) -> anyhow::Result<ExitCode> {
    let cfg = args.config()?;
    let out = if novel { run_novel_experiment(&cfg)? } else { run_union_experiment(&cfg)? };
    write_experiment(&out, args)?;
    if out.summary.over_failure_budget() {
        eprintln!(
            "non-converged trial fraction {:.3} exceeds the failure budget {:.3}",
            out.summary.nonconverged_fraction, cfg.failure_budget
        );
        return Ok(ExitCode::from(EXIT_RUNTIME));
    }
    Ok(ExitCode::SUCCESS)
}

fn score_cmd(args: &ScoreArgs) -> anyhow::Result<()> {
    let est = read_edge_set(&args.estimated)?;
    let truth = read_edge_set(&args.truth)?;
    emit_json(&score(&est, &truth, args.signed)?, None)
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match &cli.command {
        Command::Generate(a) => generate(a)?,
        Command::Sample(a) => sample(a)?,
        Command::RecoverUnion(a) => recover_union(a)?,
        Command::EstimateNovel(a) => estimate_novel_cmd(a)?,
        Command::Diagnose(a) => diagnose(a)?,
        Command::ExperimentUnion(a) => return experiment(a, false),
        Command::ExperimentNovel(a) => return experiment(a, true),
        Command::Score(a) => score_cmd(a)?,
    }
    Ok(ExitCode::SUCCESS)
}

/// Bad input of any kind is a config error; failures while running are not.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Generation { .. } | Error::Singular { .. } | Error::Bracket { .. }) => EXIT_RUNTIME,
        _ => EXIT_CONFIG,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
