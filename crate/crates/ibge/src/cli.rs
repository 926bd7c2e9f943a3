//! Command-line pipelines tying simulation, learning, effect estimation and
//! benchmarking together with stable file formats.
//!
//! Every run writes a resolved `config.json` next to its outputs; rerunning
//! with the same config and seed reproduces all machine outputs
//! byte-identically. Progress goes to stdout, warnings to stderr, machine
//! output only to files.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::sync::mpsc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::bge::BgeHyperparams;
use crate::data::{standardize, InterventionDesign, ObservedDataset};
use crate::effects::posterior_effects;
use crate::error::{Error, Result};
use crate::evaluate::{
    consensus_to_pdag, evaluate_output, LearnerOutput, SweepDataset, SweepRow, TwoCycleRule,
    ALPHA_MU_GRID,
};
use crate::graph::Dag;
use crate::io;
use crate::rng::mix;
use crate::score::{GraphPrior, ScoreMode, Scorer};
use crate::search::{
    consensus_graph, edge_posterior, map_greedy, structure_mcmc, DagSampleSet, McmcConfig,
    MoveConstraints, SearchConfig,
};
use crate::simulate::{
    self, paper_benchmark_config, BenchScale, ConditionLayout, GroundTruth, Regime,
};

#[derive(Parser, Debug)]
#[command(
    name = "ibge",
    version,
    about = "Bayesian causal structure learning from mixed observational and interventional Gaussian data"
)]
pub struct CliArgs {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate synthetic benchmark data (data CSV, design JSON, truth JSON).
    Simulate(SimulateArgs),
    /// Learn structure from data: MAP search or MCMC posterior sampling.
    Learn(LearnArgs),
    /// Posterior causal effects from a DAG sample file.
    Effects(EffectsArgs),
    /// End-to-end simulate → learn → evaluate sweep from a config file.
    Benchmark(BenchmarkArgs),
}

/// Entry point used by the binary.
pub fn run() -> Result<()> {
    match CliArgs::parse().command {
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Learn(a) => cmd_learn(&a),
        Command::Effects(a) => cmd_effects(&a),
        Command::Benchmark(a) => cmd_benchmark(&a),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegimeArg {
    Soft,
    Perfect,
}

impl From<RegimeArg> for Regime {
    fn from(r: RegimeArg) -> Regime {
        match r {
            RegimeArg::Soft => Regime::Soft,
            RegimeArg::Perfect => Regime::Perfect,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreArg {
    Soft,
    Hard,
}

impl From<ScoreArg> for ScoreMode {
    fn from(s: ScoreArg) -> ScoreMode {
        match s {
            ScoreArg::Soft => ScoreMode::Soft,
            ScoreArg::Hard => ScoreMode::Hard,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetsArg {
    Known,
    Unknown,
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

#[derive(Args, Debug, Clone, Serialize)]
pub struct SimulateArgs {
    /// Observed variables.
    #[arg(long)]
    pub n: usize,
    /// Interventions.
    #[arg(long, default_value_t = 0)]
    pub m: usize,
    /// Expected parents per node of the random DAG.
    #[arg(long, default_value_t = 2.0)]
    pub expected_parents: f64,
    /// Observational rows (block layout).
    #[arg(long)]
    pub n_obs: Option<usize>,
    /// Rows per intervention (block layout).
    #[arg(long)]
    pub rows_per_int: Option<usize>,
    /// Interventional fraction (fraction layout; needs --N).
    #[arg(long)]
    pub rho: Option<f64>,
    /// Total rows for the fraction layout.
    #[arg(long = "N")]
    pub total_rows: Option<usize>,
    #[arg(long, value_enum, default_value_t = RegimeArg::Soft)]
    pub regime: RegimeArg,
    /// Seeds are mandatory: every output must be reproducible.
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Standardize columns globally (on by default).
    #[arg(long = "no-standardize", action = clap::ArgAction::SetFalse, default_value_t = true)]
    pub standardize: bool,
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    fs::create_dir_all(&args.out).map_err(|e| Error::io(args.out.display().to_string(), e))?;
    let truth = GroundTruth::sample(
        args.n,
        args.m,
        args.expected_parents,
        args.regime.into(),
        mix(args.seed, 0xA),
    )?;
    let layout = match (args.rho, args.n_obs, args.rows_per_int) {
        (Some(rho), None, None) => {
            let total = args.total_rows.ok_or_else(|| {
                Error::Config("--rho needs --N (total rows)".into())
            })?;
            ConditionLayout::Fraction { total_rows: total, rho }
        }
        (None, Some(n_obs), rows) => ConditionLayout::Blocks {
            rows_per_intervention: rows.unwrap_or(0),
            observational_rows: n_obs,
        },
        _ => {
            return Err(Error::Config(
                "choose a layout: --n-obs [--rows-per-int] or --rho --N".into(),
            ))
        }
    };
    let (data, design) =
        simulate::generate_with_layout(&truth, layout, mix(args.seed, 0xB), args.standardize)?;
    let names = data.var_names.clone();

    io::write_data_csv(&args.out.join("data.csv"), &data)?;
    io::write_json(
        &args.out.join("design.json"),
        &io::DesignFile::from_design(&design, &names),
    )?;
    io::write_json(
        &args.out.join("truth.json"),
        &io::TruthFile::from_truth(&truth, &names),
    )?;
    io::write_json(&args.out.join("config.json"), args)?;
    println!(
        "simulate: wrote {} rows x {} columns ({} interventions) to {}",
        data.n_rows(),
        data.n_cols(),
        design.m,
        args.out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// learn
// ---------------------------------------------------------------------------

#[derive(Args, Debug, Clone, Serialize)]
pub struct LearnCommon {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub design: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    pub alpha_mu: f64,
    /// Edge penalty kappa of the graph prior.
    #[arg(long, default_value_t = 0.0)]
    pub edge_penalty: f64,
    #[arg(long, value_enum, default_value_t = ScoreArg::Soft)]
    pub score: ScoreArg,
    #[arg(long, value_enum, default_value_t = TargetsArg::Unknown)]
    pub targets: TargetsArg,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long = "no-standardize", action = clap::ArgAction::SetFalse, default_value_t = true)]
    pub standardize: bool,
    /// Optional cap on observed in-degree during search.
    #[arg(long)]
    pub max_in_degree: Option<usize>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct LearnArgs {
    #[command(subcommand)]
    pub method: LearnMethod,
}

#[derive(Subcommand, Debug, Clone, Serialize)]
pub enum LearnMethod {
    /// Greedy MAP search with restarts.
    Map(MapArgs),
    /// Structure MCMC with edge-posterior and consensus outputs.
    Mcmc(McmcArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct MapArgs {
    #[command(flatten)]
    pub common: LearnCommon,
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,
    /// 0 means: sweep until a local optimum.
    #[arg(long, default_value_t = 0)]
    pub max_sweeps: usize,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct McmcArgs {
    #[command(flatten)]
    pub common: LearnCommon,
    #[arg(long, default_value_t = 200_000)]
    pub iterations: usize,
    #[arg(long, default_value_t = 50_000)]
    pub burnin: usize,
    #[arg(long, default_value_t = 100)]
    pub thin: usize,
    #[arg(long, default_value_t = 4)]
    pub chains: usize,
    /// Consensus threshold on edge posterior frequencies.
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    #[arg(long, value_enum, default_value_t = InitArg::Map)]
    pub init: InitArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitArg {
    /// Start chains from a short greedy MAP run.
    Map,
    Empty,
}

/// Loaded problem: data (standardized if requested), design, dimensions.
struct Problem {
    data: ObservedDataset,
    design: InterventionDesign,
}

fn load_problem(common: &LearnCommon) -> Result<Problem> {
    let raw = io::read_data_csv(&common.data)?;
    let design_file: io::DesignFile = io::read_json(&common.design)?;
    let design = design_file.to_design(&raw.var_names)?;
    let data = if common.standardize {
        let s = standardize(&raw)?;
        for &c in &s.zero_variance_cols {
            eprintln!(
                "warning: column {} has zero variance; centered only",
                raw.var_names[c]
            );
        }
        s.data
    } else {
        raw
    };
    crate::data::validate_dataset(&data, &design)?;
    Ok(Problem { data, design })
}

/// Resolved scoring setup shared by learn, effects and benchmark.
pub struct LearnSetup {
    pub alpha_mu: f64,
    pub edge_penalty: f64,
    pub mode: ScoreMode,
    pub targets_known: bool,
}

impl LearnSetup {
    fn from_common(common: &LearnCommon) -> LearnSetup {
        LearnSetup {
            alpha_mu: common.alpha_mu,
            edge_penalty: common.edge_penalty,
            mode: common.score.into(),
            targets_known: common.targets == TargetsArg::Known,
        }
    }
}

/// Builds scorer inputs, the initial graph and the move constraints implied
/// by a setup. With known targets, soft-mode intervention edges are frozen
/// to the targets; hard mode never carries intervention edges.
pub fn prepare_search(
    data: &ObservedDataset,
    design: &InterventionDesign,
    setup: &LearnSetup,
) -> Result<(BgeHyperparams, GraphPrior, Dag, MoveConstraints)> {
    let hp = BgeHyperparams::default_for(data.n_cols(), setup.alpha_mu)?;
    let prior = GraphPrior::new(setup.edge_penalty)?;
    let mut init = Dag::new(data.n_cols(), design.m)?;
    let mut allow_int = design.m > 0 && setup.mode == ScoreMode::Soft;
    if setup.targets_known {
        let targets = design.known_targets.as_ref().ok_or(Error::MissingTargets)?;
        if setup.mode == ScoreMode::Soft {
            for (&j, nodes) in targets {
                for &v in nodes {
                    init.add_int_edge(j, v)?;
                }
            }
        }
        allow_int = false;
    } else if setup.mode == ScoreMode::Hard {
        return Err(Error::Config(
            "the hard score needs --targets known".into(),
        ));
    }
    let cons = MoveConstraints {
        allow_int_edges: allow_int,
        max_in_degree: None,
    };
    Ok((hp, prior, init, cons))
}

pub fn cmd_learn(args: &LearnArgs) -> Result<()> {
    match &args.method {
        LearnMethod::Map(a) => cmd_learn_map(a),
        LearnMethod::Mcmc(a) => cmd_learn_mcmc(a),
    }
}

fn scorer_settings(setup: &LearnSetup) -> io::ScorerSettings {
    io::ScorerSettings {
        alpha_mu: setup.alpha_mu,
        edge_penalty: setup.edge_penalty,
        mode: setup.mode,
        targets_known: setup.targets_known,
    }
}

fn cmd_learn_map(args: &MapArgs) -> Result<()> {
    let common = &args.common;
    fs::create_dir_all(&common.out).map_err(|e| Error::io(common.out.display().to_string(), e))?;
    let problem = load_problem(common)?;
    let setup = LearnSetup::from_common(common);
    let (hp, prior, init, mut cons) = prepare_search(&problem.data, &problem.design, &setup)?;
    cons.max_in_degree = common.max_in_degree;
    let scorer = Scorer::new(&problem.data, &problem.design, hp, prior, setup.mode)?;
    let cfg = SearchConfig {
        restarts: args.restarts,
        max_sweeps: args.max_sweeps,
        seed: common.seed,
    };
    let (dag, log_score) = map_greedy(&scorer, &init, &cfg, &cons)?;
    let names = problem.data.var_names.clone();
    io::write_json(
        &common.out.join("dag.json"),
        &io::DagFile::from_dag(&dag, &names, &problem.design.labels, Some(log_score)),
    )?;
    io::write_json(&common.out.join("config.json"), args)?;
    println!(
        "learn map: best score {log_score:.6} with {} observed and {} intervention edges",
        dag.obs_edge_count(),
        dag.int_edge_count()
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct ChainSummary {
    chain: usize,
    samples: usize,
    mean_log_score: f64,
    max_log_score: f64,
}

#[derive(Debug, Serialize)]
struct McmcSummary {
    total_samples: usize,
    chains: Vec<ChainSummary>,
}

fn summarize(set: &DagSampleSet, chains: usize) -> McmcSummary {
    let mut per_chain = Vec::new();
    for c in 0..chains {
        let scores: Vec<f64> = set
            .samples
            .iter()
            .filter(|s| s.chain == c)
            .map(|s| s.log_score)
            .collect();
        let count = scores.len();
        let mean = if count > 0 {
            scores.iter().sum::<f64>() / count as f64
        } else {
            f64::NAN
        };
        let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        per_chain.push(ChainSummary {
            chain: c,
            samples: count,
            mean_log_score: mean,
            max_log_score: max,
        });
    }
    McmcSummary {
        total_samples: set.samples.len(),
        chains: per_chain,
    }
}

fn cmd_learn_mcmc(args: &McmcArgs) -> Result<()> {
    let common = &args.common;
    if !(args.threshold > 0.0 && args.threshold < 1.0) {
        return Err(Error::Config(format!(
            "threshold must lie in (0,1), got {}",
            args.threshold
        )));
    }
    fs::create_dir_all(&common.out).map_err(|e| Error::io(common.out.display().to_string(), e))?;
    let problem = load_problem(common)?;
    let setup = LearnSetup::from_common(common);
    let (hp, prior, init, mut cons) = prepare_search(&problem.data, &problem.design, &setup)?;
    cons.max_in_degree = common.max_in_degree;
    let scorer = Scorer::new(&problem.data, &problem.design, hp, prior, setup.mode)?;

    let start = match args.init {
        InitArg::Empty => init,
        InitArg::Map => {
            let warm = SearchConfig {
                restarts: 2,
                max_sweeps: 0,
                seed: mix(common.seed, 0x17),
            };
            map_greedy(&scorer, &init, &warm, &cons)?.0
        }
    };
    let cfg = McmcConfig {
        iterations: args.iterations,
        burnin: args.burnin,
        thin: args.thin,
        chains: args.chains,
        seed: common.seed,
    };
    let set = structure_mcmc(&scorer, &start, &cfg, &cons)?;
    let names = problem.data.var_names.clone();
    let labels = problem.design.labels.clone();

    io::write_json(
        &common.out.join("samples.json"),
        &io::SamplesFile::from_samples(&set, scorer_settings(&setup), &names, &labels),
    )?;
    let posterior = edge_posterior(&set)?;
    io::write_edge_posterior_csv(
        &common.out.join("edge_posterior.csv"),
        &posterior,
        &names,
        &labels,
    )?;
    let consensus = consensus_graph(&posterior, args.threshold);
    let consensus_dagfile = io::DagFile {
        nodes: names.clone(),
        interventions: labels.clone(),
        obs_edges: consensus
            .obs_edges
            .iter()
            .map(|&(u, v)| (names[u].clone(), names[v].clone()))
            .collect(),
        int_edges: consensus
            .int_edges
            .iter()
            .map(|&(j, v)| (labels[j].clone(), names[v].clone()))
            .collect(),
        log_score: None,
    };
    io::write_json(&common.out.join("consensus.json"), &consensus_dagfile)?;
    io::write_json(&common.out.join("summary.json"), &summarize(&set, args.chains))?;
    io::write_json(&common.out.join("config.json"), args)?;
    println!(
        "learn mcmc: {} samples across {} chains; consensus has {} observed edges",
        set.samples.len(),
        args.chains,
        consensus.obs_edges.len()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// effects
// ---------------------------------------------------------------------------

#[derive(Args, Debug, Clone, Serialize)]
pub struct EffectsArgs {
    /// Sample file from `learn mcmc`.
    #[arg(long, conflicts_with = "dag")]
    pub samples: Option<PathBuf>,
    /// Single-DAG file from `learn map`.
    #[arg(long)]
    pub dag: Option<PathBuf>,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub design: PathBuf,
    /// Used with --dag; --samples carries its scorer settings.
    #[arg(long, default_value_t = 0.1)]
    pub alpha_mu: f64,
    #[arg(long, value_enum, default_value_t = ScoreArg::Soft)]
    pub score: ScoreArg,
    #[arg(long, default_value_t = 1)]
    pub draws_per_dag: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Also write every pooled effect draw.
    #[arg(long, default_value_t = false)]
    pub raw_draws: bool,
    #[arg(long = "no-standardize", action = clap::ArgAction::SetFalse, default_value_t = true)]
    pub standardize: bool,
}

pub fn cmd_effects(args: &EffectsArgs) -> Result<()> {
    fs::create_dir_all(&args.out).map_err(|e| Error::io(args.out.display().to_string(), e))?;
    let raw = io::read_data_csv(&args.data)?;
    let design_file: io::DesignFile = io::read_json(&args.design)?;
    let design = design_file.to_design(&raw.var_names)?;
    let data = if args.standardize {
        standardize(&raw)?.data
    } else {
        raw
    };

    let (set, alpha_mu, mode) = match (&args.samples, &args.dag) {
        (Some(path), _) => {
            let file: io::SamplesFile = io::read_json(path)?;
            let set = file.to_samples()?;
            (set, file.scorer.alpha_mu, file.scorer.mode)
        }
        (None, Some(path)) => {
            let file: io::DagFile = io::read_json(path)?;
            let dag = file.to_dag()?;
            let set = DagSampleSet {
                n_obs: dag.n_obs(),
                n_int: dag.n_int(),
                samples: vec![crate::search::DagSample {
                    dag,
                    log_score: file.log_score.unwrap_or(f64::NAN),
                    chain: 0,
                }],
            };
            (set, args.alpha_mu, args.score.into())
        }
        (None, None) => {
            return Err(Error::Config("need --samples or --dag".into()));
        }
    };
    if set.n_obs != data.n_cols() {
        return Err(Error::Dimension(format!(
            "samples cover {} nodes but data has {} columns",
            set.n_obs,
            data.n_cols()
        )));
    }
    let hp = BgeHyperparams::default_for(data.n_cols(), alpha_mu)?;
    let effects = posterior_effects(
        &set,
        &data,
        &design,
        &hp,
        mode,
        args.draws_per_dag,
        args.seed,
    )?;
    let names = data.var_names.clone();
    io::write_effect_summaries_csv(&args.out.join("effects.csv"), &effects.summaries, &names)?;
    if args.raw_draws {
        io::write_effect_draws_csv(&args.out.join("effect_draws.csv"), &effects.draws, &names)?;
    }
    io::write_json(&args.out.join("config.json"), args)?;
    println!(
        "effects: {} pairs summarized from {} draws",
        effects.summaries.len(),
        effects.draws.len()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// benchmark
// ---------------------------------------------------------------------------

#[derive(Args, Debug, Clone)]
pub struct BenchmarkArgs {
    /// Benchmark configuration JSON.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LearnerKind {
    /// Greedy MAP with the interventional score.
    Map,
    /// MCMC consensus with the interventional score.
    Mcmc,
    /// Intervention-blind pooled BGe MCMC consensus.
    BaselineBge,
}

impl LearnerKind {
    fn file_stem(self) -> &'static str {
        match self {
            LearnerKind::Map => "map",
            LearnerKind::Mcmc => "mcmc",
            LearnerKind::BaselineBge => "baseline-bge",
        }
    }
}

fn default_grid() -> Vec<f64> {
    ALPHA_MU_GRID.to_vec()
}

fn default_threshold() -> f64 {
    0.5
}

fn default_two_cycle() -> TwoCycleRule {
    TwoCycleRule::Symmetrize
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkSpec {
    pub scale: BenchScale,
    pub regime: RegimeArg,
    pub seeds: u64,
    pub base_seed: u64,
    #[serde(default = "default_grid")]
    pub alpha_mu_grid: Vec<f64>,
    pub learners: Vec<LearnerKind>,
    #[serde(default)]
    pub edge_penalty: f64,
    pub map: SearchConfigSpec,
    pub mcmc: McmcConfigSpec,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default = "default_two_cycle")]
    pub two_cycle_rule: TwoCycleRule,
    /// Worker threads; 0 keeps the global default.
    #[serde(default)]
    pub jobs: usize,
    /// Optional subset of soft settings (indices into the scale's list).
    #[serde(default)]
    pub settings: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SearchConfigSpec {
    pub restarts: usize,
    #[serde(default)]
    pub max_sweeps: usize,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct McmcConfigSpec {
    pub iterations: usize,
    pub burnin: usize,
    pub thin: usize,
    pub chains: usize,
}

/// Builds the benchmark datasets for a spec: every selected setting crossed
/// with every seed.
pub fn benchmark_datasets(spec: &BenchmarkSpec) -> Result<Vec<SweepDataset>> {
    let cfg = paper_benchmark_config(spec.scale);
    let regime: Regime = spec.regime.into();
    let mut datasets = Vec::new();
    match regime {
        Regime::Soft => {
            let selected: Vec<usize> = spec
                .settings
                .clone()
                .unwrap_or_else(|| (0..cfg.soft_settings.len()).collect());
            for &si in &selected {
                let setting = *cfg.soft_settings.get(si).ok_or_else(|| {
                    Error::Config(format!("setting index {si} out of range"))
                })?;
                for seed_ix in 0..spec.seeds {
                    let seed = mix(spec.base_seed, (si as u64) << 32 | seed_ix);
                    let truth =
                        GroundTruth::sample(cfg.n, cfg.m, cfg.expected_parents, regime, seed)?;
                    let (data, design) = simulate::generate_with_layout(
                        &truth,
                        ConditionLayout::Blocks {
                            rows_per_intervention: setting.rows_per_intervention,
                            observational_rows: setting.observational_rows(cfg.m),
                        },
                        mix(seed, 0xD),
                        true,
                    )?;
                    datasets.push(SweepDataset {
                        id: format!(
                            "soft-N{}-NI{}-s{seed_ix:03}",
                            setting.total_rows, setting.rows_per_intervention
                        ),
                        seed,
                        regime: "soft".into(),
                        data,
                        design,
                        truth_targets: truth.target_map().into_values().collect(),
                        truth_dag: truth.dag,
                    });
                }
            }
        }
        Regime::Perfect => {
            for (ri, &rho) in cfg.perfect_rho.iter().enumerate() {
                for seed_ix in 0..spec.seeds {
                    let seed = mix(spec.base_seed, 0x5000_0000 | (ri as u64) << 32 | seed_ix);
                    let truth =
                        GroundTruth::sample(cfg.n, cfg.m, cfg.expected_parents, regime, seed)?;
                    let (data, design) = simulate::generate_with_layout(
                        &truth,
                        ConditionLayout::Fraction {
                            total_rows: cfg.perfect_total_rows,
                            rho,
                        },
                        mix(seed, 0xD),
                        false,
                    )?;
                    datasets.push(SweepDataset {
                        id: format!("perfect-rho{rho}-s{seed_ix:03}"),
                        seed,
                        regime: "perfect".into(),
                        data,
                        design,
                        truth_targets: truth.target_map().into_values().collect(),
                        truth_dag: truth.dag,
                    });
                }
            }
        }
    }
    Ok(datasets)
}

/// Runs one learner on one dataset at one grid value. Used by the benchmark
/// command and the acceptance suite.
pub fn run_learner(
    kind: LearnerKind,
    ds: &SweepDataset,
    alpha_mu: f64,
    spec: &BenchmarkSpec,
) -> Result<LearnerOutput> {
    let seed = mix(ds.seed, alpha_mu.to_bits());
    let setup = LearnSetup {
        alpha_mu,
        edge_penalty: spec.edge_penalty,
        mode: ScoreMode::Soft,
        targets_known: false,
    };
    match kind {
        LearnerKind::Map => {
            let (hp, prior, init, cons) = prepare_search(&ds.data, &ds.design, &setup)?;
            let scorer = Scorer::new(&ds.data, &ds.design, hp, prior, ScoreMode::Soft)?;
            let cfg = SearchConfig {
                restarts: spec.map.restarts,
                max_sweeps: spec.map.max_sweeps,
                seed,
            };
            let (dag, _) = map_greedy(&scorer, &init, &cfg, &cons)?;
            Ok(LearnerOutput::Dag(dag))
        }
        LearnerKind::Mcmc => {
            let (hp, prior, init, cons) = prepare_search(&ds.data, &ds.design, &setup)?;
            let scorer = Scorer::new(&ds.data, &ds.design, hp, prior, ScoreMode::Soft)?;
            mcmc_consensus(&scorer, &init, &cons, seed, spec)
        }
        LearnerKind::BaselineBge => {
            // Intervention-blind: score pooled data with an empty design.
            let blind = InterventionDesign::observational(ds.data.n_rows());
            let setup = LearnSetup {
                targets_known: false,
                ..setup
            };
            let (hp, prior, init, cons) = prepare_search(&ds.data, &blind, &setup)?;
            let scorer = Scorer::new(&ds.data, &blind, hp, prior, ScoreMode::Soft)?;
            mcmc_consensus(&scorer, &init, &cons, seed, spec)
        }
    }
}

fn mcmc_consensus(
    scorer: &Scorer,
    init: &Dag,
    cons: &MoveConstraints,
    seed: u64,
    spec: &BenchmarkSpec,
) -> Result<LearnerOutput> {
    let warm_cfg = SearchConfig {
        restarts: spec.map.restarts,
        max_sweeps: spec.map.max_sweeps,
        seed: mix(seed, 0x17),
    };
    let (start, _) = map_greedy(scorer, init, &warm_cfg, cons)?;
    let cfg = McmcConfig {
        iterations: spec.mcmc.iterations,
        burnin: spec.mcmc.burnin,
        thin: spec.mcmc.thin,
        chains: spec.mcmc.chains,
        seed,
    };
    let set = structure_mcmc(scorer, &start, &cfg, cons)?;
    let posterior = edge_posterior(&set)?;
    let consensus = consensus_graph(&posterior, spec.threshold);
    Ok(LearnerOutput::Pdag(consensus_to_pdag(
        &consensus,
        spec.two_cycle_rule,
    )))
}

pub fn cmd_benchmark(args: &BenchmarkArgs) -> Result<()> {
    let spec: BenchmarkSpec = io::read_json(&args.config)?;
    if spec.alpha_mu_grid.is_empty() {
        return Err(Error::Config("alpha_mu_grid is empty".into()));
    }
    if spec.learners.is_empty() {
        return Err(Error::Config("no learners requested".into()));
    }
    fs::create_dir_all(&args.out).map_err(|e| Error::io(args.out.display().to_string(), e))?;
    io::write_json(&args.out.join("config.json"), &spec)?;

    let run_all = || -> Result<()> {
        let datasets = benchmark_datasets(&spec)?;
        println!(
            "benchmark: {} datasets x {} grid values x {} learners",
            datasets.len(),
            spec.alpha_mu_grid.len(),
            spec.learners.len()
        );
        for &learner in &spec.learners {
            let path = args.out.join(format!("results_{}.csv", learner.file_stem()));
            let mut writer = io::SweepCsvWriter::create(&path)?;
            stream_cells(&datasets, &spec, learner, &mut writer)?;
            println!("benchmark: finished learner {}", learner.file_stem());
        }
        Ok(())
    };
    if spec.jobs > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(spec.jobs)
            .build()
            .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
        pool.install(run_all)
    } else {
        run_all()
    }
}

/// Evaluates all (dataset, grid) cells of one learner in parallel while
/// writing rows in deterministic cell order; each completed row flushes to
/// disk as soon as its predecessors are written.
fn stream_cells(
    datasets: &[SweepDataset],
    spec: &BenchmarkSpec,
    learner: LearnerKind,
    writer: &mut io::SweepCsvWriter,
) -> Result<()> {
    use rayon::prelude::*;
    let cells: Vec<(usize, usize)> = (0..datasets.len())
        .flat_map(|d| (0..spec.alpha_mu_grid.len()).map(move |g| (d, g)))
        .collect();
    let (tx, rx) = mpsc::channel::<(usize, Result<SweepRow>)>();
    let worker = std::thread::scope(|scope| -> Result<()> {
        scope.spawn(move || {
            cells.par_iter().enumerate().for_each_with(
                tx,
                |tx, (idx, &(d, g))| {
                    let ds = &datasets[d];
                    let alpha_mu = spec.alpha_mu_grid[g];
                    let row = run_learner(learner, ds, alpha_mu, spec).and_then(|out| {
                        Ok(SweepRow {
                            dataset_id: ds.id.clone(),
                            seed: ds.seed,
                            alpha_mu,
                            regime: ds.regime.clone(),
                            metrics: evaluate_output(ds, out)?,
                        })
                    });
                    let _ = tx.send((idx, row));
                },
            );
        });
        let mut pending: BTreeMap<usize, Result<SweepRow>> = BTreeMap::new();
        let mut next = 0usize;
        for (idx, row) in rx {
            pending.insert(idx, row);
            while let Some(row) = pending.remove(&next) {
                writer.write_row(&row?)?;
                next += 1;
            }
        }
        for (_, row) in pending {
            writer.write_row(&row?)?;
        }
        Ok(())
    });
    worker
}
