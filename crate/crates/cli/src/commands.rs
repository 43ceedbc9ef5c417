use std::collections::hash_map::RandomState;
use std::hash::BuildHasher;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use chrono::Utc;
use coldstart_core::nullmodel::{self, default_attempts};
use coldstart_core::promotion::{
    self, compute_thresholds, default_links_grid, default_tau_grid, run_experiment, write_sweep_csv, Engine,
    HitEvaluator, IcfEvaluator, Strategy, UcfEvaluator, DEFAULT_LIST_LENGTH,
};
use coldstart_core::recsys::{self, item_similarity, item_similarity_topk, RecommendationList};
use coldstart_core::stats::{self, degree_correlation, knn_by_degree, summarize, DegreeDistribution};
use coldstart_core::synth::{self, CorrelationTarget, GeneratorConfig};
use coldstart_core::{BipartiteNetwork, Side};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::config::ConfigFile;
use crate::output::{FileDigest, Outputs, RunManifest, Tool, MANIFEST_FILE};
use crate::{
    Common, GenerateArgs, Input, PromoteArgs, RecommendArgs, ReshuffleArgs, StatsArgs, SweepArgs, Usage,
};

const DEFAULT_REALIZATIONS: usize = 50;

/// State shared by every command: resolved common options, input digests
/// and the staged outputs.
struct Session {
    command: &'static str,
    config: ConfigFile,
    output_dir: PathBuf,
    pool: rayon::ThreadPool,
    inputs: Vec<FileDigest>,
    seed: Option<u64>,
    seed_generated: bool,
    started: chrono::DateTime<Utc>,
    clock: Instant,
    outputs: Outputs,
}

impl Session {
    fn new(command: &'static str, common: &Common) -> Result<Self> {
        let started = Utc::now();
        let clock = Instant::now();
        let config = ConfigFile::load(common.config.as_deref())?;
        let output_dir = config.pick_or(common.output_dir.clone(), "output-dir", PathBuf::from("."))?;
        let threads = config.pick_or(common.threads, "threads", 0usize)?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .context("building thread pool")?;
        let mut inputs = Vec::new();
        if let Some(path) = &common.config {
            inputs.push(digest_file(path)?);
        }
        Ok(Session {
            command,
            config,
            output_dir,
            pool,
            inputs,
            seed: None,
            seed_generated: false,
            started,
            clock,
            outputs: Outputs::default(),
        })
    }

    fn read_input(&mut self, path: &Path) -> Result<Vec<u8>> {
        let bytes = std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
        self.inputs.push(FileDigest::of(path, &bytes));
        Ok(bytes)
    }

    /// Resolves the input options without reading anything yet.
    fn input_paths(&self, input: &Input) -> Result<InputPaths> {
        let edges: Option<PathBuf> = self.config.pick(input.input.clone(), "input")?;
        let user_map: Option<PathBuf> = self.config.pick(input.user_map.clone(), "user-map")?;
        let item_map: Option<PathBuf> = self.config.pick(input.item_map.clone(), "item-map")?;
        let Some(edges) = edges else {
            return Err(Usage("--input is required".into()).into());
        };
        let maps = match (user_map, item_map) {
            (Some(u), Some(i)) => Some((u, i)),
            (None, None) => None,
            _ => return Err(Usage("--user-map and --item-map must be given together".into()).into()),
        };
        Ok(InputPaths { edges, maps })
    }

    fn load_network(&mut self, paths: &InputPaths) -> Result<BipartiteNetwork> {
        let edges = self.read_input(&paths.edges)?;
        let ingested = match &paths.maps {
            None => BipartiteNetwork::ingest(&edges[..]),
            Some((u, i)) => {
                let users = self.read_input(u)?;
                let items = self.read_input(i)?;
                BipartiteNetwork::ingest_with_mapping(&edges[..], &users[..], &items[..])
            }
        }
        .with_context(|| format!("parsing {}", paths.edges.display()))?;
        let net = ingested.network;
        log::info!(
            "loaded {}: {} users, {} items, {} links ({} duplicates collapsed)",
            paths.edges.display(),
            net.user_count(),
            net.item_count(),
            net.link_count(),
            ingested.duplicates
        );
        Ok(net)
    }

    /// The explicit seed, or a fresh one that is recorded in the manifest.
    fn seed(&mut self, flag: Option<u64>) -> Result<u64> {
        let seed = match self.config.pick(flag, "seed")? {
            Some(s) => s,
            None => {
                self.seed_generated = true;
                RandomState::new().hash_one(Utc::now().timestamp_nanos_opt())
            }
        };
        self.seed = Some(seed);
        Ok(seed)
    }

    /// Call once every option has been resolved, before any real work.
    fn validated(&self) -> Result<()> {
        self.config.ensure_all_used()
    }

    fn install<T: Send>(&self, work: impl FnOnce() -> T + Send) -> T {
        self.pool.install(work)
    }

    fn finish<P: Serialize>(mut self, parameters: &P) -> Result<()> {
        let finished = Utc::now();
        let manifest = RunManifest {
            command: self.command.to_owned(),
            arguments: std::env::args().skip(1).collect(),
            parameters: serde_json::to_value(parameters)?,
            seed: self.seed,
            seed_generated: self.seed_generated,
            threads: self.pool.current_num_threads(),
            inputs: self.inputs,
            outputs: self.outputs.digests(&self.output_dir),
            tool: Tool {
                name: env!("CARGO_PKG_NAME"),
                version: env!("CARGO_PKG_VERSION"),
            },
            started: self.started,
            finished,
            wall_seconds: self.clock.elapsed().as_secs_f64(),
        };
        self.outputs.add_json(MANIFEST_FILE, &manifest)?;
        for path in self.outputs.commit(&self.output_dir)? {
            log::info!("wrote {}", path.display());
        }
        Ok(())
    }
}

struct InputPaths {
    edges: PathBuf,
    maps: Option<(PathBuf, PathBuf)>,
}

impl InputPaths {
    fn describe(&self) -> serde_json::Value {
        json!({
            "edges": self.edges,
            "user_map": self.maps.as_ref().map(|m| &m.0),
            "item_map": self.maps.as_ref().map(|m| &m.1),
        })
    }
}

fn digest_file(path: &Path) -> Result<FileDigest> {
    let bytes = std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(FileDigest::of(path, &bytes))
}

fn stage_network(outputs: &mut Outputs, net: &BipartiteNetwork) -> Result<()> {
    outputs.add_with("edges.tsv", |w| net.write_edge_list(w))?;
    outputs.add_with("users.tsv", |w| net.write_mapping(Side::User, w))?;
    outputs.add_with("items.tsv", |w| net.write_mapping(Side::Item, w))?;
    Ok(())
}

fn require_positive(value: usize, flag: &str) -> Result<usize> {
    if value == 0 {
        return Err(Usage(format!("{flag} must be at least 1")).into());
    }
    Ok(value)
}

pub fn stats(args: StatsArgs) -> Result<()> {
    let mut session = Session::new("stats", &args.common)?;
    let paths = session.input_paths(&args.input)?;
    let k_min = session.config.pick_or(args.k_min, "k-min", 1u32)?;
    if k_min == 0 {
        return Err(Usage("--k-min must be at least 1".into()).into());
    }
    session.validated()?;

    let net = session.load_network(&paths)?;
    let report = session.install(|| {
        [Side::User, Side::Item].map(|side| {
            let degrees = net.degrees(side);
            let dist = DegreeDistribution::from_sequence(side, degrees).with_fit(degrees, k_min);
            let approx = stats::powerlaw_exponent_approx(degrees, k_min).ok();
            (dist, approx, knn_by_degree(&net, side))
        })
    });

    let summary = summarize(&net);
    let mut side_json = serde_json::Map::new();
    for (dist, approx, knn) in &report {
        side_json.insert(
            dist.side.as_str().to_owned(),
            json!({
                "powerlaw_fit": dist.fit,
                "powerlaw_exponent_approx": approx,
                "distinct_degrees": dist.bins.len(),
                "max_degree": dist.bins.last().map(|b| b.k),
            }),
        );
        let side = dist.side.as_str();
        session
            .outputs
            .add_with(&format!("degree_distribution_{side}.csv"), |w| dist.write_csv(w))?;
        session.outputs.add_with(&format!("knn_{side}.csv"), |w| knn.write_csv(w))?;
    }
    session.outputs.add_json(
        "summary.json",
        &json!({
            "users": summary.users,
            "items": summary.items,
            "links": summary.links,
            "mean_user_degree": summary.mean_user_degree,
            "mean_item_degree": summary.mean_item_degree,
            "sparsity": summary.sparsity,
            "degree_correlation": degree_correlation(&net),
            "sides": side_json,
        }),
    )?;
    session.finish(&json!({ "input": paths.describe(), "k_min": k_min }))
}

fn parse_target(s: &str) -> Result<Option<CorrelationTarget>> {
    match s.trim().to_ascii_lowercase().as_str() {
        "none" | "off" => Ok(None),
        other => Ok(Some(other.parse().map_err(|e| Usage(format!("--target: {e}")))?)),
    }
}

pub fn generate(args: GenerateArgs) -> Result<()> {
    let mut session = Session::new("generate", &args.common)?;
    let d = GeneratorConfig::default();
    let cfg = &session.config;
    let target = match cfg.pick::<String>(args.target, "target")? {
        Some(s) => parse_target(&s)?,
        None => d.target,
    };
    let mut config = GeneratorConfig {
        user_count: cfg.pick_or(args.user_count, "user-count", d.user_count)?,
        item_count: cfg.pick_or(args.item_count, "item-count", d.item_count)?,
        user_exponent: cfg.pick_or(args.user_exponent, "user-exponent", d.user_exponent)?,
        item_exponent: cfg.pick_or(args.item_exponent, "item-exponent", d.item_exponent)?,
        user_k_min: cfg.pick_or(args.user_k_min, "user-k-min", d.user_k_min)?,
        user_k_max: cfg.pick_or(args.user_k_max, "user-k-max", d.user_k_max)?,
        item_k_min: cfg.pick_or(args.item_k_min, "item-k-min", d.item_k_min)?,
        item_k_max: cfg.pick_or(args.item_k_max, "item-k-max", d.item_k_max)?,
        target,
        tuning_budget_per_link: cfg.pick_or(args.tuning_budget, "tuning-budget", d.tuning_budget_per_link)?,
        seed: 0,
    };
    config.seed = session.seed(args.seed)?;
    config.check().map_err(|e| Usage(e.to_string()))?;
    session.validated()?;

    let (net, report) = session.install(|| synth::generate(&config))?;
    log::info!(
        "generated {} users, {} items, {} links, degree correlation {:?}",
        net.user_count(),
        net.item_count(),
        net.link_count(),
        report.correlation
    );
    stage_network(&mut session.outputs, &net)?;
    session.outputs.add_json("generation.json", &report)?;
    session.finish(&config)
}

pub fn reshuffle(args: ReshuffleArgs) -> Result<()> {
    let mut session = Session::new("reshuffle", &args.common)?;
    let paths = session.input_paths(&args.input)?;
    let attempts: Option<u64> = session.config.pick(args.attempts, "attempts")?;
    let seed = session.seed(args.seed)?;
    session.validated()?;

    let net = session.load_network(&paths)?;
    let attempts = attempts.unwrap_or_else(|| default_attempts(&net));
    let (null, report) = nullmodel::reshuffle(&net, attempts, seed)?;
    let before = degree_correlation(&net);
    let after = degree_correlation(&null);
    log::info!(
        "{} of {} swaps accepted; degree correlation {:?} -> {:?}",
        report.successful_swaps,
        report.attempts,
        before,
        after
    );
    stage_network(&mut session.outputs, &null)?;
    session.outputs.add_json(
        "reshuffle.json",
        &json!({
            "attempts": report.attempts,
            "successful_swaps": report.successful_swaps,
            "success_ratio": report.success_ratio(),
            "seed": report.seed,
            "links": net.link_count(),
            "degree_correlation_before": before,
            "degree_correlation_after": after,
        }),
    )?;
    session.finish(&json!({ "input": paths.describe(), "attempts": attempts, "seed": seed }))
}

pub fn recommend(args: RecommendArgs) -> Result<()> {
    let mut session = Session::new("recommend", &args.common)?;
    let paths = session.input_paths(&args.input)?;
    let cfg = &session.config;
    let list_length = require_positive(cfg.pick_or(args.list_length, "L", DEFAULT_LIST_LENGTH)?, "--L")?;
    let top_k: Option<usize> = cfg.pick(args.top_k, "top-k")?;
    let engine = cfg.pick_or(args.engine, "engine", Engine::Icf)?;
    let wanted: Option<Vec<String>> = cfg.pick_list(args.users, "users")?;
    if let Some(k) = top_k {
        require_positive(k, "--top-k")?;
        if engine == Engine::Ucf {
            return Err(Usage("--top-k prunes item similarities and only applies to --engine icf".into()).into());
        }
    }
    session.validated()?;

    let net = session.load_network(&paths)?;
    let users: Vec<u32> = match &wanted {
        None => (0..net.user_count() as u32).collect(),
        Some(ids) => {
            let user_ids = net.ids(Side::User);
            ids.iter()
                .map(|id| {
                    user_ids
                        .iter()
                        .position(|u| u == id)
                        .map(|p| p as u32)
                        .with_context(|| format!("unknown user {id:?}"))
                })
                .collect::<Result<_>>()?
        }
    };
    let lists: Vec<RecommendationList> = session.install(|| match engine {
        Engine::Icf => {
            let mut sim = item_similarity(&net);
            if let Some(k) = top_k {
                sim = item_similarity_topk(&sim, k);
            }
            recsys::recommend_many(&net, &sim, &users, list_length)
        }
        Engine::Ucf => users
            .par_iter()
            .map(|&u| recsys::ucf_recommend(&net, u, list_length))
            .collect(),
    });

    let user_ids = net.ids(Side::User);
    let item_ids = net.ids(Side::Item);
    session.outputs.add_with("recommendations.csv", |w| {
        use std::io::Write;
        writeln!(w, "user,rank,item,score")?;
        for list in &lists {
            for (rank, &(item, score)) in list.items.iter().enumerate() {
                writeln!(
                    w,
                    "{},{},{},{}",
                    user_ids[list.user as usize],
                    rank + 1,
                    item_ids[item as usize],
                    score
                )?;
            }
        }
        Ok(())
    })?;
    session.finish(&json!({
        "input": paths.describe(),
        "L": list_length,
        "top_k": top_k,
        "engine": engine,
        "users": wanted,
    }))
}

/// Runs `work` with the evaluator selected by `engine`.
fn with_evaluator<T>(
    net: &BipartiteNetwork,
    engine: Engine,
    list_length: usize,
    work: impl FnOnce(&dyn HitEvaluator) -> coldstart_core::Result<T>,
) -> Result<T> {
    Ok(match engine {
        Engine::Icf => {
            let sim = item_similarity(net);
            let thresholds = compute_thresholds(net, &sim, list_length)?;
            work(&IcfEvaluator::new(&thresholds))?
        }
        Engine::Ucf => work(&UcfEvaluator::new(net, list_length)?)?,
    })
}

#[derive(Serialize)]
struct ExperimentParams {
    input: serde_json::Value,
    strategies: Vec<String>,
    links: Vec<usize>,
    list_length: usize,
    realizations: usize,
    engine: Engine,
    seed: u64,
}

pub fn promote(args: PromoteArgs) -> Result<()> {
    let mut session = Session::new("promote", &args.common)?;
    let paths = session.input_paths(&args.input)?;
    let cfg = &session.config;
    let strategy: Option<Strategy> = cfg.pick(args.strategy, "strategy")?;
    let links: Option<usize> = cfg.pick(args.links, "R")?;
    let list_length = require_positive(cfg.pick_or(args.list_length, "L", DEFAULT_LIST_LENGTH)?, "--L")?;
    let realizations =
        require_positive(cfg.pick_or(args.realizations, "realizations", DEFAULT_REALIZATIONS)?, "--realizations")?;
    let engine = cfg.pick_or(args.engine, "engine", Engine::Icf)?;
    let strategy = strategy.ok_or_else(|| Usage("--strategy is required".into()))?;
    let links = require_positive(links.ok_or_else(|| Usage("--R is required".into()))?, "--R")?;
    let seed = session.seed(args.seed)?;
    session.validated()?;

    let net = session.load_network(&paths)?;
    if links > net.user_count() {
        bail!("--R {links} exceeds the {} users of {}", net.user_count(), paths.edges.display());
    }
    let result = session.install(|| {
        with_evaluator(&net, engine, list_length, |eval| {
            run_experiment(&net, eval, strategy, links, realizations, seed)
        })
    })?;
    log::info!("{strategy} R={links}: mean H {:.3} (sd {:.3})", result.mean, result.std);
    session
        .outputs
        .add_with("promote.csv", |w| write_sweep_csv(std::slice::from_ref(&result), w))?;
    session.outputs.add_with("promote_samples.csv", |w| {
        use std::io::Write;
        writeln!(w, "realization,H")?;
        for (r, h) in result.samples.iter().enumerate() {
            writeln!(w, "{r},{h}")?;
        }
        Ok(())
    })?;
    session.finish(&ExperimentParams {
        input: paths.describe(),
        strategies: vec![strategy.to_string()],
        links: vec![links],
        list_length,
        realizations,
        engine,
        seed,
    })
}

pub fn sweep(args: SweepArgs) -> Result<()> {
    let mut session = Session::new("sweep", &args.common)?;
    let paths = session.input_paths(&args.input)?;
    let cfg = &session.config;
    let named: Option<Vec<Strategy>> = cfg.pick_list(args.strategies, "strategies")?;
    let mut taus: Option<Vec<f64>> = cfg.pick_list(args.tau_grid, "tau-grid")?;
    if cfg.pick_or(args.default_tau_grid.then_some(true), "default-tau-grid", false)? {
        if taus.is_some() {
            return Err(Usage("--tau-grid and --default-tau-grid are mutually exclusive".into()).into());
        }
        taus = Some(default_tau_grid());
    }
    let links_grid: Option<Vec<usize>> = cfg.pick_list(args.links_grid, "R-grid")?;
    let list_length = require_positive(cfg.pick_or(args.list_length, "L", DEFAULT_LIST_LENGTH)?, "--L")?;
    let realizations =
        require_positive(cfg.pick_or(args.realizations, "realizations", DEFAULT_REALIZATIONS)?, "--realizations")?;
    let engine = cfg.pick_or(args.engine, "engine", Engine::Icf)?;

    let mut strategies = Vec::new();
    if let Some(taus) = &taus {
        if let Some(bad) = taus.iter().find(|t| !t.is_finite()) {
            return Err(Usage(format!("--tau-grid value {bad} is not finite")).into());
        }
    }
    match (&named, &taus) {
        (None, None) => strategies.extend(Strategy::classic()),
        _ => {
            strategies.extend(named.iter().flatten().copied());
            strategies.extend(taus.iter().flatten().map(|&t| Strategy::Exponent(t)));
        }
    }
    if strategies.is_empty() {
        return Err(Usage("the strategy grid is empty".into()).into());
    }
    if let Some(grid) = &links_grid {
        if grid.is_empty() {
            return Err(Usage("--R-grid is empty".into()).into());
        }
        for &r in grid {
            require_positive(r, "--R-grid values")?;
        }
    }
    let seed = session.seed(args.seed)?;
    session.validated()?;

    let net = session.load_network(&paths)?;
    let links = match links_grid {
        Some(grid) => grid,
        None => {
            let grid: Vec<usize> = default_links_grid()
                .into_iter()
                .filter(|&r| r <= net.user_count())
                .collect();
            log::info!("R grid {grid:?}");
            grid
        }
    };
    let results = session.install(|| {
        with_evaluator(&net, engine, list_length, |eval| {
            promotion::sweep(&net, eval, &strategies, &links, realizations, seed)
        })
    })?;
    session.outputs.add_with("sweep.csv", |w| write_sweep_csv(&results, w))?;
    session.finish(&ExperimentParams {
        input: paths.describe(),
        strategies: strategies.iter().map(Strategy::to_string).collect(),
        links,
        list_length,
        realizations,
        engine,
        seed,
    })
}
