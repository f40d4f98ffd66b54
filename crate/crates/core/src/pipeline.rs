//! Dataset generation, training, the four-method evaluation and reporting.
//!
//! All times written to disk are in seconds of the configured clock: tick
//! counts are divided by `ticks_per_second` in deterministic mode.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::{ConfigError, Method, RunConfig};
use crate::drl::{infer, partition_fix_set, train_rl, var_periods, DrlError, QNet, RlEnv};
use crate::features::demand_normalizer;
use crate::learn::{
    self, build_reduced_mip, label_dataset, predict_fix_set, FeatureContext, FixModelSet, FixSet,
    LearnError, RcScale, VarReport,
};
use crate::metrics::{gap_at, primal_gap, primal_integral, GapTrace, MetricsError};
use crate::mip::MipInstance;
use crate::rng::child_seed;
use crate::scp::{
    build_mip_with, generate_snapshots, instance_seed, perturb, ScpError, ScpInstance, ScpTopology,
};
use crate::solve::lp::{LpSolution, LpStatus};
use crate::solve::{solve_lp, solve_mip, MipResult, SolveError, TraceEntry};

pub const MANIFEST: &str = "manifest.json";
pub const INSTANCE_DIR: &str = "instances";
pub const MODELS: &str = "models.json";
pub const QNET: &str = "qnet.json";
pub const TRAIN_SUMMARY: &str = "train_summary.json";
pub const TRAINING_REPORT: &str = "training_report.csv";
pub const EPISODE_LOG: &str = "episode_log.csv";
pub const RESULTS: &str = "results.csv";
pub const TRACES: &str = "traces.json";
pub const RESULT_COLUMNS: [&str; 7] = ["instance", "method", "pi", "pg", "rt", "n_fixed", "n_int"];

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Data(String),
    #[error("output directory {0} is not empty (use --force to overwrite)")]
    Exists(PathBuf),
    #[error("missing artifact: {0}")]
    MissingArtifact(String),
    #[error("{path}: row {row}: {msg}")]
    Malformed { path: String, row: u64, msg: String },
    #[error(transparent)]
    Scp(#[from] ScpError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Drl(#[from] DrlError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("thread pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

impl PipelineError {
    /// 2 for configuration, 3 for data and artifacts, 4 for solver failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Solve(_) | PipelineError::Metrics(_) | PipelineError::Pool(_) => 4,
            PipelineError::Learn(LearnError::Solve(_) | LearnError::LpNotOptimal) => 4,
            PipelineError::Learn(LearnError::Hyper(_)) => 2,
            PipelineError::Drl(DrlError::Solve(_) | DrlError::Learn(LearnError::Solve(_))) => 4,
            PipelineError::Drl(DrlError::PartitionSize) => 2,
            _ => 3,
        }
    }
}

type Result<T> = std::result::Result<T, PipelineError>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub train_sl: Vec<String>,
    pub train_rl: Vec<String>,
    pub test: Vec<String>,
    /// sha256 per instance file.
    pub hashes: BTreeMap<String, String>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn instance_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(INSTANCE_DIR).join(format!("{name}.json"))
}

/// Instances of every split, in manifest order.
pub fn generate_instances(cfg: &RunConfig) -> Result<Vec<(String, Vec<ScpInstance>)>> {
    cfg.check()?;
    let topo = ScpTopology::random(
        cfg.products,
        cfg.parts,
        cfg.periods,
        child_seed(cfg.seed, 1),
    )?;
    let snaps = generate_snapshots(&topo, cfg.scaled(cfg.snapshots), child_seed(cfg.seed, 2))?;
    let meta = child_seed(cfg.seed, 3);
    let (n_sl, n_rl, n_test) = cfg.counts();
    let mut k = 0u64;
    let mut out = Vec::new();
    for (split, prefix, n) in [
        ("train_sl", "sl", n_sl),
        ("train_rl", "rl", n_rl),
        ("test", "test", n_test),
    ] {
        let mut insts = Vec::with_capacity(n);
        for idx in 0..n {
            let s = instance_seed(cfg.seed, k);
            k += 1;
            let base = &snaps[(s % snaps.len() as u64) as usize];
            let mut inst = perturb(base, &cfg.noise(meta, s))?;
            inst.name = format!("{prefix}-{idx:04}");
            insts.push(inst);
        }
        out.push((split.to_string(), insts));
    }
    Ok(out)
}

/// Write instances and the split manifest under `out`.
pub fn generate(cfg: &RunConfig, out: &Path, force: bool) -> Result<Manifest> {
    if out.exists() && fs::read_dir(out)?.next().is_some() {
        if !force {
            return Err(PipelineError::Exists(out.to_path_buf()));
        }
        let inst_dir = out.join(INSTANCE_DIR);
        if inst_dir.exists() {
            fs::remove_dir_all(&inst_dir)?;
        }
    }
    let splits = generate_instances(cfg)?;
    fs::create_dir_all(out.join(INSTANCE_DIR))?;
    let mut manifest = Manifest {
        seed: cfg.seed,
        train_sl: vec![],
        train_rl: vec![],
        test: vec![],
        hashes: BTreeMap::new(),
    };
    for (split, insts) in splits {
        for inst in insts {
            let text = serde_json::to_string(&inst)?;
            fs::write(instance_path(out, &inst.name), &text)?;
            manifest
                .hashes
                .insert(inst.name.clone(), sha256_hex(text.as_bytes()));
            match split.as_str() {
                "train_sl" => manifest.train_sl.push(inst.name),
                "train_rl" => manifest.train_rl.push(inst.name),
                _ => manifest.test.push(inst.name),
            }
        }
    }
    fs::write(out.join(MANIFEST), serde_json::to_string_pretty(&manifest)?)?;
    fs::write(out.join("config.toml"), cfg.to_toml()?)?;
    Ok(manifest)
}

pub fn load_manifest(dir: &Path) -> Result<Manifest> {
    let p = dir.join(MANIFEST);
    let text =
        fs::read_to_string(&p).map_err(|e| PipelineError::Data(format!("{}: {e}", p.display())))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn load_instances(
    dir: &Path,
    manifest: &Manifest,
    names: &[String],
) -> Result<Vec<ScpInstance>> {
    names
        .iter()
        .map(|n| {
            let p = instance_path(dir, n);
            let text = fs::read_to_string(&p)
                .map_err(|e| PipelineError::Data(format!("{}: {e}", p.display())))?;
            if let Some(h) = manifest.hashes.get(n) {
                if *h != sha256_hex(text.as_bytes()) {
                    return Err(PipelineError::Data(format!(
                        "{} does not match its manifest hash",
                        p.display()
                    )));
                }
            }
            let inst: ScpInstance = serde_json::from_str(&text)?;
            inst.check()?;
            Ok(inst)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub labeled: usize,
    pub spec_hash: String,
    pub rl_selected: Vec<String>,
    pub qnet_trained: bool,
    pub episodes: usize,
}

/// One PROP run: fix set from the classifiers (with or without reduced-cost
/// scores) and a solve of the reduced model. With reduced costs the LP
/// solve is charged to the clock (one tick, or its wall time).
#[derive(Clone, Debug)]
pub struct PropRun {
    pub fix: FixSet,
    pub result: MipResult,
    pub lp_cost: f64,
}

pub fn run_prop(
    cfg: &RunConfig,
    models: &FixModelSet,
    inst: &ScpInstance,
    mip: &MipInstance,
    lp: Option<(&LpSolution, f64)>,
) -> Result<PropRun> {
    let fix = predict_fix_set(models, inst, mip, lp.map(|l| l.0))?;
    let lp_cost = lp.map_or(0.0, |l| l.1);
    let reduced = build_reduced_mip(mip, &fix)?;
    let mut lim = cfg.limits(cfg.prop_budget);
    lim.time_limit = (lim.time_limit - lp_cost).max(if cfg.deterministic { 1.0 } else { 1e-3 });
    let mut result = solve_mip(&reduced, &lim)?;
    shift(&mut result, lp_cost);
    Ok(PropRun {
        fix,
        result,
        lp_cost,
    })
}

fn shift(res: &mut MipResult, dt: f64) {
    for e in &mut res.trace {
        e.time += dt;
    }
    res.elapsed += dt;
}

/// LP relaxation and its clock cost.
fn timed_lp(cfg: &RunConfig, mip: &MipInstance) -> Result<(LpSolution, f64)> {
    let t0 = std::time::Instant::now();
    let lp = solve_lp(mip)?;
    if lp.status != LpStatus::Optimal {
        return Err(PipelineError::Learn(LearnError::LpNotOptimal));
    }
    let cost = if cfg.deterministic {
        1.0
    } else {
        t0.elapsed().as_secs_f64()
    };
    Ok((lp, cost))
}

/// Environment for the unfixing loop, starting from a PROP run.
pub fn rl_env(
    cfg: &RunConfig,
    inst: &ScpInstance,
    mip: MipInstance,
    lp_star: f64,
    prop: &PropRun,
    normalizer: f64,
) -> Result<RlEnv> {
    let periods = var_periods(&mip)?;
    let partition = partition_fix_set(&prop.fix, cfg.m, &periods, inst.topology.periods)?;
    Ok(RlEnv {
        inst: inst.clone(),
        mip,
        lp_star,
        fix: prop.fix.clone(),
        partition,
        start: prop.result.clone(),
        normalizer,
    })
}

/// Label, train the fixing models, then train the Q-network on the RL
/// instances whose PROP gap exceeds the tolerance.
pub fn train(cfg: &RunConfig, data: &Path, out: &Path) -> Result<TrainSummary> {
    cfg.check()?;
    let manifest = load_manifest(data)?;
    if manifest.train_sl.is_empty() {
        return Err(PipelineError::Data("training split is empty".into()));
    }
    let sl = load_instances(data, &manifest, &manifest.train_sl)?;
    let ctx = FeatureContext::new(&sl[0], demand_normalizer(&sl), cfg.demand_model())?;
    let labels = label_dataset(&sl, &cfg.limits(cfg.label_budget), &ctx)?;
    if labels.is_empty() {
        return Err(PipelineError::Data(
            "no training instance produced an incumbent within the labeling budget".into(),
        ));
    }
    let (models, report) = learn::train(
        &labels,
        &ctx,
        &cfg.train_config(),
        cfg.tau,
        RcScale::MaxAbs,
        cfg.rc_sign,
    )?;
    fs::create_dir_all(out)?;
    models.save(&out.join(MODELS))?;
    write_training_report(&out.join(TRAINING_REPORT), &report)?;

    let rl = load_instances(data, &manifest, &manifest.train_rl)?;
    let candidates: Vec<Result<Option<RlEnv>>> = rl
        .par_iter()
        .map(|inst| {
            let mip = build_mip_with(inst, cfg.demand_model())?;
            let (lp, cost) = timed_lp(cfg, &mip)?;
            let prop = run_prop(cfg, &models, inst, &mip, Some((&lp, cost)))?;
            let gap = primal_gap(prop.result.best_objective, lp.objective);
            if gap <= cfg.eps_tolerance {
                return Ok(None);
            }
            Ok(Some(rl_env(
                cfg,
                inst,
                mip,
                lp.objective,
                &prop,
                models.ctx.normalizer,
            )?))
        })
        .collect();
    let mut envs = Vec::new();
    for c in candidates {
        envs.extend(c?);
    }
    let qnet_path = out.join(QNET);
    let mut summary = TrainSummary {
        labeled: labels.len(),
        spec_hash: models.ctx.hash(),
        rl_selected: envs.iter().map(|e| e.inst.name.clone()).collect(),
        qnet_trained: false,
        episodes: 0,
    };
    if envs.is_empty() {
        log::warn!("no RL instance exceeds the gap tolerance; skipping the Q-network (PROPEL falls back to PROP)");
        if qnet_path.exists() {
            fs::remove_file(&qnet_path)?;
        }
    } else {
        let hyper = cfg.rl_hyper();
        let (learner, log) = train_rl(&envs, &hyper, &cfg.limits(cfg.step_budget))?;
        learner.qnet.save(&qnet_path, &summary.spec_hash)?;
        write_csv(&out.join(EPISODE_LOG), &log)?;
        summary.qnet_trained = true;
        summary.episodes = hyper.episodes;
    }
    fs::write(
        out.join(TRAIN_SUMMARY),
        serde_json::to_string_pretty(&summary)?,
    )?;
    Ok(summary)
}

fn write_training_report(path: &Path, report: &[VarReport]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["var", "f1", "arch", "final_loss"])?;
    for r in report {
        w.write_record([r.var.clone(), fmt(r.f1), r.arch.clone(), fmt(r.final_loss)])?;
    }
    w.flush()?;
    Ok(())
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn fmt(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else {
        format!("{v:.6}")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub instance: String,
    pub method: Method,
    pub pi: f64,
    pub pg: f64,
    pub rt: f64,
    pub n_fixed: usize,
    pub n_int: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub instance: String,
    pub method: Method,
    pub lp_star: f64,
    pub horizon: f64,
    pub entries: Vec<TraceEntry>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Evaluation {
    pub rows: Vec<ResultRow>,
    pub traces: Vec<TraceRecord>,
    pub notices: Vec<String>,
}

/// Trained artifacts needed by the requested methods.
pub struct Artifacts {
    pub models: Option<FixModelSet>,
    pub qnet: Option<QNet>,
}

pub fn load_artifacts(
    methods: &[Method],
    dir: Option<&Path>,
    notices: &mut Vec<String>,
) -> Result<Artifacts> {
    let mut art = Artifacts {
        models: None,
        qnet: None,
    };
    if !methods.iter().any(|m| m.needs_models()) {
        return Ok(art);
    }
    let dir = dir.ok_or_else(|| {
        PipelineError::MissingArtifact("a model directory is required for learned methods".into())
    })?;
    let mp = dir.join(MODELS);
    if !mp.exists() {
        return Err(PipelineError::MissingArtifact(mp.display().to_string()));
    }
    let models = FixModelSet::load(&mp, None)?;
    if methods.contains(&Method::Propel) {
        let qp = dir.join(QNET);
        if qp.exists() {
            art.qnet = Some(QNet::load(&qp, &models.ctx.hash())?);
        } else {
            let skipped = fs::read_to_string(dir.join(TRAIN_SUMMARY))
                .ok()
                .and_then(|t| serde_json::from_str::<TrainSummary>(&t).ok())
                .is_some_and(|s| !s.qnet_trained);
            if !skipped {
                return Err(PipelineError::MissingArtifact(qp.display().to_string()));
            }
            notices.push("no Q-network was trained; PROPEL rows are omitted".into());
        }
    }
    art.models = Some(models);
    Ok(art)
}

/// Run each method on one instance against a shared LP bound.
pub fn evaluate_instance(
    cfg: &RunConfig,
    inst: &ScpInstance,
    methods: &[Method],
    art: &Artifacts,
) -> Result<(Vec<ResultRow>, Vec<TraceRecord>)> {
    let mip = build_mip_with(inst, cfg.demand_model())?;
    let n_int = mip.num_integer();
    let (lp, lp_cost) = timed_lp(cfg, &mip)?;
    let lp_star = lp.objective;
    let rate = cfg.clock_rate();
    let prop_h = cfg.budget(cfg.prop_budget);
    let total_h = cfg.budget(cfg.total_budget);
    let mut rows = Vec::new();
    let mut traces = Vec::new();
    let mut record =
        |method: Method, res: &MipResult, horizon: f64, n_fixed: usize| -> Result<()> {
            let g = GapTrace::new(lp_star, res.trace.clone(), horizon)?;
            rows.push(ResultRow {
                instance: inst.name.clone(),
                method,
                pi: primal_integral(&g, horizon)? / rate,
                pg: gap_at(&g, horizon)?,
                rt: res.elapsed.min(horizon) / rate,
                n_fixed,
                n_int,
            });
            traces.push(TraceRecord {
                instance: inst.name.clone(),
                method,
                lp_star,
                horizon: horizon / rate,
                entries: res
                    .trace
                    .iter()
                    .map(|e| TraceEntry {
                        time: e.time / rate,
                        objective: e.objective,
                    })
                    .collect(),
            });
            Ok(())
        };
    let mut prop: Option<PropRun> = None;
    for &m in methods {
        match m {
            Method::Opt => {
                let res = solve_mip(&mip, &cfg.limits(cfg.prop_budget))?;
                record(m, &res, prop_h, 0)?;
            }
            Method::PropB => {
                let models = art.models.as_ref().expect("checked by load_artifacts");
                let run = run_prop(cfg, models, inst, &mip, None)?;
                record(m, &run.result, prop_h, run.fix.len())?;
            }
            Method::Prop | Method::Propel => {
                let models = art.models.as_ref().expect("checked by load_artifacts");
                if prop.is_none() {
                    prop = Some(run_prop(cfg, models, inst, &mip, Some((&lp, lp_cost)))?);
                }
                let run = prop.as_ref().expect("set above");
                if m == Method::Prop {
                    record(m, &run.result, prop_h, run.fix.len())?;
                    continue;
                }
                let Some(qnet) = &art.qnet else { continue };
                let env = rl_env(cfg, inst, mip.clone(), lp_star, run, models.ctx.normalizer)?;
                let (res, steps) = infer(
                    &env,
                    qnet,
                    &cfg.rl_hyper(),
                    &cfg.limits(cfg.step_budget),
                    run.result.elapsed,
                )?;
                let released: BTreeSet<usize> = steps
                    .iter()
                    .flat_map(|s| s.inserted.iter().copied())
                    .collect();
                let freed: usize = released
                    .iter()
                    .map(|&k| env.partition.subsets[k].len())
                    .sum();
                record(m, &res, total_h, run.fix.len() - freed)?;
            }
        }
    }
    Ok((rows, traces))
}

fn ordered_methods(cfg: &RunConfig) -> Vec<Method> {
    let set: BTreeSet<Method> = cfg.methods.iter().copied().collect();
    set.into_iter().collect()
}

/// Evaluate every test instance and write `results.csv` and `traces.json`
/// under `out`.
pub fn evaluate(
    cfg: &RunConfig,
    data: &Path,
    model_dir: Option<&Path>,
    out: &Path,
) -> Result<Evaluation> {
    cfg.check()?;
    let mut methods = ordered_methods(cfg);
    let mut ev = Evaluation::default();
    let art = load_artifacts(&methods, model_dir, &mut ev.notices)?;
    if art.qnet.is_none() {
        methods.retain(|&m| m != Method::Propel);
    }
    let manifest = load_manifest(data)?;
    if manifest.test.is_empty() {
        return Err(PipelineError::Data("test split is empty".into()));
    }
    let test = load_instances(data, &manifest, &manifest.test)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()?;
    let per: Vec<Result<(Vec<ResultRow>, Vec<TraceRecord>)>> = pool.install(|| {
        test.par_iter()
            .map(|inst| evaluate_instance(cfg, inst, &methods, &art))
            .collect()
    });
    for r in per {
        let (rows, traces) = r?;
        ev.rows.extend(rows);
        ev.traces.extend(traces);
    }
    fs::create_dir_all(out)?;
    write_results(&out.join(RESULTS), &ev.rows)?;
    fs::write(out.join(TRACES), serde_json::to_string(&ev.traces)?)?;
    Ok(ev)
}

pub fn write_results(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(RESULT_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.instance.clone(),
            r.method.to_string(),
            fmt(r.pi),
            fmt(r.pg),
            fmt(r.rt),
            r.n_fixed.to_string(),
            r.n_int.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Parse a results file; errors carry the file line of the offending row.
pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let name = path.display().to_string();
    let malformed = |row: u64, msg: String| PipelineError::Malformed {
        path: name.clone(),
        row,
        msg,
    };
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_path(path)?;
    let header = rdr
        .headers()
        .map_err(|e| malformed(1, e.to_string()))?
        .clone();
    if header.iter().collect::<Vec<_>>() != RESULT_COLUMNS {
        return Err(malformed(
            1,
            format!("expected header {}", RESULT_COLUMNS.join(",")),
        ));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec =
            rec.map_err(|e| malformed(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != RESULT_COLUMNS.len() {
            return Err(malformed(
                line,
                format!(
                    "expected {} fields, found {}",
                    RESULT_COLUMNS.len(),
                    rec.len()
                ),
            ));
        }
        let num = |k: usize| -> Result<f64> {
            rec[k].trim().parse::<f64>().map_err(|_| {
                malformed(
                    line,
                    format!("{}: not a number: {:?}", RESULT_COLUMNS[k], &rec[k]),
                )
            })
        };
        let int = |k: usize| -> Result<usize> {
            rec[k].trim().parse::<usize>().map_err(|_| {
                malformed(
                    line,
                    format!("{}: not a count: {:?}", RESULT_COLUMNS[k], &rec[k]),
                )
            })
        };
        let method: Method = rec[1]
            .parse()
            .map_err(|_| malformed(line, format!("unknown method {:?}", &rec[1])))?;
        let row = ResultRow {
            instance: rec[0].to_string(),
            method,
            pi: num(2)?,
            pg: num(3)?,
            rt: num(4)?,
            n_fixed: int(5)?,
            n_int: int(6)?,
        };
        if row.n_fixed > row.n_int {
            return Err(malformed(line, "n_fixed exceeds n_int".into()));
        }
        out.push(row);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reduction {
    pub method: Method,
    pub metric: String,
    pub max_pct: f64,
    pub avg_pct: f64,
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FirstIncumbent {
    pub method: Method,
    pub found: usize,
    pub total: usize,
    pub mean: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub reductions: Vec<Reduction>,
    pub first_incumbent: Vec<FirstIncumbent>,
    pub methods: Vec<Method>,
    /// `(time, mean gap per method)` on a uniform grid.
    pub gap_curve: Vec<(f64, Vec<f64>)>,
}

/// `(OPT - method) / OPT`; with `OPT = 0` the reduction is 0 when the method
/// is also 0 and undefined otherwise.
pub fn reduction(opt: f64, val: f64) -> Option<f64> {
    if opt == 0.0 {
        (val == 0.0).then_some(0.0)
    } else {
        Some((opt - val) / opt)
    }
}

pub const CURVE_POINTS: usize = 101;

pub fn report(rows: &[ResultRow], traces: Option<&[TraceRecord]>) -> Result<Report> {
    let methods: Vec<Method> = rows
        .iter()
        .map(|r| r.method)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let opt: BTreeMap<&str, &ResultRow> = rows
        .iter()
        .filter(|r| r.method == Method::Opt)
        .map(|r| (r.instance.as_str(), r))
        .collect();
    let mut rep = Report {
        methods: methods.clone(),
        ..Report::default()
    };
    type Metric = fn(&ResultRow) -> f64;
    let metrics: [(&str, Metric); 3] = [
        ("pi", |r| r.pi),
        ("pg", |r| r.pg),
        ("n_int", |r| (r.n_int - r.n_fixed) as f64),
    ];
    for &m in methods.iter().filter(|&&m| m != Method::Opt) {
        for (metric, f) in metrics {
            let vals: Vec<f64> = rows
                .iter()
                .filter(|r| r.method == m)
                .filter_map(|r| {
                    opt.get(r.instance.as_str())
                        .and_then(|o| reduction(f(o), f(r)))
                })
                .collect();
            let (max_pct, avg_pct) = if vals.is_empty() {
                (f64::NAN, f64::NAN)
            } else {
                (
                    100.0 * vals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                    100.0 * vals.iter().sum::<f64>() / vals.len() as f64,
                )
            };
            rep.reductions.push(Reduction {
                method: m,
                metric: metric.into(),
                max_pct,
                avg_pct,
                n: vals.len(),
            });
        }
    }
    if let Some(traces) = traces {
        for &m in &methods {
            let recs: Vec<&TraceRecord> = traces.iter().filter(|t| t.method == m).collect();
            let mut firsts: Vec<f64> = recs
                .iter()
                .filter_map(|t| {
                    t.entries
                        .first()
                        .map(|e| e.time)
                        .filter(|&x| x <= t.horizon)
                })
                .collect();
            firsts.sort_by(f64::total_cmp);
            let n = firsts.len();
            let (mean, median, min, max) = if n == 0 {
                (f64::NAN, f64::NAN, f64::NAN, f64::NAN)
            } else {
                let med = if n % 2 == 1 {
                    firsts[n / 2]
                } else {
                    0.5 * (firsts[n / 2 - 1] + firsts[n / 2])
                };
                (
                    firsts.iter().sum::<f64>() / n as f64,
                    med,
                    firsts[0],
                    firsts[n - 1],
                )
            };
            rep.first_incumbent.push(FirstIncumbent {
                method: m,
                found: n,
                total: recs.len(),
                mean,
                median,
                min,
                max,
            });
        }
        let end = traces.iter().map(|t| t.horizon).fold(0.0, f64::max);
        let mut gts: Vec<(Method, GapTrace)> = Vec::new();
        for t in traces {
            gts.push((
                t.method,
                GapTrace::new(t.lp_star, t.entries.clone(), t.horizon)?,
            ));
        }
        for k in 0..CURVE_POINTS {
            let time = end * k as f64 / (CURVE_POINTS - 1) as f64;
            let means = methods
                .iter()
                .map(|&m| {
                    let gs: Vec<f64> = gts
                        .iter()
                        .filter(|(mm, _)| *mm == m)
                        .map(|(_, g)| {
                            gap_at(g, time.min(g.horizon)).expect("clamped to the horizon")
                        })
                        .collect();
                    if gs.is_empty() {
                        f64::NAN
                    } else {
                        gs.iter().sum::<f64>() / gs.len() as f64
                    }
                })
                .collect();
            rep.gap_curve.push((time, means));
        }
    }
    Ok(rep)
}

/// `summary.csv`, `first_incumbent.csv` and `gap_vs_time.csv` under `out`.
pub fn write_report(rep: &Report, out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    let mut w = csv::Writer::from_path(out.join("summary.csv"))?;
    w.write_record([
        "method",
        "metric",
        "max_reduction_pct",
        "avg_reduction_pct",
        "n",
    ])?;
    for r in &rep.reductions {
        w.write_record([
            r.method.to_string(),
            r.metric.clone(),
            fmt(r.max_pct),
            fmt(r.avg_pct),
            r.n.to_string(),
        ])?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(out.join("first_incumbent.csv"))?;
    w.write_record(["method", "found", "total", "mean", "median", "min", "max"])?;
    for f in &rep.first_incumbent {
        w.write_record([
            f.method.to_string(),
            f.found.to_string(),
            f.total.to_string(),
            fmt(f.mean),
            fmt(f.median),
            fmt(f.min),
            fmt(f.max),
        ])?;
    }
    w.flush()?;
    if !rep.gap_curve.is_empty() {
        let mut w = csv::Writer::from_path(out.join("gap_vs_time.csv"))?;
        let mut header = vec!["time".to_string()];
        header.extend(rep.methods.iter().map(|m| m.to_string()));
        w.write_record(&header)?;
        for (t, gs) in &rep.gap_curve {
            let mut rec = vec![fmt(*t)];
            rec.extend(gs.iter().map(|g| fmt(*g)));
            w.write_record(&rec)?;
        }
        w.flush()?;
    }
    Ok(())
}

/// Plain-text rendering of the reduction table.
pub fn render_report(rep: &Report) -> String {
    let mut s = format!(
        "{:<8} {:<6} {:>10} {:>10} {:>4}\n",
        "method", "metric", "max %", "avg %", "n"
    );
    for r in &rep.reductions {
        s += &format!(
            "{:<8} {:<6} {:>10.2} {:>10.2} {:>4}\n",
            r.method.as_str(),
            r.metric,
            r.max_pct,
            r.avg_pct,
            r.n
        );
    }
    if !rep.first_incumbent.is_empty() {
        s += &format!(
            "\n{:<8} {:>9} {:>10} {:>10}\n",
            "method", "found", "mean", "median"
        );
        for f in &rep.first_incumbent {
            s += &format!(
                "{:<8} {:>4}/{:<4} {:>10.3} {:>10.3}\n",
                f.method.as_str(),
                f.found,
                f.total,
                f.mean,
                f.median
            );
        }
    }
    s
}

pub fn read_traces(path: &Path) -> Result<Vec<TraceRecord>> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}
