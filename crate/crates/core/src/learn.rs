//! Supervised fix-at-zero prediction: labels from solved instances,
//! instance-weighted cross-entropy classifiers, reduced-cost adjustment and
//! reduced-model construction.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{
    assemble_vector, build_directed_graph, extract_all, padded_length, spec_hash, FeatureError,
    FeatureSpec,
};
use crate::mip::{MipError, MipInstance};
use crate::nn::{shuffled, softmax, Adam, Grads, Mlp};
use crate::rng::{child_seed, rng};
use crate::scp::{build_mip_with, DemandModel, ScpError, ScpInstance};
use crate::solve::{solve_mip, LpSolution, LpStatus, SolveError, SolveLimits};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum LearnError {
    #[error(transparent)]
    Scp(#[from] ScpError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Mip(#[from] MipError),
    #[error("invalid hyperparameters: {0}")]
    Hyper(String),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("variable {0} is not integer; only integer variables can be fixed")]
    NotInteger(usize),
    #[error("reduced-cost scale must be positive, got {0}")]
    RcScale(f64),
    #[error("LP relaxation is not optimal")]
    LpNotOptimal,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub var_name: String,
    pub features: Vec<f64>,
    pub psi: u8,
    pub opt_value: f64,
}

/// Labels of every integer variable of one solved instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceLabels {
    pub instance: String,
    /// In integer-column order, aligned with the feature specs.
    pub examples: Vec<LabeledExample>,
}

/// Feature layout shared by every instance of one topology.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureContext {
    pub specs: Vec<FeatureSpec>,
    pub normalizer: f64,
    pub demand_model: DemandModel,
}

impl FeatureContext {
    /// Specs from the model built on `reference`, padded to the 95th percentile length.
    pub fn new(
        reference: &ScpInstance,
        normalizer: f64,
        demand_model: DemandModel,
    ) -> Result<Self, LearnError> {
        let mip = build_mip_with(reference, demand_model)?;
        let g = build_directed_graph(&mip, &reference.topology)?;
        let specs = extract_all(&g, &mip)?;
        let len = padded_length(&specs);
        let specs = specs.into_iter().map(|s| s.with_length(len)).collect();
        Ok(FeatureContext {
            specs,
            normalizer,
            demand_model,
        })
    }

    pub fn hash(&self) -> String {
        spec_hash(&self.specs)
    }

    pub fn features(&self, inst: &ScpInstance) -> Result<Vec<Vec<f64>>, LearnError> {
        self.specs
            .iter()
            .map(|s| Ok(assemble_vector(s, inst, self.normalizer)?))
            .collect()
    }
}

/// Solve every instance to the limits in `lim` and label its integer columns.
/// Instances whose solve ends without an incumbent are dropped.
pub fn label_dataset(
    instances: &[ScpInstance],
    lim: &SolveLimits,
    ctx: &FeatureContext,
) -> Result<Vec<InstanceLabels>, LearnError> {
    let results: Vec<Result<Option<InstanceLabels>, LearnError>> = instances
        .par_iter()
        .map(|inst| {
            let mip = build_mip_with(inst, ctx.demand_model)?;
            let res = solve_mip(&mip, lim)?;
            let Some(x) = res.best_solution else {
                log::warn!(
                    "dropping {}: no incumbent within the labeling limits",
                    inst.name
                );
                return Ok(None);
            };
            let feats = ctx.features(inst)?;
            let ints = mip.integer_indices();
            if ints.len() != ctx.specs.len() {
                return Err(LearnError::Feature(FeatureError::Shape(format!(
                    "{} has {} integer columns, specs cover {}",
                    inst.name,
                    ints.len(),
                    ctx.specs.len()
                ))));
            }
            let examples = ints
                .iter()
                .zip(feats)
                .map(|(&j, features)| LabeledExample {
                    var_name: mip.vars[j].name.clone(),
                    features,
                    psi: u8::from(x[j].abs() >= 0.5),
                    opt_value: x[j].round(),
                })
                .collect();
            Ok(Some(InstanceLabels {
                instance: inst.name.clone(),
                examples,
            }))
        })
        .collect();
    let mut out = Vec::with_capacity(results.len());
    for r in results {
        if let Some(l) = r? {
            out.push(l);
        }
    }
    Ok(out)
}

/// `(w_FP, w_FN)` with `w_FP = 1` and `w_FN_i = exp(ψ_i / Σψ)`; all ones when `Σψ = 0`.
pub fn compute_weights(psis: &[u8]) -> (Vec<f64>, Vec<f64>) {
    let vals: Vec<f64> = psis.iter().map(|&p| f64::from(p)).collect();
    compute_weights_by_value(&vals)
}

/// As [`compute_weights`] with arbitrary nonnegative magnitudes in place of `ψ`.
pub fn compute_weights_by_value(vals: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let total: f64 = vals.iter().map(|v| v.abs()).sum();
    let w_fp = vec![1.0; vals.len()];
    let w_fn = if total > 0.0 {
        vals.iter().map(|v| (v.abs() / total).exp()).collect()
    } else {
        vec![1.0; vals.len()]
    };
    (w_fp, w_fn)
}

const P_CLAMP: f64 = 1e-12;

/// Negated weighted log-likelihood of label `psi` under nonzero probability `p`.
pub fn weighted_ce_loss(p: f64, psi: u8, w_fn: f64, w_fp: f64) -> f64 {
    let p = p.clamp(P_CLAMP, 1.0 - P_CLAMP);
    let y = f64::from(psi);
    -(w_fn * y * p.ln() + w_fp * (1.0 - y) * (1.0 - p).ln())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainHyper {
    pub lr: f64,
    /// Number of linear layers, so `layers - 1` hidden layers.
    pub layers: usize,
    pub hidden: usize,
    pub epochs: usize,
    pub batch: usize,
    pub seed: u64,
}

impl Default for TrainHyper {
    fn default() -> Self {
        TrainHyper {
            lr: 0.005,
            layers: 3,
            hidden: 32,
            epochs: 100,
            batch: 32,
            seed: 0,
        }
    }
}

impl TrainHyper {
    pub fn check(&self) -> Result<(), LearnError> {
        if !(self.lr > 0.0) || self.layers < 1 || self.hidden == 0 || self.batch == 0 {
            return Err(LearnError::Hyper(format!("{self:?}")));
        }
        Ok(())
    }

    pub fn arch(&self) -> String {
        format!(
            "lr={} layers={} hidden={}",
            self.lr, self.layers, self.hidden
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperGrid {
    pub lrs: Vec<f64>,
    pub layers: Vec<usize>,
    pub hiddens: Vec<usize>,
    pub epochs: usize,
    pub batch: usize,
}

impl Default for HyperGrid {
    fn default() -> Self {
        HyperGrid {
            lrs: vec![0.001, 0.005],
            layers: vec![3, 4],
            hiddens: vec![32, 64, 128],
            epochs: 100,
            batch: 32,
        }
    }
}

impl HyperGrid {
    pub fn configs(&self, seed: u64) -> Vec<TrainHyper> {
        let mut out = Vec::new();
        for &lr in &self.lrs {
            for &layers in &self.layers {
                for &hidden in &self.hiddens {
                    out.push(TrainHyper {
                        lr,
                        layers,
                        hidden,
                        epochs: self.epochs,
                        batch: self.batch,
                        seed,
                    });
                }
            }
        }
        out
    }
}

/// One weighted training example.
#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub x: Vec<f64>,
    pub psi: u8,
    pub w_fn: f64,
    pub w_fp: f64,
}

pub fn classifier_sizes(input: usize, hyper: &TrainHyper) -> Vec<usize> {
    let mut sizes = vec![input];
    sizes.extend(std::iter::repeat_n(hyper.hidden, hyper.layers - 1));
    sizes.push(2);
    sizes
}

/// Probability that the variable is nonzero.
pub fn predict_nonzero(net: &Mlp, x: &[f64]) -> f64 {
    softmax(&net.forward(x))[1]
}

/// Loss of one example and its gradient accumulated into `grads`, scaled by `scale`.
pub fn example_loss_grad(net: &Mlp, ex: &Example, scale: f64, grads: &mut Grads) -> f64 {
    let tr = net.forward_trace(&ex.x);
    let p = softmax(&tr.output);
    let w = if ex.psi == 1 { ex.w_fn } else { ex.w_fp };
    let target = usize::from(ex.psi);
    let dout: Vec<f64> = p
        .iter()
        .enumerate()
        .map(|(k, pk)| scale * w * (pk - if k == target { 1.0 } else { 0.0 }))
        .collect();
    net.backward(&tr, &dout, grads);
    weighted_ce_loss(p[1], ex.psi, ex.w_fn, ex.w_fp)
}

pub fn mean_loss(net: &Mlp, data: &[Example]) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    data.iter()
        .map(|e| weighted_ce_loss(predict_nonzero(net, &e.x), e.psi, e.w_fn, e.w_fp))
        .sum::<f64>()
        / data.len() as f64
}

/// Adam on minibatches; returns the net and the mean loss after each epoch.
pub fn train_network(
    data: &[Example],
    input: usize,
    hyper: &TrainHyper,
) -> Result<(Mlp, Vec<f64>), LearnError> {
    hyper.check()?;
    let mut r = rng(hyper.seed);
    let mut net = Mlp::new(&classifier_sizes(input, hyper), &mut r);
    let mut opt = Adam::new(hyper.lr, &net);
    let mut curve = Vec::with_capacity(hyper.epochs);
    for _ in 0..hyper.epochs {
        let order = shuffled(data.len(), &mut r);
        for chunk in order.chunks(hyper.batch) {
            let mut g = Grads::zeros_like(&net);
            let scale = 1.0 / chunk.len() as f64;
            for &k in chunk {
                example_loss_grad(&net, &data[k], scale, &mut g);
            }
            opt.step(&mut net, &g);
        }
        curve.push(mean_loss(&net, data));
    }
    Ok((net, curve))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    /// F1 of the "fix at zero" class (`ψ = 0` predicted as zero counts as a true positive).
    pub fn f1(&self) -> f64 {
        let denom = 2 * self.tp + self.fp + self.fn_;
        if denom == 0 {
            1.0
        } else {
            2.0 * self.tp as f64 / denom as f64
        }
    }

    pub fn accuracy(&self) -> f64 {
        let n = self.tp + self.fp + self.tn + self.fn_;
        if n == 0 {
            1.0
        } else {
            (self.tp + self.tn) as f64 / n as f64
        }
    }
}

/// Confusion counts of `p_nonzero < 0.5` as the zero prediction.
pub fn confusion(preds: &[f64], data: &[Example]) -> Confusion {
    let mut c = Confusion::default();
    for (p, e) in preds.iter().zip(data) {
        match (*p < 0.5, e.psi == 0) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    c
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VarModel {
    /// Single-class training data: the empirical nonzero frequency.
    Constant { p_nonzero: f64 },
    Net {
        net: Mlp,
        hyper: TrainHyper,
        f1: f64,
    },
}

impl VarModel {
    pub fn p_nonzero(&self, x: &[f64]) -> f64 {
        match self {
            VarModel::Constant { p_nonzero } => *p_nonzero,
            VarModel::Net { net, .. } => predict_nonzero(net, x),
        }
    }

    pub fn arch(&self) -> String {
        match self {
            VarModel::Constant { .. } => "constant".into(),
            VarModel::Net { hyper, .. } => hyper.arch(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "s", rename_all = "snake_case")]
pub enum RcScale {
    /// `s = max |rc|` over the instance's integer columns.
    MaxAbs,
    Fixed(f64),
}

/// How minimization reduced costs enter the score.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RcSign {
    /// Negate first, as if the problem were written as a maximization;
    /// columns resting at zero then score `r ≥ 0`.
    #[default]
    MaxForm,
    /// Use the minimization reduced cost directly.
    MinForm,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelScope {
    #[default]
    PerVariable,
    /// One network over features plus a role one-hot.
    Shared,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub grid: HyperGrid,
    pub scope: ModelScope,
    pub weights_by_value: bool,
    /// Fraction of instances held out for model selection.
    pub val_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            grid: HyperGrid::default(),
            scope: ModelScope::PerVariable,
            weights_by_value: false,
            val_fraction: 0.2,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixModelSet {
    pub tau: f64,
    pub rc_scale: RcScale,
    pub rc_sign: RcSign,
    pub scope: ModelScope,
    pub ctx: FeatureContext,
    /// Keyed by variable name. Missing entries are never fixed.
    pub models: BTreeMap<String, VarModel>,
    pub shared: Option<Mlp>,
}

/// Per-variable training summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarReport {
    pub var: String,
    pub f1: f64,
    pub arch: String,
    pub final_loss: f64,
}

fn instance_examples(labels: &InstanceLabels, by_value: bool) -> Vec<Example> {
    let (w_fp, w_fn) = if by_value {
        compute_weights_by_value(
            &labels
                .examples
                .iter()
                .map(|e| e.opt_value)
                .collect::<Vec<_>>(),
        )
    } else {
        compute_weights(&labels.examples.iter().map(|e| e.psi).collect::<Vec<_>>())
    };
    labels
        .examples
        .iter()
        .zip(w_fp.into_iter().zip(w_fn))
        .map(|(e, (wfp, wfn))| Example {
            x: e.features.clone(),
            psi: e.psi,
            w_fn: wfn,
            w_fp: wfp,
        })
        .collect()
}

fn split_instances(n: usize, frac: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut r = rng(child_seed(seed, 0x5b));
    let order = shuffled(n, &mut r);
    let n_val = if n >= 2 {
        ((n as f64 * frac).round() as usize).clamp(1, n - 1)
    } else {
        0
    };
    let (val, train) = order.split_at(n_val);
    let mut train = train.to_vec();
    let mut val = val.to_vec();
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

/// Best net over `configs` by validation F1, then validation accuracy, then grid order.
fn select_model(
    train: &[Example],
    val: &[Example],
    input: usize,
    configs: &[TrainHyper],
) -> Result<(VarModel, f64), LearnError> {
    let mut best: Option<(f64, f64, Mlp, TrainHyper, f64)> = None;
    for h in configs {
        let (net, curve) = train_network(train, input, h)?;
        let eval = if val.is_empty() { train } else { val };
        let preds: Vec<f64> = eval.iter().map(|e| predict_nonzero(&net, &e.x)).collect();
        let c = confusion(&preds, eval);
        let (f1, acc) = (c.f1(), c.accuracy());
        let loss = curve
            .last()
            .copied()
            .unwrap_or_else(|| mean_loss(&net, train));
        if best.as_ref().is_none_or(|b| (f1, acc) > (b.0, b.1)) {
            best = Some((f1, acc, net, h.clone(), loss));
        }
    }
    let (f1, _, net, hyper, loss) = best.ok_or_else(|| LearnError::Hyper("empty grid".into()))?;
    Ok((VarModel::Net { net, hyper, f1 }, loss))
}

/// Train the classifiers. Returns the model set (with `tau` and rc settings
/// taken from the arguments) and a per-variable report.
pub fn train(
    dataset: &[InstanceLabels],
    ctx: &FeatureContext,
    cfg: &TrainConfig,
    tau: f64,
    rc_scale: RcScale,
    rc_sign: RcSign,
) -> Result<(FixModelSet, Vec<VarReport>), LearnError> {
    if dataset.is_empty() {
        return Err(LearnError::EmptyDataset);
    }
    if !(tau > 0.0 && tau < 1.0) {
        return Err(LearnError::Hyper(format!(
            "tau must lie in (0,1), got {tau}"
        )));
    }
    let n_vars = ctx.specs.len();
    if dataset.iter().any(|d| d.examples.len() != n_vars) {
        return Err(LearnError::Feature(FeatureError::Shape(
            "label sets do not match the feature specs".into(),
        )));
    }
    let input = ctx.specs.first().map_or(1, |s| s.fixed_length);
    let per_instance: Vec<Vec<Example>> = dataset
        .iter()
        .map(|d| instance_examples(d, cfg.weights_by_value))
        .collect();
    let (train_idx, val_idx) = split_instances(dataset.len(), cfg.val_fraction, cfg.seed);

    let mut set = FixModelSet {
        tau,
        rc_scale,
        rc_sign,
        scope: cfg.scope,
        ctx: ctx.clone(),
        models: BTreeMap::new(),
        shared: None,
    };
    let mut report = Vec::with_capacity(n_vars);
    match cfg.scope {
        ModelScope::PerVariable => {
            let trained: Vec<Result<(VarModel, f64), LearnError>> = (0..n_vars)
                .into_par_iter()
                .map(|k| {
                    let pick = |idx: &[usize]| {
                        idx.iter()
                            .map(|&d| per_instance[d][k].clone())
                            .collect::<Vec<_>>()
                    };
                    let tr = pick(&train_idx);
                    let va = pick(&val_idx);
                    let ones = tr.iter().filter(|e| e.psi == 1).count();
                    if ones == 0 || ones == tr.len() {
                        let p = ones as f64 / tr.len() as f64;
                        return Ok((VarModel::Constant { p_nonzero: p }, f64::NAN));
                    }
                    let configs = cfg.grid.configs(child_seed(cfg.seed, k as u64));
                    select_model(&tr, &va, input, &configs)
                })
                .collect();
            for (spec, r) in ctx.specs.iter().zip(trained) {
                let (model, loss) = r?;
                let f1 = match &model {
                    VarModel::Net { f1, .. } => *f1,
                    VarModel::Constant { .. } => f64::NAN,
                };
                report.push(VarReport {
                    var: spec.var_name.clone(),
                    f1,
                    arch: model.arch(),
                    final_loss: loss,
                });
                set.models.insert(spec.var_name.clone(), model);
            }
        }
        ModelScope::Shared => {
            let with_role = |d: usize| -> Vec<Example> {
                per_instance[d]
                    .iter()
                    .zip(&ctx.specs)
                    .map(|(e, s)| Example {
                        x: shared_input(&e.x, &s.var_name),
                        ..e.clone()
                    })
                    .collect()
            };
            let tr: Vec<Example> = train_idx.iter().flat_map(|&d| with_role(d)).collect();
            let va: Vec<Example> = val_idx.iter().flat_map(|&d| with_role(d)).collect();
            let (model, loss) = select_model(&tr, &va, input + 2, &cfg.grid.configs(cfg.seed))?;
            if let VarModel::Net { net, f1, hyper } = model {
                for s in &ctx.specs {
                    report.push(VarReport {
                        var: s.var_name.clone(),
                        f1,
                        arch: hyper.arch(),
                        final_loss: loss,
                    });
                }
                set.shared = Some(net);
            }
        }
    }
    Ok((set, report))
}

fn shared_input(x: &[f64], var_name: &str) -> Vec<f64> {
    let mut v = x.to_vec();
    let is_z = var_name.starts_with("z[");
    v.push(if is_z { 0.0 } else { 1.0 });
    v.push(if is_z { 1.0 } else { 0.0 });
    v
}

/// `r = -atan(rc/s)/π`.
pub fn normalized_rc(rc: f64, s: f64) -> Result<f64, LearnError> {
    if !(s > 0.0) {
        return Err(LearnError::RcScale(s));
    }
    Ok(-(rc / s).atan() / std::f64::consts::PI)
}

/// Sorted integer column indices to clamp at zero.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixSet {
    pub indices: Vec<usize>,
}

impl FixSet {
    pub fn new(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        FixSet { indices }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.indices.binary_search(&j).is_ok()
    }
}

/// Per-column `(ψ̂⁰, r)` for the integer columns that have a model.
pub fn scores(
    models: &FixModelSet,
    inst: &ScpInstance,
    mip: &MipInstance,
    lp: Option<&LpSolution>,
) -> Result<Vec<(usize, f64, f64)>, LearnError> {
    let feats = models.ctx.features(inst)?;
    let rcs: Option<(Vec<f64>, f64)> = match lp {
        None => None,
        Some(lp) if lp.status != LpStatus::Optimal => return Err(LearnError::LpNotOptimal),
        Some(lp) => {
            let ints = mip.integer_indices();
            let s = match models.rc_scale {
                RcScale::Fixed(s) => s,
                RcScale::MaxAbs => ints
                    .iter()
                    .map(|&j| lp.reduced_costs[j].abs())
                    .fold(0.0, f64::max),
            };
            Some((lp.reduced_costs.clone(), s))
        }
    };
    let mut out = Vec::new();
    for (spec, x) in models.ctx.specs.iter().zip(&feats) {
        let Some(j) = mip.var_index(&spec.var_name) else {
            continue;
        };
        if !mip.vars[j].is_integer {
            return Err(LearnError::NotInteger(j));
        }
        let p_nonzero = match (
            models.scope,
            &models.shared,
            models.models.get(&spec.var_name),
        ) {
            (ModelScope::Shared, Some(net), _) => {
                predict_nonzero(net, &shared_input(x, &spec.var_name))
            }
            (ModelScope::PerVariable, _, Some(m)) => m.p_nonzero(x),
            _ => continue,
        };
        let r = match &rcs {
            None => 0.0,
            Some((_, s)) if *s == 0.0 => 0.0,
            Some((rc, s)) => {
                let v = match models.rc_sign {
                    RcSign::MaxForm => -rc[j],
                    RcSign::MinForm => rc[j],
                };
                normalized_rc(v, *s)?
            }
        };
        out.push((j, 1.0 - p_nonzero, r));
    }
    Ok(out)
}

/// `{ j : ψ̂⁰_j + r_j ≥ τ }`; pass `lp = None` for the unadjusted rule.
pub fn predict_fix_set(
    models: &FixModelSet,
    inst: &ScpInstance,
    mip: &MipInstance,
    lp: Option<&LpSolution>,
) -> Result<FixSet, LearnError> {
    let sc = scores(models, inst, mip, lp)?;
    Ok(fix_from_scores(&sc, models.tau))
}

pub fn fix_from_scores(scores: &[(usize, f64, f64)], tau: f64) -> FixSet {
    FixSet::new(
        scores
            .iter()
            .filter(|(_, p0, r)| p0 + r >= tau)
            .map(|&(j, _, _)| j)
            .collect(),
    )
}

pub fn build_reduced_mip(mip: &MipInstance, fix: &FixSet) -> Result<MipInstance, LearnError> {
    let mut out = mip.clone();
    for &j in &fix.indices {
        let v = out.vars.get_mut(j).ok_or(LearnError::NotInteger(j))?;
        if !v.is_integer {
            return Err(LearnError::NotInteger(j));
        }
        v.lb = 0.0;
        v.ub = 0.0;
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub version: u32,
    pub kind: String,
    pub architecture: String,
    pub tau: f64,
    pub rc_scale: RcScale,
    pub rc_sign: RcSign,
    pub spec_hash: String,
}

#[derive(Serialize, Deserialize)]
struct FixCheckpoint {
    header: CheckpointHeader,
    models: FixModelSet,
}

impl FixModelSet {
    pub fn header(&self) -> CheckpointHeader {
        let architecture = match (&self.scope, &self.shared) {
            (ModelScope::Shared, Some(net)) => format!("shared {:?}", net.sizes),
            _ => format!("per-variable x{}", self.models.len()),
        };
        CheckpointHeader {
            version: CHECKPOINT_VERSION,
            kind: "fix-models".into(),
            architecture,
            tau: self.tau,
            rc_scale: self.rc_scale,
            rc_sign: self.rc_sign,
            spec_hash: self.ctx.hash(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), LearnError> {
        let ck = FixCheckpoint {
            header: self.header(),
            models: self.clone(),
        };
        std::fs::write(path, serde_json::to_string(&ck)?)?;
        Ok(())
    }

    /// Load and verify; `expected_hash` guards against a different feature layout.
    pub fn load(path: &Path, expected_hash: Option<&str>) -> Result<Self, LearnError> {
        let ck: FixCheckpoint = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if ck.header.version != CHECKPOINT_VERSION || ck.header.kind != "fix-models" {
            return Err(LearnError::Checkpoint(format!(
                "unsupported header {:?}",
                ck.header
            )));
        }
        if ck.header.spec_hash != ck.models.ctx.hash() {
            return Err(LearnError::Checkpoint(
                "stored specs do not match the header hash".into(),
            ));
        }
        if let Some(h) = expected_hash {
            if h != ck.header.spec_hash {
                return Err(LearnError::Checkpoint(format!(
                    "feature-spec hash {} != expected {h}",
                    ck.header.spec_hash
                )));
            }
        }
        Ok(ck.models)
    }
}
