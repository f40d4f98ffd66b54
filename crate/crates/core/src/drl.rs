//! Q-learning over which fixed subsets to release.
//!
//! The fix set is split into period segments `V_1..V_m`. A state records the
//! inserted (released) and excluded segments; its MIP keeps every other fixed
//! column at zero. Inference applies macro-actions: every segment whose insert
//! value is at least its exclude value is released at once.

use std::collections::{BTreeSet, VecDeque};
use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::learn::{build_reduced_mip, FixSet, LearnError};
use crate::metrics::primal_gap;
use crate::mip::{MipInstance, Sense};
use crate::nn::{shuffled, Adam, Grads, Mlp};
use crate::rng::{child_seed, rng, Rng};
use crate::scp::{parse_name, ScpInstance};
use crate::solve::{solve_mip_with_start, MipResult, SolveError, SolveLimits, TraceEntry};

pub const ENCODING_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DrlError {
    #[error("partition size must be at least 1")]
    PartitionSize,
    #[error("subset {0} is already decided or out of range")]
    IllegalAction(usize),
    #[error("no training environments")]
    NoInstances,
    #[error("column {0} has no period in its name")]
    NoPeriod(String),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    /// Column indices per subset.
    pub subsets: Vec<Vec<usize>>,
    /// Half-open period range `[start, end)` per subset.
    pub segments: Vec<(usize, usize)>,
}

impl Partition {
    pub fn m(&self) -> usize {
        self.subsets.len()
    }
}

/// Equal-width contiguous period segments; the first `T mod m` segments are
/// one period wider.
pub fn segments(periods: usize, m: usize) -> Result<Vec<(usize, usize)>, DrlError> {
    if m == 0 {
        return Err(DrlError::PartitionSize);
    }
    let (base, extra) = (periods / m, periods % m);
    let mut out = Vec::with_capacity(m);
    let mut start = 0;
    for k in 0..m {
        let w = base + usize::from(k < extra);
        out.push((start, start + w));
        start += w;
    }
    Ok(out)
}

/// `var_periods[j]` is the period of column `j`.
pub fn partition_fix_set(
    fix: &FixSet,
    m: usize,
    var_periods: &[usize],
    periods: usize,
) -> Result<Partition, DrlError> {
    let segs = segments(periods, m)?;
    let mut subsets = vec![Vec::new(); m];
    for &j in &fix.indices {
        let t = var_periods[j];
        let k = segs
            .iter()
            .position(|&(a, b)| (a..b).contains(&t))
            .unwrap_or(m - 1);
        subsets[k].push(j);
    }
    Ok(Partition {
        subsets,
        segments: segs,
    })
}

pub fn var_periods(mip: &MipInstance) -> Result<Vec<usize>, DrlError> {
    mip.vars
        .iter()
        .map(|v| {
            parse_name(&v.name)
                .map(|p| p.2)
                .ok_or_else(|| DrlError::NoPeriod(v.name.clone()))
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    Insert(usize),
    Exclude(usize),
}

impl Action {
    /// Output slot in the Q-network: inserts first, then excludes.
    pub fn slot(self, m: usize) -> usize {
        match self {
            Action::Insert(i) => i,
            Action::Exclude(i) => m + i,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RlState {
    pub inserted: BTreeSet<usize>,
    pub excluded: BTreeSet<usize>,
    pub gap: f64,
    pub objective: f64,
}

impl RlState {
    pub fn initial(gap: f64, objective: f64) -> Self {
        RlState {
            inserted: BTreeSet::new(),
            excluded: BTreeSet::new(),
            gap,
            objective,
        }
    }

    /// Undecided subsets.
    pub fn available(&self, m: usize) -> Vec<usize> {
        (0..m)
            .filter(|i| !self.inserted.contains(i) && !self.excluded.contains(i))
            .collect()
    }

    /// `A(s)`: insert and exclude for every undecided subset.
    pub fn actions(&self, m: usize) -> Vec<Action> {
        let avail = self.available(m);
        avail
            .iter()
            .map(|&i| Action::Insert(i))
            .chain(avail.iter().map(|&i| Action::Exclude(i)))
            .collect()
    }
}

pub fn transition(s: &RlState, a: Action, m: usize) -> Result<RlState, DrlError> {
    let i = match a {
        Action::Insert(i) | Action::Exclude(i) => i,
    };
    if i >= m || s.inserted.contains(&i) || s.excluded.contains(&i) {
        return Err(DrlError::IllegalAction(i));
    }
    let mut next = s.clone();
    match a {
        Action::Insert(i) => next.inserted.insert(i),
        Action::Exclude(i) => next.excluded.insert(i),
    };
    Ok(next)
}

/// Fix set minus the columns of inserted subsets.
pub fn remaining_fix(s: &RlState, fix: &FixSet, p: &Partition) -> FixSet {
    let released: BTreeSet<usize> = s
        .inserted
        .iter()
        .flat_map(|&k| p.subsets[k].iter().copied())
        .collect();
    FixSet::new(
        fix.indices
            .iter()
            .copied()
            .filter(|j| !released.contains(j))
            .collect(),
    )
}

pub fn state_mip(
    s: &RlState,
    fix: &FixSet,
    p: &Partition,
    base: &MipInstance,
) -> Result<MipInstance, DrlError> {
    Ok(build_reduced_mip(base, &remaining_fix(s, fix, p))?)
}

/// `[I flags | E flags | fixed share per subset | mean normalized demand per segment | gap]`.
pub fn encode_state(s: &RlState, inst: &ScpInstance, p: &Partition, normalizer: f64) -> Vec<f64> {
    let m = p.m();
    let total_fixed: usize = p.subsets.iter().map(Vec::len).sum();
    let mut v = Vec::with_capacity(4 * m + 1);
    v.extend((0..m).map(|k| f64::from(u8::from(s.inserted.contains(&k)))));
    v.extend((0..m).map(|k| f64::from(u8::from(s.excluded.contains(&k)))));
    v.extend(
        p.subsets
            .iter()
            .map(|sub| sub.len() as f64 / total_fixed.max(1) as f64),
    );
    let products = inst.demand.len().max(1) as f64;
    v.extend(p.segments.iter().map(|&(a, b)| {
        if b <= a {
            return 0.0;
        }
        let sum: f64 = inst
            .demand
            .iter()
            .map(|row| row[a..b].iter().sum::<f64>())
            .sum();
        sum / (normalizer * products * (b - a) as f64)
    }));
    v.push(s.gap);
    v
}

pub fn state_dim(m: usize) -> usize {
    4 * m + 1
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RewardMode {
    /// Sense-adjusted objective of the state MIP.
    #[default]
    Objective,
    /// Negated primal gap against the LP bound.
    Gap,
}

/// Reward of reaching a state whose MIP ended with objective `obj` (`None`
/// when no incumbent was found).
pub fn reward(
    obj: Option<f64>,
    lp_star: f64,
    sense: Sense,
    mode: RewardMode,
    normalize: bool,
) -> f64 {
    let Some(obj) = obj.filter(|o| o.is_finite()) else {
        return -1.0;
    };
    match mode {
        RewardMode::Gap => -primal_gap(obj, lp_star),
        RewardMode::Objective => {
            let v = -sense.sign() * obj;
            if normalize && lp_star != 0.0 {
                v / lp_star.abs()
            } else {
                v
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RlHyper {
    pub gamma: f64,
    /// Exploration probability.
    pub alpha: f64,
    pub lr: f64,
    pub t_max: usize,
    pub eps_tolerance: f64,
    pub episodes: usize,
    pub m: usize,
    pub hidden: usize,
    pub batch: usize,
    pub buffer_capacity: usize,
    pub reward: RewardMode,
    pub normalize_reward: bool,
    pub seed: u64,
}

impl Default for RlHyper {
    fn default() -> Self {
        RlHyper {
            gamma: 0.99,
            alpha: 0.1,
            lr: 0.001,
            t_max: 4,
            eps_tolerance: 0.01,
            episodes: 100,
            m: 8,
            hidden: 128,
            batch: 32,
            buffer_capacity: 10_000,
            reward: RewardMode::Objective,
            normalize_reward: true,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QNet {
    pub m: usize,
    pub net: Mlp,
}

impl QNet {
    pub fn new(m: usize, hidden: usize, seed: u64) -> Self {
        let mut r = rng(seed);
        QNet {
            m,
            net: Mlp::new(&[state_dim(m), hidden, hidden, 2 * m], &mut r),
        }
    }

    pub fn q(&self, enc: &[f64]) -> Vec<f64> {
        self.net.forward(enc)
    }

    /// `ℳ(s)`: available subsets whose insert value is at least the exclude value.
    pub fn macro_action(&self, enc: &[f64], available: &[usize]) -> Vec<usize> {
        let q = self.q(enc);
        available
            .iter()
            .copied()
            .filter(|&i| q[i] >= q[self.m + i])
            .collect()
    }

    /// Available subset with the largest insert value.
    pub fn best_insert(&self, enc: &[f64], available: &[usize]) -> Option<usize> {
        let q = self.q(enc);
        available
            .iter()
            .copied()
            .max_by(|&a, &b| q[a].total_cmp(&q[b]).then(b.cmp(&a)))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Vec<f64>,
    /// Outputs regressed to this transition's target.
    pub actions: Vec<Action>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub next_available: Vec<usize>,
    pub terminal: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplayBuffer {
    pub capacity: usize,
    pub items: VecDeque<Transition>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        ReplayBuffer {
            capacity,
            items: VecDeque::new(),
        }
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// `y = r` for terminal transitions, else `r + γ max_{a∈A(s')} Q(s', a)`.
pub fn bellman_target(t: &Transition, frozen: &QNet, gamma: f64) -> f64 {
    if t.terminal || t.next_available.is_empty() {
        return t.reward;
    }
    let q = frozen.q(&t.next_state);
    let best = t
        .next_available
        .iter()
        .flat_map(|&i| [q[i], q[frozen.m + i]])
        .fold(f64::NEG_INFINITY, f64::max);
    t.reward + gamma * best
}

/// Mean squared residual of `net` against targets from `frozen`.
pub fn bellman_residual(buffer: &ReplayBuffer, net: &QNet, frozen: &QNet, gamma: f64) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for t in &buffer.items {
        let y = bellman_target(t, frozen, gamma);
        let q = net.q(&t.state);
        for a in &t.actions {
            sum += (q[a.slot(net.m)] - y).powi(2);
            n += 1;
        }
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Loss and gradient of the squared residual over `batch` with fixed targets.
pub fn residual_grad(net: &QNet, batch: &[(&Transition, f64)]) -> (f64, Grads) {
    let count: usize = batch.iter().map(|(t, _)| t.actions.len()).sum();
    let mut g = Grads::zeros_like(&net.net);
    let mut loss = 0.0;
    if count == 0 {
        return (0.0, g);
    }
    for (t, y) in batch {
        let tr = net.net.forward_trace(&t.state);
        let mut dout = vec![0.0; 2 * net.m];
        for a in &t.actions {
            let k = a.slot(net.m);
            let r = tr.output[k] - y;
            loss += r * r;
            dout[k] += 2.0 * r / count as f64;
        }
        net.net.backward(&tr, &dout, &mut g);
    }
    (loss / count as f64, g)
}

/// Q-network plus its optimizer state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QLearner {
    pub qnet: QNet,
    pub opt: Adam,
}

impl QLearner {
    pub fn new(hyper: &RlHyper) -> Self {
        let qnet = QNet::new(hyper.m, hyper.hidden, child_seed(hyper.seed, 0x0e));
        let opt = Adam::new(hyper.lr, &qnet.net);
        QLearner { qnet, opt }
    }
}

/// One pass over the buffer in minibatches, targets from a snapshot taken at
/// the start of the pass. Returns the residual measured against that snapshot
/// before the update.
pub fn learn_step(buffer: &ReplayBuffer, learner: &mut QLearner, hyper: &RlHyper) -> f64 {
    if buffer.is_empty() {
        return 0.0;
    }
    let frozen = learner.qnet.clone();
    let targets: Vec<(&Transition, f64)> = buffer
        .items
        .iter()
        .map(|t| (t, bellman_target(t, &frozen, hyper.gamma)))
        .collect();
    let before = bellman_residual(buffer, &learner.qnet, &frozen, hyper.gamma);
    for chunk in targets.chunks(hyper.batch.max(1)) {
        let (_, g) = residual_grad(&learner.qnet, chunk);
        learner.opt.step(&mut learner.qnet.net, &g);
    }
    before
}

/// Everything an episode needs about one instance, prepared once.
#[derive(Clone, Debug)]
pub struct RlEnv {
    pub inst: ScpInstance,
    pub mip: MipInstance,
    pub lp_star: f64,
    pub fix: FixSet,
    pub partition: Partition,
    /// Result of the fully fixed model, used as the starting incumbent.
    pub start: MipResult,
    pub normalizer: f64,
}

impl RlEnv {
    fn initial_state(&self) -> RlState {
        let obj = self.start.best_objective;
        RlState::initial(primal_gap(obj, self.lp_star), obj)
    }

    /// Solve the state MIP warm-started from `incumbent`.
    fn solve_state(
        &self,
        s: &RlState,
        incumbent: Option<&[f64]>,
        lim: &SolveLimits,
    ) -> Result<MipResult, DrlError> {
        let mip = state_mip(s, &self.fix, &self.partition, &self.mip)?;
        Ok(solve_mip_with_start(&mip, lim, incumbent)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLogRow {
    pub episode: usize,
    pub instance: String,
    pub step: usize,
    pub actions: String,
    pub gap: f64,
    pub reward: f64,
}

fn fmt_actions(a: &[Action]) -> String {
    a.iter()
        .map(|a| match a {
            Action::Insert(i) => format!("+{i}"),
            Action::Exclude(i) => format!("-{i}"),
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Training loop: ε-greedy rollouts of at most `t_max` steps, one learning
/// pass at the end of each episode. Exploratory steps take a single action
/// drawn uniformly from `A(s)`; greedy steps take the macro-action.
pub fn train_rl(
    envs: &[RlEnv],
    hyper: &RlHyper,
    step_lim: &SolveLimits,
) -> Result<(QLearner, Vec<EpisodeLogRow>), DrlError> {
    if envs.is_empty() {
        return Err(DrlError::NoInstances);
    }
    let mut learner = QLearner::new(hyper);
    let mut buffer = ReplayBuffer::new(hyper.buffer_capacity);
    let mut r = rng(child_seed(hyper.seed, 0xe9));
    let mut order: Vec<usize> = Vec::new();
    let mut log = Vec::new();
    for ep in 0..hyper.episodes {
        if order.is_empty() {
            order = shuffled(envs.len(), &mut r);
            order.reverse();
        }
        let env = &envs[order.pop().expect("refilled above")];
        let m = env.partition.m();
        let mut s = env.initial_state();
        let mut best = env.start.best_solution.clone();
        for step in 0..hyper.t_max {
            if s.gap <= hyper.eps_tolerance {
                break;
            }
            let avail = s.available(m);
            if avail.is_empty() {
                break;
            }
            let enc = encode_state(&s, &env.inst, &env.partition, env.normalizer);
            let (next, actions) = if r.random_bool(hyper.alpha.clamp(0.0, 1.0)) {
                let acts = s.actions(m);
                let a = acts[r.random_range(0..acts.len())];
                (transition(&s, a, m)?, vec![a])
            } else {
                let mut ins = learner.qnet.macro_action(&enc, &avail);
                if ins.is_empty() {
                    ins.extend(learner.qnet.best_insert(&enc, &avail));
                }
                let mut next = s.clone();
                for &i in &ins {
                    next = transition(&next, Action::Insert(i), m)?;
                }
                let acts: Vec<Action> = avail
                    .iter()
                    .map(|&i| {
                        if ins.contains(&i) {
                            Action::Insert(i)
                        } else {
                            Action::Exclude(i)
                        }
                    })
                    .collect();
                (next, acts)
            };
            let res = env.solve_state(&next, best.as_deref(), step_lim)?;
            let obj = res.best_solution.as_ref().map(|_| res.best_objective);
            let rew = reward(
                obj,
                env.lp_star,
                env.mip.sense,
                hyper.reward,
                hyper.normalize_reward,
            );
            let mut next = next;
            if let Some(x) = res.best_solution {
                next.objective = res.best_objective;
                next.gap = primal_gap(res.best_objective, env.lp_star);
                best = Some(x);
            }
            let next_avail = next.available(m);
            let terminal =
                next.gap <= hyper.eps_tolerance || step + 1 == hyper.t_max || next_avail.is_empty();
            log.push(EpisodeLogRow {
                episode: ep,
                instance: env.inst.name.clone(),
                step,
                actions: fmt_actions(&actions),
                gap: next.gap,
                reward: rew,
            });
            buffer.push(Transition {
                state: enc,
                actions,
                reward: rew,
                next_state: encode_state(&next, &env.inst, &env.partition, env.normalizer),
                next_available: next_avail,
                terminal,
            });
            s = next;
            if terminal {
                break;
            }
        }
        if !buffer.is_empty() {
            learn_step(&buffer, &mut learner, hyper);
        }
    }
    Ok((learner, log))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InferStep {
    pub step: usize,
    pub inserted: Vec<usize>,
    pub fallback: bool,
    pub objective: f64,
    pub gap: f64,
}

/// Macro-action inference from the fixed-model result `env.start`, which was
/// obtained at clock time `start_time`. Each step runs under `step_lim`; the
/// returned result carries the best solution over all steps and a combined
/// trace on one clock.
pub fn infer(
    env: &RlEnv,
    qnet: &QNet,
    hyper: &RlHyper,
    step_lim: &SolveLimits,
    start_time: f64,
) -> Result<(MipResult, Vec<InferStep>), DrlError> {
    let m = env.partition.m();
    let sense = env.mip.sense;
    let mut best = env.start.clone();
    let mut trace = env.start.trace.clone();
    let mut clock = start_time;
    let mut steps = Vec::new();
    let mut s = env.initial_state();
    for step in 0..hyper.t_max {
        if s.gap <= hyper.eps_tolerance {
            break;
        }
        let avail = s.available(m);
        if avail.is_empty() {
            break;
        }
        let enc = encode_state(&s, &env.inst, &env.partition, env.normalizer);
        let mut ins = qnet.macro_action(&enc, &avail);
        let fallback = ins.is_empty();
        if fallback {
            ins.extend(qnet.best_insert(&enc, &avail));
        }
        for &i in &ins {
            s = transition(&s, Action::Insert(i), m)?;
        }
        let res = env.solve_state(&s, best.best_solution.as_deref(), step_lim)?;
        for e in &res.trace {
            let better = trace
                .last()
                .is_none_or(|l: &TraceEntry| sense.better(e.objective, l.objective));
            if better {
                trace.push(TraceEntry {
                    time: clock + e.time,
                    objective: e.objective,
                });
            }
        }
        clock += res.elapsed;
        if res.best_solution.is_some() {
            s.objective = res.best_objective;
            s.gap = primal_gap(res.best_objective, env.lp_star);
            if !best.has_incumbent() || sense.better(res.best_objective, best.best_objective) {
                best = MipResult {
                    trace: Vec::new(),
                    ..res.clone()
                };
            }
        }
        steps.push(InferStep {
            step,
            inserted: ins,
            fallback,
            objective: s.objective,
            gap: s.gap,
        });
    }
    best.trace = trace;
    best.elapsed = clock;
    Ok((best, steps))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QCheckpointHeader {
    pub version: u32,
    pub kind: String,
    pub m: usize,
    pub encoding_version: u32,
    pub spec_hash: String,
}

#[derive(Serialize, Deserialize)]
struct QCheckpoint {
    header: QCheckpointHeader,
    qnet: QNet,
}

impl QNet {
    pub fn save(&self, path: &Path, spec_hash: &str) -> Result<(), DrlError> {
        let header = QCheckpointHeader {
            version: crate::learn::CHECKPOINT_VERSION,
            kind: "q-net".into(),
            m: self.m,
            encoding_version: ENCODING_VERSION,
            spec_hash: spec_hash.to_string(),
        };
        std::fs::write(
            path,
            serde_json::to_string(&QCheckpoint {
                header,
                qnet: self.clone(),
            })?,
        )?;
        Ok(())
    }

    pub fn load(path: &Path, spec_hash: &str) -> Result<Self, DrlError> {
        let ck: QCheckpoint = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        let h = &ck.header;
        if h.kind != "q-net" || h.encoding_version != ENCODING_VERSION || h.m != ck.qnet.m {
            return Err(DrlError::Checkpoint(format!("unsupported header {h:?}")));
        }
        if h.spec_hash != spec_hash {
            return Err(DrlError::Checkpoint(format!(
                "feature-spec hash {} != expected {spec_hash}",
                h.spec_hash
            )));
        }
        Ok(ck.qnet)
    }
}

/// Uniform draw used by tests of the exploration policy.
pub fn random_action(s: &RlState, m: usize, r: &mut Rng) -> Option<Action> {
    let acts = s.actions(m);
    (!acts.is_empty()).then(|| acts[r.random_range(0..acts.len())])
}
