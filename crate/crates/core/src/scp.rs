//! Stylized supply-chain planning model and its synthetic instance generator.
//!
//! Products `i` are assembled from parts `j`: every unit of product `i`
//! delivered in period `t` consumes one unit of each part `j` whose supply set
//! `S_j` contains `i`. Parts are produced under grouped capacity limits and can
//! be carried forward as inventory. Unmet demand is penalized, so the model is
//! always feasible.
//!
//! Generated names are `x[i,t]`, `z[j,t]`, `y[j,t]`, `u[i,t]` for variables and
//! `bal[j,t]`, `dem[i,t]`, `cap[m,t]` for rows, all 0-based.

use std::fmt;
use std::io::Write;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng as _;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mip::{ConSense, Constraint, MipInstance, Sense, Variable};
use crate::rng::{child_rng, child_seed};

#[derive(Debug, Error)]
pub enum ScpError {
    #[error("invalid topology: {0}")]
    Topology(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid data: {0}")]
    Data(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScpTopology {
    /// Product count `M`.
    pub products: usize,
    /// Part count `N`.
    pub parts: usize,
    /// Period count `T`.
    pub periods: usize,
    /// `S_j`: products consuming part `j`.
    pub supplies: Vec<Vec<usize>>,
    /// `T_m`: parts drawing on capacity resource `m`.
    pub cap_groups: Vec<Vec<usize>>,
    /// `y_j^0`.
    pub initial_inventory: Vec<f64>,
}

impl ScpTopology {
    pub fn check(&self) -> Result<(), ScpError> {
        let bad = |m: String| Err(ScpError::Topology(m));
        if self.products == 0 || self.parts == 0 || self.periods == 0 {
            return bad(format!(
                "empty dimension M={} N={} T={}",
                self.products, self.parts, self.periods
            ));
        }
        if self.supplies.len() != self.parts || self.initial_inventory.len() != self.parts {
            return bad("per-part arrays must have length N".into());
        }
        let mut covered = vec![false; self.products];
        for (j, s) in self.supplies.iter().enumerate() {
            for w in s.windows(2) {
                if w[0] >= w[1] {
                    return bad(format!("S_{j} must be strictly increasing"));
                }
            }
            for &i in s {
                if i >= self.products {
                    return bad(format!("S_{j} references product {i}"));
                }
                covered[i] = true;
            }
        }
        if let Some(i) = covered.iter().position(|c| !c) {
            return bad(format!("product {i} is in no supply set"));
        }
        for (m, g) in self.cap_groups.iter().enumerate() {
            if g.is_empty() {
                return bad(format!("capacity group {m} is empty"));
            }
            if g.iter().any(|&j| j >= self.parts) {
                return bad(format!("capacity group {m} references an unknown part"));
            }
        }
        if self
            .initial_inventory
            .iter()
            .any(|v| !(v.is_finite() && *v >= 0.0))
        {
            return bad("initial inventory must be finite and nonnegative".into());
        }
        Ok(())
    }

    /// Random assembly topology: each product uses one to three parts, parts
    /// are split across `max(1, N/2)` capacity groups.
    pub fn random(
        products: usize,
        parts: usize,
        periods: usize,
        seed: u64,
    ) -> Result<Self, ScpError> {
        if products == 0 || parts == 0 || periods == 0 {
            return Err(ScpError::Topology("dimensions must be positive".into()));
        }
        let mut rng = child_rng(seed, 0x70);
        let mut supplies = vec![Vec::new(); parts];
        let all: Vec<usize> = (0..parts).collect();
        for i in 0..products {
            let k = (1 + usize::from(rng.random_bool(0.6)) + usize::from(rng.random_bool(0.25)))
                .min(parts);
            for &j in all.choose_multiple(&mut rng, k) {
                supplies[j].push(i);
            }
        }
        for s in &mut supplies {
            s.sort_unstable();
        }
        let n_groups = (parts / 2).max(1);
        let mut order = all.clone();
        order.shuffle(&mut rng);
        let mut cap_groups = vec![Vec::new(); n_groups];
        for (k, j) in order.into_iter().enumerate() {
            cap_groups[k % n_groups].push(j);
        }
        for g in &mut cap_groups {
            g.sort_unstable();
        }
        let initial_inventory = (0..parts).map(|_| rng.random_range(0..4) as f64).collect();
        let topo = ScpTopology {
            products,
            parts,
            periods,
            supplies,
            cap_groups,
            initial_inventory,
        };
        topo.check()?;
        Ok(topo)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScpInstance {
    pub name: String,
    pub topology: ScpTopology,
    /// `D[i][t]`, nonnegative integers.
    pub demand: Vec<Vec<f64>>,
    /// `P̂[m][t]`.
    pub capacity: Vec<Vec<f64>>,
    /// `α[j][t]`.
    pub inv_cost: Vec<Vec<f64>>,
    /// `β[j][t]`.
    pub prod_cost: Vec<Vec<f64>>,
    /// `δ[i][t]`, strictly positive.
    pub unmet_penalty: Vec<Vec<f64>>,
}

fn check_shape(what: &str, a: &[Vec<f64>], rows: usize, cols: usize) -> Result<(), ScpError> {
    if a.len() != rows || a.iter().any(|r| r.len() != cols) {
        return Err(ScpError::Shape(format!("{what} must be {rows}x{cols}")));
    }
    if a.iter().flatten().any(|v| !v.is_finite()) {
        return Err(ScpError::Data(format!("{what} has non-finite entries")));
    }
    Ok(())
}

impl ScpInstance {
    pub fn check(&self) -> Result<(), ScpError> {
        let tp = &self.topology;
        tp.check()?;
        let t = tp.periods;
        check_shape("demand", &self.demand, tp.products, t)?;
        check_shape("capacity", &self.capacity, tp.cap_groups.len(), t)?;
        check_shape("inv_cost", &self.inv_cost, tp.parts, t)?;
        check_shape("prod_cost", &self.prod_cost, tp.parts, t)?;
        check_shape("unmet_penalty", &self.unmet_penalty, tp.products, t)?;
        if self
            .demand
            .iter()
            .flatten()
            .any(|&d| d < 0.0 || d.fract() != 0.0)
        {
            return Err(ScpError::Data(
                "demands must be nonnegative integers".into(),
            ));
        }
        if self.capacity.iter().flatten().any(|&c| c < 0.0) {
            return Err(ScpError::Data("capacities must be nonnegative".into()));
        }
        if self.unmet_penalty.iter().flatten().any(|&d| d <= 0.0) {
            return Err(ScpError::Data(
                "unmet-demand penalties must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn total_demand(&self) -> f64 {
        self.demand.iter().flatten().sum()
    }

    /// Demand as CSV with columns `product,period,demand`.
    pub fn write_demand_csv<W: Write>(&self, out: W) -> Result<(), ScpError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["product", "period", "demand"])?;
        for (i, row) in self.demand.iter().enumerate() {
            for (t, d) in row.iter().enumerate() {
                w.write_record([i.to_string(), t.to_string(), d.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// How the demand rows are written.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DemandModel {
    /// `x[i,t] + u[i,t] = D[i,t]`.
    #[default]
    PerPeriod,
    /// Cumulative window: `Σ_{t'≤t} x[i,t'] + u[i,t] = Σ_{t'≤t} D[i,t']`,
    /// so `u[i,t]` is the backlog carried at the end of `t`.
    Window,
}

/// Role of a generated variable or row, recovered from its name.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    X,
    Z,
    Y,
    U,
    Bal,
    Dem,
    Cap,
}

impl Role {
    fn tag(self) -> &'static str {
        match self {
            Role::X => "x",
            Role::Z => "z",
            Role::Y => "y",
            Role::U => "u",
            Role::Bal => "bal",
            Role::Dem => "dem",
            Role::Cap => "cap",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

pub fn name(role: Role, a: usize, t: usize) -> String {
    format!("{}[{a},{t}]", role.tag())
}

/// Parse `role[a,t]`.
pub fn parse_name(s: &str) -> Option<(Role, usize, usize)> {
    let (tag, rest) = s.split_once('[')?;
    let inner = rest.strip_suffix(']')?;
    let (a, t) = inner.split_once(',')?;
    let role = match tag {
        "x" => Role::X,
        "z" => Role::Z,
        "y" => Role::Y,
        "u" => Role::U,
        "bal" => Role::Bal,
        "dem" => Role::Dem,
        "cap" => Role::Cap,
        _ => return None,
    };
    Some((role, a.parse().ok()?, t.parse().ok()?))
}

/// Column layout of a built model.
#[derive(Clone, Copy, Debug)]
pub struct Layout {
    pub products: usize,
    pub parts: usize,
    pub periods: usize,
}

impl Layout {
    pub fn of(topo: &ScpTopology) -> Self {
        Layout {
            products: topo.products,
            parts: topo.parts,
            periods: topo.periods,
        }
    }
    pub fn x(&self, i: usize, t: usize) -> usize {
        i * self.periods + t
    }
    pub fn z(&self, j: usize, t: usize) -> usize {
        self.products * self.periods + j * self.periods + t
    }
    pub fn y(&self, j: usize, t: usize) -> usize {
        (self.products + self.parts) * self.periods + j * self.periods + t
    }
    pub fn u(&self, i: usize, t: usize) -> usize {
        (self.products + 2 * self.parts) * self.periods + i * self.periods + t
    }
    pub fn num_vars(&self) -> usize {
        2 * (self.products + self.parts) * self.periods
    }
}

pub fn build_mip(inst: &ScpInstance) -> Result<MipInstance, ScpError> {
    build_mip_with(inst, DemandModel::PerPeriod)
}

/// Builds the planning MIP. Integer columns get implied upper bounds
/// (demand for `x`, tightest group capacity for `z`), which leaves the
/// feasible set unchanged.
pub fn build_mip_with(inst: &ScpInstance, model: DemandModel) -> Result<MipInstance, ScpError> {
    inst.check()?;
    let tp = &inst.topology;
    let (m, n, nt) = (tp.products, tp.parts, tp.periods);
    let lay = Layout::of(tp);

    let cum = |i: usize, t: usize| -> f64 { inst.demand[i][..=t].iter().sum() };
    let mut vars = Vec::with_capacity(lay.num_vars());
    for i in 0..m {
        for t in 0..nt {
            let ub = match model {
                DemandModel::PerPeriod => inst.demand[i][t],
                DemandModel::Window => cum(i, t),
            };
            vars.push(Variable::integer(name(Role::X, i, t), 0.0, ub, 0.0));
        }
    }
    for j in 0..n {
        for t in 0..nt {
            let ub = tp
                .cap_groups
                .iter()
                .enumerate()
                .filter(|(_, g)| g.contains(&j))
                .map(|(g, _)| inst.capacity[g][t].floor())
                .fold(f64::INFINITY, f64::min);
            vars.push(Variable::integer(
                name(Role::Z, j, t),
                0.0,
                ub,
                inst.prod_cost[j][t],
            ));
        }
    }
    for j in 0..n {
        for t in 0..nt {
            vars.push(Variable::continuous(
                name(Role::Y, j, t),
                0.0,
                f64::INFINITY,
                inst.inv_cost[j][t],
            ));
        }
    }
    for i in 0..m {
        for t in 0..nt {
            vars.push(Variable::continuous(
                name(Role::U, i, t),
                0.0,
                f64::INFINITY,
                inst.unmet_penalty[i][t],
            ));
        }
    }

    let mut cons = Vec::with_capacity(n * nt + m * nt + tp.cap_groups.len() * nt);
    for j in 0..n {
        for t in 0..nt {
            let mut terms = vec![(lay.z(j, t), 1.0), (lay.y(j, t), -1.0)];
            if t > 0 {
                terms.push((lay.y(j, t - 1), 1.0));
            }
            terms.extend(tp.supplies[j].iter().map(|&i| (lay.x(i, t), -1.0)));
            let rhs = if t == 0 {
                -tp.initial_inventory[j]
            } else {
                0.0
            };
            cons.push(Constraint::new(
                name(Role::Bal, j, t),
                terms,
                ConSense::Eq,
                rhs,
            ));
        }
    }
    for i in 0..m {
        for t in 0..nt {
            let (mut terms, rhs) = match model {
                DemandModel::PerPeriod => (vec![(lay.x(i, t), 1.0)], inst.demand[i][t]),
                DemandModel::Window => ((0..=t).map(|s| (lay.x(i, s), 1.0)).collect(), cum(i, t)),
            };
            terms.push((lay.u(i, t), 1.0));
            cons.push(Constraint::new(
                name(Role::Dem, i, t),
                terms,
                ConSense::Eq,
                rhs,
            ));
        }
    }
    for (g, parts) in tp.cap_groups.iter().enumerate() {
        for t in 0..nt {
            let terms = parts.iter().map(|&j| (lay.z(j, t), 1.0)).collect();
            cons.push(Constraint::new(
                name(Role::Cap, g, t),
                terms,
                ConSense::Le,
                inst.capacity[g][t],
            ));
        }
    }
    Ok(MipInstance {
        name: inst.name.clone(),
        sense: Sense::Min,
        vars,
        cons,
    })
}

/// The do-nothing plan: no production or deliveries, initial stock carried,
/// all demand unmet. Feasible for every instance.
pub fn idle_plan(inst: &ScpInstance, model: DemandModel) -> Vec<f64> {
    let tp = &inst.topology;
    let lay = Layout::of(tp);
    let mut x = vec![0.0; lay.num_vars()];
    for j in 0..tp.parts {
        for t in 0..tp.periods {
            x[lay.y(j, t)] = tp.initial_inventory[j];
        }
    }
    for i in 0..tp.products {
        let mut acc = 0.0;
        for t in 0..tp.periods {
            acc += inst.demand[i][t];
            x[lay.u(i, t)] = match model {
                DemandModel::PerPeriod => inst.demand[i][t],
                DemandModel::Window => acc,
            };
        }
    }
    x
}

/// Seasonal snapshot generator. Costs and capacities are drawn once from
/// `seed` and shared by all snapshots; each snapshot shifts the seasonal
/// phase and adds per-product multiplicative jitter.
pub fn generate_snapshots(
    topo: &ScpTopology,
    count: usize,
    seed: u64,
) -> Result<Vec<ScpInstance>, ScpError> {
    topo.check()?;
    if count == 0 {
        return Err(ScpError::Data("snapshot count must be at least 1".into()));
    }
    let (m, n, nt) = (topo.products, topo.parts, topo.periods);
    let mut rng = child_rng(seed, 1);
    let scale_dist = LogNormal::new(12f64.ln(), 0.6).expect("valid lognormal");
    let scale: Vec<f64> = (0..m).map(|_| scale_dist.sample(&mut rng)).collect();
    let amp: Vec<f64> = (0..m).map(|_| rng.random_range(0.2..0.6)).collect();
    let trend: Vec<f64> = (0..m).map(|_| rng.random_range(-0.02..0.04)).collect();
    let base_cost: Vec<f64> = (0..n).map(|_| rng.random_range(1.0..4.0)).collect();
    let hold: Vec<f64> = (0..n).map(|_| rng.random_range(0.02..0.15)).collect();

    let prod_cost: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            (0..nt)
                .map(|_| base_cost[j] * rng.random_range(0.7..1.3))
                .collect()
        })
        .collect();
    let inv_cost: Vec<Vec<f64>> = (0..n).map(|j| vec![hold[j] * base_cost[j]; nt]).collect();
    let unit_cost: Vec<f64> = (0..m)
        .map(|i| {
            (0..n)
                .filter(|&j| topo.supplies[j].contains(&i))
                .map(|j| base_cost[j])
                .sum()
        })
        .collect();
    let unmet_penalty: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            (0..nt)
                .map(|_| unit_cost[i] * rng.random_range(1.05..2.5))
                .collect()
        })
        .collect();
    let need: Vec<f64> = (0..n)
        .map(|j| topo.supplies[j].iter().map(|&i| scale[i]).sum())
        .collect();
    let capacity: Vec<Vec<f64>> = topo
        .cap_groups
        .iter()
        .map(|g| {
            let rho = rng.random_range(0.35..0.7);
            let group_need: f64 = g.iter().map(|&j| need[j]).sum();
            (0..nt)
                .map(|_| (rho * group_need * rng.random_range(0.8..1.2)).floor() + 0.5)
                .collect()
        })
        .collect();

    let jitter = LogNormal::new(0.0, 0.1).expect("valid lognormal");
    let snapshots = (0..count)
        .map(|k| {
            let mut r = child_rng(seed, 2 + k as u64);
            let phase =
                std::f64::consts::TAU * k as f64 / count.max(12) as f64 + r.random_range(-0.2..0.2);
            let demand = (0..m)
                .map(|i| {
                    let level = jitter.sample(&mut r);
                    (0..nt)
                        .map(|t| {
                            let season =
                                (std::f64::consts::TAU * t as f64 / nt.max(4) as f64 + phase).sin();
                            let v =
                                scale[i] * level * (1.0 + amp[i] * season + trend[i] * t as f64);
                            v.round().max(0.0)
                        })
                        .collect()
                })
                .collect();
            ScpInstance {
                name: format!("snap{k:03}"),
                topology: topo.clone(),
                demand,
                capacity: capacity.clone(),
                inv_cost: inv_cost.clone(),
                prod_cost: prod_cost.clone(),
                unmet_penalty: unmet_penalty.clone(),
            }
        })
        .collect();
    Ok(snapshots)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    /// Multiplies the per-cell Gaussian mean (in units of the product's mean demand).
    pub gauss_mean_scale: f64,
    /// Multiplies the per-cell Gaussian standard deviation.
    pub gauss_sd_scale: f64,
    pub uniform_halfwidth: f64,
    /// Additive rather than multiplicative uniform noise.
    pub absolute: bool,
    /// Seeds the per-cell Gaussian parameters; keep fixed across one dataset.
    pub meta_seed: u64,
    pub seed: u64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        NoiseParams {
            gauss_mean_scale: 0.05,
            gauss_sd_scale: 0.15,
            uniform_halfwidth: 0.2,
            absolute: false,
            meta_seed: 0,
            seed: 0,
        }
    }
}

impl NoiseParams {
    pub fn identity() -> Self {
        NoiseParams {
            gauss_mean_scale: 0.0,
            gauss_sd_scale: 0.0,
            uniform_halfwidth: 0.0,
            ..Default::default()
        }
    }
}

/// `D' = max(0, round(D + ε + ε'·D))` with `ε ~ N(μ_it, σ_it²)` and
/// `ε' ~ U[-h, h]` (`ε'` added directly when `absolute`).
pub fn perturb(base: &ScpInstance, p: &NoiseParams) -> Result<ScpInstance, ScpError> {
    base.check()?;
    if !(p.uniform_halfwidth >= 0.0)
        || !p.gauss_mean_scale.is_finite()
        || !(p.gauss_sd_scale >= 0.0)
    {
        return Err(ScpError::Data("invalid noise parameters".into()));
    }
    let tp = &base.topology;
    let mut meta = child_rng(
        p.meta_seed,
        ((tp.products as u64) << 32) ^ ((tp.parts as u64) << 16) ^ tp.periods as u64,
    );
    let mut rng = child_rng(p.seed, 0x9e);
    let std = Normal::new(0.0, 1.0).expect("valid normal");
    let mut out = base.clone();
    for (i, row) in out.demand.iter_mut().enumerate() {
        let mean_d = (base.demand[i].iter().sum::<f64>() / tp.periods as f64).max(1.0);
        for d in row.iter_mut() {
            let mu = p.gauss_mean_scale * mean_d * std.sample(&mut meta);
            let sigma = p.gauss_sd_scale * mean_d * std.sample(&mut meta).abs();
            let eps = mu + sigma * std.sample(&mut rng);
            let u = if p.uniform_halfwidth > 0.0 {
                rng.random_range(-p.uniform_halfwidth..=p.uniform_halfwidth)
            } else {
                0.0
            };
            let shift = if p.absolute { u } else { u * *d };
            *d = (*d + eps + shift).round().max(0.0);
        }
    }
    Ok(out)
}

/// Cross-instance demand statistics: per-cell mean and standard deviation
/// across `instances`, summarized by their mean and standard deviation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemandStats {
    pub mean_of_means: f64,
    pub sd_of_means: f64,
    pub mean_of_sds: f64,
    pub sd_of_sds: f64,
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn demand_stats(instances: &[ScpInstance]) -> Result<DemandStats, ScpError> {
    let first = instances
        .first()
        .ok_or_else(|| ScpError::Data("no instances".into()))?;
    let (m, nt) = (first.topology.products, first.topology.periods);
    let mut means = Vec::with_capacity(m * nt);
    let mut sds = Vec::with_capacity(m * nt);
    for i in 0..m {
        for t in 0..nt {
            let cell: Vec<f64> = instances.iter().map(|s| s.demand[i][t]).collect();
            let (mu, sd) = mean_sd(&cell);
            means.push(mu);
            sds.push(sd);
        }
    }
    let (mean_of_means, sd_of_means) = mean_sd(&means);
    let (mean_of_sds, sd_of_sds) = mean_sd(&sds);
    Ok(DemandStats {
        mean_of_means,
        sd_of_means,
        mean_of_sds,
        sd_of_sds,
    })
}

/// Integer-domain size of the built model, `Π (ub - lb + 1)`.
pub fn integer_domain_size(mip: &MipInstance) -> f64 {
    mip.vars
        .iter()
        .filter(|v| v.is_integer)
        .map(|v| (v.ub.floor() - v.lb.ceil() + 1.0).max(0.0))
        .product()
}

/// Tiny random instance (at most two products, parts and periods) whose
/// integer domain fits within `max_domain`. Demands shrink until it fits.
pub fn random_micro_instance(seed: u64, max_domain: f64) -> ScpInstance {
    let mut rng = child_rng(seed, 0x31);
    let m = rng.random_range(1..=2);
    let n = rng.random_range(1..=2);
    let nt = rng.random_range(1..=2);
    let mut supplies = vec![Vec::new(); n];
    for i in 0..m {
        let j = rng.random_range(0..n);
        supplies[j].push(i);
        if n > 1 && rng.random_bool(0.4) {
            supplies[1 - j].push(i);
        }
    }
    for s in &mut supplies {
        s.sort_unstable();
        s.dedup();
    }
    let cap_groups = if n > 1 && rng.random_bool(0.5) {
        vec![vec![0, 1]]
    } else {
        (0..n).map(|j| vec![j]).collect()
    };
    let topology = ScpTopology {
        products: m,
        parts: n,
        periods: nt,
        supplies,
        cap_groups,
        initial_inventory: (0..n).map(|_| rng.random_range(0..2) as f64).collect(),
    };
    let g = topology.cap_groups.len();
    let mut inst = ScpInstance {
        name: format!("micro{seed}"),
        demand: (0..m)
            .map(|_| (0..nt).map(|_| rng.random_range(0..6) as f64).collect())
            .collect(),
        capacity: (0..g)
            .map(|_| {
                (0..nt)
                    .map(|_| rng.random_range(0.0..6.0f64).floor() + 0.5)
                    .collect()
            })
            .collect(),
        inv_cost: (0..n)
            .map(|_| (0..nt).map(|_| rng.random_range(0.1..1.0)).collect())
            .collect(),
        prod_cost: (0..n)
            .map(|_| (0..nt).map(|_| rng.random_range(0.5..3.0)).collect())
            .collect(),
        unmet_penalty: (0..m)
            .map(|_| (0..nt).map(|_| rng.random_range(1.0..8.0)).collect())
            .collect(),
        topology,
    };
    loop {
        let mip = build_mip(&inst).expect("micro instance is valid");
        if integer_domain_size(&mip) <= max_domain {
            return inst;
        }
        for d in inst.demand.iter_mut().flatten() {
            *d = (*d - 1.0).max(0.0);
        }
        for c in inst.capacity.iter_mut().flatten() {
            *c = (*c - 1.0).max(0.5);
        }
    }
}

/// Seed for the `k`-th generated instance of a dataset.
pub fn instance_seed(seed: u64, k: u64) -> u64 {
    child_seed(seed, 0x1000 + k)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::mip::validate;

    pub(crate) fn micro() -> ScpInstance {
        ScpInstance {
            name: "micro".into(),
            topology: ScpTopology {
                products: 1,
                parts: 1,
                periods: 1,
                supplies: vec![vec![0]],
                cap_groups: vec![vec![0]],
                initial_inventory: vec![0.0],
            },
            demand: vec![vec![3.0]],
            capacity: vec![vec![2.0]],
            inv_cost: vec![vec![1.0]],
            prod_cost: vec![vec![1.0]],
            unmet_penalty: vec![vec![10.0]],
        }
    }

    fn two_by_one() -> ScpInstance {
        ScpInstance {
            name: "m2n1t2".into(),
            topology: ScpTopology {
                products: 2,
                parts: 1,
                periods: 2,
                supplies: vec![vec![0, 1]],
                cap_groups: vec![vec![0]],
                initial_inventory: vec![0.0],
            },
            demand: vec![vec![1.0, 2.0], vec![3.0, 4.0]],
            capacity: vec![vec![5.0, 5.0]],
            inv_cost: vec![vec![0.1, 0.1]],
            prod_cost: vec![vec![1.0, 1.0]],
            unmet_penalty: vec![vec![5.0, 5.0], vec![5.0, 5.0]],
        }
    }

    #[test]
    fn counts_for_two_products_one_part() {
        let mip = build_mip(&two_by_one()).unwrap();
        assert_eq!(mip.num_vars(), 12);
        // bal: N*T = 2, dem: M*T = 4, cap: |C|*T = 2
        assert_eq!(mip.num_cons(), 8);
        assert_eq!(mip.num_integer(), 6);
        assert!(validate(&mip).is_empty());
    }

    #[test]
    fn names_round_trip() {
        let mip = build_mip(&two_by_one()).unwrap();
        let lay = Layout::of(&two_by_one().topology);
        assert_eq!(mip.vars[lay.x(1, 0)].name, "x[1,0]");
        assert_eq!(mip.vars[lay.z(0, 1)].name, "z[0,1]");
        assert_eq!(mip.vars[lay.y(0, 1)].name, "y[0,1]");
        assert_eq!(mip.vars[lay.u(1, 1)].name, "u[1,1]");
        for v in &mip.vars {
            let (role, _, _) = parse_name(&v.name).unwrap();
            assert!(matches!(role, Role::X | Role::Z | Role::Y | Role::U));
        }
        assert_eq!(parse_name("cap[3,7]"), Some((Role::Cap, 3, 7)));
        assert_eq!(parse_name("w[1,2]"), None);
        assert_eq!(parse_name("x[1]"), None);
    }

    #[test]
    fn micro_instance_bounds() {
        let mip = build_mip(&micro()).unwrap();
        assert_eq!(mip.vars[0].ub, 3.0);
        assert_eq!(mip.vars[1].ub, 2.0);
        assert_eq!(integer_domain_size(&mip), 12.0);
    }

    #[test]
    fn idle_plan_is_feasible() {
        for model in [DemandModel::PerPeriod, DemandModel::Window] {
            let mut inst = two_by_one();
            inst.topology.initial_inventory = vec![2.0];
            let mip = build_mip_with(&inst, model).unwrap();
            assert!(mip.is_feasible(&idle_plan(&inst, model), 1e-9, true));
        }
    }

    #[test]
    fn window_rows_are_cumulative() {
        let mip = build_mip_with(&two_by_one(), DemandModel::Window).unwrap();
        let row = mip.cons.iter().find(|c| c.name == "dem[1,1]").unwrap();
        assert_eq!(row.rhs, 7.0);
        assert_eq!(row.terms.len(), 3);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut inst = two_by_one();
        inst.demand.pop();
        assert!(matches!(build_mip(&inst), Err(ScpError::Shape(_))));
        let mut inst = two_by_one();
        inst.unmet_penalty[0][0] = 0.0;
        assert!(matches!(build_mip(&inst), Err(ScpError::Data(_))));
    }

    #[test]
    fn snapshots_deterministic() {
        let topo = ScpTopology::random(6, 4, 5, 3).unwrap();
        let a = generate_snapshots(&topo, 20, 11).unwrap();
        let b = generate_snapshots(&topo, 20, 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(generate_snapshots(&topo, 1, 11).unwrap().len(), 1);
        assert!(generate_snapshots(&topo, 0, 11).is_err());
        for s in &a {
            s.check().unwrap();
        }
        let stats = demand_stats(&a).unwrap();
        assert!(stats.mean_of_means > 0.0 && stats.sd_of_means > 0.0);
    }

    #[test]
    fn identity_noise() {
        let topo = ScpTopology::random(5, 3, 4, 1).unwrap();
        let base = &generate_snapshots(&topo, 1, 2).unwrap()[0];
        assert_eq!(&perturb(base, &NoiseParams::identity()).unwrap(), base);
        assert_eq!(NoiseParams::default().uniform_halfwidth, 0.2);
        let p = NoiseParams {
            seed: 5,
            ..Default::default()
        };
        assert_eq!(perturb(base, &p).unwrap(), perturb(base, &p).unwrap());
    }

    #[test]
    fn demand_csv() {
        let mut buf = Vec::new();
        two_by_one().write_demand_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.starts_with("product,period,demand\n0,0,1\n"));
    }

    #[test]
    fn micro_generator_respects_budget() {
        for s in 0..50 {
            let inst = random_micro_instance(s, 1e4);
            assert!(integer_domain_size(&build_mip(&inst).unwrap()) <= 1e4);
        }
    }
}
