//! Demand-window features from a time-directed variable/constraint graph.
//!
//! Arcs follow material flow: production enters its balance row, a balance
//! row feeds the deliveries and the closing inventory of its period, that
//! inventory enters the next period's balance row, and deliveries point at
//! the demand rows they can serve (never earlier ones). The features of an
//! integer variable are the demands of every reachable demand row.

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::mip::{validate, ConSense, Constraint, MipError, MipInstance, Sense, Variable};
use crate::scp::{name, parse_name, Role, ScpInstance, ScpTopology};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error(transparent)]
    Mip(#[from] MipError),
    #[error("not a planning model: {0}")]
    NotScp(String),
    #[error("unknown variable {0:?}")]
    UnknownVar(String),
    #[error("{0:?} is not an integer variable")]
    NotInteger(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub var_name: String,
    /// `(product, period)` pairs ordered by period, then product.
    pub demand_refs: Vec<(usize, usize)>,
    pub fixed_length: usize,
}

impl FeatureSpec {
    /// Pad or truncate to `len`; truncation keeps the earliest periods.
    pub fn with_length(mut self, len: usize) -> Self {
        self.demand_refs.truncate(len);
        self.fixed_length = len;
        self
    }
}

#[derive(Clone, Debug)]
pub struct DirectedScpGraph {
    n_vars: usize,
    /// Role, first index and period of every node (variables first).
    nodes: Vec<(Role, usize, usize)>,
    arcs: Vec<Vec<usize>>,
    is_integer: Vec<bool>,
    index: HashMap<String, usize>,
}

impl DirectedScpGraph {
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn arc_count(&self) -> usize {
        self.arcs.iter().map(Vec::len).sum()
    }

    /// `(role, index, period)` of node `v`.
    pub fn node(&self, v: usize) -> (Role, usize, usize) {
        self.nodes[v]
    }

    pub fn successors(&self, v: usize) -> &[usize] {
        &self.arcs[v]
    }

    pub fn var_node(&self, var: &str) -> Option<usize> {
        self.index.get(var).copied()
    }

    pub fn con_node(&self, con: usize) -> usize {
        self.n_vars + con
    }

    pub fn arcs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.arcs
            .iter()
            .enumerate()
            .flat_map(|(u, vs)| vs.iter().map(move |&v| (u, v)))
    }

    /// Nodes reachable from `start` (excluding `start` unless on a cycle).
    pub fn reachable(&self, start: usize) -> Vec<usize> {
        let mut seen = vec![false; self.nodes.len()];
        let mut queue = VecDeque::from([start]);
        let mut out = Vec::new();
        while let Some(u) = queue.pop_front() {
            for &v in &self.arcs[u] {
                if !seen[v] {
                    seen[v] = true;
                    out.push(v);
                    queue.push_back(v);
                }
            }
        }
        out
    }
}

fn check_index(
    topo: &ScpTopology,
    role: Role,
    a: usize,
    t: usize,
    what: &str,
) -> Result<(), FeatureError> {
    let limit = match role {
        Role::X | Role::U | Role::Dem => topo.products,
        Role::Z | Role::Y | Role::Bal => topo.parts,
        Role::Cap => topo.cap_groups.len(),
    };
    // Periods may start one before the horizon for an opening-stock column.
    if a >= limit || t > topo.periods {
        return Err(FeatureError::Shape(format!(
            "{what} is outside the topology"
        )));
    }
    Ok(())
}

pub fn build_directed_graph(
    mip: &MipInstance,
    topo: &ScpTopology,
) -> Result<DirectedScpGraph, FeatureError> {
    validate(mip).into_result()?;
    let n = mip.num_vars();
    let mut nodes = Vec::with_capacity(n + mip.num_cons());
    let mut index = HashMap::with_capacity(n);
    for (k, v) in mip.vars.iter().enumerate() {
        let parsed = parse_name(&v.name).ok_or_else(|| FeatureError::NotScp(v.name.clone()))?;
        if !matches!(parsed.0, Role::X | Role::Z | Role::Y | Role::U) {
            return Err(FeatureError::NotScp(format!("{} names a row", v.name)));
        }
        check_index(topo, parsed.0, parsed.1, parsed.2, &v.name)?;
        nodes.push(parsed);
        index.insert(v.name.clone(), k);
    }
    for c in &mip.cons {
        let parsed = parse_name(&c.name).ok_or_else(|| FeatureError::NotScp(c.name.clone()))?;
        if !matches!(parsed.0, Role::Bal | Role::Dem | Role::Cap) {
            return Err(FeatureError::NotScp(format!("{} names a column", c.name)));
        }
        check_index(topo, parsed.0, parsed.1, parsed.2, &c.name)?;
        nodes.push(parsed);
    }

    let mut arcs = vec![Vec::new(); nodes.len()];
    for (ci, c) in mip.cons.iter().enumerate() {
        let cn = n + ci;
        let (crole, _, ct) = nodes[cn];
        for &(v, _) in &c.terms {
            let (vrole, _, vt) = nodes[v];
            let arc = match (vrole, crole) {
                (Role::Z, Role::Bal | Role::Cap) | (Role::U, Role::Dem) => Some((v, cn)),
                (Role::X, Role::Bal) => Some((cn, v)),
                (Role::X, Role::Dem) => (ct >= vt).then_some((v, cn)),
                (Role::Y, Role::Bal) if ct == vt => Some((cn, v)),
                (Role::Y, Role::Bal) if ct == vt + 1 => Some((v, cn)),
                _ => {
                    return Err(FeatureError::NotScp(format!(
                        "{} in {}",
                        mip.vars[v].name, c.name
                    )))
                }
            };
            if let Some((a, b)) = arc {
                assert!(
                    nodes[b].2 >= nodes[a].2,
                    "arc from a later period to an earlier one"
                );
                arcs[a].push(b);
            }
        }
    }
    for a in &mut arcs {
        a.sort_unstable();
        a.dedup();
    }
    Ok(DirectedScpGraph {
        n_vars: n,
        nodes,
        arcs,
        is_integer: mip.vars.iter().map(|v| v.is_integer).collect(),
        index,
    })
}

pub fn extract_feature_spec(g: &DirectedScpGraph, var: &str) -> Result<FeatureSpec, FeatureError> {
    let v = g
        .var_node(var)
        .ok_or_else(|| FeatureError::UnknownVar(var.to_string()))?;
    if !g.is_integer[v] {
        return Err(FeatureError::NotInteger(var.to_string()));
    }
    let mut refs: Vec<(usize, usize)> = g
        .reachable(v)
        .into_iter()
        .filter(|&u| u >= g.n_vars && g.nodes[u].0 == Role::Dem)
        .map(|u| (g.nodes[u].1, g.nodes[u].2))
        .collect();
    refs.sort_by_key(|&(i, t)| (t, i));
    let fixed_length = refs.len();
    Ok(FeatureSpec {
        var_name: var.to_string(),
        demand_refs: refs,
        fixed_length,
    })
}

/// Specs for every integer variable, in column order.
pub fn extract_all(
    g: &DirectedScpGraph,
    mip: &MipInstance,
) -> Result<Vec<FeatureSpec>, FeatureError> {
    mip.integer_indices()
        .into_iter()
        .map(|j| extract_feature_spec(g, &mip.vars[j].name))
        .collect()
}

/// 95th percentile (nearest rank) of spec lengths, at least 1.
pub fn padded_length(specs: &[FeatureSpec]) -> usize {
    if specs.is_empty() {
        return 1;
    }
    let mut lens: Vec<usize> = specs.iter().map(|s| s.demand_refs.len()).collect();
    lens.sort_unstable();
    let rank = ((0.95 * lens.len() as f64).ceil() as usize).clamp(1, lens.len());
    lens[rank - 1].max(1)
}

/// Largest demand over `instances`, at least 1.
pub fn demand_normalizer(instances: &[ScpInstance]) -> f64 {
    instances
        .iter()
        .flat_map(|s| s.demand.iter().flatten())
        .fold(1.0, |a, &d| a.max(d))
}

pub fn assemble_vector(
    spec: &FeatureSpec,
    inst: &ScpInstance,
    normalizer: f64,
) -> Result<Vec<f64>, FeatureError> {
    if !(normalizer > 0.0) {
        return Err(FeatureError::Shape(format!(
            "normalizer must be positive, got {normalizer}"
        )));
    }
    if spec.demand_refs.len() > spec.fixed_length {
        return Err(FeatureError::Shape(format!(
            "{} has more refs than its length",
            spec.var_name
        )));
    }
    let mut out = vec![0.0; spec.fixed_length];
    for (k, &(i, t)) in spec.demand_refs.iter().enumerate() {
        let d = inst
            .demand
            .get(i)
            .and_then(|row| row.get(t))
            .ok_or_else(|| {
                FeatureError::Shape(format!("demand ({i},{t}) outside instance {}", inst.name))
            })?;
        out[k] = d / normalizer;
    }
    Ok(out)
}

/// Hex SHA-256 of the serialized specs.
pub fn spec_hash(specs: &[FeatureSpec]) -> String {
    let bytes = serde_json::to_vec(specs).expect("specs serialize");
    Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Hand-sized fixture: one part feeding products a=0, b=1, c=2 over periods
/// 1 and 2, with `y[0,0]` as opening stock. Product a is due in period 1,
/// b and c in period 2; b may also be delivered early in period 1, and c is
/// not delivered in period 1.
pub fn two_period_example() -> (MipInstance, ScpTopology) {
    let names = [
        (Role::Z, 0, 1),
        (Role::Z, 0, 2),
        (Role::X, 0, 1),
        (Role::X, 1, 1),
        (Role::X, 0, 2),
        (Role::X, 1, 2),
        (Role::X, 2, 2),
        (Role::Y, 0, 0),
        (Role::Y, 0, 1),
        (Role::Y, 0, 2),
        (Role::U, 0, 1),
        (Role::U, 1, 2),
        (Role::U, 2, 2),
    ];
    let vars: Vec<Variable> = names
        .iter()
        .map(|&(r, a, t)| {
            let nm = name(r, a, t);
            if matches!(r, Role::X | Role::Z) {
                Variable::integer(nm, 0.0, 100.0, 1.0)
            } else {
                Variable::continuous(nm, 0.0, f64::INFINITY, 1.0)
            }
        })
        .collect();
    let col = |r, a, t| names.iter().position(|&k| k == (r, a, t)).unwrap();
    let cons = vec![
        Constraint::new(
            "bal[0,1]",
            vec![
                (col(Role::Y, 0, 0), 1.0),
                (col(Role::Z, 0, 1), 1.0),
                (col(Role::X, 0, 1), -1.0),
                (col(Role::X, 1, 1), -1.0),
                (col(Role::Y, 0, 1), -1.0),
            ],
            ConSense::Eq,
            0.0,
        ),
        Constraint::new(
            "bal[0,2]",
            vec![
                (col(Role::Y, 0, 1), 1.0),
                (col(Role::Z, 0, 2), 1.0),
                (col(Role::X, 0, 2), -1.0),
                (col(Role::X, 1, 2), -1.0),
                (col(Role::X, 2, 2), -1.0),
                (col(Role::Y, 0, 2), -1.0),
            ],
            ConSense::Eq,
            0.0,
        ),
        Constraint::new(
            "dem[0,1]",
            vec![(col(Role::X, 0, 1), 1.0), (col(Role::U, 0, 1), 1.0)],
            ConSense::Eq,
            4.0,
        ),
        Constraint::new(
            "dem[1,2]",
            vec![
                (col(Role::X, 1, 1), 1.0),
                (col(Role::X, 1, 2), 1.0),
                (col(Role::U, 1, 2), 1.0),
            ],
            ConSense::Eq,
            5.0,
        ),
        Constraint::new(
            "dem[2,2]",
            vec![(col(Role::X, 2, 2), 1.0), (col(Role::U, 2, 2), 1.0)],
            ConSense::Eq,
            6.0,
        ),
    ];
    let topo = ScpTopology {
        products: 3,
        parts: 1,
        periods: 3,
        supplies: vec![vec![0, 1, 2]],
        cap_groups: vec![vec![0]],
        initial_inventory: vec![0.0],
    };
    (
        MipInstance {
            name: "two_period".into(),
            sense: Sense::Min,
            vars,
            cons,
        },
        topo,
    )
}
