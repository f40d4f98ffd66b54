//! LP-based branch-and-bound.
//!
//! Branching picks the most fractional integer variable. Node selection is
//! depth-first until the first incumbent and best-bound afterwards; in both
//! regimes the preferred child of a branched node is solved immediately
//! (a plunge), reusing the live simplex basis.

use std::rc::Rc;
use std::time::Instant;

use super::lp::{BasisSnapshot, LpStatus, Simplex};
use super::{relative_gap, MipResult, MipStatus, SolveError, SolveLimits, TraceEntry, INT_TOL};
use crate::mip::{validate, MipInstance};

struct Node {
    /// `(lb, ub)` per integer variable, in `int_vars` order.
    bounds: Vec<(f64, f64)>,
    /// Lower bound in minimization form (parent LP value).
    bound: f64,
    depth: u32,
    id: u64,
    basis: Option<Rc<BasisSnapshot>>,
    /// Position in `int_vars` whose bounds differ from the parent.
    branched: Option<usize>,
}

enum Stop {
    Exhausted,
    Gap,
    Time,
    Nodes,
}

pub fn solve_mip(mip: &MipInstance, lim: &SolveLimits) -> Result<MipResult, SolveError> {
    solve_mip_with_start(mip, lim, None)
}

/// Branch-and-bound with an optional starting solution. A feasible start is
/// installed as the initial incumbent at time zero; an infeasible one is
/// ignored.
pub fn solve_mip_with_start(
    mip: &MipInstance,
    lim: &SolveLimits,
    start: Option<&[f64]>,
) -> Result<MipResult, SolveError> {
    validate(mip).into_result()?;
    lim.check()?;
    let sense = mip.sense;
    let sign = sense.sign();
    let int_vars = mip.integer_indices();
    let clock_start = Instant::now();
    let now = |ticks: u64| {
        if lim.deterministic_clock {
            ticks as f64
        } else {
            clock_start.elapsed().as_secs_f64()
        }
    };

    let mut incumbent: Option<Vec<f64>> = None;
    let mut inc_min = f64::INFINITY;
    let mut trace = Vec::new();
    if let Some(x) = start {
        if mip.is_feasible(x, 1e-6, true) {
            let obj = mip.objective(x);
            incumbent = Some(x.to_vec());
            inc_min = sign * obj;
            trace.push(TraceEntry {
                time: 0.0,
                objective: obj,
            });
        } else {
            log::debug!("ignoring infeasible start solution for {}", mip.name);
        }
    }
    let prune_tol = |inc: f64| (lim.rel_gap * inc.abs()).max(1e-9 * inc.abs().max(1.0));

    let mut simplex = Simplex::new(mip);
    let root = Node {
        bounds: int_vars
            .iter()
            .map(|&j| (mip.vars[j].lb, mip.vars[j].ub))
            .collect(),
        bound: f64::NEG_INFINITY,
        depth: 0,
        id: 0,
        basis: None,
        branched: None,
    };
    let mut open: Vec<Node> = vec![root];
    let mut plunge: Option<Node> = None;
    let mut next_id = 1u64;
    let mut ticks = 0u64;
    let mut pruned_bound = f64::INFINITY;
    let mut stop = Stop::Exhausted;

    loop {
        let (node, plunged) = match plunge.take() {
            Some(n) => (n, true),
            None => match select(&mut open, incumbent.is_some()) {
                Some(n) => (n, false),
                None => break,
            },
        };
        if incumbent.is_some() && node.bound >= inc_min - prune_tol(inc_min) {
            if node.bound < inc_min {
                pruned_bound = pruned_bound.min(node.bound);
            }
            continue;
        }
        if now(ticks) >= lim.time_limit {
            open.push(node);
            stop = Stop::Time;
            break;
        }
        if lim.node_limit.is_some_and(|cap| ticks >= cap) {
            open.push(node);
            stop = Stop::Nodes;
            break;
        }
        ticks += 1;

        let status = if plunged {
            let k = node.branched.expect("plunged nodes come from a branch");
            let (lb, ub) = node.bounds[k];
            simplex.set_var_bounds(int_vars[k], lb, ub);
            simplex.solve_warm()
        } else {
            for (k, &j) in int_vars.iter().enumerate() {
                let (lb, ub) = node.bounds[k];
                if simplex.bounds(j) != (lb, ub) {
                    simplex.set_var_bounds(j, lb, ub);
                }
            }
            match node.basis.as_deref() {
                Some(snap) if simplex.restore(snap) => simplex.solve_warm(),
                _ => simplex.solve_cold(),
            }
        };
        let status = match status {
            Ok(s) => s,
            Err(e) if node.depth == 0 => return Err(e.into()),
            Err(e) => {
                log::warn!("dropping node {} of {}: {e}", node.id, mip.name);
                continue;
            }
        };
        match status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded if node.depth == 0 => return Err(SolveError::Unbounded),
            LpStatus::Unbounded => continue,
        }
        let obj = simplex.min_objective();
        if incumbent.is_some() && obj >= inc_min - prune_tol(inc_min) {
            if obj < inc_min {
                pruned_bound = pruned_bound.min(obj);
            }
            continue;
        }

        let values = simplex.values();
        let mut branch: Option<(usize, f64)> = None;
        let mut best_dist = INT_TOL;
        for (k, &j) in int_vars.iter().enumerate() {
            let v = values[j];
            let dist = (v - v.round()).abs();
            if dist > best_dist {
                best_dist = dist;
                branch = Some((k, v));
            }
        }

        match branch {
            None => {
                let mut x = values.to_vec();
                for &j in &int_vars {
                    let r = x[j].round();
                    if (x[j] - r).abs() <= INT_TOL {
                        x[j] = r;
                    }
                }
                let objective = mip.objective(&x);
                if sign * objective < inc_min - 1e-12 * inc_min.abs().max(1.0)
                    || incumbent.is_none()
                {
                    inc_min = sign * objective;
                    incumbent = Some(x);
                    trace.push(TraceEntry {
                        time: now(ticks),
                        objective,
                    });
                }
            }
            Some((k, v)) => {
                let snap = simplex.snapshot().map(Rc::new);
                let mut down = node.bounds.clone();
                down[k].1 = v.floor();
                let mut up = node.bounds;
                up[k].0 = v.ceil();
                let mk = |bounds, id| Node {
                    bounds,
                    bound: obj,
                    depth: node.depth + 1,
                    id,
                    basis: snap.clone(),
                    branched: Some(k),
                };
                let down = mk(down, next_id);
                let up = mk(up, next_id + 1);
                next_id += 2;
                open.push(up);
                plunge = Some(down);
            }
        }

        if incumbent.is_some() {
            let global = global_bound(&open, plunge.as_ref(), pruned_bound, inc_min);
            if relative_gap(inc_min, global) <= lim.rel_gap {
                stop = Stop::Gap;
                break;
            }
        }
    }

    if let Some(n) = plunge.take() {
        open.push(n);
    }
    let bound_min = match stop {
        Stop::Exhausted if incumbent.is_none() => f64::INFINITY,
        _ => global_bound(&open, None, pruned_bound, inc_min),
    };
    let status = match (stop, incumbent.is_some()) {
        (Stop::Exhausted | Stop::Gap, true) => MipStatus::Optimal,
        (Stop::Exhausted, false) => MipStatus::Infeasible,
        (Stop::Nodes, true) => MipStatus::Feasible,
        _ => MipStatus::TimeLimit,
    };
    let best_objective = if incumbent.is_some() {
        sign * inc_min
    } else {
        sense.worst()
    };
    if let Some(last) = trace.last() {
        debug_assert_eq!(last.objective, best_objective);
    }
    Ok(MipResult {
        status,
        best_solution: incumbent,
        best_objective,
        bound: sign * bound_min,
        trace,
        node_count: ticks,
        elapsed: now(ticks),
    })
}

fn select(open: &mut Vec<Node>, best_bound: bool) -> Option<Node> {
    if !best_bound {
        return open.pop();
    }
    let idx = open
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| {
            a.bound
                .total_cmp(&b.bound)
                .then(b.depth.cmp(&a.depth))
                .then(b.id.cmp(&a.id))
        })
        .map(|(i, _)| i)?;
    Some(open.swap_remove(idx))
}

fn global_bound(open: &[Node], plunge: Option<&Node>, pruned: f64, inc_min: f64) -> f64 {
    open.iter()
        .chain(plunge)
        .map(|n| n.bound)
        .fold(pruned.min(inc_min), f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mip::{ConSense, Constraint, Sense, Variable};

    fn knapsack(n: usize) -> MipInstance {
        let weights: Vec<f64> = (0..n).map(|i| 3.0 + ((i * 7) % 11) as f64).collect();
        let values: Vec<f64> = (0..n).map(|i| 5.0 + ((i * 13) % 17) as f64).collect();
        let cap = weights.iter().sum::<f64>() * 0.37;
        MipInstance {
            name: "knap".into(),
            sense: Sense::Max,
            vars: (0..n)
                .map(|i| Variable::integer(format!("b{i}"), 0.0, 1.0, values[i]))
                .collect(),
            cons: vec![
                Constraint::new(
                    "cap",
                    weights.iter().cloned().enumerate().collect(),
                    ConSense::Le,
                    cap,
                ),
                Constraint::new(
                    "half",
                    (0..n)
                        .step_by(2)
                        .map(|i| (i, weights[i] * 0.5 + 1.0))
                        .collect(),
                    ConSense::Le,
                    cap * 0.4,
                ),
            ],
        }
    }

    #[test]
    fn fixed_integers_solved_at_root() {
        let m = MipInstance {
            name: "fixed".into(),
            sense: Sense::Min,
            vars: vec![
                Variable::integer("a", 2.0, 2.0, 1.0),
                Variable::integer("b", 3.0, 3.0, 2.0),
            ],
            cons: vec![Constraint::new(
                "c",
                vec![(0, 1.0), (1, 1.0)],
                ConSense::Le,
                10.0,
            )],
        };
        let r = solve_mip(&m, &SolveLimits::exact()).unwrap();
        assert_eq!(r.status, MipStatus::Optimal);
        assert_eq!(r.trace.len(), 1);
        assert_eq!(r.node_count, 1);
        assert_eq!(r.best_objective, 8.0);
    }

    #[test]
    fn tiny_time_limit_reports_time_limit() {
        let m = knapsack(50);
        let lim = SolveLimits {
            time_limit: 0.001,
            rel_gap: 0.0,
            node_limit: None,
            deterministic_clock: true,
        };
        let r = solve_mip(&m, &lim).unwrap();
        assert_eq!(r.status, MipStatus::TimeLimit);
        // max sense: bound is an upper bound
        assert!(r.bound >= r.best_objective);
    }

    #[test]
    fn infeasible_integer_program() {
        let m = MipInstance {
            name: "inf".into(),
            sense: Sense::Min,
            vars: vec![Variable::integer("x", 0.0, 10.0, 1.0)],
            cons: vec![Constraint::new("c", vec![(0, 2.0)], ConSense::Eq, 3.0)],
        };
        let r = solve_mip(&m, &SolveLimits::exact()).unwrap();
        assert_eq!(r.status, MipStatus::Infeasible);
        assert!(r.best_solution.is_none());
        assert!(r.trace.is_empty());
    }

    #[test]
    fn knapsack_matches_enumeration_and_trace_improves() {
        let m = knapsack(12);
        let r = solve_mip(&m, &SolveLimits::exact()).unwrap();
        let oracle = super::super::brute_force(&m, 1 << 13).unwrap();
        assert_eq!(r.status, MipStatus::Optimal);
        assert!((r.best_objective - oracle.best_objective).abs() < 1e-6);
        for w in r.trace.windows(2) {
            assert!(w[1].objective > w[0].objective);
            assert!(w[1].time >= w[0].time);
        }
        assert_eq!(r.trace.last().unwrap().objective, r.best_objective);
    }

    #[test]
    fn feasible_start_recorded_at_time_zero() {
        let m = knapsack(10);
        let zero = vec![0.0; 10];
        let r = solve_mip_with_start(&m, &SolveLimits::exact(), Some(&zero)).unwrap();
        assert_eq!(
            r.trace[0],
            TraceEntry {
                time: 0.0,
                objective: 0.0
            }
        );
        assert!(r.best_objective > 0.0);
    }

    #[test]
    fn deterministic_clock_is_repeatable() {
        let m = knapsack(30);
        let lim = SolveLimits {
            time_limit: 40.0,
            rel_gap: 0.0,
            node_limit: None,
            deterministic_clock: true,
        };
        let a = solve_mip(&m, &lim).unwrap();
        let b = solve_mip(&m, &lim).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_limits() {
        let m = knapsack(3);
        let lim = SolveLimits {
            rel_gap: 1.0,
            ..SolveLimits::exact()
        };
        assert!(matches!(solve_mip(&m, &lim), Err(SolveError::Limits(_))));
    }
}
