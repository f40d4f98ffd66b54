//! Exhaustive oracle: enumerate integer assignments, solve the remaining LP.

use super::lp::{LpStatus, Simplex};
use super::{MipResult, MipStatus, SolveError, TraceEntry};
use crate::mip::{validate, MipInstance};

pub fn brute_force(mip: &MipInstance, max_enum: u64) -> Result<MipResult, SolveError> {
    validate(mip).into_result()?;
    let int_vars = mip.integer_indices();
    let mut ranges = Vec::with_capacity(int_vars.len());
    let mut needed = 1.0f64;
    for &j in &int_vars {
        let v = &mip.vars[j];
        if !v.lb.is_finite() || !v.ub.is_finite() {
            return Err(SolveError::UnboundedInteger(j));
        }
        let lo = v.lb.ceil();
        let hi = v.ub.floor();
        needed *= (hi - lo + 1.0).max(0.0);
        ranges.push((lo, hi));
    }
    if needed > max_enum as f64 {
        return Err(SolveError::EnumerationBudget {
            needed,
            budget: max_enum,
        });
    }

    let sign = mip.sense.sign();
    let mut simplex = Simplex::new(mip);
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut count = 0u64;
    let empty = ranges.iter().any(|&(lo, hi)| lo > hi);
    let mut assignment: Vec<f64> = ranges.iter().map(|r| r.0).collect();
    while !empty {
        for (k, &j) in int_vars.iter().enumerate() {
            simplex.set_var_bounds(j, assignment[k], assignment[k]);
        }
        count += 1;
        match simplex.solve_cold()? {
            LpStatus::Optimal => {
                let x = simplex.values().to_vec();
                let obj = mip.objective(&x);
                if best.as_ref().is_none_or(|(b, _)| sign * obj < sign * b) {
                    best = Some((obj, x));
                }
            }
            LpStatus::Infeasible => {}
            LpStatus::Unbounded => return Err(SolveError::Unbounded),
        }
        // odometer
        let mut k = 0;
        loop {
            if k == assignment.len() {
                break;
            }
            if assignment[k] < ranges[k].1 {
                assignment[k] += 1.0;
                break;
            }
            assignment[k] = ranges[k].0;
            k += 1;
        }
        if k == assignment.len() {
            break;
        }
    }

    Ok(match best {
        Some((obj, x)) => MipResult {
            status: MipStatus::Optimal,
            best_solution: Some(x),
            best_objective: obj,
            bound: obj,
            trace: vec![TraceEntry {
                time: count as f64,
                objective: obj,
            }],
            node_count: count,
            elapsed: count as f64,
        },
        None => MipResult {
            status: MipStatus::Infeasible,
            best_solution: None,
            best_objective: mip.sense.worst(),
            bound: mip.sense.worst(),
            trace: Vec::new(),
            node_count: count,
            elapsed: count as f64,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mip::{ConSense, Constraint, Sense, Variable};
    use crate::solve::solve_lp;

    #[test]
    fn infeasible_toy() {
        let m = MipInstance {
            name: "t".into(),
            sense: Sense::Min,
            vars: vec![Variable::integer("x", 0.0, 5.0, 1.0)],
            cons: vec![
                Constraint::new("a", vec![(0, 1.0)], ConSense::Ge, 1.0),
                Constraint::new("b", vec![(0, 1.0)], ConSense::Le, 0.0),
            ],
        };
        assert_eq!(brute_force(&m, 100).unwrap().status, MipStatus::Infeasible);
    }

    #[test]
    fn pure_lp_equals_relaxation() {
        let m = MipInstance {
            name: "lp".into(),
            sense: Sense::Max,
            vars: vec![
                Variable::continuous("x", 0.0, 4.0, 3.0),
                Variable::continuous("y", 0.0, 6.0, 5.0),
            ],
            cons: vec![Constraint::new(
                "c",
                vec![(0, 3.0), (1, 2.0)],
                ConSense::Le,
                18.0,
            )],
        };
        let b = brute_force(&m, 1).unwrap();
        let l = solve_lp(&m).unwrap();
        assert!((b.best_objective - l.objective).abs() < 1e-12);
        assert_eq!(b.node_count, 1);
    }

    #[test]
    fn budget_checked_before_work() {
        let m = MipInstance {
            name: "big".into(),
            sense: Sense::Min,
            vars: (0..4)
                .map(|i| Variable::integer(format!("x{i}"), 0.0, 9.0, 1.0))
                .collect(),
            cons: vec![],
        };
        match brute_force(&m, 9_999) {
            Err(SolveError::EnumerationBudget { needed, .. }) => assert_eq!(needed, 10_000.0),
            other => panic!("unexpected {other:?}"),
        }
        assert!(brute_force(&m, 10_000).is_ok());
    }

    #[test]
    fn infinite_integer_bound_rejected() {
        let m = MipInstance {
            name: "inf".into(),
            sense: Sense::Min,
            vars: vec![Variable::integer("x", 0.0, f64::INFINITY, 1.0)],
            cons: vec![],
        };
        assert!(matches!(
            brute_force(&m, 10),
            Err(SolveError::UnboundedInteger(0))
        ));
    }
}
