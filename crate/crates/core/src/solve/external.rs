//! File-based adapter: write MPS, run a command, read back a solution file.
//!
//! Solution files hold an optional `=obj= <value>` line, an optional
//! `=status= <optimal|feasible|infeasible|time_limit>` line, an `=infeas=`
//! marker for infeasible runs, and `<var_name> <value>` lines. Variables not
//! listed default to zero.

use std::collections::HashMap;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use super::{MipResult, MipStatus, SolveError, SolveLimits, TraceEntry};
use crate::mip::{export_mps, MipInstance};

/// Grace period added on top of the time limit before the child is killed.
const KILL_GRACE: f64 = 5.0;

pub fn external_solve(
    mip: &MipInstance,
    cmd_template: &str,
    lim: &SolveLimits,
) -> Result<MipResult, SolveError> {
    lim.check()?;
    for key in ["{input}", "{output}"] {
        if !cmd_template.contains(key) {
            return Err(SolveError::Process(format!("command template lacks {key}")));
        }
    }
    let mps = export_mps(mip)?;
    let dir = tempfile::tempdir()?;
    let input = dir.path().join("model.mps");
    let output = dir.path().join("model.sol");
    std::fs::write(&input, mps)?;

    let limit = if lim.time_limit.is_finite() {
        format!("{}", lim.time_limit)
    } else {
        "1e30".to_string()
    };
    let argv: Vec<String> = cmd_template
        .split_whitespace()
        .map(|w| {
            w.replace("{input}", &input.to_string_lossy())
                .replace("{output}", &output.to_string_lossy())
                .replace("{time_limit}", &limit)
        })
        .collect();
    let (prog, args) = argv
        .split_first()
        .ok_or_else(|| SolveError::Process("empty command template".into()))?;

    let start = Instant::now();
    let mut child = Command::new(prog)
        .args(args)
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| SolveError::Process(format!("cannot start {prog}: {e}")))?;

    // Under the tick clock the limit is not in seconds; fall back to a fixed cap.
    let kill_after = if lim.deterministic_clock || !lim.time_limit.is_finite() {
        600.0
    } else {
        lim.time_limit + KILL_GRACE
    };
    let status = loop {
        if let Some(st) = child.try_wait()? {
            break st;
        }
        if start.elapsed().as_secs_f64() > kill_after {
            let _ = child.kill();
            let _ = child.wait();
            return Err(SolveError::Timeout(kill_after));
        }
        std::thread::sleep(Duration::from_millis(5));
    };
    if !status.success() {
        let mut msg = String::new();
        if let Some(mut err) = child.stderr.take() {
            use std::io::Read;
            let _ = err.read_to_string(&mut msg);
        }
        return Err(SolveError::Process(format!(
            "{prog} exited with {status}: {}",
            msg.trim()
        )));
    }
    let text = std::fs::read_to_string(&output)
        .map_err(|e| SolveError::SolutionParse(format!("cannot read {}: {e}", output.display())))?;
    let elapsed = if lim.deterministic_clock {
        1.0
    } else {
        start.elapsed().as_secs_f64()
    };
    parse_solution_file(mip, &text, elapsed)
}

/// Parse a solution file for `mip`; `elapsed` stamps the single trace entry.
pub fn parse_solution_file(
    mip: &MipInstance,
    text: &str,
    elapsed: f64,
) -> Result<MipResult, SolveError> {
    let index: HashMap<&str, usize> = mip
        .vars
        .iter()
        .enumerate()
        .map(|(j, v)| (v.name.as_str(), j))
        .collect();
    let mut x = vec![0.0; mip.num_vars()];
    let mut reported_obj = None;
    let mut status = None;
    let mut infeasible = false;
    for (ln, line) in text.lines().enumerate() {
        let mut parts = line.split_whitespace();
        let Some(key) = parts.next() else { continue };
        if key.starts_with('#') {
            continue;
        }
        let value = parts.next();
        let bad = |what: &str| SolveError::SolutionParse(format!("line {}: {what}", ln + 1));
        match key {
            "=infeas=" => infeasible = true,
            "=status=" => {
                status = Some(match value.ok_or_else(|| bad("missing status"))? {
                    "optimal" => MipStatus::Optimal,
                    "feasible" => MipStatus::Feasible,
                    "infeasible" => MipStatus::Infeasible,
                    "time_limit" => MipStatus::TimeLimit,
                    other => return Err(bad(&format!("unknown status {other:?}"))),
                })
            }
            "=obj=" => {
                let v = value.ok_or_else(|| bad("missing objective"))?;
                reported_obj = Some(
                    v.parse::<f64>()
                        .map_err(|_| bad(&format!("bad objective {v:?}")))?,
                );
            }
            name => {
                let j = *index
                    .get(name)
                    .ok_or_else(|| bad(&format!("unknown variable {name:?}")))?;
                let v = value.ok_or_else(|| bad("missing value"))?;
                x[j] = v
                    .parse::<f64>()
                    .map_err(|_| bad(&format!("bad value {v:?}")))?;
            }
        }
        if parts.next().is_some() {
            return Err(bad("trailing tokens"));
        }
    }
    if infeasible || status == Some(MipStatus::Infeasible) {
        return Ok(MipResult {
            status: MipStatus::Infeasible,
            best_solution: None,
            best_objective: mip.sense.worst(),
            bound: mip.sense.worst(),
            trace: Vec::new(),
            node_count: 0,
            elapsed,
        });
    }
    let obj = reported_obj.unwrap_or_else(|| mip.objective(&x));
    let status = status.unwrap_or(MipStatus::Optimal);
    let bound = if status == MipStatus::Optimal {
        obj
    } else {
        -mip.sense.worst()
    };
    Ok(MipResult {
        status,
        best_solution: Some(x),
        best_objective: obj,
        bound,
        trace: vec![TraceEntry {
            time: elapsed,
            objective: obj,
        }],
        node_count: 0,
        elapsed,
    })
}

/// Render a result in the solution-file format read by [`parse_solution_file`].
pub fn write_solution_file(mip: &MipInstance, res: &MipResult) -> String {
    let mut out = String::new();
    let status = match res.status {
        MipStatus::Optimal => "optimal",
        MipStatus::Feasible => "feasible",
        MipStatus::Infeasible => "infeasible",
        MipStatus::TimeLimit => "time_limit",
    };
    out.push_str(&format!("=status= {status}\n"));
    match &res.best_solution {
        None => out.push_str("=infeas=\n"),
        Some(x) => {
            out.push_str(&format!("=obj= {}\n", res.best_objective));
            for (v, val) in mip.vars.iter().zip(x) {
                out.push_str(&format!("{} {}\n", v.name, val));
            }
        }
    }
    out
}
