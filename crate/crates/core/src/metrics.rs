//! Primal gap against a shared LP bound, the gap step function over time and
//! its integral.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::solve::TraceEntry;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("time {t} outside [0, {horizon}]")]
    OutOfRange { t: f64, horizon: f64 },
    #[error("trace is not sorted by time or starts before zero")]
    Unsorted,
    #[error("invalid horizon {0}")]
    Horizon(f64),
}

/// `ω ∈ [0,1]`: 0 when both values are zero, 1 on opposite signs or a
/// missing objective, otherwise `|obj - lp| / max(|obj|, |lp|)`.
pub fn primal_gap(obj: f64, lp_star: f64) -> f64 {
    if !obj.is_finite() {
        return 1.0;
    }
    if obj == 0.0 && lp_star == 0.0 {
        return 0.0;
    }
    if lp_star * obj < 0.0 {
        return 1.0;
    }
    (obj - lp_star).abs() / obj.abs().max(lp_star.abs())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapTrace {
    pub lp_star: f64,
    pub entries: Vec<TraceEntry>,
    pub horizon: f64,
}

impl GapTrace {
    pub fn new(lp_star: f64, entries: Vec<TraceEntry>, horizon: f64) -> Result<Self, MetricsError> {
        if !(horizon >= 0.0) || !horizon.is_finite() {
            return Err(MetricsError::Horizon(horizon));
        }
        let mut prev = 0.0;
        for e in &entries {
            if !(e.time >= prev) {
                return Err(MetricsError::Unsorted);
            }
            prev = e.time;
        }
        Ok(GapTrace {
            lp_star,
            entries,
            horizon,
        })
    }

    pub fn first_incumbent_time(&self) -> Option<f64> {
        self.entries
            .first()
            .map(|e| e.time)
            .filter(|&t| t <= self.horizon)
    }

    /// Gap of the last incumbent at or before the horizon (1 if none).
    pub fn final_gap(&self) -> f64 {
        gap_at(self, self.horizon).expect("horizon is in range")
    }
}

pub fn gap_at(trace: &GapTrace, t: f64) -> Result<f64, MetricsError> {
    if !(0.0..=trace.horizon).contains(&t) {
        return Err(MetricsError::OutOfRange {
            t,
            horizon: trace.horizon,
        });
    }
    Ok(trace
        .entries
        .iter()
        .take_while(|e| e.time <= t)
        .last()
        .map_or(1.0, |e| primal_gap(e.objective, trace.lp_star)))
}

/// Exact integral of the gap step function over `[0, horizon]`.
pub fn primal_integral(trace: &GapTrace, horizon: f64) -> Result<f64, MetricsError> {
    if !(horizon >= 0.0) || horizon > trace.horizon {
        return Err(MetricsError::Horizon(horizon));
    }
    let mut area = 0.0;
    let mut cur_t = 0.0;
    let mut cur_gap = 1.0;
    for e in trace.entries.iter().take_while(|e| e.time <= horizon) {
        area += cur_gap * (e.time - cur_t);
        cur_t = e.time;
        cur_gap = primal_gap(e.objective, trace.lp_star);
    }
    Ok(area + cur_gap * (horizon - cur_t))
}
