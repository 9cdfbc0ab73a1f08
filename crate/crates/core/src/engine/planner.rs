//! Worker-count planning for real-time background certificate construction,
//! plus a discrete-event simulation of the resulting build pipeline.
//!
//! A certificate snapshotted at time `s` takes `build_time` to construct and
//! tolerates accumulated change until `s + headroom`, so it is usable on
//! `[s + build_time, s + headroom]`. `workers` build back-to-back with
//! staggered starts, producing one snapshot every `build_time / workers`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inputs to the worker-count rule. Times are in seconds; `headroom` holds
/// per-dimension tolerance-to-change-rate ratios, also in seconds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlannerInput {
    pub build_time: f64,
    pub change_gap: f64,
    pub headroom: Vec<f64>,
}

/// `k = ceil((min headroom - build_time) / change_gap)`, at least 1.
///
/// Construction is infeasible when the tightest headroom does not exceed the
/// build time: a certificate would expire before it is ever usable.
pub fn worker_count(p: &PlannerInput) -> Result<usize> {
    if p.build_time <= 0.0 || p.change_gap <= 0.0 {
        return Err(Error::InvalidInput(
            "build time and change gap must be positive".into(),
        ));
    }
    if p.headroom.is_empty() || p.headroom.iter().any(|&h| h <= 0.0) {
        return Err(Error::InvalidInput(
            "headroom entries must be positive".into(),
        ));
    }
    let min_h = p.headroom.iter().cloned().fold(f64::INFINITY, f64::min);
    if min_h <= p.build_time {
        return Err(Error::InfeasibleDeadline {
            headroom: min_h,
            build_time: p.build_time,
        });
    }
    let k = ((min_h - p.build_time) / p.change_gap - 1e-9).ceil() as usize;
    Ok(k.max(1))
}

/// One simulated build pipeline.
#[derive(Debug, Clone)]
pub struct PipelineSim {
    pub build_time: f64,
    pub change_gap: f64,
    /// Usable lifetime of a certificate measured from its snapshot.
    pub headroom: f64,
    pub workers: usize,
}

#[derive(Debug, Clone)]
pub struct SimOutcome {
    /// End of the warm-up window (the first build completing).
    pub warmup_end: f64,
    /// First change instant after warm-up not covered by any certificate.
    pub first_gap: Option<f64>,
    pub checked_until: f64,
}

impl SimOutcome {
    pub fn gap_free(&self) -> bool {
        self.first_gap.is_none()
    }
}

/// Simulates the staggered back-to-back schedule and checks certificate
/// availability at every change instant within `horizon`.
pub fn simulate_cert_pipeline(sim: &PipelineSim, horizon: f64) -> SimOutcome {
    assert!(sim.workers >= 1 && sim.build_time > 0.0 && sim.change_gap > 0.0);
    let stride = sim.build_time / sim.workers as f64;
    let warmup_end = sim.build_time;
    let eps = 1e-9;
    let mut first_gap = None;
    let mut n = (warmup_end / sim.change_gap).ceil() as u64;
    loop {
        let t = n as f64 * sim.change_gap;
        if t > horizon {
            break;
        }
        if t >= warmup_end - eps {
            // Latest snapshot whose build finished by t.
            let m = ((t - sim.build_time + eps) / stride).floor();
            let covered = m >= -eps && {
                let snapshot = m.max(0.0) * stride;
                t <= snapshot + sim.headroom + eps
            };
            if !covered {
                first_gap = Some(t);
                break;
            }
        }
        n += 1;
    }
    SimOutcome {
        warmup_end,
        first_gap,
        checked_until: horizon,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worker_count_examples() {
        let k = worker_count(&PlannerInput {
            build_time: 1.0,
            change_gap: 0.1,
            headroom: vec![2.0, 3.0],
        })
        .unwrap();
        assert_eq!(k, 10);

        let k = worker_count(&PlannerInput {
            build_time: 1.0,
            change_gap: 0.1,
            headroom: vec![1.1],
        })
        .unwrap();
        assert_eq!(k, 1);

        let err = worker_count(&PlannerInput {
            build_time: 1.0,
            change_gap: 0.1,
            headroom: vec![0.9],
        });
        assert!(matches!(err, Err(Error::InfeasibleDeadline { .. })));
    }

    #[test]
    fn pipeline_gap_free_with_ample_workers() {
        let sim = PipelineSim {
            build_time: 1.0,
            change_gap: 0.1,
            headroom: 2.0,
            workers: 10,
        };
        let out = simulate_cert_pipeline(&sim, 50.0);
        assert!(out.gap_free(), "gap at {:?}", out.first_gap);
    }

    #[test]
    fn pipeline_detects_gap_with_single_slow_worker() {
        // One worker, certs usable for 0.2s after a 1s build: huge gaps.
        let sim = PipelineSim {
            build_time: 1.0,
            change_gap: 0.1,
            headroom: 1.2,
            workers: 1,
        };
        let out = simulate_cert_pipeline(&sim, 50.0);
        assert!(!out.gap_free());
    }
}
