//! Benchmark runner: steps one or more engine configurations through a
//! scenario horizon under identical seeds and aggregates per-method rows.

use std::fmt::Write as _;

use onv_core::engine::{EngineConfig, OnlineEngine, StepReport, WitnessRecord};
use onv_core::error::Result;
use onv_core::reachability::VerdictStatus;

use crate::scenario::Scenario;

#[derive(Debug, Clone)]
pub struct MethodRow {
    pub label: String,
    pub mean_time_ms: f64,
    pub mean_coverage: f64,
    pub steps_hold: usize,
    pub steps_unknown: usize,
    pub steps_violated: usize,
}

#[derive(Debug, Clone)]
pub struct MethodRun {
    pub label: String,
    /// Step 0 is the cold start and is excluded from the means.
    pub steps: Vec<StepReport>,
    pub witness: Option<WitnessRecord>,
}

impl MethodRun {
    pub fn row(&self) -> MethodRow {
        let timed: Vec<&StepReport> = self.steps.iter().skip(1).collect();
        let n = timed.len().max(1) as f64;
        let mean_time_ms =
            timed.iter().map(|s| s.wall_time.as_secs_f64() * 1e3).sum::<f64>() / n;
        let mean_coverage = timed.iter().map(|s| s.coverage).sum::<f64>() / n;
        let count = |status: VerdictStatus| timed.iter().filter(|s| s.step_status == status).count();
        MethodRow {
            label: self.label.clone(),
            mean_time_ms,
            mean_coverage,
            steps_hold: count(VerdictStatus::Hold),
            steps_unknown: count(VerdictStatus::Unknown),
            steps_violated: count(VerdictStatus::Violated),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub scenario_json: String,
    pub runs: Vec<MethodRun>,
}

impl ExperimentReport {
    pub fn rows(&self) -> Vec<MethodRow> {
        self.runs.iter().map(MethodRun::row).collect()
    }

    pub fn summary_csv(&self) -> String {
        let mut out =
            String::from("method,mean_time_ms,mean_coverage,steps_hold,steps_unknown,steps_violated\n");
        for row in self.rows() {
            let _ = writeln!(
                out,
                "{},{:.3},{:.6},{},{},{}",
                row.label,
                row.mean_time_ms,
                row.mean_coverage,
                row.steps_hold,
                row.steps_unknown,
                row.steps_violated
            );
        }
        out
    }

    pub fn per_step_csv(&self) -> String {
        let mut out = format!("method,{}\n", StepReport::csv_header());
        for run in &self.runs {
            for step in &run.steps {
                let _ = writeln!(out, "{},{}", run.label, step.csv_row());
            }
        }
        out
    }

    pub fn find(&self, label: &str) -> Option<MethodRow> {
        self.rows().into_iter().find(|r| r.label == label)
    }
}

/// Runs one configuration through the horizon: a cold start at t = 0, then
/// `horizon` timed steps. Stops early on a violated step.
pub fn run_config(scenario: &Scenario, cfg: &EngineConfig) -> Result<MethodRun> {
    let label = cfg.accel.label();
    let mut engine = OnlineEngine::new(cfg.clone());
    let mut steps = Vec::with_capacity(scenario.horizon() + 1);
    let mut witness = None;
    for t in 0..=scenario.horizon() {
        let (input, net, spec) = scenario.instance(t)?;
        let report = engine.step(t, &input, &net, &spec)?;
        let status = report.step_status;
        if status == VerdictStatus::Violated {
            witness = report.witness.clone();
        }
        steps.push(report);
        if status == VerdictStatus::Violated {
            break;
        }
    }
    Ok(MethodRun {
        label,
        steps,
        witness,
    })
}

/// Runs every configuration sequentially (fair timing) with identical
/// scenario instances and seeds.
pub fn run_experiment(scenario: &Scenario, configs: &[EngineConfig]) -> Result<ExperimentReport> {
    let mut runs = Vec::with_capacity(configs.len());
    for cfg in configs {
        runs.push(run_config(scenario, cfg)?);
    }
    Ok(ExperimentReport {
        scenario_json: scenario.spec().to_json(),
        runs,
    })
}
