use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::branching::VerifyLimits;
use crate::error::{Error, Result};
use crate::geometry::Polytope;
use crate::reachability::{ReachResult, Verdict, VerdictStatus};

/// Which acceleration algorithms an engine run may use.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccelFlags {
    pub bmi: bool,
    pub rsr: bool,
    pub lb: bool,
    pub bmw: bool,
    pub inn: bool,
    pub ic: bool,
}

impl AccelFlags {
    pub fn none() -> Self {
        AccelFlags::default()
    }

    pub fn any(&self) -> bool {
        self.bmi || self.rsr || self.lb || self.bmw || self.inn || self.ic
    }

    /// Parses a comma-separated list like `"bmi,lb,rsr"`. Empty or `"none"`
    /// means no accelerators.
    pub fn parse(list: &str) -> Result<Self> {
        let mut flags = AccelFlags::none();
        let trimmed = list.trim();
        if trimmed.is_empty() || trimmed == "none" {
            return Ok(flags);
        }
        for name in trimmed.split(',') {
            match name.trim() {
                "bmi" => flags.bmi = true,
                "rsr" => flags.rsr = true,
                "lb" => flags.lb = true,
                "bmw" => flags.bmw = true,
                "inn" => flags.inn = true,
                "ic" => flags.ic = true,
                other => {
                    return Err(Error::InvalidInput(format!(
                        "unknown accelerator '{other}' (expected bmi, rsr, lb, bmw, inn, ic)"
                    )))
                }
            }
        }
        Ok(flags)
    }

    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if self.bmi {
            parts.push("bmi");
        }
        if self.lb {
            parts.push("lb");
        }
        if self.rsr {
            parts.push("rsr");
        }
        if self.bmw {
            parts.push("bmw");
        }
        if self.inn {
            parts.push("inn");
        }
        if self.ic {
            parts.push("ic");
        }
        if parts.is_empty() {
            "none".to_string()
        } else {
            parts.join("+")
        }
    }
}

/// Engine configuration. Defaults follow the experimental setup: RSR offset
/// `1e-3`, interval radius `5 x` the running maximum one-step layer
/// difference, and a rebranch trigger at 95% of the origin coverage.
#[derive(Debug, Clone)]
pub struct EngineConfig {
    pub accel: AccelFlags,
    /// Rebuild the branching when coverage falls below this fraction of the
    /// coverage measured at the last rebuild.
    pub rebranch_coverage_ratio: f64,
    /// Uniform additive slack on constraint constants for relaxed reach
    /// certificates.
    pub rsr_offset: f64,
    /// Multiplier on the running maximum one-step layer difference when
    /// building interval networks.
    pub inn_radius_scale: f64,
    pub coverage_samples: usize,
    pub seed: u64,
    pub limits: VerifyLimits,
    /// Random counterexample samples per unknown branch check.
    pub n_ce: usize,
    /// Corner-evaluation budget per unknown branch check.
    pub corner_cap: usize,
    /// Build certificates inline instead of on the background pool.
    pub sync_background: bool,
    /// Worker threads for background certificate construction.
    pub background_workers: usize,
    /// Above this input dimension the Lipschitz tolerance check falls back
    /// from corner enumeration to cheap subset/box reasoning only.
    pub lb_enum_dim_cap: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            accel: AccelFlags::none(),
            rebranch_coverage_ratio: 0.95,
            rsr_offset: 1e-3,
            inn_radius_scale: 5.0,
            coverage_samples: 10_000,
            seed: 0,
            limits: VerifyLimits::default(),
            n_ce: 64,
            corner_cap: 32,
            sync_background: true,
            background_workers: 2,
            lb_enum_dim_cap: 4,
        }
    }
}

impl EngineConfig {
    pub fn with_accel(accel: AccelFlags) -> Self {
        EngineConfig {
            accel,
            ..EngineConfig::default()
        }
    }
}

/// Pre-verified enlarged input region: every future branch region contained
/// in `relaxed_region` inherits the hold verdict of `relaxed_reach`.
#[derive(Debug, Clone)]
pub struct RelaxedCertificate {
    pub relaxed_region: Polytope,
    pub relaxed_reach: ReachResult,
    pub built_at: usize,
    /// Hold verdict of the relaxed reach against the active spec.
    pub verdict: Verdict,
}

/// Lipschitz tolerance certificate: perturbed regions within `delta` of the
/// snapshot `region` (in set distance) provably keep the spec.
#[derive(Debug, Clone)]
pub struct LbCertificate {
    pub region: Polytope,
    pub delta: f64,
    pub built_at: usize,
}

/// How one branch was resolved within a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PathKind {
    Reused,
    ToleratedLb,
    ToleratedRsr,
    ToleratedInn,
    Incremental,
    Recomputed,
    Rebranched,
}

#[derive(Debug, Clone, Serialize)]
pub struct BranchOutcome {
    pub id: u64,
    pub path: PathKind,
    pub status: VerdictStatus,
}

#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct PathCounts {
    pub reused: usize,
    pub lb: usize,
    pub rsr: usize,
    pub inn: usize,
    pub ic: usize,
    pub recomputed: usize,
    pub rebranched: usize,
}

impl PathCounts {
    pub fn add(&mut self, path: PathKind) {
        match path {
            PathKind::Reused => self.reused += 1,
            PathKind::ToleratedLb => self.lb += 1,
            PathKind::ToleratedRsr => self.rsr += 1,
            PathKind::ToleratedInn => self.inn += 1,
            PathKind::Incremental => self.ic += 1,
            PathKind::Recomputed => self.recomputed += 1,
            PathKind::Rebranched => self.rebranched += 1,
        }
    }
}

/// Concrete spec violation found during a step.
#[derive(Debug, Clone, Serialize)]
pub struct WitnessRecord {
    pub time_index: usize,
    pub branch_id: u64,
    pub input: Vec<f64>,
    pub output: Vec<f64>,
    pub violated_row: usize,
}

/// Per-step outcome of the online engine.
#[derive(Debug, Clone)]
pub struct StepReport {
    pub time_index: usize,
    pub per_branch: Vec<BranchOutcome>,
    pub step_status: VerdictStatus,
    /// Verification work only; excludes coverage estimation and reporting.
    pub wall_time: Duration,
    pub coverage: f64,
    pub counts: PathCounts,
    pub witness: Option<WitnessRecord>,
}

impl StepReport {
    pub fn csv_header() -> &'static str {
        "t,status,wall_ms,coverage,n_reused,n_lb,n_rsr,n_inn,n_ic,n_recomputed"
    }

    pub fn csv_row(&self) -> String {
        let status = match self.step_status {
            VerdictStatus::Hold => "hold",
            VerdictStatus::Unknown => "unknown",
            VerdictStatus::Violated => "violated",
        };
        format!(
            "{},{},{:.3},{:.6},{},{},{},{},{},{}",
            self.time_index,
            status,
            self.wall_time.as_secs_f64() * 1e3,
            self.coverage,
            self.counts.reused,
            self.counts.lb,
            self.counts.rsr,
            self.counts.inn,
            self.counts.ic,
            self.counts.recomputed + self.counts.rebranched,
        )
    }
}
