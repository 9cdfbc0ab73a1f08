//! The per-time-step verification loop and its accelerators.
//!
//! Each step runs branch management (reuse the previous partition where
//! possible), then resolves every branch through the cheapest applicable
//! path: reuse, Lipschitz tolerance, relaxed-set tolerance, interval-network
//! tolerance, incremental last-layer recomputation, and finally a full
//! recompute. Certificates for future steps are built inline (synchronous
//! mode) or on a background pool and swapped in between steps.

mod accel;
mod background;
mod config;
mod planner;

pub use accel::{
    bmi_retag, bmi_update, bmw_retag, bmw_update, inn_tolerable, lb_tolerable, rsr_build,
    rsr_tolerable,
};
pub use background::{BackgroundPool, Done, Job};
pub use config::{
    AccelFlags, BranchOutcome, EngineConfig, LbCertificate, PathCounts, PathKind,
    RelaxedCertificate, StepReport, WitnessRecord,
};
pub use planner::{simulate_cert_pipeline, worker_count, PipelineSim, PlannerInput, SimOutcome};

use std::sync::Arc;
use std::time::Instant;

use crate::branching::{
    coverage_rate, reach_and_branch_with, Branch, BranchStore, ReachBasis, Tag,
};
use crate::error::Result;
use crate::geometry::{IntervalBox, Polytope};
use crate::network::{
    build_inn, layerwise_diff, lipschitz_upper, IntervalNetwork, LayerDiff, LipschitzBound,
    Network,
};
use crate::par::par_map;
use crate::reachability::{
    check, lb_threshold, reach_incremental, reach_incremental_inn, reach_inn, reach_interval,
    CheckOpts, OutputSpec, VerdictStatus,
};

/// splitmix64-style seed mixing so parallel branch checks stay deterministic.
pub(crate) fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn check_opts_for(cfg: &EngineConfig, t: usize, branch_id: u64) -> CheckOpts {
    CheckOpts {
        n_ce: cfg.n_ce,
        corner_cap: cfg.corner_cap,
        seed: mix_seed(mix_seed(cfg.seed, t as u64), branch_id),
        tol: 1e-9,
    }
}

/// Full reach-plus-branch rebuild with per-branch certificate construction.
///
/// With `inn` set, branch verdicts come from interval-network reachability
/// (tolerant to future weight drift inside the intervals); otherwise from
/// exact interval propagation of `net`.
pub(crate) fn rebuild_store(
    t: usize,
    input: &Polytope,
    net_arc: &Arc<Network>,
    spec: &OutputSpec,
    cfg: &EngineConfig,
    inn: Option<(&IntervalNetwork, usize)>,
) -> Result<(VerdictStatus, BranchStore)> {
    let base_opts = check_opts_for(cfg, t, u64::MAX);
    let net = net_arc.as_ref();
    let (status, mut store) = match inn {
        Some((inn_net, _)) => {
            let reach = |b: &IntervalBox| reach_inn(inn_net, b);
            reach_and_branch_with(input, &reach, net, spec, &cfg.limits, &base_opts)?
        }
        None => {
            let reach = |b: &IntervalBox| reach_interval(net, b);
            reach_and_branch_with(input, &reach, net, spec, &cfg.limits, &base_opts)?
        }
    };
    store.origin_time = t;
    store.origin_coverage = None;

    let lip = cfg.accel.lb.then(|| lipschitz_upper(net));
    let basis = match inn {
        Some((_, built_at)) => ReachBasis::Inn { built_at },
        None => ReachBasis::Exact,
    };
    let branches = std::mem::take(&mut store.branches);
    let rebuilt: Vec<Result<Branch>> = par_map(branches, |mut b| {
        b.basis = basis;
        b.reach_net = match basis {
            ReachBasis::Exact => Some(net_arc.clone()),
            ReachBasis::Inn { .. } => None,
        };
        if b.verdict.status == VerdictStatus::Hold {
            if let (Some(l), Some(reach)) = (lip, b.cached_reach.as_ref()) {
                b.lb_cert = lb_threshold(reach, spec, l).ok().map(|delta| LbCertificate {
                    region: b.region.clone(),
                    delta,
                    built_at: t,
                });
            }
            if cfg.accel.rsr && cfg.sync_background {
                b.rsr_cert = rsr_build(&b, net, spec, cfg.rsr_offset, t)?;
            }
        }
        Ok(b)
    });
    store.branches = rebuilt.into_iter().collect::<Result<Vec<_>>>()?;
    Ok((status, store))
}

struct InnState {
    inn: Arc<IntervalNetwork>,
    built_at: usize,
}

struct BranchCtx<'a> {
    cfg: &'a EngineConfig,
    t: usize,
    net: &'a Network,
    net_arc: &'a Arc<Network>,
    spec: &'a OutputSpec,
    input_changed: bool,
    net_changed: bool,
    lip: Option<LipschitzBound>,
    /// Current interval network (when INN is active): network, build time.
    inn: Option<(&'a IntervalNetwork, usize)>,
    /// Build time of the interval network the previous caches refer to, when
    /// its earlier layers are identical to the current one (enables
    /// incremental interval recomputation).
    inn_prev_compatible: Option<usize>,
}

impl BranchCtx<'_> {
    fn opts(&self, branch_id: u64) -> CheckOpts {
        check_opts_for(self.cfg, self.t, branch_id)
    }
}

fn refresh_certificates(b: &mut Branch, ctx: &BranchCtx<'_>) -> Result<()> {
    b.lb_cert = None;
    b.rsr_cert = None;
    if b.verdict.status != VerdictStatus::Hold {
        return Ok(());
    }
    if ctx.cfg.accel.lb {
        if let (Some(l), Some(reach)) = (ctx.lip, b.cached_reach.as_ref()) {
            b.lb_cert = lb_threshold(reach, ctx.spec, l)
                .ok()
                .map(|delta| LbCertificate {
                    region: b.region.clone(),
                    delta,
                    built_at: ctx.t,
                });
        }
    }
    if ctx.cfg.accel.rsr && ctx.cfg.sync_background {
        b.rsr_cert = rsr_build(b, ctx.net, ctx.spec, ctx.cfg.rsr_offset, ctx.t)?;
    }
    Ok(())
}

/// Resolves one tagged branch through the path chain
/// reuse -> LB -> RSR -> INN -> incremental -> full recompute.
fn process_branch(mut b: Branch, ctx: &BranchCtx<'_>) -> Result<(Branch, PathKind)> {
    if b.tag == Tag::Reuse {
        return Ok((b, PathKind::Reused));
    }
    let holds = b.verdict.status == VerdictStatus::Hold;

    if ctx.cfg.accel.lb && !ctx.net_changed && holds && b.lb_cert.is_some() {
        if lb_tolerable(&b, &b.region, ctx.cfg.lb_enum_dim_cap)? {
            return Ok((b, PathKind::ToleratedLb));
        }
    }
    if ctx.cfg.accel.rsr && !ctx.net_changed && holds {
        if let Some(cert) = &b.rsr_cert {
            if rsr_tolerable(&b.region, cert)? {
                return Ok((b, PathKind::ToleratedRsr));
            }
        }
    }
    if let (Some((_, built_at)), false) = (ctx.inn, ctx.input_changed) {
        if b.basis == (ReachBasis::Inn { built_at }) && b.cached_reach.is_some() {
            // Weights still inside the intervals: the cached interval reach
            // and its verdict stand as-is.
            return Ok((b, PathKind::ToleratedInn));
        }
    }
    if ctx.cfg.accel.ic && !ctx.input_changed {
        // Incremental interval-network recomputation on INN reconstruction
        // steps whose earlier layers are unchanged.
        if let (Some((inn, built_at)), Some(prev_built)) = (ctx.inn, ctx.inn_prev_compatible) {
            let cache_ok = b.basis == (ReachBasis::Inn { built_at: prev_built })
                && b
                    .cached_reach
                    .as_ref()
                    .is_some_and(|r| Some(r.input()) == b.bbox.as_ref());
            if cache_ok {
                let last = inn.layers().last().expect("non-empty");
                let fresh = reach_incremental_inn(b.cached_reach.as_ref().expect("cache"), last)?;
                b.verdict = check(&fresh, ctx.spec, ctx.net, &b.region, &ctx.opts(b.id))?;
                b.cached_reach = Some(fresh);
                b.basis = ReachBasis::Inn { built_at };
                b.reach_net = None;
                refresh_certificates(&mut b, ctx)?;
                return Ok((b, PathKind::Incremental));
            }
        }
        // Exact incremental path: only the last layer differs from the
        // network that produced the cached reach.
        if ctx.inn.is_none() && accel::ic_applicable(&b, ctx.net) {
            let last = ctx.net.layers().last().expect("non-empty");
            let fresh = reach_incremental(b.cached_reach.as_ref().expect("cache"), last)?;
            b.verdict = check(&fresh, ctx.spec, ctx.net, &b.region, &ctx.opts(b.id))?;
            b.cached_reach = Some(fresh);
            b.reach_net = Some(ctx.net_arc.clone());
            refresh_certificates(&mut b, ctx)?;
            return Ok((b, PathKind::Incremental));
        }
    }

    // Full recompute.
    b.ensure_bbox()?;
    let bbox = b.bbox.as_ref().expect("ensured").clone();
    match ctx.inn {
        Some((inn, built_at)) => {
            let reach = reach_inn(inn, &bbox)?;
            b.verdict = check(&reach, ctx.spec, ctx.net, &b.region, &ctx.opts(b.id))?;
            b.cached_reach = Some(reach);
            b.basis = ReachBasis::Inn { built_at };
            b.reach_net = None;
        }
        None => {
            let reach = reach_interval(ctx.net, &bbox)?;
            b.verdict = check(&reach, ctx.spec, ctx.net, &b.region, &ctx.opts(b.id))?;
            b.cached_reach = Some(reach);
            b.basis = ReachBasis::Exact;
            b.reach_net = Some(ctx.net_arc.clone());
        }
    }
    refresh_certificates(&mut b, ctx)?;
    Ok((b, PathKind::Recomputed))
}

/// Stateful online verification engine: owns the branch store, tolerance
/// certificates, the interval network abstraction, and the background pool.
pub struct OnlineEngine {
    cfg: EngineConfig,
    store: BranchStore,
    prev_input: Option<Polytope>,
    prev_net: Option<Arc<Network>>,
    lipschitz: Option<LipschitzBound>,
    inn: Option<InnState>,
    delta_hat: Option<LayerDiff>,
    last_coverage: Option<f64>,
    epoch: u64,
    inn_job_pending: bool,
    pool: Option<BackgroundPool>,
}

impl OnlineEngine {
    pub fn new(cfg: EngineConfig) -> Self {
        let pool = (!cfg.sync_background && (cfg.accel.rsr || cfg.accel.inn))
            .then(|| BackgroundPool::new(cfg.background_workers));
        OnlineEngine {
            cfg,
            store: BranchStore::empty(),
            prev_input: None,
            prev_net: None,
            lipschitz: None,
            inn: None,
            delta_hat: None,
            last_coverage: None,
            epoch: 0,
            inn_job_pending: false,
            pool,
        }
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    pub fn store(&self) -> &BranchStore {
        &self.store
    }

    pub fn last_coverage(&self) -> Option<f64> {
        self.last_coverage
    }

    /// Running element-wise maximum of observed one-step layer differences.
    pub fn observed_max_step_diff(&self) -> Option<&LayerDiff> {
        self.delta_hat.as_ref()
    }

    fn should_rebranch(&self) -> bool {
        match (self.last_coverage, self.store.origin_coverage) {
            (Some(c), Some(origin)) => c < self.cfg.rebranch_coverage_ratio * origin,
            _ => false,
        }
    }

    fn rebuild(&mut self, t: usize, input: &Polytope, net_arc: &Arc<Network>, spec: &OutputSpec) -> Result<()> {
        self.epoch += 1;
        self.inn_job_pending = false;
        let inn_ref = self
            .cfg
            .accel
            .inn
            .then(|| self.inn.as_ref().map(|s| (s.inn.clone(), s.built_at)))
            .flatten();
        let (_, store) = rebuild_store(
            t,
            input,
            net_arc,
            spec,
            &self.cfg,
            inn_ref.as_ref().map(|(i, b)| (i.as_ref(), *b)),
        )?;
        self.store = store;
        Ok(())
    }

    /// Installs finished background certificates whose epoch still matches;
    /// stale results are discarded silently.
    fn drain_background(&mut self) {
        let Some(pool) = &self.pool else { return };
        for done in pool.try_drain() {
            match done {
                Done::Rsr {
                    epoch,
                    branch_id,
                    cert,
                } => {
                    if epoch != self.epoch {
                        continue;
                    }
                    if let Some(b) = self.store.branches.iter_mut().find(|b| b.id == branch_id) {
                        let newer = b.rsr_cert.as_ref().is_none_or(|c| c.built_at < cert.built_at);
                        if b.verdict.status == VerdictStatus::Hold && newer {
                            b.rsr_cert = Some(cert);
                        }
                    }
                }
                Done::Inn {
                    epoch,
                    built_at,
                    inn,
                    reaches,
                } => {
                    if epoch != self.epoch {
                        continue;
                    }
                    self.inn_job_pending = false;
                    for (id, reach, verdict) in reaches {
                        if let Some(b) = self.store.branches.iter_mut().find(|b| b.id == id) {
                            if b.bbox.as_ref() == Some(reach.input()) {
                                b.cached_reach = Some(reach);
                                b.verdict = verdict;
                                b.basis = ReachBasis::Inn { built_at };
                                b.reach_net = None;
                                b.lb_cert = None;
                                b.rsr_cert = None;
                            }
                        }
                    }
                    self.inn = Some(InnState { inn, built_at });
                }
            }
        }
    }

    /// Maintains the interval network: checks containment of the current
    /// weights and reconstructs (inline or in the background) when exceeded.
    /// Returns whether the previous intervals were compatible for
    /// incremental recomputation, as the build time they referred to.
    fn maintain_inn(
        &mut self,
        t: usize,
        net: &Network,
        net_arc: &Arc<Network>,
        spec_arc: &Arc<OutputSpec>,
    ) -> Result<Option<usize>> {
        if !self.cfg.accel.inn {
            return Ok(None);
        }
        let contained = match &self.inn {
            Some(s) => inn_tolerable(&s.inn, net)?,
            None => false,
        };
        if contained {
            return Ok(None);
        }
        let radius = self
            .delta_hat
            .as_ref()
            .map(|d| d.scaled(self.cfg.inn_radius_scale))
            .unwrap_or_else(|| LayerDiff::zeros(net.n_layers()));
        if self.cfg.sync_background || self.store.is_empty() || self.pool.is_none() {
            let fresh = Arc::new(build_inn(net, &radius)?);
            let prev_compatible = self.inn.as_ref().and_then(|old| {
                earlier_interval_layers_equal(&old.inn, &fresh).then_some(old.built_at)
            });
            self.inn = Some(InnState {
                inn: fresh,
                built_at: t,
            });
            Ok(prev_compatible)
        } else {
            if !self.inn_job_pending {
                let inputs: Vec<(u64, IntervalBox)> = self
                    .store
                    .branches
                    .iter()
                    .filter_map(|b| b.bbox.clone().map(|bb| (b.id, bb)))
                    .collect();
                self.pool.as_ref().expect("pool").schedule(Job::Inn {
                    epoch: self.epoch,
                    net: net_arc.clone(),
                    radius,
                    spec: spec_arc.clone(),
                    inputs,
                    built_at: t,
                });
                self.inn_job_pending = true;
            }
            // Until the fresh intervals arrive the engine falls back to
            // exact recomputation.
            self.inn = None;
            Ok(None)
        }
    }

    /// One online verification step.
    ///
    /// The reported wall time covers branch management and branch
    /// resolution; coverage estimation runs after the timer as a metric.
    pub fn step(
        &mut self,
        t: usize,
        input: &Polytope,
        net: &Network,
        spec: &OutputSpec,
    ) -> Result<StepReport> {
        self.drain_background();
        let net_arc = Arc::new(net.clone());
        let spec_arc = Arc::new(spec.clone());

        let timer = Instant::now();
        let input_changed = self.prev_input.as_ref() != Some(input);
        let net_changed = self.prev_net.as_ref().is_none_or(|p| p.as_ref() != net);

        if let Some(prev) = &self.prev_net {
            if net_changed && prev.same_architecture(net) {
                let d = layerwise_diff(prev, net)?;
                self.delta_hat = Some(match &self.delta_hat {
                    Some(h) => h.max_elementwise(&d),
                    None => d,
                });
            }
        }
        if self.cfg.accel.lb && (self.lipschitz.is_none() || net_changed) {
            self.lipschitz = Some(lipschitz_upper(net));
        }
        let inn_prev_compatible = self.maintain_inn(t, net, &net_arc, &spec_arc)?;

        // Branch management.
        let mut rebuilt = false;
        if self.store.is_empty() {
            self.rebuild(t, input, &net_arc, spec)?;
            rebuilt = true;
        } else if !input_changed && !net_changed {
            if self.cfg.accel.any() {
                for b in self.store.branches.iter_mut() {
                    b.tag = Tag::Reuse;
                }
            } else {
                self.rebuild(t, input, &net_arc, spec)?;
                rebuilt = true;
            }
        } else if input_changed && net_changed {
            self.rebuild(t, input, &net_arc, spec)?;
            rebuilt = true;
        } else if input_changed {
            if self.cfg.accel.bmi && !self.should_rebranch() {
                bmi_retag(input, &mut self.store)?;
            } else {
                self.rebuild(t, input, &net_arc, spec)?;
                rebuilt = true;
            }
        } else if self.cfg.accel.bmw && !self.should_rebranch() {
            bmw_retag(&mut self.store);
        } else {
            self.rebuild(t, input, &net_arc, spec)?;
            rebuilt = true;
        }

        // Branch resolution.
        let mut counts = PathCounts::default();
        let mut per_branch = Vec::with_capacity(self.store.len());
        let mut witness = None;
        if rebuilt {
            for b in &self.store.branches {
                counts.add(PathKind::Rebranched);
                per_branch.push(BranchOutcome {
                    id: b.id,
                    path: PathKind::Rebranched,
                    status: b.verdict.status,
                });
            }
        } else {
            let ctx = BranchCtx {
                cfg: &self.cfg,
                t,
                net,
                net_arc: &net_arc,
                spec,
                input_changed,
                net_changed,
                lip: self.lipschitz,
                inn: self
                    .cfg
                    .accel
                    .inn
                    .then(|| self.inn.as_ref().map(|s| (s.inn.as_ref(), s.built_at)))
                    .flatten(),
                inn_prev_compatible,
            };
            let branches = std::mem::take(&mut self.store.branches);
            let results: Vec<Result<(Branch, PathKind)>> =
                par_map(branches, |b| process_branch(b, &ctx));
            let mut processed = Vec::with_capacity(results.len());
            let mut violated_seen = false;
            let mut fresh_hold_ids: Vec<u64> = Vec::new();
            for r in results {
                let (b, path) = r?;
                if !violated_seen {
                    counts.add(path);
                    per_branch.push(BranchOutcome {
                        id: b.id,
                        path,
                        status: b.verdict.status,
                    });
                    if b.verdict.status == VerdictStatus::Violated {
                        violated_seen = true;
                        witness = make_witness(t, &b, net, spec)?;
                    }
                }
                let fresh = matches!(path, PathKind::Recomputed | PathKind::Incremental);
                if fresh && b.verdict.status == VerdictStatus::Hold {
                    fresh_hold_ids.push(b.id);
                }
                processed.push(b);
            }
            self.store.branches = processed;

            // Background relaxed-set certificates for freshly verified
            // branches.
            if self.cfg.accel.rsr && !self.cfg.sync_background {
                if let Some(pool) = &self.pool {
                    for id in fresh_hold_ids {
                        if let Some(b) = self.store.branches.iter().find(|b| b.id == id) {
                            pool.schedule(Job::Rsr {
                                epoch: self.epoch,
                                branch: b.clone(),
                                net: net_arc.clone(),
                                spec: spec_arc.clone(),
                                offset: self.cfg.rsr_offset,
                                built_at: t,
                            });
                        }
                    }
                }
            }
        }
        let step_status = self.store.status();
        if rebuilt && step_status == VerdictStatus::Violated {
            if let Some(b) = self
                .store
                .branches
                .iter()
                .find(|b| b.verdict.status == VerdictStatus::Violated)
            {
                witness = make_witness(t, b, net, spec)?;
            }
        }
        let wall_time = timer.elapsed();

        // Coverage: the experiment metric and the rebranch-trigger input.
        let coverage = coverage_rate(
            &self.store,
            input,
            self.cfg.coverage_samples,
            mix_seed(self.cfg.seed ^ 0xC0FF_EE00, t as u64),
        )?;
        self.last_coverage = Some(coverage);
        if rebuilt {
            self.store.origin_coverage = Some(coverage);
        }

        self.prev_input = Some(input.clone());
        self.prev_net = Some(net_arc);
        Ok(StepReport {
            time_index: t,
            per_branch,
            step_status,
            wall_time,
            coverage,
            counts,
            witness,
        })
    }
}

fn earlier_interval_layers_equal(a: &IntervalNetwork, b: &IntervalNetwork) -> bool {
    if a.layers().len() != b.layers().len() {
        return false;
    }
    let n = a.layers().len();
    a.layers()
        .iter()
        .zip(b.layers().iter())
        .take(n.saturating_sub(1))
        .all(|(x, y)| {
            x.weights_lo == y.weights_lo
                && x.weights_hi == y.weights_hi
                && x.bias_lo == y.bias_lo
                && x.bias_hi == y.bias_hi
        })
}

fn make_witness(
    t: usize,
    b: &Branch,
    net: &Network,
    spec: &OutputSpec,
) -> Result<Option<WitnessRecord>> {
    let Some(w) = &b.verdict.witness else {
        return Ok(None);
    };
    let output = net.forward(w)?;
    let violated_row = spec.violated_row(&output, 0.0).unwrap_or(0);
    Ok(Some(WitnessRecord {
        time_index: t,
        branch_id: b.id,
        input: w.clone(),
        output,
        violated_row,
    }))
}
