//! The reach-plus-branch baseline verifier, input-splitting, the branch
//! store reused across time steps, and the sampling-based coverage metric.
//!
//! The worklist runs in FIFO order. Independent entries of one wave are
//! evaluated in parallel and merged back in pop order, so the resulting
//! store is identical to a sequential run.

use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::engine::{LbCertificate, RelaxedCertificate};
use crate::error::{Error, Result};
use crate::geometry::{Constraint, IntervalBox, Polytope};
use crate::network::Network;
use crate::par::par_map;
use crate::reachability::{check, CheckOpts, OutputSpec, ReachResult, Verdict, VerdictStatus};

/// Width below which a region is considered unsplittable.
const MIN_SPLIT_WIDTH: f64 = 1e-9;

/// Branch-management tag: `Reuse` keeps the cached verdict, `Recompute`
/// sends the branch through the tolerance/recompute chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Tag {
    Reuse,
    Recompute,
}

/// Where a branch's cached reach result came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReachBasis {
    /// Plain interval propagation of a concrete network.
    Exact,
    /// Interval-network propagation built at the given time index.
    Inn { built_at: usize },
}

/// One verified region: a sub-polytope of the input set together with its
/// cached reachability result, verdict, and any tolerance certificates.
#[derive(Debug, Clone)]
pub struct Branch {
    pub id: u64,
    pub region: Polytope,
    /// Tight axis-aligned enclosure of `region`; lazily computed.
    pub bbox: Option<IntervalBox>,
    pub cached_reach: Option<ReachResult>,
    /// Network that produced `cached_reach` when the basis is exact.
    pub reach_net: Option<Arc<Network>>,
    pub basis: ReachBasis,
    pub verdict: Verdict,
    pub lb_cert: Option<LbCertificate>,
    pub rsr_cert: Option<RelaxedCertificate>,
    pub tag: Tag,
}

impl Branch {
    pub fn new(id: u64, region: Polytope) -> Self {
        Branch {
            id,
            region,
            bbox: None,
            cached_reach: None,
            reach_net: None,
            basis: ReachBasis::Exact,
            verdict: Verdict {
                status: VerdictStatus::Unknown,
                margins: Vec::new(),
                witness: None,
            },
            lb_cert: None,
            rsr_cert: None,
            tag: Tag::Recompute,
        }
    }

    pub fn depth(&self) -> usize {
        self.region.split_rows().len()
    }

    pub fn lb_delta(&self) -> Option<f64> {
        self.lb_cert.as_ref().map(|c| c.delta)
    }

    /// Computes (and caches) the tight bounding box of the region.
    pub fn ensure_bbox(&mut self) -> Result<&IntervalBox> {
        if self.bbox.is_none() {
            let b = match self.region.as_box() {
                Some(b) => b,
                None => self.region.bounding_box()?,
            };
            self.bbox = Some(b);
        }
        Ok(self.bbox.as_ref().expect("just set"))
    }

    /// Drops every cached artifact that depends on the region or network.
    pub fn invalidate(&mut self) {
        self.bbox = None;
        self.cached_reach = None;
        self.reach_net = None;
        self.basis = ReachBasis::Exact;
        self.verdict = Verdict {
            status: VerdictStatus::Unknown,
            margins: Vec::new(),
            witness: None,
        };
        self.lb_cert = None;
        self.rsr_cert = None;
    }
}

/// Ordered collection of branches partitioning the current input set.
#[derive(Debug, Clone)]
pub struct BranchStore {
    pub branches: Vec<Branch>,
    /// Time index of the last full rebuild.
    pub origin_time: usize,
    /// Coverage measured right after the last rebuild; the baseline for the
    /// rebranch trigger.
    pub origin_coverage: Option<f64>,
    next_id: u64,
}

impl BranchStore {
    pub fn empty() -> Self {
        BranchStore {
            branches: Vec::new(),
            origin_time: 0,
            origin_coverage: None,
            next_id: 0,
        }
    }

    pub fn fresh_id(&mut self) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        id
    }

    pub fn len(&self) -> usize {
        self.branches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.branches.is_empty()
    }

    pub fn all_hold(&self) -> bool {
        self.branches
            .iter()
            .all(|b| b.verdict.status == VerdictStatus::Hold)
    }

    pub fn status(&self) -> VerdictStatus {
        if self
            .branches
            .iter()
            .any(|b| b.verdict.status == VerdictStatus::Violated)
        {
            VerdictStatus::Violated
        } else if self.all_hold() {
            VerdictStatus::Hold
        } else {
            VerdictStatus::Unknown
        }
    }
}

/// Computation limits for the branching loop. The time budget, when set, is
/// checked between waves and therefore trades determinism for punctuality.
#[derive(Debug, Clone)]
pub struct VerifyLimits {
    pub max_branches: usize,
    pub max_depth: usize,
    pub time_budget: Option<Duration>,
}

impl Default for VerifyLimits {
    fn default() -> Self {
        VerifyLimits {
            max_branches: 1000,
            max_depth: 30,
            time_budget: None,
        }
    }
}

/// Bisects the branch region along the widest bounding-box dimension at its
/// midpoint, appending one split row to each child. Ties go to the lowest
/// dimension index.
pub fn split(branch: &Branch, child_ids: (u64, u64)) -> Result<(Branch, Branch)> {
    let bbox = branch
        .bbox
        .as_ref()
        .ok_or_else(|| Error::InvalidState("split requires a computed bounding box".into()))?;
    let (d, width) = bbox.widest_dim();
    if width < MIN_SPLIT_WIDTH {
        return Err(Error::CannotSplit(MIN_SPLIT_WIDTH));
    }
    let mid = 0.5 * (bbox.lo()[d] + bbox.hi()[d]);
    let dim = branch.region.dim();

    let mut axis = vec![0.0; dim];
    axis[d] = 1.0;
    let mut low_region = branch.region.clone();
    low_region.push_split(Constraint::new(axis.clone(), mid))?;

    let mut neg_axis = vec![0.0; dim];
    neg_axis[d] = -1.0;
    let mut high_region = branch.region.clone();
    high_region.push_split(Constraint::new(neg_axis, -mid))?;

    let mut low = Branch::new(child_ids.0, low_region);
    let mut high = Branch::new(child_ids.1, high_region);
    // Children of an axis-aligned box inherit a clipped box exactly; coupled
    // regions recompute their box lazily via LPs.
    if branch.region.as_box().is_some() {
        let mut lo_hi = bbox.hi().to_vec();
        lo_hi[d] = mid;
        low.bbox = Some(IntervalBox::new(bbox.lo().to_vec(), lo_hi)?);
        let mut hi_lo = bbox.lo().to_vec();
        hi_lo[d] = mid;
        high.bbox = Some(IntervalBox::new(hi_lo, bbox.hi().to_vec())?);
    }
    Ok((low, high))
}

pub(crate) type ReachFn<'a> = dyn Fn(&IntervalBox) -> Result<ReachResult> + Sync + 'a;

/// FIFO reach-plus-branch loop with a caller-supplied reach backend.
pub(crate) fn reach_and_branch_with(
    input: &Polytope,
    reach: &ReachFn<'_>,
    net: &Network,
    spec: &OutputSpec,
    limits: &VerifyLimits,
    opts: &CheckOpts,
) -> Result<(VerdictStatus, BranchStore)> {
    let mut store = BranchStore::empty();
    let root_id = store.fresh_id();
    let mut root = Branch::new(root_id, input.clone());
    match root.ensure_bbox() {
        Ok(_) => {}
        Err(Error::EmptySet(_)) => {
            return Err(Error::InvalidInput("input polytope is infeasible".into()))
        }
        Err(e) => return Err(e),
    }

    let started = Instant::now();
    let mut wave = vec![root];
    while !wave.is_empty() {
        if let Some(budget) = limits.time_budget {
            if started.elapsed() > budget {
                // Out of time: everything still queued stays unknown.
                store.branches.extend(wave);
                return Ok((VerdictStatus::Unknown, store));
            }
        }
        let evaluated: Vec<Result<Branch>> = par_map(wave, |mut b| {
            b.ensure_bbox()?;
            let bbox = b.bbox.as_ref().expect("ensured");
            let reach_result = reach(bbox)?;
            b.verdict = check(&reach_result, spec, net, &b.region, opts)?;
            b.cached_reach = Some(reach_result);
            b.tag = Tag::Recompute;
            Ok(b)
        });

        let mut next_wave: Vec<Branch> = Vec::new();
        let mut iter = evaluated.into_iter();
        while let Some(result) = iter.next() {
            let branch = result?;
            match branch.verdict.status {
                VerdictStatus::Violated => {
                    store.branches.push(branch);
                    return Ok((VerdictStatus::Violated, store));
                }
                VerdictStatus::Hold => store.branches.push(branch),
                VerdictStatus::Unknown => {
                    let queued = iter.len() + next_wave.len();
                    let total_after_split = store.len() + queued + 2;
                    let can_split = branch.depth() < limits.max_depth
                        && total_after_split <= limits.max_branches;
                    if !can_split {
                        store.branches.push(branch);
                        continue;
                    }
                    let ids = (store.fresh_id(), store.fresh_id());
                    match split(&branch, ids) {
                        Ok((low, high)) => {
                            next_wave.push(low);
                            next_wave.push(high);
                        }
                        Err(Error::CannotSplit(_)) => store.branches.push(branch),
                        Err(e) => return Err(e),
                    }
                }
            }
        }
        wave = next_wave;
    }
    Ok((store.status(), store))
}

/// Algorithm: pop a branch, compute its reachable set, check it; `Hold`
/// finishes the branch, `Unknown` splits it, `Violated` aborts the run.
pub fn reach_and_branch(
    input: &Polytope,
    net: &Network,
    spec: &OutputSpec,
    limits: &VerifyLimits,
    opts: &CheckOpts,
) -> Result<(VerdictStatus, BranchStore)> {
    let reach = |b: &IntervalBox| crate::reachability::reach_interval(net, b);
    reach_and_branch_with(input, &reach, net, spec, limits, opts)
}

/// Sampled fraction of the input set covered by hold-verdict branches.
///
/// Draws uniformly from the bounding box of `input`, rejects points outside
/// the polytope, and counts accepted points lying in any hold branch.
/// Deterministic for a fixed seed.
pub fn coverage_rate(
    store: &BranchStore,
    input: &Polytope,
    n_samples: usize,
    seed: u64,
) -> Result<f64> {
    if n_samples == 0 {
        return Err(Error::InvalidInput("coverage needs at least one sample".into()));
    }
    let bbox = match input.as_box() {
        Some(b) => b,
        None => input.bounding_box()?,
    };
    let tol = 1e-9;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<Vec<f64>> = (0..n_samples).map(|_| bbox.sample(&mut rng)).collect();

    let flags: Vec<Result<(bool, bool)>> = par_map(points, |p| {
        if !input.contains_point(&p, tol)? {
            return Ok((false, false));
        }
        for b in &store.branches {
            if b.verdict.status != VerdictStatus::Hold {
                continue;
            }
            if let Some(bb) = &b.bbox {
                if !bb.contains(&p, tol) {
                    continue;
                }
            }
            if b.region.contains_point(&p, tol)? {
                return Ok((true, true));
            }
        }
        Ok((true, false))
    });

    let mut accepted = 0usize;
    let mut verified = 0usize;
    for f in flags {
        let (a, v) = f?;
        accepted += a as usize;
        verified += v as usize;
    }
    if accepted == 0 {
        return Err(Error::DegenerateSampling);
    }
    Ok(verified as f64 / accepted as f64)
}
