//! The six acceleration operations: branch management for input and weights,
//! reachable-set relaxation, Lipschitz tolerance, interval-network tolerance,
//! and the guards they rely on.

use std::sync::Arc;

use crate::branching::{coverage_rate, Branch, BranchStore, ReachBasis, Tag};
use crate::engine::config::{EngineConfig, RelaxedCertificate};
use crate::engine::rebuild_store;
use crate::error::{Error, Result};
use crate::geometry::{box_distance, set_distance_upper, Polytope};
use crate::network::{inn_contains, IntervalNetwork, Network};
use crate::reachability::{margins, reach_interval, OutputSpec, Verdict, VerdictStatus};

/// Retags every branch for a changed input set, rewriting base constraints
/// in place and keeping split constraints verbatim.
///
/// A branch whose new region is contained in its previous region keeps its
/// verdict (`Reuse`); everything else is marked `Recompute`. Returns an
/// invalid-state error when the base-row count differs from the stored one
/// (a structural change is a rebuild, not a retag).
pub fn bmi_retag(input_t: &Polytope, store: &mut BranchStore) -> Result<()> {
    if !input_t.split_rows().is_empty() {
        return Err(Error::InvalidState(
            "input set must consist of base constraints only".into(),
        ));
    }
    for branch in store.branches.iter_mut() {
        if branch.region.base_rows().len() != input_t.base_rows().len() {
            return Err(Error::InvalidState(format!(
                "base row count changed ({} -> {}); rebuild required",
                branch.region.base_rows().len(),
                input_t.base_rows().len()
            )));
        }
        let old_region = branch.region.clone();
        branch
            .region
            .replace_base_rows(input_t.base_rows().to_vec())?;
        let containment = branch.region.subset_of(&old_region)?;
        if containment.holds {
            branch.tag = Tag::Reuse;
        } else {
            branch.tag = Tag::Recompute;
            // The region genuinely changed; the cached box no longer bounds it.
            branch.bbox = None;
        }
    }
    Ok(())
}

/// Branch management for input (coverage-triggered rebuild, otherwise retag).
///
/// The coverage of the previous store is measured against the new input set,
/// which is exactly the over-approximation increase the rebuild threshold is
/// guarding. The threshold is `cfg.rebranch_coverage_ratio` times the
/// coverage recorded at the store's origin (skipped when unknown).
pub fn bmi_update(
    t: usize,
    input_t: &Polytope,
    mut store: BranchStore,
    cfg: &EngineConfig,
    net: &Network,
    spec: &OutputSpec,
) -> Result<BranchStore> {
    let coverage = coverage_rate(&store, input_t, cfg.coverage_samples, cfg.seed)?;
    if rebranch_needed(coverage, store.origin_coverage, cfg) {
        let (_, rebuilt) = rebuild_store(t, input_t, &Arc::new(net.clone()), spec, cfg, None)?;
        return Ok(rebuilt);
    }
    bmi_retag(input_t, &mut store)?;
    Ok(store)
}

/// Branch management for weights: regions stay verbatim and every branch is
/// recomputed (or tolerated by a downstream certificate), unless coverage
/// already degraded enough to warrant a rebuild.
pub fn bmw_update(
    t: usize,
    mut store: BranchStore,
    cfg: &EngineConfig,
    input: &Polytope,
    net: &Network,
    spec: &OutputSpec,
) -> Result<BranchStore> {
    let coverage = coverage_rate(&store, input, cfg.coverage_samples, cfg.seed)?;
    if rebranch_needed(coverage, store.origin_coverage, cfg) {
        let (_, rebuilt) = rebuild_store(t, input, &Arc::new(net.clone()), spec, cfg, None)?;
        return Ok(rebuilt);
    }
    bmw_retag(&mut store);
    Ok(store)
}

pub fn bmw_retag(store: &mut BranchStore) {
    for branch in store.branches.iter_mut() {
        branch.tag = Tag::Recompute;
    }
}

pub(crate) fn rebranch_needed(coverage: f64, origin: Option<f64>, cfg: &EngineConfig) -> bool {
    match origin {
        Some(origin) => coverage < cfg.rebranch_coverage_ratio * origin,
        None => false,
    }
}

/// Builds a relaxed-reach certificate for a hold branch: all constraint
/// constants gain `offset`, and the certificate exists only if the relaxed
/// region still verifies (margins of the relaxed reach non-negative).
pub fn rsr_build(
    branch: &Branch,
    net: &Network,
    spec: &OutputSpec,
    offset: f64,
    built_at: usize,
) -> Result<Option<RelaxedCertificate>> {
    if offset < 0.0 {
        return Err(Error::InvalidInput("RSR offset must be non-negative".into()));
    }
    if branch.verdict.status != VerdictStatus::Hold {
        return Err(Error::InvalidState(
            "RSR certificates are built for hold branches only".into(),
        ));
    }
    let relaxed_region = branch.region.relaxed(offset);
    let bbox = match relaxed_region.as_box() {
        Some(b) => b,
        None => relaxed_region.bounding_box()?,
    };
    let relaxed_reach = reach_interval(net, &bbox)?;
    let ms = margins(&relaxed_reach, spec)?;
    if ms.iter().any(|&m| m < 0.0) {
        return Ok(None);
    }
    let verdict = Verdict {
        status: VerdictStatus::Hold,
        margins: ms,
        witness: None,
    };
    Ok(Some(RelaxedCertificate {
        relaxed_region,
        relaxed_reach,
        built_at,
        verdict,
    }))
}

/// True when the branch region at time `t` is contained in the certificate's
/// relaxed region, so the cached relaxed reach covers it.
pub fn rsr_tolerable(branch_region_t: &Polytope, cert: &RelaxedCertificate) -> Result<bool> {
    Ok(branch_region_t.subset_of(&cert.relaxed_region)?.holds)
}

/// Lipschitz tolerance check: a sound upper bound on the set distance from
/// the certificate's snapshot region to `region_t`, compared against the
/// margin-derived threshold.
///
/// The distance bound uses, in order: the exact box-box closed form, the
/// subset shortcut (distance zero), and — only up to `enum_dim_cap`
/// dimensions — corner enumeration. When none applies the change is treated
/// as not tolerable, which is sound.
pub fn lb_tolerable(branch: &Branch, region_t: &Polytope, enum_dim_cap: usize) -> Result<bool> {
    let cert = branch.lb_cert.as_ref().ok_or_else(|| {
        Error::InvalidState("Lipschitz tolerance requires a stored threshold".into())
    })?;
    if branch.verdict.status != VerdictStatus::Hold {
        return Err(Error::InvalidState(
            "Lipschitz tolerance applies to hold branches only".into(),
        ));
    }
    if let (Some(b0), Some(bt)) = (cert.region.as_box(), region_t.as_box()) {
        return Ok(box_distance(&b0, &bt)? <= cert.delta);
    }
    if region_t.subset_of(&cert.region)?.holds {
        return Ok(true);
    }
    if region_t.dim() <= enum_dim_cap {
        return Ok(set_distance_upper(&cert.region, region_t)? <= cert.delta);
    }
    Ok(false)
}

/// True when every current weight lies inside the interval network, so all
/// cached interval-reach results remain valid.
pub fn inn_tolerable(inn: &IntervalNetwork, net_t: &Network) -> Result<bool> {
    inn_contains(inn, net_t)
}

/// True when `candidate`'s cached exact reach can be finished incrementally:
/// the cached input box still matches and only the last layer differs from
/// the network that produced the cache.
pub(crate) fn ic_applicable(branch: &Branch, net_t: &Network) -> bool {
    if branch.basis != ReachBasis::Exact {
        return false;
    }
    let (Some(reach), Some(reach_net)) = (&branch.cached_reach, &branch.reach_net) else {
        return false;
    };
    if branch.bbox.as_ref() != Some(reach.input()) {
        return false;
    }
    if !reach_net.same_architecture(net_t) {
        return false;
    }
    let n = net_t.n_layers();
    if n < 2 {
        return false;
    }
    for (i, (a, b)) in reach_net
        .layers()
        .iter()
        .zip(net_t.layers().iter())
        .enumerate()
    {
        if i + 1 < n && (a.weights != b.weights || a.bias != b.bias) {
            return false;
        }
    }
    true
}
