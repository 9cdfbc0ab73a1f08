//! Interval-arithmetic reachable sets for plain and interval networks,
//! output-specification checking with margins, and incremental last-layer
//! recomputation.
//!
//! The propagation is the plain layer-by-layer interval method: coarse, but
//! deterministic and cheap, which is exactly what the online accelerators
//! are measured against.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{IntervalBox, Polytope};
use crate::network::{
    Activation, IntervalLayer, IntervalNetwork, Layer, LipschitzBound, Network,
};

/// Linear output specification: every row demands `coeffs . y <= bound`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputSpec {
    rows: Vec<SpecRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecRow {
    pub coeffs: Vec<f64>,
    pub bound: f64,
}

impl OutputSpec {
    pub fn new(rows: Vec<SpecRow>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidInput("output spec needs at least one row".into()));
        }
        let dim = rows[0].coeffs.len();
        if rows.iter().any(|r| r.coeffs.len() != dim) {
            return Err(Error::DimensionMismatch {
                context: "output spec rows",
                expected: dim,
                got: 0,
            });
        }
        Ok(OutputSpec { rows })
    }

    /// Two rows `lo <= y_d <= hi` per output dimension.
    pub fn from_box(b: &IntervalBox) -> Self {
        let mut rows = Vec::with_capacity(2 * b.dim());
        for d in 0..b.dim() {
            let mut up = vec![0.0; b.dim()];
            up[d] = 1.0;
            rows.push(SpecRow {
                coeffs: up,
                bound: b.hi()[d],
            });
            let mut down = vec![0.0; b.dim()];
            down[d] = -1.0;
            rows.push(SpecRow {
                coeffs: down,
                bound: -b.lo()[d],
            });
        }
        OutputSpec { rows }
    }

    pub fn rows(&self) -> &[SpecRow] {
        &self.rows
    }

    pub fn dim(&self) -> usize {
        self.rows[0].coeffs.len()
    }

    /// `Some(row)` whose constraint the output violates, with tolerance.
    pub fn violated_row(&self, y: &[f64], tol: f64) -> Option<usize> {
        self.rows.iter().position(|row| {
            let v: f64 = row.coeffs.iter().zip(y.iter()).map(|(c, y)| c * y).sum();
            v > row.bound + tol
        })
    }

    pub fn satisfied(&self, y: &[f64], tol: f64) -> bool {
        self.violated_row(y, tol).is_none()
    }
}

/// Per-layer post-activation interval bounds; entry 0 is the input box and
/// the last entry is the output box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReachResult {
    pub per_layer: Vec<IntervalBox>,
}

impl ReachResult {
    pub fn output(&self) -> &IntervalBox {
        self.per_layer.last().expect("reach result is never empty")
    }

    pub fn input(&self) -> &IntervalBox {
        &self.per_layer[0]
    }

    pub fn penultimate(&self) -> Option<&IntervalBox> {
        let n = self.per_layer.len();
        (n >= 2).then(|| &self.per_layer[n - 2])
    }
}

fn relu_clamp(lo: &mut [f64], hi: &mut [f64]) {
    for v in lo.iter_mut() {
        *v = v.max(0.0);
    }
    for v in hi.iter_mut() {
        *v = v.max(0.0);
    }
}

/// Interval propagation through one concrete layer.
pub fn propagate_layer(layer: &Layer, input: &IntervalBox) -> Result<IntervalBox> {
    if input.dim() != layer.in_dim() {
        return Err(Error::DimensionMismatch {
            context: "propagate_layer",
            expected: layer.in_dim(),
            got: input.dim(),
        });
    }
    let (in_lo, in_hi) = (input.lo(), input.hi());
    let mut lo = Vec::with_capacity(layer.out_dim());
    let mut hi = Vec::with_capacity(layer.out_dim());
    for r in 0..layer.out_dim() {
        let mut acc_lo = layer.bias[r];
        let mut acc_hi = layer.bias[r];
        for j in 0..layer.in_dim() {
            let w = layer.weights[(r, j)];
            if w >= 0.0 {
                acc_lo += w * in_lo[j];
                acc_hi += w * in_hi[j];
            } else {
                acc_lo += w * in_hi[j];
                acc_hi += w * in_lo[j];
            }
        }
        lo.push(acc_lo);
        hi.push(acc_hi);
    }
    if layer.activation == Activation::Relu {
        relu_clamp(&mut lo, &mut hi);
    }
    IntervalBox::new(lo, hi)
}

/// Interval propagation through one interval layer (interval weights times
/// interval activations; min/max over the four endpoint products per term).
pub fn propagate_interval_layer(layer: &IntervalLayer, input: &IntervalBox) -> Result<IntervalBox> {
    let (rows, cols) = layer.weights_lo.dim();
    if input.dim() != cols {
        return Err(Error::DimensionMismatch {
            context: "propagate_interval_layer",
            expected: cols,
            got: input.dim(),
        });
    }
    let (in_lo, in_hi) = (input.lo(), input.hi());
    let mut lo = Vec::with_capacity(rows);
    let mut hi = Vec::with_capacity(rows);
    for r in 0..rows {
        let mut acc_lo = layer.bias_lo[r];
        let mut acc_hi = layer.bias_hi[r];
        for j in 0..cols {
            let wl = layer.weights_lo[(r, j)];
            let wh = layer.weights_hi[(r, j)];
            let (zl, zh) = (in_lo[j], in_hi[j]);
            let p1 = wl * zl;
            let p2 = wl * zh;
            let p3 = wh * zl;
            let p4 = wh * zh;
            acc_lo += p1.min(p2).min(p3).min(p4);
            acc_hi += p1.max(p2).max(p3).max(p4);
        }
        lo.push(acc_lo);
        hi.push(acc_hi);
    }
    if layer.activation == Activation::Relu {
        relu_clamp(&mut lo, &mut hi);
    }
    IntervalBox::new(lo, hi)
}

/// Sound over-approximation of `f(input)` layer by layer.
pub fn reach_interval(net: &Network, input: &IntervalBox) -> Result<ReachResult> {
    if input.dim() != net.in_dim() {
        return Err(Error::DimensionMismatch {
            context: "reach_interval input",
            expected: net.in_dim(),
            got: input.dim(),
        });
    }
    let mut per_layer = Vec::with_capacity(net.n_layers() + 1);
    per_layer.push(input.clone());
    for layer in net.layers() {
        let next = propagate_layer(layer, per_layer.last().expect("non-empty"))?;
        per_layer.push(next);
    }
    Ok(ReachResult { per_layer })
}

/// Reachability of an interval network: sound for every concrete network
/// inside the weight intervals. With degenerate intervals this reproduces
/// [`reach_interval`] exactly.
pub fn reach_inn(inn: &IntervalNetwork, input: &IntervalBox) -> Result<ReachResult> {
    if input.dim() != inn.in_dim() {
        return Err(Error::DimensionMismatch {
            context: "reach_inn input",
            expected: inn.in_dim(),
            got: input.dim(),
        });
    }
    let mut per_layer = Vec::with_capacity(inn.layers().len() + 1);
    per_layer.push(input.clone());
    for layer in inn.layers() {
        let next = propagate_interval_layer(layer, per_layer.last().expect("non-empty"))?;
        per_layer.push(next);
    }
    Ok(ReachResult { per_layer })
}

/// Recomputes only the final layer from the cached penultimate bounds. With
/// the same last layer this is bit-for-bit the tail of a full propagation.
pub fn reach_incremental(cached: &ReachResult, new_last_layer: &Layer) -> Result<ReachResult> {
    let penultimate = cached.penultimate().ok_or_else(|| {
        Error::InvalidState("incremental recomputation needs at least two cached layers".into())
    })?;
    let fresh = propagate_layer(new_last_layer, penultimate)?;
    let mut per_layer = cached.per_layer[..cached.per_layer.len() - 1].to_vec();
    per_layer.push(fresh);
    Ok(ReachResult { per_layer })
}

/// Incremental variant for interval networks, used when only the last
/// interval layer was rebuilt.
pub fn reach_incremental_inn(
    cached: &ReachResult,
    new_last_layer: &IntervalLayer,
) -> Result<ReachResult> {
    let penultimate = cached.penultimate().ok_or_else(|| {
        Error::InvalidState("incremental recomputation needs at least two cached layers".into())
    })?;
    let fresh = propagate_interval_layer(new_last_layer, penultimate)?;
    let mut per_layer = cached.per_layer[..cached.per_layer.len() - 1].to_vec();
    per_layer.push(fresh);
    Ok(ReachResult { per_layer })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerdictStatus {
    Hold,
    Unknown,
    Violated,
}

/// Outcome of checking a reach result against an output spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub status: VerdictStatus,
    /// `bound_j - max_{y in output box} coeffs_j . y` per spec row.
    pub margins: Vec<f64>,
    /// Concrete counterexample input; present exactly when violated.
    pub witness: Option<Vec<f64>>,
}

/// Options for the counterexample search that separates `Violated` from
/// `Unknown`.
#[derive(Debug, Clone, Copy)]
pub struct CheckOpts {
    /// Seeded random samples drawn from the input region.
    pub n_ce: usize,
    /// At most this many input-box corners are evaluated; above `2^dim`
    /// corners a seeded subset is taken.
    pub corner_cap: usize,
    pub seed: u64,
    /// Membership tolerance for region tests.
    pub tol: f64,
}

impl Default for CheckOpts {
    fn default() -> Self {
        CheckOpts {
            n_ce: 64,
            corner_cap: 32,
            seed: 0,
            tol: 1e-9,
        }
    }
}

/// Minimal slack before a concrete output is reported as a violation, so a
/// boundary evaluation never produces a spurious witness.
const WITNESS_TOL: f64 = 1e-12;

pub fn margins(result: &ReachResult, spec: &OutputSpec) -> Result<Vec<f64>> {
    let out = result.output();
    if out.dim() != spec.dim() {
        return Err(Error::DimensionMismatch {
            context: "check margins",
            expected: spec.dim(),
            got: out.dim(),
        });
    }
    Ok(spec
        .rows()
        .iter()
        .map(|row| {
            let max_val: f64 = row
                .coeffs
                .iter()
                .enumerate()
                .map(|(d, &c)| {
                    if c >= 0.0 {
                        c * out.hi()[d]
                    } else {
                        c * out.lo()[d]
                    }
                })
                .sum();
            row.bound - max_val
        })
        .collect())
}

/// Checks a reach result against the spec. Margins decide `Hold`; otherwise
/// a concrete counterexample search over corners and seeded samples of
/// `input_region` decides `Violated` vs `Unknown`.
pub fn check(
    result: &ReachResult,
    spec: &OutputSpec,
    net: &Network,
    input_region: &Polytope,
    opts: &CheckOpts,
) -> Result<Verdict> {
    let margins = margins(result, spec)?;
    if margins.iter().all(|&m| m >= 0.0) {
        return Ok(Verdict {
            status: VerdictStatus::Hold,
            margins,
            witness: None,
        });
    }

    let input = result.input();
    let dim = input.dim();
    let try_point = |x: &[f64]| -> Result<Option<Vec<f64>>> {
        if !input_region.contains_point(x, opts.tol)? {
            return Ok(None);
        }
        let y = net.forward(x)?;
        if spec.violated_row(&y, WITNESS_TOL).is_some() {
            return Ok(Some(x.to_vec()));
        }
        Ok(None)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    // Corner pass: all corners when few, otherwise a seeded subset.
    let total_corners = 1u64.checked_shl(dim as u32).unwrap_or(u64::MAX);
    if total_corners <= opts.corner_cap as u64 {
        for k in 0..total_corners {
            if let Some(w) = try_point(&input.corner(k))? {
                return Ok(Verdict {
                    status: VerdictStatus::Violated,
                    margins,
                    witness: Some(w),
                });
            }
        }
    } else {
        for _ in 0..opts.corner_cap {
            let k = rng.gen::<u64>() % total_corners.max(1);
            if let Some(w) = try_point(&input.corner(k))? {
                return Ok(Verdict {
                    status: VerdictStatus::Violated,
                    margins,
                    witness: Some(w),
                });
            }
        }
    }
    // Random pass: rejection sampling from the input box into the region.
    let mut accepted = 0usize;
    let mut attempts = 0usize;
    let max_attempts = opts.n_ce.saturating_mul(20).max(64);
    while accepted < opts.n_ce && attempts < max_attempts {
        attempts += 1;
        let x = input.sample(&mut rng);
        if !input_region.contains_point(&x, opts.tol)? {
            continue;
        }
        accepted += 1;
        let y = net.forward(&x)?;
        if spec.violated_row(&y, WITNESS_TOL).is_some() {
            return Ok(Verdict {
                status: VerdictStatus::Violated,
                margins,
                witness: Some(x),
            });
        }
    }
    Ok(Verdict {
        status: VerdictStatus::Unknown,
        margins,
        witness: None,
    })
}

/// Lipschitz tolerance threshold of Lemma-style margin reasoning: the
/// smallest `margin_j / (||c_j||_1 * L)` across spec rows. Requires a hold
/// verdict (all margins non-negative).
pub fn lb_threshold(result: &ReachResult, spec: &OutputSpec, l: LipschitzBound) -> Result<f64> {
    if l.0 <= 0.0 {
        return Err(Error::InvalidState(
            "Lipschitz bound must be positive for a tolerance threshold".into(),
        ));
    }
    let margins = margins(result, spec)?;
    if margins.iter().any(|&m| m < 0.0) {
        return Err(Error::InvalidState(
            "lb_threshold requires a hold verdict".into(),
        ));
    }
    let mut delta = f64::INFINITY;
    for (row, &m) in spec.rows().iter().zip(margins.iter()) {
        let norm1: f64 = row.coeffs.iter().map(|c| c.abs()).sum();
        if norm1 == 0.0 {
            continue; // trivial row constrains nothing
        }
        delta = delta.min(m / (norm1 * l.0));
    }
    if !delta.is_finite() {
        return Err(Error::InvalidState(
            "output spec has no non-trivial rows".into(),
        ));
    }
    Ok(delta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{build_inn, LayerDiff};
    use ndarray::array;

    fn single_layer(w: f64, activation: Activation) -> Network {
        Network::new(vec![
            Layer::new(array![[w]], array![0.0], activation).unwrap()
        ])
        .unwrap()
    }

    fn abs_network() -> Network {
        Network::new(vec![
            Layer::new(array![[1.0], [-1.0]], array![0.0, 0.0], Activation::Relu).unwrap(),
            Layer::new(array![[1.0, 1.0]], array![0.0], Activation::Linear).unwrap(),
        ])
        .unwrap()
    }

    fn boxi(lo: f64, hi: f64) -> IntervalBox {
        IntervalBox::new(vec![lo], vec![hi]).unwrap()
    }

    #[test]
    fn reach_relu_and_linear_single_layers() {
        let relu = single_layer(1.0, Activation::Relu);
        let out = reach_interval(&relu, &boxi(-5.0, 3.0)).unwrap();
        assert_eq!((out.output().lo()[0], out.output().hi()[0]), (0.0, 3.0));

        let lin = single_layer(2.0, Activation::Linear);
        let out = reach_interval(&lin, &boxi(-1.0, 2.0)).unwrap();
        assert_eq!((out.output().lo()[0], out.output().hi()[0]), (-2.0, 4.0));
    }

    #[test]
    fn reach_abs_network_hand_propagation() {
        let net = abs_network();
        let out = reach_interval(&net, &boxi(-3.0, 2.0)).unwrap();
        // h1 = [0,2], h2 = [0,3], sum = [0,5].
        assert_eq!(out.per_layer[1].lo(), &[0.0, 0.0]);
        assert_eq!(out.per_layer[1].hi(), &[2.0, 3.0]);
        assert_eq!((out.output().lo()[0], out.output().hi()[0]), (0.0, 5.0));
    }

    #[test]
    fn reach_inn_degenerate_matches_exact() {
        let net = abs_network();
        let inn = build_inn(&net, &LayerDiff::zeros(2)).unwrap();
        let input = boxi(-3.0, 2.0);
        let a = reach_interval(&net, &input).unwrap();
        let b = reach_inn(&inn, &input).unwrap();
        assert_eq!(a, b);
    }

    fn weight_interval_net(lo: f64, hi: f64) -> crate::network::IntervalNetwork {
        crate::network::IntervalNetwork::new(vec![crate::network::IntervalLayer {
            weights_lo: array![[lo]],
            weights_hi: array![[hi]],
            bias_lo: array![0.0],
            bias_hi: array![0.0],
            activation: Activation::Linear,
        }])
        .unwrap()
    }

    #[test]
    fn reach_inn_weight_interval_cases() {
        // W in [1,2], input [1,1] -> [1,2].
        let inn = weight_interval_net(1.0, 2.0);
        let out = reach_inn(&inn, &boxi(1.0, 1.0)).unwrap();
        assert_eq!((out.output().lo()[0], out.output().hi()[0]), (1.0, 2.0));

        // W in [-2.1,-1.9], input [1,2] -> [-4.2,-1.9]: min/max over the
        // endpoint products {-2.1,-1.9} x {1,2}.
        let inn = weight_interval_net(-2.1, -1.9);
        let out = reach_inn(&inn, &boxi(1.0, 2.0)).unwrap();
        assert!((out.output().lo()[0] + 4.2).abs() < 1e-12);
        assert!((out.output().hi()[0] + 1.9).abs() < 1e-12);
    }

    #[test]
    fn check_hold_margins() {
        // Output box [2,10] against -2 <= y <= 12: margins (2, 4) with rows
        // ordered (upper, lower).
        let result = ReachResult {
            per_layer: vec![boxi(0.0, 1.0), boxi(2.0, 10.0)],
        };
        let spec = OutputSpec::from_box(&boxi(-2.0, 12.0));
        let net = single_layer(1.0, Activation::Linear);
        let region = Polytope::from_box(&boxi(0.0, 1.0));
        let v = check(&result, &spec, &net, &region, &CheckOpts::default()).unwrap();
        assert_eq!(v.status, VerdictStatus::Hold);
        assert_eq!(v.margins, vec![2.0, 4.0]);
        assert!(v.witness.is_none());
    }

    #[test]
    fn check_unknown_when_box_exceeds_without_counterexample() {
        // Identity net on [0,1] has true range [0,1]; an inflated cached box
        // [0,13] against y <= 12 must come back unknown, margin -1.
        let result = ReachResult {
            per_layer: vec![boxi(0.0, 1.0), boxi(0.0, 13.0)],
        };
        let spec = OutputSpec::from_box(&boxi(-2.0, 12.0));
        let net = single_layer(1.0, Activation::Linear);
        let region = Polytope::from_box(&boxi(0.0, 1.0));
        let v = check(&result, &spec, &net, &region, &CheckOpts::default()).unwrap();
        assert_eq!(v.status, VerdictStatus::Unknown);
        assert_eq!(v.margins[0], -1.0);
    }

    #[test]
    fn check_violated_finds_witness() {
        let net = single_layer(1.0, Activation::Linear);
        let input = boxi(0.0, 1.0);
        let result = reach_interval(&net, &input).unwrap();
        let spec = OutputSpec::new(vec![SpecRow {
            coeffs: vec![1.0],
            bound: -1.0,
        }])
        .unwrap();
        let region = Polytope::from_box(&input);
        let v = check(&result, &spec, &net, &region, &CheckOpts::default()).unwrap();
        assert_eq!(v.status, VerdictStatus::Violated);
        let w = v.witness.expect("witness");
        let y = net.forward(&w).unwrap();
        assert!(spec.violated_row(&y, 0.0).is_some());
    }

    #[test]
    fn incremental_matches_and_negates() {
        let net = abs_network();
        let cached = reach_interval(&net, &boxi(-3.0, 2.0)).unwrap();

        // Unchanged last layer: identical output.
        let same = reach_incremental(&cached, &net.layers()[1]).unwrap();
        assert_eq!(same, cached);

        // Output weights doubled: [0,10] from h-boxes [0,2],[0,3].
        let doubled = Layer::new(array![[2.0, 2.0]], array![0.0], Activation::Linear).unwrap();
        let out = reach_incremental(&cached, &doubled).unwrap();
        assert_eq!((out.output().lo()[0], out.output().hi()[0]), (0.0, 10.0));

        // 1-D negation of a cached [1,2] penultimate box (stale output).
        let cached = ReachResult {
            per_layer: vec![boxi(0.0, 1.0), boxi(1.0, 2.0), boxi(1.0, 2.0)],
        };
        let neg = Layer::new(array![[-1.0]], array![0.0], Activation::Linear).unwrap();
        let out = reach_incremental(&cached, &neg).unwrap();
        assert_eq!((out.output().lo()[0], out.output().hi()[0]), (-2.0, -1.0));
        assert_eq!(out.per_layer[1], cached.per_layer[1]);
    }

    #[test]
    fn lb_threshold_examples() {
        // Output box [2,10], spec -2 <= y <= 12, L = 2: delta = min(2,4)/2 = 1.
        let result = ReachResult {
            per_layer: vec![boxi(0.0, 1.0), boxi(2.0, 10.0)],
        };
        let spec = OutputSpec::from_box(&boxi(-2.0, 12.0));
        let d = lb_threshold(&result, &spec, LipschitzBound(2.0)).unwrap();
        assert!((d - 1.0).abs() < 1e-12);

        // Zero margins give zero threshold.
        let tight = OutputSpec::from_box(&boxi(2.0, 10.0));
        let d = lb_threshold(&result, &tight, LipschitzBound(2.0)).unwrap();
        assert_eq!(d, 0.0);

        // Single row c = (2), d = 10, box max 3, L = 1: (10 - 6) / 2 = 2.
        let result = ReachResult {
            per_layer: vec![boxi(0.0, 1.0), boxi(0.0, 3.0)],
        };
        let spec = OutputSpec::new(vec![SpecRow {
            coeffs: vec![2.0],
            bound: 10.0,
        }])
        .unwrap();
        let d = lb_threshold(&result, &spec, LipschitzBound(1.0)).unwrap();
        assert!((d - 2.0).abs() < 1e-12);

        // Non-hold results are an invalid state.
        let bad = ReachResult {
            per_layer: vec![boxi(0.0, 1.0), boxi(0.0, 20.0)],
        };
        assert!(lb_threshold(&bad, &spec, LipschitzBound(1.0)).is_err());
    }
}
