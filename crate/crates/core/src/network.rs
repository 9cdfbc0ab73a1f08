//! Feedforward ReLU networks, weight-change metrics, single gradient steps
//! for scenario generation, interval-weight abstractions, and a product-form
//! Lipschitz upper bound.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Linear,
}

impl Activation {
    #[inline]
    pub fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Relu => v.max(0.0),
            Activation::Linear => v,
        }
    }
}

/// One dense layer `sigma(W z + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn new(weights: Array2<f64>, bias: Array1<f64>, activation: Activation) -> Result<Self> {
        if weights.nrows() != bias.len() {
            return Err(Error::DimensionMismatch {
                context: "layer bias",
                expected: weights.nrows(),
                got: bias.len(),
            });
        }
        if weights.iter().any(|w| !w.is_finite()) || bias.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidInput("non-finite layer parameter".into()));
        }
        Ok(Layer {
            weights,
            bias,
            activation,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.nrows()
    }

    fn eval(&self, z: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.out_dim());
        for r in 0..self.out_dim() {
            let mut acc = self.bias[r];
            for (j, &v) in z.iter().enumerate() {
                acc += self.weights[(r, j)] * v;
            }
            out.push(self.activation.apply(acc));
        }
        out
    }

    /// Operator infinity norm (max absolute row sum), bias excluded.
    pub fn weight_inf_norm(&self) -> f64 {
        (0..self.out_dim())
            .map(|r| (0..self.in_dim()).map(|j| self.weights[(r, j)].abs()).sum())
            .fold(0.0, f64::max)
    }
}

/// Layered ReLU network; hidden layers use ReLU, the last layer is ReLU or
/// linear.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<Layer>,
}

impl Network {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidInput("network needs at least one layer".into()));
        }
        for w in layers.windows(2) {
            if w[0].out_dim() != w[1].in_dim() {
                return Err(Error::ArchitectureMismatch(format!(
                    "layer output {} feeds layer input {}",
                    w[0].out_dim(),
                    w[1].in_dim()
                )));
            }
        }
        if layers[..layers.len() - 1]
            .iter()
            .any(|l| l.activation != Activation::Relu)
        {
            return Err(Error::InvalidInput(
                "hidden layers must use relu activation".into(),
            ));
        }
        Ok(Network { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn same_architecture(&self, other: &Network) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(other.layers.iter())
                .all(|(a, b)| {
                    a.in_dim() == b.in_dim()
                        && a.out_dim() == b.out_dim()
                        && a.activation == b.activation
                })
    }

    /// Exact layer-by-layer evaluation.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.in_dim() {
            return Err(Error::DimensionMismatch {
                context: "forward input",
                expected: self.in_dim(),
                got: x.len(),
            });
        }
        let mut z = x.to_vec();
        for layer in &self.layers {
            z = layer.eval(&z);
        }
        Ok(z)
    }

    /// Replaces the last layer, keeping everything else shared.
    pub fn with_last_layer(&self, last: Layer) -> Result<Network> {
        let old = self.layers.last().expect("non-empty");
        if last.in_dim() != old.in_dim() || last.out_dim() != old.out_dim() {
            return Err(Error::ArchitectureMismatch(
                "replacement last layer has different shape".into(),
            ));
        }
        let mut layers = self.layers.clone();
        *layers.last_mut().expect("non-empty") = last;
        Ok(Network { layers })
    }
}

/// Per-layer infinity-norm distance between two networks of identical
/// architecture, measured on the augmented matrix `[W | b]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerDiff(pub Vec<f64>);

impl LayerDiff {
    pub fn zeros(n_layers: usize) -> Self {
        LayerDiff(vec![0.0; n_layers])
    }

    pub fn scaled(&self, factor: f64) -> Self {
        LayerDiff(self.0.iter().map(|v| v * factor).collect())
    }

    pub fn max_elementwise(&self, other: &LayerDiff) -> LayerDiff {
        LayerDiff(
            self.0
                .iter()
                .zip(other.0.iter())
                .map(|(a, b)| a.max(*b))
                .collect(),
        )
    }
}

pub fn layerwise_diff(net_a: &Network, net_b: &Network) -> Result<LayerDiff> {
    if !net_a.same_architecture(net_b) {
        return Err(Error::ArchitectureMismatch(
            "layerwise_diff requires identical architectures".into(),
        ));
    }
    let mut per_layer = Vec::with_capacity(net_a.n_layers());
    for (la, lb) in net_a.layers.iter().zip(net_b.layers.iter()) {
        let mut worst = 0.0f64;
        for r in 0..la.out_dim() {
            let mut row_sum = (la.bias[r] - lb.bias[r]).abs();
            for j in 0..la.in_dim() {
                row_sum += (la.weights[(r, j)] - lb.weights[(r, j)]).abs();
            }
            worst = worst.max(row_sum);
        }
        per_layer.push(worst);
    }
    Ok(LayerDiff(per_layer))
}

/// Element-wise maximum of consecutive one-step differences over a trace.
pub fn max_step_diff(trace: &[Network]) -> Result<LayerDiff> {
    if trace.len() < 2 {
        return Err(Error::InvalidInput(
            "max_step_diff needs a trace of at least two networks".into(),
        ));
    }
    let mut acc = LayerDiff::zeros(trace[0].n_layers());
    for pair in trace.windows(2) {
        acc = acc.max_elementwise(&layerwise_diff(&pair[0], &pair[1])?);
    }
    Ok(acc)
}

/// One step of gradient descent on `||f(x) - y_target||_2^2`.
///
/// ReLU uses subgradient 0 at exactly 0. With `last_layer_only` the earlier
/// layers are carried over bit-identically.
pub fn gradient_step(
    net: &Network,
    x: &[f64],
    y_target: &[f64],
    lr: f64,
    last_layer_only: bool,
) -> Result<Network> {
    if x.len() != net.in_dim() {
        return Err(Error::DimensionMismatch {
            context: "gradient_step input",
            expected: net.in_dim(),
            got: x.len(),
        });
    }
    if y_target.len() != net.out_dim() {
        return Err(Error::DimensionMismatch {
            context: "gradient_step target",
            expected: net.out_dim(),
            got: y_target.len(),
        });
    }
    if lr <= 0.0 {
        return Err(Error::InvalidInput("learning rate must be positive".into()));
    }

    // Forward pass keeping pre-activations.
    let n = net.n_layers();
    let mut activations: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    let mut preacts: Vec<Vec<f64>> = Vec::with_capacity(n);
    activations.push(x.to_vec());
    for layer in &net.layers {
        let z = activations.last().expect("non-empty");
        let mut pre = Vec::with_capacity(layer.out_dim());
        for r in 0..layer.out_dim() {
            let mut acc = layer.bias[r];
            for (j, &v) in z.iter().enumerate() {
                acc += layer.weights[(r, j)] * v;
            }
            pre.push(acc);
        }
        let post: Vec<f64> = pre.iter().map(|&v| layer.activation.apply(v)).collect();
        preacts.push(pre);
        activations.push(post);
    }

    // delta = dL/d(pre-activation) backwards through the layers.
    let output = activations.last().expect("non-empty");
    let mut delta: Vec<f64> = output
        .iter()
        .zip(y_target.iter())
        .map(|(o, t)| 2.0 * (o - t))
        .collect();
    let mut new_layers: Vec<Layer> = vec![];
    for (i, layer) in net.layers.iter().enumerate().rev() {
        for (d, &pre) in delta.iter_mut().zip(preacts[i].iter()) {
            if layer.activation == Activation::Relu && pre <= 0.0 {
                *d = 0.0;
            }
        }
        let update_this = !last_layer_only || i == n - 1;
        let new_layer = if update_this {
            let z_prev = &activations[i];
            let mut w = layer.weights.clone();
            let mut b = layer.bias.clone();
            for r in 0..layer.out_dim() {
                b[r] -= lr * delta[r];
                for j in 0..layer.in_dim() {
                    w[(r, j)] -= lr * delta[r] * z_prev[j];
                }
            }
            Layer {
                weights: w,
                bias: b,
                activation: layer.activation,
            }
        } else {
            layer.clone()
        };
        new_layers.push(new_layer);
        if i > 0 {
            let mut prev_delta = vec![0.0; layer.in_dim()];
            for (j, pd) in prev_delta.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (r, &d) in delta.iter().enumerate() {
                    acc += layer.weights[(r, j)] * d;
                }
                *pd = acc;
            }
            delta = prev_delta;
        }
    }
    new_layers.reverse();
    Network::new(new_layers)
}

/// One layer of an interval network: element-wise weight and bias ranges.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalLayer {
    pub weights_lo: Array2<f64>,
    pub weights_hi: Array2<f64>,
    pub bias_lo: Array1<f64>,
    pub bias_hi: Array1<f64>,
    pub activation: Activation,
}

/// Network whose weights are element-wise intervals; its reachable sets cover
/// every concrete network inside the intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalNetwork {
    layers: Vec<IntervalLayer>,
}

impl IntervalNetwork {
    pub fn new(layers: Vec<IntervalLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidInput("empty interval network".into()));
        }
        for l in &layers {
            if l.weights_lo.dim() != l.weights_hi.dim()
                || l.bias_lo.len() != l.bias_hi.len()
                || l.weights_lo.nrows() != l.bias_lo.len()
            {
                return Err(Error::ArchitectureMismatch(
                    "interval layer shapes inconsistent".into(),
                ));
            }
            let inverted = l
                .weights_lo
                .iter()
                .zip(l.weights_hi.iter())
                .any(|(lo, hi)| lo > hi)
                || l.bias_lo.iter().zip(l.bias_hi.iter()).any(|(lo, hi)| lo > hi);
            if inverted {
                return Err(Error::InvalidInput(
                    "interval layer has inverted bounds".into(),
                ));
            }
        }
        Ok(IntervalNetwork { layers })
    }

    pub fn layers(&self) -> &[IntervalLayer] {
        &self.layers
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].weights_lo.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].weights_lo.nrows()
    }
}

/// Widens each layer of `net` by the matching `radius` entry, applied
/// uniformly to every weight and bias element of that layer.
pub fn build_inn(net: &Network, radius: &LayerDiff) -> Result<IntervalNetwork> {
    if radius.0.len() != net.n_layers() {
        return Err(Error::ArchitectureMismatch(format!(
            "radius has {} entries for {} layers",
            radius.0.len(),
            net.n_layers()
        )));
    }
    if radius.0.iter().any(|r| *r < 0.0) {
        return Err(Error::InvalidInput("negative interval radius".into()));
    }
    let layers = net
        .layers
        .iter()
        .zip(radius.0.iter())
        .map(|(layer, &r)| IntervalLayer {
            weights_lo: layer.weights.mapv(|w| w - r),
            weights_hi: layer.weights.mapv(|w| w + r),
            bias_lo: layer.bias.mapv(|b| b - r),
            bias_hi: layer.bias.mapv(|b| b + r),
            activation: layer.activation,
        })
        .collect();
    Ok(IntervalNetwork { layers })
}

/// True iff every weight and bias of `net` lies inside the matching closed
/// interval of `inn`.
pub fn inn_contains(inn: &IntervalNetwork, net: &Network) -> Result<bool> {
    if inn.layers.len() != net.n_layers() {
        return Err(Error::ArchitectureMismatch(
            "interval network layer count differs".into(),
        ));
    }
    for (il, layer) in inn.layers.iter().zip(net.layers.iter()) {
        if il.weights_lo.dim() != layer.weights.dim() {
            return Err(Error::ArchitectureMismatch(
                "interval network layer shape differs".into(),
            ));
        }
        for ((lo, hi), w) in il
            .weights_lo
            .iter()
            .zip(il.weights_hi.iter())
            .zip(layer.weights.iter())
        {
            if *w < *lo || *w > *hi {
                return Ok(false);
            }
        }
        for ((lo, hi), b) in il
            .bias_lo
            .iter()
            .zip(il.bias_hi.iter())
            .zip(layer.bias.iter())
        {
            if *b < *lo || *b > *hi {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Global Lipschitz upper bound in the infinity norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzBound(pub f64);

/// Product of the per-layer operator infinity norms. Valid because ReLU is
/// 1-Lipschitz in every coordinate.
pub fn lipschitz_upper(net: &Network) -> LipschitzBound {
    LipschitzBound(net.layers.iter().map(Layer::weight_inf_norm).product())
}

// ---------------------------------------------------------------------------
// JSON file format
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct LayerFile {
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
    activation: Activation,
}

#[derive(Serialize, Deserialize)]
struct NetworkFile {
    layers: Vec<LayerFile>,
}

#[derive(Serialize, Deserialize)]
struct IntervalLayerFile {
    weights_lo: Vec<Vec<f64>>,
    weights_hi: Vec<Vec<f64>>,
    bias_lo: Vec<f64>,
    bias_hi: Vec<f64>,
    activation: Activation,
}

#[derive(Serialize, Deserialize)]
struct IntervalNetworkFile {
    layers: Vec<IntervalLayerFile>,
}

fn matrix_to_rows(m: &Array2<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|r| m.row(r).to_vec()).collect()
}

fn rows_to_matrix(rows: &[Vec<f64>]) -> Result<Array2<f64>> {
    let nrows = rows.len();
    if nrows == 0 {
        return Err(Error::InvalidInput("empty weight matrix".into()));
    }
    let ncols = rows[0].len();
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::InvalidInput("ragged weight matrix".into()));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Array2::from_shape_vec((nrows, ncols), flat)
        .map_err(|e| Error::InvalidInput(format!("bad matrix shape: {e}")))
}

impl Network {
    pub fn to_json(&self) -> String {
        let file = NetworkFile {
            layers: self
                .layers
                .iter()
                .map(|l| LayerFile {
                    weights: matrix_to_rows(&l.weights),
                    bias: l.bias.to_vec(),
                    activation: l.activation,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("network serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Network> {
        let file: NetworkFile = serde_json::from_str(text)
            .map_err(|e| Error::InvalidInput(format!("network JSON: {e}")))?;
        let layers = file
            .layers
            .iter()
            .map(|l| {
                Layer::new(
                    rows_to_matrix(&l.weights)?,
                    Array1::from_vec(l.bias.clone()),
                    l.activation,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Network::new(layers)
    }
}

impl IntervalNetwork {
    pub fn to_json(&self) -> String {
        let file = IntervalNetworkFile {
            layers: self
                .layers
                .iter()
                .map(|l| IntervalLayerFile {
                    weights_lo: matrix_to_rows(&l.weights_lo),
                    weights_hi: matrix_to_rows(&l.weights_hi),
                    bias_lo: l.bias_lo.to_vec(),
                    bias_hi: l.bias_hi.to_vec(),
                    activation: l.activation,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("interval network serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<IntervalNetwork> {
        let file: IntervalNetworkFile = serde_json::from_str(text)
            .map_err(|e| Error::InvalidInput(format!("interval network JSON: {e}")))?;
        let mut layers = Vec::with_capacity(file.layers.len());
        for l in &file.layers {
            let layer = IntervalLayer {
                weights_lo: rows_to_matrix(&l.weights_lo)?,
                weights_hi: rows_to_matrix(&l.weights_hi)?,
                bias_lo: Array1::from_vec(l.bias_lo.clone()),
                bias_hi: Array1::from_vec(l.bias_hi.clone()),
                activation: l.activation,
            };
            if layer.weights_lo.dim() != layer.weights_hi.dim()
                || layer
                    .weights_lo
                    .iter()
                    .zip(layer.weights_hi.iter())
                    .any(|(lo, hi)| lo > hi)
                || layer
                    .bias_lo
                    .iter()
                    .zip(layer.bias_hi.iter())
                    .any(|(lo, hi)| lo > hi)
            {
                return Err(Error::InvalidInput(
                    "interval network has inverted bounds".into(),
                ));
            }
            layers.push(layer);
        }
        if layers.is_empty() {
            return Err(Error::InvalidInput("empty interval network".into()));
        }
        Ok(IntervalNetwork { layers })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn single_layer(w: f64, b: f64, activation: Activation) -> Network {
        Network::new(vec![Layer::new(array![[w]], array![b], activation).unwrap()]).unwrap()
    }

    /// The |x| network: hidden ReLU weights [[1], [-1]], linear output [1, 1].
    fn abs_network() -> Network {
        Network::new(vec![
            Layer::new(array![[1.0], [-1.0]], array![0.0, 0.0], Activation::Relu).unwrap(),
            Layer::new(array![[1.0, 1.0]], array![0.0], Activation::Linear).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn forward_identity_and_relu() {
        let lin = single_layer(1.0, 0.0, Activation::Linear);
        assert_eq!(lin.forward(&[-2.0]).unwrap(), vec![-2.0]);
        let relu = single_layer(1.0, 0.0, Activation::Relu);
        assert_eq!(relu.forward(&[-2.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn forward_abs_network() {
        let net = abs_network();
        assert_eq!(net.forward(&[-3.0]).unwrap(), vec![3.0]);
        assert_eq!(net.forward(&[2.5]).unwrap(), vec![2.5]);
    }

    #[test]
    fn layerwise_diff_examples() {
        let a = single_layer(2.0, 0.0, Activation::Linear);
        assert_eq!(layerwise_diff(&a, &a).unwrap().0, vec![0.0]);

        let b = single_layer(2.1, 0.0, Activation::Linear);
        let d = layerwise_diff(&a, &b).unwrap();
        assert!((d.0[0] - 0.1).abs() < 1e-12);

        let wa = Network::new(vec![Layer::new(
            array![[0.1, -0.2], [0.05, 0.05]],
            array![0.0, 0.0],
            Activation::Linear,
        )
        .unwrap()])
        .unwrap();
        let wb = Network::new(vec![Layer::new(
            array![[0.0, 0.0], [0.0, 0.0]],
            array![0.0, 0.0],
            Activation::Linear,
        )
        .unwrap()])
        .unwrap();
        let d = layerwise_diff(&wa, &wb).unwrap();
        assert!((d.0[0] - 0.3).abs() < 1e-12);
    }

    #[test]
    fn max_step_diff_folds_elementwise() {
        let n0 = single_layer(1.0, 0.0, Activation::Linear);
        let n1 = single_layer(1.1, 0.0, Activation::Linear);
        let n2 = single_layer(0.8, 0.0, Activation::Linear);
        let d = max_step_diff(&[n0.clone(), n1, n2]).unwrap();
        assert!((d.0[0] - 0.3).abs() < 1e-12);
        assert_eq!(max_step_diff(&[n0.clone(), n0]).unwrap().0, vec![0.0]);
    }

    #[test]
    fn gradient_step_linear_example() {
        // w = 1, b = 0, x = 1, target 2: dL/dw = 2(w x - y) x = -2.
        let net = single_layer(1.0, 0.0, Activation::Linear);
        let stepped = gradient_step(&net, &[1.0], &[2.0], 0.1, false).unwrap();
        assert!((stepped.layers()[0].weights[(0, 0)] - 1.2).abs() < 1e-12);
        assert!((stepped.layers()[0].bias[0] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn gradient_step_zero_loss_is_identity() {
        let net = abs_network();
        let y = net.forward(&[1.5]).unwrap();
        let stepped = gradient_step(&net, &[1.5], &y, 0.1, false).unwrap();
        assert_eq!(stepped, net);
    }

    #[test]
    fn gradient_step_last_layer_only_freezes_front() {
        let net = abs_network();
        let stepped = gradient_step(&net, &[1.5], &[9.0], 0.05, true).unwrap();
        assert_eq!(stepped.layers()[0], net.layers()[0]);
        assert_ne!(stepped.layers()[1], net.layers()[1]);
    }

    #[test]
    fn inn_build_and_containment() {
        let net = single_layer(-2.0, 0.0, Activation::Linear);
        let inn = build_inn(&net, &LayerDiff(vec![0.1])).unwrap();
        assert!((inn.layers()[0].weights_lo[(0, 0)] + 2.1).abs() < 1e-12);
        assert!((inn.layers()[0].weights_hi[(0, 0)] + 1.9).abs() < 1e-12);

        assert!(inn_contains(&inn, &net).unwrap());
        let edge = single_layer(-2.1, 0.0, Activation::Linear);
        assert!(inn_contains(&inn, &edge).unwrap());
        let outside = single_layer(-2.2, 0.0, Activation::Linear);
        assert!(!inn_contains(&inn, &outside).unwrap());
    }

    #[test]
    fn inn_degenerate_radius_equals_network() {
        let net = abs_network();
        let inn = build_inn(&net, &LayerDiff::zeros(2)).unwrap();
        assert_eq!(inn.layers()[0].weights_lo, net.layers()[0].weights);
        assert_eq!(inn.layers()[1].weights_hi, net.layers()[1].weights);
    }

    #[test]
    fn inn_bias_and_weight_offsets() {
        let net = Network::new(vec![Layer::new(
            array![[3.0]],
            array![1.0],
            Activation::Linear,
        )
        .unwrap()])
        .unwrap();
        let inn = build_inn(&net, &LayerDiff(vec![0.5])).unwrap();
        assert_eq!(inn.layers()[0].weights_lo[(0, 0)], 2.5);
        assert_eq!(inn.layers()[0].weights_hi[(0, 0)], 3.5);
        assert_eq!(inn.layers()[0].bias_lo[0], 0.5);
        assert_eq!(inn.layers()[0].bias_hi[0], 1.5);
    }

    #[test]
    fn lipschitz_examples() {
        assert_eq!(
            lipschitz_upper(&single_layer(2.0, 0.0, Activation::Linear)).0,
            2.0
        );
        let two = Network::new(vec![
            Layer::new(array![[1.0, 1.0], [0.5, -0.5]], array![0.0, 0.0], Activation::Relu)
                .unwrap(),
            Layer::new(array![[3.0, 0.0]], array![0.0], Activation::Linear).unwrap(),
        ])
        .unwrap();
        // Row sums: layer 1 -> 2, layer 2 -> 3.
        assert_eq!(lipschitz_upper(&two).0, 6.0);
        assert_eq!(
            lipschitz_upper(&single_layer(1.0, 0.0, Activation::Linear)).0,
            1.0
        );
    }

    #[test]
    fn json_round_trip_preserves_network() {
        let net = abs_network();
        let text = net.to_json();
        assert!(text.contains("\"activation\": \"relu\""));
        let back = Network::from_json(&text).unwrap();
        assert_eq!(back, net);

        let inn = build_inn(&net, &LayerDiff(vec![0.1, 0.2])).unwrap();
        let back = IntervalNetwork::from_json(&inn.to_json()).unwrap();
        assert_eq!(back, inn);
    }
}
