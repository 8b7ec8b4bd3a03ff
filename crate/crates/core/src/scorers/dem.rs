use ndarray::{Array1, Array2};

use super::{sigmoid, PairParams, Scorer};
use crate::corpus::{ItemId, ItemSet};
use crate::error::{Error, Result};

/// One fully connected sigmoid layer, `h = sigmoid(weights . h_prev + bias)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    /// Shape `(width, previous width)`.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl DenseLayer {
    pub fn zeros(width: usize, prev: usize) -> Self {
        DenseLayer {
            weights: Array2::zeros((width, prev)),
            bias: Array1::zeros(width),
        }
    }

    pub fn width(&self) -> usize {
        self.bias.len()
    }
}

/// Deep embedding model.
///
/// The score of item `t` given context `c` is
///
/// ```text
/// bias[t] + sum_{i in c} pair_readout[i][t] + sum_l readouts[l].row(t) . h_l
/// ```
///
/// where `h_1 = sigmoid(W1 v + B1)` for the indicator vector `v` of `c` and
/// `h_l = sigmoid(Wl h_{l-1} + Bl)` above it. Row `t` of the readouts,
/// concatenated over layers, is item `t`'s embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct DemParams {
    pub bias: Array1<f64>,
    /// `N x N`, zero diagonal, not symmetric in general.
    pub pair_readout: Array2<f64>,
    pub layers: Vec<DenseLayer>,
    /// One `N x width_l` matrix per layer.
    pub readouts: Vec<Array2<f64>>,
}

/// Hidden activations `h_1..h_k` for one context.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenState {
    pub activations: Vec<Array1<f64>>,
}

impl DemParams {
    /// All-zero parameters for `n_items` items and the given hidden widths.
    pub fn zeros(n_items: usize, layer_sizes: &[usize]) -> Self {
        let mut layers = Vec::with_capacity(layer_sizes.len());
        let mut prev = n_items;
        for &w in layer_sizes {
            layers.push(DenseLayer::zeros(w, prev));
            prev = w;
        }
        DemParams {
            bias: Array1::zeros(n_items),
            pair_readout: Array2::zeros((n_items, n_items)),
            readouts: layer_sizes
                .iter()
                .map(|&w| Array2::zeros((n_items, w)))
                .collect(),
            layers,
        }
    }

    /// A zero-layer model scoring exactly like `pair`.
    pub fn from_pair(pair: &PairParams) -> Self {
        DemParams {
            bias: pair.bias.clone(),
            pair_readout: pair.pair.clone(),
            layers: Vec::new(),
            readouts: Vec::new(),
        }
    }

    pub fn n_items(&self) -> usize {
        self.bias.len()
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        self.layers.iter().map(DenseLayer::width).collect()
    }

    /// Total embedding width, the sum of the hidden widths.
    pub fn embedding_dim(&self) -> usize {
        self.layers.iter().map(DenseLayer::width).sum()
    }

    /// Item `t`'s readout rows concatenated in layer order.
    pub fn embedding(&self, t: ItemId) -> Vec<f64> {
        self.readouts
            .iter()
            .flat_map(|r| r.row(t.index()).to_vec())
            .collect()
    }

    /// Checks that all shapes chain and the pair diagonal is zero.
    pub fn validate(&self) -> Result<()> {
        let n = self.n_items();
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.pair_readout.dim() != (n, n) {
            return bad(format!(
                "pair_readout is {:?}, expected ({n}, {n})",
                self.pair_readout.dim()
            ));
        }
        if (0..n).any(|i| self.pair_readout[[i, i]] != 0.0) {
            return bad("pair_readout diagonal must be zero".into());
        }
        if self.readouts.len() != self.layers.len() {
            return bad("one readout per layer required".into());
        }
        let mut prev = n;
        for (l, (layer, readout)) in self.layers.iter().zip(&self.readouts).enumerate() {
            let w = layer.width();
            if layer.weights.dim() != (w, prev) {
                return bad(format!(
                    "layer {l} weights are {:?}, expected ({w}, {prev})",
                    layer.weights.dim()
                ));
            }
            if readout.dim() != (n, w) {
                return bad(format!(
                    "readout {l} is {:?}, expected ({n}, {w})",
                    readout.dim()
                ));
            }
            prev = w;
        }
        Ok(())
    }

    /// Score of `t` given a context and its precomputed hidden state.
    pub(crate) fn score_with(&self, t: ItemId, context: &ItemSet, hidden: &HiddenState) -> f64 {
        let t = t.index();
        let mut s = context.iter().fold(self.bias[t], |acc, i| {
            acc + self.pair_readout[[i.index(), t]]
        });
        for (readout, h) in self.readouts.iter().zip(&hidden.activations) {
            s += readout.row(t).dot(h);
        }
        s
    }
}

/// Forward pass. The first layer sums only the weight columns of items in
/// the context, so its cost is `O(|context| * width_1)`.
pub fn dem_forward(params: &DemParams, context: &ItemSet) -> HiddenState {
    let mut activations: Vec<Array1<f64>> = Vec::with_capacity(params.layers.len());
    for (l, layer) in params.layers.iter().enumerate() {
        let mut pre = layer.bias.clone();
        match activations.last() {
            None => {
                for i in context {
                    pre += &layer.weights.column(i.index());
                }
            }
            Some(prev) => pre += &layer.weights.dot(prev),
        }
        debug_assert_eq!(activations.len(), l);
        pre.mapv_inplace(sigmoid);
        activations.push(pre);
    }
    HiddenState { activations }
}

impl Scorer for DemParams {
    fn n_items(&self) -> usize {
        self.bias.len()
    }

    fn score_unchecked(&self, context: &ItemSet, candidates: &[ItemId]) -> Vec<f64> {
        let hidden = dem_forward(self, context);
        candidates
            .iter()
            .map(|&t| self.score_with(t, context, &hidden))
            .collect()
    }
}
