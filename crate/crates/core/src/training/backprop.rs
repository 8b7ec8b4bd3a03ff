//! Gradients of the deep embedding model's score.
//!
//! The score is a linear readout of every hidden layer, so the derivative
//! with respect to layer `l`'s activations collects the direct readout term
//! plus whatever flows back from layer `l + 1`:
//!
//! ```text
//! ds/dh_k = R_k[t]
//! ds/dh_l = R_l[t] + W_{l+1}^T (ds/dh_{l+1} * h_{l+1} * (1 - h_{l+1}))
//! ```

use ndarray::{Array1, Axis};

use crate::corpus::{ItemId, ItemSet};
use crate::scorers::{DemParams, HiddenState};

/// Selects the back-propagation recursion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GradientMode {
    #[default]
    Exact,
    /// Drops the term propagated from the layer above. Deliberately wrong;
    /// exists so the gradient checker can be shown to catch it.
    DropPropagated,
}

/// `ds/da_l` for every layer, where `a_l` is the pre-activation of layer `l`.
pub(crate) fn backward(
    params: &DemParams,
    t: ItemId,
    hidden: &HiddenState,
    mode: GradientMode,
) -> Vec<Array1<f64>> {
    let k = params.layers.len();
    let mut grads = vec![Array1::zeros(0); k];
    let mut upstream: Option<Array1<f64>> = None;
    for l in (0..k).rev() {
        let h = &hidden.activations[l];
        let mut d = params.readouts[l].row(t.index()).to_owned();
        if let (Some(up), GradientMode::Exact) = (&upstream, mode) {
            d += up;
        }
        d.zip_mut_with(h, |d, &h| *d *= h * (1.0 - h));
        upstream = (l > 0).then(|| params.layers[l].weights.t().dot(&d));
        grads[l] = d;
    }
    grads
}

/// Moves every parameter the score of `t` depends on by `coef * ds/dtheta`,
/// after shrinking the touched weight and readout entries by `decay`.
pub(crate) fn apply_step(
    params: &mut DemParams,
    t: ItemId,
    context: &ItemSet,
    hidden: &HiddenState,
    grads: &[Array1<f64>],
    coef: f64,
    decay: f64,
) {
    let ti = t.index();
    params.bias[ti] += coef;
    for i in context {
        let w = &mut params.pair_readout[[i.index(), ti]];
        *w = *w * decay + coef;
    }
    for (readout, h) in params.readouts.iter_mut().zip(&hidden.activations) {
        readout
            .row_mut(ti)
            .zip_mut_with(h, |r, &h| *r = *r * decay + coef * h);
    }
    for (l, (layer, g)) in params.layers.iter_mut().zip(grads).enumerate() {
        if l == 0 {
            for i in context {
                layer
                    .weights
                    .column_mut(i.index())
                    .zip_mut_with(g, |w, &g| *w = *w * decay + coef * g);
            }
        } else {
            let prev = &hidden.activations[l - 1];
            for (mut row, &g) in layer.weights.axis_iter_mut(Axis(0)).zip(g) {
                row.zip_mut_with(prev, |w, &h| *w = *w * decay + coef * g * h);
            }
        }
        layer.bias.scaled_add(coef, g);
    }
}

/// Start offsets of each parameter block in the flat layout used by
/// [`param_blocks_mut`]: bias, pair readout, then `(W, B)` per layer, then
/// the readouts.
pub(crate) fn block_offsets(params: &DemParams) -> Vec<usize> {
    let n = params.n_items();
    let mut sizes = vec![n, n * n];
    for layer in &params.layers {
        sizes.push(layer.weights.len());
        sizes.push(layer.bias.len());
    }
    sizes.extend(params.readouts.iter().map(|r| r.len()));
    let mut offsets = Vec::with_capacity(sizes.len() + 1);
    let mut acc = 0;
    offsets.push(0);
    for s in sizes {
        acc += s;
        offsets.push(acc);
    }
    offsets
}

/// Mutable views of all parameter blocks in flat-layout order.
pub(crate) fn param_blocks_mut(params: &mut DemParams) -> Vec<&mut [f64]> {
    let DemParams {
        bias,
        pair_readout,
        layers,
        readouts,
    } = params;
    let mut blocks: Vec<&mut [f64]> = vec![
        bias.as_slice_mut().expect("standard layout"),
        pair_readout.as_slice_mut().expect("standard layout"),
    ];
    for layer in layers.iter_mut() {
        blocks.push(layer.weights.as_slice_mut().expect("standard layout"));
        blocks.push(layer.bias.as_slice_mut().expect("standard layout"));
    }
    for r in readouts.iter_mut() {
        blocks.push(r.as_slice_mut().expect("standard layout"));
    }
    blocks
}

/// Adds `coef * ds/dtheta` into a flat gradient vector.
pub(crate) fn accumulate_gradient(
    params: &DemParams,
    t: ItemId,
    context: &ItemSet,
    hidden: &HiddenState,
    grads: &[Array1<f64>],
    coef: f64,
    out: &mut [f64],
) {
    let n = params.n_items();
    let k = params.layers.len();
    let offsets = block_offsets(params);
    let ti = t.index();

    out[offsets[0] + ti] += coef;
    for i in context {
        out[offsets[1] + i.index() * n + ti] += coef;
    }
    for l in 0..k {
        let w_off = offsets[2 + 2 * l];
        let b_off = offsets[3 + 2 * l];
        let g = &grads[l];
        let width = g.len();
        if l == 0 {
            for i in context {
                for r in 0..width {
                    out[w_off + r * n + i.index()] += coef * g[r];
                }
            }
        } else {
            let prev = &hidden.activations[l - 1];
            for r in 0..width {
                for (c, &h) in prev.iter().enumerate() {
                    out[w_off + r * prev.len() + c] += coef * g[r] * h;
                }
            }
        }
        for r in 0..width {
            out[b_off + r] += coef * g[r];
        }
        let r_off = offsets[2 + 2 * k + l];
        for (c, &h) in hidden.activations[l].iter().enumerate() {
            out[r_off + ti * width + c] += coef * h;
        }
    }
}
