//! Finite-difference verification of the deep model's gradients.

use rand::Rng;

use super::backprop::{self, accumulate_gradient, block_offsets, param_blocks_mut, GradientMode};
use super::{init_params, per_example_loss, sample_negatives, Hyperparams};
use crate::corpus::{ItemId, ItemSet};
use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};
use crate::scorers::{dem_forward, sigmoid, DemParams};

/// Gradient of [`per_example_loss`] with respect to every parameter, in the
/// flat layout bias, pair readout, `(W, B)` per layer, readouts.
pub fn analytic_gradient(
    params: &DemParams,
    record: &ItemSet,
    negatives: &[ItemId],
    mode: GradientMode,
) -> Vec<f64> {
    let mut grad = vec![0.0; *block_offsets(params).last().unwrap()];
    let mut add = |t: ItemId, context: &ItemSet, present: bool| {
        let hidden = dem_forward(params, context);
        let p = sigmoid(params.score_with(t, context, &hidden));
        // dLoss/ds = sigmoid(s) - y
        let coef = if present { p - 1.0 } else { p };
        let grads = backprop::backward(params, t, &hidden, mode);
        accumulate_gradient(params, t, context, &hidden, &grads, coef, &mut grad);
    };
    for t in record.iter() {
        add(t, &record.without(t), true);
    }
    for &t in negatives {
        add(t, record, false);
    }
    grad
}

/// Central differences of [`per_example_loss`] on every coordinate.
pub fn numeric_gradient(
    params: &DemParams,
    record: &ItemSet,
    negatives: &[ItemId],
    epsilon: f64,
) -> Result<Vec<f64>> {
    let mut work = params.clone();
    let n_blocks = block_offsets(params).len() - 1;
    let mut grad = Vec::new();
    for b in 0..n_blocks {
        let len = param_blocks_mut(&mut work)[b].len();
        for j in 0..len {
            let orig = param_blocks_mut(&mut work)[b][j];
            param_blocks_mut(&mut work)[b][j] = orig + epsilon;
            let up = per_example_loss(&work, record, negatives)?;
            param_blocks_mut(&mut work)[b][j] = orig - epsilon;
            let down = per_example_loss(&work, record, negatives)?;
            param_blocks_mut(&mut work)[b][j] = orig;
            grad.push((up - down) / (2.0 * epsilon));
        }
    }
    Ok(grad)
}

/// Largest relative disagreement between analytic and numeric gradients,
/// `|a - n| / max(1e-8, |a| + |n|)`, over all coordinates.
pub fn gradient_check(
    params: &DemParams,
    record: &ItemSet,
    negatives: &[ItemId],
    epsilon: f64,
    mode: GradientMode,
) -> Result<f64> {
    if !(1e-7..=1e-3).contains(&epsilon) {
        return Err(Error::InvalidArgument(format!(
            "epsilon {epsilon} outside [1e-7, 1e-3]"
        )));
    }
    let analytic = analytic_gradient(params, record, negatives, mode);
    let numeric = numeric_gradient(params, record, negatives, epsilon)?;
    Ok(analytic
        .iter()
        .zip(&numeric)
        .map(|(a, n)| (a - n).abs() / (a.abs() + n.abs()).max(1e-8))
        .fold(0.0, f64::max))
}

/// A seeded test case for [`gradient_check`]: a deep model with random
/// biases and pair weights, a record of 2 to 6 items and 5 negatives.
pub fn random_check_instance(
    n_items: usize,
    layers: &[usize],
    seed: u64,
) -> Result<(DemParams, ItemSet, Vec<ItemId>)> {
    if n_items < 3 {
        return Err(Error::InvalidArgument("need at least 3 items".into()));
    }
    let hyper = Hyperparams {
        layer_sizes: layers.to_vec(),
        init_scale: 2.0,
        seed,
        ..Hyperparams::default()
    };
    hyper.validate()?;
    let mut p = init_params(n_items, &hyper);
    let mut rng = stream_rng(seed, Stream::Synthetic);
    p.bias.mapv_inplace(|_| rng.gen_range(-1.0..1.0));
    for i in 0..n_items {
        for j in 0..n_items {
            if i != j {
                p.pair_readout[[i, j]] = rng.gen_range(-1.0..1.0);
            }
        }
    }
    for layer in &mut p.layers {
        layer.bias.mapv_inplace(|_| rng.gen_range(-0.5..0.5));
    }
    let len = rng.gen_range(2..=6.min(n_items - 1));
    let ids = rand::seq::index::sample(&mut rng, n_items, len)
        .into_iter()
        .map(|i| i as u32);
    let record = ItemSet::new(ids, n_items)?;
    let negatives = sample_negatives(&record, 5, n_items, &mut rng)?;
    Ok((p, record, negatives))
}
