//! Maximum pseudo-likelihood training with negative sampling.
//!
//! For every record, each present item is a positive example scored against
//! the rest of the record, and `T` items drawn uniformly from outside the
//! record are negatives scored against the whole record. Each example moves
//! the parameters along the gradient of its log-likelihood with residual
//! `y - sigmoid(score)`.

mod backprop;
pub mod checkpoint;
mod gradcheck;

use std::time::Instant;

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::Rng;

pub use backprop::GradientMode;
pub use gradcheck::{analytic_gradient, gradient_check, numeric_gradient, random_check_instance};

use crate::corpus::{Corpus, ItemId, ItemSet};
use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};
use crate::scorers::{
    dem_forward, ln_sigmoid, sigmoid, BiasParams, DemParams, LblParams, Model, PairParams, Scorer,
};

/// SGD settings. None of these values come with the model definition; the
/// defaults are simply ones that train the synthetic fixtures reliably.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparams {
    pub learning_rate: f64,
    /// Learning-rate multiplier applied after every epoch.
    pub lr_decay: f64,
    /// Negatives drawn per record.
    pub negatives: usize,
    pub epochs: usize,
    /// Hidden widths of the deep model, bottom first.
    pub layer_sizes: Vec<usize>,
    pub init_scale: f64,
    pub weight_decay: f64,
    /// Weight each negative by `(N - |record|) / T` so the sampled sum is an
    /// unbiased estimate of the sum over all absent items.
    pub reweight_negatives: bool,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            learning_rate: 0.05,
            lr_decay: 0.95,
            negatives: 5,
            epochs: 20,
            layer_sizes: Vec::new(),
            init_scale: 1.0,
            weight_decay: 1e-6,
            reweight_negatives: false,
            seed: 0,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_owned()));
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return bad("learning rate must be positive");
        }
        if !(0.0..=1.0).contains(&self.lr_decay) {
            return bad("lr decay must be in [0, 1]");
        }
        if self.init_scale.is_nan() || self.init_scale < 0.0 {
            return bad("init scale must be non-negative");
        }
        if self.weight_decay.is_nan() || self.weight_decay < 0.0 {
            return bad("weight decay must be non-negative");
        }
        if self.layer_sizes.contains(&0) {
            return bad("layer widths must be positive");
        }
        Ok(())
    }
}

/// Which model family to train.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    /// Independent items.
    L1,
    /// Pairwise model; `tied` keeps the weight matrix symmetric.
    Fvbm { tied: bool },
    /// Log-bilinear embeddings of width `dim`.
    Lbl { dim: usize, use_bias: bool },
    /// Deep embedding model with `Hyperparams::layer_sizes` hidden layers.
    Dem,
}

/// Per-epoch record of a training run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingTrace {
    /// Mean loss per record, accumulated during the epoch.
    pub epoch_losses: Vec<f64>,
    /// Seconds spent in each epoch.
    pub wall_times: Vec<f64>,
}

/// Parses `AxBxC` into hidden widths; the empty string means no layers.
pub fn parse_layer_spec(spec: &str) -> Result<Vec<usize>> {
    let spec = spec.trim();
    if spec.is_empty() {
        return Ok(Vec::new());
    }
    spec.split(['x', 'X'])
        .map(|w| match w.trim().parse::<usize>() {
            Ok(v) if v > 0 => Ok(v),
            _ => Err(Error::LayerSpec(spec.to_owned())),
        })
        .collect()
}

fn uniform_fill<R: Rng>(rows: usize, cols: usize, scale: f64, rng: &mut R) -> Array2<f64> {
    let a = scale * (6.0 / (rows + cols) as f64).sqrt();
    if a == 0.0 {
        return Array2::zeros((rows, cols));
    }
    Array2::from_shape_simple_fn((rows, cols), || rng.gen_range(-a..=a))
}

/// Deep-model initialization: zero biases and pair readout, Glorot-uniform
/// weights and readouts scaled by `init_scale`.
pub fn init_params(n_items: usize, hyper: &Hyperparams) -> DemParams {
    let mut rng = stream_rng(hyper.seed, Stream::Init);
    let mut params = DemParams::zeros(n_items, &hyper.layer_sizes);
    for layer in &mut params.layers {
        let (rows, cols) = layer.weights.dim();
        layer.weights = uniform_fill(rows, cols, hyper.init_scale, &mut rng);
    }
    for readout in &mut params.readouts {
        let (rows, cols) = readout.dim();
        *readout = uniform_fill(rows, cols, hyper.init_scale, &mut rng);
    }
    params
}

/// Initial parameters for any model kind.
pub fn init_model(kind: ModelKind, n_items: usize, hyper: &Hyperparams) -> Model {
    match kind {
        ModelKind::L1 => Model::Bias(BiasParams::zeros(n_items)),
        ModelKind::Fvbm { tied } => Model::Pair(PairParams::zeros(n_items, tied)),
        ModelKind::Lbl { dim, use_bias } => {
            let mut rng = stream_rng(hyper.seed, Stream::Init);
            Model::Lbl(LblParams {
                embed: uniform_fill(n_items, dim, hyper.init_scale, &mut rng),
                bias: Array1::zeros(n_items),
                use_bias,
            })
        }
        ModelKind::Dem => Model::Dem(init_params(n_items, hyper)),
    }
}

/// Draws `count` items uniformly (with replacement) from outside `record`.
pub fn sample_negatives<R: Rng>(
    record: &ItemSet,
    count: usize,
    n_items: usize,
    rng: &mut R,
) -> Result<Vec<ItemId>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    if record.len() >= n_items {
        return Err(Error::EmptyComplement);
    }
    if record.len() * 2 > n_items {
        let complement = record.complement(n_items);
        return Ok((0..count)
            .map(|_| complement[rng.gen_range(0..complement.len())])
            .collect());
    }
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let t = ItemId(rng.gen_range(0..n_items as u32));
        if !record.contains(t) {
            out.push(t);
        }
    }
    Ok(out)
}

/// Negative log pseudo-likelihood of one record with a fixed negative set.
pub fn per_example_loss<S: Scorer + ?Sized>(
    scorer: &S,
    record: &ItemSet,
    negatives: &[ItemId],
) -> Result<f64> {
    let mut loss = 0.0;
    for t in record.iter() {
        let s = scorer.score(t, &record.without(t))?;
        loss -= ln_sigmoid(s);
    }
    let s = scorer.score_all(record, negatives)?;
    loss -= s.iter().map(|&s| ln_sigmoid(-s)).sum::<f64>();
    Ok(loss)
}

/// One SGD example.
#[derive(Debug, Clone, Copy)]
pub struct Step {
    pub learning_rate: f64,
    pub weight_decay: f64,
    /// Multiplies the residual and the reported loss.
    pub weight: f64,
}

impl Step {
    fn decay(&self) -> f64 {
        1.0 - self.learning_rate * self.weight_decay
    }
}

/// Models trainable one example at a time.
pub trait SgdModel: Scorer {
    /// Scores `t` against `context`, takes one ascent step on
    /// `weight * ln p(v_t = present | context)` and returns the example's
    /// weighted loss before the step.
    fn sgd_term(&mut self, t: ItemId, context: &ItemSet, present: bool, step: &Step) -> f64;
}

fn residual(s: f64, present: bool) -> (f64, f64) {
    if present {
        (1.0 - sigmoid(s), -ln_sigmoid(s))
    } else {
        (-sigmoid(s), -ln_sigmoid(-s))
    }
}

impl SgdModel for BiasParams {
    fn sgd_term(&mut self, t: ItemId, _context: &ItemSet, present: bool, step: &Step) -> f64 {
        let (delta, loss) = residual(self.bias[t.index()], present);
        self.bias[t.index()] += step.learning_rate * step.weight * delta;
        step.weight * loss
    }
}

impl SgdModel for PairParams {
    fn sgd_term(&mut self, t: ItemId, context: &ItemSet, present: bool, step: &Step) -> f64 {
        let ti = t.index();
        let s = self.score_unchecked(context, &[t])[0];
        let (delta, loss) = residual(s, present);
        let coef = step.learning_rate * step.weight * delta;
        let decay = step.decay();
        self.bias[ti] += coef;
        let tied = self.is_tied();
        for i in context {
            let w = self.pair[[i.index(), ti]] * decay + coef;
            self.pair[[i.index(), ti]] = w;
            if tied {
                self.pair[[ti, i.index()]] = w;
            }
        }
        step.weight * loss
    }
}

impl SgdModel for LblParams {
    fn sgd_term(&mut self, t: ItemId, context: &ItemSet, present: bool, step: &Step) -> f64 {
        let ti = t.index();
        let u = self.context_vector(context);
        let (delta, loss) = residual(self.score_with(t, &u), present);
        let coef = step.learning_rate * step.weight * delta;
        let decay = step.decay();
        let phi_t = self.embed.row(ti).to_owned();
        if self.use_bias {
            self.bias[ti] += coef;
        }
        self.embed
            .row_mut(ti)
            .zip_mut_with(&u, |p, &u| *p = *p * decay + coef * u);
        for i in context {
            self.embed
                .row_mut(i.index())
                .zip_mut_with(&phi_t, |p, &q| *p = *p * decay + coef * q);
        }
        step.weight * loss
    }
}

impl SgdModel for DemParams {
    fn sgd_term(&mut self, t: ItemId, context: &ItemSet, present: bool, step: &Step) -> f64 {
        let hidden = dem_forward(self, context);
        let (delta, loss) = residual(self.score_with(t, context, &hidden), present);
        let grads = backprop::backward(self, t, &hidden, GradientMode::Exact);
        let coef = step.learning_rate * step.weight * delta;
        backprop::apply_step(self, t, context, &hidden, &grads, coef, step.decay());
        step.weight * loss
    }
}

impl SgdModel for Model {
    fn sgd_term(&mut self, t: ItemId, context: &ItemSet, present: bool, step: &Step) -> f64 {
        match self {
            Model::Bias(p) => p.sgd_term(t, context, present, step),
            Model::Pair(p) => p.sgd_term(t, context, present, step),
            Model::Lbl(p) => p.sgd_term(t, context, present, step),
            Model::Dem(p) => p.sgd_term(t, context, present, step),
        }
    }
}

/// Processes one record: every present item against its leave-one-out
/// context, then `hyper.negatives` sampled absent items against the whole
/// record. Returns the summed pre-update loss of those examples.
pub fn sgd_update<M: SgdModel + ?Sized, R: Rng>(
    model: &mut M,
    record: &ItemSet,
    hyper: &Hyperparams,
    rng: &mut R,
) -> f64 {
    let n = model.n_items();
    let mut step = Step {
        learning_rate: hyper.learning_rate,
        weight_decay: hyper.weight_decay,
        weight: 1.0,
    };
    let mut loss = 0.0;
    for t in record.iter() {
        loss += model.sgd_term(t, &record.without(t), true, &step);
    }
    if record.len() < n && hyper.negatives > 0 {
        let negatives =
            sample_negatives(record, hyper.negatives, n, rng).expect("complement is non-empty");
        if hyper.reweight_negatives {
            step.weight = (n - record.len()) as f64 / hyper.negatives as f64;
        }
        for t in negatives {
            loss += model.sgd_term(t, record, false, &step);
        }
    }
    loss
}

/// Runs `hyper.epochs` passes over `corpus` on an already initialized model.
///
/// Record order is reshuffled every epoch and the learning rate is
/// multiplied by `lr_decay` after each one.
pub fn train_model<M: SgdModel + ?Sized>(
    model: &mut M,
    corpus: &Corpus,
    hyper: &Hyperparams,
) -> TrainingTrace {
    let mut shuffle_rng = stream_rng(hyper.seed, Stream::Shuffle);
    let mut neg_rng = stream_rng(hyper.seed, Stream::Negatives);
    let mut trace = TrainingTrace::default();
    let mut epoch_hyper = hyper.clone();
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    for _ in 0..hyper.epochs {
        let start = Instant::now();
        order.shuffle(&mut shuffle_rng);
        let mut total = 0.0;
        for &r in &order {
            total += sgd_update(model, &corpus.records()[r], &epoch_hyper, &mut neg_rng);
        }
        trace.epoch_losses.push(total / corpus.len().max(1) as f64);
        trace.wall_times.push(start.elapsed().as_secs_f64());
        epoch_hyper.learning_rate *= hyper.lr_decay;
    }
    trace
}

/// Initializes a model of `kind` and trains it on `corpus`.
pub fn train(
    corpus: &Corpus,
    kind: ModelKind,
    hyper: &Hyperparams,
) -> Result<(Model, TrainingTrace)> {
    hyper.validate()?;
    if corpus.is_empty() && hyper.epochs > 0 {
        return Err(Error::InvalidArgument(
            "cannot train on an empty corpus".into(),
        ));
    }
    let mut model = init_model(kind, corpus.n_items(), hyper);
    let trace = train_model(&mut model, corpus, hyper);
    Ok((model, trace))
}
