use ndarray::Array1;

use super::{ExplicitEnergy, Scorer};
use crate::corpus::{ItemId, ItemSet};

/// Independent-items (L1) model.
///
/// `bias[t]` is the log-odds of item `t` being present, so the score does
/// not depend on the context at all.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasParams {
    pub bias: Array1<f64>,
}

impl BiasParams {
    pub fn zeros(n_items: usize) -> Self {
        BiasParams {
            bias: Array1::zeros(n_items),
        }
    }

    /// Sets each bias to the logit of the given presence probability.
    pub fn from_probabilities(p: &[f64]) -> Self {
        BiasParams {
            bias: p.iter().map(|&p| (p / (1.0 - p)).ln()).collect(),
        }
    }

    pub fn n_items(&self) -> usize {
        self.bias.len()
    }
}

impl Scorer for BiasParams {
    fn n_items(&self) -> usize {
        self.bias.len()
    }

    fn score_unchecked(&self, _context: &ItemSet, candidates: &[ItemId]) -> Vec<f64> {
        candidates.iter().map(|t| self.bias[t.index()]).collect()
    }
}

impl ExplicitEnergy for BiasParams {
    fn explicit_energy(&self, v: &ItemSet) -> f64 {
        -v.iter().map(|i| self.bias[i.index()]).sum::<f64>()
    }
}
