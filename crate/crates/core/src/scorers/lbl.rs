use ndarray::{Array1, Array2};

use super::Scorer;
use crate::corpus::{ItemId, ItemSet};

/// Log-bilinear model without position transforms.
///
/// `score(t, c) = bias[t] + phi_t . sum_{i in c} phi_i`, where `phi_t` is row
/// `t` of `embed`. The bias term is skipped when `use_bias` is false.
#[derive(Debug, Clone, PartialEq)]
pub struct LblParams {
    pub embed: Array2<f64>,
    pub bias: Array1<f64>,
    pub use_bias: bool,
}

impl LblParams {
    pub fn n_items(&self) -> usize {
        self.embed.nrows()
    }

    pub fn dim(&self) -> usize {
        self.embed.ncols()
    }

    /// Sum of the context embeddings.
    pub(crate) fn context_vector(&self, context: &ItemSet) -> Array1<f64> {
        let mut u = Array1::zeros(self.dim());
        for i in context {
            u += &self.embed.row(i.index());
        }
        u
    }

    pub(crate) fn score_with(&self, t: ItemId, u: &Array1<f64>) -> f64 {
        let b = if self.use_bias {
            self.bias[t.index()]
        } else {
            0.0
        };
        b + self.embed.row(t.index()).dot(u)
    }
}

impl Scorer for LblParams {
    fn n_items(&self) -> usize {
        self.embed.nrows()
    }

    fn score_unchecked(&self, context: &ItemSet, candidates: &[ItemId]) -> Vec<f64> {
        let u = self.context_vector(context);
        candidates.iter().map(|&t| self.score_with(t, &u)).collect()
    }
}
