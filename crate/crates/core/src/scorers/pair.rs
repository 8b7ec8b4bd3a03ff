use ndarray::{Array1, Array2};

use super::{ExplicitEnergy, Scorer};
use crate::corpus::{ItemId, ItemSet};
use crate::error::{Error, Result};

/// Pairwise (L2) model, the fully visible Boltzmann machine.
///
/// `pair[[i, t]]` is the weight that item `i` in the context adds to the
/// score of `t`. The full `N x N` matrix is stored. A tied model keeps it
/// symmetric and every SGD step updates both halves; an untied model treats
/// `pair[[i, t]]` and `pair[[t, i]]` as separate parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct PairParams {
    pub bias: Array1<f64>,
    pub pair: Array2<f64>,
    tied: bool,
}

impl PairParams {
    pub fn zeros(n_items: usize, tied: bool) -> Self {
        PairParams {
            bias: Array1::zeros(n_items),
            pair: Array2::zeros((n_items, n_items)),
            tied,
        }
    }

    /// A tied model. `pair` must be square, symmetric and zero on the diagonal.
    pub fn new(bias: Array1<f64>, pair: Array2<f64>) -> Result<Self> {
        Self::validate(&bias, &pair)?;
        let n = bias.len();
        for i in 0..n {
            for j in (i + 1)..n {
                if pair[[i, j]] != pair[[j, i]] {
                    return Err(Error::InvalidArgument(format!(
                        "pair weights not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(PairParams {
            bias,
            pair,
            tied: true,
        })
    }

    /// An untied model; `pair` need only be square with zero diagonal.
    pub fn untied(bias: Array1<f64>, pair: Array2<f64>) -> Result<Self> {
        Self::validate(&bias, &pair)?;
        Ok(PairParams {
            bias,
            pair,
            tied: false,
        })
    }

    fn validate(bias: &Array1<f64>, pair: &Array2<f64>) -> Result<()> {
        let n = bias.len();
        if pair.dim() != (n, n) {
            return Err(Error::InvalidArgument(format!(
                "pair matrix is {:?}, expected ({n}, {n})",
                pair.dim()
            )));
        }
        if (0..n).any(|i| pair[[i, i]] != 0.0) {
            return Err(Error::InvalidArgument(
                "pair matrix diagonal must be zero".into(),
            ));
        }
        Ok(())
    }

    pub fn is_tied(&self) -> bool {
        self.tied
    }

    pub fn n_items(&self) -> usize {
        self.bias.len()
    }
}

impl Scorer for PairParams {
    fn n_items(&self) -> usize {
        self.bias.len()
    }

    fn score_unchecked(&self, context: &ItemSet, candidates: &[ItemId]) -> Vec<f64> {
        candidates
            .iter()
            .map(|t| {
                let t = t.index();
                context
                    .iter()
                    .fold(self.bias[t], |acc, i| acc + self.pair[[i.index(), t]])
            })
            .collect()
    }
}

impl ExplicitEnergy for PairParams {
    /// `-sum_i bias[i] - sum_{i<j} pair[i][j]`, i.e. `-b.v - v'Wv/2`.
    /// Only the upper triangle is read.
    fn explicit_energy(&self, v: &ItemSet) -> f64 {
        let items = v.as_slice();
        let mut energy = 0.0;
        for (k, i) in items.iter().enumerate() {
            energy -= self.bias[i.index()];
            for j in &items[k + 1..] {
                energy -= self.pair[[i.index(), j.index()]];
            }
        }
        energy
    }
}
