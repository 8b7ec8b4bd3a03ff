//! Dynamic-energy scorers.
//!
//! A scorer maps an item `t` and a context (the other items present) to a
//! score `s(t, context)` with `p(t present | context) = sigmoid(s)`. Scores
//! are in "higher means more likely" convention: for models with an explicit
//! energy, `s(t, c) = E(c) - E(c + t)`.

mod bias;
mod dem;
mod lbl;
mod pair;

pub use bias::BiasParams;
pub use dem::{dem_forward, DemParams, DenseLayer, HiddenState};
pub use lbl::LblParams;
pub use pair::PairParams;

use crate::corpus::{ItemId, ItemSet};
use crate::error::{Error, Result};

/// Logistic function, stable for large `|x|`.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln sigmoid(x)` without underflow for very negative `x`.
#[inline]
pub fn ln_sigmoid(x: f64) -> f64 {
    -((-x.abs()).exp().ln_1p() + (-x).max(0.0))
}

/// Checks that every id is in range and that `candidates` avoid `context`.
pub(crate) fn check_query(n_items: usize, context: &ItemSet, candidates: &[ItemId]) -> Result<()> {
    if context.span() > n_items {
        return Err(Error::ItemOutOfRange {
            id: (context.span() - 1) as u64,
            n_items,
        });
    }
    for &t in candidates {
        if t.index() >= n_items {
            return Err(Error::ItemOutOfRange {
                id: t.0 as u64,
                n_items,
            });
        }
        if context.contains(t) {
            return Err(Error::ContextOverlap { item: t.0 });
        }
    }
    Ok(())
}

/// Anything that can rank candidate items given a context.
pub trait Scorer: Sync {
    fn n_items(&self) -> usize;

    /// Scores `candidates` against `context` without validating the query.
    ///
    /// Implementations must return exactly what one-candidate calls would.
    fn score_unchecked(&self, context: &ItemSet, candidates: &[ItemId]) -> Vec<f64>;

    fn score(&self, t: ItemId, context: &ItemSet) -> Result<f64> {
        check_query(self.n_items(), context, &[t])?;
        Ok(self.score_unchecked(context, &[t])[0])
    }

    fn score_all(&self, context: &ItemSet, candidates: &[ItemId]) -> Result<Vec<f64>> {
        check_query(self.n_items(), context, candidates)?;
        Ok(self.score_unchecked(context, candidates))
    }
}

/// `p(t present | context)`.
pub fn conditional_probability<S: Scorer + ?Sized>(
    scorer: &S,
    t: ItemId,
    context: &ItemSet,
) -> Result<f64> {
    scorer.score(t, context).map(sigmoid)
}

/// Models with a closed-form global energy `E(v)`.
pub trait ExplicitEnergy {
    fn explicit_energy(&self, v: &ItemSet) -> f64;
}

/// Conditional probability computed from two energy evaluations,
/// `sigmoid(E(context) - E(context + t))`. Independent of the score path.
pub fn oracle_conditional<E: ExplicitEnergy + ?Sized>(
    params: &E,
    t: ItemId,
    context: &ItemSet,
) -> f64 {
    sigmoid(params.explicit_energy(context) - params.explicit_energy(&context.with(t)))
}

/// A trained model of any supported kind.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Bias(BiasParams),
    Pair(PairParams),
    Lbl(LblParams),
    Dem(DemParams),
}

impl Model {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Model::Bias(_) => "l1",
            Model::Pair(_) => "fvbm",
            Model::Lbl(_) => "lbl",
            Model::Dem(_) => "dem",
        }
    }
}

impl Scorer for Model {
    fn n_items(&self) -> usize {
        match self {
            Model::Bias(p) => p.n_items(),
            Model::Pair(p) => p.n_items(),
            Model::Lbl(p) => p.n_items(),
            Model::Dem(p) => p.n_items(),
        }
    }

    fn score_unchecked(&self, context: &ItemSet, candidates: &[ItemId]) -> Vec<f64> {
        match self {
            Model::Bias(p) => p.score_unchecked(context, candidates),
            Model::Pair(p) => p.score_unchecked(context, candidates),
            Model::Lbl(p) => p.score_unchecked(context, candidates),
            Model::Dem(p) => p.score_unchecked(context, candidates),
        }
    }
}
