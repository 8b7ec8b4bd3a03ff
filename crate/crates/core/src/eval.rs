//! Missing-item prediction: ranking, Top@K accuracy and cross-validation.

use std::cmp::Ordering;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::baselines::Baseline;
use crate::corpus::{mask_one_item, split_folds, Corpus, ItemId, ItemSet, MaskedRecord};
use crate::error::{Error, Result};
use crate::rng::child_seed;
use crate::scorers::Scorer;
use crate::training::{train, Hyperparams, ModelKind};

/// Top candidates for one context, best first.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    pub items: Vec<ItemId>,
    pub scores: Vec<f64>,
}

// Descending score, NaN last, ties to the smaller id.
fn rank_order(a: &(ItemId, f64), b: &(ItemId, f64)) -> Ordering {
    let key = |s: f64| if s.is_nan() { f64::NEG_INFINITY } else { s };
    key(b.1).total_cmp(&key(a.1)).then(a.0.cmp(&b.0))
}

/// The `k` best-scoring items outside `context`. Returns fewer than `k`
/// when there are not enough candidates.
pub fn rank_candidates<S: Scorer + ?Sized>(
    scorer: &S,
    context: &ItemSet,
    k: usize,
) -> Result<RankedList> {
    if k == 0 {
        return Err(Error::InvalidArgument("K must be at least 1".into()));
    }
    if context.span() > scorer.n_items() {
        return Err(Error::ItemOutOfRange {
            id: (context.span() - 1) as u64,
            n_items: scorer.n_items(),
        });
    }
    let candidates = context.complement(scorer.n_items());
    let scores = scorer.score_unchecked(context, &candidates);
    let mut pairs: Vec<(ItemId, f64)> = candidates.into_iter().zip(scores).collect();
    if k < pairs.len() {
        pairs.select_nth_unstable_by(k - 1, rank_order);
        pairs.truncate(k);
    }
    pairs.sort_unstable_by(rank_order);
    let (items, scores) = pairs.into_iter().unzip();
    Ok(RankedList { items, scores })
}

/// For each K in `ks`, whether each record's target lands in the top K.
/// Ranking is done once per record at the largest K.
pub fn topk_hits<S: Scorer + ?Sized>(
    masked: &[MaskedRecord],
    scorer: &S,
    ks: &[usize],
) -> Result<Vec<Vec<bool>>> {
    let max_k = ks.iter().copied().max().unwrap_or(1);
    let positions = masked
        .par_iter()
        .map(|m| {
            let ranked = rank_candidates(scorer, &m.context, max_k)?;
            debug_assert!(ranked.items.iter().all(|&i| !m.context.contains(i)));
            Ok(ranked.items.iter().position(|&i| i == m.target))
        })
        .collect::<Result<Vec<Option<usize>>>>()?;
    Ok(ks
        .iter()
        .map(|&k| positions.iter().map(|p| p.is_some_and(|p| p < k)).collect())
        .collect())
}

/// Fraction of masked records whose target is among the top `k`.
pub fn topk_accuracy<S: Scorer + ?Sized>(
    masked: &[MaskedRecord],
    scorer: &S,
    k: usize,
) -> Result<f64> {
    if masked.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    let hits = topk_hits(masked, scorer, &[k])?.remove(0);
    Ok(hits.iter().filter(|&&h| h).count() as f64 / masked.len() as f64)
}

/// Masks one item from every record with at least two items. The mask of
/// record `i` depends only on `seed` and `i`.
pub fn mask_records(corpus: &Corpus, indices: &[usize], seed: u64) -> Vec<MaskedRecord> {
    indices
        .iter()
        .filter(|&&i| corpus.records()[i].len() >= 2)
        .map(|&i| {
            mask_one_item(&corpus.records()[i], child_seed(seed, i as u64))
                .expect("record has two items")
        })
        .collect()
}

/// A method that can be fitted to a training corpus.
#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    Model { kind: ModelKind, hyper: Hyperparams },
    Baseline(Baseline),
}

impl Method {
    pub fn name(&self) -> String {
        match self {
            Method::Model { kind, hyper } => match kind {
                ModelKind::L1 => "l1".into(),
                ModelKind::Fvbm { .. } => "fvbm".into(),
                ModelKind::Lbl { dim, .. } => format!("lbl-{dim}"),
                ModelKind::Dem if hyper.layer_sizes.is_empty() => "dem-0".into(),
                ModelKind::Dem => {
                    let w: Vec<String> =
                        hyper.layer_sizes.iter().map(ToString::to_string).collect();
                    format!("dem-{}", w.join("x"))
                }
            },
            Method::Baseline(b) => b.name(),
        }
    }

    pub fn fit(&self, corpus: &Corpus) -> Result<Box<dyn Scorer>> {
        Ok(match self {
            Method::Model { kind, hyper } => Box::new(train(corpus, *kind, hyper)?.0),
            Method::Baseline(b) => Box::new(b.fit(corpus)),
        })
    }
}

/// Accuracy at one K.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KAccuracy {
    pub k: usize,
    pub mean: f64,
    /// Sample standard deviation across folds.
    pub std: f64,
    pub per_fold: Vec<f64>,
}

/// Result of evaluating one method.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub method: String,
    pub per_k: Vec<KAccuracy>,
    pub n_test: usize,
    pub wall_time: f64,
    /// Hit indicators per K, over all test records in fold order. Paired
    /// across methods evaluated with the same corpus, folds and seed.
    #[serde(skip)]
    pub hits: Vec<Vec<bool>>,
}

impl EvalReport {
    pub fn accuracy(&self, k: usize) -> Option<f64> {
        self.per_k.iter().find(|a| a.k == k).map(|a| a.mean)
    }

    pub const TSV_HEADER: &'static str = "model\tK\tmean\tstd\tn_test\tseconds";

    /// One TSV row per K. `with_timing = false` prints `-` for the seconds
    /// column so reports are byte-for-byte reproducible.
    pub fn tsv_rows(&self, with_timing: bool) -> Vec<String> {
        let secs = if with_timing {
            format!("{:.3}", self.wall_time)
        } else {
            "-".to_owned()
        };
        self.per_k
            .iter()
            .map(|a| {
                format!(
                    "{}\t{}\t{:.6}\t{:.6}\t{}\t{}",
                    self.method, a.k, a.mean, a.std, self.n_test, secs
                )
            })
            .collect()
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Scores an already fitted scorer on one masked test set.
pub fn evaluate_masked<S: Scorer + ?Sized>(
    name: &str,
    scorer: &S,
    masked: &[MaskedRecord],
    ks: &[usize],
) -> Result<EvalReport> {
    if masked.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    let start = Instant::now();
    let hits = topk_hits(masked, scorer, ks)?;
    let per_k = ks
        .iter()
        .zip(&hits)
        .map(|(&k, h)| {
            let acc = h.iter().filter(|&&x| x).count() as f64 / masked.len() as f64;
            KAccuracy {
                k,
                mean: acc,
                std: 0.0,
                per_fold: vec![acc],
            }
        })
        .collect();
    Ok(EvalReport {
        method: name.to_owned(),
        per_k,
        n_test: masked.len(),
        wall_time: start.elapsed().as_secs_f64(),
        hits,
    })
}

/// K-fold evaluation: train on all folds but one, mask one item in every
/// eligible record of the held-out fold, rank, and average over folds.
pub fn cross_validate(
    corpus: &Corpus,
    method: &Method,
    ks: &[usize],
    k_folds: usize,
    seed: u64,
) -> Result<EvalReport> {
    if ks.is_empty() || ks.contains(&0) {
        return Err(Error::InvalidArgument("K values must be positive".into()));
    }
    let start = Instant::now();
    let split = split_folds(corpus, k_folds, seed)?;
    let mut per_fold = vec![Vec::with_capacity(k_folds); ks.len()];
    let mut hits = vec![Vec::new(); ks.len()];
    let mut n_test = 0;
    for fold in 0..k_folds {
        let train_idx = split.train_indices(fold);
        let test_idx = split.test_indices(fold);
        debug_assert!(test_idx.iter().all(|i| train_idx.binary_search(i).is_err()));
        let scorer = method.fit(&corpus.subset(&train_idx))?;
        let masked = mask_records(corpus, &test_idx, child_seed(seed, 0x6d61_736b));
        if masked.is_empty() {
            return Err(Error::EmptyTestSet);
        }
        n_test += masked.len();
        let fold_hits = topk_hits(&masked, scorer.as_ref(), ks)?;
        for (j, h) in fold_hits.into_iter().enumerate() {
            per_fold[j].push(h.iter().filter(|&&x| x).count() as f64 / h.len() as f64);
            hits[j].extend(h);
        }
    }
    let per_k = ks
        .iter()
        .zip(per_fold)
        .map(|(&k, accs)| {
            let (mean, std) = mean_std(&accs);
            KAccuracy {
                k,
                mean,
                std,
                per_fold: accs,
            }
        })
        .collect();
    Ok(EvalReport {
        method: method.name(),
        per_k,
        n_test,
        wall_time: start.elapsed().as_secs_f64(),
        hits,
    })
}

/// Exact two-sided McNemar test on paired hit indicators.
pub fn mcnemar_significance(hits_a: &[bool], hits_b: &[bool]) -> Result<f64> {
    if hits_a.len() != hits_b.len() {
        return Err(Error::LengthMismatch(hits_a.len(), hits_b.len()));
    }
    let only_a = hits_a.iter().zip(hits_b).filter(|(&a, &b)| a && !b).count() as u64;
    let only_b = hits_a.iter().zip(hits_b).filter(|(&a, &b)| !a && b).count() as u64;
    mcnemar_exact(only_a, only_b)
}

/// Two-sided exact binomial p-value for `b` vs `c` discordant pairs:
/// `min(1, 2 * P[X <= min(b, c)])` with `X ~ Binomial(b + c, 1/2)`.
pub fn mcnemar_exact(b: u64, c: u64) -> Result<f64> {
    let n = b + c;
    if n == 0 {
        return Ok(1.0);
    }
    let k = b.min(c);
    // ln C(n, i) built incrementally, summed with a max shift
    let ln_half_n = n as f64 * 0.5f64.ln();
    let mut ln_terms = Vec::with_capacity(k as usize + 1);
    let mut ln_choose = 0.0;
    for i in 0..=k {
        if i > 0 {
            ln_choose += ((n - i + 1) as f64).ln() - (i as f64).ln();
        }
        ln_terms.push(ln_choose + ln_half_n);
    }
    let max = ln_terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tail = max.exp() * ln_terms.iter().map(|t| (t - max).exp()).sum::<f64>();
    Ok((2.0 * tail).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scorers::BiasParams;
    use ndarray::Array1;

    fn scorer(scores: &[f64]) -> BiasParams {
        BiasParams {
            bias: Array1::from(scores.to_vec()),
        }
    }

    #[test]
    fn ranking_by_score() {
        let s = scorer(&[0.1, 0.9, 0.5]);
        let r = rank_candidates(&s, &ItemSet::empty(), 2).unwrap();
        assert_eq!(r.items, vec![ItemId(1), ItemId(2)]);
        assert_eq!(r.scores, vec![0.9, 0.5]);
    }

    #[test]
    fn ties_go_to_smaller_id() {
        let s = scorer(&[1.0; 5]);
        let r = rank_candidates(&s, &ItemSet::empty(), 2).unwrap();
        assert_eq!(r.items, vec![ItemId(0), ItemId(1)]);
    }

    #[test]
    fn nearly_full_context() {
        let s = scorer(&[1.0, 2.0, 3.0]);
        let ctx = ItemSet::new([0u32, 2], 3).unwrap();
        let r = rank_candidates(&s, &ctx, 10).unwrap();
        assert_eq!(r.items, vec![ItemId(1)]);
    }

    #[test]
    fn nan_scores_rank_last() {
        let s = scorer(&[f64::NAN, -5.0, 0.0]);
        let r = rank_candidates(&s, &ItemSet::empty(), 3).unwrap();
        assert_eq!(r.items, vec![ItemId(2), ItemId(1), ItemId(0)]);
    }

    #[test]
    fn accuracy_indicator_average() {
        // 12 items, scores descending with id; target 0 ranks first, target
        // 10 ranks 11th once item 11 sits in the context.
        let scores: Vec<f64> = (0..12).map(|i| -(i as f64)).collect();
        let s = scorer(&scores);
        let masked = vec![
            MaskedRecord {
                context: ItemSet::new([11u32], 12).unwrap(),
                target: ItemId(0),
            },
            MaskedRecord {
                context: ItemSet::new([11u32], 12).unwrap(),
                target: ItemId(10),
            },
        ];
        assert_eq!(topk_accuracy(&masked, &s, 10).unwrap(), 0.5);
        assert_eq!(topk_accuracy(&masked, &s, 11).unwrap(), 1.0);
        assert_eq!(topk_accuracy(&masked, &s, 1).unwrap(), 0.5);
        assert!(matches!(
            topk_accuracy(&[], &s, 1),
            Err(Error::EmptyTestSet)
        ));
    }

    #[test]
    fn mcnemar_values() {
        assert_eq!(
            mcnemar_significance(&[true, false], &[true, false]).unwrap(),
            1.0
        );
        assert_eq!(mcnemar_exact(1, 0).unwrap(), 1.0);
        assert!(mcnemar_significance(&[true], &[true, false]).is_err());
        // discordant (25, 5): 2 * sum_{i<=5} C(30, i) / 2^30 = 348874 / 2^30
        let p = mcnemar_exact(25, 5).unwrap();
        assert!((p - 348_874.0 / 1_073_741_824.0).abs() < 1e-12, "{p}");
        assert!((p - 3.2e-4).abs() < 0.1e-4);
    }

    #[test]
    fn sample_std() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert_eq!(s, 1.0);
        assert_eq!(mean_std(&[0.4]), (0.4, 0.0));
    }
}
