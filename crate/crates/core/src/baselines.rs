//! Co-occurrence heuristics: co-visiting graph (CVG), its frequency
//! normalized variant, and local random walks over the same graph.

use std::collections::HashMap;
use std::str::FromStr;

use crate::corpus::{Corpus, ItemId, ItemSet};
use crate::error::{Error, Result};
use crate::scorers::Scorer;

/// Symmetric item co-occurrence counts.
#[derive(Debug, Clone, PartialEq)]
pub struct CovisitGraph {
    /// Row `i`: `(j, count)` pairs with `count > 0`, sorted by `j`.
    rows: Vec<Vec<(ItemId, u32)>>,
    item_freq: Vec<u64>,
}

impl CovisitGraph {
    pub fn n_items(&self) -> usize {
        self.item_freq.len()
    }

    /// Number of records containing both `i` and `j` (zero when `i == j`).
    pub fn count(&self, i: ItemId, j: ItemId) -> u32 {
        let row = &self.rows[i.index()];
        row.binary_search_by_key(&j, |&(k, _)| k)
            .map_or(0, |pos| row[pos].1)
    }

    pub fn neighbours(&self, i: ItemId) -> &[(ItemId, u32)] {
        &self.rows[i.index()]
    }

    pub fn item_freq(&self) -> &[u64] {
        &self.item_freq
    }

    /// Weighted degree of `i`.
    pub fn degree(&self, i: ItemId) -> u64 {
        self.rows[i.index()].iter().map(|&(_, c)| c as u64).sum()
    }
}

/// Counts, for every unordered item pair, the records containing both.
pub fn build_covisit(corpus: &Corpus) -> CovisitGraph {
    let n = corpus.n_items();
    let mut acc: Vec<HashMap<u32, u32>> = vec![HashMap::new(); n];
    let mut item_freq = vec![0u64; n];
    for r in corpus.records() {
        let items = r.as_slice();
        for (k, &i) in items.iter().enumerate() {
            item_freq[i.index()] += 1;
            for &j in &items[k + 1..] {
                *acc[i.index()].entry(j.0).or_default() += 1;
                *acc[j.index()].entry(i.0).or_default() += 1;
            }
        }
    }
    let rows = acc
        .into_iter()
        .map(|m| {
            let mut row: Vec<(ItemId, u32)> = m.into_iter().map(|(j, c)| (ItemId(j), c)).collect();
            row.sort_unstable();
            row
        })
        .collect();
    CovisitGraph { rows, item_freq }
}

/// Sum of co-occurrence counts between the context and `t`.
pub fn cvg_score(graph: &CovisitGraph, context: &ItemSet, t: ItemId) -> f64 {
    context.iter().map(|i| graph.count(i, t) as f64).sum()
}

/// How NormCVG divides an edge weight `count(i, t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    /// `sqrt(freq(i) * freq(t))`
    #[default]
    Cosine,
    /// `freq(t)`
    Target,
    /// `freq(i)`
    Source,
}

impl FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(Normalization::Cosine),
            "target" => Ok(Normalization::Target),
            "source" => Ok(Normalization::Source),
            other => Err(Error::InvalidArgument(format!("normalization {other:?}"))),
        }
    }
}

fn normalized_weight(
    graph: &CovisitGraph,
    i: ItemId,
    t: ItemId,
    count: u32,
    norm: Normalization,
) -> f64 {
    let fi = graph.item_freq[i.index()] as f64;
    let ft = graph.item_freq[t.index()] as f64;
    let denom = match norm {
        Normalization::Cosine => (fi * ft).sqrt(),
        Normalization::Target => ft,
        Normalization::Source => fi,
    };
    if count == 0 || denom == 0.0 {
        0.0
    } else {
        count as f64 / denom
    }
}

/// CVG with each edge divided by the chosen frequency normalizer.
pub fn normcvg_score(
    graph: &CovisitGraph,
    context: &ItemSet,
    t: ItemId,
    norm: Normalization,
) -> f64 {
    context
        .iter()
        .map(|i| normalized_weight(graph, i, t, graph.count(i, t), norm))
        .sum()
}

/// Whether LRW reports the accumulated visiting mass or only the last step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WalkScore {
    #[default]
    Accumulated,
    FinalStep,
}

/// Mass distribution after each of `steps` walk steps started from the
/// context indicator, on the row-normalized co-occurrence graph.
fn walk(graph: &CovisitGraph, context: &ItemSet, steps: usize, mode: WalkScore) -> Vec<f64> {
    let n = graph.n_items();
    let mut x = vec![0.0; n];
    for i in context {
        x[i.index()] += 1.0;
    }
    let mut total = vec![0.0; n];
    for s in 0..steps {
        let mut next = vec![0.0; n];
        for (i, &mass) in x.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            let id = ItemId(i as u32);
            let degree = graph.degree(id);
            if degree == 0 {
                continue;
            }
            let scale = mass / degree as f64;
            for &(j, c) in graph.neighbours(id) {
                next[j.index()] += scale * c as f64;
            }
        }
        x = next;
        if mode == WalkScore::Accumulated || s + 1 == steps {
            for (acc, v) in total.iter_mut().zip(&x) {
                *acc += v;
            }
        }
    }
    total
}

/// Probability mass a walker started from the context places on `t`,
/// summed over steps `1..=steps` (or at the last step only).
pub fn lrw_score(
    graph: &CovisitGraph,
    context: &ItemSet,
    t: ItemId,
    steps: usize,
    mode: WalkScore,
) -> f64 {
    walk(graph, context, steps, mode)[t.index()]
}

/// Row `i` of the walk's transition matrix.
pub fn transition_row(graph: &CovisitGraph, i: ItemId) -> Vec<(ItemId, f64)> {
    let degree = graph.degree(i) as f64;
    graph
        .neighbours(i)
        .iter()
        .map(|&(j, c)| (j, c as f64 / degree))
        .collect()
}

/// A baseline method, before fitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Baseline {
    Cvg,
    NormCvg(Normalization),
    Lrw { steps: usize, mode: WalkScore },
}

impl Baseline {
    pub fn name(&self) -> String {
        match self {
            Baseline::Cvg => "cvg".into(),
            Baseline::NormCvg(_) => "normcvg".into(),
            Baseline::Lrw { steps, .. } => format!("lrw{steps}"),
        }
    }

    pub fn fit(&self, corpus: &Corpus) -> BaselineScorer {
        BaselineScorer {
            graph: build_covisit(corpus),
            method: *self,
        }
    }
}

/// A baseline bound to the graph of its training corpus.
#[derive(Debug, Clone)]
pub struct BaselineScorer {
    pub graph: CovisitGraph,
    pub method: Baseline,
}

impl Scorer for BaselineScorer {
    fn n_items(&self) -> usize {
        self.graph.n_items()
    }

    fn score_unchecked(&self, context: &ItemSet, candidates: &[ItemId]) -> Vec<f64> {
        let g = &self.graph;
        match self.method {
            Baseline::Cvg => candidates
                .iter()
                .map(|&t| cvg_score(g, context, t))
                .collect(),
            Baseline::NormCvg(norm) => candidates
                .iter()
                .map(|&t| normcvg_score(g, context, t, norm))
                .collect(),
            Baseline::Lrw { steps, mode } => {
                let mass = walk(g, context, steps, mode);
                candidates.iter().map(|t| mass[t.index()]).collect()
            }
        }
    }
}
