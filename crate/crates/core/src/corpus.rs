//! Co-occurrence records, vocabularies, fold splits and test masking.

use std::collections::HashMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

/// Dense index of an item in `[0, n_items)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(transparent)]
pub struct ItemId(pub u32);

impl ItemId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<u32> for ItemId {
    fn from(v: u32) -> Self {
        ItemId(v)
    }
}

impl fmt::Display for ItemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Set of items present in one record, kept sorted and duplicate free.
///
/// This is the sparse form of a binary vector `v` with `v_i = 1` iff `i` is
/// in the set.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct ItemSet {
    items: Vec<ItemId>,
}

impl ItemSet {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Sorts and deduplicates `ids`, rejecting any id `>= n_items`.
    pub fn new<I>(ids: I, n_items: usize) -> Result<Self>
    where
        I: IntoIterator,
        I::Item: Into<ItemId>,
    {
        let mut items: Vec<ItemId> = ids.into_iter().map(Into::into).collect();
        if let Some(bad) = items.iter().find(|id| id.index() >= n_items) {
            return Err(Error::ItemOutOfRange {
                id: bad.0 as u64,
                n_items,
            });
        }
        items.sort_unstable();
        items.dedup();
        Ok(ItemSet { items })
    }

    /// Builds a set from ids that are already strictly increasing.
    pub(crate) fn from_sorted_unchecked(items: Vec<ItemId>) -> Self {
        debug_assert!(items.windows(2).all(|w| w[0] < w[1]));
        ItemSet { items }
    }

    pub fn as_slice(&self) -> &[ItemId] {
        &self.items
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = ItemId> + '_ {
        self.items.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn contains(&self, id: ItemId) -> bool {
        self.items.binary_search(&id).is_ok()
    }

    /// Largest id plus one, or zero for the empty set.
    pub fn span(&self) -> usize {
        self.items.last().map_or(0, |id| id.index() + 1)
    }

    /// The set with `id` removed (the leave-one-out context `v_(-t)`).
    pub fn without(&self, id: ItemId) -> ItemSet {
        ItemSet {
            items: self.items.iter().copied().filter(|&i| i != id).collect(),
        }
    }

    /// The set with `id` added.
    pub fn with(&self, id: ItemId) -> ItemSet {
        let mut items = self.items.clone();
        if let Err(pos) = items.binary_search(&id) {
            items.insert(pos, id);
        }
        ItemSet { items }
    }

    /// All ids in `[0, n_items)` not in the set, in increasing order.
    pub fn complement(&self, n_items: usize) -> Vec<ItemId> {
        let mut out = Vec::with_capacity(n_items.saturating_sub(self.len()));
        let mut present = self.items.iter().peekable();
        for i in 0..n_items as u32 {
            if present.peek().map(|p| p.0) == Some(i) {
                present.next();
            } else {
                out.push(ItemId(i));
            }
        }
        out
    }
}

impl<'a> IntoIterator for &'a ItemSet {
    type Item = &'a ItemId;
    type IntoIter = std::slice::Iter<'a, ItemId>;

    fn into_iter(self) -> Self::IntoIter {
        self.items.iter()
    }
}

/// Mapping between external tokens and dense item ids, plus per-item
/// record-membership counts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    token_to_id: HashMap<String, ItemId>,
    id_to_token: Vec<String>,
    counts: Vec<u64>,
}

impl Vocabulary {
    /// Tokens `"0".."n-1"` mapping to themselves, all counts zero.
    pub fn identity(n_items: usize) -> Self {
        let mut vocab = Vocabulary::default();
        for i in 0..n_items {
            vocab.intern(&i.to_string());
        }
        vocab
    }

    /// Rebuilds a vocabulary from stored tokens and counts.
    pub fn from_parts(tokens: Vec<String>, counts: Vec<u64>) -> Result<Self> {
        if tokens.len() != counts.len() {
            return Err(Error::LengthMismatch(tokens.len(), counts.len()));
        }
        let mut token_to_id = HashMap::with_capacity(tokens.len());
        for (i, tok) in tokens.iter().enumerate() {
            if token_to_id.insert(tok.clone(), ItemId(i as u32)).is_some() {
                return Err(Error::Format(format!("duplicate token {tok:?}")));
            }
        }
        Ok(Vocabulary {
            token_to_id,
            id_to_token: tokens,
            counts,
        })
    }

    /// Returns the id of `token`, assigning the next free id on first sight.
    pub fn intern(&mut self, token: &str) -> ItemId {
        if let Some(&id) = self.token_to_id.get(token) {
            return id;
        }
        let id = ItemId(self.id_to_token.len() as u32);
        self.token_to_id.insert(token.to_owned(), id);
        self.id_to_token.push(token.to_owned());
        self.counts.push(0);
        id
    }

    pub fn id(&self, token: &str) -> Option<ItemId> {
        self.token_to_id.get(token).copied()
    }

    pub fn token(&self, id: ItemId) -> Option<&str> {
        self.id_to_token.get(id.index()).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.id_to_token
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_to_token.is_empty()
    }

    /// Adds one record's worth of membership counts.
    pub(crate) fn count_record(&mut self, record: &ItemSet) {
        for id in record {
            self.counts[id.index()] += 1;
        }
    }
}

/// Assigns ids in first-appearance order and counts, per item, the number of
/// records that contain it. Returns the vocabulary and the records as id sets.
pub fn build_vocabulary<R, T>(raw_records: R) -> (Vocabulary, Vec<ItemSet>)
where
    R: IntoIterator,
    R::Item: IntoIterator<Item = T>,
    T: AsRef<str>,
{
    let mut vocab = Vocabulary::default();
    let mut records = Vec::new();
    for raw in raw_records {
        let mut ids: Vec<ItemId> = raw.into_iter().map(|t| vocab.intern(t.as_ref())).collect();
        ids.sort_unstable();
        ids.dedup();
        let set = ItemSet::from_sorted_unchecked(ids);
        vocab.count_record(&set);
        records.push(set);
    }
    (vocab, records)
}

/// A collection of non-empty co-occurrence records over `n_items` items.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    n_items: usize,
    records: Vec<ItemSet>,
}

impl Corpus {
    /// Validates ids and drops empty records.
    pub fn new(n_items: usize, records: Vec<ItemSet>) -> Result<Self> {
        for r in &records {
            if r.span() > n_items {
                return Err(Error::ItemOutOfRange {
                    id: (r.span() - 1) as u64,
                    n_items,
                });
            }
        }
        let records = records.into_iter().filter(|r| !r.is_empty()).collect();
        Ok(Corpus { n_items, records })
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn records(&self) -> &[ItemSet] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Total number of (record, item) memberships.
    pub fn n_occurrences(&self) -> usize {
        self.records.iter().map(ItemSet::len).sum()
    }

    /// Per-item record-membership counts.
    pub fn item_frequencies(&self) -> Vec<u64> {
        let mut freq = vec![0u64; self.n_items];
        for r in &self.records {
            for id in r {
                freq[id.index()] += 1;
            }
        }
        freq
    }

    /// Sub-corpus made of the records at `indices`, same item space.
    pub fn subset(&self, indices: &[usize]) -> Corpus {
        Corpus {
            n_items: self.n_items,
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
        }
    }
}

/// A dataset as produced by ingestion: records plus the token mapping.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub vocab: Vocabulary,
    pub corpus: Corpus,
}

impl Dataset {
    /// Keeps only the `m` most frequent items (ties to the lower id), remaps
    /// them densely in their original id order and drops emptied records.
    pub fn retain_top_items(&self, m: usize) -> Dataset {
        let freq = self.corpus.item_frequencies();
        let mut order: Vec<usize> = (0..freq.len()).collect();
        order.sort_by(|&a, &b| freq[b].cmp(&freq[a]).then(a.cmp(&b)));
        order.truncate(m);
        order.sort_unstable();

        let mut remap = vec![None; freq.len()];
        for (new, &old) in order.iter().enumerate() {
            remap[old] = Some(ItemId(new as u32));
        }
        let records: Vec<ItemSet> = self
            .corpus
            .records
            .iter()
            .map(|r| {
                ItemSet::from_sorted_unchecked(
                    r.iter().filter_map(|id| remap[id.index()]).collect(),
                )
            })
            .filter(|r| !r.is_empty())
            .collect();

        let tokens = order
            .iter()
            .map(|&old| self.vocab.tokens()[old].clone())
            .collect();
        let mut vocab = Vocabulary::from_parts(tokens, vec![0; order.len()])
            .expect("tokens unique in source vocabulary");
        for r in &records {
            vocab.count_record(r);
        }
        Dataset {
            vocab,
            corpus: Corpus {
                n_items: order.len(),
                records,
            },
        }
    }
}

/// Assignment of every record to one of `k_folds` folds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldSplit {
    fold_of_record: Vec<usize>,
    k_folds: usize,
}

impl FoldSplit {
    pub fn k_folds(&self) -> usize {
        self.k_folds
    }

    pub fn fold_of_record(&self) -> &[usize] {
        &self.fold_of_record
    }

    /// Record indices in `fold`, increasing.
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of_record.len())
            .filter(|&i| self.fold_of_record[i] == fold)
            .collect()
    }

    /// Record indices outside `fold`, increasing.
    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of_record.len())
            .filter(|&i| self.fold_of_record[i] != fold)
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k_folds];
        for &f in &self.fold_of_record {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Shuffles record indices with the split stream of `seed`, then deals them
/// round-robin into `k_folds` folds.
pub fn split_folds(corpus: &Corpus, k_folds: usize, seed: u64) -> Result<FoldSplit> {
    let n = corpus.len();
    if k_folds < 2 || n == 0 || k_folds > n {
        return Err(Error::InvalidFolds {
            records: n,
            folds: k_folds,
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream_rng(seed, Stream::Split));
    let mut fold_of_record = vec![0; n];
    for (pos, &rec) in order.iter().enumerate() {
        fold_of_record[rec] = pos % k_folds;
    }
    Ok(FoldSplit {
        fold_of_record,
        k_folds,
    })
}

/// A test record with one item held out.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskedRecord {
    pub context: ItemSet,
    pub target: ItemId,
}

/// Removes one item chosen uniformly at random.
pub fn mask_one_item(record: &ItemSet, seed: u64) -> Result<MaskedRecord> {
    if record.len() < 2 {
        return Err(Error::RecordTooSmall { len: record.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let target = record.as_slice()[rng.gen_range(0..record.len())];
    Ok(MaskedRecord {
        context: record.without(target),
        target,
    })
}
