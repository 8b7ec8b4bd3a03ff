//! Synthetic corpora with known structure, for tests and demos.

use rand::seq::index::sample;
use rand::Rng;

use crate::corpus::{Corpus, ItemId, ItemSet};
use crate::rng::{stream_rng, Stream};

/// Partner of an item in a planted-pairs corpus: items `2k` and `2k + 1`.
pub fn partner(t: ItemId) -> ItemId {
    ItemId(t.0 ^ 1)
}

/// `n_records` records over `2 * n_pairs` items. Each record holds one pair
/// chosen uniformly plus `n_noise` distinct items drawn uniformly from the
/// other items.
pub fn planted_pairs(n_pairs: usize, n_noise: usize, n_records: usize, seed: u64) -> Corpus {
    let n_items = 2 * n_pairs;
    assert!(n_noise + 2 <= n_items, "not enough items for the noise");
    let mut rng = stream_rng(seed, Stream::Synthetic);
    let records = (0..n_records)
        .map(|_| {
            let pair = rng.gen_range(0..n_pairs) as u32;
            let mut ids = vec![ItemId(2 * pair), ItemId(2 * pair + 1)];
            // draw from the n_items - 2 non-pair slots, then skip over the pair
            for j in sample(&mut rng, n_items - 2, n_noise) {
                let j = j as u32;
                ids.push(ItemId(if j >= 2 * pair { j + 2 } else { j }));
            }
            ItemSet::new(ids, n_items).expect("ids in range")
        })
        .collect();
    Corpus::new(n_items, records).expect("ids in range")
}

/// Records whose items are present independently with the given
/// probabilities. Empty draws are dropped.
pub fn independent_items(probabilities: &[f64], n_records: usize, seed: u64) -> Corpus {
    let n = probabilities.len();
    let mut rng = stream_rng(seed, Stream::Synthetic);
    let records = (0..n_records)
        .map(|_| {
            let ids = (0..n as u32).filter(|&i| rng.gen_bool(probabilities[i as usize]));
            ItemSet::new(ids, n).expect("ids in range")
        })
        .collect();
    Corpus::new(n, records).expect("ids in range")
}
