//! Canonical on-disk corpus.
//!
//! Binary file (`COOCCORP`, version 1): `n_items u64 | n_records u64`, then
//! each record as `len u32` followed by `len` increasing `u32` ids, then the
//! SHA-256 trailer. The vocabulary goes to a sidecar text file with one
//! `token<TAB>count` line per item, in id order.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use crate::codec::{Decoder, Encoder};
use crate::corpus::{Corpus, Dataset, ItemId, ItemSet, Vocabulary};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"COOCCORP";
const VERSION: u32 = 1;

pub fn encode_corpus(corpus: &Corpus) -> Vec<u8> {
    let mut enc = Encoder::new(MAGIC, VERSION);
    enc.u64(corpus.n_items() as u64);
    enc.u64(corpus.len() as u64);
    for r in corpus.records() {
        enc.u32(r.len() as u32);
        for id in r {
            enc.u32(id.0);
        }
    }
    enc.finish()
}

pub fn decode_corpus(bytes: &[u8]) -> Result<Corpus> {
    let mut dec = Decoder::new(bytes, MAGIC, VERSION)?;
    let n_items = dec.u64()? as usize;
    let n_records = dec.u64()? as usize;
    let mut records = Vec::with_capacity(n_records.min(1 << 24));
    for _ in 0..n_records {
        let len = dec.u32()? as usize;
        let ids = (0..len)
            .map(|_| dec.u32().map(ItemId))
            .collect::<Result<Vec<_>>>()?;
        if ids.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Format("record ids not strictly increasing".into()));
        }
        records.push(ItemSet::new(ids, n_items)?);
    }
    dec.finish()?;
    Corpus::new(n_items, records)
}

/// Path of the vocabulary sidecar for a corpus file.
pub fn vocab_path(corpus_path: &Path) -> PathBuf {
    let mut name = corpus_path.as_os_str().to_owned();
    name.push(".vocab");
    PathBuf::from(name)
}

pub fn write_vocabulary<W: Write>(vocab: &Vocabulary, mut out: W) -> Result<()> {
    for (tok, count) in vocab.tokens().iter().zip(vocab.counts()) {
        if tok.contains(['\t', '\n', '\r']) {
            return Err(Error::Format(format!(
                "token {tok:?} contains a tab or newline"
            )));
        }
        writeln!(out, "{tok}\t{count}")?;
    }
    Ok(())
}

pub fn read_vocabulary<R: BufRead>(input: R) -> Result<Vocabulary> {
    let mut tokens = Vec::new();
    let mut counts = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let (tok, count) = line.rsplit_once('\t').ok_or_else(|| Error::Parse {
            line: i + 1,
            msg: "expected token<TAB>count".into(),
        })?;
        tokens.push(tok.to_owned());
        counts.push(count.parse().map_err(|_| Error::Parse {
            line: i + 1,
            msg: format!("invalid count {count:?}"),
        })?);
    }
    Vocabulary::from_parts(tokens, counts)
}

/// Writes the corpus file and its vocabulary sidecar.
pub fn save_dataset(dataset: &Dataset, path: &Path) -> Result<()> {
    fs::write(path, encode_corpus(&dataset.corpus))?;
    let mut out = fs::File::create(vocab_path(path))?;
    write_vocabulary(&dataset.vocab, &mut out)?;
    out.flush()?;
    Ok(())
}

/// Loads a corpus file; the vocabulary falls back to identity tokens when
/// the sidecar is missing.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let corpus = decode_corpus(&fs::read(path)?)?;
    let sidecar = vocab_path(path);
    let vocab = if sidecar.exists() {
        read_vocabulary(BufReader::new(fs::File::open(sidecar)?))?
    } else {
        Vocabulary::identity(corpus.n_items())
    };
    if vocab.len() != corpus.n_items() {
        return Err(Error::Format(format!(
            "vocabulary has {} tokens for {} items",
            vocab.len(),
            corpus.n_items()
        )));
    }
    Ok(Dataset { vocab, corpus })
}
