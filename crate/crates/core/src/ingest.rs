//! Readers for the public dataset formats.
//!
//! All readers remap external ids densely through a [`Vocabulary`] in
//! first-appearance order and drop records that end up empty.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::str::FromStr;

use crate::corpus::{build_vocabulary, Corpus, Dataset};
use crate::error::{Error, Result};

/// Which neighbours of a node make up its record in a directed graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EdgeMode {
    /// Out-neighbours of the source node.
    #[default]
    Out,
    /// In-neighbours of the destination node.
    In,
    /// Both directions, i.e. the graph read as undirected.
    Both,
}

impl FromStr for EdgeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "out" => Ok(EdgeMode::Out),
            "in" => Ok(EdgeMode::In),
            "both" => Ok(EdgeMode::Both),
            other => Err(Error::InvalidArgument(format!("edge mode {other:?}"))),
        }
    }
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn parse_num<T: FromStr>(tok: &str, line: usize) -> Result<T> {
    tok.trim()
        .parse()
        .map_err(|_| parse_err(line, format!("invalid number {tok:?}")))
}

fn finish(raw: Vec<Vec<String>>) -> Result<Dataset> {
    let (vocab, records) = build_vocabulary(raw);
    let corpus = Corpus::new(vocab.len(), records)?;
    Ok(Dataset { vocab, corpus })
}

/// Groups values by key, keeping keys in first-appearance order.
#[derive(Default)]
struct Grouper {
    index: HashMap<u64, usize>,
    groups: Vec<Vec<String>>,
}

impl Grouper {
    fn push(&mut self, key: u64, value: String) {
        let next = self.groups.len();
        let slot = *self.index.entry(key).or_insert(next);
        if slot == next {
            self.groups.push(Vec::new());
        }
        self.groups[slot].push(value);
    }
}

/// Reads a SNAP-style edge list (`src dst` per line, `#` comments).
pub fn read_edge_list<R: BufRead>(input: R, mode: EdgeMode) -> Result<Dataset> {
    let mut groups = Grouper::default();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split_whitespace();
        let (Some(src), Some(dst), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(parse_err(lineno, "expected two node ids"));
        };
        let src: u64 = parse_num(src, lineno)?;
        let dst: u64 = parse_num(dst, lineno)?;
        if matches!(mode, EdgeMode::Out | EdgeMode::Both) {
            groups.push(src, dst.to_string());
        }
        if matches!(mode, EdgeMode::In | EdgeMode::Both) {
            groups.push(dst, src.to_string());
        }
    }
    finish(groups.groups)
}

/// Reads one whitespace-separated transaction of integer item ids per line.
pub fn read_transactions<R: BufRead>(input: R) -> Result<Dataset> {
    let mut raw = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let items = line
            .split_whitespace()
            .map(|tok| parse_num::<u64>(tok, i + 1).map(|v| v.to_string()))
            .collect::<Result<Vec<_>>>()?;
        if !items.is_empty() {
            raw.push(items);
        }
    }
    finish(raw)
}

/// Writes a dataset back out in transaction-line form, one record per line.
pub fn write_transactions<W: Write>(dataset: &Dataset, mut out: W) -> Result<()> {
    for record in dataset.corpus.records() {
        let line: Vec<&str> = record
            .iter()
            .map(|id| {
                dataset
                    .vocab
                    .token(id)
                    .expect("record ids are in vocabulary")
            })
            .collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}

/// Default MovieLens binarization: ratings `>= 4` count as present.
pub const MOVIELENS_THRESHOLD: f64 = 4.0;

/// Reads `user::movie::rating::timestamp` lines, keeping per user the movies
/// rated at or above `threshold`.
pub fn read_movielens<R: BufRead>(input: R, threshold: f64) -> Result<Dataset> {
    let mut groups = Grouper::default();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim().split("::").collect();
        if fields.len() != 4 {
            return Err(parse_err(lineno, "expected user::movie::rating::timestamp"));
        }
        let user: u64 = parse_num(fields[0], lineno)?;
        let movie: u64 = parse_num(fields[1], lineno)?;
        let rating: f64 = parse_num(fields[2], lineno)?;
        parse_num::<u64>(fields[3], lineno)?;
        if rating >= threshold {
            groups.push(user, movie.to_string());
        }
    }
    finish(groups.groups)
}

/// Default Jester binarization: ratings strictly above zero count as present.
pub const JESTER_THRESHOLD: f64 = 0.0;

/// Marker for "not rated" in the Jester matrix.
pub const JESTER_UNRATED: f64 = 99.0;

/// Reads the Jester CSV matrix. Column 0 is the user's rating count, column
/// `k` holds the rating of joke `k` (or 99 when unrated). Tokens are the
/// 1-based joke numbers.
pub fn read_jester<R: BufRead>(input: R, threshold: f64) -> Result<Dataset> {
    let mut raw = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let count = fields.next().unwrap_or("");
        parse_num::<f64>(count, lineno)?;
        let mut items = Vec::new();
        for (k, field) in fields.enumerate() {
            let field = field.trim();
            if field.is_empty() {
                continue;
            }
            let rating: f64 = parse_num(field, lineno)?;
            if rating == JESTER_UNRATED {
                continue;
            }
            if !(-10.0..=10.0).contains(&rating) {
                return Err(parse_err(
                    lineno,
                    format!("rating {rating} outside [-10, 10]"),
                ));
            }
            if rating > threshold {
                items.push((k + 1).to_string());
            }
        }
        if !items.is_empty() {
            raw.push(items);
        }
    }
    finish(raw)
}
