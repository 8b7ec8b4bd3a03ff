//! Model checkpoint files.
//!
//! Layout after the common header (`COOCCKPT`, version 1):
//!
//! ```text
//! kind u8 (0 l1, 1 fvbm, 2 lbl, 3 dem) | flags u8 | n_items u64
//! n_widths u32 | widths u32...            (dem: hidden widths, lbl: [dim])
//! tensors, f64 row-major:
//!   l1:   bias
//!   fvbm: bias, pair
//!   lbl:  bias, embed
//!   dem:  bias, pair_readout, (W, B) per layer, readouts
//! n_tokens u64 | (len u32, utf-8 bytes)...
//! ```
//!
//! `flags` bit 0 is "tied" for fvbm and "use_bias" for lbl.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::codec::{Decoder, Encoder};
use crate::error::{Error, Result};
use crate::scorers::{BiasParams, DemParams, DenseLayer, LblParams, Model, PairParams};

const MAGIC: &[u8; 8] = b"COOCCKPT";
const VERSION: u32 = 1;

/// A model plus the item tokens it was trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: Model,
    pub tokens: Option<Vec<String>>,
}

fn put_matrix(enc: &mut Encoder, m: &Array2<f64>) {
    enc.f64s(m.iter());
}

fn get_vector(dec: &mut Decoder<'_>, n: usize) -> Result<Array1<f64>> {
    Ok(Array1::from(dec.f64s(n)?))
}

fn get_matrix(dec: &mut Decoder<'_>, rows: usize, cols: usize) -> Result<Array2<f64>> {
    Array2::from_shape_vec((rows, cols), dec.f64s(rows * cols)?)
        .map_err(|e| Error::Format(e.to_string()))
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut enc = Encoder::new(MAGIC, VERSION);
        let (kind, flags, widths) = match &self.model {
            Model::Bias(_) => (0u8, 0u8, Vec::new()),
            Model::Pair(p) => (1, p.is_tied() as u8, Vec::new()),
            Model::Lbl(p) => (2, p.use_bias as u8, vec![p.dim()]),
            Model::Dem(p) => (3, 0, p.layer_sizes()),
        };
        enc.u8(kind);
        enc.u8(flags);
        enc.u64(crate::scorers::Scorer::n_items(&self.model) as u64);
        enc.u32(widths.len() as u32);
        for w in widths {
            enc.u32(w as u32);
        }
        match &self.model {
            Model::Bias(p) => enc.f64s(p.bias.iter()),
            Model::Pair(p) => {
                enc.f64s(p.bias.iter());
                put_matrix(&mut enc, &p.pair);
            }
            Model::Lbl(p) => {
                enc.f64s(p.bias.iter());
                put_matrix(&mut enc, &p.embed);
            }
            Model::Dem(p) => {
                enc.f64s(p.bias.iter());
                put_matrix(&mut enc, &p.pair_readout);
                for layer in &p.layers {
                    put_matrix(&mut enc, &layer.weights);
                    enc.f64s(layer.bias.iter());
                }
                for r in &p.readouts {
                    put_matrix(&mut enc, r);
                }
            }
        }
        let tokens = self.tokens.as_deref().unwrap_or(&[]);
        enc.u64(tokens.len() as u64);
        for t in tokens {
            enc.str(t);
        }
        enc.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut dec = Decoder::new(bytes, MAGIC, VERSION)?;
        let kind = dec.u8()?;
        let flags = dec.u8()?;
        let n = dec.u64()? as usize;
        let n_widths = dec.u32()? as usize;
        let widths = (0..n_widths)
            .map(|_| dec.u32().map(|w| w as usize))
            .collect::<Result<Vec<_>>>()?;
        let model = match kind {
            0 => Model::Bias(BiasParams {
                bias: get_vector(&mut dec, n)?,
            }),
            1 => {
                let bias = get_vector(&mut dec, n)?;
                let pair = get_matrix(&mut dec, n, n)?;
                Model::Pair(if flags & 1 == 1 {
                    PairParams::new(bias, pair)?
                } else {
                    PairParams::untied(bias, pair)?
                })
            }
            2 => {
                let &[dim] = widths.as_slice() else {
                    return Err(Error::Format("lbl checkpoint needs one width".into()));
                };
                let bias = get_vector(&mut dec, n)?;
                let embed = get_matrix(&mut dec, n, dim)?;
                Model::Lbl(LblParams {
                    embed,
                    bias,
                    use_bias: flags & 1 == 1,
                })
            }
            3 => {
                let bias = get_vector(&mut dec, n)?;
                let pair_readout = get_matrix(&mut dec, n, n)?;
                let mut layers = Vec::with_capacity(widths.len());
                let mut prev = n;
                for &w in &widths {
                    let weights = get_matrix(&mut dec, w, prev)?;
                    let bias = get_vector(&mut dec, w)?;
                    layers.push(DenseLayer { weights, bias });
                    prev = w;
                }
                let readouts = widths
                    .iter()
                    .map(|&w| get_matrix(&mut dec, n, w))
                    .collect::<Result<Vec<_>>>()?;
                let params = DemParams {
                    bias,
                    pair_readout,
                    layers,
                    readouts,
                };
                params.validate()?;
                Model::Dem(params)
            }
            other => return Err(Error::Format(format!("unknown model kind {other}"))),
        };
        let n_tokens = dec.u64()? as usize;
        let tokens = if n_tokens == 0 {
            None
        } else {
            if n_tokens != n {
                return Err(Error::Format(format!("{n_tokens} tokens for {n} items")));
            }
            Some(
                (0..n_tokens)
                    .map(|_| dec.str())
                    .collect::<Result<Vec<_>>>()?,
            )
        };
        dec.finish()?;
        Ok(Checkpoint { model, tokens })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}
