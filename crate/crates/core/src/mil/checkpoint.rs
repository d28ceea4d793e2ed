//! Binary model checkpoints.
//!
//! Layout (little-endian):
//!
//! ```text
//! magic    8 bytes  "LCMILCKP"
//! version  u32      1
//! kind     u8       0 = attention, 1 = mi-Net
//! blocks   u32      number of parameter blocks
//! per block:
//!   rows   u32
//!   cols   u32
//!   data   rows*cols f64
//! ```
//!
//! Blocks follow the model's parameter order: `(weight, bias)` per dense
//! layer, then for attention models `V`, `W`, `g`, `g_bias`. A dense weight
//! block is `out x in`; a bias block is `out x 1`.

use std::io::{Read, Write};

use crate::error::{Error, Result};

use super::attention::AttentionMil;
use super::minet::MiNet;
use super::nn::{Dense, Mlp};
use super::predictor::MilPredictor;

pub const MAGIC: &[u8; 8] = b"LCMILCKP";
pub const VERSION: u32 = 1;

struct Block {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

fn mlp_blocks(mlp: &Mlp) -> Vec<Block> {
    mlp.layers
        .iter()
        .flat_map(|l| {
            [
                Block {
                    rows: l.out_dim,
                    cols: l.in_dim,
                    data: l.weight.clone(),
                },
                Block {
                    rows: l.out_dim,
                    cols: 1,
                    data: l.bias.clone(),
                },
            ]
        })
        .collect()
}

pub fn save<W: Write>(model: &MilPredictor, mut out: W) -> Result<()> {
    let (kind, blocks) = match model {
        MilPredictor::Attention(m) => {
            let mut b = mlp_blocks(&m.extractor);
            b.push(Block {
                rows: m.attention_dim(),
                cols: m.embed_dim(),
                data: m.v.clone(),
            });
            b.push(Block {
                rows: 1,
                cols: m.attention_dim(),
                data: m.w.clone(),
            });
            b.push(Block {
                rows: 1,
                cols: m.embed_dim(),
                data: m.g.clone(),
            });
            b.push(Block {
                rows: 1,
                cols: 1,
                data: vec![m.g_bias],
            });
            (0u8, b)
        }
        MilPredictor::MiNet(m) => (1u8, mlp_blocks(&m.classifier)),
    };
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&[kind])?;
    out.write_all(&(blocks.len() as u32).to_le_bytes())?;
    for b in &blocks {
        out.write_all(&(b.rows as u32).to_le_bytes())?;
        out.write_all(&(b.cols as u32).to_le_bytes())?;
        for v in &b.data {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn to_bytes(model: &MilPredictor) -> Vec<u8> {
    let mut buf = Vec::new();
    save(model, &mut buf).expect("writing to a Vec cannot fail");
    buf
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn bad(msg: impl Into<String>) -> Error {
    Error::parse("checkpoint", msg)
}

fn mlp_from_blocks(blocks: Vec<Block>, activate_last: bool) -> Result<Mlp> {
    if blocks.is_empty() || !blocks.len().is_multiple_of(2) {
        return Err(bad("dense layers need (weight, bias) block pairs"));
    }
    let mut layers = Vec::with_capacity(blocks.len() / 2);
    let mut it = blocks.into_iter();
    while let (Some(w), Some(b)) = (it.next(), it.next()) {
        if b.rows != w.rows || b.cols != 1 {
            return Err(bad("bias block shape does not match its weight"));
        }
        if let Some(prev) = layers.last().map(|l: &Dense| l.out_dim) {
            if prev != w.cols {
                return Err(bad("consecutive layer widths disagree"));
            }
        }
        layers.push(Dense {
            in_dim: w.cols,
            out_dim: w.rows,
            weight: w.data,
            bias: b.data,
        });
    }
    Ok(Mlp {
        layers,
        activate_last,
    })
}

pub fn load<R: Read>(mut input: R) -> Result<MilPredictor> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(bad("bad magic"));
    }
    let version = read_u32(&mut input)?;
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let mut kind = [0u8; 1];
    input.read_exact(&mut kind)?;
    let n = read_u32(&mut input)? as usize;
    let mut blocks = Vec::with_capacity(n);
    for _ in 0..n {
        let rows = read_u32(&mut input)? as usize;
        let cols = read_u32(&mut input)? as usize;
        let mut data = Vec::with_capacity(rows * cols);
        let mut b = [0u8; 8];
        for _ in 0..rows * cols {
            input.read_exact(&mut b)?;
            data.push(f64::from_le_bytes(b));
        }
        blocks.push(Block { rows, cols, data });
    }
    let mut trailing = [0u8; 1];
    if input.read(&mut trailing)? != 0 {
        return Err(bad("trailing bytes after last block"));
    }
    match kind[0] {
        0 => {
            if blocks.len() < 6 {
                return Err(bad("attention checkpoint has too few blocks"));
            }
            let g_bias = blocks.pop().expect("len checked");
            let g = blocks.pop().expect("len checked");
            let w = blocks.pop().expect("len checked");
            let v = blocks.pop().expect("len checked");
            let extractor = mlp_from_blocks(blocks, true)?;
            let m = extractor.output_dim();
            if v.cols != m || v.rows != w.cols || g.cols != m || g_bias.data.len() != 1 {
                return Err(bad("attention head shapes are inconsistent"));
            }
            Ok(MilPredictor::Attention(AttentionMil {
                extractor,
                v: v.data,
                w: w.data,
                g: g.data,
                g_bias: g_bias.data[0],
            }))
        }
        1 => {
            let classifier = mlp_from_blocks(blocks, false)?;
            if classifier.output_dim() != 1 {
                return Err(bad("mi-Net classifier must end in one unit"));
            }
            Ok(MilPredictor::MiNet(MiNet { classifier }))
        }
        k => Err(bad(format!("unknown model kind {k}"))),
    }
}
