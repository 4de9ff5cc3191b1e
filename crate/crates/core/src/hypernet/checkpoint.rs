//! Binary checkpoint of a hypernetwork.
//!
//! Layout, all integers and floats little-endian:
//!
//! | field            | type               |
//! |------------------|--------------------|
//! | magic            | 8 bytes `HBNCKPT\0` |
//! | version          | u32                |
//! | embedding seed   | u64                |
//! | item dim, user dim | u32, u32         |
//! | head kind        | u8 (0 low-rank, 1 full) |
//! | rank             | u32 (0 for full)   |
//! | width count `k`  | u32                |
//! | widths           | `k` × u32          |
//! | per layer        | weights (`fan_in × fan_out`, row-major) then biases, f64 |

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use super::{Head, Hypernet, HypernetError, Layer, Mlp};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"HBNCKPT\0";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn write_checkpoint<W: Write>(mut w: W, net: &Hypernet) -> Result<(), HypernetError> {
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&net.embedding_seed().to_le_bytes())?;
    w.write_all(&(net.item_dim() as u32).to_le_bytes())?;
    w.write_all(&(net.user_dim() as u32).to_le_bytes())?;
    let (kind, rank) = match net.head() {
        Head::LowRank { rank } => (0u8, rank as u32),
        Head::Full => (1u8, 0),
    };
    w.write_all(&[kind])?;
    w.write_all(&rank.to_le_bytes())?;
    let widths = net.mlp().widths();
    w.write_all(&(widths.len() as u32).to_le_bytes())?;
    for width in &widths {
        w.write_all(&(*width as u32).to_le_bytes())?;
    }
    for layer in net.mlp().layers() {
        for v in layer.weight.iter().chain(layer.bias.iter()) {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, HypernetError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>, HypernetError> {
    let mut out = Vec::with_capacity(n);
    let mut b = [0u8; 8];
    for _ in 0..n {
        r.read_exact(&mut b)?;
        let v = f64::from_le_bytes(b);
        if !v.is_finite() {
            return Err(HypernetError::Checkpoint("non-finite parameter".into()));
        }
        out.push(v);
    }
    Ok(out)
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Hypernet, HypernetError> {
    let bad = |m: &str| HypernetError::Checkpoint(m.to_string());
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(bad("not a hypernetwork checkpoint"));
    }
    let version = read_u32(&mut r)?;
    if version != CHECKPOINT_VERSION {
        return Err(HypernetError::Checkpoint(format!("unsupported version {version}")));
    }
    let mut seed = [0u8; 8];
    r.read_exact(&mut seed)?;
    let embedding_seed = u64::from_le_bytes(seed);
    let item_dim = read_u32(&mut r)? as usize;
    let user_dim = read_u32(&mut r)? as usize;
    let mut kind = [0u8; 1];
    r.read_exact(&mut kind)?;
    let rank = read_u32(&mut r)? as usize;
    let head = match kind[0] {
        0 if rank > 0 => Head::LowRank { rank },
        1 => Head::Full,
        _ => return Err(bad("unknown head kind")),
    };
    let count = read_u32(&mut r)? as usize;
    if !(2..=64).contains(&count) {
        return Err(bad("implausible layer count"));
    }
    let widths = (0..count)
        .map(|_| read_u32(&mut r).map(|w| w as usize))
        .collect::<Result<Vec<_>, _>>()?;
    if widths.iter().any(|&w| w == 0 || w > 1 << 16) {
        return Err(bad("implausible layer width"));
    }
    let mut layers = Vec::with_capacity(count - 1);
    for pair in widths.windows(2) {
        let weight = read_f64s(&mut r, pair[0] * pair[1])?;
        let bias = read_f64s(&mut r, pair[1])?;
        layers.push(Layer {
            weight: Array2::from_shape_vec((pair[0], pair[1]), weight).expect("length read"),
            bias: Array1::from_vec(bias),
        });
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(bad("trailing bytes"));
    }
    Hypernet::from_parts(Mlp::from_layers(layers), head, item_dim, user_dim, embedding_seed)
}

pub fn save_checkpoint(path: impl AsRef<Path>, net: &Hypernet) -> Result<(), HypernetError> {
    write_checkpoint(BufWriter::new(File::create(path)?), net)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Hypernet, HypernetError> {
    read_checkpoint(BufReader::new(File::open(path)?))
}
