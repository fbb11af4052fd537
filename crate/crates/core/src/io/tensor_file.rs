//! `SCTN` raw tensors: magic, rank `u32`, dims `u32 × rank`, `f32` payload,
//! all little-endian.

use std::path::Path;

use super::bytes::{checked_product, Reader, Writer};
use crate::error::{Error, Result};
use crate::tensor::{Tensor, MAX_RANK};

pub const MAGIC: [u8; 4] = *b"SCTN";

pub fn decode_tensor(bytes: &[u8]) -> Result<Tensor<f32>> {
    let mut r = Reader::new(bytes);
    r.magic(MAGIC)?;
    let rank = r.usize()?;
    if rank == 0 || rank > MAX_RANK {
        return Err(Error::UnsupportedFormat(format!("tensor rank {rank}")));
    }
    let dims = (0..rank).map(|_| r.usize()).collect::<Result<Vec<_>>>()?;
    let data = r.f32s(checked_product(&dims)?)?;
    r.finish()?;
    Tensor::new(dims, data)
}

pub fn encode_tensor(t: &Tensor<f32>) -> Vec<u8> {
    let mut w = Writer::default();
    w.bytes(&MAGIC);
    w.u32(t.rank());
    for &d in t.shape() {
        w.u32(d);
    }
    w.f32s(t.data());
    w.buf
}

pub fn load_tensor(path: impl AsRef<Path>) -> Result<Tensor<f32>> {
    let path = path.as_ref();
    decode_tensor(&super::read_file(path)?).map_err(|e| e.in_file(path))
}

pub fn save_tensor(t: &Tensor<f32>, path: impl AsRef<Path>) -> Result<()> {
    super::write_file(path.as_ref(), &encode_tensor(t))
}
