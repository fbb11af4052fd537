//! Little-endian cursor shared by the binary formats.

use crate::error::{Error, Result};

pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(Error::TruncatedFile {
                offset: self.pos,
                needed: n,
                available: self.remaining(),
            });
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn magic(&mut self, expected: [u8; 4]) -> Result<()> {
        let found: [u8; 4] = match self.take(4) {
            Ok(b) => b.try_into().expect("4 bytes"),
            Err(_) => {
                let mut found = [0u8; 4];
                let n = self.remaining();
                found[..n].copy_from_slice(&self.buf[self.pos..]);
                if found[..n] != expected[..n] {
                    return Err(Error::MagicMismatch { expected, found });
                }
                return Err(Error::TruncatedFile {
                    offset: self.pos,
                    needed: 4,
                    available: n,
                });
            }
        };
        if found != expected {
            return Err(Error::MagicMismatch { expected, found });
        }
        Ok(())
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    pub fn usize(&mut self) -> Result<usize> {
        Ok(self.u32()? as usize)
    }

    /// Reads `count` f32 values, failing before allocating if the payload is short.
    pub fn f32s(&mut self, count: usize) -> Result<Vec<f32>> {
        let bytes = count
            .checked_mul(4)
            .ok_or_else(|| Error::UnsupportedFormat(format!("payload of {count} floats overflows")))?;
        Ok(self
            .take(bytes)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect())
    }

    pub fn finish(&self) -> Result<()> {
        match self.remaining() {
            0 => Ok(()),
            n => Err(Error::UnsupportedFormat(format!(
                "{n} unexpected trailing bytes at offset {}",
                self.pos
            ))),
        }
    }
}

#[derive(Default)]
pub(crate) struct Writer {
    pub buf: Vec<u8>,
}

impl Writer {
    pub fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u32(&mut self, v: usize) {
        let v = u32::try_from(v).expect("dimension exceeds u32");
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f32s(&mut self, values: &[f32]) {
        for v in values {
            self.buf.extend_from_slice(&v.to_le_bytes());
        }
    }
}

pub(crate) fn checked_product(dims: &[usize]) -> Result<usize> {
    dims.iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::UnsupportedFormat(format!("dimensions {dims:?} overflow")))
}
