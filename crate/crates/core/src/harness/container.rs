//! Flat binary array container.
//!
//! Layout, all integers little-endian:
//!
//! | bytes | content |
//! |---|---|
//! | 8 | magic `DIRACARR` |
//! | 2 | format version (`u16`, currently 1) |
//! | 1 | dtype: 1 = `f64`, 2 = complex128 stored as (re, im) pairs |
//! | 1 | number of dimensions `d` |
//! | 8 d | shape, `u64` each |
//! | ... | row-major payload, IEEE-754 binary64 |

use crate::error::{Error, Result};
use crate::linalg::{c64, CMat};
use std::path::Path;

pub const MAGIC: &[u8; 8] = b"DIRACARR";
pub const VERSION: u16 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum Dtype {
    F64 = 1,
    C128 = 2,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ArrayData {
    Real(Vec<f64>),
    Complex(Vec<c64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Array {
    pub shape: Vec<u64>,
    pub data: ArrayData,
}

impl Array {
    pub fn real(shape: Vec<u64>, data: Vec<f64>) -> Result<Self> {
        Self::checked(shape, ArrayData::Real(data))
    }

    pub fn complex(shape: Vec<u64>, data: Vec<c64>) -> Result<Self> {
        Self::checked(shape, ArrayData::Complex(data))
    }

    fn checked(shape: Vec<u64>, data: ArrayData) -> Result<Self> {
        let n: u64 = shape.iter().product();
        let len = match &data {
            ArrayData::Real(v) => v.len(),
            ArrayData::Complex(v) => v.len(),
        };
        if shape.len() > u8::MAX as usize || n != len as u64 {
            return Err(Error::Container(format!("shape {shape:?} does not match {len} elements")));
        }
        Ok(Array { shape, data })
    }

    pub fn from_matrix(m: &CMat) -> Self {
        let data = (0..m.nrows()).flat_map(|i| (0..m.ncols()).map(move |j| m[(i, j)])).collect();
        Array { shape: vec![m.nrows() as u64, m.ncols() as u64], data: ArrayData::Complex(data) }
    }

    pub fn to_matrix(&self) -> Result<CMat> {
        match (&self.data, self.shape.as_slice()) {
            (ArrayData::Complex(v), [r, c]) => {
                let (r, c) = (*r as usize, *c as usize);
                Ok(CMat::from_fn(r, c, |i, j| v[i * c + j]))
            }
            _ => Err(Error::Container("expected a two-dimensional complex array".into())),
        }
    }

    pub fn dtype(&self) -> Dtype {
        match self.data {
            ArrayData::Real(_) => Dtype::F64,
            ArrayData::Complex(_) => Dtype::C128,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + 8 * self.shape.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(self.dtype() as u8);
        out.push(self.shape.len() as u8);
        for s in &self.shape {
            out.extend_from_slice(&s.to_le_bytes());
        }
        match &self.data {
            ArrayData::Real(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            ArrayData::Complex(v) => v.iter().for_each(|z| {
                out.extend_from_slice(&z.re.to_le_bytes());
                out.extend_from_slice(&z.im.to_le_bytes());
            }),
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Container(m.to_string());
        if bytes.len() < 12 || &bytes[..8] != MAGIC {
            return Err(bad("missing magic bytes"));
        }
        let version = u16::from_le_bytes([bytes[8], bytes[9]]);
        if version != VERSION {
            return Err(Error::Container(format!("unsupported version {version}")));
        }
        let dtype = bytes[10];
        let ndim = bytes[11] as usize;
        let header = 12 + 8 * ndim;
        if bytes.len() < header {
            return Err(bad("truncated shape"));
        }
        let word = |off: usize| -> [u8; 8] { bytes[off..off + 8].try_into().unwrap() };
        let shape: Vec<u64> = (0..ndim).map(|k| u64::from_le_bytes(word(12 + 8 * k))).collect();
        let n = shape.iter().try_fold(1u64, |a, b| a.checked_mul(*b)).ok_or_else(|| bad("shape overflows"))? as usize;
        let width = match dtype {
            1 => 8,
            2 => 16,
            d => return Err(Error::Container(format!("unknown dtype code {d}"))),
        };
        if bytes.len() != header + n * width {
            return Err(Error::Container(format!("payload has {} bytes, expected {}", bytes.len() - header, n * width)));
        }
        let f = |k: usize| f64::from_le_bytes(word(header + 8 * k));
        let data = if dtype == 1 {
            ArrayData::Real((0..n).map(f).collect())
        } else {
            ArrayData::Complex((0..n).map(|k| c64::new(f(2 * k), f(2 * k + 1))).collect())
        };
        Ok(Array { shape, data })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.encode())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::decode(&std::fs::read(path)?)
    }
}

pub fn write_matrix(path: &Path, m: &CMat) -> Result<()> {
    Array::from_matrix(m).write(path)
}

pub fn read_matrix(path: &Path) -> Result<CMat> {
    Array::read(path)?.to_matrix()
}
