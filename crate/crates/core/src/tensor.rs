//! Language-neutral binary tensor files.
//!
//! Layout, all little-endian:
//!
//! | offset | size | field |
//! |---|---|---|
//! | 0 | 4 | magic `MVST` |
//! | 4 | 1 | format version (1) |
//! | 5 | 1 | dtype code |
//! | 6 | 2 | rank `R` (u16) |
//! | 8 | 8 | element count (u64) |
//! | 16 | 8 R | dims (u64 each, row-major) |
//! | 16 + 8 R | | data |
//!
//! Complex values are stored as interleaved `(re, im)` pairs.

use num_complex::{Complex32, Complex64};
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"MVST";
pub const VERSION: u8 = 1;
const HEADER_LEN: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum DType {
    F32 = 1,
    F64 = 2,
    C64 = 3,
    C128 = 4,
    I64 = 5,
    U8 = 6,
}

impl DType {
    pub fn from_code(code: u8) -> Result<Self> {
        Ok(match code {
            1 => DType::F32,
            2 => DType::F64,
            3 => DType::C64,
            4 => DType::C128,
            5 => DType::I64,
            6 => DType::U8,
            _ => return Err(Error::Format(format!("unknown dtype code {code}"))),
        })
    }

    pub fn size(self) -> usize {
        match self {
            DType::U8 => 1,
            DType::F32 => 4,
            DType::F64 | DType::C64 | DType::I64 => 8,
            DType::C128 => 16,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TensorData {
    F32(Vec<f32>),
    F64(Vec<f64>),
    C64(Vec<Complex32>),
    C128(Vec<Complex64>),
    I64(Vec<i64>),
    U8(Vec<u8>),
}

impl TensorData {
    pub fn len(&self) -> usize {
        match self {
            TensorData::F32(v) => v.len(),
            TensorData::F64(v) => v.len(),
            TensorData::C64(v) => v.len(),
            TensorData::C128(v) => v.len(),
            TensorData::I64(v) => v.len(),
            TensorData::U8(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dtype(&self) -> DType {
        match self {
            TensorData::F32(_) => DType::F32,
            TensorData::F64(_) => DType::F64,
            TensorData::C64(_) => DType::C64,
            TensorData::C128(_) => DType::C128,
            TensorData::I64(_) => DType::I64,
            TensorData::U8(_) => DType::U8,
        }
    }
}

/// A dense row-major array with its shape.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: TensorData,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: TensorData) -> Result<Self> {
        if shape.len() > u16::MAX as usize {
            return Err(Error::invalid("tensor rank exceeds 65535"));
        }
        let count = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::invalid("tensor shape overflows"))?;
        if count != data.len() {
            return Err(Error::ShapeMismatch(format!(
                "shape {shape:?} needs {count} elements, got {}",
                data.len()
            )));
        }
        Ok(Tensor { shape, data })
    }

    pub fn f64(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        Self::new(shape, TensorData::F64(data))
    }

    pub fn c128(shape: Vec<usize>, data: Vec<Complex64>) -> Result<Self> {
        Self::new(shape, TensorData::C128(data))
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &TensorData {
        &self.data
    }

    pub fn dtype(&self) -> DType {
        self.data.dtype()
    }

    /// Values widened to `f64`; complex tensors are rejected.
    pub fn to_f64(&self) -> Result<Vec<f64>> {
        Ok(match &self.data {
            TensorData::F32(v) => v.iter().map(|&x| x as f64).collect(),
            TensorData::F64(v) => v.clone(),
            TensorData::I64(v) => v.iter().map(|&x| x as f64).collect(),
            TensorData::U8(v) => v.iter().map(|&x| x as f64).collect(),
            _ => return Err(Error::Format("complex tensor where a real one was expected".into())),
        })
    }

    /// Values widened to `Complex64`; real tensors get a zero imaginary part.
    pub fn to_c128(&self) -> Result<Vec<Complex64>> {
        Ok(match &self.data {
            TensorData::C64(v) => v.iter().map(|z| Complex64::new(z.re as f64, z.im as f64)).collect(),
            TensorData::C128(v) => v.clone(),
            _ => self.to_f64()?.into_iter().map(|x| Complex64::new(x, 0.0)).collect(),
        })
    }

    /// Check the shape against `expected`, where `None` matches any extent.
    pub fn expect_shape(&self, expected: &[Option<usize>]) -> Result<()> {
        let ok = self.shape.len() == expected.len()
            && self.shape.iter().zip(expected).all(|(d, e)| e.is_none_or(|e| e == *d));
        if ok {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(format!(
                "tensor shape {:?} does not match {expected:?}",
                self.shape
            )))
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * self.shape.len() + self.data.len() * self.dtype().size());
        out.extend_from_slice(&MAGIC);
        out.push(VERSION);
        out.push(self.dtype() as u8);
        out.extend_from_slice(&(self.shape.len() as u16).to_le_bytes());
        out.extend_from_slice(&(self.data.len() as u64).to_le_bytes());
        for &d in &self.shape {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        match &self.data {
            TensorData::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            TensorData::F64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            TensorData::C64(v) => v.iter().for_each(|z| {
                out.extend_from_slice(&z.re.to_le_bytes());
                out.extend_from_slice(&z.im.to_le_bytes());
            }),
            TensorData::C128(v) => v.iter().for_each(|z| {
                out.extend_from_slice(&z.re.to_le_bytes());
                out.extend_from_slice(&z.im.to_le_bytes());
            }),
            TensorData::I64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            TensorData::U8(v) => out.extend_from_slice(v),
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN || bytes[..4] != MAGIC {
            return Err(Error::Format("missing tensor magic".into()));
        }
        if bytes[4] != VERSION {
            return Err(Error::Format(format!("unsupported tensor version {}", bytes[4])));
        }
        let dtype = DType::from_code(bytes[5])?;
        let rank = u16::from_le_bytes([bytes[6], bytes[7]]) as usize;
        let count = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
        let data_start = HEADER_LEN + 8 * rank;
        if bytes.len() < data_start {
            return Err(Error::Format("truncated tensor dims".into()));
        }
        let shape: Vec<usize> = bytes[HEADER_LEN..data_start]
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().unwrap()) as usize)
            .collect();
        let product = shape.iter().try_fold(1u64, |acc, &d| acc.checked_mul(d as u64));
        if product != Some(count) {
            return Err(Error::Format(format!(
                "dims {shape:?} disagree with element count {count}"
            )));
        }
        let payload = &bytes[data_start..];
        let expected = (count as usize)
            .checked_mul(dtype.size())
            .ok_or_else(|| Error::Format("tensor too large".into()))?;
        if payload.len() != expected {
            return Err(Error::Format(format!(
                "tensor payload has {} bytes, expected {expected}",
                payload.len()
            )));
        }
        let data = match dtype {
            DType::F32 => TensorData::F32(payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect()),
            DType::F64 => TensorData::F64(payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect()),
            DType::C64 => TensorData::C64(
                payload
                    .chunks_exact(8)
                    .map(|c| {
                        Complex32::new(
                            f32::from_le_bytes(c[..4].try_into().unwrap()),
                            f32::from_le_bytes(c[4..].try_into().unwrap()),
                        )
                    })
                    .collect(),
            ),
            DType::C128 => TensorData::C128(
                payload
                    .chunks_exact(16)
                    .map(|c| {
                        Complex64::new(
                            f64::from_le_bytes(c[..8].try_into().unwrap()),
                            f64::from_le_bytes(c[8..].try_into().unwrap()),
                        )
                    })
                    .collect(),
            ),
            DType::I64 => TensorData::I64(payload.chunks_exact(8).map(|c| i64::from_le_bytes(c.try_into().unwrap())).collect()),
            DType::U8 => TensorData::U8(payload.to_vec()),
        };
        Tensor::new(shape, data)
    }
}

pub fn write_tensor(path: &Path, tensor: &Tensor) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    file.write_all(&tensor.to_bytes())?;
    Ok(())
}

pub fn read_tensor(path: &Path) -> Result<Tensor> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    Tensor::from_bytes(&bytes).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        e => e,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let t = Tensor::f64(vec![2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let b = t.to_bytes();
        assert_eq!(&b[..4], b"MVST");
        assert_eq!(b[4], 1);
        assert_eq!(b[5], 2);
        assert_eq!(&b[6..8], &[2, 0]);
        assert_eq!(u64::from_le_bytes(b[8..16].try_into().unwrap()), 6);
        assert_eq!(u64::from_le_bytes(b[16..24].try_into().unwrap()), 2);
        assert_eq!(u64::from_le_bytes(b[24..32].try_into().unwrap()), 3);
        assert_eq!(f64::from_le_bytes(b[32..40].try_into().unwrap()), 1.0);
        assert_eq!(b.len(), 32 + 48);
    }

    #[test]
    fn every_dtype_round_trips() {
        let cases = vec![
            Tensor::new(vec![3], TensorData::F32(vec![1.5, -0.0, f32::MAX])).unwrap(),
            Tensor::new(vec![1, 2], TensorData::F64(vec![f64::MIN_POSITIVE, -3.25])).unwrap(),
            Tensor::new(vec![2], TensorData::C64(vec![Complex32::new(1.0, -2.0); 2])).unwrap(),
            Tensor::new(vec![2, 1, 1], TensorData::C128(vec![Complex64::new(0.1, 0.2), Complex64::new(-7.0, 1e-300)])).unwrap(),
            Tensor::new(vec![2], TensorData::I64(vec![i64::MIN, 42])).unwrap(),
            Tensor::new(vec![0, 4], TensorData::U8(vec![])).unwrap(),
            Tensor::new(vec![], TensorData::F64(vec![2.5])).unwrap(),
        ];
        for t in cases {
            let back = Tensor::from_bytes(&t.to_bytes()).unwrap();
            assert_eq!(back, t);
            assert_eq!(back.to_bytes(), t.to_bytes());
        }
    }

    #[test]
    fn rejects_corrupt_input() {
        let t = Tensor::f64(vec![2], vec![1.0, 2.0]).unwrap();
        let good = t.to_bytes();
        let mut bad_magic = good.clone();
        bad_magic[0] = b'X';
        assert!(Tensor::from_bytes(&bad_magic).is_err());
        let mut bad_dtype = good.clone();
        bad_dtype[5] = 9;
        assert!(Tensor::from_bytes(&bad_dtype).is_err());
        assert!(Tensor::from_bytes(&good[..good.len() - 1]).is_err());
        let mut bad_count = good.clone();
        bad_count[8] = 3;
        assert!(Tensor::from_bytes(&bad_count).is_err());
        assert!(Tensor::f64(vec![3], vec![1.0]).is_err());
    }

    #[test]
    fn shape_expectations() {
        let t = Tensor::f64(vec![5, 4], vec![0.0; 20]).unwrap();
        assert!(t.expect_shape(&[None, Some(4)]).is_ok());
        assert!(t.expect_shape(&[Some(4), Some(4)]).is_err());
        assert!(t.expect_shape(&[None]).is_err());
        assert!(t.to_c128().unwrap().iter().all(|z| z.im == 0.0));
        assert!(Tensor::c128(vec![1], vec![Complex64::new(0.0, 1.0)]).unwrap().to_f64().is_err());
    }
}
