//! Reader for the IDX container used by the classic handwritten-digit corpora.

use std::path::Path;

use super::raster::GrayImage;
use crate::error::{Error, Result};

/// Parse an unsigned-byte IDX buffer: `(dims, payload)`.
fn parse_u8(bytes: &[u8], rank: usize) -> Result<(Vec<usize>, &[u8])> {
    if bytes.len() < 4 || bytes[0] != 0 || bytes[1] != 0 {
        return Err(Error::Format("missing IDX magic".into()));
    }
    if bytes[2] != 0x08 {
        return Err(Error::Format(format!("IDX element type {:#04x} is not u8", bytes[2])));
    }
    if bytes[3] as usize != rank {
        return Err(Error::Format(format!("expected IDX rank {rank}, found {}", bytes[3])));
    }
    let header = 4 + 4 * rank;
    if bytes.len() < header {
        return Err(Error::Format("truncated IDX header".into()));
    }
    let dims: Vec<usize> = bytes[4..header]
        .chunks_exact(4)
        .map(|c| u32::from_be_bytes([c[0], c[1], c[2], c[3]]) as usize)
        .collect();
    let count: usize = dims.iter().product();
    let payload = &bytes[header..];
    if payload.len() != count {
        return Err(Error::Format(format!(
            "IDX payload has {} bytes, dims {dims:?} need {count}",
            payload.len()
        )));
    }
    Ok((dims, payload))
}

/// Decode an IDX image file (rank 3, `n x rows x cols`).
pub fn decode_idx_images(bytes: &[u8]) -> Result<Vec<GrayImage>> {
    let (dims, payload) = parse_u8(bytes, 3)?;
    let (rows, cols) = (dims[1], dims[2]);
    if rows == 0 || cols == 0 {
        return Err(Error::Format("IDX images have zero size".into()));
    }
    payload
        .chunks_exact(rows * cols)
        .map(|px| GrayImage::from_u8(cols, rows, px))
        .collect()
}

/// Decode an IDX label file (rank 1).
pub fn decode_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    Ok(parse_u8(bytes, 1)?.1.to_vec())
}

pub fn read_idx_images(path: &Path) -> Result<Vec<GrayImage>> {
    decode_idx_images(&std::fs::read(path)?)
}

pub fn read_idx_labels(path: &Path) -> Result<Vec<u8>> {
    decode_idx_labels(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn encode(dims: &[u32], payload: &[u8]) -> Vec<u8> {
        let mut out = vec![0, 0, 0x08, dims.len() as u8];
        for d in dims {
            out.extend_from_slice(&d.to_be_bytes());
        }
        out.extend_from_slice(payload);
        out
    }

    #[test]
    fn decodes_images_and_labels() {
        let bytes = encode(&[2, 2, 3], &[0, 255, 0, 0, 0, 0, 10, 20, 30, 40, 50, 60]);
        let imgs = decode_idx_images(&bytes).unwrap();
        assert_eq!(imgs.len(), 2);
        assert_eq!((imgs[0].width(), imgs[0].height()), (3, 2));
        assert_eq!(imgs[0].get(1, 0), 1.0);
        assert_eq!(imgs[1].get(2, 1), 60.0 / 255.0);
        assert_eq!(decode_idx_labels(&encode(&[3], &[7, 1, 4])).unwrap(), vec![7, 1, 4]);
    }

    #[test]
    fn rejects_malformed_files() {
        assert!(decode_idx_images(&encode(&[1, 2, 2], &[0, 0, 0])).is_err());
        assert!(decode_idx_images(&encode(&[3], &[0, 0, 0])).is_err());
        let mut wrong_type = encode(&[1], &[0]);
        wrong_type[2] = 0x0D;
        assert!(decode_idx_labels(&wrong_type).is_err());
        assert!(decode_idx_labels(&[1, 2]).is_err());
    }
}
