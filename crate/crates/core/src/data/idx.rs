//! IDX container (big-endian, as used for MNIST). Only unsigned-byte payloads
//! are supported. Gzip-compressed files are detected by their magic bytes.

use std::io::{Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use nalgebra::DMatrix;

use super::{Dataset, Target};
use crate::error::{Error, Result};

const UBYTE: u8 = 0x08;
pub const MNIST_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const MNIST_LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxArray {
    pub dims: Vec<usize>,
    pub data: Vec<u8>,
}

impl IdxArray {
    pub fn magic(&self) -> u32 {
        ((UBYTE as u32) << 8) | self.dims.len() as u32
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 {
            return Err(Error::parse(0, "file shorter than the 4-byte magic number"));
        }
        if bytes[0] != 0 || bytes[1] != 0 {
            return Err(Error::parse(0, "magic number must start with two zero bytes"));
        }
        if bytes[2] != UBYTE {
            return Err(Error::parse(
                2,
                format!("unsupported element type 0x{:02x} (only unsigned byte)", bytes[2]),
            ));
        }
        let ndims = bytes[3] as usize;
        if ndims == 0 {
            return Err(Error::parse(3, "zero dimensions"));
        }
        let header = 4 + 4 * ndims;
        if bytes.len() < header {
            return Err(Error::parse(
                bytes.len() as u64,
                format!("truncated header: need {header} bytes"),
            ));
        }
        let dims: Vec<usize> = (0..ndims)
            .map(|d| {
                let o = 4 + 4 * d;
                u32::from_be_bytes([bytes[o], bytes[o + 1], bytes[o + 2], bytes[o + 3]]) as usize
            })
            .collect();
        let expected = dims.iter().product::<usize>();
        let payload = &bytes[header..];
        if payload.len() != expected {
            return Err(Error::parse(
                header as u64,
                format!("payload has {} bytes, dimensions require {expected}", payload.len()),
            ));
        }
        Ok(IdxArray {
            dims,
            data: payload.to_vec(),
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 + 4 * self.dims.len() + self.data.len());
        out.extend_from_slice(&self.magic().to_be_bytes());
        for &d in &self.dims {
            out.extend_from_slice(&(d as u32).to_be_bytes());
        }
        out.extend_from_slice(&self.data);
        out
    }
}

fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let raw = std::fs::read(path)?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(&raw[..]).read_to_end(&mut out)?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

pub fn read_idx(path: impl AsRef<Path>) -> Result<IdxArray> {
    IdxArray::from_bytes(&read_maybe_gz(path.as_ref())?)
}

/// Writes an IDX file, gzip-compressed when the path ends in `.gz`.
pub fn write_idx(path: impl AsRef<Path>, arr: &IdxArray) -> Result<()> {
    let path = path.as_ref();
    let bytes = arr.to_bytes();
    if path.extension().is_some_and(|e| e == "gz") {
        let mut enc = GzEncoder::new(std::fs::File::create(path)?, Compression::default());
        enc.write_all(&bytes)?;
        enc.finish()?;
    } else {
        std::fs::write(path, bytes)?;
    }
    Ok(())
}

/// Images become flattened raw pixel rows in [0, 255]; no normalization.
pub fn load_mnist_idx(images: impl AsRef<Path>, labels: impl AsRef<Path>) -> Result<Dataset> {
    let img = read_idx(images)?;
    let lab = read_idx(labels)?;
    if img.magic() != MNIST_IMAGES_MAGIC {
        return Err(Error::parse(0, format!("image magic 0x{:08x}, expected 0x00000803", img.magic())));
    }
    if lab.magic() != MNIST_LABELS_MAGIC {
        return Err(Error::parse(0, format!("label magic 0x{:08x}, expected 0x00000801", lab.magic())));
    }
    let n = img.dims[0];
    if lab.dims[0] != n {
        return Err(Error::parse(4, format!("{n} images but {} labels", lab.dims[0])));
    }
    let width = img.dims[1] * img.dims[2];
    let pixels: Vec<f64> = img.data.iter().map(|&p| p as f64).collect();
    let x = DMatrix::from_row_slice(n, width, &pixels);
    let labels: Vec<usize> = lab.data.iter().map(|&l| l as usize).collect();
    let n_classes = labels.iter().max().map_or(0, |m| m + 1).max(10);
    let names = (0..n_classes).map(|c| c.to_string()).collect();
    let feature_names = (0..width).map(|j| format!("px{j}")).collect();
    Dataset::new(x, Target::Class { labels, names }, feature_names)
}
