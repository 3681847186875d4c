use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;
const TYPE_U8: u8 = 0x08;
const TYPE_F64: u8 = 0x0E;

/// Element payload of an IDX file.
#[derive(Debug, Clone, PartialEq)]
pub enum IdxData {
    U8(Vec<u8>),
    F64(Vec<f64>),
}

impl IdxData {
    fn type_code(&self) -> u8 {
        match self {
            IdxData::U8(_) => TYPE_U8,
            IdxData::F64(_) => TYPE_F64,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            IdxData::U8(v) => v.len(),
            IdxData::F64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// An n-dimensional IDX array (big-endian header, row-major body).
#[derive(Debug, Clone, PartialEq)]
pub struct IdxArray {
    pub dims: Vec<usize>,
    pub data: IdxData,
}

impl IdxArray {
    pub fn new(dims: Vec<usize>, data: IdxData) -> Result<Self> {
        if dims.is_empty() || dims.len() > 255 {
            return Err(Error::invalid("IDX arrays need 1 to 255 dimensions"));
        }
        let expected: usize = dims.iter().product();
        if expected != data.len() {
            return Err(Error::invalid(format!(
                "IDX dims {dims:?} need {expected} elements, got {}",
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn magic(&self) -> u32 {
        ((self.data.type_code() as u32) << 8) | self.dims.len() as u32
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 + 4 * self.dims.len() + self.data.len() * 8);
        out.extend_from_slice(&self.magic().to_be_bytes());
        for &d in &self.dims {
            out.extend_from_slice(&(d as u32).to_be_bytes());
        }
        match &self.data {
            IdxData::U8(v) => out.extend_from_slice(v),
            IdxData::F64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_be_bytes())),
        }
        out
    }

    /// Parses `bytes`; `path` only labels errors.
    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let truncated = |expected: usize| Error::Truncated {
            path: path.to_path_buf(),
            expected,
            found: bytes.len(),
        };
        if bytes.len() < 4 {
            return Err(truncated(4));
        }
        let magic = u32::from_be_bytes(bytes[..4].try_into().expect("4 bytes"));
        let type_code = bytes[2];
        let ndim = bytes[3] as usize;
        let elem = match type_code {
            TYPE_U8 => 1,
            TYPE_F64 => 8,
            _ => 0,
        };
        if bytes[0] != 0 || bytes[1] != 0 || elem == 0 || ndim == 0 {
            return Err(Error::BadMagic {
                path: path.to_path_buf(),
                found: magic,
                expected: IMAGE_MAGIC,
            });
        }
        let header = 4 + 4 * ndim;
        if bytes.len() < header {
            return Err(truncated(header));
        }
        let dims: Vec<usize> = bytes[4..header]
            .chunks_exact(4)
            .map(|c| u32::from_be_bytes(c.try_into().expect("4 bytes")) as usize)
            .collect();
        let count: usize = dims.iter().product();
        let total = header + count * elem;
        if bytes.len() < total {
            return Err(truncated(total));
        }
        if bytes.len() > total {
            return Err(Error::invalid(format!(
                "{}: {} trailing bytes after IDX body",
                path.display(),
                bytes.len() - total
            )));
        }
        let body = &bytes[header..total];
        let data = if elem == 1 {
            IdxData::U8(body.to_vec())
        } else {
            IdxData::F64(
                body.chunks_exact(8)
                    .map(|c| f64::from_be_bytes(c.try_into().expect("8 bytes")))
                    .collect(),
            )
        };
        Ok(Self { dims, data })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?, path)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }
}

fn expect_magic(arr: &IdxArray, path: &Path, expected: u32) -> Result<()> {
    if arr.magic() != expected {
        return Err(Error::BadMagic {
            path: PathBuf::from(path),
            found: arr.magic(),
            expected,
        });
    }
    Ok(())
}

/// Raw MNIST-style image block.
#[derive(Debug, Clone, PartialEq)]
pub struct IdxImages {
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl IdxImages {
    pub fn count(&self) -> usize {
        self.pixels.len() / (self.rows * self.cols).max(1)
    }

    pub fn to_array(&self) -> Result<IdxArray> {
        IdxArray::new(
            vec![self.count(), self.rows, self.cols],
            IdxData::U8(self.pixels.clone()),
        )
    }
}

pub fn read_idx_images(path: &Path) -> Result<IdxImages> {
    let arr = IdxArray::read(path)?;
    expect_magic(&arr, path, IMAGE_MAGIC)?;
    let IdxData::U8(pixels) = arr.data else {
        unreachable!("magic fixes the element type")
    };
    Ok(IdxImages {
        rows: arr.dims[1],
        cols: arr.dims[2],
        pixels,
    })
}

pub fn read_idx_labels(path: &Path) -> Result<Vec<u8>> {
    let arr = IdxArray::read(path)?;
    expect_magic(&arr, path, LABEL_MAGIC)?;
    let IdxData::U8(labels) = arr.data else {
        unreachable!("magic fixes the element type")
    };
    Ok(labels)
}

pub fn write_idx_images(path: &Path, images: &IdxImages) -> Result<()> {
    images.to_array()?.write(path)
}

pub fn write_idx_labels(path: &Path, labels: &[u8]) -> Result<()> {
    IdxArray::new(vec![labels.len()], IdxData::U8(labels.to_vec()))?.write(path)
}
