//! MNIST IDX container parsing (raw or gzip-compressed).

use std::io::Read;
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;

use super::DigitImage;
use crate::digest::sha256_hex;
use crate::error::{Error, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl IdxImages {
    pub fn count(&self) -> usize {
        self.pixels.len() / (self.rows * self.cols)
    }

    pub fn image(&self, i: usize) -> &[u8] {
        let n = self.rows * self.cols;
        &self.pixels[i * n..(i + 1) * n]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IdxData {
    Images(IdxImages),
    Labels(Vec<u8>),
}

fn be_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or(Error::Truncated {
            what: "IDX header".into(),
            expected: at + 4,
            actual: bytes.len(),
        })
}

/// Inflates gzip input; anything else is returned as is.
pub fn maybe_gunzip(bytes: Vec<u8>) -> Result<Vec<u8>> {
    if bytes.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(&bytes[..])
            .read_to_end(&mut out)
            .map_err(|e| Error::Format(format!("gzip stream: {e}")))?;
        Ok(out)
    } else {
        Ok(bytes)
    }
}

/// Parses an IDX image (magic 2051) or label (magic 2049) file.
pub fn parse_idx(bytes: &[u8]) -> Result<IdxData> {
    let magic = be_u32(bytes, 0)?;
    match magic {
        IMAGES_MAGIC => {
            let count = be_u32(bytes, 4)? as usize;
            let rows = be_u32(bytes, 8)? as usize;
            let cols = be_u32(bytes, 12)? as usize;
            if rows == 0 || cols == 0 {
                return Err(Error::Format(format!("IDX images with empty extent {rows}x{cols}")));
            }
            let expected = 16 + count * rows * cols;
            if bytes.len() < expected {
                return Err(Error::Truncated {
                    what: "IDX image payload".into(),
                    expected,
                    actual: bytes.len(),
                });
            }
            Ok(IdxData::Images(IdxImages {
                rows,
                cols,
                pixels: bytes[16..expected].to_vec(),
            }))
        }
        LABELS_MAGIC => {
            let count = be_u32(bytes, 4)? as usize;
            let expected = 8 + count;
            if bytes.len() < expected {
                return Err(Error::Truncated {
                    what: "IDX label payload".into(),
                    expected,
                    actual: bytes.len(),
                });
            }
            Ok(IdxData::Labels(bytes[8..expected].to_vec()))
        }
        other => Err(Error::Format(format!(
            "unknown IDX magic {other} (0x{other:08x}); expected 2051 for images or 2049 for labels"
        ))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    fn prefix(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "t10k",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

/// One MNIST split with the digests of the files it came from.
#[derive(Debug, Clone)]
pub struct MnistSplit {
    pub split: Split,
    pub digits: Vec<DigitImage>,
    pub images_digest: String,
    pub labels_digest: String,
}

/// File names accepted for a split, in lookup order.
pub fn candidate_names(split: Split, kind: &str) -> Vec<String> {
    let p = split.prefix();
    let ext = if kind == "images" { "idx3" } else { "idx1" };
    vec![
        format!("{p}-{kind}-{ext}-ubyte"),
        format!("{p}-{kind}-{ext}-ubyte.gz"),
        format!("{p}-{kind}.{ext}-ubyte"),
        format!("{p}-{kind}.{ext}-ubyte.gz"),
    ]
}

fn find_file(dir: &Path, split: Split, kind: &str) -> Result<PathBuf> {
    let names = candidate_names(split, kind);
    names.iter().map(|n| dir.join(n)).find(|p| p.is_file()).ok_or_else(|| {
        Error::io(
            dir.join(&names[0]),
            std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("MNIST {} {kind} not found; expected one of {names:?}", split.name()),
            ),
        )
    })
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

/// Loads one split from a directory holding the standard MNIST file names.
pub fn load_split(dir: &Path, split: Split) -> Result<MnistSplit> {
    let img_path = find_file(dir, split, "images")?;
    let lbl_path = find_file(dir, split, "labels")?;
    let img_raw = maybe_gunzip(read(&img_path)?)?;
    let lbl_raw = maybe_gunzip(read(&lbl_path)?)?;
    let images = match parse_idx(&img_raw)? {
        IdxData::Images(i) => i,
        IdxData::Labels(_) => {
            return Err(Error::Format(format!(
                "{} holds labels, not images",
                img_path.display()
            )))
        }
    };
    let labels = match parse_idx(&lbl_raw)? {
        IdxData::Labels(l) => l,
        IdxData::Images(_) => {
            return Err(Error::Format(format!(
                "{} holds images, not labels",
                lbl_path.display()
            )))
        }
    };
    if images.count() != labels.len() {
        return Err(Error::Format(format!(
            "{} images but {} labels in MNIST {} split",
            images.count(),
            labels.len(),
            split.name()
        )));
    }
    let digits = (0..labels.len())
        .map(|i| DigitImage::new(images.rows, images.cols, images.image(i).to_vec(), labels[i]))
        .collect::<Result<Vec<_>>>()?;
    Ok(MnistSplit {
        split,
        digits,
        images_digest: sha256_hex(&img_raw),
        labels_digest: sha256_hex(&lbl_raw),
    })
}
