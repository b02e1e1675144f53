//! Packed sample files and the dataset manifest.
//!
//! Sample file layout (all integers little-endian):
//!
//! ```text
//! magic      8 bytes   "DNSAMPL1"
//! height     u32
//! width      u32
//! signal_len u32
//! slots      u32
//! count      u64
//! count records of:
//!   image        height*width f32   pixel / 255
//!   signal       signal_len f32     one-hot cue
//!   target       u8
//!   slot_labels  slots u8           255 marks a blank slot
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{pixel_value, CompositeSample, DatasetSpec, MnistSplit, SampleSet, Split, Task};
use crate::digest::Hasher;
use crate::error::{Error, Result};

pub const TRAIN_FILE: &str = "train.bin";
pub const TEST_FILE: &str = "test.bin";
pub const MANIFEST_FILE: &str = "manifest.txt";

const MAGIC: &[u8; 8] = b"DNSAMPL1";
const HEADER_LEN: usize = 8 + 4 * 4 + 8;
const BLANK_SLOT: u8 = 255;

fn header(set: &SampleSet) -> Vec<u8> {
    let g = set.geometry();
    let mut h = Vec::with_capacity(HEADER_LEN);
    h.extend_from_slice(MAGIC);
    for v in [g.height(), g.width(), set.task.signal_len(), g.slots()] {
        h.extend_from_slice(&(v as u32).to_le_bytes());
    }
    h.extend_from_slice(&(set.samples.len() as u64).to_le_bytes());
    h
}

fn encode_record(s: &CompositeSample, out: &mut Vec<u8>) {
    out.clear();
    for &p in &s.pixels {
        out.extend_from_slice(&pixel_value(p).to_le_bytes());
    }
    for &v in &s.signal {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.push(s.target);
    out.extend(s.slot_labels.iter().map(|l| l.unwrap_or(BLANK_SLOT)));
}

/// SHA-256 of the packed file encoding of `set`.
pub fn samples_digest(set: &SampleSet) -> String {
    let mut hasher = Hasher::new();
    hasher.update(&header(set));
    let mut rec = Vec::new();
    for s in &set.samples {
        encode_record(s, &mut rec);
        hasher.update(&rec);
    }
    hasher.finish()
}

pub fn write_samples(path: &Path, set: &SampleSet) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    w.write_all(&header(set)).map_err(io)?;
    let mut rec = Vec::new();
    for s in &set.samples {
        encode_record(s, &mut rec);
        w.write_all(&rec).map_err(io)?;
    }
    w.flush().map_err(io)
}

fn le_u32(b: &[u8]) -> usize {
    u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize
}

pub fn read_samples(path: &Path, task: Task, split: Split) -> Result<SampleSet> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let mut head = [0u8; HEADER_LEN];
    r.read_exact(&mut head).map_err(|e| Error::io(path, e))?;
    if &head[..8] != MAGIC {
        return Err(Error::Format(format!("{} is not a packed sample file", path.display())));
    }
    let (h, w, sig, slots) = (
        le_u32(&head[8..]),
        le_u32(&head[12..]),
        le_u32(&head[16..]),
        le_u32(&head[20..]),
    );
    let count = u64::from_le_bytes(head[24..32].try_into().expect("8 bytes")) as usize;
    let g = task.geometry();
    if (h, w, sig, slots) != (g.height(), g.width(), task.signal_len(), g.slots()) {
        return Err(Error::Format(format!(
            "{}: header geometry {h}x{w}, signal {sig}, slots {slots} does not match task {task}",
            path.display()
        )));
    }
    let rec_len = 4 * (h * w + sig) + 1 + slots;
    let mut buf = vec![0u8; rec_len];
    let mut samples = Vec::with_capacity(count);
    for i in 0..count {
        r.read_exact(&mut buf).map_err(|_| Error::Truncated {
            what: format!("{} record {i}", path.display()),
            expected: HEADER_LEN + count * rec_len,
            actual: HEADER_LEN + i * rec_len,
        })?;
        let floats = |range: std::ops::Range<usize>| {
            buf[range]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect::<Vec<f32>>()
        };
        let pixels = floats(0..4 * h * w)
            .into_iter()
            .map(|v| {
                let b = (v * 255.0).round();
                if !(0.0..=255.0).contains(&b) || pixel_value(b as u8) != v {
                    return Err(Error::Format(format!(
                        "{} record {i}: pixel {v} is not a byte / 255 value",
                        path.display()
                    )));
                }
                Ok(b as u8)
            })
            .collect::<Result<Vec<u8>>>()?;
        let signal = floats(4 * h * w..4 * (h * w + sig));
        let tail = &buf[4 * (h * w + sig)..];
        samples.push(CompositeSample {
            geometry: g,
            pixels,
            signal,
            target: tail[0],
            slot_labels: tail[1..].iter().map(|&l| (l != BLANK_SLOT).then_some(l)).collect(),
            sources: Vec::new(),
        });
    }
    Ok(SampleSet { task, split, samples })
}

/// Human-readable `key = value` description of a generated dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    pub const FORMAT: &'static str = "dualnet-multimnist-v1";

    pub(super) fn describe(
        spec: &DatasetSpec,
        train_pool: &MnistSplit,
        test_pool: &MnistSplit,
        train: &SampleSet,
        test: &SampleSet,
    ) -> Self {
        let train_digest = samples_digest(train);
        let test_digest = samples_digest(test);
        let mut entries: Vec<(String, String)> = vec![
            ("format".into(), Self::FORMAT.into()),
            ("task".into(), spec.task.to_string()),
            ("slots".into(), spec.task.slots().to_string()),
            ("seed".into(), spec.seed.to_string()),
            ("scale".into(), spec.scale.to_string()),
            ("train_count".into(), spec.train_count.to_string()),
            ("test_count".into(), spec.test_count.to_string()),
            ("mnist_train_images".into(), train_pool.images_digest.clone()),
            ("mnist_train_labels".into(), train_pool.labels_digest.clone()),
            ("mnist_test_images".into(), test_pool.images_digest.clone()),
            ("mnist_test_labels".into(), test_pool.labels_digest.clone()),
            ("train_digest".into(), train_digest),
            ("test_digest".into(), test_digest),
        ];
        let mut h = Hasher::new();
        for (k, v) in &entries {
            h.field(k).field(v);
        }
        entries.push(("content_digest".into(), h.finish()));
        Self { entries }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::Format(format!("manifest lacks key {key:?}")))
    }

    pub fn content_digest(&self) -> &str {
        self.get("content_digest").unwrap_or_default()
    }

    pub fn task(&self) -> Result<Task> {
        self.require("task")?.parse()
    }

    pub fn spec(&self) -> Result<DatasetSpec> {
        let num = |k: &str| -> Result<u64> {
            self.require(k)?
                .parse()
                .map_err(|e| Error::Format(format!("manifest {k}: {e}")))
        };
        Ok(DatasetSpec {
            task: self.task()?,
            train_count: num("train_count")? as usize,
            test_count: num("test_count")? as usize,
            seed: num("seed")?,
            scale: num("scale")? as usize,
        })
    }

    /// Digests of the MNIST files the dataset was composed from.
    pub fn source_digests(&self) -> Vec<(&str, &str)> {
        self.entries
            .iter()
            .filter(|(k, _)| k.starts_with("mnist_"))
            .map(|(k, v)| (k.as_str(), v.as_str()))
            .collect()
    }

    pub fn render(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("manifest line {}: expected key = value", n + 1)))?;
            entries.push((k.trim().to_string(), v.trim().to_string()));
        }
        let m = Self { entries };
        if m.require("format")? != Self::FORMAT {
            return Err(Error::Format(format!(
                "unsupported manifest format {:?}",
                m.get("format")
            )));
        }
        Ok(m)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Checks that loaded sample sets hash to the recorded digests.
    pub fn verify(&self, train: &SampleSet, test: &SampleSet) -> Result<()> {
        for (key, set) in [("train_digest", train), ("test_digest", test)] {
            let expected = self.require(key)?;
            let actual = samples_digest(set);
            if expected != actual {
                return Err(Error::Digest {
                    what: key.into(),
                    expected: expected.into(),
                    actual,
                });
            }
        }
        Ok(())
    }
}
