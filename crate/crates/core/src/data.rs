//! Dataset loading (IDX and CIFAR-10 binary), direct encoding and
//! class-balanced subsetting.

use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use byteorder::{BigEndian, ByteOrder};
use flate2::read::GzDecoder;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::LoadError;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;
pub const CIFAR_RECORD: usize = 3073;
pub const NUM_CLASSES: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub source: String,
    /// Hex SHA-256 over labels followed by pixels.
    pub checksum: String,
}

/// Images stored `n x channels x height x width`, one byte per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawDataset {
    pub images: Vec<u8>,
    pub labels: Vec<u8>,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub meta: DatasetMeta,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodedSample {
    pub currents: Vec<f64>,
    pub label: u8,
}

impl RawDataset {
    pub fn new(images: Vec<u8>, labels: Vec<u8>, shape: (usize, usize, usize), source: &str) -> Result<Self, LoadError> {
        let (channels, height, width) = shape;
        let per = channels * height * width;
        if per == 0 || images.len() != labels.len() * per {
            return Err(LoadError::CountMismatch {
                images: if per == 0 { 0 } else { images.len() / per },
                labels: labels.len(),
            });
        }
        if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &l)| l as usize >= NUM_CLASSES) {
            return Err(LoadError::BadLabel { index, label });
        }
        let checksum = checksum(&labels, &images);
        Ok(Self {
            images,
            labels,
            channels,
            height,
            width,
            meta: DatasetMeta {
                source: source.to_string(),
                checksum,
            },
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn sample_len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn image(&self, i: usize) -> &[u8] {
        let n = self.sample_len();
        &self.images[i * n..(i + 1) * n]
    }

    /// Direct encoding of one image: `pixel / 255`.
    pub fn encode(&self, i: usize) -> Vec<f64> {
        self.image(i).iter().map(|&p| p as f64 / 255.0).collect()
    }

    /// Keeps the listed samples in the given order.
    pub fn select(&self, indices: &[usize], source: &str) -> Self {
        let mut images = Vec::with_capacity(indices.len() * self.sample_len());
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            images.extend_from_slice(self.image(i));
            labels.push(self.labels[i]);
        }
        Self::new(images, labels, self.shape(), source).expect("subset of a valid dataset")
    }

    /// First `n` samples.
    pub fn head(&self, n: usize) -> Self {
        let idx: Vec<usize> = (0..n.min(self.len())).collect();
        self.select(&idx, &format!("{}[..{}]", self.meta.source, idx.len()))
    }

    pub fn class_counts(&self) -> [usize; NUM_CLASSES] {
        let mut counts = [0; NUM_CLASSES];
        for &l in &self.labels {
            counts[l as usize] += 1;
        }
        counts
    }
}

fn checksum(labels: &[u8], images: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(labels);
    h.update(images);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Reads a file, gunzipping it when it starts with the gzip magic.
pub fn read_maybe_gz(path: &Path) -> Result<Vec<u8>, LoadError> {
    let io = |source| LoadError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut raw = Vec::new();
    File::open(path).and_then(|mut f| f.read_to_end(&mut raw)).map_err(io)?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(&raw[..]).read_to_end(&mut out).map_err(io)?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn header(bytes: &[u8], words: usize, path: &Path, magic: u32) -> Result<Vec<usize>, LoadError> {
    let p = path.display().to_string();
    if bytes.len() < 4 * words {
        return Err(LoadError::Truncated {
            path: p,
            expected: 4 * words,
            found: bytes.len(),
        });
    }
    let found = BigEndian::read_u32(&bytes[0..4]);
    if found != magic {
        return Err(LoadError::WrongMagic {
            path: p,
            expected: magic,
            found,
        });
    }
    Ok((1..words).map(|w| BigEndian::read_u32(&bytes[4 * w..4 * w + 4]) as usize).collect())
}

/// Parses an IDX image file (`0x00000803`) and label file (`0x00000801`).
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<RawDataset, LoadError> {
    let img = read_maybe_gz(images_path)?;
    let lab = read_maybe_gz(labels_path)?;
    let dims = header(&img, 4, images_path, IDX_IMAGES_MAGIC)?;
    let (n, h, w) = (dims[0], dims[1], dims[2]);
    let expected = 16 + n * h * w;
    if img.len() < expected {
        return Err(LoadError::Truncated {
            path: images_path.display().to_string(),
            expected,
            found: img.len(),
        });
    }
    let ln = header(&lab, 2, labels_path, IDX_LABELS_MAGIC)?[0];
    if lab.len() < 8 + ln {
        return Err(LoadError::Truncated {
            path: labels_path.display().to_string(),
            expected: 8 + ln,
            found: lab.len(),
        });
    }
    if ln != n {
        return Err(LoadError::CountMismatch { images: n, labels: ln });
    }
    RawDataset::new(
        img[16..expected].to_vec(),
        lab[8..8 + n].to_vec(),
        (1, h, w),
        &images_path.display().to_string(),
    )
}

/// Concatenates CIFAR-10 binary batches (label byte + 3072 channel-major
/// RGB bytes per record).
pub fn load_cifar10<P: AsRef<Path>>(batch_paths: &[P]) -> Result<RawDataset, LoadError> {
    let mut images = Vec::new();
    let mut labels = Vec::new();
    let mut names = Vec::new();
    for path in batch_paths {
        let path = path.as_ref();
        let bytes = read_maybe_gz(path)?;
        if bytes.len() % CIFAR_RECORD != 0 {
            return Err(LoadError::RecordSize {
                path: path.display().to_string(),
                size: bytes.len(),
                record: CIFAR_RECORD,
            });
        }
        for rec in bytes.chunks_exact(CIFAR_RECORD) {
            labels.push(rec[0]);
            images.extend_from_slice(&rec[1..]);
        }
        names.push(path.display().to_string());
    }
    RawDataset::new(images, labels, (3, 32, 32), &names.join(","))
}

/// Exactly `per_class` samples of each label, drawn uniformly without
/// replacement with a seeded RNG. Output is ordered by class, then by
/// original index.
pub fn small_sample_subset(raw: &RawDataset, per_class: usize, seed: u64) -> Result<RawDataset, LoadError> {
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); NUM_CLASSES];
    for (i, &l) in raw.labels.iter().enumerate() {
        by_class[l as usize].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = Vec::with_capacity(per_class * NUM_CLASSES);
    for (class, pool) in by_class.iter_mut().enumerate() {
        if pool.len() < per_class {
            return Err(LoadError::InsufficientClass {
                class: class as u8,
                available: pool.len(),
                requested: per_class,
            });
        }
        let mut pick: Vec<usize> = pool.choose_multiple(&mut rng, per_class).copied().collect();
        pick.sort_unstable();
        chosen.extend(pick);
    }
    Ok(raw.select(
        &chosen,
        &format!("{}[{} per class, seed {}]", raw.meta.source, per_class, seed),
    ))
}

/// Dataset families with their standard on-disk file names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetId {
    Mnist,
    Fashion,
    Cifar10,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl DatasetId {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mnist" => Some(Self::Mnist),
            "fashion" | "fashionmnist" | "fashion-mnist" => Some(Self::Fashion),
            "cifar10" | "cifar-10" => Some(Self::Cifar10),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Mnist => "mnist",
            Self::Fashion => "fashion",
            Self::Cifar10 => "cifar10",
        }
    }

    /// Files of one split below `dir`; `.gz` variants are picked up when the
    /// plain file is absent.
    pub fn files(&self, dir: &Path, split: Split) -> Vec<PathBuf> {
        let names: Vec<String> = match (self, split) {
            (Self::Mnist | Self::Fashion, Split::Train) => {
                vec!["train-images-idx3-ubyte".into(), "train-labels-idx1-ubyte".into()]
            }
            (Self::Mnist | Self::Fashion, Split::Test) => {
                vec!["t10k-images-idx3-ubyte".into(), "t10k-labels-idx1-ubyte".into()]
            }
            (Self::Cifar10, Split::Train) => (1..=5).map(|k| format!("data_batch_{k}.bin")).collect(),
            (Self::Cifar10, Split::Test) => vec!["test_batch.bin".into()],
        };
        names
            .into_iter()
            .map(|n| {
                let plain = dir.join(&n);
                let gz = dir.join(format!("{n}.gz"));
                if !plain.exists() && gz.exists() {
                    gz
                } else {
                    plain
                }
            })
            .collect()
    }

    /// Loads one split from `dir`.
    pub fn load(&self, dir: &Path, split: Split) -> Result<RawDataset, LoadError> {
        let files = self.files(dir, split);
        match self {
            Self::Mnist | Self::Fashion => load_idx(&files[0], &files[1]),
            Self::Cifar10 => load_cifar10(&files),
        }
    }
}
