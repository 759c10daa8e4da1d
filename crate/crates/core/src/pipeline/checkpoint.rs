//! Binary checkpoint format.
//!
//! Layout (little endian): magic, format version, SHA-256 of the network
//! spec, run seed, completed conv and FC epochs, spec JSON, conv weights,
//! FC weights, FC adaptive thresholds, optional voting table, then a
//! SHA-256 of everything before it.

use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::{Array2, Array4};
use sha2::{Digest, Sha256};

use crate::data::NUM_CLASSES;
use crate::error::{CheckpointError, Error, Result};

use super::network::Network;
use super::spec::NetworkSpec;
use super::voting::VotingTable;

pub const MAGIC: &[u8; 8] = b"SPKPLAST";
pub const VERSION: u32 = 1;

/// Everything needed to resume training or evaluate.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub network: Network,
    pub seed: u64,
    pub conv_epochs_done: u32,
    pub fc_epochs_done: u32,
    pub votes: Option<VotingTable>,
}

fn bad(msg: impl Into<String>) -> Error {
    CheckpointError::BadHeader(msg.into()).into()
}

fn write_f64s(out: &mut Vec<u8>, values: &[f64]) {
    out.write_u64::<LittleEndian>(values.len() as u64).unwrap();
    for &v in values {
        out.write_f64::<LittleEndian>(v).unwrap();
    }
}

fn read_f64s(r: &mut &[u8], expected: usize, what: &str) -> Result<Vec<f64>> {
    let n = r.read_u64::<LittleEndian>().map_err(|_| bad(format!("truncated {what}")))? as usize;
    if n != expected {
        return Err(bad(format!("{what} has {n} values, spec implies {expected}")));
    }
    (0..n)
        .map(|_| r.read_f64::<LittleEndian>().map_err(|_| bad(format!("truncated {what}"))))
        .collect()
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let net = &self.network;
        let spec_json = serde_json::to_vec(&net.spec).expect("spec serializes");
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.write_u32::<LittleEndian>(VERSION).unwrap();
        out.extend_from_slice(&net.spec.hash());
        out.write_u64::<LittleEndian>(self.seed).unwrap();
        out.write_u32::<LittleEndian>(self.conv_epochs_done).unwrap();
        out.write_u32::<LittleEndian>(self.fc_epochs_done).unwrap();
        out.write_u64::<LittleEndian>(spec_json.len() as u64).unwrap();
        out.extend_from_slice(&spec_json);
        write_f64s(&mut out, net.conv.weights.as_slice().expect("standard layout"));
        write_f64s(&mut out, net.fc.weights.as_slice().expect("standard layout"));
        write_f64s(&mut out, &net.fc.theta_plus);
        match &self.votes {
            None => out.push(0),
            Some(v) => {
                out.push(1);
                for &a in &v.assignment {
                    out.write_i16::<LittleEndian>(a).unwrap();
                }
                for row in &v.response {
                    for &x in row {
                        out.write_f64::<LittleEndian>(x).unwrap();
                    }
                }
            }
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        out
    }

    /// Parses and verifies a checkpoint. When `expected_spec` is given its
    /// hash must match the stored one.
    pub fn from_bytes(bytes: &[u8], expected_spec: Option<&NetworkSpec>) -> Result<Self> {
        if bytes.len() < MAGIC.len() + 4 + 32 + 32 || &bytes[..MAGIC.len()] != MAGIC {
            return Err(bad("not a checkpoint file"));
        }
        let (body, digest) = bytes.split_at(bytes.len() - 32);
        if Sha256::digest(body).as_slice() != digest {
            return Err(bad("checksum mismatch"));
        }
        let mut r = &body[MAGIC.len()..];
        let version = r.read_u32::<LittleEndian>().map_err(|_| bad("truncated"))?;
        if version != VERSION {
            return Err(CheckpointError::Version(version).into());
        }
        let mut stored_hash = [0u8; 32];
        r.read_exact(&mut stored_hash).map_err(|_| bad("truncated"))?;
        let seed = r.read_u64::<LittleEndian>().map_err(|_| bad("truncated"))?;
        let conv_epochs_done = r.read_u32::<LittleEndian>().map_err(|_| bad("truncated"))?;
        let fc_epochs_done = r.read_u32::<LittleEndian>().map_err(|_| bad("truncated"))?;
        let json_len = r.read_u64::<LittleEndian>().map_err(|_| bad("truncated"))? as usize;
        if json_len > r.len() {
            return Err(bad("truncated spec"));
        }
        let (json, rest) = r.split_at(json_len);
        r = rest;
        let spec: NetworkSpec = serde_json::from_slice(json).map_err(|e| bad(format!("spec: {e}")))?;
        let hex = |h: &[u8]| h.iter().map(|b| format!("{b:02x}")).collect::<String>();
        if spec.hash() != stored_hash {
            return Err(bad("stored spec hash does not match stored spec"));
        }
        if let Some(exp) = expected_spec {
            if exp.hash() != stored_hash {
                return Err(CheckpointError::HashMismatch {
                    checkpoint: hex(&stored_hash),
                    expected: exp.hash_hex(),
                }
                .into());
            }
        }
        let mut network = Network::init(spec, seed).map_err(|e| bad(format!("spec: {e}")))?;
        let cw = network.conv.weights.raw_dim();
        let conv = read_f64s(&mut r, network.conv.weights.len(), "conv weights")?;
        network.conv.weights = Array4::from_shape_vec(cw, conv).map_err(|e| bad(e.to_string()))?;
        let fw = network.fc.weights.raw_dim();
        let fc = read_f64s(&mut r, network.fc.weights.len(), "fc weights")?;
        network.fc.weights = Array2::from_shape_vec(fw, fc).map_err(|e| bad(e.to_string()))?;
        network.fc.theta_plus = read_f64s(&mut r, network.fc.theta_plus.len(), "fc thresholds")?;
        let flag = r.read_u8().map_err(|_| bad("truncated"))?;
        let votes = match flag {
            0 => None,
            1 => {
                let n = network.fc.params.neurons;
                let mut assignment = Vec::with_capacity(n);
                for _ in 0..n {
                    assignment.push(r.read_i16::<LittleEndian>().map_err(|_| bad("truncated votes"))?);
                }
                let mut response = Vec::with_capacity(n);
                for _ in 0..n {
                    let mut row = [0.0; NUM_CLASSES];
                    for x in row.iter_mut() {
                        *x = r.read_f64::<LittleEndian>().map_err(|_| bad("truncated votes"))?;
                    }
                    response.push(row);
                }
                Some(VotingTable { assignment, response })
            }
            f => return Err(bad(format!("unknown votes flag {f}"))),
        };
        if !r.is_empty() {
            return Err(bad(format!("{} trailing bytes", r.len())));
        }
        network.check_finite()?;
        Ok(Self {
            network,
            seed,
            conv_epochs_done,
            fc_epochs_done,
            votes,
        })
    }

    /// Writes atomically through a temporary sibling file.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        {
            let mut f = std::fs::File::create(&tmp).map_err(CheckpointError::Io)?;
            f.write_all(&self.to_bytes()).map_err(CheckpointError::Io)?;
            f.sync_all().map_err(CheckpointError::Io)?;
        }
        std::fs::rename(&tmp, path).map_err(CheckpointError::Io)?;
        Ok(())
    }

    pub fn load(path: &Path, expected_spec: Option<&NetworkSpec>) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(CheckpointError::Io)?;
        Self::from_bytes(&bytes, expected_spec)
    }
}
