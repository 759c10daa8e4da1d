//! Class assignment of FC neurons and voting prediction.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{RawDataset, NUM_CLASSES};
use crate::error::Result;

use super::network::Network;
use super::spec::Readout;
use super::train::{check_shape, train_sample_seed};

/// Class of each FC neuron (`-1` for neurons silent on every class) and the
/// mean per-class spike count it was derived from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VotingTable {
    pub assignment: Vec<i16>,
    pub response: Vec<[f64; NUM_CLASSES]>,
}

impl VotingTable {
    pub fn neurons(&self) -> usize {
        self.assignment.len()
    }

    /// Assigned neurons per class.
    pub fn class_sizes(&self) -> [usize; NUM_CLASSES] {
        let mut sizes = [0; NUM_CLASSES];
        for &a in &self.assignment {
            if a >= 0 {
                sizes[a as usize] += 1;
            }
        }
        sizes
    }
}

/// Builds the table from per-sample spike counts of the training pass.
/// Ties go to the lowest class index.
pub fn votes_from_responses(responses: &[Vec<u32>], labels: &[u8], neurons: usize) -> VotingTable {
    let mut sums = vec![[0.0f64; NUM_CLASSES]; neurons];
    let mut per_class = [0usize; NUM_CLASSES];
    for (counts, &label) in responses.iter().zip(labels) {
        per_class[label as usize] += 1;
        for (j, &c) in counts.iter().enumerate() {
            if c > 0 {
                sums[j][label as usize] += c as f64;
            }
        }
    }
    let response: Vec<[f64; NUM_CLASSES]> = sums
        .into_iter()
        .map(|mut row| {
            for (c, v) in row.iter_mut().enumerate() {
                if per_class[c] > 0 {
                    *v /= per_class[c] as f64;
                }
            }
            row
        })
        .collect();
    let assignment = response.iter().map(|row| argmax(row).map_or(-1, |c| c as i16)).collect();
    VotingTable { assignment, response }
}

/// Index of the largest strictly positive entry, lowest index on ties.
fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        if v > 0.0 && best.map_or(true, |b| v > values[b]) {
            best = Some(i);
        }
    }
    best
}

/// Runs the frozen network over labelled training data and assigns every
/// FC neuron to the class with the highest mean response.
pub fn assign_votes(net: &Network, data: &RawDataset, run_seed: u64) -> Result<VotingTable> {
    check_shape(&net.spec, data)?;
    let responses: Vec<Vec<u32>> = (0..data.len())
        .into_par_iter()
        .map(|i| net.respond(&data.encode(i), train_sample_seed(run_seed, i)))
        .collect::<Result<_>>()?;
    Ok(votes_from_responses(&responses, &data.labels, net.fc.params.neurons))
}

/// Class scores of one sample under the given readout.
pub fn class_scores(votes: &VotingTable, counts: &[u32], readout: Readout) -> [f64; NUM_CLASSES] {
    let mut scores = [0.0; NUM_CLASSES];
    let mut sizes = [0usize; NUM_CLASSES];
    for (&a, &c) in votes.assignment.iter().zip(counts) {
        if a < 0 {
            continue;
        }
        let a = a as usize;
        sizes[a] += 1;
        match readout {
            Readout::Mean => scores[a] += c as f64,
            Readout::Max => scores[a] = scores[a].max(c as f64),
        }
    }
    if readout == Readout::Mean {
        for (s, &n) in scores.iter_mut().zip(&sizes) {
            if n > 0 {
                *s /= n as f64;
            }
        }
    }
    scores
}

/// Predicted class, or `None` when no assigned neuron fired.
pub fn predict(votes: &VotingTable, counts: &[u32], readout: Readout) -> Option<u8> {
    argmax(&class_scores(votes, counts, readout)).map(|c| c as u8)
}
