use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{RawDataset, Split, NUM_CLASSES};
use crate::error::Result;

use super::network::Network;
use super::train::{check_shape, eval_sample_seed, train_sample_seed};
use super::voting::{predict, VotingTable};

/// Accuracy and confusion counts for one split.
///
/// `confusion[true][predicted]`; samples with no prediction (every voting
/// neuron silent) are counted in `unpredicted[true]` and as errors, so
/// `row sum + unpredicted` equals the class population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub epoch: usize,
    pub split: Split,
    pub samples: usize,
    pub accuracy: f64,
    pub per_class_accuracy: [f64; NUM_CLASSES],
    pub confusion: [[u32; NUM_CLASSES]; NUM_CLASSES],
    pub unpredicted: [u32; NUM_CLASSES],
    pub wall_time_s: f64,
}

impl MetricsRecord {
    pub fn from_predictions(labels: &[u8], predictions: &[Option<u8>], split: Split) -> Self {
        let mut confusion = [[0u32; NUM_CLASSES]; NUM_CLASSES];
        let mut unpredicted = [0u32; NUM_CLASSES];
        let mut totals = [0u32; NUM_CLASSES];
        let mut correct = 0usize;
        for (&l, p) in labels.iter().zip(predictions) {
            totals[l as usize] += 1;
            match p {
                Some(p) => {
                    confusion[l as usize][*p as usize] += 1;
                    correct += (*p == l) as usize;
                }
                None => unpredicted[l as usize] += 1,
            }
        }
        let mut per_class_accuracy = [0.0; NUM_CLASSES];
        for c in 0..NUM_CLASSES {
            if totals[c] > 0 {
                per_class_accuracy[c] = confusion[c][c] as f64 / totals[c] as f64;
            }
        }
        Self {
            epoch: 0,
            split,
            samples: labels.len(),
            accuracy: if labels.is_empty() {
                0.0
            } else {
                correct as f64 / labels.len() as f64
            },
            per_class_accuracy,
            confusion,
            unpredicted,
            wall_time_s: 0.0,
        }
    }

    /// Classes ordered from lowest to highest accuracy among those present.
    pub fn worst_classes(&self, k: usize) -> Vec<usize> {
        let mut present: Vec<usize> = (0..NUM_CLASSES)
            .filter(|&c| self.confusion[c].iter().sum::<u32>() + self.unpredicted[c] > 0)
            .collect();
        present.sort_by(|&a, &b| {
            self.per_class_accuracy[a]
                .partial_cmp(&self.per_class_accuracy[b])
                .unwrap()
                .then(a.cmp(&b))
        });
        present.truncate(k);
        present
    }

    /// Writes the confusion matrix as CSV with a header row.
    pub fn confusion_csv(&self) -> String {
        let mut s = String::from("true\\pred");
        for c in 0..NUM_CLASSES {
            s.push_str(&format!(",{c}"));
        }
        s.push_str(",none\n");
        for (t, row) in self.confusion.iter().enumerate() {
            s.push_str(&t.to_string());
            for v in row {
                s.push_str(&format!(",{v}"));
            }
            s.push_str(&format!(",{}\n", self.unpredicted[t]));
        }
        s
    }
}

/// Predictions of the frozen network for every sample of a split.
pub fn predictions(net: &Network, votes: &VotingTable, data: &RawDataset, split: Split, run_seed: u64) -> Result<Vec<Option<u8>>> {
    check_shape(&net.spec, data)?;
    (0..data.len())
        .into_par_iter()
        .map(|i| {
            let s = match split {
                Split::Train => train_sample_seed(run_seed, i),
                Split::Test => eval_sample_seed(run_seed, i),
            };
            let counts = net.respond(&data.encode(i), s)?;
            Ok(predict(votes, &counts, net.spec.readout))
        })
        .collect()
}

pub fn evaluate(net: &Network, votes: &VotingTable, data: &RawDataset, split: Split, run_seed: u64) -> Result<MetricsRecord> {
    let start = Instant::now();
    let preds = predictions(net, votes, data, split, run_seed)?;
    let mut m = MetricsRecord::from_predictions(&data.labels, &preds, split);
    m.wall_time_s = start.elapsed().as_secs_f64();
    Ok(m)
}

const CSV_HEADER: &str = "run,epoch,split,samples,accuracy,per_class_accuracy,confusion,unpredicted,wall_time_s";

/// Appends one row per record; the header is written when the file is new.
pub fn append_metrics_csv(path: &Path, run: &str, record: &MetricsRecord) -> std::io::Result<()> {
    let fresh = !path.exists() || std::fs::metadata(path)?.len() == 0;
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    if fresh {
        writeln!(f, "{CSV_HEADER}")?;
    }
    let join = |v: Vec<String>| v.join(";");
    writeln!(
        f,
        "{},{},{},{},{:.6},{},{},{},{:.3}",
        run,
        record.epoch,
        match record.split {
            Split::Train => "train",
            Split::Test => "test",
        },
        record.samples,
        record.accuracy,
        join(record.per_class_accuracy.iter().map(|a| format!("{a:.6}")).collect()),
        join(record.confusion.iter().flatten().map(|c| c.to_string()).collect()),
        join(record.unpredicted.iter().map(|c| c.to_string()).collect()),
        record.wall_time_s
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictor_gives_identity() {
        let labels: Vec<u8> = (0..30).map(|i| (i % 10) as u8).collect();
        let preds: Vec<Option<u8>> = labels.iter().map(|&l| Some(l)).collect();
        let m = MetricsRecord::from_predictions(&labels, &preds, Split::Test);
        assert_eq!(m.accuracy, 1.0);
        for t in 0..10 {
            for p in 0..10 {
                assert_eq!(m.confusion[t][p], if t == p { 3 } else { 0 });
            }
        }
    }

    #[test]
    fn unpredicted_counts_as_error_and_rows_balance() {
        let labels = vec![0, 0, 1, 1];
        let preds = vec![Some(0), None, Some(0), Some(1)];
        let m = MetricsRecord::from_predictions(&labels, &preds, Split::Test);
        assert_eq!(m.accuracy, 0.5);
        assert_eq!(m.unpredicted[0], 1);
        for c in 0..2 {
            let row: u32 = m.confusion[c].iter().sum();
            assert_eq!(row + m.unpredicted[c], 2);
        }
        assert_eq!(m.per_class_accuracy[0], 0.5);
        assert_eq!(m.worst_classes(1), vec![0]);
    }

    #[test]
    fn csv_appends_with_single_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        let m = MetricsRecord::from_predictions(&[1], &[Some(1)], Split::Train);
        append_metrics_csv(&p, "a", &m).unwrap();
        append_metrics_csv(&p, "b", &m).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("run,epoch"));
        assert!(m.confusion_csv().lines().count() == 11);
    }
}
