//! Train-assign-evaluate runs and the mechanism ablation harness.

use serde::{Deserialize, Serialize};

use crate::data::{RawDataset, Split};
use crate::error::Result;
use crate::layers::Mechanisms;

use super::metrics::{evaluate, MetricsRecord};
use super::network::Network;
use super::spec::NetworkSpec;
use super::train::{train_layerwise, TrainConfig};
use super::voting::{assign_votes, VotingTable};

/// Result of one complete unsupervised run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub network: Network,
    pub votes: VotingTable,
    pub test: MetricsRecord,
}

/// Trains layer-wise on `train`, assigns votes on the same samples and
/// evaluates on `test`.
pub fn train_and_evaluate(spec: NetworkSpec, train: &RawDataset, test: &RawDataset, cfg: &TrainConfig) -> Result<RunOutcome> {
    let network = train_layerwise(spec, train, cfg, |_, r| {
        log::info!("{:?} epoch {} done: {} spikes, {:.1}s", r.phase, r.epoch, r.spikes, r.wall_time_s);
        Ok(())
    })?;
    let votes = assign_votes(&network, train, cfg.seed)?;
    let mut test_metrics = evaluate(&network, &votes, test, Split::Test, cfg.seed)?;
    test_metrics.epoch = cfg.fc_epochs;
    Ok(RunOutcome {
        network,
        votes,
        test: test_metrics,
    })
}

/// Named mechanism configurations, removing one module at a time in the
/// order synaptic filter, lateral inhibition, threshold balance.
pub fn standard_ablations() -> Vec<(&'static str, Mechanisms)> {
    vec![
        ("baseline", Mechanisms::default()),
        (
            "no-asf",
            Mechanisms {
                asf: false,
                ..Mechanisms::default()
            },
        ),
        (
            "no-asf-alic",
            Mechanisms {
                asf: false,
                alic: false,
                atb: true,
            },
        ),
        (
            "no-asf-alic-atb",
            Mechanisms {
                asf: false,
                alic: false,
                atb: false,
            },
        ),
    ]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationRow {
    pub name: String,
    pub mechanisms: Mechanisms,
    pub seed: u64,
    pub metrics: MetricsRecord,
}

/// Runs the full pipeline with the given modules disabled. STDP batching
/// stays on in every configuration.
pub fn run_ablation(spec: &NetworkSpec, flags: Mechanisms, train: &RawDataset, test: &RawDataset, cfg: &TrainConfig) -> Result<MetricsRecord> {
    let spec = NetworkSpec {
        mechanisms: flags,
        ..spec.clone()
    };
    Ok(train_and_evaluate(spec, train, test, cfg)?.test)
}

/// Runs every named configuration for every seed.
pub fn run_ablation_series(
    spec: &NetworkSpec,
    series: &[(&str, Mechanisms)],
    seeds: &[u64],
    train: &RawDataset,
    test: &RawDataset,
    cfg: &TrainConfig,
) -> Result<Vec<AblationRow>> {
    let mut rows = Vec::new();
    for &(name, flags) in series {
        for &seed in seeds {
            let cfg = TrainConfig { seed, ..*cfg };
            let metrics = run_ablation(spec, flags, train, test, &cfg)?;
            log::info!("ablation {name} seed {seed}: {:.4}", metrics.accuracy);
            rows.push(AblationRow {
                name: name.to_string(),
                mechanisms: flags,
                seed,
                metrics,
            });
        }
    }
    Ok(rows)
}

/// CSV with one row per configuration and seed.
pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut s = String::from("name,asf,alic,atb,seed,samples,accuracy\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{},{:.6}\n",
            r.name, r.mechanisms.asf, r.mechanisms.alic, r.mechanisms.atb, r.seed, r.metrics.samples, r.metrics.accuracy
        ));
    }
    s
}
