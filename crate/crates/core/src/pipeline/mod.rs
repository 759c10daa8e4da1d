//! Layer-wise training, voting readout, evaluation, checkpoints and the
//! ablation harness.

pub mod ablation;
pub mod checkpoint;
pub mod metrics;
pub mod network;
pub mod spec;
pub mod train;
pub mod voting;

pub use ablation::{run_ablation, run_ablation_series, standard_ablations, train_and_evaluate, AblationRow, RunOutcome};
pub use checkpoint::Checkpoint;
pub use metrics::{append_metrics_csv, evaluate, MetricsRecord};
pub use network::Network;
pub use spec::{NetworkSpec, Readout};
pub use train::{extract_features, train_layerwise, EpochReport, Phase, TrainConfig};
pub use voting::{assign_votes, predict, VotingTable};
