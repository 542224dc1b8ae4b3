//! Adversarial domain adaptation at desk scale: a hand-differentiated
//! encoder, discriminator and task head joined by a gradient reversal layer,
//! plus separability metrics for latent features.

mod demo;
mod dump;
mod metrics;
pub mod mlp;
mod network;

use thiserror::Error;

pub use demo::{
    domain_labels, generate_dataset, score_features, train_da, train_da_demo, DaConfig, DaReport, DatasetParams,
    DomainData, EpochMetrics, TrainedDa, TwoDomainDataset,
};
pub use dump::{decode_features, encode_features, read_features, write_features, FeatureDump};
pub use metrics::{gsi, probe_accuracy, probe_accuracy_with, ProbeSettings};
pub use mlp::{Activation, Mlp, MlpGrads};
pub use network::{da_loss, grl_backward, total_loss, DaGrads, DaNetwork, LossParts, SgdSettings, D_EPS};

#[derive(Debug, Error)]
pub enum DaError {
    #[error("{0}")]
    Argument(String),
    #[error("degenerate split: {0}")]
    DegenerateSplit(String),
    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize, report: DaReport },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed feature dump: {0}")]
    Parse(String),
}
