//! Fully unsupervised anomaly detection with Boltzmann machines.
//!
//! The crate trains restricted (bipartite) and semi-restricted (with
//! visible–visible couplings) Boltzmann machines on binary-encoded integer
//! data, then flags points whose free energy exceeds a percentile threshold
//! fitted on the unlabeled training set.
//!
//! ```
//! use boltzmann_anomaly::prelude::*;
//!
//! let data = generate(&GenConfig { points_per_cluster: 40, ..Default::default() })?;
//! let (train_set, test_set) = split(&data, 0.5, 7)?;
//! let train_rows = train_set.encode()?;
//!
//! let cfg = TrainConfig {
//!     epochs: 2,
//!     sampler: SamplerConfig::gibbs(50, 20, 1, 3),
//!     ..Default::default()
//! };
//! let report = train(&train_rows, BmTopology::rbm(train_rows.width, 16), &cfg)?;
//! let threshold = fit_threshold(&report.params, &train_rows, 95.0)?;
//! let verdicts = classify(&report.params, &threshold, &test_set.encode()?)?;
//! let metrics = score(&verdicts, test_set.labels.as_deref().unwrap())?;
//! assert!((0.0..=1.0).contains(&metrics.f1));
//! # Ok::<(), boltzmann_anomaly::Error>(())
//! ```

pub mod anomaly;
pub mod datagen;
pub mod energy;
mod error;
pub mod eval;
pub mod formats;
pub mod sampler;
pub mod training;
pub mod types;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::anomaly::{classify, fit_threshold, AnomalyVerdict, Threshold};
    pub use crate::datagen::{generate, split, GenConfig};
    pub use crate::energy::{energy, free_energy, log_partition_exact};
    pub use crate::eval::{run_sweep, score, Metrics, SweepPlan};
    pub use crate::sampler::{exact_distribution, sample_clamped, sample_unclamped, SamplerConfig, SamplerKind};
    pub use crate::training::{apply_update, kl_gradient, train, TrainConfig, TrainReport};
    pub use crate::types::{
        decode_point, encode_point, BinaryState, BmTopology, Dataset, EncodedDataset, Laterals, ModelParams,
    };
    pub use crate::{Error, Result};
}

// Runs the guide's code blocks as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/energy.md")]
    mod energy {}
    #[doc = include_str!("../../../book/src/sampling.md")]
    mod sampling {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/anomaly.md")]
    mod anomaly {}
    #[doc = include_str!("../../../book/src/datasets.md")]
    mod datasets {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/formats.md")]
    mod formats {}
}
