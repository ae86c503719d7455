//! Detection metrics against held-out labels, and the greedy hyperparameter
//! sweep over hidden units, then epochs, then batch size.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anomaly::{classify, fit_threshold, AnomalyVerdict, DEFAULT_PERCENTILE};
use crate::error::{Error, Result};
use crate::sampler::derive_seed;
use crate::training::{train, TrainConfig};
use crate::types::{BmTopology, Dataset, EncodedDataset, Laterals};

/// Confusion counts with anomaly as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub true_positives: usize,
    pub false_positives: usize,
    pub true_negatives: usize,
    pub false_negatives: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl Metrics {
    /// Derives precision, recall and F1 from counts; zero denominators give 0.
    pub fn from_counts(tp: usize, fp: usize, tn: usize, fn_: usize) -> Self {
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self {
            true_positives: tp,
            false_positives: fp,
            true_negatives: tn,
            false_negatives: fn_,
            precision,
            recall,
            f1,
        }
    }

    pub fn total(&self) -> usize {
        self.true_positives + self.false_positives + self.true_negatives + self.false_negatives
    }
}

pub fn score(verdicts: &[AnomalyVerdict], labels: &[bool]) -> Result<Metrics> {
    if verdicts.len() != labels.len() {
        return Err(Error::LengthMismatch {
            expected: labels.len(),
            found: verdicts.len(),
        });
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (v, &label) in verdicts.iter().zip(labels) {
        match (v.is_anomaly, label) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    Ok(Metrics::from_counts(tp, fp, tn, fn_))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Hyperparameter {
    HiddenUnits,
    Epochs,
    BatchSize,
}

impl Hyperparameter {
    pub const ORDER: [Hyperparameter; 3] = [Self::HiddenUnits, Self::Epochs, Self::BatchSize];

    pub fn name(&self) -> &'static str {
        match self {
            Self::HiddenUnits => "hidden_units",
            Self::Epochs => "epochs",
            Self::BatchSize => "batch_size",
        }
    }
}

/// Candidate grids for each greedy stage plus the fixed training baseline.
///
/// `baseline.epochs` and `baseline.batch_size` are used until their own stage
/// picks a winner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPlan {
    pub laterals: Laterals,
    pub hidden_units: Vec<usize>,
    pub epochs: Vec<usize>,
    pub batch_sizes: Vec<usize>,
    pub baseline: TrainConfig,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default = "default_percentile")]
    pub percentile: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_repetitions() -> usize {
    3
}

fn default_percentile() -> f64 {
    DEFAULT_PERCENTILE
}

impl SweepPlan {
    pub fn candidates(&self, stage: Hyperparameter) -> &[usize] {
        match stage {
            Hyperparameter::HiddenUnits => &self.hidden_units,
            Hyperparameter::Epochs => &self.epochs,
            Hyperparameter::BatchSize => &self.batch_sizes,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for stage in Hyperparameter::ORDER {
            if self.candidates(stage).is_empty() {
                return Err(Error::InvalidPlan(format!("no candidates for {}", stage.name())));
            }
        }
        if self.epochs.contains(&0) || self.batch_sizes.contains(&0) {
            return Err(Error::InvalidPlan("epochs and batch sizes must be >= 1".into()));
        }
        if self.repetitions == 0 {
            return Err(Error::InvalidPlan("repetitions must be >= 1".into()));
        }
        if !(self.percentile > 0.0 && self.percentile < 100.0) {
            return Err(Error::PercentileOutOfRange(self.percentile));
        }
        self.baseline
            .validate()
            .map_err(|e| Error::InvalidPlan(format!("baseline: {e}")))
    }
}

/// One trained-and-scored repetition of one candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub stage: Hyperparameter,
    pub candidate: usize,
    pub repetition: usize,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageOutcome {
    pub stage: Hyperparameter,
    /// `(candidate, mean f1 over repetitions)` in plan order.
    pub mean_f1: Vec<(usize, f64)>,
    pub chosen: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChosenConfig {
    pub laterals: Laterals,
    pub hidden_units: usize,
    pub train: TrainConfig,
    pub percentile: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub records: Vec<SweepRecord>,
    pub stages: Vec<StageOutcome>,
    pub chosen: ChosenConfig,
}

/// Trains on `train`, fits the percentile threshold on it, and scores the
/// verdicts on the labeled `test` rows.
pub fn train_and_score(
    train_rows: &EncodedDataset,
    test_rows: &EncodedDataset,
    topology: BmTopology,
    cfg: &TrainConfig,
    percentile: f64,
) -> Result<Metrics> {
    let labels = test_rows
        .labels
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("test rows need labels to be scored".into()))?;
    let report = train(train_rows, topology, cfg)?;
    let threshold = fit_threshold(&report.params, train_rows, percentile)?;
    let verdicts = classify(&report.params, &threshold, test_rows)?;
    score(&verdicts, labels)
}

/// Index of the best mean score; ties go to the smallest candidate value.
fn argmax_smallest(scores: &[(usize, f64)]) -> usize {
    let mut best = 0;
    for (i, &(value, f1)) in scores.iter().enumerate() {
        let (best_value, best_f1) = scores[best];
        if f1 > best_f1 || (f1 == best_f1 && value < best_value) {
            best = i;
        }
    }
    best
}

/// Greedy sweep. Each `(candidate, repetition)` job gets seeds derived from
/// the plan seed, stage, candidate index and repetition, so results do not
/// depend on how many threads run the jobs.
pub fn run_sweep(train_data: &Dataset, test_data: &Dataset, plan: &SweepPlan) -> Result<SweepReport> {
    plan.validate()?;
    if test_data.labels.is_none() {
        return Err(Error::InvalidPlan("test dataset must be labeled".into()));
    }
    if train_data.num_visible() != test_data.num_visible() {
        return Err(Error::ShapeMismatch {
            what: "test dataset width",
            expected: train_data.num_visible(),
            found: test_data.num_visible(),
        });
    }
    let train_rows = train_data.encode()?;
    let test_rows = test_data.encode()?;

    let mut hidden = plan.hidden_units[0];
    let mut cfg = plan.baseline.clone();
    let mut records = Vec::new();
    let mut stages = Vec::new();

    for (stage_idx, stage) in Hyperparameter::ORDER.into_iter().enumerate() {
        let candidates = plan.candidates(stage);
        let jobs: Vec<(usize, usize)> = (0..candidates.len())
            .flat_map(|c| (0..plan.repetitions).map(move |r| (c, r)))
            .collect();
        let stage_seed = derive_seed(plan.seed, stage_idx as u64);
        let results: Vec<Result<SweepRecord>> = jobs
            .par_iter()
            .map(|&(c, rep)| {
                let value = candidates[c];
                let mut job_cfg = cfg.clone();
                let mut job_hidden = hidden;
                match stage {
                    Hyperparameter::HiddenUnits => job_hidden = value,
                    Hyperparameter::Epochs => job_cfg.epochs = value,
                    Hyperparameter::BatchSize => job_cfg.batch_size = value,
                }
                let job_seed = derive_seed(derive_seed(stage_seed, c as u64), rep as u64);
                job_cfg.shuffle_seed = derive_seed(job_seed, 0);
                job_cfg.sampler.rng_seed = derive_seed(job_seed, 1);
                let topology = BmTopology {
                    num_visible: train_rows.width,
                    num_hidden: job_hidden,
                    laterals: plan.laterals,
                };
                let metrics = train_and_score(&train_rows, &test_rows, topology, &job_cfg, plan.percentile)?;
                Ok(SweepRecord {
                    stage,
                    candidate: value,
                    repetition: rep,
                    metrics,
                })
            })
            .collect();
        let stage_records = results.into_iter().collect::<Result<Vec<_>>>()?;

        let mean_f1: Vec<(usize, f64)> = candidates
            .iter()
            .enumerate()
            .map(|(c, &value)| {
                let reps = &stage_records[c * plan.repetitions..(c + 1) * plan.repetitions];
                let mean = reps.iter().map(|r| r.metrics.f1).sum::<f64>() / plan.repetitions as f64;
                (value, mean)
            })
            .collect();
        let chosen = mean_f1[argmax_smallest(&mean_f1)].0;
        match stage {
            Hyperparameter::HiddenUnits => hidden = chosen,
            Hyperparameter::Epochs => cfg.epochs = chosen,
            Hyperparameter::BatchSize => cfg.batch_size = chosen,
        }
        records.extend(stage_records);
        stages.push(StageOutcome { stage, mean_f1, chosen });
    }

    Ok(SweepReport {
        records,
        stages,
        chosen: ChosenConfig {
            laterals: plan.laterals,
            hidden_units: hidden,
            train: cfg,
            percentile: plan.percentile,
        },
    })
}
