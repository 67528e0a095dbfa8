//! MDL probing: does a representation make mutability cheap to transmit?
//!
//! Labels are sent with an online code. A linear probe retrained on every
//! prefix of a fixed schedule predicts the next block, and the codelength
//! is compared with the uniform `n * log2(K)` cost. A control run with
//! relation-level random labels calibrates how much of the compression
//! comes from memorising relations rather than from the signal itself.

mod baselines;
mod codelength;
mod linear;
mod schedule;
mod splits;
pub mod synthetic;

use serde::{Deserialize, Serialize};

pub use baselines::{
    control_labels, evaluate_probe, frequency_bin_accuracy, frequency_bins, template_baseline, template_tokens,
    BinStat, NaiveBayes, ProbeAccuracy,
};
pub use codelength::{block_bits, online_codelength, uniform_codelength, BlockCode, OnlineCode, PROB_FLOOR};
pub use linear::{
    evaluate, lr_multiplier, select_warmup, train_probe, LinearProbe, LinearTrainer, ProbeHyper, TrainSummary,
    WARMUP_CANDIDATES,
};
pub use schedule::TransmissionSchedule;
pub use splits::{make_splits, ProbeSplits, ProbeTask, RepresentationIndex, SplitItem, SplitSpec};

use crate::dataset::Dataset;
use crate::seed::RunSeed;
use crate::types::{MutabilityLabel, Pid, RepresentationRecord};

/// Two labels: immutable and mutable.
pub const CLASSES: usize = 2;

#[derive(Debug, thiserror::Error)]
pub enum ProbeError {
    #[error("invalid probe configuration: {0}")]
    Config(String),
    #[error("split leak: {0}")]
    Leak(String),
    #[error("no representation for {query_id} template {template_index} object {object:?}")]
    MissingRepresentation {
        query_id: String,
        template_index: usize,
        object: String,
    },
    #[error("non-finite loss at epoch {epoch}, step {step}")]
    NonFinite { epoch: usize, step: usize },
    #[error("empty {0}")]
    Empty(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub x: Vec<f32>,
    pub y: usize,
    pub relation: Pid,
    pub frequency: u64,
}

pub trait Classifier: Send + Sync {
    fn predict_proba(&self, x: &[f32]) -> Vec<f64>;
}

/// Produces a fresh model from labelled data.
pub trait ProbeTrainer: Sync {
    fn fit(&self, train: &[Example], val: &[Example], seed: RunSeed) -> Result<Box<dyn Classifier>, ProbeError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub hyper: ProbeHyper,
    pub warmup_candidates: Vec<f64>,
    pub schedule: TransmissionSchedule,
    pub frequency_bins: usize,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            hyper: ProbeHyper::default(),
            warmup_candidates: WARMUP_CANDIDATES.to_vec(),
            schedule: TransmissionSchedule::default(),
            frequency_bins: 10,
        }
    }
}

/// Codelength and accuracy for one labelling of one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskCode {
    pub n: usize,
    pub k: usize,
    pub uniform_bits: f64,
    pub online_bits: f64,
    pub compression: f64,
    pub warmup_ratio: f64,
    pub accuracy: f64,
    pub per_relation_accuracy: std::collections::BTreeMap<Pid, f64>,
    pub blocks: Vec<BlockCode>,
    pub frequency_bins: Vec<BinStat>,
}

/// Trains on `train` (shuffled once under `seed`), measures its online
/// codelength and scores a probe fit on all of it against `test`.
pub fn probe_task(
    train: &[Example],
    val: &[Example],
    test: &[Example],
    config: &ProbeConfig,
    seed: RunSeed,
) -> Result<TaskCode, ProbeError> {
    if train.is_empty() {
        return Err(ProbeError::Empty("training split".into()));
    }
    let mut stream = train.to_vec();
    rand::seq::SliceRandom::shuffle(stream.as_mut_slice(), &mut seed.rng("stream"));

    let warmup_ratio = select_warmup(&stream, val, CLASSES, &config.hyper, &config.warmup_candidates, seed)?;
    let trainer = LinearTrainer {
        classes: CLASSES,
        hyper: ProbeHyper {
            warmup_ratio,
            ..config.hyper.clone()
        },
    };
    let online = online_codelength(&stream, CLASSES, &config.schedule, &trainer, val, seed.child("online"))?;
    let (probe, _) = train_probe(&stream, val, CLASSES, &trainer.hyper, seed.child("final"))?;
    let acc = evaluate_probe(&probe, test);
    let freqs: Vec<u64> = test.iter().map(|e| e.frequency).collect();
    let labels: Vec<usize> = test.iter().map(|e| e.y).collect();
    let bins = if test.is_empty() {
        Vec::new()
    } else {
        frequency_bin_accuracy(&acc.correct, &freqs, &labels, config.frequency_bins)
    };
    let uniform_bits = uniform_codelength(stream.len(), CLASSES);
    Ok(TaskCode {
        n: stream.len(),
        k: CLASSES,
        uniform_bits,
        online_bits: online.bits,
        compression: uniform_bits / online.bits,
        warmup_ratio,
        accuracy: acc.macro_accuracy,
        per_relation_accuracy: acc.per_relation,
        blocks: online.blocks,
        frequency_bins: bins,
    })
}

/// Replaces every label with its relation's control label.
pub fn relabel(examples: &[Example], labels: &std::collections::BTreeMap<Pid, MutabilityLabel>) -> Vec<Example> {
    examples
        .iter()
        .map(|e| Example {
            y: labels[&e.relation].index(),
            ..e.clone()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub val: usize,
    pub test: usize,
    pub dropped_val: usize,
    pub dropped_test: usize,
}

/// Result of one probing run on a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodelengthReport {
    pub task: ProbeTask,
    pub seed: u64,
    pub dim: usize,
    pub splits: SplitCounts,
    pub test_relations: Vec<Pid>,
    pub schedule: TransmissionSchedule,
    pub mutability: TaskCode,
    pub control: Option<TaskCode>,
    pub template_baseline_accuracy: f64,
}

impl CodelengthReport {
    pub fn n(&self) -> usize {
        self.mutability.n
    }

    pub fn uniform_bits(&self) -> f64 {
        self.mutability.uniform_bits
    }

    pub fn compression(&self) -> f64 {
        self.mutability.compression
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeRun {
    pub task: ProbeTask,
    pub split: SplitSpec,
    pub seed: u64,
    pub control: bool,
    pub config: ProbeConfig,
}

/// Splits the dataset, probes the real labels (and the control labels when
/// asked, in parallel) and fits the template baseline.
pub fn run_probe(dataset: &Dataset, reps: &[RepresentationRecord], run: &ProbeRun) -> Result<CodelengthReport, ProbeError> {
    let seed = RunSeed(run.seed);
    let splits = make_splits(dataset, run.task, &run.split, seed)?;
    let index = RepresentationIndex::new(reps)?;
    let real = |i: &SplitItem| i.label.index();
    let train = index.examples(&splits.train, real)?;
    let val = index.examples(&splits.val, real)?;
    let test = index.examples(&splits.test, real)?;

    let relations: Vec<Pid> = train.iter().chain(&val).chain(&test).map(|e| e.relation.clone()).collect();
    let controls = control_labels(&relations, seed);
    let (mutability, control) = rayon::join(
        || probe_task(&train, &val, &test, &run.config, seed),
        || {
            run.control
                .then(|| probe_task(&relabel(&train, &controls), &relabel(&val, &controls), &relabel(&test, &controls), &run.config, seed))
                .transpose()
        },
    );

    let rel = dataset.relation_index();
    let docs = |items: &[SplitItem]| -> Vec<(Vec<String>, usize)> {
        items
            .iter()
            .map(|i| {
                let t = rel[&i.relation].template(i.template_index).unwrap_or_default();
                (template_tokens(t), i.label.index())
            })
            .collect()
    };
    let template_baseline_accuracy = template_baseline(&docs(&splits.train), &docs(&splits.test), CLASSES);

    Ok(CodelengthReport {
        task: run.task,
        seed: run.seed,
        dim: index.dim().unwrap_or(0),
        splits: SplitCounts {
            train: splits.train.len(),
            val: splits.val.len(),
            test: splits.test.len(),
            dropped_val: splits.dropped_val,
            dropped_test: splits.dropped_test,
        },
        test_relations: splits.test_relations,
        schedule: run.config.schedule.clone(),
        mutability: mutability?,
        control: control?,
        template_baseline_accuracy,
    })
}
