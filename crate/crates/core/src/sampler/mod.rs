//! Meta-test episode sampling.
//!
//! An episode is built from four independent draws, each from its own
//! derived stream:
//!
//! 1. the way: uniform on `[way_min, min(|labels|, way_cap)]` for class
//!    transfer, otherwise every label of the phase;
//! 2. the label subset, uniformly without replacement;
//! 3. the shot of each label, independently uniform on `[k_min, k_max]`;
//! 4. the training examples of each label, then the test set from whatever
//!    remains of the sampled labels' pools.
//!
//! The test set has `min(target_mean_test_size, remaining)` examples and is
//! not stratified, so class imbalance follows the data. Each few-shot episode
//! gets a zero-shot twin that shares its label set and test examples.

mod manifest;

pub use manifest::{
    build_manifest, canonical_json, verify_manifest, BenchmarkManifest, EpisodeVerdict,
    ManifestError, ManifestHeader, VerificationReport, MANIFEST_VERSION,
};

use std::collections::BTreeMap;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{ClassPool, CorpusError, DatasetSpec, Phase};
use crate::rng::{derive_stream, StreamRng};

/// Parameters of the episode sampler.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingConfig {
    pub global_seed: u64,
    pub episodes_per_dataset: u32,
    pub k_min: u32,
    pub k_max: u32,
    pub way_min: u32,
    pub way_cap: u32,
    pub target_mean_test_size: u32,
    /// Each few-shot episode gets a zero-shot twin with the same test set.
    /// When false, even indices are few-shot and odd indices zero-shot.
    pub zero_shot_paired: bool,
    /// Emit zero-shot episodes at all.
    pub zero_shot_views: bool,
    /// Which label split episodes are drawn from.
    pub phase: Phase,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            global_seed: 0,
            episodes_per_dataset: 90,
            k_min: 1,
            k_max: 5,
            way_min: 5,
            way_cap: 10,
            target_mean_test_size: 470,
            zero_shot_paired: true,
            zero_shot_views: true,
            phase: Phase::MetaTest,
        }
    }
}

impl SamplingConfig {
    /// Balanced 5-way 5-shot episodes over the training label split, without
    /// zero-shot views.
    pub fn balanced_meta_training(global_seed: u64) -> Self {
        Self {
            global_seed,
            k_min: 5,
            k_max: 5,
            way_min: 5,
            way_cap: 5,
            zero_shot_views: false,
            phase: Phase::MetaTrain,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SamplerError> {
        let bad = |msg: &str| Err(SamplerError::Config(msg.to_owned()));
        if self.episodes_per_dataset == 0 {
            return bad("episodes_per_dataset must be at least 1");
        }
        if self.k_min > self.k_max {
            return bad("k_min must not exceed k_max");
        }
        if self.k_max == 0 {
            return bad("k_max must be positive");
        }
        if self.way_min == 0 || self.way_min > self.way_cap {
            return bad("need 1 <= way_min <= way_cap");
        }
        if self.target_mean_test_size == 0 {
            return bad("target_mean_test_size must be positive");
        }
        Ok(())
    }
}

/// One few-shot problem drawn from a dataset.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Episode {
    pub episode_id: String,
    pub dataset_id: String,
    pub index: u32,
    pub label_set: Vec<String>,
    pub shots: BTreeMap<String, u32>,
    pub train_example_ids: Vec<String>,
    pub test_example_ids: Vec<String>,
    pub is_zero_shot_view: bool,
}

impl Episode {
    pub fn way(&self) -> usize {
        self.label_set.len()
    }

    pub fn view(&self) -> View {
        if self.is_zero_shot_view {
            View::ZeroShot
        } else {
            View::FewShot
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum View {
    ZeroShot,
    FewShot,
}

impl View {
    pub fn as_str(self) -> &'static str {
        match self {
            View::ZeroShot => "zero",
            View::FewShot => "few",
        }
    }
}

pub fn episode_id(dataset_id: &str, index: u32, view: View) -> String {
    format!("{dataset_id}/{index:04}/{}", view.as_str())
}

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("invalid sampling configuration: {0}")]
    Config(String),
    #[error("dataset {dataset_id:?} has {labels} {phase} labels, fewer than way_min = {way_min}")]
    TooFewLabels {
        dataset_id: String,
        phase: Phase,
        labels: usize,
        way_min: u32,
    },
    #[error(
        "dataset {dataset_id:?} episode {episode_index}: label {label:?} needs {needed} examples \
         ({shots} train + 1 test) but only {available} exist"
    )]
    InsufficientExamples {
        dataset_id: String,
        episode_index: u32,
        label: String,
        shots: u32,
        needed: usize,
        available: usize,
    },
    #[error("dataset {0:?} given more than once")]
    DuplicateDataset(String),
    #[error("manifest references dataset {0:?}, which was not supplied")]
    MissingDataset(String),
    #[error(
        "manifest was generated with rng algorithm {found:?}; this build only reproduces \
         {expected:?}, so its episodes cannot be re-derived"
    )]
    RngMismatch { found: String, expected: String },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

/// The independent generators used to draw one episode.
pub struct EpisodeStreams {
    pub way: StreamRng,
    pub labels: StreamRng,
    pub shots: StreamRng,
    pub train: StreamRng,
    pub test: StreamRng,
}

impl EpisodeStreams {
    pub fn new(global_seed: u64, dataset_id: &str, episode_index: u32) -> Self {
        let s = |purpose| derive_stream(global_seed, dataset_id, u64::from(episode_index), purpose);
        Self {
            way: s("way"),
            labels: s("labels"),
            shots: s("shots"),
            train: s("train"),
            test: s("test"),
        }
    }
}

/// Draws the number of classes of an episode.
pub fn sample_way<R: Rng + ?Sized>(
    rng: &mut R,
    spec: &DatasetSpec,
    config: &SamplingConfig,
) -> Result<usize, SamplerError> {
    let available = spec.labels(config.phase).len();
    if !spec.is_class_transfer() {
        return Ok(available);
    }
    let way_min = config.way_min as usize;
    if available < way_min {
        return Err(SamplerError::TooFewLabels {
            dataset_id: spec.dataset_id.clone(),
            phase: config.phase,
            labels: available,
            way_min: config.way_min,
        });
    }
    let upper = available.min(config.way_cap as usize);
    Ok(rng.random_range(way_min..=upper))
}

/// Draws one shot count per label, independently on `[k_min, k_max]`.
pub fn sample_shots<R: Rng + ?Sized>(
    rng: &mut R,
    label_set: &[String],
    config: &SamplingConfig,
) -> BTreeMap<String, u32> {
    label_set
        .iter()
        .map(|label| (label.clone(), rng.random_range(config.k_min..=config.k_max)))
        .collect()
}

/// Draws episode `episode_index` and returns its few-shot and zero-shot views.
pub fn sample_episode(
    streams: &mut EpisodeStreams,
    pool: &ClassPool<'_>,
    spec: &DatasetSpec,
    config: &SamplingConfig,
    episode_index: u32,
) -> Result<(Episode, Episode), SamplerError> {
    let way = sample_way(&mut streams.way, spec, config)?;

    let mut picked = index::sample(&mut streams.labels, pool.len(), way).into_vec();
    picked.sort_unstable();
    let label_set: Vec<String> = picked
        .iter()
        .map(|&i| pool.get_index(i).expect("index within pool").0.clone())
        .collect();

    let shots = sample_shots(&mut streams.shots, &label_set, config);

    let mut train_example_ids = Vec::new();
    let mut remaining = Vec::new();
    for label in &label_set {
        let members = &pool[label];
        let k = shots[label];
        if members.len() < k as usize + 1 {
            return Err(SamplerError::InsufficientExamples {
                dataset_id: spec.dataset_id.clone(),
                episode_index,
                label: label.clone(),
                shots: k,
                needed: k as usize + 1,
                available: members.len(),
            });
        }
        let mut chosen = index::sample(&mut streams.train, members.len(), k as usize).into_vec();
        chosen.sort_unstable();
        let mut taken = vec![false; members.len()];
        for i in chosen {
            taken[i] = true;
            train_example_ids.push(members[i].example_id.clone());
        }
        remaining.extend(
            members
                .iter()
                .zip(&taken)
                .filter(|(_, &t)| !t)
                .map(|(ex, _)| ex.example_id.as_str()),
        );
    }

    let test_size = remaining.len().min(config.target_mean_test_size as usize);
    let test_example_ids: Vec<String> =
        index::sample(&mut streams.test, remaining.len(), test_size)
            .into_iter()
            .map(|i| remaining[i].to_owned())
            .collect();

    let few = Episode {
        episode_id: episode_id(&spec.dataset_id, episode_index, View::FewShot),
        dataset_id: spec.dataset_id.clone(),
        index: episode_index,
        label_set: label_set.clone(),
        shots,
        train_example_ids,
        test_example_ids: test_example_ids.clone(),
        is_zero_shot_view: false,
    };
    let zero = Episode {
        episode_id: episode_id(&spec.dataset_id, episode_index, View::ZeroShot),
        shots: label_set.iter().map(|l| (l.clone(), 0)).collect(),
        train_example_ids: Vec::new(),
        is_zero_shot_view: true,
        ..few.clone()
    };
    Ok((few, zero))
}
