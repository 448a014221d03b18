//! Reference predictors for exercising the harness.

use std::collections::HashMap;

use rand::Rng;

use crate::corpus::{DatasetSpec, LabeledExample};
use crate::rng::derive_stream;
use crate::sampler::{BenchmarkManifest, Episode};
use crate::stats::{PredictionSet, ProtocolTag};

/// Examples of several datasets looked up by `(dataset_id, example_id)`.
pub struct ExampleIndex<'a> {
    specs: HashMap<&'a str, &'a DatasetSpec>,
    examples: HashMap<&'a str, HashMap<&'a str, &'a LabeledExample>>,
}

impl<'a> ExampleIndex<'a> {
    pub fn new(datasets: &'a [(DatasetSpec, Vec<LabeledExample>)]) -> Self {
        let mut specs = HashMap::new();
        let mut examples = HashMap::new();
        for (spec, rows) in datasets {
            specs.insert(spec.dataset_id.as_str(), spec);
            examples.insert(
                spec.dataset_id.as_str(),
                rows.iter().map(|e| (e.example_id.as_str(), e)).collect(),
            );
        }
        Self { specs, examples }
    }

    pub fn spec(&self, dataset_id: &str) -> Option<&'a DatasetSpec> {
        self.specs.get(dataset_id).copied()
    }

    pub fn get(&self, dataset_id: &str, example_id: &str) -> Option<&'a LabeledExample> {
        self.examples.get(dataset_id)?.get(example_id).copied()
    }

    fn label(&self, episode: &Episode, example_id: &str) -> String {
        self.get(&episode.dataset_id, example_id)
            .map(|e| e.label.clone())
            .unwrap_or_default()
    }
}

fn uniform_labels(seed: u64, episode: &Episode) -> Vec<String> {
    let mut rng = derive_stream(seed, &episode.episode_id, 0, "random_uniform");
    episode
        .test_example_ids
        .iter()
        .map(|_| episode.label_set[rng.random_range(0..episode.label_set.len())].clone())
        .collect()
}

/// Picks a label uniformly at random for every test example.
pub fn random_uniform(manifest: &BenchmarkManifest, seed: u64, tag: ProtocolTag) -> PredictionSet {
    let mut set = PredictionSet::new(manifest, tag);
    for episode in &manifest.episodes {
        set.entries
            .insert(episode.episode_id.clone(), uniform_labels(seed, episode));
    }
    set
}

/// Predicts the most frequent training label of each episode, earlier labels
/// winning ties. Zero-shot views have no training data and fall back to
/// [`random_uniform`].
pub fn majority_train(
    manifest: &BenchmarkManifest,
    index: &ExampleIndex<'_>,
    seed: u64,
    tag: ProtocolTag,
) -> PredictionSet {
    let mut set = PredictionSet::new(manifest, tag);
    for episode in &manifest.episodes {
        let predictions = if episode.train_example_ids.is_empty() {
            uniform_labels(seed, episode)
        } else {
            let mut counts: HashMap<String, usize> = HashMap::new();
            for id in &episode.train_example_ids {
                *counts.entry(index.label(episode, id)).or_default() += 1;
            }
            let mut best = &episode.label_set[0];
            for label in &episode.label_set {
                if counts.get(label).copied().unwrap_or(0) > counts.get(best).copied().unwrap_or(0)
                {
                    best = label;
                }
            }
            vec![best.clone(); episode.test_example_ids.len()]
        };
        set.entries.insert(episode.episode_id.clone(), predictions);
    }
    set
}

/// Copies the gold labels.
pub fn oracle(
    manifest: &BenchmarkManifest,
    index: &ExampleIndex<'_>,
    tag: ProtocolTag,
) -> PredictionSet {
    let mut set = PredictionSet::new(manifest, tag);
    for episode in &manifest.episodes {
        let gold = episode
            .test_example_ids
            .iter()
            .map(|id| index.label(episode, id))
            .collect();
        set.entries.insert(episode.episode_id.clone(), gold);
    }
    set
}
