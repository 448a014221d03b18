//! Checksummed benchmark manifests.
//!
//! A manifest file is JSONL: a header line, one line per episode, and a final
//! `{"checksum": "<hex>"}` line. Every line is written in canonical form
//! (keys sorted, no insignificant whitespace, strings NFC-normalized) and the
//! checksum is the SHA-256 of all preceding lines, each terminated by `\n`.
//! Readers re-canonicalize each line before hashing, so key order in a file
//! never affects the digest.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

use super::{sample_episode, Episode, EpisodeStreams, SamplerError, SamplingConfig};
use crate::corpus::{class_pool, DatasetSpec, LabeledExample};
use crate::rng::RNG_ALGORITHM_ID;

pub const MANIFEST_VERSION: &str = "1";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestHeader {
    pub manifest_version: String,
    pub sampling_config: SamplingConfig,
    pub rng_algorithm_id: String,
}

/// Every episode of a benchmark instance plus its checksum.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BenchmarkManifest {
    pub header: ManifestHeader,
    pub episodes: Vec<Episode>,
    pub checksum: String,
}

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("manifest line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("manifest has no checksum line")]
    MissingChecksum,
    #[error("manifest checksum mismatch: recorded {recorded}, computed {computed}")]
    ChecksumMismatch { recorded: String, computed: String },
}

/// Serializes `value` canonically: sorted keys, compact, NFC strings.
pub fn canonical_json<T: Serialize>(value: &T) -> String {
    let value = serde_json::to_value(value).expect("manifest types serialize to JSON");
    canonicalize(value).to_string()
}

fn canonicalize(value: Value) -> Value {
    match value {
        Value::String(s) => Value::String(s.nfc().collect()),
        Value::Array(items) => Value::Array(items.into_iter().map(canonicalize).collect()),
        // serde_json's default map is ordered by key
        Value::Object(map) => Value::Object(
            map.into_iter()
                .map(|(k, v)| (k.nfc().collect(), canonicalize(v)))
                .collect(),
        ),
        other => other,
    }
}

fn digest_lines<'a>(lines: impl IntoIterator<Item = &'a str>) -> String {
    let mut hasher = Sha256::new();
    for line in lines {
        hasher.update(line.as_bytes());
        hasher.update(b"\n");
    }
    hex::encode(hasher.finalize())
}

impl BenchmarkManifest {
    pub fn new(sampling_config: SamplingConfig, episodes: Vec<Episode>) -> Self {
        let mut manifest = Self {
            header: ManifestHeader {
                manifest_version: MANIFEST_VERSION.to_owned(),
                sampling_config,
                rng_algorithm_id: RNG_ALGORITHM_ID.to_owned(),
            },
            episodes,
            checksum: String::new(),
        };
        manifest.checksum = manifest.compute_checksum();
        manifest
    }

    pub fn sampling_config(&self) -> &SamplingConfig {
        &self.header.sampling_config
    }

    /// Canonical header and episode lines, without the checksum line.
    pub fn canonical_lines(&self) -> Vec<String> {
        std::iter::once(canonical_json(&self.header))
            .chain(self.episodes.iter().map(canonical_json))
            .collect()
    }

    pub fn compute_checksum(&self) -> String {
        let lines = self.canonical_lines();
        digest_lines(lines.iter().map(String::as_str))
    }

    pub fn checksum_verifies(&self) -> bool {
        self.compute_checksum() == self.checksum
    }

    /// Fails with [`ManifestError::ChecksumMismatch`] unless the recorded
    /// checksum matches the content.
    pub fn ensure_checksum(&self) -> Result<(), ManifestError> {
        let computed = self.compute_checksum();
        if computed == self.checksum {
            Ok(())
        } else {
            Err(ManifestError::ChecksumMismatch {
                recorded: self.checksum.clone(),
                computed,
            })
        }
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for line in self.canonical_lines() {
            out.push_str(&line);
            out.push('\n');
        }
        out.push_str(&canonical_json(
            &serde_json::json!({ "checksum": self.checksum }),
        ));
        out.push('\n');
        out
    }

    /// Parses a manifest file body. The recorded checksum is kept as read;
    /// call [`BenchmarkManifest::ensure_checksum`] to check it.
    pub fn from_jsonl(text: &str) -> Result<Self, ManifestError> {
        let lines: Vec<(usize, &str)> = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
            .filter(|(_, l)| !l.trim().is_empty())
            .collect();
        let parse_err = |line: usize, e: serde_json::Error| ManifestError::Parse {
            line,
            message: e.to_string(),
        };
        let (&(_, last), body) = lines.split_last().ok_or(ManifestError::MissingChecksum)?;
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct ChecksumLine {
            checksum: String,
        }
        let checksum = serde_json::from_str::<ChecksumLine>(last)
            .map_err(|_| ManifestError::MissingChecksum)?
            .checksum;
        let (&(header_no, header_line), episode_lines) =
            body.split_first().ok_or(ManifestError::Parse {
                line: 1,
                message: "missing header line".into(),
            })?;
        let header: ManifestHeader =
            serde_json::from_str(header_line).map_err(|e| parse_err(header_no, e))?;
        let episodes = episode_lines
            .iter()
            .map(|&(no, line)| serde_json::from_str(line).map_err(|e| parse_err(no, e)))
            .collect::<Result<Vec<Episode>, _>>()?;
        Ok(Self {
            header,
            episodes,
            checksum,
        })
    }

    pub fn read(path: &Path) -> Result<Self, ManifestError> {
        let text = fs::read_to_string(path).map_err(|source| ManifestError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_jsonl(&text)
    }

    pub fn write(&self, path: &Path) -> Result<(), ManifestError> {
        fs::write(path, self.to_jsonl()).map_err(|source| ManifestError::Io {
            path: path.to_owned(),
            source,
        })
    }

    pub fn episode(&self, episode_id: &str) -> Option<&Episode> {
        self.episodes.iter().find(|e| e.episode_id == episode_id)
    }

    /// Dataset ids in manifest order, without repeats.
    pub fn dataset_ids(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = Vec::new();
        for e in &self.episodes {
            if ids.last() != Some(&e.dataset_id.as_str()) && !ids.contains(&e.dataset_id.as_str()) {
                ids.push(&e.dataset_id);
            }
        }
        ids
    }
}

/// Samples every episode of every dataset and seals them in a manifest.
///
/// Datasets are processed in `dataset_id` order regardless of input order.
/// Episodes are drawn in parallel; the output is identical for any thread
/// count because each episode only reads its own derived streams.
pub fn build_manifest(
    datasets: &[(DatasetSpec, Vec<LabeledExample>)],
    config: &SamplingConfig,
) -> Result<BenchmarkManifest, SamplerError> {
    config.validate()?;
    let mut ordered: Vec<&(DatasetSpec, Vec<LabeledExample>)> = datasets.iter().collect();
    ordered.sort_by(|a, b| a.0.dataset_id.cmp(&b.0.dataset_id));
    for pair in ordered.windows(2) {
        if pair[0].0.dataset_id == pair[1].0.dataset_id {
            return Err(SamplerError::DuplicateDataset(pair[0].0.dataset_id.clone()));
        }
    }

    let mut episodes = Vec::new();
    for (spec, examples) in ordered {
        let pool = class_pool(spec, examples, config.phase)?;
        let drawn = (0..config.episodes_per_dataset)
            .into_par_iter()
            .map(|index| {
                let mut streams = EpisodeStreams::new(config.global_seed, &spec.dataset_id, index);
                sample_episode(&mut streams, &pool, spec, config, index)
            })
            .collect::<Result<Vec<_>, _>>()?;
        for (few, zero) in drawn {
            let index = few.index;
            match (config.zero_shot_views, config.zero_shot_paired) {
                (false, _) => episodes.push(few),
                (true, true) => {
                    episodes.push(few);
                    episodes.push(zero);
                }
                (true, false) if index % 2 == 0 => episodes.push(few),
                (true, false) => episodes.push(zero),
            }
        }
    }
    Ok(BenchmarkManifest::new(config.clone(), episodes))
}

/// Outcome of re-deriving one episode.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct EpisodeVerdict {
    pub episode_id: String,
    pub passed: bool,
    /// First field that differs from the re-derived episode.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub differing_field: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct VerificationReport {
    pub checksum_ok: bool,
    pub recorded_checksum: String,
    pub computed_checksum: String,
    pub episodes: Vec<EpisodeVerdict>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.checksum_ok && self.episodes.iter().all(|e| e.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &EpisodeVerdict> {
        self.episodes.iter().filter(|e| !e.passed)
    }
}

fn first_difference(a: &Episode, b: &Episode) -> Option<&'static str> {
    if a.dataset_id != b.dataset_id {
        Some("dataset_id")
    } else if a.index != b.index {
        Some("index")
    } else if a.label_set != b.label_set {
        Some("label_set")
    } else if a.shots != b.shots {
        Some("shots")
    } else if a.train_example_ids != b.train_example_ids {
        Some("train_example_ids")
    } else if a.test_example_ids != b.test_example_ids {
        Some("test_example_ids")
    } else if a.is_zero_shot_view != b.is_zero_shot_view {
        Some("is_zero_shot_view")
    } else {
        None
    }
}

/// Recomputes the checksum and re-derives every episode from the manifest's
/// sampling configuration.
///
/// Only the datasets referenced by the manifest are used; each must be
/// supplied. A manifest produced by a different generator cannot be
/// re-derived and is rejected outright.
pub fn verify_manifest(
    manifest: &BenchmarkManifest,
    datasets: &[(DatasetSpec, Vec<LabeledExample>)],
) -> Result<VerificationReport, SamplerError> {
    if manifest.header.rng_algorithm_id != RNG_ALGORITHM_ID {
        return Err(SamplerError::RngMismatch {
            found: manifest.header.rng_algorithm_id.clone(),
            expected: RNG_ALGORITHM_ID.to_owned(),
        });
    }
    let by_id: HashMap<&str, &(DatasetSpec, Vec<LabeledExample>)> = datasets
        .iter()
        .map(|d| (d.0.dataset_id.as_str(), d))
        .collect();
    let mut used = Vec::new();
    for id in manifest.dataset_ids() {
        let dataset = by_id
            .get(id)
            .ok_or_else(|| SamplerError::MissingDataset(id.to_owned()))?;
        used.push((*dataset).clone());
    }
    let rebuilt = build_manifest(&used, manifest.sampling_config())?;
    let mut expected: BTreeMap<&str, &Episode> = rebuilt
        .episodes
        .iter()
        .map(|e| (e.episode_id.as_str(), e))
        .collect();

    let mut verdicts = Vec::with_capacity(manifest.episodes.len());
    for episode in &manifest.episodes {
        let differing = match expected.remove(episode.episode_id.as_str()) {
            Some(reference) => first_difference(episode, reference).map(str::to_owned),
            None => Some("episode_id".to_owned()),
        };
        verdicts.push(EpisodeVerdict {
            episode_id: episode.episode_id.clone(),
            passed: differing.is_none(),
            differing_field: differing,
        });
    }
    // episodes the manifest should contain but does not
    verdicts.extend(expected.into_keys().map(|id| EpisodeVerdict {
        episode_id: id.to_owned(),
        passed: false,
        differing_field: Some("missing".to_owned()),
    }));

    let computed = manifest.compute_checksum();
    Ok(VerificationReport {
        checksum_ok: computed == manifest.checksum,
        recorded_checksum: manifest.checksum.clone(),
        computed_checksum: computed,
        episodes: verdicts,
    })
}
