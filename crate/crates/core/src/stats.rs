//! Scoring and reporting statistics.
//!
//! Episode accuracies are summarized by their mean, sample standard
//! deviation, a percentile-bootstrap confidence interval and a symmetric
//! standard-error interval. Percentiles use linear interpolation between
//! order statistics (the "type 7" rule). Every resample is drawn from its own
//! derived stream, so intervals are bit-identical for a given seed no matter
//! how many threads compute them.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{normalize_label, DatasetSpec, LabeledExample, TransferType};
use crate::rng::derive_stream;
use crate::sampler::{BenchmarkManifest, Episode, View};

/// Version string embedded in reports.
pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Percentile rule recorded in report metadata.
pub const PERCENTILE_METHOD: &str = "linear-interpolation";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsConfig {
    pub confidence_level: f64,
    pub bootstrap_resamples: u32,
    pub bootstrap_seed: u64,
    pub z_critical: f64,
}

impl Default for StatsConfig {
    fn default() -> Self {
        Self {
            confidence_level: 0.95,
            bootstrap_resamples: 5000,
            bootstrap_seed: 0,
            z_critical: 1.96,
        }
    }
}

impl StatsConfig {
    pub fn validate(&self) -> Result<(), StatsError> {
        if !(self.confidence_level > 0.0 && self.confidence_level < 1.0) {
            return Err(StatsError::Config(format!(
                "confidence_level must lie in (0, 1), got {}",
                self.confidence_level
            )));
        }
        if self.bootstrap_resamples == 0 {
            return Err(StatsError::Config(
                "bootstrap_resamples must be at least 1".into(),
            ));
        }
        if !(self.z_critical.is_finite() && self.z_critical >= 0.0) {
            return Err(StatsError::Config(format!(
                "z_critical must be a non-negative number, got {}",
                self.z_critical
            )));
        }
        Ok(())
    }

    /// Lower and upper percentile ranks, e.g. 0.025 and 0.975 at 95%.
    pub fn tail_quantiles(&self) -> (f64, f64) {
        let alpha = (1.0 - self.confidence_level) / 2.0;
        (alpha, 1.0 - alpha)
    }
}

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("no scores to summarize")]
    Empty,
    #[error("need at least {needed} scores, got {found}")]
    TooFew { needed: usize, found: usize },
    #[error("invalid statistics configuration: {0}")]
    Config(String),
    #[error("episode {episode_id}: expected {expected} predictions, got {found}")]
    LengthMismatch {
        episode_id: String,
        expected: usize,
        found: usize,
    },
    #[error("predictions reference unknown episode {0}")]
    UnknownEpisode(String),
    #[error("predictions missing for {} episode(s): {}", .0.len(), .0.join(", "))]
    MissingEpisodes(Vec<String>),
    #[error("duplicate predictions for episode {0}")]
    DuplicateEpisode(String),
    #[error("episode {episode_id}: no gold label for example {example_id}")]
    MissingGold {
        episode_id: String,
        example_id: String,
    },
    #[error("no dataset spec for {0}")]
    UnknownDataset(String),
    #[error("manifest checksum mismatch: expected {expected}, found {found}")]
    ChecksumMismatch { expected: String, found: String },
    #[error("score vectors differ: {0}")]
    Misaligned(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("predictions line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Whether a submission was meta-trained before evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolTag {
    PretrainingOnly,
    MetaTrained,
}

/// Predicted labels for every episode of one manifest.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PredictionSet {
    pub manifest_checksum: String,
    pub protocol_tag: ProtocolTag,
    /// Predictions aligned by position with each episode's test examples.
    pub entries: IndexMap<String, Vec<String>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PredictionHeader {
    manifest_checksum: String,
    protocol_tag: ProtocolTag,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PredictionLine {
    episode_id: String,
    predictions: Vec<String>,
}

impl PredictionSet {
    pub fn new(manifest: &BenchmarkManifest, protocol_tag: ProtocolTag) -> Self {
        Self {
            manifest_checksum: manifest.checksum.clone(),
            protocol_tag,
            entries: IndexMap::new(),
        }
    }

    pub fn parse<R: Read>(reader: R) -> Result<Self, StatsError> {
        let parse_err = |line: usize, message: String| StatsError::Parse { line, message };
        let mut header: Option<PredictionHeader> = None;
        let mut entries = IndexMap::new();
        for (i, line) in BufReader::new(reader).lines().enumerate() {
            let line_no = i + 1;
            let line = line.map_err(|e| parse_err(line_no, e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            if header.is_none() {
                header = Some(
                    serde_json::from_str(&line).map_err(|e| parse_err(line_no, e.to_string()))?,
                );
                continue;
            }
            let entry: PredictionLine =
                serde_json::from_str(&line).map_err(|e| parse_err(line_no, e.to_string()))?;
            if entries.contains_key(&entry.episode_id) {
                return Err(StatsError::DuplicateEpisode(entry.episode_id));
            }
            entries.insert(entry.episode_id, entry.predictions);
        }
        let header = header.ok_or_else(|| parse_err(1, "missing header line".into()))?;
        Ok(Self {
            manifest_checksum: header.manifest_checksum,
            protocol_tag: header.protocol_tag,
            entries,
        })
    }

    pub fn read(path: &Path) -> Result<Self, StatsError> {
        let file = fs::File::open(path).map_err(|source| StatsError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::parse(file)
    }

    pub fn to_jsonl(&self) -> String {
        let header = PredictionHeader {
            manifest_checksum: self.manifest_checksum.clone(),
            protocol_tag: self.protocol_tag,
        };
        let mut out = serde_json::to_string(&header).expect("header serializes");
        out.push('\n');
        for (episode_id, predictions) in &self.entries {
            let line = PredictionLine {
                episode_id: episode_id.clone(),
                predictions: predictions.clone(),
            };
            out.push_str(&serde_json::to_string(&line).expect("entry serializes"));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<(), StatsError> {
        fs::write(path, self.to_jsonl()).map_err(|source| StatsError::Io {
            path: path.to_owned(),
            source,
        })
    }
}

/// Fraction of test examples predicted correctly.
///
/// Labels are compared after trimming and NFC normalization. A prediction
/// outside the episode's label set is wrong, never an error.
pub fn score_episode(
    episode: &Episode,
    predictions: &[String],
    gold: &HashMap<String, String>,
) -> Result<f64, StatsError> {
    let expected = episode.test_example_ids.len();
    if predictions.len() != expected {
        return Err(StatsError::LengthMismatch {
            episode_id: episode.episode_id.clone(),
            expected,
            found: predictions.len(),
        });
    }
    if expected == 0 {
        return Err(StatsError::Empty);
    }
    let mut correct = 0usize;
    for (example_id, predicted) in episode.test_example_ids.iter().zip(predictions) {
        let gold_label = gold
            .get(example_id)
            .ok_or_else(|| StatsError::MissingGold {
                episode_id: episode.episode_id.clone(),
                example_id: example_id.clone(),
            })?;
        let predicted = normalize_label(predicted);
        if predicted == normalize_label(gold_label) && episode.label_set.contains(&predicted) {
            correct += 1;
        }
    }
    Ok(correct as f64 / expected as f64)
}

/// Arithmetic mean, accumulated as offsets from the first score so that
/// constant data returns that constant exactly.
pub fn mean(scores: &[f64]) -> Result<f64, StatsError> {
    let first = *scores.first().ok_or(StatsError::Empty)?;
    let offset: f64 = scores.iter().map(|s| s - first).sum::<f64>() / scores.len() as f64;
    Ok(first + offset)
}

/// Mean and sample standard deviation (denominator n − 1, zero for n = 1).
pub fn aggregate(scores: &[f64]) -> Result<(f64, f64), StatsError> {
    let m = mean(scores)?;
    if scores.len() == 1 {
        return Ok((m, 0.0));
    }
    let ss: f64 = scores.iter().map(|s| (s - m).powi(2)).sum();
    Ok((m, (ss / (scores.len() - 1) as f64).sqrt()))
}

/// Quantile `q` of ascending `sorted` data, interpolating linearly between
/// the two nearest order statistics.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of empty data");
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn resample_mean<R: Rng + ?Sized>(scores: &[f64], rng: &mut R) -> f64 {
    let n = scores.len();
    let mut sum = 0.0;
    // 32-bit draws halve generator output for every realistic episode count
    if let Ok(n32) = u32::try_from(n) {
        for _ in 0..n {
            sum += scores[rng.random_range(0..n32) as usize];
        }
    } else {
        for _ in 0..n {
            sum += scores[rng.random_range(0..n)];
        }
    }
    sum / n as f64
}

/// Same as [`percentile`] on unsorted data, reordering `values` in place.
pub fn select_percentile(values: &mut [f64], q: f64) -> f64 {
    assert!(!values.is_empty(), "percentile of empty data");
    let h = (values.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let (_, &mut below, above) = values.select_nth_unstable_by(lo, f64::total_cmp);
    let next = above
        .iter()
        .copied()
        .min_by(f64::total_cmp)
        .unwrap_or(below);
    below + (h - lo as f64) * (next - below)
}

/// Turns bootstrap means into interval endpoints.
///
/// Endpoints are kept inside `[min(scores), max(scores)]`, which rounding in
/// the resample sums could otherwise violate by an ulp, and are widened to
/// reach the sample mean when a tiny resample count leaves it outside.
fn interval_from_means(
    scores: &[f64],
    mut means: Vec<f64>,
    lower_q: f64,
    upper_q: f64,
) -> (f64, f64) {
    let lo_data = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let hi_data = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let m = mean(scores).expect("nonempty").clamp(lo_data, hi_data);
    let low = select_percentile(&mut means, lower_q)
        .clamp(lo_data, hi_data)
        .min(m);
    let up = select_percentile(&mut means, upper_q)
        .clamp(lo_data, hi_data)
        .max(m);
    (low, up)
}

/// Percentile-bootstrap interval for the mean.
///
/// Resample `r` draws its indices from `derive_stream(bootstrap_seed,
/// "bootstrap", r, "resample")`. Indices never depend on the score values, so
/// shifting every score by a constant shifts both endpoints by that constant.
pub fn bootstrap_ci(scores: &[f64], config: &StatsConfig) -> Result<(f64, f64), StatsError> {
    if scores.is_empty() {
        return Err(StatsError::Empty);
    }
    let means: Vec<f64> = (0..config.bootstrap_resamples)
        .into_par_iter()
        .map(|r| {
            let mut rng = derive_stream(config.bootstrap_seed, "bootstrap", r as u64, "resample");
            resample_mean(scores, &mut rng)
        })
        .collect();
    let (lq, uq) = config.tail_quantiles();
    Ok(interval_from_means(scores, means, lq, uq))
}

/// Percentile-bootstrap interval drawing every resample from one generator.
///
/// Used inside simulations, where each run already owns a derived stream and
/// per-resample derivation would dominate the cost.
pub fn bootstrap_ci_with_rng<R: Rng + ?Sized>(
    scores: &[f64],
    confidence_level: f64,
    resamples: u32,
    rng: &mut R,
) -> Result<(f64, f64), StatsError> {
    if scores.is_empty() {
        return Err(StatsError::Empty);
    }
    let means: Vec<f64> = (0..resamples).map(|_| resample_mean(scores, rng)).collect();
    let alpha = (1.0 - confidence_level) / 2.0;
    Ok(interval_from_means(scores, means, alpha, 1.0 - alpha))
}

/// Half-width of the symmetric standard-error interval, `z · sd / √n`.
pub fn sem_ci(scores: &[f64], config: &StatsConfig) -> Result<f64, StatsError> {
    if scores.len() < 2 {
        return Err(StatsError::TooFew {
            needed: 2,
            found: scores.len(),
        });
    }
    let (_, sd) = aggregate(scores)?;
    Ok(config.z_critical * sd / (scores.len() as f64).sqrt())
}

/// Summary of one group of episode accuracies.
///
/// Bootstrap endpoints are reported both as absolute values and as
/// distances from the mean.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub mean: f64,
    pub stdev: f64,
    pub ci_low: f64,
    pub ci_up: f64,
    pub ci_low_offset: f64,
    pub ci_up_offset: f64,
    /// Absent for a single episode.
    pub ci_sem_halfwidth: Option<f64>,
    pub n_episodes: usize,
}

pub fn summarize(scores: &[f64], config: &StatsConfig) -> Result<GroupStats, StatsError> {
    let (m, sd) = aggregate(scores)?;
    let (ci_low, ci_up) = bootstrap_ci(scores, config)?;
    Ok(GroupStats {
        mean: m,
        stdev: sd,
        ci_low,
        ci_up,
        ci_low_offset: m - ci_low,
        ci_up_offset: ci_up - m,
        ci_sem_halfwidth: sem_ci(scores, config).ok(),
        n_episodes: scores.len(),
    })
}

/// Zero-shot and few-shot summaries of one group.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ViewStats {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub few_shot: Option<GroupStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zero_shot: Option<GroupStats>,
}

impl ViewStats {
    pub fn get(&self, view: View) -> Option<&GroupStats> {
        match view {
            View::FewShot => self.few_shot.as_ref(),
            View::ZeroShot => self.zero_shot.as_ref(),
        }
    }

    fn from_scores(few: &[f64], zero: &[f64], config: &StatsConfig) -> Result<Self, StatsError> {
        let summarize_opt = |s: &[f64]| {
            if s.is_empty() {
                Ok(None)
            } else {
                summarize(s, config).map(Some)
            }
        };
        Ok(Self {
            few_shot: summarize_opt(few)?,
            zero_shot: summarize_opt(zero)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub artifact_version: String,
    pub manifest_checksum: String,
    pub protocol_tag: ProtocolTag,
    pub stats_config: StatsConfig,
    pub percentile_method: String,
    pub per_episode: BTreeMap<String, f64>,
    pub overall: ViewStats,
    pub per_dataset: BTreeMap<String, ViewStats>,
    /// A dataset contributes to every transfer type it carries.
    pub per_transfer_type: BTreeMap<TransferType, ViewStats>,
}

impl ScoreReport {
    pub fn read(path: &Path) -> Result<Self, StatsError> {
        let text = fs::read_to_string(path).map_err(|source| StatsError::Io {
            path: path.to_owned(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| StatsError::Parse {
            line: e.line(),
            message: e.to_string(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Default)]
struct ViewScores {
    few: Vec<f64>,
    zero: Vec<f64>,
}

impl ViewScores {
    fn push(&mut self, view: View, score: f64) {
        match view {
            View::FewShot => self.few.push(score),
            View::ZeroShot => self.zero.push(score),
        }
    }

    fn summarize(&self, config: &StatsConfig) -> Result<ViewStats, StatsError> {
        ViewStats::from_scores(&self.few, &self.zero, config)
    }
}

/// Scores every manifest episode and rolls accuracies up per dataset, per
/// transfer type and overall, keeping zero-shot and few-shot views apart.
///
/// Fails without a partial report if the predictions were made for another
/// manifest, skip an episode, or name an episode the manifest lacks.
pub fn build_report(
    manifest: &BenchmarkManifest,
    predictions: &PredictionSet,
    datasets: &[(DatasetSpec, Vec<LabeledExample>)],
    config: &StatsConfig,
) -> Result<ScoreReport, StatsError> {
    config.validate()?;
    if predictions.manifest_checksum != manifest.checksum {
        return Err(StatsError::ChecksumMismatch {
            expected: manifest.checksum.clone(),
            found: predictions.manifest_checksum.clone(),
        });
    }
    let known: HashMap<&str, &Episode> = manifest
        .episodes
        .iter()
        .map(|e| (e.episode_id.as_str(), e))
        .collect();
    if let Some(unknown) = predictions
        .entries
        .keys()
        .find(|id| !known.contains_key(id.as_str()))
    {
        return Err(StatsError::UnknownEpisode(unknown.clone()));
    }
    let missing: Vec<String> = manifest
        .episodes
        .iter()
        .filter(|e| !predictions.entries.contains_key(&e.episode_id))
        .map(|e| e.episode_id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(StatsError::MissingEpisodes(missing));
    }

    let by_id: HashMap<&str, &(DatasetSpec, Vec<LabeledExample>)> = datasets
        .iter()
        .map(|d| (d.0.dataset_id.as_str(), d))
        .collect();
    let mut gold: HashMap<&str, HashMap<String, String>> = HashMap::new();
    for id in manifest.dataset_ids() {
        let (_, examples) = by_id
            .get(id)
            .ok_or_else(|| StatsError::UnknownDataset(id.to_owned()))?;
        gold.insert(
            id,
            examples
                .iter()
                .map(|e| (e.example_id.clone(), e.label.clone()))
                .collect(),
        );
    }

    let mut per_episode = BTreeMap::new();
    let mut overall = ViewScores::default();
    let mut per_dataset: BTreeMap<String, ViewScores> = BTreeMap::new();
    let mut per_transfer: BTreeMap<TransferType, ViewScores> = BTreeMap::new();
    for episode in &manifest.episodes {
        let score = score_episode(
            episode,
            &predictions.entries[&episode.episode_id],
            &gold[episode.dataset_id.as_str()],
        )?;
        per_episode.insert(episode.episode_id.clone(), score);
        let view = episode.view();
        overall.push(view, score);
        per_dataset
            .entry(episode.dataset_id.clone())
            .or_default()
            .push(view, score);
        for &t in &by_id[episode.dataset_id.as_str()].0.transfer_types {
            per_transfer.entry(t).or_default().push(view, score);
        }
    }

    Ok(ScoreReport {
        artifact_version: ARTIFACT_VERSION.to_owned(),
        manifest_checksum: manifest.checksum.clone(),
        protocol_tag: predictions.protocol_tag,
        stats_config: config.clone(),
        percentile_method: PERCENTILE_METHOD.to_owned(),
        per_episode,
        overall: overall.summarize(config)?,
        per_dataset: per_dataset
            .iter()
            .map(|(k, v)| Ok((k.clone(), v.summarize(config)?)))
            .collect::<Result<_, StatsError>>()?,
        per_transfer_type: per_transfer
            .iter()
            .map(|(k, v)| Ok((*k, v.summarize(config)?)))
            .collect::<Result<_, StatsError>>()?,
    })
}

/// Mean paired difference `a − b` with its bootstrap interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedDiff {
    pub mean_diff: f64,
    pub diff_ci_low: f64,
    pub diff_ci_up: f64,
    pub n_episodes: usize,
}

impl PairedDiff {
    /// True when the interval excludes zero.
    pub fn significant(&self) -> bool {
        self.diff_ci_low > 0.0 || self.diff_ci_up < 0.0
    }
}

/// Bootstrap over per-episode differences `a_i − b_i`.
pub fn paired_compare(
    a: &[f64],
    b: &[f64],
    config: &StatsConfig,
) -> Result<PairedDiff, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::Misaligned(format!(
            "{} scores against {}",
            a.len(),
            b.len()
        )));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean_diff = mean(&diffs)?;
    let (diff_ci_low, diff_ci_up) = bootstrap_ci(&diffs, config)?;
    Ok(PairedDiff {
        mean_diff,
        diff_ci_low,
        diff_ci_up,
        n_episodes: diffs.len(),
    })
}

/// Paired comparison of two reports over the same manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub artifact_version: String,
    pub manifest_checksum: String,
    pub stats_config: StatsConfig,
    pub overall: PairedViews,
    pub per_dataset: BTreeMap<String, PairedViews>,
}

impl ComparisonReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("comparison serializes")
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PairedViews {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub few_shot: Option<PairedDiff>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zero_shot: Option<PairedDiff>,
}

/// Compares two reports episode by episode.
///
/// Both must carry the same manifest checksum and score exactly the same
/// episodes, which guarantees every difference pairs identical episodes.
pub fn compare_reports(
    a: &ScoreReport,
    b: &ScoreReport,
    config: &StatsConfig,
) -> Result<ComparisonReport, StatsError> {
    config.validate()?;
    if a.manifest_checksum != b.manifest_checksum {
        return Err(StatsError::ChecksumMismatch {
            expected: a.manifest_checksum.clone(),
            found: b.manifest_checksum.clone(),
        });
    }
    if !a.per_episode.keys().eq(b.per_episode.keys()) {
        let only: Vec<&String> = a
            .per_episode
            .keys()
            .filter(|k| !b.per_episode.contains_key(*k))
            .chain(
                b.per_episode
                    .keys()
                    .filter(|k| !a.per_episode.contains_key(*k)),
            )
            .collect();
        return Err(StatsError::Misaligned(format!(
            "episodes scored by only one report: {only:?}"
        )));
    }

    type Pairs = (Vec<f64>, Vec<f64>);
    let mut overall: BTreeMap<&str, Pairs> = BTreeMap::new();
    let mut per_dataset: BTreeMap<(String, &str), Pairs> = BTreeMap::new();
    for (id, &sa) in &a.per_episode {
        let sb = b.per_episode[id];
        let view = if id.ends_with("/zero") { "zero" } else { "few" };
        let dataset = id.rsplitn(3, '/').nth(2).unwrap_or(id).to_owned();
        for pairs in [
            overall.entry(view).or_default(),
            per_dataset.entry((dataset, view)).or_default(),
        ] {
            pairs.0.push(sa);
            pairs.1.push(sb);
        }
    }

    let to_views = |few: Option<&Pairs>, zero: Option<&Pairs>| -> Result<PairedViews, StatsError> {
        let cmp = |p: Option<&Pairs>| p.map(|(x, y)| paired_compare(x, y, config)).transpose();
        Ok(PairedViews {
            few_shot: cmp(few)?,
            zero_shot: cmp(zero)?,
        })
    };
    let mut datasets: BTreeMap<String, PairedViews> = BTreeMap::new();
    let dataset_ids: Vec<String> = per_dataset.keys().map(|(d, _)| d.clone()).collect();
    for d in dataset_ids {
        if datasets.contains_key(&d) {
            continue;
        }
        let views = to_views(
            per_dataset.get(&(d.clone(), "few")),
            per_dataset.get(&(d.clone(), "zero")),
        )?;
        datasets.insert(d, views);
    }
    Ok(ComparisonReport {
        artifact_version: ARTIFACT_VERSION.to_owned(),
        manifest_checksum: a.manifest_checksum.clone(),
        stats_config: config.clone(),
        overall: to_views(overall.get("few"), overall.get("zero"))?,
        per_dataset: datasets,
    })
}
