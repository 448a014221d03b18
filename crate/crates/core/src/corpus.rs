//! Dataset ingestion and validation.
//!
//! A dataset is described by two files: a JSON [`DatasetSpec`] that declares
//! the textual labels of every phase plus transfer-type metadata, and a JSONL
//! data file holding one [`LabeledExample`] per line. [`load_dataset`] parses
//! both and either returns fully validated data or the complete list of
//! problems found, never a mix of the two.
//!
//! Labels are compared after Unicode NFC normalization and trimming of
//! surrounding whitespace. Matching is otherwise case-sensitive.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

/// Input layout of a dataset's examples.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskFormat {
    SingleText,
    SentencePair,
    RelationClassification,
    EntityTyping,
    Document,
}

impl TaskFormat {
    /// Number of mention spans an example of this format must carry.
    pub fn required_spans(self) -> Option<usize> {
        match self {
            TaskFormat::RelationClassification => Some(2),
            TaskFormat::EntityTyping => Some(1),
            _ => None,
        }
    }
}

/// What changes between meta-training and meta-testing for a dataset.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransferType {
    Class,
    Domain,
    Task,
    Pretraining,
}

impl TransferType {
    pub const ALL: [TransferType; 4] = [
        TransferType::Class,
        TransferType::Domain,
        TransferType::Task,
        TransferType::Pretraining,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TransferType::Class => "class",
            TransferType::Domain => "domain",
            TransferType::Task => "task",
            TransferType::Pretraining => "pretraining",
        }
    }
}

impl fmt::Display for TransferType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    MetaTrain,
    MetaVal,
    MetaTest,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::MetaTrain => "meta_train",
            Phase::MetaVal => "meta_val",
            Phase::MetaTest => "meta_test",
        })
    }
}

/// Declarative description of a classification dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub dataset_id: String,
    pub task_format: TaskFormat,
    pub transfer_types: BTreeSet<TransferType>,
    pub phase: Phase,
    #[serde(default)]
    pub labels_train: Vec<String>,
    #[serde(default)]
    pub labels_val: Vec<String>,
    #[serde(default)]
    pub labels_test: Vec<String>,
    #[serde(default)]
    pub expected_test_example_count: Option<u64>,
    /// Surface form shown in prompts for a label, e.g. `entailment -> Yes`.
    /// Labels without an entry are shown verbatim.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub label_verbalizers: BTreeMap<String, String>,
}

impl DatasetSpec {
    pub fn is_class_transfer(&self) -> bool {
        self.transfer_types.contains(&TransferType::Class)
    }

    pub fn labels(&self, phase: Phase) -> &[String] {
        match phase {
            Phase::MetaTrain => &self.labels_train,
            Phase::MetaVal => &self.labels_val,
            Phase::MetaTest => &self.labels_test,
        }
    }

    /// Whether `label` is declared in any phase.
    pub fn knows_label(&self, label: &str) -> bool {
        [Phase::MetaTrain, Phase::MetaVal, Phase::MetaTest]
            .iter()
            .any(|&p| self.labels(p).iter().any(|l| l == label))
    }

    /// Returns the prompt surface form for `label`.
    pub fn verbalize<'a>(&'a self, label: &'a str) -> &'a str {
        self.label_verbalizers
            .get(label)
            .map(String::as_str)
            .unwrap_or(label)
    }

    /// NFC-normalizes and trims every label in place.
    pub fn normalize(&mut self) {
        self.dataset_id = normalize_text(&self.dataset_id);
        for set in [
            &mut self.labels_train,
            &mut self.labels_val,
            &mut self.labels_test,
        ] {
            for label in set.iter_mut() {
                *label = normalize_label(label);
            }
        }
        self.label_verbalizers = std::mem::take(&mut self.label_verbalizers)
            .into_iter()
            .map(|(k, v)| (normalize_label(&k), normalize_label(&v)))
            .collect();
    }

    /// Checks the structural invariants of the dataset spec itself.
    pub fn validate(&self) -> Result<(), CorpusError> {
        let fail = |reason: String| {
            Err(CorpusError::InvalidSpec {
                dataset_id: self.dataset_id.clone(),
                reason,
            })
        };
        if self.dataset_id.is_empty() {
            return fail("dataset_id is empty".into());
        }
        for (name, set) in [
            ("labels_train", &self.labels_train),
            ("labels_val", &self.labels_val),
            ("labels_test", &self.labels_test),
        ] {
            let mut seen = HashSet::new();
            for label in set {
                if label.is_empty() {
                    return fail(format!("{name} contains an empty label"));
                }
                if !seen.insert(label.as_str()) {
                    return fail(format!("{name} repeats label {label:?}"));
                }
            }
        }
        if self.is_class_transfer() {
            let sets = [&self.labels_train, &self.labels_val, &self.labels_test];
            if sets.iter().any(|s| s.is_empty()) {
                return fail(
                    "class-transfer datasets need nonempty train, val and test labels".into(),
                );
            }
            let mut owner: HashMap<&str, usize> = HashMap::new();
            for (i, set) in sets.iter().enumerate() {
                for label in set.iter() {
                    if let Some(prev) = owner.insert(label.as_str(), i) {
                        if prev != i {
                            return fail(format!(
                                "label {label:?} appears in more than one class split"
                            ));
                        }
                    }
                }
            }
        } else if self.phase == Phase::MetaTest
            && (!self.labels_train.is_empty() || !self.labels_val.is_empty())
        {
            return fail("meta-test-only datasets must not declare train or val labels".into());
        }
        if self.labels(self.phase).is_empty() {
            return fail(format!("no labels declared for phase {}", self.phase));
        }
        for key in self.label_verbalizers.keys() {
            if !self.knows_label(key) {
                return fail(format!("verbalizer for undeclared label {key:?}"));
            }
        }
        Ok(())
    }
}

/// One `(x, y)` example with a textual label.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub example_id: String,
    pub text_a: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text_b: Option<String>,
    /// 0-based, end-exclusive character offsets into `text_a`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mention_spans: Option<Vec<(usize, usize)>>,
    pub label: String,
}

impl LabeledExample {
    /// Returns the text covered by mention `i`, if present.
    pub fn mention(&self, i: usize) -> Option<String> {
        let &(start, end) = self.mention_spans.as_ref()?.get(i)?;
        Some(
            self.text_a
                .chars()
                .skip(start)
                .take(end.saturating_sub(start))
                .collect(),
        )
    }
}

/// A single problem found while validating a data file.
#[derive(Clone, Debug, PartialEq, Eq, Error, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RecordError {
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: example {example_id:?} has unknown label {label:?}")]
    UnknownLabel {
        line: usize,
        example_id: String,
        label: String,
    },
    #[error("line {line}: duplicate example_id {example_id:?} (first seen on line {first_line})")]
    DuplicateId {
        line: usize,
        example_id: String,
        first_line: usize,
    },
    #[error("line {line}: example {example_id:?} span ({start}, {end}) outside text of {len} characters")]
    SpanOutOfBounds {
        line: usize,
        example_id: String,
        start: usize,
        end: usize,
        len: usize,
    },
    #[error("line {line}: example {example_id:?} has overlapping mention spans")]
    SpanOverlap { line: usize, example_id: String },
    #[error("line {line}: example {example_id:?} has {found} mention spans, expected {expected}")]
    SpanCount {
        line: usize,
        example_id: String,
        found: usize,
        expected: usize,
    },
    #[error(
        "line {line}: example {example_id:?} must not carry mention spans for this task format"
    )]
    UnexpectedSpans { line: usize, example_id: String },
    #[error(
        "line {line}: example {example_id:?} is missing text_b required by sentence-pair tasks"
    )]
    MissingTextB { line: usize, example_id: String },
    #[error("line {line}: example {example_id:?} has text_b but the task is not sentence-pair")]
    ExtraTextB { line: usize, example_id: String },
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: invalid dataset spec: {source}")]
    SpecParse {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("dataset {dataset_id:?}: {reason}")]
    InvalidSpec { dataset_id: String, reason: String },
    #[error("dataset {dataset_id:?}: {} invalid record(s); first: {}", .errors.len(), .errors[0])]
    Invalid {
        dataset_id: String,
        errors: Vec<RecordError>,
    },
    #[error("dataset {dataset_id:?}: no examples for label(s) {labels:?} in phase {phase}")]
    EmptyClass {
        dataset_id: String,
        phase: Phase,
        labels: Vec<String>,
    },
}

pub fn normalize_text(s: &str) -> String {
    s.nfc().collect()
}

/// Canonical label form: surrounding whitespace trimmed, then NFC.
pub fn normalize_label(s: &str) -> String {
    s.trim().nfc().collect()
}

pub fn read_spec(path: &Path) -> Result<DatasetSpec, CorpusError> {
    let raw = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_owned(),
        source,
    })?;
    let mut spec: DatasetSpec =
        serde_json::from_str(&raw).map_err(|source| CorpusError::SpecParse {
            path: path.to_owned(),
            source,
        })?;
    spec.normalize();
    spec.validate()?;
    Ok(spec)
}

/// Loads and validates a dataset from its spec and JSONL data file.
pub fn load_dataset(
    spec_path: &Path,
    data_path: &Path,
) -> Result<(DatasetSpec, Vec<LabeledExample>), CorpusError> {
    let spec = read_spec(spec_path)?;
    let file = fs::File::open(data_path).map_err(|source| CorpusError::Io {
        path: data_path.to_owned(),
        source,
    })?;
    let examples = parse_examples(&spec, file).map_err(|e| match e {
        CorpusError::Io { source, .. } => CorpusError::Io {
            path: data_path.to_owned(),
            source,
        },
        other => other,
    })?;
    Ok((spec, examples))
}

/// Parses JSONL examples against `spec`, collecting every record error.
pub fn parse_examples<R: Read>(
    spec: &DatasetSpec,
    reader: R,
) -> Result<Vec<LabeledExample>, CorpusError> {
    let mut examples = Vec::new();
    let mut lines = Vec::new();
    let mut errors = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|source| CorpusError::Io {
            path: PathBuf::new(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<LabeledExample>(&line) {
            Ok(mut ex) => {
                ex.example_id = normalize_text(&ex.example_id);
                ex.label = normalize_label(&ex.label);
                examples.push(ex);
                lines.push(line_no);
            }
            Err(e) => errors.push(RecordError::Malformed {
                line: line_no,
                message: e.to_string(),
            }),
        }
    }
    errors.extend(validate_examples_at(spec, &examples, &lines));
    if errors.is_empty() {
        Ok(examples)
    } else {
        errors.sort_by_key(record_line);
        Err(CorpusError::Invalid {
            dataset_id: spec.dataset_id.clone(),
            errors,
        })
    }
}

fn record_line(e: &RecordError) -> usize {
    match e {
        RecordError::Malformed { line, .. }
        | RecordError::UnknownLabel { line, .. }
        | RecordError::DuplicateId { line, .. }
        | RecordError::SpanOutOfBounds { line, .. }
        | RecordError::SpanOverlap { line, .. }
        | RecordError::SpanCount { line, .. }
        | RecordError::UnexpectedSpans { line, .. }
        | RecordError::MissingTextB { line, .. }
        | RecordError::ExtraTextB { line, .. } => *line,
    }
}

/// Validates already-parsed examples; positions are reported 1-based.
pub fn validate_examples(spec: &DatasetSpec, examples: &[LabeledExample]) -> Vec<RecordError> {
    let lines: Vec<usize> = (1..=examples.len()).collect();
    validate_examples_at(spec, examples, &lines)
}

fn validate_examples_at(
    spec: &DatasetSpec,
    examples: &[LabeledExample],
    lines: &[usize],
) -> Vec<RecordError> {
    let mut errors = Vec::new();
    let mut first_seen: HashMap<&str, usize> = HashMap::new();
    for (ex, &line) in examples.iter().zip(lines) {
        let id = || ex.example_id.clone();
        if let Some(&first_line) = first_seen.get(ex.example_id.as_str()) {
            errors.push(RecordError::DuplicateId {
                line,
                example_id: id(),
                first_line,
            });
        } else {
            first_seen.insert(&ex.example_id, line);
        }
        if !spec.knows_label(&ex.label) {
            errors.push(RecordError::UnknownLabel {
                line,
                example_id: id(),
                label: ex.label.clone(),
            });
        }
        match (
            spec.task_format == TaskFormat::SentencePair,
            ex.text_b.is_some(),
        ) {
            (true, false) => errors.push(RecordError::MissingTextB {
                line,
                example_id: id(),
            }),
            (false, true) => errors.push(RecordError::ExtraTextB {
                line,
                example_id: id(),
            }),
            _ => {}
        }
        match (spec.task_format.required_spans(), &ex.mention_spans) {
            (None, Some(_)) => errors.push(RecordError::UnexpectedSpans {
                line,
                example_id: id(),
            }),
            (Some(expected), None) => errors.push(RecordError::SpanCount {
                line,
                example_id: id(),
                found: 0,
                expected,
            }),
            (Some(expected), Some(spans)) => {
                if spans.len() != expected {
                    errors.push(RecordError::SpanCount {
                        line,
                        example_id: id(),
                        found: spans.len(),
                        expected,
                    });
                }
                let len = ex.text_a.chars().count();
                let mut in_bounds = true;
                for &(start, end) in spans {
                    if start >= end || end > len {
                        in_bounds = false;
                        errors.push(RecordError::SpanOutOfBounds {
                            line,
                            example_id: id(),
                            start,
                            end,
                            len,
                        });
                    }
                }
                if in_bounds && spans_overlap(spans) {
                    errors.push(RecordError::SpanOverlap {
                        line,
                        example_id: id(),
                    });
                }
            }
            (None, None) => {}
        }
    }
    errors
}

fn spans_overlap(spans: &[(usize, usize)]) -> bool {
    let mut sorted = spans.to_vec();
    sorted.sort_unstable();
    sorted.windows(2).any(|w| w[1].0 < w[0].1)
}

/// Serializes examples as JSONL, one compact object per line.
pub fn write_examples<W: Write>(examples: &[LabeledExample], mut out: W) -> std::io::Result<()> {
    for ex in examples {
        serde_json::to_writer(&mut out, ex)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Examples of one phase grouped by label, in the dataset spec's label order.
pub type ClassPool<'a> = IndexMap<String, Vec<&'a LabeledExample>>;

/// Groups the examples carrying one of `phase`'s labels by label.
///
/// Every declared label of the phase must have at least one example.
pub fn class_pool<'a>(
    spec: &DatasetSpec,
    examples: &'a [LabeledExample],
    phase: Phase,
) -> Result<ClassPool<'a>, CorpusError> {
    let labels = spec.labels(phase);
    if labels.is_empty() {
        return Err(CorpusError::InvalidSpec {
            dataset_id: spec.dataset_id.clone(),
            reason: format!("no labels declared for phase {phase}"),
        });
    }
    let mut pool: ClassPool<'a> = labels.iter().map(|l| (l.clone(), Vec::new())).collect();
    for ex in examples {
        if let Some(members) = pool.get_mut(&ex.label) {
            members.push(ex);
        }
    }
    let empty: Vec<String> = pool
        .iter()
        .filter(|(_, members)| members.is_empty())
        .map(|(label, _)| label.clone())
        .collect();
    if empty.is_empty() {
        Ok(pool)
    } else {
        Err(CorpusError::EmptyClass {
            dataset_id: spec.dataset_id.clone(),
            phase,
            labels: empty,
        })
    }
}

/// Loads every dataset of a directory.
///
/// Each `<name>.json` spec is paired with the data file `<name>.jsonl` next
/// to it. Datasets are returned in file-name order.
pub fn load_directory(dir: &Path) -> Result<Vec<(DatasetSpec, Vec<LabeledExample>)>, CorpusError> {
    let io_err = |source| CorpusError::Io {
        path: dir.to_owned(),
        source,
    };
    let mut spec_paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err)?
        .map(|entry| entry.map(|e| e.path()))
        .collect::<Result<Vec<_>, _>>()
        .map_err(io_err)?
        .into_iter()
        .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
        .collect();
    spec_paths.sort();
    spec_paths
        .iter()
        .map(|spec_path| load_dataset(spec_path, &spec_path.with_extension("jsonl")))
        .collect()
}
