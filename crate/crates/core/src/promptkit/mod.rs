//! Multiple-choice prompts and answer normalization.
//!
//! Each test (and training) example of an episode is rendered as a question,
//! a list of lettered choices and, for most formats, the document itself:
//!
//! ```text
//! Topic? \n (A) business (B) tech \n Shares rallied after the report.
//! ```
//!
//! The `\n` between segments is the literal two-character delimiter, not a
//! newline byte. Choices follow the episode's label order. Generated answers
//! are mapped back onto a choice by [`normalize_answer`], which always
//! returns one of the offered labels.

mod predictors;
mod remote;

pub use predictors::{majority_train, oracle, random_uniform, ExampleIndex};
pub use remote::{predict_remote, RemoteConfig, RemoteError};

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{DatasetSpec, LabeledExample, TaskFormat};
use crate::sampler::Episode;

/// Letters available for choices; episodes never exceed ten labels.
pub const CHOICE_LETTERS: [char; 10] = ['A', 'B', 'C', 'D', 'E', 'F', 'G', 'H', 'I', 'J'];

/// The two-character delimiter placed between prompt segments.
pub const DEFAULT_DELIMITER: &str = "\\n";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("example {example_id}: template expects {expected:?} input, dataset is {found:?}")]
    FormatMismatch {
        example_id: String,
        expected: TaskFormat,
        found: TaskFormat,
    },
    #[error("example {example_id}: {format:?} prompts need {needed} mention span(s)")]
    MissingSpans {
        example_id: String,
        format: TaskFormat,
        needed: usize,
    },
    #[error("example {example_id}: sentence-pair prompts need text_b")]
    MissingTextB { example_id: String },
    #[error("episode {episode_id} has {count} labels; at most {} choices can be lettered", CHOICE_LETTERS.len())]
    TooManyChoices { episode_id: String, count: usize },
    #[error("episode {episode_id} references unknown example {example_id}")]
    UnknownExample {
        episode_id: String,
        example_id: String,
    },
    #[error("template placeholder {{{0}}} is not available for this format")]
    UnknownPlaceholder(String),
}

/// How one task format is turned into text.
///
/// `question_pattern` and `document_pattern` may use the placeholders
/// `{text_a}`, `{text_b}`, `{mention_1}`, `{mention_2}` and `{marked_text}`
/// (`text_a` with its mentions wrapped in `mention_markers`).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub task_format: TaskFormat,
    pub question_pattern: String,
    /// Final segment; `None` leaves the prompt ending after the choices.
    pub document_pattern: Option<String>,
    pub field_delimiter: String,
    /// Markers wrapped around the first and second mention.
    pub mention_markers: (String, String),
}

impl PromptTemplate {
    pub fn for_format(task_format: TaskFormat) -> Self {
        let (question, document) = match task_format {
            TaskFormat::SingleText | TaskFormat::Document => ("Topic?", Some("{text_a}")),
            TaskFormat::SentencePair => ("{text_a} Is {text_b}?", None),
            TaskFormat::RelationClassification => {
                ("{mention_1} to {mention_2}?", Some("{marked_text}"))
            }
            TaskFormat::EntityTyping => (
                "What is the type of the entity between the # marks?",
                Some("{marked_text}"),
            ),
        };
        Self {
            task_format,
            question_pattern: question.to_owned(),
            document_pattern: document.map(str::to_owned),
            field_delimiter: DEFAULT_DELIMITER.to_owned(),
            mention_markers: ("#".to_owned(), "*".to_owned()),
        }
    }
}

/// One answer option of a prompt.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Choice {
    pub letter: char,
    /// The dataset label this choice stands for.
    pub label: String,
    /// Surface form shown in the prompt (the label's verbalizer, if any).
    pub text: String,
}

/// Whether a prompt is for adapting the predictor or for scoring it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptSplit {
    Train,
    Test,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    pub episode_id: String,
    pub example_id: String,
    pub split: PromptSplit,
    pub rendered_text: String,
    pub choices: Vec<Choice>,
    /// Gold choice text, only present on training prompts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<String>,
}

fn episode_choices(episode: &Episode, spec: &DatasetSpec) -> Result<Vec<Choice>, PromptError> {
    if episode.label_set.len() > CHOICE_LETTERS.len() {
        return Err(PromptError::TooManyChoices {
            episode_id: episode.episode_id.clone(),
            count: episode.label_set.len(),
        });
    }
    Ok(episode
        .label_set
        .iter()
        .zip(CHOICE_LETTERS)
        .map(|(label, letter)| Choice {
            letter,
            label: label.clone(),
            text: spec.verbalize(label).to_owned(),
        })
        .collect())
}

/// Wraps mention spans of `text` in their markers.
fn mark_mentions(text: &str, spans: &[(usize, usize)], markers: &(String, String)) -> String {
    let mut out = String::with_capacity(text.len() + 4);
    let marker = |i: usize| if i == 0 { &markers.0 } else { &markers.1 };
    let chars: Vec<char> = text.chars().collect();
    for pos in 0..=chars.len() {
        // close before open so adjacent spans render as "#a#*b*"
        for (i, &(_, end)) in spans.iter().enumerate() {
            if end == pos {
                out.push_str(marker(i));
            }
        }
        for (i, &(start, _)) in spans.iter().enumerate() {
            if start == pos {
                out.push_str(marker(i));
            }
        }
        if let Some(c) = chars.get(pos) {
            out.push(*c);
        }
    }
    out
}

fn fill(pattern: &str, lookup: &dyn Fn(&str) -> Option<String>) -> Result<String, PromptError> {
    let mut out = String::with_capacity(pattern.len());
    let mut rest = pattern;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) => {
                let name = &after[..close];
                out.push_str(
                    &lookup(name)
                        .ok_or_else(|| PromptError::UnknownPlaceholder(name.to_owned()))?,
                );
                rest = &after[close + 1..];
            }
            None => {
                out.push_str(&rest[open..]);
                rest = "";
            }
        }
    }
    out.push_str(rest);
    Ok(out)
}

/// Renders one example of `episode` as a multiple-choice prompt.
pub fn build_prompt(
    template: &PromptTemplate,
    episode: &Episode,
    spec: &DatasetSpec,
    example: &LabeledExample,
    split: PromptSplit,
) -> Result<Prompt, PromptError> {
    if template.task_format != spec.task_format {
        return Err(PromptError::FormatMismatch {
            example_id: example.example_id.clone(),
            expected: template.task_format,
            found: spec.task_format,
        });
    }
    let spans: &[(usize, usize)] = example.mention_spans.as_deref().unwrap_or(&[]);
    if let Some(needed) = spec.task_format.required_spans() {
        if spans.len() < needed {
            return Err(PromptError::MissingSpans {
                example_id: example.example_id.clone(),
                format: spec.task_format,
                needed,
            });
        }
    }
    if spec.task_format == TaskFormat::SentencePair && example.text_b.is_none() {
        return Err(PromptError::MissingTextB {
            example_id: example.example_id.clone(),
        });
    }

    let choices = episode_choices(episode, spec)?;
    let lookup = |name: &str| match name {
        "text_a" => Some(example.text_a.clone()),
        "text_b" => example.text_b.clone(),
        "mention_1" => example.mention(0),
        "mention_2" => example.mention(1),
        "marked_text" => Some(mark_mentions(
            &example.text_a,
            spans,
            &template.mention_markers,
        )),
        _ => None,
    };
    let choice_list = choices
        .iter()
        .map(|c| format!("({}) {}", c.letter, c.text))
        .collect::<Vec<_>>()
        .join(" ");
    let mut segments = vec![fill(&template.question_pattern, &lookup)?, choice_list];
    if let Some(doc) = &template.document_pattern {
        segments.push(fill(doc, &lookup)?);
    }
    let separator = format!(" {} ", template.field_delimiter);
    let answer = match split {
        PromptSplit::Train => Some(spec.verbalize(&example.label).to_owned()),
        PromptSplit::Test => None,
    };
    Ok(Prompt {
        episode_id: episode.episode_id.clone(),
        example_id: example.example_id.clone(),
        split,
        rendered_text: segments.join(&separator),
        choices,
        answer,
    })
}

/// Training prompts followed by test prompts, each in episode order.
pub fn episode_prompts(
    template: &PromptTemplate,
    episode: &Episode,
    spec: &DatasetSpec,
    index: &ExampleIndex<'_>,
) -> Result<Vec<Prompt>, PromptError> {
    let render = |id: &String, split| {
        let example =
            index
                .get(&episode.dataset_id, id)
                .ok_or_else(|| PromptError::UnknownExample {
                    episode_id: episode.episode_id.clone(),
                    example_id: id.clone(),
                })?;
        build_prompt(template, episode, spec, example, split)
    };
    episode
        .train_example_ids
        .iter()
        .map(|id| render(id, PromptSplit::Train))
        .chain(
            episode
                .test_example_ids
                .iter()
                .map(|id| render(id, PromptSplit::Test)),
        )
        .collect()
}

/// Lowercases, turns punctuation and symbols into spaces and collapses runs
/// of whitespace.
fn simplify(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect::<String>()
        .to_lowercase()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

fn letter_answer(generated: &str) -> Option<char> {
    let t = generated.trim();
    let mut chars = t.chars();
    let first = chars.next()?;
    let second = chars.next();
    let third = chars.clone().next();
    let letter = match (first, second, third) {
        ('(', Some(l), Some(')')) if l.is_ascii_alphabetic() => l.to_ascii_uppercase(),
        (l, Some(')'), _) if l.is_ascii_alphabetic() => l.to_ascii_uppercase(),
        _ => {
            let bare = t.trim_end_matches(|c: char| !c.is_alphanumeric());
            let mut it = bare.chars();
            match (it.next(), it.next()) {
                (Some(l), None) if l.is_ascii_uppercase() => l,
                _ => return None,
            }
        }
    };
    Some(letter)
}

/// Maps free-form generated text onto one of `choices`, returning its label.
///
/// Rules, first hit wins: (1) the simplified answer equals a choice's text or
/// label; (2) the answer is a choice letter, as `(B)`, `B)` or a bare `B`;
/// (3) the earliest whole-word occurrence of a choice text or label, the
/// longest winning at equal positions; (4) the choice sharing the most words
/// with the answer, earlier choices winning ties.
///
/// # Panics
///
/// If `choices` is empty.
pub fn normalize_answer(generated: &str, choices: &[Choice]) -> String {
    assert!(
        !choices.is_empty(),
        "normalize_answer needs at least one choice"
    );
    let answer = simplify(generated);
    let forms: Vec<(usize, String)> = choices
        .iter()
        .enumerate()
        .flat_map(|(i, c)| [(i, simplify(&c.text)), (i, simplify(&c.label))])
        .filter(|(_, f)| !f.is_empty())
        .collect();

    if let Some((i, _)) = forms.iter().find(|(_, f)| *f == answer) {
        return choices[*i].label.clone();
    }

    if let Some(letter) = letter_answer(generated) {
        if let Some(c) = choices.iter().find(|c| c.letter == letter) {
            return c.label.clone();
        }
    }

    let padded = format!(" {answer} ");
    let earliest = forms
        .iter()
        .filter_map(|(i, f)| padded.find(&format!(" {f} ")).map(|pos| (pos, f.len(), *i)))
        .min_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)).then(a.2.cmp(&b.2)));
    if let Some((_, _, i)) = earliest {
        return choices[i].label.clone();
    }

    let words: HashSet<&str> = answer.split(' ').collect();
    let mut best = (0usize, 0usize);
    for (i, c) in choices.iter().enumerate() {
        let text = simplify(&c.text);
        let label = simplify(&c.label);
        let tokens: HashSet<&str> = text
            .split(' ')
            .chain(label.split(' '))
            .filter(|t| !t.is_empty())
            .collect();
        let overlap = tokens.iter().filter(|t| words.contains(*t)).count();
        if overlap > best.1 {
            best = (i, overlap);
        }
    }
    choices[best.0].label.clone()
}
