//! HTTP client for an external inference service.
//!
//! Protocol: `POST {endpoint}/v1/predict` with `{"prompts": [...]}`; the
//! service answers `200` with `{"answers": [...]}`, one string per prompt.
//! Any other status, a transport error or an unparsable body counts as a
//! transport failure and the batch is retried.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{normalize_answer, Prompt};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub batch_size: usize,
    pub timeout_secs: u64,
    /// Extra attempts per batch after the first failure.
    pub retries: u32,
    /// Batches in flight at once.
    pub concurrency: usize,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        Self {
            endpoint: "http://127.0.0.1:8000".into(),
            batch_size: 32,
            timeout_secs: 60,
            retries: 3,
            concurrency: 4,
        }
    }
}

type BatchResult = Result<Vec<String>, RemoteError>;

#[derive(Debug, Error)]
pub enum RemoteError {
    #[error("batch {batch} (prompts {start}..{end}): transport failed after {attempts} attempt(s): {message}")]
    Transport {
        batch: usize,
        start: usize,
        end: usize,
        attempts: u32,
        message: String,
    },
    #[error(
        "batch {batch} (prompts {start}..{end}): sent {sent} prompts, received {received} answers"
    )]
    CountMismatch {
        batch: usize,
        start: usize,
        end: usize,
        sent: usize,
        received: usize,
    },
    #[error("invalid remote configuration: {0}")]
    Config(String),
}

#[derive(Serialize)]
struct PredictRequest<'a> {
    prompts: Vec<&'a str>,
}

#[derive(Deserialize)]
struct PredictResponse {
    answers: Vec<String>,
}

enum Attempt {
    Done(Vec<String>),
    Transport(String),
}

fn send(agent: &ureq::Agent, url: &str, prompts: &[Prompt]) -> Attempt {
    let body = PredictRequest {
        prompts: prompts.iter().map(|p| p.rendered_text.as_str()).collect(),
    };
    let mut response = match agent.post(url).send_json(&body) {
        Ok(r) => r,
        Err(e) => return Attempt::Transport(e.to_string()),
    };
    if response.status() != 200 {
        return Attempt::Transport(format!("HTTP status {}", response.status()));
    }
    match response.body_mut().read_json::<PredictResponse>() {
        Ok(r) => Attempt::Done(r.answers),
        Err(e) => Attempt::Transport(format!("malformed response: {e}")),
    }
}

fn run_batch(
    agent: &ureq::Agent,
    url: &str,
    config: &RemoteConfig,
    batch: usize,
    prompts: &[Prompt],
) -> Result<Vec<String>, RemoteError> {
    let start = batch * config.batch_size;
    let end = start + prompts.len();
    let mut last = String::new();
    for attempt in 0..=config.retries {
        if attempt > 0 {
            thread::sleep(Duration::from_millis(100 << (attempt - 1).min(6)));
        }
        match send(agent, url, prompts) {
            Attempt::Done(answers) if answers.len() == prompts.len() => {
                return Ok(prompts
                    .iter()
                    .zip(&answers)
                    .map(|(p, a)| normalize_answer(a, &p.choices))
                    .collect())
            }
            Attempt::Done(answers) => {
                return Err(RemoteError::CountMismatch {
                    batch,
                    start,
                    end,
                    sent: prompts.len(),
                    received: answers.len(),
                })
            }
            Attempt::Transport(message) => last = message,
        }
    }
    Err(RemoteError::Transport {
        batch,
        start,
        end,
        attempts: config.retries + 1,
        message: last,
    })
}

/// Sends `prompts` to the service in batches and returns one normalized
/// label per prompt, in input order regardless of completion order.
pub fn predict_remote(
    prompts: &[Prompt],
    config: &RemoteConfig,
) -> Result<Vec<String>, RemoteError> {
    if config.batch_size == 0 || config.concurrency == 0 {
        return Err(RemoteError::Config(
            "batch_size and concurrency must be positive".into(),
        ));
    }
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
        .http_status_as_error(false)
        .build()
        .into();
    let url = format!("{}/v1/predict", config.endpoint.trim_end_matches('/'));
    let batches: Vec<&[Prompt]> = prompts.chunks(config.batch_size).collect();
    let results: Mutex<Vec<Option<BatchResult>>> =
        Mutex::new((0..batches.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);

    thread::scope(|scope| {
        for _ in 0..config.concurrency.min(batches.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(batch) = batches.get(i) else { break };
                let outcome = run_batch(&agent, &url, config, i, batch);
                let failed = outcome.is_err();
                results
                    .lock()
                    .expect("no worker panics while holding the lock")[i] = Some(outcome);
                if failed {
                    // stop handing out further batches
                    next.store(batches.len(), Ordering::SeqCst);
                }
            });
        }
    });

    let mut labels = Vec::with_capacity(prompts.len());
    for outcome in results
        .into_inner()
        .expect("workers finished")
        .into_iter()
        .flatten()
    {
        labels.extend(outcome?);
    }
    if labels.len() != prompts.len() {
        return Err(RemoteError::Config("not every batch was attempted".into()));
    }
    Ok(labels)
}
