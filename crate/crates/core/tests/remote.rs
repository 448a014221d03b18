//! `predict_remote` against a throwaway HTTP server on localhost.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;

use fewshot_bench::promptkit::{
    predict_remote, Choice, Prompt, PromptSplit, RemoteConfig, RemoteError,
};
use serde_json::{json, Value};

type Handler = dyn Fn(&[String]) -> (u16, String) + Send + Sync;

struct MockServer {
    endpoint: String,
    requests: Arc<AtomicUsize>,
}

fn handle(stream: TcpStream, handler: Arc<Handler>, requests: Arc<AtomicUsize>) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut stream = stream;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line).unwrap_or(0) == 0 {
            return;
        }
        let mut length = 0;
        loop {
            let mut header = String::new();
            if reader.read_line(&mut header).unwrap_or(0) == 0 {
                return;
            }
            let header = header.trim_end();
            if header.is_empty() {
                break;
            }
            if let Some((name, value)) = header.split_once(':') {
                if name.eq_ignore_ascii_case("content-length") {
                    length = value.trim().parse().unwrap();
                }
            }
        }
        let mut body = vec![0; length];
        reader.read_exact(&mut body).unwrap();
        requests.fetch_add(1, Ordering::SeqCst);
        let request: Value = serde_json::from_slice(&body).unwrap();
        let prompts: Vec<String> = request["prompts"]
            .as_array()
            .unwrap()
            .iter()
            .map(|p| p.as_str().unwrap().to_owned())
            .collect();
        let (status, reply) = handler(&prompts);
        let head = format!(
            "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n",
            reply.len()
        );
        if stream.write_all(head.as_bytes()).is_err() || stream.write_all(reply.as_bytes()).is_err()
        {
            return;
        }
    }
}

fn serve(handler: impl Fn(&[String]) -> (u16, String) + Send + Sync + 'static) -> MockServer {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let endpoint = format!("http://{}", listener.local_addr().unwrap());
    let handler: Arc<Handler> = Arc::new(handler);
    let requests = Arc::new(AtomicUsize::new(0));
    let counter = requests.clone();
    thread::spawn(move || {
        for stream in listener.incoming().flatten() {
            let (h, c) = (handler.clone(), counter.clone());
            thread::spawn(move || handle(stream, h, c));
        }
    });
    MockServer { endpoint, requests }
}

fn prompt(i: usize) -> Prompt {
    let labels = ["entailment", "contradiction", "neutral"];
    let texts = ["Yes", "No", "Maybe"];
    // rotate so the first choice differs between prompts
    let choices: Vec<Choice> = (0..3)
        .map(|j| {
            let k = (i + j) % 3;
            Choice {
                letter: ['A', 'B', 'C'][j],
                label: labels[k].into(),
                text: texts[k].into(),
            }
        })
        .collect();
    let rendered = format!(
        "premise {i} Is hypothesis? \\n {}",
        choices
            .iter()
            .map(|c| format!("({}) {}", c.letter, c.text))
            .collect::<Vec<_>>()
            .join(" ")
    );
    Prompt {
        episode_id: "toy/0000/few".into(),
        example_id: format!("ex-{i}"),
        split: PromptSplit::Test,
        rendered_text: rendered,
        choices,
        answer: None,
    }
}

fn config(endpoint: &str) -> RemoteConfig {
    RemoteConfig {
        endpoint: endpoint.into(),
        batch_size: 4,
        timeout_secs: 5,
        retries: 2,
        concurrency: 3,
    }
}

fn first_choice_text(rendered: &str) -> String {
    let after = rendered.split("(A) ").nth(1).unwrap();
    after.split(" (B)").next().unwrap().to_owned()
}

#[test]
fn echoing_first_choice_yields_first_labels_in_order() {
    let server = serve(|prompts| {
        let answers: Vec<String> = prompts.iter().map(|p| first_choice_text(p)).collect();
        (200, json!({ "answers": answers }).to_string())
    });
    let prompts: Vec<Prompt> = (0..19).map(prompt).collect();
    let labels = predict_remote(&prompts, &config(&server.endpoint)).unwrap();
    let expected: Vec<String> = prompts.iter().map(|p| p.choices[0].label.clone()).collect();
    assert_eq!(labels, expected);
    assert_eq!(server.requests.load(Ordering::SeqCst), 5);
}

#[test]
fn fewer_answers_is_a_count_mismatch_naming_the_batch() {
    let server = serve(|prompts| {
        let n = if prompts[0].starts_with("premise 4 ") {
            prompts.len() - 1
        } else {
            prompts.len()
        };
        (200, json!({ "answers": vec!["Yes"; n] }).to_string())
    });
    let prompts: Vec<Prompt> = (0..12).map(prompt).collect();
    match predict_remote(&prompts, &config(&server.endpoint)) {
        Err(RemoteError::CountMismatch {
            batch,
            start,
            end,
            sent,
            received,
        }) => assert_eq!((batch, start, end, sent, received), (1, 4, 8, 4, 3)),
        other => panic!("expected a count mismatch, got {other:?}"),
    }
}

#[test]
fn free_form_answers_still_map_to_valid_labels() {
    let replies = [
        "Yes, Yes, No",
        "",
        "probably (C)",
        "I think maybe",
        "???",
        "no no no",
        "B)",
    ];
    let server = serve(move |prompts| {
        let answers: Vec<&str> = (0..prompts.len())
            .map(|i| replies[i % replies.len()])
            .collect();
        (200, json!({ "answers": answers }).to_string())
    });
    let prompts: Vec<Prompt> = (0..30).map(prompt).collect();
    let labels = predict_remote(&prompts, &config(&server.endpoint)).unwrap();
    for (p, l) in prompts.iter().zip(&labels) {
        assert!(
            p.choices.iter().any(|c| &c.label == l),
            "{l} is not a choice"
        );
    }
    assert_eq!(labels[0], "entailment");
}

#[test]
fn transient_failures_are_retried() {
    let calls = Arc::new(AtomicUsize::new(0));
    let seen = calls.clone();
    let server = serve(move |prompts| {
        if seen.fetch_add(1, Ordering::SeqCst) < 2 {
            (503, "busy".into())
        } else {
            (
                200,
                json!({ "answers": vec!["(A)"; prompts.len()] }).to_string(),
            )
        }
    });
    let mut cfg = config(&server.endpoint);
    cfg.concurrency = 1;
    let prompts: Vec<Prompt> = (0..3).map(prompt).collect();
    let labels = predict_remote(&prompts, &cfg).unwrap();
    assert_eq!(labels.len(), 3);
    assert_eq!(server.requests.load(Ordering::SeqCst), 3);
}

#[test]
fn persistent_failure_reports_the_batch_after_all_attempts() {
    let server = serve(|_| (500, "{\"detail\": \"boom\"}".into()));
    let mut cfg = config(&server.endpoint);
    cfg.concurrency = 1;
    let prompts: Vec<Prompt> = (0..6).map(prompt).collect();
    let err = predict_remote(&prompts, &cfg).unwrap_err();
    match &err {
        RemoteError::Transport {
            batch,
            attempts,
            message,
            ..
        } => {
            assert_eq!(*batch, 0);
            assert_eq!(*attempts, 3);
            assert!(message.contains("500"));
        }
        other => panic!("expected transport error, got {other:?}"),
    }
    assert!(err.to_string().starts_with("batch 0 (prompts 0..4)"));
    assert_eq!(server.requests.load(Ordering::SeqCst), 3);
}

#[test]
fn malformed_json_is_a_transport_failure() {
    let server = serve(|_| (200, "not json".into()));
    let mut cfg = config(&server.endpoint);
    cfg.retries = 0;
    let err = predict_remote(&[prompt(0)], &cfg).unwrap_err();
    assert!(
        matches!(err, RemoteError::Transport { attempts: 1, .. }),
        "{err}"
    );
}

#[test]
fn unreachable_endpoint_fails_cleanly() {
    let port = TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let mut cfg = config(&format!("http://127.0.0.1:{port}"));
    cfg.retries = 0;
    assert!(matches!(
        predict_remote(&[prompt(0)], &cfg),
        Err(RemoteError::Transport { .. })
    ));
}

#[test]
fn zero_batch_size_is_rejected() {
    let mut cfg = config("http://127.0.0.1:9");
    cfg.batch_size = 0;
    assert!(matches!(
        predict_remote(&[prompt(0)], &cfg),
        Err(RemoteError::Config(_))
    ));
}
