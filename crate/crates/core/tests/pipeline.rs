//! Manifest → predictions → report on the bundled toy datasets.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use fewshot_bench::corpus::{load_directory, CorpusError, DatasetSpec, LabeledExample};
use fewshot_bench::promptkit::{majority_train, oracle, random_uniform, ExampleIndex};
use fewshot_bench::sampler::{build_manifest, BenchmarkManifest, Episode, SamplingConfig, View};
use fewshot_bench::stats::{build_report, ProtocolTag, StatsConfig, StatsError};

type Datasets = Vec<(DatasetSpec, Vec<LabeledExample>)>;

fn toy() -> Datasets {
    load_directory(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/toy")).unwrap()
}

fn sampling(episodes: u32) -> SamplingConfig {
    SamplingConfig {
        global_seed: 11,
        episodes_per_dataset: episodes,
        ..Default::default()
    }
}

fn stats() -> StatsConfig {
    StatsConfig {
        bootstrap_resamples: 1000,
        ..Default::default()
    }
}

#[test]
fn toy_directory_loads_in_name_order() {
    let ids: Vec<String> = toy().into_iter().map(|(s, _)| s.dataset_id).collect();
    assert_eq!(
        ids,
        [
            "toy_entities",
            "toy_nli",
            "toy_relations",
            "toy_reviews",
            "toy_topics"
        ]
    );
}

#[test]
fn directory_without_data_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let src = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/toy/toy_nli.json");
    fs::copy(&src, dir.path().join("toy_nli.json")).unwrap();
    match load_directory(dir.path()) {
        Err(CorpusError::Io { path, .. }) => assert!(path.ends_with("toy_nli.jsonl")),
        other => panic!("expected io error, got {other:?}"),
    }
    fs::copy(
        src.with_extension("jsonl"),
        dir.path().join("toy_nli.jsonl"),
    )
    .unwrap();
    fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
    assert_eq!(load_directory(dir.path()).unwrap().len(), 1);
}

#[test]
fn oracle_report_is_exactly_one_with_zero_width() {
    let data = toy();
    let manifest = build_manifest(&data, &sampling(10)).unwrap();
    let index = ExampleIndex::new(&data);
    let report = build_report(
        &manifest,
        &oracle(&manifest, &index, ProtocolTag::PretrainingOnly),
        &data,
        &stats(),
    )
    .unwrap();
    assert!(report.per_episode.values().all(|&s| s == 1.0));
    let groups = std::iter::once(&report.overall)
        .chain(report.per_dataset.values())
        .chain(report.per_transfer_type.values());
    for views in groups {
        for g in [&views.few_shot, &views.zero_shot].into_iter().flatten() {
            assert_eq!((g.mean, g.stdev, g.ci_low, g.ci_up), (1.0, 0.0, 1.0, 1.0));
        }
    }
    assert_eq!(report.manifest_checksum, manifest.checksum);
}

#[test]
fn view_counts_add_up_to_the_manifest() {
    let data = toy();
    let manifest = build_manifest(&data, &sampling(8)).unwrap();
    let preds = random_uniform(&manifest, 1, ProtocolTag::MetaTrained);
    let report = build_report(&manifest, &preds, &data, &stats()).unwrap();
    let few = manifest
        .episodes
        .iter()
        .filter(|e| e.view() == View::FewShot)
        .count();
    let zero = manifest.episodes.len() - few;
    assert_eq!(report.overall.few_shot.as_ref().unwrap().n_episodes, few);
    assert_eq!(report.overall.zero_shot.as_ref().unwrap().n_episodes, zero);
    let per_dataset_few: usize = report
        .per_dataset
        .values()
        .map(|v| v.few_shot.as_ref().unwrap().n_episodes)
        .sum();
    assert_eq!(per_dataset_few, few);
    assert_eq!(report.per_episode.len(), manifest.episodes.len());
    assert_eq!(report.protocol_tag, ProtocolTag::MetaTrained);
}

#[test]
fn random_predictor_on_five_way_episodes_sits_at_chance() {
    let data: Datasets = toy()
        .into_iter()
        .filter(|(s, _)| s.dataset_id == "toy_relations")
        .collect();
    let manifest = build_manifest(&data, &sampling(90)).unwrap();
    assert!(manifest.episodes.iter().all(|e| e.way() == 5));
    let report = build_report(
        &manifest,
        &random_uniform(&manifest, 5, ProtocolTag::PretrainingOnly),
        &data,
        &stats(),
    )
    .unwrap();
    for g in [&report.overall.few_shot, &report.overall.zero_shot] {
        let g = g.as_ref().unwrap();
        assert!((g.mean - 0.2).abs() < 0.01, "mean {}", g.mean);
    }
}

#[test]
fn missing_episode_is_named_and_no_report_is_made() {
    let data = toy();
    let manifest = build_manifest(&data, &sampling(4)).unwrap();
    let mut preds = random_uniform(&manifest, 1, ProtocolTag::PretrainingOnly);
    let dropped = manifest.episodes[3].episode_id.clone();
    preds.entries.shift_remove(&dropped);
    match build_report(&manifest, &preds, &data, &stats()) {
        Err(StatsError::MissingEpisodes(ids)) => assert_eq!(ids, vec![dropped.clone()]),
        other => panic!("expected missing episodes, got {other:?}"),
    }
    let err = build_report(&manifest, &preds, &data, &stats()).unwrap_err();
    assert!(err.to_string().contains(&dropped));
}

#[test]
fn predictions_for_another_manifest_are_rejected() {
    let data = toy();
    let manifest = build_manifest(&data, &sampling(4)).unwrap();
    let other = build_manifest(
        &data,
        &SamplingConfig {
            global_seed: 12,
            ..sampling(4)
        },
    )
    .unwrap();
    let preds = random_uniform(&other, 1, ProtocolTag::PretrainingOnly);
    assert!(matches!(
        build_report(&manifest, &preds, &data, &stats()),
        Err(StatsError::ChecksumMismatch { .. })
    ));
}

#[test]
fn majority_beats_chance_when_train_and_test_share_the_dominant_label() {
    let data = toy();
    let (spec, rows) = data
        .iter()
        .find(|(s, _)| s.dataset_id == "toy_relations")
        .unwrap();
    let of = |label: &str, range: std::ops::Range<usize>| -> Vec<String> {
        range.map(|i| format!("{label}-{i:03}")).collect()
    };
    let mut train = of("born_in", 0..5);
    train.extend(of("spouse_of", 0..1));
    let mut test = of("born_in", 10..30);
    test.extend(of("spouse_of", 10..15));
    let episode = Episode {
        episode_id: "toy_relations/0000/few".into(),
        dataset_id: spec.dataset_id.clone(),
        index: 0,
        label_set: spec.labels_test.clone(),
        shots: BTreeMap::from([("born_in".into(), 5), ("spouse_of".into(), 1)]),
        train_example_ids: train,
        test_example_ids: test,
        is_zero_shot_view: false,
    };
    let manifest = BenchmarkManifest::new(SamplingConfig::default(), vec![episode]);
    let single = vec![(spec.clone(), rows.clone())];
    let index = ExampleIndex::new(&single);
    let preds = majority_train(&manifest, &index, 0, ProtocolTag::PretrainingOnly);
    assert!(preds.entries.values().flatten().all(|l| l == "born_in"));
    let report = build_report(&manifest, &preds, &single, &stats()).unwrap();
    let acc = report.per_episode["toy_relations/0000/few"];
    assert_eq!(acc, 20.0 / 25.0);
    assert!(acc >= 1.0 / 5.0);
}

#[test]
fn reference_predictors_are_deterministic_and_in_label_set() {
    let data = toy();
    let manifest = build_manifest(&data, &sampling(6)).unwrap();
    let index = ExampleIndex::new(&data);
    let a = random_uniform(&manifest, 9, ProtocolTag::PretrainingOnly);
    assert_eq!(
        a,
        random_uniform(&manifest, 9, ProtocolTag::PretrainingOnly)
    );
    assert_ne!(
        a,
        random_uniform(&manifest, 10, ProtocolTag::PretrainingOnly)
    );
    let m = majority_train(&manifest, &index, 9, ProtocolTag::PretrainingOnly);
    for set in [&a, &m] {
        for episode in &manifest.episodes {
            let preds = &set.entries[&episode.episode_id];
            assert_eq!(preds.len(), episode.test_example_ids.len());
            assert!(preds.iter().all(|p| episode.label_set.contains(p)));
        }
    }
    // zero-shot views have no training data, so majority falls back to uniform
    for episode in manifest.episodes.iter().filter(|e| e.is_zero_shot_view) {
        assert_eq!(
            m.entries[&episode.episode_id],
            a.entries[&episode.episode_id]
        );
    }
}

#[test]
fn prediction_file_round_trips() {
    let data = toy();
    let manifest = build_manifest(&data, &sampling(3)).unwrap();
    let preds = random_uniform(&manifest, 2, ProtocolTag::MetaTrained);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("preds.jsonl");
    preds.write(&path).unwrap();
    let back = fewshot_bench::stats::PredictionSet::read(&path).unwrap();
    assert_eq!(back, preds);
    assert_eq!(back.to_jsonl(), fs::read_to_string(&path).unwrap());
}
