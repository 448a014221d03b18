use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use fewshot_bench::corpus::{load_directory, DatasetSpec, LabeledExample};
use fewshot_bench::designer::{grid_search, select_configuration, write_csv};
use fewshot_bench::promptkit::{
    episode_prompts, majority_train, oracle, predict_remote, random_uniform, ExampleIndex, Prompt,
    PromptSplit, PromptTemplate,
};
use fewshot_bench::sampler::{build_manifest, canonical_json, verify_manifest, BenchmarkManifest};
use fewshot_bench::stats::{build_report, compare_reports, PredictionSet, ScoreReport};
use serde::Serialize;
use serde_json::json;

use crate::config::{resolve, RunConfig};
use crate::error::CliError;
use crate::{BuildArgs, PredictArgs, PredictorArg};

pub struct Context {
    pub config: RunConfig,
    pub seed: u64,
    pub pretty: bool,
    pub argv: Vec<String>,
}

type Datasets = Vec<(DatasetSpec, Vec<LabeledExample>)>;

fn now_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

impl Context {
    fn log(&self, message: &str) {
        if self.config.verbosity > 0 {
            eprintln!("fewshot: {message}");
        }
    }

    fn print<T: Serialize>(&self, value: &T) {
        let text = if self.pretty {
            serde_json::to_string_pretty(value)
        } else {
            serde_json::to_string(value)
        };
        // a closed pipe (`| head`) is not an error worth reporting
        let _ = writeln!(
            std::io::stdout().lock(),
            "{}",
            text.expect("output serializes")
        );
    }

    fn data(&self, flag: Option<PathBuf>) -> Result<Datasets, CliError> {
        let dir = resolve(flag, &self.config.paths.data, "data")?;
        self.log(&format!("loading datasets from {}", dir.display()));
        let datasets = load_directory(&dir)?;
        if datasets.is_empty() {
            return Err(CliError::Usage(format!(
                "{}: no dataset specs found",
                dir.display()
            )));
        }
        Ok(datasets)
    }

    fn manifest(&self, flag: Option<PathBuf>) -> Result<BenchmarkManifest, CliError> {
        let path = resolve(flag, &self.config.paths.manifest, "manifest")?;
        let manifest = BenchmarkManifest::read(&path)?;
        manifest.ensure_checksum()?;
        Ok(manifest)
    }

    /// Writes a primary output, then its `<path>.meta.json` sidecar holding
    /// everything that is not reproducible (timestamps, invocation).
    fn write_output(&self, path: &Path, body: &[u8], started_ms: u128) -> Result<(), CliError> {
        let io = |source| CliError::Io {
            path: path.to_owned(),
            source,
        };
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(io)?;
        }
        fs::write(path, body).map_err(io)?;
        let mut sidecar = path.as_os_str().to_owned();
        sidecar.push(".meta.json");
        let meta = json!({
            "argv": self.argv,
            "tool_version": env!("CARGO_PKG_VERSION"),
            "started_unix_ms": started_ms as u64,
            "finished_unix_ms": now_ms() as u64,
        });
        let sidecar = PathBuf::from(sidecar);
        fs::write(
            &sidecar,
            serde_json::to_string_pretty(&meta).expect("meta serializes") + "\n",
        )
        .map_err(|source| CliError::Io {
            path: sidecar.clone(),
            source,
        })
    }
}

pub fn ingest(ctx: &Context, data: Option<PathBuf>) -> Result<(), CliError> {
    let datasets = ctx.data(data)?;
    let summary: Vec<_> = datasets
        .iter()
        .map(|(spec, rows)| {
            json!({
                "dataset_id": spec.dataset_id,
                "task_format": spec.task_format,
                "phase": spec.phase,
                "transfer_types": spec.transfer_types,
                "n_examples": rows.len(),
                "n_labels_test": spec.labels_test.len(),
            })
        })
        .collect();
    ctx.print(&json!({ "datasets": summary }));
    Ok(())
}

pub fn build(ctx: &Context, args: BuildArgs) -> Result<(), CliError> {
    let started = now_ms();
    let datasets = ctx.data(args.data)?;
    let out = resolve(args.out, &ctx.config.paths.manifest, "out")?;
    let mut sampling = ctx.config.sampling.clone();
    if let Some(n) = args.episodes {
        sampling.episodes_per_dataset = n;
    }
    if let Some(phase) = args.phase {
        sampling.phase = phase.into();
    }
    if args.unpaired {
        sampling.zero_shot_paired = false;
    }
    if args.no_zero_shot {
        sampling.zero_shot_views = false;
    }
    ctx.log(&format!(
        "sampling {} episodes per dataset",
        sampling.episodes_per_dataset
    ));
    let manifest = build_manifest(&datasets, &sampling)?;
    ctx.write_output(&out, manifest.to_jsonl().as_bytes(), started)?;
    ctx.print(&json!({
        "manifest": out,
        "checksum": manifest.checksum,
        "episodes": manifest.episodes.len(),
    }));
    Ok(())
}

pub fn verify(
    ctx: &Context,
    manifest: Option<PathBuf>,
    data: Option<PathBuf>,
) -> Result<(), CliError> {
    let path = resolve(manifest, &ctx.config.paths.manifest, "manifest")?;
    let manifest = BenchmarkManifest::read(&path)?;
    let datasets = ctx.data(data)?;
    let report = verify_manifest(&manifest, &datasets)?;
    ctx.print(&report);
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::VerifyFailed {
            failed: report.failures().count(),
            total: report.episodes.len(),
            checksum: if report.checksum_ok { "ok" } else { "mismatch" },
        })
    }
}

fn all_prompts(
    manifest: &BenchmarkManifest,
    index: &ExampleIndex<'_>,
    test_only: bool,
) -> Result<Vec<Prompt>, CliError> {
    let mut prompts = Vec::new();
    for episode in &manifest.episodes {
        let spec = index.spec(&episode.dataset_id).ok_or_else(|| {
            CliError::Usage(format!(
                "dataset {:?} of episode {} was not loaded",
                episode.dataset_id, episode.episode_id
            ))
        })?;
        let template = PromptTemplate::for_format(spec.task_format);
        prompts.extend(
            episode_prompts(&template, episode, spec, index)?
                .into_iter()
                .filter(|p| !test_only || p.split == PromptSplit::Test),
        );
    }
    Ok(prompts)
}

pub fn prompts(
    ctx: &Context,
    manifest: Option<PathBuf>,
    data: Option<PathBuf>,
    out: Option<PathBuf>,
    test_only: bool,
) -> Result<(), CliError> {
    let started = now_ms();
    let manifest = ctx.manifest(manifest)?;
    let datasets = ctx.data(data)?;
    let out = resolve(out, &ctx.config.paths.prompts, "out")?;
    let index = ExampleIndex::new(&datasets);
    let prompts = all_prompts(&manifest, &index, test_only)?;
    let mut body = String::new();
    for p in &prompts {
        body.push_str(&canonical_json(p));
        body.push('\n');
    }
    ctx.write_output(&out, body.as_bytes(), started)?;
    ctx.print(&json!({ "prompts": out, "count": prompts.len() }));
    Ok(())
}

pub fn predict(ctx: &Context, args: PredictArgs) -> Result<(), CliError> {
    let started = now_ms();
    let manifest = ctx.manifest(args.manifest)?;
    let out = resolve(args.out, &ctx.config.paths.predictions, "out")?;
    let tag = args.protocol_tag.into();
    let set = match args.predictor {
        PredictorArg::Random => random_uniform(&manifest, ctx.seed, tag),
        PredictorArg::Majority | PredictorArg::Oracle | PredictorArg::Remote => {
            let datasets = ctx.data(args.data)?;
            let index = ExampleIndex::new(&datasets);
            match args.predictor {
                PredictorArg::Majority => majority_train(&manifest, &index, ctx.seed, tag),
                PredictorArg::Oracle => oracle(&manifest, &index, tag),
                _ => {
                    let mut remote = ctx.config.remote.clone();
                    if let Some(v) = args.endpoint {
                        remote.endpoint = v;
                    }
                    if let Some(v) = args.batch_size {
                        remote.batch_size = v;
                    }
                    if let Some(v) = args.timeout_secs {
                        remote.timeout_secs = v;
                    }
                    if let Some(v) = args.retries {
                        remote.retries = v;
                    }
                    if let Some(v) = args.concurrency {
                        remote.concurrency = v;
                    }
                    let prompts = all_prompts(&manifest, &index, true)?;
                    ctx.log(&format!(
                        "sending {} prompts to {}",
                        prompts.len(),
                        remote.endpoint
                    ));
                    let labels = predict_remote(&prompts, &remote)?;
                    let mut set = PredictionSet::new(&manifest, tag);
                    let mut rest = labels.as_slice();
                    for episode in &manifest.episodes {
                        let (mine, tail) = rest.split_at(episode.test_example_ids.len());
                        set.entries
                            .insert(episode.episode_id.clone(), mine.to_vec());
                        rest = tail;
                    }
                    set
                }
            }
        }
    };
    ctx.write_output(&out, set.to_jsonl().as_bytes(), started)?;
    ctx.print(&json!({ "predictions": out, "episodes": set.entries.len() }));
    Ok(())
}

pub fn score(
    ctx: &Context,
    manifest: Option<PathBuf>,
    data: Option<PathBuf>,
    predictions: Option<PathBuf>,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let started = now_ms();
    let manifest = ctx.manifest(manifest)?;
    let predictions = resolve(predictions, &ctx.config.paths.predictions, "predictions")?;
    let predictions = PredictionSet::read(&predictions)?;
    let datasets = ctx.data(data)?;
    let out = resolve(out, &ctx.config.paths.report, "out")?;
    let report = build_report(&manifest, &predictions, &datasets, &ctx.config.stats)?;
    ctx.write_output(&out, (report.to_json() + "\n").as_bytes(), started)?;
    ctx.print(&json!({ "report": out, "overall": report.overall }));
    Ok(())
}

pub fn compare(ctx: &Context, a: &Path, b: &Path, out: Option<PathBuf>) -> Result<(), CliError> {
    let started = now_ms();
    let report = compare_reports(
        &ScoreReport::read(a)?,
        &ScoreReport::read(b)?,
        &ctx.config.stats,
    )?;
    match out {
        Some(out) => {
            ctx.write_output(&out, (report.to_json() + "\n").as_bytes(), started)?;
            ctx.print(&json!({ "comparison": out, "overall": report.overall }));
        }
        None => ctx.print(&report),
    }
    Ok(())
}

pub fn design(
    ctx: &Context,
    runs: Option<u32>,
    csv: Option<PathBuf>,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let started = now_ms();
    let mut designer = ctx.config.designer.clone();
    if let Some(runs) = runs {
        designer.sim.runs_per_config = runs;
    }
    ctx.log(&format!(
        "simulating {} runs per configuration",
        designer.sim.runs_per_config
    ));
    let grid = grid_search(&designer.sim, &designer.cost)?;
    if let Some(csv) = csv {
        let mut body = Vec::new();
        write_csv(&grid.rows, &mut body).map_err(|e| CliError::Io {
            path: csv.clone(),
            source: e.into(),
        })?;
        ctx.write_output(&csv, &body, started)?;
    }
    let recommendation = select_configuration(
        &grid.rows,
        designer.sim.stats.confidence_level,
        &designer.selection,
    );
    let body = json!({
        "recommendation": recommendation,
        "skipped": grid.skipped,
    });
    match out {
        Some(out) => {
            let text =
                serde_json::to_string_pretty(&body).expect("recommendation serializes") + "\n";
            ctx.write_output(&out, text.as_bytes(), started)?;
            ctx.print(&json!({ "recommendation": out, "recommended": recommendation.recommended }));
        }
        None => ctx.print(&body),
    }
    Ok(())
}
