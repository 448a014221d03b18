//! Few-shot text classification benchmarking.
//!
//! The pipeline is split across modules:
//!
//! * [`corpus`] loads dataset specs and labeled examples;
//! * [`sampler`] draws seeded episodes into a checksummed manifest;
//! * [`promptkit`] renders multiple-choice prompts and maps free-text
//!   answers back to labels;
//! * [`stats`] scores predictions and computes confidence intervals;
//! * [`designer`] simulates how benchmark size trades off against
//!   interval width for a GPU budget.
//!
//! ```
//! use fewshot_bench::corpus::load_directory;
//! use fewshot_bench::promptkit::{oracle, ExampleIndex};
//! use fewshot_bench::sampler::{build_manifest, SamplingConfig};
//! use fewshot_bench::stats::{build_report, ProtocolTag, StatsConfig};
//!
//! let data = load_directory(concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/toy").as_ref()).unwrap();
//! let sampling = SamplingConfig { episodes_per_dataset: 4, ..Default::default() };
//! let manifest = build_manifest(&data, &sampling).unwrap();
//! let preds = oracle(&manifest, &ExampleIndex::new(&data), ProtocolTag::PretrainingOnly);
//! let stats = StatsConfig { bootstrap_resamples: 500, ..Default::default() };
//! let report = build_report(&manifest, &preds, &data, &stats).unwrap();
//! assert_eq!(report.overall.few_shot.unwrap().mean, 1.0);
//! ```

pub mod corpus;
pub mod designer;
pub mod promptkit;
pub mod rng;
pub mod sampler;
pub mod stats;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/datasets.md")]
    mod datasets {}
    #[doc = include_str!("../../../book/src/episodes.md")]
    mod episodes {}
    #[doc = include_str!("../../../book/src/prompts.md")]
    mod prompts {}
    #[doc = include_str!("../../../book/src/scoring.md")]
    mod scoring {}
    #[doc = include_str!("../../../book/src/design.md")]
    mod design {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
