//! Sample-size design under a compute budget.
//!
//! A budget `C` (GPU-hours for the whole benchmark, split evenly over
//! `n_datasets`) buys `n_episodes` episodes of mean test size `T` when
//!
//! ```text
//! C / n_datasets = n_episodes · ((c_few_episode + c_zero_episode)
//!                               + T · (c_few_instance + c_zero_instance))
//! ```
//!
//! For every feasible `(C, n_episodes, T)` the simulator draws latent episode
//! accuracies around a true accuracy `μ`, samples correct/incorrect outcomes,
//! builds a percentile-bootstrap interval over the episode accuracies and
//! records whether it covers `μ` and how wide it is. Repeating this over a
//! grid of `μ` gives coverage and width summaries per configuration, from
//! which [`select_configuration`] picks the budget past which extra compute
//! stops paying for itself.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Binomial, Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::derive_stream;
use crate::stats::{bootstrap_ci_with_rng, percentile, StatsConfig};

const SECONDS_PER_HOUR: f64 = 3600.0;

#[derive(Debug, Error)]
pub enum DesignError {
    #[error(
        "budget of {budget_gpu_hours} GPU-hours cannot cover {n_episodes} episodes; \
         at least {min_budget_gpu_hours:.4} GPU-hours are needed"
    )]
    Infeasible {
        budget_gpu_hours: f64,
        n_episodes: u32,
        min_budget_gpu_hours: f64,
    },
    #[error("invalid designer configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

/// Per-episode and per-test-instance costs in GPU-seconds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostModel {
    pub c_few_episode: f64,
    pub c_zero_episode: f64,
    pub c_few_instance: f64,
    pub c_zero_instance: f64,
    pub n_datasets: u32,
}

impl Default for CostModel {
    fn default() -> Self {
        Self {
            c_few_episode: 96.0,
            c_zero_episode: 2.0,
            c_few_instance: 0.09,
            c_zero_instance: 0.04,
            n_datasets: 12,
        }
    }
}

impl CostModel {
    pub fn validate(&self) -> Result<(), DesignError> {
        let costs = [
            self.c_few_episode,
            self.c_zero_episode,
            self.c_few_instance,
            self.c_zero_instance,
        ];
        if costs.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(DesignError::Config(
                "costs must be finite and non-negative".into(),
            ));
        }
        if self.c_few_episode <= 0.0 || self.c_zero_episode <= 0.0 {
            return Err(DesignError::Config(
                "per-episode costs must be positive".into(),
            ));
        }
        if self.instance_cost() <= 0.0 {
            return Err(DesignError::Config(
                "combined per-instance cost must be positive".into(),
            ));
        }
        if self.n_datasets == 0 {
            return Err(DesignError::Config("n_datasets must be positive".into()));
        }
        Ok(())
    }

    pub fn episode_cost(&self) -> f64 {
        self.c_few_episode + self.c_zero_episode
    }

    pub fn instance_cost(&self) -> f64 {
        self.c_few_instance + self.c_zero_instance
    }

    /// Whole-benchmark cost in GPU-hours of a configuration.
    pub fn budget_gpu_hours(&self, n_episodes: u32, mean_test_size: f64) -> f64 {
        let per_dataset =
            n_episodes as f64 * (self.episode_cost() + mean_test_size * self.instance_cost());
        per_dataset * self.n_datasets as f64 / SECONDS_PER_HOUR
    }
}

/// Solves the cost equation for the mean test-set size per episode.
///
/// A budget exactly equal to the per-episode overhead yields zero.
pub fn solve_mean_test_size(
    budget_gpu_hours: f64,
    n_episodes: u32,
    cost: &CostModel,
) -> Result<f64, DesignError> {
    cost.validate()?;
    if n_episodes == 0 {
        return Err(DesignError::Config("n_episodes must be positive".into()));
    }
    let per_episode =
        budget_gpu_hours * SECONDS_PER_HOUR / (cost.n_datasets as f64 * n_episodes as f64);
    let spare = per_episode - cost.episode_cost();
    if spare < 0.0 {
        return Err(DesignError::Infeasible {
            budget_gpu_hours,
            n_episodes,
            min_budget_gpu_hours: cost.budget_gpu_hours(n_episodes, 0.0),
        });
    }
    Ok(spare / cost.instance_cost())
}

/// Simulation grid and Monte-Carlo settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub budgets_gpu_hours: Vec<f64>,
    pub episode_grid: Vec<u32>,
    pub sigma_acc: f64,
    pub mu_acc_grid: Vec<f64>,
    pub runs_per_config: u32,
    /// Interval settings for each simulated run.
    pub stats: StatsConfig,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            budgets_gpu_hours: (0..6).map(|i| 24.0 + 12.0 * i as f64).collect(),
            episode_grid: std::iter::once(5).chain((1..=10).map(|i| 15 * i)).collect(),
            sigma_acc: 0.05,
            mu_acc_grid: (0..14).map(|i| (30 + 5 * i) as f64 / 100.0).collect(),
            runs_per_config: 1000,
            stats: StatsConfig::default(),
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), DesignError> {
        self.stats
            .validate()
            .map_err(|e| DesignError::Config(e.to_string()))?;
        if !(self.sigma_acc.is_finite() && self.sigma_acc >= 0.0) {
            return Err(DesignError::Config("sigma_acc must be non-negative".into()));
        }
        if let Some(mu) = self.mu_acc_grid.iter().find(|m| !(**m > 0.0 && **m < 1.0)) {
            return Err(DesignError::Config(format!(
                "mu_acc {mu} is outside (0, 1)"
            )));
        }
        if self.budgets_gpu_hours.is_empty()
            || self.episode_grid.is_empty()
            || self.mu_acc_grid.is_empty()
        {
            return Err(DesignError::Config("grids must be nonempty".into()));
        }
        if self.episode_grid.iter().any(|&n| n < 2) {
            return Err(DesignError::Config(
                "episode counts must be at least 2".into(),
            ));
        }
        if self.runs_per_config == 0 {
            return Err(DesignError::Config(
                "runs_per_config must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Configuration-selection thresholds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionConfig {
    /// Maximum distance between simulated coverage and the confidence level.
    pub coverage_tolerance: f64,
    /// Relative width reduction below which a budget increase is not worth it.
    pub marginal_threshold: f64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            coverage_tolerance: 0.01,
            marginal_threshold: 0.10,
        }
    }
}

/// Everything `design` needs, as read from a JSON config file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DesignerConfig {
    pub sim: SimConfig,
    pub cost: CostModel,
    pub selection: SelectionConfig,
}

impl DesignerConfig {
    pub fn read(path: &Path) -> Result<Self, DesignError> {
        let text = fs::read_to_string(path).map_err(|source| DesignError::Io {
            path: path.to_owned(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| DesignError::Parse {
            path: path.to_owned(),
            message: e.to_string(),
        })
    }
}

/// One simulated benchmark submission.
///
/// Latent episode accuracies are drawn from `Normal(mu_acc, sigma_acc²)` and
/// clamped to `[0, 1]`; each episode then gets `⌊mean_test_size⌋` Bernoulli
/// outcomes. Returns whether the bootstrap interval over episode accuracies
/// contains `mu_acc`, and its width.
pub fn simulate_run<R: Rng + ?Sized>(
    rng: &mut R,
    n_episodes: u32,
    mean_test_size: f64,
    mu_acc: f64,
    sigma_acc: f64,
    stats: &StatsConfig,
) -> Result<(bool, f64), DesignError> {
    if n_episodes < 2 {
        return Err(DesignError::Config(
            "a run needs at least 2 episodes".into(),
        ));
    }
    if mean_test_size.is_nan() || mean_test_size < 1.0 {
        return Err(DesignError::Config(format!(
            "mean test size {mean_test_size} is below one example"
        )));
    }
    if !(0.0..=1.0).contains(&mu_acc) {
        return Err(DesignError::Config(format!(
            "mu_acc {mu_acc} is outside [0, 1]"
        )));
    }
    let latent = Normal::new(mu_acc, sigma_acc)
        .map_err(|e| DesignError::Config(format!("latent accuracy distribution: {e}")))?;
    let size = mean_test_size.floor() as u64;
    let accuracies: Vec<f64> = (0..n_episodes)
        .map(|_| {
            let p = latent.sample(rng).clamp(0.0, 1.0);
            let correct = Binomial::new(size, p).expect("p within [0, 1]").sample(rng);
            correct as f64 / size as f64
        })
        .collect();
    let (low, up) = bootstrap_ci_with_rng(
        &accuracies,
        stats.confidence_level,
        stats.bootstrap_resamples,
        rng,
    )
    .expect("at least two accuracies");
    Ok((low <= mu_acc && mu_acc <= up, up - low))
}

/// Coverage and width at one true accuracy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MuSummary {
    pub mu_acc: f64,
    pub coverage: f64,
    pub mean_width: f64,
}

/// Simulation summary of one `(budget, n_episodes, mean_test_size)`.
///
/// Aggregates are taken across the `μ` grid: means plus 10th and 90th
/// percentiles of the per-`μ` values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimRow {
    pub budget_gpu_hours: f64,
    pub n_episodes: u32,
    pub mean_test_size: f64,
    pub coverage_probability: f64,
    pub coverage_p10: f64,
    pub coverage_p90: f64,
    pub mean_ci_width: f64,
    pub width_p10: f64,
    pub width_p90: f64,
    pub per_mu: Vec<MuSummary>,
}

fn run_stream_scope(budget_gpu_hours: f64, n_episodes: u32, mu_acc: f64) -> String {
    format!("designer/{budget_gpu_hours}/{n_episodes}/{mu_acc}")
}

fn simulate_mu(
    config: &SimConfig,
    budget_gpu_hours: f64,
    n_episodes: u32,
    mean_test_size: f64,
    mu_acc: f64,
) -> Result<MuSummary, DesignError> {
    let scope = run_stream_scope(budget_gpu_hours, n_episodes, mu_acc);
    let mut covered = 0u32;
    let mut width_sum = 0.0;
    for run in 0..config.runs_per_config {
        let mut rng = derive_stream(config.seed, &scope, run as u64, "run");
        let (c, w) = simulate_run(
            &mut rng,
            n_episodes,
            mean_test_size,
            mu_acc,
            config.sigma_acc,
            &config.stats,
        )?;
        covered += c as u32;
        width_sum += w;
    }
    let runs = config.runs_per_config as f64;
    Ok(MuSummary {
        mu_acc,
        coverage: covered as f64 / runs,
        mean_width: width_sum / runs,
    })
}

fn summarize_row(
    budget_gpu_hours: f64,
    n_episodes: u32,
    mean_test_size: f64,
    per_mu: Vec<MuSummary>,
) -> SimRow {
    let spread = |values: Vec<f64>| {
        let mut sorted = values;
        sorted.sort_unstable_by(f64::total_cmp);
        let mean = sorted.iter().sum::<f64>() / sorted.len() as f64;
        (mean, percentile(&sorted, 0.1), percentile(&sorted, 0.9))
    };
    let (coverage_probability, coverage_p10, coverage_p90) =
        spread(per_mu.iter().map(|m| m.coverage).collect());
    let (mean_ci_width, width_p10, width_p90) =
        spread(per_mu.iter().map(|m| m.mean_width).collect());
    SimRow {
        budget_gpu_hours,
        n_episodes,
        mean_test_size,
        coverage_probability,
        coverage_p10,
        coverage_p90,
        mean_ci_width,
        width_p10,
        width_p90,
        per_mu,
    }
}

/// Simulates one configuration over the whole `μ` grid.
pub fn simulate_config(
    config: &SimConfig,
    cost: &CostModel,
    budget_gpu_hours: f64,
    n_episodes: u32,
) -> Result<SimRow, DesignError> {
    config.validate()?;
    let mean_test_size = solve_mean_test_size(budget_gpu_hours, n_episodes, cost)?;
    let per_mu = config
        .mu_acc_grid
        .par_iter()
        .map(|&mu| simulate_mu(config, budget_gpu_hours, n_episodes, mean_test_size, mu))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(summarize_row(
        budget_gpu_hours,
        n_episodes,
        mean_test_size,
        per_mu,
    ))
}

/// A grid point that the budget cannot pay for (or that leaves less than
/// one test example per episode).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkippedConfig {
    pub budget_gpu_hours: f64,
    pub n_episodes: u32,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub rows: Vec<SimRow>,
    pub skipped: Vec<SkippedConfig>,
}

/// Simulates every feasible `(budget, n_episodes)` pair.
///
/// Rows are ordered by budget, then episode count. Each run draws from a
/// stream derived from the seed and its `(budget, n_episodes, μ, run)`
/// coordinates, so the table does not depend on thread count.
pub fn grid_search(config: &SimConfig, cost: &CostModel) -> Result<GridResult, DesignError> {
    config.validate()?;
    cost.validate()?;
    let mut budgets = config.budgets_gpu_hours.clone();
    budgets.sort_by(f64::total_cmp);
    budgets.dedup();
    let mut episodes = config.episode_grid.clone();
    episodes.sort_unstable();
    episodes.dedup();

    let mut feasible = Vec::new();
    let mut skipped = Vec::new();
    for &budget in &budgets {
        for &n in &episodes {
            match solve_mean_test_size(budget, n, cost) {
                Ok(t) if t >= 1.0 => feasible.push((budget, n, t)),
                Ok(t) => skipped.push(SkippedConfig {
                    budget_gpu_hours: budget,
                    n_episodes: n,
                    reason: format!("mean test size {t:.3} is below one example"),
                }),
                Err(e @ DesignError::Infeasible { .. }) => skipped.push(SkippedConfig {
                    budget_gpu_hours: budget,
                    n_episodes: n,
                    reason: e.to_string(),
                }),
                Err(e) => return Err(e),
            }
        }
    }

    let cells: Vec<(usize, f64)> = (0..feasible.len())
        .flat_map(|i| config.mu_acc_grid.iter().map(move |&mu| (i, mu)))
        .collect();
    let summaries = cells
        .par_iter()
        .map(|&(i, mu)| {
            let (budget, n, t) = feasible[i];
            simulate_mu(config, budget, n, t, mu)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let per_row = config.mu_acc_grid.len();
    let rows = feasible
        .iter()
        .zip(summaries.chunks(per_row))
        .map(|(&(budget, n, t), chunk)| summarize_row(budget, n, t, chunk.to_vec()))
        .collect();
    Ok(GridResult { rows, skipped })
}

#[derive(Serialize)]
struct CsvRow {
    budget_gpu_hours: f64,
    n_episodes: u32,
    mean_test_size: f64,
    coverage_probability: f64,
    coverage_p10: f64,
    coverage_p90: f64,
    mean_ci_width: f64,
    width_p10: f64,
    width_p90: f64,
}

/// Writes one CSV line per simulated configuration.
pub fn write_csv<W: Write>(rows: &[SimRow], out: W) -> Result<(), csv::Error> {
    let mut writer = csv::Writer::from_writer(out);
    for r in rows {
        writer.serialize(CsvRow {
            budget_gpu_hours: r.budget_gpu_hours,
            n_episodes: r.n_episodes,
            mean_test_size: r.mean_test_size,
            coverage_probability: r.coverage_probability,
            coverage_p10: r.coverage_p10,
            coverage_p90: r.coverage_p90,
            mean_ci_width: r.mean_ci_width,
            width_p10: r.width_p10,
            width_p90: r.width_p90,
        })?;
    }
    writer.flush()?;
    Ok(())
}

/// The narrowest covered configuration of one budget.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetOptimum {
    pub budget_gpu_hours: f64,
    pub n_episodes: u32,
    pub mean_test_size: f64,
    pub coverage_probability: f64,
    pub mean_ci_width: f64,
}

/// Relative width reduction between two consecutive budget optima.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WidthReduction {
    pub from_budget_gpu_hours: f64,
    pub to_budget_gpu_hours: f64,
    pub relative_reduction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    /// Absent when no configuration passes the coverage filter.
    pub recommended: Option<BudgetOptimum>,
    pub optima: Vec<BudgetOptimum>,
    pub reductions: Vec<WidthReduction>,
    pub confidence_level: f64,
    pub coverage_tolerance: f64,
    pub marginal_threshold: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<String>,
}

/// Picks the budget after which another increment stops paying off.
///
/// Rows whose coverage is more than `coverage_tolerance` away from
/// `confidence_level` are discarded. Each budget's optimum is its
/// narrowest remaining row. Walking up the budgets, the first one whose
/// next increment narrows the interval by less than `marginal_threshold`
/// (relative) is recommended; if every increment pays off, the largest
/// budget is.
pub fn select_configuration(
    rows: &[SimRow],
    confidence_level: f64,
    selection: &SelectionConfig,
) -> Recommendation {
    let mut optima: Vec<BudgetOptimum> = Vec::new();
    let mut covered: Vec<&SimRow> = rows
        .iter()
        .filter(|r| {
            (r.coverage_probability - confidence_level).abs() <= selection.coverage_tolerance
        })
        .collect();
    covered.sort_by(|a, b| {
        a.budget_gpu_hours
            .total_cmp(&b.budget_gpu_hours)
            .then(a.mean_ci_width.total_cmp(&b.mean_ci_width))
            .then(a.n_episodes.cmp(&b.n_episodes))
    });
    for r in covered {
        if optima.last().map(|o| o.budget_gpu_hours) != Some(r.budget_gpu_hours) {
            optima.push(BudgetOptimum {
                budget_gpu_hours: r.budget_gpu_hours,
                n_episodes: r.n_episodes,
                mean_test_size: r.mean_test_size,
                coverage_probability: r.coverage_probability,
                mean_ci_width: r.mean_ci_width,
            });
        }
    }

    let reductions: Vec<WidthReduction> = optima
        .windows(2)
        .map(|w| WidthReduction {
            from_budget_gpu_hours: w[0].budget_gpu_hours,
            to_budget_gpu_hours: w[1].budget_gpu_hours,
            relative_reduction: if w[0].mean_ci_width > 0.0 {
                (w[0].mean_ci_width - w[1].mean_ci_width) / w[0].mean_ci_width
            } else {
                0.0
            },
        })
        .collect();

    let recommended = reductions
        .iter()
        .position(|r| r.relative_reduction < selection.marginal_threshold)
        .map(|i| optima[i].clone())
        .or_else(|| optima.last().cloned());
    let diagnostics = if recommended.is_none() {
        let closest = rows.iter().min_by(|a, b| {
            (a.coverage_probability - confidence_level)
                .abs()
                .total_cmp(&(b.coverage_probability - confidence_level).abs())
        });
        Some(match closest {
            Some(r) => format!(
                "no configuration has coverage within {} of {}; closest is {} GPU-hours with {} episodes at {:.4}",
                selection.coverage_tolerance,
                confidence_level,
                r.budget_gpu_hours,
                r.n_episodes,
                r.coverage_probability
            ),
            None => "no simulated configurations".to_owned(),
        })
    } else {
        None
    };

    Recommendation {
        recommended,
        optima,
        reductions,
        confidence_level,
        coverage_tolerance: selection.coverage_tolerance,
        marginal_threshold: selection.marginal_threshold,
        diagnostics,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn small_sim(runs: u32) -> SimConfig {
        SimConfig {
            runs_per_config: runs,
            stats: StatsConfig {
                bootstrap_resamples: 300,
                ..StatsConfig::default()
            },
            ..SimConfig::default()
        }
    }

    #[test]
    fn default_grids() {
        let c = SimConfig::default();
        assert_eq!(c.budgets_gpu_hours, [24.0, 36.0, 48.0, 60.0, 72.0, 84.0]);
        assert_eq!(
            c.episode_grid,
            [5, 15, 30, 45, 60, 75, 90, 105, 120, 135, 150]
        );
        assert_eq!(c.mu_acc_grid.len(), 14);
        assert_eq!(c.mu_acc_grid[0], 0.3);
        assert_eq!(c.mu_acc_grid[13], 0.95);
        assert_eq!(CostModel::default().episode_cost(), 98.0);
        assert!((CostModel::default().instance_cost() - 0.13).abs() < 1e-15);
    }

    #[test]
    fn test_size_at_reference_budget() {
        let t = solve_mean_test_size(48.0, 90, &CostModel::default()).unwrap();
        let by_hand = (172800.0 / 1080.0 - 98.0) / 0.13;
        assert!((t - by_hand).abs() < 1e-9);
        assert!((t - 476.923).abs() < 1e-3);
    }

    #[test]
    fn doubling_instance_cost_halves_test_size() {
        let base = CostModel::default();
        let doubled = CostModel {
            c_few_instance: 2.0 * base.c_few_instance,
            c_zero_instance: 2.0 * base.c_zero_instance,
            ..base.clone()
        };
        let a = solve_mean_test_size(60.0, 45, &base).unwrap();
        let b = solve_mean_test_size(60.0, 45, &doubled).unwrap();
        assert!((a / 2.0 - b).abs() < 1e-9 * a);
    }

    #[test]
    fn budget_at_overhead_is_zero_and_below_is_infeasible() {
        let cost = CostModel::default();
        // 90 episodes × 98 s × 12 datasets = 29.4 GPU-hours
        let overhead = cost.budget_gpu_hours(90, 0.0);
        assert!((overhead - 29.4).abs() < 1e-12);
        assert_eq!(solve_mean_test_size(overhead, 90, &cost).unwrap(), 0.0);
        match solve_mean_test_size(24.0, 90, &cost) {
            Err(DesignError::Infeasible {
                min_budget_gpu_hours,
                ..
            }) => {
                assert!((min_budget_gpu_hours - 29.4).abs() < 1e-12)
            }
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn solved_size_reproduces_budget(budget in 1.0f64..500.0, n in 1u32..400) {
            let cost = CostModel::default();
            if let Ok(t) = solve_mean_test_size(budget, n, &cost) {
                let back = cost.budget_gpu_hours(n, t);
                prop_assert!(((back - budget) / budget).abs() < 1e-9);
            }
        }

        #[test]
        fn more_episodes_means_smaller_tests(budget in 30.0f64..100.0, n in 2u32..100) {
            let cost = CostModel::default();
            if let (Ok(a), Ok(b)) = (
                solve_mean_test_size(budget, n, &cost),
                solve_mean_test_size(budget, n + 1, &cost),
            ) {
                prop_assert!(b < a);
            }
        }
    }

    #[test]
    fn perfect_model_is_always_covered() {
        let mut rng = derive_stream(1, "t", 0, "run");
        let (covered, width) =
            simulate_run(&mut rng, 90, 470.0, 1.0, 0.0, &StatsConfig::default()).unwrap();
        assert!(covered);
        assert_eq!(width, 0.0);
    }

    #[test]
    fn huge_test_sets_give_narrow_intervals() {
        // binomial variance 0.25/1e5 per episode; 2·1.96·√(2.5e-6/90) ≈ 6.5e-4
        let mut rng = derive_stream(1, "t", 0, "run");
        let (_, width) = simulate_run(&mut rng, 90, 1e5, 0.5, 0.0, &small_sim(1).stats).unwrap();
        assert!(width < 0.002, "width {width}");
    }

    #[test]
    fn runs_are_reproducible() {
        let stats = small_sim(1).stats;
        let a = simulate_run(
            &mut derive_stream(3, "s", 7, "run"),
            30,
            100.0,
            0.6,
            0.05,
            &stats,
        );
        let b = simulate_run(
            &mut derive_stream(3, "s", 7, "run"),
            30,
            100.0,
            0.6,
            0.05,
            &stats,
        );
        assert_eq!(a.unwrap(), b.unwrap());
    }

    #[test]
    fn run_preconditions() {
        let stats = StatsConfig::default();
        let mut rng = derive_stream(0, "", 0, "");
        assert!(simulate_run(&mut rng, 1, 10.0, 0.5, 0.05, &stats).is_err());
        assert!(simulate_run(&mut rng, 10, 0.5, 0.5, 0.05, &stats).is_err());
    }

    #[test]
    fn single_run_rows_are_well_formed() {
        let row = simulate_config(&small_sim(1), &CostModel::default(), 48.0, 90).unwrap();
        assert_eq!(row.per_mu.len(), 14);
        assert!(row
            .per_mu
            .iter()
            .all(|m| m.coverage == 0.0 || m.coverage == 1.0));
        assert!((0.0..=1.0).contains(&row.coverage_probability));
        assert!(row.coverage_p10 <= row.coverage_p90);
        assert!(row.width_p10 <= row.mean_ci_width && row.mean_ci_width <= row.width_p90);
    }

    #[test]
    fn width_shrinks_like_inverse_root_episodes() {
        // Fixed test size, fixed μ: fit log(width) against log(n).
        let stats = small_sim(1).stats;
        let ns = [30u32, 45, 60, 75, 90, 105, 120, 135, 150];
        let points: Vec<(f64, f64)> = ns
            .iter()
            .map(|&n| {
                let w: f64 = (0..200)
                    .map(|r| {
                        let mut rng = derive_stream(5, "scaling", (n as u64) << 32 | r, "run");
                        simulate_run(&mut rng, n, 470.0, 0.7, 0.05, &stats)
                            .unwrap()
                            .1
                    })
                    .sum::<f64>()
                    / 200.0;
                ((n as f64).ln(), w.ln())
            })
            .collect();
        let mx = points.iter().map(|p| p.0).sum::<f64>() / points.len() as f64;
        let my = points.iter().map(|p| p.1).sum::<f64>() / points.len() as f64;
        let slope = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
            / points.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
        assert!((-0.6..=-0.4).contains(&slope), "slope {slope}");
    }

    #[test]
    fn grid_cardinality_and_skips() {
        let cfg = SimConfig {
            runs_per_config: 1,
            mu_acc_grid: vec![0.5],
            ..small_sim(1)
        };
        let grid = grid_search(&cfg, &CostModel::default()).unwrap();
        assert_eq!(grid.rows.len() + grid.skipped.len(), 66);
        // a budget of B GPU-hours gives each dataset 300·B seconds, and every
        // episode needs 98 s plus at least one 0.13 s test instance
        let mut expected_skips = Vec::new();
        for b in [24.0, 36.0, 48.0, 60.0, 72.0, 84.0] {
            for n in cfg.episode_grid.iter().copied() {
                if 300.0 * b / (n as f64) < 98.13 {
                    expected_skips.push((b, n));
                }
            }
        }
        let skips: Vec<(f64, u32)> = grid
            .skipped
            .iter()
            .map(|s| (s.budget_gpu_hours, s.n_episodes))
            .collect();
        assert_eq!(skips, expected_skips);
        assert_eq!(skips.len(), 10);
        let keys: Vec<(f64, u32)> = grid
            .rows
            .iter()
            .map(|r| (r.budget_gpu_hours, r.n_episodes))
            .collect();
        let mut sorted = keys.clone();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        assert_eq!(keys, sorted);
    }

    #[test]
    fn single_point_grid_and_determinism() {
        let cfg = SimConfig {
            budgets_gpu_hours: vec![48.0],
            episode_grid: vec![90],
            mu_acc_grid: vec![0.4, 0.8],
            ..small_sim(20)
        };
        let a = grid_search(&cfg, &CostModel::default()).unwrap();
        assert_eq!(a.rows.len(), 1);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(3)
            .build()
            .unwrap();
        let b = pool.install(|| grid_search(&cfg, &CostModel::default()).unwrap());
        assert_eq!(a, b);
        // a row computed alone matches its grid counterpart
        let alone = simulate_config(&cfg, &CostModel::default(), 48.0, 90).unwrap();
        assert_eq!(alone, a.rows[0]);
    }

    fn row(budget: f64, n: u32, coverage: f64, width: f64) -> SimRow {
        SimRow {
            budget_gpu_hours: budget,
            n_episodes: n,
            mean_test_size: 100.0,
            coverage_probability: coverage,
            coverage_p10: coverage,
            coverage_p90: coverage,
            mean_ci_width: width,
            width_p10: width,
            width_p90: width,
            per_mu: vec![],
        }
    }

    #[test]
    fn selection_follows_marginal_rule() {
        let rows = vec![
            row(24.0, 5, 0.80, 0.02),
            row(36.0, 90, 0.95, 0.030),
            row(36.0, 105, 0.95, 0.031),
            row(48.0, 90, 0.951, 0.026),
            row(48.0, 5, 0.70, 0.010),
            row(60.0, 105, 0.949, 0.0237),
            row(72.0, 120, 0.95, 0.0220),
        ];
        let rec = select_configuration(&rows, 0.95, &SelectionConfig::default());
        let budgets: Vec<f64> = rec.optima.iter().map(|o| o.budget_gpu_hours).collect();
        assert_eq!(budgets, [36.0, 48.0, 60.0, 72.0]);
        assert!((rec.reductions[0].relative_reduction - 4.0 / 30.0).abs() < 1e-12);
        let chosen = rec.recommended.unwrap();
        assert_eq!((chosen.budget_gpu_hours, chosen.n_episodes), (48.0, 90));
    }

    #[test]
    fn flat_widths_recommend_smallest_covered_budget() {
        let rows = vec![
            row(24.0, 30, 0.90, 0.02),
            row(36.0, 60, 0.95, 0.02),
            row(48.0, 60, 0.95, 0.02),
        ];
        let rec = select_configuration(&rows, 0.95, &SelectionConfig::default());
        assert!(rec.reductions.iter().all(|r| r.relative_reduction == 0.0));
        assert_eq!(rec.recommended.unwrap().budget_gpu_hours, 36.0);
    }

    #[test]
    fn nothing_covered_yields_diagnostics() {
        let rows = vec![row(36.0, 5, 0.80, 0.05)];
        let rec = select_configuration(&rows, 0.95, &SelectionConfig::default());
        assert!(rec.recommended.is_none());
        assert!(rec
            .diagnostics
            .unwrap()
            .contains("closest is 36 GPU-hours with 5 episodes"));
    }

    #[test]
    fn csv_has_one_line_per_row() {
        let rows = vec![row(36.0, 60, 0.95, 0.02), row(48.0, 90, 0.95, 0.018)];
        let mut out = Vec::new();
        write_csv(&rows, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(
            lines[0].starts_with("budget_gpu_hours,n_episodes,mean_test_size,coverage_probability")
        );
        assert!(lines[2].starts_with("48.0,90,100.0,0.95"));
    }
}
