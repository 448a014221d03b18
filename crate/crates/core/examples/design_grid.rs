//! Runs the default sample-size grid and prints the table and recommendation.
//!
//! `cargo run --release --example design_grid -- [runs_per_config]`

use fewshot_bench::designer::{
    grid_search, select_configuration, write_csv, CostModel, SelectionConfig, SimConfig,
};

fn main() {
    let runs = std::env::args()
        .nth(1)
        .map_or(300, |a| a.parse().expect("runs must be an integer"));
    let sim = SimConfig {
        runs_per_config: runs,
        ..SimConfig::default()
    };
    let grid = grid_search(&sim, &CostModel::default()).expect("default grid is valid");
    write_csv(&grid.rows, std::io::stdout()).expect("stdout is writable");
    let rec = select_configuration(
        &grid.rows,
        sim.stats.confidence_level,
        &SelectionConfig::default(),
    );
    println!(
        "{}",
        serde_json::to_string_pretty(&rec).expect("recommendation serializes")
    );
}
