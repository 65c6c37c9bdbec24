//! Runs the whole pipeline for both training variants from a config file
//! and prints the resulting tables.
//!
//! cargo run --release --example table_two -- configs/table_two.toml [key=value ...]

use std::path::PathBuf;

use scenario_mining::cli::stages::{pipeline, REPORT_TEXT};
use scenario_mining::cli::Config;

fn main() -> scenario_mining::Result<()> {
    let mut args = std::env::args().skip(1);
    let config = args.next().map(PathBuf::from);
    let overrides: Vec<String> = args.collect();
    let cfg = Config::load(config.as_deref(), &overrides)?;
    let dir = std::env::temp_dir().join(format!("table_two_seed{}", cfg.seed));
    for summary in pipeline(&cfg, &dir)? {
        println!("{summary}");
        if let Some(n) = &summary.notice {
            println!("  {n}");
        }
    }
    println!("\n{}", std::fs::read_to_string(dir.join(REPORT_TEXT))?);
    Ok(())
}
