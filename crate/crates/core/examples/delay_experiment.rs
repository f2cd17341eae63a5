//! A short run of the delay experiment: ten executions per period.
//!
//! cargo run --release --example delay_experiment [executions]

use archipelago::scenario::{run_delay_experiment, ScenarioConfig};

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let executions = std::env::args()
        .nth(1)
        .map(|a| a.parse())
        .transpose()?
        .unwrap_or(10);
    let cfg = ScenarioConfig {
        executions,
        out_dir: std::env::temp_dir().join("archipelago-delays"),
        ..ScenarioConfig::default()
    };
    let report = run_delay_experiment(&cfg).await?;
    print!("{}", report.summary);
    for p in &report.periods {
        println!("wrote {}", p.csv.display());
    }
    Ok(())
}
