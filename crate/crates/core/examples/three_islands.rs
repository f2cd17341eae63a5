//! Deploys DHS, OCSD and UCI in this process, posts the sample tweet and
//! prints the officer notification and the campus alert it causes.
//!
//! cargo run --example three_islands

use std::time::Duration;

use archipelago::adm::{serialize_adm, Value};
use archipelago::scenario::{deploy_trinity, scripts, OfficerWalk, ScenarioConfig, Trinity};
use tokio::io::AsyncWriteExt;

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let cfg = ScenarioConfig {
        officers: 1,
        subscriptions: 1,
        ..ScenarioConfig::default()
    };
    let t = Trinity::connect(&cfg).await?;
    let d = deploy_trinity(&cfg, &t, Duration::from_secs(1)).await?;

    // officer 0 reports once from its starting point
    let walk = OfficerWalk::new(cfg.seed, cfg.officers);
    reqwest::Client::new()
        .post(&d.location_feed)
        .body(walk.body())
        .send()
        .await?;

    let mut sock = tokio::net::TcpStream::connect(d.tweet_feed).await?;
    sock.write_all(format!("{}\n", scripts::SAMPLE_TWEET).as_bytes())
        .await?;

    let wait = Duration::from_secs(10);
    anyhow::ensure!(
        d.officers.wait_for(1, wait).await,
        "no officer notification"
    );
    anyhow::ensure!(d.alerts.wait_for(1, wait).await, "no campus alert");
    for (who, got) in [("officer", d.officers.take()), ("campus", d.alerts.take())] {
        let body: Value = got[0].value()?;
        println!(
            "{who} notification ({}):\n{}\n",
            got[0].content_type,
            serialize_adm(&body)
        );
    }
    t.shutdown();
    Ok(())
}
