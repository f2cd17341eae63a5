//! Starts, stops and restarts a bridge feed and shows what it leaves on the
//! remote island each time.
//!
//! cargo run --example bridge_lifecycle

use std::time::Duration;

use archipelago::island::{Island, IslandConfig};
use archipelago::scenario::scripts;

fn remote_state(dhs: &Island) -> String {
    let st = dhs.status();
    let dv = &st["dataverses"]["dhs"];
    let brokers: Vec<&String> = dv["brokers"].as_object().unwrap().keys().collect();
    let subs: Vec<String> = dv["channels"]["ThreateningTweetsAt"]["subscriptions"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| format!("{}({})", s["broker"].as_str().unwrap(), s["args"]))
        .collect();
    format!("brokers {brokers:?}, subscriptions {subs:?}")
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let dhs = Island::start(IslandConfig::named("dhs")).await?;
    dhs.execute(&scripts::dhs(Duration::from_secs(10))).await?;
    let ocsd = Island::start(IslandConfig::named("ocsd")).await?;
    ocsd.execute(&scripts::ocsd(Duration::from_secs(10), &dhs.url().unwrap()))
        .await?;
    println!("after deploy:  {}", remote_state(&dhs));

    for step in ["STOP", "START", "STOP", "START"] {
        ocsd.execute(&format!("USE ocsd; {step} FEED LocalThreateningTweetFeed;"))
            .await?;
        println!("after {step:<5}:  {}", remote_state(&dhs));
    }
    ocsd.shutdown();
    dhs.shutdown();
    Ok(())
}
