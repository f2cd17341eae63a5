//! Ingests the sample raw tweet through the DHS socket feed and prints the
//! enriched record.
//!
//! cargo run --example enrichment

use std::time::Duration;

use archipelago::adm::{serialize_adm, Value};
use archipelago::island::{Island, IslandConfig};
use archipelago::scenario::scripts;
use tokio::io::AsyncWriteExt;

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let dhs = Island::start(IslandConfig::named("dhs")).await?;
    dhs.execute(&scripts::dhs(Duration::from_secs(10))).await?;

    let addr = dhs.feed_addrs("dhs", "TweetFeed").expect("feed runs")[0];
    let mut sock = tokio::net::TcpStream::connect(addr).await?;
    sock.write_all(format!("{}\n", scripts::SAMPLE_TWEET).as_bytes())
        .await?;

    let tweets = dhs.catalog().dataset("dhs", "Tweets")?;
    while tweets.is_empty() {
        tokio::time::sleep(Duration::from_millis(10)).await;
    }
    let stored = tweets.get(&Value::BigInt(1593142018123)).expect("stored");
    println!("{}", serialize_adm(&stored.value));
    dhs.shutdown();
    Ok(())
}
