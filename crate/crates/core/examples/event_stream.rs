//! Drives an island only through its HTTP interface and follows `/events`.
//!
//! cargo run --example event_stream

use std::time::Duration;

use archipelago::client::IslandClient;
use archipelago::island::{Island, IslandConfig};

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let island = Island::start(IslandConfig::named("events")).await?;
    let base = island.url().unwrap();
    let client = IslandClient::new(&base);

    let mut events = reqwest::Client::new()
        .get(format!("{base}/events"))
        .send()
        .await?;
    client
        .execute(
            r#"USE demo;
            CREATE TYPE Ping AS { n: bigint };
            CREATE DATASET Pings(Ping) PRIMARY KEY n;
            INSERT INTO Pings [{"n": 1}, {"n": 2}];"#,
        )
        .await?;
    let rows = client
        .query("demo", "SELECT VALUE p.n * 10 FROM Pings p ORDER BY p.n;")
        .await?;
    println!("query rows: {rows:?}");

    let mut seen = String::new();
    while !seen.contains("\n\n") {
        match tokio::time::timeout(Duration::from_secs(5), events.chunk()).await {
            Ok(Ok(Some(chunk))) => seen.push_str(&String::from_utf8_lossy(&chunk)),
            _ => break,
        }
    }
    println!("first event:\n{}", seen.trim_end());
    println!(
        "status: {}",
        client.status().await?["dataverses"]["demo"]["datasets"]
    );
    island.shutdown();
    Ok(())
}
