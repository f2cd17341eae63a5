//! A pull channel: the broker gets a handle, and the results are fetched
//! over HTTP.
//!
//! cargo run --example pull_channel

use archipelago::client::IslandClient;
use archipelago::island::{Island, IslandConfig};
use archipelago::sink::BrokerSink;

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let island = Island::start(IslandConfig {
        manual_channels: true,
        ..IslandConfig::named("pull")
    })
    .await?;
    let sink = BrokerSink::bind().await?;
    island
        .execute(&format!(
            r#"USE demo;
            CREATE TYPE Reading AS {{ rid: bigint, level: double }};
            CREATE ACTIVE DATASET Readings(Reading) PRIMARY KEY rid;
            CREATE CONTINUOUS PULL CHANNEL HighLevels(threshold) PERIOD duration("PT5S") {{
              SELECT r.rid, r.level FROM Readings r WHERE r.level > threshold AND is_new(r) }};
            CREATE BROKER Phone AT "{}" WITH {{ "broker-type": "general" }};
            SUBSCRIBE TO HighLevels(3.5) ON Phone;
            INSERT INTO Readings [{{"rid": 1, "level": 2.0}}, {{"rid": 2, "level": 4.25}}];"#,
            sink.url()
        ))
        .await?;
    island.run_channel("demo", "HighLevels").await?;
    island.wait_deliveries().await;

    let notice = sink.take().remove(0);
    println!("notice: {}", notice.body);
    let handle: serde_json::Value = serde_json::from_str(&notice.body)?;
    let client = IslandClient::new(&island.url().unwrap());
    let results = client.pull(handle["handle"].as_str().unwrap()).await?;
    println!("pulled: {}", serde_json::to_string_pretty(&results)?);
    island.shutdown();
    Ok(())
}
