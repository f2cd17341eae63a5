//! One channel, two brokers: a general one gets JSON and a BAD one gets
//! ADM text.
//!
//! cargo run --example dual_format

use archipelago::island::{Island, IslandConfig};
use archipelago::sink::BrokerSink;

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let island = Island::start(IslandConfig {
        manual_channels: true,
        ..IslandConfig::named("dual")
    })
    .await?;
    let (general, bad) = (BrokerSink::bind().await?, BrokerSink::bind().await?);
    island
        .execute(&format!(
            r#"USE demo;
            CREATE TYPE Spot AS {{ sid: bigint }};
            CREATE ACTIVE DATASET Spots(Spot) PRIMARY KEY sid;
            CREATE CONTINUOUS PUSH CHANNEL Near(x) PERIOD duration("PT1S") {{
              SELECT s.sid, s.at, spatial_distance(s.at, create_point(x, 0.0)) d
              FROM Spots s WHERE is_new(s) }};
            CREATE BROKER Web AT "{}" WITH {{ "broker-type": "general" }};
            CREATE BROKER Peer AT "{}" WITH {{ "broker-type": "BAD" }};
            SUBSCRIBE TO Near(1.0) ON Web;
            SUBSCRIBE TO Near(1.0) ON Peer;
            INSERT INTO Spots {{ "sid": 1, "at": create_point(4.0, 4.0),
                                 "seen": datetime("2020-06-26T03:26:58.123Z") }};"#,
            general.url(),
            bad.url()
        ))
        .await?;
    island.run_channel("demo", "Near").await?;
    island.wait_deliveries().await;
    for (name, sink) in [("general", &general), ("BAD", &bad)] {
        let r = sink.take().remove(0);
        println!("{name} broker, {}:\n{}\n", r.content_type, r.body);
    }
    island.shutdown();
    Ok(())
}
