//! Campus alerts: the sample tweet arrives as a locally stored notification
//! and the alert channel ranks security stations by distance.
//!
//! cargo run --example spatial_alerts

use archipelago::island::{Island, IslandConfig};
use archipelago::scenario::scripts::{BUILDING_AREA, STATIONS};
use archipelago::sink::BrokerSink;

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let uci = Island::start(IslandConfig {
        manual_channels: true,
        ..IslandConfig::named("uci")
    })
    .await?;
    let listener = BrokerSink::bind().await?;
    let ((x1, y1), (x2, y2)) = BUILDING_AREA;
    let stations: Vec<String> = STATIONS
        .iter()
        .enumerate()
        .map(|(i, (x, y))| {
            format!(
                r#"{{"sid": {i}, "location": create_point({x}, {y}), "name": "Station # {i}"}}"#
            )
        })
        .collect();
    uci.execute(&format!(
        r#"USE uci;
        CREATE TYPE LocalThreateningTweet AS {{ channelExecutionEpochTime: bigint }};
        CREATE ACTIVE DATASET LocalThreateningTweets(LocalThreateningTweet)
          PRIMARY KEY channelExecutionEpochTime;
        CREATE TYPE Building AS {{ bid: uuid, name: string }};
        CREATE TYPE SecurityStation AS {{ sid: bigint, location: point }};
        CREATE DATASET Buildings(Building) PRIMARY KEY bid AUTOGENERATED;
        CREATE DATASET SecurityStations(SecurityStation) PRIMARY KEY sid;
        INSERT INTO Buildings {{ "name": "Student Center", "area": rectangle("{x1}, {y1} {x2},{y2}") }};
        INSERT INTO SecurityStations [{stations}];
        CREATE CONTINUOUS PUSH CHANNEL AlertsOnCampus() PERIOD duration("PT1S") {{
          FROM LocalThreateningTweets tn, Buildings b
          UNNEST tn.results threatening_tweet
          LET tweet_loc = threatening_tweet.result.location,
            station_dist = (FROM SecurityStations s
              LET dist = spatial_distance(tweet_loc, s.location)
              SELECT s stationInfo, dist * 100 dist_km ORDER BY dist)
          WHERE is_new(tn) AND spatial_intersect(tweet_loc, b.area)
          SELECT threatening_tweet.result tweet_content, b building_info, station_dist }};
        CREATE BROKER Listener AT "{url}" WITH {{ "broker-type": "general" }};
        SUBSCRIBE TO AlertsOnCampus() ON Listener;
        INSERT INTO LocalThreateningTweets {{
          "channelExecutionEpochTime": 1593142019521,
          "dataverseName": "dhs", "channelName": "ThreateningTweetsAt",
          "results": [ {{ "result": {{ "text": "sample",
            "location": create_point(33.64921228736088, -117.84181977473024) }} }} ] }};"#,
        stations = stations.join(", "),
        url = listener.url(),
    ))
    .await?;
    uci.run_channel("uci", "AlertsOnCampus").await?;
    uci.wait_deliveries().await;

    let alert: serde_json::Value = serde_json::from_str(&listener.take()[0].body)?;
    for s in alert["results"][0]["result"]["station_dist"]
        .as_array()
        .unwrap()
    {
        println!(
            "{:<12} {:.17} km",
            s["stationInfo"]["name"].as_str().unwrap(),
            s["dist_km"]
        );
    }
    uci.shutdown();
    Ok(())
}
