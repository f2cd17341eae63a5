use std::time::Duration;

use tokio::io::AsyncWriteExt;

use crate::adm::Value;
use crate::island::{Island, IslandConfig};
use crate::storage::DEAD_LETTERS;

fn cfg(name: &str) -> IslandConfig {
    IslandConfig {
        manual_channels: true,
        retry_backoff_ms: vec![10],
        reconcile_interval_ms: 50,
        ..IslandConfig::named(name)
    }
}

async fn eventually(mut f: impl FnMut() -> bool) -> bool {
    for _ in 0..200 {
        if f() {
            return true;
        }
        tokio::time::sleep(Duration::from_millis(10)).await;
    }
    false
}

#[tokio::test]
async fn socket_feed_stores_one_record_per_line() {
    let island = Island::open(cfg("a")).await.unwrap();
    island
        .execute(
            r#"USE dv;
            CREATE TYPE T AS { k: bigint };
            CREATE ACTIVE DATASET D(T) PRIMARY KEY k;
            CREATE FEED F WITH { "adapter-name": "socket_adapter", "sockets": "127.0.0.1:0",
                                 "format": "JSON" };
            CONNECT FEED F TO DATASET D;
            START FEED F;"#,
        )
        .await
        .unwrap();
    let addr = island.feed_addrs("dv", "F").unwrap()[0];
    let mut s = tokio::net::TcpStream::connect(addr).await.unwrap();
    let mut lines = String::new();
    for k in 0..50 {
        lines.push_str(&format!(
            "{{\"k\": {k}, \"at\": \"2020-06-26T03:26:58.123Z\"}}\n"
        ));
    }
    lines.push_str("not json\n\n");
    s.write_all(lines.as_bytes()).await.unwrap();
    s.flush().await.unwrap();
    let ds = island.catalog().dataset("dv", "D").unwrap();
    assert!(eventually(|| ds.len() == 50).await, "stored {}", ds.len());
    let dl = island.catalog().system_dataset(DEAD_LETTERS);
    assert!(eventually(|| dl.len() == 1).await);
    assert!(island.execute("USE dv; START FEED F;").await.is_err());
    island.execute("USE dv; STOP FEED F;").await.unwrap();
    assert!(island.execute("USE dv; STOP FEED F;").await.is_err());
    assert!(tokio::net::TcpStream::connect(addr).await.is_err());
}

#[tokio::test]
async fn dynamic_http_feed_applies_function_and_dead_letters_failures() {
    let island = Island::open(cfg("a")).await.unwrap();
    island
        .execute(
            r#"USE dv;
            CREATE TYPE T AS { k: bigint };
            CREATE DATASET D(T) PRIMARY KEY k;
            CREATE FUNCTION Tag(r) { object_merge(r, { "tagged": true, "half": r.k / 2 }) };
            CREATE FEED F WITH { "adapter-name": "http_adapter", "addresses": "127.0.0.1:0",
                                 "format": "ADM", "dynamic": true };
            CONNECT FEED F TO DATASET D APPLY FUNCTION Tag;
            START FEED F;"#,
        )
        .await
        .unwrap();
    let addr = island.feed_addrs("dv", "F").unwrap()[0];
    let http = reqwest::Client::new();
    let r = http
        .post(format!("http://{addr}/"))
        .body(r#"[{"k": 4}, {"k": 5, "tagged": false}]"#)
        .send()
        .await
        .unwrap();
    assert!(r.status().is_success());
    let bad = http
        .post(format!("http://{addr}/"))
        .body("{")
        .send()
        .await
        .unwrap();
    assert_eq!(bad.status().as_u16(), 400);
    let rows = island.query("dv", "SELECT VALUE d FROM D d;").unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].get("half"), Some(&Value::Double(2.0)));
    let dl = island.catalog().system_dataset(DEAD_LETTERS);
    assert_eq!(dl.len(), 2);
}

const REMOTE: &str = r#"
USE dhs;
CREATE TYPE Tweet AS { tid: bigint };
CREATE ACTIVE DATASET Tweets(Tweet) PRIMARY KEY tid;
CREATE CONTINUOUS PUSH CHANNEL At(area) PERIOD duration("PT10S") {
  SELECT t.tid, t.area FROM Tweets t WHERE t.area = area AND is_new(t) };
"#;

fn bridge_script(remote: &str) -> String {
    format!(
        r#"USE ocsd;
        CREATE TYPE Local AS {{ channelExecutionEpochTime: bigint }};
        CREATE ACTIVE DATASET Locals(Local) PRIMARY KEY channelExecutionEpochTime;
        CREATE FEED Bridge WITH {{ "adapter-name": "http_adapter", "addresses": "127.0.0.1:0",
          "format": "adm", "bad-host": "{remote}", "bad-channel": "At",
          "bad-channel-parameters": "\"OC\";\"UCI\"", "bad-dataverse": "dhs" }};
        CONNECT FEED Bridge TO DATASET Locals;"#
    )
}

fn remote_shape(remote: &Island) -> (usize, Vec<String>) {
    let st = remote.status();
    let dv = &st["dataverses"]["dhs"];
    let brokers = dv["brokers"].as_object().unwrap().len();
    let mut args: Vec<String> = dv["channels"]["At"]["subscriptions"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["args"][0].as_str().unwrap().to_owned())
        .collect();
    args.sort();
    (brokers, args)
}

#[tokio::test]
async fn bridge_lifecycle_round_trips_remote_state() {
    let remote = Island::start(cfg("dhs")).await.unwrap();
    remote.execute(REMOTE).await.unwrap();
    let local = Island::start(cfg("ocsd")).await.unwrap();
    local
        .execute(&bridge_script(&remote.url().unwrap()))
        .await
        .unwrap();

    for _ in 0..2 {
        local.execute("USE ocsd; START FEED Bridge;").await.unwrap();
        assert_eq!(remote_shape(&remote), (1, vec!["OC".into(), "UCI".into()]));
        local.execute("USE ocsd; STOP FEED Bridge;").await.unwrap();
        assert_eq!(remote_shape(&remote), (0, vec![]));
    }
    local.execute("USE ocsd; START FEED Bridge;").await.unwrap();
    assert_eq!(remote_shape(&remote), (1, vec!["OC".into(), "UCI".into()]));

    remote
        .execute("USE dhs; INSERT INTO Tweets [{\"tid\": 1, \"area\": \"UCI\"}, {\"tid\": 2, \"area\": \"OC\"}];")
        .await
        .unwrap();
    remote.run_channel("dhs", "At").await.unwrap();
    remote.wait_deliveries().await;
    let rows = local
        .query("ocsd", "SELECT VALUE l FROM Locals l;")
        .unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(
        rows[0]
            .get("results")
            .and_then(Value::as_array)
            .unwrap()
            .len(),
        2
    );
}

#[tokio::test]
async fn bridge_start_fails_cleanly_when_remote_is_down() {
    let local = Island::start(cfg("ocsd")).await.unwrap();
    local.execute(&bridge_script("127.0.0.1:9")).await.unwrap();
    assert!(local.execute("USE ocsd; START FEED Bridge;").await.is_err());
    let st = local.status();
    assert_eq!(
        st["dataverses"]["ocsd"]["feeds"]["Bridge"]["running"],
        false
    );
}

#[tokio::test]
async fn stop_with_remote_down_cleans_up_later() {
    let remote = Island::start(cfg("dhs")).await.unwrap();
    remote.execute(REMOTE).await.unwrap();
    let addr = remote.addr().unwrap();
    let local = Island::start(cfg("ocsd")).await.unwrap();
    local
        .execute(&bridge_script(&addr.to_string()))
        .await
        .unwrap();
    local.execute("USE ocsd; START FEED Bridge;").await.unwrap();

    // take the remote control plane away, keep its state
    remote.shutdown();
    let out = local.execute("USE ocsd; STOP FEED Bridge;").await.unwrap();
    assert_eq!(out[1]["feed"]["binding"]["dirty"], true);

    let back = Island::open(IslandConfig {
        port: addr.port(),
        ..cfg("dhs")
    })
    .await
    .unwrap();
    // the in-memory remote lost its catalog, so recreate it with the leftovers
    back.execute(REMOTE).await.unwrap();
    back.execute("USE dhs; CREATE BROKER bridge_ocsd_Bridge AT \"http://127.0.0.1:9/\" WITH {\"broker-type\": \"BAD\"}; SUBSCRIBE TO At(\"OC\") ON bridge_ocsd_Bridge;")
        .await
        .unwrap();
    back.serve().await.unwrap();
    assert!(eventually(|| remote_shape(&back) == (0, vec![])).await);
    assert!(
        eventually(
            || local.status()["dataverses"]["ocsd"]["feeds"]["Bridge"]["binding"]["dirty"] == false
        )
        .await
    );
}
