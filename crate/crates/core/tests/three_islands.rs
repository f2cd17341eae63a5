use std::collections::HashMap;
use std::time::Duration;

use archipelago::scenario::{
    delay_records, deploy_trinity, run_workload, Area, ScenarioConfig, Trinity,
};

async fn stored_texts(
    client: &archipelago::client::IslandClient,
    dv: &str,
) -> HashMap<String, usize> {
    let rows = client
        .query(
            dv,
            "FROM LocalThreateningTweets t UNNEST t.results r SELECT VALUE r.result.text;",
        )
        .await
        .unwrap();
    let mut counts = HashMap::new();
    for row in rows {
        *counts.entry(row.as_str().unwrap().to_owned()).or_insert(0) += 1;
    }
    counts
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn threatening_tweets_cross_the_bridge_exactly_once_within_the_delay_bound() {
    let cfg = ScenarioConfig {
        officers: 5,
        subscriptions: 5,
        executions: 6,
        ..ScenarioConfig::default()
    };
    let period = cfg.period().unwrap();
    let trinity = Trinity::connect(&cfg).await.unwrap();
    let deployment = deploy_trinity(&cfg, &trinity, period).await.unwrap();
    let log = run_workload(&cfg, &trinity, &deployment, cfg.executions)
        .await
        .unwrap();
    assert!(log.aborted.is_none(), "{:?}", log.aborted);

    // the last batch still has one DHS execution and a bridge hop to make
    tokio::time::sleep(2 * period + Duration::from_secs(1)).await;
    trinity.wait_deliveries().await;

    let ocsd = stored_texts(&trinity.ocsd, "ocsd").await;
    let uci = stored_texts(&trinity.uci, "uci").await;
    let threatening: Vec<_> = log.tweets.iter().filter(|t| t.threatening).collect();
    assert!(
        threatening.len() > 10,
        "workload too small: {}",
        threatening.len()
    );
    for t in &threatening {
        assert_eq!(ocsd.get(&t.text), Some(&1), "OCSD copy of {}", t.text);
        let want = (t.area == Area::Uci).then_some(&1);
        assert_eq!(uci.get(&t.text), want, "UCI copy of {}", t.text);
    }
    assert_eq!(
        ocsd.len(),
        threatening.len(),
        "OCSD stored a tweet that was never threatening"
    );

    let (_, summaries) = delay_records(&log).unwrap();
    let bound = (3 * period + Duration::from_secs(5)).as_millis() as f64;
    for s in &summaries {
        assert!(s.deliveries > 0, "{} received nothing", s.island);
        assert!(
            s.max_delay_ms <= bound,
            "{}: max delay {} ms",
            s.island,
            s.max_delay_ms
        );
    }
    trinity.shutdown();
}
