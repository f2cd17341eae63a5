//! Propagation delay from tweet creation to end-subscriber receipt.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{deploy_trinity, run_workload, RunLog, ScenarioConfig, Trinity};
use crate::error::{Error, Result};
use crate::sink::Received;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayRecord {
    #[serde(rename = "executionIndex")]
    pub execution_index: u32,
    pub island: String,
    #[serde(rename = "meanDelayMs")]
    pub mean_delay_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IslandSummary {
    pub island: String,
    /// Executions with at least one delivery.
    pub executions: usize,
    /// Delivered results, one per tweet per subscription.
    pub deliveries: usize,
    pub distinct_tweets: usize,
    /// Mean over every delivered result.
    pub mean_delay_ms: f64,
    pub max_delay_ms: f64,
}

#[derive(Debug, Clone)]
pub struct PeriodReport {
    pub period: Duration,
    pub records: Vec<DelayRecord>,
    pub islands: Vec<IslandSummary>,
    pub tweets_sent: usize,
    pub csv: PathBuf,
    pub partial: Option<String>,
}

impl PeriodReport {
    pub fn island(&self, name: &str) -> Option<&IslandSummary> {
        self.islands.iter().find(|s| s.island == name)
    }

    /// Per-execution means of one island, in execution order.
    pub fn series(&self, island: &str) -> Vec<(u32, f64)> {
        self.records
            .iter()
            .filter(|r| r.island == island)
            .map(|r| (r.execution_index, r.mean_delay_ms))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub periods: Vec<PeriodReport>,
    pub summary: String,
    pub summary_path: PathBuf,
}

/// Standard deviation over mean; `None` for fewer than two values or a
/// zero mean.
pub fn coefficient_of_variation(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if mean == 0.0 {
        return None;
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Some(var.sqrt() / mean)
}

struct Delivery {
    execution: u32,
    text: String,
    delay_ms: f64,
}

fn deliveries(
    log: &RunLog,
    bodies: &[Received],
    created: &HashMap<&str, i64>,
) -> Result<Vec<Delivery>> {
    let p = log.period.as_millis() as f64;
    let mut out = Vec::new();
    for b in bodies {
        let v = b.value()?;
        let epoch = v
            .get("channelExecutionEpochTime")
            .and_then(|e| e.as_i64())
            .ok_or_else(|| Error::Type("delivery lacks channelExecutionEpochTime".into()))?;
        let idx = ((epoch - log.first_execution_ms) as f64 / p).round();
        if idx < 0.0 || idx >= log.executions as f64 {
            continue;
        }
        for r in v
            .get("results")
            .and_then(|r| r.as_array())
            .unwrap_or_default()
        {
            let text = r
                .get("result")
                .and_then(|r| r.get("tweet_content"))
                .and_then(|t| t.get("text"))
                .and_then(|t| t.as_str())
                .ok_or_else(|| Error::Type("delivered result lacks tweet_content.text".into()))?;
            let Some(&at) = created.get(text) else {
                return Err(Error::State(format!(
                    "delivered tweet was never sent: {text}"
                )));
            };
            out.push(Delivery {
                execution: idx as u32,
                text: text.to_owned(),
                delay_ms: (b.at_ms - at) as f64,
            });
        }
    }
    Ok(out)
}

/// Groups end-subscriber receipts by downstream execution.
pub fn delay_records(log: &RunLog) -> Result<(Vec<DelayRecord>, Vec<IslandSummary>)> {
    let created: HashMap<&str, i64> = log
        .tweets
        .iter()
        .map(|t| (t.text.as_str(), t.created_at))
        .collect();
    let mut records = Vec::new();
    let mut summaries = Vec::new();
    for (island, bodies) in [("ocsd", &log.officer_bodies), ("uci", &log.alert_bodies)] {
        let ds = deliveries(log, bodies, &created)?;
        let mut per: BTreeMap<u32, (f64, usize)> = BTreeMap::new();
        for d in &ds {
            let e = per.entry(d.execution).or_default();
            e.0 += d.delay_ms;
            e.1 += 1;
        }
        for (&execution_index, &(sum, n)) in &per {
            records.push(DelayRecord {
                execution_index,
                island: island.into(),
                mean_delay_ms: sum / n as f64,
            });
        }
        let total: f64 = ds.iter().map(|d| d.delay_ms).sum();
        summaries.push(IslandSummary {
            island: island.into(),
            executions: per.len(),
            deliveries: ds.len(),
            distinct_tweets: ds
                .iter()
                .map(|d| d.text.as_str())
                .collect::<HashSet<_>>()
                .len(),
            mean_delay_ms: if ds.is_empty() {
                0.0
            } else {
                total / ds.len() as f64
            },
            max_delay_ms: ds.iter().map(|d| d.delay_ms).fold(0.0, f64::max),
        });
    }
    Ok((records, summaries))
}

fn period_label(p: Duration) -> String {
    let ms = p.as_millis();
    if ms % 1000 == 0 {
        format!("{}s", ms / 1000)
    } else {
        format!("{ms}ms")
    }
}

fn write_csv(path: &PathBuf, records: &[DelayRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::State(e.to_string()))?;
    for r in records {
        w.serialize(r).map_err(|e| Error::State(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

async fn run_period(cfg: &ScenarioConfig, period: Duration) -> Result<PeriodReport> {
    let label = period_label(period);
    let trinity = Trinity::connect(cfg).await?;
    let outcome = async {
        let d = deploy_trinity(cfg, &trinity, period).await?;
        tracing::info!(period = %label, "deployed, streaming");
        run_workload(cfg, &trinity, &d, cfg.executions).await
    }
    .await;
    trinity.shutdown();
    let log = outcome?;
    let (records, islands) = delay_records(&log)?;
    let csv = cfg.out_dir.join(match log.aborted {
        None => format!("delays_{label}.csv"),
        Some(_) => format!("delays_{label}.partial.csv"),
    });
    write_csv(&csv, &records)?;
    Ok(PeriodReport {
        period,
        records,
        islands,
        tweets_sent: log.tweets.len(),
        csv,
        partial: log.aborted,
    })
}

fn summarize(cfg: &ScenarioConfig, periods: &[PeriodReport]) -> String {
    let mut s = format!(
        "delay experiment: {} tweets/s, {:.0}% threatening, {} officers, {} subscriptions, {} executions, seed {}\n",
        cfg.tweet_rate,
        cfg.threatening_fraction * 100.0,
        cfg.officers,
        cfg.subscriptions,
        cfg.executions,
        cfg.seed
    );
    for p in periods {
        let _ = writeln!(
            s,
            "period {}: {} tweets sent{}",
            period_label(p.period),
            p.tweets_sent,
            match &p.partial {
                Some(why) => format!(" (PARTIAL: {why})"),
                None => String::new(),
            }
        );
        for i in &p.islands {
            let _ = writeln!(
                s,
                "  {:<5} mean {:>8.1} ms  max {:>8.1} ms  executions {:>3}  deliveries {:>6}  tweets {:>4}",
                i.island, i.mean_delay_ms, i.max_delay_ms, i.executions, i.deliveries, i.distinct_tweets
            );
        }
    }
    s
}

/// Deploys fresh islands for every configured period, streams the workload
/// and writes `delays_<period>.csv` plus `summary.txt` into the output
/// directory. An unreachable island ends the run with its CSV named
/// `delays_<period>.partial.csv`.
pub async fn run_delay_experiment(cfg: &ScenarioConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let periods = cfg.periods()?;
    if cfg.remote_count() > 0 && periods.len() > 1 {
        return Err(Error::State(
            "running islands can host one period per experiment; pass a single period".into(),
        ));
    }
    std::fs::create_dir_all(&cfg.out_dir)?;
    let mut reports = Vec::new();
    let mut failure = None;
    for p in periods {
        let r = run_period(cfg, p).await?;
        if let Some(why) = &r.partial {
            failure = Some(why.clone());
        }
        reports.push(r);
        if failure.is_some() {
            break;
        }
    }
    let summary = summarize(cfg, &reports);
    let summary_path = cfg.out_dir.join("summary.txt");
    std::fs::write(&summary_path, &summary)?;
    if let Some(why) = failure {
        return Err(Error::Remote(format!("delay experiment aborted: {why}")));
    }
    Ok(ExperimentReport {
        periods: reports,
        summary,
        summary_path,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{Area, GeneratedTweet};

    fn tweet(tid: i64, created_at: i64) -> GeneratedTweet {
        GeneratedTweet {
            tid,
            uid: 1,
            text: format!("t #{tid}"),
            area: Area::Uci,
            coordinates: (0.0, 0.0),
            created_at,
            threatening: true,
        }
    }

    fn body(at_ms: i64, epoch: i64, tids: &[i64]) -> Received {
        let results: Vec<String> = tids
            .iter()
            .map(|t| format!(r#"{{"result": {{"tweet_content": {{"text": "t #{t}"}}}}}}"#))
            .collect();
        Received {
            at_ms,
            path: "/".into(),
            content_type: "application/json".into(),
            body: format!(
                r#"{{"channelExecutionEpochTime": {epoch}, "results": [{}]}}"#,
                results.join(",")
            ),
        }
    }

    #[test]
    fn records_group_by_execution_and_drop_tail() {
        let log = RunLog {
            period: Duration::from_secs(1),
            first_execution_ms: 10_000,
            executions: 2,
            tweets: vec![tweet(1, 9_000), tweet(2, 9_500), tweet(3, 10_200)],
            officer_posts: 0,
            officer_bodies: vec![body(11_010, 11_003, &[1, 2]), body(12_020, 12_001, &[3])],
            alert_bodies: vec![body(11_050, 11_002, &[1, 1])],
            aborted: None,
        };
        let (records, summaries) = delay_records(&log).unwrap();
        assert_eq!(
            records,
            vec![
                DelayRecord {
                    execution_index: 1,
                    island: "ocsd".into(),
                    mean_delay_ms: 1760.0
                },
                DelayRecord {
                    execution_index: 1,
                    island: "uci".into(),
                    mean_delay_ms: 2050.0
                },
            ]
        );
        assert_eq!(summaries[1].deliveries, 2);
        assert_eq!(summaries[1].distinct_tweets, 1);
    }

    #[test]
    fn unknown_tweets_are_an_error() {
        let log = RunLog {
            period: Duration::from_secs(1),
            first_execution_ms: 0,
            executions: 5,
            tweets: vec![],
            officer_posts: 0,
            officer_bodies: vec![body(1_100, 1_000, &[9])],
            alert_bodies: vec![],
            aborted: None,
        };
        assert!(delay_records(&log).is_err());
    }

    #[test]
    fn cv() {
        assert_eq!(coefficient_of_variation(&[1.0]), None);
        assert_eq!(coefficient_of_variation(&[2.0, 2.0]), Some(0.0));
        let c = coefficient_of_variation(&[1.0, 3.0]).unwrap();
        assert!((c - 2f64.sqrt() / 2.0).abs() < 1e-12);
        assert_eq!(period_label(Duration::from_millis(1500)), "1500ms");
        assert_eq!(period_label(Duration::from_secs(2)), "2s");
    }
}
