//! The three-island prototype.
//!
//! DHS ingests and enriches tweets and publishes `ThreateningTweetsAt`.
//! OCSD and UCI bridge that channel into their own `LocalThreateningTweets`
//! and notify officers and campus alert listeners, which the harness hosts
//! as general brokers. Islands named in the config are reached over HTTP;
//! missing ones are started in this process.

mod delays;
pub mod scripts;
mod workload;

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;
use tokio::sync::watch;

use crate::client::IslandClient;
use crate::clock::{now_ms, parse_period};
use crate::error::{Error, Result};
use crate::island::{Island, IslandConfig};
use crate::query::WordList;
use crate::sink::{BrokerSink, Received};

pub use delays::{
    coefficient_of_variation, delay_records, run_delay_experiment, DelayRecord, ExperimentReport,
    IslandSummary, PeriodReport,
};
pub use workload::{
    drive_officers, feed_tweets, Area, GeneratedTweet, OfficerWalk, TweetGenerator,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct ScenarioConfig {
    /// `host:port` of a running island; started in-process when absent.
    pub dhs: Option<String>,
    pub ocsd: Option<String>,
    pub uci: Option<String>,
    /// Period of all three channels for `deploy` and `run`.
    pub period: String,
    /// Periods compared by the delay experiment.
    pub periods: Vec<String>,
    pub tweet_rate: f64,
    pub threatening_fraction: f64,
    pub officers: usize,
    pub subscriptions: usize,
    pub executions: u32,
    pub seed: u64,
    pub officer_interval_ms: u64,
    pub out_dir: PathBuf,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            dhs: None,
            ocsd: None,
            uci: None,
            period: "1s".into(),
            periods: vec!["1s".into(), "2s".into()],
            tweet_rate: 10.0,
            threatening_fraction: 0.5,
            officers: 100,
            subscriptions: 100,
            executions: 50,
            seed: 7,
            officer_interval_ms: 1000,
            out_dir: PathBuf::from("delay-results"),
        }
    }
}

fn period_of(text: &str) -> Result<Duration> {
    parse_period(text).ok_or_else(|| Error::State(format!("bad period `{text}`")))
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig =
            toml::from_str(text).map_err(|e| Error::State(format!("scenario config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tweet_rate > 0.0 && self.tweet_rate.is_finite()) {
            return Err(Error::State("tweet-rate must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.threatening_fraction) {
            return Err(Error::State(
                "threatening-fraction must lie in [0, 1]".into(),
            ));
        }
        if self.executions == 0 {
            return Err(Error::State("executions must be at least 1".into()));
        }
        if self.officer_interval_ms == 0 {
            return Err(Error::State("officer-interval-ms must be positive".into()));
        }
        self.period()?;
        self.periods()?;
        Ok(())
    }

    pub fn period(&self) -> Result<Duration> {
        period_of(&self.period)
    }

    pub fn periods(&self) -> Result<Vec<Duration>> {
        self.periods.iter().map(|p| period_of(p)).collect()
    }

    fn remote_count(&self) -> usize {
        [&self.dhs, &self.ocsd, &self.uci]
            .iter()
            .filter(|e| e.is_some())
            .count()
    }
}

/// Clients for the three islands, plus any islands started in-process.
pub struct Trinity {
    pub dhs: IslandClient,
    pub ocsd: IslandClient,
    pub uci: IslandClient,
    local: Vec<Island>,
}

impl Trinity {
    pub async fn connect(cfg: &ScenarioConfig) -> Result<Trinity> {
        let mut local = Vec::new();
        let mut client = async |endpoint: &Option<String>, name: &str| -> Result<IslandClient> {
            match endpoint {
                Some(e) => Ok(IslandClient::new(e)),
                None => {
                    let island = Island::start(IslandConfig::named(name)).await?;
                    let c = IslandClient::new(&island.url().expect("served island"));
                    local.push(island);
                    Ok(c)
                }
            }
        };
        let dhs = client(&cfg.dhs, "dhs").await?;
        let ocsd = client(&cfg.ocsd, "ocsd").await?;
        let uci = client(&cfg.uci, "uci").await?;
        Ok(Trinity {
            dhs,
            ocsd,
            uci,
            local,
        })
    }

    /// Islands running in this process.
    pub fn local(&self) -> &[Island] {
        &self.local
    }

    /// Waits for every in-process broker queue to drain.
    pub async fn wait_deliveries(&self) {
        for i in &self.local {
            i.wait_deliveries().await;
        }
    }

    pub fn shutdown(&self) {
        for i in &self.local {
            i.shutdown();
        }
    }
}

/// What a deployment exposes to the workload drivers.
pub struct Deployment {
    pub period: Duration,
    pub tweet_feed: SocketAddr,
    pub location_feed: String,
    /// General broker of the `ThreateningEventsNear` subscriptions.
    pub officers: BrokerSink,
    /// General broker of the `AlertsOnCampus` subscriptions.
    pub alerts: BrokerSink,
}

async fn feed_addr(client: &IslandClient, dv: &str, feed: &str) -> Result<SocketAddr> {
    let st = client.status().await?;
    st["dataverses"][dv]["feeds"][feed]["addresses"][0]
        .as_str()
        .and_then(|a| a.parse().ok())
        .ok_or_else(|| Error::State(format!("{dv}.{feed} is not listening")))
}

/// Runs every deployment statement against the three islands.
pub async fn deploy_trinity(
    cfg: &ScenarioConfig,
    t: &Trinity,
    period: Duration,
) -> Result<Deployment> {
    t.dhs.execute(&scripts::dhs(period)).await?;
    let dhs_host = t.dhs.base_url();
    t.ocsd.execute(&scripts::ocsd(period, dhs_host)).await?;
    t.uci.execute(&scripts::uci(period, dhs_host)).await?;

    let officers = BrokerSink::bind().await?;
    let alerts = BrokerSink::bind().await?;
    t.ocsd
        .execute(&scripts::subscriptions(
            "ocsd",
            "OfficerDevices",
            &officers.url(),
            "ThreateningEventsNear",
            cfg.officers,
            |i| i.to_string(),
        ))
        .await?;
    t.uci
        .execute(&scripts::subscriptions(
            "uci",
            "CampusAlerts",
            &alerts.url(),
            "AlertsOnCampus",
            cfg.subscriptions,
            |_| String::new(),
        ))
        .await?;
    Ok(Deployment {
        period,
        tweet_feed: feed_addr(&t.dhs, "dhs", "TweetFeed").await?,
        location_feed: format!(
            "http://{}/",
            feed_addr(&t.ocsd, "ocsd", "LocationFeed").await?
        ),
        officers,
        alerts,
    })
}

/// Everything a workload run observed.
#[derive(Debug, Clone)]
pub struct RunLog {
    pub period: Duration,
    /// Epoch of the first downstream execution counted.
    pub first_execution_ms: i64,
    pub executions: u32,
    pub tweets: Vec<GeneratedTweet>,
    pub officer_posts: usize,
    pub officer_bodies: Vec<Received>,
    pub alert_bodies: Vec<Received>,
    /// Why the run stopped early, if it did.
    pub aborted: Option<String>,
}

fn channel_executions(st: &Json, dv: &str, ch: &str) -> Option<u64> {
    st["dataverses"][dv]["channels"][ch]["executions"].as_u64()
}

async fn check_islands(t: &Trinity) -> Result<()> {
    t.dhs.status().await?;
    let o = t.ocsd.status().await?;
    let u = t.uci.status().await?;
    if channel_executions(&o, "ocsd", "ThreateningEventsNear").is_none()
        || channel_executions(&u, "uci", "AlertsOnCampus").is_none()
    {
        return Err(Error::State("downstream channels are missing".into()));
    }
    Ok(())
}

/// Streams tweets and officer updates for `executions` downstream channel
/// periods, then collects what the end subscribers received.
pub async fn run_workload(
    cfg: &ScenarioConfig,
    t: &Trinity,
    d: &Deployment,
    executions: u32,
) -> Result<RunLog> {
    let words = WordList::default()
        .words()
        .into_iter()
        .map(String::from)
        .collect();
    let generator = TweetGenerator::new(cfg.seed, cfg.threatening_fraction, words);
    let walk = OfficerWalk::new(cfg.seed, cfg.officers);
    let (stop, rx) = watch::channel(false);
    d.officers.take();
    d.alerts.take();

    // tweets start half an interval after a period boundary, so a seeded
    // run puts the same tweets in the same executions
    let p = d.period.as_millis() as i64;
    let now = now_ms();
    let first = (now / p + 1) * p;
    let end = first + executions as i64 * p;
    let lead = (first - now) as f64 + 500.0 / cfg.tweet_rate;
    let start = tokio::time::Instant::now() + Duration::from_secs_f64(lead / 1000.0);

    let mut tweets = tokio::spawn(feed_tweets(
        d.tweet_feed,
        generator,
        cfg.tweet_rate,
        start,
        rx.clone(),
    ));
    let mut driver = tokio::spawn(drive_officers(
        d.location_feed.clone(),
        walk,
        Duration::from_millis(cfg.officer_interval_ms),
        rx,
    ));

    let mut aborted = None;
    let (mut sent, mut posts) = (None, None);
    while now_ms() < end {
        let nap = (end - now_ms()).clamp(1, p) as u64;
        tokio::select! {
            _ = tokio::time::sleep(Duration::from_millis(nap)) => {}
            r = &mut tweets => {
                let r = flatten(r);
                aborted = Some(format!("tweet stream stopped: {}", early(&r)));
                sent = Some(r);
                break;
            }
            r = &mut driver => {
                let r = flatten(r);
                aborted = Some(format!("officer driver stopped: {}", early(&r)));
                posts = Some(r);
                break;
            }
        }
        if let Err(e) = check_islands(t).await {
            aborted = Some(format!("island unreachable: {e}"));
            break;
        }
    }
    let _ = stop.send(true);
    let sent = match sent {
        Some(r) => r,
        None => flatten(tweets.await),
    };
    let posts = match posts {
        Some(r) => r,
        None => flatten(driver.await),
    };
    for e in [sent.as_ref().err(), posts.as_ref().err()]
        .into_iter()
        .flatten()
    {
        aborted.get_or_insert_with(|| e.to_string());
    }
    // deliveries of the last counted execution may still be on the wire
    tokio::time::sleep(Duration::from_millis(300)).await;
    t.wait_deliveries().await;

    Ok(RunLog {
        period: d.period,
        first_execution_ms: first,
        executions,
        tweets: sent.unwrap_or_default(),
        officer_posts: posts.unwrap_or_default(),
        officer_bodies: d.officers.take(),
        alert_bodies: d.alerts.take(),
        aborted,
    })
}

fn flatten<T>(r: std::result::Result<Result<T>, tokio::task::JoinError>) -> Result<T> {
    r.map_err(|e| Error::State(format!("workload task failed: {e}")))?
}

fn early<T>(r: &Result<T>) -> String {
    match r {
        Ok(_) => "finished early".into(),
        Err(e) => e.to_string(),
    }
}
