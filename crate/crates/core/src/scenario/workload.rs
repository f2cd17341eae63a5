//! Seeded workloads: the tweet stream and the officer location updates.

use std::net::SocketAddr;
use std::time::Duration;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use tokio::io::AsyncWriteExt;
use tokio::sync::watch;

use super::scripts::{BUILDING_AREA, EVENT_CENTER, OFFICER_ZERO};
use crate::clock::now_ms;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Area {
    Oc,
    Uci,
}

impl Area {
    pub fn name(self) -> &'static str {
        match self {
            Area::Oc => "OC",
            Area::Uci => "UCI",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedTweet {
    pub tid: i64,
    pub uid: i64,
    /// Unique per tweet: ends with `#<tid>`.
    pub text: String,
    pub area: Area,
    pub coordinates: (f64, f64),
    pub created_at: i64,
    pub threatening: bool,
}

impl GeneratedTweet {
    /// One JSON line for the socket feed.
    pub fn to_line(&self) -> String {
        let mut line = json!({
            "tid": self.tid,
            "uid": self.uid,
            "text": self.text,
            "created_at": self.created_at,
            "coordinates": [self.coordinates.0, self.coordinates.1],
            "area_name": self.area.name(),
        })
        .to_string();
        line.push('\n');
        line
    }
}

const FILLER: &[&str] = &[
    "coffee", "traffic", "sunset", "library", "lecture", "parking", "weekend", "concert", "beach",
    "lunch", "surf", "finals", "bike", "rain", "game", "tacos",
];

/// Points of OC tweets lie within this distance of the event center.
const OC_SPREAD: f64 = 0.03;

pub struct TweetGenerator {
    rng: ChaCha8Rng,
    next_tid: i64,
    fraction: f64,
    words: Vec<String>,
    pair_first: Area,
}

impl TweetGenerator {
    /// `words` is the threatening vocabulary; filler words must not be in it.
    pub fn new(seed: u64, fraction: f64, words: Vec<String>) -> Self {
        TweetGenerator {
            rng: ChaCha8Rng::seed_from_u64(seed),
            next_tid: 0,
            fraction,
            words,
            pair_first: Area::Oc,
        }
    }

    /// Areas alternate in pairs: tids `2k` and `2k+1` cover both areas, in
    /// a seeded order, so neither area consistently leads within a channel
    /// period.
    pub fn next_tweet(&mut self, created_at: i64) -> GeneratedTweet {
        let tid = self.next_tid;
        self.next_tid += 1;
        if tid % 2 == 0 {
            self.pair_first = if self.rng.random_bool(0.5) {
                Area::Oc
            } else {
                Area::Uci
            };
        }
        let area = match (tid % 2 == 0, self.pair_first) {
            (true, a) => a,
            (false, Area::Oc) => Area::Uci,
            (false, Area::Uci) => Area::Oc,
        };
        let coordinates = match area {
            Area::Oc => {
                let r = OC_SPREAD * self.rng.random::<f64>().sqrt();
                let a = self.rng.random_range(0.0..std::f64::consts::TAU);
                (EVENT_CENTER.0 + r * a.cos(), EVENT_CENTER.1 + r * a.sin())
            }
            Area::Uci => {
                let ((x1, y1), (x2, y2)) = BUILDING_AREA;
                (self.rng.random_range(x1..x2), self.rng.random_range(y1..y2))
            }
        };
        let uid = self.rng.random_range(1..=100);
        let threatening = !self.words.is_empty() && self.rng.random_bool(self.fraction);
        let mut tokens: Vec<&str> = FILLER.choose_multiple(&mut self.rng, 4).copied().collect();
        if threatening {
            let n = self.rng.random_range(1..=3);
            for _ in 0..n {
                let w = self
                    .words
                    .choose(&mut self.rng)
                    .expect("nonempty word list");
                let at = self.rng.random_range(0..=tokens.len());
                tokens.insert(at, w);
            }
        }
        let text = format!("{} #{tid}", tokens.join(" "));
        GeneratedTweet {
            tid,
            uid,
            text,
            area,
            coordinates,
            created_at,
            threatening,
        }
    }
}

/// Writes tweets to a socket feed at `rate` per second, the first at
/// `start`, until `stop` turns true. Returns everything sent.
pub async fn feed_tweets(
    addr: SocketAddr,
    mut generator: TweetGenerator,
    rate: f64,
    start: tokio::time::Instant,
    mut stop: watch::Receiver<bool>,
) -> Result<Vec<GeneratedTweet>> {
    let mut stream = tokio::net::TcpStream::connect(addr).await?;
    stream.set_nodelay(true)?;
    let mut sent = Vec::new();
    let mut iv = tokio::time::interval_at(start, Duration::from_secs_f64(1.0 / rate));
    loop {
        tokio::select! {
            _ = iv.tick() => {}
            _ = stop.wait_for(|s| *s) => break,
        }
        let t = generator.next_tweet(now_ms());
        stream.write_all(t.to_line().as_bytes()).await?;
        sent.push(t);
    }
    stream.flush().await?;
    Ok(sent)
}

/// Officers random-walk inside a box around both tweet areas.
pub struct OfficerWalk {
    rng: ChaCha8Rng,
    positions: Vec<(f64, f64)>,
}

const OFFICER_BOX: ((f64, f64), (f64, f64)) = ((33.45, -118.05), (33.85, -117.65));
const OFFICER_STEP: f64 = 0.002;

impl OfficerWalk {
    pub fn new(seed: u64, officers: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x0ff1_ce75);
        let ((x1, y1), (x2, y2)) = OFFICER_BOX;
        let positions = (0..officers)
            .map(|i| {
                if i == 0 {
                    OFFICER_ZERO
                } else {
                    (rng.random_range(x1..x2), rng.random_range(y1..y2))
                }
            })
            .collect();
        OfficerWalk { rng, positions }
    }

    pub fn positions(&self) -> &[(f64, f64)] {
        &self.positions
    }

    pub fn step(&mut self) {
        let ((x1, y1), (x2, y2)) = OFFICER_BOX;
        for p in &mut self.positions {
            let dx = self.rng.random_range(-OFFICER_STEP..OFFICER_STEP);
            let dy = self.rng.random_range(-OFFICER_STEP..OFFICER_STEP);
            p.0 = (p.0 + dx).clamp(x1, x2);
            p.1 = (p.1 + dy).clamp(y1, y2);
        }
    }

    /// One JSON array with a record per officer.
    pub fn body(&self) -> String {
        serde_json::Value::Array(
            self.positions
                .iter()
                .enumerate()
                .map(|(oid, (x, y))| json!({ "oid": oid, "location": [x, y] }))
                .collect(),
        )
        .to_string()
    }
}

/// Posts every officer's location to the feed once per `every`, stepping
/// the walk in between, until `stop` turns true.
pub async fn drive_officers(
    url: String,
    mut walk: OfficerWalk,
    every: Duration,
    mut stop: watch::Receiver<bool>,
) -> Result<usize> {
    if walk.positions().is_empty() {
        return Ok(0);
    }
    let http = reqwest::Client::new();
    let mut posts = 0;
    let mut iv = tokio::time::interval(every);
    loop {
        tokio::select! {
            _ = iv.tick() => {}
            _ = stop.wait_for(|s| *s) => return Ok(posts),
        }
        let r = http
            .post(&url)
            .body(walk.body())
            .send()
            .await
            .map_err(|e| Error::Remote(format!("location feed {url}: {e}")))?;
        if !r.status().is_success() {
            return Err(Error::Remote(format!(
                "location feed {url} answered {}",
                r.status()
            )));
        }
        posts += 1;
        walk.step();
    }
}
