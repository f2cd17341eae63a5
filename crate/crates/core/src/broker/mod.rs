//! Broker registry and HTTP delivery.
//!
//! Every broker owns a bounded FIFO and one worker task, so a slow endpoint
//! only delays its own deliveries. A payload that still fails after the
//! retry schedule, or that is pushed out of a full queue, is written to the
//! `__dead_letters` dataset.

use std::collections::{HashMap, VecDeque};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use parking_lot::Mutex;
use serde::Serialize;
use tokio::sync::Notify;
use tokio::task::JoinHandle;

use crate::adm::{object, serialize_adm, to_general_json, to_general_json_value, Value};
use crate::channel::Envelope;
use crate::clock::now_ms;
use crate::ddl::BrokerType;
use crate::error::{Error, Result};
use crate::events::{EventBus, IslandEvent};
use crate::storage::{BrokerDecl, Dataset};

pub const ADM_CONTENT_TYPE: &str = "application/x-adm";
pub const JSON_CONTENT_TYPE: &str = "application/json";

#[derive(Debug, Clone)]
pub struct RetryPolicy {
    /// Pause before each retry; its length is the number of retries.
    pub backoff: Vec<Duration>,
    pub request_timeout: Duration,
    pub queue_capacity: usize,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            backoff: vec![
                Duration::from_millis(500),
                Duration::from_secs(1),
                Duration::from_secs(2),
            ],
            request_timeout: Duration::from_secs(5),
            queue_capacity: 1024,
        }
    }
}

/// What a broker is sent.
#[derive(Debug, Clone)]
pub enum Payload {
    Envelope(Envelope),
    /// Pull-mode notice pointing at stored results.
    Notice(Value),
}

impl Payload {
    /// The wire value at delivery time `now`.
    pub fn to_value(&self, now: i64) -> Value {
        match self {
            Payload::Envelope(e) => e.to_value(now),
            Payload::Notice(v) => v.clone(),
        }
    }

    fn channel(&self) -> String {
        match self {
            Payload::Envelope(e) => e.channel.clone(),
            Payload::Notice(v) => v
                .get("channelName")
                .and_then(Value::as_str)
                .unwrap_or_default()
                .to_owned(),
        }
    }
}

/// Encodes a body for a broker of type `ty`.
pub fn encode(ty: BrokerType, v: &Value) -> (&'static str, String) {
    match ty {
        BrokerType::Bad => (ADM_CONTENT_TYPE, serialize_adm(v)),
        BrokerType::General => (JSON_CONTENT_TYPE, to_general_json(v)),
    }
}

#[derive(Debug, Clone, Default, Serialize, PartialEq)]
pub struct BrokerStats {
    pub enqueued: u64,
    pub delivered: u64,
    pub retries: u64,
    pub dead_lettered: u64,
    pub queued: usize,
    pub last_error: Option<String>,
}

struct Shared {
    client: reqwest::Client,
    policy: RetryPolicy,
    dead_letters: Arc<Dataset>,
    events: EventBus,
}

impl Shared {
    fn dead_letter(
        &self,
        dv: &str,
        decl: &BrokerDecl,
        payload: &Payload,
        reason: &str,
        attempts: usize,
    ) {
        let rec = object([
            ("kind", Value::string("delivery")),
            ("dataverse", Value::string(dv)),
            ("broker", Value::string(&decl.name)),
            ("endpoint", Value::string(&decl.endpoint)),
            ("channel", Value::string(payload.channel())),
            ("reason", Value::string(reason)),
            ("attempts", Value::BigInt(attempts as i64)),
            ("failed_at", Value::DateTime(now_ms())),
            ("payload", payload.to_value(now_ms())),
        ]);
        if let Err(e) = self.dead_letters.insert(vec![rec]) {
            tracing::error!(broker = %decl.name, error = %e, "could not record dead letter");
        }
    }
}

struct Worker {
    dataverse: String,
    decl: BrokerDecl,
    queue: Mutex<VecDeque<Payload>>,
    in_flight: Mutex<Option<Payload>>,
    notify: Notify,
    closed: AtomicBool,
    stats: Mutex<BrokerStats>,
    task: Mutex<Option<JoinHandle<()>>>,
}

impl Worker {
    async fn run(self: Arc<Self>, shared: Arc<Shared>) {
        loop {
            let next = {
                let mut q = self.queue.lock();
                let p = q.pop_front();
                if let Some(p) = &p {
                    *self.in_flight.lock() = Some(p.clone());
                }
                p
            };
            let Some(payload) = next else {
                if self.closed.load(Ordering::Acquire) {
                    return;
                }
                self.notify.notified().await;
                continue;
            };
            self.deliver(&shared, &payload).await;
            *self.in_flight.lock() = None;
        }
    }

    async fn deliver(&self, shared: &Shared, payload: &Payload) {
        let attempts = shared.policy.backoff.len() + 1;
        let mut last_error = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                self.stats.lock().retries += 1;
                tokio::time::sleep(shared.policy.backoff[attempt - 1]).await;
            }
            let now = now_ms();
            let value = payload.to_value(now);
            let (content_type, body) = encode(self.decl.broker_type, &value);
            let sent = shared
                .client
                .post(&self.decl.endpoint)
                .header(reqwest::header::CONTENT_TYPE, content_type)
                .timeout(shared.policy.request_timeout)
                .body(body)
                .send()
                .await;
            match sent {
                Ok(resp) if resp.status().is_success() => {
                    {
                        let mut st = self.stats.lock();
                        st.delivered += 1;
                        st.last_error = None;
                    }
                    shared.events.publish(IslandEvent::Notification {
                        dataverse: self.dataverse.clone(),
                        channel: payload.channel(),
                        broker: self.decl.name.clone(),
                        delivered_ms: now,
                        body: to_general_json_value(&value),
                    });
                    return;
                }
                Ok(resp) => last_error = format!("HTTP {}", resp.status()),
                Err(e) => last_error = e.to_string(),
            }
            tracing::debug!(broker = %self.decl.name, attempt, error = %last_error, "delivery failed");
        }
        {
            let mut st = self.stats.lock();
            st.dead_lettered += 1;
            st.last_error = Some(last_error.clone());
        }
        shared.dead_letter(&self.dataverse, &self.decl, payload, &last_error, attempts);
    }
}

/// All brokers of one island.
pub struct BrokerHub {
    shared: Arc<Shared>,
    workers: Mutex<HashMap<(String, String), Arc<Worker>>>,
}

impl BrokerHub {
    pub fn new(policy: RetryPolicy, dead_letters: Arc<Dataset>, events: EventBus) -> Self {
        BrokerHub {
            shared: Arc::new(Shared {
                client: reqwest::Client::new(),
                policy,
                dead_letters,
                events,
            }),
            workers: Mutex::new(HashMap::new()),
        }
    }

    /// Starts the delivery worker for a broker. Must run inside a tokio
    /// runtime.
    pub fn register(&self, dataverse: &str, decl: BrokerDecl) -> Result<()> {
        let key = (dataverse.to_owned(), decl.name.clone());
        let mut workers = self.workers.lock();
        if workers.contains_key(&key) {
            return Err(Error::catalog(format!(
                "broker {} already exists",
                decl.name
            )));
        }
        let w = Arc::new(Worker {
            dataverse: dataverse.to_owned(),
            decl,
            queue: Mutex::new(VecDeque::new()),
            in_flight: Mutex::new(None),
            notify: Notify::new(),
            closed: AtomicBool::new(false),
            stats: Mutex::new(BrokerStats::default()),
            task: Mutex::new(None),
        });
        let handle = tokio::spawn(w.clone().run(self.shared.clone()));
        *w.task.lock() = Some(handle);
        workers.insert(key, w);
        Ok(())
    }

    /// Stops a broker's worker. Anything still queued or in flight is
    /// dead-lettered.
    pub fn remove(&self, dataverse: &str, name: &str) -> Result<()> {
        let w = self
            .workers
            .lock()
            .remove(&(dataverse.to_owned(), name.to_owned()))
            .ok_or_else(|| Error::NotFound(format!("broker {dataverse}.{name}")))?;
        w.closed.store(true, Ordering::Release);
        if let Some(t) = w.task.lock().take() {
            t.abort();
        }
        let mut pending: Vec<Payload> = w.in_flight.lock().take().into_iter().collect();
        pending.extend(w.queue.lock().drain(..));
        for p in pending {
            self.shared
                .dead_letter(dataverse, &w.decl, &p, "broker removed", 0);
        }
        Ok(())
    }

    /// Queues a payload. A full queue drops its oldest entry to the dead
    /// letters.
    pub fn enqueue(&self, dataverse: &str, broker: &str, payload: Payload) -> Result<()> {
        let w = self
            .workers
            .lock()
            .get(&(dataverse.to_owned(), broker.to_owned()))
            .cloned()
            .ok_or_else(|| Error::NotFound(format!("broker {dataverse}.{broker}")))?;
        let evicted = {
            let mut q = w.queue.lock();
            let evicted = if q.len() >= self.shared.policy.queue_capacity {
                q.pop_front()
            } else {
                None
            };
            q.push_back(payload);
            evicted
        };
        {
            let mut st = w.stats.lock();
            st.enqueued += 1;
            if evicted.is_some() {
                st.dead_lettered += 1;
            }
        }
        if let Some(old) = evicted {
            self.shared
                .dead_letter(dataverse, &w.decl, &old, "delivery queue overflow", 0);
        }
        w.notify.notify_one();
        Ok(())
    }

    pub fn stats(&self, dataverse: &str, broker: &str) -> Option<BrokerStats> {
        let w = self
            .workers
            .lock()
            .get(&(dataverse.to_owned(), broker.to_owned()))
            .cloned()?;
        let mut st = w.stats.lock().clone();
        st.queued = w.queue.lock().len() + usize::from(w.in_flight.lock().is_some());
        Some(st)
    }

    /// True when no broker has anything queued or in flight.
    pub fn is_idle(&self) -> bool {
        self.workers
            .lock()
            .values()
            .all(|w| w.queue.lock().is_empty() && w.in_flight.lock().is_none())
    }

    /// Waits until every queue has drained.
    pub async fn wait_idle(&self) {
        while !self.is_idle() {
            tokio::time::sleep(Duration::from_millis(5)).await;
        }
    }

    pub fn shutdown(&self) {
        for w in self.workers.lock().drain().map(|(_, w)| w) {
            w.closed.store(true, Ordering::Release);
            if let Some(t) = w.task.lock().take() {
                t.abort();
            }
        }
    }
}

impl Drop for BrokerHub {
    fn drop(&mut self) {
        self.shutdown();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ResultItem;
    use crate::storage::{Catalog, StorageOptions, DEAD_LETTERS};
    use axum::http::{HeaderMap, StatusCode};
    use axum::routing::post;

    type Seen = Arc<Mutex<Vec<(String, String)>>>;

    async fn sink(status: StatusCode) -> (String, Seen) {
        let seen: Seen = Arc::default();
        let s = seen.clone();
        let app = axum::Router::new().route(
            "/",
            post(move |headers: HeaderMap, body: String| {
                let s = s.clone();
                async move {
                    let ct = headers
                        .get("content-type")
                        .and_then(|v| v.to_str().ok())
                        .unwrap_or_default()
                        .to_owned();
                    s.lock().push((ct, body));
                    status
                }
            }),
        );
        let l = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let url = format!("http://{}/", l.local_addr().unwrap());
        tokio::spawn(async move { axum::serve(l, app).await.unwrap() });
        (url, seen)
    }

    fn hub(backoff_ms: u64, capacity: usize) -> (BrokerHub, Catalog) {
        let (cat, _) = Catalog::open(None, StorageOptions::default()).unwrap();
        let policy = RetryPolicy {
            backoff: vec![Duration::from_millis(backoff_ms); 3],
            request_timeout: Duration::from_secs(2),
            queue_capacity: capacity,
        };
        let hub = BrokerHub::new(
            policy,
            cat.system_dataset(DEAD_LETTERS),
            EventBus::default(),
        );
        (hub, cat)
    }

    fn decl(name: &str, url: &str, ty: BrokerType) -> BrokerDecl {
        BrokerDecl {
            name: name.into(),
            endpoint: url.into(),
            broker_type: ty,
            options: Default::default(),
        }
    }

    fn envelope(n: i64) -> Payload {
        Payload::Envelope(Envelope {
            dataverse: "dhs".into(),
            channel: "Alerts".into(),
            epoch_ms: 1_000 + n,
            results: vec![ResultItem {
                result: Value::Object(object([("n", Value::BigInt(n))])),
                subscription_id: uuid::Uuid::nil(),
            }],
        })
    }

    #[tokio::test]
    async fn delivers_in_order_with_format_by_type() {
        let (url, seen) = sink(StatusCode::OK).await;
        let (hub, _cat) = hub(10, 16);
        hub.register("dhs", decl("adm", &url, BrokerType::Bad))
            .unwrap();
        hub.register("dhs", decl("json", &url, BrokerType::General))
            .unwrap();
        for n in 0..5 {
            hub.enqueue("dhs", "adm", envelope(n)).unwrap();
        }
        hub.wait_idle().await;
        hub.enqueue("dhs", "json", envelope(9)).unwrap();
        hub.wait_idle().await;
        let seen = seen.lock().clone();
        assert_eq!(seen.len(), 6);
        for (n, (ct, body)) in seen[..5].iter().enumerate() {
            assert_eq!(ct, ADM_CONTENT_TYPE);
            let v = crate::adm::parse_adm_text(body).unwrap();
            let item = &v.get("results").and_then(Value::as_array).unwrap()[0];
            assert_eq!(
                item.get("result").and_then(|r| r.get("n")),
                Some(&Value::BigInt(n as i64))
            );
        }
        assert_eq!(seen[5].0, JSON_CONTENT_TYPE);
        let j: serde_json::Value = serde_json::from_str(&seen[5].1).unwrap();
        assert_eq!(j["results"][0]["result"]["n"], 9);
        assert_eq!(hub.stats("dhs", "adm").unwrap().delivered, 5);
    }

    #[tokio::test]
    async fn exhausted_retries_go_to_dead_letters() {
        let (url, seen) = sink(StatusCode::INTERNAL_SERVER_ERROR).await;
        let (hub, cat) = hub(5, 16);
        hub.register("dhs", decl("b", &url, BrokerType::Bad))
            .unwrap();
        hub.enqueue("dhs", "b", envelope(1)).unwrap();
        hub.wait_idle().await;
        assert_eq!(seen.lock().len(), 4);
        let st = hub.stats("dhs", "b").unwrap();
        assert_eq!((st.retries, st.dead_lettered, st.delivered), (3, 1, 0));
        let dl = cat.system_dataset(DEAD_LETTERS).snapshot();
        assert_eq!(dl.all().len(), 1);
        let rec = &dl.all()[0].value;
        assert_eq!(rec.get("broker").and_then(Value::as_str), Some("b"));
        assert_eq!(rec.get("attempts").and_then(Value::as_i64), Some(4));
    }

    #[tokio::test]
    async fn overflow_and_removal_dead_letter_pending_payloads() {
        let (hub, cat) = hub(200, 2);
        // nothing listens here
        hub.register("dhs", decl("b", "http://127.0.0.1:9/", BrokerType::Bad))
            .unwrap();
        for n in 0..4 {
            hub.enqueue("dhs", "b", envelope(n)).unwrap();
        }
        hub.remove("dhs", "b").unwrap();
        let dl = cat.system_dataset(DEAD_LETTERS).snapshot();
        assert_eq!(dl.all().len(), 4);
        assert!(hub.enqueue("dhs", "b", envelope(5)).is_err());
        assert!(hub.is_idle());
    }
}
