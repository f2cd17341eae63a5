//! Ingestion feeds and bridges.
//!
//! A running feed owns its intake listeners. A bridge feed additionally holds
//! a broker and subscriptions on a remote island, created when the feed
//! starts and removed when it stops. Bridge state is written to
//! `<data>/<dataverse>/feeds/<feed>.json` after every remote step, so a
//! restarted island can find and clean up whatever it left behind.

mod config;
mod intake;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use tokio::task::JoinHandle;
use uuid::Uuid;

use crate::adm::{from_json, object, parse_adm_text, serialize_adm, Object, Value};
use crate::client::IslandClient;
use crate::clock::now_ms;
use crate::ddl::FunctionDecl;
use crate::error::{Error, Result};
use crate::events::{insert_and_publish, EventBus};
use crate::query::{apply_function, CatalogSource, ExecutionContext, WordList};
use crate::storage::{read_json, write_json_atomically, Catalog, Dataset, DEAD_LETTERS};

pub use config::{Adapter, BridgeConfig, FeedConfig, Format};
use intake::Intake;

/// Remote state a bridge feed holds on another island.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BridgeBinding {
    pub remote: String,
    pub dataverse: String,
    pub channel: String,
    pub broker: String,
    pub subscriptions: Vec<Uuid>,
    pub running: bool,
    /// A stop could not reach the remote island; cleanup is pending.
    pub dirty: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeedState {
    pub running: bool,
    /// Addresses the intake listened on when it last ran.
    pub bound: Vec<String>,
    pub binding: Option<BridgeBinding>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct IngestReport {
    pub stored: usize,
    pub rejected: usize,
}

/// Turns intake bytes into stored records.
pub(crate) struct Ingestor {
    catalog: Arc<Catalog>,
    dataverse: String,
    feed: String,
    dataset: Arc<Dataset>,
    function: Option<Arc<FunctionDecl>>,
    words: Arc<WordList>,
    events: EventBus,
    format: Format,
}

impl Ingestor {
    fn dead_letter(&self, reason: &str, input: Value) {
        let rec = object([
            ("kind", Value::string("ingest")),
            ("dataverse", Value::string(&self.dataverse)),
            ("feed", Value::string(&self.feed)),
            ("reason", Value::string(reason)),
            ("failed_at", Value::DateTime(now_ms())),
            ("input", input),
        ]);
        if let Err(e) = self.catalog.system_dataset(DEAD_LETTERS).insert(vec![rec]) {
            tracing::error!(feed = %self.feed, error = %e, "could not record dead letter");
        }
    }

    fn parse(&self, text: &str) -> Result<Vec<Object>> {
        let v = match self.format {
            Format::Json => {
                let j: serde_json::Value = serde_json::from_str(text)
                    .map_err(|e| Error::Type(format!("malformed JSON: {e}")))?;
                from_json(&j)?
            }
            Format::Adm => parse_adm_text(text)?,
        };
        match v {
            Value::Object(o) => Ok(vec![o]),
            Value::Array(items) => items
                .into_iter()
                .map(|i| match i {
                    Value::Object(o) => Ok(o),
                    other => Err(Error::Type(format!(
                        "feed records must be objects, got {}",
                        other.tag().name()
                    ))),
                })
                .collect(),
            other => Err(Error::Type(format!(
                "feed records must be objects, got {}",
                other.tag().name()
            ))),
        }
    }

    /// Parses one intake unit (a line or a request body) and stores its
    /// records. Unparseable input fails as a whole; records that the
    /// function or the dataset reject are dead-lettered one by one.
    pub(crate) fn ingest(&self, text: &str) -> Result<IngestReport> {
        let records = match self.parse(text) {
            Ok(r) => r,
            Err(e) => {
                self.dead_letter(&e.to_string(), Value::string(text));
                return Err(e);
            }
        };
        let mut report = IngestReport::default();
        let records = match &self.function {
            None => records,
            Some(f) => {
                let src = CatalogSource {
                    catalog: &self.catalog,
                    dataverse: &self.dataverse,
                };
                let mut out = Vec::with_capacity(records.len());
                for r in records {
                    let ctx = ExecutionContext::new(&src, &self.words, now_ms());
                    match apply_function(f, Value::Object(r.clone()), &ctx) {
                        Ok(Value::Object(o)) => out.push(o),
                        Ok(_) => unreachable!("apply_function returns objects"),
                        Err(e) => {
                            report.rejected += 1;
                            self.dead_letter(&e.to_string(), Value::Object(r));
                        }
                    }
                }
                out
            }
        };
        match insert_and_publish(&self.dataset, records.clone(), &self.events) {
            Ok(stored) => report.stored += stored.len(),
            Err(_) if records.len() > 1 => {
                for r in records {
                    match insert_and_publish(&self.dataset, vec![r.clone()], &self.events) {
                        Ok(_) => report.stored += 1,
                        Err(e) => {
                            report.rejected += 1;
                            self.dead_letter(&e.to_string(), Value::Object(r));
                        }
                    }
                }
            }
            Err(e) => {
                report.rejected += records.len();
                for r in records {
                    self.dead_letter(&e.to_string(), Value::Object(r));
                }
            }
        }
        Ok(report)
    }
}

/// Feed status as shown by `/status`.
#[derive(Debug, Clone, Serialize)]
pub struct FeedStatus {
    pub running: bool,
    pub addresses: Vec<String>,
    pub binding: Option<BridgeBinding>,
}

struct Running {
    intake: Intake,
}

type Key = (String, String);

/// Every feed of one island.
pub struct FeedRuntime {
    island: String,
    catalog: Arc<Catalog>,
    words: Arc<WordList>,
    events: EventBus,
    running: Mutex<HashMap<Key, Running>>,
    states: Mutex<HashMap<Key, FeedState>>,
    reconcilers: Mutex<HashMap<Key, JoinHandle<()>>>,
    /// Serializes start/stop so remote steps of one feed never interleave.
    control: tokio::sync::Mutex<()>,
    reconcile_every: Duration,
}

fn key(dv: &str, name: &str) -> Key {
    (dv.to_owned(), name.to_owned())
}

/// Deterministic name of the broker a bridge feed registers remotely.
pub fn bridge_broker_name(island: &str, feed: &str) -> String {
    let clean: String = island
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("bridge_{clean}_{feed}")
}

/// The URL peers use to reach an intake bound at `addr` for configured
/// host `host`.
fn advertised_url(host: &str, addr: SocketAddr) -> String {
    let host = match host {
        "" | "0.0.0.0" | "::" | "[::]" => "127.0.0.1",
        h => h,
    };
    format!("http://{host}:{}/", addr.port())
}

impl FeedRuntime {
    pub fn new(
        island: &str,
        catalog: Arc<Catalog>,
        words: Arc<WordList>,
        events: EventBus,
        reconcile_every: Duration,
    ) -> Arc<Self> {
        Arc::new(FeedRuntime {
            island: island.to_owned(),
            catalog,
            words,
            events,
            running: Mutex::new(HashMap::new()),
            states: Mutex::new(HashMap::new()),
            reconcilers: Mutex::new(HashMap::new()),
            control: tokio::sync::Mutex::new(()),
            reconcile_every,
        })
    }

    fn state_path(&self, dv: &str, name: &str) -> Option<PathBuf> {
        self.catalog
            .dataverse_dir(dv)
            .map(|d| d.join("feeds").join(format!("{name}.json")))
    }

    fn load_state(&self, dv: &str, name: &str) -> Result<FeedState> {
        if let Some(s) = self.states.lock().get(&key(dv, name)) {
            return Ok(s.clone());
        }
        let loaded = match self.state_path(dv, name) {
            Some(p) => read_json(&p)?
                .map(serde_json::from_value::<FeedState>)
                .transpose()
                .map_err(|e| Error::catalog(format!("corrupt feed state: {e}")))?,
            None => None,
        };
        Ok(loaded.unwrap_or_default())
    }

    fn save_state(&self, dv: &str, name: &str, st: &FeedState) -> Result<()> {
        self.states.lock().insert(key(dv, name), st.clone());
        if let Some(p) = self.state_path(dv, name) {
            let v = serde_json::to_value(st).expect("feed state serializes");
            write_json_atomically(&p, &v)?;
        }
        Ok(())
    }

    pub fn is_running(&self, dv: &str, name: &str) -> bool {
        self.running.lock().contains_key(&key(dv, name))
    }

    /// Actual intake addresses of a running feed.
    pub fn local_addrs(&self, dv: &str, name: &str) -> Option<Vec<SocketAddr>> {
        self.running
            .lock()
            .get(&key(dv, name))
            .map(|r| r.intake.addrs().to_vec())
    }

    pub fn status(&self, dv: &str, name: &str) -> FeedStatus {
        let st = self.load_state(dv, name).unwrap_or_default();
        let addresses = self
            .local_addrs(dv, name)
            .map(|a| a.iter().map(ToString::to_string).collect())
            .unwrap_or_default();
        FeedStatus {
            running: self.is_running(dv, name),
            addresses,
            binding: st.binding,
        }
    }

    fn ingestor(&self, dv: &str, name: &str, cfg: &FeedConfig) -> Result<Arc<Ingestor>> {
        let decl = self.catalog.feed(dv, name)?;
        let conn = decl
            .connection
            .ok_or_else(|| Error::State(format!("feed {name} is not connected to a dataset")))?;
        let function = match &conn.function {
            Some(f) => Some(
                self.catalog
                    .function(dv, f)
                    .ok_or_else(|| Error::NotFound(format!("function {dv}.{f}")))?,
            ),
            None => None,
        };
        Ok(Arc::new(Ingestor {
            catalog: self.catalog.clone(),
            dataverse: dv.to_owned(),
            feed: name.to_owned(),
            dataset: self.catalog.dataset(dv, &conn.dataset)?,
            function,
            words: self.words.clone(),
            events: self.events.clone(),
            format: cfg.format,
        }))
    }

    /// Opens the intake and, for a bridge feed, registers on the remote
    /// island. Nothing is left behind when it fails.
    pub async fn start(self: &Arc<Self>, dv: &str, name: &str) -> Result<FeedStatus> {
        let _g = self.control.lock().await;
        if self.is_running(dv, name) {
            return Err(Error::State(format!("feed {name} is already running")));
        }
        let decl = self.catalog.feed(dv, name)?;
        let cfg = FeedConfig::parse(&decl.config)?;
        let ingestor = self.ingestor(dv, name, &cfg)?;
        if let Some(t) = self.reconcilers.lock().remove(&key(dv, name)) {
            t.abort();
        }
        let mut st = self.load_state(dv, name)?;

        // reuse the ports of the previous run where the config left it open
        let wanted: Vec<String> = cfg
            .addresses
            .iter()
            .enumerate()
            .map(|(i, a)| match (a.rsplit_once(':'), st.bound.get(i)) {
                (Some((host, "0")), Some(prev)) => match prev.rsplit_once(':') {
                    Some((_, port)) => format!("{host}:{port}"),
                    None => a.clone(),
                },
                _ => a.clone(),
            })
            .collect();
        let intake = match Intake::open(cfg.adapter, &wanted, ingestor.clone()).await {
            Ok(i) => i,
            Err(_) if wanted != cfg.addresses => {
                Intake::open(cfg.adapter, &cfg.addresses, ingestor).await?
            }
            Err(e) => return Err(e),
        };
        st.bound = intake.addrs().iter().map(ToString::to_string).collect();

        if let Some(b) = &cfg.bridge {
            let host = cfg.addresses[0]
                .rsplit_once(':')
                .map(|(h, _)| h)
                .unwrap_or("");
            let endpoint = advertised_url(host, intake.addrs()[0]);
            let mut binding = st.binding.clone().unwrap_or_default();
            binding.remote = b.host.clone();
            binding.dataverse = b.dataverse.clone();
            binding.channel = b.channel.clone();
            binding.broker = bridge_broker_name(&self.island, name);
            if let Err(e) = self
                .establish(dv, name, &mut st, binding, b, &endpoint)
                .await
            {
                intake.close();
                return Err(e);
            }
        }
        st.running = true;
        self.save_state(dv, name, &st)?;
        self.running
            .lock()
            .insert(key(dv, name), Running { intake });
        tracing::info!(dataverse = dv, feed = name, "feed started");
        Ok(self.status(dv, name))
    }

    async fn establish(
        &self,
        dv: &str,
        name: &str,
        st: &mut FeedState,
        mut binding: BridgeBinding,
        cfg: &BridgeConfig,
        endpoint: &str,
    ) -> Result<()> {
        let remote = IslandClient::new(&binding.remote);
        // clear out anything an earlier run left on the remote side
        teardown(&remote, &mut binding).await?;
        st.binding = Some(binding.clone());
        self.save_state(dv, name, st)?;

        let result: Result<()> = async {
            remote
                .execute(&format!(
                    "USE {}; CREATE BROKER {} AT \"{}\" WITH {{\"broker-type\": \"BAD\"}};",
                    binding.dataverse, binding.broker, endpoint
                ))
                .await?;
            for args in &cfg.parameters {
                let args: Vec<String> = args.iter().map(serialize_adm).collect();
                let out = remote
                    .execute(&format!(
                        "USE {}; SUBSCRIBE TO {}({}) ON {};",
                        binding.dataverse,
                        binding.channel,
                        args.join(", "),
                        binding.broker
                    ))
                    .await?;
                let id = out
                    .iter()
                    .find_map(|o| o.get("subscriptionId").and_then(|v| v.as_str()))
                    .and_then(|s| Uuid::parse_str(s).ok())
                    .ok_or_else(|| Error::Remote("SUBSCRIBE returned no subscription id".into()))?;
                binding.subscriptions.push(id);
                st.binding = Some(binding.clone());
                self.save_state(dv, name, st)?;
            }
            Ok(())
        }
        .await;

        match result {
            Ok(()) => {
                binding.running = true;
                binding.dirty = false;
                st.binding = Some(binding);
                Ok(())
            }
            Err(e) => {
                tracing::warn!(feed = name, error = %e, "bridge start failed, rolling back");
                if teardown(&remote, &mut binding).await.is_err() {
                    binding.dirty = true;
                }
                st.binding = Some(binding);
                st.running = false;
                self.save_state(dv, name, st)?;
                Err(e)
            }
        }
    }

    /// Closes the intake and tears down a bridge. A remote that cannot be
    /// reached does not fail the stop; the cleanup is retried in the
    /// background.
    pub async fn stop(self: &Arc<Self>, dv: &str, name: &str) -> Result<FeedStatus> {
        let _g = self.control.lock().await;
        let running = self
            .running
            .lock()
            .remove(&key(dv, name))
            .ok_or_else(|| Error::State(format!("feed {name} is not running")))?;
        running.intake.close();
        let mut st = self.load_state(dv, name)?;
        st.running = false;
        if let Some(mut b) = st.binding.take() {
            let remote = IslandClient::new(&b.remote);
            match teardown(&remote, &mut b).await {
                Ok(()) => b.dirty = false,
                Err(e) => {
                    tracing::warn!(feed = name, error = %e, "bridge cleanup deferred");
                    b.dirty = true;
                }
            }
            b.running = false;
            let dirty = b.dirty;
            st.binding = Some(b);
            self.save_state(dv, name, &st)?;
            if dirty {
                self.spawn_reconciler(dv, name);
            }
        } else {
            self.save_state(dv, name, &st)?;
        }
        tracing::info!(dataverse = dv, feed = name, "feed stopped");
        Ok(self.status(dv, name))
    }

    fn spawn_reconciler(self: &Arc<Self>, dv: &str, name: &str) {
        let this = Arc::clone(self);
        let (dv_s, name_s) = (dv.to_owned(), name.to_owned());
        let task = tokio::spawn(async move {
            loop {
                tokio::time::sleep(this.reconcile_every).await;
                let _g = this.control.lock().await;
                if this.is_running(&dv_s, &name_s) {
                    return;
                }
                let Ok(mut st) = this.load_state(&dv_s, &name_s) else {
                    return;
                };
                let Some(mut b) = st.binding.take() else {
                    return;
                };
                let remote = IslandClient::new(&b.remote);
                if teardown(&remote, &mut b).await.is_ok() {
                    b.dirty = false;
                    st.binding = Some(b);
                    let _ = this.save_state(&dv_s, &name_s, &st);
                    tracing::info!(feed = %name_s, "bridge cleanup completed");
                    return;
                }
            }
        });
        if let Some(old) = self.reconcilers.lock().insert(key(dv, name), task) {
            old.abort();
        }
    }

    /// Restarts the feeds that were running when the island last stopped,
    /// and resumes pending bridge cleanups.
    pub async fn restore(self: &Arc<Self>) {
        for dv in self.catalog.dataverse_names() {
            let feeds: Vec<String> = self
                .catalog
                .read(&dv, |d| d.feeds.keys().cloned().collect())
                .unwrap_or_default();
            for f in feeds {
                let st = match self.load_state(&dv, &f) {
                    Ok(s) => s,
                    Err(e) => {
                        tracing::error!(feed = %f, error = %e, "unreadable feed state");
                        continue;
                    }
                };
                if st.running {
                    if let Err(e) = self.start(&dv, &f).await {
                        tracing::error!(dataverse = %dv, feed = %f, error = %e, "feed restart failed");
                    }
                } else if st.binding.as_ref().is_some_and(|b| b.dirty) {
                    self.spawn_reconciler(&dv, &f);
                }
            }
        }
    }

    /// Closes every intake without touching remote state, so a later
    /// restore brings the same feeds back.
    pub fn shutdown(&self) {
        for (_, r) in self.running.lock().drain() {
            r.intake.close();
        }
        for (_, t) in self.reconcilers.lock().drain() {
            t.abort();
        }
    }
}

impl Drop for FeedRuntime {
    fn drop(&mut self) {
        self.shutdown();
    }
}

/// Removes every subscription on the binding's broker, then the broker.
/// Works from the remote's own status, so it also catches subscriptions
/// whose ids never made it into the binding.
async fn teardown(remote: &IslandClient, b: &mut BridgeBinding) -> Result<()> {
    let status = remote.status().await?;
    let dv = &status["dataverses"][&b.dataverse];
    let mut ids: Vec<(String, String)> = Vec::new();
    if let Some(channels) = dv["channels"].as_object() {
        for (ch, info) in channels {
            for s in info["subscriptions"].as_array().into_iter().flatten() {
                if s["broker"].as_str() == Some(&b.broker) {
                    if let Some(id) = s["id"].as_str() {
                        ids.push((ch.clone(), id.to_owned()));
                    }
                }
            }
        }
    }
    for (ch, id) in ids {
        match remote
            .execute(&format!(
                "USE {}; UNSUBSCRIBE \"{id}\" FROM {ch};",
                b.dataverse
            ))
            .await
        {
            Ok(_) | Err(Error::NotFound(_)) => {}
            Err(e) => return Err(e),
        }
        b.subscriptions.retain(|s| s.to_string() != id);
    }
    b.subscriptions.clear();
    if dv["brokers"].get(&b.broker).is_some() {
        match remote
            .execute(&format!("USE {}; DROP BROKER {};", b.dataverse, b.broker))
            .await
        {
            Ok(_) | Err(Error::NotFound(_)) => {}
            Err(e) => return Err(e),
        }
    }
    b.running = false;
    Ok(())
}

#[cfg(test)]
mod tests;
