//! One island: catalog, channels, brokers and feeds behind a single
//! statement executor.
//!
//! [`Island::execute`] is the only way statements run. The HTTP control
//! plane in [`http`] calls it, and so does replay of the statement log on
//! open.

mod config;
pub mod http;
mod status;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Weak};
use std::time::Duration;

use indexmap::IndexMap;
use parking_lot::{Mutex, RwLock};
use serde_json::{json, Map, Value as Json};
use tokio::task::JoinHandle;
use uuid::Uuid;

use crate::adm::{object, to_general_json_value, Value};
use crate::broker::{BrokerHub, Payload, RetryPolicy};
use crate::channel::{Channel, Cut, Execution};
use crate::client::error_kind;
use crate::clock::now_ms;
use crate::ddl::{
    analyze_expr, analyze_query, parse_statements, DdlError, DeliveryMode, Expr, Query, Statement,
};
use crate::error::{Error, Result};
use crate::events::{insert_and_publish, EventBus};
use crate::feed::{FeedConfig, FeedRuntime};
use crate::query::{
    eval_expr, execute_query, is_builtin, CatalogSource, ExecutionContext, WordList,
};
use crate::storage::{
    BrokerDecl, Catalog, ChannelDef, FeedConnection, FeedDecl, StorageOptions, PULL_RESULTS,
};

pub use config::IslandConfig;

/// The dataverse statements run in before any `USE`.
pub const DEFAULT_DATAVERSE: &str = "Default";

/// One statement's outcome, as general JSON.
pub type Outcome = Map<String, Json>;

/// A script that stopped at a failing statement.
#[derive(Debug)]
pub struct ScriptError {
    /// Outcomes of the statements before the failing one.
    pub completed: Vec<Outcome>,
    /// Index of the failing statement; `None` when the script did not parse.
    pub statement: Option<usize>,
    pub error: Error,
}

impl ScriptError {
    pub fn is_syntax(&self) -> bool {
        self.statement.is_none()
    }

    /// The `error` member of an HTTP error body.
    pub fn to_json(&self) -> Json {
        let mut e = json!({
            "kind": error_kind(&self.error),
            "message": self.error.to_string(),
        });
        if let Error::Ddl(DdlError::Syntax { line, column, .. }) = &self.error {
            e["line"] = json!(line);
            e["column"] = json!(column);
        }
        if let Some(i) = self.statement {
            e["statement"] = json!(i);
        }
        e
    }
}

impl std::fmt::Display for ScriptError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.statement {
            Some(i) => write!(f, "statement {} failed: {}", i + 1, self.error),
            None => write!(f, "{}", self.error),
        }
    }
}

impl std::error::Error for ScriptError {}

struct ChannelSlot {
    channel: Arc<Channel>,
    timer: Option<JoinHandle<()>>,
}

type Key = (String, String);

pub(crate) struct Inner {
    config: IslandConfig,
    catalog: Arc<Catalog>,
    words: Arc<WordList>,
    events: EventBus,
    hub: BrokerHub,
    feeds: Arc<FeedRuntime>,
    channels: RwLock<IndexMap<Key, ChannelSlot>>,
    /// Serializes statements that change the catalog.
    exec: tokio::sync::Mutex<()>,
    http: Mutex<Option<(SocketAddr, JoinHandle<()>)>>,
    me: Weak<Inner>,
}

/// A handle to a running island; clones share it.
#[derive(Clone)]
pub struct Island {
    inner: Arc<Inner>,
}

fn outcome(stmt: &Statement) -> Outcome {
    let mut o = Map::new();
    o.insert("statement".into(), json!(stmt.kind()));
    o.insert("status".into(), json!("ok"));
    o
}

impl Island {
    /// Opens the island's storage and replays its statement log. Channel
    /// timers start here; feeds come back in [`Island::restore_feeds`].
    pub async fn open(config: IslandConfig) -> Result<Island> {
        let storage = StorageOptions {
            sync: config.sync,
            compact_min_entries: config.compact_min_entries,
        };
        let (catalog, replay) = Catalog::open(config.data_dir.as_deref(), storage)?;
        let catalog = Arc::new(catalog);
        let words = Arc::new(match &config.threat_word_list {
            Some(p) => WordList::from_file(p)?,
            None => WordList::default(),
        });
        let events = EventBus::default();
        let policy = RetryPolicy {
            backoff: config
                .retry_backoff_ms
                .iter()
                .map(|ms| Duration::from_millis(*ms))
                .collect(),
            request_timeout: Duration::from_millis(config.request_timeout_ms),
            queue_capacity: config.queue_capacity,
        };
        let hub = BrokerHub::new(
            policy,
            catalog.system_dataset(crate::storage::DEAD_LETTERS),
            events.clone(),
        );
        let feeds = FeedRuntime::new(
            &config.name,
            catalog.clone(),
            words.clone(),
            events.clone(),
            Duration::from_millis(config.reconcile_interval_ms),
        );
        let inner = Arc::new_cyclic(|me| Inner {
            config,
            catalog,
            words,
            events,
            hub,
            feeds,
            channels: RwLock::new(IndexMap::new()),
            exec: tokio::sync::Mutex::new(()),
            http: Mutex::new(None),
            me: me.clone(),
        });
        catalog_dataverse(&inner.catalog, DEFAULT_DATAVERSE);
        for (dv, stmt) in replay {
            let mut cur = dv.clone();
            catalog_dataverse(&inner.catalog, &dv);
            if let Err(e) = inner.run(&mut cur, &stmt, true).await {
                tracing::error!(dataverse = %dv, statement = stmt.kind(), error = %e, "replay failed");
            }
        }
        tracing::info!(island = %inner.config.name, "island open");
        Ok(Island { inner })
    }

    /// Opens the island, serves its control plane and restores its feeds.
    pub async fn start(config: IslandConfig) -> Result<Island> {
        let island = Island::open(config).await?;
        island.serve().await?;
        island.restore_feeds().await;
        Ok(island)
    }

    /// Binds the HTTP control plane on the configured host and port.
    pub async fn serve(&self) -> Result<SocketAddr> {
        if let Some((addr, _)) = &*self.inner.http.lock() {
            return Ok(*addr);
        }
        let bind = format!("{}:{}", self.inner.config.host, self.inner.config.port);
        let listener = tokio::net::TcpListener::bind(&bind)
            .await
            .map_err(|e| Error::State(format!("cannot listen on {bind}: {e}")))?;
        let addr = listener.local_addr()?;
        let app = http::router(self.clone());
        let task = tokio::spawn(async move {
            if let Err(e) = axum::serve(listener, app).await {
                tracing::error!(error = %e, "control plane stopped");
            }
        });
        *self.inner.http.lock() = Some((addr, task));
        tracing::info!(island = %self.inner.config.name, %addr, "control plane listening");
        Ok(addr)
    }

    /// Restarts feeds that were running before the last shutdown.
    pub async fn restore_feeds(&self) {
        self.inner.feeds.restore().await;
    }

    pub fn name(&self) -> &str {
        &self.inner.config.name
    }

    pub fn config(&self) -> &IslandConfig {
        &self.inner.config
    }

    /// The control-plane address, once serving.
    pub fn addr(&self) -> Option<SocketAddr> {
        self.inner.http.lock().as_ref().map(|(a, _)| *a)
    }

    /// `http://host:port` of the control plane, once serving.
    pub fn url(&self) -> Option<String> {
        self.addr().map(|a| format!("http://{a}"))
    }

    pub fn catalog(&self) -> &Catalog {
        &self.inner.catalog
    }

    pub fn events(&self) -> &EventBus {
        &self.inner.events
    }

    pub fn words(&self) -> &WordList {
        &self.inner.words
    }

    /// Runs a statement script, stopping at the first failure.
    pub async fn execute(&self, text: &str) -> std::result::Result<Vec<Outcome>, ScriptError> {
        let stmts = parse_statements(text).map_err(|e| ScriptError {
            completed: Vec::new(),
            statement: None,
            error: e.into(),
        })?;
        let mut dv = DEFAULT_DATAVERSE.to_owned();
        let mut done = Vec::with_capacity(stmts.len());
        for (i, s) in stmts.iter().enumerate() {
            match self.inner.run(&mut dv, s, false).await {
                Ok(o) => done.push(o),
                Err(error) => {
                    return Err(ScriptError {
                        completed: done,
                        statement: Some(i),
                        error,
                    })
                }
            }
        }
        Ok(done)
    }

    /// Runs a read-only script (`USE` plus queries) and returns the rows of
    /// its last query.
    pub fn query(&self, dataverse: &str, text: &str) -> Result<Vec<Value>> {
        let stmts = parse_statements(text)?;
        let mut dv = dataverse.to_owned();
        let mut rows = Vec::new();
        for s in &stmts {
            match s {
                Statement::Use { dataverse } => {
                    self.inner.catalog.read(dataverse, |_| ())?;
                    dv = dataverse.clone();
                }
                Statement::Query(q) => rows = self.inner.run_query(&dv, q)?,
                other => {
                    return Err(Error::State(format!(
                        "{} is not allowed in a query request",
                        other.kind()
                    )))
                }
            }
        }
        Ok(rows)
    }

    /// Runs one execution of a channel now and hands its envelopes to the
    /// brokers. Timers call the same path.
    pub async fn run_channel(&self, dataverse: &str, channel: &str) -> Result<Execution> {
        let ch = self.inner.channel(dataverse, channel)?;
        self.inner.execute_channel(&ch, None).await
    }

    pub fn channel(&self, dataverse: &str, channel: &str) -> Result<Arc<Channel>> {
        self.inner.channel(dataverse, channel)
    }

    /// Intake addresses of a running feed.
    pub fn feed_addrs(&self, dataverse: &str, feed: &str) -> Option<Vec<SocketAddr>> {
        self.inner.feeds.local_addrs(dataverse, feed)
    }

    pub fn broker_stats(
        &self,
        dataverse: &str,
        broker: &str,
    ) -> Option<crate::broker::BrokerStats> {
        self.inner.hub.stats(dataverse, broker)
    }

    /// Waits until every queued delivery has been attempted to completion.
    pub async fn wait_deliveries(&self) {
        self.inner.hub.wait_idle().await;
    }

    /// Fetches pull-mode results by handle.
    pub fn pull(&self, handle: &str) -> Result<Value> {
        self.inner.pull(handle)
    }

    pub fn status(&self) -> Json {
        status::status(&self.inner)
    }

    /// Stops timers, intakes, deliveries and the control plane. Persisted
    /// state is left as is, so a later open resumes from it.
    pub fn shutdown(&self) {
        for slot in self.inner.channels.write().values_mut() {
            if let Some(t) = slot.timer.take() {
                t.abort();
            }
        }
        self.inner.feeds.shutdown();
        self.inner.hub.shutdown();
        if let Some((_, t)) = self.inner.http.lock().take() {
            t.abort();
        }
    }
}

fn catalog_dataverse(catalog: &Catalog, dv: &str) {
    catalog.ensure_dataverse(dv);
}

fn channel_dir(catalog: &Catalog, dv: &str) -> Option<PathBuf> {
    catalog.dataverse_dir(dv).map(|d| d.join("channels"))
}

fn valid_endpoint(endpoint: &str) -> Result<()> {
    let u = url::Url::parse(endpoint)
        .map_err(|e| Error::catalog(format!("invalid broker endpoint `{endpoint}`: {e}")))?;
    if !matches!(u.scheme(), "http" | "https") || u.host_str().is_none() {
        return Err(Error::catalog(format!(
            "broker endpoint `{endpoint}` must be an absolute http URL"
        )));
    }
    Ok(())
}

impl Inner {
    fn channel(&self, dv: &str, name: &str) -> Result<Arc<Channel>> {
        self.channels
            .read()
            .get(&(dv.to_owned(), name.to_owned()))
            .map(|s| s.channel.clone())
            .ok_or_else(|| Error::NotFound(format!("channel {dv}.{name}")))
    }

    fn channels_in(&self, dv: &str) -> Vec<Arc<Channel>> {
        self.channels
            .read()
            .iter()
            .filter(|((d, _), _)| d == dv)
            .map(|(_, s)| s.channel.clone())
            .collect()
    }

    fn context<'a>(&'a self, src: &'a CatalogSource<'a>) -> ExecutionContext<'a> {
        ExecutionContext::new(src, &self.words, now_ms())
    }

    fn run_query(&self, dv: &str, q: &Query) -> Result<Vec<Value>> {
        let src = CatalogSource {
            catalog: &self.catalog,
            dataverse: dv,
        };
        execute_query(q, &self.context(&src), &[])
    }

    fn constant(&self, dv: &str, e: &Expr) -> Result<Value> {
        let src = CatalogSource {
            catalog: &self.catalog,
            dataverse: dv,
        };
        eval_expr(e, &self.context(&src), &[])?
            .ok_or_else(|| Error::eval("expression evaluated to missing"))
    }

    fn log(&self, replay: bool, dv: &str, kind: &str, name: &str, stmt: &Statement) -> Result<()> {
        if replay {
            Ok(())
        } else {
            self.catalog.log_statement(dv, kind, name, stmt)
        }
    }

    async fn run(&self, dv: &mut String, stmt: &Statement, replay: bool) -> Result<Outcome> {
        let mut out = outcome(stmt);
        // feed control talks to other islands; it must not hold the lock
        match stmt {
            Statement::StartFeed { feed } => {
                let st = self.feeds.start(dv, feed).await?;
                out.insert("feed".into(), serde_json::to_value(st).unwrap());
                return Ok(out);
            }
            Statement::StopFeed { feed } => {
                let st = self.feeds.stop(dv, feed).await?;
                out.insert("feed".into(), serde_json::to_value(st).unwrap());
                return Ok(out);
            }
            _ => {}
        }
        let _g = self.exec.lock().await;
        match stmt {
            Statement::Use { dataverse } => {
                self.catalog.ensure_dataverse(dataverse);
                *dv = dataverse.clone();
                out.insert("dataverse".into(), json!(dataverse));
            }
            Statement::CreateType(t) => {
                self.catalog.create_type(dv, t.clone())?;
                self.log(replay, dv, "type", &t.name, stmt)?;
            }
            Statement::CreateDataset(d) => {
                self.catalog.create_dataset(dv, d.clone())?;
                self.log(replay, dv, "dataset", &d.name, stmt)?;
            }
            Statement::CreateFunction(f) => {
                let info = analyze_expr(&f.body, &f.params)?;
                for ds in &info.datasets {
                    self.catalog.dataset(dv, ds)?;
                }
                self.catalog.create_function(dv, f.clone())?;
                self.log(replay, dv, "function", &f.name, stmt)?;
            }
            Statement::CreateFeed { name, config } => {
                FeedConfig::parse(config)?;
                self.catalog.create_feed(
                    dv,
                    FeedDecl {
                        name: name.clone(),
                        config: config.clone(),
                        connection: None,
                    },
                )?;
                self.log(replay, dv, "feed", name, stmt)?;
            }
            Statement::ConnectFeed {
                feed,
                dataset,
                function,
            } => {
                let cfg = FeedConfig::parse(&self.catalog.feed(dv, feed)?.config)?;
                if let Some(f) = function {
                    if !cfg.dynamic {
                        return Err(Error::catalog(format!(
                            "feed {feed} is static; APPLY FUNCTION needs \"dynamic\": true"
                        )));
                    }
                    let decl = self
                        .catalog
                        .function(dv, f)
                        .ok_or_else(|| Error::NotFound(format!("function {dv}.{f}")))?;
                    if decl.params.len() != 1 {
                        return Err(Error::catalog(format!(
                            "function {f} takes {} parameters; a feed function takes one",
                            decl.params.len()
                        )));
                    }
                }
                self.catalog.connect_feed(
                    dv,
                    feed,
                    FeedConnection {
                        dataset: dataset.clone(),
                        function: function.clone(),
                    },
                )?;
                self.log(replay, dv, "connect", feed, stmt)?;
            }
            Statement::StartFeed { .. } | Statement::StopFeed { .. } => unreachable!(),
            Statement::CreateBroker {
                name,
                endpoint,
                broker_type,
                options,
            } => {
                valid_endpoint(endpoint)?;
                let decl = BrokerDecl {
                    name: name.clone(),
                    endpoint: endpoint.clone(),
                    broker_type: *broker_type,
                    options: options.clone(),
                };
                self.catalog.create_broker(dv, decl.clone())?;
                if let Err(e) = self.hub.register(dv, decl) {
                    let _ = self.catalog.remove_broker(dv, name);
                    return Err(e);
                }
                self.log(replay, dv, "broker", name, stmt)?;
                out.insert("brokerType".into(), json!(broker_type.as_str()));
            }
            Statement::DropBroker { name } => {
                self.catalog.broker(dv, name)?;
                let users: Vec<String> = self
                    .channels_in(dv)
                    .iter()
                    .flat_map(|c| {
                        c.subscriptions()
                            .iter()
                            .filter(|s| &s.broker == name)
                            .map(|s| format!("{} on {}", s.id, c.name()))
                            .collect::<Vec<_>>()
                    })
                    .collect();
                if !users.is_empty() {
                    return Err(Error::State(format!(
                        "broker {name} is used by subscriptions {}",
                        users.join(", ")
                    )));
                }
                self.catalog.remove_broker(dv, name)?;
                self.hub.remove(dv, name)?;
                if !replay {
                    self.catalog.forget_statement(dv, "broker", name)?;
                }
            }
            Statement::CreateChannel(decl) => {
                let period = crate::adm::Duration::parse(&decl.period)?
                    .to_std()
                    .ok_or_else(|| {
                        Error::catalog(format!("channel period `{}` must be positive", decl.period))
                    })?;
                let period = self.config.channel_period().unwrap_or(period);
                let info = analyze_query(&decl.body, &decl.params)?;
                for ds in &info.datasets {
                    self.catalog.dataset(dv, ds)?;
                }
                for ds in &info.is_new_datasets {
                    if !self.catalog.dataset(dv, ds)?.is_active() {
                        return Err(Error::catalog(format!(
                            "is_new needs an ACTIVE dataset; {ds} is not active"
                        )));
                    }
                }
                for f in &info.calls {
                    if !is_builtin(f) && self.catalog.function(dv, f).is_none() {
                        return Err(Error::NotFound(format!("function {dv}.{f}")));
                    }
                }
                let def = self.catalog.create_channel(
                    dv,
                    ChannelDef {
                        decl: decl.clone(),
                        period_ms: period.as_millis() as u64,
                        info,
                    },
                )?;
                let dir = channel_dir(&self.catalog, dv);
                let ch = Arc::new(Channel::open(dv, def, &self.catalog, dir.as_deref())?);
                let timer = (!self.config.manual_channels).then(|| self.spawn_timer(ch.clone()));
                self.channels.write().insert(
                    (dv.clone(), decl.name.clone()),
                    ChannelSlot { channel: ch, timer },
                );
                self.log(replay, dv, "channel", &decl.name, stmt)?;
                out.insert("periodMs".into(), json!(period.as_millis() as u64));
            }
            Statement::Subscribe {
                channel,
                args,
                broker,
            } => {
                let ch = self.channel(dv, channel)?;
                self.catalog.broker(dv, broker)?;
                let args = args
                    .iter()
                    .map(|a| self.constant(dv, a))
                    .collect::<Result<Vec<_>>>()?;
                let id = ch.subscribe(args, broker)?;
                out.insert("subscriptionId".into(), json!(id.to_string()));
            }
            Statement::Unsubscribe {
                subscription_id,
                channel,
            } => {
                let id = Uuid::parse_str(subscription_id).map_err(|_| {
                    Error::Type(format!("`{subscription_id}` is not a subscription id"))
                })?;
                let candidates = match channel {
                    Some(c) => vec![self.channel(dv, c)?],
                    None => self.channels_in(dv),
                };
                let ch = candidates
                    .into_iter()
                    .find(|c| c.subscriptions().iter().any(|s| s.id == id))
                    .ok_or_else(|| Error::NotFound(format!("subscription {id}")))?;
                ch.unsubscribe(id)?;
                out.insert("subscriptionId".into(), json!(id.to_string()));
                out.insert("channel".into(), json!(ch.name()));
            }
            Statement::Insert { dataset, values } => {
                if dataset.starts_with("__") {
                    return Err(Error::catalog("system datasets are read-only"));
                }
                let ds = self.catalog.dataset(dv, dataset)?;
                let records = match self.constant(dv, values)? {
                    Value::Object(o) => vec![o],
                    Value::Array(items) => items
                        .into_iter()
                        .map(|v| match v {
                            Value::Object(o) => Ok(o),
                            other => Err(Error::Type(format!(
                                "inserted values must be objects, got {}",
                                other.tag().name()
                            ))),
                        })
                        .collect::<Result<_>>()?,
                    other => {
                        return Err(Error::Type(format!(
                            "inserted values must be objects, got {}",
                            other.tag().name()
                        )))
                    }
                };
                let stored = insert_and_publish(&ds, records, &self.events)?;
                out.insert("count".into(), json!(stored.len()));
                out.insert(
                    "seqnos".into(),
                    json!(stored.iter().map(|r| r.seqno).collect::<Vec<_>>()),
                );
            }
            Statement::Query(q) => {
                let rows = self.run_query(dv, q)?;
                out.insert(
                    "rows".into(),
                    Json::Array(rows.iter().map(to_general_json_value).collect()),
                );
            }
        }
        Ok(out)
    }

    fn spawn_timer(&self, ch: Arc<Channel>) -> JoinHandle<()> {
        let me = self.me.clone();
        tokio::spawn(async move {
            let period = ch.period();
            let mut iv = tokio::time::interval_at(next_boundary(period), period);
            iv.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Skip);
            loop {
                let due = iv.tick().await;
                let Some(inner) = me.upgrade() else { return };
                let late = due.elapsed();
                // commits after the boundary belong to the next tick, however late this one runs
                let boundary = round_to(now_ms() - late.as_millis() as i64, period);
                let cut = match ch.cut_before(&inner.catalog, boundary) {
                    Ok(c) => Some(c),
                    Err(e) => {
                        tracing::warn!(channel = ch.name(), error = %e, "channel datasets unavailable");
                        continue;
                    }
                };
                match inner.execute_channel(&ch, cut).await {
                    Ok(exec) => tracing::debug!(
                        channel = ch.name(),
                        index = exec.index,
                        late_ms = late.as_millis() as u64,
                        took_ms = due.elapsed().as_millis() as u64,
                        "channel executed"
                    ),
                    Err(e) => {
                        tracing::warn!(channel = ch.name(), error = %e, "channel execution failed")
                    }
                }
            }
        })
    }

    async fn execute_channel(&self, ch: &Arc<Channel>, cut: Option<Cut>) -> Result<Execution> {
        let (c, catalog, words) = (ch.clone(), self.catalog.clone(), self.words.clone());
        let now = now_ms();
        let exec = tokio::task::spawn_blocking(move || {
            c.execute_until(&catalog, &words, now, cut.as_ref())
        })
        .await
        .map_err(|e| Error::State(format!("channel execution panicked: {e}")))??;
        self.dispatch(ch, &exec);
        Ok(exec)
    }

    fn dispatch(&self, ch: &Channel, exec: &Execution) {
        let dv = ch.dataverse();
        for (broker, env) in &exec.envelopes {
            let payload = match ch.def().decl.mode {
                DeliveryMode::Push => Payload::Envelope(env.clone()),
                DeliveryMode::Pull => match self.store_pull(ch, broker, env) {
                    Ok(notice) => Payload::Notice(notice),
                    Err(e) => {
                        tracing::error!(channel = ch.name(), error = %e, "could not store pull results");
                        continue;
                    }
                },
            };
            if let Err(e) = self.hub.enqueue(dv, broker, payload) {
                tracing::warn!(channel = ch.name(), broker = %broker, error = %e, "envelope dropped");
            }
        }
    }

    fn store_pull(
        &self,
        ch: &Channel,
        broker: &str,
        env: &crate::channel::Envelope,
    ) -> Result<Value> {
        let now = now_ms();
        let ttl = ch.def().period_ms as i64 * i64::from(self.config.pull_ttl_periods);
        let handle = Uuid::new_v4();
        let body = env.to_value(now);
        let results = body
            .get("results")
            .cloned()
            .unwrap_or(Value::Array(Vec::new()));
        let rec = object([
            ("handle", Value::Uuid(handle)),
            ("dataverseName", Value::string(&env.dataverse)),
            ("channelName", Value::string(&env.channel)),
            ("channelExecutionEpochTime", Value::BigInt(env.epoch_ms)),
            ("broker", Value::string(broker)),
            ("expiresAt", Value::DateTime(now + ttl)),
            ("results", results),
        ]);
        self.catalog
            .system_dataset(PULL_RESULTS)
            .insert(vec![rec])?;
        Ok(Value::Object(object([
            ("dataverseName", Value::string(&env.dataverse)),
            ("channelName", Value::string(&env.channel)),
            ("channelExecutionEpochTime", Value::BigInt(env.epoch_ms)),
            ("handle", Value::Uuid(handle)),
        ])))
    }

    fn pull(&self, handle: &str) -> Result<Value> {
        let id = Uuid::parse_str(handle)
            .map_err(|_| Error::NotFound(format!("pull handle {handle}")))?;
        let rec = self
            .catalog
            .system_dataset(PULL_RESULTS)
            .get(&Value::Uuid(id))
            .ok_or_else(|| Error::NotFound(format!("pull handle {handle}")))?;
        let expires = rec.value.get("expiresAt").and_then(|v| match v {
            Value::DateTime(t) => Some(*t),
            _ => None,
        });
        if expires.is_some_and(|t| t < now_ms()) {
            return Err(Error::Gone(format!("pull handle {handle}")));
        }
        Ok((*rec.value).clone())
    }
}

impl Drop for Inner {
    fn drop(&mut self) {
        for slot in self.channels.get_mut().values_mut() {
            if let Some(t) = slot.timer.take() {
                t.abort();
            }
        }
        if let Some((_, t)) = self.http.get_mut().take() {
            t.abort();
        }
    }
}

/// The first wall-clock multiple of `period` after now, so channels with the
/// same period tick together on every island of one machine.
fn next_boundary(period: Duration) -> tokio::time::Instant {
    let p = period.as_millis().max(1) as i64;
    let wait = p - now_ms().rem_euclid(p);
    tokio::time::Instant::now() + Duration::from_millis(wait as u64)
}

/// `ms` rounded to the nearest multiple of `period`.
fn round_to(ms: i64, period: Duration) -> i64 {
    let p = period.as_millis().max(1) as i64;
    (ms + p / 2).div_euclid(p) * p
}
