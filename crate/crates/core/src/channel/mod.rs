//! Continuous channels: subscriptions, watermarks and batched execution.
//!
//! One execution evaluates the channel body once per distinct argument list
//! against a fixed snapshot of every dataset the body reads, then groups the
//! rows by broker. Watermarks move to the snapshot seqnos only after the
//! whole evaluation succeeded, so a failed execution is retried in full by
//! the next one.

mod envelope;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use indexmap::IndexMap;
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use uuid::Uuid;

use crate::adm::{parse_adm_text, serialize_adm, Value};
use crate::error::{Error, Result};
use crate::query::{execute_query, CatalogSource, ExecutionContext, WordList};
use crate::storage::{read_json, write_json_atomically, Catalog, ChannelDef};

pub use envelope::{Envelope, ResultItem, ENVELOPE_FIELDS, RESULT_ITEM_FIELDS};

#[derive(Debug, Clone, PartialEq)]
pub struct Subscription {
    pub id: Uuid,
    pub args: Vec<Value>,
    pub broker: String,
}

/// Commit point per `is_new` dataset.
pub type Cut = IndexMap<String, u64>;

/// What one execution produced.
#[derive(Debug, Clone)]
pub struct Execution {
    /// 1-based count of completed executions of this channel.
    pub index: u64,
    pub epoch_ms: i64,
    /// `(dataset, prev, cur)` for every `is_new` dataset.
    pub windows: Vec<(String, u64, u64)>,
    /// One envelope per broker that has rows, in first-subscription order.
    pub envelopes: Vec<(String, Envelope)>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct PersistedSub {
    id: Uuid,
    /// ADM text of the argument array.
    args: String,
    broker: String,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct Persisted {
    subscriptions: Vec<PersistedSub>,
    watermarks: IndexMap<String, u64>,
    executions: u64,
}

#[derive(Debug, Clone)]
struct State {
    subscriptions: Arc<Vec<Subscription>>,
    watermarks: IndexMap<String, u64>,
    executions: u64,
}

impl State {
    fn persisted(&self) -> Persisted {
        Persisted {
            subscriptions: self
                .subscriptions
                .iter()
                .map(|s| PersistedSub {
                    id: s.id,
                    args: serialize_adm(&Value::Array(s.args.clone())),
                    broker: s.broker.clone(),
                })
                .collect(),
            watermarks: self.watermarks.clone(),
            executions: self.executions,
        }
    }
}

pub struct Channel {
    dataverse: String,
    def: Arc<ChannelDef>,
    state: Mutex<State>,
    /// Held for the duration of an execution.
    running: Mutex<()>,
    path: Option<PathBuf>,
}

impl std::fmt::Debug for Channel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Channel")
            .field("dataverse", &self.dataverse)
            .field("name", &self.def.decl.name)
            .finish()
    }
}

impl Channel {
    /// Loads the channel's persisted state from `dir`, or starts fresh with
    /// watermarks at the datasets' current seqnos so that records older than
    /// the channel are never reported.
    pub(crate) fn open(
        dataverse: &str,
        def: Arc<ChannelDef>,
        catalog: &Catalog,
        dir: Option<&Path>,
    ) -> Result<Channel> {
        let path = dir.map(|d| d.join(format!("{}.json", def.decl.name)));
        let loaded = match &path {
            Some(p) => read_json(p)?
                .map(serde_json::from_value::<Persisted>)
                .transpose()
                .map_err(|e| Error::catalog(format!("corrupt channel state: {e}")))?,
            None => None,
        };
        let state = match loaded {
            Some(p) => {
                let mut subs = Vec::with_capacity(p.subscriptions.len());
                for s in p.subscriptions {
                    let args = match parse_adm_text(&s.args)? {
                        Value::Array(a) => a,
                        _ => return Err(Error::catalog("corrupt subscription arguments")),
                    };
                    subs.push(Subscription {
                        id: s.id,
                        args,
                        broker: s.broker,
                    });
                }
                State {
                    subscriptions: Arc::new(subs),
                    watermarks: p.watermarks,
                    executions: p.executions,
                }
            }
            None => {
                let mut watermarks = IndexMap::new();
                for ds in &def.info.is_new_datasets {
                    watermarks.insert(ds.clone(), catalog.dataset(dataverse, ds)?.snapshot_seqno());
                }
                State {
                    subscriptions: Arc::new(Vec::new()),
                    watermarks,
                    executions: 0,
                }
            }
        };
        let ch = Channel {
            dataverse: dataverse.to_owned(),
            def,
            state: Mutex::new(state),
            running: Mutex::new(()),
            path,
        };
        ch.persist(&ch.state.lock())?;
        Ok(ch)
    }

    pub fn name(&self) -> &str {
        &self.def.decl.name
    }

    pub fn dataverse(&self) -> &str {
        &self.dataverse
    }

    pub fn def(&self) -> &ChannelDef {
        &self.def
    }

    pub fn period(&self) -> std::time::Duration {
        std::time::Duration::from_millis(self.def.period_ms)
    }

    fn persist(&self, st: &State) -> Result<()> {
        if let Some(p) = &self.path {
            let v = serde_json::to_value(st.persisted()).expect("channel state serializes");
            write_json_atomically(p, &v)?;
        }
        Ok(())
    }

    /// Adds a subscription; it takes part from the next execution on.
    pub fn subscribe(&self, args: Vec<Value>, broker: &str) -> Result<Uuid> {
        if args.len() != self.def.decl.params.len() {
            return Err(Error::catalog(format!(
                "channel {} takes {} argument{}, got {}",
                self.name(),
                self.def.decl.params.len(),
                if self.def.decl.params.len() == 1 {
                    ""
                } else {
                    "s"
                },
                args.len()
            )));
        }
        let id = Uuid::new_v4();
        let mut st = self.state.lock();
        let mut next = st.clone();
        let mut subs = (*next.subscriptions).clone();
        subs.push(Subscription {
            id,
            args,
            broker: broker.to_owned(),
        });
        next.subscriptions = Arc::new(subs);
        self.persist(&next)?;
        *st = next;
        Ok(id)
    }

    pub fn unsubscribe(&self, id: Uuid) -> Result<Subscription> {
        let mut st = self.state.lock();
        let Some(pos) = st.subscriptions.iter().position(|s| s.id == id) else {
            return Err(Error::NotFound(format!("subscription {id}")));
        };
        let mut next = st.clone();
        let mut subs = (*next.subscriptions).clone();
        let removed = subs.remove(pos);
        next.subscriptions = Arc::new(subs);
        self.persist(&next)?;
        *st = next;
        Ok(removed)
    }

    pub fn subscriptions(&self) -> Arc<Vec<Subscription>> {
        self.state.lock().subscriptions.clone()
    }

    pub fn watermarks(&self) -> IndexMap<String, u64> {
        self.state.lock().watermarks.clone()
    }

    pub fn executions(&self) -> u64 {
        self.state.lock().executions
    }

    /// Commit points of the `is_new` datasets right now.
    pub fn cut(&self, catalog: &Catalog) -> Result<Cut> {
        self.def
            .info
            .is_new_datasets
            .iter()
            .map(|ds| {
                Ok((
                    ds.clone(),
                    catalog.dataset(&self.dataverse, ds)?.snapshot_seqno(),
                ))
            })
            .collect()
    }

    /// Commit points of the `is_new` datasets as of wall time `ms`.
    pub fn cut_before(&self, catalog: &Catalog, ms: i64) -> Result<Cut> {
        self.def
            .info
            .is_new_datasets
            .iter()
            .map(|ds| {
                Ok((
                    ds.clone(),
                    catalog.dataset(&self.dataverse, ds)?.seqno_before(ms),
                ))
            })
            .collect()
    }

    /// Runs one execution at `now_ms`. Executions of one channel never
    /// overlap; a concurrent call waits for the running one.
    pub fn execute(&self, catalog: &Catalog, words: &WordList, now_ms: i64) -> Result<Execution> {
        self.execute_until(catalog, words, now_ms, None)
    }

    /// Like [`Channel::execute`], but records committed after `cut` stay
    /// new for the next execution.
    pub fn execute_until(
        &self,
        catalog: &Catalog,
        words: &WordList,
        now_ms: i64,
        cut: Option<&Cut>,
    ) -> Result<Execution> {
        let _running = self.running.lock();
        let (subs, prev_marks) = {
            let st = self.state.lock();
            (st.subscriptions.clone(), st.watermarks.clone())
        };
        let src = CatalogSource {
            catalog,
            dataverse: &self.dataverse,
        };
        let mut ctx = ExecutionContext::new(&src, words, now_ms);
        let mut windows = Vec::new();
        let mut snaps = Vec::new();
        for ds in &self.def.info.datasets {
            let snap = catalog.dataset(&self.dataverse, ds)?.snapshot();
            if self.def.info.is_new_datasets.contains(ds) {
                let high = cut
                    .and_then(|c| c.get(ds))
                    .map_or(snap.seqno, |&c| c.min(snap.seqno));
                let prev = prev_marks.get(ds).copied().unwrap_or(0).min(high);
                ctx = ctx.with_watermark(ds, prev, high);
                windows.push((ds.clone(), prev, high));
            }
            snaps.push((ds, snap));
        }
        for (ds, snap) in snaps {
            ctx.pin(ds, snap);
        }

        // subscriptions with equal arguments share one evaluation
        let mut groups: IndexMap<String, Vec<Uuid>> = IndexMap::new();
        for s in subs.iter() {
            let key = serialize_adm(&Value::Array(s.args.clone()));
            groups.entry(key).or_default().push(s.id);
        }
        let mut rows_by_sub: IndexMap<Uuid, usize> = IndexMap::new();
        let mut row_sets: Vec<Vec<Value>> = Vec::with_capacity(groups.len());
        for ids in groups.values() {
            let sub = subs
                .iter()
                .find(|s| s.id == ids[0])
                .expect("grouped id exists");
            let params: Vec<(&str, Value)> = self
                .def
                .decl
                .params
                .iter()
                .map(String::as_str)
                .zip(sub.args.iter().cloned())
                .collect();
            let rows = execute_query(&self.def.decl.body, &ctx, &params)?;
            for id in ids {
                rows_by_sub.insert(*id, row_sets.len());
            }
            row_sets.push(rows);
        }

        let mut envelopes: IndexMap<String, Envelope> = IndexMap::new();
        for s in subs.iter() {
            let rows = &row_sets[rows_by_sub[&s.id]];
            if rows.is_empty() {
                continue;
            }
            let env = envelopes
                .entry(s.broker.clone())
                .or_insert_with(|| Envelope {
                    dataverse: self.dataverse.clone(),
                    channel: self.def.decl.name.clone(),
                    epoch_ms: now_ms,
                    results: Vec::new(),
                });
            env.results.extend(rows.iter().map(|r| ResultItem {
                result: r.clone(),
                subscription_id: s.id,
            }));
        }

        let index = {
            let mut st = self.state.lock();
            let mut next = st.clone();
            for (ds, _, cur) in &windows {
                let w = next.watermarks.entry(ds.clone()).or_insert(0);
                *w = (*w).max(*cur);
            }
            next.executions += 1;
            self.persist(&next)?;
            *st = next;
            st.executions
        };
        Ok(Execution {
            index,
            epoch_ms: now_ms,
            windows,
            envelopes: envelopes.into_iter().collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adm::{object, Value};
    use crate::ddl::{analyze_query, parse_statements, Statement};
    use crate::storage::StorageOptions;

    fn setup(dir: Option<&Path>) -> (Catalog, Arc<ChannelDef>) {
        let (cat, _) = Catalog::open(dir, StorageOptions::default()).unwrap();
        cat.ensure_dataverse("dhs");
        let stmts = parse_statements(
            r#"CREATE TYPE Tweet AS { tid: bigint };
               CREATE ACTIVE DATASET Tweets(Tweet) PRIMARY KEY tid;
               CREATE CONTINUOUS PUSH CHANNEL At(area) PERIOD duration("PT1S") {
                 SELECT t.tid FROM Tweets t WHERE t.area = area AND is_new(t) };"#,
        )
        .unwrap();
        let mut def = None;
        for s in stmts {
            match s {
                Statement::CreateType(t) => cat.create_type("dhs", t).unwrap(),
                Statement::CreateDataset(d) => {
                    cat.create_dataset("dhs", d).unwrap();
                }
                Statement::CreateChannel(c) => {
                    let info = analyze_query(&c.body, &c.params).unwrap();
                    def = Some(Arc::new(ChannelDef {
                        decl: c,
                        period_ms: 1000,
                        info,
                    }));
                }
                _ => unreachable!(),
            }
        }
        (cat, def.unwrap())
    }

    fn tweet(tid: i64, area: &str) -> crate::adm::Object {
        object([("tid", Value::BigInt(tid)), ("area", Value::string(area))])
    }

    #[test]
    fn groups_by_broker_and_advances() {
        let (cat, def) = setup(None);
        let tweets = cat.dataset("dhs", "Tweets").unwrap();
        tweets.insert(vec![tweet(1, "UCI")]).unwrap();
        let ch = Channel::open("dhs", def, &cat, None).unwrap();
        assert_eq!(ch.watermarks()["Tweets"], 1);
        let oc = ch.subscribe(vec![Value::string("OC")], "ocsd").unwrap();
        let uci = ch.subscribe(vec![Value::string("UCI")], "ocsd").unwrap();
        let uci2 = ch.subscribe(vec![Value::string("UCI")], "uci").unwrap();
        assert!(ch.subscribe(vec![], "uci").is_err());

        tweets
            .insert(vec![tweet(2, "UCI"), tweet(3, "OC"), tweet(4, "LA")])
            .unwrap();
        let words = WordList::default();
        let ex = ch.execute(&cat, &words, 100).unwrap();
        assert_eq!(ex.windows, [("Tweets".to_string(), 1, 4)]);
        assert_eq!(ex.envelopes.len(), 2);
        let (b0, e0) = &ex.envelopes[0];
        assert_eq!(b0, "ocsd");
        let ids: Vec<Uuid> = e0.results.iter().map(|r| r.subscription_id).collect();
        assert_eq!(ids, [oc, uci]);
        let (b1, e1) = &ex.envelopes[1];
        assert_eq!(b1, "uci");
        assert_eq!(e1.results[0].subscription_id, uci2);
        assert_eq!(ch.watermarks()["Tweets"], 4);

        let ex = ch.execute(&cat, &words, 200).unwrap();
        assert!(ex.envelopes.is_empty());
        assert_eq!(ex.index, 2);
    }

    #[test]
    fn state_survives_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let chdir = dir.path().join("channels");
        let id = {
            let (cat, def) = setup(Some(dir.path()));
            let ch = Channel::open("dhs", def, &cat, Some(&chdir)).unwrap();
            let id = ch.subscribe(vec![Value::BigInt(7)], "b").unwrap();
            cat.dataset("dhs", "Tweets")
                .unwrap()
                .insert(vec![tweet(1, "x")])
                .unwrap();
            ch.execute(&cat, &WordList::default(), 1).unwrap();
            id
        };
        let (cat, def) = setup(Some(dir.path()));
        let ch = Channel::open("dhs", def, &cat, Some(&chdir)).unwrap();
        assert_eq!(ch.subscriptions()[0].id, id);
        assert_eq!(ch.subscriptions()[0].args, [Value::BigInt(7)]);
        assert_eq!(ch.watermarks()["Tweets"], 1);
        assert_eq!(ch.executions(), 1);
        ch.unsubscribe(id).unwrap();
        assert!(ch.unsubscribe(id).is_err());
    }
}
