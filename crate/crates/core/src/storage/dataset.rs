use std::collections::{BTreeMap, HashMap, VecDeque};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};

use super::wal::{ReplayOp, Wal, WalEntry};
use super::StorageOptions;
use crate::adm::{serialize_adm, Object, Point, Rectangle, Tag, Value};
use crate::clock::now_ms;
use crate::ddl::{DatasetDecl, TypeDef};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRecord {
    pub seqno: u64,
    pub value: Arc<Value>,
}

/// The records of a dataset as of one committed seqno.
#[derive(Debug, Clone)]
pub struct DatasetSnapshot {
    pub seqno: u64,
    records: Arc<Vec<DatasetRecord>>,
}

impl DatasetSnapshot {
    pub fn all(&self) -> &[DatasetRecord] {
        &self.records
    }

    /// Records with `low < seqno <= high`.
    pub fn range(&self, low: u64, high: u64) -> &[DatasetRecord] {
        let start = self.records.partition_point(|r| r.seqno <= low);
        let end = self.records.partition_point(|r| r.seqno <= high);
        &self.records[start..end.max(start)]
    }
}

struct State {
    records: BTreeMap<u64, DatasetRecord>,
    keys: HashMap<String, u64>,
    next: u64,
}

/// One dataset: an in-memory table ordered by seqno, a primary-key index and
/// an optional write-ahead log.
pub struct Dataset {
    dataverse: String,
    decl: DatasetDecl,
    ty: TypeDef,
    writer: Mutex<Option<Wal>>,
    state: RwLock<State>,
    committed: AtomicU64,
    /// `(first seqno, last seqno, wall ms)` of recent batches, oldest first.
    commits: Mutex<VecDeque<(u64, u64, i64)>>,
    compact_min_entries: u64,
}

/// Batches remembered for [`Dataset::seqno_before`].
const COMMIT_HISTORY: usize = 4096;

impl std::fmt::Debug for Dataset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Dataset")
            .field("dataverse", &self.dataverse)
            .field("name", &self.decl.name)
            .field("seqno", &self.snapshot_seqno())
            .finish()
    }
}

fn key_string(values: &[&Value]) -> String {
    match values {
        [one] => serialize_adm(one),
        many => serialize_adm(&Value::Array(many.iter().map(|v| (*v).clone()).collect())),
    }
}

/// Coerces a plain-JSON rendering of a typed scalar back into that type.
fn coerce(v: Value, tag: Tag) -> std::result::Result<Value, Value> {
    match (tag, v) {
        (t, v) if v.tag() == t => Ok(v),
        (Tag::Double, Value::BigInt(n)) => Ok(Value::Double(n as f64)),
        (Tag::Datetime, Value::String(s)) => crate::adm::parse_datetime(&s)
            .map(Value::DateTime)
            .map_err(|_| Value::String(s)),
        (Tag::Duration, Value::String(s)) => crate::adm::Duration::parse(&s)
            .map(Value::Duration)
            .map_err(|_| Value::String(s)),
        (Tag::Uuid, Value::String(s)) => uuid::Uuid::parse_str(&s)
            .map(Value::Uuid)
            .map_err(|_| Value::String(s)),
        (Tag::Point, Value::Array(items)) => match items.as_slice() {
            [x, y] => match (x.as_f64(), y.as_f64()) {
                (Some(x), Some(y)) if x.is_finite() && y.is_finite() => {
                    Ok(Value::Point(Point::new(x, y)))
                }
                _ => Err(Value::Array(items)),
            },
            _ => Err(Value::Array(items)),
        },
        (Tag::Rectangle, Value::Array(items)) => {
            let nums: Vec<f64> = items.iter().filter_map(Value::as_f64).collect();
            if nums.len() == 4 && items.len() == 4 && nums.iter().all(|n| n.is_finite()) {
                Ok(Value::Rectangle(Rectangle::from_corners(
                    Point::new(nums[0], nums[1]),
                    Point::new(nums[2], nums[3]),
                )))
            } else {
                Err(Value::Array(items))
            }
        }
        (_, v) => Err(v),
    }
}

impl Dataset {
    pub(crate) fn open(
        dataverse: &str,
        decl: DatasetDecl,
        ty: TypeDef,
        dir: Option<&Path>,
        options: &StorageOptions,
    ) -> Result<Dataset> {
        for k in &decl.primary_key {
            if ty.field(k).is_none() {
                return Err(Error::catalog(format!(
                    "primary key field `{k}` is not declared in type {}",
                    ty.name
                )));
            }
        }
        if decl.autogenerated {
            let [k] = decl.primary_key.as_slice() else {
                return Err(Error::catalog(
                    "an AUTOGENERATED key must be a single field",
                ));
            };
            if ty.field(k).map(|f| f.tag) != Some(Tag::Uuid) {
                return Err(Error::catalog(format!(
                    "AUTOGENERATED key `{k}` must be declared as uuid"
                )));
            }
        }
        let mut ds = Dataset {
            dataverse: dataverse.to_owned(),
            decl,
            ty,
            writer: Mutex::new(None),
            state: RwLock::new(State {
                records: BTreeMap::new(),
                keys: HashMap::new(),
                next: 1,
            }),
            committed: AtomicU64::new(0),
            commits: Mutex::new(VecDeque::new()),
            compact_min_entries: options.compact_min_entries,
        };
        if let Some(dir) = dir {
            let (wal, recovered) = Wal::open(dir, &ds.decl.name, options.sync)?;
            if recovered.truncated_bytes > 0 {
                tracing::warn!(
                    dataset = %ds.decl.name,
                    bytes = recovered.truncated_bytes,
                    "dropped torn tail of write-ahead log"
                );
            }
            {
                let mut guard = ds.state.write();
                let st = &mut *guard;
                for op in recovered.ops {
                    match op {
                        ReplayOp::Put { seqno, value } => {
                            let key = ds.key_of(&value)?;
                            if let Some(old) = st.keys.insert(key, seqno) {
                                st.records.remove(&old);
                            }
                            st.records.insert(
                                seqno,
                                DatasetRecord {
                                    seqno,
                                    value: Arc::new(value),
                                },
                            );
                        }
                        ReplayOp::Delete { key } => {
                            if let Some(old) = st.keys.remove(&serialize_adm(&key)) {
                                st.records.remove(&old);
                            }
                        }
                    }
                }
                st.next = recovered.high_seqno + 1;
            }
            ds.committed.store(recovered.high_seqno, Ordering::Release);
            *ds.writer.get_mut() = Some(wal);
        }
        Ok(ds)
    }

    pub fn name(&self) -> &str {
        &self.decl.name
    }

    pub fn dataverse(&self) -> &str {
        &self.dataverse
    }

    pub fn decl(&self) -> &DatasetDecl {
        &self.decl
    }

    pub fn type_def(&self) -> &TypeDef {
        &self.ty
    }

    pub fn is_active(&self) -> bool {
        self.decl.active
    }

    pub fn len(&self) -> usize {
        self.state.read().records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Highest committed seqno; 0 for a dataset that never saw an insert.
    pub fn snapshot_seqno(&self) -> u64 {
        self.committed.load(Ordering::Acquire)
    }

    pub fn snapshot(&self) -> DatasetSnapshot {
        let st = self.state.read();
        DatasetSnapshot {
            seqno: self.committed.load(Ordering::Acquire),
            records: Arc::new(st.records.values().cloned().collect()),
        }
    }

    /// Highest seqno committed strictly before wall time `ms`. Batches older
    /// than the remembered history, including recovered ones, count as early.
    pub fn seqno_before(&self, ms: i64) -> u64 {
        let log = self.commits.lock();
        let committed = self.snapshot_seqno();
        let Some(&(first, _, _)) = log.front() else {
            return committed;
        };
        match log.iter().rposition(|&(_, _, at)| at < ms) {
            Some(i) => log[i].1,
            None => first - 1,
        }
    }

    /// Records with `low < seqno <= high`, or all records.
    pub fn scan(&self, range: Option<(u64, u64)>) -> Vec<DatasetRecord> {
        let st = self.state.read();
        match range {
            None => st.records.values().cloned().collect(),
            Some((low, high)) if low < high => st
                .records
                .range(low + 1..=high)
                .map(|(_, r)| r.clone())
                .collect(),
            Some(_) => Vec::new(),
        }
    }

    pub fn get(&self, key: &Value) -> Option<DatasetRecord> {
        let st = self.state.read();
        let seqno = st.keys.get(&serialize_adm(key))?;
        st.records.get(seqno).cloned()
    }

    fn key_values<'v>(&self, obj: &'v Object) -> Result<Vec<&'v Value>> {
        self.decl
            .primary_key
            .iter()
            .map(|k| match obj.get(k) {
                Some(Value::Null) | None => Err(Error::Type(format!(
                    "record for {} lacks primary key field `{k}`",
                    self.decl.name
                ))),
                Some(v) => Ok(v),
            })
            .collect()
    }

    fn key_of(&self, v: &Value) -> Result<String> {
        let obj = v
            .as_object()
            .ok_or_else(|| Error::Type(format!("{} records must be objects", self.decl.name)))?;
        Ok(key_string(&self.key_values(obj)?))
    }

    /// Checks a record against the declared type, filling an autogenerated
    /// key and coercing plain-JSON renderings of declared typed fields.
    fn prepare(&self, mut obj: Object) -> Result<(String, Value)> {
        if self.decl.autogenerated {
            let k = &self.decl.primary_key[0];
            if matches!(obj.get(k), None | Some(Value::Null)) {
                obj.insert(k.clone(), Value::Uuid(uuid::Uuid::new_v4()));
            }
        }
        for f in &self.ty.fields {
            let Some(v) = obj.get_mut(&f.name) else {
                if f.optional {
                    continue;
                }
                return Err(Error::Type(format!(
                    "{} record is missing required field `{}`",
                    self.decl.name, f.name
                )));
            };
            if f.optional && matches!(v, Value::Null) {
                continue;
            }
            let taken = std::mem::replace(v, Value::Null);
            match coerce(taken, f.tag) {
                Ok(c) => *v = c,
                Err(orig) => {
                    return Err(Error::Type(format!(
                        "field `{}` of {} must be {}, found {}",
                        f.name,
                        self.decl.name,
                        f.tag,
                        orig.tag()
                    )))
                }
            }
        }
        if !self.ty.open {
            if let Some(extra) = obj.keys().find(|k| self.ty.field(k).is_none()) {
                return Err(Error::Type(format!(
                    "closed type {} does not declare field `{extra}`",
                    self.ty.name
                )));
            }
        }
        let key = key_string(&self.key_values(&obj)?);
        Ok((key, Value::Object(obj)))
    }

    /// Validates and commits a batch. The whole batch is rejected if any
    /// record fails validation. Returns the assigned seqnos, which are
    /// contiguous. A record whose key already exists replaces the old one
    /// under the new seqno.
    pub fn insert(&self, records: Vec<Object>) -> Result<Vec<DatasetRecord>> {
        if records.is_empty() {
            return Ok(Vec::new());
        }
        let mut writer = self.writer.lock();
        let prepared = records
            .into_iter()
            .map(|r| self.prepare(r))
            .collect::<Result<Vec<_>>>()?;
        let start = self.state.read().next;
        let committed: Vec<(String, DatasetRecord)> = prepared
            .into_iter()
            .enumerate()
            .map(|(i, (key, value))| {
                (
                    key,
                    DatasetRecord {
                        seqno: start + i as u64,
                        value: Arc::new(value),
                    },
                )
            })
            .collect();
        if let Some(wal) = writer.as_mut() {
            let entries: Vec<WalEntry<'_>> = committed
                .iter()
                .map(|(_, r)| WalEntry::Put {
                    seqno: r.seqno,
                    value: &r.value,
                })
                .collect();
            wal.append(&entries)?;
        }
        let high = start + committed.len() as u64 - 1;
        let out: Vec<DatasetRecord> = committed.iter().map(|(_, r)| r.clone()).collect();
        {
            let mut st = self.state.write();
            for (key, rec) in committed {
                if let Some(old) = st.keys.insert(key, rec.seqno) {
                    st.records.remove(&old);
                }
                st.records.insert(rec.seqno, rec);
            }
            st.next = high + 1;
            let mut log = self.commits.lock();
            if log.len() == COMMIT_HISTORY {
                log.pop_front();
            }
            log.push_back((start, high, now_ms()));
            self.committed.store(high, Ordering::Release);
        }
        self.maybe_compact(&mut writer)?;
        Ok(out)
    }

    /// Removes every record matching `pred`; returns how many went.
    pub fn delete_where(&self, pred: impl Fn(&Value) -> bool) -> Result<usize> {
        let mut writer = self.writer.lock();
        let doomed: Vec<(u64, Value)> = {
            let st = self.state.read();
            st.records
                .values()
                .filter(|r| pred(&r.value))
                .map(|r| {
                    let obj = r.value.as_object().expect("stored records are objects");
                    let key = match self
                        .key_values(obj)
                        .expect("stored records have keys")
                        .as_slice()
                    {
                        [one] => (*one).clone(),
                        many => Value::Array(many.iter().map(|v| (*v).clone()).collect()),
                    };
                    (r.seqno, key)
                })
                .collect()
        };
        if doomed.is_empty() {
            return Ok(0);
        }
        if let Some(wal) = writer.as_mut() {
            let entries: Vec<WalEntry<'_>> = doomed
                .iter()
                .map(|(_, k)| WalEntry::Delete { key: k })
                .collect();
            wal.append(&entries)?;
        }
        let mut st = self.state.write();
        for (seqno, key) in &doomed {
            st.records.remove(seqno);
            st.keys.remove(&serialize_adm(key));
        }
        Ok(doomed.len())
    }

    fn maybe_compact(&self, writer: &mut Option<Wal>) -> Result<()> {
        let Some(wal) = writer.as_mut() else {
            return Ok(());
        };
        let st = self.state.read();
        let threshold = self.compact_min_entries.max(2 * st.records.len() as u64);
        if wal.entries() < threshold {
            return Ok(());
        }
        let high = st.next - 1;
        wal.compact(st.records.values().map(|r| (r.seqno, &*r.value)), high)?;
        Ok(())
    }

    /// Path of the write-ahead log, if the dataset is durable.
    pub fn wal_path(&self) -> Option<std::path::PathBuf> {
        self.writer.lock().as_ref().map(|w| w.path().to_owned())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adm::{object, parse_adm_text};
    use crate::ddl::{parse_statements, Statement};

    fn decl_and_type(ddl: &str) -> (DatasetDecl, TypeDef) {
        let stmts = parse_statements(ddl).unwrap();
        let (Statement::CreateType(t), Statement::CreateDataset(d)) = (&stmts[0], &stmts[1]) else {
            panic!()
        };
        (d.clone(), t.clone())
    }

    fn tweets(dir: Option<&Path>) -> Dataset {
        let (d, t) = decl_and_type(
            "CREATE TYPE Tweet AS { tid: bigint, uid: bigint, text: string };
             CREATE ACTIVE DATASET Tweets(Tweet) PRIMARY KEY tid;",
        );
        Dataset::open("dhs", d, t, dir, &StorageOptions::default()).unwrap()
    }

    fn tweet(tid: i64) -> Object {
        object([
            ("tid", Value::BigInt(tid)),
            ("uid", Value::BigInt(1)),
            ("text", Value::string(format!("t{tid}"))),
        ])
    }

    #[test]
    fn seqnos_and_ranges() {
        let ds = tweets(None);
        assert_eq!(ds.snapshot_seqno(), 0);
        assert!(ds.insert(vec![]).unwrap().is_empty());
        let recs = ds.insert((1..=10).map(tweet).collect()).unwrap();
        assert_eq!(
            recs.iter().map(|r| r.seqno).collect::<Vec<_>>(),
            (1..=10).collect::<Vec<_>>()
        );
        let got: Vec<u64> = ds.scan(Some((6, 10))).iter().map(|r| r.seqno).collect();
        assert_eq!(got, [7, 8, 9, 10]);
        assert!(ds.scan(Some((4, 4))).is_empty());
        assert_eq!(ds.snapshot().range(6, 10).len(), 4);
    }

    #[test]
    fn upsert_moves_record_to_fresh_seqno() {
        let ds = tweets(None);
        ds.insert(vec![tweet(1), tweet(2)]).unwrap();
        let mut again = tweet(1);
        again.insert("text".into(), Value::string("edited"));
        ds.insert(vec![again]).unwrap();
        assert_eq!(ds.len(), 2);
        let seqnos: Vec<u64> = ds.scan(None).iter().map(|r| r.seqno).collect();
        assert_eq!(seqnos, [2, 3]);
        assert!(ds.scan(Some((0, 1))).is_empty());
    }

    #[test]
    fn type_checks() {
        let ds = tweets(None);
        let mut bad = tweet(1);
        bad.insert("uid".into(), Value::string("x"));
        assert!(matches!(
            ds.insert(vec![tweet(2), bad]),
            Err(Error::Type(_))
        ));
        assert_eq!(ds.len(), 0, "a failing batch commits nothing");
        let mut missing = tweet(1);
        missing.shift_remove("tid");
        assert!(ds.insert(vec![missing]).is_err());
    }

    #[test]
    fn json_shapes_coerce_to_declared_types() {
        let (d, t) = decl_and_type(
            "CREATE TYPE E AS { eid: uuid, location: point, at: datetime, d: duration, r: double };
             CREATE DATASET Es(E) PRIMARY KEY eid;",
        );
        let ds = Dataset::open("x", d, t, None, &StorageOptions::default()).unwrap();
        let rec = parse_adm_text(
            r#"{"eid":"82e61d25-4cad-0632-3d8d-148e71cb50bf","location":[1,2.5],"at":"1970-01-01T00:00:00.000Z","d":"PT10S","r":3}"#,
        )
        .unwrap();
        let stored = ds.insert(vec![rec.into_object().unwrap()]).unwrap();
        assert_eq!(
            serialize_adm(&stored[0].value),
            r#"{"eid":uuid("82e61d25-4cad-0632-3d8d-148e71cb50bf"),"location":point("1.0,2.5"),"at":datetime("1970-01-01T00:00:00.000Z"),"d":duration("PT10S"),"r":3.0}"#
        );
    }

    #[test]
    fn autogenerated_keys() {
        let (d, t) = decl_and_type(
            "CREATE TYPE B AS { bid: uuid, name: string };
             CREATE DATASET Bs(B) PRIMARY KEY bid AUTOGENERATED;",
        );
        let ds = Dataset::open("x", d, t, None, &StorageOptions::default()).unwrap();
        let r = ds
            .insert(vec![object([("name", Value::string("a"))])])
            .unwrap();
        assert!(r[0].value.get("bid").and_then(Value::as_uuid).is_some());
    }

    #[test]
    fn seqno_before_follows_commit_times() {
        let ds = tweets(None);
        assert_eq!(ds.seqno_before(i64::MAX), 0);
        ds.insert((1..=3).map(tweet).collect()).unwrap();
        let between = now_ms() + 1;
        std::thread::sleep(std::time::Duration::from_millis(3));
        ds.insert(vec![tweet(4)]).unwrap();
        assert_eq!(ds.seqno_before(0), 0);
        assert_eq!(ds.seqno_before(between), 3);
        assert_eq!(ds.seqno_before(i64::MAX), 4);
    }

    #[test]
    fn restart_replays_and_resumes_above_max() {
        let dir = tempfile::tempdir().unwrap();
        {
            let ds = tweets(Some(dir.path()));
            ds.insert((1..=3).map(tweet).collect()).unwrap();
            ds.insert(vec![tweet(3)]).unwrap();
            assert_eq!(
                ds.delete_where(|v| v.get("tid") == Some(&Value::BigInt(1)))
                    .unwrap(),
                1
            );
        }
        let ds = tweets(Some(dir.path()));
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.snapshot_seqno(), 4);
        let r = ds.insert(vec![tweet(9)]).unwrap();
        assert_eq!(r[0].seqno, 5);
    }

    #[test]
    fn compaction_preserves_contents() {
        let dir = tempfile::tempdir().unwrap();
        let (d, t) = decl_and_type(
            "CREATE TYPE Tweet AS { tid: bigint, uid: bigint, text: string };
             CREATE ACTIVE DATASET Tweets(Tweet) PRIMARY KEY tid;",
        );
        let opts = StorageOptions {
            compact_min_entries: 8,
            ..StorageOptions::default()
        };
        {
            let ds = Dataset::open("x", d.clone(), t.clone(), Some(dir.path()), &opts).unwrap();
            for round in 0..5 {
                ds.insert((1..=4).map(tweet).collect()).unwrap();
                let _ = round;
            }
        }
        assert!(dir.path().join("Tweets.snap").exists());
        let ds = Dataset::open("x", d, t, Some(dir.path()), &opts).unwrap();
        assert_eq!(ds.len(), 4);
        assert_eq!(ds.snapshot_seqno(), 20);
    }

    #[test]
    fn concurrent_snapshot_is_never_torn() {
        let ds = Arc::new(tweets(None));
        let writer = {
            let ds = ds.clone();
            std::thread::spawn(move || {
                for i in 0..200 {
                    ds.insert(vec![tweet(i * 2), tweet(i * 2 + 1)]).unwrap();
                }
            })
        };
        let mut last = 0;
        while !writer.is_finished() {
            let snap = ds.snapshot();
            assert!(snap.seqno >= last);
            assert_eq!(snap.seqno % 2, 0, "batches commit atomically");
            assert_eq!(snap.all().len() as u64, snap.seqno);
            last = snap.seqno;
        }
        writer.join().unwrap();
        assert_eq!(ds.snapshot_seqno(), 400);
    }
}
