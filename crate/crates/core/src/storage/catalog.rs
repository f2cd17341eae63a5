use std::path::{Path, PathBuf};
use std::sync::Arc;

use indexmap::IndexMap;
use parking_lot::RwLock;
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::{write_json_atomically, StorageOptions};
use crate::adm::{Object, Tag};
use crate::ddl::{
    BodyInfo, BrokerType, ChannelDecl, DatasetDecl, FieldDef, FunctionDecl, Statement, TypeDef,
};
use crate::error::{Error, Result};

pub const DEAD_LETTERS: &str = "__dead_letters";
pub const PULL_RESULTS: &str = "__pull_results";

#[derive(Debug, Clone, PartialEq)]
pub struct FeedDecl {
    pub name: String,
    pub config: Object,
    pub connection: Option<FeedConnection>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeedConnection {
    pub dataset: String,
    pub function: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BrokerDecl {
    pub name: String,
    pub endpoint: String,
    pub broker_type: BrokerType,
    pub options: Object,
}

/// A created channel: its declaration plus what creation-time analysis found.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelDef {
    pub decl: ChannelDecl,
    pub period_ms: u64,
    pub info: BodyInfo,
}

#[derive(Debug, Default)]
pub struct Dataverse {
    pub name: String,
    pub types: IndexMap<String, TypeDef>,
    pub datasets: IndexMap<String, Arc<Dataset>>,
    pub functions: IndexMap<String, Arc<FunctionDecl>>,
    pub feeds: IndexMap<String, FeedDecl>,
    pub brokers: IndexMap<String, BrokerDecl>,
    pub channels: IndexMap<String, Arc<ChannelDef>>,
}

impl Dataverse {
    fn taken(&self, name: &str) -> Option<&'static str> {
        if self.datasets.contains_key(name) {
            Some("dataset")
        } else if self.feeds.contains_key(name) {
            Some("feed")
        } else if self.channels.contains_key(name) {
            Some("channel")
        } else if self.brokers.contains_key(name) {
            Some("broker")
        } else if self.functions.contains_key(name) {
            Some("function")
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
struct LogEntry {
    dataverse: String,
    kind: String,
    name: String,
    statement: String,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct Metadata {
    entries: Vec<LogEntry>,
}

/// Dataverses and their entities. The catalog's persistent form is a list of
/// the statements that created the live entities, replayed on open.
pub struct Catalog {
    root: Option<PathBuf>,
    options: StorageOptions,
    dataverses: RwLock<IndexMap<String, Dataverse>>,
    system: IndexMap<String, Arc<Dataset>>,
    log: parking_lot::Mutex<Vec<LogEntry>>,
}

fn system_dataset(
    root: Option<&Path>,
    options: &StorageOptions,
    name: &str,
    key: &str,
    key_tag: Tag,
    autogenerated: bool,
) -> Result<Arc<Dataset>> {
    let ty = TypeDef {
        name: format!("{name}_type"),
        fields: vec![FieldDef {
            name: key.into(),
            tag: key_tag,
            optional: false,
        }],
        open: true,
    };
    let decl = DatasetDecl {
        name: name.into(),
        type_name: ty.name.clone(),
        primary_key: vec![key.into()],
        autogenerated,
        active: true,
    };
    let dir = root.map(|r| r.join("__system"));
    Ok(Arc::new(Dataset::open(
        "__system",
        decl,
        ty,
        dir.as_deref(),
        options,
    )?))
}

impl Catalog {
    /// Opens the catalog rooted at `root` (in-memory when `None`). Returns the
    /// statements that must be replayed, in creation order, to rebuild it.
    pub fn open(
        root: Option<&Path>,
        options: StorageOptions,
    ) -> Result<(Catalog, Vec<(String, Statement)>)> {
        let mut system = IndexMap::new();
        system.insert(
            DEAD_LETTERS.to_owned(),
            system_dataset(root, &options, DEAD_LETTERS, "id", Tag::Uuid, true)?,
        );
        system.insert(
            PULL_RESULTS.to_owned(),
            system_dataset(root, &options, PULL_RESULTS, "handle", Tag::Uuid, false)?,
        );
        let mut replay = Vec::new();
        let mut entries = Vec::new();
        if let Some(root) = root {
            std::fs::create_dir_all(root)?;
            let path = root.join("metadata.json");
            if path.exists() {
                let meta: Metadata = serde_json::from_slice(&std::fs::read(&path)?)
                    .map_err(|e| Error::catalog(format!("corrupt metadata.json: {e}")))?;
                for e in &meta.entries {
                    let mut stmts = crate::ddl::parse_statements(&e.statement)?;
                    if stmts.len() != 1 {
                        return Err(Error::catalog(format!(
                            "corrupt metadata entry for {}",
                            e.name
                        )));
                    }
                    replay.push((e.dataverse.clone(), stmts.remove(0)));
                }
                entries = meta.entries;
            }
        }
        Ok((
            Catalog {
                root: root.map(Path::to_owned),
                options,
                dataverses: RwLock::new(IndexMap::new()),
                system,
                log: parking_lot::Mutex::new(entries),
            },
            replay,
        ))
    }

    pub fn root(&self) -> Option<&Path> {
        self.root.as_deref()
    }

    /// Directory holding a dataverse's files.
    pub fn dataverse_dir(&self, dv: &str) -> Option<PathBuf> {
        self.root.as_ref().map(|r| r.join(dv))
    }

    fn persist(&self, log: &[LogEntry]) -> Result<()> {
        if let Some(root) = &self.root {
            let meta = Metadata {
                entries: log.to_vec(),
            };
            write_json_atomically(
                &root.join("metadata.json"),
                &serde_json::to_value(&meta).expect("metadata serializes"),
            )?;
        }
        Ok(())
    }

    /// Records the statement that created (or connected) an entity.
    pub fn log_statement(&self, dv: &str, kind: &str, name: &str, stmt: &Statement) -> Result<()> {
        let mut log = self.log.lock();
        log.retain(|e| !(e.dataverse == dv && e.kind == kind && e.name == name));
        log.push(LogEntry {
            dataverse: dv.into(),
            kind: kind.into(),
            name: name.into(),
            statement: stmt.to_string(),
        });
        self.persist(&log)
    }

    pub fn forget_statement(&self, dv: &str, kind: &str, name: &str) -> Result<()> {
        let mut log = self.log.lock();
        log.retain(|e| !(e.dataverse == dv && e.kind == kind && e.name == name));
        self.persist(&log)
    }

    /// Creates the dataverse if needed. Returns true when it was created.
    pub fn ensure_dataverse(&self, name: &str) -> bool {
        let mut dvs = self.dataverses.write();
        if dvs.contains_key(name) {
            return false;
        }
        dvs.insert(
            name.to_owned(),
            Dataverse {
                name: name.to_owned(),
                ..Dataverse::default()
            },
        );
        true
    }

    pub fn dataverse_names(&self) -> Vec<String> {
        self.dataverses.read().keys().cloned().collect()
    }

    pub fn read<R>(&self, dv: &str, f: impl FnOnce(&Dataverse) -> R) -> Result<R> {
        let dvs = self.dataverses.read();
        let d = dvs
            .get(dv)
            .ok_or_else(|| Error::NotFound(format!("dataverse {dv}")))?;
        Ok(f(d))
    }

    fn write<R>(&self, dv: &str, f: impl FnOnce(&mut Dataverse) -> Result<R>) -> Result<R> {
        let mut dvs = self.dataverses.write();
        let d = dvs
            .get_mut(dv)
            .ok_or_else(|| Error::NotFound(format!("dataverse {dv}")))?;
        f(d)
    }

    fn check_free(d: &Dataverse, name: &str) -> Result<()> {
        match d.taken(name) {
            Some(kind) => Err(Error::catalog(format!(
                "{kind} {name} already exists in dataverse {}",
                d.name
            ))),
            None => Ok(()),
        }
    }

    pub fn create_type(&self, dv: &str, t: TypeDef) -> Result<()> {
        self.write(dv, |d| {
            if d.types.contains_key(&t.name) {
                return Err(Error::catalog(format!("type {} already exists", t.name)));
            }
            d.types.insert(t.name.clone(), t);
            Ok(())
        })
    }

    pub fn create_dataset(&self, dv: &str, decl: DatasetDecl) -> Result<Arc<Dataset>> {
        let (ty, name) = self.read(dv, |d| {
            Self::check_free(d, &decl.name)?;
            let ty = d
                .types
                .get(&decl.type_name)
                .cloned()
                .ok_or_else(|| Error::NotFound(format!("type {}", decl.type_name)))?;
            Ok::<_, Error>((ty, decl.name.clone()))
        })??;
        if name.starts_with("__") {
            return Err(Error::catalog("names starting with `__` are reserved"));
        }
        let dir = self.dataverse_dir(dv);
        let ds = Arc::new(Dataset::open(dv, decl, ty, dir.as_deref(), &self.options)?);
        self.write(dv, |d| {
            Self::check_free(d, &name)?;
            d.datasets.insert(name, ds.clone());
            Ok(())
        })?;
        Ok(ds)
    }

    /// Resolves a dataset by name; the system datasets resolve from every
    /// dataverse.
    pub fn dataset(&self, dv: &str, name: &str) -> Result<Arc<Dataset>> {
        if let Some(sys) = self.system.get(name) {
            return Ok(sys.clone());
        }
        self.read(dv, |d| d.datasets.get(name).cloned())?
            .ok_or_else(|| Error::NotFound(format!("dataset {dv}.{name}")))
    }

    pub fn system_dataset(&self, name: &str) -> Arc<Dataset> {
        self.system[name].clone()
    }

    pub fn create_function(&self, dv: &str, f: FunctionDecl) -> Result<()> {
        self.write(dv, |d| {
            Self::check_free(d, &f.name)?;
            d.functions.insert(f.name.clone(), Arc::new(f));
            Ok(())
        })
    }

    pub fn function(&self, dv: &str, name: &str) -> Option<Arc<FunctionDecl>> {
        self.read(dv, |d| d.functions.get(name).cloned())
            .ok()
            .flatten()
    }

    pub fn create_feed(&self, dv: &str, feed: FeedDecl) -> Result<()> {
        self.write(dv, |d| {
            Self::check_free(d, &feed.name)?;
            d.feeds.insert(feed.name.clone(), feed);
            Ok(())
        })
    }

    pub fn connect_feed(&self, dv: &str, feed: &str, conn: FeedConnection) -> Result<()> {
        self.write(dv, |d| {
            if !d.datasets.contains_key(&conn.dataset) {
                return Err(Error::NotFound(format!("dataset {dv}.{}", conn.dataset)));
            }
            if let Some(func) = &conn.function {
                if !d.functions.contains_key(func) {
                    return Err(Error::NotFound(format!("function {dv}.{func}")));
                }
            }
            let f = d
                .feeds
                .get_mut(feed)
                .ok_or_else(|| Error::NotFound(format!("feed {dv}.{feed}")))?;
            if let Some(existing) = &f.connection {
                return Err(Error::State(format!(
                    "feed {feed} is already connected to dataset {}",
                    existing.dataset
                )));
            }
            f.connection = Some(conn);
            Ok(())
        })
    }

    pub fn feed(&self, dv: &str, name: &str) -> Result<FeedDecl> {
        self.read(dv, |d| d.feeds.get(name).cloned())?
            .ok_or_else(|| Error::NotFound(format!("feed {dv}.{name}")))
    }

    pub fn create_broker(&self, dv: &str, b: BrokerDecl) -> Result<()> {
        self.write(dv, |d| {
            Self::check_free(d, &b.name)?;
            d.brokers.insert(b.name.clone(), b);
            Ok(())
        })
    }

    pub fn broker(&self, dv: &str, name: &str) -> Result<BrokerDecl> {
        self.read(dv, |d| d.brokers.get(name).cloned())?
            .ok_or_else(|| Error::NotFound(format!("broker {dv}.{name}")))
    }

    pub fn remove_broker(&self, dv: &str, name: &str) -> Result<BrokerDecl> {
        self.write(dv, |d| {
            d.brokers
                .shift_remove(name)
                .ok_or_else(|| Error::NotFound(format!("broker {dv}.{name}")))
        })
    }

    pub fn create_channel(&self, dv: &str, ch: ChannelDef) -> Result<Arc<ChannelDef>> {
        self.write(dv, |d| {
            Self::check_free(d, &ch.decl.name)?;
            let ch = Arc::new(ch);
            d.channels.insert(ch.decl.name.clone(), ch.clone());
            Ok(ch)
        })
    }

    pub fn channel(&self, dv: &str, name: &str) -> Result<Arc<ChannelDef>> {
        self.read(dv, |d| d.channels.get(name).cloned())?
            .ok_or_else(|| Error::NotFound(format!("channel {dv}.{name}")))
    }

    /// Every dataset, system ones included, as `(dataverse, dataset)`.
    pub fn all_datasets(&self) -> Vec<Arc<Dataset>> {
        let dvs = self.dataverses.read();
        dvs.values()
            .flat_map(|d| d.datasets.values().cloned())
            .chain(self.system.values().cloned())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adm::{object, Value};
    use crate::ddl::parse_statements;

    fn stmt(text: &str) -> Statement {
        parse_statements(text).unwrap().remove(0)
    }

    fn setup(cat: &Catalog) {
        cat.ensure_dataverse("dhs");
        let Statement::CreateType(t) = stmt("CREATE TYPE Tweet AS { tid: bigint }") else {
            panic!()
        };
        cat.create_type("dhs", t).unwrap();
        let s = stmt("CREATE ACTIVE DATASET Tweets(Tweet) PRIMARY KEY tid");
        let Statement::CreateDataset(d) = s.clone() else {
            panic!()
        };
        cat.create_dataset("dhs", d).unwrap();
        cat.log_statement("dhs", "dataset", "Tweets", &s).unwrap();
    }

    #[test]
    fn duplicates_and_lookups() {
        let (cat, replay) = Catalog::open(None, StorageOptions::default()).unwrap();
        assert!(replay.is_empty());
        setup(&cat);
        let Statement::CreateDataset(d) = stmt("CREATE DATASET Tweets(Tweet) PRIMARY KEY tid")
        else {
            panic!()
        };
        assert!(matches!(
            cat.create_dataset("dhs", d),
            Err(Error::Catalog(_))
        ));
        assert!(cat.dataset("dhs", "Tweets").unwrap().is_active());
        assert!(cat.dataset("dhs", DEAD_LETTERS).is_ok());
        assert!(matches!(
            cat.dataset("dhs", "Nope"),
            Err(Error::NotFound(_))
        ));
        assert!(matches!(
            cat.dataset("zzz", "Tweets"),
            Err(Error::NotFound(_))
        ));
    }

    #[test]
    fn metadata_log_replays() {
        let dir = tempfile::tempdir().unwrap();
        {
            let (cat, _) = Catalog::open(Some(dir.path()), StorageOptions::default()).unwrap();
            setup(&cat);
            let ds = cat.dataset("dhs", "Tweets").unwrap();
            ds.insert(vec![object([("tid", Value::BigInt(5))])])
                .unwrap();
        }
        let (_, replay) = Catalog::open(Some(dir.path()), StorageOptions::default()).unwrap();
        assert_eq!(replay.len(), 1);
        assert_eq!(replay[0].0, "dhs");
        assert_eq!(replay[0].1.kind(), "create_dataset");
    }
}
