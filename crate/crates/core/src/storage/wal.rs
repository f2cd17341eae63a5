//! Append-only log of a dataset's mutations, plus the snapshot file that
//! compaction leaves behind.
//!
//! Both files are sequences of frames: a little-endian `u32` byte length
//! followed by that many bytes of ADM text. The first frame of each file is a
//! header object carrying a generation number; compaction bumps it, so a log
//! older than the snapshot beside it is known to be already folded in.

use std::fs::{self, File, OpenOptions};
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use crate::adm::{object, parse_adm_text, serialize_adm, Value};

pub enum WalEntry<'a> {
    Put { seqno: u64, value: &'a Value },
    Delete { key: &'a Value },
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReplayOp {
    Put { seqno: u64, value: Value },
    Delete { key: Value },
}

#[derive(Debug, Default)]
pub struct Recovered {
    pub ops: Vec<ReplayOp>,
    /// Highest seqno ever allocated, including replaced or deleted records.
    pub high_seqno: u64,
    /// Bytes dropped from a torn tail.
    pub truncated_bytes: u64,
}

pub struct Wal {
    file: File,
    path: PathBuf,
    snap_path: PathBuf,
    generation: u64,
    entries: u64,
    sync: bool,
}

fn frame(out: &mut Vec<u8>, v: &Value) {
    let text = serialize_adm(v);
    out.extend_from_slice(&(text.len() as u32).to_le_bytes());
    out.extend_from_slice(text.as_bytes());
}

/// Reads frames until the end or the first torn/corrupt frame. Returns the
/// values and the byte offset just past the last good frame.
fn read_frames(bytes: &[u8]) -> (Vec<Value>, usize) {
    let mut out = Vec::new();
    let mut pos = 0;
    while bytes.len() - pos >= 4 {
        let len = u32::from_le_bytes(bytes[pos..pos + 4].try_into().unwrap()) as usize;
        let Some(body) = bytes.get(pos + 4..pos + 4 + len) else {
            break;
        };
        let Ok(text) = std::str::from_utf8(body) else {
            break;
        };
        let Ok(v) = parse_adm_text(text) else {
            break;
        };
        out.push(v);
        pos += 4 + len;
    }
    (out, pos)
}

fn u64_field(v: &Value, key: &str) -> Option<u64> {
    v.get(key)
        .and_then(Value::as_i64)
        .and_then(|n| u64::try_from(n).ok())
}

fn header(generation: u64, high: Option<u64>) -> Value {
    let mut h = object([("generation", Value::BigInt(generation as i64))]);
    if let Some(high) = high {
        h.insert("high_seqno".into(), Value::BigInt(high as i64));
    }
    Value::Object(h)
}

pub(crate) fn write_file_atomically(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    if let Some(dir) = path.parent() {
        // directory fsync makes the rename durable; not supported everywhere
        let _ = File::open(dir).and_then(|d| d.sync_all());
    }
    Ok(())
}

fn to_replay(v: Value) -> Option<ReplayOp> {
    if let Some(seqno) = u64_field(&v, "seqno") {
        let value = v.get("value")?.clone();
        return Some(ReplayOp::Put { seqno, value });
    }
    v.get("delete").map(|k| ReplayOp::Delete { key: k.clone() })
}

impl Wal {
    /// Opens (or creates) `<dir>/<name>.wal` and recovers its contents
    /// together with any snapshot.
    pub fn open(dir: &Path, name: &str, sync: bool) -> io::Result<(Wal, Recovered)> {
        fs::create_dir_all(dir)?;
        let path = dir.join(format!("{name}.wal"));
        let snap_path = dir.join(format!("{name}.snap"));
        let mut rec = Recovered::default();

        let mut snap_gen = 0;
        if snap_path.exists() {
            let bytes = fs::read(&snap_path)?;
            let (frames, _) = read_frames(&bytes);
            let mut it = frames.into_iter();
            if let Some(h) = it.next() {
                snap_gen = u64_field(&h, "generation").unwrap_or(0);
                rec.high_seqno = u64_field(&h, "high_seqno").unwrap_or(0);
            }
            rec.ops.extend(it.filter_map(to_replay));
        }

        let mut generation = snap_gen;
        let mut entries = 0;
        let mut rewrite = true;
        if path.exists() {
            let mut bytes = Vec::new();
            File::open(&path)?.read_to_end(&mut bytes)?;
            let (frames, good) = read_frames(&bytes);
            let mut it = frames.into_iter();
            let wal_gen = it.next().and_then(|h| u64_field(&h, "generation"));
            if let Some(g) = wal_gen.filter(|g| *g >= snap_gen) {
                generation = g;
                for op in it.filter_map(to_replay) {
                    entries += 1;
                    rec.ops.push(op);
                }
                rec.truncated_bytes = (bytes.len() - good) as u64;
                if rec.truncated_bytes > 0 {
                    let f = OpenOptions::new().write(true).open(&path)?;
                    f.set_len(good as u64)?;
                    f.sync_all()?;
                }
                rewrite = false;
            }
        }
        if rewrite {
            let mut buf = Vec::new();
            frame(&mut buf, &header(generation, None));
            write_file_atomically(&path, &buf)?;
        }
        for op in &rec.ops {
            if let ReplayOp::Put { seqno, .. } = op {
                rec.high_seqno = rec.high_seqno.max(*seqno);
            }
        }
        let file = OpenOptions::new().append(true).open(&path)?;
        Ok((
            Wal {
                file,
                path,
                snap_path,
                generation,
                entries,
                sync,
            },
            rec,
        ))
    }

    /// Appends a batch and makes it durable with a single sync.
    pub fn append(&mut self, batch: &[WalEntry<'_>]) -> io::Result<()> {
        if batch.is_empty() {
            return Ok(());
        }
        let mut buf = Vec::new();
        for e in batch {
            let v = match e {
                WalEntry::Put { seqno, value } => Value::Object(object([
                    ("seqno", Value::BigInt(*seqno as i64)),
                    ("value", (*value).clone()),
                ])),
                WalEntry::Delete { key } => Value::Object(object([("delete", (*key).clone())])),
            };
            frame(&mut buf, &v);
        }
        self.file.write_all(&buf)?;
        if self.sync {
            self.file.sync_data()?;
        }
        self.entries += batch.len() as u64;
        Ok(())
    }

    /// Log entries since the last compaction.
    pub fn entries(&self) -> u64 {
        self.entries
    }

    /// Writes the live records as a snapshot and starts an empty log.
    pub fn compact<'a>(
        &mut self,
        live: impl Iterator<Item = (u64, &'a Value)>,
        high_seqno: u64,
    ) -> io::Result<()> {
        let next = self.generation + 1;
        let mut buf = Vec::new();
        frame(&mut buf, &header(next, Some(high_seqno)));
        for (seqno, value) in live {
            frame(
                &mut buf,
                &Value::Object(object([
                    ("seqno", Value::BigInt(seqno as i64)),
                    ("value", value.clone()),
                ])),
            );
        }
        write_file_atomically(&self.snap_path, &buf)?;
        let mut wal = Vec::new();
        frame(&mut wal, &header(next, None));
        write_file_atomically(&self.path, &wal)?;
        self.file = OpenOptions::new().append(true).open(&self.path)?;
        self.generation = next;
        self.entries = 0;
        Ok(())
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

/// Reads every `Put` in a log file, ignoring any snapshot. Intended for
/// offline inspection.
pub fn read_log(path: &Path) -> io::Result<Vec<(u64, Value)>> {
    let bytes = fs::read(path)?;
    let (frames, _) = read_frames(&bytes);
    Ok(frames
        .into_iter()
        .skip(1)
        .filter_map(to_replay)
        .filter_map(|op| match op {
            ReplayOp::Put { seqno, value } => Some((seqno, value)),
            ReplayOp::Delete { .. } => None,
        })
        .collect())
}
