//! Island activity published to `/events` subscribers.

use serde_json::{json, Value as Json};
use tokio::sync::broadcast;

use crate::adm::{to_general_json_value, Object};
use crate::error::Result;
use crate::storage::{Dataset, DatasetRecord};

#[derive(Debug, Clone)]
pub enum IslandEvent {
    DatasetInsert {
        dataverse: String,
        dataset: String,
        seqnos: Vec<u64>,
        /// The stored records as general JSON.
        records: Vec<Json>,
    },
    Notification {
        dataverse: String,
        channel: String,
        broker: String,
        delivered_ms: i64,
        /// The body as general JSON, whatever format went on the wire.
        body: Json,
    },
}

impl IslandEvent {
    pub fn name(&self) -> &'static str {
        match self {
            IslandEvent::DatasetInsert { .. } => "dataset_insert",
            IslandEvent::Notification { .. } => "notification",
        }
    }

    pub fn data(&self) -> Json {
        match self {
            IslandEvent::DatasetInsert {
                dataverse,
                dataset,
                seqnos,
                records,
            } => json!({
                "dataverse": dataverse,
                "dataset": dataset,
                "seqnos": seqnos,
                "records": records,
            }),
            IslandEvent::Notification {
                dataverse,
                channel,
                broker,
                delivered_ms,
                body,
            } => json!({
                "dataverse": dataverse,
                "channel": channel,
                "broker": broker,
                "deliveredAt": delivered_ms,
                "body": body,
            }),
        }
    }
}

/// Broadcast fan-out; slow readers lose the oldest events.
#[derive(Debug, Clone)]
pub struct EventBus {
    tx: broadcast::Sender<IslandEvent>,
}

impl EventBus {
    pub fn new(capacity: usize) -> Self {
        EventBus {
            tx: broadcast::channel(capacity).0,
        }
    }

    pub fn publish(&self, e: IslandEvent) {
        // no receivers is fine
        let _ = self.tx.send(e);
    }

    pub fn subscribe(&self) -> broadcast::Receiver<IslandEvent> {
        self.tx.subscribe()
    }
}

impl Default for EventBus {
    fn default() -> Self {
        Self::new(1024)
    }
}

/// Inserts into `ds` and announces the stored records.
pub(crate) fn insert_and_publish(
    ds: &Dataset,
    records: Vec<Object>,
    events: &EventBus,
) -> Result<Vec<DatasetRecord>> {
    let stored = ds.insert(records)?;
    if !stored.is_empty() {
        events.publish(IslandEvent::DatasetInsert {
            dataverse: ds.dataverse().to_owned(),
            dataset: ds.name().to_owned(),
            seqnos: stored.iter().map(|r| r.seqno).collect(),
            records: stored
                .iter()
                .map(|r| to_general_json_value(&r.value))
                .collect(),
        });
    }
    Ok(stored)
}
