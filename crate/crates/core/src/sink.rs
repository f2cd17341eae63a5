//! A broker endpoint that records what it receives.
//!
//! The scenario harness uses it for end subscribers, and tests use it to
//! look at delivered bodies.

use std::net::SocketAddr;
use std::sync::atomic::{AtomicU16, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::extract::State;
use axum::http::{HeaderMap, StatusCode, Uri};
use parking_lot::Mutex;
use tokio::sync::Notify;
use tokio::task::JoinHandle;

use crate::adm::{from_json, parse_adm_text, Value};
use crate::broker::ADM_CONTENT_TYPE;
use crate::clock::now_ms;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Received {
    /// Receipt wall-clock time.
    pub at_ms: i64,
    pub path: String,
    pub content_type: String,
    pub body: String,
}

impl Received {
    /// Parses the body by its content type.
    pub fn value(&self) -> Result<Value> {
        if self.content_type.starts_with(ADM_CONTENT_TYPE) {
            Ok(parse_adm_text(&self.body)?)
        } else {
            let j: serde_json::Value = serde_json::from_str(&self.body)
                .map_err(|e| Error::Type(format!("malformed JSON body: {e}")))?;
            Ok(from_json(&j)?)
        }
    }
}

struct Shared {
    received: Mutex<Vec<Received>>,
    arrived: Notify,
    status: AtomicU16,
}

pub struct BrokerSink {
    addr: SocketAddr,
    shared: Arc<Shared>,
    task: JoinHandle<()>,
}

async fn receive(
    State(shared): State<Arc<Shared>>,
    uri: Uri,
    headers: HeaderMap,
    body: String,
) -> StatusCode {
    let content_type = headers
        .get(axum::http::header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .unwrap_or_default()
        .to_owned();
    let status =
        StatusCode::from_u16(shared.status.load(Ordering::Relaxed)).unwrap_or(StatusCode::OK);
    if status.is_success() {
        shared.received.lock().push(Received {
            at_ms: now_ms(),
            path: uri.path().to_owned(),
            content_type,
            body,
        });
        shared.arrived.notify_waiters();
    }
    status
}

impl BrokerSink {
    /// Listens on a free port of 127.0.0.1.
    pub async fn bind() -> Result<BrokerSink> {
        Self::bind_to("127.0.0.1:0").await
    }

    pub async fn bind_to(addr: &str) -> Result<BrokerSink> {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        let addr = listener.local_addr()?;
        let shared = Arc::new(Shared {
            received: Mutex::new(Vec::new()),
            arrived: Notify::new(),
            status: AtomicU16::new(200),
        });
        let app = axum::Router::new()
            .fallback(receive)
            .with_state(shared.clone());
        let task = tokio::spawn(async move {
            let _ = axum::serve(listener, app).await;
        });
        Ok(BrokerSink { addr, shared, task })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Endpoint URL for `CREATE BROKER ... AT`.
    pub fn url(&self) -> String {
        format!("http://{}/", self.addr)
    }

    /// Answers every later request with `status`, recording only 2xx ones.
    pub fn respond_with(&self, status: StatusCode) {
        self.shared.status.store(status.as_u16(), Ordering::Relaxed);
    }

    pub fn received(&self) -> Vec<Received> {
        self.shared.received.lock().clone()
    }

    pub fn count(&self) -> usize {
        self.shared.received.lock().len()
    }

    /// Removes and returns everything received so far.
    pub fn take(&self) -> Vec<Received> {
        std::mem::take(&mut *self.shared.received.lock())
    }

    /// Waits until at least `n` bodies arrived; false on timeout.
    pub async fn wait_for(&self, n: usize, timeout: Duration) -> bool {
        let deadline = tokio::time::Instant::now() + timeout;
        loop {
            let notified = self.shared.arrived.notified();
            if self.count() >= n {
                return true;
            }
            if tokio::time::timeout_at(deadline, notified).await.is_err() {
                return self.count() >= n;
            }
        }
    }
}

impl Drop for BrokerSink {
    fn drop(&mut self) {
        self.task.abort();
    }
}
