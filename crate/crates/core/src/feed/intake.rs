//! Intake listeners: newline-framed TCP and HTTP POST.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::State;
use axum::http::StatusCode;
use axum::response::IntoResponse;
use axum::Json;
use tokio::io::AsyncBufReadExt;
use tokio::net::TcpListener;
use tokio::sync::watch;
use tokio::task::{JoinHandle, JoinSet};

use super::{Adapter, Ingestor};
use crate::error::{Error, Result};

pub(super) struct Intake {
    addrs: Vec<SocketAddr>,
    tasks: Vec<JoinHandle<()>>,
    stop: watch::Sender<bool>,
}

impl Intake {
    pub(super) async fn open(
        adapter: Adapter,
        addresses: &[String],
        ingestor: Arc<Ingestor>,
    ) -> Result<Intake> {
        let mut listeners = Vec::new();
        for a in addresses {
            let l = TcpListener::bind(a.as_str())
                .await
                .map_err(|e| Error::State(format!("cannot listen on {a}: {e}")))?;
            listeners.push(l);
        }
        let (stop, _) = watch::channel(false);
        let mut addrs = Vec::new();
        let mut tasks = Vec::new();
        for l in listeners {
            addrs.push(l.local_addr()?);
            let ing = ingestor.clone();
            let rx = stop.subscribe();
            tasks.push(match adapter {
                Adapter::Socket => tokio::spawn(socket_loop(l, ing)),
                Adapter::Http => tokio::spawn(http_loop(l, ing, rx)),
            });
        }
        Ok(Intake { addrs, tasks, stop })
    }

    pub(super) fn addrs(&self) -> &[SocketAddr] {
        &self.addrs
    }

    pub(super) fn close(self) {
        let _ = self.stop.send(true);
        for t in self.tasks {
            t.abort();
        }
    }
}

async fn socket_loop(listener: TcpListener, ingestor: Arc<Ingestor>) {
    // dropped with the task, which aborts every connection
    let mut conns = JoinSet::new();
    loop {
        tokio::select! {
            accepted = listener.accept() => match accepted {
                Ok((stream, peer)) => {
                    conns.spawn(socket_conn(stream, peer, ingestor.clone()));
                }
                Err(e) => tracing::warn!(error = %e, "feed accept failed"),
            },
            Some(_) = conns.join_next(), if !conns.is_empty() => {}
        }
    }
}

async fn socket_conn(stream: tokio::net::TcpStream, peer: SocketAddr, ingestor: Arc<Ingestor>) {
    let mut lines = tokio::io::BufReader::new(stream).lines();
    loop {
        match lines.next_line().await {
            Ok(Some(line)) => {
                if line.trim().is_empty() {
                    continue;
                }
                let ing = ingestor.clone();
                match tokio::task::spawn_blocking(move || ing.ingest(&line)).await {
                    Ok(Err(e)) => tracing::debug!(%peer, error = %e, "rejected feed line"),
                    Err(e) => tracing::error!(%peer, error = %e, "ingest task failed"),
                    Ok(Ok(_)) => {}
                }
            }
            Ok(None) => return,
            Err(e) => {
                tracing::debug!(%peer, error = %e, "feed connection closed");
                return;
            }
        }
    }
}

async fn http_ingest(State(ingestor): State<Arc<Ingestor>>, body: String) -> impl IntoResponse {
    match tokio::task::spawn_blocking(move || ingestor.ingest(&body)).await {
        Ok(Ok(report)) => (StatusCode::OK, Json(serde_json::to_value(report).unwrap())),
        Ok(Err(e)) => (
            StatusCode::BAD_REQUEST,
            Json(serde_json::json!({ "error": { "message": e.to_string() } })),
        ),
        Err(e) => (
            StatusCode::INTERNAL_SERVER_ERROR,
            Json(serde_json::json!({ "error": { "message": e.to_string() } })),
        ),
    }
}

async fn http_loop(
    listener: TcpListener,
    ingestor: Arc<Ingestor>,
    mut stop: watch::Receiver<bool>,
) {
    let app = axum::Router::new()
        .fallback(http_ingest)
        .with_state(ingestor);
    let shutdown = async move {
        let _ = stop.wait_for(|s| *s).await;
    };
    if let Err(e) = axum::serve(listener, app)
        .with_graceful_shutdown(shutdown)
        .await
    {
        tracing::warn!(error = %e, "feed intake server stopped");
    }
}
