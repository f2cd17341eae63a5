//! HTTP control plane.
//!
//! | route | |
//! |---|---|
//! | `POST /statements` | statement script in, per-statement outcomes out |
//! | `POST /query?dataverse=&format=adm` | read-only query |
//! | `GET /pull/{handle}` | stored pull-mode results |
//! | `GET /events` | server-sent `dataset_insert` / `notification` events |
//! | `GET /status` | catalog, channels, feeds and broker counters |

use std::collections::HashMap;
use std::convert::Infallible;
use std::time::Duration;

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::sse::{Event, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::Stream;
use serde_json::json;
use tokio::sync::broadcast::error::RecvError;

use super::{Island, DEFAULT_DATAVERSE};
use crate::adm::{serialize_adm, to_general_json_value, Value};
use crate::broker::ADM_CONTENT_TYPE;
use crate::client::error_kind;
use crate::error::Error;

pub const HEARTBEAT: Duration = Duration::from_secs(15);

pub fn router(island: Island) -> Router {
    Router::new()
        .route("/statements", post(statements))
        .route("/query", post(query))
        .route("/pull/{handle}", get(pull))
        .route("/events", get(events))
        .route("/status", get(status))
        .with_state(island)
}

fn error_status(e: &Error) -> StatusCode {
    match e {
        Error::NotFound(_) => StatusCode::NOT_FOUND,
        Error::Gone(_) => StatusCode::GONE,
        Error::Ddl(crate::ddl::DdlError::Syntax { .. }) => StatusCode::BAD_REQUEST,
        Error::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
        _ => StatusCode::UNPROCESSABLE_ENTITY,
    }
}

fn error_response(e: &Error) -> Response {
    (
        error_status(e),
        Json(json!({ "error": { "kind": error_kind(e), "message": e.to_string() } })),
    )
        .into_response()
}

async fn statements(State(island): State<Island>, body: String) -> Response {
    match island.execute(&body).await {
        Ok(results) => Json(json!({ "results": results })).into_response(),
        Err(e) => {
            let code = if e.is_syntax() {
                StatusCode::BAD_REQUEST
            } else {
                StatusCode::UNPROCESSABLE_ENTITY
            };
            (
                code,
                Json(json!({ "results": e.completed, "error": e.to_json() })),
            )
                .into_response()
        }
    }
}

async fn query(
    State(island): State<Island>,
    Query(params): Query<HashMap<String, String>>,
    body: String,
) -> Response {
    let dv = params
        .get("dataverse")
        .map(String::as_str)
        .unwrap_or(DEFAULT_DATAVERSE);
    match island.query(dv, &body) {
        Ok(rows)
            if params
                .get("format")
                .is_some_and(|f| f.eq_ignore_ascii_case("adm")) =>
        {
            (
                [(header::CONTENT_TYPE, ADM_CONTENT_TYPE)],
                serialize_adm(&Value::Array(rows)),
            )
                .into_response()
        }
        Ok(rows) => Json(json!({
            "rows": rows.iter().map(to_general_json_value).collect::<Vec<_>>(),
        }))
        .into_response(),
        Err(e) => error_response(&e),
    }
}

async fn pull(State(island): State<Island>, Path(handle): Path<String>) -> Response {
    match island.pull(&handle) {
        Ok(v) => Json(to_general_json_value(&v)).into_response(),
        Err(e) => error_response(&e),
    }
}

async fn status(State(island): State<Island>) -> Response {
    Json(island.status()).into_response()
}

async fn events(
    State(island): State<Island>,
) -> Sse<impl Stream<Item = Result<Event, Infallible>>> {
    let rx = island.events().subscribe();
    let stream = futures::stream::unfold(rx, |mut rx| async move {
        let event = tokio::select! {
            r = rx.recv() => match r {
                Ok(e) => Event::default().event(e.name()).data(e.data().to_string()),
                Err(RecvError::Lagged(n)) => Event::default()
                    .event("lagged")
                    .data(json!({ "missed": n }).to_string()),
                Err(RecvError::Closed) => return None,
            },
            _ = tokio::time::sleep(HEARTBEAT) => Event::default().event("heartbeat").data("{}"),
        };
        Some((Ok(event), rx))
    });
    Sse::new(stream)
}
