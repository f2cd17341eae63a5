//! HTTP client for an island's control plane.

use std::time::Duration;

use serde_json::Value as Json;

use crate::error::{Error, Result};

/// One statement's outcome as reported by `/statements`.
pub type Outcome = serde_json::Map<String, Json>;

#[derive(Debug, Clone)]
pub struct IslandClient {
    base: String,
    http: reqwest::Client,
}

impl IslandClient {
    /// `base` is `host:port` or a full `http://` URL.
    pub fn new(base: &str) -> Self {
        let base = base.trim_end_matches('/');
        let base = if base.starts_with("http://") || base.starts_with("https://") {
            base.to_owned()
        } else {
            format!("http://{base}")
        };
        IslandClient {
            base,
            http: reqwest::Client::builder()
                .timeout(Duration::from_secs(10))
                .build()
                .expect("http client builds"),
        }
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    /// Runs a statement script. A failure inside the script comes back as
    /// the error the remote island raised.
    pub async fn execute(&self, text: &str) -> Result<Vec<Outcome>> {
        let resp = self
            .http
            .post(format!("{}/statements", self.base))
            .header(reqwest::header::CONTENT_TYPE, "text/plain")
            .body(text.to_owned())
            .send()
            .await
            .map_err(|e| Error::Remote(e.to_string()))?;
        let status = resp.status();
        let body = body_json(resp).await?;
        if status.is_success() {
            return Ok(outcomes(&body));
        }
        Err(remote_error(&body, status.as_u16()))
    }

    /// Runs a query and returns its rows as general JSON.
    pub async fn query(&self, dataverse: &str, text: &str) -> Result<Vec<Json>> {
        let resp = self
            .http
            .post(format!(
                "{}/query?dataverse={}",
                self.base,
                url::form_urlencoded::byte_serialize(dataverse.as_bytes()).collect::<String>()
            ))
            .body(text.to_owned())
            .send()
            .await
            .map_err(|e| Error::Remote(e.to_string()))?;
        let status = resp.status();
        let body = body_json(resp).await?;
        if !status.is_success() {
            return Err(remote_error(&body, status.as_u16()));
        }
        Ok(body["rows"].as_array().cloned().unwrap_or_default())
    }

    pub async fn status(&self) -> Result<Json> {
        self.get_json("/status").await
    }

    /// Fetches stored pull-mode results.
    pub async fn pull(&self, handle: &str) -> Result<Json> {
        self.get_json(&format!("/pull/{handle}")).await
    }

    async fn get_json(&self, path: &str) -> Result<Json> {
        let resp = self
            .http
            .get(format!("{}{path}", self.base))
            .send()
            .await
            .map_err(|e| Error::Remote(e.to_string()))?;
        let status = resp.status();
        let body = body_json(resp).await?;
        if !status.is_success() {
            return Err(remote_error(&body, status.as_u16()));
        }
        Ok(body)
    }
}

async fn body_json(resp: reqwest::Response) -> Result<Json> {
    let bytes = resp
        .bytes()
        .await
        .map_err(|e| Error::Remote(e.to_string()))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::Remote(format!("malformed response: {e}")))
}

fn outcomes(body: &Json) -> Vec<Outcome> {
    body["results"]
        .as_array()
        .map(|a| a.iter().filter_map(|o| o.as_object().cloned()).collect())
        .unwrap_or_default()
}

/// Maps an error body back onto the local error kinds so callers can tell
/// "already gone" from "unreachable".
fn remote_error(body: &Json, status: u16) -> Error {
    let err = &body["error"];
    let msg = err["message"]
        .as_str()
        .map(str::to_owned)
        .unwrap_or_else(|| format!("HTTP {status}"));
    match err["kind"].as_str() {
        Some("not_found") => Error::NotFound(msg.trim_end_matches(" not found").to_owned()),
        Some("gone") => Error::Gone(msg.trim_end_matches(" is gone").to_owned()),
        Some("catalog") => Error::Catalog(msg),
        Some("state") => Error::State(msg),
        _ => Error::Remote(msg),
    }
}

/// The `kind` tag used in error bodies.
pub fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Adm(_) => "adm",
        Error::Ddl(crate::ddl::DdlError::Syntax { .. }) => "syntax",
        Error::Ddl(_) => "analysis",
        Error::Catalog(_) => "catalog",
        Error::NotFound(_) => "not_found",
        Error::Gone(_) => "gone",
        Error::Type(_) => "type",
        Error::Eval(_) => "eval",
        Error::State(_) => "state",
        Error::Remote(_) => "remote",
        Error::Io(_) => "io",
    }
}
