//! Store access used by the gateway and alert service: over HTTP, or directly
//! against an in-process [`Store`].

use std::sync::Arc;
use std::time::Duration;

use serde_json::Value;
use thiserror::Error;

use crate::store::{HistoryEntry, Store, StoreError, StorePath};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClientError {
    #[error("store unreachable: {0}")]
    Unreachable(String),
    #[error("store answered {status}: {message}")]
    Rejected { status: u16, message: String },
    #[error("unexpected store response: {0}")]
    BadResponse(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}

impl ClientError {
    /// Worth retrying later, as opposed to a request the store will never
    /// accept.
    pub fn is_transient(&self) -> bool {
        match self {
            ClientError::Unreachable(_) => true,
            ClientError::Rejected { status, .. } => *status >= 500,
            ClientError::BadResponse(_) => false,
            ClientError::Store(e) => matches!(e, StoreError::Io(_) | StoreError::LogFailed),
        }
    }
}

/// Paths are store paths without the `.json` suffix, e.g. `bags/B1/latest`.
pub trait StoreClient: Send + Sync {
    /// Merge-patches a document; returns the merged document.
    fn patch(&self, path: &str, doc: &Value) -> Result<Value, ClientError>;
    /// Appends to a history collection; returns the push id.
    fn post(&self, path: &str, doc: &Value) -> Result<String, ClientError>;
    /// `None` when nothing is stored at `path`.
    fn get(&self, path: &str) -> Result<Option<Value>, ClientError>;
    fn history(
        &self,
        path: &str,
        since: Option<&str>,
        limit: Option<usize>,
    ) -> Result<Vec<HistoryEntry>, ClientError>;
}

impl<C: StoreClient + ?Sized> StoreClient for Arc<C> {
    fn patch(&self, path: &str, doc: &Value) -> Result<Value, ClientError> {
        (**self).patch(path, doc)
    }
    fn post(&self, path: &str, doc: &Value) -> Result<String, ClientError> {
        (**self).post(path, doc)
    }
    fn get(&self, path: &str) -> Result<Option<Value>, ClientError> {
        (**self).get(path)
    }
    fn history(
        &self,
        path: &str,
        since: Option<&str>,
        limit: Option<usize>,
    ) -> Result<Vec<HistoryEntry>, ClientError> {
        (**self).history(path, since, limit)
    }
}

/// Calls straight into a [`Store`] in the same process.
#[derive(Clone)]
pub struct LocalClient {
    store: Arc<Store>,
}

impl LocalClient {
    pub fn new(store: Arc<Store>) -> Self {
        Self { store }
    }
}

impl StoreClient for LocalClient {
    fn patch(&self, path: &str, doc: &Value) -> Result<Value, ClientError> {
        Ok(self.store.patch(&StorePath::parse(path)?, doc)?)
    }

    fn post(&self, path: &str, doc: &Value) -> Result<String, ClientError> {
        Ok(self.store.append(&StorePath::parse(path)?, doc)?)
    }

    fn get(&self, path: &str) -> Result<Option<Value>, ClientError> {
        Ok(self.store.get(&StorePath::parse(path)?))
    }

    fn history(
        &self,
        path: &str,
        since: Option<&str>,
        limit: Option<usize>,
    ) -> Result<Vec<HistoryEntry>, ClientError> {
        Ok(self.store.history(&StorePath::parse(path)?, since, limit))
    }
}

/// REST client for the store server (or any service speaking the same
/// `.json` dialect).
pub struct HttpStoreClient {
    base: String,
    token: Option<String>,
    agent: ureq::Agent,
}

impl HttpStoreClient {
    pub fn new(base_url: &str, token: Option<String>, timeout: Duration) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build();
        Self {
            base: base_url.trim_end_matches('/').to_string(),
            token,
            agent: ureq::Agent::new_with_config(config),
        }
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    fn url(&self, path: &str) -> String {
        format!("{}/{}.json", self.base, path.trim_matches('/'))
    }

    fn auth<B>(&self, req: ureq::RequestBuilder<B>) -> ureq::RequestBuilder<B> {
        match &self.token {
            Some(t) => req.header("Authorization", format!("Bearer {t}")),
            None => req,
        }
    }

    /// Returns the decoded body of a 2xx response, `None` for 404.
    fn finish(
        result: Result<ureq::http::Response<ureq::Body>, ureq::Error>,
    ) -> Result<Option<Value>, ClientError> {
        let mut resp = result.map_err(|e| ClientError::Unreachable(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| ClientError::Unreachable(e.to_string()))?;
        if status == 404 {
            return Ok(None);
        }
        if !(200..300).contains(&status) {
            let message = serde_json::from_str::<Value>(&text)
                .ok()
                .and_then(|v| v.get("error").and_then(Value::as_str).map(str::to_string))
                .unwrap_or(text);
            return Err(ClientError::Rejected { status, message });
        }
        serde_json::from_str(&text)
            .map(Some)
            .map_err(|e| ClientError::BadResponse(e.to_string()))
    }

    fn require(body: Option<Value>, path: &str) -> Result<Value, ClientError> {
        body.ok_or_else(|| ClientError::Rejected {
            status: 404,
            message: format!("{path} not found"),
        })
    }
}

impl StoreClient for HttpStoreClient {
    fn patch(&self, path: &str, doc: &Value) -> Result<Value, ClientError> {
        let body = Self::finish(self.auth(self.agent.patch(&self.url(path))).send_json(doc))?;
        Self::require(body, path)
    }

    fn post(&self, path: &str, doc: &Value) -> Result<String, ClientError> {
        let body = Self::require(
            Self::finish(self.auth(self.agent.post(&self.url(path))).send_json(doc))?,
            path,
        )?;
        body.get("name")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| ClientError::BadResponse(format!("no push id in {body}")))
    }

    fn get(&self, path: &str) -> Result<Option<Value>, ClientError> {
        Self::finish(self.auth(self.agent.get(&self.url(path))).call())
    }

    fn history(
        &self,
        path: &str,
        since: Option<&str>,
        limit: Option<usize>,
    ) -> Result<Vec<HistoryEntry>, ClientError> {
        let mut req = self.auth(self.agent.get(&self.url(path)));
        if let Some(s) = since {
            req = req.query("since", s);
        }
        // Always send a query so the server lists even an unknown collection.
        req = req.query("limit", limit.unwrap_or(usize::MAX).to_string());
        match Self::finish(req.call())? {
            Some(v) => {
                serde_json::from_value(v).map_err(|e| ClientError::BadResponse(e.to_string()))
            }
            None => Ok(Vec::new()),
        }
    }
}
