//! REST front end: `PATCH`/`GET`/`POST` on `/<path>.json`.

use std::net::{SocketAddr, TcpListener};
use std::sync::Arc;
use std::thread::JoinHandle;

use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::{header, HeaderMap, Method, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::oneshot;

use super::{Store, StoreError, StorePath};

#[derive(Clone)]
struct App {
    store: Arc<Store>,
    token: Option<Arc<str>>,
}

#[derive(Debug, Deserialize)]
struct HistoryQuery {
    since: Option<String>,
    limit: Option<usize>,
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

impl IntoResponse for StoreError {
    fn into_response(self) -> Response {
        let status = match self {
            StoreError::BadPath(_) | StoreError::NotAnObject => StatusCode::BAD_REQUEST,
            StoreError::NotFound(_) => StatusCode::NOT_FOUND,
            StoreError::Conflict(_) => StatusCode::CONFLICT,
            StoreError::Io(_) | StoreError::LogFailed => StatusCode::INTERNAL_SERVER_ERROR,
        };
        error(status, self.to_string())
    }
}

fn authorized(app: &App, headers: &HeaderMap) -> bool {
    let Some(token) = &app.token else {
        return true;
    };
    headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .is_some_and(|given| given == &**token)
}

async fn blocking<T, F>(f: F) -> Result<T, Response>
where
    F: FnOnce() -> T + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))
}

async fn handle(
    State(app): State<App>,
    method: Method,
    uri: Uri,
    headers: HeaderMap,
    query: Result<Query<HistoryQuery>, axum::extract::rejection::QueryRejection>,
    body: Bytes,
) -> Response {
    if !authorized(&app, &headers) {
        return error(StatusCode::UNAUTHORIZED, "missing or wrong bearer token");
    }
    let Some(raw) = uri.path().strip_suffix(".json") else {
        return error(StatusCode::NOT_FOUND, "paths must end in .json");
    };
    let path = match StorePath::parse(raw) {
        Ok(p) => p,
        Err(e) => return e.into_response(),
    };
    let Ok(Query(query)) = query else {
        return error(StatusCode::BAD_REQUEST, "bad query string");
    };
    let store = app.store.clone();

    let result = match method {
        Method::GET => {
            let listing =
                query.since.is_some() || query.limit.is_some() || store.is_collection(&path);
            if listing {
                blocking(move || {
                    let entries = store.history(&path, query.since.as_deref(), query.limit);
                    Ok(Json(entries).into_response())
                })
                .await
            } else {
                blocking(move || match store.get(&path) {
                    Some(doc) => Ok(Json(doc).into_response()),
                    None => Err(StoreError::NotFound(path.to_string())),
                })
                .await
            }
        }
        Method::PATCH | Method::POST => {
            let doc: Value = match serde_json::from_slice(&body) {
                Ok(v) => v,
                Err(e) => return error(StatusCode::BAD_REQUEST, format!("invalid JSON body: {e}")),
            };
            if method == Method::PATCH {
                blocking(move || {
                    store
                        .patch(&path, &doc)
                        .map(|merged| Json(merged).into_response())
                })
                .await
            } else {
                blocking(move || {
                    store
                        .append(&path, &doc)
                        .map(|id| Json(json!({ "name": id })).into_response())
                })
                .await
            }
        }
        _ => return error(StatusCode::METHOD_NOT_ALLOWED, "use GET, PATCH or POST"),
    };
    match result {
        Ok(Ok(resp)) => resp,
        Ok(Err(e)) => e.into_response(),
        Err(resp) => resp,
    }
}

pub fn router(store: Arc<Store>, token: Option<String>) -> Router {
    Router::new().fallback(handle).with_state(App {
        store,
        token: token.map(Arc::from),
    })
}

/// A store server running on its own thread.
pub struct ServerHandle {
    addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<std::io::Result<()>>>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Stops accepting, finishes in-flight requests and joins the thread.
    pub fn shutdown(mut self) -> std::io::Result<()> {
        self.stop()
    }

    /// Blocks until the server exits on its own (it only does on error).
    pub fn wait(mut self) -> std::io::Result<()> {
        match self.thread.take() {
            Some(t) => t
                .join()
                .unwrap_or_else(|_| Err(std::io::Error::other("server thread panicked"))),
            None => Ok(()),
        }
    }

    fn stop(&mut self) -> std::io::Result<()> {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        match self.thread.take() {
            Some(t) => t
                .join()
                .unwrap_or_else(|_| Err(std::io::Error::other("server thread panicked"))),
            None => Ok(()),
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        let _ = self.stop();
    }
}

/// Binds `addr` (port 0 picks a free port) and serves `store` in the
/// background. Bind errors such as a port in use are returned immediately.
pub fn serve(
    store: Arc<Store>,
    addr: SocketAddr,
    token: Option<String>,
) -> std::io::Result<ServerHandle> {
    let listener = TcpListener::bind(addr)?;
    listener.set_nonblocking(true)?;
    let addr = listener.local_addr()?;
    let (tx, rx) = oneshot::channel::<()>();
    let app = router(store, token);
    let thread = std::thread::Builder::new()
        .name("store-http".into())
        .spawn(move || {
            let runtime = tokio::runtime::Builder::new_multi_thread()
                .worker_threads(2)
                .enable_all()
                .build()?;
            runtime.block_on(async move {
                let listener = tokio::net::TcpListener::from_std(listener)?;
                axum::serve(listener, app)
                    .with_graceful_shutdown(async move {
                        let _ = rx.await;
                    })
                    .await
            })
        })?;
    tracing::info!(%addr, "store listening");
    Ok(ServerHandle {
        addr,
        shutdown: Some(tx),
        thread: Some(thread),
    })
}
