//! A local web server that hosts static fixture sites by host name.
//!
//! Each subdirectory of the root is one host (`root/shop.test/...`). A URL
//! path maps to a file by dropping the leading slash, replacing the other
//! slashes with `-` and adding `.html`, so `/legal/privacy` is served from
//! `legal-privacy.html` and `/` from `index.html`. Two paths work on every
//! host: `/__status/{code}` answers with that status and `/__slow/{ms}`
//! answers after a delay.
//!
//! Point an [`HttpFetcher`] at it with [`FixtureServer::fetcher`], which
//! resolves every fixture host name to the server.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use axum::extract::{Request, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Router;
use tokio::sync::oneshot;

use crate::acquisition::HttpFetcher;

pub struct FixtureServer {
    addr: SocketAddr,
    hosts: Vec<String>,
    shutdown: Option<oneshot::Sender<()>>,
}

impl FixtureServer {
    /// Binds an ephemeral local port and starts serving `root` on the
    /// current tokio runtime.
    pub async fn start(root: impl Into<PathBuf>) -> std::io::Result<Self> {
        let root: PathBuf = root.into();
        let mut hosts: Vec<String> = std::fs::read_dir(&root)?
            .filter_map(Result::ok)
            .filter(|e| e.path().is_dir())
            .filter_map(|e| e.file_name().into_string().ok())
            .collect();
        hosts.sort();

        let listener = tokio::net::TcpListener::bind(("127.0.0.1", 0)).await?;
        let addr = listener.local_addr()?;
        let app = Router::new().fallback(serve_file).with_state(Arc::new(root));
        let (tx, rx) = oneshot::channel::<()>();
        tokio::spawn(async move {
            let _ = axum::serve(listener, app)
                .with_graceful_shutdown(async {
                    let _ = rx.await;
                })
                .await;
        });
        Ok(Self {
            addr,
            hosts,
            shutdown: Some(tx),
        })
    }

    /// The bundled corpus shipped with this crate.
    pub fn bundled_root() -> PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join("sites")
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn hosts(&self) -> &[String] {
        &self.hosts
    }

    /// Host name overrides that send every fixture host to this server.
    pub fn resolve_map(&self) -> HashMap<String, SocketAddr> {
        self.hosts.iter().map(|h| (h.clone(), self.addr)).collect()
    }

    pub fn fetcher(&self, timeout: Duration) -> HttpFetcher {
        HttpFetcher::with_overrides(timeout, &self.resolve_map())
    }

    /// `http://{host}{path}`, as a client would see it.
    pub fn url(&self, host: &str, path: &str) -> url::Url {
        url::Url::parse(&format!("http://{host}{path}")).expect("fixture URLs are well formed")
    }
}

impl Drop for FixtureServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
    }
}

async fn serve_file(State(root): State<Arc<PathBuf>>, request: Request) -> Response {
    let path = percent_encoding::percent_decode_str(request.uri().path())
        .decode_utf8_lossy()
        .into_owned();
    if let Some(code) = path.strip_prefix("/__status/") {
        let status = code.parse().ok().and_then(|c| StatusCode::from_u16(c).ok());
        return match status {
            Some(status) => (status, format!("status {code}")).into_response(),
            None => StatusCode::BAD_REQUEST.into_response(),
        };
    }
    if let Some(ms) = path.strip_prefix("/__slow/") {
        let ms: u64 = ms.parse().unwrap_or(1000);
        tokio::time::sleep(Duration::from_millis(ms)).await;
        return html("<html><body><p>slow page</p></body></html>".into());
    }

    let host = request
        .headers()
        .get(header::HOST)
        .and_then(|h| h.to_str().ok())
        .map(|h| h.split(':').next().unwrap_or(h).to_ascii_lowercase())
        .unwrap_or_default();
    let Some(file) = file_name(&path) else {
        return StatusCode::NOT_FOUND.into_response();
    };
    if host.is_empty() || host.contains(['/', '\\']) || host.starts_with('.') {
        return StatusCode::NOT_FOUND.into_response();
    }
    match tokio::fs::read_to_string(root.join(&host).join(file)).await {
        Ok(body) => html(body),
        Err(_) => StatusCode::NOT_FOUND.into_response(),
    }
}

fn file_name(path: &str) -> Option<String> {
    let trimmed = path.trim_start_matches('/').trim_end_matches('/');
    if trimmed.is_empty() {
        return Some("index.html".into());
    }
    if trimmed.contains("..") || trimmed.contains('\\') {
        return None;
    }
    let flat = trimmed.replace('/', "-");
    Some(if flat.ends_with(".html") {
        flat
    } else {
        format!("{flat}.html")
    })
}

fn html(body: String) -> Response {
    ([(header::CONTENT_TYPE, "text/html; charset=utf-8")], body).into_response()
}
