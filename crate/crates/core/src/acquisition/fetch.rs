//! Page fetching: plain HTTP by default, an external headless renderer as an
//! alternative behind the same trait.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::process::Stdio;
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use tokio::process::Command;
use url::Url;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("fetch of {url} blocked: {reason}")]
pub struct FetchBlocked {
    pub url: String,
    pub reason: String,
}

impl FetchBlocked {
    fn new(url: &Url, reason: impl Into<String>) -> Self {
        Self {
            url: url.to_string(),
            reason: reason.into(),
        }
    }
}

#[async_trait]
pub trait PageFetcher: Send + Sync {
    /// Returns the final HTML served for `url` after redirects.
    async fn fetch_page(&self, url: &Url) -> Result<String, FetchBlocked>;
}

pub struct HttpFetcher {
    client: reqwest::Client,
}

impl HttpFetcher {
    pub fn new(timeout: Duration) -> Self {
        Self::with_overrides(timeout, &HashMap::new())
    }

    /// Like [`HttpFetcher::new`], but resolves the given host names to fixed
    /// socket addresses instead of asking DNS.
    pub fn with_overrides(timeout: Duration, resolve: &HashMap<String, SocketAddr>) -> Self {
        let mut builder = reqwest::Client::builder()
            .timeout(timeout)
            .connect_timeout(timeout)
            .redirect(reqwest::redirect::Policy::limited(10))
            .user_agent(concat!("policyscope/", env!("CARGO_PKG_VERSION")));
        for (host, addr) in resolve {
            builder = builder.resolve(host, *addr);
        }
        Self {
            client: builder.build().expect("http client configuration is static"),
        }
    }
}

#[async_trait]
impl PageFetcher for HttpFetcher {
    async fn fetch_page(&self, url: &Url) -> Result<String, FetchBlocked> {
        let response = self
            .client
            .get(url.clone())
            .header(reqwest::header::ACCEPT, "text/html,application/xhtml+xml")
            .send()
            .await
            .map_err(|e| FetchBlocked::new(url, describe(&e)))?;
        let status = response.status();
        if status.is_client_error() || status.is_server_error() {
            return Err(FetchBlocked::new(url, format!("HTTP {}", status.as_u16())));
        }
        response.text().await.map_err(|e| FetchBlocked::new(url, describe(&e)))
    }
}

fn describe(err: &reqwest::Error) -> String {
    if err.is_timeout() {
        "timed out".to_string()
    } else if err.is_connect() {
        format!("connection failed: {err}")
    } else {
        err.to_string()
    }
}

/// External renderer invocation. `{url}` in any argument is replaced by the
/// page URL; the program must print the rendered DOM to stdout.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RendererCommand {
    pub program: String,
    #[serde(default)]
    pub args: Vec<String>,
}

impl RendererCommand {
    /// Chromium's `--dump-dom` mode.
    pub fn chromium() -> Self {
        Self {
            program: "chromium".into(),
            args: vec![
                "--headless".into(),
                "--disable-gpu".into(),
                "--dump-dom".into(),
                "{url}".into(),
            ],
        }
    }
}

/// Runs a headless browser (or anything honoring [`RendererCommand`]) to
/// capture script-generated content.
pub struct RenderingFetcher {
    command: RendererCommand,
    timeout: Duration,
}

impl RenderingFetcher {
    pub fn new(command: RendererCommand, timeout: Duration) -> Self {
        Self { command, timeout }
    }
}

#[async_trait]
impl PageFetcher for RenderingFetcher {
    async fn fetch_page(&self, url: &Url) -> Result<String, FetchBlocked> {
        let args = self.command.args.iter().map(|a| a.replace("{url}", url.as_str()));
        let child = Command::new(&self.command.program)
            .args(args)
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .kill_on_drop(true)
            .spawn()
            .map_err(|e| FetchBlocked::new(url, format!("renderer failed to start: {e}")))?;
        let output = tokio::time::timeout(self.timeout, child.wait_with_output())
            .await
            .map_err(|_| FetchBlocked::new(url, "timed out"))?
            .map_err(|e| FetchBlocked::new(url, format!("renderer failed: {e}")))?;
        if !output.status.success() {
            let stderr = String::from_utf8_lossy(&output.stderr);
            return Err(FetchBlocked::new(
                url,
                format!("renderer exited with {}: {}", output.status, stderr.trim()),
            ));
        }
        Ok(String::from_utf8_lossy(&output.stdout).into_owned())
    }
}
