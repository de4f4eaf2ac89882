//! Runs the local assessment service.
//!
//! Usage: `policyscope [CONFIG.toml]`. Environment variables prefixed with
//! `POLICYSCOPE_` override the file; `RUST_LOG` controls logging.

use std::path::PathBuf;
use std::process::ExitCode;

use policyscope::{Service, ServiceConfig};
use tracing_subscriber::EnvFilter;

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .init();

    let path = match std::env::args().nth(1).as_deref() {
        Some("-h" | "--help") => {
            println!("usage: policyscope [CONFIG.toml]");
            return ExitCode::SUCCESS;
        }
        other => other.map(PathBuf::from),
    };
    let config = match ServiceConfig::load(path.as_deref()) {
        Ok(config) => config,
        Err(e) => {
            eprintln!("policyscope: {e}");
            return ExitCode::from(2);
        }
    };
    let service = match Service::from_config(&config) {
        Ok(service) => service,
        Err(e) => {
            eprintln!("policyscope: {e}");
            return ExitCode::FAILURE;
        }
    };
    let listener = match tokio::net::TcpListener::bind(config.bind).await {
        Ok(listener) => listener,
        Err(e) => {
            eprintln!("policyscope: cannot bind {}: {e}", config.bind);
            return ExitCode::FAILURE;
        }
    };
    tracing::info!(addr = %config.bind, mock = config.provider.mock, study_mode = config.study_mode, "listening");
    let shutdown = async {
        let _ = tokio::signal::ctrl_c().await;
        tracing::info!("shutting down");
    };
    match service.serve(listener, shutdown).await {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("policyscope: {e}");
            ExitCode::FAILURE
        }
    }
}
