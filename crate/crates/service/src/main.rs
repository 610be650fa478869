use std::net::SocketAddr;
use std::path::PathBuf;
use std::time::Duration;

use clap::Parser;
use fairfront::DEFAULT_SWEEP_CAP;
use fairfront_service::{router, AppState, ServiceConfig};

#[derive(Parser)]
#[command(name = "fairfront-service", version, about = "HTTP service for interactive threshold sweeps")]
struct Args {
    #[arg(long, env = "PORT", default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    /// Snapshot sessions here and restore them on start.
    #[arg(long, env = "PERSIST_DIR")]
    persist_dir: Option<PathBuf>,
    /// Idle session lifetime in seconds.
    #[arg(long, default_value_t = 6 * 3600)]
    ttl_secs: u64,
    #[arg(long, default_value_t = 64 * 1024 * 1024)]
    max_upload_bytes: usize,
    #[arg(long, default_value_t = DEFAULT_SWEEP_CAP)]
    sweep_cap: u64,
    /// Browser origin allowed by CORS; any origin when omitted.
    #[arg(long, env = "CORS_ORIGIN")]
    cors_origin: Option<String>,
}

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args = Args::parse();
    let state = AppState::new(ServiceConfig {
        ttl: Duration::from_secs(args.ttl_secs),
        persist_dir: args.persist_dir,
        max_upload_bytes: args.max_upload_bytes,
        sweep_cap: args.sweep_cap,
        cors_origin: args.cors_origin,
    })?;
    tokio::spawn(state.clone().eviction_loop());
    let addr: SocketAddr = format!("{}:{}", args.host, args.port).parse()?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{addr} ({} restored sessions)", state.session_count());
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
