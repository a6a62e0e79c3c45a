use std::net::SocketAddr;

use clap::Parser;
use ppos_service::{router, ServiceConfig};
use tracing_subscriber::EnvFilter;

/// HTTP service for CP, PPoS and PoS.
#[derive(Parser, Debug)]
#[command(name = "ppos-service", version)]
struct Opts {
    #[arg(long, env = "PPOS_BIND", default_value = "127.0.0.1")]
    bind: std::net::IpAddr,
    #[arg(long, env = "PPOS_PORT", default_value_t = 8080)]
    port: u16,
    /// Max beta-binomial indicator evaluations per request.
    #[arg(long, env = "PPOS_BETABINOM_CAP", default_value_t = ppos_core::api::DEFAULT_BETABINOM_CAP)]
    betabinom_cap: u64,
    /// Allowed CORS origin (e.g. http://localhost:5173, or *).
    #[arg(long, env = "PPOS_CORS_ORIGIN")]
    cors_origin: Option<String>,
    /// Max request body in bytes.
    #[arg(long, env = "PPOS_BODY_LIMIT", default_value_t = 64 * 1024)]
    body_limit: usize,
}

#[tokio::main]
async fn main() -> std::io::Result<()> {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info,tower_http=debug")))
        .init();
    let opts = Opts::parse();
    let cfg = ServiceConfig {
        betabinom_cap: opts.betabinom_cap,
        cors_origin: opts.cors_origin,
        body_limit: opts.body_limit,
    };
    let addr = SocketAddr::new(opts.bind, opts.port);
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(%addr, ?cfg, "listening");
    axum::serve(listener, router(cfg))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
