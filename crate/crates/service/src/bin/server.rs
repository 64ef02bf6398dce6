use std::net::SocketAddr;
use std::path::PathBuf;

use clap::Parser;
use repsel_service::{router, AppState, ServiceConfig};
use tracing_subscriber::EnvFilter;

#[derive(Debug, Parser)]
#[command(
    name = "repsel-server",
    version,
    about = "HTTP API for representative time-series selection"
)]
struct Args {
    #[arg(long, env = "REPSEL_LISTEN", default_value = "127.0.0.1:8080")]
    listen: SocketAddr,
    /// Directory holding ingested datasets as JSON.
    #[arg(long, env = "REPSEL_DATA_DIR", default_value = "data")]
    data_dir: PathBuf,
    /// Distance-matrix cache directory (same format as the CLI's --cache).
    #[arg(long, env = "REPSEL_CACHE_DIR", default_value = "cache")]
    cache_dir: PathBuf,
    /// Maximum upload size in bytes.
    #[arg(long, env = "REPSEL_UPLOAD_LIMIT", default_value_t = repsel_service::state::DEFAULT_UPLOAD_LIMIT)]
    upload_limit: usize,
    #[arg(long, env = "REPSEL_DEFAULT_K", default_value_t = 5)]
    default_k: usize,
    #[arg(long, env = "REPSEL_DEFAULT_ALPHA", default_value_t = 0.5)]
    default_alpha: f64,
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")),
        )
        .init();
    let args = Args::parse();
    let mut config = ServiceConfig::new(args.data_dir, args.cache_dir);
    config.upload_limit = args.upload_limit;
    config.default_params.k = args.default_k.max(1);
    config.default_params.alpha = args.default_alpha.clamp(0.0, 1.0);

    let app = router(AppState::open(config)?);
    let listener = tokio::net::TcpListener::bind(args.listen).await?;
    tracing::info!(addr = %args.listen, "listening");
    axum::serve(listener, app).await?;
    Ok(())
}
