use std::net::SocketAddr;
use std::path::PathBuf;

use clap::Parser;
use prefbo_service::{router, AppState};
use tower_http::services::ServeDir;
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "serve", version, about = "Serve optimization sessions over HTTP")]
struct Args {
    /// Directory holding one event log per session.
    #[arg(long, env = "PREFBO_DATA_DIR", default_value = "data")]
    data_dir: PathBuf,
    #[arg(long, env = "PREFBO_ADDR", default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
    /// Static front-end assets served at `/`.
    #[arg(long, env = "PREFBO_STATIC_DIR")]
    static_dir: Option<PathBuf>,
}

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .init();
    let args = Args::parse();
    let app = AppState::open(&args.data_dir)?;
    app.resume().await;
    let mut routes = router(app);
    if let Some(dir) = args.static_dir {
        routes = routes.fallback_service(ServeDir::new(dir));
    }
    let listener = tokio::net::TcpListener::bind(args.addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, routes)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
