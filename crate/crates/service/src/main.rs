use std::net::SocketAddr;
use std::path::PathBuf;
use std::time::Duration;

use clap::Parser;
use random_wheel_service::{run, ServiceConfig};

#[derive(Parser)]
#[command(name = "rwheel-service", version, about = "Serve recommendations from a trained random wheel model")]
struct Args {
    /// Model file written by `rwheel train`.
    #[arg(long, env = "RW_MODEL")]
    model: PathBuf,
    #[arg(long, env = "RW_BIND", default_value = "127.0.0.1:8080")]
    bind: SocketAddr,
    #[arg(long, default_value_t = 64 * 1024)]
    max_body_bytes: usize,
    #[arg(long, default_value_t = 30)]
    timeout_secs: u64,
    /// Allowed CORS origin; repeat for several.
    #[arg(long = "cors-origin")]
    cors_origins: Vec<String>,
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info,tower_http=info".into()),
        )
        .init();
    let args = Args::parse();
    run(ServiceConfig {
        bind: args.bind,
        model_path: args.model,
        max_body_bytes: args.max_body_bytes,
        request_timeout: Duration::from_secs(args.timeout_secs),
        cors_origins: args.cors_origins,
    })
    .await
}
