use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;
use std::sync::Arc;

use clap::Parser;
use shower_telemetry::{router, Clock, Store, StoreOptions, SyncMode};

/// Serve telemetry channels over HTTP.
#[derive(Debug, Parser)]
#[command(name = "telemetry-serve", version)]
struct Args {
    /// Port to listen on; 0 picks a free one.
    #[arg(long, default_value_t = 3000)]
    port: u16,
    /// Directory holding the channel logs.
    #[arg(long)]
    data_dir: PathBuf,
    /// Take `created_at` from clients instead of the server clock.
    #[arg(long)]
    sim_time: bool,
    /// fsync every appended record.
    #[arg(long)]
    fsync: bool,
    /// Address to bind.
    #[arg(long, default_value = "127.0.0.1")]
    bind: IpAddr,
}

#[tokio::main]
async fn main() -> std::process::ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    let options = StoreOptions {
        clock: if args.sim_time {
            Clock::Simulated
        } else {
            Clock::Wall
        },
        sync: if args.fsync {
            SyncMode::Fsync
        } else {
            SyncMode::Flush
        },
        key_seed: None,
    };
    let store = match Store::recover(&args.data_dir, options) {
        Ok(store) => Arc::new(store),
        Err(e) => {
            log::error!("cannot open {}: {e}", args.data_dir.display());
            return std::process::ExitCode::from(2);
        }
    };
    let listener = match tokio::net::TcpListener::bind(SocketAddr::new(args.bind, args.port)).await
    {
        Ok(l) => l,
        Err(e) => {
            log::error!("cannot bind {}:{}: {e}", args.bind, args.port);
            return std::process::ExitCode::from(2);
        }
    };
    let addr = listener
        .local_addr()
        .expect("bound listener has an address");
    // Scripts and tests read the port from this line.
    println!("listening on http://{addr}");
    log::info!(
        "{} channels recovered from {}",
        store.channels().len(),
        args.data_dir.display()
    );

    let served = axum::serve(listener, router(store))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await;
    match served {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            log::error!("server error: {e}");
            std::process::ExitCode::from(2)
        }
    }
}
