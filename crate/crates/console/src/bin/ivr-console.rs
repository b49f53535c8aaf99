//! `ivr-console`: serve the console API.

use std::path::PathBuf;

use clap::Parser;

#[derive(Parser)]
#[command(
    name = "ivr-console",
    version,
    about = "Mapping authoring and live cluster control over HTTP"
)]
struct Cli {
    #[arg(long, default_value = "127.0.0.1:8080")]
    listen: String,
    /// Directory that scene, mapping and config paths are relative to.
    #[arg(long, default_value = ".")]
    storage: PathBuf,
    /// Directory receiving consumer logs of attached sessions.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[tokio::main]
async fn main() -> std::process::ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let listener = match tokio::net::TcpListener::bind(&cli.listen).await {
        Ok(l) => l,
        Err(e) => {
            eprintln!("error: cannot listen on {}: {e}", cli.listen);
            return std::process::ExitCode::from(1);
        }
    };
    log::info!("console listening on {}", cli.listen);
    let app = ivr_console::router(ivr_console::AppState::new(cli.storage, cli.out));
    if let Err(e) = axum::serve(listener, app).await {
        eprintln!("error: {e}");
        return std::process::ExitCode::from(1);
    }
    std::process::ExitCode::SUCCESS
}
