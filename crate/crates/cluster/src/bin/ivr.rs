//! `ivr`: run scripted cluster sessions and compare their display logs.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ivr_cluster::consumer::consumer_state;
use ivr_cluster::{
    load_config, merge_files, run_consumer, run_session, ClusterError, Launcher, SessionOptions,
};
use ivr_core::eventlog::{compare_logs, write_log};

#[derive(Parser)]
#[command(name = "ivr", version, about = "Producer/consumer cluster harness")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scripted session: start the producer and every configured consumer.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Defaults to the config's `script` entry.
        #[arg(long)]
        script: Option<PathBuf>,
        /// Directory receiving `<id>.events.jsonl` logs.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Run consumers as threads of this process instead of child processes.
        #[arg(long)]
        threads: bool,
    },
    /// Merge logs (files or directories of logs) into canonical order on stdout.
    Merge {
        #[arg(required = true)]
        logs: Vec<PathBuf>,
    },
    /// Compare two logs, or two directories of logs, after merging each.
    Compare { a: PathBuf, b: PathBuf },
    /// Run one consumer against a producer. Started by `run`.
    Consumer {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        id: u8,
        #[arg(long)]
        connect: std::net::SocketAddr,
        #[arg(long)]
        log: PathBuf,
        /// Overrides the config's storage path.
        #[arg(long)]
        storage: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn execute(cmd: Cmd) -> Result<ExitCode, ClusterError> {
    match cmd {
        Cmd::Run {
            config,
            script,
            out,
            threads,
        } => {
            let (cfg, storage) = load_config(&config)?;
            let script_path =
                match script.or_else(|| cfg.script.as_ref().map(|s| config_dir(&config).join(s))) {
                    Some(p) => p,
                    None => {
                        eprintln!("error: no --script given and the config names none");
                        return Ok(ExitCode::from(2));
                    }
                };
            let text = std::fs::read_to_string(&script_path).map_err(|e| ClusterError::Read {
                path: script_path.clone(),
                reason: e.to_string(),
            })?;
            let mut opts = SessionOptions::new(storage, out);
            if !threads {
                opts.launcher = Launcher::Processes {
                    exe: std::env::current_exe()?,
                    config_path: config.clone(),
                };
            }
            let report = run_session(&cfg, &text, opts)?;
            println!("{} ticks, {} commands", report.ticks, report.commands);
            for (id, path) in &report.logs {
                println!("consumer {id}: {}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Merge { logs } => {
            print!("{}", write_log(&merge_files(&logs)?));
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Compare { a, b } => {
            let (left, right) = (merge_files(&[a])?, merge_files(&[b])?);
            match compare_logs(&left, &right) {
                None => {
                    println!("logs match ({} events)", left.len());
                    Ok(ExitCode::SUCCESS)
                }
                Some(d) => {
                    println!("{d}");
                    Ok(ExitCode::from(1))
                }
            }
        }
        Cmd::Consumer {
            config,
            id,
            connect,
            log,
            storage,
        } => {
            let (cfg, default_storage) = load_config(&config)?;
            let Some(consumer) = cfg.consumers.iter().find(|c| c.id == id) else {
                return Err(ClusterError::UnknownConsumer(id));
            };
            let state = consumer_state(&cfg, consumer, &storage.unwrap_or(default_storage));
            run_consumer(state, connect, &log)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn config_dir(config: &Path) -> &Path {
    config.parent().unwrap_or(Path::new("."))
}
