use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use musictraces_cli::commands::{self, RunArgs, ServeArgs, DEFAULT_PORT};
use musictraces_cli::generator;

#[derive(Parser)]
#[command(name = "musictraces", version, about = "Collaborative music drawing sessions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario headless and record a session log.
    Run {
        scenario: PathBuf,
        #[arg(long, env = "MUSICTRACES_CONFIG")]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Directory for session.log and timeline.tsv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Verify that a session log replays to its recorded hashes.
    Replay { log: PathBuf },
    /// Train a chord transition model from a corpus.
    Train {
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print a random scenario.
    Generate {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 2000)]
        events: usize,
    },
    /// Serve a live session over TCP and optionally WebSocket.
    Serve {
        #[arg(long, default_value_t = DEFAULT_PORT)]
        port: u16,
        #[arg(long)]
        ws_port: Option<u16>,
        #[arg(long, env = "MUSICTRACES_CONFIG")]
        config: Option<PathBuf>,
        #[arg(long)]
        log: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Run {
            scenario,
            config,
            seed,
            out,
        } => commands::run(&RunArgs {
            scenario,
            config: config.as_deref(),
            seed: *seed,
            out: out.as_deref(),
        }),
        Command::Replay { log } => commands::replay(log),
        Command::Train { corpus, out } => commands::train(corpus, out),
        Command::Generate { seed, events } => Ok(generator::random_scenario(*seed, *events).to_text()),
        Command::Serve {
            port,
            ws_port,
            config,
            log,
        } => commands::serve(&ServeArgs {
            port: *port,
            ws_port: *ws_port,
            config: config.clone(),
            log: log.clone(),
        }),
    };
    match result {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit as u8)
        }
    }
}
