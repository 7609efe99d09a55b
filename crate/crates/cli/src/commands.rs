//! Subcommand implementations. Each returns the text to print on success.

use std::fmt::Write as _;
use std::fs;
use std::net::{Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};

use musictraces_core::{parse_chord_corpus, train_markov, Engine};
use musictraces_protocol::server::{self, ClockMode, ServerOptions};
use musictraces_protocol::{replay_text, Digest, ReplayError};

use crate::run::{load_config, load_model, run_scenario, scenario_config, CliError, Exit};
use crate::scenario::Scenario;

pub const DEFAULT_PORT: u16 = 7878;

fn read(path: &Path, what: &str) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::input(format!("cannot read {what} {}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))
}

pub struct RunArgs<'a> {
    pub scenario: &'a Path,
    pub config: Option<&'a Path>,
    pub seed: Option<u64>,
    pub out: Option<&'a Path>,
}

/// Runs a scenario headless. With `out`, writes `session.log` and
/// `timeline.tsv` into that directory.
pub fn run(args: &RunArgs<'_>) -> Result<String, CliError> {
    let loaded = load_config(args.config)?;
    let text = read(args.scenario, "scenario")?;
    let scn = Scenario::parse(&text).map_err(|e| CliError::input(format!("{}: {e}", args.scenario.display())))?;
    let cfg = scenario_config(&scn, &loaded.config, args.seed)?;
    let model = load_model(&cfg, &loaded.base_dir)?;
    let out = run_scenario(&scn, cfg, model)?;
    if let Some(dir) = args.out {
        fs::create_dir_all(dir).map_err(|e| CliError::input(format!("cannot create {}: {e}", dir.display())))?;
        write(&dir.join("session.log"), &out.log)?;
        write(&dir.join("timeline.tsv"), &out.timeline.to_tsv())?;
    }
    let mut s = format!("final_hash {}\nend_tick {}\n", Digest(out.final_hash), out.end_tick);
    s.push_str(&out.timeline.summary());
    Ok(s)
}

/// Replays a session log. Divergence exits 1; an unusable log exits 2.
pub fn replay(log: &Path) -> Result<String, CliError> {
    let text = read(log, "log")?;
    match replay_text(&text) {
        Ok(o) => Ok(format!(
            "ok final_hash {} end_tick {} hash_checks {}\n",
            Digest(o.final_hash),
            o.engine.tick(),
            o.hash_checks
        )),
        Err(e @ (ReplayError::HashMismatch { .. } | ReplayError::Rejected { .. })) => {
            Err(CliError::new(Exit::VerifyFailed, format!("{}: {e}", log.display())))
        }
        Err(e) => Err(CliError::input(format!("{}: {e}", log.display()))),
    }
}

/// Trains a chord model from a corpus file and writes it to `out`.
pub fn train(corpus: &Path, out: &Path) -> Result<String, CliError> {
    let text = read(corpus, "corpus")?;
    let parsed = parse_chord_corpus(&text).map_err(|e| CliError::input(format!("{}: {e}", corpus.display())))?;
    let model = train_markov(&parsed.sequences).map_err(|e| CliError::input(format!("{}: {e}", corpus.display())))?;
    write(out, &model.to_text())?;
    let mut s = format!(
        "sequences {}\nvocabulary {}\n",
        parsed.sequences.len(),
        model.vocabulary().len()
    );
    for &chord in model.vocabulary() {
        let top: Vec<String> = model
            .top_transitions(chord, 3)
            .into_iter()
            .map(|(to, p, n)| format!("{to} {p:.3} ({n})"))
            .collect();
        let _ = writeln!(
            s,
            "{chord} -> {}",
            if top.is_empty() { "none".into() } else { top.join(", ") }
        );
    }
    Ok(s)
}

pub struct ServeArgs {
    pub port: u16,
    pub ws_port: Option<u16>,
    pub config: Option<PathBuf>,
    pub log: Option<PathBuf>,
}

/// Serves a live session on the wall clock until interrupted.
pub fn serve(args: &ServeArgs) -> Result<String, CliError> {
    let loaded = load_config(args.config.as_deref())?;
    loaded.config.validate().map_err(CliError::config)?;
    let model = load_model(&loaded.config, &loaded.base_dir)?;
    let engine = Engine::new(loaded.config, model).map_err(|e| CliError::config(e.to_string()))?;
    let log_path = args.log.clone().unwrap_or_else(|| PathBuf::from("session.log"));
    let sink = fs::File::create(&log_path)
        .map_err(|e| CliError::input(format!("cannot create {}: {e}", log_path.display())))?;
    let started = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0);
    let opts = ServerOptions {
        tcp: SocketAddr::from((Ipv4Addr::UNSPECIFIED, args.port)),
        ws: args.ws_port.map(|p| SocketAddr::from((Ipv4Addr::UNSPECIFIED, p))),
        started_unix_ms: started,
        ..ServerOptions::local(ClockMode::Wall)
    };
    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::input(e.to_string()))?;
    rt.block_on(async {
        let io = |e: std::io::Error| CliError::input(format!("server: {e}"));
        let handle = server::start(engine, sink, opts).await.map_err(io)?;
        eprintln!("listening on tcp {}", handle.tcp_addr);
        if let Some(ws) = handle.ws_addr {
            eprintln!("listening on ws {ws}");
        }
        tokio::signal::ctrl_c().await.map_err(io)?;
        let summary = handle.shutdown().await.map_err(io)?;
        Ok(format!(
            "final_hash {}\nend_tick {}\nlog {}\n",
            Digest(summary.final_hash),
            summary.end_tick,
            log_path.display()
        ))
    })
}
