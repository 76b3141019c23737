//! `ke`: serve the engine, chat with it in a terminal, ask one-shot
//! questions, validate knowledge and scene files, export traces.
//!
//! Exit codes: 0 success, 1 validation violations, 2 load or startup
//! failure, 3 unparseable input, 4 engine error.

mod repl;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use ke_core::knowledge_file::load_knowledge;
use ke_core::sim::load_scene;
use ke_core::{Engine, TurnKind};
use ke_server::ServerConfig;

pub const EXIT_VIOLATION: u8 = 1;
pub const EXIT_LOAD: u8 = 2;
pub const EXIT_UNPARSEABLE: u8 = 3;
pub const EXIT_ENGINE: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "ke", version, about = "Knowledge engine for explainable robot reasoning")]
struct Cli {
    #[command(flatten)]
    config: Config,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args, Debug, Clone)]
struct Config {
    /// Knowledge file (concepts and action patterns)
    #[arg(long, global = true, env = "KE_KNOWLEDGE", default_value = "knowledge/seed.json")]
    knowledge: PathBuf,
    /// Scene file (rooms, objects, agent)
    #[arg(long, global = true, env = "KE_SCENE", default_value = "scenes/lab.json")]
    scene: PathBuf,
    /// Listen address for `serve`, server address for `export-trace`
    #[arg(long, global = true, env = "KE_ADDR", default_value = "127.0.0.1:8080")]
    addr: String,
    /// Simulator ticks per second
    #[arg(long, global = true, env = "KE_TICK_HZ", default_value_t = 20.0, value_parser = positive)]
    tick_hz: f64,
    /// Log filter, e.g. `info` or `ke_server=debug`
    #[arg(long, global = true, env = "KE_LOG", default_value = "warn")]
    log: String,
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("`{s}` is not a positive number")),
    }
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Run the HTTP/WebSocket service until interrupted
    Serve {
        /// Where the knowledge is saved on shutdown (default: --knowledge)
        #[arg(long)]
        save_to: Option<PathBuf>,
        /// Directory of a built web client to serve at /
        #[arg(long, env = "KE_STATIC")]
        static_dir: Option<PathBuf>,
    },
    /// Chat on stdin; prints each reply with its compact trace
    Repl,
    /// Answer one message and exit
    Ask {
        text: String,
        /// Print the full trace (or the turn for non-questions) as JSON
        #[arg(long)]
        json: bool,
    },
    /// Check knowledge and scene files and list every violation
    Validate,
    /// Print the JSON trace of a turn from a running server
    ExportTrace { turn: u64 },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_new(&cli.config.log).unwrap_or_else(|_| "warn".into()))
        .with_writer(std::io::stderr)
        .init();
    let code = match cli.command {
        Cmd::Serve { save_to, static_dir } => serve(&cli.config, save_to, static_dir),
        Cmd::Repl => match load(&cli.config) {
            Ok(engine) => {
                let stdin = std::io::stdin();
                repl::run(engine, stdin.lock(), &mut std::io::stdout().lock()).map_or(EXIT_ENGINE, |()| 0)
            }
            Err(code) => code,
        },
        Cmd::Ask { text, json } => ask(&cli.config, &text, json),
        Cmd::Validate => validate(&cli.config),
        Cmd::ExportTrace { turn } => export_trace(&cli.config, turn),
    };
    ExitCode::from(code)
}

fn load(config: &Config) -> Result<Engine, u8> {
    for (what, path) in [("knowledge", &config.knowledge), ("scene", &config.scene)] {
        if !path.exists() {
            eprintln!("error: {what} file {} does not exist", path.display());
            return Err(EXIT_LOAD);
        }
    }
    Engine::load(&config.knowledge, &config.scene).map_err(|e| {
        eprintln!("error: cannot load: {e}");
        EXIT_LOAD
    })
}

fn serve(config: &Config, save_to: Option<PathBuf>, static_dir: Option<PathBuf>) -> u8 {
    let engine = match load(config) {
        Ok(e) => e,
        Err(code) => return code,
    };
    let rt = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("error: cannot start runtime: {e}");
            return EXIT_LOAD;
        }
    };
    let save_to = save_to.unwrap_or_else(|| config.knowledge.clone());
    let server_config = ServerConfig { tick_hz: config.tick_hz, static_dir, ..ServerConfig::default() };
    let result: anyhow::Result<()> = rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(&config.addr)
            .await
            .with_context(|| format!("cannot listen on {}", config.addr))?;
        println!("listening on http://{}", listener.local_addr()?);
        std::io::stdout().flush()?;
        let engine = ke_server::serve(listener, engine, server_config, shutdown_signal()).await?;
        let engine = engine.read().await;
        engine.save_knowledge(&save_to).with_context(|| format!("cannot save {}", save_to.display()))?;
        println!("saved knowledge to {}", save_to.display());
        Ok(())
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_LOAD
        }
    }
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        () = ctrl_c => {}
        () = term => {}
    }
    tracing::info!("shutting down");
}

fn ask(config: &Config, text: &str, json: bool) -> u8 {
    let mut engine = match load(config) {
        Ok(e) => e,
        Err(code) => return code,
    };
    let session = engine.create_session();
    let turn = engine.post_chat(&session, text).expect("fresh session exists");
    if turn.kind == TurnKind::Command {
        engine.run_until_idle(repl::MAX_TICKS);
    }
    if json {
        let value = match engine.trace(turn.turn_id) {
            Ok(trace) => serde_json::to_string_pretty(trace),
            Err(_) => serde_json::to_string_pretty(&turn),
        };
        let _ = writeln!(std::io::stdout(), "{}", value.expect("turns serialize"));
    } else {
        let _ = writeln!(std::io::stdout(), "{}", turn.reply);
    }
    match (turn.kind, &turn.error) {
        (TurnKind::Unparseable, _) => EXIT_UNPARSEABLE,
        (_, Some(e)) => {
            eprintln!("error: {}: {}", e.code, e.message);
            EXIT_ENGINE
        }
        _ => 0,
    }
}

fn validate(config: &Config) -> u8 {
    let mut violations = Vec::new();
    let graph = match load_knowledge(&config.knowledge) {
        Ok((mut graph, counts)) => {
            violations.extend(graph.check_invariants().into_iter().map(|v| format!("{}: {v}", config.knowledge.display())));
            match load_scene(&config.scene, &mut graph) {
                Ok(scene) => {
                    violations.extend(scene.check_against(&graph).into_iter().map(|v| format!("{}: {v}", config.scene.display())));
                    violations.extend(graph.check_invariants().into_iter().map(|v| format!("{}: {v}", config.scene.display())));
                }
                Err(ke_core::sim::SceneError::Invalid(issues)) => {
                    violations.extend(issues.into_iter().map(|v| format!("{}: {v}", config.scene.display())));
                }
                Err(e) => violations.push(format!("{}: {e}", config.scene.display())),
            }
            Some((graph, counts))
        }
        Err(e) => {
            violations.push(format!("{}: {e}", config.knowledge.display()));
            None
        }
    };
    if violations.is_empty() {
        let (graph, counts) = graph.expect("loaded without violations");
        println!(
            "ok: {} concepts, {} knowledge edges, {} instances",
            counts.concepts,
            counts.edges,
            graph.instances().count()
        );
        0
    } else {
        for v in &violations {
            println!("violation: {v}");
        }
        println!("{} violation(s)", violations.len());
        EXIT_VIOLATION
    }
}

fn export_trace(config: &Config, turn: u64) -> u8 {
    let url = format!("http://{}/api/trace/{turn}", config.addr);
    let agent: ureq::Agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
    let mut response = match agent.get(&url).call() {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: cannot reach {url}: {e}");
            return EXIT_LOAD;
        }
    };
    let status = response.status();
    let body: serde_json::Value = match response.body_mut().read_json() {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: bad response from {url}: {e}");
            return EXIT_ENGINE;
        }
    };
    if status.is_success() {
        println!("{}", serde_json::to_string_pretty(&body).expect("json values serialize"));
        0
    } else {
        eprintln!("error: {}: {}", body["error"]["code"], body["error"]["message"]);
        EXIT_ENGINE
    }
}
