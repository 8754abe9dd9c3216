use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use slicenet::api::Scenario;
use slicenet::emulator::{run_scenario, to_ndjson, EmulatorConfig};
use slicenet::fixtures;
use slicenet::substrate::Topology;
use slicectl::server::{router, spawn_ticker, AppState};

#[derive(Parser)]
#[command(name = "slicectl", version, about = "Run, serve and inspect slicenet emulations")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario script headless and write its event log.
    Run {
        /// Topology document; defaults to the bundled demo topology.
        #[arg(long)]
        topology: Option<PathBuf>,
        /// Scenario script; defaults to the bundled demo scenario.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Log destination. Without it the log goes to stdout and metrics to stderr.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the HTTP control plane over a live emulation.
    Serve {
        #[arg(long)]
        topology: Option<PathBuf>,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Sim milliseconds per wall millisecond; 0 pauses the clock between commands.
        #[arg(long, default_value_t = 1.0)]
        time_scale: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
    },
    /// Print the views of a running server.
    Views {
        #[arg(long, default_value = "http://127.0.0.1:8080")]
        url: String,
    },
}

fn read(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

/// Writes to stdout; a closed pipe (`| head`) is not an error.
fn stdout(text: &str) -> Result<(), String> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.to_string()),
        _ => Ok(()),
    }
}

fn topology(path: Option<&Path>) -> Result<Topology, String> {
    match path {
        None => Ok(fixtures::demo_topology()),
        Some(p) => Topology::load(&read(p)?).map_err(|e| format!("{}: {e}", p.display())),
    }
}

fn run(topo: Option<&Path>, scenario: Option<&Path>, seed: u64, out: Option<&Path>) -> Result<(), String> {
    let topo = topology(topo)?;
    let doc = match scenario {
        None => fixtures::DEMO_SCENARIO.to_string(),
        Some(p) => read(p)?,
    };
    let script = Scenario::parse(&doc).map_err(|e| e.to_string())?;
    let outcome = run_scenario(topo, &script, EmulatorConfig::with_seed(seed));
    let log = to_ndjson(&outcome.log);
    let metrics = serde_json::to_string_pretty(&outcome.metrics).expect("metrics serialize");
    match out {
        Some(p) => {
            std::fs::write(p, log).map_err(|e| format!("{}: {e}", p.display()))?;
            stdout(&format!("{metrics}\n"))?;
        }
        None => {
            stdout(&log)?;
            eprintln!("{metrics}");
        }
    }
    Ok(())
}

async fn serve(topo: Option<&Path>, addr: SocketAddr, time_scale: f64, seed: u64) -> Result<(), String> {
    if !time_scale.is_finite() || time_scale < 0.0 {
        return Err(format!("time scale must be a non-negative number, got {time_scale}"));
    }
    let state = AppState::new(topology(topo)?, seed);
    spawn_ticker(state.clone(), time_scale);
    let listener = tokio::net::TcpListener::bind(addr).await.map_err(|e| format!("bind {addr}: {e}"))?;
    eprintln!("slicectl listening on http://{addr} (time scale {time_scale})");
    axum::serve(listener, router(state)).await.map_err(|e| e.to_string())
}

async fn views(url: &str) -> Result<(), String> {
    let url = format!("{}/views", url.trim_end_matches('/'));
    let resp = reqwest::get(&url).await.map_err(|e| format!("{url}: {e}"))?;
    let status = resp.status();
    let body = resp.text().await.map_err(|e| format!("{url}: {e}"))?;
    if !status.is_success() {
        return Err(format!("{url}: {status}: {body}"));
    }
    let v: serde_json::Value = serde_json::from_str(&body).map_err(|e| format!("{url}: {e}"))?;
    stdout(&format!("{}\n", serde_json::to_string_pretty(&v).expect("value serializes")))
}

#[tokio::main]
async fn main() -> ExitCode {
    let cli = Cli::parse();
    let r = match cli.cmd {
        Cmd::Run { topology, scenario, seed, out } => run(topology.as_deref(), scenario.as_deref(), seed, out.as_deref()),
        Cmd::Serve { topology, port, time_scale, seed, host } => {
            serve(topology.as_deref(), SocketAddr::new(host, port), time_scale, seed).await
        }
        Cmd::Views { url } => views(&url).await,
    };
    match r {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("slicectl: {e}");
            ExitCode::FAILURE
        }
    }
}
