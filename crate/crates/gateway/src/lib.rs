//! Composition root of the simulator: loads graphs and scenarios, runs the
//! producer and consumer, and serves frames to display clients over a
//! WebSocket.

pub mod config;
pub mod server;
pub mod sim;
pub mod wire;

use std::fs::{File, OpenOptions};
use std::io::{self, Write};
use std::net::TcpListener;
use std::path::Path;
use std::sync::atomic::AtomicBool;
use std::sync::{mpsc, Arc};

use rescuesim_core::clock::ScaledClock;
use thiserror::Error;

pub use config::{ConfigError, GraphSource, Loaded, RunConfig, ScenarioSource};
pub use server::{Hub, Server};
pub use sim::{headless_script, run_live, HeadlessRun, RunEvent, Script, ScriptError, SimError, Simulation};
pub use wire::{Body, Hello, WireMessage, PROTOCOL_VERSION};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Script(#[from] ScriptError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("port {0} is already in use")]
    PortInUse(u16),
    #[error("{0}")]
    Io(#[from] io::Error),
}

fn open_log(path: Option<&Path>) -> io::Result<Option<File>> {
    path.map(|p| OpenOptions::new().create(true).append(true).open(p))
        .transpose()
}

/// Runs the simulator as configured. Headless runs print the event log to
/// `out`; live runs serve until `stop` is set.
pub fn run(config: &RunConfig, stop: Arc<AtomicBool>, out: &mut dyn Write) -> Result<(), RunError> {
    let loaded = config.load()?;
    let mut log = open_log(config.log.as_deref())?;

    if config.headless {
        let script: Script = match &config.script {
            Some(p) => std::fs::read_to_string(p)
                .map_err(|source| ConfigError::Read {
                    path: p.clone(),
                    source,
                })?
                .parse()?,
            None => Script::default(),
        };
        let result = headless_script(&loaded, &script)?;
        out.write_all(result.to_jsonl().as_bytes())?;
        if let Some(f) = log.as_mut() {
            for r in result.session_log() {
                writeln!(f, "{}", serde_json::to_string(r).expect("records serialize"))?;
            }
        }
        return Ok(());
    }

    let listener = TcpListener::bind(("127.0.0.1", config.port)).map_err(|e| match e.kind() {
        io::ErrorKind::AddrInUse => RunError::PortInUse(config.port),
        _ => RunError::Io(e),
    })?;
    let hub = Arc::new(Hub::new());
    let (touch_tx, touch_rx) = mpsc::channel();
    let server = Server::start(listener, hub.clone(), touch_tx, stop.clone())?;
    log::info!("serving on ws://{}", server.addr);

    let clock = ScaledClock::new(config.speed);
    let mut log_err = None;
    let result = run_live(&loaded, &clock, &stop, None, &touch_rx, |event, sim| {
        match event {
            RunEvent::Frame { .. } => {
                if let Some(f) = sim.frame() {
                    hub.publish(f);
                }
            }
            RunEvent::Session(r) => {
                if let Some(f) = log.as_mut() {
                    if let Err(e) = writeln!(f, "{}", serde_json::to_string(r).expect("records serialize")) {
                        log_err.get_or_insert(e);
                    }
                }
            }
            _ => {}
        }
        log::debug!("{}", event.to_line());
    });
    server.join();
    result?;
    match log_err {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}
