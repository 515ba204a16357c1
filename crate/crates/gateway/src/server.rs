//! WebSocket endpoint: every client receives `hello`, the current frame and
//! then every new frame; touches from any client go to the consumer.

use std::io::ErrorKind;
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use rescuesim_core::display::{FrameState, TouchEvent};
use tungstenite::{Message, WebSocket};

use crate::wire::{Body, Hello, SeqCheck, SeqCounter, WireMessage};

const POLL: Duration = Duration::from_millis(20);

#[derive(Default)]
struct HubState {
    latest: Option<Arc<FrameState>>,
    clients: Vec<Sender<Arc<FrameState>>>,
}

/// Fan-out of frames to connected clients. Publishing and subscribing share
/// one lock, so a new client sees every frame after its first exactly once.
#[derive(Default)]
pub struct Hub(Mutex<HubState>);

impl Hub {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn publish(&self, frame: &FrameState) {
        let frame = Arc::new(frame.clone());
        let mut st = self.0.lock().unwrap_or_else(|e| e.into_inner());
        st.clients.retain(|c| c.send(frame.clone()).is_ok());
        st.latest = Some(frame);
    }

    /// The current frame, if any, and a stream of the ones after it.
    pub fn subscribe(&self) -> (Option<Arc<FrameState>>, Receiver<Arc<FrameState>>) {
        let (tx, rx) = mpsc::channel();
        let mut st = self.0.lock().unwrap_or_else(|e| e.into_inner());
        st.clients.push(tx);
        (st.latest.clone(), rx)
    }

    pub fn clients(&self) -> usize {
        self.0.lock().unwrap_or_else(|e| e.into_inner()).clients.len()
    }
}

pub struct Server {
    pub addr: SocketAddr,
    handle: JoinHandle<()>,
}

impl Server {
    /// Accepts clients until `stop` is set.
    pub fn start(
        listener: TcpListener,
        hub: Arc<Hub>,
        touches: Sender<TouchEvent>,
        stop: Arc<AtomicBool>,
    ) -> std::io::Result<Server> {
        let addr = listener.local_addr()?;
        listener.set_nonblocking(true)?;
        let handle = thread::spawn(move || {
            let mut clients = Vec::new();
            while !stop.load(Ordering::Relaxed) {
                match listener.accept() {
                    Ok((stream, peer)) => {
                        let (hub, touches, stop) = (hub.clone(), touches.clone(), stop.clone());
                        clients.push(thread::spawn(move || {
                            if let Err(e) = serve_client(stream, &hub, &touches, &stop) {
                                log::info!("client {peer}: {e}");
                            }
                        }));
                    }
                    Err(e) if e.kind() == ErrorKind::WouldBlock => thread::sleep(POLL),
                    Err(e) => log::warn!("accept failed: {e}"),
                }
            }
            for c in clients {
                let _ = c.join();
            }
        });
        Ok(Server { addr, handle })
    }

    /// Waits for the accept loop and all client threads to finish.
    pub fn join(self) {
        let _ = self.handle.join();
    }
}

// tungstenite's error type is large; it only travels up one frame here.
#[allow(clippy::result_large_err)]
fn send(ws: &mut WebSocket<TcpStream>, seq: &mut SeqCounter, body: Body) -> tungstenite::Result<()> {
    ws.send(Message::text(seq.stamp(body).encode()))
}

#[allow(clippy::result_large_err)]
fn serve_client(
    stream: TcpStream,
    hub: &Hub,
    touches: &Sender<TouchEvent>,
    stop: &AtomicBool,
) -> tungstenite::Result<()> {
    stream.set_nonblocking(false)?;
    let mut ws = tungstenite::accept(stream).map_err(|e| match e {
        tungstenite::HandshakeError::Failure(e) => e,
        tungstenite::HandshakeError::Interrupted(_) => tungstenite::Error::ConnectionClosed,
    })?;
    ws.get_mut().set_read_timeout(Some(POLL))?;

    let mut out = SeqCounter::default();
    let mut incoming = SeqCheck::default();
    let (latest, frames) = hub.subscribe();
    send(&mut ws, &mut out, Body::Hello(Hello::default()))?;
    if let Some(f) = latest {
        send(&mut ws, &mut out, Body::Frame((*f).clone()))?;
    }

    loop {
        if stop.load(Ordering::Relaxed) {
            send(&mut ws, &mut out, Body::Bye)?;
            let _ = ws.close(None);
            let _ = ws.flush();
            return Ok(());
        }
        for f in frames.try_iter() {
            send(&mut ws, &mut out, Body::Frame((*f).clone()))?;
        }
        match ws.read() {
            Ok(Message::Text(text)) => match WireMessage::decode(&text) {
                Ok(msg) => {
                    if let Err(e) = incoming.accept(&msg) {
                        log::warn!("dropping message: {e}");
                        continue;
                    }
                    match msg.body {
                        Body::Touch(t) => match t.check() {
                            Ok(()) => {
                                let _ = touches.send(t);
                            }
                            Err(e) => log::warn!("dropping touch: {e}"),
                        },
                        Body::Bye => {
                            let _ = ws.close(None);
                            let _ = ws.flush();
                            return Ok(());
                        }
                        Body::Hello(_) | Body::Frame(_) => {}
                    }
                }
                Err(e) => log::warn!("dropping message: {e}"),
            },
            Ok(Message::Close(_)) => return Ok(()),
            Ok(_) => {}
            Err(tungstenite::Error::Io(e)) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {}
            Err(tungstenite::Error::ConnectionClosed | tungstenite::Error::AlreadyClosed) => return Ok(()),
            Err(e) => return Err(e),
        }
    }
}
