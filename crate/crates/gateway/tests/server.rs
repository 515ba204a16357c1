use std::net::{TcpListener, TcpStream};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{mpsc, Arc};
use std::time::Duration;

use rescuesim_core::bus::{BusRegion, MemoryMap};
use rescuesim_core::display::{FrameState, TouchAction, TouchEvent};
use rescuesim_gateway::wire::SeqCounter;
use rescuesim_gateway::{run, Body, Hub, RunConfig, RunError, Server, Simulation, WireMessage, PROTOCOL_VERSION};
use tungstenite::stream::MaybeTlsStream;
use tungstenite::{Message, WebSocket};

type Client = WebSocket<MaybeTlsStream<TcpStream>>;

fn graph() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/data/graphs/bpr-demo.json")
}

fn connect(addr: std::net::SocketAddr) -> Client {
    let (ws, _) = tungstenite::connect(format!("ws://{addr}")).unwrap();
    if let MaybeTlsStream::Plain(s) = ws.get_ref() {
        s.set_read_timeout(Some(Duration::from_secs(5))).unwrap();
    }
    ws
}

fn next(ws: &mut Client) -> WireMessage {
    loop {
        match ws.read().unwrap() {
            Message::Text(t) => return WireMessage::decode(&t).unwrap(),
            Message::Close(_) => panic!("closed"),
            _ => {}
        }
    }
}

fn start() -> (Server, Arc<Hub>, mpsc::Receiver<TouchEvent>, Arc<AtomicBool>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let hub = Arc::new(Hub::new());
    let (tx, rx) = mpsc::channel();
    let stop = Arc::new(AtomicBool::new(false));
    let server = Server::start(listener, hub.clone(), tx, stop.clone()).unwrap();
    (server, hub, rx, stop)
}

fn frames() -> Vec<FrameState> {
    let config = RunConfig::new(graph(), "synth:stable:1:5".parse().unwrap());
    let mut sim = Simulation::new(&config.load().unwrap()).unwrap();
    let bus = BusRegion::new(MemoryMap::default());
    // the header clock makes consecutive seconds distinct
    let mut at = |secs| {
        sim.tick(&bus, Duration::from_secs(secs)).unwrap();
        sim.frame().unwrap().clone()
    };
    let (a, b) = (at(0), at(1));
    assert_ne!(a, b);
    vec![a, b]
}

fn wait_for_clients(hub: &Hub, n: usize) {
    for _ in 0..250 {
        if hub.clients() >= n {
            return;
        }
        std::thread::sleep(Duration::from_millis(20));
    }
    panic!("clients never subscribed");
}

#[test]
fn two_clients_see_the_same_frames() {
    let (server, hub, _touches, stop) = start();
    let fs = frames();
    hub.publish(&fs[0]);

    let mut clients = [connect(server.addr), connect(server.addr)];
    wait_for_clients(&hub, 2);
    hub.publish(&fs[1]);

    for ws in &mut clients {
        let hello = next(ws);
        assert_eq!(hello.seq, 1);
        match hello.body {
            Body::Hello(h) => assert_eq!((h.protocol, h.width, h.height), (PROTOCOL_VERSION, 320, 240)),
            other => panic!("expected hello, got {other:?}"),
        }
        let first = next(ws);
        let second = next(ws);
        assert_eq!((first.seq, second.seq), (2, 3));
        assert_eq!(first.body, Body::Frame(fs[0].clone()));
        assert_eq!(second.body, Body::Frame(fs[1].clone()));
    }

    stop.store(true, Ordering::Relaxed);
    for ws in &mut clients {
        assert_eq!(next(ws).body, Body::Bye);
    }
    server.join();
}

#[test]
fn touches_are_forwarded_in_order_and_replays_dropped() {
    let (server, hub, touches, stop) = start();
    let mut ws = connect(server.addr);
    wait_for_clients(&hub, 1);
    assert!(matches!(next(&mut ws).body, Body::Hello(_)));

    let mut seq = SeqCounter::default();
    let tap = |x| TouchEvent {
        x,
        y: 50,
        action: TouchAction::Up,
        pointer: 0,
    };
    let first = seq.stamp(Body::Touch(tap(10)));
    ws.send(Message::text(first.encode())).unwrap();
    // a replayed sequence number is ignored
    ws.send(Message::text(first.encode())).unwrap();
    // off-screen touches are dropped after the sequence check
    ws.send(Message::text(seq.stamp(Body::Touch(tap(999))).encode()))
        .unwrap();
    ws.send(Message::text("not json")).unwrap();
    ws.send(Message::text(seq.stamp(Body::Touch(tap(20))).encode()))
        .unwrap();
    ws.send(Message::text(seq.stamp(Body::Bye).encode())).unwrap();

    let got: Vec<u32> = (0..2)
        .map(|_| touches.recv_timeout(Duration::from_secs(5)).unwrap().x)
        .collect();
    assert_eq!(got, vec![10, 20]);
    assert!(touches.recv_timeout(Duration::from_millis(100)).is_err());

    stop.store(true, Ordering::Relaxed);
    server.join();
}

#[test]
fn busy_port_is_reported() {
    let taken = TcpListener::bind("127.0.0.1:0").unwrap();
    let port = taken.local_addr().unwrap().port();
    let mut config = RunConfig::new(graph(), "synth:stable:1:5".parse().unwrap());
    config.port = port;
    let stop = Arc::new(AtomicBool::new(true));
    let err = run(&config, stop, &mut Vec::new()).unwrap_err();
    assert!(matches!(err, RunError::PortInUse(p) if p == port), "{err}");
}

#[test]
fn headless_run_writes_jsonl_and_log() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = RunConfig::new(graph(), "synth:stable:1:5".parse().unwrap());
    config.headless = true;
    config.log = Some(dir.path().join("session.log"));
    let mut out = Vec::new();
    run(&config, Arc::new(AtomicBool::new(false)), &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert!(text
        .lines()
        .all(|l| serde_json::from_str::<serde_json::Value>(l).is_ok()));
    assert!(text.lines().any(|l| l.contains(r#""kind":"frame""#)));
    let log = std::fs::read_to_string(dir.path().join("session.log")).unwrap();
    assert_eq!(log, "{\"t\":0,\"op\":\"start\",\"cursor\":\"start\"}\n");
}
