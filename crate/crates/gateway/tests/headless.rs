use std::path::PathBuf;
use std::time::Duration;

use rescuesim_core::display::ScreenId;
use rescuesim_core::engine::{start_session, HistoryEntry};
use rescuesim_gateway::{headless_script, ConfigError, RunConfig, RunEvent, ScenarioSource, Script};

fn data(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/data").join(rel)
}

fn golden(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name)
}

fn stable() -> ScenarioSource {
    "synth:stable:1:30".parse().unwrap()
}

fn run(graph: &str, script: &str) -> rescuesim_gateway::HeadlessRun {
    let config = RunConfig::new(data(&format!("graphs/{graph}.json")), stable());
    headless_script(&config.load().unwrap(), &script.parse().unwrap()).unwrap()
}

fn session_jsonl(r: &rescuesim_gateway::HeadlessRun) -> String {
    r.session_log()
        .map(|s| serde_json::to_string(s).unwrap() + "\n")
        .collect()
}

#[test]
fn scripted_runs_reproduce_golden_logs() {
    for graph in ["bpr-demo", "bpr-analgesie", "bpr-atemnot"] {
        let script = std::fs::read_to_string(golden(&format!("{graph}.script"))).unwrap();
        let expected = std::fs::read_to_string(golden(&format!("{graph}.log"))).unwrap();
        assert_eq!(session_jsonl(&run(graph, &script)), expected, "{graph}");
    }
}

#[test]
fn headless_runs_are_deterministic() {
    let script = std::fs::read_to_string(golden("bpr-demo.script")).unwrap();
    let (a, b) = (run("bpr-demo", &script), run("bpr-demo", &script));
    assert_eq!(a.to_jsonl(), b.to_jsonl());
    assert!(a.frames().count() > 3);
}

#[test]
fn answering_yes_ends_at_the_yes_branch() {
    let r = run("bpr-demo", "1 tap 120 68\n2 tap 260 50\n3 tap 260 50\n4 tap 260 50");
    let last = r.session_log().last().unwrap();
    assert_eq!((last.op.as_str(), last.cursor.as_str()), ("answer", "a2"));

    // the same steps straight against the engine
    let config = RunConfig::new(data("graphs/bpr-demo.json"), stable());
    let loaded = config.load().unwrap();
    let mut s = start_session(
        loaded.graphs[0].0.clone(),
        loaded.scenario.patient.clone(),
        Duration::ZERO,
    )
    .unwrap();
    s.advance().unwrap();
    s.advance().unwrap();
    s.answer("Ja").unwrap();
    let cursors = |h: &[HistoryEntry]| h.iter().map(|e| e.node.to_string()).collect::<Vec<_>>();
    let logged: Vec<String> = r
        .session_log()
        .filter(|e| e.op == "advance" || e.op == "answer" || e.op == "start")
        .map(|e| e.cursor.to_string())
        .collect();
    assert_eq!(logged, cursors(s.history()));
}

#[test]
fn empty_script_only_feeds_and_draws() {
    let config = RunConfig::new(
        data("graphs/bpr-demo.json"),
        ScenarioSource::File(data("scenarios/calm.scenario")),
    );
    let r = headless_script(&config.load().unwrap(), &Script::default()).unwrap();
    assert!(r
        .events
        .iter()
        .all(|e| matches!(e, RunEvent::Feed { .. } | RunEvent::Frame { .. } | RunEvent::Session(_))));
    let log: Vec<_> = r.session_log().collect();
    assert_eq!(log.len(), 1);
    assert_eq!(log[0].op, "start");
    assert!(r.frames().all(|(_, screen, _)| screen == ScreenId::MainMenu));
}

#[test]
fn touches_between_buttons_do_nothing() {
    // the gap between the first two tile columns of the main menu
    let r = run("bpr-demo", "1 tap 80 60\n2 tap 160 120");
    assert!(!r.events.iter().any(|e| matches!(e, RunEvent::Transition { .. })));
    assert_eq!(
        r.events.iter().filter(|e| matches!(e, RunEvent::Touch { .. })).count(),
        4
    );
}

#[test]
fn missing_or_invalid_inputs_are_config_errors() {
    let missing = RunConfig::new("/nonexistent/graph.json", stable());
    assert!(matches!(missing.load(), Err(ConfigError::Read { .. })));

    let dir = tempfile::tempdir().unwrap();
    let broken = dir.path().join("broken.json");
    let doc = std::fs::read_to_string(data("graphs/bpr-demo.json")).unwrap();
    std::fs::write(&broken, doc.replace(r#""to": "end""#, r#""to": "a1""#)).unwrap();
    assert!(matches!(
        RunConfig::new(&broken, stable()).load(),
        Err(ConfigError::Graph { .. } | ConfigError::Invalid { .. })
    ));

    let mut slow = RunConfig::new(data("graphs/bpr-demo.json"), stable());
    slow.speed = 0.0;
    assert!(matches!(slow.load(), Err(ConfigError::Speed(_))));
}

#[test]
fn speed_coarsens_timing_but_keeps_the_path() {
    let script = std::fs::read_to_string(golden("bpr-demo.script")).unwrap();
    let mut config = RunConfig::new(data("graphs/bpr-demo.json"), stable());
    config.speed = 60.0;
    let fast = headless_script(&config.load().unwrap(), &script.parse::<Script>().unwrap()).unwrap();
    let steps = |r: &rescuesim_gateway::HeadlessRun| -> Vec<_> {
        r.session_log()
            .map(|s| (s.op.clone(), s.cursor.clone(), s.label.clone()))
            .collect()
    };
    let slow = run("bpr-demo", &script);
    assert_eq!(steps(&fast), steps(&slow));
    // one logical frame lasts three seconds at this speed
    assert!(fast.session_log().all(|s| s.t % 3000 == 0));
}
