//! End-to-end acceptance checks. Runs without the test harness so that
//! every criterion prints exactly one PASS or FAIL line.

use std::collections::{BTreeSet, HashSet, VecDeque};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::atomic::AtomicBool;
use std::sync::{mpsc, Arc};
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::strategy::ValueTree;
use proptest::test_runner::TestRunner;
use rescuesim_core::bus::{BusRegion, MemoryMap, SlotValue, Snapshot};
use rescuesim_core::clock::ScaledClock;
use rescuesim_core::detection::{decode_id_word, encode_id_word, group_to_id, id_to_group, IllnessGroup};
use rescuesim_core::display::{
    audit_frame, compose, frame_digest, ComposeInput, Controller, ControllerConfig, Event, FrameState, Navigator,
    ScreenId, TouchAction, TouchEvent, TransitionTable,
};
use rescuesim_core::engine::{start_session, PatientFacts, Session};
use rescuesim_core::graph::{load_graph, NodeKind, TreatmentGraph};
use rescuesim_core::text::{fit_font_size, FontCatalog, TextBox};
use rescuesim_core::vitals::{Pump, Scenario, ThresholdRules, VitalsSample};
use rescuesim_core::warning::{WarningEvent, WarningOrigin};
use rescuesim_core::DetectionVector;
use rescuesim_gateway::sim::frame_period;
use rescuesim_gateway::{headless_script, run_live, RunConfig, RunEvent, ScenarioSource};

const FIXTURES: [&str; 3] = ["bpr-demo", "bpr-analgesie", "bpr-atemnot"];

fn data(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/data").join(rel)
}

fn golden(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name)
}

fn graph(name: &str) -> Arc<TreatmentGraph> {
    let doc = std::fs::read_to_string(data(&format!("graphs/{name}.json"))).unwrap();
    Arc::new(load_graph(&doc).unwrap())
}

fn patient() -> PatientFacts {
    PatientFacts::new()
        .with("name", "Erika Muster")
        .and_then(|f| f.with("sex", "F"))
        .and_then(|f| f.with("age_years", 58.0))
        .unwrap()
}

/// Draws `n` values from a strategy with a fixed seed.
fn draw<S: Strategy>(strategy: S, n: usize) -> Vec<S::Value> {
    let mut runner = TestRunner::deterministic();
    (0..n)
        .map(|_| strategy.new_tree(&mut runner).unwrap().current())
        .collect()
}

// ---- 1. SpO2 pipeline ----------------------------------------------------

fn spo2_pipeline() {
    let bus = BusRegion::new(MemoryMap::default());
    let rules = ThresholdRules::default();
    let sample = VitalsSample {
        t: 0.0,
        spo2: 93,
        pulse: 88,
        bp_sys: 125,
        bp_dia: 80,
        resp_rate: 16,
    };
    let scenario = Scenario::new(patient(), vec![sample]).unwrap();
    let mut pump = Pump::new(&bus, &rules, None);
    let mut effects = pump.publish_patient(&scenario);
    effects.extend(pump.publish_sample(&sample));

    // Expected image: slot i at 0x04 + 4i, little-endian, bit i valid.
    let mut expected = [0u8; 132];
    let mut validity = 0u32;
    for e in &effects {
        let index = bus.map().slot(&e.slot).unwrap().index;
        let word = match e.value {
            SlotValue::Int32(v) => v as u32,
            SlotValue::IdWord(w) => w,
        };
        expected[4 + 4 * index..8 + 4 * index].copy_from_slice(&word.to_le_bytes());
        validity |= 1 << index;
    }
    expected[..4].copy_from_slice(&validity.to_le_bytes());
    assert_eq!(&bus.bytes()[4..8], &[93, 0, 0, 0], "SpO2 at 0x04");
    assert_eq!(bus.bytes(), expected, "region after publish");
    assert!(bus
        .dump()
        .contains(&format!("0000: {:02x} 00 00 00 5d 00 00 00", validity & 0xff)));

    let mut c = Controller::new(ControllerConfig::default());
    c.set_patient(patient());
    c.press("tile_monitor", None).unwrap();
    c.drain_dynamic(&bus);
    let frame = c.frame(None).unwrap();
    assert_eq!(frame.screen, ScreenId::PatientMonitor);
    assert_eq!(frame.element("spo2").and_then(|e| e.text()), Some("SpO2 93 %"));
    assert!(bus.is_valid("spo2").unwrap(), "peeking leaves the value valid");

    c.acknowledge(&bus);
    expected[..4].copy_from_slice(&0u32.to_le_bytes());
    assert_eq!(bus.bytes(), expected, "region after acknowledge");
    assert!(!bus.is_valid("spo2").unwrap());
    assert_eq!(bus.peek("spo2").unwrap(), None);
}

// ---- 2. bus stress ---------------------------------------------------------

fn bus_stress() {
    const PUBLISHES: i32 = 500_000;
    const CONSUMES: usize = 500_000;
    // value k is 7k + 3; anything else would be a torn or invented word
    let value = |k: i32| 7 * k + 3;
    let bus = BusRegion::new(MemoryMap::default());
    let consumed = std::thread::scope(|s| {
        s.spawn(|| {
            for k in 0..PUBLISHES {
                bus.publish("spo2", SlotValue::Int32(value(k))).unwrap();
            }
        });
        let reader = s.spawn(|| {
            let mut got = Vec::new();
            for _ in 0..CONSUMES {
                if let Some(SlotValue::Int32(v)) = bus.consume("spo2").unwrap() {
                    got.push(v);
                }
            }
            got
        });
        reader.join().unwrap()
    });
    let mut all = consumed;
    all.extend(bus.consume("spo2").unwrap().and_then(SlotValue::as_int));
    assert!(all.len() > 1);
    for &v in &all {
        assert!(v >= 3 && (v - 3) % 7 == 0 && (v - 3) / 7 < PUBLISHES, "torn value {v}");
    }
    assert!(
        all.windows(2).all(|w| w[0] < w[1]),
        "a value was consumed twice or out of order"
    );
    assert_eq!(bus.consume("spo2").unwrap(), None, "consume clears the slot");
}

// ---- 3. convention ids ------------------------------------------------------

fn convention_codec() {
    const PRINTED: [(&str, &str); 10] = [
        ("ZNS-Krankheiten", "sdz"),
        ("Herz-Kreislauf-Erkr.", "sdh"),
        ("Erkr. der Atemwege", "sda"),
        ("Erkr. des Bauchraums", "sdb"),
        ("Psychiatrische Erk.", "sdp"),
        ("Stoffwechselkrankheiten", "sds"),
        ("Gyn.-geburtshilf. Notfaelle", "sdg"),
        ("Andere Krankheiten", "sdak"),
        ("Infektionen", "sdi"),
        ("Reanimation", "sdr"),
    ];
    assert_eq!(IllnessGroup::ALL.len(), PRINTED.len());
    for (group, (label, code)) in IllnessGroup::ALL.into_iter().zip(PRINTED) {
        assert_eq!(group.label(), label);
        assert_eq!(group_to_id(group).as_str(), code);
        assert_eq!(id_to_group(code).unwrap(), group);
        let word = encode_id_word(group_to_id(group));
        assert_eq!(&word.to_le_bytes()[..code.len()], code.as_bytes());
        assert_eq!(decode_id_word(word).unwrap().group(), group);
    }
    let known: HashSet<&str> = PRINTED.iter().map(|(_, c)| *c).collect();
    for code in draw("[a-zA-Z]{0,5}", 2000) {
        assert_eq!(id_to_group(&code).is_ok(), known.contains(code.as_str()), "{code}");
    }
    for word in draw(any::<u32>(), 2000) {
        if let Ok(id) = decode_id_word(word) {
            assert_eq!(encode_id_word(id), word);
            assert!(known.contains(id.as_str()));
        }
    }
}

// ---- 4. font fitting --------------------------------------------------------

fn oracle_best(words: &[String], w: u32, h: u32, wrap: bool) -> Option<u32> {
    let fits = |size: u32| {
        let adv = (6 * size).div_ceil(10);
        if !wrap {
            return words.join(" ").chars().count() as u32 * adv <= w && size <= h;
        }
        (0..1u32 << (words.len() - 1)).any(|cuts| {
            let mut lines = vec![words[0].chars().count() as u32];
            for (i, word) in words[1..].iter().enumerate() {
                let n = word.chars().count() as u32;
                if cuts & (1 << i) != 0 {
                    lines.push(n);
                } else {
                    *lines.last_mut().unwrap() += 1 + n;
                }
            }
            lines.iter().all(|&n| n * adv <= w) && lines.len() as u32 * (size + 2) - 2 <= h
        })
    };
    FontCatalog::default()
        .sizes()
        .iter()
        .copied()
        .filter(|&s| fits(s))
        .max()
}

fn font_fitting() {
    let cases = (
        prop::collection::vec("[A-Za-zäöüß0-9%.-]{1,8}", 1..=7),
        120u32..=320,
        1u32..=240,
        any::<bool>(),
        any::<prop::sample::Index>(),
    );
    let catalog = FontCatalog::default();
    for (words, w, h, wrap, cut) in draw(cases, 1000) {
        let bbox = TextBox::new(w, h).unwrap();
        let text = words.join(" ");
        let size = |t: &str| fit_font_size(t, bbox, &catalog, wrap).ok().map(|f| f.size);
        assert_eq!(
            size(&text),
            oracle_best(&words, w, h, wrap),
            "{text:?} in {w}x{h} wrap={wrap}"
        );
        let prefix = words[..=cut.index(words.len())].join(" ");
        assert!(
            size(&prefix).unwrap_or(0) >= size(&text).unwrap_or(0),
            "{prefix:?} vs {text:?}"
        );
    }
}

// ---- 5. geometry ----------------------------------------------------------

/// All distinct session states reachable by any interaction.
fn all_states(g: &Arc<TreatmentGraph>) -> Vec<Session> {
    let mut seen = BTreeSet::new();
    let mut stack = vec![start_session(g.clone(), patient(), Duration::ZERO).unwrap()];
    let mut out = Vec::new();
    while let Some(s) = stack.pop() {
        let key = format!("{}|{:?}|{:?}", s.cursor(), s.pending().map(|p| p.kind), s.view().next);
        if !seen.insert(key) {
            continue;
        }
        let mut next = Vec::new();
        if let Some(p) = s.pending() {
            for o in &p.options {
                let mut n = s.clone();
                n.answer(o).unwrap();
                next.push(n);
            }
            let mut d = s.clone();
            if d.decline_approval().is_ok() {
                next.push(d);
            }
        } else if s.current().kind != NodeKind::End {
            let mut n = s.clone();
            n.advance().unwrap();
            next.push(n);
        }
        if s.history().len() > 1 {
            let mut b = s.clone();
            b.step_back().unwrap();
            next.push(b);
        }
        stack.extend(next);
        out.push(s);
    }
    out
}

fn check_geometry(f: &FrameState) {
    let violations = audit_frame(f);
    assert!(violations.is_empty(), "{}: {violations:?}", f.screen);
    for b in &f.side_buttons {
        assert_eq!((b.rect.w, b.rect.h), (105, 55), "{} side button {}", f.screen, b.id);
    }
    for b in f.central_buttons.iter().filter(|b| b.id.starts_with("tile_")) {
        assert_eq!((b.rect.w, b.rect.h), (64, 64), "tile {}", b.id);
    }
    for b in f.all_buttons() {
        assert!(
            b.rect.x + b.rect.w <= 320 && b.rect.y + b.rect.h <= 240,
            "{} off screen",
            b.id
        );
        if let Some(icon) = &b.icon {
            assert!(icon.rect.w >= 23 && icon.rect.h >= 23, "icon {}", icon.name);
        }
    }
    let layers: [Vec<_>; 2] = [
        f.base_buttons().collect(),
        f.modal.iter().flat_map(|m| &m.buttons).collect(),
    ];
    for layer in layers {
        for (i, a) in layer.iter().enumerate() {
            for b in &layer[i + 1..] {
                assert!(!a.rect.overlaps(&b.rect), "{} overlaps {}", a.id, b.id);
            }
        }
    }
}

fn geometry() {
    let snapshot = Snapshot(vec![
        ("spo2".into(), Some(SlotValue::Int32(97))),
        ("pulse".into(), Some(SlotValue::Int32(72))),
    ]);
    let ranked = DetectionVector::uniform().top_k(5).unwrap();
    let paths: Vec<String> = FIXTURES.iter().map(|s| s.to_string()).collect();
    let warning = WarningEvent {
        code: 2,
        message: "Puls kritisch".into(),
        origin: WarningOrigin::Bus,
    };
    let notification = WarningEvent {
        code: 17,
        ..warning.clone()
    };
    let alarms = vec![warning.clone(); 3];
    let lines = vec!["0.0s start".to_string()];
    let facts = patient();
    let mut frames = 0;
    for name in FIXTURES {
        for s in all_states(&graph(name)) {
            let approval = s.pending().is_some_and(|p| p.auto_choice.is_some());
            for screen in ScreenId::ALL {
                if screen == ScreenId::Approval && !approval {
                    continue;
                }
                let bases = if screen.is_modal() {
                    ScreenId::ALL.into_iter().filter(|b| !b.is_modal()).collect()
                } else {
                    vec![screen]
                };
                for base in bases {
                    let f = compose(&ComposeInput {
                        screen,
                        base,
                        session: Some(&s),
                        detection: Some(&ranked),
                        selected_group: 0,
                        snapshot: &snapshot,
                        patient: &facts,
                        warning: Some(if screen == ScreenId::Notification {
                            &notification
                        } else {
                            &warning
                        }),
                        time_of_day: Duration::from_secs(9 * 3600),
                        battery_percent: 64,
                        paths: &paths,
                        alarms: &alarms,
                        log_lines: &lines,
                        settings_lines: &lines,
                    })
                    .unwrap_or_else(|e| panic!("{name} {screen} over {base}: {e}"));
                    check_geometry(&f);
                    frames += 1;
                }
            }
        }
    }
    assert!(frames > 500, "only {frames} frames composed");
}

// ---- 6. navigation soundness ---------------------------------------------

#[derive(Debug, Clone, Copy)]
enum Op {
    Advance,
    Answer(usize),
    Back,
}

fn reachable(g: &TreatmentGraph) -> BTreeSet<String> {
    let start = g.start().unwrap().id.to_string();
    let mut seen = BTreeSet::from([start.clone()]);
    let mut queue = VecDeque::from([start]);
    while let Some(n) = queue.pop_front() {
        for e in g.edges().iter().filter(|e| e.from.as_str() == n) {
            if seen.insert(e.to.to_string()) {
                queue.push_back(e.to.to_string());
            }
        }
    }
    seen
}

fn navigation() {
    for name in FIXTURES {
        let config = RunConfig::new(
            data(&format!("graphs/{name}.json")),
            "synth:stable:1:30".parse().unwrap(),
        );
        let script = std::fs::read_to_string(golden(&format!("{name}.script"))).unwrap();
        let run = headless_script(&config.load().unwrap(), &script.parse().unwrap()).unwrap();
        let log: String = run
            .session_log()
            .map(|r| serde_json::to_string(r).unwrap() + "\n")
            .collect();
        let expected = std::fs::read_to_string(golden(&format!("{name}.log"))).unwrap();
        assert_eq!(log, expected, "{name} golden log");
    }

    let graphs: Vec<_> = FIXTURES.iter().map(|n| graph(n)).collect();
    let op = prop_oneof![Just(Op::Advance), (0usize..4).prop_map(Op::Answer), Just(Op::Back),];
    let walks = draw((0usize..3, prop::collection::vec(op, 1..30)), 500);
    for (which, ops) in walks {
        let g = &graphs[which];
        let nodes = reachable(g);
        let mut s = start_session(g.clone(), patient(), Duration::ZERO).unwrap();
        for op in ops {
            let _ = match op {
                Op::Advance => s.advance().map(|_| ()),
                Op::Answer(i) => match s.pending().map(|p| p.options.clone()) {
                    Some(o) => s.answer(&o[i % o.len()]).map(|_| ()),
                    None => Ok(()),
                },
                Op::Back => s.step_back(),
            };
            assert!(nodes.contains(s.cursor().as_str()));
            assert!(s.replays_to_cursor());
            let mut r = start_session(g.clone(), patient(), Duration::ZERO).unwrap();
            for h in &s.history()[1..] {
                match &h.label {
                    Some(l) => {
                        if r.pending().is_none() {
                            r.advance().unwrap();
                        }
                        r.answer(l).unwrap();
                    }
                    None => {
                        r.advance().unwrap();
                    }
                }
            }
            assert_eq!(r.history(), s.history());
            assert_eq!(r.cursor(), s.cursor());
        }
    }
}

// ---- 7. warning preemption --------------------------------------------------

/// Digest of a frame without its header, which carries the running clock.
fn body_digest(f: &FrameState) -> String {
    frame_digest(&FrameState {
        header: None,
        ..f.clone()
    })
}

fn warning_preemption() {
    let mut config = RunConfig::new(
        data("graphs/bpr-demo.json"),
        "synth:arrest:1:120".parse::<ScenarioSource>().unwrap(),
    );
    config.speed = 60.0;
    let loaded = config.load().unwrap();
    let period = frame_period(config.speed).as_millis() as u64;
    let clock = ScaledClock::new(config.speed);
    let stop = AtomicBool::new(false);
    let (tx, rx) = mpsc::channel();

    let mut published: Option<u64> = None;
    let mut before: Option<(ScreenId, String)> = None;
    let mut current: Option<(ScreenId, String)> = None;
    let mut shown_at: Option<u64> = None;
    let mut after: Option<(ScreenId, String)> = None;
    run_live(
        &loaded,
        &clock,
        &stop,
        Some(Duration::from_secs(60)),
        &rx,
        |event, sim| match event {
            RunEvent::Feed { t, slot, .. } if slot == "warning_code" && published.is_none() => published = Some(*t),
            RunEvent::Frame { t, screen, .. } => {
                let f = sim.frame().unwrap();
                let now = (*screen, body_digest(f));
                if *screen == ScreenId::Warning {
                    if shown_at.is_none() {
                        shown_at = Some(*t);
                        before = current.clone();
                    }
                    let (x, y) = f.button("dismiss_button").unwrap().rect.center();
                    for action in [TouchAction::Down, TouchAction::Up] {
                        tx.send(TouchEvent {
                            x,
                            y,
                            action,
                            pointer: 0,
                        })
                        .unwrap();
                    }
                } else if shown_at.is_some() && after.is_none() {
                    after = Some(now.clone());
                }
                current = Some(now);
            }
            _ => {}
        },
    )
    .unwrap();

    let published = published.expect("the arrest scenario publishes a warning");
    let shown_at = shown_at.expect("a warning modal was shown");
    assert!(
        shown_at >= published && shown_at - published <= period,
        "published {published} ms, shown {shown_at} ms"
    );
    let (before, after) = (before.unwrap(), after.expect("the warning was dismissed"));
    assert_eq!(before.0, ScreenId::MainMenu);
    assert_eq!(after, before, "dismissal returns to the preempted screen");
}

// ---- 8. transition reachability --------------------------------------------

fn button_keys(table: &TransitionTable) -> Vec<String> {
    let mut keys: Vec<String> = table
        .rows()
        .iter()
        .filter(|r| !r.event.starts_with('@'))
        .map(|r| r.event.replace('*', "0"))
        .collect();
    keys.sort();
    keys.dedup();
    keys
}

fn transition_reachability() {
    let table = TransitionTable::default();
    assert!(table.cannot_reach_main_menu().is_empty());
    let keys = button_keys(&table);
    let warning = WarningEvent {
        code: 1,
        message: "SpO2 niedrig".into(),
        origin: WarningOrigin::Bus,
    };
    let notification = WarningEvent {
        code: 20,
        ..warning.clone()
    };
    let mut events: Vec<Event> = keys.iter().map(|k| Event::Button(k.clone())).collect();
    events.extend([
        Event::Warning(warning),
        Event::Warning(notification),
        Event::Approval,
        Event::DetectionReady,
    ]);

    // every navigator state within six events of start-up
    let key = |n: &Navigator| format!("{n:?}");
    let mut seen = HashSet::new();
    let mut frontier = vec![Navigator::new(ScreenId::MainMenu)];
    let mut states = Vec::new();
    for _ in 0..6 {
        let mut next = Vec::new();
        for n in frontier {
            if !seen.insert(key(&n)) {
                continue;
            }
            for e in &events {
                let mut m = n.clone();
                if m.apply(&table, e).is_ok() {
                    next.push(m);
                }
            }
            states.push(n);
        }
        frontier = next;
    }
    let screens: BTreeSet<ScreenId> = states.iter().map(|n| n.current()).collect();
    assert_eq!(screens.len(), ScreenId::ALL.len(), "screens reached: {screens:?}");

    // from each of them, button presses alone lead back to the main menu
    for start in &states {
        let mut seen = HashSet::from([key(start)]);
        let mut queue = VecDeque::from([start.clone()]);
        let mut found = false;
        while let Some(n) = queue.pop_front() {
            if n.current() == ScreenId::MainMenu {
                found = true;
                break;
            }
            for k in &keys {
                let mut m = n.clone();
                if m.apply(&table, &Event::Button(k.clone())).is_ok() && seen.insert(key(&m)) {
                    queue.push_back(m);
                }
            }
        }
        assert!(found, "no way back to the main menu from {start:?}");
    }
}

fn main() -> ExitCode {
    let criteria: [(&str, fn(), Duration); 8] = [
        ("SpO2 pipeline fidelity", spo2_pipeline, Duration::from_secs(1)),
        ("bus linearizability stress", bus_stress, Duration::from_secs(30)),
        ("convention-id codec", convention_codec, Duration::MAX),
        ("font fitting optimality", font_fitting, Duration::from_secs(5)),
        ("geometry audit", geometry, Duration::MAX),
        ("navigation soundness", navigation, Duration::MAX),
        ("warning preemption", warning_preemption, Duration::MAX),
        ("transition-table reachability", transition_reachability, Duration::MAX),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, check, budget) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check));
        let took = start.elapsed();
        let verdict = match outcome {
            Ok(()) if took <= budget => Ok(()),
            Ok(()) => Err(format!("took {took:?}, budget {budget:?}")),
            Err(e) => Err(e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into())),
        };
        match verdict {
            Ok(()) => println!("PASS  {name} ({} ms)", took.as_millis()),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
