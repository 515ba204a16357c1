//! The simulated device: producer, bus and consumer wired together, driven
//! either tick by tick on a virtual clock or live on a scaled one.

use std::str::FromStr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver};
use std::sync::Arc;
use std::time::Duration;

use rescuesim_core::bus::{BusRegion, MemoryMap, SlotValue};
use rescuesim_core::clock::Clock;
use rescuesim_core::detection::DetectionRules;
use rescuesim_core::display::{
    audit_frame, frame_digest, Command, Controller, ControllerConfig, DisplayError, FrameState, GeometryViolation,
    PathEntry, ScreenId, TouchAction, TouchEvent,
};
use rescuesim_core::engine::{start_session, EngineError, PatientFacts, Session, SessionRecord};
use rescuesim_core::graph::TreatmentGraph;
use rescuesim_core::vitals::{PublishEffect, Pump, ThresholdRules, VitalField};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::Loaded;

/// Wall time between frames; the logical period is this times the speed.
pub const FRAME_WALL: Duration = Duration::from_millis(50);

pub fn frame_period(speed: f64) -> Duration {
    FRAME_WALL.mul_f64(speed)
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("frame at {t_ms} ms on {screen} breaks layout: {}", .violations.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Geometry {
        t_ms: u64,
        screen: ScreenId,
        violations: Vec<GeometryViolation>,
    },
    #[error(transparent)]
    Display(#[from] DisplayError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

#[derive(Debug, Error)]
pub enum ScriptError {
    #[error("script line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("script line {line}: time goes backwards")]
    Order { line: usize },
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// One line of the run event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RunEvent {
    Feed {
        t: u64,
        slot: String,
        value: SlotValue,
    },
    Frame {
        t: u64,
        seq: u64,
        screen: ScreenId,
        digest: String,
    },
    Warning {
        t: u64,
        code: u8,
        message: String,
    },
    Touch {
        t: u64,
        x: u32,
        y: u32,
        action: TouchAction,
    },
    Transition {
        t: u64,
        button: String,
        from: ScreenId,
        to: ScreenId,
        #[serde(skip_serializing_if = "Option::is_none")]
        note: Option<String>,
    },
    Rejected {
        t: u64,
        reason: String,
    },
    Session(SessionRecord),
}

impl RunEvent {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("events serialize")
    }
}

fn ms(t: Duration) -> u64 {
    t.as_millis() as u64
}

/// Consumer side of the device plus the running treatment session.
pub struct Simulation {
    graphs: Vec<Arc<TreatmentGraph>>,
    facts: PatientFacts,
    controller: Controller,
    session: Option<Session>,
    frame: Option<FrameState>,
    digest: String,
    frame_seq: u64,
    logged: usize,
}

impl Simulation {
    /// Starts with the first graph's session open on the main menu.
    pub fn new(loaded: &Loaded) -> Result<Self, SimError> {
        let paths = loaded
            .graphs
            .iter()
            .map(|(g, group)| PathEntry {
                title: g.title.clone(),
                group: *group,
            })
            .collect();
        let mut controller = Controller::new(ControllerConfig {
            paths,
            battery_drain_per_hour: loaded.config.battery_drain,
            ..ControllerConfig::default()
        });
        let facts = loaded.scenario.patient.clone();
        controller.set_patient(facts.clone());
        let graphs: Vec<_> = loaded.graphs.iter().map(|(g, _)| g.clone()).collect();
        let session = start_session(graphs[0].clone(), facts.clone(), Duration::ZERO)?;
        Ok(Simulation {
            graphs,
            facts,
            controller,
            session: Some(session),
            frame: None,
            digest: String::new(),
            frame_seq: 0,
            logged: 0,
        })
    }

    pub fn frame(&self) -> Option<&FrameState> {
        self.frame.as_ref()
    }

    pub fn session(&self) -> Option<&Session> {
        self.session.as_ref()
    }

    pub fn controller(&self) -> &Controller {
        &self.controller
    }

    pub fn screen(&self) -> ScreenId {
        self.controller.screen()
    }

    fn flush_session(&mut self, out: &mut Vec<RunEvent>) {
        if let Some(s) = &self.session {
            out.extend(s.log()[self.logged..].iter().cloned().map(RunEvent::Session));
            self.logged = s.log().len();
        }
    }

    fn emit_frame(&mut self, now: Duration, out: &mut Vec<RunEvent>) -> Result<(), SimError> {
        let frame = self.controller.frame(self.session.as_ref())?;
        let violations = audit_frame(&frame);
        if !violations.is_empty() {
            return Err(SimError::Geometry {
                t_ms: ms(now),
                screen: frame.screen,
                violations,
            });
        }
        let digest = frame_digest(&frame);
        if digest != self.digest {
            self.frame_seq += 1;
            out.push(RunEvent::Frame {
                t: ms(now),
                seq: self.frame_seq,
                screen: frame.screen,
                digest: digest.clone(),
            });
            self.digest = digest;
            self.frame = Some(frame);
        }
        Ok(())
    }

    /// Reads the bus, fires due timers and composes the frame.
    pub fn tick(&mut self, bus: &BusRegion, now: Duration) -> Result<Vec<RunEvent>, SimError> {
        let mut out = Vec::new();
        self.controller.set_now(now);
        let drained = self.controller.drain_dynamic(bus);
        if let Some(w) = &drained.warning {
            out.push(RunEvent::Warning {
                t: ms(now),
                code: w.code,
                message: w.message.clone(),
            });
        }
        if let Some(s) = self.session.as_mut() {
            s.set_now(now);
            for (slot, value) in &drained.vitals {
                if let (Some(_), Some(v)) = (VitalField::parse(slot), value.as_int()) {
                    s.set_fact(slot, f64::from(v))?;
                }
            }
            if let Some(w) = s.poll_timer(now) {
                out.push(RunEvent::Warning {
                    t: ms(now),
                    code: w.code,
                    message: w.message.clone(),
                });
                self.controller.raise(w);
            }
        }
        self.controller.sync(self.session.as_ref());
        self.flush_session(&mut out);
        self.emit_frame(now, &mut out)?;
        Ok(out)
    }

    fn start_path(&mut self, index: usize, now: Duration, out: &mut Vec<RunEvent>) -> Result<(), SimError> {
        self.flush_session(out);
        let mut facts = self.facts.clone();
        if let Some(s) = &self.session {
            for f in VitalField::ALL {
                if let Some(v) = s.facts().get(f.name()) {
                    facts.insert(f.name(), v.clone()).map_err(EngineError::from)?;
                }
            }
        }
        self.session = Some(start_session(self.graphs[index].clone(), facts, now)?);
        self.logged = 0;
        Ok(())
    }

    /// Feeds one touch against the frame currently on screen.
    pub fn touch(&mut self, now: Duration, event: TouchEvent) -> Result<Vec<RunEvent>, SimError> {
        let mut out = vec![RunEvent::Touch {
            t: ms(now),
            x: event.x,
            y: event.y,
            action: event.action,
        }];
        let Some(frame) = self.frame.clone() else {
            return Ok(out);
        };
        self.controller.set_now(now);
        if let Some(s) = self.session.as_mut() {
            s.set_now(now);
        }
        match self.controller.touch(event, &frame, self.session.as_mut()) {
            None => return Ok(out),
            Some(Err(e)) => out.push(RunEvent::Rejected {
                t: ms(now),
                reason: e.to_string(),
            }),
            Some(Ok(o)) => {
                match o.command {
                    Some(Command::StartPath(i)) | Some(Command::AcceptGroup { path: Some(i), .. }) => {
                        self.start_path(i, now, &mut out)?
                    }
                    _ => {}
                }
                out.push(RunEvent::Transition {
                    t: ms(now),
                    button: o.button,
                    from: o.from,
                    to: o.to,
                    note: o.note,
                });
            }
        }
        self.controller.sync(self.session.as_ref());
        self.flush_session(&mut out);
        self.emit_frame(now, &mut out)?;
        Ok(out)
    }

    /// Marks the displayed values as read.
    pub fn acknowledge(&mut self, bus: &BusRegion) {
        self.controller.acknowledge(bus);
    }
}

/// Timed touches, one per line: `<seconds> <down|up|tap> <x> <y> [pointer]`.
/// `tap` expands to a down and an up at the same time.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Script(pub Vec<(Duration, TouchEvent)>);

impl FromStr for Script {
    type Err = ScriptError;
    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut out: Vec<(Duration, TouchEvent)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let l = raw.split('#').next().unwrap_or("").trim();
            if l.is_empty() {
                continue;
            }
            let bad = |msg: String| ScriptError::Parse { line, msg };
            let f: Vec<&str> = l.split_whitespace().collect();
            let [t, action, x, y, rest @ ..] = f.as_slice() else {
                return Err(bad("expected '<seconds> <down|up|tap> <x> <y> [pointer]'".into()));
            };
            let t: f64 = t.parse().map_err(|e| bad(format!("time: {e}")))?;
            if !(t.is_finite() && t >= 0.0) {
                return Err(bad("time must be a non-negative number".into()));
            }
            let t = Duration::from_secs_f64(t);
            let x: u32 = x.parse().map_err(|e| bad(format!("x: {e}")))?;
            let y: u32 = y.parse().map_err(|e| bad(format!("y: {e}")))?;
            let pointer: u8 = match rest {
                [] => 0,
                [p] => p.parse().map_err(|e| bad(format!("pointer: {e}")))?,
                _ => return Err(bad("trailing fields".into())),
            };
            let actions: &[TouchAction] = match *action {
                "down" => &[TouchAction::Down],
                "up" => &[TouchAction::Up],
                "tap" => &[TouchAction::Down, TouchAction::Up],
                other => return Err(bad(format!("unknown action '{other}'"))),
            };
            if out.last().is_some_and(|(last, _)| *last > t) {
                return Err(ScriptError::Order { line });
            }
            for &action in actions {
                let e = TouchEvent { x, y, action, pointer };
                e.check().map_err(|e| bad(e.to_string()))?;
                out.push((t, e));
            }
        }
        Ok(Script(out))
    }
}

/// Outcome of a headless run.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadlessRun {
    pub events: Vec<RunEvent>,
}

impl HeadlessRun {
    pub fn session_log(&self) -> impl Iterator<Item = &SessionRecord> {
        self.events.iter().filter_map(|e| match e {
            RunEvent::Session(r) => Some(r),
            _ => None,
        })
    }

    pub fn frames(&self) -> impl Iterator<Item = (u64, ScreenId, &str)> {
        self.events.iter().filter_map(|e| match e {
            RunEvent::Frame { t, screen, digest, .. } => Some((*t, *screen, digest.as_str())),
            _ => None,
        })
    }

    pub fn to_jsonl(&self) -> String {
        self.events.iter().map(|e| e.to_line() + "\n").collect()
    }
}

fn feed_events(effects: Vec<PublishEffect>) -> impl Iterator<Item = RunEvent> {
    effects.into_iter().map(|e| RunEvent::Feed {
        t: (e.t * 1000.0).round() as u64,
        slot: e.slot,
        value: e.value,
    })
}

/// Runs the whole stack on a virtual clock, one frame period per step,
/// until the scenario and the script are both exhausted. Touches due at a
/// step are applied after the bus has been read, so a pending warning
/// always takes the screen first.
pub fn headless_script(loaded: &Loaded, script: &Script) -> Result<HeadlessRun, ScriptError> {
    let period = frame_period(loaded.config.speed);
    let bus = BusRegion::new(MemoryMap::default());
    let rules = ThresholdRules::default();
    let detection = DetectionRules::default();
    let mut pump = Pump::new(&bus, &rules, Some(&detection));
    let mut sim = Simulation::new(loaded)?;

    let samples = &loaded.scenario.samples;
    let last_touch = script.0.last().map_or(Duration::ZERO, |(t, _)| *t);
    let end = Duration::from_secs_f64(loaded.scenario.duration()).max(last_touch) + period;

    let mut events: Vec<RunEvent> = feed_events(pump.publish_patient(&loaded.scenario)).collect();
    let (mut next_sample, mut next_touch) = (0, 0);
    let mut now = Duration::ZERO;
    loop {
        while next_sample < samples.len() && Duration::from_secs_f64(samples[next_sample].t) <= now {
            events.extend(feed_events(pump.publish_sample(&samples[next_sample])));
            next_sample += 1;
        }
        events.extend(sim.tick(&bus, now)?);
        while next_touch < script.0.len() && script.0[next_touch].0 <= now {
            events.extend(sim.touch(now, script.0[next_touch].1)?);
            next_touch += 1;
        }
        sim.acknowledge(&bus);
        if now >= end {
            break;
        }
        now += period;
    }
    Ok(HeadlessRun { events })
}

/// Runs producer and consumer concurrently against `clock` until `stop`
/// is set or logical time reaches `until`. The producer replays the
/// scenario on its own thread; the bus is the only channel between them.
/// Touches arrive on `touches`. Every event is handed to `on_event`
/// together with the simulation state right after it.
pub fn run_live(
    loaded: &Loaded,
    clock: &dyn Clock,
    stop: &AtomicBool,
    until: Option<Duration>,
    touches: &Receiver<TouchEvent>,
    mut on_event: impl FnMut(&RunEvent, &Simulation),
) -> Result<(), SimError> {
    let period = frame_period(loaded.config.speed);
    let bus = BusRegion::new(MemoryMap::default());
    let rules = ThresholdRules::default();
    let detection = DetectionRules::default();
    let mut sim = Simulation::new(loaded)?;
    let (feed_tx, feed_rx) = mpsc::channel::<PublishEffect>();

    std::thread::scope(|scope| {
        scope.spawn(|| {
            let mut pump = Pump::new(&bus, &rules, Some(&detection));
            pump.run(&loaded.scenario, clock, |e| {
                feed_tx.send(e.clone()).is_ok() && !stop.load(Ordering::Relaxed)
            });
        });

        let result = (|| {
            let mut next = clock.now();
            while !stop.load(Ordering::Relaxed) {
                let now = clock.now();
                if until.is_some_and(|u| now >= u) {
                    break;
                }
                let mut events: Vec<RunEvent> = feed_events(feed_rx.try_iter().collect()).collect();
                events.extend(sim.tick(&bus, now)?);
                for e in &events {
                    on_event(e, &sim);
                }
                while let Ok(t) = touches.try_recv() {
                    for e in sim.touch(now, t)? {
                        on_event(&e, &sim);
                    }
                }
                sim.acknowledge(&bus);
                next += period;
                clock.sleep_until(next.max(now));
            }
            Ok(())
        })();
        stop.store(true, Ordering::Relaxed);
        result
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn script_parsing() {
        let s: Script = "# warm-up\n0.5 tap 10 20\n1 down 5 5 1\n1 up 5 5 1\n".parse().unwrap();
        assert_eq!(s.0.len(), 4);
        assert_eq!(s.0[0].0, Duration::from_millis(500));
        assert_eq!(s.0[2].1.pointer, 1);
        assert!(matches!(
            "2 tap 1 1\n1 tap 1 1".parse::<Script>(),
            Err(ScriptError::Order { line: 2 })
        ));
        assert!(matches!(
            "0 tap 400 1".parse::<Script>(),
            Err(ScriptError::Parse { line: 1, .. })
        ));
        assert!(matches!("0 poke 1 1".parse::<Script>(), Err(ScriptError::Parse { .. })));
    }
}
