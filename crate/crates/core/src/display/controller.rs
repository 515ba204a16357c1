use std::collections::{BTreeMap, VecDeque};
use std::time::Duration;

use super::compose::{compose, ComposeInput};
use super::transitions::{Event, Navigator, TransitionTable};
use super::{hit_test, DisplayError, FrameState, ScreenId, TouchEvent, TouchTracker};
use crate::bus::{BusRegion, SlotValue, Snapshot};
use crate::detection::{decode_id_word, mock_detect, DetectionRules, IllnessGroup};
use crate::engine::{Advance, PatientFacts, PendingKind, Session};
use crate::vitals::{ThresholdRules, VitalField, VitalsSample, SITUATION_SLOT, WARNING_SLOT};
use crate::warning::{WarningEvent, WarningOrigin, NOTIFICATION_CODES, TIMER_OVERDUE_CODE, WARNING_CODES};

const MAX_ALARMS: usize = 20;

#[derive(Debug, Clone)]
pub struct PathEntry {
    pub title: String,
    /// Illness group this path treats, used when a detection is accepted.
    pub group: Option<IllnessGroup>,
}

#[derive(Debug, Clone)]
pub struct ControllerConfig {
    pub table: TransitionTable,
    pub thresholds: ThresholdRules,
    pub detection: DetectionRules,
    pub paths: Vec<PathEntry>,
    /// Wall-clock time shown in the header at logical time zero.
    pub clock_origin: Duration,
    pub battery_start: f64,
    pub battery_drain_per_hour: f64,
    pub start_screen: ScreenId,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            table: TransitionTable::default(),
            thresholds: ThresholdRules::default(),
            detection: DetectionRules::default(),
            paths: Vec::new(),
            clock_origin: Duration::from_secs(8 * 3600),
            battery_start: 100.0,
            battery_drain_per_hour: 12.0,
            start_screen: ScreenId::MainMenu,
        }
    }
}

/// Side effect of a button press.
#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Advance,
    StepBack,
    Answer(String),
    Approve(String),
    Decline,
    SelectGroup(usize),
    /// The caller should start the path at this index.
    StartPath(usize),
    AcceptGroup {
        group: IllnessGroup,
        path: Option<usize>,
    },
    Dismiss(u8),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub button: String,
    pub from: ScreenId,
    pub to: ScreenId,
    pub command: Option<Command>,
    /// Set when the engine refused the command.
    pub note: Option<String>,
}

/// What one drain of the bus produced.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Drained {
    pub vitals: Vec<(String, SlotValue)>,
    pub warning: Option<WarningEvent>,
    pub situation: Option<IllnessGroup>,
}

impl Drained {
    pub fn is_empty(&self) -> bool {
        self.vitals.is_empty() && self.warning.is_none() && self.situation.is_none()
    }
}

/// Consumer side of the display: owns navigation state, the latest bus
/// values and the warning queue, and turns touches into session commands.
#[derive(Debug, Clone)]
pub struct Controller {
    cfg: ControllerConfig,
    nav: Navigator,
    latest: BTreeMap<String, SlotValue>,
    queued: VecDeque<WarningEvent>,
    shown: Vec<WarningEvent>,
    alarms: VecDeque<WarningEvent>,
    ranked: Vec<(IllnessGroup, f64)>,
    selected_group: usize,
    accepted_group: Option<IllnessGroup>,
    patient: PatientFacts,
    tracker: TouchTracker,
    now: Duration,
}

impl Controller {
    pub fn new(cfg: ControllerConfig) -> Self {
        let ranked = crate::DetectionVector::uniform()
            .top_k(5)
            .expect("5 is a valid rank count");
        Controller {
            nav: Navigator::new(cfg.start_screen),
            cfg,
            latest: BTreeMap::new(),
            queued: VecDeque::new(),
            shown: Vec::new(),
            alarms: VecDeque::new(),
            ranked,
            selected_group: 0,
            accepted_group: None,
            patient: PatientFacts::new(),
            tracker: TouchTracker::new(),
            now: Duration::ZERO,
        }
    }

    pub fn screen(&self) -> ScreenId {
        self.nav.current()
    }

    pub fn navigator(&self) -> &Navigator {
        &self.nav
    }

    pub fn ranked(&self) -> &[(IllnessGroup, f64)] {
        &self.ranked
    }

    pub fn accepted_group(&self) -> Option<IllnessGroup> {
        self.accepted_group
    }

    pub fn latest(&self, slot: &str) -> Option<SlotValue> {
        self.latest.get(slot).copied()
    }

    pub fn set_patient(&mut self, facts: PatientFacts) {
        self.patient = facts;
    }

    pub fn set_now(&mut self, now: Duration) {
        self.now = self.now.max(now);
    }

    pub fn battery_percent(&self) -> u8 {
        let hours = self.now.as_secs_f64() / 3600.0;
        (self.cfg.battery_start - hours * self.cfg.battery_drain_per_hour)
            .clamp(0.0, 100.0)
            .round() as u8
    }

    fn warning_from_code(&self, code: u8) -> WarningEvent {
        let message = self
            .cfg
            .thresholds
            .message(code)
            .map(str::to_string)
            .unwrap_or_else(|| match code {
                TIMER_OVERDUE_CODE => "Zeitkritischer Schritt überfällig".into(),
                c if NOTIFICATION_CODES.contains(&c) => format!("Hinweis {c}"),
                c => format!("Warnung {c}"),
            });
        WarningEvent {
            code,
            message,
            origin: WarningOrigin::Bus,
        }
    }

    fn sample(&self) -> Option<VitalsSample> {
        let get = |f: VitalField| {
            self.latest
                .get(f.name())
                .and_then(|v| v.as_int())
                .and_then(|v| u16::try_from(v).ok())
        };
        Some(VitalsSample {
            t: self.now.as_secs_f64(),
            spo2: get(VitalField::Spo2)?,
            pulse: get(VitalField::Pulse)?,
            bp_sys: get(VitalField::BpSys)?,
            bp_dia: get(VitalField::BpDia)?,
            resp_rate: get(VitalField::RespRate)?,
        })
    }

    fn refresh_detection(&mut self) {
        if let Some(s) = self.sample() {
            self.ranked = mock_detect::<f64>(&s, &self.cfg.detection)
                .top_k(5)
                .expect("5 is a valid rank count");
        }
    }

    /// Peeks the value slots (they stay valid for the producer's next
    /// write) and consumes the warning and situation slots, which are
    /// edge-triggered.
    pub fn drain_dynamic(&mut self, bus: &BusRegion) -> Drained {
        let mut out = Drained::default();
        for spec in bus.map().slots() {
            let name = spec.name.as_str();
            if name == WARNING_SLOT || name == SITUATION_SLOT {
                continue;
            }
            if let Ok(Some(v)) = bus.peek(name) {
                if self.latest.insert(name.to_string(), v) != Some(v) {
                    out.vitals.push((name.to_string(), v));
                }
            }
        }
        if let Ok(Some(SlotValue::Int32(code))) = bus.consume(WARNING_SLOT) {
            match u8::try_from(code) {
                Ok(c) if WARNING_CODES.contains(&c) || NOTIFICATION_CODES.contains(&c) => {
                    let w = self.warning_from_code(c);
                    self.raise(w.clone());
                    out.warning = Some(w);
                }
                _ => log::warn!("ignoring warning slot value {code}"),
            }
        }
        if let Ok(Some(SlotValue::IdWord(word))) = bus.consume(SITUATION_SLOT) {
            match decode_id_word(word) {
                Ok(id) => out.situation = Some(id.group()),
                Err(e) => log::warn!("ignoring situation word {word:#010x}: {e}"),
            }
        }
        if !out.vitals.is_empty() {
            self.refresh_detection();
        }
        if out.situation.is_some() && self.nav.current() == ScreenId::SituationSelect {
            let _ = self.nav.apply(&self.cfg.table, &Event::DetectionReady);
        }
        out
    }

    /// Consumes the value slots after their values were shown, clearing
    /// their validity bits. A value published since the last peek is kept
    /// for the next frame. Returns whether any such newer value arrived.
    pub fn acknowledge(&mut self, bus: &BusRegion) -> bool {
        let mut newer = false;
        for spec in bus.map().slots() {
            let name = spec.name.as_str();
            if name == WARNING_SLOT || name == SITUATION_SLOT {
                continue;
            }
            if let Ok(Some(v)) = bus.consume(name) {
                newer |= self.latest.insert(name.to_string(), v) != Some(v);
            }
        }
        if newer {
            self.refresh_detection();
        }
        newer
    }

    /// Queues a warning; it preempts the screen before any other event.
    pub fn raise(&mut self, w: WarningEvent) {
        self.alarms.push_front(w.clone());
        self.alarms.truncate(MAX_ALARMS);
        self.queued.push_back(w);
    }

    fn flush_warnings(&mut self) {
        while let Some(w) = self.queued.pop_front() {
            let before = self.nav.current();
            if let Ok(after) = self.nav.apply(&self.cfg.table, &Event::Warning(w.clone())) {
                if after == before && !self.shown.is_empty() {
                    self.shown.pop();
                }
                self.shown.push(w);
            }
        }
    }

    /// Applies queued warnings, then opens or closes the approval modal to
    /// match the session.
    pub fn sync(&mut self, session: Option<&Session>) {
        self.flush_warnings();
        let approval = session
            .and_then(|s| s.pending())
            .is_some_and(|p| p.kind == PendingKind::Approval);
        match self.nav.current() {
            ScreenId::Treatment if approval => {
                let _ = self.nav.apply(&self.cfg.table, &Event::Approval);
            }
            ScreenId::Approval if !approval => {
                let _ = self.nav.apply(&self.cfg.table, &Event::Button("decline_button".into()));
            }
            _ => {}
        }
        if self.nav.current() == ScreenId::Treatment && session.is_none() {
            self.nav.replace(ScreenId::AllTreatments);
        }
    }

    fn log_lines(session: Option<&Session>) -> Vec<String> {
        session
            .map(|s| {
                s.log()
                    .iter()
                    .rev()
                    .take(3)
                    .map(|r| {
                        let label = r.label.as_deref().map(|l| format!(" ({l})")).unwrap_or_default();
                        format!("{:.1}s {} {}{label}", r.t as f64 / 1000.0, r.op, r.cursor)
                    })
                    .collect()
            })
            .unwrap_or_default()
    }

    /// Composes the frame for the current screen.
    pub fn frame(&self, session: Option<&Session>) -> Result<FrameState, DisplayError> {
        let snapshot = Snapshot(self.latest.iter().map(|(k, v)| (k.clone(), Some(*v))).collect());
        let patient = match (self.patient.is_empty(), session) {
            (true, Some(s)) => s.facts(),
            _ => &self.patient,
        };
        let paths: Vec<String> = self.cfg.paths.iter().map(|p| p.title.clone()).collect();
        let alarms: Vec<WarningEvent> = self.alarms.iter().cloned().collect();
        let settings = vec![
            format!("Akku {}%", self.battery_percent()),
            format!("Entladung {:.0}% pro Stunde", self.cfg.battery_drain_per_hour),
            format!("{} Behandlungspfade", self.cfg.paths.len()),
        ];
        let log_lines = Self::log_lines(session);
        compose(&ComposeInput {
            screen: self.nav.current(),
            base: self.nav.base(),
            session,
            detection: Some(&self.ranked),
            selected_group: self.selected_group,
            snapshot: &snapshot,
            patient,
            warning: self.shown.last(),
            time_of_day: self.cfg.clock_origin + self.now,
            battery_percent: self.battery_percent(),
            paths: &paths,
            alarms: &alarms,
            log_lines: &log_lines,
            settings_lines: &settings,
        })
    }

    /// Feeds a raw touch; a click on a button is pressed.
    pub fn touch(
        &mut self,
        event: TouchEvent,
        frame: &FrameState,
        session: Option<&mut Session>,
    ) -> Option<Result<Outcome, DisplayError>> {
        let click = self.tracker.feed(event)?;
        let id = hit_test(frame, &click)?;
        Some(self.press(&id, session))
    }

    fn index(id: &str, prefix: &str) -> Option<usize> {
        id.strip_prefix(prefix)?.parse().ok()
    }

    /// Presses a button on the current screen.
    pub fn press(&mut self, id: &str, mut session: Option<&mut Session>) -> Result<Outcome, DisplayError> {
        self.flush_warnings();
        let from = self.nav.current();
        self.cfg.table.lookup(from, id)?;

        let mut note = None;
        let command = match (from, id) {
            (ScreenId::Treatment, "next_step") => Some(Command::Advance),
            (ScreenId::Treatment, "back_step") => Some(Command::StepBack),
            (ScreenId::Treatment, _) if id.starts_with("option_") => {
                let options = session
                    .as_deref()
                    .and_then(|s| s.pending())
                    .map(|p| p.options.clone())
                    .unwrap_or_default();
                let i = Self::index(id, "option_").filter(|&i| i < options.len());
                i.map(|i| Command::Answer(options[i].clone()))
            }
            (ScreenId::Approval, "approve_button") => session
                .as_deref()
                .and_then(|s| s.pending())
                .and_then(|p| p.auto_choice.clone())
                .map(Command::Approve),
            (ScreenId::Approval, "decline_button") => Some(Command::Decline),
            (ScreenId::Warning | ScreenId::Notification, "dismiss_button") => {
                self.shown.pop().map(|w| Command::Dismiss(w.code))
            }
            (ScreenId::SituationSelect, _) if id.starts_with("group_") => Self::index(id, "group_")
                .filter(|&i| i < self.ranked.len())
                .map(Command::SelectGroup),
            (ScreenId::SituationSelect, "accept_button") => {
                let group = self.ranked[self.selected_group.min(self.ranked.len() - 1)].0;
                self.accepted_group = Some(group);
                let path = self.cfg.paths.iter().position(|p| p.group == Some(group));
                Some(Command::AcceptGroup { group, path })
            }
            (ScreenId::AllTreatments, _) if id.starts_with("path_") => Self::index(id, "path_")
                .filter(|&i| i < self.cfg.paths.len())
                .map(Command::StartPath),
            _ => None,
        };

        if let Some(s) = session.as_deref_mut() {
            let result = match &command {
                Some(Command::Advance) => s.advance().map(|a| {
                    if let Advance::Pending(p) = a {
                        log::debug!("waiting for {:?} at {}", p.kind, p.node);
                    }
                }),
                Some(Command::StepBack) => s.step_back(),
                Some(Command::Answer(label) | Command::Approve(label)) => s.answer(label).map(|_| ()),
                Some(Command::Decline) => s.decline_approval(),
                _ => Ok(()),
            };
            if let Err(e) = result {
                note = Some(e.to_string());
            }
        }
        if let Some(Command::SelectGroup(i)) = command {
            self.selected_group = i;
        }

        self.nav.apply(&self.cfg.table, &Event::Button(id.to_string()))?;
        let starts_session = matches!(
            command,
            Some(Command::StartPath(_)) | Some(Command::AcceptGroup { path: Some(_), .. })
        );
        if self.nav.current() == ScreenId::Treatment && session.is_none() && !starts_session {
            self.nav.replace(ScreenId::AllTreatments);
        }
        Ok(Outcome {
            button: id.to_string(),
            from,
            to: self.nav.current(),
            command,
            note,
        })
    }
}
