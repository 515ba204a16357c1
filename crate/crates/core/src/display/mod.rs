//! Screen state machine and layout engine for the 320×240 touch panel.
//!
//! Every screen is described by a declarative [`FrameState`]: a header,
//! up to four side buttons, positioned central elements and an optional
//! modal. Frames are plain data; a client paints them and sends back
//! [`TouchEvent`]s, which are hit-tested against the same frame.

mod audit;
mod compose;
mod controller;
pub mod icons;
mod transitions;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::text::{Rgb, SCREEN_HEIGHT, SCREEN_WIDTH};

pub use audit::{audit_frame, frame_digest, GeometryViolation};
pub use compose::{compose, layout, ComposeInput};
pub use controller::{Command, Controller, ControllerConfig, Drained, Outcome, PathEntry};
pub use transitions::{Event, Navigator, TransitionRow, TransitionTable, RETURN};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum DisplayError {
    #[error("inconsistent input: {0}")]
    InconsistentInput(String),
    #[error("no transition from {from} on '{event}'")]
    InvalidTransition { from: ScreenId, event: String },
    #[error("transition table line {line}: {msg}")]
    Table { line: usize, msg: String },
    #[error("touch ({x}, {y}) outside the 320x240 screen")]
    TouchOutOfRange { x: u32, y: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ScreenId {
    MainMenu,
    PatientMonitor,
    Treatment,
    SituationSelect,
    Warning,
    Notification,
    Approval,
    MassiveInfo,
    AllTreatments,
    Alarms,
    Logging,
    Settings,
}

impl ScreenId {
    pub const ALL: [ScreenId; 12] = [
        ScreenId::MainMenu,
        ScreenId::PatientMonitor,
        ScreenId::Treatment,
        ScreenId::SituationSelect,
        ScreenId::Warning,
        ScreenId::Notification,
        ScreenId::Approval,
        ScreenId::MassiveInfo,
        ScreenId::AllTreatments,
        ScreenId::Alarms,
        ScreenId::Logging,
        ScreenId::Settings,
    ];

    /// Screens drawn as an overlay on top of the screen they preempted.
    pub fn is_modal(self) -> bool {
        matches!(self, ScreenId::Warning | ScreenId::Notification | ScreenId::Approval)
    }

    pub fn name(self) -> &'static str {
        match self {
            ScreenId::MainMenu => "MainMenu",
            ScreenId::PatientMonitor => "PatientMonitor",
            ScreenId::Treatment => "Treatment",
            ScreenId::SituationSelect => "SituationSelect",
            ScreenId::Warning => "Warning",
            ScreenId::Notification => "Notification",
            ScreenId::Approval => "Approval",
            ScreenId::MassiveInfo => "MassiveInfo",
            ScreenId::AllTreatments => "AllTreatments",
            ScreenId::Alarms => "Alarms",
            ScreenId::Logging => "Logging",
            ScreenId::Settings => "Settings",
        }
    }
}

impl fmt::Display for ScreenId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScreenId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ScreenId::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| format!("unknown screen '{s}'"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rect {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl Rect {
    pub const fn new(x: u32, y: u32, w: u32, h: u32) -> Self {
        Rect { x, y, w, h }
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        x >= self.x && x < self.x + self.w && y >= self.y && y < self.y + self.h
    }

    pub fn overlaps(&self, o: &Rect) -> bool {
        self.x < o.x + o.w && o.x < self.x + self.w && self.y < o.y + o.h && o.y < self.y + self.h
    }

    /// True when `o` lies entirely inside this rect.
    pub fn encloses(&self, o: &Rect) -> bool {
        o.x >= self.x && o.y >= self.y && o.x + o.w <= self.x + self.w && o.y + o.h <= self.y + self.h
    }

    pub fn on_screen(&self) -> bool {
        self.w > 0 && self.h > 0 && self.x + self.w <= SCREEN_WIDTH && self.y + self.h <= SCREEN_HEIGHT
    }

    pub fn center(&self) -> (u32, u32) {
        (self.x + self.w / 2, self.y + self.h / 2)
    }

    /// The rect shrunk by `p` pixels on every side.
    pub fn inset(&self, p: u32) -> Rect {
        Rect::new(self.x + p, self.y + p, self.w - 2 * p, self.h - 2 * p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColorRole {
    Neutral,
    Green,
    Red,
}

/// Text already fitted to its box: the size and line breaks are final.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Label {
    pub text: String,
    pub size: u32,
    pub lines: Vec<String>,
    /// Box the label was fitted into.
    pub rect: Rect,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ButtonSpec {
    pub id: String,
    pub rect: Rect,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub icon: Option<IconRef>,
    pub role: ColorRole,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IconRef {
    pub name: String,
    pub rect: Rect,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Element {
    Text { id: String, color: Rgb, label: Label },
    Icon { id: String, icon: IconRef },
}

impl Element {
    pub fn id(&self) -> &str {
        match self {
            Element::Text { id, .. } | Element::Icon { id, .. } => id,
        }
    }

    pub fn text(&self) -> Option<&str> {
        match self {
            Element::Text { label, .. } => Some(&label.text),
            Element::Icon { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Header {
    pub time: String,
    pub battery_percent: u8,
    pub menu_button: ButtonSpec,
    pub elements: Vec<Element>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModalKind {
    Warning,
    Notification,
    Approval,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Modal {
    pub kind: ModalKind,
    pub rect: Rect,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code: Option<u8>,
    pub elements: Vec<Element>,
    pub buttons: Vec<ButtonSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameState {
    pub screen: ScreenId,
    /// Absent only on the full-screen info view.
    pub header: Option<Header>,
    pub side_buttons: Vec<ButtonSpec>,
    /// Buttons in the central panel (menu tiles, list rows).
    pub central_buttons: Vec<ButtonSpec>,
    pub central: Vec<Element>,
    pub modal: Option<Modal>,
}

impl FrameState {
    /// Every button a touch could reach if no modal were open.
    pub fn base_buttons(&self) -> impl Iterator<Item = &ButtonSpec> {
        self.header
            .iter()
            .map(|h| &h.menu_button)
            .chain(&self.side_buttons)
            .chain(&self.central_buttons)
    }

    /// All buttons on the frame, modal ones included.
    pub fn all_buttons(&self) -> impl Iterator<Item = &ButtonSpec> {
        self.base_buttons()
            .chain(self.modal.iter().flat_map(|m| m.buttons.iter()))
    }

    pub fn element(&self, id: &str) -> Option<&Element> {
        self.header
            .iter()
            .flat_map(|h| h.elements.iter())
            .chain(&self.central)
            .chain(self.modal.iter().flat_map(|m| m.elements.iter()))
            .find(|e| e.id() == id)
    }

    pub fn button(&self, id: &str) -> Option<&ButtonSpec> {
        self.all_buttons().find(|b| b.id == id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TouchAction {
    Down,
    Up,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TouchEvent {
    pub x: u32,
    pub y: u32,
    pub action: TouchAction,
    /// Finger index for multi-touch panels; single-touch clients omit it.
    #[serde(default)]
    pub pointer: u8,
}

impl TouchEvent {
    pub fn new(x: u32, y: u32, action: TouchAction) -> Result<Self, DisplayError> {
        let e = TouchEvent {
            x,
            y,
            action,
            pointer: 0,
        };
        e.check()?;
        Ok(e)
    }

    pub fn check(&self) -> Result<(), DisplayError> {
        if self.x >= SCREEN_WIDTH || self.y >= SCREEN_HEIGHT {
            return Err(DisplayError::TouchOutOfRange { x: self.x, y: self.y });
        }
        Ok(())
    }
}

/// Id of the button under a released touch. An open modal shadows
/// everything beneath it.
pub fn hit_test(frame: &FrameState, touch: &TouchEvent) -> Option<String> {
    if touch.action != TouchAction::Up || touch.check().is_err() {
        return None;
    }
    let hit = |b: &&ButtonSpec| b.rect.contains(touch.x, touch.y);
    match &frame.modal {
        Some(m) => m.buttons.iter().find(hit),
        None => frame.base_buttons().find(hit),
    }
    .map(|b| b.id.clone())
}

/// Most simultaneous touch points the panel reports.
pub const MAX_TOUCH_POINTS: usize = 5;

/// Tracks up to five fingers. Only the primary finger (the first down
/// while no other finger rests on the panel) produces a click on release.
#[derive(Debug, Clone, Default)]
pub struct TouchTracker {
    active: Vec<u8>,
    primary: Option<u8>,
}

impl TouchTracker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn active(&self) -> usize {
        self.active.len()
    }

    /// Feeds one event; returns the event to hit-test, if any.
    pub fn feed(&mut self, e: TouchEvent) -> Option<TouchEvent> {
        match e.action {
            TouchAction::Down => {
                if self.active.contains(&e.pointer) || self.active.len() >= MAX_TOUCH_POINTS {
                    return None;
                }
                if self.active.is_empty() {
                    self.primary = Some(e.pointer);
                }
                self.active.push(e.pointer);
                None
            }
            TouchAction::Up => {
                let pos = self.active.iter().position(|&p| p == e.pointer)?;
                self.active.remove(pos);
                if self.primary == Some(e.pointer) {
                    self.primary = None;
                    Some(e)
                } else {
                    None
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn up(x: u32, y: u32, pointer: u8) -> TouchEvent {
        TouchEvent {
            x,
            y,
            action: TouchAction::Up,
            pointer,
        }
    }

    fn down(pointer: u8) -> TouchEvent {
        TouchEvent {
            x: 1,
            y: 1,
            action: TouchAction::Down,
            pointer,
        }
    }

    #[test]
    fn rects() {
        let r = Rect::new(0, 24, 105, 55);
        assert!(r.contains(0, 24) && r.contains(104, 78));
        assert!(!r.contains(105, 24) && !r.contains(0, 79));
        assert!(!r.overlaps(&Rect::new(105, 24, 10, 10)));
        assert!(r.overlaps(&Rect::new(104, 78, 10, 10)));
        assert!(Rect::new(215, 185, 105, 55).on_screen());
        assert!(!Rect::new(216, 185, 105, 55).on_screen());
    }

    #[test]
    fn touch_range() {
        assert!(TouchEvent::new(319, 239, TouchAction::Up).is_ok());
        assert!(TouchEvent::new(320, 0, TouchAction::Up).is_err());
    }

    #[test]
    fn tracker_limits_and_primary() {
        let mut t = TouchTracker::new();
        for p in 0..7 {
            t.feed(down(p));
        }
        assert_eq!(t.active(), MAX_TOUCH_POINTS);
        assert_eq!(t.feed(up(5, 5, 1)), None);
        assert_eq!(t.feed(up(5, 5, 6)), None);
        assert_eq!(t.feed(up(5, 5, 0)).map(|e| e.pointer), Some(0));
        assert_eq!(t.active(), 3);

        let mut t = TouchTracker::new();
        t.feed(down(3));
        assert_eq!(t.feed(up(7, 8, 3)).map(|e| (e.x, e.y)), Some((7, 8)));
    }

    #[test]
    fn screen_names() {
        for s in ScreenId::ALL {
            assert_eq!(s.name().parse::<ScreenId>().unwrap(), s);
        }
        assert_eq!(ScreenId::ALL.iter().filter(|s| s.is_modal()).count(), 3);
    }
}
