use std::collections::BTreeSet;
use std::fmt;

use super::{DisplayError, ScreenId};
use crate::warning::WarningEvent;

const DEFAULT_TABLE: &str = include_str!("../../data/transitions.table");

/// Target naming "the screen underneath".
pub const RETURN: &str = "@return";

/// Most screens remembered for `@return`; older entries are dropped.
const MAX_DEPTH: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Source {
    Screen(ScreenId),
    NonModal,
    Any,
}

impl Source {
    fn matches(&self, s: ScreenId) -> bool {
        match self {
            Source::Screen(x) => *x == s,
            Source::NonModal => !s.is_modal(),
            Source::Any => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Screen(ScreenId),
    Return,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionRow {
    pub from: Source,
    pub event: String,
    pub to: Target,
}

impl TransitionRow {
    fn matches_event(&self, key: &str) -> bool {
        match self.event.strip_suffix('*') {
            Some(prefix) => key.starts_with(prefix) && key.len() > prefix.len(),
            None => self.event == key,
        }
    }

    fn is_button(&self) -> bool {
        !self.event.starts_with('@')
    }
}

/// What a screen reacts to.
#[derive(Debug, Clone, PartialEq)]
pub enum Event {
    Button(String),
    Warning(WarningEvent),
    Approval,
    DetectionReady,
}

impl Event {
    /// The event column this event is looked up under.
    pub fn key(&self) -> &str {
        match self {
            Event::Button(id) => id,
            Event::Warning(w) if w.is_notification() => "@notification",
            Event::Warning(_) => "@warning",
            Event::Approval => "@approval",
            Event::DetectionReady => "@detection",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionTable {
    rows: Vec<TransitionRow>,
}

impl TransitionTable {
    pub fn parse(text: &str) -> Result<Self, DisplayError> {
        let mut rows = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let err = |msg: String| DisplayError::Table { line, msg };
            let cols: Vec<&str> = content.split_whitespace().collect();
            let [from, event, to] = cols.as_slice() else {
                return Err(err(format!("expected 'from event to', got '{content}'")));
            };
            let from = match *from {
                "*" => Source::NonModal,
                "!" => Source::Any,
                s => Source::Screen(s.parse().map_err(err)?),
            };
            let to = match *to {
                RETURN => Target::Return,
                s => Target::Screen(s.parse().map_err(err)?),
            };
            rows.push(TransitionRow {
                from,
                event: event.to_string(),
                to,
            });
        }
        Ok(TransitionTable { rows })
    }

    pub fn rows(&self) -> &[TransitionRow] {
        &self.rows
    }

    /// Looks up `event` on `current`. Rows naming the screen win over
    /// wildcard rows.
    pub fn lookup(&self, current: ScreenId, key: &str) -> Result<Target, DisplayError> {
        let candidates = || {
            self.rows
                .iter()
                .filter(move |r| r.from.matches(current) && r.matches_event(key))
        };
        candidates()
            .find(|r| matches!(r.from, Source::Screen(_)))
            .or_else(|| candidates().next())
            .map(|r| r.to)
            .ok_or_else(|| DisplayError::InvalidTransition {
                from: current,
                event: key.to_string(),
            })
    }

    /// Screens from which no sequence of button presses leads to the main
    /// menu. `@return` from a modal counts as reaching the main menu once
    /// every non-modal screen does, since a modal only ever covers those.
    pub fn cannot_reach_main_menu(&self) -> Vec<ScreenId> {
        let mut reach: BTreeSet<ScreenId> = BTreeSet::from([ScreenId::MainMenu]);
        loop {
            let all_base = ScreenId::ALL
                .iter()
                .filter(|s| !s.is_modal())
                .all(|s| reach.contains(s));
            let before = reach.len();
            for s in ScreenId::ALL {
                if reach.contains(&s) {
                    continue;
                }
                let ok = self
                    .rows
                    .iter()
                    .filter(|r| r.is_button() && r.from.matches(s))
                    .any(|r| match r.to {
                        Target::Screen(t) => reach.contains(&t),
                        Target::Return => s.is_modal() && all_base,
                    });
                if ok {
                    reach.insert(s);
                }
            }
            if reach.len() == before {
                break;
            }
        }
        ScreenId::ALL.into_iter().filter(|s| !reach.contains(s)).collect()
    }
}

impl Default for TransitionTable {
    fn default() -> Self {
        TransitionTable::parse(DEFAULT_TABLE).expect("bundled transition table parses")
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Screen(s) => write!(f, "{s}"),
            Target::Return => f.write_str(RETURN),
        }
    }
}

/// Current screen plus the stack of screens `@return` goes back to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Navigator {
    current: ScreenId,
    stack: Vec<ScreenId>,
}

impl Navigator {
    pub fn new(start: ScreenId) -> Self {
        Navigator {
            current: start,
            stack: Vec::new(),
        }
    }

    pub fn current(&self) -> ScreenId {
        self.current
    }

    /// Screen shown beneath the top-most modal, or the current screen.
    pub fn base(&self) -> ScreenId {
        if !self.current.is_modal() {
            return self.current;
        }
        self.stack
            .iter()
            .rev()
            .copied()
            .find(|s| !s.is_modal())
            .unwrap_or(ScreenId::MainMenu)
    }

    pub fn depth(&self) -> usize {
        self.stack.len()
    }

    pub fn apply(&mut self, table: &TransitionTable, event: &Event) -> Result<ScreenId, DisplayError> {
        let target = table.lookup(self.current, event.key())?;
        self.go(target);
        Ok(self.current)
    }

    fn go(&mut self, target: Target) {
        match target {
            Target::Return => self.current = self.stack.pop().unwrap_or(ScreenId::MainMenu),
            Target::Screen(t) if t == self.current => {}
            Target::Screen(ScreenId::MainMenu) => {
                self.stack.clear();
                self.current = ScreenId::MainMenu;
            }
            Target::Screen(t) => {
                if self.stack.len() == MAX_DEPTH {
                    self.stack.remove(0);
                }
                self.stack.push(self.current);
                self.current = t;
            }
        }
    }

    /// Jumps without consulting the table, remembering the current screen.
    pub fn redirect(&mut self, to: ScreenId) {
        self.go(Target::Screen(to));
    }

    /// Replaces the current screen without remembering it.
    pub fn replace(&mut self, to: ScreenId) {
        self.current = to;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::warning::WarningOrigin;

    fn button(id: &str) -> Event {
        Event::Button(id.into())
    }

    fn warning(code: u8) -> Event {
        Event::Warning(WarningEvent {
            code,
            message: "x".into(),
            origin: WarningOrigin::Bus,
        })
    }

    #[test]
    fn menu_from_header() {
        let t = TransitionTable::default();
        assert_eq!(
            t.lookup(ScreenId::Treatment, "menu_button"),
            Ok(Target::Screen(ScreenId::MainMenu))
        );
        assert!(t.lookup(ScreenId::Warning, "menu_button").is_err());
    }

    #[test]
    fn unknown_event() {
        let t = TransitionTable::default();
        assert_eq!(
            t.lookup(ScreenId::MainMenu, "accept_button"),
            Err(DisplayError::InvalidTransition {
                from: ScreenId::MainMenu,
                event: "accept_button".into()
            })
        );
        assert!(t.lookup(ScreenId::Treatment, "option_").is_err());
        assert!(t.lookup(ScreenId::Treatment, "option_2").is_ok());
    }

    #[test]
    fn warning_preempts_and_returns() {
        let t = TransitionTable::default();
        for s in ScreenId::ALL.into_iter().filter(|&s| s != ScreenId::Warning) {
            let mut nav = Navigator::new(s);
            assert_eq!(nav.apply(&t, &warning(1)).unwrap(), ScreenId::Warning);
            assert_eq!(nav.base(), if s.is_modal() { ScreenId::MainMenu } else { s });
            assert_eq!(nav.apply(&t, &button("dismiss_button")).unwrap(), s, "from {s}");
        }
    }

    #[test]
    fn notifications_use_their_own_screen() {
        let t = TransitionTable::default();
        let mut nav = Navigator::new(ScreenId::PatientMonitor);
        assert_eq!(nav.apply(&t, &warning(16)).unwrap(), ScreenId::Notification);
    }

    #[test]
    fn stacked_modals_unwind() {
        let t = TransitionTable::default();
        let mut nav = Navigator::new(ScreenId::Treatment);
        nav.apply(&t, &Event::Approval).unwrap();
        nav.apply(&t, &warning(2)).unwrap();
        assert_eq!(nav.base(), ScreenId::Treatment);
        assert_eq!(nav.apply(&t, &button("dismiss_button")).unwrap(), ScreenId::Approval);
        assert_eq!(nav.apply(&t, &button("approve_button")).unwrap(), ScreenId::Treatment);
    }

    #[test]
    fn menu_clears_stack() {
        let t = TransitionTable::default();
        let mut nav = Navigator::new(ScreenId::MainMenu);
        nav.apply(&t, &button("tile_treatment")).unwrap();
        nav.apply(&t, &button("monitor_button")).unwrap();
        assert_eq!(nav.depth(), 2);
        nav.apply(&t, &button("menu_button")).unwrap();
        assert_eq!(nav.depth(), 0);
    }

    #[test]
    fn accept_goes_to_treatment() {
        let t = TransitionTable::default();
        let mut nav = Navigator::new(ScreenId::SituationSelect);
        assert_eq!(nav.apply(&t, &button("accept_button")).unwrap(), ScreenId::Treatment);
    }

    #[test]
    fn every_screen_reaches_menu() {
        assert_eq!(TransitionTable::default().cannot_reach_main_menu(), []);
    }

    #[test]
    fn dead_end_detected() {
        let t = TransitionTable::parse("MainMenu tile_logging Logging").unwrap();
        let stuck = t.cannot_reach_main_menu();
        assert!(stuck.contains(&ScreenId::Logging));
        assert!(!stuck.contains(&ScreenId::MainMenu));
    }

    #[test]
    fn bad_rows() {
        assert!(TransitionTable::parse("MainMenu x").is_err());
        assert!(TransitionTable::parse("Nowhere x MainMenu").is_err());
        assert!(TransitionTable::parse("MainMenu x Nowhere").is_err());
    }

    #[test]
    fn depth_is_bounded() {
        let t = TransitionTable::default();
        let mut nav = Navigator::new(ScreenId::Treatment);
        for _ in 0..100 {
            nav.apply(&t, &button("monitor_button")).unwrap();
            nav.redirect(ScreenId::Treatment);
        }
        assert!(nav.depth() <= MAX_DEPTH);
    }
}
