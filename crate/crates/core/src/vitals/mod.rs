//! Patient vitals: samples, scenario files, synthetic scenarios, threshold
//! warnings and the producer-side pump that publishes them onto the bus.

mod pump;
mod rules;
mod synth;

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::engine::{FactValue, PatientFacts};

pub use pump::{PublishEffect, Pump, SITUATION_SLOT, WARNING_SLOT};
pub use rules::{check_thresholds, ThresholdRule, ThresholdRules};
pub use synth::{synth_scenario, Profile};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum FeedError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: t = {t} does not increase (previous {previous})")]
    Order { line: usize, t: f64, previous: f64 },
    #[error("scenario has no samples")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VitalField {
    Spo2,
    Pulse,
    BpSys,
    BpDia,
    RespRate,
}

impl VitalField {
    pub const ALL: [VitalField; 5] = [
        VitalField::Spo2,
        VitalField::Pulse,
        VitalField::BpSys,
        VitalField::BpDia,
        VitalField::RespRate,
    ];

    /// Column name in scenario files, which is also the bus slot name.
    pub fn name(self) -> &'static str {
        match self {
            VitalField::Spo2 => "spo2",
            VitalField::Pulse => "pulse",
            VitalField::BpSys => "bp_sys",
            VitalField::BpDia => "bp_dia",
            VitalField::RespRate => "resp_rate",
        }
    }

    pub fn parse(s: &str) -> Option<VitalField> {
        VitalField::ALL.into_iter().find(|f| f.name() == s)
    }

    /// Inclusive physical range.
    pub fn range(self) -> (u16, u16) {
        match self {
            VitalField::Spo2 => (0, 100),
            VitalField::Pulse | VitalField::BpSys | VitalField::BpDia => (0, 300),
            VitalField::RespRate => (0, 80),
        }
    }
}

impl fmt::Display for VitalField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VitalsSample {
    /// Seconds from scenario start.
    pub t: f64,
    pub spo2: u16,
    pub pulse: u16,
    pub bp_sys: u16,
    pub bp_dia: u16,
    pub resp_rate: u16,
}

impl VitalsSample {
    pub fn value(&self, field: VitalField) -> u16 {
        match field {
            VitalField::Spo2 => self.spo2,
            VitalField::Pulse => self.pulse,
            VitalField::BpSys => self.bp_sys,
            VitalField::BpDia => self.bp_dia,
            VitalField::RespRate => self.resp_rate,
        }
    }

    pub fn get(&self, field: VitalField) -> f64 {
        f64::from(self.value(field))
    }

    fn set(&mut self, field: VitalField, v: u16) {
        match field {
            VitalField::Spo2 => self.spo2 = v,
            VitalField::Pulse => self.pulse = v,
            VitalField::BpSys => self.bp_sys = v,
            VitalField::BpDia => self.bp_dia = v,
            VitalField::RespRate => self.resp_rate = v,
        }
    }

    /// Range and blood-pressure ordering checks.
    pub fn check(&self) -> Result<(), String> {
        if !(self.t.is_finite() && self.t >= 0.0) {
            return Err(format!("t = {} must be finite and >= 0", self.t));
        }
        for f in VitalField::ALL {
            let (lo, hi) = f.range();
            let v = self.value(f);
            if v < lo || v > hi {
                return Err(format!("{f} = {v} outside {lo}..={hi}"));
            }
        }
        if self.bp_dia > self.bp_sys {
            return Err(format!("bp_dia = {} exceeds bp_sys = {}", self.bp_dia, self.bp_sys));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub patient: PatientFacts,
    pub samples: Vec<VitalsSample>,
}

const HEADER: [&str; 6] = ["t", "spo2", "pulse", "bp_sys", "bp_dia", "resp_rate"];

impl Scenario {
    pub fn new(patient: PatientFacts, samples: Vec<VitalsSample>) -> Result<Self, FeedError> {
        if samples.is_empty() {
            return Err(FeedError::Empty);
        }
        for (i, s) in samples.iter().enumerate() {
            s.check().map_err(|msg| FeedError::Parse { line: i + 1, msg })?;
            if i > 0 && s.t <= samples[i - 1].t {
                return Err(FeedError::Order {
                    line: i + 1,
                    t: s.t,
                    previous: samples[i - 1].t,
                });
            }
        }
        Ok(Scenario { patient, samples })
    }

    /// Scenario length in seconds (time of the last sample).
    pub fn duration(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.t)
    }

    /// Canonical text form; [`load_scenario`] reads it back.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.patient.iter() {
            let _ = writeln!(out, "{k}: {v}");
        }
        out.push_str("---\n");
        out.push_str(&HEADER.join(" "));
        out.push('\n');
        for s in &self.samples {
            let _ = writeln!(
                out,
                "{} {} {} {} {} {}",
                s.t, s.spo2, s.pulse, s.bp_sys, s.bp_dia, s.resp_rate
            );
        }
        out
    }
}

/// Reads a scenario: `key: value` patient facts, a `---` line, a column
/// header and whitespace-separated sample rows. `#` starts a comment.
pub fn load_scenario(text: &str) -> Result<Scenario, FeedError> {
    let mut patient = PatientFacts::new();
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let mut saw_separator = false;
    for (line, l) in lines.by_ref() {
        if l == "---" {
            saw_separator = true;
            break;
        }
        let (k, v) = l.split_once(':').ok_or_else(|| FeedError::Parse {
            line,
            msg: format!("expected 'key: value', got '{l}'"),
        })?;
        patient
            .insert(k.trim(), FactValue::parse(v))
            .map_err(|e| FeedError::Parse {
                line,
                msg: e.to_string(),
            })?;
    }
    if !saw_separator {
        return Err(FeedError::Parse {
            line: 0,
            msg: "missing '---' between patient facts and samples".into(),
        });
    }

    let (hline, header) = lines.next().ok_or(FeedError::Empty)?;
    let cols: Vec<&str> = header.split_whitespace().collect();
    if cols != HEADER {
        return Err(FeedError::Parse {
            line: hline,
            msg: format!("expected header '{}'", HEADER.join(" ")),
        });
    }

    let mut samples: Vec<VitalsSample> = Vec::new();
    for (line, l) in lines {
        let cells: Vec<&str> = l.split_whitespace().collect();
        if cells.len() != HEADER.len() {
            return Err(FeedError::Parse {
                line,
                msg: format!("expected {} columns, got {}", HEADER.len(), cells.len()),
            });
        }
        let t: f64 = cells[0].parse().map_err(|_| FeedError::Parse {
            line,
            msg: format!("bad t '{}'", cells[0]),
        })?;
        let mut s = VitalsSample {
            t,
            spo2: 0,
            pulse: 0,
            bp_sys: 0,
            bp_dia: 0,
            resp_rate: 0,
        };
        for (f, cell) in VitalField::ALL.into_iter().zip(&cells[1..]) {
            let v: u16 = cell.parse().map_err(|_| FeedError::Parse {
                line,
                msg: format!("bad {f} '{cell}'"),
            })?;
            s.set(f, v);
        }
        s.check().map_err(|msg| FeedError::Parse { line, msg })?;
        if let Some(prev) = samples.last() {
            if s.t <= prev.t {
                return Err(FeedError::Order {
                    line,
                    t: s.t,
                    previous: prev.t,
                });
            }
        }
        samples.push(s);
    }
    Scenario::new(patient, samples)
}
