use std::collections::HashSet;

use super::{FeedError, VitalField, VitalsSample};
use crate::graph::Comparator;
use crate::warning::{WarningEvent, WarningOrigin, NOTIFICATION_CODES, TIMER_OVERDUE_CODE, WARNING_CODES};

const DEFAULT_RULES: &str = include_str!("../../data/thresholds.rules");

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdRule {
    pub field: VitalField,
    pub comparator: Comparator,
    pub bound: f64,
    pub warning_code: u8,
    pub message: String,
}

impl ThresholdRule {
    pub fn violated_by(&self, sample: &VitalsSample) -> bool {
        self.comparator.holds(sample.get(self.field), self.bound)
    }
}

/// Rule set sorted by warning code; codes are unique.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdRules {
    rules: Vec<ThresholdRule>,
}

impl ThresholdRules {
    pub fn new(mut rules: Vec<ThresholdRule>) -> Result<Self, FeedError> {
        let mut seen = HashSet::new();
        for r in &rules {
            let err = |msg: String| FeedError::Parse { line: 0, msg };
            if !WARNING_CODES.contains(&r.warning_code) && !NOTIFICATION_CODES.contains(&r.warning_code) {
                return Err(err(format!("warning code {} outside 1..=31", r.warning_code)));
            }
            if r.warning_code == TIMER_OVERDUE_CODE {
                return Err(err(format!("warning code {TIMER_OVERDUE_CODE} is reserved for timers")));
            }
            if !seen.insert(r.warning_code) {
                return Err(err(format!("warning code {} used twice", r.warning_code)));
            }
        }
        rules.sort_by_key(|r| r.warning_code);
        Ok(ThresholdRules { rules })
    }

    /// One rule per row: `code field comparator bound message...`.
    pub fn parse(text: &str) -> Result<Self, FeedError> {
        let mut rules = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let err = |msg: String| FeedError::Parse { line, msg };
            let cols: Vec<&str> = content.split_whitespace().collect();
            let [code, field, cmp, bound, rest @ ..] = cols.as_slice() else {
                return Err(err(format!(
                    "expected 'code field comparator bound message', got '{content}'"
                )));
            };
            if rest.is_empty() {
                return Err(err("missing message".into()));
            }
            rules.push(ThresholdRule {
                warning_code: code.parse().map_err(|_| err(format!("bad code '{code}'")))?,
                field: VitalField::parse(field).ok_or_else(|| err(format!("unknown field '{field}'")))?,
                comparator: Comparator::parse(cmp).ok_or_else(|| err(format!("unknown comparator '{cmp}'")))?,
                bound: bound.parse().map_err(|_| err(format!("bad bound '{bound}'")))?,
                message: rest.join(" "),
            });
        }
        ThresholdRules::new(rules).map_err(|e| match e {
            FeedError::Parse { msg, .. } => FeedError::Parse { line: 0, msg },
            other => other,
        })
    }

    pub fn rules(&self) -> &[ThresholdRule] {
        &self.rules
    }

    pub fn message(&self, code: u8) -> Option<&str> {
        self.rules
            .iter()
            .find(|r| r.warning_code == code)
            .map(|r| r.message.as_str())
    }
}

impl Default for ThresholdRules {
    fn default() -> Self {
        ThresholdRules::parse(DEFAULT_RULES).expect("bundled threshold rules parse")
    }
}

/// One event per violated rule, ordered by warning code.
pub fn check_thresholds(sample: &VitalsSample, rules: &ThresholdRules) -> Vec<WarningEvent> {
    rules
        .rules
        .iter()
        .filter(|r| r.violated_by(sample))
        .map(|r| WarningEvent {
            code: r.warning_code,
            message: r.message.clone(),
            origin: WarningOrigin::Vitals { field: r.field },
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nominal() -> VitalsSample {
        VitalsSample {
            t: 0.0,
            spo2: 98,
            pulse: 70,
            bp_sys: 120,
            bp_dia: 80,
            resp_rate: 14,
        }
    }

    #[test]
    fn low_spo2() {
        let s = VitalsSample { spo2: 85, ..nominal() };
        let w = check_thresholds(&s, &ThresholdRules::default());
        assert_eq!(w.len(), 1);
        assert_eq!((w[0].code, w[0].message.as_str()), (1, "SpO2 niedrig"));
    }

    #[test]
    fn nominal_is_quiet() {
        assert!(check_thresholds(&nominal(), &ThresholdRules::default()).is_empty());
    }

    #[test]
    fn pulseless_includes_arrest_code() {
        let s = VitalsSample { pulse: 0, ..nominal() };
        let w = check_thresholds(&s, &ThresholdRules::default());
        let codes: Vec<u8> = w.iter().map(|e| e.code).collect();
        assert_eq!(codes, [2, 15]);
        let top = w.iter().max_by_key(|e| e.priority()).unwrap();
        assert_eq!(top.code, 15);
    }

    #[test]
    fn ordering_and_purity() {
        let rules = ThresholdRules::default();
        let s = VitalsSample {
            spo2: 80,
            pulse: 0,
            bp_sys: 60,
            bp_dia: 40,
            resp_rate: 35,
            t: 3.0,
        };
        let a = check_thresholds(&s, &rules);
        let b = check_thresholds(&s, &rules);
        assert_eq!(a, b);
        assert!(a.windows(2).all(|w| w[0].code < w[1].code));
        assert!(a.iter().any(|e| e.is_notification()));
    }

    #[test]
    fn bad_rule_sets() {
        assert!(ThresholdRules::parse("1 spo2 LT 90 a\n1 pulse LT 40 b").is_err());
        assert!(ThresholdRules::parse("0 spo2 LT 90 a").is_err());
        assert!(ThresholdRules::parse("32 spo2 LT 90 a").is_err());
        assert!(ThresholdRules::parse("14 spo2 LT 90 a").is_err());
        assert!(ThresholdRules::parse("1 heart LT 90 a").is_err());
        assert!(ThresholdRules::parse("1 spo2 LT").is_err());
        let r = ThresholdRules::parse("3 pulse GT 140 Puls  sehr hoch # c").unwrap();
        assert_eq!(r.message(3), Some("Puls sehr hoch"));
    }
}
