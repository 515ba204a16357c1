use std::collections::BTreeSet;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{check_thresholds, Scenario, ThresholdRules, VitalField, VitalsSample};
use crate::bus::{BusRegion, SlotValue};
use crate::clock::Clock;
use crate::detection::{mock_detect, DetectionRules};

pub const WARNING_SLOT: &str = "warning_code";
pub const SITUATION_SLOT: &str = "situation";

/// One value written to the bus by the producer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublishEffect {
    /// Scenario time in seconds.
    pub t: f64,
    pub slot: String,
    pub value: SlotValue,
}

/// Producer side of the bus: replays a scenario sample by sample.
///
/// Every vitals field goes to its slot. The warning slot receives the
/// top-priority active warning code whenever that code changes, so a
/// persisting condition is raised once. The situation slot receives the
/// detector's most likely group whenever it changes.
pub struct Pump<'a> {
    bus: &'a BusRegion,
    rules: &'a ThresholdRules,
    detection: Option<&'a DetectionRules>,
    missing: BTreeSet<String>,
    last_warning: Option<u8>,
    last_situation: Option<SlotValue>,
}

impl<'a> Pump<'a> {
    pub fn new(bus: &'a BusRegion, rules: &'a ThresholdRules, detection: Option<&'a DetectionRules>) -> Self {
        Pump {
            bus,
            rules,
            detection,
            missing: BTreeSet::new(),
            last_warning: None,
            last_situation: None,
        }
    }

    fn put(&mut self, t: f64, slot: &str, value: SlotValue, out: &mut Vec<PublishEffect>) {
        match self.bus.publish(slot, value) {
            Ok(()) => out.push(PublishEffect {
                t,
                slot: slot.to_string(),
                value,
            }),
            Err(e) => {
                if self.missing.insert(slot.to_string()) {
                    log::warn!("skipping slot '{slot}': {e}");
                }
            }
        }
    }

    /// Patient age and sex, published once before the first sample.
    pub fn publish_patient(&mut self, scenario: &Scenario) -> Vec<PublishEffect> {
        let mut out = Vec::new();
        if let Some(age) = scenario.patient.age_years() {
            self.put(0.0, "age_years", SlotValue::Int32(age.round() as i32), &mut out);
        }
        if let Some(sex) = scenario.patient.sex() {
            self.put(0.0, "sex_code", SlotValue::Int32(sex.code()), &mut out);
        }
        out
    }

    pub fn publish_sample(&mut self, sample: &VitalsSample) -> Vec<PublishEffect> {
        let mut out = Vec::new();
        for f in VitalField::ALL {
            self.put(
                sample.t,
                f.name(),
                SlotValue::Int32(i32::from(sample.value(f))),
                &mut out,
            );
        }

        let top = check_thresholds(sample, self.rules)
            .into_iter()
            .max_by_key(|w| w.priority())
            .map(|w| w.code);
        if top.is_some() && top != self.last_warning {
            let code = top.unwrap_or_default();
            self.put(sample.t, WARNING_SLOT, SlotValue::Int32(i32::from(code)), &mut out);
        }
        self.last_warning = top;

        if let Some(rules) = self.detection {
            let group = mock_detect::<f64>(sample, rules).argmax();
            let value = SlotValue::id(group.convention_id());
            if self.last_situation != Some(value) {
                self.put(sample.t, SITUATION_SLOT, value, &mut out);
                self.last_situation = Some(value);
            }
        }
        out
    }

    /// Replays the whole scenario against `clock`, handing every effect to
    /// `sink`. Stops early when `sink` returns `false`. Returns the number
    /// of effects published.
    pub fn run(
        &mut self,
        scenario: &Scenario,
        clock: &dyn Clock,
        mut sink: impl FnMut(&PublishEffect) -> bool,
    ) -> usize {
        let mut count = 0;
        for e in self.publish_patient(scenario) {
            count += 1;
            if !sink(&e) {
                return count;
            }
        }
        for sample in &scenario.samples {
            clock.sleep_until(Duration::from_secs_f64(sample.t));
            for e in self.publish_sample(sample) {
                count += 1;
                if !sink(&e) {
                    return count;
                }
            }
        }
        count
    }
}
