use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Scenario, VitalsSample};
use crate::engine::PatientFacts;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Stable,
    Deteriorating,
    Arrest,
}

impl FromStr for Profile {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "stable" => Ok(Profile::Stable),
            "deteriorating" => Ok(Profile::Deteriorating),
            "arrest" => Ok(Profile::Arrest),
            other => Err(format!("unknown profile '{other}' (stable, deteriorating, arrest)")),
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Profile::Stable => "stable",
            Profile::Deteriorating => "deteriorating",
            Profile::Arrest => "arrest",
        })
    }
}

fn clamp(v: i32, lo: i32, hi: i32) -> u16 {
    v.clamp(lo, hi) as u16
}

/// Linear interpolation between `from` and `to` at fraction `x` in [0, 1].
fn lerp(from: f64, to: f64, x: f64) -> f64 {
    from + (to - from) * x
}

/// One sample per second for `duration_secs` seconds. Deterministic for a
/// given seed; `duration_secs` of 0 is treated as 1.
pub fn synth_scenario(seed: u64, duration_secs: u32, profile: Profile) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = duration_secs.max(1) as usize;

    let sex = ["M", "F"][rng.gen_range(0..2)];
    let age = f64::from(rng.gen_range(20u32..=85));
    let patient = PatientFacts::new()
        .with("name", format!("Patient {seed}").as_str())
        .and_then(|f| f.with("sex", sex))
        .and_then(|f| f.with("age_years", age))
        .expect("synthetic facts are valid");

    let mut spo2 = 97i32;
    let mut pulse = 72i32;
    let mut bp_sys = 125i32;
    let mut bp_dia = 80i32;
    let mut resp = 14i32;
    // arrest sets in for the final fifth (at least the last sample)
    let arrest_from = n - (n / 5).max(1);

    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let x = if n > 1 { i as f64 / (n - 1) as f64 } else { 1.0 };
        let noise = |rng: &mut ChaCha8Rng, k: i32| rng.gen_range(-k..=k);
        let s = match profile {
            Profile::Stable => {
                spo2 = (spo2 + noise(&mut rng, 1)).clamp(95, 100);
                pulse = (pulse + noise(&mut rng, 2)).clamp(60, 100);
                bp_sys = (bp_sys + noise(&mut rng, 2)).clamp(110, 140);
                bp_dia = (bp_dia + noise(&mut rng, 1)).clamp(65, 90);
                resp = (resp + noise(&mut rng, 1)).clamp(12, 18);
                (spo2, pulse, bp_sys, bp_dia, resp)
            }
            Profile::Deteriorating => (
                lerp(96.0, 84.0, x).round() as i32 + noise(&mut rng, 1),
                lerp(80.0, 135.0, x).round() as i32 + noise(&mut rng, 2),
                lerp(125.0, 90.0, x).round() as i32 + noise(&mut rng, 2),
                lerp(80.0, 60.0, x).round() as i32 + noise(&mut rng, 1),
                lerp(16.0, 28.0, x).round() as i32 + noise(&mut rng, 1),
            ),
            Profile::Arrest if i >= arrest_from => {
                let k = (i - arrest_from) as i32;
                (70 - 4 * k + noise(&mut rng, 1), 0, 0, 0, 0)
            }
            Profile::Arrest => (
                lerp(95.0, 82.0, x).round() as i32 + noise(&mut rng, 1),
                lerp(95.0, 150.0, x).round() as i32 + noise(&mut rng, 2),
                lerp(120.0, 80.0, x).round() as i32 + noise(&mut rng, 2),
                lerp(75.0, 50.0, x).round() as i32 + noise(&mut rng, 1),
                lerp(18.0, 32.0, x).round() as i32 + noise(&mut rng, 1),
            ),
        };
        let bp_sys_v = clamp(s.2, 0, 300);
        samples.push(VitalsSample {
            t: i as f64,
            spo2: clamp(s.0, 0, 100),
            pulse: clamp(s.1, 0, 300),
            bp_sys: bp_sys_v,
            bp_dia: clamp(s.3, 0, i32::from(bp_sys_v)),
            resp_rate: clamp(s.4, 0, 80),
        });
    }
    Scenario::new(patient, samples).expect("synthetic samples satisfy scenario invariants")
}
