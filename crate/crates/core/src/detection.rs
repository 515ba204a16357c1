//! Illness-group convention IDs, detection vectors and the rule-based
//! stand-in detector.
//!
//! The ten illness groups and their short codes are a fixed table; the codes
//! travel over the shared-memory bus as a packed 32-bit word and label the
//! situation-selection screen.

use std::fmt;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::graph::Comparator;
use crate::vitals::{VitalField, VitalsSample};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum DetectionError {
    #[error("unknown convention id '{0}'")]
    UnknownCode(String),
    #[error("word {0:#010x} does not hold a convention id")]
    BadWord(u32),
    #[error("k must be in 1..=10, got {0}")]
    BadK(usize),
    #[error("probabilities must be finite, non-negative and sum to 1 (sum = {0})")]
    NotNormalized(f64),
    #[error("rule line {line}: {msg}")]
    Rule { line: usize, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum IllnessGroup {
    ZnsKrankheiten,
    HerzKreislauf,
    Atemwege,
    Bauchraum,
    Psychiatrisch,
    Stoffwechsel,
    GynGeburtshilflich,
    AndereKrankheiten,
    Infektionen,
    Reanimation,
}

// Table order; also the tie-break order for ranking.
const TABLE: [(IllnessGroup, &str, &str); 10] = [
    (IllnessGroup::ZnsKrankheiten, "sdz", "ZNS-Krankheiten"),
    (IllnessGroup::HerzKreislauf, "sdh", "Herz-Kreislauf-Erkr."),
    (IllnessGroup::Atemwege, "sda", "Erkr. der Atemwege"),
    (IllnessGroup::Bauchraum, "sdb", "Erkr. des Bauchraums"),
    (IllnessGroup::Psychiatrisch, "sdp", "Psychiatrische Erk."),
    (IllnessGroup::Stoffwechsel, "sds", "Stoffwechselkrankheiten"),
    (IllnessGroup::GynGeburtshilflich, "sdg", "Gyn.-geburtshilf. Notfaelle"),
    (IllnessGroup::AndereKrankheiten, "sdak", "Andere Krankheiten"),
    (IllnessGroup::Infektionen, "sdi", "Infektionen"),
    (IllnessGroup::Reanimation, "sdr", "Reanimation"),
];

impl IllnessGroup {
    pub const ALL: [IllnessGroup; 10] = [
        IllnessGroup::ZnsKrankheiten,
        IllnessGroup::HerzKreislauf,
        IllnessGroup::Atemwege,
        IllnessGroup::Bauchraum,
        IllnessGroup::Psychiatrisch,
        IllnessGroup::Stoffwechsel,
        IllnessGroup::GynGeburtshilflich,
        IllnessGroup::AndereKrankheiten,
        IllnessGroup::Infektionen,
        IllnessGroup::Reanimation,
    ];

    /// Row in the convention-ID table, 0-based.
    pub fn row(self) -> usize {
        self as usize
    }

    /// Group name as printed in the convention-ID table.
    pub fn label(self) -> &'static str {
        TABLE[self.row()].2
    }

    pub fn convention_id(self) -> ConventionId {
        ConventionId(TABLE[self.row()].1)
    }
}

impl fmt::Display for IllnessGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Short code for an illness group (`sdz`, `sdh`, ..., `sdak`, ...).
/// Case-sensitive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ConventionId(&'static str);

impl ConventionId {
    pub fn parse(code: &str) -> Result<Self, DetectionError> {
        TABLE
            .iter()
            .find(|(_, c, _)| *c == code)
            .map(|(_, c, _)| ConventionId(c))
            .ok_or_else(|| DetectionError::UnknownCode(code.to_string()))
    }

    pub fn as_str(self) -> &'static str {
        self.0
    }

    pub fn group(self) -> IllnessGroup {
        TABLE
            .iter()
            .find(|(_, c, _)| *c == self.0)
            .map(|(g, _, _)| *g)
            .expect("ConventionId only holds table codes")
    }
}

impl TryFrom<String> for ConventionId {
    type Error = DetectionError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        ConventionId::parse(&value)
    }
}

impl From<ConventionId> for String {
    fn from(id: ConventionId) -> Self {
        id.0.to_string()
    }
}

impl fmt::Display for ConventionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.0)
    }
}

pub fn group_to_id(group: IllnessGroup) -> ConventionId {
    group.convention_id()
}

pub fn id_to_group(code: &str) -> Result<IllnessGroup, DetectionError> {
    ConventionId::parse(code).map(ConventionId::group)
}

/// ASCII bytes of the code, little-endian in the low bytes, zero-padded.
pub fn encode_id_word(code: ConventionId) -> u32 {
    let mut bytes = [0u8; 4];
    bytes[..code.0.len()].copy_from_slice(code.0.as_bytes());
    u32::from_le_bytes(bytes)
}

pub fn decode_id_word(word: u32) -> Result<ConventionId, DetectionError> {
    let bytes = word.to_le_bytes();
    let len = bytes.iter().position(|&b| b == 0).unwrap_or(4);
    if bytes[len..].iter().any(|&b| b != 0) {
        return Err(DetectionError::BadWord(word));
    }
    std::str::from_utf8(&bytes[..len])
        .ok()
        .and_then(|s| ConventionId::parse(s).ok())
        .ok_or(DetectionError::BadWord(word))
}

/// Probabilities over the ten illness groups, indexed in table order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionVectorOf<S> {
    probabilities: [S; 10],
}

impl<S: Float> DetectionVectorOf<S> {
    /// Sum tolerance: 1e-9, or a few ulps for scalars too coarse for that.
    pub fn tolerance() -> S {
        let fine = S::from(1e-9).unwrap_or_else(S::epsilon);
        fine.max(S::epsilon() * S::from(16.0).unwrap_or_else(S::one))
    }

    pub fn new(probabilities: [S; 10]) -> Result<Self, DetectionError> {
        let sum = probabilities.iter().fold(S::zero(), |a, &p| a + p);
        let ok = probabilities.iter().all(|p| p.is_finite() && *p >= S::zero())
            && (sum - S::one()).abs() <= Self::tolerance();
        if ok {
            Ok(DetectionVectorOf { probabilities })
        } else {
            Err(DetectionError::NotNormalized(sum.to_f64().unwrap_or(f64::NAN)))
        }
    }

    /// Normalizes non-negative weights. All-zero weights give the uniform
    /// vector.
    pub fn from_weights(weights: [S; 10]) -> Result<Self, DetectionError> {
        if weights.iter().any(|w| !w.is_finite() || *w < S::zero()) {
            return Err(DetectionError::NotNormalized(f64::NAN));
        }
        let total = weights.iter().fold(S::zero(), |a, &w| a + w);
        let ten = S::from(10.0).expect("10 is representable");
        let probabilities = if total > S::zero() {
            weights.map(|w| w / total)
        } else {
            [S::one() / ten; 10]
        };
        Ok(DetectionVectorOf { probabilities })
    }

    pub fn uniform() -> Self {
        Self::from_weights([S::one(); 10]).expect("uniform weights are valid")
    }

    pub fn get(&self, group: IllnessGroup) -> S {
        self.probabilities[group.row()]
    }

    pub fn iter(&self) -> impl Iterator<Item = (IllnessGroup, S)> + '_ {
        IllnessGroup::ALL.iter().map(move |&g| (g, self.probabilities[g.row()]))
    }

    pub fn sum(&self) -> S {
        self.probabilities.iter().fold(S::zero(), |a, &p| a + p)
    }

    /// The `k` most probable groups, non-increasing; ties keep table order.
    pub fn top_k(&self, k: usize) -> Result<Vec<(IllnessGroup, S)>, DetectionError> {
        if !(1..=10).contains(&k) {
            return Err(DetectionError::BadK(k));
        }
        let mut ranked: Vec<(IllnessGroup, S)> = self.iter().collect();
        // stable sort keeps table order among equal probabilities
        ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
        ranked.truncate(k);
        Ok(ranked)
    }

    pub fn argmax(&self) -> IllnessGroup {
        self.top_k(1).expect("k = 1 is valid")[0].0
    }
}

pub fn top_k<S: Float>(vector: &DetectionVectorOf<S>, k: usize) -> Result<Vec<(IllnessGroup, S)>, DetectionError> {
    vector.top_k(k)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionRule {
    pub group: IllnessGroup,
    pub field: VitalField,
    pub comparator: Comparator,
    pub bound: f64,
    pub boost: f64,
}

/// Rule table for [`mock_detect`]: every group starts at `base` weight and
/// each matching rule adds its boost to its group.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionRules {
    pub base: f64,
    pub rules: Vec<DetectionRule>,
}

const DEFAULT_RULES: &str = include_str!("../data/detection.rules");

impl DetectionRules {
    pub fn parse(text: &str) -> Result<Self, DetectionError> {
        let mut base = None;
        let mut rules = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let cols: Vec<&str> = content.split_whitespace().collect();
            let err = |msg: String| DetectionError::Rule { line, msg };
            match cols.as_slice() {
                ["base", w] => {
                    let w: f64 = w.parse().map_err(|_| err(format!("bad base weight '{w}'")))?;
                    if !(w.is_finite() && w >= 0.0) {
                        return Err(err("base weight must be finite and >= 0".into()));
                    }
                    base = Some(w);
                }
                [code, field, cmp, bound, boost] => {
                    let group = id_to_group(code).map_err(|e| err(e.to_string()))?;
                    let field =
                        VitalField::parse(field).ok_or_else(|| err(format!("unknown vitals field '{field}'")))?;
                    let comparator =
                        Comparator::parse(cmp).ok_or_else(|| err(format!("unknown comparator '{cmp}'")))?;
                    let bound: f64 = bound.parse().map_err(|_| err(format!("bad bound '{bound}'")))?;
                    let boost: f64 = boost.parse().map_err(|_| err(format!("bad boost '{boost}'")))?;
                    if !(boost.is_finite() && boost >= 0.0) {
                        return Err(err("boost must be finite and >= 0".into()));
                    }
                    rules.push(DetectionRule {
                        group,
                        field,
                        comparator,
                        bound,
                        boost,
                    });
                }
                _ => return Err(err(format!("expected 'code field cmp bound boost', got '{content}'"))),
            }
        }
        Ok(DetectionRules {
            base: base.unwrap_or(1.0),
            rules,
        })
    }
}

impl Default for DetectionRules {
    fn default() -> Self {
        DetectionRules::parse(DEFAULT_RULES).expect("bundled detection rules parse")
    }
}

/// Deterministic rule-table detector. Any function with this shape can
/// replace it.
pub fn mock_detect<S: Float>(vitals: &VitalsSample, rules: &DetectionRules) -> DetectionVectorOf<S> {
    let mut weights = [rules.base; 10];
    for rule in &rules.rules {
        if rule.comparator.holds(vitals.get(rule.field), rule.bound) {
            weights[rule.group.row()] += rule.boost;
        }
    }
    let weights = weights.map(|w| S::from(w).unwrap_or_else(S::zero));
    DetectionVectorOf::from_weights(weights).unwrap_or_else(|_| DetectionVectorOf::uniform())
}
