use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum FactError {
    #[error("age_years must be a non-negative number, got {0}")]
    BadAge(String),
    #[error("sex must be one of M, F, X, got {0}")]
    BadSex(String),
    #[error("fact key must not be empty")]
    EmptyKey,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FactValue {
    Number(f64),
    Text(String),
}

impl FactValue {
    /// Numbers stay numbers; anything else is kept as text.
    pub fn parse(raw: &str) -> FactValue {
        match raw.trim().parse::<f64>() {
            Ok(n) if n.is_finite() => FactValue::Number(n),
            _ => FactValue::Text(raw.trim().to_string()),
        }
    }
}

impl fmt::Display for FactValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FactValue::Number(n) => write!(f, "{n}"),
            FactValue::Text(s) => f.write_str(s),
        }
    }
}

impl From<f64> for FactValue {
    fn from(n: f64) -> Self {
        FactValue::Number(n)
    }
}

impl From<&str> for FactValue {
    fn from(s: &str) -> Self {
        FactValue::Text(s.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sex {
    M,
    F,
    X,
}

impl Sex {
    pub fn parse(s: &str) -> Option<Sex> {
        match s {
            "M" => Some(Sex::M),
            "F" => Some(Sex::F),
            "X" => Some(Sex::X),
            _ => None,
        }
    }

    /// Value carried in the `sex_code` bus slot.
    pub fn code(self) -> i32 {
        match self {
            Sex::M => 1,
            Sex::F => 2,
            Sex::X => 3,
        }
    }

    pub fn from_code(code: i32) -> Option<Sex> {
        match code {
            1 => Some(Sex::M),
            2 => Some(Sex::F),
            3 => Some(Sex::X),
            _ => None,
        }
    }

    pub fn letter(self) -> &'static str {
        match self {
            Sex::M => "M",
            Sex::F => "F",
            Sex::X => "X",
        }
    }
}

/// Open key/value namespace of patient facts. `age_years`, `sex` and `name`
/// are checked on insert.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<String, FactValue>", into = "BTreeMap<String, FactValue>")]
pub struct PatientFacts(BTreeMap<String, FactValue>);

impl PatientFacts {
    pub const AGE_YEARS: &'static str = "age_years";
    pub const SEX: &'static str = "sex";
    pub const NAME: &'static str = "name";

    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: &str, value: impl Into<FactValue>) -> Result<Self, FactError> {
        self.insert(key, value)?;
        Ok(self)
    }

    pub fn insert(&mut self, key: &str, value: impl Into<FactValue>) -> Result<(), FactError> {
        let value = value.into();
        check(key, &value)?;
        self.0.insert(key.to_string(), value);
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&FactValue> {
        self.0.get(key)
    }

    pub fn number(&self, key: &str) -> Option<f64> {
        match self.0.get(key) {
            Some(FactValue::Number(n)) => Some(*n),
            _ => None,
        }
    }

    pub fn text(&self, key: &str) -> Option<&str> {
        match self.0.get(key) {
            Some(FactValue::Text(s)) => Some(s),
            _ => None,
        }
    }

    pub fn age_years(&self) -> Option<f64> {
        self.number(Self::AGE_YEARS)
    }

    pub fn sex(&self) -> Option<Sex> {
        self.text(Self::SEX).and_then(Sex::parse)
    }

    pub fn name(&self) -> Option<&str> {
        self.text(Self::NAME)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &FactValue)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn check(key: &str, value: &FactValue) -> Result<(), FactError> {
    if key.is_empty() {
        return Err(FactError::EmptyKey);
    }
    match key {
        PatientFacts::AGE_YEARS => match value {
            FactValue::Number(n) if n.is_finite() && *n >= 0.0 => Ok(()),
            other => Err(FactError::BadAge(other.to_string())),
        },
        PatientFacts::SEX => match value {
            FactValue::Text(s) if Sex::parse(s).is_some() => Ok(()),
            other => Err(FactError::BadSex(other.to_string())),
        },
        _ => Ok(()),
    }
}

impl TryFrom<BTreeMap<String, FactValue>> for PatientFacts {
    type Error = FactError;
    fn try_from(map: BTreeMap<String, FactValue>) -> Result<Self, Self::Error> {
        for (k, v) in &map {
            check(k, v)?;
        }
        Ok(PatientFacts(map))
    }
}

impl From<PatientFacts> for BTreeMap<String, FactValue> {
    fn from(f: PatientFacts) -> Self {
        f.0
    }
}
