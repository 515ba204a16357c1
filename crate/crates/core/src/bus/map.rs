use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::BusError;

/// Bytes in the region: one validity word plus 32 four-byte slots.
pub const REGION_SIZE: usize = 132;
pub const VALIDITY_OFFSET: usize = 0x00;
pub const MAX_SLOTS: usize = 32;

const DEFAULT_MAP: &str = include_str!("../../data/memory.map");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueKind {
    Int32,
    IdWord,
}

impl ValueKind {
    pub fn name(self) -> &'static str {
        match self {
            ValueKind::Int32 => "int32",
            ValueKind::IdWord => "idword",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotSpec {
    pub index: usize,
    pub name: String,
    pub value_kind: ValueKind,
}

impl SlotSpec {
    pub fn offset(&self) -> usize {
        slot_offset(self.index)
    }
}

pub const fn slot_offset(index: usize) -> usize {
    0x04 + 4 * index
}

/// Layout of the dynamic-variable region. Slots are kept sorted by index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MemoryMap {
    slots: Vec<SlotSpec>,
}

impl MemoryMap {
    pub fn new(mut slots: Vec<SlotSpec>) -> Result<Self, BusError> {
        let map_err = |msg: String| BusError::Map { line: 0, msg };
        if slots.len() > MAX_SLOTS {
            return Err(map_err(format!("{} slots, at most {MAX_SLOTS}", slots.len())));
        }
        let mut names = HashSet::new();
        let mut indices = HashSet::new();
        for s in &slots {
            if s.index >= MAX_SLOTS {
                return Err(map_err(format!("slot index {} out of range 0..32", s.index)));
            }
            if !indices.insert(s.index) {
                return Err(map_err(format!("slot index {} used twice", s.index)));
            }
            if !names.insert(s.name.as_str()) {
                return Err(map_err(format!("slot name '{}' used twice", s.name)));
            }
        }
        slots.sort_by_key(|s| s.index);
        match slots.first() {
            Some(s) if s.index == 0 && s.name == "spo2" && s.value_kind == ValueKind::Int32 => {}
            _ => return Err(map_err("slot 0 must be 'spo2' (int32)".into())),
        }
        Ok(MemoryMap { slots })
    }

    /// One slot per line: `index name kind`; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, BusError> {
        let mut slots = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let err = |msg: String| BusError::Map { line, msg };
            let cols: Vec<&str> = content.split_whitespace().collect();
            let [index, name, kind] = cols.as_slice() else {
                return Err(err(format!("expected 'index name kind', got '{content}'")));
            };
            let index: usize = index.parse().map_err(|_| err(format!("bad slot index '{index}'")))?;
            let value_kind = match *kind {
                "int32" => ValueKind::Int32,
                "idword" => ValueKind::IdWord,
                other => return Err(err(format!("unknown kind '{other}'"))),
            };
            slots.push(SlotSpec {
                index,
                name: name.to_string(),
                value_kind,
            });
        }
        MemoryMap::new(slots)
    }

    pub fn slots(&self) -> &[SlotSpec] {
        &self.slots
    }

    pub fn slot(&self, name: &str) -> Option<&SlotSpec> {
        self.slots.iter().find(|s| s.name == name)
    }
}

impl Default for MemoryMap {
    fn default() -> Self {
        MemoryMap::parse(DEFAULT_MAP).expect("bundled memory map parses")
    }
}

impl fmt::Display for MemoryMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.slots {
            writeln!(f, "{} {} {}", s.index, s.name, s.value_kind.name())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_layout() {
        let map = MemoryMap::default();
        let spo2 = map.slot("spo2").unwrap();
        assert_eq!((spo2.index, spo2.offset()), (0, 0x04));
        let expected = [
            ("pulse", 1),
            ("bp_sys", 2),
            ("bp_dia", 3),
            ("resp_rate", 4),
            ("age_years", 5),
            ("sex_code", 6),
            ("situation", 7),
            ("warning_code", 8),
        ];
        for (name, index) in expected {
            let s = map.slot(name).unwrap();
            assert_eq!(s.index, index, "{name}");
            assert_eq!(s.offset(), 0x04 + 4 * index);
        }
        assert_eq!(map.slot("situation").unwrap().value_kind, ValueKind::IdWord);
        assert_eq!(slot_offset(31) + 4, REGION_SIZE);
    }

    #[test]
    fn rejects_bad_maps() {
        assert!(MemoryMap::parse("1 pulse int32").is_err());
        assert!(MemoryMap::parse("0 spo2 int32\n0 pulse int32").is_err());
        assert!(MemoryMap::parse("0 spo2 int32\n1 spo2 int32").is_err());
        assert!(MemoryMap::parse("0 spo2 int32\n32 x int32").is_err());
        assert!(MemoryMap::parse("0 spo2 float").is_err());
        assert!(MemoryMap::parse("0 spo2").is_err());
        assert!(matches!(
            MemoryMap::parse("0 spo2 int32\nx y int32"),
            Err(BusError::Map { line: 2, .. })
        ));
    }

    #[test]
    fn display_reparses() {
        let map = MemoryMap::default();
        assert_eq!(MemoryMap::parse(&map.to_string()).unwrap(), map);
    }
}
