//! Emulated inter-processor shared memory.
//!
//! The region is 132 bytes: a 32-bit validity bitmask at `0x00` followed by
//! 32 four-byte slots, slot `i` at `0x04 + 4*i`. A producer publishes a
//! value by writing the slot and setting its validity bit; the consumer reads
//! the value and clears the bit.
//!
//! Each slot additionally carries a sequence counter (odd while a publish is
//! in flight). It never appears in the byte image; it lets the consumer
//! detect a concurrent overwrite so that a value is never torn and never
//! handed out twice. Per slot there is one producer and one consumer; every
//! operation finishes in a bounded number of steps.

mod map;

use std::fmt::{self, Write as _};
use std::sync::atomic::{fence, AtomicU32, Ordering};

use serde::{Deserialize, Serialize};

use crate::detection::{decode_id_word, encode_id_word, ConventionId};

pub use map::{slot_offset, MemoryMap, SlotSpec, ValueKind, MAX_SLOTS, REGION_SIZE, VALIDITY_OFFSET};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum BusError {
    #[error("unknown slot '{0}'")]
    UnknownSlot(String),
    #[error("slot '{slot}' holds {expected} values, got {got}")]
    KindMismatch {
        slot: String,
        expected: &'static str,
        got: &'static str,
    },
    #[error("memory map line {line}: {msg}")]
    Map { line: usize, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum SlotValue {
    Int32(i32),
    IdWord(u32),
}

impl SlotValue {
    pub fn kind(self) -> ValueKind {
        match self {
            SlotValue::Int32(_) => ValueKind::Int32,
            SlotValue::IdWord(_) => ValueKind::IdWord,
        }
    }

    pub fn id(code: ConventionId) -> Self {
        SlotValue::IdWord(encode_id_word(code))
    }

    fn word(self) -> u32 {
        match self {
            SlotValue::Int32(v) => v as u32,
            SlotValue::IdWord(w) => w,
        }
    }

    fn from_word(kind: ValueKind, word: u32) -> Self {
        match kind {
            ValueKind::Int32 => SlotValue::Int32(word as i32),
            ValueKind::IdWord => SlotValue::IdWord(word),
        }
    }

    pub fn as_int(self) -> Option<i32> {
        match self {
            SlotValue::Int32(v) => Some(v),
            SlotValue::IdWord(_) => None,
        }
    }

    pub fn as_convention_id(self) -> Option<ConventionId> {
        match self {
            SlotValue::IdWord(w) => decode_id_word(w).ok(),
            SlotValue::Int32(_) => None,
        }
    }
}

impl fmt::Display for SlotValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SlotValue::Int32(v) => write!(f, "{v}"),
            SlotValue::IdWord(w) => match decode_id_word(*w) {
                Ok(code) => write!(f, "{code}"),
                Err(_) => write!(f, "{w:#010x}"),
            },
        }
    }
}

// Attempts before a read gives up on a slot that keeps being rewritten.
const READ_ATTEMPTS: usize = 64;

pub struct BusRegion {
    map: MemoryMap,
    validity: AtomicU32,
    words: [AtomicU32; MAX_SLOTS],
    seq: [AtomicU32; MAX_SLOTS],
}

impl fmt::Debug for BusRegion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BusRegion")
            .field("validity", &format_args!("{:#010x}", self.validity_word()))
            .finish_non_exhaustive()
    }
}

impl BusRegion {
    pub fn new(map: MemoryMap) -> Self {
        BusRegion {
            map,
            validity: AtomicU32::new(0),
            words: std::array::from_fn(|_| AtomicU32::new(0)),
            seq: std::array::from_fn(|_| AtomicU32::new(0)),
        }
    }

    pub fn map(&self) -> &MemoryMap {
        &self.map
    }

    fn spec(&self, slot: &str) -> Result<&SlotSpec, BusError> {
        self.map
            .slot(slot)
            .ok_or_else(|| BusError::UnknownSlot(slot.to_string()))
    }

    /// Stores the value, then sets the slot's validity bit. Overwrites a
    /// still-valid value.
    pub fn publish(&self, slot: &str, value: SlotValue) -> Result<(), BusError> {
        let spec = self.spec(slot)?;
        if spec.value_kind != value.kind() {
            return Err(BusError::KindMismatch {
                slot: slot.to_string(),
                expected: spec.value_kind.name(),
                got: value.kind().name(),
            });
        }
        let i = spec.index;
        let s = self.seq[i].load(Ordering::Relaxed);
        self.seq[i].store(s.wrapping_add(1), Ordering::Relaxed);
        fence(Ordering::Release);
        self.words[i].store(value.word(), Ordering::Relaxed);
        self.validity.fetch_or(1 << i, Ordering::Release);
        self.seq[i].store(s.wrapping_add(2), Ordering::Release);
        Ok(())
    }

    /// Returns the value and clears the validity bit, or `None` if the bit
    /// is clear.
    pub fn consume(&self, slot: &str) -> Result<Option<SlotValue>, BusError> {
        let spec = self.spec(slot)?;
        Ok(self.read(spec, true))
    }

    /// Like [`consume`](Self::consume) but leaves the validity bit set.
    pub fn peek(&self, slot: &str) -> Result<Option<SlotValue>, BusError> {
        let spec = self.spec(slot)?;
        Ok(self.read(spec, false))
    }

    fn read(&self, spec: &SlotSpec, clear: bool) -> Option<SlotValue> {
        let i = spec.index;
        let bit = 1u32 << i;
        for _ in 0..READ_ATTEMPTS {
            if self.validity.load(Ordering::Acquire) & bit == 0 {
                return None;
            }
            let s1 = self.seq[i].load(Ordering::Acquire);
            if s1 & 1 == 1 {
                std::hint::spin_loop();
                continue;
            }
            let word = self.words[i].load(Ordering::Relaxed);
            fence(Ordering::Acquire);
            let s2 = self.seq[i].load(Ordering::Relaxed);
            if s1 != s2 {
                continue;
            }
            // The bit for this value was set before the counter went even,
            // so clearing it now retires exactly this publish; a later
            // publish makes the counter odd before re-setting the bit.
            if clear {
                self.validity.fetch_and(!bit, Ordering::AcqRel);
            }
            return Some(SlotValue::from_word(spec.value_kind, word));
        }
        None
    }

    /// Peek of every slot, one slot at a time, in index order.
    pub fn snapshot(&self) -> Snapshot {
        Snapshot(
            self.map
                .slots()
                .iter()
                .map(|s| (s.name.clone(), self.read(s, false)))
                .collect(),
        )
    }

    pub fn validity_word(&self) -> u32 {
        self.validity.load(Ordering::Acquire)
    }

    pub fn is_valid(&self, slot: &str) -> Result<bool, BusError> {
        let spec = self.spec(slot)?;
        Ok(self.validity_word() & (1 << spec.index) != 0)
    }

    /// Little-endian byte image of the region.
    pub fn bytes(&self) -> [u8; REGION_SIZE] {
        let mut out = [0u8; REGION_SIZE];
        out[VALIDITY_OFFSET..VALIDITY_OFFSET + 4].copy_from_slice(&self.validity_word().to_le_bytes());
        for (i, w) in self.words.iter().enumerate() {
            let off = slot_offset(i);
            out[off..off + 4].copy_from_slice(&w.load(Ordering::Acquire).to_le_bytes());
        }
        out
    }

    /// Hex dump of the region followed by the decoded mapped slots.
    pub fn dump(&self) -> String {
        let bytes = self.bytes();
        let validity = u32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]);
        let mut out = String::new();
        let _ = writeln!(out, "region {REGION_SIZE} bytes, validity @0x00 = {validity:#010x}");
        for (row, chunk) in bytes.chunks(16).enumerate() {
            let hex: Vec<String> = chunk.iter().map(|b| format!("{b:02x}")).collect();
            let _ = writeln!(out, "{:04x}: {}", row * 16, hex.join(" "));
        }
        let _ = writeln!(out, "idx name           off  kind   state value");
        for s in self.map.slots() {
            let off = s.offset();
            let word = u32::from_le_bytes([bytes[off], bytes[off + 1], bytes[off + 2], bytes[off + 3]]);
            let state = if validity & (1 << s.index) != 0 { "valid" } else { "-" };
            let _ = writeln!(
                out,
                "{:>3} {:<14} 0x{:02x} {:<6} {:<5} {}",
                s.index,
                s.name,
                off,
                s.value_kind.name(),
                state,
                SlotValue::from_word(s.value_kind, word)
            );
        }
        out
    }
}

/// Per-slot peek results in map order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Snapshot(pub Vec<(String, Option<SlotValue>)>);

impl Snapshot {
    pub fn get(&self, name: &str) -> Option<SlotValue> {
        self.0.iter().find(|(n, _)| n == name).and_then(|(_, v)| *v)
    }

    pub fn present(&self) -> impl Iterator<Item = (&str, SlotValue)> {
        self.0.iter().filter_map(|(n, v)| v.map(|v| (n.as_str(), v)))
    }
}
