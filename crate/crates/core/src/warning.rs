use std::fmt;

use serde::{Deserialize, Serialize};

use crate::graph::NodeId;
use crate::vitals::VitalField;

/// Codes 1..=15 are warnings, 16..=31 notifications. Within a class a higher
/// code has higher priority.
pub const WARNING_CODES: std::ops::RangeInclusive<u8> = 1..=15;
pub const NOTIFICATION_CODES: std::ops::RangeInclusive<u8> = 16..=31;

/// Code raised when a time-critical treatment step runs over its timer.
pub const TIMER_OVERDUE_CODE: u8 = 14;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum WarningOrigin {
    Vitals { field: VitalField },
    Timer { node: NodeId, overdue_ms: u64 },
    Bus,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WarningEvent {
    pub code: u8,
    pub message: String,
    pub origin: WarningOrigin,
}

impl WarningEvent {
    pub fn is_notification(&self) -> bool {
        NOTIFICATION_CODES.contains(&self.code)
    }

    /// Sort key: any warning outranks any notification.
    pub fn priority(&self) -> (bool, u8) {
        (!self.is_notification(), self.code)
    }
}

impl fmt::Display for WarningEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{} {}", self.code, self.message)
    }
}
