//! Logical time. Scenario times, timers and frame ticks are all expressed as
//! a [`Duration`] since the start of a run.

use std::sync::Mutex;
use std::time::{Duration, Instant};

pub trait Clock: Send + Sync {
    /// Logical time elapsed since the clock started.
    fn now(&self) -> Duration;
    /// Blocks (or advances) until logical time `target` has been reached.
    fn sleep_until(&self, target: Duration);
}

/// Wall clock running `speed` times faster than real time.
#[derive(Debug)]
pub struct ScaledClock {
    origin: Instant,
    speed: f64,
}

impl ScaledClock {
    /// `speed` must be positive and finite.
    pub fn new(speed: f64) -> Self {
        assert!(speed.is_finite() && speed > 0.0, "clock speed must be > 0");
        ScaledClock {
            origin: Instant::now(),
            speed,
        }
    }

    pub fn speed(&self) -> f64 {
        self.speed
    }
}

impl Clock for ScaledClock {
    fn now(&self) -> Duration {
        self.origin.elapsed().mul_f64(self.speed)
    }

    fn sleep_until(&self, target: Duration) {
        let now = self.now();
        if target > now {
            std::thread::sleep((target - now).div_f64(self.speed));
        }
    }
}

/// Clock that only moves when told to; sleeping jumps straight to the target.
#[derive(Debug, Default)]
pub struct VirtualClock {
    now: Mutex<Duration>,
}

impl VirtualClock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&self, t: Duration) {
        let mut now = self.now.lock().unwrap_or_else(|e| e.into_inner());
        if t > *now {
            *now = t;
        }
    }
}

impl Clock for VirtualClock {
    fn now(&self) -> Duration {
        *self.now.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn sleep_until(&self, target: Duration) {
        self.set(target);
    }
}
