//! Simulation core for a field-medic treatment assistant: treatment graphs
//! and navigation sessions, the shared vitals bus, the vitals feed, text
//! fitting and rendering, and the touch display controller.

pub mod bus;
pub mod clock;
pub mod detection;
pub mod display;
pub mod engine;
pub mod graph;
pub mod text;
pub mod vitals;
pub mod warning;

/// Detection weights in double precision, the default everywhere.
pub type DetectionVector = detection::DetectionVectorOf<f64>;
/// Single-precision weights, for memory-tight consumers.
pub type DetectionVectorF32 = detection::DetectionVectorOf<f32>;
