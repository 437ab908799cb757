//! Benchmark models: the quadcopter design problem and fleet scheduling.

pub mod fleet;
pub mod quadcopter;

pub use fleet::*;
pub use quadcopter::*;
