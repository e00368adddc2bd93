//! Causal block diagram simulation with Dirac impulses as first-class values.

pub mod analysis;
pub mod blocks;
pub mod cli;
pub mod dsl;
pub mod graph;
pub mod io;
pub mod signal;

/// Models shipped with the crate.
pub mod models {
    /// Four definitions: `Ball`, `CollisionDetector`, `ImpulseCalculator` and
    /// the top level `Main` with outputs `y`, `v` and `force`.
    pub const BOUNCING_BALL: &str = include_str!("../models/bouncing_ball.cbd");
}
