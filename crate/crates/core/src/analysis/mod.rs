//! Reference computations: difference tables, magnitude bounds, trace
//! comparison and the closed-form bouncing ball.

mod ball;
mod compare;
mod table;

pub use ball::{analytic_bouncing_ball, contact_after, BallState};
pub use compare::{
    compare_traces, CompareError, CompareReport, DelayFinding, ImpulseMatch, SignalDeviation,
};
pub use table::{finite_difference_table, max_magnitude, DiffTable, Magnitude};
