//! Oscillatory time-varying feedback for driftless control-affine systems
//! `ẋ = Σ u_i f_i(x)` whose fields and first-order Lie brackets span the
//! state space.
//!
//! The pieces: vector fields and brackets ([`vecfield`]), Lyapunov functions
//! and the decay certificate ([`lyapunov`]), the oscillating feedback law
//! ([`controller`]), closed-loop integration ([`integrator`]) and the
//! ten-dimensional Brockett integrator ([`brockett`]).

// `!(a < b)` is used on purpose so that NaN fails the test.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod brockett;
pub mod cli;
pub mod controller;
pub mod error;
pub mod integrator;
pub mod linalg;
pub mod lyapunov;
pub mod sampling;
pub mod scalar;
pub mod stats;
pub mod vecfield;

pub use controller::{FeedbackLaw, OscillatorAssignment, Role};
pub use error::{Error, Result};
pub use integrator::{SolutionMode, Trajectory};
pub use lyapunov::LyapunovSpec;
pub use sampling::Region;
pub use vecfield::{IndexPair, SmoothFields, VectorFieldSystem};
