use thiserror::Error;

use crate::vecfield::IndexPair;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid system: {0}")]
    InvalidSystem(String),

    #[error("invalid Lyapunov candidate: {0}")]
    InvalidLyapunov(String),

    #[error("field index {index} out of range (system has {inputs} inputs)")]
    IndexOutOfRange { index: usize, inputs: usize },

    #[error("non-finite {what} at x = {at:?}")]
    NonFinite { what: &'static str, at: Vec<f64> },

    #[error("frequency multipliers must be distinct positive integers: {0}")]
    Resonance(String),

    #[error("bracket matrix is singular or ill-conditioned (condition estimate {condition:e})")]
    IllConditioned { condition: f64 },

    #[error("synthesis residual {residual:e} exceeds bound {bound:e}")]
    SynthesisResidual { residual: f64, bound: f64 },

    #[error("evaluation failed for pair {pair}: {detail}")]
    PairEvaluation { pair: IndexPair, detail: String },

    #[error("no admissible samples: {0}")]
    NoAdmissibleSamples(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
