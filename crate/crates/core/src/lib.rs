//! Spectral laboratory for the almost Mathieu operator
//! `(Hu)_n = u_{n+1} + u_{n-1} + 2λcos2π(θ+nα)u_n`.
//!
//! Modules follow the computation chain: [`frequency`] holds α exactly,
//! [`rational_spectrum`] computes bands for `α = p/q`, [`cocycle`] handles
//! transfer products, [`localization`] solves the dual model, and
//! [`reducibility`] builds conjugacies from dual eigenvectors.

pub mod cocycle;
pub mod error;
pub mod frequency;
pub mod linalg;
pub mod localization;
pub mod rational_spectrum;
pub mod reducibility;
pub mod verify;

pub use error::{GaplabError, Result};
pub use cocycle::{CocycleSpec, Mat2, ScaledProduct};
pub use frequency::{Frequency, IrrationalFrequency, Rational, ResonanceReport};
pub use rational_spectrum::{Band, GapReport, Spectrum};
pub use reducibility::trig::{Period, TrigMat, TrigSeries};
