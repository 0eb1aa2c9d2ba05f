//! Structured H∞ / H₂ controller synthesis.
//!
//! The crate evaluates closed-loop requirements (H∞ norm, H₂ norm, pole
//! regions) of a fixed-structure controller `K(x)` connected to one or
//! several plants, differentiates them with respect to the tunable vector
//! `x`, and minimizes the resulting non-smooth program with a
//! proximity-control bundle method. The [`delay`] module adds the
//! wave-equation boundary-control case study: a rational/delay
//! decomposition of the plant, controller recovery through pure delays,
//! and two independent time-domain simulators.
//!
//! All numerical code is generic over [`Real`]; the `*64` aliases at the
//! crate root fix the scalar to `f64`, which is what the tolerances in the
//! test-suite are calibrated for.

// `!(a > b)` guards are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bundle;
pub mod delay;
pub mod error;
pub mod io;
pub mod linalg;
pub mod norms;
pub mod oracle;
pub mod program;
pub mod qp;
pub mod sensitivity;
pub mod ss;
pub mod structure;

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

pub use error::{Error, Result};

/// Scalar type accepted by every algorithm in the crate.
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive {}

impl<T> Real for T where T: RealField + Copy + FromPrimitive + ToPrimitive {}

/// Converts an `f64` literal into the working scalar.
#[inline]
pub fn lit<T: Real>(v: f64) -> T {
    T::from_f64(v).expect("scalar conversion from f64")
}

/// Converts a working scalar back to `f64` (used for I/O and reporting).
#[inline]
pub fn to_f64<T: Real>(v: T) -> f64 {
    v.to_f64().expect("scalar conversion to f64")
}

pub type StateSpace64 = ss::StateSpace<f64>;
pub type PartitionedPlant64 = ss::PartitionedPlant<f64>;
pub type Spectrum64 = ss::Spectrum<f64>;
pub type HinfResult64 = norms::HinfResult<f64>;
pub type PoleGoal64 = norms::PoleGoal<f64>;
pub type StructureSpec64 = structure::StructureSpec<f64>;
pub type ParamVector64 = structure::ParamVector<f64>;
pub type Program64 = program::Program<f64>;
pub type SynthResult64 = program::SynthResult<f64>;
pub type DelayNetwork64 = delay::DelayNetwork<f64>;

pub type StateSpace32 = ss::StateSpace<f32>;
pub type Spectrum32 = ss::Spectrum<f32>;
pub type HinfResult32 = norms::HinfResult<f32>;
