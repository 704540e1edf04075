//! Passive wireless sensing on commodity transmissions.
//!
//! This crate turns pairs of synchronized IQ captures — a *reference*
//! channel aimed at an ambient transmitter and a *surveillance* channel
//! aimed at the monitored scene — into Doppler measurements of moving
//! reflectors, without cooperating hardware. The processing chain:
//!
//! 1. [`synth`] generates transmit waveforms and simulates scenes (direct
//!    path, moving reflectors, noise) so every stage can be exercised and
//!    calibrated without a radio.
//! 2. [`caf`] computes the cross ambiguity function between the two
//!    channels, either exactly ([`caf::caf_direct`]) or with a batched
//!    approximation ([`caf::caf_batched`]) that trades unneeded Doppler
//!    span for an order-of-magnitude speedup, and slices long captures
//!    into a time–Doppler record.
//! 3. [`cancel`] suppresses the direct-signal ridge that otherwise masks
//!    weak echoes, both on the ambiguity surface (CLEAN-style subtraction)
//!    and in the time domain (an adaptive NLMS canceller).
//! 4. [`detect`] applies cell-averaging CFAR thresholding to Doppler
//!    profiles and reports detections at a fixed false-alarm rate.
//! 5. [`pipeline`] chains sampling, ambiguity processing, and
//!    cancellation/detection into concurrent stages with bounded queues,
//!    so sustained throughput is set by the slowest stage rather than the
//!    sum of all of them.
//!
//! All signal mathematics is generic over the sample scalar via
//! [`Scalar`]; `f32` is useful for storage-sized experiments while `f64`
//! is the default processing precision. Concrete aliases such as
//! [`IqFrame64`] are provided for the common cases.

pub mod caf;
pub mod cancel;
pub mod detect;
mod error;
pub mod frame;
pub mod pipeline;
pub mod synth;

pub use error::{Error, Result};
pub use num_complex::Complex;

use num_traits::{Float, FloatConst, NumAssign};

/// Floating-point sample type the signal chain is generic over.
///
/// Covers the float operations the algorithms need plus FFT support and
/// lossless-enough conversion to and from `f64`, in which all metadata
/// (rates, times, frequencies) is kept regardless of the sample type.
pub trait Scalar:
    Float + FloatConst + NumAssign + rustfft::FftNum + std::iter::Sum<Self>
{
    /// Converts an `f64` (typically metadata or a constant) into this type.
    fn of(value: f64) -> Self {
        num_traits::NumCast::from(value).expect("float-to-float cast cannot fail")
    }

    /// Widens this value to `f64` for metadata arithmetic and reporting.
    fn as_f64(self) -> f64 {
        num_traits::NumCast::from(self).expect("float-to-f64 cast cannot fail")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Propagation speed used for every Doppler/velocity conversion, in m/s.
pub const SPEED_OF_LIGHT_M_S: f64 = 299_792_458.0;

pub use caf::{CafSurface, DopplerRecord};
pub use frame::IqFrame;

/// Single-precision IQ frame, matching the on-disk capture format.
pub type IqFrame32 = frame::IqFrame<f32>;
/// Double-precision IQ frame, the default processing type.
pub type IqFrame64 = frame::IqFrame<f64>;
/// Single-precision ambiguity surface.
pub type CafSurface32 = caf::CafSurface<f32>;
/// Double-precision ambiguity surface.
pub type CafSurface64 = caf::CafSurface<f64>;
/// Single-precision time–Doppler record.
pub type DopplerRecord32 = caf::DopplerRecord<f32>;
/// Double-precision time–Doppler record.
pub type DopplerRecord64 = caf::DopplerRecord<f64>;
