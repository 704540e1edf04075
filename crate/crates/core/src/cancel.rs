//! Direct-signal interference cancellation.
//!
//! The transmitter's own signal leaks into the surveillance channel orders
//! of magnitude stronger than any echo, parking a ridge at zero Doppler
//! whose sidelobes can bury the motion being sensed. Two complementary
//! tools attack it:
//!
//! * [`clean`] — works on an already-computed ambiguity surface. It
//!   repeatedly measures the strongest zero-Doppler cell and subtracts a
//!   scaled copy of the reference signal's own ambiguity response at that
//!   delay, which removes the ridge *and its sidelobes* rather than just
//!   notching one bin.
//! * [`NlmsFilter`] — works on the raw samples before any transform. An
//!   adaptive filter predicts the surveillance channel from the reference
//!   and outputs the prediction error; anything correlated with the
//!   reference inside the filter's adaptation bandwidth (the direct path
//!   and static clutter) is removed, while echoes whose Doppler lies above
//!   that bandwidth pass through. Its adaptation cutoff is roughly
//!   `step_mu · sample_rate / 2π` Hz, so the step size must be chosen
//!   against the decimated rate when sub-hertz motion must survive.

use num_complex::Complex;

use crate::caf::{caf_direct, window_profile, CafSurface, EngineConfig};
use crate::error::{Error, Result};
use crate::frame::{DelayGrid, DopplerGrid, IqFrame};
use crate::Scalar;

/// Settings for [`clean`].
#[derive(Debug, Clone, PartialEq)]
pub struct CleanConfig {
    /// Upper bound on subtraction passes.
    pub max_iterations: usize,
    /// Stop once the zero-Doppler peak has dropped this far below its
    /// starting level, in dB.
    pub stop_threshold_db: f64,
    /// Fraction of the measured peak subtracted per pass, in (0, 1].
    /// Values below 1 converge slower but tolerate template mismatch.
    pub loop_gain: f64,
}

impl Default for CleanConfig {
    fn default() -> Self {
        CleanConfig {
            max_iterations: 10,
            stop_threshold_db: 40.0,
            loop_gain: 1.0,
        }
    }
}

impl CleanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::config("clean needs at least one iteration"));
        }
        if !(self.stop_threshold_db.is_finite() && self.stop_threshold_db > 0.0) {
            return Err(Error::config(format!(
                "clean stop threshold must be positive, got {} dB",
                self.stop_threshold_db
            )));
        }
        if !(self.loop_gain.is_finite() && self.loop_gain > 0.0 && self.loop_gain <= 1.0) {
            return Err(Error::config(format!(
                "clean loop gain must lie in (0, 1], got {}",
                self.loop_gain
            )));
        }
        Ok(())
    }
}

/// What [`clean`] did: how many subtraction passes ran and the
/// zero-Doppler peak level before them and after each one.
#[derive(Debug, Clone, PartialEq)]
pub struct CleanReport {
    /// Number of subtraction passes actually applied.
    pub iterations_used: usize,
    /// `residual_peaks_db[0]` is the starting peak; entry `i+1` is the
    /// peak after pass `i`. Non-increasing by construction: a pass that
    /// would raise the peak is discarded and iteration stops.
    pub residual_peaks_db: Vec<f64>,
}

impl CleanReport {
    /// Total suppression achieved, in dB.
    pub fn suppression_db(&self) -> f64 {
        self.residual_peaks_db[0] - self.residual_peaks_db[self.residual_peaks_db.len() - 1]
    }
}

fn mag_db<T: Scalar>(m: T) -> f64 {
    20.0 * m.max(T::min_positive_value()).as_f64().log10()
}

/// Self-ambiguity of a signal: its CAF against itself. This is the
/// response a unit scatterer leaves on a surface, i.e. the subtraction
/// template [`clean`] needs.
pub fn self_ambiguity<T: Scalar>(
    signal: &IqFrame<T>,
    delays: &DelayGrid,
    dopplers: &DopplerGrid,
) -> Result<CafSurface<T>> {
    caf_direct(signal, signal, delays, dopplers)
}

/// Iteratively subtracts the reference signal's ambiguity response from
/// `surface` at the strongest zero-Doppler cell until the ridge is
/// suppressed by `cfg.stop_threshold_db`, the iteration budget runs out,
/// or a pass stops helping.
///
/// `template` must be the self-ambiguity of the reference channel over the
/// *same grids* as `surface` and computed by the same engine, so that the
/// subtracted shape matches the contamination, sidelobe for sidelobe. Each
/// pass scales the template by `loop_gain · peak / template_origin`, so
/// absolute calibration of the template is irrelevant.
///
/// A pass that would *raise* the zero-Doppler peak (template mismatch,
/// nothing left to subtract) is rolled back and ends the loop, which makes
/// the reported residual sequence non-increasing and the operation safe to
/// run on an already-clean surface.
pub fn clean<T: Scalar>(
    surface: &CafSurface<T>,
    template: &CafSurface<T>,
    cfg: &CleanConfig,
) -> Result<(CafSurface<T>, CleanReport)> {
    cfg.validate()?;
    if surface.delay_grid() != template.delay_grid()
        || surface.doppler_grid() != template.doppler_grid()
    {
        return Err(Error::argument(
            "surface and template must share delay and Doppler grids",
        ));
    }
    let zero_bin = surface
        .doppler_grid()
        .zero_bin()
        .ok_or_else(|| Error::argument("clean needs a 0 Hz Doppler bin to anchor on"))?;
    let origin = template.value(0, zero_bin);
    if origin.norm() == T::zero() {
        return Err(Error::argument(
            "template has no energy at its origin; it cannot be scaled",
        ));
    }

    let mut cleaned = surface.clone();
    let (_, start_peak) = cleaned.zero_doppler_peak()?;
    let start_db = mag_db(start_peak);
    let mut report = CleanReport {
        iterations_used: 0,
        residual_peaks_db: vec![start_db],
    };
    let mut current_peak = start_peak;

    let num_delays = surface.delay_grid().len();
    let lags = surface.delay_grid().lags().to_vec();
    for _ in 0..cfg.max_iterations {
        // Strongest zero-Doppler cell and its complex value.
        let mut peak_idx = 0usize;
        let mut peak_val = cleaned.value(0, zero_bin);
        for d in 1..num_delays {
            let v = cleaned.value(d, zero_bin);
            if v.norm() > peak_val.norm() {
                peak_idx = d;
                peak_val = v;
            }
        }
        let scale = peak_val * Complex::new(T::of(cfg.loop_gain), T::zero()) / origin;

        // Subtract the template re-centered on the peak's delay. Rows whose
        // source lag falls outside the template's (non-negative) support
        // are left untouched.
        let mut candidate = cleaned.clone();
        let peak_lag = lags[peak_idx];
        for (d, &lag) in lags.iter().enumerate() {
            if lag < peak_lag {
                continue;
            }
            if let Some(src) = surface.delay_grid().position(lag - peak_lag) {
                let template_row = template.row(src).to_vec();
                for (cell, t) in candidate.row_mut(d).iter_mut().zip(template_row) {
                    *cell -= scale * t;
                }
            }
        }

        let (_, new_peak) = candidate.zero_doppler_peak()?;
        if new_peak > current_peak {
            break; // subtraction made it worse; keep the previous state
        }
        let progressed = new_peak < current_peak;
        cleaned = candidate;
        current_peak = new_peak;
        report.iterations_used += 1;
        report.residual_peaks_db.push(mag_db(current_peak));
        if start_db - mag_db(current_peak) >= cfg.stop_threshold_db || !progressed {
            break;
        }
    }
    Ok((cleaned, report))
}

/// A per-window hook for [`crate::caf::doppler_record_with`] that cleans
/// every window's surface before its row enters the record.
///
/// The subtraction template is the reference window's self-ambiguity
/// computed with the *same engine settings* as the surface (decimation
/// excluded — the hook already receives the decimated reference), so
/// engine-specific scaling and sidelobe structure cancel correctly.
pub fn clean_record_hook<T: Scalar>(
    engine: &EngineConfig,
    cfg: CleanConfig,
) -> impl FnMut(CafSurface<T>, &IqFrame<T>) -> Result<CafSurface<T>> {
    let mut template_engine = engine.clone();
    template_engine.downsample = 1;
    move |surface, reference| {
        let template = window_profile(reference, reference, &template_engine)?;
        let (cleaned, _) = clean(&surface, &template, &cfg)?;
        Ok(cleaned)
    }
}

/// Settings for the normalized least-mean-squares canceller.
#[derive(Debug, Clone, PartialEq)]
pub struct NlmsConfig {
    /// Filter length: how many reference samples of channel memory the
    /// canceller can model.
    pub num_taps: usize,
    /// Normalized adaptation step, in (0, 2) for stability. Together with
    /// the sample rate this sets the adaptation cutoff
    /// `≈ step_mu·rate/2π` Hz below which signal content is cancelled.
    pub step_mu: f64,
    /// Added to the input power before dividing, so silence in the
    /// reference cannot blow up the update.
    pub regularizer_eps: f64,
}

impl Default for NlmsConfig {
    fn default() -> Self {
        NlmsConfig {
            num_taps: 32,
            step_mu: 0.5,
            regularizer_eps: 1e-9,
        }
    }
}

impl NlmsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_taps == 0 {
            return Err(Error::config("NLMS needs at least one tap"));
        }
        if !(self.step_mu.is_finite() && self.step_mu > 0.0 && self.step_mu < 2.0) {
            return Err(Error::config(format!(
                "NLMS step must lie in (0, 2), got {}",
                self.step_mu
            )));
        }
        if !(self.regularizer_eps.is_finite() && self.regularizer_eps > 0.0) {
            return Err(Error::config(format!(
                "NLMS regularizer must be positive, got {}",
                self.regularizer_eps
            )));
        }
        Ok(())
    }
}

/// Complex NLMS adaptive canceller with persistent state, so a stream can
/// be processed window by window without re-converging on every window.
#[derive(Debug, Clone)]
pub struct NlmsFilter<T: Scalar> {
    weights: Vec<Complex<T>>,
    history: Vec<Complex<T>>,
    head: usize,
    mu: T,
    eps: T,
}

impl<T: Scalar> NlmsFilter<T> {
    pub fn new(cfg: &NlmsConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(NlmsFilter {
            weights: vec![Complex::new(T::zero(), T::zero()); cfg.num_taps],
            history: vec![Complex::new(T::zero(), T::zero()); cfg.num_taps],
            head: 0,
            mu: T::of(cfg.step_mu),
            eps: T::of(cfg.regularizer_eps),
        })
    }

    pub fn weights(&self) -> &[Complex<T>] {
        &self.weights
    }

    /// Feeds one sample pair: `x` from the reference channel, `d` from the
    /// surveillance channel. Returns the cancellation residual
    /// `e = d - w·x⃗`, then adapts `w += μ·e·conj(x⃗)/(ε + ‖x⃗‖²)`.
    pub fn process(&mut self, x: Complex<T>, d: Complex<T>) -> Complex<T> {
        let taps = self.weights.len();
        self.head = (self.head + 1) % taps;
        self.history[self.head] = x;

        let mut y = Complex::new(T::zero(), T::zero());
        let mut power = T::zero();
        for i in 0..taps {
            let xi = self.history[(self.head + taps - i) % taps];
            y += self.weights[i] * xi;
            power += xi.norm_sqr();
        }
        let e = d - y;
        let gain = e * (self.mu / (self.eps + power));
        for i in 0..taps {
            let xi = self.history[(self.head + taps - i) % taps];
            self.weights[i] += gain * xi.conj();
        }
        e
    }

    /// Runs the canceller across a window pair, returning the residual as
    /// a frame with the surveillance channel's metadata. Filter state
    /// persists across calls.
    pub fn filter_frame(
        &mut self,
        reference: &IqFrame<T>,
        surveillance: &IqFrame<T>,
    ) -> Result<IqFrame<T>> {
        if reference.len() != surveillance.len() {
            return Err(Error::argument(format!(
                "reference has {} samples but surveillance has {}",
                reference.len(),
                surveillance.len()
            )));
        }
        if reference.sample_rate_hz() != surveillance.sample_rate_hz() {
            return Err(Error::argument("NLMS channels must share a sample rate"));
        }
        let residual: Vec<Complex<T>> = reference
            .samples()
            .iter()
            .zip(surveillance.samples())
            .map(|(&x, &d)| self.process(x, d))
            .collect();
        IqFrame::new(
            residual,
            surveillance.sample_rate_hz(),
            surveillance.center_freq_hz(),
            surveillance.start_time_s(),
        )
    }
}

/// One-shot NLMS over a full capture pair: runs a fresh [`NlmsFilter`] and
/// returns the residual frame together with the final weights.
pub fn nlms_filter<T: Scalar>(
    reference: &IqFrame<T>,
    surveillance: &IqFrame<T>,
    cfg: &NlmsConfig,
) -> Result<(IqFrame<T>, Vec<Complex<T>>)> {
    let mut filter = NlmsFilter::new(cfg)?;
    let residual = filter.filter_frame(reference, surveillance)?;
    Ok((residual, filter.weights))
}
