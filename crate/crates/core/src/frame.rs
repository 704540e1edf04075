//! Core sample-domain types: IQ frames and the delay/Doppler grids that
//! ambiguity surfaces are evaluated on.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::Scalar;

/// A contiguous block of complex baseband samples with capture metadata.
///
/// Sample data is generic over [`Scalar`]; the metadata (rates, times,
/// frequencies) always lives in `f64` so that switching the sample type
/// never changes window placement or grid frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct IqFrame<T: Scalar> {
    samples: Vec<Complex<T>>,
    sample_rate_hz: f64,
    center_freq_hz: f64,
    start_time_s: f64,
}

impl<T: Scalar> IqFrame<T> {
    /// Wraps samples and metadata into a frame, rejecting empty data and
    /// non-positive rates/frequencies up front so downstream stages can
    /// assume a sane frame.
    pub fn new(
        samples: Vec<Complex<T>>,
        sample_rate_hz: f64,
        center_freq_hz: f64,
        start_time_s: f64,
    ) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::argument("frame must contain at least one sample"));
        }
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::argument(format!(
                "sample rate must be finite and positive, got {sample_rate_hz}"
            )));
        }
        if !(center_freq_hz.is_finite() && center_freq_hz > 0.0) {
            return Err(Error::argument(format!(
                "center frequency must be finite and positive, got {center_freq_hz}"
            )));
        }
        if !(start_time_s.is_finite() && start_time_s >= 0.0) {
            return Err(Error::argument(format!(
                "start time must be finite and non-negative, got {start_time_s}"
            )));
        }
        Ok(IqFrame {
            samples,
            sample_rate_hz,
            center_freq_hz,
            start_time_s,
        })
    }

    pub fn samples(&self) -> &[Complex<T>] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    /// Always false — construction rejects empty frames — but provided so
    /// the type plays well with generic slice-like code.
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn center_freq_hz(&self) -> f64 {
        self.center_freq_hz
    }

    pub fn start_time_s(&self) -> f64 {
        self.start_time_s
    }

    /// Capture length in seconds.
    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }

    /// Absolute time of sample `index`.
    pub fn time_at(&self, index: usize) -> f64 {
        self.start_time_s + index as f64 / self.sample_rate_hz
    }

    /// Copies out `len` samples beginning at `start`, shifting the start
    /// time so every kept sample retains its absolute timestamp.
    pub fn slice(&self, start: usize, len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::argument("slice length must be at least one sample"));
        }
        let end = start
            .checked_add(len)
            .ok_or_else(|| Error::bounds("slice range overflows usize"))?;
        if end > self.samples.len() {
            return Err(Error::bounds(format!(
                "slice [{start}, {end}) exceeds frame length {}",
                self.samples.len()
            )));
        }
        Ok(IqFrame {
            samples: self.samples[start..end].to_vec(),
            sample_rate_hz: self.sample_rate_hz,
            center_freq_hz: self.center_freq_hz,
            start_time_s: self.time_at(start),
        })
    }

    /// Keeps every `factor`-th sample starting from the first, dividing the
    /// sample rate accordingly. No anti-alias filter is applied: callers
    /// decimate only when the surviving Doppler band is far below the new
    /// Nyquist rate, which is exactly the regime where decimation pays off.
    pub fn down_sample(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::argument("down-sampling factor must be at least 1"));
        }
        if factor == 1 {
            return Ok(self.clone());
        }
        let samples: Vec<Complex<T>> = self.samples.iter().step_by(factor).copied().collect();
        Ok(IqFrame {
            samples,
            sample_rate_hz: self.sample_rate_hz / factor as f64,
            center_freq_hz: self.center_freq_hz,
            start_time_s: self.start_time_s,
        })
    }
}

/// The Doppler frequencies (Hz) an ambiguity surface is evaluated at.
///
/// Bins are strictly increasing. A grid may additionally declare itself
/// `symmetric`, meaning every positive bin has a matching negative bin and
/// zero is present; symmetric grids are what spectrogram-style records
/// expect, since gesture Doppler swings through both signs.
#[derive(Debug, Clone, PartialEq)]
pub struct DopplerGrid {
    bins_hz: Vec<f64>,
    symmetric: bool,
}

impl DopplerGrid {
    /// Builds a grid from explicit bin frequencies.
    pub fn new(bins_hz: Vec<f64>, symmetric: bool) -> Result<Self> {
        if bins_hz.is_empty() {
            return Err(Error::argument("Doppler grid must contain at least one bin"));
        }
        if bins_hz.iter().any(|f| !f.is_finite()) {
            return Err(Error::argument("Doppler grid bins must be finite"));
        }
        if bins_hz.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::argument(
                "Doppler grid bins must be strictly increasing",
            ));
        }
        if symmetric {
            let n = bins_hz.len();
            if n.is_multiple_of(2) || bins_hz[n / 2] != 0.0 {
                return Err(Error::argument(
                    "symmetric Doppler grid needs an odd bin count centered on 0 Hz",
                ));
            }
            for k in 0..n / 2 {
                let (neg, pos) = (bins_hz[k], bins_hz[n - 1 - k]);
                if (neg + pos).abs() > 1e-9 * pos.abs().max(1.0) {
                    return Err(Error::argument(format!(
                        "symmetric Doppler grid has unpaired bins {neg} Hz and {pos} Hz"
                    )));
                }
            }
        }
        Ok(DopplerGrid { bins_hz, symmetric })
    }

    /// Symmetric grid of bins at integer multiples of `1/integration_time_s`
    /// out to `±half_span_hz`. This is the natural grid for a coherent
    /// integration of that length: finer spacing would be correlated, and
    /// the bins line up with DFT bins so FFT evaluation stays exact.
    pub fn centered_band(half_span_hz: f64, integration_time_s: f64) -> Result<Self> {
        if !(integration_time_s.is_finite() && integration_time_s > 0.0) {
            return Err(Error::argument(format!(
                "integration time must be positive, got {integration_time_s}"
            )));
        }
        if !(half_span_hz.is_finite() && half_span_hz >= 0.0) {
            return Err(Error::argument(format!(
                "Doppler half-span must be non-negative, got {half_span_hz}"
            )));
        }
        let resolution = 1.0 / integration_time_s;
        // Tiny relative slack so a span specified as an exact multiple of
        // the resolution keeps its edge bins despite rounding.
        let k_max = (half_span_hz / resolution * (1.0 + 1e-12)).floor() as i64;
        let bins = (-k_max..=k_max).map(|k| k as f64 * resolution).collect();
        DopplerGrid::new(bins, true)
    }

    /// All bins of a length-`num_bins` DFT over slow-time samples spaced
    /// `slow_time_step_s` apart, in ascending frequency order (DC in the
    /// middle). Even lengths carry one extra negative bin, so the grid is
    /// only marked symmetric for odd lengths.
    pub fn dft_band(num_bins: usize, slow_time_step_s: f64) -> Result<Self> {
        if num_bins == 0 {
            return Err(Error::argument("DFT Doppler grid needs at least one bin"));
        }
        if !(slow_time_step_s.is_finite() && slow_time_step_s > 0.0) {
            return Err(Error::argument(format!(
                "slow-time step must be positive, got {slow_time_step_s}"
            )));
        }
        let resolution = 1.0 / (num_bins as f64 * slow_time_step_s);
        let half = num_bins as i64 / 2;
        let lo = -half;
        let hi = num_bins as i64 - half; // exclusive
        let bins = (lo..hi).map(|k| k as f64 * resolution).collect();
        DopplerGrid::new(bins, num_bins % 2 == 1)
    }

    pub fn bins_hz(&self) -> &[f64] {
        &self.bins_hz
    }

    pub fn len(&self) -> usize {
        self.bins_hz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins_hz.is_empty()
    }

    pub fn symmetric(&self) -> bool {
        self.symmetric
    }

    /// Index of the exact 0 Hz bin, if the grid has one. Grid constructors
    /// place DC as exactly `0.0`, so equality is the right test.
    pub fn zero_bin(&self) -> Option<usize> {
        self.bins_hz.iter().position(|&f| f == 0.0)
    }

    /// Index of the bin closest to `freq_hz` (ties go to the lower bin).
    pub fn nearest_bin(&self, freq_hz: f64) -> usize {
        let mut best = 0;
        let mut best_dist = f64::INFINITY;
        for (i, &f) in self.bins_hz.iter().enumerate() {
            let d = (f - freq_hz).abs();
            if d < best_dist {
                best_dist = d;
                best = i;
            }
        }
        best
    }

    /// Smallest gap between adjacent bins; `INFINITY` for a single bin.
    pub fn min_spacing_hz(&self) -> f64 {
        self.bins_hz
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }
}

/// The delay lags (in whole samples) an ambiguity surface is evaluated at.
///
/// Lag 0 is always present and always first: the zero-delay row carries the
/// direct path, which interference cancellation needs as its anchor.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayGrid {
    lags: Vec<usize>,
}

impl DelayGrid {
    pub fn new(lags: Vec<usize>) -> Result<Self> {
        if lags.first() != Some(&0) {
            return Err(Error::argument("delay grid must start at lag 0"));
        }
        if lags.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::argument("delay lags must be strictly increasing"));
        }
        Ok(DelayGrid { lags })
    }

    /// The common case for Doppler-only sensing: evaluate at lag 0 only.
    pub fn zero_only() -> Self {
        DelayGrid { lags: vec![0] }
    }

    /// Lags `0..=max_lag`.
    pub fn up_to(max_lag: usize) -> Self {
        DelayGrid {
            lags: (0..=max_lag).collect(),
        }
    }

    pub fn lags(&self) -> &[usize] {
        &self.lags
    }

    pub fn len(&self) -> usize {
        self.lags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lags.is_empty()
    }

    pub fn max_lag(&self) -> usize {
        *self.lags.last().expect("delay grid is never empty")
    }

    /// Index of `lag` within the grid, if present.
    pub fn position(&self, lag: usize) -> Option<usize> {
        self.lags.binary_search(&lag).ok()
    }
}
