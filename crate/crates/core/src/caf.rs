//! Cross ambiguity function engines and time–Doppler records.
//!
//! The cross ambiguity function (CAF) of a surveillance capture against a
//! reference capture measures echo energy as a function of delay and
//! Doppler shift. Two engines compute it:
//!
//! * [`caf_direct`] — the exact definition, evaluated with an FFT per
//!   delay when the requested Doppler bins line up with DFT bins (they do
//!   for grids built by [`DopplerGrid::centered_band`]) and by direct
//!   summation otherwise.
//! * [`caf_batched`] — an approximation for narrow Doppler spans: the
//!   capture is cut into `J` segments, only the leading fraction of each
//!   segment is correlated, and a length-`J` DFT across the per-segment
//!   sums recovers Doppler. Sensing applications only care about a few
//!   tens of hertz, so `J` can be small and most of the arithmetic of the
//!   exact transform is skipped.
//!
//! [`doppler_record`] slides a window over a long capture and stacks the
//! zero-delay Doppler profiles into a spectrogram-like record; the
//! [`doppler_record_with`] variant lets a caller clean each window's
//! surface (see [`crate::cancel`]) before it is committed to the record.

use num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::frame::{DelayGrid, DopplerGrid, IqFrame};
use crate::{Scalar, SPEED_OF_LIGHT_M_S};

/// A sampled cross ambiguity surface over a delay × Doppler grid.
///
/// Values are complex; detection works on their magnitudes, cancellation
/// needs the phases. The value at `(delay lag τ, Doppler f)` is
///
/// ```text
/// Σ_{n=0}^{N-1-τ}  surv[n+τ] · conj(ref[n]) · exp(-j 2π f̂ n / N)
/// ```
///
/// with `f̂ = f · T` the (possibly fractional) DFT bin index for an
/// integration time of `T` seconds over `N` samples. Under this
/// convention an echo delayed by `k` samples and shifted by `+f_d` peaks
/// at lag `k` and bin `+f_d`: delays and Doppler both read in physical
/// direction.
#[derive(Debug, Clone, PartialEq)]
pub struct CafSurface<T: Scalar> {
    /// Row-major: one row of Doppler bins per delay lag.
    values: Vec<Complex<T>>,
    delay_grid: DelayGrid,
    doppler_grid: DopplerGrid,
    integration_time_s: f64,
    origin_time_s: f64,
}

impl<T: Scalar> CafSurface<T> {
    /// Assembles a surface from row-major values; lengths must agree with
    /// the grids.
    pub fn new(
        values: Vec<Complex<T>>,
        delay_grid: DelayGrid,
        doppler_grid: DopplerGrid,
        integration_time_s: f64,
        origin_time_s: f64,
    ) -> Result<Self> {
        if values.len() != delay_grid.len() * doppler_grid.len() {
            return Err(Error::argument(format!(
                "surface has {} values but grids demand {}x{}",
                values.len(),
                delay_grid.len(),
                doppler_grid.len()
            )));
        }
        if !(integration_time_s.is_finite() && integration_time_s > 0.0) {
            return Err(Error::argument("integration time must be positive"));
        }
        Ok(CafSurface {
            values,
            delay_grid,
            doppler_grid,
            integration_time_s,
            origin_time_s,
        })
    }

    pub fn delay_grid(&self) -> &DelayGrid {
        &self.delay_grid
    }

    pub fn doppler_grid(&self) -> &DopplerGrid {
        &self.doppler_grid
    }

    /// Coherent integration time the surface was computed over, seconds.
    pub fn integration_time_s(&self) -> f64 {
        self.integration_time_s
    }

    /// Absolute start time of the integrated window, seconds.
    pub fn origin_time_s(&self) -> f64 {
        self.origin_time_s
    }

    pub fn value(&self, delay_idx: usize, doppler_idx: usize) -> Complex<T> {
        assert!(delay_idx < self.delay_grid.len(), "delay index out of range");
        assert!(
            doppler_idx < self.doppler_grid.len(),
            "Doppler index out of range"
        );
        self.values[delay_idx * self.doppler_grid.len() + doppler_idx]
    }

    /// All Doppler bins at one delay lag.
    pub fn row(&self, delay_idx: usize) -> &[Complex<T>] {
        let w = self.doppler_grid.len();
        &self.values[delay_idx * w..(delay_idx + 1) * w]
    }

    pub(crate) fn row_mut(&mut self, delay_idx: usize) -> &mut [Complex<T>] {
        let w = self.doppler_grid.len();
        &mut self.values[delay_idx * w..(delay_idx + 1) * w]
    }

    /// Magnitudes of one delay row in dB (20·log10|v|, floored well below
    /// any physical value so empty bins never produce -inf).
    pub fn db_row(&self, delay_idx: usize) -> Vec<T> {
        self.row(delay_idx)
            .iter()
            .map(|v| {
                let m = v.norm().max(T::min_positive_value());
                T::of(20.0) * m.log10()
            })
            .collect()
    }

    /// Linear power (|v|²) of one delay row, the domain CFAR averages in.
    pub fn power_row(&self, delay_idx: usize) -> Vec<T> {
        self.row(delay_idx).iter().map(|v| v.norm_sqr()).collect()
    }

    /// Indices `(delay, Doppler)` of the strongest cell. Magnitude ties
    /// prefer the lowest |Doppler| (then the negative of the pair, then
    /// the earlier delay) so results are deterministic.
    pub fn peak(&self) -> (usize, usize) {
        let mut best = (0usize, 0usize);
        let mut best_key = (f64::NEG_INFINITY, f64::INFINITY, f64::INFINITY);
        for d in 0..self.delay_grid.len() {
            for (k, v) in self.row(d).iter().enumerate() {
                let mag = v.norm().as_f64();
                let f = self.doppler_grid.bins_hz()[k];
                let better = mag > best_key.0
                    || (mag == best_key.0
                        && (f.abs() < best_key.1 || (f.abs() == best_key.1 && f < best_key.2)));
                if better {
                    best_key = (mag, f.abs(), f);
                    best = (d, k);
                }
            }
        }
        best
    }

    /// Strongest delay cell along the zero-Doppler column: `(delay index,
    /// magnitude)`. Errors if the grid has no 0 Hz bin.
    pub fn zero_doppler_peak(&self) -> Result<(usize, T)> {
        let z = self
            .doppler_grid
            .zero_bin()
            .ok_or_else(|| Error::argument("surface has no 0 Hz Doppler bin"))?;
        let mut best = (0usize, T::zero());
        for d in 0..self.delay_grid.len() {
            let m = self.value(d, z).norm();
            if m > best.1 {
                best = (d, m);
            }
        }
        Ok(best)
    }

    /// Keeps only Doppler bins with |f| ≤ `half_span_hz`.
    pub fn restrict_doppler(&self, half_span_hz: f64) -> Result<CafSurface<T>> {
        let (keep, grid) = restrict_grid(&self.doppler_grid, half_span_hz)?;
        let mut values = Vec::with_capacity(self.delay_grid.len() * keep.len());
        for d in 0..self.delay_grid.len() {
            let row = self.row(d);
            values.extend(keep.iter().map(|&k| row[k]));
        }
        CafSurface::new(
            values,
            self.delay_grid.clone(),
            grid,
            self.integration_time_s,
            self.origin_time_s,
        )
    }
}

fn is_mirrored(bins: &[f64]) -> bool {
    let n = bins.len();
    if n.is_multiple_of(2) || bins[n / 2] != 0.0 {
        return false;
    }
    (0..n / 2).all(|k| (bins[k] + bins[n - 1 - k]).abs() <= 1e-9 * bins[n - 1 - k].abs().max(1.0))
}

/// Bin indices with |f| ≤ span, plus the grid they form.
fn restrict_grid(grid: &DopplerGrid, half_span_hz: f64) -> Result<(Vec<usize>, DopplerGrid)> {
    if !(half_span_hz.is_finite() && half_span_hz >= 0.0) {
        return Err(Error::argument(format!(
            "Doppler half-span must be non-negative, got {half_span_hz}"
        )));
    }
    let tol = 1e-9 * half_span_hz.max(1.0);
    let keep: Vec<usize> = grid
        .bins_hz()
        .iter()
        .enumerate()
        .filter(|(_, f)| f.abs() <= half_span_hz + tol)
        .map(|(i, _)| i)
        .collect();
    if keep.is_empty() {
        return Err(Error::argument(format!(
            "no Doppler bins within ±{half_span_hz} Hz"
        )));
    }
    let bins: Vec<f64> = keep.iter().map(|&i| grid.bins_hz()[i]).collect();
    let sym = is_mirrored(&bins);
    Ok((keep, DopplerGrid::new(bins, sym)?))
}

fn check_pair<T: Scalar>(reference: &IqFrame<T>, surveillance: &IqFrame<T>) -> Result<()> {
    if reference.len() != surveillance.len() {
        return Err(Error::argument(format!(
            "reference has {} samples but surveillance has {}",
            reference.len(),
            surveillance.len()
        )));
    }
    if reference.sample_rate_hz() != surveillance.sample_rate_hz() {
        return Err(Error::argument(format!(
            "sample rates differ: reference {} Hz, surveillance {} Hz",
            reference.sample_rate_hz(),
            surveillance.sample_rate_hz()
        )));
    }
    Ok(())
}

/// How close a requested bin must sit to an integer DFT bin index to be
/// served from the FFT instead of by direct summation.
const BIN_ALIGN_TOL: f64 = 1e-9;

/// Exact cross ambiguity function of `surveillance` against `reference`
/// over the given grids.
///
/// For each delay lag τ the lag product `surv[n+τ]·conj(ref[n])` is formed
/// once; Doppler bins that sit on integer DFT bins (`f·T` integral) are
/// read from one zero-padded FFT of that product, the rest are summed
/// directly. Both routes evaluate the same sum, so mixing them on one grid
/// is safe.
///
/// Constraints checked: equal lengths and rates, every lag < N, every bin
/// within ±Nyquist, and bin spacing at least `1/T` — finer bins would be
/// correlated copies of each other rather than independent measurements.
pub fn caf_direct<T: Scalar>(
    reference: &IqFrame<T>,
    surveillance: &IqFrame<T>,
    delays: &DelayGrid,
    dopplers: &DopplerGrid,
) -> Result<CafSurface<T>> {
    check_pair(reference, surveillance)?;
    let n = reference.len();
    let fs = reference.sample_rate_hz();
    let t_int = n as f64 / fs;
    if delays.max_lag() >= n {
        return Err(Error::bounds(format!(
            "delay lag {} reaches past the {} available samples",
            delays.max_lag(),
            n
        )));
    }
    let nyquist = fs / 2.0;
    for &f in dopplers.bins_hz() {
        if f.abs() > nyquist * (1.0 + 1e-12) {
            return Err(Error::argument(format!(
                "Doppler bin {f} Hz is beyond Nyquist ({nyquist} Hz)"
            )));
        }
    }
    let min_spacing = dopplers.min_spacing_hz();
    if min_spacing < (1.0 / t_int) * (1.0 - 1e-9) {
        return Err(Error::argument(format!(
            "Doppler bin spacing {min_spacing} Hz is finer than the {} s \
             integration resolves (1/T = {} Hz)",
            t_int,
            1.0 / t_int
        )));
    }

    // Classify each requested bin: Some(k) = integer DFT bin k, None = odd
    // frequency that needs direct summation.
    let aligned: Vec<Option<i64>> = dopplers
        .bins_hz()
        .iter()
        .map(|&f| {
            let f_hat = f * t_int;
            let k = f_hat.round();
            ((f_hat - k).abs() <= BIN_ALIGN_TOL * f_hat.abs().max(1.0)).then_some(k as i64)
        })
        .collect();

    let use_fft = aligned.iter().any(Option::is_some);
    let fft = use_fft.then(|| FftPlanner::<T>::new().plan_fft_forward(n));
    let mut scratch = fft
        .as_ref()
        .map(|f| vec![Complex::new(T::zero(), T::zero()); f.get_inplace_scratch_len()])
        .unwrap_or_default();

    let rs = reference.samples();
    let ss = surveillance.samples();
    let mut values = Vec::with_capacity(delays.len() * dopplers.len());
    let mut product = vec![Complex::new(T::zero(), T::zero()); n];
    let mut spectrum = vec![Complex::new(T::zero(), T::zero()); n];

    for &lag in delays.lags() {
        let m = n - lag;
        for i in 0..m {
            product[i] = ss[i + lag] * rs[i].conj();
        }
        for p in product[m..].iter_mut() {
            *p = Complex::new(T::zero(), T::zero());
        }
        if let Some(fft) = fft.as_ref() {
            spectrum.copy_from_slice(&product);
            fft.process_with_scratch(&mut spectrum, &mut scratch);
        }
        for (bin_idx, &f) in dopplers.bins_hz().iter().enumerate() {
            let v = match aligned[bin_idx] {
                Some(k) => {
                    let idx = k.rem_euclid(n as i64) as usize;
                    spectrum[idx]
                }
                None => fractional_bin_sum(&product[..m], f * t_int, n),
            };
            values.push(v);
        }
    }

    CafSurface::new(
        values,
        delays.clone(),
        dopplers.clone(),
        t_int,
        surveillance.start_time_s(),
    )
}

/// Σ p[n]·exp(-j2π f̂ n / N) for a fractional bin index f̂.
///
/// The rotating phasor is advanced by recurrence and re-anchored from
/// exact trigonometry every chunk, keeping phase error O(chunk·ε) instead
/// of O(N·ε) without paying for two transcendentals per sample.
fn fractional_bin_sum<T: Scalar>(product: &[Complex<T>], f_hat: f64, fft_len: usize) -> Complex<T> {
    const CHUNK: usize = 2048;
    let step_rad = -2.0 * std::f64::consts::PI * f_hat / fft_len as f64;
    let step = Complex::new(T::of(step_rad.cos()), T::of(step_rad.sin()));
    let mut sum = Complex::new(T::zero(), T::zero());
    for (c, chunk) in product.chunks(CHUNK).enumerate() {
        let anchor_rad = step_rad * (c * CHUNK) as f64;
        let mut phasor = Complex::new(T::of(anchor_rad.cos()), T::of(anchor_rad.sin()));
        for &p in chunk {
            sum += p * phasor;
            phasor *= step;
        }
    }
    sum
}

/// Number of segments the batched engine needs so its Doppler band covers
/// echoes up to `max_speed_mps`: twice the (rounded-up) largest two-way
/// Doppler-cycle count across the integration, the factor two covering
/// both motion directions. Never less than 2, since a single segment has
/// no Doppler axis at all.
pub fn num_batches(max_speed_mps: f64, carrier_hz: f64, sample_duration_s: f64) -> Result<usize> {
    if !(max_speed_mps.is_finite() && max_speed_mps > 0.0) {
        return Err(Error::argument(format!(
            "maximum speed must be positive, got {max_speed_mps}"
        )));
    }
    if !(carrier_hz.is_finite() && carrier_hz > 0.0) {
        return Err(Error::argument(format!(
            "carrier must be positive, got {carrier_hz}"
        )));
    }
    if !(sample_duration_s.is_finite() && sample_duration_s > 0.0) {
        return Err(Error::argument(format!(
            "sample duration must be positive, got {sample_duration_s}"
        )));
    }
    let cycles = max_speed_mps / SPEED_OF_LIGHT_M_S * carrier_hz * sample_duration_s;
    let j = 2.0 * cycles.ceil();
    Ok((j as usize).max(2))
}

/// Slow-time taper applied across segment sums in the batched engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SlowTimeWindow {
    /// No taper: best Doppler resolution, ~-13 dB sidelobes.
    #[default]
    Rect,
    /// Hann taper: wider main lobe, strongly suppressed sidelobes. Useful
    /// when a weak echo must be read next to a strong one.
    Hann,
}

impl SlowTimeWindow {
    fn weights<T: Scalar>(self, len: usize) -> Vec<T> {
        match self {
            SlowTimeWindow::Rect => vec![T::one(); len],
            SlowTimeWindow::Hann => (0..len)
                .map(|j| {
                    let x = 2.0 * std::f64::consts::PI * j as f64 / (len - 1).max(1) as f64;
                    T::of(0.5 * (1.0 - x.cos()))
                })
                .collect(),
        }
    }
}

/// Batched cross ambiguity: correlate only the leading `portion` of each of
/// `num_segments` segments, then DFT across segments for Doppler.
///
/// Equivalent to [`caf_direct`] with the Doppler phasor frozen per segment
/// and (for `portion < 1`) most of each segment skipped, which is what buys
/// the speedup. The returned Doppler grid holds all `num_segments` DFT
/// bins, spaced by the reciprocal of the *covered* slow time, spanning
/// roughly ±`num_segments`/2T.
pub fn caf_batched<T: Scalar>(
    reference: &IqFrame<T>,
    surveillance: &IqFrame<T>,
    num_segments: usize,
    portion: f64,
    delays: &DelayGrid,
) -> Result<CafSurface<T>> {
    caf_batched_with(
        reference,
        surveillance,
        num_segments,
        portion,
        delays,
        SlowTimeWindow::Rect,
    )
}

/// [`caf_batched`] with an explicit slow-time taper.
pub fn caf_batched_with<T: Scalar>(
    reference: &IqFrame<T>,
    surveillance: &IqFrame<T>,
    num_segments: usize,
    portion: f64,
    delays: &DelayGrid,
    window: SlowTimeWindow,
) -> Result<CafSurface<T>> {
    check_pair(reference, surveillance)?;
    let n = reference.len();
    let fs = reference.sample_rate_hz();
    if num_segments < 2 {
        return Err(Error::argument(format!(
            "batched engine needs at least 2 segments, got {num_segments}"
        )));
    }
    if num_segments > n {
        return Err(Error::argument(format!(
            "{num_segments} segments exceed the {n} available samples"
        )));
    }
    if !(portion.is_finite() && portion > 0.0 && portion <= 1.0) {
        return Err(Error::argument(format!(
            "portion must lie in (0, 1], got {portion}"
        )));
    }
    if delays.max_lag() >= n {
        return Err(Error::bounds(format!(
            "delay lag {} reaches past the {} available samples",
            delays.max_lag(),
            n
        )));
    }
    let seg_len = n / num_segments;
    let used = ((portion * n as f64) / num_segments as f64).floor() as usize;
    let used = used.min(seg_len);
    if used == 0 {
        return Err(Error::argument(format!(
            "portion {portion} keeps no samples of a {seg_len}-sample segment"
        )));
    }

    let rs = reference.samples();
    let ss = surveillance.samples();
    let weights: Vec<T> = window.weights(num_segments);
    let fft = FftPlanner::<T>::new().plan_fft_forward(num_segments);
    let mut scratch =
        vec![Complex::new(T::zero(), T::zero()); fft.get_inplace_scratch_len()];

    // Ascending-frequency (DC-centered) Doppler grid over the slow time
    // actually covered: J segments spaced seg_len samples apart.
    let slow_step_s = seg_len as f64 / fs;
    let grid = DopplerGrid::dft_band(num_segments, slow_step_s)?;
    let half = num_segments as i64 / 2;

    let mut values = Vec::with_capacity(delays.len() * num_segments);
    let mut sums = vec![Complex::new(T::zero(), T::zero()); num_segments];
    for &lag in delays.lags() {
        for (j, sum) in sums.iter_mut().enumerate() {
            let base = j * seg_len;
            let mut acc = Complex::new(T::zero(), T::zero());
            let stop = used.min(n.saturating_sub(base + lag));
            for i in 0..stop {
                acc += ss[base + i + lag] * rs[base + i].conj();
            }
            *sum = acc * weights[j];
        }
        fft.process_with_scratch(&mut sums, &mut scratch);
        // DFT output is in unsigned bin order; emit ascending frequency.
        for k_signed in -half..(num_segments as i64 - half) {
            let idx = k_signed.rem_euclid(num_segments as i64) as usize;
            values.push(sums[idx]);
        }
    }

    CafSurface::new(
        values,
        delays.clone(),
        grid,
        n as f64 / fs,
        surveillance.start_time_s(),
    )
}

/// Which CAF engine a processing chain uses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CafEngineKind {
    /// Exact transform.
    Direct,
    /// Segmented approximation sized for echoes up to `max_speed_mps`,
    /// correlating the leading `portion` of each segment.
    Batched { max_speed_mps: f64, portion: f64 },
}

/// Full description of the per-window Doppler computation.
#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub kind: CafEngineKind,
    /// Decimation applied to both channels before the transform; 1 = off.
    pub downsample: usize,
    /// Slow-time taper (batched engine only).
    pub slow_time_window: SlowTimeWindow,
    /// Doppler bins are kept out to ±this span.
    pub doppler_span_hz: f64,
}

impl Default for EngineConfig {
    /// Exact engine, no decimation, ±25 Hz — generous for human motion.
    fn default() -> Self {
        EngineConfig {
            kind: CafEngineKind::Direct,
            downsample: 1,
            slow_time_window: SlowTimeWindow::Rect,
            doppler_span_hz: 25.0,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.downsample == 0 {
            return Err(Error::config("down-sampling factor must be at least 1"));
        }
        if !(self.doppler_span_hz.is_finite() && self.doppler_span_hz > 0.0) {
            return Err(Error::config(format!(
                "Doppler span must be positive, got {} Hz",
                self.doppler_span_hz
            )));
        }
        if let CafEngineKind::Batched {
            max_speed_mps,
            portion,
        } = self.kind
        {
            if !(max_speed_mps.is_finite() && max_speed_mps > 0.0) {
                return Err(Error::config(format!(
                    "batched engine max speed must be positive, got {max_speed_mps}"
                )));
            }
            if !(portion.is_finite() && portion > 0.0 && portion <= 1.0) {
                return Err(Error::config(format!(
                    "batched engine portion must lie in (0, 1], got {portion}"
                )));
            }
        }
        Ok(())
    }
}

/// The Doppler grid a window of `window_len` samples at `sample_rate_hz`
/// will produce under `cfg` — without computing anything.
///
/// Lets callers size output headers (and fail fast on an infeasible span)
/// before any signal is processed. Guaranteed to match the grid of
/// [`window_profile`] on a window with the same parameters.
pub fn engine_grid(
    window_len: usize,
    sample_rate_hz: f64,
    carrier_hz: f64,
    cfg: &EngineConfig,
) -> Result<DopplerGrid> {
    cfg.validate()?;
    if window_len == 0 {
        return Err(Error::argument("window must contain samples"));
    }
    if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
        return Err(Error::argument("sample rate must be positive"));
    }
    let n = window_len.div_ceil(cfg.downsample);
    let fs = sample_rate_hz / cfg.downsample as f64;
    let t_int = n as f64 / fs;
    let grid = match cfg.kind {
        CafEngineKind::Direct => DopplerGrid::centered_band(cfg.doppler_span_hz, t_int)?,
        CafEngineKind::Batched { max_speed_mps, .. } => {
            let j = num_batches(max_speed_mps, carrier_hz, t_int)?;
            if j > n {
                return Err(Error::config(format!(
                    "batched engine needs {j} segments but the decimated window \
                     has only {n} samples"
                )));
            }
            let full = DopplerGrid::dft_band(j, (n / j) as f64 / fs)?;
            restrict_grid(&full, cfg.doppler_span_hz)?.1
        }
    };
    if grid.len() < 3 {
        return Err(Error::config(format!(
            "Doppler span ±{} Hz holds fewer than one bin either side of zero at \
             resolution {} Hz; lengthen the window or widen the span",
            cfg.doppler_span_hz,
            1.0 / t_int
        )));
    }
    Ok(grid)
}

/// Zero-delay ambiguity profile of one window pair under `cfg`.
///
/// Both channels are decimated by `cfg.downsample` first; the surface is
/// then computed by the configured engine and cut down to
/// ±`cfg.doppler_span_hz`.
pub fn window_profile<T: Scalar>(
    reference: &IqFrame<T>,
    surveillance: &IqFrame<T>,
    cfg: &EngineConfig,
) -> Result<CafSurface<T>> {
    cfg.validate()?;
    check_pair(reference, surveillance)?;
    let rd = reference.down_sample(cfg.downsample)?;
    let sd = surveillance.down_sample(cfg.downsample)?;
    profile_decimated(&rd, &sd, cfg)
}

/// [`window_profile`] on channels that are already decimated.
fn profile_decimated<T: Scalar>(
    rd: &IqFrame<T>,
    sd: &IqFrame<T>,
    cfg: &EngineConfig,
) -> Result<CafSurface<T>> {
    let delays = DelayGrid::zero_only();
    let surface = match cfg.kind {
        CafEngineKind::Direct => {
            let grid = DopplerGrid::centered_band(cfg.doppler_span_hz, rd.duration_s())?;
            caf_direct(rd, sd, &delays, &grid)?
        }
        CafEngineKind::Batched {
            max_speed_mps,
            portion,
        } => {
            let j = num_batches(max_speed_mps, rd.center_freq_hz(), rd.duration_s())?;
            if j > rd.len() {
                return Err(Error::config(format!(
                    "batched engine needs {j} segments but the decimated window \
                     has only {} samples",
                    rd.len()
                )));
            }
            let full = caf_batched_with(rd, sd, j, portion, &delays, cfg.slow_time_window)?;
            full.restrict_doppler(cfg.doppler_span_hz)?
        }
    };
    if surface.doppler_grid().len() < 3 {
        return Err(Error::config(format!(
            "Doppler span ±{} Hz holds fewer than one bin either side of zero at \
             resolution {} Hz; lengthen the window or widen the span",
            cfg.doppler_span_hz,
            1.0 / rd.duration_s()
        )));
    }
    Ok(surface)
}

/// One spectrogram row: the zero-delay Doppler profile of one window.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordRow<T: Scalar> {
    /// Start time of the window this row was computed from.
    pub time_s: f64,
    /// Magnitude per Doppler bin, dB.
    pub magnitudes_db: Vec<T>,
}

/// A time × Doppler record: window rows stacked over a common grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DopplerRecord<T: Scalar> {
    doppler_grid: DopplerGrid,
    rows: Vec<RecordRow<T>>,
    window_s: f64,
    hop_s: f64,
}

impl<T: Scalar> DopplerRecord<T> {
    /// An empty record over `doppler_grid`; rows are appended with
    /// [`DopplerRecord::push`].
    pub fn new(doppler_grid: DopplerGrid, window_s: f64, hop_s: f64) -> Result<Self> {
        if !(window_s.is_finite() && window_s > 0.0 && hop_s.is_finite() && hop_s > 0.0) {
            return Err(Error::argument(
                "record window and hop must be positive durations",
            ));
        }
        Ok(DopplerRecord {
            doppler_grid,
            rows: Vec::new(),
            window_s,
            hop_s,
        })
    }

    pub fn push(&mut self, row: RecordRow<T>) -> Result<()> {
        if row.magnitudes_db.len() != self.doppler_grid.len() {
            return Err(Error::argument(format!(
                "row has {} bins but the record grid has {}",
                row.magnitudes_db.len(),
                self.doppler_grid.len()
            )));
        }
        if let Some(last) = self.rows.last() {
            if row.time_s <= last.time_s {
                return Err(Error::argument("record rows must advance in time"));
            }
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn doppler_grid(&self) -> &DopplerGrid {
        &self.doppler_grid
    }

    pub fn rows(&self) -> &[RecordRow<T>] {
        &self.rows
    }

    pub fn window_s(&self) -> f64 {
        self.window_s
    }

    pub fn hop_s(&self) -> f64 {
        self.hop_s
    }

    /// Per-row `(time, Doppler of the strongest bin)`. Magnitude ties take
    /// the lowest |Doppler|, so an empty scene traces 0 Hz rather than
    /// jumping between equal noise bins.
    pub fn argmax_trace(&self) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .map(|row| {
                let bins = self.doppler_grid.bins_hz();
                let mut best = 0usize;
                for (k, m) in row.magnitudes_db.iter().enumerate() {
                    let better = *m > row.magnitudes_db[best]
                        || (*m == row.magnitudes_db[best]
                            && (bins[k].abs() < bins[best].abs()
                                || (bins[k].abs() == bins[best].abs() && bins[k] < bins[best])));
                    if better {
                        best = k;
                    }
                }
                (row.time_s, bins[best])
            })
            .collect()
    }
}

/// Slides a `window_s` window in `hop_s` steps over a synchronized capture
/// pair and stacks each window's Doppler profile into a record.
pub fn doppler_record<T: Scalar>(
    reference: &IqFrame<T>,
    surveillance: &IqFrame<T>,
    window_s: f64,
    hop_s: f64,
    cfg: &EngineConfig,
) -> Result<DopplerRecord<T>> {
    doppler_record_with(reference, surveillance, window_s, hop_s, cfg, |s, _| Ok(s))
}

/// [`doppler_record`] with a per-window hook applied to each surface before
/// its row is committed — the seam where interference cancellation plugs
/// in. The hook receives the window's surface and the decimated reference
/// window it was computed from.
pub fn doppler_record_with<T, F>(
    reference: &IqFrame<T>,
    surveillance: &IqFrame<T>,
    window_s: f64,
    hop_s: f64,
    cfg: &EngineConfig,
    mut hook: F,
) -> Result<DopplerRecord<T>>
where
    T: Scalar,
    F: FnMut(CafSurface<T>, &IqFrame<T>) -> Result<CafSurface<T>>,
{
    cfg.validate()?;
    check_pair(reference, surveillance)?;
    let fs = reference.sample_rate_hz();
    let win_n = (window_s * fs).round() as usize;
    let hop_n = (hop_s * fs).round() as usize;
    if win_n == 0 || hop_n == 0 {
        return Err(Error::config(format!(
            "window {window_s} s and hop {hop_s} s must each cover at least one sample"
        )));
    }
    if win_n > reference.len() {
        return Err(Error::config(format!(
            "window of {win_n} samples exceeds the {}-sample capture",
            reference.len()
        )));
    }

    let grid = engine_grid(win_n, fs, reference.center_freq_hz(), cfg)?;
    let mut record = DopplerRecord::new(grid, window_s, hop_s)?;
    let mut start = 0usize;
    while start + win_n <= reference.len() {
        let rw = reference.slice(start, win_n)?;
        let sw = surveillance.slice(start, win_n)?;
        let rd = rw.down_sample(cfg.downsample)?;
        let sd = sw.down_sample(cfg.downsample)?;
        let surface = profile_decimated(&rd, &sd, cfg)?;
        let surface = hook(surface, &rd)?;
        if surface.doppler_grid() != record.doppler_grid() {
            return Err(Error::runtime(
                "window hook changed the surface's Doppler grid",
            ));
        }
        record.push(RecordRow {
            time_s: rw.start_time_s(),
            magnitudes_db: surface.db_row(0),
        })?;
        start += hop_n;
    }
    Ok(record)
}
