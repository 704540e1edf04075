//! Synthetic transmitters and scenes.
//!
//! Everything downstream of capture — ambiguity processing, cancellation,
//! detection, the concurrent pipeline — can be driven end to end from this
//! module alone: [`gen_waveform`] fabricates the transmit signal and
//! [`apply_scene`] turns it into a reference/surveillance channel pair with
//! a direct path, moving reflectors, and receiver noise. All generation is
//! seeded, so a scene is a pure function of its parameters.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::frame::IqFrame;
use crate::{Scalar, SPEED_OF_LIGHT_M_S};

/// Carrier stamped on generated waveforms before a scene assigns its own.
pub const DEFAULT_CARRIER_HZ: f64 = 2.4e9;

/// Two-way Doppler shift of a reflector moving at `speed_mps` when
/// illuminated at `carrier_hz` (both receivers near the transmitter).
pub fn doppler_for_speed(speed_mps: f64, carrier_hz: f64) -> f64 {
    2.0 * speed_mps * carrier_hz / SPEED_OF_LIGHT_M_S
}

/// Inverse of [`doppler_for_speed`]: reflector speed producing `doppler_hz`.
pub fn speed_for_doppler(doppler_hz: f64, carrier_hz: f64) -> f64 {
    doppler_hz * SPEED_OF_LIGHT_M_S / (2.0 * carrier_hz)
}

/// Kind of transmitter being imitated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WaveformKind {
    /// Bursty wideband traffic: random QPSK chips gated into bursts with
    /// random idle gaps, the on/off texture of real packet traffic.
    WifiBursts,
    /// A continuous unmodulated carrier at baseband (constant samples).
    Cw,
}

/// Uniform law for the idle time between bursts, in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapLaw {
    pub min_s: f64,
    pub max_s: f64,
}

/// Parameters of a synthetic transmit waveform.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveformSpec {
    pub kind: WaveformKind,
    /// Chip rate of the burst modulation; ignored for [`WaveformKind::Cw`].
    pub bandwidth_hz: f64,
    /// Burst on-time; ignored for [`WaveformKind::Cw`].
    pub burst_len_s: f64,
    /// Idle-time law between bursts; ignored for [`WaveformKind::Cw`].
    pub gap_law: GapLaw,
    /// Transmit level in dB relative to a unit-amplitude sample
    /// (0 → amplitude 1.0). The `dbm` name follows capture-tool convention.
    pub power_dbm: f64,
}

impl WaveformSpec {
    /// Bursty 11 MHz-wide traffic: 2 ms bursts separated by 5-20 ms of
    /// silence, the cadence of a lightly loaded access point.
    pub fn wifi_bursts() -> Self {
        WaveformSpec {
            kind: WaveformKind::WifiBursts,
            bandwidth_hz: 11e6,
            burst_len_s: 2e-3,
            gap_law: GapLaw {
                min_s: 5e-3,
                max_s: 20e-3,
            },
            power_dbm: 0.0,
        }
    }

    /// Unmodulated continuous wave at unit amplitude.
    pub fn cw() -> Self {
        WaveformSpec {
            kind: WaveformKind::Cw,
            bandwidth_hz: 0.0,
            burst_len_s: 0.0,
            gap_law: GapLaw {
                min_s: 0.0,
                max_s: 0.0,
            },
            power_dbm: 0.0,
        }
    }

    fn validate(&self, sample_rate_hz: f64) -> Result<()> {
        if !self.power_dbm.is_finite() {
            return Err(Error::config("waveform power must be finite"));
        }
        if self.kind == WaveformKind::Cw {
            return Ok(());
        }
        if !(self.bandwidth_hz.is_finite() && self.bandwidth_hz > 0.0) {
            return Err(Error::config(format!(
                "burst waveform bandwidth must be positive, got {}",
                self.bandwidth_hz
            )));
        }
        if !(self.burst_len_s.is_finite() && self.burst_len_s >= 1.0 / sample_rate_hz) {
            return Err(Error::config(
                "burst length must cover at least one sample",
            ));
        }
        if !(self.gap_law.min_s.is_finite()
            && self.gap_law.max_s.is_finite()
            && self.gap_law.min_s >= 0.0
            && self.gap_law.max_s >= self.gap_law.min_s)
        {
            return Err(Error::config(format!(
                "gap law [{}, {}] s must satisfy 0 <= min <= max",
                self.gap_law.min_s, self.gap_law.max_s
            )));
        }
        Ok(())
    }
}

/// One sinusoidal displacement component: `amplitude_m * sin(2π rate_hz t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sinusoid {
    pub amplitude_m: f64,
    pub rate_hz: f64,
}

impl Sinusoid {
    fn displacement_m(&self, t_s: f64) -> f64 {
        self.amplitude_m * (2.0 * std::f64::consts::PI * self.rate_hz * t_s).sin()
    }

    fn validate(&self, what: &str) -> Result<()> {
        if !(self.amplitude_m.is_finite() && self.amplitude_m > 0.0) {
            return Err(Error::config(format!(
                "{what} amplitude must be positive, got {} m",
                self.amplitude_m
            )));
        }
        if !(self.rate_hz.is_finite() && self.rate_hz > 0.0) {
            return Err(Error::config(format!(
                "{what} rate must be positive, got {} Hz",
                self.rate_hz
            )));
        }
        Ok(())
    }
}

/// Time-varying path-length displacement of a reflector.
///
/// Displacement is what the scene turns into carrier phase, so each model
/// is a closed-form `d(t)` in meters; the instantaneous two-way Doppler it
/// produces is `(2/λ) · d'(t)`.
#[derive(Debug, Clone, PartialEq)]
pub enum MotionModel {
    /// Hand/arm gesture: one sinusoid, decimeter amplitude, sub-Hz rate.
    GestureSine(Sinusoid),
    /// Pathological tremor: a few-Hz primary oscillation, optionally with a
    /// slower superimposed wander (posture drift).
    Tremor {
        primary: Sinusoid,
        wander: Option<Sinusoid>,
    },
    /// Respiratory chest motion: centimeter amplitude, rates around 0.2 Hz.
    Breathing(Sinusoid),
    /// Uniform radial motion at `velocity_mps` (d = v·t), the calibration
    /// case whose Doppler is a single constant bin.
    Linear { velocity_mps: f64 },
    /// Sum of component motions.
    Composite(Vec<MotionModel>),
}

impl MotionModel {
    /// Path-length displacement at absolute time `t_s`, in meters.
    pub fn displacement_m(&self, t_s: f64) -> f64 {
        match self {
            MotionModel::GestureSine(s) | MotionModel::Breathing(s) => s.displacement_m(t_s),
            MotionModel::Tremor { primary, wander } => {
                primary.displacement_m(t_s)
                    + wander.as_ref().map_or(0.0, |w| w.displacement_m(t_s))
            }
            MotionModel::Linear { velocity_mps } => velocity_mps * t_s,
            MotionModel::Composite(parts) => {
                parts.iter().map(|m| m.displacement_m(t_s)).sum()
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            MotionModel::GestureSine(s) => s.validate("gesture"),
            MotionModel::Breathing(s) => s.validate("breathing"),
            MotionModel::Tremor { primary, wander } => {
                primary.validate("tremor")?;
                if let Some(w) = wander {
                    w.validate("tremor wander")?;
                }
                Ok(())
            }
            MotionModel::Linear { velocity_mps } => {
                if velocity_mps.is_finite() {
                    Ok(())
                } else {
                    Err(Error::config("linear motion velocity must be finite"))
                }
            }
            MotionModel::Composite(parts) => {
                if parts.is_empty() {
                    return Err(Error::config("composite motion must have components"));
                }
                parts.iter().try_for_each(MotionModel::validate)
            }
        }
    }
}

/// One moving scatterer in the scene.
#[derive(Debug, Clone, PartialEq)]
pub struct Reflector {
    /// Echo level in dB relative to the transmit waveform.
    pub gain_db: f64,
    pub motion: MotionModel,
}

/// A propagation scene: what the surveillance channel receives.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    /// RF carrier the scene is illuminated at; sets the Doppler scale.
    pub carrier_hz: f64,
    /// Direct transmitter→receiver leakage in dB relative to the waveform.
    /// Set very negative (e.g. -400) for a scene with no direct path.
    pub direct_path_gain_db: f64,
    pub reflectors: Vec<Reflector>,
    /// Complex noise power in dB relative to a unit-amplitude sample;
    /// `None` disables noise entirely (useful for exactness tests).
    pub noise_power_db: Option<f64>,
}

impl Scene {
    pub fn validate(&self) -> Result<()> {
        if !(self.carrier_hz.is_finite() && self.carrier_hz > 0.0) {
            return Err(Error::config(format!(
                "scene carrier must be positive, got {} Hz",
                self.carrier_hz
            )));
        }
        if !self.direct_path_gain_db.is_finite() {
            return Err(Error::config("direct path gain must be finite"));
        }
        for (i, r) in self.reflectors.iter().enumerate() {
            if !r.gain_db.is_finite() {
                return Err(Error::config(format!("reflector {i} gain must be finite")));
            }
            r.motion.validate()?;
        }
        if let Some(p) = self.noise_power_db {
            if !p.is_finite() {
                return Err(Error::config("noise power must be finite"));
            }
        }
        Ok(())
    }
}

fn db_to_amplitude(db: f64) -> f64 {
    10f64.powf(db / 20.0)
}

/// Generates `duration_s` of transmit waveform at `sample_rate_hz`.
///
/// Identical arguments produce bit-identical frames. The frame is stamped
/// with [`DEFAULT_CARRIER_HZ`]; [`apply_scene`] replaces that with the
/// scene's actual carrier.
pub fn gen_waveform<T: Scalar>(
    spec: &WaveformSpec,
    duration_s: f64,
    sample_rate_hz: f64,
    seed: u64,
) -> Result<IqFrame<T>> {
    if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
        return Err(Error::argument(format!(
            "sample rate must be positive, got {sample_rate_hz}"
        )));
    }
    if !(duration_s.is_finite() && duration_s > 0.0) {
        return Err(Error::argument(format!(
            "duration must be positive, got {duration_s}"
        )));
    }
    spec.validate(sample_rate_hz)?;
    let n = (duration_s * sample_rate_hz).round() as usize;
    if n == 0 {
        return Err(Error::argument(format!(
            "duration {duration_s} s yields no samples at {sample_rate_hz} Hz"
        )));
    }

    let amp = db_to_amplitude(spec.power_dbm);
    let samples = match spec.kind {
        WaveformKind::Cw => vec![Complex::new(T::of(amp), T::zero()); n],
        WaveformKind::WifiBursts => {
            // Two independent deterministic streams: one for chip symbols,
            // one for gap lengths, so chip k is the k-th chip draw no
            // matter how the gaps fall.
            let mut chip_rng = ChaCha8Rng::seed_from_u64(seed);
            let mut gap_rng = ChaCha8Rng::seed_from_u64(chip_rng.random());
            let chip_rate = spec.bandwidth_hz;

            // The conceptual chip stream runs for the whole capture; burst
            // gating only decides which stretches are transmitted. Chips
            // are drawn lazily up to the index each sample lands on, so
            // memory stays flat even when the chip rate dwarfs the sample
            // rate (a sub-Nyquist capture then sees one fresh chip per
            // sample, which is exactly what such a front end would see of
            // a noise-like signal).
            let mut next_chip = 0usize;
            let mut current = Complex::new(0.0f64, 0.0);
            let mut samples = vec![Complex::new(T::zero(), T::zero()); n];
            let mut burst_start_s = 0.0;
            while burst_start_s < duration_s {
                let burst_end_s = burst_start_s + spec.burst_len_s;
                let first = (burst_start_s * sample_rate_hz).ceil() as usize;
                let last = ((burst_end_s * sample_rate_hz).ceil() as usize).min(n);
                for (idx, sample) in samples[first..last].iter_mut().enumerate() {
                    let t = (first + idx) as f64 / sample_rate_hz;
                    let chip = (t * chip_rate) as usize;
                    while next_chip <= chip {
                        let quadrant: u8 = chip_rng.random_range(0..4);
                        let phase = std::f64::consts::FRAC_PI_4
                            + f64::from(quadrant) * std::f64::consts::FRAC_PI_2;
                        current = Complex::from_polar(amp, phase);
                        next_chip += 1;
                    }
                    *sample = Complex::new(T::of(current.re), T::of(current.im));
                }
                let gap = gap_rng.random_range(spec.gap_law.min_s..=spec.gap_law.max_s);
                burst_start_s = burst_end_s + gap;
            }
            samples
        }
    };

    IqFrame::new(samples, sample_rate_hz, DEFAULT_CARRIER_HZ, 0.0)
}

/// Propagates `tx` through `scene`, returning the (reference, surveillance)
/// channel pair.
///
/// The reference channel is the transmit waveform as-is — an ideal capture
/// of the direct signal. The surveillance channel is
///
/// ```text
/// surv[n] = g_direct·tx[n] + Σ_k g_k·tx[n]·exp(j·2π·2dₖ(tₙ)/λ) + noise[n]
/// ```
///
/// i.e. direct leakage plus one phase-modulated copy per reflector (the
/// factor 2 because motion changes the path out *and* back) plus seeded
/// complex white noise. Both outputs carry the scene carrier.
pub fn apply_scene<T: Scalar>(
    tx: &IqFrame<T>,
    scene: &Scene,
    seed: u64,
) -> Result<(IqFrame<T>, IqFrame<T>)> {
    scene.validate()?;
    let wavelength_m = SPEED_OF_LIGHT_M_S / scene.carrier_hz;
    let fs = tx.sample_rate_hz();
    let direct = db_to_amplitude(scene.direct_path_gain_db);
    let gains: Vec<f64> = scene
        .reflectors
        .iter()
        .map(|r| db_to_amplitude(r.gain_db))
        .collect();

    // Offset the seed so the noise stream is independent of the chip and
    // gap streams that [`gen_waveform`] derives from the same user seed.
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let noise_sigma = scene
        .noise_power_db
        .map(|p| (10f64.powf(p / 10.0) / 2.0).sqrt());

    let mut surv = Vec::with_capacity(tx.len());
    for (idx, &s) in tx.samples().iter().enumerate() {
        let t = tx.start_time_s() + idx as f64 / fs;
        let sample = Complex::new(s.re.as_f64(), s.im.as_f64());
        let mut acc = sample * direct;
        for (r, &g) in scene.reflectors.iter().zip(&gains) {
            let phase =
                2.0 * std::f64::consts::PI * 2.0 * r.motion.displacement_m(t) / wavelength_m;
            acc += sample * Complex::from_polar(g, phase);
        }
        if let Some(sigma) = noise_sigma {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            acc += Complex::new(re * sigma, im * sigma);
        }
        surv.push(Complex::new(T::of(acc.re), T::of(acc.im)));
    }

    let reference = IqFrame::new(
        tx.samples().to_vec(),
        fs,
        scene.carrier_hz,
        tx.start_time_s(),
    )?;
    let surveillance = IqFrame::new(surv, fs, scene.carrier_hz, tx.start_time_s())?;
    Ok((reference, surveillance))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn total_energy<T: Scalar>(frame: &IqFrame<T>) -> f64 {
        frame
            .samples()
            .iter()
            .map(|c| c.norm_sqr().as_f64())
            .sum()
    }

    #[test]
    fn cw_is_a_constant_unit_sample() {
        let frame: IqFrame<f64> =
            gen_waveform(&WaveformSpec::cw(), 0.01, 100e3, 7).unwrap();
        assert_eq!(frame.len(), 1000);
        assert!(frame
            .samples()
            .iter()
            .all(|&c| c == Complex::new(1.0, 0.0)));
    }

    #[test]
    fn waveform_power_sets_amplitude() {
        let mut spec = WaveformSpec::cw();
        spec.power_dbm = -6.020_599_913_279_624;
        let frame: IqFrame<f64> = gen_waveform(&spec, 1e-3, 100e3, 0).unwrap();
        assert_relative_eq!(frame.samples()[0].re, 0.5, max_relative = 1e-12);
    }

    #[test]
    fn bursts_start_hot_gaps_are_silent_and_duty_is_plausible() {
        let spec = WaveformSpec::wifi_bursts();
        let frame: IqFrame<f64> = gen_waveform(&spec, 2.0, 1e6, 42).unwrap();
        assert!(frame.samples()[0].norm() > 0.0, "first burst starts at t=0");
        let active = frame.samples().iter().filter(|c| c.norm() > 0.0).count();
        let duty = active as f64 / frame.len() as f64;
        // Burst 2 ms, gaps uniform in [5, 20] ms → duty between 2/22 and 2/7.
        assert!(duty > 0.07 && duty < 0.32, "duty {duty} outside law");
        // Active samples all share the transmit amplitude.
        for c in frame.samples() {
            let m = c.norm();
            assert!(m == 0.0 || (m - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn burst_samples_are_piecewise_constant_at_the_chip_rate() {
        let mut spec = WaveformSpec::wifi_bursts();
        spec.bandwidth_hz = 1e5; // 10 samples per chip at 1 MHz
        let frame: IqFrame<f64> = gen_waveform(&spec, 0.1, 1e6, 3).unwrap();
        let s = frame.samples();
        // Inside the first burst (2 ms = 2000 samples, bursts start at
        // t = 0) the value may only change at a chip boundary. Boundaries
        // land every 10 samples up to float rounding, so skip the pairs
        // straddling one and require equality everywhere else.
        let mut transitions = 0;
        for i in 0..1999 {
            let near_boundary = (i + 1) % 10 <= 1 || (i + 1) % 10 == 9;
            if s[i] != s[i + 1] {
                transitions += 1;
                assert!(near_boundary, "value changed mid-chip at sample {i}");
            }
        }
        // ~200 chips, adjacent symbols differ with probability 3/4.
        assert!(
            (100..200).contains(&transitions),
            "{transitions} transitions in the first burst"
        );
    }

    #[test]
    fn waveform_is_seed_deterministic() {
        let spec = WaveformSpec::wifi_bursts();
        let a: IqFrame<f64> = gen_waveform(&spec, 0.3, 1e6, 9).unwrap();
        let b: IqFrame<f64> = gen_waveform(&spec, 0.3, 1e6, 9).unwrap();
        let c: IqFrame<f64> = gen_waveform(&spec, 0.3, 1e6, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn waveform_validation_rejects_nonsense() {
        let mut spec = WaveformSpec::wifi_bursts();
        spec.bandwidth_hz = 0.0;
        assert!(gen_waveform::<f64>(&spec, 0.1, 1e6, 0).is_err());
        let spec = WaveformSpec::wifi_bursts();
        assert!(gen_waveform::<f64>(&spec, 0.0, 1e6, 0).is_err());
        assert!(gen_waveform::<f64>(&spec, 0.1, -1.0, 0).is_err());
        let mut bad_gap = WaveformSpec::wifi_bursts();
        bad_gap.gap_law = GapLaw {
            min_s: 0.02,
            max_s: 0.01,
        };
        assert!(gen_waveform::<f64>(&bad_gap, 0.1, 1e6, 0).is_err());
    }

    #[test]
    fn displacement_models_follow_their_closed_forms() {
        let gesture = MotionModel::GestureSine(Sinusoid {
            amplitude_m: 0.2,
            rate_hz: 0.25,
        });
        // Quarter period of a 0.25 Hz sinusoid is t = 1 s.
        assert_abs_diff_eq!(gesture.displacement_m(1.0), 0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(gesture.displacement_m(2.0), 0.0, epsilon = 1e-12);

        let linear = MotionModel::Linear { velocity_mps: 1.5 };
        assert_abs_diff_eq!(linear.displacement_m(2.0), 3.0);

        let tremor = MotionModel::Tremor {
            primary: Sinusoid {
                amplitude_m: 0.01,
                rate_hz: 5.0,
            },
            wander: Some(Sinusoid {
                amplitude_m: 0.1,
                rate_hz: 0.25,
            }),
        };
        assert_abs_diff_eq!(
            tremor.displacement_m(1.0),
            0.01 * (10.0 * std::f64::consts::PI).sin() + 0.1,
            epsilon = 1e-12
        );

        let combo = MotionModel::Composite(vec![gesture.clone(), linear.clone()]);
        assert_abs_diff_eq!(
            combo.displacement_m(1.0),
            gesture.displacement_m(1.0) + linear.displacement_m(1.0),
            epsilon = 1e-12
        );
    }

    #[test]
    fn motion_validation() {
        assert!(MotionModel::GestureSine(Sinusoid {
            amplitude_m: -0.1,
            rate_hz: 1.0
        })
        .validate()
        .is_err());
        assert!(MotionModel::Composite(vec![]).validate().is_err());
        assert!(MotionModel::Linear { velocity_mps: 0.0 }.validate().is_ok());
    }

    fn bare_scene(reflectors: Vec<Reflector>) -> Scene {
        Scene {
            carrier_hz: 2.4e9,
            direct_path_gain_db: -400.0,
            reflectors,
            noise_power_db: None,
        }
    }

    #[test]
    fn empty_noiseless_scene_with_unity_direct_path_is_identity() {
        let tx: IqFrame<f64> =
            gen_waveform(&WaveformSpec::wifi_bursts(), 0.05, 1e6, 5).unwrap();
        let mut scene = bare_scene(vec![]);
        scene.direct_path_gain_db = 0.0;
        let (reference, surv) = apply_scene(&tx, &scene, 0).unwrap();
        assert_eq!(reference.samples(), tx.samples());
        assert_eq!(surv.samples(), tx.samples());
        assert_eq!(surv.center_freq_hz(), 2.4e9);
    }

    #[test]
    fn linear_motion_advances_phase_at_the_doppler_rate() {
        let tx: IqFrame<f64> = gen_waveform(&WaveformSpec::cw(), 0.01, 100e3, 0).unwrap();
        let v = 1.2;
        let scene = bare_scene(vec![Reflector {
            gain_db: 0.0,
            motion: MotionModel::Linear { velocity_mps: v },
        }]);
        let (_, surv) = apply_scene(&tx, &scene, 0).unwrap();
        let expected_doppler = doppler_for_speed(v, scene.carrier_hz);
        let step = surv.samples()[1] * surv.samples()[0].conj();
        let measured = step.arg() / (2.0 * std::f64::consts::PI) * tx.sample_rate_hz();
        assert_relative_eq!(measured, expected_doppler, max_relative = 1e-6);
    }

    #[test]
    fn single_reflector_energy_follows_its_gain_exactly() {
        let tx: IqFrame<f64> =
            gen_waveform(&WaveformSpec::wifi_bursts(), 0.02, 1e6, 11).unwrap();
        let scene = bare_scene(vec![Reflector {
            gain_db: -13.0,
            motion: MotionModel::GestureSine(Sinusoid {
                amplitude_m: 0.3,
                rate_hz: 0.25,
            }),
        }]);
        let (_, surv) = apply_scene(&tx, &scene, 0).unwrap();
        // A lone phase-rotated copy preserves per-sample modulus, so the
        // energy ratio is exactly the power gain.
        let ratio_db = 10.0 * (total_energy(&surv) / total_energy(&tx)).log10();
        assert_abs_diff_eq!(ratio_db, -13.0, epsilon = 1e-9);
    }

    #[test]
    fn mixed_scene_energy_matches_stated_gains_on_average() {
        let tx: IqFrame<f64> =
            gen_waveform(&WaveformSpec::wifi_bursts(), 0.5, 1e6, 2).unwrap();
        // Fast enough that the direct/echo cross-term completes several
        // Doppler cycles inside every 2 ms burst and averages out, leaving
        // the incoherent power sum.
        let mut scene = bare_scene(vec![Reflector {
            gain_db: -10.0,
            motion: MotionModel::Linear {
                velocity_mps: 200.0,
            },
        }]);
        scene.direct_path_gain_db = -3.0;
        let (_, surv) = apply_scene(&tx, &scene, 0).unwrap();
        let expected = 10f64.powf(-0.3) + 10f64.powf(-1.0);
        let ratio_db = 10.0 * (total_energy(&surv) / total_energy(&tx)).log10();
        assert_abs_diff_eq!(ratio_db, 10.0 * expected.log10(), epsilon = 0.1);
    }

    #[test]
    fn noise_power_is_calibrated() {
        let tx: IqFrame<f64> = gen_waveform(&WaveformSpec::cw(), 0.1, 1e6, 0).unwrap();
        let mut scene = bare_scene(vec![]);
        scene.noise_power_db = Some(-20.0);
        let (_, surv) = apply_scene(&tx, &scene, 123).unwrap();
        // direct path is -400 dB ≈ absent, so surv is pure noise.
        let mean_power = total_energy(&surv) / surv.len() as f64;
        assert_relative_eq!(mean_power, 1e-2, max_relative = 0.05);
    }

    #[test]
    fn scene_is_seed_deterministic() {
        let tx: IqFrame<f64> =
            gen_waveform(&WaveformSpec::wifi_bursts(), 0.02, 1e6, 3).unwrap();
        let mut scene = bare_scene(vec![Reflector {
            gain_db: -20.0,
            motion: MotionModel::Breathing(Sinusoid {
                amplitude_m: 0.05,
                rate_hz: 0.23,
            }),
        }]);
        scene.noise_power_db = Some(-40.0);
        let (_, a) = apply_scene(&tx, &scene, 77).unwrap();
        let (_, b) = apply_scene(&tx, &scene, 77).unwrap();
        let (_, c) = apply_scene(&tx, &scene, 78).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
