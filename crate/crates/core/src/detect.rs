//! Cell-averaging CFAR detection on Doppler profiles.
//!
//! A fixed threshold cannot hold a fixed false-alarm rate when the noise
//! floor moves (different windows, different interference residue), so the
//! threshold for each cell is built from its own neighborhood: average the
//! nearest `num_train` cells — skipping `num_guard` cells around the cell
//! under test so a real echo cannot raise its own threshold — and scale by
//! a factor α chosen analytically from the desired false-alarm
//! probability. For exponentially distributed noise power (complex
//! Gaussian noise through a magnitude-squared detector) the resulting
//! false-alarm rate is exactly the requested one, independent of the noise
//! level itself.

use crate::error::{Error, Result};
use crate::frame::DopplerGrid;
use crate::Scalar;

/// Settings for [`ca_cfar`]. Counts are totals, split evenly across the
/// two sides of the cell under test.
#[derive(Debug, Clone, PartialEq)]
pub struct CfarConfig {
    /// Training cells averaged into the noise estimate (total, even).
    pub num_train: usize,
    /// Cells excluded around the cell under test (total, even; may be 0).
    pub num_guard: usize,
    /// Desired per-cell false-alarm probability, in (0, 1).
    pub pfa: f64,
}

impl Default for CfarConfig {
    fn default() -> Self {
        CfarConfig {
            num_train: 16,
            num_guard: 4,
            pfa: 1e-3,
        }
    }
}

impl CfarConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_train < 2 || !self.num_train.is_multiple_of(2) {
            return Err(Error::config(format!(
                "training cell count must be even and at least 2, got {}",
                self.num_train
            )));
        }
        if !self.num_guard.is_multiple_of(2) {
            return Err(Error::config(format!(
                "guard cell count must be even, got {}",
                self.num_guard
            )));
        }
        if !(self.pfa.is_finite() && self.pfa > 0.0 && self.pfa < 1.0) {
            return Err(Error::config(format!(
                "false-alarm probability must lie in (0, 1), got {}",
                self.pfa
            )));
        }
        Ok(())
    }
}

/// Threshold multiplier achieving `pfa` with `num_train` averaged cells of
/// exponential noise: `α = n·(pfa^(-1/n) - 1)`.
///
/// As `n → ∞` the estimate becomes exact and α approaches `-ln(pfa)`; small
/// n pay a premium for estimating the floor from few samples.
pub fn cfar_alpha(pfa: f64, num_train: usize) -> Result<f64> {
    if num_train == 0 {
        return Err(Error::argument("threshold needs at least one training cell"));
    }
    if !(pfa.is_finite() && pfa > 0.0 && pfa < 1.0) {
        return Err(Error::argument(format!(
            "false-alarm probability must lie in (0, 1), got {pfa}"
        )));
    }
    let n = num_train as f64;
    Ok(n * (pfa.powf(-1.0 / n) - 1.0))
}

/// One CFAR exceedance, reported in dB for human consumption.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    /// Time of the window the profile came from, seconds.
    pub time_s: f64,
    /// Doppler of the detected cell, Hz.
    pub doppler_hz: f64,
    /// Power of the detected cell, dB.
    pub power_db: f64,
    /// The threshold it exceeded, dB. Always ≤ `power_db`.
    pub threshold_db: f64,
}

/// Per-cell thresholds (`α · local mean`) over a linear power profile.
///
/// Cells near the profile edge lack neighbors on one side; the missing
/// training cells are taken from the other side instead (closest first),
/// so every threshold averages exactly `num_train` cells and the
/// false-alarm rate stays uniform across the profile.
pub fn cfar_thresholds<T: Scalar>(power: &[T], cfg: &CfarConfig) -> Result<Vec<T>> {
    cfg.validate()?;
    let n = power.len();
    if n < cfg.num_train + cfg.num_guard + 1 {
        return Err(Error::argument(format!(
            "profile of {n} cells cannot supply {} training and {} guard cells",
            cfg.num_train, cfg.num_guard
        )));
    }
    if power.iter().any(|p| !p.is_finite() || *p < T::zero()) {
        return Err(Error::argument(
            "power profile must be finite and non-negative",
        ));
    }
    let alpha = T::of(cfar_alpha(cfg.pfa, cfg.num_train)?);
    let guard = cfg.num_guard / 2;
    let half_train = cfg.num_train / 2;

    let mut thresholds = Vec::with_capacity(n);
    for i in 0..n {
        let left_avail = i.saturating_sub(guard);
        let right_avail = n.saturating_sub(i + guard + 1);
        let mut left = left_avail.min(half_train);
        let mut right = right_avail.min(half_train);
        // Near an edge, borrow the shortfall from the other side.
        let mut deficit = cfg.num_train - left - right;
        let extra_right = deficit.min(right_avail - right);
        right += extra_right;
        deficit -= extra_right;
        left += deficit.min(left_avail - left);

        let mut sum = T::zero();
        for k in 1..=left {
            sum += power[i - guard - k];
        }
        for k in 1..=right {
            sum += power[i + guard + k];
        }
        thresholds.push(alpha * sum / T::of(cfg.num_train as f64));
    }
    Ok(thresholds)
}

/// Per-cell exceedance flags: `power > threshold`. This is the raw CFAR
/// decision, before neighboring exceedances are merged into detections —
/// the right granularity for measuring false-alarm statistics.
pub fn cfar_mask<T: Scalar>(power: &[T], cfg: &CfarConfig) -> Result<Vec<bool>> {
    let thresholds = cfar_thresholds(power, cfg)?;
    Ok(power
        .iter()
        .zip(&thresholds)
        .map(|(p, t)| *p > *t)
        .collect())
}

/// Cell-averaging CFAR over one Doppler power profile.
///
/// Runs of adjacent exceedances — one echo spilling into neighboring bins —
/// are merged into a single [`Detection`] at the run's strongest cell
/// (ties toward the lowest |Doppler|). `power` must be linear
/// (magnitude-squared) values on `grid`'s bins.
pub fn ca_cfar<T: Scalar>(
    power: &[T],
    grid: &DopplerGrid,
    time_s: f64,
    cfg: &CfarConfig,
) -> Result<Vec<Detection>> {
    if power.len() != grid.len() {
        return Err(Error::argument(format!(
            "profile has {} cells but the grid has {} bins",
            power.len(),
            grid.len()
        )));
    }
    let thresholds = cfar_thresholds(power, cfg)?;
    let db = |p: T| 10.0 * p.max(T::min_positive_value()).as_f64().log10();

    let mut detections = Vec::new();
    let mut run: Option<usize> = None; // strongest cell of the active run
    for i in 0..=power.len() {
        let exceeds = i < power.len() && power[i] > thresholds[i];
        if exceeds {
            let best = run.get_or_insert(i);
            let f = grid.bins_hz()[i];
            let b = grid.bins_hz()[*best];
            if power[i] > power[*best]
                || (power[i] == power[*best] && f.abs() < b.abs())
            {
                *best = i;
            }
        } else if let Some(best) = run.take() {
            detections.push(Detection {
                time_s,
                doppler_hz: grid.bins_hz()[best],
                power_db: db(power[best]),
                threshold_db: db(thresholds[best]),
            });
        }
    }
    Ok(detections)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Exp1};

    fn uniform_grid(n: usize) -> DopplerGrid {
        let half = (n / 2) as i64;
        let bins = (0..n as i64).map(|k| (k - half) as f64).collect();
        DopplerGrid::new(bins, n % 2 == 1).unwrap()
    }

    #[test]
    fn alpha_matches_the_closed_form() {
        // 16 cells at Pfa 1e-3.
        assert_abs_diff_eq!(cfar_alpha(1e-3, 16).unwrap(), 8.6389, epsilon = 1e-3);
        // With many cells the noise estimate is exact and α → -ln(pfa).
        assert_abs_diff_eq!(
            cfar_alpha(1e-3, 100_000).unwrap(),
            -(1e-3f64).ln(),
            epsilon = 1e-3
        );
        // A tolerant detector needs almost no margin.
        assert!(cfar_alpha(0.999, 16).unwrap() < 0.01);
        assert!(cfar_alpha(0.0, 16).is_err());
        assert!(cfar_alpha(1.0, 16).is_err());
        assert!(cfar_alpha(1e-3, 0).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(CfarConfig::default().validate().is_ok());
        for bad in [
            CfarConfig {
                num_train: 7,
                ..CfarConfig::default()
            },
            CfarConfig {
                num_train: 0,
                ..CfarConfig::default()
            },
            CfarConfig {
                num_guard: 3,
                ..CfarConfig::default()
            },
            CfarConfig {
                pfa: 0.0,
                ..CfarConfig::default()
            },
            CfarConfig {
                pfa: 1.0,
                ..CfarConfig::default()
            },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn flat_profile_yields_no_detections() {
        let power = vec![3.7f64; 64];
        let dets = ca_cfar(&power, &uniform_grid(64), 0.0, &CfarConfig::default()).unwrap();
        assert!(dets.is_empty());
    }

    #[test]
    fn lone_spike_is_detected_exactly_once_with_its_threshold() {
        let mut power = vec![1.0f64; 64];
        power[20] = 100.0;
        let cfg = CfarConfig::default();
        let dets = ca_cfar(&power, &uniform_grid(64), 2.5, &cfg).unwrap();
        assert_eq!(dets.len(), 1);
        let d = &dets[0];
        assert_eq!(d.doppler_hz, uniform_grid(64).bins_hz()[20]);
        assert_eq!(d.time_s, 2.5);
        assert_relative_eq!(d.power_db, 20.0, max_relative = 1e-9);
        // Guard cells keep the spike out of its own estimate: the local
        // mean is exactly the 1.0 floor.
        let alpha = cfar_alpha(cfg.pfa, cfg.num_train).unwrap();
        assert_relative_eq!(d.threshold_db, 10.0 * alpha.log10(), max_relative = 1e-9);
        assert!(d.power_db >= d.threshold_db);
    }

    #[test]
    fn spike_at_the_profile_edge_is_still_detected() {
        let mut power = vec![1.0f64; 40];
        power[0] = 50.0;
        power[39] = 50.0;
        let dets = ca_cfar(&power, &uniform_grid(40), 0.0, &CfarConfig::default()).unwrap();
        assert_eq!(dets.len(), 2);
        assert_eq!(dets[0].doppler_hz, uniform_grid(40).bins_hz()[0]);
        assert_eq!(dets[1].doppler_hz, uniform_grid(40).bins_hz()[39]);
        // One-sided estimates still average the full training count, so
        // the thresholds match the interior ones.
        let alpha = cfar_alpha(1e-3, 16).unwrap();
        for d in &dets {
            assert_relative_eq!(d.threshold_db, 10.0 * alpha.log10(), max_relative = 1e-9);
        }
    }

    #[test]
    fn adjacent_exceedances_merge_at_the_strongest_cell() {
        let mut power = vec![1.0f64; 64];
        power[30] = 40.0;
        power[31] = 90.0;
        power[32] = 60.0;
        let dets = ca_cfar(&power, &uniform_grid(64), 0.0, &CfarConfig::default()).unwrap();
        assert_eq!(dets.len(), 1);
        assert_eq!(dets[0].doppler_hz, uniform_grid(64).bins_hz()[31]);
        // Separated spikes stay separate.
        let mut power = vec![1.0f64; 64];
        power[10] = 90.0;
        power[50] = 90.0;
        let dets = ca_cfar(&power, &uniform_grid(64), 0.0, &CfarConfig::default()).unwrap();
        assert_eq!(dets.len(), 2);
    }

    #[test]
    fn short_profiles_are_rejected() {
        let power = vec![1.0f64; 20];
        let err = cfar_thresholds(&power, &CfarConfig::default()).unwrap_err();
        assert!(err.to_string().contains("20"));
        // 21 cells is exactly enough for 16 train + 4 guard + 1.
        let power = vec![1.0f64; 21];
        assert!(cfar_thresholds(&power, &CfarConfig::default()).is_ok());
    }

    #[test]
    fn false_alarm_rate_tracks_pfa_on_exponential_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 100_000;
        let power: Vec<f64> = (0..n).map(|_| Exp1.sample(&mut rng)).collect();
        let cfg = CfarConfig::default();
        let mask = cfar_mask(&power, &cfg).unwrap();
        let alarms = mask.iter().filter(|&&m| m).count();
        // Expect ~100; allow ±5σ of binomial spread plus estimator
        // correlation slack.
        assert!(
            (40..=180).contains(&alarms),
            "{alarms} alarms on {n} cells at pfa 1e-3"
        );
    }

    proptest! {
        // The threshold is homogeneous of degree 1 in the profile, so
        // detection decisions are invariant to the absolute noise level.
        #[test]
        fn mask_is_scale_invariant(seed in 0u64..500, scale in 1e-6f64..1e6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let power: Vec<f64> = (0..64).map(|_| Exp1.sample(&mut rng)).collect();
            let scaled: Vec<f64> = power.iter().map(|p| p * scale).collect();
            let cfg = CfarConfig::default();
            prop_assert_eq!(cfar_mask(&power, &cfg).unwrap(), cfar_mask(&scaled, &cfg).unwrap());
        }

        // Raising pfa can only admit more cells, never fewer.
        #[test]
        fn higher_pfa_is_never_stricter(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let power: Vec<f64> = (0..64).map(|_| Exp1.sample(&mut rng)).collect();
            let strict = cfar_mask(&power, &CfarConfig { pfa: 1e-4, ..CfarConfig::default() }).unwrap();
            let loose = cfar_mask(&power, &CfarConfig { pfa: 1e-2, ..CfarConfig::default() }).unwrap();
            for (s, l) in strict.iter().zip(&loose) {
                prop_assert!(!s || *l, "cell detected at 1e-4 but not at 1e-2");
            }
        }
    }
}
