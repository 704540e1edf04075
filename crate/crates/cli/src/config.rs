//! Scenario descriptions in a small INI dialect.
//!
//! A scenario file tells `pws synth` what to simulate: how long to
//! capture, what the transmitter sends, and what moves in the scene. The
//! format is deliberately strict — unknown sections or keys are errors,
//! not silently ignored knobs — and every complaint carries the line it
//! came from, because a typo that silently disables a reflector costs an
//! afternoon.
//!
//! ```ini
//! # Anything after '#' is a comment.
//! [capture]
//! duration_s = 8.0
//! sample_rate_hz = 200e3
//!
//! [waveform]
//! kind = wifi_bursts          # or: cw
//! power_dbm = 0               # burst/gap keys may override the defaults
//!
//! [scene]
//! carrier_hz = 2.4e9
//! direct_path_gain_db = -400  # effectively no direct leakage
//! noise_power_db = -30        # omit for a noiseless scene
//!
//! [reflector]                 # one section per reflector
//! gain_db = -10
//! motion = gesture            # gesture | tremor | breathing | linear
//! amplitude_m = 0.4
//! rate_hz = 0.25
//! ```

use std::fmt;

use anyhow::{anyhow, Context, Result};
use pws_core::synth::{
    MotionModel, Reflector, Scene, Sinusoid, WaveformKind, WaveformSpec, DEFAULT_CARRIER_HZ,
};

/// A user-input problem (bad file, bad flag combination). The CLI maps
/// these to exit code 1, as opposed to runtime failures which exit 2.
#[derive(Debug)]
pub struct Invalid(pub String);

impl fmt::Display for Invalid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for Invalid {}

/// Shorthand for `Err(Invalid(...))` as an `anyhow` error.
macro_rules! invalid {
    ($($arg:tt)*) => {
        return Err(anyhow::Error::new(Invalid(format!($($arg)*))))
    };
}

/// Everything `pws synth` needs: capture geometry, transmit waveform, and
/// the scene the waveform propagates through.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub duration_s: f64,
    pub sample_rate_hz: f64,
    pub waveform: WaveformSpec,
    pub scene: Scene,
}

/// One `key = value` entry, with the line it was read from.
struct Entry {
    key: String,
    value: String,
    line: usize,
    used: bool,
}

/// One `[name]` section and its entries.
struct Section {
    name: String,
    line: usize,
    entries: Vec<Entry>,
}

impl Section {
    /// Consumes `key`, if present.
    fn take(&mut self, key: &str) -> Option<(String, usize)> {
        self.entries.iter_mut().find(|e| e.key == key).map(|e| {
            e.used = true;
            (e.value.clone(), e.line)
        })
    }

    fn take_f64(&mut self, key: &str) -> Result<Option<(f64, usize)>> {
        match self.take(key) {
            None => Ok(None),
            Some((raw, line)) => match raw.parse::<f64>() {
                Ok(v) => Ok(Some((v, line))),
                Err(_) => invalid!("line {line}: value '{raw}' for {key} is not a number"),
            },
        }
    }

    fn require_f64(&mut self, key: &str) -> Result<f64> {
        match self.take_f64(key)? {
            Some((v, _)) => Ok(v),
            None => invalid!(
                "missing key '{key}' in [{}] section starting at line {}",
                self.name,
                self.line
            ),
        }
    }

    /// Errors on the first entry nothing consumed — a typo or a key that
    /// does not apply (e.g. `velocity_mps` under `motion = gesture`).
    fn finish(&self) -> Result<()> {
        if let Some(e) = self.entries.iter().find(|e| !e.used) {
            invalid!(
                "line {}: unknown key '{}' in [{}]",
                e.line,
                e.key,
                self.name
            );
        }
        Ok(())
    }
}

/// Splits `text` into sections, enforcing only syntax; meaning is applied
/// by [`parse_scenario`].
fn lex(text: &str) -> Result<Vec<Section>> {
    let mut sections: Vec<Section> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[') {
            let Some(name) = name.strip_suffix(']') else {
                invalid!("line {line}: section header '{content}' is missing ']'");
            };
            sections.push(Section {
                name: name.trim().to_string(),
                line,
                entries: Vec::new(),
            });
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            invalid!("line {line}: expected 'key = value' or '[section]', got '{content}'");
        };
        let Some(section) = sections.last_mut() else {
            invalid!("line {line}: '{content}' appears before any [section] header");
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if value.is_empty() {
            invalid!("line {line}: key '{key}' has no value");
        }
        if let Some(dup) = section.entries.iter().find(|e| e.key == key) {
            invalid!(
                "line {line}: key '{key}' already set on line {} of [{}]",
                dup.line,
                section.name
            );
        }
        section.entries.push(Entry {
            key,
            value,
            line,
            used: false,
        });
    }
    Ok(sections)
}

fn parse_waveform(section: &mut Section) -> Result<WaveformSpec> {
    let Some((kind, line)) = section.take("kind") else {
        invalid!(
            "missing key 'kind' in [waveform] section starting at line {}",
            section.line
        );
    };
    let mut spec = match kind.as_str() {
        "wifi_bursts" => WaveformSpec::wifi_bursts(),
        "cw" => WaveformSpec::cw(),
        other => {
            invalid!("line {line}: unknown waveform kind '{other}' (expected wifi_bursts or cw)")
        }
    };
    if let Some((v, _)) = section.take_f64("power_dbm")? {
        spec.power_dbm = v;
    }
    let burst_keys = [
        ("bandwidth_hz", &mut spec.bandwidth_hz),
        ("burst_len_s", &mut spec.burst_len_s),
        ("gap_min_s", &mut spec.gap_law.min_s),
        ("gap_max_s", &mut spec.gap_law.max_s),
    ];
    for (key, slot) in burst_keys {
        if let Some((v, line)) = section.take_f64(key)? {
            if spec.kind == WaveformKind::Cw {
                invalid!("line {line}: key '{key}' does not apply to a cw waveform");
            }
            *slot = v;
        }
    }
    Ok(spec)
}

fn parse_motion(section: &mut Section) -> Result<MotionModel> {
    let Some((kind, line)) = section.take("motion") else {
        invalid!(
            "missing key 'motion' in [reflector] section starting at line {}",
            section.line
        );
    };
    let motion = match kind.as_str() {
        "gesture" => MotionModel::GestureSine(Sinusoid {
            amplitude_m: section.require_f64("amplitude_m")?,
            rate_hz: section.require_f64("rate_hz")?,
        }),
        "breathing" => MotionModel::Breathing(Sinusoid {
            amplitude_m: section.require_f64("amplitude_m")?,
            rate_hz: section.require_f64("rate_hz")?,
        }),
        "tremor" => {
            let primary = Sinusoid {
                amplitude_m: section.require_f64("amplitude_m")?,
                rate_hz: section.require_f64("rate_hz")?,
            };
            let wander = match (
                section.take_f64("wander_amplitude_m")?,
                section.take_f64("wander_rate_hz")?,
            ) {
                (Some((a, _)), Some((r, _))) => Some(Sinusoid {
                    amplitude_m: a,
                    rate_hz: r,
                }),
                (None, None) => None,
                (Some((_, line)), None) | (None, Some((_, line))) => invalid!(
                    "line {line}: tremor wander needs both wander_amplitude_m and wander_rate_hz"
                ),
            };
            MotionModel::Tremor { primary, wander }
        }
        "linear" => MotionModel::Linear {
            velocity_mps: section.require_f64("velocity_mps")?,
        },
        other => invalid!(
            "line {line}: unknown motion '{other}' (expected gesture, tremor, breathing, or linear)"
        ),
    };
    Ok(motion)
}

/// Parses a scenario file. All diagnostics carry line numbers; unknown
/// sections and keys are hard errors.
pub fn parse_scenario(text: &str) -> Result<ScenarioConfig> {
    let mut capture: Option<Section> = None;
    let mut waveform: Option<Section> = None;
    let mut scene: Option<Section> = None;
    let mut reflectors: Vec<Section> = Vec::new();

    for section in lex(text)? {
        let slot = match section.name.as_str() {
            "capture" => &mut capture,
            "waveform" => &mut waveform,
            "scene" => &mut scene,
            "reflector" => {
                reflectors.push(section);
                continue;
            }
            other => invalid!("line {}: unknown section [{other}]", section.line),
        };
        if let Some(first) = slot {
            invalid!(
                "line {}: duplicate [{}] section; first declared on line {}",
                section.line,
                section.name,
                first.line
            );
        }
        *slot = Some(section);
    }

    let Some(mut capture) = capture else {
        invalid!("missing [capture] section");
    };
    let duration_s = capture.require_f64("duration_s")?;
    let sample_rate_hz = capture.require_f64("sample_rate_hz")?;
    capture.finish()?;

    let Some(mut waveform) = waveform else {
        invalid!("missing [waveform] section");
    };
    let waveform_spec = parse_waveform(&mut waveform)?;
    waveform.finish()?;

    let Some(mut scene) = scene else {
        invalid!("missing [scene] section");
    };
    let carrier_hz = scene
        .take_f64("carrier_hz")?
        .map_or(DEFAULT_CARRIER_HZ, |(v, _)| v);
    let direct_path_gain_db = scene.take_f64("direct_path_gain_db")?.map_or(0.0, |(v, _)| v);
    let noise_power_db = scene.take_f64("noise_power_db")?.map(|(v, _)| v);
    scene.finish()?;

    let mut parsed_reflectors = Vec::new();
    for mut section in reflectors {
        let gain_db = section.require_f64("gain_db")?;
        let motion = parse_motion(&mut section)?;
        section.finish()?;
        parsed_reflectors.push(Reflector { gain_db, motion });
    }

    Ok(ScenarioConfig {
        duration_s,
        sample_rate_hz,
        waveform: waveform_spec,
        scene: Scene {
            carrier_hz,
            direct_path_gain_db,
            reflectors: parsed_reflectors,
            noise_power_db,
        },
    })
}

/// [`parse_scenario`] on a file, with the path in any error.
pub fn load_scenario(path: &std::path::Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| anyhow!("cannot read scenario {}: {e}", path.display()))?;
    parse_scenario(&text).with_context(|| path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    const GESTURE: &str = "\
# demo scenario
[capture]
duration_s = 8.0
sample_rate_hz = 200e3

[waveform]
kind = wifi_bursts
power_dbm = 0

[scene]
carrier_hz = 2.4e9
direct_path_gain_db = -400
noise_power_db = -30

[reflector]
gain_db = -10
motion = gesture
amplitude_m = 0.4    # inline comment
rate_hz = 0.25
";

    #[test]
    fn full_scenario_parses_with_comments_and_exponents() {
        let cfg = parse_scenario(GESTURE).unwrap();
        assert_eq!(cfg.duration_s, 8.0);
        assert_eq!(cfg.sample_rate_hz, 200e3);
        assert_eq!(cfg.waveform.kind, WaveformKind::WifiBursts);
        assert_eq!(cfg.scene.carrier_hz, 2.4e9);
        assert_eq!(cfg.scene.noise_power_db, Some(-30.0));
        assert_eq!(cfg.scene.reflectors.len(), 1);
        match &cfg.scene.reflectors[0].motion {
            MotionModel::GestureSine(s) => {
                assert_eq!(s.amplitude_m, 0.4);
                assert_eq!(s.rate_hz, 0.25);
            }
            other => panic!("wrong motion {other:?}"),
        }
    }

    #[test]
    fn repeated_reflector_sections_accumulate_in_order() {
        let text = format!(
            "{GESTURE}
[reflector]
gain_db = -20
motion = linear
velocity_mps = 1.5
"
        );
        let cfg = parse_scenario(&text).unwrap();
        assert_eq!(cfg.scene.reflectors.len(), 2);
        assert_eq!(cfg.scene.reflectors[1].gain_db, -20.0);
        assert!(matches!(
            cfg.scene.reflectors[1].motion,
            MotionModel::Linear { velocity_mps } if velocity_mps == 1.5
        ));
    }

    #[test]
    fn tremor_wander_is_all_or_nothing() {
        let base = "\
[capture]
duration_s = 1
sample_rate_hz = 1000
[waveform]
kind = cw
[scene]
[reflector]
gain_db = -10
motion = tremor
amplitude_m = 0.005
rate_hz = 5
";
        let cfg = parse_scenario(base).unwrap();
        assert!(matches!(
            cfg.scene.reflectors[0].motion,
            MotionModel::Tremor { wander: None, .. }
        ));

        let with_wander = format!("{base}wander_amplitude_m = 0.02\nwander_rate_hz = 0.3\n");
        let cfg = parse_scenario(&with_wander).unwrap();
        assert!(matches!(
            cfg.scene.reflectors[0].motion,
            MotionModel::Tremor { wander: Some(_), .. }
        ));

        let half = format!("{base}wander_rate_hz = 0.3\n");
        let err = parse_scenario(&half).unwrap_err().to_string();
        assert!(err.contains("wander_amplitude_m"), "{err}");
    }

    #[test]
    fn unknown_keys_and_sections_error_with_their_line() {
        let text = GESTURE.replace("rate_hz = 0.25", "rate_hz = 0.25\nvelocty = 3");
        let err = parse_scenario(&text).unwrap_err().to_string();
        assert!(err.contains("line 20"), "{err}");
        assert!(err.contains("velocty"), "{err}");

        let err = parse_scenario("[nonsense]\n").unwrap_err().to_string();
        assert!(err.contains("line 1"), "{err}");
        assert!(err.contains("nonsense"), "{err}");
    }

    #[test]
    fn misplaced_keys_and_duplicates_are_rejected() {
        let err = parse_scenario("duration_s = 1\n").unwrap_err().to_string();
        assert!(err.contains("before any [section]"), "{err}");

        let dup = GESTURE.replace("duration_s = 8.0", "duration_s = 8.0\nduration_s = 9.0");
        let err = parse_scenario(&dup).unwrap_err().to_string();
        assert!(err.contains("already set"), "{err}");

        let two = format!("{GESTURE}\n[scene]\n");
        let err = parse_scenario(&two).unwrap_err().to_string();
        assert!(err.contains("duplicate [scene]"), "{err}");

        // A key that belongs to a different motion kind is caught.
        let mixed = GESTURE.replace("rate_hz = 0.25", "rate_hz = 0.25\nvelocity_mps = 2");
        let err = parse_scenario(&mixed).unwrap_err().to_string();
        assert!(err.contains("velocity_mps"), "{err}");

        // Burst keys make no sense for a cw waveform.
        let cw = GESTURE
            .replace("kind = wifi_bursts", "kind = cw")
            .replace("power_dbm = 0", "burst_len_s = 0.002");
        let err = parse_scenario(&cw).unwrap_err().to_string();
        assert!(err.contains("does not apply"), "{err}");
    }

    #[test]
    fn missing_sections_and_numbers_are_reported() {
        let err = parse_scenario("[capture]\nduration_s = 1\nsample_rate_hz = 1000\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("missing [waveform]"), "{err}");

        let bad = GESTURE.replace("duration_s = 8.0", "duration_s = eight");
        let err = parse_scenario(&bad).unwrap_err().to_string();
        assert!(err.contains("not a number"), "{err}");
    }
}
