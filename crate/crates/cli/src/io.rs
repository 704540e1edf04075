//! Capture files and result tables.
//!
//! IQ captures use the plainest format that other SDR tooling can read:
//! interleaved little-endian `f32` I/Q pairs in a `.iq` file, with a
//! `<name>.meta` sidecar carrying the three numbers the bytes cannot —
//! sample rate, center frequency, and start time — as `key = value`
//! lines. Results are CSV (spectrogram, detections) and a small
//! `key = value` text block (pipeline statistics).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use pws_core::caf::DopplerRecord;
use pws_core::detect::Detection;
use pws_core::pipeline::{pipeline_latency, StageStats};
use pws_core::{Complex, IqFrame64};

use crate::config::Invalid;

/// Spectrogram cells more than this far below their row's peak are clamped,
/// so CSV consumers see a bounded dynamic range instead of -300 dB noise.
const SPECTROGRAM_FLOOR_DB: f64 = 80.0;

fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".meta");
    PathBuf::from(name)
}

/// Writes `frame` as interleaved little-endian f32 pairs plus its
/// `<path>.meta` sidecar. Samples are narrowed from f64 to f32 — the
/// precision every common capture format stores anyway.
pub fn write_frame(path: &Path, frame: &IqFrame64) -> Result<()> {
    let file = File::create(path)
        .with_context(|| format!("cannot create {}", path.display()))?;
    let mut out = BufWriter::new(file);
    for c in frame.samples() {
        out.write_all(&(c.re as f32).to_le_bytes())?;
        out.write_all(&(c.im as f32).to_le_bytes())?;
    }
    out.flush()?;

    let meta = sidecar_path(path);
    let text = format!(
        "sample_rate_hz = {}\ncenter_freq_hz = {}\nstart_time_s = {}\n",
        frame.sample_rate_hz(),
        frame.center_freq_hz(),
        frame.start_time_s()
    );
    std::fs::write(&meta, text)
        .with_context(|| format!("cannot write {}", meta.display()))?;
    Ok(())
}

/// Reads a capture written by [`write_frame`] (or any tool producing the
/// same layout and sidecar).
pub fn read_frame(path: &Path) -> Result<IqFrame64> {
    let meta_path = sidecar_path(path);
    let meta = std::fs::read_to_string(&meta_path)
        .with_context(|| format!("cannot read sidecar {}", meta_path.display()))?;
    let mut sample_rate_hz = None;
    let mut center_freq_hz = None;
    let mut start_time_s = None;
    for (idx, raw) in meta.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(anyhow!(Invalid(format!(
                "{} line {}: expected 'key = value', got '{line}'",
                meta_path.display(),
                idx + 1
            ))));
        };
        let value: f64 = value.trim().parse().map_err(|_| {
            anyhow!(Invalid(format!(
                "{} line {}: '{}' is not a number",
                meta_path.display(),
                idx + 1,
                value.trim()
            )))
        })?;
        match key.trim() {
            "sample_rate_hz" => sample_rate_hz = Some(value),
            "center_freq_hz" => center_freq_hz = Some(value),
            "start_time_s" => start_time_s = Some(value),
            other => {
                return Err(anyhow!(Invalid(format!(
                    "{} line {}: unknown key '{other}'",
                    meta_path.display(),
                    idx + 1
                ))))
            }
        }
    }
    let missing = |what: &str| anyhow!(Invalid(format!("{} lacks {what}", meta_path.display())));
    let sample_rate_hz = sample_rate_hz.ok_or_else(|| missing("sample_rate_hz"))?;
    let center_freq_hz = center_freq_hz.ok_or_else(|| missing("center_freq_hz"))?;
    let start_time_s = start_time_s.ok_or_else(|| missing("start_time_s"))?;

    let file =
        File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let mut bytes = Vec::new();
    BufReader::new(file).read_to_end(&mut bytes)?;
    if bytes.len() % 8 != 0 {
        return Err(anyhow!(Invalid(format!(
            "{}: {} bytes is not a whole number of f32 I/Q pairs",
            path.display(),
            bytes.len()
        ))));
    }
    let samples: Vec<Complex<f64>> = bytes
        .chunks_exact(8)
        .map(|pair| {
            let re = f32::from_le_bytes(pair[0..4].try_into().expect("chunk is 8 bytes"));
            let im = f32::from_le_bytes(pair[4..8].try_into().expect("chunk is 8 bytes"));
            Complex::new(f64::from(re), f64::from(im))
        })
        .collect();
    Ok(IqFrame64::new(
        samples,
        sample_rate_hz,
        center_freq_hz,
        start_time_s,
    )?)
}

/// Writes a time × Doppler record as CSV: header `time_s` followed by the
/// bin centers in Hz, one row per window, all values in fixed 6-decimal
/// form. Cells are floored at `row max − 80 dB`.
pub fn write_spectrogram(path: &Path, record: &DopplerRecord<f64>) -> Result<()> {
    let file = File::create(path)
        .with_context(|| format!("cannot create {}", path.display()))?;
    let mut out = BufWriter::new(file);
    write!(out, "time_s")?;
    for f in record.doppler_grid().bins_hz() {
        write!(out, ",{f:.6}")?;
    }
    writeln!(out)?;
    for row in record.rows() {
        write!(out, "{:.6}", row.time_s)?;
        let peak = row
            .magnitudes_db
            .iter()
            .fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let floor = peak - SPECTROGRAM_FLOOR_DB;
        for &v in &row.magnitudes_db {
            write!(out, ",{:.6}", v.max(floor))?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

/// Writes detections as CSV with one row per detection, in pipeline order.
pub fn write_detections(path: &Path, detections: &[Detection]) -> Result<()> {
    let file = File::create(path)
        .with_context(|| format!("cannot create {}", path.display()))?;
    let mut out = BufWriter::new(file);
    writeln!(out, "time_s,doppler_hz,power_db,threshold_db")?;
    for d in detections {
        writeln!(
            out,
            "{:.6},{:.6},{:.6},{:.6}",
            d.time_s, d.doppler_hz, d.power_db, d.threshold_db
        )?;
    }
    out.flush()?;
    Ok(())
}

/// Renders run statistics as `key = value` text, one stage per line.
pub fn format_stats(stats: &StageStats) -> String {
    let mut text = String::new();
    for stage in &stats.stages {
        text.push_str(&format!(
            "stage.{}.frames = {}\nstage.{}.mean_latency_s = {:.6}\nstage.{}.max_latency_s = {:.6}\n",
            stage.name, stage.frames, stage.name, stage.mean_latency_s, stage.name, stage.max_latency_s
        ));
    }
    text.push_str(&format!("frames_in = {}\n", stats.frames_in));
    text.push_str(&format!("frames_out = {}\n", stats.frames_out));
    text.push_str(&format!("throughput_fps = {:.3}\n", stats.throughput_fps));
    text.push_str(&format!(
        "pipeline_latency_s = {:.6}\n",
        pipeline_latency(stats)
    ));
    text.push_str(&format!("wall_time_s = {:.6}\n", stats.wall_time_s));
    text
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use pws_core::caf::RecordRow;
    use pws_core::frame::DopplerGrid;
    use pws_core::pipeline::StageStat;

    fn temp_dir() -> tempfile::TempDir {
        tempfile::tempdir().expect("tempdir")
    }

    #[test]
    fn frames_round_trip_at_f32_precision() {
        let dir = temp_dir();
        let path = dir.path().join("cap.iq");
        let samples: Vec<Complex<f64>> = (0..257)
            .map(|i| Complex::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let frame = IqFrame64::new(samples, 48_000.0, 2.4e9, 1.25).unwrap();
        write_frame(&path, &frame).unwrap();
        let back = read_frame(&path).unwrap();
        assert_eq!(back.len(), frame.len());
        assert_eq!(back.sample_rate_hz(), 48_000.0);
        assert_eq!(back.center_freq_hz(), 2.4e9);
        assert_eq!(back.start_time_s(), 1.25);
        for (a, b) in frame.samples().iter().zip(back.samples()) {
            assert_relative_eq!(a.re, b.re, max_relative = 1e-6);
            assert_relative_eq!(a.im, b.im, max_relative = 1e-6);
        }
    }

    #[test]
    fn truncated_files_and_broken_sidecars_are_rejected() {
        let dir = temp_dir();
        let path = dir.path().join("cap.iq");
        let frame = IqFrame64::new(
            vec![Complex::new(1.0, 0.0); 4],
            1000.0,
            2.4e9,
            0.0,
        )
        .unwrap();
        write_frame(&path, &frame).unwrap();

        // Chop the payload mid-sample.
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        let err = read_frame(&path).unwrap_err().to_string();
        assert!(err.contains("whole number"), "{err}");

        // Remove a sidecar key.
        std::fs::write(&path, &bytes).unwrap();
        let meta = sidecar_path(&path);
        let text = std::fs::read_to_string(&meta)
            .unwrap()
            .replace("center_freq_hz", "middle_freq_hz");
        std::fs::write(&meta, text).unwrap();
        let err = read_frame(&path).unwrap_err().to_string();
        assert!(err.contains("middle_freq_hz"), "{err}");
    }

    #[test]
    fn spectrogram_csv_has_bin_header_and_floored_rows() {
        let dir = temp_dir();
        let path = dir.path().join("spec.csv");
        let grid = DopplerGrid::new(vec![-1.0, 0.0, 1.0], true).unwrap();
        let mut record = DopplerRecord::new(grid, 1.0, 0.5).unwrap();
        record
            .push(RecordRow {
                time_s: 0.0,
                magnitudes_db: vec![-200.0, 10.0, 3.0],
            })
            .unwrap();
        write_spectrogram(&path, &record).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "time_s,-1.000000,0.000000,1.000000");
        // -200 dB sits more than 80 dB under the 10 dB row peak → clamped.
        assert_eq!(lines.next().unwrap(), "0.000000,-70.000000,10.000000,3.000000");
        assert!(lines.next().is_none());
    }

    #[test]
    fn detections_csv_is_one_line_per_detection() {
        let dir = temp_dir();
        let path = dir.path().join("det.csv");
        let detections = vec![Detection {
            time_s: 0.5,
            doppler_hz: -7.25,
            power_db: 12.0,
            threshold_db: 9.33333333,
        }];
        write_detections(&path, &detections).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(
            text,
            "time_s,doppler_hz,power_db,threshold_db\n0.500000,-7.250000,12.000000,9.333333\n"
        );
    }

    #[test]
    fn stats_text_lists_every_stage_and_the_latency_model() {
        let stats = StageStats {
            stages: vec![StageStat {
                name: "ambiguity",
                frames: 60,
                mean_latency_s: 0.02,
                max_latency_s: 0.025,
            }],
            frames_in: 60,
            frames_out: 60,
            throughput_fps: 49.5,
            wall_time_s: 1.3,
        };
        let text = format_stats(&stats);
        assert!(text.contains("stage.ambiguity.frames = 60"));
        assert!(text.contains("pipeline_latency_s = 0.020000"));
        assert!(text.contains("frames_out = 60"));
    }
}
