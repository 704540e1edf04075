//! The three subcommands: synthesize, process, bench.

use std::path::PathBuf;
use std::time::Instant;

use anyhow::{anyhow, Result};
use clap::{Args, ValueEnum};
use pws_core::caf::{
    engine_grid, num_batches, window_profile, CafEngineKind, DopplerRecord, EngineConfig,
    SlowTimeWindow,
};
use pws_core::cancel::{CleanConfig, NlmsConfig};
use pws_core::detect::{CfarConfig, Detection};
use pws_core::pipeline::{
    run_pipeline, run_sequential, window_source, NlmsPosition, NlmsStage, PipelineConfig,
    PipelineOutput,
};
use pws_core::synth::{self, speed_for_doppler, MotionModel, Reflector, Scene, WaveformSpec};
use pws_core::{Error, IqFrame64};

use crate::config::{load_scenario, Invalid};
use crate::io;

fn invalid(msg: String) -> anyhow::Error {
    anyhow::Error::new(Invalid(msg))
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Scenario description (INI; see the configs/ directory for examples).
    #[arg(long, value_name = "FILE")]
    pub config: PathBuf,
    /// Seed for every random draw; identical seeds give byte-identical
    /// captures.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Reference-channel output (.iq plus .iq.meta sidecar).
    #[arg(long, value_name = "FILE")]
    pub out_ref: PathBuf,
    /// Surveillance-channel output.
    #[arg(long, value_name = "FILE")]
    pub out_surv: PathBuf,
}

pub fn synth(args: &SynthArgs) -> Result<()> {
    let scenario = load_scenario(&args.config)?;
    let tx = synth::gen_waveform::<f64>(
        &scenario.waveform,
        scenario.duration_s,
        scenario.sample_rate_hz,
        args.seed,
    )?;
    let (reference, surveillance) = synth::apply_scene(&tx, &scenario.scene, args.seed)?;
    io::write_frame(&args.out_ref, &reference)?;
    io::write_frame(&args.out_surv, &surveillance)?;
    println!(
        "wrote {} samples ({} s at {} Hz) to {} and {}",
        reference.len(),
        scenario.duration_s,
        scenario.sample_rate_hz,
        args.out_ref.display(),
        args.out_surv.display()
    );
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum EngineArg {
    /// Evaluate every Doppler bin over the full window.
    Direct,
    /// Split the window into segments and read Doppler off a small FFT.
    Batched,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TaperArg {
    Rect,
    Hann,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum NlmsArg {
    /// No adaptive cancellation.
    Off,
    /// Cancel at the capture rate, before down-sampling.
    Pre,
    /// Cancel at the decimated rate (narrow adaptation cutoff).
    Post,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OnOff {
    On,
    Off,
}

#[derive(Args, Debug)]
pub struct ProcessArgs {
    /// Reference-channel capture (.iq with .meta sidecar).
    #[arg(long = "ref", value_name = "FILE")]
    pub reference: PathBuf,
    /// Surveillance-channel capture.
    #[arg(long = "surv", value_name = "FILE")]
    pub surveillance: PathBuf,
    /// Analysis window length, seconds. Sets the Doppler resolution 1/T.
    #[arg(long)]
    pub window_s: f64,
    /// Spacing between window starts, seconds.
    #[arg(long)]
    pub hop_s: f64,
    /// Ambiguity engine.
    #[arg(long, value_enum, default_value_t = EngineArg::Direct)]
    pub engine: EngineArg,
    /// Fastest motion the batched engine must represent without folding,
    /// m/s.
    #[arg(long, default_value_t = 3.0)]
    pub max_speed_mps: f64,
    /// Fraction of each segment the batched engine integrates, in (0, 1].
    #[arg(long, default_value_t = 1.0)]
    pub portion: f64,
    /// Keep every k-th sample before the ambiguity computation.
    #[arg(long, default_value_t = 1)]
    pub downsample: usize,
    /// Half-width of the reported Doppler band, Hz.
    #[arg(long, default_value_t = 25.0)]
    pub doppler_span_hz: f64,
    /// Slow-time taper for the batched engine.
    #[arg(long, value_enum, default_value_t = TaperArg::Rect)]
    pub taper: TaperArg,
    /// Adaptive canceller placement, or off.
    #[arg(long, value_enum, default_value_t = NlmsArg::Off)]
    pub nlms: NlmsArg,
    /// Canceller length, taps.
    #[arg(long, default_value_t = 32)]
    pub nlms_taps: usize,
    /// Canceller adaptation step, in (0, 2).
    #[arg(long, default_value_t = 0.5)]
    pub nlms_mu: f64,
    /// Subtract the reference's ambiguity ridge before detection.
    #[arg(long, value_enum, default_value_t = OnOff::On)]
    pub clean: OnOff,
    /// CFAR per-cell false-alarm probability.
    #[arg(long, default_value_t = 1e-3)]
    pub pfa: f64,
    /// CFAR training cells (total, even).
    #[arg(long, default_value_t = 16)]
    pub cfar_train: usize,
    /// CFAR guard cells (total, even).
    #[arg(long, default_value_t = 4)]
    pub cfar_guard: usize,
    /// Inter-stage queue capacity, windows.
    #[arg(long, default_value_t = 4)]
    pub queue: usize,
    /// Inject per-stage delays in milliseconds (conditioning,ambiguity,
    /// detection) to demonstrate the throughput model.
    #[arg(long, value_delimiter = ',', value_name = "MS,MS,MS")]
    pub stage_delays_ms: Option<Vec<f64>>,
    /// Run the stages back-to-back on one thread instead of concurrently.
    #[arg(long)]
    pub sequential: bool,
    /// Time × Doppler magnitudes as CSV.
    #[arg(long, value_name = "FILE")]
    pub out_spectrogram: Option<PathBuf>,
    /// CFAR detections as CSV.
    #[arg(long, value_name = "FILE")]
    pub out_detections: Option<PathBuf>,
    /// Stage statistics as key = value text (stdout if omitted).
    #[arg(long, value_name = "FILE")]
    pub out_stats: Option<PathBuf>,
}

impl ProcessArgs {
    fn engine_config(&self) -> EngineConfig {
        EngineConfig {
            kind: match self.engine {
                EngineArg::Direct => CafEngineKind::Direct,
                EngineArg::Batched => CafEngineKind::Batched {
                    max_speed_mps: self.max_speed_mps,
                    portion: self.portion,
                },
            },
            downsample: self.downsample,
            slow_time_window: match self.taper {
                TaperArg::Rect => SlowTimeWindow::Rect,
                TaperArg::Hann => SlowTimeWindow::Hann,
            },
            doppler_span_hz: self.doppler_span_hz,
        }
    }

    fn pipeline_config(&self, engine: EngineConfig) -> PipelineConfig {
        let nlms_config = NlmsConfig {
            num_taps: self.nlms_taps,
            step_mu: self.nlms_mu,
            ..NlmsConfig::default()
        };
        PipelineConfig {
            engine,
            nlms: match self.nlms {
                NlmsArg::Off => None,
                NlmsArg::Pre => Some(NlmsStage {
                    config: nlms_config,
                    position: NlmsPosition::PreDecimation,
                }),
                NlmsArg::Post => Some(NlmsStage {
                    config: nlms_config,
                    position: NlmsPosition::PostDecimation,
                }),
            },
            clean: (self.clean == OnOff::On).then(CleanConfig::default),
            cfar: CfarConfig {
                num_train: self.cfar_train,
                num_guard: self.cfar_guard,
                pfa: self.pfa,
            },
            queue_capacity: self.queue,
            stage_delays_s: self
                .stage_delays_ms
                .as_ref()
                .map(|v| [v[0] / 1e3, v[1] / 1e3, v[2] / 1e3])
                .unwrap_or([0.0; 3]),
        }
    }
}

pub fn process(args: &ProcessArgs) -> Result<()> {
    if let Some(delays) = &args.stage_delays_ms {
        if delays.len() != 3 {
            return Err(invalid(format!(
                "--stage-delays-ms needs exactly three comma-separated values \
                 (conditioning,ambiguity,detection), got {}",
                delays.len()
            )));
        }
    }

    let reference = io::read_frame(&args.reference)?;
    let surveillance = io::read_frame(&args.surveillance)?;

    let engine = args.engine_config();
    let config = args.pipeline_config(engine.clone());
    config.validate()?;

    // Resolve the Doppler grid up front: it sizes the spectrogram header
    // and lets an infeasible window/span/CFAR combination fail before any
    // signal is processed.
    let win_n = (args.window_s * reference.sample_rate_hz()).round() as usize;
    let grid = engine_grid(
        win_n.max(1),
        reference.sample_rate_hz(),
        reference.center_freq_hz(),
        &engine,
    )?;
    if grid.len() < config.cfar.num_train + config.cfar.num_guard + 1 {
        return Err(invalid(format!(
            "the {}-bin Doppler grid cannot supply {} training and {} guard cells; \
             lengthen the window, widen the span, or shrink the CFAR neighborhood",
            grid.len(),
            config.cfar.num_train,
            config.cfar.num_guard
        )));
    }

    let mut record = DopplerRecord::new(grid, args.window_s, args.hop_s)?;
    let mut detections: Vec<Detection> = Vec::new();
    let source = window_source(&reference, &surveillance, args.window_s, args.hop_s)?;
    let sink = |out: PipelineOutput<f64>| {
        record.push(out.row)?;
        detections.extend(out.detections);
        Ok(())
    };
    let stats = if args.sequential {
        run_sequential(source, &config, sink)
    } else {
        run_pipeline(source, &config, sink)
    }
    .map_err(|e| anyhow!(Error::from(e)))?;

    if let Some(path) = &args.out_spectrogram {
        io::write_spectrogram(path, &record)?;
    }
    if let Some(path) = &args.out_detections {
        io::write_detections(path, &detections)?;
    }
    let stats_text = io::format_stats(&stats);
    match &args.out_stats {
        Some(path) => std::fs::write(path, &stats_text)?,
        None => print!("{stats_text}"),
    }
    println!(
        "processed {} windows into {} rows and {} detections",
        stats.frames_in,
        record.rows().len(),
        detections.len()
    );
    Ok(())
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Window sizes to sweep, as log2 of the sample count.
    #[arg(long, value_delimiter = ',', default_value = "14,16,18")]
    pub log2_sizes: Vec<u32>,
    /// Capture rate of the synthetic input, Hz.
    #[arg(long, default_value_t = 100e3)]
    pub sample_rate_hz: f64,
    /// Batched-engine speed bound, m/s.
    #[arg(long, default_value_t = 3.0)]
    pub max_speed_mps: f64,
    /// Batched-engine segment portion.
    #[arg(long, default_value_t = 1.0)]
    pub portion: f64,
    /// Decimation factor for the down-sampled direct run.
    #[arg(long, default_value_t = 8)]
    pub downsample: usize,
    /// Timing trials per engine; the best is reported.
    #[arg(long, default_value_t = 3)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Report destination (stdout if omitted).
    #[arg(long, value_name = "FILE")]
    pub out_report: Option<PathBuf>,
}

/// Best-of-`trials` wall time of one profile computation, milliseconds,
/// plus the Doppler the profile peaks at.
fn time_profile(
    reference: &IqFrame64,
    surveillance: &IqFrame64,
    cfg: &EngineConfig,
    trials: usize,
) -> Result<(f64, f64)> {
    let mut best_ms = f64::INFINITY;
    let mut peak_hz = 0.0;
    for _ in 0..trials.max(1) {
        let t0 = Instant::now();
        let surface = window_profile(reference, surveillance, cfg)?;
        let elapsed = t0.elapsed().as_secs_f64() * 1e3;
        let (_, doppler_idx) = surface.peak();
        peak_hz = surface.doppler_grid().bins_hz()[doppler_idx];
        best_ms = best_ms.min(elapsed);
    }
    Ok((best_ms, peak_hz))
}

pub fn bench(args: &BenchArgs) -> Result<()> {
    if args.log2_sizes.is_empty() {
        return Err(invalid("bench needs at least one window size".into()));
    }
    if args.log2_sizes.iter().any(|&k| !(8..=26).contains(&k)) {
        return Err(invalid(
            "window sizes must lie between 2^8 and 2^26 samples".into(),
        ));
    }
    let fs = args.sample_rate_hz;
    let carrier = synth::DEFAULT_CARRIER_HZ;

    let mut report = format!(
        "# ambiguity engine timing sweep: fs = {fs} Hz, carrier = {carrier} Hz, \
         best of {} trials\n",
        args.trials
    );
    for &k in &args.log2_sizes {
        let n = 1usize << k;
        let duration_s = n as f64 / fs;
        // One echo at 10 Hz Doppler, comfortably inside the ±25 Hz band.
        let tx = synth::gen_waveform::<f64>(&WaveformSpec::cw(), duration_s, fs, args.seed)?;
        let scene = Scene {
            carrier_hz: carrier,
            direct_path_gain_db: -400.0,
            reflectors: vec![Reflector {
                gain_db: 0.0,
                motion: MotionModel::Linear {
                    velocity_mps: speed_for_doppler(10.0, carrier),
                },
            }],
            noise_power_db: Some(-30.0),
        };
        let (reference, surveillance) = synth::apply_scene(&tx, &scene, args.seed)?;

        let direct = EngineConfig::default();
        let batched = EngineConfig {
            kind: CafEngineKind::Batched {
                max_speed_mps: args.max_speed_mps,
                portion: args.portion,
            },
            ..EngineConfig::default()
        };
        let decimated = EngineConfig {
            downsample: args.downsample,
            ..EngineConfig::default()
        };

        let (direct_ms, direct_hz) = time_profile(&reference, &surveillance, &direct, args.trials)?;
        let (batched_ms, batched_hz) =
            time_profile(&reference, &surveillance, &batched, args.trials)?;
        let (decimated_ms, decimated_hz) =
            time_profile(&reference, &surveillance, &decimated, args.trials)?;
        let j = num_batches(args.max_speed_mps, carrier, duration_s)?;

        // All three engines should find the same echo, within one
        // resolution cell of the coarsest grid involved.
        let cell = 1.0 / duration_s;
        let agree = (direct_hz - batched_hz).abs() <= 1.5 * cell
            && (direct_hz - decimated_hz).abs() <= 1.5 * cell;
        report.push_str(&format!(
            "n=2^{k} duration_s={duration_s:.3} direct_ms={direct_ms:.3} \
             batched_ms={batched_ms:.3} (J={j}) downsampled_ms={decimated_ms:.3} \
             (D={}) speedup_batched={:.1} speedup_downsampled={:.1} \
             peaks_agree={}\n",
            args.downsample,
            direct_ms / batched_ms,
            direct_ms / decimated_ms,
            if agree { "yes" } else { "NO" },
        ));
    }

    match &args.out_report {
        Some(path) => std::fs::write(path, &report)?,
        None => print!("{report}"),
    }
    Ok(())
}
