//! Concurrent three-stage processing pipeline.
//!
//! Live sensing has to keep up with the capture: every window must leave
//! the system before too many more arrive. The work splits naturally into
//! three stages with very different costs —
//!
//! 1. **conditioning**: adaptive interference cancellation and
//!    down-sampling of the raw window pair,
//! 2. **ambiguity**: the Doppler profile of the conditioned window,
//! 3. **detection**: residual-ridge cleaning and CFAR thresholding.
//!
//! [`run_pipeline`] runs each stage on its own thread, connected by small
//! bounded queues. A full queue blocks the producer (no window is ever
//! dropped), so throughput settles at the *slowest* stage: with per-stage
//! processing times τ₁, τ₂, τ₃, outputs emerge every `max{τᵢ}` seconds
//! rather than every `τ₁+τ₂+τ₃` — the sequential cost, which
//! [`run_sequential`] demonstrates with the identical stage code. Both
//! entry points produce bit-identical outputs; concurrency changes only
//! the timing. [`pipeline_latency`] extracts the `max{τᵢ}` figure from the
//! collected [`StageStats`].
//!
//! Stage timing can be made deliberately lopsided through
//! [`PipelineConfig::stage_delays_s`], which injects a sleep into each
//! stage — useful for demonstrating the throughput model without hardware
//! pacing the input.

use std::fmt;
use std::sync::mpsc;
use std::thread;
use std::time::{Duration, Instant};

use crate::caf::{window_profile, CafSurface, EngineConfig, RecordRow};
use crate::cancel::{clean, CleanConfig, NlmsConfig, NlmsFilter};
use crate::detect::{ca_cfar, CfarConfig, Detection};
use crate::error::{Error, Result};
use crate::frame::IqFrame;
use crate::Scalar;

/// Where the adaptive canceller sits relative to the down-sampler.
///
/// The canceller's adaptation cutoff scales with the rate it runs at
/// (≈ `μ·rate/2π` Hz), so the placement is a real tuning choice: before
/// decimation it sees the full bandwidth and adapts fast; after decimation
/// the same step size yields a far narrower cutoff, which is what slow
/// phenomena like breathing need to survive the filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NlmsPosition {
    PreDecimation,
    PostDecimation,
}

/// Adaptive-canceller stage settings: the filter itself plus where it runs.
#[derive(Debug, Clone, PartialEq)]
pub struct NlmsStage {
    pub config: NlmsConfig,
    pub position: NlmsPosition,
}

/// Full pipeline configuration. The window source is supplied separately
/// (see [`window_source`]), so the same configuration serves captures of
/// any length.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    /// Ambiguity engine for stage 2. Its `downsample` factor is applied in
    /// stage 1 (so the queues carry decimated windows), not in stage 2.
    pub engine: EngineConfig,
    /// Optional adaptive canceller in stage 1.
    pub nlms: Option<NlmsStage>,
    /// Optional ridge cleaning in stage 3.
    pub clean: Option<CleanConfig>,
    /// CFAR detector in stage 3.
    pub cfar: CfarConfig,
    /// Capacity of each inter-stage queue. Small values bound memory and
    /// latency; backpressure, not dropping, handles overflow.
    pub queue_capacity: usize,
    /// Artificial extra processing time per stage, seconds. Zeros for real
    /// use; nonzero to demonstrate the throughput model.
    pub stage_delays_s: [f64; 3],
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            engine: EngineConfig::default(),
            nlms: None,
            clean: None,
            cfar: CfarConfig::default(),
            queue_capacity: 4,
            stage_delays_s: [0.0; 3],
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.engine.validate()?;
        if let Some(nlms) = &self.nlms {
            nlms.config.validate()?;
        }
        if let Some(clean) = &self.clean {
            clean.validate()?;
        }
        self.cfar.validate()?;
        if self.queue_capacity == 0 {
            return Err(Error::config("queue capacity must be at least 1"));
        }
        if self.stage_delays_s.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(Error::config("stage delays must be finite and non-negative"));
        }
        Ok(())
    }
}

/// What the pipeline emits per window: a spectrogram row and the CFAR
/// detections on it.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput<T: Scalar> {
    pub row: RecordRow<T>,
    pub detections: Vec<Detection>,
}

/// Timing summary of one stage over a run.
#[derive(Debug, Clone, PartialEq)]
pub struct StageStat {
    pub name: &'static str,
    /// Windows this stage processed.
    pub frames: u64,
    /// Mean per-window processing time (injected delay included), seconds.
    pub mean_latency_s: f64,
    /// Worst per-window processing time, seconds.
    pub max_latency_s: f64,
}

/// Timing summary of a whole run.
#[derive(Debug, Clone, PartialEq)]
pub struct StageStats {
    pub stages: Vec<StageStat>,
    /// Windows pulled from the source.
    pub frames_in: u64,
    /// Windows that reached the sink.
    pub frames_out: u64,
    /// Steady-state output rate, windows/second. Measured over the
    /// outputs after the first fifth, so pipeline fill-up does not
    /// dilute it.
    pub throughput_fps: f64,
    /// Total wall-clock time of the run, seconds.
    pub wall_time_s: f64,
}

impl StageStats {
    fn empty() -> Self {
        StageStats {
            stages: Vec::new(),
            frames_in: 0,
            frames_out: 0,
            throughput_fps: 0.0,
            wall_time_s: 0.0,
        }
    }
}

/// The pipeline's service rate is set by its slowest stage: this returns
/// `max{mean τᵢ}`, the steady-state seconds per output of the concurrent
/// pipeline (compare with the sum, which a sequential run pays).
pub fn pipeline_latency(stats: &StageStats) -> f64 {
    stats
        .stages
        .iter()
        .map(|s| s.mean_latency_s)
        .fold(0.0, f64::max)
}

/// A failed run: the diagnostic plus whatever statistics the pipeline had
/// gathered before it stopped.
#[derive(Debug)]
pub struct PipelineError {
    pub diagnostic: Error,
    pub partial: StageStats,
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.diagnostic)
    }
}

impl std::error::Error for PipelineError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.diagnostic)
    }
}

impl From<PipelineError> for Error {
    fn from(e: PipelineError) -> Self {
        e.diagnostic
    }
}

const STAGE_NAMES: [&str; 3] = ["conditioning", "ambiguity", "detection"];

/// Sliding-window view over a capture pair, as the pipeline's input.
///
/// Yields `(reference, surveillance)` slices of `window_s` seconds every
/// `hop_s` seconds, exactly the windows [`crate::caf::doppler_record`]
/// would process. Slices are cut lazily, one per pull, so long captures
/// never hold more windows in memory than the pipeline queues allow.
pub fn window_source<'a, T: Scalar>(
    reference: &'a IqFrame<T>,
    surveillance: &'a IqFrame<T>,
    window_s: f64,
    hop_s: f64,
) -> Result<impl Iterator<Item = (IqFrame<T>, IqFrame<T>)> + Send + 'a> {
    if reference.len() != surveillance.len() {
        return Err(Error::argument(format!(
            "reference has {} samples but surveillance has {}",
            reference.len(),
            surveillance.len()
        )));
    }
    if reference.sample_rate_hz() != surveillance.sample_rate_hz() {
        return Err(Error::argument("capture channels must share a sample rate"));
    }
    let fs = reference.sample_rate_hz();
    let win_n = (window_s * fs).round() as usize;
    let hop_n = (hop_s * fs).round() as usize;
    if win_n == 0 || hop_n == 0 {
        return Err(Error::argument(
            "window and hop must each cover at least one sample",
        ));
    }
    if win_n > reference.len() {
        return Err(Error::argument(format!(
            "window of {win_n} samples exceeds the {}-sample capture",
            reference.len()
        )));
    }
    let count = (reference.len() - win_n) / hop_n + 1;
    Ok((0..count).map(move |i| {
        let start = i * hop_n;
        let r = reference
            .slice(start, win_n)
            .expect("window bounds are checked before iteration");
        let s = surveillance
            .slice(start, win_n)
            .expect("window bounds are checked before iteration");
        (r, s)
    }))
}

/// Stage 1: adaptive cancellation and decimation. Owns the canceller
/// state, which persists window to window.
struct ConditionStage<T: Scalar> {
    nlms: Option<(NlmsFilter<T>, NlmsPosition)>,
    downsample: usize,
}

impl<T: Scalar> ConditionStage<T> {
    fn new(config: &PipelineConfig) -> Result<Self> {
        let nlms = match &config.nlms {
            Some(stage) => Some((NlmsFilter::new(&stage.config)?, stage.position)),
            None => None,
        };
        Ok(ConditionStage {
            nlms,
            downsample: config.engine.downsample,
        })
    }

    fn process(
        &mut self,
        pair: (IqFrame<T>, IqFrame<T>),
    ) -> Result<(IqFrame<T>, IqFrame<T>)> {
        let (mut reference, mut surveillance) = pair;
        if let Some((filter, NlmsPosition::PreDecimation)) = &mut self.nlms {
            surveillance = filter.filter_frame(&reference, &surveillance)?;
        }
        if self.downsample > 1 {
            reference = reference.down_sample(self.downsample)?;
            surveillance = surveillance.down_sample(self.downsample)?;
        }
        if let Some((filter, NlmsPosition::PostDecimation)) = &mut self.nlms {
            surveillance = filter.filter_frame(&reference, &surveillance)?;
        }
        Ok((reference, surveillance))
    }
}

/// Stage 2: the ambiguity profile. Decimation already happened in stage 1,
/// so the engine runs with `downsample = 1` here.
struct TransformStage {
    engine: EngineConfig,
}

impl TransformStage {
    fn new(config: &PipelineConfig) -> Self {
        let mut engine = config.engine.clone();
        engine.downsample = 1;
        TransformStage { engine }
    }

    fn process<T: Scalar>(
        &self,
        pair: (IqFrame<T>, IqFrame<T>),
    ) -> Result<(CafSurface<T>, IqFrame<T>)> {
        let (reference, surveillance) = pair;
        let surface = window_profile(&reference, &surveillance, &self.engine)?;
        Ok((surface, reference))
    }
}

/// Stage 3: optional ridge cleaning, then CFAR detection.
struct DetectStage {
    clean: Option<CleanConfig>,
    engine: EngineConfig,
    cfar: CfarConfig,
}

impl DetectStage {
    fn new(config: &PipelineConfig) -> Self {
        let mut engine = config.engine.clone();
        engine.downsample = 1;
        DetectStage {
            clean: config.clean.clone(),
            engine,
            cfar: config.cfar.clone(),
        }
    }

    fn process<T: Scalar>(
        &self,
        input: (CafSurface<T>, IqFrame<T>),
    ) -> Result<PipelineOutput<T>> {
        let (mut surface, reference) = input;
        if let Some(cfg) = &self.clean {
            let template = window_profile(&reference, &reference, &self.engine)?;
            surface = clean(&surface, &template, cfg)?.0;
        }
        let time_s = reference.start_time_s();
        let row = RecordRow {
            time_s,
            magnitudes_db: surface.db_row(0),
        };
        let power = surface.power_row(0);
        let detections = ca_cfar(&power, surface.doppler_grid(), time_s, &self.cfar)?;
        Ok(PipelineOutput { row, detections })
    }
}

fn sleep_for(delay: Duration) {
    if !delay.is_zero() {
        thread::sleep(delay);
    }
}

fn stage_error(stage: &str, e: Error) -> Error {
    Error::runtime(format!("{stage} stage: {e}"))
}

fn stage_stat(name: &'static str, latencies: &[f64]) -> StageStat {
    let frames = latencies.len() as u64;
    let mean = if latencies.is_empty() {
        0.0
    } else {
        latencies.iter().sum::<f64>() / latencies.len() as f64
    };
    let max = latencies.iter().fold(0.0, |a: f64, &b| a.max(b));
    StageStat {
        name,
        frames,
        mean_latency_s: mean,
        max_latency_s: max,
    }
}

/// Steady-state output rate from the sink-side arrival times: the first
/// fifth of the outputs is treated as pipeline fill and excluded.
fn steady_throughput(times: &[Instant], frames_out: u64, wall_s: f64) -> f64 {
    let steady = &times[times.len() / 5..];
    if let (Some(first), Some(last)) = (steady.first(), steady.last()) {
        let span = last.duration_since(*first).as_secs_f64();
        if span > 0.0 {
            return (steady.len() - 1) as f64 / span;
        }
    }
    if wall_s > 0.0 {
        frames_out as f64 / wall_s
    } else {
        0.0
    }
}

/// Runs the three stages concurrently over `source`, feeding each output
/// to `sink` in order.
///
/// Stages communicate over bounded queues of `config.queue_capacity`
/// windows; a slow consumer blocks its producer rather than dropping
/// windows, so exactly the windows pulled from `source` reach `sink`, in
/// source order, with contents bit-identical to [`run_sequential`] under
/// the same configuration.
///
/// A stage failure (or a `sink` error) stops the run: the error comes back
/// as a [`PipelineError`] carrying the statistics gathered up to that
/// point.
pub fn run_pipeline<T, I, F>(
    source: I,
    config: &PipelineConfig,
    mut sink: F,
) -> std::result::Result<StageStats, PipelineError>
where
    T: Scalar,
    I: IntoIterator<Item = (IqFrame<T>, IqFrame<T>)>,
    I::IntoIter: Send,
    F: FnMut(PipelineOutput<T>) -> Result<()>,
{
    let fail = |e: Error| PipelineError {
        diagnostic: e,
        partial: StageStats::empty(),
    };
    config.validate().map_err(fail)?;
    let mut condition = ConditionStage::new(config).map_err(fail)?;
    let transform = TransformStage::new(config);
    let detect = DetectStage::new(config);
    let delays = config.stage_delays_s.map(Duration::from_secs_f64);
    let source = source.into_iter();

    let started = Instant::now();
    let mut out_times: Vec<Instant> = Vec::new();
    let mut frames_out = 0u64;
    let mut stream_err: Option<Error> = None;

    let (stats1, stats2, stats3) = thread::scope(|scope| {
        let (tx1, rx1) = mpsc::sync_channel::<Result<(IqFrame<T>, IqFrame<T>)>>(
            config.queue_capacity,
        );
        let (tx2, rx2) = mpsc::sync_channel::<Result<(CafSurface<T>, IqFrame<T>)>>(
            config.queue_capacity,
        );
        let (tx3, rx3) =
            mpsc::sync_channel::<Result<PipelineOutput<T>>>(config.queue_capacity);

        let h1 = scope.spawn(move || {
            let mut latencies = Vec::new();
            for pair in source {
                let t0 = Instant::now();
                let result = condition.process(pair);
                sleep_for(delays[0]);
                latencies.push(t0.elapsed().as_secs_f64());
                let failed = result.is_err();
                let msg = result.map_err(|e| stage_error(STAGE_NAMES[0], e));
                if tx1.send(msg).is_err() || failed {
                    break;
                }
            }
            latencies
        });

        let h2 = scope.spawn(move || {
            let mut latencies = Vec::new();
            for msg in rx1.iter() {
                let forward = match msg {
                    Ok(input) => {
                        let t0 = Instant::now();
                        let result = transform.process(input);
                        sleep_for(delays[1]);
                        latencies.push(t0.elapsed().as_secs_f64());
                        result.map_err(|e| stage_error(STAGE_NAMES[1], e))
                    }
                    Err(e) => Err(e),
                };
                let failed = forward.is_err();
                if tx2.send(forward).is_err() || failed {
                    break;
                }
            }
            latencies
        });

        let h3 = scope.spawn(move || {
            let mut latencies = Vec::new();
            for msg in rx2.iter() {
                let forward = match msg {
                    Ok(input) => {
                        let t0 = Instant::now();
                        let result = detect.process(input);
                        sleep_for(delays[2]);
                        latencies.push(t0.elapsed().as_secs_f64());
                        result.map_err(|e| stage_error(STAGE_NAMES[2], e))
                    }
                    Err(e) => Err(e),
                };
                let failed = forward.is_err();
                if tx3.send(forward).is_err() || failed {
                    break;
                }
            }
            latencies
        });

        for msg in rx3.iter() {
            match msg {
                Ok(output) => {
                    out_times.push(Instant::now());
                    frames_out += 1;
                    if let Err(e) = sink(output) {
                        stream_err = Some(e);
                        break;
                    }
                }
                Err(e) => {
                    stream_err = Some(e);
                    break;
                }
            }
        }
        drop(rx3); // unblocks upstream stages if the sink bailed early

        let mut join = |h: thread::ScopedJoinHandle<'_, Vec<f64>>, name: &str| {
            h.join().unwrap_or_else(|_| {
                if stream_err.is_none() {
                    stream_err = Some(Error::runtime(format!("{name} stage panicked")));
                }
                Vec::new()
            })
        };
        let s1 = join(h1, STAGE_NAMES[0]);
        let s2 = join(h2, STAGE_NAMES[1]);
        let s3 = join(h3, STAGE_NAMES[2]);
        (s1, s2, s3)
    });

    let wall = started.elapsed().as_secs_f64();
    let stats = StageStats {
        frames_in: stats1.len() as u64,
        frames_out,
        throughput_fps: steady_throughput(&out_times, frames_out, wall),
        wall_time_s: wall,
        stages: vec![
            stage_stat(STAGE_NAMES[0], &stats1),
            stage_stat(STAGE_NAMES[1], &stats2),
            stage_stat(STAGE_NAMES[2], &stats3),
        ],
    };
    match stream_err {
        Some(diagnostic) => Err(PipelineError {
            diagnostic,
            partial: stats,
        }),
        None => Ok(stats),
    }
}

/// The same three stages run back to back on one thread — the baseline the
/// concurrent pipeline is measured against. Outputs are bit-identical to
/// [`run_pipeline`]; only the timing differs (each output costs the *sum*
/// of the stage times instead of the maximum).
pub fn run_sequential<T, I, F>(
    source: I,
    config: &PipelineConfig,
    mut sink: F,
) -> std::result::Result<StageStats, PipelineError>
where
    T: Scalar,
    I: IntoIterator<Item = (IqFrame<T>, IqFrame<T>)>,
    F: FnMut(PipelineOutput<T>) -> Result<()>,
{
    let fail = |e: Error| PipelineError {
        diagnostic: e,
        partial: StageStats::empty(),
    };
    config.validate().map_err(fail)?;
    let mut condition = ConditionStage::new(config).map_err(fail)?;
    let transform = TransformStage::new(config);
    let detect = DetectStage::new(config);
    let delays = config.stage_delays_s.map(Duration::from_secs_f64);

    let started = Instant::now();
    let mut latencies: [Vec<f64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    let mut out_times: Vec<Instant> = Vec::new();
    let mut frames_out = 0u64;
    let mut stream_err: Option<Error> = None;

    for pair in source {
        let t0 = Instant::now();
        let conditioned = condition.process(pair);
        sleep_for(delays[0]);
        latencies[0].push(t0.elapsed().as_secs_f64());
        let conditioned = match conditioned {
            Ok(c) => c,
            Err(e) => {
                stream_err = Some(stage_error(STAGE_NAMES[0], e));
                break;
            }
        };

        let t0 = Instant::now();
        let transformed = transform.process(conditioned);
        sleep_for(delays[1]);
        latencies[1].push(t0.elapsed().as_secs_f64());
        let transformed = match transformed {
            Ok(t) => t,
            Err(e) => {
                stream_err = Some(stage_error(STAGE_NAMES[1], e));
                break;
            }
        };

        let t0 = Instant::now();
        let output = detect.process(transformed);
        sleep_for(delays[2]);
        latencies[2].push(t0.elapsed().as_secs_f64());
        match output {
            Ok(out) => {
                out_times.push(Instant::now());
                frames_out += 1;
                if let Err(e) = sink(out) {
                    stream_err = Some(e);
                    break;
                }
            }
            Err(e) => {
                stream_err = Some(stage_error(STAGE_NAMES[2], e));
                break;
            }
        }
    }

    let wall = started.elapsed().as_secs_f64();
    let stats = StageStats {
        frames_in: latencies[0].len() as u64,
        frames_out,
        throughput_fps: steady_throughput(&out_times, frames_out, wall),
        wall_time_s: wall,
        stages: vec![
            stage_stat(STAGE_NAMES[0], &latencies[0]),
            stage_stat(STAGE_NAMES[1], &latencies[1]),
            stage_stat(STAGE_NAMES[2], &latencies[2]),
        ],
    };
    match stream_err {
        Some(diagnostic) => Err(PipelineError {
            diagnostic,
            partial: stats,
        }),
        None => Ok(stats),
    }
}
