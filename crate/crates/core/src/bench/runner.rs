use std::time::Instant;

use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};

use super::timing::{fit_timing_model, measure_timer_overhead, PhaseClock, PhaseShares, PhaseTimings};
use super::{fps, shared_writable_mappings, BenchError, BenchReport, Mode, SequenceDigest, SCHEMA_VERSION};
use crate::mot_io::{render_results, Sequence};
use crate::tracker::{Exec, FrameEmissions, TrackerConfig, TrackerError, TrackerSet};

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub config: TrackerConfig,
    /// Passes over the input list; each pass reprocesses every sequence.
    pub replication: usize,
    /// Pin worker threads to cores (Linux only; ignored elsewhere).
    pub pin: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            config: TrackerConfig::default(),
            replication: 1,
            pin: false,
        }
    }
}

/// Tracking output of one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceEmissions {
    pub name: String,
    pub frames: usize,
    pub emissions: Vec<FrameEmissions>,
}

impl SequenceEmissions {
    pub fn results_text(&self) -> String {
        render_results(&self.emissions)
    }

    pub fn digest(&self) -> SequenceDigest {
        SequenceDigest::of(&self.name, self.frames, &self.results_text())
    }
}

#[derive(Debug, Clone)]
pub struct BenchRun {
    pub report: BenchReport,
    /// Output of the first pass, one entry per input sequence. Empty for
    /// throughput runs, whose output stays in the children.
    pub outputs: Vec<SequenceEmissions>,
}

struct SeqRun {
    out: SequenceEmissions,
    clock: PhaseClock,
}

fn track_timed(seq: &Sequence, config: TrackerConfig, exec: Exec<'_>) -> Result<SeqRun, TrackerError> {
    let mut ts = TrackerSet::new(config)?;
    let mut clock = PhaseClock::with_capacity(seq.frames.len());
    let mut emissions = Vec::with_capacity(seq.frames.len());
    for frame in &seq.frames {
        clock.start_frame();
        let tracks = ts.step_with(frame, exec, &mut clock)?;
        emissions.push(FrameEmissions {
            frame_index: frame.frame_index,
            tracks,
        });
        clock.end_frame();
    }
    Ok(SeqRun {
        out: SequenceEmissions {
            name: seq.name.clone(),
            frames: seq.total_frames,
            emissions,
        },
        clock,
    })
}

#[cfg(target_os = "linux")]
pub(crate) fn pin_current_thread(core: usize) {
    let ncpu = std::thread::available_parallelism().map_or(1, |n| n.get());
    // SAFETY: cpu_set_t is plain data; sched_setaffinity only reads it.
    unsafe {
        let mut set: libc::cpu_set_t = std::mem::zeroed();
        libc::CPU_SET(core % ncpu, &mut set);
        libc::sched_setaffinity(0, std::mem::size_of::<libc::cpu_set_t>(), &set);
    }
}

#[cfg(not(target_os = "linux"))]
pub(crate) fn pin_current_thread(_core: usize) {}

fn build_pool(threads: usize, pin: bool) -> Result<ThreadPool, BenchError> {
    let mut b = ThreadPoolBuilder::new().num_threads(threads);
    if pin {
        b = b.start_handler(pin_current_thread);
    }
    Ok(b.build()?)
}

fn check_inputs(p: usize, opts: &RunOptions) -> Result<(), BenchError> {
    if p == 0 {
        return Err(BenchError::Invalid("core count must be at least 1".into()));
    }
    if opts.replication == 0 {
        return Err(BenchError::Invalid("replication must be at least 1".into()));
    }
    Ok(())
}

fn jobs(seqs: &[Sequence], replication: usize) -> Vec<&Sequence> {
    (0..replication).flat_map(|_| seqs.iter()).collect()
}

fn assemble(
    mode: Mode,
    cores: usize,
    seqs: &[Sequence],
    replication: usize,
    timed_seconds: f64,
    timer_overhead_ns: f64,
    runs: Vec<SeqRun>,
) -> BenchRun {
    let mut phases = PhaseTimings::default();
    let mut loop_ns = 0u64;
    let mut samples = Vec::new();
    let mut outputs = Vec::with_capacity(seqs.len());
    for (i, run) in runs.into_iter().enumerate() {
        phases.add(&run.clock.totals);
        loop_ns += run.clock.loop_ns;
        samples.extend_from_slice(&run.clock.samples);
        if i < seqs.len() {
            outputs.push(run.out);
        }
    }
    let timing_model = fit_timing_model(&samples);
    let frames = seqs.iter().map(|s| s.total_frames).sum();
    BenchRun {
        report: BenchReport {
            schema_version: SCHEMA_VERSION,
            mode,
            cores,
            files: seqs.len(),
            frames,
            replication,
            timed_seconds,
            fps: fps(frames, replication, timed_seconds),
            loop_seconds: loop_ns as f64 * 1e-9,
            phases,
            phase_shares: PhaseShares::fitted(&phases, &timing_model),
            timing_model,
            timer_overhead_ns,
            sequences: outputs.iter().map(SequenceEmissions::digest).collect(),
            partial: false,
            child_exit_codes: Vec::new(),
            pid: std::process::id(),
            child_pids: Vec::new(),
            shared_writable_mappings: shared_writable_mappings(),
        },
        outputs,
    }
}

/// Single-threaded baseline: every sequence on the calling thread.
pub fn run_sequential(seqs: &[Sequence], opts: &RunOptions) -> Result<BenchRun, BenchError> {
    check_inputs(1, opts)?;
    if opts.pin {
        pin_current_thread(0);
    }
    let overhead = measure_timer_overhead();
    let start = Instant::now();
    let runs = jobs(seqs, opts.replication)
        .into_iter()
        .map(|s| track_timed(s, opts.config, Exec::Serial))
        .collect::<Result<Vec<_>, _>>()?;
    let secs = start.elapsed().as_secs_f64();
    Ok(assemble(Mode::Sequential, 1, seqs, opts.replication, secs, overhead, runs))
}

/// Sequences one after another; each frame's data-parallel phases use `p`
/// pool threads.
pub fn run_strong(seqs: &[Sequence], p: usize, opts: &RunOptions) -> Result<BenchRun, BenchError> {
    check_inputs(p, opts)?;
    let pool = build_pool(p, opts.pin)?;
    let overhead = measure_timer_overhead();
    let start = Instant::now();
    let runs = jobs(seqs, opts.replication)
        .into_iter()
        .map(|s| track_timed(s, opts.config, Exec::Pool(&pool)))
        .collect::<Result<Vec<_>, _>>()?;
    let secs = start.elapsed().as_secs_f64();
    Ok(assemble(Mode::Strong, p, seqs, opts.replication, secs, overhead, runs))
}

/// One sequential worker per sequence, at most `p` running at once; idle
/// workers steal the next pending sequence.
pub fn run_weak(seqs: &[Sequence], p: usize, opts: &RunOptions) -> Result<BenchRun, BenchError> {
    check_inputs(p, opts)?;
    let pool = build_pool(p, opts.pin)?;
    let overhead = measure_timer_overhead();
    let work = jobs(seqs, opts.replication);
    let config = opts.config;
    let start = Instant::now();
    let runs = pool.install(|| {
        work.par_iter()
            .with_max_len(1)
            .map(|s| track_timed(s, config, Exec::Serial))
            .collect::<Result<Vec<_>, _>>()
    })?;
    let secs = start.elapsed().as_secs_f64();
    Ok(assemble(Mode::Weak, p, seqs, opts.replication, secs, overhead, runs))
}
