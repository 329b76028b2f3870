//! Frame-rate harness for the three parallelization regimes.
//!
//! * **strong**: one sequence at a time; inside each frame, per-track
//!   prediction and cost-matrix rows are spread over a pool of `p` threads.
//! * **weak**: one worker per sequence, at most `p` at once, in this
//!   process.
//! * **throughput**: `p` independent single-core child processes of the
//!   `motsort` binary, each handling `k` sequences.
//!
//! Only the per-frame update pipeline is timed; parsing and writing are
//! not. Every mode reports the same per-sequence output digests, so runs
//! can be checked for identical tracking output.

mod runner;
mod source;
mod sweep;
mod throughput;
mod timing;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub(crate) use runner::pin_current_thread;
pub use runner::{run_sequential, run_strong, run_weak, BenchRun, RunOptions, SequenceEmissions};
pub use source::SequenceSource;
pub use sweep::{run_sweep, SweepReport, SweepRow};
pub use throughput::{run_throughput, ThroughputOptions};
pub use timing::{
    fit_timing_model, measure_timer_overhead, FrameSample, PhaseClock, PhaseShares, PhaseTimings,
    TimingModel,
};

use crate::mot_io::MotIoError;
use crate::tracker::TrackerError;

pub const SCHEMA_VERSION: u32 = 1;

/// Reference phase split of the original update function: predict,
/// assign, update, create-new and output preparation, in percent.
pub const REFERENCE_PHASE_PERCENT: [(&str, f64); 5] = [
    ("predict", 30.0),
    ("assign", 22.2),
    ("update", 34.3),
    ("spawn", 3.1),
    ("output", 9.9),
];

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Tracker(#[from] TrackerError),
    #[error(transparent)]
    Input(#[from] MotIoError),
    #[error("thread pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Sequential,
    Strong,
    Weak,
    Throughput,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Sequential => "sequential",
            Mode::Strong => "strong",
            Mode::Weak => "weak",
            Mode::Throughput => "throughput",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceDigest {
    pub name: String,
    pub frames: usize,
    /// SHA-256 of the sequence's MOT result text.
    pub sha256: String,
}

impl SequenceDigest {
    pub fn of(name: &str, frames: usize, results: &str) -> Self {
        let hash = Sha256::digest(results.as_bytes());
        SequenceDigest {
            name: name.to_string(),
            frames,
            sha256: hash.iter().map(|b| format!("{b:02x}")).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub schema_version: u32,
    pub mode: Mode,
    pub cores: usize,
    /// Distinct input sequences (before replication).
    pub files: usize,
    /// Frames in one pass over the inputs.
    pub frames: usize,
    pub replication: usize,
    /// Timed wall-clock seconds over all passes.
    pub timed_seconds: f64,
    /// `frames * replication / timed_seconds`.
    pub fps: f64,
    /// Sum of per-sequence frame-loop times; equals `timed_seconds` for
    /// single-worker modes.
    pub loop_seconds: f64,
    pub phases: PhaseTimings,
    pub timing_model: TimingModel,
    pub phase_shares: PhaseShares,
    pub timer_overhead_ns: f64,
    pub sequences: Vec<SequenceDigest>,
    /// True when some throughput child failed.
    pub partial: bool,
    /// Exit code per throughput child (`None` if killed by a signal).
    pub child_exit_codes: Vec<Option<i32>>,
    pub pid: u32,
    pub child_pids: Vec<u32>,
    /// Count of shared writable memory mappings in this process, where the
    /// platform exposes them.
    pub shared_writable_mappings: Option<usize>,
}

pub(crate) fn fps(frames: usize, replication: usize, seconds: f64) -> f64 {
    if seconds > 0.0 {
        (frames * replication) as f64 / seconds
    } else {
        0.0
    }
}

/// Shared writable mappings of the current process (`rw-s` in
/// `/proc/self/maps`).
pub fn shared_writable_mappings() -> Option<usize> {
    let maps = std::fs::read_to_string("/proc/self/maps").ok()?;
    Some(
        maps.lines()
            .filter(|l| l.split_whitespace().nth(1).is_some_and(|p| p.starts_with("rw") && p.ends_with('s')))
            .count(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

pub const CSV_HEADER: &str = "mode,cores,files,frames,fps,replication,timed_seconds,loop_seconds,\
t_predict_ns,t_assign_ns,t_update_ns,t_spawn_ns,t_output_ns,\
fit_a,fit_b,fit_c,fit_d,fit_residual_ns,share_predict,share_assign,share_update,share_output,partial";

impl BenchReport {
    pub fn csv_row(&self) -> String {
        let m = &self.timing_model;
        let s = &self.phase_shares;
        let p = &self.phases;
        format!(
            "{},{},{},{},{:.1},{},{:.6},{:.6},{},{},{},{},{},{:.4},{:.4},{:.4},{:.4},{:.1},{:.4},{:.4},{:.4},{:.4},{}",
            self.mode.as_str(),
            self.cores,
            self.files,
            self.frames,
            self.fps,
            self.replication,
            self.timed_seconds,
            self.loop_seconds,
            p.t_predict,
            p.t_assign,
            p.t_update,
            p.t_spawn,
            p.t_output,
            m.a,
            m.b,
            m.c,
            m.d,
            m.residual.unwrap_or(f64::NAN),
            s.predict,
            s.assign,
            s.update,
            s.output,
            self.partial
        )
    }

    pub fn from_json(bytes: &[u8]) -> serde_json::Result<Self> {
        serde_json::from_slice(bytes)
    }
}

/// Serializes a report as pretty JSON or as a header plus one CSV row.
pub fn report(br: &BenchReport, format: ReportFormat) -> Vec<u8> {
    match format {
        ReportFormat::Json => {
            let mut out = serde_json::to_vec_pretty(br).expect("report is serializable");
            out.push(b'\n');
            out
        }
        ReportFormat::Csv => format!("{CSV_HEADER}\n{}\n", br.csv_row()).into_bytes(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_is_hex_sha256() {
        let d = SequenceDigest::of("x", 0, "");
        assert_eq!(
            d.sha256,
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn fps_accounting() {
        assert_eq!(fps(5500, 2, 0.5), 22_000.0);
        assert_eq!(fps(10, 1, 0.0), 0.0);
    }
}
