use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::runner::{run_sequential, run_strong, run_weak};
use super::throughput::{run_throughput, ThroughputOptions};
use super::{BenchError, BenchReport, SequenceSource};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub cores: usize,
    pub strong: BenchReport,
    pub weak: BenchReport,
    pub throughput: BenchReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    /// Single-threaded run without any pool, for comparison with the
    /// one-core rows.
    pub sequential: BenchReport,
    pub rows: Vec<SweepRow>,
}

pub const SWEEP_CSV_HEADER: &str = "cores,files,frames,strong,weak,throughput,sequential";

impl SweepReport {
    /// One row per core count, one FPS column per mode.
    pub fn to_csv(&self) -> String {
        let mut out = format!("{SWEEP_CSV_HEADER}\n");
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{:.1},{:.1},{:.1},{:.1}",
                r.cores,
                r.strong.files,
                r.strong.frames * r.strong.replication,
                r.strong.fps,
                r.weak.fps,
                r.throughput.fps,
                self.sequential.fps
            )
            .expect("writing to a String");
        }
        out
    }

    /// True when every mode in every row produced the sequential digests.
    pub fn outputs_consistent(&self) -> bool {
        let base = &self.sequential.sequences;
        self.rows.iter().all(|r| {
            &r.strong.sequences == base
                && &r.weak.sequences == base
                && r.throughput.sequences.iter().all(|d| base.contains(d))
        })
    }
}

/// Runs strong, weak and throughput modes at each core count.
///
/// Throughput rows use `min(p, files)` processes with `ceil(files / procs)`
/// sequences each, so every row covers the whole input list.
pub fn run_sweep(
    source: &SequenceSource,
    names: &[String],
    cores: &[usize],
    opts: &ThroughputOptions,
) -> Result<SweepReport, BenchError> {
    if cores.is_empty() {
        return Err(BenchError::Invalid("empty core list".into()));
    }
    let seqs = source.load(names)?;
    let sequential = run_sequential(&seqs, &opts.run)?.report;
    let mut rows = Vec::with_capacity(cores.len());
    for &p in cores {
        let strong = run_strong(&seqs, p, &opts.run)?.report;
        let weak = run_weak(&seqs, p, &opts.run)?.report;
        let procs = p.min(names.len()).max(1);
        let k = names.len().div_ceil(procs);
        let throughput = run_throughput(source, names, procs, k, opts)?.report;
        rows.push(SweepRow {
            cores: p,
            strong,
            weak,
            throughput,
        });
    }
    Ok(SweepReport { sequential, rows })
}
