use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;
use std::process::{Child, Command, Stdio};

use super::runner::{BenchRun, RunOptions};
use super::timing::{PhaseShares, PhaseTimings, TimingModel};
use super::{
    fps, measure_timer_overhead, shared_writable_mappings, BenchError, BenchReport, Mode,
    SequenceSource, SCHEMA_VERSION,
};

#[derive(Debug, Clone)]
pub struct ThroughputOptions {
    /// The `motsort` executable to launch for each child.
    pub exe: PathBuf,
    pub run: RunOptions,
}

impl ThroughputOptions {
    /// Uses the running executable, which must be `motsort` itself.
    pub fn current_exe(run: RunOptions) -> Result<Self, BenchError> {
        let exe = std::env::current_exe().map_err(|source| BenchError::Io {
            context: "locating current executable".into(),
            source,
        })?;
        Ok(ThroughputOptions { exe, run })
    }
}

fn child_args(
    source: &SequenceSource,
    names: &[String],
    report: &std::path::Path,
    index: usize,
    run: &RunOptions,
) -> Vec<OsString> {
    let mut args: Vec<OsString> = vec![
        "--mode".into(),
        "weak".into(),
        "--cores".into(),
        "1".into(),
        "--report".into(),
        "json".into(),
        "--out".into(),
        report.as_os_str().to_owned(),
    ];
    args.extend(source.to_args());
    args.push("--sequences".into());
    args.push(names.join(",").into());
    let c = &run.config;
    for (flag, value) in [
        ("--max-age", c.max_age.to_string()),
        ("--min-hits", c.min_hits.to_string()),
        ("--iou-threshold", c.iou_threshold.to_string()),
        ("--replicate", run.replication.to_string()),
    ] {
        args.push(flag.into());
        args.push(value.into());
    }
    if run.pin {
        args.push("--pin".into());
        args.push("--pin-core".into());
        args.push(index.to_string().into());
    }
    args
}

/// Runs `p` child processes of the `motsort` binary in single-core weak
/// mode. Child `i` handles `k` sequences taken cyclically from `names`
/// starting at `i·k`, so `p·k` sequences run in total.
///
/// The parent aggregates the children's JSON reports: frames add up and
/// the timed span is the slowest child's. A failed child marks the report
/// partial instead of failing the run.
pub fn run_throughput(
    source: &SequenceSource,
    names: &[String],
    p: usize,
    k: usize,
    opts: &ThroughputOptions,
) -> Result<BenchRun, BenchError> {
    if p == 0 || k == 0 {
        return Err(BenchError::Invalid("process and file counts must be at least 1".into()));
    }
    if names.is_empty() {
        return Err(BenchError::Invalid("no sequences to run".into()));
    }
    let io = |context: &str| {
        let context = context.to_string();
        move |source| BenchError::Io { context, source }
    };
    let dir = tempfile::Builder::new()
        .prefix("motsort-throughput")
        .tempdir()
        .map_err(io("creating report directory"))?;

    let mut children: Vec<(Child, PathBuf)> = Vec::with_capacity(p);
    for i in 0..p {
        let share: Vec<String> = (0..k).map(|j| names[(i * k + j) % names.len()].clone()).collect();
        let report = dir.path().join(format!("child-{i}.json"));
        let child = Command::new(&opts.exe)
            .args(child_args(source, &share, &report, i, &opts.run))
            .stdin(Stdio::null())
            .stdout(Stdio::null())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(io(&format!("spawning {}", opts.exe.display())))?;
        children.push((child, report));
    }

    let mut reports = Vec::with_capacity(p);
    let mut exit_codes = Vec::with_capacity(p);
    let mut child_pids = Vec::with_capacity(p);
    let mut partial = false;
    for (mut child, path) in children {
        child_pids.push(child.id());
        let status = child.wait().map_err(io("waiting for child"))?;
        exit_codes.push(status.code());
        let parsed = status
            .success()
            .then(|| fs::read(&path).ok())
            .flatten()
            .and_then(|bytes| BenchReport::from_json(&bytes).ok());
        match parsed {
            Some(r) => reports.push(r),
            None => partial = true,
        }
    }

    let mut phases = PhaseTimings::default();
    let mut frames = 0;
    let mut files = 0;
    let mut timed: f64 = 0.0;
    let mut loop_seconds = 0.0;
    let mut sequences = Vec::new();
    let mut weights = [0.0f64; 4];
    let mut residual_sq = 0.0;
    let mut fitted_samples = 0usize;
    let mut samples = 0usize;
    for r in &reports {
        phases.add(&r.phases);
        frames += r.frames;
        files += r.files;
        timed = timed.max(r.timed_seconds);
        loop_seconds += r.loop_seconds;
        samples += r.timing_model.samples;
        if !r.timing_model.degenerate {
            let n = r.timing_model.samples as f64;
            for (w, c) in weights.iter_mut().zip(r.timing_model.coefficients()) {
                *w += n * c;
            }
            residual_sq += n * r.timing_model.residual.unwrap_or(0.0).powi(2);
            fitted_samples += r.timing_model.samples;
        }
        for d in &r.sequences {
            if !sequences.iter().any(|s: &super::SequenceDigest| s.name == d.name) {
                sequences.push(d.clone());
            }
        }
    }
    // Sample-weighted mean of the children's fits.
    let timing_model = if fitted_samples > 0 {
        let n = fitted_samples as f64;
        TimingModel {
            a: weights[0] / n,
            b: weights[1] / n,
            c: weights[2] / n,
            d: weights[3] / n,
            residual: Some((residual_sq / n).sqrt()),
            samples,
            degenerate: false,
        }
    } else {
        TimingModel {
            a: 1.0,
            b: 1.0,
            c: 1.0,
            d: 1.0,
            residual: None,
            samples,
            degenerate: true,
        }
    };
    let replication = opts.run.replication;
    Ok(BenchRun {
        report: BenchReport {
            schema_version: SCHEMA_VERSION,
            mode: Mode::Throughput,
            cores: p,
            files,
            frames,
            replication,
            timed_seconds: timed,
            fps: fps(frames, replication, timed),
            loop_seconds,
            phases,
            phase_shares: PhaseShares::fitted(&phases, &timing_model),
            timing_model,
            timer_overhead_ns: measure_timer_overhead(),
            sequences,
            partial,
            child_exit_codes: exit_codes,
            pid: std::process::id(),
            child_pids,
            shared_writable_mappings: shared_writable_mappings(),
        },
        outputs: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn child_arguments_follow_protocol() {
        let src = SequenceSource::Synthetic {
            frames: 100,
            objects: 5,
            count: 2,
            seed: 9,
        };
        let args = child_args(
            &src,
            &["synth-000".into(), "synth-001".into()],
            std::path::Path::new("/tmp/r.json"),
            0,
            &RunOptions::default(),
        );
        let args: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
        assert_eq!(
            &args[..8],
            &["--mode", "weak", "--cores", "1", "--report", "json", "--out", "/tmp/r.json"]
        );
        let joined = args.join(" ");
        assert!(joined.contains("--synthetic 100,5,2 --seed 9"));
        assert!(joined.contains("--sequences synth-000,synth-001"));
        assert!(!joined.contains("--pin"));
    }

    #[test]
    fn missing_executable_is_an_error() {
        let opts = ThroughputOptions {
            exe: "/nonexistent/motsort".into(),
            run: RunOptions::default(),
        };
        let src = SequenceSource::MotSuite { seed: 0 };
        assert!(run_throughput(&src, &["KITTI-13".into()], 1, 1, &opts).is_err());
        assert!(run_throughput(&src, &[], 1, 1, &opts).is_err());
    }

    #[test]
    fn failing_children_mark_the_report_partial() {
        // `false` exits 1 without writing a report.
        let Ok(exe) = which_false() else { return };
        let opts = ThroughputOptions {
            exe,
            run: RunOptions::default(),
        };
        let src = SequenceSource::MotSuite { seed: 0 };
        let run = run_throughput(&src, &["KITTI-13".into()], 2, 1, &opts).unwrap();
        assert!(run.report.partial);
        assert_eq!(run.report.child_exit_codes, vec![Some(1), Some(1)]);
        assert_eq!(run.report.frames, 0);
    }

    fn which_false() -> Result<PathBuf, ()> {
        ["/bin/false", "/usr/bin/false"]
            .iter()
            .map(PathBuf::from)
            .find(|p| p.exists())
            .ok_or(())
    }
}
