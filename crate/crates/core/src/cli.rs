//! Command-line driver behind the `motsort` binary.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use thiserror::Error;

use crate::bench::{
    self, report, run_strong, run_sweep, run_throughput, run_weak, BenchError, BenchRun,
    ReportFormat, RunOptions, SequenceSource, ThroughputOptions,
};
use crate::mot_io::{self, MotIoError};
use crate::tracker::{run_sequence, TrackerConfig, TrackerError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CliMode {
    /// Track every sequence and write MOT result files.
    Track,
    /// Parallelize inside each frame.
    Strong,
    /// One worker per sequence.
    Weak,
    /// Independent single-core child processes.
    Throughput,
    /// Strong, weak and throughput at each `--cores` value.
    Sweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CliFormat {
    Json,
    Csv,
}

/// `FRAMES,OBJECTS[,COUNT]` for synthetic input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthSpec {
    pub frames: usize,
    pub objects: usize,
    pub count: usize,
}

fn parse_synth(s: &str) -> Result<SynthSpec, String> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    let spec = match parts[..] {
        [frames, objects] => SynthSpec {
            frames,
            objects,
            count: 1,
        },
        [frames, objects, count] => SynthSpec {
            frames,
            objects,
            count,
        },
        _ => return Err("expected FRAMES,OBJECTS[,COUNT]".into()),
    };
    if spec.frames == 0 || spec.objects == 0 || spec.count == 0 {
        return Err("synthetic frame, object and sequence counts must be at least 1".into());
    }
    Ok(spec)
}

fn parse_unit_interval(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{s:?}: {e}"))?;
    if !(0.0..=1.0).contains(&v) {
        return Err(format!("{v} is outside [0, 1]"));
    }
    Ok(v)
}

/// SORT multi-object tracker and strong/weak/throughput scaling benchmark.
///
/// Input is one of `--seq-dir` (MOT layout `<dir>/<name>/det/det.txt`),
/// `--synthetic`, or `--mot-synth`.
#[derive(Debug, Parser)]
#[command(name = "motsort", version)]
pub struct Config {
    #[arg(long, value_enum, default_value_t = CliMode::Track)]
    pub mode: CliMode,

    /// Directory of MOT sequences.
    #[arg(long, group = "source")]
    pub seq_dir: Option<PathBuf>,

    /// Synthetic linear-motion input: FRAMES,OBJECTS[,COUNT].
    #[arg(long, group = "source", value_parser = parse_synth)]
    pub synthetic: Option<SynthSpec>,

    /// Eleven synthetic sequences with MOT15 names and frame counts.
    #[arg(long, group = "source")]
    pub mot_synth: bool,

    /// Restrict to these sequence names (comma-separated, in order).
    #[arg(long, value_delimiter = ',')]
    pub sequences: Vec<String>,

    /// Where `track` writes `<name>.txt` result files.
    #[arg(long, env = "MOTSORT_OUT_DIR")]
    pub out_dir: Option<PathBuf>,

    /// Report destination; `-` is stdout.
    #[arg(long, default_value = "-")]
    pub out: String,

    /// Core count, or a comma-separated list for `sweep`.
    #[arg(long, value_delimiter = ',', default_value = "1",
          value_parser = clap::value_parser!(u32).range(1..))]
    pub cores: Vec<u32>,

    /// Sequences per child in `throughput` mode [default: all, split evenly].
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub files_per_proc: Option<u32>,

    /// Passes over the input list.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    pub replicate: u32,

    #[arg(long, default_value_t = 1)]
    pub max_age: u32,

    #[arg(long, default_value_t = 3)]
    pub min_hits: u32,

    #[arg(long, default_value_t = 0.3, value_parser = parse_unit_interval)]
    pub iou_threshold: f64,

    /// Drop detections below this confidence (no filtering by default).
    #[arg(long)]
    pub conf_threshold: Option<f64>,

    #[arg(long, value_enum, default_value_t = CliFormat::Json)]
    pub report: CliFormat,

    /// Seed for synthetic input.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Pin worker threads to cores.
    #[arg(long)]
    pub pin: bool,

    #[arg(long, hide = true)]
    pub pin_core: Option<usize>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Bench(#[from] BenchError),
    #[error(transparent)]
    Input(#[from] MotIoError),
    #[error(transparent)]
    Tracker(#[from] TrackerError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

impl Config {
    pub fn tracker_config(&self) -> TrackerConfig {
        TrackerConfig {
            max_age: self.max_age,
            min_hits: self.min_hits,
            iou_threshold: self.iou_threshold,
        }
    }

    pub fn run_options(&self) -> RunOptions {
        RunOptions {
            config: self.tracker_config(),
            replication: self.replicate as usize,
            pin: self.pin && self.pin_core.is_none(),
        }
    }

    pub fn source(&self) -> Result<SequenceSource, CliError> {
        if let Some(dir) = &self.seq_dir {
            Ok(SequenceSource::MotDir {
                dir: dir.clone(),
                conf_threshold: self.conf_threshold,
            })
        } else if let Some(s) = self.synthetic {
            Ok(SequenceSource::Synthetic {
                frames: s.frames,
                objects: s.objects,
                count: s.count,
                seed: self.seed,
            })
        } else if self.mot_synth {
            Ok(SequenceSource::MotSuite { seed: self.seed })
        } else {
            Err(CliError::Usage(
                "no input: pass --seq-dir, --synthetic or --mot-synth".into(),
            ))
        }
    }

    fn single_core_count(&self) -> Result<usize, CliError> {
        match self.cores[..] {
            [p] => Ok(p as usize),
            _ => Err(CliError::Usage(
                "--cores takes a single value outside sweep mode".into(),
            )),
        }
    }
}

fn write_out(dest: &str, bytes: &[u8]) -> Result<(), CliError> {
    if dest == "-" {
        let mut stdout = std::io::stdout().lock();
        stdout
            .write_all(bytes)
            .and_then(|_| stdout.flush())
            .map_err(|source| CliError::Io {
                path: "<stdout>".into(),
                source,
            })
    } else {
        fs::write(dest, bytes).map_err(|source| CliError::Io {
            path: dest.into(),
            source,
        })
    }
}

/// Writes `<dir>/<name>.txt` through a `.partial` file that is renamed
/// once complete.
fn write_result_file(dir: &Path, name: &str, text: &str) -> Result<PathBuf, CliError> {
    let path = dir.join(format!("{name}.txt"));
    let partial = dir.join(format!("{name}.txt.partial"));
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| CliError::Io { path, source }
    };
    fs::write(&partial, text).map_err(io(&partial))?;
    fs::rename(&partial, &path).map_err(io(&path))?;
    Ok(path)
}

fn write_outputs(cfg: &Config, run: &BenchRun) -> Result<(), CliError> {
    if let Some(dir) = &cfg.out_dir {
        fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.clone(),
            source,
        })?;
        for out in &run.outputs {
            write_result_file(dir, &out.name, &out.results_text())?;
        }
    }
    Ok(())
}

fn format_of(cfg: &Config) -> ReportFormat {
    match cfg.report {
        CliFormat::Json => ReportFormat::Json,
        CliFormat::Csv => ReportFormat::Csv,
    }
}

/// Runs a parsed configuration.
pub fn run(cfg: &Config) -> Result<(), CliError> {
    if let Some(core) = cfg.pin_core {
        crate::bench::pin_current_thread(core);
    }
    let source = cfg.source()?;
    let names = if cfg.sequences.is_empty() {
        source.names()?
    } else {
        cfg.sequences.clone()
    };
    let opts = cfg.run_options();
    match cfg.mode {
        CliMode::Track => {
            let dir = cfg
                .out_dir
                .as_ref()
                .ok_or_else(|| CliError::Usage("track mode needs --out-dir".into()))?;
            let seqs = source.load(&names)?;
            fs::create_dir_all(dir).map_err(|source| CliError::Io {
                path: dir.clone(),
                source,
            })?;
            for seq in &seqs {
                let emissions = run_sequence(&seq.frames, opts.config)?;
                let path =
                    write_result_file(dir, &seq.name, &mot_io::render_results(&emissions))?;
                if seq.skipped_records > 0 {
                    eprintln!(
                        "warning: {}: skipped {} records with nonpositive extent",
                        seq.name, seq.skipped_records
                    );
                }
                eprintln!("{}: {} frames -> {}", seq.name, seq.total_frames, path.display());
            }
        }
        CliMode::Strong | CliMode::Weak => {
            let p = cfg.single_core_count()?;
            let seqs = source.load(&names)?;
            let run = if cfg.mode == CliMode::Strong {
                run_strong(&seqs, p, &opts)?
            } else {
                run_weak(&seqs, p, &opts)?
            };
            write_outputs(cfg, &run)?;
            warn_degenerate(&run.report);
            write_out(&cfg.out, &report(&run.report, format_of(cfg)))?;
        }
        CliMode::Throughput => {
            let p = cfg.single_core_count()?;
            let k = cfg
                .files_per_proc
                .map_or_else(|| names.len().div_ceil(p).max(1), |k| k as usize);
            let topts = ThroughputOptions::current_exe(opts)?;
            let run = run_throughput(&source, &names, p, k, &topts)?;
            if run.report.partial {
                eprintln!(
                    "warning: partial throughput run, child exit codes {:?}",
                    run.report.child_exit_codes
                );
            }
            write_out(&cfg.out, &report(&run.report, format_of(cfg)))?;
        }
        CliMode::Sweep => {
            let cores: Vec<usize> = cfg.cores.iter().map(|&c| c as usize).collect();
            let topts = ThroughputOptions::current_exe(opts)?;
            let sweep = run_sweep(&source, &names, &cores, &topts)?;
            if !sweep.outputs_consistent() {
                eprintln!("warning: tracking output differs between modes");
            }
            let bytes = match cfg.report {
                CliFormat::Csv => sweep.to_csv().into_bytes(),
                CliFormat::Json => {
                    let mut b = serde_json::to_vec_pretty(&sweep).expect("serializable");
                    b.push(b'\n');
                    b
                }
            };
            write_out(&cfg.out, &bytes)?;
        }
    }
    Ok(())
}

fn warn_degenerate(r: &bench::BenchReport) {
    if r.timing_model.degenerate {
        eprintln!("warning: timing model fit is degenerate; coefficients set to 1");
    }
}

/// Parses `argv` (including the program name) and runs it. Returns the
/// process exit code: 0 on success, 2 on flag errors, 1 otherwise.
pub fn main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cfg = match Config::try_parse_from(argv) {
        Ok(cfg) => cfg,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match run(&cfg) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("motsort: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Result<Config, clap::Error> {
        Config::try_parse_from(std::iter::once("motsort").chain(args.iter().copied()))
    }

    #[test]
    fn defaults() {
        let cfg = parse(&["--mot-synth"]).unwrap();
        assert_eq!(cfg.mode, CliMode::Track);
        assert_eq!(cfg.tracker_config(), TrackerConfig::default());
        assert_eq!(cfg.cores, vec![1]);
        assert_eq!(cfg.replicate, 1);
        assert_eq!(cfg.out, "-");
    }

    #[test]
    fn core_list() {
        let cfg = parse(&["--mode", "sweep", "--cores", "1,18,36,72", "--mot-synth"]).unwrap();
        assert_eq!(cfg.cores, vec![1, 18, 36, 72]);
        assert!(parse(&["--cores", "0"]).is_err());
        let cfg = parse(&["--mode", "weak", "--cores", "1,2", "--mot-synth"]).unwrap();
        assert_eq!(cfg.single_core_count().unwrap_err().exit_code(), 2);
    }

    #[test]
    fn synthetic_spec() {
        assert_eq!(
            parse_synth("100,5").unwrap(),
            SynthSpec {
                frames: 100,
                objects: 5,
                count: 1
            }
        );
        assert_eq!(parse_synth("10,2,3").unwrap().count, 3);
        assert!(parse_synth("10").is_err());
        assert!(parse_synth("0,5").is_err());
    }

    #[test]
    fn sources_are_exclusive() {
        assert!(parse(&["--mot-synth", "--synthetic", "10,2"]).is_err());
        let cfg = parse(&[]).unwrap();
        assert_eq!(cfg.source().unwrap_err().exit_code(), 2);
    }

    #[test]
    fn threshold_range() {
        assert!(parse(&["--iou-threshold", "1.2"]).is_err());
        assert!(parse(&["--iou-threshold", "0.5"]).is_ok());
    }

    #[test]
    fn help_and_bad_flags_exit_codes() {
        assert_eq!(main(["motsort", "--help"]), 0);
        assert_eq!(main(["motsort", "--no-such-flag"]), 2);
        assert_eq!(main(["motsort", "--mode", "track", "--mot-synth"]), 2);
    }
}
