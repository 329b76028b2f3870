use std::ffi::OsString;
use std::path::PathBuf;

use crate::mot_io::{self, MotIoError, Sequence, SynthParams};

/// Where a run's sequences come from. Throughput children rebuild their
/// inputs from this, so it must be expressible as command-line flags.
#[derive(Debug, Clone, PartialEq)]
pub enum SequenceSource {
    /// `<dir>/<name>/det/det.txt` files.
    MotDir {
        dir: PathBuf,
        conf_threshold: Option<f64>,
    },
    /// `count` synthetic sequences named `synth-000`, `synth-001`, ...
    Synthetic {
        frames: usize,
        objects: usize,
        count: usize,
        seed: u64,
    },
    /// Eleven synthetic sequences with the MOT15 names and frame counts.
    MotSuite { seed: u64 },
}

impl SequenceSource {
    pub fn names(&self) -> Result<Vec<String>, MotIoError> {
        Ok(match self {
            SequenceSource::MotDir { dir, .. } => mot_io::discover_sequences(dir)?,
            SequenceSource::Synthetic { count, .. } => {
                (0..*count).map(|i| format!("synth-{i:03}")).collect()
            }
            SequenceSource::MotSuite { .. } => mot_io::MOT15_SEQUENCES
                .iter()
                .map(|(n, _, _)| n.to_string())
                .collect(),
        })
    }

    /// Loads the named sequences, in the given order. Unknown names are an
    /// error.
    pub fn load(&self, names: &[String]) -> Result<Vec<Sequence>, MotIoError> {
        let unknown = |name: &str| MotIoError::Parse {
            line: 0,
            message: format!("unknown sequence {name:?}"),
        };
        match self {
            SequenceSource::MotDir {
                dir,
                conf_threshold,
            } => names
                .iter()
                .map(|n| {
                    let mut seq = mot_io::parse_det_file(&mot_io::det_path(dir, n))?;
                    seq.name = n.clone();
                    if let Some(th) = conf_threshold {
                        seq.retain_confident(*th);
                    }
                    Ok(seq)
                })
                .collect(),
            SequenceSource::Synthetic {
                frames,
                objects,
                count,
                seed,
            } => names
                .iter()
                .map(|n| {
                    let idx = n
                        .strip_prefix("synth-")
                        .and_then(|s| s.parse::<usize>().ok())
                        .filter(|i| i < count)
                        .ok_or_else(|| unknown(n))?;
                    let mut p = SynthParams::new(*frames, *objects, seed.wrapping_add(idx as u64));
                    p.name = n.clone();
                    Ok(mot_io::synth_with_truth(&p).sequence)
                })
                .collect(),
            SequenceSource::MotSuite { seed } => {
                let suite = mot_io::mot_sized_suite(*seed);
                names
                    .iter()
                    .map(|n| {
                        suite
                            .iter()
                            .find(|s| &s.name == n)
                            .cloned()
                            .ok_or_else(|| unknown(n))
                    })
                    .collect()
            }
        }
    }

    pub fn load_all(&self) -> Result<Vec<Sequence>, MotIoError> {
        self.load(&self.names()?)
    }

    /// Flags that make a child process load the same sequences.
    pub fn to_args(&self) -> Vec<OsString> {
        let mut args: Vec<OsString> = Vec::new();
        match self {
            SequenceSource::MotDir {
                dir,
                conf_threshold,
            } => {
                args.push("--seq-dir".into());
                args.push(dir.clone().into_os_string());
                if let Some(th) = conf_threshold {
                    args.push("--conf-threshold".into());
                    args.push(th.to_string().into());
                }
            }
            SequenceSource::Synthetic {
                frames,
                objects,
                count,
                seed,
            } => {
                args.push("--synthetic".into());
                args.push(format!("{frames},{objects},{count}").into());
                args.push("--seed".into());
                args.push(seed.to_string().into());
            }
            SequenceSource::MotSuite { seed } => {
                args.push("--mot-synth".into());
                args.push("--seed".into());
                args.push(seed.to_string().into());
            }
        }
        args
    }
}
