//! MOT-challenge detection ingest, result output, and synthetic sequences.
//!
//! Detection and result files share the 10-column MOT15 layout:
//!
//! ```text
//! frame,id,left,top,width,height,conf,x,y,z
//! ```
//!
//! `id` is `-1` in detection files and the track id in result files; the
//! world coordinates `x,y,z` are unused and written as `-1`.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::tracker::{BBox, FrameDetections, FrameEmissions};

#[derive(Debug, Error)]
pub enum MotIoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> MotIoError + '_ {
    move |source| MotIoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// One row of a detection file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetRecord {
    pub frame: u32,
    pub id: i64,
    pub left: f64,
    pub top: f64,
    pub width: f64,
    pub height: f64,
    pub conf: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl DetRecord {
    pub fn bbox(&self) -> BBox {
        BBox::new(
            self.left,
            self.top,
            self.left + self.width,
            self.top + self.height,
            self.conf,
        )
    }
}

/// A parsed video: every frame from 1 to `total_frames`, empty or not.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub name: String,
    pub frames: Vec<FrameDetections>,
    pub total_frames: usize,
    /// Records dropped for nonpositive width or height.
    pub skipped_records: usize,
}

impl Sequence {
    pub fn from_records(name: impl Into<String>, records: &[DetRecord]) -> Self {
        let total_frames = records.iter().map(|r| r.frame as usize).max().unwrap_or(0);
        let mut frames: Vec<FrameDetections> = (1..=total_frames as u32)
            .map(|frame_index| FrameDetections {
                frame_index,
                dets: Vec::new(),
            })
            .collect();
        let mut skipped_records = 0;
        for r in records {
            if r.width > 0.0 && r.height > 0.0 {
                frames[r.frame as usize - 1].dets.push(r.bbox());
            } else {
                skipped_records += 1;
            }
        }
        Sequence {
            name: name.into(),
            frames,
            total_frames,
            skipped_records,
        }
    }

    pub fn detection_count(&self) -> usize {
        self.frames.iter().map(|f| f.dets.len()).sum()
    }

    pub fn max_detections_per_frame(&self) -> usize {
        self.frames.iter().map(|f| f.dets.len()).max().unwrap_or(0)
    }

    /// Drops detections scoring below `threshold`.
    pub fn retain_confident(&mut self, threshold: f64) {
        for f in &mut self.frames {
            f.dets.retain(|d| d.score >= threshold);
        }
    }
}

pub fn parse_det_line(line: &str, line_no: usize) -> Result<DetRecord, MotIoError> {
    let err = |message: String| MotIoError::Parse {
        line: line_no,
        message,
    };
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() != 10 {
        return Err(err(format!("expected 10 comma-separated fields, found {}", fields.len())));
    }
    let num = |i: usize| -> Result<f64, MotIoError> {
        fields[i]
            .parse::<f64>()
            .map_err(|e| err(format!("field {}: {:?}: {e}", i + 1, fields[i])))
    };
    let frame = num(0)?;
    if !(frame >= 1.0) || frame.fract() != 0.0 || frame > u32::MAX as f64 {
        return Err(err(format!("invalid frame number {:?}", fields[0])));
    }
    let id = num(1)?;
    Ok(DetRecord {
        frame: frame as u32,
        id: id as i64,
        left: num(2)?,
        top: num(3)?,
        width: num(4)?,
        height: num(5)?,
        conf: num(6)?,
        x: num(7)?,
        y: num(8)?,
        z: num(9)?,
    })
}

pub fn parse_det_str(name: &str, text: &str) -> Result<Sequence, MotIoError> {
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        records.push(parse_det_line(line, i + 1)?);
    }
    Ok(Sequence::from_records(name, &records))
}

/// Parses a detection file. The sequence is named after the directory two
/// levels up for the standard `<name>/det/det.txt` layout, otherwise after
/// the file stem.
pub fn parse_det_file(path: &Path) -> Result<Sequence, MotIoError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_det_str(&sequence_name(path), &text)
}

fn sequence_name(path: &Path) -> String {
    let is_det_layout = path.file_name().is_some_and(|f| f == "det.txt")
        && path
            .parent()
            .and_then(Path::file_name)
            .is_some_and(|d| d == "det");
    let named = if is_det_layout {
        path.parent().and_then(Path::parent).and_then(Path::file_name)
    } else {
        path.file_stem()
    };
    named.map_or_else(|| "sequence".to_string(), |n| n.to_string_lossy().into_owned())
}

/// Path of a sequence's detections under the MOT directory layout.
pub fn det_path(seq_dir: &Path, name: &str) -> PathBuf {
    seq_dir.join(name).join("det").join("det.txt")
}

/// Sequence names under `seq_dir` that carry a `det/det.txt`, sorted.
pub fn discover_sequences(seq_dir: &Path) -> Result<Vec<String>, MotIoError> {
    let mut names = Vec::new();
    for entry in fs::read_dir(seq_dir).map_err(io_err(seq_dir))? {
        let entry = entry.map_err(io_err(seq_dir))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if det_path(seq_dir, &name).is_file() {
            names.push(name);
        }
    }
    names.sort();
    Ok(names)
}

/// Renders emissions as MOT result lines, ordered by frame then id.
pub fn render_results(emissions: &[FrameEmissions]) -> String {
    let mut ordered: Vec<&FrameEmissions> = emissions.iter().collect();
    ordered.sort_by_key(|f| f.frame_index);
    let mut out = String::new();
    for f in ordered {
        let mut tracks = f.tracks.clone();
        tracks.sort_by_key(|e| e.id);
        for e in tracks {
            let b = e.bbox;
            writeln!(
                out,
                "{},{},{:.2},{:.2},{:.2},{:.2},1,-1,-1,-1",
                f.frame_index,
                e.id,
                b.x1,
                b.y1,
                b.width().max(0.0),
                b.height().max(0.0)
            )
            .expect("writing to a String");
        }
    }
    out
}

pub fn write_results(path: &Path, emissions: &[FrameEmissions]) -> Result<(), MotIoError> {
    fs::write(path, render_results(emissions)).map_err(io_err(path))
}

/// Name, frame count and peak object count of the eleven MOT15 training
/// videos used in the scaling study. The frame counts total 5500.
pub const MOT15_SEQUENCES: [(&str, usize, usize); 11] = [
    ("PETS09-S2L1", 795, 8),
    ("TUD-Campus", 71, 6),
    ("TUD-Stadtmitte", 179, 7),
    ("ETH-Bahnhof", 1000, 9),
    ("ETH-Sunnyday", 354, 8),
    ("ETH-Pedcross2", 837, 9),
    ("KITTI-13", 340, 5),
    ("KITTI-17", 145, 7),
    ("ADL-Rundle-6", 525, 11),
    ("ADL-Rundle-8", 654, 11),
    ("Venice-2", 600, 13),
];

const FRAME_WIDTH: f64 = 1920.0;
const FRAME_HEIGHT: f64 = 1080.0;

/// Parameters of a synthetic linear-motion sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    pub name: String,
    pub n_frames: usize,
    pub n_objects: usize,
    pub seed: u64,
    /// Peak horizontal speed in px/frame.
    pub speed: f64,
    /// Probability that an object's detection is missing from a frame.
    pub dropout: f64,
    /// Uniform corner noise amplitude in px.
    pub noise: f64,
}

impl SynthParams {
    pub fn new(n_frames: usize, n_objects: usize, seed: u64) -> Self {
        SynthParams {
            name: format!("synth-{seed}"),
            n_frames,
            n_objects,
            seed,
            speed: 1.0,
            dropout: 0.0,
            noise: 0.5,
        }
    }
}

/// A synthetic sequence plus the true object index behind every detection
/// (`truth[f][k]` labels `frames[f].dets[k]`).
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSequence {
    pub sequence: Sequence,
    pub truth: Vec<Vec<usize>>,
}

/// Objects move in separate horizontal lanes, bouncing off the frame edges,
/// so their boxes never overlap.
pub fn synth_with_truth(params: &SynthParams) -> SyntheticSequence {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let n = params.n_objects.max(1);
    let lane = FRAME_HEIGHT / n as f64;
    struct Obj {
        cx: f64,
        cy: f64,
        w: f64,
        h: f64,
        vx: f64,
        vy: f64,
        lane_lo: f64,
        lane_hi: f64,
    }
    let mut objs: Vec<Obj> = (0..n)
        .map(|i| {
            let h = lane.min(200.0) * rng.gen_range(0.5..0.8);
            let w = h * rng.gen_range(0.35..0.6);
            let lane_lo = i as f64 * lane + h / 2.0 + 1.0;
            let lane_hi = ((i + 1) as f64 * lane - h / 2.0 - 1.0).max(lane_lo);
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            Obj {
                cx: rng.gen_range(w..FRAME_WIDTH - w),
                cy: rng.gen_range(lane_lo..=lane_hi),
                w,
                h,
                vx: sign * params.speed * rng.gen_range(0.5..=1.0),
                vy: params.speed * rng.gen_range(-0.1..=0.1),
                lane_lo,
                lane_hi,
            }
        })
        .collect();

    let mut frames = Vec::with_capacity(params.n_frames);
    let mut truth = Vec::with_capacity(params.n_frames);
    for f in 0..params.n_frames {
        let mut dets = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for (k, o) in objs.iter_mut().enumerate() {
            if f > 0 {
                o.cx += o.vx;
                o.cy += o.vy;
                if o.cx - o.w / 2.0 < 0.0 || o.cx + o.w / 2.0 > FRAME_WIDTH {
                    o.vx = -o.vx;
                    o.cx += 2.0 * o.vx;
                }
                if o.cy < o.lane_lo || o.cy > o.lane_hi {
                    o.vy = -o.vy;
                    o.cy = o.cy.clamp(o.lane_lo, o.lane_hi);
                }
            }
            if params.dropout > 0.0 && rng.gen_bool(params.dropout.min(1.0)) {
                continue;
            }
            let mut jitter = || {
                if params.noise > 0.0 {
                    rng.gen_range(-params.noise..=params.noise)
                } else {
                    0.0
                }
            };
            let x1 = o.cx - o.w / 2.0 + jitter();
            let y1 = o.cy - o.h / 2.0 + jitter();
            let x2 = o.cx + o.w / 2.0 + jitter();
            let y2 = o.cy + o.h / 2.0 + jitter();
            let score = rng.gen_range(0.5..1.0);
            dets.push(BBox::new(x1, y1, x2, y2, score));
            labels.push(k);
        }
        frames.push(FrameDetections {
            frame_index: f as u32 + 1,
            dets,
        });
        truth.push(labels);
    }
    SyntheticSequence {
        sequence: Sequence {
            name: params.name.clone(),
            total_frames: frames.len(),
            frames,
            skipped_records: 0,
        },
        truth,
    }
}

/// Deterministic linear-motion sequence of `n_frames` with up to
/// `n_objects` boxes per frame.
pub fn synth_sequence(n_frames: usize, n_objects: usize, motion_seed: u64) -> Sequence {
    synth_with_truth(&SynthParams::new(n_frames, n_objects, motion_seed)).sequence
}

/// Eleven synthetic sequences shaped like [`MOT15_SEQUENCES`]: same names,
/// frame counts and peak object counts.
pub fn mot_sized_suite(seed: u64) -> Vec<Sequence> {
    MOT15_SEQUENCES
        .iter()
        .enumerate()
        .map(|(i, &(name, frames, objects))| {
            let mut p = SynthParams::new(frames, objects, seed.wrapping_add(i as u64));
            p.name = name.to_string();
            synth_with_truth(&p).sequence
        })
        .collect()
}
