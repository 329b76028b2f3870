//! The per-frame SORT update: predict, associate, update, spawn, reap, emit.

use rayon::prelude::*;
use rayon::ThreadPool;
use thiserror::Error;

use crate::assignment::{AssignmentResult, CostMatrix, HungarianSolver};
use crate::kalman::{
    self, bbox_to_z, KalmanModel, KalmanState, Observation, INITIAL_COVARIANCE, STATE_DIM,
};

/// Axis-aligned box in pixel corners, with a detection score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
    pub score: f64,
}

impl BBox {
    pub const fn new(x1: f64, y1: f64, x2: f64, y2: f64, score: f64) -> Self {
        BBox {
            x1,
            y1,
            x2,
            y2,
            score,
        }
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn is_finite(&self) -> bool {
        self.x1.is_finite() && self.y1.is_finite() && self.x2.is_finite() && self.y2.is_finite()
    }
}

/// Intersection over union; 0 for disjoint or degenerate pairs.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let w = (a.x2.min(b.x2) - a.x1.max(b.x1)).max(0.0);
    let h = (a.y2.min(b.y2) - a.y1.max(b.y1)).max(0.0);
    let inter = w * h;
    let union = a.area() + b.area() - inter;
    if !(union > 0.0) {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrackerError {
    #[error("frame index {got} does not follow {previous}")]
    NonMonotonicFrame { previous: u32, got: u32 },
    #[error("iou threshold {0} outside [0, 1]")]
    InvalidIouThreshold(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackerConfig {
    /// Frames a track may go unmatched before it is dropped.
    pub max_age: u32,
    /// Consecutive matches before a track is emitted.
    pub min_hits: u32,
    /// Matches below this IoU are rejected after assignment.
    pub iou_threshold: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            max_age: 1,
            min_hits: 3,
            iou_threshold: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameDetections {
    /// 1-based frame number.
    pub frame_index: u32,
    pub dets: Vec<BBox>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Emission {
    pub id: u64,
    pub bbox: BBox,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameEmissions {
    pub frame_index: u32,
    pub tracks: Vec<Emission>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum FrameStatus {
    Unmatched,
    Matched,
    Born,
    Invalid,
}

#[derive(Debug, Clone)]
pub struct Track {
    pub id: u64,
    pub state: KalmanState,
    pub time_since_update: u32,
    pub hits: u32,
    pub hit_streak: u32,
    pub age: u32,
    last_score: f64,
    predicted: Option<BBox>,
    status: FrameStatus,
}

impl Track {
    fn new(id: u64, obs: &Observation, score: f64, init_cov: &[f64; STATE_DIM]) -> Self {
        Track {
            id,
            state: KalmanState::from_observation(obs, init_cov),
            time_since_update: 0,
            hits: 0,
            hit_streak: 0,
            age: 0,
            last_score: score,
            predicted: None,
            status: FrameStatus::Born,
        }
    }

    fn predict(&mut self, model: &KalmanModel) {
        self.state = kalman::predict(&self.state, model);
        self.predicted = self.state.bbox().ok();
        self.status = FrameStatus::Unmatched;
    }
}

/// How a frame's data-parallel phases run.
#[derive(Clone, Copy, Default)]
pub enum Exec<'a> {
    #[default]
    Serial,
    /// Per-track prediction and cost-matrix rows are split across the pool.
    Pool(&'a ThreadPool),
}

/// The timed sections of one frame, in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Predict,
    Assign,
    Update,
    Spawn,
    Output,
}

/// Receives a lap at the end of each [`Phase`] of [`TrackerSet::step_with`].
pub trait PhaseTimer {
    fn lap(&mut self, phase: Phase);
}

/// A timer that records nothing.
pub struct NoTimer;

impl PhaseTimer for NoTimer {
    #[inline(always)]
    fn lap(&mut self, _phase: Phase) {}
}

/// Output of [`associate`]. Indices refer to the input slices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Association {
    /// `(detection, prediction)` pairs, sorted by detection.
    pub matches: Vec<(usize, usize)>,
    pub unmatched_dets: Vec<usize>,
    pub unmatched_preds: Vec<usize>,
}

#[derive(Debug, Default)]
struct AssocScratch {
    cost: CostMatrix,
    solver: HungarianSolver,
    result: AssignmentResult,
}

fn associate_into(
    dets: &[BBox],
    preds: &[BBox],
    iou_threshold: f64,
    exec: Exec<'_>,
    scratch: &mut AssocScratch,
    out: &mut Association,
) {
    out.matches.clear();
    out.unmatched_dets.clear();
    out.unmatched_preds.clear();
    if dets.is_empty() || preds.is_empty() {
        out.unmatched_dets.extend(0..dets.len());
        out.unmatched_preds.extend(0..preds.len());
        return;
    }
    let m = preds.len();
    scratch.cost.reset(dets.len(), m);
    let fill = |(i, row): (usize, &mut [f64])| {
        for (c, p) in row.iter_mut().zip(preds) {
            *c = 1.0 - iou(&dets[i], p);
        }
    };
    match exec {
        Exec::Serial => scratch.cost.as_mut_slice().chunks_mut(m).enumerate().for_each(fill),
        Exec::Pool(pool) => pool.install(|| {
            scratch
                .cost
                .as_mut_slice()
                .par_chunks_mut(m)
                .enumerate()
                .for_each(fill)
        }),
    }
    scratch
        .solver
        .solve_into(&scratch.cost, &mut scratch.result)
        .expect("1 - IoU is finite and nonnegative");

    out.unmatched_dets.extend_from_slice(&scratch.result.unmatched_rows);
    out.unmatched_preds.extend_from_slice(&scratch.result.unmatched_cols);
    for &(d, p) in &scratch.result.pairs {
        if 1.0 - scratch.cost.get(d, p) < iou_threshold {
            out.unmatched_dets.push(d);
            out.unmatched_preds.push(p);
        } else {
            out.matches.push((d, p));
        }
    }
    out.unmatched_dets.sort_unstable();
    out.unmatched_preds.sort_unstable();
}

/// Matches detections to predicted boxes by maximum total IoU, then
/// rejects any pair whose IoU is below `iou_threshold`.
pub fn associate(dets: &[BBox], preds: &[BBox], iou_threshold: f64) -> Association {
    let mut out = Association::default();
    associate_into(
        dets,
        preds,
        iou_threshold,
        Exec::Serial,
        &mut AssocScratch::default(),
        &mut out,
    );
    out
}

/// All live tracks of one sequence.
#[derive(Debug)]
pub struct TrackerSet {
    tracks: Vec<Track>,
    next_id: u64,
    config: TrackerConfig,
    model: KalmanModel,
    initial_covariance: [f64; STATE_DIM],
    last_frame: u32,
    valid_dets: Vec<(BBox, Observation)>,
    det_boxes: Vec<BBox>,
    preds: Vec<BBox>,
    assoc: Association,
    scratch: AssocScratch,
}

impl TrackerSet {
    pub fn new(config: TrackerConfig) -> Result<Self, TrackerError> {
        Self::with_model(config, KalmanModel::default(), INITIAL_COVARIANCE)
    }

    pub fn with_model(
        config: TrackerConfig,
        model: KalmanModel,
        initial_covariance: [f64; STATE_DIM],
    ) -> Result<Self, TrackerError> {
        if !(0.0..=1.0).contains(&config.iou_threshold) {
            return Err(TrackerError::InvalidIouThreshold(config.iou_threshold));
        }
        Ok(TrackerSet {
            tracks: Vec::new(),
            next_id: 1,
            config,
            model,
            initial_covariance,
            last_frame: 0,
            valid_dets: Vec::new(),
            det_boxes: Vec::new(),
            preds: Vec::new(),
            assoc: Association::default(),
            scratch: AssocScratch::default(),
        })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    pub fn step(&mut self, frame: &FrameDetections) -> Result<Vec<Emission>, TrackerError> {
        self.step_with(frame, Exec::Serial, &mut NoTimer)
    }

    /// Advances one frame and returns the confirmed, currently matched
    /// tracks in id order.
    pub fn step_with<T: PhaseTimer>(
        &mut self,
        frame: &FrameDetections,
        exec: Exec<'_>,
        timer: &mut T,
    ) -> Result<Vec<Emission>, TrackerError> {
        if frame.frame_index <= self.last_frame {
            return Err(TrackerError::NonMonotonicFrame {
                previous: self.last_frame,
                got: frame.frame_index,
            });
        }
        self.last_frame = frame.frame_index;

        let model = &self.model;
        match exec {
            Exec::Serial => self.tracks.iter_mut().for_each(|t| t.predict(model)),
            Exec::Pool(pool) => {
                pool.install(|| self.tracks.par_iter_mut().for_each(|t| t.predict(model)))
            }
        }
        self.tracks.retain(|t| t.predicted.is_some());
        self.preds.clear();
        self.preds.extend(self.tracks.iter().filter_map(|t| t.predicted));
        timer.lap(Phase::Predict);

        self.valid_dets.clear();
        self.valid_dets.extend(
            frame
                .dets
                .iter()
                .filter_map(|d| bbox_to_z(d).ok().map(|z| (*d, z))),
        );
        self.det_boxes.clear();
        self.det_boxes.extend(self.valid_dets.iter().map(|(b, _)| *b));
        associate_into(
            &self.det_boxes,
            &self.preds,
            self.config.iou_threshold,
            exec,
            &mut self.scratch,
            &mut self.assoc,
        );
        timer.lap(Phase::Assign);

        for &(d, p) in &self.assoc.matches {
            let (det, obs) = &self.valid_dets[d];
            let track = &mut self.tracks[p];
            match kalman::update(&track.state, &self.model, obs) {
                Ok(state) => {
                    track.state = state;
                    track.hits += 1;
                    track.hit_streak += 1;
                    track.time_since_update = 0;
                    track.last_score = det.score;
                    track.status = FrameStatus::Matched;
                }
                Err(_) => track.status = FrameStatus::Invalid,
            }
        }
        timer.lap(Phase::Update);

        for &d in &self.assoc.unmatched_dets {
            let (det, obs) = &self.valid_dets[d];
            self.tracks
                .push(Track::new(self.next_id, obs, det.score, &self.initial_covariance));
            self.next_id += 1;
        }
        timer.lap(Phase::Spawn);

        let max_age = self.config.max_age;
        for t in &mut self.tracks {
            t.age += 1;
            if t.status == FrameStatus::Unmatched {
                t.time_since_update += 1;
                t.hit_streak = 0;
            }
        }
        self.tracks
            .retain(|t| t.status != FrameStatus::Invalid && t.time_since_update <= max_age);

        let min_hits = self.config.min_hits;
        let warmup = frame.frame_index <= min_hits;
        let mut out = Vec::new();
        let mut invalid = false;
        for t in &mut self.tracks {
            if t.time_since_update < 1 && (t.hit_streak >= min_hits || warmup) {
                match t.state.bbox() {
                    Ok(mut bbox) => {
                        bbox.score = t.last_score;
                        out.push(Emission { id: t.id, bbox });
                    }
                    Err(_) => {
                        t.status = FrameStatus::Invalid;
                        invalid = true;
                    }
                }
            }
        }
        if invalid {
            self.tracks.retain(|t| t.status != FrameStatus::Invalid);
        }
        timer.lap(Phase::Output);
        Ok(out)
    }
}

/// Runs a fresh tracker over `frames` in order.
pub fn run_sequence(
    frames: &[FrameDetections],
    config: TrackerConfig,
) -> Result<Vec<FrameEmissions>, TrackerError> {
    let mut ts = TrackerSet::new(config)?;
    frames
        .iter()
        .map(|f| {
            Ok(FrameEmissions {
                frame_index: f.frame_index,
                tracks: ts.step(f)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(x1: f64, y1: f64, x2: f64, y2: f64) -> BBox {
        BBox::new(x1, y1, x2, y2, 1.0)
    }

    fn frame(i: u32, dets: Vec<BBox>) -> FrameDetections {
        FrameDetections {
            frame_index: i,
            dets,
        }
    }

    #[test]
    fn iou_examples() {
        let a = b(3.0, 4.0, 10.0, 20.0);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&b(0.0, 0.0, 1.0, 1.0), &b(5.0, 5.0, 6.0, 6.0)), 0.0);
        let v = iou(&b(0.0, 0.0, 2.0, 2.0), &b(1.0, 0.0, 3.0, 2.0));
        assert!((v - 2.0 / 6.0).abs() < 1e-15);
        assert_eq!(iou(&b(0.0, 0.0, 0.0, 0.0), &b(0.0, 0.0, 0.0, 0.0)), 0.0);
    }

    #[test]
    fn associate_identical_boxes() {
        let boxes = vec![b(0.0, 0.0, 10.0, 10.0), b(50.0, 50.0, 60.0, 70.0), b(100.0, 0.0, 120.0, 5.0)];
        let a = associate(&boxes, &boxes, 0.3);
        assert_eq!(a.matches, vec![(0, 0), (1, 1), (2, 2)]);
        assert!(a.unmatched_dets.is_empty() && a.unmatched_preds.is_empty());
    }

    #[test]
    fn associate_empty_sides() {
        let dets = vec![b(0.0, 0.0, 1.0, 1.0), b(2.0, 2.0, 3.0, 3.0)];
        let a = associate(&dets, &[], 0.3);
        assert_eq!(a.unmatched_dets, vec![0, 1]);
        assert!(a.matches.is_empty());
        let a = associate(&[], &dets, 0.3);
        assert_eq!(a.unmatched_preds, vec![0, 1]);
    }

    #[test]
    fn associate_cross_iou() {
        // IoU(d0,p0)=0.8, IoU(d1,p1)=0.7, cross pairs ~0.1 or less.
        let p0 = b(0.0, 0.0, 10.0, 10.0);
        let d0 = b(0.0, 0.0, 10.0, 8.0); // 80 / 100
        let p1 = b(8.0, 0.0, 18.0, 10.0);
        let d1 = b(8.0, 0.0, 15.0, 10.0); // 70 / 100
        assert!((iou(&d0, &p0) - 0.8).abs() < 1e-12);
        assert!((iou(&d1, &p1) - 0.7).abs() < 1e-12);
        assert!(iou(&d0, &p1) < 0.15 && iou(&d1, &p0) < 0.15);
        let a = associate(&[d0, d1], &[p0, p1], 0.3);
        assert_eq!(a.matches, vec![(0, 0), (1, 1)]);
    }

    #[test]
    fn associate_demotes_low_iou_pairs() {
        let a = associate(&[b(0.0, 0.0, 10.0, 10.0)], &[b(9.0, 9.0, 19.0, 19.0)], 0.3);
        assert!(a.matches.is_empty());
        assert_eq!(a.unmatched_dets, vec![0]);
        assert_eq!(a.unmatched_preds, vec![0]);
    }

    #[test]
    fn first_frame_emits_all_detections() {
        let cfg = TrackerConfig {
            min_hits: 1,
            ..TrackerConfig::default()
        };
        let mut ts = TrackerSet::new(cfg).unwrap();
        let out = ts
            .step(&frame(
                1,
                vec![b(0.0, 0.0, 10.0, 10.0), b(20.0, 20.0, 30.0, 40.0), b(100.0, 100.0, 150.0, 120.0)],
            ))
            .unwrap();
        assert_eq!(out.iter().map(|e| e.id).collect::<Vec<_>>(), vec![1, 2, 3]);
        assert_eq!(out[1].bbox.x1, 20.0);
        assert_eq!(out[1].bbox.y2, 40.0);
    }

    #[test]
    fn static_box_keeps_its_id() {
        let frames: Vec<_> = (1..=10).map(|i| frame(i, vec![b(10.0, 10.0, 50.0, 90.0)])).collect();
        let out = run_sequence(&frames, TrackerConfig::default()).unwrap();
        for f in &out {
            assert_eq!(f.tracks.len(), 1, "frame {}", f.frame_index);
            assert_eq!(f.tracks[0].id, 1);
        }
    }

    #[test]
    fn lost_track_is_replaced_by_new_id() {
        let cfg = TrackerConfig::default();
        let present = |i| frame(i, vec![b(10.0, 10.0, 50.0, 90.0)]);
        let mut frames: Vec<_> = (1..=5).map(present).collect();
        // Gone for max_age + 1 frames.
        for i in 6..=(5 + cfg.max_age + 1) {
            frames.push(frame(i, vec![]));
        }
        let back = 5 + cfg.max_age + 2;
        for i in back..back + 5 {
            frames.push(present(i));
        }
        let mut ts = TrackerSet::new(cfg).unwrap();
        let mut ids = Vec::new();
        for f in &frames {
            ts.step(f).unwrap();
            ids.push(ts.tracks().iter().map(|t| t.id).collect::<Vec<_>>());
        }
        assert_eq!(ids[4], vec![1]);
        assert!(ids[(5 + cfg.max_age) as usize].is_empty());
        assert_eq!(*ids.last().unwrap(), vec![2]);
    }

    #[test]
    fn short_gap_within_max_age_keeps_id() {
        let cfg = TrackerConfig {
            max_age: 3,
            min_hits: 1,
            ..TrackerConfig::default()
        };
        let present = |i| frame(i, vec![b(10.0, 10.0, 50.0, 90.0)]);
        let frames = vec![present(1), present(2), frame(3, vec![]), frame(4, vec![]), present(5)];
        let out = run_sequence(&frames, cfg).unwrap();
        assert!(out[2].tracks.is_empty());
        assert_eq!(out[4].tracks[0].id, 1);
    }

    #[test]
    fn rejects_non_monotonic_frames() {
        let mut ts = TrackerSet::new(TrackerConfig::default()).unwrap();
        ts.step(&frame(2, vec![])).unwrap();
        assert_eq!(
            ts.step(&frame(2, vec![])).unwrap_err(),
            TrackerError::NonMonotonicFrame { previous: 2, got: 2 }
        );
    }

    #[test]
    fn rejects_bad_threshold() {
        let cfg = TrackerConfig {
            iou_threshold: 1.5,
            ..TrackerConfig::default()
        };
        assert!(TrackerSet::new(cfg).is_err());
    }

    #[test]
    fn degenerate_detections_are_ignored() {
        let mut ts = TrackerSet::new(TrackerConfig::default()).unwrap();
        let out = ts
            .step(&frame(1, vec![b(5.0, 5.0, 5.0, 9.0), b(0.0, 0.0, 4.0, 4.0)]))
            .unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(ts.tracks().len(), 1);
    }

    #[test]
    fn empty_sequence() {
        assert!(run_sequence(&[], TrackerConfig::default()).unwrap().is_empty());
    }
}
