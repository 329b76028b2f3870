use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::smallmat::{inverse_spd, Mat};
use crate::tracker::{Phase, PhaseTimer};

/// Accumulated nanoseconds per pipeline phase.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub t_predict: u64,
    pub t_assign: u64,
    pub t_update: u64,
    pub t_spawn: u64,
    pub t_output: u64,
}

impl PhaseTimings {
    pub fn total(&self) -> u64 {
        self.t_predict + self.t_assign + self.t_update + self.t_spawn + self.t_output
    }

    pub fn add(&mut self, other: &PhaseTimings) {
        self.t_predict += other.t_predict;
        self.t_assign += other.t_assign;
        self.t_update += other.t_update;
        self.t_spawn += other.t_spawn;
        self.t_output += other.t_output;
    }

    fn slot(&mut self, phase: Phase) -> &mut u64 {
        match phase {
            Phase::Predict => &mut self.t_predict,
            Phase::Assign => &mut self.t_assign,
            Phase::Update => &mut self.t_update,
            Phase::Spawn => &mut self.t_spawn,
            Phase::Output => &mut self.t_output,
        }
    }
}

/// One frame's phase times, with spawn folded into output as the
/// "output prep + trackers update" term of the timing model.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FrameSample {
    pub predict: f64,
    pub assign: f64,
    pub update: f64,
    pub output: f64,
    pub frame: f64,
}

/// Scoped per-phase timer: each lap charges the time since the previous
/// lap to the phase that just finished.
#[derive(Debug)]
pub struct PhaseClock {
    last: Instant,
    frame_start: Instant,
    current: PhaseTimings,
    pub totals: PhaseTimings,
    pub loop_ns: u64,
    pub samples: Vec<FrameSample>,
}

impl Default for PhaseClock {
    fn default() -> Self {
        let now = Instant::now();
        PhaseClock {
            last: now,
            frame_start: now,
            current: PhaseTimings::default(),
            totals: PhaseTimings::default(),
            loop_ns: 0,
            samples: Vec::new(),
        }
    }
}

impl PhaseClock {
    pub fn with_capacity(frames: usize) -> Self {
        PhaseClock {
            samples: Vec::with_capacity(frames),
            ..Self::default()
        }
    }

    #[inline]
    pub fn start_frame(&mut self) {
        self.current = PhaseTimings::default();
        self.frame_start = Instant::now();
        self.last = self.frame_start;
    }

    #[inline]
    pub fn end_frame(&mut self) {
        let frame = self.frame_start.elapsed().as_nanos() as u64;
        self.loop_ns += frame;
        self.totals.add(&self.current);
        let c = &self.current;
        self.samples.push(FrameSample {
            predict: c.t_predict as f64,
            assign: c.t_assign as f64,
            update: c.t_update as f64,
            output: (c.t_spawn + c.t_output) as f64,
            frame: frame as f64,
        });
    }
}

impl PhaseTimer for PhaseClock {
    #[inline]
    fn lap(&mut self, phase: Phase) {
        let now = Instant::now();
        *self.current.slot(phase) += now.duration_since(self.last).as_nanos() as u64;
        self.last = now;
    }
}

/// Mean cost of one clock read, in nanoseconds.
pub fn measure_timer_overhead() -> f64 {
    const N: u32 = 10_000;
    let start = Instant::now();
    let mut last = start;
    for _ in 0..N {
        last = std::hint::black_box(Instant::now());
    }
    last.duration_since(start).as_nanos() as f64 / N as f64
}

/// `T_frame ≈ a·T_predict + b·T_assign + c·T_update + d·T_output`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingModel {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    /// Root-mean-square residual of the fit, in the samples' unit; absent
    /// for degenerate fits.
    pub residual: Option<f64>,
    pub samples: usize,
    /// Set when the samples could not determine all four coefficients; the
    /// coefficients are then all 1.
    pub degenerate: bool,
}

impl TimingModel {
    fn unit(samples: usize) -> Self {
        TimingModel {
            a: 1.0,
            b: 1.0,
            c: 1.0,
            d: 1.0,
            residual: None,
            samples,
            degenerate: true,
        }
    }

    pub fn coefficients(&self) -> [f64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    pub fn predict_frame(&self, s: &FrameSample) -> f64 {
        self.a * s.predict + self.b * s.assign + self.c * s.update + self.d * s.output
    }
}

fn regressors(s: &FrameSample) -> [f64; 4] {
    [s.predict, s.assign, s.update, s.output]
}

/// Least-squares fit of frame time against the four phase times, through
/// the origin. Needs at least four samples and linearly independent phase
/// columns; otherwise returns a degenerate unit model.
pub fn fit_timing_model(samples: &[FrameSample]) -> TimingModel {
    let n = samples.len();
    if n < 4 {
        return TimingModel::unit(n);
    }
    // Column scaling keeps the normal equations well conditioned.
    let mut norms = [0.0f64; 4];
    for s in samples {
        for (k, v) in regressors(s).iter().enumerate() {
            norms[k] += v * v;
        }
    }
    if norms.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return TimingModel::unit(n);
    }
    let norms = norms.map(f64::sqrt);
    let mut ata = Mat::zeros(4, 4).expect("static shape");
    let mut aty = [0.0f64; 4];
    for s in samples {
        let r = regressors(s);
        let z: [f64; 4] = std::array::from_fn(|k| r[k] / norms[k]);
        for i in 0..4 {
            aty[i] += z[i] * s.frame;
            for j in 0..4 {
                ata[(i, j)] += z[i] * z[j];
            }
        }
    }
    let Ok(inv) = inverse_spd(&ata) else {
        return TimingModel::unit(n);
    };
    // A near-singular Gram matrix (unit-diagonal after scaling) shows up as
    // a huge inverse.
    if !(inv.max_abs() < 1e10) {
        return TimingModel::unit(n);
    }
    let coef: [f64; 4] =
        std::array::from_fn(|i| (0..4).map(|j| inv[(i, j)] * aty[j]).sum::<f64>() / norms[i]);
    let mut model = TimingModel {
        a: coef[0],
        b: coef[1],
        c: coef[2],
        d: coef[3],
        residual: None,
        samples: n,
        degenerate: false,
    };
    let sse: f64 = samples
        .iter()
        .map(|s| (s.frame - model.predict_frame(s)).powi(2))
        .sum();
    model.residual = Some((sse / n as f64).sqrt());
    model
}

/// Share of modelled frame time spent in each phase group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseShares {
    pub predict: f64,
    pub assign: f64,
    pub update: f64,
    /// Spawn plus output preparation.
    pub output: f64,
}

impl PhaseShares {
    /// Weights each phase total by its fitted coefficient (unit weights when
    /// the fit is degenerate) and normalizes.
    pub fn fitted(phases: &PhaseTimings, model: &TimingModel) -> Self {
        let w = if model.degenerate {
            [1.0; 4]
        } else {
            model.coefficients()
        };
        let raw = [
            w[0] * phases.t_predict as f64,
            w[1] * phases.t_assign as f64,
            w[2] * phases.t_update as f64,
            w[3] * (phases.t_spawn + phases.t_output) as f64,
        ];
        let total: f64 = raw.iter().sum();
        let share = |v: f64| if total > 0.0 { v / total } else { 0.0 };
        PhaseShares {
            predict: share(raw[0]),
            assign: share(raw[1]),
            update: share(raw[2]),
            output: share(raw[3]),
        }
    }
}
