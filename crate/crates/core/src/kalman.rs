//! Constant-velocity Kalman filter over bounding boxes.
//!
//! The state is `[cx, cy, s, r, vcx, vcy, vs]`: box center, area, aspect
//! ratio and the velocities of the first three. Only the first four are
//! observed.

use thiserror::Error;

use crate::smallmat::{
    self, ew_binary, inverse_spd, matmul, matvec, transpose, EwOp, LinalgError, Mat, Vector,
};
use crate::tracker::BBox;

pub const STATE_DIM: usize = 7;
pub const OBS_DIM: usize = 4;

/// Default diagonal of the initial covariance. Velocities are unobserved,
/// so their variance starts high.
pub const INITIAL_COVARIANCE: [f64; STATE_DIM] = [10.0, 10.0, 10.0, 10.0, 1e4, 1e4, 1e4];
pub const PROCESS_NOISE: [f64; STATE_DIM] = [1.0, 1.0, 1.0, 1.0, 0.01, 0.01, 1e-4];
pub const OBSERVATION_NOISE: [f64; OBS_DIM] = [1.0, 1.0, 10.0, 10.0];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KalmanError {
    #[error("degenerate box [{x1}, {y1}, {x2}, {y2}]")]
    InvalidBox { x1: f64, y1: f64, x2: f64, y2: f64 },
    #[error("state has no valid box (area {area}, aspect {aspect})")]
    InvalidState { area: f64, aspect: f64 },
    #[error("filter diverged: {0}")]
    Divergence(#[source] LinalgError),
    #[error("filter diverged: non-finite state")]
    NonFinite,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Optional control term `B·u` added during prediction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Control {
    /// `B`, 7×4.
    pub gain: Mat,
    /// `u`, length 4.
    pub input: Vector,
}

/// The constant model matrices shared by every track.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanModel {
    /// `F`, 7×7.
    pub transition: Mat,
    /// `H`, 4×7.
    pub observation: Mat,
    /// `Q`, 7×7.
    pub process_noise: Mat,
    /// `R`, 4×4.
    pub observation_noise: Mat,
    pub control: Option<Control>,
}

impl KalmanModel {
    pub fn constant_velocity() -> Self {
        Self::with_noise(&PROCESS_NOISE, &OBSERVATION_NOISE)
    }

    pub fn with_noise(process: &[f64; STATE_DIM], observation: &[f64; OBS_DIM]) -> Self {
        let mut f = Mat::identity(STATE_DIM);
        for i in 0..3 {
            f[(i, i + 4)] = 1.0;
        }
        let mut h = Mat::zeros(OBS_DIM, STATE_DIM).expect("static shape");
        for i in 0..OBS_DIM {
            h[(i, i)] = 1.0;
        }
        KalmanModel {
            transition: f,
            observation: h,
            process_noise: Mat::diag(process),
            observation_noise: Mat::diag(observation),
            control: None,
        }
    }

    /// Attaches a control term. `gain` must be 7×4 and `input` length 4.
    pub fn with_control(mut self, gain: Mat, input: Vector) -> Result<Self, KalmanError> {
        if gain.shape() != (STATE_DIM, OBS_DIM) || input.len() != OBS_DIM {
            return Err(LinalgError::DimensionMismatch {
                op: "control",
                left: gain.shape(),
                right: (input.len(), 1),
            }
            .into());
        }
        self.control = Some(Control { gain, input });
        Ok(self)
    }
}

impl Default for KalmanModel {
    fn default() -> Self {
        Self::constant_velocity()
    }
}

/// Measurement `z = [cx, cy, s, r]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation(Vector);

impl Observation {
    /// Panics unless `s > 0` and `r > 0`; use [`bbox_to_z`] for checked input.
    pub fn new(cx: f64, cy: f64, area: f64, aspect: f64) -> Self {
        assert!(area > 0.0 && aspect > 0.0, "observation needs positive area and aspect");
        Observation(Vector::from_slice(&[cx, cy, area, aspect]).expect("static shape"))
    }

    pub fn z(&self) -> &Vector {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanState {
    pub x: Vector,
    pub p: Mat,
}

impl KalmanState {
    /// A fresh state at the observed box with zero velocity.
    pub fn from_observation(obs: &Observation, initial_covariance: &[f64; STATE_DIM]) -> Self {
        let mut x = Vector::zeros(STATE_DIM).expect("static shape");
        x.as_mut_slice()[..OBS_DIM].copy_from_slice(obs.z().as_slice());
        KalmanState {
            x,
            p: Mat::diag(initial_covariance),
        }
    }

    pub fn bbox(&self) -> Result<BBox, KalmanError> {
        x_to_bbox(&self.x)
    }
}

pub fn bbox_to_z(b: &BBox) -> Result<Observation, KalmanError> {
    let w = b.x2 - b.x1;
    let h = b.y2 - b.y1;
    if !(w > 0.0 && h > 0.0) || !w.is_finite() || !h.is_finite() {
        return Err(KalmanError::InvalidBox {
            x1: b.x1,
            y1: b.y1,
            x2: b.x2,
            y2: b.y2,
        });
    }
    Ok(Observation(
        Vector::from_slice(&[b.x1 + w / 2.0, b.y1 + h / 2.0, w * h, w / h]).expect("static shape"),
    ))
}

/// Converts the first four state entries back to corners. The score is 0.
pub fn x_to_bbox(x: &Vector) -> Result<BBox, KalmanError> {
    let (cx, cy, s, r) = (x[0], x[1], x[2], x[3]);
    if !(s > 0.0 && r > 0.0) || !(s * r).is_finite() || !cx.is_finite() || !cy.is_finite() {
        return Err(KalmanError::InvalidState { area: s, aspect: r });
    }
    let w = (s * r).sqrt();
    let h = s / w;
    Ok(BBox::new(cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0, 0.0))
}

/// Propagates the state one frame: `x' = F·x (+ B·u)`, `P' = F·P·Fᵀ + Q`.
pub fn predict(st: &KalmanState, m: &KalmanModel) -> KalmanState {
    let mut x = st.x;
    // Keep the predicted area positive.
    if x[2] + x[6] <= 0.0 {
        x[6] = 0.0;
    }
    let mut x = matvec(&m.transition, &x).expect("static shape");
    if let Some(c) = &m.control {
        let bu = matvec(&c.gain, &c.input).expect("static shape");
        x = ew_binary(EwOp::Add, &x, &bu).expect("static shape");
    }
    let fp = matmul(&m.transition, &st.p).expect("static shape");
    let fpft = matmul(&fp, &transpose(&m.transition)).expect("static shape");
    let mut p = ew_binary(EwOp::Add, &fpft, &m.process_noise).expect("static shape");
    p.symmetrize().expect("square");
    KalmanState { x, p }
}

/// Fuses an observation into the state.
///
/// `K = P·Hᵀ·S⁻¹` with `S = H·P·Hᵀ + R`; `P' = (I − K·H)·P`. Fails with
/// [`KalmanError::Divergence`] when `S` is not positive definite and with
/// [`KalmanError::NonFinite`] when the result overflows.
pub fn update(
    st: &KalmanState,
    m: &KalmanModel,
    obs: &Observation,
) -> Result<KalmanState, KalmanError> {
    let hx = matvec(&m.observation, &st.x)?;
    let y = ew_binary(EwOp::Sub, obs.z(), &hx)?;
    let pht = matmul(&st.p, &transpose(&m.observation))?;
    let hpht = matmul(&m.observation, &pht)?;
    let mut s = ew_binary(EwOp::Add, &hpht, &m.observation_noise)?;
    s.symmetrize()?;
    let s_inv = inverse_spd(&s).map_err(KalmanError::Divergence)?;
    let k = matmul(&pht, &s_inv)?;
    let x = ew_binary(EwOp::Add, &st.x, &matvec(&k, &y)?)?;
    let kh = matmul(&k, &m.observation)?;
    let i_kh = ew_binary(EwOp::Sub, &Mat::identity(STATE_DIM), &kh)?;
    let mut p = matmul(&i_kh, &st.p)?;
    p.symmetrize()?;
    if !x.is_finite() || !p.is_finite() {
        return Err(KalmanError::NonFinite);
    }
    Ok(KalmanState { x, p })
}

/// Convenience for tests and examples: `H·x` as an observation vector.
pub fn observe(st: &KalmanState, m: &KalmanModel) -> Vector {
    smallmat::matvec(&m.observation, &st.x).expect("static shape")
}
