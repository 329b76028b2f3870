//! SORT (Simple Online and Realtime Tracking) built on fixed-size small
//! matrices, plus a harness that measures it under strong, weak and
//! throughput scaling.
//!
//! The pipeline per frame is: Kalman [`kalman::predict`] for every track,
//! IoU cost matrix and Hungarian [`assignment::solve`], Kalman
//! [`kalman::update`] for matched tracks, spawn for unmatched detections,
//! then reaping and emission. [`tracker::TrackerSet`] owns that loop;
//! [`bench`] times it.

pub mod assignment;
pub mod bench;
pub mod cli;
pub mod kalman;
pub mod mot_io;
pub mod smallmat;
pub mod tracker;

pub use assignment::{solve, AssignmentResult, CostMatrix};
pub use kalman::{KalmanModel, KalmanState, Observation};
pub use mot_io::Sequence;
pub use smallmat::{Mat, Vector};
pub use tracker::{BBox, FrameDetections, FrameEmissions, TrackerConfig, TrackerSet};
