//! Vision-based row navigation for trellised fields.
//!
//! The crate is organized around the navigation pipeline:
//!
//! - [`geometry`]: coordinate frames, pinhole projection and the
//!   image↔ground-plane homography behind the bird's-eye view.
//! - [`annotation`]: projects a recorded centimeter-grade GPS path into
//!   recorded frames and renders Gaussian ground-truth heatmaps.
//! - [`perception`]: heatmap→path extraction, the pluggable heatmap provider
//!   interface (with a geometry-backed synthetic provider), and side-view
//!   depth end-of-row detection.
//! - [`control`]: BEV reference fitting and the feedback-linearized PD
//!   velocity controller.
//! - [`navigator`]: the five-phase row-tracking / row-switching state machine.
//! - [`simulator`]: deterministic kinematic world, synthetic sensors and the
//!   trial runner.
//! - [`evaluation`]: trajectory deviation metrics and per-trial summaries.

pub mod annotation;
pub mod config;
pub mod control;
pub mod evaluation;
pub mod geometry;
pub mod navigator;
pub mod perception;
pub mod simulator;
