//! Closed-loop 2D occupancy-grid exploration simulator and benchmark
//! harness.
//!
//! A simulated robot with a limited field-of-view range sensor explores an
//! unknown environment by repeatedly scanning, detecting frontiers between
//! known-free and unknown space, and navigating to a selected frontier.
//! Frontier selection is pluggable: nearest-first, an information-gain
//! baseline, a scripted sequence for tests, or an external vision-language
//! chat model speaking a small multimodal wire protocol. Finished runs are
//! scored with a privileged coverage metric and trajectory revisit
//! statistics, and compared across methods in CSV reports.

pub mod eval;
pub mod explorer;
pub mod frontier;
pub mod geom;
pub mod grid;
pub mod planner;
pub mod policy;
pub mod render;
pub mod vlm;

pub use geom::{Cell, Point, Pose};
pub use grid::{BeliefMap, GroundTruthMap, SensorConfig};
