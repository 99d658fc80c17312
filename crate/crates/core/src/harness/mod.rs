//! Synthetic-scene harness: config, scene generation, shift recovery, the
//! end-to-end pipeline demo, the metric-sensitivity benchmark, and the
//! selftest battery.

pub mod bench;
pub mod config;
pub mod pipeline;
pub mod recover;
pub mod scene;
pub mod selftest;

pub use bench::{assign_bench, BenchRow};
pub use config::HarnessConfig;
pub use pipeline::{run_pipeline, Report};
pub use recover::recover_shift;
pub use scene::{gen_scene, gen_scene_matched, Scene};
