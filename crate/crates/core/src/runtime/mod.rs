//! Streaming engine, weight container, latency accounting and run
//! configuration.

pub mod bench;
pub mod bundle;
pub mod config;
pub mod container;
pub mod delay;
pub mod engine;
pub mod evaluate;
pub mod report;

pub use bench::{bench, synthetic_speech};
pub use bundle::{init_dense, init_random, BundleConfig, ModelBundle, Preset};
pub use config::RunConfig;
pub use container::{read_container, write_container, Encoding, Tensor, TensorEntry};
pub use delay::{delay_budget, delay_budget_lookup, delay_budget_ms};
pub use evaluate::{analyze, approximate_track, loss_eval, LossEvalOptions};
pub use engine::{convert_offline, convert_pipelined, convert_streaming, Session, SessionOptions};
pub use report::{LatencyReport, Stages, Timings};
