//! Corpus I/O, training, evaluation and the model file.

pub mod config;
pub mod cost;
pub mod evaluate;
pub mod manifest;
pub mod model;
pub mod train;
pub mod verify;
pub mod wav;

pub use config::{CalibrationConfig, Config};
pub use cost::{build_cost_report, FullCostReport};
pub use evaluate::{run_evaluate, ClipResult, EvalOptions, EvalReport};
pub use manifest::{Manifest, ManifestEntry, Split};
pub use model::Model;
pub use train::{run_train, TrainSummary};
pub use wav::{load_wav, parse_wav, save_wav};
pub use verify::{verify_clip, VerifyReport};
