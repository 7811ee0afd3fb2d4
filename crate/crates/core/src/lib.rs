//! Multiple instance multi-resolution fusion.
//!
//! Learns a monotone normalized fuzzy measure from bag-level labels over
//! multi-resolution, multi-source data with an evolutionary algorithm, then
//! fuses sources per instance with the discrete Choquet integral. Includes a
//! synthetic scenario generator and ROC/AUC/RMSE scoring.
//!
//! Pipeline sketch:
//!
//! ```no_run
//! use mimrf::{
//!     ea::{train, EAParams},
//!     fusion_eval::{fuse, roc_auc, SelectionMode},
//!     mil_data::load_dataset,
//! };
//!
//! let dataset = load_dataset("train.json").unwrap();
//! let outcome = train(&dataset, &EAParams { seed: 1, ..EAParams::default() }).unwrap();
//! let test = load_dataset("test.json").unwrap();
//! let instances: Vec<_> = test.bags.iter().flat_map(|b| b.instances.clone()).collect();
//! let result = fuse(&outcome.measure, &outcome.scaler, &instances, SelectionMode::Max).unwrap();
//! ```

pub mod choquet;
pub mod ea;
pub mod error;
pub mod fusion_eval;
pub mod fuzzy_measure;
pub mod mil_data;
pub mod model;
pub mod objective;
pub mod source_tools;

pub use choquet::{choquet_integral, SourceScaler};
pub use ea::{train, EAParams, TrainOutcome, TrainingTrace};
pub use error::{MimrfError, Result};
pub use fusion_eval::{fuse, rmse, roc_auc, FusionResult, SelectionMode};
pub use fuzzy_measure::{FuzzyMeasure, Interval, Subset};
pub use mil_data::{load_dataset, save_dataset, synthesize_dataset, Bag, CandidateSet, Dataset};
pub use model::{load_model, save_model, TrainedModel};
pub use objective::{total_objective, total_objective_general, ObjectiveBreakdown};
