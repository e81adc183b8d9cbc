//! Single-pass streaming clustering driven by a per-feature level of
//! similarity.
//!
//! Points arrive one at a time. Each is compared feature by feature with the
//! centroid of every existing cluster using a ratio similarity
//! (`100 * value / centroid`); a feature matches when the ratio lies within
//! `[strictness, 200 - strictness]`. A cluster qualifies when enough features
//! match, and the point joins the best qualifying cluster or founds a new
//! one. The number of clusters is never fixed in advance.
//!
//! ```
//! use simstream::{run_stream, Config, DataPoint};
//!
//! let config = Config::new(60.0, 3).unwrap();
//! let points = [[10.0, 20.0, 30.0], [11.0, 19.0, 29.0], [90.0, 2.0, 5.0]]
//!     .into_iter()
//!     .enumerate()
//!     .map(|(i, f)| DataPoint::new(i as u64, f.to_vec(), &config).unwrap());
//! let (state, _) = run_stream(config, points).unwrap();
//! assert_eq!(state.clusters().len(), 2);
//! ```

pub mod cli;
pub mod engine;
pub mod ingest;
pub mod model;
pub mod similarity;
pub mod snapshot;

pub use engine::{resume_stream, run_stream, should_match_features, EngineError, StreamError};
pub use model::{
    AssignmentOutcome, Cluster, ClusterState, Config, DataPoint, DecisionPath, InvariantViolation,
    MatchProfile, ValidationError,
};
