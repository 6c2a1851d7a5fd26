//! Event reporting from crowdsourced photos.
//!
//! Workers upload photos of an event (fire, flood, damaged infrastructure)
//! to a task. Each photo arrives with its capture time, GPS position, local
//! keypoint descriptors and a global feature vector. The platform
//!
//! * rejects photos whose predicted class does not match the task
//!   ([`ptp`]), either immediately (online tasks) or by plurality vote at
//!   close (offline tasks);
//! * groups accepted photos into near-duplicate sets with a streaming
//!   [`atree::ATree`], one tree layer per constraint (time, position,
//!   visual);
//! * hands one representative per group to the requester in an
//!   [`model::AggregationReport`].
//!
//! [`service`] wraps this in a durable, concurrent platform with an HTTP
//! front end; [`oracle`] scores a tree against the exact maximum
//! independent set of its similarity graph; [`simulator`] generates
//! labelled streams.
//!
//! The `examples/` directory has one runnable program per capability:
//! `stream_order`, `haversine_pairing`, `keypoint_matching`,
//! `online_filtering`, `offline_vote`, `oracle_coverage`, `simulate_campus`,
//! `crash_recovery`, `http_service` and `external_predictor`.

pub mod atree;
pub mod config;
pub mod model;
pub mod oracle;
pub mod ptp;
pub mod service;
pub mod similarity;
pub mod simulator;

pub use atree::ATree;
pub use model::{AggregationReport, ClassRegistry, Submission, TaskSpec, Verdict};
pub use service::Platform;
