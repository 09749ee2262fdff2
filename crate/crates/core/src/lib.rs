//! Query selection for single-shot batch active learning under domain shift.
//!
//! Given a labeled source pool and an unlabeled target pool, the strategies in
//! this crate choose `K` target points to label so that a distance-based
//! upper bound on the target risk is as small as possible:
//!
//! * [`medoids`] minimizes the mean distance from targets to the labeled set
//!   (exact greedy, PAM refinement, and a forest + branch-and-bound variant
//!   for large pools),
//! * [`pldm`] minimizes the gap between Lipschitz upper and lower envelopes
//!   built from pseudo-labels,
//! * [`strategies`] holds the usual baselines and the criterion evaluators,
//! * [`theory`] evaluates the closed-form bound terms,
//! * [`harness`] runs small synthetic domain-shift experiments.

pub mod error;
pub mod forest;
pub mod harness;
pub mod io;
pub mod medoids;
mod par;
pub mod pldm;
pub mod points;
pub mod rng;
pub mod split;
pub mod strategies;
pub mod theory;

pub use error::{Error, Result};
pub use points::{dist_to_set, pairwise_distance, LabeledPool, Metric, PointSet, Selection};
