//! Lasserre-hierarchy SDP relaxations of quadratic integer programs with PSD
//! objectives, with seed-based propagation rounding and spectral guarantee
//! audits.
//!
//! The crate is organized as a pipeline:
//!
//! * [`graph`] — weighted graphs, Laplacians, cut objectives;
//! * [`linalg`] — dense symmetric eigensolvers and spectral profiles;
//! * [`lasserre`] — moment-index enumeration, SDP assembly and solving,
//!   vector extraction, consistency checking;
//! * [`colsel`] — column-subset selection for low-rank approximation;
//! * [`rounding`] — seed-set selection and label-propagation rounding;
//! * [`problems`] — one formulation-and-pipeline per partitioning problem;
//! * [`oracle`] — brute-force optima, concentration radii, audit harness.

pub mod colsel;
pub mod graph;
pub mod lasserre;
pub mod linalg;
pub mod oracle;
pub mod problems;
pub mod rounding;
