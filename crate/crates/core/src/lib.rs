//! Simulation laboratory for randomly reinforced urns and
//! Poisson-Dirichlet predictive sequences.
//!
//! The crate is organized around pure, deterministic simulators:
//!
//! - **streams**: keyed, splittable uniform random sources. Every number in
//!   an experiment is a pure function of `(master_seed, replication, role,
//!   branch)`, so parallel runs are bit-reproducible at any thread count.
//! - **laws**: nonnegative reinforcement laws with validated moments, and
//!   time-indexed per-color schedules under the equal-mean constraint.
//! - **urn**: two-color and d-color randomly reinforced urns, plus an exact
//!   path-enumeration oracle for small horizons.
//! - **pd**: predictive sequences with discounted occupancy counts on a
//!   finite alphabet.
//! - **clt**: per-trajectory statistics (the scaled prediction errors
//!   `C_n`, `D_n`, `W_n`), limit-variance evaluators, and convergence-rate
//!   diagnostics computed from dense increment storage.
//! - **stable**: ensemble-level tests that the studentized statistics are
//!   conditionally standard normal within slices of the limit proportion,
//!   branching estimators of conditional laws, and synthetic ensembles used
//!   to calibrate the harness.

pub mod clt;
pub mod laws;
pub mod numeric;
pub mod pd;
pub mod report;
pub mod stable;
pub mod streams;
pub mod urn;

pub use laws::{ColorSchedule, Pairing, ReinforcementLaw, ReinforcementSchedule};
pub use streams::{derive_stream, StreamKey, StreamRole, UniformSource};
