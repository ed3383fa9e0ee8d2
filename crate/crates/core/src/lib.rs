//! Meta-learning structure recovery for families of Ising models.
//!
//! Several related Ising models share a common sparse graph. Pooling the
//! samples of `K` auxiliary tasks in one ℓ1-regularized logistic regression
//! per node recovers the union of their supports; a novel task is then
//! estimated with each node's regression restricted to that union.
//!
//! Modules:
//! - [`ising`]: model types, exact enumeration, conditional law, node losses.
//! - [`generator`]: random graphs, mixed couplings and task families.
//! - [`gibbs`]: Gibbs sampling.
//! - [`solver`]: pooled and restricted ℓ1 node regressions with KKT certificates.
//! - [`recovery`]: the two-step procedure, λ schedules and scoring.
//! - [`diagnostics`]: Fisher matrices, dependency/incoherence constants and
//!   the perturbation-symmetry quantity.
//! - [`experiment`]: seeded synthetic experiments.
//! - [`io`]: text file formats.

pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod generator;
pub mod gibbs;
pub mod io;
pub mod ising;
pub mod par;
pub mod recovery;
pub mod seed;
pub mod solver;

pub use error::{Error, Result};
pub use generator::{DeltaSpec, TaskFamily};
pub use ising::{IsingParameter, NodeView, SampleMatrix};
pub use par::Exec;
pub use recovery::{RecoveryResult, ReconcileRule, SignedEdgeSet};
pub use solver::{SolverConfig, SolverReport};
