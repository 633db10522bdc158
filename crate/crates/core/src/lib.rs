//! Thermalization of spin chains by repeated system-ancilla collisions and by
//! a Metropolis walk over energy eigenstates, plus the tooling to compare the
//! two.
//!
//! All dynamics run in the energy eigenbasis of the system Hamiltonian with
//! ħ = k_B = 1.

pub mod analysis;
pub mod bath;
pub mod checks;
pub mod collisional;
pub mod error;
pub mod linalg;
pub mod metropolis;
pub mod model;
pub mod states;

pub use analysis::{compare_models, ratio_scan, CompareConfig, ComparisonReport};
pub use collisional::{cm_evolve, CmMode, CollisionConfig, TimeSeries};
pub use error::{Error, Result};
pub use linalg::{ComplexMatrix, EigenSystem, C64};
pub use metropolis::{mc_evolve, McMode, MetropolisConfig};
pub use model::{SpinChainParams, TransitionTable};
