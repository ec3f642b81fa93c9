//! Monte Carlo laboratory for finitary random interlacements `FI^{u,T}` on `Z^d`.

pub mod clusters;
pub mod couplings;
pub mod error;
pub mod estimators;
pub mod events;
pub mod exploration;
pub mod fkg;
pub mod fri_process;
pub mod killed_walk;
pub mod lattice;
pub mod renormalization;
pub mod rng;
pub mod stats;

pub use error::{FriError, Result};
