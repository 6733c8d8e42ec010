//! Driven generalized Frenkel-Kontorova chains.
//!
//! Configurations are `(N, M)`-periodic lifts evolving under
//! `du_j/dt = -V2(u_{j-1}, u_j) - V1(u_j, u_{j+1}) + F(t)`. The crate covers
//! integration, the zero-set calculus of cooperative linear systems,
//! intersection functionals on translation-invariant ensembles, ordered
//! invariant measures and the classification of DC asymptotics.

pub mod aubry_mather;
pub mod error;
pub mod integrator;
pub mod interp;
pub mod measures;
pub mod model;
pub mod par;
pub mod seed;
pub mod sliding;
pub mod zeroset;

pub use error::{FkError, Result};
pub use model::{ChainState, Dynamics, Forcing, Interaction, Potential};
