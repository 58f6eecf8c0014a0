//! Detection of bound entanglement for bipartite qudits.
//!
//! The crate builds magic-simplex (Bell-diagonal) states, tests the
//! positivity of their partial transpose, and evaluates the maximum
//! complementarity protocol over complete sets of mutually unbiased bases;
//! a negative witness value 2 - I_{d+1} on a PPT state certifies bound
//! entanglement. A statistical simulator reproduces the corresponding
//! photon-coincidence counting experiment.

pub mod expsim;
pub mod mubs;
pub mod numkernel;
pub mod search;
pub mod simplex;
pub mod witness;
