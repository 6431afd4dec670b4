//! Exact desk-scale simulation of subspace-state proof systems.
//!
//! The crate computes acceptance probabilities of provers, verifiers, and
//! pirates exactly on small instances, instruments oracle query mass, and
//! applies the cloneable-verifier transformations while tracking
//! completeness/soundness parameters.
//!
//! Layers, bottom up:
//!
//! - [`gf2`]: word-packed linear algebra over F_2 (bases, duals, membership,
//!   uniform subspace sampling, enumeration).
//! - [`state`]: exact statevectors, subspace states, the global Hadamard,
//!   accept operators, and eigenvalue extraction.
//! - [`oracle`]: coherent membership oracles with query counting, per-query
//!   mass instrumentation, and oracle-replacement hybrids.
//! - [`protocol`]: the subspace-pair proof system (instance generation,
//!   honest prover, the V* verifier, exact soundness optima).
//! - [`piracy`]: the two-verifier piracy game, built-in pirate strategies,
//!   the random-query measurement, and counterfeiting experiments.
//! - [`calculus`]: toy verifiers with designated cloneable witnesses and the
//!   amplification / product-test / repetition / unentanglement pipeline.
//! - [`npcand`]: the candidate proof system for NP instances with idealized
//!   primitives (oracle-backed obfuscation, trusted-setup mock NIZK).

pub mod calculus;
pub mod error;
pub mod gf2;
pub mod npcand;
pub mod oracle;
pub mod piracy;
pub mod protocol;
pub mod seeds;
pub mod state;

pub use error::{Error, Result};
pub use gf2::{BitVector, Subspace};
pub use state::{accept_probability, subspace_state, AcceptOperator, Ensemble, PureState, TOL};
