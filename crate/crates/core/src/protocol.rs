//! The subspace-pair proof system: instance generation, honest prover,
//! the V* verifier, and exact completeness/soundness evaluation.
//!
//! An instance is a pair of subspaces (A, B) of F_2^n with B inside the dual
//! of A. The promise dims are (n/2, n/2) for yes-instances and (n/2, n/4) or
//! (n/4, n/2) for no-instances. V* accepts the all-zero input with
//! probability ||Pi_B H Pi_A |proof>||^2, which for the honest proof |A> is
//! exactly 1 and is capped at 2^{-n/4} on no-instances.

use crate::error::{Error, Result};
use crate::gf2::{BitVector, Subspace};
use crate::oracle::{MembershipOracle, OracleSide, ProgramStep, VerifierProgram};
use crate::state::{fwht_normalized, lambda_max, HermitianOp, PureState};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Which promise case an instance falls in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum InstanceKind {
    /// dim(A) = dim(B) = n/2: the zero string is in the language.
    #[serde(rename = "YES")]
    Yes,
    /// dim(A) = n/2, dim(B) = n/4.
    #[serde(rename = "NO_AB")]
    NoAb,
    /// dim(A) = n/4, dim(B) = n/2.
    #[serde(rename = "NO_BA")]
    NoBa,
}

impl InstanceKind {
    pub fn dims(&self, n: usize) -> (usize, usize) {
        match self {
            InstanceKind::Yes => (n / 2, n / 2),
            InstanceKind::NoAb => (n / 2, n / 4),
            InstanceKind::NoBa => (n / 4, n / 2),
        }
    }

    pub fn is_yes(&self) -> bool {
        matches!(self, InstanceKind::Yes)
    }
}

impl std::fmt::Display for InstanceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            InstanceKind::Yes => "YES",
            InstanceKind::NoAb => "NO_AB",
            InstanceKind::NoBa => "NO_BA",
        })
    }
}

/// A problem instance: the subspace pair behind the oracles.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub n: usize,
    pub kind: InstanceKind,
    #[serde(rename = "A")]
    pub a: Subspace,
    #[serde(rename = "B")]
    pub b: Subspace,
}

impl Instance {
    pub fn new(n: usize, kind: InstanceKind, a: Subspace, b: Subspace) -> Result<Self> {
        if n % 4 != 0 || n == 0 {
            return Err(Error::Precondition {
                op: "Instance::new",
                reason: format!("n = {n} is not a positive multiple of 4"),
            });
        }
        let (da, db) = kind.dims(n);
        if a.ambient_dim() != n || b.ambient_dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: a.ambient_dim().max(b.ambient_dim()),
            });
        }
        if a.dim() != da || b.dim() != db {
            return Err(Error::Precondition {
                op: "Instance::new",
                reason: format!(
                    "dims ({}, {}) do not match kind {kind} expecting ({da}, {db})",
                    a.dim(),
                    b.dim()
                ),
            });
        }
        if !b.is_subspace_of(&a.dual()) {
            return Err(Error::Precondition {
                op: "Instance::new",
                reason: "B is not contained in the dual of A".into(),
            });
        }
        Ok(Self { n, kind, a, b })
    }

    /// Fresh instrumentation-ready oracles for this instance.
    pub fn oracles(&self) -> (MembershipOracle, MembershipOracle) {
        (
            MembershipOracle::new(self.a.clone()),
            MembershipOracle::new(self.b.clone()),
        )
    }
}

/// The instance generator: on a multiple of 4 it outputs a yes-instance with
/// a uniformly random A (and B its dual); otherwise bottom (`None`).
pub fn generator_g(n: usize, seed: u64) -> Option<Instance> {
    if n == 0 || n % 4 != 0 {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = Subspace::sample_with(n, n / 2, &mut rng).ok()?;
    let b = a.dual();
    Some(Instance::new(n, InstanceKind::Yes, a, b).expect("generator invariants"))
}

/// Samples an instance of the given kind (no-instances are used by the
/// soundness experiments; the generator itself only emits yes-instances).
pub fn sample_instance(n: usize, kind: InstanceKind, seed: u64) -> Result<Instance> {
    if n % 4 != 0 || n == 0 {
        return Err(Error::Precondition {
            op: "sample_instance",
            reason: format!("n = {n} is not a positive multiple of 4"),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match kind {
        InstanceKind::Yes => {
            let a = Subspace::sample_with(n, n / 2, &mut rng)?;
            let b = a.dual();
            Instance::new(n, kind, a, b)
        }
        InstanceKind::NoAb => {
            let a = Subspace::sample_with(n, n / 2, &mut rng)?;
            let b = a.dual().sample_subspace_of(n / 4, &mut rng)?;
            Instance::new(n, kind, a, b)
        }
        InstanceKind::NoBa => {
            let b = Subspace::sample_with(n, n / 2, &mut rng)?;
            let a = b.dual().sample_subspace_of(n / 4, &mut rng)?;
            Instance::new(n, kind, a, b)
        }
    }
}

/// The honest prover: the subspace state |A> on yes-instances.
pub fn honest_prove(inst: &Instance) -> Result<PureState> {
    if !inst.kind.is_yes() {
        return Err(Error::ProveOnNoInstance);
    }
    crate::state::subspace_state(&inst.a)
}

/// Outcome of one verifier evaluation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerifierReport {
    pub accept_probability: f64,
    /// First step with zero pass probability, when rejection is certain.
    pub step_rejected: Option<usize>,
    pub queries_used: u64,
}

/// Exact acceptance probability of the four-step V* procedure: reject unless
/// x is all-zero, A-membership test, global Hadamard, B-membership test.
pub fn verify_vstar(inst: &Instance, x: &BitVector, proof: &PureState) -> Result<VerifierReport> {
    if proof.n_qubits() != inst.n {
        return Err(Error::DimensionMismatch {
            expected: inst.n,
            got: proof.n_qubits(),
        });
    }
    if x.len() != inst.n {
        return Err(Error::DimensionMismatch {
            expected: inst.n,
            got: x.len(),
        });
    }
    if !x.is_zero() {
        return Ok(VerifierReport {
            accept_probability: 0.0,
            step_rejected: Some(1),
            queries_used: 0,
        });
    }
    let mut amps = proof.amplitudes().to_vec();
    mask_members(&mut amps, &inst.a);
    let after_a: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
    fwht_normalized(&mut amps);
    mask_members(&mut amps, &inst.b);
    let p: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
    let step_rejected = if after_a <= 0.0 {
        Some(2)
    } else if p <= 0.0 {
        Some(4)
    } else {
        None
    };
    Ok(VerifierReport {
        accept_probability: p.clamp(0.0, 1.0),
        step_rejected,
        queries_used: 2,
    })
}

fn mask_members(amps: &mut [Complex64], s: &Subspace) {
    for (z, a) in amps.iter_mut().enumerate() {
        if !s.contains_index(z as u64) {
            *a = Complex64::ZERO;
        }
    }
}

/// The V* accept operator Pi_A H Pi_B H Pi_A as a matrix-free Hermitian op.
pub struct VstarAcceptOp {
    dim: usize,
    in_a: Vec<bool>,
    in_b: Vec<bool>,
}

impl VstarAcceptOp {
    pub fn new(inst: &Instance) -> Self {
        let dim = 1usize << inst.n;
        Self {
            dim,
            in_a: (0..dim).map(|z| inst.a.contains_index(z as u64)).collect(),
            in_b: (0..dim).map(|z| inst.b.contains_index(z as u64)).collect(),
        }
    }
}

impl HermitianOp for VstarAcceptOp {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply_into(&self, v: &[Complex64], out: &mut [Complex64]) {
        out.copy_from_slice(v);
        for (a, keep) in out.iter_mut().zip(&self.in_a) {
            if !keep {
                *a = Complex64::ZERO;
            }
        }
        fwht_normalized(out);
        for (a, keep) in out.iter_mut().zip(&self.in_b) {
            if !keep {
                *a = Complex64::ZERO;
            }
        }
        fwht_normalized(out);
        for (a, keep) in out.iter_mut().zip(&self.in_a) {
            if !keep {
                *a = Complex64::ZERO;
            }
        }
    }
}

/// The optimum of V* acceptance over all proofs: the top eigenvalue of
/// Pi_A H Pi_B H Pi_A. Equals 2^{dim A + dim B - n}, i.e. 2^{-n/4} on
/// no-instances and 1 on yes-instances.
pub fn max_cheat_probability(inst: &Instance) -> Result<f64> {
    lambda_max(&VstarAcceptOp::new(inst))
}

/// The canonical verifier: A-test, global Hadamard, B-test.
pub fn vstar_program() -> VerifierProgram {
    VerifierProgram {
        name: "vstar".into(),
        n_flags: 2,
        steps: vec![
            ProgramStep::Query {
                side: OracleSide::A,
                flag: 0,
            },
            ProgramStep::HadamardData,
            ProgramStep::Query {
                side: OracleSide::B,
                flag: 1,
            },
        ],
        accept_flags: vec![0, 1],
    }
}

/// V* with the tests in swapped order: B-test in the Hadamard basis first,
/// then the A-test back in the computational basis. Accepts the honest proof
/// with probability 1 and has the same soundness optimum as V*.
pub fn vstar_swapped_program() -> VerifierProgram {
    VerifierProgram {
        name: "vstar-swapped".into(),
        n_flags: 2,
        steps: vec![
            ProgramStep::HadamardData,
            ProgramStep::Query {
                side: OracleSide::B,
                flag: 0,
            },
            ProgramStep::HadamardData,
            ProgramStep::Query {
                side: OracleSide::A,
                flag: 1,
            },
        ],
        accept_flags: vec![0, 1],
    }
}

/// V* preceded by a pair of self-cancelling dummy A-queries on a scratch
/// flag; acceptance is untouched but the query count doubles.
pub fn vstar_dummy_program() -> VerifierProgram {
    VerifierProgram {
        name: "vstar-dummy".into(),
        n_flags: 3,
        steps: vec![
            ProgramStep::Query {
                side: OracleSide::A,
                flag: 2,
            },
            ProgramStep::Query {
                side: OracleSide::A,
                flag: 2,
            },
            ProgramStep::Query {
                side: OracleSide::A,
                flag: 0,
            },
            ProgramStep::HadamardData,
            ProgramStep::Query {
                side: OracleSide::B,
                flag: 1,
            },
        ],
        accept_flags: vec![0, 1],
    }
}

/// Looks a verifier program up by name.
pub fn verifier_program(name: &str) -> Result<VerifierProgram> {
    match name {
        "vstar" => Ok(vstar_program()),
        "vstar-swapped" => Ok(vstar_swapped_program()),
        "vstar-dummy" => Ok(vstar_dummy_program()),
        other => Err(Error::Parse(format!(
            "unknown verifier {other:?}; known: vstar, vstar-swapped, vstar-dummy"
        ))),
    }
}

pub const VERIFIER_NAMES: [&str; 3] = ["vstar", "vstar-swapped", "vstar-dummy"];
