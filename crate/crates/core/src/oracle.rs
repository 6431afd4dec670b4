//! Coherent membership oracles with query counting and per-query mass
//! instrumentation.
//!
//! An oracle call maps |x>|b> to |x>|b xor [x in S]> on the designated flag
//! qubit: a permutation of basis states, so norm preservation is exact. A
//! verifier is a program of (Hadamard | A-query | B-query) steps over a data
//! register plus fresh flag qubits, measured once at the end (deferred
//! measurement), which keeps the evolution unitary between queries — the
//! shape the oracle-replacement hybrid argument telescopes over.

use crate::error::{Error, Result};
use crate::gf2::{BitVector, Subspace};
use crate::state::{hadamard_on_bits, PureState};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Which oracle a query went to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OracleSide {
    A,
    B,
}

impl std::fmt::Display for OracleSide {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            OracleSide::A => "A",
            OracleSide::B => "B",
        })
    }
}

/// A set of the form members(include) \ members(exclude).
#[derive(Clone, Debug)]
pub struct SetDiff {
    pub id: String,
    pub include: Subspace,
    pub exclude: Option<Subspace>,
}

impl SetDiff {
    pub fn subspace(id: impl Into<String>, include: Subspace) -> Self {
        Self {
            id: id.into(),
            include,
            exclude: None,
        }
    }

    pub fn difference(id: impl Into<String>, include: Subspace, exclude: Subspace) -> Self {
        Self {
            id: id.into(),
            include,
            exclude: Some(exclude),
        }
    }

    pub fn contains_index(&self, x: u64) -> bool {
        self.include.contains_index(x)
            && self.exclude.as_ref().is_none_or(|e| !e.contains_index(x))
    }
}

/// One logged oracle application.
#[derive(Clone, Debug)]
pub struct QueryRecord {
    /// 1-based per-oracle query index.
    pub index: u64,
    /// Mass of the query's input state on each registered set, marginalized
    /// over every qubit outside the data register.
    pub masses: Vec<(String, f64)>,
    /// Data-register probability distribution of the input, when snapshots
    /// are enabled.
    pub distribution: Option<Vec<f64>>,
}

/// Append-only log of oracle applications.
#[derive(Clone, Debug, Default)]
pub struct QueryLog {
    records: Vec<QueryRecord>,
}

impl QueryLog {
    pub fn records(&self) -> &[QueryRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// CSV rows (trial, query_index, oracle_id, mass_set_id, mass) at 12
    /// significant digits, without a header.
    pub fn csv_rows(&self, trial: u64, oracle_id: &str) -> Vec<String> {
        let mut rows = Vec::new();
        for rec in &self.records {
            for (set_id, mass) in &rec.masses {
                rows.push(format!(
                    "{trial},{},{oracle_id},{set_id},{}",
                    rec.index,
                    format_sig12(*mass)
                ));
            }
        }
        rows
    }
}

/// Formats with 12 significant digits.
pub fn format_sig12(x: f64) -> String {
    format!("{x:.11e}")
}

/// A membership oracle for a fixed subspace, with instrumentation.
#[derive(Clone, Debug)]
pub struct MembershipOracle {
    subspace: Subspace,
    query_count: u64,
    log: QueryLog,
    mass_sets: Vec<SetDiff>,
    snapshot_distributions: bool,
}

impl MembershipOracle {
    pub fn new(subspace: Subspace) -> Self {
        Self {
            subspace,
            query_count: 0,
            log: QueryLog::default(),
            mass_sets: Vec::new(),
            snapshot_distributions: false,
        }
    }

    pub fn subspace(&self) -> &Subspace {
        &self.subspace
    }

    pub fn query_count(&self) -> u64 {
        self.query_count
    }

    pub fn log(&self) -> &QueryLog {
        &self.log
    }

    /// Registers a mass function evaluated on every subsequent query input.
    pub fn register_mass_set(&mut self, set: SetDiff) {
        self.mass_sets.push(set);
    }

    /// Enables per-query snapshots of the data-register distribution.
    pub fn snapshot_distributions(&mut self, on: bool) {
        self.snapshot_distributions = on;
    }

    /// Classical membership query (counts as one oracle call).
    pub fn contains(&mut self, x: &BitVector) -> Result<bool> {
        if x.len() != self.subspace.ambient_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.subspace.ambient_dim(),
                got: x.len(),
            });
        }
        self.query_count += 1;
        let masses = self
            .mass_sets
            .iter()
            .map(|s| {
                (
                    s.id.clone(),
                    if s.contains_index(x.index()) { 1.0 } else { 0.0 },
                )
            })
            .collect();
        let distribution = self.snapshot_distributions.then(|| {
            let mut dist = vec![0.0; 1usize << self.subspace.ambient_dim()];
            dist[x.index() as usize] = 1.0;
            dist
        });
        self.log.records.push(QueryRecord {
            index: self.query_count,
            masses,
            distribution,
        });
        Ok(self.subspace.contains_index(x.index()))
    }

    /// Coherent application with the flag as the last qubit: the input has
    /// n+1 qubits where n is the ambient dimension.
    pub fn apply(&mut self, psi: &PureState) -> Result<PureState> {
        let n = self.subspace.ambient_dim();
        if psi.n_qubits() != n + 1 {
            return Err(Error::DimensionMismatch {
                expected: n + 1,
                got: psi.n_qubits(),
            });
        }
        let mut out = psi.clone();
        self.apply_raw(out.amps_mut(), 0, n)?;
        Ok(out)
    }

    /// Flips `flag_bit` on basis states whose data bits (low `n` bits after
    /// shifting by `data_offset`) are members. Logs masses and increments
    /// the counter.
    pub(crate) fn apply_raw(
        &mut self,
        amps: &mut [Complex64],
        data_offset: usize,
        flag_bit: usize,
    ) -> Result<QueryRecord> {
        let n = self.subspace.ambient_dim();
        self.query_count += 1;

        let data_mask = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        let data_of = |z: usize| ((z as u64) >> data_offset) & data_mask;

        // Instrument the input before flipping.
        let mut dist = vec![0.0f64; 1usize << n];
        for (z, a) in amps.iter().enumerate() {
            let p = a.norm_sqr();
            if p > 0.0 {
                dist[data_of(z) as usize] += p;
            }
        }
        let masses: Vec<(String, f64)> = self
            .mass_sets
            .iter()
            .map(|s| {
                let m: f64 = dist
                    .iter()
                    .enumerate()
                    .filter(|(x, _)| s.contains_index(*x as u64))
                    .map(|(_, p)| p)
                    .sum();
                (s.id.clone(), m)
            })
            .collect();
        let record = QueryRecord {
            index: self.query_count,
            masses,
            distribution: self.snapshot_distributions.then(|| dist.clone()),
        };
        self.log.records.push(record.clone());

        // The flip itself: swap the flag=0/flag=1 amplitudes of members.
        let flag = 1usize << flag_bit;
        for z in 0..amps.len() {
            if z & flag == 0 && self.subspace.contains_index(data_of(z)) {
                amps.swap(z, z | flag);
            }
        }
        Ok(record)
    }
}

/// Mass of a state on a predicate set, marginalized over every qubit above
/// the data register (flags, ancillas).
pub fn query_mass(psi: &PureState, data_qubits: usize, set: &SetDiff) -> Result<f64> {
    if psi.n_qubits() < data_qubits {
        return Err(Error::DimensionMismatch {
            expected: data_qubits,
            got: psi.n_qubits(),
        });
    }
    if set.include.ambient_dim() != data_qubits {
        return Err(Error::DimensionMismatch {
            expected: data_qubits,
            got: set.include.ambient_dim(),
        });
    }
    let mask = (1u64 << data_qubits) - 1;
    let mut total = 0.0;
    for (z, a) in psi.amplitudes().iter().enumerate() {
        if set.contains_index(z as u64 & mask) {
            total += a.norm_sqr();
        }
    }
    Ok(total)
}

/// One step of a verifier program.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProgramStep {
    /// Hadamard on every data qubit.
    HadamardData,
    /// Coherent membership query against the A or B oracle, flagged into the
    /// given fresh flag qubit.
    Query { side: OracleSide, flag: usize },
}

/// A straight-line verifier over one n-qubit data register plus flag qubits.
///
/// The program runs unitarily; acceptance is the single final measurement
/// that all `accept_flags` read 1.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerifierProgram {
    pub name: String,
    pub n_flags: usize,
    pub steps: Vec<ProgramStep>,
    pub accept_flags: Vec<usize>,
}

impl VerifierProgram {
    pub fn query_count(&self) -> u64 {
        self.steps
            .iter()
            .filter(|s| matches!(s, ProgramStep::Query { .. }))
            .count() as u64
    }

    fn validate(&self) -> Result<()> {
        for step in &self.steps {
            if let ProgramStep::Query { flag, .. } = step {
                if *flag >= self.n_flags {
                    return Err(Error::Precondition {
                        op: "run_program",
                        reason: format!("flag {flag} out of range ({} flags)", self.n_flags),
                    });
                }
            }
        }
        for f in &self.accept_flags {
            if *f >= self.n_flags {
                return Err(Error::Precondition {
                    op: "run_program",
                    reason: format!("accept flag {f} out of range"),
                });
            }
        }
        Ok(())
    }
}

/// A query as seen from a single program run, in issue order.
#[derive(Clone, Debug)]
pub struct QueryView {
    pub side: OracleSide,
    pub record: QueryRecord,
}

/// Outcome of running a verifier program on an input state.
#[derive(Clone, Debug)]
pub struct ProgramRun {
    pub accept_probability: f64,
    pub queries: Vec<QueryView>,
}

/// Runs a program on an n-qubit input against a pair of membership oracles.
pub fn run_program(
    prog: &VerifierProgram,
    oracle_a: &mut MembershipOracle,
    oracle_b: &mut MembershipOracle,
    input: &PureState,
) -> Result<ProgramRun> {
    prog.validate()?;
    let n = input.n_qubits();
    for (side, o) in [(OracleSide::A, &*oracle_a), (OracleSide::B, &*oracle_b)] {
        if o.subspace().ambient_dim() != n {
            return Err(Error::Precondition {
                op: "run_program",
                reason: format!(
                    "{side}-oracle ambient dim {} does not match input qubits {n}",
                    o.subspace().ambient_dim()
                ),
            });
        }
    }
    let total_qubits = n + prog.n_flags;
    let mut amps = vec![Complex64::ZERO; 1usize << total_qubits];
    amps[..input.dim()].copy_from_slice(input.amplitudes());

    let queries = execute_steps(prog, oracle_a, oracle_b, &mut amps, 0, n, n)?;
    let mask = accept_mask(prog, n);
    let accept_probability = amps
        .iter()
        .enumerate()
        .filter(|(z, _)| z & mask == mask)
        .map(|(_, a)| a.norm_sqr())
        .sum();
    Ok(ProgramRun {
        accept_probability,
        queries,
    })
}

/// Applies program steps to a raw amplitude vector whose data register sits
/// at `data_offset` and whose flag block starts at `flags_offset`.
pub(crate) fn execute_steps(
    prog: &VerifierProgram,
    oracle_a: &mut MembershipOracle,
    oracle_b: &mut MembershipOracle,
    amps: &mut [Complex64],
    data_offset: usize,
    n: usize,
    flags_offset: usize,
) -> Result<Vec<QueryView>> {
    let mut queries = Vec::new();
    for step in &prog.steps {
        match step {
            ProgramStep::HadamardData => {
                hadamard_on_bits(amps, data_offset, data_offset + n);
            }
            ProgramStep::Query { side, flag } => {
                let oracle = match side {
                    OracleSide::A => &mut *oracle_a,
                    OracleSide::B => &mut *oracle_b,
                };
                let record = oracle.apply_raw(amps, data_offset, flags_offset + flag)?;
                queries.push(QueryView {
                    side: *side,
                    record,
                });
            }
        }
    }
    Ok(queries)
}

pub(crate) fn accept_mask(prog: &VerifierProgram, flags_offset: usize) -> usize {
    prog.accept_flags
        .iter()
        .map(|f| 1usize << (flags_offset + f))
        .sum()
}

/// Report of running the same program against oracle B and a sub-oracle B'.
#[derive(Clone, Debug)]
pub struct HybridReport {
    pub prob_with_b: f64,
    pub prob_with_b_prime: f64,
    /// Mass of each B-query's input on B \ B', in issue order.
    pub per_query_masses: Vec<f64>,
    /// The telescoping bound sum_i 2 sqrt(mass_i) + 1e-6.
    pub bound: f64,
    pub within_bound: bool,
}

/// Runs `prog` twice, once with oracle B and once with B' substituted, and
/// checks the probability gap against the per-query mass bound
/// |p_B - p_B'| <= sum_i 2 sqrt(mass_i) + 1e-6.
pub fn replace_oracle_hybrid(
    prog: &VerifierProgram,
    a: &Subspace,
    b: &Subspace,
    b_prime: &Subspace,
    input: &PureState,
) -> Result<HybridReport> {
    if !b_prime.is_subspace_of(b) {
        return Err(Error::Precondition {
            op: "replace_oracle_hybrid",
            reason: "B' must be a subspace of B".into(),
        });
    }
    let mut oracle_a = MembershipOracle::new(a.clone());
    let mut oracle_b = MembershipOracle::new(b.clone());
    oracle_b.register_mass_set(SetDiff::difference(
        "b_minus_bprime",
        b.clone(),
        b_prime.clone(),
    ));
    let run_b = run_program(prog, &mut oracle_a, &mut oracle_b, input)?;

    let mut oracle_a2 = MembershipOracle::new(a.clone());
    let mut oracle_bp = MembershipOracle::new(b_prime.clone());
    let run_bp = run_program(prog, &mut oracle_a2, &mut oracle_bp, input)?;

    let per_query_masses: Vec<f64> = run_b
        .queries
        .iter()
        .filter(|q| q.side == OracleSide::B)
        .map(|q| q.record.masses[0].1)
        .collect();
    let bound = per_query_masses.iter().map(|m| 2.0 * m.sqrt()).sum::<f64>() + 1e-6;
    let gap = (run_b.accept_probability - run_bp.accept_probability).abs();
    Ok(HybridReport {
        prob_with_b: run_b.accept_probability,
        prob_with_b_prime: run_bp.accept_probability,
        per_query_masses,
        bound,
        within_bound: gap <= bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::vstar_program;
    use crate::state::{subspace_state, TOL};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bv(s: &str) -> BitVector {
        BitVector::from_bitstring(s).unwrap()
    }

    #[test]
    fn flag_flip_on_members_only() {
        let s = Subspace::canonicalize(&[bv("11")]).unwrap();
        let mut oracle = MembershipOracle::new(s);
        // |11>|0> -> |11>|1>
        let member = PureState::basis_state(3, 0b011).unwrap();
        let out = oracle.apply(&member).unwrap();
        assert_eq!(out.amp(0b111), Complex64::ONE);
        // |10>|0> stays put.
        let non_member = PureState::basis_state(3, 0b001).unwrap();
        let out = oracle.apply(&non_member).unwrap();
        assert_eq!(out.amp(0b001), Complex64::ONE);
        assert_eq!(oracle.query_count(), 2);
    }

    #[test]
    fn double_application_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = Subspace::sample_with(4, 2, &mut rng).unwrap();
        let mut oracle = MembershipOracle::new(s);
        let psi = PureState::random(5, &mut rng);
        let once = oracle.apply(&psi).unwrap();
        let twice = oracle.apply(&once).unwrap();
        assert!(twice.distance(&psi).unwrap() < TOL);
        assert!((once.norm_sq() - 1.0).abs() < TOL, "norm preserved");
    }

    #[test]
    fn qubit_count_mismatch_rejected() {
        let s = Subspace::zero(4).unwrap();
        let mut oracle = MembershipOracle::new(s);
        let psi = PureState::zero_state(4).unwrap();
        assert!(oracle.apply(&psi).is_err());
    }

    #[test]
    fn query_mass_point_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = Subspace::sample_with(6, 3, &mut rng).unwrap();
        let b_prime = b.sample_subspace_of(2, &mut rng).unwrap();
        let diff = SetDiff::difference("d", b.clone(), b_prime.clone());

        // A basis state inside B \ B' has mass 1.
        let x = b
            .member_indices()
            .unwrap()
            .into_iter()
            .find(|&m| !b_prime.contains_index(m))
            .unwrap();
        let psi = PureState::basis_state(6, x).unwrap();
        assert!((query_mass(&psi, 6, &diff).unwrap() - 1.0).abs() < TOL);

        // A state supported entirely on B' has mass 0.
        let psi = subspace_state(&b_prime).unwrap();
        assert!(query_mass(&psi, 6, &diff).unwrap().abs() < TOL);

        // |B> against B' of codimension 1 inside B: mass 1 - 2^{-1} = 0.5.
        let psi = subspace_state(&b).unwrap();
        assert!((query_mass(&psi, 6, &diff).unwrap() - 0.5).abs() < TOL);
    }

    #[test]
    fn program_counts_and_masses() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = Subspace::sample_with(8, 4, &mut rng).unwrap();
        let b = a.dual();
        let mut oa = MembershipOracle::new(a.clone());
        let mut ob = MembershipOracle::new(b.clone());
        let proof = subspace_state(&a).unwrap();
        let run = run_program(&vstar_program(), &mut oa, &mut ob, &proof).unwrap();
        // One coherent membership check per subspace test.
        assert_eq!(oa.query_count(), 1);
        assert_eq!(ob.query_count(), 1);
        assert_eq!(run.queries.len(), 2);
        assert!((run.accept_probability - 1.0).abs() < TOL);
    }

    #[test]
    fn hybrid_zero_queries_means_identical_probabilities() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = Subspace::sample_with(8, 4, &mut rng).unwrap();
        let b = a.dual();
        let b_prime = b.sample_subspace_of(2, &mut rng).unwrap();
        let prog = VerifierProgram {
            name: "a-only".into(),
            n_flags: 1,
            steps: vec![ProgramStep::Query {
                side: OracleSide::A,
                flag: 0,
            }],
            accept_flags: vec![0],
        };
        let proof = subspace_state(&a).unwrap();
        let rep = replace_oracle_hybrid(&prog, &a, &b, &b_prime, &proof).unwrap();
        assert_eq!(rep.per_query_masses.len(), 0);
        assert!((rep.prob_with_b - rep.prob_with_b_prime).abs() < TOL);
        assert!(rep.within_bound);
    }

    #[test]
    fn hybrid_with_identical_oracles_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = Subspace::sample_with(8, 4, &mut rng).unwrap();
        let b = a.dual();
        let proof = subspace_state(&a).unwrap();
        let rep = replace_oracle_hybrid(&vstar_program(), &a, &b, &b, &proof).unwrap();
        assert!((rep.prob_with_b - rep.prob_with_b_prime).abs() < TOL);
        // Masses on the empty set B \ B are all zero.
        assert!(rep.per_query_masses.iter().all(|m| m.abs() < TOL));
    }

    #[test]
    fn hybrid_bound_holds_for_vstar() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..10 {
            let a = Subspace::sample_with(8, 4, &mut rng).unwrap();
            let b = a.dual();
            let b_prime = b.sample_subspace_of(1, &mut rng).unwrap();
            let proof = subspace_state(&a).unwrap();
            let rep = replace_oracle_hybrid(&vstar_program(), &a, &b, &b_prime, &proof).unwrap();
            assert!(
                rep.within_bound,
                "gap {} exceeds bound {}",
                (rep.prob_with_b - rep.prob_with_b_prime).abs(),
                rep.bound
            );
            // Spot-check the replaced run: V* against (A, B') accepts |A>
            // with probability |B'|/|A^perp| = 2^{dim B' - dim A^perp}.
            assert!((rep.prob_with_b - 1.0).abs() < TOL);
            assert!((rep.prob_with_b_prime - 0.125).abs() < TOL);
        }
    }

    #[test]
    fn hybrid_bound_holds_on_random_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for trial in 0..20 {
            let a = Subspace::sample_with(6, 3, &mut rng).unwrap();
            let b = a.dual();
            let d = rng.random_range(0..=2);
            let b_prime = b.sample_subspace_of(d, &mut rng).unwrap();
            let input = PureState::random(6, &mut rng);
            let rep = replace_oracle_hybrid(&vstar_program(), &a, &b, &b_prime, &input).unwrap();
            assert!(rep.within_bound, "trial {trial}");
        }
    }

    #[test]
    fn hybrid_requires_nested_subspaces() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let a = Subspace::sample_with(6, 3, &mut rng).unwrap();
        let b = a.dual();
        let not_inside = Subspace::full(6).unwrap();
        let input = PureState::random(6, &mut rng);
        assert!(replace_oracle_hybrid(&vstar_program(), &a, &b, &not_inside, &input).is_err());
    }

    #[test]
    fn classical_contains_counts_queries() {
        let s = Subspace::canonicalize(&[bv("1100"), bv("0011")]).unwrap();
        let mut oracle = MembershipOracle::new(s);
        assert!(oracle.contains(&bv("1111")).unwrap());
        assert!(!oracle.contains(&bv("1000")).unwrap());
        assert_eq!(oracle.query_count(), 2);
        assert_eq!(oracle.log().len(), 2);
    }

    #[test]
    fn csv_rows_format() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let b = Subspace::sample_with(6, 3, &mut rng).unwrap();
        let b_prime = b.sample_subspace_of(2, &mut rng).unwrap();
        let mut oracle = MembershipOracle::new(b.clone());
        oracle.register_mass_set(SetDiff::difference("bdiff", b.clone(), b_prime));
        let psi = subspace_state(&b)
            .unwrap()
            .tensor(&PureState::zero_state(1).unwrap());
        oracle.apply(&psi).unwrap();
        let rows = oracle.log().csv_rows(3, "B");
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0], format!("3,1,B,bdiff,{}", format_sig12(0.5)));
    }
}
