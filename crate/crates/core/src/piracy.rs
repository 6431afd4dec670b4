//! The anti-piracy security game: generator, prover, pirate, two verifiers.
//!
//! A pirate maps one proof register to two registers, represented as an
//! ensemble of (possibly correlated) two-register pure branches. Verifier
//! programs then run on each register; joint acceptance is computed exactly
//! branch by branch, or estimated by Monte Carlo with Wilson intervals.
//!
//! The random-query measurement M (pick a logged query uniformly, measure
//! its input register, accept iff the outcome lies in that oracle's
//! subspace) instantiates the reduction chain
//! joint(V1, V2) <= p * accept(M (x) V2) <= p^2 * accept(M (x) M),
//! with p calibrated per experiment as the reciprocal of the measured
//! single-verifier acceptance on register 1.

use crate::error::{Error, Result};
use crate::gf2::{BitVector, Subspace};
use crate::oracle::{
    accept_mask, execute_steps, run_program, MembershipOracle, OracleSide, ProgramRun, QueryView,
    SetDiff, VerifierProgram,
};
use crate::protocol::{generator_g, honest_prove, Instance};
use crate::seeds::split_seed;
use crate::state::{subspace_state, PureState};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Cap on the total qubit count of an exact joint two-register evaluation.
pub const JOINT_QUBIT_CAP: usize = 26;

/// Mass-set id used for the POVM target of each oracle.
const POVM_TARGET: &str = "povm-target";

/// Output register pair of one pirate branch.
#[derive(Clone, Debug)]
pub enum TwoRegisterState {
    /// Uncorrelated registers.
    Product(PureState, PureState),
    /// A joint 2n-qubit state; register 1 occupies the low n bits.
    Joint(PureState),
}

/// One pirate invocation: an ensemble over two-register branches.
#[derive(Clone, Debug)]
pub struct PirateOutput {
    pub branches: Vec<(f64, TwoRegisterState)>,
    pub queries_used: u64,
}

/// Built-in pirate strategies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pirate {
    /// Register 1 = the proof untouched, register 2 = |0^n>.
    ForwardAndPad,
    /// Measure the proof in the computational basis and resend the outcome
    /// to both registers.
    MeasureResend,
    /// Illegal calibration baseline: both registers get an honest proof.
    OracleCheat,
}

impl Pirate {
    pub fn name(&self) -> &'static str {
        match self {
            Pirate::ForwardAndPad => "forward-and-pad",
            Pirate::MeasureResend => "measure-resend",
            Pirate::OracleCheat => "oracle-cheat",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "forward-and-pad" => Ok(Pirate::ForwardAndPad),
            "measure-resend" => Ok(Pirate::MeasureResend),
            "oracle-cheat" => Ok(Pirate::OracleCheat),
            other => Err(Error::Parse(format!(
                "unknown pirate {other:?}; known: forward-and-pad, measure-resend, oracle-cheat"
            ))),
        }
    }

    /// Illegal baselines calibrate the harness and are flagged in reports.
    pub fn is_legal(&self) -> bool {
        !matches!(self, Pirate::OracleCheat)
    }

    pub const ALL: [Pirate; 3] = [
        Pirate::ForwardAndPad,
        Pirate::MeasureResend,
        Pirate::OracleCheat,
    ];
    pub const LEGAL: [Pirate; 2] = [Pirate::ForwardAndPad, Pirate::MeasureResend];

    /// Runs the strategy on a proof, returning the full branch ensemble.
    /// Built-in strategies make no oracle queries.
    pub fn run(&self, inst: &Instance, proof: &PureState) -> Result<PirateOutput> {
        let n = inst.n;
        if proof.n_qubits() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: proof.n_qubits(),
            });
        }
        let branches = match self {
            Pirate::ForwardAndPad => vec![(
                1.0,
                TwoRegisterState::Product(proof.clone(), PureState::zero_state(n)?),
            )],
            Pirate::MeasureResend => {
                let mut out = Vec::new();
                for (z, amp) in proof.amplitudes().iter().enumerate() {
                    let w = amp.norm_sqr();
                    if w > 1e-15 {
                        let s = PureState::basis_state(n, z as u64)?;
                        out.push((w, TwoRegisterState::Product(s.clone(), s)));
                    }
                }
                out
            }
            Pirate::OracleCheat => {
                let honest = subspace_state(&inst.a)?;
                vec![(1.0, TwoRegisterState::Product(honest.clone(), honest))]
            }
        };
        Ok(PirateOutput {
            branches,
            queries_used: 0,
        })
    }
}

/// 95% Wilson score interval for `successes` out of `trials`.
pub fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054_f64;
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = (z / denom) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// How a game computes its outcome.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GameMode {
    /// Branch-by-branch exact evaluation; the interval collapses to a point.
    Exact,
    /// Sampled branches and measurement outcomes, Wilson intervals.
    MonteCarlo,
}

/// Joint two-verifier acceptance statistics.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GameOutcome {
    pub n: usize,
    pub pirate: String,
    pub v1: String,
    pub v2: String,
    pub trials: u64,
    pub joint_accept: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Oracle queries per trial (pirate plus both verifiers).
    pub queries: u64,
    pub mode: GameMode,
    pub legal: bool,
}

impl GameOutcome {
    pub const CSV_HEADER: &'static str =
        "n,pirate,v1,v2,trials,joint_accept,ci_low,ci_high,queries";

    pub fn csv_row(&self) -> String {
        use crate::oracle::format_sig12 as f12;
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.n,
            self.pirate,
            self.v1,
            self.v2,
            self.trials,
            f12(self.joint_accept),
            f12(self.ci_low),
            f12(self.ci_high),
            self.queries
        )
    }
}

/// Probabilities of the verifier verdicts on one branch.
struct BranchProbs {
    p11: f64,
    p1: f64,
    p2: f64,
}

/// Exact verifier-pair evaluation on one branch. Fresh oracles per call.
fn eval_branch(
    inst: &Instance,
    v1: &VerifierProgram,
    v2: &VerifierProgram,
    branch: &TwoRegisterState,
) -> Result<BranchProbs> {
    match branch {
        TwoRegisterState::Product(s1, s2) => {
            let (mut oa, mut ob) = inst.oracles();
            let p1 = run_program(v1, &mut oa, &mut ob, s1)?.accept_probability;
            let (mut oa, mut ob) = inst.oracles();
            let p2 = run_program(v2, &mut oa, &mut ob, s2)?.accept_probability;
            Ok(BranchProbs {
                p11: (p1 * p2).clamp(0.0, 1.0),
                p1: p1.clamp(0.0, 1.0),
                p2: p2.clamp(0.0, 1.0),
            })
        }
        TwoRegisterState::Joint(s12) => {
            let n = inst.n;
            let total = 2 * n + v1.n_flags + v2.n_flags;
            if total > JOINT_QUBIT_CAP {
                return Err(Error::CapExceeded {
                    what: "joint game qubits",
                    requested: total,
                    limit: JOINT_QUBIT_CAP,
                });
            }
            let mut amps = vec![Complex64::ZERO; 1usize << total];
            amps[..s12.dim()].copy_from_slice(s12.amplitudes());
            let (mut oa1, mut ob1) = inst.oracles();
            let (mut oa2, mut ob2) = inst.oracles();
            execute_steps(v1, &mut oa1, &mut ob1, &mut amps, 0, n, 2 * n)?;
            execute_steps(v2, &mut oa2, &mut ob2, &mut amps, n, n, 2 * n + v1.n_flags)?;
            let m1 = accept_mask(v1, 2 * n);
            let m2 = accept_mask(v2, 2 * n + v1.n_flags);
            let mut p11 = 0.0;
            let mut p1 = 0.0;
            let mut p2 = 0.0;
            for (z, a) in amps.iter().enumerate() {
                let p = a.norm_sqr();
                if p == 0.0 {
                    continue;
                }
                let acc1 = z & m1 == m1;
                let acc2 = z & m2 == m2;
                if acc1 {
                    p1 += p;
                }
                if acc2 {
                    p2 += p;
                }
                if acc1 && acc2 {
                    p11 += p;
                }
            }
            Ok(BranchProbs {
                p11: p11.clamp(0.0, 1.0),
                p1: p1.clamp(0.0, 1.0),
                p2: p2.clamp(0.0, 1.0),
            })
        }
    }
}

/// Runs the piracy game: per trial, sample a yes-instance from the
/// generator, run the honest prover and the pirate, and evaluate both
/// verifiers on the pirate's two output registers.
pub fn run_piracy_game(
    n: usize,
    pirate: Pirate,
    v1: &VerifierProgram,
    v2: &VerifierProgram,
    trials: u64,
    seed: u64,
    mode: GameMode,
) -> Result<GameOutcome> {
    run_game_with(n, pirate, v1, v2, trials, seed, mode, |trial| {
        let inst = generator_g(n, split_seed(seed, trial)).ok_or(Error::Precondition {
            op: "run_piracy_game",
            reason: format!("generator outputs bottom for n = {n}"),
        })?;
        let proof = honest_prove(&inst)?;
        Ok((inst, proof))
    })
}

/// Game core shared with the candidate-scheme harness: `provider` yields the
/// per-trial instance and proof state.
pub(crate) fn run_game_with<F>(
    n: usize,
    pirate: Pirate,
    v1: &VerifierProgram,
    v2: &VerifierProgram,
    trials: u64,
    seed: u64,
    mode: GameMode,
    provider: F,
) -> Result<GameOutcome>
where
    F: Fn(u64) -> Result<(Instance, PureState)>,
{
    if trials == 0 {
        return Err(Error::ZeroTrials);
    }
    let queries_per_trial = v1.query_count() + v2.query_count();
    let mut outcome = GameOutcome {
        n,
        pirate: pirate.name().into(),
        v1: v1.name.clone(),
        v2: v2.name.clone(),
        trials,
        joint_accept: 0.0,
        ci_low: 0.0,
        ci_high: 0.0,
        queries: queries_per_trial,
        mode,
        legal: pirate.is_legal(),
    };
    match mode {
        GameMode::Exact => {
            let mut total = 0.0;
            for trial in 0..trials {
                let (inst, proof) = provider(trial)?;
                let out = pirate.run(&inst, &proof)?;
                let mut joint = 0.0;
                for (w, branch) in &out.branches {
                    joint += w * eval_branch(&inst, v1, v2, branch)?.p11;
                }
                total += joint;
                outcome.queries = queries_per_trial + out.queries_used;
            }
            let p = (total / trials as f64).clamp(0.0, 1.0);
            outcome.joint_accept = p;
            outcome.ci_low = p;
            outcome.ci_high = p;
        }
        GameMode::MonteCarlo => {
            let mut successes = 0u64;
            for trial in 0..trials {
                let (inst, proof) = provider(trial)?;
                let out = pirate.run(&inst, &proof)?;
                let mut rng = ChaCha8Rng::seed_from_u64(split_seed(seed ^ 0xACCE55, trial));
                let branch = sample_branch(&out.branches, &mut rng);
                let probs = eval_branch(&inst, v1, v2, branch)?;
                // Sample the verdict pair from the exact joint law.
                let u: f64 = rng.random();
                let acc1 = u < probs.p1;
                let cond = if acc1 {
                    probs.p11 / probs.p1.max(1e-300)
                } else {
                    (probs.p2 - probs.p11) / (1.0 - probs.p1).max(1e-300)
                };
                let acc2 = rng.random::<f64>() < cond;
                if acc1 && acc2 {
                    successes += 1;
                }
                outcome.queries = queries_per_trial + out.queries_used;
            }
            outcome.joint_accept = successes as f64 / trials as f64;
            let (lo, hi) = wilson_interval(successes, trials);
            outcome.ci_low = lo;
            outcome.ci_high = hi;
        }
    }
    Ok(outcome)
}

fn sample_branch<'a>(
    branches: &'a [(f64, TwoRegisterState)],
    rng: &mut impl Rng,
) -> &'a TwoRegisterState {
    let mut u: f64 = rng.random();
    for (w, b) in branches {
        if u < *w {
            return b;
        }
        u -= w;
    }
    &branches.last().expect("nonempty ensemble").1
}

/// One sampled application of the random-query POVM.
#[derive(Clone, Debug)]
pub struct PovmSample {
    pub vector: BitVector,
    pub accept: bool,
}

/// Uniformly selects one logged query, samples a basis vector from its
/// input distribution, and reports membership in the queried oracle's
/// subspace. `None` when the run made no queries (defined as reject).
pub fn query_povm_measure(
    queries: &[QueryView],
    n: usize,
    target_a: &Subspace,
    target_b: &Subspace,
    rng: &mut impl Rng,
) -> Result<Option<PovmSample>> {
    if queries.is_empty() {
        return Ok(None);
    }
    let q = &queries[rng.random_range(0..queries.len())];
    let dist = q.record.distribution.as_ref().ok_or(Error::Precondition {
        op: "query_povm_measure",
        reason: "query distributions were not instrumented".into(),
    })?;
    let mut u: f64 = rng.random::<f64>() * dist.iter().sum::<f64>();
    let mut index = dist.len() - 1;
    for (i, p) in dist.iter().enumerate() {
        if u < *p {
            index = i;
            break;
        }
        u -= p;
    }
    let vector = BitVector::from_index(index as u64, n)?;
    let accept = match q.side {
        OracleSide::A => target_a.member(&vector)?,
        OracleSide::B => target_b.member(&vector)?,
    };
    Ok(Some(PovmSample { vector, accept }))
}

/// Exact acceptance probability of the random-query POVM given logged
/// target masses: the mean over queries of the mass on that query's target.
pub fn query_povm_accept_probability(queries: &[QueryView]) -> f64 {
    if queries.is_empty() {
        return 0.0;
    }
    let total: f64 = queries
        .iter()
        .map(|q| {
            q.record
                .masses
                .iter()
                .find(|(id, _)| id == POVM_TARGET)
                .map(|(_, m)| *m)
                .unwrap_or(0.0)
        })
        .sum();
    total / queries.len() as f64
}

/// Instrumented oracles with the POVM target sets registered.
fn instrumented_oracles(inst: &Instance) -> (MembershipOracle, MembershipOracle) {
    let (mut oa, mut ob) = inst.oracles();
    oa.register_mass_set(SetDiff::subspace(POVM_TARGET, inst.a.clone()));
    ob.register_mass_set(SetDiff::subspace(POVM_TARGET, inst.b.clone()));
    (oa, ob)
}

fn instrumented_run(
    prog: &VerifierProgram,
    inst: &Instance,
    input: &PureState,
) -> Result<ProgramRun> {
    let (mut oa, mut ob) = instrumented_oracles(inst);
    run_program(prog, &mut oa, &mut ob, input)
}

/// Per-strategy instantiation of the reduction chain.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChainReport {
    pub n: usize,
    pub pirate: String,
    pub trials: u64,
    /// joint_accept(V*, V*).
    pub joint: f64,
    /// accept(M (x) V*): register 1 measured by the random-query POVM.
    pub m_v: f64,
    /// accept(M (x) M).
    pub m_m: f64,
    /// Measured single-verifier acceptance on register 1.
    pub a1: f64,
    /// Calibrated factor p = 1 / a1.
    pub p_factor: f64,
    pub ineq_joint_le_p_mv: bool,
    pub ineq_mv_le_p_mm: bool,
    pub ineq_joint_le_p2_mm: bool,
}

impl ChainReport {
    pub fn all_hold(&self) -> bool {
        self.ineq_joint_le_p_mv && self.ineq_mv_le_p_mm && self.ineq_joint_le_p2_mm
    }
}

/// Exact reduction-chain quantities for a built-in pirate against (V*, V*).
///
/// Branches must be product states (true of every built-in strategy); the
/// POVM probabilities come from the logged query masses of each register's
/// instrumented verifier run.
pub fn reduction_chain(
    n: usize,
    pirate: Pirate,
    v: &VerifierProgram,
    trials: u64,
    seed: u64,
) -> Result<ChainReport> {
    if trials == 0 {
        return Err(Error::ZeroTrials);
    }
    let mut joint = 0.0;
    let mut m_v = 0.0;
    let mut m_m = 0.0;
    let mut a1 = 0.0;
    for trial in 0..trials {
        let inst = generator_g(n, split_seed(seed, trial)).ok_or(Error::Precondition {
            op: "reduction_chain",
            reason: format!("generator outputs bottom for n = {n}"),
        })?;
        let proof = honest_prove(&inst)?;
        let out = pirate.run(&inst, &proof)?;
        for (w, branch) in &out.branches {
            let (s1, s2) = match branch {
                TwoRegisterState::Product(s1, s2) => (s1, s2),
                TwoRegisterState::Joint(_) => {
                    return Err(Error::Precondition {
                        op: "reduction_chain",
                        reason: "chain instrumentation requires product branches".into(),
                    })
                }
            };
            let run1 = instrumented_run(v, &inst, s1)?;
            let run2 = instrumented_run(v, &inst, s2)?;
            let p1 = run1.accept_probability;
            let p2 = run2.accept_probability;
            let m1 = query_povm_accept_probability(&run1.queries);
            let m2 = query_povm_accept_probability(&run2.queries);
            joint += w * p1 * p2;
            m_v += w * m1 * p2;
            m_m += w * m1 * m2;
            a1 += w * p1;
        }
    }
    let t = trials as f64;
    let (joint, m_v, m_m, a1) = (joint / t, m_v / t, m_m / t, a1 / t);
    let p_factor = if a1 > 0.0 { 1.0 / a1 } else { f64::INFINITY };
    let tol = 1e-9;
    Ok(ChainReport {
        n,
        pirate: pirate.name().into(),
        trials,
        joint,
        m_v,
        m_m,
        a1,
        p_factor,
        ineq_joint_le_p_mv: joint <= p_factor * m_v + tol,
        ineq_mv_le_p_mm: m_v <= p_factor * m_m + tol,
        ineq_joint_le_p2_mm: joint <= p_factor * p_factor * m_m + tol,
    })
}

/// Counterfeiting attack families against the query lower bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CounterfeitAttack {
    /// Measure |A> for a valid a, then guess b uniformly; with budget q >= 1
    /// each guess is checked against the dual-side oracle.
    MeasureAndGuess,
    /// Illegal calibration baseline: the attacker also holds |A^perp>.
    IllegalBothStates,
}

impl CounterfeitAttack {
    pub fn name(&self) -> &'static str {
        match self {
            CounterfeitAttack::MeasureAndGuess => "measure-and-guess",
            CounterfeitAttack::IllegalBothStates => "illegal-both-states",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "measure-and-guess" => Ok(CounterfeitAttack::MeasureAndGuess),
            "illegal-both-states" => Ok(CounterfeitAttack::IllegalBothStates),
            other => Err(Error::Parse(format!(
                "unknown attack {other:?}; known: measure-and-guess, illegal-both-states"
            ))),
        }
    }

    pub fn is_legal(&self) -> bool {
        matches!(self, CounterfeitAttack::MeasureAndGuess)
    }
}

/// One point of a success-versus-queries curve.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CounterfeitPoint {
    pub n: usize,
    pub attack: String,
    pub budget: u64,
    pub trials: u64,
    pub successes: u64,
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Closed-form success of measure-and-guess: a is always valid; with budget
/// 0 the single blind guess lands in the dual with probability 2^{-n/2},
/// and q checked guesses succeed unless all miss.
pub fn measure_and_guess_closed_form(n: usize, budget: u64) -> f64 {
    let hit = 2f64.powi(-((n / 2) as i32));
    if budget == 0 {
        hit
    } else {
        1.0 - (1.0 - hit).powi(budget as i32)
    }
}

/// The query-lower-bound reference curve: success eps requires on the order
/// of sqrt(eps) * 2^{n/4} queries, i.e. eps_ref(q) = min(1, (q / 2^{n/4})^2).
pub fn bds_reference(n: usize, budget: u64) -> f64 {
    let q = budget as f64 / 2f64.powf(n as f64 / 4.0);
    (q * q).min(1.0)
}

/// Empirical success probability of outputting a pair (a, b) with a in A
/// and b in the dual of A, per query budget.
pub fn counterfeit_experiment(
    n: usize,
    attack: CounterfeitAttack,
    budgets: &[u64],
    trials: u64,
    seed: u64,
) -> Result<Vec<CounterfeitPoint>> {
    if trials == 0 {
        return Err(Error::ZeroTrials);
    }
    let mut points = Vec::with_capacity(budgets.len());
    for (bi, &budget) in budgets.iter().enumerate() {
        let mut successes = 0u64;
        for trial in 0..trials {
            let inst_seed = split_seed(split_seed(seed, bi as u64), trial);
            let inst = generator_g(n, inst_seed).ok_or(Error::Precondition {
                op: "counterfeit_experiment",
                reason: format!("generator outputs bottom for n = {n}"),
            })?;
            let mut rng = ChaCha8Rng::seed_from_u64(split_seed(inst_seed, 0xC0FFEE));
            let ok = match attack {
                CounterfeitAttack::MeasureAndGuess => {
                    measure_and_guess_trial(&inst, budget, &mut rng)?
                }
                CounterfeitAttack::IllegalBothStates => {
                    // Measuring |A> and |A^perp> yields a valid pair outright.
                    true
                }
            };
            if ok {
                successes += 1;
            }
        }
        let (ci_low, ci_high) = wilson_interval(successes, trials);
        points.push(CounterfeitPoint {
            n,
            attack: attack.name().into(),
            budget,
            trials,
            successes,
            rate: successes as f64 / trials as f64,
            ci_low,
            ci_high,
        });
    }
    Ok(points)
}

fn measure_and_guess_trial(inst: &Instance, budget: u64, rng: &mut impl Rng) -> Result<bool> {
    let n = inst.n;
    // Measuring the honest proof |A> yields a uniform member of A; always a
    // valid first coordinate.
    let members = inst.a.member_indices()?;
    let _a = members[rng.random_range(0..members.len())];
    let mut oracle_b = MembershipOracle::new(inst.b.clone());
    if budget == 0 {
        let b = BitVector::from_index(rng.random::<u64>(), n)?;
        return inst.b.member(&b);
    }
    for _ in 0..budget {
        let guess = BitVector::from_index(rng.random::<u64>(), n)?;
        if oracle_b.contains(&guess)? {
            debug_assert!(oracle_b.query_count() <= budget);
            return Ok(true);
        }
    }
    debug_assert_eq!(oracle_b.query_count(), budget);
    Ok(false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::vstar_program;
    use crate::state::TOL;

    #[test]
    fn forward_and_pad_exact_joint() {
        for (n, expected) in [(4usize, 0.25), (8, 0.0625)] {
            let v = vstar_program();
            let out =
                run_piracy_game(n, Pirate::ForwardAndPad, &v, &v, 5, 3, GameMode::Exact).unwrap();
            assert!(
                (out.joint_accept - expected).abs() < TOL,
                "n={n}: {} vs {expected}",
                out.joint_accept
            );
            assert_eq!(out.ci_low, out.joint_accept);
            assert!(out.legal);
        }
    }

    #[test]
    fn measure_resend_exact_joint() {
        for (n, expected) in [(4usize, 0.0625), (8, 1.0 / 256.0)] {
            let v = vstar_program();
            let out =
                run_piracy_game(n, Pirate::MeasureResend, &v, &v, 5, 7, GameMode::Exact).unwrap();
            assert!(
                (out.joint_accept - expected).abs() < TOL,
                "n={n}: {} vs {expected}",
                out.joint_accept
            );
        }
    }

    #[test]
    fn oracle_cheat_is_flagged_and_scores_one() {
        let v = vstar_program();
        let out = run_piracy_game(8, Pirate::OracleCheat, &v, &v, 3, 1, GameMode::Exact).unwrap();
        assert!((out.joint_accept - 1.0).abs() < TOL);
        assert!(!out.legal);
    }

    #[test]
    fn monte_carlo_agrees_with_exact_within_3_sigma() {
        let v = vstar_program();
        let trials = 4000u64;
        for pirate in Pirate::ALL {
            let exact = run_piracy_game(8, pirate, &v, &v, 4, 11, GameMode::Exact).unwrap();
            let mc = run_piracy_game(8, pirate, &v, &v, trials, 11, GameMode::MonteCarlo).unwrap();
            let p = exact.joint_accept;
            let sigma = (p * (1.0 - p) / trials as f64).sqrt();
            assert!(
                (mc.joint_accept - p).abs() <= 3.0 * sigma + 1e-12,
                "{}: mc={} exact={p} sigma={sigma}",
                pirate.name(),
                mc.joint_accept
            );
            assert!(mc.ci_low <= p && p <= mc.ci_high || sigma == 0.0);
        }
    }

    #[test]
    fn legal_pirates_stay_under_the_forward_and_pad_value() {
        // At 10^4 trials the Wilson upper bound sits below 0.07, dominated
        // by the forward-and-pad analytic value 2^{-n/2}.
        let v = vstar_program();
        for pirate in Pirate::LEGAL {
            let out = run_piracy_game(8, pirate, &v, &v, 10_000, 5, GameMode::MonteCarlo).unwrap();
            assert!(
                out.ci_high < 0.07,
                "{}: upper bound {}",
                pirate.name(),
                out.ci_high
            );
        }
    }

    #[test]
    fn zero_trials_rejected() {
        let v = vstar_program();
        assert!(matches!(
            run_piracy_game(8, Pirate::ForwardAndPad, &v, &v, 0, 1, GameMode::Exact),
            Err(Error::ZeroTrials)
        ));
    }

    #[test]
    fn joint_branch_evaluation_matches_product_path() {
        // A product state packaged as a joint register must give the same
        // probabilities through the joint evaluator.
        let inst = generator_g(4, 9).unwrap();
        let proof = honest_prove(&inst).unwrap();
        let pad = PureState::zero_state(4).unwrap();
        let v = vstar_program();
        let prod = eval_branch(
            &inst,
            &v,
            &v,
            &TwoRegisterState::Product(proof.clone(), pad.clone()),
        )
        .unwrap();
        let joint =
            eval_branch(&inst, &v, &v, &TwoRegisterState::Joint(proof.tensor(&pad))).unwrap();
        assert!((prod.p11 - joint.p11).abs() < TOL);
        assert!((prod.p1 - joint.p1).abs() < TOL);
        assert!((prod.p2 - joint.p2).abs() < TOL);
    }

    #[test]
    fn povm_on_pirate_queries_matches_examples() {
        let inst = generator_g(8, 13).unwrap();
        let (mut oa, _ob) = instrumented_oracles(&inst);
        oa.snapshot_distributions(true);

        // A pirate that only queries members of A: verdict accepts surely.
        let member = inst.a.member_indices().unwrap()[3];
        let psi = PureState::basis_state(8, member)
            .unwrap()
            .tensor(&PureState::zero_state(1).unwrap());
        let mut amps = psi.amplitudes().to_vec();
        let rec = oa.apply_raw(&mut amps, 0, 8).unwrap();
        let views = vec![QueryView {
            side: OracleSide::A,
            record: rec,
        }];
        assert!((query_povm_accept_probability(&views) - 1.0).abs() < TOL);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let sample = query_povm_measure(&views, 8, &inst.a, &inst.b, &mut rng)
            .unwrap()
            .unwrap();
        assert!(sample.accept);

        // Uniform queries over F_2^n on the A-oracle: accept mass 2^{-n/2}.
        let uniform = PureState::zero_state(8)
            .unwrap()
            .hadamard_all()
            .tensor(&PureState::zero_state(1).unwrap());
        let mut amps = uniform.amplitudes().to_vec();
        let rec = oa.apply_raw(&mut amps, 0, 8).unwrap();
        let views = vec![QueryView {
            side: OracleSide::A,
            record: rec,
        }];
        assert!((query_povm_accept_probability(&views) - 0.0625).abs() < TOL);

        // Zero queries: defined as reject.
        assert!(query_povm_measure(&[], 8, &inst.a, &inst.b, &mut rng)
            .unwrap()
            .is_none());
        assert_eq!(query_povm_accept_probability(&[]), 0.0);
    }

    #[test]
    fn reduction_chain_holds_for_all_builtins() {
        let v = vstar_program();
        for pirate in Pirate::ALL {
            let rep = reduction_chain(8, pirate, &v, 4, 21).unwrap();
            assert!(
                rep.all_hold(),
                "{}: joint={} m_v={} m_m={} p={}",
                pirate.name(),
                rep.joint,
                rep.m_v,
                rep.m_m,
                rep.p_factor
            );
        }
    }

    #[test]
    fn chain_values_forward_and_pad() {
        // Exact closed forms at n=8: joint = 2^{-4}, a1 = 1,
        // M(R1) = 1, M(R2) = (1 + 2^{-4})/2.
        let v = vstar_program();
        let rep = reduction_chain(8, Pirate::ForwardAndPad, &v, 3, 2).unwrap();
        assert!((rep.joint - 0.0625).abs() < TOL);
        assert!((rep.a1 - 1.0).abs() < TOL);
        assert!((rep.m_v - 0.0625).abs() < TOL);
        assert!((rep.m_m - 0.53125).abs() < TOL);
    }

    #[test]
    fn counterfeit_budget_zero_matches_closed_form() {
        let points =
            counterfeit_experiment(8, CounterfeitAttack::MeasureAndGuess, &[0], 4000, 17).unwrap();
        let expected = measure_and_guess_closed_form(8, 0);
        assert_eq!(expected, 0.0625);
        let p = &points[0];
        assert!(
            p.ci_low <= expected && expected <= p.ci_high,
            "rate {} not covering {expected}",
            p.rate
        );
    }

    #[test]
    fn counterfeit_checked_guesses_match_closed_form() {
        let budgets = [1u64, 2, 4, 8, 16];
        let points =
            counterfeit_experiment(8, CounterfeitAttack::MeasureAndGuess, &budgets, 4000, 23)
                .unwrap();
        for p in &points {
            let expected = measure_and_guess_closed_form(8, p.budget);
            assert!(
                p.ci_low <= expected && expected <= p.ci_high,
                "budget {}: rate {} CI [{}, {}] vs {expected}",
                p.budget,
                p.rate,
                p.ci_low,
                p.ci_high
            );
        }
        // The frozen spot value: 1 - (15/16)^4.
        let q4 = measure_and_guess_closed_form(8, 4);
        assert!((q4 - 0.2275238037109375).abs() < 1e-15);
    }

    #[test]
    fn counterfeit_illegal_baseline_always_succeeds() {
        let points =
            counterfeit_experiment(8, CounterfeitAttack::IllegalBothStates, &[0, 4], 100, 1)
                .unwrap();
        for p in &points {
            assert_eq!(p.rate, 1.0);
        }
    }

    #[test]
    fn counterfeit_determinism() {
        let a = counterfeit_experiment(8, CounterfeitAttack::MeasureAndGuess, &[4], 500, 9).unwrap();
        let b = counterfeit_experiment(8, CounterfeitAttack::MeasureAndGuess, &[4], 500, 9).unwrap();
        assert_eq!(a[0].successes, b[0].successes);
    }

    #[test]
    fn wilson_interval_sane() {
        let (lo, hi) = wilson_interval(0, 100);
        assert!(lo < 1e-12);
        assert!(hi > 0.0 && hi < 0.05);
        let (lo, hi) = wilson_interval(100, 100);
        assert!(lo > 0.95 && hi == 1.0);
        let (lo, hi) = wilson_interval(50, 100);
        assert!(lo < 0.5 && 0.5 < hi);
    }

    #[test]
    fn game_csv_row_shape() {
        let v = vstar_program();
        let out = run_piracy_game(4, Pirate::ForwardAndPad, &v, &v, 2, 1, GameMode::Exact).unwrap();
        let row = out.csv_row();
        assert_eq!(
            row.split(',').count(),
            GameOutcome::CSV_HEADER.split(',').count()
        );
        assert!(row.starts_with("4,forward-and-pad,vstar,vstar,2,"));
    }
}
