//! Exact pure-state simulation over n qubits.
//!
//! Basis-state indices follow the gf2 packing: qubit `i` is bit `i` of the
//! index, so a subspace member doubles as the index of its basis state. All
//! quantities in scope are dyadic rationals well above the global 1e-9
//! tolerance, so double-precision amplitudes are exact for every asserted
//! value.

use crate::error::{Error, Result};
use crate::gf2::Subspace;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Global numerical tolerance for equality and normalization checks.
pub const TOL: f64 = 1e-9;

/// Default cap on single-register statevectors (2^20 amplitudes).
pub const DEFAULT_QUBIT_CAP: usize = 20;

/// Default cap on densely represented operators (dimension 4096 = 12 qubits).
pub const DEFAULT_DENSE_CAP: usize = 4096;

/// A normalized pure state on `n_qubits` qubits.
#[derive(Clone)]
pub struct PureState {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl PureState {
    pub fn new(n_qubits: usize, amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() != 1usize << n_qubits {
            return Err(Error::DimensionMismatch {
                expected: 1usize << n_qubits,
                got: amps.len(),
            });
        }
        let norm_sq: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm_sq - 1.0).abs() > TOL {
            return Err(Error::NotNormalized { norm_sq });
        }
        Ok(Self { n_qubits, amps })
    }

    pub fn basis_state(n_qubits: usize, index: u64) -> Result<Self> {
        if n_qubits > 63 || index >= (1u64 << n_qubits) {
            return Err(Error::Precondition {
                op: "basis_state",
                reason: format!("index {index} out of range for {n_qubits} qubits"),
            });
        }
        let mut amps = vec![Complex64::ZERO; 1usize << n_qubits];
        amps[index as usize] = Complex64::ONE;
        Ok(Self { n_qubits, amps })
    }

    pub fn zero_state(n_qubits: usize) -> Result<Self> {
        Self::basis_state(n_qubits, 0)
    }

    /// A Haar-ish random state (complex Gaussian entries, normalized).
    pub fn random(n_qubits: usize, rng: &mut impl Rng) -> Self {
        let dim = 1usize << n_qubits;
        let mut amps: Vec<Complex64> = (0..dim)
            .map(|_| Complex64::new(gauss(rng), gauss(rng)))
            .collect();
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        for a in amps.iter_mut() {
            *a /= norm;
        }
        Self { n_qubits, amps }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amp(&self, index: u64) -> Complex64 {
        self.amps[index as usize]
    }

    pub fn norm_sq(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.n_qubits,
                got: other.n_qubits,
            });
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// l2 distance between amplitude vectors.
    pub fn distance(&self, other: &Self) -> Result<f64> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.n_qubits,
                got: other.n_qubits,
            });
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt())
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Walsh-Hadamard transform on every qubit; an involution.
    pub fn hadamard_all(&self) -> Self {
        let mut amps = self.amps.clone();
        fwht_normalized(&mut amps);
        Self {
            n_qubits: self.n_qubits,
            amps,
        }
    }

    pub fn tensor(&self, other: &Self) -> Self {
        // `other`'s qubits become the high bits.
        let mut amps = vec![Complex64::ZERO; self.dim() * other.dim()];
        for (j, &b) in other.amps.iter().enumerate() {
            if b == Complex64::ZERO {
                continue;
            }
            let base = j << self.n_qubits;
            for (i, &a) in self.amps.iter().enumerate() {
                amps[base | i] = a * b;
            }
        }
        Self {
            n_qubits: self.n_qubits + other.n_qubits,
            amps,
        }
    }

    /// Debug-only JSON: array of [re, im] pairs in basis order.
    pub fn to_debug_json(&self) -> serde_json::Value {
        serde_json::Value::Array(
            self.amps
                .iter()
                .map(|a| serde_json::json!([a.re, a.im]))
                .collect(),
        )
    }

    pub(crate) fn from_raw(n_qubits: usize, amps: Vec<Complex64>) -> Self {
        debug_assert_eq!(amps.len(), 1usize << n_qubits);
        Self { n_qubits, amps }
    }

    pub(crate) fn amps_mut(&mut self) -> &mut Vec<Complex64> {
        &mut self.amps
    }
}

impl std::fmt::Debug for PureState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "PureState({} qubits)", self.n_qubits)
    }
}

fn gauss(rng: &mut impl Rng) -> f64 {
    // Box-Muller; good enough for restart vectors and Haar-ish sampling.
    let u1: f64 = rng.random::<f64>().max(1e-300);
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// In-place normalized Walsh-Hadamard transform (1/sqrt(2) per stage).
pub fn fwht_normalized(amps: &mut [Complex64]) {
    let n = amps.len();
    debug_assert!(n.is_power_of_two());
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    let mut h = 1;
    while h < n {
        for block in (0..n).step_by(h * 2) {
            for i in block..block + h {
                let (x, y) = (amps[i], amps[i + h]);
                amps[i] = (x + y) * inv_sqrt2;
                amps[i + h] = (x - y) * inv_sqrt2;
            }
        }
        h *= 2;
    }
}

/// Hadamard on the contiguous qubit range [lo, hi).
pub(crate) fn hadamard_on_bits(amps: &mut [Complex64], lo: usize, hi: usize) {
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    let n = amps.len();
    for q in lo..hi {
        let h = 1usize << q;
        let mut block = 0;
        while block < n {
            for i in block..block + h {
                let (x, y) = (amps[i], amps[i + h]);
                amps[i] = (x + y) * inv_sqrt2;
                amps[i + h] = (x - y) * inv_sqrt2;
            }
            block += h * 2;
        }
    }
}

/// The uniform superposition over the members of a subspace.
pub fn subspace_state(s: &Subspace) -> Result<PureState> {
    subspace_state_capped(s, DEFAULT_QUBIT_CAP)
}

pub fn subspace_state_capped(s: &Subspace, qubit_cap: usize) -> Result<PureState> {
    let n = s.ambient_dim();
    if n > qubit_cap {
        return Err(Error::CapExceeded {
            what: "statevector qubits",
            requested: n,
            limit: qubit_cap,
        });
    }
    let members = s.member_indices_capped(n)?;
    let amp = Complex64::new(1.0 / (members.len() as f64).sqrt(), 0.0);
    let mut amps = vec![Complex64::ZERO; 1usize << n];
    for m in members {
        amps[m as usize] = amp;
    }
    Ok(PureState::from_raw(n, amps))
}

/// A probabilistic mixture of pure states.
#[derive(Clone, Debug)]
pub struct Ensemble {
    entries: Vec<(f64, PureState)>,
}

impl Ensemble {
    pub fn new(entries: Vec<(f64, PureState)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::BadEnsemble("empty ensemble".into()));
        }
        let mut total = 0.0;
        for (w, _) in &entries {
            if *w < -TOL {
                return Err(Error::BadEnsemble(format!("negative weight {w}")));
            }
            total += w;
        }
        if (total - 1.0).abs() > TOL {
            return Err(Error::BadEnsemble(format!("weights sum to {total}")));
        }
        Ok(Self { entries })
    }

    pub fn pure(state: PureState) -> Self {
        Self {
            entries: vec![(1.0, state)],
        }
    }

    pub fn entries(&self) -> &[(f64, PureState)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Samples one branch by weight.
    pub fn sample(&self, rng: &mut impl Rng) -> &PureState {
        let mut u: f64 = rng.random::<f64>();
        for (w, s) in &self.entries {
            if u < *w {
                return s;
            }
            u -= w;
        }
        &self.entries.last().unwrap().1
    }
}

/// Anything that acts as a Hermitian operator via matrix-vector products.
pub trait HermitianOp {
    fn dim(&self) -> usize;
    fn apply_into(&self, v: &[Complex64], out: &mut [Complex64]);

    fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::ZERO; v.len()];
        self.apply_into(v, &mut out);
        out
    }

    /// Rayleigh quotient <v|M|v> / <v|v> (real part).
    fn rayleigh(&self, v: &[Complex64]) -> f64 {
        let mv = self.apply(v);
        let num: Complex64 = v.iter().zip(&mv).map(|(a, b)| a.conj() * b).sum();
        let den: f64 = v.iter().map(|a| a.norm_sqr()).sum();
        num.re / den
    }
}

/// A dense Hermitian PSD contraction 0 <= M <= I.
#[derive(Clone)]
pub struct AcceptOperator {
    dim: usize,
    /// Row-major entries.
    mat: Vec<Complex64>,
}

impl AcceptOperator {
    /// Validates Hermiticity and (via power iteration) the spectral window
    /// [-1e-9, 1+1e-9].
    pub fn new(dim: usize, mat: Vec<Complex64>) -> Result<Self> {
        let op = Self::new_unchecked(dim, mat)?;
        op.check_hermitian()?;
        op.check_contraction()?;
        Ok(op)
    }

    /// Skips the spectral check; for operators PSD-contractive by
    /// construction (projectors, isometry conjugations, convex mixtures).
    pub fn new_unchecked(dim: usize, mat: Vec<Complex64>) -> Result<Self> {
        if dim == 0 || mat.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                got: mat.len(),
            });
        }
        if dim > DEFAULT_DENSE_CAP {
            return Err(Error::CapExceeded {
                what: "dense operator dimension",
                requested: dim,
                limit: DEFAULT_DENSE_CAP,
            });
        }
        Ok(Self { dim, mat })
    }

    pub fn identity(dim: usize) -> Self {
        let mut mat = vec![Complex64::ZERO; dim * dim];
        for i in 0..dim {
            mat[i * dim + i] = Complex64::ONE;
        }
        Self { dim, mat }
    }

    /// Diagonal projector selecting the given basis indices.
    pub fn diagonal_projector(dim: usize, keep: impl Fn(u64) -> bool) -> Self {
        let mut mat = vec![Complex64::ZERO; dim * dim];
        for i in 0..dim {
            if keep(i as u64) {
                mat[i * dim + i] = Complex64::ONE;
            }
        }
        Self { dim, mat }
    }

    /// Rank-1 projector |v><v| for a normalized vector.
    pub fn rank_one(v: &[Complex64]) -> Self {
        let dim = v.len();
        let mut mat = vec![Complex64::ZERO; dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                mat[i * dim + j] = v[i] * v[j].conj();
            }
        }
        Self { dim, mat }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.mat[i * self.dim + j]
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.mat
    }

    pub fn check_hermitian(&self) -> Result<()> {
        let mut max_dev: f64 = 0.0;
        for i in 0..self.dim {
            for j in i..self.dim {
                let dev = (self.entry(i, j) - self.entry(j, i).conj()).norm();
                max_dev = max_dev.max(dev);
            }
        }
        if max_dev > TOL {
            return Err(Error::NotHermitian { max_dev });
        }
        Ok(())
    }

    fn check_contraction(&self) -> Result<()> {
        let top = lambda_max(self)?;
        if top > 1.0 + TOL {
            return Err(Error::NotContraction { value: top });
        }
        // Smallest eigenvalue via the complement: lambda_min(M) = 1 - lambda_max(I - M).
        let mut comp = self.clone();
        for i in 0..self.dim {
            for j in 0..self.dim {
                let id = if i == j { Complex64::ONE } else { Complex64::ZERO };
                comp.mat[i * self.dim + j] = id - self.entry(i, j);
            }
        }
        let bottom = 1.0 - lambda_max(&comp)?;
        if bottom < -TOL {
            return Err(Error::NotContraction { value: bottom });
        }
        Ok(())
    }

    /// Convex combination p*self + (1-p)*other.
    pub fn mix(&self, other: &Self, p: f64) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        let mat = self
            .mat
            .iter()
            .zip(&other.mat)
            .map(|(a, b)| a * p + b * (1.0 - p))
            .collect();
        Ok(Self { dim: self.dim, mat })
    }

    /// Tensor product; `self` acts on the low bits, `other` on the high bits.
    pub fn tensor(&self, other: &Self) -> Self {
        let d1 = self.dim;
        let d2 = other.dim;
        let dim = d1 * d2;
        let mut mat = vec![Complex64::ZERO; dim * dim];
        for i2 in 0..d2 {
            for j2 in 0..d2 {
                let o = other.entry(i2, j2);
                if o == Complex64::ZERO {
                    continue;
                }
                for i1 in 0..d1 {
                    for j1 in 0..d1 {
                        mat[(i2 * d1 + i1) * dim + (j2 * d1 + j1)] = o * self.entry(i1, j1);
                    }
                }
            }
        }
        Self { dim, mat }
    }

    /// Quadratic form <psi|M|psi> (real part).
    pub fn expectation(&self, amps: &[Complex64]) -> Result<f64> {
        if amps.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: amps.len(),
            });
        }
        let mv = self.apply(amps);
        let val: Complex64 = amps.iter().zip(&mv).map(|(a, b)| a.conj() * b).sum();
        Ok(val.re)
    }
}

impl std::fmt::Debug for AcceptOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "AcceptOperator(dim={})", self.dim)
    }
}

impl HermitianOp for AcceptOperator {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply_into(&self, v: &[Complex64], out: &mut [Complex64]) {
        for i in 0..self.dim {
            let row = &self.mat[i * self.dim..(i + 1) * self.dim];
            out[i] = row.iter().zip(v).map(|(m, x)| m * x).sum();
        }
    }
}

/// The diagonal projector onto basis states indexed by members of `s`.
pub fn membership_projector(s: &Subspace) -> Result<AcceptOperator> {
    let n = s.ambient_dim();
    let dim = 1usize
        .checked_shl(n as u32)
        .filter(|&d| d <= DEFAULT_DENSE_CAP)
        .ok_or(Error::CapExceeded {
            what: "dense operator dimension",
            requested: n,
            limit: DEFAULT_DENSE_CAP,
        })?;
    Ok(AcceptOperator::diagonal_projector(dim, |i| {
        s.contains_index(i)
    }))
}

/// Acceptance probability <psi|M|psi>, clamped to [0, 1].
pub fn accept_probability(m: &AcceptOperator, psi: &PureState) -> Result<f64> {
    Ok(m.expectation(psi.amplitudes())?.clamp(0.0, 1.0))
}

/// Acceptance probability of a mixture: linear in the ensemble weights.
pub fn accept_probability_ensemble(m: &AcceptOperator, e: &Ensemble) -> Result<f64> {
    let mut total = 0.0;
    for (w, s) in e.entries() {
        total += w * accept_probability(m, s)?;
    }
    Ok(total.clamp(0.0, 1.0))
}

const POWER_ITER_BUDGET: usize = 100_000;
const POWER_RESTARTS: u64 = 3;
const RESIDUAL_TARGET: f64 = 1e-10;

/// Largest eigenvalue of a Hermitian PSD operator by power iteration.
///
/// Runs a few independently seeded starts as a safeguard against a start
/// vector (nearly) orthogonal to the top eigenspace, keeps the best Rayleigh
/// quotient, and certifies it with the residual ||Mv - lambda v|| <= 1e-9.
pub fn lambda_max(op: &impl HermitianOp) -> Result<f64> {
    lambda_max_seeded(op, 0x9e3779b97f4a7c15)
}

pub fn lambda_max_seeded(op: &impl HermitianOp, seed: u64) -> Result<f64> {
    Ok(lambda_max_with_vector(op, seed)?.0)
}

/// Power iteration returning the top eigenpair.
pub fn lambda_max_with_vector(
    op: &impl HermitianOp,
    seed: u64,
) -> Result<(f64, Vec<Complex64>)> {
    let dim = op.dim();
    if dim > DEFAULT_DENSE_CAP {
        return Err(Error::CapExceeded {
            what: "eigensolver dimension",
            requested: dim,
            limit: DEFAULT_DENSE_CAP,
        });
    }
    let mut best: Option<(f64, Vec<Complex64>)> = None;
    for restart in 0..POWER_RESTARTS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(restart));
        let mut v: Vec<Complex64> = (0..dim)
            .map(|_| Complex64::new(gauss(&mut rng), gauss(&mut rng)))
            .collect();
        normalize(&mut v);
        let mut mv = vec![Complex64::ZERO; dim];
        let mut converged = false;
        for _ in 0..POWER_ITER_BUDGET {
            op.apply_into(&v, &mut mv);
            let lambda: f64 = v
                .iter()
                .zip(&mv)
                .map(|(a, b)| (a.conj() * b).re)
                .sum();
            let residual: f64 = v
                .iter()
                .zip(&mv)
                .map(|(a, b)| (b - a * lambda).norm_sqr())
                .sum::<f64>()
                .sqrt();
            if residual <= RESIDUAL_TARGET {
                if best.as_ref().is_none_or(|(b, _)| lambda > *b) {
                    best = Some((lambda, v.clone()));
                }
                converged = true;
                break;
            }
            let norm: f64 = mv.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            if norm < 1e-14 {
                // M annihilates the start vector; top eigenvalue of the
                // explored subspace is 0.
                if best.is_none() {
                    best = Some((0.0, v.clone()));
                }
                converged = true;
                break;
            }
            for (dst, src) in v.iter_mut().zip(&mv) {
                *dst = src / norm;
            }
        }
        if !converged {
            return Err(Error::NonConvergence {
                iters: POWER_ITER_BUDGET,
            });
        }
    }
    Ok(best.unwrap())
}

/// A vector of standard complex Gaussians, normalized.
pub(crate) fn random_unit_vector(dim: usize, rng: &mut impl Rng) -> Vec<Complex64> {
    let mut v: Vec<Complex64> = (0..dim)
        .map(|_| Complex64::new(gauss(rng), gauss(rng)))
        .collect();
    normalize(&mut v);
    v
}

fn normalize(v: &mut [Complex64]) {
    let norm: f64 = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    if norm > 0.0 {
        for a in v.iter_mut() {
            *a /= norm;
        }
    }
}

#[cfg(test)]
pub(crate) mod tests_support {
    use super::*;
    use rand::Rng;

    /// Random PSD contraction built as G G^dagger scaled under its trace.
    pub(crate) fn random_psd_contraction_pub(dim: usize, rng: &mut impl Rng) -> AcceptOperator {
        let g: Vec<Complex64> = (0..dim * dim)
            .map(|_| Complex64::new(gauss(rng), gauss(rng)))
            .collect();
        let mut mat = vec![Complex64::ZERO; dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                let mut acc = Complex64::ZERO;
                for k in 0..dim {
                    acc += g[i * dim + k] * g[j * dim + k].conj();
                }
                mat[i * dim + j] = acc;
            }
        }
        let trace: f64 = (0..dim).map(|i| mat[i * dim + i].re).sum();
        for v in mat.iter_mut() {
            *v /= trace;
        }
        AcceptOperator::new_unchecked(dim, mat).unwrap()
    }
}
