//! Exact linear algebra over F_2 with word-packed vectors.
//!
//! Vectors live in F_2^n for n <= 64 and are packed into a single `u64`:
//! coordinate `i` of the vector is bit `i` of the word, so a vector doubles
//! as a computational-basis index. Subspaces are stored as a reduced
//! row-echelon basis (pivot = lowest set bit, pivots strictly increasing,
//! pivot column cleared in all other rows), which makes the representation
//! canonical: equal subspaces compare equal bit for bit.

use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Default cap on subspace enumeration: at most 2^20 members.
pub const DEFAULT_ENUM_CAP: usize = 20;

fn check_ambient(n: usize) -> Result<()> {
    if n == 0 || n > 64 {
        return Err(Error::BadAmbientDim(n));
    }
    Ok(())
}

fn word_mask(n: usize) -> u64 {
    if n == 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

/// A vector in F_2^n, n <= 64.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct BitVector {
    bits: u64,
    n: usize,
}

impl BitVector {
    pub fn zero(n: usize) -> Result<Self> {
        check_ambient(n)?;
        Ok(Self { bits: 0, n })
    }

    /// Interprets the low `n` bits of `bits` as coordinates; higher bits are dropped.
    pub fn from_index(bits: u64, n: usize) -> Result<Self> {
        check_ambient(n)?;
        Ok(Self {
            bits: bits & word_mask(n),
            n,
        })
    }

    pub fn from_coords(coords: &[bool]) -> Result<Self> {
        check_ambient(coords.len())?;
        let mut bits = 0u64;
        for (i, &c) in coords.iter().enumerate() {
            if c {
                bits |= 1 << i;
            }
        }
        Ok(Self {
            bits,
            n: coords.len(),
        })
    }

    /// Parses a little-endian bitstring: character `i` is coordinate `i`.
    pub fn from_bitstring(s: &str) -> Result<Self> {
        check_ambient(s.len())?;
        let mut bits = 0u64;
        for (i, ch) in s.chars().enumerate() {
            match ch {
                '1' => bits |= 1 << i,
                '0' => {}
                other => return Err(Error::Parse(format!("invalid bit character {other:?}"))),
            }
        }
        Ok(Self { bits, n: s.len() })
    }

    /// Little-endian bitstring: character `i` is coordinate `i`.
    pub fn to_bitstring(&self) -> String {
        (0..self.n)
            .map(|i| if self.get(i) { '1' } else { '0' })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_zero(&self) -> bool {
        self.bits == 0
    }

    /// The packed word, usable directly as a computational-basis index.
    pub fn index(&self) -> u64 {
        self.bits
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.n, "coordinate {i} out of range for n={}", self.n);
        (self.bits >> i) & 1 == 1
    }

    pub fn xor(&self, other: &Self) -> Result<Self> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: other.n,
            });
        }
        Ok(Self {
            bits: self.bits ^ other.bits,
            n: self.n,
        })
    }

    /// Inner product mod 2. Panics on mismatched lengths.
    pub fn dot(&self, other: &Self) -> bool {
        assert_eq!(self.n, other.n, "dot product on mismatched lengths");
        (self.bits & other.bits).count_ones() % 2 == 1
    }
}

impl std::fmt::Debug for BitVector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "BitVector({})", self.to_bitstring())
    }
}

impl std::fmt::Display for BitVector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.to_bitstring())
    }
}

/// A linear subspace of F_2^n in canonical reduced row-echelon form.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Subspace {
    n: usize,
    /// RREF rows sorted by pivot (lowest set bit), pivots strictly increasing.
    rows: Vec<u64>,
}

impl Subspace {
    pub fn zero(n: usize) -> Result<Self> {
        check_ambient(n)?;
        Ok(Self { n, rows: Vec::new() })
    }

    pub fn full(n: usize) -> Result<Self> {
        check_ambient(n)?;
        Ok(Self {
            n,
            rows: (0..n).map(|i| 1u64 << i).collect(),
        })
    }

    /// Canonicalizes the span of the given vectors.
    pub fn canonicalize(vectors: &[BitVector]) -> Result<Self> {
        let n = match vectors.first() {
            None => return Err(Error::BadAmbientDim(0)),
            Some(v) => v.len(),
        };
        for v in vectors {
            if v.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: v.len(),
                });
            }
        }
        Ok(Self::from_rows(n, vectors.iter().map(|v| v.bits)))
    }

    /// Like [`Subspace::canonicalize`] but for an empty set the ambient
    /// dimension cannot be inferred, so it is passed explicitly.
    pub fn span(n: usize, vectors: &[BitVector]) -> Result<Self> {
        check_ambient(n)?;
        for v in vectors {
            if v.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: v.len(),
                });
            }
        }
        Ok(Self::from_rows(n, vectors.iter().map(|v| v.bits)))
    }

    /// Gaussian elimination into RREF. Internal; assumes rows fit in n bits.
    fn from_rows(n: usize, rows: impl IntoIterator<Item = u64>) -> Self {
        let mask = word_mask(n);
        let mut basis: Vec<u64> = Vec::new();
        for mut v in rows {
            v &= mask;
            for &r in &basis {
                if (v >> r.trailing_zeros()) & 1 == 1 {
                    v ^= r;
                }
            }
            if v != 0 {
                let pv = v.trailing_zeros();
                for r in basis.iter_mut() {
                    if (*r >> pv) & 1 == 1 {
                        *r ^= v;
                    }
                }
                basis.push(v);
            }
        }
        basis.sort_unstable_by_key(|r| r.trailing_zeros());
        Self { n, rows: basis }
    }

    pub fn ambient_dim(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn basis(&self) -> Vec<BitVector> {
        self.rows
            .iter()
            .map(|&bits| BitVector { bits, n: self.n })
            .collect()
    }

    pub(crate) fn basis_words(&self) -> &[u64] {
        &self.rows
    }

    /// Membership test for a packed index (low n bits).
    pub fn contains_index(&self, x: u64) -> bool {
        let mut v = x & word_mask(self.n);
        for &r in &self.rows {
            if (v >> r.trailing_zeros()) & 1 == 1 {
                v ^= r;
            }
        }
        v == 0
    }

    /// True iff `x` is in the span of the basis.
    pub fn member(&self, x: &BitVector) -> Result<bool> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: x.len(),
            });
        }
        Ok(self.contains_index(x.bits))
    }

    /// The orthogonal complement {y : x·y = 0 for all x in self}.
    pub fn dual(&self) -> Self {
        let pivot_mask: u64 = self
            .rows
            .iter()
            .map(|r| 1u64 << r.trailing_zeros())
            .fold(0, |acc, b| acc | b);
        let mut out_rows = Vec::with_capacity(self.n - self.rows.len());
        for f in 0..self.n {
            if (pivot_mask >> f) & 1 == 1 {
                continue;
            }
            // e_f plus the pivot coordinates needed to cancel each basis row.
            let mut v = 1u64 << f;
            for &r in &self.rows {
                if (r >> f) & 1 == 1 {
                    v |= 1u64 << r.trailing_zeros();
                }
            }
            out_rows.push(v);
        }
        Self::from_rows(self.n, out_rows)
    }

    pub fn is_subspace_of(&self, other: &Self) -> bool {
        self.n == other.n && self.rows.iter().all(|&r| other.contains_index(r))
    }

    /// All 2^dim members as packed indices, ascending.
    pub fn member_indices_capped(&self, cap: usize) -> Result<Vec<u64>> {
        if self.dim() > cap {
            return Err(Error::CapExceeded {
                what: "subspace enumeration",
                requested: self.dim(),
                limit: cap,
            });
        }
        let d = self.dim();
        let mut out = Vec::with_capacity(1usize << d);
        out.push(0u64);
        let mut cur = 0u64;
        for i in 1u64..(1u64 << d) {
            // Gray-code walk: one basis row toggles per step.
            cur ^= self.rows[i.trailing_zeros() as usize];
            out.push(cur);
        }
        out.sort_unstable();
        Ok(out)
    }

    pub fn member_indices(&self) -> Result<Vec<u64>> {
        self.member_indices_capped(DEFAULT_ENUM_CAP)
    }

    /// All members as vectors, each exactly once, ascending by index.
    pub fn enumerate(&self) -> Result<Vec<BitVector>> {
        self.enumerate_capped(DEFAULT_ENUM_CAP)
    }

    pub fn enumerate_capped(&self, cap: usize) -> Result<Vec<BitVector>> {
        Ok(self
            .member_indices_capped(cap)?
            .into_iter()
            .map(|bits| BitVector { bits, n: self.n })
            .collect())
    }

    /// A uniformly random d-dimensional subspace of F_2^n.
    ///
    /// Samples d x n matrices until full rank, then canonicalizes; every
    /// subspace is hit by the same number (|GL(d,2)|) of full-rank matrices,
    /// so the span is uniform. Expected tries < 4.
    pub fn sample_with(n: usize, d: usize, rng: &mut impl Rng) -> Result<Self> {
        check_ambient(n)?;
        if d > n {
            return Err(Error::BadSubspaceDim { d, n });
        }
        if d == 0 {
            return Self::zero(n);
        }
        let mask = word_mask(n);
        loop {
            let rows: Vec<u64> = (0..d).map(|_| rng.random::<u64>() & mask).collect();
            let s = Self::from_rows(n, rows.iter().copied());
            if s.dim() == d {
                return Ok(s);
            }
        }
    }

    /// Deterministic sampling from a seed.
    pub fn sample_seeded(n: usize, d: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::sample_with(n, d, &mut rng)
    }

    /// A uniformly random d-dimensional subspace of `self`.
    pub fn sample_subspace_of(&self, d: usize, rng: &mut impl Rng) -> Result<Self> {
        if d > self.dim() {
            return Err(Error::BadSubspaceDim { d, n: self.dim() });
        }
        if d == 0 {
            return Self::zero(self.n);
        }
        let k = self.dim();
        let mask = word_mask(k);
        loop {
            // Random d x k coefficient matrix applied to the basis rows.
            let coeffs: Vec<u64> = (0..d).map(|_| rng.random::<u64>() & mask).collect();
            if Self::from_rows(k, coeffs.iter().copied()).dim() < d {
                continue;
            }
            let rows = coeffs.iter().map(|&c| {
                self.rows
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| (c >> j) & 1 == 1)
                    .fold(0u64, |acc, (_, &r)| acc ^ r)
            });
            return Ok(Self::from_rows(self.n, rows));
        }
    }
}

impl std::fmt::Debug for Subspace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Subspace(n={}, dim={}, basis=[", self.n, self.dim())?;
        for (i, b) in self.basis().iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{b}")?;
        }
        f.write_str("])")
    }
}

#[derive(Serialize, Deserialize)]
struct SubspaceWire {
    n: usize,
    basis: Vec<String>,
}

impl Serialize for Subspace {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        SubspaceWire {
            n: self.n,
            basis: self.basis().iter().map(|b| b.to_bitstring()).collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Subspace {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let wire = SubspaceWire::deserialize(deserializer)?;
        let vectors = wire
            .basis
            .iter()
            .map(|s| {
                let v = BitVector::from_bitstring(s).map_err(D::Error::custom)?;
                if v.len() != wire.n {
                    return Err(D::Error::custom(format!(
                        "basis string length {} does not match n={}",
                        v.len(),
                        wire.n
                    )));
                }
                Ok(v)
            })
            .collect::<std::result::Result<Vec<_>, D::Error>>()?;
        let sub = Subspace::span(wire.n, &vectors).map_err(D::Error::custom)?;
        // Round trips must be bit-exact, so reject non-canonical bases.
        if sub.basis().iter().map(|b| b.to_bitstring()).collect::<Vec<_>>() != wire.basis {
            return Err(D::Error::custom("basis is not in canonical RREF order"));
        }
        Ok(sub)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::{HashMap, HashSet};

    /// Plain row-reduction rank on unpacked 0/1 rows; independent of the
    /// packed implementation.
    fn naive_rank(rows: &[Vec<u8>]) -> usize {
        let mut m: Vec<Vec<u8>> = rows.to_vec();
        let ncols = m.first().map_or(0, Vec::len);
        let mut rank = 0;
        for col in 0..ncols {
            if let Some(p) = (rank..m.len()).find(|&r| m[r][col] == 1) {
                m.swap(rank, p);
                for r in 0..m.len() {
                    if r != rank && m[r][col] == 1 {
                        for c in 0..ncols {
                            m[r][c] ^= m[rank][c];
                        }
                    }
                }
                rank += 1;
            }
        }
        rank
    }

    fn unpack(bits: u64, n: usize) -> Vec<u8> {
        (0..n).map(|i| ((bits >> i) & 1) as u8).collect()
    }

    fn bv(s: &str) -> BitVector {
        BitVector::from_bitstring(s).unwrap()
    }

    #[test]
    fn duplicate_rows_collapse() {
        let s = Subspace::canonicalize(&[bv("11"), bv("11")]).unwrap();
        assert_eq!(s.dim(), 1);
        assert_eq!(s.basis(), vec![bv("11")]);
    }

    #[test]
    fn empty_span_is_zero_subspace() {
        let s = Subspace::span(3, &[]).unwrap();
        assert_eq!(s.dim(), 0);
        assert!(s.member(&bv("000")).unwrap());
        assert_eq!(s.enumerate().unwrap(), vec![bv("000")]);
    }

    #[test]
    fn mixed_dimensions_rejected() {
        let err = Subspace::canonicalize(&[bv("11"), bv("101")]).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 2, got: 3 }));
    }

    #[test]
    fn rank_matches_naive_oracle_on_random_vectors() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let vectors: Vec<BitVector> = (0..6)
                .map(|_| BitVector::from_index(rng.random::<u64>(), 8).unwrap())
                .collect();
            let s = Subspace::canonicalize(&vectors).unwrap();
            let rows: Vec<Vec<u8>> = vectors.iter().map(|v| unpack(v.bits, 8)).collect();
            assert_eq!(s.dim(), naive_rank(&rows));
        }
    }

    #[test]
    fn membership_basics() {
        let s = Subspace::canonicalize(&[bv("11")]).unwrap();
        assert!(s.member(&bv("00")).unwrap());
        assert!(!s.member(&bv("10")).unwrap());
        assert!(s.member(&bv("11")).unwrap());
        assert!(s.member(&bv("101")).is_err());
    }

    #[test]
    fn membership_agrees_with_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let d = rng.random_range(0..=8);
            let s = Subspace::sample_with(8, d, &mut rng).unwrap();
            let members: HashSet<u64> = s.member_indices().unwrap().into_iter().collect();
            assert_eq!(members.len(), 1 << d);
            for x in 0u64..256 {
                assert_eq!(s.contains_index(x), members.contains(&x), "x={x}");
            }
        }
    }

    #[test]
    fn dual_forced_cases() {
        let s = Subspace::canonicalize(&[bv("10")]).unwrap();
        assert_eq!(s.dual(), Subspace::canonicalize(&[bv("01")]).unwrap());
        let t = Subspace::canonicalize(&[bv("11")]).unwrap();
        assert_eq!(t.dual(), t, "(1,1) is self-orthogonal in F_2^2");
    }

    #[test]
    fn dual_by_full_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let s = Subspace::sample_with(8, 4, &mut rng).unwrap();
        let d = s.dual();
        assert_eq!(d.dim(), 4);
        for x in s.enumerate().unwrap() {
            for y in d.enumerate().unwrap() {
                assert!(!x.dot(&y), "{x} . {y} != 0");
            }
        }
        // Everything orthogonal to s must be in the dual.
        for y in 0u64..256 {
            let yv = BitVector::from_index(y, 8).unwrap();
            let orth = s.enumerate().unwrap().iter().all(|x| !x.dot(&yv));
            assert_eq!(orth, d.contains_index(y));
        }
    }

    #[test]
    fn sample_extremes() {
        let z = Subspace::sample_seeded(4, 0, 1).unwrap();
        assert_eq!(z, Subspace::zero(4).unwrap());
        let f = Subspace::sample_seeded(4, 4, 1).unwrap();
        assert_eq!(f, Subspace::full(4).unwrap());
        assert!(Subspace::sample_seeded(4, 5, 1).is_err());
    }

    #[test]
    fn sample_determinism() {
        let a = Subspace::sample_seeded(12, 6, 42).unwrap();
        let b = Subspace::sample_seeded(12, 6, 42).unwrap();
        assert_eq!(a, b);
    }

    /// Gaussian binomial coefficient (n choose d)_2.
    fn gaussian_binomial(n: u32, d: u32) -> u64 {
        let mut num = 1u64;
        let mut den = 1u64;
        for i in 0..d {
            num *= (1u64 << (n - i)) - 1;
            den *= (1u64 << (d - i)) - 1;
        }
        num / den
    }

    #[test]
    fn sampling_uniform_over_canonical_forms() {
        // (6 choose 3)_2 = 1395 distinct subspaces. A per-cell 3-sigma test
        // over 1395 cells would fail by chance, so the uniformity check is a
        // chi-squared statistic held within 3 sigma of its mean.
        let count = gaussian_binomial(6, 3);
        assert_eq!(count, 1395);
        let trials = 100_000usize;
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut hist: HashMap<Subspace, usize> = HashMap::new();
        for _ in 0..trials {
            *hist.entry(Subspace::sample_with(6, 3, &mut rng).unwrap()).or_insert(0) += 1;
        }
        assert_eq!(hist.len() as u64, count, "every canonical form observed");
        let expected = trials as f64 / count as f64;
        let chi2: f64 = hist
            .values()
            .map(|&c| {
                let d = c as f64 - expected;
                d * d / expected
            })
            .sum();
        let dof = (count - 1) as f64;
        let sigma = (2.0 * dof).sqrt();
        assert!(
            (chi2 - dof).abs() < 3.0 * sigma,
            "chi2={chi2} outside 3 sigma of dof={dof}"
        );
    }

    #[test]
    fn enumerate_small_cases() {
        let s = Subspace::canonicalize(&[bv("11")]).unwrap();
        assert_eq!(s.enumerate().unwrap(), vec![bv("00"), bv("11")]);
    }

    #[test]
    fn enumerate_cross_checks_member() {
        let s = Subspace::sample_seeded(8, 4, 5).unwrap();
        let members = s.enumerate().unwrap();
        assert_eq!(members.len(), 16);
        let uniq: HashSet<u64> = members.iter().map(|m| m.index()).collect();
        assert_eq!(uniq.len(), 16);
        for m in &members {
            assert!(s.member(m).unwrap());
        }
    }

    #[test]
    fn enumeration_cap_enforced() {
        let s = Subspace::full(22).unwrap();
        assert!(matches!(
            s.member_indices(),
            Err(Error::CapExceeded { what: "subspace enumeration", .. })
        ));
        assert!(s.member_indices_capped(22).is_ok());
    }

    #[test]
    fn subspace_of_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = Subspace::sample_with(10, 6, &mut rng).unwrap();
        for _ in 0..20 {
            let t = s.sample_subspace_of(3, &mut rng).unwrap();
            assert_eq!(t.dim(), 3);
            assert!(t.is_subspace_of(&s));
        }
    }

    #[test]
    fn serde_round_trip_bit_exact() {
        let s = Subspace::sample_seeded(12, 5, 17).unwrap();
        let json = serde_json::to_string(&s).unwrap();
        let back: Subspace = serde_json::from_str(&json).unwrap();
        assert_eq!(s, back);
        assert_eq!(json, serde_json::to_string(&back).unwrap());
        // Non-canonical bases are rejected rather than silently fixed.
        let bad = r#"{"n":2,"basis":["11","10"]}"#;
        assert!(serde_json::from_str::<Subspace>(bad).is_err());
    }

    proptest! {
        #[test]
        fn dual_dimension_and_involution(seed in 0u64..5000, n in 1usize..=12) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let d = rng.random_range(0..=n);
            let s = Subspace::sample_with(n, d, &mut rng).unwrap();
            let dual = s.dual();
            prop_assert_eq!(s.dim() + dual.dim(), n);
            prop_assert_eq!(dual.dual(), s);
        }

        #[test]
        fn members_closed_under_addition(seed in 0u64..5000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.random_range(2usize..=12);
            let d = rng.random_range(0..=n);
            let s = Subspace::sample_with(n, d, &mut rng).unwrap();
            let x = BitVector::from_index(rng.random::<u64>(), n).unwrap();
            let y = BitVector::from_index(rng.random::<u64>(), n).unwrap();
            if s.member(&x).unwrap() && s.member(&y).unwrap() {
                prop_assert!(s.member(&x.xor(&y).unwrap()).unwrap());
            }
        }

        #[test]
        fn canonicalize_idempotent_and_order_independent(seed in 0u64..5000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.random_range(2usize..=16);
            let k = rng.random_range(1usize..=6);
            let mut vectors: Vec<BitVector> = (0..k)
                .map(|_| BitVector::from_index(rng.random::<u64>(), n).unwrap())
                .collect();
            let s = Subspace::canonicalize(&vectors).unwrap();
            // Idempotent: re-canonicalizing the canonical basis is a fixpoint.
            let again = Subspace::span(n, &s.basis()).unwrap();
            prop_assert_eq!(&again, &s);
            // Order independent.
            vectors.reverse();
            prop_assert_eq!(Subspace::canonicalize(&vectors).unwrap(), s);
        }
    }
}
