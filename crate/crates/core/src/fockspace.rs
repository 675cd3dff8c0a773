//! Truncated two-mode Fock space and sparse operators acting on it.
//!
//! Basis states |n₁, n₂⟩ are flattened as `n₁ * n2_levels + n₂`. A local
//! dimension of `N` keeps occupations `0..N`.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, UpbError};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// One of the two resonators of the photonic molecule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cavity {
    One,
    Two,
}

impl Cavity {
    pub fn index(self) -> u8 {
        match self {
            Cavity::One => 1,
            Cavity::Two => 2,
        }
    }
}

impl TryFrom<u8> for Cavity {
    type Error = UpbError;

    fn try_from(value: u8) -> Result<Self> {
        match value {
            1 => Ok(Cavity::One),
            2 => Ok(Cavity::Two),
            other => Err(UpbError::InvalidCavity(other)),
        }
    }
}

/// Truncated two-mode bosonic Hilbert space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Levels", into = "Levels")]
pub struct HilbertSpace {
    n1_levels: usize,
    n2_levels: usize,
}

#[derive(Serialize, Deserialize)]
struct Levels {
    n1_levels: usize,
    n2_levels: usize,
}

impl TryFrom<Levels> for HilbertSpace {
    type Error = UpbError;

    fn try_from(l: Levels) -> Result<Self> {
        Self::new(l.n1_levels, l.n2_levels)
    }
}

impl From<HilbertSpace> for Levels {
    fn from(s: HilbertSpace) -> Self {
        Levels { n1_levels: s.n1_levels, n2_levels: s.n2_levels }
    }
}

impl HilbertSpace {
    /// Builds the product space; each cavity needs at least two levels.
    pub fn new(n1_levels: usize, n2_levels: usize) -> Result<Self> {
        if n1_levels < 2 {
            return Err(UpbError::InvalidTruncation { cavity: 1, levels: n1_levels });
        }
        if n2_levels < 2 {
            return Err(UpbError::InvalidTruncation { cavity: 2, levels: n2_levels });
        }
        Ok(Self { n1_levels, n2_levels })
    }

    pub fn n1_levels(&self) -> usize {
        self.n1_levels
    }

    pub fn n2_levels(&self) -> usize {
        self.n2_levels
    }

    pub fn levels(&self, cavity: Cavity) -> usize {
        match cavity {
            Cavity::One => self.n1_levels,
            Cavity::Two => self.n2_levels,
        }
    }

    pub fn dim(&self) -> usize {
        self.n1_levels * self.n2_levels
    }

    /// Flat index of |n₁, n₂⟩, or `None` when outside the truncation.
    pub fn encode(&self, n1: usize, n2: usize) -> Option<usize> {
        (n1 < self.n1_levels && n2 < self.n2_levels).then(|| n1 * self.n2_levels + n2)
    }

    /// Occupations (n₁, n₂) of a flat index.
    pub fn decode(&self, index: usize) -> Option<(usize, usize)> {
        (index < self.dim()).then(|| (index / self.n2_levels, index % self.n2_levels))
    }

    pub(crate) fn check_same(&self, other: &HilbertSpace) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(UpbError::SpaceMismatch { left: self.to_string(), right: other.to_string() })
        }
    }
}

impl fmt::Display for HilbertSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.n1_levels, self.n2_levels)
    }
}

/// Sparse complex operator in compressed-row form with column indices sorted
/// inside each row.
#[derive(Debug, Clone, PartialEq)]
pub struct QOperator {
    space: HilbertSpace,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<Complex64>,
}

impl QOperator {
    /// Builds an operator from (row, col, value) triplets. Duplicates are
    /// summed; exact zeros are dropped.
    pub fn from_triplets(
        space: HilbertSpace,
        triplets: impl IntoIterator<Item = (usize, usize, Complex64)>,
    ) -> Self {
        let dim = space.dim();
        let mut rows: Vec<BTreeMap<usize, Complex64>> = vec![BTreeMap::new(); dim];
        for (r, c, v) in triplets {
            assert!(r < dim && c < dim, "triplet ({r}, {c}) outside {dim}x{dim}");
            *rows[r].entry(c).or_insert(ZERO) += v;
        }
        Self::from_rows(space, rows)
    }

    fn from_rows(space: HilbertSpace, rows: Vec<BTreeMap<usize, Complex64>>) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut cols = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for row in rows {
            for (c, v) in row {
                if v != ZERO {
                    cols.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self { space, row_ptr, cols, values }
    }

    pub fn zero(space: HilbertSpace) -> Self {
        Self { space, row_ptr: vec![0; space.dim() + 1], cols: Vec::new(), values: Vec::new() }
    }

    pub fn identity(space: HilbertSpace) -> Self {
        Self::from_triplets(space, (0..space.dim()).map(|i| (i, i, Complex64::new(1.0, 0.0))))
    }

    /// Annihilation operator of one cavity: ⟨n−1|â|n⟩ = √n.
    pub fn annihilation(space: HilbertSpace, cavity: Cavity) -> Self {
        let triplets = (0..space.dim()).filter_map(|i| {
            let (n1, n2) = space.decode(i)?;
            let (target, n) = match cavity {
                Cavity::One if n1 > 0 => (space.encode(n1 - 1, n2)?, n1),
                Cavity::Two if n2 > 0 => (space.encode(n1, n2 - 1)?, n2),
                _ => return None,
            };
            Some((target, i, Complex64::new((n as f64).sqrt(), 0.0)))
        });
        Self::from_triplets(space, triplets)
    }

    pub fn creation(space: HilbertSpace, cavity: Cavity) -> Self {
        Self::annihilation(space, cavity).dagger()
    }

    /// Number operator â†â of one cavity.
    pub fn number(space: HilbertSpace, cavity: Cavity) -> Self {
        let a = Self::annihilation(space, cavity);
        a.dagger().mul(&a).expect("same space")
    }

    pub fn space(&self) -> HilbertSpace {
        self.space
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterates over the stored entries of one row as (column, value).
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    /// Iterates over all stored entries as (row, column, value), row-major.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.space.dim()).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    /// Matrix element ⟨r|O|c⟩.
    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.cols[span.clone()].binary_search(&c) {
            Ok(k) => self.values[span.start + k],
            Err(_) => ZERO,
        }
    }

    fn position(&self, r: usize, c: usize) -> Option<usize> {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()].binary_search(&c).ok().map(|k| span.start + k)
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self::from_triplets(self.space, self.entries().map(|(r, c, v)| (r, c, v * factor)))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.space.check_same(&other.space)?;
        Ok(Self::from_triplets(self.space, self.entries().chain(other.entries())))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.space.check_same(&other.space)?;
        Ok(Self::from_triplets(
            self.space,
            self.entries().chain(other.entries().map(|(r, c, v)| (r, c, -v))),
        ))
    }

    /// Operator product `self · other`.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.space.check_same(&other.space)?;
        let rows = (0..self.space.dim())
            .map(|r| {
                let mut acc = BTreeMap::new();
                for (k, a) in self.row(r) {
                    for (c, b) in other.row(k) {
                        *acc.entry(c).or_insert(ZERO) += a * b;
                    }
                }
                acc
            })
            .collect();
        Ok(Self::from_rows(self.space, rows))
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Self {
        Self::from_triplets(self.space, self.entries().map(|(r, c, v)| (c, r, v.conj())))
    }

    /// `[self, other] = self·other − other·self`.
    pub fn commutator(&self, other: &Self) -> Result<Self> {
        self.mul(other)?.sub(&other.mul(self)?)
    }

    /// Largest entrywise deviation from Hermiticity.
    pub fn hermiticity_defect(&self) -> f64 {
        let dag = self.dagger();
        self.sub(&dag)
            .expect("same space")
            .values
            .iter()
            .map(|v| v.norm())
            .fold(0.0, f64::max)
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `out = O·x` for a state vector.
    pub fn apply(&self, x: &[Complex64], out: &mut [Complex64]) {
        debug_assert_eq!(x.len(), self.space.dim());
        for (r, o) in out.iter_mut().enumerate() {
            *o = self.row(r).map(|(c, v)| v * x[c]).sum();
        }
    }

    /// `out = m·O†` for a dense row-major `dim × dim` matrix.
    pub fn dense_mul_adjoint(&self, m: &[Complex64], out: &mut [Complex64]) {
        let d = self.space.dim();
        debug_assert_eq!(m.len(), d * d);
        for i in 0..d {
            let row = &m[i * d..(i + 1) * d];
            for (k, o) in out[i * d..(i + 1) * d].iter_mut().enumerate() {
                *o = self.row(k).map(|(q, v)| row[q] * v.conj()).sum();
            }
        }
    }

    /// `out = O·m` for a dense row-major `dim × dim` matrix.
    pub fn mul_dense(&self, m: &[Complex64], out: &mut [Complex64]) {
        let d = self.space.dim();
        debug_assert_eq!(m.len(), d * d);
        out.fill(ZERO);
        for r in 0..d {
            let dst = &mut out[r * d..(r + 1) * d];
            for (c, v) in self.row(r) {
                let src = &m[c * d..(c + 1) * d];
                for (o, s) in dst.iter_mut().zip(src) {
                    *o += v * s;
                }
            }
        }
    }

    pub fn to_dense(&self) -> Vec<Complex64> {
        let d = self.space.dim();
        let mut m = vec![ZERO; d * d];
        for (r, c, v) in self.entries() {
            m[r * d + c] = v;
        }
        m
    }
}

/// Fixed operators `B_k` sharing one sparsity pattern, so that linear
/// combinations `Σ_k c_k B_k` can be re-evaluated cheaply in inner loops.
#[derive(Debug, Clone)]
pub struct OperatorBasis {
    template: QOperator,
    /// Per component: (position in the template's value array, value).
    components: Vec<Vec<(usize, Complex64)>>,
}

impl OperatorBasis {
    pub fn new(terms: &[QOperator]) -> Result<Self> {
        let space = terms.first().map(|t| t.space).ok_or_else(|| {
            UpbError::InvalidParameter("operator basis needs at least one term".into())
        })?;
        for t in terms {
            space.check_same(&t.space)?;
        }
        let one = Complex64::new(1.0, 0.0);
        let template =
            QOperator::from_triplets(space, terms.iter().flat_map(|t| t.entries().map(move |(r, c, _)| (r, c, one))));
        let components = terms
            .iter()
            .map(|t| {
                t.entries()
                    .map(|(r, c, v)| (template.position(r, c).expect("entry in union pattern"), v))
                    .collect()
            })
            .collect();
        Ok(Self { template, components })
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Operator with the shared pattern, to be filled by [`Self::combine_into`].
    pub fn template(&self) -> QOperator {
        self.template.clone()
    }

    /// Overwrites the values of `out` (a clone of [`Self::template`]) with
    /// `Σ_k coeffs[k]·B_k`. Cancellations leave explicit zeros in place.
    pub fn combine_into(&self, coeffs: &[Complex64], out: &mut QOperator) {
        debug_assert_eq!(coeffs.len(), self.components.len());
        debug_assert_eq!(out.values.len(), self.template.values.len());
        out.values.fill(ZERO);
        for (comp, &c) in self.components.iter().zip(coeffs) {
            if c == ZERO {
                continue;
            }
            for &(k, v) in comp {
                out.values[k] += c * v;
            }
        }
    }

    pub fn combine(&self, coeffs: &[Complex64]) -> QOperator {
        let mut out = self.template();
        self.combine_into(coeffs, &mut out);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn default_truncation_dimension() {
        assert_eq!(HilbertSpace::new(4, 18).unwrap().dim(), 72);
        assert_eq!(HilbertSpace::new(2, 2).unwrap().dim(), 4);
    }

    #[test]
    fn rejects_single_level() {
        assert!(matches!(
            HilbertSpace::new(1, 5),
            Err(UpbError::InvalidTruncation { cavity: 1, levels: 1 })
        ));
        assert!(HilbertSpace::new(3, 0).is_err());
    }

    #[test]
    fn encode_decode_round_trip_3x5() {
        let s = HilbertSpace::new(3, 5).unwrap();
        let mut seen = vec![false; 15];
        for n1 in 0..3 {
            for n2 in 0..5 {
                let i = s.encode(n1, n2).unwrap();
                assert_eq!(i, n1 * 5 + n2);
                assert_eq!(s.decode(i), Some((n1, n2)));
                assert!(!seen[i]);
                seen[i] = true;
            }
        }
        assert!(seen.iter().all(|&b| b));
        assert_eq!(s.encode(3, 0), None);
        assert_eq!(s.decode(15), None);
    }

    #[test]
    fn ladder_on_smallest_space() {
        let s = HilbertSpace::new(2, 2).unwrap();
        let a = QOperator::annihilation(s, Cavity::One);
        let mut psi = vec![c(0.0); 4];
        let mut out = vec![c(0.0); 4];
        psi[s.encode(1, 0).unwrap()] = c(1.0);
        a.apply(&psi, &mut out);
        assert_eq!(out[s.encode(0, 0).unwrap()], c(1.0));
        assert_eq!(out.iter().map(|v| v.norm()).sum::<f64>(), 1.0);

        psi.fill(c(0.0));
        psi[s.encode(0, 1).unwrap()] = c(1.0);
        a.apply(&psi, &mut out);
        assert!(out.iter().all(|v| *v == c(0.0)));
    }

    #[test]
    fn ladder_matrix_element() {
        let s = HilbertSpace::new(4, 3).unwrap();
        let a = QOperator::annihilation(s, Cavity::One);
        let v = a.get(s.encode(2, 1).unwrap(), s.encode(3, 1).unwrap());
        assert_eq!(v, c(3f64.sqrt()));
    }

    #[test]
    fn annihilation_nonzero_count() {
        let s = HilbertSpace::new(4, 6).unwrap();
        assert_eq!(QOperator::annihilation(s, Cavity::One).nnz(), 3 * 6);
        assert_eq!(QOperator::annihilation(s, Cavity::Two).nnz(), 5 * 4);
    }

    #[test]
    fn canonical_commutator_away_from_top_level() {
        let s = HilbertSpace::new(4, 4).unwrap();
        for cav in [Cavity::One, Cavity::Two] {
            let a = QOperator::annihilation(s, cav);
            let comm = a.commutator(&a.dagger()).unwrap();
            for i in 0..s.dim() {
                let (n1, n2) = s.decode(i).unwrap();
                let top = match cav {
                    Cavity::One => n1 == 3,
                    Cavity::Two => n2 == 3,
                };
                for j in 0..s.dim() {
                    let expected = if i == j && !top { 1.0 } else if i == j { -3.0 } else { 0.0 };
                    assert!((comm.get(i, j) - c(expected)).norm() < 1e-14, "({i},{j})");
                }
            }
        }
    }

    #[test]
    fn number_is_adag_a() {
        let s = HilbertSpace::new(3, 4).unwrap();
        let n = QOperator::number(s, Cavity::Two);
        for i in 0..s.dim() {
            let (_, n2) = s.decode(i).unwrap();
            assert!((n.get(i, i) - c(n2 as f64)).norm() < 1e-14);
        }
        assert_eq!(n.nnz(), 3 * 3);
    }

    #[test]
    fn algebra_identities() {
        let s = HilbertSpace::new(3, 3).unwrap();
        let a1 = QOperator::annihilation(s, Cavity::One);
        let a2 = QOperator::annihilation(s, Cavity::Two);
        let x = a1.mul(&a2.dagger()).unwrap().scale(Complex64::new(0.3, -0.7));
        assert_eq!(x.dagger().dagger(), x);

        let n1 = QOperator::number(s, Cavity::One);
        let n2 = QOperator::number(s, Cavity::Two);
        assert_eq!(n1.commutator(&n2).unwrap().nnz(), 0);

        let two_photon = a1.dagger().mul(&a1.dagger()).unwrap().mul(&a1).unwrap().mul(&a1).unwrap();
        let i20 = s.encode(2, 0).unwrap();
        assert!((two_photon.get(i20, i20) - c(2.0)).norm() < 1e-14);
    }

    #[test]
    fn mismatched_spaces_rejected() {
        let a = QOperator::identity(HilbertSpace::new(2, 3).unwrap());
        let b = QOperator::identity(HilbertSpace::new(3, 2).unwrap());
        assert!(matches!(a.add(&b), Err(UpbError::SpaceMismatch { .. })));
        assert!(a.mul(&b).is_err());
        assert!(a.commutator(&b).is_err());
    }

    #[test]
    fn dense_product_matches_sparse() {
        let s = HilbertSpace::new(2, 3).unwrap();
        let a = QOperator::annihilation(s, Cavity::Two).add(&QOperator::creation(s, Cavity::One)).unwrap();
        let b = QOperator::number(s, Cavity::One).scale(Complex64::new(0.0, 2.0));
        let mut out = vec![ZERO; 36];
        a.mul_dense(&b.to_dense(), &mut out);
        assert_eq!(out, a.mul(&b).unwrap().to_dense());
    }

    #[test]
    fn construction_is_deterministic() {
        let s = HilbertSpace::new(4, 7).unwrap();
        let build = || {
            let a = QOperator::annihilation(s, Cavity::One);
            a.dagger().mul(&QOperator::annihilation(s, Cavity::Two)).unwrap()
        };
        let (x, y) = (build(), build());
        assert_eq!(x.row_ptr, y.row_ptr);
        assert_eq!(x.cols, y.cols);
        assert_eq!(
            x.values.iter().map(|v| (v.re.to_bits(), v.im.to_bits())).collect::<Vec<_>>(),
            y.values.iter().map(|v| (v.re.to_bits(), v.im.to_bits())).collect::<Vec<_>>()
        );
    }
    #[test]
    fn dense_times_adjoint_matches_sparse() {
        let s = HilbertSpace::new(3, 2).unwrap();
        let a = QOperator::annihilation(s, Cavity::One).scale(Complex64::new(0.5, -1.5));
        let m = QOperator::creation(s, Cavity::Two).add(&QOperator::number(s, Cavity::One)).unwrap();
        let mut out = vec![ZERO; 36];
        a.dense_mul_adjoint(&m.to_dense(), &mut out);
        assert_eq!(out, m.mul(&a.dagger()).unwrap().to_dense());
    }

    #[test]
    fn basis_combination_matches_direct_sum() {
        let s = HilbertSpace::new(3, 3).unwrap();
        let a1 = QOperator::annihilation(s, Cavity::One);
        let n2 = QOperator::number(s, Cavity::Two);
        let hop = a1.dagger().mul(&QOperator::annihilation(s, Cavity::Two)).unwrap();
        let basis = OperatorBasis::new(&[a1.clone(), n2.clone(), hop.clone()]).unwrap();
        assert_eq!(basis.len(), 3);
        let coeffs = [Complex64::new(0.3, 1.0), c(-2.0), Complex64::new(0.0, 0.7)];
        let direct = a1
            .scale(coeffs[0])
            .add(&n2.scale(coeffs[1]))
            .unwrap()
            .add(&hop.scale(coeffs[2]))
            .unwrap();
        assert_eq!(basis.combine(&coeffs).to_dense(), direct.to_dense());
        let mut reused = basis.template();
        basis.combine_into(&coeffs, &mut reused);
        basis.combine_into(&[c(1.0), ZERO, ZERO], &mut reused);
        assert_eq!(reused.to_dense(), a1.to_dense());
        assert!(OperatorBasis::new(&[]).is_err());
        let other = QOperator::identity(HilbertSpace::new(2, 2).unwrap());
        assert!(OperatorBasis::new(&[a1, other]).is_err());
    }
}
