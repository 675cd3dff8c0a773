//! Pure and mixed states on a [`HilbertSpace`].

use faer::{Mat, Side};
use num_complex::Complex64;

use crate::error::{Result, UpbError};
use crate::fockspace::{HilbertSpace, QOperator};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Anything an operator expectation value can be taken against.
pub trait QuantumState {
    fn space(&self) -> HilbertSpace;

    /// `Tr[ρ O]` for mixed states, `⟨ψ|O|ψ⟩/⟨ψ|ψ⟩` for pure states.
    fn expectation(&self, op: &QOperator) -> Result<Complex64>;
}

/// Free-function form of [`QuantumState::expectation`].
pub fn expectation<S: QuantumState + ?Sized>(state: &S, op: &QOperator) -> Result<Complex64> {
    state.expectation(op)
}

/// Dense density matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    space: HilbertSpace,
    data: Vec<Complex64>,
}

impl DensityMatrix {
    /// Wraps raw row-major entries. No physicality check is made.
    pub fn from_raw(space: HilbertSpace, data: Vec<Complex64>) -> Result<Self> {
        let d = space.dim();
        if data.len() != d * d {
            return Err(UpbError::InvalidParameter(format!(
                "density matrix needs {} entries, got {}",
                d * d,
                data.len()
            )));
        }
        Ok(Self { space, data })
    }

    /// Projector on a Fock state |n₁, n₂⟩.
    pub fn fock(space: HilbertSpace, n1: usize, n2: usize) -> Result<Self> {
        let i = space.encode(n1, n2).ok_or_else(|| {
            UpbError::InvalidParameter(format!("|{n1},{n2}> outside truncation {space}"))
        })?;
        let d = space.dim();
        let mut data = vec![ZERO; d * d];
        data[i * d + i] = ONE;
        Ok(Self { space, data })
    }

    pub fn vacuum(space: HilbertSpace) -> Self {
        Self::fock(space, 0, 0).expect("vacuum is always representable")
    }

    /// Diagonal state with the given populations over the flat basis.
    pub fn diagonal(space: HilbertSpace, populations: &[f64]) -> Result<Self> {
        let d = space.dim();
        if populations.len() != d {
            return Err(UpbError::InvalidParameter("population vector length".into()));
        }
        let mut data = vec![ZERO; d * d];
        for (i, p) in populations.iter().enumerate() {
            data[i * d + i] = Complex64::new(*p, 0.0);
        }
        Ok(Self { space, data })
    }

    /// |ψ⟩⟨ψ|/⟨ψ|ψ⟩.
    pub fn from_pure(psi: &WaveFunction) -> Self {
        let d = psi.space.dim();
        let inv = 1.0 / psi.norm_sqr();
        let mut data = vec![ZERO; d * d];
        for i in 0..d {
            for j in 0..d {
                data[i * d + j] = psi.amplitudes[i] * psi.amplitudes[j].conj() * inv;
            }
        }
        Self { space: psi.space, data }
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_raw(self) -> Vec<Complex64> {
        self.data
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.dim() + j]
    }

    pub fn trace(&self) -> Complex64 {
        let d = self.dim();
        (0..d).map(|i| self.data[i * d + i]).sum()
    }

    /// Largest entrywise |ρ − ρ†|.
    pub fn hermiticity_defect(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in i..d {
                worst = worst.max((self.data[i * d + j] - self.data[j * d + i].conj()).norm());
            }
        }
        worst
    }

    fn hermitian_part(&self) -> Mat<Complex64> {
        let d = self.dim();
        Mat::from_fn(d, d, |i, j| 0.5 * (self.data[i * d + j] + self.data[j * d + i].conj()))
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        self.hermitian_part()
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|e| UpbError::InvalidParameter(format!("eigen-decomposition failed: {e:?}")))
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.eigenvalues()?.first().copied().unwrap_or(0.0))
    }

    /// Trace distance ½‖ρ − σ‖₁.
    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64> {
        self.space.check_same(&other.space)?;
        let diff = DensityMatrix {
            space: self.space,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        };
        Ok(0.5 * diff.eigenvalues()?.iter().map(|x| x.abs()).sum::<f64>())
    }

    /// Largest entrywise |ρ − σ|.
    pub fn max_abs_diff(&self, other: &DensityMatrix) -> Result<f64> {
        self.space.check_same(&other.space)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
    }

    /// Summary of the physicality checks on this state.
    pub fn physicality(&self) -> Result<Physicality> {
        Ok(Physicality {
            trace_error: (self.trace() - ONE).norm(),
            hermiticity_defect: self.hermiticity_defect(),
            min_eigenvalue: self.min_eigenvalue()?,
        })
    }
}

impl QuantumState for DensityMatrix {
    fn space(&self) -> HilbertSpace {
        self.space
    }

    fn expectation(&self, op: &QOperator) -> Result<Complex64> {
        self.space.check_same(&op.space())?;
        let d = self.dim();
        // Tr[ρO] = Σ_{r,c} O_rc ρ_cr
        Ok(op.entries().map(|(r, c, v)| v * self.data[c * d + r]).sum())
    }
}

/// Trace, Hermiticity and positivity diagnostics of a density matrix.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Physicality {
    pub trace_error: f64,
    pub hermiticity_defect: f64,
    pub min_eigenvalue: f64,
}

impl Physicality {
    /// Worst-case merge of two reports.
    pub fn merge(self, other: Physicality) -> Physicality {
        Physicality {
            trace_error: self.trace_error.max(other.trace_error),
            hermiticity_defect: self.hermiticity_defect.max(other.hermiticity_defect),
            min_eigenvalue: self.min_eigenvalue.min(other.min_eigenvalue),
        }
    }

    pub fn perfect() -> Physicality {
        Physicality { trace_error: 0.0, hermiticity_defect: 0.0, min_eigenvalue: f64::INFINITY }
    }

    /// Trace drift ≤ 1e-8, Hermiticity ≤ 1e-9, eigenvalues ≥ −1e-7.
    pub fn is_physical(&self) -> bool {
        self.trace_error <= 1e-8 && self.hermiticity_defect <= 1e-9 && self.min_eigenvalue >= -1e-7
    }
}

/// Possibly unnormalized pure state. The squared norm is cached and kept in
/// sync by every mutating method.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveFunction {
    space: HilbertSpace,
    amplitudes: Vec<Complex64>,
    norm_sqr: f64,
}

impl WaveFunction {
    pub fn new(space: HilbertSpace, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != space.dim() {
            return Err(UpbError::InvalidParameter(format!(
                "wave function needs {} amplitudes, got {}",
                space.dim(),
                amplitudes.len()
            )));
        }
        let norm_sqr = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        Ok(Self { space, amplitudes, norm_sqr })
    }

    pub fn fock(space: HilbertSpace, n1: usize, n2: usize) -> Result<Self> {
        let i = space.encode(n1, n2).ok_or_else(|| {
            UpbError::InvalidParameter(format!("|{n1},{n2}> outside truncation {space}"))
        })?;
        let mut amplitudes = vec![ZERO; space.dim()];
        amplitudes[i] = ONE;
        Ok(Self { space, amplitudes, norm_sqr: 1.0 })
    }

    pub fn vacuum(space: HilbertSpace) -> Self {
        Self::fock(space, 0, 0).expect("vacuum is always representable")
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.norm_sqr
    }

    /// Replaces the amplitudes, refreshing the cached norm.
    pub fn set_amplitudes(&mut self, amplitudes: &[Complex64]) {
        self.amplitudes.copy_from_slice(amplitudes);
        self.norm_sqr = self.amplitudes.iter().map(|a| a.norm_sqr()).sum();
    }

    /// Rescales to unit norm. Fails on a zero vector.
    pub fn normalize(&mut self) -> Result<()> {
        if !(self.norm_sqr > 0.0) || !self.norm_sqr.is_finite() {
            return Err(UpbError::InvalidParameter(format!(
                "cannot normalize state with norm² = {}",
                self.norm_sqr
            )));
        }
        let s = 1.0 / self.norm_sqr.sqrt();
        self.amplitudes.iter_mut().for_each(|a| *a *= s);
        self.norm_sqr = self.amplitudes.iter().map(|a| a.norm_sqr()).sum();
        Ok(())
    }

    /// `O|ψ⟩` as a new (unnormalized) state.
    pub fn apply(&self, op: &QOperator) -> Result<WaveFunction> {
        self.space.check_same(&op.space())?;
        let mut out = vec![ZERO; self.space.dim()];
        op.apply(&self.amplitudes, &mut out);
        WaveFunction::new(self.space, out)
    }

    /// ⟨ψ|O|ψ⟩ without normalization.
    pub fn raw_expectation(&self, op: &QOperator) -> Complex64 {
        op.entries().map(|(r, c, v)| self.amplitudes[r].conj() * v * self.amplitudes[c]).sum()
    }
}

impl QuantumState for WaveFunction {
    fn space(&self) -> HilbertSpace {
        self.space
    }

    fn expectation(&self, op: &QOperator) -> Result<Complex64> {
        self.space.check_same(&op.space())?;
        if !(self.norm_sqr > 0.0) {
            return Err(UpbError::InvalidParameter("expectation on zero-norm state".into()));
        }
        Ok(self.raw_expectation(op) / self.norm_sqr)
    }
}
