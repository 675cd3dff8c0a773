//! Representation of the cavity fields relative to a reference amplitude.
//!
//! Under a strong coherent drive most of the photons in each cavity are in a
//! classical coherent component. Writing `â_j = α_j(t) + d̂_j` with `α_j(t)`
//! the solution of the mean-field equations
//!
//! ```text
//! dα_j/dt = −i(Δ_j α_j − 2U_j|α_j|²α_j + J α_k + F_j(t)) − (κ_j/2) α_j
//! ```
//!
//! and evolving the state of the fluctuations `d̂_j` in a small truncated
//! space is a unitary change of frame (a time-dependent displacement). It is
//! exact up to the truncation of the fluctuation space, which then only has
//! to hold the quantum part of the field instead of the full coherent
//! amplitude. With `α ≡ 0` every expression below reduces to the lab frame.
//!
//! All operators are expanded in normal order in `d̂_j`, so the generator
//! is assembled from a fixed set of operators with amplitude-dependent
//! coefficients.

use std::cell::RefCell;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::SystemParams;
use crate::error::Result;
use crate::fockspace::{Cavity, HilbertSpace, OperatorBasis, QOperator};
use crate::ode::OdeSystem;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Reference amplitude used to represent the cavity fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Frame {
    /// Plain Fock basis of the cavity modes.
    #[default]
    Lab,
    /// Fock basis of the fluctuations around the mean-field amplitudes.
    MeanField,
}

/// Right-hand side of the mean-field (classical) equations of motion.
pub fn mean_field_rhs(params: &SystemParams, t: f64, alpha: [Complex64; 2]) -> [Complex64; 2] {
    let f = params.drive.amplitude_at(t);
    let [a1, a2] = alpha;
    let d1 = -I * (params.delta1 * a1 - 2.0 * params.u1 * a1.norm_sqr() * a1 + params.j_coupling * a2 + f)
        - 0.5 * params.kappa1 * a1;
    let d2 = -I * (params.delta2 * a2 - 2.0 * params.u2 * a2.norm_sqr() * a2 + params.j_coupling * a1)
        - 0.5 * params.kappa2 * a2;
    [d1, d2]
}

// Per-cavity operator slots in the Hamiltonian basis.
const D: usize = 0;
const DDAG: usize = 1;
const N: usize = 2;
const DD: usize = 3;
const DDAG2: usize = 4;
const DDAG_DD: usize = 5;
const DDAG2_D: usize = 6;
const KERR: usize = 7;
const PER_CAVITY: usize = 8;
const HOP12: usize = 2 * PER_CAVITY;
const HOP21: usize = HOP12 + 1;
const IDENTITY: usize = HOP21 + 1;
const H_TERMS: usize = IDENTITY + 1;

/// Operator families of the displaced expansion on one truncated space.
#[derive(Debug, Clone)]
pub struct FrameModel {
    space: HilbertSpace,
    params: SystemParams,
    frame: Frame,
    hamiltonian: OperatorBasis,
    /// `[1, d̂_j]` per cavity.
    field: [OperatorBasis; 2],
    /// `[1, d̂, d̂†, d̂†d̂]` per cavity.
    number: [OperatorBasis; 2],
    /// `[1, d̂, d̂†, d̂d̂, d̂†d̂†, d̂†d̂, d̂†d̂d̂, d̂†d̂†d̂, d̂†d̂†d̂d̂]` for cavity 1.
    pair: OperatorBasis,
}

impl FrameModel {
    pub fn new(params: &SystemParams, space: HilbertSpace, frame: Frame) -> Result<Self> {
        params.validate()?;
        let id = QOperator::identity(space);
        let per_cavity = |c: Cavity| -> Result<[QOperator; PER_CAVITY]> {
            let d = QOperator::annihilation(space, c);
            let dg = d.dagger();
            let dd = d.mul(&d)?;
            let dg2 = dg.mul(&dg)?;
            Ok([d.clone(), dg.clone(), dg.mul(&d)?, dd.clone(), dg2.clone(), dg.mul(&dd)?, dg2.mul(&d)?, dg2.mul(&dd)?])
        };
        let c1 = per_cavity(Cavity::One)?;
        let c2 = per_cavity(Cavity::Two)?;
        let hop12 = c1[DDAG].mul(&c2[D])?;
        let hop21 = c2[DDAG].mul(&c1[D])?;
        let mut terms: Vec<QOperator> = c1.iter().chain(c2.iter()).cloned().collect();
        terms.extend([hop12, hop21, id.clone()]);
        let hamiltonian = OperatorBasis::new(&terms)?;
        let field = [
            OperatorBasis::new(&[id.clone(), c1[D].clone()])?,
            OperatorBasis::new(&[id.clone(), c2[D].clone()])?,
        ];
        let number = [
            OperatorBasis::new(&[id.clone(), c1[D].clone(), c1[DDAG].clone(), c1[N].clone()])?,
            OperatorBasis::new(&[id.clone(), c2[D].clone(), c2[DDAG].clone(), c2[N].clone()])?,
        ];
        let pair = OperatorBasis::new(&[
            id,
            c1[D].clone(),
            c1[DDAG].clone(),
            c1[DD].clone(),
            c1[DDAG2].clone(),
            c1[N].clone(),
            c1[DDAG_DD].clone(),
            c1[DDAG2_D].clone(),
            c1[KERR].clone(),
        ])?;
        Ok(Self { space, params: *params, frame, hamiltonian, field, number, pair })
    }

    pub fn space(&self) -> HilbertSpace {
        self.space
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    /// Time derivative of the reference amplitudes (zero in the lab frame).
    pub fn alpha_dot(&self, t: f64, alpha: [Complex64; 2]) -> [Complex64; 2] {
        match self.frame {
            Frame::Lab => [ZERO; 2],
            Frame::MeanField => mean_field_rhs(&self.params, t, alpha),
        }
    }

    /// Coefficients of the non-Hermitian effective Hamiltonian of the
    /// fluctuations when channel `j` is unravelled with the jump operator
    /// `â_j − β_j` (the Lindblad term is invariant under such shifts up to a
    /// Hamiltonian correction, included here). Hermitian c-numbers are
    /// dropped; they only contribute a global phase.
    pub fn hamiltonian_coeffs(
        &self,
        t: f64,
        alpha: [Complex64; 2],
        alpha_dot: [Complex64; 2],
        beta: [Complex64; 2],
    ) -> [Complex64; H_TERMS] {
        let p = &self.params;
        let f = p.drive.amplitude_at(t);
        let mut c = [ZERO; H_TERMS];
        let cav = [(p.delta1, p.u1, p.kappa1, f), (p.delta2, p.u2, p.kappa2, 0.0)];
        for j in 0..2 {
            let (delta, u, kappa, fj) = cav[j];
            let (a, ad, b) = (alpha[j], alpha_dot[j], beta[j]);
            let other = alpha[1 - j];
            let gamma = a - b;
            let n = a.norm_sqr();
            let o = j * PER_CAVITY;
            let coherent = delta * a - 2.0 * u * n * a + p.j_coupling * other + fj;
            c[o + DDAG] = coherent - I * ad - I * 0.5 * kappa * gamma - I * 0.5 * kappa * b;
            c[o + D] = coherent.conj() + I * ad.conj() - I * 0.5 * kappa * gamma.conj() + I * 0.5 * kappa * b.conj();
            c[o + N] = Complex64::new(delta - 4.0 * u * n, -0.5 * kappa);
            c[o + DD] = -u * a.conj() * a.conj();
            c[o + DDAG2] = -u * a * a;
            c[o + DDAG_DD] = -2.0 * u * a.conj();
            c[o + DDAG2_D] = -2.0 * u * a;
            c[o + KERR] = Complex64::new(-u, 0.0);
            c[IDENTITY] += -I * 0.5 * kappa * gamma.norm_sqr();
        }
        c[HOP12] = Complex64::new(p.j_coupling, 0.0);
        c[HOP21] = Complex64::new(p.j_coupling, 0.0);
        c
    }

    pub fn hamiltonian_template(&self) -> QOperator {
        self.hamiltonian.template()
    }

    pub fn assemble_hamiltonian(&self, coeffs: &[Complex64; H_TERMS], out: &mut QOperator) {
        self.hamiltonian.combine_into(coeffs, out);
    }

    /// `γ + d̂_j`.
    pub fn field_operator(&self, cavity: Cavity, gamma: Complex64) -> QOperator {
        self.field[cavity_index(cavity)].combine(&[gamma, ONE])
    }

    pub fn field_template(&self, cavity: Cavity) -> QOperator {
        self.field[cavity_index(cavity)].template()
    }

    pub fn assemble_field(&self, cavity: Cavity, gamma: Complex64, out: &mut QOperator) {
        self.field[cavity_index(cavity)].combine_into(&[gamma, ONE], out);
    }

    /// `â_j†â_j` with `â_j = α + d̂_j`.
    pub fn number_operator(&self, cavity: Cavity, alpha: Complex64) -> QOperator {
        self.number[cavity_index(cavity)].combine(&[Complex64::new(alpha.norm_sqr(), 0.0), alpha.conj(), alpha, ONE])
    }

    /// `â₁†â₁†â₁â₁` with `â₁ = α + d̂₁`, normal ordered.
    pub fn pair_operator(&self, alpha: Complex64) -> QOperator {
        let n = alpha.norm_sqr();
        let ac = alpha.conj();
        self.pair.combine(&[
            Complex64::new(n * n, 0.0),
            2.0 * n * ac,
            2.0 * n * alpha,
            ac * ac,
            alpha * alpha,
            Complex64::new(4.0 * n, 0.0),
            2.0 * ac,
            2.0 * alpha,
            ONE,
        ])
    }
}

fn cavity_index(c: Cavity) -> usize {
    c.index() as usize - 1
}

/// Lindblad equation for the fluctuation density matrix, augmented with the
/// two reference amplitudes: the state vector is `[ρ (row-major), α₁, α₂]`.
///
/// Both channels are written with the fluctuation jump operators `d̂_j`,
/// which makes the generator free of large cancelling terms.
#[derive(Debug)]
pub struct FrameMasterEquation<'a> {
    model: &'a FrameModel,
    jumps: [(f64, QOperator); 2],
    scratch: RefCell<Scratch>,
}

#[derive(Debug)]
struct Scratch {
    h: QOperator,
    a: Vec<Complex64>,
    b: Vec<Complex64>,
}

impl<'a> FrameMasterEquation<'a> {
    pub fn new(model: &'a FrameModel) -> Self {
        let s = model.space;
        let d2 = s.dim() * s.dim();
        let p = &model.params;
        Self {
            model,
            jumps: [
                (p.kappa1, QOperator::annihilation(s, Cavity::One)),
                (p.kappa2, QOperator::annihilation(s, Cavity::Two)),
            ],
            scratch: RefCell::new(Scratch { h: model.hamiltonian_template(), a: vec![ZERO; d2], b: vec![ZERO; d2] }),
        }
    }

    pub fn model(&self) -> &FrameModel {
        self.model
    }

    /// Splits an augmented state into the matrix part and the amplitudes.
    pub fn split(y: &[Complex64]) -> (&[Complex64], [Complex64; 2]) {
        let n = y.len() - 2;
        (&y[..n], [y[n], y[n + 1]])
    }

    pub fn augment(matrix: &[Complex64], alpha: [Complex64; 2]) -> Vec<Complex64> {
        let mut y = Vec::with_capacity(matrix.len() + 2);
        y.extend_from_slice(matrix);
        y.extend(alpha);
        y
    }
}

impl OdeSystem for FrameMasterEquation<'_> {
    fn dim(&self) -> usize {
        self.model.space.dim().pow(2) + 2
    }

    fn rhs(&self, t: f64, y: &[Complex64], dy: &mut [Complex64]) {
        let (rho, alpha) = Self::split(y);
        let n = rho.len();
        let alpha_dot = self.model.alpha_dot(t, alpha);
        dy[n] = alpha_dot[0];
        dy[n + 1] = alpha_dot[1];
        let out = &mut dy[..n];
        let mut guard = self.scratch.borrow_mut();
        let Scratch { h, a, b } = &mut *guard;
        let coeffs = self.model.hamiltonian_coeffs(t, alpha, alpha_dot, alpha);
        self.model.assemble_hamiltonian(&coeffs, h);
        h.mul_dense(rho, a);
        h.dense_mul_adjoint(rho, b);
        for ((o, x), y) in out.iter_mut().zip(a.iter()).zip(b.iter()) {
            *o = -I * (x - y);
        }
        for (rate, op) in &self.jumps {
            op.dense_mul_adjoint(rho, a);
            op.mul_dense(a, b);
            for (o, x) in out.iter_mut().zip(b.iter()) {
                *o += *rate * x;
            }
        }
    }
}

/// Tr[O·m] for a sparse operator and a dense row-major matrix.
pub fn trace_product(op: &QOperator, m: &[Complex64]) -> Complex64 {
    let d = op.space().dim();
    op.entries().map(|(r, c, v)| v * m[c * d + r]).sum()
}
