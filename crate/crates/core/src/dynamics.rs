//! Lindblad dynamics of the driven Kerr photonic molecule.
//!
//! Natural units throughout: ħ = 1, energies in units of ħκ and times in
//! units of 1/κ, where κ is the reference loss rate. The Hamiltonian is
//! written in the frame rotating at the laser frequency:
//!
//! ```text
//! H(t) = Σ_j [Δ_j n̂_j − U_j â_j†â_j†â_jâ_j] + J(â₁†â₂ + â₂†â₁) + F(t)(â₁† + â₁)
//! ```
//!
//! with Δ_j = ω_j − ω_L. `U_j` is the magnitude of the photon-photon
//! interaction energy of a red-shifting (positive χ⁽³⁾) Kerr medium, so the
//! optimal blockade detuning for `U_j > 0` is negative.

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, UpbError};
use crate::fockspace::{Cavity, HilbertSpace, QOperator};
use crate::frame::{trace_product, Frame, FrameMasterEquation, FrameModel};
use crate::ode::{Dopri5, OdeSystem, Tolerances};
use crate::state::{DensityMatrix, Physicality, QuantumState};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Occupations below this make g⁽²⁾ undefined.
pub const MIN_OCCUPATION: f64 = 1e-15;

/// Time-dependent coherent drive amplitude F(t) (units of ħκ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PulseShape {
    Constant {
        amplitude: f64,
    },
    /// Train of Gaussian pulses centered at `t0 + k·period`, `k < n_pulses`.
    GaussianTrain {
        amplitude: f64,
        sigma_t: f64,
        period: f64,
        t0: f64,
        n_pulses: usize,
    },
}

impl PulseShape {
    pub fn amplitude_at(&self, t: f64) -> f64 {
        match *self {
            PulseShape::Constant { amplitude } => amplitude,
            PulseShape::GaussianTrain { amplitude, sigma_t, period, t0, n_pulses } => {
                let inv = 1.0 / (2.0 * sigma_t * sigma_t);
                (0..n_pulses)
                    .map(|k| {
                        let dt = t - (t0 + k as f64 * period);
                        (-(dt * dt) * inv).exp()
                    })
                    .sum::<f64>()
                    * amplitude
            }
        }
    }

    pub fn peak_amplitude(&self) -> f64 {
        match *self {
            PulseShape::Constant { amplitude } | PulseShape::GaussianTrain { amplitude, .. } => amplitude,
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, PulseShape::Constant { .. })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            PulseShape::Constant { amplitude } if amplitude.is_finite() => Ok(()),
            PulseShape::GaussianTrain { amplitude, sigma_t, period, t0, n_pulses }
                if amplitude.is_finite()
                    && sigma_t.is_finite()
                    && period.is_finite()
                    && t0.is_finite()
                    && sigma_t > 0.0
                    && period > 0.0
                    && n_pulses >= 1 =>
            {
                Ok(())
            }
            _ => Err(UpbError::InvalidParameter(format!("invalid pulse shape {self:?}"))),
        }
    }
}

/// Physical parameters of the photonic molecule in natural units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub delta1: f64,
    pub delta2: f64,
    pub u1: f64,
    pub u2: f64,
    pub j_coupling: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub drive: PulseShape,
}

impl SystemParams {
    /// Symmetric molecule (Δ, U, κ=1 in both cavities).
    pub fn symmetric(delta: f64, u: f64, j_coupling: f64, drive: PulseShape) -> Self {
        Self { delta1: delta, delta2: delta, u1: u, u2: u, j_coupling, kappa1: 1.0, kappa2: 1.0, drive }
    }

    /// Continuous-wave parameter set used for the steady-state figures:
    /// U = 0.001ħκ, J = 19.6ħκ, Δ = −0.29κ.
    pub fn reference_cw(f: f64) -> Self {
        Self::symmetric(-0.29, 0.001, 19.6, PulseShape::Constant { amplitude: f })
    }

    /// Single Gaussian pulse of the pulsed protocol: σ_t = 4 ns, 20 ns
    /// period, F_peak = 150ħκ, with ħκ = 1 μeV setting the time unit. The
    /// pulse is centered at 4σ_t so that a simulation started from vacuum at
    /// t = 0 sees a negligible initial drive.
    pub fn reference_pulsed() -> Self {
        let scale = crate::device::PhysicalScale::reference();
        let sigma_t = scale.seconds_to_time_units(4e-9);
        let period = scale.seconds_to_time_units(20e-9);
        let drive = PulseShape::GaussianTrain { amplitude: 150.0, sigma_t, period, t0: 4.0 * sigma_t, n_pulses: 1 };
        Self::symmetric(-0.29, 0.001, 19.6, drive)
    }

    pub fn with_drive(mut self, drive: PulseShape) -> Self {
        self.drive = drive;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [self.delta1, self.delta2, self.u1, self.u2, self.j_coupling, self.kappa1, self.kappa2];
        if fields.iter().any(|x| !x.is_finite()) {
            return Err(UpbError::InvalidParameter("non-finite system parameter".into()));
        }
        if !(self.kappa1 >= 0.0 && self.kappa2 >= 0.0) {
            return Err(UpbError::InvalidParameter(format!(
                "loss rates must be non-negative (kappa1 = {}, kappa2 = {})",
                self.kappa1, self.kappa2
            )));
        }
        self.drive.validate()
    }

    pub fn kappa(&self, cavity: Cavity) -> f64 {
        match cavity {
            Cavity::One => self.kappa1,
            Cavity::Two => self.kappa2,
        }
    }
}

/// Static and drive parts of the Hamiltonian, H(t) = H₀ + F(t)·(â₁† + â₁).
#[derive(Debug, Clone)]
pub struct Hamiltonian {
    pub static_part: QOperator,
    pub drive_operator: QOperator,
    pub drive: PulseShape,
}

impl Hamiltonian {
    pub fn new(params: &SystemParams, space: HilbertSpace) -> Self {
        let mut trip = Vec::new();
        for i in 0..space.dim() {
            let (n1, n2) = space.decode(i).expect("index in range");
            let (x1, x2) = (n1 as f64, n2 as f64);
            let diag = params.delta1 * x1 + params.delta2 * x2
                - params.u1 * x1 * (x1 - 1.0).max(0.0)
                - params.u2 * x2 * (x2 - 1.0).max(0.0);
            trip.push((i, i, Complex64::new(diag, 0.0)));
            // J â₁†â₂ |n1,n2> = J √(n1+1)√n2 |n1+1,n2−1>
            if n2 > 0 {
                if let Some(k) = space.encode(n1 + 1, n2 - 1) {
                    let v = Complex64::new(params.j_coupling * ((n1 + 1) as f64).sqrt() * x2.sqrt(), 0.0);
                    trip.push((k, i, v));
                    trip.push((i, k, v));
                }
            }
        }
        let static_part = QOperator::from_triplets(space, trip);
        let a1 = QOperator::annihilation(space, Cavity::One);
        let drive_operator = a1.add(&a1.dagger()).expect("same space");
        Self { static_part, drive_operator, drive: params.drive }
    }

    pub fn at(&self, t: f64) -> QOperator {
        let f = self.drive.amplitude_at(t);
        self.static_part
            .add(&self.drive_operator.scale(Complex64::new(f, 0.0)))
            .expect("same space")
    }
}

/// Rotating-frame Hamiltonian at time `t`.
pub fn build_hamiltonian(params: &SystemParams, space: HilbertSpace, t: f64) -> QOperator {
    Hamiltonian::new(params, space).at(t)
}

/// Lindblad generator `dρ/dt = −i[H, ρ] + Σ_j κ_j (â_j ρ â_j† − ½{â_j†â_j, ρ})`
/// acting on dense row-major matrices.
#[derive(Debug, Clone)]
pub struct MasterEquation {
    space: HilbertSpace,
    /// H₀ − (i/2) Σ_j κ_j n̂_j
    h_eff: QOperator,
    drive_operator: QOperator,
    drive: PulseShape,
    jumps: Vec<(f64, QOperator)>,
    scratch: std::cell::RefCell<(Vec<Complex64>, Vec<Complex64>)>,
}

impl MasterEquation {
    pub fn new(params: &SystemParams, space: HilbertSpace) -> Result<Self> {
        params.validate()?;
        let ham = Hamiltonian::new(params, space);
        let damping = QOperator::number(space, Cavity::One)
            .scale(Complex64::new(0.0, -0.5 * params.kappa1))
            .add(&QOperator::number(space, Cavity::Two).scale(Complex64::new(0.0, -0.5 * params.kappa2)))?;
        let h_eff = ham.static_part.add(&damping)?;
        let jumps = [Cavity::One, Cavity::Two]
            .into_iter()
            .map(|c| (params.kappa(c), QOperator::annihilation(space, c)))
            .collect();
        let d2 = space.dim() * space.dim();
        Ok(Self {
            space,
            h_eff,
            drive_operator: ham.drive_operator,
            drive: params.drive,
            jumps,
            scratch: std::cell::RefCell::new((vec![ZERO; d2], vec![ZERO; d2])),
        })
    }

    pub fn space(&self) -> HilbertSpace {
        self.space
    }

    /// Non-Hermitian effective Hamiltonian at time `t`.
    pub fn effective_hamiltonian(&self, t: f64) -> QOperator {
        let f = self.drive.amplitude_at(t);
        self.h_eff.add(&self.drive_operator.scale(Complex64::new(f, 0.0))).expect("same space")
    }

    /// Applies the generator to an arbitrary (not necessarily Hermitian)
    /// matrix. Hermitian inputs give exactly Hermitian outputs.
    pub fn apply(&self, t: f64, rho: &[Complex64], out: &mut [Complex64]) {
        let f = self.drive.amplitude_at(t);
        let mut guard = self.scratch.borrow_mut();
        let (a, b) = &mut *guard;
        // a = H_eff ρ, b = ρ H_eff†
        self.h_eff.mul_dense(rho, a);
        self.h_eff.dense_mul_adjoint(rho, b);
        for ((o, x), y) in out.iter_mut().zip(a.iter()).zip(b.iter()) {
            *o = -I * (x - y);
        }
        if f != 0.0 {
            // the drive operator is Hermitian: −iF[V, ρ]
            let fc = -I * f;
            self.drive_operator.mul_dense(rho, a);
            self.drive_operator.dense_mul_adjoint(rho, b);
            for ((o, x), y) in out.iter_mut().zip(a.iter()).zip(b.iter()) {
                *o += fc * (x - y);
            }
        }
        for (rate, op) in &self.jumps {
            // a = ρ â†, b = â a
            op.dense_mul_adjoint(rho, a);
            op.mul_dense(a, b);
            let r = Complex64::new(*rate, 0.0);
            for (o, x) in out.iter_mut().zip(b.iter()) {
                *o += r * x;
            }
        }
    }

    /// Sparse vectorized generator (row-major vec: ρ_ij ↦ i·d + j), with the
    /// drive frozen at time `t`.
    pub fn liouvillian_triplets(&self, t: f64) -> Vec<(usize, usize, Complex64)> {
        let d = self.space.dim();
        let h = self.effective_hamiltonian(t);
        let mut trip = Vec::new();
        for (i, c, v) in h.entries() {
            for j in 0..d {
                trip.push((i * d + j, c * d + j, -I * v));
            }
        }
        for (j, q, v) in h.entries() {
            for i in 0..d {
                trip.push((i * d + j, i * d + q, I * v.conj()));
            }
        }
        for (rate, op) in &self.jumps {
            for (i, p, a) in op.entries() {
                for (j, q, b) in op.entries() {
                    trip.push((i * d + j, p * d + q, *rate * a * b.conj()));
                }
            }
        }
        trip
    }
}

impl OdeSystem for MasterEquation {
    fn dim(&self) -> usize {
        self.space.dim() * self.space.dim()
    }

    fn rhs(&self, t: f64, y: &[Complex64], dy: &mut [Complex64]) {
        self.apply(t, y, dy);
    }
}

/// `dρ/dt` for a density matrix at time `t`.
pub fn liouvillian_apply(params: &SystemParams, rho: &DensityMatrix, t: f64) -> Result<Vec<Complex64>> {
    let me = MasterEquation::new(params, rho.space())?;
    let mut out = vec![ZERO; rho.as_slice().len()];
    me.apply(t, rho.as_slice(), &mut out);
    Ok(out)
}

/// Steady-state solve diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SteadyStateReport {
    /// ‖L(ρ)‖_F / ‖L‖_F
    pub relative_residual: f64,
    pub used_dense_fallback: bool,
}

/// Solves L(ρ) = 0 with Tr ρ = 1 by a sparse LU factorization of the
/// vectorized generator, the trace condition replacing the (0,0) equation.
pub fn steady_state(params: &SystemParams, space: HilbertSpace) -> Result<DensityMatrix> {
    steady_state_with_report(params, space).map(|(rho, _)| rho)
}

pub fn steady_state_with_report(
    params: &SystemParams,
    space: HilbertSpace,
) -> Result<(DensityMatrix, SteadyStateReport)> {
    if !params.drive.is_constant() {
        return Err(UpbError::InvalidParameter("steady state needs a constant drive".into()));
    }
    if !(params.kappa1 > 0.0 && params.kappa2 > 0.0) {
        return Err(UpbError::InvalidParameter("steady state needs positive loss in both cavities".into()));
    }
    let me = MasterEquation::new(params, space)?;
    let d = space.dim();
    let n = d * d;
    let full = me.liouvillian_triplets(0.0);
    let l_norm = {
        let mut sq = std::collections::BTreeMap::<(usize, usize), Complex64>::new();
        for (r, c, v) in &full {
            *sq.entry((*r, *c)).or_insert(ZERO) += v;
        }
        sq.values().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    };
    let mut trip: Vec<Triplet<usize, usize, Complex64>> = full
        .iter()
        .filter(|(r, _, _)| *r != 0)
        .map(|&(r, c, v)| Triplet::new(r, c, v))
        .collect();
    for i in 0..d {
        trip.push(Triplet::new(0, i * d + i, Complex64::new(1.0, 0.0)));
    }
    let mut rhs = Mat::<Complex64>::zeros(n, 1);
    rhs[(0, 0)] = Complex64::new(1.0, 0.0);

    let sparse = SparseColMat::<usize, Complex64>::try_new_from_triplets(n, n, &trip)
        .map_err(|e| UpbError::SteadyState(format!("assembly: {e:?}")))?;
    let (x, used_dense_fallback) = match sparse.sp_lu() {
        Ok(lu) => (lu.solve(&rhs), false),
        Err(_) if n <= 2000 => (sparse.to_dense().partial_piv_lu().solve(&rhs), true),
        Err(e) => return Err(UpbError::SteadyState(format!("sparse LU failed: {e:?}"))),
    };
    let mut data: Vec<Complex64> = (0..n).map(|k| x[(k, 0)]).collect();
    if data.iter().any(|v| !v.is_finite()) {
        return Err(UpbError::SteadyState("singular generator".into()));
    }
    // symmetrize away round-off and renormalize
    for i in 0..d {
        for j in i..d {
            let avg = 0.5 * (data[i * d + j] + data[j * d + i].conj());
            data[i * d + j] = avg;
            data[j * d + i] = avg.conj();
        }
    }
    let tr: Complex64 = (0..d).map(|i| data[i * d + i]).sum();
    data.iter_mut().for_each(|v| *v /= tr);
    let mut residual = vec![ZERO; n];
    me.apply(0.0, &data, &mut residual);
    let res_norm = residual.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let report = SteadyStateReport { relative_residual: res_norm / l_norm, used_dense_fallback };
    Ok((DensityMatrix::from_raw(space, data)?, report))
}

/// Evolves `rho0` (given at `t_grid[0]`) and returns the state at every grid
/// time, including the first.
pub fn evolve(
    rho0: &DensityMatrix,
    params: &SystemParams,
    t_grid: &[f64],
    tol: Tolerances,
) -> Result<Vec<DensityMatrix>> {
    let mut out = Vec::with_capacity(t_grid.len());
    evolve_with(rho0, params, t_grid, tol, |_, rho| {
        out.push(rho.clone());
        Ok(())
    })?;
    Ok(out)
}

/// Like [`evolve`] but hands each state to `visit` instead of storing it.
pub fn evolve_with<F>(
    rho0: &DensityMatrix,
    params: &SystemParams,
    t_grid: &[f64],
    tol: Tolerances,
    mut visit: F,
) -> Result<()>
where
    F: FnMut(f64, &DensityMatrix) -> Result<()>,
{
    check_grid(t_grid)?;
    let Some(&t0) = t_grid.first() else { return Ok(()) };
    let space = rho0.space();
    let me = MasterEquation::new(params, space)?;
    let mut stepper = Dopri5::new(&me, t0, rho0.as_slice().to_vec(), tol);
    let mut snapshot = rho0.clone();
    for &t in t_grid {
        stepper.advance_to(t)?;
        snapshot.as_mut_slice().copy_from_slice(stepper.y());
        visit(t, &snapshot)?;
    }
    Ok(())
}

fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.iter().any(|t| !t.is_finite()) || t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(UpbError::InvalidParameter("time grid must be finite and strictly increasing".into()));
    }
    Ok(())
}

/// Operators used for cavity-1 photon statistics.
#[derive(Debug, Clone)]
pub struct CavityObservables {
    pub a: QOperator,
    pub n: QOperator,
    pub two_photon: QOperator,
}

impl CavityObservables {
    pub fn new(space: HilbertSpace, cavity: Cavity) -> Self {
        let a = QOperator::annihilation(space, cavity);
        let ad = a.dagger();
        let n = ad.mul(&a).expect("same space");
        let two_photon = ad.mul(&ad).and_then(|x| x.mul(&a)).and_then(|x| x.mul(&a)).expect("same space");
        Self { a, n, two_photon }
    }

    /// Tr[n̂ m] for a dense row-major matrix.
    pub fn number_trace(&self, m: &[Complex64]) -> f64 {
        let d = self.n.space().dim();
        self.n.entries().map(|(r, c, v)| (v * m[c * d + r]).re).sum()
    }

    /// â m â† for a dense row-major matrix.
    pub fn jump(&self, m: &[Complex64]) -> Vec<Complex64> {
        let mut tmp = vec![ZERO; m.len()];
        let mut out = vec![ZERO; m.len()];
        self.a.dense_mul_adjoint(m, &mut tmp);
        self.a.mul_dense(&tmp, &mut out);
        out
    }
}

/// Equal-time ⟨â†â†ââ⟩/⟨â†â⟩² of one cavity.
pub fn g2_zero(rho: &DensityMatrix, cavity: Cavity) -> Result<f64> {
    let obs = CavityObservables::new(rho.space(), cavity);
    let n = rho.expectation(&obs.n)?.re;
    if n < MIN_OCCUPATION {
        return Err(UpbError::UndefinedCorrelation { occupation: n });
    }
    Ok(rho.expectation(&obs.two_photon)?.re / (n * n))
}

/// Sampled correlation curve with a parameter snapshot.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationResult {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    /// Statistical errors; zero for deterministic solvers.
    pub errors: Vec<f64>,
    pub params: SystemParams,
    pub truncation: (usize, usize),
}

/// Continuous-wave g⁽²⁾(τ) of cavity 1 by quantum regression from the
/// steady state.
pub fn g2_tau_cw(
    params: &SystemParams,
    space: HilbertSpace,
    tau_grid: &[f64],
    tol: Tolerances,
) -> Result<CorrelationResult> {
    check_grid(tau_grid)?;
    if tau_grid.first().is_some_and(|t| *t < 0.0) {
        return Err(UpbError::InvalidParameter("delays must be non-negative".into()));
    }
    let rho = steady_state(params, space)?;
    let obs = CavityObservables::new(space, Cavity::One);
    let n_ss = obs.number_trace(rho.as_slice());
    if n_ss < MIN_OCCUPATION {
        return Err(UpbError::UndefinedCorrelation { occupation: n_ss });
    }
    let sigma = obs.jump(rho.as_slice());
    let me = MasterEquation::new(params, space)?;
    let mut stepper = Dopri5::new(&me, 0.0, sigma, scaled_tolerances(tol, n_ss));
    let mut values = Vec::with_capacity(tau_grid.len());
    for &tau in tau_grid {
        stepper.advance_to(tau)?;
        values.push(obs.number_trace(stepper.y()) / (n_ss * n_ss));
    }
    Ok(CorrelationResult {
        grid: tau_grid.to_vec(),
        errors: vec![0.0; values.len()],
        values,
        params: *params,
        truncation: (space.n1_levels(), space.n2_levels()),
    })
}

/// Absolute tolerance scaled to the magnitude of a propagated operator.
fn scaled_tolerances(tol: Tolerances, magnitude: f64) -> Tolerances {
    Tolerances { atol: tol.atol * magnitude.max(1e-300), ..tol }
}

/// Steady-state occupations and zero-delay correlation of one sweep point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub n1: f64,
    pub n2: f64,
    pub g2_zero: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub f: f64,
    pub outcome: std::result::Result<SweepPoint, String>,
}

/// One steady-state solve per drive amplitude. Failures stay in their row.
pub fn sweep_drive(params: &SystemParams, space: HilbertSpace, f_values: &[f64]) -> Vec<SweepRow> {
    f_values
        .par_iter()
        .map(|&f| {
            let p = params.with_drive(PulseShape::Constant { amplitude: f });
            let outcome = steady_state(&p, space)
                .and_then(|rho| {
                    let n1 = rho.expectation(&QOperator::number(space, Cavity::One))?.re;
                    let n2 = rho.expectation(&QOperator::number(space, Cavity::Two))?.re;
                    let g2 = g2_zero(&rho, Cavity::One)?;
                    Ok(SweepPoint { n1, n2, g2_zero: g2 })
                })
                .map_err(|e| e.to_string());
            SweepRow { f, outcome }
        })
        .collect()
}

/// Cavity-1 observables of an augmented frame state `[ρ, α₁, α₂]`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct FrameSample {
    n1: f64,
    n2: f64,
    pair: f64,
}

fn sample(model: &FrameModel, y: &[Complex64]) -> FrameSample {
    let (rho, alpha) = FrameMasterEquation::split(y);
    FrameSample {
        n1: trace_product(&model.number_operator(Cavity::One, alpha[0]), rho).re,
        n2: trace_product(&model.number_operator(Cavity::Two, alpha[1]), rho).re,
        pair: trace_product(&model.pair_operator(alpha[0]), rho).re,
    }
}

/// `â₁ρâ₁†` of an augmented state, keeping the amplitudes.
fn jumped(model: &FrameModel, y: &[Complex64]) -> Vec<Complex64> {
    let (rho, alpha) = FrameMasterEquation::split(y);
    let a = model.field_operator(Cavity::One, alpha[0]);
    let mut tmp = vec![ZERO; rho.len()];
    let mut out = vec![ZERO; rho.len()];
    a.dense_mul_adjoint(rho, &mut tmp);
    a.mul_dense(&tmp, &mut out);
    FrameMasterEquation::augment(&out, alpha)
}

fn vacuum_state(space: HilbertSpace) -> Vec<Complex64> {
    FrameMasterEquation::augment(&DensityMatrix::vacuum(space).into_raw(), [ZERO; 2])
}

/// Unnormalized and normalized two-time correlation under a time-dependent
/// drive, starting from vacuum at `t_start`:
/// G⁽²⁾(t,t′) = Tr[n̂₁ U_{t→t′}(â₁ρ(t)â₁†)], g⁽²⁾ = G⁽²⁾/(n₁(t)n₁(t′)).
pub fn two_time_g2_pulsed(
    params: &SystemParams,
    space: HilbertSpace,
    frame: Frame,
    t_start: f64,
    t: f64,
    t_prime: f64,
    tol: Tolerances,
) -> Result<(f64, f64)> {
    if !(t_start <= t && t <= t_prime) {
        return Err(UpbError::InvalidParameter("need t_start ≤ t ≤ t′".into()));
    }
    let model = FrameModel::new(params, space, frame)?;
    let fme = FrameMasterEquation::new(&model);
    let mut rho = Dopri5::new(&fme, t_start, vacuum_state(space), tol);
    rho.advance_to(t)?;
    let n_t = sample(&model, rho.y()).n1;
    let mut sigma = Dopri5::new(&fme, t, jumped(&model, rho.y()), scaled_tolerances(tol, n_t));
    sigma.advance_to(t_prime)?;
    rho.advance_to(t_prime)?;
    let n_tp = sample(&model, rho.y()).n1;
    if n_t < MIN_OCCUPATION || n_tp < MIN_OCCUPATION {
        return Err(UpbError::UndefinedCorrelation { occupation: n_t.min(n_tp) });
    }
    let g = sample(&model, sigma.y()).n1;
    Ok((g, g / (n_t * n_tp)))
}

/// n₁(t), n₂(t) and equal-time g⁽²⁾(t,t) on a time grid, starting from vacuum
/// at `t_grid[0]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PulseProfile {
    pub times: Vec<f64>,
    pub n1: Vec<f64>,
    pub n2: Vec<f64>,
    /// NaN where n₁ is below [`MIN_OCCUPATION`].
    pub g2_equal_time: Vec<f64>,
    /// Of the (fluctuation) density matrix, over all grid times when requested.
    pub physicality: Option<Physicality>,
}

impl PulseProfile {
    /// Index of the largest n₁.
    pub fn peak_index(&self) -> Option<usize> {
        (0..self.n1.len()).max_by(|&a, &b| self.n1[a].total_cmp(&self.n1[b]))
    }
}

pub fn pulse_profile(
    params: &SystemParams,
    space: HilbertSpace,
    frame: Frame,
    t_grid: &[f64],
    tol: Tolerances,
    check_physicality: bool,
) -> Result<PulseProfile> {
    check_grid(t_grid)?;
    let model = FrameModel::new(params, space, frame)?;
    let fme = FrameMasterEquation::new(&model);
    let mut prof = PulseProfile {
        times: Vec::new(),
        n1: Vec::new(),
        n2: Vec::new(),
        g2_equal_time: Vec::new(),
        physicality: check_physicality.then(Physicality::perfect),
    };
    let Some(&t0) = t_grid.first() else { return Ok(prof) };
    let mut stepper = Dopri5::new(&fme, t0, vacuum_state(space), tol);
    for &t in t_grid {
        stepper.advance_to(t)?;
        let s = sample(&model, stepper.y());
        prof.times.push(t);
        prof.n1.push(s.n1);
        prof.n2.push(s.n2);
        prof.g2_equal_time.push(if s.n1 < MIN_OCCUPATION { f64::NAN } else { s.pair / (s.n1 * s.n1) });
        if let Some(acc) = prof.physicality.as_mut() {
            let (rho, _) = FrameMasterEquation::split(stepper.y());
            *acc = acc.merge(DensityMatrix::from_raw(space, rho.to_vec())?.physicality()?);
        }
    }
    Ok(prof)
}

/// Two-time correlation sampled on a uniform grid over a time window.
///
/// Stores n₁(t_i) and G⁽²⁾(t_i, t_i + l·h) for lags `l ≤ max_lag`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoTimeMap {
    pub t_first: f64,
    pub step: f64,
    pub n1: Vec<f64>,
    /// `g[i][l]` = G⁽²⁾(t_i, t_{i+l})
    pub g: Vec<Vec<f64>>,
    pub max_lag: usize,
}

/// Time grid of a [`TwoTimeMap`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoTimeGrid {
    /// Start of the evolution from vacuum.
    pub t_start: f64,
    pub t_first: f64,
    pub step: f64,
    pub points: usize,
    pub max_lag: usize,
}

impl TwoTimeMap {
    /// Evolves from vacuum at `grid.t_start` to `grid.t_first`, then samples
    /// the grid times, propagating â₁ρ(t_i)â₁† up to `max_lag` steps ahead
    /// from every grid time.
    pub fn compute(
        params: &SystemParams,
        space: HilbertSpace,
        frame: Frame,
        grid: TwoTimeGrid,
        tol: Tolerances,
    ) -> Result<Self> {
        let TwoTimeGrid { t_start, t_first, step, points, max_lag } = grid;
        if !(step > 0.0) || points == 0 || t_first < t_start {
            return Err(UpbError::InvalidParameter("bad two-time grid".into()));
        }
        let model = FrameModel::new(params, space, frame)?;
        let fme = FrameMasterEquation::new(&model);
        let mut rho = Dopri5::new(&fme, t_start, vacuum_state(space), tol);
        let times: Vec<f64> = (0..points).map(|i| t_first + i as f64 * step).collect();
        let mut n1 = Vec::with_capacity(points);
        let mut g = Vec::with_capacity(points);
        for i in 0..points {
            rho.advance_to(times[i])?;
            let n_i = sample(&model, rho.y()).n1;
            n1.push(n_i);
            let last = (i + max_lag).min(points - 1);
            let mut row = Vec::with_capacity(last - i + 1);
            let sigma0 = jumped(&model, rho.y());
            row.push(sample(&model, &sigma0).n1);
            if last > i {
                let mut sigma = Dopri5::new(&fme, times[i], sigma0, scaled_tolerances(tol, n_i));
                for &tj in &times[i + 1..=last] {
                    sigma.advance_to(tj)?;
                    row.push(sample(&model, sigma.y()).n1);
                }
            }
            g.push(row);
        }
        Ok(Self { t_first, step, n1, g, max_lag })
    }

    pub fn len(&self) -> usize {
        self.n1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n1.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t_first + i as f64 * self.step
    }

    /// Symmetric G⁽²⁾(t_i, t_j).
    pub fn g_at(&self, i: usize, j: usize) -> Option<f64> {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        self.g.get(a)?.get(b - a).copied()
    }

    /// ∬G and (∫n₁)² over grid points `first..=last` using composite
    /// Simpson weights (trapezoid when the interval count is odd).
    pub fn window_integrals(&self, first: usize, last: usize) -> Option<(f64, f64)> {
        if last >= self.len() || last < first || last - first > self.max_lag {
            return None;
        }
        if last == first {
            return Some((self.g_at(first, first)?, self.n1[first] * self.n1[first]));
        }
        let w = quadrature_weights(last - first, self.step);
        let mut num = 0.0;
        let mut single = 0.0;
        for (a, wa) in w.iter().enumerate() {
            single += wa * self.n1[first + a];
            for (b, wb) in w.iter().enumerate() {
                num += wa * wb * self.g_at(first + a, first + b)?;
            }
        }
        Some((num, single * single))
    }

    /// Σ_w ∬_w G / Σ_w (∫_w n₁)² over consecutive tiles of `tile` intervals
    /// covering the grid from its start.
    pub fn tiled_g2(&self, tile: usize) -> Option<f64> {
        if tile == 0 || self.is_empty() {
            return None;
        }
        let tiles = (self.len() - 1) / tile;
        if tiles == 0 {
            return None;
        }
        let (mut num, mut den) = (0.0, 0.0);
        for w in 0..tiles {
            let (a, b) = self.window_integrals(w * tile, (w + 1) * tile)?;
            num += a;
            den += b;
        }
        (den > 0.0).then(|| num / den)
    }

    /// Every other grid point (doubled step).
    pub fn coarsened(&self) -> Self {
        Self {
            t_first: self.t_first,
            step: 2.0 * self.step,
            n1: self.n1.iter().step_by(2).copied().collect(),
            g: self.g.iter().step_by(2).map(|row| row.iter().step_by(2).copied().collect()).collect(),
            max_lag: self.max_lag / 2,
        }
    }
}

/// Composite Simpson weights for `intervals` equal steps (trapezoid if odd).
fn quadrature_weights(intervals: usize, h: f64) -> Vec<f64> {
    let mut w = vec![0.0; intervals + 1];
    if intervals % 2 == 0 {
        for (k, x) in w.iter_mut().enumerate() {
            *x = if k == 0 || k == intervals {
                h / 3.0
            } else if k % 2 == 1 {
                4.0 * h / 3.0
            } else {
                2.0 * h / 3.0
            };
        }
    } else {
        for (k, x) in w.iter_mut().enumerate() {
            *x = if k == 0 || k == intervals { h / 2.0 } else { h };
        }
    }
    w
}

/// Window-filtered g⁽²⁾ with its refinement estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FilteredG2 {
    pub value: f64,
    /// |g(h) − g(2h)| / |g(h)| between the fine grid and every other point.
    pub refinement_change: f64,
}

/// ∬_W G⁽²⁾(t,t′) / ∬_W n₁(t)n₁(t′) over the window `[t1, t2]`, starting the
/// evolution from vacuum at `t_start`. `intervals` is rounded up to a multiple
/// of four so the coarse half-grid also gets Simpson weights.
pub fn filtered_g2(
    params: &SystemParams,
    space: HilbertSpace,
    frame: Frame,
    t_start: f64,
    window: (f64, f64),
    intervals: usize,
    tol: Tolerances,
) -> Result<FilteredG2> {
    let (t1, t2) = window;
    if !(t2 >= t1) || t1 < t_start {
        return Err(UpbError::InvalidParameter("window must satisfy t_start ≤ t1 ≤ t2".into()));
    }
    if t2 - t1 < 1e-12 {
        let (_, g) = two_time_g2_pulsed(params, space, frame, t_start, t1, t1, tol)?;
        return Ok(FilteredG2 { value: g, refinement_change: 0.0 });
    }
    let m = intervals.max(4).div_ceil(4) * 4;
    let h = (t2 - t1) / m as f64;
    let grid = TwoTimeGrid { t_start, t_first: t1, step: h, points: m + 1, max_lag: m };
    let map = TwoTimeMap::compute(params, space, frame, grid, tol)?;
    filtered_from_map(&map, 0, m)
}

/// Filtered g⁽²⁾ over grid points `first..=last` of a precomputed map, with
/// the refinement estimate from the doubled-step grid.
pub fn filtered_from_map(map: &TwoTimeMap, first: usize, last: usize) -> Result<FilteredG2> {
    let bad = || UpbError::FilterWindow(format!("window {first}..={last} not covered by the two-time map"));
    let (num, den) = map.window_integrals(first, last).ok_or_else(bad)?;
    if den < MIN_OCCUPATION * MIN_OCCUPATION {
        return Err(UpbError::UndefinedCorrelation { occupation: den.sqrt() });
    }
    let fine = num / den;
    if first % 2 != 0 || (last - first) % 4 != 0 || last == first {
        return Ok(FilteredG2 { value: fine, refinement_change: f64::NAN });
    }
    let (cn, cd) = map.coarsened().window_integrals(first / 2, last / 2).ok_or_else(bad)?;
    let coarse = cn / cd;
    Ok(FilteredG2 { value: fine, refinement_change: ((fine - coarse) / fine).abs() })
}

/// One point of a filtered-g⁽²⁾ scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FilterScanPoint {
    pub width: f64,
    pub g2: f64,
    pub refinement_change: f64,
}

/// Filtered g⁽²⁾ for windows of the given widths centered on `center`.
pub fn filtered_g2_scan(
    params: &SystemParams,
    space: HilbertSpace,
    frame: Frame,
    t_start: f64,
    center: f64,
    widths: &[f64],
    intervals: usize,
    tol: Tolerances,
) -> Result<Vec<FilterScanPoint>> {
    widths
        .par_iter()
        .map(|&w| {
            if !(w >= 0.0) || center - 0.5 * w < t_start {
                return Err(UpbError::FilterWindow(format!("window of width {w} around {center} starts before {t_start}")));
            }
            let f = filtered_g2(params, space, frame, t_start, (center - 0.5 * w, center + 0.5 * w), intervals, tol)?;
            Ok(FilterScanPoint { width: w, g2: f.value, refinement_change: f.refinement_change })
        })
        .collect()
}

/// Master-equation counterpart of the sliding-window pair statistics: the
/// global window `[t1, t2]` is tiled by `floor((t2 − t1)/Δt)` sub-windows of
/// width Δt starting at `t1`, and g⁽²⁾(Δt) = Σ_w ∬_w G⁽²⁾ / Σ_w (∫_w n₁)².
/// Each tile is split into the fewest intervals (a multiple of four) whose
/// step does not exceed `max_step`.
pub fn tiled_filtered_g2(
    params: &SystemParams,
    space: HilbertSpace,
    frame: Frame,
    t_start: f64,
    window: (f64, f64),
    delta_t: f64,
    max_step: f64,
    tol: Tolerances,
) -> Result<FilteredG2> {
    if !(max_step > 0.0) {
        return Err(UpbError::InvalidParameter("max_step must be positive".into()));
    }
    let (t1, t2) = window;
    if !(t2 > t1) || t1 < t_start {
        return Err(UpbError::FilterWindow("window must satisfy t_start ≤ t1 < t2".into()));
    }
    if !(delta_t > 0.0) || delta_t > (t2 - t1) * (1.0 + 1e-12) {
        return Err(UpbError::FilterWindow(format!("sub-window {delta_t} must lie in (0, {}]", t2 - t1)));
    }
    let tiles = (((t2 - t1) / delta_t) * (1.0 + 1e-12)).floor() as usize;
    let m = ((delta_t / max_step).ceil() as usize).max(4).div_ceil(4) * 4;
    let grid = TwoTimeGrid { t_start, t_first: t1, step: delta_t / m as f64, points: tiles * m + 1, max_lag: m };
    let map = TwoTimeMap::compute(params, space, frame, grid, tol)?;
    let fine = map.tiled_g2(m).ok_or_else(|| UpbError::UndefinedCorrelation { occupation: 0.0 })?;
    let coarse = map.coarsened().tiled_g2(m / 2).ok_or_else(|| UpbError::UndefinedCorrelation { occupation: 0.0 })?;
    Ok(FilteredG2 { value: fine, refinement_change: ((fine - coarse) / fine).abs() })
}

/// First abscissa where a sampled curve crosses `level` upwards, by linear
/// interpolation.
pub fn upward_crossing(x: &[f64], y: &[f64], level: f64) -> Option<f64> {
    x.windows(2).zip(y.windows(2)).find_map(|(xs, ys)| {
        (ys[0] < level && ys[1] >= level).then(|| xs[0] + (level - ys[0]) * (xs[1] - xs[0]) / (ys[1] - ys[0]))
    })
}

/// Time of the smallest equal-time g⁽²⁾ on a profile, refined by a parabola
/// through the neighbouring samples. Samples whose n₁ is below
/// `min_fraction` of the peak occupation are ignored, as are edge minima.
pub fn equal_time_minimum(profile: &PulseProfile, min_fraction: f64) -> Option<f64> {
    let g = &profile.g2_equal_time;
    let peak = profile.n1.iter().copied().fold(0.0, f64::max);
    let k = (0..g.len())
        .filter(|&i| g[i].is_finite() && profile.n1[i] >= min_fraction * peak)
        .min_by(|&a, &b| g[a].total_cmp(&g[b]))?;
    if k == 0 || k + 1 >= g.len() || !g[k - 1].is_finite() || !g[k + 1].is_finite() {
        return None;
    }
    let (ym, y0, yp) = (g[k - 1], g[k], g[k + 1]);
    let h = profile.times[k + 1] - profile.times[k];
    let curv = ym - 2.0 * y0 + yp;
    let shift = if curv > 0.0 { 0.5 * (ym - yp) / curv } else { 0.0 };
    Some(profile.times[k] + shift * h)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn pulse_shapes() {
        let p = PulseShape::GaussianTrain { amplitude: 2.0, sigma_t: 1.0, period: 10.0, t0: 5.0, n_pulses: 2 };
        assert!((p.amplitude_at(5.0) - 2.0).abs() < 1e-12);
        assert!((p.amplitude_at(15.0) - 2.0).abs() < 1e-12);
        assert!((p.amplitude_at(6.0) - 2.0 * (-0.5f64).exp()).abs() < 1e-12);
        assert!(p.amplitude_at(30.0) < 1e-20);
        assert!(PulseShape::GaussianTrain { amplitude: 1.0, sigma_t: 0.0, period: 1.0, t0: 0.0, n_pulses: 1 }
            .validate()
            .is_err());
        assert_eq!(PulseShape::Constant { amplitude: 3.0 }.amplitude_at(-7.0), 3.0);
    }

    #[test]
    fn params_validation() {
        let mut p = SystemParams::reference_cw(1.0);
        assert!(p.validate().is_ok());
        p.kappa2 = 0.0;
        assert!(p.validate().is_ok());
        assert!(steady_state(&p, HilbertSpace::new(2, 2).unwrap()).is_err());
        p.kappa2 = -1.0;
        assert!(p.validate().is_err());
        p.kappa2 = 1.0;
        p.delta1 = f64::NAN;
        assert!(p.validate().is_err());
    }

    #[test]
    fn single_excitation_normal_modes() {
        let s = HilbertSpace::new(3, 3).unwrap();
        let p = SystemParams::symmetric(0.0, 0.0, 2.5, PulseShape::Constant { amplitude: 0.0 });
        let h = build_hamiltonian(&p, s, 0.0);
        let i10 = s.encode(1, 0).unwrap();
        let i01 = s.encode(0, 1).unwrap();
        // 2x2 block [[0, J], [J, 0]] has eigenvalues ±J
        assert_eq!(h.get(i10, i10), c(0.0));
        assert_eq!(h.get(i01, i01), c(0.0));
        assert_eq!(h.get(i10, i01), c(2.5));
        assert_eq!(h.get(i01, i10), c(2.5));
        let block = faer::Mat::from_fn(2, 2, |r, cc| [[h.get(i10, i10), h.get(i10, i01)], [h.get(i01, i10), h.get(i01, i01)]][r][cc]);
        let ev = block.self_adjoint_eigenvalues(faer::Side::Lower).unwrap();
        assert!((ev[0] + 2.5).abs() < 1e-12 && (ev[1] - 2.5).abs() < 1e-12);
    }

    #[test]
    fn preset_hamiltonian_is_hermitian() {
        let s = HilbertSpace::new(4, 18).unwrap();
        let h = build_hamiltonian(&SystemParams::reference_cw(30.0), s, 0.0);
        assert_eq!(h.hermiticity_defect(), 0.0);
        let hp = build_hamiltonian(&SystemParams::reference_pulsed(), s, 20.0);
        assert_eq!(hp.hermiticity_defect(), 0.0);
    }

    #[test]
    fn two_photon_fock_energy() {
        let s = HilbertSpace::new(4, 3).unwrap();
        let p = SystemParams { delta1: 0.7, u1: 0.3, ..SystemParams::reference_cw(5.0) };
        let h = build_hamiltonian(&p, s, 0.0);
        let i = s.encode(2, 0).unwrap();
        // red-shifting Kerr convention: 2Δ₁ − 2U₁
        assert!((h.get(i, i) - c(2.0 * 0.7 - 2.0 * 0.3)).norm() < 1e-14);
    }

    #[test]
    fn vacuum_is_stationary_without_drive() {
        let s = HilbertSpace::new(3, 4).unwrap();
        let p = SystemParams::reference_cw(0.0);
        let d = liouvillian_apply(&p, &DensityMatrix::vacuum(s), 0.0).unwrap();
        assert!(d.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn single_photon_decay_rate() {
        let s = HilbertSpace::new(3, 3).unwrap();
        let p = SystemParams { j_coupling: 0.0, kappa1: 1.7, ..SystemParams::reference_cw(0.0) };
        let rho = DensityMatrix::fock(s, 1, 0).unwrap();
        let d = liouvillian_apply(&p, &rho, 0.0).unwrap();
        let drho = DensityMatrix::from_raw(s, d).unwrap();
        let dn = drho.expectation(&QOperator::number(s, Cavity::One)).unwrap();
        assert!((dn.re + 1.7).abs() < 1e-14);
    }

    #[test]
    fn apply_matches_vectorized_generator() {
        let s = HilbertSpace::new(3, 2).unwrap();
        let p = SystemParams {
            delta1: 0.4,
            delta2: -0.3,
            u1: 0.2,
            u2: 0.1,
            j_coupling: 1.3,
            kappa1: 0.8,
            kappa2: 1.2,
            drive: PulseShape::Constant { amplitude: 0.9 },
        };
        let me = MasterEquation::new(&p, s).unwrap();
        let d = s.dim();
        let rho: Vec<Complex64> =
            (0..d * d).map(|k| Complex64::new((k as f64 * 0.37).sin(), (k as f64 * 0.11).cos())).collect();
        let mut out = vec![ZERO; d * d];
        me.apply(0.0, &rho, &mut out);
        let mut vec_out = vec![ZERO; d * d];
        for (r, col, v) in me.liouvillian_triplets(0.0) {
            vec_out[r] += v * rho[col];
        }
        for (a, b) in out.iter().zip(&vec_out) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn vacuum_steady_state_without_drive() {
        let s = HilbertSpace::new(3, 3).unwrap();
        let rho = steady_state(&SystemParams::reference_cw(0.0), s).unwrap();
        assert!(rho.trace_distance(&DensityMatrix::vacuum(s)).unwrap() < 1e-12);
    }

    #[test]
    fn steady_state_rejects_pulsed_drive() {
        let s = HilbertSpace::new(2, 2).unwrap();
        assert!(steady_state(&SystemParams::reference_pulsed(), s).is_err());
    }

    #[test]
    fn g2_of_single_photon_and_vacuum() {
        let s = HilbertSpace::new(3, 3).unwrap();
        assert_eq!(g2_zero(&DensityMatrix::fock(s, 1, 0).unwrap(), Cavity::One).unwrap(), 0.0);
        assert!(matches!(
            g2_zero(&DensityMatrix::vacuum(s), Cavity::One),
            Err(UpbError::UndefinedCorrelation { .. })
        ));
        let g = g2_zero(&DensityMatrix::fock(s, 2, 0).unwrap(), Cavity::One).unwrap();
        assert!((g - 0.5).abs() < 1e-14);
    }

    #[test]
    fn quadrature_weights_integrate_polynomials() {
        for n in [1usize, 2, 3, 4, 7, 8] {
            let h = 0.5 / n as f64;
            let w = quadrature_weights(n, h);
            let integral: f64 = w.iter().enumerate().map(|(k, wk)| wk * (k as f64 * h)).sum();
            assert!((integral - 0.125).abs() < 1e-14, "n={n}");
        }
        let w = quadrature_weights(4, 0.25);
        let cubic: f64 = w.iter().enumerate().map(|(k, wk)| wk * (k as f64 * 0.25).powi(3)).sum();
        assert!((cubic - 0.25).abs() < 1e-14);
    }

    #[test]
    fn two_time_map_symmetry_and_tiling() {
        let s = HilbertSpace::new(3, 4).unwrap();
        let p = SystemParams::symmetric(0.3, 0.5, 1.0, PulseShape::Constant { amplitude: 0.4 });
        let grid = TwoTimeGrid { t_start: 0.0, t_first: 1.0, step: 0.05, points: 9, max_lag: 8 };
        let map = TwoTimeMap::compute(&p, s, Frame::Lab, grid, Tolerances::default()).unwrap();
        assert_eq!(map.g_at(2, 5), map.g_at(5, 2));
        assert!(map.g_at(0, 8).is_some());
        let whole = map.window_integrals(0, 8).unwrap();
        let tiled = map.tiled_g2(8).unwrap();
        assert!((whole.0 / whole.1 - tiled).abs() < 1e-14);
        assert!(map.tiled_g2(9).is_none());
    }
}
