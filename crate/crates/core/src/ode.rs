//! Adaptive Dormand–Prince 5(4) integrator for complex-valued linear and
//! nonlinear ODE systems.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, UpbError};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Right-hand side `dy/dt = f(t, y)`.
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, y: &[Complex64], dy: &mut [Complex64]);
}

/// Local error control settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    /// Steps below this size are reported as underflow.
    pub h_min: f64,
    /// Upper bound on the step size.
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rtol: 1e-8, atol: 1e-11, h_min: 1e-12, h_max: 1.0, max_steps: 50_000_000 }
    }
}

/// Stateful Dormand–Prince stepper. Owns the current `(t, y)` and the
/// first-same-as-last stage so consecutive steps cost six evaluations.
pub struct Dopri5<'a, S: OdeSystem + ?Sized> {
    sys: &'a S,
    tol: Tolerances,
    t: f64,
    y: Vec<Complex64>,
    h: f64,
    k: [Vec<Complex64>; 7],
    stage: Vec<Complex64>,
    y_new: Vec<Complex64>,
    k1_valid: bool,
    accepted: usize,
    rejected: usize,
}

impl<'a, S: OdeSystem + ?Sized> Dopri5<'a, S> {
    pub fn new(sys: &'a S, t0: f64, y0: Vec<Complex64>, tol: Tolerances) -> Self {
        let n = sys.dim();
        assert_eq!(y0.len(), n, "initial state has wrong dimension");
        let k = std::array::from_fn(|_| vec![ZERO; n]);
        let mut s = Self {
            sys,
            tol,
            t: t0,
            y: y0,
            h: 0.0,
            k,
            stage: vec![ZERO; n],
            y_new: vec![ZERO; n],
            k1_valid: false,
            accepted: 0,
            rejected: 0,
        };
        s.h = s.initial_step();
        s
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn y(&self) -> &[Complex64] {
        &self.y
    }

    pub fn accepted_steps(&self) -> usize {
        self.accepted
    }

    pub fn rejected_steps(&self) -> usize {
        self.rejected
    }

    /// Replaces the state (e.g. after a quantum jump). Step size is kept.
    pub fn reset_state(&mut self, t: f64, y: &[Complex64]) {
        self.t = t;
        self.y.copy_from_slice(y);
        self.k1_valid = false;
    }

    fn ensure_k1(&mut self) {
        if !self.k1_valid {
            self.sys.rhs(self.t, &self.y, &mut self.k[0]);
            self.k1_valid = true;
        }
    }

    fn initial_step(&mut self) -> f64 {
        self.ensure_k1();
        let d0 = self.scaled_norm(&self.y, &self.y, &self.y);
        let d1 = self.scaled_norm(&self.k[0], &self.y, &self.y);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let h0 = h0.min(self.tol.h_max);
        for i in 0..self.y.len() {
            self.stage[i] = self.y[i] + self.k[0][i] * h0;
        }
        self.sys.rhs(self.t + h0, &self.stage, &mut self.k[1]);
        let diff: Vec<Complex64> = self.k[1].iter().zip(&self.k[0]).map(|(a, b)| a - b).collect();
        let d2 = self.scaled_norm(&diff, &self.y, &self.y) / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1).min(self.tol.h_max)
    }

    fn scaled_norm(&self, v: &[Complex64], a: &[Complex64], b: &[Complex64]) -> f64 {
        let n = v.len().max(1) as f64;
        let sum: f64 = v
            .iter()
            .zip(a.iter().zip(b))
            .map(|(e, (x, y))| {
                let sc = self.tol.atol + self.tol.rtol * x.norm().max(y.norm());
                (e.norm() / sc).powi(2)
            })
            .sum();
        (sum / n).sqrt()
    }

    /// Computes the six stages of a step of size `h` from the current point,
    /// leaving the fifth-order solution in `y_new` and f(t+h, y_new) in k[6].
    fn stages(&mut self, h: f64) {
        self.ensure_k1();
        let t = self.t;
        let sys = self.sys;
        let y = &self.y;
        let k = &mut self.k;
        let st = &mut self.stage;
        combine(st, y, k, &[(A21, 0)], h);
        sys.rhs(t + C2 * h, st, &mut k[1]);
        combine(st, y, k, &[(A31, 0), (A32, 1)], h);
        sys.rhs(t + C3 * h, st, &mut k[2]);
        combine(st, y, k, &[(A41, 0), (A42, 1), (A43, 2)], h);
        sys.rhs(t + C4 * h, st, &mut k[3]);
        combine(st, y, k, &[(A51, 0), (A52, 1), (A53, 2), (A54, 3)], h);
        sys.rhs(t + C5 * h, st, &mut k[4]);
        combine(st, y, k, &[(A61, 0), (A62, 1), (A63, 2), (A64, 3), (A65, 4)], h);
        sys.rhs(t + h, st, &mut k[5]);
        let y_new = &mut self.y_new;
        combine(y_new, y, k, &[(A71, 0), (A73, 2), (A74, 3), (A75, 4), (A76, 5)], h);
        sys.rhs(t + h, y_new, &mut k[6]);
    }

    fn error_norm(&mut self, h: f64) -> f64 {
        let k = &self.k;
        for i in 0..self.y.len() {
            self.stage[i] = (k[0][i] * E1
                + k[2][i] * E3
                + k[3][i] * E4
                + k[4][i] * E5
                + k[5][i] * E6
                + k[6][i] * E7)
                * h;
        }
        self.scaled_norm(&self.stage, &self.y, &self.y_new)
    }

    /// Takes one accepted step, never passing `t_max`. Returns the new time.
    pub fn step(&mut self, t_max: f64) -> Result<f64> {
        let remaining = t_max - self.t;
        if remaining <= 0.0 {
            return Ok(self.t);
        }
        loop {
            if self.accepted + self.rejected >= self.tol.max_steps {
                return Err(UpbError::Integration {
                    t: self.t,
                    reason: format!("exceeded {} steps", self.tol.max_steps),
                });
            }
            let clamp = self.h >= remaining * (1.0 - 1e-12);
            let h = if clamp { remaining } else { self.h };
            self.stages(h);
            let err = self.error_norm(h);
            if !err.is_finite() {
                self.rejected += 1;
                self.h *= 0.2;
            } else if err <= 1.0 {
                let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                self.t = if clamp { t_max } else { self.t + h };
                std::mem::swap(&mut self.y, &mut self.y_new);
                self.k.swap(0, 6);
                self.k1_valid = true;
                self.accepted += 1;
                // keep the unclamped proposal so one short final step does not
                // shrink the following ones
                let proposal = (h * fac).min(self.tol.h_max);
                self.h = if clamp { self.h.max(proposal) } else { proposal };
                return Ok(self.t);
            } else {
                self.rejected += 1;
                self.h = h * (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
            }
            if self.h < self.tol.h_min {
                return Err(UpbError::Integration {
                    t: self.t,
                    reason: format!("step size underflow (h = {:e})", self.h),
                });
            }
        }
    }

    /// Integrates until exactly `t_target`.
    pub fn advance_to(&mut self, t_target: f64) -> Result<()> {
        while self.t < t_target {
            self.step(t_target)?;
        }
        Ok(())
    }

    /// Fifth-order solution of a single step of size `h` from the current
    /// point, without error control or changing the stepper state.
    pub fn trial_step(&mut self, h: f64) -> &[Complex64] {
        self.stages(h);
        &self.y_new
    }
}

/// `dst = y + h·Σ coef·k[idx]`
fn combine(dst: &mut [Complex64], y: &[Complex64], k: &[Vec<Complex64>], terms: &[(f64, usize)], h: f64) {
    for (i, d) in dst.iter_mut().enumerate() {
        let mut acc = ZERO;
        for &(c, j) in terms {
            acc += k[j][i] * c;
        }
        *d = y[i] + acc * h;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// dy/dt = (−γ + iω) y, componentwise.
    struct Oscillators {
        rates: Vec<Complex64>,
    }

    impl OdeSystem for Oscillators {
        fn dim(&self) -> usize {
            self.rates.len()
        }
        fn rhs(&self, _t: f64, y: &[Complex64], dy: &mut [Complex64]) {
            for ((d, v), r) in dy.iter_mut().zip(y).zip(&self.rates) {
                *d = r * v;
            }
        }
    }

    /// dy/dt = cos(t) · i y
    struct Driven;

    impl OdeSystem for Driven {
        fn dim(&self) -> usize {
            1
        }
        fn rhs(&self, t: f64, y: &[Complex64], dy: &mut [Complex64]) {
            dy[0] = Complex64::new(0.0, t.cos()) * y[0];
        }
    }

    #[test]
    fn exponential_decay_and_rotation() {
        let sys = Oscillators {
            rates: vec![Complex64::new(-1.0, 0.0), Complex64::new(-0.5, 20.0), Complex64::new(0.0, -3.0)],
        };
        let y0 = vec![Complex64::new(1.0, 0.0); 3];
        let mut s = Dopri5::new(&sys, 0.0, y0, Tolerances::default());
        for &t in &[0.1, 0.5, 1.0, 2.5, 5.0] {
            s.advance_to(t).unwrap();
            assert_eq!(s.t(), t);
            for (y, r) in s.y().iter().zip(&sys.rates) {
                let exact = (r * t).exp();
                assert!((y - exact).norm() < 1e-7, "t={t} got {y} want {exact}");
            }
        }
    }

    #[test]
    fn time_dependent_rhs() {
        let mut s = Dopri5::new(&Driven, 0.0, vec![Complex64::new(1.0, 0.0)], Tolerances::default());
        s.advance_to(10.0).unwrap();
        let exact = Complex64::new(0.0, 10f64.sin()).exp();
        assert!((s.y()[0] - exact).norm() < 1e-7);
    }

    #[test]
    fn tighter_tolerance_reduces_error() {
        let sys = Oscillators { rates: vec![Complex64::new(-0.3, 7.0)] };
        let err = |rtol: f64| {
            let tol = Tolerances { rtol, atol: rtol * 1e-3, ..Default::default() };
            let mut s = Dopri5::new(&sys, 0.0, vec![Complex64::new(1.0, 0.0)], tol);
            s.advance_to(3.0).unwrap();
            (s.y()[0] - Complex64::new(-0.9, 21.0).exp()).norm()
        };
        assert!(err(1e-10) < err(1e-5));
    }

    struct Blowup;

    impl OdeSystem for Blowup {
        fn dim(&self) -> usize {
            1
        }
        fn rhs(&self, _t: f64, y: &[Complex64], dy: &mut [Complex64]) {
            dy[0] = y[0] * y[0];
        }
    }

    #[test]
    fn step_underflow_reported() {
        // y' = y², y(0) = 1 diverges at t = 1
        let mut s = Dopri5::new(&Blowup, 0.0, vec![Complex64::new(1.0, 0.0)], Tolerances::default());
        assert!(matches!(s.advance_to(2.0), Err(UpbError::Integration { .. })));
        assert!(s.t() < 2.0);
    }

    #[test]
    fn trial_step_does_not_move_state() {
        let sys = Oscillators { rates: vec![Complex64::new(-1.0, 0.0)] };
        let mut s = Dopri5::new(&sys, 0.0, vec![Complex64::new(1.0, 0.0)], Tolerances::default());
        s.advance_to(0.2).unwrap();
        let before = s.y()[0];
        let trial = s.trial_step(0.01)[0];
        assert!((trial - before * (-0.01f64).exp()).norm() < 1e-12);
        assert_eq!(s.y()[0], before);
        assert_eq!(s.t(), 0.2);
    }
}
