use upb_core::counting::{locate_filter_window, CenterRule};
use upb_core::dynamics::{evolve, PulseShape, SystemParams};
use upb_core::frame::Frame;
use upb_core::ode::Tolerances;
use upb_core::state::expectation;
use upb_core::{Cavity, DensityMatrix, HilbertSpace, QOperator};

/// Brute-force argmin of g²(t,t) from the lab-frame density matrix on a
/// uniform grid, restricted to n₁ ≥ 5% of its peak.
fn g2_argmin(p: &SystemParams, space: HilbertSpace, t_end: f64, step: f64) -> f64 {
    let n = (t_end / step).round() as usize;
    let grid: Vec<f64> = (0..=n).map(|i| i as f64 * step).collect();
    let a = QOperator::annihilation(space, Cavity::One);
    let ad = a.dagger();
    let num = QOperator::number(space, Cavity::One);
    let pair = ad.mul(&ad).unwrap().mul(&a).unwrap().mul(&a).unwrap();
    let states = evolve(&DensityMatrix::vacuum(space), p, &grid, Tolerances::default()).unwrap();
    let n1: Vec<f64> = states.iter().map(|r| expectation(r, &num).unwrap().re).collect();
    let peak = n1.iter().copied().fold(0.0, f64::max);
    let mut best = (f64::INFINITY, 0.0);
    for (k, r) in states.iter().enumerate() {
        if n1[k] >= 0.05 * peak {
            let g = expectation(r, &pair).unwrap().re / (n1[k] * n1[k]);
            if g < best.0 {
                best = (g, grid[k]);
            }
        }
    }
    best.1
}

/// A lone Kerr cavity at two-photon resonance (Δ = U, J = 0) is bunched at
/// weak drive and less so as the drive grows, so under a slow symmetric
/// pulse g²(t,t) bottoms out just after the pulse peak (the lag is the
/// response time of the cavity, of order 1/κ).
#[test]
fn window_centers_on_slow_pulse_peak() {
    let drive = PulseShape::GaussianTrain { amplitude: 0.6, sigma_t: 10.0, period: 100.0, t0: 40.0, n_pulses: 1 };
    let p = SystemParams::symmetric(2.0, 2.0, 0.0, drive);
    let space = HilbertSpace::new(6, 2).unwrap();
    let w = locate_filter_window(&p, space, Frame::Lab, 4.0, Tolerances::default()).unwrap();
    assert_eq!(w.center_rule, CenterRule::G2Minimum);
    assert!((w.width() - 4.0).abs() < 1e-12);
    assert!(w.center() > 40.0 && w.center() < 43.0, "center {}", w.center());
    let oracle = g2_argmin(&p, space, 100.0, 0.05);
    assert!((w.center() - oracle).abs() < 0.05, "center {} vs brute force {oracle}", w.center());
}

#[test]
fn window_must_fit_in_period() {
    let drive = PulseShape::GaussianTrain { amplitude: 0.6, sigma_t: 10.0, period: 100.0, t0: 40.0, n_pulses: 1 };
    let p = SystemParams::symmetric(2.0, 2.0, 0.0, drive);
    let space = HilbertSpace::new(4, 2).unwrap();
    assert!(locate_filter_window(&p, space, Frame::Lab, 150.0, Tolerances::default()).is_err());
    let cw = p.with_drive(PulseShape::Constant { amplitude: 1.0 });
    assert!(locate_filter_window(&cw, space, Frame::Lab, 4.0, Tolerances::default()).is_err());
}
