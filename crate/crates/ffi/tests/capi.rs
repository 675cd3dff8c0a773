use std::ffi::{c_char, CString};
use std::ptr;

use upb_ffi::*;

fn cw(amplitude: f64) -> UpbParams {
    UpbParams {
        delta1: -0.29,
        delta2: -0.29,
        u1: 0.001,
        u2: 0.001,
        j_coupling: 19.6,
        kappa1: 1.0,
        kappa2: 1.0,
        amplitude,
        sigma_t: 0.0,
        period: 0.0,
        t0: 0.0,
        n_pulses: 0,
    }
}

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    let n = unsafe { upb_last_error_message(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf[..n.min(255)].iter().map(|&c| c as u8).collect();
    String::from_utf8(bytes).unwrap()
}

#[test]
fn optimal_conditions_and_errors() {
    let (mut j, mut d) = (0.0, 0.0);
    assert_eq!(unsafe { upb_optimal_conditions(0.001, &mut j, &mut d) }, UpbStatus::Ok);
    assert!((d + 0.2887).abs() < 1e-3);
    assert!((j - 19.62).abs() < 1e-2);
    assert_eq!(unsafe { upb_last_error_message(ptr::null_mut(), 0) }, 0);

    assert_eq!(unsafe { upb_optimal_conditions(-1.0, &mut j, &mut d) }, UpbStatus::InvalidArgument);
    assert!(last_error().starts_with("invalid-parameter"));
    assert_eq!(unsafe { upb_optimal_conditions(1.0, ptr::null_mut(), &mut d) }, UpbStatus::NullPointer);
    assert!(last_error().contains("null pointer"));
}

#[test]
fn error_message_truncates() {
    let mut j = 0.0;
    unsafe { upb_optimal_conditions(1.0, &mut j, ptr::null_mut()) };
    let mut small = [1 as c_char; 4];
    let full = unsafe { upb_last_error_message(small.as_mut_ptr(), small.len()) };
    assert!(full > 3);
    assert_eq!(small[3], 0);
}

#[test]
fn steady_state_weak_drive() {
    let p = cw(1.0);
    let mut out = UpbSteadyState::default();
    assert_eq!(unsafe { upb_steady_state(&p, 3, 6, &mut out) }, UpbStatus::Ok);
    assert!(out.n1 > 0.0 && out.n1 < 1e-4);
    assert!(out.g2_zero < 0.01);
    assert_eq!(unsafe { upb_steady_state(&p, 1, 6, &mut out) }, UpbStatus::InvalidArgument);
    let mut bad = cw(1.0);
    bad.kappa1 = -1.0;
    assert_eq!(unsafe { upb_steady_state(&bad, 3, 6, &mut out) }, UpbStatus::InvalidArgument);
    assert_eq!(unsafe { upb_steady_state(ptr::null(), 3, 6, &mut out) }, UpbStatus::NullPointer);
}

#[test]
fn correlation_handle() {
    let p = cw(1.0);
    let mut h: *mut UpbCorrelation = ptr::null_mut();
    assert_eq!(unsafe { upb_g2_tau(&p, 3, 6, 1.0, 11, &mut h) }, UpbStatus::Ok);
    assert_eq!(unsafe { upb_correlation_len(h) }, 11);
    let (mut tau, mut g2) = (0.0, 0.0);
    assert_eq!(unsafe { upb_correlation_get(h, 10, &mut tau, &mut g2) }, UpbStatus::Ok);
    assert_eq!(tau, 1.0);
    assert!(g2.is_finite() && g2 > 0.0);
    assert_eq!(unsafe { upb_correlation_get(h, 11, &mut tau, &mut g2) }, UpbStatus::InvalidArgument);
    unsafe { upb_correlation_free(h) };
    unsafe { upb_correlation_free(ptr::null_mut()) };
    assert_eq!(unsafe { upb_correlation_len(ptr::null()) }, 0);
    assert_eq!(unsafe { upb_g2_tau(&p, 3, 6, 1.0, 1, &mut h) }, UpbStatus::InvalidArgument);
}

#[test]
fn ensemble_handle() {
    let mut p = cw(0.0);
    p.j_coupling = 1.0;
    p.amplitude = 1.0;
    let cfg = UpbEnsembleConfig {
        n1_levels: 3,
        n2_levels: 3,
        horizon: 3.0,
        n_traj: 64,
        master_seed: 3,
        mean_field_frame: false,
        fluctuation_channel2: false,
        rtol: 1e-8,
        atol: 1e-11,
    };
    let mut e: *mut UpbEnsemble = ptr::null_mut();
    assert_eq!(unsafe { upb_ensemble_run(&p, &cfg, &mut e) }, UpbStatus::Ok);
    assert_eq!(unsafe { upb_ensemble_trajectories(e) }, 64);
    assert_eq!(unsafe { upb_ensemble_failures(e) }, 0);
    let mut c1 = 0;
    assert_eq!(unsafe { upb_ensemble_count_events(e, 1, 0.0, 3.0, &mut c1) }, UpbStatus::Ok);
    assert!(c1 > 0);
    assert_eq!(unsafe { upb_ensemble_count_events(e, 3, 0.0, 3.0, &mut c1) }, UpbStatus::InvalidArgument);
    let mut pc = UpbPairCount::default();
    assert_eq!(unsafe { upb_ensemble_pair_statistics(e, 0.0, 3.0, 3.0, &mut pc) }, UpbStatus::Ok);
    assert!(pc.singles > 0);
    assert_eq!(unsafe { upb_ensemble_pair_statistics(e, 0.0, 3.0, 4.0, &mut pc) }, UpbStatus::InvalidArgument);

    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("ev.csv").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { upb_ensemble_write_log(e, path.as_ptr()) }, UpbStatus::Ok);
    assert!(dir.path().join("ev.meta.json").exists());
    unsafe { upb_ensemble_free(e) };
}

#[test]
fn header_compiles_as_c() {
    let dir = env!("CARGO_MANIFEST_DIR");
    let src = r#"
        #include "upb.h"
        int main(void) {
            double j, d;
            UpbStatus s = upb_optimal_conditions(0.001, &j, &d);
            UpbCorrelation *c = NULL;
            UpbEnsemble *e = NULL;
            upb_correlation_free(c);
            upb_ensemble_free(e);
            return s == UPB_STATUS_OK ? 0 : 1;
        }
    "#;
    let tmp = tempfile::tempdir().unwrap();
    let file = tmp.path().join("check.c");
    std::fs::write(&file, src).unwrap();
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let out = std::process::Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(format!("{dir}/include"))
        .arg(&file)
        .output()
        .expect("a C compiler is needed to check the header");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
