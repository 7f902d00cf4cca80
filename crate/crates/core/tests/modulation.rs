mod common;

use std::f64::consts::TAU;

use num_complex::Complex64 as C;
use proptest::prelude::*;

use threshold_core::modulation::{fit_parameters, fit_parameters_window, ratio, track, TrackEntry};
use threshold_core::LabError;

fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn pure_phase_is_recovered(theta in 0.0f64..TAU, t in 0.0f64..4.0) {
        let gp = &common::cubic().gp;
        let u = gp.q.scale(C::from_polar(1.0, t + theta));
        let f = fit_parameters(&u, t, gp).unwrap();
        prop_assert!(angle_gap(f.theta, theta) < 1e-10);
        prop_assert!(f.alpha.abs() < 1e-12);
        prop_assert!(f.h_norm() < 1e-10);
    }

    #[test]
    fn amplitude_goes_to_alpha(a in -0.05f64..0.05, theta in 0.0f64..TAU) {
        let gp = &common::cubic().gp;
        let u = gp.q.scale(C::from_polar(1.0 + a, theta));
        let f = fit_parameters(&u, 0.0, gp).unwrap();
        prop_assert!((f.alpha - a).abs() < 1e-12);
        prop_assert!(f.res1.abs() < 1e-10 && f.res2.abs() < 1e-10);
    }
}

#[test]
fn orthogonality_holds_for_generic_perturbations() {
    let gp = &common::cubic().gp;
    let bump = threshold_core::Field::from_fn(&gp.grid, |r| C::new(0.02 * (-r * r).exp(), 0.03 * (-r).exp() * r));
    let u = gp.q.add(&bump).unwrap().scale(C::from_polar(1.0, 1.1));
    let f = fit_parameters(&u, 0.0, gp).unwrap();
    assert!(f.res1.abs() < 1e-10 && f.res2.abs() < 1e-10, "{} {}", f.res1, f.res2);
}

#[test]
fn far_data_is_out_of_window() {
    let gp = &common::cubic().gp;
    let e = fit_parameters(&gp.q.scale_real(2.0), 0.0, gp).unwrap_err();
    assert!(matches!(e, LabError::OutOfWindow(_)));
    assert!(fit_parameters_window(&gp.q.scale_real(2.0), 0.0, gp, 2.0, None).is_ok());
}

#[test]
fn degenerate_ratio_is_flagged() {
    assert_eq!(ratio(0.0, 0.0, 1e-12), None);
    assert_eq!(ratio(-2.0, 4.0, 1e-12), Some(0.5));
}

#[test]
fn tracking_keeps_order_and_marks_gaps() {
    let gp = &common::cubic().gp;
    let snaps = vec![
        (0.0, gp.q.clone()),
        (0.5, gp.q.scale_real(3.0)),
        (1.0, gp.q.scale(C::from_polar(1.0, 1.0 + 0.2))),
    ];
    let out = track(&snaps, gp);
    assert_eq!(out.len(), 3);
    assert!(matches!(out[1], TrackEntry::Gap { .. }));
    let last = out[2].frame().unwrap();
    assert!(angle_gap(last.frame.theta, 0.2) < 1e-10);
    assert!(last.alpha_over_d.is_none());
}
