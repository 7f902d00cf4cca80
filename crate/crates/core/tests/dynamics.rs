mod common;

use num_complex::Complex64 as C;
use proptest::prelude::*;

use threshold_core::evolution::{classify_run, evolve, Evolver, EvolverConfig, Splitting, Sponge, Verdict};
use threshold_core::Field;

fn evolver(dt: f64) -> Evolver {
    let gp = &common::cubic().gp;
    Evolver::new(&gp.grid, &EvolverConfig::new(3.0, dt, 1.0), Some(gp)).unwrap()
}

fn bump(amp: f64, width: f64, chirp: f64) -> Field {
    let gp = &common::cubic().gp;
    Field::from_fn(&gp.grid, |r| C::from_polar(amp * (-r * r / width).exp(), chirp * r * r))
}

fn dist(a: &Field, b: &Field) -> f64 {
    a.sub(b).unwrap().norms(2.0).h1 / b.norms(2.0).h1.max(1e-300)
}

#[test]
fn standing_wave_rotates_exactly() {
    let gp = &common::cubic().gp;
    let mut ev = evolver(1e-3);
    let u = ev.step(&gp.q, 1e-3).unwrap();
    let want = gp.q.scale(C::from_polar(1.0, 1e-3));
    assert!(dist(&u, &want) < 1e-12, "{:e}", dist(&u, &want));
}

#[test]
fn standard_split_defect_is_third_order() {
    let gp = &common::cubic().gp;
    let mut cfg = EvolverConfig::new(3.0, 1e-2, 1.0);
    cfg.splitting = Splitting::Standard;
    let mut ev = Evolver::new(&gp.grid, &cfg, Some(gp)).unwrap();
    let mut defect = |dt: f64| dist(&ev.step(&gp.q, dt).unwrap(), &gp.q.scale(C::from_polar(1.0, dt)));
    let (a, b) = (defect(1e-2), defect(5e-3));
    assert!(a > 1e-10);
    assert!((a / b) > 6.0 && (a / b) < 10.0, "{a:e} {b:e}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn steps_reverse(amp in 0.5f64..3.0, width in 0.5f64..4.0, chirp in -0.5f64..0.5) {
        let mut ev = evolver(1e-3);
        let u = bump(amp, width, chirp);
        let fwd = ev.step(&u, 1e-3).unwrap();
        let back = ev.step(&fwd, -1e-3).unwrap();
        prop_assert!(dist(&back, &u) < 1e-10, "{:e}", dist(&back, &u));
    }

    #[test]
    fn phase_commutes_with_flow(amp in 0.5f64..3.0, phi in 0.0f64..6.3) {
        let mut ev = evolver(1e-3);
        let u = bump(amp, 2.0, 0.1);
        let rot = C::from_polar(1.0, phi);
        let a = ev.step(&u.scale(rot), 1e-3).unwrap();
        let b = ev.step(&u, 1e-3).unwrap().scale(rot);
        prop_assert!(dist(&a, &b) < 1e-13);
    }

    #[test]
    fn mass_is_conserved_without_sponge(amp in 0.5f64..3.0, width in 0.5f64..4.0) {
        let mut ev = evolver(1e-3);
        let u = bump(amp, width, 0.2);
        let m0 = u.norms(2.0).l2;
        let mut v = u;
        for _ in 0..20 {
            v = ev.step(&v, 1e-3).unwrap();
        }
        prop_assert!((v.norms(2.0).l2 / m0 - 1.0).abs() < 1e-12);
    }
}

#[test]
fn sponge_only_removes_mass() {
    let gp = &common::cubic().gp;
    let mut cfg = EvolverConfig::new(3.0, 1e-3, 1.0);
    cfg.sponge = Sponge::default_on();
    let mut ev = Evolver::new(&gp.grid, &cfg, Some(gp)).unwrap();
    // Outgoing packet near the boundary.
    let u = Field::from_fn(&gp.grid, |r| C::from_polar((-(r - 17.0).powi(2)).exp(), 3.0 * r));
    let mut v = u.clone();
    for _ in 0..200 {
        let w = ev.step(&v, 1e-3).unwrap();
        assert!(w.norms(2.0).l2 <= v.norms(2.0).l2 * (1.0 + 1e-14));
        v = w;
    }
    assert!(v.norms(2.0).l2 < 0.99 * u.norms(2.0).l2);
}

#[test]
fn scaled_up_ground_state_blows_up() {
    let gp = &common::cubic().gp;
    let cfg = EvolverConfig::new(3.0, 1e-3, 3.0);
    let (s, _) = evolve(&gp.q.scale_real(1.1), 0.0, &cfg, Some(gp)).unwrap();
    let c = classify_run(&s, &cfg);
    assert!(matches!(c.verdict, Verdict::BlowUp { .. }), "{:?}", c.verdict);
    assert!(s.stopped_early);
    assert!(s.min_dt < cfg.dt);
}

#[test]
fn scaled_down_ground_state_disperses() {
    let gp = &common::cubic().gp;
    let mut cfg = EvolverConfig::new(3.0, 1e-3, 3.0);
    cfg.sponge = Sponge::default_on();
    let (s, _) = evolve(&gp.q.scale_real(0.5), 0.0, &cfg, Some(gp)).unwrap();
    let c = classify_run(&s, &cfg);
    assert_eq!(c.verdict, Verdict::Scatter, "{}", c.evidence.render());
}

#[test]
fn ground_state_classified_as_standing() {
    let gp = &common::cubic().gp;
    let cfg = EvolverConfig::new(3.0, 1e-3, 1.0);
    let (s, _) = evolve(&gp.q, 0.0, &cfg, Some(gp)).unwrap();
    assert!(matches!(classify_run(&s, &cfg).verdict, Verdict::ConvergeToQ { .. }));
    assert!(s.mass_drift() < 1e-12);
}

#[test]
fn csv_is_stable_across_runs() {
    let gp = &common::cubic().gp;
    let cfg = EvolverConfig::new(3.0, 1e-3, 0.3);
    let u = gp.q.scale_real(1.02);
    let a = evolve(&u, 0.0, &cfg, Some(gp)).unwrap().0;
    let b = evolve(&u, 0.0, &cfg, Some(gp)).unwrap().0;
    assert_eq!(a.to_csv(), b.to_csv());
    assert_eq!(a.extras_csv(), b.extras_csv());
}
