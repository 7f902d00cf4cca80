mod common;

use threshold_core::approx::build_vk;
use threshold_core::evolution::{diagnostics, EvolverConfig};
use threshold_core::special::{log_rate, synthesize_ua, threshold_datum, SpecialRunSpec};
use threshold_core::LabError;

#[test]
fn threshold_datum_hits_targets() {
    let gp = &common::cubic().gp;
    for mg in [0.9, 1.0, 1.1] {
        let u = threshold_datum(gp, mg).unwrap();
        let s = diagnostics(&u, 0.0, 3.0, Some(gp)).unwrap();
        assert!((s.me - 1.0).abs() < 1e-8, "ME {} at MG {mg}", s.me);
        assert!((s.mg - mg).abs() < 1e-8, "MG {} vs {mg}", s.mg);
    }
    assert!(threshold_datum(gp, -1.0).is_err());
}

#[test]
fn log_rate_of_exponential() {
    let t: Vec<f64> = (0..10).map(|i| i as f64 * 0.1).collect();
    let v: Vec<f64> = t.iter().map(|x| 3.0 * (-2.5 * x).exp()).collect();
    approx::assert_relative_eq!(log_rate(&t, &v), -2.5, max_relative = 1e-12);
    assert!(log_rate(&t[..2], &v[..2]).is_nan());
}

#[test]
fn synthesis_guards_inputs() {
    let fx = common::cubic();
    let ap = build_vk(1.0, 2, &fx.spec, &fx.ops).unwrap();
    let cfg = EvolverConfig::new(3.0, 1e-3, 0.0);
    let wide = SpecialRunSpec::new(1.0, 2, 0.3, cfg.clone());
    assert!(matches!(synthesize_ua(&wide, &ap, &fx.gp), Err(LabError::InvalidParameter(_))));
    let other = SpecialRunSpec::new(-1.0, 2, 0.1, cfg.clone());
    assert!(synthesize_ua(&other, &ap, &fx.gp).is_err());
    let ok = SpecialRunSpec::new(1.0, 2, 0.1, cfg);
    let syn = synthesize_ua(&ok, &ap, &fx.gp).unwrap();
    approx::assert_relative_eq!(syn.t0, -(0.1f64).ln() / fx.spec.e0, max_relative = 1e-14);
    let s = diagnostics(&syn.u, syn.t0, 3.0, Some(&fx.gp)).unwrap();
    assert!(s.grad > s.dist_q && (s.grad - fx.gp.grad_sq().sqrt()) > 0.0);
}
