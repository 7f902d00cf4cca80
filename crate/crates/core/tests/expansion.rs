mod common;

use num_complex::Complex64 as C;
use proptest::prelude::*;

use threshold_core::approx::{build_vk, direct_r, expand_r, lp_mul, lp_pow_frac, residual_rate, LambdaPoly};

fn poly_from(order: usize, seeds: &[f64]) -> LambdaPoly {
    let len = 3;
    let mut p = LambdaPoly::zero(order, len);
    for (j, s) in seeds.iter().enumerate().take(order + 1) {
        p.set(j, (0..len).map(|i| C::new(s * (1.0 + i as f64), s.sin())).collect());
    }
    p
}

fn close(a: &LambdaPoly, b: &LambdaPoly, tol: f64) -> bool {
    (0..=a.order()).all(|j| a.coeff(j).iter().zip(b.coeff(j)).all(|(x, y)| (x - y).norm() <= tol * (1.0 + x.norm())))
}

proptest! {
    #[test]
    fn cauchy_product_is_associative(a in prop::collection::vec(-2.0f64..2.0, 4),
                                     b in prop::collection::vec(-2.0f64..2.0, 4),
                                     c in prop::collection::vec(-2.0f64..2.0, 4)) {
        let (a, b, c) = (poly_from(3, &a), poly_from(3, &b), poly_from(3, &c));
        let l = lp_mul(&lp_mul(&a, &b).unwrap(), &c).unwrap();
        let r = lp_mul(&a, &lp_mul(&b, &c).unwrap()).unwrap();
        prop_assert!(close(&l, &r, 1e-12));
    }

    #[test]
    fn square_root_squares_back(w in prop::collection::vec(-1.0f64..1.0, 4)) {
        let full = poly_from(3, &w);
        let mut z = LambdaPoly::zero(3, 3);
        for j in 1..=3 {
            z.set(j, full.coeff(j));
        }
        let root = lp_pow_frac(0.5, &z).unwrap();
        let sq = lp_mul(&root, &root).unwrap();
        let one_plus = LambdaPoly::one(3, 3).add(&z).unwrap();
        prop_assert!(close(&sq, &one_plus, 1e-12));
    }

    #[test]
    fn cubic_remainder_closed_form(re in -3.0f64..3.0, im in -3.0f64..3.0) {
        // For p = 3: R(f) = 2Q·f₁·f + Q|f|² + |f|²f.
        let gp = &common::cubic().gp;
        let f: Vec<C> = gp.q_values().iter().map(|_| C::new(re, im)).collect();
        let r = direct_r(gp, &f);
        for (q, (z, got)) in gp.q_values().iter().zip(f.iter().zip(&r)) {
            let n2 = z.norm_sqr();
            let want = z * (2.0 * q * z.re) + C::new(q * n2, 0.0) + z * n2;
            prop_assert!((got - want).norm() <= 1e-10 * (1.0 + want.norm()));
        }
    }
}

#[test]
fn cubic_expansion_is_exact_for_one_term() {
    // A degree-three nonlinearity of λZ has only λ² and λ³ terms.
    let fx = common::cubic();
    let gp = &fx.gp;
    let z1 = fx.spec.y_plus().scale_real(0.3);
    let mut v = LambdaPoly::zero(3, gp.grid.len());
    v.set(1, z1.values().to_vec());
    let r = expand_r(&v, gp, None).unwrap();
    for lam in [0.05, 0.2] {
        let series = r.eval(lam);
        let direct = direct_r(gp, &v.eval(lam));
        let peak = direct.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let err = series.iter().zip(&direct).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err <= 1e-9 * peak, "λ={lam}: {err:e} vs {peak:e}");
    }
}

#[test]
fn higher_order_keeps_lower_profiles() {
    let fx = common::cubic();
    let two = build_vk(1.0, 2, &fx.spec, &fx.ops).unwrap();
    let three = build_vk(1.0, 3, &fx.spec, &fx.ops).unwrap();
    for j in 0..2 {
        let d = two.z[j].sub(&three.z[j]).unwrap().norms(2.0).h1;
        assert!(d == 0.0, "Z_{} changed by {d:e}", j + 1);
    }
}

#[test]
fn amplitude_sign_flips_odd_profiles() {
    let fx = common::cubic();
    let plus = build_vk(1.0, 3, &fx.spec, &fx.ops).unwrap();
    let minus = build_vk(-1.0, 3, &fx.spec, &fx.ops).unwrap();
    for j in 0..3 {
        let sign = if j % 2 == 0 { -1.0 } else { 1.0 };
        let d = plus.z[j].scale_real(sign).sub(&minus.z[j]).unwrap().norms(2.0).h1;
        let n = plus.z[j].norms(2.0).h1;
        assert!(d <= 1e-10 * n, "Z_{}: {d:e}", j + 1);
    }
}

#[test]
fn residual_decays_faster_with_order() {
    let fx = common::cubic();
    let e0 = fx.spec.e0;
    let times = threshold_core::approx::rate_times(e0);
    let mut last = 0.0;
    for k in 1..=3 {
        let ap = build_vk(1.0, k, &fx.spec, &fx.ops).unwrap();
        let rate = residual_rate(&ap, &times, &fx.ops).unwrap().rate;
        assert!(rate < last);
        assert!(rate <= -((k + 1) as f64) * e0 * 0.9, "k={k}: {}", rate / e0);
        last = rate;
    }
}

#[test]
fn first_profile_is_scaled_eigenfunction() {
    let fx = common::cubic();
    let ap = build_vk(-2.5, 1, &fx.spec, &fx.ops).unwrap();
    let want = fx.spec.y_plus().scale_real(-2.5);
    assert_eq!(ap.z[0].values(), want.values());
    assert!(build_vk(1.0, 0, &fx.spec, &fx.ops).is_err());
}
