//! The identity and certification suite behind `threshold-lab check`.

use num_complex::Complex64;

use crate::approx::{build_vk, rate_times, residual_rate};
use crate::config::RunConfig;
use crate::error::Result;
use crate::grid::{make_grid, Field};
use crate::ground::{check_identities_tol, gn_competitors, gn_quotient, solve_ground_with, GroundProfile};
use crate::io::Report;
use crate::linearized::{
    assemble, bilinear_b, coercivity_detail, compute_spectrum, linearized_energy_phi, negative_direction, LinearizedOps,
    SpectrumData, Subspace,
};

/// Orders and amplitudes probed by the residual-rate check.
pub const RATE_ORDERS: [usize; 3] = [1, 2, 3];
pub const RATE_AMPLITUDES: [f64; 2] = [1.0, -1.0];

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: String,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct SuiteResult {
    pub checks: Vec<CheckOutcome>,
    pub report: Report,
    pub gp: GroundProfile,
    pub spectrum: SpectrumData,
}

impl SuiteResult {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect()
    }
}

struct Ledger {
    checks: Vec<CheckOutcome>,
    report: Report,
}

impl Ledger {
    fn check(&mut self, name: &str, pass: bool) {
        self.report.flag(&format!("check.{name}"), pass);
        self.checks.push(CheckOutcome { name: name.to_string(), pass });
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Smooth, non-symmetric pair of test directions.
fn probe_fields(gp: &GroundProfile) -> (Field, Field) {
    let g = &gp.grid;
    let f = Field::from_fn(g, |r| Complex64::new((-r * r / 3.0).exp() * (1.0 + r), (-r).exp() * r.cos()));
    let h = Field::from_fn(g, |r| Complex64::new((-0.5 * r).exp() * (r * 0.7).sin(), (-r * r / 5.0).exp()));
    (f, h)
}

/// B(𝓛f, g) + B(f, 𝓛g), relative to the size of either term.
pub fn b_antisymmetry_defect(ops: &LinearizedOps, f: &Field, g: &Field) -> Result<f64> {
    let a = bilinear_b(&ops.apply_cal_l(f), g, ops)?;
    let b = bilinear_b(f, &ops.apply_cal_l(g), ops)?;
    Ok((a + b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE))
}

pub fn run_checks(cfg: &RunConfig) -> Result<SuiteResult> {
    let grid = make_grid(cfg.model.dim, cfg.grid.rmax, cfg.grid.n)?;
    let gp = solve_ground_with(&grid, cfg.model.p, &cfg.ground_options())?;
    let mut l = Ledger { checks: Vec::new(), report: Report::new() };
    let tol = &cfg.spectrum;

    let ids = check_identities_tol(&gp, cfg.ground.identity_tol, cfg.ground.tail_tol);
    l.report.extend("ground.", &ids.to_report());
    l.check("pohozaev", ids.pohozaev_pass());
    l.check("mass_ratio", ids.mass_pass());
    l.check("gn_equality", ids.gn_pass());
    l.check("energy", ids.energy_pass());
    l.check("tail_law", ids.tail_pass());

    let p = gp.p;
    let at_q = gn_quotient(&gp.q, p);
    l.report.num("gn.at_q", at_q);
    let (perturbed, orbit) = gn_competitors(&gp);
    let mut below = true;
    for (name, f) in &perturbed {
        let v = gn_quotient(f, p);
        l.report.num(&format!("gn.competitor.{name}"), v);
        below &= v < at_q;
    }
    let mut on_orbit = true;
    for (name, f) in &orbit {
        let v = gn_quotient(f, p);
        l.report.num(&format!("gn.orbit.{name}"), v);
        on_orbit &= rel(v, at_q) <= cfg.ground.identity_tol;
    }
    l.check("gn_maximal", below);
    l.check("gn_orbit_invariant", on_orbit);

    let ops = assemble(&gp);
    let qn = ops.l2(&gp.q_values());
    let kern = ops.kernel_residual() / qn;
    let scal = ops.scaling_residual() / (2.0 * qn);
    l.report.num("kernel.minus_q", kern).num("kernel.plus_lambda_q", scal);
    l.check("kernel_minus", kern <= tol.residual_tol);
    l.check("kernel_plus_scaling", scal <= tol.residual_tol);

    let spec = compute_spectrum(&ops)?;
    let yp = spec.y_plus();
    let ym = spec.y_minus();
    let y1q = ops.dot(&spec.y1.re(), &gp.q_values());
    let byy = bilinear_b(&yp, &ym, &ops)?;
    let phi_y = linearized_energy_phi(&yp, &ops)?;
    l.report
        .num("spectrum.e0", spec.e0)
        .num("spectrum.e0_dense", spec.e0_dense)
        .num("spectrum.residual_plus", spec.residual_plus)
        .num("spectrum.residual_minus", spec.residual_minus)
        .num("spectrum.y1_dot_q", y1q)
        .num("spectrum.b_yplus_yminus", byy)
        .num("spectrum.phi_yplus", phi_y)
        .num("spectrum.mu_second", spec.mu_second)
        .num("spectrum.decay_eta", spec.decay_eta);
    l.check("eigen_residuals", spec.residual_plus <= tol.residual_tol && spec.residual_minus <= tol.residual_tol);
    l.check("y1_orthogonal_q", y1q.abs() <= tol.normalization_tol);
    l.check("b_normalization", (byy - 1.0).abs() <= tol.normalization_tol);
    l.check("phi_yplus_zero", phi_y.abs() <= tol.normalization_tol);

    let (f, g) = probe_fields(&gp);
    let anti = b_antisymmetry_defect(&ops, &f, &g)?;
    l.report.num("b.antisymmetry_defect", anti);
    l.check("b_antisymmetry", anti <= tol.residual_tol);

    let (zv, zt) = negative_direction(&ops);
    l.report.num("negative_direction.value", zv).num("negative_direction.target", zt);
    l.check("negative_direction", rel(zv, zt) <= tol.negative_direction_tol);

    let phi_q = linearized_energy_phi(&gp.q, &ops)?;
    let phi_t = 0.5 * (1.0 - p) * gp.potential();
    l.report.num("phi_q.value", phi_q).num("phi_q.target", phi_t);
    l.check("phi_q", phi_q < 0.0 && rel(phi_q, phi_t) <= tol.phi_tol);

    if tol.coercivity {
        for (name, sub) in [("g_perp", Subspace::GPerp), ("g_tilde_perp", Subspace::GTildePerp)] {
            let c = coercivity_detail(&ops, &spec, sub)?;
            l.report
                .num(&format!("coercivity.{name}"), c.value)
                .num(&format!("coercivity.{name}.plus_block"), c.plus_block)
                .num(&format!("coercivity.{name}.minus_block"), c.minus_block);
            l.check(&format!("coercivity_{name}"), c.value > 0.0);
        }
    }

    let times = rate_times(spec.e0);
    let factor = cfg.experiment.residual_rate_factor;
    for &a in &RATE_AMPLITUDES {
        for &k in &RATE_ORDERS {
            let ap = build_vk(a, k, &spec, &ops)?;
            let fit = residual_rate(&ap, &times, &ops)?;
            let key = format!("residual_rate.a{a:+}.k{k}");
            l.report.num(&key, fit.rate).num(&format!("{key}.over_e0"), fit.rate / spec.e0);
            l.check(&format!("residual_rate_a{a:+}_k{k}"), fit.rate <= -((k + 1) as f64) * spec.e0 * factor);
        }
    }

    Ok(SuiteResult { checks: l.checks, report: l.report, gp, spectrum: spec })
}
