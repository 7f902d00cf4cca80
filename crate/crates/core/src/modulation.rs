//! Phase/amplitude decomposition near the standing wave:
//! `e^{−it}e^{−iθ}u = (1 + α)Q + h` with `∫Q·Im h = 0` and `∫Qᵖ·Re h = 0`.

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;

use num_complex::Complex64;

use crate::error::{LabError, Result};
use crate::grid::Field;
use crate::ground::GroundProfile;
use crate::io::fmt_f64;

type C = Complex64;

/// Default window: d(u) ≤ 0.3·∥∇Q∥.
pub const DEFAULT_WINDOW: f64 = 0.3;
const MAX_NEWTON: usize = 50;

#[derive(Debug, Clone)]
pub struct ModulationFrame {
    pub t: f64,
    pub theta: f64,
    pub alpha: f64,
    pub h: Field,
    pub d: f64,
    /// ∫Q·Im h.
    pub res1: f64,
    /// ∫Qᵖ·Re h.
    pub res2: f64,
    pub newton_steps: usize,
}

impl ModulationFrame {
    pub fn h_norm(&self) -> f64 {
        self.h.norms(2.0).h1
    }
}

pub const FRAME_HEADER: &str = "t,theta,alpha,hnorm,d,res1,res2";

struct Projector {
    q: Field,
    qp: Field,
    qp1_int: f64,
    grad_q: f64,
}

impl Projector {
    fn new(gp: &GroundProfile) -> Self {
        let q = gp.q.clone();
        let qp = q.map(|_, z| C::new(z.re.abs().powf(gp.p), 0.0));
        let qp1_int = q.integrate(|z, _| z.re.abs().powf(gp.p + 1.0));
        let grad_q = q.grad_sq().sqrt();
        Projector { q, qp, qp1_int, grad_q }
    }

    // ∫ w·g for real weight g, complex result.
    fn pair(&self, weight: &Field, w: &Field) -> C {
        let vr: Vec<f64> = weight.values().iter().zip(w.values()).map(|(a, b)| a.re * b.re).collect();
        let vi: Vec<f64> = weight.values().iter().zip(w.values()).map(|(a, b)| a.re * b.im).collect();
        let g = w.grid();
        C::new(g.integrate_values(&vr, true, true), g.integrate_values(&vi, true, true))
    }
}

fn wrap(theta: f64) -> f64 {
    let t = theta.rem_euclid(TAU);
    if t >= TAU {
        0.0
    } else {
        t
    }
}

fn fit_with(u: &Field, t: f64, proj: &Projector, seed: Option<f64>, window: f64) -> Result<ModulationFrame> {
    u.check_same_grid(&proj.q)?;
    let d = (u.grad_sq().sqrt() - proj.grad_q).abs();
    if d > window * proj.grad_q {
        return Err(LabError::OutOfWindow(format!(
            "d = {d:.4e} exceeds the window {:.4e} at t = {t}",
            window * proj.grad_q
        )));
    }
    let pw = proj.pair(&proj.q, u) * C::from_polar(1.0, -t);
    if pw.norm() == 0.0 {
        return Err(LabError::NonConvergence("state orthogonal to Q; phase undefined".into()));
    }
    // g(θ) = Im(e^{−iθ}P), g′(θ) = −Re(e^{−iθ}P).
    let mut theta = seed.unwrap_or_else(|| pw.arg());
    let mut steps = 0;
    loop {
        let z = C::from_polar(1.0, -theta) * pw;
        if z.im.abs() <= 1e-14 * pw.norm() {
            break;
        }
        if steps == MAX_NEWTON {
            return Err(LabError::NonConvergence(format!("phase Newton did not converge at t = {t}")));
        }
        let dg = -z.re;
        theta -= if dg.abs() > 1e-300 { z.im / dg } else { PI / 2.0 };
        steps += 1;
    }
    // Keep the root where the projection is positive.
    if (C::from_polar(1.0, -theta) * pw).re < 0.0 {
        theta += PI;
    }
    let theta = wrap(theta);
    let rot = C::from_polar(1.0, -theta - t);
    let w = u.scale(rot);
    let alpha = proj.pair(&proj.qp, &w).re / proj.qp1_int - 1.0;
    let h = w.axpy(C::new(-(1.0 + alpha), 0.0), &proj.q)?;
    let res1 = proj.pair(&proj.q, &h).im;
    let res2 = proj.pair(&proj.qp, &h).re;
    Ok(ModulationFrame { t, theta, alpha, h, d, res1, res2, newton_steps: steps })
}

pub fn fit_parameters(u: &Field, t: f64, gp: &GroundProfile) -> Result<ModulationFrame> {
    fit_parameters_window(u, t, gp, DEFAULT_WINDOW, None)
}

/// `window` in units of ∥∇Q∥; `seed` starts the phase Newton iteration.
pub fn fit_parameters_window(u: &Field, t: f64, gp: &GroundProfile, window: f64, seed: Option<f64>) -> Result<ModulationFrame> {
    let proj = Projector::new(gp);
    fit_with(u, t, &proj, seed, window)
}

/// Ratio channel; `None` marks the degenerate 0/0 case.
pub fn ratio(num: f64, den: f64, tol: f64) -> Option<f64> {
    if num.abs() <= tol && den.abs() <= tol {
        None
    } else {
        Some(num.abs() / den.abs())
    }
}

#[derive(Debug, Clone)]
pub struct TrackedFrame {
    pub frame: ModulationFrame,
    pub alpha_over_d: Option<f64>,
    pub h_over_d: Option<f64>,
    pub qreh_over_alpha: Option<f64>,
}

#[derive(Debug, Clone)]
pub enum TrackEntry {
    Frame(TrackedFrame),
    Gap { t: f64, reason: String },
}

impl TrackEntry {
    pub fn frame(&self) -> Option<&TrackedFrame> {
        match self {
            TrackEntry::Frame(f) => Some(f),
            TrackEntry::Gap { .. } => None,
        }
    }
}

/// Degenerate-ratio tolerance.
pub const RATIO_TOL: f64 = 1e-12;

pub fn track(snapshots: &[(f64, Field)], gp: &GroundProfile) -> Vec<TrackEntry> {
    let proj = Projector::new(gp);
    let mut seed = None;
    let mut out = Vec::with_capacity(snapshots.len());
    for (t, u) in snapshots {
        match fit_with(u, *t, &proj, seed, DEFAULT_WINDOW) {
            Ok(frame) => {
                seed = Some(frame.theta);
                let hn = frame.h_norm();
                let qreh = proj.pair(&proj.q, &frame.h).re;
                out.push(TrackEntry::Frame(TrackedFrame {
                    alpha_over_d: ratio(frame.alpha, frame.d, RATIO_TOL),
                    h_over_d: ratio(hn, frame.d, RATIO_TOL),
                    qreh_over_alpha: ratio(qreh, frame.alpha, RATIO_TOL),
                    frame,
                }));
            }
            Err(e) => out.push(TrackEntry::Gap { t: *t, reason: e.to_string() }),
        }
    }
    out
}

pub fn frames_csv(entries: &[TrackEntry]) -> String {
    let mut s = String::from(FRAME_HEADER);
    s.push('\n');
    for e in entries {
        if let TrackEntry::Frame(f) = e {
            let fr = &f.frame;
            let row = [fr.t, fr.theta, fr.alpha, fr.h_norm(), fr.d, fr.res1, fr.res2];
            let cells: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
            let _ = writeln!(s, "{}", cells.join(","));
        }
    }
    s
}
