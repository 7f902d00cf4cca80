//! Radial time integration of `i∂ₜu + Δu + |u|^{p−1}u = 0`.
//!
//! Strang splitting: exact nonlinear phase half-steps around a Crank–Nicolson
//! step for the linear part, solved in mass-weighted coordinates with a banded
//! LU. All diagnostics use the same discrete quadratic forms as the scheme, so
//! discrete mass is conserved to rounding with the sponge off.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;

use crate::band::{BandLu, CBand};
use crate::error::{LabError, Result};
use crate::grid::{Field, Grid};
use crate::ground::GroundProfile;
use crate::io::{fmt_f64, Report};

type C = Complex64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sponge {
    Off,
    /// Absorbing layer `σ0·((r − r_s)/(rmax − r_s))²` on the outer `width` fraction.
    On { strength: f64, width: f64 },
}

impl Sponge {
    pub fn default_on() -> Self {
        Sponge::On { strength: 5.0, width: 0.15 }
    }
}

/// How the generator is divided between the phase step and the linear step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Splitting {
    /// Phase `|u|^{p−1}`, linear part `Δ`.
    Standard,
    /// Phase `|u|^{p−1} − Q^{p−1} + 1`, linear part `Δ + Q^{p−1} − 1`. The linear
    /// step then fixes Q and the phase step rotates it by exactly `e^{iτ}`, so the
    /// discrete standing wave carries no splitting defect. Needs a reference profile;
    /// without one it reduces to `Standard`.
    Frozen,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolverConfig {
    pub p: f64,
    pub splitting: Splitting,
    pub dt: f64,
    pub t_end: f64,
    pub sponge: Sponge,
    /// Halve dt when ∥∇u∥ grows by this factor between samples.
    pub adapt_trigger: f64,
    pub min_dt: f64,
    pub sample_every: f64,
    /// Keep a snapshot every this many samples (0 keeps none).
    pub snapshot_every: usize,
    /// Blow-up evidence threshold in units of ∥∇Q∥.
    pub blowup_factor: f64,
    /// Stop unconditionally beyond this multiple of ∥∇Q∥ (grid no longer resolves the solution).
    pub hard_stop_factor: f64,
    pub mass_tol: f64,
    pub nonlinear: bool,
}

impl EvolverConfig {
    pub fn new(p: f64, dt: f64, t_end: f64) -> Self {
        EvolverConfig {
            p,
            splitting: Splitting::Frozen,
            dt,
            t_end,
            sponge: Sponge::Off,
            adapt_trigger: 1.2,
            min_dt: dt / 32.0,
            sample_every: 0.01,
            snapshot_every: 0,
            blowup_factor: 3.0,
            hard_stop_factor: 10.0,
            mass_tol: 1e-3,
            nonlinear: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(LabError::InvalidParameter(m));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.min_dt > 0.0 && self.min_dt <= self.dt) {
            return bad(format!("min_dt must lie in (0, dt], got {}", self.min_dt));
        }
        if !(self.sample_every > 0.0) {
            return bad(format!("sample interval must be positive, got {}", self.sample_every));
        }
        if !(self.adapt_trigger > 1.0) {
            return bad(format!("adapt trigger must exceed 1, got {}", self.adapt_trigger));
        }
        if let Sponge::On { strength, width } = self.sponge {
            if !(strength >= 0.0) || !(width > 0.0 && width < 1.0) {
                return bad(format!("sponge needs strength >= 0 and width in (0,1), got {strength}, {width}"));
            }
        }
        if !(self.p > 1.0) {
            return bad(format!("p must exceed 1, got {}", self.p));
        }
        Ok(())
    }
}

/// One diagnostic sample.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Sample {
    pub t: f64,
    pub mass: f64,
    pub energy: f64,
    pub momentum: f64,
    pub grad: f64,
    pub d: f64,
    pub me: f64,
    pub mg: f64,
    pub linf: f64,
    pub fr: f64,
    pub frp: f64,
    pub dist_q: f64,
    pub potential: f64,
    pub variance: f64,
    pub dvariance: f64,
    pub dist_aligned: f64,
    pub theta: f64,
    pub dt: f64,
}

pub const SERIES_HEADER: &str = "t,mass,energy,momentum,grad,d,me,mg,linf,fr,frp,dist_q";
pub const EXTRA_HEADER: &str = "t,potential,variance,dvariance,dist_aligned,theta,dt";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TimeSeries {
    pub samples: Vec<Sample>,
    /// Reference values at Q: (M, ∥∇Q∥, E, ∫Q^{p+1}); zero when no reference.
    pub reference: Option<ReferenceLevels>,
    pub steps: usize,
    pub stopped_early: bool,
    pub final_dt: f64,
    pub min_dt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceLevels {
    pub mass: f64,
    pub grad: f64,
    pub energy: f64,
    pub potential: f64,
}

impl TimeSeries {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn last(&self) -> Option<&Sample> {
        self.samples.last()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(SERIES_HEADER);
        s.push('\n');
        for x in &self.samples {
            let row = [x.t, x.mass, x.energy, x.momentum, x.grad, x.d, x.me, x.mg, x.linf, x.fr, x.frp, x.dist_q];
            let cells: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
            let _ = writeln!(s, "{}", cells.join(","));
        }
        s
    }

    pub fn extras_csv(&self) -> String {
        let mut s = String::from(EXTRA_HEADER);
        s.push('\n');
        for x in &self.samples {
            let row = [x.t, x.potential, x.variance, x.dvariance, x.dist_aligned, x.theta, x.dt];
            let cells: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
            let _ = writeln!(s, "{}", cells.join(","));
        }
        s
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::write(dir.join("series.csv"), self.to_csv())?;
        std::fs::write(dir.join("series_extra.csv"), self.extras_csv())?;
        Ok(())
    }

    /// Largest |M(t)/M(0) − 1|.
    pub fn mass_drift(&self) -> f64 {
        let m0 = self.samples.first().map_or(0.0, |s| s.mass);
        if m0 == 0.0 {
            return 0.0;
        }
        self.samples.iter().map(|s| (s.mass / m0 - 1.0).abs()).fold(0.0, f64::max)
    }

    /// Largest |E(t) − E(0)|/|E(0)|.
    pub fn energy_drift(&self) -> f64 {
        let e0 = self.samples.first().map_or(0.0, |s| s.energy);
        if e0 == 0.0 {
            return 0.0;
        }
        self.samples.iter().map(|s| ((s.energy - e0) / e0).abs()).fold(0.0, f64::max)
    }
}

/// Truncation profile φ: r² on [0, 1], C³ polynomial bridge on [1, 3], 0 beyond.
pub fn cutoff_phi(r: f64) -> f64 {
    if r <= 1.0 {
        r * r
    } else if r >= 3.0 {
        0.0
    } else {
        let s = r - 1.0;
        let c = [1.0, 2.0, 1.0, -16.0, 24.5, -529.0 / 32.0, 343.0 / 64.0, -87.0 / 128.0];
        c.iter().rev().fold(0.0, |acc, k| acc * s + k)
    }
}

/// The integrator with its cached linear factorizations.
pub struct Evolver {
    grid: Grid,
    cfg: EvolverConfig,
    first: usize,
    sq: Vec<f64>,
    shat: CBand,
    sigma: Vec<f64>,
    // Frozen potential minus one on the active nodes (zero for the standard split).
    vshift: Vec<f64>,
    cache: Vec<(f64, BandLu<C>)>,
    r2: Vec<f64>,
    phi_r: Vec<f64>,
    reference: Option<(ReferenceLevels, Vec<f64>)>,
}

impl Evolver {
    pub fn new(grid: &Grid, cfg: &EvolverConfig, reference: Option<&GroundProfile>) -> Result<Self> {
        cfg.validate()?;
        let lap = grid.laplacian();
        let first = lap.first();
        let n = grid.n();
        let sq: Vec<f64> = lap.mass().iter().map(|m| m.sqrt()).collect();
        let shat = lap.hat().to_general().to_complex();
        let nodes = grid.nodes();
        let rmax = grid.rmax();
        let sigma = (first..n)
            .map(|i| match cfg.sponge {
                Sponge::Off => 0.0,
                Sponge::On { strength, width } => {
                    let rs = rmax * (1.0 - width);
                    let r = nodes[i];
                    if r <= rs {
                        0.0
                    } else {
                        strength * ((r - rs) / (rmax - rs)).powi(2)
                    }
                }
            })
            .collect();
        let rr = rmax / 4.0;
        let r2 = (first..n).map(|i| nodes[i] * nodes[i]).collect();
        let phi_r = (first..n).map(|i| rr * rr * cutoff_phi(nodes[i] / rr)).collect();
        let mut ev = Evolver {
            grid: grid.clone(),
            cfg: cfg.clone(),
            first,
            sq,
            shat,
            sigma,
            vshift: vec![0.0; n - first],
            cache: Vec::new(),
            r2,
            phi_r,
            reference: None,
        };
        if let Some(gp) = reference {
            if gp.grid.as_ref() != grid.as_ref() {
                return Err(LabError::GridMismatch("reference profile lives on another grid".into()));
            }
            let q = gp.q_values();
            let qc: Vec<C> = q.iter().map(|&x| C::new(x, 0.0)).collect();
            let y = ev.to_hat(&qc);
            let levels = ReferenceLevels {
                mass: ev.mass_hat(&y),
                grad: ev.grad_sq_hat(&y).sqrt(),
                energy: ev.energy_hat(&y),
                potential: ev.potential_hat(&y),
            };
            if cfg.splitting == Splitting::Frozen {
                ev.vshift = (first..n).map(|i| q[i].abs().powf(cfg.p - 1.0) - 1.0).collect();
            }
            ev.reference = Some((levels, q));
        }
        Ok(ev)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn config(&self) -> &EvolverConfig {
        &self.cfg
    }

    pub fn reference_levels(&self) -> Option<ReferenceLevels> {
        self.reference.as_ref().map(|r| r.0)
    }

    fn to_hat(&self, u: &[C]) -> Vec<C> {
        (self.first..self.grid.n()).zip(&self.sq).map(|(i, s)| u[i] * *s).collect()
    }

    fn from_hat(&self, y: &[C]) -> Vec<C> {
        let mut u = vec![C::new(0.0, 0.0); self.grid.len()];
        for (k, (v, s)) in y.iter().zip(&self.sq).enumerate() {
            u[k + self.first] = v / s;
        }
        self.grid.laplacian().enforce(&mut u);
        u
    }

    fn lu(&mut self, tau: f64) -> Result<usize> {
        if let Some(k) = self.cache.iter().position(|(t, _)| *t == tau) {
            return Ok(k);
        }
        let half = 0.5 * tau;
        let damp = 0.5 * tau.abs();
        let sigma = &self.sigma;
        let vs = &self.vshift;
        let m = self.shat.map_entries(|i, j, s| {
            let mut v = C::new(0.0, half) * s;
            if i == j {
                v += C::new(1.0 + damp * sigma[i], -half * vs[i]);
            }
            v
        });
        let lu = BandLu::factor_complex(&m)?;
        self.cache.push((tau, lu));
        Ok(self.cache.len() - 1)
    }

    fn phase(&self, y: &mut [C], tau: f64) {
        if !self.cfg.nonlinear {
            for (v, w) in y.iter_mut().zip(&self.vshift) {
                *v *= C::from_polar(1.0, -tau * w);
            }
            return;
        }
        let pm1 = self.cfg.p - 1.0;
        for ((v, s), w) in y.iter_mut().zip(&self.sq).zip(&self.vshift) {
            let a = (v.norm() / s).powf(pm1) - w;
            *v *= C::from_polar(1.0, tau * a);
        }
    }

    fn linear(&mut self, y: &[C], tau: f64) -> Result<Vec<C>> {
        let k = self.lu(tau)?;
        let half = 0.5 * tau;
        let damp = 0.5 * tau.abs();
        let sy = self.shat.matvec(y);
        let rhs: Vec<C> = y
            .iter()
            .zip(&sy)
            .zip(self.sigma.iter().zip(&self.vshift))
            .map(|((v, s), (sg, w))| v * (1.0 - damp * sg) - C::new(0.0, half) * (s - v * w))
            .collect();
        let out = self.cache[k].1.solve(&rhs);
        if out.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(LabError::Instability("non-finite state after linear solve".into()));
        }
        Ok(out)
    }

    /// One Strang step of signed size tau in hat coordinates.
    fn step_hat(&mut self, y: &mut Vec<C>, tau: f64) -> Result<()> {
        self.phase(y, 0.5 * tau);
        *y = self.linear(y, tau)?;
        self.phase(y, 0.5 * tau);
        Ok(())
    }

    pub fn step(&mut self, u: &Field, tau: f64) -> Result<Field> {
        if u.grid().as_ref() != self.grid.as_ref() {
            return Err(LabError::GridMismatch("field and evolver grids differ".into()));
        }
        let mut y = self.to_hat(u.values());
        self.step_hat(&mut y, tau)?;
        Field::new(&self.grid, self.from_hat(&y), true, true)
    }

    fn mass_hat(&self, y: &[C]) -> f64 {
        y.iter().map(|z| z.norm_sqr()).sum()
    }

    fn grad_sq_hat(&self, y: &[C]) -> f64 {
        let sy = self.shat.matvec(y);
        y.iter().zip(&sy).map(|(a, b)| (a.conj() * b).re).sum()
    }

    fn potential_hat(&self, y: &[C]) -> f64 {
        let p1 = self.cfg.p + 1.0;
        y.iter().zip(&self.sq).map(|(v, s)| s * s * (v.norm() / s).powf(p1)).sum()
    }

    fn energy_hat(&self, y: &[C]) -> f64 {
        0.5 * self.grad_sq_hat(y) - self.potential_hat(y) / (self.cfg.p + 1.0)
    }

    fn sc(&self) -> f64 {
        crate::ground::critical_index(self.grid.dim(), self.cfg.p)
    }

    fn sample_hat(&self, y: &[C], t: f64) -> Sample {
        let mass = self.mass_hat(y);
        let sy = self.shat.matvec(y);
        let gsq: f64 = y.iter().zip(&sy).map(|(a, b)| (a.conj() * b).re).sum();
        let potential = self.potential_hat(y);
        let energy = 0.5 * gsq - potential / (self.cfg.p + 1.0);
        let grad = gsq.max(0.0).sqrt();
        // Weighted commutator forms: d/dt Σ m w|u|² = 2 Im Σ w ū (K u) exactly for the semi-discrete flow.
        let comm = |w: &[f64]| -> f64 {
            2.0 * y.iter().zip(&sy).zip(w).map(|((a, b), c)| c * (a.conj() * b).im).sum::<f64>()
        };
        let weighted = |w: &[f64]| -> f64 { y.iter().zip(w).map(|(a, c)| c * a.norm_sqr()).sum() };
        let linf = y.iter().zip(&self.sq).map(|(v, s)| v.norm() / s).fold(0.0, f64::max);
        let mut s = Sample {
            t,
            mass,
            energy,
            // Radial data: every component of ∫ Im(ū∇u) vanishes by symmetry.
            momentum: 0.0,
            grad,
            linf,
            fr: weighted(&self.phi_r),
            frp: comm(&self.phi_r),
            potential,
            variance: weighted(&self.r2),
            dvariance: comm(&self.r2),
            ..Default::default()
        };
        if let Some((lv, q)) = &self.reference {
            let sc = self.sc();
            let ex = (1.0 - sc) / sc;
            s.d = (grad - lv.grad).abs();
            s.me = if lv.energy != 0.0 { (mass / lv.mass).powf(ex) * energy / lv.energy } else { f64::NAN };
            s.mg = (mass / lv.mass).powf(0.5 * ex) * grad / lv.grad;
            let rot = C::from_polar(1.0, t);
            let qh: Vec<C> = (self.first..self.grid.n()).zip(&self.sq).map(|(i, sq)| rot * (q[i] * sq)).collect();
            s.dist_q = self.h1_dist(y, &qh, C::new(1.0, 0.0));
            let proj: C = qh.iter().zip(y).map(|(a, b)| a.conj() * b).sum();
            let theta = if proj.norm() > 0.0 { proj.arg() } else { 0.0 };
            s.theta = theta;
            s.dist_aligned = self.h1_dist(y, &qh, C::from_polar(1.0, theta));
        }
        s
    }

    fn h1_dist(&self, y: &[C], qh: &[C], rot: C) -> f64 {
        let w: Vec<C> = y.iter().zip(qh).map(|(a, b)| a - rot * b).collect();
        (self.mass_hat(&w) + self.grad_sq_hat(&w)).max(0.0).sqrt()
    }

    pub fn diagnostics(&self, u: &Field, t: f64) -> Sample {
        self.sample_hat(&self.to_hat(u.values()), t)
    }

    /// Integrates from t0 to cfg.t_end (either direction).
    pub fn evolve(&mut self, u0: &Field, t0: f64) -> Result<(TimeSeries, Vec<(f64, Field)>)> {
        if u0.grid().as_ref() != self.grid.as_ref() {
            return Err(LabError::GridMismatch("field and evolver grids differ".into()));
        }
        let t_end = self.cfg.t_end;
        let dir = if t_end >= t0 { 1.0 } else { -1.0 };
        let mut y = self.to_hat(u0.values());
        let mut t = t0;
        let mut dt = self.cfg.dt;
        let mut series = TimeSeries {
            reference: self.reference_levels(),
            min_dt: self.cfg.min_dt,
            ..Default::default()
        };
        let mut snaps = Vec::new();
        let first = self.sample_hat(&y, t);
        let m0 = first.mass;
        let mut s0 = first;
        s0.dt = dt;
        series.samples.push(s0);
        if self.cfg.snapshot_every > 0 {
            snaps.push((t, Field::new(&self.grid, self.from_hat(&y), true, true)?));
        }
        let qgrad = self.reference_levels().map(|r| r.grad);
        let mut count = 0usize;
        while (t_end - t) * dir > 1e-12 {
            // Sampling refines together with the step so blow-up onset is resolved.
            let interval = (self.cfg.sample_every * dt / self.cfg.dt).min((t_end - t).abs());
            let nsteps = ((interval / dt) - 1e-9).ceil().max(1.0) as usize;
            let tau = dir * interval / nsteps as f64;
            for _ in 0..nsteps {
                self.step_hat(&mut y, tau)?;
            }
            series.steps += nsteps;
            t = if (t_end - (t + dir * interval)) * dir < 1e-12 { t_end } else { t + dir * interval };
            let mut s = self.sample_hat(&y, t);
            s.dt = tau.abs();
            let prev = *series.samples.last().expect("seeded");
            series.samples.push(s);
            count += 1;
            if self.cfg.snapshot_every > 0 && count % self.cfg.snapshot_every == 0 {
                snaps.push((t, Field::new(&self.grid, self.from_hat(&y), true, true)?));
            }
            if self.cfg.sponge == Sponge::Off && m0 > 0.0 && (s.mass / m0 - 1.0).abs() > self.cfg.mass_tol {
                return Err(LabError::Instability(format!(
                    "mass drift {:.3e} exceeds {:.1e} at t = {t}",
                    (s.mass / m0 - 1.0).abs(),
                    self.cfg.mass_tol
                )));
            }
            if s.grad > self.cfg.adapt_trigger * prev.grad && dt > self.cfg.min_dt {
                dt = (0.5 * dt).max(self.cfg.min_dt);
            }
            if let Some(g) = qgrad {
                if s.grad >= self.cfg.blowup_factor * g && dt > self.cfg.min_dt {
                    dt = (0.5 * dt).max(self.cfg.min_dt);
                }
                let n = series.samples.len();
                let convex = n >= 3 && log_convex(&series.samples[n - 3..]);
                let at_min = dt <= self.cfg.min_dt;
                if (s.grad >= self.cfg.blowup_factor * g && convex && at_min) || s.grad >= self.cfg.hard_stop_factor * g {
                    series.stopped_early = true;
                    break;
                }
            }
        }
        if self.cfg.snapshot_every > 0 && snaps.last().map(|(ts, _)| *ts) != Some(t) {
            snaps.push((t, Field::new(&self.grid, self.from_hat(&y), true, true)?));
        }
        series.final_dt = dt;
        Ok((series, snaps))
    }

    /// The current state as a field after integrating (helper for callers that need the end state).
    pub fn evolve_to(&mut self, u0: &Field, t0: f64) -> Result<(TimeSeries, Field)> {
        let saved = self.cfg.snapshot_every;
        self.cfg.snapshot_every = usize::MAX;
        let res = self.evolve(u0, t0);
        self.cfg.snapshot_every = saved;
        let (series, mut snaps) = res?;
        let last = snaps.pop().map(|(_, f)| f).expect("final snapshot");
        Ok((series, last))
    }
}

fn log_convex(s: &[Sample]) -> bool {
    let l: Vec<f64> = s.iter().map(|x| x.grad.ln()).collect();
    let (h1, h2) = ((s[1].t - s[0].t).abs(), (s[2].t - s[1].t).abs());
    if h1 == 0.0 || h2 == 0.0 {
        return false;
    }
    (l[2] - l[1]) / h2 - (l[1] - l[0]) / h1 > 0.0
}

/// Single step with a fresh evolver (factorization not reused).
pub fn step(u: &Field, dt: f64, cfg: &EvolverConfig) -> Result<Field> {
    if dt.abs() > cfg.dt * (1.0 + 1e-12) {
        return Err(LabError::InvalidParameter(format!("step {dt} exceeds configured dt {}", cfg.dt)));
    }
    Evolver::new(u.grid(), cfg, None)?.step(u, dt)
}

pub fn evolve(
    u0: &Field,
    t0: f64,
    cfg: &EvolverConfig,
    reference: Option<&GroundProfile>,
) -> Result<(TimeSeries, Vec<(f64, Field)>)> {
    Evolver::new(u0.grid(), cfg, reference)?.evolve(u0, t0)
}

pub fn diagnostics(u: &Field, t: f64, p: f64, reference: Option<&GroundProfile>) -> Result<Sample> {
    let cfg = EvolverConfig::new(p, 1e-3, t);
    Ok(Evolver::new(u.grid(), &cfg, reference)?.diagnostics(u, t))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    BlowUp { t_star: f64 },
    Scatter,
    ConvergeToQ { rate: f64 },
    Undecided,
}

impl Verdict {
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::BlowUp { .. } => "blowup",
            Verdict::Scatter => "scatter",
            Verdict::ConvergeToQ { .. } => "converge",
            Verdict::Undecided => "undecided",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub verdict: Verdict,
    pub evidence: Report,
}

/// Aligned distance below this (relative to ∥Q∥_{H¹}) counts as sitting on the standing wave.
pub const STANDING_TOL: f64 = 1e-3;

pub fn classify_run(series: &TimeSeries, cfg: &EvolverConfig) -> Classification {
    let mut ev = Report::new();
    let s = &series.samples;
    let Some(last) = s.last() else {
        ev.text("reason", "empty series");
        return Classification { verdict: Verdict::Undecided, evidence: ev };
    };
    ev.num("t_last", last.t).num("grad_last", last.grad).num("dt_final", series.final_dt);
    let Some(refl) = series.reference else {
        ev.text("reason", "no reference profile");
        return Classification { verdict: Verdict::Undecided, evidence: ev };
    };
    let ratio = last.grad / refl.grad;
    ev.num("grad_ratio", ratio);
    let n = s.len();
    let convex = n >= 3 && log_convex(&s[n - 3..]);
    ev.flag("log_grad_convex", convex);
    let at_min = series.final_dt <= cfg.min_dt * (1.0 + 1e-12);
    ev.flag("dt_at_minimum", at_min);
    if (ratio >= cfg.blowup_factor && convex && at_min) || ratio >= cfg.hard_stop_factor {
        ev.text("reason", "gradient growth");
        return Classification { verdict: Verdict::BlowUp { t_star: last.t }, evidence: ev };
    }
    let pot_ratio = last.potential / refl.potential;
    ev.num("potential_ratio", pot_ratio);
    let q = n - n / 4;
    let tail = &s[q.saturating_sub(1).max(0)..];
    let monotone = envelope_decreasing(tail);
    ev.flag("linf_monotone", monotone);
    if pot_ratio < 0.1 && monotone {
        ev.text("reason", "potential energy collapse");
        return Classification { verdict: Verdict::Scatter, evidence: ev };
    }
    let qh1 = (refl.mass + refl.grad * refl.grad).sqrt();
    let max_dist = s.iter().map(|x| x.dist_aligned).fold(0.0, f64::max);
    ev.num("max_aligned_distance", max_dist);
    let pts: Vec<(f64, f64)> = s
        .iter()
        .filter(|x| x.dist_aligned > 0.0)
        .map(|x| (x.t, x.dist_aligned.ln()))
        .collect();
    let rate = if pts.len() >= 3 { crate::fit::slope(&pts) } else { 0.0 };
    // Backward runs approach Q as t decreases, which shows as a positive slope in t.
    let rate = rate * if last.t < s[0].t { -1.0 } else { 1.0 };
    ev.num("distance_rate", rate);
    if max_dist <= STANDING_TOL * qh1 {
        ev.text("reason", "aligned distance below standing tolerance");
        return Classification { verdict: Verdict::ConvergeToQ { rate }, evidence: ev };
    }
    if rate < 0.0 && last.dist_aligned < s[0].dist_aligned {
        ev.text("reason", "exponential approach to the standing wave");
        return Classification { verdict: Verdict::ConvergeToQ { rate }, evidence: ev };
    }
    ev.text("reason", "no criterion met");
    Classification { verdict: Verdict::Undecided, evidence: ev }
}

/// Blocks used to read the L∞ envelope over the tail of a run.
const ENVELOPE_BLOCKS: usize = 4;

/// Block maxima of L∞ never increase. Sample-to-sample wiggles of a dispersing
/// profile are ignored; a strictly monotone series always qualifies.
fn envelope_decreasing(tail: &[Sample]) -> bool {
    if tail.len() < 2 {
        return false;
    }
    if tail.len() < 2 * ENVELOPE_BLOCKS {
        return tail.windows(2).all(|w| w[1].linf <= w[0].linf);
    }
    let k = tail.len() / ENVELOPE_BLOCKS;
    let maxima: Vec<f64> = (0..ENVELOPE_BLOCKS)
        .map(|b| {
            let end = if b + 1 == ENVELOPE_BLOCKS { tail.len() } else { (b + 1) * k };
            tail[b * k..end].iter().map(|x| x.linf).fold(0.0, f64::max)
        })
        .collect();
    maxima.windows(2).all(|w| w[1] <= w[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    #[test]
    fn envelope_ignores_wiggles_but_not_growth() {
        let series = |f: &dyn Fn(f64) -> f64| -> Vec<Sample> {
            (0..40).map(|i| Sample { linf: f(i as f64), ..Default::default() }).collect()
        };
        let wiggle = series(&|i| 1.0 - 0.01 * i + 0.05 * (2.1 * i).sin().abs());
        assert!(!wiggle.windows(2).all(|w| w[1].linf <= w[0].linf));
        assert!(envelope_decreasing(&wiggle));
        assert!(!envelope_decreasing(&series(&|i| 1.0 + 0.01 * i)));
        assert!(envelope_decreasing(&series(&|i| 1.0 - 0.01 * i)));
    }

    #[test]
    fn cutoff_is_smooth() {
        for &x in &[1.0, 3.0] {
            let e = 1e-6;
            let l = cutoff_phi(x - e);
            let r = cutoff_phi(x + e);
            assert!((l - r).abs() < 1e-5, "jump at {x}");
            let dl = (cutoff_phi(x - e) - cutoff_phi(x - 2.0 * e)) / e;
            let dr = (cutoff_phi(x + 2.0 * e) - cutoff_phi(x + e)) / e;
            assert!((dl - dr).abs() < 1e-4, "kink at {x}");
        }
        assert!((0..=300).all(|k| cutoff_phi(k as f64 * 0.01) >= 0.0));
    }

    #[test]
    fn config_validation() {
        let mut c = EvolverConfig::new(3.0, 1e-3, 1.0);
        assert!(c.validate().is_ok());
        c.min_dt = 2e-3;
        assert!(c.validate().is_err());
        let mut c = EvolverConfig::new(3.0, 1e-3, 1.0);
        c.dt = -1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn linear_step_is_unitary() {
        let g = make_grid(3, 20.0, 400).unwrap();
        let u = Field::from_fn(&g, |r| C::new((-r * r / 4.0).exp(), 0.3 * (-r * r / 2.0).exp()));
        let mut cfg = EvolverConfig::new(3.0, 1e-2, 1.0);
        cfg.nonlinear = false;
        let mut ev = Evolver::new(&g, &cfg, None).unwrap();
        let m0 = ev.diagnostics(&u, 0.0).mass;
        let u1 = ev.step(&u, 1e-2).unwrap();
        let m1 = ev.diagnostics(&u1, 0.0).mass;
        assert!((m1 / m0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_stays_zero() {
        let g = make_grid(1, 10.0, 200).unwrap();
        let u = Field::zeros(&g);
        let cfg = EvolverConfig::new(5.0, 1e-2, 0.1);
        let (s, _) = evolve(&u, 0.0, &cfg, None).unwrap();
        assert!(s.samples.iter().all(|x| x.mass == 0.0 && x.grad == 0.0 && x.linf == 0.0));
    }
}
