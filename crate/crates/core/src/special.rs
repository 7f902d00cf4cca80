//! Threshold experiments: special solutions built from the approximate
//! expansion, and sweeps over data pinned to the mass–energy threshold.

use num_complex::Complex64;

use crate::approx::ApproxSolution;
use crate::error::{LabError, Result};
use crate::evolution::{classify_run, Classification, Evolver, EvolverConfig, Sample, Sponge, TimeSeries, Verdict};
use crate::fit;
use crate::grid::Field;
use crate::ground::GroundProfile;
use crate::io::Report;
use crate::modulation::{track, TrackEntry};

type C = Complex64;

#[derive(Debug, Clone, PartialEq)]
pub struct SpecialRunSpec {
    pub a: f64,
    pub k: usize,
    /// Target size e^{−e0·t0}.
    pub delta: f64,
    pub evolution: EvolverConfig,
    /// Backward horizon; `None` means t0 + 5.
    pub t_back: Option<f64>,
}

impl SpecialRunSpec {
    pub fn new(a: f64, k: usize, delta: f64, evolution: EvolverConfig) -> Self {
        SpecialRunSpec { a, k, delta, evolution, t_back: None }
    }

    pub fn t0(&self, e0: f64) -> f64 {
        -self.delta.ln() / e0
    }

    pub fn back_horizon(&self, e0: f64) -> f64 {
        self.t_back.unwrap_or(self.t0(e0) + 5.0)
    }
}

#[derive(Debug, Clone)]
pub struct Synthesis {
    pub u: Field,
    pub t0: f64,
    /// e^{−(k+1)e0·t0}.
    pub budget: f64,
}

pub fn synthesize_ua(spec: &SpecialRunSpec, approx: &ApproxSolution, gp: &GroundProfile) -> Result<Synthesis> {
    if !(spec.delta > 0.0 && spec.delta <= 0.2) {
        return Err(LabError::InvalidParameter(format!("δ must lie in (0, 0.2], got {}", spec.delta)));
    }
    if spec.a != approx.a || spec.k != approx.k {
        return Err(LabError::InvalidParameter(format!(
            "approximate solution built for (A, k) = ({}, {}), run asks for ({}, {})",
            approx.a, approx.k, spec.a, spec.k
        )));
    }
    let t0 = spec.t0(approx.e0);
    if t0 < approx.t_min {
        return Err(LabError::Validity(format!("t0 = {t0} precedes the validity time {}", approx.t_min)));
    }
    let v = approx.eval(t0);
    let rot = C::from_polar(1.0, t0);
    let mut vals: Vec<C> = gp.q_values().iter().zip(&v).map(|(q, z)| rot * (C::new(*q, 0.0) + z)).collect();
    gp.grid.laplacian().enforce(&mut vals);
    let u = Field::new(&gp.grid, vals, true, true)?;
    Ok(Synthesis { u, t0, budget: (-((spec.k + 1) as f64) * approx.e0 * t0).exp() })
}

/// Least-squares slope of log(values) against time, skipping non-positive entries.
pub fn log_rate(times: &[f64], values: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(_, v)| **v > 0.0 && v.is_finite())
        .map(|(t, v)| (*t, v.ln()))
        .collect();
    if pts.len() < 3 {
        return f64::NAN;
    }
    fit::slope(&pts)
}

#[derive(Debug, Clone)]
pub struct ThresholdReport {
    pub a: f64,
    pub k: usize,
    pub t0: f64,
    pub initial: Sample,
    pub synthesis_budget: f64,
    pub grad_sign: f64,
    pub forward_rate: f64,
    pub forward_d_rate: f64,
    pub forward_h_rate: f64,
    pub forward: TimeSeries,
    pub backward: TimeSeries,
    pub backward_verdict: Classification,
    pub e0: f64,
}

impl ThresholdReport {
    pub fn to_report(&self) -> Report {
        let mut r = Report::new();
        r.num("a", self.a)
            .int("k", self.k)
            .num("e0", self.e0)
            .num("t0", self.t0)
            .num("synthesis_budget", self.synthesis_budget)
            .num("initial.mass", self.initial.mass)
            .num("initial.energy", self.initial.energy)
            .num("initial.me", self.initial.me)
            .num("initial.mg", self.initial.mg)
            .num("initial.d", self.initial.d)
            .num("grad_sign", self.grad_sign)
            .num("forward.rate", self.forward_rate)
            .num("forward.rate_over_e0", -self.forward_rate / self.e0)
            .num("forward.d_rate", self.forward_d_rate)
            .num("forward.h_rate", self.forward_h_rate)
            .text("backward.verdict", self.backward_verdict.verdict.label());
        if let Verdict::BlowUp { t_star } = self.backward_verdict.verdict {
            r.num("backward.t_star", t_star);
        }
        r.extend("backward.evidence.", &self.backward_verdict.evidence);
        r
    }
}

/// Forward convergence leg plus backward classification leg.
pub fn run_special(spec: &SpecialRunSpec, approx: &ApproxSolution, gp: &GroundProfile) -> Result<ThresholdReport> {
    let syn = synthesize_ua(spec, approx, gp)?;
    let e0 = approx.e0;
    let t0 = syn.t0;
    let span = 3.0 / e0;

    let mut fwd = spec.evolution.clone();
    fwd.t_end = t0 + span;
    fwd.sample_every = fwd.sample_every.min(span / 60.0);
    fwd.snapshot_every = 5;
    let mut ev = Evolver::new(&gp.grid, &fwd, Some(gp))?;
    let initial = ev.diagnostics(&syn.u, t0);
    let levels = ev.reference_levels().expect("reference attached");
    let (forward, snaps) = ev.evolve(&syn.u, t0)?;
    let times = forward.times();
    let dist: Vec<f64> = forward.samples.iter().map(|s| s.dist_aligned).collect();
    let dvals: Vec<f64> = forward.samples.iter().map(|s| s.d).collect();
    let frames = track(&snaps, gp);
    let (ht, hv): (Vec<f64>, Vec<f64>) = frames
        .iter()
        .filter_map(TrackEntry::frame)
        .map(|f| (f.frame.t, f.frame.h_norm()))
        .unzip();

    let mut bwd = spec.evolution.clone();
    bwd.t_end = t0 - spec.back_horizon(e0);
    if bwd.sponge == Sponge::Off {
        bwd.sponge = Sponge::default_on();
    }
    let mut evb = Evolver::new(&gp.grid, &bwd, Some(gp))?;
    let (backward, _) = evb.evolve(&syn.u, t0)?;
    let backward_verdict = classify_run(&backward, &bwd);

    Ok(ThresholdReport {
        a: spec.a,
        k: spec.k,
        t0,
        synthesis_budget: syn.budget,
        grad_sign: (initial.grad - levels.grad).signum(),
        initial,
        forward_rate: log_rate(&times, &dist),
        forward_d_rate: log_rate(&times, &dvals),
        forward_h_rate: log_rate(&ht, &hv),
        forward,
        backward,
        backward_verdict,
        e0,
    })
}

#[derive(Debug, Clone)]
pub struct SweepDatum {
    pub label: String,
    pub u0: Field,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub label: String,
    pub me: f64,
    pub mg: f64,
    pub forward: Classification,
    pub backward: Classification,
}

impl SweepResult {
    /// MG < 1 predicts no blow-up; MG > 1 predicts blow-up or convergence to Q.
    pub fn consistent_with_mg(&self) -> bool {
        let blow = |c: &Classification| matches!(c.verdict, Verdict::BlowUp { .. });
        let ok_above = |c: &Classification| matches!(c.verdict, Verdict::BlowUp { .. } | Verdict::ConvergeToQ { .. });
        if self.mg < 1.0 - 1e-9 {
            !blow(&self.forward) && !blow(&self.backward)
        } else if self.mg > 1.0 + 1e-9 {
            ok_above(&self.forward) && ok_above(&self.backward)
        } else {
            true
        }
    }
}

/// Rescaled, chirped ground state `a·Q(b r)·e^{iγr²}` with M = M(Q), E = E(Q) and the requested MG,
/// matched in the discrete forms the integrator conserves.
pub fn threshold_datum(gp: &GroundProfile, mg: f64) -> Result<Field> {
    if !(mg > 0.0) {
        return Err(LabError::InvalidParameter(format!("MG target must be positive, got {mg}")));
    }
    let grid = gp.grid.clone();
    let ev = Evolver::new(&grid, &EvolverConfig::new(gp.p, 1e-3, 0.0), Some(gp))?;
    let lv = ev.reference_levels().expect("reference attached");
    let target = mg * lv.grad;
    let build = |b: f64, gamma: f64| -> Result<Field> {
        let raw = Field::from_real_fn(&grid, |r| gp.eval(b * r));
        let m = ev.diagnostics(&raw, 0.0).mass;
        let a = (lv.mass / m).sqrt();
        let mut v: Vec<C> = grid
            .nodes()
            .iter()
            .zip(raw.values())
            .map(|(r, z)| z * a * C::from_polar(1.0, gamma * r * r))
            .collect();
        grid.laplacian().enforce(&mut v);
        Field::new(&grid, v, true, true)
    };
    let chirp = |b: f64| -> Result<Option<Field>> {
        let f0 = build(b, 0.0)?;
        let g0 = ev.diagnostics(&f0, 0.0).grad;
        if g0 > target {
            return Ok(None);
        }
        let var = ev.diagnostics(&f0, 0.0).variance.max(1e-300);
        let mut hi = ((target * target - g0 * g0) / (4.0 * var)).sqrt() * 2.0 + 1e-8;
        while ev.diagnostics(&build(b, hi)?, 0.0).grad < target {
            hi *= 2.0;
            if hi > 1e6 {
                return Err(LabError::NoBracket("chirp cannot reach the gradient target".into()));
            }
        }
        let mut lo = 0.0;
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if ev.diagnostics(&build(b, mid)?, 0.0).grad < target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        Ok(Some(build(b, 0.5 * (lo + hi))?))
    };
    if mg == 1.0 {
        // ME = MG = 1 forces the ground-state orbit; the energy gap has a double root here.
        return build(1.0, 0.0);
    }
    // E(b) decreases in b along the pinned-gradient family; b = mg is the γ = 0 end.
    let (mut lo, mut hi) = (0.5 * mg.min(1.0), mg);
    let energy_gap = |f: &Field| ev.diagnostics(f, 0.0).energy - lv.energy;
    let f_lo = chirp(lo)?.ok_or_else(|| LabError::NoBracket("lower scale infeasible".into()))?;
    if energy_gap(&f_lo) < 0.0 {
        return Err(LabError::NoBracket("energy bracket not found at the lower scale".into()));
    }
    let mut best = f_lo;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        match chirp(mid)? {
            Some(f) => {
                let gap = energy_gap(&f);
                best = f;
                if gap > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            None => hi = mid,
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    Ok(best)
}

/// Q itself plus threshold data on both sides of MG = 1.
pub fn default_family(gp: &GroundProfile) -> Result<Vec<SweepDatum>> {
    Ok(vec![
        SweepDatum { label: "q".into(), u0: gp.q.clone() },
        SweepDatum { label: "mg_1.05".into(), u0: threshold_datum(gp, 1.05)? },
        SweepDatum { label: "mg_0.95".into(), u0: threshold_datum(gp, 0.95)? },
    ])
}

fn run_member(d: &SweepDatum, cfg: &EvolverConfig, gp: &GroundProfile) -> Result<SweepResult> {
    let horizon = cfg.t_end.abs();
    let mut f = cfg.clone();
    f.t_end = horizon;
    let mut b = cfg.clone();
    b.t_end = -horizon;
    let mut evf = Evolver::new(&gp.grid, &f, Some(gp))?;
    let s0 = evf.diagnostics(&d.u0, 0.0);
    let (sf, _) = evf.evolve(&d.u0, 0.0)?;
    let (sb, _) = Evolver::new(&gp.grid, &b, Some(gp))?.evolve(&d.u0, 0.0)?;
    Ok(SweepResult {
        label: d.label.clone(),
        me: s0.me,
        mg: s0.mg,
        forward: classify_run(&sf, &f),
        backward: classify_run(&sb, &b),
    })
}

/// Runs every datum forward and backward over `|cfg.t_end|`; members run concurrently.
pub fn threshold_sweep(family: &[SweepDatum], cfg: &EvolverConfig, gp: &GroundProfile) -> Result<Vec<SweepResult>> {
    threshold_sweep_with(family, cfg, gp, true)
}

/// As [`threshold_sweep`]; `parallel = false` runs members one after another. Results are identical.
pub fn threshold_sweep_with(
    family: &[SweepDatum],
    cfg: &EvolverConfig,
    gp: &GroundProfile,
    parallel: bool,
) -> Result<Vec<SweepResult>> {
    let results: Vec<Result<SweepResult>> = if parallel {
        std::thread::scope(|s| {
            let handles: Vec<_> = family.iter().map(|d| s.spawn(move || run_member(d, cfg, gp))).collect();
            handles.into_iter().map(|h| h.join().expect("sweep member panicked")).collect()
        })
    } else {
        family.iter().map(|d| run_member(d, cfg, gp)).collect()
    };
    let mut out = results.into_iter().collect::<Result<Vec<_>>>()?;
    out.sort_by(|a, b| a.label.cmp(&b.label));
    Ok(out)
}
