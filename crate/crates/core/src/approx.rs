//! Approximate special solutions V_k = Σ_{j=1}^k λ^j Z_j, λ = e^{−e0 t}.

use num_complex::Complex64;

use crate::error::{LabError, Result};
use crate::grid::{Field, Grid};
use crate::ground::GroundProfile;
use crate::linearized::{resolvent_solve, LinearizedOps, SpectrumData, Which};

type C = Complex64;

/// Truncated polynomial Σ_{j=0}^K λ^j C_j with nodal coefficient vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaPoly {
    coeffs: Vec<Option<Vec<C>>>,
    len: usize,
}

impl LambdaPoly {
    pub fn zero(order: usize, len: usize) -> Self {
        LambdaPoly { coeffs: vec![None; order + 1], len }
    }

    pub fn one(order: usize, len: usize) -> Self {
        let mut p = Self::zero(order, len);
        p.coeffs[0] = Some(vec![C::new(1.0, 0.0); len]);
        p
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn nodes(&self) -> usize {
        self.len
    }

    pub fn set(&mut self, j: usize, c: Vec<C>) {
        assert_eq!(c.len(), self.len);
        if j <= self.order() {
            self.coeffs[j] = Some(c);
        }
    }

    /// Coefficient j (zeros if absent or beyond the truncation).
    pub fn coeff(&self, j: usize) -> Vec<C> {
        self.coeffs.get(j).and_then(|c| c.clone()).unwrap_or_else(|| vec![C::new(0.0, 0.0); self.len])
    }

    pub fn is_zero_coeff(&self, j: usize) -> bool {
        match self.coeffs.get(j) {
            Some(Some(c)) => c.iter().all(|z| *z == C::new(0.0, 0.0)),
            _ => true,
        }
    }

    pub fn conj(&self) -> Self {
        LambdaPoly {
            coeffs: self.coeffs.iter().map(|c| c.as_ref().map(|v| v.iter().map(|z| z.conj()).collect())).collect(),
            len: self.len,
        }
    }

    pub fn scale(&self, s: C) -> Self {
        LambdaPoly {
            coeffs: self.coeffs.iter().map(|c| c.as_ref().map(|v| v.iter().map(|z| z * s).collect())).collect(),
            len: self.len,
        }
    }

    /// Pointwise multiplication of every coefficient by a nodal weight.
    pub fn mul_nodal(&self, w: &[f64]) -> Self {
        LambdaPoly {
            coeffs: self
                .coeffs
                .iter()
                .map(|c| c.as_ref().map(|v| v.iter().zip(w).map(|(z, x)| z * x).collect()))
                .collect(),
            len: self.len,
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| match (a, b) {
                (None, None) => None,
                (Some(x), None) | (None, Some(x)) => Some(x.clone()),
                (Some(x), Some(y)) => Some(x.iter().zip(y).map(|(u, v)| u + v).collect()),
            })
            .collect();
        Ok(LambdaPoly { coeffs, len: self.len })
    }

    fn check(&self, other: &Self) -> Result<()> {
        if self.len != other.len || self.order() != other.order() {
            return Err(LabError::GridMismatch(format!(
                "polynomials differ: ({}, K={}) vs ({}, K={})",
                self.len,
                self.order(),
                other.len,
                other.order()
            )));
        }
        Ok(())
    }

    /// Σ_j λ^j C_j at a given λ.
    pub fn eval(&self, lambda: f64) -> Vec<C> {
        let mut out = vec![C::new(0.0, 0.0); self.len];
        let mut lp = 1.0;
        for c in &self.coeffs {
            if let Some(v) = c {
                for (o, z) in out.iter_mut().zip(v) {
                    *o += z * lp;
                }
            }
            lp *= lambda;
        }
        out
    }
}

/// Cauchy product truncated at K.
pub fn lp_mul(a: &LambdaPoly, b: &LambdaPoly) -> Result<LambdaPoly> {
    a.check(b)?;
    let k = a.order();
    let mut out = LambdaPoly::zero(k, a.len);
    for m in 0..=k {
        let mut acc: Option<Vec<C>> = None;
        for i in 0..=m {
            let (Some(x), Some(y)) = (&a.coeffs[i], &b.coeffs[m - i]) else { continue };
            let v = acc.get_or_insert_with(|| vec![C::new(0.0, 0.0); a.len]);
            for ((o, u), w) in v.iter_mut().zip(x).zip(y) {
                *o += u * w;
            }
        }
        out.coeffs[m] = acc;
    }
    Ok(out)
}

/// Generalized binomial coefficient binom(s, m).
pub fn binom(s: f64, m: usize) -> f64 {
    (0..m).fold(1.0, |acc, j| acc * (s - j as f64) / (j + 1) as f64)
}

/// (1 + w)^s = Σ_m binom(s, m) w^m for w without constant term.
pub fn lp_pow_frac(s: f64, w: &LambdaPoly) -> Result<LambdaPoly> {
    if !w.is_zero_coeff(0) {
        return Err(LabError::InvalidParameter("power series needs a zero constant term".into()));
    }
    let k = w.order();
    let mut out = LambdaPoly::one(k, w.len);
    let mut pow = LambdaPoly::one(k, w.len);
    for m in 1..=k {
        pow = lp_mul(&pow, w)?;
        let b = binom(s, m);
        if b != 0.0 {
            out = out.add(&pow.scale(C::new(b, 0.0)))?;
        }
    }
    Ok(out)
}

/// Floor below which Q is treated as zero when dividing.
pub const Q_FLOOR: f64 = 1e-10;

/// Nonlinear remainder R(V) as a λ-polynomial.
///
/// With `lambda_max`, fails when Σ_j λ_max^j sup|Z_j/Q| reaches ½ (series not trusted).
pub fn expand_r(v: &LambdaPoly, gp: &GroundProfile, lambda_max: Option<f64>) -> Result<LambdaPoly> {
    let q = gp.q_values();
    let p = gp.p;
    let inv: Vec<f64> = q.iter().map(|&x| if x > Q_FLOOR { 1.0 / x } else { 0.0 }).collect();
    let z = v.mul_nodal(&inv);
    if let Some(lm) = lambda_max {
        let bound: f64 = (1..=z.order())
            .map(|j| lm.powi(j as i32) * z.coeff(j).iter().map(|c| c.norm()).fold(0.0, f64::max))
            .sum();
        if !(bound < 0.5) {
            return Err(LabError::Validity(format!("|V/Q| bound {bound:.3e} not below 1/2 at λ = {lm}")));
        }
    }
    let a = lp_pow_frac((p + 1.0) / 2.0, &z)?;
    let b = lp_pow_frac((p - 1.0) / 2.0, &z.conj())?;
    let mut j = lp_mul(&a, &b)?;
    // Subtract 1 + (p+1)/2 z + (p−1)/2 z̄ coefficient-wise.
    let lin = z.scale(C::new((p + 1.0) / 2.0, 0.0)).add(&z.conj().scale(C::new((p - 1.0) / 2.0, 0.0)))?;
    j = j.add(&lin.scale(C::new(-1.0, 0.0)))?;
    j.coeffs[0] = None;
    let qp: Vec<f64> = q.iter().map(|x| x.abs().powf(p)).collect();
    Ok(j.mul_nodal(&qp))
}

/// Pointwise R(f) = |Q+f|^{p−1}(Q+f) − Qᵖ − pQ^{p−1}f₁ − iQ^{p−1}f₂.
pub fn direct_r(gp: &GroundProfile, f: &[C]) -> Vec<C> {
    let p = gp.p;
    gp.q_values()
        .iter()
        .zip(f)
        .map(|(&q, &z)| {
            let w = C::new(q, 0.0) + z;
            let qp1 = q.abs().powf(p - 1.0);
            w * w.norm().powf(p - 1.0) - C::new(q * qp1, 0.0) - C::new(p * qp1 * z.re, qp1 * z.im)
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct ApproxSolution {
    pub a: f64,
    pub k: usize,
    pub e0: f64,
    pub z: Vec<Field>,
    pub t_min: f64,
    /// Largest sup-norm of λ-coefficients that should vanish, relative to sup Qᵖ.
    pub drift: f64,
    grid: Grid,
}

/// Tolerance for vanishing recursion coefficients, relative to sup Qᵖ.
pub const DRIFT_TOL: f64 = 1e-7;

fn cal_l_minus(ops: &LinearizedOps, c: f64, z: &[C]) -> Vec<C> {
    // (𝓛 + c) z on nodal values
    let re: Vec<f64> = z.iter().map(|v| v.re).collect();
    let im: Vec<f64> = z.iter().map(|v| v.im).collect();
    let a = ops.apply(Which::Minus, &im);
    let b = ops.apply(Which::Plus, &re);
    z.iter().zip(a.iter().zip(&b)).map(|(zz, (x, y))| C::new(-x, *y) + zz * c).collect()
}

impl ApproxSolution {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn poly(&self) -> LambdaPoly {
        let len = self.grid.len();
        let mut p = LambdaPoly::zero(self.k + 1, len);
        for (j, z) in self.z.iter().enumerate() {
            p.set(j + 1, z.values().to_vec());
        }
        p
    }

    pub fn lambda(&self, t: f64) -> f64 {
        (-self.e0 * t).exp()
    }

    /// V_k at time t.
    pub fn eval(&self, t: f64) -> Vec<C> {
        self.poly().eval(self.lambda(t))
    }

    /// ∂ₜV_k at time t.
    pub fn eval_dt(&self, t: f64) -> Vec<C> {
        let l = self.lambda(t);
        let mut out = vec![C::new(0.0, 0.0); self.grid.len()];
        for (j, z) in self.z.iter().enumerate() {
            let c = -((j + 1) as f64) * self.e0 * l.powi(j as i32 + 1);
            for (o, v) in out.iter_mut().zip(z.values()) {
                *o += v * c;
            }
        }
        out
    }

    /// ε_k(t) = ∂ₜV + 𝓛V − iR(V) with R evaluated pointwise.
    pub fn residual(&self, t: f64, ops: &LinearizedOps) -> Field {
        let v = self.eval(t);
        let dv = self.eval_dt(t);
        let lv = cal_l_minus(ops, 0.0, &v);
        let r = direct_r(&ops.gp, &v);
        let mut e: Vec<C> = dv
            .iter()
            .zip(&lv)
            .zip(&r)
            .map(|((a, b), c)| a + b - C::new(0.0, 1.0) * c)
            .collect();
        let n = self.grid.n();
        e[n] = C::new(0.0, 0.0);
        self.grid.laplacian().enforce(&mut e);
        Field::new(&self.grid, e, true, true).expect("grid-sized")
    }
}

pub fn build_vk(a: f64, k: usize, spec: &SpectrumData, ops: &LinearizedOps) -> Result<ApproxSolution> {
    if k < 1 {
        return Err(LabError::InvalidParameter("order k must be at least 1".into()));
    }
    let grid = ops.grid().clone();
    let len = grid.len();
    let e0 = spec.e0;
    let gp = &ops.gp;
    let order = k + 1;
    let qp_sup = gp.q_values().iter().map(|x| x.abs().powf(gp.p)).fold(0.0, f64::max);
    let first = grid.laplacian().first();
    let n = grid.n();
    let sup = |v: &[C]| (first..n).map(|i| v[i].norm()).fold(0.0, f64::max);
    let z1 = spec.y_plus().scale_real(a);
    let mut zs = vec![z1];
    let mut drift: f64 = 0.0;
    let mut poly = LambdaPoly::zero(order, len);
    poly.set(1, zs[0].values().to_vec());
    for j in 1..k {
        let r = expand_r(&poly, gp, None)?;
        // Coefficients 1..j of ε must already vanish.
        for (m, zm) in zs.iter().enumerate() {
            let m1 = m + 1;
            let lz = cal_l_minus(ops, -(m1 as f64) * e0, zm.values());
            let rm = r.coeff(m1);
            let eps: Vec<C> = lz.iter().zip(&rm).map(|(x, y)| x - C::new(0.0, 1.0) * y).collect();
            drift = drift.max(sup(&eps) / qp_sup);
        }
        if drift > DRIFT_TOL {
            return Err(LabError::RecursionDrift(format!(
                "vanishing coefficient of size {drift:e} (relative) at step {j}"
            )));
        }
        let f: Vec<C> = r.coeff(j + 1).iter().map(|c| -C::new(0.0, 1.0) * c).collect();
        let ff = Field::new(&grid, f, true, true)?;
        // (𝓛 − (j+1)e0) Z = −F
        let sol = resolvent_solve(-((j + 1) as f64) * e0, &ff, ops)?;
        let z = sol.scale_real(-1.0);
        poly.set(j + 1, z.values().to_vec());
        zs.push(z);
    }
    let mut approx = ApproxSolution { a, k, e0, z: zs, t_min: 0.0, drift, grid };
    approx.t_min = validity_time(&approx, &gp.q_values());
    Ok(approx)
}

/// Smallest t with |V_k(x, t)| ≤ ½Q(x) wherever Q exceeds the floor.
fn validity_time(approx: &ApproxSolution, q: &[f64]) -> f64 {
    let poly = approx.poly();
    let ok = |l: f64| {
        let v = poly.eval(l);
        v.iter().zip(q).all(|(z, &qq)| qq <= Q_FLOOR || z.norm() <= 0.5 * qq)
    };
    if ok(1.0) {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if lo == 0.0 {
        return f64::INFINITY;
    }
    -lo.ln() / approx.e0
}

/// λ = e^{−e0·t} window for residual-rate fits: deep enough to leave the
/// pre-asymptotic regime, shallow enough to stay above the discretization floor.
pub const RATE_LAMBDA: (f64, f64) = (0.05, 0.01);

/// Eight log-spaced times covering [`RATE_LAMBDA`].
pub fn rate_times(e0: f64) -> Vec<f64> {
    let (hi, lo) = RATE_LAMBDA;
    (0..8).map(|i| -(hi * (lo / hi).powf(i as f64 / 7.0)).ln() / e0).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub rate: f64,
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
}

/// Least-squares slope of log∥ε_k(t)∥_{H¹} against t.
pub fn residual_rate(approx: &ApproxSolution, times: &[f64], ops: &LinearizedOps) -> Result<RateFit> {
    if times.len() < 3 {
        return Err(LabError::InvalidParameter("need at least three times".into()));
    }
    if let Some(t) = times.iter().find(|&&t| t < approx.t_min) {
        return Err(LabError::Validity(format!("t = {t} precedes the validity time {}", approx.t_min)));
    }
    let p = ops.gp.p;
    let norms: Vec<f64> = times.iter().map(|&t| approx.residual(t, ops).norms(p).h1).collect();
    let pts: Vec<(f64, f64)> = times.iter().zip(&norms).filter(|(_, n)| **n > 0.0).map(|(t, n)| (*t, n.ln())).collect();
    let rate = if pts.len() < 3 { f64::NEG_INFINITY } else { crate::fit::slope(&pts) };
    Ok(RateFit { rate, times: times.to_vec(), norms })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly(len: usize, k: usize, cs: &[(usize, f64)]) -> LambdaPoly {
        let mut p = LambdaPoly::zero(k, len);
        for &(j, v) in cs {
            p.set(j, (0..len).map(|i| C::new(v * (1.0 + i as f64), 0.5 * v)).collect());
        }
        p
    }

    #[test]
    fn difference_of_squares() {
        let f = poly(4, 3, &[(1, 0.3)]);
        let one = LambdaPoly::one(3, 4);
        let a = one.add(&f).unwrap();
        let b = one.add(&f.scale(C::new(-1.0, 0.0))).unwrap();
        let prod = lp_mul(&a, &b).unwrap();
        let f2 = lp_mul(&f, &f).unwrap();
        let expect = one.add(&f2.scale(C::new(-1.0, 0.0))).unwrap();
        for j in 0..=3 {
            for (x, y) in prod.coeff(j).iter().zip(expect.coeff(j)) {
                assert!((x - y).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn binomials() {
        assert_eq!(binom(2.0, 0), 1.0);
        assert_eq!(binom(2.0, 1), 2.0);
        assert_eq!(binom(2.0, 2), 1.0);
        assert_eq!(binom(2.0, 3), 0.0);
        assert!((binom(0.5, 2) + 0.125).abs() < 1e-15);
    }

    #[test]
    fn pow_requires_zero_constant() {
        let w = LambdaPoly::one(2, 3);
        assert!(lp_pow_frac(0.5, &w).is_err());
    }
}
