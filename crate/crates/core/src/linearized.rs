//! Linearized operators around Q, the unstable eigenpair, the bilinear form
//! B, resolvent solves and constrained coercivity.
//!
//! Active-node vectors are used in mass-weighted ("hat") coordinates
//! `ŷ = M^{1/2} f`, where `-Δ_h` becomes the symmetric band `Ŝ`.

use faer::linalg::triangular_solve::solve_lower_triangular_in_place;
use faer::{Mat, Par, Side};
use num_complex::Complex64;

use crate::band::{BandLu, SymBand};
use crate::error::{LabError, Result};
use crate::grid::{Field, Grid};
use crate::ground::GroundProfile;

#[derive(Debug, Clone)]
pub struct LinearizedOps {
    pub gp: GroundProfile,
    grid: Grid,
    first: usize,
    sq: Vec<f64>,
    vplus: Vec<f64>,
    vminus: Vec<f64>,
    plus_hat: SymBand,
    minus_hat: SymBand,
}

pub fn assemble(gp: &GroundProfile) -> LinearizedOps {
    let grid = gp.grid.clone();
    let lap = grid.laplacian();
    let first = lap.first();
    let n = grid.n();
    let p = gp.p;
    let q = gp.q_values();
    let vminus: Vec<f64> = q.iter().map(|v| v.abs().powf(p - 1.0)).collect();
    let vplus: Vec<f64> = vminus.iter().map(|v| p * v).collect();
    let shat = lap.hat();
    let mut plus_hat = shat.clone();
    plus_hat.add_diagonal(&(first..n).map(|i| 1.0 - vplus[i]).collect::<Vec<_>>());
    let mut minus_hat = shat;
    minus_hat.add_diagonal(&(first..n).map(|i| 1.0 - vminus[i]).collect::<Vec<_>>());
    LinearizedOps {
        gp: gp.clone(),
        first,
        sq: lap.mass().iter().map(|m| m.sqrt()).collect(),
        grid,
        vplus,
        vminus,
        plus_hat,
        minus_hat,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    Plus,
    Minus,
}

impl LinearizedOps {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn hat_matrix(&self, w: Which) -> &SymBand {
        match w {
            Which::Plus => &self.plus_hat,
            Which::Minus => &self.minus_hat,
        }
    }

    fn active(&self) -> std::ops::Range<usize> {
        self.first..self.grid.n()
    }

    /// Full node vector to hat coordinates on the active nodes.
    pub fn to_hat(&self, f: &[f64]) -> Vec<f64> {
        self.active().zip(&self.sq).map(|(i, s)| f[i] * s).collect()
    }

    /// Hat coordinates back to a full node vector (slaved nodes filled).
    pub fn from_hat(&self, y: &[f64]) -> Vec<f64> {
        let mut f = vec![0.0; self.grid.len()];
        for (k, (v, s)) in y.iter().zip(&self.sq).enumerate() {
            f[k + self.first] = v / s;
        }
        self.grid.laplacian().enforce(&mut f);
        f
    }

    /// L± applied to nodal values.
    pub fn apply(&self, w: Which, f: &[f64]) -> Vec<f64> {
        let v = match w {
            Which::Plus => &self.vplus,
            Which::Minus => &self.vminus,
        };
        let lap = self.grid.laplacian().apply(f);
        let mut out: Vec<f64> = (0..self.grid.len()).map(|i| -lap[i] + f[i] - v[i] * f[i]).collect();
        out[self.grid.n()] = 0.0;
        out
    }

    pub fn apply_field(&self, w: Which, f: &Field) -> Field {
        let v = self.apply(w, &f.re());
        Field::from_real(&self.grid, &v, true, true).expect("grid-sized")
    }

    /// 𝓛g = −L−g₂ + i·L+g₁.
    pub fn apply_cal_l(&self, g: &Field) -> Field {
        let a = self.apply(Which::Minus, &g.im());
        let b = self.apply(Which::Plus, &g.re());
        let v = a.iter().zip(&b).map(|(x, y)| Complex64::new(-x, *y)).collect();
        Field::new(&self.grid, v, true, true).expect("grid-sized")
    }

    /// Mass inner product over the active nodes.
    pub fn dot(&self, f: &[f64], g: &[f64]) -> f64 {
        self.active().zip(&self.sq).map(|(i, s)| s * s * f[i] * g[i]).sum()
    }

    /// (L± f, g) in the symmetric form fᵀ K g + Σ m(1 − v) f g.
    pub fn form(&self, w: Which, f: &[f64], g: &[f64]) -> f64 {
        let a = self.to_hat(f);
        let b = self.to_hat(g);
        let la = self.hat_matrix(w).matvec(&a);
        la.iter().zip(&b).map(|(x, y)| x * y).sum()
    }

    /// ∥f∥²_{L²} + ∥∇f∥²_{L²} with the discrete gradient quadratic form.
    pub fn h1_sq(&self, f: &[f64]) -> f64 {
        let a = self.to_hat(f);
        let s = self.grid.laplacian().hat().matvec(&a);
        a.iter().zip(&s).map(|(x, y)| x * x + x * y).sum()
    }

    /// ∥f∥_{L²} over the active nodes.
    pub fn l2(&self, f: &[f64]) -> f64 {
        self.dot(f, f).sqrt()
    }

    pub fn dense_hat(&self, w: Which) -> Mat<f64> {
        self.hat_matrix(w).to_dense()
    }

    /// L+(ΛQ) + 2Q, which vanishes for the continuous problem.
    pub fn scaling_residual(&self) -> f64 {
        let lq = self.gp.lambda_q();
        let q = self.gp.q_values();
        let r = self.apply(Which::Plus, &lq.re());
        let d: Vec<f64> = r.iter().zip(&q).map(|(a, b)| a + 2.0 * b).collect();
        self.l2(&d)
    }

    /// ∥L−Q∥_{L²}.
    pub fn kernel_residual(&self) -> f64 {
        let q = self.gp.q_values();
        self.l2(&self.apply(Which::Minus, &q))
    }
}

pub fn bilinear_b(f: &Field, g: &Field, ops: &LinearizedOps) -> Result<f64> {
    f.check_same_grid(g)?;
    if **f.grid() != *ops.grid {
        return Err(LabError::GridMismatch("field and operators on different grids".into()));
    }
    Ok(0.5 * ops.form(Which::Plus, &f.re(), &g.re()) + 0.5 * ops.form(Which::Minus, &f.im(), &g.im()))
}

pub fn linearized_energy_phi(f: &Field, ops: &LinearizedOps) -> Result<f64> {
    bilinear_b(f, f, ops)
}

#[derive(Debug, Clone)]
pub struct SpectrumData {
    pub e0: f64,
    /// e0 from the dense symmetrized eigenproblem, before refinement.
    pub e0_dense: f64,
    pub y1: Field,
    pub y2: Field,
    /// Smallest eigenvalue of L−^{1/2} L+ L−^{1/2} on {Q}⊥ (= −e0²).
    pub mu_min: f64,
    /// Second-smallest eigenvalue of the same matrix (simplicity proxy).
    pub mu_second: f64,
    pub residual_plus: f64,
    pub residual_minus: f64,
    pub decay_eta: f64,
    pub inverse_iterations: usize,
}

impl SpectrumData {
    /// Y+ = Y1 + iY2.
    pub fn y_plus(&self) -> Field {
        Field::from_parts(self.y1.grid(), &self.y1.re(), &self.y2.re(), true, true).expect("same grid")
    }

    /// Y− = −Y1 + iY2: an eigenfunction for −e0 with B(Y+, Y−) = 1.
    pub fn y_minus(&self) -> Field {
        let y1: Vec<f64> = self.y1.re().iter().map(|v| -v).collect();
        Field::from_parts(self.y1.grid(), &y1, &self.y2.re(), true, true).expect("same grid")
    }
}

fn sym_dense_sqrt_without_kernel(m: &Mat<f64>) -> Result<(Mat<f64>, f64)> {
    let eig = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| LabError::SpectralFailure(format!("eigendecomposition of L- failed: {e:?}")))?;
    let s = eig.S().column_vector();
    let u = eig.U();
    let n = m.nrows();
    // The smallest eigenvalue is the discrete kernel (Q); drop it, clamp rounding negatives.
    let lam0 = s[0];
    let mut us = Mat::<f64>::zeros(n, n);
    for k in 1..n {
        let c = s[k].max(0.0).sqrt();
        for i in 0..n {
            us[(i, k)] = u[(i, k)] * c;
        }
    }
    Ok((&us * u.transpose(), lam0))
}

pub fn compute_spectrum(ops: &LinearizedOps) -> Result<SpectrumData> {
    let lminus = ops.dense_hat(Which::Minus);
    let lplus = ops.dense_hat(Which::Plus);
    let (a, _lam0) = sym_dense_sqrt_without_kernel(&lminus)?;
    let s = &a * &lplus * &a;
    let eig = s
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| LabError::SpectralFailure(format!("eigendecomposition of the symmetrized operator failed: {e:?}")))?;
    let mu = eig.S().column_vector();
    let mu_min = mu[0];
    let mu_second = mu[1];
    if !(mu_min < 0.0) {
        return Err(LabError::SpectralFailure(format!("no negative eigenvalue (minimum {mu_min:e})")));
    }
    let e0_dense = (-mu_min).sqrt();
    let g = eig.U().col(0);
    let m = g.nrows();
    let y1_hat: Vec<f64> = (0..m).map(|i| (0..m).map(|k| a[(i, k)] * g[k]).sum()).collect();
    let y2_hat: Vec<f64> = ops.plus_hat.matvec(&y1_hat).iter().map(|v| v / e0_dense).collect();
    let (e0, y2_hat, iters) = refine(ops, e0_dense, &y2_hat)?;
    finish_spectrum(ops, e0, e0_dense, y2_hat, mu_min, mu_second, iters)
}

// Inverse iteration on the band matrix L̂+L̂− for the eigenvalue −e0².
fn refine(ops: &LinearizedOps, e0: f64, y2: &[f64]) -> Result<(f64, Vec<f64>, usize)> {
    let lp = ops.plus_hat.to_general();
    let lm = ops.minus_hat.to_general();
    let prod = lp.mul(&lm);
    let mut shifted = prod.clone();
    shifted.add_diagonal(e0 * e0 * (1.0 + 1e-9));
    let lu = BandLu::factor(&shifted)?;
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut x: Vec<f64> = y2.to_vec();
    let nx = norm(&x);
    x.iter_mut().for_each(|v| *v /= nx);
    let mut lambda = -e0 * e0;
    let mut iters = 0;
    for _ in 0..10 {
        let y = lu.solve(&x);
        let ny = norm(&y);
        let xn: Vec<f64> = y.iter().map(|v| v / ny).collect();
        let px = prod.matvec(&xn);
        let new_lambda: f64 = px.iter().zip(&xn).map(|(a, b)| a * b).sum();
        iters += 1;
        let change = (new_lambda - lambda).abs();
        lambda = new_lambda;
        x = xn;
        if change <= 1e-13 * lambda.abs() && iters >= 3 {
            break;
        }
    }
    if !(lambda < 0.0) {
        return Err(LabError::SpectralFailure(format!("refinement lost the unstable eigenvalue ({lambda:e})")));
    }
    Ok(((-lambda).sqrt(), x, iters))
}

fn finish_spectrum(
    ops: &LinearizedOps,
    e0: f64,
    e0_dense: f64,
    y2_hat: Vec<f64>,
    mu_min: f64,
    mu_second: f64,
    iters: usize,
) -> Result<SpectrumData> {
    let y1_hat: Vec<f64> = ops.minus_hat.matvec(&y2_hat).iter().map(|v| -v / e0).collect();
    let mut y1 = ops.from_hat(&y1_hat);
    let mut y2 = ops.from_hat(&y2_hat);
    let q = ops.gp.q_values();
    let h1_dot = {
        let a = ops.to_hat(&q);
        let b = ops.grid.laplacian().hat().matvec(&y1_hat);
        a.iter().zip(&y1_hat).zip(&b).map(|((x, y), z)| x * y + x * z).sum::<f64>()
    };
    let mut sign = if h1_dot < 0.0 { -1.0 } else { 1.0 };
    // B(Y+, Y−) = −½(L+Y1, Y1) + ½(L−Y2, Y2) = −e0 (Y1, Y2) > 0; scale it to 1.
    let pairing = 0.5 * (ops.form(Which::Minus, &y2, &y2) - ops.form(Which::Plus, &y1, &y1));
    if !(pairing > 0.0) {
        return Err(LabError::SpectralFailure(format!("eigenfunction pairing {pairing:e} is not positive")));
    }
    sign /= pairing.sqrt();
    y1.iter_mut().for_each(|v| *v *= sign);
    y2.iter_mut().for_each(|v| *v *= sign);
    let lp = ops.apply(Which::Plus, &y1);
    let lm = ops.apply(Which::Minus, &y2);
    let rp: Vec<f64> = lp.iter().zip(&y2).map(|(a, b)| a - e0 * b).collect();
    let rm: Vec<f64> = lm.iter().zip(&y1).map(|(a, b)| a + e0 * b).collect();
    let residual_plus = ops.l2(&rp) / (e0 * ops.l2(&y2));
    let residual_minus = ops.l2(&rm) / (e0 * ops.l2(&y1));
    let decay_eta = decay_margin(&ops.grid, &q, &y1, &y2);
    Ok(SpectrumData {
        e0,
        e0_dense,
        y1: Field::from_real(&ops.grid, &y1, true, true)?,
        y2: Field::from_real(&ops.grid, &y2, true, true)?,
        mu_min,
        mu_second,
        residual_plus,
        residual_minus,
        decay_eta,
        inverse_iterations: iters,
    })
}

/// Slope of log(|Y|/Q) on [rmax/3, 2rmax/3], ignoring values at the rounding floor.
fn decay_margin(grid: &Grid, q: &[f64], y1: &[f64], y2: &[f64]) -> f64 {
    let amp: Vec<f64> = y1.iter().zip(y2).map(|(a, b)| a.hypot(*b)).collect();
    let peak = amp.iter().cloned().fold(0.0, f64::max);
    let (lo, hi) = (grid.rmax() / 3.0, 2.0 * grid.rmax() / 3.0);
    let pts: Vec<(f64, f64)> = grid
        .nodes()
        .iter()
        .enumerate()
        .filter(|(i, r)| **r >= lo && **r <= hi && amp[*i] > 1e-11 * peak && q[*i] > 0.0)
        .map(|(i, r)| (*r, (amp[i] / q[i]).ln()))
        .collect();
    if pts.len() < 5 {
        return f64::NAN;
    }
    -crate::fit::slope(&pts)
}

/// Solves (𝓛 + c) g = F for real c away from {−e0, 0, e0}.
pub fn resolvent_solve(c: f64, f: &Field, ops: &LinearizedOps) -> Result<Field> {
    if c == 0.0 || !c.is_finite() {
        return Err(LabError::SingularSystem(format!("shift c = {c} is not admissible")));
    }
    let f1 = ops.to_hat(&f.re());
    let f2 = ops.to_hat(&f.im());
    let lp = ops.plus_hat.to_general();
    let lm = ops.minus_hat.to_general();
    let mut sys = lp.mul(&lm);
    sys.add_diagonal(c * c);
    let lu = BandLu::factor(&sys)?;
    let lpf1 = ops.plus_hat.matvec(&f1);
    let rhs: Vec<f64> = f2.iter().zip(&lpf1).map(|(a, b)| c * a - b).collect();
    let g2 = lu.solve(&rhs);
    let lmg2 = ops.minus_hat.matvec(&g2);
    let g1: Vec<f64> = f1.iter().zip(&lmg2).map(|(a, b)| (a + b) / c).collect();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let fnorm = norm(&f1).hypot(norm(&f2));
    let gnorm = norm(&g1).hypot(norm(&g2));
    let r1: Vec<f64> = g1.iter().zip(&lmg2).zip(&f1).map(|((g, l), f)| c * g - l - f).collect();
    let lpg1 = ops.plus_hat.matvec(&g1);
    let r2: Vec<f64> = lpg1.iter().zip(&g2).zip(&f2).map(|((l, g), f)| l + c * g - f).collect();
    let rnorm = norm(&r1).hypot(norm(&r2));
    if fnorm > 0.0 {
        if !(gnorm <= 1e6 * fnorm / c.abs().min(1.0)) || !gnorm.is_finite() {
            return Err(LabError::SingularSystem(format!(
                "solution growth {:e} at c = {c}: shift is on the spectrum",
                gnorm / fnorm
            )));
        }
        if !(rnorm <= 1e-8 * fnorm) {
            return Err(LabError::SingularSystem(format!("resolvent residual {:e} at c = {c}", rnorm / fnorm)));
        }
    }
    let re = ops.from_hat(&g1);
    let im = ops.from_hat(&g2);
    Field::from_parts(&ops.grid, &re, &im, true, true)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subspace {
    /// {∫Qᵖ v1 = 0, ∫Q v2 = 0}
    GPerp,
    /// {∫Q v2 = 0, ∫Y1 v2 = 0, ∫Y2 v1 = 0}
    GTildePerp,
    Unconstrained,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coercivity {
    /// ½·min over both blocks of the constrained Rayleigh quotient.
    pub value: f64,
    pub plus_block: f64,
    pub minus_block: f64,
}

pub fn coercivity_min(ops: &LinearizedOps, spec: &SpectrumData, subspace: Subspace) -> Result<f64> {
    Ok(coercivity_detail(ops, spec, subspace)?.value)
}

pub fn coercivity_detail(ops: &LinearizedOps, spec: &SpectrumData, subspace: Subspace) -> Result<Coercivity> {
    let q = ops.gp.q_values();
    let p = ops.gp.p;
    let qp: Vec<f64> = q.iter().map(|v| v.abs().powf(p)).collect();
    let y1 = spec.y1.re();
    let y2 = spec.y2.re();
    let (cp, cm): (Vec<&[f64]>, Vec<&[f64]>) = match subspace {
        Subspace::GPerp => (vec![&qp], vec![&q]),
        Subspace::GTildePerp => (vec![&y2], vec![&q, &y1]),
        Subspace::Unconstrained => (vec![], vec![]),
    };
    let hmat = {
        let mut h = ops.grid.laplacian().hat();
        h.add_diagonal(&vec![1.0; h.n()]);
        h.to_dense()
    };
    let llt = hmat
        .llt(Side::Lower)
        .map_err(|e| LabError::SpectralFailure(format!("H1 Gram matrix not positive definite: {e:?}")))?;
    let plus_block = constrained_min(ops, &llt, Which::Plus, &cp)?;
    let minus_block = constrained_min(ops, &llt, Which::Minus, &cm)?;
    Ok(Coercivity { value: 0.5 * plus_block.min(minus_block), plus_block, minus_block })
}

fn constrained_min(ops: &LinearizedOps, llt: &faer::linalg::solvers::Llt<f64>, w: Which, cons: &[&[f64]]) -> Result<f64> {
    let l = llt.L();
    let m = l.nrows();
    // B = L⁻¹ A L⁻ᵀ
    let mut x = ops.dense_hat(w);
    solve_lower_triangular_in_place(l, x.as_mut(), Par::Seq);
    let mut b = x.transpose().to_owned();
    solve_lower_triangular_in_place(l, b.as_mut(), Par::Seq);
    // Constraint ∫w f = Σ m w f = (M^{1/2} w)·ŷ, i.e. orthogonality to L⁻¹ M^{1/2} w in z.
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for c in cons {
        let mut d = Mat::<f64>::from_fn(m, 1, |i, _| c[i + ops.first] * ops.sq[i]);
        solve_lower_triangular_in_place(l, d.as_mut(), Par::Seq);
        let mut v: Vec<f64> = (0..m).map(|i| d[(i, 0)]).collect();
        for _ in 0..2 {
            for u in &basis {
                let dot: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(u).for_each(|(x, y)| *x -= dot * y);
            }
        }
        let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= nv);
        basis.push(v);
    }
    if !basis.is_empty() {
        let k = basis.len();
        let u = Mat::<f64>::from_fn(m, k, |i, j| basis[j][i]);
        let bu = &b * &u;
        let utbu = u.transpose() * &bu;
        let scale = (0..m).map(|i| b[(i, i)].abs()).fold(0.0, f64::max);
        let sigma = 10.0 * scale + 1e3;
        // PBP + σUUᵀ with P = I − UUᵀ
        let mut corr = -(&bu * u.transpose()) - (&u * bu.transpose()) + &u * &utbu * u.transpose();
        corr += sigma * (&u * u.transpose());
        b += corr;
    }
    let ev = b
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| LabError::SpectralFailure(format!("constrained eigenproblem failed: {e:?}")))?;
    Ok(ev[0])
}

/// (L+Z, Z) for Z = ΛQ − ((ΛQ,Q)/(Q,Q))Q, and its closed-form value.
pub fn negative_direction(ops: &LinearizedOps) -> (f64, f64) {
    let gp = &ops.gp;
    let q = gp.q_values();
    let lq = gp.lambda_q().re();
    let beta = ops.dot(&lq, &q) / ops.dot(&q, &q);
    let z: Vec<f64> = lq.iter().zip(&q).map(|(a, b)| a - beta * b).collect();
    let value = ops.form(Which::Plus, &z, &z);
    let nn = gp.dim() as f64;
    let p = gp.p;
    let target = -(nn * nn * (p - 1.0) / (4.0 * (p + 1.0))) * (p - 1.0 - 4.0 / nn) * gp.potential();
    (value, target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::ground::solve_ground;

    #[test]
    fn operators_are_symmetric() {
        let g = make_grid(3, 20.0, 1000).unwrap();
        let gp = solve_ground(&g, 3.0).unwrap();
        let ops = assemble(&gp);
        let f: Vec<f64> = g.nodes().iter().map(|r| (-r * r / 4.0).exp() * (1.0 + r)).collect();
        let h: Vec<f64> = g.nodes().iter().map(|r| (-r).exp() * r.cos()).collect();
        for w in [Which::Plus, Which::Minus] {
            let a = ops.form(w, &f, &h);
            let b = ops.form(w, &h, &f);
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
            // The form agrees with the applied operator under the mass product.
            let c = ops.dot(&ops.apply(w, &f), &h);
            assert!((a - c).abs() <= 1e-9 * a.abs().max(1.0), "{a} {c}");
        }
    }

    #[test]
    fn resolvent_rejects_zero_shift() {
        let g = make_grid(1, 20.0, 1000).unwrap();
        let gp = solve_ground(&g, 7.0).unwrap();
        let ops = assemble(&gp);
        let f = Field::zeros(&g);
        assert!(resolvent_solve(0.0, &f, &ops).is_err());
    }
}
