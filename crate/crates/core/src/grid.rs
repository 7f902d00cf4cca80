//! Uniform radial grids, radial fields, quadrature and norms.

use std::path::Path;
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;

use crate::error::{LabError, Result};
use crate::fd::fornberg;
use crate::laplace::Laplacian;

pub type Grid = Arc<RadialGrid>;

/// Surface measure of the unit sphere in ℝᴺ (ω₁ = 2 counts both half-lines).
pub fn sphere_area(dim: usize) -> f64 {
    let half = dim as f64 / 2.0;
    2.0 * std::f64::consts::PI.powf(half) / gamma(half)
}

// Γ at integers and half-integers, which is all the dimension formula needs.
fn gamma(x: f64) -> f64 {
    let mut acc = 1.0;
    let mut y = x;
    while y > 1.0 {
        y -= 1.0;
        acc *= y;
    }
    if (y - 0.5).abs() < 1e-12 {
        acc * std::f64::consts::PI.sqrt()
    } else {
        acc
    }
}

// Gregory end correction up to fifth differences, as weights on g_0..g_5.
fn gregory_left() -> [f64; 6] {
    let coef = [1.0 / 12.0, -1.0 / 24.0, 19.0 / 720.0, -3.0 / 160.0, 863.0 / 60480.0];
    let mut w = [0.0; 6];
    for (k, c) in coef.iter().enumerate() {
        let order = k + 1;
        let mut binom = 1.0;
        for j in 0..=order {
            let sign = if (order - j) % 2 == 0 { 1.0 } else { -1.0 };
            w[j] += c * sign * binom;
            binom = binom * (order - j) as f64 / (j + 1) as f64;
        }
    }
    w
}

const D1: [f64; 3] = [3.0 / 4.0, -3.0 / 20.0, 1.0 / 60.0];

#[derive(Debug)]
pub struct RadialGrid {
    dim: usize,
    rmax: f64,
    n: usize,
    h: f64,
    omega: f64,
    nodes: Vec<f64>,
    base: Vec<f64>,
    gregory: [f64; 6],
    one_sided_left: Vec<Vec<f64>>,
    one_sided_right: Vec<Vec<f64>>,
    laplacian: OnceLock<Laplacian>,
}

impl PartialEq for RadialGrid {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.n == other.n && self.rmax == other.rmax
    }
}

pub fn make_grid(dim: usize, rmax: f64, n: usize) -> Result<Grid> {
    if dim < 1 {
        return Err(LabError::InvalidParameter(format!("dimension must be >= 1, got {dim}")));
    }
    if !(rmax > 0.0 && rmax.is_finite()) {
        return Err(LabError::InvalidParameter(format!("rmax must be positive, got {rmax}")));
    }
    if n < 16 {
        return Err(LabError::InvalidParameter(format!("need at least 16 intervals, got {n}")));
    }
    let h = rmax / n as f64;
    let omega = sphere_area(dim);
    let nodes: Vec<f64> = (0..=n).map(|i| i as f64 * h).collect();
    let base = nodes
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let end = if i == 0 || i == n { 0.5 } else { 1.0 };
            let radial = if dim == 1 { 1.0 } else { r.powi(dim as i32 - 1) };
            omega * h * end * radial
        })
        .collect();
    let xs: Vec<f64> = (0..7).map(|k| k as f64).collect();
    let one_sided_left = (0..3).map(|i| fornberg(i as f64, &xs, 1).swap_remove(1)).collect();
    let one_sided_right = (0..3)
        .map(|i| fornberg(6.0 - i as f64, &xs, 1).swap_remove(1))
        .collect();
    Ok(Arc::new(RadialGrid {
        dim,
        rmax,
        n,
        h,
        omega,
        nodes,
        base,
        gregory: gregory_left(),
        one_sided_left,
        one_sided_right,
        laplacian: OnceLock::new(),
    }))
}

impl RadialGrid {
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn rmax(&self) -> f64 {
        self.rmax
    }
    /// Number of intervals; there are `n + 1` nodes.
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn omega(&self) -> f64 {
        self.omega
    }
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }
    pub fn len(&self) -> usize {
        self.n + 1
    }
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn laplacian(&self) -> &Laplacian {
        self.laplacian.get_or_init(|| Laplacian::new(self.dim, self.n, self.h))
    }

    /// Weights with Gregory corrections at both ends; valid for any smooth integrand.
    pub fn weights(&self) -> Vec<f64> {
        self.weights_for(false, false)
    }

    /// Quadrature weights adapted to the boundary behaviour of the integrand.
    ///
    /// Even integrands at the origin need no correction there when N is odd
    /// (the radial factor keeps them even); integrands that are even about
    /// rmax (products of fields odd-reflected there) need none at rmax.
    pub fn weights_for(&self, regular: bool, decaying: bool) -> Vec<f64> {
        let mut w = self.base.clone();
        let jac = |r: f64| if self.dim == 1 { 1.0 } else { r.powi(self.dim as i32 - 1) };
        if !(regular && self.dim % 2 == 1) {
            for (j, g) in self.gregory.iter().enumerate() {
                w[j] += self.omega * self.h * g * jac(self.nodes[j]);
            }
        }
        if !decaying {
            for (j, g) in self.gregory.iter().enumerate() {
                let i = self.n - j;
                w[i] += self.omega * self.h * g * jac(self.nodes[i]);
            }
        }
        w
    }

    pub fn integrate_values(&self, v: &[f64], regular: bool, decaying: bool) -> f64 {
        let w = self.weights_for(regular, decaying);
        w.iter().zip(v).map(|(a, b)| a * b).sum()
    }

    /// Sixth-order first derivative of nodal values.
    pub fn derivative(&self, f: &[f64], regular: bool, decaying: bool) -> Vec<f64> {
        let n = self.n;
        let get = |i: i64| -> Option<f64> {
            if i < 0 {
                regular.then(|| f[(-i) as usize])
            } else if i as usize > n {
                decaying.then(|| -f[2 * n - i as usize])
            } else {
                Some(f[i as usize])
            }
        };
        let mut d = vec![0.0; n + 1];
        for (i, di) in d.iter_mut().enumerate() {
            let ii = i as i64;
            let centered = (1..=3).try_fold(0.0, |acc, k| {
                Some(acc + D1[k - 1] * (get(ii + k as i64)? - get(ii - k as i64)?))
            });
            *di = match centered {
                Some(s) => s / self.h,
                None if i < 3 => {
                    self.one_sided_left[i].iter().enumerate().map(|(k, c)| c * f[k]).sum::<f64>() / self.h
                }
                None => {
                    let j = n - i;
                    self.one_sided_right[j]
                        .iter()
                        .enumerate()
                        .map(|(k, c)| c * f[n - 6 + k])
                        .sum::<f64>()
                        / self.h
                }
            };
        }
        d
    }
}

/// Complex radial profile with boundary flags.
#[derive(Debug, Clone)]
pub struct Field {
    grid: Grid,
    values: Vec<Complex64>,
    regular: bool,
    decaying: bool,
    real: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub l2: f64,
    pub grad_l2: f64,
    pub h1: f64,
    pub lp: f64,
    pub linf: f64,
}

impl Field {
    pub fn new(grid: &Grid, values: Vec<Complex64>, regular: bool, decaying: bool) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(LabError::GridMismatch(format!(
                "{} values on a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Field { grid: grid.clone(), values, regular, decaying, real: false })
    }

    pub fn from_real(grid: &Grid, values: &[f64], regular: bool, decaying: bool) -> Result<Self> {
        let mut f = Self::new(grid, values.iter().map(|&v| Complex64::new(v, 0.0)).collect(), regular, decaying)?;
        f.real = true;
        Ok(f)
    }

    pub fn from_parts(grid: &Grid, re: &[f64], im: &[f64], regular: bool, decaying: bool) -> Result<Self> {
        if re.len() != im.len() {
            return Err(LabError::GridMismatch("real and imaginary parts differ in length".into()));
        }
        let v = re.iter().zip(im).map(|(&a, &b)| Complex64::new(a, b)).collect();
        Self::new(grid, v, regular, decaying)
    }

    /// Regular, decaying field from a function of r.
    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> Complex64) -> Self {
        let v = grid.nodes().iter().map(|&r| f(r)).collect();
        Field { grid: grid.clone(), values: v, regular: true, decaying: true, real: false }
    }

    pub fn from_real_fn(grid: &Grid, f: impl Fn(f64) -> f64) -> Self {
        let v = grid.nodes().iter().map(|&r| Complex64::new(f(r), 0.0)).collect();
        Field { grid: grid.clone(), values: v, regular: true, decaying: true, real: true }
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self::from_real_fn(grid, |_| 0.0)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }
    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }
    pub fn is_regular(&self) -> bool {
        self.regular
    }
    pub fn is_decaying(&self) -> bool {
        self.decaying
    }
    pub fn is_real(&self) -> bool {
        self.real
    }

    pub fn with_flags(mut self, regular: bool, decaying: bool) -> Self {
        self.regular = regular;
        self.decaying = decaying;
        self
    }

    pub fn re(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.re).collect()
    }
    pub fn im(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.im).collect()
    }

    pub fn check_same_grid(&self, other: &Field) -> Result<()> {
        if *self.grid != *other.grid {
            return Err(LabError::GridMismatch("fields live on different grids".into()));
        }
        Ok(())
    }

    fn combine(&self, other: &Field, op: impl Fn(Complex64, Complex64) -> Complex64) -> Result<Field> {
        self.check_same_grid(other)?;
        let v = self.values.iter().zip(&other.values).map(|(&a, &b)| op(a, b)).collect();
        Ok(Field {
            grid: self.grid.clone(),
            values: v,
            regular: self.regular && other.regular,
            decaying: self.decaying && other.decaying,
            real: self.real && other.real,
        })
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.combine(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.combine(other, |a, b| a - b)
    }

    /// `self + c·other`.
    pub fn axpy(&self, c: Complex64, other: &Field) -> Result<Field> {
        let mut out = self.combine(other, |a, b| a + c * b)?;
        out.real = self.real && other.real && c.im == 0.0;
        Ok(out)
    }

    pub fn scale(&self, c: Complex64) -> Field {
        Field {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&z| z * c).collect(),
            regular: self.regular,
            decaying: self.decaying,
            real: self.real && c.im == 0.0,
        }
    }

    pub fn scale_real(&self, c: f64) -> Field {
        self.scale(Complex64::new(c, 0.0))
    }

    pub fn conj(&self) -> Field {
        Field { values: self.values.iter().map(|z| z.conj()).collect(), ..self.clone() }
    }

    pub fn map(&self, f: impl Fn(f64, Complex64) -> Complex64) -> Field {
        let v = self.grid.nodes().iter().zip(&self.values).map(|(&r, &z)| f(r, z)).collect();
        Field { values: v, real: false, ..self.clone() }
    }

    /// `∫ g(u(r), r) dx` over ℝᴺ with boundary-aware quadrature.
    pub fn integrate(&self, g: impl Fn(Complex64, f64) -> f64) -> f64 {
        let v: Vec<f64> = self.values.iter().zip(self.grid.nodes()).map(|(&z, &r)| g(z, r)).collect();
        self.grid.integrate_values(&v, self.regular, self.decaying)
    }

    /// Real inner product `Re ∫ conj(f) g`.
    pub fn dot(&self, other: &Field) -> Result<f64> {
        self.check_same_grid(other)?;
        let v: Vec<f64> = self.values.iter().zip(&other.values).map(|(a, b)| (a.conj() * b).re).collect();
        Ok(self.grid.integrate_values(&v, self.regular && other.regular, self.decaying || other.decaying))
    }

    /// Complex derivative with the field's boundary flags.
    pub fn derivative(&self) -> Vec<Complex64> {
        let dr = self.grid.derivative(&self.re(), self.regular, self.decaying);
        let di = if self.real {
            vec![0.0; dr.len()]
        } else {
            self.grid.derivative(&self.im(), self.regular, self.decaying)
        };
        dr.into_iter().zip(di).map(|(a, b)| Complex64::new(a, b)).collect()
    }

    pub fn grad_sq(&self) -> f64 {
        let d = self.derivative();
        let v: Vec<f64> = d.iter().map(|z| z.norm_sqr()).collect();
        self.grid.integrate_values(&v, self.regular, self.decaying)
    }

    /// Norms; `lp` is the L^{p+1} norm for the given nonlinearity power p.
    pub fn norms(&self, p: f64) -> Norms {
        let l2 = self.integrate(|z, _| z.norm_sqr()).max(0.0).sqrt();
        let grad_l2 = self.grad_sq().max(0.0).sqrt();
        let lp = self.integrate(|z, _| z.norm().powf(p + 1.0)).max(0.0).powf(1.0 / (p + 1.0));
        let linf = self.values.iter().map(|z| z.norm()).fold(0.0, f64::max);
        Norms { l2, grad_l2, h1: l2.hypot(grad_l2), lp, linf }
    }

    /// Discrete Laplacian; N·f''(0) at the origin, 0 at rmax.
    pub fn laplacian(&self) -> Field {
        let v = self.grid.laplacian().apply(&self.values);
        Field { values: v, ..self.clone() }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        crate::io::write_field_csv(path, self)
    }
}

/// Free-function form of [`Field::laplacian`].
pub fn laplacian_apply(f: &Field) -> Field {
    f.laplacian()
}

/// Free-function form of [`Field::norms`].
pub fn norms(f: &Field, p: f64) -> Norms {
    f.norms(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn sphere_areas() {
        assert!((sphere_area(1) - 2.0).abs() < 1e-15);
        assert!((sphere_area(2) - 2.0 * PI).abs() < 1e-14);
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-14);
        assert!((sphere_area(4) - 2.0 * PI * PI).abs() < 1e-13);
        assert!((sphere_area(5) - 8.0 * PI * PI / 3.0).abs() < 1e-13);
    }

    #[test]
    fn gregory_weights_integrate_quintic_exactly() {
        let g = make_grid(1, 1.0, 20).unwrap();
        let v: Vec<f64> = g.nodes().iter().map(|r| r.powi(5) - 2.0 * r.powi(3) + r).collect();
        // ω₁ = 2 doubles the half-line integral.
        let exact = 2.0 * (1.0 / 6.0 - 0.5 + 0.5);
        assert!((g.integrate_values(&v, false, false) - exact).abs() < 1e-13);
    }

    #[test]
    fn weights_nonnegative() {
        for dim in 1..=5 {
            let g = make_grid(dim, 3.0, 32).unwrap();
            assert!(g.weights().iter().all(|&w| w >= 0.0), "dim {dim}");
        }
    }

    #[test]
    fn derivative_of_smooth_even_function() {
        let g = make_grid(3, 10.0, 1000).unwrap();
        let f: Vec<f64> = g.nodes().iter().map(|r| (-r * r).exp()).collect();
        let d = g.derivative(&f, true, true);
        for (r, di) in g.nodes().iter().zip(&d) {
            assert!((di + 2.0 * r * (-r * r).exp()).abs() < 1e-9);
        }
    }

    #[test]
    fn mismatched_grid_rejected() {
        let a = make_grid(1, 10.0, 100).unwrap();
        let b = make_grid(1, 10.0, 200).unwrap();
        let fa = Field::zeros(&a);
        let fb = Field::zeros(&b);
        assert!(fa.add(&fb).is_err());
        assert!(Field::new(&a, vec![Complex64::new(0.0, 0.0); 3], true, true).is_err());
    }
}
