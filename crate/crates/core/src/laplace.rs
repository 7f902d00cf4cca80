//! Self-adjoint discretizations of the radial Laplacian.
//!
//! `Δ_h = -M⁻¹K` on the active nodes, with `K` symmetric banded and `M` the
//! diagonal mass. For N = 1 and N = 3 the stencil is sixth order (even
//! reflection of `f`, resp. odd reflection of `r·f`, at the origin). Other
//! dimensions use a second-order conservative flux form. The last node is a
//! homogeneous Dirichlet node.

use std::f64::consts::PI;

use crate::band::SymBand;

const C6: [f64; 4] = [-49.0 / 18.0, 1.5, -3.0 / 20.0, 1.0 / 90.0];

#[derive(Debug, Clone)]
pub struct Laplacian {
    n: usize,
    first: usize,
    k: SymBand,
    mass: Vec<f64>,
    dim: usize,
    h: f64,
}

impl Laplacian {
    pub fn new(dim: usize, n: usize, h: f64) -> Self {
        match dim {
            1 => Self::sixth_order(dim, n, h, 0),
            3 => Self::sixth_order(dim, n, h, 1),
            _ => Self::flux_form(dim, n, h),
        }
    }

    fn sixth_order(dim: usize, n: usize, h: f64, first: usize) -> Self {
        let m = n - first;
        let r = |i: usize| i as f64 * h;
        let mass: Vec<f64> = (first..n)
            .map(|i| if dim == 1 { if i == 0 { h } else { 2.0 * h } } else { 4.0 * PI * r(i) * r(i) * h })
            .collect();
        let mut k = SymBand::zeros(m, 3);
        let odd_origin = dim == 3;
        for i in first..n {
            let mut row = [0.0f64; 7];
            for off in -3i64..=3 {
                let c = C6[off.unsigned_abs() as usize];
                let idx = i as i64 + off;
                let (j, sign) = if idx < 0 {
                    ((-idx) as usize, if odd_origin { -1.0 } else { 1.0 })
                } else if idx as usize > n {
                    (2 * n - idx as usize, -1.0)
                } else {
                    (idx as usize, 1.0)
                };
                if j == n || (odd_origin && j == 0) {
                    continue;
                }
                row[(j as i64 - i as i64 + 3) as usize] += sign * c;
            }
            for (s, &t) in row.iter().enumerate() {
                let j = i as i64 + s as i64 - 3;
                if t == 0.0 || j < i as i64 {
                    continue;
                }
                let j = j as usize;
                let kij = if dim == 1 {
                    -mass[i - first] * t / (h * h)
                } else {
                    -4.0 * PI * h * r(i) * r(j) * t / (h * h)
                };
                k.add(j - first, i - first, kij);
            }
        }
        Laplacian { n, first, k, mass, dim, h }
    }

    fn flux_form(dim: usize, n: usize, h: f64) -> Self {
        let omega = crate::grid::sphere_area(dim);
        let rho = |i: usize| omega * ((i as f64 + 0.5) * h).powi(dim as i32 - 1);
        let mass: Vec<f64> = (0..n)
            .map(|i| {
                if i == 0 {
                    omega * (0.5 * h).powi(dim as i32) / dim as f64
                } else {
                    omega * (i as f64 * h).powi(dim as i32 - 1) * h
                }
            })
            .collect();
        let mut k = SymBand::zeros(n, 1);
        for i in 0..n {
            let c = rho(i) / h;
            k.add(i, i, c);
            if i + 1 < n {
                k.add(i + 1, i + 1, c);
                k.add(i + 1, i, -c);
            }
        }
        Laplacian { n, first: 0, k, mass, dim, h }
    }

    /// Index of the first active node (1 when the origin value is slaved).
    pub fn first(&self) -> usize {
        self.first
    }

    /// Number of active (unknown) nodes.
    pub fn active(&self) -> usize {
        self.n - self.first
    }

    pub fn stiffness(&self) -> &SymBand {
        &self.k
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    /// `M^{-1/2} K M^{-1/2}`, the matrix of `-Δ_h` in mass-weighted coordinates.
    pub fn hat(&self) -> SymBand {
        let s: Vec<f64> = self.mass.iter().map(|m| 1.0 / m.sqrt()).collect();
        self.k.scale_sym(&s)
    }

    /// Value at the origin implied by the active nodes (even extrapolation).
    pub fn origin_value<T>(&self, f: &[T]) -> T
    where
        T: crate::band::Scalar,
    {
        if self.first == 0 {
            return f[0];
        }
        // Lagrange in s = r² through s = 1, 4, 9, 16 evaluated at 0.
        const B: [f64; 4] = [8.0 / 5.0, -4.0 / 5.0, 8.0 / 35.0, -1.0 / 35.0];
        (0..4).fold(T::zero(), |acc, k| acc + f[k + 1] * B[k])
    }

    /// Overwrites slaved nodes: the origin (N = 3) and the Dirichlet node.
    pub fn enforce<T: crate::band::Scalar>(&self, f: &mut [T]) {
        f[self.n] = T::zero();
        if self.first == 1 {
            f[0] = self.origin_value(f);
        }
    }

    /// Δ_h on a full node vector; origin from the regular expansion, 0 at rmax.
    pub fn apply<T: crate::band::Scalar>(&self, f: &[T]) -> Vec<T> {
        let act = &f[self.first..self.n];
        let kf = self.k.matvec(act);
        let mut out = vec![T::zero(); self.n + 1];
        for (i, v) in kf.into_iter().enumerate() {
            out[i + self.first] = -(v * (1.0 / self.mass[i]));
        }
        if self.first == 1 {
            let get = |j: usize| if j >= self.n { T::zero() } else { f[j] };
            let mut s = f[0] * C6[0];
            for j in 1..=3 {
                s = s + get(j) * (2.0 * C6[j]);
            }
            out[0] = s * (self.dim as f64 / (self.h * self.h));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stiffness_is_positive_definite_on_small_grid() {
        for dim in [1, 2, 3, 5] {
            let lap = Laplacian::new(dim, 40, 0.1);
            let d = lap.stiffness().to_dense();
            let chol = d.llt(faer::Side::Lower);
            assert!(chol.is_ok(), "dim {dim}");
        }
    }

    #[test]
    fn origin_extrapolation_exact_on_even_sextic() {
        let lap = Laplacian::new(3, 50, 0.1);
        let f: Vec<f64> = (0..=50)
            .map(|i| {
                let r = i as f64 * 0.1;
                2.0 - r * r + 0.5 * r.powi(4) - 0.1 * r.powi(6)
            })
            .collect();
        assert!((lap.origin_value(&f) - 2.0).abs() < 1e-12);
    }
}
