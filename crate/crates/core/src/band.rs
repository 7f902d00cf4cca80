//! Banded matrices: symmetric storage for the discrete operators and an LU
//! factorization with partial pivoting for general banded systems.

use num_complex::Complex64;
use num_traits::{One, Zero};
use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::error::{LabError, Result};

pub trait Scalar:
    Copy
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Mul<f64, Output = Self>
    + From<f64>
    + Send
    + Sync
    + 'static
{
    fn modulus(self) -> f64;
}

impl Scalar for f64 {
    fn modulus(self) -> f64 {
        self.abs()
    }
}

impl Scalar for Complex64 {
    fn modulus(self) -> f64 {
        self.norm()
    }
}

/// Symmetric band matrix, lower diagonals stored: `diag[d][i] = A[i+d][i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymBand {
    n: usize,
    diag: Vec<Vec<f64>>,
}

impl SymBand {
    pub fn zeros(n: usize, kd: usize) -> Self {
        let diag = (0..=kd).map(|d| vec![0.0; n.saturating_sub(d)]).collect();
        SymBand { n, diag }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kd(&self) -> usize {
        self.diag.len() - 1
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        let d = hi - lo;
        if d > self.kd() {
            0.0
        } else {
            self.diag[d][lo]
        }
    }

    /// Adds `v` to entry (i, j) and, off the diagonal, to its mirror.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        let d = hi - lo;
        assert!(d <= self.kd(), "entry outside band");
        self.diag[d][lo] += v;
    }

    pub fn add_diagonal(&mut self, v: &[f64]) {
        for (a, b) in self.diag[0].iter_mut().zip(v) {
            *a += b;
        }
    }

    /// Congruence `D A D` with diagonal `D`.
    pub fn scale_sym(&self, s: &[f64]) -> SymBand {
        let mut out = self.clone();
        for (d, row) in out.diag.iter_mut().enumerate() {
            for (i, a) in row.iter_mut().enumerate() {
                *a *= s[i] * s[i + d];
            }
        }
        out
    }

    pub fn matvec<T: Scalar>(&self, x: &[T]) -> Vec<T> {
        let n = self.n;
        let mut y = vec![T::zero(); n];
        for i in 0..n {
            y[i] = x[i] * self.diag[0][i];
        }
        for d in 1..=self.kd() {
            for (i, &a) in self.diag[d].iter().enumerate() {
                y[i + d] = y[i + d] + x[i] * a;
                y[i] = y[i] + x[i + d] * a;
            }
        }
        y
    }

    pub fn to_general(&self) -> Band {
        let kd = self.kd();
        let mut b = Band::zeros(self.n, kd, kd);
        for i in 0..self.n {
            let lo = i.saturating_sub(kd);
            let hi = (i + kd).min(self.n - 1);
            for j in lo..=hi {
                b.set(i, j, self.get(i, j));
            }
        }
        b
    }

    pub fn to_dense(&self) -> faer::Mat<f64> {
        faer::Mat::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }
}

/// General band matrix in row form: row `i` holds columns `i-kl ..= i+ku`.
#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    n: usize,
    kl: usize,
    ku: usize,
    rows: Vec<f64>,
}

impl Band {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        Band {
            n,
            kl,
            ku,
            rows: vec![0.0; n * (kl + ku + 1)],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        if j + self.kl < i || j > i + self.ku {
            None
        } else {
            Some(i * (self.kl + self.ku + 1) + (j + self.kl - i))
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.rows[s])
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j).expect("entry outside band");
        self.rows[s] = v;
    }

    pub fn add_diagonal(&mut self, c: f64) {
        for i in 0..self.n {
            let s = self.slot(i, i).unwrap();
            self.rows[s] += c;
        }
    }

    pub fn matvec<T: Scalar>(&self, x: &[T]) -> Vec<T> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi).fold(T::zero(), |acc, j| acc + x[j] * self.get(i, j))
            })
            .collect()
    }

    /// Product of two band matrices; bandwidths add.
    pub fn mul(&self, other: &Band) -> Band {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = Band::zeros(n, self.kl + other.kl, self.ku + other.ku);
        for i in 0..n {
            let klo = i.saturating_sub(self.kl);
            let khi = (i + self.ku).min(n - 1);
            for k in klo..=khi {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                let jlo = k.saturating_sub(other.kl);
                let jhi = (k + other.ku).min(n - 1);
                for j in jlo..=jhi {
                    let s = out.slot(i, j).unwrap();
                    out.rows[s] += a * other.get(k, j);
                }
            }
        }
        out
    }

    pub fn to_complex(&self) -> CBand {
        CBand {
            n: self.n,
            kl: self.kl,
            ku: self.ku,
            rows: self.rows.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
    }
}

/// Complex band matrix in the same row layout as [`Band`].
#[derive(Debug, Clone, PartialEq)]
pub struct CBand {
    n: usize,
    kl: usize,
    ku: usize,
    rows: Vec<Complex64>,
}

impl CBand {
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        if j + self.kl < i || j > i + self.ku {
            Complex64::zero()
        } else {
            self.rows[i * (self.kl + self.ku + 1) + (j + self.kl - i)]
        }
    }

    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi).fold(Complex64::zero(), |acc, j| acc + x[j] * self.get(i, j))
            })
            .collect()
    }

    pub fn map_entries(&self, f: impl Fn(usize, usize, Complex64) -> Complex64) -> CBand {
        let mut out = self.clone();
        let w = self.kl + self.ku + 1;
        for i in 0..self.n {
            for s in 0..w {
                if let Some(j) = (i + s).checked_sub(self.kl) {
                    if j < self.n {
                        out.rows[i * w + s] = f(i, j, self.rows[i * w + s]);
                    }
                }
            }
        }
        out
    }
}

/// LU factors of a band matrix (row pivoting, fill-in widens U to kl+ku).
#[derive(Debug, Clone)]
pub struct BandLu<T> {
    n: usize,
    kl: usize,
    ku: usize,
    // Row-major, row i holds columns i-kl ..= i+kl+ku.
    a: Vec<T>,
    piv: Vec<usize>,
    min_pivot: f64,
    max_pivot: f64,
}

impl<T: Scalar> BandLu<T> {
    fn width(&self) -> usize {
        2 * self.kl + self.ku + 1
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.width() + (j + self.kl - i)
    }

    fn factor_from(n: usize, kl: usize, ku: usize, get: impl Fn(usize, usize) -> T) -> Result<Self> {
        let mut lu = BandLu {
            n,
            kl,
            ku,
            a: Vec::new(),
            piv: vec![0; n],
            min_pivot: f64::INFINITY,
            max_pivot: 0.0,
        };
        lu.a = vec![T::zero(); n * lu.width()];
        for i in 0..n {
            let lo = i.saturating_sub(kl);
            let hi = (i + ku).min(n - 1);
            for j in lo..=hi {
                let k = lu.idx(i, j);
                lu.a[k] = get(i, j);
            }
        }
        let uw = kl + ku;
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = lu.a[lu.idx(k, k)].modulus();
            for i in k + 1..=last {
                let v = lu.a[lu.idx(i, k)].modulus();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            lu.piv[k] = p;
            if best == 0.0 || !best.is_finite() {
                return Err(LabError::SingularSystem(format!("zero pivot at row {k}")));
            }
            lu.min_pivot = lu.min_pivot.min(best);
            lu.max_pivot = lu.max_pivot.max(best);
            let cmax = (k + uw).min(n - 1);
            if p != k {
                // Row p may only reach column p+ku before elimination; slots past it are zero.
                for j in k..=cmax {
                    let (ik, ip) = (lu.idx(k, j), lu.idx(p, j));
                    lu.a.swap(ik, ip);
                }
            }
            let pivot = lu.a[lu.idx(k, k)];
            for i in k + 1..=last {
                let ii = lu.idx(i, k);
                let m = lu.a[ii] / pivot;
                lu.a[ii] = m;
                if m.modulus() == 0.0 {
                    continue;
                }
                for j in k + 1..=cmax {
                    let kj = lu.a[lu.idx(k, j)];
                    let ij = lu.idx(i, j);
                    lu.a[ij] = lu.a[ij] - m * kj;
                }
            }
        }
        Ok(lu)
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.n;
        let mut x = b.to_vec();
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                x.swap(k, p);
            }
            let xk = x[k];
            let last = (k + self.kl).min(n - 1);
            for i in k + 1..=last {
                x[i] = x[i] - self.a[self.idx(i, k)] * xk;
            }
        }
        let uw = self.kl + self.ku;
        for k in (0..n).rev() {
            let mut s = x[k];
            let cmax = (k + uw).min(n - 1);
            for j in k + 1..=cmax {
                s = s - self.a[self.idx(k, j)] * x[j];
            }
            x[k] = s / self.a[self.idx(k, k)];
        }
        x
    }

    /// Ratio of smallest to largest pivot modulus: a cheap singularity flag.
    pub fn pivot_ratio(&self) -> f64 {
        self.min_pivot / self.max_pivot
    }
}

impl BandLu<f64> {
    pub fn factor(m: &Band) -> Result<Self> {
        Self::factor_from(m.n, m.kl, m.ku, |i, j| m.get(i, j))
    }
}

impl BandLu<Complex64> {
    pub fn factor_complex(m: &CBand) -> Result<Self> {
        Self::factor_from(m.n, m.kl, m.ku, |i, j| m.get(i, j))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_band(n: usize, kl: usize, ku: usize) -> Band {
        let mut b = Band::zeros(n, kl, ku);
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                let v = ((i * 7 + j * 13) % 11) as f64 - 5.0 + 0.37 * ((i + 2 * j) as f64).sin();
                b.set(i, j, if i == j { v * 0.1 } else { v });
            }
        }
        b
    }

    #[test]
    fn lu_solves_nonsymmetric_band_needing_pivots() {
        let b = test_band(40, 3, 2);
        let x: Vec<f64> = (0..40).map(|i| (i as f64 * 0.3).sin()).collect();
        let rhs = b.matvec(&x);
        let lu = BandLu::factor(&b).unwrap();
        let got = lu.solve(&rhs);
        for (g, e) in got.iter().zip(&x) {
            assert!((g - e).abs() < 1e-10, "{g} vs {e}");
        }
    }

    #[test]
    fn complex_lu_round_trip() {
        let b = test_band(30, 2, 2).to_complex();
        let b = b.map_entries(|i, j, v| if i == j { v + Complex64::new(0.0, 1.0) } else { v });
        let x: Vec<Complex64> = (0..30).map(|i| Complex64::new(i as f64, 1.0 - i as f64)).collect();
        let rhs = b.matvec(&x);
        let lu = BandLu::factor_complex(&b).unwrap();
        let got = lu.solve(&rhs);
        for (g, e) in got.iter().zip(&x) {
            assert!((g - e).norm() < 1e-9);
        }
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let b = Band::zeros(5, 1, 1);
        assert!(matches!(BandLu::factor(&b), Err(LabError::SingularSystem(_))));
    }

    #[test]
    fn band_product_matches_dense() {
        let a = test_band(12, 1, 2);
        let b = test_band(12, 2, 1);
        let c = a.mul(&b);
        for i in 0..12 {
            for j in 0..12 {
                let e: f64 = (0..12).map(|k| a.get(i, k) * b.get(k, j)).sum();
                assert!((c.get(i, j) - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn symband_matvec_is_symmetric() {
        let mut s = SymBand::zeros(10, 2);
        for i in 0..10 {
            s.add(i, i, 2.0 + i as f64);
            if i + 1 < 10 {
                s.add(i + 1, i, -1.0);
            }
            if i + 2 < 10 {
                s.add(i, i + 2, 0.25);
            }
        }
        let g = s.to_general();
        let x: Vec<f64> = (0..10).map(|i| i as f64 - 3.0).collect();
        assert_eq!(s.matvec(&x), g.matvec(&x));
    }
}
