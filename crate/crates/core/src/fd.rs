//! Finite-difference weights on arbitrary nodes (Fornberg's recursion).

/// Weights `w[m][j]` approximating the m-th derivative at `x0` from values at `xs`.
pub fn fornberg(x0: f64, xs: &[f64], max_order: usize) -> Vec<Vec<f64>> {
    let n = xs.len();
    let mut c = vec![vec![0.0; n]; max_order + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    for i in 1..n {
        let mn = i.min(max_order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Barycentric-free Lagrange interpolation through the given points.
pub fn lagrange(x: f64, xs: &[f64], ys: &[f64]) -> f64 {
    let mut s = 0.0;
    for (k, (&xk, &yk)) in xs.iter().zip(ys).enumerate() {
        let mut l = 1.0;
        for (j, &xj) in xs.iter().enumerate() {
            if j != k {
                l *= (x - xj) / (xk - xj);
            }
        }
        s += l * yk;
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centered_second_derivative_sixth_order() {
        let xs: Vec<f64> = (-3..=3).map(|k| k as f64).collect();
        let w = fornberg(0.0, &xs, 2);
        let expect = [1.0 / 90.0, -3.0 / 20.0, 1.5, -49.0 / 18.0, 1.5, -3.0 / 20.0, 1.0 / 90.0];
        for (a, b) in w[2].iter().zip(expect) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn one_sided_first_derivative_is_exact_on_polynomials() {
        let xs: Vec<f64> = (0..7).map(|k| k as f64 * 0.1).collect();
        let w = fornberg(0.0, &xs, 1);
        let d: f64 = xs.iter().zip(&w[1]).map(|(x, c)| c * (2.0 * x + x.powi(6))).sum();
        assert!((d - 2.0).abs() < 1e-9);
    }

    #[test]
    fn lagrange_reproduces_cubic() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| x * x * x - x).collect();
        assert!((lagrange(1.5, &xs, &ys) - (1.5f64.powi(3) - 1.5)).abs() < 1e-13);
    }
}
