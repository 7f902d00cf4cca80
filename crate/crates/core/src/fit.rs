//! Least-squares helpers.

/// Slope of the least-squares line through the points.
pub fn slope(pts: &[(f64, f64)]) -> f64 {
    line(pts).0
}

/// (slope, intercept) of the least-squares line.
pub fn line(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let s = sxy / sxx;
    (s, my - s * mx)
}

#[cfg(test)]
mod tests {
    #[test]
    fn exact_line() {
        let pts: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, 3.0 - 2.0 * i as f64)).collect();
        let (s, b) = super::line(&pts);
        assert!((s + 2.0).abs() < 1e-14 && (b - 3.0).abs() < 1e-14);
    }
}
