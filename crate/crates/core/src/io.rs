//! Text formats: field CSV snapshots and flat key=value reports.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{LabError, Result};
use crate::grid::{Field, Grid};

/// Seventeen significant digits, enough to round-trip any f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn field_csv(f: &Field) -> String {
    let mut s = String::from("r,re,im\n");
    for (r, z) in f.grid().nodes().iter().zip(f.values()) {
        let _ = writeln!(s, "{},{},{}", fmt_f64(*r), fmt_f64(z.re), fmt_f64(z.im));
    }
    s
}

pub fn write_field_csv(path: &Path, f: &Field) -> Result<()> {
    fs::write(path, field_csv(f)).map_err(|e| LabError::Io(format!("{}: {e}", path.display())))
}

/// Reads a snapshot written by [`write_field_csv`] onto `grid`.
pub fn read_field_csv(path: &Path, grid: &Grid) -> Result<Field> {
    let text = fs::read_to_string(path).map_err(|e| LabError::Io(format!("{}: {e}", path.display())))?;
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("r,re,im") {
        return Err(LabError::Io(format!("{}: missing header r,re,im", path.display())));
    }
    let mut vals = Vec::with_capacity(grid.len());
    for (ln, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| LabError::Io(format!("{}:{}: {e}", path.display(), ln + 2)))
        };
        if cols.len() != 3 {
            return Err(LabError::Io(format!("{}:{}: expected 3 columns", path.display(), ln + 2)));
        }
        let r = parse(cols[0])?;
        let i = vals.len();
        if i >= grid.len() || (r - grid.nodes()[i]).abs() > 1e-9 * grid.rmax() {
            return Err(LabError::GridMismatch(format!("{}: node {i} does not match the grid", path.display())));
        }
        vals.push(Complex64::new(parse(cols[1])?, parse(cols[2])?));
    }
    Field::new(grid, vals, true, true)
}

/// Ordered key=value report.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    entries: Vec<(String, String)>,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num(&mut self, key: &str, v: f64) -> &mut Self {
        self.entries.push((key.to_string(), fmt_f64(v)));
        self
    }

    pub fn int(&mut self, key: &str, v: usize) -> &mut Self {
        self.entries.push((key.to_string(), v.to_string()));
        self
    }

    pub fn text(&mut self, key: &str, v: impl std::fmt::Display) -> &mut Self {
        self.entries.push((key.to_string(), v.to_string()));
        self
    }

    pub fn flag(&mut self, key: &str, pass: bool) -> &mut Self {
        self.text(key, if pass { "pass" } else { "fail" })
    }

    pub fn extend(&mut self, prefix: &str, other: &Report) -> &mut Self {
        for (k, v) in &other.entries {
            self.entries.push((format!("{prefix}{k}"), v.clone()));
        }
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.render()).map_err(|e| LabError::Io(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Report> {
        let mut r = Report::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| LabError::Io(format!("line {}: expected key=value", i + 1)))?;
            r.entries.push((k.to_string(), v.to_string()));
        }
        Ok(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    #[test]
    fn csv_round_trip_is_exact() {
        let g = make_grid(3, 5.0, 50).unwrap();
        let f = Field::from_fn(&g, |r| Complex64::new((-r).exp() / 3.0, r.sin() * 1e-7));
        let dir = std::env::temp_dir().join(format!("tl_io_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("f.csv");
        f.write_csv(&path).unwrap();
        let back = read_field_csv(&path, &g).unwrap();
        assert_eq!(back.values(), f.values());
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn report_render_parse() {
        let mut r = Report::new();
        r.num("a", 0.1).text("b", "x").flag("c", true);
        let back = Report::parse(&r.render()).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.get("a").unwrap().parse::<f64>().unwrap(), 0.1);
    }
}
