//! Run configuration: TOML with dotted sections, strict keys, explicit defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::evolution::{EvolverConfig, Splitting, Sponge};
use crate::ground::{check_intercritical, GroundOptions};

/// Environment variables `TLAB_<SECTION>_<KEY>` override `section.key`.
pub const ENV_PREFIX: &str = "TLAB_";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub grid: GridConfig,
    pub ground: GroundConfig,
    pub spectrum: SpectrumConfig,
    pub evolution: EvolutionConfig,
    pub experiment: ExperimentConfig,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    #[serde(rename = "N")]
    pub dim: usize,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub rmax: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GroundConfig {
    pub bracket_lo: f64,
    pub bracket_hi: f64,
    pub max_bisect: usize,
    pub match_threshold: f64,
    pub residual_tol: f64,
    pub identity_tol: f64,
    pub tail_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumConfig {
    pub residual_tol: f64,
    pub normalization_tol: f64,
    pub negative_direction_tol: f64,
    pub phi_tol: f64,
    pub coercivity: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolutionConfig {
    pub dt: f64,
    pub t_end: f64,
    pub min_dt: f64,
    pub adapt_trigger: f64,
    pub sample_every: f64,
    pub snapshot_every: usize,
    pub sponge: bool,
    pub sponge_strength: f64,
    pub sponge_width: f64,
    /// "frozen" or "standard".
    pub splitting: String,
    pub blowup_factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    #[serde(rename = "A")]
    pub a: f64,
    pub k: usize,
    pub delta: f64,
    /// Backward horizon; negative means t0 + 5.
    pub t_back: f64,
    pub sweep_mg: Vec<f64>,
    pub sweep_horizon: f64,
    /// Initial datum for `evolve`: "", "q", "scaled:<c>" or "threshold:<mg>".
    pub initial: String,
    /// Relative tolerance on the forward convergence rate of a special solution.
    pub rate_tol: f64,
    /// Residual of order k must decay at least this fraction of (k+1)·e0.
    pub residual_rate_factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: String,
    pub deterministic: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { dim: 3, p: 3.0 }
    }
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { rmax: 30.0, n: 3000 }
    }
}

impl Default for GroundConfig {
    fn default() -> Self {
        let o = GroundOptions::default();
        GroundConfig {
            bracket_lo: o.bracket.0,
            bracket_hi: o.bracket.1,
            max_bisect: o.max_bisect,
            match_threshold: o.match_threshold,
            residual_tol: o.residual_tol,
            identity_tol: 1e-6,
            tail_tol: 1e-3,
        }
    }
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        SpectrumConfig {
            residual_tol: 1e-6,
            normalization_tol: 1e-8,
            negative_direction_tol: 1e-4,
            phi_tol: 1e-6,
            coercivity: true,
        }
    }
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        EvolutionConfig {
            dt: 1e-3,
            t_end: 5.0,
            min_dt: 1e-3 / 32.0,
            adapt_trigger: 1.2,
            sample_every: 0.01,
            snapshot_every: 0,
            sponge: false,
            sponge_strength: 5.0,
            sponge_width: 0.15,
            splitting: "frozen".into(),
            blowup_factor: 3.0,
        }
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            a: 1.0,
            k: 3,
            delta: 0.1,
            t_back: -1.0,
            sweep_mg: vec![0.95, 1.05],
            sweep_horizon: 3.0,
            initial: String::new(),
            rate_tol: 0.1,
            residual_rate_factor: 0.95,
        }
    }
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: "out".into(), deterministic: true }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelConfig::default(),
            grid: GridConfig::default(),
            ground: GroundConfig::default(),
            spectrum: SpectrumConfig::default(),
            evolution: EvolutionConfig::default(),
            experiment: ExperimentConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

fn range(key: &str, ok: bool, value: impl std::fmt::Display, need: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(LabError::Config(format!("{key} = {value} out of range: {need}")))
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let m = &self.model;
        range("model.N", m.dim >= 1, m.dim, "N >= 1")?;
        check_intercritical(m.dim, m.p).map_err(|e| LabError::Config(format!("model.p = {}: {e}", m.p)))?;
        let g = &self.grid;
        range("grid.rmax", g.rmax > 0.0 && g.rmax.is_finite(), g.rmax, "positive")?;
        range("grid.n", g.n >= 16, g.n, "at least 16")?;
        let gr = &self.ground;
        range("ground.bracket_lo", gr.bracket_lo > 0.0, gr.bracket_lo, "positive")?;
        range("ground.bracket_hi", gr.bracket_hi > gr.bracket_lo, gr.bracket_hi, "above bracket_lo")?;
        range("ground.identity_tol", gr.identity_tol > 0.0, gr.identity_tol, "positive")?;
        let e = &self.evolution;
        range("evolution.dt", e.dt > 0.0, e.dt, "positive")?;
        range("evolution.min_dt", e.min_dt > 0.0 && e.min_dt <= e.dt, e.min_dt, "in (0, dt]")?;
        range("evolution.adapt_trigger", e.adapt_trigger > 1.0, e.adapt_trigger, "above 1")?;
        range("evolution.sample_every", e.sample_every > 0.0, e.sample_every, "positive")?;
        range("evolution.sponge_strength", e.sponge_strength >= 0.0, e.sponge_strength, "non-negative")?;
        range("evolution.sponge_width", e.sponge_width > 0.0 && e.sponge_width < 1.0, e.sponge_width, "in (0, 1)")?;
        range(
            "evolution.splitting",
            matches!(e.splitting.as_str(), "frozen" | "standard"),
            &e.splitting,
            "\"frozen\" or \"standard\"",
        )?;
        let x = &self.experiment;
        range("experiment.k", x.k >= 1, x.k, "at least 1")?;
        range("experiment.delta", x.delta > 0.0 && x.delta <= 0.2, x.delta, "in (0, 0.2]")?;
        range("experiment.residual_rate_factor", x.residual_rate_factor > 0.0 && x.residual_rate_factor <= 1.0, x.residual_rate_factor, "in (0, 1]")?;
        range("experiment.sweep_horizon", x.sweep_horizon > 0.0, x.sweep_horizon, "positive")?;
        if !x.initial.is_empty() {
            parse_initial(&x.initial)?;
        }
        Ok(())
    }

    pub fn ground_options(&self) -> GroundOptions {
        GroundOptions {
            bracket: (self.ground.bracket_lo, self.ground.bracket_hi),
            max_bisect: self.ground.max_bisect,
            match_threshold: self.ground.match_threshold,
            residual_tol: self.ground.residual_tol,
            ..GroundOptions::default()
        }
    }

    pub fn evolver(&self) -> EvolverConfig {
        let e = &self.evolution;
        let mut c = EvolverConfig::new(self.model.p, e.dt, e.t_end);
        c.min_dt = e.min_dt;
        c.adapt_trigger = e.adapt_trigger;
        c.sample_every = e.sample_every;
        c.snapshot_every = e.snapshot_every;
        c.blowup_factor = e.blowup_factor;
        c.sponge = if e.sponge { Sponge::On { strength: e.sponge_strength, width: e.sponge_width } } else { Sponge::Off };
        c.splitting = if e.splitting == "standard" { Splitting::Standard } else { Splitting::Frozen };
        c
    }

    /// The fully resolved configuration as TOML (every default explicit).
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialDatum {
    Q,
    Scaled(f64),
    Threshold(f64),
}

pub fn parse_initial(s: &str) -> Result<InitialDatum> {
    let bad = || LabError::Config(format!("experiment.initial = {s:?}: expected q, scaled:<c> or threshold:<mg>"));
    if s == "q" {
        return Ok(InitialDatum::Q);
    }
    let (kind, val) = s.split_once(':').ok_or_else(bad)?;
    let v: f64 = val.trim().parse().map_err(|_| bad())?;
    match kind {
        "scaled" => Ok(InitialDatum::Scaled(v)),
        "threshold" if v > 0.0 => Ok(InitialDatum::Threshold(v)),
        _ => Err(bad()),
    }
}

fn env_value(raw: &str) -> toml::Value {
    let probe = format!("v = {raw}");
    match probe.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

const SECTIONS: [&str; 7] = ["model", "grid", "ground", "spectrum", "evolution", "experiment", "output"];

fn apply_overrides(table: &mut toml::Table, vars: &[(String, String)]) -> Result<()> {
    for (name, raw) in vars {
        let Some(rest) = name.strip_prefix(ENV_PREFIX) else { continue };
        let lower = rest.to_ascii_lowercase();
        let Some((section, key)) = SECTIONS
            .iter()
            .find_map(|s| lower.strip_prefix(&format!("{s}_")).map(|k| (*s, k.to_string())))
        else {
            return Err(LabError::Config(format!("{name}: no such section")));
        };
        let key = match (section, key.as_str()) {
            ("model", "n") => "N".to_string(),
            ("experiment", "a") => "A".to_string(),
            _ => key,
        };
        let sec = table
            .entry(section.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        let Some(sec) = sec.as_table_mut() else {
            return Err(LabError::Config(format!("{section} is not a section")));
        };
        sec.insert(key, env_value(raw));
    }
    Ok(())
}

/// Strict parse of config text plus overrides; unknown keys, duplicates and range violations are errors.
pub fn parse_config(text: &str, overrides: &[(String, String)]) -> Result<RunConfig> {
    let cfg_err = |e: toml::de::Error| LabError::Config(e.to_string());
    // Parsing the text on its own first keeps line/column diagnostics.
    let from_text: RunConfig = toml::from_str(text).map_err(cfg_err)?;
    if overrides.is_empty() {
        from_text.validate()?;
        return Ok(from_text);
    }
    let mut table: toml::Table = text.parse().map_err(cfg_err)?;
    apply_overrides(&mut table, overrides)?;
    let cfg: RunConfig = toml::Value::Table(table)
        .try_into()
        .map_err(cfg_err)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn env_overrides() -> Vec<(String, String)> {
    let mut v: Vec<(String, String)> = std::env::vars().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect();
    v.sort();
    v
}

/// Reads and parses a config file with environment overrides; returns the config and the raw text.
pub fn load_config(path: &Path) -> Result<(RunConfig, String)> {
    let text = std::fs::read_to_string(path).map_err(|e| LabError::Config(format!("{}: {e}", path.display())))?;
    let cfg = parse_config(&text, &env_overrides())?;
    Ok((cfg, text))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_gets_defaults() {
        let c = parse_config("[model]\nN = 3\np = 3.0\n", &[]).unwrap();
        assert_eq!(c, RunConfig::default());
        assert!(c.to_toml().contains("sample_every"));
    }

    #[test]
    fn dotted_keys_work() {
        let c = parse_config("model.N = 1\nmodel.p = 7.0\ngrid.n = 1500\n", &[]).unwrap();
        assert_eq!(c.model.dim, 1);
        assert_eq!(c.grid.n, 1500);
    }

    #[test]
    fn below_intercritical_is_range_error() {
        let e = parse_config("[model]\nN = 3\np = 2.0\n", &[]).unwrap_err();
        assert!(matches!(e, LabError::Config(_)));
        assert!(e.to_string().contains("model.p"));
    }

    #[test]
    fn duplicate_and_unknown_keys_rejected() {
        assert!(parse_config("[model]\np = 3.0\np = 3.5\n", &[]).is_err());
        let e = parse_config("[grid]\nrmx = 30.0\n", &[]).unwrap_err();
        assert!(e.to_string().contains("rmx"));
    }

    #[test]
    fn overrides_apply() {
        let o = vec![("TLAB_GRID_N".to_string(), "1200".to_string()), ("TLAB_MODEL_N".into(), "1".into()), ("TLAB_MODEL_P".into(), "7".into())];
        let c = parse_config("", &o).unwrap();
        assert_eq!((c.grid.n, c.model.dim, c.model.p), (1200, 1, 7.0));
        assert!(parse_config("", &[("TLAB_NOPE_X".into(), "1".into())]).is_err());
    }

    #[test]
    fn round_trips_through_toml() {
        let c = RunConfig::default();
        assert_eq!(parse_config(&c.to_toml(), &[]).unwrap(), c);
    }

    #[test]
    fn initial_specs() {
        assert_eq!(parse_initial("q").unwrap(), InitialDatum::Q);
        assert_eq!(parse_initial("scaled:1.1").unwrap(), InitialDatum::Scaled(1.1));
        assert!(parse_initial("threshold:-1").is_err());
        assert!(parse_initial("nope").is_err());
    }
}
