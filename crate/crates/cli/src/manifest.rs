//! Run manifest: written when a run starts, rewritten when it ends.

use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use threshold_core::config::RunConfig;
use threshold_core::io::Report;
use threshold_core::linearized::SpectrumData;
use threshold_core::{GroundProfile, LabError, Result};

pub const FILE: &str = "manifest.txt";
pub const RESOLVED: &str = "config.resolved.toml";
const ECHO_MARK: &str = "----- config as given -----";
const RESOLVED_MARK: &str = "----- config resolved -----";

pub struct Manifest {
    path: PathBuf,
    head: Report,
    body: Report,
    raw: String,
    resolved: String,
    finished: bool,
}

fn digest(chunks: &[&[f64]]) -> String {
    let mut h = Sha256::new();
    for c in chunks {
        for v in *c {
            h.update(v.to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

impl Manifest {
    pub fn begin(dir: &Path, subcommand: &str, raw: &str, cfg: &RunConfig) -> Result<Manifest> {
        let resolved = cfg.to_toml();
        let p = dir.join(RESOLVED);
        std::fs::write(&p, &resolved).map_err(|e| LabError::Io(format!("{}: {e}", p.display())))?;
        let mut head = Report::new();
        head.text("artifact", env!("CARGO_PKG_NAME"))
            .text("artifact_version", env!("CARGO_PKG_VERSION"))
            .text("subcommand", subcommand);
        let m = Manifest {
            path: dir.join(FILE),
            head,
            body: Report::new(),
            raw: raw.to_string(),
            resolved,
            finished: false,
        };
        m.write("running")?;
        Ok(m)
    }

    fn write(&self, status: &str) -> Result<()> {
        let mut text = self.head.render();
        text.push_str(&format!("status={status}\n"));
        text.push_str(&self.body.render());
        text.push_str(ECHO_MARK);
        text.push('\n');
        text.push_str(&self.raw);
        if !self.raw.is_empty() && !self.raw.ends_with('\n') {
            text.push('\n');
        }
        text.push_str(RESOLVED_MARK);
        text.push('\n');
        text.push_str(&self.resolved);
        std::fs::write(&self.path, text).map_err(|e| LabError::Io(format!("{}: {e}", self.path.display())))
    }

    pub fn record_ground(&mut self, gp: &GroundProfile) {
        let g = &gp.grid;
        let shape = [g.dim() as f64, g.rmax(), g.n() as f64];
        self.body
            .text("grid.sha256", digest(&[&shape, g.nodes()]))
            .text("ground.sha256", digest(&[&gp.q_values(), &gp.q_ode]))
            .num("ground.q0", gp.q0)
            .num("ground.c_q", gp.c_q)
            .num("ground.shooting_a", gp.shooting_a);
    }

    pub fn record_spectrum(&mut self, spec: &SpectrumData, b_norm: f64) {
        self.body
            .num("spectrum.e0", spec.e0)
            .num("spectrum.b_yplus_yminus", b_norm)
            .text("spectrum.sign_convention", "(Q,Y1)_H1 > 0")
            .num("spectrum.y1_l2", spec.y1.norms(2.0).l2)
            .num("spectrum.y2_l2", spec.y2.norms(2.0).l2);
    }

    pub fn timing(&mut self, key: &str, seconds: f64) {
        self.body.num(&format!("timing.{key}"), seconds);
    }

    pub fn steps(&mut self, n: usize) {
        self.body.int("steps", n);
    }

    pub fn finish(&mut self, wall_clock: f64, ledger: &[(String, bool)]) -> Result<()> {
        self.body.num("timing.wall_clock_seconds", wall_clock);
        for (name, pass) in ledger {
            self.body.flag(&format!("check.{name}"), *pass);
        }
        let failed = ledger.iter().any(|(_, p)| !p);
        self.finished = true;
        self.write(if failed { "complete_with_failures" } else { "complete" })
    }
}

impl Drop for Manifest {
    fn drop(&mut self) {
        if !self.finished {
            let _ = self.write("aborted");
        }
    }
}
