use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use threshold_core::approx::{build_vk, rate_times, residual_rate};
use threshold_core::config::{env_overrides, parse_config, parse_initial, InitialDatum, RunConfig};
use threshold_core::evolution::{classify_run, Evolver, Verdict};
use threshold_core::io::{fmt_f64, read_field_csv, write_field_csv, Report};
use threshold_core::linearized::{
    assemble, bilinear_b, coercivity_detail, compute_spectrum, linearized_energy_phi, negative_direction, LinearizedOps,
    SpectrumData, Subspace,
};
use threshold_core::modulation::{frames_csv, track, TrackEntry};
use threshold_core::special::{run_special, threshold_datum, threshold_sweep_with, SpecialRunSpec, SweepDatum};
use threshold_core::ground::{self, check_identities_tol};
use threshold_core::{make_grid, suite, Field, GroundProfile, LabError};

mod manifest;

use manifest::Manifest;

const EXIT_CHECK: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(name = "threshold-lab", version, about = "Threshold dynamics laboratory for the focusing radial NLS")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone, Debug)]
struct Common {
    /// TOML run configuration; defaults are used for anything it omits.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides output.dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Spatial dimension.
    #[arg(long = "N")]
    dim: Option<usize>,
    /// Nonlinearity exponent.
    #[arg(long)]
    p: Option<f64>,
    /// Grid nodes.
    #[arg(long)]
    n: Option<usize>,
    /// Outer radius.
    #[arg(long)]
    rmax: Option<f64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve for the ground state and check its identities.
    Ground(Common),
    /// Unstable eigenpair, normalization and coercivity.
    Spectrum(Common),
    /// Build the approximate special solution and measure its residual decay.
    Construct {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        a: Option<f64>,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Evolve an initial datum.
    Evolve {
        #[command(flatten)]
        common: Common,
        /// Initial datum as an r,re,im CSV on the run grid.
        #[arg(long, conflicts_with = "datum")]
        initial: Option<PathBuf>,
        /// Built-in datum: q, scaled:<c> or threshold:<mg>.
        #[arg(long)]
        datum: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        t_end: Option<f64>,
    },
    /// Special-solution experiment: forward convergence and backward verdict.
    Special {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        a: Option<f64>,
    },
    /// Forward/backward classification sweep over threshold data.
    Classify(Common),
    /// Modulation parameters for a directory of snapshots written by `evolve`.
    Modulate {
        #[command(flatten)]
        common: Common,
        /// Snapshot directory (defaults to <out>/snapshots).
        #[arg(long)]
        snapshots: Option<PathBuf>,
    },
    /// Full identity suite; exits 1 on any failure.
    Check(Common),
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Lab(LabError),
    Check(Vec<String>),
}

impl From<LabError> for Failure {
    fn from(e: LabError) -> Self {
        Failure::Lab(e)
    }
}

type Res<T> = std::result::Result<T, Failure>;

fn io_err(path: &Path, e: std::io::Error) -> Failure {
    Failure::Lab(LabError::Io(format!("{}: {e}", path.display())))
}

struct Ctx {
    cfg: RunConfig,
    out: PathBuf,
    manifest: Manifest,
    started: Instant,
}

fn resolve(common: &Common, name: &str, extra: &[(&str, String)]) -> Res<Ctx> {
    let raw = match &common.config {
        Some(p) => std::fs::read_to_string(p).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?,
        None => String::new(),
    };
    let mut ov = env_overrides();
    let mut push = |k: &str, v: String| ov.push((format!("TLAB_{k}"), v));
    if let Some(d) = common.dim {
        push("MODEL_N", d.to_string());
    }
    if let Some(p) = common.p {
        push("MODEL_P", format!("{p:?}"));
    }
    if let Some(n) = common.n {
        push("GRID_N", n.to_string());
    }
    if let Some(r) = common.rmax {
        push("GRID_RMAX", format!("{r:?}"));
    }
    if let Some(o) = &common.out {
        push("OUTPUT_DIR", format!("{:?}", o.display().to_string()));
    }
    for (k, v) in extra {
        push(k, v.clone());
    }
    let cfg = parse_config(&raw, &ov).map_err(|e| match e {
        LabError::Config(m) => Failure::Usage(format!("config: {m}")),
        other => Failure::Lab(other),
    })?;
    let out = PathBuf::from(&cfg.output.dir);
    std::fs::create_dir_all(&out).map_err(|e| io_err(&out, e))?;
    let manifest = Manifest::begin(&out, name, &raw, &cfg)?;
    Ok(Ctx { cfg, out, manifest, started: Instant::now() })
}

impl Ctx {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn write_text(&self, name: &str, text: &str) -> Res<()> {
        let p = self.path(name);
        std::fs::write(&p, text).map_err(|e| io_err(&p, e))
    }

    fn subdir(&self, name: &str) -> Res<PathBuf> {
        let p = self.path(name);
        std::fs::create_dir_all(&p).map_err(|e| io_err(&p, e))?;
        Ok(p)
    }

    fn ground(&mut self) -> Res<GroundProfile> {
        let c = &self.cfg;
        let grid = make_grid(c.model.dim, c.grid.rmax, c.grid.n)?;
        let gp = ground::solve_ground_with(&grid, c.model.p, &c.ground_options())?;
        self.manifest.record_ground(&gp);
        Ok(gp)
    }

    fn spectrum(&mut self, gp: &GroundProfile) -> Res<(LinearizedOps, SpectrumData)> {
        let ops = assemble(gp);
        let spec = compute_spectrum(&ops)?;
        let byy = bilinear_b(&spec.y_plus(), &spec.y_minus(), &ops)?;
        self.manifest.record_spectrum(&spec, byy);
        Ok((ops, spec))
    }

    fn finish(mut self, ledger: &[(String, bool)]) -> Res<()> {
        self.manifest.finish(self.started.elapsed().as_secs_f64(), ledger)?;
        Ok(())
    }
}

fn write_ground(ctx: &Ctx, gp: &GroundProfile) -> Res<Report> {
    write_field_csv(&ctx.path("q.csv"), &gp.q)?;
    let ids = check_identities_tol(gp, ctx.cfg.ground.identity_tol, ctx.cfg.ground.tail_tol);
    let mut r = Report::new();
    r.num("q0", gp.q0)
        .num("shooting_a", gp.shooting_a)
        .num("match_radius", gp.match_radius)
        .num("ode_residual", gp.ode_residual)
        .int("bisection_steps", gp.bisection_steps)
        .num("mass", gp.mass())
        .num("grad_sq", gp.grad_sq())
        .num("potential", gp.potential())
        .num("energy", gp.energy())
        .extend("", &ids.to_report());
    let at_q = ground::gn_quotient(&gp.q, gp.p);
    r.num("gn.at_q", at_q);
    let (perturbed, orbit) = ground::gn_competitors(gp);
    let mut max_ok = true;
    for (name, f) in &perturbed {
        let v = ground::gn_quotient(f, gp.p);
        max_ok &= v < at_q;
        r.num(&format!("gn.competitor.{name}"), v);
    }
    for (name, f) in &orbit {
        r.num(&format!("gn.orbit.{name}"), ground::gn_quotient(f, gp.p));
    }
    r.flag("gn.maximal_check", max_ok);
    r.write(&ctx.path("identities.txt"))?;
    Ok(r)
}

fn flags(r: &Report) -> Vec<(String, bool)> {
    r.entries()
        .iter()
        .filter(|(k, v)| k.ends_with("check") && (v == "pass" || v == "fail"))
        .map(|(k, v)| (k.clone(), v == "pass"))
        .collect()
}

fn cmd_ground(common: &Common) -> Res<()> {
    let mut ctx = resolve(common, "ground", &[])?;
    let gp = ctx.ground()?;
    let r = write_ground(&ctx, &gp)?;
    ctx.finish(&flags(&r))
}

fn spectrum_report(ctx: &Ctx, ops: &LinearizedOps, spec: &SpectrumData) -> Res<Report> {
    let gp = &ops.gp;
    let tol = &ctx.cfg.spectrum;
    let yp = spec.y_plus();
    let byy = bilinear_b(&yp, &spec.y_minus(), ops)?;
    let phi_y = linearized_energy_phi(&yp, ops)?;
    let y1q = ops.dot(&spec.y1.re(), &gp.q_values());
    let (zv, zt) = negative_direction(ops);
    let phi_q = linearized_energy_phi(&gp.q, ops)?;
    let phi_t = 0.5 * (1.0 - gp.p) * gp.potential();
    let mut r = Report::new();
    r.num("e0", spec.e0)
        .num("e0_dense", spec.e0_dense)
        .num("mu_min", spec.mu_min)
        .num("mu_second", spec.mu_second)
        .num("residual_plus", spec.residual_plus)
        .num("residual_minus", spec.residual_minus)
        .flag("residual_check", spec.residual_plus.max(spec.residual_minus) <= tol.residual_tol)
        .num("y1_dot_q", y1q)
        .flag("orthogonality_check", y1q.abs() <= tol.normalization_tol)
        .num("b_yplus_yminus", byy)
        .flag("normalization_check", (byy - 1.0).abs() <= tol.normalization_tol)
        .num("phi_yplus", phi_y)
        .flag("phi_yplus_check", phi_y.abs() <= tol.normalization_tol)
        .num("decay_eta", spec.decay_eta)
        .int("inverse_iterations", spec.inverse_iterations)
        .num("negative_direction", zv)
        .num("negative_direction_target", zt)
        .flag("negative_direction_check", ((zv - zt) / zt).abs() <= tol.negative_direction_tol)
        .num("phi_q", phi_q)
        .num("phi_q_target", phi_t)
        .flag("phi_q_check", phi_q < 0.0 && ((phi_q - phi_t) / phi_t).abs() <= tol.phi_tol);
    if tol.coercivity {
        for (name, sub) in [("g_perp", Subspace::GPerp), ("g_tilde_perp", Subspace::GTildePerp)] {
            let c = coercivity_detail(ops, spec, sub)?;
            r.num(&format!("coercivity.{name}"), c.value)
                .num(&format!("coercivity.{name}.plus_block"), c.plus_block)
                .num(&format!("coercivity.{name}.minus_block"), c.minus_block)
                .flag(&format!("coercivity.{name}.positive_check"), c.value > 0.0);
        }
    }
    Ok(r)
}

fn cmd_spectrum(common: &Common) -> Res<()> {
    let mut ctx = resolve(common, "spectrum", &[])?;
    let gp = ctx.ground()?;
    write_field_csv(&ctx.path("q.csv"), &gp.q)?;
    let (ops, spec) = ctx.spectrum(&gp)?;
    write_field_csv(&ctx.path("y_plus.csv"), &spec.y_plus())?;
    let r = spectrum_report(&ctx, &ops, &spec)?;
    r.write(&ctx.path("spectrum.txt"))?;
    ctx.finish(&flags(&r))
}

fn opt_override(key: &str, v: Option<String>) -> Vec<(&str, String)> {
    v.map(|v| vec![(key, v)]).unwrap_or_default()
}

fn cmd_construct(common: &Common, a: Option<f64>, k: Option<usize>) -> Res<()> {
    let mut extra = opt_override("EXPERIMENT_A", a.map(|v| format!("{v:?}")));
    extra.extend(opt_override("EXPERIMENT_K", k.map(|v| v.to_string())));
    let mut ctx = resolve(common, "construct", &extra)?;
    let gp = ctx.ground()?;
    let (ops, spec) = ctx.spectrum(&gp)?;
    let x = ctx.cfg.experiment.clone();
    let t = Instant::now();
    let ap = build_vk(x.a, x.k, &spec, &ops)?;
    let build_s = t.elapsed().as_secs_f64();
    ctx.manifest.timing("construct_seconds", build_s);
    let times = rate_times(spec.e0);
    let fit = residual_rate(&ap, &times, &ops)?;
    let mut csv = String::from("t,lambda,residual_h1\n");
    for (t, n) in fit.times.iter().zip(&fit.norms) {
        let l = (-spec.e0 * t).exp();
        csv.push_str(&format!("{},{},{}\n", fmt_f64(*t), fmt_f64(l), fmt_f64(*n)));
    }
    ctx.write_text("residuals.csv", &csv)?;
    let t0 = -x.delta.ln() / spec.e0;
    let at_t0 = ap.eval(t0);
    write_field_csv(&ctx.path("v_t0.csv"), &Field::new(&gp.grid, at_t0, true, true)?)?;
    let bound = -((x.k + 1) as f64) * spec.e0 * x.residual_rate_factor;
    let mut r = Report::new();
    r.num("a", x.a)
        .int("k", x.k)
        .num("e0", spec.e0)
        .num("t_min", ap.t_min)
        .num("drift", ap.drift)
        .num("t0", t0)
        .num("rate", fit.rate)
        .num("rate_over_e0", fit.rate / spec.e0)
        .num("rate_bound", bound)
        .flag("rate_check", fit.rate <= bound);
    r.write(&ctx.path("construct.txt"))?;
    ctx.finish(&flags(&r))
}

fn initial_datum(ctx: &Ctx, gp: &GroundProfile, initial: &Option<PathBuf>, datum: &Option<String>) -> Res<Field> {
    if let Some(path) = initial {
        return Ok(read_field_csv(path, &gp.grid)?);
    }
    let spec = datum.clone().unwrap_or_else(|| ctx.cfg.experiment.initial.clone());
    match parse_initial(&spec).map_err(|e| Failure::Usage(e.to_string()))? {
        InitialDatum::Q => Ok(gp.q.clone()),
        InitialDatum::Scaled(c) => Ok(gp.q.scale_real(c)),
        InitialDatum::Threshold(mg) => Ok(threshold_datum(gp, mg)?),
    }
}

fn cmd_evolve(common: &Common, initial: &Option<PathBuf>, datum: &Option<String>, t_end: Option<f64>) -> Res<()> {
    let extra = opt_override("EVOLUTION_T_END", t_end.map(|v| format!("{v:?}")));
    let has_source = initial.is_some() || datum.is_some();
    let mut ctx = resolve(common, "evolve", &extra)?;
    if !has_source && ctx.cfg.experiment.initial.is_empty() {
        return Err(Failure::Usage(
            "evolve needs an initial datum: --initial FILE, --datum SPEC or experiment.initial".into(),
        ));
    }
    let gp = ctx.ground()?;
    let u0 = initial_datum(&ctx, &gp, initial, datum)?;
    let cfg = ctx.cfg.evolver();
    let mut ev = Evolver::new(&gp.grid, &cfg, Some(&gp))?;
    let (series, snaps) = ev.evolve(&u0, 0.0)?;
    series.write(&ctx.out)?;
    if !snaps.is_empty() {
        let dir = ctx.subdir("snapshots")?;
        let mut index = String::from("i,t,file\n");
        for (i, (t, u)) in snaps.iter().enumerate() {
            let name = format!("snap_{i:05}.csv");
            write_field_csv(&dir.join(&name), u)?;
            index.push_str(&format!("{i},{},{name}\n", fmt_f64(*t)));
        }
        let p = dir.join("index.csv");
        std::fs::write(&p, index).map_err(|e| io_err(&p, e))?;
    }
    let class = classify_run(&series, &cfg);
    let mut r = Report::new();
    r.text("verdict", class.verdict.label());
    if let Verdict::BlowUp { t_star } = class.verdict {
        r.num("t_star", t_star);
    }
    if let Verdict::ConvergeToQ { rate } = class.verdict {
        r.num("rate", rate);
    }
    r.int("steps", series.steps)
        .num("final_dt", series.final_dt)
        .num("min_dt", series.min_dt)
        .text("stopped_early", series.stopped_early)
        .num("mass_drift", series.mass_drift())
        .num("energy_drift", series.energy_drift())
        .extend("evidence.", &class.evidence);
    r.write(&ctx.path("evolve.txt"))?;
    ctx.manifest.steps(series.steps);
    ctx.finish(&[])
}

fn cmd_special(common: &Common, a: Option<f64>) -> Res<()> {
    let extra = opt_override("EXPERIMENT_A", a.map(|v| format!("{v:?}")));
    let mut ctx = resolve(common, "special", &extra)?;
    let gp = ctx.ground()?;
    let (ops, spec) = ctx.spectrum(&gp)?;
    let x = ctx.cfg.experiment.clone();
    let ap = build_vk(x.a, x.k, &spec, &ops)?;
    let mut run = SpecialRunSpec::new(x.a, x.k, x.delta, ctx.cfg.evolver());
    run.t_back = (x.t_back >= 0.0).then_some(x.t_back);
    let rep = run_special(&run, &ap, &gp)?;
    rep.forward.write(&ctx.subdir("forward")?)?;
    rep.backward.write(&ctx.subdir("backward")?)?;
    let mut r = rep.to_report();
    let expect_blowup = x.a > 0.0;
    let verdict_ok = match rep.backward_verdict.verdict {
        Verdict::BlowUp { .. } => expect_blowup,
        Verdict::Scatter => !expect_blowup,
        _ => false,
    };
    let rate_ok = ((-rep.forward_rate / spec.e0) - 1.0).abs() <= x.rate_tol;
    r.flag("grad_sign_check", rep.grad_sign == x.a.signum())
        .flag("forward_rate_check", rate_ok)
        .flag("backward_verdict_check", verdict_ok);
    r.write(&ctx.path("special.txt"))?;
    ctx.manifest.steps(rep.forward.steps + rep.backward.steps);
    ctx.finish(&flags(&r))
}

fn cmd_classify(common: &Common) -> Res<()> {
    let mut ctx = resolve(common, "classify", &[])?;
    let gp = ctx.ground()?;
    let x = ctx.cfg.experiment.clone();
    let mut family = vec![SweepDatum { label: "q".into(), u0: gp.q.clone() }];
    for mg in &x.sweep_mg {
        family.push(SweepDatum { label: format!("mg_{mg}"), u0: threshold_datum(&gp, *mg)? });
    }
    let mut cfg = ctx.cfg.evolver();
    cfg.t_end = x.sweep_horizon;
    let res = threshold_sweep_with(&family, &cfg, &gp, !ctx.cfg.output.deterministic)?;
    let mut csv = String::from("label,me,mg,forward,backward,consistent\n");
    let mut ledger = Vec::new();
    for s in &res {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            s.label,
            fmt_f64(s.me),
            fmt_f64(s.mg),
            s.forward.verdict.label(),
            s.backward.verdict.label(),
            s.consistent_with_mg()
        ));
        ledger.push((format!("{}.mg_consistency_check", s.label), s.consistent_with_mg()));
    }
    ctx.write_text("sweep.csv", &csv)?;
    let mut r = Report::new();
    for s in &res {
        r.extend(&format!("{}.forward.", s.label), &s.forward.evidence);
        r.extend(&format!("{}.backward.", s.label), &s.backward.evidence);
    }
    r.write(&ctx.path("classify.txt"))?;
    ctx.finish(&ledger)
}

fn read_snapshots(dir: &Path, gp: &GroundProfile) -> Res<Vec<(f64, Field)>> {
    let index = dir.join("index.csv");
    let text = std::fs::read_to_string(&index).map_err(|e| Failure::Usage(format!("{}: {e}", index.display())))?;
    let mut out = Vec::new();
    for (ln, line) in text.lines().enumerate().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 3 {
            return Err(Failure::Usage(format!("{}:{}: expected i,t,file", index.display(), ln + 1)));
        }
        let t: f64 = cols[1]
            .parse()
            .map_err(|_| Failure::Usage(format!("{}:{}: bad time", index.display(), ln + 1)))?;
        out.push((t, read_field_csv(&dir.join(cols[2]), &gp.grid)?));
    }
    Ok(out)
}

fn cmd_modulate(common: &Common, snapshots: &Option<PathBuf>) -> Res<()> {
    let mut ctx = resolve(common, "modulate", &[])?;
    let dir = snapshots.clone().unwrap_or_else(|| ctx.path("snapshots"));
    if !dir.join("index.csv").exists() {
        return Err(Failure::Usage(format!("{}: no snapshot index (run evolve with snapshot_every > 0)", dir.display())));
    }
    let gp = ctx.ground()?;
    let snaps = read_snapshots(&dir, &gp)?;
    let entries = track(&snaps, &gp);
    ctx.write_text("frames.csv", &frames_csv(&entries))?;
    let mut r = Report::new();
    let gaps: Vec<&TrackEntry> = entries.iter().filter(|e| e.frame().is_none()).collect();
    r.int("frames", entries.len() - gaps.len()).int("gaps", gaps.len());
    for g in gaps {
        if let TrackEntry::Gap { t, reason } = g {
            r.text(&format!("gap.{}", fmt_f64(*t)), reason);
        }
    }
    r.write(&ctx.path("modulate.txt"))?;
    ctx.finish(&[])
}

fn cmd_check(common: &Common) -> Res<()> {
    let mut ctx = resolve(common, "check", &[])?;
    let res = suite::run_checks(&ctx.cfg)?;
    ctx.manifest.record_ground(&res.gp);
    let ops = assemble(&res.gp);
    let byy = bilinear_b(&res.spectrum.y_plus(), &res.spectrum.y_minus(), &ops)?;
    ctx.manifest.record_spectrum(&res.spectrum, byy);
    res.report.write(&ctx.path("check.txt"))?;
    let ledger: Vec<(String, bool)> = res.checks.iter().map(|c| (c.name.clone(), c.pass)).collect();
    for (name, pass) in &ledger {
        println!("{} {name}", if *pass { "PASS" } else { "FAIL" });
    }
    ctx.finish(&ledger)?;
    if res.all_pass() {
        Ok(())
    } else {
        Err(Failure::Check(res.failures().iter().map(|s| s.to_string()).collect()))
    }
}

fn run(cli: Cli) -> Res<()> {
    match &cli.cmd {
        Cmd::Ground(c) => cmd_ground(c),
        Cmd::Spectrum(c) => cmd_spectrum(c),
        Cmd::Construct { common, a, k } => cmd_construct(common, *a, *k),
        Cmd::Evolve { common, initial, datum, t_end } => cmd_evolve(common, initial, datum, *t_end),
        Cmd::Special { common, a } => cmd_special(common, *a),
        Cmd::Classify(c) => cmd_classify(c),
        Cmd::Modulate { common, snapshots } => cmd_modulate(common, snapshots),
        Cmd::Check(c) => cmd_check(c),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(failed)) => {
            eprintln!("check failed: {}", failed.join(", "));
            ExitCode::from(EXIT_CHECK)
        }
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Lab(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { EXIT_NUMERICAL } else { EXIT_USAGE })
        }
    }
}
