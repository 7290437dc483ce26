//! Command-line front end: argument parsing, config-file merging, dispatch
//! and output.

mod json;

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::compact::theta_of;
use crate::constants::{phi_form, preservation_limit, sup_phi};
use crate::lilstat::{
    checkpoint_steps, eps_run, geometric_n_grid, geometric_times, lil_run, linear_steps,
    variance_growth, EpsWindow, LilConfig, NormKind,
};
use crate::output::{csv, fmt_f64, write_atomic};
use crate::sampler::{simulate_paths, Engine, Stepping};
use crate::schemes::{
    builtin, check_convergence_order, classify, CoeffTable, SchemeDef, DEFAULT_SYMPLECTIC_TOL,
};
use crate::spectrum::{build_model, exact_lil_constant, load_model, ModelSpec, Preset};
use crate::{Error, Result};

pub use json::to_fixed_json;

/// Exit status for malformed arguments, configs or model files.
pub const EXIT_PARSE: i32 = 2;
/// Exit status when a scheme violates the complex-eigenvalue condition.
pub const EXIT_INADMISSIBLE: i32 = 3;
/// Exit status for long-horizon runs of an expansive scheme.
pub const EXIT_EXPANSIVE: i32 = 4;

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Inadmissible { .. } => EXIT_INADMISSIBLE,
        Error::Expansive(_) => EXIT_EXPANSIVE,
        Error::Json(_)
        | Error::UnknownParameter(_)
        | Error::UnknownScheme(_)
        | Error::InvalidModel(_)
        | Error::InvalidArgument(_) => EXIT_PARSE,
        _ => 1,
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "shs-lil",
    version,
    about = "LIL constants and Monte Carlo checks for linear stochastic Hamiltonian systems"
)]
pub struct Cli {
    /// Worker threads (default: hardware parallelism). LIL_THREADS overrides.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-mode ξ constants as CSV.
    Constants(RunArgs),
    /// Determinant, trace, admissibility and symplecticity at one h.
    Classify(ClassifyArgs),
    /// Consistency orders of the scheme coefficients.
    CheckOrder(RunArgs),
    /// Norm trajectories at checkpoints.
    Simulate(RunArgs),
    /// Ratio statistics and their summary.
    EstimateLil(RunArgs),
    /// Variance growth classification of one mode.
    Variance(RunArgs),
    /// Discrete LIL constants over τ and M sequences.
    PreserveSweep(RunArgs),
    /// Table of α̂ₙ for one scheme and h.
    AlphaHat(AlphaHatArgs),
}

/// Options shared by the experiment subcommands. Values from `--config`
/// fill any option not given on the command line.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunArgs {
    /// JSON file with default values for these options.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// JSON model file.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
    /// Builtin model preset (oscillator | schrodinger) instead of a file.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    /// Preset parameter override KEY=VALUE (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub set: Vec<String>,
    /// Scheme name, `exact`, or `table:PATH`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scheme: Option<String>,
    /// Use the exact transition (same as --scheme exact).
    #[arg(long)]
    #[serde(skip_serializing_if = "std::ops::Not::not", default)]
    pub exact: bool,
    /// Enable linear interpolation for table schemes.
    #[arg(long)]
    #[serde(skip_serializing_if = "std::ops::Not::not", default)]
    pub interpolate: bool,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    /// Comma-separated decreasing step sizes.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub taus: Option<String>,
    /// Comma-separated increasing truncations.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ms: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<u64>,
    /// Time horizon.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub paths: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Geometric grid ratio of the ratio statistic.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    /// Checkpoint rule `geometric:RATIO` or `linear:COUNT`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoints: Option<String>,
    /// `stepwise` or `jump`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stepping: Option<String>,
    /// `x`, `y` or `joint`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub norm: Option<String>,
    /// Use the t^eps scaling instead of √(t log log t).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    /// `running` or `trailing:FACTOR` window for the eps statistic.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_window: Option<String>,
    /// Step grid: comma list, or `geom:MIN:MAX:PER_DECADE`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_grid: Option<String>,
    /// Mode index (0-based) for single-mode subcommands.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "std::ops::Not::not", default)]
    pub allow_expansive: bool,
    /// Main output file (stdout when absent).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// JSON summary file.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub scheme: String,
    #[arg(long)]
    pub h: f64,
    #[arg(long, default_value_t = DEFAULT_SYMPLECTIC_TOL)]
    pub tol: f64,
    #[arg(long)]
    pub interpolate: bool,
}

#[derive(Debug, Clone, Args)]
pub struct AlphaHatArgs {
    #[arg(long)]
    pub scheme: String,
    #[arg(long)]
    pub h: f64,
    /// Largest index; rows run from -1 to N.
    #[arg(long)]
    pub n: i64,
    #[arg(long)]
    pub interpolate: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn merge_config<T: Serialize + DeserializeOwned>(flags: &T, config: Option<&PathBuf>) -> Result<T> {
    let Some(path) = config else {
        return Ok(serde_json::from_value(serde_json::to_value(flags)?)?);
    };
    let text = std::fs::read_to_string(path)?;
    let mut base: Value = serde_json::from_str(&text)?;
    let over = serde_json::to_value(flags)?;
    match (&mut base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                b.insert(k, v);
            }
        }
        _ => {
            return Err(Error::InvalidArgument(format!(
                "config file {} must hold a JSON object",
                path.display()
            )))
        }
    }
    Ok(serde_json::from_value(base)?)
}

impl RunArgs {
    /// Flags merged over the config file.
    pub fn resolved(&self) -> Result<RunArgs> {
        merge_config(self, self.config.as_ref())
    }

    fn require<T: Copy>(v: Option<T>, name: &str) -> Result<T> {
        v.ok_or_else(|| Error::InvalidArgument(format!("missing --{name}")))
    }

    fn model(&self) -> Result<ModelSpec> {
        match (&self.model, &self.preset) {
            (Some(_), Some(_)) => Err(Error::InvalidArgument(
                "--model and --preset are mutually exclusive".into(),
            )),
            (Some(path), None) => {
                if !self.set.is_empty() {
                    return Err(Error::InvalidArgument(
                        "--set applies to presets only".into(),
                    ));
                }
                load_model(path)
            }
            (None, Some(name)) => {
                let mut over = BTreeMap::new();
                for kv in &self.set {
                    let (k, v) = kv.split_once('=').ok_or_else(|| {
                        Error::InvalidArgument(format!("--set expects KEY=VALUE, got `{kv}`"))
                    })?;
                    let v: f64 = v.trim().parse().map_err(|_| {
                        Error::InvalidArgument(format!("--set {k}: `{v}` is not a number"))
                    })?;
                    over.insert(k.trim().to_string(), v);
                }
                build_model(&Preset::new(name.parse()?), &over)
            }
            (None, None) => Err(Error::InvalidArgument(
                "one of --model or --preset is required".into(),
            )),
        }
    }

    fn scheme_name(&self) -> Result<String> {
        match (&self.scheme, self.exact) {
            (Some(s), false) => Ok(s.clone()),
            (None, true) => Ok("exact".into()),
            (Some(s), true) if s == "exact" => Ok("exact".into()),
            (Some(_), true) => Err(Error::InvalidArgument(
                "--exact conflicts with --scheme".into(),
            )),
            (None, false) => Err(Error::InvalidArgument("missing --scheme or --exact".into())),
        }
    }

    fn scheme(&self) -> Result<Option<SchemeDef>> {
        let name = self.scheme_name()?;
        if name == "exact" {
            return Ok(None);
        }
        resolve_scheme(&name, self.interpolate).map(Some)
    }

    fn stepping(&self) -> Result<Stepping> {
        match self.stepping.as_deref().unwrap_or("stepwise") {
            "stepwise" => Ok(Stepping::Stepwise),
            "jump" => Ok(Stepping::CheckpointJump),
            other => Err(Error::InvalidArgument(format!(
                "unknown stepping `{other}`"
            ))),
        }
    }

    fn norm(&self) -> Result<NormKind> {
        match self.norm.as_deref().unwrap_or("x") {
            "x" => Ok(NormKind::X),
            "y" => Ok(NormKind::Y),
            "joint" => Ok(NormKind::Joint),
            other => Err(Error::InvalidArgument(format!("unknown norm `{other}`"))),
        }
    }
}

fn resolve_scheme(name: &str, interpolate: bool) -> Result<SchemeDef> {
    if let Some(path) = name.strip_prefix("table:") {
        let table = CoeffTable::read(std::path::Path::new(path), interpolate)?;
        return Ok(SchemeDef::table(path, table));
    }
    builtin(name)
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("cannot parse `{s}` in {what}")))
        })
        .collect()
}

fn emit(out: Option<&PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => {
            use std::io::Write;
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn summary_line(text: &str) {
    eprintln!("{text}");
}

fn target_str(t: Option<f64>) -> String {
    t.map_or_else(|| "none".to_string(), fmt_f64)
}

/// Number of worker threads: LIL_THREADS, then --threads, then the default.
pub fn thread_count(flag: Option<usize>) -> Result<Option<usize>> {
    if let Ok(v) = std::env::var("LIL_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("LIL_THREADS=`{v}` is not a count")))?;
        return Ok(Some(n));
    }
    Ok(flag)
}

/// Parses nothing; runs an already parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_count(cli.threads)? {
        if n == 0 {
            return Err(Error::InvalidArgument(
                "thread count must be positive".into(),
            ));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot build thread pool: {e}")))?;
    pool.install(|| dispatch(cli.command))
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Constants(a) => cmd_constants(&a.resolved()?),
        Command::Classify(a) => cmd_classify(&a),
        Command::CheckOrder(a) => cmd_check_order(&a.resolved()?),
        Command::Simulate(a) => cmd_simulate(&a.resolved()?),
        Command::EstimateLil(a) => cmd_estimate_lil(&a.resolved()?),
        Command::Variance(a) => cmd_variance(&a.resolved()?),
        Command::PreserveSweep(a) => cmd_preserve_sweep(&a.resolved()?),
        Command::AlphaHat(a) => cmd_alpha_hat(&a),
    }
}

fn cmd_constants(a: &RunArgs) -> Result<()> {
    let model = a.model()?;
    let scheme = a
        .scheme()?
        .ok_or_else(|| Error::InvalidArgument("constants need a numerical scheme".into()))?;
    let tau = RunArgs::require(a.tau, "tau")?;
    let form = phi_form(&scheme, &model, tau)?;
    let sp = sup_phi(&form)?;
    let mut rows = Vec::with_capacity(model.m());
    for (k, block) in form.blocks.iter().enumerate() {
        let h = model.lambda()[k] * tau;
        let rot = theta_of(&scheme, h)?;
        if let Some(w) = rot.warning() {
            eprintln!("warning: mode {}: {w}", k + 1);
        }
        let contrib = (block.xi.eigenvalues().1 * block.eta).max(0.0).sqrt();
        rows.push(vec![
            scheme.name.clone(),
            (k + 1).to_string(),
            fmt_f64(model.lambda()[k]),
            fmt_f64(tau),
            fmt_f64(h),
            fmt_f64(rot.theta),
            fmt_f64(rot.det),
            fmt_f64(block.xi.xi1),
            fmt_f64(block.xi.xi2),
            fmt_f64(block.xi.xi3),
            fmt_f64(contrib),
        ]);
    }
    let text = csv(
        &[
            "scheme",
            "k",
            "lambda",
            "tau",
            "h",
            "theta",
            "det",
            "xi1",
            "xi2",
            "xi3",
            "sup_phi_contrib",
        ],
        rows,
    );
    emit(a.out.as_ref(), &text)?;
    summary_line(&format!(
        "constants: scheme={} M={} tau={} sup_phi={} exact_target={}",
        scheme.name,
        model.m(),
        tau,
        fmt_f64(sp.value),
        fmt_f64(exact_lil_constant(&model))
    ));
    Ok(())
}

fn cmd_classify(a: &ClassifyArgs) -> Result<()> {
    let scheme = resolve_scheme(&a.scheme, a.interpolate)?;
    let t = classify(&scheme, a.h, a.tol)?;
    let v = json!({
        "scheme": scheme.name,
        "h": t.h,
        "det": t.det,
        "trace": t.trace,
        "discriminant": t.discriminant,
        "admissible": t.admissible,
        "symplectic": t.symplectic,
        "det_class": t.det_class,
    });
    emit(None, &(to_fixed_json(&v) + "\n"))
}

fn cmd_check_order(a: &RunArgs) -> Result<()> {
    let model = a.model()?;
    let scheme = a
        .scheme()?
        .ok_or_else(|| Error::InvalidArgument("check-order needs a numerical scheme".into()))?;
    let taus: Vec<f64> = parse_list(
        a.taus.as_deref().unwrap_or("0.1,0.05,0.025,0.0125"),
        "--taus",
    )?;
    let report = check_convergence_order(&scheme, &model, &taus)?;
    emit(
        a.out.as_ref(),
        &(to_fixed_json(&serde_json::to_value(&report)?) + "\n"),
    )?;
    summary_line(&format!(
        "check-order: scheme={} a_slope={:?} b_slope={:?} pass={}",
        scheme.name,
        report.a_slope,
        report.b_slope,
        report.pass()
    ));
    Ok(())
}

fn parse_checkpoints(rule: &str, steps: u64) -> Result<Vec<u64>> {
    let (kind, arg) = rule
        .split_once(':')
        .ok_or_else(|| Error::InvalidArgument(format!("bad checkpoint rule `{rule}`")))?;
    match kind {
        "linear" => {
            let k: u64 = arg
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad checkpoint count `{arg}`")))?;
            Ok(linear_steps(steps, k))
        }
        "geometric" => {
            let m: f64 = arg
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad checkpoint ratio `{arg}`")))?;
            if !(m > 1.0) {
                return Err(Error::InvalidArgument(
                    "geometric ratio must exceed 1".into(),
                ));
            }
            let mut out = Vec::new();
            let mut x = 1.0f64;
            while x.ceil() < steps as f64 {
                let n = x.ceil() as u64;
                if out.last() != Some(&n) {
                    out.push(n);
                }
                x *= m;
            }
            out.push(steps);
            out.dedup();
            Ok(out)
        }
        _ => Err(Error::InvalidArgument(format!(
            "unknown checkpoint rule `{kind}`"
        ))),
    }
}

fn engine_of(scheme: &Option<SchemeDef>) -> Engine<'_> {
    match scheme {
        Some(s) => Engine::Scheme(s),
        None => Engine::Exact,
    }
}

fn cmd_simulate(a: &RunArgs) -> Result<()> {
    let model = a.model()?;
    let scheme = a.scheme()?;
    let tau = RunArgs::require(a.tau, "tau")?;
    let steps = RunArgs::require(a.steps, "steps")?;
    if steps == 0 {
        return Err(Error::InvalidArgument("--steps must be positive".into()));
    }
    let paths = a.paths.unwrap_or(1);
    let seed = a.seed.unwrap_or(0);
    let cps = parse_checkpoints(a.checkpoints.as_deref().unwrap_or("linear:100"), steps)?;
    let engine = engine_of(&scheme);
    let data = simulate_paths(engine, a.stepping()?, &model, seed, paths, tau, &cps)?;
    let rows = data.iter().enumerate().flat_map(|(p, recs)| {
        recs.iter().map(move |r| {
            vec![
                p.to_string(),
                fmt_f64(r.t),
                fmt_f64(r.norm_x),
                fmt_f64(r.norm_y),
                fmt_f64(r.norm_joint),
            ]
        })
    });
    let text = csv(&["path_id", "t", "norm_x", "norm_y", "norm_joint"], rows);
    emit(a.out.as_ref(), &text)?;
    summary_line(&format!(
        "simulate: engine={} paths={paths} steps={steps} checkpoints={} exact_target={}",
        engine.label(),
        cps.len(),
        fmt_f64(exact_lil_constant(&model))
    ));
    Ok(())
}

fn parse_window(text: Option<&str>) -> Result<EpsWindow> {
    match text.unwrap_or("trailing:10") {
        "running" => Ok(EpsWindow::Running),
        s => {
            let f = s
                .strip_prefix("trailing:")
                .and_then(|v| v.parse::<f64>().ok())
                .ok_or_else(|| Error::InvalidArgument(format!("bad eps window `{s}`")))?;
            Ok(EpsWindow::Trailing(f))
        }
    }
}

fn cmd_estimate_lil(a: &RunArgs) -> Result<()> {
    let model = a.model()?;
    let scheme = a.scheme()?;
    let engine = engine_of(&scheme);
    let cfg = LilConfig {
        tau: RunArgs::require(a.tau, "tau")?,
        horizon: RunArgs::require(a.horizon, "horizon")?,
        paths: a.paths.unwrap_or(64),
        m: a.m.unwrap_or(1.01),
        seed: a.seed.unwrap_or(0),
        stepping: a.stepping()?,
        norm: a.norm()?,
        allow_expansive: a.allow_expansive,
    };
    let (series, summary) = if let Some(eps) = a.eps {
        let window = parse_window(a.eps_window.as_deref())?;
        let series = eps_run(engine, &model, &cfg, eps, window)?;
        let finals: Vec<f64> = series.iter().map(|s| s.final_value()).collect();
        let at100: Vec<f64> = series
            .iter()
            .map(|s| s.value_at(100.0).unwrap_or(f64::NAN))
            .collect();
        let mut summary = serde_json::to_value(crate::lilstat::estimate_lil(&finals, None))?;
        summary["median_at_t100"] = json!(crate::stats::median(&at100));
        summary["eps"] = json!(eps);
        (series, summary)
    } else {
        let run = lil_run(engine, &model, &cfg)?;
        (run.series, serde_json::to_value(&run.summary)?)
    };
    let rows = series.iter().enumerate().flat_map(|(p, s)| {
        s.points.iter().map(move |pt| {
            vec![
                p.to_string(),
                ((pt.t / cfg.tau).round() as u64).to_string(),
                fmt_f64(pt.t),
                fmt_f64(pt.ratio),
                fmt_f64(pt.running_sup),
            ]
        })
    });
    let text = csv(&["path_id", "n", "t", "ratio", "running_sup"], rows);
    emit(a.out.as_ref(), &text)?;
    let mut summary = summary;
    summary["engine"] = json!(engine.label());
    summary["tau"] = json!(cfg.tau);
    summary["horizon"] = json!(cfg.horizon);
    summary["m"] = json!(cfg.m);
    summary["seed"] = json!(cfg.seed);
    let summary_text = to_fixed_json(&summary) + "\n";
    if let Some(p) = &a.summary {
        write_atomic(p, summary_text.as_bytes())?;
    }
    summary_line(&format!(
        "estimate-lil: engine={} median_final={} analytic_target={}",
        engine.label(),
        fmt_f64(summary["median_final"].as_f64().unwrap_or(f64::NAN)),
        target_str(summary["analytic_target"].as_f64())
    ));
    Ok(())
}

fn parse_n_grid(text: &str) -> Result<Vec<u64>> {
    if let Some(rest) = text.strip_prefix("geom:") {
        let parts: Vec<u64> = parse_list(&rest.replace(':', ","), "--n-grid")?;
        if parts.len() != 3 {
            return Err(Error::InvalidArgument(
                "geom grid is geom:MIN:MAX:PER_DECADE".into(),
            ));
        }
        return geometric_n_grid(parts[0], parts[1], parts[2] as u32);
    }
    let v: Vec<u64> = parse_list(text, "--n-grid")?;
    if v.windows(2).any(|w| w[1] <= w[0]) || v.first() == Some(&0) {
        return Err(Error::InvalidArgument(
            "--n-grid must be increasing and positive".into(),
        ));
    }
    Ok(v)
}

fn cmd_variance(a: &RunArgs) -> Result<()> {
    let model = a.model()?;
    let scheme = a.scheme()?;
    let engine = engine_of(&scheme);
    let tau = RunArgs::require(a.tau, "tau")?;
    let grid = parse_n_grid(a.n_grid.as_deref().unwrap_or("geom:10:10000:10"))?;
    let fit = variance_growth(
        engine,
        &model,
        a.mode.unwrap_or(0),
        tau,
        &grid,
        a.paths.unwrap_or(10_000),
        a.seed.unwrap_or(0),
    )?;
    let mut v = serde_json::to_value(&fit)?;
    v["engine"] = json!(engine.label());
    v["tau"] = json!(tau);
    emit(a.out.as_ref(), &(to_fixed_json(&v) + "\n"))?;
    summary_line(&format!(
        "variance: engine={} class={:?} slope={}",
        engine.label(),
        fit.classification,
        fmt_f64(fit.slope)
    ));
    Ok(())
}

fn cmd_preserve_sweep(a: &RunArgs) -> Result<()> {
    let model = a.model()?;
    let scheme = a
        .scheme()?
        .ok_or_else(|| Error::InvalidArgument("preserve-sweep needs a numerical scheme".into()))?;
    let taus: Vec<f64> = parse_list(a.taus.as_deref().unwrap_or("0.2,0.1,0.05,0.025"), "--taus")?;
    let default_ms = model.m().to_string();
    let ms: Vec<usize> = parse_list(a.ms.as_deref().unwrap_or(&default_ms), "--ms")?;
    let r = preservation_limit(&scheme, &model, &taus, &ms, DEFAULT_SYMPLECTIC_TOL)?;
    let rows = r.rows.iter().map(|row| {
        vec![
            row.m.to_string(),
            fmt_f64(row.tau),
            fmt_f64(row.sup_x),
            fmt_f64(row.sup_y),
            fmt_f64(row.sup_phi),
            (row.phi_mode + 1).to_string(),
            fmt_f64(row.max_abs_xi3),
            fmt_f64(row.gap_x),
            fmt_f64(row.gap_y),
            fmt_f64(row.gap_phi),
        ]
    });
    let text = csv(
        &[
            "M",
            "tau",
            "sup_x",
            "sup_y",
            "sup_phi",
            "phi_mode",
            "max_abs_xi3",
            "gap_x",
            "gap_y",
            "gap_phi",
        ],
        rows,
    );
    emit(a.out.as_ref(), &text)?;
    if let Some(p) = &a.summary {
        write_atomic(
            p,
            (to_fixed_json(&serde_json::to_value(&r)?) + "\n").as_bytes(),
        )?;
    }
    summary_line(&format!(
        "preserve-sweep: scheme={} exact_target={} monotone_in_tau={} monotone_in_m={}",
        r.scheme,
        fmt_f64(r.exact),
        r.monotone_in_tau,
        r.monotone_in_m
    ));
    Ok(())
}

fn cmd_alpha_hat(a: &AlphaHatArgs) -> Result<()> {
    let scheme = resolve_scheme(&a.scheme, a.interpolate)?;
    let rot = theta_of(&scheme, a.h)?;
    if a.n < -1 {
        return Err(Error::InvalidArgument("--n must be at least -1".into()));
    }
    let rows = (-1..=a.n).map(|n| vec![n.to_string(), fmt_f64(rot.alpha_hat(n))]);
    emit(a.out.as_ref(), &csv(&["n", "alpha_hat"], rows))
}

/// Convenience used by tests: geometric LIL checkpoints for a horizon.
pub fn lil_checkpoints(m: f64, horizon: f64, tau: f64) -> Result<Vec<u64>> {
    checkpoint_steps(&geometric_times(m, horizon)?, tau)
}
