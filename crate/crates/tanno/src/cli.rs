//! Command-line front end. Exit codes: 0 success, 1 a check failed,
//! 2 usage or model error.

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use std::io::Write;
use std::path::PathBuf;
use tanno_core::cd::{cd_params_as_stated, certify, estimate_constants, gap_and_poincare, Objective};
use tanno_core::jets::{Monomial, Polynomial, ScalarField};
use tanno_core::models::catalog;
use tanno_core::ContactModel;

use crate::heatsim::{self, SimConfig, SimError};
use crate::model_json::resolve;
use crate::report::{self, envelope, render};
use crate::verify::{self, Fault};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "tanno", version, about = "Curvature invariants and certificates for contact Riemannian manifolds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Built-in model name or path to a model JSON file
    model: String,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    a: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    b: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    c1: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    c2: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    c3: Option<f64>,
}

impl ModelArgs {
    fn load(&self) -> Result<ContactModel, String> {
        let mut params: Vec<(&str, f64)> = Vec::new();
        if let Some(n) = self.n {
            params.push(("n", n as f64));
        }
        for (k, v) in [("a", self.a), ("b", self.b), ("c1", self.c1), ("c2", self.c2), ("c3", self.c3)] {
            if let Some(v) = v {
                params.push((k, v));
            }
        }
        resolve(&self.model, &params).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Check {
    Gradient,
    Variance,
    Completeness,
    FirstVariation,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate constants and derive all certificates
    Analyze {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 64)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// spectral_gap, myers_margin or c_lambda
        #[arg(long, default_value = "spectral_gap")]
        objective: String,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Check the Bochner, rescaled and converse identities and the CD slack
    Verify {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long)]
        json: Option<PathBuf>,
        #[arg(long, hide = true)]
        inject_fault: Option<f64>,
    },
    /// Monte Carlo checks of the heat semigroup
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long, default_value_t = 0.01)]
        dt: f64,
        #[arg(long, default_value_t = 10_000)]
        paths: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum)]
        check: Option<Check>,
        /// Escape radius for chart models
        #[arg(long, default_value_t = 100.0)]
        radius: f64,
        /// Inner paths per stationary start for the variance check
        #[arg(long, default_value_t = 20)]
        inner: usize,
        #[arg(long, default_value_t = 5.0)]
        burn_in: f64,
        #[arg(long, default_value_t = 64)]
        samples: usize,
        /// Write terminal points as CSV
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// List the built-in models
    Models {
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

struct Outcome {
    report: Value,
    code: i32,
    json: Option<PathBuf>,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(o) => {
            let text = render(&o.report);
            let written = match &o.json {
                Some(path) => std::fs::write(path, &text).map_err(|e| format!("cannot write {}: {e}", path.display())),
                None => out.write_all(text.as_bytes()).map_err(|e| e.to_string()),
            };
            if let Err(e) = written {
                let _ = writeln!(err, "error: {e}");
                return EXIT_USAGE;
            }
            o.code
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_USAGE
        }
    }
}

fn sample_description(model: &ContactModel, samples: usize, seed: u64) -> Value {
    let region = if model.is_lie() { "exp(sum c_i A_i), c uniform in [-1, 1]" } else { "uniform in [-1, 1]^d" };
    json!({ "count": samples, "seed": seed, "region": region })
}

fn analyze(model: &ContactModel, samples: usize, seed: u64, objective: Objective) -> Result<Value, String> {
    // group constants are exact at any single point
    let count = if model.is_lie() { 1 } else { samples.max(1) };
    let mut points = vec![model.base_point()];
    if !model.is_lie() {
        points.extend(verify::sample_points(model, count - 1, seed));
    }
    let k = estimate_constants(model, &points).map_err(|e| e.to_string())?;
    let r = certify(&k, objective);
    let z = r.primary.z.unwrap_or(1.0);
    let w = r.primary.w.unwrap_or(1.0);
    let mut results = report::certificates_json(&r, &cd_params_as_stated(&k, z, w));
    results["sample"] = sample_description(model, count, seed);
    Ok(results)
}

fn dispatch(command: Command) -> Result<Outcome, String> {
    match command {
        Command::Analyze { model, samples, seed, objective, json } => {
            let obj = Objective::parse(&objective).ok_or_else(|| format!("unknown objective `{objective}`"))?;
            let m = model.load()?;
            let results = analyze(&m, samples, seed, obj)?;
            let params = json!({ "samples": samples, "seed": seed, "objective": obj.name() });
            Ok(Outcome { report: envelope("analyze", Some(&m), params, results), code: EXIT_OK, json })
        }
        Command::Verify { model, count, seed, tol, json, inject_fault } => {
            let m = model.load()?;
            if count == 0 {
                return Err("count must be at least 1".into());
            }
            let fault = inject_fault.map_or(Fault::None, Fault::CurvatureShift);
            let r = verify::run(&m, count, seed, tol, fault).map_err(|e| e.to_string())?;
            let code = if r.passed() { EXIT_OK } else { EXIT_FAILED };
            let params = json!({ "count": count, "seed": seed, "tol": tol });
            Ok(Outcome { report: envelope("verify", Some(&m), params, report::verify_json(&r)), code, json })
        }
        Command::Simulate { model, t, dt, paths, seed, check, radius, inner, burn_in, samples, csv, json } => {
            let m = model.load()?;
            let mut cfg = SimConfig::new(&m, t, dt, paths, seed);
            if !m.is_lie() {
                cfg.escape_radius = Some(radius);
            }
            let (results, code) = simulate(&m, &cfg, check, inner, burn_in, samples, csv.as_ref())?;
            let params = json!({
                "t": t, "dt": dt, "paths": paths, "seed": seed,
                "check": check.map(|c| format!("{c:?}").to_lowercase()),
                "escape_radius": cfg.escape_radius,
                "generator": report::GENERATOR_CONVENTION,
            });
            Ok(Outcome { report: envelope("simulate", Some(&m), params, results), code, json })
        }
        Command::Models { json } => {
            let list: Vec<Value> = catalog()
                .iter()
                .map(|e| {
                    let params: serde_json::Map<String, Value> =
                        e.params.iter().map(|(k, v)| (k.to_string(), json!(v))).collect();
                    let x = &e.expected;
                    json!({
                        "name": e.name,
                        "parameters": params,
                        "description": e.description,
                        "expected": {
                            "c1": x.c1, "c2": x.c2, "c3": x.c3, "iota": x.iota, "alpha": x.alpha,
                            "compact": x.compact,
                        },
                    })
                })
                .collect();
            Ok(Outcome { report: envelope("models", None, json!({}), json!({ "models": list })), code: EXIT_OK, json })
        }
    }
}

/// Test function for simulation checks: linear in the coordinates on groups
/// (so `f` is a combination of matrix entries), quadratic on charts.
pub fn check_function(model: &ContactModel, seed: u64) -> ScalarField {
    let d = model.ambient_dim();
    let mut rng = heatsim::path_rng(seed, u64::MAX);
    let deg = if model.is_lie() { 1 } else { 2 };
    let mut terms = Vec::new();
    for a in 0..d {
        let mut p = vec![0u32; d];
        p[a] = 1;
        terms.push(Monomial::new(rand::Rng::gen_range(&mut rng, -1.0..1.0), p.clone()));
        if deg == 2 {
            for b in a..d {
                let mut q = p.clone();
                q[b] += 1;
                terms.push(Monomial::new(rand::Rng::gen_range(&mut rng, -0.5..0.5), q));
            }
        }
    }
    ScalarField::Polynomial(Polynomial::new(d, terms).expect("dimension is consistent"))
}

/// The matrix entry `Y_00` of a group model.
pub fn first_entry(model: &ContactModel) -> ScalarField {
    ScalarField::Polynomial(Polynomial::coordinate(model.ambient_dim(), 0))
}

fn sim_err(e: SimError) -> String {
    e.to_string()
}

fn simulate(
    model: &ContactModel,
    cfg: &SimConfig,
    check: Option<Check>,
    inner: usize,
    burn_in: f64,
    samples: usize,
    csv: Option<&PathBuf>,
) -> Result<(Value, i32), String> {
    let mut code = EXIT_OK;
    let results = match check {
        None => {
            let ens = heatsim::simulate_paths(cfg).map_err(sim_err)?;
            let d = model.ambient_dim();
            let means: Vec<Value> = (0..d)
                .map(|a| {
                    let v: Vec<f64> = ens.terminal_points().map(|p| p.coords()[a]).collect();
                    if v.is_empty() {
                        Value::Null
                    } else {
                        report::estimate_json(&heatsim::Estimate::from_samples(&v))
                    }
                })
                .collect();
            if let Some(path) = csv {
                let mut text = String::new();
                text.push_str("path,escaped_at");
                for a in 0..d {
                    text.push_str(&format!(",x{a}"));
                }
                text.push('\n');
                for p in &ens.paths {
                    text.push_str(&format!("{},{}", p.stream, p.escaped_at.map(|t| t.to_string()).unwrap_or_default()));
                    for c in p.point.coords() {
                        text.push_str(&format!(",{c}"));
                    }
                    text.push('\n');
                }
                std::fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
            }
            json!({
                "paths": ens.paths.len(),
                "escaped": ens.escaped(),
                "escaped_fraction": ens.escaped_fraction(),
                "coordinate_means": means,
            })
        }
        Some(Check::Completeness) => {
            let c = heatsim::completeness(cfg).map_err(sim_err)?;
            let ok = if c.structural { c.escaped == 0 } else { c.escaped_fraction < 1e-3 };
            if !ok {
                code = EXIT_FAILED;
            }
            let mut v = report::completeness_json(&c);
            v["holds"] = json!(ok);
            v
        }
        Some(Check::Gradient) => {
            let (sigma, delta) = gap_coefficients(model, samples, cfg.seed)?;
            let f = check_function(model, cfg.seed);
            let g = heatsim::check_gradient_bound(cfg, &f, sigma, delta).map_err(sim_err)?;
            if !g.holds {
                code = EXIT_FAILED;
            }
            report::gradient_json(&g)
        }
        Some(Check::Variance) => {
            if !heatsim::is_compact(model).map_err(|e| e.to_string())? {
                return Err(format!("{} is not compact; the variance check needs a compact group model", model.name()));
            }
            let outer = (cfg.paths / inner.max(1)).max(2 * heatsim::JACKKNIFE_GROUPS);
            let times: Vec<f64> = (1..=4).map(|i| cfg.t * i as f64 / 4.0).collect();
            let f = first_entry(model);
            let v = heatsim::variance_decay_rate(model, &f, &times, cfg.dt, outer, inner, burn_in, cfg.seed)
                .map_err(sim_err)?;
            let k = estimate_constants(model, &[model.base_point()]).map_err(|e| e.to_string())?;
            let gap = certify(&k, Objective::SpectralGap).gap.gap_lower_bound;
            let out = report::variance_json(&v, gap);
            if out["holds"] == json!(false) {
                code = EXIT_FAILED;
            }
            out
        }
        Some(Check::FirstVariation) => {
            let fv = heatsim::first_variation(cfg).map_err(sim_err)?;
            if !fv.holds {
                code = EXIT_FAILED;
            }
            report::first_variation_json(&fv)
        }
    };
    Ok((results, code))
}

/// `(σ, δ)` of the gradient bound from the spectral-gap optimum.
pub fn gap_coefficients(model: &ContactModel, samples: usize, seed: u64) -> Result<(f64, f64), String> {
    let mut points = vec![model.base_point()];
    if !model.is_lie() {
        points.extend(verify::sample_points(model, samples.saturating_sub(1), seed));
    }
    let k = estimate_constants(model, &points).map_err(|e| e.to_string())?;
    let r = certify(&k, Objective::SpectralGap);
    let g = gap_and_poincare(&r.gap_params);
    Ok((g.sigma, g.delta_coeff))
}
