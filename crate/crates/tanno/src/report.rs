//! JSON report envelopes. Maps are key-sorted and no wall-clock data is
//! recorded, so identical inputs give byte-identical output.

use serde_json::{json, Map, Value};
use tanno_core::cd::{CdConstants, CdParams, CertificateReport, GapCertificate, MyersCertificate, Optimum};
use tanno_core::frame::Backend;
use tanno_core::ContactModel;

use crate::heatsim::{Completeness, Estimate, FirstVariation, GradientCheck, VarianceDecay};
use crate::model_json::model_hash;
use crate::verify::VerifyReport;

pub const GENERATOR_CONVENTION: &str =
    "L = sum_i X_i^2 + X_0 simulated as Stratonovich dY = sqrt(2) sum_i X_i(Y) o dB^i + X_0(Y) dt";

pub fn model_descriptor(model: &ContactModel) -> Value {
    let params: Map<String, Value> = model.parameters().iter().map(|(k, v)| (k.clone(), json!(v))).collect();
    json!({
        "name": model.name(),
        "n": model.n(),
        "backend": match model.backend() { Backend::Chart(_) => "chart", Backend::Lie(_) => "lie" },
        "parameters": params,
        "tags": model.tags(),
        "hash": model_hash(model),
    })
}

pub fn envelope(command: &str, model: Option<&ContactModel>, parameters: Value, results: Value) -> Value {
    let mut env = json!({
        "tool": "tanno",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "parameters": parameters,
        "results": results,
    });
    if let Some(m) = model {
        env["model"] = model_descriptor(m);
    }
    env
}

pub fn render(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("json values always serialize") + "\n"
}

pub fn constants_json(k: &CdConstants) -> Value {
    json!({
        "c1": k.c1, "c2": k.c2, "c3": k.c3,
        "iota": k.iota, "alpha": k.alpha, "tau_hs": k.tau_hs,
        "kappa": k.kappa, "n": k.n,
        "samples": k.samples,
        "sample_hash": format!("{:016x}", k.sample_hash),
    })
}

pub fn params_json(p: &CdParams) -> Value {
    json!({
        "rho1": p.rho1, "rho2": p.rho2, "rho3": p.rho3, "kappa": p.kappa, "m": p.m,
        "z": p.z, "w": p.w,
        "cd": [p.rho1, p.rho2, p.rho3, p.kappa, p.m as f64],
    })
}

pub fn optimum_json(o: &Optimum) -> Value {
    json!({
        "objective": o.objective.name(),
        "value": o.value,
        "z": o.z, "w": o.w, "lambda": o.lambda,
        "message": o.message,
    })
}

pub fn myers_json(c: &MyersCertificate, p: &CdParams) -> Value {
    json!({
        "holds": c.holds,
        "margin": c.margin,
        "lambda": c.lambda,
        "c_lambda": c.c_lambda,
        "threshold_holds": c.threshold_holds,
        "disagreement": c.disagreement,
        "params": params_json(p),
    })
}

pub fn gap_json(g: &GapCertificate, p: &CdParams) -> Value {
    json!({
        "sigma": g.sigma,
        "delta_coeff": g.delta_coeff,
        "gap_lower_bound": g.gap_lower_bound,
        "poincare_constant": g.poincare_constant,
        "params": params_json(p),
    })
}

pub fn certificates_json(r: &CertificateReport, as_stated: &CdParams) -> Value {
    let any = r.myers.holds || r.gap.gap_lower_bound.is_some() || r.volume.finite_volume;
    json!({
        "constants": constants_json(&r.constants),
        "objective": optimum_json(&r.primary),
        "cd": params_json(&r.primary.params),
        "cd_as_stated": params_json(as_stated),
        "sasakian_limit": r.sasakian_limit,
        "myers": myers_json(&r.myers, &r.myers_params),
        "compact": r.myers.holds,
        "spectral_gap": gap_json(&r.gap, &r.gap_params),
        "volume": { "finite_volume": r.volume.finite_volume, "exp_growth": r.volume.exp_growth },
        "message": if any { Value::Null } else { json!("no positive certificate") },
    })
}

pub fn verify_json(r: &VerifyReport) -> Value {
    let results: Map<String, Value> = r
        .results
        .iter()
        .map(|res| {
            let witness = res.witness.as_ref().map(|w| {
                json!({
                    "index": w.index,
                    "point": w.point.coords(),
                    "f_seed": w.f_seed,
                    "nu": w.nu,
                    "lambda": w.lambda,
                })
            });
            let key = if res.identity.is_slack() { "min_slack" } else { "max_residual" };
            let mut v = json!({
                "checks": res.checks,
                "passed": res.passed,
                "gating": res.identity.gating(),
                "witness": witness,
            });
            v[key] = json!(res.worst);
            (res.identity.name().to_string(), v)
        })
        .collect();
    json!({
        "passed": r.passed(),
        "tolerance": r.tol,
        "constants": constants_json(&r.constants),
        "vertical_skipped": r.vertical_skipped,
        "identities": results,
    })
}

pub fn estimate_json(e: &Estimate) -> Value {
    json!({ "mean": e.mean, "stderr": e.stderr })
}

pub fn completeness_json(c: &Completeness) -> Value {
    json!({
        "paths": c.paths,
        "escaped": c.escaped,
        "escaped_fraction": c.escaped_fraction,
        "structural": c.structural,
        "mass": estimate_json(&c.mass),
    })
}

pub fn gradient_json(g: &GradientCheck) -> Value {
    json!({
        "t": g.t,
        "sigma": g.sigma,
        "delta": g.delta,
        "gradient": g.gradient,
        "lhs": g.lhs, "lhs_stderr": g.lhs_stderr,
        "rhs": g.rhs, "rhs_stderr": g.rhs_stderr,
        "holds": g.holds,
        "swapped": { "lhs": g.swapped_lhs, "rhs": g.swapped_rhs, "holds": g.swapped_holds },
    })
}

pub fn variance_json(v: &VarianceDecay, gap: Option<f64>) -> Value {
    let target = gap.map(|g| 2.0 * g);
    let holds = match (v.rate, v.ci_half_width, target) {
        (Some(r), Some(ci), Some(t)) => Some(r >= t - ci),
        _ => None,
    };
    json!({
        "times": v.times,
        "variances": v.variances,
        "variance_stderr": v.variance_stderr,
        "rate": v.rate,
        "ci_half_width": v.ci_half_width,
        "degenerate": v.degenerate,
        "outer_paths": v.outer,
        "inner_paths": v.inner,
        "burn_in": v.burn_in,
        "burn_in_diagnostic": {
            "stationary_mean": estimate_json(&v.stationary_mean),
            "half_burn_in_mean": estimate_json(&v.half_burn_in_mean),
        },
        "target_rate": target,
        "holds": holds,
    })
}

pub fn first_variation_json(f: &FirstVariation) -> Value {
    json!({
        "mean_norm": estimate_json(&f.mean_norm),
        "bound": f.bound,
        "c1": f.c1,
        "c2": f.c2,
        "holds": f.holds,
    })
}
