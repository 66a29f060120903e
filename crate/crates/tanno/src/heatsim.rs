//! Monte Carlo simulation of the diffusion generated by `L = ΣX_i² + X₀`.
//!
//! The Stratonovich equation `dY = √2 Σ X_i(Y)∘dB^i + X₀(Y) dt` is integrated
//! with the stochastic Heun scheme on charts. Group models instead step by
//! `Y ← Y·exp(√2 Σ ΔB^i A_i + Δt A₀)`, which stays on the group exactly.
//! `X₀ = -Σ c_i X_i` is the divergence correction of the sub-Laplacian.
//!
//! Each path draws from its own ChaCha stream keyed by `(seed, path index)`,
//! so ensembles do not depend on the number of worker threads.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use tanno_core::frame::{matrix_to_point, point_to_matrix, structure_functions, Backend, FrameError, StructureData};
use tanno_core::jets::{Point, Polynomial, ScalarField};
use tanno_core::linalg;
use tanno_core::ContactModel;

/// Environment variable that caps the number of worker threads.
pub const WORKERS_ENV: &str = "TANNO_WORKERS";
/// Noise scale mapping `ΣX_i²` to Stratonovich noise fields `√2 X_i`.
pub const NOISE_SCALE: f64 = std::f64::consts::SQRT_2;
/// Step used for central differences along frame directions.
pub const FD_STEP: f64 = 1e-3;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("model is not compact: {0}")]
    NonCompact(String),
    #[error("path {path} hit a singular frame at t = {time}")]
    SingularFrame { path: usize, time: f64 },
    #[error(transparent)]
    Frame(#[from] FrameError),
}

#[derive(Debug, Clone)]
pub struct SimConfig<'m> {
    pub model: &'m ContactModel,
    /// Path `i` starts at `starts[i % starts.len()]`.
    pub starts: Vec<Point>,
    pub t: f64,
    pub dt: f64,
    pub paths: usize,
    pub seed: u64,
    /// Chart paths leaving this Euclidean ball are stopped; ignored on groups.
    pub escape_radius: Option<f64>,
    pub record_first_variation: bool,
}

impl<'m> SimConfig<'m> {
    pub fn new(model: &'m ContactModel, t: f64, dt: f64, paths: usize, seed: u64) -> Self {
        SimConfig {
            model,
            starts: vec![model.base_point()],
            t,
            dt,
            paths,
            seed,
            escape_radius: if model.is_lie() { None } else { Some(100.0) },
            record_first_variation: false,
        }
    }

    pub fn with_start(mut self, x: Point) -> Self {
        self.starts = vec![x];
        self
    }

    fn validate(&self) -> Result<(), SimError> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(SimError::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t >= 0.0) || !self.t.is_finite() {
            return Err(SimError::Config(format!("t must be non-negative, got {}", self.t)));
        }
        if self.paths == 0 {
            return Err(SimError::Config("path count must be at least 1".into()));
        }
        if self.starts.is_empty() {
            return Err(SimError::Config("no start point".into()));
        }
        for x in &self.starts {
            self.model.check_point(x)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathEnd {
    /// RNG stream the path was drawn from.
    pub stream: u64,
    pub point: Point,
    /// Time at which the path left the escape ball.
    pub escaped_at: Option<f64>,
    pub alpha: Option<DMatrix<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    pub paths: Vec<PathEnd>,
}

impl PathEnsemble {
    /// End points of the paths that did not escape.
    pub fn terminal_points(&self) -> impl Iterator<Item = &Point> {
        self.paths.iter().filter(|p| p.escaped_at.is_none()).map(|p| &p.point)
    }

    pub fn escaped(&self) -> usize {
        self.paths.iter().filter(|p| p.escaped_at.is_some()).count()
    }

    pub fn escaped_fraction(&self) -> f64 {
        self.escaped() as f64 / self.paths.len() as f64
    }
}

/// Runs `f` on a pool sized by [`WORKERS_ENV`] when it is set.
pub fn with_workers<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    let n = std::env::var(WORKERS_ENV).ok().and_then(|v| v.parse::<usize>().ok()).filter(|&n| n > 0);
    match n.and_then(|n| rayon::ThreadPoolBuilder::new().num_threads(n).build().ok()) {
        Some(pool) => pool.install(f),
        None => f(),
    }
}

pub fn path_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Drift coefficients `c_i(x)` for chart frames, from `c_i = -div X_i`
/// with respect to the volume `|det F|⁻¹ dx` that makes the frame orthonormal.
#[derive(Debug, Clone)]
struct ChartDrift {
    div: Vec<Polynomial>,
    det: Polynomial,
    x_det: Vec<Polynomial>,
}

fn poly_det(m: &[Vec<Polynomial>], rows: &[usize], col: usize, d: usize) -> Polynomial {
    // Laplace expansion along columns; m[field][coordinate]
    if rows.len() == 1 {
        return m[col][rows[0]].clone();
    }
    let mut acc = Polynomial::zero(d);
    for (pos, &r) in rows.iter().enumerate() {
        if m[col][r].is_zero() {
            continue;
        }
        let rest: Vec<usize> = rows.iter().copied().filter(|&q| q != r).collect();
        let minor = poly_det(m, &rest, col + 1, d);
        let sign = if pos % 2 == 0 { 1.0 } else { -1.0 };
        acc = acc.add(&m[col][r].mul(&minor).scale(sign));
    }
    acc
}

impl ChartDrift {
    fn new(fields: &[Vec<Polynomial>], m: usize) -> Self {
        let d = fields.len();
        let rows: Vec<usize> = (0..d).collect();
        let det = poly_det(fields, &rows, 0, d);
        let div = (0..m)
            .map(|i| (0..d).fold(Polynomial::zero(d), |acc, a| acc.add(&fields[i][a].derivative(a))))
            .collect();
        let x_det = (0..m)
            .map(|i| (0..d).fold(Polynomial::zero(d), |acc, a| acc.add(&fields[i][a].mul(&det.derivative(a)))))
            .collect();
        ChartDrift { div, det, x_det }
    }

    fn vanishes(&self) -> bool {
        self.div.iter().all(Polynomial::is_zero) && self.x_det.iter().all(Polynomial::is_zero)
    }

    fn c(&self, x: &[f64]) -> Option<Vec<f64>> {
        let det = self.det.eval(x);
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        Some(self.div.iter().zip(&self.x_det).map(|(dv, xd)| -dv.eval(x) + xd.eval(x) / det).collect())
    }
}

/// `c_i(x)` computed from the coordinate divergence of the frame fields.
pub fn chart_drift_coefficients(model: &ContactModel, x: &Point) -> Option<Vec<f64>> {
    let Backend::Chart(ch) = model.backend() else { return None };
    ChartDrift::new(&ch.fields, model.horizontal_dim()).c(x.coords())
}

enum Dynamics<'m> {
    Group { size: usize, gens: Vec<DMatrix<f64>>, drift: DMatrix<f64>, omega: Vec<DMatrix<f64>> },
    Chart { model: &'m ContactModel, fields: Vec<Vec<Polynomial>>, drift: Option<ChartDrift> },
}

/// `(ω_k)_{jl}`: coefficient of `X_l` in `[X_k, X_j]`, with index `2n` for `Z`
/// and `k = 2n` standing for the drift field `X₀`.
fn omega_matrices(sd: &StructureData) -> Vec<DMatrix<f64>> {
    let m = sd.horizontal_dim();
    let mut out: Vec<DMatrix<f64>> = (0..m)
        .map(|k| {
            DMatrix::from_fn(m + 1, m + 1, |j, l| match (j < m, l < m) {
                (true, true) => sd.w[(k, j, l)],
                (true, false) => sd.gamma[(k, j)],
                (false, true) => sd.delta[(k, l)],
                (false, false) => sd.z_component[k],
            })
        })
        .collect();
    let c = sd.c();
    let mut w0 = DMatrix::zeros(m + 1, m + 1);
    for (i, om) in out.iter().enumerate() {
        w0 -= om * c[i];
    }
    for j in 0..=m {
        let dc = sd.dc(j);
        for l in 0..m {
            w0[(j, l)] += dc[l];
        }
    }
    out.push(w0);
    out
}

impl<'m> Dynamics<'m> {
    fn new(model: &'m ContactModel) -> Result<Self, SimError> {
        let m = model.horizontal_dim();
        Ok(match model.backend() {
            Backend::Lie(lie) => {
                let sd = structure_functions(model, &model.base_point())?;
                let c = sd.c();
                let size = lie.matrix_size();
                let mut drift = DMatrix::zeros(size, size);
                for i in 0..m {
                    drift -= &lie.generators[i] * c[i];
                }
                Dynamics::Group { size, gens: lie.generators[..m].to_vec(), drift, omega: omega_matrices(&sd) }
            }
            Backend::Chart(ch) => {
                let drift = ChartDrift::new(&ch.fields, m);
                let drift = (!drift.vanishes()).then_some(drift);
                Dynamics::Chart { model, fields: ch.fields.clone(), drift }
            }
        })
    }

    fn m(&self) -> usize {
        match self {
            Dynamics::Group { gens, .. } => gens.len(),
            Dynamics::Chart { model, .. } => model.horizontal_dim(),
        }
    }

    /// Chart increment `√2 Σ ΔB_i X_i(x) + h X₀(x)`.
    fn chart_increment(&self, x: &[f64], db: &[f64], h: f64) -> Option<Vec<f64>> {
        let Dynamics::Chart { fields, drift, .. } = self else { unreachable!() };
        let d = x.len();
        let mut coef: Vec<f64> = db.iter().map(|b| NOISE_SCALE * b).collect();
        if let Some(dr) = drift {
            let c = dr.c(x)?;
            for (k, ci) in coef.iter_mut().zip(c) {
                *k -= h * ci;
            }
        }
        let mut out = vec![0.0; d];
        for (i, k) in coef.iter().enumerate() {
            for a in 0..d {
                out[a] += k * fields[i][a].eval(x);
            }
        }
        Some(out)
    }

    fn omega_at(&self, x: &Point) -> Result<Vec<DMatrix<f64>>, SimError> {
        match self {
            Dynamics::Group { omega, .. } => Ok(omega.clone()),
            Dynamics::Chart { model, .. } => Ok(omega_matrices(&structure_functions(model, x)?)),
        }
    }
}

/// `Σ_k coef_k ω_k + h ω₀`.
fn omega_combination(omega: &[DMatrix<f64>], db: &[f64], h: f64) -> DMatrix<f64> {
    let m = db.len();
    let mut out = &omega[m] * h;
    for (k, b) in db.iter().enumerate() {
        out += &omega[k] * (NOISE_SCALE * b);
    }
    out
}

struct PathRecord {
    end: PathEnd,
    snapshots: Vec<Option<Point>>,
}

fn run_path(
    dynamics: &Dynamics,
    cfg: &SimConfig,
    path: usize,
    stream: u64,
    checkpoints: &[f64],
) -> Result<PathRecord, SimError> {
    let mut rng = path_rng(cfg.seed, stream);
    let m = dynamics.m();
    let mut x = cfg.starts[path % cfg.starts.len()].clone();
    let mut alpha = cfg.record_first_variation.then(|| DMatrix::identity(m + 1, m + 1));
    let mut db = vec![0.0; m];
    let mut snapshots = Vec::with_capacity(checkpoints.len());
    let mut now = 0.0;
    let mut escaped_at = None;
    let mut group_y = match dynamics {
        Dynamics::Group { size, .. } => Some(point_to_matrix(&x, *size)),
        _ => None,
    };
    'outer: for &target in checkpoints {
        let span = target - now;
        let steps = if span > 0.0 { (span / cfg.dt).ceil().max(1.0) as usize } else { 0 };
        let h = if steps > 0 { span / steps as f64 } else { 0.0 };
        let sqrt_h = h.sqrt();
        for s in 0..steps {
            for b in db.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *b = z * sqrt_h;
            }
            let t_step = now + (s + 1) as f64 * h;
            let omega0 = if alpha.is_some() { Some(dynamics.omega_at(&x)?) } else { None };
            match dynamics {
                Dynamics::Group { gens, drift, .. } => {
                    let y = group_y.as_mut().expect("group state");
                    let mut a = drift * h;
                    for (g, b) in gens.iter().zip(&db) {
                        a += g * (NOISE_SCALE * b);
                    }
                    *y = &*y * linalg::expm(&a);
                    x = matrix_to_point(y);
                }
                Dynamics::Chart { .. } => {
                    let xs = x.coords();
                    let k1 = dynamics
                        .chart_increment(xs, &db, h)
                        .ok_or(SimError::SingularFrame { path, time: t_step })?;
                    let pred: Vec<f64> = xs.iter().zip(&k1).map(|(a, b)| a + b).collect();
                    let k2 = dynamics
                        .chart_increment(&pred, &db, h)
                        .ok_or(SimError::SingularFrame { path, time: t_step })?;
                    x = Point(xs.iter().zip(k1.iter().zip(&k2)).map(|(a, (p, q))| a + 0.5 * (p + q)).collect());
                }
            }
            if let (Some(al), Some(om0)) = (alpha.as_mut(), omega0) {
                let w0 = omega_combination(&om0, &db, h);
                let pred = &*al - &*al * &w0;
                let w1 = omega_combination(&dynamics.omega_at(&x)?, &db, h);
                *al = &*al - (&*al * &w0 + &pred * &w1) * 0.5;
            }
            if let Some(r) = cfg.escape_radius.filter(|_| group_y.is_none()) {
                let norm = x.coords().iter().map(|v| v * v).sum::<f64>().sqrt();
                if !(norm <= r) {
                    escaped_at = Some(t_step);
                    snapshots.push(None);
                    break 'outer;
                }
            }
        }
        now = target;
        snapshots.push(Some(x.clone()));
    }
    while snapshots.len() < checkpoints.len() {
        snapshots.push(None);
    }
    Ok(PathRecord { end: PathEnd { stream, point: x, escaped_at, alpha }, snapshots })
}

fn run_ensemble(cfg: &SimConfig, checkpoints: &[f64], stream_offset: u64) -> Result<Vec<PathRecord>, SimError> {
    cfg.validate()?;
    let dynamics = Dynamics::new(cfg.model)?;
    let records: Vec<Result<PathRecord, SimError>> = with_workers(|| {
        (0..cfg.paths)
            .into_par_iter()
            .map(|i| run_path(&dynamics, cfg, i, stream_offset + i as u64, checkpoints))
            .collect()
    });
    records.into_iter().collect()
}

pub fn simulate_paths(cfg: &SimConfig) -> Result<PathEnsemble, SimError> {
    let records = run_ensemble(cfg, &[cfg.t], 0)?;
    Ok(PathEnsemble { paths: records.into_iter().map(|r| r.end).collect() })
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn from_samples(v: &[f64]) -> Self {
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = if v.len() > 1 { v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0) } else { 0.0 };
        Estimate { mean, stderr: (var / n).sqrt() }
    }
}

/// `f` at every path end, with escaped paths contributing 0.
pub fn values_at_ends(ens: &PathEnsemble, f: &ScalarField) -> Vec<f64> {
    ens.paths.iter().map(|p| if p.escaped_at.is_some() { 0.0 } else { f.eval(p.point.coords()) }).collect()
}

/// `P_t f(x) = E[f(Y_t)]` under the sub-Markov convention.
pub fn estimate_semigroup(cfg: &SimConfig, f: &ScalarField) -> Result<Estimate, SimError> {
    let ens = simulate_paths(cfg)?;
    Ok(Estimate::from_samples(&values_at_ends(&ens, f)))
}

/// `(Γ(f), Γ^Z(f))` at `x` from the Euclidean gradient and the frame matrix.
pub fn gamma_pair(model: &ContactModel, f: &ScalarField, x: &Point) -> Result<(f64, f64), FrameError> {
    let frame = model.frame_matrix(x)?;
    let grad = DVector::from_vec(f.gradient(x.coords()));
    let xf = frame.transpose() * grad;
    let m = model.horizontal_dim();
    Ok((xf.rows(0, m).norm_squared(), xf[m] * xf[m]))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FirstVariation {
    pub alphas: Vec<DMatrix<f64>>,
    /// Mean Frobenius norm of `α(t)`.
    pub mean_norm: Estimate,
    /// `C₁ e^{C₂ t}` with `C₂` from sampled sup-norms of the ω matrices.
    pub bound: f64,
    pub c1: f64,
    pub c2: f64,
    pub holds: bool,
}

fn op_norm(a: &DMatrix<f64>) -> f64 {
    a.clone().singular_values().max()
}

/// Integrates `dα = -α(ω₀ dt + √2 Σ ω_k∘dB^k)` alongside the paths.
pub fn first_variation(cfg: &SimConfig) -> Result<FirstVariation, SimError> {
    let mut c = cfg.clone();
    c.record_first_variation = true;
    let ens = simulate_paths(&c)?;
    let alphas: Vec<DMatrix<f64>> = ens.paths.iter().filter_map(|p| p.alpha.clone()).collect();
    let norms: Vec<f64> = alphas.iter().map(|a| a.norm()).collect();
    let mean_norm = Estimate::from_samples(&norms);
    // sup-norms over the start points and the reached end points
    let dynamics = Dynamics::new(cfg.model)?;
    let m = cfg.model.horizontal_dim();
    let mut c2: f64 = 0.0;
    let probes: Vec<&Point> = cfg.starts.iter().chain(ens.terminal_points()).collect();
    for x in probes.iter().take(64) {
        let om = dynamics.omega_at(x)?;
        let sq = (0..m).fold(DMatrix::zeros(m + 1, m + 1), |acc, k| acc + &om[k] * &om[k]);
        let val = op_norm(&om[m]) + op_norm(&sq) + (0..m).map(|k| op_norm(&om[k]).powi(2)).sum::<f64>();
        c2 = c2.max(val);
    }
    let c1 = ((m + 1) as f64).sqrt();
    let bound = c1 * (c2 * cfg.t).exp();
    let holds = mean_norm.mean - 3.0 * mean_norm.stderr <= bound;
    Ok(FirstVariation { alphas, mean_norm, bound, c1, c2, holds })
}

/// Moves `x` by `s` along frame field `k`.
fn perturb(model: &ContactModel, x: &Point, k: usize, s: f64) -> Result<Point, FrameError> {
    match model.backend() {
        Backend::Lie(lie) => {
            let size = lie.matrix_size();
            let y = point_to_matrix(x, size) * linalg::expm(&(&lie.generators[k] * s));
            Ok(matrix_to_point(&y))
        }
        Backend::Chart(_) => {
            let frame = model.frame_matrix(x)?;
            Ok(Point(x.coords().iter().enumerate().map(|(a, v)| v + s * frame[(a, k)]).collect()))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientCheck {
    pub t: f64,
    pub sigma: f64,
    pub delta: f64,
    /// `X_i P_t f(x)` and `Z P_t f(x)`.
    pub gradient: Vec<f64>,
    /// `δΓ(P_t f) + Γ^Z(P_t f)`.
    pub lhs: f64,
    pub lhs_stderr: f64,
    /// `e^{-σt}(δ P_tΓ(f) + P_tΓ^Z(f))`.
    pub rhs: f64,
    pub rhs_stderr: f64,
    pub holds: bool,
    /// The same comparison with δ on the vertical terms instead.
    pub swapped_lhs: f64,
    pub swapped_rhs: f64,
    pub swapped_holds: bool,
}

/// Compares both sides of the gradient bound at `cfg.starts[0]`.
///
/// Gradients of `P_t f` come from central differences over common random
/// numbers; `P_tΓ(f)` and `P_tΓ^Z(f)` are plain Monte Carlo averages.
pub fn check_gradient_bound(cfg: &SimConfig, f: &ScalarField, sigma: f64, delta: f64) -> Result<GradientCheck, SimError> {
    cfg.validate()?;
    let model = cfg.model;
    let m = model.horizontal_dim();
    let x = cfg.starts[0].clone();
    let n = cfg.paths;

    // per-path finite differences, all ensembles share streams
    let mut diffs = vec![vec![0.0; m + 1]; n];
    for k in 0..=m {
        let plus = simulate_paths(&cfg.clone().with_start(perturb(model, &x, k, FD_STEP)?))?;
        let minus = simulate_paths(&cfg.clone().with_start(perturb(model, &x, k, -FD_STEP)?))?;
        let vp = values_at_ends(&plus, f);
        let vm = values_at_ends(&minus, f);
        for j in 0..n {
            diffs[j][k] = (vp[j] - vm[j]) / (2.0 * FD_STEP);
        }
    }
    let mean: Vec<f64> = (0..=m).map(|k| diffs.iter().map(|d| d[k]).sum::<f64>() / n as f64).collect();
    let cov = DMatrix::from_fn(m + 1, m + 1, |a, b| {
        if n < 2 {
            return 0.0;
        }
        diffs.iter().map(|d| (d[a] - mean[a]) * (d[b] - mean[b])).sum::<f64>() / (n as f64 - 1.0)
    });
    let quad = |wh: f64, wz: f64| {
        let val = wh * mean[..m].iter().map(|v| v * v).sum::<f64>() + wz * mean[m] * mean[m];
        let grad = DVector::from_fn(m + 1, |i, _| 2.0 * mean[i] * if i < m { wh } else { wz });
        let se = (grad.dot(&(&cov * &grad)) / n as f64).max(0.0).sqrt();
        (val, se)
    };

    let base = simulate_paths(cfg)?;
    let mut gh = Vec::with_capacity(n);
    let mut gz = Vec::with_capacity(n);
    for p in &base.paths {
        if p.escaped_at.is_some() {
            gh.push(0.0);
            gz.push(0.0);
        } else {
            let (a, b) = gamma_pair(model, f, &p.point)?;
            gh.push(a);
            gz.push(b);
        }
    }
    let decay = (-sigma * cfg.t).exp();
    let side = |wh: f64, wz: f64| {
        let v: Vec<f64> = gh.iter().zip(&gz).map(|(a, b)| decay * (wh * a + wz * b)).collect();
        Estimate::from_samples(&v)
    };

    let (lhs, lhs_stderr) = quad(delta, 1.0);
    let rhs = side(delta, 1.0);
    let (swapped_lhs, swapped_se) = quad(1.0, delta);
    let swapped = side(1.0, delta);
    // three standard errors plus the O(h²) central-difference error
    let fd = |scale: f64| 10.0 * FD_STEP * FD_STEP * (1.0 + scale.abs());
    let holds = lhs <= rhs.mean + 3.0 * (lhs_stderr.powi(2) + rhs.stderr.powi(2)).sqrt() + fd(rhs.mean);
    let swapped_holds =
        swapped_lhs <= swapped.mean + 3.0 * (swapped_se.powi(2) + swapped.stderr.powi(2)).sqrt() + fd(swapped.mean);
    Ok(GradientCheck {
        t: cfg.t,
        sigma,
        delta,
        gradient: mean,
        lhs,
        lhs_stderr,
        rhs: rhs.mean,
        rhs_stderr: rhs.stderr,
        holds,
        swapped_lhs,
        swapped_rhs: swapped.mean,
        swapped_holds,
    })
}

/// Killing form of the Lie algebra spanned by the frame, from the bracket table.
pub fn killing_form(sd: &StructureData) -> DMatrix<f64> {
    let m = sd.horizontal_dim();
    // ad(e_a) as a matrix acting on coefficient vectors, e_m = Z
    let ad: Vec<DMatrix<f64>> = (0..=m)
        .map(|a| {
            DMatrix::from_fn(m + 1, m + 1, |out, inp| {
                match (a < m, inp < m) {
                    (true, true) => {
                        if out < m {
                            sd.w[(a, inp, out)]
                        } else {
                            sd.gamma[(a, inp)]
                        }
                    }
                    (true, false) => {
                        if out < m {
                            sd.delta[(a, out)]
                        } else {
                            sd.z_component[a]
                        }
                    }
                    (false, true) => {
                        if out < m {
                            -sd.delta[(inp, out)]
                        } else {
                            -sd.z_component[inp]
                        }
                    }
                    (false, false) => 0.0,
                }
            })
        })
        .collect();
    DMatrix::from_fn(m + 1, m + 1, |a, b| (&ad[a] * &ad[b]).trace())
}

/// Group models whose Lie algebra has a negative definite Killing form.
pub fn is_compact(model: &ContactModel) -> Result<bool, FrameError> {
    if !model.is_lie() {
        return Ok(false);
    }
    let k = killing_form(&structure_functions(model, &model.base_point())?);
    Ok(k.symmetric_eigenvalues().max() < -1e-12)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceDecay {
    pub times: Vec<f64>,
    /// `Var_μ(P_t f)` for each time.
    pub variances: Vec<f64>,
    pub variance_stderr: Vec<f64>,
    /// `None` when the variance vanishes or is not positive on the grid.
    pub rate: Option<f64>,
    pub ci_half_width: Option<f64>,
    pub degenerate: bool,
    pub outer: usize,
    pub inner: usize,
    pub burn_in: f64,
    /// Mean of `f` on the burned-in sample and after half the burn-in.
    pub stationary_mean: Estimate,
    pub half_burn_in_mean: Estimate,
}

/// Two-halves product estimate of the variance of the conditional means.
fn product_variance(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (n - 1.0)
}

fn log_slope(times: &[f64], vars: &[f64]) -> Option<f64> {
    if vars.iter().any(|v| !(*v > 0.0)) {
        return None;
    }
    let n = times.len() as f64;
    let ys: Vec<f64> = vars.iter().map(|v| v.ln()).collect();
    let mt = times.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = times.iter().map(|t| (t - mt) * (t - mt)).sum();
    let sxy: f64 = times.iter().zip(&ys).map(|(t, y)| (t - mt) * (y - my)).sum();
    Some(sxy / sxx)
}

pub const JACKKNIFE_GROUPS: usize = 20;

/// Decay rate of `Var_μ(P_t f)` under the stationary law.
///
/// `outer` paths are burned in from the base point to approximate the
/// stationary law; from each of them `inner` paths estimate `P_t f` on the
/// grid, split into two independent halves whose product estimates the
/// variance without inner-noise bias. The rate is minus the least-squares
/// slope of the log variance and its confidence half-width is 1.96 jackknife
/// standard errors over groups of outer paths.
pub fn variance_decay_rate(
    model: &ContactModel,
    f: &ScalarField,
    times: &[f64],
    dt: f64,
    outer: usize,
    inner: usize,
    burn_in: f64,
    seed: u64,
) -> Result<VarianceDecay, SimError> {
    if !is_compact(model)? {
        return Err(SimError::NonCompact(format!("{} has no negative definite Killing form", model.name())));
    }
    if inner < 2 || inner % 2 != 0 {
        return Err(SimError::Config("inner path count must be even and at least 2".into()));
    }
    if outer < 2 * JACKKNIFE_GROUPS {
        return Err(SimError::Config(format!("outer path count must be at least {}", 2 * JACKKNIFE_GROUPS)));
    }
    if times.len() < 2 || times.windows(2).any(|w| !(w[1] > w[0])) || !(times[0] >= 0.0) {
        return Err(SimError::Config("time grid must be increasing with at least two points".into()));
    }
    let mut burn = SimConfig::new(model, burn_in, dt, outer, seed);
    burn.escape_radius = None;
    let recs = run_ensemble(&burn, &[0.5 * burn_in, burn_in], 0)?;
    let starts: Vec<Point> = recs.iter().map(|r| r.end.point.clone()).collect();
    let half: Vec<f64> = recs.iter().map(|r| f.eval(r.snapshots[0].as_ref().expect("groups never escape").coords())).collect();
    let full: Vec<f64> = starts.iter().map(|x| f.eval(x.coords())).collect();

    let mut nested = SimConfig::new(model, times[times.len() - 1], dt, outer * inner, seed);
    nested.escape_radius = None;
    // path i starts at starts[i % outer]; the inner index is i / outer
    nested.starts = starts;
    let recs = run_ensemble(&nested, times, outer as u64)?;
    let nt = times.len();
    let halves = inner / 2;
    let mut a = vec![vec![0.0; outer]; nt];
    let mut b = vec![vec![0.0; outer]; nt];
    for (i, r) in recs.iter().enumerate() {
        let (j, k) = (i % outer, i / outer);
        for (ti, snap) in r.snapshots.iter().enumerate() {
            let v = f.eval(snap.as_ref().expect("groups never escape").coords()) / halves as f64;
            if k < halves {
                a[ti][j] += v;
            } else {
                b[ti][j] += v;
            }
        }
    }
    let variances: Vec<f64> = (0..nt).map(|ti| product_variance(&a[ti], &b[ti])).collect();
    let variance_stderr: Vec<f64> = (0..nt)
        .map(|ti| {
            let ma = a[ti].iter().sum::<f64>() / outer as f64;
            let mb = b[ti].iter().sum::<f64>() / outer as f64;
            let prods: Vec<f64> = a[ti].iter().zip(&b[ti]).map(|(x, y)| (x - ma) * (y - mb)).collect();
            Estimate::from_samples(&prods).stderr
        })
        .collect();
    let scale = full.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1.0);
    let degenerate = variances.iter().all(|v| v.abs() <= 1e-14 * scale * scale);
    let rate = if degenerate { None } else { log_slope(times, &variances).map(|s| -s) };

    let ci_half_width = rate.and_then(|_| {
        let g = JACKKNIFE_GROUPS;
        let mut reps = Vec::with_capacity(g);
        for drop in 0..g {
            let keep: Vec<usize> = (0..outer).filter(|j| j % g != drop).collect();
            let vars: Vec<f64> = (0..nt)
                .map(|ti| {
                    let aa: Vec<f64> = keep.iter().map(|&j| a[ti][j]).collect();
                    let bb: Vec<f64> = keep.iter().map(|&j| b[ti][j]).collect();
                    product_variance(&aa, &bb)
                })
                .collect();
            reps.push(-log_slope(times, &vars)?);
        }
        let mean = reps.iter().sum::<f64>() / g as f64;
        let var = (g as f64 - 1.0) / g as f64 * reps.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>();
        Some(1.96 * var.sqrt())
    });

    Ok(VarianceDecay {
        times: times.to_vec(),
        variances,
        variance_stderr,
        rate,
        ci_half_width,
        degenerate,
        outer,
        inner,
        burn_in,
        stationary_mean: Estimate::from_samples(&full),
        half_burn_in_mean: Estimate::from_samples(&half),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Completeness {
    pub paths: usize,
    pub escaped: usize,
    pub escaped_fraction: f64,
    /// Group backends cannot lose mass.
    pub structural: bool,
    /// `P_t 1`
    pub mass: Estimate,
}

pub fn completeness(cfg: &SimConfig) -> Result<Completeness, SimError> {
    let ens = simulate_paths(cfg)?;
    let one = ScalarField::Polynomial(Polynomial::constant(cfg.model.ambient_dim(), 1.0));
    Ok(Completeness {
        paths: cfg.paths,
        escaped: ens.escaped(),
        escaped_fraction: ens.escaped_fraction(),
        structural: cfg.model.is_lie(),
        mass: Estimate::from_samples(&values_at_ends(&ens, &one)),
    })
}
