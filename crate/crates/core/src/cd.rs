//! Curvature-dimension constants, parameters and the certificates they imply.
//!
//! The constants bound the geometry over a sample of points:
//! `c1 = inf λ_min(Sym 𝓡)`, `c2 = sup ‖W‖²`, `c3 = sup ‖V‖²`,
//! `iota = sup ‖τ‖²_op`, `alpha = sup λ_max(∇_Z τ)` and `tau_hs = sup ‖τ‖²_HS`.
//! From them, for every `z, w > 0`,
//!
//! ```text
//! ρ1 = c1 - √c2 z/2 - √c3 w/2,   ρ2 = n/2 - √c2/(2z),   ρ3 = √c3/(2w) + tau_hs
//! ```
//!
//! with `κ = 1` and `m = 2n`.

use crate::frame::{diagnose, structure_functions, ContactModel, FrameError};
use crate::geometry::GeometryData;
use crate::jets::Point;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

pub const KAPPA: f64 = 1.0;
/// Adaptedness tolerance applied to every sample point.
pub const DIAGNOSTIC_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CdError {
    #[error("no sample points")]
    EmptySample,
    #[error("frame is not adapted at sample {index}: {flag} violated by {violation:e}")]
    NotAdapted { index: usize, flag: &'static str, violation: f64 },
    #[error(transparent)]
    Frame(#[from] FrameError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CdConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub iota: f64,
    pub alpha: f64,
    pub tau_hs: f64,
    pub kappa: f64,
    pub n: usize,
    pub samples: usize,
    pub sample_hash: u64,
}

/// FNV-1a over the bit patterns of all sample coordinates.
pub fn sample_hash(points: &[Point]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for p in points {
        for c in p.coords() {
            for byte in c.to_bits().to_le_bytes() {
                h ^= byte as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
    }
    h
}

pub fn estimate_constants(model: &ContactModel, points: &[Point]) -> Result<CdConstants, CdError> {
    if points.is_empty() {
        return Err(CdError::EmptySample);
    }
    let mut k = CdConstants {
        c1: f64::INFINITY,
        c2: 0.0,
        c3: 0.0,
        iota: 0.0,
        alpha: f64::NEG_INFINITY,
        tau_hs: 0.0,
        kappa: KAPPA,
        n: model.n(),
        samples: points.len(),
        sample_hash: sample_hash(points),
    };
    for (index, x) in points.iter().enumerate() {
        let sd = structure_functions(model, x)?;
        if let Some(bad) = diagnose(&sd, DIAGNOSTIC_TOL).flags.into_iter().find(|f| !f.passed) {
            return Err(CdError::NotAdapted { index, flag: bad.kind.label(), violation: bad.violation });
        }
        let g = GeometryData::from_structure(&sd);
        k.c1 = k.c1.min(g.ric_lower_bound());
        k.c2 = k.c2.max(g.w.norm_squared());
        k.c3 = k.c3.max(g.v.norm_squared());
        k.iota = k.iota.max(g.tau_op_sq());
        k.alpha = k.alpha.max(g.alpha_candidate());
        k.tau_hs = k.tau_hs.max(g.u_coeff);
    }
    k.alpha = k.alpha.max(0.0);
    Ok(k)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CdParams {
    pub rho1: f64,
    pub rho2: f64,
    pub rho3: f64,
    pub kappa: f64,
    pub m: usize,
    /// `None` when the `c2` term is absent and `z` plays no role.
    pub z: Option<f64>,
    /// `None` when the `c3` term is absent and `w` plays no role.
    pub w: Option<f64>,
}

impl CdParams {
    /// Certificates need `ρ2 > 0`.
    pub fn usable(&self) -> bool {
        self.rho2 > 0.0
    }

    /// `ρ3 = 0`, the limit in which the torsion-free formulas apply.
    pub fn sasakian_limit(&self) -> bool {
        self.rho3 == 0.0
    }
}

pub fn cd_params(k: &CdConstants, z: f64, w: f64) -> CdParams {
    let (s2, s3) = (libm::sqrt(k.c2), libm::sqrt(k.c3));
    let (zt, zv) = if k.c2 > 0.0 { (s2 * z / 2.0, s2 / (2.0 * z)) } else { (0.0, 0.0) };
    let (wt, wv) = if k.c3 > 0.0 { (s3 * w / 2.0, s3 / (2.0 * w)) } else { (0.0, 0.0) };
    CdParams {
        rho1: k.c1 - zt - wt,
        rho2: k.n as f64 / 2.0 - zv,
        rho3: wv + k.tau_hs,
        kappa: k.kappa,
        m: 2 * k.n,
        z: (k.c2 > 0.0).then_some(z),
        w: (k.c3 > 0.0).then_some(w),
    }
}

/// Parameters with the unsquared `c2, c3` and the `ι/4` vertical loss.
pub fn cd_params_as_stated(k: &CdConstants, z: f64, w: f64) -> CdParams {
    let (zt, zv) = if k.c2 > 0.0 { (k.c2 * z / 2.0, k.c2 / (2.0 * z)) } else { (0.0, 0.0) };
    let (wt, wv) = if k.c3 > 0.0 { (k.c3 * w / 2.0, k.c3 / (2.0 * w)) } else { (0.0, 0.0) };
    CdParams {
        rho1: k.c1 - zt - wt,
        rho2: k.n as f64 / 2.0 - zv,
        rho3: wv + k.iota / 4.0,
        kappa: k.kappa,
        m: 2 * k.n,
        z: (k.c2 > 0.0).then_some(z),
        w: (k.c3 > 0.0).then_some(w),
    }
}

/// `c(λ) = min{ρ1 - κ/λ² - λ²(2ι + α), ρ2/λ² - ρ3 λ²}`.
pub fn c_lambda(p: &CdParams, iota: f64, alpha: f64, lambda: f64) -> f64 {
    let mu = lambda * lambda;
    let s = 2.0 * iota + alpha;
    (p.rho1 - p.kappa / mu - s * mu).min(p.rho2 / mu - p.rho3 * mu)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MyersCertificate {
    pub holds: bool,
    /// `sup_λ c(λ)`.
    pub margin: f64,
    /// Maximizer, `None` when the supremum is not attained.
    pub lambda: Option<f64>,
    pub c_lambda: Option<f64>,
    /// The closed-form threshold test `ρ1 > √(ρ3/ρ2)κ + √(ρ2/ρ3)(2ι + α)`.
    pub threshold_holds: bool,
    pub disagreement: bool,
}

fn bisect(mut lo: f64, mut hi: f64, h: impl Fn(f64) -> f64) -> f64 {
    // h(lo) < 0 <= h(hi)
    for _ in 0..300 {
        let mid = if hi / lo > 4.0 { libm::sqrt(lo * hi) } else { 0.5 * (lo + hi) };
        if mid <= lo || mid >= hi {
            break;
        }
        if h(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

pub fn myers_certificate(p: &CdParams, iota: f64, alpha: f64) -> MyersCertificate {
    let s = 2.0 * iota + alpha;
    let kappa = p.kappa;
    let g1 = |mu: f64| p.rho1 - kappa / mu - s * mu;
    let g2 = |mu: f64| p.rho2 / mu - p.rho3 * mu;
    let h = |mu: f64| g1(mu) - g2(mu);

    let threshold_holds = if p.rho3 > 0.0 {
        p.rho1 > libm::sqrt(p.rho3 / p.rho2) * kappa + libm::sqrt(p.rho2 / p.rho3) * s
    } else {
        s == 0.0 && p.rho1 > 0.0
    };

    let (margin, mu_opt) = if !p.usable() {
        (f64::NEG_INFINITY, None)
    } else {
        // g1 is concave with peak at μ* = √(κ/s); g2 is decreasing, so the
        // maximum of min(g1, g2) sits at μ* or at the first crossing before it
        let mu_star = if s > 0.0 { Some(libm::sqrt(kappa / s)) } else { None };
        match mu_star {
            Some(ms) if h(ms) <= 0.0 => (g1(ms), Some(ms)),
            Some(ms) => {
                let r = bisect(ms * 1e-300_f64.max(f64::MIN_POSITIVE), ms, h);
                (g2(r), Some(r))
            }
            None => {
                let mut hi = 1.0;
                let mut steps = 0;
                while h(hi) < 0.0 && steps < 1000 && hi < 1e300 {
                    hi *= 2.0;
                    steps += 1;
                }
                if h(hi) < 0.0 {
                    // ρ3 = 0 and ρ1 <= 0: c(λ) increases towards ρ1 without attaining it
                    (p.rho1.min(0.0), None)
                } else {
                    let r = bisect(f64::MIN_POSITIVE, hi, h);
                    (g2(r), Some(r))
                }
            }
        }
    };
    let holds = margin > 0.0;
    let lambda = mu_opt.map(libm::sqrt);
    MyersCertificate {
        holds,
        margin,
        lambda,
        c_lambda: lambda.map(|l| c_lambda(p, iota, alpha, l)),
        threshold_holds,
        disagreement: holds != threshold_holds,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapCertificate {
    pub sigma: f64,
    pub delta_coeff: f64,
    pub gap_lower_bound: Option<f64>,
    pub poincare_constant: Option<f64>,
}

pub fn gap_and_poincare(p: &CdParams) -> GapCertificate {
    let k = p.kappa;
    let root = libm::sqrt(p.rho2 * p.rho3);
    let sigma = 2.0 * (p.rho1 * p.rho2 - k * root) / (p.rho2 + k);
    let delta_coeff = (sigma + libm::sqrt(sigma * sigma + 16.0 * p.rho2 * p.rho3)) / (4.0 * p.rho2);
    let gap = (p.usable() && sigma > 0.0).then_some(sigma / 2.0);
    GapCertificate { sigma, delta_coeff, gap_lower_bound: gap, poincare_constant: gap.map(|g| 1.0 / g) }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VolumeCertificate {
    pub finite_volume: bool,
    /// Exponential growth of balls; available whenever ι and α are finite.
    pub exp_growth: bool,
}

pub fn volume_certificate(k: &CdConstants, p: &CdParams) -> VolumeCertificate {
    let finite_volume = p.usable() && p.rho1 - p.kappa * libm::sqrt(p.rho3 / p.rho2) > 0.0;
    VolumeCertificate { finite_volume, exp_growth: k.iota.is_finite() && k.alpha.is_finite() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    SpectralGap,
    MyersMargin,
    CLambda,
}

impl Objective {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "spectral_gap" => Some(Objective::SpectralGap),
            "myers_margin" => Some(Objective::MyersMargin),
            "c_lambda" => Some(Objective::CLambda),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Objective::SpectralGap => "spectral_gap",
            Objective::MyersMargin => "myers_margin",
            Objective::CLambda => "c_lambda",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Optimum {
    pub objective: Objective,
    /// Best value found; `None` if the objective is undefined everywhere.
    pub value: Option<f64>,
    pub z: Option<f64>,
    pub w: Option<f64>,
    pub lambda: Option<f64>,
    pub params: CdParams,
    pub message: Option<String>,
}

impl Optimum {
    pub fn positive(&self) -> bool {
        self.value.is_some_and(|v| v > 0.0)
    }
}

pub const ZW_RANGE: (f64, f64) = (1e-3, 1e3);
const LAMBDA_RANGE: (f64, f64) = (1e-2, 1e2);

fn gap_value(p: &CdParams) -> f64 {
    (p.rho1 * p.rho2 - p.kappa * libm::sqrt(p.rho2 * p.rho3)) / (p.rho2 + p.kappa)
}

/// Grid search on log scales followed by Nelder–Mead refinement.
pub fn optimize_zw(k: &CdConstants, objective: Objective) -> Optimum {
    let use_z = k.c2 > 0.0;
    let use_w = k.c3 > 0.0;
    let use_l = objective == Objective::CLambda;
    let mut ranges = Vec::new();
    if use_z {
        ranges.push(ZW_RANGE);
    }
    if use_w {
        ranges.push(ZW_RANGE);
    }
    if use_l {
        ranges.push(LAMBDA_RANGE);
    }
    let unpack = |x: &[f64]| {
        let mut it = x.iter().map(|v| libm::exp(*v));
        let z = if use_z { it.next().unwrap() } else { 1.0 };
        let w = if use_w { it.next().unwrap() } else { 1.0 };
        let l = if use_l { it.next().unwrap() } else { 1.0 };
        (z, w, l)
    };
    let eval = |x: &[f64]| -> f64 {
        let (z, w, l) = unpack(x);
        let p = cd_params(k, z, w);
        if !p.usable() {
            return f64::NEG_INFINITY;
        }
        match objective {
            Objective::SpectralGap => gap_value(&p),
            Objective::MyersMargin => myers_certificate(&p, k.iota, k.alpha).margin,
            Objective::CLambda => c_lambda(&p, k.iota, k.alpha, l),
        }
    };
    let logs: Vec<(f64, f64)> = ranges.iter().map(|(a, b)| (libm::log(*a), libm::log(*b))).collect();
    let best = grid_then_simplex(&logs, &eval);
    let (z, w, l) = unpack(&best.0);
    let params = cd_params(k, z, w);
    let value = best.1.is_finite().then_some(best.1);
    let lambda = match objective {
        Objective::CLambda => Some(l),
        Objective::MyersMargin => myers_certificate(&params, k.iota, k.alpha).lambda,
        Objective::SpectralGap => None,
    };
    let message = match value {
        None => Some(String::from("objective undefined for every (z, w): ρ2 <= 0")),
        Some(v) if v <= 0.0 => Some(String::from("no positive certificate")),
        _ => None,
    };
    Optimum { objective, value, z: use_z.then_some(z), w: use_w.then_some(w), lambda, params, message }
}

fn grid_then_simplex(ranges: &[(f64, f64)], f: &dyn Fn(&[f64]) -> f64) -> (Vec<f64>, f64) {
    let dim = ranges.len();
    if dim == 0 {
        return (vec![], f(&[]));
    }
    const GRID: usize = 25;
    let mut best = (vec![0.0; dim], f64::NEG_INFINITY);
    let total = GRID.pow(dim as u32);
    let mut x = vec![0.0; dim];
    for idx in 0..total {
        let mut r = idx;
        for (d, (lo, hi)) in ranges.iter().enumerate() {
            x[d] = lo + (hi - lo) * (r % GRID) as f64 / (GRID - 1) as f64;
            r /= GRID;
        }
        let v = f(&x);
        if v > best.1 {
            best = (x.clone(), v);
        }
    }
    if !best.1.is_finite() {
        return best;
    }
    let step = (ranges[0].1 - ranges[0].0) / (GRID - 1) as f64;
    let refined = nelder_mead(&best.0, step, &|x| {
        let inside = x.iter().zip(ranges).all(|(v, (lo, hi))| *v >= *lo && *v <= *hi);
        if inside {
            -f(x)
        } else {
            f64::INFINITY
        }
    });
    if -refined.1 > best.1 {
        (refined.0, -refined.1)
    } else {
        best
    }
}

/// Minimizes `f` from `x0` with a fixed iteration budget.
fn nelder_mead(x0: &[f64], step: f64, f: &dyn Fn(&[f64]) -> f64) -> (Vec<f64>, f64) {
    let dim = x0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    simplex.push((x0.to_vec(), f(x0)));
    for d in 0..dim {
        let mut x = x0.to_vec();
        x[d] += step;
        let v = f(&x);
        simplex.push((x, v));
    }
    let point = |c: &[f64], t: &[f64], s: f64| -> Vec<f64> { c.iter().zip(t).map(|(a, b)| a + s * (b - a)).collect() };
    for _ in 0..500 {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = simplex[dim].1 - simplex[0].1;
        if spread.abs() < 1e-15 && simplex[0].1.is_finite() {
            break;
        }
        let mut centroid = vec![0.0; dim];
        for (x, _) in &simplex[..dim] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / dim as f64;
            }
        }
        let worst = simplex[dim].clone();
        let refl = point(&centroid, &worst.0, -1.0);
        let fr = f(&refl);
        if fr < simplex[0].1 {
            let exp = point(&centroid, &worst.0, -2.0);
            let fe = f(&exp);
            simplex[dim] = if fe < fr { (exp, fe) } else { (refl, fr) };
        } else if fr < simplex[dim - 1].1 {
            simplex[dim] = (refl, fr);
        } else {
            let con = point(&centroid, &worst.0, 0.5);
            let fc = f(&con);
            if fc < worst.1 {
                simplex[dim] = (con, fc);
            } else {
                let best = simplex[0].0.clone();
                for entry in simplex.iter_mut().skip(1) {
                    let x = point(&best, &entry.0, 0.5);
                    let v = f(&x);
                    *entry = (x, v);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex.swap_remove(0)
}

/// All certificates, each evaluated at the `(z, w)` that favours it.
#[derive(Debug, Clone, PartialEq)]
pub struct CertificateReport {
    pub constants: CdConstants,
    pub primary: Optimum,
    pub myers: MyersCertificate,
    pub myers_params: CdParams,
    pub gap: GapCertificate,
    pub gap_params: CdParams,
    pub volume: VolumeCertificate,
    pub sasakian_limit: bool,
}

pub fn certify(k: &CdConstants, objective: Objective) -> CertificateReport {
    let primary = optimize_zw(k, objective);
    let myers_opt = optimize_zw(k, Objective::MyersMargin);
    let gap_opt = optimize_zw(k, Objective::SpectralGap);
    let myers = myers_certificate(&myers_opt.params, k.iota, k.alpha);
    let gap = gap_and_poincare(&gap_opt.params);
    let volume = volume_certificate(k, &gap_opt.params);
    CertificateReport {
        constants: k.clone(),
        sasakian_limit: primary.params.sasakian_limit(),
        primary,
        myers,
        myers_params: myers_opt.params,
        gap,
        gap_params: gap_opt.params,
        volume,
    }
}
