//! Randomized sweeps over the pointwise identities and the
//! curvature-dimension inequality.

use nalgebra::DVector;
use rand::Rng;
use rayon::prelude::*;
use tanno_core::cd::{estimate_constants, CdConstants, CdError};
use tanno_core::frame::FrameError;
use tanno_core::jets::{Monomial, Point, Polynomial, ScalarField};
use tanno_core::operators::{converse_value, prescribe_jet_function, CdForm, JetPrescription, OperatorContext, PrescriptionError};
use tanno_core::ContactModel;

use crate::heatsim::{path_rng, with_workers};

pub const NU_GRID: [f64; 3] = [0.1, 1.0, 10.0];
pub const LAMBDA_GRID: [f64; 3] = [0.5, 1.0, 2.0];

/// Deliberate corruption of the curvature term, used to test that sweeps fail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Fault {
    None,
    /// Adds `ε|u|²` to the horizontal right-hand side.
    CurvatureShift(f64),
}

#[derive(Debug, thiserror::Error)]
pub enum VerifyError {
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Cd(#[from] CdError),
    #[error(transparent)]
    Prescription(#[from] PrescriptionError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Identity {
    BochnerHorizontal,
    BochnerVertical,
    Rescaled,
    Converse,
    CdSlack,
    CdSlackAsStated,
}

impl Identity {
    pub fn name(self) -> &'static str {
        match self {
            Identity::BochnerHorizontal => "bochner_horizontal",
            Identity::BochnerVertical => "bochner_vertical",
            Identity::Rescaled => "rescaled_identity",
            Identity::Converse => "converse_equality",
            Identity::CdSlack => "cd_slack",
            Identity::CdSlackAsStated => "cd_slack_as_stated",
        }
    }

    /// Whether a failure of this entry fails the sweep.
    pub fn gating(self) -> bool {
        !matches!(self, Identity::CdSlackAsStated)
    }

    /// Slack entries are minima that must stay above `-tol`; the others are
    /// residuals that must stay below `tol`.
    pub fn is_slack(self) -> bool {
        matches!(self, Identity::CdSlack | Identity::CdSlackAsStated)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub index: usize,
    pub point: Point,
    pub f_seed: u64,
    pub nu: Option<f64>,
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityResult {
    pub identity: Identity,
    pub checks: usize,
    /// Largest scaled residual, or smallest scaled slack.
    pub worst: f64,
    pub witness: Option<Witness>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub count: usize,
    pub seed: u64,
    pub tol: f64,
    pub constants: CdConstants,
    pub results: Vec<IdentityResult>,
    /// Set when the vertical identity was skipped because `δ_i^i ≠ 0`.
    pub vertical_skipped: bool,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.results.iter().filter(|r| r.identity.gating()).all(|r| r.passed)
    }
}

/// 64-bit finalizer used to derive independent per-sample seeds.
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Dense cubic polynomial with coefficients uniform in `[-1, 1]`.
pub fn random_cubic(dim: usize, seed: u64) -> ScalarField {
    let mut rng = path_rng(seed, 0);
    let mut terms = Vec::new();
    let mut powers = vec![0u32; dim];
    fn rec(a: usize, left: u32, powers: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if a == powers.len() {
            out.push(powers.clone());
            return;
        }
        for p in 0..=left {
            powers[a] = p;
            rec(a + 1, left - p, powers, out);
        }
        powers[a] = 0;
    }
    let mut exps = Vec::new();
    rec(0, 3, &mut powers, &mut exps);
    for e in exps {
        terms.push(Monomial::new(rng.gen_range(-1.0..1.0), e));
    }
    ScalarField::Polynomial(Polynomial::new(dim, terms).expect("dimension is consistent"))
}

/// Sample point: uniform in `[-1, 1]^d` on charts, `exp(Σ c_i A_i)` with
/// `c_i` uniform in `[-1, 1]` on groups.
pub fn random_point(model: &ContactModel, seed: u64) -> Point {
    let mut rng = path_rng(seed, 1);
    if model.is_lie() {
        let c: Vec<f64> = (0..=model.horizontal_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        model.group_point(&c).expect("group model")
    } else {
        Point((0..model.ambient_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect())
    }
}

pub fn sample_points(model: &ContactModel, count: usize, seed: u64) -> Vec<Point> {
    (0..count).map(|i| random_point(model, mix(seed ^ mix(i as u64)))).collect()
}

struct Sample {
    values: Vec<(Identity, f64, Option<f64>, Option<f64>)>,
}

fn check_one(
    model: &ContactModel,
    x: &Point,
    f_seed: u64,
    k: &CdConstants,
    fault: Fault,
    vertical: bool,
) -> Result<Sample, VerifyError> {
    let ctx = OperatorContext::new(model, x)?;
    let f = random_cubic(model.ambient_dim(), f_seed);
    let j = ctx.jet(&f)?;
    let (g2, g2z) = ctx.gamma2_jet(&j);
    let rel = |res: f64, scale: f64| res / (1.0 + scale.abs());
    let mut values = Vec::new();

    let mut horiz = ctx.bochner_horizontal_jet(&j);
    if let Fault::CurvatureShift(eps) = fault {
        horiz += eps * ctx.derivatives(&j).u.norm_squared();
    }
    values.push((Identity::BochnerHorizontal, rel((g2 - horiz).abs(), g2), None, None));
    if vertical {
        let v = ctx.bochner_vertical_jet(&j)?;
        values.push((Identity::BochnerVertical, rel((g2z - v).abs(), g2z), None, None));
    }
    for lambda in LAMBDA_GRID {
        let r = ctx.rescaled_jet(&j, lambda);
        values.push((Identity::Rescaled, rel(r.identity_residual, r.gamma2), None, Some(lambda)));
    }
    for nu in NU_GRID {
        let s = ctx.cd_slack_jet(&j, nu, k, CdForm::Corrected);
        let scale = g2.abs() + nu * g2z.abs();
        values.push((Identity::CdSlack, s / (1.0 + scale), Some(nu), None));
        let s = ctx.cd_slack_jet(&j, nu, k, CdForm::AsStated);
        values.push((Identity::CdSlackAsStated, s / (1.0 + scale), Some(nu), None));
    }

    // converse equality on a prescribed jet drawn from the same seed
    let mut rng = path_rng(f_seed, 2);
    let m = model.horizontal_dim();
    let p = JetPrescription {
        base: x.clone(),
        u: DVector::from_fn(m, |_, _| rng.gen_range(-1.0..1.0)),
        v: rng.gen_range(-1.0..1.0),
        nu: NU_GRID[rng.gen_range(0..NU_GRID.len())],
    };
    let pf = prescribe_jet_function(&p, model)?;
    let pj = ctx.jet(&pf.f)?;
    let (a, b) = ctx.gamma2_jet(&pj);
    let lhs = a + p.nu * b;
    let rhs = converse_value(ctx.geometry(), model.n(), &p.u, p.v, p.nu);
    values.push((Identity::Converse, rel((lhs - rhs).abs(), rhs), Some(p.nu), None));
    Ok(Sample { values })
}

/// Runs every identity on `count` random (cubic, point) pairs.
pub fn run(model: &ContactModel, count: usize, seed: u64, tol: f64, fault: Fault) -> Result<VerifyReport, VerifyError> {
    let points = sample_points(model, count.max(1), seed);
    let constants = estimate_constants(model, &points)?;
    let vertical = {
        let sd = tanno_core::frame::structure_functions(model, &points[0])?;
        (0..sd.horizontal_dim()).all(|i| sd.delta[(i, i)].abs() <= 1e-10)
    };
    let samples: Vec<Result<Sample, VerifyError>> = with_workers(|| {
        (0..count)
            .into_par_iter()
            .map(|i| check_one(model, &points[i], f_seed(seed, i), &constants, fault, vertical))
            .collect()
    });
    let samples: Vec<Sample> = samples.into_iter().collect::<Result<_, _>>()?;

    let identities = [
        Identity::BochnerHorizontal,
        Identity::BochnerVertical,
        Identity::Rescaled,
        Identity::Converse,
        Identity::CdSlack,
        Identity::CdSlackAsStated,
    ];
    let mut results = Vec::new();
    for id in identities {
        if id == Identity::BochnerVertical && !vertical {
            continue;
        }
        let mut checks = 0;
        let mut worst = if id.is_slack() { f64::INFINITY } else { 0.0 };
        let mut witness = None;
        for (i, s) in samples.iter().enumerate() {
            for &(which, v, nu, lambda) in &s.values {
                if which != id {
                    continue;
                }
                checks += 1;
                let worse = if id.is_slack() { v < worst } else { v > worst || v.is_nan() };
                if worse {
                    worst = v;
                }
                if worse || witness.is_none() {
                    witness = Some(Witness { index: i, point: points[i].clone(), f_seed: f_seed(seed, i), nu, lambda });
                }
            }
        }
        let passed = if id.is_slack() { worst >= -tol } else { worst <= tol };
        results.push(IdentityResult { identity: id, checks, worst, witness, passed });
    }
    Ok(VerifyReport { count, seed, tol, constants, results, vertical_skipped: !vertical })
}

pub fn f_seed(seed: u64, index: usize) -> u64 {
    mix(seed.wrapping_mul(0x1000_0000_01b3) ^ index as u64)
}
