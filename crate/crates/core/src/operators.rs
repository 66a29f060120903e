//! Pointwise differential operators of the sub-Laplacian and the identities
//! relating them to curvature.
//!
//! `Γ₂` and `Γ₂^Z` are always evaluated from their definitions with jets;
//! the Bochner right-hand sides are assembled from structure data instead,
//! so the two paths are independent.

use crate::cd::CdConstants;
use crate::frame::{FrameError, FrameJets, StructureData};
use crate::geometry::GeometryData;
use crate::jets::{Jet, JetSpace, Point, Polynomial, ScalarField};
use alloc::sync::Arc;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

/// Jet order used when none is requested.
pub const DEFAULT_BUDGET: usize = 4;
/// Relative tolerance for identity residuals.
pub const REL_TOL: f64 = 1e-8;
/// Absolute floor paired with [`REL_TOL`].
pub const ABS_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { rel: REL_TOL, abs: ABS_FLOOR }
    }
}

impl Tolerance {
    pub fn accepts(&self, residual: f64, scale: f64) -> bool {
        residual <= self.abs.max(self.rel * (1.0 + scale.abs()))
    }
}

/// Evaluation state at one point: frame jets plus derived geometry.
pub struct OperatorContext<'m> {
    frame: FrameJets<'m>,
    sd: StructureData,
    geo: GeometryData,
    c: Vec<Jet>,
    pub tol: Tolerance,
}

/// Values of the first and second frame derivatives of a test function.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameDerivatives {
    /// `X_i f`
    pub u: DVector<f64>,
    /// `Z f`
    pub v: f64,
    /// `X_k X_j f` for horizontal `k, j`
    pub hess: DMatrix<f64>,
    /// `X_j Z f`
    pub xz: DVector<f64>,
    /// `Z X_j f`
    pub zx: DVector<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RescaledForms {
    pub gamma: f64,
    pub gamma2: f64,
    pub identity_residual: f64,
}

impl<'m> OperatorContext<'m> {
    pub fn new(model: &'m crate::frame::ContactModel, x: &Point) -> Result<Self, FrameError> {
        Self::with_order(model, x, DEFAULT_BUDGET)
    }

    pub fn with_order(
        model: &'m crate::frame::ContactModel,
        x: &Point,
        order: usize,
    ) -> Result<Self, FrameError> {
        let space = JetSpace::new(model.ambient_dim(), order)?;
        Self::with_space(model, x, &space)
    }

    /// The space's maximum order is the jet budget and must be at least 3.
    pub fn with_space(
        model: &'m crate::frame::ContactModel,
        x: &Point,
        space: &Arc<JetSpace>,
    ) -> Result<Self, FrameError> {
        if space.max_order() < 3 {
            return Err(crate::jets::JetError::OrderTooLarge { requested: 3, max: space.max_order() }.into());
        }
        let frame = FrameJets::with_space(model, x, space)?;
        let sd = frame.structure();
        let geo = GeometryData::from_structure(&sd);
        let c = frame.c_jets();
        Ok(OperatorContext { frame, sd, geo, c, tol: Tolerance::default() })
    }

    pub fn frame(&self) -> &FrameJets<'m> {
        &self.frame
    }

    pub fn structure(&self) -> &StructureData {
        &self.sd
    }

    pub fn geometry(&self) -> &GeometryData {
        &self.geo
    }

    fn m(&self) -> usize {
        self.sd.horizontal_dim()
    }

    fn zi(&self) -> usize {
        self.sd.z_index()
    }

    /// Jet of `f` at the context point, to order 3.
    pub fn jet(&self, f: &ScalarField) -> Result<Jet, FrameError> {
        Ok(self.frame.jet_of(f)?.truncate(3))
    }

    /// `L g = Σ X_i² g - Σ c_i X_i g`.
    pub fn l(&self, g: &Jet) -> Jet {
        let mut out = Jet::zero(self.frame.space(), g.order() - 2).expect("order fits");
        for i in 0..self.m() {
            let xg = self.frame.apply(i, g);
            out.axpy(1.0, &self.frame.apply(i, &xg));
            out.add_product(&self.c[i], &xg, -1.0);
        }
        out
    }

    /// `Δ^λ g = L g + λ² Z² g`.
    pub fn l_lambda(&self, g: &Jet, lambda: f64) -> Jet {
        let zz = self.frame.apply_word(&[self.zi(), self.zi()], g);
        self.l(g).add_truncated(&zz, lambda * lambda)
    }

    pub fn gamma(&self, f: &Jet, g: &Jet) -> Jet {
        let order = f.order().min(g.order()) - 1;
        let mut out = Jet::zero(self.frame.space(), order).expect("order fits");
        for i in 0..self.m() {
            out.add_product(&self.frame.apply(i, f), &self.frame.apply(i, g), 1.0);
        }
        out
    }

    pub fn gamma_z(&self, f: &Jet, g: &Jet) -> Jet {
        let z = self.zi();
        self.frame.apply(z, f).mul_truncated(&self.frame.apply(z, g))
    }

    pub fn apply_l(&self, f: &ScalarField) -> Result<f64, FrameError> {
        Ok(self.l(&self.jet(f)?).value())
    }

    /// `(Γ(f, g), Γ^Z(f, g))`.
    pub fn gamma_forms(&self, f: &ScalarField, g: &ScalarField) -> Result<(f64, f64), FrameError> {
        let (fj, gj) = (self.jet(f)?, self.jet(g)?);
        Ok((self.gamma(&fj, &gj).value(), self.gamma_z(&fj, &gj).value()))
    }

    /// `½(L(fg) - f Lg - g Lf)`, the carré du champ from its definition.
    pub fn gamma_from_l(&self, f: &ScalarField, g: &ScalarField) -> Result<f64, FrameError> {
        let (fj, gj) = (self.jet(f)?, self.jet(g)?);
        let fg = fj.mul_truncated(&gj);
        Ok(0.5 * (self.l(&fg).value() - fj.value() * self.l(&gj).value() - gj.value() * self.l(&fj).value()))
    }

    pub fn gamma2_jet(&self, f: &Jet) -> (f64, f64) {
        let lf = self.l(f);
        let g2 = 0.5 * self.l(&self.gamma(f, f)).value() - self.gamma(f, &lf).value();
        let g2z = 0.5 * self.l(&self.gamma_z(f, f)).value() - self.gamma_z(f, &lf).value();
        (g2, g2z)
    }

    /// `(Γ₂(f), Γ₂^Z(f))` from the definitions.
    pub fn gamma2_forms(&self, f: &ScalarField) -> Result<(f64, f64), FrameError> {
        Ok(self.gamma2_jet(&self.jet(f)?))
    }

    pub fn derivatives(&self, f: &Jet) -> FrameDerivatives {
        let m = self.m();
        let z = self.zi();
        let first: Vec<Jet> = (0..=m).map(|i| self.frame.apply(i, f)).collect();
        let zf = &first[z];
        FrameDerivatives {
            u: DVector::from_fn(m, |i, _| first[i].value()),
            v: zf.value(),
            hess: DMatrix::from_fn(m, m, |k, j| self.frame.apply(k, &first[j]).value()),
            xz: DVector::from_fn(m, |j, _| self.frame.apply(j, zf).value()),
            zx: DVector::from_fn(m, |j, _| self.frame.apply(z, &first[j]).value()),
        }
    }

    /// `h_kj = ½ Σ_i u_i (w_ij^k + w_ik^j)`, the connection part of the horizontal Hessian.
    fn hessian_shift(&self, u: &DVector<f64>) -> DMatrix<f64> {
        let m = self.m();
        let w = &self.sd.w;
        DMatrix::from_fn(m, m, |k, j| 0.5 * (0..m).map(|i| u[i] * (w[(i, j, k)] + w[(i, k, j)])).sum::<f64>())
    }

    /// Symmetrized horizontal Hessian minus its connection part.
    pub fn covariant_hessian(&self, d: &FrameDerivatives) -> DMatrix<f64> {
        crate::linalg::sym(&d.hess) - self.hessian_shift(&d.u)
    }

    /// `Σ_kj (½(X_kX_j + X_jX_k)f - h_kj)²`.
    pub fn hessian_norm_sq(&self, d: &FrameDerivatives) -> f64 {
        self.covariant_hessian(d).iter().map(|v| v * v).sum()
    }

    pub fn bochner_horizontal_jet(&self, f: &Jet) -> f64 {
        let d = self.derivatives(f);
        let n = self.sd.n as f64;
        let cross: f64 = {
            let m = self.m();
            let mut s = 0.0;
            for i in 0..m {
                for j in 0..m {
                    s += self.sd.gamma[(i, j)] * d.xz[j] * d.u[i];
                }
            }
            s
        };
        self.hessian_norm_sq(&d) + d.u.dot(&(&self.geo.ric_tau2 * &d.u)) + self.geo.w.dot(&d.u) * d.v
            + 0.5 * n * d.v * d.v
            - 2.0 * cross
    }

    /// Horizontal Bochner right-hand side: Hessian norm, curvature form,
    /// the `W` cross term, the vertical term and the `γ` mixing term.
    pub fn bochner_horizontal_rhs(&self, f: &ScalarField) -> Result<f64, FrameError> {
        Ok(self.bochner_horizontal_jet(&self.jet(f)?))
    }

    /// `[L, Z] f` assembled from structure data.
    pub fn commutator_lz(&self, d: &FrameDerivatives) -> f64 {
        let m = self.m();
        let sd = &self.sd;
        let c = sd.c();
        let zc = sd.dc(self.zi());
        let mut s = 0.0;
        for i in 0..m {
            for l in 0..m {
                s += sd.ddelta[i][(i, l)] * d.u[l];
                s += sd.delta[(i, l)] * (d.hess[(i, l)] + d.hess[(l, i)]);
                s -= c[i] * sd.delta[(i, l)] * d.u[l];
            }
            s += zc[i] * d.u[i];
        }
        s
    }

    pub fn bochner_vertical_jet(&self, f: &Jet) -> Result<f64, FrameError> {
        let diag = (0..self.m()).fold(0.0f64, |a, i| a.max(self.sd.delta[(i, i)].abs()));
        if diag > self.tol.abs {
            return Err(FrameError::NotNormalized(diag));
        }
        let d = self.derivatives(f);
        Ok(d.xz.norm_squared() + d.v * self.commutator_lz(&d))
    }

    /// Vertical Bochner right-hand side `Γ(Zf) + Zf·[L, Z]f`; needs `δ_i^i = 0`.
    pub fn bochner_vertical_rhs(&self, f: &ScalarField) -> Result<f64, FrameError> {
        self.bochner_vertical_jet(&self.jet(f)?)
    }

    pub fn rescaled_jet(&self, f: &Jet, lambda: f64) -> RescaledForms {
        let l2 = lambda * lambda;
        let gl = |a: &Jet, b: &Jet| self.gamma(a, b).add_truncated(&self.gamma_z(a, b), l2);
        let gamma = gl(f, f).value();
        let lf = self.l_lambda(f, lambda);
        let gamma2 = 0.5 * self.l_lambda(&gl(f, f), lambda).value() - gl(f, &lf).value();

        let z = self.zi();
        let lhs = 0.5 * self.frame.apply_word(&[z, z], &self.gamma(f, f)).value()
            - self.gamma(f, &self.frame.apply_word(&[z, z], f)).value();
        let d = self.derivatives(f);
        let tu = &self.geo.tau * &d.u;
        let rhs = (&d.xz - &tu * 2.0).norm_squared() - 2.0 * tu.norm_squared()
            - d.u.dot(&(&self.geo.nabla_z_tau * &d.u));
        RescaledForms { gamma, gamma2, identity_residual: (lhs - rhs).abs() }
    }

    /// `(Γ^λ(f), Γ₂^λ(f), residual)` for the rescaled metric, where the
    /// residual compares `½Z²Γ(f) - Γ(f, Z²f)` with its torsion expansion.
    pub fn rescaled_forms(&self, f: &ScalarField, lambda: f64) -> Result<RescaledForms, FrameError> {
        Ok(self.rescaled_jet(&self.jet(f)?, lambda))
    }

    /// `LHS - RHS` of the curvature-dimension inequality at `ν`.
    pub fn cd_slack_jet(&self, f: &Jet, nu: f64, k: &CdConstants, form: CdForm) -> f64 {
        let (g2, g2z) = self.gamma2_jet(f);
        let lf = self.l(f).value();
        let g = self.gamma(f, f).value();
        let gz = self.gamma_z(f, f).value();
        let n = k.n as f64;
        let (mix, vert) = match form {
            CdForm::Corrected => (libm::sqrt(k.c2) + libm::sqrt(k.c3) * nu, n / 2.0 - k.tau_hs * nu * nu),
            CdForm::AsStated => (k.c2 + k.c3 * nu, n / 2.0 - k.iota * nu * nu / 4.0),
        };
        let rhs = lf * lf / (2.0 * n) + (k.c1 - 1.0 / nu) * g - mix * libm::sqrt((g * gz).max(0.0)) + vert * gz;
        g2 + nu * g2z - rhs
    }

    pub fn cd_inequality_check(
        &self,
        f: &ScalarField,
        nu: f64,
        constants: &CdConstants,
    ) -> Result<f64, FrameError> {
        Ok(self.cd_slack_jet(&self.jet(f)?, nu, constants, CdForm::Corrected))
    }
}

/// Which right-hand side of the curvature-dimension inequality to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CdForm {
    /// Mixed term `(√c₂ + √c₃ ν)√(ΓΓ^Z)` and vertical loss `‖τ‖²_HS ν²`.
    Corrected,
    /// Mixed term `(c₂ + c₃ ν)√(ΓΓ^Z)` and vertical loss `ι ν² / 4`.
    AsStated,
}

/// Targets for building a test function with a prescribed 2-jet.
#[derive(Debug, Clone, PartialEq)]
pub struct JetPrescription {
    pub base: Point,
    pub u: DVector<f64>,
    pub v: f64,
    pub nu: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrescribedFunction {
    pub f: ScalarField,
    /// Target for `½(X_kX_j + X_jX_k)f - h_kj`.
    pub hessian_target: DMatrix<f64>,
    /// Target for `X_j Z f`.
    pub xz_target: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PrescriptionError {
    #[error("ν must be positive, got {0}")]
    NonPositiveNu(f64),
    #[error("gradient has length {found}, expected {expected}")]
    BadGradient { expected: usize, found: usize },
    #[error(transparent)]
    Frame(#[from] FrameError),
}

/// Quadratic polynomial `f` with `∇_H f = u`, `Zf = v`, covariant horizontal
/// Hessian `-ν v τ` and `X_j Z f = (1/ν) Σ_i γ_ij u_i` at the base point.
/// These values make every Cauchy–Schwarz step in the curvature-dimension
/// bound an equality.
pub fn prescribe_jet_function(
    p: &JetPrescription,
    model: &crate::frame::ContactModel,
) -> Result<PrescribedFunction, PrescriptionError> {
    if !(p.nu > 0.0) {
        return Err(PrescriptionError::NonPositiveNu(p.nu));
    }
    let m = model.horizontal_dim();
    if p.u.len() != m {
        return Err(PrescriptionError::BadGradient { expected: m, found: p.u.len() });
    }
    let d = model.ambient_dim();
    let fj = FrameJets::new(model, &p.base, 2)?;
    let sd = fj.structure();
    let tau = crate::linalg::sym(&sd.delta);

    let f0 = model.frame_matrix(&p.base)?;
    let gram_inv = (f0.transpose() * &f0)
        .try_inverse()
        .ok_or(FrameError::SingularFrame { condition: f64::INFINITY })?;
    let pinv_t = &f0 * &gram_inv;

    let mut first = DVector::zeros(m + 1);
    first.rows_mut(0, m).copy_from(&p.u);
    first[m] = p.v;
    let a = &pinv_t * &first;

    // X_p X_q f = E_pq + (Fᵀ B F)_pq with E_pq = Σ_a (X_p F_q^a) a_a
    let space = fj.space().clone();
    let e = DMatrix::from_fn(m + 1, m + 1, |pp, q| {
        (0..d)
            .map(|ax| {
                let coeff = model.field_polys()[q][ax].jet(&space, p.base.coords(), 1).expect("order fits");
                fj.apply(pp, &coeff).value() * a[ax]
            })
            .sum::<f64>()
    });
    let w = &sd.w;
    let shift = DMatrix::from_fn(m, m, |k, j| 0.5 * (0..m).map(|i| p.u[i] * (w[(i, j, k)] + w[(i, k, j)])).sum::<f64>());
    let hessian_target = &tau * (-p.nu * p.v);
    let xz_target = DVector::from_fn(m, |j, _| (0..m).map(|i| sd.gamma[(i, j)] * p.u[i]).sum::<f64>() / p.nu);

    let mut target = DMatrix::zeros(m + 1, m + 1);
    for k in 0..m {
        for j in 0..m {
            target[(k, j)] = hessian_target[(k, j)] + shift[(k, j)] - 0.5 * (e[(k, j)] + e[(j, k)]);
        }
        target[(k, m)] = xz_target[k] - e[(k, m)];
        target[(m, k)] = target[(k, m)];
    }
    let b = &pinv_t * target * pinv_t.transpose();

    let x0 = p.base.coords();
    let shifted: Vec<Polynomial> = (0..d)
        .map(|ax| Polynomial::coordinate(d, ax).add(&Polynomial::constant(d, -x0[ax])))
        .collect();
    let mut f = Polynomial::zero(d);
    for ax in 0..d {
        f = f.add(&shifted[ax].scale(a[ax]));
        for bx in 0..d {
            if b[(ax, bx)] != 0.0 {
                f = f.add(&shifted[ax].mul(&shifted[bx]).scale(0.5 * b[(ax, bx)]));
            }
        }
    }
    Ok(PrescribedFunction { f: ScalarField::Polynomial(f), hessian_target, xz_target })
}

/// The right-hand side of the converse construction:
/// `Γ₂ + νΓ₂^Z` evaluated in closed form for a prescribed function.
pub fn converse_value(geo: &GeometryData, n: usize, u: &DVector<f64>, v: f64, nu: f64) -> f64 {
    u.dot(&(&geo.ric_tau2 * u)) + geo.w.dot(u) * v + 0.5 * n as f64 * v * v - u.norm_squared() / nu
        + nu * geo.v.dot(u) * v
        - nu * nu * geo.u_coeff * v * v
}
