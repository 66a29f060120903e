//! Tensors of the Tanno connection expressed through structure functions.

use crate::frame::{StructureData, Tensor3};
use crate::linalg;
use nalgebra::{DMatrix, DVector};

/// `Γ_ij^k = ½(w_ij^k + w_ki^j + w_kj^i)`, so that `∇_{X_i} X_j = Σ_k Γ_ij^k X_k`.
pub fn christoffels(sd: &StructureData) -> Tensor3 {
    let m = sd.horizontal_dim();
    let w = &sd.w;
    let mut g = Tensor3::zeros(m);
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                g[(i, j, k)] = 0.5 * (w[(i, j, k)] + w[(k, i, j)] + w[(k, j, i)]);
            }
        }
    }
    g
}

/// Torsion `τ_ik = (δ_i^k + δ_k^i)/2` and the complex structure `J_ij = γ_ij`.
pub fn tau_and_j(sd: &StructureData) -> (DMatrix<f64>, DMatrix<f64>) {
    (linalg::sym(&sd.delta), sd.gamma.clone())
}

/// The merged Ricci and torsion form `𝓡_kl`, whose quadratic form on the
/// horizontal gradient appears in the horizontal Bochner formula.
pub fn ric_tau2_matrix(sd: &StructureData) -> DMatrix<f64> {
    let m = sd.horizontal_dim();
    let w = &sd.w;
    let c = sd.c();
    DMatrix::from_fn(m, m, |k, l| {
        let mut s = 0.0;
        for j in 0..m {
            s += sd.gamma[(k, j)] * sd.delta[(j, l)];
            s += sd.dw[l][(k, j, j)] - sd.dw[j][(l, j, k)];
            s += c[j] * w[(k, j, l)];
        }
        for i in 0..m {
            s -= w[(k, i, i)] * w[(l, i, i)];
        }
        for i in 0..m {
            for j in i + 1..m {
                s += 0.5
                    * (w[(i, j, l)] * w[(i, j, k)]
                        - (w[(l, j, i)] + w[(l, i, j)]) * (w[(k, j, i)] + w[(k, i, j)]));
            }
        }
        s
    })
}

/// Coefficient `W_k` of `Zf · X_k f` in the horizontal Bochner formula.
pub fn cross_field_w(sd: &StructureData) -> DVector<f64> {
    let m = sd.horizontal_dim();
    let c = sd.c();
    DVector::from_fn(m, |k, _| {
        let mut s = 0.0;
        for j in 0..m {
            s += c[j] * sd.gamma[(k, j)];
            s -= sd.dgamma[j][(k, j)];
            for l in 0..j {
                s += sd.w[(l, j, k)] * sd.gamma[(l, j)];
            }
        }
        s
    })
}

/// The horizontal field `V` collecting first-order terms of `Zf·[L, Z]f`.
pub fn v_field(sd: &StructureData) -> DVector<f64> {
    let m = sd.horizontal_dim();
    let (tau, _) = tau_and_j(sd);
    let c = sd.c();
    let z = sd.z_index();
    DVector::from_fn(m, |i, _| {
        let mut s = 0.0;
        for j in 0..m {
            for l in 0..m {
                s += tau[(l, j)] * (sd.w[(i, l, j)] + sd.w[(i, j, l)]);
            }
            s += sd.ddelta[j][(j, i)];
            s -= c[j] * sd.delta[(j, i)];
            s += sd.dw[z][(i, j, j)];
        }
        s
    })
}

/// Symmetric matrix of `⟨(∇_Z τ) u, u⟩`.
pub fn nabla_z_tau_form(sd: &StructureData) -> DMatrix<f64> {
    let d = &sd.delta;
    let zd = &sd.ddelta[sd.z_index()];
    linalg::sym(zd) + (d * d.transpose() - d.transpose() * d) * 0.5
}

/// Everything derived from the structure functions at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryData {
    pub christoffel: Tensor3,
    pub tau: DMatrix<f64>,
    pub j: DMatrix<f64>,
    pub ric_tau2: DMatrix<f64>,
    pub w: DVector<f64>,
    pub v: DVector<f64>,
    pub nabla_z_tau: DMatrix<f64>,
    /// `Σ_k ‖τ(X_k)‖²`, the squared Hilbert–Schmidt norm of τ.
    pub u_coeff: f64,
}

impl GeometryData {
    pub fn from_structure(sd: &StructureData) -> Self {
        let (tau, j) = tau_and_j(sd);
        let u_coeff = tau.iter().map(|t| t * t).sum();
        GeometryData {
            christoffel: christoffels(sd),
            ric_tau2: ric_tau2_matrix(sd),
            w: cross_field_w(sd),
            v: v_field(sd),
            nabla_z_tau: nabla_z_tau_form(sd),
            u_coeff,
            tau,
            j,
        }
    }

    /// Smallest eigenvalue of `Sym(𝓡)`.
    pub fn ric_lower_bound(&self) -> f64 {
        linalg::sym_eig_range(&self.ric_tau2).0
    }

    /// `‖τ‖²` in operator norm.
    pub fn tau_op_sq(&self) -> f64 {
        let tt = self.tau.transpose() * &self.tau;
        linalg::sym_eig_range(&tt).1.max(0.0)
    }

    pub fn alpha_candidate(&self) -> f64 {
        linalg::sym_eig_range(&self.nabla_z_tau).1
    }

    /// Largest violation of `τJ + Jτ = 0`.
    pub fn anticommutator_residual(&self) -> f64 {
        linalg::max_abs(&(&self.tau * &self.j + &self.j * &self.tau))
    }
}
