//! Shipped example manifolds.

use crate::frame::{Backend, ChartModel, ContactModel, FrameError, LieGroupModel, StructureTable};
use crate::jets::Polynomial;
use crate::linalg;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use nalgebra::DMatrix;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("unknown model `{0}` (expected heisenberg, twisted, su2type, sl2type or shear)")]
    UnknownModel(String),
    #[error("bad parameter: {0}")]
    BadParameter(String),
    #[error(transparent)]
    Frame(#[from] FrameError),
}

/// `ℍ^{2n+1}` on coordinates `(x_1..x_n, y_1..y_n, z)`.
pub fn heisenberg(n: usize) -> Result<ContactModel, ModelError> {
    if n == 0 || 2 * n + 1 > crate::jets::MAX_DIM {
        return Err(ModelError::BadParameter(format!("heisenberg needs 1 <= n <= 5, got {n}")));
    }
    let d = 2 * n + 1;
    let zero = Polynomial::zero(d);
    let one = Polynomial::constant(d, 1.0);
    let mut fields = vec![vec![zero.clone(); d]; d];
    for i in 0..n {
        fields[i][i] = one.clone();
        fields[i][d - 1] = Polynomial::linear(d, n + i, -0.5);
        fields[n + i][n + i] = one.clone();
        fields[n + i][d - 1] = Polynomial::linear(d, i, 0.5);
    }
    fields[d - 1][d - 1] = one;
    Ok(ContactModel::chart(
        format!("heisenberg({n})"),
        n,
        ChartModel { fields },
        vec![("n".to_string(), n as f64)],
    )?)
}

/// Matrices `A_1, A_2, A_Z` realizing the three-dimensional algebra with
/// `[X_1, X_2] = Z`, `[X_1, Z] = a X_2`, `[X_2, Z] = b X_1`.
fn twisted_generators(a: f64, b: f64) -> Vec<DMatrix<f64>> {
    if a == 0.0 && b == 0.0 {
        // strictly upper triangular realization; the adjoint one is not faithful here
        let e = |r: usize, c: usize| {
            let mut m = DMatrix::zeros(3, 3);
            m[(r, c)] = 1.0;
            m
        };
        return vec![e(0, 1), e(1, 2), e(0, 2)];
    }
    // adjoint representation on the basis (X_1, X_2, Z): column j holds [e_i, e_j]
    let mut ad = vec![DMatrix::zeros(3, 3); 3];
    let mut set = |i: usize, j: usize, v: [f64; 3]| {
        for k in 0..3 {
            ad[i][(k, j)] = v[k];
            ad[j][(k, i)] = -v[k];
        }
    };
    set(0, 1, [0.0, 0.0, 1.0]);
    set(0, 2, [0.0, a, 0.0]);
    set(1, 2, [b, 0.0, 0.0]);
    ad
}

/// Left-invariant structure with `γ_12 = 1`, `δ_1^2 = a`, `δ_2^1 = b`, `w = 0`.
pub fn twisted(a: f64, b: f64) -> Result<ContactModel, ModelError> {
    if !a.is_finite() || !b.is_finite() {
        return Err(ModelError::BadParameter("twisted parameters must be finite".to_string()));
    }
    let mut table = StructureTable::zeros(2);
    table.gamma[(0, 1)] = 1.0;
    table.gamma[(1, 0)] = -1.0;
    table.delta[(0, 1)] = a;
    table.delta[(1, 0)] = b;
    let lie = LieGroupModel { generators: twisted_generators(a, b), table };
    let model = ContactModel::lie(
        format!("twisted({a},{b})"),
        1,
        lie,
        vec![("a".to_string(), a), ("b".to_string(), b)],
    )?;
    Ok(if a + b != 0.0 { model.with_tag("non-sasakian") } else { model })
}

/// Chart frame `X_1 = ∂x - (y/2)∂z + φ X_2`, `X_2 = ∂y + (x/2)∂z`, `Z = ∂z`
/// with `φ = c3 x + c1 y + c2 z`. Its coefficients are quadratic and its
/// structure functions vary from point to point.
pub fn shear(c1: f64, c2: f64, c3: f64) -> Result<ContactModel, ModelError> {
    let d = 3;
    let phi = Polynomial::linear(d, 0, c3)
        .add(&Polynomial::linear(d, 1, c1))
        .add(&Polynomial::linear(d, 2, c2));
    let half_x = Polynomial::linear(d, 0, 0.5);
    let x1 = vec![
        Polynomial::constant(d, 1.0),
        phi.clone(),
        Polynomial::linear(d, 1, -0.5).add(&phi.mul(&half_x)),
    ];
    let x2 = vec![Polynomial::zero(d), Polynomial::constant(d, 1.0), half_x];
    let z = vec![Polynomial::zero(d), Polynomial::zero(d), Polynomial::constant(d, 1.0)];
    let model = ContactModel::chart(
        format!("shear({c1},{c2},{c3})"),
        1,
        ChartModel { fields: vec![x1, x2, z] },
        vec![("c1".to_string(), c1), ("c2".to_string(), c2), ("c3".to_string(), c3)],
    )?;
    Ok(if c2 != 0.0 { model.with_tag("non-sasakian") } else { model })
}

pub const SHEAR_DEFAULT: (f64, f64, f64) = (0.5, 0.3, -0.2);

/// Looks up a catalog model; missing parameters take their defaults.
pub fn builtin(name: &str, params: &[(&str, f64)]) -> Result<ContactModel, ModelError> {
    let get = |key: &str, default: f64| {
        params.iter().find(|(k, _)| *k == key).map(|(_, v)| *v).unwrap_or(default)
    };
    for (k, _) in params {
        let allowed: &[&str] = match name {
            "heisenberg" => &["n"],
            "twisted" => &["a", "b"],
            "shear" => &["c1", "c2", "c3"],
            _ => &[],
        };
        if !allowed.contains(k) {
            return Err(ModelError::BadParameter(format!("`{k}` is not a parameter of {name}")));
        }
    }
    match name {
        "heisenberg" => {
            let n = get("n", 1.0);
            if libm::trunc(n) != n || n < 1.0 {
                return Err(ModelError::BadParameter(format!("n must be a positive integer, got {n}")));
            }
            heisenberg(n as usize)
        }
        "twisted" => twisted(get("a", 0.0), get("b", 1.0)),
        "su2type" => twisted(-1.0, 1.0).map(|m| rename(m, "su2type")),
        "sl2type" => twisted(1.0, -1.0).map(|m| rename(m, "sl2type")),
        "shear" => {
            let (c1, c2, c3) = SHEAR_DEFAULT;
            shear(get("c1", c1), get("c2", c2), get("c3", c3))
        }
        other => Err(ModelError::UnknownModel(other.to_string())),
    }
}

fn rename(m: ContactModel, name: &str) -> ContactModel {
    let Backend::Lie(lie) = m.backend().clone() else { unreachable!("twisted is a group model") };
    ContactModel::lie(name, m.n(), lie, m.parameters().to_vec()).expect("already validated")
}

/// Known geometric constants `(c1, c2, c3, ι, α)`; `None` where no closed form is shipped.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedInvariants {
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub c3: Option<f64>,
    pub iota: Option<f64>,
    pub alpha: Option<f64>,
    pub compact: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub params: Vec<(&'static str, f64)>,
    pub description: &'static str,
    pub expected: ExpectedInvariants,
}

impl CatalogEntry {
    pub fn build(&self) -> Result<ContactModel, ModelError> {
        builtin(self.name, &self.params)
    }
}

fn exact(c1: f64, iota: f64, alpha: f64, compact: Option<bool>) -> ExpectedInvariants {
    ExpectedInvariants { c1: Some(c1), c2: Some(0.0), c3: Some(0.0), iota: Some(iota), alpha: Some(alpha), compact }
}

pub fn catalog() -> Vec<CatalogEntry> {
    let (c1, c2, c3) = SHEAR_DEFAULT;
    vec![
        CatalogEntry {
            name: "heisenberg",
            params: vec![("n", 1.0)],
            description: "Heisenberg group, flat Sasakian chart model",
            expected: exact(0.0, 0.0, 0.0, Some(false)),
        },
        CatalogEntry {
            name: "heisenberg",
            params: vec![("n", 2.0)],
            description: "five-dimensional Heisenberg group",
            expected: exact(0.0, 0.0, 0.0, Some(false)),
        },
        CatalogEntry {
            name: "twisted",
            params: vec![("a", 0.0), ("b", 1.0)],
            description: "left-invariant model with pseudo-Hermitian torsion",
            expected: exact(0.0, 0.25, 0.5, None),
        },
        CatalogEntry {
            name: "su2type",
            params: vec![],
            description: "twisted(-1, 1), Sasakian with positive curvature",
            expected: exact(1.0, 0.0, 0.0, Some(true)),
        },
        CatalogEntry {
            name: "sl2type",
            params: vec![],
            description: "twisted(1, -1), Sasakian with negative curvature",
            expected: exact(-1.0, 0.0, 0.0, None),
        },
        CatalogEntry {
            name: "shear",
            params: vec![("c1", c1), ("c2", c2), ("c3", c3)],
            description: "chart frame with quadratic coefficients and varying structure",
            expected: ExpectedInvariants { c1: None, c2: Some(0.0), c3: None, iota: None, alpha: None, compact: None },
        },
    ]
}

/// Largest Jacobi-identity violation of the matrix realization.
pub fn jacobi_residual(lie: &LieGroupModel) -> f64 {
    let a = &lie.generators;
    let br = |x: &DMatrix<f64>, y: &DMatrix<f64>| x * y - y * x;
    let mut worst: f64 = 0.0;
    for i in 0..a.len() {
        for j in 0..a.len() {
            for k in 0..a.len() {
                let s = br(&a[i], &br(&a[j], &a[k])) + br(&a[j], &br(&a[k], &a[i])) + br(&a[k], &br(&a[i], &a[j]));
                worst = worst.max(linalg::max_abs(&s));
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::check_adapted_frame;
    use crate::jets::Point;

    #[test]
    fn catalog_models_build_and_are_adapted() {
        for e in catalog() {
            let m = e.build().unwrap();
            let x = m.base_point();
            assert!(check_adapted_frame(&m, &x, 1e-12).unwrap().all_passed(), "{}", m.name());
        }
    }

    #[test]
    fn twisted_table_matches_commutators() {
        for (a, b) in [(0.0, 0.0), (0.0, 1.0), (-1.0, 1.0), (2.5, -0.75), (0.3, 0.0)] {
            let m = twisted(a, b).unwrap();
            let Backend::Lie(l) = m.backend() else { panic!() };
            assert!(l.table_residual() <= 1e-15);
            assert!(jacobi_residual(l) <= 1e-15);
        }
    }

    #[test]
    fn unknown_names_and_parameters() {
        assert!(matches!(builtin("sphere", &[]), Err(ModelError::UnknownModel(_))));
        assert!(matches!(builtin("twisted", &[("n", 2.0)]), Err(ModelError::BadParameter(_))));
        assert!(matches!(builtin("heisenberg", &[("n", 1.5)]), Err(ModelError::BadParameter(_))));
        assert!(twisted(0.0, 1.0).unwrap().tags().iter().any(|t| t == "non-sasakian"));
        assert!(twisted(-1.0, 1.0).unwrap().tags().is_empty());
    }

    #[test]
    fn shear_frame_has_unit_determinant() {
        let m = builtin("shear", &[]).unwrap();
        let f = m.frame_matrix(&Point(vec![0.7, -1.1, 0.4])).unwrap();
        assert!((f.determinant() - 1.0).abs() < 1e-14);
    }
}
