//! Contact models, adapted frames and their structure functions.
//!
//! Frame fields are indexed `0..2n` for the horizontal fields `X_1..X_2n`
//! and `2n` for the Reeb field `Z`. Brackets are encoded as
//!
//! ```text
//! [X_i, X_j] = Σ_k w_ij^k X_k + γ_ij Z
//! [X_i, Z]   = Σ_j δ_i^j X_j
//! ```
//!
//! Both backends expose their fields as polynomial vector fields on an
//! ambient coordinate space: chart models on `R^{2n+1}`, Lie-group models on
//! the entries of an `N x N` matrix, where the left-invariant field of `A`
//! at `Y` has coefficients `(Y A)_{ab}`.

use crate::jets::{Jet, JetError, JetSpace, Monomial, Point, Polynomial, ScalarField};
use crate::linalg;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use alloc::format;
use nalgebra::{DMatrix, DVector};

/// Frames whose matrix condition number exceeds this are rejected.
pub const MAX_CONDITION: f64 = 1e12;
/// Tolerance for matrix commutators against a declared bracket table.
pub const TABLE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FrameError {
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error("frame matrix is singular (condition number {condition:e})")]
    SingularFrame { condition: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("derivative word of length {0} exceeds 3")]
    WordTooLong(usize),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("frame not δ-normalized (max |δ_i^i| = {0:e})")]
    NotNormalized(f64),
}

/// Dense `d x d x d` array indexed `(i, j, k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    d: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(d: usize) -> Self {
        Tensor3 { d, data: vec![0.0; d * d * d] }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl core::ops::Index<(usize, usize, usize)> for Tensor3 {
    type Output = f64;
    fn index(&self, (i, j, k): (usize, usize, usize)) -> &f64 {
        &self.data[(i * self.d + j) * self.d + k]
    }
}

impl core::ops::IndexMut<(usize, usize, usize)> for Tensor3 {
    fn index_mut(&mut self, (i, j, k): (usize, usize, usize)) -> &mut f64 {
        &mut self.data[(i * self.d + j) * self.d + k]
    }
}

/// Constant bracket table of a Lie algebra presented in an adapted basis.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureTable {
    pub w: Tensor3,
    pub gamma: DMatrix<f64>,
    pub delta: DMatrix<f64>,
}

impl StructureTable {
    pub fn zeros(m: usize) -> Self {
        StructureTable { w: Tensor3::zeros(m), gamma: DMatrix::zeros(m, m), delta: DMatrix::zeros(m, m) }
    }

    pub fn horizontal_dim(&self) -> usize {
        self.gamma.nrows()
    }
}

/// Polynomial frame on a single chart: `fields[f][a]` is the `a`-th
/// coordinate coefficient of frame field `f`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartModel {
    pub fields: Vec<Vec<Polynomial>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LieGroupModel {
    /// `A_1..A_2n, A_Z`.
    pub generators: Vec<DMatrix<f64>>,
    pub table: StructureTable,
}

impl LieGroupModel {
    pub fn matrix_size(&self) -> usize {
        self.generators[0].nrows()
    }

    /// Largest deviation of the matrix commutators from the declared table.
    pub fn table_residual(&self) -> f64 {
        let m = self.table.horizontal_dim();
        let a = &self.generators;
        let mut worst: f64 = 0.0;
        for i in 0..m {
            for j in 0..m {
                let comm = &a[i] * &a[j] - &a[j] * &a[i];
                let mut expected = &a[m] * self.table.gamma[(i, j)];
                for k in 0..m {
                    expected += &a[k] * self.table.w[(i, j, k)];
                }
                worst = worst.max(linalg::max_abs(&(comm - expected)));
            }
            let comm = &a[i] * &a[m] - &a[m] * &a[i];
            let mut expected = DMatrix::zeros(comm.nrows(), comm.ncols());
            for j in 0..m {
                expected += &a[j] * self.table.delta[(i, j)];
            }
            worst = worst.max(linalg::max_abs(&(comm - expected)));
        }
        worst
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Backend {
    Chart(ChartModel),
    Lie(LieGroupModel),
}

/// A contact manifold presented by an adapted orthonormal frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactModel {
    name: String,
    n: usize,
    backend: Backend,
    parameters: Vec<(String, f64)>,
    tags: Vec<String>,
    // ambient polynomial coefficients of every frame field, both backends
    field_polys: Vec<Vec<Polynomial>>,
}

fn left_invariant_field(a: &DMatrix<f64>) -> Vec<Polynomial> {
    // (Y A)_{rc} = Σ_s Y_{rs} A_{sc}, coordinate index of Y_{rs} is r * N + s
    let size = a.nrows();
    let d = size * size;
    let mut out = Vec::with_capacity(d);
    for r in 0..size {
        for c in 0..size {
            let terms = (0..size)
                .filter(|&s| a[(s, c)] != 0.0)
                .map(|s| {
                    let mut p = vec![0u32; d];
                    p[r * size + s] = 1;
                    Monomial::new(a[(s, c)], p)
                })
                .collect();
            out.push(Polynomial::new(d, terms).expect("dimension is consistent"));
        }
    }
    out
}

impl ContactModel {
    pub fn chart(
        name: impl Into<String>,
        n: usize,
        chart: ChartModel,
        parameters: Vec<(String, f64)>,
    ) -> Result<Self, FrameError> {
        let d = 2 * n + 1;
        if n == 0 {
            return Err(FrameError::InvalidModel("n must be at least 1".to_string()));
        }
        if chart.fields.len() != d {
            return Err(FrameError::DimensionMismatch { expected: d, found: chart.fields.len() });
        }
        for f in &chart.fields {
            if f.len() != d {
                return Err(FrameError::DimensionMismatch { expected: d, found: f.len() });
            }
            if let Some(p) = f.iter().find(|p| p.dim() != d) {
                return Err(FrameError::DimensionMismatch { expected: d, found: p.dim() });
            }
        }
        let field_polys = chart.fields.clone();
        Ok(ContactModel { name: name.into(), n, backend: Backend::Chart(chart), parameters, tags: vec![], field_polys })
    }

    pub fn lie(
        name: impl Into<String>,
        n: usize,
        lie: LieGroupModel,
        parameters: Vec<(String, f64)>,
    ) -> Result<Self, FrameError> {
        let m = 2 * n;
        if n == 0 {
            return Err(FrameError::InvalidModel("n must be at least 1".to_string()));
        }
        if lie.generators.len() != m + 1 {
            return Err(FrameError::DimensionMismatch { expected: m + 1, found: lie.generators.len() });
        }
        let size = lie.generators[0].nrows();
        if lie.generators.iter().any(|g| g.nrows() != size || g.ncols() != size) {
            return Err(FrameError::InvalidModel("generators must be square and of equal size".to_string()));
        }
        if size * size > crate::jets::MAX_DIM {
            return Err(FrameError::InvalidModel(format!("matrix size {size} too large for jets")));
        }
        let t = &lie.table;
        if t.w.dim() != m || t.gamma.shape() != (m, m) || t.delta.shape() != (m, m) {
            return Err(FrameError::InvalidModel("bracket table has the wrong shape".to_string()));
        }
        let residual = lie.table_residual();
        if residual > TABLE_TOL {
            return Err(FrameError::InvalidModel(format!(
                "matrix commutators disagree with the bracket table by {residual:e}"
            )));
        }
        let field_polys = lie.generators.iter().map(left_invariant_field).collect();
        Ok(ContactModel { name: name.into(), n, backend: Backend::Lie(lie), parameters, tags: vec![], field_polys })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of horizontal fields, `2n`.
    pub fn horizontal_dim(&self) -> usize {
        2 * self.n
    }

    pub fn ambient_dim(&self) -> usize {
        self.field_polys[0].len()
    }

    pub fn backend(&self) -> &Backend {
        &self.backend
    }

    pub fn parameters(&self) -> &[(String, f64)] {
        &self.parameters
    }

    /// Informational labels such as `non-sasakian`.
    pub fn tags(&self) -> &[String] {
        &self.tags
    }

    pub fn with_tag(mut self, tag: impl Into<String>) -> Self {
        self.tags.push(tag.into());
        self
    }

    pub fn parameter(&self, key: &str) -> Option<f64> {
        self.parameters.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }

    pub fn is_lie(&self) -> bool {
        matches!(self.backend, Backend::Lie(_))
    }

    pub fn field_polys(&self) -> &[Vec<Polynomial>] {
        &self.field_polys
    }

    /// Origin for charts, identity for groups.
    pub fn base_point(&self) -> Point {
        match &self.backend {
            Backend::Chart(_) => Point::origin(self.ambient_dim()),
            Backend::Lie(l) => {
                let s = l.matrix_size();
                matrix_to_point(&DMatrix::identity(s, s))
            }
        }
    }

    /// Group element `exp(Σ c_i A_i)` as a point; `None` for chart models.
    pub fn group_point(&self, coeffs: &[f64]) -> Option<Point> {
        let Backend::Lie(l) = &self.backend else { return None };
        let s = l.matrix_size();
        let mut a = DMatrix::zeros(s, s);
        for (g, c) in l.generators.iter().zip(coeffs) {
            a += g * *c;
        }
        Some(matrix_to_point(&linalg::expm(&a)))
    }

    /// Ambient-by-field matrix of frame coefficients at `x`.
    pub fn frame_matrix(&self, x: &Point) -> Result<DMatrix<f64>, FrameError> {
        self.check_point(x)?;
        let d = self.ambient_dim();
        let nf = self.field_polys.len();
        Ok(DMatrix::from_fn(d, nf, |a, f| self.field_polys[f][a].eval(x.coords())))
    }

    pub fn check_point(&self, x: &Point) -> Result<(), FrameError> {
        if x.dim() != self.ambient_dim() {
            return Err(FrameError::DimensionMismatch { expected: self.ambient_dim(), found: x.dim() });
        }
        if x.coords().iter().any(|c| !c.is_finite()) {
            return Err(JetError::NonFinitePoint.into());
        }
        Ok(())
    }

    /// Rejects models that are not adapted at `x`: γ must be orthogonal and
    /// antisymmetric, w antisymmetric, `[X_i, Z]` horizontal and `δ_i^i = 0`.
    pub fn validate_at(&self, x: &Point, tol: f64) -> Result<(), FrameError> {
        validate_structure(&structure_functions(self, x)?, tol)
    }
}

/// The first failed adaptedness flag as an error.
pub fn validate_structure(sd: &StructureData, tol: f64) -> Result<(), FrameError> {
    for flag in &diagnose(sd, tol).flags {
        if !flag.passed {
            let msg = match flag.kind {
                FlagKind::GammaOrthogonal => "γγᵀ ≠ Id",
                FlagKind::DeltaDiagonal => return Err(FrameError::NotNormalized(flag.violation)),
                FlagKind::WAntisymmetric => "w not antisymmetric in its lower indices",
                FlagKind::GammaAntisymmetric => "γ not antisymmetric",
                FlagKind::ReebHorizontal => "[X_i, Z] has a Z-component",
            };
            return Err(FrameError::InvalidModel(format!("{msg} (violation {:e})", flag.violation)));
        }
    }
    Ok(())
}

/// Structure functions as jets at a point.
#[derive(Debug, Clone)]
pub struct StructureJets {
    m: usize,
    pub w: Vec<Jet>,
    pub gamma: Vec<Jet>,
    pub delta: Vec<Jet>,
    pub z_component: Vec<Jet>,
}

impl StructureJets {
    pub fn w(&self, i: usize, j: usize, k: usize) -> &Jet {
        &self.w[(i * self.m + j) * self.m + k]
    }

    pub fn gamma(&self, i: usize, j: usize) -> &Jet {
        &self.gamma[i * self.m + j]
    }

    pub fn delta(&self, i: usize, j: usize) -> &Jet {
        &self.delta[i * self.m + j]
    }
}

/// Pointwise structure functions and their first frame derivatives.
///
/// `dw[l]`, `dgamma[l]`, `ddelta[l]` hold the derivative along frame field
/// `l`, with `l = 2n` meaning `Z`.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureData {
    pub n: usize,
    pub w: Tensor3,
    pub gamma: DMatrix<f64>,
    pub delta: DMatrix<f64>,
    pub z_component: DVector<f64>,
    pub dw: Vec<Tensor3>,
    pub dgamma: Vec<DMatrix<f64>>,
    pub ddelta: Vec<DMatrix<f64>>,
}

impl StructureData {
    pub fn horizontal_dim(&self) -> usize {
        2 * self.n
    }

    /// Index of `Z` in the derivative arrays.
    pub fn z_index(&self) -> usize {
        2 * self.n
    }

    /// `c_i = Σ_k w_ik^k`, so that `X_0 = -Σ c_i X_i`.
    pub fn c(&self) -> DVector<f64> {
        let m = self.horizontal_dim();
        DVector::from_fn(m, |i, _| (0..m).map(|k| self.w[(i, k, k)]).sum())
    }

    /// Derivative of `c` along frame field `l`.
    pub fn dc(&self, l: usize) -> DVector<f64> {
        let m = self.horizontal_dim();
        DVector::from_fn(m, |i, _| (0..m).map(|k| self.dw[l][(i, k, k)]).sum())
    }

    /// Constant-structure data with all derivatives zero.
    pub fn from_table(n: usize, table: &StructureTable) -> Self {
        let m = 2 * n;
        StructureData {
            n,
            w: table.w.clone(),
            gamma: table.gamma.clone(),
            delta: table.delta.clone(),
            z_component: DVector::zeros(m),
            dw: vec![Tensor3::zeros(m); m + 1],
            dgamma: vec![DMatrix::zeros(m, m); m + 1],
            ddelta: vec![DMatrix::zeros(m, m); m + 1],
        }
    }
}

/// Jets of the frame coefficients and structure functions at one point.
///
/// With jet order `K` the frame coefficients are expanded to order `K` and
/// the structure functions to order `K - 1`; applying a frame field to a
/// jet of order `k` returns order `k - 1`.
pub struct FrameJets<'m> {
    model: &'m ContactModel,
    point: Point,
    space: Arc<JetSpace>,
    coeffs: Vec<Vec<Jet>>,
    structure: StructureJets,
}

impl<'m> FrameJets<'m> {
    pub fn new(model: &'m ContactModel, x: &Point, order: usize) -> Result<Self, FrameError> {
        let space = JetSpace::new(model.ambient_dim(), order)?;
        Self::with_space(model, x, &space)
    }

    /// Reuses a prebuilt jet space; its order is the jet budget.
    pub fn with_space(
        model: &'m ContactModel,
        x: &Point,
        space: &Arc<JetSpace>,
    ) -> Result<Self, FrameError> {
        model.check_point(x)?;
        if space.dim() != model.ambient_dim() {
            return Err(FrameError::DimensionMismatch { expected: model.ambient_dim(), found: space.dim() });
        }
        let order = space.max_order();
        if order < 2 {
            return Err(JetError::OrderTooLarge { requested: 2, max: order }.into());
        }
        let coeffs = model
            .field_polys
            .iter()
            .map(|f| f.iter().map(|p| p.jet(space, x.coords(), order)).collect::<Result<Vec<_>, _>>())
            .collect::<Result<Vec<_>, _>>()?;
        let mut fj = FrameJets {
            model,
            point: x.clone(),
            space: space.clone(),
            coeffs,
            structure: StructureJets { m: 0, w: vec![], gamma: vec![], delta: vec![], z_component: vec![] },
        };
        fj.structure = match &model.backend {
            Backend::Chart(_) => fj.solve_brackets(order - 1)?,
            Backend::Lie(l) => constant_structure(space, order - 1, &l.table),
        };
        Ok(fj)
    }

    pub fn model(&self) -> &ContactModel {
        self.model
    }

    pub fn point(&self) -> &Point {
        &self.point
    }

    pub fn space(&self) -> &Arc<JetSpace> {
        &self.space
    }

    pub fn order(&self) -> usize {
        self.space.max_order()
    }

    pub fn structure_jets(&self) -> &StructureJets {
        &self.structure
    }

    /// Frame field `field` applied to `g`; `field == 2n` is `Z`.
    pub fn apply(&self, field: usize, g: &Jet) -> Jet {
        let coeffs = &self.coeffs[field];
        let mut out = Jet::zero_unchecked(&self.space, g.order() - 1);
        for (a, c) in coeffs.iter().enumerate() {
            out.add_product(c, &g.differentiate(a), 1.0);
        }
        out
    }

    /// `X_{word[0]} X_{word[1]} ... g`, rightmost applied first.
    pub fn apply_word(&self, word: &[usize], g: &Jet) -> Jet {
        word.iter().rev().fold(g.clone(), |acc, &f| self.apply(f, &acc))
    }

    pub fn jet_of(&self, f: &ScalarField) -> Result<Jet, FrameError> {
        if f.dim() != self.model.ambient_dim() {
            return Err(FrameError::DimensionMismatch { expected: self.model.ambient_dim(), found: f.dim() });
        }
        Ok(f.jet(&self.space, self.point.coords(), self.order())?)
    }

    /// Jets of `c_i = Σ_k w_ik^k`.
    pub fn c_jets(&self) -> Vec<Jet> {
        let m = self.model.horizontal_dim();
        (0..m)
            .map(|i| {
                let mut acc = Jet::zero_unchecked(&self.space, self.structure.w(i, 0, 0).order());
                for k in 0..m {
                    acc.axpy(1.0, self.structure.w(i, k, k));
                }
                acc
            })
            .collect()
    }

    pub fn structure(&self) -> StructureData {
        let m = self.model.horizontal_dim();
        let sj = &self.structure;
        if let Backend::Lie(l) = &self.model.backend {
            return StructureData::from_table(self.model.n, &l.table);
        }
        let mut w = Tensor3::zeros(m);
        let mut dw = vec![Tensor3::zeros(m); m + 1];
        let mut gamma = DMatrix::zeros(m, m);
        let mut delta = DMatrix::zeros(m, m);
        let mut dgamma = vec![DMatrix::zeros(m, m); m + 1];
        let mut ddelta = vec![DMatrix::zeros(m, m); m + 1];
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    let jet = sj.w(i, j, k);
                    w[(i, j, k)] = jet.value();
                    for (l, dwl) in dw.iter_mut().enumerate() {
                        dwl[(i, j, k)] = self.apply(l, jet).value();
                    }
                }
                gamma[(i, j)] = sj.gamma(i, j).value();
                delta[(i, j)] = sj.delta(i, j).value();
                for l in 0..=m {
                    dgamma[l][(i, j)] = self.apply(l, sj.gamma(i, j)).value();
                    ddelta[l][(i, j)] = self.apply(l, sj.delta(i, j)).value();
                }
            }
        }
        let z_component = DVector::from_fn(m, |i, _| sj.z_component[i].value());
        StructureData { n: self.model.n, w, gamma, delta, z_component, dw, dgamma, ddelta }
    }

    // Expresses every coordinate bracket in the frame by a jet linear solve.
    fn solve_brackets(&self, order: usize) -> Result<StructureJets, FrameError> {
        let d = self.model.ambient_dim();
        let m = self.model.horizontal_dim();
        let f0 = DMatrix::from_fn(d, d, |a, f| self.coeffs[f][a].value());
        let (g, cond) = linalg::inverse_with_condition(&f0)
            .ok_or(FrameError::SingularFrame { condition: f64::INFINITY })?;
        if cond > MAX_CONDITION {
            return Err(FrameError::SingularFrame { condition: cond });
        }
        // nilpotent part of the frame matrix, truncated to the solve order
        let nil: Vec<Vec<Jet>> = (0..d)
            .map(|a| {
                (0..d)
                    .map(|f| {
                        let mut j = self.coeffs[f][a].truncate(order);
                        j.axpy(-j.value(), &Jet::constant(&self.space, order, 1.0).expect("order fits"));
                        j
                    })
                    .collect()
            })
            .collect();
        let solve = |rhs: &[Jet]| -> Vec<Jet> {
            let apply_g = |r: &[Jet]| -> Vec<Jet> {
                (0..d)
                    .map(|f| {
                        let mut acc = Jet::zero_unchecked(&self.space, order);
                        for (b, rb) in r.iter().enumerate() {
                            acc.axpy(g[(f, b)], rb);
                        }
                        acc
                    })
                    .collect()
            };
            let mut sol = apply_g(rhs);
            for _ in 0..order {
                let resid: Vec<Jet> = (0..d)
                    .map(|a| {
                        let mut r = rhs[a].clone();
                        for f in 0..d {
                            r.add_product(&nil[a][f], &sol[f], -1.0);
                        }
                        r
                    })
                    .collect();
                sol = apply_g(&resid);
            }
            sol
        };
        let bracket = |p: usize, q: usize| -> Vec<Jet> {
            (0..d)
                .map(|a| {
                    let mut b = self.apply(p, &self.coeffs[q][a]).truncate(order);
                    b.axpy(-1.0, &self.apply(q, &self.coeffs[p][a]));
                    b
                })
                .collect()
        };
        let zero = Jet::zero_unchecked(&self.space, order);
        let mut w = vec![zero.clone(); m * m * m];
        let mut gamma = vec![zero.clone(); m * m];
        let mut delta = vec![zero.clone(); m * m];
        let mut z_component = vec![zero; m];
        for i in 0..m {
            for j in 0..m {
                if i == j {
                    continue;
                }
                let sol = solve(&bracket(i, j));
                for k in 0..m {
                    w[(i * m + j) * m + k] = sol[k].clone();
                }
                gamma[i * m + j] = sol[m].clone();
            }
            let sol = solve(&bracket(i, m));
            for j in 0..m {
                delta[i * m + j] = sol[j].clone();
            }
            z_component[i] = sol[m].clone();
        }
        Ok(StructureJets { m, w, gamma, delta, z_component })
    }
}

fn constant_structure(space: &Arc<JetSpace>, order: usize, t: &StructureTable) -> StructureJets {
    let m = t.horizontal_dim();
    let c = |v: f64| Jet::constant(space, order, v).expect("order fits");
    let mut w = Vec::with_capacity(m * m * m);
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                w.push(c(t.w[(i, j, k)]));
            }
        }
    }
    StructureJets {
        m,
        w,
        gamma: (0..m * m).map(|idx| c(t.gamma[(idx / m, idx % m)])).collect(),
        delta: (0..m * m).map(|idx| c(t.delta[(idx / m, idx % m)])).collect(),
        z_component: (0..m).map(|_| c(0.0)).collect(),
    }
}

/// Row-major flattening used for matrix-entry coordinates.
pub fn matrix_to_point(y: &DMatrix<f64>) -> Point {
    Point(y.transpose().iter().copied().collect())
}

pub fn point_to_matrix(x: &Point, size: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(size, size, x.coords())
}

/// Structure functions with first frame derivatives at `x`.
pub fn structure_functions(model: &ContactModel, x: &Point) -> Result<StructureData, FrameError> {
    match &model.backend {
        Backend::Lie(l) => {
            model.check_point(x)?;
            Ok(StructureData::from_table(model.n, &l.table))
        }
        Backend::Chart(_) => Ok(FrameJets::new(model, x, 2)?.structure()),
    }
}

/// `X_{word[0]} ... X_{word[k-1]} f` at `x`; entries equal to `2n` denote `Z`.
pub fn frame_derivative(
    model: &ContactModel,
    f: &ScalarField,
    x: &Point,
    word: &[usize],
) -> Result<f64, FrameError> {
    if word.len() > 3 {
        return Err(FrameError::WordTooLong(word.len()));
    }
    if let Some(&bad) = word.iter().find(|&&w| w > model.horizontal_dim()) {
        return Err(FrameError::DimensionMismatch { expected: model.horizontal_dim() + 1, found: bad + 1 });
    }
    let fj = FrameJets::new(model, x, word.len().max(2))?;
    let g = fj.jet_of(f)?;
    Ok(fj.apply_word(word, &g).value())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlagKind {
    WAntisymmetric,
    GammaAntisymmetric,
    GammaOrthogonal,
    ReebHorizontal,
    DeltaDiagonal,
}

impl FlagKind {
    pub fn label(self) -> &'static str {
        match self {
            FlagKind::WAntisymmetric => "w_antisymmetric",
            FlagKind::GammaAntisymmetric => "gamma_antisymmetric",
            FlagKind::GammaOrthogonal => "gamma_orthogonal",
            FlagKind::ReebHorizontal => "reeb_bracket_horizontal",
            FlagKind::DeltaDiagonal => "delta_diagonal_zero",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticFlag {
    pub kind: FlagKind,
    pub passed: bool,
    pub violation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsReport {
    pub flags: Vec<DiagnosticFlag>,
}

impl DiagnosticsReport {
    pub fn all_passed(&self) -> bool {
        self.flags.iter().all(|f| f.passed)
    }

    pub fn flag(&self, kind: FlagKind) -> &DiagnosticFlag {
        self.flags.iter().find(|f| f.kind == kind).expect("every kind is reported")
    }
}

/// Adaptedness checks on already computed structure data.
pub fn diagnose(sd: &StructureData, tol: f64) -> DiagnosticsReport {
    let m = sd.horizontal_dim();
    let mut w_anti: f64 = 0.0;
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                w_anti = w_anti.max((sd.w[(i, j, k)] + sd.w[(j, i, k)]).abs());
            }
        }
    }
    let g_anti = linalg::max_abs(&(&sd.gamma + sd.gamma.transpose()));
    let g_orth = linalg::max_abs(&(&sd.gamma * sd.gamma.transpose() - DMatrix::identity(m, m)));
    let reeb = sd.z_component.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let diag = (0..m).fold(0.0f64, |a, i| a.max(sd.delta[(i, i)].abs()));
    let flag = |kind, violation: f64| DiagnosticFlag { kind, passed: violation <= tol, violation };
    DiagnosticsReport {
        flags: vec![
            flag(FlagKind::WAntisymmetric, w_anti),
            flag(FlagKind::GammaAntisymmetric, g_anti),
            flag(FlagKind::GammaOrthogonal, g_orth),
            flag(FlagKind::ReebHorizontal, reeb),
            flag(FlagKind::DeltaDiagonal, diag),
        ],
    }
}

pub fn check_adapted_frame(
    model: &ContactModel,
    x: &Point,
    tol: f64,
) -> Result<DiagnosticsReport, FrameError> {
    Ok(diagnose(&structure_functions(model, x)?, tol))
}

/// Rotation angle θ in the `(X_1, X_2)` plane after which `δ_1^1 = δ_2^2 = 0`
/// at this point. Only meaningful for `n = 1` and traceless δ.
pub fn delta_normalizing_angle(sd: &StructureData) -> Option<f64> {
    if sd.n != 1 {
        return None;
    }
    let d = &sd.delta;
    if (d[(0, 0)] + d[(1, 1)]).abs() > 1e-12 {
        return None;
    }
    // the rotated diagonal is p cos 2θ + q sin 2θ with the symmetric traceless part (p, q)
    let p = d[(0, 0)];
    let q = 0.5 * (d[(0, 1)] + d[(1, 0)]);
    Some(0.5 * libm::atan2(-p, q))
}
