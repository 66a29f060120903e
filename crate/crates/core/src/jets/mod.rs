//! Truncated multivariate Taylor arithmetic.
//!
//! A [`Jet`] stores the scaled partial derivatives `∂^μ f(x) / μ!` of a scalar
//! function for every multi-index `|μ| ≤ order`, laid out densely in graded
//! lexicographic order. Because the layout is graded, the coefficients of a
//! lower-order jet are a prefix of a higher-order one, so a single
//! [`JetSpace`] serves every order up to its maximum.
//!
//! Products are truncated Cauchy products; applying a first-order
//! differential operator to a jet of order `k` yields a jet of order `k - 1`.
//! For polynomial inputs every coefficient is exact up to rounding.

mod field;

pub use field::{jet_eval, BuiltinField, Monomial, Polynomial, ScalarField};

use alloc::collections::BTreeMap;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

/// Order used when callers do not ask for anything else.
pub const DEFAULT_MAX_ORDER: usize = 4;
/// Hard ceiling on jet order.
pub const MAX_ORDER: usize = 6;
/// Hard ceiling on the number of variables.
pub const MAX_DIM: usize = 12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum JetError {
    #[error("jet order {requested} exceeds the configured maximum {max}")]
    OrderTooLarge { requested: usize, max: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("jets differ in dimension or order")]
    ShapeMismatch,
    #[error("jet dimension {0} is outside 1..=12")]
    UnsupportedDimension(usize),
    #[error("non-finite coordinate in point")]
    NonFinitePoint,
}

/// A point in the ambient coordinates of a model.
#[derive(Debug, Clone, PartialEq)]
pub struct Point(pub Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self, JetError> {
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(JetError::NonFinitePoint);
        }
        Ok(Point(coords))
    }

    pub fn origin(dim: usize) -> Self {
        Point(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for Point {
    fn from(v: Vec<f64>) -> Self {
        Point(v)
    }
}

/// Multi-index layout and product tables shared by all jets of one shape.
pub struct JetSpace {
    dim: usize,
    max_order: usize,
    exps: Vec<u8>,
    degrees: Vec<u8>,
    // counts[k] = number of multi-indices with |μ| <= k
    counts: Vec<usize>,
    inv_factorials: Vec<f64>,
    mul_offsets: Vec<usize>,
    mul_table: Vec<u32>,
    lookup: BTreeMap<Vec<u8>, usize>,
}

impl fmt::Debug for JetSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("JetSpace")
            .field("dim", &self.dim)
            .field("max_order", &self.max_order)
            .field("len", &self.len())
            .finish()
    }
}

fn graded_block(dim: usize, degree: usize, out: &mut Vec<Vec<u8>>) {
    fn rec(prefix: &mut Vec<u8>, remaining_vars: usize, remaining: usize, out: &mut Vec<Vec<u8>>) {
        if remaining_vars == 1 {
            prefix.push(remaining as u8);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for first in (0..=remaining).rev() {
            prefix.push(first as u8);
            rec(prefix, remaining_vars - 1, remaining - first, out);
            prefix.pop();
        }
    }
    rec(&mut Vec::with_capacity(dim), dim, degree, out);
}

impl JetSpace {
    pub fn new(dim: usize, max_order: usize) -> Result<Arc<Self>, JetError> {
        if dim == 0 || dim > MAX_DIM {
            return Err(JetError::UnsupportedDimension(dim));
        }
        if max_order > MAX_ORDER {
            return Err(JetError::OrderTooLarge { requested: max_order, max: MAX_ORDER });
        }
        let mut indices: Vec<Vec<u8>> = Vec::new();
        let mut counts = Vec::with_capacity(max_order + 1);
        for d in 0..=max_order {
            graded_block(dim, d, &mut indices);
            counts.push(indices.len());
        }
        let lookup: BTreeMap<Vec<u8>, usize> =
            indices.iter().enumerate().map(|(i, m)| (m.clone(), i)).collect();
        let degrees: Vec<u8> = indices.iter().map(|m| m.iter().sum()).collect();
        let inv_factorials = indices
            .iter()
            .map(|m| 1.0 / m.iter().map(|&p| factorial(p as usize)).product::<f64>())
            .collect();

        let mut mul_offsets = Vec::with_capacity(indices.len());
        let mut mul_table = Vec::new();
        let mut sum = vec![0u8; dim];
        for (i, mi) in indices.iter().enumerate() {
            mul_offsets.push(mul_table.len());
            let room = max_order - degrees[i] as usize;
            for mj in &indices[..counts[room]] {
                for a in 0..dim {
                    sum[a] = mi[a] + mj[a];
                }
                mul_table.push(lookup[&sum] as u32);
            }
        }
        let exps = indices.iter().flatten().copied().collect();
        Ok(Arc::new(JetSpace {
            dim,
            max_order,
            exps,
            degrees,
            counts,
            inv_factorials,
            mul_offsets,
            mul_table,
            lookup,
        }))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    /// Total coefficient count at the maximum order.
    pub fn len(&self) -> usize {
        self.degrees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.degrees.is_empty()
    }

    /// Number of coefficients of a jet of the given order: `C(dim + order, order)`.
    pub fn count(&self, order: usize) -> usize {
        self.counts[order]
    }

    pub fn multi_index(&self, idx: usize) -> &[u8] {
        &self.exps[idx * self.dim..(idx + 1) * self.dim]
    }

    pub fn degree(&self, idx: usize) -> usize {
        self.degrees[idx] as usize
    }

    pub fn index_of(&self, mu: &[u8]) -> Option<usize> {
        self.lookup.get(mu).copied()
    }

    fn check_order(&self, order: usize) -> Result<(), JetError> {
        if order > self.max_order {
            Err(JetError::OrderTooLarge { requested: order, max: self.max_order })
        } else {
            Ok(())
        }
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Truncated Taylor expansion of a scalar function at a point.
#[derive(Clone)]
pub struct Jet {
    space: Arc<JetSpace>,
    order: usize,
    coeffs: Vec<f64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet")
            .field("dim", &self.space.dim)
            .field("order", &self.order)
            .field("coeffs", &self.coeffs)
            .finish()
    }
}

impl Jet {
    pub fn zero(space: &Arc<JetSpace>, order: usize) -> Result<Self, JetError> {
        space.check_order(order)?;
        Ok(Self::zero_unchecked(space, order))
    }

    pub(crate) fn zero_unchecked(space: &Arc<JetSpace>, order: usize) -> Self {
        Jet { space: space.clone(), order, coeffs: vec![0.0; space.count(order)] }
    }

    pub fn constant(space: &Arc<JetSpace>, order: usize, value: f64) -> Result<Self, JetError> {
        let mut j = Self::zero(space, order)?;
        j.coeffs[0] = value;
        Ok(j)
    }

    /// Jet of the coordinate function `x_axis` at a point where it equals `value`.
    pub fn variable(
        space: &Arc<JetSpace>,
        order: usize,
        axis: usize,
        value: f64,
    ) -> Result<Self, JetError> {
        if axis >= space.dim {
            return Err(JetError::DimensionMismatch { expected: space.dim, found: axis + 1 });
        }
        let mut j = Self::constant(space, order, value)?;
        if order >= 1 {
            j.coeffs[1 + axis] = 1.0;
        }
        Ok(j)
    }

    /// Builds a jet from raw scaled coefficients in the space's layout.
    pub fn from_coeffs(
        space: &Arc<JetSpace>,
        order: usize,
        coeffs: Vec<f64>,
    ) -> Result<Self, JetError> {
        space.check_order(order)?;
        if coeffs.len() != space.count(order) {
            return Err(JetError::ShapeMismatch);
        }
        Ok(Jet { space: space.clone(), order, coeffs })
    }

    pub fn space(&self) -> &Arc<JetSpace> {
        &self.space
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.space.dim
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Scaled coefficient `∂^μ f / μ!`, or `None` when `|μ|` exceeds the order.
    pub fn coeff(&self, mu: &[u8]) -> Option<f64> {
        let idx = self.space.index_of(mu)?;
        self.coeffs.get(idx).copied()
    }

    /// Unscaled partial derivative `∂^μ f`.
    pub fn partial(&self, mu: &[u8]) -> Option<f64> {
        let idx = self.space.index_of(mu)?;
        self.coeffs.get(idx).map(|c| c / self.space.inv_factorials[idx])
    }

    pub fn truncate(&self, order: usize) -> Jet {
        let order = order.min(self.order);
        Jet {
            space: self.space.clone(),
            order,
            coeffs: self.coeffs[..self.space.count(order)].to_vec(),
        }
    }

    fn same_space(&self, other: &Jet) -> bool {
        Arc::ptr_eq(&self.space, &other.space)
            || (self.space.dim == other.space.dim && self.space.max_order == other.space.max_order)
    }

    fn check_shape(&self, other: &Jet) -> Result<(), JetError> {
        if self.same_space(other) && self.order == other.order {
            Ok(())
        } else {
            Err(JetError::ShapeMismatch)
        }
    }

    pub fn try_add(&self, other: &Jet) -> Result<Jet, JetError> {
        self.check_shape(other)?;
        Ok(self.add_truncated(other, 1.0))
    }

    pub fn try_sub(&self, other: &Jet) -> Result<Jet, JetError> {
        self.check_shape(other)?;
        Ok(self.add_truncated(other, -1.0))
    }

    /// Truncated Cauchy product; both factors must share dimension and order.
    pub fn try_mul(&self, other: &Jet) -> Result<Jet, JetError> {
        self.check_shape(other)?;
        Ok(self.mul_truncated(other))
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet {
            space: self.space.clone(),
            order: self.order,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    /// `self + s * other`, truncated to the smaller of the two orders.
    pub fn add_truncated(&self, other: &Jet, s: f64) -> Jet {
        assert!(self.same_space(other), "jets from different spaces");
        let order = self.order.min(other.order);
        let n = self.space.count(order);
        let coeffs = self.coeffs[..n]
            .iter()
            .zip(&other.coeffs[..n])
            .map(|(a, b)| a + s * b)
            .collect();
        Jet { space: self.space.clone(), order, coeffs }
    }

    /// In-place `self += s * other`; `other` must have order at least `self.order`.
    pub fn axpy(&mut self, s: f64, other: &Jet) {
        debug_assert!(self.same_space(other) && other.order >= self.order);
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += s * b;
        }
    }

    /// Truncated product at the smaller of the two orders.
    pub fn mul_truncated(&self, other: &Jet) -> Jet {
        let mut out = Jet::zero_unchecked(&self.space, self.order.min(other.order));
        out.add_product(self, other, 1.0);
        out
    }

    /// Accumulates `s * a * b` into `self` at `self.order`.
    pub fn add_product(&mut self, a: &Jet, b: &Jet, s: f64) {
        debug_assert!(a.order >= self.order && b.order >= self.order);
        let sp = &*self.space;
        let order = self.order;
        let na = sp.count(order);
        for i in 0..na {
            let ai = a.coeffs[i];
            if ai == 0.0 {
                continue;
            }
            let room = order - sp.degrees[i] as usize;
            let off = sp.mul_offsets[i];
            let row = &sp.mul_table[off..off + sp.count(room)];
            let sa = s * ai;
            for (j, &k) in row.iter().enumerate() {
                self.coeffs[k as usize] += sa * b.coeffs[j];
            }
        }
    }

    /// `∂_axis` of the jet; the result has order one less.
    pub fn differentiate(&self, axis: usize) -> Jet {
        assert!(self.order >= 1, "cannot differentiate an order-0 jet");
        assert!(axis < self.space.dim);
        let sp = &*self.space;
        let order = self.order - 1;
        let mut out = Jet::zero_unchecked(&self.space, order);
        // μ + e_axis is the product index of (μ, e_axis); e_axis sits at 1 + axis
        for i in 0..sp.count(order) {
            let k = sp.mul_table[sp.mul_offsets[i] + 1 + axis] as usize;
            let mult = sp.exps[i * sp.dim + axis] as f64 + 1.0;
            out.coeffs[i] = mult * self.coeffs[k];
        }
        out
    }

    fn nilpotent_part(&self) -> Jet {
        let mut h = self.clone();
        h.coeffs[0] = 0.0;
        h
    }

    /// Composition `exp ∘ f`.
    pub fn exp(&self) -> Jet {
        let c0 = self.value();
        let h = self.nilpotent_part();
        let mut term = Jet::constant(&self.space, self.order, 1.0).expect("order checked");
        let mut sum = term.clone();
        for m in 1..=self.order {
            term = term.mul_truncated(&h).scale(1.0 / m as f64);
            sum.axpy(1.0, &term);
        }
        sum.scale(libm::exp(c0))
    }

    /// Returns `(sin ∘ f, cos ∘ f)`.
    pub fn sin_cos(&self) -> (Jet, Jet) {
        let c0 = self.value();
        let h = self.nilpotent_part();
        let mut sin_h = Jet::zero_unchecked(&self.space, self.order);
        let mut cos_h = Jet::zero_unchecked(&self.space, self.order);
        let mut power = Jet::constant(&self.space, self.order, 1.0).expect("order checked");
        for m in 0..=self.order {
            let c = 1.0 / factorial(m);
            match m % 4 {
                0 => cos_h.axpy(c, &power),
                1 => sin_h.axpy(c, &power),
                2 => cos_h.axpy(-c, &power),
                _ => sin_h.axpy(-c, &power),
            }
            power = power.mul_truncated(&h);
        }
        let (s0, c0) = (libm::sin(c0), libm::cos(c0));
        let sin = sin_h.scale(c0).add_truncated(&cos_h, s0);
        let cos = cos_h.scale(c0).add_truncated(&sin_h, -s0);
        (sin, cos)
    }
}

impl core::ops::Add<&Jet> for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        self.add_truncated(rhs, 1.0)
    }
}

impl core::ops::Sub<&Jet> for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        self.add_truncated(rhs, -1.0)
    }
}

impl core::ops::Mul<&Jet> for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        self.mul_truncated(rhs)
    }
}
