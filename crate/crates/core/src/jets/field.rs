//! Scalar fields that can be expanded into jets.

use super::{Jet, JetError, JetSpace, Point};
use alloc::collections::BTreeMap;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq)]
pub struct Monomial {
    pub coeff: f64,
    pub powers: Vec<u32>,
}

impl Monomial {
    pub fn new(coeff: f64, powers: Vec<u32>) -> Self {
        Monomial { coeff, powers }
    }

    pub fn degree(&self) -> u32 {
        self.powers.iter().sum()
    }
}

/// Sparse polynomial in `dim` variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    dim: usize,
    terms: Vec<Monomial>,
}

pub(crate) fn ipow(x: f64, k: u32) -> f64 {
    let mut acc = 1.0;
    for _ in 0..k {
        acc *= x;
    }
    acc
}

fn binom(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

impl Polynomial {
    pub fn new(dim: usize, terms: Vec<Monomial>) -> Result<Self, JetError> {
        if let Some(t) = terms.iter().find(|t| t.powers.len() != dim) {
            return Err(JetError::DimensionMismatch { expected: dim, found: t.powers.len() });
        }
        Ok(Polynomial { dim, terms }.simplified())
    }

    pub fn zero(dim: usize) -> Self {
        Polynomial { dim, terms: Vec::new() }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        Polynomial { dim, terms: vec![Monomial::new(c, vec![0; dim])] }.simplified()
    }

    /// The coordinate function `x_axis`.
    pub fn coordinate(dim: usize, axis: usize) -> Self {
        let mut p = vec![0; dim];
        p[axis] = 1;
        Polynomial { dim, terms: vec![Monomial::new(1.0, p)] }
    }

    /// `c * x_axis`, a common building block for frames.
    pub fn linear(dim: usize, axis: usize, c: f64) -> Self {
        Self::coordinate(dim, axis).scale(c)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[Monomial] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(Monomial::degree).max().unwrap_or(0)
    }

    /// Merges like terms and drops zero coefficients; terms end up sorted by powers.
    pub fn simplified(self) -> Self {
        let mut acc: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
        for t in self.terms {
            *acc.entry(t.powers).or_insert(0.0) += t.coeff;
        }
        let terms = acc
            .into_iter()
            .filter(|(_, c)| *c != 0.0)
            .map(|(p, c)| Monomial::new(c, p))
            .collect();
        Polynomial { dim: self.dim, terms }
    }

    pub fn scale(&self, s: f64) -> Self {
        let terms = self.terms.iter().map(|t| Monomial::new(t.coeff * s, t.powers.clone())).collect();
        Polynomial { dim: self.dim, terms }.simplified()
    }

    pub fn add(&self, other: &Polynomial) -> Self {
        assert_eq!(self.dim, other.dim);
        let terms = self.terms.iter().chain(&other.terms).cloned().collect();
        Polynomial { dim: self.dim, terms }.simplified()
    }

    pub fn mul(&self, other: &Polynomial) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for a in &self.terms {
            for b in &other.terms {
                let powers = a.powers.iter().zip(&b.powers).map(|(x, y)| x + y).collect();
                terms.push(Monomial::new(a.coeff * b.coeff, powers));
            }
        }
        Polynomial { dim: self.dim, terms }.simplified()
    }

    pub fn derivative(&self, axis: usize) -> Self {
        let terms = self
            .terms
            .iter()
            .filter(|t| t.powers[axis] > 0)
            .map(|t| {
                let mut powers = t.powers.clone();
                powers[axis] -= 1;
                Monomial::new(t.coeff * t.powers[axis] as f64, powers)
            })
            .collect();
        Polynomial { dim: self.dim, terms }.simplified()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coeff * t.powers.iter().zip(x).map(|(&p, &xi)| ipow(xi, p)).product::<f64>())
            .sum()
    }

    /// Exact Taylor expansion at `x`.
    pub fn jet(&self, space: &Arc<JetSpace>, x: &[f64], order: usize) -> Result<Jet, JetError> {
        if x.len() != self.dim {
            return Err(JetError::DimensionMismatch { expected: self.dim, found: x.len() });
        }
        if space.dim() != self.dim {
            return Err(JetError::DimensionMismatch { expected: space.dim(), found: self.dim });
        }
        let mut out = Jet::zero(space, order)?;
        let n = space.count(order);
        for t in &self.terms {
            'idx: for idx in 0..n {
                let q = space.multi_index(idx);
                let mut c = t.coeff;
                for a in 0..self.dim {
                    let (p, qa) = (t.powers[a], q[a] as u32);
                    if qa > p {
                        continue 'idx;
                    }
                    c *= binom(p, qa) * ipow(x[a], p - qa);
                }
                out.coeffs[idx] += c;
            }
        }
        Ok(out)
    }
}

/// Named non-polynomial test functions.
#[derive(Debug, Clone, PartialEq)]
pub enum BuiltinField {
    /// `exp(-scale * |x|²)`
    Gaussian { scale: f64 },
    /// `cos(frequency * x_axis)`
    Cosine { axis: usize, frequency: f64 },
}

impl BuiltinField {
    pub fn name(&self) -> &'static str {
        match self {
            BuiltinField::Gaussian { .. } => "gaussian",
            BuiltinField::Cosine { .. } => "cosine",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScalarField {
    Polynomial(Polynomial),
    Builtin { dim: usize, field: BuiltinField },
}

impl From<Polynomial> for ScalarField {
    fn from(p: Polynomial) -> Self {
        ScalarField::Polynomial(p)
    }
}

impl ScalarField {
    pub fn dim(&self) -> usize {
        match self {
            ScalarField::Polynomial(p) => p.dim(),
            ScalarField::Builtin { dim, .. } => *dim,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            ScalarField::Polynomial(p) => p.eval(x),
            ScalarField::Builtin { field, .. } => match *field {
                BuiltinField::Gaussian { scale } => {
                    libm::exp(-scale * x.iter().map(|v| v * v).sum::<f64>())
                }
                BuiltinField::Cosine { axis, frequency } => libm::cos(frequency * x[axis]),
            },
        }
    }

    /// Euclidean gradient in chart coordinates.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        match self {
            ScalarField::Polynomial(p) => (0..p.dim()).map(|a| p.derivative(a).eval(x)).collect(),
            ScalarField::Builtin { field, dim } => match *field {
                BuiltinField::Gaussian { scale } => {
                    let e = self.eval(x);
                    x.iter().map(|xa| -2.0 * scale * xa * e).collect()
                }
                BuiltinField::Cosine { axis, frequency } => {
                    let mut g = vec![0.0; *dim];
                    g[axis] = -frequency * libm::sin(frequency * x[axis]);
                    g
                }
            },
        }
    }

    pub fn jet(&self, space: &Arc<JetSpace>, x: &[f64], order: usize) -> Result<Jet, JetError> {
        if x.len() != self.dim() {
            return Err(JetError::DimensionMismatch { expected: self.dim(), found: x.len() });
        }
        match self {
            ScalarField::Polynomial(p) => p.jet(space, x, order),
            ScalarField::Builtin { field, .. } => {
                if space.dim() != x.len() {
                    return Err(JetError::DimensionMismatch { expected: space.dim(), found: x.len() });
                }
                match *field {
                    BuiltinField::Gaussian { scale } => {
                        let mut r2 = Jet::zero(space, order)?;
                        for (a, &xa) in x.iter().enumerate() {
                            let v = Jet::variable(space, order, a, xa)?;
                            r2.add_product(&v, &v, 1.0);
                        }
                        Ok(r2.scale(-scale).exp())
                    }
                    BuiltinField::Cosine { axis, frequency } => {
                        if axis >= x.len() {
                            return Err(JetError::DimensionMismatch { expected: x.len(), found: axis + 1 });
                        }
                        let u = Jet::variable(space, order, axis, x[axis])?.scale(frequency);
                        Ok(u.sin_cos().1)
                    }
                }
            }
        }
    }
}

/// Taylor expansion of `f` at `x` up to `order`.
pub fn jet_eval(
    space: &Arc<JetSpace>,
    f: &ScalarField,
    x: &Point,
    order: usize,
) -> Result<Jet, JetError> {
    f.jet(space, x.coords(), order)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplification_merges_terms() {
        let p = Polynomial::new(2, vec![Monomial::new(1.0, vec![1, 0]), Monomial::new(-1.0, vec![1, 0])])
            .unwrap();
        assert!(p.is_zero());
        assert!(Polynomial::new(2, vec![Monomial::new(1.0, vec![1])]).is_err());
    }

    #[test]
    fn builtin_value_matches_eval() {
        let sp = JetSpace::new(3, 4).unwrap();
        let x = [0.2, -0.4, 0.9];
        for f in [
            ScalarField::Builtin { dim: 3, field: BuiltinField::Gaussian { scale: 0.7 } },
            ScalarField::Builtin { dim: 3, field: BuiltinField::Cosine { axis: 2, frequency: 1.3 } },
        ] {
            let j = f.jet(&sp, &x, 4).unwrap();
            assert!((j.value() - f.eval(&x)).abs() < 1e-15);
        }
    }

    #[test]
    fn gaussian_second_derivative() {
        // d²/dx² exp(-s x²) = (4 s² x² - 2 s) exp(-s x²)
        let sp = JetSpace::new(1, 3).unwrap();
        let s = 0.7;
        let x = 0.45;
        let f = ScalarField::Builtin { dim: 1, field: BuiltinField::Gaussian { scale: s } };
        let j = f.jet(&sp, &[x], 3).unwrap();
        let expected = (4.0 * s * s * x * x - 2.0 * s) * libm::exp(-s * x * x);
        assert!((j.partial(&[2]).unwrap() - expected).abs() < 1e-14);
    }
}
