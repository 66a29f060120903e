#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tanno_core::jets::{Monomial, Point, Polynomial, ScalarField};
use tanno_core::models;
use tanno_core::ContactModel;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// All exponent vectors of total degree <= `deg` in `dim` variables.
pub fn exponents(dim: usize, deg: u32) -> Vec<Vec<u32>> {
    let mut out = vec![vec![]];
    for _ in 0..dim {
        let mut next = Vec::new();
        for e in &out {
            let used: u32 = e.iter().sum();
            for p in 0..=deg - used {
                let mut e2 = e.clone();
                e2.push(p);
                next.push(e2);
            }
        }
        out = next;
    }
    out
}

pub fn random_poly(rng: &mut ChaCha8Rng, dim: usize, deg: u32) -> Polynomial {
    let terms = exponents(dim, deg)
        .into_iter()
        .map(|p| Monomial::new(rng.gen_range(-1.0..1.0), p))
        .collect();
    Polynomial::new(dim, terms).unwrap()
}

pub fn random_cubic(rng: &mut ChaCha8Rng, dim: usize) -> ScalarField {
    ScalarField::Polynomial(random_poly(rng, dim, 3))
}

pub fn random_point(rng: &mut ChaCha8Rng, model: &ContactModel) -> Point {
    if model.is_lie() {
        let c: Vec<f64> = (0..=model.horizontal_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        model.group_point(&c).unwrap()
    } else {
        Point((0..model.ambient_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect())
    }
}

/// The five models of the identity suite.
pub fn suite() -> Vec<ContactModel> {
    vec![
        models::heisenberg(1).unwrap(),
        models::heisenberg(2).unwrap(),
        models::twisted(0.0, 1.0).unwrap(),
        models::twisted(-1.0, 1.0).unwrap(),
        models::builtin("shear", &[]).unwrap(),
    ]
}

/// Symbolic partial derivative, independent of the jet machinery.
pub fn diff(p: &Polynomial, axis: usize) -> Polynomial {
    let terms = p
        .terms()
        .iter()
        .filter(|t| t.powers[axis] > 0)
        .map(|t| {
            let mut powers = t.powers.clone();
            powers[axis] -= 1;
            Monomial::new(t.coeff * t.powers[axis] as f64, powers)
        })
        .collect();
    Polynomial::new(p.dim(), terms).unwrap()
}

/// Central differences with one Richardson step: error O(h^4).
pub fn richardson(f: impl Fn(f64) -> f64, h: f64) -> f64 {
    let d = |h: f64| (f(h) - f(-h)) / (2.0 * h);
    (4.0 * d(h / 2.0) - d(h)) / 3.0
}
