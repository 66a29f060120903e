mod common;

use common::*;
use nalgebra::DMatrix;
use rand::Rng;
use tanno_core::frame::{structure_functions, Backend, ChartModel, ContactModel, LieGroupModel, StructureData, StructureTable, Tensor3};
use tanno_core::geometry::{christoffels, cross_field_w, ric_tau2_matrix, v_field, GeometryData};
use tanno_core::jets::{Point, Polynomial};
use tanno_core::{linalg, models};

fn random_table(r: &mut rand_chacha::ChaCha8Rng, m: usize) -> StructureTable {
    let mut t = StructureTable::zeros(m);
    for i in 0..m {
        for j in 0..i {
            for k in 0..m {
                let v = r.gen_range(-1.0..1.0);
                t.w[(i, j, k)] = v;
                t.w[(j, i, k)] = -v;
            }
            let g = r.gen_range(-1.0..1.0);
            t.gamma[(i, j)] = g;
            t.gamma[(j, i)] = -g;
        }
        for j in 0..m {
            t.delta[(i, j)] = r.gen_range(-1.0..1.0);
        }
    }
    t
}

/// Ricci contraction of the connection plus the γδ torsion contraction,
/// written through Christoffel symbols instead of the consolidated display.
fn ric_tau2_by_contraction(sd: &StructureData) -> DMatrix<f64> {
    let m = sd.horizontal_dim();
    let g = christoffels(sd);
    let w = &sd.w;
    let ric = DMatrix::from_fn(m, m, |l, k| {
        let mut s = 0.0;
        for i in 0..m {
            for j in 0..m {
                s += g[(l, k, i)] * g[(j, i, j)] - g[(j, k, i)] * g[(l, i, j)] - w[(j, l, i)] * g[(i, k, j)];
            }
            s += sd.gamma[(k, i)] * sd.delta[(i, l)];
        }
        s
    });
    linalg::sym(&ric)
}

#[test]
fn curvature_form_agrees_with_contraction_formula() {
    let mut r = rng(31);
    for m in [2usize, 4, 6] {
        for _ in 0..20 {
            let sd = StructureData::from_table(m / 2, &random_table(&mut r, m));
            let a = linalg::sym(&ric_tau2_matrix(&sd));
            let b = ric_tau2_by_contraction(&sd);
            assert!(linalg::max_abs(&(a - b)) < 1e-10);
        }
    }
}

#[test]
fn linearly_varying_gamma_gives_w_from_its_derivative() {
    // X_1 = ∂x, X_2 = ∂y + (x + x²/2)∂z, Z = ∂z: [X_1, X_2] = (1 + x) Z
    let d = 3;
    let c = |v| Polynomial::constant(d, v);
    let x = |p: u32, coef: f64| {
        let mut e = vec![0; d];
        e[0] = p;
        Polynomial::new(d, vec![tanno_core::jets::Monomial::new(coef, e)]).unwrap()
    };
    let fields = vec![
        vec![c(1.0), c(0.0), c(0.0)],
        vec![c(0.0), c(1.0), x(1, 1.0).add(&x(2, 0.5))],
        vec![c(0.0), c(0.0), c(1.0)],
    ];
    let m = ContactModel::chart("gamma-linear", 1, ChartModel { fields }, vec![]).unwrap();
    let sd = structure_functions(&m, &Point(vec![0.4, -0.3, 0.9])).unwrap();
    assert!((sd.gamma[(0, 1)] - 1.4).abs() < 1e-14);
    let w = cross_field_w(&sd);
    // W_k = -Σ_j X_j γ_kj: W_1 = -X_2 γ_12 = 0, W_2 = -X_1 γ_21 = 1
    assert!(w[0].abs() < 1e-14 && (w[1] - 1.0).abs() < 1e-14);
}

#[test]
fn shear_model_closed_forms() {
    let (c1, c2, c3) = (0.5, 0.3, -0.2);
    let m = models::shear(c1, c2, c3).unwrap();
    let mut r = rng(32);
    for _ in 0..10 {
        let p: Vec<f64> = (0..3).map(|_| r.gen_range(-1.0..1.0)).collect();
        let sd = structure_functions(&m, &Point(p.clone())).unwrap();
        let x2phi = c1 + c2 * p[0] / 2.0;
        assert!((sd.w[(0, 1, 1)] + x2phi).abs() < 1e-13);
        assert!(sd.w[(0, 1, 0)].abs() < 1e-13);
        assert!((sd.delta[(0, 1)] + c2).abs() < 1e-13);
        assert!(sd.delta[(1, 0)].abs() < 1e-13);
        assert!(cross_field_w(&sd).norm() < 1e-13);
        let v = v_field(&sd);
        assert!(v[0].abs() < 1e-13);
        assert!((v[1] + 2.0 * c2 * x2phi).abs() < 1e-13, "{}", v[1]);
    }
}

#[test]
fn torsion_anticommutes_with_j() {
    let mut r = rng(33);
    for m in suite() {
        for _ in 0..10 {
            let g = GeometryData::from_structure(&structure_functions(&m, &random_point(&mut r, &m)).unwrap());
            assert!(g.anticommutator_residual() < 1e-10, "{}", m.name());
            assert!(linalg::max_abs(&(&g.j * g.j.transpose() - DMatrix::identity(g.j.nrows(), g.j.nrows()))) < 1e-12);
        }
    }
}

fn rotate(t: &StructureTable, r: &DMatrix<f64>) -> StructureTable {
    let m = t.horizontal_dim();
    let mut w = Tensor3::zeros(m);
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                let mut s = 0.0;
                for a in 0..m {
                    for b in 0..m {
                        for c in 0..m {
                            s += r[(i, a)] * r[(j, b)] * t.w[(a, b, c)] * r[(k, c)];
                        }
                    }
                }
                w[(i, j, k)] = s;
            }
        }
    }
    StructureTable { w, gamma: r * &t.gamma * r.transpose(), delta: r * &t.delta * r.transpose() }
}

#[test]
fn invariants_survive_a_unitary_change_of_frame() {
    for (a, b) in [(0.0, 1.0), (-1.0, 1.0), (0.4, -1.3)] {
        let model = models::twisted(a, b).unwrap();
        let Backend::Lie(lie) = model.backend() else { unreachable!() };
        let th: f64 = 0.83;
        let rot = DMatrix::from_row_slice(2, 2, &[th.cos(), th.sin(), -th.sin(), th.cos()]);
        let mut gens: Vec<DMatrix<f64>> =
            (0..2).map(|i| &lie.generators[0] * rot[(i, 0)] + &lie.generators[1] * rot[(i, 1)]).collect();
        gens.push(lie.generators[2].clone());
        let rotated = LieGroupModel { generators: gens, table: rotate(&lie.table, &rot) };
        let rm = ContactModel::lie("rotated", 1, rotated, vec![]).unwrap();
        let g0 = GeometryData::from_structure(&structure_functions(&model, &model.base_point()).unwrap());
        let g1 = GeometryData::from_structure(&structure_functions(&rm, &rm.base_point()).unwrap());
        let e0 = linalg::sym(&g0.ric_tau2).symmetric_eigenvalues();
        let e1 = linalg::sym(&g1.ric_tau2).symmetric_eigenvalues();
        let (mut e0, mut e1): (Vec<f64>, Vec<f64>) = (e0.iter().copied().collect(), e1.iter().copied().collect());
        e0.sort_by(f64::total_cmp);
        e1.sort_by(f64::total_cmp);
        for (x, y) in e0.iter().zip(&e1) {
            assert!((x - y).abs() < 1e-10);
        }
        assert!((g0.v.norm() - g1.v.norm()).abs() < 1e-10);
        assert!((g0.w.norm() - g1.w.norm()).abs() < 1e-10);
        assert!((g0.tau_op_sq() - g1.tau_op_sq()).abs() < 1e-10);
    }
}
