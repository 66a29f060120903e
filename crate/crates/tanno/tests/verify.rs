use tanno::verify::{run, Fault, Identity};
use tanno_core::models;

#[test]
fn sweeps_pass_on_every_builtin() {
    for m in [
        models::heisenberg(1).unwrap(),
        models::twisted(0.0, 1.0).unwrap(),
        models::twisted(-1.0, 1.0).unwrap(),
        models::twisted(1.0, 1.0).unwrap(),
        models::builtin("shear", &[]).unwrap(),
    ] {
        let r = run(&m, 30, 1, 1e-8, Fault::None).unwrap();
        assert!(r.passed(), "{}: {:?}", m.name(), r.results);
        for res in &r.results {
            assert!(res.checks > 0);
        }
    }
}

#[test]
fn non_sasakian_twist_breaks_only_the_stated_inequality() {
    let m = models::twisted(0.0, 1.0).unwrap();
    let r = run(&m, 30, 2, 1e-8, Fault::None).unwrap();
    let stated = r.results.iter().find(|x| x.identity == Identity::CdSlackAsStated).unwrap();
    assert!(!stated.passed && !stated.identity.gating());
    let corrected = r.results.iter().find(|x| x.identity == Identity::CdSlack).unwrap();
    assert!(corrected.passed && corrected.worst >= -1e-8);
    assert!(r.passed());
}

#[test]
fn injected_fault_fails_with_witness() {
    let m = models::heisenberg(1).unwrap();
    let r = run(&m, 20, 0, 1e-8, Fault::CurvatureShift(1e-3)).unwrap();
    assert!(!r.passed());
    let h = r.results.iter().find(|x| x.identity == Identity::BochnerHorizontal).unwrap();
    assert!(!h.passed);
    let w = h.witness.as_ref().unwrap();
    assert!(w.index < 20);
    assert_eq!(w.f_seed, tanno::verify::f_seed(0, w.index));
    assert_eq!(w.point, tanno::verify::sample_points(&m, 20, 0)[w.index]);
    assert!(h.worst > 1e-8);
}

#[test]
fn sweeps_are_deterministic() {
    let m = models::builtin("shear", &[]).unwrap();
    assert_eq!(run(&m, 10, 5, 1e-8, Fault::None).unwrap(), run(&m, 10, 5, 1e-8, Fault::None).unwrap());
    assert_ne!(run(&m, 10, 5, 1e-8, Fault::None).unwrap().results, run(&m, 10, 6, 1e-8, Fault::None).unwrap().results);
}

#[test]
fn vertical_identity_is_skipped_with_diagonal_delta() {
    let m = models::heisenberg(1).unwrap();
    let r = run(&m, 5, 0, 1e-8, Fault::None).unwrap();
    assert!(!r.vertical_skipped);
    assert!(r.results.iter().any(|x| x.identity == Identity::BochnerVertical));
}
