use tanno::model_json::{from_file, load_model, model_hash, parse_model, resolve, save_model, to_file, to_json};
use tanno_core::frame::structure_functions;
use tanno_core::jets::Point;
use tanno_core::models;
use tanno_core::ContactModel;

fn probe_points(model: &ContactModel) -> Vec<Point> {
    tanno::verify::sample_points(model, 10, 17)
}

fn same_structure(a: &ContactModel, b: &ContactModel) {
    for x in probe_points(a) {
        let (sa, sb) = (structure_functions(a, &x).unwrap(), structure_functions(b, &x).unwrap());
        assert_eq!(sa.w.data(), sb.w.data());
        assert_eq!(sa.gamma, sb.gamma);
        assert_eq!(sa.delta, sb.delta);
        for l in 0..=a.horizontal_dim() {
            assert_eq!(sa.dc(l), sb.dc(l));
        }
    }
}

#[test]
fn builtin_models_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    for m in [
        models::heisenberg(1).unwrap(),
        models::heisenberg(2).unwrap(),
        models::twisted(0.0, 1.0).unwrap(),
        models::twisted(-1.0, 1.0).unwrap(),
        models::builtin("shear", &[]).unwrap(),
    ] {
        let path = dir.path().join(format!("{}.json", m.name()));
        save_model(&m, &path).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(back.name(), m.name());
        assert_eq!(back.parameters(), m.parameters());
        assert_eq!(back.tags(), m.tags());
        same_structure(&m, &back);
        assert_eq!(model_hash(&m), model_hash(&back));
    }
}

#[test]
fn hash_distinguishes_models() {
    let a = models::twisted(0.0, 1.0).unwrap();
    let b = models::twisted(0.0, 1.5).unwrap();
    assert_ne!(model_hash(&a), model_hash(&b));
    assert_eq!(model_hash(&a).len(), 64);
}

fn twisted_file(edit: impl FnOnce(&mut serde_json::Value)) -> String {
    let mut v: serde_json::Value = serde_json::from_str(&to_json(&models::twisted(0.0, 1.0).unwrap())).unwrap();
    edit(&mut v);
    v.to_string()
}

#[test]
fn non_orthogonal_gamma_is_rejected() {
    let text = twisted_file(|v| {
        v["brackets"]["gamma"] = serde_json::json!([[0.0, 2.0], [-2.0, 0.0]]);
    });
    let err = parse_model(&text).unwrap_err().to_string();
    assert!(err.contains("γγᵀ ≠ Id"), "{err}");
}

#[test]
fn diagonal_delta_is_rejected() {
    let text = twisted_file(|v| {
        v["brackets"]["delta"][0][0] = serde_json::json!(0.1);
    });
    let err = parse_model(&text).unwrap_err().to_string();
    assert!(err.contains("frame not δ-normalized"), "{err}");
}

#[test]
fn table_must_match_generators() {
    let text = twisted_file(|v| {
        v["brackets"]["delta"][0][1] = serde_json::json!(0.5);
    });
    let err = parse_model(&text).unwrap_err().to_string();
    assert!(err.contains("commutators disagree"), "{err}");
}

#[test]
fn schema_violations_are_reported() {
    for text in [
        "{",
        r#"{"n": 1}"#,
        r#"{"n": 1, "backend": "torus"}"#,
        r#"{"n": 1, "backend": "chart"}"#,
        r#"{"n": 1, "backend": "chart", "frame": [], "extra": 1}"#,
        r#"{"n": 0, "backend": "chart", "frame": []}"#,
        r#"{"n": 1, "backend": "lie", "generators": [[1.0, 0.0]], "brackets": {"w": [], "gamma": [], "delta": []}}"#,
    ] {
        let err = parse_model(text).unwrap_err().to_string();
        assert!(err.starts_with("schema error"), "{text}: {err}");
    }
}

#[test]
fn chart_frames_are_validated_at_probe_points() {
    // X_1 = 2∂x breaks γγᵀ = Id everywhere
    let mut file = to_file(&models::heisenberg(1).unwrap());
    let frame = file.frame.as_mut().unwrap();
    frame[0][0][0].coeff = 2.0;
    let err = from_file(&file).unwrap_err().to_string();
    assert!(err.contains("γγᵀ ≠ Id"), "{err}");

    let mut file = to_file(&models::heisenberg(1).unwrap());
    file.probe_points = Some(vec![vec![0.5, 0.5]]);
    assert!(from_file(&file).unwrap_err().to_string().contains("probe point"));
}

#[test]
fn resolve_handles_names_and_paths() {
    assert_eq!(resolve("twisted", &[("a", -1.0), ("b", 1.0)]).unwrap().name(), "twisted(-1,1)");
    assert!(resolve("nosuchmodel", &[]).is_err());
    assert!(resolve("heisenberg", &[("a", 1.0)]).is_err());
    let err = resolve("/nonexistent/model.json", &[]).unwrap_err().to_string();
    assert!(err.contains("cannot read"), "{err}");
}
