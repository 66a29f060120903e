//! Reading and writing models as JSON.
//!
//! Chart files list every frame field as an array of coordinate
//! coefficients, each a polynomial given as `[{coeff, powers}]`. Group files
//! list the generators as row-major matrices together with the bracket table.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::Path;
use tanno_core::frame::{validate_structure, Backend, ChartModel, FrameError, LieGroupModel, StructureData, StructureTable, Tensor3};
use tanno_core::jets::{Monomial, Point, Polynomial};
use tanno_core::models::{self, ModelError};
use tanno_core::ContactModel;

/// Tolerance for the adaptedness checks run on loaded models.
pub const LOAD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonomialJson {
    pub coeff: f64,
    pub powers: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Chart,
    Lie,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BracketsJson {
    /// `w[i][j][k]`
    pub w: Vec<Vec<Vec<f64>>>,
    pub gamma: Vec<Vec<f64>>,
    pub delta: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub n: usize,
    pub backend: BackendKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<Vec<Vec<Vec<MonomialJson>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generators: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub brackets: Option<BracketsJson>,
    /// Extra points at which a chart frame is validated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe_points: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub parameters: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tags: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn poly_to_json(p: &Polynomial) -> Vec<MonomialJson> {
    p.terms().iter().map(|t| MonomialJson { coeff: t.coeff, powers: t.powers.clone() }).collect()
}

fn poly_from_json(dim: usize, terms: &[MonomialJson]) -> Result<Polynomial, LoadError> {
    let monos = terms.iter().map(|t| Monomial::new(t.coeff, t.powers.clone())).collect();
    Polynomial::new(dim, monos).map_err(|e| LoadError::Schema(format!("polynomial: {e}")))
}

pub fn to_file(model: &ContactModel) -> ModelFile {
    let parameters = model.parameters().iter().cloned().collect();
    let mut file = ModelFile {
        name: Some(model.name().to_string()),
        n: model.n(),
        backend: BackendKind::Chart,
        frame: None,
        generators: None,
        brackets: None,
        probe_points: None,
        parameters,
        tags: model.tags().to_vec(),
    };
    match model.backend() {
        Backend::Chart(ch) => {
            file.frame = Some(ch.fields.iter().map(|f| f.iter().map(poly_to_json).collect()).collect());
        }
        Backend::Lie(lie) => {
            let m = model.horizontal_dim();
            let t = &lie.table;
            file.backend = BackendKind::Lie;
            file.generators = Some(lie.generators.iter().map(|g| g.transpose().iter().copied().collect()).collect());
            file.brackets = Some(BracketsJson {
                w: (0..m).map(|i| (0..m).map(|j| (0..m).map(|k| t.w[(i, j, k)]).collect()).collect()).collect(),
                gamma: (0..m).map(|i| (0..m).map(|j| t.gamma[(i, j)]).collect()).collect(),
                delta: (0..m).map(|i| (0..m).map(|j| t.delta[(i, j)]).collect()).collect(),
            });
        }
    }
    file
}

fn square(rows: &[Vec<f64>], m: usize, what: &str) -> Result<DMatrix<f64>, LoadError> {
    if rows.len() != m || rows.iter().any(|r| r.len() != m) {
        return Err(LoadError::Schema(format!("`{what}` must be {m}x{m}")));
    }
    Ok(DMatrix::from_fn(m, m, |i, j| rows[i][j]))
}

/// Rejects a table that is not adapted, with the same wording as the frame checks.
fn check_table(n: usize, table: &StructureTable) -> Result<(), LoadError> {
    Ok(validate_structure(&StructureData::from_table(n, table), LOAD_TOL)?)
}

pub fn from_file(file: &ModelFile) -> Result<ContactModel, LoadError> {
    let n = file.n;
    if n == 0 {
        return Err(LoadError::Schema("`n` must be at least 1".into()));
    }
    let m = 2 * n;
    let name = file.name.clone().unwrap_or_else(|| "file".to_string());
    let parameters: Vec<(String, f64)> = file.parameters.iter().map(|(k, v)| (k.clone(), *v)).collect();
    let mut model = match file.backend {
        BackendKind::Chart => {
            if file.generators.is_some() || file.brackets.is_some() {
                return Err(LoadError::Schema("chart models take `frame`, not `generators`/`brackets`".into()));
            }
            let frame = file.frame.as_ref().ok_or_else(|| LoadError::Schema("missing `frame`".into()))?;
            let d = m + 1;
            if frame.len() != d {
                return Err(LoadError::Schema(format!("`frame` needs {d} fields, found {}", frame.len())));
            }
            let mut fields = Vec::with_capacity(d);
            for (i, f) in frame.iter().enumerate() {
                if f.len() != d {
                    return Err(LoadError::Schema(format!("field {i} needs {d} coefficients, found {}", f.len())));
                }
                fields.push(f.iter().map(|p| poly_from_json(d, p)).collect::<Result<Vec<_>, _>>()?);
            }
            let model = ContactModel::chart(name, n, ChartModel { fields }, parameters)?;
            let mut probes = vec![model.base_point()];
            for p in file.probe_points.iter().flatten() {
                if p.len() != d {
                    return Err(LoadError::Schema(format!("probe point needs {d} coordinates")));
                }
                probes.push(Point(p.clone()));
            }
            for x in &probes {
                model.validate_at(x, LOAD_TOL)?;
            }
            model
        }
        BackendKind::Lie => {
            if file.frame.is_some() {
                return Err(LoadError::Schema("group models take `generators` and `brackets`, not `frame`".into()));
            }
            let gens = file.generators.as_ref().ok_or_else(|| LoadError::Schema("missing `generators`".into()))?;
            let br = file.brackets.as_ref().ok_or_else(|| LoadError::Schema("missing `brackets`".into()))?;
            if gens.len() != m + 1 {
                return Err(LoadError::Schema(format!("`generators` needs {} matrices, found {}", m + 1, gens.len())));
            }
            let len = gens[0].len();
            let size = (len as f64).sqrt().round() as usize;
            if size == 0 || size * size != len || gens.iter().any(|g| g.len() != len) {
                return Err(LoadError::Schema("generators must be square matrices of equal size".into()));
            }
            let generators: Vec<DMatrix<f64>> = gens.iter().map(|g| DMatrix::from_row_slice(size, size, g)).collect();
            if br.w.len() != m || br.w.iter().any(|a| a.len() != m || a.iter().any(|b| b.len() != m)) {
                return Err(LoadError::Schema(format!("`w` must be {m}x{m}x{m}")));
            }
            let mut w = Tensor3::zeros(m);
            for i in 0..m {
                for j in 0..m {
                    for k in 0..m {
                        w[(i, j, k)] = br.w[i][j][k];
                    }
                }
            }
            let table = StructureTable { w, gamma: square(&br.gamma, m, "gamma")?, delta: square(&br.delta, m, "delta")? };
            check_table(n, &table)?;
            let lie = LieGroupModel { generators, table };
            let jacobi = models::jacobi_residual(&lie);
            if jacobi > LOAD_TOL {
                return Err(LoadError::Invalid(format!("generators violate the Jacobi identity by {jacobi:e}")));
            }
            ContactModel::lie(name, n, lie, parameters)?
        }
    };
    for t in &file.tags {
        model = model.with_tag(t.clone());
    }
    Ok(model)
}

pub fn parse_model(text: &str) -> Result<ContactModel, LoadError> {
    let file: ModelFile = serde_json::from_str(text).map_err(|e| LoadError::Schema(e.to_string()))?;
    from_file(&file)
}

pub fn load_model(path: &Path) -> Result<ContactModel, LoadError> {
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io { path: path.display().to_string(), source })?;
    parse_model(&text)
}

pub fn to_json(model: &ContactModel) -> String {
    serde_json::to_string_pretty(&to_file(model)).expect("model files always serialize")
}

pub fn save_model(model: &ContactModel, path: &Path) -> std::io::Result<()> {
    std::fs::write(path, to_json(model) + "\n")
}

/// SHA-256 of the compact serialized model, hex encoded.
pub fn model_hash(model: &ContactModel) -> String {
    let bytes = serde_json::to_vec(&to_file(model)).expect("model files always serialize");
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// A built-in name with optional parameters, or a path to a model file.
pub fn resolve(spec: &str, params: &[(&str, f64)]) -> Result<ContactModel, LoadError> {
    let path = Path::new(spec);
    if spec.ends_with(".json") || path.is_file() {
        if !params.is_empty() {
            return Err(LoadError::Schema("parameters apply only to built-in models".into()));
        }
        return load_model(path);
    }
    Ok(models::builtin(spec, params)?)
}
