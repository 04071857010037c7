//! File formats: typed CSV with a TOML schema sidecar, assignment tables,
//! run summaries, ELBO traces and metrics.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::ClusteringResult;
use crate::model::{Assignments, CellValues, Dataset, FamilyMatrix, FeatureAssignment, FeatureFamily};

/// Header name of the optional object-identifier column.
pub const ID_COLUMN: &str = "id";

fn display(path: &Path) -> String {
    path.display().to_string()
}

fn is_missing(field: &str) -> bool {
    let f = field.trim();
    f.is_empty() || f == "NA"
}

/// Reads a `column = "family"` TOML table.
pub fn read_schema(path: &Path) -> Result<BTreeMap<String, FeatureFamily>> {
    let text = fs::read_to_string(path)?;
    let table: BTreeMap<String, String> =
        toml::from_str(&text).map_err(|e| Error::parse(display(path), e.to_string()))?;
    table
        .into_iter()
        .map(|(col, spec)| {
            let family = spec
                .parse::<FeatureFamily>()
                .map_err(|e| Error::parse(display(path), format!("column `{col}`: {e}")))?;
            Ok((col, family))
        })
        .collect()
}

pub fn write_schema(path: &Path, dataset: &Dataset) -> Result<()> {
    let mut out = String::new();
    for fam in &dataset.families {
        for name in &fam.feature_names {
            out.push_str(&format!("{} = \"{}\"\n", toml_key(name), fam.family));
        }
    }
    fs::write(path, out)?;
    Ok(())
}

fn toml_key(name: &str) -> String {
    if !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
        name.to_string()
    } else {
        toml::Value::String(name.to_string()).to_string()
    }
}

enum Column {
    Real(Vec<f64>),
    Integer(Vec<i64>),
    Counts(Vec<Vec<i64>>),
}

/// Reads a CSV with a header row into a [`Dataset`], typed by `schema`.
///
/// Columns are grouped into one [`FamilyMatrix`] per distinct family, in
/// family order (Gaussian, Poisson, categorical, multinomial, category
/// counts ascending), keeping file order within a family. An `id` column
/// not named in the schema supplies object identifiers; otherwise rows are
/// numbered from 0. Empty fields and `NA` are missing.
pub fn read_dataset(data: &Path, schema: &BTreeMap<String, FeatureFamily>) -> Result<Dataset> {
    let src = display(data);
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(data)?;
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();

    let mut id_col = None;
    let mut feature_cols = Vec::new();
    let mut seen = HashMap::new();
    for (c, h) in headers.iter().enumerate() {
        if seen.insert(h.clone(), c).is_some() {
            return Err(Error::parse(&src, format!("duplicate column `{h}`")));
        }
        match schema.get(h) {
            Some(&family) => feature_cols.push((c, family)),
            None if h == ID_COLUMN => id_col = Some(c),
            None => return Err(Error::parse(&src, format!("column `{h}` is not declared in the schema"))),
        }
    }
    for name in schema.keys() {
        if !seen.contains_key(name) {
            return Err(Error::parse(&src, format!("schema column `{name}` is absent from the data")));
        }
    }

    let mut ids = Vec::new();
    let mut columns: Vec<Column> = feature_cols
        .iter()
        .map(|(_, f)| match f {
            FeatureFamily::Gaussian => Column::Real(Vec::new()),
            FeatureFamily::Poisson | FeatureFamily::Categorical { .. } => Column::Integer(Vec::new()),
            FeatureFamily::Multinomial { .. } => Column::Counts(Vec::new()),
        })
        .collect();
    let mut observed: Vec<Vec<bool>> = vec![Vec::new(); feature_cols.len()];

    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let line = row + 2;
        ids.push(match id_col {
            Some(c) => record.get(c).unwrap_or("").trim().to_string(),
            None => row.to_string(),
        });
        for (slot, &(c, family)) in feature_cols.iter().enumerate() {
            let field = record.get(c).unwrap_or("").trim();
            let missing = is_missing(field);
            observed[slot].push(!missing);
            let bad = |what: &str| {
                Error::parse(&src, format!("line {line}, column `{}`: {what} `{field}`", headers[c]))
            };
            match &mut columns[slot] {
                Column::Real(v) => v.push(if missing {
                    0.0
                } else {
                    field.parse::<f64>().map_err(|_| bad("not a number"))?
                }),
                Column::Integer(v) => v.push(if missing {
                    0
                } else {
                    field.parse::<i64>().map_err(|_| bad("not an integer"))?
                }),
                Column::Counts(v) => {
                    let h = family.categories().expect("multinomial has categories");
                    if missing {
                        v.push(vec![0; h]);
                    } else {
                        let counts = field
                            .split(';')
                            .map(|p| p.trim().parse::<i64>())
                            .collect::<std::result::Result<Vec<_>, _>>()
                            .map_err(|_| bad("not a `;`-separated count vector"))?;
                        if counts.len() != h {
                            return Err(bad(&format!("expected {h} counts, got")));
                        }
                        v.push(counts);
                    }
                }
            }
        }
    }

    let n = ids.len();
    let mut groups: BTreeMap<FeatureFamily, Vec<usize>> = BTreeMap::new();
    for (slot, &(_, family)) in feature_cols.iter().enumerate() {
        groups.entry(family).or_default().push(slot);
    }
    let mut families = Vec::with_capacity(groups.len());
    for (family, slots) in groups {
        let d = slots.len();
        let names = slots.iter().map(|&s| headers[feature_cols[s].0].clone()).collect();
        let mask = Array2::from_shape_fn((n, d), |(i, j)| observed[slots[j]][i]);
        let values = match family {
            FeatureFamily::Gaussian => CellValues::Real(Array2::from_shape_fn((n, d), |(i, j)| {
                match &columns[slots[j]] {
                    Column::Real(v) => v[i],
                    _ => unreachable!(),
                }
            })),
            FeatureFamily::Poisson | FeatureFamily::Categorical { .. } => {
                CellValues::Integer(Array2::from_shape_fn((n, d), |(i, j)| match &columns[slots[j]] {
                    Column::Integer(v) => v[i],
                    _ => unreachable!(),
                }))
            }
            FeatureFamily::Multinomial { categories } => {
                CellValues::Counts(Array3::from_shape_fn((n, d, categories), |(i, j, h)| {
                    match &columns[slots[j]] {
                        Column::Counts(v) => v[i][h],
                        _ => unreachable!(),
                    }
                }))
            }
        };
        families.push(FamilyMatrix {
            family,
            values,
            observed: mask,
            feature_names: names,
        });
    }
    Ok(Dataset::new(ids, families))
}

/// Writes the dataset with an `id` column first and missing cells empty.
/// Reals use the shortest representation that parses back to the same bits.
pub fn write_dataset(path: &Path, dataset: &Dataset) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    let mut header = vec![ID_COLUMN.to_string()];
    for fam in &dataset.families {
        header.extend(fam.feature_names.iter().cloned());
    }
    writer.write_record(&header)?;
    for (i, id) in dataset.object_ids.iter().enumerate() {
        let mut row = vec![id.clone()];
        for fam in &dataset.families {
            for j in 0..fam.n_features() {
                if !fam.observed[[i, j]] {
                    row.push(String::new());
                    continue;
                }
                row.push(match &fam.values {
                    CellValues::Real(x) => format!("{:?}", x[[i, j]]),
                    CellValues::Integer(x) => x[[i, j]].to_string(),
                    CellValues::Counts(x) => x
                        .slice(ndarray::s![i, j, ..])
                        .iter()
                        .map(|c| c.to_string())
                        .collect::<Vec<_>>()
                        .join(";"),
                });
            }
        }
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct AssignmentRow {
    kind: String,
    family: String,
    name: String,
    view: usize,
    cluster: usize,
}

/// Hard assignments keyed by names rather than positions, as stored on
/// disk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NamedAssignments {
    /// `(family, feature name, view, feature cluster)` in file order.
    pub features: Vec<(String, String, usize, usize)>,
    /// `objects[v]` holds `(object id, object cluster)` in file order.
    pub objects: Vec<Vec<(String, usize)>>,
}

impl NamedAssignments {
    pub fn from_assignments(dataset: &Dataset, a: &Assignments) -> Self {
        let features = dataset
            .families
            .iter()
            .zip(&a.features)
            .flat_map(|(fam, fa)| {
                fam.feature_names
                    .iter()
                    .zip(fa)
                    .map(|(name, x)| (fam.family.to_string(), name.clone(), x.view, x.feature_cluster))
            })
            .collect();
        let objects = a
            .objects
            .iter()
            .map(|labels| dataset.object_ids.iter().cloned().zip(labels.iter().copied()).collect())
            .collect();
        NamedAssignments { features, objects }
    }

    /// Views holding at least one feature.
    pub fn active_views(&self) -> Vec<usize> {
        let mut views: Vec<usize> = self.features.iter().map(|f| f.2).collect();
        views.sort_unstable();
        views.dedup();
        views
    }

    /// Positional [`Assignments`] using `reference` for feature and object
    /// order. Fails unless both cover exactly the same features and objects.
    pub fn aligned_to(&self, reference: &NamedAssignments) -> Result<Assignments> {
        let mismatch = |msg: String| Error::UniverseMismatch(msg);
        let lookup: HashMap<(&str, &str), (usize, usize)> = self
            .features
            .iter()
            .map(|(f, n, v, g)| ((f.as_str(), n.as_str()), (*v, *g)))
            .collect();
        if lookup.len() != self.features.len() {
            return Err(mismatch("duplicate feature rows".into()));
        }
        if self.features.len() != reference.features.len() {
            return Err(mismatch(format!(
                "{} features vs {}",
                self.features.len(),
                reference.features.len()
            )));
        }
        let mut features: Vec<Vec<FeatureAssignment>> = Vec::new();
        let mut last_family: Option<&str> = None;
        for (f, n, _, _) in &reference.features {
            let &(view, feature_cluster) = lookup
                .get(&(f.as_str(), n.as_str()))
                .ok_or_else(|| mismatch(format!("feature `{n}` ({f}) missing")))?;
            if last_family != Some(f.as_str()) {
                features.push(Vec::new());
                last_family = Some(f.as_str());
            }
            features.last_mut().expect("pushed").push(FeatureAssignment {
                view,
                feature_cluster,
            });
        }

        let ref_ids: Vec<&str> = reference
            .objects
            .first()
            .map(|v| v.iter().map(|(id, _)| id.as_str()).collect())
            .unwrap_or_default();
        let mut objects = Vec::with_capacity(self.objects.len());
        for (v, rows) in self.objects.iter().enumerate() {
            let map: HashMap<&str, usize> = rows.iter().map(|(id, k)| (id.as_str(), *k)).collect();
            if map.len() != ref_ids.len() || rows.len() != ref_ids.len() {
                return Err(mismatch(format!(
                    "view {v} has {} objects, expected {}",
                    rows.len(),
                    ref_ids.len()
                )));
            }
            let labels = ref_ids
                .iter()
                .map(|id| map.get(id).copied().ok_or_else(|| mismatch(format!("object `{id}` missing"))))
                .collect::<Result<Vec<_>>>()?;
            objects.push(labels);
        }
        Ok(Assignments { features, objects })
    }
}

pub fn write_assignments(path: &Path, named: &NamedAssignments) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    for (family, name, view, cluster) in &named.features {
        writer.serialize(AssignmentRow {
            kind: "feature".into(),
            family: family.clone(),
            name: name.clone(),
            view: *view,
            cluster: *cluster,
        })?;
    }
    for (view, rows) in named.objects.iter().enumerate() {
        for (id, cluster) in rows {
            writer.serialize(AssignmentRow {
                kind: "object".into(),
                family: String::new(),
                name: id.clone(),
                view,
                cluster: *cluster,
            })?;
        }
    }
    writer.flush()?;
    Ok(())
}

pub fn read_assignments(path: &Path) -> Result<NamedAssignments> {
    let src = display(path);
    let mut reader = csv::Reader::from_path(path)?;
    let mut features = Vec::new();
    let mut objects: Vec<Vec<(String, usize)>> = Vec::new();
    for (row, rec) in reader.deserialize::<AssignmentRow>().enumerate() {
        let rec = rec.map_err(|e| Error::parse(&src, format!("row {}: {e}", row + 2)))?;
        match rec.kind.as_str() {
            "feature" => features.push((rec.family, rec.name, rec.view, rec.cluster)),
            "object" => {
                if objects.len() <= rec.view {
                    objects.resize_with(rec.view + 1, Vec::new);
                }
                objects[rec.view].push((rec.name, rec.cluster));
            }
            other => return Err(Error::parse(&src, format!("row {}: unknown kind `{other}`", row + 2))),
        }
    }
    if features.is_empty() || objects.is_empty() {
        return Err(Error::parse(&src, "needs feature and object rows"));
    }
    Ok(NamedAssignments { features, objects })
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ViewSummary {
    pub view: usize,
    pub features: usize,
    pub object_clusters: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Summary {
    pub mode: String,
    pub elbo: f64,
    pub seed: u64,
    pub iterations: usize,
    pub converged: bool,
    pub active_views: usize,
    /// One entry per view holding features.
    pub view: Vec<ViewSummary>,
}

impl Summary {
    pub fn from_result(result: &ClusteringResult) -> Self {
        let sizes = result.assignments.view_sizes();
        let view = result
            .assignments
            .active_views()
            .into_iter()
            .map(|v| ViewSummary {
                view: v,
                features: sizes[v],
                object_clusters: result.active_object_clusters[v],
            })
            .collect();
        Summary {
            mode: result.mode.to_string(),
            elbo: result.elbo,
            seed: result.seed,
            iterations: result.iterations,
            converged: result.converged,
            active_views: result.active_views,
            view,
        }
    }
}

pub fn write_toml<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = toml::to_string(value).map_err(|e| Error::parse(display(path), e.to_string()))?;
    fs::write(path, text)?;
    Ok(())
}

pub fn read_toml<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| Error::parse(display(path), e.to_string()))
}

pub fn write_trace(path: &Path, trace: &[f64]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["iteration", "elbo"])?;
    for (it, elbo) in trace.iter().enumerate() {
        writer.write_record([it.to_string(), format!("{elbo:?}")])?;
    }
    writer.flush()?;
    Ok(())
}

/// Scores written by `evaluate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Best-match object ARI for each true view holding features.
    pub object_ari: Vec<f64>,
    pub object_ari_mean: f64,
    pub view_ari: f64,
}
