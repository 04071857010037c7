//! Data containers shared by every other module: typed feature families,
//! the dataset with its observation masks, truncation settings and hard
//! assignments.
//!
//! A [`Dataset`] is a list of [`FamilyMatrix`] blocks that all share the
//! same `n` objects. Each block holds one distribution family and an
//! `n x d` matrix of cells plus a boolean mask; masked cells keep whatever
//! value they carry but are never read by inference.

use std::fmt;

use ndarray::{Array2, Array3, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observation::{GaussianPrior, PoissonPrior};

/// Distribution family of a group of features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeatureFamily {
    Gaussian,
    Poisson,
    Categorical { categories: usize },
    Multinomial { categories: usize },
}

impl FeatureFamily {
    pub fn categories(&self) -> Option<usize> {
        match *self {
            FeatureFamily::Categorical { categories } | FeatureFamily::Multinomial { categories } => {
                Some(categories)
            }
            _ => None,
        }
    }
}

impl fmt::Display for FeatureFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureFamily::Gaussian => f.write_str("gaussian"),
            FeatureFamily::Poisson => f.write_str("poisson"),
            FeatureFamily::Categorical { categories } => write!(f, "categorical:{categories}"),
            FeatureFamily::Multinomial { categories } => write!(f, "multinomial:{categories}"),
        }
    }
}

impl std::str::FromStr for FeatureFamily {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k.trim(), Some(a.trim())),
            None => (s, None),
        };
        let categories = || -> std::result::Result<usize, String> {
            let a = arg.ok_or_else(|| format!("`{kind}` needs a category count, e.g. `{kind}:3`"))?;
            a.parse::<usize>()
                .map_err(|_| format!("bad category count `{a}`"))
        };
        match kind.to_ascii_lowercase().as_str() {
            "gaussian" if arg.is_none() => Ok(FeatureFamily::Gaussian),
            "poisson" if arg.is_none() => Ok(FeatureFamily::Poisson),
            "categorical" => Ok(FeatureFamily::Categorical {
                categories: categories()?,
            }),
            "multinomial" => Ok(FeatureFamily::Multinomial {
                categories: categories()?,
            }),
            _ => Err(format!("unknown feature family `{s}`")),
        }
    }
}

/// Raw cell storage. Gaussian cells are reals, Poisson and categorical cells
/// are integers, multinomial cells are count vectors (`n x d x H`).
#[derive(Debug, Clone, PartialEq)]
pub enum CellValues {
    Real(Array2<f64>),
    Integer(Array2<i64>),
    Counts(Array3<i64>),
}

impl CellValues {
    pub fn shape(&self) -> (usize, usize) {
        match self {
            CellValues::Real(a) => a.dim(),
            CellValues::Integer(a) => a.dim(),
            CellValues::Counts(a) => {
                let (n, d, _) = a.dim();
                (n, d)
            }
        }
    }
}

/// All features of one distribution family.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyMatrix {
    pub family: FeatureFamily,
    pub values: CellValues,
    pub observed: Array2<bool>,
    pub feature_names: Vec<String>,
}

impl FamilyMatrix {
    pub fn gaussian(values: Array2<f64>, observed: Array2<bool>, names: Vec<String>) -> Self {
        FamilyMatrix {
            family: FeatureFamily::Gaussian,
            values: CellValues::Real(values),
            observed,
            feature_names: names,
        }
    }

    pub fn poisson(values: Array2<i64>, observed: Array2<bool>, names: Vec<String>) -> Self {
        FamilyMatrix {
            family: FeatureFamily::Poisson,
            values: CellValues::Integer(values),
            observed,
            feature_names: names,
        }
    }

    pub fn categorical(
        categories: usize,
        values: Array2<i64>,
        observed: Array2<bool>,
        names: Vec<String>,
    ) -> Self {
        FamilyMatrix {
            family: FeatureFamily::Categorical { categories },
            values: CellValues::Integer(values),
            observed,
            feature_names: names,
        }
    }

    pub fn multinomial(
        categories: usize,
        counts: Array3<i64>,
        observed: Array2<bool>,
        names: Vec<String>,
    ) -> Self {
        FamilyMatrix {
            family: FeatureFamily::Multinomial { categories },
            values: CellValues::Counts(counts),
            observed,
            feature_names: names,
        }
    }

    pub fn n_objects(&self) -> usize {
        self.values.shape().0
    }

    pub fn n_features(&self) -> usize {
        self.values.shape().1
    }

    pub fn n_observed(&self) -> usize {
        self.observed.iter().filter(|&&o| o).count()
    }
}

/// Per-family observation matrices with masks and names. Immutable once
/// built; inference only ever borrows it.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub families: Vec<FamilyMatrix>,
    pub object_ids: Vec<String>,
}

impl Dataset {
    pub fn new(object_ids: Vec<String>, families: Vec<FamilyMatrix>) -> Self {
        Dataset {
            families,
            object_ids,
        }
    }

    /// Builds the dataset and rejects it if [`Dataset::validate`] reports
    /// anything.
    pub fn validated(object_ids: Vec<String>, families: Vec<FamilyMatrix>) -> Result<Self> {
        let ds = Dataset::new(object_ids, families);
        let violations = ds.validate();
        if violations.is_empty() {
            Ok(ds)
        } else {
            Err(Error::InvalidDataset(violations))
        }
    }

    pub fn n_objects(&self) -> usize {
        self.object_ids.len()
    }

    pub fn n_features(&self) -> usize {
        self.families.iter().map(FamilyMatrix::n_features).sum()
    }

    /// Checks every structural and per-cell invariant. Returns one record per
    /// offending cell or feature; an empty list means the dataset is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let n = self.object_ids.len();
        for (m, fam) in self.families.iter().enumerate() {
            let push = |out: &mut Vec<Violation>, cell, feature, reason| {
                out.push(Violation {
                    family_index: m,
                    family: fam.family,
                    cell,
                    feature,
                    reason,
                })
            };
            if let Some(h) = fam.family.categories() {
                if h < 2 {
                    push(&mut out, None, None, ViolationReason::TooFewCategories(h));
                    continue;
                }
            }
            let (rows, cols) = fam.values.shape();
            let type_ok = matches!(
                (&fam.family, &fam.values),
                (FeatureFamily::Gaussian, CellValues::Real(_))
                    | (FeatureFamily::Poisson, CellValues::Integer(_))
                    | (FeatureFamily::Categorical { .. }, CellValues::Integer(_))
                    | (FeatureFamily::Multinomial { .. }, CellValues::Counts(_))
            );
            if !type_ok {
                push(&mut out, None, None, ViolationReason::CellTypeMismatch);
                continue;
            }
            if rows != n {
                push(
                    &mut out,
                    None,
                    None,
                    ViolationReason::RowCountMismatch {
                        expected: n,
                        found: rows,
                    },
                );
                continue;
            }
            if fam.observed.dim() != (rows, cols) {
                push(&mut out, None, None, ViolationReason::MaskShapeMismatch);
                continue;
            }
            if fam.feature_names.len() != cols {
                push(&mut out, None, None, ViolationReason::FeatureNameCount);
            }
            if let (FeatureFamily::Multinomial { categories }, CellValues::Counts(c)) =
                (&fam.family, &fam.values)
            {
                if c.len_of(Axis(2)) != *categories {
                    push(&mut out, None, None, ViolationReason::CountVectorLength);
                    continue;
                }
            }
            for j in 0..cols {
                let mut any = false;
                for i in 0..rows {
                    if !fam.observed[[i, j]] {
                        continue;
                    }
                    any = true;
                    let reason = match (&fam.family, &fam.values) {
                        (FeatureFamily::Gaussian, CellValues::Real(x)) => {
                            (!x[[i, j]].is_finite()).then_some(ViolationReason::NonFinite)
                        }
                        (FeatureFamily::Poisson, CellValues::Integer(x)) => {
                            (x[[i, j]] < 0).then_some(ViolationReason::NegativeCount(x[[i, j]]))
                        }
                        (FeatureFamily::Categorical { categories }, CellValues::Integer(x)) => {
                            let v = x[[i, j]];
                            (v < 0 || v >= *categories as i64).then_some(
                                ViolationReason::CategoryOutOfRange {
                                    value: v,
                                    categories: *categories,
                                },
                            )
                        }
                        (FeatureFamily::Multinomial { .. }, CellValues::Counts(x)) => x
                            .slice(ndarray::s![i, j, ..])
                            .iter()
                            .find(|&&c| c < 0)
                            .map(|&c| ViolationReason::NegativeCount(c)),
                        _ => None,
                    };
                    if let Some(r) = reason {
                        push(&mut out, Some((i, j)), Some(j), r);
                    }
                }
                if !any {
                    push(&mut out, None, Some(j), ViolationReason::FeatureUnobserved);
                }
            }
        }
        out
    }

    /// Rescales every Gaussian feature to mean 0 and standard deviation 1
    /// over its observed cells. The population convention (divide by the
    /// number of observed cells) is used; constant columns map to zeros.
    /// Masks and non-Gaussian families are left alone.
    pub fn standardize_gaussian(&self) -> Dataset {
        let mut out = self.clone();
        for fam in out.families.iter_mut() {
            let CellValues::Real(values) = &mut fam.values else {
                continue;
            };
            for j in 0..values.ncols() {
                let obs: Vec<f64> = (0..values.nrows())
                    .filter(|&i| fam.observed[[i, j]])
                    .map(|i| values[[i, j]])
                    .collect();
                if obs.is_empty() {
                    continue;
                }
                let count = obs.len() as f64;
                let mean = obs.iter().sum::<f64>() / count;
                let var = obs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / count;
                let sd = var.sqrt();
                let constant = !(sd > 1e-300) || obs.iter().all(|&x| x == obs[0]);
                for i in 0..values.nrows() {
                    let x = &mut values[[i, j]];
                    if constant {
                        if x.is_finite() {
                            *x = 0.0;
                        }
                    } else {
                        *x = (*x - mean) / sd;
                    }
                }
            }
        }
        out
    }
}

/// One failed invariant, with coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub family_index: usize,
    pub family: FeatureFamily,
    /// `(object, feature)` within the family matrix, for per-cell problems.
    pub cell: Option<(usize, usize)>,
    pub feature: Option<usize>,
    pub reason: ViolationReason,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ViolationReason {
    NegativeCount(i64),
    CategoryOutOfRange { value: i64, categories: usize },
    NonFinite,
    FeatureUnobserved,
    TooFewCategories(usize),
    CellTypeMismatch,
    RowCountMismatch { expected: usize, found: usize },
    MaskShapeMismatch,
    FeatureNameCount,
    CountVectorLength,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "family {} ({})", self.family_index, self.family)?;
        if let Some((i, j)) = self.cell {
            write!(f, " cell (object {i}, feature {j})")?;
        } else if let Some(j) = self.feature {
            write!(f, " feature {j}")?;
        }
        f.write_str(": ")?;
        match &self.reason {
            ViolationReason::NegativeCount(v) => write!(f, "negative count {v}"),
            ViolationReason::CategoryOutOfRange { value, categories } => {
                write!(f, "category {value} outside 0..{categories}")
            }
            ViolationReason::NonFinite => f.write_str("non-finite value"),
            ViolationReason::FeatureUnobserved => f.write_str("feature fully unobserved"),
            ViolationReason::TooFewCategories(h) => write!(f, "{h} categories, need at least 2"),
            ViolationReason::CellTypeMismatch => f.write_str("cell storage does not match family"),
            ViolationReason::RowCountMismatch { expected, found } => {
                write!(f, "{found} rows, expected {expected}")
            }
            ViolationReason::MaskShapeMismatch => f.write_str("mask shape differs from values"),
            ViolationReason::FeatureNameCount => f.write_str("feature name count differs from columns"),
            ViolationReason::CountVectorLength => {
                f.write_str("count vectors do not match the category count")
            }
        }
    }
}

/// Truncation levels, stick concentrations and observation priors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TruncationConfig {
    pub views: usize,
    pub feature_clusters: usize,
    pub object_clusters: usize,
    pub alpha1: f64,
    pub alpha2: f64,
    pub beta: f64,
    pub gaussian_prior: GaussianPrior,
    pub poisson_prior: PoissonPrior,
    pub dirichlet_prior_mass: f64,
}

impl Default for TruncationConfig {
    fn default() -> Self {
        TruncationConfig {
            views: 10,
            feature_clusters: 10,
            object_clusters: 10,
            alpha1: 1.0,
            alpha2: 1.0,
            beta: 1.0,
            gaussian_prior: GaussianPrior::default(),
            poisson_prior: PoissonPrior::default(),
            dirichlet_prior_mass: 1.0,
        }
    }
}

impl TruncationConfig {
    pub fn with_truncation(views: usize, feature_clusters: usize, object_clusters: usize) -> Self {
        TruncationConfig {
            views,
            feature_clusters,
            object_clusters,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.views == 0 || self.feature_clusters == 0 || self.object_clusters == 0 {
            return bad("truncation levels must be at least 1".into());
        }
        let positive = [
            ("alpha1", self.alpha1),
            ("alpha2", self.alpha2),
            ("beta", self.beta),
            ("gaussian_prior.lambda0", self.gaussian_prior.lambda0),
            ("gaussian_prior.gamma0", self.gaussian_prior.gamma0),
            ("gaussian_prior.sigma0_sq", self.gaussian_prior.sigma0_sq),
            ("poisson_prior.alpha0", self.poisson_prior.alpha0),
            ("poisson_prior.beta0", self.poisson_prior.beta0),
            ("dirichlet_prior_mass", self.dirichlet_prior_mass),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if !self.gaussian_prior.mu0.is_finite() {
            return bad("gaussian_prior.mu0 must be finite".into());
        }
        Ok(())
    }
}

/// Hard view / feature-cluster pair for one feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FeatureAssignment {
    pub view: usize,
    pub feature_cluster: usize,
}

/// MAP memberships: every feature to one (view, feature cluster) pair and
/// every object to one object cluster in each view.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignments {
    /// `features[m][j]` for feature `j` of family `m`.
    pub features: Vec<Vec<FeatureAssignment>>,
    /// `objects[v][i]` is the object cluster of object `i` in view `v`.
    pub objects: Vec<Vec<usize>>,
}

impl Assignments {
    pub fn n_views(&self) -> usize {
        self.objects.len()
    }

    /// Feature-to-view labels flattened over families in family order.
    pub fn view_labels(&self) -> Vec<usize> {
        self.features.iter().flatten().map(|a| a.view).collect()
    }

    /// Number of features mapped to each view.
    pub fn view_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.objects.len()];
        for a in self.features.iter().flatten() {
            if a.view < sizes.len() {
                sizes[a.view] += 1;
            }
        }
        sizes
    }

    /// Views holding at least one feature, in index order.
    pub fn active_views(&self) -> Vec<usize> {
        self.view_sizes()
            .iter()
            .enumerate()
            .filter(|(_, &s)| s > 0)
            .map(|(v, _)| v)
            .collect()
    }
}
