//! Truncated stick-breaking variational Bayes EM.
//!
//! A [`Problem`] binds a dataset to a [`TruncationConfig`] and exposes every
//! coordinate-ascent step separately so each one can be checked against the
//! evidence lower bound. [`Problem::fit_single`] runs one restart to
//! convergence and [`fit`] runs seeded restarts in parallel, keeping the run
//! with the largest bound.
//!
//! The responsibility updates never call the per-cell expected
//! log-likelihoods. Because each of them is linear in the cell's φ channels
//! (see [`crate::observation`]), the sums over objects and features collapse
//! into matrix products of the responsibilities with the masked channel
//! matrices. Masked cells are zero in every channel and so drop out of all
//! sums.

mod design;
mod elbo;
mod fit;
mod reorder;
mod state;
mod updates;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{Dataset, TruncationConfig};

pub use elbo::ElboTerms;
pub use fit::{fit, map_assignments, ClusteringResult};
pub use state::VariationalState;

use design::Design;

/// How each restart draws its starting responsibilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Initialization {
    /// Every τ row picks one (view, feature cluster) pair and every η row one
    /// object cluster, uniformly at random.
    #[default]
    HardUniform,
    /// Every row is a draw from a symmetric Dirichlet.
    Dirichlet { concentration: f64 },
}

impl Initialization {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Initialization::Dirichlet { concentration } if !(concentration > 0.0 && concentration.is_finite()) => {
                Err(crate::error::Error::InvalidConfig(format!(
                    "Dirichlet initialization needs a positive concentration, got {concentration}"
                )))
            }
            _ => Ok(()),
        }
    }
}

/// Stopping rule and restart settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitOptions {
    /// Relative ELBO change below which a restart is considered converged.
    pub tol: f64,
    pub max_iters: usize,
    pub restarts: usize,
    pub base_seed: u64,
    /// Worker threads for restarts; does not affect the selected result.
    pub threads: usize,
    pub init: Initialization,
    /// After each iteration, try relabelling views and clusters by decreasing
    /// size and keep the relabelled state when it raises the bound. Off by
    /// default; plain coordinate ascent never reorders stick components.
    pub reorder: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            tol: 1e-6,
            max_iters: 500,
            restarts: 100,
            base_seed: 0,
            threads: 1,
            init: Initialization::default(),
            reorder: false,
        }
    }
}

/// Which classical model the truncation settings reduce to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitMode {
    Full,
    /// A single view: plain co-clustering.
    Coclustering,
    /// One feature cluster per view: restricted multiple clustering.
    Restricted,
}

impl std::fmt::Display for FitMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FitMode::Full => "full",
            FitMode::Coclustering => "coclustering",
            FitMode::Restricted => "restricted",
        })
    }
}

pub fn mode(config: &TruncationConfig) -> FitMode {
    if config.views == 1 {
        FitMode::Coclustering
    } else if config.feature_clusters == 1 {
        FitMode::Restricted
    } else {
        FitMode::Full
    }
}

/// A dataset paired with truncation settings, with the per-family channel
/// matrices precomputed.
pub struct Problem<'a> {
    dataset: &'a Dataset,
    config: TruncationConfig,
    designs: Vec<Design>,
}

impl<'a> Problem<'a> {
    /// Does not validate the dataset; callers that accept external data
    /// should run [`Dataset::validate`] first.
    pub fn new(dataset: &'a Dataset, config: &TruncationConfig) -> Result<Self> {
        config.validate()?;
        let designs = dataset.families.iter().map(Design::new).collect();
        Ok(Problem {
            dataset,
            config: config.clone(),
            designs,
        })
    }

    pub fn dataset(&self) -> &Dataset {
        self.dataset
    }

    pub fn config(&self) -> &TruncationConfig {
        &self.config
    }

    fn n_objects(&self) -> usize {
        self.dataset.n_objects()
    }
}

/// E[ln π_t] for a truncated stick sequence with Beta(a_t, b_t) sticks:
/// ψ(a_t) − ψ(a_t + b_t) + Σ_{s<t} [ψ(b_s) − ψ(a_s + b_s)].
pub(crate) fn expected_log_weights(sticks: ndarray::ArrayView2<'_, f64>) -> Vec<f64> {
    use crate::special::digamma;
    let mut out = Vec::with_capacity(sticks.nrows());
    let mut tail = 0.0;
    for row in sticks.rows() {
        let (a, b) = (row[0], row[1]);
        let psi_ab = digamma(a + b);
        out.push(digamma(a) - psi_ab + tail);
        tail += digamma(b) - psi_ab;
    }
    out
}

/// Beta parameters from per-component masses: (1 + N_t, c + Σ_{s>t} N_s).
pub(crate) fn stick_parameters(masses: &[f64], concentration: f64) -> Array2<f64> {
    let mut out = Array2::zeros((masses.len(), 2));
    let mut tail = 0.0;
    for t in (0..masses.len()).rev() {
        out[[t, 0]] = 1.0 + masses[t];
        out[[t, 1]] = concentration + tail;
        tail += masses[t];
    }
    out
}
