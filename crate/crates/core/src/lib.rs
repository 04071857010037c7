//! Nonparametric Bayesian multiple co-clustering.
//!
//! Features of a data matrix are split into views; within each view the
//! features are grouped into feature clusters and the objects into object
//! clusters, so every view is a co-clustering of its own. The number of
//! views and clusters is inferred through truncated stick-breaking priors
//! and a mean-field variational Bayes EM. Each feature belongs to one of
//! four families (Gaussian, Poisson, categorical, multinomial) and cells
//! may be missing.
//!
//! ```
//! use multico::inference::{fit, FitOptions};
//! use multico::model::TruncationConfig;
//! use multico::synthgen::{generate, benchmark_scenario};
//!
//! let (data, _truth) = generate(&benchmark_scenario(30, 2, 0.0, 1)).unwrap();
//! let config = TruncationConfig::with_truncation(4, 3, 5);
//! let opts = FitOptions { restarts: 2, ..FitOptions::default() };
//! let result = fit(&data, &config, &opts).unwrap();
//! assert_eq!(result.assignments.objects.len(), 4);
//! assert!(result.elbo.is_finite());
//! ```

pub mod cli;
pub mod error;
pub mod evaluation;
pub mod inference;
pub mod model;
pub mod observation;
pub mod special;
pub mod synthgen;

pub use error::{Error, Result};
pub use evaluation::{adjusted_rand_index, match_views, Partition};
pub use inference::{fit, ClusteringResult, FitOptions, Problem};
pub use model::{Assignments, Dataset, FamilyMatrix, FeatureFamily, TruncationConfig};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
    #[doc = include_str!("../../../book/src/inference.md")]
    mod inference {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
