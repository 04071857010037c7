use ndarray::{Array2, Array3};

use crate::observation::BlockPosterior;

/// All variational parameters of one restart.
///
/// Layouts (outer to inner):
/// - `tau[m]`: `[V, d_m, G]`, normalized over `(v, g)` for each feature
/// - `eta`: `[V, n, K]`, normalized over `k` for each `(v, i)`
/// - `view_sticks`: `[V, 2]` Beta parameters of q(w_v)
/// - `feature_sticks[m]`: `[V, G, 2]` Beta parameters of q(w'_{g,v})
/// - `object_sticks`: `[V, K, 2]` Beta parameters of q(u_{k,v})
/// - `block_posteriors[m]`: `[V, G, K]`
#[derive(Debug, Clone, PartialEq)]
pub struct VariationalState {
    pub tau: Vec<Array3<f64>>,
    pub eta: Array3<f64>,
    pub view_sticks: Array2<f64>,
    pub feature_sticks: Vec<Array3<f64>>,
    pub object_sticks: Array3<f64>,
    pub block_posteriors: Vec<Array3<BlockPosterior>>,
}

impl VariationalState {
    pub fn n_views(&self) -> usize {
        self.eta.dim().0
    }

    pub fn n_object_clusters(&self) -> usize {
        self.eta.dim().2
    }

    pub fn n_feature_clusters(&self) -> usize {
        self.feature_sticks.first().map_or(0, |f| f.dim().1)
    }

    /// τ for feature `j` of family `m` at `(v, g)`.
    pub fn tau_at(&self, m: usize, j: usize, v: usize, g: usize) -> f64 {
        self.tau[m][[v, j, g]]
    }

    /// Largest deviation of any responsibility row sum from one.
    pub fn normalization_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for t in &self.tau {
            let (nv, d, ng) = t.dim();
            for j in 0..d {
                let mut sum = 0.0;
                for v in 0..nv {
                    for g in 0..ng {
                        sum += t[[v, j, g]];
                    }
                }
                worst = worst.max((sum - 1.0).abs());
            }
        }
        for row in self.eta.rows() {
            worst = worst.max((row.sum() - 1.0).abs());
        }
        worst
    }

    pub fn responsibilities_finite(&self) -> bool {
        self.tau.iter().all(|t| t.iter().all(|x| x.is_finite())) && self.eta.iter().all(|x| x.is_finite())
    }
}
