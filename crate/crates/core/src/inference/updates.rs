use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array3, Array4, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use super::{expected_log_weights, stick_parameters, Initialization, Problem, VariationalState};
use crate::error::{Error, Result};
use crate::model::Assignments;
use crate::observation::{BlockPosterior, WeightedSuffStats};
use crate::special::softmax_in_place;

/// Per-family `[V, P, n, G]` products Φ_p τ_v.
pub(crate) type FeatureProjections = Vec<Array4<f64>>;
/// Per-family `[V, P, G, K]` channel sums Σ_{i,j} τ η φ_p.
pub(crate) type BlockStats = Vec<Array4<f64>>;

fn draw_row<R: Rng>(rng: &mut R, init: Initialization, out: &mut [f64]) {
    match init {
        Initialization::HardUniform => {
            out.fill(0.0);
            let pick = rng.random_range(0..out.len());
            out[pick] = 1.0;
        }
        Initialization::Dirichlet { concentration } => {
            let gamma = Gamma::new(concentration, 1.0).expect("validated concentration");
            let mut total = 0.0;
            for x in out.iter_mut() {
                *x = gamma.sample(rng);
                total += *x;
            }
            if total > 0.0 {
                out.iter_mut().for_each(|x| *x /= total);
            } else {
                out.fill(1.0 / out.len() as f64);
            }
        }
    }
}

impl Problem<'_> {
    /// [`Problem::init_state_with`] using the default [`Initialization`].
    pub fn init_state(&self, seed: u64) -> Result<VariationalState> {
        self.init_state_with(seed, Initialization::default())
    }

    /// Draws every τ row and η row with `init`, then sets block posteriors
    /// and sticks with one pass of their updates.
    pub fn init_state_with(&self, seed: u64, init: Initialization) -> Result<VariationalState> {
        init.validate()?;
        let cfg = &self.config;
        let (nv, ng, nk) = (cfg.views, cfg.feature_clusters, cfg.object_clusters);
        let n = self.n_objects();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);

        let mut tau = Vec::with_capacity(self.designs.len());
        let mut row = vec![0.0; nv * ng];
        for design in &self.designs {
            let d = design.n_features();
            let mut t = Array3::zeros((nv, d, ng));
            for j in 0..d {
                draw_row(&mut rng, init, &mut row);
                for v in 0..nv {
                    for g in 0..ng {
                        t[[v, j, g]] = row[v * ng + g];
                    }
                }
            }
            tau.push(t);
        }

        let mut eta = Array3::zeros((nv, n, nk));
        for mut r in eta.lanes_mut(Axis(2)) {
            draw_row(&mut rng, init, r.as_slice_mut().expect("contiguous lane"));
        }

        let block_posteriors = self
            .designs
            .iter()
            .map(|d| {
                let prior = BlockPosterior::prior(
                    d.family,
                    &cfg.gaussian_prior,
                    &cfg.poisson_prior,
                    cfg.dirichlet_prior_mass,
                );
                Array3::from_elem((nv, ng, nk), prior)
            })
            .collect();

        let mut state = VariationalState {
            tau,
            eta,
            view_sticks: ndarray::Array2::zeros((nv, 2)),
            feature_sticks: self.designs.iter().map(|_| Array3::zeros((nv, ng, 2))).collect(),
            object_sticks: Array3::zeros((nv, nk, 2)),
            block_posteriors,
        };
        self.update_block_posteriors(&mut state)?;
        self.update_view_sticks(&mut state);
        self.update_feature_sticks(&mut state);
        self.update_object_sticks(&mut state);
        Ok(state)
    }

    /// Hard responsibilities from `assignments`, followed by the same
    /// block-posterior and stick pass as [`Problem::init_state`]. Views and
    /// clusters must lie within the truncation.
    pub fn state_from_assignments(&self, assignments: &Assignments) -> Result<VariationalState> {
        let cfg = &self.config;
        let (nv, ng, nk) = (cfg.views, cfg.feature_clusters, cfg.object_clusters);
        let n = self.n_objects();
        let out_of_range = |what: String| Error::InvalidConfig(format!("{what} exceeds the truncation"));
        if assignments.features.len() != self.designs.len()
            || assignments.features.iter().zip(&self.designs).any(|(f, d)| f.len() != d.n_features())
            || assignments.objects.len() > nv
            || assignments.objects.iter().any(|o| o.len() != n)
        {
            return Err(Error::InvalidConfig("assignments do not match the dataset".into()));
        }
        let mut state = self.init_state(0)?;
        for (t, fa) in state.tau.iter_mut().zip(&assignments.features) {
            t.fill(0.0);
            for (j, a) in fa.iter().enumerate() {
                if a.view >= nv || a.feature_cluster >= ng {
                    return Err(out_of_range(format!("feature {j} assignment")));
                }
                t[[a.view, j, a.feature_cluster]] = 1.0;
            }
        }
        state.eta.fill(0.0);
        for v in 0..nv {
            for i in 0..n {
                let k = assignments.objects.get(v).map_or(0, |o| o[i]);
                if k >= nk {
                    return Err(out_of_range(format!("object {i} cluster in view {v}")));
                }
                state.eta[[v, i, k]] = 1.0;
            }
        }
        self.update_block_posteriors(&mut state)?;
        self.update_view_sticks(&mut state);
        self.update_feature_sticks(&mut state);
        self.update_object_sticks(&mut state);
        Ok(state)
    }

    /// γ_{v,1} = 1 + N_v and γ_{v,2} = α1 + Σ_{t>v} N_t, where N_v is the
    /// τ mass of view v over all families, features and feature clusters.
    pub fn update_view_sticks(&self, state: &mut VariationalState) {
        let nv = self.config.views;
        let mut masses = vec![0.0; nv];
        for t in &state.tau {
            for (v, mass) in masses.iter_mut().enumerate() {
                *mass += t.index_axis(Axis(0), v).sum();
            }
        }
        state.view_sticks = stick_parameters(&masses, self.config.alpha1);
    }

    /// Per family and view: γ_{g,1} = 1 + Σ_j τ, γ_{g,2} = α2 + Σ_{t>g} Σ_j τ.
    pub fn update_feature_sticks(&self, state: &mut VariationalState) {
        for (t, sticks) in state.tau.iter().zip(state.feature_sticks.iter_mut()) {
            for v in 0..self.config.views {
                let masses = t.index_axis(Axis(0), v).sum_axis(Axis(0)).to_vec();
                sticks
                    .slice_mut(s![v, .., ..])
                    .assign(&stick_parameters(&masses, self.config.alpha2));
            }
        }
    }

    /// Per view: γ_{k,1} = 1 + Σ_i η, γ_{k,2} = β + Σ_{t>k} Σ_i η.
    pub fn update_object_sticks(&self, state: &mut VariationalState) {
        for v in 0..self.config.views {
            let masses = state.eta.index_axis(Axis(0), v).sum_axis(Axis(0)).to_vec();
            state
                .object_sticks
                .slice_mut(s![v, .., ..])
                .assign(&stick_parameters(&masses, self.config.beta));
        }
    }

    /// Accumulates weighted statistics for every block from the current τ
    /// and η and applies each family's conjugate update.
    pub fn update_block_posteriors(&self, state: &mut VariationalState) -> Result<()> {
        let proj = self.feature_projections(state);
        let stats = self.stats_from_projections(state, &proj);
        self.apply_block_stats(state, &stats)
    }

    /// τ update: expected block log-likelihood under η plus the view and
    /// feature-cluster stick terms, normalized over (v, g) per feature.
    pub fn update_feature_responsibilities(&self, state: &mut VariationalState) {
        let nv = self.config.views;
        let ng = self.config.feature_clusters;
        let coefs = self.coefficients(state);
        let elog_view = expected_log_weights(state.view_sticks.view());

        for (m, design) in self.designs.iter().enumerate() {
            let d = design.n_features();
            let mut logits = Array3::<f64>::zeros((nv, d, ng));
            for v in 0..nv {
                let eta_v = state.eta.index_axis(Axis(0), v);
                let mut logits_v = logits.index_axis_mut(Axis(0), v);
                for (p, channel) in design.channels.iter().enumerate() {
                    // A = η_vᵀ Φ_p is K x d; logits_v += Aᵀ C_vpᵀ.
                    let a = eta_v.t().dot(channel);
                    let c = coefs[m].slice(s![v, p, .., ..]);
                    general_mat_mul(1.0, &a.t(), &c.t(), 1.0, &mut logits_v);
                }
                let elog_feat = expected_log_weights(state.feature_sticks[m].slice(s![v, .., ..]));
                for mut row in logits_v.rows_mut() {
                    for (g, x) in row.iter_mut().enumerate() {
                        *x += elog_view[v] + elog_feat[g];
                    }
                }
            }
            let mut buf = vec![0.0; nv * ng];
            let tau = &mut state.tau[m];
            for j in 0..d {
                for v in 0..nv {
                    for g in 0..ng {
                        buf[v * ng + g] = logits[[v, j, g]];
                    }
                }
                softmax_in_place(&mut buf);
                for v in 0..nv {
                    for g in 0..ng {
                        tau[[v, j, g]] = buf[v * ng + g];
                    }
                }
            }
        }
    }

    /// η update: expected block log-likelihood under τ plus the object
    /// stick terms, normalized over k per (v, i).
    pub fn update_object_responsibilities(&self, state: &mut VariationalState) {
        let proj = self.feature_projections(state);
        self.update_object_responsibilities_with(state, &proj);
    }

    pub(crate) fn update_object_responsibilities_with(
        &self,
        state: &mut VariationalState,
        proj: &FeatureProjections,
    ) {
        let nv = self.config.views;
        let coefs = self.coefficients(state);
        let mut logits = Array3::<f64>::zeros(state.eta.dim());
        for v in 0..nv {
            let elog_obj = expected_log_weights(state.object_sticks.slice(s![v, .., ..]));
            let mut logits_v = logits.index_axis_mut(Axis(0), v);
            for mut row in logits_v.rows_mut() {
                row.iter_mut().zip(&elog_obj).for_each(|(x, e)| *x = *e);
            }
            for (m, design) in self.designs.iter().enumerate() {
                for p in 0..design.n_channels() {
                    let b = proj[m].slice(s![v, p, .., ..]);
                    let c = coefs[m].slice(s![v, p, .., ..]);
                    general_mat_mul(1.0, &b, &c, 1.0, &mut logits_v);
                }
            }
        }
        for mut row in logits.lanes_mut(Axis(2)) {
            softmax_in_place(row.as_slice_mut().expect("contiguous lane"));
        }
        state.eta = logits;
    }

    pub(crate) fn feature_projections(&self, state: &VariationalState) -> FeatureProjections {
        let nv = self.config.views;
        let ng = self.config.feature_clusters;
        let n = self.n_objects();
        self.designs
            .iter()
            .enumerate()
            .map(|(m, design)| {
                let mut out = Array4::zeros((nv, design.n_channels(), n, ng));
                for v in 0..nv {
                    let tau_v = state.tau[m].index_axis(Axis(0), v);
                    for (p, channel) in design.channels.iter().enumerate() {
                        let mut dst = out.slice_mut(s![v, p, .., ..]);
                        general_mat_mul(1.0, channel, &tau_v, 0.0, &mut dst);
                    }
                }
                out
            })
            .collect()
    }

    pub(crate) fn stats_from_projections(&self, state: &VariationalState, proj: &FeatureProjections) -> BlockStats {
        let nv = self.config.views;
        let ng = self.config.feature_clusters;
        let nk = self.config.object_clusters;
        self.designs
            .iter()
            .enumerate()
            .map(|(m, design)| {
                let mut out = Array4::zeros((nv, design.n_channels(), ng, nk));
                for v in 0..nv {
                    let eta_v = state.eta.index_axis(Axis(0), v);
                    for p in 0..design.n_channels() {
                        let b = proj[m].slice(s![v, p, .., ..]);
                        let mut dst = out.slice_mut(s![v, p, .., ..]);
                        general_mat_mul(1.0, &b.t(), &eta_v, 0.0, &mut dst);
                    }
                }
                out
            })
            .collect()
    }

    pub(crate) fn apply_block_stats(&self, state: &mut VariationalState, stats: &BlockStats) -> Result<()> {
        let cfg = &self.config;
        for (m, design) in self.designs.iter().enumerate() {
            let (nv, np, ng, nk) = stats[m].dim();
            let mut sums = vec![0.0; np];
            for v in 0..nv {
                for g in 0..ng {
                    for k in 0..nk {
                        for (p, s) in sums.iter_mut().enumerate() {
                            *s = stats[m][[v, p, g, k]];
                        }
                        let ws = WeightedSuffStats::from_channel_sums(design.family, &sums);
                        state.block_posteriors[m][[v, g, k]] = BlockPosterior::update(
                            design.family,
                            &ws,
                            &cfg.gaussian_prior,
                            &cfg.poisson_prior,
                            cfg.dirichlet_prior_mass,
                        )?;
                    }
                }
            }
        }
        Ok(())
    }

    /// Per-family `[V, P, G, K]` expected log-likelihood coefficients.
    pub(crate) fn coefficients(&self, state: &VariationalState) -> Vec<Array4<f64>> {
        self.designs
            .iter()
            .enumerate()
            .map(|(m, design)| {
                let (nv, ng, nk) = state.block_posteriors[m].dim();
                let mut out = Array4::zeros((nv, design.n_channels(), ng, nk));
                for ((v, g, k), post) in state.block_posteriors[m].indexed_iter() {
                    for (p, c) in post.loglik_coefficients(design.family).into_iter().enumerate() {
                        out[[v, p, g, k]] = c;
                    }
                }
                out
            })
            .collect()
    }

    /// Weighted statistics of block (v, g, k) in family m, as the conjugate
    /// updates see them.
    pub fn block_stats(&self, state: &VariationalState, m: usize, v: usize, g: usize, k: usize) -> WeightedSuffStats {
        let proj = self.feature_projections(state);
        let stats = self.stats_from_projections(state, &proj);
        let sums: Vec<f64> = stats[m].slice(s![v, .., g, k]).to_vec();
        WeightedSuffStats::from_channel_sums(self.designs[m].family, &sums)
    }
}
