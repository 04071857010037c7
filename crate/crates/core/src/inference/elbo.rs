use ndarray::{s, Axis};

use super::updates::BlockStats;
use super::{expected_log_weights, Problem, VariationalState};
use crate::observation::kl_beta;
use crate::special::xlogx;

/// The evidence lower bound split into its parts.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ElboTerms {
    /// Σ τη E_q[ln p(x | θ)] over observed cells.
    pub data: f64,
    /// E_q[ln p(Y | w, w')] + E_q[ln p(Z | u)].
    pub membership_prior: f64,
    /// KL of all Beta stick posteriors from their priors.
    pub stick_kl: f64,
    /// KL of all block posteriors from their priors.
    pub block_kl: f64,
    /// Entropy of q(Y) plus entropy of q(Z).
    pub entropy: f64,
}

impl ElboTerms {
    pub fn total(&self) -> f64 {
        self.data + self.membership_prior - self.stick_kl - self.block_kl + self.entropy
    }
}

impl Problem<'_> {
    /// Evidence lower bound of the current state.
    pub fn compute_elbo(&self, state: &VariationalState) -> f64 {
        self.elbo_terms(state).total()
    }

    pub fn elbo_terms(&self, state: &VariationalState) -> ElboTerms {
        let proj = self.feature_projections(state);
        let stats = self.stats_from_projections(state, &proj);
        self.elbo_terms_with_stats(state, &stats)
    }

    pub(crate) fn elbo_terms_with_stats(&self, state: &VariationalState, stats: &BlockStats) -> ElboTerms {
        let cfg = &self.config;
        let nv = cfg.views;
        let coefs = self.coefficients(state);
        let mut terms = ElboTerms::default();

        for (m, design) in self.designs.iter().enumerate() {
            terms.data += design.base_total;
            terms.data += (&coefs[m] * &stats[m]).sum();
            for post in state.block_posteriors[m].iter() {
                terms.block_kl +=
                    post.kl_from_prior(&cfg.gaussian_prior, &cfg.poisson_prior, cfg.dirichlet_prior_mass);
            }
        }

        // Feature memberships: views first, then feature clusters per family.
        let elog_view = expected_log_weights(state.view_sticks.view());
        for (m, tau) in state.tau.iter().enumerate() {
            for v in 0..nv {
                let tau_v = tau.index_axis(Axis(0), v);
                let masses = tau_v.sum_axis(Axis(0));
                let elog_feat = expected_log_weights(state.feature_sticks[m].slice(s![v, .., ..]));
                for (g, &mass) in masses.iter().enumerate() {
                    terms.membership_prior += mass * (elog_view[v] + elog_feat[g]);
                }
                for row in state.feature_sticks[m].slice(s![v, .., ..]).rows() {
                    terms.stick_kl += kl_beta(row[0], row[1], 1.0, cfg.alpha2);
                }
            }
            terms.entropy -= tau.iter().map(|&x| xlogx(x)).sum::<f64>();
        }
        for row in state.view_sticks.rows() {
            terms.stick_kl += kl_beta(row[0], row[1], 1.0, cfg.alpha1);
        }

        for v in 0..nv {
            let eta_v = state.eta.index_axis(Axis(0), v);
            let masses = eta_v.sum_axis(Axis(0));
            let elog_obj = expected_log_weights(state.object_sticks.slice(s![v, .., ..]));
            terms.membership_prior += masses.iter().zip(&elog_obj).map(|(a, b)| a * b).sum::<f64>();
            for row in state.object_sticks.slice(s![v, .., ..]).rows() {
                terms.stick_kl += kl_beta(row[0], row[1], 1.0, cfg.beta);
            }
        }
        terms.entropy -= state.eta.iter().map(|&x| xlogx(x)).sum::<f64>();
        terms
    }
}
