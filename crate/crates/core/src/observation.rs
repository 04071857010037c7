//! Conjugate observation models for a single cluster block.
//!
//! Every block (view, feature cluster, object cluster) of a family carries a
//! conjugate posterior: Normal-Gamma for Gaussian cells, Gamma for Poisson
//! rates and Dirichlet for categorical / multinomial probabilities. Each
//! posterior is refreshed from [`WeightedSuffStats`], the responsibility
//! weighted sums over the block's observed cells.
//!
//! All three expected log-likelihoods are linear in a small per-cell feature
//! vector φ(x) plus a base term that does not depend on the block:
//!
//! | family      | φ(x)                      | base(x)                    |
//! |-------------|---------------------------|----------------------------|
//! | Gaussian    | (1, x, x²)                | 0                          |
//! | Poisson     | (1, x)                    | −ln x!                     |
//! | categorical | one-hot(x)                | 0                          |
//! | multinomial | (1, n_1, …, n_H)          | ln multinomial coefficient |
//!
//! [`BlockPosterior::loglik_coefficients`] returns the matching coefficient
//! vector, which is what lets inference evaluate whole blocks with matrix
//! products instead of per-cell calls.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::FeatureFamily;
use crate::special::{digamma, ln_beta, ln_factorial, ln_gamma, ln_multinomial_coefficient};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Values of σ²' in (−NEGATIVE_VARIANCE_SLACK, 0] are rounding noise and get
/// clamped; anything lower is a hard error.
pub const NEGATIVE_VARIANCE_SLACK: f64 = 1e-9;
const VARIANCE_FLOOR: f64 = 1e-12;

/// Normal-Gamma prior: precision s ~ Ga(γ0/2, γ0σ0²/2) (shape, rate) and
/// mean μ | s ~ N(μ0, 1/(λ0 s)).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaussianPrior {
    pub mu0: f64,
    pub lambda0: f64,
    pub gamma0: f64,
    pub sigma0_sq: f64,
}

impl Default for GaussianPrior {
    fn default() -> Self {
        GaussianPrior {
            mu0: 0.0,
            lambda0: 1e-4,
            gamma0: 1.0,
            sigma0_sq: 1e4,
        }
    }
}

/// Gamma(α0, β0) prior (shape, rate) on a Poisson rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoissonPrior {
    pub alpha0: f64,
    pub beta0: f64,
}

impl Default for PoissonPrior {
    fn default() -> Self {
        PoissonPrior {
            alpha0: 1.0,
            beta0: 1.0,
        }
    }
}

/// Responsibility-weighted sufficient statistics of one block.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightedSuffStats {
    /// Σ τη over observed cells.
    pub weight_sum: f64,
    /// Σ τη x (Gaussian, Poisson).
    pub weighted_sum: f64,
    /// Σ τη x² (Gaussian).
    pub weighted_sq_sum: f64,
    /// Σ τη I(x = h) or Σ τη n_h (categorical, multinomial).
    pub weighted_counts: Vec<f64>,
}

impl WeightedSuffStats {
    pub fn with_categories(h: usize) -> Self {
        WeightedSuffStats {
            weighted_counts: vec![0.0; h],
            ..Default::default()
        }
    }

    pub fn add_real(&mut self, w: f64, x: f64) {
        self.weight_sum += w;
        self.weighted_sum += w * x;
        self.weighted_sq_sum += w * x * x;
    }

    pub fn add_count(&mut self, w: f64, x: u64) {
        self.weight_sum += w;
        self.weighted_sum += w * x as f64;
    }

    pub fn add_category(&mut self, w: f64, h: usize) {
        self.weight_sum += w;
        self.weighted_counts[h] += w;
    }

    pub fn add_count_vector(&mut self, w: f64, counts: &[u64]) {
        self.weight_sum += w;
        for (acc, &c) in self.weighted_counts.iter_mut().zip(counts) {
            *acc += w * c as f64;
        }
    }

    pub fn merge(&mut self, other: &WeightedSuffStats) {
        self.weight_sum += other.weight_sum;
        self.weighted_sum += other.weighted_sum;
        self.weighted_sq_sum += other.weighted_sq_sum;
        if self.weighted_counts.len() < other.weighted_counts.len() {
            self.weighted_counts.resize(other.weighted_counts.len(), 0.0);
        }
        for (a, b) in self.weighted_counts.iter_mut().zip(&other.weighted_counts) {
            *a += b;
        }
    }

    /// Rebuilds statistics from channel sums laid out as in the module docs.
    pub fn from_channel_sums(family: FeatureFamily, sums: &[f64]) -> Self {
        match family {
            FeatureFamily::Gaussian => WeightedSuffStats {
                weight_sum: sums[0],
                weighted_sum: sums[1],
                weighted_sq_sum: sums[2],
                weighted_counts: Vec::new(),
            },
            FeatureFamily::Poisson => WeightedSuffStats {
                weight_sum: sums[0],
                weighted_sum: sums[1],
                ..Default::default()
            },
            FeatureFamily::Categorical { .. } => WeightedSuffStats {
                weight_sum: sums.iter().sum(),
                weighted_counts: sums.to_vec(),
                ..Default::default()
            },
            FeatureFamily::Multinomial { .. } => WeightedSuffStats {
                weight_sum: sums[0],
                weighted_counts: sums[1..].to_vec(),
                ..Default::default()
            },
        }
    }
}

/// Number of φ channels a family uses.
pub fn channel_count(family: FeatureFamily) -> usize {
    match family {
        FeatureFamily::Gaussian => 3,
        FeatureFamily::Poisson => 2,
        FeatureFamily::Categorical { categories } => categories,
        FeatureFamily::Multinomial { categories } => categories + 1,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalGamma {
    pub mu: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub sigma_sq: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaPosterior {
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirichletPosterior {
    pub rho: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BlockPosterior {
    NormalGamma(NormalGamma),
    Gamma(GammaPosterior),
    Dirichlet(DirichletPosterior),
}

impl From<&GaussianPrior> for NormalGamma {
    fn from(p: &GaussianPrior) -> Self {
        NormalGamma {
            mu: p.mu0,
            lambda: p.lambda0,
            gamma: p.gamma0,
            sigma_sq: p.sigma0_sq,
        }
    }
}

impl From<&PoissonPrior> for GammaPosterior {
    fn from(p: &PoissonPrior) -> Self {
        GammaPosterior {
            alpha: p.alpha0,
            beta: p.beta0,
        }
    }
}

/// Normal-Gamma conjugate update.
pub fn gaussian_update(stats: &WeightedSuffStats, prior: &GaussianPrior) -> Result<NormalGamma> {
    let lambda = prior.lambda0 + stats.weight_sum;
    let mu = (prior.lambda0 * prior.mu0 + stats.weighted_sum) / lambda;
    let gamma = prior.gamma0 + stats.weight_sum;
    let mut sigma_sq = (prior.gamma0 * prior.sigma0_sq + prior.lambda0 * prior.mu0 * prior.mu0
        + stats.weighted_sq_sum
        - lambda * mu * mu)
        / gamma;
    if sigma_sq <= 0.0 {
        if sigma_sq > -NEGATIVE_VARIANCE_SLACK {
            sigma_sq = VARIANCE_FLOOR;
        } else {
            return Err(Error::DegenerateVariance(sigma_sq));
        }
    }
    if !sigma_sq.is_finite() {
        return Err(Error::DegenerateVariance(sigma_sq));
    }
    Ok(NormalGamma {
        mu,
        lambda,
        gamma,
        sigma_sq,
    })
}

/// E_q[ln N(x | μ, 1/s)] under a Normal-Gamma posterior.
pub fn gaussian_expected_loglik(x: f64, post: &NormalGamma) -> f64 {
    let d = x - post.mu;
    -0.5 * (d * d / post.sigma_sq + 1.0 / post.lambda + post.sigma_sq.ln() + (post.gamma / 2.0).ln()
        - digamma(post.gamma / 2.0)
        + LN_2PI)
}

pub fn poisson_update(stats: &WeightedSuffStats, prior: &PoissonPrior) -> GammaPosterior {
    GammaPosterior {
        alpha: prior.alpha0 + stats.weighted_sum,
        beta: prior.beta0 + stats.weight_sum,
    }
}

/// E_q[ln Poisson(x | λ)] with λ ~ Gamma(α, β): x(ψ(α) − ln β) − α/β − ln x!.
pub fn poisson_expected_loglik(x: u64, post: &GammaPosterior) -> f64 {
    x as f64 * (digamma(post.alpha) - post.beta.ln()) - post.alpha / post.beta - ln_factorial(x)
}

pub fn categorical_update(stats: &WeightedSuffStats, prior_mass: f64) -> DirichletPosterior {
    DirichletPosterior {
        rho: stats.weighted_counts.iter().map(|c| prior_mass + c).collect(),
    }
}

/// ψ(ρ_x) − ψ(Σ ρ).
pub fn categorical_expected_loglik(x: usize, post: &DirichletPosterior) -> f64 {
    let total: f64 = post.rho.iter().sum();
    digamma(post.rho[x]) - digamma(total)
}

/// Σ_h n_h (ψ(ρ_h) − ψ(Σρ)) plus the log multinomial coefficient.
pub fn multinomial_expected_loglik(counts: &[u64], post: &DirichletPosterior) -> f64 {
    let total: f64 = post.rho.iter().sum();
    let psi_total = digamma(total);
    let linear: f64 = counts
        .iter()
        .zip(&post.rho)
        .filter(|(&c, _)| c > 0)
        .map(|(&c, &r)| c as f64 * (digamma(r) - psi_total))
        .sum();
    linear + ln_multinomial_coefficient(counts)
}

impl BlockPosterior {
    /// The posterior an empty block takes: the prior itself.
    pub fn prior(family: FeatureFamily, gaussian: &GaussianPrior, poisson: &PoissonPrior, dirichlet_mass: f64) -> Self {
        match family {
            FeatureFamily::Gaussian => BlockPosterior::NormalGamma(gaussian.into()),
            FeatureFamily::Poisson => BlockPosterior::Gamma(poisson.into()),
            FeatureFamily::Categorical { categories } | FeatureFamily::Multinomial { categories } => {
                BlockPosterior::Dirichlet(DirichletPosterior {
                    rho: vec![dirichlet_mass; categories],
                })
            }
        }
    }

    /// Applies the family's conjugate update.
    pub fn update(
        family: FeatureFamily,
        stats: &WeightedSuffStats,
        gaussian: &GaussianPrior,
        poisson: &PoissonPrior,
        dirichlet_mass: f64,
    ) -> Result<Self> {
        Ok(match family {
            FeatureFamily::Gaussian => BlockPosterior::NormalGamma(gaussian_update(stats, gaussian)?),
            FeatureFamily::Poisson => BlockPosterior::Gamma(poisson_update(stats, poisson)),
            FeatureFamily::Categorical { .. } | FeatureFamily::Multinomial { .. } => {
                BlockPosterior::Dirichlet(categorical_update(stats, dirichlet_mass))
            }
        })
    }

    /// Coefficients c such that E_q[ln p(x)] = c · φ(x) + base(x), with the
    /// channel layout for `family` given in the module docs.
    pub fn loglik_coefficients(&self, family: FeatureFamily) -> Vec<f64> {
        match (self, family) {
            (BlockPosterior::NormalGamma(p), _) => {
                let inv = 1.0 / p.sigma_sq;
                let constant = -0.5
                    * (p.mu * p.mu * inv + 1.0 / p.lambda + p.sigma_sq.ln() + (p.gamma / 2.0).ln()
                        - digamma(p.gamma / 2.0)
                        + LN_2PI);
                vec![constant, p.mu * inv, -0.5 * inv]
            }
            (BlockPosterior::Gamma(p), _) => {
                vec![-p.alpha / p.beta, digamma(p.alpha) - p.beta.ln()]
            }
            (BlockPosterior::Dirichlet(p), FeatureFamily::Multinomial { .. }) => {
                let psi_total = digamma(p.rho.iter().sum());
                std::iter::once(0.0)
                    .chain(p.rho.iter().map(|&r| digamma(r) - psi_total))
                    .collect()
            }
            (BlockPosterior::Dirichlet(p), _) => {
                let psi_total = digamma(p.rho.iter().sum());
                p.rho.iter().map(|&r| digamma(r) - psi_total).collect()
            }
        }
    }

    /// KL(q ‖ prior) for this block's posterior.
    pub fn kl_from_prior(&self, gaussian: &GaussianPrior, poisson: &PoissonPrior, dirichlet_mass: f64) -> f64 {
        match self {
            BlockPosterior::NormalGamma(q) => kl_normal_gamma(q, &gaussian.into()),
            BlockPosterior::Gamma(q) => kl_gamma(q.alpha, q.beta, poisson.alpha0, poisson.beta0),
            BlockPosterior::Dirichlet(q) => {
                let prior = vec![dirichlet_mass; q.rho.len()];
                kl_dirichlet(&q.rho, &prior)
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            BlockPosterior::NormalGamma(p) => {
                p.mu.is_finite() && p.lambda.is_finite() && p.gamma.is_finite() && p.sigma_sq.is_finite()
            }
            BlockPosterior::Gamma(p) => p.alpha.is_finite() && p.beta.is_finite(),
            BlockPosterior::Dirichlet(p) => p.rho.iter().all(|r| r.is_finite()),
        }
    }
}

/// Base term of the expected log-likelihood that no block parameter touches.
pub fn poisson_base(x: u64) -> f64 {
    -ln_factorial(x)
}

/// KL(Beta(a, b) ‖ Beta(a0, b0)).
pub fn kl_beta(a: f64, b: f64, a0: f64, b0: f64) -> f64 {
    ln_beta(a0, b0) - ln_beta(a, b)
        + (a - a0) * digamma(a)
        + (b - b0) * digamma(b)
        + (a0 - a + b0 - b) * digamma(a + b)
}

/// KL(Gamma(a, b) ‖ Gamma(a0, b0)), shape / rate.
pub fn kl_gamma(a: f64, b: f64, a0: f64, b0: f64) -> f64 {
    (a - a0) * digamma(a) - ln_gamma(a) + ln_gamma(a0) + a0 * (b.ln() - b0.ln()) + a * (b0 - b) / b
}

/// KL(Dirichlet(ρ) ‖ Dirichlet(ρ0)).
pub fn kl_dirichlet(rho: &[f64], rho0: &[f64]) -> f64 {
    let total: f64 = rho.iter().sum();
    let total0: f64 = rho0.iter().sum();
    let psi_total = digamma(total);
    let mut kl = ln_gamma(total) - ln_gamma(total0);
    for (&r, &r0) in rho.iter().zip(rho0) {
        kl += ln_gamma(r0) - ln_gamma(r) + (r - r0) * (digamma(r) - psi_total);
    }
    kl
}

/// KL between two Normal-Gamma laws in the (μ, λ, γ, σ²) parameterization.
/// The precision part is a Gamma KL; the mean part is the Gaussian KL
/// averaged over q(s), which only needs E_q[s] = 1/σ².
pub fn kl_normal_gamma(q: &NormalGamma, p: &NormalGamma) -> f64 {
    let precision = kl_gamma(
        q.gamma / 2.0,
        q.gamma * q.sigma_sq / 2.0,
        p.gamma / 2.0,
        p.gamma * p.sigma_sq / 2.0,
    );
    let dm = q.mu - p.mu;
    let mean = 0.5 * ((q.lambda / p.lambda).ln() + p.lambda / q.lambda + p.lambda * dm * dm / q.sigma_sq - 1.0);
    precision + mean
}
