//! Oracle comparisons for the conjugate updates and expected
//! log-likelihoods, shared by the oracle tests and the acceptance gate.

use multico::observation::*;
use multico::special::{ln_factorial, ln_multinomial_coefficient};
use num_rational::BigRational;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal};

use super::{rat, rat_to_f64, rel_err, rng};

pub type Check = Result<(), String>;

fn close(got: f64, want: &BigRational, what: &str, case: usize) -> Check {
    let want = rat_to_f64(want);
    let err = rel_err(got, want);
    if err < 1e-9 {
        Ok(())
    } else {
        Err(format!("{what} case {case}: {got} vs {want} (rel {err:e})"))
    }
}

/// Normal-Gamma updates against exact rational arithmetic on random
/// weighted statistics.
pub fn gaussian_update_vs_rational(draws: usize, seed: u64) -> Check {
    let mut r = rng(seed);
    for case in 0..draws {
        let n = r.random_range(1..40);
        let prior = GaussianPrior {
            mu0: r.random::<f64>() * 2.0 - 1.0,
            lambda0: 10f64.powf(r.random::<f64>() * 4.0 - 4.0),
            gamma0: 0.5 + r.random::<f64>() * 3.0,
            sigma0_sq: 10f64.powf(r.random::<f64>() * 4.0 - 2.0),
        };
        let mut stats = WeightedSuffStats::default();
        let (mut w, mut wx, mut wxx) = (rat(0.0), rat(0.0), rat(0.0));
        for _ in 0..n {
            let x = r.random::<f64>() * 20.0 - 10.0;
            let wt = r.random::<f64>();
            stats.add_real(wt, x);
            w += rat(wt);
            wx += rat(wt) * rat(x);
            wxx += rat(wt) * rat(x) * rat(x);
        }
        let post = gaussian_update(&stats, &prior).map_err(|e| e.to_string())?;
        let lambda = rat(prior.lambda0) + &w;
        let mu = (rat(prior.lambda0) * rat(prior.mu0) + &wx) / &lambda;
        let gamma = rat(prior.gamma0) + &w;
        let sigma_sq = (rat(prior.gamma0) * rat(prior.sigma0_sq)
            + rat(prior.lambda0) * rat(prior.mu0) * rat(prior.mu0)
            + &wxx
            - &lambda * &mu * &mu)
            / &gamma;
        close(post.lambda, &lambda, "lambda", case)?;
        close(post.mu, &mu, "mu", case)?;
        close(post.gamma, &gamma, "gamma", case)?;
        close(post.sigma_sq, &sigma_sq, "sigma_sq", case)?;
    }
    Ok(())
}

pub fn poisson_update_vs_rational(draws: usize, seed: u64) -> Check {
    let mut r = rng(seed);
    for case in 0..draws {
        let prior = PoissonPrior {
            alpha0: 0.1 + r.random::<f64>() * 3.0,
            beta0: 0.1 + r.random::<f64>() * 3.0,
        };
        let mut stats = WeightedSuffStats::default();
        let (mut w, mut wx) = (rat(0.0), rat(0.0));
        for _ in 0..r.random_range(1..50) {
            let wt = r.random::<f64>();
            let x = r.random_range(0..30u64);
            stats.add_count(wt, x);
            w += rat(wt);
            wx += rat(wt) * rat(x as f64);
        }
        let post = poisson_update(&stats, &prior);
        close(post.alpha, &(rat(prior.alpha0) + wx), "alpha", case)?;
        close(post.beta, &(rat(prior.beta0) + w), "beta", case)?;
    }
    Ok(())
}

pub fn dirichlet_update_vs_rational(draws: usize, seed: u64) -> Check {
    let mut r = rng(seed);
    for case in 0..draws {
        let h = r.random_range(2..6);
        let mass = 0.2 + r.random::<f64>() * 2.0;
        let mut stats = WeightedSuffStats::with_categories(h);
        let mut counts = vec![rat(0.0); h];
        for _ in 0..r.random_range(1..50) {
            let wt = r.random::<f64>();
            if r.random::<bool>() {
                let x = r.random_range(0..h);
                stats.add_category(wt, x);
                counts[x] += rat(wt);
            } else {
                let v: Vec<u64> = (0..h).map(|_| r.random_range(0..5u64)).collect();
                stats.add_count_vector(wt, &v);
                for (c, &k) in counts.iter_mut().zip(&v) {
                    *c += rat(wt) * rat(k as f64);
                }
            }
        }
        let post = categorical_update(&stats, mass);
        for (got, want) in post.rho.iter().zip(&counts) {
            close(*got, &(rat(mass) + want), "rho", case)?;
        }
    }
    Ok(())
}

/// Monte Carlo mean and standard error.
pub fn monte_carlo(samples: usize, mut draw: impl FnMut() -> f64) -> (f64, f64) {
    let (mut sum, mut sq) = (0.0, 0.0);
    for _ in 0..samples {
        let v = draw();
        sum += v;
        sq += v * v;
    }
    let mean = sum / samples as f64;
    let var = (sq / samples as f64 - mean * mean).max(0.0);
    (mean, (var / samples as f64).sqrt())
}

fn within(closed: f64, (mean, se): (f64, f64), what: &str, case: usize) -> Check {
    if (closed - mean).abs() <= 3.0 * se + 1e-12 * closed.abs().max(1.0) {
        Ok(())
    } else {
        Err(format!("{what} case {case}: {closed} vs {mean} ± {se}"))
    }
}

pub fn random_normal_gamma(r: &mut ChaCha8Rng) -> NormalGamma {
    NormalGamma {
        mu: r.random::<f64>() * 4.0 - 2.0,
        lambda: 0.5 + r.random::<f64>() * 20.0,
        gamma: 2.0 + r.random::<f64>() * 30.0,
        sigma_sq: 0.2 + r.random::<f64>() * 3.0,
    }
}

pub fn gaussian_loglik_vs_monte_carlo(cases: usize, samples: usize, seed: u64) -> Check {
    let mut r = rng(seed);
    let ln_2pi = (2.0 * std::f64::consts::PI).ln();
    for case in 0..cases {
        let q = random_normal_gamma(&mut r);
        let x = r.random::<f64>() * 6.0 - 3.0;
        let precision = Gamma::new(q.gamma / 2.0, 2.0 / (q.gamma * q.sigma_sq)).unwrap();
        let estimate = monte_carlo(samples, || {
            let s: f64 = precision.sample(&mut r);
            let mu = Normal::new(q.mu, (1.0 / (q.lambda * s)).sqrt()).unwrap().sample(&mut r);
            0.5 * s.ln() - 0.5 * ln_2pi - 0.5 * s * (x - mu) * (x - mu)
        });
        within(gaussian_expected_loglik(x, &q), estimate, "gaussian", case)?;
    }
    Ok(())
}

pub fn poisson_loglik_vs_monte_carlo(cases: usize, samples: usize, seed: u64) -> Check {
    let mut r = rng(seed);
    for case in 0..cases {
        let q = GammaPosterior {
            alpha: 0.5 + r.random::<f64>() * 20.0,
            beta: 0.5 + r.random::<f64>() * 10.0,
        };
        let x = r.random_range(0..15u64);
        let rate = Gamma::new(q.alpha, 1.0 / q.beta).unwrap();
        let estimate = monte_carlo(samples, || {
            let l: f64 = rate.sample(&mut r);
            x as f64 * l.ln() - l - ln_factorial(x)
        });
        within(poisson_expected_loglik(x, &q), estimate, "poisson", case)?;
    }
    Ok(())
}

/// Categorical and multinomial expected log-likelihoods under a Dirichlet,
/// sampled through normalized Gamma draws.
pub fn dirichlet_loglik_vs_monte_carlo(cases: usize, samples: usize, seed: u64) -> Check {
    let mut r = rng(seed);
    for case in 0..cases {
        let h = r.random_range(2..6);
        let rho: Vec<f64> = (0..h).map(|_| 0.3 + r.random::<f64>() * 8.0).collect();
        let q = DirichletPosterior { rho: rho.clone() };
        let gammas: Vec<Gamma<f64>> = rho.iter().map(|&a| Gamma::new(a, 1.0).unwrap()).collect();
        let x = r.random_range(0..h);
        let counts: Vec<u64> = (0..h).map(|_| r.random_range(0..4u64)).collect();
        let mut sampler = rng(seed.wrapping_mul(31).wrapping_add(case as u64));
        let mut draw_p = || {
            let g: Vec<f64> = gammas.iter().map(|d| d.sample(&mut sampler)).collect();
            let total: f64 = g.iter().sum();
            g.into_iter().map(|v| v / total).collect::<Vec<_>>()
        };
        let estimate = monte_carlo(samples, || draw_p()[x].ln());
        within(categorical_expected_loglik(x, &q), estimate, "categorical", case)?;

        let coef = ln_multinomial_coefficient(&counts);
        let estimate = monte_carlo(samples, || {
            let p = draw_p();
            coef + counts.iter().zip(&p).map(|(&c, &pi)| c as f64 * pi.ln()).sum::<f64>()
        });
        within(multinomial_expected_loglik(&counts, &q), estimate, "multinomial", case)?;
    }
    Ok(())
}
