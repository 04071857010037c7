//! Independent oracles shared by the integration tests: quadrature,
//! pair-counting ARI, exact rational arithmetic, brute-force search and
//! small random datasets.

#![allow(dead_code)]

pub mod checks;

use multico::inference::{FitOptions, Problem};
use multico::model::{Assignments, Dataset, FamilyMatrix, FeatureAssignment, TruncationConfig};
use ndarray::{Array2, Array3};
use num_rational::BigRational;
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(order: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(order);
    let n = order as f64;
    for i in 1..=order {
        let mut x = (std::f64::consts::PI * (i as f64 - 0.25) / (n + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=order {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            let step = p1 / dp;
            x -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// Composite Gauss-Legendre integral of `f` over `[a, b]`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let rule = gauss_legendre(20);
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * h;
        let mid = lo + 0.5 * h;
        for &(x, w) in &rule {
            total += w * 0.5 * h * f(mid + 0.5 * h * x);
        }
    }
    total
}

/// Log density of Gamma(shape, rate) at `x`.
pub fn ln_gamma_pdf(x: f64, shape: f64, rate: f64) -> f64 {
    shape * rate.ln() + (shape - 1.0) * x.ln() - rate * x - libm_lgamma(shape)
}

/// ln Γ through a Lanczos approximation, kept separate from the crate's own.
pub fn libm_lgamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - libm_lgamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + G + 0.5;
    for (i, &c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Pair-counting adjusted Rand index straight from the definition: counts
/// agreeing and disagreeing object pairs, never building a contingency
/// table.
pub fn pair_counting_ari(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len();
    let (mut both, mut only_a, mut only_b, mut pairs) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        for j in (i + 1)..n {
            let sa = a[i] == a[j];
            let sb = b[i] == b[j];
            pairs += 1.0;
            if sa && sb {
                both += 1.0;
            }
            if sa {
                only_a += 1.0;
            }
            if sb {
                only_b += 1.0;
            }
        }
    }
    let expected = only_a * only_b / pairs;
    let max = 0.5 * (only_a + only_b);
    if max == expected {
        return 1.0;
    }
    (both - expected) / (max - expected)
}

pub fn rat(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite")
}

pub fn rat_to_f64(x: &BigRational) -> f64 {
    x.to_f64().expect("representable")
}

pub fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(f64::MIN_POSITIVE)
}

/// Random Gaussian, Poisson and categorical features with optional
/// missing cells; no feature is left fully unobserved.
pub fn random_dataset(seed: u64, n: usize, d_per_family: usize, missing: f64) -> Dataset {
    let mut r = rng(seed);
    let d = d_per_family;
    let mask = |r: &mut ChaCha8Rng| {
        let mut m = Array2::from_shape_fn((n, d), |_| r.random::<f64>() >= missing);
        for j in 0..d {
            let keep = r.random_range(0..n);
            m[[keep, j]] = true;
        }
        m
    };
    let names = |p: &str| (0..d).map(|j| format!("{p}{j}")).collect::<Vec<_>>();
    let centers: Vec<f64> = (0..3).map(|_| r.random::<f64>() * 6.0 - 3.0).collect();
    let g = Array2::from_shape_fn((n, d), |(i, _)| centers[i % 3] + r.random::<f64>() - 0.5);
    let gm = mask(&mut r);
    let p = Array2::from_shape_fn((n, d), |(i, _)| (i % 3) as i64 + r.random_range(0..3i64));
    let pm = mask(&mut r);
    let c = Array2::from_shape_fn((n, d), |_| r.random_range(0..3i64));
    let cm = mask(&mut r);
    Dataset::new(
        (0..n).map(|i| format!("o{i}")).collect(),
        vec![
            FamilyMatrix::gaussian(g, gm, names("g")),
            FamilyMatrix::poisson(p, pm, names("p")),
            FamilyMatrix::categorical(3, c, cm, names("c")),
        ],
    )
}

/// A tiny multinomial family for datasets that need one.
pub fn multinomial_family(seed: u64, n: usize, d: usize, h: usize) -> FamilyMatrix {
    let mut r = rng(seed);
    let counts = Array3::from_shape_fn((n, d, h), |_| r.random_range(0..4i64));
    FamilyMatrix::multinomial(
        h,
        counts,
        Array2::from_elem((n, d), true),
        (0..d).map(|j| format!("m{j}")).collect(),
    )
}

/// All labelings of `n` objects into `k` clusters, as digit vectors.
pub fn all_labelings(n: usize, k: usize) -> impl Iterator<Item = Vec<usize>> {
    let total = k.pow(n as u32);
    (0..total).map(move |mut code| {
        let mut labels = vec![0; n];
        for slot in labels.iter_mut() {
            *slot = code % k;
            code /= k;
        }
        labels
    })
}

/// Highest-ELBO hard object partition of a single-view, single-feature
/// cluster model, found by scoring every labeling.
pub fn brute_force_partition(dataset: &Dataset, k: usize) -> (Vec<usize>, f64) {
    let config = TruncationConfig::with_truncation(1, 1, k);
    let problem = Problem::new(dataset, &config).expect("valid config");
    let features: Vec<Vec<FeatureAssignment>> = dataset
        .families
        .iter()
        .map(|f| {
            vec![
                FeatureAssignment {
                    view: 0,
                    feature_cluster: 0
                };
                f.n_features()
            ]
        })
        .collect();
    let mut best = (Vec::new(), f64::NEG_INFINITY);
    for labels in all_labelings(dataset.n_objects(), k) {
        let assignments = Assignments {
            features: features.clone(),
            objects: vec![labels.clone()],
        };
        let state = problem.state_from_assignments(&assignments).expect("in range");
        let elbo = problem.compute_elbo(&state);
        if elbo > best.1 {
            best = (labels, elbo);
        }
    }
    best
}

/// Whether two labelings describe the same partition.
pub fn same_partition(a: &[usize], b: &[usize]) -> bool {
    a.len() == b.len()
        && (0..a.len()).all(|i| (0..a.len()).all(|j| (a[i] == a[j]) == (b[i] == b[j])))
}

pub fn quick_options(restarts: usize, seed: u64) -> FitOptions {
    FitOptions {
        restarts,
        base_seed: seed,
        ..FitOptions::default()
    }
}
