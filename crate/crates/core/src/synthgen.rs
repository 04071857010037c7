//! Synthetic multi-view data with known ground truth, plus uniform
//! missing-value injection.
//!
//! A [`Scenario`] lists, for every view, the number of object and feature
//! clusters and one block parameter table per family. Tables are indexed
//! `table[g][k]` by feature cluster `g` and object cluster `k`.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Assignments, Dataset, FamilyMatrix, FeatureAssignment};

/// Block parameters for one view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViewSpec {
    pub object_clusters: usize,
    pub feature_clusters: usize,
    /// Gaussian block means; every block shares [`Scenario::gaussian_sd`].
    pub gaussian_means: Vec<Vec<f64>>,
    pub poisson_rates: Vec<Vec<f64>>,
    /// Probability of category 1 in a binary categorical block.
    pub category_one_probs: Vec<Vec<f64>>,
}

/// A full generative setting for [`generate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub n_objects: usize,
    /// Features each view receives from each of the three families.
    pub n_features_per_view_per_family: usize,
    pub gaussian_sd: f64,
    pub missing_ratio: f64,
    pub seed: u64,
    pub views: Vec<ViewSpec>,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_objects == 0 || self.n_features_per_view_per_family == 0 {
            return bad("scenario needs at least one object and one feature per view".into());
        }
        if self.views.is_empty() {
            return bad("scenario needs at least one view".into());
        }
        if !(0.0..1.0).contains(&self.missing_ratio) {
            return bad(format!("missing ratio must lie in [0, 1), got {}", self.missing_ratio));
        }
        if !(self.gaussian_sd > 0.0 && self.gaussian_sd.is_finite()) {
            return bad(format!("gaussian_sd must be positive, got {}", self.gaussian_sd));
        }
        for (v, spec) in self.views.iter().enumerate() {
            let tables = [
                ("gaussian_means", &spec.gaussian_means),
                ("poisson_rates", &spec.poisson_rates),
                ("category_one_probs", &spec.category_one_probs),
            ];
            for (name, table) in tables {
                let shape_ok = table.len() == spec.feature_clusters
                    && table.iter().all(|row| row.len() == spec.object_clusters);
                if !shape_ok || spec.feature_clusters == 0 || spec.object_clusters == 0 {
                    return bad(format!(
                        "view {v}: {name} must be {} x {}",
                        spec.feature_clusters, spec.object_clusters
                    ));
                }
            }
            let flat = |t: &Vec<Vec<f64>>| t.iter().flatten().copied().collect::<Vec<_>>();
            if flat(&spec.gaussian_means).iter().any(|m| !m.is_finite()) {
                return bad(format!("view {v}: Gaussian means must be finite"));
            }
            if flat(&spec.poisson_rates).iter().any(|r| !(*r > 0.0 && r.is_finite())) {
                return bad(format!("view {v}: Poisson rates must be positive"));
            }
            if flat(&spec.category_one_probs).iter().any(|p| !(0.0..=1.0).contains(p)) {
                return bad(format!("view {v}: probabilities must lie in [0, 1]"));
            }
        }
        Ok(())
    }
}

/// Builds a `G x K` table from per-object-cluster columns given as
/// `(top, bottom)` pairs.
fn from_columns(columns: &[(f64, f64)]) -> Vec<Vec<f64>> {
    vec![
        columns.iter().map(|c| c.0).collect(),
        columns.iter().map(|c| c.1).collect(),
    ]
}

/// Three views with 2, 3 and 4 object clusters and two feature clusters
/// each, holding `n_features` Gaussian, Poisson and binary categorical
/// features per view.
pub fn benchmark_scenario(n_objects: usize, n_features: usize, missing_ratio: f64, seed: u64) -> Scenario {
    let gaussian = [
        from_columns(&[(0.0, 4.0), (1.0, 3.0)]),
        from_columns(&[(0.0, 5.0), (1.0, 4.0), (2.0, 3.0)]),
        from_columns(&[(0.0, 6.0), (1.0, 5.0), (2.0, 4.0), (3.0, 3.0)]),
    ];
    let poisson = [
        from_columns(&[(1.0, 2.0), (2.0, 1.0)]),
        from_columns(&[(1.0, 3.0), (2.0, 2.0), (3.0, 1.0)]),
        from_columns(&[(1.0, 4.0), (2.0, 3.0), (3.0, 2.0), (4.0, 1.0)]),
    ];
    let categorical = [
        from_columns(&[(0.1, 0.9), (0.1, 0.9)]),
        from_columns(&[(0.1, 0.9), (0.5, 0.5), (0.9, 0.1)]),
        from_columns(&[(0.1, 0.9), (0.4, 0.6), (0.6, 0.4), (0.9, 0.1)]),
    ];
    let views = (0..3)
        .map(|v| ViewSpec {
            object_clusters: v + 2,
            feature_clusters: 2,
            gaussian_means: gaussian[v].clone(),
            poisson_rates: poisson[v].clone(),
            category_one_probs: categorical[v].clone(),
        })
        .collect();
    Scenario {
        n_objects,
        n_features_per_view_per_family: n_features,
        gaussian_sd: 1.0,
        missing_ratio,
        seed,
        views,
    }
}

/// Samples a dataset and its true assignments.
///
/// Each family's features are split evenly over the views in order. Within
/// a view, features get a uniform random feature cluster and objects a
/// uniform random object cluster. Missing cells are injected afterwards by
/// [`apply_missing`] with the scenario's ratio and seed.
pub fn generate(scenario: &Scenario) -> Result<(Dataset, Assignments)> {
    scenario.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let n = scenario.n_objects;
    let per_view = scenario.n_features_per_view_per_family;
    let nv = scenario.views.len();
    let d = per_view * nv;

    let objects: Vec<Vec<usize>> = scenario
        .views
        .iter()
        .map(|spec| (0..n).map(|_| rng.random_range(0..spec.object_clusters)).collect())
        .collect();

    let mut feature_truth = Vec::with_capacity(3);
    let draw_features = |rng: &mut ChaCha8Rng| -> Vec<FeatureAssignment> {
        (0..d)
            .map(|j| {
                let view = j / per_view;
                FeatureAssignment {
                    view,
                    feature_cluster: rng.random_range(0..scenario.views[view].feature_clusters),
                }
            })
            .collect()
    };

    let gauss_assign = draw_features(&mut rng);
    let mut gauss = Array2::<f64>::zeros((n, d));
    for (j, a) in gauss_assign.iter().enumerate() {
        let spec = &scenario.views[a.view];
        for i in 0..n {
            let mean = spec.gaussian_means[a.feature_cluster][objects[a.view][i]];
            let dist = Normal::new(mean, scenario.gaussian_sd).expect("validated sd");
            gauss[[i, j]] = dist.sample(&mut rng);
        }
    }
    feature_truth.push(gauss_assign);

    let pois_assign = draw_features(&mut rng);
    let mut pois = Array2::<i64>::zeros((n, d));
    for (j, a) in pois_assign.iter().enumerate() {
        let spec = &scenario.views[a.view];
        for i in 0..n {
            let rate = spec.poisson_rates[a.feature_cluster][objects[a.view][i]];
            let dist = Poisson::new(rate).expect("validated rate");
            pois[[i, j]] = dist.sample(&mut rng) as i64;
        }
    }
    feature_truth.push(pois_assign);

    let cat_assign = draw_features(&mut rng);
    let mut cat = Array2::<i64>::zeros((n, d));
    for (j, a) in cat_assign.iter().enumerate() {
        let spec = &scenario.views[a.view];
        for i in 0..n {
            let p = spec.category_one_probs[a.feature_cluster][objects[a.view][i]];
            cat[[i, j]] = i64::from(rng.random::<f64>() < p);
        }
    }
    feature_truth.push(cat_assign);

    let names = |prefix: &str| (0..d).map(|j| format!("{prefix}{j}")).collect::<Vec<_>>();
    let all = || Array2::from_elem((n, d), true);
    let dataset = Dataset::new(
        (0..n).map(|i| format!("obj{i}")).collect(),
        vec![
            FamilyMatrix::gaussian(gauss, all(), names("gauss")),
            FamilyMatrix::poisson(pois, all(), names("pois")),
            FamilyMatrix::categorical(2, cat, all(), names("cat")),
        ],
    );
    let dataset = apply_missing(&dataset, scenario.missing_ratio, scenario.seed)?;
    Ok((
        dataset,
        Assignments {
            features: feature_truth,
            objects,
        },
    ))
}

/// Masks `floor(ratio * total_cells)` currently observed cells chosen
/// uniformly without replacement, never hiding the last observed cell of a
/// feature. Cell values under new masks are kept.
pub fn apply_missing(dataset: &Dataset, ratio: f64, seed: u64) -> Result<Dataset> {
    if !(0.0..1.0).contains(&ratio) {
        return Err(Error::InvalidConfig(format!("missing ratio must lie in [0, 1), got {ratio}")));
    }
    let total: usize = dataset
        .families
        .iter()
        .map(|f| f.n_objects() * f.n_features())
        .sum();
    let requested = (ratio * total as f64).floor() as usize;
    let mut out = dataset.clone();
    if requested == 0 {
        return Ok(out);
    }

    let mut observed_left: Vec<Vec<usize>> = dataset
        .families
        .iter()
        .map(|f| {
            (0..f.n_features())
                .map(|j| f.observed.column(j).iter().filter(|&&o| o).count())
                .collect()
        })
        .collect();
    let available: usize = observed_left.iter().flatten().map(|&c| c.saturating_sub(1)).sum();
    if requested > available {
        return Err(Error::MissingRatioUnsatisfiable { requested, available });
    }

    let mut cells: Vec<(usize, usize, usize)> = Vec::with_capacity(total);
    for (m, f) in dataset.families.iter().enumerate() {
        for ((i, j), &o) in f.observed.indexed_iter() {
            if o {
                cells.push((m, i, j));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    cells.shuffle(&mut rng);

    let mut masked = 0;
    for (m, i, j) in cells {
        if masked == requested {
            break;
        }
        if observed_left[m][j] > 1 {
            observed_left[m][j] -= 1;
            out.families[m].observed[[i, j]] = false;
            masked += 1;
        }
    }
    debug_assert_eq!(masked, requested);
    Ok(out)
}

/// Number of masked cells over all families.
pub fn count_missing(dataset: &Dataset) -> usize {
    dataset
        .families
        .iter()
        .map(|f| f.observed.iter().filter(|&&o| !o).count())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::{match_views, Partition};
    use crate::model::CellValues;

    #[test]
    fn benchmark_tables_have_expected_blocks() {
        let s = benchmark_scenario(100, 50, 0.0, 1);
        assert_eq!(s.views.len(), 3);
        assert_eq!(s.views[1].gaussian_means, vec![vec![0.0, 1.0, 2.0], vec![5.0, 4.0, 3.0]]);
        assert_eq!(s.views[2].poisson_rates[0], vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.views[2].poisson_rates[1], vec![4.0, 3.0, 2.0, 1.0]);
        assert_eq!(s.views[0].category_one_probs, vec![vec![0.1, 0.1], vec![0.9, 0.9]]);
        for (v, spec) in s.views.iter().enumerate() {
            assert_eq!(spec.object_clusters, v + 2);
            assert_eq!(spec.feature_clusters, 2);
        }
        s.validate().unwrap();
    }

    #[test]
    fn generated_data_is_valid_and_deterministic() {
        let s = benchmark_scenario(30, 4, 0.1, 7);
        let (a, ta) = generate(&s).unwrap();
        let (b, tb) = generate(&s).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta, tb);
        assert!(a.validate().is_empty());
        assert_eq!(a.n_features(), 36);
        assert_eq!(count_missing(&a), (0.1 * 30.0 * 36.0) as usize);
        let (c, _) = generate(&benchmark_scenario(30, 4, 0.1, 8)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn truth_matches_itself() {
        let (_, truth) = generate(&benchmark_scenario(20, 3, 0.0, 3)).unwrap();
        let parts: Vec<Partition> = truth.objects.iter().map(|o| Partition::new(o.clone()).unwrap()).collect();
        assert_eq!(match_views(&parts, &parts).unwrap().mean, 1.0);
        assert_eq!(truth.view_sizes(), vec![9, 9, 9]);
    }

    #[test]
    fn gaussian_block_means_match_table() {
        let s = benchmark_scenario(100, 50, 0.0, 11);
        let (ds, truth) = generate(&s).unwrap();
        let CellValues::Real(x) = &ds.families[0].values else { panic!() };
        for (v, spec) in s.views.iter().enumerate() {
            for g in 0..2 {
                for k in 0..spec.object_clusters {
                    let mut sum = 0.0;
                    let mut cells = 0.0;
                    for (j, a) in truth.features[0].iter().enumerate() {
                        if a.view != v || a.feature_cluster != g {
                            continue;
                        }
                        for i in 0..100 {
                            if truth.objects[v][i] == k {
                                sum += x[[i, j]];
                                cells += 1.0;
                            }
                        }
                    }
                    if cells > 0.0 {
                        let mean = sum / cells;
                        let want = spec.gaussian_means[g][k];
                        assert!((mean - want).abs() < 3.0 / f64::sqrt(cells) + 1e-12, "v{v} g{g} k{k}");
                    }
                }
            }
        }
    }

    #[test]
    fn apply_missing_counts_and_preserves_values() {
        let (ds, _) = generate(&benchmark_scenario(100, 100 / 9 + 1, 0.0, 5)).unwrap();
        let unchanged = apply_missing(&ds, 0.0, 1).unwrap();
        assert_eq!(unchanged, ds);

        let n = 100;
        let d = 100;
        let g = FamilyMatrix::gaussian(
            Array2::from_shape_fn((n, d), |(i, j)| (i * d + j) as f64),
            Array2::from_elem((n, d), true),
            (0..d).map(|j| format!("x{j}")).collect(),
        );
        let ds = Dataset::new((0..n).map(|i| i.to_string()).collect(), vec![g]);
        let masked = apply_missing(&ds, 0.2, 9).unwrap();
        assert_eq!(count_missing(&masked), 2000);
        assert_eq!(masked.families[0].values, ds.families[0].values);
        assert!(masked.validate().is_empty());
    }

    #[test]
    fn apply_missing_rejects_impossible_ratios() {
        let g = FamilyMatrix::gaussian(
            Array2::zeros((2, 3)),
            Array2::from_elem((2, 3), true),
            vec!["a".into(), "b".into(), "c".into()],
        );
        let ds = Dataset::new(vec!["0".into(), "1".into()], vec![g]);
        assert!(matches!(
            apply_missing(&ds, 0.9, 0),
            Err(Error::MissingRatioUnsatisfiable {
                requested: 5,
                available: 3
            })
        ));
        assert!(apply_missing(&ds, 0.5, 0).is_ok());
        assert!(apply_missing(&ds, 1.0, 0).is_err());
    }

    #[test]
    fn invalid_scenarios() {
        let mut s = benchmark_scenario(10, 2, 0.0, 0);
        s.views[0].gaussian_means.pop();
        assert!(s.validate().is_err());
        let mut s = benchmark_scenario(10, 2, 0.0, 0);
        s.views[1].poisson_rates[0][0] = 0.0;
        assert!(s.validate().is_err());
        assert!(benchmark_scenario(10, 2, 1.0, 0).validate().is_err());
    }
}
