use std::cmp::Ordering;

use rayon::prelude::*;

use super::{mode, FitMode, FitOptions, Problem, VariationalState};
use crate::error::{Error, Result};
use crate::model::{Assignments, Dataset, FeatureAssignment, TruncationConfig};

/// Outcome of one restart, or the best of several.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusteringResult {
    pub assignments: Assignments,
    pub elbo: f64,
    /// Bound after initialization followed by one entry per iteration.
    pub elbo_trace: Vec<f64>,
    pub active_views: usize,
    /// Nonempty MAP object clusters, one entry per truncated view.
    pub active_object_clusters: Vec<usize>,
    pub seed: u64,
    pub iterations: usize,
    pub converged: bool,
    pub mode: FitMode,
}

impl ClusteringResult {
    /// Object partitions of the views that hold at least one feature.
    pub fn active_object_partitions(&self) -> Vec<&[usize]> {
        self.assignments
            .active_views()
            .into_iter()
            .map(|v| self.assignments.objects[v].as_slice())
            .collect()
    }
}

fn argmax_first(values: impl Iterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (idx, x) in values.enumerate() {
        if x > best_val {
            best = idx;
            best_val = x;
        }
    }
    best
}

/// MAP memberships; ties go to the lowest (v, g) or k.
pub fn map_assignments(state: &VariationalState) -> Assignments {
    let (nv, n, nk) = state.eta.dim();
    let features = state
        .tau
        .iter()
        .map(|t| {
            let (_, d, ng) = t.dim();
            (0..d)
                .map(|j| {
                    let flat = argmax_first((0..nv * ng).map(|c| t[[c / ng, j, c % ng]]));
                    FeatureAssignment {
                        view: flat / ng,
                        feature_cluster: flat % ng,
                    }
                })
                .collect()
        })
        .collect();
    let objects = (0..nv)
        .map(|v| (0..n).map(|i| argmax_first((0..nk).map(|k| state.eta[[v, i, k]]))).collect())
        .collect();
    Assignments { features, objects }
}

impl Problem<'_> {
    /// One restart of variational Bayes EM from the seeded random start.
    ///
    /// Each iteration updates block posteriors, then view, feature and object
    /// sticks, then τ, then η, and records the bound. With `opts.reorder` a
    /// size-sorted relabelling replaces the state whenever it scores higher.
    /// Stops once the relative
    /// change of the bound drops below `opts.tol` or after `opts.max_iters`.
    pub fn fit_single(&self, seed: u64, opts: &FitOptions) -> Result<ClusteringResult> {
        let state = self.init_state_with(seed, opts.init)?;
        self.fit_from_state(state, seed, opts)
    }

    /// Runs the iterations of [`Problem::fit_single`] from a given state;
    /// `seed` is only recorded in the result and in errors.
    pub fn fit_from_state(&self, mut state: VariationalState, seed: u64, opts: &FitOptions) -> Result<ClusteringResult> {
        let non_finite = |iteration, what| Error::NonFinite { seed, iteration, what };
        let mut stats = {
            let proj = self.feature_projections(&state);
            self.stats_from_projections(&state, &proj)
        };
        let initial = self.elbo_terms_with_stats(&state, &stats).total();
        if !initial.is_finite() {
            return Err(non_finite(0, "ELBO"));
        }
        let mut trace = vec![initial];
        let mut converged = false;
        let mut iterations = 0;

        while iterations < opts.max_iters {
            iterations += 1;
            self.apply_block_stats(&mut state, &stats).map_err(|e| match e {
                Error::DegenerateVariance(_) => non_finite(iterations, "block posterior"),
                other => other,
            })?;
            self.update_view_sticks(&mut state);
            self.update_feature_sticks(&mut state);
            self.update_object_sticks(&mut state);
            self.update_feature_responsibilities(&mut state);
            if !state.tau.iter().all(|t| t.iter().all(|x| x.is_finite())) {
                return Err(non_finite(iterations, "feature responsibilities"));
            }
            let proj = self.feature_projections(&state);
            self.update_object_responsibilities_with(&mut state, &proj);
            if !state.eta.iter().all(|x| x.is_finite()) {
                return Err(non_finite(iterations, "object responsibilities"));
            }
            stats = self.stats_from_projections(&state, &proj);
            let mut elbo = self.elbo_terms_with_stats(&state, &stats).total();
            if !elbo.is_finite() {
                return Err(non_finite(iterations, "ELBO"));
            }
            if opts.reorder {
                if let Some(sorted) = self.sorted_by_size(&state) {
                    let sorted_stats = self.stats_from_projections(&sorted, &self.feature_projections(&sorted));
                    let sorted_elbo = self.elbo_terms_with_stats(&sorted, &sorted_stats).total();
                    if sorted_elbo > elbo {
                        state = sorted;
                        stats = sorted_stats;
                        elbo = sorted_elbo;
                    }
                }
            }
            let prev = *trace.last().expect("trace starts non-empty");
            trace.push(elbo);
            if ((elbo - prev) / prev.abs().max(f64::MIN_POSITIVE)).abs() < opts.tol {
                converged = true;
                break;
            }
        }

        let assignments = map_assignments(&state);
        let active_views = assignments.active_views().len();
        let active_object_clusters = assignments
            .objects
            .iter()
            .map(|labels| {
                let mut seen = vec![false; self.config.object_clusters];
                labels.iter().for_each(|&k| seen[k] = true);
                seen.iter().filter(|&&s| s).count()
            })
            .collect();
        Ok(ClusteringResult {
            assignments,
            elbo: *trace.last().expect("non-empty"),
            elbo_trace: trace,
            active_views,
            active_object_clusters,
            seed,
            iterations,
            converged,
            mode: mode(&self.config),
        })
    }
}

/// Best-of-`opts.restarts` fit with seeds `base_seed .. base_seed + S`.
///
/// Restarts run on a pool of `opts.threads` workers. The winner is the
/// largest final ELBO, ties broken by the lower seed, so the result does not
/// depend on the thread count. Restarts that hit a non-finite value are
/// dropped; if all of them fail the individual errors are returned.
pub fn fit(dataset: &Dataset, config: &TruncationConfig, opts: &FitOptions) -> Result<ClusteringResult> {
    if opts.restarts == 0 {
        return Err(Error::InvalidConfig("need at least one restart".into()));
    }
    if !(opts.tol >= 0.0) {
        return Err(Error::InvalidConfig(format!("tolerance must be nonnegative, got {}", opts.tol)));
    }
    opts.init.validate()?;
    let violations = dataset.validate();
    if !violations.is_empty() {
        return Err(Error::InvalidDataset(violations));
    }
    let problem = Problem::new(dataset, config)?;
    let seeds: Vec<u64> = (0..opts.restarts as u64).map(|s| opts.base_seed.wrapping_add(s)).collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.threads.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let runs: Vec<Result<ClusteringResult>> =
        pool.install(|| seeds.par_iter().map(|&seed| problem.fit_single(seed, opts)).collect());

    let mut best: Option<ClusteringResult> = None;
    let mut failures = Vec::new();
    for run in runs {
        match run {
            Ok(r) => {
                let better = match &best {
                    None => true,
                    Some(b) => match r.elbo.total_cmp(&b.elbo) {
                        Ordering::Greater => true,
                        Ordering::Equal => r.seed < b.seed,
                        Ordering::Less => false,
                    },
                };
                if better {
                    best = Some(r);
                }
            }
            Err(e) => failures.push(e),
        }
    }
    best.ok_or(Error::AllRestartsFailed(failures))
}
