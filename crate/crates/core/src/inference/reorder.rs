use ndarray::{s, Axis};

use super::{Problem, VariationalState};

/// Indices sorted by decreasing mass; ties keep the lower index first.
fn order_by_mass(masses: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..masses.len()).collect();
    idx.sort_by(|&a, &b| masses[b].total_cmp(&masses[a]).then(a.cmp(&b)));
    idx
}

fn is_identity(order: &[usize]) -> bool {
    order.iter().enumerate().all(|(i, &o)| i == o)
}

impl Problem<'_> {
    /// Relabels views, feature clusters and object clusters so that each
    /// sequence is sorted by expected size, largest first, then refits the
    /// sticks. Returns `None` when every sequence is already sorted.
    ///
    /// Responsibilities and block posteriors move together, so the data
    /// term and the entropies are unchanged; only the stick terms differ.
    pub fn sorted_by_size(&self, state: &VariationalState) -> Option<VariationalState> {
        let nv = self.config.views;
        let mut view_mass = vec![0.0; nv];
        for t in &state.tau {
            for (v, mass) in view_mass.iter_mut().enumerate() {
                *mass += t.index_axis(Axis(0), v).sum();
            }
        }
        let views = order_by_mass(&view_mass);
        let objects: Vec<Vec<usize>> = views
            .iter()
            .map(|&v| order_by_mass(&state.eta.index_axis(Axis(0), v).sum_axis(Axis(0)).to_vec()))
            .collect();
        let features: Vec<Vec<Vec<usize>>> = state
            .tau
            .iter()
            .map(|t| {
                views
                    .iter()
                    .map(|&v| order_by_mass(&t.index_axis(Axis(0), v).sum_axis(Axis(0)).to_vec()))
                    .collect()
            })
            .collect();
        let unchanged = is_identity(&views)
            && objects.iter().all(|o| is_identity(o))
            && features.iter().flatten().all(|o| is_identity(o));
        if unchanged {
            return None;
        }

        let mut next = state.clone();
        for (new_v, &old_v) in views.iter().enumerate() {
            let ko = &objects[new_v];
            for (new_k, &old_k) in ko.iter().enumerate() {
                next.eta
                    .slice_mut(s![new_v, .., new_k])
                    .assign(&state.eta.slice(s![old_v, .., old_k]));
            }
            for m in 0..state.tau.len() {
                let go = &features[m][new_v];
                for (new_g, &old_g) in go.iter().enumerate() {
                    next.tau[m]
                        .slice_mut(s![new_v, .., new_g])
                        .assign(&state.tau[m].slice(s![old_v, .., old_g]));
                    for (new_k, &old_k) in ko.iter().enumerate() {
                        next.block_posteriors[m][[new_v, new_g, new_k]] =
                            state.block_posteriors[m][[old_v, old_g, old_k]].clone();
                    }
                }
            }
        }
        self.update_view_sticks(&mut next);
        self.update_feature_sticks(&mut next);
        self.update_object_sticks(&mut next);
        Some(next)
    }
}
