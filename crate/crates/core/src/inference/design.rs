use ndarray::{s, Array2};

use crate::model::{CellValues, FamilyMatrix, FeatureFamily};
use crate::observation::{channel_count, poisson_base};
use crate::special::ln_multinomial_coefficient;

/// Per-family φ channels, each an `n x d` matrix that is zero on masked
/// cells, plus the summed base term over observed cells.
#[derive(Debug, Clone)]
pub(crate) struct Design {
    pub family: FeatureFamily,
    pub channels: Vec<Array2<f64>>,
    pub base_total: f64,
}

impl Design {
    pub fn new(fam: &FamilyMatrix) -> Self {
        let (n, d) = fam.values.shape();
        let p = channel_count(fam.family);
        let mut channels = vec![Array2::<f64>::zeros((n, d)); p];
        let mut base_total = 0.0;
        for i in 0..n {
            for j in 0..d {
                if !fam.observed[[i, j]] {
                    continue;
                }
                match (&fam.values, fam.family) {
                    (CellValues::Real(x), _) => {
                        let x = x[[i, j]];
                        channels[0][[i, j]] = 1.0;
                        channels[1][[i, j]] = x;
                        channels[2][[i, j]] = x * x;
                    }
                    (CellValues::Integer(x), FeatureFamily::Poisson) => {
                        let x = x[[i, j]] as u64;
                        channels[0][[i, j]] = 1.0;
                        channels[1][[i, j]] = x as f64;
                        base_total += poisson_base(x);
                    }
                    (CellValues::Integer(x), _) => {
                        channels[x[[i, j]] as usize][[i, j]] = 1.0;
                    }
                    (CellValues::Counts(x), _) => {
                        let counts: Vec<u64> = x.slice(s![i, j, ..]).iter().map(|&c| c as u64).collect();
                        channels[0][[i, j]] = 1.0;
                        for (h, &c) in counts.iter().enumerate() {
                            channels[h + 1][[i, j]] = c as f64;
                        }
                        base_total += ln_multinomial_coefficient(&counts);
                    }
                }
            }
        }
        Design {
            family: fam.family,
            channels,
            base_total,
        }
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn n_features(&self) -> usize {
        self.channels[0].ncols()
    }
}
