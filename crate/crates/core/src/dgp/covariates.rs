//! Synthetic stand-in for a real covariate cohort: correlated Gaussian
//! columns driven by a random low-rank factor, plus Bernoulli columns.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{rng_for, sigmoid};
use crate::data_model::CovariateTable;
use crate::error::{Error, Result};
use crate::io::round_significant;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCovariates {
    pub rows: usize,
    pub features: usize,
    /// Rank of the shared latent factor; 0 gives independent columns.
    pub factor_rank: usize,
    /// Fraction of columns that are 0/1.
    pub binary_fraction: f64,
    pub seed: u64,
}

impl SyntheticCovariates {
    pub const DEFAULT_ROWS: usize = 100_000;

    pub fn new(rows: usize, features: usize) -> Self {
        SyntheticCovariates {
            rows,
            features,
            factor_rank: 3,
            binary_fraction: 0.25,
            seed: 0,
        }
    }

    pub fn factor_rank(mut self, rank: usize) -> Self {
        self.factor_rank = rank;
        self
    }

    pub fn binary_fraction(mut self, fraction: f64) -> Self {
        self.binary_fraction = fraction;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Values are rounded to the precision `x.csv` is written with, so the
    /// in-memory table equals what a reader of the file sees.
    pub fn generate(&self) -> Result<CovariateTable> {
        if self.rows == 0 || self.features == 0 {
            return Err(Error::Invalid(
                "synthetic covariates need at least one row and one feature".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.binary_fraction) {
            return Err(Error::Invalid("binary_fraction must lie in [0, 1]".into()));
        }
        let mut rng: ChaCha8Rng = rng_for(&[self.seed, 0x636f_7661]);
        let p = self.features;
        let n_binary = (p as f64 * self.binary_fraction).floor() as usize;
        let rank = self.factor_rank;
        let load_scale = if rank > 0 { (1.0 / rank as f64).sqrt() } else { 0.0 };
        let loadings: Vec<f64> = (0..p * rank)
            .map(|_| load_scale * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let means: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();

        let mut values = Vec::with_capacity(self.rows * p);
        let mut factor = vec![0.0; rank];
        for _ in 0..self.rows {
            for f in factor.iter_mut() {
                *f = rng.sample(StandardNormal);
            }
            for j in 0..p {
                let shared: f64 = (0..rank).map(|k| loadings[j * rank + k] * factor[k]).sum();
                let noise: f64 = rng.sample(StandardNormal);
                let latent = shared + noise;
                let v = if j >= p - n_binary {
                    let prob = sigmoid(means[j] + latent);
                    (rng.random::<f64>() < prob) as u8 as f64
                } else {
                    means[j] + latent
                };
                values.push(round_significant(v));
            }
        }
        let width = self.rows.to_string().len();
        let sample_ids = (1..=self.rows).map(|i| format!("s{i:0width$}")).collect();
        let feature_names = (1..=p)
            .map(|j| {
                if j > p - n_binary {
                    format!("b{j}")
                } else {
                    format!("x{j}")
                }
            })
            .collect();
        CovariateTable::new(sample_ids, feature_names, values)
    }
}
