//! Block-constant latent ratings and the BSC → erasure observation channel.
//!
//! Users and items are split into contiguous clusters of size `k`. Every
//! (row cluster, column cluster) block of the latent matrix carries one fair coin.
//! Observations flip each latent bit with probability `p` and then erase it with
//! probability `ε = 1 − c / n^α`.

use rand::Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{ObservedMatrix, RowBuilder};
use crate::seed::{derive_seed, rng_from_seed, stream};

/// Below this observation probability erasures are drawn by geometric skipping
/// instead of one uniform per entry.
const SKIP_SAMPLING_BELOW: f64 = 0.1;

/// Generative parameters `(n, k, p, c, α)`.
///
/// The matrix is `n_rows × n_cols` (square by default). `n_cols` plays the role of
/// `n` in the erasure probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub n_rows: usize,
    pub n_cols: usize,
    /// Cluster side length, shared by row and column clusters.
    pub k: usize,
    /// BSC crossover probability.
    pub p: f64,
    /// Erasure scale constant.
    pub c: f64,
    /// Erasure exponent.
    pub alpha: f64,
}

impl ModelParams {
    /// Square `n × n` model. Validates the parameters.
    pub fn square(n: usize, k: usize, p: f64, c: f64, alpha: f64) -> Result<Self> {
        Self::rectangular(n, n, k, p, c, alpha)
    }

    pub fn rectangular(n_rows: usize, n_cols: usize, k: usize, p: f64, c: f64, alpha: f64) -> Result<Self> {
        let params = ModelParams {
            n_rows,
            n_cols,
            k,
            p,
            c,
            alpha,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_rows == 0 || self.n_cols == 0 {
            return Err(Error::Parameter("matrix dimensions must be positive".into()));
        }
        if self.k == 0 || !self.n_rows.is_multiple_of(self.k) || !self.n_cols.is_multiple_of(self.k) {
            return Err(Error::Parameter(format!(
                "cluster size k={} must divide n_rows={} and n_cols={}",
                self.k, self.n_rows, self.n_cols
            )));
        }
        if !(0.0..0.5).contains(&self.p) {
            return Err(Error::Parameter(format!("BSC crossover p={} must lie in [0, 1/2)", self.p)));
        }
        erasure_prob(self.n_cols, self.c, self.alpha)?;
        Ok(())
    }

    /// `n` as used in the asymptotic formulas.
    pub fn n(&self) -> usize {
        self.n_cols
    }

    pub fn row_clusters(&self) -> usize {
        self.n_rows / self.k
    }

    pub fn col_clusters(&self) -> usize {
        self.n_cols / self.k
    }

    pub fn erasure_prob(&self) -> Result<f64> {
        erasure_prob(self.n_cols, self.c, self.alpha)
    }

    /// Probability that an entry survives the erasure channel, `c / n^α`.
    pub fn observation_prob(&self) -> Result<f64> {
        Ok(1.0 - self.erasure_prob()?)
    }

    /// `γ = α − log_n k`.
    pub fn gamma(&self) -> f64 {
        crate::theory::gamma_of(self.n_cols, self.k, self.alpha)
    }

    pub fn with_alpha(self, alpha: f64) -> Result<Self> {
        let p = ModelParams { alpha, ..self };
        p.validate()?;
        Ok(p)
    }
}

/// `ε = 1 − c / n^α`. Fails when `c / n^α > 1` or the inputs are not finite.
pub fn erasure_prob(n: usize, c: f64, alpha: f64) -> Result<f64> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::Parameter(format!("erasure scale c={c} must be positive")));
    }
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::Parameter(format!("erasure exponent alpha={alpha} must be >= 0")));
    }
    let keep = c / (n as f64).powf(alpha);
    if keep > 1.0 {
        return Err(Error::Parameter(format!(
            "c/n^alpha = {keep} exceeds 1, erasure probability would be negative"
        )));
    }
    Ok(1.0 - keep)
}

/// Hidden state of the generator: one fair bit per cluster block plus the partitions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatentModel {
    row_clusters: usize,
    col_clusters: usize,
    /// Row-major `row_clusters × col_clusters`.
    cluster_values: Vec<bool>,
    row_partition: Vec<usize>,
    col_partition: Vec<usize>,
}

impl LatentModel {
    /// Latent model with canonical contiguous partitions.
    pub fn from_cluster_values(k: usize, row_clusters: usize, col_clusters: usize, values: Vec<bool>) -> Result<Self> {
        if values.len() != row_clusters * col_clusters {
            return Err(Error::Parameter("cluster value grid has the wrong size".into()));
        }
        if k == 0 {
            return Err(Error::Parameter("cluster size must be positive".into()));
        }
        Ok(LatentModel {
            row_clusters,
            col_clusters,
            cluster_values: values,
            row_partition: (0..row_clusters * k).map(|u| u / k).collect(),
            col_partition: (0..col_clusters * k).map(|v| v / k).collect(),
        })
    }

    pub fn n_rows(&self) -> usize {
        self.row_partition.len()
    }

    pub fn n_cols(&self) -> usize {
        self.col_partition.len()
    }

    pub fn row_clusters(&self) -> usize {
        self.row_clusters
    }

    pub fn col_clusters(&self) -> usize {
        self.col_clusters
    }

    pub fn row_partition(&self) -> &[usize] {
        &self.row_partition
    }

    pub fn col_partition(&self) -> &[usize] {
        &self.col_partition
    }

    pub fn cluster_value(&self, row_cluster: usize, col_cluster: usize) -> bool {
        self.cluster_values[row_cluster * self.col_clusters + col_cluster]
    }

    /// `X(u, v)`. Panics when out of range.
    pub fn value(&self, user: usize, item: usize) -> bool {
        self.cluster_value(self.row_partition[user], self.col_partition[item])
    }

    /// True when row `user` of the latent matrix contains no 1.
    pub fn row_all_zero(&self, user: usize) -> bool {
        let a = self.row_partition[user];
        (0..self.col_clusters).all(|b| !self.cluster_value(a, b))
    }
}

/// Draws the cluster values i.i.d. Bernoulli(1/2).
pub fn generate_latent(params: &ModelParams, seed: u64) -> Result<LatentModel> {
    params.validate()?;
    let (rc, cc) = (params.row_clusters(), params.col_clusters());
    let mut rng = rng_from_seed(derive_seed(seed, stream::CLUSTER_VALUES));
    let values = (0..rc * cc).map(|_| rng.random_bool(0.5)).collect();
    LatentModel::from_cluster_values(params.k, rc, cc, values)
}

/// Passes the latent matrix through BSC(p) and then the erasure channel.
///
/// Erasures and flips use separate streams derived from `seed`, so the erasure
/// pattern does not depend on `p`.
pub fn apply_channels(latent: &LatentModel, params: &ModelParams, seed: u64) -> Result<ObservedMatrix> {
    params.validate()?;
    if latent.n_rows() != params.n_rows || latent.n_cols() != params.n_cols {
        return Err(Error::Parameter("latent model does not match the parameters".into()));
    }
    let keep = params.observation_prob()?;
    let (n_rows, n_cols) = (params.n_rows, params.n_cols);
    let mut erase_rng = rng_from_seed(derive_seed(seed, stream::ERASURES));
    let mut flip_rng = rng_from_seed(derive_seed(seed, stream::BSC_FLIPS));
    let p = params.p;
    let expected = (keep * (n_rows * n_cols) as f64) as usize;
    let mut builder = RowBuilder::with_capacity(n_rows, n_cols, expected + expected / 16 + 16);

    let mut emit = |builder: &mut RowBuilder, u: usize, v: usize| {
        let mut bit = latent.value(u, v);
        if p > 0.0 && flip_rng.random_bool(p) {
            bit = !bit;
        }
        builder.push(v, bit);
    };

    if keep >= SKIP_SAMPLING_BELOW {
        for u in 0..n_rows {
            for v in 0..n_cols {
                if erase_rng.random::<f64>() < keep {
                    emit(&mut builder, u, v);
                }
            }
            builder.end_row();
        }
    } else {
        // Gaps between consecutive observed entries in row-major order are
        // Geometric(keep) numbers of erasures.
        let gaps = Geometric::new(keep).map_err(|e| Error::Parameter(e.to_string()))?;
        let total = (n_rows as u64) * (n_cols as u64);
        let mut pos: u64 = gaps.sample(&mut erase_rng);
        while pos < total {
            let u = (pos / n_cols as u64) as usize;
            while builder.current_row() < u {
                builder.end_row();
            }
            emit(&mut builder, u, (pos % n_cols as u64) as usize);
            pos = pos.saturating_add(1).saturating_add(gaps.sample(&mut erase_rng));
        }
    }
    Ok(builder.finish())
}

/// Latent model and observation for one seed.
pub fn generate(params: &ModelParams, seed: u64) -> Result<(LatentModel, ObservedMatrix)> {
    let latent = generate_latent(params, seed)?;
    let y = apply_channels(&latent, params, derive_seed(seed, stream::CHANNELS))?;
    Ok((latent, y))
}
