use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{domain, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::model::GaussianModel;

const SHARDS: u64 = 64;

/// Sample moments of a transformed stream draw.
#[derive(Debug, Clone)]
pub struct MonteCarloMoments {
    pub draws: usize,
    pub mean: Vector,
    pub cov: Matrix,
    /// Standard error of each covariance entry.
    pub std_err: Matrix,
}

impl MonteCarloMoments {
    /// Largest `|cov − expected| / std_err` over all entries.
    pub fn max_z_score(&self, expected: &Matrix) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.cov.nrows() {
            for j in 0..self.cov.ncols() {
                let diff = (self.cov[(i, j)] - expected[(i, j)]).abs();
                let se = self.std_err[(i, j)].max(1e-300);
                worst = worst.max(diff / se);
            }
        }
        worst
    }
}

struct Accumulator {
    sum: Vec<f64>,
    prod: Vec<f64>,
    prod_sq: Vec<f64>,
}

impl Accumulator {
    fn new(m: usize) -> Self {
        Self { sum: vec![0.0; m], prod: vec![0.0; m * m], prod_sq: vec![0.0; m * m] }
    }

    fn add(&mut self, w: &Vector) {
        let m = w.len();
        for i in 0..m {
            self.sum[i] += w[i];
            for j in 0..m {
                let p = w[i] * w[j];
                self.prod[i * m + j] += p;
                self.prod_sq[i * m + j] += p * p;
            }
        }
    }

    fn merge(mut self, other: Self) -> Self {
        for (a, b) in self.sum.iter_mut().zip(other.sum) {
            *a += b;
        }
        for (a, b) in self.prod.iter_mut().zip(other.prod) {
            *a += b;
        }
        for (a, b) in self.prod_sq.iter_mut().zip(other.prod_sq) {
            *a += b;
        }
        self
    }
}

/// Simulate `draws` realizations of `(X, S̄_1, …, S̄_K, T_1, …, T_K)` for the
/// projections `blocks` (same ordering as
/// [`stream_joint_cov`](super::stream_joint_cov)), map each through
/// `transform`, and return the sample moments of the result.
///
/// Draws are split into fixed shards with their own generator streams and
/// reduced in shard order, so results depend only on `seed`.
pub fn monte_carlo_moments<F>(model: &GaussianModel, blocks: &[Matrix], draws: usize, seed: u64, transform: F) -> Result<MonteCarloMoments>
where
    F: Fn(&Vector) -> Vector + Sync,
{
    if draws < 2 || blocks.is_empty() {
        return Err(domain("need at least two draws and one round"));
    }
    let d = model.dim();
    let k = blocks.len();
    let n: usize = blocks.iter().map(|a| a.nrows()).sum();
    let raw_dim = d + k * d + n;
    let l_theta = linalg::cholesky(model.sigma_theta())?.l();
    let l_x = linalg::cholesky(model.sigma_x())?.l();
    let out_dim = transform(&Vector::zeros(raw_dim)).len();

    let per_shard = draws.div_ceil(SHARDS as usize);
    let shards: Vec<Accumulator> = (0..SHARDS)
        .into_par_iter()
        .map(|shard| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(shard);
            let count = per_shard.min(draws.saturating_sub(shard as usize * per_shard));
            let mut acc = Accumulator::new(out_dim);
            let mut raw = Vector::zeros(raw_dim);
            let mut normal = |len: usize| Vector::from_fn(len, |_, _| StandardNormal.sample(&mut rng));
            for _ in 0..count {
                let theta = &l_theta * normal(d);
                let x_test = &theta + &l_x * normal(d);
                raw.rows_mut(0, d).copy_from(&x_test);
                let mut total = Vector::zeros(d);
                let mut row = d + k * d;
                for (i, a) in blocks.iter().enumerate() {
                    total += &theta + &l_x * normal(d);
                    let mean = &total / (i + 1) as f64;
                    raw.rows_mut(d + i * d, d).copy_from(&mean);
                    if a.nrows() > 0 {
                        let t = a * &mean + normal(a.nrows());
                        raw.rows_mut(row, a.nrows()).copy_from(&t);
                        row += a.nrows();
                    }
                }
                acc.add(&transform(&raw));
            }
            acc
        })
        .collect();
    let acc = shards.into_iter().reduce(Accumulator::merge).expect("shards");

    let nf = draws as f64;
    let mean = Vector::from_fn(out_dim, |i, _| acc.sum[i] / nf);
    let cov = Matrix::from_fn(out_dim, out_dim, |i, j| acc.prod[i * out_dim + j] / nf - mean[i] * mean[j]);
    let std_err = Matrix::from_fn(out_dim, out_dim, |i, j| {
        let m2 = acc.prod[i * out_dim + j] / nf;
        let m4 = acc.prod_sq[i * out_dim + j] / nf;
        ((m4 - m2 * m2).max(0.0) / nf).sqrt()
    });
    Ok(MonteCarloMoments { draws, mean, cov, std_err })
}
