//! Nonparametric bootstrap covariance of the free index coordinates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::pipeline::{run_pipeline, PipelineConfig};
use crate::data::ObservedTriple;
use crate::error::{Error, Result};
use crate::linalg::sample_covariance;

/// Source of bootstrap index draws. Replicate `k` must depend only on `k`
/// (and the resampler's own state), never on scheduling.
pub trait Resampler: Sync {
    fn indices(&self, replicate: usize, n: usize) -> Vec<usize>;
}

/// Draws with replacement from ChaCha8 stream `k` of the master seed.
#[derive(Debug, Clone, Copy)]
pub struct ChaChaResampler {
    pub seed: u64,
}

impl Resampler for ChaChaResampler {
    fn indices(&self, replicate: usize, n: usize) -> Vec<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(replicate as u64);
        (0..n).map(|_| rng.gen_range(0..n)).collect()
    }
}

/// Covariance of `beta_hat.free` over `b` bootstrap replicates of the full
/// pipeline. Fails when more than 20% of the replicates fail.
pub fn bootstrap_covariance(
    data: &[ObservedTriple],
    cfg: &PipelineConfig,
    b: usize,
    resampler: &dyn Resampler,
) -> Result<Vec<Vec<f64>>> {
    if b < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 bootstrap replicates, got {b}")));
    }
    let n = data.len();
    let results: Vec<Result<Vec<f64>>> = (0..b)
        .into_par_iter()
        .map(|k| {
            let sample: Vec<ObservedTriple> = resampler.indices(k, n).into_iter().map(|i| data[i].clone()).collect();
            run_pipeline(&sample, cfg).map(|fit| fit.selection.fit.beta_hat.free)
        })
        .collect();
    let failed = results.iter().filter(|r| r.is_err()).count();
    if failed as f64 > 0.2 * b as f64 || b - failed < 2 {
        return Err(Error::ReplicateFailure { failed, total: b });
    }
    if failed > 0 {
        log::warn!("bootstrap: {failed} of {b} replicates failed");
    }
    let estimates: Vec<Vec<f64>> = results.into_iter().filter_map(Result::ok).collect();
    Ok(sample_covariance(&estimates))
}
