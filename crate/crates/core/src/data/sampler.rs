//! Class-balanced batch sampling.
//!
//! Every batch draws the same number of instances per class, uniformly with
//! replacement within the class; the `batch_size mod n_classes` leftover
//! slots rotate round-robin across batches.

use super::Instance;
use crate::error::{Error, Result};
use rand::Rng;

pub struct BalancedSampler {
    /// Instance indices grouped by gold class.
    pools: Vec<Vec<usize>>,
    batch_size: usize,
    /// Round-robin cursor for remainder slots; persists across batches.
    rotate: usize,
}

impl BalancedSampler {
    /// Group instances by class. An entirely empty class is a configuration
    /// error: balanced sampling cannot draw from it.
    pub fn new(instances: &[Instance], batch_size: usize) -> Result<Self> {
        if batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        let mut pools = vec![Vec::new(); 3];
        for (i, inst) in instances.iter().enumerate() {
            pools[inst.gold.class_index()].push(i);
        }
        for (c, pool) in pools.iter().enumerate() {
            if pool.is_empty() {
                return Err(Error::Config(format!(
                    "class {:?} has no training instances; balanced batches need all classes",
                    super::Polarity::from_class_index(c).unwrap().as_str()
                )));
            }
        }
        Ok(BalancedSampler { pools, batch_size, rotate: 0 })
    }

    pub fn n_classes(&self) -> usize {
        self.pools.len()
    }

    /// Per-class quota for the next batch.
    fn quotas(&mut self) -> Vec<usize> {
        let k = self.pools.len();
        let base = self.batch_size / k;
        let rem = self.batch_size % k;
        let mut quotas = vec![base; k];
        for extra in 0..rem {
            quotas[(self.rotate + extra) % k] += 1;
        }
        self.rotate = (self.rotate + rem) % k;
        quotas
    }

    /// Sample the next batch of instance indices.
    pub fn batch(&mut self, rng: &mut impl Rng) -> Vec<usize> {
        let quotas = self.quotas();
        let mut out = Vec::with_capacity(self.batch_size);
        for (pool, &q) in self.pools.iter().zip(&quotas) {
            for _ in 0..q {
                out.push(pool[rng.gen_range(0..pool.len())]);
            }
        }
        out
    }
}

/// Number of batches one epoch covers: ceil(|train| / batch_size).
pub fn batches_per_epoch(n_instances: usize, batch_size: usize) -> usize {
    n_instances.div_ceil(batch_size)
}
