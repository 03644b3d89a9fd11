//! Synthetic environments with forking futures.

mod blockage;
mod roundabout;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rng::{StreamDomain, StreamRng};
use crate::trajectory::{Bounds, SeriesSample};

pub use blockage::{BlockageChannelConfig, Obstacle, PathProfile};
pub use roundabout::RoundaboutConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorConfig {
    Roundabout(RoundaboutConfig),
    BlockageChannel(BlockageChannelConfig),
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        match self {
            GeneratorConfig::Roundabout(c) => c.validate(),
            GeneratorConfig::BlockageChannel(c) => c.validate(),
        }
    }

    pub fn memory(&self) -> usize {
        match self {
            GeneratorConfig::Roundabout(c) => c.memory,
            GeneratorConfig::BlockageChannel(c) => c.memory,
        }
    }

    pub fn horizon(&self) -> usize {
        match self {
            GeneratorConfig::Roundabout(c) => c.horizon,
            GeneratorConfig::BlockageChannel(c) => c.horizon,
        }
    }

    pub fn bounds(&self) -> Bounds {
        match self {
            GeneratorConfig::Roundabout(c) => c.bounds,
            GeneratorConfig::BlockageChannel(c) => c.bounds(),
        }
    }

    pub fn sample(&self, rng: &mut StreamRng) -> Result<SeriesSample> {
        match self {
            GeneratorConfig::Roundabout(c) => Ok(c.sample_with_exit(rng).0),
            GeneratorConfig::BlockageChannel(c) => Ok(c.sample_with_blockage(rng)?.0),
        }
    }
}

/// Item `i` of a dataset drawn with `seed`.
pub fn gen_item(generator: &GeneratorConfig, seed: u64, index: u64) -> Result<SeriesSample> {
    generator.sample(&mut StreamRng::new(seed, StreamDomain::Dataset, index))
}

/// `n` independent series; item `i` uses the dataset stream `i`, so the
/// output does not depend on the number of worker threads.
pub fn gen_dataset(generator: &GeneratorConfig, n: usize, seed: u64) -> Result<Vec<SeriesSample>> {
    if n == 0 {
        return Err(invalid("dataset size must be at least 1"));
    }
    generator.validate()?;
    (0..n as u64).into_par_iter().map(|i| gen_item(generator, seed, i)).collect()
}
