use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{
    Anchor, Forecaster, ForkingMixture, ForkingMixtureParams, GaussianAr, GaussianArParams, KnnBootstrap,
    MarkovChain,
};
use crate::error::Result;
use crate::generators::{gen_dataset, GeneratorConfig, RoundaboutConfig};
use crate::io::read_series_csv;
use crate::trajectory::Bounds;

/// Where a k-NN forecaster gets its training series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CorpusSource {
    /// Series CSV; relative paths resolve against the config directory.
    Csv { path: PathBuf },
    Generated { generator: GeneratorConfig, n: usize, seed: u64 },
}

/// Serializable description of a forecaster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelConfig {
    GaussianAr {
        params: GaussianArParams,
        horizon: usize,
        #[serde(default)]
        bounds: Option<Bounds>,
    },
    ForkingMixture {
        params: ForkingMixtureParams,
        #[serde(default)]
        bounds: Option<Bounds>,
    },
    /// Mixture with one branch per roundabout exit.
    RoundaboutBranches {
        generator: RoundaboutConfig,
        noise_std: f64,
    },
    Knn {
        corpus: CorpusSource,
        k: usize,
    },
    MarkovChain {
        values: Vec<f64>,
        transition: Vec<Vec<f64>>,
        horizon: usize,
    },
}

impl ModelConfig {
    pub fn build(&self) -> Result<Box<dyn Forecaster>> {
        self.build_in(Path::new("."))
    }

    /// Builds the forecaster, resolving relative corpus paths against `base`.
    pub fn build_in(&self, base: &Path) -> Result<Box<dyn Forecaster>> {
        Ok(match self {
            ModelConfig::GaussianAr { params, horizon, bounds } => {
                Box::new(GaussianAr::new(params.clone(), *horizon, *bounds)?)
            }
            ModelConfig::ForkingMixture { params, bounds } => Box::new(ForkingMixture::new(params.clone(), *bounds)?),
            ModelConfig::RoundaboutBranches { generator, noise_std } => {
                generator.validate()?;
                let mut params = generator.branch_mixture(*noise_std);
                params.anchor = Anchor::LinearFit;
                Box::new(ForkingMixture::new(params, Some(generator.bounds))?)
            }
            ModelConfig::Knn { corpus, k } => {
                let series = match corpus {
                    CorpusSource::Csv { path } => {
                        let file = std::fs::File::open(base.join(path))?;
                        read_series_csv(file)?
                    }
                    CorpusSource::Generated { generator, n, seed } => gen_dataset(generator, *n, *seed)?,
                };
                Box::new(KnnBootstrap::new(series, *k)?)
            }
            ModelConfig::MarkovChain { values, transition, horizon } => {
                Box::new(MarkovChain::new(values.clone(), transition.clone(), *horizon)?)
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Capability;

    #[test]
    fn json_round_trip_and_build() {
        let cfg = ModelConfig::RoundaboutBranches { generator: RoundaboutConfig::default(), noise_std: 0.03 };
        let text = serde_json::to_string(&cfg).unwrap();
        let back: ModelConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(cfg, back);
        let m = back.build().unwrap();
        assert_eq!(m.capability(), Capability::Explicit);
        assert_eq!(m.horizon(), 6);
    }

    #[test]
    fn generated_knn_corpus() {
        let cfg = ModelConfig::Knn {
            corpus: CorpusSource::Generated {
                generator: GeneratorConfig::Roundabout(RoundaboutConfig::default()),
                n: 50,
                seed: 1,
            },
            k: 5,
        };
        let m = cfg.build().unwrap();
        assert_eq!(m.capability(), Capability::Implicit);
        assert_eq!(m.memory(), 30);
    }

    #[test]
    fn missing_corpus_file_is_io_error() {
        let cfg = ModelConfig::Knn { corpus: CorpusSource::Csv { path: "no/such/file.csv".into() }, k: 1 };
        assert!(matches!(cfg.build(), Err(crate::Error::Io(_))));
    }

    #[test]
    fn markov_from_json() {
        let text = r#"{"kind":"markov_chain","values":[0.0,1.0],"transition":[[0.5,0.5],[0.1,0.9]],"horizon":3}"#;
        let cfg: ModelConfig = serde_json::from_str(text).unwrap();
        let m = cfg.build().unwrap();
        assert!(m.as_discrete().is_some());
    }
}
