use rand::Rng;

use super::{check_past, Capability, Forecaster};
use crate::error::{invalid, Result};
use crate::rng::StreamRng;
use crate::trajectory::SeriesSample;

/// Implicit forecaster: returns the stored future of one of the `k` corpus
/// series whose past is closest (average absolute difference) to the query.
#[derive(Debug, Clone)]
pub struct KnnBootstrap {
    corpus: Vec<SeriesSample>,
    k: usize,
    memory: usize,
    horizon: usize,
}

impl KnnBootstrap {
    pub fn new(corpus: Vec<SeriesSample>, k: usize) -> Result<Self> {
        let first = corpus.first().ok_or_else(|| invalid("k-NN corpus is empty"))?;
        let (memory, horizon) = (first.memory(), first.horizon());
        if corpus.iter().any(|s| s.memory() != memory || s.horizon() != horizon) {
            return Err(invalid("k-NN corpus series must share past and future lengths"));
        }
        if k == 0 || k > corpus.len() {
            return Err(invalid(format!("k = {k} must lie in 1..={}", corpus.len())));
        }
        Ok(Self { corpus, k, memory, horizon })
    }

    /// Indices of the `k` nearest corpus pasts; ties go to the lower index.
    pub fn neighbors(&self, past: &[f64]) -> Result<Vec<usize>> {
        check_past(past, self.memory)?;
        let query = &past[past.len() - self.memory..];
        let mut scored: Vec<(f64, usize)> = self
            .corpus
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let d = s.past.iter().zip(query).map(|(a, b)| (a - b).abs()).sum::<f64>();
                (d, i)
            })
            .collect();
        scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        Ok(scored.into_iter().take(self.k).map(|(_, i)| i).collect())
    }

    pub fn corpus(&self) -> &[SeriesSample] {
        &self.corpus
    }
}

impl Forecaster for KnnBootstrap {
    fn capability(&self) -> Capability {
        Capability::Implicit
    }

    fn memory(&self) -> usize {
        self.memory
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn sample(&self, past: &[f64], rng: &mut StreamRng) -> Result<Vec<f64>> {
        let nn = self.neighbors(past)?;
        let pick = nn[rng.random_range(0..nn.len())];
        Ok(self.corpus[pick].future.clone())
    }

    fn sample_many(&self, past: &[f64], count: usize, rng: &mut StreamRng) -> Result<Vec<Vec<f64>>> {
        let nn = self.neighbors(past)?;
        Ok((0..count)
            .map(|_| self.corpus[nn[rng.random_range(0..nn.len())]].future.clone())
            .collect())
    }

    fn predictive_mean(&self, past: &[f64]) -> Result<Vec<f64>> {
        let nn = self.neighbors(past)?;
        let mut mean = vec![0.0; self.horizon];
        for &i in &nn {
            for (m, v) in mean.iter_mut().zip(&self.corpus[i].future) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= nn.len() as f64);
        Ok(mean)
    }
}
