use std::time::Instant;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::seed;
use crate::wire::hexfloat::{serde_f64, serde_vec};

use super::{EpisodeObjective, TrainError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub population: usize,
    pub elite_fraction: f64,
    pub iterations: usize,
    pub episodes_per_candidate: usize,
    pub init_sigma: f64,
    pub sigma_floor: f64,
    /// Set from the scenario seed, not from the `train` block.
    #[serde(skip)]
    pub seed: u64,
    /// Worker threads; `None` uses rayon's default.
    #[serde(skip)]
    pub workers: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            population: 64,
            elite_fraction: 0.125,
            iterations: 50,
            episodes_per_candidate: 8,
            init_sigma: 1.0,
            sigma_floor: 0.05,
            seed: 0,
            workers: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.to_string()));
        if self.population < 4 {
            return bad("population must be at least 4");
        }
        if !(self.elite_fraction > 0.0 && self.elite_fraction <= 0.5) {
            return bad("elite_fraction must be in (0, 0.5]");
        }
        if self.iterations == 0 || self.episodes_per_candidate == 0 {
            return bad("iterations and episodes_per_candidate must be positive");
        }
        if !(self.init_sigma > 0.0 && self.init_sigma.is_finite()) {
            return bad("init_sigma must be positive");
        }
        if !(self.sigma_floor > 0.0 && self.sigma_floor.is_finite()) {
            return bad("sigma_floor must be positive");
        }
        if self.workers == Some(0) {
            return bad("workers must be positive");
        }
        Ok(())
    }

    pub fn elite_count(&self) -> usize {
        ((self.population as f64 * self.elite_fraction).ceil() as usize).max(1)
    }
}

/// One line of the metrics log; reals as hex floats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IterationStats {
    pub iteration: usize,
    #[serde(with = "serde_f64")]
    pub mean_return: f64,
    #[serde(with = "serde_f64")]
    pub best_return: f64,
    #[serde(with = "serde_f64")]
    pub best_so_far: f64,
    #[serde(with = "serde_vec")]
    pub mu: Vec<f64>,
    #[serde(with = "serde_vec")]
    pub sigma: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub iterations: Vec<IterationStats>,
    /// Distribution mean after the last update.
    pub final_params: Vec<f64>,
    pub wall_clock_seconds: f64,
}

/// Seed of one training episode; a pure function of its coordinates so
/// evaluation order and worker count cannot change results.
pub fn episode_seed(seed: u64, iteration: usize, candidate: usize, episode: usize) -> u64 {
    seed::derive(seed, &[iteration as u64, candidate as u64, episode as u64])
}

fn sample_population(mu: &[f64], sigma: &[f64], config: &TrainConfig, iteration: usize) -> Vec<Vec<f64>> {
    let mut rng = seed::rng(seed::derive(
        config.seed,
        &[seed::label("population"), iteration as u64],
    ));
    (0..config.population)
        .map(|_| {
            mu.iter()
                .zip(sigma)
                .map(|(m, s)| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    m + s * z
                })
                .collect()
        })
        .collect()
}

/// Cross-entropy method: sample a Gaussian population around `μ`, score
/// each candidate by its mean return over seeded episodes, refit `μ, σ` to
/// the elite set. `factory` builds one objective per worker.
pub fn cem_train<O, F>(factory: F, dim: usize, config: &TrainConfig) -> Result<TrainReport, TrainError>
where
    O: EpisodeObjective,
    F: Fn() -> Result<O, TrainError> + Sync,
{
    config.validate()?;
    let started = Instant::now();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = config.workers {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| TrainError::Config(format!("worker pool: {e}")))?;

    let mut serial = match config.workers {
        Some(1) => Some(factory()?),
        _ => None,
    };
    let n_elite = config.elite_count();
    let mut mu = vec![0.0; dim];
    let mut sigma = vec![config.init_sigma; dim];
    let mut best_so_far = f64::NEG_INFINITY;
    let mut iterations = Vec::with_capacity(config.iterations);

    for it in 0..config.iterations {
        let population = sample_population(&mu, &sigma, config, it);
        let score = |objective: &mut O, c: usize, params: &[f64]| -> Result<f64, TrainError> {
            let mut total = 0.0;
            for e in 0..config.episodes_per_candidate {
                total += objective.episode_return(params, episode_seed(config.seed, it, c, e))?;
            }
            Ok(total / config.episodes_per_candidate as f64)
        };
        let scores: Vec<Result<f64, TrainError>> = match &mut serial {
            // One objective for the whole run, e.g. when it holds the only
            // connection a remote engine accepts.
            Some(objective) => population.iter().enumerate().map(|(c, p)| score(objective, c, p)).collect(),
            None => pool.install(|| {
                population
                    .par_iter()
                    .enumerate()
                    .map_init(&factory, |objective, (c, params)| {
                        score(objective.as_mut().map_err(|e| e.clone())?, c, params)
                    })
                    .collect()
            }),
        };
        let scores = scores.into_iter().collect::<Result<Vec<f64>, _>>()?;

        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        let elites = &order[..n_elite];
        for d in 0..dim {
            let m = elites.iter().map(|&i| population[i][d]).sum::<f64>() / n_elite as f64;
            let var = elites.iter().map(|&i| (population[i][d] - m).powi(2)).sum::<f64>() / n_elite as f64;
            mu[d] = m;
            sigma[d] = var.sqrt().max(config.sigma_floor);
        }

        let best = scores[order[0]];
        best_so_far = best_so_far.max(best);
        let mean = scores.iter().sum::<f64>() / scores.len() as f64;
        log::info!("iteration {it}: mean return {mean:.4}, best {best:.4}");
        iterations.push(IterationStats {
            iteration: it,
            mean_return: mean,
            best_return: best,
            best_so_far,
            mu: mu.clone(),
            sigma: sigma.clone(),
        });
    }

    Ok(TrainReport {
        iterations,
        final_params: mu,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Parabola;

    impl EpisodeObjective for Parabola {
        fn episode_return(&mut self, params: &[f64], _: u64) -> Result<f64, TrainError> {
            Ok(-(params[0] - 3.0).powi(2))
        }
    }

    #[test]
    fn config_validation() {
        TrainConfig::default().validate().unwrap();
        for bad in [
            TrainConfig { population: 3, ..Default::default() },
            TrainConfig { elite_fraction: 0.6, ..Default::default() },
            TrainConfig { elite_fraction: 0.0, ..Default::default() },
            TrainConfig { sigma_floor: 0.0, ..Default::default() },
            TrainConfig { workers: Some(0), ..Default::default() },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
        assert_eq!(TrainConfig::default().elite_count(), 8);
    }

    #[test]
    fn sigma_respects_floor() {
        let config = TrainConfig { iterations: 15, seed: 3, ..Default::default() };
        let report = cem_train(|| Ok(Parabola), 1, &config).unwrap();
        for s in &report.iterations {
            assert!(s.sigma[0] >= config.sigma_floor);
        }
    }
}
