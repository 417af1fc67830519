//! Bounded one-dimensional particle swarm optimizer and the threshold
//! segmentation fitness it minimizes.
//!
//! Trajectories are a pure function of the seed. Every random draw comes from
//! one [`Prng`] in a fixed order:
//!
//! 1. initialization, for each particle in index order: position, then velocity;
//! 2. each iteration, for each particle in index order: `r1`, then `r2`.
//!
//! All draws for an iteration are taken before any fitness is evaluated, so
//! the swarm can be evaluated in parallel without changing the result.

mod fitness;
mod rng;

pub use fitness::{exhaustive_minimum, fitness_edges, optimize_threshold, FitnessParams};
pub use rng::Prng;

use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PsoConfig {
    pub swarm_size: usize,
    pub max_iterations: usize,
    pub bounds: (f64, f64),
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    pub velocity_clamp_fraction: f64,
    pub seed: u64,
}

impl Default for PsoConfig {
    fn default() -> Self {
        Self {
            swarm_size: 30,
            max_iterations: 100,
            bounds: (50.0, 200.0),
            inertia: 0.7298,
            cognitive: 1.49618,
            social: 1.49618,
            velocity_clamp_fraction: 0.2,
            seed: 42,
        }
    }
}

/// Initial velocities are drawn uniformly from ±this fraction of the range.
const INITIAL_VELOCITY_FRACTION: f64 = 0.1;

impl PsoConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.bounds;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::invalid(format!("pso bounds need lo < hi, got ({lo}, {hi})")));
        }
        if self.swarm_size < 2 {
            return Err(Error::invalid(format!(
                "pso swarm_size must be >= 2, got {}",
                self.swarm_size
            )));
        }
        if !(self.inertia > 0.0 && self.inertia < 1.0) {
            return Err(Error::invalid(format!("pso inertia must be in (0,1), got {}", self.inertia)));
        }
        if !(self.cognitive > 0.0 && self.cognitive.is_finite()) || !(self.social > 0.0 && self.social.is_finite()) {
            return Err(Error::invalid("pso cognitive/social coefficients must be > 0"));
        }
        if !(self.velocity_clamp_fraction > 0.0 && self.velocity_clamp_fraction.is_finite()) {
            return Err(Error::invalid("pso velocity_clamp_fraction must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsoResult {
    pub best_threshold: f64,
    pub best_fitness: f64,
    /// Global best fitness after each iteration.
    pub history: Vec<f64>,
    pub evaluations: usize,
}

fn evaluate_all<F>(fitness: &F, positions: &[f64]) -> Result<Vec<f64>>
where
    F: Fn(f64) -> f64 + Sync,
{
    let values: Vec<f64> = positions.par_iter().map(|&x| fitness(x)).collect();
    match positions.iter().zip(&values).find(|(_, v)| !v.is_finite()) {
        Some((&position, &value)) => Err(Error::NonFiniteFitness { position, value }),
        None => Ok(values),
    }
}

/// Index of the smallest value; ties resolve to the lowest index.
fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v < values[best] {
            best = i;
        }
    }
    best
}

/// Minimizes `fitness` over `[lo, hi]` with a global-best swarm.
///
/// Personal and global bests are only replaced on strict improvement, and the
/// global best is refreshed once per iteration after the whole swarm has been
/// evaluated.
pub fn pso_optimize<F>(fitness: F, config: &PsoConfig) -> Result<PsoResult>
where
    F: Fn(f64) -> f64 + Sync,
{
    config.validate()?;
    let (lo, hi) = config.bounds;
    let span = hi - lo;
    let v_max = config.velocity_clamp_fraction * span;
    let v_init = INITIAL_VELOCITY_FRACTION * span;
    let n = config.swarm_size;
    let mut rng = Prng::new(config.seed);

    let mut position = Vec::with_capacity(n);
    let mut velocity = Vec::with_capacity(n);
    for _ in 0..n {
        position.push(lo + rng.next_unit() * span);
        velocity.push((2.0 * rng.next_unit() - 1.0) * v_init);
    }

    let values = evaluate_all(&fitness, &position)?;
    let mut evaluations = n;
    let mut personal_best = position.clone();
    let mut personal_value = values;
    let first = argmin(&personal_value);
    let mut global_best = personal_best[first];
    let mut global_value = personal_value[first];
    let mut history = Vec::with_capacity(config.max_iterations);

    let mut draws = vec![(0.0, 0.0); n];
    for _ in 0..config.max_iterations {
        for d in draws.iter_mut() {
            let r1 = rng.next_unit();
            let r2 = rng.next_unit();
            *d = (r1, r2);
        }
        for i in 0..n {
            let (r1, r2) = draws[i];
            let v = config.inertia * velocity[i]
                + config.cognitive * r1 * (personal_best[i] - position[i])
                + config.social * r2 * (global_best - position[i]);
            velocity[i] = v.clamp(-v_max, v_max);
            position[i] = (position[i] + velocity[i]).clamp(lo, hi);
        }

        let values = evaluate_all(&fitness, &position)?;
        evaluations += n;
        for i in 0..n {
            if values[i] < personal_value[i] {
                personal_value[i] = values[i];
                personal_best[i] = position[i];
            }
        }
        let best = argmin(&personal_value);
        if personal_value[best] < global_value {
            global_value = personal_value[best];
            global_best = personal_best[best];
        }
        history.push(global_value);
    }

    Ok(PsoResult {
        best_threshold: global_best,
        best_fitness: global_value,
        history,
        evaluations,
    })
}
