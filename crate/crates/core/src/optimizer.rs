//! Clonal selection on a continuous benchmark landscape.
//!
//! The landscape is
//! `(15·x·y·(1−x)·(1−y)·sin(9πx)·sin(9πy))²` over the unit square: a field
//! of 81 sharp peaks whose global maximum 0.87890625 sits at (0.5, 0.5).
//! `optimize` runs the generic clonal engine from [`crate::ais`] over
//! two-coordinate genomes; `grid_oracle` is the independent exhaustive
//! check used to pin the landscape down.

use std::f64::consts::PI;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::ais::{clonal_step, ClonalParams, Genome};

#[derive(Debug, Error, PartialEq)]
pub enum OptimizerError {
    #[error("({x}, {y}) is outside the unit square")]
    OutOfDomain { x: f64, y: f64 },
    #[error("bad parameters: {0}")]
    BadParams(String),
}

/// A candidate location with its cached fitness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuousAntibody {
    pub x: f64,
    pub y: f64,
    pub fitness: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerReport {
    pub best: ContinuousAntibody,
    pub generations_used: usize,
    /// Best fitness seen up to each generation; non-decreasing.
    pub history: Vec<f64>,
}

/// The benchmark landscape. Non-negative, symmetric in (x, y), and zero on
/// the whole boundary of the unit square.
pub fn fitness(x: f64, y: f64) -> Result<f64, OptimizerError> {
    if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
        return Err(OptimizerError::OutOfDomain { x, y });
    }
    Ok(fitness_unchecked(x, y))
}

fn fitness_unchecked(x: f64, y: f64) -> f64 {
    // One factor per axis keeps the float evaluation exactly symmetric.
    let fx = x * (1.0 - x) * (9.0 * PI * x).sin();
    let fy = y * (1.0 - y) * (9.0 * PI * y).sin();
    let inner = 15.0 * (fx * fy);
    inner * inner
}

/// Exhaustive scan of the `(resolution+1)²` lattice over the unit square.
/// Returns the argmax as (x, y, fitness); ties go to the lexicographically
/// smallest point.
pub fn grid_oracle(resolution: usize) -> (f64, f64, f64) {
    debug_assert!(resolution >= 2);
    let mut best = (0.0, 0.0, f64::MIN);
    for i in 0..=resolution {
        let x = i as f64 / resolution as f64;
        for j in 0..=resolution {
            let y = j as f64 / resolution as f64;
            let f = fitness_unchecked(x, y);
            if f > best.2 {
                best = (x, y, f);
            }
        }
    }
    best
}

/// Genome for the two-dimensional search: mutation is a per-coordinate
/// Gaussian with σ = intensity·0.1, clamped to the unit square.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Coordinates {
    x: f64,
    y: f64,
}

impl Genome for Coordinates {
    fn mutated(&self, intensity: f64, rng: &mut dyn RngCore) -> Self {
        let sigma = intensity * 0.1;
        if sigma <= 0.0 {
            return *self;
        }
        let normal = Normal::new(0.0, sigma).expect("sigma is positive and finite");
        Coordinates {
            x: (self.x + normal.sample(rng)).clamp(0.0, 1.0),
            y: (self.y + normal.sample(rng)).clamp(0.0, 1.0),
        }
    }

    fn fresh(&self, rng: &mut dyn RngCore) -> Self {
        Coordinates {
            x: rng.gen_range(0.0..=1.0),
            y: rng.gen_range(0.0..=1.0),
        }
    }
}

/// Runs clonal selection over the default landscape. Deterministic per
/// (params, seed).
pub fn optimize(params: &ClonalParams, seed: u64) -> Result<OptimizerReport, OptimizerError> {
    optimize_landscape(params, seed, fitness_unchecked)
}

/// Same engine with an arbitrary landscape over the unit square.
pub fn optimize_landscape(
    params: &ClonalParams,
    seed: u64,
    landscape: impl Fn(f64, f64) -> f64,
) -> Result<OptimizerReport, OptimizerError> {
    params.validate().map_err(OptimizerError::BadParams)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut population: Vec<(Coordinates, f64)> = (0..params.population_size)
        .map(|_| {
            let c = Coordinates {
                x: rng.gen_range(0.0..=1.0),
                y: rng.gen_range(0.0..=1.0),
            };
            let f = landscape(c.x, c.y);
            (c, f)
        })
        .collect();

    let mut best: (Coordinates, f64) = population
        .iter()
        .cloned()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("population is non-empty");
    let mut history = Vec::with_capacity(params.max_generations);

    for _ in 0..params.max_generations {
        let (next, memory) = clonal_step(
            &population,
            |c: &Coordinates| landscape(c.x, c.y),
            params,
            &mut rng,
        )
        .expect("population size is maintained across generations");
        population = next;
        for addition in memory {
            if addition.1 > best.1 {
                best = addition;
            }
        }
        history.push(best.1);
    }

    Ok(OptimizerReport {
        best: ContinuousAntibody {
            x: best.0.x,
            y: best.0.y,
            fitness: best.1,
        },
        generations_used: params.max_generations,
        history,
    })
}
