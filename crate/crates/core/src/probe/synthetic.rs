//! Gaussian probing data with a planted, linearly decodable label.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::Example;
use crate::seed::RunSeed;
use crate::types::Pid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub dim: usize,
    pub train_relations: usize,
    pub val_relations: usize,
    pub test_relations: usize,
    pub per_relation: usize,
    /// Magnitude of each coordinate of the class mean; classes sit at
    /// `+mu` and `-mu`.
    pub signal: f64,
    pub noise: f64,
}

impl Default for SyntheticSpec {
    /// 2000 training examples in 16 dimensions. Coordinates sit around
    /// +-10 so a probe trained at the default learning rate moves far
    /// enough to be confident within the online schedule.
    fn default() -> Self {
        SyntheticSpec {
            dim: 16,
            train_relations: 100,
            val_relations: 10,
            test_relations: 20,
            per_relation: 20,
            signal: 10.0,
            noise: 2.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticTask {
    pub train: Vec<Example>,
    pub val: Vec<Example>,
    pub test: Vec<Example>,
}

impl SyntheticTask {
    pub fn relations(&self) -> Vec<Pid> {
        let mut r: Vec<Pid> = self.train.iter().chain(&self.val).chain(&self.test).map(|e| e.relation.clone()).collect();
        r.sort();
        r.dedup();
        r
    }
}

/// Draws a task where each relation carries one class and every example's
/// features are its class mean plus isotropic noise. Half the relations
/// of each split (rounded down) are class 1.
pub fn synthetic_task(spec: &SyntheticSpec, seed: RunSeed) -> SyntheticTask {
    let mut rng = seed.rng("synthetic");
    let mu: Vec<f64> = (0..spec.dim)
        .map(|_| if rng.random_bool(0.5) { spec.signal } else { -spec.signal })
        .collect();
    let noise = Normal::new(0.0, spec.noise).expect("finite noise");
    let mut next_relation = 0usize;
    let mut split = |count: usize, rng: &mut crate::seed::Rng| {
        let mut classes: Vec<usize> = (0..count).map(|i| (i < count / 2) as usize).collect();
        classes.shuffle(rng);
        let mut out = Vec::with_capacity(count * spec.per_relation);
        for y in classes {
            let relation = Pid::new(format!("S{next_relation}"));
            next_relation += 1;
            let sign = if y == 1 { 1.0 } else { -1.0 };
            for _ in 0..spec.per_relation {
                let x = mu.iter().map(|m| (sign * m + noise.sample(rng)) as f32).collect();
                out.push(Example {
                    x,
                    y,
                    relation: relation.clone(),
                    frequency: rng.random_range(1..500),
                });
            }
        }
        out.shuffle(rng);
        out
    };
    let train = split(spec.train_relations, &mut rng);
    let val = split(spec.val_relations, &mut rng);
    let test = split(spec.test_relations, &mut rng);
    SyntheticTask { train, val, test }
}

/// Features drawn as pure noise with labels independent of them.
pub fn noise_task(n: usize, dim: usize, seed: RunSeed) -> Vec<Example> {
    let mut rng = seed.rng("noise");
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    (0..n)
        .map(|i| Example {
            x: (0..dim).map(|_| normal.sample(&mut rng) as f32).collect(),
            y: rng.random_range(0..2),
            relation: Pid::new(format!("N{}", i / 20)),
            frequency: 1,
        })
        .collect()
}
