#![allow(dead_code)]

use pfsa::Pfsa;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy)]
pub struct PlantShape {
    pub min_states: usize,
    pub max_states: usize,
    pub events: usize,
    pub max_controllable: usize,
    /// Chance that an uncontrollable transition is unobservable.
    pub unobservable: f64,
}

impl Default for PlantShape {
    fn default() -> Self {
        PlantShape { min_states: 3, max_states: 6, events: 3, max_controllable: 10, unobservable: 0.0 }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random valid plant: every state has at least one event, probabilities
/// are bounded away from zero and χ is uniform on [−1, 1].
pub fn random_plant(seed: u64, shape: PlantShape) -> Pfsa {
    let mut r = rng(seed);
    let n = r.random_range(shape.min_states..=shape.max_states);
    let m = shape.events;
    let mut g = Pfsa::new((0..n).map(|i| format!("q{i}")).collect(), (0..m).map(|i| format!("e{i}")).collect());
    let mut defined = Vec::new();
    for q in 0..n {
        let mut evs: Vec<usize> = (0..m).filter(|_| r.random_bool(0.7)).collect();
        if evs.is_empty() {
            evs.push(r.random_range(0..m));
        }
        let weights: Vec<f64> = evs.iter().map(|_| r.random_range(0.05..1.0)).collect();
        let total: f64 = weights.iter().sum();
        for (&s, w) in evs.iter().zip(&weights) {
            g.set_transition(q, s, r.random_range(0..n), w / total);
            defined.push((q, s));
        }
        g.set_chi(q, r.random_range(-1.0..=1.0));
    }
    defined.shuffle(&mut r);
    let k = r.random_range(0..=shape.max_controllable.min(defined.len()));
    for &(q, s) in &defined[..k] {
        g.set_controllable(q, s, true);
    }
    for &(q, s) in &defined[k..] {
        if r.random_bool(shape.unobservable) {
            g.set_unobservable(q, s, true);
        }
    }
    assert!(g.validate().is_empty(), "{:?}", g.validate());
    g
}
