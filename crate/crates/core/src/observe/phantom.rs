use nalgebra::DMatrix;

use crate::error::Result;
use crate::measure::{lu_inverse, TransitionMatrix};
use crate::model::Pfsa;

/// Sub-automaton keeping only the unobservable transitions of a plant.
/// It generates exactly the completely unobservable strings; none of its
/// transitions is controllable.
#[derive(Debug, Clone, PartialEq)]
pub struct PhantomAutomaton {
    num_events: usize,
    delta: Vec<Option<usize>>,
    phantom_pi: TransitionMatrix,
}

impl PhantomAutomaton {
    pub fn new(model: &Pfsa) -> Self {
        let n = model.num_states();
        let m = model.num_events();
        let mut delta = vec![None; n * m];
        let mut pi = DMatrix::zeros(n, n);
        for (q, s, to, p) in model.transitions() {
            if model.is_unobservable(q, s) {
                delta[q * m + s] = Some(to);
                pi[(q, to)] += p;
            }
        }
        PhantomAutomaton { num_events: m, delta, phantom_pi: TransitionMatrix::new_unchecked(pi) }
    }

    /// `𝒫(Π)`, substochastic.
    pub fn matrix(&self) -> &TransitionMatrix {
        &self.phantom_pi
    }

    pub fn delta(&self, state: usize, event: usize) -> Option<usize> {
        self.delta[state * self.num_events + event]
    }

    pub fn num_states(&self) -> usize {
        self.phantom_pi.dim()
    }

    /// States reachable from `state` by completely unobservable strings,
    /// including `state` itself, in ascending order.
    pub fn closure(&self, state: usize) -> Vec<usize> {
        let n = self.num_states();
        let mut seen = vec![false; n];
        let mut stack = vec![state];
        seen[state] = true;
        while let Some(q) = stack.pop() {
            for s in 0..self.num_events {
                if let Some(t) = self.delta(q, s) {
                    if !seen[t] {
                        seen[t] = true;
                        stack.push(t);
                    }
                }
            }
        }
        (0..n).filter(|&i| seen[i]).collect()
    }

    /// `[I − (1−θ)𝒫(Π)]⁻¹`: expected weighted visits along unobservable
    /// strings. `θ` may be zero.
    ///
    /// Entries outside the unobservable closure are set to exactly zero, so
    /// supports agree with [`closure`](Self::closure) despite round-off.
    pub fn occupancy(&self, theta: f64) -> Result<DMatrix<f64>> {
        let n = self.num_states();
        let mut m = lu_inverse(DMatrix::identity(n, n) - self.phantom_pi.as_matrix() * (1.0 - theta))?;
        for i in 0..n {
            let reach = self.closure(i);
            for j in 0..n {
                if reach.binary_search(&j).is_err() {
                    m[(i, j)] = 0.0;
                }
            }
        }
        Ok(m)
    }
}

/// Builds the phantom automaton of `model`.
pub fn phantom_automaton(model: &Pfsa) -> PhantomAutomaton {
    PhantomAutomaton::new(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn no_unobservable_transitions() {
        let g = fixtures::four_state().fully_observable();
        let p = phantom_automaton(&g);
        assert_eq!(p.matrix().as_matrix().amax(), 0.0);
        assert_eq!(p.closure(0), vec![0]);
    }

    #[test]
    fn phantom_is_dominated_by_plant() {
        let g = fixtures::mission();
        let p = phantom_automaton(&g);
        let pi = g.transition_matrix();
        let diff = pi.as_matrix() - p.matrix().as_matrix();
        assert!(diff.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn four_state_single_entry() {
        let g = fixtures::four_state();
        let p = phantom_automaton(&g);
        let m = p.matrix().as_matrix();
        assert!((m[(0, 1)] - 0.2).abs() < 1e-15);
        assert_eq!(m.iter().filter(|&&x| x != 0.0).count(), 1);
        assert_eq!(p.closure(0), vec![0, 1]);
        assert_eq!(p.closure(1), vec![1]);
        let occ = p.occupancy(0.0).unwrap();
        let mut expect = DMatrix::identity(4, 4);
        expect[(0, 1)] = 0.2;
        assert!((occ - expect).amax() < 1e-15);
    }

    #[test]
    fn everything_unobservable() {
        let mut g = fixtures::four_state();
        for (q, s, _, _) in g.clone().transitions() {
            g.set_controllable(q, s, false);
            g.set_unobservable(q, s, true);
        }
        let p = phantom_automaton(&g);
        assert!((p.matrix().as_matrix() - g.transition_matrix().as_matrix()).amax() < 1e-15);
    }
}
