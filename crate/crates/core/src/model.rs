//! The probabilistic finite-state automaton and its structural checks.
//!
//! States and events are addressed by their declaration index. Every
//! `(state, event)` pair owns one cell in a dense `n × m` grid holding the
//! target state (if defined), the generation probability, and the
//! controllability and observability flags.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::measure::TransitionMatrix;

/// Tolerance on per-state probability sums.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// A set of disabled `(state, event)` pairs, by index.
pub type DisablingSet = BTreeSet<(usize, usize)>;

/// A PFSA `(Q, Σ, δ, Π̃, χ, 𝒞)` together with a static, state-based
/// unobservability map.
#[derive(Debug, Clone, PartialEq)]
pub struct Pfsa {
    states: Vec<String>,
    events: Vec<String>,
    delta: Vec<Option<usize>>,
    prob: Vec<f64>,
    chi: Vec<f64>,
    controllable: Vec<bool>,
    unobservable: Vec<bool>,
}

/// One broken model invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    RowSum { state: String, sum: f64 },
    ProbabilityRange { state: String, event: String, prob: f64 },
    ProbabilityWithoutTransition { state: String, event: String, prob: f64 },
    TransitionWithoutProbability { state: String, event: String },
    ControllableUndefined { state: String, event: String },
    UnobservableUndefined { state: String, event: String },
    UnobservableControllable { state: String, event: String },
    ChiRange { state: String, chi: f64 },
    Empty,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::RowSum { state, sum } => {
                write!(f, "row sum != 1 at state {state}: {sum}")
            }
            Violation::ProbabilityRange { state, event, prob } => {
                write!(f, "probability out of [0,1) at ({state}, {event}): {prob}")
            }
            Violation::ProbabilityWithoutTransition { state, event, prob } => write!(
                f,
                "positive probability {prob} at ({state}, {event}) but no transition defined"
            ),
            Violation::TransitionWithoutProbability { state, event } => write!(
                f,
                "transition defined at ({state}, {event}) with zero probability"
            ),
            Violation::ControllableUndefined { state, event } => {
                write!(f, "controllable pair ({state}, {event}) has no transition")
            }
            Violation::UnobservableUndefined { state, event } => {
                write!(f, "unobservable pair ({state}, {event}) has no transition")
            }
            Violation::UnobservableControllable { state, event } => write!(
                f,
                "pair ({state}, {event}) is both unobservable and controllable; unobservable transitions must be uncontrollable"
            ),
            Violation::ChiRange { state, chi } => {
                write!(f, "characteristic out of [-1,1] at state {state}: {chi}")
            }
            Violation::Empty => write!(f, "model has no states or no events"),
        }
    }
}

impl Pfsa {
    /// An empty automaton over the given states and events: no transitions,
    /// zero characteristic, nothing controllable, everything observable.
    pub fn new(states: Vec<String>, events: Vec<String>) -> Self {
        let cells = states.len() * events.len();
        Pfsa {
            chi: vec![0.0; states.len()],
            states,
            events,
            delta: vec![None; cells],
            prob: vec![0.0; cells],
            controllable: vec![false; cells],
            unobservable: vec![false; cells],
        }
    }

    #[inline]
    fn cell(&self, state: usize, event: usize) -> usize {
        debug_assert!(state < self.states.len() && event < self.events.len());
        state * self.events.len() + event
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_events(&self) -> usize {
        self.events.len()
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn events(&self) -> &[String] {
        &self.events
    }

    pub fn state_name(&self, state: usize) -> &str {
        &self.states[state]
    }

    pub fn event_name(&self, event: usize) -> &str {
        &self.events[event]
    }

    pub fn state_index(&self, name: &str) -> Result<usize> {
        self.states.iter().position(|s| s == name).ok_or_else(|| Error::UnknownState(name.to_string()))
    }

    pub fn event_index(&self, name: &str) -> Result<usize> {
        self.events.iter().position(|e| e == name).ok_or_else(|| Error::UnknownEvent(name.to_string()))
    }

    /// `δ(q, σ)`, if defined.
    pub fn delta(&self, state: usize, event: usize) -> Option<usize> {
        self.delta[self.cell(state, event)]
    }

    /// `π̃(q, σ)`.
    pub fn prob(&self, state: usize, event: usize) -> f64 {
        self.prob[self.cell(state, event)]
    }

    pub fn chi(&self) -> &[f64] {
        &self.chi
    }

    pub fn is_controllable(&self, state: usize, event: usize) -> bool {
        self.controllable[self.cell(state, event)]
    }

    pub fn is_unobservable(&self, state: usize, event: usize) -> bool {
        self.unobservable[self.cell(state, event)]
    }

    /// Observable and defined.
    pub fn is_observable_transition(&self, state: usize, event: usize) -> bool {
        self.delta(state, event).is_some() && !self.is_unobservable(state, event)
    }

    pub fn set_transition(&mut self, state: usize, event: usize, target: usize, prob: f64) {
        assert!(target < self.states.len(), "target state out of range");
        let c = self.cell(state, event);
        self.delta[c] = Some(target);
        self.prob[c] = prob;
    }

    /// Sets the generation probability without touching `δ`. Used to build
    /// deliberately defective models.
    pub fn set_prob(&mut self, state: usize, event: usize, prob: f64) {
        let c = self.cell(state, event);
        self.prob[c] = prob;
    }

    pub fn clear_transition(&mut self, state: usize, event: usize) {
        let c = self.cell(state, event);
        self.delta[c] = None;
        self.prob[c] = 0.0;
    }

    pub fn set_chi(&mut self, state: usize, value: f64) {
        self.chi[state] = value;
    }

    pub fn set_controllable(&mut self, state: usize, event: usize, flag: bool) {
        let c = self.cell(state, event);
        self.controllable[c] = flag;
    }

    pub fn set_unobservable(&mut self, state: usize, event: usize, flag: bool) {
        let c = self.cell(state, event);
        self.unobservable[c] = flag;
    }

    /// Defined transitions in `(state, event)` order.
    pub fn transitions(&self) -> impl Iterator<Item = (usize, usize, usize, f64)> + '_ {
        let m = self.events.len();
        (0..self.delta.len()).filter_map(move |c| self.delta[c].map(|to| (c / m, c % m, to, self.prob[c])))
    }

    /// Controllable pairs `𝒞`, in `(state, event)` order.
    pub fn controllable_pairs(&self) -> Vec<(usize, usize)> {
        self.pairs_where(&self.controllable)
    }

    pub fn unobservable_pairs(&self) -> Vec<(usize, usize)> {
        self.pairs_where(&self.unobservable)
    }

    fn pairs_where(&self, flags: &[bool]) -> Vec<(usize, usize)> {
        let m = self.events.len();
        flags.iter().enumerate().filter(|(_, &f)| f).map(|(c, _)| (c / m, c % m)).collect()
    }

    /// Checks every structural invariant; an empty list means the model is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.states.is_empty() || self.events.is_empty() {
            out.push(Violation::Empty);
            return out;
        }
        for q in 0..self.num_states() {
            let sname = || self.states[q].clone();
            let mut sum = 0.0;
            for s in 0..self.num_events() {
                let ename = || self.events[s].clone();
                let p = self.prob(q, s);
                sum += p;
                if !(0.0..1.0).contains(&p) && !(p == 1.0 && self.delta(q, s).is_some()) {
                    // p = 1 is admitted on a defined transition
                    out.push(Violation::ProbabilityRange { state: sname(), event: ename(), prob: p });
                }
                match self.delta(q, s) {
                    None if p > 0.0 => {
                        out.push(Violation::ProbabilityWithoutTransition { state: sname(), event: ename(), prob: p })
                    }
                    Some(_) if p <= 0.0 => {
                        out.push(Violation::TransitionWithoutProbability { state: sname(), event: ename() })
                    }
                    _ => {}
                }
                let undefined = self.delta(q, s).is_none();
                if self.is_controllable(q, s) && undefined {
                    out.push(Violation::ControllableUndefined { state: sname(), event: ename() });
                }
                if self.is_unobservable(q, s) && undefined {
                    out.push(Violation::UnobservableUndefined { state: sname(), event: ename() });
                }
                if self.is_unobservable(q, s) && self.is_controllable(q, s) {
                    out.push(Violation::UnobservableControllable { state: sname(), event: ename() });
                }
            }
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                out.push(Violation::RowSum { state: sname(), sum });
            }
            let chi = self.chi[q];
            if !(-1.0..=1.0).contains(&chi) || chi.is_nan() {
                out.push(Violation::ChiRange { state: sname(), chi });
            }
        }
        out
    }

    /// Returns an error listing the violations if the model is invalid.
    pub fn ensure_valid(&self) -> Result<()> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            let msg = v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ");
            Err(Error::InvalidModel(msg))
        }
    }

    /// `Π_ij = Σ_{σ : δ(q_i,σ) = q_j} π̃(q_i, σ)`.
    pub fn transition_matrix(&self) -> TransitionMatrix {
        let n = self.num_states();
        let mut pi = nalgebra::DMatrix::zeros(n, n);
        for (q, _, to, p) in self.transitions() {
            pi[(q, to)] += p;
        }
        TransitionMatrix::new_unchecked(pi)
    }

    /// Transition matrix of the plant with the pairs in `disabled` turned
    /// into self-loops. Does not check `disabled ⊆ 𝒞`.
    pub(crate) fn supervised_matrix(&self, disabled: &DisablingSet) -> TransitionMatrix {
        let n = self.num_states();
        let mut pi = nalgebra::DMatrix::zeros(n, n);
        for (q, s, to, p) in self.transitions() {
            let to = if disabled.contains(&(q, s)) { q } else { to };
            pi[(q, to)] += p;
        }
        TransitionMatrix::new_unchecked(pi)
    }

    /// Redirects every disabled transition to a self-loop with unchanged
    /// probability.
    pub fn apply_disabling(&self, disabled: &DisablingSet) -> Result<Pfsa> {
        self.check_disabling(disabled)?;
        let mut out = self.clone();
        for &(q, s) in disabled {
            let c = out.cell(q, s);
            out.delta[c] = Some(q);
        }
        Ok(out)
    }

    pub(crate) fn check_disabling(&self, disabled: &DisablingSet) -> Result<()> {
        for &(q, s) in disabled {
            if q >= self.num_states() || s >= self.num_events() || !self.is_controllable(q, s) {
                return Err(Error::NotControllable {
                    state: self.states.get(q).cloned().unwrap_or_else(|| q.to_string()),
                    event: self.events.get(s).cloned().unwrap_or_else(|| s.to_string()),
                });
            }
        }
        Ok(())
    }

    /// Same plant with every transition observable.
    pub fn fully_observable(&self) -> Pfsa {
        let mut out = self.clone();
        out.unobservable.iter_mut().for_each(|f| *f = false);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state() -> Pfsa {
        let mut g = Pfsa::new(vec!["a".into(), "b".into()], vec!["x".into(), "y".into()]);
        g.set_transition(0, 0, 1, 0.3);
        g.set_transition(0, 1, 1, 0.7);
        g.set_transition(1, 0, 0, 0.3);
        g.set_transition(1, 1, 0, 0.7);
        g
    }

    #[test]
    fn valid_two_state_model() {
        assert!(two_state().validate().is_empty());
    }

    #[test]
    fn swap_matrix_from_split_events() {
        let pi = two_state().transition_matrix();
        assert_eq!(pi.as_matrix()[(0, 1)], 1.0);
        assert_eq!(pi.as_matrix()[(1, 0)], 1.0);
        assert_eq!(pi.as_matrix()[(0, 0)], 0.0);
    }

    #[test]
    fn row_sum_defect_is_reported() {
        let mut g = two_state();
        g.clear_transition(0, 1);
        g.set_transition(0, 0, 1, 0.5);
        let v = g.validate();
        assert_eq!(v.len(), 1);
        assert!(matches!(&v[0], Violation::RowSum { state, .. } if state == "a"));
        assert!(v[0].to_string().contains("row sum"));
    }

    #[test]
    fn unobservable_controllable_overlap_is_reported() {
        let mut g = two_state();
        g.set_controllable(0, 0, true);
        g.set_unobservable(0, 0, true);
        let v = g.validate();
        assert!(v.iter().any(|x| matches!(x, Violation::UnobservableControllable { .. })));
    }

    #[test]
    fn probability_without_transition() {
        let mut g = two_state();
        g.clear_transition(1, 1);
        g.set_prob(1, 1, 0.7);
        let v = g.validate();
        assert!(v.iter().any(|x| matches!(x, Violation::ProbabilityWithoutTransition { .. })));
    }

    #[test]
    fn chi_out_of_range() {
        let mut g = two_state();
        g.set_chi(1, 1.5);
        assert!(matches!(g.validate()[0], Violation::ChiRange { .. }));
    }

    #[test]
    fn controllable_on_undefined_pair() {
        let mut g = two_state();
        g.clear_transition(0, 0);
        g.set_transition(0, 1, 1, 1.0);
        g.set_controllable(0, 0, true);
        let v = g.validate();
        assert_eq!(v.len(), 1, "{v:?}");
        assert!(matches!(v[0], Violation::ControllableUndefined { .. }));
    }

    #[test]
    fn disabling_requires_controllability() {
        let g = two_state();
        let d: DisablingSet = [(0, 0)].into_iter().collect();
        assert!(matches!(g.apply_disabling(&d), Err(Error::NotControllable { .. })));
    }

    #[test]
    fn disabling_makes_self_loop() {
        let mut g = two_state();
        g.set_controllable(0, 0, true);
        let d: DisablingSet = [(0, 0)].into_iter().collect();
        let h = g.apply_disabling(&d).unwrap();
        assert!(h.validate().is_empty());
        assert_eq!(h.delta(0, 0), Some(0));
        assert_eq!(h.prob(0, 0), 0.3);
        let pi = h.transition_matrix();
        assert!((pi.as_matrix()[(0, 0)] - 0.3).abs() < 1e-15);
        assert!((pi.as_matrix()[(0, 1)] - 0.7).abs() < 1e-15);
        assert_eq!(pi.as_matrix(), g.supervised_matrix(&d).as_matrix());
    }
}
