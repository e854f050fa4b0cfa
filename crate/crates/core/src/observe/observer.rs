use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::model::Pfsa;
use crate::observe::phantom::PhantomAutomaton;

/// Firing rule of one `(place, event)` pair in the observer net.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Arc {
    /// σ-labeled transition with output arcs to these places.
    Outputs(Vec<usize>),
    /// The token is removed when σ is observed.
    FlushOut,
}

/// Petri-net observer: one place per plant state and, for every
/// `(place, event)`, either a labeled transition or a flush-out arc.
#[derive(Debug, Clone, PartialEq)]
pub struct PnObserver {
    num_places: usize,
    num_events: usize,
    arcs: Vec<Arc>,
    phantom: PhantomAutomaton,
}

impl PnObserver {
    pub fn new(model: &Pfsa) -> Self {
        let phantom = PhantomAutomaton::new(model);
        let n = model.num_states();
        let m = model.num_events();
        let mut arcs = Vec::with_capacity(n * m);
        for q in 0..n {
            for s in 0..m {
                let arc = match model.delta(q, s) {
                    Some(to) if !model.is_unobservable(q, s) => Arc::Outputs(phantom.closure(to)),
                    _ => Arc::FlushOut,
                };
                arcs.push(arc);
            }
        }
        PnObserver { num_places: n, num_events: m, arcs, phantom }
    }

    pub fn arc(&self, place: usize, event: usize) -> &Arc {
        &self.arcs[place * self.num_events + event]
    }

    pub fn num_places(&self) -> usize {
        self.num_places
    }

    /// `(place, event)` pairs carrying a flush-out arc.
    pub fn flush_out(&self) -> Vec<(usize, usize)> {
        (0..self.arcs.len())
            .filter(|&c| self.arcs[c] == Arc::FlushOut)
            .map(|c| (c / self.num_events, c % self.num_events))
            .collect()
    }

    /// `Q̄(ε)` from `state`.
    pub fn initial_marking(&self, state: usize) -> BTreeSet<usize> {
        self.phantom.closure(state).into_iter().collect()
    }

    /// Fires every enabled `event`-labeled transition and normalizes token
    /// counts to one.
    pub fn fire(&self, marking: &BTreeSet<usize>, event: usize) -> BTreeSet<usize> {
        marking
            .iter()
            .filter_map(|&p| match self.arc(p, event) {
                Arc::Outputs(out) => Some(out.iter().copied()),
                Arc::FlushOut => None,
            })
            .flatten()
            .collect()
    }
}

pub fn build_pn_observer(model: &Pfsa) -> PnObserver {
    PnObserver::new(model)
}

/// `Q̄(ω)`: states the plant may occupy after the observed string `ω`.
pub fn possible_states(observer: &PnObserver, initial: usize, observed: &[usize]) -> Result<BTreeSet<usize>> {
    if initial >= observer.num_places {
        return Err(Error::UnknownState(initial.to_string()));
    }
    let mut marking = observer.initial_marking(initial);
    for &s in observed {
        if s >= observer.num_events {
            return Err(Error::UnknownEvent(s.to_string()));
        }
        marking = observer.fire(&marking, s);
        if marking.is_empty() {
            return Err(Error::ImpossibleObservation(s.to_string()));
        }
    }
    Ok(marking)
}
