//! Online supervisors driven by observed events.
//!
//! The perfect-observation controller tracks the plant state exactly and
//! disables every controllable transition into a lower-measure state. The
//! partial-observation controller tracks an entangled state `α` through the
//! fraction net observer and disables σ whenever `⟨α, T^σ⟩` is negative.

use std::collections::BTreeSet;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::measure::MeasureVector;
use crate::model::Pfsa;
use crate::observe::entangled::EntangledState;
use crate::observe::gamma::GammaSet;
use crate::synthesis::{SupervisionPolicy, TIE_TOL};

/// Default precision of the partial-observation decision rule.
pub const DEFAULT_LAMBDA: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum Current {
    Pure(usize),
    Entangled(EntangledState),
}

#[derive(Debug, Clone)]
pub struct ControllerState<'a> {
    model: &'a Pfsa,
    nu_star: &'a MeasureVector,
    gamma: Option<&'a GammaSet>,
    lambda: f64,
    current: Current,
    disabled_now: BTreeSet<usize>,
}

impl<'a> ControllerState<'a> {
    pub fn current(&self) -> &Current {
        &self.current
    }

    pub fn is_partial(&self) -> bool {
        self.gamma.is_some()
    }

    /// Events disabled at the current estimate.
    pub fn disabled_now(&self) -> &BTreeSet<usize> {
        &self.disabled_now
    }

    pub fn is_disabled(&self, event: usize) -> bool {
        self.disabled_now.contains(&event)
    }

    pub fn nu_star(&self) -> &MeasureVector {
        self.nu_star
    }

    /// Pure state index, or `None` in partial mode.
    pub fn pure_state(&self) -> Option<usize> {
        match self.current {
            Current::Pure(q) => Some(q),
            Current::Entangled(_) => None,
        }
    }

    /// The entangled state in partial mode, or `e_q` in perfect mode.
    pub fn alpha(&self) -> DVector<f64> {
        match &self.current {
            Current::Pure(q) => {
                let mut e = DVector::zeros(self.model.num_states());
                e[*q] = 1.0;
                e
            }
            Current::Entangled(a) => a.alpha.clone(),
        }
    }

    /// `⟨𝒩(α), ν⋆⟩`, the controller's estimate of the current measure.
    pub fn estimated_measure(&self) -> f64 {
        let a = self.alpha();
        a.dot(&self.nu_star.values) / a.sum()
    }

    fn decide(&self) -> BTreeSet<usize> {
        match &self.current {
            Current::Pure(q) => decide_pure(self.model, self.nu_star, *q),
            Current::Entangled(a) => {
                let gamma = self.gamma.expect("partial mode carries a gamma set");
                (0..gamma.num_events()).filter(|&s| a.alpha.dot(&gamma.t_vectors[s]) < -self.lambda).collect()
            }
        }
    }

    /// Applies an observed event and recomputes the disabling set.
    pub fn observe_event(&mut self, event: usize) -> Result<()> {
        if event >= self.model.num_events() {
            return Err(Error::UnknownEvent(event.to_string()));
        }
        let disabled = self.disabled_now.contains(&event);
        self.current = match &self.current {
            Current::Pure(q) => {
                let q = *q;
                match self.model.delta(q, event) {
                    Some(_) if disabled && self.model.is_controllable(q, event) => Current::Pure(q),
                    Some(to) => Current::Pure(to),
                    None => return Err(Error::ImpossibleObservation(self.model.event_name(event).into())),
                }
            }
            Current::Entangled(a) => {
                let gamma = self.gamma.expect("partial mode carries a gamma set");
                let m = if disabled { &gamma.gamma_disabled[event] } else { &gamma.gamma[event] };
                let next = m.tr_mul(&a.alpha);
                let total = next.sum();
                if !(total > 0.0) {
                    return Err(Error::ImpossibleObservation(self.model.event_name(event).into()));
                }
                Current::Entangled(EntangledState { alpha: next / total, theta: gamma.theta })
            }
        };
        self.disabled_now = self.decide();
        Ok(())
    }
}

fn decide_pure(model: &Pfsa, nu: &MeasureVector, q: usize) -> BTreeSet<usize> {
    (0..model.num_events())
        .filter(|&s| {
            model.is_controllable(q, s) && model.delta(q, s).is_some_and(|to| nu.get(to) < nu.get(q) - TIE_TOL)
        })
        .collect()
}

fn check_dims(model: &Pfsa, nu: &MeasureVector, q0: usize) -> Result<()> {
    if nu.len() != model.num_states() {
        return Err(Error::Dimension { expected: model.num_states(), actual: nu.len() });
    }
    if q0 >= model.num_states() {
        return Err(Error::UnknownState(q0.to_string()));
    }
    Ok(())
}

/// Perfect-observation controller at pure state `q0`.
pub fn init_perfect<'a>(model: &'a Pfsa, policy: &'a SupervisionPolicy, q0: usize) -> Result<ControllerState<'a>> {
    let nu = &policy.certified_measure;
    check_dims(model, nu, q0)?;
    let mut c = ControllerState {
        model,
        nu_star: nu,
        gamma: None,
        lambda: DEFAULT_LAMBDA,
        current: Current::Pure(q0),
        disabled_now: BTreeSet::new(),
    };
    c.disabled_now = c.decide();
    Ok(c)
}

/// Events disabled by the perfect controller at its current state.
pub fn decide_perfect(state: &ControllerState<'_>) -> BTreeSet<usize> {
    match state.current {
        Current::Pure(q) => decide_pure(state.model, state.nu_star, q),
        Current::Entangled(_) => BTreeSet::new(),
    }
}

/// Partial-observation controller starting from `e_q0 · [I − (1−θ)𝒫(Π)]⁻¹`.
/// `gamma` must carry decision vectors.
pub fn init_partial<'a>(
    model: &'a Pfsa,
    policy: &'a SupervisionPolicy,
    gamma: &'a GammaSet,
    q0: usize,
    lambda: f64,
) -> Result<ControllerState<'a>> {
    let nu = &policy.certified_measure;
    check_dims(model, nu, q0)?;
    if gamma.dim() != model.num_states() {
        return Err(Error::Dimension { expected: model.num_states(), actual: gamma.dim() });
    }
    if gamma.t_vectors.len() != gamma.num_events() {
        return Err(Error::InvalidParameter("gamma set has no decision vectors".into()));
    }
    if !(lambda >= 0.0) {
        return Err(Error::InvalidParameter(format!("lambda must be non-negative, got {lambda}")));
    }
    let alpha = gamma.occupancy.row(q0).transpose();
    let mut c = ControllerState {
        model,
        nu_star: nu,
        gamma: Some(gamma),
        lambda,
        current: Current::Entangled(EntangledState { alpha, theta: gamma.theta }),
        disabled_now: BTreeSet::new(),
    };
    c.disabled_now = c.decide();
    Ok(c)
}

/// Events `σ` with `⟨α, T^σ⟩ < −λ`.
pub fn decide_partial(state: &ControllerState<'_>) -> BTreeSet<usize> {
    if state.is_partial() {
        state.decide()
    } else {
        BTreeSet::new()
    }
}

/// Consumes an observation and returns the updated controller.
pub fn observe_event<'a>(mut state: ControllerState<'a>, event: usize) -> Result<ControllerState<'a>> {
    state.observe_event(event)?;
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::synthesis::synthesize_supervisor;

    fn policy_with(nu: Vec<f64>) -> SupervisionPolicy {
        SupervisionPolicy {
            disabled: Default::default(),
            certified_measure: MeasureVector::new(0.1, DVector::from_vec(nu)),
            theta_min: 0.1,
            iterations: Vec::new(),
        }
    }

    #[test]
    fn perfect_disables_strictly_lower_successors() {
        let g = fixtures::mission();
        // at G: t → M (lower), r → G (equal)
        let p = policy_with(vec![0.2, -0.1, 0.4, 0.0]);
        let c = init_perfect(&g, &p, 0).unwrap();
        assert_eq!(c.pure_state(), Some(0));
        let t = g.event_index("t").unwrap();
        assert_eq!(decide_perfect(&c), [t].into());
    }

    #[test]
    fn nothing_controllable_nothing_disabled() {
        let g = fixtures::four_state();
        let p = policy_with(vec![1.0, -1.0, -1.0, -1.0]);
        let mut c = init_perfect(&g, &p, 0).unwrap();
        assert!(c.disabled_now().is_empty());
        c.observe_event(g.event_index("e").unwrap()).unwrap();
        assert!(c.disabled_now().is_empty());
    }

    #[test]
    fn perfect_matches_synthesis() {
        let g = fixtures::mission();
        let p = synthesize_supervisor(&g).unwrap();
        for q in 0..4 {
            let c = init_perfect(&g, &p, q).unwrap();
            let offline: BTreeSet<usize> = p.disabled.iter().filter(|(s, _)| *s == q).map(|&(_, e)| e).collect();
            assert_eq!(decide_perfect(&c), offline);
        }
    }

    #[test]
    fn partial_init_includes_unobservable_occupancy() {
        let g = fixtures::four_state();
        let p = policy_with(vec![0.0; 4]);
        let set = GammaSet::new(&g, 0.0).unwrap().with_decision_vectors(&p.certified_measure).unwrap();
        let c = init_partial(&g, &p, &set, 0, DEFAULT_LAMBDA).unwrap();
        assert_eq!(c.alpha(), DVector::from_vec(vec![1.0, 0.2, 0.0, 0.0]));
        let c = init_partial(&g, &p, &set, 2, DEFAULT_LAMBDA).unwrap();
        assert_eq!(c.alpha(), DVector::from_vec(vec![0.0, 0.0, 1.0, 0.0]));
    }

    #[test]
    fn partial_re_reaches_01() {
        let g = fixtures::model1();
        let p = synthesize_supervisor(&g).unwrap();
        let set = GammaSet::new(&g, 0.0).unwrap().with_decision_vectors(&p.certified_measure).unwrap();
        let c = init_partial(&g, &p, &set, 0, DEFAULT_LAMBDA).unwrap();
        let c = observe_event(c, g.event_index("r").unwrap()).unwrap();
        let c = observe_event(c, g.event_index("e").unwrap()).unwrap();
        assert_eq!(c.alpha(), DVector::from_vec(vec![0.0, 1.0, 0.0, 0.0]));
    }

    #[test]
    fn partial_uncontrollable_never_disabled() {
        let g = fixtures::mission();
        let p = synthesize_supervisor(&g).unwrap();
        let set = GammaSet::new(&g, p.theta_min).unwrap().with_decision_vectors(&p.certified_measure).unwrap();
        let d = g.event_index("d").unwrap();
        for q in 0..4 {
            let c = init_partial(&g, &p, &set, q, DEFAULT_LAMBDA).unwrap();
            assert!(!decide_partial(&c).contains(&d));
        }
    }

    #[test]
    fn partial_reduces_to_perfect_on_pure_states() {
        let g = fixtures::mission().fully_observable();
        let p = synthesize_supervisor(&g).unwrap();
        let set = GammaSet::new(&g, p.theta_min).unwrap().with_decision_vectors(&p.certified_measure).unwrap();
        for q in 0..4 {
            let a = init_partial(&g, &p, &set, q, DEFAULT_LAMBDA).unwrap();
            let b = init_perfect(&g, &p, q).unwrap();
            assert_eq!(decide_partial(&a), decide_perfect(&b));
        }
    }

    #[test]
    fn disabled_identity_keeps_estimate() {
        let mut g = fixtures::four_state().fully_observable();
        let r = g.event_index("r").unwrap();
        for q in 0..4 {
            g.set_controllable(q, r, true);
        }
        // make r look bad everywhere so it is disabled
        let p = policy_with(vec![0.0, 0.5, 0.0, 0.5]);
        let set = GammaSet::new(&g, 0.1).unwrap().with_decision_vectors(&p.certified_measure).unwrap();
        let mut c = init_partial(&g, &p, &set, 1, DEFAULT_LAMBDA).unwrap();
        assert!(c.is_disabled(r));
        c.observe_event(r).unwrap();
        assert_eq!(c.alpha(), DVector::from_vec(vec![0.0, 1.0, 0.0, 0.0]));
    }

    #[test]
    fn impossible_observation_errors() {
        let g = fixtures::four_state();
        let p = policy_with(vec![0.0; 4]);
        let mut c = init_perfect(&g, &p, 0).unwrap();
        let a = g.event_index("a").unwrap();
        assert!(matches!(c.observe_event(a), Err(Error::ImpossibleObservation(_))));
        assert!(init_perfect(&g, &p, 9).is_err());
    }
}
