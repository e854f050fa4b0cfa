//! Observation under a static unobservability map: phantom automaton,
//! Petri-net observer, fraction net observer matrices and entangled states.

pub mod entangled;
pub mod gamma;
pub mod observer;
pub mod phantom;

pub use entangled::{
    entangled_measure, enumerate_entangled, eta_approximation_measure, eta_quantize, evolve, EntangledSet,
    EntangledState, Enumeration, QuantizedSystem, DEFAULT_DEDUP_TOL, DEFAULT_STATE_CAP,
};
pub use gamma::{gamma_matrices, GammaSet};
pub use observer::{build_pn_observer, possible_states, Arc, PnObserver};
pub use phantom::{phantom_automaton, PhantomAutomaton};
