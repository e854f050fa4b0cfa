//! Entangled states: occupancy estimates carried by the fraction net
//! observer, their evolution, and finite quantized approximations of the
//! entangled transition system.

use std::collections::{HashMap, VecDeque};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::measure::{renormalized_measure, MeasureVector, TransitionMatrix};
use crate::model::Pfsa;
use crate::observe::gamma::GammaSet;

/// Default max-norm tolerance for telling entangled states apart.
pub const DEFAULT_DEDUP_TOL: f64 = 1e-10;

/// Default cap on enumerated entangled states.
pub const DEFAULT_STATE_CAP: usize = 1_000_000;

/// Non-negative, nonzero occupancy estimate over the plant states.
#[derive(Debug, Clone, PartialEq)]
pub struct EntangledState {
    pub alpha: DVector<f64>,
    pub theta: f64,
}

impl EntangledState {
    pub fn new(alpha: DVector<f64>, theta: f64) -> Result<Self> {
        if alpha.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(Error::InvalidParameter("entangled state has a negative or non-finite entry".into()));
        }
        if alpha.iter().all(|&x| x == 0.0) {
            return Err(Error::InvalidParameter("entangled state is zero".into()));
        }
        Ok(EntangledState { alpha, theta })
    }

    /// Unit basis vector `e_i`.
    pub fn pure(n: usize, state: usize, theta: f64) -> Self {
        let mut alpha = DVector::zeros(n);
        alpha[state] = 1.0;
        EntangledState { alpha, theta }
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    /// `Some(i)` if this is exactly `e_i`.
    pub fn as_pure(&self) -> Option<usize> {
        let mut found = None;
        for (i, &x) in self.alpha.iter().enumerate() {
            if x == 1.0 && found.is_none() {
                found = Some(i);
            } else if x != 0.0 {
                return None;
            }
        }
        found
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&i| self.alpha[i] > 0.0).collect()
    }

    /// `𝒩(α) = α / Σα`.
    pub fn normalized(&self) -> EntangledState {
        EntangledState { alpha: normalize(&self.alpha), theta: self.theta }
    }

    /// Max-norm distance.
    pub fn distance(&self, other: &EntangledState) -> f64 {
        (&self.alpha - &other.alpha).amax()
    }
}

fn normalize(v: &DVector<f64>) -> DVector<f64> {
    v / v.sum()
}

/// `αΓ^σ` (or `αΓ_D^σ` when `disabled`), optionally normalized.
pub fn evolve(
    state: &EntangledState,
    event: usize,
    disabled: bool,
    gammas: &GammaSet,
    normalize_result: bool,
) -> Result<EntangledState> {
    if event >= gammas.num_events() {
        return Err(Error::UnknownEvent(event.to_string()));
    }
    if state.dim() != gammas.dim() {
        return Err(Error::Dimension { expected: gammas.dim(), actual: state.dim() });
    }
    let m = if disabled { &gammas.gamma_disabled[event] } else { &gammas.gamma[event] };
    let next = m.tr_mul(&state.alpha);
    if next.iter().all(|&x| x <= 0.0) {
        return Err(Error::ImpossibleObservation(event.to_string()));
    }
    let alpha = if normalize_result { normalize(&next) } else { next };
    Ok(EntangledState { alpha, theta: gammas.theta })
}

/// `⟨α, ν_θ⟩`.
pub fn entangled_measure(state: &EntangledState, nu: &MeasureVector) -> Result<f64> {
    if state.dim() != nu.len() {
        return Err(Error::Dimension { expected: nu.len(), actual: state.dim() });
    }
    Ok(state.alpha.dot(&nu.values))
}

/// Set of entangled states deduplicated within a max-norm tolerance.
///
/// States are bucketed by a positive projection whose value moves by at
/// most the max-norm distance, so only neighbouring buckets need scanning.
#[derive(Debug, Clone)]
pub struct EntangledSet {
    tol: f64,
    weights: DVector<f64>,
    buckets: HashMap<i64, Vec<usize>>,
    states: Vec<DVector<f64>>,
}

impl EntangledSet {
    pub fn new(dim: usize, tol: f64) -> Self {
        // fractional parts of multiples of the golden ratio: distinct and positive
        let phi = 0.618_033_988_749_895_f64;
        let raw = DVector::from_fn(dim, |i, _| 0.1 + ((i as f64 + 1.0) * phi).fract());
        let weights = &raw / raw.sum();
        EntangledSet { tol, weights, buckets: HashMap::new(), states: Vec::new() }
    }

    fn bucket(&self, v: &DVector<f64>) -> i64 {
        (self.weights.dot(v) / self.tol).floor() as i64
    }

    /// Index of a stored state within tolerance of `v`.
    pub fn find(&self, v: &DVector<f64>) -> Option<usize> {
        let b = self.bucket(v);
        (b - 1..=b + 1)
            .filter_map(|k| self.buckets.get(&k))
            .flatten()
            .copied()
            .find(|&i| (&self.states[i] - v).amax() <= self.tol)
    }

    /// Inserts `v` unless an equivalent state is present. Returns the index
    /// and whether it was new.
    pub fn insert(&mut self, v: DVector<f64>) -> (usize, bool) {
        if let Some(i) = self.find(&v) {
            return (i, false);
        }
        let b = self.bucket(&v);
        let i = self.states.len();
        self.states.push(v);
        self.buckets.entry(b).or_default().push(i);
        (i, true)
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[DVector<f64>] {
        &self.states
    }
}

/// Outcome of a breadth-first entangled-state enumeration.
#[derive(Debug, Clone)]
pub struct Enumeration {
    pub states: Vec<EntangledState>,
    /// `false` when the cap stopped the search before closure.
    pub complete: bool,
}

/// Breadth-first closure of the pure states under normalized evolution
/// through every event. Disabled firings are included when
/// `include_disabled` is set.
pub fn enumerate_entangled(gammas: &GammaSet, tol: f64, cap: usize, include_disabled: bool) -> Result<Enumeration> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tol}")));
    }
    let n = gammas.dim();
    let mut seen = EntangledSet::new(n, tol);
    let mut queue = VecDeque::new();
    for i in 0..n {
        let e = EntangledState::pure(n, i, gammas.theta);
        if seen.len() >= cap {
            break;
        }
        seen.insert(e.alpha.clone());
        queue.push_back(e);
    }
    let modes: &[bool] = if include_disabled { &[false, true] } else { &[false] };
    let mut complete = true;
    'outer: while let Some(state) = queue.pop_front() {
        for s in 0..gammas.num_events() {
            for &disabled in modes {
                let next = match evolve(&state, s, disabled, gammas, true) {
                    Ok(next) => next,
                    Err(Error::ImpossibleObservation(_)) => continue,
                    Err(e) => return Err(e),
                };
                if seen.find(&next.alpha).is_some() {
                    continue;
                }
                if seen.len() >= cap {
                    complete = false;
                    break 'outer;
                }
                seen.insert(next.alpha.clone());
                queue.push_back(next);
            }
        }
    }
    let theta = gammas.theta;
    let states = seen.states.into_iter().map(|alpha| EntangledState { alpha, theta }).collect();
    Ok(Enumeration { states, complete })
}

/// `ζ_η`: snaps each coordinate to the nearest multiple of `eta` (halves
/// round up). Pure states are left unchanged.
pub fn eta_quantize(state: &EntangledState, eta: f64) -> Result<EntangledState> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::InvalidParameter(format!("eta must lie in (0, 1], got {eta}")));
    }
    if state.as_pure().is_some() {
        return Ok(state.clone());
    }
    let alpha = state.alpha.map(|x| quantize_coordinate(x, eta));
    Ok(EntangledState { alpha, theta: state.theta })
}

fn quantize_coordinate(x: f64, eta: f64) -> f64 {
    (x / eta + 0.5).floor() * eta
}

/// Finite η-quantized entangled transition system.
#[derive(Debug, Clone)]
pub struct QuantizedSystem {
    pub states: Vec<EntangledState>,
    /// Row-stochastic transition matrix over `states`.
    pub transitions: TransitionMatrix,
    /// `χ_𝓔(α) = ⟨α, χ⟩`.
    pub chi: Vec<f64>,
}

/// Builds the η-quantized entangled transition system reachable from the
/// pure states.
///
/// From a state `α` each event σ is generated with probability
/// `(1−θ) Σ_i 𝒩(α)_i π̃(q_i, σ)`. Observable firings move to
/// `ζ_η(𝒩(αΓ^σ))`; a σ that no state in the support can show to the
/// observer leaves the estimate where it is.
pub fn quantized_system(model: &Pfsa, gammas: &GammaSet, eta: f64, cap: usize) -> Result<QuantizedSystem> {
    let n = model.num_states();
    if gammas.dim() != n {
        return Err(Error::Dimension { expected: n, actual: gammas.dim() });
    }
    let theta = gammas.theta;
    let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut states: Vec<EntangledState> = Vec::new();
    let key = |a: &DVector<f64>| a.iter().map(|x| x.to_bits()).collect::<Vec<u64>>();
    for i in 0..n {
        let e = EntangledState::pure(n, i, theta);
        index.insert(key(&e.alpha), i);
        states.push(e);
    }
    let mut edges: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut cursor = 0;
    while cursor < states.len() {
        let alpha = states[cursor].normalized().alpha;
        let mut out: Vec<(usize, f64)> = Vec::new();
        for s in 0..model.num_events() {
            let p: f64 = (0..n).map(|i| alpha[i] * model.prob(i, s)).sum();
            if p <= 0.0 {
                continue;
            }
            let fired = gammas.gamma[s].tr_mul(&alpha);
            let target = if fired.iter().all(|&x| x <= 0.0) {
                cursor
            } else {
                let next = eta_quantize(&EntangledState { alpha: normalize(&fired), theta }, eta)?;
                if next.alpha.iter().all(|&x| x == 0.0) {
                    return Err(Error::InvalidParameter(format!("eta = {eta} quantizes a reachable state to zero")));
                }
                let k = key(&next.alpha);
                match index.get(&k) {
                    Some(&j) => j,
                    None => {
                        if states.len() >= cap {
                            return Err(Error::StateExplosion(cap));
                        }
                        let j = states.len();
                        index.insert(k, j);
                        states.push(next);
                        j
                    }
                }
            };
            out.push((target, p));
        }
        edges.push(out);
        cursor += 1;
    }
    let size = states.len();
    let mut m = DMatrix::zeros(size, size);
    for (from, out) in edges.iter().enumerate() {
        let total: f64 = out.iter().map(|(_, p)| p).sum();
        for &(to, p) in out {
            m[(from, to)] += p / total;
        }
    }
    let chi = states.iter().map(|s| s.alpha.dot(&DVector::from_column_slice(model.chi()))).collect();
    Ok(QuantizedSystem { states, transitions: TransitionMatrix::new_unchecked(m), chi })
}

/// Measure of the pure states in the η-quantized entangled transition
/// system.
pub fn eta_approximation_measure(model: &Pfsa, theta: f64, eta: f64, cap: usize) -> Result<MeasureVector> {
    let gammas = GammaSet::new(model, theta)?;
    let system = quantized_system(model, &gammas, eta, cap)?;
    let nu = renormalized_measure(&system.transitions, &system.chi, theta)?;
    let n = model.num_states();
    Ok(MeasureVector::new(theta, nu.values.rows(0, n).into_owned()))
}
