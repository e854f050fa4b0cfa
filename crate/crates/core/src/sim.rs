//! Monte-Carlo simulation of a plant under a supervision strategy.
//!
//! One event is generated per tick. Each run draws from its own ChaCha8
//! stream: the generator is seeded with `seed` and switched to stream number
//! `run`, so runs are independent and results do not depend on thread
//! scheduling.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::control::{init_partial, init_perfect, ControllerState, DEFAULT_LAMBDA};
use crate::error::{Error, Result};
use crate::measure::{cesaro_limit, renormalized_measure, MeasureVector};
use crate::model::Pfsa;
use crate::observe::entangled::{EntangledSet, DEFAULT_DEDUP_TOL};
use crate::observe::gamma::GammaSet;
use crate::synthesis::{synthesize_supervisor, SupervisionPolicy};

/// Name of the pseudo-random generator, recorded in every trace.
pub const PRNG: &str = "ChaCha8 (rand_chacha), stream = run index";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Policy {
    /// Nothing is ever disabled.
    Null,
    /// Optimal controller with access to every event.
    Perfect,
    /// Entangled-state controller seeing only observable events.
    Partial,
    /// Perfect-observation controller fed only the observable events.
    PerfectBlind,
}

impl Policy {
    pub const ALL: [Policy; 4] = [Policy::Null, Policy::Perfect, Policy::Partial, Policy::PerfectBlind];

    pub fn name(self) -> &'static str {
        match self {
            Policy::Null => "null",
            Policy::Perfect => "perfect",
            Policy::Partial => "partial",
            Policy::PerfectBlind => "perfect_blind",
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Policy::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown policy `{s}`")))
    }
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub steps: usize,
    pub runs: usize,
    pub seed: u64,
    pub policy: Policy,
    /// Keep the controller's normalized estimate for every tick.
    pub record_entangled: bool,
    pub dedup_tol: f64,
    pub initial_state: usize,
    /// Decision precision of the partial-observation controller.
    pub lambda: f64,
}

impl SimConfig {
    pub fn new(policy: Policy, steps: usize, runs: usize, seed: u64) -> Self {
        SimConfig {
            steps,
            runs,
            seed,
            policy,
            record_entangled: false,
            dedup_tol: DEFAULT_DEDUP_TOL,
            initial_state: 0,
            lambda: DEFAULT_LAMBDA,
        }
    }

    fn check(&self, model: &Pfsa) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::InvalidParameter("runs must be at least 1".into()));
        }
        if !(self.dedup_tol > 0.0) {
            return Err(Error::InvalidParameter("dedup tolerance must be positive".into()));
        }
        if self.initial_state >= model.num_states() {
            return Err(Error::UnknownState(self.initial_state.to_string()));
        }
        Ok(())
    }
}

/// Offline products shared by every run: the optimal policy, the observer
/// matrices at `θ_min` and the unsupervised measure.
#[derive(Debug, Clone)]
pub struct PolicyArtifacts {
    pub policy: SupervisionPolicy,
    pub gamma: GammaSet,
    pub unsupervised: MeasureVector,
}

impl PolicyArtifacts {
    pub fn prepare(model: &Pfsa) -> Result<Self> {
        let policy = synthesize_supervisor(model)?;
        Self::from_policy(model, policy)
    }

    pub fn from_policy(model: &Pfsa, policy: SupervisionPolicy) -> Result<Self> {
        let theta = policy.theta_min;
        let gamma = GammaSet::new(model, theta)?.with_decision_vectors(&policy.certified_measure)?;
        let unsupervised = renormalized_measure(&model.transition_matrix(), model.chi(), theta)?;
        Ok(PolicyArtifacts { policy, gamma, unsupervised })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TickRecord {
    pub tick: usize,
    pub true_state: usize,
    /// Event seen by the controller, `None` when unobservable.
    pub observed: Option<usize>,
    pub chi_hat: f64,
    pub nu_hat: f64,
    pub int_chi: f64,
    pub int_nu: f64,
    /// Distinct controller estimates seen so far in this run.
    pub n_entangled: usize,
    /// Events the supervisor had disabled when this tick's event was drawn.
    pub disabled: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub run: usize,
    pub policy: Policy,
    pub prng: &'static str,
    pub ticks: Vec<TickRecord>,
    /// Normalized controller estimates per tick, when recorded.
    pub entangled: Vec<DVector<f64>>,
    /// Sum over ticks of the normalized controller estimate.
    pub alpha_sum: DVector<f64>,
    /// Ticks spent in each true state.
    pub occupancy: Vec<usize>,
    /// `(from, to)` transition counts of the true plant.
    pub transitions: Vec<Vec<usize>>,
}

impl SimTrace {
    pub fn int_chi(&self) -> f64 {
        self.ticks.last().map_or(0.0, |t| t.int_chi)
    }

    pub fn int_nu(&self) -> f64 {
        self.ticks.last().map_or(0.0, |t| t.int_nu)
    }

    pub fn distinct_entangled(&self) -> usize {
        self.ticks.last().map_or(0, |t| t.n_entangled)
    }
}

/// Samples an event at `state` by inverting the cumulative distribution in
/// declaration order.
pub fn sample_event(model: &Pfsa, state: usize, u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for s in 0..model.num_events() {
        let p = model.prob(state, s);
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = s;
        if u < acc {
            return s;
        }
    }
    last
}

enum Supervisor<'a> {
    None { nu: &'a MeasureVector },
    Exact(ControllerState<'a>),
    Partial(ControllerState<'a>),
    Blind(ControllerState<'a>),
}

impl<'a> Supervisor<'a> {
    fn new(model: &'a Pfsa, art: &'a PolicyArtifacts, cfg: &SimConfig) -> Result<Self> {
        let q0 = cfg.initial_state;
        Ok(match cfg.policy {
            Policy::Null => Supervisor::None { nu: &art.unsupervised },
            Policy::Perfect => Supervisor::Exact(init_perfect(model, &art.policy, q0)?),
            Policy::Partial => Supervisor::Partial(init_partial(model, &art.policy, &art.gamma, q0, cfg.lambda)?),
            Policy::PerfectBlind => Supervisor::Blind(init_perfect(model, &art.policy, q0)?),
        })
    }

    fn disabled_now(&self) -> Vec<usize> {
        match self {
            Supervisor::None { .. } => Vec::new(),
            Supervisor::Exact(c) | Supervisor::Partial(c) | Supervisor::Blind(c) => {
                c.disabled_now().iter().copied().collect()
            }
        }
    }

    fn is_disabled(&self, event: usize) -> bool {
        match self {
            Supervisor::None { .. } => false,
            Supervisor::Exact(c) | Supervisor::Partial(c) | Supervisor::Blind(c) => c.is_disabled(event),
        }
    }

    /// Controller update after the plant fired `event` from state `from`.
    fn update(&mut self, model: &Pfsa, from: usize, event: usize) -> Result<()> {
        match self {
            Supervisor::None { .. } => Ok(()),
            Supervisor::Exact(c) => c.observe_event(event),
            Supervisor::Partial(c) => {
                if model.is_unobservable(from, event) {
                    Ok(())
                } else {
                    c.observe_event(event)
                }
            }
            Supervisor::Blind(c) => {
                if model.is_unobservable(from, event) {
                    return Ok(());
                }
                // the estimate may be wrong; an event it cannot explain is ignored
                let q = c.pure_state().expect("blind controller is pure");
                if model.delta(q, event).is_some() {
                    c.observe_event(event)
                } else {
                    Ok(())
                }
            }
        }
    }

    fn estimate(&self, true_state: usize) -> DVector<f64> {
        match self {
            Supervisor::None { nu } => {
                let mut e = DVector::zeros(nu.len());
                e[true_state] = 1.0;
                e
            }
            Supervisor::Exact(c) | Supervisor::Blind(c) => c.alpha(),
            Supervisor::Partial(c) => {
                let a = c.alpha();
                let s = a.sum();
                a / s
            }
        }
    }

    fn nu_hat(&self, true_state: usize) -> f64 {
        match self {
            Supervisor::None { nu } => nu.get(true_state),
            Supervisor::Exact(c) | Supervisor::Blind(c) | Supervisor::Partial(c) => c.estimated_measure(),
        }
    }
}

fn run_once(model: &Pfsa, art: &PolicyArtifacts, cfg: &SimConfig, run: usize) -> Result<SimTrace> {
    let n = model.num_states();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(run as u64);
    let mut sup = Supervisor::new(model, art, cfg)?;
    let mut q = cfg.initial_state;
    let mut seen = EntangledSet::new(n, cfg.dedup_tol);
    seen.insert(sup.estimate(q));

    let mut ticks = Vec::with_capacity(cfg.steps);
    let mut entangled = Vec::new();
    let mut alpha_sum = DVector::zeros(n);
    let mut occupancy = vec![0usize; n];
    let mut transitions = vec![vec![0usize; n]; n];
    let (mut int_chi, mut int_nu) = (0.0, 0.0);

    for tick in 1..=cfg.steps {
        let disabled = sup.disabled_now();
        let event = sample_event(model, q, rng.random::<f64>());
        let from = q;
        let to = model.delta(q, event).expect("sampled events are defined");
        q = if sup.is_disabled(event) && model.is_controllable(q, event) { q } else { to };
        transitions[from][q] += 1;
        sup.update(model, from, event)?;

        let estimate = sup.estimate(q);
        seen.insert(estimate.clone());
        let chi_hat = model.chi()[q];
        let nu_hat = sup.nu_hat(q);
        int_chi += chi_hat;
        int_nu += nu_hat;
        occupancy[q] += 1;
        alpha_sum += &estimate;
        if cfg.record_entangled {
            entangled.push(estimate);
        }
        ticks.push(TickRecord {
            tick,
            true_state: q,
            observed: (!model.is_unobservable(from, event)).then_some(event),
            chi_hat,
            nu_hat,
            int_chi,
            int_nu,
            n_entangled: seen.len(),
            disabled,
        });
    }
    Ok(SimTrace { run, policy: cfg.policy, prng: PRNG, ticks, entangled, alpha_sum, occupancy, transitions })
}

/// Runs `config.runs` independent replications in parallel.
pub fn simulate(model: &Pfsa, artifacts: &PolicyArtifacts, config: &SimConfig) -> Result<Vec<SimTrace>> {
    model.ensure_valid()?;
    config.check(model)?;
    (0..config.runs).into_par_iter().map(|run| run_once(model, artifacts, config, run)).collect()
}

/// Mean and standard error of a sample.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let k = xs.len() as f64;
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / k;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

/// Across-run means at one tick.
#[derive(Debug, Clone, PartialEq)]
pub struct TickSummary {
    pub tick: usize,
    pub mean_int_chi: f64,
    pub mean_int_nu: f64,
    /// `mean ∫χ̂ / t`, the average slope of the integrated characteristic.
    pub grad_chi: f64,
    pub grad_nu: f64,
    pub mean_n_entangled: f64,
}

/// Per-tick averages over all traces. Traces must share a length.
pub fn summarize(traces: &[SimTrace]) -> Vec<TickSummary> {
    let Some(first) = traces.first() else { return Vec::new() };
    let k = traces.len() as f64;
    (0..first.ticks.len())
        .map(|i| {
            let tick = first.ticks[i].tick;
            let sum = |f: fn(&TickRecord) -> f64| traces.iter().map(|t| f(&t.ticks[i])).sum::<f64>() / k;
            let mean_int_chi = sum(|r| r.int_chi);
            let mean_int_nu = sum(|r| r.int_nu);
            TickSummary {
                tick,
                mean_int_chi,
                mean_int_nu,
                grad_chi: mean_int_chi / tick as f64,
                grad_nu: mean_int_nu / tick as f64,
                mean_n_entangled: sum(|r| r.n_entangled as f64),
            }
        })
        .collect()
}

/// Mean normalized controller estimate over all ticks and runs, paired
/// with the stationary distribution `C(Π⋆)` row of the initial state for
/// the plant supervised by `policy`.
pub fn expected_entangled_vs_stationary(
    model: &Pfsa,
    policy: &SupervisionPolicy,
    traces: &[SimTrace],
    initial_state: usize,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let n = model.num_states();
    let total: usize = traces.iter().map(|t| t.ticks.len()).sum();
    if total == 0 {
        return Err(Error::InvalidParameter("traces contain no ticks".into()));
    }
    let mean = traces.iter().fold(DVector::zeros(n), |acc, t| acc + &t.alpha_sum) / total as f64;
    let pi = model.apply_disabling(&policy.disabled)?.transition_matrix();
    let c = cesaro_limit(&pi)?;
    Ok((mean, c.row(initial_state).transpose()))
}

/// Fraction of ticks spent in each true state, over all traces.
pub fn empirical_occupancy(traces: &[SimTrace]) -> DVector<f64> {
    let n = traces.first().map_or(0, |t| t.occupancy.len());
    let mut v = DVector::zeros(n);
    for t in traces {
        for (i, &c) in t.occupancy.iter().enumerate() {
            v[i] += c as f64;
        }
    }
    let total = v.sum();
    if total > 0.0 {
        v / total
    } else {
        v
    }
}

/// Distinct estimates across all traces (recorded estimates required).
#[derive(Debug, Clone, PartialEq)]
pub struct EntangledCount {
    /// Union size after each tick, scanning runs tick by tick.
    pub per_tick: Vec<usize>,
    pub total: usize,
}

pub fn count_entangled(traces: &[SimTrace], tol: f64) -> Result<EntangledCount> {
    let Some(first) = traces.first() else {
        return Ok(EntangledCount { per_tick: Vec::new(), total: 0 });
    };
    if traces.iter().any(|t| t.entangled.len() != t.ticks.len()) {
        return Err(Error::InvalidParameter("traces were simulated without recording estimates".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter("dedup tolerance must be positive".into()));
    }
    let mut set = EntangledSet::new(first.alpha_sum.len(), tol);
    let steps = traces.iter().map(|t| t.ticks.len()).max().unwrap_or(0);
    let mut per_tick = Vec::with_capacity(steps);
    for i in 0..steps {
        for t in traces {
            if let Some(a) = t.entangled.get(i) {
                set.insert(a.clone());
            }
        }
        per_tick.push(set.len());
    }
    Ok(EntangledCount { total: set.len(), per_tick })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn artifacts(g: &Pfsa) -> PolicyArtifacts {
        PolicyArtifacts::prepare(g).unwrap()
    }

    #[test]
    fn zero_steps_gives_empty_traces() {
        let g = fixtures::mission();
        let art = artifacts(&g);
        let traces = simulate(&g, &art, &SimConfig::new(Policy::Null, 0, 3, 1)).unwrap();
        assert_eq!(traces.len(), 3);
        assert!(traces.iter().all(|t| t.ticks.is_empty() && t.int_chi() == 0.0 && t.int_nu() == 0.0));
    }

    #[test]
    fn deterministic_for_a_seed() {
        let g = fixtures::mission();
        let art = artifacts(&g);
        for p in Policy::ALL {
            let cfg = SimConfig::new(p, 200, 4, 42);
            assert_eq!(simulate(&g, &art, &cfg).unwrap(), simulate(&g, &art, &cfg).unwrap());
        }
        let a = simulate(&g, &art, &SimConfig::new(Policy::Null, 50, 1, 1)).unwrap();
        let b = simulate(&g, &art, &SimConfig::new(Policy::Null, 50, 1, 2)).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn integrals_are_prefix_sums() {
        let g = fixtures::tiger();
        let art = artifacts(&g);
        let traces = simulate(&g, &art, &SimConfig::new(Policy::Partial, 300, 2, 7)).unwrap();
        for t in &traces {
            let (mut c, mut v) = (0.0, 0.0);
            for r in &t.ticks {
                c += r.chi_hat;
                v += r.nu_hat;
                assert_eq!(r.int_chi, c);
                assert_eq!(r.int_nu, v);
                assert!((-1.0..=1.0).contains(&r.chi_hat));
            }
        }
    }

    #[test]
    fn null_sampler_matches_transition_matrix() {
        let g = fixtures::mission();
        let art = artifacts(&g);
        let steps = 200_000;
        let traces = simulate(&g, &art, &SimConfig::new(Policy::Null, steps, 1, 3)).unwrap();
        let pi = g.transition_matrix();
        let counts = &traces[0].transitions;
        for (i, from) in counts.iter().enumerate() {
            let row: usize = from.iter().sum();
            for (j, &c) in from.iter().enumerate() {
                let f = c as f64 / row as f64;
                assert!((f - pi.as_matrix()[(i, j)]).abs() < 3.0 / (row as f64).sqrt(), "({i},{j})");
            }
        }
    }

    #[test]
    fn perfect_nu_hat_is_nu_star_at_true_state() {
        let g = fixtures::mission();
        let art = artifacts(&g);
        let traces = simulate(&g, &art, &SimConfig::new(Policy::Perfect, 500, 1, 9)).unwrap();
        for r in &traces[0].ticks {
            assert_eq!(r.nu_hat, art.policy.certified_measure.get(r.true_state));
        }
    }

    #[test]
    fn perfect_measure_and_characteristic_agree_in_mean() {
        let g = fixtures::mission();
        let art = artifacts(&g);
        let traces = simulate(&g, &art, &SimConfig::new(Policy::Perfect, 20_000, 8, 11)).unwrap();
        let gaps: Vec<f64> = traces.iter().map(|t| (t.int_nu() - t.int_chi()) / 20_000.0).collect();
        let (m, se) = mean_se(&gaps);
        assert!(m.abs() < 4.0 * se.max(1e-3), "gap {m} se {se}");
    }

    #[test]
    fn fully_observable_estimate_is_occupancy() {
        let g = fixtures::mission().fully_observable();
        let art = artifacts(&g);
        let mut cfg = SimConfig::new(Policy::Partial, 5_000, 4, 5);
        cfg.record_entangled = true;
        let traces = simulate(&g, &art, &cfg).unwrap();
        let (mean, stationary) = expected_entangled_vs_stationary(&g, &art.policy, &traces, 0).unwrap();
        let occ = empirical_occupancy(&traces);
        assert!((&mean - &occ).amax() < 1e-12);
        assert!((mean - stationary).amax() < 0.03);
        let count = count_entangled(&traces, DEFAULT_DEDUP_TOL).unwrap();
        assert!(count.total <= 4);
    }

    #[test]
    fn deterministic_cycle_is_uniform() {
        let names = |p: &str| (0..3).map(|i| format!("{p}{i}")).collect::<Vec<_>>();
        let mut g = Pfsa::new(names("q"), vec!["x".into()]);
        for q in 0..3 {
            g.set_transition(q, 0, (q + 1) % 3, 1.0);
        }
        g.set_chi(0, 1.0);
        let art = artifacts(&g);
        let traces = simulate(&g, &art, &SimConfig::new(Policy::Partial, 3_000, 1, 0)).unwrap();
        let (mean, stationary) = expected_entangled_vs_stationary(&g, &art.policy, &traces, 0).unwrap();
        for i in 0..3 {
            assert!((mean[i] - 1.0 / 3.0).abs() < 1e-9);
            assert!((stationary[i] - 1.0 / 3.0).abs() < 1e-9);
        }
    }

    #[test]
    fn count_requires_recording() {
        let g = fixtures::mission();
        let art = artifacts(&g);
        let traces = simulate(&g, &art, &SimConfig::new(Policy::Partial, 10, 1, 0)).unwrap();
        assert!(count_entangled(&traces, 1e-10).is_err());
    }

    #[test]
    fn policy_names_round_trip() {
        for p in Policy::ALL {
            assert_eq!(p.name().parse::<Policy>().unwrap(), p);
        }
        assert!("bogus".parse::<Policy>().is_err());
    }
}
