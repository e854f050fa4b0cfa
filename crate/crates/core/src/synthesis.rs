//! Optimal supervisor synthesis for perfectly observable plants.
//!
//! Synthesis is a policy iteration on the θ-terminating plant: evaluate the
//! renormalized measure of the current supervised plant, then disable every
//! controllable transition that leads to a strictly lower-measure state.
//! The termination probability is driven by the critical lower bound `θ⋆`,
//! below which the enable/disable ordering no longer changes.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::measure::{cesaro_limit, lu_inverse, measure_solve, renormalized_measure, MeasureVector, TransitionMatrix};
use crate::model::{DisablingSet, Pfsa};

/// Largest `|𝒞|` accepted by [`brute_force_optimal`].
pub const BRUTE_FORCE_MAX: usize = 16;

/// Measures closer than this are treated as equal (and the transition enabled).
pub const TIE_TOL: f64 = 1e-12;

/// Differences of Cesàro-expansion terms below this are treated as zero
/// when computing `θ⋆`.
pub const THETA_STAR_ZERO_TOL: f64 = 1e-10;

/// `θ` used before the first bound is computed.
pub const INITIAL_THETA: f64 = 0.99;

const MAX_STABILITY_HALVINGS: usize = 40;

/// Disabling set with the measure certifying it.
#[derive(Debug, Clone, PartialEq)]
pub struct SupervisionPolicy {
    pub disabled: DisablingSet,
    /// `ν⋆`: measure of the supervised plant at `theta_min`.
    pub certified_measure: MeasureVector,
    pub theta_min: f64,
    pub iterations: Vec<SynthesisIteration>,
}

/// One pass of the synthesis loop.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisIteration {
    pub theta: f64,
    /// Measure of the plant supervised by the previous iteration's set.
    pub measure: MeasureVector,
    pub disabled: DisablingSet,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SynthesisOptions {
    /// Finite comparison precision λ on the unnormalized measure `ν/θ`.
    pub precision: Option<f64>,
    /// Fixed θ, bypassing the `θ⋆` computation.
    pub theta_override: Option<f64>,
}

/// Critical lower bound `θ⋆` for the plant `Π` with characteristic `χ`.
///
/// Uses `M₀ = [I − Π + C]⁻¹(I − C)`, `M₁ = I − M₀` and the upper bound
/// `M₂ = ‖[I − Π + C]⁻¹‖∞`.
pub fn theta_star(pi: &TransitionMatrix, chi: &[f64]) -> Result<f64> {
    let n = pi.dim();
    if chi.len() != n {
        return Err(Error::Dimension { expected: n, actual: chi.len() });
    }
    let c = cesaro_limit(pi)?;
    let eye = DMatrix::<f64>::identity(n, n);
    let z = lu_inverse(&eye - pi.as_matrix() + &c)?;
    let m0 = &z * (&eye - &c);
    let m1 = &eye - &m0;
    let m2 = (0..n).map(|i| z.row(i).iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max);

    let chi = DVector::from_column_slice(chi);
    let c_chi = &c * &chi;
    let m0_minus_c_chi = (&m0 - &c) * &chi;
    // expansion[r] = M₀ M₁ʳ χ for r = 0..=n
    let mut expansion = Vec::with_capacity(n + 1);
    let mut w = chi.clone();
    for _ in 0..=n {
        expansion.push(&m0 * &w);
        w = &m1 * &w;
    }

    let distinct = |v: &DVector<f64>, i: usize, j: usize| (v[i] - v[j]).abs() > THETA_STAR_ZERO_TOL;
    let mut theta = 1.0_f64;
    for j in 0..n {
        for i in 0..n {
            let current = if distinct(&c_chi, i, j) {
                (c_chi[i] - c_chi[j]).abs() / (8.0 * m2)
            } else {
                let r = (0..=n).find(|&r| distinct(&expansion[r], i, j));
                match r {
                    Some(0) => (m0_minus_c_chi[i] - m0_minus_c_chi[j]).abs() / (8.0 * m2),
                    Some(r) => (expansion[r][i] - expansion[r][j]).abs() / (2f64.powi(r as i32 + 3) * m2),
                    None => 1.0,
                }
            };
            theta = theta.min(current);
        }
    }
    Ok(theta)
}

/// Controllable transitions leading to a lower-measure state. Equal
/// measures keep the transition enabled.
///
/// With a finite `precision` λ, states whose unnormalized measures `ν/θ`
/// differ by at most λ count as equal. Otherwise ties are resolved at
/// [`TIE_TOL`] on `ν` itself.
pub fn disabling_decisions(model: &Pfsa, nu: &[f64], theta: f64, precision: Option<f64>) -> DisablingSet {
    let tol = precision.map_or(TIE_TOL, |l| l * theta);
    model
        .controllable_pairs()
        .into_iter()
        .filter(|&(q, s)| {
            let target = model.delta(q, s).expect("controllable pairs are defined");
            nu[target] < nu[q] - tol
        })
        .collect()
}

/// Computes the optimal, maximally permissive disabling set.
pub fn synthesize_supervisor(model: &Pfsa) -> Result<SupervisionPolicy> {
    synthesize_with(model, &SynthesisOptions::default())
}

/// Synthesis with explicit options.
///
/// The first pass drives `θ` down to `θ_min` while iterating. The policy
/// is then recomputed by policy iteration at the fixed `θ_min`, starting
/// from the empty disabling set; those passes are the ones recorded.
pub fn synthesize_with(model: &Pfsa, opts: &SynthesisOptions) -> Result<SupervisionPolicy> {
    model.ensure_valid()?;
    let theta_min = match opts.theta_override {
        Some(t) if t > 0.0 && t < 1.0 => t,
        Some(t) => {
            return Err(Error::InvalidParameter(format!("theta override must lie in (0, 1), got {t}")));
        }
        None => critical_theta(model, opts.precision)?,
    };
    let mut iterations = Vec::new();
    let disabled = iterate(model, opts.precision, |_, _| Ok(theta_min), |it| iterations.push(it))?;
    let last = iterations.last().expect("at least one iteration");
    Ok(SupervisionPolicy { disabled, certified_measure: last.measure.clone(), theta_min, iterations })
}

/// Iteration cap `2^|𝒞| + 1`, saturating at `2^20 + 1`.
fn iteration_cap(model: &Pfsa) -> usize {
    let n_ctrl = model.controllable_pairs().len().min(20);
    (1usize << n_ctrl) + 1
}

/// Runs the disable/enable iteration until the disabling set repeats.
/// `theta_for(previous θ, Π)` chooses θ for each pass.
fn iterate(
    model: &Pfsa,
    precision: Option<f64>,
    mut theta_for: impl FnMut(f64, &TransitionMatrix) -> Result<f64>,
    mut record: impl FnMut(SynthesisIteration),
) -> Result<DisablingSet> {
    let cap = iteration_cap(model);
    let mut seen = Vec::new();
    let mut previous = DisablingSet::new();
    let mut theta = INITIAL_THETA;
    for _ in 0..cap {
        let pi = model.supervised_matrix(&previous);
        theta = theta_for(theta, &pi)?;
        let measure = renormalized_measure(&pi, model.chi(), theta)?;
        let disabled = disabling_decisions(model, measure.as_slice(), theta, precision);
        record(SynthesisIteration { theta, measure, disabled: disabled.clone() });
        if disabled == previous {
            return Ok(disabled);
        }
        if seen.contains(&disabled) {
            return Ok(previous);
        }
        seen.push(previous);
        previous = disabled;
    }
    Err(Error::IterationCap(cap))
}

/// `θ_min`: the smallest `θ⋆` met along the iteration, each one halved
/// until decisions at `θ` and `θ/2` agree.
fn critical_theta(model: &Pfsa, precision: Option<f64>) -> Result<f64> {
    let mut theta_min = INITIAL_THETA;
    iterate(
        model,
        precision,
        |prev, pi| {
            let t = prev.min(theta_star(pi, model.chi())?);
            stabilize_theta(model, pi, t, precision)
        },
        |it| theta_min = theta_min.min(it.theta),
    )?;
    Ok(theta_min)
}

/// Halves `theta` until the decisions taken at `theta` and `theta / 2` agree.
fn stabilize_theta(model: &Pfsa, pi: &TransitionMatrix, mut theta: f64, precision: Option<f64>) -> Result<f64> {
    let chi = DVector::from_column_slice(model.chi());
    for _ in 0..MAX_STABILITY_HALVINGS {
        let here = measure_solve(pi.as_matrix(), &chi, theta)?;
        let half = measure_solve(pi.as_matrix(), &chi, theta / 2.0)?;
        if disabling_decisions(model, here.as_slice(), theta, precision)
            == disabling_decisions(model, half.as_slice(), theta / 2.0, precision)
        {
            return Ok(theta);
        }
        theta /= 2.0;
    }
    Ok(theta)
}

/// Result of exhaustive search over all disabling subsets.
#[derive(Debug, Clone)]
pub struct BruteForceResult {
    /// Smallest disabling set achieving the elementwise maximum.
    pub disabled: DisablingSet,
    pub measure: MeasureVector,
    /// Every disabling set whose measure equals the maximum within tolerance.
    pub optimal_sets: Vec<DisablingSet>,
}

/// Enumerates all `2^|𝒞|` disabling subsets at fixed `θ`.
pub fn brute_force_optimal(model: &Pfsa, theta: f64, tol: f64) -> Result<BruteForceResult> {
    let ctrl = model.controllable_pairs();
    if ctrl.len() > BRUTE_FORCE_MAX {
        return Err(Error::TooManyControllable(ctrl.len()));
    }
    let chi = DVector::from_column_slice(model.chi());
    let mut all = Vec::with_capacity(1 << ctrl.len());
    for mask in 0u32..(1u32 << ctrl.len()) {
        let set: DisablingSet =
            ctrl.iter().enumerate().filter(|(b, _)| mask & (1 << b) != 0).map(|(_, &p)| p).collect();
        let nu = measure_solve(model.supervised_matrix(&set).as_matrix(), &chi, theta)?;
        all.push((set, nu));
    }
    let n = model.num_states();
    let best = DVector::from_fn(n, |i, _| all.iter().map(|(_, v)| v[i]).fold(f64::NEG_INFINITY, f64::max));
    let mut optimal_sets: Vec<(DisablingSet, DVector<f64>)> =
        all.into_iter().filter(|(_, v)| v.iter().zip(best.iter()).all(|(a, b)| *a >= b - tol)).collect();
    if optimal_sets.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "no disabling set attains the elementwise maximum at theta = {theta:e}"
        )));
    }
    optimal_sets.sort_by_key(|(s, _)| s.len());
    let (disabled, values) = optimal_sets[0].clone();
    Ok(BruteForceResult {
        disabled,
        measure: MeasureVector::new(theta, values),
        optimal_sets: optimal_sets.into_iter().map(|(s, _)| s).collect(),
    })
}

/// Moves `beta` of row `row` between columns `j` and `k`, towards whichever
/// has the higher measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Perturbation {
    pub row: usize,
    pub j: usize,
    pub k: usize,
    pub beta: f64,
}

#[derive(Debug, Clone)]
pub struct MonotonicityReport {
    pub holds: bool,
    pub original: MeasureVector,
    pub reconfigured: MeasureVector,
    pub reconfigured_matrix: TransitionMatrix,
}

/// Reconfigures `pi` by shifting probability mass towards higher-measure
/// columns and checks that the measure does not decrease anywhere.
pub fn reconfigure_and_check_monotone(
    chi: &[f64],
    pi: &TransitionMatrix,
    perturbations: &[Perturbation],
    theta: f64,
) -> Result<MonotonicityReport> {
    let original = renormalized_measure(pi, chi, theta)?;
    let n = pi.dim();
    let mut m = pi.as_matrix().clone();
    for (index, p) in perturbations.iter().enumerate() {
        let bad = |reason: &str| Error::InvalidPerturbation { index, reason: reason.to_string() };
        if p.row >= n || p.j >= n || p.k >= n {
            return Err(bad("index out of range"));
        }
        if !(p.beta > 0.0) {
            return Err(bad("beta must be positive"));
        }
        let (vj, vk) = (original.values[p.j], original.values[p.k]);
        let (from, to) = if vj > vk + TIE_TOL {
            (p.k, p.j)
        } else if vj < vk - TIE_TOL {
            (p.j, p.k)
        } else {
            continue;
        };
        if m[(p.row, from)] < p.beta {
            return Err(bad("moved mass exceeds the source entry"));
        }
        m[(p.row, from)] -= p.beta;
        m[(p.row, to)] += p.beta;
    }
    let reconfigured_matrix = TransitionMatrix::new(m)?;
    let reconfigured = renormalized_measure(&reconfigured_matrix, chi, theta)?;
    let holds = reconfigured.dominates(&original, 1e-10);
    Ok(MonotonicityReport { holds, original, reconfigured, reconfigured_matrix })
}
