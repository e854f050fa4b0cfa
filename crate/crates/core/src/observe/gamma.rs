//! Event-indexed transition matrices of the fraction net observer.
//!
//! Row `i` of `Γ^σ` is the marking produced by firing σ from a unit token in
//! place `q_i`: zero when σ is undefined or unobservable at `q_i`, otherwise
//! row `δ(q_i, σ)` of `[I − (1−θ)𝒫(Π)]⁻¹`. Its entries are the arc weights
//! of the observer. `Γ_D^σ` is the same firing when σ has been disabled: a
//! controllable and observable σ self-loops, so the row becomes `e_i`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::measure::MeasureVector;
use crate::model::Pfsa;
use crate::observe::phantom::PhantomAutomaton;

#[derive(Debug, Clone, PartialEq)]
pub struct GammaSet {
    pub theta: f64,
    /// `Γ^σ` per event, in event declaration order.
    pub gamma: Vec<DMatrix<f64>>,
    /// `Γ_D^σ` per event.
    pub gamma_disabled: Vec<DMatrix<f64>>,
    /// `T^σ = (Γ^σ − Γ_D^σ)ν⋆`; empty until decision vectors are attached.
    pub t_vectors: Vec<DVector<f64>>,
    /// `[I − (1−θ)𝒫(Π)]⁻¹`, the unobservable occupancy matrix.
    pub occupancy: DMatrix<f64>,
}

impl GammaSet {
    /// Builds `Γ^σ` and `Γ_D^σ` for every event. `θ` may be zero.
    pub fn new(model: &Pfsa, theta: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&theta) {
            return Err(Error::InvalidParameter(format!("theta must lie in [0, 1), got {theta}")));
        }
        let n = model.num_states();
        let occupancy = PhantomAutomaton::new(model).occupancy(theta)?;
        let mut gamma = Vec::with_capacity(model.num_events());
        let mut gamma_disabled = Vec::with_capacity(model.num_events());
        for s in 0..model.num_events() {
            let mut g = DMatrix::zeros(n, n);
            let mut gd = DMatrix::zeros(n, n);
            for q in 0..n {
                if let Some(to) = model.delta(q, s) {
                    if !model.is_unobservable(q, s) {
                        g.set_row(q, &occupancy.row(to));
                    }
                }
                if model.is_controllable(q, s) {
                    gd[(q, q)] = 1.0;
                } else {
                    gd.set_row(q, &g.row(q));
                }
            }
            gamma.push(g);
            gamma_disabled.push(gd);
        }
        Ok(GammaSet { theta, gamma, gamma_disabled, t_vectors: Vec::new(), occupancy })
    }

    /// Attaches `T^σ = (Γ^σ − Γ_D^σ)ν⋆`.
    pub fn with_decision_vectors(mut self, nu_star: &MeasureVector) -> Result<Self> {
        let n = self.occupancy.nrows();
        if nu_star.len() != n {
            return Err(Error::Dimension { expected: n, actual: nu_star.len() });
        }
        self.t_vectors =
            self.gamma.iter().zip(&self.gamma_disabled).map(|(g, gd)| (g - gd) * &nu_star.values).collect();
        Ok(self)
    }

    pub fn num_events(&self) -> usize {
        self.gamma.len()
    }

    pub fn dim(&self) -> usize {
        self.occupancy.nrows()
    }
}

/// `Γ^σ`, `Γ_D^σ` and `T^σ` for `model` at termination probability `theta`.
pub fn gamma_matrices(model: &Pfsa, theta: f64, nu_star: &MeasureVector) -> Result<GammaSet> {
    GammaSet::new(model, theta)?.with_decision_vectors(nu_star)
}
