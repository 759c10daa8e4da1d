//! Discrete-time leaky integrate-and-fire dynamics.
//!
//! ```text
//! u(t) = (1 - 1/tau) * u(t-1) + i(t) / C
//! s(t) = 1 and u(t) = 0   if u(t) >= u_thresh(t)
//! ```
//!
//! The spike condition is evaluated on the potential of the same timestep,
//! and potentials are not clamped from below.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeuronConfig {
    /// Membrane time constant in timesteps, must exceed 1.
    pub tau_mem: f64,
    pub capacitance: f64,
    /// Only appears in the continuous form; kept for completeness.
    pub resistance: f64,
}

impl Default for NeuronConfig {
    fn default() -> Self {
        Self {
            tau_mem: 2.0,
            capacitance: 1.0,
            resistance: 1.0,
        }
    }
}

impl NeuronConfig {
    pub fn with_tau(tau_mem: f64) -> Self {
        Self {
            tau_mem,
            ..Self::default()
        }
    }

    /// Per-step retention factor `1 - 1/tau`.
    pub fn decay(&self) -> f64 {
        1.0 - 1.0 / self.tau_mem
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau_mem > 1.0) || !self.tau_mem.is_finite() {
            return Err(Error::Config(format!(
                "tau_mem must be a finite value > 1, got {}",
                self.tau_mem
            )));
        }
        if !(self.capacitance > 0.0) {
            return Err(Error::Config(format!(
                "capacitance must be positive, got {}",
                self.capacitance
            )));
        }
        Ok(())
    }
}

/// Membrane potentials and the fire flags of the latest step.
#[derive(Debug, Clone, PartialEq)]
pub struct MembraneState {
    pub potential: Vec<f64>,
    pub fired: Vec<bool>,
}

impl MembraneState {
    pub fn resting(len: usize) -> Self {
        Self {
            potential: vec![0.0; len],
            fired: vec![false; len],
        }
    }

    pub fn len(&self) -> usize {
        self.potential.len()
    }

    pub fn is_empty(&self) -> bool {
        self.potential.is_empty()
    }

    pub fn reset(&mut self) {
        self.potential.iter_mut().for_each(|u| *u = 0.0);
        self.fired.iter_mut().for_each(|f| *f = false);
    }
}

/// Single-neuron update. Returns the stored potential and whether it fired.
#[inline]
pub fn integrate(potential: f64, current: f64, threshold: f64, decay: f64, inv_c: f64) -> (f64, bool) {
    let u = decay * potential + current * inv_c;
    if u >= threshold {
        (0.0, true)
    } else {
        (u, false)
    }
}

/// Advances every neuron by one timestep and returns the spike vector.
pub fn lif_step(
    state: &mut MembraneState,
    current: &[f64],
    threshold: &[f64],
    config: &NeuronConfig,
) -> Result<Vec<bool>> {
    let n = state.len();
    if current.len() != n || threshold.len() != n {
        return Err(Error::Shape(format!(
            "lif_step: {n} neurons, {} currents, {} thresholds",
            current.len(),
            threshold.len()
        )));
    }
    let decay = config.decay();
    let inv_c = 1.0 / config.capacitance;
    for k in 0..n {
        if !current[k].is_finite() || !state.potential[k].is_finite() {
            return Err(Error::Divergence {
                layer: "membrane",
                neuron: k,
                value: if current[k].is_finite() {
                    state.potential[k]
                } else {
                    current[k]
                },
            });
        }
        if !(threshold[k] > 0.0) {
            return Err(Error::NonPositiveThreshold(threshold[k]));
        }
        let (u, s) = integrate(state.potential[k], current[k], threshold[k], decay, inv_c);
        state.potential[k] = u;
        state.fired[k] = s;
    }
    Ok(state.fired.clone())
}
