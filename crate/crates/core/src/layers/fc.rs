//! Fully connected spiking layer with homeostatic threshold offsets.

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neuron::{MembraneState, NeuronConfig};
use crate::plasticity::normalize_fc;

use super::competition::{asf_filter, competitive_step, Thresholds, Wta};
use super::Mechanisms;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FcParams {
    pub inputs: usize,
    pub neurons: usize,
    pub neuron: NeuronConfig,
    pub theta_init: f64,
    pub alpha_plus: f64,
    /// Ceiling on the effective threshold `theta_init + theta_plus`.
    pub gamma: f64,
    pub alpha_inh: f64,
    pub alpha_asf: f64,
    pub beta_asf: f64,
    /// Apply the synaptic filter against each neuron's threshold.
    pub asf: bool,
    /// Winner-take-all and lateral inhibition in this layer.
    pub competition: bool,
    pub mechanisms: Mechanisms,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FcLayer {
    /// `neurons x inputs`
    pub weights: Array2<f64>,
    pub theta_plus: Vec<f64>,
    pub params: FcParams,
}

impl FcLayer {
    /// Uniform `[0, 1)` weights rescaled once to mean `a_minus_fc`.
    pub fn init<R: Rng>(params: FcParams, a_minus_fc: f64, rng: &mut R) -> Result<Self> {
        if params.inputs == 0 || params.neurons == 0 {
            return Err(Error::Config("fc layer needs inputs and neurons".into()));
        }
        let mut weights = Array2::from_shape_simple_fn((params.neurons, params.inputs), || rng.gen::<f64>());
        normalize_fc(weights.as_slice_mut().expect("standard layout"), params.inputs, a_minus_fc)?;
        Ok(Self {
            weights,
            theta_plus: vec![0.0; params.neurons],
            params,
        })
    }

    pub fn weight_slice(&self) -> &[f64] {
        self.weights.as_slice().expect("standard layout")
    }

    pub fn weight_slice_mut(&mut self) -> &mut [f64] {
        self.weights.as_slice_mut().expect("standard layout")
    }

    /// `i_j = sum_k w_jk x_k`, summed in ascending `k`. Zero inputs are
    /// skipped, which leaves every sum bitwise unchanged.
    pub fn forward_current(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.params.inputs {
            return Err(Error::Shape(format!(
                "fc: {} inputs for fan-in {}",
                input.len(),
                self.params.inputs
            )));
        }
        let active: Vec<(usize, f64)> = input
            .iter()
            .enumerate()
            .filter(|(_, &x)| x != 0.0)
            .map(|(k, &x)| (k, x))
            .collect();
        let fan_in = self.params.inputs;
        Ok(self
            .weight_slice()
            .chunks_exact(fan_in)
            .map(|row| {
                let mut acc = 0.0;
                for &(k, x) in &active {
                    acc += row[k] * x;
                }
                acc
            })
            .collect())
    }

    /// Effective firing threshold of every neuron.
    pub fn thresholds(&self) -> Vec<f64> {
        if self.params.mechanisms.atb {
            self.theta_plus.iter().map(|th| self.params.theta_init + th).collect()
        } else {
            vec![self.params.theta_init; self.params.neurons]
        }
    }

    /// Drive after the optional synaptic filter.
    pub fn drive(&self, current: &[f64], thresholds: &[f64]) -> Result<Vec<f64>> {
        if !self.params.asf {
            return Ok(current.to_vec());
        }
        current
            .iter()
            .zip(thresholds)
            .map(|(&i, &t)| asf_filter(i, t, self.params.alpha_asf, self.params.beta_asf))
            .collect()
    }

    /// One LIF step for a single sample with precomputed current and
    /// thresholds; competition applies when enabled.
    pub fn forward_step<R: Rng>(
        &self,
        membrane: &mut MembraneState,
        current: &[f64],
        thresholds: &[f64],
        rng: &mut R,
    ) -> Result<Vec<bool>> {
        let drive = self.drive(current, thresholds)?;
        let mut spikes = vec![false; self.params.neurons];
        if self.params.competition {
            let reference = current.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let alic = self.params.mechanisms.alic.then_some((reference, self.params.alpha_inh));
            let mut winners = [Vec::new()];
            competitive_step(
                "fc",
                std::slice::from_mut(membrane),
                std::slice::from_ref(&drive),
                std::slice::from_ref(&current.to_vec()),
                Thresholds::PerNeuron(thresholds),
                &self.params.neuron,
                Wta::Layer,
                std::slice::from_mut(rng),
                alic,
                &mut winners,
            )?;
            for &w in &winners[0] {
                spikes[w] = true;
            }
        } else {
            crate::neuron::lif_step(membrane, &drive, thresholds, &self.params.neuron)?;
            spikes.copy_from_slice(&membrane.fired);
        }
        Ok(spikes)
    }
}
