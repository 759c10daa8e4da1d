use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::layers::competition::competitive_step;
use crate::layers::pool::{pooled_index, spike_normalize};
use crate::layers::{ConvLayer, FcLayer, Thresholds, Wta};
use crate::neuron::{lif_step, MembraneState};
use crate::seed;

use super::spec::NetworkSpec;

/// Conv layer, pooling and FC layer with their learned state.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub spec: NetworkSpec,
    pub conv: ConvLayer,
    pub fc: FcLayer,
}

impl Network {
    pub fn init(spec: NetworkSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = seed::rng(seed, seed::INIT, 0);
        let conv = ConvLayer::init(spec.conv_params(), spec.a_minus_conv, &mut rng)?;
        let fc = FcLayer::init(spec.fc_params(), spec.a_minus_fc, &mut rng)?;
        Ok(Self { spec, conv, fc })
    }

    /// Rebuilds layer parameters after `spec` was edited in place (weights
    /// are kept).
    pub fn refresh_params(&mut self) -> Result<()> {
        self.spec.validate()?;
        self.conv.params = self.spec.conv_params();
        self.fc.params = self.spec.fc_params();
        Ok(())
    }

    /// Runs the frozen conv layer on one direct-encoded image for the full
    /// presentation and returns the spike-normalized pooled rates that feed
    /// the FC layer.
    pub fn conv_features(&self, image: &[f64], stream_seed: u64) -> Result<Vec<f64>> {
        let counts = self.conv_pooled_counts(image, stream_seed)?;
        Ok(spike_normalize(&counts))
    }

    /// Pooled spike counts of the conv layer over the presentation.
    pub fn conv_pooled_counts(&self, image: &[f64], stream_seed: u64) -> Result<Vec<u32>> {
        let g = *self.conv.geometry();
        let current = self.conv.forward_current(image)?;
        let (threshold, drive) = self.conv.drive(&current)?;
        let reference = current.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let alic = self.conv.params.mechanisms.alic.then_some((reference, self.conv.params.alpha_inh));
        let mut membrane = vec![MembraneState::resting(g.output_len())];
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed);
        let mut counts = vec![0u32; self.spec.pooled_len()];
        // step at which each pooled unit last fired: 2x2 pooling is an OR
        let mut stamp = vec![usize::MAX; counts.len()];
        let thr = [threshold];
        let drive = [drive];
        let current = [current];
        let mut winners = [Vec::new()];
        for t in 0..self.spec.timesteps {
            competitive_step(
                "conv",
                &mut membrane,
                &drive,
                &current,
                Thresholds::PerSample(&thr),
                &self.conv.params.neuron,
                self.conv.wta(),
                std::slice::from_mut(&mut rng),
                alic,
                &mut winners,
            )?;
            for &w in &winners[0] {
                let (c, y, x) = g.unravel(w);
                if let Some(p) = pooled_index(c, y, x, g.out_height(), g.out_width()) {
                    if stamp[p] != t {
                        stamp[p] = t;
                        counts[p] += 1;
                    }
                }
            }
        }
        Ok(counts)
    }

    /// Spike counts of every FC neuron for one feature vector, with
    /// thresholds frozen.
    pub fn fc_counts(&self, features: &[f64], stream_seed: u64) -> Result<Vec<u32>> {
        let current = self.fc.forward_current(features)?;
        let thresholds = self.fc.thresholds();
        let drive = self.fc.drive(&current, &thresholds)?;
        let n = self.fc.params.neurons;
        let mut counts = vec![0u32; n];
        let mut membrane = vec![MembraneState::resting(n)];
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed);
        if self.fc.params.competition {
            let reference = current.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let alic = self.fc.params.mechanisms.alic.then_some((reference, self.fc.params.alpha_inh));
            let drive = [drive];
            let current = [current];
            let mut winners = [Vec::new()];
            for _ in 0..self.spec.timesteps {
                competitive_step(
                    "fc",
                    &mut membrane,
                    &drive,
                    &current,
                    Thresholds::PerNeuron(&thresholds),
                    &self.fc.params.neuron,
                    Wta::Layer,
                    std::slice::from_mut(&mut rng),
                    alic,
                    &mut winners,
                )?;
                for &w in &winners[0] {
                    counts[w] += 1;
                }
            }
        } else {
            for _ in 0..self.spec.timesteps {
                let spikes = lif_step(&mut membrane[0], &drive, &thresholds, &self.fc.params.neuron)?;
                for (c, s) in counts.iter_mut().zip(spikes) {
                    *c += s as u32;
                }
            }
        }
        Ok(counts)
    }

    /// Full forward pass of one image: FC spike counts.
    pub fn respond(&self, image: &[f64], sample_seed: u64) -> Result<Vec<u32>> {
        let features = self.conv_features(image, seed::derive(sample_seed, 1, 0))?;
        self.fc_counts(&features, seed::derive(sample_seed, 2, 0))
    }

    /// Checks that every weight and threshold offset is finite.
    pub fn check_finite(&self) -> Result<()> {
        if let Some(k) = self.conv.weight_slice().iter().position(|w| !w.is_finite()) {
            return Err(Error::Divergence {
                layer: "conv",
                neuron: k / self.conv.geometry().fan_in(),
                value: self.conv.weight_slice()[k],
            });
        }
        if let Some(k) = self.fc.weight_slice().iter().position(|w| !w.is_finite()) {
            return Err(Error::Divergence {
                layer: "fc",
                neuron: k / self.fc.params.inputs,
                value: self.fc.weight_slice()[k],
            });
        }
        if let Some(k) = self.fc.theta_plus.iter().position(|t| !t.is_finite()) {
            return Err(Error::Divergence {
                layer: "fc-threshold",
                neuron: k,
                value: self.fc.theta_plus[k],
            });
        }
        Ok(())
    }
}
