//! Layer-wise unsupervised training with sample-temporal batched STDP.
//!
//! Nothing in this module takes labels.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::RawDataset;
use crate::error::{Error, Result};
use crate::layers::competition::{atb_fc_update, competitive_step};
use crate::layers::{ConvLayer, FcLayer, Thresholds, Wta};
use crate::neuron::{lif_step, MembraneState};
use crate::plasticity::{apply_stb_update, normalize_conv_row, normalize_fc_row, StdpConfig, TraceState, UpdateAccumulator};
use crate::seed;

use super::network::Network;
use super::spec::NetworkSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub conv_epochs: usize,
    pub fc_epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            conv_epochs: 1,
            fc_epochs: 6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Conv,
    Fc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub phase: Phase,
    pub epoch: usize,
    /// Post-competition spikes emitted during training.
    pub spikes: u64,
    /// Weight applications performed.
    pub updates: u64,
    pub wall_time_s: f64,
}

/// Seed of the per-sample stream used for every frozen forward pass of
/// training-split sample `index`.
pub fn train_sample_seed(run_seed: u64, index: usize) -> u64 {
    seed::derive(run_seed, seed::FEATURES_TRAIN, index as u64)
}

/// Seed of the per-sample stream for evaluation-split sample `index`.
pub fn eval_sample_seed(run_seed: u64, index: usize) -> u64 {
    seed::derive(run_seed, seed::FEATURES_EVAL, index as u64)
}

pub(crate) fn check_shape(spec: &NetworkSpec, data: &RawDataset) -> Result<()> {
    if data.shape() != spec.input_shape() {
        return Err(Error::Shape(format!(
            "dataset images are {:?}, network expects {:?}",
            data.shape(),
            spec.input_shape()
        )));
    }
    Ok(())
}

/// Trains the conv layer for `conv_epochs`, then the FC layer for
/// `fc_epochs` on the frozen conv layer's normalized rates. `on_epoch` runs
/// after every epoch of either phase (for checkpointing and logging).
pub fn train_layerwise<F>(spec: NetworkSpec, data: &RawDataset, cfg: &TrainConfig, mut on_epoch: F) -> Result<Network>
where
    F: FnMut(&Network, &EpochReport) -> Result<()>,
{
    check_shape(&spec, data)?;
    let mut net = Network::init(spec, cfg.seed)?;
    for epoch in 0..cfg.conv_epochs {
        let report = train_conv_epoch(&mut net, data, cfg.seed, epoch)?;
        on_epoch(&net, &report)?;
    }
    if cfg.fc_epochs > 0 {
        let features = extract_features(&net, data, cfg.seed)?;
        for epoch in 0..cfg.fc_epochs {
            let report = train_fc_epoch(&mut net, &features, cfg.seed, epoch)?;
            on_epoch(&net, &report)?;
        }
    }
    Ok(net)
}

/// Frozen conv features of every training sample.
pub fn extract_features(net: &Network, data: &RawDataset, run_seed: u64) -> Result<Vec<Vec<f64>>> {
    (0..data.len())
        .into_par_iter()
        .map(|i| net.conv_features(&data.encode(i), seed::derive(train_sample_seed(run_seed, i), 1, 0)))
        .collect()
}

fn epoch_order(n: usize, run_seed: u64, phase: u64, epoch: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(run_seed, seed::SHUFFLE ^ phase, epoch as u64));
    order
}

/// Window lengths covering `timesteps` in chunks of `t_batch`.
fn windows(timesteps: usize, t_batch: usize) -> impl Iterator<Item = usize> {
    (0..timesteps).step_by(t_batch).map(move |t| t_batch.min(timesteps - t))
}

pub fn train_conv_epoch(net: &mut Network, data: &RawDataset, run_seed: u64, epoch: usize) -> Result<EpochReport> {
    let start = Instant::now();
    let order = epoch_order(data.len(), run_seed, seed::CONV_TRAIN, epoch);
    let epoch_seed = seed::derive(run_seed, seed::CONV_TRAIN, epoch as u64);
    let mut report = EpochReport {
        phase: Phase::Conv,
        epoch,
        spikes: 0,
        updates: 0,
        wall_time_s: 0.0,
    };
    for batch in order.chunks(net.spec.n_batch) {
        let inputs: Vec<Vec<f64>> = batch.iter().map(|&i| data.encode(i)).collect();
        let mut rngs: Vec<ChaCha8Rng> = batch.iter().map(|&i| seed::rng(epoch_seed, 0, i as u64)).collect();
        let (spikes, updates) = train_conv_batch(&mut net.conv, &net.spec, &inputs, &mut rngs).map_err(|e| {
            log::error!("conv training failed on epoch {epoch}, batch samples {batch:?}: {e}");
            e
        })?;
        report.spikes += spikes;
        report.updates += updates;
    }
    report.wall_time_s = start.elapsed().as_secs_f64();
    Ok(report)
}

/// One STB presentation of a batch to the conv layer. Returns
/// `(spikes, weight applications)`.
pub fn train_conv_batch(
    conv: &mut ConvLayer,
    spec: &NetworkSpec,
    inputs: &[Vec<f64>],
    rngs: &mut [ChaCha8Rng],
) -> Result<(u64, u64)> {
    let g = *conv.geometry();
    let nb = inputs.len();
    let mut membranes: Vec<MembraneState> = (0..nb).map(|_| MembraneState::resting(g.output_len())).collect();
    let mut traces: Vec<TraceState> = (0..nb).map(|_| TraceState::new(g.input_len(), spec.lambda_plus)).collect();
    let mut acc = UpdateAccumulator::new(g.out_channels, g.fan_in());
    let mut patch = Vec::with_capacity(g.fan_in());
    let mut winners = vec![Vec::new(); nb];
    let (mut spikes, mut updates) = (0u64, 0u64);
    for window in windows(spec.timesteps, spec.t_batch) {
        let currents: Vec<Vec<f64>> = inputs.iter().map(|x| conv.forward_current(x)).collect::<Result<_>>()?;
        let mut thresholds = Vec::with_capacity(nb);
        let mut drives = Vec::with_capacity(nb);
        for c in &currents {
            let (t, d) = conv.drive(c)?;
            thresholds.push(t);
            drives.push(d);
        }
        let reference = batch_max(&currents);
        let alic = conv.params.mechanisms.alic.then_some((reference, conv.params.alpha_inh));
        for _ in 0..window {
            for (trace, x) in traces.iter_mut().zip(inputs) {
                trace.step(x);
            }
            competitive_step(
                "conv",
                &mut membranes,
                &drives,
                &currents,
                Thresholds::PerSample(&thresholds),
                &conv.params.neuron,
                conv.wta(),
                rngs,
                alic,
                &mut winners,
            )?;
            for (b, ws) in winners.iter().enumerate() {
                for &w in ws {
                    let (c, y, x) = g.unravel(w);
                    conv.patch(&traces[b].values, y, x, &mut patch);
                    acc.accumulate(c, &patch, spec.x_offset)?;
                    spikes += 1;
                }
            }
        }
        let cfg = StdpConfig {
            n_batch: nb,
            t_batch: window,
            ..spec.stdp()
        };
        let fan_in = g.fan_in();
        let touched = apply_stb_update(conv.weight_slice_mut(), &mut acc, &cfg)?;
        for &c in &touched {
            let row = &mut conv.weight_slice_mut()[c * fan_in..(c + 1) * fan_in];
            normalize_conv_row(row, spec.a_minus_conv, c)?;
            if let Some(k) = row.iter().position(|w| !w.is_finite()) {
                return Err(Error::Divergence {
                    layer: "conv",
                    neuron: c,
                    value: row[k],
                });
            }
        }
        updates += !touched.is_empty() as u64;
    }
    Ok((spikes, updates))
}

pub fn train_fc_epoch(net: &mut Network, features: &[Vec<f64>], run_seed: u64, epoch: usize) -> Result<EpochReport> {
    let start = Instant::now();
    let order = epoch_order(features.len(), run_seed, seed::FC_TRAIN, epoch);
    let epoch_seed = seed::derive(run_seed, seed::FC_TRAIN, epoch as u64);
    let mut report = EpochReport {
        phase: Phase::Fc,
        epoch,
        spikes: 0,
        updates: 0,
        wall_time_s: 0.0,
    };
    for batch in order.chunks(net.spec.n_batch) {
        let inputs: Vec<&[f64]> = batch.iter().map(|&i| features[i].as_slice()).collect();
        let mut rngs: Vec<ChaCha8Rng> = batch.iter().map(|&i| seed::rng(epoch_seed, 0, i as u64)).collect();
        let (spikes, updates) = train_fc_batch(&mut net.fc, &net.spec, &inputs, &mut rngs).map_err(|e| {
            log::error!("fc training failed on epoch {epoch}, batch samples {batch:?}: {e}");
            e
        })?;
        report.spikes += spikes;
        report.updates += updates;
    }
    report.wall_time_s = start.elapsed().as_secs_f64();
    Ok(report)
}

/// One STB presentation of a batch of conv rates to the FC layer. Threshold
/// offsets are updated once per weight application.
pub fn train_fc_batch(
    fc: &mut FcLayer,
    spec: &NetworkSpec,
    inputs: &[&[f64]],
    rngs: &mut [ChaCha8Rng],
) -> Result<(u64, u64)> {
    let n = fc.params.neurons;
    let fan_in = fc.params.inputs;
    let nb = inputs.len();
    let mut membranes: Vec<MembraneState> = (0..nb).map(|_| MembraneState::resting(n)).collect();
    let mut traces: Vec<TraceState> = (0..nb).map(|_| TraceState::new(fan_in, spec.lambda_plus)).collect();
    let mut acc = UpdateAccumulator::new(n, fan_in);
    let mut winners = vec![Vec::new(); nb];
    let (mut spikes, mut updates) = (0u64, 0u64);
    for window in windows(spec.timesteps, spec.t_batch) {
        let currents: Vec<Vec<f64>> = inputs.iter().map(|x| fc.forward_current(x)).collect::<Result<_>>()?;
        let thresholds = fc.thresholds();
        let drives: Vec<Vec<f64>> = currents.iter().map(|c| fc.drive(c, &thresholds)).collect::<Result<_>>()?;
        let reference = batch_max(&currents);
        let alic = fc.params.mechanisms.alic.then_some((reference, fc.params.alpha_inh));
        let mut window_counts = vec![0u32; n];
        for _ in 0..window {
            for (trace, x) in traces.iter_mut().zip(inputs) {
                trace.step(x);
            }
            if fc.params.competition {
                competitive_step(
                    "fc",
                    &mut membranes,
                    &drives,
                    &currents,
                    Thresholds::PerNeuron(&thresholds),
                    &fc.params.neuron,
                    Wta::Layer,
                    rngs,
                    alic,
                    &mut winners,
                )?;
                for (b, ws) in winners.iter().enumerate() {
                    for &w in ws {
                        acc.accumulate(w, &traces[b].values, spec.x_offset)?;
                        window_counts[w] += 1;
                        spikes += 1;
                    }
                }
            } else {
                for b in 0..nb {
                    let fired = lif_step(&mut membranes[b], &drives[b], &thresholds, &fc.params.neuron)?;
                    for (j, _) in fired.iter().enumerate().filter(|(_, &s)| s) {
                        acc.accumulate(j, &traces[b].values, spec.x_offset)?;
                        window_counts[j] += 1;
                        spikes += 1;
                    }
                }
            }
        }
        let cfg = StdpConfig {
            n_batch: nb,
            t_batch: window,
            ..spec.stdp()
        };
        let touched = apply_stb_update(fc.weight_slice_mut(), &mut acc, &cfg)?;
        for &j in &touched {
            let row = &mut fc.weight_slice_mut()[j * fan_in..(j + 1) * fan_in];
            normalize_fc_row(row, spec.a_minus_fc, j)?;
            if let Some(k) = row.iter().position(|w| !w.is_finite()) {
                return Err(Error::Divergence {
                    layer: "fc",
                    neuron: j,
                    value: row[k],
                });
            }
        }
        if fc.params.mechanisms.atb {
            atb_fc_update(
                &mut fc.theta_plus,
                &window_counts,
                fc.params.theta_init,
                fc.params.alpha_plus,
                fc.params.gamma,
            );
        }
        updates += !touched.is_empty() as u64;
    }
    Ok((spikes, updates))
}

fn batch_max(currents: &[Vec<f64>]) -> f64 {
    currents
        .iter()
        .flat_map(|c| c.iter().copied())
        .fold(f64::NEG_INFINITY, f64::max)
}
