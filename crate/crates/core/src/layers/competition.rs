//! Threshold balance, synaptic filter, winner-take-all and lateral
//! inhibition.

use rand::Rng;

use crate::error::{Error, Result};
use crate::neuron::{integrate, MembraneState, NeuronConfig};

use super::SpikeTensor;

/// `threshold / (1 + exp(sigma))` with `sigma = -alpha * i / threshold + beta`.
///
/// Output lies in `[0, threshold]` and is non-decreasing in `current`;
/// away from floating-point saturation it is strictly inside and strictly
/// increasing.
#[inline]
pub fn asf_filter(current: f64, threshold: f64, alpha: f64, beta: f64) -> Result<f64> {
    if !(threshold > 0.0) {
        return Err(Error::NonPositiveThreshold(threshold));
    }
    Ok(asf_unchecked(current, threshold, alpha, beta))
}

#[inline]
fn asf_unchecked(current: f64, threshold: f64, alpha: f64, beta: f64) -> f64 {
    let sigma = -alpha * (current / threshold) + beta;
    threshold / (1.0 + sigma.exp())
}

/// Filters a whole sample against one reference threshold.
pub fn asf_filter_into(current: &[f64], threshold: f64, alpha: f64, beta: f64, out: &mut [f64]) -> Result<()> {
    if !(threshold > 0.0) {
        return Err(Error::NonPositiveThreshold(threshold));
    }
    for (o, &i) in out.iter_mut().zip(current) {
        *o = asf_unchecked(i, threshold, alpha, beta);
    }
    Ok(())
}

/// Convolutional threshold balance: `beta_thresh * max(current)` over one
/// sample. Returns 0 when no current is positive; such a sample emits no
/// spikes.
pub fn atb_conv_threshold(current: &[f64], beta_thresh: f64) -> f64 {
    let max = current.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max > 0.0 {
        beta_thresh * max
    } else {
        0.0
    }
}

/// Homeostatic update of the FC threshold offsets after one batch.
///
/// `theta_plus += alpha_plus * spikes`; if the highest effective threshold
/// then exceeds `gamma`, every offset is lowered by the excess and floored at
/// zero.
pub fn atb_fc_update(theta_plus: &mut [f64], spike_counts: &[u32], theta_init: f64, alpha_plus: f64, gamma: f64) {
    debug_assert_eq!(theta_plus.len(), spike_counts.len());
    for (th, &n) in theta_plus.iter_mut().zip(spike_counts) {
        *th += alpha_plus * n as f64;
    }
    let max_offset = theta_plus.iter().copied().fold(0.0, f64::max);
    let max_threshold = theta_init + max_offset;
    if max_threshold > gamma {
        let bias = max_threshold - gamma;
        let ceiling = offset_ceiling(theta_init, gamma);
        for th in theta_plus.iter_mut() {
            *th = (*th - bias).min(ceiling).max(0.0);
        }
    }
}

/// Largest offset `c` with `theta_init + c <= gamma` in floating point.
fn offset_ceiling(theta_init: f64, gamma: f64) -> f64 {
    let mut c = (gamma - theta_init).max(0.0);
    while c > 0.0 && theta_init + c > gamma {
        c = f64::from_bits(c.to_bits() - 1);
    }
    c
}

/// Keeps exactly one of the firing neurons, chosen as the
/// `floor(draw * k)`-th of the `k` firing indices in ascending order.
/// `draw` must lie in `[0, 1)`.
pub fn wta_select(spikes: &mut [bool], draw: f64) -> Option<usize> {
    let k = spikes.iter().filter(|&&s| s).count();
    if k == 0 {
        return None;
    }
    let pick = ((draw * k as f64) as usize).min(k - 1);
    let winner = spikes
        .iter()
        .enumerate()
        .filter(|(_, &s)| s)
        .nth(pick)
        .map(|(i, _)| i)
        .expect("pick < k");
    spikes.iter_mut().for_each(|s| *s = false);
    spikes[winner] = true;
    Some(winner)
}

/// Per-sample winner-take-all over a batch tensor, one draw per sample.
pub fn wta_select_tensor(spikes: &mut SpikeTensor, draws: &[f64]) -> Vec<Option<usize>> {
    (0..spikes.samples)
        .map(|b| wta_select(spikes.sample_mut(b), draws[b]))
        .collect()
}

/// Lowers the membrane potential of every non-winner whose input current
/// exceeds half of `reference_max` by `alpha_inh * reference_max`.
///
/// `reference_max` is the largest input current over the whole batch.
/// Inhibition is lateral: it is sent by the winning neuron, so a step
/// without a winner inhibits nothing.
pub fn alic_inhibit(potential: &mut [f64], current: &[f64], winner: Option<usize>, reference_max: f64, alpha_inh: f64) {
    if winner.is_none() || !(reference_max > 0.0) {
        return;
    }
    let gate = reference_max / 2.0;
    let amount = alpha_inh * reference_max;
    for (k, (u, &i)) in potential.iter_mut().zip(current).enumerate() {
        if i > gate && Some(k) != winner {
            *u -= amount;
        }
    }
}

/// Firing thresholds for one layer step.
#[derive(Debug, Clone, Copy)]
pub enum Thresholds<'a> {
    /// One threshold per sample, shared by all of its neurons.
    PerSample(&'a [f64]),
    /// One threshold per neuron, shared across the batch.
    PerNeuron(&'a [f64]),
}

impl Thresholds<'_> {
    #[inline]
    fn get(&self, sample: usize, neuron: usize) -> f64 {
        match self {
            Thresholds::PerSample(t) => t[sample],
            Thresholds::PerNeuron(t) => t[neuron],
        }
    }
}

/// Neurons that compete in one winner-take-all draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Wta {
    /// All neurons of a sample.
    Layer,
    /// Neurons `c * positions + p` for a fixed position `p` (the channels at
    /// one spatial location).
    PerPosition { positions: usize },
}

/// One timestep of a competitive spiking layer for a batch: LIF integration
/// of `drive`, winner-take-all, then (if `alic` is given) lateral inhibition
/// gated by the raw `current`.
///
/// With [`Wta::Layer`] every sample consumes exactly one draw per step. With
/// [`Wta::PerPosition`] a draw is consumed for each position that has at
/// least one crossing neuron, in ascending position order, and inhibition
/// stays within the winner's position. Neurons whose threshold is not
/// positive integrate but never fire. Winners of each sample are written to
/// `winners` in ascending order.
#[allow(clippy::too_many_arguments)]
pub fn competitive_step<R: Rng>(
    layer: &'static str,
    membranes: &mut [MembraneState],
    drive: &[Vec<f64>],
    current: &[Vec<f64>],
    thresholds: Thresholds<'_>,
    neuron: &NeuronConfig,
    wta: Wta,
    rngs: &mut [R],
    alic: Option<(f64, f64)>,
    winners: &mut [Vec<usize>],
) -> Result<()> {
    let decay = neuron.decay();
    let inv_c = 1.0 / neuron.capacitance;
    let mut firing = Vec::new();
    for (b, mem) in membranes.iter_mut().enumerate() {
        let d = &drive[b];
        let out = &mut winners[b];
        out.clear();
        for k in 0..mem.potential.len() {
            let thr = thresholds.get(b, k);
            let u_prev = mem.potential[k];
            let (u, fired) = if thr > 0.0 {
                integrate(u_prev, d[k], thr, decay, inv_c)
            } else {
                (decay * u_prev + d[k] * inv_c, false)
            };
            if !u.is_finite() {
                return Err(Error::Divergence {
                    layer,
                    neuron: k,
                    value: u,
                });
            }
            mem.potential[k] = u;
            mem.fired[k] = fired;
        }
        match wta {
            Wta::Layer => {
                let draw: f64 = rngs[b].gen();
                firing.clear();
                firing.extend((0..mem.fired.len()).filter(|&k| mem.fired[k]));
                let winner = pick(&firing, draw);
                if let Some(w) = winner {
                    out.push(w);
                    if let Some((reference_max, alpha_inh)) = alic {
                        alic_inhibit(&mut mem.potential, &current[b], winner, reference_max, alpha_inh);
                    }
                }
            }
            Wta::PerPosition { positions } => {
                let channels = mem.fired.len() / positions;
                for p in 0..positions {
                    firing.clear();
                    firing.extend((0..channels).map(|c| c * positions + p).filter(|&k| mem.fired[k]));
                    if firing.is_empty() {
                        continue;
                    }
                    let w = pick(&firing, rngs[b].gen()).expect("non-empty");
                    out.push(w);
                    if let Some((reference_max, alpha_inh)) = alic {
                        if reference_max > 0.0 {
                            let gate = reference_max / 2.0;
                            for c in 0..channels {
                                let k = c * positions + p;
                                if k != w && current[b][k] > gate {
                                    mem.potential[k] -= alpha_inh * reference_max;
                                }
                            }
                        }
                    }
                }
                out.sort_unstable();
            }
        }
    }
    Ok(())
}

/// The `floor(draw * k)`-th of `k` candidates.
#[inline]
fn pick(candidates: &[usize], draw: f64) -> Option<usize> {
    if candidates.is_empty() {
        return None;
    }
    let i = ((draw * candidates.len() as f64) as usize).min(candidates.len() - 1);
    Some(candidates[i])
}
