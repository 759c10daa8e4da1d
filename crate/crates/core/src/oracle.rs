//! Deliberately naive reference implementations used to cross-check the
//! optimized paths: a dense scalar simulation of the full forward pass and an
//! unbatched, per-event STDP update.
//!
//! Nothing here is used by training or evaluation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::layers::WtaScope;
use crate::pipeline::Network;
use crate::seed;

/// What happened at each timestep of a dense simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct Transcript {
    /// Winning neurons per timestep, ascending.
    pub winners: Vec<Vec<usize>>,
    /// Membrane potentials after the final step.
    pub final_potential: Vec<f64>,
}

/// Dense output of one full forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseResponse {
    pub conv: Transcript,
    pub pooled_counts: Vec<u32>,
    pub features: Vec<f64>,
    pub fc: Transcript,
    pub fc_counts: Vec<u32>,
}

fn max_of(values: &[f64]) -> f64 {
    let mut m = f64::NEG_INFINITY;
    for &v in values {
        if v > m {
            m = v;
        }
    }
    m
}

fn sigmoid_filter(i: f64, thr: f64, alpha: f64, beta: f64) -> f64 {
    thr / (1.0 + (-alpha * (i / thr) + beta).exp())
}

/// One competitive timestep of a single sample. `groups` lists, for each
/// winner-take-all group, its neuron indices in ascending order.
#[allow(clippy::too_many_arguments)]
fn dense_competitive_step(
    u: &mut [f64],
    drive: &[f64],
    current: &[f64],
    thr: &[f64],
    decay: f64,
    groups: &[Vec<usize>],
    always_draw: bool,
    rng: &mut ChaCha8Rng,
    inhibition: Option<(f64, f64)>,
) -> Vec<usize> {
    let mut fired = vec![false; u.len()];
    for k in 0..u.len() {
        let v = decay * u[k] + drive[k];
        if thr[k] > 0.0 && v >= thr[k] {
            u[k] = 0.0;
            fired[k] = true;
        } else {
            u[k] = v;
        }
    }
    let mut winners = Vec::new();
    for group in groups {
        let firing: Vec<usize> = group.iter().copied().filter(|&k| fired[k]).collect();
        if firing.is_empty() {
            if always_draw {
                let _: f64 = rng.gen();
            }
            continue;
        }
        let draw: f64 = rng.gen();
        let idx = (draw * firing.len() as f64).floor() as usize;
        let w = firing[idx.min(firing.len() - 1)];
        winners.push(w);
        if let Some((reference, alpha_inh)) = inhibition {
            if reference > 0.0 {
                for &k in group {
                    if k != w && current[k] > reference / 2.0 {
                        u[k] -= alpha_inh * reference;
                    }
                }
            }
        }
    }
    winners.sort_unstable();
    winners
}

/// Scalar re-implementation of [`Network::respond`], using the same
/// per-sample random streams.
pub fn dense_respond(net: &Network, image: &[f64], sample_seed: u64) -> DenseResponse {
    let spec = &net.spec;
    let mech = spec.mechanisms;
    let (ic_n, ih, iw, k) = (spec.in_channels, spec.in_height, spec.in_width, spec.kernel);
    let oc_n = spec.conv_channels;
    let (oh, ow) = (ih - k + 1, iw - k + 1);
    let w = net.conv.weight_slice();

    // conv currents, summed per output in (ic, ky, kx) order
    let mut current = vec![0.0; oc_n * oh * ow];
    for c in 0..oc_n {
        for y in 0..oh {
            for x in 0..ow {
                let mut acc = 0.0;
                for ic in 0..ic_n {
                    for ky in 0..k {
                        for kx in 0..k {
                            let wv = w[((c * ic_n + ic) * k + ky) * k + kx];
                            acc += wv * image[(ic * ih + y + ky) * iw + x + kx];
                        }
                    }
                }
                current[(c * oh + y) * ow + x] = acc;
            }
        }
    }
    let peak = max_of(&current);
    let thr_value = if mech.atb {
        if peak > 0.0 {
            spec.beta_thresh * peak
        } else {
            0.0
        }
    } else {
        spec.theta_init
    };
    let drive: Vec<f64> = if mech.asf && thr_value > 0.0 {
        current
            .iter()
            .map(|&i| sigmoid_filter(i, thr_value, spec.alpha_asf, spec.beta_asf))
            .collect()
    } else {
        current.clone()
    };
    let thr = vec![thr_value; current.len()];
    let conv_decay = 1.0 - 1.0 / spec.tau_mem_conv;
    let mut u = vec![0.0; current.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(sample_seed, 1, 0));
    let (ph, pw) = (oh / 2, ow / 2);
    let positions = oh * ow;
    let groups: Vec<Vec<usize>> = match spec.conv_wta {
        WtaScope::Layer => vec![(0..current.len()).collect()],
        WtaScope::Position => (0..positions)
            .map(|p| (0..oc_n).map(|c| c * positions + p).collect())
            .collect(),
    };
    let always_draw = spec.conv_wta == WtaScope::Layer;
    let mut pooled = vec![0u32; oc_n * ph * pw];
    let mut conv_winners = Vec::with_capacity(spec.timesteps);
    for _ in 0..spec.timesteps {
        let inhibition = mech.alic.then_some((peak, spec.alpha_inh));
        let winners = dense_competitive_step(&mut u, &drive, &current, &thr, conv_decay, &groups, always_draw, &mut rng, inhibition);
        let mut hit = vec![false; pooled.len()];
        for &n in &winners {
            let (c, y, x) = (n / positions, (n / ow) % oh, n % ow);
            if y / 2 < ph && x / 2 < pw {
                hit[(c * ph + y / 2) * pw + x / 2] = true;
            }
        }
        for (p, h) in pooled.iter_mut().zip(hit) {
            *p += h as u32;
        }
        conv_winners.push(winners);
    }
    let conv = Transcript {
        winners: conv_winners,
        final_potential: u,
    };

    let most = pooled.iter().copied().max().unwrap_or(0);
    let features: Vec<f64> = pooled
        .iter()
        .map(|&c| if most == 0 { 0.0 } else { c as f64 / most as f64 })
        .collect();

    // fully connected layer, dense sums including zero inputs
    let n = spec.fc_neurons;
    let fw = net.fc.weight_slice();
    let fan_in = features.len();
    let fc_current: Vec<f64> = (0..n)
        .map(|j| {
            let mut acc = 0.0;
            for (kk, &x) in features.iter().enumerate() {
                acc += fw[j * fan_in + kk] * x;
            }
            acc
        })
        .collect();
    let fc_thr: Vec<f64> = (0..n)
        .map(|j| {
            if mech.atb {
                spec.theta_init + net.fc.theta_plus[j]
            } else {
                spec.theta_init
            }
        })
        .collect();
    let fc_drive: Vec<f64> = if spec.fc_asf && mech.asf {
        fc_current
            .iter()
            .zip(&fc_thr)
            .map(|(&i, &t)| sigmoid_filter(i, t, spec.alpha_asf, spec.beta_asf))
            .collect()
    } else {
        fc_current.clone()
    };
    let fc_decay = 1.0 - 1.0 / spec.tau_mem_fc;
    let mut v = vec![0.0; n];
    let mut counts = vec![0u32; n];
    let mut fc_winners = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(sample_seed, 2, 0));
    let fc_peak = max_of(&fc_current);
    let all = vec![(0..n).collect::<Vec<usize>>()];
    for _ in 0..spec.timesteps {
        if spec.fc_competition {
            let inhibition = mech.alic.then_some((fc_peak, spec.alpha_inh));
            let winners = dense_competitive_step(&mut v, &fc_drive, &fc_current, &fc_thr, fc_decay, &all, true, &mut rng, inhibition);
            for &j in &winners {
                counts[j] += 1;
            }
            fc_winners.push(winners);
        } else {
            for j in 0..n {
                let x = fc_decay * v[j] + fc_drive[j];
                if x >= fc_thr[j] {
                    v[j] = 0.0;
                    counts[j] += 1;
                } else {
                    v[j] = x;
                }
            }
        }
    }
    DenseResponse {
        conv,
        pooled_counts: pooled,
        features,
        fc: Transcript {
            winners: fc_winners,
            final_potential: v,
        },
        fc_counts: counts,
    }
}

/// One sample of a plasticity scenario: presynaptic activity per timestep
/// and the postsynaptic units that spiked at each timestep.
#[derive(Debug, Clone, PartialEq)]
pub struct StdpEpisode {
    pub pre: Vec<Vec<f64>>,
    pub post: Vec<Vec<usize>>,
}

/// Per-event STDP reference: every (sample, timestep, post spike) update is
/// computed from an explicitly summed trace `sum_s lambda^(t-s) pre_s` and
/// the average over `n_batch * t_batch` is applied.
pub fn unbatched_stdp(
    weights: &[f64],
    fan_in: usize,
    episodes: &[StdpEpisode],
    lambda: f64,
    x_offset: f64,
    n_batch: usize,
    t_batch: usize,
) -> Vec<f64> {
    let mut out = weights.to_vec();
    let denom = (n_batch * t_batch) as f64;
    for ep in episodes {
        for (t, posts) in ep.post.iter().enumerate() {
            for &j in posts {
                for i in 0..fan_in {
                    let mut trace = 0.0;
                    for (s, pre) in ep.pre.iter().enumerate().take(t + 1) {
                        trace += lambda.powi((t - s) as i32) * pre[i];
                    }
                    out[j * fan_in + i] += (trace - x_offset) / denom;
                }
            }
        }
    }
    out
}
