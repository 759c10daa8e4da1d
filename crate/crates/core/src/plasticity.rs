//! Eligibility-trace STDP, its sample-temporal batched form, and the weight
//! normalizations applied after every update.
//!
//! Weights are stored row-major: one row of `fan_in` incoming weights per
//! postsynaptic unit (an FC neuron, or a conv output channel whose kernel is
//! shared across positions).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StdpConfig {
    /// Pivot between potentiation and depression.
    pub x_offset: f64,
    /// Trace retention per step, `1 - 1/tau_plus`.
    pub lambda_plus: f64,
    /// Samples per weight application.
    pub n_batch: usize,
    /// Timesteps per weight application.
    pub t_batch: usize,
}

impl Default for StdpConfig {
    fn default() -> Self {
        Self {
            x_offset: 0.3,
            lambda_plus: 0.99,
            n_batch: 32,
            t_batch: 30,
        }
    }
}

impl StdpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.x_offset >= 0.0) {
            return Err(Error::Config(format!("x_offset must be >= 0, got {}", self.x_offset)));
        }
        if !(0.0..1.0).contains(&self.lambda_plus) {
            return Err(Error::Config(format!(
                "lambda_plus must lie in [0, 1), got {}",
                self.lambda_plus
            )));
        }
        if self.n_batch == 0 || self.t_batch == 0 {
            return Err(Error::Config("n_batch and t_batch must be positive".into()));
        }
        Ok(())
    }

    /// Equivalent window time constant: `exp(-1/tau_plus) == lambda_plus`.
    pub fn tau_plus(&self) -> f64 {
        -1.0 / self.lambda_plus.ln()
    }
}

/// Presynaptic eligibility traces for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceState {
    pub values: Vec<f64>,
    pub lambda_plus: f64,
}

impl TraceState {
    pub fn new(len: usize, lambda_plus: f64) -> Self {
        Self {
            values: vec![0.0; len],
            lambda_plus,
        }
    }

    /// `x <- lambda * x + pre`. Presynaptic activity may be graded (a
    /// direct-encoded current in `[0, 1]`) or binary.
    pub fn step(&mut self, pre: &[f64]) {
        debug_assert_eq!(pre.len(), self.values.len());
        let lambda = self.lambda_plus;
        for (x, &p) in self.values.iter_mut().zip(pre) {
            *x = lambda * *x + p;
        }
    }

    pub fn step_spikes(&mut self, pre: &[bool]) {
        debug_assert_eq!(pre.len(), self.values.len());
        let lambda = self.lambda_plus;
        for (x, &p) in self.values.iter_mut().zip(pre) {
            *x = lambda * *x + if p { 1.0 } else { 0.0 };
        }
    }

    pub fn reset(&mut self) {
        self.values.iter_mut().for_each(|x| *x = 0.0);
    }
}

/// Summed trace-STDP contributions awaiting one batched application.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateAccumulator {
    fan_in: usize,
    delta_w: Vec<f64>,
    counts: Vec<u32>,
}

impl UpdateAccumulator {
    pub fn new(post_units: usize, fan_in: usize) -> Self {
        Self {
            fan_in,
            delta_w: vec![0.0; post_units * fan_in],
            counts: vec![0; post_units],
        }
    }

    pub fn post_units(&self) -> usize {
        self.counts.len()
    }

    pub fn fan_in(&self) -> usize {
        self.fan_in
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn delta(&self, post: usize) -> &[f64] {
        &self.delta_w[post * self.fan_in..(post + 1) * self.fan_in]
    }

    pub fn is_empty(&self) -> bool {
        self.counts.iter().all(|&c| c == 0)
    }

    /// Adds `trace - x_offset` for every synapse of `post`, for one
    /// postsynaptic spike. `presyn_trace` is that unit's fan-in.
    pub fn accumulate(&mut self, post: usize, presyn_trace: &[f64], x_offset: f64) -> Result<()> {
        if presyn_trace.len() != self.fan_in || post >= self.counts.len() {
            return Err(Error::Shape(format!(
                "accumulate: unit {post} of {} with {} traces for fan-in {}",
                self.counts.len(),
                presyn_trace.len(),
                self.fan_in
            )));
        }
        let row = &mut self.delta_w[post * self.fan_in..(post + 1) * self.fan_in];
        for (d, &x) in row.iter_mut().zip(presyn_trace) {
            *d += x - x_offset;
        }
        self.counts[post] += 1;
        Ok(())
    }

    /// Fully connected form: every postsynaptic unit sees the whole trace.
    pub fn accumulate_step(
        &mut self,
        trace: &TraceState,
        post_spikes: &[bool],
        x_offset: f64,
    ) -> Result<()> {
        if post_spikes.len() != self.counts.len() {
            return Err(Error::Shape(format!(
                "accumulate_step: {} spikes for {} units",
                post_spikes.len(),
                self.counts.len()
            )));
        }
        for (post, _) in post_spikes.iter().enumerate().filter(|(_, &s)| s) {
            self.accumulate(post, &trace.values, x_offset)?;
        }
        Ok(())
    }

    /// Sums another accumulator into this one.
    pub fn merge(&mut self, other: &Self) -> Result<()> {
        if other.fan_in != self.fan_in || other.counts.len() != self.counts.len() {
            return Err(Error::Shape("merge: accumulator shapes differ".into()));
        }
        for (a, b) in self.delta_w.iter_mut().zip(&other.delta_w) {
            *a += b;
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    pub fn clear(&mut self) {
        for post in 0..self.counts.len() {
            if self.counts[post] > 0 {
                self.delta_w[post * self.fan_in..(post + 1) * self.fan_in]
                    .iter_mut()
                    .for_each(|d| *d = 0.0);
                self.counts[post] = 0;
            }
        }
    }
}

/// `w <- w + delta_w / (n_batch * t_batch)`, then clears the accumulator.
///
/// Returns the postsynaptic units whose weights changed.
pub fn apply_stb_update(
    weights: &mut [f64],
    acc: &mut UpdateAccumulator,
    cfg: &StdpConfig,
) -> Result<Vec<usize>> {
    if weights.len() != acc.delta_w.len() {
        return Err(Error::Shape(format!(
            "apply_stb_update: {} weights, accumulator holds {}",
            weights.len(),
            acc.delta_w.len()
        )));
    }
    if acc.is_empty() {
        log::debug!("apply_stb_update: empty accumulator, nothing to apply");
        return Ok(Vec::new());
    }
    let denom = (cfg.n_batch * cfg.t_batch) as f64;
    let fan_in = acc.fan_in;
    let mut touched = Vec::new();
    for post in 0..acc.counts.len() {
        if acc.counts[post] == 0 {
            continue;
        }
        let range = post * fan_in..(post + 1) * fan_in;
        for (w, d) in weights[range.clone()].iter_mut().zip(&acc.delta_w[range]) {
            *w += d / denom;
        }
        touched.push(post);
    }
    acc.clear();
    Ok(touched)
}

fn check_rows(weights: &[f64], fan_in: usize) -> Result<usize> {
    if fan_in == 0 || weights.len() % fan_in != 0 {
        return Err(Error::Shape(format!(
            "{} weights do not divide into rows of {fan_in}",
            weights.len()
        )));
    }
    Ok(weights.len() / fan_in)
}

/// Rescales one row so its mean equals `a_minus`.
pub fn normalize_fc_row(row: &mut [f64], a_minus: f64, neuron: usize) -> Result<()> {
    let mean = row.iter().sum::<f64>() / row.len() as f64;
    if mean == 0.0 || !mean.is_finite() {
        return Err(Error::ZeroMean { neuron });
    }
    let scale = a_minus / mean;
    row.iter_mut().for_each(|w| *w *= scale);
    Ok(())
}

/// Standardizes one kernel to zero mean and population std `a_minus`.
pub fn normalize_conv_row(row: &mut [f64], a_minus: f64, channel: usize) -> Result<()> {
    let n = row.len() as f64;
    let mean = row.iter().sum::<f64>() / n;
    let var = row.iter().map(|w| (w - mean) * (w - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    if std == 0.0 || !std.is_finite() {
        return Err(Error::ZeroStd { channel });
    }
    row.iter_mut().for_each(|w| *w = a_minus * (*w - mean) / std);
    Ok(())
}

/// Applies [`normalize_fc_row`] to every row.
pub fn normalize_fc(weights: &mut [f64], fan_in: usize, a_minus: f64) -> Result<()> {
    check_rows(weights, fan_in)?;
    for (j, row) in weights.chunks_mut(fan_in).enumerate() {
        normalize_fc_row(row, a_minus, j)?;
    }
    Ok(())
}

/// Applies [`normalize_conv_row`] to every kernel.
pub fn normalize_conv(weights: &mut [f64], fan_in: usize, a_minus: f64) -> Result<()> {
    check_rows(weights, fan_in)?;
    for (c, row) in weights.chunks_mut(fan_in).enumerate() {
        normalize_conv_row(row, a_minus, c)?;
    }
    Ok(())
}

/// Pairwise unilateral STDP window summed over all pairs with
/// `t_post - t_pre > 0`: `a_plus * exp(-dt / tau_plus) - x_offset`.
///
/// Brute-force reference for the trace recurrence; not used in training.
pub fn window_stdp(pre_times: &[u32], post_times: &[u32], a_plus: f64, tau_plus: f64, x_offset: f64) -> f64 {
    let mut total = 0.0;
    for &tp in post_times {
        for &tq in pre_times {
            if tp > tq {
                let dt = (tp - tq) as f64;
                total += a_plus * (-dt / tau_plus).exp() - x_offset;
            }
        }
    }
    total
}
