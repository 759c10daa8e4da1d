//! Convolutional spiking layer (valid cross-correlation, stride 1).

use ndarray::Array4;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neuron::NeuronConfig;
use crate::plasticity::normalize_conv;

use super::competition::{asf_filter_into, atb_conv_threshold, Wta};
use super::{Mechanisms, WtaScope};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvGeometry {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub in_height: usize,
    pub in_width: usize,
}

impl ConvGeometry {
    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0 || self.out_channels == 0 || self.kernel == 0 {
            return Err(Error::Config("conv dimensions must be positive".into()));
        }
        if self.kernel > self.in_height || self.kernel > self.in_width {
            return Err(Error::Shape(format!(
                "kernel {} does not fit a {}x{} input",
                self.kernel, self.in_height, self.in_width
            )));
        }
        Ok(())
    }

    pub fn out_height(&self) -> usize {
        self.in_height + 1 - self.kernel
    }

    pub fn out_width(&self) -> usize {
        self.in_width + 1 - self.kernel
    }

    pub fn input_len(&self) -> usize {
        self.in_channels * self.in_height * self.in_width
    }

    pub fn output_len(&self) -> usize {
        self.out_channels * self.out_height() * self.out_width()
    }

    /// Synapses per kernel.
    pub fn fan_in(&self) -> usize {
        self.in_channels * self.kernel * self.kernel
    }

    /// `(channel, y, x)` of a flat output index.
    pub fn unravel(&self, index: usize) -> (usize, usize, usize) {
        let (oh, ow) = (self.out_height(), self.out_width());
        (index / (oh * ow), (index / ow) % oh, index % ow)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvParams {
    pub geometry: ConvGeometry,
    pub neuron: NeuronConfig,
    pub beta_thresh: f64,
    pub alpha_asf: f64,
    pub beta_asf: f64,
    pub alpha_inh: f64,
    /// Fixed threshold used when threshold balance is disabled.
    pub theta_fixed: f64,
    pub wta: WtaScope,
    pub mechanisms: Mechanisms,
}

/// Input current of every output neuron for one sample.
///
/// Each output sums `w * input` in `(in_channel, ky, kx)` order starting
/// from zero, so a scalar reference loop reproduces it bit for bit.
pub fn conv_forward_current(weights: &[f64], geometry: &ConvGeometry, input: &[f64], out: &mut [f64]) -> Result<()> {
    let g = geometry;
    if weights.len() != g.out_channels * g.fan_in() || input.len() != g.input_len() || out.len() != g.output_len() {
        return Err(Error::Shape(format!(
            "conv: {} weights, {} inputs, {} outputs for {:?}",
            weights.len(),
            input.len(),
            out.len(),
            g
        )));
    }
    let (oh, ow, k) = (g.out_height(), g.out_width(), g.kernel);
    let (ih, iw) = (g.in_height, g.in_width);
    out.iter_mut().for_each(|o| *o = 0.0);
    for c in 0..g.out_channels {
        let plane = &mut out[c * oh * ow..(c + 1) * oh * ow];
        for ic in 0..g.in_channels {
            let src = &input[ic * ih * iw..(ic + 1) * ih * iw];
            for ky in 0..k {
                for kx in 0..k {
                    let w = weights[((c * g.in_channels + ic) * k + ky) * k + kx];
                    for y in 0..oh {
                        let row = &src[(y + ky) * iw + kx..(y + ky) * iw + kx + ow];
                        let dst = &mut plane[y * ow..(y + 1) * ow];
                        for (d, &s) in dst.iter_mut().zip(row) {
                            *d += w * s;
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    /// `out_channels x in_channels x kernel x kernel`
    pub weights: Array4<f64>,
    pub params: ConvParams,
}

impl ConvLayer {
    /// Uniform `[0, 1)` kernels standardized once.
    pub fn init<R: Rng>(params: ConvParams, a_minus_conv: f64, rng: &mut R) -> Result<Self> {
        params.geometry.validate()?;
        let g = params.geometry;
        let mut weights = Array4::from_shape_simple_fn((g.out_channels, g.in_channels, g.kernel, g.kernel), || {
            rng.gen::<f64>()
        });
        normalize_conv(weights.as_slice_mut().expect("standard layout"), g.fan_in(), a_minus_conv)?;
        Ok(Self { weights, params })
    }

    pub fn geometry(&self) -> &ConvGeometry {
        &self.params.geometry
    }

    pub fn wta(&self) -> Wta {
        match self.params.wta {
            WtaScope::Layer => Wta::Layer,
            WtaScope::Position => Wta::PerPosition {
                positions: self.params.geometry.out_height() * self.params.geometry.out_width(),
            },
        }
    }

    pub fn weight_slice(&self) -> &[f64] {
        self.weights.as_slice().expect("standard layout")
    }

    pub fn weight_slice_mut(&mut self) -> &mut [f64] {
        self.weights.as_slice_mut().expect("standard layout")
    }

    pub fn forward_current(&self, input: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.params.geometry.output_len()];
        conv_forward_current(self.weight_slice(), &self.params.geometry, input, &mut out)?;
        Ok(out)
    }

    /// Threshold and (optionally filtered) drive of one sample for a raw
    /// current map.
    pub fn drive(&self, current: &[f64]) -> Result<(f64, Vec<f64>)> {
        let p = &self.params;
        let threshold = if p.mechanisms.atb {
            atb_conv_threshold(current, p.beta_thresh)
        } else {
            p.theta_fixed
        };
        let mut drive = current.to_vec();
        if p.mechanisms.asf && threshold > 0.0 {
            asf_filter_into(current, threshold, p.alpha_asf, p.beta_asf, &mut drive)?;
        }
        Ok((threshold, drive))
    }

    /// Copies the receptive field of output position `(y, x)` from a
    /// per-input array (e.g. traces) in kernel order.
    pub fn patch(&self, source: &[f64], y: usize, x: usize, out: &mut Vec<f64>) {
        let g = &self.params.geometry;
        out.clear();
        for ic in 0..g.in_channels {
            for ky in 0..g.kernel {
                let start = (ic * g.in_height + y + ky) * g.in_width + x;
                out.extend_from_slice(&source[start..start + g.kernel]);
            }
        }
    }
}
