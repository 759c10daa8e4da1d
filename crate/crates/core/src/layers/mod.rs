//! Spiking layers: the convolutional feature layer, 2x2 max pooling, spike
//! normalization and the fully connected selective layer, plus the
//! competition machinery (threshold balance, synaptic filter, winner-take-all
//! and adaptive lateral inhibition) that both spiking layers share.

pub mod competition;
pub mod conv;
pub mod fc;
pub mod pool;

pub use competition::{
    alic_inhibit, asf_filter, asf_filter_into, atb_conv_threshold, atb_fc_update,
    competitive_step, wta_select, wta_select_tensor, Thresholds, Wta,
};
pub use conv::{conv_forward_current, ConvGeometry, ConvLayer, ConvParams};
pub use fc::{FcLayer, FcParams};
pub use pool::{max_pool, spike_normalize};

use serde::{Deserialize, Serialize};

/// Binary spikes for one timestep, laid out `sample x channel x y x x`.
/// Fully connected layers use `channels = neurons, height = width = 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpikeTensor {
    pub samples: usize,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub values: Vec<bool>,
}

impl SpikeTensor {
    pub fn zeros(samples: usize, channels: usize, height: usize, width: usize) -> Self {
        Self {
            samples,
            channels,
            height,
            width,
            values: vec![false; samples * channels * height * width],
        }
    }

    pub fn sample_len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn sample(&self, b: usize) -> &[bool] {
        let n = self.sample_len();
        &self.values[b * n..(b + 1) * n]
    }

    pub fn sample_mut(&mut self, b: usize) -> &mut [bool] {
        let n = self.sample_len();
        &mut self.values[b * n..(b + 1) * n]
    }

    pub fn index(&self, c: usize, y: usize, x: usize) -> usize {
        (c * self.height + y) * self.width + x
    }

    pub fn count(&self) -> usize {
        self.values.iter().filter(|&&s| s).count()
    }
}

/// Which conv neurons compete in one winner-take-all draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WtaScope {
    /// One winner per sample over every channel and position.
    Layer,
    /// One winner per spatial position over the channels.
    Position,
}

/// Switches for the three adaptive mechanisms. STB-STDP is always on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mechanisms {
    /// Adaptive synaptic filter.
    pub asf: bool,
    /// Adaptive lateral inhibitory connection.
    pub alic: bool,
    /// Adaptive threshold balance. Off means fixed `theta_init` thresholds.
    pub atb: bool,
}

impl Default for Mechanisms {
    fn default() -> Self {
        Self {
            asf: true,
            alic: true,
            atb: true,
        }
    }
}
