use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::layers::{ConvGeometry, ConvParams, FcParams, Mechanisms, WtaScope};
use crate::neuron::NeuronConfig;
use crate::plasticity::StdpConfig;

/// How class scores are read from the voting neurons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Readout {
    /// Mean spike count of the neurons assigned to each class.
    Mean,
    /// Largest spike count among them.
    Max,
}

/// Architecture and every hyperparameter that shapes the network's
/// behaviour. Serialized into checkpoints and hashed to detect mismatches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub in_channels: usize,
    pub in_height: usize,
    pub in_width: usize,
    pub kernel: usize,
    pub conv_channels: usize,
    pub fc_neurons: usize,
    pub timesteps: usize,

    pub a_minus_fc: f64,
    pub a_minus_conv: f64,
    pub alpha_inh: f64,
    pub theta_init: f64,
    pub alpha_asf: f64,
    pub beta_asf: f64,
    pub alpha_plus: f64,
    pub lambda_plus: f64,
    pub beta_thresh: f64,
    pub x_offset: f64,
    pub gamma: f64,
    pub tau_mem_conv: f64,
    pub tau_mem_fc: f64,

    pub n_batch: usize,
    pub t_batch: usize,

    pub mechanisms: Mechanisms,
    /// Winner-take-all scope in the conv layer.
    pub conv_wta: WtaScope,
    /// Winner-take-all and lateral inhibition in the FC layer.
    pub fc_competition: bool,
    /// Synaptic filter in the FC layer.
    pub fc_asf: bool,
    pub readout: Readout,
}

impl NetworkSpec {
    /// 28x28 grayscale, 5x5x12 conv, 6400 FC neurons.
    pub fn mnist() -> Self {
        Self {
            in_channels: 1,
            in_height: 28,
            in_width: 28,
            kernel: 5,
            conv_channels: 12,
            fc_neurons: 6400,
            timesteps: 300,
            a_minus_fc: 0.3,
            a_minus_conv: 1.0,
            alpha_inh: 1.625,
            theta_init: 10.0,
            alpha_asf: 16.0,
            beta_asf: 8.0,
            alpha_plus: 0.001,
            lambda_plus: 0.99,
            beta_thresh: 1.0,
            x_offset: 0.3,
            gamma: 15.0,
            tau_mem_conv: 2.0,
            tau_mem_fc: 2.0,
            n_batch: 32,
            t_batch: 30,
            mechanisms: Mechanisms::default(),
            conv_wta: WtaScope::Position,
            fc_competition: true,
            fc_asf: false,
            readout: Readout::Mean,
        }
    }

    /// Same input as MNIST, 3x3x64 conv.
    pub fn fashion() -> Self {
        Self {
            kernel: 3,
            conv_channels: 64,
            ..Self::mnist()
        }
    }

    /// 32x32 RGB, 5x5x3x64 conv, 3200 FC neurons.
    pub fn cifar10() -> Self {
        Self {
            in_channels: 3,
            in_height: 32,
            in_width: 32,
            kernel: 5,
            conv_channels: 64,
            fc_neurons: 3200,
            ..Self::mnist()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive_counts = [
            ("in_channels", self.in_channels),
            ("in_height", self.in_height),
            ("in_width", self.in_width),
            ("kernel", self.kernel),
            ("conv_channels", self.conv_channels),
            ("fc_neurons", self.fc_neurons),
            ("timesteps", self.timesteps),
            ("n_batch", self.n_batch),
            ("t_batch", self.t_batch),
        ];
        for (name, v) in positive_counts {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        let positive_reals = [
            ("a_minus_fc", self.a_minus_fc),
            ("a_minus_conv", self.a_minus_conv),
            ("alpha_inh", self.alpha_inh),
            ("theta_init", self.theta_init),
            ("alpha_asf", self.alpha_asf),
            ("beta_asf", self.beta_asf),
            ("alpha_plus", self.alpha_plus),
            ("beta_thresh", self.beta_thresh),
            ("gamma", self.gamma),
        ];
        for (name, v) in positive_reals {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be a positive finite number, got {v}")));
            }
        }
        if self.gamma < self.theta_init {
            return Err(Error::Config(format!(
                "gamma ({}) must not be below theta_init ({})",
                self.gamma, self.theta_init
            )));
        }
        if self.mechanisms.asf && !self.mechanisms.atb {
            return Err(Error::Config("the synaptic filter needs threshold balance (asf requires atb)".into()));
        }
        if self.pooled_height() == 0 || self.pooled_width() == 0 {
            return Err(Error::Config("conv output too small for 2x2 pooling".into()));
        }
        NeuronConfig::with_tau(self.tau_mem_conv).validate()?;
        NeuronConfig::with_tau(self.tau_mem_fc).validate()?;
        self.stdp().validate()?;
        self.conv_geometry().validate()
    }

    pub fn conv_geometry(&self) -> ConvGeometry {
        ConvGeometry {
            in_channels: self.in_channels,
            out_channels: self.conv_channels,
            kernel: self.kernel,
            in_height: self.in_height,
            in_width: self.in_width,
        }
    }

    pub fn pooled_height(&self) -> usize {
        (self.in_height + 1).saturating_sub(self.kernel) / 2
    }

    pub fn pooled_width(&self) -> usize {
        (self.in_width + 1).saturating_sub(self.kernel) / 2
    }

    /// FC fan-in: pooled conv channels x height x width.
    pub fn pooled_len(&self) -> usize {
        self.conv_channels * self.pooled_height() * self.pooled_width()
    }

    pub fn input_len(&self) -> usize {
        self.in_channels * self.in_height * self.in_width
    }

    pub fn stdp(&self) -> StdpConfig {
        StdpConfig {
            x_offset: self.x_offset,
            lambda_plus: self.lambda_plus,
            n_batch: self.n_batch,
            t_batch: self.t_batch,
        }
    }

    pub fn conv_params(&self) -> ConvParams {
        ConvParams {
            geometry: self.conv_geometry(),
            neuron: NeuronConfig::with_tau(self.tau_mem_conv),
            beta_thresh: self.beta_thresh,
            alpha_asf: self.alpha_asf,
            beta_asf: self.beta_asf,
            alpha_inh: self.alpha_inh,
            theta_fixed: self.theta_init,
            wta: self.conv_wta,
            mechanisms: self.mechanisms,
        }
    }

    pub fn fc_params(&self) -> FcParams {
        FcParams {
            inputs: self.pooled_len(),
            neurons: self.fc_neurons,
            neuron: NeuronConfig::with_tau(self.tau_mem_fc),
            theta_init: self.theta_init,
            alpha_plus: self.alpha_plus,
            gamma: self.gamma,
            alpha_inh: self.alpha_inh,
            alpha_asf: self.alpha_asf,
            beta_asf: self.beta_asf,
            asf: self.fc_asf && self.mechanisms.asf,
            competition: self.fc_competition,
            mechanisms: self.mechanisms,
        }
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> [u8; 32] {
        let json = serde_json::to_vec(self).expect("spec serializes");
        Sha256::digest(&json).into()
    }

    pub fn hash_hex(&self) -> String {
        self.hash().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Input shape this network expects, `(channels, height, width)`.
    pub fn input_shape(&self) -> (usize, usize, usize) {
        (self.in_channels, self.in_height, self.in_width)
    }
}
