//! Unsupervised spiking neural networks trained with trace STDP.
//!
//! A convolutional LIF layer and a fully connected LIF layer are trained
//! one after the other without labels. Training uses sample-temporal batched
//! STDP (weight changes averaged over `n_batch` samples and `t_batch`
//! timesteps) together with three adaptive mechanisms:
//!
//! * threshold balance: conv thresholds track the largest input current,
//!   FC thresholds grow with activity under a ceiling `gamma`;
//! * synaptic filter: a sigmoid that pushes currents towards rest or
//!   threshold;
//! * lateral inhibition: after winner-take-all, strongly driven losers have
//!   their potential lowered in proportion to the largest current.
//!
//! Labels are only used afterwards, to assign FC neurons to classes for a
//! voting readout.

pub mod data;
pub mod error;
pub mod layers;
pub mod neuron;
pub mod oracle;
pub mod pipeline;
pub mod plasticity;
pub mod seed;

pub use error::{Error, Result};
