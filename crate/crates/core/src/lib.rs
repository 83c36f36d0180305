//! Whitening pre-processing and STDP feature learning for single-layer
//! convolutional spiking networks.
//!
//! The pipeline runs in four stages:
//!
//! 1. pre-processing: full-image ZCA whitening ([`whitening::fit_zca`]), its
//!    convolution-kernel approximation ([`whitening::fit_kernels`]) or the
//!    on-center/off-center DoG baseline ([`whitening::dog_encode`]);
//! 2. spike coding: signed values are split into positive and negative
//!    channels and latency coded ([`coding`]);
//! 3. feature extraction: an event-driven integrate-and-fire layer trained
//!    with multiplicative STDP, winner-take-all and threshold homeostasis
//!    ([`snn`]), applied convolutionally at inference;
//! 4. sum pooling over image quadrants and a linear SVM ([`classify`]).
//!
//! [`pipeline`] wires the stages together and [`cli`] exposes them as
//! file-based commands.

// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classify;
pub mod cli;
pub mod coding;
pub mod config;
pub mod container;
pub mod datasets;
pub mod error;
pub mod numerics;
pub mod pipeline;
pub mod snn;
pub mod synthetic;
pub mod whitening;

pub use error::{Error, Result};
pub use numerics::{Matrix, Tensor3};
