//! Core toolkit for attention-based multiple instance learning with kernel
//! self-attention, built on a small tape-based reverse-mode autodiff engine.
//!
//! The crate is `no_std` + `alloc`: everything here is pure computation over
//! heap-allocated `f64` buffers. File IO, configuration and the CLI live in
//! the companion `milsa` crate.
//!
//! Layout:
//! - [`tensor`]: tensors, the computation tape and differentiable primitives
//! - [`grad_check`]: finite-difference gradient verification harness
//! - [`kernels`]: similarity kernels for the self-attention score matrix
//! - [`attention`]: attention pooling and the kernel self-attention layer
//! - [`nn`]: conv/linear layers, the LeNet5-style extractor, model assembly
//! - [`mil`]: IDX parsing, bag construction and the three labeling rules
//! - [`train`]: Adam, early stopping, cross-validation orchestration
//! - [`metrics`]: accuracy/precision/recall/F-score/AUC

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod attention;
pub mod error;
pub mod fmath;
pub mod grad_check;
pub mod kernels;
pub mod metrics;
pub mod mil;
pub mod nn;
pub mod rng;
pub mod tensor;
pub mod train;

pub use error::MilError;
pub use tensor::{ParamId, ParamSet, Parameter, Tape, Tensor};
