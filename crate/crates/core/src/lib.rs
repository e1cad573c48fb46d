//! Closed-form ridge regularization toolkit.
//!
//! Every numerical routine is generic over a [`Real`] scalar (`f32` or
//! `f64`); the aliases below fix the common `f64` instantiation.

// `!(x > 0)` is used on purpose so that NaN lands on the error branch
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod augment;
pub mod cv;
pub mod dataset;
pub mod decomp;
pub mod error;
pub mod experiments;
pub mod io;
pub mod kernel;
pub mod lowrank;
pub mod ridge;
pub mod rng;
mod scalar;
pub mod spline;

pub use augment::{AugmentedDataset, DropoutSpec, MonteCarloEstimate};
pub use cv::{CvGrid, LooResult, RidgeOperator};
pub use dataset::Dataset;
pub use decomp::{PseudoInverse, QrFactors, SvdFactors};
pub use error::{Result, RidgeError};
pub use experiments::{ExperimentConfig, ExperimentGrid, ExperimentKind};
pub use io::{DesignOptions, Table, TabularFile};
pub use kernel::{Family, GlmSpec, KernelFit, KernelKind, KernelMatrix};
pub use lowrank::{FactorError, FactorPair, MaskedMatrix};
pub use ridge::{LinearModelTruth, MinNormFit, RidgeFit, RidgePath};
pub use scalar::Real;
pub use spline::{AdditiveBasis, SplineBasisSpec};

pub type Matrix = nalgebra::DMatrix<f64>;
pub type Vector = nalgebra::DVector<f64>;
pub type Dataset64 = Dataset<f64>;
pub type Svd64 = SvdFactors<f64>;
pub type RidgeFit64 = RidgeFit<f64>;
pub type RidgePath64 = RidgePath<f64>;
