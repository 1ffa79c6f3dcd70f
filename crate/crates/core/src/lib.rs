//! Active construction of multi-output Gaussian-process emulators.
//!
//! A costly simulator `f: R^D -> R^P` is sampled sequentially. Each step fits one
//! independent GP per output, maximizes an acquisition function that rewards both
//! predictive variance and predicted gradient norm, evaluates `f` at the maximizer,
//! and appends the new node. Baseline samplers, an experiment harness and a 1D
//! optimal-placement oracle round out the crate.

pub mod acquisition;
pub mod dataset;
pub mod emulation;
pub mod error;
pub mod gp;
pub mod harness;
pub mod kernel;
pub mod multi_output;
pub mod optimize;
pub mod pci;
pub mod prior;
pub mod samplers;
pub mod simulators;
pub mod sobol;
pub mod space;

pub use dataset::Dataset;
pub use error::{Error, Exchange, Result};
pub use gp::{GpModel, HyperConfig, HyperStrategy, Hyperparameters, NuggetPolicy};
pub use kernel::{kernel_eval, kernel_gradient, kernel_matrix, KernelParams};
pub use optimize::{maximize, Maximum, Objective, OptimizerConfig, OptimizerStrategy};
pub use space::Bounds;
