//! Time-discrete small-strain elastoplasticity with linear kinematic
//! hardening: tensor algebra, a Galerkin surrogate model, a generic
//! stop/play engine, the forward solver, refinement studies and a
//! trajectory-optimization layer.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod control;
pub mod convergence;
pub mod error;
pub mod evi;
pub mod forward;
pub mod metric;
pub mod model;
pub mod par;
pub mod path;
pub mod tensor;

pub use error::{Error, Result};
pub use metric::Metric;
pub use model::{build_model, builtin_models, DiscreteModel, GeneralizedStressField, MaterialLaw, ModelParams};
pub use par::Execution;
pub use tensor::{dd, dd_adjoint, dev, yield_phi, GeneralizedStress, SymTensor};
