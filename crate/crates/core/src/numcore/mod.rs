//! Dense reverse-mode automatic differentiation.

mod checkpoint;
mod gradcheck;
mod graph;
mod params;
mod tensor;

pub use checkpoint::Checkpoint;
pub use gradcheck::{grad_check, relative_error, GradCheckReport};
pub use graph::{sigmoid, softplus, Graph, Var, LAYER_NORM_EPS};
pub use params::{Gradients, Init, ParamId, ParamSet};
pub use tensor::Tensor;
