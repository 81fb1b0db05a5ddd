//! A small reverse-mode autodiff engine and the recurrent encoders built on it.

pub mod adam;
pub mod checkpoint;
pub mod encoder;
pub mod graph;
pub mod layers;
pub mod train;
pub mod vocab;

pub use graph::{Gradients, Graph, ParamId, ParamStore, Tensor, Var};
