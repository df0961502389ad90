#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ad;
pub mod cli;
pub mod gallery;
pub mod problem;
pub mod qp;
pub mod solver;
pub mod tensor;

pub use tensor::Tensor;
