//! Memetic genetic programming for binary image classification.
//!
//! Programs are strongly-typed trees of convolution, pooling, windowed
//! aggregation and arithmetic nodes. A generational evolutionary search
//! explores program structure while mini-batch SGD tunes the convolution
//! filters of the best individuals.

pub mod cli;
pub mod dataset;
pub mod evolution;
pub mod gp_program;
pub mod grad_engine;
pub mod image_ops;
pub mod local_search;
