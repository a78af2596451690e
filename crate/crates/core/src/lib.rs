pub mod bounding;
pub mod error;
pub mod eval;
pub mod gibbs;
pub mod grammar;
pub mod lc;
pub mod model;
pub mod pipeline;
pub mod sampler;
pub mod store;
pub mod synth;
pub mod transition;
pub mod tree;
