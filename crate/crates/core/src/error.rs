use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("structural error: {0}")]
    Structural(String),

    #[error("tree needs depth {required} but the bound is {bound} (at node `{node}`)")]
    Depth {
        required: usize,
        bound: usize,
        node: String,
    },

    #[error("zero-probability sentence: mass vanished at token position {position}")]
    ZeroProbability { position: usize },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("alignment error in sentence {sentence}: {message}")]
    Alignment { sentence: usize, message: String },

    #[error("state space of {states} stores (~{transitions} transitions) exceeds the budget of {budget} transitions")]
    Capacity {
        states: u128,
        transitions: u128,
        budget: u128,
    },

    #[error(transparent)]
    Io(#[from] io::Error),
}
