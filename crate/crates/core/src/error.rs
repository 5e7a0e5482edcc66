//! Error types shared across the crate.
//!
//! Two families: [`ParseError`] carries a position into the problem text,
//! [`Fault`] covers everything that can go wrong while evaluating, gridding,
//! classifying, or solving an already-parsed problem.

use std::fmt;
use thiserror::Error;

/// Position-tagged error from the problem-file or expression parser.
/// Lines and columns are 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(line: usize, column: usize, message: impl Into<String>) -> Self {
        ParseError {
            line,
            column,
            message: message.into(),
        }
    }
}

/// The input at which an evaluation fault occurred.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Point {
    Scalar(f64),
    Triple(f64, f64, f64),
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Point::Scalar(x) => write!(f, "{x}"),
            Point::Triple(x, y, z) => write!(f, "({x}, {y}, {z})"),
        }
    }
}

/// Runtime fault raised by operations on a parsed problem.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Fault {
    #[error("division by zero while evaluating expression at {point}")]
    DivisionByZero { point: Point },
    #[error("expression produced a non-finite value at {point}")]
    NonFinite { point: Point },
    #[error("no piecewise branch matches x = {x}")]
    UnmatchedPoint { x: f64 },
    #[error("orbit left the map's branches at iterate {index}: x = {x}")]
    OrbitUnmatched { index: usize, x: f64 },
    #[error("subset {index} produced an empty grid")]
    EmptyGrid { index: usize },
    #[error("grid would hold {count} points, over the cap of {cap}")]
    GridCapExceeded { count: usize, cap: usize },
    #[error("the domain has no grid points")]
    EmptyDomain,
    #[error("the epsilon-fixed-point set is empty")]
    EmptySet,
    #[error("operator class {class} is not supported here: {reason}")]
    UnsupportedClass {
        class: &'static str,
        reason: &'static str,
    },
    #[error("parameter out of range: {message}")]
    Parameter { message: String },
    #[error("start point x0 = {x0} lies outside every declared subset")]
    StartOutsideDomain { x0: f64 },
    #[error("axiom check needs at least 2 distinct sample points")]
    SampleTooSmall,
}

impl Fault {
    pub fn parameter(message: impl Into<String>) -> Self {
        Fault::Parameter {
            message: message.into(),
        }
    }

    pub fn from_eval(failure: crate::expr::EvalFailure, point: Point) -> Self {
        match failure {
            crate::expr::EvalFailure::DivisionByZero => Fault::DivisionByZero { point },
            crate::expr::EvalFailure::NonFinite => Fault::NonFinite { point },
        }
    }
}
