//! Approximate fixed points of cyclical contraction maps on G-metric
//! spaces.
//!
//! The crate builds real-line G-metric spaces, parses a small problem
//! language describing carrier sets and a cyclical map, classifies the map
//! into contraction classes with empirically fitted constants, locates
//! epsilon-fixed points by Picard iteration with theorem-derived iteration
//! bounds, and enumerates epsilon-fixed-point sets to check closed-form
//! diameter bounds.

#![forbid(unsafe_code)]

pub mod atlas;
pub mod axioms;
pub mod bundled;
pub mod engine;
pub mod error;
pub mod expr;
pub mod ops;
pub mod problem;
pub mod space;

pub use atlas::{diameter_bound, enumerate_fset, set_diameter, verify_diameter, FixedPointSet};
pub use axioms::{check_axioms, AxiomReport};
pub use engine::{
    displacement, iteration_bound, picard_solve, power_solve, IterationBound, SolveConfig,
    SolveOutcome, SolveTrace,
};
pub use error::{Fault, ParseError};
pub use expr::{Expr, Var};
pub use ops::{
    apply_map, classify_all, contraction_rate, empirical_constant, pair_ratio,
    verify_cyclicity, verify_mohsenialhosseini, ClassParams, ClassificationReport, CyclicMap,
    OperatorClass,
};
pub use problem::{
    eval_expr, parse_spec, serialize_spec, validate_coverage, MapBody, PiecewiseDef, ProblemSpec,
};
pub use space::{
    derived_metric, discretize, domain_grids, eval_g, union_grid, GMetricDef, GridPlan, GShape,
    GSpace, Interval, RealSubset, DEFAULT_TOL,
};
