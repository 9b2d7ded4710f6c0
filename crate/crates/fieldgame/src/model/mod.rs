//! Problem descriptions: general coefficient functions, the linear-quadratic
//! subclass, admissible controls, and validation.

pub mod coeff;
pub mod control;
pub mod json;
pub mod lq;
pub mod time;
pub mod validate;

pub use coeff::{ArgBlock, ArgPoint, BoxBounds, CoeffArgs, ProblemSpec, ScalarCoeff, TerminalArgs, TerminalCost, VectorCoeff};
pub use control::{ControlLaw, ControlProcess, ObsFeatures, Player};
pub use json::problem_from_json;
pub use lq::{lift_lq, validate_lq, LqSpec};
pub use time::{TimeDependent, TimeMatrix, TimeScalar, TimeVector};
pub use validate::{validate_problem, GradientCheck, ValidationReport};
