//! Piecewise-constant time dependence for problem data.
//!
//! The theory needs only bounded measurable coefficients in time, so every
//! time-varying matrix, vector, or scalar is either a constant or a table
//! of knots with left-continuous piecewise-constant interpolation: the
//! value on `[times[j], times[j+1])` is `values[j]`, the first value
//! extends to the left of the first knot, the last to the horizon.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum TimeDependent<V> {
    Constant(V),
    Table { times: Vec<f64>, values: Vec<V> },
}

pub type TimeMatrix = TimeDependent<DMatrix<f64>>;
pub type TimeVector = TimeDependent<DVector<f64>>;
pub type TimeScalar = TimeDependent<f64>;

impl<V> TimeDependent<V> {
    /// Value in force at time `t`.
    pub fn at(&self, t: f64) -> &V {
        match self {
            TimeDependent::Constant(v) => v,
            TimeDependent::Table { times, values } => {
                let j = times.partition_point(|&s| s <= t);
                &values[j.saturating_sub(1)]
            }
        }
    }

    /// Discontinuity times (empty for constants).
    pub fn knots(&self) -> &[f64] {
        match self {
            TimeDependent::Constant(_) => &[],
            TimeDependent::Table { times, .. } => times,
        }
    }

    /// Check table well-formedness, then run `check` on every value;
    /// `check` returns a description of the defect, if any.
    pub fn validate(&self, name: &str, check: impl Fn(&V) -> Option<String>) -> Result<()> {
        if let TimeDependent::Table { times, values } = self {
            if times.is_empty() {
                return Err(Error::Validation(format!("{name}: empty time table")));
            }
            if times.len() != values.len() {
                return Err(Error::Validation(format!(
                    "{name}: {} knot times but {} values",
                    times.len(),
                    values.len()
                )));
            }
            if times.iter().any(|t| !t.is_finite()) {
                return Err(Error::Validation(format!("{name}: non-finite knot time")));
            }
            if times.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Validation(format!(
                    "{name}: knot times must be strictly increasing"
                )));
            }
        }
        match self {
            TimeDependent::Constant(v) => {
                if let Some(msg) = check(v) {
                    return Err(Error::Validation(format!("{name}: {msg}")));
                }
            }
            TimeDependent::Table { values, .. } => {
                for (j, v) in values.iter().enumerate() {
                    if let Some(msg) = check(v) {
                        return Err(Error::Validation(format!("{name} (table entry {j}): {msg}")));
                    }
                }
            }
        }
        Ok(())
    }
}

impl TimeMatrix {
    /// 1×1 constant matrix, convenient for scalar problems.
    pub fn scalar(v: f64) -> Self {
        TimeDependent::Constant(DMatrix::from_element(1, 1, v))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        TimeDependent::Constant(DMatrix::zeros(rows, cols))
    }
}

impl TimeVector {
    /// Length-1 constant vector, convenient for scalar problems.
    pub fn scalar(v: f64) -> Self {
        TimeDependent::Constant(DVector::from_element(1, v))
    }

    pub fn zeros(len: usize) -> Self {
        TimeDependent::Constant(DVector::zeros(len))
    }
}

impl TimeScalar {
    pub fn zero() -> Self {
        TimeDependent::Constant(0.0)
    }
}

impl<V> From<V> for TimeDependent<V> {
    fn from(v: V) -> Self {
        TimeDependent::Constant(v)
    }
}
