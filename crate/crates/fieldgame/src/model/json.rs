//! JSON problem ingestion.
//!
//! Two document types share a header of dimensions, horizon `T`, and
//! initial state `a`:
//!
//! ```text
//! {"type": "lq", "n": 1, "k1": 1, "k2": 1, "T": 1.0, "a": [1.0],
//!  "matrices": {"N11": 1.0, "N21": -1.0, "Q": [1.0], "M": [1.0],
//!               "B11": {"times": [0.0, 0.5], "values": [1.0, 0.5]}, ...}}
//! ```
//!
//! Matrix entries are a number (1×1), a flat array (vector), a nested
//! array (matrix), or a `{"times", "values"}` table of any of those for
//! piecewise-constant time dependence. Every dynamics matrix defaults to
//! zero; the control cost matrices `N11` and `N21` must be present since
//! the definiteness margin is meaningless without them.
//!
//! ```text
//! {"type": "general", ..., "coefficients": {"drift_b": {"family": ...}, ...}}
//! ```
//!
//! General coefficients select from the built-in families (`zero`,
//! `constant`, `linear`, `quadratic`, `bilinear`, `sin`, `tanh`) keyed by
//! argument-block names `x`, `x_mean`, `u1`, `u1_mean`, `u2`, `u2_mean`;
//! arbitrary user functions cannot cross a config file. A missing
//! coefficient is zero.

use nalgebra::{DMatrix, DVector};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::model::coeff::{ArgBlock, ProblemSpec, ScalarCoeff, TerminalCost, VectorCoeff};
use crate::model::lq::{lift_lq, LqSpec};
use crate::model::time::{TimeDependent, TimeMatrix};

/// A parsed problem document: the linear-quadratic class keeps its
/// structured form (the solvers need it), general problems are already
/// assembled coefficients.
#[derive(Clone, Debug)]
pub enum ProblemInput {
    Lq(LqSpec),
    General(Box<ProblemSpec>),
}

impl ProblemInput {
    /// The general-form problem: general documents as parsed, LQ documents
    /// lifted (which validates the definiteness margin).
    pub fn problem(&self) -> Result<ProblemSpec> {
        match self {
            ProblemInput::Lq(spec) => lift_lq(spec),
            ProblemInput::General(p) => Ok((**p).clone()),
        }
    }

    pub fn as_lq(&self) -> Option<&LqSpec> {
        match self {
            ProblemInput::Lq(spec) => Some(spec),
            ProblemInput::General(_) => None,
        }
    }
}

pub fn problem_from_json(text: &str) -> Result<ProblemInput> {
    let doc: Value =
        serde_json::from_str(text).map_err(|e| Error::Input(format!("malformed JSON: {e}")))?;
    let obj = doc
        .as_object()
        .ok_or_else(|| Error::Input("problem document must be a JSON object".into()))?;

    let kind = req_str(obj, "type")?;
    let n = req_usize(obj, "n")?;
    let k1 = req_usize(obj, "k1")?;
    let k2 = req_usize(obj, "k2")?;
    let horizon = req_f64(obj, "T")?;
    let initial = DVector::from_vec(flat_f64(req(obj, "a")?, "a")?);

    match kind {
        "lq" => parse_lq(obj, n, k1, k2, horizon, initial).map(ProblemInput::Lq),
        "general" => parse_general(obj, n, k1, k2, horizon, initial)
            .map(|p| ProblemInput::General(Box::new(p))),
        other => Err(Error::Input(format!(
            "unknown problem type {other:?}; expected \"lq\" or \"general\""
        ))),
    }
}

// ---------------------------------------------------------------- helpers

type Obj = serde_json::Map<String, Value>;

fn req<'a>(obj: &'a Obj, key: &str) -> Result<&'a Value> {
    obj.get(key)
        .ok_or_else(|| Error::Input(format!("missing required field \"{key}\"")))
}

fn req_str<'a>(obj: &'a Obj, key: &str) -> Result<&'a str> {
    req(obj, key)?
        .as_str()
        .ok_or_else(|| Error::Input(format!("field \"{key}\" must be a string")))
}

fn req_usize(obj: &Obj, key: &str) -> Result<usize> {
    req(obj, key)?
        .as_u64()
        .map(|v| v as usize)
        .ok_or_else(|| Error::Input(format!("field \"{key}\" must be a nonnegative integer")))
}

fn req_f64(obj: &Obj, key: &str) -> Result<f64> {
    req(obj, key)?
        .as_f64()
        .ok_or_else(|| Error::Input(format!("field \"{key}\" must be a number")))
}

fn flat_f64(v: &Value, name: &str) -> Result<Vec<f64>> {
    match v {
        Value::Number(x) => Ok(vec![x.as_f64().unwrap()]),
        Value::Array(items) => items
            .iter()
            .map(|x| {
                x.as_f64()
                    .ok_or_else(|| Error::Input(format!("\"{name}\" must contain numbers")))
            })
            .collect(),
        _ => Err(Error::Input(format!("\"{name}\" must be a number or an array of numbers"))),
    }
}

/// Number → 1×1; nested arrays → matrix by rows; flat array → column.
fn matrix_value(v: &Value, name: &str) -> Result<DMatrix<f64>> {
    match v {
        Value::Number(x) => Ok(DMatrix::from_element(1, 1, x.as_f64().unwrap())),
        Value::Array(rows) if rows.iter().all(|r| r.is_array()) => {
            let nrows = rows.len();
            let mut data = Vec::new();
            let mut ncols = None;
            for row in rows {
                let r = flat_f64(row, name)?;
                match ncols {
                    None => ncols = Some(r.len()),
                    Some(c) if c != r.len() => {
                        return Err(Error::Input(format!("\"{name}\" has ragged rows")))
                    }
                    _ => {}
                }
                data.extend(r);
            }
            let ncols = ncols.unwrap_or(0);
            if nrows == 0 || ncols == 0 {
                return Err(Error::Input(format!("\"{name}\" is empty")));
            }
            Ok(DMatrix::from_row_slice(nrows, ncols, &data))
        }
        Value::Array(_) => {
            let col = flat_f64(v, name)?;
            Ok(DMatrix::from_column_slice(col.len(), 1, &col))
        }
        _ => Err(Error::Input(format!(
            "\"{name}\" must be a number, an array, or an array of arrays"
        ))),
    }
}

fn vector_value(v: &Value, name: &str) -> Result<DVector<f64>> {
    Ok(DVector::from_vec(flat_f64(v, name)?))
}

fn scalar_value(v: &Value, name: &str) -> Result<f64> {
    v.as_f64()
        .ok_or_else(|| Error::Input(format!("\"{name}\" must be a number")))
}

/// Parse a possibly time-dependent entry, delegating the payload shape to
/// `leaf`.
fn time_dependent<V>(
    v: &Value,
    name: &str,
    leaf: impl Fn(&Value, &str) -> Result<V>,
) -> Result<TimeDependent<V>> {
    if let Some(obj) = v.as_object() {
        let times = flat_f64(req(obj, "times")?, name)?;
        let raw = req(obj, "values")?
            .as_array()
            .ok_or_else(|| Error::Input(format!("\"{name}\".values must be an array")))?;
        let values = raw.iter().map(|x| leaf(x, name)).collect::<Result<Vec<_>>>()?;
        Ok(TimeDependent::Table { times, values })
    } else {
        Ok(TimeDependent::Constant(leaf(v, name)?))
    }
}

// ---------------------------------------------------------------- lq type

fn parse_lq(
    obj: &Obj,
    n: usize,
    k1: usize,
    k2: usize,
    horizon: f64,
    initial: DVector<f64>,
) -> Result<LqSpec> {
    let matrices = req(obj, "matrices")?
        .as_object()
        .ok_or_else(|| Error::Input("\"matrices\" must be an object".into()))?;

    let mut spec = LqSpec::zeros(n, k1, k2, horizon, initial);

    let known = [
        "A1", "A2", "B11", "B12", "B21", "B22", "C1", "C2", "D11", "D12", "D21", "D22", "F1",
        "F2", "G11", "G12", "G21", "G22", "N11", "N12", "N21", "N22", "Q", "M", "h",
    ];
    for key in matrices.keys() {
        if !known.contains(&key.as_str()) {
            return Err(Error::Input(format!(
                "unknown matrix name \"{key}\" (expected one of {known:?})"
            )));
        }
    }
    for required in ["N11", "N21"] {
        if !matrices.contains_key(required) {
            return Err(Error::Input(format!(
                "matrix \"{required}\" is missing; the control cost structure requires it"
            )));
        }
    }

    let tm = |key: &str| -> Result<Option<TimeMatrix>> {
        matrices.get(key).map(|v| time_dependent(v, key, matrix_value)).transpose()
    };
    for (key, slot) in [
        ("A1", &mut spec.a1),
        ("A2", &mut spec.a2),
        ("B11", &mut spec.b11),
        ("B12", &mut spec.b12),
        ("B21", &mut spec.b21),
        ("B22", &mut spec.b22),
        ("C1", &mut spec.c1),
        ("C2", &mut spec.c2),
        ("D11", &mut spec.d11),
        ("D12", &mut spec.d12),
        ("D21", &mut spec.d21),
        ("D22", &mut spec.d22),
        ("F1", &mut spec.f1),
        ("F2", &mut spec.f2),
        ("G11", &mut spec.g11),
        ("G12", &mut spec.g12),
        ("G21", &mut spec.g21),
        ("G22", &mut spec.g22),
        ("N11", &mut spec.n11),
        ("N12", &mut spec.n12),
        ("N21", &mut spec.n21),
        ("N22", &mut spec.n22),
    ] {
        if let Some(m) = tm(key)? {
            *slot = m;
        }
    }
    if let Some(v) = matrices.get("Q") {
        spec.q = time_dependent(v, "Q", vector_value)?;
    }
    if let Some(v) = matrices.get("h") {
        spec.h = time_dependent(v, "h", scalar_value)?;
    }
    if let Some(v) = matrices.get("M") {
        spec.m = vector_value(v, "M")?;
    }
    Ok(spec)
}

// ----------------------------------------------------------- general type

fn parse_block(key: &str) -> Result<ArgBlock> {
    ArgBlock::ALL
        .into_iter()
        .find(|b| b.key() == key)
        .ok_or_else(|| {
            Error::Input(format!(
                "unknown argument block \"{key}\" (expected x, x_mean, u1, u1_mean, u2, u2_mean)"
            ))
        })
}

fn matrix_terms(obj: &Obj, key: &str, name: &str) -> Result<Vec<(ArgBlock, DMatrix<f64>)>> {
    let Some(v) = obj.get(key) else { return Ok(Vec::new()) };
    let terms = v
        .as_object()
        .ok_or_else(|| Error::Input(format!("\"{name}\".{key} must map blocks to matrices")))?;
    terms
        .iter()
        .map(|(k, m)| Ok((parse_block(k)?, matrix_value(m, name)?)))
        .collect()
}

fn vector_terms(obj: &Obj, key: &str, name: &str) -> Result<Vec<(ArgBlock, DVector<f64>)>> {
    let Some(v) = obj.get(key) else { return Ok(Vec::new()) };
    let terms = v
        .as_object()
        .ok_or_else(|| Error::Input(format!("\"{name}\".{key} must map blocks to vectors")))?;
    terms
        .iter()
        .map(|(k, m)| Ok((parse_block(k)?, vector_value(m, name)?)))
        .collect()
}

fn opt_f64(obj: &Obj, key: &str, default: f64) -> Result<f64> {
    match obj.get(key) {
        None => Ok(default),
        Some(v) => v
            .as_f64()
            .ok_or_else(|| Error::Input(format!("\"{key}\" must be a number"))),
    }
}

fn parse_vector_coeff(v: Option<&Value>, name: &str, dim: usize) -> Result<VectorCoeff> {
    let Some(v) = v else { return Ok(VectorCoeff::zero(dim)) };
    let obj = v
        .as_object()
        .ok_or_else(|| Error::Input(format!("coefficient \"{name}\" must be an object")))?;
    match req_str(obj, "family")? {
        "zero" => Ok(VectorCoeff::zero(dim)),
        "constant" => {
            let value = vector_value(req(obj, "value")?, name)?;
            if value.len() != dim {
                return Err(Error::Input(format!(
                    "\"{name}\" constant has length {}, expected {dim}",
                    value.len()
                )));
            }
            Ok(VectorCoeff::constant(value))
        }
        "linear" => Ok(VectorCoeff::linear(dim, matrix_terms(obj, "terms", name)?)),
        "tanh" => {
            let amplitude = vector_value(req(obj, "amplitude")?, name)?;
            let offset = match obj.get("offset") {
                Some(o) => vector_value(o, name)?,
                None => DVector::zeros(amplitude.len()),
            };
            Ok(VectorCoeff::tanh_of_linear(amplitude, offset, matrix_terms(obj, "terms", name)?))
        }
        other => Err(Error::Input(format!(
            "unknown family \"{other}\" for \"{name}\" (vector families: zero, constant, linear, tanh)"
        ))),
    }
}

fn parse_scalar_coeff(v: Option<&Value>, name: &str) -> Result<ScalarCoeff> {
    let Some(v) = v else { return Ok(ScalarCoeff::zero()) };
    let obj = v
        .as_object()
        .ok_or_else(|| Error::Input(format!("coefficient \"{name}\" must be an object")))?;
    match req_str(obj, "family")? {
        "zero" => Ok(ScalarCoeff::zero()),
        "constant" => Ok(ScalarCoeff::constant(req_f64(obj, "value")?)),
        "linear" => Ok(ScalarCoeff::linear(
            opt_f64(obj, "offset", 0.0)?,
            vector_terms(obj, "terms", name)?,
        )),
        "quadratic" => Ok(ScalarCoeff::quadratic(
            matrix_terms(obj, "quadratic", name)?,
            vector_terms(obj, "linear", name)?,
            opt_f64(obj, "offset", 0.0)?,
        )),
        "bilinear" => Ok(ScalarCoeff::bilinear(
            parse_block(req_str(obj, "left")?)?,
            parse_block(req_str(obj, "right")?)?,
            matrix_value(req(obj, "matrix")?, name)?,
        )),
        "sin" => Ok(ScalarCoeff::sin_of_linear(
            opt_f64(obj, "amplitude", 1.0)?,
            opt_f64(obj, "phase", 0.0)?,
            vector_terms(obj, "terms", name)?,
        )),
        other => Err(Error::Input(format!(
            "unknown family \"{other}\" for \"{name}\" \
             (scalar families: zero, constant, linear, quadratic, bilinear, sin)"
        ))),
    }
}

fn parse_terminal(v: Option<&Value>, n: usize) -> Result<TerminalCost> {
    let Some(v) = v else { return Ok(TerminalCost::zero(n)) };
    let obj = v
        .as_object()
        .ok_or_else(|| Error::Input("coefficient \"terminal_cost\" must be an object".into()))?;
    match req_str(obj, "family")? {
        "zero" => Ok(TerminalCost::zero(n)),
        "constant" => Ok(TerminalCost::constant(req_f64(obj, "value")?, n)),
        "linear" => {
            let mx = match obj.get("x") {
                Some(v) => vector_value(v, "terminal_cost.x")?,
                None => DVector::zeros(n),
            };
            let my = match obj.get("x_mean") {
                Some(v) => vector_value(v, "terminal_cost.x_mean")?,
                None => DVector::zeros(n),
            };
            Ok(TerminalCost::linear(mx, my))
        }
        "quadratic" => {
            let mxx = match obj.get("x") {
                Some(v) => matrix_value(v, "terminal_cost.x")?,
                None => DMatrix::zeros(n, n),
            };
            let myy = match obj.get("x_mean") {
                Some(v) => matrix_value(v, "terminal_cost.x_mean")?,
                None => DMatrix::zeros(n, n),
            };
            Ok(TerminalCost::quadratic(mxx, myy))
        }
        other => Err(Error::Input(format!(
            "unknown family \"{other}\" for \"terminal_cost\" \
             (terminal families: zero, constant, linear, quadratic)"
        ))),
    }
}

fn parse_general(
    obj: &Obj,
    n: usize,
    k1: usize,
    k2: usize,
    horizon: f64,
    initial: DVector<f64>,
) -> Result<ProblemSpec> {
    let coeffs = req(obj, "coefficients")?
        .as_object()
        .ok_or_else(|| Error::Input("\"coefficients\" must be an object".into()))?;
    let known = [
        "drift_b",
        "diffusion_g",
        "diffusion_g_tilde",
        "observation_h",
        "running_cost",
        "terminal_cost",
    ];
    for key in coeffs.keys() {
        if !known.contains(&key.as_str()) {
            return Err(Error::Input(format!(
                "unknown coefficient \"{key}\" (expected one of {known:?})"
            )));
        }
    }
    Ok(ProblemSpec {
        n,
        k1,
        k2,
        horizon,
        initial,
        drift_b: parse_vector_coeff(coeffs.get("drift_b"), "drift_b", n)?,
        diffusion_g: parse_vector_coeff(coeffs.get("diffusion_g"), "diffusion_g", n)?,
        diffusion_g_tilde: parse_vector_coeff(
            coeffs.get("diffusion_g_tilde"),
            "diffusion_g_tilde",
            n,
        )?,
        observation_h: parse_scalar_coeff(coeffs.get("observation_h"), "observation_h")?,
        running_cost: parse_scalar_coeff(coeffs.get("running_cost"), "running_cost")?,
        terminal_cost: parse_terminal(coeffs.get("terminal_cost"), n)?,
        control_bounds: [None, None],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::coeff::ArgPoint;
    use crate::model::validate::validate_problem;

    #[test]
    fn lq_document_round_trips_through_the_solver_form() {
        let text = r#"{
            "type": "lq", "n": 1, "k1": 1, "k2": 1, "T": 1.0, "a": [1.0],
            "matrices": {
                "N11": 1.0, "N21": -1.0, "Q": [1.0], "M": [1.0],
                "B11": {"times": [0.0, 0.5], "values": [1.0, 0.5]},
                "h": 0.4
            }
        }"#;
        let input = problem_from_json(text).unwrap();
        let lq = input.as_lq().unwrap();
        assert_eq!(lq.n, 1);
        assert_eq!(*lq.h.at(0.2), 0.4);
        assert_eq!(lq.b11.at(0.2)[(0, 0)], 1.0);
        assert_eq!(lq.b11.at(0.7)[(0, 0)], 0.5);
        assert!(input.problem().is_ok());
    }

    #[test]
    fn missing_required_cost_matrix_is_named() {
        let text = r#"{
            "type": "lq", "n": 1, "k1": 1, "k2": 1, "T": 1.0, "a": [1.0],
            "matrices": {"N11": 1.0}
        }"#;
        let err = problem_from_json(text).unwrap_err();
        assert!(err.to_string().contains("N21"), "{err}");
    }

    #[test]
    fn unknown_matrix_name_is_rejected() {
        let text = r#"{
            "type": "lq", "n": 1, "k1": 1, "k2": 1, "T": 1.0, "a": [1.0],
            "matrices": {"N11": 1.0, "N21": -1.0, "N13": 1.0}
        }"#;
        let err = problem_from_json(text).unwrap_err();
        assert!(err.to_string().contains("N13"), "{err}");
    }

    #[test]
    fn malformed_json_reports_line_and_column() {
        let err = problem_from_json("{\n  \"type\": \"lq\",,\n}").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2"), "{msg}");
        assert!(msg.contains("column"), "{msg}");
    }

    #[test]
    fn general_document_assembles_families() {
        let text = r#"{
            "type": "general", "n": 1, "k1": 1, "k2": 1, "T": 2.0, "a": [0.0],
            "coefficients": {
                "drift_b": {"family": "linear", "terms": {"x": 1.0, "u1": 0.5}},
                "diffusion_g": {"family": "constant", "value": [1.0]},
                "observation_h": {"family": "sin", "amplitude": 0.5, "terms": {"x": [1.0]}},
                "running_cost": {"family": "quadratic",
                                 "quadratic": {"u1": 1.0, "u2": -1.0},
                                 "linear": {"x": [1.0]}},
                "terminal_cost": {"family": "linear", "x": [2.0]}
            }
        }"#;
        let input = problem_from_json(text).unwrap();
        let p = input.problem().unwrap();
        let mut point = ArgPoint::zeros(1, 1, 1, 0.0);
        point.x[0] = 2.0;
        point.u1[0] = 4.0;
        assert_eq!(p.drift_b.eval(&point.args())[0], 4.0);
        assert_eq!(p.running_cost.eval(&point.args()), 2.0 + 16.0);
        let report = validate_problem(&p).unwrap();
        assert!(report.passed, "{:?}", report.gradient_checks);
    }

    #[test]
    fn unknown_family_is_rejected() {
        let text = r#"{
            "type": "general", "n": 1, "k1": 1, "k2": 1, "T": 1.0, "a": [0.0],
            "coefficients": {"drift_b": {"family": "cubic"}}
        }"#;
        let err = problem_from_json(text).unwrap_err();
        assert!(err.to_string().contains("cubic"), "{err}");
    }
}
