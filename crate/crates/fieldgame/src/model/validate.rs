//! Validation of assembled problems: gradient consistency against central
//! finite differences at random sample points, and boundedness spot checks.


use crate::error::{Error, Result};
use crate::model::coeff::{ArgBlock, ArgPoint, ProblemSpec, TerminalArgs};
use crate::simulate::rng;

/// Fixed stream key for the deterministic sample-point draw.
const VALIDATION_SEED: u64 = 0x7661_6c69_6461_7465;

/// Relative tolerance for analytic-vs-finite-difference agreement.
pub const GRADIENT_TOLERANCE: f64 = 1e-5;

/// Worst relative disagreement between one coefficient's analytic
/// derivative and central finite differences, over all sample points.
#[derive(Clone, Debug)]
pub struct GradientCheck {
    pub coefficient: String,
    pub block: String,
    pub max_rel_error: f64,
    pub points: usize,
}

#[derive(Clone, Debug, Default)]
pub struct ValidationReport {
    pub passed: bool,
    pub sample_points: usize,
    pub gradient_checks: Vec<GradientCheck>,
    pub messages: Vec<String>,
    /// Definiteness margin δ of the control-cost matrices; only filled by
    /// the linear-quadratic validator.
    pub delta: Option<f64>,
}

impl ValidationReport {
    pub fn max_gradient_error(&self) -> f64 {
        self.gradient_checks
            .iter()
            .map(|c| c.max_rel_error)
            .fold(0.0, f64::max)
    }
}

fn sample_point(spec: &ProblemSpec, index: u64, scale: f64) -> ArgPoint {
    let mut p = ArgPoint::zeros(spec.n, spec.k1, spec.k2, 0.0);
    p.t = spec.horizon * rng::aux_uniform(VALIDATION_SEED, index, 0);
    let mut lane = 1u64;
    for block in ArgBlock::ALL {
        let v = p.block_mut(block);
        for j in 0..v.len() {
            v[j] = scale * rng::aux_normal(VALIDATION_SEED, index, lane + j as u64);
        }
        lane += 64;
    }
    p
}

fn describe_point(p: &ArgPoint) -> String {
    format!(
        "t={:.6}, x={:?}, E[x]={:?}, u1={:?}, E[u1]={:?}, u2={:?}, E[u2]={:?}",
        p.t,
        p.x.as_slice(),
        p.x_mean.as_slice(),
        p.u1.as_slice(),
        p.u1_mean.as_slice(),
        p.u2.as_slice(),
        p.u2_mean.as_slice()
    )
}

/// Relative disagreement |analytic − fd| / max(1, |fd|), the scale used in
/// every gradient check below.
fn rel_err(analytic: f64, fd: f64) -> f64 {
    (analytic - fd).abs() / fd.abs().max(1.0)
}

struct FdProbe<'a> {
    name: &'a str,
    point: ArgPoint,
}

impl FdProbe<'_> {
    /// Central finite difference of a scalar functional along component
    /// `j` of `block`.
    fn diff(&self, block: ArgBlock, j: usize, f: &dyn Fn(&ArgPoint) -> f64) -> f64 {
        let eps = 1e-5 * self.point.block_ref(block)[j].abs().max(1.0);
        let mut hi = self.point.clone();
        hi.block_mut(block)[j] += eps;
        let mut lo = self.point.clone();
        lo.block_mut(block)[j] -= eps;
        (f(&hi) - f(&lo)) / (2.0 * eps)
    }
}

/// Check a problem's structure, coefficient finiteness, and analytic
/// derivatives (against central finite differences at `points` random
/// sample points; boundedness is spot-checked at inflated inputs).
///
/// Coefficients without analytic derivatives are noted in `messages` and
/// skipped — they support simulation but not adjoint or stationarity work.
pub fn validate_problem(spec: &ProblemSpec) -> Result<ValidationReport> {
    validate_problem_at(spec, 120)
}

pub fn validate_problem_at(spec: &ProblemSpec, points: usize) -> Result<ValidationReport> {
    if spec.n == 0 || spec.k1 == 0 || spec.k2 == 0 {
        return Err(Error::Validation(format!(
            "dimensions must be positive (n={}, k1={}, k2={})",
            spec.n, spec.k1, spec.k2
        )));
    }
    if !(spec.horizon > 0.0 && spec.horizon.is_finite()) {
        return Err(Error::Validation(format!("horizon must be positive, got {}", spec.horizon)));
    }
    if spec.initial.len() != spec.n {
        return Err(Error::Validation(format!(
            "initial state has length {}, expected n = {}",
            spec.initial.len(),
            spec.n
        )));
    }
    for (player, bounds) in spec.control_bounds.iter().enumerate() {
        if let Some(b) = bounds {
            let k = if player == 0 { spec.k1 } else { spec.k2 };
            if b.lower.len() != k || b.upper.len() != k {
                return Err(Error::Validation(format!(
                    "player-{} box bounds have lengths ({}, {}), expected {k}",
                    player + 1,
                    b.lower.len(),
                    b.upper.len()
                )));
            }
            if (0..k).any(|j| b.lower[j] > b.upper[j]) {
                return Err(Error::Validation(format!(
                    "player-{} box bounds are empty (lower > upper)",
                    player + 1
                )));
            }
        }
    }

    let mut report = ValidationReport {
        passed: true,
        sample_points: points,
        ..Default::default()
    };

    // One accumulator per (coefficient, block); terminal handled apart.
    let mut worst: Vec<(String, String, f64)> = Vec::new();
    let mut track = |coefficient: &str, block: String, err: f64| {
        if let Some(w) = worst
            .iter_mut()
            .find(|(c, b, _)| c == coefficient && *b == block)
        {
            w.2 = w.2.max(err);
        } else {
            worst.push((coefficient.to_string(), block, err));
        }
    };

    let vector_coeffs = |s: &ProblemSpec| {
        [
            ("drift_b", s.drift_b.clone()),
            ("diffusion_g", s.diffusion_g.clone()),
            ("diffusion_g_tilde", s.diffusion_g_tilde.clone()),
        ]
    };

    for idx in 0..points as u64 {
        // Moderate scale for derivative checks; inflated scale for the
        // boundedness spot check (all we can assert is finiteness there).
        let scale = if idx % 10 == 9 { 100.0 } else { 1.5 };
        let point = sample_point(spec, idx, scale);
        let args = point.args();

        for (name, coeff) in vector_coeffs(spec) {
            let v = coeff.eval(&args);
            if v.len() != spec.n {
                return Err(Error::Validation(format!(
                    "{name} returned length {} but the state dimension is {}",
                    v.len(),
                    spec.n
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Validation(format!(
                    "{name} returned a non-finite value at {}",
                    describe_point(&point)
                )));
            }
            if !coeff.has_jacobian() || scale > 10.0 {
                continue;
            }
            let probe = FdProbe { name, point: point.clone() };
            for block in ArgBlock::ALL {
                let jac = coeff.jacobian(&args, block).expect("has_jacobian checked");
                let bdim = spec.block_dim(block);
                if jac.nrows() != spec.n || jac.ncols() != bdim {
                    return Err(Error::Validation(format!(
                        "{name} jacobian for block {block} has shape {}×{}, expected {}×{}",
                        jac.nrows(),
                        jac.ncols(),
                        spec.n,
                        bdim
                    )));
                }
                for row in 0..spec.n {
                    for col in 0..bdim {
                        let c = coeff.clone();
                        let fd = probe.diff(block, col, &|p: &ArgPoint| c.eval(&p.args())[row]);
                        track(probe.name, block.to_string(), rel_err(jac[(row, col)], fd));
                    }
                }
            }
        }

        for (name, coeff) in [
            ("observation_h", spec.observation_h.clone()),
            ("running_cost", spec.running_cost.clone()),
        ] {
            let v = coeff.eval(&args);
            if !v.is_finite() {
                return Err(Error::Validation(format!(
                    "{name} returned a non-finite value at {}",
                    describe_point(&point)
                )));
            }
            if !coeff.has_gradient() || scale > 10.0 {
                continue;
            }
            let probe = FdProbe { name, point: point.clone() };
            for block in ArgBlock::ALL {
                let grad = coeff.gradient(&args, block).expect("has_gradient checked");
                let bdim = spec.block_dim(block);
                if grad.len() != bdim {
                    return Err(Error::Validation(format!(
                        "{name} gradient for block {block} has length {}, expected {}",
                        grad.len(),
                        bdim
                    )));
                }
                for col in 0..bdim {
                    let c = coeff.clone();
                    let fd = probe.diff(block, col, &|p: &ArgPoint| c.eval(&p.args()));
                    track(probe.name, block.to_string(), rel_err(grad[col], fd));
                }
            }
        }

        // Terminal cost: only (x, E[x]) matter.
        {
            let targs = TerminalArgs::from_slices(point.x.as_slice(), point.x_mean.as_slice());
            let v = spec.terminal_cost.eval(&targs);
            if !v.is_finite() {
                return Err(Error::Validation(format!(
                    "terminal_cost returned a non-finite value at {}",
                    describe_point(&point)
                )));
            }
            if spec.terminal_cost.has_gradients() && scale <= 10.0 {
                let probe = FdProbe { name: "terminal_cost", point: point.clone() };
                let m = spec.terminal_cost.clone();
                let eval = move |p: &ArgPoint| {
                    m.eval(&TerminalArgs::from_slices(p.x.as_slice(), p.x_mean.as_slice()))
                };
                for (block, grad) in [
                    (ArgBlock::X, spec.terminal_cost.grad_x(&targs).unwrap()),
                    (ArgBlock::XMean, spec.terminal_cost.grad_x_mean(&targs).unwrap()),
                ] {
                    if grad.len() != spec.n {
                        return Err(Error::Validation(format!(
                            "terminal_cost gradient for block {block} has length {}, expected {}",
                            grad.len(),
                            spec.n
                        )));
                    }
                    for col in 0..spec.n {
                        let fd = probe.diff(block, col, &eval);
                        track("terminal_cost", block.to_string(), rel_err(grad[col], fd));
                    }
                }
            }
        }
    }

    for (name, has) in [
        ("drift_b", spec.drift_b.has_jacobian()),
        ("diffusion_g", spec.diffusion_g.has_jacobian()),
        ("diffusion_g_tilde", spec.diffusion_g_tilde.has_jacobian()),
        ("observation_h", spec.observation_h.has_gradient()),
        ("running_cost", spec.running_cost.has_gradient()),
        ("terminal_cost", spec.terminal_cost.has_gradients()),
    ] {
        if !has {
            report.messages.push(format!(
                "{name}: no analytic derivative supplied; gradient consistency not checked"
            ));
        }
    }
    report
        .messages
        .push("boundedness spot check: all coefficients finite at 100x-scaled inputs".to_string());

    report.gradient_checks = worst
        .into_iter()
        .map(|(coefficient, block, max_rel_error)| GradientCheck {
            coefficient,
            block,
            max_rel_error,
            points,
        })
        .collect();
    report.passed = report
        .gradient_checks
        .iter()
        .all(|c| c.max_rel_error < GRADIENT_TOLERANCE);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use crate::model::coeff::VectorCoeff;

    #[test]
    fn zero_problem_passes_with_zero_gradient_error() {
        let spec = ProblemSpec::zeros(2, 1, 1, 1.0, DVector::zeros(2));
        let report = validate_problem(&spec).unwrap();
        assert!(report.passed);
        assert_eq!(report.max_gradient_error(), 0.0);
        assert!(report.sample_points >= 100);
    }

    #[test]
    fn linear_drift_with_exact_jacobian_passes() {
        let mut spec = ProblemSpec::zeros(2, 1, 1, 1.0, DVector::zeros(2));
        spec.drift_b = VectorCoeff::linear(2, vec![(ArgBlock::X, DMatrix::identity(2, 2))]);
        let report = validate_problem(&spec).unwrap();
        assert!(report.passed);
        assert!(report.max_gradient_error() < 1e-5);
    }

    #[test]
    fn wrong_jacobian_reports_mismatch_of_one() {
        // drift b = x but with the claimed derivative 2·identity: the
        // finite difference sees 1, so the relative mismatch is 1.0.
        let mut spec = ProblemSpec::zeros(2, 1, 1, 1.0, DVector::zeros(2));
        spec.drift_b = VectorCoeff::with_jacobian(
            2,
            |args| args.x.clone_owned(),
            |args, block| {
                let cols = args.block(block).len();
                if block == ArgBlock::X {
                    DMatrix::identity(2, 2) * 2.0
                } else {
                    DMatrix::zeros(2, cols)
                }
            },
        );
        let report = validate_problem(&spec).unwrap();
        assert!(!report.passed);
        let err = report
            .gradient_checks
            .iter()
            .find(|c| c.coefficient == "drift_b" && c.block == "x")
            .unwrap()
            .max_rel_error;
        assert!((err - 1.0).abs() < 1e-6, "mismatch {err}");
    }

    #[test]
    fn non_finite_coefficient_is_a_diagnostic_error() {
        let mut spec = ProblemSpec::zeros(1, 1, 1, 1.0, DVector::zeros(1));
        spec.observation_h = crate::model::coeff::ScalarCoeff::from_fn(|args| 1.0 / args.x[0].sin() / 0.0);
        let err = validate_problem(&spec).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("observation_h"), "{msg}");
        assert!(msg.contains("t="), "{msg}");
    }

    #[test]
    fn bad_dimensions_are_rejected() {
        let spec = ProblemSpec::zeros(2, 1, 1, 1.0, DVector::zeros(3));
        assert!(validate_problem(&spec).is_err());
        let spec = ProblemSpec::zeros(2, 1, 1, -1.0, DVector::zeros(2));
        assert!(validate_problem(&spec).is_err());
    }
}
