//! The linear-quadratic subclass.
//!
//! State dynamics are linear in the state, the state mean, both controls
//! and both control means,
//!
//! ```text
//! b  = A1 x + A2 E[x] + B11 u1 + B12 E[u1] + B21 u2 + B22 E[u2]
//! g  = C1 x + C2 E[x] + D11 u1 + D12 E[u1] + D21 u2 + D22 E[u2]
//! g~ = F1 x + F2 E[x] + G11 u1 + G12 E[u1] + G21 u2 + G22 E[u2]
//! h  = h(t)            (deterministic scalar)
//! ```
//!
//! and the cost is affine in the state and quadratic in the controls,
//!
//! ```text
//! l = ⟨Q(t), x⟩ + ⟨N11 u1, u1⟩ + ⟨N12 E[u1], E[u1]⟩
//!               + ⟨N21 u2, u2⟩ + ⟨N22 E[u2], E[u2]⟩,      m = ⟨M, x(T)⟩.
//! ```
//!
//! Player 1 (control u1) minimizes, player 2 (control u2) maximizes, so
//! the standing definiteness assumption is that N11 and N11 + N12 are
//! positive definite while N21 and N21 + N22 are negative definite, with
//! a common margin δ > 0. `validate_lq` estimates δ over a time grid;
//! `lift_lq` embeds the class into the general coefficient form with
//! analytic derivatives.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::model::coeff::{ArgBlock, CoeffArgs, ProblemSpec, ScalarCoeff, TerminalCost, VectorCoeff};
use crate::model::time::{TimeMatrix, TimeScalar, TimeVector};
use crate::model::validate::ValidationReport;
use crate::model::Player;

/// Complete data of one linear-quadratic game.
#[derive(Clone, Debug)]
pub struct LqSpec {
    pub n: usize,
    pub k1: usize,
    pub k2: usize,
    pub horizon: f64,
    pub initial: DVector<f64>,

    // Drift: state, state-mean, and control feedthrough matrices.
    pub a1: TimeMatrix,
    pub a2: TimeMatrix,
    pub b11: TimeMatrix,
    pub b12: TimeMatrix,
    pub b21: TimeMatrix,
    pub b22: TimeMatrix,

    // Diffusion against the state noise W.
    pub c1: TimeMatrix,
    pub c2: TimeMatrix,
    pub d11: TimeMatrix,
    pub d12: TimeMatrix,
    pub d21: TimeMatrix,
    pub d22: TimeMatrix,

    // Diffusion against the observation noise Y.
    pub f1: TimeMatrix,
    pub f2: TimeMatrix,
    pub g11: TimeMatrix,
    pub g12: TimeMatrix,
    pub g21: TimeMatrix,
    pub g22: TimeMatrix,

    /// Observation drift, a deterministic scalar function of time.
    pub h: TimeScalar,

    // Cost: linear state weight, quadratic control weights, terminal weight.
    pub q: TimeVector,
    pub n11: TimeMatrix,
    pub n12: TimeMatrix,
    pub n21: TimeMatrix,
    pub n22: TimeMatrix,
    pub m: DVector<f64>,
}

impl LqSpec {
    /// All-zero template with the given dimensions; customize fields from
    /// here. Note the zero template fails `validate_lq` until the control
    /// cost matrices are given a definiteness margin.
    pub fn zeros(n: usize, k1: usize, k2: usize, horizon: f64, initial: DVector<f64>) -> Self {
        LqSpec {
            n,
            k1,
            k2,
            horizon,
            initial,
            a1: TimeMatrix::zeros(n, n),
            a2: TimeMatrix::zeros(n, n),
            b11: TimeMatrix::zeros(n, k1),
            b12: TimeMatrix::zeros(n, k1),
            b21: TimeMatrix::zeros(n, k2),
            b22: TimeMatrix::zeros(n, k2),
            c1: TimeMatrix::zeros(n, n),
            c2: TimeMatrix::zeros(n, n),
            d11: TimeMatrix::zeros(n, k1),
            d12: TimeMatrix::zeros(n, k1),
            d21: TimeMatrix::zeros(n, k2),
            d22: TimeMatrix::zeros(n, k2),
            f1: TimeMatrix::zeros(n, n),
            f2: TimeMatrix::zeros(n, n),
            g11: TimeMatrix::zeros(n, k1),
            g12: TimeMatrix::zeros(n, k1),
            g21: TimeMatrix::zeros(n, k2),
            g22: TimeMatrix::zeros(n, k2),
            h: TimeScalar::zero(),
            q: TimeVector::zeros(n),
            n11: TimeMatrix::zeros(k1, k1),
            n12: TimeMatrix::zeros(k1, k1),
            n21: TimeMatrix::zeros(k2, k2),
            n22: TimeMatrix::zeros(k2, k2),
            m: DVector::zeros(n),
        }
    }

    /// Scalar (n = k1 = k2 = 1) all-zero template.
    pub fn scalar_zeros(horizon: f64, initial: f64) -> Self {
        Self::zeros(1, 1, 1, horizon, DVector::from_element(1, initial))
    }

    /// Matrix of the deterministic adjoint reduction at time t:
    /// (A1 + A2 − h(t)(F1 + F2))ᵀ.
    pub fn adjoint_ode_matrix(&self, t: f64) -> DMatrix<f64> {
        let h = *self.h.at(t);
        (self.a1.at(t) + self.a2.at(t) - (self.f1.at(t) + self.f2.at(t)) * h).transpose()
    }

    /// Dual weight of one player's stationarity system at time t:
    /// (B_i1 + B_i2 − h(t)(G_i1 + G_i2))ᵀ, a k_i×n matrix.
    pub fn dual_weight(&self, player: Player, t: f64) -> DMatrix<f64> {
        let h = *self.h.at(t);
        match player {
            Player::One => (self.b11.at(t) + self.b12.at(t) - (self.g11.at(t) + self.g12.at(t)) * h).transpose(),
            Player::Two => (self.b21.at(t) + self.b22.at(t) - (self.g21.at(t) + self.g22.at(t)) * h).transpose(),
        }
    }

    /// Aggregate control cost N_i1 + N_i2 of one player at time t.
    pub fn control_weight(&self, player: Player, t: f64) -> DMatrix<f64> {
        match player {
            Player::One => self.n11.at(t) + self.n12.at(t),
            Player::Two => self.n21.at(t) + self.n22.at(t),
        }
    }

    fn matrix_fields(&self) -> [(&'static str, &TimeMatrix, usize, usize); 22] {
        let (n, k1, k2) = (self.n, self.k1, self.k2);
        [
            ("A1", &self.a1, n, n),
            ("A2", &self.a2, n, n),
            ("B11", &self.b11, n, k1),
            ("B12", &self.b12, n, k1),
            ("B21", &self.b21, n, k2),
            ("B22", &self.b22, n, k2),
            ("C1", &self.c1, n, n),
            ("C2", &self.c2, n, n),
            ("D11", &self.d11, n, k1),
            ("D12", &self.d12, n, k1),
            ("D21", &self.d21, n, k2),
            ("D22", &self.d22, n, k2),
            ("F1", &self.f1, n, n),
            ("F2", &self.f2, n, n),
            ("G11", &self.g11, n, k1),
            ("G12", &self.g12, n, k1),
            ("G21", &self.g21, n, k2),
            ("G22", &self.g22, n, k2),
            ("N11", &self.n11, k1, k1),
            ("N12", &self.n12, k1, k1),
            ("N21", &self.n21, k2, k2),
            ("N22", &self.n22, k2, k2),
        ]
    }

    /// Distinct times at which the definiteness margin is evaluated: a
    /// uniform grid joined with every knot of the control cost tables.
    fn definiteness_grid(&self) -> Vec<f64> {
        let mut ts: Vec<f64> = (0..=200).map(|j| self.horizon * j as f64 / 200.0).collect();
        for table in [&self.n11, &self.n12, &self.n21, &self.n22] {
            ts.extend_from_slice(table.knots());
        }
        ts.retain(|t| (0.0..=self.horizon).contains(t));
        ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ts.dedup();
        ts
    }
}

const SYMMETRY_TOLERANCE: f64 = 1e-12;

/// ⟨N v, v⟩ without allocating the intermediate product (the running
/// cost is evaluated once per particle per step in cost estimation).
fn quad_form(m: &DMatrix<f64>, v: &nalgebra::DVectorView<'_, f64>) -> f64 {
    let mut acc = 0.0;
    for j in 0..m.ncols() {
        let vj = v[j];
        for i in 0..m.nrows() {
            acc += m[(i, j)] * v[i] * vj;
        }
    }
    acc
}

fn check_symmetry(name: &str, m: &DMatrix<f64>) -> Result<()> {
    let defect = (m - m.transpose()).abs().max();
    if defect > SYMMETRY_TOLERANCE {
        return Err(Error::Validation(format!(
            "control cost matrix {name} is asymmetric (defect {defect:.3e} > {SYMMETRY_TOLERANCE:.0e}); \
             only the symmetric part of a quadratic form matters, so an asymmetric input is rejected \
             rather than silently symmetrized"
        )));
    }
    Ok(())
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.min()
}

fn max_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.max()
}

/// Check shapes, symmetry of the control cost matrices, and the
/// definiteness margin δ = min over time of
///
/// ```text
/// λ_min(N11), λ_min(N11 + N12), −λ_max(N21), −λ_max(N21 + N22);
/// ```
///
/// the report passes iff δ > 0 (player 1's cost is strictly convex in u1,
/// player 2's strictly concave in u2).
pub fn validate_lq(spec: &LqSpec) -> Result<ValidationReport> {
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
    if spec.m.len() != spec.n {
        return Err(Error::Validation(format!(
            "terminal weight M has length {}, expected n = {}",
            spec.m.len(),
            spec.n
        )));
    }
    if spec.m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("terminal weight M has non-finite entries".into()));
    }

    for (name, field, rows, cols) in spec.matrix_fields() {
        field.validate(name, |m| {
            if m.nrows() != rows || m.ncols() != cols {
                Some(format!("shape {}×{}, expected {rows}×{cols}", m.nrows(), m.ncols()))
            } else if m.iter().any(|v| !v.is_finite()) {
                Some("non-finite entries".to_string())
            } else {
                None
            }
        })?;
    }
    spec.q.validate("Q", |v| {
        if v.len() != spec.n {
            Some(format!("length {}, expected {}", v.len(), spec.n))
        } else if v.iter().any(|x| !x.is_finite()) {
            Some("non-finite entries".to_string())
        } else {
            None
        }
    })?;
    spec.h.validate("h", |v| (!v.is_finite()).then(|| "non-finite value".to_string()))?;

    let grid = spec.definiteness_grid();
    for &t in &grid {
        check_symmetry("N11", spec.n11.at(t))?;
        check_symmetry("N12", spec.n12.at(t))?;
        check_symmetry("N21", spec.n21.at(t))?;
        check_symmetry("N22", spec.n22.at(t))?;
    }

    let mut delta = f64::INFINITY;
    let mut worst: Option<(String, f64, f64)> = None;
    for &t in &grid {
        for (name, value) in [
            ("λ_min(N11)", min_eigenvalue(spec.n11.at(t))),
            ("λ_min(N11 + N12)", min_eigenvalue(&(spec.n11.at(t) + spec.n12.at(t)))),
            ("−λ_max(N21)", -max_eigenvalue(spec.n21.at(t))),
            ("−λ_max(N21 + N22)", -max_eigenvalue(&(spec.n21.at(t) + spec.n22.at(t)))),
        ] {
            if value < delta {
                delta = value;
                worst = Some((name.to_string(), t, value));
            }
        }
    }

    let mut report = ValidationReport {
        passed: delta > 0.0,
        sample_points: grid.len(),
        delta: Some(delta),
        ..Default::default()
    };
    if let Some((name, t, value)) = worst {
        if delta > 0.0 {
            report.messages.push(format!(
                "definiteness margin δ = {delta:.6e}, attained by {name} at t = {t:.6}"
            ));
        } else {
            report.messages.push(format!(
                "control cost matrices are not definite: {name} = {value:.6e} at t = {t:.6}; \
                 the convexity/concavity margin requires δ > 0"
            ));
        }
    }
    Ok(report)
}

/// Embed a validated linear-quadratic game into the general coefficient
/// form, with exact analytic derivatives for every coefficient.
pub fn lift_lq(spec: &LqSpec) -> Result<ProblemSpec> {
    let report = validate_lq(spec)?;
    if !report.passed {
        return Err(Error::Validation(format!(
            "control cost matrices lack a positive definiteness margin: {}",
            report.messages.join("; ")
        )));
    }

    let s = Arc::new(spec.clone());
    let n = spec.n;

    // One helper per linear dynamic coefficient: value Σ M_β(t)·arg_β and
    // Jacobian M_β(t), with the six matrices selected by field.
    type Pick = fn(&LqSpec) -> [&TimeMatrix; 6];
    let lift_linear = |pick: Pick| -> VectorCoeff {
        let sv = s.clone();
        let sj = s.clone();
        VectorCoeff::with_jacobian(
            n,
            move |args: &CoeffArgs<'_>| {
                let ms = pick(&sv);
                let mut acc = DVector::zeros(n);
                for (m, block) in ms.iter().zip(ArgBlock::ALL) {
                    let v = args.block(block);
                    acc.gemv(1.0, m.at(args.t), &v, 1.0);
                }
                acc
            },
            move |args: &CoeffArgs<'_>, block: ArgBlock| {
                let ms = pick(&sj);
                let idx = ArgBlock::ALL.iter().position(|b| *b == block).unwrap();
                ms[idx].at(args.t).clone()
            },
        )
    };

    let drift_b = lift_linear(|s| [&s.a1, &s.a2, &s.b11, &s.b12, &s.b21, &s.b22]);
    let diffusion_g = lift_linear(|s| [&s.c1, &s.c2, &s.d11, &s.d12, &s.d21, &s.d22]);
    let diffusion_g_tilde = lift_linear(|s| [&s.f1, &s.f2, &s.g11, &s.g12, &s.g21, &s.g22]);

    let observation_h = {
        let sv = s.clone();
        ScalarCoeff::with_gradient(
            move |args: &CoeffArgs<'_>| *sv.h.at(args.t),
            |args, block| DVector::zeros(args.block(block).len()),
        )
    };

    let running_cost = {
        let sv = s.clone();
        let sg = s.clone();
        ScalarCoeff::with_gradient(
            move |args: &CoeffArgs<'_>| {
                let t = args.t;
                sv.q.at(t).dot(&args.x)
                    + quad_form(sv.n11.at(t), &args.u1)
                    + quad_form(sv.n12.at(t), &args.u1_mean)
                    + quad_form(sv.n21.at(t), &args.u2)
                    + quad_form(sv.n22.at(t), &args.u2_mean)
            },
            move |args: &CoeffArgs<'_>, block: ArgBlock| {
                let t = args.t;
                match block {
                    ArgBlock::X => sg.q.at(t).clone(),
                    ArgBlock::XMean => DVector::zeros(sg.n),
                    // N symmetric, so ∇⟨N u, u⟩ = 2 N u.
                    ArgBlock::U1 => sg.n11.at(t) * args.u1 * 2.0,
                    ArgBlock::U1Mean => sg.n12.at(t) * args.u1_mean * 2.0,
                    ArgBlock::U2 => sg.n21.at(t) * args.u2 * 2.0,
                    ArgBlock::U2Mean => sg.n22.at(t) * args.u2_mean * 2.0,
                }
            },
        )
    };

    let terminal_cost = TerminalCost::linear(spec.m.clone(), DVector::zeros(n));

    Ok(ProblemSpec {
        n,
        k1: spec.k1,
        k2: spec.k2,
        horizon: spec.horizon,
        initial: spec.initial.clone(),
        drift_b,
        diffusion_g,
        diffusion_g_tilde,
        observation_h,
        running_cost,
        terminal_cost,
        control_bounds: [None, None],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::coeff::{ArgPoint, TerminalArgs};
    use crate::model::time::TimeDependent;
    use crate::model::validate::validate_problem;

    /// Scalar template with the minimal definite cost structure
    /// N11 = 1, N21 = −1.
    fn definite_scalar() -> LqSpec {
        let mut s = LqSpec::scalar_zeros(1.0, 1.0);
        s.n11 = TimeMatrix::scalar(1.0);
        s.n21 = TimeMatrix::scalar(-1.0);
        s
    }

    #[test]
    fn scalar_definite_instance_passes_with_delta_one() {
        let report = validate_lq(&definite_scalar()).unwrap();
        assert!(report.passed);
        assert_eq!(report.delta, Some(1.0));
    }

    #[test]
    fn aggregate_cost_sign_failure_is_reported() {
        let mut s = definite_scalar();
        s.n12 = TimeMatrix::scalar(-2.0); // N11 + N12 = −1, not positive
        let report = validate_lq(&s).unwrap();
        assert!(!report.passed);
        assert!(report.delta.unwrap() <= -1.0 + 1e-12);
    }

    #[test]
    fn delta_is_the_smallest_eigenvalue_margin() {
        // Oracle: the eigenvalues of a diagonal matrix are its diagonal,
        // so diag(2, 0.5) has margin 0.5.
        let mut s = LqSpec::zeros(1, 2, 1, 1.0, DVector::from_element(1, 0.0));
        s.n11 = TimeDependent::Constant(DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 0.5])));
        s.n21 = TimeMatrix::scalar(-1.0);
        let report = validate_lq(&s).unwrap();
        assert!(report.passed);
        assert!((report.delta.unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn asymmetric_control_cost_is_rejected() {
        let mut s = LqSpec::zeros(1, 2, 1, 1.0, DVector::from_element(1, 0.0));
        s.n11 = TimeDependent::Constant(DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]));
        s.n21 = TimeMatrix::scalar(-1.0);
        let err = validate_lq(&s).unwrap_err();
        assert!(err.to_string().contains("asymmetric"));
    }

    #[test]
    fn time_varying_cost_is_checked_at_table_knots() {
        let mut s = definite_scalar();
        // Sign failure confined to the window [0.9005, 0.902), narrower
        // than the uniform sampling resolution: only the knot times can
        // catch it.
        s.n11 = TimeDependent::Table {
            times: vec![0.0, 0.9005, 0.902],
            values: vec![
                DMatrix::from_element(1, 1, 1.0),
                DMatrix::from_element(1, 1, -0.25),
                DMatrix::from_element(1, 1, 1.0),
            ],
        };
        let report = validate_lq(&s).unwrap();
        assert!(!report.passed);
        assert!((report.delta.unwrap() + 0.25).abs() < 1e-14);
    }

    #[test]
    fn wrong_shape_is_rejected_by_name() {
        let mut s = definite_scalar();
        s.b11 = TimeMatrix::zeros(2, 1);
        let err = validate_lq(&s).unwrap_err();
        assert!(err.to_string().contains("B11"), "{err}");
    }

    #[test]
    fn lifted_zero_spec_evaluates_to_zero() {
        let mut s = LqSpec::scalar_zeros(1.0, 0.5);
        s.n11 = TimeMatrix::scalar(1.0);
        s.n21 = TimeMatrix::scalar(-1.0);
        let p = lift_lq(&s).unwrap();
        let mut point = ArgPoint::zeros(1, 1, 1, 0.3);
        point.x[0] = 2.0;
        point.u2[0] = 0.0;
        assert_eq!(p.drift_b.eval(&point.args())[0], 0.0);
        assert_eq!(p.diffusion_g.eval(&point.args())[0], 0.0);
        assert_eq!(p.diffusion_g_tilde.eval(&point.args())[0], 0.0);
        assert_eq!(p.observation_h.eval(&point.args()), 0.0);
        assert_eq!(
            p.terminal_cost.eval(&TerminalArgs::from_slices(&[3.0], &[1.0])),
            0.0
        );
    }

    #[test]
    fn lifted_drift_single_term() {
        let mut s = definite_scalar();
        s.a1 = TimeMatrix::scalar(1.0);
        let p = lift_lq(&s).unwrap();
        let mut point = ArgPoint::zeros(1, 1, 1, 0.0);
        point.x[0] = 2.0;
        assert_eq!(p.drift_b.eval(&point.args())[0], 2.0);
    }

    #[test]
    fn lifted_running_cost_hand_value() {
        // l = Q·x + N11·u1² = 3·1 + 1·4 = 7.
        let mut s = definite_scalar();
        s.q = TimeVector::scalar(3.0);
        let p = lift_lq(&s).unwrap();
        let mut point = ArgPoint::zeros(1, 1, 1, 0.0);
        point.x[0] = 1.0;
        point.u1[0] = 2.0;
        assert_eq!(p.running_cost.eval(&point.args()), 7.0);
    }

    #[test]
    fn lifted_gradients_match_finite_differences_tightly() {
        let mut s = definite_scalar();
        s.a1 = TimeMatrix::scalar(0.5);
        s.a2 = TimeMatrix::scalar(-0.2);
        s.b11 = TimeMatrix::scalar(1.0);
        s.b21 = TimeMatrix::scalar(0.8);
        s.c1 = TimeMatrix::scalar(0.2);
        s.d11 = TimeMatrix::scalar(0.5);
        s.f1 = TimeMatrix::scalar(0.3);
        s.g21 = TimeMatrix::scalar(0.4);
        s.n12 = TimeMatrix::scalar(0.25);
        s.n22 = TimeMatrix::scalar(-0.25);
        s.q = TimeVector::scalar(1.0);
        s.m = DVector::from_element(1, 1.0);
        s.h = TimeDependent::Constant(0.4);
        let p = lift_lq(&s).unwrap();
        let report = validate_problem(&p).unwrap();
        assert!(report.passed);
        assert!(report.max_gradient_error() < 1e-6, "{}", report.max_gradient_error());
    }

    #[test]
    fn lift_requires_the_definiteness_margin() {
        let s = LqSpec::scalar_zeros(1.0, 1.0);
        let err = lift_lq(&s).unwrap_err();
        assert!(err.to_string().contains("definiteness"), "{err}");
    }

    #[test]
    fn lift_is_pure() {
        let mut s = definite_scalar();
        s.q = TimeVector::scalar(2.0);
        s.b11 = TimeMatrix::scalar(1.0);
        let p1 = lift_lq(&s).unwrap();
        let p2 = lift_lq(&s).unwrap();
        let mut point = ArgPoint::zeros(1, 1, 1, 0.7);
        point.x[0] = -1.5;
        point.u1[0] = 0.25;
        point.u2[0] = 4.0;
        assert_eq!(p1.running_cost.eval(&point.args()), p2.running_cost.eval(&point.args()));
        assert_eq!(p1.drift_b.eval(&point.args()), p2.drift_b.eval(&point.args()));
    }

    #[test]
    fn helper_matrices_follow_their_definitions() {
        let mut s = definite_scalar();
        s.a1 = TimeMatrix::scalar(0.5);
        s.a2 = TimeMatrix::scalar(-0.2);
        s.f1 = TimeMatrix::scalar(0.3);
        s.f2 = TimeMatrix::scalar(0.1);
        s.h = TimeDependent::Constant(0.4);
        s.b11 = TimeMatrix::scalar(1.0);
        s.b12 = TimeMatrix::scalar(0.2);
        s.g11 = TimeMatrix::scalar(0.5);
        s.n12 = TimeMatrix::scalar(0.25);
        // (A1 + A2 − h(F1 + F2))ᵀ = 0.5 − 0.2 − 0.4·0.4 = 0.14
        assert!((s.adjoint_ode_matrix(0.0)[(0, 0)] - 0.14).abs() < 1e-15);
        // (B11 + B12 − h(G11 + G12))ᵀ = 1.2 − 0.4·0.5 = 1.0
        assert!((s.dual_weight(Player::One, 0.0)[(0, 0)] - 1.0).abs() < 1e-15);
        // N11 + N12 = 1.25
        assert!((s.control_weight(Player::One, 0.0)[(0, 0)] - 1.25).abs() < 1e-15);
    }
}
