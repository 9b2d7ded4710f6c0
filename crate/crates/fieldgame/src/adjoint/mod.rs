//! Adjoint-equation solvers for the strong formulation.
//!
//! The adjoint process of an admissible control pair solves the
//! mean-field backward SDE
//!
//! ```text
//! dp(t) = −[H_x(t) + E[H_y(t)]] dt + q(t) dW(t) + q~(t) dY(t),
//! p(T)  = m_x(x(T), E[x(T)]) + E[m_y(x(T), E[x(T)])],
//! ```
//!
//! with H the Hamiltonian and the subscripts denoting partial gradients
//! in the state and the state-mean arguments. Two solvers cover the two
//! regimes:
//!
//! * **Linear-quadratic** ([`solve_adjoint_lq`]): deterministic
//!   coefficients and a constant terminal vector M force q ≡ q~ ≡ 0 and
//!   make p deterministic with E[p] = p, so the BSDE collapses to the
//!   terminal-value linear ODE
//!   dp/dt = −[(A1 + A2 − h·(F1 + F2))ᵀ p + Q], p(T) = M, integrated
//!   backward with a classical 4th-order one-step method.
//! * **General coefficients** ([`solve_adjoint_general`]): backward
//!   least-squares Monte Carlo on a simulated ensemble. At each step the
//!   one-step conditional expectation of p(t_{k+1}) + driver·dt is
//!   projected onto basis functions of (x(t_k), Y(t_k)); the martingale
//!   integrands are estimated by projecting p(t_{k+1})·ΔW_k/dt and
//!   p(t_{k+1})·ΔY_k/dt onto the same basis. The driver uses the
//!   step-(k+1) adjoint estimates (explicit backward Euler), so no
//!   implicit solve is needed; the increment projections for q, q~ carry
//!   an O(dt) bias, acceptable because they enter verification only
//!   through residual magnitudes.

pub mod hamiltonian;
pub mod regression;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

pub use hamiltonian::{hamiltonian, hamiltonian_gradient};
pub use regression::{BasisSpec, StepDiagnostics};

use crate::error::{Error, Result};
use crate::model::coeff::{ArgBlock, CoeffArgs, ProblemSpec, TerminalArgs};
use crate::model::control::ControlProcess;
use crate::model::lq::LqSpec;
use crate::simulate::{GridConfig, TrajectoryBundle};

/// Adjoint triple (p, q, q~) on the time grid. Per-particle in general;
/// under the deterministic reduction a single path with q ≡ q~ ≡ 0.
/// Storage is row-major by step, like the trajectory bundle.
#[derive(Clone, Debug)]
pub struct AdjointSolution {
    pub times: Vec<f64>,
    pub n: usize,
    /// 1 under the deterministic reduction.
    pub particle_count: usize,
    pub deterministic_reduction: bool,
    /// p(t_k) per particle, length (K+1)·particle_count·n.
    pub p: Vec<f64>,
    /// Martingale integrand against W, same layout; zero when reduced.
    pub q: Vec<f64>,
    /// Martingale integrand against Y, same layout; zero when reduced.
    pub q_tilde: Vec<f64>,
    /// Ensemble mean of p at each step, length (K+1)·n.
    pub p_mean: Vec<f64>,
    /// Regression conditioning per step (empty for the ODE solver).
    pub diagnostics: Vec<StepDiagnostics>,
}

impl AdjointSolution {
    pub fn step_count(&self) -> usize {
        self.times.len() - 1
    }

    pub fn p_at(&self, k: usize, i: usize) -> &[f64] {
        let base = (k * self.particle_count + i) * self.n;
        &self.p[base..base + self.n]
    }

    pub fn q_at(&self, k: usize, i: usize) -> &[f64] {
        let base = (k * self.particle_count + i) * self.n;
        &self.q[base..base + self.n]
    }

    pub fn q_tilde_at(&self, k: usize, i: usize) -> &[f64] {
        let base = (k * self.particle_count + i) * self.n;
        &self.q_tilde[base..base + self.n]
    }

    pub fn p_mean_at(&self, k: usize) -> &[f64] {
        &self.p_mean[k * self.n..(k + 1) * self.n]
    }
}

/// Solve the linear-quadratic adjoint ODE backward on the grid.
///
/// The reduction is justified, not assumed: deterministic coefficients
/// and terminal vector make (p, 0, 0) the unique solution of the BSDE,
/// and the test battery checks the discrete residual of that claim.
pub fn solve_adjoint_lq(spec: &LqSpec, grid: &GridConfig) -> Result<AdjointSolution> {
    crate::model::lq::validate_lq(spec)?;
    grid.validate(spec.horizon)?;
    let n = spec.n;
    let kk = grid.step_count;
    let times = grid.times(spec.horizon);
    let dt = grid.dt(spec.horizon);

    // dp/dt = f(t, p) = −[K(t)ᵀ p + Q(t)], integrated from T down to 0
    // with the classical Runge–Kutta scheme and step −dt.
    let f = |t: f64, p: &DVector<f64>| -> DVector<f64> {
        let mut out = spec.q.at(t).clone();
        out.gemv(1.0, &spec.adjoint_ode_matrix(t), p, 1.0);
        -out
    };

    let mut p_flat = vec![0.0; (kk + 1) * n];
    let mut p = spec.m.clone();
    p_flat[kk * n..].copy_from_slice(p.as_slice());
    let s = -dt;
    for k in (0..kk).rev() {
        let t = times[k + 1];
        let k1 = f(t, &p);
        let k2 = f(t + 0.5 * s, &(&p + &k1 * (0.5 * s)));
        let k3 = f(t + 0.5 * s, &(&p + &k2 * (0.5 * s)));
        let k4 = f(t + s, &(&p + &k3 * s));
        p += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (s / 6.0);
        if !p.iter().all(|v| v.is_finite()) {
            return Err(Error::Numerical(format!(
                "adjoint integration produced a non-finite value at step {k}"
            )));
        }
        p_flat[k * n..(k + 1) * n].copy_from_slice(p.as_slice());
    }

    Ok(AdjointSolution {
        times,
        n,
        particle_count: 1,
        deterministic_reduction: true,
        p: p_flat.clone(),
        q: vec![0.0; (kk + 1) * n],
        q_tilde: vec![0.0; (kk + 1) * n],
        p_mean: p_flat,
        diagnostics: Vec::new(),
    })
}

/// Solve the adjoint BSDE on a simulated ensemble by backward
/// least-squares regression.
pub fn solve_adjoint_general(
    problem: &ProblemSpec,
    controls: (&ControlProcess, &ControlProcess),
    bundle: &TrajectoryBundle,
    basis: &BasisSpec,
) -> Result<AdjointSolution> {
    let (n, count) = (problem.n, bundle.particle_count);
    if bundle.n != n || bundle.k1 != problem.k1 || bundle.k2 != problem.k2 {
        return Err(Error::Dimension("bundle dimensions do not match the problem".into()));
    }
    if !problem.terminal_cost.has_gradients() {
        return Err(Error::Input(
            "terminal cost gradients are required by the adjoint solver".into(),
        ));
    }
    let kk = bundle.step_count();
    let dt = bundle.dt();
    let (k1, k2) = (problem.k1, problem.k2);
    let eval = basis.evaluator(n);
    let width = eval.column_count();

    let mut p = vec![0.0; (kk + 1) * count * n];
    let mut q = vec![0.0; (kk + 1) * count * n];
    let mut q_tilde = vec![0.0; (kk + 1) * count * n];
    let mut p_mean = vec![0.0; (kk + 1) * n];
    let mut diagnostics = Vec::with_capacity(kk);

    // Terminal assignment: p_i(T) = m_x(x_i, x̄) + mean_j m_y(x_j, x̄).
    {
        let x_end = bundle.state_row(kk);
        let xm = bundle.x_mean_at(kk);
        let mut grad_y_mean = DVector::zeros(n);
        for i in 0..count {
            let args = TerminalArgs::from_slices(&x_end[i * n..(i + 1) * n], xm);
            grad_y_mean += problem.terminal_cost.grad_x_mean(&args).expect("checked above");
        }
        grad_y_mean /= count as f64;
        let terminal_rows = &mut p[kk * count * n..];
        terminal_rows
            .par_chunks_mut(n)
            .enumerate()
            .for_each(|(i, row)| {
                let args = TerminalArgs::from_slices(&x_end[i * n..(i + 1) * n], xm);
                let g = problem.terminal_cost.grad_x(&args).expect("checked above") + &grad_y_mean;
                row.copy_from_slice(g.as_slice());
            });
    }
    column_mean(&p[kk * count * n..], n, &mut p_mean[kk * n..]);

    let mut u1_row = vec![0.0; count * k1];
    let mut u2_row = vec![0.0; count * k2];
    let mut u1_mean = vec![0.0; k1];
    let mut u2_mean = vec![0.0; k2];
    let mut hx = vec![0.0; count * n];
    let mut hy = vec![0.0; count * n];

    for k in (0..kk).rev() {
        // Driver pieces at step k+1 with the step-(k+1) adjoint
        // estimates (explicit backward Euler).
        let t_next = bundle.times[k + 1];
        controls.0.eval_step(t_next, bundle.y_row(k + 1), &mut u1_row);
        controls.1.eval_step(t_next, bundle.y_row(k + 1), &mut u2_row);
        column_mean(&u1_row, k1, &mut u1_mean);
        column_mean(&u2_row, k2, &mut u2_mean);
        let x_next = bundle.state_row(k + 1);
        let xm_next = bundle.x_mean_at(k + 1);
        let p_next = &p[(k + 1) * count * n..(k + 2) * count * n];
        let q_next = &q[(k + 1) * count * n..(k + 2) * count * n];
        let qt_next = &q_tilde[(k + 1) * count * n..(k + 2) * count * n];
        let (u1_ref, u2_ref, u1m, u2m) = (&u1_row, &u2_row, &u1_mean, &u2_mean);

        hx.par_chunks_mut(n)
            .zip(hy.par_chunks_mut(n))
            .enumerate()
            .try_for_each(|(i, (hx_i, hy_i))| -> Result<()> {
                let args = CoeffArgs::from_slices(
                    t_next,
                    &x_next[i * n..(i + 1) * n],
                    xm_next,
                    &u1_ref[i * k1..(i + 1) * k1],
                    u1m,
                    &u2_ref[i * k2..(i + 1) * k2],
                    u2m,
                );
                let p_i = DVector::from_column_slice(&p_next[i * n..(i + 1) * n]);
                let q_i = DVector::from_column_slice(&q_next[i * n..(i + 1) * n]);
                let qt_i = DVector::from_column_slice(&qt_next[i * n..(i + 1) * n]);
                let gx = hamiltonian_gradient(problem, &args, &p_i, &q_i, &qt_i, ArgBlock::X)?;
                let gy = hamiltonian_gradient(problem, &args, &p_i, &q_i, &qt_i, ArgBlock::XMean)?;
                hx_i.copy_from_slice(gx.as_slice());
                hy_i.copy_from_slice(gy.as_slice());
                Ok(())
            })?;
        let mut hy_mean = vec![0.0; n];
        column_mean(&hy, n, &mut hy_mean);

        // Regressands: conditional-expectation targets for p and the
        // increment projections for the martingale integrands.
        let mut targets = DMatrix::zeros(count, 3 * n);
        let w_row = &bundle.w_increments[k * count..(k + 1) * count];
        let y_row = &bundle.y_increments[k * count..(k + 1) * count];
        for i in 0..count {
            for c in 0..n {
                let pv = p_next[i * n + c];
                let drive = pv + (hx[i * n + c] + hy_mean[c]) * dt;
                if !drive.is_finite() {
                    return Err(Error::Numerical(format!(
                        "non-finite adjoint driver at step {k}, particle {i}"
                    )));
                }
                targets[(i, c)] = drive;
                targets[(i, n + c)] = pv * w_row[i] / dt;
                targets[(i, 2 * n + c)] = pv * y_row[i] / dt;
            }
        }

        // Features at step k.
        let x_now = bundle.state_row(k);
        let y_now = bundle.y_row(k);
        let mut design = DMatrix::zeros(count, width);
        let mut row = vec![0.0; width];
        for i in 0..count {
            eval.fill_row(&x_now[i * n..(i + 1) * n], y_now[i], &mut row);
            design.row_mut(i).copy_from_slice(&row);
        }

        let (fitted, diag) = regression::fit(&design, &targets, k)?;
        diagnostics.push(diag);
        for i in 0..count {
            for c in 0..n {
                p[(k * count + i) * n + c] = fitted[(i, c)];
                q[(k * count + i) * n + c] = fitted[(i, n + c)];
                q_tilde[(k * count + i) * n + c] = fitted[(i, 2 * n + c)];
            }
        }
        column_mean(&p[k * count * n..(k + 1) * count * n], n, &mut p_mean[k * n..(k + 1) * n]);
    }

    diagnostics.reverse();
    Ok(AdjointSolution {
        times: bundle.times.clone(),
        n,
        particle_count: count,
        deterministic_reduction: false,
        p,
        q,
        q_tilde,
        p_mean,
        diagnostics,
    })
}

/// Mean over particles of a particle-major row of `width`-vectors, in
/// particle-id order.
fn column_mean(row: &[f64], width: usize, out: &mut [f64]) {
    out.fill(0.0);
    if width == 0 {
        return;
    }
    let count = row.len() / width;
    for chunk in row.chunks_exact(width) {
        for (o, v) in out.iter_mut().zip(chunk) {
            *o += v;
        }
    }
    for o in out.iter_mut() {
        *o /= count as f64;
    }
}
