//! The Hamiltonian of the game and its analytic partial gradients.
//!
//! With adjoint variables (p, q, q̃) the Hamiltonian reads
//!
//! ```text
//! H(t, x, E[x], u1, E[u1], u2, E[u2], p, q, q̃)
//!     = ⟨p, b − g~·h⟩ + ⟨q, g⟩ + ⟨q~, g~⟩ + l,
//! ```
//!
//! all coefficients evaluated at the same argument tuple. H is affine in
//! (p, q, q̃) with offset l, and its partial gradients with respect to
//! any argument block β (state, state mean, either control, either
//! control mean) follow by the product rule:
//!
//! ```text
//! H_β = J_b^βᵀ p − h·J_{g~}^βᵀ p − ⟨p, g~⟩·∇_β h
//!       + J_g^βᵀ q + J_{g~}^βᵀ q~ + ∇_β l.
//! ```
//!
//! These partials are the raw material of the optimality verification:
//! the adjoint BSDE driver uses H_x and H_{E[x]}, and the stationarity
//! residuals use the control-block gradients.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::model::coeff::{ArgBlock, CoeffArgs, ProblemSpec};

fn check_dims(
    problem: &ProblemSpec,
    p: &DVector<f64>,
    q: &DVector<f64>,
    q_tilde: &DVector<f64>,
) -> Result<()> {
    for (name, v) in [("p", p), ("q", q), ("q_tilde", q_tilde)] {
        if v.len() != problem.n {
            return Err(Error::Dimension(format!(
                "adjoint variable {name} has length {}, expected the state dimension {}",
                v.len(),
                problem.n
            )));
        }
    }
    Ok(())
}

/// Evaluate H at one argument tuple.
pub fn hamiltonian(
    problem: &ProblemSpec,
    args: &CoeffArgs<'_>,
    p: &DVector<f64>,
    q: &DVector<f64>,
    q_tilde: &DVector<f64>,
) -> Result<f64> {
    check_dims(problem, p, q, q_tilde)?;
    let b = problem.drift_b.eval(args);
    let g = problem.diffusion_g.eval(args);
    let gt = problem.diffusion_g_tilde.eval(args);
    let h = problem.observation_h.eval(args);
    let l = problem.running_cost.eval(args);
    Ok(p.dot(&b) - h * p.dot(&gt) + q.dot(&g) + q_tilde.dot(&gt) + l)
}

fn missing(kind: &str, block: ArgBlock) -> Error {
    Error::Input(format!(
        "analytic {kind} with respect to {block} is unavailable; \
         Hamiltonian gradients need every coefficient derivative"
    ))
}

/// Analytic partial gradient of H with respect to one argument block.
pub fn hamiltonian_gradient(
    problem: &ProblemSpec,
    args: &CoeffArgs<'_>,
    p: &DVector<f64>,
    q: &DVector<f64>,
    q_tilde: &DVector<f64>,
    block: ArgBlock,
) -> Result<DVector<f64>> {
    check_dims(problem, p, q, q_tilde)?;
    let jb = problem
        .drift_b
        .jacobian(args, block)
        .ok_or_else(|| missing("drift jacobian", block))?;
    let jg = problem
        .diffusion_g
        .jacobian(args, block)
        .ok_or_else(|| missing("diffusion jacobian", block))?;
    let jgt = problem
        .diffusion_g_tilde
        .jacobian(args, block)
        .ok_or_else(|| missing("observation-diffusion jacobian", block))?;
    let grad_h = problem
        .observation_h
        .gradient(args, block)
        .ok_or_else(|| missing("observation-drift gradient", block))?;
    let grad_l = problem
        .running_cost
        .gradient(args, block)
        .ok_or_else(|| missing("running-cost gradient", block))?;

    let h = problem.observation_h.eval(args);
    let gt = problem.diffusion_g_tilde.eval(args);
    let p_dot_gt = p.dot(&gt);

    let mut out = grad_l;
    out.gemv_tr(1.0, &jb, p, 1.0);
    out.gemv_tr(-h, &jgt, p, 1.0);
    out.axpy(-p_dot_gt, &grad_h, 1.0);
    out.gemv_tr(1.0, &jg, q, 1.0);
    out.gemv_tr(1.0, &jgt, q_tilde, 1.0);
    Ok(out)
}
