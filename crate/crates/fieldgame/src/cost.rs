//! Monte Carlo evaluation of the game payoff in both formulations.
//!
//! The strong form keeps the reference measure and no weight:
//!
//! ```text
//! J = E[ ∫₀ᵀ l(t, x, E[x], u1, E[u1], u2, E[u2]) dt + m(x(T), E[x(T)]) ],
//! ```
//!
//! while the weak form carries the Girsanov density Z as an explicit
//! weight (Bayes' formula), with the running integrand weighted by Z at
//! its own evaluation time and the terminal cost by Z(T):
//!
//! ```text
//! J = E[ ∫₀ᵀ Z(t)·l(...) dt + Z(T)·m(...) ].
//! ```
//!
//! Both estimators use left-endpoint quadrature for the running
//! integral, matching the order of the Euler state discretization;
//! higher-order quadrature would exceed the path accuracy. Mean-field
//! arguments are the same-ensemble empirical means the simulation used,
//! so estimates inherit the O(1/N) interaction bias of the particle
//! scheme; the reported standard error is the independent-sample
//! estimate and does not fold that bias in. All reductions over the
//! particle axis run in particle-id order, so estimates are bit-stable
//! under any worker partitioning.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::coeff::{CoeffArgs, ProblemSpec, TerminalArgs};
use crate::model::control::ControlProcess;
use crate::simulate::{simulate_forward, simulate_with_density, GridConfig, TrajectoryBundle};

/// Which payoff functional to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Formulation {
    /// Expectation under the reference measure, no density weight.
    Strong,
    /// Density-weighted expectation (the measure change carried as a
    /// cost weight).
    Weak,
}

impl Formulation {
    pub fn label(&self) -> &'static str {
        match self {
            Formulation::Strong => "strong",
            Formulation::Weak => "weak",
        }
    }
}

/// A Monte Carlo payoff estimate with its sampling error and the
/// running/terminal split. `value` is `running + terminal` by
/// construction (a single addition, exact).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostEstimate {
    pub value: f64,
    pub standard_error: f64,
    pub particle_count: usize,
    pub running: f64,
    pub terminal: f64,
}

/// A cost estimate together with each particle's total payoff
/// (running + terminal). Paired-difference tests under common random
/// numbers subtract these arrays particle by particle, which cancels
/// most of the Monte Carlo variance.
#[derive(Clone, Debug)]
pub struct CostSample {
    pub estimate: CostEstimate,
    pub per_particle: Vec<f64>,
}

/// Evaluate the payoff on an already-simulated bundle. The weak
/// formulation requires the bundle's density pass to have run.
pub fn cost_on_bundle(
    problem: &ProblemSpec,
    controls: (&ControlProcess, &ControlProcess),
    bundle: &TrajectoryBundle,
    formulation: Formulation,
) -> Result<CostSample> {
    if formulation == Formulation::Weak && !bundle.density_filled {
        return Err(Error::Input(
            "weak cost needs density paths; run simulate_density first".into(),
        ));
    }
    let count = bundle.particle_count;
    let (n, k1, k2) = (bundle.n, bundle.k1, bundle.k2);
    if n != problem.n || k1 != problem.k1 || k2 != problem.k2 {
        return Err(Error::Dimension("bundle dimensions do not match the problem".into()));
    }
    let kk = bundle.step_count();
    let dt = bundle.dt();
    let weighted = formulation == Formulation::Weak;

    let mut running_totals = vec![0.0_f64; count];
    let mut u1_row = vec![0.0; count * k1];
    let mut u2_row = vec![0.0; count * k2];

    for k in 0..kk {
        let t = bundle.times[k];
        bundle.controls_at_step(controls, k, &mut u1_row, &mut u2_row);
        let x_row = bundle.state_row(k);
        let z_row = bundle.z_row(k);
        let xm = bundle.x_mean_at(k);
        let u1m = bundle.u_mean_at(crate::model::Player::One, k);
        let u2m = bundle.u_mean_at(crate::model::Player::Two, k);
        let (u1_ref, u2_ref) = (&u1_row, &u2_row);

        running_totals
            .par_iter_mut()
            .enumerate()
            .try_for_each(|(i, total)| -> Result<()> {
                let args = CoeffArgs::from_slices(
                    t,
                    &x_row[i * n..(i + 1) * n],
                    xm,
                    &u1_ref[i * k1..(i + 1) * k1],
                    u1m,
                    &u2_ref[i * k2..(i + 1) * k2],
                    u2m,
                );
                let l = problem.running_cost.eval(&args);
                if !l.is_finite() {
                    return Err(Error::Numerical(format!(
                        "non-finite running cost at step {k}, particle {i}"
                    )));
                }
                let contribution = l * dt;
                *total += if weighted { contribution * z_row[i] } else { contribution };
                Ok(())
            })?;
    }

    let x_end = bundle.state_row(kk);
    let xm_end = bundle.x_mean_at(kk);
    let z_end = bundle.z_row(kk);
    let terminal_totals: Vec<f64> = (0..count)
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let args = TerminalArgs::from_slices(&x_end[i * n..(i + 1) * n], xm_end);
            let m = problem.terminal_cost.eval(&args);
            if !m.is_finite() {
                return Err(Error::Numerical(format!("non-finite terminal cost at particle {i}")));
            }
            Ok(if weighted { m * z_end[i] } else { m })
        })
        .collect::<Result<Vec<f64>>>()?;

    // Sequential particle-order reductions: the determinism contract.
    let nf = count as f64;
    let running = running_totals.iter().sum::<f64>() / nf;
    let terminal = terminal_totals.iter().sum::<f64>() / nf;
    let per_particle: Vec<f64> = running_totals
        .iter()
        .zip(&terminal_totals)
        .map(|(r, m)| r + m)
        .collect();
    let mean = per_particle.iter().sum::<f64>() / nf;
    let var = per_particle.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let standard_error = (var / nf).sqrt();

    Ok(CostSample {
        estimate: CostEstimate {
            value: running + terminal,
            standard_error,
            particle_count: count,
            running,
            terminal,
        },
        per_particle,
    })
}

/// Simulate and evaluate, keeping the per-particle payoff totals.
pub fn cost_detailed(
    problem: &ProblemSpec,
    controls: (&ControlProcess, &ControlProcess),
    grid: &GridConfig,
    formulation: Formulation,
) -> Result<CostSample> {
    let bundle = match formulation {
        Formulation::Strong => simulate_forward(problem, controls, grid)?,
        Formulation::Weak => simulate_with_density(problem, controls, grid)?,
    };
    cost_on_bundle(problem, controls, &bundle, formulation)
}

/// Payoff under the reference measure with no density weight.
pub fn cost_strong(
    problem: &ProblemSpec,
    controls: (&ControlProcess, &ControlProcess),
    grid: &GridConfig,
) -> Result<CostEstimate> {
    Ok(cost_detailed(problem, controls, grid, Formulation::Strong)?.estimate)
}

/// Density-weighted payoff: the running integrand at t_k is weighted by
/// Z(t_k) and the terminal cost by Z(T).
pub fn cost_weak(
    problem: &ProblemSpec,
    controls: (&ControlProcess, &ControlProcess),
    grid: &GridConfig,
) -> Result<CostEstimate> {
    Ok(cost_detailed(problem, controls, grid, Formulation::Weak)?.estimate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::coeff::{ArgBlock, ScalarCoeff, TerminalCost, VectorCoeff};
    use crate::model::control::Player;
    use nalgebra::{DMatrix, DVector};

    fn zero_controls(k1: usize, k2: usize) -> (ControlProcess, ControlProcess) {
        (
            ControlProcess::zero(Player::One, k1),
            ControlProcess::zero(Player::Two, k2),
        )
    }

    #[test]
    fn pure_terminal_cost_of_frozen_state_is_exact() {
        // l ≡ 0, m = ⟨M, x⟩, all dynamics zero: every particle pays
        // ⟨M, a⟩, so the estimate is exact with zero standard error.
        let a = DVector::from_vec(vec![2.0, -1.0]);
        let m = DVector::from_vec(vec![3.0, 5.0]);
        let mut problem = ProblemSpec::zeros(2, 1, 1, 1.0, a);
        problem.terminal_cost = TerminalCost::linear(m, DVector::zeros(2));
        let (u1, u2) = zero_controls(1, 1);
        let est = cost_strong(&problem, (&u1, &u2), &GridConfig::new(10, 16, 7)).unwrap();
        assert_eq!(est.value, 2.0 * 3.0 + (-1.0) * 5.0);
        assert_eq!(est.standard_error, 0.0);
        assert_eq!(est.terminal, est.value);
        assert_eq!(est.running, 0.0);
    }

    #[test]
    fn deterministic_quadratic_control_cost_is_exact() {
        // l = |u1|², u1 ≡ c: the integrand is the constant c², and with
        // dt = 1/16 every partial product is exact in binary, so the
        // quadrature sums to c²·T with no rounding at all.
        let c = 1.5;
        let mut problem = ProblemSpec::zeros(1, 1, 1, 1.0, DVector::zeros(1));
        problem.running_cost =
            ScalarCoeff::bilinear(ArgBlock::U1, ArgBlock::U1, DMatrix::identity(1, 1));
        let u1 = ControlProcess::constant(Player::One, DVector::from_element(1, c));
        let u2 = ControlProcess::zero(Player::Two, 1);
        let est = cost_strong(&problem, (&u1, &u2), &GridConfig::new(16, 8, 3)).unwrap();
        assert_eq!(est.value, c * c);
        assert_eq!(est.standard_error, 0.0);
    }

    #[test]
    fn driftless_state_cost_integral_matches_horizon() {
        // l = x, dx = dW, a = 1: E[x(t)] = 1 for all t, so J = T = 1.
        let mut problem = ProblemSpec::zeros(1, 1, 1, 1.0, DVector::from_element(1, 1.0));
        problem.diffusion_g = VectorCoeff::constant(DVector::from_element(1, 1.0));
        problem.running_cost =
            ScalarCoeff::linear(0.0, vec![(ArgBlock::X, DVector::from_element(1, 1.0))]);
        let (u1, u2) = zero_controls(1, 1);
        let est = cost_strong(&problem, (&u1, &u2), &GridConfig::new(100, 4000, 11)).unwrap();
        assert!(
            (est.value - 1.0).abs() < 3.0 * est.standard_error.max(1e-4),
            "J = {} ± {}",
            est.value,
            est.standard_error
        );
    }

    fn noisy_problem(h_level: f64) -> ProblemSpec {
        let mut problem = ProblemSpec::zeros(1, 1, 1, 1.0, DVector::from_element(1, 0.5));
        problem.drift_b = VectorCoeff::linear(1, vec![(ArgBlock::X, DMatrix::from_element(1, 1, -0.3))]);
        problem.diffusion_g = VectorCoeff::constant(DVector::from_element(1, 0.7));
        problem.diffusion_g_tilde = VectorCoeff::constant(DVector::from_element(1, 0.4));
        problem.observation_h = ScalarCoeff::constant(h_level);
        problem.running_cost = ScalarCoeff::bilinear(ArgBlock::X, ArgBlock::X, DMatrix::identity(1, 1));
        problem.terminal_cost = TerminalCost::linear(
            DVector::from_element(1, 2.0),
            DVector::from_element(1, 0.5),
        );
        problem
    }

    #[test]
    fn weak_equals_strong_bitwise_when_h_vanishes() {
        let problem = noisy_problem(0.0);
        let (u1, u2) = zero_controls(1, 1);
        let grid = GridConfig::new(50, 300, 123);
        let strong = cost_detailed(&problem, (&u1, &u2), &grid, Formulation::Strong).unwrap();
        let weak = cost_detailed(&problem, (&u1, &u2), &grid, Formulation::Weak).unwrap();
        assert_eq!(strong.estimate.value, weak.estimate.value);
        assert_eq!(strong.estimate.running, weak.estimate.running);
        assert_eq!(strong.estimate.terminal, weak.estimate.terminal);
        assert_eq!(strong.per_particle, weak.per_particle);
    }

    #[test]
    fn weak_unit_running_cost_recovers_the_horizon() {
        // l ≡ 1, m ≡ 0, h ≡ 0.5: E[Z(t)] = 1 at every t, so the weak
        // cost is ∫₀ᵀ E[Z] dt = T.
        let mut problem = noisy_problem(0.5);
        problem.running_cost = ScalarCoeff::constant(1.0);
        problem.terminal_cost = TerminalCost::zero(1);
        let (u1, u2) = zero_controls(1, 1);
        let est = cost_weak(&problem, (&u1, &u2), &GridConfig::new(100, 4000, 9)).unwrap();
        assert!(
            (est.value - 1.0).abs() < 3.0 * est.standard_error,
            "J = {} ± {}",
            est.value,
            est.standard_error
        );
    }

    #[test]
    fn weak_unit_terminal_cost_recovers_one() {
        // l ≡ 0, m ≡ 1, h ≡ c: J = E[Z(T)] = 1.
        let mut problem = noisy_problem(0.8);
        problem.running_cost = ScalarCoeff::zero();
        problem.terminal_cost = TerminalCost::constant(1.0, 1);
        let (u1, u2) = zero_controls(1, 1);
        let est = cost_weak(&problem, (&u1, &u2), &GridConfig::new(100, 4000, 9)).unwrap();
        assert!(
            (est.value - 1.0).abs() < 3.0 * est.standard_error,
            "J = {} ± {}",
            est.value,
            est.standard_error
        );
    }

    #[test]
    fn running_cost_is_additive_across_integrands() {
        // Same dynamics and seed: J(l1 + l2) = J(l1) + J(l2) up to
        // floating-point roundoff in the quadrature.
        let base = noisy_problem(0.3);
        let l1 = ScalarCoeff::bilinear(ArgBlock::X, ArgBlock::X, DMatrix::identity(1, 1));
        let l2 = ScalarCoeff::linear(0.25, vec![(ArgBlock::X, DVector::from_element(1, -0.7))]);
        let (u1, u2) = zero_controls(1, 1);
        let grid = GridConfig::new(80, 500, 17);

        let mut pa = base.clone();
        pa.running_cost = l1.clone();
        pa.terminal_cost = TerminalCost::zero(1);
        let mut pb = base.clone();
        pb.running_cost = l2.clone();
        pb.terminal_cost = TerminalCost::zero(1);
        let mut pc = base.clone();
        pc.running_cost = ScalarCoeff::from_fn(move |args| l1.eval(args) + l2.eval(args));
        pc.terminal_cost = TerminalCost::zero(1);

        let ja = cost_strong(&pa, (&u1, &u2), &grid).unwrap().value;
        let jb = cost_strong(&pb, (&u1, &u2), &grid).unwrap().value;
        let jc = cost_strong(&pc, (&u1, &u2), &grid).unwrap().value;
        assert!((jc - (ja + jb)).abs() < 1e-12 * (1.0 + jc.abs()), "{jc} vs {}", ja + jb);
    }

    #[test]
    fn standard_error_scales_like_inverse_sqrt_n() {
        let problem = noisy_problem(0.0);
        let (u1, u2) = zero_controls(1, 1);
        let se = |n: usize| {
            cost_strong(&problem, (&u1, &u2), &GridConfig::new(40, n, 5))
                .unwrap()
                .standard_error
        };
        let ratio = se(1000) / se(4000);
        assert!((ratio - 2.0).abs() < 0.4, "ratio {ratio}");
    }

    #[test]
    fn estimates_are_bit_identical_across_worker_partitionings() {
        let problem = noisy_problem(0.6);
        let (u1, u2) = zero_controls(1, 1);
        let grid = GridConfig::new(40, 400, 21);
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| cost_detailed(&problem, (&u1, &u2), &grid, Formulation::Weak).unwrap())
        };
        let a = run(1);
        let b = run(3);
        assert_eq!(a.estimate.value, b.estimate.value);
        assert_eq!(a.estimate.standard_error, b.estimate.standard_error);
        assert_eq!(a.per_particle, b.per_particle);
    }

    #[test]
    fn weak_cost_requires_a_density_pass() {
        let problem = noisy_problem(0.5);
        let (u1, u2) = zero_controls(1, 1);
        let bundle = simulate_forward(&problem, (&u1, &u2), &GridConfig::new(10, 8, 1)).unwrap();
        let err = cost_on_bundle(&problem, (&u1, &u2), &bundle, Formulation::Weak).unwrap_err();
        assert!(err.to_string().contains("density"), "{err}");
    }
}
