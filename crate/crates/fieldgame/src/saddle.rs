//! Saddle-control synthesis and Monte Carlo optimality verification.
//!
//! For the linear-quadratic game the maximum-principle stationarity
//! system collapses to a deterministic linear equation per time: with
//! q ≡ q~ ≡ 0 and p deterministic, the open-loop saddle candidate is
//!
//! ```text
//! 2(N_{i1} + N_{i2})·ū_i(t) = −(B_{i1} + B_{i2} − h(t)(G_{i1} + G_{i2}))ᵀ p(t),
//! ```
//!
//! solved by a definite linear solve per grid time (player 1's weight is
//! positive definite, player 2's negative definite, by the validated
//! margin). Verification then works on any problem, not just LQ:
//!
//! * **Stationarity residuals** evaluate the first-order conditions
//!   ‖E[H_{u_i}|F^Y_t] + E[H_{v_i}]‖ on a simulated ensemble, where the
//!   subscripts are the own-control and control-mean gradient blocks.
//!   With box-constrained controls the reported quantity is the
//!   projected-gradient residual ‖u − Π(u − G)‖, which vanishes exactly
//!   at a variational-inequality point.
//! * **Saddle inequalities** J(ū1, u2) ≤ J(ū1, ū2) ≤ J(u1, ū2) are
//!   tested by unilateral perturbations under common random numbers:
//!   paired per-particle cost differences cancel most of the Monte Carlo
//!   variance, and a check passes when the paired difference respects
//!   the inequality within two paired standard errors.
//! * **Convexity structure**: midpoint convexity along random control
//!   directions for player 1 (concavity for player 2), and the
//!   coercivity of the cost — J(λu1)/λ² tends to a positive limit and
//!   J(·, λu2)/λ² to a negative one — via exact quadratic divided
//!   differences in the scale λ.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::adjoint::{hamiltonian_gradient, solve_adjoint_general, AdjointSolution, BasisSpec};
use crate::cost::{cost_detailed, CostEstimate, CostSample, Formulation};
use crate::error::{Error, Result};
use crate::model::coeff::{ArgBlock, CoeffArgs, ProblemSpec};
use crate::model::control::{ControlProcess, Player};
use crate::model::lq::LqSpec;
use crate::simulate::{rng, simulate_forward, GridConfig};

/// Synthesize the open-loop saddle candidate from the deterministic
/// adjoint path.
pub fn lq_saddle_controls(
    spec: &LqSpec,
    adj: &AdjointSolution,
) -> Result<(ControlProcess, ControlProcess)> {
    if !adj.deterministic_reduction {
        return Err(Error::Input(
            "saddle synthesis needs the deterministic adjoint reduction; \
             solve the adjoint with the linear-quadratic solver"
                .into(),
        ));
    }
    if adj.n != spec.n {
        return Err(Error::Dimension("adjoint dimension does not match the problem".into()));
    }
    let kk = adj.step_count();
    let times: Vec<f64> = adj.times[..kk].to_vec();
    let mut u1 = Vec::with_capacity(kk);
    let mut u2 = Vec::with_capacity(kk);
    for (k, &t) in times.iter().enumerate() {
        let p = DVector::from_column_slice(adj.p_at(k, 0));
        for player in [Player::One, Player::Two] {
            // Player 1 solves a positive-definite system; player 2's
            // weight is negative definite, so negate both sides before
            // the Cholesky factorization.
            let sign = match player {
                Player::One => 1.0,
                Player::Two => -1.0,
            };
            let weight = spec.control_weight(player, t) * (2.0 * sign);
            let rhs = spec.dual_weight(player, t) * &p * (-sign);
            let chol = Cholesky::new(weight).ok_or_else(|| {
                Error::Numerical(format!(
                    "control weight for player {} at t = {t} is not definite; \
                     validate the problem before synthesis",
                    player.number()
                ))
            })?;
            let value = chol.solve(&rhs);
            match player {
                Player::One => u1.push(value),
                Player::Two => u2.push(value),
            }
        }
    }
    Ok((
        ControlProcess::piecewise_constant(Player::One, times.clone(), u1)?,
        ControlProcess::piecewise_constant(Player::Two, times, u2)?,
    ))
}

/// Time profile of the per-player first-order-condition residuals.
#[derive(Clone, Debug)]
pub struct StationarityProfile {
    /// Left endpoints of the grid intervals.
    pub times: Vec<f64>,
    /// Residual magnitude per grid time, one profile per player.
    pub residuals: [Vec<f64>; 2],
    /// Time maximum per player.
    pub max: [f64; 2],
}

/// Evaluate the stationarity residuals of a control pair against an
/// adjoint solution on a freshly simulated ensemble.
///
/// The conditional expectation E[H_{u_i}|F^Y_t] is estimated by least
/// squares on observation features: a constant basis when both the
/// controls and the adjoint are deterministic (the gradient is then
/// deterministic too, and the mean is exact), augmented with the current
/// observation level otherwise.
pub fn stationarity_residual(
    problem: &ProblemSpec,
    controls: (&ControlProcess, &ControlProcess),
    adj: &AdjointSolution,
    grid: &GridConfig,
) -> Result<StationarityProfile> {
    let kk = grid.step_count;
    if adj.step_count() != kk {
        return Err(Error::Input(format!(
            "adjoint grid has {} steps but the simulation grid has {kk}",
            adj.step_count()
        )));
    }
    if adj.particle_count != 1 && adj.particle_count != grid.particle_count {
        return Err(Error::Input(
            "adjoint ensemble size matches neither 1 (deterministic) nor the grid".into(),
        ));
    }
    let bundle = simulate_forward(problem, controls, grid)?;
    let (n, count) = (problem.n, grid.particle_count);
    let (k1, k2) = (problem.k1, problem.k2);
    let deterministic = controls.0.is_deterministic()
        && controls.1.is_deterministic()
        && adj.deterministic_reduction;

    let mut u1_row = vec![0.0; count * k1];
    let mut u2_row = vec![0.0; count * k2];
    let mut residuals = [Vec::with_capacity(kk), Vec::with_capacity(kk)];

    for k in 0..kk {
        let t = bundle.times[k];
        bundle.controls_at_step(controls, k, &mut u1_row, &mut u2_row);
        let x_row = bundle.state_row(k);
        let xm = bundle.x_mean_at(k);
        let u1m = bundle.u_mean_at(Player::One, k);
        let u2m = bundle.u_mean_at(Player::Two, k);

        for (pi, player) in [Player::One, Player::Two].into_iter().enumerate() {
            let dim = match player {
                Player::One => k1,
                Player::Two => k2,
            };
            let (own_block, mean_block) = match player {
                Player::One => (ArgBlock::U1, ArgBlock::U1Mean),
                Player::Two => (ArgBlock::U2, ArgBlock::U2Mean),
            };
            let mut own = DMatrix::zeros(count, dim);
            let mut mean_acc = DVector::zeros(dim);
            for i in 0..count {
                let args = CoeffArgs::from_slices(
                    t,
                    &x_row[i * n..(i + 1) * n],
                    xm,
                    &u1_row[i * k1..(i + 1) * k1],
                    u1m,
                    &u2_row[i * k2..(i + 1) * k2],
                    u2m,
                );
                let ai = if adj.particle_count == 1 { 0 } else { i };
                let p = DVector::from_column_slice(adj.p_at(k, ai));
                let q = DVector::from_column_slice(adj.q_at(k, ai));
                let qt = DVector::from_column_slice(adj.q_tilde_at(k, ai));
                let g_own = hamiltonian_gradient(problem, &args, &p, &q, &qt, own_block)?;
                let g_mean = hamiltonian_gradient(problem, &args, &p, &q, &qt, mean_block)?;
                for c in 0..dim {
                    own[(i, c)] = g_own[c];
                }
                mean_acc += g_mean;
            }
            mean_acc /= count as f64;

            // Conditional-expectation estimate of the own-control
            // gradient given the observation history.
            let fitted = if deterministic {
                let mut col_means = DVector::zeros(dim);
                for c in 0..dim {
                    col_means[c] = own.column(c).sum() / count as f64;
                }
                DMatrix::from_fn(count, dim, |_, c| col_means[c])
            } else {
                let mut design = DMatrix::zeros(count, 2);
                for i in 0..count {
                    design[(i, 0)] = 1.0;
                    design[(i, 1)] = bundle.y_row(k)[i];
                }
                crate::adjoint::regression::fit(&design, &own, k)?.0
            };

            let bounds = &problem.control_bounds[pi];
            let mut sq = 0.0;
            for i in 0..count {
                let mut r_sq = 0.0;
                match bounds {
                    None => {
                        for c in 0..dim {
                            r_sq += (fitted[(i, c)] + mean_acc[c]).powi(2);
                        }
                    }
                    Some(b) => {
                        // Variational-inequality residual: the distance
                        // between u and the projection of a unit
                        // gradient step back into the admissible box.
                        let u_slice = match player {
                            Player::One => &u1_row[i * k1..(i + 1) * k1],
                            Player::Two => &u2_row[i * k2..(i + 1) * k2],
                        };
                        let mut stepped = DVector::from_column_slice(u_slice);
                        for c in 0..dim {
                            stepped[c] -= fitted[(i, c)] + mean_acc[c];
                        }
                        let projected = b.project(&stepped);
                        for c in 0..dim {
                            r_sq += (u_slice[c] - projected[c]).powi(2);
                        }
                    }
                }
                sq += r_sq;
            }
            residuals[pi].push((sq / count as f64).sqrt());
        }
    }

    let max = [
        residuals[0].iter().cloned().fold(0.0, f64::max),
        residuals[1].iter().cloned().fold(0.0, f64::max),
    ];
    Ok(StationarityProfile { times: bundle.times[..kk].to_vec(), residuals, max })
}

/// Configuration of the unilateral-perturbation generator.
#[derive(Clone, Debug)]
pub struct PerturbationConfig {
    /// Perturbations per player (the first two are the deterministic
    /// ± constant directions, the rest random piecewise-constant).
    pub per_player: usize,
    /// Magnitude grid cycled through the perturbation index.
    pub magnitudes: Vec<f64>,
    /// Seed of the direction generator (independent of the simulation
    /// seed).
    pub seed: u64,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        PerturbationConfig { per_player: 20, magnitudes: vec![0.1, 0.5, 1.0], seed: 0x5eed }
    }
}

/// One unilateral-deviation check under common random numbers.
#[derive(Clone, Debug)]
pub struct PerturbationCheck {
    pub player: Player,
    pub description: String,
    /// Cost of the perturbed pair.
    pub cost: CostEstimate,
    /// Mean paired difference J(perturbed) − J(candidate).
    pub diff: f64,
    /// Standard error of the paired difference.
    pub diff_se: f64,
    pub pass: bool,
}

/// One midpoint convexity (player 1) / concavity (player 2) check.
#[derive(Clone, Debug)]
pub struct ConvexityTriple {
    pub player: Player,
    pub direction: usize,
    pub lambdas: (f64, f64, f64),
    /// Mean paired defect (J(λa) + J(λb))/2 − J(λm); convexity wants it
    /// nonnegative, concavity nonpositive.
    pub defect: f64,
    pub defect_se: f64,
    pub pass: bool,
}

/// Fitted leading coefficient of λ ↦ J(λ·probe) for one player.
#[derive(Clone, Debug)]
pub struct CoercivityCheck {
    pub player: Player,
    /// Quadratic coefficients recovered from the scale grid {1, 2, 4}
    /// and {2, 4, 8}; they agree exactly for quadratic costs.
    pub quadratic_coefficient: f64,
    pub cross_check: f64,
    pub standard_error: f64,
    pub pass: bool,
}

/// Convexity-structure probe results.
#[derive(Clone, Debug)]
pub struct ConvexityReport {
    pub triples: Vec<ConvexityTriple>,
    pub coercivity: Vec<CoercivityCheck>,
    pub pass: bool,
}

/// Monte Carlo verification report of a saddle candidate.
#[derive(Clone, Debug)]
pub struct SaddleReport {
    /// J(ū1, ū2) in the strong formulation.
    pub candidate_cost: CostEstimate,
    /// Density-weighted candidate cost, when requested.
    pub weak_candidate_cost: Option<CostEstimate>,
    pub perturbations: Vec<PerturbationCheck>,
    pub stationarity: Option<StationarityProfile>,
    pub convexity: Option<ConvexityReport>,
    /// Tolerance applied to the stationarity maxima.
    pub residual_tolerance: f64,
    /// Pass iff every inequality check holds within its confidence band
    /// and every present residual maximum is below tolerance.
    pub verdict: bool,
}

impl SaddleReport {
    /// Recompute the verdict from the parts (used after assembling a
    /// report from separately computed sections).
    pub fn settle_verdict(&mut self) {
        let perturbations_ok = self.perturbations.iter().all(|c| c.pass);
        let stationarity_ok = self
            .stationarity
            .as_ref()
            .map(|s| s.max.iter().all(|m| *m < self.residual_tolerance))
            .unwrap_or(true);
        let convexity_ok = self.convexity.as_ref().map(|c| c.pass).unwrap_or(true);
        self.verdict = perturbations_ok && stationarity_ok && convexity_ok;
    }
}

/// Default residual tolerance for a deterministic (exactly solvable)
/// candidate.
pub const RESIDUAL_TOLERANCE_DETERMINISTIC: f64 = 1e-6;
/// Default residual tolerance when the adjoint comes from regression.
pub const RESIDUAL_TOLERANCE_REGRESSION: f64 = 5e-2;

/// A unit-L²-norm piecewise-constant direction for one player on the
/// candidate's partition. Index 0/1 are the ± constant directions; the
/// rest are seeded random draws.
fn direction(
    template: &ControlProcess,
    horizon: f64,
    player: Player,
    index: usize,
    seed: u64,
) -> Result<ControlProcess> {
    let times = template.times.clone();
    let dim = template.dim;
    let values: Vec<DVector<f64>> = match index {
        0 | 1 => {
            let sign = if index == 0 { 1.0 } else { -1.0 };
            vec![DVector::from_element(dim, sign); times.len()]
        }
        _ => {
            let tag = (player.index() as u64) << 32 | index as u64;
            (0..times.len())
                .map(|j| {
                    DVector::from_fn(dim, |c, _| {
                        rng::aux_normal(seed, tag, (j * dim + c) as u64)
                    })
                })
                .collect()
        }
    };
    let raw = ControlProcess::piecewise_constant(player, times, values)?;
    let norm = raw.l2_norm(horizon)?;
    if norm == 0.0 {
        return Err(Error::Numerical("degenerate zero perturbation direction".into()));
    }
    raw.scaled(1.0 / norm)
}

/// Mean and standard error of the paired per-particle difference
/// between two cost samples.
fn paired_difference(perturbed: &CostSample, base: &CostSample) -> (f64, f64) {
    let count = base.per_particle.len();
    let nf = count as f64;
    let diffs: Vec<f64> = perturbed
        .per_particle
        .iter()
        .zip(&base.per_particle)
        .map(|(a, b)| a - b)
        .collect();
    let mean = diffs.iter().sum::<f64>() / nf;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    (mean, (var / nf).sqrt())
}

/// Solve the regression adjoint along the candidate when the problem
/// carries every derivative the Hamiltonian gradients need; `None` when
/// any is missing (stationarity is then unavailable, not an error).
pub fn regression_adjoint_if_possible(
    problem: &ProblemSpec,
    candidate: (&ControlProcess, &ControlProcess),
    grid: &GridConfig,
) -> Result<Option<AdjointSolution>> {
    let available = problem.terminal_cost.has_gradients()
        && problem.running_cost.has_gradient()
        && problem.drift_b.has_jacobian()
        && problem.diffusion_g.has_jacobian()
        && problem.diffusion_g_tilde.has_jacobian()
        && problem.observation_h.has_gradient();
    if !available {
        return Ok(None);
    }
    let bundle = simulate_forward(problem, candidate, grid)?;
    let adj = solve_adjoint_general(problem, candidate, &bundle, &BasisSpec::default())?;
    Ok(Some(adj))
}

/// Verify the saddle inequalities by unilateral perturbations under
/// common random numbers, with the stationarity section computed from a
/// regression adjoint when the problem carries analytic gradients.
pub fn verify_saddle(
    problem: &ProblemSpec,
    candidate: (&ControlProcess, &ControlProcess),
    config: &PerturbationConfig,
    grid: &GridConfig,
) -> Result<SaddleReport> {
    let adjoint = regression_adjoint_if_possible(problem, candidate, grid)?;
    verify_saddle_with(
        problem,
        candidate,
        config,
        grid,
        adjoint.as_ref(),
        RESIDUAL_TOLERANCE_REGRESSION,
    )
}

/// [`verify_saddle`] with an externally supplied adjoint (for instance
/// the exact linear-quadratic one) and an explicit residual tolerance.
pub fn verify_saddle_with(
    problem: &ProblemSpec,
    candidate: (&ControlProcess, &ControlProcess),
    config: &PerturbationConfig,
    grid: &GridConfig,
    adjoint: Option<&AdjointSolution>,
    residual_tolerance: f64,
) -> Result<SaddleReport> {
    if candidate.0.values().is_none() || candidate.1.values().is_none() {
        return Err(Error::Input(
            "saddle verification perturbs piecewise-constant open-loop candidates only".into(),
        ));
    }
    let base = cost_detailed(problem, candidate, grid, Formulation::Strong)?;

    let mut perturbations = Vec::with_capacity(2 * config.per_player);
    for player in [Player::One, Player::Two] {
        let template = match player {
            Player::One => candidate.0,
            Player::Two => candidate.1,
        };
        for j in 0..config.per_player {
            let dir = direction(template, problem.horizon, player, j, config.seed)?;
            let magnitude = config.magnitudes[j % config.magnitudes.len()];
            let perturbed = template.add_scaled(&dir, magnitude)?;
            let pair = match player {
                Player::One => (&perturbed, candidate.1),
                Player::Two => (candidate.0, &perturbed),
            };
            let sample = cost_detailed(problem, pair, grid, Formulation::Strong)?;
            let (diff, diff_se) = paired_difference(&sample, &base);
            // Player 1 deviations may only increase the cost, player 2
            // deviations may only decrease it, within two paired SEs.
            let pass = match player {
                Player::One => diff >= -2.0 * diff_se,
                Player::Two => diff <= 2.0 * diff_se,
            };
            let kind = match j {
                0 => "constant +".to_string(),
                1 => "constant -".to_string(),
                _ => format!("random {}", j - 2),
            };
            perturbations.push(PerturbationCheck {
                player,
                description: format!(
                    "player {} {kind} direction, magnitude {magnitude}",
                    player.number()
                ),
                cost: sample.estimate,
                diff,
                diff_se,
                pass,
            });
        }
    }

    let stationarity = match adjoint {
        Some(adj) => Some(stationarity_residual(problem, candidate, adj, grid)?),
        None => None,
    };

    let mut report = SaddleReport {
        candidate_cost: base.estimate,
        weak_candidate_cost: None,
        perturbations,
        stationarity,
        convexity: None,
        residual_tolerance,
        verdict: false,
    };
    report.settle_verdict();
    Ok(report)
}

/// Probe midpoint convexity/concavity along random directions and the
/// quadratic coercivity structure in the control scale.
pub fn convexity_probe(
    problem: &ProblemSpec,
    controls: (&ControlProcess, &ControlProcess),
    grid: &GridConfig,
) -> Result<ConvexityReport> {
    if controls.0.values().is_none() || controls.1.values().is_none() {
        return Err(Error::Input(
            "the convexity probe perturbs piecewise-constant open-loop controls only".into(),
        ));
    }
    let directions_per_player = 5;
    let lambda_grid: Vec<f64> = (0..9).map(|i| -1.0 + 0.25 * i as f64).collect();
    let seed = 0xc0_u64;

    let mut triples = Vec::new();
    let mut coercivity = Vec::new();

    for player in [Player::One, Player::Two] {
        let template = match player {
            Player::One => controls.0,
            Player::Two => controls.1,
        };

        // Midpoint checks along each direction: per-particle paired
        // defects on every equally spaced λ triple.
        for d in 0..directions_per_player {
            let dir = direction(template, problem.horizon, player, d + 2, seed)?;
            let samples: Vec<CostSample> = lambda_grid
                .iter()
                .map(|&lam| {
                    let moved = template.add_scaled(&dir, lam)?;
                    let pair = match player {
                        Player::One => (&moved, controls.1),
                        Player::Two => (controls.0, &moved),
                    };
                    cost_detailed(problem, pair, grid, Formulation::Strong)
                })
                .collect::<Result<_>>()?;
            for spacing in [1usize, 2] {
                for a in 0..lambda_grid.len().saturating_sub(2 * spacing) {
                    let (ia, im, ib) = (a, a + spacing, a + 2 * spacing);
                    let count = samples[ia].per_particle.len();
                    let nf = count as f64;
                    let defects: Vec<f64> = (0..count)
                        .map(|i| {
                            0.5 * (samples[ia].per_particle[i] + samples[ib].per_particle[i])
                                - samples[im].per_particle[i]
                        })
                        .collect();
                    let mean = defects.iter().sum::<f64>() / nf;
                    let var =
                        defects.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0);
                    let se = (var / nf).sqrt();
                    let pass = match player {
                        Player::One => mean >= -2.0 * se,
                        Player::Two => mean <= 2.0 * se,
                    };
                    triples.push(ConvexityTriple {
                        player,
                        direction: d,
                        lambdas: (lambda_grid[ia], lambda_grid[im], lambda_grid[ib]),
                        defect: mean,
                        defect_se: se,
                        pass,
                    });
                }
            }
        }

        // Coercivity in the control scale: J(λ·probe) sampled on
        // λ ∈ {1, 2, 4, 8} and reduced to the leading quadratic
        // coefficient by divided differences, per particle.
        let probe = direction(template, problem.horizon, player, 0, seed)?;
        let scales = [1.0, 2.0, 4.0, 8.0];
        let samples: Vec<CostSample> = scales
            .iter()
            .map(|&lam| {
                let scaled = probe.scaled(lam)?;
                let pair = match player {
                    Player::One => (&scaled, controls.1),
                    Player::Two => (controls.0, &scaled),
                };
                cost_detailed(problem, pair, grid, Formulation::Strong)
            })
            .collect::<Result<_>>()?;
        let count = samples[0].per_particle.len();
        let nf = count as f64;
        let alpha = |i: usize, lo: usize| -> f64 {
            let (l0, l1, l2) = (scales[lo], scales[lo + 1], scales[lo + 2]);
            let (s0, s1, s2) = (
                samples[lo].per_particle[i],
                samples[lo + 1].per_particle[i],
                samples[lo + 2].per_particle[i],
            );
            let d01 = (s1 - s0) / (l1 - l0);
            let d12 = (s2 - s1) / (l2 - l1);
            (d12 - d01) / (l2 - l0)
        };
        let alphas: Vec<f64> = (0..count).map(|i| alpha(i, 1)).collect();
        let cross: Vec<f64> = (0..count).map(|i| alpha(i, 0)).collect();
        let mean = alphas.iter().sum::<f64>() / nf;
        let cross_mean = cross.iter().sum::<f64>() / nf;
        let var = alphas.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0);
        let se = (var / nf).sqrt();
        let pass = match player {
            Player::One => mean > 2.0 * se,
            Player::Two => mean < -2.0 * se,
        };
        coercivity.push(CoercivityCheck {
            player,
            quadratic_coefficient: mean,
            cross_check: cross_mean,
            standard_error: se,
            pass,
        });
    }

    let pass = triples.iter().all(|t| t.pass) && coercivity.iter().all(|c| c.pass);
    Ok(ConvexityReport { triples, coercivity, pass })
}
