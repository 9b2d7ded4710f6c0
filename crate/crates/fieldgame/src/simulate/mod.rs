//! Particle-ensemble forward simulation on a uniform time grid.
//!
//! Under the reference measure the state and the observation density
//! evolve as
//!
//! ```text
//! dx(t) = (b − g~·h)(t, x, E[x], u1, E[u1], u2, E[u2]) dt
//!         + g(...) dW(t) + g~(...) dY(t),                  x(0) = a,
//! dZ(t) = Z(t)·h(...) dY(t),                               Z(0) = 1,
//! ```
//!
//! with W and Y independent standard Brownian motions. The state takes
//! uniform Euler–Maruyama steps; the density takes the exact
//! stochastic-exponential step
//!
//! ```text
//! Z(t_{k+1}) = Z(t_k)·exp(h_k ΔY_k − ½ h_k² dt),
//! ```
//!
//! which preserves positivity pathwise and unit mean per step in
//! expectation. Laws are approximated by the same-ensemble empirical
//! means (the standard McKean–Vlasov particle scheme, O(1/N) interaction
//! bias): at every step the particle loop synchronizes, the means over
//! the fully advanced ensemble are computed in particle-id order, and
//! only then does any particle advance. Within a step the particle loop
//! is embarrassingly parallel, and all randomness is counter-based, so a
//! bundle is a pure function of (problem, controls, grid) — bit-identical
//! under any worker partitioning.

pub mod rng;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::coeff::{CoeffArgs, ProblemSpec};
use crate::model::control::{ControlProcess, Player};

/// Grid and ensemble sizing plus the seed: everything a run needs beyond
/// the problem and the controls.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GridConfig {
    pub step_count: usize,
    pub particle_count: usize,
    pub seed: u64,
}

impl GridConfig {
    pub fn new(step_count: usize, particle_count: usize, seed: u64) -> Self {
        GridConfig { step_count, particle_count, seed }
    }

    pub fn validate(&self, horizon: f64) -> Result<()> {
        if self.step_count == 0 {
            return Err(Error::Validation("step_count must be positive".into()));
        }
        if self.particle_count < 2 {
            return Err(Error::Validation(
                "particle_count must be at least 2 (empirical means need ≥ 2 samples for variance diagnostics)"
                    .into(),
            ));
        }
        if !(horizon > 0.0) {
            return Err(Error::Validation(format!("horizon must be positive, got {horizon}")));
        }
        Ok(())
    }

    pub fn dt(&self, horizon: f64) -> f64 {
        horizon / self.step_count as f64
    }

    /// The grid t_k = horizon·k/K, k = 0..=K. The ratio is formed
    /// first so k = K lands on the horizon exactly, not an ulp off.
    pub fn times(&self, horizon: f64) -> Vec<f64> {
        (0..=self.step_count)
            .map(|k| horizon * (k as f64 / self.step_count as f64))
            .collect()
    }
}

/// One simulated ensemble: states, observation paths, noise increments,
/// density paths, and the empirical means the mean-field coupling used.
/// Row-major by step: entry (k, i) of a per-particle array sits at
/// `k·N + i` (times the component count for vector-valued rows).
#[derive(Clone, Debug)]
pub struct TrajectoryBundle {
    pub times: Vec<f64>,
    pub n: usize,
    pub k1: usize,
    pub k2: usize,
    pub particle_count: usize,
    pub seed: u64,
    /// x_i(t_k), length (K+1)·N·n.
    pub states: Vec<f64>,
    /// Y_i(t_k), length (K+1)·N; Y(0) = 0.
    pub y_levels: Vec<f64>,
    /// ΔW over [t_k, t_{k+1}), length K·N.
    pub w_increments: Vec<f64>,
    /// ΔY over [t_k, t_{k+1}), length K·N.
    pub y_increments: Vec<f64>,
    /// Z_i(t_k), length (K+1)·N; all ones until the density pass runs.
    pub z: Vec<f64>,
    /// Whether `z` holds the simulated density (false: placeholder ones).
    pub density_filled: bool,
    /// Ensemble mean of x at each step, length (K+1)·n.
    pub x_mean: Vec<f64>,
    /// Ensemble mean of Z at each step, length K+1.
    pub z_mean: Vec<f64>,
    /// Ensemble mean of each player's control at each step, lengths K·k1
    /// and K·k2 (controls act on [t_k, t_{k+1})).
    pub u1_mean: Vec<f64>,
    pub u2_mean: Vec<f64>,
}

impl TrajectoryBundle {
    pub fn step_count(&self) -> usize {
        self.times.len() - 1
    }

    pub fn dt(&self) -> f64 {
        self.times[self.times.len() - 1] / self.step_count() as f64
    }

    pub fn state(&self, k: usize, i: usize) -> &[f64] {
        let base = (k * self.particle_count + i) * self.n;
        &self.states[base..base + self.n]
    }

    pub fn state_row(&self, k: usize) -> &[f64] {
        let base = k * self.particle_count * self.n;
        &self.states[base..base + self.particle_count * self.n]
    }

    pub fn y_row(&self, k: usize) -> &[f64] {
        &self.y_levels[k * self.particle_count..(k + 1) * self.particle_count]
    }

    pub fn z_row(&self, k: usize) -> &[f64] {
        &self.z[k * self.particle_count..(k + 1) * self.particle_count]
    }

    pub fn x_mean_at(&self, k: usize) -> &[f64] {
        &self.x_mean[k * self.n..(k + 1) * self.n]
    }

    pub fn u_mean_at(&self, player: Player, k: usize) -> &[f64] {
        match player {
            Player::One => &self.u1_mean[k * self.k1..(k + 1) * self.k1],
            Player::Two => &self.u2_mean[k * self.k2..(k + 1) * self.k2],
        }
    }

    /// Evaluate both controls for every particle at step k into the given
    /// row buffers (N·k1 and N·k2).
    pub fn controls_at_step(
        &self,
        controls: (&ControlProcess, &ControlProcess),
        k: usize,
        u1_out: &mut [f64],
        u2_out: &mut [f64],
    ) {
        let t = self.times[k];
        controls.0.eval_step(t, self.y_row(k), u1_out);
        controls.1.eval_step(t, self.y_row(k), u2_out);
    }

    /// Per-component standard error of the ensemble mean of x at step k.
    pub fn x_se_at(&self, k: usize) -> Vec<f64> {
        let nf = self.particle_count as f64;
        let mean = self.x_mean_at(k);
        let mut acc = vec![0.0; self.n];
        for i in 0..self.particle_count {
            let xi = self.state(k, i);
            for c in 0..self.n {
                acc[c] += (xi[c] - mean[c]).powi(2);
            }
        }
        acc.iter().map(|s| (s / (nf - 1.0)).sqrt() / nf.sqrt()).collect()
    }
}

fn check_controls(problem: &ProblemSpec, controls: (&ControlProcess, &ControlProcess)) -> Result<()> {
    if controls.0.player != Player::One || controls.1.player != Player::Two {
        return Err(Error::Input(
            "controls must be passed as (player 1, player 2), tagged accordingly".into(),
        ));
    }
    if controls.0.dim != problem.k1 || controls.1.dim != problem.k2 {
        return Err(Error::Dimension(format!(
            "control dimensions ({}, {}) do not match the problem ({}, {})",
            controls.0.dim, controls.1.dim, problem.k1, problem.k2
        )));
    }
    Ok(())
}

/// Mean over particles of a particle-major row of `width`-vectors,
/// accumulated in particle-id order (the determinism contract).
fn ordered_mean(row: &[f64], width: usize, out: &mut [f64]) {
    out.fill(0.0);
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

/// Simulate the state ensemble forward under the reference measure. The
/// returned bundle has placeholder density paths (all ones); run
/// [`simulate_density`] to fill them.
pub fn simulate_forward(
    problem: &ProblemSpec,
    controls: (&ControlProcess, &ControlProcess),
    grid: &GridConfig,
) -> Result<TrajectoryBundle> {
    grid.validate(problem.horizon)?;
    check_controls(problem, controls)?;
    let (kk, count, n) = (grid.step_count, grid.particle_count, problem.n);
    let (k1, k2) = (problem.k1, problem.k2);
    let dt = grid.dt(problem.horizon);
    let sqrt_dt = dt.sqrt();
    let times = grid.times(problem.horizon);

    let mut bundle = TrajectoryBundle {
        times,
        n,
        k1,
        k2,
        particle_count: count,
        seed: grid.seed,
        states: vec![0.0; (kk + 1) * count * n],
        y_levels: vec![0.0; (kk + 1) * count],
        w_increments: vec![0.0; kk * count],
        y_increments: vec![0.0; kk * count],
        z: vec![1.0; (kk + 1) * count],
        density_filled: false,
        x_mean: vec![0.0; (kk + 1) * n],
        z_mean: vec![1.0; kk + 1],
        u1_mean: vec![0.0; kk * k1],
        u2_mean: vec![0.0; kk * k2],
    };

    for i in 0..count {
        bundle.states[i * n..(i + 1) * n].copy_from_slice(problem.initial.as_slice());
    }
    bundle.x_mean[..n].copy_from_slice(problem.initial.as_slice());

    let mut u1_row = vec![0.0; count * k1];
    let mut u2_row = vec![0.0; count * k2];

    for k in 0..kk {
        let t = bundle.times[k];

        // Controls and every empirical mean are fixed before any particle
        // advances: the per-step barrier of the mean-field scheme.
        controls.0.eval_step(t, bundle.y_row(k), &mut u1_row);
        controls.1.eval_step(t, bundle.y_row(k), &mut u2_row);
        {
            let (u1m, u2m) = (
                &mut bundle.u1_mean[k * k1..(k + 1) * k1],
                &mut bundle.u2_mean[k * k2..(k + 1) * k2],
            );
            ordered_mean(&u1_row, k1, u1m);
            ordered_mean(&u2_row, k2, u2m);
        }

        let x_mean_k = bundle.x_mean[k * n..(k + 1) * n].to_vec();
        let u1_mean_k = bundle.u1_mean[k * k1..(k + 1) * k1].to_vec();
        let u2_mean_k = bundle.u2_mean[k * k2..(k + 1) * k2].to_vec();

        let seed = grid.seed;
        let (done_x, rest_x) = bundle.states.split_at_mut((k + 1) * count * n);
        let x_now = &done_x[k * count * n..];
        let x_next = &mut rest_x[..count * n];
        let (done_y, rest_y) = bundle.y_levels.split_at_mut((k + 1) * count);
        let y_now = &done_y[k * count..];
        let y_next = &mut rest_y[..count];
        let w_row = &mut bundle.w_increments[k * count..(k + 1) * count];
        let yi_row = &mut bundle.y_increments[k * count..(k + 1) * count];
        let (u1_ref, u2_ref) = (&u1_row, &u2_row);
        let (xm, u1m, u2m) = (&x_mean_k, &u1_mean_k, &u2_mean_k);

        x_next
            .par_chunks_mut(n)
            .zip(y_next.par_iter_mut())
            .zip(w_row.par_iter_mut())
            .zip(yi_row.par_iter_mut())
            .enumerate()
            .try_for_each(|(i, (((xn, yn), w_slot), y_slot))| -> Result<()> {
                let (w, y) = rng::normal_pair(seed, i as u64, k as u64);
                let dw = sqrt_dt * w;
                let dy = sqrt_dt * y;
                let args = CoeffArgs::from_slices(
                    t,
                    &x_now[i * n..(i + 1) * n],
                    xm,
                    &u1_ref[i * k1..(i + 1) * k1],
                    u1m,
                    &u2_ref[i * k2..(i + 1) * k2],
                    u2m,
                );
                let b = problem.drift_b.eval(&args);
                let g = problem.diffusion_g.eval(&args);
                let gt = problem.diffusion_g_tilde.eval(&args);
                let h = problem.observation_h.eval(&args);
                for c in 0..n {
                    let v = x_now[i * n + c] + (b[c] - gt[c] * h) * dt + g[c] * dw + gt[c] * dy;
                    if !v.is_finite() {
                        return Err(Error::Numerical(format!(
                            "non-finite state at step {k}, particle {i} (component {c})"
                        )));
                    }
                    xn[c] = v;
                }
                *yn = y_now[i] + dy;
                *w_slot = dw;
                *y_slot = dy;
                Ok(())
            })?;

        let x_next_done = bundle.state_row(k + 1).to_vec();
        ordered_mean(&x_next_done, n, &mut bundle.x_mean[(k + 1) * n..(k + 2) * n]);
    }
    Ok(bundle)
}

/// Fill the Girsanov density paths of a simulated bundle with the exact
/// stochastic-exponential step. Aborts if the accumulated exponent leaves
/// [−700, 700], which would overflow `exp`.
pub fn simulate_density(
    problem: &ProblemSpec,
    controls: (&ControlProcess, &ControlProcess),
    mut bundle: TrajectoryBundle,
) -> Result<TrajectoryBundle> {
    check_controls(problem, controls)?;
    let (kk, count, n) = (bundle.step_count(), bundle.particle_count, bundle.n);
    let (k1, k2) = (problem.k1, problem.k2);
    if n != problem.n || bundle.k1 != k1 || bundle.k2 != k2 {
        return Err(Error::Dimension(
            "bundle dimensions do not match the problem".into(),
        ));
    }
    let dt = bundle.dt();

    let mut u1_row = vec![0.0; count * k1];
    let mut u2_row = vec![0.0; count * k2];
    let mut log_z = vec![0.0_f64; count];

    for k in 0..kk {
        let t = bundle.times[k];
        controls.0.eval_step(t, bundle.y_row(k), &mut u1_row);
        controls.1.eval_step(t, bundle.y_row(k), &mut u2_row);

        let x_mean_k = bundle.x_mean_at(k).to_vec();
        let u1m = bundle.u_mean_at(Player::One, k).to_vec();
        let u2m = bundle.u_mean_at(Player::Two, k).to_vec();
        let x_now = bundle.state_row(k).to_vec();
        let yi_row = bundle.y_increments[k * count..(k + 1) * count].to_vec();

        let (done_z, rest_z) = bundle.z.split_at_mut((k + 1) * count);
        let z_now = &done_z[k * count..];
        let z_next = &mut rest_z[..count];
        let (u1_ref, u2_ref) = (&u1_row, &u2_row);
        let (xm_ref, u1m_ref, u2m_ref, x_ref, yi_ref) = (&x_mean_k, &u1m, &u2m, &x_now, &yi_row);

        z_next
            .par_iter_mut()
            .zip(log_z.par_iter_mut())
            .enumerate()
            .try_for_each(|(i, (zn, lz))| -> Result<()> {
                let args = CoeffArgs::from_slices(
                    t,
                    &x_ref[i * n..(i + 1) * n],
                    xm_ref,
                    &u1_ref[i * k1..(i + 1) * k1],
                    u1m_ref,
                    &u2_ref[i * k2..(i + 1) * k2],
                    u2m_ref,
                );
                let h = problem.observation_h.eval(&args);
                let exponent = h * yi_ref[i] - 0.5 * h * h * dt;
                *lz += exponent;
                if lz.abs() > 700.0 {
                    return Err(Error::Numerical(format!(
                        "density exponent overflow at step {k}, particle {i} (|log Z| = {:.1} > 700); \
                         use a smaller time step or a bounded observation drift",
                        lz.abs()
                    )));
                }
                *zn = z_now[i] * exponent.exp();
                Ok(())
            })?;

        let z_row = bundle.z_row(k + 1).to_vec();
        ordered_mean(&z_row, 1, &mut bundle.z_mean[k + 1..k + 2]);
    }
    bundle.density_filled = true;
    Ok(bundle)
}

/// Forward simulation followed by the density pass.
pub fn simulate_with_density(
    problem: &ProblemSpec,
    controls: (&ControlProcess, &ControlProcess),
    grid: &GridConfig,
) -> Result<TrajectoryBundle> {
    let bundle = simulate_forward(problem, controls, grid)?;
    simulate_density(problem, controls, bundle)
}
