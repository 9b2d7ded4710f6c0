//! Admissible control processes.
//!
//! A control is adapted to the observation filtration F^Y: its value at
//! time t may depend on the path of Y up to t and nothing else. Two
//! representations are supported, both piecewise constant on a time grid:
//! deterministic values (open-loop), and feedback coefficients applied to
//! the observation features available at evaluation time. The evaluation
//! API only ever receives those features, so adaptedness holds by
//! construction rather than by discipline.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Player {
    One,
    Two,
}

impl Player {
    pub fn index(self) -> usize {
        match self {
            Player::One => 0,
            Player::Two => 1,
        }
    }

    pub fn number(self) -> usize {
        self.index() + 1
    }
}

/// The σ(Y_s, s ≤ t)-measurable inputs a feedback law may read at time t.
/// Currently the level Y(t); the increments back to 0 are recoverable from
/// the simulation bundle if richer features are ever added.
#[derive(Clone, Copy, Debug)]
pub struct ObsFeatures {
    pub y_level: f64,
}

#[derive(Clone, Debug)]
pub enum ControlLaw {
    /// Open-loop: `values[j]` on `[times[j], times[j+1])`.
    PiecewiseConstant { values: Vec<DVector<f64>> },
    /// Feedback: on interval j the value is `coeffs[j] · (1, Y(t))ᵀ`,
    /// i.e. column 0 is an offset and column 1 multiplies the current
    /// observation level.
    Feedback { coeffs: Vec<DMatrix<f64>> },
}

#[derive(Clone, Debug)]
pub struct ControlProcess {
    pub player: Player,
    pub dim: usize,
    /// Interval start times, strictly increasing; the first extends left,
    /// the last to the horizon.
    pub times: Vec<f64>,
    pub law: ControlLaw,
}

impl ControlProcess {
    pub fn piecewise_constant(
        player: Player,
        times: Vec<f64>,
        values: Vec<DVector<f64>>,
    ) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::Input(format!(
                "control grid: {} times but {} values",
                times.len(),
                values.len()
            )));
        }
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Input("control grid times must be strictly increasing".into()));
        }
        let dim = values[0].len();
        if dim == 0 || values.iter().any(|v| v.len() != dim) {
            return Err(Error::Input("control values must share one positive dimension".into()));
        }
        Ok(ControlProcess {
            player,
            dim,
            times,
            law: ControlLaw::PiecewiseConstant { values },
        })
    }

    pub fn feedback(player: Player, times: Vec<f64>, coeffs: Vec<DMatrix<f64>>) -> Result<Self> {
        if times.is_empty() || times.len() != coeffs.len() {
            return Err(Error::Input(format!(
                "control grid: {} times but {} coefficient blocks",
                times.len(),
                coeffs.len()
            )));
        }
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Input("control grid times must be strictly increasing".into()));
        }
        let dim = coeffs[0].nrows();
        if dim == 0 || coeffs.iter().any(|c| c.nrows() != dim || c.ncols() != 2) {
            return Err(Error::Input(
                "feedback coefficients must be dim×2 blocks (offset, Y-level weight)".into(),
            ));
        }
        Ok(ControlProcess { player, dim, times, law: ControlLaw::Feedback { coeffs } })
    }

    /// Control frozen at one value for all time.
    pub fn constant(player: Player, value: DVector<f64>) -> Self {
        let dim = value.len();
        ControlProcess {
            player,
            dim,
            times: vec![0.0],
            law: ControlLaw::PiecewiseConstant { values: vec![value] },
        }
    }

    pub fn zero(player: Player, dim: usize) -> Self {
        Self::constant(player, DVector::zeros(dim))
    }

    /// Index of the interval in force at time t.
    pub fn interval(&self, t: f64) -> usize {
        self.times.partition_point(|&s| s <= t).saturating_sub(1)
    }

    pub fn is_deterministic(&self) -> bool {
        matches!(self.law, ControlLaw::PiecewiseConstant { .. })
    }

    /// Value at time t given the observation features at t.
    pub fn value_at(&self, t: f64, obs: &ObsFeatures) -> DVector<f64> {
        let j = self.interval(t);
        match &self.law {
            ControlLaw::PiecewiseConstant { values } => values[j].clone(),
            ControlLaw::Feedback { coeffs } => {
                let c = &coeffs[j];
                c.column(0) + c.column(1) * obs.y_level
            }
        }
    }

    /// Fill `out` (one `dim`-sized row per particle) with this control's
    /// value at time t, given every particle's current observation level.
    pub fn eval_step(&self, t: f64, y_levels: &[f64], out: &mut [f64]) {
        let particles = y_levels.len();
        debug_assert_eq!(out.len(), particles * self.dim);
        let j = self.interval(t);
        match &self.law {
            ControlLaw::PiecewiseConstant { values } => {
                let v = values[j].as_slice();
                for row in out.chunks_exact_mut(self.dim) {
                    row.copy_from_slice(v);
                }
            }
            ControlLaw::Feedback { coeffs } => {
                let c = &coeffs[j];
                for (i, row) in out.chunks_exact_mut(self.dim).enumerate() {
                    for (r, slot) in row.iter_mut().enumerate() {
                        *slot = c[(r, 0)] + c[(r, 1)] * y_levels[i];
                    }
                }
            }
        }
    }

    /// Deterministic values, if open-loop.
    pub fn values(&self) -> Option<&[DVector<f64>]> {
        match &self.law {
            ControlLaw::PiecewiseConstant { values } => Some(values),
            ControlLaw::Feedback { .. } => None,
        }
    }

    /// Open-loop combination self + scale·dir on a shared grid.
    pub fn add_scaled(&self, dir: &ControlProcess, scale: f64) -> Result<ControlProcess> {
        let (a, b) = match (&self.law, &dir.law) {
            (
                ControlLaw::PiecewiseConstant { values: a },
                ControlLaw::PiecewiseConstant { values: b },
            ) => (a, b),
            _ => {
                return Err(Error::Input(
                    "control arithmetic is defined for open-loop representations only".into(),
                ))
            }
        };
        if self.times != dir.times || self.dim != dir.dim {
            return Err(Error::Input("control arithmetic needs a shared grid and dimension".into()));
        }
        let values = a.iter().zip(b).map(|(x, d)| x + d * scale).collect();
        ControlProcess::piecewise_constant(self.player, self.times.clone(), values)
    }

    pub fn scaled(&self, scale: f64) -> Result<ControlProcess> {
        match &self.law {
            ControlLaw::PiecewiseConstant { values } => ControlProcess::piecewise_constant(
                self.player,
                self.times.clone(),
                values.iter().map(|v| v * scale).collect(),
            ),
            ControlLaw::Feedback { .. } => Err(Error::Input(
                "control arithmetic is defined for open-loop representations only".into(),
            )),
        }
    }

    /// L²([0, horizon]) norm of an open-loop control:
    /// (Σ_j ‖values[j]‖² Δt_j)^(1/2), the last interval ending at `horizon`.
    pub fn l2_norm(&self, horizon: f64) -> Result<f64> {
        let values = self.values().ok_or_else(|| {
            Error::Input("L² norm is defined for open-loop representations only".into())
        })?;
        let mut acc = 0.0;
        for (j, v) in values.iter().enumerate() {
            let t0 = self.times[j];
            let t1 = self.times.get(j + 1).copied().unwrap_or(horizon);
            acc += v.norm_squared() * (t1 - t0).max(0.0);
        }
        Ok(acc.sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(y: f64) -> ObsFeatures {
        ObsFeatures { y_level: y }
    }

    #[test]
    fn piecewise_constant_lookup() {
        let u = ControlProcess::piecewise_constant(
            Player::One,
            vec![0.0, 0.5],
            vec![DVector::from_element(1, 1.0), DVector::from_element(1, 2.0)],
        )
        .unwrap();
        assert_eq!(u.value_at(0.0, &obs(9.0))[0], 1.0);
        assert_eq!(u.value_at(0.49, &obs(-9.0))[0], 1.0);
        assert_eq!(u.value_at(0.5, &obs(0.0))[0], 2.0);
        assert_eq!(u.value_at(10.0, &obs(0.0))[0], 2.0);
    }

    #[test]
    fn open_loop_value_ignores_observation() {
        // Adaptedness for the open-loop representation: the value cannot
        // depend on any Y information, future or past.
        let u = ControlProcess::constant(Player::Two, DVector::from_element(2, 3.0));
        assert_eq!(u.value_at(0.3, &obs(1.0)), u.value_at(0.3, &obs(-57.0)));
    }

    #[test]
    fn feedback_reads_only_the_current_level() {
        let u = ControlProcess::feedback(
            Player::One,
            vec![0.0, 0.5],
            vec![
                DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
                DMatrix::from_row_slice(1, 2, &[0.0, 2.0]),
            ],
        )
        .unwrap();
        // First interval: offset only; second: 2·Y(t).
        assert_eq!(u.value_at(0.2, &obs(100.0))[0], 1.0);
        assert_eq!(u.value_at(0.7, &obs(-1.5))[0], -3.0);
    }

    #[test]
    fn eval_step_matches_value_at() {
        let u = ControlProcess::feedback(
            Player::One,
            vec![0.0],
            vec![DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, -2.0])],
        )
        .unwrap();
        let y = [0.5, -1.0, 2.0];
        let mut out = vec![0.0; 6];
        u.eval_step(0.1, &y, &mut out);
        for (i, &yi) in y.iter().enumerate() {
            let v = u.value_at(0.1, &obs(yi));
            assert_eq!(&out[i * 2..i * 2 + 2], v.as_slice());
        }
    }

    #[test]
    fn arithmetic_and_norm() {
        let u = ControlProcess::piecewise_constant(
            Player::One,
            vec![0.0, 0.5],
            vec![DVector::from_element(1, 3.0), DVector::from_element(1, 4.0)],
        )
        .unwrap();
        let d = ControlProcess::piecewise_constant(
            Player::One,
            vec![0.0, 0.5],
            vec![DVector::from_element(1, 1.0), DVector::from_element(1, -1.0)],
        )
        .unwrap();
        let w = u.add_scaled(&d, 2.0).unwrap();
        assert_eq!(w.values().unwrap()[0][0], 5.0);
        assert_eq!(w.values().unwrap()[1][0], 2.0);
        // ∫‖u‖² = 9·0.5 + 16·0.5 = 12.5
        assert!((u.l2_norm(1.0).unwrap() - 12.5f64.sqrt()).abs() < 1e-15);
        let mismatched = ControlProcess::constant(Player::One, DVector::zeros(1));
        assert!(u.add_scaled(&mismatched, 1.0).is_err());
    }
}
