//! Numerical laboratory for partially observed two-person zero-sum
//! stochastic differential games of mean-field type.
//!
//! The state is driven under a reference measure by two independent
//! Brownian motions W (unobserved) and Y (the observation process):
//!
//! ```text
//! dx(t) = [b - g~ h](t, x, E[x], u1, E[u1], u2, E[u2]) dt
//!         + g(...) dW(t) + g~(...) dY(t),        x(0) = a,
//! dZ(t) = Z(t) h(t, x, E[x], ...) dY(t),         Z(0) = 1,
//! ```
//!
//! and the players' measure is the Girsanov reweighting dP^u = Z(T) dP.
//! Player 1 minimises and player 2 maximises one shared cost functional,
//! either in weak form (Z-weighted under the reference measure) or in
//! strong form (plain expectation).
//!
//! The crate simulates the particle system, evaluates both cost
//! formulations, solves the adjoint backward equation (exactly in the
//! linear-quadratic deterministic reduction, by least-squares Monte Carlo
//! in general), synthesises the linear-quadratic saddle controls from the
//! stationarity system, and verifies the maximum-principle conditions and
//! the saddle inequalities by paired Monte Carlo.

pub mod adjoint;
pub mod artifacts;
pub mod cost;
pub mod error;
pub mod model;
pub mod saddle;
pub mod simulate;

pub use error::{Error, Result};
