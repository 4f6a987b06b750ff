//! Tensor stop operator: rate-independent elastoplasticity with a von Mises
//! yield surface, discretized by exact metric projection (radial return).
//!
//! The plastic stress component is constrained to the admissible set
//! `Z = { sigma : |dev sigma| <= sigma_y } + span{I}` — a deviatoric ball
//! extended by the full spherical line. Its evolution maximizes dissipation:
//! the plastic strain rate points along the outward normal of `Z` at the
//! current stress. One implicit Euler step is equivalent to the projection
//!
//! ```text
//! sigma_new = proj_Z(sigma_old + A dEps)
//! ```
//!
//! orthogonal with respect to the energy scalar product
//! `<x, y> = x : A^{-1} y` of the plastic stiffness `A`. For isotropic `A`
//! the deviatoric and spherical subspaces stay orthogonal in that metric and
//! the metric is a scalar multiple of the Frobenius one on each, so the
//! projection reduces to the classical radial return and is *exact*, not an
//! approximation.
//!
//! Exact discrete energy identities (all returned by [`stop_step`]):
//!
//! * plastic strain increment `dEps_p = dEps - A^{-1} dSigma` with
//!   `tr dEps_p = 0` to roundoff (plastic flow preserves volume);
//! * dissipated heat `dq = sigma_new : dEps - (V_new - V_old)` with the
//!   stored energy `V = <sigma, sigma>/2`, satisfying
//!   `dq >= <dSigma, dSigma>/2 >= 0` by the projection inequality;
//! * in the elastic regime `dq = <dSigma, dSigma>/2` exactly;
//! * as the partition is refined, the accumulated heat converges to the
//!   continuous dissipation `integral sigma_y |dEps_p/dt| dt` at first order.

mod stop;
mod tensor;

pub use stop::{
    minkowski_polar, stop_step, PlasticPointState, ScalarStop, ScalarStopIncrement, StopIncrement,
};
pub use tensor::{IsotropicTensor4, SymTensor3};
