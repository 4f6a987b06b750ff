//! Scalar hysteresis: the play operator family and the Preisach operator
//! built on top of it.
//!
//! A play operator with threshold `r > 0` tracks an internal variable `xi`
//! that follows its input `p` with a dead band of width `2r`:
//!
//! ```text
//! xi_new = min{ p_new + r, max{ p_new - r, xi_old } }
//! ```
//!
//! Two discrete identities hold *exactly* for this catch-up update and are the
//! foundation of the solver's energy bookkeeping:
//!
//! * energy: `dxi * (p_new - xi_new) = r * |dxi|`
//! * monotonicity: `dxi * dp >= dxi^2`
//!
//! The internal variable is stored as an exact two-float pair so that these
//! identities are exact statements about the stored state (see [`crate::exact`]),
//! not approximations spoiled by rounding of `p - r`.
//!
//! The Preisach operator integrates a density over the play family:
//! `G0[p](t) = int_0^inf int_0^{play_r[p](t)} rho(r, v) dv dr`, discretized on
//! an [`RGrid`]. Its memory state carries ledgers for the output `G0`, the
//! potential `V0`, the dissipation functional `D0`, and the accumulated
//! dissipated heat, with the heat increment defined by the discrete identity
//! `dq = dG0 * p_new - dV0 >= 0` so that the global energy audit closes
//! exactly.
//!
//! Inputs are processed as sequences of values; the operators are rate
//! independent by construction, and the catch-up update is exact for
//! piecewise-monotone interpolation between samples (inserting extra samples
//! along a monotone segment does not change the result — bitwise).

mod density;
mod memory;
mod play;

pub use density::{Density, NumericDensity};
pub use memory::{g_total, InitialMemoryCurve, MemoryLedger, MemoryState, PreisachIncrement, RGrid};
pub use play::{play_init, play_step};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HysteresisError {
    #[error("play threshold must be positive, got r = {0}")]
    NonpositiveThreshold(f64),
    #[error("r-grid nodes must be strictly increasing and positive")]
    BadGridNodes,
    #[error("r-grid weights must be positive")]
    BadGridWeights,
    #[error("r-grid cells must tile (0, cap]: node {node} outside its cell, or weights do not sum to the cap")]
    GridDoesNotCoverCap { node: f64 },
    #[error("initial memory curve is not 1-Lipschitz: |lambda({r1}) - lambda({r0})| > |{r1} - {r0}|")]
    CurveNotLipschitz { r0: f64, r1: f64 },
    #[error("initial memory curve must vanish for r >= {cutoff}, but lambda({r}) = {value}")]
    CurveNotCompact { cutoff: f64, r: f64, value: f64 },
    #[error("potential weight h must be nondecreasing: h({x1}) < h({x0}) with {x0} < {x1}")]
    NonMonotoneWeight { x0: f64, x1: f64 },
}
