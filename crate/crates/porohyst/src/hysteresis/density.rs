//! Preisach density interface.
//!
//! A density is a nonnegative function `rho(r, v)` of the play threshold `r`
//! and the play value `v`, with an integrable envelope `rho*(r) = sup_v rho`.
//! The Preisach machinery needs the primitives
//!
//! * `P(r, v)  = int_0^v rho(r, v') dv'`           (output / `G0` slices)
//! * `PV(r, v) = int_0^v v' rho(r, v') dv'`        (potential / `V0` slices)
//!
//! Densities that have closed forms should override [`Density::primitive`] and
//! [`Density::moment_primitive`]; the provided defaults fall back to adaptive
//! Simpson quadrature with absolute tolerance `1e-12`.

use crate::quadrature::adaptive_simpson;

const FALLBACK_TOL: f64 = 1e-12;

pub trait Density: Send + Sync {
    /// Density value `rho(r, v) >= 0`.
    fn rho(&self, r: f64, v: f64) -> f64;

    /// Envelope `rho*(r) >= sup_v rho(r, v)`.
    fn envelope(&self, r: f64) -> f64;

    /// Total mass `C_rho = int int rho dv dr` (finite).
    fn c_rho(&self) -> f64;

    /// Envelope mass `C_rho* = int rho*(r) dr` (finite); the Lipschitz
    /// constant of the Preisach output with respect to its input.
    fn c_rho_star(&self) -> f64;

    /// Radius beyond which `rho(r, .) = 0`. Grids never need nodes past it.
    fn support_radius(&self) -> f64;

    /// `int_0^v rho(r, v') dv'`.
    fn primitive(&self, r: f64, v: f64) -> f64 {
        adaptive_simpson(&|x| self.rho(r, x), 0.0, v, FALLBACK_TOL)
    }

    /// `int_0^v v' rho(r, v') dv'`.
    fn moment_primitive(&self, r: f64, v: f64) -> f64 {
        adaptive_simpson(&|x| x * self.rho(r, x), 0.0, v, FALLBACK_TOL)
    }
}

/// Wrapper that adapts an arbitrary closure density to the trait using the
/// numeric fallbacks. Constants are integrated once at construction.
pub struct NumericDensity<F: Fn(f64, f64) -> f64 + Send + Sync> {
    rho: F,
    support_r: f64,
    value_bound: f64,
    c_rho: f64,
    c_rho_star: f64,
}

impl<F: Fn(f64, f64) -> f64 + Send + Sync> NumericDensity<F> {
    /// `support_r`, `value_bound`: the density must vanish for `r > support_r`
    /// and `|v| > value_bound`.
    pub fn new(rho: F, support_r: f64, value_bound: f64) -> Self {
        let envelope = |r: f64| -> f64 {
            // Coarse sampling is enough for an envelope estimate: refine the
            // max over a fixed lattice of v values.
            let n = 64;
            (0..=n)
                .map(|i| {
                    let v = value_bound * (2.0 * i as f64 / n as f64 - 1.0);
                    rho(r, v)
                })
                .fold(0.0, f64::max)
        };
        let c_rho = adaptive_simpson(
            &|r| adaptive_simpson(&|v| rho(r, v), -value_bound, value_bound, FALLBACK_TOL),
            0.0,
            support_r,
            FALLBACK_TOL,
        );
        let c_rho_star = adaptive_simpson(&envelope, 0.0, support_r, 1e-9);
        NumericDensity {
            rho,
            support_r,
            value_bound,
            c_rho,
            c_rho_star,
        }
    }
}

impl<F: Fn(f64, f64) -> f64 + Send + Sync> Density for NumericDensity<F> {
    fn rho(&self, r: f64, v: f64) -> f64 {
        if r > self.support_r || v.abs() > self.value_bound {
            0.0
        } else {
            (self.rho)(r, v)
        }
    }

    fn envelope(&self, r: f64) -> f64 {
        if r > self.support_r {
            return 0.0;
        }
        let n = 64;
        (0..=n)
            .map(|i| {
                let v = self.value_bound * (2.0 * i as f64 / n as f64 - 1.0);
                (self.rho)(r, v)
            })
            .fold(0.0, f64::max)
    }

    fn c_rho(&self) -> f64 {
        self.c_rho
    }

    fn c_rho_star(&self) -> f64 {
        self.c_rho_star
    }

    fn support_radius(&self) -> f64 {
        self.support_r
    }
}
