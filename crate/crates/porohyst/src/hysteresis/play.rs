//! The scalar play operator on exact two-float state.

use crate::exact::TwoFloat;

use super::HysteresisError;

/// One catch-up step of the play operator with threshold `r`:
/// `xi_new = min{ p + r, max{ p - r, xi } }`.
///
/// The bounds `p - r` and `p + r` are formed as exact two-float values and the
/// comparisons are exact, so the returned state is the *exact* real-arithmetic
/// catch-up of the stored state. In particular, when the play moves, the gap
/// `p - xi_new` equals `+/- r` exactly, which is what makes the discrete
/// energy identity `dxi * (p - xi_new) = r * |dxi|` exact.
#[inline]
pub fn play_step(xi: TwoFloat, p: f64, r: f64) -> TwoFloat {
    let lower = TwoFloat::sub(p, r);
    if xi < lower {
        return lower;
    }
    let upper = TwoFloat::add(p, r);
    if xi > upper {
        return upper;
    }
    xi
}

/// Initial play state for threshold `r` given the initial memory curve value
/// `lambda = lambda_{-1}(r)` and initial input `p0`:
/// `xi_r(0) = max{ p0 - r, min{ lambda, p0 + r } }`.
pub fn play_init(lambda: f64, p0: f64, r: f64) -> Result<TwoFloat, HysteresisError> {
    if r.is_nan() || r <= 0.0 {
        return Err(HysteresisError::NonpositiveThreshold(r));
    }
    let lower = TwoFloat::sub(p0, r);
    let upper = TwoFloat::add(p0, r);
    let lam = TwoFloat::from_f64(lambda);
    let clamped = if lam > upper { upper } else { lam };
    Ok(if clamped < lower { lower } else { clamped })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_clamps_into_the_band() {
        // Hat curve lambda(r) = max(0, 1 - r), p0 = 0, r = 0.5 -> xi0 = 0.5.
        let xi = play_init(0.5, 0.0, 0.5).unwrap();
        assert_eq!(xi.value(), 0.5);
        // Far curve value clamps to the upper bound p0 + r.
        let xi = play_init(10.0, 0.0, 0.5).unwrap();
        assert_eq!(xi.value(), 0.5);
        // lambda below the band clamps to p0 - r.
        let xi = play_init(-10.0, 0.0, 0.5).unwrap();
        assert_eq!(xi.value(), -0.5);
    }

    #[test]
    fn rejects_nonpositive_threshold() {
        assert!(play_init(0.0, 0.0, 0.0).is_err());
        assert!(play_init(0.0, 0.0, -1.0).is_err());
    }

    #[test]
    fn step_moves_only_outside_the_band() {
        let xi0 = play_init(0.0, 0.0, 1.0).unwrap();
        // Within the dead band: unchanged bitwise.
        let xi1 = play_step(xi0, 0.5, 1.0);
        assert_eq!(xi1, xi0);
        // Push past the band: lands on p - r exactly.
        let xi2 = play_step(xi1, 1.7, 1.0);
        assert_eq!(xi2, TwoFloat::sub(1.7, 1.0));
        // Reverse past the band: lands on p + r exactly.
        let xi3 = play_step(xi2, -2.0, 1.0);
        assert_eq!(xi3, TwoFloat::add(-2.0, 1.0));
    }

    #[test]
    fn monotone_refinement_is_bitwise_invariant() {
        // Sampling a monotone segment more finely must not change the result.
        let r = 0.3;
        let xi0 = play_init(0.0, 0.0, r).unwrap();
        let direct = play_step(xi0, 2.0, r);
        let mut xi = xi0;
        for p in [0.3, 0.71, 1.4, 1.99, 2.0] {
            xi = play_step(xi, p, r);
        }
        assert_eq!(xi, direct);
    }
}
