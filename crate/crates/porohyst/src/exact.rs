//! Error-free two-float arithmetic used by the scalar play operator.
//!
//! A [`TwoFloat`] stores a real number as an unevaluated sum `hi + lo` of two
//! doubles with `|lo| <= ulp(hi)/2`. The sums and differences produced by
//! [`TwoFloat::add`] / [`TwoFloat::sub`] are *exact*: no information is lost,
//! so comparisons between such pairs are decisions about the underlying real
//! numbers. The play operator keeps its internal variable in this form, which
//! is what makes its discrete energy identities hold exactly rather than to a
//! tolerance (see the `hysteresis` module).

/// Two-float value `hi + lo`, normalized so `|lo| <= ulp(hi)/2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoFloat {
    hi: f64,
    lo: f64,
}

/// Knuth's TwoSum: returns `(s, e)` with `s = fl(a + b)` and `a + b = s + e` exactly.
#[inline]
pub fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

impl TwoFloat {
    /// Exact representation of a single double.
    #[inline]
    pub fn from_f64(x: f64) -> Self {
        TwoFloat { hi: x, lo: 0.0 }
    }

    /// Exact sum `a + b` of two doubles.
    #[inline]
    pub fn add(a: f64, b: f64) -> Self {
        let (hi, lo) = two_sum(a, b);
        TwoFloat { hi, lo }
    }

    /// Exact difference `a - b` of two doubles.
    #[inline]
    pub fn sub(a: f64, b: f64) -> Self {
        Self::add(a, -b)
    }

    /// Reconstruct from stored limbs (used by snapshot loading). The pair must
    /// already be normalized, which holds for limbs produced by this type.
    #[inline]
    pub fn from_limbs(hi: f64, lo: f64) -> Self {
        TwoFloat { hi, lo }
    }

    #[inline]
    pub fn hi(&self) -> f64 {
        self.hi
    }

    #[inline]
    pub fn lo(&self) -> f64 {
        self.lo
    }

    /// Correctly rounded double value of `hi + lo`.
    #[inline]
    pub fn value(&self) -> f64 {
        self.hi + self.lo
    }
}

impl PartialOrd for TwoFloat {
    /// Exact order of the represented real numbers. For normalized pairs the
    /// lexicographic order on `(hi, lo)` is the order of `hi + lo` in R.
    #[inline]
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        match self.hi.partial_cmp(&other.hi) {
            Some(std::cmp::Ordering::Equal) => self.lo.partial_cmp(&other.lo),
            ord => ord,
        }
    }
}
