//! Symmetric 3x3 tensors in Mandel vector form, and isotropic fourth-order
//! stiffness tensors acting on them.

use std::ops::{Add, Mul, Neg, Sub};

/// Symmetric 3x3 tensor stored as the Mandel 6-vector
/// `[xx, yy, zz, sqrt(2) yz, sqrt(2) xz, sqrt(2) xy]`, so that the plain dot
/// product of two Mandel vectors equals the full tensor contraction.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SymTensor3 {
    m: [f64; 6],
}

const SQRT2: f64 = std::f64::consts::SQRT_2;

impl SymTensor3 {
    pub const ZERO: SymTensor3 = SymTensor3 { m: [0.0; 6] };

    pub fn identity() -> Self {
        SymTensor3 { m: [1.0, 1.0, 1.0, 0.0, 0.0, 0.0] }
    }

    /// From raw Mandel components (off-diagonal entries already scaled by
    /// `sqrt(2)`).
    pub fn from_mandel(m: [f64; 6]) -> Self {
        SymTensor3 { m }
    }

    /// From physical components of the symmetric matrix.
    pub fn from_components(xx: f64, yy: f64, zz: f64, yz: f64, xz: f64, xy: f64) -> Self {
        SymTensor3 { m: [xx, yy, zz, SQRT2 * yz, SQRT2 * xz, SQRT2 * xy] }
    }

    pub fn diag(xx: f64, yy: f64, zz: f64) -> Self {
        SymTensor3 { m: [xx, yy, zz, 0.0, 0.0, 0.0] }
    }

    /// Plane-strain embedding of a 2D displacement gradient `gu[i][j] =
    /// du_i/dx_j`: the symmetric part fills the xx, yy, xy slots and the
    /// out-of-plane row stays zero.
    pub fn from_plane_strain(gu: &[[f64; 2]; 2]) -> Self {
        let exy = 0.5 * (gu[0][1] + gu[1][0]);
        SymTensor3::from_components(gu[0][0], gu[1][1], 0.0, 0.0, 0.0, exy)
    }

    pub fn mandel(&self) -> &[f64; 6] {
        &self.m
    }

    /// Physical matrix entry `(i, j)`, `0 <= i, j <= 2`.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return self.m[i];
        }
        // Mandel slots 3, 4, 5 hold sqrt(2) * (yz, xz, xy); the missing index
        // of the pair {i, j} identifies the slot.
        let k = 3 - i - j;
        self.m[3 + k] / SQRT2
    }

    pub fn trace(&self) -> f64 {
        self.m[0] + self.m[1] + self.m[2]
    }

    /// Full contraction `self : other`.
    pub fn dot(&self, other: &SymTensor3) -> f64 {
        self.m.iter().zip(&other.m).map(|(a, b)| a * b).sum()
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Deviatoric part `self - (tr/3) I`.
    pub fn dev(&self) -> SymTensor3 {
        let t = self.trace() / 3.0;
        let mut m = self.m;
        m[0] -= t;
        m[1] -= t;
        m[2] -= t;
        SymTensor3 { m }
    }

    /// Spherical part `(tr/3) I`.
    pub fn sph(&self) -> SymTensor3 {
        let t = self.trace() / 3.0;
        SymTensor3 { m: [t, t, t, 0.0, 0.0, 0.0] }
    }
}

impl Add for SymTensor3 {
    type Output = SymTensor3;
    fn add(self, rhs: SymTensor3) -> SymTensor3 {
        let mut m = self.m;
        for (a, b) in m.iter_mut().zip(&rhs.m) {
            *a += b;
        }
        SymTensor3 { m }
    }
}

impl Sub for SymTensor3 {
    type Output = SymTensor3;
    fn sub(self, rhs: SymTensor3) -> SymTensor3 {
        let mut m = self.m;
        for (a, b) in m.iter_mut().zip(&rhs.m) {
            *a -= b;
        }
        SymTensor3 { m }
    }
}

impl Neg for SymTensor3 {
    type Output = SymTensor3;
    fn neg(self) -> SymTensor3 {
        self * -1.0
    }
}

impl Mul<f64> for SymTensor3 {
    type Output = SymTensor3;
    fn mul(self, s: f64) -> SymTensor3 {
        let mut m = self.m;
        for a in m.iter_mut() {
            *a *= s;
        }
        SymTensor3 { m }
    }
}

/// Isotropic fourth-order tensor `A x = 2 mu x + lambda tr(x) I`.
///
/// Its eigenspaces are the deviatoric subspace (eigenvalue `2 mu`) and the
/// spherical line (eigenvalue `2 mu + 3 lambda`), which makes the inverse and
/// all energy norms closed-form.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IsotropicTensor4 {
    pub lambda: f64,
    pub mu: f64,
}

impl IsotropicTensor4 {
    pub fn new(lambda: f64, mu: f64) -> Self {
        IsotropicTensor4 { lambda, mu }
    }

    /// Deviatoric eigenvalue `2 mu`.
    pub fn eig_dev(&self) -> f64 {
        2.0 * self.mu
    }

    /// Spherical eigenvalue `2 mu + 3 lambda`.
    pub fn eig_sph(&self) -> f64 {
        2.0 * self.mu + 3.0 * self.lambda
    }

    pub fn is_positive_definite(&self) -> bool {
        self.eig_dev() > 0.0 && self.eig_sph() > 0.0
    }

    /// Operator (Lipschitz) norm `max(2 mu, 2 mu + 3 lambda)`.
    pub fn operator_norm(&self) -> f64 {
        self.eig_dev().max(self.eig_sph())
    }

    /// Uniaxial (plane-wave) modulus `2 mu + lambda`, the 1D reduction used
    /// by the spectral discretization.
    pub fn uniaxial(&self) -> f64 {
        2.0 * self.mu + self.lambda
    }

    pub fn apply(&self, x: &SymTensor3) -> SymTensor3 {
        let t = self.lambda * x.trace();
        let mut m = *x.mandel();
        for a in m.iter_mut() {
            *a *= 2.0 * self.mu;
        }
        m[0] += t;
        m[1] += t;
        m[2] += t;
        SymTensor3::from_mandel(m)
    }

    /// Inverse application: `A^{-1} y = dev(y)/(2 mu) + tr(y)/(3 (2 mu + 3
    /// lambda)) I`.
    pub fn apply_inv(&self, y: &SymTensor3) -> SymTensor3 {
        y.dev() * (1.0 / self.eig_dev()) + SymTensor3::identity() * (y.trace() / (3.0 * self.eig_sph()))
    }

    /// Energy product `x : A y`.
    pub fn inner(&self, x: &SymTensor3, y: &SymTensor3) -> f64 {
        x.dot(&self.apply(y))
    }

    /// Dual energy product `x : A^{-1} y`.
    pub fn inner_inv(&self, x: &SymTensor3, y: &SymTensor3) -> f64 {
        x.dot(&self.apply_inv(y))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn mandel_dot_equals_full_contraction() {
        let a = SymTensor3::from_components(1.0, -2.0, 0.5, 0.3, -0.7, 1.1);
        let b = SymTensor3::from_components(0.4, 0.9, -1.2, -0.5, 0.2, 0.8);
        let mut manual = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                manual += a.entry(i, j) * b.entry(i, j);
            }
        }
        assert_relative_eq!(a.dot(&b), manual, epsilon = 1e-14);
        assert_relative_eq!(a.entry(1, 2), 0.3, epsilon = 1e-15);
        assert_relative_eq!(a.entry(2, 1), 0.3, epsilon = 1e-15);
    }

    #[test]
    fn deviator_and_sphere_decompose_orthogonally() {
        let a = SymTensor3::from_components(3.0, 1.0, -1.0, 0.2, 0.4, -0.6);
        let d = a.dev();
        let s = a.sph();
        assert_abs_diff_eq!(d.trace(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d.dot(&s), 0.0, epsilon = 1e-15);
        let back = d + s;
        for i in 0..6 {
            assert_relative_eq!(back.mandel()[i], a.mandel()[i], epsilon = 1e-15);
        }
    }

    #[test]
    fn isotropic_apply_and_inverse_round_trip() {
        let a = IsotropicTensor4::new(1.3, 0.8);
        let x = SymTensor3::from_components(0.5, -1.0, 2.0, 0.7, -0.3, 0.1);
        let y = a.apply(&x);
        let back = a.apply_inv(&y);
        for i in 0..6 {
            assert_relative_eq!(back.mandel()[i], x.mandel()[i], epsilon = 1e-13);
        }
        // Eigenvalues on the two subspaces.
        let d = x.dev();
        let ad = a.apply(&d);
        for i in 0..6 {
            assert_relative_eq!(ad.mandel()[i], (d * a.eig_dev()).mandel()[i], epsilon = 1e-13);
        }
        let i3 = SymTensor3::identity();
        let ai = a.apply(&i3);
        for i in 0..6 {
            assert_relative_eq!(ai.mandel()[i], (i3 * a.eig_sph()).mandel()[i], epsilon = 1e-13);
        }
        assert!(a.is_positive_definite());
        assert!(!IsotropicTensor4::new(-1.0, 0.5).is_positive_definite());
        assert_eq!(a.operator_norm(), a.eig_sph());
    }

    #[test]
    fn energy_products_are_symmetric_and_positive() {
        let a = IsotropicTensor4::new(0.6, 1.1);
        let x = SymTensor3::from_components(0.2, -0.4, 0.9, 0.1, 0.5, -0.2);
        let y = SymTensor3::from_components(-1.0, 0.3, 0.2, 0.6, -0.1, 0.4);
        assert_relative_eq!(a.inner(&x, &y), a.inner(&y, &x), epsilon = 1e-13);
        assert_relative_eq!(a.inner_inv(&x, &y), a.inner_inv(&y, &x), epsilon = 1e-13);
        assert!(a.inner(&x, &x) > 0.0);
        assert!(a.inner_inv(&x, &x) > 0.0);
        // <A x, y>_{A^{-1}} = x : y.
        let ax = a.apply(&x);
        assert_relative_eq!(a.inner_inv(&ax, &y), x.dot(&y), epsilon = 1e-13);
    }

    #[test]
    fn plane_strain_embedding() {
        let gu = [[0.2, 0.5], [-0.1, 0.4]];
        let e = SymTensor3::from_plane_strain(&gu);
        assert_eq!(e.entry(0, 0), 0.2);
        assert_eq!(e.entry(1, 1), 0.4);
        assert_relative_eq!(e.entry(0, 1), 0.2, epsilon = 1e-15);
        assert_eq!(e.entry(2, 2), 0.0);
        assert_eq!(e.entry(0, 2), 0.0);
        // Plane strain still produces out-of-plane stress through lambda.
        let a = IsotropicTensor4::new(1.0, 1.0);
        let s = a.apply(&e);
        assert_relative_eq!(s.entry(2, 2), e.trace(), epsilon = 1e-15);
    }
}
