//! Radial-return time stepping for the tensor stop operator and its scalar
//! (uniaxial) reduction, with per-step energy bookkeeping.

use super::tensor::{IsotropicTensor4, SymTensor3};

/// Everything one implicit step of the tensor stop produces.
#[derive(Clone, Copy, Debug)]
pub struct StopIncrement {
    pub sigma_new: SymTensor3,
    /// Plastic strain increment `dEps - A^{-1} dSigma`; traceless.
    pub d_eps_plastic: SymTensor3,
    /// Change of the stored energy `<sigma, sigma>/2` in the `A^{-1}` metric.
    pub dv: f64,
    /// Dissipated heat `sigma_new : dEps - dv >= <dSigma, dSigma>/2 >= 0`.
    pub dq: f64,
    /// Whether the step touched the yield surface.
    pub yielded: bool,
}

/// One implicit Euler step of the stop operator: project the trial stress
/// `sigma_old + A dEps` back onto the admissible set
/// `Z = { |dev sigma| <= sigma_y } + span{I}` in the `A^{-1}` metric.
///
/// For isotropic `A` the metric projection is the radial return: keep the
/// spherical part, shrink the deviator onto the ball. The returned heat obeys
/// the exact inequality `dq >= <dSigma, dSigma>/2` (variational inequality
/// with test point `sigma_old`), with equality in the elastic regime.
pub fn stop_step(
    sigma_old: &SymTensor3,
    d_eps: &SymTensor3,
    stiffness: &IsotropicTensor4,
    sigma_y: f64,
) -> StopIncrement {
    let trial = *sigma_old + stiffness.apply(d_eps);
    let s = trial.dev();
    let sn = s.norm();
    // The algebra of the return map gives the plastic increment in closed
    // form: `dEps - A^{-1} dSigma` collapses to a multiple of the trial
    // deviator direction, `((|s| - sigma_y)/(2 mu)) s/|s|`, and vanishes
    // identically in the elastic branch. Computing it this way keeps it
    // traceless to relative roundoff even when the step barely yields.
    let (sigma_new, d_eps_plastic, yielded) = if sn <= sigma_y {
        (trial, SymTensor3::ZERO, false)
    } else {
        let gamma = (sn - sigma_y) / stiffness.eig_dev();
        (trial.sph() + s * (sigma_y / sn), s * (gamma / sn), true)
    };
    let dv = 0.5
        * (stiffness.inner_inv(&sigma_new, &sigma_new)
            - stiffness.inner_inv(sigma_old, sigma_old));
    let dq = sigma_new.dot(d_eps) - dv;
    StopIncrement { sigma_new, d_eps_plastic, dv, dq, yielded }
}

/// Support function of the admissible set `Z` (Minkowski functional of its
/// polar): `sigma_y |e|` for traceless `e`, infinite otherwise. The continuous
/// dissipation rate of the stop is `minkowski_polar(dEps_p/dt)`.
pub fn minkowski_polar(e: &SymTensor3, sigma_y: f64) -> f64 {
    let n = e.norm();
    if e.trace().abs() > 1e-10 * n.max(f64::MIN_POSITIVE) {
        f64::INFINITY
    } else {
        sigma_y * n
    }
}

/// Stop state carried at one quadrature point of the tensor-valued model.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PlasticPointState {
    pub sigma: SymTensor3,
    /// Accumulated dissipated heat at this point.
    pub heat: f64,
}

impl PlasticPointState {
    /// Canonical initial state: the projection of `A eps0` onto the
    /// admissible set.
    pub fn from_initial_strain(
        eps0: &SymTensor3,
        stiffness: &IsotropicTensor4,
        sigma_y: f64,
    ) -> Self {
        let inc = stop_step(&SymTensor3::ZERO, eps0, stiffness, sigma_y);
        PlasticPointState { sigma: inc.sigma_new, heat: 0.0 }
    }

    /// Advance by a strain increment, committing stress and heat.
    pub fn step(
        &mut self,
        d_eps: &SymTensor3,
        stiffness: &IsotropicTensor4,
        sigma_y: f64,
    ) -> StopIncrement {
        let inc = stop_step(&self.sigma, d_eps, stiffness, sigma_y);
        self.sigma = inc.sigma_new;
        self.heat += inc.dq;
        inc
    }

    /// Stored energy `<sigma, sigma>/2` of this point.
    pub fn stored_energy(&self, stiffness: &IsotropicTensor4) -> f64 {
        0.5 * stiffness.inner_inv(&self.sigma, &self.sigma)
    }
}

/// Increments of one scalar stop step (uniaxial reduction).
#[derive(Clone, Copy, Debug)]
pub struct ScalarStopIncrement {
    pub sigma_new: f64,
    pub d_eps_plastic: f64,
    pub dv: f64,
    pub dq: f64,
    pub yielded: bool,
}

/// Scalar stop with modulus `a > 0` and yield bound `sigma_y`: the stress is
/// clamped to `[-sigma_y, sigma_y]` after the elastic trial `sigma + a dEps`.
/// Same energy identities as the tensor case with `<x, y> = x y / a`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ScalarStop {
    pub sigma: f64,
    pub heat: f64,
}

impl ScalarStop {
    pub fn from_initial_strain(eps0: f64, a: f64, sigma_y: f64) -> Self {
        ScalarStop { sigma: (a * eps0).clamp(-sigma_y, sigma_y), heat: 0.0 }
    }

    pub fn step(&mut self, d_eps: f64, a: f64, sigma_y: f64) -> ScalarStopIncrement {
        let trial = self.sigma + a * d_eps;
        let sigma_new = trial.clamp(-sigma_y, sigma_y);
        // Closed-form plastic increment: the overshoot past the clamp,
        // exactly zero in the elastic branch.
        let d_eps_plastic = (trial - sigma_new) / a;
        let dv = 0.5 * (sigma_new * sigma_new - self.sigma * self.sigma) / a;
        let dq = sigma_new * d_eps - dv;
        self.sigma = sigma_new;
        self.heat += dq;
        ScalarStopIncrement { sigma_new, d_eps_plastic, dv, dq, yielded: trial != sigma_new }
    }

    pub fn stored_energy(&self, a: f64) -> f64 {
        0.5 * self.sigma * self.sigma / a
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::{Rng, SeedableRng};

    fn rand_tensor(rng: &mut impl Rng, scale: f64) -> SymTensor3 {
        let mut m = [0.0; 6];
        for a in m.iter_mut() {
            *a = rng.gen_range(-scale..scale);
        }
        SymTensor3::from_mandel(m)
    }

    #[test]
    fn scalar_stop_frozen_example() {
        // sigma_old = 0.5, dEps = 1, a = 1, sigma_y = 1:
        // trial 1.5 -> clamp to 1; dEps_p = 0.5; dq = 1*1 - (1 - 0.25)/2 = 0.625.
        let mut s = ScalarStop { sigma: 0.5, heat: 0.0 };
        let inc = s.step(1.0, 1.0, 1.0);
        assert_eq!(inc.sigma_new, 1.0);
        assert_eq!(inc.d_eps_plastic, 0.5);
        assert_eq!(inc.dq, 0.625);
        assert!(inc.yielded);
        assert_eq!(s.heat, 0.625);
    }

    #[test]
    fn tensor_radial_return_frozen_example() {
        // A = identity (lambda = 0, mu = 1/2), sigma_y = 1, from zero stress,
        // dEps = diag(1, -1, 0): trial deviatoric with norm sqrt(2), so the
        // return scales it to the unit ball; dq = sqrt(2) - 1/2.
        let a = IsotropicTensor4::new(0.0, 0.5);
        let d_eps = SymTensor3::diag(1.0, -1.0, 0.0);
        let inc = stop_step(&SymTensor3::ZERO, &d_eps, &a, 1.0);
        let isq = 1.0 / std::f64::consts::SQRT_2;
        assert_relative_eq!(inc.sigma_new.entry(0, 0), isq, epsilon = 1e-15);
        assert_relative_eq!(inc.sigma_new.entry(1, 1), -isq, epsilon = 1e-15);
        assert_relative_eq!(inc.dq, std::f64::consts::SQRT_2 - 0.5, epsilon = 1e-15);
        assert_relative_eq!(
            inc.d_eps_plastic.norm(),
            std::f64::consts::SQRT_2 - 1.0,
            epsilon = 1e-14
        );
        assert!(inc.yielded);
    }

    #[test]
    fn elastic_step_heat_equals_half_metric_square() {
        let a = IsotropicTensor4::new(1.2, 0.7);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let d_eps = rand_tensor(&mut rng, 0.05);
            let inc = stop_step(&SymTensor3::ZERO, &d_eps, &a, 10.0);
            assert!(!inc.yielded);
            let d_sigma = inc.sigma_new;
            let half = 0.5 * a.inner_inv(&d_sigma, &d_sigma);
            assert_relative_eq!(inc.dq, half, epsilon = 1e-12);
            assert_abs_diff_eq!(inc.d_eps_plastic.norm(), 0.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn plastic_flow_preserves_volume_and_dissipates() {
        let a = IsotropicTensor4::new(1.0, 1.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        let mut state = PlasticPointState::default();
        for _ in 0..500 {
            let d_eps = rand_tensor(&mut rng, 0.8);
            let before = state.sigma;
            let inc = state.step(&d_eps, &a, 1.0);
            // Constraint.
            assert!(inc.sigma_new.dev().norm() <= 1.0 + 1e-12);
            // Volume preservation of the plastic part.
            assert!(
                inc.d_eps_plastic.trace().abs() <= 1e-12 * inc.d_eps_plastic.norm().max(1e-300)
            );
            // Projection inequality.
            let d_sigma = inc.sigma_new - before;
            assert!(inc.dq >= 0.5 * a.inner_inv(&d_sigma, &d_sigma) - 1e-12);
            // Nonexpansivity of the stop in the metric norm:
            // ||dSigma||_{A^{-1}} <= ||dEps||_A.
            let lhs = a.inner_inv(&d_sigma, &d_sigma);
            let rhs = a.inner(&d_eps, &d_eps);
            assert!(lhs <= rhs * (1.0 + 1e-12));
        }
        assert!(state.heat > 0.0);
    }

    #[test]
    fn monotone_ramp_heat_matches_continuous_dissipation() {
        // Proportional deviatoric loading eps(t) = t * E with |E| = 1,
        // A = 2 mu = 1 on deviators: yield at t* = sigma_y; afterwards the
        // stress sits on the surface and dissipates at rate sigma_y exactly.
        // The discrete heat is sigma_y (T - t*) + mu dt t* (elastic ramp
        // contributes half-squares): first-order convergence with a known
        // constant.
        let a = IsotropicTensor4::new(0.0, 0.5);
        let e = SymTensor3::diag(1.0, -1.0, 0.0) * (1.0 / std::f64::consts::SQRT_2);
        let sigma_y = 0.4;
        let t_end = 1.0;
        let exact = sigma_y * (t_end - sigma_y);
        let mut errs = Vec::new();
        for n in [100usize, 200, 400] {
            let dt = t_end / n as f64;
            let mut state = PlasticPointState::default();
            for _ in 0..n {
                state.step(&(e * dt), &a, sigma_y);
            }
            errs.push((state.heat - exact).abs());
        }
        let order = (errs[0] / errs[2]).log2() / 2.0;
        assert!(order > 0.9, "observed order {order}, errors {errs:?}");
    }

    #[test]
    fn minkowski_polar_on_deviatoric_and_volumetric_inputs() {
        let e = SymTensor3::diag(2.0, -1.0, -1.0);
        assert_relative_eq!(minkowski_polar(&e, 0.5), 0.5 * e.norm(), epsilon = 1e-14);
        let v = SymTensor3::identity();
        assert!(minkowski_polar(&v, 0.5).is_infinite());
        assert_eq!(minkowski_polar(&SymTensor3::ZERO, 0.5), 0.0);
    }

    #[test]
    fn canonical_initial_state_projects() {
        let a = IsotropicTensor4::new(0.0, 0.5);
        let eps0 = SymTensor3::diag(3.0, -3.0, 0.0);
        let st = PlasticPointState::from_initial_strain(&eps0, &a, 1.0);
        assert_relative_eq!(st.sigma.dev().norm(), 1.0, epsilon = 1e-14);
        // Already-admissible initial strain passes through.
        let small = SymTensor3::diag(0.1, -0.1, 0.0);
        let st2 = PlasticPointState::from_initial_strain(&small, &a, 1.0);
        assert_relative_eq!(st2.sigma.norm(), small.norm(), epsilon = 1e-14);
    }

    #[test]
    fn scalar_stop_matches_tensor_stop_on_uniaxial_paths() {
        // A tensor path that stays proportional to a fixed deviator reduces
        // to the scalar stop with modulus 2 mu and the same yield bound.
        let mu = 0.7;
        let a = IsotropicTensor4::new(0.0, mu);
        let dir = SymTensor3::diag(1.0, -1.0, 0.0) * (1.0 / std::f64::consts::SQRT_2);
        let sigma_y = 0.9;
        let mut tensor = PlasticPointState::default();
        let mut scalar = ScalarStop::default();
        for &de in &[0.5, 0.3, -1.2, 0.8, -0.1, 2.0, -2.5] {
            let ti = tensor.step(&(dir * de), &a, sigma_y);
            let si = scalar.step(de, 2.0 * mu, sigma_y);
            assert_relative_eq!(ti.sigma_new.dot(&dir), si.sigma_new, epsilon = 1e-12);
            assert_relative_eq!(ti.dq, si.dq, epsilon = 1e-12);
            assert_relative_eq!(ti.dv, si.dv, epsilon = 1e-12);
        }
    }

    #[test]
    fn scalar_stop_energy_inequality_and_sign() {
        let mut s = ScalarStop::default();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let de = rng.gen_range(-1.5..1.5);
            let before = s.sigma;
            let inc = s.step(de, 2.0, 1.0);
            let d_sigma = inc.sigma_new - before;
            assert!(inc.dq >= 0.5 * d_sigma * d_sigma / 2.0 - 1e-12);
            assert!(inc.sigma_new.abs() <= 1.0);
        }
    }
}
