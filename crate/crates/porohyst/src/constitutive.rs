//! Concrete material laws and the parameter validator.
//!
//! The solver's well-posedness rests on a set of structural hypotheses that
//! this module makes checkable. They are labeled once here and cited by the
//! validator when violated:
//!
//! * **h1 (preamble)** — positive densities `rho_s`, `rho_l`, heat capacity
//!   `c0 > 0`, viscosity moduli `eta > 0`, `omega > 0`, temperature floor
//!   `theta_bar > 0` with boundary datum `theta_star >= theta_bar`, Robin
//!   coefficients `gamma_p, gamma_theta >= 0` with `gamma_p` not identically
//!   zero.
//! * **h1 (i)** — the mobility is a smooth function with band
//!   `0 < mu0 < mu1`; its primitive `M` is then bi-Lipschitz.
//! * **h1 (ii)** — the heat conductivity is smooth, positive at zero, and
//!   grows between `theta^(1+a)` and `theta^(1+b)` for declared exponents
//!   `0 < a < b < 27/5 + (12/5) a`.
//! * **h1 (iii)** — the saturation curve `f` maps into `(0, f1)` and
//!   satisfies `0 < f2 <= f'(p) (1 + p^2) <= f3`; the memory cutoff `K`
//!   dominates the boundary pressure datum.
//! * **h1 (iv)** — the elastic and plastic stiffness tensors are isotropic
//!   positive definite and the yield radius is positive.
//! * **h2** — the hysteresis density is bounded, compactly supported in both
//!   arguments, and its slice mass `C_rho` and envelope mass `C_rho_star`
//!   are finite.
//!
//! Every law is pluggable: the solver consumes the traits below, and the
//! defaults are closed-form families whose primitives are exact.

use std::sync::Arc;

use thiserror::Error;

use crate::hysteresis::Density;

/// A violated structural hypothesis, named by clause.
#[derive(Debug, Error)]
pub enum ConstitutiveError {
    #[error("Hypothesis {clause} violated: {detail}")]
    Hypothesis { clause: &'static str, detail: String },
}

fn violated(clause: &'static str, detail: String) -> ConstitutiveError {
    ConstitutiveError::Hypothesis { clause, detail }
}

/// All scalar material coefficients of the coupled model.
///
/// Field names mirror the configuration keys (section `material.`).
#[derive(Clone, Debug)]
pub struct MaterialParams {
    /// Solid skeleton mass density.
    pub rho_s: f64,
    /// Liquid mass density.
    pub rho_l: f64,
    /// Volumetric heat capacity.
    pub c0: f64,
    /// Thermal expansion coupling coefficient.
    pub beta: f64,
    /// Reference temperature offset in the pressure/stress coupling; enters
    /// only through a constant prestress.
    pub theta_c: f64,
    /// Shear viscosity modulus of the Kelvin–Voigt tensor `B eps = 2 eta eps
    /// + omega tr(eps) I`.
    pub eta: f64,
    /// Volumetric viscosity modulus of the Kelvin–Voigt tensor.
    pub omega: f64,
    /// Lower mobility bound.
    pub mu0: f64,
    /// Upper mobility bound.
    pub mu1: f64,
    /// Constant part of the heat conductivity.
    pub kappa0: f64,
    /// Coefficient of the growing part of the heat conductivity.
    pub kappa1: f64,
    /// Growth exponent of the conductivity: `kappa ~ theta^(1 + a_kappa)`.
    pub a_kappa: f64,
    /// Declared lower growth exponent `a` (must satisfy `a < a_kappa`).
    pub growth_a: f64,
    /// Declared upper growth exponent `b` (must satisfy `a_kappa <= b`).
    pub growth_b: f64,
    /// Saturation ceiling: `f` maps into `(0, f1)`.
    pub f1: f64,
    /// Lower bound on `f'(p) (1 + p^2)`.
    pub f2: f64,
    /// Upper bound on `f'(p) (1 + p^2)`.
    pub f3: f64,
    /// Yield radius of the von Mises surface.
    pub sigma_y: f64,
    /// Lamé coefficients of the elastic stiffness.
    pub lambda_e: f64,
    pub mu_e: f64,
    /// Lamé coefficients of the plastic (hardening) stiffness.
    pub lambda_p: f64,
    pub mu_p: f64,
    /// Hysteresis density plateau height.
    pub rho_hat: f64,
    /// Hysteresis density support radius in the threshold variable.
    pub r_hat: f64,
    /// Hysteresis density support half-width in the state variable.
    pub v_hat: f64,
    /// Memory cutoff: initial memory vanishes beyond `K`, and `K` dominates
    /// the boundary pressure amplitude.
    pub k_mem: f64,
    /// Temperature floor: initial and boundary temperatures stay above it.
    pub theta_bar: f64,
    /// Boundary pressure datum amplitude (the drive shape scales it).
    pub p_star: f64,
    /// Boundary temperature datum.
    pub theta_star: f64,
    /// Robin exchange coefficient of the pressure boundary condition.
    pub gamma_p: f64,
    /// Robin exchange coefficient of the temperature boundary condition.
    pub gamma_theta: f64,
    /// Constant body force density on the displacement equation.
    pub g: f64,
}

impl Default for MaterialParams {
    fn default() -> Self {
        MaterialParams {
            rho_s: 1.0,
            rho_l: 1.0,
            c0: 1.0,
            beta: 0.5,
            theta_c: 0.0,
            eta: 1.0,
            omega: 1.0,
            mu0: 1.0,
            mu1: 2.0,
            kappa0: 1.0,
            kappa1: 1.0,
            a_kappa: 0.5,
            growth_a: 0.4,
            growth_b: 0.6,
            f1: 1.0,
            f2: 1.0 / std::f64::consts::PI,
            f3: 1.0 / std::f64::consts::PI,
            sigma_y: 1.0,
            lambda_e: 1.0,
            mu_e: 1.0,
            lambda_p: 1.0,
            mu_p: 1.0,
            rho_hat: 1.0,
            r_hat: 1.0,
            v_hat: 1.0,
            k_mem: 2.0,
            theta_bar: 1.0,
            p_star: 0.5,
            theta_star: 1.0,
            gamma_p: 1.0,
            gamma_theta: 1.0,
            g: 0.0,
        }
    }
}

impl MaterialParams {
    /// Check every structural hypothesis, failing fast with the violated
    /// clause named. `drive_sup` is the supremum of the boundary pressure
    /// drive over the run (the configured amplitude when no drive shape is
    /// known yet).
    pub fn validate(&self, drive_sup: f64) -> Result<(), ConstitutiveError> {
        let pos = |clause: &'static str, name: &str, v: f64| -> Result<(), ConstitutiveError> {
            if v > 0.0 {
                Ok(())
            } else {
                Err(violated(clause, format!("{name} must be positive, got {v}")))
            }
        };
        // Preamble constants.
        pos("h1", "rho_s", self.rho_s)?;
        pos("h1", "rho_l", self.rho_l)?;
        pos("h1", "c0", self.c0)?;
        pos("h1", "eta", self.eta)?;
        pos("h1", "omega", self.omega)?;
        pos("h1", "theta_bar", self.theta_bar)?;
        if self.theta_star < self.theta_bar {
            return Err(violated(
                "h1",
                format!(
                    "boundary temperature theta_star = {} must dominate the floor theta_bar = {}",
                    self.theta_star, self.theta_bar
                ),
            ));
        }
        if self.gamma_p < 0.0 || self.gamma_theta < 0.0 {
            return Err(violated(
                "h1",
                format!(
                    "Robin coefficients must be nonnegative, got gamma_p = {}, gamma_theta = {}",
                    self.gamma_p, self.gamma_theta
                ),
            ));
        }
        if self.gamma_p == 0.0 {
            return Err(violated(
                "h1",
                "gamma_p must not vanish identically (the pressure needs a boundary anchor)"
                    .to_string(),
            ));
        }
        // (i) mobility band.
        if !(self.mu0 > 0.0 && self.mu0 < self.mu1) {
            return Err(violated(
                "h1 (i)",
                format!(
                    "mobility band must satisfy 0 < mu0 < mu1, got mu0 = {}, mu1 = {}",
                    self.mu0, self.mu1
                ),
            ));
        }
        // (ii) conductivity growth.
        pos("h1 (ii)", "kappa0", self.kappa0)?;
        pos("h1 (ii)", "kappa1", self.kappa1)?;
        let (a, b) = (self.growth_a, self.growth_b);
        if !(0.0 < a && a < b && b < 27.0 / 5.0 + 12.0 / 5.0 * a) {
            return Err(violated(
                "h1 (ii)",
                format!(
                    "growth exponents must satisfy 0 < a < b < 27/5 + (12/5) a, got a = {a}, b = {b}"
                ),
            ));
        }
        if !(a < self.a_kappa && self.a_kappa <= b) {
            return Err(violated(
                "h1 (ii)",
                format!(
                    "conductivity exponent must lie in the declared bracket a < a_kappa <= b, \
                     got a = {a}, a_kappa = {}, b = {b}",
                    self.a_kappa
                ),
            ));
        }
        // (iii) saturation curve and memory cutoff.
        pos("h1 (iii)", "f1", self.f1)?;
        if !(0.0 < self.f2 && self.f2 <= self.f3) {
            return Err(violated(
                "h1 (iii)",
                format!(
                    "saturation slope bounds must satisfy 0 < f2 <= f3, got f2 = {}, f3 = {}",
                    self.f2, self.f3
                ),
            ));
        }
        let slope = self.f1 / std::f64::consts::PI;
        if !(self.f2 <= slope * (1.0 + 1e-12) && slope <= self.f3 * (1.0 + 1e-12)) {
            return Err(violated(
                "h1 (iii)",
                format!(
                    "the default saturation law has f'(p)(1+p^2) = f1/pi = {slope}; the declared \
                     bounds [{}, {}] must bracket it",
                    self.f2, self.f3
                ),
            ));
        }
        if self.k_mem < drive_sup.abs() {
            return Err(violated(
                "h1 (iii)",
                format!(
                    "memory cutoff K = {} must dominate the boundary pressure amplitude {}",
                    self.k_mem, drive_sup.abs()
                ),
            ));
        }
        // (iv) stiffness tensors and yield radius.
        for (name, lambda, mu) in [
            ("elastic", self.lambda_e, self.mu_e),
            ("plastic", self.lambda_p, self.mu_p),
        ] {
            if !(mu > 0.0 && 2.0 * mu + 3.0 * lambda > 0.0) {
                return Err(violated(
                    "h1 (iv)",
                    format!(
                        "{name} stiffness must be positive definite: mu > 0 and 2 mu + 3 lambda > 0, \
                         got lambda = {lambda}, mu = {mu}"
                    ),
                ));
            }
        }
        pos("h1 (iv)", "sigma_y", self.sigma_y)?;
        // h2 density support.
        pos("h2", "rho_hat", self.rho_hat)?;
        pos("h2", "r_hat", self.r_hat)?;
        pos("h2", "v_hat", self.v_hat)?;
        Ok(())
    }
}

/// Pressure-dependent mobility with exact primitive and safeguarded inverse.
pub trait Mobility: Send + Sync {
    fn mu(&self, p: f64) -> f64;
    /// `M(p) = int_0^p mu`.
    fn primitive(&self, p: f64) -> f64;
    /// The mobility band `[mu0, mu1]`.
    fn band(&self) -> (f64, f64);
    /// Invert `M` by safeguarded Newton (bisection fallback) to 1e-12.
    fn inverse_primitive(&self, m: f64) -> f64 {
        let (mu0, mu1) = self.band();
        let (mut lo, mut hi) = if m >= 0.0 { (m / mu1, m / mu0) } else { (m / mu0, m / mu1) };
        let mut p = 0.5 * (lo + hi);
        for _ in 0..200 {
            let res = self.primitive(p) - m;
            if res.abs() <= 1e-12 * (1.0 + m.abs()) {
                return p;
            }
            if res > 0.0 {
                hi = p;
            } else {
                lo = p;
            }
            let newton = p - res / self.mu(p);
            p = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        }
        p
    }
}

/// Default mobility `mu(p) = mu0 + (mu1 - mu0) / (1 + p^2)`.
#[derive(Clone, Copy, Debug)]
pub struct RationalMobility {
    pub mu0: f64,
    pub mu1: f64,
}

impl Mobility for RationalMobility {
    fn mu(&self, p: f64) -> f64 {
        self.mu0 + (self.mu1 - self.mu0) / (1.0 + p * p)
    }

    fn primitive(&self, p: f64) -> f64 {
        self.mu0 * p + (self.mu1 - self.mu0) * p.atan()
    }

    fn band(&self) -> (f64, f64) {
        (self.mu0, self.mu1)
    }
}

/// Temperature-dependent heat conductivity.
pub trait Conductivity: Send + Sync {
    fn kappa(&self, theta: f64) -> f64;
}

/// Default conductivity `kappa(theta) = kappa0 + kappa1 (1 + theta^2)^((1 + a_kappa)/2)`,
/// which grows like `theta^(1 + a_kappa)`.
#[derive(Clone, Copy, Debug)]
pub struct PowerConductivity {
    pub kappa0: f64,
    pub kappa1: f64,
    pub a_kappa: f64,
}

impl Conductivity for PowerConductivity {
    fn kappa(&self, theta: f64) -> f64 {
        self.kappa0 + self.kappa1 * (1.0 + theta * theta).powf(0.5 * (1.0 + self.a_kappa))
    }
}

/// Saturation-like bounded increasing curve with its dual potential.
pub trait Saturation: Send + Sync {
    fn f(&self, p: f64) -> f64;
    fn df(&self, p: f64) -> f64;
    /// Dual potential `V_f(p) = int_0^p v f'(v) dv`; the per-step convexity
    /// defect `(f(p_new) - f(p_old)) p_new - (V_f(p_new) - V_f(p_old))` is
    /// nonnegative and feeds the energy audit.
    fn dual_potential(&self, p: f64) -> f64;
    /// The ceiling `f1` with range `(0, f1)`.
    fn ceiling(&self) -> f64;
}

/// Default saturation `f(p) = (f1/pi) (arctan p + pi/2)`, for which
/// `f'(p) (1 + p^2) = f1/pi` exactly.
#[derive(Clone, Copy, Debug)]
pub struct ArctanSaturation {
    pub f1: f64,
}

impl Saturation for ArctanSaturation {
    fn f(&self, p: f64) -> f64 {
        self.f1 / std::f64::consts::PI * (p.atan() + std::f64::consts::FRAC_PI_2)
    }

    fn df(&self, p: f64) -> f64 {
        self.f1 / (std::f64::consts::PI * (1.0 + p * p))
    }

    fn dual_potential(&self, p: f64) -> f64 {
        0.5 * self.f1 / std::f64::consts::PI * (1.0 + p * p).ln()
    }

    fn ceiling(&self) -> f64 {
        self.f1
    }
}

/// Inner truncation `Q_R(z) = max{0, min{z, R}}`.
pub fn q_cut(z: f64, r: f64) -> f64 {
    z.clamp(0.0, r)
}

/// Outer cutoff `K_R(z) = max{z - R, min{0, z + R}}`: identically zero on
/// `[-R, R]`, slope one outside.
pub fn k_cut(z: f64, r: f64) -> f64 {
    (z - r).max((z + r).min(0.0))
}

/// Dual potential of the outer cutoff, `int_0^z K_R'(s) s ds`, in closed
/// form: `(z^2 - R^2)/2` outside `[-R, R]`, zero inside.
pub fn k_cut_dual(z: f64, r: f64) -> f64 {
    if z.abs() > r {
        0.5 * (z * z - r * r)
    } else {
        0.0
    }
}

/// Box density `rho(r, v) = rho_hat` on `(0, r_hat] x [-v_hat, v_hat]`, with
/// exact closed-form primitives.
#[derive(Clone, Copy, Debug)]
pub struct UniformDensity {
    rho_hat: f64,
    r_hat: f64,
    v_hat: f64,
}

impl UniformDensity {
    pub fn new(rho_hat: f64, r_hat: f64, v_hat: f64) -> Self {
        assert!(rho_hat > 0.0 && r_hat > 0.0 && v_hat > 0.0);
        UniformDensity { rho_hat, r_hat, v_hat }
    }

    pub fn from_params(p: &MaterialParams) -> Self {
        UniformDensity::new(p.rho_hat, p.r_hat, p.v_hat)
    }
}

impl Density for UniformDensity {
    fn rho(&self, r: f64, v: f64) -> f64 {
        if r <= self.r_hat && v.abs() <= self.v_hat {
            self.rho_hat
        } else {
            0.0
        }
    }

    fn envelope(&self, r: f64) -> f64 {
        if r <= self.r_hat {
            self.rho_hat
        } else {
            0.0
        }
    }

    fn c_rho(&self) -> f64 {
        2.0 * self.rho_hat * self.r_hat * self.v_hat
    }

    fn c_rho_star(&self) -> f64 {
        self.rho_hat * self.r_hat
    }

    fn support_radius(&self) -> f64 {
        self.r_hat
    }

    fn primitive(&self, r: f64, v: f64) -> f64 {
        if r <= self.r_hat {
            self.rho_hat * v.clamp(-self.v_hat, self.v_hat)
        } else {
            0.0
        }
    }

    fn moment_primitive(&self, r: f64, v: f64) -> f64 {
        if r <= self.r_hat {
            let w = v.abs().min(self.v_hat);
            0.5 * self.rho_hat * w * w
        } else {
            0.0
        }
    }
}

/// The complete pluggable law set consumed by the solver.
#[derive(Clone)]
pub struct ConstitutiveSet {
    pub params: MaterialParams,
    pub mobility: Arc<dyn Mobility>,
    pub conductivity: Arc<dyn Conductivity>,
    pub saturation: Arc<dyn Saturation>,
    pub density: Arc<dyn Density>,
}

impl ConstitutiveSet {
    /// Bundle the default laws for a validated parameter set. `drive_sup` is
    /// the supremum of the boundary pressure drive (see
    /// [`MaterialParams::validate`]).
    pub fn from_params(params: MaterialParams, drive_sup: f64) -> Result<Self, ConstitutiveError> {
        params.validate(drive_sup)?;
        let mobility = Arc::new(RationalMobility { mu0: params.mu0, mu1: params.mu1 });
        let conductivity = Arc::new(PowerConductivity {
            kappa0: params.kappa0,
            kappa1: params.kappa1,
            a_kappa: params.a_kappa,
        });
        let saturation = Arc::new(ArctanSaturation { f1: params.f1 });
        let density = Arc::new(UniformDensity::from_params(&params));
        Ok(ConstitutiveSet { params, mobility, conductivity, saturation, density })
    }
}
