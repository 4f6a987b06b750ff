//! 1D spectral Galerkin discretization on the unit interval.
//!
//! Displacements use the Dirichlet eigenbasis of the viscous operator,
//! `e_k(x) = sqrt(2) sin(k pi x)`; scalars use the Neumann basis
//! `w_0 = 1`, `w_j(x) = sqrt(2) cos(j pi x)`. In 1D the isotropic fourth-order
//! tensors reduce to the uniaxial moduli `2 mu + lambda` (stiffnesses) and
//! `2 eta + omega` (viscosity), and strain, divergence, and displacement
//! gradient coincide.
//!
//! All forms except the acceleration regularization are assembled by the
//! *same* Gauss–Legendre rule that samples the nonlinearities, so the energy
//! audit identities hold to roundoff. The rule starts at `2 n + 2` points and
//! is escalated until the assembled mass and stiffness matrices of both bases
//! match their analytic (orthogonality) values to 1e-13 — trigonometric
//! integrands are not polynomials, so no fixed rule is exact and the escalation
//! is checked, not assumed. The regularization matrix is the exact diagonal
//! `(b k^2 pi^2)^2` of the squared viscous eigenvalues.

use nalgebra::{DMatrix, DVector};

use crate::constitutive::MaterialParams;
use crate::quadrature::GaussRule;

use super::{Forms, QuadTables};

#[derive(Clone)]
pub struct SpectralDisc {
    /// Number of displacement modes; scalars carry one more (the constant).
    pub n_modes: usize,
    pub tables: QuadTables,
    pub forms: Forms,
    /// Size of the escalated quadrature rule actually used.
    pub rule_len: usize,
}

const PI: f64 = std::f64::consts::PI;
const SQRT2: f64 = std::f64::consts::SQRT_2;

fn scalar_mode(j: usize, x: f64) -> f64 {
    if j == 0 {
        1.0
    } else {
        SQRT2 * (j as f64 * PI * x).cos()
    }
}

fn scalar_mode_dx(j: usize, x: f64) -> f64 {
    if j == 0 {
        0.0
    } else {
        -SQRT2 * j as f64 * PI * (j as f64 * PI * x).sin()
    }
}

fn u_mode_dx(k: usize, x: f64) -> f64 {
    SQRT2 * k as f64 * PI * (k as f64 * PI * x).cos()
}

fn u_mode(k: usize, x: f64) -> f64 {
    SQRT2 * (k as f64 * PI * x).sin()
}

/// Worst deviation of the assembled mass/stiffness entries from their
/// analytic values under the given rule.
fn rule_defect(rule: &GaussRule, n: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..=n {
        for j in i..=n {
            let mut m: f64 = 0.0;
            let mut k: f64 = 0.0;
            let mut mu: f64 = 0.0;
            let mut ku: f64 = 0.0;
            for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
                m += w * scalar_mode(i, x) * scalar_mode(j, x);
                k += w * scalar_mode_dx(i, x) * scalar_mode_dx(j, x);
                if i >= 1 && j >= 1 {
                    mu += w * u_mode(i, x) * u_mode(j, x);
                    ku += w * u_mode_dx(i, x) * u_mode_dx(j, x);
                }
            }
            let delta = if i == j { 1.0 } else { 0.0 };
            let jj = (j as f64 * PI).powi(2);
            worst = worst.max((m - delta).abs());
            worst = worst.max((k - delta * jj).abs() / jj.max(1.0));
            if i >= 1 && j >= 1 {
                worst = worst.max((mu - delta).abs());
                worst = worst.max((ku - delta * jj).abs() / jj.max(1.0));
            }
        }
    }
    worst
}

impl SpectralDisc {
    pub fn new(n_modes: usize, mp: &MaterialParams) -> Self {
        assert!(n_modes >= 1, "need at least one displacement mode");
        let n = n_modes;
        // Escalate the quadrature until the basis orthogonality is resolved.
        let mut m = 2 * n + 2;
        let rule = loop {
            let rule = GaussRule::gauss_legendre(m);
            if rule_defect(&rule, n) < 1e-13 {
                break rule;
            }
            m *= 2;
            assert!(m <= 1 << 15, "quadrature escalation runaway");
        };

        let a_e = 2.0 * mp.mu_e + mp.lambda_e;
        let a_p = 2.0 * mp.mu_p + mp.lambda_p;
        let b = 2.0 * mp.eta + mp.omega;

        // Quadrature tables.
        let nq = rule.len();
        let mut wq = Vec::with_capacity(nq);
        let mut xq = Vec::with_capacity(nq);
        let mut eval = Vec::with_capacity(nq);
        let mut grad = Vec::with_capacity(nq);
        let mut div = Vec::with_capacity(nq);
        for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
            wq.push(w);
            xq.push([x, 0.0]);
            eval.push((0..=n).map(|j| (j, scalar_mode(j, x))).collect());
            grad.push(
                (1..=n)
                    .map(|j| (j, [scalar_mode_dx(j, x), 0.0]))
                    .collect(),
            );
            div.push((1..=n).map(|k| (k - 1, u_mode_dx(k, x))).collect());
        }
        let strain_s = div.clone();
        let tables = QuadTables {
            wq,
            xq,
            eval,
            grad,
            div,
            strain_s,
            strain_t: Vec::new(),
        };

        // Displacement forms by quadrature.
        let mut mass_u = DMatrix::zeros(n, n);
        let mut grad_u = DMatrix::zeros(n, n);
        let mut load_g = DVector::zeros(n);
        for (q, &w) in tables.wq.iter().enumerate() {
            let x = tables.xq[q][0];
            for k in 1..=n {
                load_g[k - 1] += w * u_mode(k, x);
                for l in k..=n {
                    let mm = w * u_mode(k, x) * u_mode(l, x);
                    let kk = w * u_mode_dx(k, x) * u_mode_dx(l, x);
                    mass_u[(k - 1, l - 1)] += mm;
                    grad_u[(k - 1, l - 1)] += kk;
                    if l != k {
                        mass_u[(l - 1, k - 1)] += mm;
                        grad_u[(l - 1, k - 1)] += kk;
                    }
                }
            }
        }
        let visc = &grad_u * b;
        let stiff_e = &grad_u * a_e;
        let stiff_p = &grad_u * a_p;
        // Exact eigen-diagonal of the squared viscous operator.
        let mut damp = DMatrix::zeros(n, n);
        for k in 1..=n {
            let lk = b * (k as f64 * PI).powi(2);
            damp[(k - 1, k - 1)] = lk * lk;
        }

        // Scalar forms.
        let n_s = n + 1;
        let mass_s = tables.scalar_mass(n_s);
        let mass_s_theta = mass_s.clone();
        let mut robin_p = DMatrix::zeros(n_s, n_s);
        let mut robin_p_load = DVector::zeros(n_s);
        let mut robin_t = DMatrix::zeros(n_s, n_s);
        let mut robin_t_load = DVector::zeros(n_s);
        let at0: Vec<f64> = (0..=n).map(|j| scalar_mode(j, 0.0)).collect();
        let at1: Vec<f64> = (0..=n).map(|j| scalar_mode(j, 1.0)).collect();
        for i in 0..n_s {
            robin_p_load[i] = mp.gamma_p * (at0[i] + at1[i]);
            robin_t_load[i] = mp.gamma_theta * (at0[i] + at1[i]);
            for j in 0..n_s {
                let s = at0[i] * at0[j] + at1[i] * at1[j];
                robin_p[(i, j)] = mp.gamma_p * s;
                robin_t[(i, j)] = mp.gamma_theta * s;
            }
        }

        let stiff_s_unit = tables.weighted_scalar_stiffness(&vec![1.0; tables.n_quad()], n_s);
        let mut ones_s = DVector::zeros(n_s);
        ones_s[0] = 1.0;

        let forms = Forms {
            mass_u,
            visc,
            damp,
            stiff_e,
            stiff_p,
            mass_s,
            mass_s_theta,
            robin_p,
            robin_p_load,
            robin_t,
            robin_t_load,
            load_g,
            stiff_s_unit,
            ones_s,
            visc_min_eigen: b * PI * PI,
            domain_measure: 1.0,
        };

        SpectralDisc { n_modes: n, tables, forms, rule_len: rule.len() }
    }

    /// Evaluate a scalar dof vector as a function of `x`.
    pub fn eval_scalar(&self, v: &DVector<f64>, x: f64) -> f64 {
        (0..v.len()).map(|j| v[j] * scalar_mode(j, x)).sum()
    }

    /// Evaluate a displacement dof vector as a function of `x`.
    pub fn eval_u(&self, u: &DVector<f64>, x: f64) -> f64 {
        (0..u.len()).map(|k| u[k] * u_mode(k + 1, x)).sum()
    }

    /// Zero-pad or truncate modal coefficients to a different mode count;
    /// exact because the modes are nested.
    pub fn pad_scalar(v: &DVector<f64>, n_modes_to: usize) -> DVector<f64> {
        let mut out = DVector::zeros(n_modes_to + 1);
        for j in 0..v.len().min(n_modes_to + 1) {
            out[j] = v[j];
        }
        out
    }
}
