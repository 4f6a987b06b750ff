//! Space discretizations: a 1D spectral Galerkin basis and a 2D bilinear
//! finite element mesh, behind one quadrature-point-centric interface.
//!
//! The staggered solver never touches basis functions directly. Every
//! nonlinear term is sampled at quadrature points, combined pointwise, and
//! scattered back against test functions with the *same* weights used to
//! assemble the bilinear forms. That shared quadrature is what makes the
//! discrete energy audit close to solver precision: identities like
//! `w' K_B w = sum_q wq B eps(w):eps(w)` hold by construction (up to
//! roundoff), so every joule the viscous form removes from the momentum
//! equation reappears verbatim as a heat source.
//!
//! Assembled once per run:
//!
//! * displacement forms — mass, viscous stiffness `K_B`, acceleration
//!   regularization `D_B = K_B M_L^{-1} K_B` (the discrete counterpart of the
//!   squared second-order viscous operator), elastic and plastic-branch
//!   stiffnesses;
//! * scalar forms — consistent pressure mass, temperature mass (lumped on the
//!   mesh backend), Robin boundary matrices and load vectors for pressure and
//!   temperature;
//! * quadrature tables — values, gradients, divergences, and strains of all
//!   basis functions at every quadrature point, stored sparsely per point.
//!
//! Assembled per step from the tables: mobility- and conductivity-weighted
//! stiffness matrices with coefficients frozen at the previous iterate.

mod fem2d;
mod spectral;

pub use fem2d::FemDisc;
pub use spectral::SpectralDisc;

use nalgebra::{DMatrix, DVector};

use crate::plasticity::SymTensor3;

/// Sparse per-quadrature-point samples of all basis functions.
///
/// Entry lists hold `(dof index, sample)` pairs; mesh backends keep only the
/// handful of local shape functions, the spectral backend keeps every mode.
#[derive(Clone)]
pub struct QuadTables {
    /// Quadrature weights (already including all Jacobians).
    pub wq: Vec<f64>,
    /// Physical coordinates of the points ([x, 0] in 1D).
    pub xq: Vec<[f64; 2]>,
    /// Scalar basis values per point.
    pub eval: Vec<Vec<(usize, f64)>>,
    /// Scalar basis gradients per point ([d/dx, 0] in 1D).
    pub grad: Vec<Vec<(usize, [f64; 2])>>,
    /// Divergence of the displacement basis per point.
    pub div: Vec<Vec<(usize, f64)>>,
    /// Scalar (uniaxial) strain of the displacement basis, 1D backend only.
    pub strain_s: Vec<Vec<(usize, f64)>>,
    /// Mandel strain of the displacement basis, 2D backend only.
    pub strain_t: Vec<Vec<(usize, [f64; 6])>>,
}

impl QuadTables {
    pub fn n_quad(&self) -> usize {
        self.wq.len()
    }

    /// Scalar field values at all quadrature points.
    pub fn scalar_at_qp(&self, v: &DVector<f64>) -> Vec<f64> {
        self.eval
            .iter()
            .map(|row| row.iter().map(|&(i, s)| s * v[i]).sum())
            .collect()
    }

    /// Scalar field gradients at all quadrature points.
    pub fn grad_at_qp(&self, v: &DVector<f64>) -> Vec<[f64; 2]> {
        self.grad
            .iter()
            .map(|row| {
                let mut g = [0.0, 0.0];
                for &(i, gi) in row {
                    g[0] += gi[0] * v[i];
                    g[1] += gi[1] * v[i];
                }
                g
            })
            .collect()
    }

    /// Divergence of a displacement field at all quadrature points.
    pub fn div_at_qp(&self, u: &DVector<f64>) -> Vec<f64> {
        self.div
            .iter()
            .map(|row| row.iter().map(|&(i, s)| s * u[i]).sum())
            .collect()
    }

    /// Uniaxial strains at all quadrature points (1D backend).
    pub fn strain_scalar_at_qp(&self, u: &DVector<f64>) -> Vec<f64> {
        self.strain_s
            .iter()
            .map(|row| row.iter().map(|&(i, s)| s * u[i]).sum())
            .collect()
    }

    /// Tensor strains at all quadrature points (2D backend).
    pub fn strain_tensor_at_qp(&self, u: &DVector<f64>) -> Vec<SymTensor3> {
        self.strain_t
            .iter()
            .map(|row| {
                let mut m = [0.0; 6];
                for &(i, ref em) in row {
                    for (a, b) in m.iter_mut().zip(em) {
                        *a += b * u[i];
                    }
                }
                SymTensor3::from_mandel(m)
            })
            .collect()
    }

    /// Weighted scatter against the scalar basis:
    /// `out_i = sum_q wq[q] vals[q] psi_i(x_q)`.
    pub fn scatter_scalar(&self, vals: &[f64], n_s: usize) -> DVector<f64> {
        let mut out = DVector::zeros(n_s);
        for (q, row) in self.eval.iter().enumerate() {
            let c = self.wq[q] * vals[q];
            for &(i, s) in row {
                out[i] += c * s;
            }
        }
        out
    }

    /// Weighted scatter against divergences of the displacement basis:
    /// `out_i = sum_q wq[q] vals[q] div phi_i(x_q)`.
    pub fn scatter_div(&self, vals: &[f64], n_u: usize) -> DVector<f64> {
        let mut out = DVector::zeros(n_u);
        for (q, row) in self.div.iter().enumerate() {
            let c = self.wq[q] * vals[q];
            for &(i, s) in row {
                out[i] += c * s;
            }
        }
        out
    }

    /// Internal force of a scalar (uniaxial) stress field:
    /// `out_i = sum_q wq[q] sigma[q] eps(phi_i)(x_q)`.
    pub fn scatter_stress_scalar(&self, sigma: &[f64], n_u: usize) -> DVector<f64> {
        let mut out = DVector::zeros(n_u);
        for (q, row) in self.strain_s.iter().enumerate() {
            let c = self.wq[q] * sigma[q];
            for &(i, s) in row {
                out[i] += c * s;
            }
        }
        out
    }

    /// Internal force of a tensor stress field:
    /// `out_i = sum_q wq[q] sigma[q] : eps(phi_i)(x_q)`.
    pub fn scatter_stress_tensor(&self, sigma: &[SymTensor3], n_u: usize) -> DVector<f64> {
        let mut out = DVector::zeros(n_u);
        for (q, row) in self.strain_t.iter().enumerate() {
            let w = self.wq[q];
            let sm = sigma[q].mandel();
            for &(i, ref em) in row {
                let mut dot = 0.0;
                for (a, b) in sm.iter().zip(em) {
                    dot += a * b;
                }
                out[i] += w * dot;
            }
        }
        out
    }

    /// Stiffness matrix with a per-point coefficient:
    /// `K_ij = sum_q wq[q] k[q] grad psi_i . grad psi_j`.
    pub fn weighted_scalar_stiffness(&self, k: &[f64], n_s: usize) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(n_s, n_s);
        for (q, row) in self.grad.iter().enumerate() {
            let c = self.wq[q] * k[q];
            for &(i, gi) in row {
                for &(j, gj) in row {
                    out[(i, j)] += c * (gi[0] * gj[0] + gi[1] * gj[1]);
                }
            }
        }
        out
    }

    /// Consistent scalar mass matrix by the same quadrature.
    pub fn scalar_mass(&self, n_s: usize) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(n_s, n_s);
        for (q, row) in self.eval.iter().enumerate() {
            let w = self.wq[q];
            for &(i, si) in row {
                for &(j, sj) in row {
                    out[(i, j)] += w * si * sj;
                }
            }
        }
        out
    }
}

/// Bilinear forms assembled once per run.
#[derive(Clone)]
pub struct Forms {
    /// Displacement mass.
    pub mass_u: DMatrix<f64>,
    /// Viscous stiffness `K_B` (Kelvin–Voigt form).
    pub visc: DMatrix<f64>,
    /// Acceleration regularization `D_B` multiplying the small parameter
    /// `delta`.
    pub damp: DMatrix<f64>,
    /// Elastic stiffness.
    pub stiff_e: DMatrix<f64>,
    /// Plastic-branch linear stiffness (used as predictor; the stop commits
    /// the true stress afterwards).
    pub stiff_p: DMatrix<f64>,
    /// Consistent scalar mass (pressure equation).
    pub mass_s: DMatrix<f64>,
    /// Scalar mass for the temperature equation (lumped on the mesh backend
    /// to help positivity).
    pub mass_s_theta: DMatrix<f64>,
    /// Robin boundary form and unit-datum load, pressure.
    pub robin_p: DMatrix<f64>,
    pub robin_p_load: DVector<f64>,
    /// Robin boundary form and unit-datum load, temperature.
    pub robin_t: DMatrix<f64>,
    pub robin_t_load: DVector<f64>,
    /// Unit body-force load vector on displacements.
    pub load_g: DVector<f64>,
    /// Unit-weight scalar stiffness (gradient inner product); used for
    /// gradient norms in studies and reports.
    pub stiff_s_unit: DMatrix<f64>,
    /// Coefficient vector representing the constant function 1 in the scalar
    /// basis; tests the temperature equation for the global heat balance.
    pub ones_s: DVector<f64>,
    /// Smallest generalized eigenvalue of `K_B x = lambda M_u x`; enters the
    /// temperature floor constant.
    pub visc_min_eigen: f64,
    /// Measure of the computational domain.
    pub domain_measure: f64,
}

/// A complete space discretization: tables plus forms plus identification.
#[derive(Clone)]
pub enum SpaceDisc {
    Spectral(SpectralDisc),
    Fem(FemDisc),
}

impl SpaceDisc {
    pub fn tables(&self) -> &QuadTables {
        match self {
            SpaceDisc::Spectral(s) => &s.tables,
            SpaceDisc::Fem(f) => &f.tables,
        }
    }

    pub fn forms(&self) -> &Forms {
        match self {
            SpaceDisc::Spectral(s) => &s.forms,
            SpaceDisc::Fem(f) => &f.forms,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            SpaceDisc::Spectral(_) => 1,
            SpaceDisc::Fem(_) => 2,
        }
    }

    pub fn n_u(&self) -> usize {
        self.forms().mass_u.nrows()
    }

    pub fn n_s(&self) -> usize {
        self.forms().mass_s.nrows()
    }

    pub fn n_q(&self) -> usize {
        self.tables().n_quad()
    }

    /// Short human-readable identification for summaries.
    pub fn describe(&self) -> String {
        match self {
            SpaceDisc::Spectral(s) => format!("spectral n={}", s.n_modes),
            SpaceDisc::Fem(f) => format!("fem {}x{}", f.nx, f.ny),
        }
    }
}
