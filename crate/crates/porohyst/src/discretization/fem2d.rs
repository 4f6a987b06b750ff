//! 2D bilinear finite elements on a structured rectangle mesh.
//!
//! Plane-strain kinematics: displacement fields live in the plane but strains
//! and stresses are full symmetric 3x3 tensors with zero out-of-plane strain
//! row — the out-of-plane *stress* is still nonzero through the Lamé coupling
//! and participates in all energy products.
//!
//! Displacements are clamped on the whole boundary (interior dofs only);
//! pressure and temperature carry Robin exchange conditions integrated with a
//! two-point Gauss rule per boundary edge. Element integrals use the 2x2
//! Gauss rule, and every bilinear form is assembled from the same tables the
//! solver later samples, so the audit identities hold to roundoff.
//! The temperature mass matrix is lumped (diagonal): together with the
//! M-matrix structure of the conductivity stiffness on square grids this
//! biases the temperature update toward positivity preservation.

use nalgebra::{DMatrix, DVector};

use crate::constitutive::MaterialParams;
use crate::plasticity::{IsotropicTensor4, SymTensor3};

use super::{Forms, QuadTables};

#[derive(Clone)]
pub struct FemDisc {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub tables: QuadTables,
    pub forms: Forms,
}

const GP: f64 = 0.577_350_269_189_625_8; // 1/sqrt(3)
const ISQRT2: f64 = std::f64::consts::FRAC_1_SQRT_2;

fn shapes(xi: f64, eta: f64) -> ([f64; 4], [f64; 4], [f64; 4]) {
    let n = [
        0.25 * (1.0 - xi) * (1.0 - eta),
        0.25 * (1.0 + xi) * (1.0 - eta),
        0.25 * (1.0 + xi) * (1.0 + eta),
        0.25 * (1.0 - xi) * (1.0 + eta),
    ];
    let dxi = [
        -0.25 * (1.0 - eta),
        0.25 * (1.0 - eta),
        0.25 * (1.0 + eta),
        -0.25 * (1.0 + eta),
    ];
    let deta = [
        -0.25 * (1.0 - xi),
        -0.25 * (1.0 + xi),
        0.25 * (1.0 + xi),
        0.25 * (1.0 - xi),
    ];
    (n, dxi, deta)
}

impl FemDisc {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64, mp: &MaterialParams) -> Self {
        assert!(nx >= 2 && ny >= 2, "mesh needs interior nodes in both directions");
        assert!(lx > 0.0 && ly > 0.0);
        let hx = lx / nx as f64;
        let hy = ly / ny as f64;
        let n_s = (nx + 1) * (ny + 1);
        let node = |i: usize, j: usize| j * (nx + 1) + i;
        // Interior displacement dofs.
        let mut u_dof = vec![usize::MAX; n_s];
        let mut n_int = 0;
        for j in 1..ny {
            for i in 1..nx {
                u_dof[node(i, j)] = n_int;
                n_int += 1;
            }
        }
        let n_u = 2 * n_int;

        let a_e = IsotropicTensor4::new(mp.lambda_e, mp.mu_e);
        let a_p = IsotropicTensor4::new(mp.lambda_p, mp.mu_p);
        let b_t = IsotropicTensor4::new(mp.omega, mp.eta);

        // Quadrature tables, element by element.
        let n_q = 4 * nx * ny;
        let mut wq = Vec::with_capacity(n_q);
        let mut xq = Vec::with_capacity(n_q);
        let mut eval = Vec::with_capacity(n_q);
        let mut grad = Vec::with_capacity(n_q);
        let mut div = Vec::with_capacity(n_q);
        let mut strain_t = Vec::with_capacity(n_q);
        for ej in 0..ny {
            for ei in 0..nx {
                let corners = [
                    node(ei, ej),
                    node(ei + 1, ej),
                    node(ei + 1, ej + 1),
                    node(ei, ej + 1),
                ];
                let (x0, y0) = (ei as f64 * hx, ej as f64 * hy);
                for &eta in &[-GP, GP] {
                    for &xi in &[-GP, GP] {
                        let (n, dxi, deta) = shapes(xi, eta);
                        wq.push(0.25 * hx * hy);
                        xq.push([x0 + 0.5 * hx * (xi + 1.0), y0 + 0.5 * hy * (eta + 1.0)]);
                        let mut ev = Vec::with_capacity(4);
                        let mut gr = Vec::with_capacity(4);
                        let mut dv = Vec::with_capacity(8);
                        let mut st = Vec::with_capacity(8);
                        for a in 0..4 {
                            let gx = dxi[a] * 2.0 / hx;
                            let gy = deta[a] * 2.0 / hy;
                            ev.push((corners[a], n[a]));
                            gr.push((corners[a], [gx, gy]));
                            let ud = u_dof[corners[a]];
                            if ud != usize::MAX {
                                // x-component dof.
                                dv.push((2 * ud, gx));
                                st.push((2 * ud, [gx, 0.0, 0.0, 0.0, 0.0, gy * ISQRT2]));
                                // y-component dof.
                                dv.push((2 * ud + 1, gy));
                                st.push((2 * ud + 1, [0.0, gy, 0.0, 0.0, 0.0, gx * ISQRT2]));
                            }
                        }
                        eval.push(ev);
                        grad.push(gr);
                        div.push(dv);
                        strain_t.push(st);
                    }
                }
            }
        }
        let tables = QuadTables {
            wq,
            xq,
            eval,
            grad,
            div,
            strain_s: Vec::new(),
            strain_t,
        };

        // Displacement forms from the tables.
        let mut mass_u = DMatrix::zeros(n_u, n_u);
        let mut visc = DMatrix::zeros(n_u, n_u);
        let mut stiff_e = DMatrix::zeros(n_u, n_u);
        let mut stiff_p = DMatrix::zeros(n_u, n_u);
        let mut load_g = DVector::zeros(n_u);
        // Recover shape values per u-dof from eval rows (same locality).
        for q in 0..tables.n_quad() {
            let w = tables.wq[q];
            // Mass and body load need shape values for interior nodes.
            for &(na, va) in &tables.eval[q] {
                let ua = u_dof[na];
                if ua == usize::MAX {
                    continue;
                }
                load_g[2 * ua + 1] += w * va;
                for &(nb, vb) in &tables.eval[q] {
                    let ub = u_dof[nb];
                    if ub == usize::MAX {
                        continue;
                    }
                    let m = w * va * vb;
                    mass_u[(2 * ua, 2 * ub)] += m;
                    mass_u[(2 * ua + 1, 2 * ub + 1)] += m;
                }
            }
            // Stiffnesses from strain samples.
            let row = &tables.strain_t[q];
            for &(i, ref mi) in row {
                let ti = SymTensor3::from_mandel(*mi);
                let ae_ti = a_e.apply(&ti);
                let ap_ti = a_p.apply(&ti);
                let b_ti = b_t.apply(&ti);
                for &(j, ref mj) in row {
                    let mut de = 0.0;
                    let mut dp = 0.0;
                    let mut db = 0.0;
                    for k in 0..6 {
                        de += ae_ti.mandel()[k] * mj[k];
                        dp += ap_ti.mandel()[k] * mj[k];
                        db += b_ti.mandel()[k] * mj[k];
                    }
                    stiff_e[(j, i)] += w * de;
                    stiff_p[(j, i)] += w * dp;
                    visc[(j, i)] += w * db;
                }
            }
        }

        // Acceleration regularization D_B = K_B M_L^{-1} K_B with the lumped
        // displacement mass.
        let mut ml = DVector::zeros(n_u);
        for i in 0..n_u {
            let mut s = 0.0;
            for j in 0..n_u {
                s += mass_u[(i, j)];
            }
            ml[i] = s;
        }
        let mut kb_scaled = visc.clone();
        for i in 0..n_u {
            let inv = 1.0 / ml[i];
            for j in 0..n_u {
                kb_scaled[(i, j)] *= inv;
            }
        }
        let damp = &visc * kb_scaled;

        // Scalar forms.
        let mass_s = tables.scalar_mass(n_s);
        let mut mass_s_theta = DMatrix::zeros(n_s, n_s);
        for i in 0..n_s {
            let mut s = 0.0;
            for j in 0..n_s {
                s += mass_s[(i, j)];
            }
            mass_s_theta[(i, i)] = s;
        }

        // Robin boundary forms: two-point Gauss per boundary edge.
        let mut robin_unit = DMatrix::zeros(n_s, n_s);
        let mut robin_unit_load = DVector::zeros(n_s);
        let mut add_edge = |na: usize, nb: usize, h: f64| {
            for &s in &[-GP, GP] {
                let w = 0.5 * h;
                let va = 0.5 * (1.0 - s);
                // Complement so the edge shapes sum to exactly 1.0 in floating
                // point; then constant Robin data is reproduced without drift.
                let vb = 1.0 - va;
                robin_unit[(na, na)] += w * va * va;
                robin_unit[(na, nb)] += w * va * vb;
                robin_unit[(nb, na)] += w * vb * va;
                robin_unit[(nb, nb)] += w * vb * vb;
                robin_unit_load[na] += w * va;
                robin_unit_load[nb] += w * vb;
            }
        };
        for i in 0..nx {
            add_edge(node(i, 0), node(i + 1, 0), hx);
            add_edge(node(i, ny), node(i + 1, ny), hx);
        }
        for j in 0..ny {
            add_edge(node(0, j), node(0, j + 1), hy);
            add_edge(node(nx, j), node(nx, j + 1), hy);
        }
        let robin_p = &robin_unit * mp.gamma_p;
        let robin_p_load = &robin_unit_load * mp.gamma_p;
        let robin_t = &robin_unit * mp.gamma_theta;
        let robin_t_load = &robin_unit_load * mp.gamma_theta;

        let visc_min_eigen = smallest_generalized_eigenvalue(&visc, &mass_u);
        let stiff_s_unit = tables.weighted_scalar_stiffness(&vec![1.0; tables.n_quad()], n_s);
        let ones_s = DVector::from_element(n_s, 1.0);

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
            visc_min_eigen,
            domain_measure: lx * ly,
        };

        FemDisc { nx, ny, lx, ly, tables, forms }
    }

    /// Coordinates of scalar node `idx`.
    pub fn node_coords(&self, idx: usize) -> [f64; 2] {
        let i = idx % (self.nx + 1);
        let j = idx / (self.nx + 1);
        [i as f64 * self.lx / self.nx as f64, j as f64 * self.ly / self.ny as f64]
    }

    /// For a mesh exactly twice as fine, the coarse scalar nodes are a subset
    /// of the fine ones; return the index of each coarse node in the fine
    /// numbering. `None` when the meshes are not nested that way.
    pub fn restriction_from(&self, fine: &FemDisc) -> Option<Vec<usize>> {
        if fine.nx != 2 * self.nx || fine.ny != 2 * self.ny {
            return None;
        }
        if (fine.lx - self.lx).abs() > 1e-14 || (fine.ly - self.ly).abs() > 1e-14 {
            return None;
        }
        let mut map = Vec::with_capacity((self.nx + 1) * (self.ny + 1));
        for j in 0..=self.ny {
            for i in 0..=self.nx {
                map.push(2 * j * (fine.nx + 1) + 2 * i);
            }
        }
        Some(map)
    }

    /// Companion of [`restriction_from`](Self::restriction_from) for
    /// displacement coefficient vectors: for every coarse displacement
    /// degree of freedom, the index of the matching fine one.
    pub fn u_restriction_from(&self, fine: &FemDisc) -> Option<Vec<usize>> {
        self.restriction_from(fine)?;
        let idx_c = |i: usize, j: usize| (j - 1) * (self.nx - 1) + (i - 1);
        let idx_f = |i: usize, j: usize| (j - 1) * (fine.nx - 1) + (i - 1);
        let mut map = vec![0usize; 2 * (self.nx - 1) * (self.ny - 1)];
        for j in 1..self.ny {
            for i in 1..self.nx {
                let c = idx_c(i, j);
                let f = idx_f(2 * i, 2 * j);
                map[2 * c] = 2 * f;
                map[2 * c + 1] = 2 * f + 1;
            }
        }
        Some(map)
    }
}

/// Smallest generalized eigenvalue of `K x = lambda M x` by inverse power
/// iteration with a Cholesky factorization of `K`.
fn smallest_generalized_eigenvalue(k: &DMatrix<f64>, m: &DMatrix<f64>) -> f64 {
    let chol = k.clone().cholesky().expect("viscous form must be positive definite");
    let n = k.nrows();
    let mut x = DVector::from_element(n, 1.0);
    let mut lambda = 0.0;
    for _ in 0..200 {
        let mut y = chol.solve(&(m * &x));
        let norm = y.norm();
        y /= norm;
        let num = (y.transpose() * k * &y)[(0, 0)];
        let den = (y.transpose() * m * &y)[(0, 0)];
        let next = num / den;
        if (next - lambda).abs() <= 1e-12 * next.abs() {
            return next;
        }
        lambda = next;
        x = y;
    }
    lambda
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::{Rng, SeedableRng};

    fn disc() -> FemDisc {
        FemDisc::new(4, 3, 1.0, 1.5, &MaterialParams::default())
    }

    #[test]
    fn bilinear_basis_reproduces_linear_fields() {
        let d = disc();
        let n_s = (d.nx + 1) * (d.ny + 1);
        // p(x, y) = 2x - 3y + 1 nodal interpolant.
        let p = DVector::from_fn(n_s, |i, _| {
            let [x, y] = d.node_coords(i);
            2.0 * x - 3.0 * y + 1.0
        });
        let vals = d.tables.scalar_at_qp(&p);
        let grads = d.tables.grad_at_qp(&p);
        for (q, (&v, g)) in vals.iter().zip(&grads).enumerate() {
            let [x, y] = d.tables.xq[q];
            assert_relative_eq!(v, 2.0 * x - 3.0 * y + 1.0, epsilon = 1e-13);
            assert_abs_diff_eq!(g[0], 2.0, epsilon = 1e-12);
            assert_abs_diff_eq!(g[1], -3.0, epsilon = 1e-12);
        }
        // Stiffness annihilates constants.
        let ones = DVector::from_element(n_s, 1.0);
        let k = d.tables.weighted_scalar_stiffness(&vec![1.0; d.tables.n_quad()], n_s);
        assert_abs_diff_eq!((&k * &ones).norm(), 0.0, epsilon = 1e-12);
        // Mass integrates the domain measure.
        let total = (ones.transpose() * &d.forms.mass_s * &ones)[(0, 0)];
        assert_relative_eq!(total, 1.5, epsilon = 1e-12);
    }

    #[test]
    fn divergence_is_the_trace_of_the_strain() {
        let d = disc();
        let n_u = d.forms.mass_u.nrows();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let u = DVector::from_fn(n_u, |_, _| rng.gen_range(-1.0..1.0));
        let divs = d.tables.div_at_qp(&u);
        let strains = d.tables.strain_tensor_at_qp(&u);
        for (dv, e) in divs.iter().zip(&strains) {
            assert_relative_eq!(*dv, e.trace(), epsilon = 1e-12);
            // Plane strain: no out-of-plane strain.
            assert_eq!(e.entry(2, 2), 0.0);
        }
    }

    #[test]
    fn audit_identity_for_the_viscous_form() {
        let d = disc();
        let mp = MaterialParams::default();
        let b_t = IsotropicTensor4::new(mp.omega, mp.eta);
        let n_u = d.forms.mass_u.nrows();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(29);
        let w = DVector::from_fn(n_u, |_, _| rng.gen_range(-1.0..1.0));
        let lhs = (w.transpose() * &d.forms.visc * &w)[(0, 0)];
        let strains = d.tables.strain_tensor_at_qp(&w);
        let rhs: f64 = strains
            .iter()
            .zip(&d.tables.wq)
            .map(|(e, wq)| wq * b_t.inner(e, e))
            .sum();
        assert_relative_eq!(lhs, rhs, epsilon = 1e-12);
        // Internal-force scatter is the adjoint of strain evaluation.
        let sig: Vec<SymTensor3> = strains.iter().map(|e| b_t.apply(e)).collect();
        let f = d.tables.scatter_stress_tensor(&sig, n_u);
        assert_relative_eq!(w.dot(&f), lhs, epsilon = 1e-12);
    }

    #[test]
    fn robin_forms_integrate_the_perimeter() {
        let d = disc();
        let n_s = (d.nx + 1) * (d.ny + 1);
        let ones = DVector::from_element(n_s, 1.0);
        let per = 2.0 * (1.0 + 1.5);
        let total = (ones.transpose() * &d.forms.robin_p * &ones)[(0, 0)];
        assert_relative_eq!(total, per, epsilon = 1e-12);
        assert_relative_eq!(ones.dot(&d.forms.robin_p_load), per, epsilon = 1e-12);
    }

    #[test]
    fn lumped_temperature_mass_preserves_total_mass() {
        let d = disc();
        let n_s = (d.nx + 1) * (d.ny + 1);
        let mut total = 0.0;
        for i in 0..n_s {
            for j in 0..n_s {
                if i == j {
                    total += d.forms.mass_s_theta[(i, j)];
                    assert!(d.forms.mass_s_theta[(i, j)] > 0.0);
                } else {
                    assert_eq!(d.forms.mass_s_theta[(i, j)], 0.0);
                }
            }
        }
        assert_relative_eq!(total, 1.5, epsilon = 1e-12);
    }

    #[test]
    fn damp_is_symmetric_positive_semidefinite() {
        let d = disc();
        let n_u = d.forms.mass_u.nrows();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(41);
        for i in 0..n_u {
            for j in 0..n_u {
                assert_abs_diff_eq!(d.forms.damp[(i, j)], d.forms.damp[(j, i)], epsilon = 1e-10);
            }
        }
        for _ in 0..10 {
            let v = DVector::from_fn(n_u, |_, _| rng.gen_range(-1.0..1.0));
            assert!((v.transpose() * &d.forms.damp * &v)[(0, 0)] >= -1e-12);
        }
    }

    #[test]
    fn viscous_eigenvalue_is_positive_and_stable_under_refinement() {
        let mp = MaterialParams::default();
        let c = FemDisc::new(4, 4, 1.0, 1.0, &mp);
        let f = FemDisc::new(8, 8, 1.0, 1.0, &mp);
        assert!(c.forms.visc_min_eigen > 0.0);
        assert!(f.forms.visc_min_eigen > 0.0);
        // The discrete minimum decreases toward the continuous one.
        assert!(f.forms.visc_min_eigen <= c.forms.visc_min_eigen * 1.001);
    }

    #[test]
    fn restriction_maps_coarse_nodes_onto_fine_nodes() {
        let mp = MaterialParams::default();
        let c = FemDisc::new(4, 3, 1.0, 1.5, &mp);
        let f = FemDisc::new(8, 6, 1.0, 1.5, &mp);
        let map = c.restriction_from(&f).unwrap();
        for (ci, &fi) in map.iter().enumerate() {
            let a = c.node_coords(ci);
            let b = f.node_coords(fi);
            assert_abs_diff_eq!(a[0], b[0], epsilon = 1e-14);
            assert_abs_diff_eq!(a[1], b[1], epsilon = 1e-14);
        }
        assert!(c.restriction_from(&c).is_none());
    }
}
