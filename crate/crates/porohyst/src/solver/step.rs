//! The time step: staggered solves plus the closing energy audit.
//!
//! Discrete scheme for one step of size `dt` (all forms assembled by the
//! discretization; `S(.)` scatters quadrature values to the scalar or
//! displacement basis):
//!
//! * momentum, solved for the new velocity `w` with the constant factored
//!   operator `rho_S M_u + delta D + dt K_B + dt^2 (K_e + K_p)`; the
//!   right-hand side carries the start-of-step elastic and stop stresses
//!   and the lagged coupling `p - beta (Q_R(theta) - theta_c)`;
//! * the plastic stop projects the trial stress at every quadrature point
//!   (radial return); the momentum predictor used the plastic branch
//!   stiffness, so the projected remainder is pure dissipation;
//! * pressure, an L-scheme fixed point for the storage `z(p) =
//!   K_R(p) + f(p) + G0[p]` with the hysteresis output evaluated by
//!   non-mutating trials;
//! * temperature, implicit with the lumped-mass heat capacity and every
//!   ledgered heat source (stop heat, hysteresis heat, viscous heat,
//!   truncated Darcy heat, and the adiabatic coupling).
//!
//! The audit tests the three solves with `w`, `p`, and the constant `1`
//! respectively and adds the exact Bregman/ledger splits of the nonlinear
//! terms; everything that is not stored energy, declared dissipation, or
//! boundary/gravity transfer must cancel to roundoff.

use nalgebra::{Cholesky, DVector};

use crate::constitutive::{k_cut, q_cut};
use crate::hysteresis::MemoryState;
use crate::plasticity::SymTensor3;

use super::parallel::{map_indexed, map_slice_mut};
use super::{
    qp_strains, AuditTerms, FieldState, QpStrains, QuadPlastic, Solver, SolverError, StepReport,
};

/// Everything one staggered pass produces that later passes or the audit
/// consume.
struct PassResult {
    w_n: DVector<f64>,
    u_n: DVector<f64>,
    p_n: DVector<f64>,
    theta_n: DVector<f64>,
    /// Lagged pressure at quadrature points used in the momentum coupling.
    p_lag_q: Vec<f64>,
    /// Lagged mobility at quadrature points.
    mu_lag_q: Vec<f64>,
    theta_cut_active: bool,
    picard_iters: usize,
    picard_diff: f64,
    picard_res: f64,
    lin_res_mom: f64,
    lin_res_theta: f64,
}

impl Solver {
    /// L-scheme weight: half-way between a floor of the storage slope near
    /// the reachable pressure range and a certified upper bound for it.
    /// Depends only on the start-of-step state and the drive value, so
    /// restarted runs reproduce the original iteration bitwise.
    fn l_coefficient(&self, p_o_q: &[f64], p_star: f64) -> f64 {
        let sat = self.consts.saturation.as_ref();
        let s = p_o_q.iter().fold(p_star.abs(), |a, &b| a.max(b.abs()));
        let slope_floor = sat.df(s + 0.5).min(sat.df(-s - 0.5)).max(0.0);
        let kr = if s > 0.8 * self.cfg.r_cut { 1.0 } else { 0.0 };
        let l_max = self.consts.params.f3 + self.consts.density.c_rho_star() + kr;
        0.5 * (l_max + slope_floor.min(l_max))
    }

    /// Storage `z = K_R(p) + f(p) + G0[p]` at every quadrature point, with
    /// the hysteresis output taken from non-mutating trials.
    fn z_trial_at(&self, memory: &[MemoryState], p_q: &[f64]) -> Vec<f64> {
        let density = self.consts.density.as_ref();
        let sat = self.consts.saturation.as_ref();
        let r = self.cfg.r_cut;
        map_indexed(p_q.len(), self.cfg.threads, |q| {
            let inc = memory[q].trial(p_q[q], density);
            k_cut(p_q[q], r) + sat.f(p_q[q]) + (memory[q].ledger().g0 + inc.dg0)
        })
    }

    /// Quadrature density of the viscous heat `B e(w) : e(w)`.
    fn visc_heat_q(&self, w: &DVector<f64>) -> Vec<f64> {
        match qp_strains(&self.disc, w) {
            QpStrains::Scalar(e) => e.iter().map(|&x| self.b_scalar * x * x).collect(),
            QpStrains::Tensor(e) => e.iter().map(|x| self.b_tensor.inner(x, x)).collect(),
        }
    }

    /// One staggered pass at lagged coupling values.
    #[allow(clippy::too_many_arguments)]
    fn pass(
        &self,
        state: &FieldState,
        sig_o_scatter: &DVector<f64>,
        z_o_q: &[f64],
        p_lag: &DVector<f64>,
        theta_lag: &DVector<f64>,
        t_new: f64,
        step_id: u64,
    ) -> Result<PassResult, SolverError> {
        let mp = &self.consts.params;
        let cfg = &self.cfg;
        let dt = cfg.dt;
        let tables = self.disc.tables();
        let forms = self.disc.forms();
        let n_u = self.disc.n_u();
        let n_s = self.disc.n_s();
        let n_q = tables.n_quad();
        let p_star = self.drives.p_star.value(t_new);
        let theta_star = self.drives.theta_star.value(t_new);
        let numerical = |detail: String| SolverError::Numerical { step: step_id, detail };

        let p_lag_q = tables.scalar_at_qp(p_lag);
        let theta_lag_q = tables.scalar_at_qp(theta_lag);
        let theta_cut_active =
            theta_lag_q.iter().any(|&t| !(0.0..=cfg.r_cut).contains(&t));
        let qr_theta_q: Vec<f64> = theta_lag_q.iter().map(|&t| q_cut(t, cfg.r_cut)).collect();
        let mu_lag_q: Vec<f64> =
            p_lag_q.iter().map(|&p| self.consts.mobility.mu(p)).collect();
        let kappa_lag_q: Vec<f64> =
            theta_lag_q.iter().map(|&t| self.consts.conductivity.kappa(t)).collect();

        // --- momentum ---
        let coup_q: Vec<f64> = (0..n_q)
            .map(|q| p_lag_q[q] - mp.beta * (qr_theta_q[q] - mp.theta_c))
            .collect();
        let mut rhs_m = (&forms.mass_u * &state.w) * mp.rho_s;
        if cfg.delta > 0.0 {
            rhs_m += (&forms.damp * &state.w) * cfg.delta;
        }
        rhs_m -= (&forms.stiff_e * &state.u + sig_o_scatter + tables.scatter_div(&coup_q, n_u))
            * dt;
        if mp.g != 0.0 {
            rhs_m += &forms.load_g * (dt * mp.g);
        }
        let w_n = self.mom_chol.solve(&rhs_m);
        let lin_res_mom = (&self.mom_matrix * &w_n - &rhs_m).norm() / (1.0 + rhs_m.norm());
        let u_n = &state.u + &w_n * dt;
        let divw_q = tables.div_at_qp(&w_n);

        // --- pressure: L-scheme fixed point ---
        let p_o_q = tables.scalar_at_qp(&state.p);
        let l_coef = self.l_coefficient(&p_o_q, p_star);
        let k_mu = tables.weighted_scalar_stiffness(&mu_lag_q, n_s);
        let mut a_p = &forms.mass_s * l_coef;
        a_p += &k_mu * (dt / mp.rho_l);
        a_p += &forms.robin_p * dt;
        let p_chol = Cholesky::new(a_p.clone())
            .ok_or_else(|| numerical("pressure operator is not positive definite".into()))?;
        let rhs_fixed =
            tables.scatter_scalar(&divw_q, n_s) * dt + &forms.robin_p_load * (dt * p_star);

        let mut p_k = state.p.clone();
        let mut damping = 1.0f64;
        let mut last_diff = f64::INFINITY;
        let mut iters = 0usize;
        let mut converged = false;
        while iters < cfg.picard_max {
            iters += 1;
            let p_k_q = tables.scalar_at_qp(&p_k);
            let z_k_q = self.z_trial_at(&state.memory, &p_k_q);
            let dz_q: Vec<f64> = z_k_q.iter().zip(z_o_q).map(|(z, zo)| z - zo).collect();
            let rhs = (&forms.mass_s * &p_k) * l_coef - tables.scatter_scalar(&dz_q, n_s)
                + &rhs_fixed;
            let solved = p_chol.solve(&rhs);
            let p_next = if damping == 1.0 {
                solved
            } else {
                &p_k + (solved - &p_k) * damping
            };
            let diff = (&p_next - &p_k).amax();
            p_k = p_next;
            if diff <= cfg.picard_tol {
                last_diff = diff;
                converged = true;
                break;
            }
            if diff > last_diff {
                // Non-contracting update observed: fall back to a damped
                // iteration for the rest of this solve.
                damping = 0.5;
            }
            last_diff = diff;
        }
        if !converged {
            return Err(numerical(format!(
                "pressure fixed point did not reach tolerance {} within {} iterations \
                 (last nodal difference {:.3e})",
                cfg.picard_tol, cfg.picard_max, last_diff
            )));
        }
        let p_n = p_k;
        let p_n_q = tables.scalar_at_qp(&p_n);
        // Algebraic residual of the accepted iterate.
        let picard_res = {
            let z_n_q = self.z_trial_at(&state.memory, &p_n_q);
            let dz_q: Vec<f64> = z_n_q.iter().zip(z_o_q).map(|(z, zo)| z - zo).collect();
            let rhs = (&forms.mass_s * &p_n) * l_coef - tables.scatter_scalar(&dz_q, n_s)
                + &rhs_fixed;
            (&a_p * &p_n - &rhs).norm() / (1.0 + rhs.norm())
        };

        // --- temperature ---
        let density = self.consts.density.as_ref();
        let mem_inc = map_indexed(n_q, cfg.threads, |q| {
            state.memory[q].trial(p_n_q[q], density)
        });
        let plast_heat_q: Vec<f64> = match (&state.plastic, qp_strains(&self.disc, &w_n)) {
            (QuadPlastic::Scalar(stops), QpStrains::Scalar(eps)) => stops
                .iter()
                .zip(&eps)
                .map(|(s, &e)| {
                    let mut trial = *s;
                    trial.step(e * dt, self.ap_scalar, mp.sigma_y).dq
                })
                .collect(),
            (QuadPlastic::Tensor(stops), QpStrains::Tensor(eps)) => stops
                .iter()
                .zip(&eps)
                .map(|(s, e)| {
                    let mut trial = *s;
                    trial.step(&(*e * dt), &self.ap_tensor, mp.sigma_y).dq
                })
                .collect(),
            _ => unreachable!("plastic variant always matches the backend"),
        };
        let visc_q = self.visc_heat_q(&w_n);
        let grad_p_q = tables.grad_at_qp(&p_n);
        let source_q: Vec<f64> = (0..n_q)
            .map(|q| {
                let g2 = grad_p_q[q][0] * grad_p_q[q][0] + grad_p_q[q][1] * grad_p_q[q][1];
                plast_heat_q[q]
                    + mem_inc[q].dq * cfg.fault_qg_scale
                    + dt * visc_q[q]
                    + dt * mu_lag_q[q] * q_cut(g2, cfg.r_cut) / mp.rho_l
                    - dt * mp.beta * qr_theta_q[q] * divw_q[q]
            })
            .collect();
        let k_kappa = tables.weighted_scalar_stiffness(&kappa_lag_q, n_s);
        let mut a_t = &forms.mass_s_theta * mp.c0;
        a_t += &k_kappa * dt;
        a_t += &forms.robin_t * dt;
        let t_chol = Cholesky::new(a_t.clone())
            .ok_or_else(|| numerical("temperature operator is not positive definite".into()))?;
        let rhs_t = (&forms.mass_s_theta * &state.theta) * mp.c0
            + tables.scatter_scalar(&source_q, n_s)
            + &forms.robin_t_load * (dt * theta_star);
        let theta_n = t_chol.solve(&rhs_t);
        let lin_res_theta = (&a_t * &theta_n - &rhs_t).norm() / (1.0 + rhs_t.norm());

        Ok(PassResult {
            w_n,
            u_n,
            p_n,
            theta_n,
            p_lag_q,
            mu_lag_q,
            theta_cut_active,
            picard_iters: iters,
            picard_diff: last_diff,
            picard_res,
            lin_res_mom,
            lin_res_theta,
        })
    }

    /// Advance the state by one step and audit it.
    pub fn step(&self, state: &mut FieldState) -> Result<StepReport, SolverError> {
        let mp = &self.consts.params;
        let cfg = &self.cfg;
        let dt = cfg.dt;
        let tables = self.disc.tables();
        let forms = self.disc.forms();
        let n_u = self.disc.n_u();
        let n_q = tables.n_quad();
        let step_id = state.step_index + 1;
        let t_new = step_id as f64 * dt;

        let e_before = self.energy_levels(state);
        let w_o = state.w.clone();
        let p_o_q = tables.scalar_at_qp(&state.p);
        let sat = self.consts.saturation.as_ref();
        let z_o_q: Vec<f64> = (0..n_q)
            .map(|q| {
                k_cut(p_o_q[q], cfg.r_cut) + sat.f(p_o_q[q]) + state.memory[q].ledger().g0
            })
            .collect();
        let (sig_o_scalar, sig_o_tensor, sig_o_scatter) = match &state.plastic {
            QuadPlastic::Scalar(v) => {
                let s: Vec<f64> = v.iter().map(|x| x.sigma).collect();
                let scat = tables.scatter_stress_scalar(&s, n_u);
                (s, Vec::new(), scat)
            }
            QuadPlastic::Tensor(v) => {
                let s: Vec<SymTensor3> = v.iter().map(|x| x.sigma).collect();
                let scat = tables.scatter_stress_tensor(&s, n_u);
                (Vec::new(), s, scat)
            }
        };

        // --- outer staggered passes ---
        let mut p_lag = state.p.clone();
        let mut theta_lag = state.theta.clone();
        let mut pass_out = None;
        for pass in 0..cfg.outer_passes {
            let out =
                self.pass(state, &sig_o_scatter, &z_o_q, &p_lag, &theta_lag, t_new, step_id)?;
            if pass + 1 < cfg.outer_passes {
                p_lag = out.p_n.clone();
                theta_lag = out.theta_n.clone();
            }
            pass_out = Some(out);
        }
        let out = pass_out.expect("outer_passes >= 1 is validated");

        // --- commit ---
        let p_n_q = tables.scalar_at_qp(&out.p_n);
        let density = self.consts.density.as_ref();
        let mem_inc = map_slice_mut(&mut state.memory, cfg.threads, |q, m| {
            m.step(p_n_q[q], density)
        });
        enum PlastInc {
            Scalar(Vec<crate::plasticity::ScalarStopIncrement>),
            Tensor(Vec<crate::plasticity::StopIncrement>),
        }
        let plast_inc = match (&mut state.plastic, qp_strains(&self.disc, &out.w_n)) {
            (QuadPlastic::Scalar(stops), QpStrains::Scalar(eps)) => {
                PlastInc::Scalar(map_slice_mut(stops, cfg.threads, |q, s| {
                    s.step(eps[q] * dt, self.ap_scalar, mp.sigma_y)
                }))
            }
            (QuadPlastic::Tensor(stops), QpStrains::Tensor(eps)) => {
                PlastInc::Tensor(map_slice_mut(stops, cfg.threads, |q, s| {
                    s.step(&(eps[q] * dt), &self.ap_tensor, mp.sigma_y)
                }))
            }
            _ => unreachable!("plastic variant always matches the backend"),
        };
        state.u = out.u_n.clone();
        state.w = out.w_n.clone();
        state.p = out.p_n.clone();
        state.theta = out.theta_n.clone();
        state.step_index = step_id;
        state.t = t_new;
        let e_after = self.energy_levels(state);

        // --- audit ---
        let wq = &tables.wq;
        let p_star = self.drives.p_star.value(t_new);
        let theta_star = self.drives.theta_star.value(t_new);
        let dw = &out.w_n - &w_o;
        let mut nd_kin = 0.5 * mp.rho_s * dw.dot(&(&forms.mass_u * &dw));
        if cfg.delta > 0.0 {
            nd_kin += 0.5 * cfg.delta * dw.dot(&(&forms.damp * &dw));
        }
        let nd_e = 0.5 * dt * dt * out.w_n.dot(&(&forms.stiff_e * &out.w_n));
        let d_visc = dt * out.w_n.dot(&(&forms.visc * &out.w_n));

        let (mut d_plast, mut q_p) = (0.0f64, 0.0f64);
        match &plast_inc {
            PlastInc::Scalar(incs) => {
                let eps = match qp_strains(&self.disc, &out.w_n) {
                    QpStrains::Scalar(e) => e,
                    QpStrains::Tensor(_) => unreachable!(),
                };
                for q in 0..n_q {
                    let de = eps[q] * dt;
                    let dsig = incs[q].sigma_new - sig_o_scalar[q];
                    d_plast += wq[q] * (self.ap_scalar * de - dsig) * de;
                    q_p += wq[q] * incs[q].dq;
                }
            }
            PlastInc::Tensor(incs) => {
                let eps = match qp_strains(&self.disc, &out.w_n) {
                    QpStrains::Tensor(e) => e,
                    QpStrains::Scalar(_) => unreachable!(),
                };
                for q in 0..n_q {
                    let de = eps[q] * dt;
                    let dsig = incs[q].sigma_new - sig_o_tensor[q];
                    d_plast += wq[q] * (self.ap_tensor.apply(&de) - dsig).dot(&de);
                    q_p += wq[q] * incs[q].dq;
                }
            }
        }

        let divw_q = tables.div_at_qp(&out.w_n);
        let grad_p_q = tables.grad_at_qp(&out.p_n);
        let mut q_g = 0.0f64;
        let mut diss_pres = 0.0f64;
        let mut trunc_grad = 0.0f64;
        let mut darcy_qp = 0.0f64;
        let mut coup_mismatch = 0.0f64;
        let mut sup_p = 0.0f64;
        let mut trunc_active = false;
        for q in 0..n_q {
            q_g += wq[q] * mem_inc[q].dq;
            let (po, pn) = (p_o_q[q], p_n_q[q]);
            let cut_part = (k_cut(pn, cfg.r_cut) - k_cut(po, cfg.r_cut)) * pn
                - (crate::constitutive::k_cut_dual(pn, cfg.r_cut)
                    - crate::constitutive::k_cut_dual(po, cfg.r_cut));
            let sat_part =
                (sat.f(pn) - sat.f(po)) * pn - (sat.dual_potential(pn) - sat.dual_potential(po));
            diss_pres += wq[q] * (cut_part + sat_part);
            let g2 = grad_p_q[q][0] * grad_p_q[q][0] + grad_p_q[q][1] * grad_p_q[q][1];
            if g2 > cfg.r_cut {
                trunc_active = true;
            }
            trunc_grad += wq[q] * dt * out.mu_lag_q[q] * (g2 - q_cut(g2, cfg.r_cut)) / mp.rho_l;
            darcy_qp += wq[q] * dt * out.mu_lag_q[q] * g2 / mp.rho_l;
            coup_mismatch += wq[q] * dt * (pn - out.p_lag_q[q]) * divw_q[q];
            sup_p = sup_p.max(pn.abs());
        }
        let k_mu_n = tables.weighted_scalar_stiffness(&out.mu_lag_q, self.disc.n_s());
        let darcy_form = dt / mp.rho_l * out.p_n.dot(&(&k_mu_n * &out.p_n));
        let diff_res = darcy_form - darcy_qp;

        let robin_p = dt
            * (out.p_n.dot(&(&forms.robin_p * &out.p_n))
                - p_star * out.p_n.dot(&forms.robin_p_load));
        let robin_t = dt
            * (forms.ones_s.dot(&(&forms.robin_t * &out.theta_n))
                - theta_star * forms.ones_s.dot(&forms.robin_t_load));
        let gravity_work = if mp.g != 0.0 {
            dt * mp.g * forms.load_g.dot(&out.w_n)
        } else {
            0.0
        };

        let de_total = e_after.total - e_before.total;
        let residual = de_total + nd_kin + nd_e + d_plast + diss_pres + trunc_grad + diff_res
            - coup_mismatch
            + robin_p
            + robin_t
            - gravity_work;
        let rel_residual = residual.abs() / e_after.total.abs().max(1.0);

        let theta_n_q = tables.scalar_at_qp(&state.theta);
        let min_theta = theta_n_q.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        let floor_v = self.temperature_floor(t_new);
        let floor_ok = min_theta > 0.0 && min_theta + 1e-12 >= floor_v;
        let k_r_active = sup_p > cfg.r_cut;

        let mut warnings = Vec::new();
        let scale = e_after.total.abs().max(1.0);
        if !floor_ok {
            warnings.push(format!(
                "temperature minimum {min_theta:.6e} fell below its envelope {floor_v:.6e}"
            ));
        }
        if rel_residual > 1e-8 {
            warnings.push(format!(
                "energy audit residual {residual:.3e} exceeds 1e-8 relative to the energy scale"
            ));
        }
        for (name, value) in [
            ("plastic heat", q_p),
            ("hysteresis heat", q_g),
            ("plastic remainder", d_plast),
            ("storage dissipation", diss_pres),
        ] {
            if value < -1e-12 * scale {
                warnings.push(format!("{name} is negative: {value:.3e}"));
            }
        }

        Ok(StepReport {
            step: step_id,
            t: t_new,
            outer_passes: cfg.outer_passes,
            picard_iters: out.picard_iters,
            picard_diff: out.picard_diff,
            picard_res: out.picard_res,
            lin_res_mom: out.lin_res_mom,
            lin_res_theta: out.lin_res_theta,
            min_theta,
            floor_v,
            floor_ok,
            sup_p,
            k_r_active,
            trunc_active,
            theta_cut_active: out.theta_cut_active,
            energy: e_after,
            audit: AuditTerms {
                de_total,
                nd_kin,
                nd_e,
                d_plast,
                d_visc,
                q_p,
                q_g,
                diss_pres,
                trunc_grad,
                diff_res,
                coup_mismatch,
                robin_p,
                robin_t,
                gravity_work,
                residual,
                rel_residual,
            },
            warnings,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::super::{BoundaryDrive, Drives, SolverConfig};
    use super::*;
    use crate::constitutive::{ConstitutiveSet, MaterialParams};
    use crate::discretization::{FemDisc, SpaceDisc, SpectralDisc};

    fn solver_with(
        disc: SpaceDisc,
        cfg: SolverConfig,
        drives: Drives,
    ) -> Solver {
        let drive_sup = cfg.p0.abs().max(drives.p_star.sup_abs(cfg.t_end));
        let consts =
            ConstitutiveSet::from_params(MaterialParams::default(), drive_sup).unwrap();
        Solver::new(disc, consts, cfg, drives).unwrap()
    }

    fn spectral(n: usize) -> SpaceDisc {
        SpaceDisc::Spectral(SpectralDisc::new(n, &MaterialParams::default()))
    }

    fn fem(n: usize) -> SpaceDisc {
        SpaceDisc::Fem(FemDisc::new(n, n, 1.0, 1.0, &MaterialParams::default()))
    }

    fn driven_cfg() -> (SolverConfig, Drives) {
        let cfg = SolverConfig {
            dt: 1e-3,
            t_end: 1e-2,
            delta: 1e-3,
            p0: 0.1,
            theta0: 1.0,
            u0_mode: 0.05,
            ..SolverConfig::default()
        };
        let drives = Drives {
            p_star: BoundaryDrive::Sine { offset: 0.2, amp: 0.6, freq: 3.0 },
            theta_star: BoundaryDrive::Ramp { start: 1.0, rate: 0.5 },
        };
        (cfg, drives)
    }

    #[test]
    fn stationary_data_stays_stationary() {
        // Drives matching the constant initial data, no gravity: nothing
        // may move beyond roundoff.
        for disc in [spectral(4), fem(3)] {
            let cfg = SolverConfig { p0: 0.3, theta0: 1.2, t_end: 5e-3, ..SolverConfig::default() };
            let drives = Drives {
                p_star: BoundaryDrive::Constant(0.3),
                theta_star: BoundaryDrive::Constant(1.2),
            };
            let solver = solver_with(disc, cfg, drives);
            let mut state = solver.init_state().unwrap();
            let record = solver.run(&mut state, false).unwrap();
            assert_eq!(record.reports.len(), 5);
            assert!(state.u.amax() < 1e-12, "u stayed {:.3e}", state.u.amax());
            assert!(state.w.amax() < 1e-12);
            for pq in solver.disc().tables().scalar_at_qp(&state.p) {
                assert!((pq - 0.3).abs() < 1e-9, "p drifted to {pq}");
            }
            for tq in solver.disc().tables().scalar_at_qp(&state.theta) {
                assert!((tq - 1.2).abs() < 1e-9, "theta drifted to {tq}");
            }
            for r in &record.reports {
                assert!(r.audit.rel_residual < 1e-12, "residual {:.3e}", r.audit.rel_residual);
                assert!(r.floor_ok);
                assert!(r.warnings.is_empty(), "warnings: {:?}", r.warnings);
            }
        }
    }

    #[test]
    fn driven_run_passes_the_energy_audit() {
        let (cfg, drives) = driven_cfg();
        for (disc, modal) in [(spectral(6), true), (fem(4), false)] {
            let cfg = SolverConfig { u0_mode: if modal { cfg.u0_mode } else { 0.0 }, ..cfg };
            let solver = solver_with(disc, cfg, drives);
            let mut state = solver.init_state().unwrap();
            let record = solver.run(&mut state, false).unwrap();
            for r in &record.reports {
                assert!(
                    r.audit.rel_residual <= 1e-10,
                    "step {}: rel residual {:.3e}",
                    r.step,
                    r.audit.rel_residual
                );
                assert_eq!(r.audit.recompute_residual(), r.audit.residual);
                assert!(r.audit.d_plast >= -1e-13);
                assert!(r.audit.q_p >= -1e-13);
                assert!(r.audit.q_g >= -1e-13);
                assert!(r.audit.diss_pres >= -1e-13);
                assert!(r.audit.trunc_grad >= 0.0);
                assert!(r.floor_ok, "step {}: floor violated", r.step);
                assert!(r.picard_iters < solver.cfg().picard_max);
            }
            // The drive actually moves the system and the hysteresis.
            assert!(record.sup_p() > 0.1005, "sup_p stayed at {:.6}", record.sup_p());
            let q_g_total: f64 = record.reports.iter().map(|r| r.audit.q_g).sum();
            assert!(q_g_total > 0.0, "no hysteresis heat was produced");
        }
    }

    #[test]
    fn corrupted_hysteresis_heat_is_flagged_by_the_audit() {
        let (cfg, drives) = driven_cfg();
        let clean = solver_with(spectral(4), cfg, drives);
        let faulty = solver_with(
            spectral(4),
            SolverConfig { fault_qg_scale: 1.0 + 1e-3, ..cfg },
            drives,
        );
        let mut s_clean = clean.init_state().unwrap();
        let mut s_faulty = faulty.init_state().unwrap();
        let r_clean = clean.run(&mut s_clean, false).unwrap();
        let r_faulty = faulty.run(&mut s_faulty, false).unwrap();
        let worst_clean = r_clean.max_rel_residual();
        let worst_faulty = r_faulty.max_rel_residual();
        assert!(worst_clean < 1e-10);
        assert!(
            worst_faulty > 100.0 * worst_clean.max(1e-14),
            "fault stayed invisible: clean {worst_clean:.3e}, faulty {worst_faulty:.3e}"
        );
    }

    #[test]
    fn results_are_bitwise_thread_invariant() {
        let (cfg, drives) = driven_cfg();
        let run = |threads: usize| {
            let solver = solver_with(spectral(5), SolverConfig { threads, ..cfg }, drives);
            let mut state = solver.init_state().unwrap();
            let record = solver.run(&mut state, false).unwrap();
            (state, record)
        };
        let (s1, r1) = run(1);
        let (s3, r3) = run(3);
        assert_eq!(s1.p.len(), s3.p.len());
        for (a, b) in s1.p.iter().zip(s3.p.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        for (a, b) in s1.theta.iter().zip(s3.theta.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        for (a, b) in r1.reports.iter().zip(&r3.reports) {
            assert_eq!(a.audit.residual.to_bits(), b.audit.residual.to_bits());
            assert_eq!(a.picard_iters, b.picard_iters);
        }
    }

    #[test]
    fn restarting_mid_run_reproduces_the_full_run_bitwise() {
        let (cfg, drives) = driven_cfg();
        // Full run: 10 steps.
        let full = solver_with(spectral(4), cfg, drives);
        let mut s_full = full.init_state().unwrap();
        full.run(&mut s_full, false).unwrap();
        // Restarted run: 5 steps with a short-horizon solver, then 5 more
        // with the full-horizon one.
        let half = solver_with(spectral(4), SolverConfig { t_end: 5e-3, ..cfg }, drives);
        let mut s_part = half.init_state().unwrap();
        half.run(&mut s_part, false).unwrap();
        assert_eq!(s_part.step_index, 5);
        full.run(&mut s_part, false).unwrap();
        assert_eq!(s_part.step_index, 10);
        for (a, b) in s_full.p.iter().zip(s_part.p.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        for (a, b) in s_full.u.iter().zip(s_part.u.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        for (ma, mb) in s_full.memory.iter().zip(&s_part.memory) {
            assert_eq!(ma.ledger().g0.to_bits(), mb.ledger().g0.to_bits());
            for (xa, xb) in ma.play_values().iter().zip(mb.play_values()) {
                assert_eq!(xa.to_bits(), xb.to_bits());
            }
        }
    }

    #[test]
    fn more_outer_passes_shrink_the_coupling_mismatch() {
        let (cfg, drives) = driven_cfg();
        let mismatch = |passes: usize| {
            let solver = solver_with(
                spectral(4),
                SolverConfig { outer_passes: passes, ..cfg },
                drives,
            );
            let mut state = solver.init_state().unwrap();
            let record = solver.run(&mut state, false).unwrap();
            record
                .reports
                .iter()
                .map(|r| r.audit.coup_mismatch.abs())
                .fold(0.0, f64::max)
        };
        let one = mismatch(1);
        let three = mismatch(3);
        assert!(
            three < 0.2 * one.max(1e-30),
            "outer passes did not tighten the coupling: {one:.3e} -> {three:.3e}"
        );
    }
}
