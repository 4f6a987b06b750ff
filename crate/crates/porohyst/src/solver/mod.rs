//! Staggered implicit time stepping for the regularized coupled system.
//!
//! One step advances, in order: the momentum balance (implicit velocity
//! update with Kelvin–Voigt viscosity, elastic plus stop stress, and the
//! pressure/temperature coupling lagged from the previous outer pass), the
//! plastic stop at every quadrature point, the pressure balance (an
//! L-scheme fixed point that handles the hysteretic storage term), and the
//! temperature balance (implicit with all ledgered heat sources). Optional
//! extra outer passes re-run the chain with refreshed coupling values;
//! hysteresis and plasticity ledgers are committed exactly once, on the
//! final pass.
//!
//! Every step closes with an energy audit: the change of the total energy
//! plus every signed dissipation/transfer term must cancel to roundoff.
//! [`StepReport`] carries the audited terms, the temperature positivity
//! check against its lower envelope, and the truncation activity flags.

mod parallel;
mod step;

pub use parallel::{map_indexed, map_slice_mut};

use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use thiserror::Error;

use crate::constitutive::{ConstitutiveError, ConstitutiveSet};
use crate::discretization::SpaceDisc;
use crate::hysteresis::{HysteresisError, InitialMemoryCurve, MemoryState, RGrid};
use crate::plasticity::{IsotropicTensor4, PlasticPointState, ScalarStop, SymTensor3};

/// Time-dependent boundary datum for the Robin conditions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BoundaryDrive {
    Constant(f64),
    /// Jumps from `before` to `after` at `t0`.
    Step { t0: f64, before: f64, after: f64 },
    /// `offset + amp * sin(2 pi freq t)`.
    Sine { offset: f64, amp: f64, freq: f64 },
    /// Periodic triangle wave through `offset` with amplitude `amp`,
    /// starting upward at `t = 0`.
    Triangle { offset: f64, amp: f64, period: f64 },
    /// `start + rate * t`.
    Ramp { start: f64, rate: f64 },
}

impl BoundaryDrive {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            BoundaryDrive::Constant(c) => c,
            BoundaryDrive::Step { t0, before, after } => {
                if t < t0 {
                    before
                } else {
                    after
                }
            }
            BoundaryDrive::Sine { offset, amp, freq } => {
                offset + amp * (2.0 * std::f64::consts::PI * freq * t).sin()
            }
            BoundaryDrive::Triangle { offset, amp, period } => {
                let phase = (t / period).rem_euclid(1.0);
                let tri = if phase < 0.25 {
                    4.0 * phase
                } else if phase < 0.75 {
                    2.0 - 4.0 * phase
                } else {
                    4.0 * phase - 4.0
                };
                offset + amp * tri
            }
            BoundaryDrive::Ramp { start, rate } => start + rate * t,
        }
    }

    /// Conservative lower/upper bounds of the drive over `[0, t_end]`.
    pub fn bounds(&self, t_end: f64) -> (f64, f64) {
        match *self {
            BoundaryDrive::Constant(c) => (c, c),
            BoundaryDrive::Step { before, after, .. } => (before.min(after), before.max(after)),
            BoundaryDrive::Sine { offset, amp, .. } => (offset - amp.abs(), offset + amp.abs()),
            BoundaryDrive::Triangle { offset, amp, .. } => (offset - amp.abs(), offset + amp.abs()),
            BoundaryDrive::Ramp { start, rate } => {
                let end = start + rate * t_end;
                (start.min(end), start.max(end))
            }
        }
    }

    pub fn sup_abs(&self, t_end: f64) -> f64 {
        let (lo, hi) = self.bounds(t_end);
        lo.abs().max(hi.abs())
    }

    fn is_finite(&self) -> bool {
        match *self {
            BoundaryDrive::Constant(c) => c.is_finite(),
            BoundaryDrive::Step { t0, before, after } => {
                t0.is_finite() && before.is_finite() && after.is_finite()
            }
            BoundaryDrive::Sine { offset, amp, freq } => {
                offset.is_finite() && amp.is_finite() && freq.is_finite()
            }
            BoundaryDrive::Triangle { offset, amp, period } => {
                offset.is_finite() && amp.is_finite() && period.is_finite() && period > 0.0
            }
            BoundaryDrive::Ramp { start, rate } => start.is_finite() && rate.is_finite(),
        }
    }
}

/// The pair of boundary drives entering the Robin data.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Drives {
    pub p_star: BoundaryDrive,
    pub theta_star: BoundaryDrive,
}

impl Default for Drives {
    fn default() -> Self {
        Drives {
            p_star: BoundaryDrive::Constant(0.5),
            theta_star: BoundaryDrive::Constant(1.0),
        }
    }
}

/// Plastic state at every quadrature point. The one-dimensional spectral
/// backend carries the scalar stop (deviatoric flow degenerates in one
/// dimension); the mesh backend carries the full tensor stop.
#[derive(Clone)]
pub enum QuadPlastic {
    Scalar(Vec<ScalarStop>),
    Tensor(Vec<PlasticPointState>),
}

impl QuadPlastic {
    pub fn len(&self) -> usize {
        match self {
            QuadPlastic::Scalar(v) => v.len(),
            QuadPlastic::Tensor(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Complete discrete state at one time level. Restarting from a stored
/// state reproduces the original run bitwise: the step index (not the
/// floating-point time) is authoritative, and every solver-internal
/// quantity is a deterministic function of the state.
#[derive(Clone)]
pub struct FieldState {
    pub t: f64,
    pub step_index: u64,
    /// Displacement coefficients.
    pub u: DVector<f64>,
    /// Velocity coefficients.
    pub w: DVector<f64>,
    /// Pressure coefficients.
    pub p: DVector<f64>,
    /// Temperature coefficients.
    pub theta: DVector<f64>,
    /// Hysteresis memory, one per quadrature point.
    pub memory: Vec<MemoryState>,
    /// Plastic stop state, one per quadrature point.
    pub plastic: QuadPlastic,
}

/// Solver controls. Fields mirror the configuration keys (section `solver.`).
#[derive(Clone, Copy, Debug)]
pub struct SolverConfig {
    /// Time step.
    pub dt: f64,
    /// Final time; must be an integer multiple of `dt`.
    pub t_end: f64,
    /// Acceleration-regularization weight (the small parameter of the
    /// vanishing-viscosity limit).
    pub delta: f64,
    /// Cut-off radius `R` shared by the pressure, temperature, and
    /// gradient-square truncations. Must exceed the memory bound `k_mem`.
    pub r_cut: f64,
    /// Outer staggered passes per step (ledgers commit on the last).
    pub outer_passes: usize,
    /// Nodal sup-norm tolerance of the pressure fixed point.
    pub picard_tol: f64,
    /// Iteration cap of the pressure fixed point.
    pub picard_max: usize,
    /// Number of play elements in the hysteresis discretization.
    pub grid_n: usize,
    /// Worker threads for per-quadrature-point loops. Results are bitwise
    /// independent of this value.
    pub threads: usize,
    /// Spatially constant initial pressure.
    pub p0: f64,
    /// Spatially constant initial temperature.
    pub theta0: f64,
    /// Coefficient of the first displacement mode at `t = 0` (spectral
    /// backend only).
    pub u0_mode: f64,
    /// Coefficient of the first velocity mode at `t = 0` (spectral backend
    /// only).
    pub w0_mode: f64,
    /// Diagnostic fault injection: scales the hysteresis heat fed to the
    /// temperature equation. Anything other than 1 breaks the energy audit
    /// on purpose (used by the self test).
    pub fault_qg_scale: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            dt: 1e-3,
            t_end: 1.0,
            delta: 1e-3,
            r_cut: 3.0,
            outer_passes: 2,
            picard_tol: 1e-10,
            picard_max: 100,
            grid_n: 256,
            threads: 1,
            p0: 0.0,
            theta0: 1.0,
            u0_mode: 0.0,
            w0_mode: 0.0,
            fault_qg_scale: 1.0,
        }
    }
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(transparent)]
    Constitutive(#[from] ConstitutiveError),
    #[error("hysteresis state: {0}")]
    Hysteresis(#[from] HysteresisError),
    #[error("solver configuration: {detail}")]
    Config { detail: String },
    #[error("initial data: {detail}")]
    InitialData { detail: String },
    #[error("numerical failure at step {step}: {detail}")]
    Numerical { step: u64, detail: String },
}

/// Stored-energy levels at one time, split by reservoir.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EnergyLevels {
    /// Solid kinetic energy.
    pub kinetic: f64,
    /// Energy of the acceleration regularization (`delta`-weighted).
    pub regularization: f64,
    /// Elastic strain energy.
    pub elastic: f64,
    /// Stored energy of the plastic stop (complementary form).
    pub stop_stored: f64,
    /// Dual potential of the pressure cut-off `K_R`.
    pub pressure_cut: f64,
    /// Dual potential of the saturation curve.
    pub saturation: f64,
    /// Hysteresis potential `V0`.
    pub hysteresis: f64,
    /// Thermal energy `c0 * integral of theta`.
    pub thermal: f64,
    /// Linear prestress potential from the reference temperature offset.
    pub prestress: f64,
    /// Sum of all of the above.
    pub total: f64,
}

/// Signed terms of the per-step energy audit. The defining identity is
///
/// ```text
/// residual = de_total + nd_kin + nd_e + d_plast + diss_pres + trunc_grad
///          + diff_res - coup_mismatch + robin_p + robin_t - gravity_work
/// ```
///
/// All named dissipation terms are nonnegative up to roundoff; the residual
/// itself must vanish to roundoff, which is what the audit asserts.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AuditTerms {
    /// Change of the total stored energy over the step.
    pub de_total: f64,
    /// Numerical dissipation of the implicit velocity update (kinetic plus
    /// regularization parts).
    pub nd_kin: f64,
    /// Numerical dissipation of the implicit displacement update (elastic
    /// part).
    pub nd_e: f64,
    /// Plastic dissipation beyond the stop heat (quadratic remainder of the
    /// implicit stop update).
    pub d_plast: f64,
    /// Viscous work; informational: it reappears verbatim as a temperature
    /// source, so it cancels inside `de_total`.
    pub d_visc: f64,
    /// Stop heat released to the temperature equation (informational).
    pub q_p: f64,
    /// Hysteresis heat released to the temperature equation
    /// (informational, unscaled by any fault injection).
    pub q_g: f64,
    /// Dissipation of the implicit update of the cut-off and saturation
    /// storage terms (Bregman remainder).
    pub diss_pres: f64,
    /// Darcy heat discarded by the gradient-square truncation.
    pub trunc_grad: f64,
    /// Roundoff gap between the assembled Darcy form and its quadrature
    /// ledger.
    pub diff_res: f64,
    /// Coupling work mismatch from lagging the pressure in the momentum
    /// equation (vanishes with converged outer passes).
    pub coup_mismatch: f64,
    /// Energy leaving through the pressure Robin boundary.
    pub robin_p: f64,
    /// Energy leaving through the temperature Robin boundary.
    pub robin_t: f64,
    /// Work done by gravity on the skeleton.
    pub gravity_work: f64,
    /// The audit residual (should be roundoff).
    pub residual: f64,
    /// `|residual| / max(1, |total energy|)`.
    pub rel_residual: f64,
}

impl AuditTerms {
    /// Recompute the residual from the stored parts; equals `residual`
    /// bitwise when the report is intact.
    pub fn recompute_residual(&self) -> f64 {
        self.de_total + self.nd_kin + self.nd_e + self.d_plast + self.diss_pres
            + self.trunc_grad
            + self.diff_res
            - self.coup_mismatch
            + self.robin_p
            + self.robin_t
            - self.gravity_work
    }
}

/// Everything observed during one accepted time step.
#[derive(Clone, Debug)]
pub struct StepReport {
    /// Index of the completed step (1-based).
    pub step: u64,
    /// Time at the end of the step.
    pub t: f64,
    /// Outer passes executed.
    pub outer_passes: usize,
    /// Fixed-point iterations of the final pressure solve.
    pub picard_iters: usize,
    /// Final nodal sup difference between fixed-point iterates.
    pub picard_diff: f64,
    /// Algebraic residual of the pressure system at the accepted iterate
    /// (relative).
    pub picard_res: f64,
    /// Relative algebraic residual of the momentum solve.
    pub lin_res_mom: f64,
    /// Relative algebraic residual of the temperature solve.
    pub lin_res_theta: f64,
    /// Minimum temperature over quadrature points at the end of the step.
    pub min_theta: f64,
    /// Lower temperature envelope `v(t)` at the end of the step.
    pub floor_v: f64,
    /// Whether `min_theta` is positive and respects the envelope.
    pub floor_ok: bool,
    /// Sup of `|p|` over quadrature points.
    pub sup_p: f64,
    /// Whether the pressure cut-off was active anywhere.
    pub k_r_active: bool,
    /// Whether the gradient-square truncation was active anywhere.
    pub trunc_active: bool,
    /// Whether the temperature cut-off was active anywhere.
    pub theta_cut_active: bool,
    /// Stored energy at the end of the step.
    pub energy: EnergyLevels,
    /// Audit terms of the step.
    pub audit: AuditTerms,
    /// Soft anomalies (floor or sign violations); never fatal here.
    pub warnings: Vec<String>,
}

/// Field samples along a run, including the initial state.
#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    pub dt: f64,
    pub times: Vec<f64>,
    pub w: Vec<DVector<f64>>,
    pub p: Vec<DVector<f64>>,
    pub theta: Vec<DVector<f64>>,
}

impl Trajectory {
    fn seeded(dt: f64, state: &FieldState) -> Self {
        let mut tr = Trajectory { dt, ..Default::default() };
        tr.push(state);
        tr
    }

    fn push(&mut self, state: &FieldState) {
        self.times.push(state.t);
        self.w.push(state.w.clone());
        self.p.push(state.p.clone());
        self.theta.push(state.theta.clone());
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Sup over shared samples of the `m`-norm of the difference between two
/// sample sequences.
pub fn sup_m_distance(a: &[DVector<f64>], b: &[DVector<f64>], m: &DMatrix<f64>) -> f64 {
    assert_eq!(a.len(), b.len(), "sample sequences must share their time grid");
    let mut sup = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        sup = sup.max(d.dot(&(m * &d)).max(0.0).sqrt());
    }
    sup
}

/// Trapezoid-in-time L2 norm of the `k`-seminorm of the difference between
/// two sample sequences on a uniform time grid with spacing `dt`.
pub fn l2t_k_distance(a: &[DVector<f64>], b: &[DVector<f64>], k: &DMatrix<f64>, dt: f64) -> f64 {
    assert_eq!(a.len(), b.len(), "sample sequences must share their time grid");
    let n = a.len();
    let mut acc = 0.0f64;
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        let d = x - y;
        let sq = d.dot(&(k * &d)).max(0.0);
        let wt = if i == 0 || i + 1 == n { 0.5 * dt } else { dt };
        acc += wt * sq;
    }
    acc.sqrt()
}

/// Reports of every step of a run, plus optional field samples.
#[derive(Clone, Debug)]
pub struct RunRecord {
    pub reports: Vec<StepReport>,
    pub trajectory: Option<Trajectory>,
}

impl RunRecord {
    /// Largest relative audit residual over the run.
    pub fn max_rel_residual(&self) -> f64 {
        self.reports.iter().map(|r| r.audit.rel_residual).fold(0.0, f64::max)
    }

    /// Sup of `|p|` over the run (quadrature points).
    pub fn sup_p(&self) -> f64 {
        self.reports.iter().map(|r| r.sup_p).fold(0.0, f64::max)
    }

    /// Smallest quadrature temperature seen.
    pub fn min_theta(&self) -> f64 {
        self.reports.iter().map(|r| r.min_theta).fold(f64::INFINITY, f64::min)
    }

    /// Steps on which the pressure cut-off was active.
    pub fn k_r_active_steps(&self) -> u64 {
        self.reports.iter().filter(|r| r.k_r_active).count() as u64
    }

    /// Steps whose temperature fell below the positivity envelope.
    pub fn floor_violations(&self) -> u64 {
        self.reports.iter().filter(|r| !r.floor_ok).count() as u64
    }
}

/// Strain representation matching the plastic variant of the backend.
pub(crate) enum QpStrains {
    Scalar(Vec<f64>),
    Tensor(Vec<SymTensor3>),
}

pub(crate) fn qp_strains(disc: &SpaceDisc, v: &DVector<f64>) -> QpStrains {
    match disc {
        SpaceDisc::Spectral(_) => QpStrains::Scalar(disc.tables().strain_scalar_at_qp(v)),
        SpaceDisc::Fem(_) => QpStrains::Tensor(disc.tables().strain_tensor_at_qp(v)),
    }
}

/// The assembled solver: discretization, laws, controls, and the factored
/// momentum operator (constant in time, factored once).
pub struct Solver {
    disc: SpaceDisc,
    consts: ConstitutiveSet,
    cfg: SolverConfig,
    drives: Drives,
    mom_matrix: DMatrix<f64>,
    mom_chol: Cholesky<f64, Dyn>,
    /// Scalar stop modulus (uniaxial plastic branch) for the spectral
    /// backend.
    ap_scalar: f64,
    /// Tensor stop stiffness for the mesh backend.
    ap_tensor: IsotropicTensor4,
    /// Scalar viscosity modulus for the spectral backend.
    b_scalar: f64,
    /// Tensor viscosity for the mesh backend.
    b_tensor: IsotropicTensor4,
    /// Constant of the temperature lower envelope.
    floor_c: f64,
    n_steps: u64,
}

impl Solver {
    pub fn new(
        disc: SpaceDisc,
        consts: ConstitutiveSet,
        cfg: SolverConfig,
        drives: Drives,
    ) -> Result<Self, SolverError> {
        let config_err = |detail: String| SolverError::Config { detail };
        if !(cfg.dt > 0.0 && cfg.dt.is_finite()) {
            return Err(config_err(format!("solver.dt must be positive and finite, got {}", cfg.dt)));
        }
        if !(cfg.t_end > 0.0 && cfg.t_end.is_finite()) {
            return Err(config_err(format!(
                "solver.t_end must be positive and finite, got {}",
                cfg.t_end
            )));
        }
        let steps_f = cfg.t_end / cfg.dt;
        let n_steps = steps_f.round();
        if n_steps < 1.0 || (n_steps * cfg.dt - cfg.t_end).abs() > 1e-9 * cfg.t_end.max(1.0) {
            return Err(config_err(format!(
                "solver.t_end = {} must be an integer multiple of solver.dt = {}",
                cfg.t_end, cfg.dt
            )));
        }
        let n_steps = n_steps as u64;
        if !(cfg.delta >= 0.0 && cfg.delta.is_finite()) {
            return Err(config_err(format!(
                "solver.delta must be nonnegative and finite, got {}",
                cfg.delta
            )));
        }
        if cfg.outer_passes == 0 {
            return Err(config_err("solver.outer_passes must be at least 1".into()));
        }
        if !(cfg.picard_tol > 0.0 && cfg.picard_tol.is_finite()) {
            return Err(config_err(format!(
                "solver.picard_tol must be positive, got {}",
                cfg.picard_tol
            )));
        }
        if cfg.picard_max == 0 {
            return Err(config_err("solver.picard_max must be at least 1".into()));
        }
        if cfg.grid_n == 0 {
            return Err(config_err("solver.grid_n must be at least 1".into()));
        }
        if cfg.threads == 0 {
            return Err(config_err("solver.threads must be at least 1".into()));
        }
        if !(cfg.fault_qg_scale.is_finite()) {
            return Err(config_err("solver.fault_qg_scale must be finite".into()));
        }
        if !drives.p_star.is_finite() || !drives.theta_star.is_finite() {
            return Err(config_err("boundary drives must have finite parameters".into()));
        }

        let mp = &consts.params;
        // Hypothesis surrogates that depend on the drive and initial data:
        // the memory bound must dominate the reachable pressure range, and
        // the temperature drive must stay above the floor.
        let drive_sup = cfg.p0.abs().max(drives.p_star.sup_abs(cfg.t_end));
        mp.validate(drive_sup)?;
        let theta_drive_min = drives.theta_star.bounds(cfg.t_end).0;
        if theta_drive_min < mp.theta_bar {
            return Err(SolverError::Constitutive(ConstitutiveError::Hypothesis {
                clause: "h1",
                detail: format!(
                    "boundary temperature drive reaches {} below the floor theta_bar = {}",
                    theta_drive_min, mp.theta_bar
                ),
            }));
        }
        if !(cfg.r_cut > mp.k_mem) {
            return Err(config_err(format!(
                "cut-off radius solver.r_cut = {} must exceed the memory bound material.k_mem = {}",
                cfg.r_cut, mp.k_mem
            )));
        }

        let f = disc.forms();
        let dt = cfg.dt;
        let mut mom_matrix = &f.mass_u * mp.rho_s;
        if cfg.delta > 0.0 {
            mom_matrix += &f.damp * cfg.delta;
        }
        mom_matrix += &f.visc * dt;
        mom_matrix += (&f.stiff_e + &f.stiff_p) * (dt * dt);
        let mom_chol = Cholesky::new(mom_matrix.clone()).ok_or_else(|| SolverError::Numerical {
            step: 0,
            detail: "momentum operator is not positive definite".into(),
        })?;

        let floor_c = mp.beta * mp.beta * cfg.r_cut * cfg.r_cut * f.domain_measure
            / (4.0 * f.visc_min_eigen);

        Ok(Solver {
            ap_scalar: 2.0 * mp.mu_p + mp.lambda_p,
            ap_tensor: IsotropicTensor4::new(mp.lambda_p, mp.mu_p),
            b_scalar: 2.0 * mp.eta + mp.omega,
            b_tensor: IsotropicTensor4::new(mp.omega, mp.eta),
            floor_c,
            n_steps,
            disc,
            consts,
            cfg,
            drives,
            mom_matrix,
            mom_chol,
        })
    }

    pub fn disc(&self) -> &SpaceDisc {
        &self.disc
    }

    pub fn consts(&self) -> &ConstitutiveSet {
        &self.consts
    }

    pub fn cfg(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn drives(&self) -> &Drives {
        &self.drives
    }

    /// Total number of steps a full run takes.
    pub fn n_steps(&self) -> u64 {
        self.n_steps
    }

    /// Lower temperature envelope `v(t)`: the exact solution of the worst-case
    /// cooling balance `c0 v' = -C v^2` from the floor `theta_bar`, with `C`
    /// built from the coupling coefficient, the cut-off radius, the domain
    /// measure, and the smallest eigenvalue of the viscous form.
    pub fn temperature_floor(&self, t: f64) -> f64 {
        let mp = &self.consts.params;
        1.0 / (self.floor_c * t / mp.c0 + 1.0 / mp.theta_bar)
    }

    /// Build the initial state from the configured constant/modal data.
    pub fn init_state(&self) -> Result<FieldState, SolverError> {
        let mp = &self.consts.params;
        let cfg = &self.cfg;
        if !(cfg.p0.is_finite() && cfg.p0.abs() <= mp.k_mem) {
            return Err(SolverError::InitialData {
                detail: format!(
                    "initial pressure p0 = {} must satisfy |p0| <= k_mem = {}",
                    cfg.p0, mp.k_mem
                ),
            });
        }
        if !(cfg.theta0.is_finite() && cfg.theta0 >= mp.theta_bar) {
            return Err(SolverError::InitialData {
                detail: format!(
                    "initial temperature theta0 = {} must be at least theta_bar = {}",
                    cfg.theta0, mp.theta_bar
                ),
            });
        }
        let n_u = self.disc.n_u();
        let mut u = DVector::zeros(n_u);
        let mut w = DVector::zeros(n_u);
        if cfg.u0_mode != 0.0 || cfg.w0_mode != 0.0 {
            match self.disc {
                SpaceDisc::Spectral(_) => {
                    u[0] = cfg.u0_mode;
                    w[0] = cfg.w0_mode;
                }
                SpaceDisc::Fem(_) => {
                    return Err(SolverError::Config {
                        detail: "modal initial displacement data requires the spectral backend"
                            .into(),
                    });
                }
            }
        }
        let forms = self.disc.forms();
        let p = &forms.ones_s * cfg.p0;
        let theta = &forms.ones_s * cfg.theta0;

        let tables = self.disc.tables();
        let grid = RGrid::uniform(cfg.grid_n, mp.r_hat);
        let curve = InitialMemoryCurve::zero(mp.r_hat);
        let density = self.consts.density.as_ref();
        let p_q = tables.scalar_at_qp(&p);
        let mut memory = Vec::with_capacity(p_q.len());
        for &pq in &p_q {
            memory.push(MemoryState::init(&curve, pq, Arc::clone(&grid), density)?);
        }

        let plastic = match qp_strains(&self.disc, &u) {
            QpStrains::Scalar(eps) => QuadPlastic::Scalar(
                eps.iter()
                    .map(|&e| ScalarStop::from_initial_strain(e, self.ap_scalar, mp.sigma_y))
                    .collect(),
            ),
            QpStrains::Tensor(eps) => QuadPlastic::Tensor(
                eps.iter()
                    .map(|e| PlasticPointState::from_initial_strain(e, &self.ap_tensor, mp.sigma_y))
                    .collect(),
            ),
        };

        Ok(FieldState { t: 0.0, step_index: 0, u, w, p, theta, memory, plastic })
    }

    /// Evaluate every stored-energy reservoir of a state.
    pub fn energy_levels(&self, state: &FieldState) -> EnergyLevels {
        let mp = &self.consts.params;
        let f = self.disc.forms();
        let tables = self.disc.tables();
        let kinetic = 0.5 * mp.rho_s * state.w.dot(&(&f.mass_u * &state.w));
        let regularization = if self.cfg.delta > 0.0 {
            0.5 * self.cfg.delta * state.w.dot(&(&f.damp * &state.w))
        } else {
            0.0
        };
        let elastic = 0.5 * state.u.dot(&(&f.stiff_e * &state.u));
        let wq = &tables.wq;
        let stop_stored = match &state.plastic {
            QuadPlastic::Scalar(v) => v
                .iter()
                .zip(wq)
                .map(|(s, &w)| w * s.stored_energy(self.ap_scalar))
                .sum(),
            QuadPlastic::Tensor(v) => v
                .iter()
                .zip(wq)
                .map(|(s, &w)| w * s.stored_energy(&self.ap_tensor))
                .sum(),
        };
        let p_q = tables.scalar_at_qp(&state.p);
        let mut pressure_cut = 0.0;
        let mut saturation = 0.0;
        for (q, &pq) in p_q.iter().enumerate() {
            pressure_cut += wq[q] * crate::constitutive::k_cut_dual(pq, self.cfg.r_cut);
            saturation += wq[q] * self.consts.saturation.dual_potential(pq);
        }
        let hysteresis: f64 =
            state.memory.iter().zip(wq).map(|(m, &w)| w * m.ledger().v0).sum();
        let thermal = mp.c0 * f.ones_s.dot(&(&f.mass_s_theta * &state.theta));
        let prestress = if mp.theta_c != 0.0 {
            let div_u = tables.div_at_qp(&state.u);
            -mp.beta * mp.theta_c * div_u.iter().zip(wq).map(|(d, &w)| w * d).sum::<f64>()
        } else {
            0.0
        };
        let total = kinetic
            + regularization
            + elastic
            + stop_stored
            + pressure_cut
            + saturation
            + hysteresis
            + thermal
            + prestress;
        EnergyLevels {
            kinetic,
            regularization,
            elastic,
            stop_stored,
            pressure_cut,
            saturation,
            hysteresis,
            thermal,
            prestress,
            total,
        }
    }

    /// Advance `state` to `t_end`, collecting a report per step and, when
    /// `record` is set, field samples for trajectory comparisons.
    pub fn run(&self, state: &mut FieldState, record: bool) -> Result<RunRecord, SolverError> {
        let mut reports = Vec::with_capacity((self.n_steps - state.step_index.min(self.n_steps)) as usize);
        let mut trajectory = record.then(|| Trajectory::seeded(self.cfg.dt, state));
        while state.step_index < self.n_steps {
            let report = self.step(state)?;
            if let Some(tr) = trajectory.as_mut() {
                tr.push(state);
            }
            reports.push(report);
        }
        Ok(RunRecord { reports, trajectory })
    }
}

/// Per-run summary of a vanishing-regularization continuation.
#[derive(Clone, Copy, Debug)]
pub struct ContinuationEntry {
    pub delta: f64,
    pub r_cut: f64,
    pub sup_p: f64,
    pub min_theta: f64,
    pub k_r_active_steps: u64,
    pub max_rel_residual: f64,
}

/// Distances between two consecutive continuation runs: sup-in-time spatial
/// norms for the velocity, pressure, and temperature, plus the
/// L2-in-time gradient seminorm of the temperature difference.
#[derive(Clone, Copy, Debug)]
pub struct ContinuationGap {
    pub d_velocity: f64,
    pub d_pressure: f64,
    pub d_theta: f64,
    pub d_grad_theta: f64,
}

#[derive(Clone, Debug)]
pub struct ContinuationReport {
    pub entries: Vec<ContinuationEntry>,
    pub gaps: Vec<ContinuationGap>,
}

/// Run the solver along a sequence of regularization weights `deltas`
/// (nonincreasing) and cut-off radii `rs` (nondecreasing) on one fixed
/// discretization, and measure how fast consecutive trajectories approach
/// each other.
pub fn continuation_run(
    disc: &SpaceDisc,
    consts: &ConstitutiveSet,
    base: &SolverConfig,
    drives: &Drives,
    deltas: &[f64],
    rs: &[f64],
) -> Result<ContinuationReport, SolverError> {
    if deltas.len() != rs.len() || deltas.is_empty() {
        return Err(SolverError::Config {
            detail: format!(
                "continuation needs equally long nonempty sequences, got {} deltas and {} radii",
                deltas.len(),
                rs.len()
            ),
        });
    }
    if deltas.windows(2).any(|w| w[1] > w[0]) {
        return Err(SolverError::Config {
            detail: "continuation deltas must be nonincreasing".into(),
        });
    }
    if rs.windows(2).any(|w| w[1] < w[0]) {
        return Err(SolverError::Config {
            detail: "continuation cut-off radii must be nondecreasing".into(),
        });
    }

    let forms = disc.forms();
    let mut entries = Vec::with_capacity(deltas.len());
    let mut gaps = Vec::new();
    let mut prev: Option<Trajectory> = None;
    for (&delta, &r_cut) in deltas.iter().zip(rs) {
        let cfg = SolverConfig { delta, r_cut, ..*base };
        let solver = Solver::new(disc.clone(), consts.clone(), cfg, *drives)?;
        let mut state = solver.init_state()?;
        let record = solver.run(&mut state, true)?;
        let traj = record.trajectory.as_ref().expect("recording was requested");
        entries.push(ContinuationEntry {
            delta,
            r_cut,
            sup_p: record.sup_p(),
            min_theta: record.min_theta(),
            k_r_active_steps: record.k_r_active_steps(),
            max_rel_residual: record.max_rel_residual(),
        });
        if let Some(prev_traj) = &prev {
            gaps.push(ContinuationGap {
                d_velocity: sup_m_distance(&prev_traj.w, &traj.w, &forms.mass_u),
                d_pressure: sup_m_distance(&prev_traj.p, &traj.p, &forms.mass_s),
                d_theta: sup_m_distance(&prev_traj.theta, &traj.theta, &forms.mass_s),
                d_grad_theta: l2t_k_distance(
                    &prev_traj.theta,
                    &traj.theta,
                    &forms.stiff_s_unit,
                    base.dt,
                ),
            });
        }
        prev = record.trajectory;
    }
    Ok(ContinuationReport { entries, gaps })
}
