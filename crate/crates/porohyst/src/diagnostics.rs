//! Run-level reporting: the versioned diagnostics CSV, machine-readable
//! run summaries, refinement studies with observed convergence orders, and
//! the pressure-boundedness refinement matrix.
//!
//! All floating-point values are printed with the shortest representation
//! that round-trips, so identical runs produce bitwise identical reports.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DVector;

use crate::constitutive::ConstitutiveSet;
use crate::discretization::SpaceDisc;
use crate::solver::{
    l2t_k_distance, sup_m_distance, Drives, RunRecord, Solver, SolverConfig, SolverError,
    StepReport, Trajectory,
};

/// Schema tag of the per-step diagnostics CSV.
pub const DIAGNOSTICS_SCHEMA: &str = "porohyst.diagnostics.v1";
/// Schema tag of the run summary.
pub const SUMMARY_SCHEMA: &str = "porohyst.summary.v1";
/// Schema tag of the study report.
pub const STUDY_SCHEMA: &str = "porohyst.study.v1";

/// Fixed column set of the diagnostics CSV. The header is part of the
/// versioned schema: append-only, never reordered within a version.
pub const DIAGNOSTICS_COLUMNS: &[&str] = &[
    "step",
    "t",
    "e_total",
    "e_kinetic",
    "e_reg",
    "e_elastic",
    "e_stop",
    "e_cut",
    "e_sat",
    "e_hyst",
    "e_thermal",
    "e_prestress",
    "audit_residual",
    "audit_rel",
    "nd_kin",
    "nd_e",
    "d_plast",
    "d_visc",
    "q_p",
    "q_g",
    "diss_pres",
    "trunc_grad",
    "diff_res",
    "coup_mismatch",
    "robin_p",
    "robin_t",
    "gravity_work",
    "min_theta",
    "floor_v",
    "floor_ok",
    "sup_p",
    "k_r_active",
    "trunc_active",
    "theta_cut_active",
    "picard_iters",
    "picard_diff",
    "picard_res",
    "lin_res_mom",
    "lin_res_theta",
    "outer_passes",
    "n_warnings",
];

fn b01(b: bool) -> u8 {
    u8::from(b)
}

/// Render the per-step diagnostics of a run as a versioned CSV document.
pub fn diagnostics_csv(reports: &[StepReport]) -> String {
    let mut out = String::new();
    out.push_str(&format!("# {DIAGNOSTICS_SCHEMA}\n"));
    out.push_str(&DIAGNOSTICS_COLUMNS.join(","));
    out.push('\n');
    for r in reports {
        let e = &r.energy;
        let a = &r.audit;
        let row = [
            r.step.to_string(),
            r.t.to_string(),
            e.total.to_string(),
            e.kinetic.to_string(),
            e.regularization.to_string(),
            e.elastic.to_string(),
            e.stop_stored.to_string(),
            e.pressure_cut.to_string(),
            e.saturation.to_string(),
            e.hysteresis.to_string(),
            e.thermal.to_string(),
            e.prestress.to_string(),
            a.residual.to_string(),
            a.rel_residual.to_string(),
            a.nd_kin.to_string(),
            a.nd_e.to_string(),
            a.d_plast.to_string(),
            a.d_visc.to_string(),
            a.q_p.to_string(),
            a.q_g.to_string(),
            a.diss_pres.to_string(),
            a.trunc_grad.to_string(),
            a.diff_res.to_string(),
            a.coup_mismatch.to_string(),
            a.robin_p.to_string(),
            a.robin_t.to_string(),
            a.gravity_work.to_string(),
            r.min_theta.to_string(),
            r.floor_v.to_string(),
            b01(r.floor_ok).to_string(),
            r.sup_p.to_string(),
            b01(r.k_r_active).to_string(),
            b01(r.trunc_active).to_string(),
            b01(r.theta_cut_active).to_string(),
            r.picard_iters.to_string(),
            r.picard_diff.to_string(),
            r.picard_res.to_string(),
            r.lin_res_mom.to_string(),
            r.lin_res_theta.to_string(),
            r.outer_passes.to_string(),
            r.warnings.len().to_string(),
        ];
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Reported integrability exponent of the temperature gradient,
/// `q* = 2 (1 + eta) / eta`.
pub fn q_star(eta: f64) -> f64 {
    2.0 * (1.0 + eta) / eta
}

/// Machine-readable end-of-run summary. [`fmt::Display`] renders it as
/// `key = value` lines in a fixed order.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub backend: String,
    pub steps: u64,
    pub dt: f64,
    pub t_end: f64,
    pub delta: f64,
    pub r_cut: f64,
    pub grid_n: usize,
    pub outer_passes: usize,
    pub final_t: f64,
    pub e_total: f64,
    pub e_kinetic: f64,
    pub e_reg: f64,
    pub e_elastic: f64,
    pub e_stop: f64,
    pub e_cut: f64,
    pub e_sat: f64,
    pub e_hyst: f64,
    pub e_thermal: f64,
    pub e_prestress: f64,
    pub sup_p: f64,
    pub min_theta: f64,
    pub floor_violations: u64,
    pub k_r_active_steps: u64,
    pub trunc_active_steps: u64,
    pub theta_cut_active_steps: u64,
    pub q_p_total: f64,
    pub q_g_total: f64,
    pub audit_max_abs: f64,
    pub audit_max_rel: f64,
    pub picard_iters_max: usize,
    pub picard_iters_total: u64,
    pub lin_res_mom_max: f64,
    pub lin_res_theta_max: f64,
    pub warnings_total: u64,
    pub q_star: f64,
}

impl RunSummary {
    pub fn new(solver: &Solver, record: &RunRecord) -> Self {
        let cfg = solver.cfg();
        let last = record.reports.last();
        let energy = last.map(|r| r.energy).unwrap_or_default();
        let reports = &record.reports;
        RunSummary {
            backend: solver.disc().describe(),
            steps: reports.len() as u64,
            dt: cfg.dt,
            t_end: cfg.t_end,
            delta: cfg.delta,
            r_cut: cfg.r_cut,
            grid_n: cfg.grid_n,
            outer_passes: cfg.outer_passes,
            final_t: last.map(|r| r.t).unwrap_or(0.0),
            e_total: energy.total,
            e_kinetic: energy.kinetic,
            e_reg: energy.regularization,
            e_elastic: energy.elastic,
            e_stop: energy.stop_stored,
            e_cut: energy.pressure_cut,
            e_sat: energy.saturation,
            e_hyst: energy.hysteresis,
            e_thermal: energy.thermal,
            e_prestress: energy.prestress,
            sup_p: record.sup_p(),
            min_theta: record.min_theta(),
            floor_violations: record.floor_violations(),
            k_r_active_steps: record.k_r_active_steps(),
            trunc_active_steps: reports.iter().filter(|r| r.trunc_active).count() as u64,
            theta_cut_active_steps: reports.iter().filter(|r| r.theta_cut_active).count() as u64,
            q_p_total: reports.iter().map(|r| r.audit.q_p).sum(),
            q_g_total: reports.iter().map(|r| r.audit.q_g).sum(),
            audit_max_abs: reports.iter().map(|r| r.audit.residual.abs()).fold(0.0, f64::max),
            audit_max_rel: record.max_rel_residual(),
            picard_iters_max: reports.iter().map(|r| r.picard_iters).max().unwrap_or(0),
            picard_iters_total: reports.iter().map(|r| r.picard_iters as u64).sum(),
            lin_res_mom_max: reports.iter().map(|r| r.lin_res_mom).fold(0.0, f64::max),
            lin_res_theta_max: reports.iter().map(|r| r.lin_res_theta).fold(0.0, f64::max),
            warnings_total: reports.iter().map(|r| r.warnings.len() as u64).sum(),
            q_star: q_star(solver.consts().params.eta),
        }
    }
}

impl fmt::Display for RunSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "schema = {SUMMARY_SCHEMA}")?;
        writeln!(f, "backend = {}", self.backend)?;
        writeln!(f, "steps = {}", self.steps)?;
        writeln!(f, "dt = {}", self.dt)?;
        writeln!(f, "t_end = {}", self.t_end)?;
        writeln!(f, "delta = {}", self.delta)?;
        writeln!(f, "r_cut = {}", self.r_cut)?;
        writeln!(f, "grid_n = {}", self.grid_n)?;
        writeln!(f, "outer_passes = {}", self.outer_passes)?;
        writeln!(f, "final_t = {}", self.final_t)?;
        writeln!(f, "e_total = {}", self.e_total)?;
        writeln!(f, "e_kinetic = {}", self.e_kinetic)?;
        writeln!(f, "e_reg = {}", self.e_reg)?;
        writeln!(f, "e_elastic = {}", self.e_elastic)?;
        writeln!(f, "e_stop = {}", self.e_stop)?;
        writeln!(f, "e_cut = {}", self.e_cut)?;
        writeln!(f, "e_sat = {}", self.e_sat)?;
        writeln!(f, "e_hyst = {}", self.e_hyst)?;
        writeln!(f, "e_thermal = {}", self.e_thermal)?;
        writeln!(f, "e_prestress = {}", self.e_prestress)?;
        writeln!(f, "sup_p = {}", self.sup_p)?;
        writeln!(f, "min_theta = {}", self.min_theta)?;
        writeln!(f, "floor_violations = {}", self.floor_violations)?;
        writeln!(f, "k_r_active_steps = {}", self.k_r_active_steps)?;
        writeln!(f, "trunc_active_steps = {}", self.trunc_active_steps)?;
        writeln!(f, "theta_cut_active_steps = {}", self.theta_cut_active_steps)?;
        writeln!(f, "q_p_total = {}", self.q_p_total)?;
        writeln!(f, "q_g_total = {}", self.q_g_total)?;
        writeln!(f, "audit_max_abs = {}", self.audit_max_abs)?;
        writeln!(f, "audit_max_rel = {}", self.audit_max_rel)?;
        writeln!(f, "picard_iters_max = {}", self.picard_iters_max)?;
        writeln!(f, "picard_iters_total = {}", self.picard_iters_total)?;
        writeln!(f, "lin_res_mom_max = {}", self.lin_res_mom_max)?;
        writeln!(f, "lin_res_theta_max = {}", self.lin_res_theta_max)?;
        writeln!(f, "warnings_total = {}", self.warnings_total)?;
        writeln!(f, "q_star = {}", self.q_star)
    }
}

/// Parse a `key = value` document (as produced by [`RunSummary`]) into a
/// map. Later duplicate keys win; malformed lines are skipped.
pub fn parse_key_values(text: &str) -> BTreeMap<String, String> {
    let mut map = BTreeMap::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some((k, v)) = line.split_once('=') {
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
    }
    map
}

/// The single refinement axis of a convergence study.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StudyAxis {
    /// Time step, values strictly decreasing, consecutive ratios integer.
    Dt,
    /// Spatial resolution parameter, values strictly increasing (spectral:
    /// any growth; mesh: exact doubling).
    Resolution,
    /// Regularization weight, values strictly decreasing.
    Delta,
    /// Cut-off radius, values strictly increasing.
    RCut,
}

impl StudyAxis {
    pub fn as_str(&self) -> &'static str {
        match self {
            StudyAxis::Dt => "dt",
            StudyAxis::Resolution => "n",
            StudyAxis::Delta => "delta",
            StudyAxis::RCut => "r",
        }
    }
}

impl std::str::FromStr for StudyAxis {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dt" => Ok(StudyAxis::Dt),
            "n" => Ok(StudyAxis::Resolution),
            "delta" => Ok(StudyAxis::Delta),
            "r" => Ok(StudyAxis::RCut),
            other => Err(format!("unknown study axis '{other}' (expected dt, n, delta, or r)")),
        }
    }
}

/// Per-run facts of a study.
#[derive(Clone, Copy, Debug)]
pub struct StudyEntry {
    pub value: f64,
    pub sup_p: f64,
    pub min_theta: f64,
    pub max_rel_residual: f64,
    pub picard_iters_max: usize,
}

/// Distances between two consecutive study runs, measured on the coarser
/// of the two output grids.
#[derive(Clone, Copy, Debug)]
pub struct StudyGap {
    pub from: f64,
    pub to: f64,
    /// Sup in time of the spatial L2 distance of the pressure.
    pub d_pressure_sup: f64,
    /// L2 in time of the spatial gradient seminorm of the temperature
    /// difference.
    pub d_grad_theta_l2t: f64,
    /// L2 in time of the spatial L2 distance of the discrete acceleration.
    pub d_accel_l2t: f64,
}

/// Observed order between two consecutive gaps, per metric.
#[derive(Clone, Copy, Debug)]
pub struct StudyOrder {
    pub pressure: f64,
    pub grad_theta: f64,
    pub accel: f64,
}

#[derive(Clone, Debug)]
pub struct StudyReport {
    pub axis: StudyAxis,
    pub entries: Vec<StudyEntry>,
    pub gaps: Vec<StudyGap>,
    pub orders: Vec<StudyOrder>,
}

impl StudyReport {
    /// Versioned CSV rendering: one block per table.
    pub fn csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# {STUDY_SCHEMA}\n"));
        out.push_str(&format!("# axis = {}\n", self.axis.as_str()));
        out.push_str("value,sup_p,min_theta,max_rel_residual,picard_iters_max\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                e.value, e.sup_p, e.min_theta, e.max_rel_residual, e.picard_iters_max
            ));
        }
        out.push_str("# gaps between consecutive runs\n");
        out.push_str("from,to,d_pressure_sup,d_grad_theta_l2t,d_accel_l2t\n");
        for g in &self.gaps {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                g.from, g.to, g.d_pressure_sup, g.d_grad_theta_l2t, g.d_accel_l2t
            ));
        }
        out.push_str("# observed orders between consecutive gaps\n");
        out.push_str("pair,order_pressure,order_grad_theta,order_accel\n");
        for (i, o) in self.orders.iter().enumerate() {
            out.push_str(&format!("{},{},{},{}\n", i, o.pressure, o.grad_theta, o.accel));
        }
        out
    }
}

fn config_err(detail: String) -> SolverError {
    SolverError::Config { detail }
}

fn zero_extend(v: &DVector<f64>, len: usize) -> DVector<f64> {
    let mut out = DVector::zeros(len);
    out.rows_mut(0, v.len()).copy_from(v);
    out
}

fn gather(v: &DVector<f64>, map: &[usize]) -> DVector<f64> {
    DVector::from_iterator(map.len(), map.iter().map(|&i| v[i]))
}

fn subsample(vs: &[DVector<f64>], stride: usize) -> Vec<DVector<f64>> {
    vs.iter().step_by(stride).cloned().collect()
}

/// Discrete accelerations `(w(t_j) - w(t_j - dt)) / dt` at every `stride`-th
/// sample, skipping `t = 0` where the backward difference is undefined.
fn accel_samples(traj: &Trajectory, stride: usize) -> Vec<DVector<f64>> {
    let n_c = (traj.len() - 1) / stride;
    (1..=n_c)
        .map(|j| (&traj.w[j * stride] - &traj.w[j * stride - 1]) / traj.dt)
        .collect()
}

/// Distances between two runs, mapped onto a common output grid. Run `a`
/// is the coarser one (larger `dt` by integer factor `stride_b`, or the
/// coarser space).
fn pair_distances(
    sa: &Solver,
    sb: &Solver,
    ta: &Trajectory,
    tb: &Trajectory,
    stride_b: usize,
) -> Result<(f64, f64, f64), SolverError> {
    let p_b = subsample(&tb.p, stride_b);
    let th_b = subsample(&tb.theta, stride_b);
    let utt_a = accel_samples(ta, 1);
    let utt_b = accel_samples(tb, stride_b);
    if p_b.len() != ta.p.len() || utt_b.len() != utt_a.len() {
        return Err(config_err(format!(
            "mismatched output grids: {} coarse samples vs {} mapped fine samples",
            ta.p.len(),
            p_b.len()
        )));
    }
    let dt_c = ta.dt;

    match (sa.disc(), sb.disc()) {
        (SpaceDisc::Spectral(a), SpaceDisc::Spectral(b)) => {
            if a.n_modes == b.n_modes {
                let f = sa.disc().forms();
                Ok((
                    sup_m_distance(&ta.p, &p_b, &f.mass_s),
                    l2t_k_distance(&ta.theta, &th_b, &f.stiff_s_unit, dt_c),
                    l2t_k_distance(&utt_a, &utt_b, &f.mass_u, dt_c),
                ))
            } else if b.n_modes > a.n_modes {
                // Zero-padding coarse coefficients embeds the coarse space
                // exactly into the fine one.
                let f = sb.disc().forms();
                let n_s = b.n_modes + 1;
                let n_u = b.n_modes;
                let pa: Vec<_> = ta.p.iter().map(|v| zero_extend(v, n_s)).collect();
                let tha: Vec<_> = ta.theta.iter().map(|v| zero_extend(v, n_s)).collect();
                let ua: Vec<_> = utt_a.iter().map(|v| zero_extend(v, n_u)).collect();
                Ok((
                    sup_m_distance(&pa, &p_b, &f.mass_s),
                    l2t_k_distance(&tha, &th_b, &f.stiff_s_unit, dt_c),
                    l2t_k_distance(&ua, &utt_b, &f.mass_u, dt_c),
                ))
            } else {
                Err(config_err("resolution values must increase".into()))
            }
        }
        (SpaceDisc::Fem(a), SpaceDisc::Fem(b)) => {
            if a.nx == b.nx && a.ny == b.ny {
                let f = sa.disc().forms();
                Ok((
                    sup_m_distance(&ta.p, &p_b, &f.mass_s),
                    l2t_k_distance(&ta.theta, &th_b, &f.stiff_s_unit, dt_c),
                    l2t_k_distance(&utt_a, &utt_b, &f.mass_u, dt_c),
                ))
            } else {
                // Nodal restriction onto the coarse mesh; valid for exact
                // 2x refinements only.
                let s_map = a.restriction_from(b).ok_or_else(|| {
                    config_err(format!(
                        "mismatched output grids: {}x{} is not a 2x refinement of {}x{}",
                        b.nx, b.ny, a.nx, a.ny
                    ))
                })?;
                let u_map = a
                    .u_restriction_from(b)
                    .expect("u restriction exists whenever the scalar one does");
                let f = sa.disc().forms();
                let pb: Vec<_> = p_b.iter().map(|v| gather(v, &s_map)).collect();
                let thb: Vec<_> = th_b.iter().map(|v| gather(v, &s_map)).collect();
                let ub: Vec<_> = utt_b.iter().map(|v| gather(v, &u_map)).collect();
                Ok((
                    sup_m_distance(&ta.p, &pb, &f.mass_s),
                    l2t_k_distance(&ta.theta, &thb, &f.stiff_s_unit, dt_c),
                    l2t_k_distance(&utt_a, &ub, &f.mass_u, dt_c),
                ))
            }
        }
        _ => Err(config_err("study runs must share one backend".into())),
    }
}

/// Run a refinement study along one axis and measure distances between
/// consecutive runs plus observed convergence orders.
///
/// `make_disc` builds the discretization for a given resolution parameter;
/// every axis except [`StudyAxis::Resolution`] calls it once with
/// `base_resolution`.
pub fn convergence_study(
    make_disc: &dyn Fn(usize) -> SpaceDisc,
    base_resolution: usize,
    consts: &ConstitutiveSet,
    base_cfg: &SolverConfig,
    drives: &Drives,
    axis: StudyAxis,
    values: &[f64],
) -> Result<StudyReport, SolverError> {
    if values.len() < 2 {
        return Err(config_err("a study needs at least two axis values".into()));
    }
    let monotone_ok = match axis {
        StudyAxis::Dt | StudyAxis::Delta => values.windows(2).all(|w| w[1] < w[0]),
        StudyAxis::Resolution | StudyAxis::RCut => values.windows(2).all(|w| w[1] > w[0]),
    };
    if !monotone_ok {
        return Err(config_err(format!(
            "study values along '{}' must be strictly {}",
            axis.as_str(),
            match axis {
                StudyAxis::Dt | StudyAxis::Delta => "decreasing",
                StudyAxis::Resolution | StudyAxis::RCut => "increasing",
            }
        )));
    }

    // Validate time-grid nesting up front, before any run is paid for.
    let mut strides = Vec::new();
    if axis == StudyAxis::Dt {
        for w in values.windows(2) {
            let ratio = w[0] / w[1];
            let k = ratio.round();
            if (ratio - k).abs() > 1e-9 || k < 2.0 {
                return Err(config_err(format!(
                    "mismatched output grids: dt values {} and {} do not nest \
                     (ratio must be an integer of at least 2)",
                    w[0], w[1]
                )));
            }
            strides.push(k as usize);
        }
    } else {
        strides = vec![1; values.len() - 1];
    }

    let mut runs: Vec<(Solver, Trajectory, StudyEntry)> = Vec::with_capacity(values.len());
    for &v in values {
        let (disc, cfg) = match axis {
            StudyAxis::Dt => {
                if !(v > 0.0) {
                    return Err(config_err(format!("study dt value {v} must be positive")));
                }
                (make_disc(base_resolution), SolverConfig { dt: v, ..*base_cfg })
            }
            StudyAxis::Resolution => {
                let n = v.round();
                if (v - n).abs() > 1e-9 || n < 1.0 {
                    return Err(config_err(format!(
                        "study resolution value {v} must be a positive integer"
                    )));
                }
                (make_disc(n as usize), *base_cfg)
            }
            StudyAxis::Delta => {
                (make_disc(base_resolution), SolverConfig { delta: v, ..*base_cfg })
            }
            StudyAxis::RCut => {
                (make_disc(base_resolution), SolverConfig { r_cut: v, ..*base_cfg })
            }
        };
        let solver = Solver::new(disc, consts.clone(), cfg, *drives)?;
        let mut state = solver.init_state()?;
        let record = solver.run(&mut state, true)?;
        let entry = StudyEntry {
            value: v,
            sup_p: record.sup_p(),
            min_theta: record.min_theta(),
            max_rel_residual: record.max_rel_residual(),
            picard_iters_max: record.reports.iter().map(|r| r.picard_iters).max().unwrap_or(0),
        };
        let traj = record.trajectory.expect("recording was requested");
        runs.push((solver, traj, entry));
    }

    let mut gaps = Vec::with_capacity(values.len() - 1);
    for (pair, &stride) in runs.windows(2).zip(&strides) {
        let (sa, ta, ea) = (&pair[0].0, &pair[0].1, &pair[0].2);
        let (sb, tb, eb) = (&pair[1].0, &pair[1].1, &pair[1].2);
        let (d_p, d_gt, d_acc) = pair_distances(sa, sb, ta, tb, stride)?;
        gaps.push(StudyGap {
            from: ea.value,
            to: eb.value,
            d_pressure_sup: d_p,
            d_grad_theta_l2t: d_gt,
            d_accel_l2t: d_acc,
        });
    }

    // Observed order alpha from gap_i ~ C h_i^alpha, with h the natural
    // small parameter of the axis.
    let h = |v: f64| match axis {
        StudyAxis::Dt | StudyAxis::Delta => v,
        StudyAxis::Resolution | StudyAxis::RCut => 1.0 / v,
    };
    let mut orders = Vec::new();
    for pair in gaps.windows(2) {
        let ratio = h(pair[0].from) / h(pair[1].from);
        let ord = |a: f64, b: f64| (a / b).ln() / ratio.ln();
        orders.push(StudyOrder {
            pressure: ord(pair[0].d_pressure_sup, pair[1].d_pressure_sup),
            grad_theta: ord(pair[0].d_grad_theta_l2t, pair[1].d_grad_theta_l2t),
            accel: ord(pair[0].d_accel_l2t, pair[1].d_accel_l2t),
        });
    }

    Ok(StudyReport { axis, entries: runs.into_iter().map(|r| r.2).collect(), gaps, orders })
}

/// Pressure boundedness under refinement: sup of `|p|` for the four
/// combinations of base/halved time step and base/doubled resolution, plus
/// a rerun with a cut-off radius above the observed sup to confirm the
/// cut-off never activates.
#[derive(Clone, Copy, Debug)]
pub struct RefinementMatrix {
    /// Sup of `|p|` for (dt, n), (dt/2, n), (dt, 2n), (dt/2, 2n).
    pub sup_p: [f64; 4],
    /// Relative spread `(max - min) / max` of the four values.
    pub spread_rel: f64,
    /// Cut-off radius of the confirmation rerun.
    pub large_r: f64,
    /// Whether the cut-off stayed inactive on every step of the rerun.
    pub cut_inactive_with_large_r: bool,
}

pub fn pressure_refinement_matrix(
    make_disc: &dyn Fn(usize) -> SpaceDisc,
    base_resolution: usize,
    consts: &ConstitutiveSet,
    cfg: &SolverConfig,
    drives: &Drives,
) -> Result<RefinementMatrix, SolverError> {
    let combos = [
        (base_resolution, cfg.dt),
        (base_resolution, 0.5 * cfg.dt),
        (2 * base_resolution, cfg.dt),
        (2 * base_resolution, 0.5 * cfg.dt),
    ];
    let mut sup_p = [0.0f64; 4];
    for (slot, &(n, dt)) in combos.iter().enumerate() {
        let solver = Solver::new(
            make_disc(n),
            consts.clone(),
            SolverConfig { dt, ..*cfg },
            *drives,
        )?;
        let mut state = solver.init_state()?;
        let record = solver.run(&mut state, false)?;
        sup_p[slot] = record.sup_p();
    }
    let max = sup_p.iter().fold(0.0f64, |a, &b| a.max(b));
    let min = sup_p.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let spread_rel = if max > 0.0 { (max - min) / max } else { 0.0 };

    let large_r = (1.05 * max + 0.1).max(cfg.r_cut);
    let solver = Solver::new(
        make_disc(base_resolution),
        consts.clone(),
        SolverConfig { r_cut: large_r, ..*cfg },
        *drives,
    )?;
    let mut state = solver.init_state()?;
    let record = solver.run(&mut state, false)?;
    Ok(RefinementMatrix {
        sup_p,
        spread_rel,
        large_r,
        cut_inactive_with_large_r: record.k_r_active_steps() == 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitutive::MaterialParams;
    use crate::discretization::{FemDisc, SpectralDisc};
    use crate::solver::BoundaryDrive;

    fn consts() -> ConstitutiveSet {
        ConstitutiveSet::from_params(MaterialParams::default(), 0.8).unwrap()
    }

    fn drives() -> Drives {
        Drives {
            p_star: BoundaryDrive::Sine { offset: 0.2, amp: 0.6, freq: 3.0 },
            theta_star: BoundaryDrive::Constant(1.0),
        }
    }

    fn spectral_factory() -> impl Fn(usize) -> SpaceDisc {
        |n| SpaceDisc::Spectral(SpectralDisc::new(n, &MaterialParams::default()))
    }

    fn fem_factory() -> impl Fn(usize) -> SpaceDisc {
        |n| SpaceDisc::Fem(FemDisc::new(n, n, 1.0, 1.0, &MaterialParams::default()))
    }

    fn small_cfg() -> SolverConfig {
        SolverConfig { dt: 2e-3, t_end: 2e-2, p0: 0.1, ..SolverConfig::default() }
    }

    fn run_small(n: usize) -> (Solver, RunRecord) {
        let solver =
            Solver::new(spectral_factory()(n), consts(), small_cfg(), drives()).unwrap();
        let mut state = solver.init_state().unwrap();
        let record = solver.run(&mut state, false).unwrap();
        (solver, record)
    }

    #[test]
    fn diagnostics_csv_is_versioned_and_round_trips() {
        let (_, record) = run_small(3);
        let csv = diagnostics_csv(&record.reports);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), format!("# {DIAGNOSTICS_SCHEMA}"));
        let header = lines.next().unwrap();
        assert_eq!(header.split(',').count(), DIAGNOSTICS_COLUMNS.len());
        assert!(header.starts_with("step,t,e_total"));
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), record.reports.len());
        // Full-precision round trip of a float column.
        let t_col = DIAGNOSTICS_COLUMNS.iter().position(|&c| c == "t").unwrap();
        let first: f64 = rows[0].split(',').nth(t_col).unwrap().parse().unwrap();
        assert_eq!(first.to_bits(), record.reports[0].t.to_bits());
        let res_col =
            DIAGNOSTICS_COLUMNS.iter().position(|&c| c == "audit_residual").unwrap();
        let res: f64 = rows[3].split(',').nth(res_col).unwrap().parse().unwrap();
        assert_eq!(res.to_bits(), record.reports[3].audit.residual.to_bits());
    }

    #[test]
    fn summary_text_parses_back_bitwise() {
        let (solver, record) = run_small(3);
        let summary = RunSummary::new(&solver, &record);
        let text = summary.to_string();
        let map = parse_key_values(&text);
        assert_eq!(map["schema"], SUMMARY_SCHEMA);
        let e: f64 = map["e_total"].parse().unwrap();
        assert_eq!(e.to_bits(), summary.e_total.to_bits());
        let s: f64 = map["sup_p"].parse().unwrap();
        assert_eq!(s.to_bits(), summary.sup_p.to_bits());
        assert_eq!(map["steps"], "10");
    }

    #[test]
    fn dt_study_reports_decreasing_gaps() {
        let report = convergence_study(
            &spectral_factory(),
            4,
            &consts(),
            &small_cfg(),
            &drives(),
            StudyAxis::Dt,
            &[4e-3, 2e-3, 1e-3],
        )
        .unwrap();
        assert_eq!(report.entries.len(), 3);
        assert_eq!(report.gaps.len(), 2);
        assert_eq!(report.orders.len(), 1);
        assert!(report.gaps[0].d_pressure_sup > report.gaps[1].d_pressure_sup);
        assert!(report.orders[0].pressure > 0.3, "order {:?}", report.orders[0]);
        let csv = report.csv();
        assert!(csv.starts_with(&format!("# {STUDY_SCHEMA}\n# axis = dt\n")));
    }

    #[test]
    fn dt_study_rejects_non_nesting_steps() {
        let err = convergence_study(
            &spectral_factory(),
            3,
            &consts(),
            &small_cfg(),
            &drives(),
            StudyAxis::Dt,
            &[4e-3, 2.5e-3],
        )
        .map(|_| ())
        .unwrap_err();
        assert!(err.to_string().contains("nest"), "got: {err}");
    }

    #[test]
    fn resolution_study_spectral_and_fem() {
        let report = convergence_study(
            &spectral_factory(),
            0,
            &consts(),
            &small_cfg(),
            &drives(),
            StudyAxis::Resolution,
            &[3.0, 6.0, 12.0],
        )
        .unwrap();
        assert_eq!(report.gaps.len(), 2);
        assert!(report.gaps[1].d_pressure_sup <= report.gaps[0].d_pressure_sup * 1.5);

        let report = convergence_study(
            &fem_factory(),
            0,
            &consts(),
            &small_cfg(),
            &drives(),
            StudyAxis::Resolution,
            &[2.0, 4.0],
        )
        .unwrap();
        assert_eq!(report.gaps.len(), 1);
        assert!(report.gaps[0].d_pressure_sup.is_finite());

        let err = convergence_study(
            &fem_factory(),
            0,
            &consts(),
            &small_cfg(),
            &drives(),
            StudyAxis::Resolution,
            &[2.0, 5.0],
        )
        .map(|_| ())
        .unwrap_err();
        assert!(err.to_string().contains("refinement"), "got: {err}");
    }

    #[test]
    fn refinement_matrix_reports_small_spread_and_inactive_cut() {
        let m = pressure_refinement_matrix(
            &spectral_factory(),
            3,
            &consts(),
            &small_cfg(),
            &drives(),
        )
        .unwrap();
        assert!(m.sup_p.iter().all(|&s| s > 0.0));
        assert!(m.spread_rel < 0.05, "spread {:.4}", m.spread_rel);
        assert!(m.cut_inactive_with_large_r);
        assert!(m.large_r > m.sup_p[0]);
    }

    #[test]
    fn axis_tokens_round_trip() {
        for axis in [StudyAxis::Dt, StudyAxis::Resolution, StudyAxis::Delta, StudyAxis::RCut] {
            assert_eq!(axis.as_str().parse::<StudyAxis>().unwrap(), axis);
        }
        assert!("x".parse::<StudyAxis>().is_err());
    }
}
