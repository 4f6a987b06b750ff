//! Flat-file run configuration.
//!
//! The format is one `section.key = value` assignment per line, with `#`
//! starting a comment. Unknown keys are errors that name the key and line.
//! A `preset = <name>` line resets every setting to a named baseline;
//! assignments are order-independent apart from that reset, so presets
//! belong at the top of a file.

use std::collections::BTreeMap;
use std::fmt;

use crate::constitutive::{ConstitutiveSet, MaterialParams};
use crate::diagnostics::StudyAxis;
use crate::discretization::{FemDisc, SpaceDisc, SpectralDisc};
use crate::solver::{BoundaryDrive, Drives, Solver, SolverConfig, SolverError};

/// Error raised while parsing or assembling a configuration file.
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: expected 'key = value', got '{text}'")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key '{key}'")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key '{key}': {detail}")]
    Value { line: usize, key: String, detail: String },
    #[error("{detail}")]
    Invalid { detail: String },
}

/// Spatial backend selection.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Backend {
    /// Periodic one-dimensional spectral discretization with `n` modes.
    Spectral { n: usize },
    /// Bilinear quadrilateral mesh on an `lx` by `ly` rectangle.
    Fem { nx: usize, ny: usize, lx: f64, ly: f64 },
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Backend::Spectral { n } => write!(f, "spectral n={n}"),
            Backend::Fem { nx, ny, lx, ly } => write!(f, "fem {nx}x{ny} on {lx}x{ly}"),
        }
    }
}

/// Refinement-study request.
#[derive(Clone, Debug, PartialEq)]
pub struct StudySpec {
    pub axis: StudyAxis,
    pub values: Vec<f64>,
}

/// Regularization sweep request: paired sequences of `delta` and cut-off
/// radius values.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub deltas: Vec<f64>,
    pub rs: Vec<f64>,
}

/// A fully resolved run request.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub params: MaterialParams,
    pub solver: SolverConfig,
    pub drives: Drives,
    pub backend: Backend,
    pub study: Option<StudySpec>,
    pub sweep: Option<SweepSpec>,
    /// Snapshot file to resume from (`run.resume` key).
    pub resume: Option<std::path::PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        preset("zero").expect("the zero preset exists")
    }
}

/// Named baseline configurations.
///
/// * `zero` — library defaults: spectral backend with 8 modes, mild
///   constant boundary data.
/// * `bench1d` — driven one-dimensional benchmark over a unit of time.
/// * `bench2d` — driven two-dimensional benchmark on an 8x8 mesh.
/// * `oscillator` — single spectral mode with pressure feedback made
///   negligible (stiff saturation, no thermal expansion), for comparison
///   against a scalar reference recurrence.
pub fn preset(name: &str) -> Option<RunConfig> {
    let base = |backend| RunConfig {
        params: MaterialParams::default(),
        solver: SolverConfig::default(),
        drives: Drives::default(),
        backend,
        study: None,
        sweep: None,
        resume: None,
    };
    match name {
        "zero" => Some(base(Backend::Spectral { n: 8 })),
        "bench1d" => {
            let mut cfg = base(Backend::Spectral { n: 8 });
            cfg.params.g = 0.1;
            cfg.solver = SolverConfig {
                dt: 1e-3,
                t_end: 1.0,
                p0: 0.1,
                theta0: 1.0,
                picard_max: 150,
                ..cfg.solver
            };
            cfg.drives = Drives {
                p_star: BoundaryDrive::Sine { offset: 0.2, amp: 0.6, freq: 3.0 },
                theta_star: BoundaryDrive::Constant(1.0),
            };
            Some(cfg)
        }
        "bench2d" => {
            let mut cfg = preset("bench1d")?;
            cfg.backend = Backend::Fem { nx: 8, ny: 8, lx: 1.0, ly: 1.0 };
            cfg.solver.t_end = 0.5;
            Some(cfg)
        }
        "oscillator" => {
            let mut cfg = base(Backend::Spectral { n: 1 });
            cfg.params.beta = 0.0;
            cfg.params.f1 = 1e10;
            cfg.params.f2 = 1e10 / std::f64::consts::PI;
            cfg.params.f3 = 1e10 / std::f64::consts::PI;
            cfg.params.sigma_y = 1e9;
            cfg.solver = SolverConfig {
                dt: 1e-3,
                t_end: 1.0,
                u0_mode: 0.1,
                ..cfg.solver
            };
            cfg.drives = Drives {
                p_star: BoundaryDrive::Constant(0.0),
                theta_star: BoundaryDrive::Constant(1.0),
            };
            Some(cfg)
        }
        _ => None,
    }
}

fn parse_f64(line: usize, key: &str, raw: &str) -> Result<f64, ConfigError> {
    raw.trim().parse().map_err(|_| ConfigError::Value {
        line,
        key: key.to_string(),
        detail: format!("expected a number, got '{}'", raw.trim()),
    })
}

fn parse_usize(line: usize, key: &str, raw: &str) -> Result<usize, ConfigError> {
    raw.trim().parse().map_err(|_| ConfigError::Value {
        line,
        key: key.to_string(),
        detail: format!("expected a nonnegative integer, got '{}'", raw.trim()),
    })
}

fn parse_list(line: usize, key: &str, raw: &str) -> Result<Vec<f64>, ConfigError> {
    raw.split(',')
        .map(|tok| parse_f64(line, key, tok))
        .collect()
}

/// Accumulates `drive.<which>.*` assignments; resolved once parsing ends.
struct DriveBuilder {
    prefix: &'static str,
    kind: Option<(usize, String)>,
    fields: BTreeMap<&'static str, (usize, f64)>,
}

const DRIVE_FIELDS: &[&str] = &[
    "value", "t0", "before", "after", "offset", "amp", "freq", "period", "start", "rate",
];

impl DriveBuilder {
    fn new(prefix: &'static str) -> Self {
        DriveBuilder { prefix, kind: None, fields: BTreeMap::new() }
    }

    fn set(&mut self, line: usize, sub: &str, raw: &str) -> Result<(), ConfigError> {
        let key = format!("{}.{}", self.prefix, sub);
        if sub == "kind" {
            self.kind = Some((line, raw.trim().to_string()));
            return Ok(());
        }
        let Some(&name) = DRIVE_FIELDS.iter().find(|&&f| f == sub) else {
            return Err(ConfigError::UnknownKey { line, key });
        };
        let v = parse_f64(line, &key, raw)?;
        self.fields.insert(name, (line, v));
        Ok(())
    }

    fn build(mut self, current: BoundaryDrive) -> Result<BoundaryDrive, ConfigError> {
        let Some((kind_line, kind)) = self.kind.take() else {
            if let Some((field, &(line, _))) = self.fields.iter().next() {
                return Err(ConfigError::Value {
                    line,
                    key: format!("{}.{}", self.prefix, field),
                    detail: format!("set {}.kind before drive fields", self.prefix),
                });
            }
            return Ok(current);
        };
        let mut need = |field: &'static str| {
            self.fields.remove(field).map(|(_, v)| v).ok_or_else(|| ConfigError::Value {
                line: kind_line,
                key: format!("{}.kind", self.prefix),
                detail: format!("drive kind '{kind}' requires {}.{field}", self.prefix),
            })
        };
        let drive = match kind.as_str() {
            "constant" => BoundaryDrive::Constant(need("value")?),
            "step" => BoundaryDrive::Step {
                t0: need("t0")?,
                before: need("before")?,
                after: need("after")?,
            },
            "sine" => BoundaryDrive::Sine {
                offset: need("offset")?,
                amp: need("amp")?,
                freq: need("freq")?,
            },
            "triangle" => BoundaryDrive::Triangle {
                offset: need("offset")?,
                amp: need("amp")?,
                period: need("period")?,
            },
            "ramp" => BoundaryDrive::Ramp { start: need("start")?, rate: need("rate")? },
            other => {
                return Err(ConfigError::Value {
                    line: kind_line,
                    key: format!("{}.kind", self.prefix),
                    detail: format!(
                        "unknown drive kind '{other}' \
                         (expected constant, step, sine, triangle, or ramp)"
                    ),
                })
            }
        };
        if let Some((field, (line, _))) = self.fields.iter().next() {
            return Err(ConfigError::Value {
                line: *line,
                key: format!("{}.{}", self.prefix, field),
                detail: format!("field does not apply to drive kind '{kind}'"),
            });
        }
        Ok(drive)
    }
}

/// Accumulates `backend.*` assignments; resolved once parsing ends.
#[derive(Default)]
struct BackendBuilder {
    kind: Option<(usize, String)>,
    n: Option<(usize, usize)>,
    nx: Option<(usize, usize)>,
    ny: Option<(usize, usize)>,
    lx: Option<(usize, f64)>,
    ly: Option<(usize, f64)>,
}

impl BackendBuilder {
    fn set(&mut self, line: usize, sub: &str, raw: &str) -> Result<(), ConfigError> {
        let key = format!("backend.{sub}");
        match sub {
            "kind" => self.kind = Some((line, raw.trim().to_string())),
            "n" => self.n = Some((line, parse_usize(line, &key, raw)?)),
            "nx" => self.nx = Some((line, parse_usize(line, &key, raw)?)),
            "ny" => self.ny = Some((line, parse_usize(line, &key, raw)?)),
            "lx" => self.lx = Some((line, parse_f64(line, &key, raw)?)),
            "ly" => self.ly = Some((line, parse_f64(line, &key, raw)?)),
            _ => return Err(ConfigError::UnknownKey { line, key }),
        }
        Ok(())
    }

    fn build(self, current: Backend) -> Result<Backend, ConfigError> {
        let base = match &self.kind {
            None => current,
            Some((line, kind)) => match kind.as_str() {
                "spectral" => Backend::Spectral { n: 8 },
                "fem" => Backend::Fem { nx: 8, ny: 8, lx: 1.0, ly: 1.0 },
                other => {
                    return Err(ConfigError::Value {
                        line: *line,
                        key: "backend.kind".to_string(),
                        detail: format!("unknown backend '{other}' (expected spectral or fem)"),
                    })
                }
            },
        };
        let reject = |slot: Option<(usize, String)>, backend: &str| -> Result<(), ConfigError> {
            if let Some((line, key)) = slot {
                return Err(ConfigError::Value {
                    line,
                    key,
                    detail: format!("field does not apply to the {backend} backend"),
                });
            }
            Ok(())
        };
        match base {
            Backend::Spectral { n } => {
                reject(self.nx.map(|(l, _)| (l, "backend.nx".into())), "spectral")?;
                reject(self.ny.map(|(l, _)| (l, "backend.ny".into())), "spectral")?;
                reject(self.lx.map(|(l, _)| (l, "backend.lx".into())), "spectral")?;
                reject(self.ly.map(|(l, _)| (l, "backend.ly".into())), "spectral")?;
                Ok(Backend::Spectral { n: self.n.map_or(n, |(_, v)| v) })
            }
            Backend::Fem { nx, ny, lx, ly } => {
                reject(self.n.map(|(l, _)| (l, "backend.n".into())), "fem")?;
                Ok(Backend::Fem {
                    nx: self.nx.map_or(nx, |(_, v)| v),
                    ny: self.ny.map_or(ny, |(_, v)| v),
                    lx: self.lx.map_or(lx, |(_, v)| v),
                    ly: self.ly.map_or(ly, |(_, v)| v),
                })
            }
        }
    }
}

fn set_material(
    params: &mut MaterialParams,
    line: usize,
    field: &str,
    raw: &str,
) -> Result<(), ConfigError> {
    let key = format!("material.{field}");
    let slot: &mut f64 = match field {
        "rho_s" => &mut params.rho_s,
        "rho_l" => &mut params.rho_l,
        "c0" => &mut params.c0,
        "beta" => &mut params.beta,
        "theta_c" => &mut params.theta_c,
        "eta" => &mut params.eta,
        "omega" => &mut params.omega,
        "mu0" => &mut params.mu0,
        "mu1" => &mut params.mu1,
        "kappa0" => &mut params.kappa0,
        "kappa1" => &mut params.kappa1,
        "a_kappa" => &mut params.a_kappa,
        "growth_a" => &mut params.growth_a,
        "growth_b" => &mut params.growth_b,
        "f1" => &mut params.f1,
        "f2" => &mut params.f2,
        "f3" => &mut params.f3,
        "sigma_y" => &mut params.sigma_y,
        "lambda_e" => &mut params.lambda_e,
        "mu_e" => &mut params.mu_e,
        "lambda_p" => &mut params.lambda_p,
        "mu_p" => &mut params.mu_p,
        "rho_hat" => &mut params.rho_hat,
        "r_hat" => &mut params.r_hat,
        "v_hat" => &mut params.v_hat,
        "k_mem" => &mut params.k_mem,
        "theta_bar" => &mut params.theta_bar,
        "p_star" => &mut params.p_star,
        "theta_star" => &mut params.theta_star,
        "gamma_p" => &mut params.gamma_p,
        "gamma_theta" => &mut params.gamma_theta,
        "g" => &mut params.g,
        _ => return Err(ConfigError::UnknownKey { line, key }),
    };
    *slot = parse_f64(line, &key, raw)?;
    Ok(())
}

fn set_solver(
    cfg: &mut SolverConfig,
    line: usize,
    field: &str,
    raw: &str,
) -> Result<(), ConfigError> {
    let key = format!("solver.{field}");
    match field {
        "dt" => cfg.dt = parse_f64(line, &key, raw)?,
        "t_end" => cfg.t_end = parse_f64(line, &key, raw)?,
        "delta" => cfg.delta = parse_f64(line, &key, raw)?,
        "r_cut" => cfg.r_cut = parse_f64(line, &key, raw)?,
        "outer_passes" => cfg.outer_passes = parse_usize(line, &key, raw)?,
        "picard_tol" => cfg.picard_tol = parse_f64(line, &key, raw)?,
        "picard_max" => cfg.picard_max = parse_usize(line, &key, raw)?,
        "grid_n" => cfg.grid_n = parse_usize(line, &key, raw)?,
        "threads" => cfg.threads = parse_usize(line, &key, raw)?,
        "p0" => cfg.p0 = parse_f64(line, &key, raw)?,
        "theta0" => cfg.theta0 = parse_f64(line, &key, raw)?,
        "u0_mode" => cfg.u0_mode = parse_f64(line, &key, raw)?,
        "w0_mode" => cfg.w0_mode = parse_f64(line, &key, raw)?,
        "fault_qg_scale" => cfg.fault_qg_scale = parse_f64(line, &key, raw)?,
        _ => return Err(ConfigError::UnknownKey { line, key }),
    }
    Ok(())
}

/// Parse a configuration document into a [`RunConfig`].
pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::default();
    let mut drive_p = DriveBuilder::new("drive.p");
    let mut drive_theta = DriveBuilder::new("drive.theta");
    let mut backend = BackendBuilder::default();
    let mut study_axis: Option<(usize, StudyAxis)> = None;
    let mut study_values: Option<(usize, Vec<f64>)> = None;
    let mut sweep_deltas: Option<(usize, Vec<f64>)> = None;
    let mut sweep_rs: Option<(usize, Vec<f64>)> = None;

    for (idx, raw_line) in text.lines().enumerate() {
        let line = idx + 1;
        let stripped = raw_line.split('#').next().unwrap_or("").trim();
        if stripped.is_empty() {
            continue;
        }
        let Some((key, value)) = stripped.split_once('=') else {
            return Err(ConfigError::Syntax { line, text: stripped.to_string() });
        };
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() || value.is_empty() {
            return Err(ConfigError::Syntax { line, text: stripped.to_string() });
        }

        if key == "preset" {
            cfg = preset(value).ok_or_else(|| ConfigError::Value {
                line,
                key: "preset".to_string(),
                detail: format!(
                    "unknown preset '{value}' (expected zero, bench1d, bench2d, or oscillator)"
                ),
            })?;
            continue;
        }

        match key.split_once('.') {
            Some(("material", field)) => set_material(&mut cfg.params, line, field, value)?,
            Some(("solver", field)) => set_solver(&mut cfg.solver, line, field, value)?,
            Some(("backend", field)) => backend.set(line, field, value)?,
            Some(("drive", rest)) => match rest.split_once('.') {
                Some(("p", sub)) => drive_p.set(line, sub, value)?,
                Some(("theta", sub)) => drive_theta.set(line, sub, value)?,
                _ => {
                    return Err(ConfigError::UnknownKey { line, key: key.to_string() });
                }
            },
            Some(("study", "axis")) => {
                let axis = value.parse::<StudyAxis>().map_err(|detail| ConfigError::Value {
                    line,
                    key: "study.axis".to_string(),
                    detail,
                })?;
                study_axis = Some((line, axis));
            }
            Some(("study", "values")) => {
                study_values = Some((line, parse_list(line, "study.values", value)?));
            }
            Some(("sweep", "deltas")) => {
                sweep_deltas = Some((line, parse_list(line, "sweep.deltas", value)?));
            }
            Some(("sweep", "rs")) => {
                sweep_rs = Some((line, parse_list(line, "sweep.rs", value)?));
            }
            Some(("run", "resume")) => {
                cfg.resume = Some(std::path::PathBuf::from(value));
            }
            _ => return Err(ConfigError::UnknownKey { line, key: key.to_string() }),
        }
    }

    cfg.drives.p_star = drive_p.build(cfg.drives.p_star)?;
    cfg.drives.theta_star = drive_theta.build(cfg.drives.theta_star)?;
    cfg.backend = backend.build(cfg.backend)?;

    cfg.study = match (study_axis, study_values) {
        (None, None) => cfg.study,
        (Some((_, axis)), Some((_, values))) => Some(StudySpec { axis, values }),
        (Some((line, _)), None) => {
            return Err(ConfigError::Value {
                line,
                key: "study.axis".to_string(),
                detail: "study.values must accompany study.axis".to_string(),
            })
        }
        (None, Some((line, _))) => {
            return Err(ConfigError::Value {
                line,
                key: "study.values".to_string(),
                detail: "study.axis must accompany study.values".to_string(),
            })
        }
    };
    cfg.sweep = match (sweep_deltas, sweep_rs) {
        (None, None) => cfg.sweep,
        (Some((_, deltas)), Some((_, rs))) => Some(SweepSpec { deltas, rs }),
        (Some((line, _)), None) => {
            return Err(ConfigError::Value {
                line,
                key: "sweep.deltas".to_string(),
                detail: "sweep.rs must accompany sweep.deltas".to_string(),
            })
        }
        (None, Some((line, _))) => {
            return Err(ConfigError::Value {
                line,
                key: "sweep.rs".to_string(),
                detail: "sweep.deltas must accompany sweep.rs".to_string(),
            })
        }
    };
    Ok(cfg)
}

impl RunConfig {
    /// The resolution parameter of the configured backend (spectral modes,
    /// or mesh cells along the first axis).
    pub fn resolution(&self) -> usize {
        match self.backend {
            Backend::Spectral { n } => n,
            Backend::Fem { nx, .. } => nx,
        }
    }

    /// Build the discretization at resolution parameter `res`, scaling a
    /// mesh's second axis proportionally.
    pub fn make_disc(&self, res: usize) -> SpaceDisc {
        match self.backend {
            Backend::Spectral { .. } => {
                SpaceDisc::Spectral(SpectralDisc::new(res, &self.params))
            }
            Backend::Fem { nx, ny, lx, ly } => {
                let scaled_ny = ((ny as f64 * res as f64 / nx as f64).round() as usize).max(2);
                SpaceDisc::Fem(FemDisc::new(res, scaled_ny, lx, ly, &self.params))
            }
        }
    }

    /// Validate the material laws against the configured drives.
    pub fn constitutive(&self) -> Result<ConstitutiveSet, SolverError> {
        let drive_sup = self
            .drives
            .p_star
            .sup_abs(self.solver.t_end)
            .max(self.solver.p0.abs());
        Ok(ConstitutiveSet::from_params(self.params.clone(), drive_sup)?)
    }

    /// Validate the material laws and assemble a ready-to-run solver.
    /// `threads` overrides the configured worker count when given.
    pub fn build(&self, threads: Option<usize>) -> Result<Solver, SolverError> {
        let mut solver_cfg = self.solver;
        if let Some(t) = threads {
            solver_cfg.threads = t;
        }
        let consts = self.constitutive()?;
        let disc = self.make_disc(self.resolution());
        Solver::new(disc, consts, solver_cfg, self.drives)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_input_yields_the_zero_preset() {
        let cfg = parse("").unwrap();
        assert_eq!(cfg.backend, Backend::Spectral { n: 8 });
        assert_eq!(cfg.solver.dt, 1e-3);
        assert_eq!(cfg.params.beta, 0.5);
        assert!(cfg.study.is_none());
        assert!(cfg.sweep.is_none());
        cfg.build(None).unwrap();
    }

    #[test]
    fn full_document_parses_every_section() {
        let text = "\
# exercise each section
preset = bench1d
material.beta = 0.25
material.g = 0   # overrides the preset's gravity
solver.dt = 2e-3
solver.t_end = 0.5
solver.threads = 3
backend.kind = fem
backend.nx = 4
backend.ny = 6
backend.ly = 2.0
drive.p.kind = triangle
drive.p.offset = 0.1
drive.p.amp = 0.4
drive.p.period = 0.25
drive.theta.kind = ramp
drive.theta.start = 1.0
drive.theta.rate = 0.5
study.axis = dt
study.values = 4e-3, 2e-3, 1e-3
sweep.deltas = 1, 0.5, 0.25
sweep.rs = 2.5, 2.5, 2.5
";
        let cfg = parse(text).unwrap();
        assert_eq!(cfg.params.beta, 0.25);
        assert_eq!(cfg.params.g, 0.0);
        assert_eq!(cfg.solver.dt, 2e-3);
        assert_eq!(cfg.solver.threads, 3);
        assert_eq!(cfg.backend, Backend::Fem { nx: 4, ny: 6, lx: 1.0, ly: 2.0 });
        assert_eq!(
            cfg.drives.p_star,
            BoundaryDrive::Triangle { offset: 0.1, amp: 0.4, period: 0.25 }
        );
        assert_eq!(cfg.drives.theta_star, BoundaryDrive::Ramp { start: 1.0, rate: 0.5 });
        let study = cfg.study.as_ref().unwrap();
        assert_eq!(study.axis, StudyAxis::Dt);
        assert_eq!(study.values, vec![4e-3, 2e-3, 1e-3]);
        assert_eq!(cfg.sweep.as_ref().unwrap().deltas, vec![1.0, 0.5, 0.25]);
        cfg.build(Some(1)).unwrap();
    }

    #[test]
    fn unknown_keys_are_named_with_their_line() {
        let err = parse("solver.dt = 1e-3\nsolver.dtx = 2\n").map(|_| ()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("solver.dtx") && msg.contains("line 2"), "got: {msg}");

        let err = parse("mysterious = 1\n").map(|_| ()).unwrap_err();
        assert!(err.to_string().contains("mysterious"));

        let err = parse("drive.p.kind = sine\ndrive.p.wobble = 2\n").map(|_| ()).unwrap_err();
        assert!(err.to_string().contains("drive.p.wobble"));
    }

    #[test]
    fn syntax_and_value_errors_carry_context() {
        let err = parse("solver.dt 1e-3\n").map(|_| ()).unwrap_err();
        assert!(matches!(err, ConfigError::Syntax { line: 1, .. }), "got: {err}");

        let err = parse("solver.dt = fast\n").map(|_| ()).unwrap_err();
        assert!(err.to_string().contains("expected a number"), "got: {err}");

        let err = parse("preset = turbo\n").map(|_| ()).unwrap_err();
        assert!(err.to_string().contains("unknown preset"), "got: {err}");
    }

    #[test]
    fn drive_builders_enforce_kind_and_field_sets() {
        let err = parse("drive.p.amp = 0.2\n").map(|_| ()).unwrap_err();
        assert!(err.to_string().contains("drive.p.kind"), "got: {err}");

        let err = parse("drive.p.kind = sine\ndrive.p.offset = 0\ndrive.p.freq = 1\n")
            .map(|_| ())
            .unwrap_err();
        assert!(err.to_string().contains("drive.p.amp"), "got: {err}");

        let err = parse(
            "drive.theta.kind = constant\ndrive.theta.value = 1\ndrive.theta.rate = 2\n",
        )
        .map(|_| ())
        .unwrap_err();
        assert!(err.to_string().contains("does not apply"), "got: {err}");
    }

    #[test]
    fn backend_fields_must_match_the_kind() {
        let err = parse("backend.kind = spectral\nbackend.nx = 4\n").map(|_| ()).unwrap_err();
        assert!(err.to_string().contains("backend.nx"), "got: {err}");

        let err = parse("backend.kind = fem\nbackend.n = 4\n").map(|_| ()).unwrap_err();
        assert!(err.to_string().contains("backend.n"), "got: {err}");

        let cfg = parse("preset = bench2d\nbackend.nx = 4\n").unwrap();
        assert_eq!(cfg.backend, Backend::Fem { nx: 4, ny: 8, lx: 1.0, ly: 1.0 });
    }

    #[test]
    fn equal_growth_exponents_are_rejected_citing_the_clause() {
        let cfg = parse("material.growth_a = 0.5\nmaterial.growth_b = 0.5\n").unwrap();
        let err = cfg.build(None).map(|_| ()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("h1 (ii)"), "got: {msg}");
    }

    #[test]
    fn presets_build_cleanly() {
        for name in ["zero", "bench1d", "bench2d", "oscillator"] {
            let cfg = preset(name).unwrap();
            let solver = cfg.build(None).unwrap();
            assert!(solver.n_steps() > 0, "{name}");
        }
        assert!(preset("nope").is_none());
    }

    #[test]
    fn thread_override_wins() {
        let cfg = parse("solver.threads = 4\n").unwrap();
        let solver = cfg.build(Some(2)).unwrap();
        assert_eq!(solver.cfg().threads, 2);
    }
}
