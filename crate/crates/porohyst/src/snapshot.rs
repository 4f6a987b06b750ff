//! Versioned text snapshots of the full solver state.
//!
//! A snapshot holds everything a restart needs — field coefficients, the
//! hysteresis memory (exact two-limb play values), and the plastic stop
//! state — printed with shortest round-trip decimals so that a write/read
//! cycle reproduces the state bitwise.

use nalgebra::DVector;

use crate::exact::TwoFloat;
use crate::hysteresis::{MemoryLedger, MemoryState, RGrid};
use crate::plasticity::{PlasticPointState, ScalarStop, SymTensor3};
use crate::solver::{FieldState, QuadPlastic, Solver};

/// Schema tag on the first line of every snapshot.
pub const SNAPSHOT_SCHEMA: &str = "porohyst.snapshot.v1";

#[derive(Debug, thiserror::Error)]
pub enum SnapshotError {
    #[error("snapshot line {line}: {detail}")]
    Parse { line: usize, detail: String },
    #[error("snapshot does not match the solver: {detail}")]
    Mismatch { detail: String },
}

fn push_vector(out: &mut String, name: &str, v: &DVector<f64>) {
    out.push_str(&format!("[{name}]\n"));
    for &x in v.iter() {
        out.push_str(&format!("{x}\n"));
    }
}

/// Serialize the state of `solver` into a snapshot document.
pub fn write_snapshot(solver: &Solver, state: &FieldState) -> String {
    let mut out = String::new();
    out.push_str(&format!("# {SNAPSHOT_SCHEMA}\n"));
    out.push_str(&format!("backend = {}\n", solver.disc().describe()));
    out.push_str(&format!("step_index = {}\n", state.step_index));
    let plastic_kind = match &state.plastic {
        QuadPlastic::Scalar(_) => "scalar",
        QuadPlastic::Tensor(_) => "tensor",
    };
    out.push_str(&format!("plastic_kind = {plastic_kind}\n"));
    let grid_len = state.memory.first().map_or(0, |m| m.grid().len());
    out.push_str(&format!("grid_len = {grid_len}\n"));
    out.push_str(&format!("n_u = {}\n", state.u.len()));
    out.push_str(&format!("n_s = {}\n", state.p.len()));
    out.push_str(&format!("n_q = {}\n", state.memory.len()));
    push_vector(&mut out, "u", &state.u);
    push_vector(&mut out, "w", &state.w);
    push_vector(&mut out, "p", &state.p);
    push_vector(&mut out, "theta", &state.theta);
    out.push_str("[memory]\n");
    for m in &state.memory {
        let l = m.ledger();
        let mut line = format!(
            "{},{},{},{},{},{},{}",
            m.last_input(),
            m.input_sup(),
            m.cutoff(),
            l.g0,
            l.v0,
            l.d0,
            l.heat
        );
        for x in m.play_pairs() {
            line.push_str(&format!(",{},{}", x.hi(), x.lo()));
        }
        out.push_str(&line);
        out.push('\n');
    }
    out.push_str("[plastic]\n");
    match &state.plastic {
        QuadPlastic::Scalar(points) => {
            for s in points {
                out.push_str(&format!("{},{}\n", s.sigma, s.heat));
            }
        }
        QuadPlastic::Tensor(points) => {
            for s in points {
                let m = s.sigma.mandel();
                out.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    m[0], m[1], m[2], m[3], m[4], m[5], s.heat
                ));
            }
        }
    }
    out
}

struct Cursor<'a> {
    lines: std::str::Lines<'a>,
    line_no: usize,
}

impl<'a> Cursor<'a> {
    fn next(&mut self) -> Result<&'a str, SnapshotError> {
        self.line_no += 1;
        self.lines.next().ok_or(SnapshotError::Parse {
            line: self.line_no,
            detail: "unexpected end of snapshot".to_string(),
        })
    }

    fn err(&self, detail: String) -> SnapshotError {
        SnapshotError::Parse { line: self.line_no, detail }
    }

    fn expect(&mut self, literal: &str) -> Result<(), SnapshotError> {
        let got = self.next()?;
        if got != literal {
            return Err(self.err(format!("expected '{literal}', got '{got}'")));
        }
        Ok(())
    }

    fn key_value(&mut self, key: &str) -> Result<String, SnapshotError> {
        let got = self.next()?;
        let Some((k, v)) = got.split_once('=') else {
            return Err(self.err(format!("expected '{key} = ...', got '{got}'")));
        };
        if k.trim() != key {
            return Err(self.err(format!("expected key '{key}', got '{}'", k.trim())));
        }
        Ok(v.trim().to_string())
    }

    fn f64(&self, tok: &str) -> Result<f64, SnapshotError> {
        tok.trim()
            .parse()
            .map_err(|_| self.err(format!("expected a number, got '{}'", tok.trim())))
    }

    fn vector(&mut self, name: &str, len: usize) -> Result<DVector<f64>, SnapshotError> {
        self.expect(&format!("[{name}]"))?;
        let mut out = DVector::zeros(len);
        for i in 0..len {
            let tok = self.next()?;
            out[i] = self.f64(tok)?;
        }
        Ok(out)
    }
}

/// Reconstruct a [`FieldState`] for `solver` from a snapshot document. The
/// snapshot must have been written for the same backend and configuration.
pub fn read_snapshot(text: &str, solver: &Solver) -> Result<FieldState, SnapshotError> {
    let mut cur = Cursor { lines: text.lines(), line_no: 0 };
    cur.expect(&format!("# {SNAPSHOT_SCHEMA}"))?;

    let backend = cur.key_value("backend")?;
    let own = solver.disc().describe();
    if backend != own {
        return Err(SnapshotError::Mismatch {
            detail: format!("snapshot backend '{backend}' vs solver backend '{own}'"),
        });
    }
    let step_index: u64 = cur
        .key_value("step_index")?
        .parse()
        .map_err(|_| cur.err("step_index must be a nonnegative integer".to_string()))?;
    let plastic_kind = cur.key_value("plastic_kind")?;
    let grid_len: usize = cur
        .key_value("grid_len")?
        .parse()
        .map_err(|_| cur.err("grid_len must be a nonnegative integer".to_string()))?;
    let n_u: usize = cur
        .key_value("n_u")?
        .parse()
        .map_err(|_| cur.err("n_u must be a nonnegative integer".to_string()))?;
    let n_s: usize = cur
        .key_value("n_s")?
        .parse()
        .map_err(|_| cur.err("n_s must be a nonnegative integer".to_string()))?;
    let n_q: usize = cur
        .key_value("n_q")?
        .parse()
        .map_err(|_| cur.err("n_q must be a nonnegative integer".to_string()))?;

    let disc = solver.disc();
    if n_u != disc.n_u() || n_s != disc.n_s() || n_q != disc.n_q() {
        return Err(SnapshotError::Mismatch {
            detail: format!(
                "snapshot sizes (n_u = {n_u}, n_s = {n_s}, n_q = {n_q}) vs solver sizes \
                 (n_u = {}, n_s = {}, n_q = {})",
                disc.n_u(),
                disc.n_s(),
                disc.n_q()
            ),
        });
    }
    if grid_len != solver.cfg().grid_n {
        return Err(SnapshotError::Mismatch {
            detail: format!(
                "snapshot memory grid has {grid_len} nodes, the solver uses {}",
                solver.cfg().grid_n
            ),
        });
    }
    if step_index > solver.n_steps() {
        return Err(SnapshotError::Mismatch {
            detail: format!(
                "snapshot step index {step_index} lies beyond the configured {} steps",
                solver.n_steps()
            ),
        });
    }

    let u = cur.vector("u", n_u)?;
    let w = cur.vector("w", n_u)?;
    let p = cur.vector("p", n_s)?;
    let theta = cur.vector("theta", n_s)?;

    cur.expect("[memory]")?;
    let grid = RGrid::uniform(solver.cfg().grid_n, solver.consts().params.r_hat);
    let mut memory = Vec::with_capacity(n_q);
    for _ in 0..n_q {
        let line = cur.next()?;
        let toks: Vec<&str> = line.split(',').collect();
        if toks.len() != 7 + 2 * grid_len {
            return Err(cur.err(format!(
                "memory row needs {} fields, got {}",
                7 + 2 * grid_len,
                toks.len()
            )));
        }
        let last_input = cur.f64(toks[0])?;
        let input_sup = cur.f64(toks[1])?;
        let cutoff = cur.f64(toks[2])?;
        let ledger = MemoryLedger {
            g0: cur.f64(toks[3])?,
            v0: cur.f64(toks[4])?,
            d0: cur.f64(toks[5])?,
            heat: cur.f64(toks[6])?,
        };
        let mut xi = Vec::with_capacity(grid_len);
        for m in 0..grid_len {
            let hi = cur.f64(toks[7 + 2 * m])?;
            let lo = cur.f64(toks[8 + 2 * m])?;
            xi.push(TwoFloat::from_limbs(hi, lo));
        }
        memory.push(MemoryState::from_parts(
            grid.clone(),
            xi,
            last_input,
            input_sup,
            cutoff,
            ledger,
        ));
    }

    cur.expect("[plastic]")?;
    let plastic = match plastic_kind.as_str() {
        "scalar" => {
            let mut points = Vec::with_capacity(n_q);
            for _ in 0..n_q {
                let line = cur.next()?;
                let toks: Vec<&str> = line.split(',').collect();
                if toks.len() != 2 {
                    return Err(cur.err(format!(
                        "scalar plastic row needs 2 fields, got {}",
                        toks.len()
                    )));
                }
                points.push(ScalarStop { sigma: cur.f64(toks[0])?, heat: cur.f64(toks[1])? });
            }
            QuadPlastic::Scalar(points)
        }
        "tensor" => {
            let mut points = Vec::with_capacity(n_q);
            for _ in 0..n_q {
                let line = cur.next()?;
                let toks: Vec<&str> = line.split(',').collect();
                if toks.len() != 7 {
                    return Err(cur.err(format!(
                        "tensor plastic row needs 7 fields, got {}",
                        toks.len()
                    )));
                }
                let mut m = [0.0; 6];
                for (slot, tok) in m.iter_mut().zip(&toks[..6]) {
                    *slot = cur.f64(tok)?;
                }
                points.push(PlasticPointState {
                    sigma: SymTensor3::from_mandel(m),
                    heat: cur.f64(toks[6])?,
                });
            }
            QuadPlastic::Tensor(points)
        }
        other => {
            return Err(SnapshotError::Mismatch {
                detail: format!("unknown plastic state kind '{other}'"),
            })
        }
    };
    let expects_scalar = matches!(solver.disc(), crate::discretization::SpaceDisc::Spectral(_));
    let got_scalar = matches!(plastic, QuadPlastic::Scalar(_));
    if expects_scalar != got_scalar {
        return Err(SnapshotError::Mismatch {
            detail: format!(
                "snapshot stores a {} plastic state but the backend carries a {} one",
                if got_scalar { "scalar" } else { "tensor" },
                if expects_scalar { "scalar" } else { "tensor" },
            ),
        });
    }

    Ok(FieldState {
        t: step_index as f64 * solver.cfg().dt,
        step_index,
        u,
        w,
        p,
        theta,
        memory,
        plastic,
    })
}
