//! Preisach memory: threshold grid, initial memory curve, and the evolving
//! state of the play family with its energy ledgers.

use std::sync::Arc;

use crate::exact::TwoFloat;
use crate::quadrature::adaptive_simpson;

use super::density::Density;
use super::play::{play_init, play_step};
use super::HysteresisError;

/// Discretization of the threshold half-line: nodes `r_m` with cell widths
/// `w_m` such that the cells tile `(0, cap]` and each node lies in its cell.
/// Slice integrals over `r` use the midpoint rule `sum_m w_m g(r_m)`.
#[derive(Clone, Debug)]
pub struct RGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    cap: f64,
}

impl RGrid {
    /// Uniform midpoint grid with `n` nodes covering `(0, cap]`.
    pub fn uniform(n: usize, cap: f64) -> Arc<Self> {
        assert!(n >= 1 && cap > 0.0);
        let dr = cap / n as f64;
        let nodes = (0..n).map(|m| (m as f64 + 0.5) * dr).collect();
        let weights = vec![dr; n];
        Arc::new(RGrid { nodes, weights, cap })
    }

    /// Grid from explicit nodes and weights; validates the tiling invariants.
    pub fn custom(nodes: Vec<f64>, weights: Vec<f64>, cap: f64) -> Result<Arc<Self>, HysteresisError> {
        if nodes.is_empty() || nodes[0] <= 0.0 || nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(HysteresisError::BadGridNodes);
        }
        if weights.len() != nodes.len() || weights.iter().any(|&w| w <= 0.0) {
            return Err(HysteresisError::BadGridWeights);
        }
        let mut lo = 0.0;
        for (&r, &w) in nodes.iter().zip(&weights) {
            let hi = lo + w;
            if r < lo - 1e-12 * cap || r > hi + 1e-12 * cap {
                return Err(HysteresisError::GridDoesNotCoverCap { node: r });
            }
            lo = hi;
        }
        if (lo - cap).abs() > 1e-9 * cap {
            return Err(HysteresisError::GridDoesNotCoverCap { node: lo });
        }
        Ok(Arc::new(RGrid { nodes, weights, cap }))
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn cap(&self) -> f64 {
        self.cap
    }
}

/// Initial memory curve `lambda_{-1}: [0, inf) -> R`, 1-Lipschitz and
/// vanishing beyond a cutoff `K`. Validated by sampling at construction
/// against the supplied grid.
pub struct InitialMemoryCurve {
    curve: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    cutoff: f64,
}

impl InitialMemoryCurve {
    /// The virgin state `lambda = 0`.
    pub fn zero(cutoff: f64) -> Self {
        InitialMemoryCurve {
            curve: Box::new(|_| 0.0),
            cutoff,
        }
    }

    /// Hat curve `lambda(r) = max(0, peak - r)` (with cutoff `peak`).
    pub fn hat(peak: f64) -> Self {
        InitialMemoryCurve {
            curve: Box::new(move |r| (peak - r).max(0.0)),
            cutoff: peak,
        }
    }

    pub fn from_fn(curve: impl Fn(f64) -> f64 + Send + Sync + 'static, cutoff: f64) -> Self {
        InitialMemoryCurve {
            curve: Box::new(curve),
            cutoff,
        }
    }

    pub fn eval(&self, r: f64) -> f64 {
        if r >= self.cutoff {
            0.0
        } else {
            (self.curve)(r)
        }
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    /// Sample the admissibility invariants: 1-Lipschitz on a refinement of the
    /// grid, and vanishing at and beyond the cutoff.
    fn validate(&self, grid: &RGrid) -> Result<(), HysteresisError> {
        let n = 4 * grid.len().max(64);
        let hi = grid.cap().max(self.cutoff) * 1.25;
        let mut prev_r = 0.0;
        let mut prev_v = (self.curve)(0.0);
        for i in 1..=n {
            let r = hi * i as f64 / n as f64;
            let v = self.eval(r);
            if (v - prev_v).abs() > (r - prev_r) * (1.0 + 1e-9) + 1e-12 {
                return Err(HysteresisError::CurveNotLipschitz { r0: prev_r, r1: r });
            }
            prev_r = r;
            prev_v = v;
        }
        let probe = self.cutoff * 1.0001 + 1e-9;
        let v = (self.curve)(probe);
        if v != 0.0 && probe >= self.cutoff {
            // eval() masks values beyond the cutoff; still reject a curve that
            // pretends to vanish but does not, to catch configuration slips.
            return Err(HysteresisError::CurveNotCompact {
                cutoff: self.cutoff,
                r: probe,
                value: v,
            });
        }
        Ok(())
    }
}

/// Accumulated scalar ledgers of a Preisach state.
#[derive(Clone, Copy, Debug, Default)]
pub struct MemoryLedger {
    /// Current operator output `G0`.
    pub g0: f64,
    /// Current potential `V0` (integrand `v * rho`).
    pub v0: f64,
    /// Current dissipation functional `D0` (integrand `r * rho`).
    pub d0: f64,
    /// Accumulated dissipated heat `sum dq`.
    pub heat: f64,
}

/// Per-step increments returned by [`MemoryState::step`] / [`MemoryState::trial`].
#[derive(Clone, Copy, Debug, Default)]
pub struct PreisachIncrement {
    pub dg0: f64,
    pub dv0: f64,
    pub dd0: f64,
    /// Dissipated heat `dq = dg0 * p_new - dv0`; nonnegative for the catch-up
    /// update (each moved slice integrates `(p_new - v) rho` with
    /// `|p_new - v| >= r` of the correct sign).
    pub dq: f64,
}

/// State of the discretized play family plus its ledgers.
///
/// A state is tied to the density used to initialize it: ledgers mix slice
/// integrals of one density, so pass the same density to every call.
#[derive(Clone)]
pub struct MemoryState {
    grid: Arc<RGrid>,
    xi: Vec<TwoFloat>,
    /// f64 mirror of `xi` for fast read-only evaluation.
    xi_f64: Vec<f64>,
    last_input: f64,
    input_sup: f64,
    cutoff: f64,
    ledger: MemoryLedger,
}

impl MemoryState {
    /// Initialize the play family from the initial memory curve and input
    /// `p0`, and compute the initial ledgers by density quadrature.
    pub fn init(
        curve: &InitialMemoryCurve,
        p0: f64,
        grid: Arc<RGrid>,
        density: &dyn Density,
    ) -> Result<Self, HysteresisError> {
        curve.validate(&grid)?;
        let mut xi = Vec::with_capacity(grid.len());
        let mut xi_f64 = Vec::with_capacity(grid.len());
        for &r in grid.nodes() {
            let x = play_init(curve.eval(r), p0, r)?;
            xi_f64.push(x.value());
            xi.push(x);
        }
        let mut state = MemoryState {
            grid,
            xi,
            xi_f64,
            last_input: p0,
            input_sup: p0.abs(),
            cutoff: curve.cutoff(),
            ledger: MemoryLedger::default(),
        };
        state.recompute_ledger(density);
        debug_assert!(
            state.ledger.g0.abs()
                <= density
                    .c_rho()
                    .min(density.c_rho_star() * p0.abs().max(curve.cutoff()))
                    + 1e-9,
            "initial output violates its a-priori bound"
        );
        Ok(state)
    }

    /// Recompute `G0`, `V0`, `D0` from scratch (used at init and by tests to
    /// cross-check the incremental ledgers).
    pub fn recompute_ledger(&mut self, density: &dyn Density) {
        let heat = self.ledger.heat;
        let mut g0 = 0.0;
        let mut v0 = 0.0;
        let mut d0 = 0.0;
        for ((&r, &w), &x) in self.grid.nodes().iter().zip(self.grid.weights()).zip(&self.xi_f64) {
            g0 += w * density.primitive(r, x);
            v0 += w * density.moment_primitive(r, x);
            d0 += w * r * density.primitive(r, x);
        }
        self.ledger = MemoryLedger { g0, v0, d0, heat };
    }

    /// Advance the state to input `p_new`, committing plays and ledgers.
    pub fn step(&mut self, p_new: f64, density: &dyn Density) -> PreisachIncrement {
        let inc = self.apply(p_new, density);
        self.last_input = p_new;
        self.input_sup = self.input_sup.max(p_new.abs());
        self.ledger.g0 += inc.dg0;
        self.ledger.v0 += inc.dv0;
        self.ledger.d0 += inc.dd0;
        self.ledger.heat += inc.dq;
        inc
    }

    /// Evaluate the increments of a step to `p_new` without mutating the state.
    pub fn trial(&self, p_new: f64, density: &dyn Density) -> PreisachIncrement {
        let (inc, _) = self.walk(p_new, density, |_, _, _| {});
        inc
    }

    fn apply(&mut self, p_new: f64, density: &dyn Density) -> PreisachIncrement {
        let mut moved: Vec<(usize, TwoFloat, f64)> = Vec::new();
        let (inc, _) = self.walk(p_new, density, |m, new, new_v| moved.push((m, new, new_v)));
        for (m, new, new_v) in moved {
            self.xi[m] = new;
            self.xi_f64[m] = new_v;
        }
        inc
    }

    /// Prefix walk shared by `step` and `trial`. Moves are confined to a
    /// prefix of the (ascending) threshold nodes: `r -> xi_r + r` is
    /// nondecreasing and `r -> xi_r - r` is nonincreasing along an admissible
    /// memory curve, so once a node does not move, no later node does.
    fn walk(
        &self,
        p_new: f64,
        density: &dyn Density,
        mut on_move: impl FnMut(usize, TwoFloat, f64),
    ) -> (PreisachIncrement, usize) {
        let mut inc = PreisachIncrement::default();
        let mut active = 0;
        for m in 0..self.grid.len() {
            let r = self.grid.nodes()[m];
            let w = self.grid.weights()[m];
            let old = self.xi[m];
            let new = play_step(old, p_new, r);
            if new == old {
                break;
            }
            active = m + 1;
            let old_v = self.xi_f64[m];
            let new_v = new.value();
            let dp = density.primitive(r, new_v) - density.primitive(r, old_v);
            let dpv = density.moment_primitive(r, new_v) - density.moment_primitive(r, old_v);
            inc.dg0 += w * dp;
            inc.dv0 += w * dpv;
            inc.dd0 += w * r * dp;
            inc.dq += w * (dp * p_new - dpv);
            on_move(m, new, new_v);
        }
        (inc, active)
    }

    /// Current Preisach output `G0`.
    pub fn output(&self) -> f64 {
        self.ledger.g0
    }

    pub fn ledger(&self) -> MemoryLedger {
        self.ledger
    }

    pub fn grid(&self) -> &Arc<RGrid> {
        &self.grid
    }

    pub fn play_values(&self) -> &[f64] {
        &self.xi_f64
    }

    pub fn play_pairs(&self) -> &[TwoFloat] {
        &self.xi
    }

    pub fn last_input(&self) -> f64 {
        self.last_input
    }

    pub fn input_sup(&self) -> f64 {
        self.input_sup
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    /// Rebuild a state from snapshot data. The caller supplies exactly the
    /// limbs and ledgers a previous state reported.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        grid: Arc<RGrid>,
        xi: Vec<TwoFloat>,
        last_input: f64,
        input_sup: f64,
        cutoff: f64,
        ledger: MemoryLedger,
    ) -> Self {
        let xi_f64 = xi.iter().map(|x| x.value()).collect();
        MemoryState {
            grid,
            xi,
            xi_f64,
            last_input,
            input_sup,
            cutoff,
            ledger,
        }
    }

    /// Generalized potential `V_h = sum_m w_m int_0^{xi_m} h(v) rho(r_m, v) dv`
    /// for a nondecreasing weight `h` (checked by sampling). `h = id` gives
    /// `V0`, `h = 1` gives `G0`.
    pub fn potential_h(
        &self,
        density: &dyn Density,
        h: &dyn Fn(f64) -> f64,
    ) -> Result<f64, HysteresisError> {
        let bound = self
            .xi_f64
            .iter()
            .fold(self.input_sup.max(self.cutoff), |a, &x| a.max(x.abs()));
        let n = 256;
        let mut prev_x = -bound;
        let mut prev_h = h(prev_x);
        for i in 1..=n {
            let x = -bound + 2.0 * bound * i as f64 / n as f64;
            let hx = h(x);
            if hx < prev_h - 1e-12 {
                return Err(HysteresisError::NonMonotoneWeight { x0: prev_x, x1: x });
            }
            prev_x = x;
            prev_h = hx;
        }
        let mut total = 0.0;
        for ((&r, &w), &x) in self.grid.nodes().iter().zip(self.grid.weights()).zip(&self.xi_f64) {
            if x == 0.0 {
                continue;
            }
            total += w * adaptive_simpson(&|v| h(v) * density.rho(r, v), 0.0, x, 1e-12);
        }
        Ok(total)
    }
}

/// Full operator output `G[p] = f(p) + G0[p]` for a saturation-like outer
/// function `f`.
pub fn g_total(p: f64, state: &MemoryState, f: impl Fn(f64) -> f64) -> f64 {
    f(p) + state.output()
}
