//! Built-in verification suite.
//!
//! Each property is a named check with an independent oracle — brute-force
//! integrals, variational inequalities, or algebraic identities — plus
//! deliberate fault injections that must be *caught* by the corresponding
//! checker. A passing suite therefore certifies both the operators and the
//! detectors around them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::preset;
use crate::constitutive::{MaterialParams, UniformDensity};
use crate::exact::TwoFloat;
use crate::hysteresis::{InitialMemoryCurve, MemoryState, RGrid};
use crate::plasticity::{stop_step, IsotropicTensor4, SymTensor3};

/// Outcome of one named property.
#[derive(Clone, Debug)]
pub struct PropertyResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Outcome of the whole suite.
#[derive(Clone, Debug, Default)]
pub struct SelftestReport {
    pub results: Vec<PropertyResult>,
}

impl SelftestReport {
    pub fn all_passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }

    fn push(&mut self, name: &'static str, passed: bool, detail: String) {
        self.results.push(PropertyResult { name, passed, detail });
    }
}

/// Naive scalar play update, reimplemented in plain arithmetic as an oracle.
fn naive_play(xi: f64, p: f64, r: f64) -> f64 {
    (p + r).min((p - r).max(xi))
}

/// Exact identity check for one play transition, using two-limb arithmetic
/// only through the public increment values.
fn play_identities_hold(xi_old: TwoFloat, xi_new: TwoFloat, p_old: f64, p_new: f64, r: f64) -> bool {
    let d_xi = xi_new.value() - xi_old.value();
    let gap = p_new - xi_new.value();
    // (a) the output moves only while pinned to a moving boundary:
    //     d_xi * (p - xi_new) = r * |d_xi| exactly in exact arithmetic;
    //     here both sides are products of the same two representable floats.
    let lhs = d_xi * gap;
    let rhs = r * d_xi.abs();
    if lhs.to_bits() != rhs.to_bits() && (lhs - rhs).abs() > 1e-15 * (1.0 + rhs.abs()) {
        return false;
    }
    // (b) monotonicity of the hysteresis branch: d_xi * d_p >= d_xi^2.
    let dp = p_new - p_old;
    d_xi * dp + 1e-15 * (1.0 + dp.abs()) >= d_xi * d_xi
}

fn check_play_identities(rng: &mut ChaCha8Rng, report: &mut SelftestReport) {
    let mut worst = 0.0f64;
    let mut ok = true;
    for _ in 0..200 {
        let r = rng.gen_range(1e-3..3.0);
        let p0 = rng.gen_range(-2.0..2.0);
        let mut xi = crate::hysteresis::play_init(0.0, p0, r).unwrap();
        let mut naive = xi.value();
        let mut p_old = p0;
        for _ in 0..100 {
            let p = rng.gen_range(-2.5..2.5);
            let next = crate::hysteresis::play_step(xi, p, r);
            if !play_identities_hold(xi, next, p_old, p, r) {
                ok = false;
            }
            naive = naive_play(naive, p, r);
            worst = worst.max((naive - next.value()).abs());
            xi = next;
            p_old = p;
        }
    }
    report.push(
        "play-identities",
        ok && worst <= 1e-12,
        format!("max deviation from the naive oracle {worst:.2e}"),
    );
}

fn check_play_sign_fault(rng: &mut ChaCha8Rng, report: &mut SelftestReport) {
    // Fault injection: a play that chases the input past the wrong
    // boundary (the sign of the offset flipped on the active branches).
    // The identity checker must flag it.
    let faulty_play = |xi: f64, p: f64, r: f64| {
        if p - xi > r {
            p + r
        } else if xi - p > r {
            p - r
        } else {
            xi
        }
    };
    let mut caught = false;
    for _ in 0..50 {
        let r = rng.gen_range(0.1..1.0);
        let mut xi = 0.0f64;
        let mut p_old = 0.0f64;
        for _ in 0..50 {
            let p = rng.gen_range(-2.0..2.0);
            let next = faulty_play(xi, p, r);
            let ok = play_identities_hold(
                TwoFloat::from_limbs(xi, 0.0),
                TwoFloat::from_limbs(next, 0.0),
                p_old,
                p,
                r,
            );
            if !ok {
                caught = true;
            }
            xi = next;
            p_old = p;
        }
    }
    report.push(
        "play-sign-fault-detected",
        caught,
        "the identity checker flags a play with swapped boundaries".to_string(),
    );
}

fn check_preisach_brute_force(rng: &mut ChaCha8Rng, report: &mut SelftestReport) {
    let params = MaterialParams::default();
    let density = UniformDensity::from_params(&params);
    let grid = RGrid::uniform(512, params.r_hat);
    let curve = InitialMemoryCurve::zero(params.r_hat);
    let mut state = MemoryState::init(&curve, 0.0, grid.clone(), &density).unwrap();

    // Independent accumulation: plain play recursions per node and the
    // closed-form primitive of the uniform density.
    let mut naive_xi: Vec<f64> = grid.nodes().iter().map(|_| 0.0).collect();
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let p = rng.gen_range(-1.8..1.8);
        state.step(p, &density);
        let mut g0 = 0.0;
        for ((x, &r), &w) in naive_xi.iter_mut().zip(grid.nodes()).zip(grid.weights()) {
            *x = naive_play(*x, p, r);
            let clipped = x.clamp(-params.v_hat, params.v_hat);
            g0 += w * params.rho_hat * clipped;
        }
        worst = worst.max((g0 - state.ledger().g0).abs());
    }
    report.push(
        "preisach-matches-brute-force",
        worst <= 1e-10,
        format!("max output gap against the brute-force integral {worst:.2e}"),
    );
}

fn random_sym(rng: &mut ChaCha8Rng, scale: f64) -> SymTensor3 {
    SymTensor3::from_components(
        rng.gen_range(-scale..scale),
        rng.gen_range(-scale..scale),
        rng.gen_range(-scale..scale),
        rng.gen_range(-scale..scale),
        rng.gen_range(-scale..scale),
        rng.gen_range(-scale..scale),
    )
}

/// Random element of the admissible set `{ |dev z| <= sigma_y } + span{I}`.
fn random_admissible(rng: &mut ChaCha8Rng, sigma_y: f64) -> SymTensor3 {
    let z = random_sym(rng, 2.0 * sigma_y);
    let sph = SymTensor3::identity() * (z.trace() / 3.0);
    let dev = z - sph;
    let norm = dev.norm();
    let dev = if norm > sigma_y { dev * (rng.gen_range(0.0..1.0) * sigma_y / norm) } else { dev };
    sph + dev
}

fn check_projection_variational(rng: &mut ChaCha8Rng, report: &mut SelftestReport) {
    let stiff = IsotropicTensor4::new(1.3, 0.8);
    let sigma_y = 0.7;
    let mut ok = true;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..40 {
        let sigma_old = random_admissible(rng, sigma_y);
        let d_eps = random_sym(rng, 1.0);
        let inc = stop_step(&sigma_old, &d_eps, &stiff, sigma_y);
        let sigma = inc.sigma_new;
        // Feasibility.
        let sph = SymTensor3::identity() * (sigma.trace() / 3.0);
        if (sigma - sph).norm() > sigma_y * (1.0 + 1e-12) {
            ok = false;
        }
        // Variational inequality of the metric projection: for every
        // admissible z, <trial - sigma, z - sigma> in the compliance
        // metric is nonpositive.
        let trial = sigma_old + stiff.apply(&d_eps);
        for _ in 0..25 {
            let z = random_admissible(rng, sigma_y);
            let ip = stiff.inner_inv(&(trial - sigma), &(z - sigma));
            worst = worst.max(ip);
            if ip > 1e-10 {
                ok = false;
            }
        }
    }
    report.push(
        "projection-variational-inequality",
        ok,
        format!("max inner product against admissible directions {worst:.2e}"),
    );
}

/// The deviatoric-flow checker used both on the real operator and on the
/// injected fault.
fn flow_is_deviatoric(d_eps_plastic: &SymTensor3) -> bool {
    d_eps_plastic.trace().abs() <= 1e-12 * d_eps_plastic.norm().max(1e-300)
}

fn check_deviatoric_flow(rng: &mut ChaCha8Rng, report: &mut SelftestReport) {
    let stiff = IsotropicTensor4::new(1.1, 0.9);
    let sigma_y = 0.5;
    let mut ok = true;
    let mut heats_ok = true;
    let mut caught = false;
    for _ in 0..200 {
        let sigma_old = random_admissible(rng, sigma_y);
        let d_eps = random_sym(rng, 0.8);
        let inc = stop_step(&sigma_old, &d_eps, &stiff, sigma_y);
        if inc.d_eps_plastic.norm() > 0.0 && !flow_is_deviatoric(&inc.d_eps_plastic) {
            ok = false;
        }
        if inc.dq < -1e-15 {
            heats_ok = false;
        }
        if inc.yielded {
            // Fault injection: contaminate the flow with a spherical part.
            let faulty = inc.d_eps_plastic + SymTensor3::identity() * (0.01 * inc.d_eps_plastic.norm());
            if !flow_is_deviatoric(&faulty) {
                caught = true;
            }
        }
    }
    report.push(
        "plastic-flow-is-deviatoric",
        ok && heats_ok,
        "trace-free flow with nonnegative dissipation on random steps".to_string(),
    );
    report.push(
        "non-deviatoric-fault-detected",
        caught,
        "the trace checker flags a flow contaminated with a spherical part".to_string(),
    );
}

fn check_hypothesis_validator(report: &mut SelftestReport) {
    let accepts = MaterialParams::default().validate(0.5).is_ok();
    let mut bad = MaterialParams::default();
    bad.growth_b = bad.growth_a;
    let rejects = match bad.validate(0.5) {
        Err(e) => e.to_string().contains("h1 (ii)"),
        Ok(()) => false,
    };
    report.push(
        "hypothesis-validator",
        accepts && rejects,
        "defaults accepted; equal growth exponents rejected citing h1 (ii)".to_string(),
    );
}

fn max_rel_residual_with_fault(fault: f64) -> f64 {
    let mut cfg = preset("bench1d").unwrap();
    cfg.solver.t_end = 5e-3;
    cfg.solver.fault_qg_scale = fault;
    let solver = cfg.build(Some(1)).unwrap();
    let mut state = solver.init_state().unwrap();
    let record = solver.run(&mut state, false).unwrap();
    record.max_rel_residual()
}

fn check_audit_fault_detection(report: &mut SelftestReport) {
    let clean = max_rel_residual_with_fault(1.0);
    let faulty = max_rel_residual_with_fault(1.0 + 1e-3);
    let passed = clean <= 1e-8 && faulty > 100.0 * clean.max(1e-16);
    report.push(
        "audit-flags-corrupted-heat",
        passed,
        format!("audit residual {clean:.2e} clean vs {faulty:.2e} with a 1e-3 heat fault"),
    );
}

fn check_rate_independence(rng: &mut ChaCha8Rng, report: &mut SelftestReport) {
    let params = MaterialParams::default();
    let density = UniformDensity::from_params(&params);
    let grid = RGrid::uniform(64, params.r_hat);
    let curve = InitialMemoryCurve::zero(params.r_hat);

    let inputs: Vec<f64> = (0..100).map(|_| rng.gen_range(-1.5..1.5)).collect();

    // Original schedule.
    let mut a = MemoryState::init(&curve, 0.3, grid.clone(), &density).unwrap();
    for &p in &inputs {
        a.step(p, &density);
    }
    // Reparametrized schedule: every input held over several sub-steps, as a
    // time-grid refinement of a piecewise-constant input would produce.
    let mut b = MemoryState::init(&curve, 0.3, grid.clone(), &density).unwrap();
    for &p in &inputs {
        for _ in 0..3 {
            b.step(p, &density);
        }
    }
    let mut exact = a.ledger().g0.to_bits() == b.ledger().g0.to_bits();
    for (x, y) in a.play_pairs().iter().zip(b.play_pairs()) {
        exact &= x.hi().to_bits() == y.hi().to_bits() && x.lo().to_bits() == y.lo().to_bits();
    }
    report.push(
        "rate-independence",
        exact,
        "holding inputs over refined time grids changes the operator output by exactly zero"
            .to_string(),
    );
}

/// Run every property with a deterministic generator; the same seed yields
/// the identical report.
pub fn run_selftest(seed: u64) -> SelftestReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SelftestReport::default();
    check_play_identities(&mut rng, &mut report);
    check_play_sign_fault(&mut rng, &mut report);
    check_preisach_brute_force(&mut rng, &mut report);
    check_projection_variational(&mut rng, &mut report);
    check_deviatoric_flow(&mut rng, &mut report);
    check_hypothesis_validator(&mut report);
    check_audit_fault_detection(&mut report);
    check_rate_independence(&mut rng, &mut report);
    report
}
