//! The validation suite: every invariant the library promises, checked by
//! comparing simulations with closed forms or independent constructions.
//!
//! Each check yields one measured number and a bound. Checks tagged with a
//! criterion number make up the acceptance suite.

use num_rational::BigRational;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rayon::prelude::*;
use serde::Serialize;
use thermoproc::combinatorics::{
    delta_d_exact, f_coeff, f_table, i_nm_eval, i_nm_eval_exact, i_top_closed, l_eval,
    l_eval_exact, LRoute,
};
use thermoproc::cooling::{
    coherent_asymptote, coherent_closed_form, coherent_deficit, cool_coherent, cool_incoherent,
    incoherent_asymptote, incoherent_closed_form, incoherent_rate_mmtp, incoherent_rate_mtp,
    incoherent_rate_tp, measured_rate, mmtp_rate_single_branch, verify_round_ordering,
    IncoherentParams, Paradigm, ProcessClass,
};
use thermoproc::extraction::{
    depletion_closed, epsilon_d_closed, epsilon_etp, epsilon_mtp, epsilon_tp, optimal_tp_matrix,
    run_memory_extraction, run_memory_extraction_ordered, run_optimal_tp, run_sequence_protocol,
    simulate_depletion, ExtractionSetup, SequenceClass, Variant,
};
use thermoproc::majorization::{min_extraction_error_tp, qubit_tp_reachable, thermo_majorizes};
use thermoproc::memory::{closed_form_p_d, memory_beta_swap_ground, simulate_memory_beta_swap, verify_pair};
use thermoproc::reachable::{etp_orbit_hull, qutrit_gibbs, qutrit_mmtp2_vertices, tp_region};
use thermoproc::thermal::{beta_swap, gibbs_state};
use thermoproc::{Hamiltonian, PopulationVector, ThermalContext, TransitionMatrix};

use crate::config::{Experiment, ExperimentConfig, Fig2Params, Fig3Params, Grid};

pub const MODULES: [&str; 8] = [
    "thermal",
    "majorization",
    "combinatorics",
    "memory",
    "cooling",
    "workx",
    "reachable",
    "cli",
];

/// How a measurement is judged.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Bound {
    /// Passes when `measured ≤ limit`; a tolerance override replaces `limit`.
    AtMost { limit: f64 },
    /// Passes when `measured > threshold`.
    Above { threshold: f64 },
    /// Always passes; the value is recorded for the report.
    Report,
}

impl Bound {
    fn at_most(limit: f64) -> Self {
        Bound::AtMost { limit }
    }

    fn holds(&self, measured: f64) -> bool {
        match *self {
            Bound::AtMost { limit } => measured <= limit,
            Bound::Above { threshold } => measured > threshold,
            Bound::Report => true,
        }
    }
}

pub struct Measurement {
    pub measured: f64,
    pub bound: Bound,
    pub detail: String,
}

fn measure(measured: f64, bound: Bound, detail: impl Into<String>) -> thermoproc::Result<Measurement> {
    Ok(Measurement {
        measured,
        bound,
        detail: detail.into(),
    })
}

type CheckFn = fn() -> thermoproc::Result<Measurement>;

pub struct Check {
    pub module: &'static str,
    pub name: &'static str,
    pub criterion: Option<u8>,
    pub run: CheckFn,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub module: &'static str,
    pub name: &'static str,
    pub criterion: Option<u8>,
    pub measured: f64,
    pub bound: Bound,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub total: usize,
    pub failed: usize,
    pub tolerance_override: Option<f64>,
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

fn evaluate(check: &Check, tolerance: Option<f64>) -> CheckResult {
    let (measured, bound, detail) = match (check.run)() {
        Ok(m) => {
            let bound = match (m.bound, tolerance) {
                (Bound::AtMost { .. }, Some(t)) => Bound::AtMost { limit: t },
                (b, _) => b,
            };
            (m.measured, bound, m.detail)
        }
        Err(e) => (f64::NAN, Bound::Report, format!("error: {e}")),
    };
    let passed = !measured.is_nan() && bound.holds(measured);
    CheckResult {
        module: check.module,
        name: check.name,
        criterion: check.criterion,
        measured,
        bound,
        passed,
        detail,
    }
}

/// Runs `checks` in parallel, keeping their order in the report.
pub fn evaluate_all(checks: &[Check], tolerance: Option<f64>) -> ValidationReport {
    let results: Vec<CheckResult> = checks.par_iter().map(|c| evaluate(c, tolerance)).collect();
    let failed = results.iter().filter(|r| !r.passed).count();
    ValidationReport {
        passed: failed == 0,
        total: results.len(),
        failed,
        tolerance_override: tolerance,
        checks: results,
    }
}

/// Full suite, or one module of it.
pub fn run(only: Option<&str>, tolerance: Option<f64>) -> ValidationReport {
    let checks: Vec<Check> = all_checks()
        .into_iter()
        .filter(|c| only.is_none_or(|m| c.module == m))
        .collect();
    evaluate_all(&checks, tolerance)
}

/// The checks belonging to acceptance criterion `n`.
pub fn run_criterion(n: u8) -> ValidationReport {
    let checks: Vec<Check> = all_checks()
        .into_iter()
        .filter(|c| c.criterion == Some(n))
        .collect();
    evaluate_all(&checks, None)
}

macro_rules! check {
    ($module:literal, $name:ident, $criterion:expr) => {
        Check {
            module: $module,
            name: stringify!($name),
            criterion: $criterion,
            run: $name,
        }
    };
}

pub fn all_checks() -> Vec<Check> {
    vec![
        check!("thermal", beta_swap_square_identity, None),
        check!("thermal", pair_ops_fix_gibbs, None),
        check!("majorization", qubit_lorenz_matches_two_level_rule, None),
        check!("majorization", tp_bisection_matches_closed_form, Some(5)),
        check!("combinatorics", l_routes_agree, Some(7)),
        check!("combinatorics", top_i_matches_closed_form, Some(7)),
        check!("combinatorics", exact_rational_identities, Some(7)),
        check!("combinatorics", f_recurrence_is_binomial, Some(7)),
        check!("memory", two_slot_reference_value, Some(1)),
        check!("memory", memory_closed_form_grid, Some(2)),
        check!("memory", memory_gap_within_bound, Some(2)),
        check!("cooling", coherent_closed_forms, Some(3)),
        check!("cooling", coherent_one_slot_is_gibbs, Some(3)),
        check!("cooling", coherent_limit_increases_with_memory, Some(3)),
        check!("cooling", incoherent_reference_asymptote, Some(4)),
        check!("cooling", incoherent_convergence, Some(4)),
        check!("cooling", incoherent_rates_tp_mtp, Some(4)),
        check!("cooling", incoherent_one_slot_rate_is_mtp, Some(4)),
        check!("cooling", incoherent_mmtp_rates, None),
        check!("cooling", single_branch_rate_deviation, Some(4)),
        check!("cooling", incoherent_closed_form_grid, None),
        check!("cooling", incoherent_round_ordering, None),
        check!("workx", reference_tp, Some(5)),
        check!("workx", reference_mtp, Some(5)),
        check!("workx", reference_etp, Some(5)),
        check!("workx", error_ordering, Some(5)),
        check!("workx", optimal_tp_matrices_valid, None),
        check!("workx", memory_extraction_matches_closed_form, Some(6)),
        check!("workx", one_slot_extraction_is_mtp, Some(6)),
        check!("workx", extraction_monotone_in_memory, Some(6)),
        check!("workx", large_memory_approaches_tp, Some(6)),
        check!("workx", extraction_mass_conserved, None),
        check!("workx", depletion_matches_closed_form, None),
        check!("workx", ascending_order_is_best, None),
        check!("workx", step_one_residuals_increase, None),
        check!("reachable", b_vertices_outside_etp_hull, Some(8)),
        check!("reachable", mmtp2_vertices_inside_tp, Some(8)),
        check!("reachable", orbit_hull_monotone_in_depth, None),
        check!("reachable", a_vertex_matches_memory_module, None),
        check!("cli", outputs_deterministic, Some(9)),
    ]
}

fn max_of(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(f64::NEG_INFINITY, f64::max)
}

fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

type R = thermoproc::Result<Measurement>;

// ---- thermal

fn beta_swap_square_identity() -> R {
    let mut worst: f64 = 0.0;
    for k in 0..=10 {
        let q = k as f64 / 10.0;
        let b = beta_swap(2, 0, 1, q)?;
        let sq = TransitionMatrix::compose(&[b.clone(), b.clone()])?;
        for r in 0..2 {
            for c in 0..2 {
                let id = if r == c { q } else { 0.0 };
                worst = worst.max((sq.get(r, c) - (1.0 - q) * b.get(r, c) - id).abs());
            }
        }
    }
    measure(worst, Bound::at_most(1e-14), "max entry deviation of B² from (1-q)B + q·1 over q ∈ {0, 0.1, ..., 1}")
}

fn pair_ops_fix_gibbs() -> R {
    let h = Hamiltonian::new(vec![0.0, 0.3, 1.1, 2.0])?;
    let ctx = ThermalContext::new(1.3)?;
    let gibbs = gibbs_state(&h, 1.3)?;
    let mut worst: f64 = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            if i == j {
                continue;
            }
            for op in [
                ctx.full_thermalization(&h, i, j)?,
                ctx.partial_thermalization(&h, i, j, 0.4)?,
                ctx.beta_swap(&h, i, j)?,
                ctx.elementary(&h, i, j, 0.7)?,
            ] {
                worst = worst.max(op.apply(&gibbs)?.max_abs_diff(&gibbs));
            }
        }
    }
    measure(worst, Bound::at_most(1e-14), "max deviation of the Gibbs state under every two-level operation")
}

// ---- majorization

fn qubit_lorenz_matches_two_level_rule() -> R {
    let mut disagreements = 0usize;
    for gamma in [0.6, 0.75, 0.9] {
        let gibbs = PopulationVector::qubit(gamma)?;
        for a in 0..10 {
            for b in 0..10 {
                let p = 0.013 + 0.097 * a as f64;
                let pt = 0.013 + 0.097 * b as f64;
                let lorenz = thermo_majorizes(&PopulationVector::qubit(p)?, &PopulationVector::qubit(pt)?, &gibbs)?;
                if lorenz != qubit_tp_reachable(p, pt, gamma)? {
                    disagreements += 1;
                }
            }
        }
    }
    measure(disagreements as f64, Bound::at_most(0.0), "disagreements on a 10×10 (p, p') grid for three γ")
}

fn tp_bisection_matches_closed_form() -> R {
    let mut worst: f64 = 0.0;
    for be in [2f64.ln(), 3f64.ln(), 1.0] {
        for w in grid(0.05, 5.0, 50) {
            let s = ExtractionSetup::from_products(be, w)?;
            worst = worst.max((min_extraction_error_tp(be, w, 1.0)? - epsilon_tp(&s)).abs());
        }
    }
    measure(worst, Bound::at_most(1e-9), "thermo-majorization bisection vs closed form, 50 W points × 3 βE")
}

// ---- combinatorics

fn l_routes_agree() -> R {
    let mut worst: f64 = 0.0;
    for n in 1..=40 {
        for m in 0..n {
            for k in 1..=9 {
                let x = k as f64 / 10.0;
                let a = l_eval(n, m, x, LRoute::Definition)?;
                let b = l_eval(n, m, x, LRoute::Alternating)?;
                let c = l_eval(n, m, x, LRoute::Quadrature)?;
                worst = worst.max((a - b).abs()).max((a - c).abs());
            }
        }
    }
    measure(worst, Bound::at_most(1e-9), "definition vs alternating vs quadrature, n ≤ 40, m < n, x ∈ {0.1..0.9}")
}

fn top_i_matches_closed_form() -> R {
    let mut worst: f64 = 0.0;
    for n in 1..=50 {
        for x in [0.1, 0.2, 0.3, 0.4] {
            let direct = i_nm_eval(n, n - 1, x)?;
            let closed = i_top_closed(n, x)?;
            worst = worst.max(((direct - closed) / closed).abs());
        }
    }
    measure(worst, Bound::at_most(1e-10), "relative deviation of I_n^(n-1)(x) from its δ_n form, n ≤ 50")
}

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

fn exact_rational_identities() -> R {
    let mut mismatches = 0usize;
    let one = rat(1, 1);
    for n in 1..=25 {
        for m in 0..n {
            for x in [rat(1, 10), rat(1, 3), rat(7, 9)] {
                if l_eval_exact(n, m, &x, LRoute::Definition)? != l_eval_exact(n, m, &x, LRoute::Alternating)? {
                    mismatches += 1;
                }
            }
        }
        for x in [rat(1, 10), rat(1, 5), rat(3, 10), rat(2, 5)] {
            let direct = i_nm_eval_exact(n, n - 1, &x)?;
            let closed = (&one - &x * rat(2, 1)) / (&one - &x) + &x * delta_d_exact(n, &(&one - &x))?;
            if direct != closed {
                mismatches += 1;
            }
        }
    }
    measure(mismatches as f64, Bound::at_most(0.0), "exact mismatches for n ≤ 25 (L routes and the top-I identity)")
}

fn f_recurrence_is_binomial() -> R {
    let table = f_table(60, 60);
    let mut mismatches = 0usize;
    for (k, row) in table.iter().enumerate() {
        for (j0, v) in row.iter().enumerate() {
            if *v != f_coeff(j0 as u64 + 1, k as u64)? {
                mismatches += 1;
            }
        }
    }
    measure(mismatches as f64, Bound::at_most(0.0), "recurrence table vs binomial formula, j, k ≤ 60")
}

// ---- memory

fn two_slot_reference_value() -> R {
    let (p, _) = simulate_memory_beta_swap(2, 0.0, 0.75)?;
    measure((p - 0.890625).abs(), Bound::at_most(1e-12), format!("d = 2, γ = 0.75, p0 = 0 gives {p}"))
}

const MEMORY_GAMMAS: [f64; 5] = [0.55, 0.65, 0.75, 0.85, 0.95];

fn memory_closed_form_grid() -> R {
    let mut worst: f64 = 0.0;
    for g in MEMORY_GAMMAS {
        for p0 in [0.0, 0.25, 0.5, g, 0.9] {
            for d in 1..=12 {
                worst = worst.max((memory_beta_swap_ground(d, p0, g)? - closed_form_p_d(d, p0, g)?).abs());
            }
        }
    }
    measure(worst, Bound::at_most(1e-10), "simulation vs closed form, d ≤ 12, five γ × five p0")
}

fn memory_gap_within_bound() -> R {
    let mut worst = f64::NEG_INFINITY;
    for g in MEMORY_GAMMAS {
        for p0 in [0.0, 0.25, 0.5, 0.9] {
            for d in 10..=30 {
                let r = verify_pair(d, g, p0, 1.0 - p0)?;
                worst = worst.max(r.beta_swap_gap - r.gap_bound);
            }
        }
    }
    measure(worst, Bound::at_most(1e-12), "largest (gap to the exact β-swap) − (tail bound), 10 ≤ d ≤ 30")
}

// ---- cooling

const COHERENT_GAMMAS: [f64; 3] = [0.6, 0.75, 0.9];

fn coherent_closed_forms() -> R {
    let mut worst: f64 = 0.0;
    for g in COHERENT_GAMMAS {
        let mut classes = vec![ProcessClass::Tp, ProcessClass::Mtp];
        classes.extend((1..=8).map(ProcessClass::Mmtp));
        for c in classes {
            let run = cool_coherent(c, 50, g)?;
            for (k, p) in run.populations.iter().enumerate() {
                worst = worst.max((p - coherent_closed_form(c, k + 1, g)?).abs());
            }
        }
    }
    measure(worst, Bound::at_most(1e-10), "all classes, n ≤ 50, d ≤ 8, γ ∈ {0.6, 0.75, 0.9}")
}

fn coherent_one_slot_is_gibbs() -> R {
    let worst = COHERENT_GAMMAS
        .iter()
        .map(|&g| Ok((coherent_asymptote(ProcessClass::Mmtp(1), g)? - g).abs()))
        .collect::<thermoproc::Result<Vec<f64>>>()?;
    measure(max_of(worst), Bound::at_most(1e-12), "|p_max(d = 1) − γ|")
}

fn coherent_limit_increases_with_memory() -> R {
    let mut smallest = f64::INFINITY;
    for g in COHERENT_GAMMAS {
        let mut prev = coherent_deficit(1, g)?;
        for d in 2..=30 {
            let cur = coherent_deficit(d, g)?;
            smallest = smallest.min((prev - cur) / prev);
            prev = cur;
        }
    }
    measure(
        smallest,
        Bound::Above { threshold: 0.0 },
        "smallest relative drop of 1 − p_max between consecutive d, d ≤ 30",
    )
}

fn reference_params() -> thermoproc::Result<IncoherentParams> {
    IncoherentParams::new(1.0, 2.0, 1.0, 0.2)
}

fn incoherent_reference_asymptote() -> R {
    let p = incoherent_asymptote(&reference_params()?);
    measure((p - 0.858149).abs(), Bound::at_most(1e-6), format!("p* = {p}"))
}

fn incoherent_convergence() -> R {
    let params = reference_params()?;
    let p_star = incoherent_asymptote(&params);
    let mut worst: f64 = 0.0;
    for c in [ProcessClass::Tp, ProcessClass::Mtp, ProcessClass::Mmtp(1), ProcessClass::Mmtp(2), ProcessClass::Mmtp(4)] {
        let run = cool_incoherent(c, 50, &params)?;
        worst = worst.max((run.populations[49] - p_star).abs());
    }
    measure(worst, Bound::at_most(1e-6), "|p_50 − p*| at the reference point")
}

fn incoherent_rates_tp_mtp() -> R {
    let params = reference_params()?;
    let g = params.gamma();
    let tp = measured_rate(ProcessClass::Tp, Paradigm::Incoherent, g, Some(&params))?;
    let mtp = measured_rate(ProcessClass::Mtp, Paradigm::Incoherent, g, Some(&params))?;
    let worst = (tp - incoherent_rate_tp(&params)).abs().max((mtp - incoherent_rate_mtp(&params)).abs());
    measure(worst, Bound::at_most(1e-10), format!("measured rates TP {tp}, MTP {mtp}"))
}

fn incoherent_one_slot_rate_is_mtp() -> R {
    let params = reference_params()?;
    let g = params.gamma();
    let one = measured_rate(ProcessClass::Mmtp(1), Paradigm::Incoherent, g, Some(&params))?;
    let mtp = measured_rate(ProcessClass::Mtp, Paradigm::Incoherent, g, Some(&params))?;
    measure((one - mtp).abs(), Bound::at_most(1e-10), "measured MMTP(1) rate vs measured MTP rate")
}

fn incoherent_mmtp_rates() -> R {
    let params = reference_params()?;
    let mut worst: f64 = 0.0;
    for d in 1..=8 {
        let m = measured_rate(ProcessClass::Mmtp(d), Paradigm::Incoherent, params.gamma(), Some(&params))?;
        worst = worst.max((m - incoherent_rate_mmtp(&params, d)?).abs());
    }
    measure(worst, Bound::at_most(1e-10), "measured vs two-branch closed-form MMTP rate, d ≤ 8")
}

fn single_branch_rate_deviation() -> R {
    let params = reference_params()?;
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for d in 1..=8 {
        let m = measured_rate(ProcessClass::Mmtp(d), Paradigm::Incoherent, params.gamma(), Some(&params))?;
        let dev = mmtp_rate_single_branch(&params, d)? - m;
        worst = worst.max(dev.abs());
        parts.push(format!("d={d}: {dev:.6e}"));
    }
    measure(
        worst,
        Bound::Report,
        format!("single-branch rate minus measured rate ({})", parts.join(", ")),
    )
}

fn incoherent_closed_form_grid() -> R {
    let mut worst: f64 = 0.0;
    let mut skipped = 0usize;
    for be in [2f64.ln(), 3f64.ln()] {
        for bse in [4f64.ln(), 6f64.ln()] {
            for bh in [0.1, 0.5] {
                // β_H(𝓔 − E) = 0.5 with 𝓔 − E = ln(4/3) would need β_H > β.
                if bh / (bse - be) >= 1.0 {
                    skipped += 1;
                    continue;
                }
                let params = IncoherentParams::from_products(be, bse, bh)?;
                let mut classes = vec![ProcessClass::Tp, ProcessClass::Mtp];
                classes.extend((1..=8).map(ProcessClass::Mmtp));
                for c in classes {
                    let run = cool_incoherent(c, 50, &params)?;
                    for (k, p) in run.populations.iter().enumerate() {
                        worst = worst.max((p - incoherent_closed_form(c, k + 1, &params)?).abs());
                    }
                }
            }
        }
    }
    measure(
        worst,
        Bound::at_most(1e-10),
        format!("all classes, n ≤ 50, d ≤ 8, 8-point parameter grid ({skipped} points with β_H ≥ β skipped)"),
    )
}

fn incoherent_round_ordering() -> R {
    let params = reference_params()?;
    let mut bad = 0usize;
    for c in [ProcessClass::Tp, ProcessClass::Mtp, ProcessClass::Mmtp(3)] {
        if !verify_round_ordering(&cool_incoherent(c, 50, &params)?)? {
            bad += 1;
        }
    }
    measure(bad as f64, Bound::at_most(0.0), "runs whose pre-step states leave the (g1, e1, g0, e0) order")
}

// ---- workx

fn reference_setup() -> thermoproc::Result<ExtractionSetup> {
    ExtractionSetup::from_products(2f64.ln(), 4f64.ln())
}

fn reference_tp() -> R {
    let s = reference_setup()?;
    let (sim, _) = run_optimal_tp(&s)?;
    let worst = (sim - 0.25).abs().max((epsilon_tp(&s) - 0.25).abs());
    measure(worst, Bound::at_most(1e-12), format!("optimal matrix gives {sim}, expected 0.25"))
}

fn reference_mtp() -> R {
    let s = reference_setup()?;
    let mut worst = (epsilon_mtp(&s) - 8.0 / 15.0).abs();
    for v in [Variant::Primary, Variant::Tilde] {
        let (e, _) = run_sequence_protocol(SequenceClass::Mtp, &s, v)?;
        worst = worst.max((e - 8.0 / 15.0).abs());
    }
    measure(worst, Bound::at_most(1e-12), "both thermalization sequences vs 8/15")
}

fn reference_etp() -> R {
    let s = reference_setup()?;
    let mut worst = (epsilon_etp(&s) - 0.375).abs();
    for v in [Variant::Primary, Variant::Tilde] {
        let (e, _) = run_sequence_protocol(SequenceClass::Etp, &s, v)?;
        worst = worst.max((e - 0.375).abs());
    }
    measure(worst, Bound::at_most(1e-12), "both β-swap sequences vs 0.375")
}

fn error_ordering() -> R {
    let mut worst: f64 = 0.0;
    for be in [2f64.ln(), 1.0] {
        for w in grid(0.01, 6.0, 100) {
            let s = ExtractionSetup::from_products(be, w)?;
            let (tp, etp, mtp) = (epsilon_tp(&s), epsilon_etp(&s), epsilon_mtp(&s));
            worst = worst.max(tp - etp).max(etp - mtp);
        }
    }
    measure(worst, Bound::at_most(1e-15), "largest violation of ε_TP ≤ ε_ETP ≤ ε_MTP on a 100-point W grid")
}

fn optimal_tp_matrices_valid() -> R {
    let mut worst: f64 = 0.0;
    let mut failures = 0usize;
    for w in grid(0.05, 4.0, 40) {
        let s = ExtractionSetup::from_products(2f64.ln(), w)?;
        let m = optimal_tp_matrix(&s)?;
        if !m.satisfies_detailed_balance(&s.hamiltonian(), 1.0, 1e-12) {
            failures += 1;
        }
        let (eps, _) = run_optimal_tp(&s)?;
        worst = worst.max((eps - epsilon_tp(&s)).abs());
    }
    measure(
        worst + failures as f64,
        Bound::at_most(1e-12),
        format!("error deviation from closed form; {failures} matrices break detailed balance"),
    )
}

fn memory_extraction_matches_closed_form() -> R {
    let mut worst: f64 = 0.0;
    for be in [2f64.ln(), 1.0] {
        for w in grid(0.05, 4.0, 25) {
            let s = ExtractionSetup::from_products(be, w)?;
            for d in 1..=10 {
                let (eps, _) = run_memory_extraction(&s, d)?;
                worst = worst.max((eps - epsilon_d_closed(&s, d)?).abs());
            }
        }
    }
    measure(worst, Bound::at_most(1e-10), "simulation vs closed form, d ≤ 10, 25 W points × 2 βE")
}

fn one_slot_extraction_is_mtp() -> R {
    let mut worst: f64 = 0.0;
    for w in grid(0.05, 4.0, 25) {
        let s = ExtractionSetup::from_products(2f64.ln(), w)?;
        let (sim, _) = run_memory_extraction(&s, 1)?;
        worst = worst
            .max((sim - epsilon_mtp(&s)).abs())
            .max((epsilon_d_closed(&s, 1)? - epsilon_mtp(&s)).abs());
    }
    measure(worst, Bound::at_most(1e-12), "d = 1 simulation and closed form vs ε_MTP")
}

fn extraction_monotone_in_memory() -> R {
    let mut worst = f64::NEG_INFINITY;
    for w in grid(0.05, 4.0, 25) {
        let s = ExtractionSetup::from_products(2f64.ln(), w)?;
        let mut prev = epsilon_d_closed(&s, 1)?;
        for d in 2..=40 {
            let cur = epsilon_d_closed(&s, d)?;
            worst = worst.max(cur - prev);
            prev = cur;
        }
    }
    measure(worst, Bound::at_most(1e-12), "largest increase of ε^(d) from d to d + 1, d ≤ 40")
}

fn large_memory_approaches_tp() -> R {
    let base = ExtractionSetup::from_products(2f64.ln(), 1.0)?;
    let w0 = base.w0();
    let mut worst: f64 = 0.0;
    let mut used = 0usize;
    for w in grid(0.05, 3.0, 60) {
        if (w - w0).abs() < 0.1 * w0 {
            continue;
        }
        used += 1;
        let s = base.with_w(w)?;
        worst = worst.max((epsilon_d_closed(&s, 400)? - epsilon_tp(&s)).abs());
    }
    measure(worst, Bound::at_most(0.02), format!("|ε^(400) − ε_TP| over {used} W points at least 10% from W_0"))
}

fn extraction_mass_conserved() -> R {
    let mut worst: f64 = 0.0;
    for w in [0.3, 1.0, 2.5] {
        let s = ExtractionSetup::from_products(1.0, w)?;
        for d in 1..=10 {
            let (_, trace) = run_memory_extraction(&s, d)?;
            let a: f64 = trace.a.iter().sum();
            let c: f64 = trace.c.iter().sum();
            worst = worst
                .max(trace.max_mass_drift)
                .max((trace.epsilon + a + c - 1.0).abs());
        }
    }
    measure(worst, Bound::at_most(1e-12), "total mass drift at subroutine boundaries")
}

fn depletion_matches_closed_form() -> R {
    let mut worst: f64 = 0.0;
    for gw in [0.55, 0.7, 0.9] {
        for d in 1..=8 {
            for (a, b) in simulate_depletion(gw, d)?.iter().zip(depletion_closed(gw, d)?) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    measure(worst, Bound::at_most(1e-12), "single-level depletion d_k, d ≤ 8")
}

fn ascending_order_is_best() -> R {
    let mut rng = StdRng::seed_from_u64(2024);
    let mut worst = f64::NEG_INFINITY;
    for w in [0.5, 1.2, 2.0] {
        let s = ExtractionSetup::from_products(2f64.ln(), w)?;
        let d = 6;
        let (best, _) = run_memory_extraction(&s, d)?;
        let mut order: Vec<usize> = (1..=d).collect();
        for _ in 0..50 {
            order.shuffle(&mut rng);
            let (eps, _) = run_memory_extraction_ordered(&s, d, &order)?;
            worst = worst.max(best - eps);
        }
    }
    measure(worst, Bound::at_most(1e-14), "largest advantage of a random subroutine order over ascending order")
}

fn step_one_residuals_increase() -> R {
    let mut bad = 0usize;
    for w in [0.3, 1.0, 2.5] {
        let s = ExtractionSetup::from_products(1.0, w)?;
        for d in 2..=10 {
            let (_, trace) = run_memory_extraction(&s, d)?;
            bad += trace.b.windows(2).filter(|p| p[1] <= p[0]).count();
        }
    }
    measure(bad as f64, Bound::at_most(0.0), "non-increasing steps in the step-I residuals")
}

// ---- reachable

const QUTRIT_GAMMAS: [f64; 3] = [0.65, 0.75, 0.85];

fn b_vertices_outside_etp_hull() -> R {
    let mut smallest = f64::INFINITY;
    let mut parts = Vec::new();
    for g in QUTRIT_GAMMAS {
        let hull = etp_orbit_hull(g, 8)?;
        let v = qutrit_mmtp2_vertices(g)?;
        for (name, b) in [("B1", &v[2]), ("B2", &v[3])] {
            let margin = hull.signed_distance(b);
            smallest = smallest.min(margin);
            parts.push(format!("γ={g} {name}: {margin:.6e}"));
        }
    }
    measure(
        smallest,
        Bound::Above { threshold: 1e-6 },
        format!("signed distance to the depth-8 orbit hull, positive outside ({})", parts.join(", ")),
    )
}

fn mmtp2_vertices_inside_tp() -> R {
    let mut worst = f64::NEG_INFINITY;
    let mut not_majorized = 0usize;
    let ground = PopulationVector::basis(3, 0)?;
    for g in QUTRIT_GAMMAS {
        let tp = tp_region(g)?;
        let gibbs = qutrit_gibbs(g)?;
        for v in qutrit_mmtp2_vertices(g)? {
            worst = worst.max(tp.signed_distance(&v));
            if !thermo_majorizes(&ground, &v, &gibbs)? {
                not_majorized += 1;
            }
        }
    }
    measure(
        worst + not_majorized as f64,
        Bound::at_most(1e-12),
        format!("largest signed distance to the TP polytope; {not_majorized} vertices not thermo-majorized"),
    )
}

fn orbit_hull_monotone_in_depth() -> R {
    let mut worst = f64::NEG_INFINITY;
    for g in QUTRIT_GAMMAS {
        let mut prev = etp_orbit_hull(g, 1)?;
        for depth in 2..=8 {
            let cur = etp_orbit_hull(g, depth)?;
            for v in &prev.vertices {
                worst = worst.max(cur.signed_distance(v));
            }
            prev = cur;
        }
    }
    measure(worst, Bound::at_most(1e-12), "largest distance of a depth-k hull vertex outside the depth-(k+1) hull")
}

fn a_vertex_matches_memory_module() -> R {
    let mut worst: f64 = 0.0;
    for g in QUTRIT_GAMMAS {
        let v = qutrit_mmtp2_vertices(g)?;
        let ground = memory_beta_swap_ground(2, 1.0, g)?;
        worst = worst.max((v[0].get(1) - (1.0 - ground)).abs());
    }
    measure(worst, Bound::at_most(1e-14), "excited population of A_1 vs the two-slot qubit protocol")
}

// ---- cli

fn outputs_deterministic() -> R {
    let configs = [
        ExperimentConfig::new(
            Experiment::Fig2(Fig2Params {
                beta_w: Grid {
                    start: 0.05,
                    stop: 3.0,
                    points: 40,
                },
                ..Fig2Params::default()
            }),
            "unused",
        ),
        ExperimentConfig::new(Experiment::Fig3(Fig3Params::default()), "unused"),
    ];
    let mut differing = 0usize;
    for c in &configs {
        let a = crate::experiments::build_outputs(c).map_err(|e| thermoproc::Error::Format(e.to_string()))?;
        let b = crate::experiments::build_outputs(c).map_err(|e| thermoproc::Error::Format(e.to_string()))?;
        differing += a.files.iter().zip(&b.files).filter(|(x, y)| x != y).count();
        differing += a.files.len().abs_diff(b.files.len());
    }
    measure(differing as f64, Bound::at_most(0.0), "files differing between two in-process runs of fig2 and fig3")
}
