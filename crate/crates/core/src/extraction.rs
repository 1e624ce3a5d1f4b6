//! Single-shot work extraction from an excited qubit.
//!
//! A qubit with gap `E` starts in `|e⟩` and a work bit with gap `W` in `|0⟩`.
//! The error `ε` is the population left on work-bit level `0` at the end.
//!
//! Basis of the joint system: `{g0, g1, e0, e1}` (system slow, work bit fast)
//! with energies `{0, W, E, E + W}`. With a `d`-dimensional memory every level
//! is split into slots `1..=d`, memory index fastest.

use std::fmt;

use crate::combinatorics::{f_coeff, i_d_eval};
use crate::majorization::extraction_hamiltonian;
use crate::thermal::{PairOp, PopulationVector, ProtocolTrace, ThermalContext, TransitionMatrix};
use crate::{Error, Result};

pub const G0: usize = 0;
pub const G1: usize = 1;
pub const E0: usize = 2;
pub const E1: usize = 3;
pub const SW_LABELS: [&str; 4] = ["g0", "g1", "e0", "e1"];

/// Energies and temperature of an extraction problem. Derived quantities are
/// computed on demand.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExtractionSetup {
    e: f64,
    w: f64,
    beta: f64,
}

impl ExtractionSetup {
    pub fn new(e: f64, w: f64, beta: f64) -> Result<Self> {
        for (name, v) in [("E", e), ("W", w), ("beta", beta)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, v, "must be finite and positive"));
            }
        }
        Ok(Self { e, w, beta })
    }

    /// `β = 1`, energies given in units of `k_B T`.
    pub fn from_products(beta_e: f64, beta_w: f64) -> Result<Self> {
        Self::new(beta_e, beta_w, 1.0)
    }

    pub fn e(&self) -> f64 {
        self.e
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn with_w(&self, w: f64) -> Result<Self> {
        Self::new(self.e, w, self.beta)
    }

    /// `W - E`.
    pub fn delta(&self) -> f64 {
        self.w - self.e
    }

    /// `e^{-βE}`.
    pub fn q_e(&self) -> f64 {
        (-self.beta * self.e).exp()
    }

    /// Ground weight of the system qubit, `1/(1+e^{-βE})`.
    pub fn gamma_e(&self) -> f64 {
        1.0 / (1.0 + self.q_e())
    }

    /// `1/(1+e^{-βW})`.
    pub fn gamma_w(&self) -> f64 {
        1.0 / (1.0 + (-self.beta * self.w).exp())
    }

    /// `1/(1+e^{-β(W-E)})`: weight of `|e0⟩` in equilibrium with `|g1⟩`.
    pub fn gamma_delta(&self) -> f64 {
        1.0 / (1.0 + (-self.beta * self.delta()).exp())
    }

    /// `1 + e^{-βE}`.
    pub fn z(&self) -> f64 {
        1.0 + self.q_e()
    }

    /// `E + ln(Z)/β`, the largest work extractable without error.
    pub fn w0(&self) -> f64 {
        self.e + self.z().ln() / self.beta
    }

    pub fn context(&self) -> ThermalContext {
        ThermalContext::new(self.beta).expect("beta validated at construction")
    }

    pub fn hamiltonian(&self) -> crate::Hamiltonian {
        extraction_hamiltonian(self.e, self.w).expect("energies validated at construction")
    }

    pub fn gibbs(&self) -> PopulationVector {
        self.context()
            .gibbs(&self.hamiltonian())
            .expect("finite Hamiltonian and positive beta")
    }
}

/// Minimal error over all thermal processes.
pub fn epsilon_tp(setup: &ExtractionSetup) -> f64 {
    if setup.w <= setup.w0() {
        return 0.0;
    }
    let b = setup.beta;
    (1.0 - (b * (setup.e - setup.w)).exp() - (-b * setup.w).exp()).max(0.0)
}

/// `γ_δ γ_W`.
pub fn epsilon_mtp(setup: &ExtractionSetup) -> f64 {
    setup.gamma_delta() * setup.gamma_w()
}

pub fn epsilon_etp(setup: &ExtractionSetup) -> f64 {
    if setup.w <= setup.e {
        return 0.0;
    }
    let b = setup.beta;
    (1.0 - (-b * setup.delta()).exp()) * (1.0 - (-b * setup.w).exp())
}

/// Error reachable with a `d`-dimensional memory:
/// `I_d(1/(1+e^{-β(E-W)}), 1/(1+e^{βW}))`.
pub fn epsilon_d_closed(setup: &ExtractionSetup, d: usize) -> Result<f64> {
    i_d_eval(d, 1.0 - setup.gamma_delta(), 1.0 - setup.gamma_w())
}

/// Which of the three optimal thermal-process matrices applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TpRegime {
    /// `W ≤ E`.
    Below,
    /// `E < W ≤ W_0`.
    Between,
    /// `W > W_0`.
    Above,
}

pub fn tp_regime(setup: &ExtractionSetup) -> TpRegime {
    if setup.w <= setup.e {
        TpRegime::Below
    } else if setup.w <= setup.w0() {
        TpRegime::Between
    } else {
        TpRegime::Above
    }
}

/// Optimal joint thermal process on `{g0, g1, e0, e1}`; follow it with a full
/// thermalization of the system to reach the Gibbs qubit.
pub fn optimal_tp_matrix(setup: &ExtractionSetup) -> Result<TransitionMatrix> {
    let b = setup.beta;
    let (e, w) = (setup.e, setup.w);
    let rows = match tp_regime(setup) {
        TpRegime::Below => {
            let r = (-b * (e - w)).exp();
            vec![
                vec![1.0, 0.0, 0.0, 0.0],
                vec![0.0, 1.0 - r, 1.0, 0.0],
                vec![0.0, r, 0.0, 0.0],
                vec![0.0, 0.0, 0.0, 1.0],
            ]
        }
        TpRegime::Between => {
            let r = (-b * (w - e)).exp();
            let s = (b * w).exp() - (b * e).exp();
            vec![
                vec![1.0, 0.0, 0.0, 0.0],
                vec![0.0, 0.0, r, 0.0],
                vec![0.0, 1.0, 0.0, s],
                vec![0.0, 0.0, 1.0 - r, 1.0 - s],
            ]
        }
        TpRegime::Above => {
            let r = (-b * (w - e)).exp();
            let qw = (-b * w).exp();
            vec![
                vec![1.0, 0.0, 0.0, 0.0],
                vec![0.0, 0.0, r, 0.0],
                vec![0.0, 1.0, 1.0 - r - qw, 1.0],
                vec![0.0, 0.0, qw, 0.0],
            ]
        }
    };
    let m = TransitionMatrix::from_rows(&rows)?;
    if !m.is_gibbs_stochastic(&setup.gibbs(), 1e-12) {
        return Err(Error::Format(format!(
            "optimal thermal-process matrix is not Gibbs-preserving at E = {e}, W = {w}"
        )));
    }
    Ok(m)
}

/// Full thermalization of the system qubit for each work-bit value.
fn system_thermalization(setup: &ExtractionSetup, mem_dim: usize) -> Result<Vec<PairOp>> {
    let g = setup.gamma_e();
    let mut ops = Vec::with_capacity(2 * mem_dim);
    for bit in [0, 1] {
        for m in 0..mem_dim {
            ops.push(PairOp::full_thermalization(bit * mem_dim + m, (2 + bit) * mem_dim + m, g)?);
        }
    }
    Ok(ops)
}

/// Applies [`optimal_tp_matrix`] to `|e0⟩`, thermalizes the system and
/// returns the remaining work-bit error.
pub fn run_optimal_tp(setup: &ExtractionSetup) -> Result<(f64, ExtractionTrace)> {
    let mut trace = ExtractionTrace::new(1);
    let start = PopulationVector::basis(4, E0)?;
    trace.push("start", start.clone());
    let after = optimal_tp_matrix(setup)?.apply(&start)?;
    trace.push("G_TP", after.clone());
    let mut probs = after.into_vec();
    for op in system_thermalization(setup, 1)? {
        op.apply_in_place(&mut probs);
    }
    trace.push("T_S", PopulationVector::new(probs)?);
    trace.finish();
    Ok((trace.epsilon, trace))
}

/// Sequential protocol class: full thermalizations or β-swaps.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SequenceClass {
    Mtp,
    Etp,
}

impl fmt::Display for SequenceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SequenceClass::Mtp => f.write_str("MTP"),
            SequenceClass::Etp => f.write_str("ETP"),
        }
    }
}

/// Order of the two pair operations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    /// `(g1, e0)` first, then `(e0, e1)`.
    Primary,
    /// `(e0, e1)` first, then `(g1, e0)`.
    Tilde,
}

/// Runs the two-operation protocol on `|e0⟩` followed by a full
/// thermalization of the system. Returns the work-bit error.
pub fn run_sequence_protocol(
    class: SequenceClass,
    setup: &ExtractionSetup,
    variant: Variant,
) -> Result<(f64, ExtractionTrace)> {
    let ctx = setup.context();
    let h = setup.hamiltonian();
    let op = |i, j| match class {
        SequenceClass::Mtp => ctx.full_thermalization(&h, i, j),
        SequenceClass::Etp => ctx.beta_swap(&h, i, j),
    };
    let pairs = match variant {
        Variant::Primary => [(G1, E0), (E0, E1)],
        Variant::Tilde => [(E0, E1), (G1, E0)],
    };
    let mut trace = ExtractionTrace::new(1);
    let mut probs = PopulationVector::basis(4, E0)?.into_vec();
    trace.push("start", PopulationVector::new(probs.clone())?);
    for (i, j) in pairs {
        op(i, j)?.apply_in_place(&mut probs);
        let label = match class {
            SequenceClass::Mtp => format!("T[{},{}]", SW_LABELS[i], SW_LABELS[j]),
            SequenceClass::Etp => format!("B[{},{}]", SW_LABELS[i], SW_LABELS[j]),
        };
        trace.push(label, PopulationVector::new(probs.clone())?);
    }
    for op in system_thermalization(setup, 1)? {
        op.apply_in_place(&mut probs);
    }
    trace.push("T_S", PopulationVector::new(probs)?);
    trace.finish();
    Ok((trace.epsilon, trace))
}

/// Record of an extraction run on `{g0, g1, e0, e1} ⊗ {1..d}`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtractionTrace {
    pub memory_dim: usize,
    /// Labels of the composite basis, e.g. `e0_3`.
    pub labels: Vec<String>,
    pub steps: ProtocolTrace,
    /// Population of `|g1 j⟩` after step I (memory protocol only).
    pub a: Vec<f64>,
    /// Population of `|e0 j⟩` after step I (memory protocol only).
    pub b: Vec<f64>,
    /// Work-bit-`0` population of slot `k` at the end, `ε_k`.
    pub slot_errors: Vec<f64>,
    /// Population of `|e1 j⟩` at the end.
    pub c: Vec<f64>,
    /// `Σ_k ε_k`.
    pub epsilon: f64,
    /// Largest `|total mass - 1|` seen at a subroutine boundary.
    pub max_mass_drift: f64,
}

impl ExtractionTrace {
    fn new(memory_dim: usize) -> Self {
        let labels = SW_LABELS
            .iter()
            .flat_map(|l| {
                (1..=memory_dim).map(move |m| {
                    if memory_dim == 1 {
                        l.to_string()
                    } else {
                        format!("{l}_{m}")
                    }
                })
            })
            .collect();
        Self {
            memory_dim,
            labels,
            steps: ProtocolTrace::new(),
            a: Vec::new(),
            b: Vec::new(),
            slot_errors: Vec::new(),
            c: Vec::new(),
            epsilon: 0.0,
            max_mass_drift: 0.0,
        }
    }

    fn push(&mut self, label: impl Into<String>, state: PopulationVector) {
        self.max_mass_drift = self.max_mass_drift.max((state.sum() - 1.0).abs());
        self.steps.push(label, state);
    }

    fn sector(probs: &[f64], level: usize, d: usize) -> Vec<f64> {
        probs[level * d..(level + 1) * d].to_vec()
    }

    /// Fills the per-slot summaries from the last recorded state.
    fn finish(&mut self) {
        let d = self.memory_dim;
        let Some(last) = self.steps.last() else {
            return;
        };
        let p = last.state.probs();
        self.slot_errors = (0..d).map(|k| p[G0 * d + k] + p[E0 * d + k]).collect();
        self.c = Self::sector(p, E1, d);
        self.epsilon = self.slot_errors.iter().sum();
    }

    /// Final work-bit-`0` mass computed directly from the last state.
    pub fn final_error_mass(&self) -> f64 {
        let d = self.memory_dim;
        self.steps.last().map_or(0.0, |s| {
            let p = s.state.probs();
            p[G0 * d..(G0 + 1) * d].iter().chain(&p[E0 * d..(E0 + 1) * d]).sum()
        })
    }
}

/// Memory-assisted protocol with step-II subroutines in ascending slot order.
pub fn run_memory_extraction(setup: &ExtractionSetup, d: usize) -> Result<(f64, ExtractionTrace)> {
    let order: Vec<usize> = (1..=d).collect();
    run_memory_extraction_ordered(setup, d, &order)
}

/// Memory-assisted protocol starting from `|e0⟩ ⊗ 1/d`.
///
/// Step I: for each slot `j`, thermalize `|e0 j⟩` against `|g1 k⟩` for
/// `k = 1..d`. Step II: for each slot `k` in `order`, thermalize `|e0 k⟩`
/// against `|e1 j⟩` for `j = 1..d`. `order` is a permutation of `1..=d`.
pub fn run_memory_extraction_ordered(
    setup: &ExtractionSetup,
    d: usize,
    order: &[usize],
) -> Result<(f64, ExtractionTrace)> {
    if d == 0 {
        return Err(Error::param("d", 0.0, "memory dimension must be at least 1"));
    }
    check_permutation(order, d)?;
    let x = 1.0 - setup.gamma_delta();
    let gw = setup.gamma_w();
    let idx = |level: usize, slot: usize| level * d + slot - 1;

    let mut trace = ExtractionTrace::new(d);
    let start = PopulationVector::basis(4, E0)?.tensor(&PopulationVector::uniform(d)?);
    trace.push("start", start.clone());
    let mut probs = start.into_vec();

    for j in 1..=d {
        for k in 1..=d {
            PairOp::full_thermalization(idx(G1, k), idx(E0, j), x)?.apply_in_place(&mut probs);
        }
        trace.push(format!("I[e0_{j}]"), PopulationVector::new(probs.clone())?);
    }
    trace.a = ExtractionTrace::sector(&probs, G1, d);
    trace.b = ExtractionTrace::sector(&probs, E0, d);

    for &k in order {
        for j in 1..=d {
            PairOp::full_thermalization(idx(E0, k), idx(E1, j), gw)?.apply_in_place(&mut probs);
        }
        trace.push(format!("II[e0_{k}]"), PopulationVector::new(probs.clone())?);
    }
    trace.finish();
    Ok((trace.epsilon, trace))
}

fn check_permutation(order: &[usize], d: usize) -> Result<()> {
    if order.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: order.len(),
        });
    }
    let mut seen = vec![false; d];
    for &k in order {
        if k == 0 || k > d || seen[k - 1] {
            return Err(Error::param(
                "order",
                k as f64,
                "must be a permutation of the slots 1..=d",
            ));
        }
        seen[k - 1] = true;
    }
    Ok(())
}

/// `b_j^{(d)} = (1-x)^d / d · Σ_{j'<j} f_d^{(j')} x^{j'}` with `x` the
/// equilibrium weight of `|g1⟩` against `|e0⟩`, for `j = 1..d`.
pub fn step_one_residuals(setup: &ExtractionSetup, d: usize) -> Result<Vec<f64>> {
    if d == 0 {
        return Err(Error::param("d", 0.0, "memory dimension must be at least 1"));
    }
    let x = 1.0 - setup.gamma_delta();
    let pre = (1.0 - x).powi(d as i32) / d as f64;
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(d);
    for j in 0..d {
        acc += to_f64(f_coeff(d as u64, j as u64)?) * x.powi(j as i32);
        out.push(pre * acc);
    }
    Ok(out)
}

/// Single-level depletion: a level `α` (equilibrium weight `gamma_w` against
/// each of `d` degenerate levels `β_j`) holds a unit of population and is
/// thermalized against `β_1..β_d` in turn; the leftover populations of the
/// `β` levels are then fed back with `α` empty, `d` times. Returns `d_1..d_d`,
/// the population on `α` after each pass.
pub fn simulate_depletion(gamma_w: f64, d: usize) -> Result<Vec<f64>> {
    if d == 0 {
        return Err(Error::param("d", 0.0, "memory dimension must be at least 1"));
    }
    let mut probs = vec![0.0; d + 1];
    probs[0] = 1.0;
    let mut out = Vec::with_capacity(d);
    for _ in 0..d {
        for j in 1..=d {
            PairOp::full_thermalization(0, j, gamma_w)?.apply_in_place(&mut probs);
        }
        out.push(probs[0]);
        probs[0] = 0.0;
    }
    Ok(out)
}

/// `d_k = γ_W^d (1-γ_W)^{k-1} f_d^{(k-1)}` for `k = 1..d`.
pub fn depletion_closed(gamma_w: f64, d: usize) -> Result<Vec<f64>> {
    (0..d)
        .map(|k| {
            Ok(gamma_w.powi(d as i32)
                * (1.0 - gamma_w).powi(k as i32)
                * to_f64(f_coeff(d as u64, k as u64)?))
        })
        .collect()
}

fn to_f64(v: num_bigint::BigInt) -> f64 {
    use num_traits::ToPrimitive;
    v.to_f64().unwrap_or(f64::INFINITY)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::rngs::StdRng;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;

    fn reference() -> ExtractionSetup {
        ExtractionSetup::from_products(2f64.ln(), 4f64.ln()).unwrap()
    }

    fn w_grid(n: usize, lo: f64, hi: f64) -> Vec<f64> {
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn reference_values() {
        let s = reference();
        assert_abs_diff_eq!(epsilon_tp(&s), 0.25, epsilon = 1e-14);
        assert_abs_diff_eq!(epsilon_mtp(&s), 8.0 / 15.0, epsilon = 1e-14);
        assert_abs_diff_eq!(epsilon_etp(&s), 0.375, epsilon = 1e-14);
        assert_abs_diff_eq!(s.w0(), 3f64.ln(), epsilon = 1e-14);
    }

    #[test]
    fn tp_boundary_and_tail() {
        let s = ExtractionSetup::from_products(2f64.ln(), 3f64.ln()).unwrap();
        assert_abs_diff_eq!(epsilon_tp(&s), 0.0, epsilon = 1e-15);
        let far = ExtractionSetup::from_products(2f64.ln(), 60.0).unwrap();
        assert_abs_diff_eq!(epsilon_tp(&far), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn mtp_small_work_limit() {
        let s = ExtractionSetup::from_products(1.0, 1e-9).unwrap();
        assert_abs_diff_eq!(epsilon_mtp(&s), 0.5 * (1.0 - s.gamma_e()), epsilon = 1e-8);
    }

    #[test]
    fn closed_form_ordering_on_grid() {
        for be in [2f64.ln(), 1.0, 3f64.ln()] {
            for w in w_grid(100, 0.01, 6.0) {
                let s = ExtractionSetup::from_products(be, w).unwrap();
                let (tp, etp, mtp) = (epsilon_tp(&s), epsilon_etp(&s), epsilon_mtp(&s));
                assert!(tp <= etp + 1e-15 && etp <= mtp + 1e-15, "W = {w}: {tp} {etp} {mtp}");
            }
        }
    }

    #[test]
    fn optimal_matrices_by_regime() {
        let be = 2f64.ln();
        for (bw, regime) in [(0.4, TpRegime::Below), (1.0, TpRegime::Between), (4f64.ln(), TpRegime::Above)] {
            let s = ExtractionSetup::from_products(be, bw).unwrap();
            assert_eq!(tp_regime(&s), regime);
            let m = optimal_tp_matrix(&s).unwrap();
            assert!(m.satisfies_detailed_balance(&s.hamiltonian(), 1.0, 1e-12), "{regime:?}");
            let (eps, trace) = run_optimal_tp(&s).unwrap();
            assert_abs_diff_eq!(eps, epsilon_tp(&s), epsilon = 1e-12);
            let sys = trace.steps.last().unwrap().state.system_marginal(2, 2).unwrap();
            assert_abs_diff_eq!(sys.get(0), s.gamma_e(), epsilon = 1e-12);
        }
    }

    #[test]
    fn optimal_tp_matches_closed_form_on_grid() {
        for w in w_grid(60, 0.05, 5.0) {
            let s = ExtractionSetup::from_products(1.0, w).unwrap();
            let (eps, _) = run_optimal_tp(&s).unwrap();
            assert_abs_diff_eq!(eps, epsilon_tp(&s), epsilon = 1e-12);
        }
    }

    #[test]
    fn sequence_protocols_reference() {
        let s = reference();
        for v in [Variant::Primary, Variant::Tilde] {
            let (m, _) = run_sequence_protocol(SequenceClass::Mtp, &s, v).unwrap();
            assert_abs_diff_eq!(m, 8.0 / 15.0, epsilon = 1e-12);
            let (e, _) = run_sequence_protocol(SequenceClass::Etp, &s, v).unwrap();
            assert_abs_diff_eq!(e, 0.375, epsilon = 1e-12);
        }
    }

    #[test]
    fn sequence_protocols_match_closed_forms_on_grid() {
        for w in w_grid(50, 0.05, 5.0) {
            let s = ExtractionSetup::from_products(2f64.ln(), w).unwrap();
            for v in [Variant::Primary, Variant::Tilde] {
                let (m, _) = run_sequence_protocol(SequenceClass::Mtp, &s, v).unwrap();
                assert_abs_diff_eq!(m, epsilon_mtp(&s), epsilon = 1e-12);
                let (e, _) = run_sequence_protocol(SequenceClass::Etp, &s, v).unwrap();
                assert_abs_diff_eq!(e, epsilon_etp(&s), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn memory_one_slot_is_mtp() {
        for w in w_grid(20, 0.1, 4.0) {
            let s = ExtractionSetup::from_products(1.0, w).unwrap();
            let (eps, _) = run_memory_extraction(&s, 1).unwrap();
            assert_abs_diff_eq!(eps, epsilon_mtp(&s), epsilon = 1e-12);
            assert_abs_diff_eq!(epsilon_d_closed(&s, 1).unwrap(), epsilon_mtp(&s), epsilon = 1e-12);
        }
    }

    #[test]
    fn memory_matches_closed_form() {
        for be in [2f64.ln(), 1.0] {
            for w in w_grid(25, 0.05, 4.0) {
                let s = ExtractionSetup::from_products(be, w).unwrap();
                for d in 1..=10 {
                    let (eps, trace) = run_memory_extraction(&s, d).unwrap();
                    let closed = epsilon_d_closed(&s, d).unwrap();
                    assert!((eps - closed).abs() <= 1e-10, "βE={be} W={w} d={d}: {eps} vs {closed}");
                    assert!((trace.final_error_mass() - eps).abs() <= 1e-12);
                    assert!(trace.max_mass_drift <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn dense_matrix_oracle_agrees() {
        let s = reference();
        let d = 3;
        let n = 4 * d;
        let x = 1.0 - s.gamma_delta();
        let gw = s.gamma_w();
        let mut mats = Vec::new();
        for j in 0..d {
            for k in 0..d {
                mats.push(PairOp::full_thermalization(d + k, 2 * d + j, x).unwrap().to_matrix(n).unwrap());
            }
        }
        for k in 0..d {
            for j in 0..d {
                mats.push(PairOp::full_thermalization(2 * d + k, 3 * d + j, gw).unwrap().to_matrix(n).unwrap());
            }
        }
        mats.reverse();
        let total = TransitionMatrix::compose(&mats).unwrap();
        assert!(total.is_gibbs_stochastic(
            &s.gibbs().tensor(&PopulationVector::uniform(d).unwrap()),
            1e-12
        ));
        let start = PopulationVector::basis(4, E0).unwrap().tensor(&PopulationVector::uniform(d).unwrap());
        let out = total.apply(&start).unwrap();
        let (_, trace) = run_memory_extraction(&s, d).unwrap();
        assert!(out.max_abs_diff(&trace.steps.last().unwrap().state) <= 1e-14);
    }

    #[test]
    fn step_one_residuals_increase_and_match() {
        for w in [0.3, 1.0, 2.5] {
            let s = ExtractionSetup::from_products(1.0, w).unwrap();
            for d in 1..=8 {
                let (_, trace) = run_memory_extraction(&s, d).unwrap();
                let closed = step_one_residuals(&s, d).unwrap();
                for (sim, cf) in trace.b.iter().zip(&closed) {
                    assert_abs_diff_eq!(*sim, *cf, epsilon = 1e-12);
                }
                assert!(trace.b.windows(2).all(|p| p[0] < p[1]), "d = {d}: {:?}", trace.b);
            }
        }
    }

    #[test]
    fn depletion_matches_closed_form() {
        for gw in [0.55, 0.7, 0.9] {
            for d in 1..=8 {
                let sim = simulate_depletion(gw, d).unwrap();
                let cf = depletion_closed(gw, d).unwrap();
                for (a, b) in sim.iter().zip(&cf) {
                    assert_abs_diff_eq!(*a, *b, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn ascending_order_beats_random_orders() {
        let mut rng = StdRng::seed_from_u64(7);
        for w in [0.5, 1.2, 2.0] {
            let s = ExtractionSetup::from_products(2f64.ln(), w).unwrap();
            let d = 6;
            let (best, _) = run_memory_extraction(&s, d).unwrap();
            let mut order: Vec<usize> = (1..=d).collect();
            for _ in 0..50 {
                order.shuffle(&mut rng);
                let (eps, _) = run_memory_extraction_ordered(&s, d, &order).unwrap();
                assert!(best <= eps + 1e-14, "{order:?}: {eps} < {best}");
            }
        }
    }

    #[test]
    fn bracketing_and_monotone_in_d() {
        for w in w_grid(12, 0.2, 3.0) {
            let s = ExtractionSetup::from_products(2f64.ln(), w).unwrap();
            let tp = epsilon_tp(&s);
            let mut prev = epsilon_mtp(&s);
            for d in 1..=40 {
                let eps = epsilon_d_closed(&s, d).unwrap();
                assert!(eps <= prev + 1e-12 && eps >= tp - 1e-12, "W={w} d={d}");
                prev = eps;
            }
        }
    }

    #[test]
    fn large_memory_approaches_tp() {
        let s0 = ExtractionSetup::from_products(2f64.ln(), 1.0).unwrap();
        let w0 = s0.w0();
        for w in [0.5 * w0, 0.9 * w0, 1.1 * w0, 1.5 * w0] {
            let s = s0.with_w(w).unwrap();
            let eps = epsilon_d_closed(&s, 400).unwrap();
            assert!((eps - epsilon_tp(&s)).abs() < 0.02, "W = {w}: {eps}");
        }
    }

    #[test]
    fn bad_order_rejected() {
        let s = reference();
        assert!(run_memory_extraction_ordered(&s, 3, &[1, 1, 2]).is_err());
        assert!(run_memory_extraction_ordered(&s, 3, &[1, 2]).is_err());
        assert!(run_memory_extraction(&s, 0).is_err());
    }
}
