//! Simulating a β-swap with `d²` full thermalizations and a `d`-dimensional
//! maximally mixed memory.
//!
//! For a pair of system levels `(i, j)` (`i` lower) and memory slots
//! `1..=d`, the protocol applies `T^{(i,k),(j,l)}` for `k = 1..d` (outer) and
//! `l = 1..d` (inner), then resets the memory to uniform. On a qubit the
//! output ground population is
//!
//! ```text
//! p^(d) = 1 - p0 (1-γ)/γ - (γ - p0) δ_d(γ)
//! ```
//!
//! which tends to the β-swap value `1 - p0 e^{-βE}` as `d` grows.
//!
//! Basis convention: system index slow, memory fast, so on the qubit the
//! composite basis is `{g1..gd, e1..ed}`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::combinatorics::{delta_bound, delta_d, f_coeff};
use crate::thermal::{thermalize_memory, PairOp, PopulationVector};
use crate::{Error, Result};

/// Tolerance for the Theorem-style pair check.
pub const PAIR_CHECK_TOL: f64 = 1e-10;

/// Full record of one qubit run.
#[derive(Clone, Debug, PartialEq)]
pub struct MemoryProtocolTrace {
    pub d: usize,
    pub gamma: f64,
    pub p0: f64,
    /// `(label, 2d-dim state)` after every thermalization and after the memory
    /// reset.
    pub steps: Vec<(String, PopulationVector)>,
    /// `a_d^{(k)}`: population of `|gk⟩` after the last step of round `k`.
    pub final_a: Vec<f64>,
    /// `b_j^{(d)}`: population of `|ej⟩` after all rounds.
    pub final_b: Vec<f64>,
}

fn check_args(d: usize, p0: f64, gamma: f64) -> Result<()> {
    if d == 0 {
        return Err(Error::param("d", 0.0, "memory dimension must be at least 1"));
    }
    if !(0.0..=1.0).contains(&p0) {
        return Err(Error::param("p0", p0, "must lie in [0, 1]"));
    }
    if !(gamma > 0.5 && gamma < 1.0) {
        return Err(Error::param("gamma", gamma, "must lie in (1/2, 1)"));
    }
    Ok(())
}

/// Applies the `d²` thermalizations between system levels `i` and `j` of a
/// composite state (system slow, memory fast) in place, calling `observe`
/// after each with the 1-based `(k, l)` slot pair.
fn run_grid(
    probs: &mut [f64],
    mem_dim: usize,
    i: usize,
    j: usize,
    gamma: f64,
    mut observe: impl FnMut(usize, usize, &[f64]),
) -> Result<()> {
    for k in 0..mem_dim {
        for l in 0..mem_dim {
            let op = PairOp::full_thermalization(i * mem_dim + k, j * mem_dim + l, gamma)?;
            op.apply_in_place(probs);
            observe(k + 1, l + 1, probs);
        }
    }
    Ok(())
}

/// Runs the protocol on the pair `(i, j)` of an `n`-level system state `p`,
/// where `gamma` is the equilibrium weight of `i` within the pair. Returns the
/// system state after the memory reset.
pub fn simulate_on_pair(
    p: &PopulationVector,
    i: usize,
    j: usize,
    gamma: f64,
    d: usize,
) -> Result<PopulationVector> {
    if d == 0 {
        return Err(Error::param("d", 0.0, "memory dimension must be at least 1"));
    }
    let n = p.dim();
    for index in [i, j] {
        if index >= n {
            return Err(Error::IndexOutOfRange { index, dim: n });
        }
    }
    let joint = p.tensor(&PopulationVector::uniform(d)?);
    let mut probs = joint.into_vec();
    run_grid(&mut probs, d, i, j, gamma, |_, _, _| {})?;
    let out = thermalize_memory(&PopulationVector::new(probs)?, n, d)?;
    out.system_marginal(n, d)
}

/// Qubit run starting from `[p0, 1-p0] ⊗ uniform(d)`, keeping every
/// intermediate state. Returns the final ground population.
pub fn simulate_memory_beta_swap(
    d: usize,
    p0: f64,
    gamma: f64,
) -> Result<(f64, MemoryProtocolTrace)> {
    check_args(d, p0, gamma)?;
    let joint = PopulationVector::qubit(p0)?.tensor(&PopulationVector::uniform(d)?);
    let mut probs = joint.into_vec();
    let mut steps = Vec::with_capacity(d * d + 1);
    let mut final_a = vec![0.0; d];
    let mut failure = None;
    run_grid(&mut probs, d, 0, 1, gamma, |k, l, state| {
        if l == d {
            final_a[k - 1] = state[k - 1];
        }
        match PopulationVector::new(state.to_vec()) {
            Ok(v) => steps.push((format!("T[g{k},e{l}]"), v)),
            Err(e) => failure = failure.take().or(Some(e)),
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    let final_b = probs[d..].to_vec();
    let out = thermalize_memory(&PopulationVector::new(probs)?, 2, d)?;
    let ground = out.system_marginal(2, d)?.get(0);
    steps.push(("T_M".to_string(), out));
    Ok((
        ground,
        MemoryProtocolTrace {
            d,
            gamma,
            p0,
            steps,
            final_a,
            final_b,
        },
    ))
}

/// Same as [`simulate_memory_beta_swap`] without storing the trace.
pub fn memory_beta_swap_ground(d: usize, p0: f64, gamma: f64) -> Result<f64> {
    check_args(d, p0, gamma)?;
    let out = simulate_on_pair(&PopulationVector::qubit(p0)?, 0, 1, gamma, d)?;
    Ok(out.get(0))
}

/// `1 - p0 (1-γ)/γ - (γ - p0) δ_d(γ)`.
pub fn closed_form_p_d(d: usize, p0: f64, gamma: f64) -> Result<f64> {
    check_args(d, p0, gamma)?;
    Ok(1.0 - p0 * (1.0 - gamma) / gamma - (gamma - p0) * delta_d(d, gamma)?)
}

/// Pair-level prediction for the lower level:
/// `(1 - e^{-βE}) p_i + p_j + [(1-γ) p_i - γ p_j] δ_d(γ)` with `e^{-βE} = (1-γ)/γ`.
pub fn pair_closed_form(d: usize, gamma: f64, p_i: f64, p_j: f64) -> Result<f64> {
    let q = (1.0 - gamma) / gamma;
    Ok((1.0 - q) * p_i + p_j + ((1.0 - gamma) * p_i - gamma * p_j) * delta_d(d, gamma)?)
}

/// Outcome of checking the pair prediction against the simulation.
#[derive(Clone, Debug, PartialEq)]
pub struct PairReport {
    pub d: usize,
    pub gamma: f64,
    pub p_i: f64,
    pub p_j: f64,
    pub simulated: f64,
    pub predicted: f64,
    pub deviation: f64,
    pub within_tolerance: bool,
    /// Exact β-swap output for the lower level.
    pub beta_swap_target: f64,
    pub beta_swap_gap: f64,
    /// `|(1-γ) p_i - γ p_j|` times the explicit tail bound on `δ_d`.
    pub gap_bound: f64,
    pub within_bound: bool,
}

/// Runs the protocol on levels `(0, 1)` of the three-level state
/// `[p_i, p_j, 1 - p_i - p_j]` and compares with [`pair_closed_form`].
pub fn verify_pair(d: usize, gamma: f64, p_i: f64, p_j: f64) -> Result<PairReport> {
    if p_i < 0.0 || p_j < 0.0 || p_i + p_j > 1.0 + 1e-12 {
        return Err(Error::param("p_i + p_j", p_i + p_j, "must be a sub-distribution"));
    }
    check_args(d, p_i, gamma)?;
    let rest = (1.0 - p_i - p_j).max(0.0);
    let p = PopulationVector::new(vec![p_i, p_j, rest])?;
    let simulated = simulate_on_pair(&p, 0, 1, gamma, d)?.get(0);
    let predicted = pair_closed_form(d, gamma, p_i, p_j)?;
    let deviation = (simulated - predicted).abs();
    let q = (1.0 - gamma) / gamma;
    let beta_swap_target = (1.0 - q) * p_i + p_j;
    let beta_swap_gap = (simulated - beta_swap_target).abs();
    let gap_bound = ((1.0 - gamma) * p_i - gamma * p_j).abs() * delta_bound(d, gamma);
    Ok(PairReport {
        d,
        gamma,
        p_i,
        p_j,
        simulated,
        predicted,
        deviation,
        within_tolerance: deviation <= PAIR_CHECK_TOL,
        beta_swap_target,
        beta_swap_gap,
        gap_bound,
        within_bound: beta_swap_gap <= gap_bound + PAIR_CHECK_TOL,
    })
}

/// `a_j^{(k)}` for `k = 0..=d`, `j = 0..=d` in exact arithmetic, indexed
/// `[k][j]`. Row `k = 0` and column `j = 0` hold the boundary values
/// `a_j^{(0)} = γ/(1-γ) · (1-p0)/d` and `a_0^{(k)} = p0/d`.
pub fn exact_grid(d: usize, p0: &BigRational, gamma: &BigRational) -> Vec<Vec<BigRational>> {
    let one = BigRational::one();
    let dd = BigRational::from_integer(BigInt::from(d));
    let mut a = vec![vec![BigRational::zero(); d + 1]; d + 1];
    let mut b: Vec<BigRational> = vec![(&one - p0) / &dd; d + 1];
    for (j, cell) in a[0].iter_mut().enumerate().skip(1) {
        *cell = gamma / (&one - gamma) * &b[j];
    }
    for k in 1..=d {
        a[k][0] = p0 / &dd;
        for j in 1..=d {
            // One full thermalization of |gk⟩ with |ej⟩.
            let total = &a[k][j - 1] + &b[j];
            a[k][j] = gamma * &total;
            b[j] = (&one - gamma) * total;
        }
    }
    a
}

/// `s_j^{(k)} = (1-γ)^{-k} [(1-p0) γ^{1-j} - (γ-p0) Σ_{k'<k} f_j^{(k')} (1-γ)^{k'}]`.
pub fn s_coefficient(j: usize, k: usize, p0: &BigRational, gamma: &BigRational) -> Result<BigRational> {
    let one = BigRational::one();
    let c = &one - gamma;
    let mut sum = BigRational::zero();
    let mut pow = BigRational::one();
    for kp in 0..k {
        sum += BigRational::from_integer(f_coeff(j as u64, kp as u64)?) * &pow;
        pow *= &c;
    }
    let lead = (&one - p0) * num_traits::pow(gamma.recip(), j) * gamma;
    Ok((lead - (gamma - p0) * sum) * num_traits::pow(c.recip(), k))
}
