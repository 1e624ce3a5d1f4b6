//! Binomial sums behind the memory-assisted protocols.
//!
//! `f_j^{(k)} = C(j-1+k, k)` and, for `n ≥ 1`, `m ≥ 0`, `x ∈ [0, 1]`:
//!
//! ```text
//! L_n^{(m)}(x) = (1-x)^n Σ_{j≤m} f_n^{(j)} x^j
//! K_n^{(m)}(x) = (1-x)^n / n · Σ_{j≤m} j f_n^{(j)} x^j
//! I_n^{(m)}(x) = (1-x)^n / n · Σ_{j≤m} (n-j) f_n^{(j)} x^j
//! δ_d(γ)       = Σ_{n≥d} Cat(n) [γ(1-γ)]^n
//! I_d(x, y)    = (1-x)^d (1-y)^d / d · Σ_{j+k≤d-1} (d-j-k) f_d^{(k)} x^k f_d^{(j)} y^j
//! ```
//!
//! Float evaluations avoid explicit large binomials: consecutive terms are
//! related by `f_n^{(j+1)} / f_n^{(j)} = (n+j)/(j+1)`. Where an expression
//! cancels badly in floating point (the alternating form of `L`, and `δ_d`
//! written as a total minus a partial sum) it is evaluated exactly in
//! rationals from the exact binary value of the input and rounded once.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::{Error, Result};

/// Largest `d` accepted by the float evaluation of `I_d`.
pub const MAX_FLOAT_D: usize = 1000;
const QUADRATURE_TOL: f64 = 1e-12;
const QUADRATURE_MAX_DEPTH: u32 = 60;

/// Which of the equivalent expressions of `L_n^{(m)}` to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LRoute {
    /// `(1-x)^n Σ_{j≤m} f_n^{(j)} x^j`.
    Definition,
    /// `1 - n C(n+m, m) x^{m+1} Σ_{l<n} C(n-1, l) (-x)^l / (m+l+1)`.
    Alternating,
    /// `1 - ∫_0^x n C(n+m, m) t^m (1-t)^{n-1} dt` by adaptive Simpson.
    Quadrature,
}

/// Exact binomial coefficient `C(n, k)` (zero for `k > n`).
pub fn binomial(n: u64, k: u64) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for i in 0..k {
        // Each partial product is itself a binomial, so the division is exact.
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

/// `f_j^{(k)} = C(j-1+k, k)` for `j ≥ 1`.
pub fn f_coeff(j: u64, k: u64) -> Result<BigInt> {
    if j < 1 {
        return Err(Error::param("j", j as f64, "must be at least 1"));
    }
    Ok(binomial(j - 1 + k, k))
}

/// `f_j^{(k)}` for `1 ≤ j ≤ j_max`, `0 ≤ k ≤ k_max` built from the recurrence
/// `f_j^{(0)} = 1`, `f_j^{(k+1)} = Σ_{j'≤j} f_{j'}^{(k)}`. Indexed `[k][j-1]`.
pub fn f_table(j_max: usize, k_max: usize) -> Vec<Vec<BigInt>> {
    let mut rows = vec![vec![BigInt::one(); j_max]];
    for _ in 0..k_max {
        let prev = rows.last().expect("table starts non-empty");
        let mut acc = BigInt::zero();
        let next = prev
            .iter()
            .map(|v| {
                acc += v;
                acc.clone()
            })
            .collect();
        rows.push(next);
    }
    rows
}

/// `C(2n, n) / (n + 1)`.
pub fn catalan(n: u64) -> BigInt {
    binomial(2 * n, n) / BigInt::from(n + 1)
}

fn check_nx(n: usize, x: f64) -> Result<()> {
    if n < 1 {
        return Err(Error::param("n", n as f64, "must be at least 1"));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::param("x", x, "must lie in [0, 1]"));
    }
    Ok(())
}

fn check_nx_exact(n: usize, x: &BigRational) -> Result<()> {
    if n < 1 {
        return Err(Error::param("n", n as f64, "must be at least 1"));
    }
    if x.is_negative() || x > &BigRational::one() {
        return Err(Error::param(
            "x",
            x.to_f64().unwrap_or(f64::NAN),
            "must lie in [0, 1]",
        ));
    }
    Ok(())
}

/// Exact rational value of a finite float.
pub fn exact(x: f64) -> Result<BigRational> {
    BigRational::from_float(x).ok_or(Error::NonFinite("rational conversion"))
}

fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// `(1-x)^n f_n^{(j)} x^j` for `j = 0..=m`, via the term ratio in log space so
/// that neither the binomials nor `(1-x)^n` can overflow or underflow early.
fn weighted_f_terms(n: usize, m: usize, x: f64) -> Vec<f64> {
    let ln_x = x.ln();
    let mut ln_t = n as f64 * (-x).ln_1p();
    let mut out = Vec::with_capacity(m + 1);
    for j in 0..=m {
        out.push(ln_t.exp());
        ln_t += ln_x + ((n + j) as f64 / (j + 1) as f64).ln();
    }
    if x == 0.0 {
        out.iter_mut().skip(1).for_each(|t| *t = 0.0);
    }
    out
}

/// `L_n^{(m)}(x)` in floating point.
pub fn l_eval(n: usize, m: usize, x: f64, route: LRoute) -> Result<f64> {
    check_nx(n, x)?;
    Ok(match route {
        LRoute::Definition => weighted_f_terms(n, m, x).iter().sum(),
        LRoute::Alternating => to_f64(&l_alternating_exact(n, m, &exact(x)?)),
        LRoute::Quadrature => {
            let log_c = ln_binomial(n + m, m) + (n as f64).ln();
            let density = |t: f64| {
                if t <= 0.0 || t >= 1.0 {
                    // Endpoint values of t^m (1-t)^{n-1}, including 0^0 = 1.
                    let at_zero = t <= 0.0 && m == 0;
                    let at_one = t >= 1.0 && n == 1;
                    return if at_zero || at_one { log_c.exp() } else { 0.0 };
                }
                (log_c + m as f64 * t.ln() + (n - 1) as f64 * (-t).ln_1p()).exp()
            };
            1.0 - adaptive_simpson(&density, 0.0, x, QUADRATURE_TOL)
        }
    })
}

/// `L_n^{(m)}(x)` in exact arithmetic. The quadrature route has no exact form.
pub fn l_eval_exact(n: usize, m: usize, x: &BigRational, route: LRoute) -> Result<BigRational> {
    check_nx_exact(n, x)?;
    match route {
        LRoute::Definition => Ok(definition_exact(n, m, x, |_| BigInt::one())),
        LRoute::Alternating => Ok(l_alternating_exact(n, m, x)),
        LRoute::Quadrature => Err(Error::param(
            "route",
            f64::NAN,
            "quadrature is only available in floating point",
        )),
    }
}

fn l_alternating_exact(n: usize, m: usize, x: &BigRational) -> BigRational {
    let mut sum = BigRational::zero();
    let mut pow = BigRational::one();
    let neg_x = -x.clone();
    for l in 0..n {
        let c = BigRational::from_integer(binomial((n - 1) as u64, l as u64));
        sum += c * &pow / BigRational::from_integer(BigInt::from(m + l + 1));
        pow *= &neg_x;
    }
    let scale = BigRational::from_integer(binomial((n + m) as u64, m as u64) * BigInt::from(n));
    BigRational::one() - scale * num_traits::pow(x.clone(), m + 1) * sum
}

/// `(1-x)^n Σ_{j≤m} w(j) f_n^{(j)} x^j`.
fn definition_exact(
    n: usize,
    m: usize,
    x: &BigRational,
    weight: impl Fn(usize) -> BigInt,
) -> BigRational {
    let mut sum = BigRational::zero();
    let mut pow = BigRational::one();
    for j in 0..=m {
        let f = binomial((n - 1 + j) as u64, j as u64);
        sum += BigRational::from_integer(f * weight(j)) * &pow;
        pow *= x;
    }
    num_traits::pow(BigRational::one() - x, n) * sum
}

/// `-n C(n+m, m) x^m (1-x)^{n-1}`.
pub fn l_derivative(n: usize, m: usize, x: f64) -> Result<f64> {
    check_nx(n, x)?;
    let log_c = ln_binomial(n + m, m) + (n as f64).ln();
    let xm = if m == 0 { 1.0 } else { x.powi(m as i32) };
    let ym = if n == 1 { 1.0 } else { (1.0 - x).powi(n as i32 - 1) };
    Ok(-log_c.exp() * xm * ym)
}

/// `K_n^{(m)}(x)` from its defining sum.
pub fn k_eval(n: usize, m: usize, x: f64) -> Result<f64> {
    check_nx(n, x)?;
    let terms = weighted_f_terms(n, m, x);
    Ok(terms.iter().enumerate().map(|(j, t)| j as f64 * t).sum::<f64>() / n as f64)
}

/// `I_n^{(m)}(x)` from its defining sum.
pub fn i_nm_eval(n: usize, m: usize, x: f64) -> Result<f64> {
    check_nx(n, x)?;
    let terms = weighted_f_terms(n, m, x);
    Ok(terms
        .iter()
        .enumerate()
        .map(|(j, t)| (n as f64 - j as f64) * t)
        .sum::<f64>()
        / n as f64)
}

pub fn k_eval_exact(n: usize, m: usize, x: &BigRational) -> Result<BigRational> {
    check_nx_exact(n, x)?;
    Ok(definition_exact(n, m, x, |j| BigInt::from(j)) / BigRational::from_integer(BigInt::from(n)))
}

pub fn i_nm_eval_exact(n: usize, m: usize, x: &BigRational) -> Result<BigRational> {
    check_nx_exact(n, x)?;
    Ok(
        definition_exact(n, m, x, |j| BigInt::from(n as i64 - j as i64))
            / BigRational::from_integer(BigInt::from(n)),
    )
}

/// `δ_d(γ) = (1-γ)/γ - Σ_{n=1}^{d-1} Cat(n) [γ(1-γ)]^n`, exactly.
pub fn delta_d_exact(d: usize, gamma: &BigRational) -> Result<BigRational> {
    if d < 1 {
        return Err(Error::param("d", d as f64, "must be at least 1"));
    }
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    if gamma <= &half || gamma >= &BigRational::one() {
        return Err(Error::param(
            "gamma",
            to_f64(gamma),
            "must lie in (1/2, 1)",
        ));
    }
    let one_minus = BigRational::one() - gamma;
    let t = gamma * &one_minus;
    let mut acc = &one_minus / gamma;
    let mut pow = BigRational::one();
    for n in 1..d {
        pow *= &t;
        acc -= BigRational::from_integer(catalan(n as u64)) * &pow;
    }
    Ok(acc)
}

/// Float `δ_d(γ)`: exact evaluation at the binary value of `gamma`, rounded
/// once. Requires `gamma > 1/2 + 1e-9`.
pub fn delta_d(d: usize, gamma: f64) -> Result<f64> {
    if !(gamma > 0.5 + 1e-9 && gamma < 1.0) {
        return Err(Error::param("gamma", gamma, "must lie in (1/2 + 1e-9, 1)"));
    }
    Ok(to_f64(&delta_d_exact(d, &exact(gamma)?)?))
}

/// Upper bound `(4x(1-x))^n / (√π n^{3/2} (2x-1)^2)` on `δ_n`, with `x = 1-γ`.
pub fn delta_bound(n: usize, gamma: f64) -> f64 {
    let x = 1.0 - gamma;
    let nf = n as f64;
    (4.0 * x * (1.0 - x)).powf(nf) / (std::f64::consts::PI.sqrt() * nf.powf(1.5) * (2.0 * x - 1.0).powi(2))
}

/// `(1-2x)/(1-x) + x δ_n(1-x)`, the value of `I_n^{(n-1)}(x)` for `x < 1/2`.
pub fn i_top_closed(n: usize, x: f64) -> Result<f64> {
    Ok((1.0 - 2.0 * x) / (1.0 - x) + x * delta_d(n, 1.0 - x)?)
}

fn check_id_args(d: usize, x: f64, y: f64) -> Result<()> {
    if d < 1 {
        return Err(Error::param("d", d as f64, "must be at least 1"));
    }
    for (name, v) in [("x", x), ("y", y)] {
        if !(0.0..1.0).contains(&v) {
            return Err(Error::param(name, v, "must lie in [0, 1)"));
        }
    }
    Ok(())
}

/// `I_d(x, y)` in floating point for `d ≤ 1000`.
pub fn i_d_eval(d: usize, x: f64, y: f64) -> Result<f64> {
    check_id_args(d, x, y)?;
    if d > MAX_FLOAT_D {
        return Err(Error::TooLarge {
            what: "d",
            value: d,
            max: MAX_FLOAT_D,
            hint: "use i_d_exact for larger memories",
        });
    }
    let u = weighted_f_terms(d, d - 1, x);
    let v = weighted_f_terms(d, d - 1, y);
    let mut total = 0.0;
    for (j, vj) in v.iter().enumerate() {
        let inner: f64 = u[..d - j]
            .iter()
            .enumerate()
            .map(|(k, uk)| (d - j - k) as f64 * uk)
            .sum();
        total += vj * inner;
    }
    Ok(total / d as f64)
}

/// `I_d(x, y)` in exact arithmetic.
pub fn i_d_exact(d: usize, x: &BigRational, y: &BigRational) -> Result<BigRational> {
    if d < 1 {
        return Err(Error::param("d", d as f64, "must be at least 1"));
    }
    let fx: Vec<BigRational> = powers_times_f(d, x);
    let fy: Vec<BigRational> = powers_times_f(d, y);
    let mut total = BigRational::zero();
    for (j, vj) in fy.iter().enumerate() {
        let mut inner = BigRational::zero();
        for (k, uk) in fx[..d - j].iter().enumerate() {
            inner += uk * BigRational::from_integer(BigInt::from(d - j - k));
        }
        total += vj * inner;
    }
    let one = BigRational::one();
    let scale = num_traits::pow(&one - x, d) * num_traits::pow(&one - y, d)
        / BigRational::from_integer(BigInt::from(d));
    Ok(total * scale)
}

fn powers_times_f(d: usize, x: &BigRational) -> Vec<BigRational> {
    let mut pow = BigRational::one();
    (0..d)
        .map(|k| {
            let term = BigRational::from_integer(binomial((d - 1 + k) as u64, k as u64)) * &pow;
            pow *= x;
            term
        })
        .collect()
}

/// `lim_{d→∞} I_d(x, y) = max(0, 1 - x/(1-x) - y/(1-y))`.
pub fn i_d_limit(x: f64, y: f64) -> Result<f64> {
    check_id_args(1, x, y)?;
    Ok((1.0 - x / (1.0 - x) - y / (1.0 - y)).max(0.0))
}

/// `ln C(n, k)` as a sum of logs.
fn ln_binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k)
        .map(|i| ((n - i) as f64 / (i + 1) as f64).ln())
        .sum()
}

fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let (fa, fb) = (f(a), f(b));
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, QUADRATURE_MAX_DEPTH)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let diff = left + right - whole;
    if depth == 0 || diff.abs() <= 15.0 * tol {
        return left + right + diff / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}
