//! Thermo-majorization and the reachable set of (non-Markovian) thermal
//! processes.
//!
//! Lorenz curves use normalized Gibbs weights on the x-axis, so every curve
//! runs from `(0, 0)` to `(1, 1)`.

use itertools::Itertools;

use crate::thermal::{gibbs_state, Hamiltonian, PopulationVector};
use crate::{Error, Result};

/// Tolerance used when comparing Lorenz curves.
pub const CURVE_TOL: f64 = 1e-12;
/// Ratios closer than this (relative) are treated as tied in [`beta_order`].
const RATIO_TIE_REL: f64 = 1e-12;
/// Largest dimension accepted by [`tp_reach_vertices`].
pub const MAX_VERTEX_DIM: usize = 6;
const BISECTION_STEPS: usize = 64;

fn check_pair(p: &PopulationVector, gibbs: &PopulationVector) -> Result<()> {
    if p.dim() != gibbs.dim() {
        return Err(Error::DimensionMismatch {
            expected: gibbs.dim(),
            found: p.dim(),
        });
    }
    if let Some(k) = gibbs.probs().iter().position(|&g| g <= 0.0) {
        return Err(Error::param(
            "gibbs",
            gibbs.get(k),
            "Gibbs weights must be strictly positive",
        ));
    }
    Ok(())
}

/// Indices sorted by `p_k / τ_k`, largest first. Ratios equal up to a relative
/// `1e-12` are tied and kept in ascending index order.
pub fn beta_order(p: &PopulationVector, gibbs: &PopulationVector) -> Result<Vec<usize>> {
    check_pair(p, gibbs)?;
    let ratios: Vec<f64> = p
        .probs()
        .iter()
        .zip(gibbs.probs())
        .map(|(a, t)| a / t)
        .collect();
    let mut order: Vec<usize> = (0..p.dim()).collect();
    order.sort_by(|&a, &b| ratios[b].total_cmp(&ratios[a]).then(a.cmp(&b)));

    let mut start = 0;
    while start < order.len() {
        let lead = ratios[order[start]];
        let mut end = start + 1;
        while end < order.len() && lead - ratios[order[end]] <= RATIO_TIE_REL * lead.abs() {
            end += 1;
        }
        order[start..end].sort_unstable();
        start = end;
    }
    Ok(order)
}

/// Piecewise-linear concave curve of cumulative population against cumulative
/// Gibbs weight along the β-order.
#[derive(Clone, Debug, PartialEq)]
pub struct LorenzCurve {
    breakpoints: Vec<(f64, f64)>,
}

impl LorenzCurve {
    pub fn breakpoints(&self) -> &[(f64, f64)] {
        &self.breakpoints
    }

    /// Value of the curve at `x`, clamped to the end points outside `[0, 1]`.
    pub fn eval(&self, x: f64) -> f64 {
        let pts = &self.breakpoints;
        if x <= pts[0].0 {
            return pts[0].1;
        }
        for w in pts.windows(2) {
            let ((x0, y0), (x1, y1)) = (w[0], w[1]);
            if x <= x1 {
                return y0 + (y1 - y0) * (x - x0) / (x1 - x0);
            }
        }
        pts[pts.len() - 1].1
    }
}

pub fn lorenz_curve(p: &PopulationVector, gibbs: &PopulationVector) -> Result<LorenzCurve> {
    let order = beta_order(p, gibbs)?;
    let mut breakpoints = Vec::with_capacity(order.len() + 1);
    breakpoints.push((0.0, 0.0));
    let (mut x, mut y) = (0.0, 0.0);
    for k in order {
        x += gibbs.get(k);
        y += p.get(k);
        breakpoints.push((x, y));
    }
    Ok(LorenzCurve { breakpoints })
}

/// `p ≻_T q`: the curve of `p` lies on or above that of `q` everywhere.
/// Both curves are piecewise linear, so checking the union of their
/// breakpoints is sufficient.
pub fn thermo_majorizes(
    p: &PopulationVector,
    q: &PopulationVector,
    gibbs: &PopulationVector,
) -> Result<bool> {
    let lp = lorenz_curve(p, gibbs)?;
    let lq = lorenz_curve(q, gibbs)?;
    let xs = lp.breakpoints().iter().chain(lq.breakpoints()).map(|b| b.0);
    Ok(xs.into_iter().all(|x| lp.eval(x) >= lq.eval(x) - CURVE_TOL))
}

/// Whether a qubit with ground population `p` can reach ground population
/// `p_target` by a thermal process, for Gibbs ground weight `gamma`.
pub fn qubit_tp_reachable(p: f64, p_target: f64, gamma: f64) -> Result<bool> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::param("gamma", gamma, "must lie in (0, 1)"));
    }
    for (name, v) in [("p", p), ("p_target", p_target)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::param(name, v, "must lie in [0, 1]"));
        }
    }
    let p_beta = 1.0 - p * (1.0 - gamma) / gamma;
    Ok(if p <= gamma {
        p <= p_target && p_target <= p_beta
    } else {
        p_beta <= p_target && p_target <= p
    })
}

/// Extreme points of the set of states thermo-majorized by `p`: one per
/// ordering of the levels, obtained by reading `p`'s curve at the cumulative
/// Gibbs weights of that ordering. Duplicates (max-norm `1e-12`) are dropped.
pub fn tp_reach_vertices(
    p: &PopulationVector,
    gibbs: &PopulationVector,
) -> Result<Vec<PopulationVector>> {
    let n = p.dim();
    if n > MAX_VERTEX_DIM {
        return Err(Error::TooLarge {
            what: "dimension",
            value: n,
            max: MAX_VERTEX_DIM,
            hint: "vertex enumeration visits every permutation",
        });
    }
    let curve = lorenz_curve(p, gibbs)?;
    let mut vertices: Vec<PopulationVector> = Vec::new();
    for perm in (0..n).permutations(n) {
        let mut probs = vec![0.0; n];
        let (mut x, mut prev) = (0.0, 0.0);
        for &k in &perm {
            x += gibbs.get(k);
            let y = curve.eval(x);
            probs[k] = y - prev;
            prev = y;
        }
        let v = PopulationVector::new(probs)?;
        if vertices.iter().all(|u| u.max_abs_diff(&v) > 1e-12) {
            vertices.push(v);
        }
    }
    Ok(vertices)
}

/// Basis `{g0, g1, e0, e1}` of a qubit with gap `e` and a work bit with gap `w`.
pub fn extraction_hamiltonian(e: f64, w: f64) -> Result<Hamiltonian> {
    Ok(Hamiltonian::qubit(e)?.composite(&Hamiltonian::qubit(w)?))
}

/// Whether the excited qubit with the work bit in `|0⟩` thermo-majorizes the
/// Gibbs qubit with the work bit at `[eps, 1 - eps]`.
pub fn extraction_feasible(e: f64, w: f64, beta: f64, eps: f64) -> Result<bool> {
    let h = extraction_hamiltonian(e, w)?;
    let gibbs = gibbs_state(&h, beta)?;
    let gamma = 1.0 / (1.0 + (-beta * e).exp());
    let start = PopulationVector::basis(4, 2)?;
    let target = PopulationVector::qubit(gamma)?.tensor(&PopulationVector::qubit(eps)?);
    thermo_majorizes(&start, &target, &gibbs)
}

/// Smallest work-extraction error reachable by thermal processes, by bisection
/// on `[0, γ_W]`; `γ_W` (the work bit thermalized) is always feasible.
pub fn min_extraction_error_tp(e: f64, w: f64, beta: f64) -> Result<f64> {
    for (name, v) in [("E", e), ("W", w), ("beta", beta)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::param(name, v, "must be finite and positive"));
        }
    }
    if extraction_feasible(e, w, beta, 0.0)? {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (0.0, 1.0 / (1.0 + (-beta * w).exp()));
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if extraction_feasible(e, w, beta, mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
