//! States, Hamiltonians and the elementary transition matrices.
//!
//! Composite bases always list the first factor slowest: for a system of
//! dimension `n` and a memory of dimension `d`, basis state `(s, m)` has index
//! `s * d + m`.
//!
//! Two-level operations take their parameters from the caller (`q = e^{-βΔ}`
//! or the equilibrium weight of the first level of the pair) instead of
//! recomputing them from a Hamiltonian, so degenerate and inverted pairs are
//! oriented explicitly. [`ThermalContext`] does that orientation for a given
//! Hamiltonian.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Entries in `[-NEG_HARD_TOL, 0)` are rounding noise and get clamped to zero.
pub const NEG_HARD_TOL: f64 = 1e-9;
/// Normalization tolerance for population vectors and matrix columns.
pub const NORM_TOL: f64 = 1e-12;
/// Slack allowed on matrix entries outside `[0, 1]`.
pub const ENTRY_TOL: f64 = 1e-14;

/// Energy levels of a finite-dimensional system, in an arbitrary but
/// consistent unit.
#[derive(Clone, Debug, PartialEq)]
pub struct Hamiltonian {
    levels: Vec<f64>,
    label: Option<String>,
}

impl Hamiltonian {
    pub fn new(levels: Vec<f64>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::Empty("Hamiltonian levels"));
        }
        if levels.iter().any(|e| !e.is_finite()) {
            return Err(Error::NonFinite("Hamiltonian levels"));
        }
        Ok(Self {
            levels,
            label: None,
        })
    }

    /// Qubit `{|g⟩, |e⟩}` with energies `{0, gap}`.
    pub fn qubit(gap: f64) -> Result<Self> {
        Self::new(vec![0.0, gap])
    }

    /// `d` degenerate levels at zero energy (a memory register).
    pub fn trivial(d: usize) -> Result<Self> {
        Self::new(vec![0.0; d])
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn dim(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, k: usize) -> Result<f64> {
        self.levels
            .get(k)
            .copied()
            .ok_or(Error::IndexOutOfRange {
                index: k,
                dim: self.dim(),
            })
    }

    /// `E_j - E_i`.
    pub fn gap(&self, i: usize, j: usize) -> Result<f64> {
        Ok(self.level(j)? - self.level(i)?)
    }

    /// Non-interacting composite `H_self ⊗ 1 + 1 ⊗ H_other`, with `self` as the
    /// slow index.
    pub fn composite(&self, other: &Hamiltonian) -> Hamiltonian {
        let levels = self
            .levels
            .iter()
            .flat_map(|a| other.levels.iter().map(move |b| a + b))
            .collect();
        Hamiltonian {
            levels,
            label: None,
        }
    }
}

/// Probability distribution over energy eigenstates.
#[derive(Clone, Debug, PartialEq)]
pub struct PopulationVector {
    probs: Vec<f64>,
}

impl PopulationVector {
    /// Validates and wraps `probs`. Entries in `[-1e-9, 0)` are clamped to zero;
    /// anything more negative is an error. The sum must be within `1e-12` of 1.
    pub fn new(mut probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Empty("population vector"));
        }
        for (index, p) in probs.iter_mut().enumerate() {
            if !p.is_finite() {
                return Err(Error::NonFinite("population vector"));
            }
            if *p < 0.0 {
                if *p < -NEG_HARD_TOL {
                    return Err(Error::NegativeEntry { index, value: *p });
                }
                *p = 0.0;
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized { sum });
        }
        Ok(Self { probs })
    }

    pub fn basis(dim: usize, k: usize) -> Result<Self> {
        if k >= dim {
            return Err(Error::IndexOutOfRange { index: k, dim });
        }
        let mut probs = vec![0.0; dim];
        probs[k] = 1.0;
        Ok(Self { probs })
    }

    pub fn uniform(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Empty("population vector"));
        }
        Ok(Self {
            probs: vec![1.0 / dim as f64; dim],
        })
    }

    /// `[p, 1 - p]`.
    pub fn qubit(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::param("p", p, "must lie in [0, 1]"));
        }
        Ok(Self {
            probs: vec![p, 1.0 - p],
        })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.probs
    }

    pub fn dim(&self) -> usize {
        self.probs.len()
    }

    pub fn get(&self, k: usize) -> f64 {
        self.probs[k]
    }

    pub fn sum(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn max_abs_diff(&self, other: &PopulationVector) -> f64 {
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Product distribution with `self` as the slow index.
    pub fn tensor(&self, other: &PopulationVector) -> PopulationVector {
        let probs = self
            .probs
            .iter()
            .flat_map(|a| other.probs.iter().map(move |b| a * b))
            .collect();
        PopulationVector { probs }
    }

    /// Marginal of the slow factor of a `sys_dim × mem_dim` composite. Each
    /// entry is summed over the memory index in ascending order.
    pub fn system_marginal(&self, sys_dim: usize, mem_dim: usize) -> Result<PopulationVector> {
        check_composite(self.dim(), sys_dim, mem_dim)?;
        let probs = self
            .probs
            .chunks(mem_dim)
            .map(|block| block.iter().sum())
            .collect();
        Ok(PopulationVector { probs })
    }

    /// Marginal of the fast factor of a `sys_dim × mem_dim` composite.
    pub fn memory_marginal(&self, sys_dim: usize, mem_dim: usize) -> Result<PopulationVector> {
        check_composite(self.dim(), sys_dim, mem_dim)?;
        let probs = (0..mem_dim)
            .map(|m| (0..sys_dim).map(|s| self.probs[s * mem_dim + m]).sum())
            .collect();
        Ok(PopulationVector { probs })
    }

    /// Exchanges the populations of levels `i` and `j` (a permutation unitary
    /// on diagonal states).
    pub fn swapped(&self, i: usize, j: usize) -> Result<PopulationVector> {
        let dim = self.dim();
        for k in [i, j] {
            if k >= dim {
                return Err(Error::IndexOutOfRange { index: k, dim });
            }
        }
        let mut probs = self.probs.clone();
        probs.swap(i, j);
        Ok(PopulationVector { probs })
    }
}

fn check_composite(dim: usize, sys_dim: usize, mem_dim: usize) -> Result<()> {
    if sys_dim == 0 || mem_dim == 0 {
        return Err(Error::Empty("composite factor"));
    }
    if dim != sys_dim * mem_dim {
        return Err(Error::DimensionMismatch {
            expected: sys_dim * mem_dim,
            found: dim,
        });
    }
    Ok(())
}

/// Column-stochastic matrix of conditional probabilities `G[k'][k] = p(k'|k)`:
/// columns index the input state, rows the output state.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionMatrix {
    entries: DMatrix<f64>,
}

impl TransitionMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() == 0 {
            return Err(Error::Empty("transition matrix"));
        }
        if entries.nrows() != entries.ncols() {
            return Err(Error::DimensionMismatch {
                expected: entries.nrows(),
                found: entries.ncols(),
            });
        }
        for (column, col) in entries.column_iter().enumerate() {
            for (row, &value) in col.iter().enumerate() {
                if !value.is_finite() {
                    return Err(Error::NonFinite("transition matrix"));
                }
                if !(-ENTRY_TOL..=1.0 + ENTRY_TOL).contains(&value) {
                    return Err(Error::EntryOutOfRange { row, column, value });
                }
            }
            let sum = col.sum();
            if (sum - 1.0).abs() > NORM_TOL {
                return Err(Error::NotStochastic { column, sum });
            }
        }
        Ok(Self { entries })
    }

    /// Builds from row-major nested rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: rows.iter().map(Vec::len).find(|&l| l != n).unwrap_or(n),
            });
        }
        Self::new(DMatrix::from_fn(n, n, |r, c| rows[r][c]))
    }

    pub fn identity(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Empty("transition matrix"));
        }
        Ok(Self {
            entries: DMatrix::identity(dim, dim),
        })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// `p(row | column)`.
    pub fn get(&self, row: usize, column: usize) -> f64 {
        self.entries[(row, column)]
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// `p' = G p`.
    pub fn apply(&self, p: &PopulationVector) -> Result<PopulationVector> {
        if p.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: p.dim(),
            });
        }
        let out = &self.entries * DVector::from_column_slice(p.probs());
        PopulationVector::new(out.iter().copied().collect())
    }

    /// Product of `ms` in written order: the last matrix acts first.
    pub fn compose(ms: &[TransitionMatrix]) -> Result<TransitionMatrix> {
        let (first, rest) = ms.split_first().ok_or(Error::Empty("composition"))?;
        let mut acc = first.entries.clone();
        for m in rest {
            if m.dim() != acc.nrows() {
                return Err(Error::DimensionMismatch {
                    expected: acc.nrows(),
                    found: m.dim(),
                });
            }
            acc *= &m.entries;
        }
        TransitionMatrix::new(acc)
    }

    /// True iff the matrix is column-stochastic and fixes `gibbs`, both within
    /// `tol` in the max norm.
    pub fn is_gibbs_stochastic(&self, gibbs: &PopulationVector, tol: f64) -> bool {
        if gibbs.dim() != self.dim() {
            return false;
        }
        let columns_ok = self
            .entries
            .column_iter()
            .all(|c| (c.sum() - 1.0).abs() <= tol && c.iter().all(|&v| v >= -tol));
        let image = &self.entries * DVector::from_column_slice(gibbs.probs());
        let fixed = image
            .iter()
            .zip(gibbs.probs())
            .all(|(a, b)| (a - b).abs() <= tol);
        columns_ok && fixed
    }

    /// `G[j][i] = e^{-β(E_j - E_i)} G[i][j]` for every pair.
    pub fn satisfies_detailed_balance(&self, h: &Hamiltonian, beta: f64, tol: f64) -> bool {
        let n = self.dim();
        if h.dim() != n {
            return false;
        }
        let e = h.levels();
        (0..n).all(|i| {
            (0..n).all(|j| {
                let lhs = self.entries[(j, i)];
                let rhs = (-beta * (e[j] - e[i])).exp() * self.entries[(i, j)];
                (lhs - rhs).abs() <= tol
            })
        })
    }
}

/// A two-level operation: a 2×2 column-stochastic block on levels `(i, j)`,
/// identity elsewhere. Applying it costs O(1), so long protocols are run with
/// these and only converted to dense matrices for cross-checks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairOp {
    i: usize,
    j: usize,
    /// `block[r][c]`, with index 0 standing for level `i` and 1 for level `j`.
    block: [[f64; 2]; 2],
}

impl PairOp {
    fn checked(i: usize, j: usize, block: [[f64; 2]; 2]) -> Result<Self> {
        if i == j {
            return Err(Error::param("j", j as f64, "pair levels must differ"));
        }
        Ok(Self { i, j, block })
    }

    /// `T_λ` on `(i, j)` where `gamma_pair` is the equilibrium weight of level
    /// `i` within the pair. `λ = 1` is a full thermalization.
    pub fn partial_thermalization(i: usize, j: usize, lambda: f64, gamma_pair: f64) -> Result<Self> {
        check_unit("lambda", lambda)?;
        if !(gamma_pair > 0.0 && gamma_pair < 1.0) {
            return Err(Error::param("gamma_pair", gamma_pair, "must lie in (0, 1)"));
        }
        let g = gamma_pair;
        Self::checked(
            i,
            j,
            [
                [1.0 - lambda * (1.0 - g), lambda * g],
                [lambda * (1.0 - g), 1.0 - lambda * g],
            ],
        )
    }

    pub fn full_thermalization(i: usize, j: usize, gamma_pair: f64) -> Result<Self> {
        if !(gamma_pair > 0.0 && gamma_pair < 1.0) {
            return Err(Error::param("gamma_pair", gamma_pair, "must lie in (0, 1)"));
        }
        let g = gamma_pair;
        Self::checked(i, j, [[g, g], [1.0 - g, 1.0 - g]])
    }

    /// β-swap with `i` the lower level and `q = e^{-β(E_j - E_i)}`.
    pub fn beta_swap(i: usize, j: usize, q: f64) -> Result<Self> {
        Self::elementary(i, j, 1.0, q)
    }

    /// `(1 - λ) 1 + λ β^{ij}`.
    pub fn elementary(i: usize, j: usize, lambda: f64, q: f64) -> Result<Self> {
        check_unit("lambda", lambda)?;
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::param(
                "q",
                q,
                "must lie in [0, 1]; orient the pair so that i is the lower level",
            ));
        }
        Self::checked(
            i,
            j,
            [[1.0 - lambda * q, lambda], [lambda * q, 1.0 - lambda]],
        )
    }

    pub fn levels(&self) -> (usize, usize) {
        (self.i, self.j)
    }

    pub fn block(&self) -> [[f64; 2]; 2] {
        self.block
    }

    pub fn apply_in_place(&self, probs: &mut [f64]) {
        let (a, b) = (probs[self.i], probs[self.j]);
        let m = &self.block;
        probs[self.i] = m[0][0] * a + m[0][1] * b;
        probs[self.j] = m[1][0] * a + m[1][1] * b;
    }

    pub fn apply(&self, p: &PopulationVector) -> Result<PopulationVector> {
        self.check_dim(p.dim())?;
        let mut probs = p.probs().to_vec();
        self.apply_in_place(&mut probs);
        PopulationVector::new(probs)
    }

    pub fn to_matrix(&self, dim: usize) -> Result<TransitionMatrix> {
        self.check_dim(dim)?;
        let mut m = DMatrix::identity(dim, dim);
        let idx = [self.i, self.j];
        for (r, &row) in idx.iter().enumerate() {
            for (c, &col) in idx.iter().enumerate() {
                m[(row, col)] = self.block[r][c];
            }
        }
        TransitionMatrix::new(m)
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        for index in [self.i, self.j] {
            if index >= dim {
                return Err(Error::IndexOutOfRange { index, dim });
            }
        }
        Ok(())
    }
}

fn check_unit(name: &'static str, x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::param(name, x, "must lie in [0, 1]"))
    }
}

/// Dense `T_λ` on `(i, j)`; `gamma_pair` is the equilibrium weight of `i`.
pub fn partial_thermalization(
    dim: usize,
    i: usize,
    j: usize,
    lambda: f64,
    gamma_pair: f64,
) -> Result<TransitionMatrix> {
    PairOp::partial_thermalization(i, j, lambda, gamma_pair)?.to_matrix(dim)
}

/// Dense β-swap on `(i, j)` with `i` the lower level.
pub fn beta_swap(dim: usize, i: usize, j: usize, q: f64) -> Result<TransitionMatrix> {
    PairOp::beta_swap(i, j, q)?.to_matrix(dim)
}

/// Dense `(1 - λ) 1 + λ β^{ij}`.
pub fn elementary_tp(dim: usize, i: usize, j: usize, lambda: f64, q: f64) -> Result<TransitionMatrix> {
    PairOp::elementary(i, j, lambda, q)?.to_matrix(dim)
}

/// `e^{-βE_k} / Z`. `beta = 0` gives the uniform distribution.
pub fn gibbs_state(h: &Hamiltonian, beta: f64) -> Result<PopulationVector> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::param("beta", beta, "must be finite and non-negative"));
    }
    // Shift by the ground energy so large gaps underflow instead of overflowing.
    let e0 = h.levels().iter().copied().fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = h.levels().iter().map(|e| (-beta * (e - e0)).exp()).collect();
    let z: f64 = weights.iter().sum();
    PopulationVector::new(weights.into_iter().map(|w| w / z).collect())
}

/// Replaces the memory marginal of a `sys_dim × mem_dim` composite by the
/// uniform distribution, keeping the system marginal.
///
/// The last memory slot of each system level receives the remainder
/// `p_s - Σ_{m<d-1} p_s/d`, which makes the recomputed system marginal (summed
/// in ascending memory order) reproduce the input marginal bit for bit.
pub fn thermalize_memory(
    p: &PopulationVector,
    sys_dim: usize,
    mem_dim: usize,
) -> Result<PopulationVector> {
    let marginal = p.system_marginal(sys_dim, mem_dim)?;
    let mut probs = Vec::with_capacity(p.dim());
    for &ps in marginal.probs() {
        let share = ps / mem_dim as f64;
        let mut acc = 0.0;
        for _ in 0..mem_dim - 1 {
            probs.push(share);
            acc += share;
        }
        probs.push(ps - acc);
    }
    PopulationVector::new(probs)
}

/// Inverse temperatures of the cold reservoir and, optionally, a hot bath.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThermalContext {
    beta: f64,
    beta_hot: Option<f64>,
}

impl ThermalContext {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::param("beta", beta, "must be finite and positive"));
        }
        Ok(Self {
            beta,
            beta_hot: None,
        })
    }

    pub fn with_hot_bath(beta: f64, beta_hot: f64) -> Result<Self> {
        let ctx = Self::new(beta)?;
        if !(beta_hot >= 0.0 && beta_hot < beta) {
            return Err(Error::param(
                "beta_hot",
                beta_hot,
                "must satisfy 0 <= beta_hot < beta",
            ));
        }
        Ok(Self {
            beta_hot: Some(beta_hot),
            ..ctx
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn beta_hot(&self) -> Option<f64> {
        self.beta_hot
    }

    /// `e^{-β gap}`.
    pub fn boltzmann(&self, gap: f64) -> f64 {
        (-self.beta * gap).exp()
    }

    /// Equilibrium weight of the lower level of a pair separated by `gap`.
    pub fn pair_weight(&self, gap: f64) -> f64 {
        1.0 / (1.0 + self.boltzmann(gap))
    }

    pub fn gibbs(&self, h: &Hamiltonian) -> Result<PopulationVector> {
        gibbs_state(h, self.beta)
    }

    /// Full thermalization between levels `i` and `j` of `h`, any orientation.
    pub fn full_thermalization(&self, h: &Hamiltonian, i: usize, j: usize) -> Result<PairOp> {
        PairOp::full_thermalization(i, j, self.pair_weight(h.gap(i, j)?))
    }

    pub fn partial_thermalization(
        &self,
        h: &Hamiltonian,
        i: usize,
        j: usize,
        lambda: f64,
    ) -> Result<PairOp> {
        PairOp::partial_thermalization(i, j, lambda, self.pair_weight(h.gap(i, j)?))
    }

    /// β-swap between `i` and `j`, oriented so that population flows down.
    pub fn beta_swap(&self, h: &Hamiltonian, i: usize, j: usize) -> Result<PairOp> {
        self.elementary(h, i, j, 1.0)
    }

    pub fn elementary(&self, h: &Hamiltonian, i: usize, j: usize, lambda: f64) -> Result<PairOp> {
        let gap = h.gap(i, j)?;
        if gap >= 0.0 {
            PairOp::elementary(i, j, lambda, self.boltzmann(gap))
        } else {
            PairOp::elementary(j, i, lambda, self.boltzmann(-gap))
        }
    }
}

/// One recorded step of a protocol.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceStep {
    pub label: String,
    pub state: PopulationVector,
}

/// Ordered record of the operations applied and the populations after each.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ProtocolTrace {
    steps: Vec<TraceStep>,
}

impl ProtocolTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, label: impl Into<String>, state: PopulationVector) {
        self.steps.push(TraceStep {
            label: label.into(),
            state,
        });
    }

    pub fn steps(&self) -> &[TraceStep] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn last(&self) -> Option<&TraceStep> {
        self.steps.last()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn block(m: &TransitionMatrix, i: usize, j: usize) -> [[f64; 2]; 2] {
        [[m.get(i, i), m.get(i, j)], [m.get(j, i), m.get(j, j)]]
    }

    #[test]
    fn gibbs_examples() {
        let q = Hamiltonian::qubit(3f64.ln()).unwrap();
        let g = gibbs_state(&q, 1.0).unwrap();
        assert_abs_diff_eq!(g.get(0), 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(g.get(1), 0.25, epsilon = 1e-15);

        let h = Hamiltonian::new(vec![0.0, 1.3, -2.0, 7.0]).unwrap();
        let u = gibbs_state(&h, 0.0).unwrap();
        assert!(u.probs().iter().all(|&p| p == 0.25));

        let t = Hamiltonian::new(vec![0.0, 2f64.ln(), 2f64.ln()]).unwrap();
        let g = gibbs_state(&t, 1.0).unwrap();
        for (a, b) in g.probs().iter().zip([0.5, 0.25, 0.25]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn gibbs_rejects_bad_input() {
        assert!(Hamiltonian::new(vec![0.0, f64::NAN]).is_err());
        assert!(Hamiltonian::new(vec![]).is_err());
        let q = Hamiltonian::qubit(1.0).unwrap();
        assert!(gibbs_state(&q, -1.0).is_err());
    }

    #[test]
    fn population_vector_clamps_and_rejects() {
        let p = PopulationVector::new(vec![1.0 + 1e-15, -1e-15]).unwrap();
        assert_eq!(p.get(1), 0.0);
        assert!(matches!(
            PopulationVector::new(vec![1.1, -0.1]),
            Err(Error::NegativeEntry { index: 1, .. })
        ));
        assert!(matches!(
            PopulationVector::new(vec![0.5, 0.4]),
            Err(Error::NotNormalized { .. })
        ));
    }

    #[test]
    fn partial_thermalization_examples() {
        let id = partial_thermalization(3, 0, 2, 0.0, 0.7).unwrap();
        assert_eq!(id, TransitionMatrix::identity(3).unwrap());

        let m = partial_thermalization(2, 0, 1, 0.5, 0.75).unwrap();
        let b = block(&m, 0, 1);
        let expected = [[0.875, 0.375], [0.125, 0.625]];
        for r in 0..2 {
            for c in 0..2 {
                assert_abs_diff_eq!(b[r][c], expected[r][c], epsilon = 1e-15);
            }
        }

        // Full thermalization balances the pair for any input.
        let gap = 0.9;
        let ctx = ThermalContext::new(1.0).unwrap();
        let full = partial_thermalization(2, 0, 1, 1.0, ctx.pair_weight(gap)).unwrap();
        for p in [0.0, 0.2, 0.9, 1.0] {
            let out = full.apply(&PopulationVector::qubit(p).unwrap()).unwrap();
            assert_abs_diff_eq!(out.get(1), out.get(0) * (-gap).exp(), epsilon = 1e-15);
        }
        assert!(partial_thermalization(2, 0, 1, 1.5, 0.7).is_err());
        assert!(partial_thermalization(2, 0, 0, 0.5, 0.7).is_err());
    }

    #[test]
    fn beta_swap_examples() {
        let q = 1.0 / 3.0;
        let m = beta_swap(2, 0, 1, q).unwrap();
        let out = m.apply(&PopulationVector::basis(2, 0).unwrap()).unwrap();
        assert_abs_diff_eq!(out.get(0), 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(out.get(1), 1.0 / 3.0, epsilon = 1e-15);

        let swap = beta_swap(2, 0, 1, 1.0).unwrap();
        assert_eq!(block(&swap, 0, 1), [[0.0, 1.0], [1.0, 0.0]]);

        let gamma = 1.0 / (1.0 + q);
        let g = PopulationVector::qubit(gamma).unwrap();
        assert!(m.apply(&g).unwrap().max_abs_diff(&g) < 1e-15);

        assert!(beta_swap(2, 0, 1, 1.5).is_err());
    }

    #[test]
    fn elementary_tp_examples() {
        assert_eq!(
            elementary_tp(2, 0, 1, 0.0, 0.3).unwrap(),
            TransitionMatrix::identity(2).unwrap()
        );
        assert_eq!(
            elementary_tp(2, 0, 1, 1.0, 0.3).unwrap(),
            beta_swap(2, 0, 1, 0.3).unwrap()
        );
        let m = elementary_tp(2, 0, 1, 0.5, 1.0 / 3.0).unwrap();
        let b = block(&m, 0, 1);
        let expected = [[5.0 / 6.0, 0.5], [1.0 / 6.0, 0.5]];
        for r in 0..2 {
            for c in 0..2 {
                assert_abs_diff_eq!(b[r][c], expected[r][c], epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn compose_examples() {
        let t = partial_thermalization(3, 0, 2, 1.0, 0.8).unwrap();
        assert_eq!(TransitionMatrix::compose(&[t.clone()]).unwrap(), t);
        let tt = TransitionMatrix::compose(&[t.clone(), t.clone()]).unwrap();
        assert!((tt.entries() - t.entries()).amax() < 1e-15);
        assert!(matches!(TransitionMatrix::compose(&[]), Err(Error::Empty(_))));
    }

    #[test]
    fn beta_swap_square_identity_on_grid() {
        for k in 0..=10 {
            let q = k as f64 / 10.0;
            let b = beta_swap(2, 0, 1, q).unwrap();
            let bb = TransitionMatrix::compose(&[b.clone(), b.clone()]).unwrap();
            let expected = b.entries() * (1.0 - q) + DMatrix::identity(2, 2) * q;
            assert!((bb.entries() - expected).amax() <= 1e-14, "q = {q}");
        }
    }

    #[test]
    fn gibbs_stochastic_predicate() {
        let ctx = ThermalContext::new(1.0).unwrap();
        let h = Hamiltonian::qubit(0.8).unwrap();
        let g = ctx.gibbs(&h).unwrap();
        let b = ctx.beta_swap(&h, 0, 1).unwrap().to_matrix(2).unwrap();
        assert!(b.is_gibbs_stochastic(&g, 1e-12));
        let swap = TransitionMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!(!swap.is_gibbs_stochastic(&g, 1e-12));
    }

    #[test]
    fn context_orients_pairs() {
        let ctx = ThermalContext::new(2.0).unwrap();
        let h = Hamiltonian::new(vec![1.0, 0.0, 0.5]).unwrap();
        let g = ctx.gibbs(&h).unwrap();
        for (i, j) in [(0, 1), (1, 0), (0, 2), (2, 1)] {
            for op in [
                ctx.beta_swap(&h, i, j).unwrap(),
                ctx.full_thermalization(&h, i, j).unwrap(),
                ctx.partial_thermalization(&h, i, j, 0.3).unwrap(),
                ctx.elementary(&h, i, j, 0.6).unwrap(),
            ] {
                assert!(op.to_matrix(3).unwrap().is_gibbs_stochastic(&g, 1e-12));
            }
        }
        // Degenerate pair: β-swap is a plain swap.
        let d = Hamiltonian::new(vec![0.0, 1.0, 1.0]).unwrap();
        assert_eq!(ctx.beta_swap(&d, 1, 2).unwrap().block(), [[0.0, 1.0], [1.0, 0.0]]);
        assert!(ThermalContext::with_hot_bath(1.0, 1.0).is_err());
        assert!(ThermalContext::with_hot_bath(1.0, 0.2).is_ok());
    }

    #[test]
    fn thermalize_memory_examples() {
        let ps = PopulationVector::qubit(0.3).unwrap();
        let prod = ps.tensor(&PopulationVector::uniform(4).unwrap());
        assert!(thermalize_memory(&prod, 2, 4).unwrap().max_abs_diff(&prod) < 1e-16);

        let p = PopulationVector::new(vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        let out = thermalize_memory(&p, 2, 2).unwrap();
        assert_eq!(out.probs(), &[0.25, 0.25, 0.25, 0.25]);

        assert!(matches!(
            thermalize_memory(&p, 3, 2),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    fn arb_distribution(dim: usize) -> impl Strategy<Value = PopulationVector> {
        prop::collection::vec(0.0f64..1.0, dim).prop_filter_map("zero mass", |w| {
            let s: f64 = w.iter().sum();
            (s > 1e-3).then(|| PopulationVector::new(w.iter().map(|x| x / s).collect()).unwrap())
        })
    }

    proptest! {
        #[test]
        fn thermalize_memory_keeps_system_marginal_bitwise(
            p in (1usize..5, 1usize..7).prop_flat_map(|(s, m)| (Just(s), Just(m), arb_distribution(s * m)))
        ) {
            let (s, m, p) = p;
            let before = p.system_marginal(s, m).unwrap();
            let after = thermalize_memory(&p, s, m).unwrap().system_marginal(s, m).unwrap();
            prop_assert_eq!(before.probs(), after.probs());
        }

        #[test]
        fn composition_matches_sequential_application(
            p in arb_distribution(4),
            l1 in 0.0f64..=1.0, l2 in 0.0f64..=1.0, beta in 0.1f64..3.0,
        ) {
            let ctx = ThermalContext::new(beta).unwrap();
            let h = Hamiltonian::new(vec![0.0, 0.4, 1.1, 1.5]).unwrap();
            let a = ctx.elementary(&h, 0, 3, l1).unwrap().to_matrix(4).unwrap();
            let b = ctx.partial_thermalization(&h, 1, 2, l2).unwrap().to_matrix(4).unwrap();
            let c = ctx.beta_swap(&h, 3, 1).unwrap().to_matrix(4).unwrap();
            let seq = a.apply(&b.apply(&c.apply(&p).unwrap()).unwrap()).unwrap();
            let composed = TransitionMatrix::compose(&[a, b, c]).unwrap();
            let once = composed.apply(&p).unwrap();
            prop_assert!(seq.max_abs_diff(&once) <= 1e-12);
            prop_assert!((once.sum() - p.sum()).abs() <= 1e-12);
            prop_assert!(once.probs().iter().all(|&x| x >= -1e-14));
            prop_assert!(composed.is_gibbs_stochastic(&ctx.gibbs(&h).unwrap(), 1e-12));
        }
    }
}
