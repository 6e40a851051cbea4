//! The assemblage data model.
//!
//! An assemblage is an `N x R` grid of `d x d` positive operators `σ_{n|r}`
//! (outcome `n`, input `r`, both zero-based here) whose per-input sums agree.
//! That common sum is the marginal state `ρ_B`.

use std::fmt;

use num_complex::Complex64;
use thiserror::Error;

use crate::numerics::{
    hermitian_eig, min_eigenvalue, numerical_rank, CMatrix, CVector, HermitianOperator,
    NumericsError,
};
use crate::perturbation::{sum_ops, Perturbation};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssemblageError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("assemblage is not valid: {0}")]
    Invalid(ValidationReport),
    #[error("invalid bipartite state: {0}")]
    InvalidState(String),
    #[error("invalid measurement for input {input}: {reason}")]
    InvalidMeasurement { input: usize, reason: String },
    #[error("embedding cannot shrink an axis ({axis}: {from} -> {to})")]
    Shrink {
        axis: &'static str,
        from: usize,
        to: usize,
    },
    #[error("weight {weight:e} is infeasible: block (outcome {outcome}, input {input}) reaches eigenvalue {min_eigenvalue:.3e}")]
    InfeasibleWeight {
        weight: f64,
        outcome: usize,
        input: usize,
        min_eigenvalue: f64,
    },
    #[error("block (outcome {outcome}, input {input}) has weight {leak:.3e} outside the support of the marginal")]
    SupportLeak {
        outcome: usize,
        input: usize,
        leak: f64,
    },
}

/// Flattens a `[input][outcome]` grid into input-major order, checking it is
/// non-empty, rectangular and of uniform operator dimension.
pub(crate) fn flatten_grid(
    grid: Vec<Vec<HermitianOperator>>,
) -> Result<(usize, usize, usize, Vec<HermitianOperator>), AssemblageError> {
    let n_inputs = grid.len();
    if n_inputs == 0 {
        return Err(AssemblageError::Shape("no inputs".into()));
    }
    let n_outcomes = grid[0].len();
    if n_outcomes == 0 {
        return Err(AssemblageError::Shape("no outcomes".into()));
    }
    let dim = grid[0][0].dim();
    let mut flat = Vec::with_capacity(n_inputs * n_outcomes);
    for (r, row) in grid.into_iter().enumerate() {
        if row.len() != n_outcomes {
            return Err(AssemblageError::Shape(format!(
                "input {r} has {} outcomes, input 0 has {n_outcomes}",
                row.len()
            )));
        }
        for (n, op) in row.into_iter().enumerate() {
            if op.dim() != dim {
                return Err(AssemblageError::Shape(format!(
                    "block (outcome {n}, input {r}) is {0}x{0}, expected {dim}x{dim}",
                    op.dim()
                )));
            }
            flat.push(op);
        }
    }
    Ok((dim, n_outcomes, n_inputs, flat))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Assemblage {
    dim: usize,
    n_outcomes: usize,
    n_inputs: usize,
    blocks: Vec<HermitianOperator>,
}

/// Per-condition residuals from [`Assemblage::validate`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ValidationReport {
    pub min_eigenvalue: f64,
    /// `(outcome, input)` of the block holding `min_eigenvalue`.
    pub min_block: (usize, usize),
    pub max_marginal_gap: f64,
    pub trace_deviation: f64,
    pub epsilon: f64,
}

impl ValidationReport {
    pub fn positivity_ok(&self) -> bool {
        self.min_eigenvalue >= -self.epsilon
    }

    pub fn no_signalling_ok(&self) -> bool {
        self.max_marginal_gap <= self.epsilon
    }

    pub fn trace_ok(&self) -> bool {
        self.trace_deviation <= self.epsilon
    }

    pub fn passed(&self) -> bool {
        self.positivity_ok() && self.no_signalling_ok() && self.trace_ok()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "min eigenvalue {:.3e} at (outcome {}, input {}), max marginal gap {:.3e}, trace deviation {:.3e} (epsilon {:.1e})",
            self.min_eigenvalue,
            self.min_block.0,
            self.min_block.1,
            self.max_marginal_gap,
            self.trace_deviation,
            self.epsilon
        )
    }
}

/// A pure state on `A ⊗ B` and measurements on `A` reproducing an assemblage.
#[derive(Clone, Debug)]
pub struct Realization {
    /// Amplitudes of `|Φ⟩`, index `a * d + b`.
    pub state_vector: CVector,
    /// `M_{n|r}` indexed `[input][outcome]`, written in the eigenbasis of `ρ_B`.
    pub measurements: Vec<Vec<HermitianOperator>>,
}

impl Realization {
    pub fn state(&self) -> HermitianOperator {
        HermitianOperator::projector(&self.state_vector)
    }

    /// Dimension of the measured system `A`.
    pub fn dim_a(&self) -> usize {
        self.measurements[0][0].dim()
    }

    /// Feeds the realization back through
    /// [`Assemblage::from_state_and_measurements`].
    pub fn reconstruct(&self, epsilon: f64) -> Result<Assemblage, AssemblageError> {
        Assemblage::from_state_and_measurements(
            &self.state(),
            self.dim_a(),
            &self.measurements,
            epsilon,
        )
    }
}

impl Assemblage {
    /// Builds an assemblage from blocks indexed `[input][outcome]`. Only the
    /// shape is checked here; see [`Assemblage::validate`].
    pub fn new(blocks: Vec<Vec<HermitianOperator>>) -> Result<Self, AssemblageError> {
        let (dim, n_outcomes, n_inputs, blocks) = flatten_grid(blocks)?;
        Ok(Self {
            dim,
            n_outcomes,
            n_inputs,
            blocks,
        })
    }

    /// Like [`Assemblage::new`] but also requires `validate(epsilon)` to pass.
    pub fn new_valid(
        blocks: Vec<Vec<HermitianOperator>>,
        epsilon: f64,
    ) -> Result<Self, AssemblageError> {
        let a = Self::new(blocks)?;
        a.ensure_valid(epsilon)?;
        Ok(a)
    }

    pub(crate) fn from_flat(
        dim: usize,
        n_outcomes: usize,
        n_inputs: usize,
        blocks: Vec<HermitianOperator>,
    ) -> Self {
        debug_assert_eq!(blocks.len(), n_outcomes * n_inputs);
        Self {
            dim,
            n_outcomes,
            n_inputs,
            blocks,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_outcomes(&self) -> usize {
        self.n_outcomes
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn block(&self, outcome: usize, input: usize) -> &HermitianOperator {
        &self.blocks[input * self.n_outcomes + outcome]
    }

    pub fn blocks_for_input(&self, input: usize) -> &[HermitianOperator] {
        &self.blocks[input * self.n_outcomes..(input + 1) * self.n_outcomes]
    }

    /// Blocks in input-major order (`index = input * N + outcome`).
    pub fn blocks(&self) -> &[HermitianOperator] {
        &self.blocks
    }

    /// Blocks as a `[input][outcome]` grid.
    pub fn to_grid(&self) -> Vec<Vec<HermitianOperator>> {
        self.blocks
            .chunks(self.n_outcomes)
            .map(<[HermitianOperator]>::to_vec)
            .collect()
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        (self.dim, self.n_outcomes, self.n_inputs) == (other.dim, other.n_outcomes, other.n_inputs)
    }

    /// `Σ_n σ_{n|r}`
    pub fn input_marginal(&self, input: usize) -> HermitianOperator {
        sum_ops(self.dim, self.blocks_for_input(input))
    }

    /// The marginal state `ρ_B`, taken from input 0.
    pub fn marginal(&self) -> HermitianOperator {
        self.input_marginal(0)
    }

    pub fn validate(&self, epsilon: f64) -> ValidationReport {
        let mut min_eig = f64::INFINITY;
        let mut min_block = (0, 0);
        for r in 0..self.n_inputs {
            for n in 0..self.n_outcomes {
                let e = min_eigenvalue(self.block(n, r));
                if e < min_eig {
                    min_eig = e;
                    min_block = (n, r);
                }
            }
        }
        let marginals: Vec<HermitianOperator> =
            (0..self.n_inputs).map(|r| self.input_marginal(r)).collect();
        let mut gap = 0.0f64;
        for r in 0..self.n_inputs {
            for s in (r + 1)..self.n_inputs {
                gap = gap.max(marginals[r].frobenius_distance(&marginals[s]));
            }
        }
        ValidationReport {
            min_eigenvalue: min_eig,
            min_block,
            max_marginal_gap: gap,
            trace_deviation: (marginals[0].trace() - 1.0).abs(),
            epsilon,
        }
    }

    pub fn ensure_valid(&self, epsilon: f64) -> Result<(), AssemblageError> {
        let report = self.validate(epsilon);
        if report.passed() {
            Ok(())
        } else {
            Err(AssemblageError::Invalid(report))
        }
    }

    /// Numerical rank of every block, input-major.
    pub fn ranks(&self, epsilon: f64) -> Vec<usize> {
        self.blocks
            .iter()
            .map(|b| numerical_rank(b, epsilon))
            .collect()
    }

    pub fn total_rank(&self, epsilon: f64) -> usize {
        self.ranks(epsilon).iter().sum()
    }

    /// Largest blockwise Frobenius distance to another assemblage of the same shape.
    pub fn max_block_distance(&self, other: &Self) -> f64 {
        assert!(self.same_shape(other), "assemblage shapes differ");
        self.blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| a.frobenius_distance(b))
            .fold(0.0, f64::max)
    }

    /// `Σ_i w_i σ^i` blockwise. All terms must share a shape.
    pub fn weighted_sum<'a, I>(terms: I) -> Option<Self>
    where
        I: IntoIterator<Item = (f64, &'a Assemblage)>,
    {
        let mut iter = terms.into_iter();
        let (w0, first) = iter.next()?;
        let mut acc: Vec<CMatrix> = first
            .blocks
            .iter()
            .map(|b| b.matrix() * Complex64::new(w0, 0.0))
            .collect();
        for (w, a) in iter {
            assert!(first.same_shape(a), "assemblage shapes differ");
            for (dst, b) in acc.iter_mut().zip(&a.blocks) {
                *dst += b.matrix() * Complex64::new(w, 0.0);
            }
        }
        Some(Self {
            blocks: acc
                .into_iter()
                .map(HermitianOperator::symmetrized)
                .collect(),
            ..*first
        })
    }

    /// `σ_{n|r} = Tr_A[(M_{n|r} ⊗ I_B) ρ_AB]` with `ρ_AB` on `C^{d_A} ⊗ C^{d_B}`
    /// (row index `a * d_B + b`) and measurements indexed `[input][outcome]`.
    pub fn from_state_and_measurements(
        rho_ab: &HermitianOperator,
        dim_a: usize,
        measurements: &[Vec<HermitianOperator>],
        epsilon: f64,
    ) -> Result<Self, AssemblageError> {
        if dim_a == 0 || !rho_ab.dim().is_multiple_of(dim_a) {
            return Err(AssemblageError::InvalidState(format!(
                "state dimension {} is not a multiple of d_A = {dim_a}",
                rho_ab.dim()
            )));
        }
        let dim_b = rho_ab.dim() / dim_a;
        let min_eig = min_eigenvalue(rho_ab);
        if min_eig < -epsilon {
            return Err(AssemblageError::InvalidState(format!(
                "minimum eigenvalue {min_eig:.3e}"
            )));
        }
        if (rho_ab.trace() - 1.0).abs() > epsilon {
            return Err(AssemblageError::InvalidState(format!(
                "trace {}",
                rho_ab.trace()
            )));
        }
        if measurements.is_empty() {
            return Err(AssemblageError::Shape("no measurements".into()));
        }
        let identity = HermitianOperator::identity(dim_a);
        for (r, effects) in measurements.iter().enumerate() {
            if effects.is_empty() {
                return Err(AssemblageError::InvalidMeasurement {
                    input: r,
                    reason: "no effects".into(),
                });
            }
            for (n, m) in effects.iter().enumerate() {
                if m.dim() != dim_a {
                    return Err(AssemblageError::InvalidMeasurement {
                        input: r,
                        reason: format!("effect {n} has dimension {}, expected {dim_a}", m.dim()),
                    });
                }
                let e = min_eigenvalue(m);
                if e < -epsilon {
                    return Err(AssemblageError::InvalidMeasurement {
                        input: r,
                        reason: format!("effect {n} has eigenvalue {e:.3e}"),
                    });
                }
            }
            let completeness = sum_ops(dim_a, effects).frobenius_distance(&identity);
            if completeness > epsilon {
                return Err(AssemblageError::InvalidMeasurement {
                    input: r,
                    reason: format!("effects sum to identity only within {completeness:.3e}"),
                });
            }
        }

        let rho = rho_ab.matrix();
        let grid = measurements
            .iter()
            .map(|effects| {
                effects
                    .iter()
                    .map(|m| {
                        let m = m.matrix();
                        let mut out = CMatrix::zeros(dim_b, dim_b);
                        for b in 0..dim_b {
                            for bp in 0..dim_b {
                                let mut acc = Complex64::new(0.0, 0.0);
                                for a in 0..dim_a {
                                    for a2 in 0..dim_a {
                                        acc += m[(a, a2)] * rho[(a2 * dim_b + b, a * dim_b + bp)];
                                    }
                                }
                                out[(b, bp)] = acc;
                            }
                        }
                        HermitianOperator::symmetrized(out)
                    })
                    .collect()
            })
            .collect();
        Self::new(grid)
    }

    /// The purification realization: `|Φ⟩ = Σ_i √λ_i |i⟩_A |i⟩_B` over the
    /// eigen-decomposition of `ρ_B`, and `M_{n|r} = ρ_B^{-1/2} σ_{n|r}^T ρ_B^{-1/2}`
    /// with the transpose and inverse taken in that eigenbasis, on the support.
    ///
    /// The projector onto the kernel of `ρ_B` is added to outcome 0 of every
    /// input so each measurement sums to the full identity. `|Φ⟩` has no
    /// weight there, so the reproduced assemblage is unchanged.
    pub fn canonical_realization(&self, epsilon: f64) -> Result<Realization, AssemblageError> {
        self.ensure_valid(epsilon)?;
        let d = self.dim;
        let frame = hermitian_eig(&self.marginal());
        let k = frame.values.iter().filter(|&&l| l > epsilon).count();
        let basis = frame.vector_matrix(d);

        let mut state = CVector::zeros(d * d);
        for i in 0..k {
            let amp = frame.values[i].sqrt();
            for b in 0..d {
                state[i * d + b] = basis[(b, i)] * amp;
            }
        }

        let inv_sqrt: Vec<f64> = frame.values[..k].iter().map(|l| 1.0 / l.sqrt()).collect();
        let leak_tol = 10.0 * epsilon;
        let mut measurements = Vec::with_capacity(self.n_inputs);
        for r in 0..self.n_inputs {
            let mut effects = Vec::with_capacity(self.n_outcomes);
            for n in 0..self.n_outcomes {
                let local = self.block(n, r).congruence(&basis);
                let lm = local.matrix();
                let mut leak = 0.0f64;
                for i in 0..d {
                    for j in 0..d {
                        if i >= k || j >= k {
                            leak = leak.max(lm[(i, j)].norm());
                        }
                    }
                }
                if leak > leak_tol {
                    return Err(AssemblageError::SupportLeak {
                        outcome: n,
                        input: r,
                        leak,
                    });
                }
                let mut m = CMatrix::zeros(d, d);
                for i in 0..k {
                    for j in 0..k {
                        m[(i, j)] = lm[(j, i)] * (inv_sqrt[i] * inv_sqrt[j]);
                    }
                }
                if n == 0 {
                    for i in k..d {
                        m[(i, i)] = Complex64::new(1.0, 0.0);
                    }
                }
                effects.push(HermitianOperator::symmetrized(m));
            }
            measurements.push(effects);
        }
        Ok(Realization {
            state_vector: state,
            measurements,
        })
    }

    /// Embeds into a larger scenario: new outcomes are zero, new inputs repeat
    /// the last input, and new dimensions are zero-padded after the existing
    /// coordinates.
    pub fn embed(
        &self,
        n_outcomes: usize,
        n_inputs: usize,
        dim: usize,
    ) -> Result<Self, AssemblageError> {
        for (axis, from, to) in [
            ("outcomes", self.n_outcomes, n_outcomes),
            ("inputs", self.n_inputs, n_inputs),
            ("dimension", self.dim, dim),
        ] {
            if to < from {
                return Err(AssemblageError::Shrink { axis, from, to });
            }
        }
        let mut blocks = Vec::with_capacity(n_outcomes * n_inputs);
        for r in 0..n_inputs {
            let src = r.min(self.n_inputs - 1);
            for n in 0..n_outcomes {
                if n < self.n_outcomes {
                    blocks.push(self.block(n, src).padded(dim));
                } else {
                    blocks.push(HermitianOperator::zeros(dim));
                }
            }
        }
        Ok(Self::from_flat(dim, n_outcomes, n_inputs, blocks))
    }

    /// `σ_{n|r} + w D_{n|r}` blockwise. Fails if any block drops below `-10 ε`.
    pub fn apply_perturbation(
        &self,
        d: &Perturbation,
        w: f64,
        epsilon: f64,
    ) -> Result<Self, AssemblageError> {
        if (d.dim(), d.n_outcomes(), d.n_inputs()) != (self.dim, self.n_outcomes, self.n_inputs) {
            return Err(AssemblageError::Shape(
                "perturbation shape differs from the assemblage".into(),
            ));
        }
        let blocks: Vec<HermitianOperator> = self
            .blocks
            .iter()
            .zip(d.blocks())
            .map(|(s, p)| s.plus_scaled(p, w))
            .collect();
        let tol = 10.0 * epsilon;
        let mut worst: Option<(usize, f64)> = None;
        for (i, b) in blocks.iter().enumerate() {
            let e = min_eigenvalue(b);
            if e < -tol && worst.is_none_or(|(_, w)| e < w) {
                worst = Some((i, e));
            }
        }
        if let Some((i, e)) = worst {
            return Err(AssemblageError::InfeasibleWeight {
                weight: w,
                outcome: i % self.n_outcomes,
                input: i / self.n_outcomes,
                min_eigenvalue: e,
            });
        }
        Ok(Self::from_flat(
            self.dim,
            self.n_outcomes,
            self.n_inputs,
            blocks,
        ))
    }

    /// Cleans up rounding after a split: blocks are re-symmetrized and
    /// eigenvalues at or below `epsilon` are set to exactly zero, so the rank
    /// drop produced by a maximal-weight split is exact.
    pub(crate) fn renormalized(&self, epsilon: f64) -> Self {
        let blocks = self
            .blocks
            .iter()
            .map(|b| {
                let frame = hermitian_eig(b);
                if frame.values.iter().all(|&l| l > epsilon) {
                    b.clone()
                } else {
                    frame.partition(epsilon).0.reconstruct(self.dim)
                }
            })
            .collect();
        Self::from_flat(self.dim, self.n_outcomes, self.n_inputs, blocks)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios;

    fn ket0() -> HermitianOperator {
        HermitianOperator::from_real_diagonal(&[1.0, 0.0])
    }

    fn ket1() -> HermitianOperator {
        HermitianOperator::from_real_diagonal(&[0.0, 1.0])
    }

    fn deterministic() -> Assemblage {
        Assemblage::new(vec![vec![ket0(), HermitianOperator::zeros(2)]]).unwrap()
    }

    #[test]
    fn validate_pure_single_outcome() {
        assert!(deterministic().validate(1e-8).passed());
    }

    #[test]
    fn validate_flags_negative_block() {
        let sigma = scenarios::xtetra();
        assert!(sigma.validate(1e-8).passed());
        let mut grid = sigma.to_grid();
        grid[0][0] = -&grid[0][0];
        let flipped = Assemblage::new(grid).unwrap();
        let report = flipped.validate(1e-8);
        assert!(!report.positivity_ok());
        assert!(!report.passed());
        assert_eq!(report.min_block, (0, 0));
    }

    #[test]
    fn shape_errors_are_structural() {
        let err = Assemblage::new(vec![vec![ket0()], vec![ket0(), ket1()]]).unwrap_err();
        assert!(matches!(err, AssemblageError::Shape(_)));
        let err = Assemblage::new(vec![vec![ket0(), HermitianOperator::identity(3)]]).unwrap_err();
        assert!(matches!(err, AssemblageError::Shape(_)));
        assert!(Assemblage::new(vec![]).is_err());
    }

    #[test]
    fn marginal_of_deterministic() {
        assert!(deterministic().marginal().frobenius_distance(&ket0()) < 1e-15);
    }

    #[test]
    fn partial_trace_of_trivial_measurement_is_reduced_state() {
        // ρ_AB = |ψ⟩⟨ψ| with |ψ⟩ = (|00⟩ + 2|11⟩)/√5 has ρ_B = diag(1, 4)/5.
        let mut psi = CVector::zeros(4);
        psi[0] = Complex64::new(1.0 / 5f64.sqrt(), 0.0);
        psi[3] = Complex64::new(2.0 / 5f64.sqrt(), 0.0);
        let rho = HermitianOperator::projector(&psi);
        let sigma = Assemblage::from_state_and_measurements(
            &rho,
            2,
            &[vec![HermitianOperator::identity(2)]],
            1e-8,
        )
        .unwrap();
        let expected = HermitianOperator::from_real_diagonal(&[0.2, 0.8]);
        assert!(sigma.block(0, 0).frobenius_distance(&expected) < 1e-14);
    }

    #[test]
    fn from_state_rejects_bad_inputs() {
        let rho = HermitianOperator::from_real_diagonal(&[0.5, 0.5, 0.0, 0.0]);
        let bad = vec![vec![ket0()]];
        assert!(matches!(
            Assemblage::from_state_and_measurements(&rho, 2, &bad, 1e-8),
            Err(AssemblageError::InvalidMeasurement { .. })
        ));
        let unnormalized = HermitianOperator::identity(4);
        assert!(matches!(
            Assemblage::from_state_and_measurements(
                &unnormalized,
                2,
                &[vec![HermitianOperator::identity(2)]],
                1e-8
            ),
            Err(AssemblageError::InvalidState(_))
        ));
    }

    #[test]
    fn realization_of_deterministic_is_product() {
        let sigma = deterministic();
        let real = sigma.canonical_realization(1e-8).unwrap();
        // |Φ⟩ = |0⟩_A|0⟩_B, and M_{0|0} is the identity.
        assert!((real.state_vector[0].norm() - 1.0).abs() < 1e-12);
        assert!(
            real.measurements[0][0].frobenius_distance(&HermitianOperator::identity(2)) < 1e-12
        );
        let back = real.reconstruct(1e-8).unwrap();
        assert!(back.max_block_distance(&sigma) < 1e-12);
    }

    #[test]
    fn realization_of_pentagon_gives_pentagon_effects() {
        let sigma = scenarios::pentagon();
        let real = sigma.canonical_realization(1e-8).unwrap();
        for m in &real.measurements[0] {
            let frame = m.eig();
            assert!((frame.values[0] - 0.4).abs() < 1e-12);
            assert!(frame.values[1].abs() < 1e-12);
        }
        assert!(real.reconstruct(1e-8).unwrap().max_block_distance(&sigma) < 1e-12);
    }

    #[test]
    fn embed_axes() {
        let sigma = Assemblage::new(vec![vec![ket0()]]).unwrap();
        let more_outcomes = sigma.embed(2, 1, 2).unwrap();
        assert_eq!(more_outcomes.block(1, 0).frobenius_norm(), 0.0);
        let more_inputs = sigma.embed(1, 2, 2).unwrap();
        assert_eq!(more_inputs.block(0, 0), more_inputs.block(0, 1));
        let bigger = sigma.embed(1, 1, 3).unwrap();
        assert_eq!(bigger.dim(), 3);
        assert!(bigger.validate(1e-8).passed());
        assert!(matches!(
            more_outcomes.embed(1, 1, 2),
            Err(AssemblageError::Shrink { .. })
        ));
    }

    fn counterexample_perturbation() -> Perturbation {
        Perturbation::new(vec![vec![&ket0() * 0.5, &ket1() * -0.5]]).unwrap()
    }

    #[test]
    fn zero_weight_is_identity() {
        let sigma = scenarios::povm_counterexample();
        let out = sigma
            .apply_perturbation(&counterexample_perturbation(), 0.0, 1e-8)
            .unwrap();
        assert_eq!(out, sigma);
    }

    #[test]
    fn counterexample_splits_into_pure_outcomes() {
        let sigma = scenarios::povm_counterexample();
        let d = counterexample_perturbation();
        let plus = sigma.apply_perturbation(&d, 1.0, 1e-8).unwrap();
        assert!(plus.block(0, 0).frobenius_distance(&ket0()) < 1e-15);
        assert!(plus.block(1, 0).frobenius_norm() < 1e-15);
        let minus = sigma.apply_perturbation(&d, -1.0, 1e-8).unwrap();
        assert!(minus.block(0, 0).frobenius_norm() < 1e-15);
        assert!(minus.block(1, 0).frobenius_distance(&ket1()) < 1e-15);
    }

    #[test]
    fn infeasible_weight_names_the_block() {
        let sigma = scenarios::povm_counterexample();
        let err = sigma
            .apply_perturbation(&counterexample_perturbation(), 1.5, 1e-8)
            .unwrap_err();
        match err {
            AssemblageError::InfeasibleWeight {
                outcome,
                input,
                min_eigenvalue,
                ..
            } => {
                assert_eq!((outcome, input), (1, 0));
                assert!((min_eigenvalue + 0.25).abs() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn renormalize_clips_small_eigenvalues() {
        let sigma = scenarios::xtetra();
        let mut grid = sigma.to_grid();
        grid[1][0] =
            grid[1][0].plus_scaled(&HermitianOperator::from_real_diagonal(&[0.0, 1e-10]), 1.0);
        let noisy = Assemblage::new(grid).unwrap();
        assert_eq!(numerical_rank(noisy.block(0, 1), 1e-12), 2);
        let clean = noisy.renormalized(1e-8);
        assert_eq!(numerical_rank(clean.block(0, 1), 1e-12), 1);
        assert!(clean.max_block_distance(&sigma) < 1e-9);
    }
}
