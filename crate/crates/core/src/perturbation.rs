use std::fmt;

use crate::assemblage::{Assemblage, AssemblageError};
use crate::numerics::{hermiticity_deviation, CVector, HermitianOperator};

/// A grid `D_{n|r}` of Hermitian operators with the shape of an assemblage.
///
/// Valid perturbations of an assemblage `σ` share a marginal across inputs,
/// have a traceless marginal, and annihilate the kernel of each `σ_{n|r}`;
/// see [`Perturbation::check`].
#[derive(Clone, Debug, PartialEq)]
pub struct Perturbation {
    dim: usize,
    n_outcomes: usize,
    n_inputs: usize,
    blocks: Vec<HermitianOperator>,
}

impl Perturbation {
    /// Builds a perturbation from blocks indexed `[input][outcome]`.
    pub fn new(blocks: Vec<Vec<HermitianOperator>>) -> Result<Self, AssemblageError> {
        let (dim, n_outcomes, n_inputs, flat) = crate::assemblage::flatten_grid(blocks)?;
        Ok(Self {
            dim,
            n_outcomes,
            n_inputs,
            blocks: flat,
        })
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

    /// All-zero perturbation of the given shape.
    pub fn zeros(dim: usize, n_outcomes: usize, n_inputs: usize) -> Self {
        Self::from_flat(
            dim,
            n_outcomes,
            n_inputs,
            vec![HermitianOperator::zeros(dim); n_outcomes * n_inputs],
        )
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

    pub(crate) fn block_mut(&mut self, outcome: usize, input: usize) -> &mut HermitianOperator {
        &mut self.blocks[input * self.n_outcomes + outcome]
    }

    pub fn blocks_for_input(&self, input: usize) -> &[HermitianOperator] {
        &self.blocks[input * self.n_outcomes..(input + 1) * self.n_outcomes]
    }

    /// Blocks in input-major order.
    pub fn blocks(&self) -> &[HermitianOperator] {
        &self.blocks
    }

    /// `Σ_n D_{n|r}`
    pub fn input_marginal(&self, input: usize) -> HermitianOperator {
        sum_ops(self.dim, self.blocks_for_input(input))
    }

    pub fn max_block_norm(&self) -> f64 {
        self.blocks
            .iter()
            .map(HermitianOperator::frobenius_norm)
            .fold(0.0, f64::max)
    }

    /// Rescales so the largest block Frobenius norm is 1. `None` for the zero grid.
    pub fn normalized(&self) -> Option<Self> {
        let norm = self.max_block_norm();
        if norm == 0.0 || !norm.is_finite() {
            return None;
        }
        Some(self.scaled(1.0 / norm))
    }

    pub fn scaled(&self, w: f64) -> Self {
        Self {
            blocks: self.blocks.iter().map(|b| b * w).collect(),
            ..*self
        }
    }

    pub fn negated(&self) -> Self {
        self.scaled(-1.0)
    }

    /// Residuals of every perturbation condition with respect to `sigma`.
    ///
    /// Kernel vectors of `σ_{n|r}` are the eigenvectors with eigenvalue at most
    /// `epsilon`.
    pub fn check(&self, sigma: &Assemblage, epsilon: f64) -> PerturbationCheck {
        assert_eq!(
            (self.dim, self.n_outcomes, self.n_inputs),
            (sigma.dim(), sigma.n_outcomes(), sigma.n_inputs()),
            "perturbation and assemblage shapes differ"
        );
        let hermiticity = self
            .blocks
            .iter()
            .map(|b| hermiticity_deviation(b.matrix()))
            .fold(0.0, f64::max);

        let marginals: Vec<HermitianOperator> =
            (0..self.n_inputs).map(|r| self.input_marginal(r)).collect();
        let mut marginal_gap = 0.0f64;
        for r in 1..self.n_inputs {
            marginal_gap = marginal_gap.max(marginals[0].frobenius_distance(&marginals[r]));
        }
        let marginal_trace = marginals[0].trace().abs();

        let mut cokernel_leak = 0.0f64;
        for (d, s) in self.blocks.iter().zip(sigma.blocks()) {
            let (_, kernel) = s.eig().partition(epsilon);
            for u in &kernel {
                cokernel_leak = cokernel_leak.max(d.apply(u).norm());
            }
        }

        PerturbationCheck {
            hermiticity,
            marginal_gap,
            marginal_trace,
            cokernel_leak,
            max_block_norm: self.max_block_norm(),
        }
    }

    /// `‖D_{n|r} u‖` for a vector `u`, maximized over blocks of one input.
    pub fn max_action_on(&self, input: usize, u: &CVector) -> f64 {
        self.blocks_for_input(input)
            .iter()
            .map(|b| b.apply(u).norm())
            .fold(0.0, f64::max)
    }
}

pub(crate) fn sum_ops(dim: usize, ops: &[HermitianOperator]) -> HermitianOperator {
    ops.iter()
        .fold(HermitianOperator::zeros(dim), |acc, op| &acc + op)
}

/// Residuals of the perturbation conditions. All should be small except
/// `max_block_norm`, which must stay away from zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PerturbationCheck {
    pub hermiticity: f64,
    pub marginal_gap: f64,
    pub marginal_trace: f64,
    pub cokernel_leak: f64,
    pub max_block_norm: f64,
}

impl PerturbationCheck {
    /// Largest residual relative to the block scale.
    pub fn worst_residual(&self) -> f64 {
        let scale = self.max_block_norm.max(f64::MIN_POSITIVE);
        [
            self.hermiticity,
            self.marginal_gap,
            self.marginal_trace,
            self.cokernel_leak,
        ]
        .into_iter()
        .fold(0.0, f64::max)
            / scale
    }

    pub fn is_valid(&self, tol: f64) -> bool {
        self.max_block_norm >= 1e-6 && self.worst_residual() <= tol
    }
}

impl fmt::Display for PerturbationCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "hermiticity {:.3e}, marginal gap {:.3e}, marginal trace {:.3e}, cokernel leak {:.3e}, max block norm {:.3e}",
            self.hermiticity, self.marginal_gap, self.marginal_trace, self.cokernel_leak, self.max_block_norm
        )
    }
}
