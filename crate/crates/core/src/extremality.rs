//! Extremality of assemblages via linear independence of operator families.
//!
//! For every block `σ_{n|r}` with support eigenvectors `v^a`, the family
//!
//! ```text
//! |v^a⟩⟨v^a|,  (|v^a⟩⟨v^b| + |v^b⟩⟨v^a|)/√2,  (|v^a⟩⟨v^b| - |v^b⟩⟨v^a|)/(√2 i)
//! ```
//!
//! is an orthonormal real basis of the Hermitian operators supported on that
//! block. A perturbation is a real coefficient vector over these families
//! whose per-input sums agree and have zero trace. [`is_extremal`] decides
//! whether one exists in three stages: the single-input shortcut, a per-input
//! zero-marginal test, and a cross-input test. [`is_extremal_direct`] answers
//! the same question from the raw perturbation equations over full `d x d`
//! unknowns and serves as an oracle.

use std::fmt;

use thiserror::Error;

use crate::assemblage::{Assemblage, AssemblageError};
use crate::exec::Execution;
use crate::numerics::{
    real_nullspace, real_vec_to_hermitian, support_frame, HermitianOperator, NumericsError,
    RMatrix, RVector,
};
use crate::perturbation::Perturbation;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExtremalityError {
    #[error(transparent)]
    Assemblage(#[from] AssemblageError),
    #[error("block (outcome {outcome}, input {input}): {source}")]
    Block {
        outcome: usize,
        input: usize,
        source: NumericsError,
    },
    #[error("input {input} out of range (assemblage has {n_inputs} inputs)")]
    InputOutOfRange { input: usize, n_inputs: usize },
    #[error("a cross-input constraint needs two distinct inputs, got {0} twice")]
    SameInput(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ElementKind {
    /// `|v^a⟩⟨v^a|`
    Diagonal(usize),
    /// `(|v^a⟩⟨v^b| + |v^b⟩⟨v^a|)/√2`
    Symmetric(usize, usize),
    /// `(|v^a⟩⟨v^b| - |v^b⟩⟨v^a|)/(√2 i)`
    Antisymmetric(usize, usize),
}

/// One unit-norm Hermitian operator of a block's family, tagged with the block
/// it came from.
#[derive(Clone, Debug)]
pub struct OperatorBasisElement {
    pub matrix: HermitianOperator,
    pub outcome: usize,
    pub input: usize,
    pub kind: ElementKind,
}

impl OperatorBasisElement {
    pub fn is_diagonal(&self) -> bool {
        matches!(self.kind, ElementKind::Diagonal(_))
    }
}

/// Which test produced an extremality verdict.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    /// Single input: extremal iff exactly one nonzero block, of rank one.
    Lemma1,
    /// A perturbation with zero marginal exists inside this input.
    ZeroMarginal { input: usize },
    /// This pair's family is independent, which rules out any perturbation.
    CrossInputPair { input: usize, other: usize },
    /// Every pair was dependent; the verdict comes from the joint system over
    /// all inputs.
    AllPairsExhausted,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stage::Lemma1 => write!(f, "lemma1"),
            Stage::ZeroMarginal { input } => write!(f, "zero-marginal at input {input}"),
            Stage::CrossInputPair { input, other } => {
                write!(f, "cross-input pair ({input}, {other})")
            }
            Stage::AllPairsExhausted => write!(f, "all-pairs exhausted"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExtremalityReport {
    pub extremal: bool,
    /// A nonzero valid perturbation, present iff not extremal. Normalized to
    /// unit maximal block norm.
    pub witness: Option<Perturbation>,
    pub stage: Stage,
}

/// The operator family of one input, in the order: outcome, then eigenvector
/// `a` (descending eigenvalue), then the diagonal element followed by the
/// symmetric/antisymmetric pair with every earlier eigenvector `b < a`.
pub fn hermitian_basis_for_input(
    sigma: &Assemblage,
    input: usize,
    epsilon: f64,
) -> Result<Vec<OperatorBasisElement>, ExtremalityError> {
    if input >= sigma.n_inputs() {
        return Err(ExtremalityError::InputOutOfRange {
            input,
            n_inputs: sigma.n_inputs(),
        });
    }
    let mut out = Vec::new();
    for (outcome, block) in sigma.blocks_for_input(input).iter().enumerate() {
        let frame = support_frame(block, epsilon).map_err(|source| ExtremalityError::Block {
            outcome,
            input,
            source,
        })?;
        let v = &frame.vectors;
        for a in 0..v.len() {
            out.push(OperatorBasisElement {
                matrix: HermitianOperator::projector(&v[a]),
                outcome,
                input,
                kind: ElementKind::Diagonal(a),
            });
            for b in 0..a {
                out.push(OperatorBasisElement {
                    matrix: HermitianOperator::symmetric_pair(&v[a], &v[b]),
                    outcome,
                    input,
                    kind: ElementKind::Symmetric(a, b),
                });
                out.push(OperatorBasisElement {
                    matrix: HermitianOperator::antisymmetric_pair(&v[a], &v[b]),
                    outcome,
                    input,
                    kind: ElementKind::Antisymmetric(a, b),
                });
            }
        }
    }
    Ok(out)
}

/// Columns are the real vectorizations of the elements.
pub fn stack_columns(dim: usize, elements: &[OperatorBasisElement]) -> RMatrix {
    let mut m = RMatrix::zeros(dim * dim, elements.len());
    for (j, e) in elements.iter().enumerate() {
        m.set_column(j, &e.matrix.to_real_vec());
    }
    m
}

/// `Σ_i c_i O_i`, grouped into a perturbation by each element's block.
pub fn perturbation_from_coefficients(
    sigma: &Assemblage,
    elements: &[OperatorBasisElement],
    coefficients: &[f64],
) -> Perturbation {
    assert_eq!(elements.len(), coefficients.len());
    let mut d = Perturbation::zeros(sigma.dim(), sigma.n_outcomes(), sigma.n_inputs());
    for (e, &c) in elements.iter().zip(coefficients) {
        let block = d.block_mut(e.outcome, e.input);
        *block = block.plus_scaled(&e.matrix, c);
    }
    d
}

/// First nullspace vector of the input's stacked family, if any. A returned
/// `c` gives a perturbation supported on `input` alone with zero marginal.
pub fn zero_marginal_witness(
    sigma: &Assemblage,
    input: usize,
    epsilon: f64,
) -> Result<Option<RVector>, ExtremalityError> {
    let elements = hermitian_basis_for_input(sigma, input, epsilon)?;
    Ok(zero_marginal_nullspace(sigma.dim(), &elements, epsilon)
        .into_iter()
        .next())
}

pub(crate) fn zero_marginal_nullspace(
    dim: usize,
    elements: &[OperatorBasisElement],
    epsilon: f64,
) -> Vec<RVector> {
    if elements.is_empty() {
        return Vec::new();
    }
    real_nullspace(&stack_columns(dim, elements), epsilon)
}

/// Constraint matrix over the concatenated families of `input` and `other`:
/// `d²` rows for `Σ u_i O_i (input) - Σ u_j O_j (other) = 0`, and one row
/// for the zero trace of the marginal (only diagonal elements of `input` carry
/// trace).
pub fn pairwise_constraint_matrix(
    sigma: &Assemblage,
    input: usize,
    other: usize,
    epsilon: f64,
) -> Result<RMatrix, ExtremalityError> {
    if input == other {
        return Err(ExtremalityError::SameInput(input));
    }
    let a = hermitian_basis_for_input(sigma, input, epsilon)?;
    let b = hermitian_basis_for_input(sigma, other, epsilon)?;
    Ok(pair_matrix(sigma.dim(), &a, &b))
}

fn pair_matrix(dim: usize, a: &[OperatorBasisElement], b: &[OperatorBasisElement]) -> RMatrix {
    let d2 = dim * dim;
    let mut m = RMatrix::zeros(d2 + 1, a.len() + b.len());
    for (j, e) in a.iter().enumerate() {
        m.view_mut((0, j), (d2, 1))
            .copy_from(&e.matrix.to_real_vec());
        if e.is_diagonal() {
            m[(d2, j)] = 1.0;
        }
    }
    for (j, e) in b.iter().enumerate() {
        m.view_mut((0, a.len() + j), (d2, 1))
            .copy_from(&(-e.matrix.to_real_vec()));
    }
    m
}

/// The joint system over every input's family: input 0's sum equals every
/// other input's sum, and input 0's sum is traceless. Its nullspace is exactly
/// the set of perturbations of `sigma` written in the eigenvector bases.
pub fn joint_constraint_matrix(
    sigma: &Assemblage,
    epsilon: f64,
) -> Result<(RMatrix, Vec<OperatorBasisElement>), ExtremalityError> {
    let families = (0..sigma.n_inputs())
        .map(|r| hermitian_basis_for_input(sigma, r, epsilon))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(joint_matrix(sigma.dim(), families))
}

pub(crate) fn joint_matrix(
    dim: usize,
    families: Vec<Vec<OperatorBasisElement>>,
) -> (RMatrix, Vec<OperatorBasisElement>) {
    let d2 = dim * dim;
    let n_inputs = families.len();
    let rows = (n_inputs - 1) * d2 + 1;
    let cols: usize = families.iter().map(Vec::len).sum();
    let mut m = RMatrix::zeros(rows, cols);
    let mut col = 0;
    for (r, family) in families.iter().enumerate() {
        for e in family {
            let v = e.matrix.to_real_vec();
            if r == 0 {
                for block in 0..(n_inputs - 1) {
                    m.view_mut((block * d2, col), (d2, 1)).copy_from(&v);
                }
                if e.is_diagonal() {
                    m[(rows - 1, col)] = 1.0;
                }
            } else {
                m.view_mut(((r - 1) * d2, col), (d2, 1)).copy_from(&(-v));
            }
            col += 1;
        }
    }
    (m, families.into_iter().flatten().collect())
}

/// Decides extremality. See [`is_extremal_with`].
pub fn is_extremal(
    sigma: &Assemblage,
    epsilon: f64,
) -> Result<ExtremalityReport, ExtremalityError> {
    is_extremal_with(sigma, epsilon, Execution::default())
}

/// Decides extremality, running the per-input and per-pair checks under
/// `exec`. Verdicts are combined in index order, so the result does not
/// depend on the execution strategy.
pub fn is_extremal_with(
    sigma: &Assemblage,
    epsilon: f64,
    exec: Execution,
) -> Result<ExtremalityReport, ExtremalityError> {
    sigma.ensure_valid(epsilon)?;
    let n_inputs = sigma.n_inputs();
    let dim = sigma.dim();
    let families = exec
        .map_range(n_inputs, |r| hermitian_basis_for_input(sigma, r, epsilon))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;

    let zero_marginal = exec.map_range(n_inputs, |r| {
        zero_marginal_nullspace(dim, &families[r], epsilon)
            .into_iter()
            .next()
    });
    let first_zero_marginal = zero_marginal
        .into_iter()
        .enumerate()
        .find_map(|(r, c)| c.map(|c| (r, c)));
    let witness_from = |elements: &[OperatorBasisElement], c: &RVector| {
        perturbation_from_coefficients(sigma, elements, c.as_slice()).normalized()
    };

    if n_inputs == 1 {
        let ranks: Vec<usize> = families[0].iter().filter(|e| e.is_diagonal()).fold(
            vec![0; sigma.n_outcomes()],
            |mut acc, e| {
                acc[e.outcome] += 1;
                acc
            },
        );
        let nonzero: Vec<usize> = ranks.iter().copied().filter(|&k| k > 0).collect();
        let extremal = nonzero.len() == 1 && nonzero[0] == 1;
        let witness = if extremal {
            None
        } else if let Some((r, c)) = &first_zero_marginal {
            witness_from(&families[*r], c)
        } else {
            let (m, elements) = joint_matrix(dim, families);
            real_nullspace(&m, epsilon)
                .first()
                .and_then(|c| witness_from(&elements, c))
        };
        return Ok(ExtremalityReport {
            extremal,
            witness,
            stage: Stage::Lemma1,
        });
    }

    if let Some((r, c)) = first_zero_marginal {
        return Ok(ExtremalityReport {
            extremal: false,
            witness: witness_from(&families[r], &c),
            stage: Stage::ZeroMarginal { input: r },
        });
    }

    let pairs: Vec<(usize, usize)> = (0..n_inputs)
        .flat_map(|r| ((r + 1)..n_inputs).map(move |s| (r, s)))
        .collect();
    let independent = exec.map_range(pairs.len(), |k| {
        let (r, s) = pairs[k];
        real_nullspace(&pair_matrix(dim, &families[r], &families[s]), epsilon).is_empty()
    });
    if let Some(k) = independent.iter().position(|&ok| ok) {
        let (input, other) = pairs[k];
        return Ok(ExtremalityReport {
            extremal: true,
            witness: None,
            stage: Stage::CrossInputPair { input, other },
        });
    }

    let (m, elements) = joint_matrix(dim, families);
    let witness = real_nullspace(&m, epsilon)
        .first()
        .and_then(|c| witness_from(&elements, c));
    Ok(ExtremalityReport {
        extremal: witness.is_none(),
        witness,
        stage: Stage::AllPairsExhausted,
    })
}

/// Basis of all perturbations of `sigma`, from the defining equations over
/// full Hermitian unknowns: shared marginal across inputs, traceless
/// marginal, and `D_{n|r} u = 0` for every kernel vector `u` of `σ_{n|r}`.
///
/// Each returned perturbation is normalized to unit maximal block norm.
pub fn direct_perturbation_basis(
    sigma: &Assemblage,
    epsilon: f64,
) -> Result<Vec<Perturbation>, ExtremalityError> {
    let d = sigma.dim();
    let d2 = d * d;
    let n = sigma.n_outcomes();
    let n_inputs = sigma.n_inputs();
    let n_blocks = n * n_inputs;
    let n_params = n_blocks * d2;
    let param = |outcome: usize, input: usize, k: usize| (input * n + outcome) * d2 + k;

    // Real Hermitian basis: unit vectors through the isometric vectorization.
    let hermitian_basis: Vec<HermitianOperator> = (0..d2)
        .map(|k| {
            let mut e = vec![0.0; d2];
            e[k] = 1.0;
            real_vec_to_hermitian(d, &e).expect("length d²")
        })
        .collect();

    let mut rows: Vec<Vec<f64>> = Vec::new();
    for r in 1..n_inputs {
        for k in 0..d2 {
            let mut row = vec![0.0; n_params];
            for o in 0..n {
                row[param(o, 0, k)] += 1.0;
                row[param(o, r, k)] -= 1.0;
            }
            rows.push(row);
        }
    }
    let mut trace_row = vec![0.0; n_params];
    for o in 0..n {
        for k in 0..d {
            trace_row[param(o, 0, k)] = 1.0;
        }
    }
    rows.push(trace_row);

    for r in 0..n_inputs {
        for o in 0..n {
            let block = sigma.block(o, r);
            let frame = block.eig();
            if let Some(&min) = frame.values.last() {
                if min < -epsilon {
                    return Err(ExtremalityError::Block {
                        outcome: o,
                        input: r,
                        source: NumericsError::NotPsd {
                            min_eigenvalue: min,
                            epsilon,
                        },
                    });
                }
            }
            let (_, kernel) = frame.partition(epsilon);
            for u in &kernel {
                let images: Vec<_> = hermitian_basis.iter().map(|e| e.apply(u)).collect();
                for i in 0..d {
                    let mut re = vec![0.0; n_params];
                    let mut im = vec![0.0; n_params];
                    for (k, img) in images.iter().enumerate() {
                        re[param(o, r, k)] = img[i].re;
                        im[param(o, r, k)] = img[i].im;
                    }
                    rows.push(re);
                    rows.push(im);
                }
            }
        }
    }

    let m = RMatrix::from_fn(rows.len(), n_params, |i, j| rows[i][j]);
    let basis = real_nullspace(&m, epsilon)
        .into_iter()
        .filter_map(|x| {
            let blocks = (0..n_blocks)
                .map(|b| {
                    real_vec_to_hermitian(d, &x.as_slice()[b * d2..(b + 1) * d2])
                        .expect("length d²")
                })
                .collect();
            Perturbation::from_flat(d, n, n_inputs, blocks).normalized()
        })
        .collect();
    Ok(basis)
}

/// Extremality from the raw perturbation equations (no eigenvector families).
pub fn is_extremal_direct(sigma: &Assemblage, epsilon: f64) -> Result<bool, ExtremalityError> {
    sigma.ensure_valid(epsilon)?;
    Ok(direct_perturbation_basis(sigma, epsilon)?.is_empty())
}
