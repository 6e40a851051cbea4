//! Recursive decomposition of an assemblage into extremal assemblages.
//!
//! Each node holds an assemblage `σ`, its weight `p`, and a cursor `x` over
//! inputs. While `x > 0` the node looks for a perturbation with zero marginal
//! supported on input `x - 1`; if there is none the cursor moves down. At
//! `x = 0` it looks for a marginal-changing perturbation over all inputs, and
//! if none exists `σ` is extremal and becomes a leaf. A perturbation `D` is
//! pushed to its maximal weights `w±` in both directions, and the node splits
//! into `σ + w₊D` (weight `p·w₋/(w₊+w₋)`) and `σ - w₋D` (weight
//! `p·w₊/(w₊+w₋)`), both keeping the same cursor.
//!
//! The maximal weights are exact: on the support `V` of a block with positive
//! eigenvalues `Λ`, `σ + wD ⪰ 0` iff `I + w Λ^{-1/2} V†DV Λ^{-1/2} ⪰ 0`.

use std::sync::atomic::{AtomicUsize, Ordering};

use thiserror::Error;

use crate::assemblage::{Assemblage, AssemblageError};
use crate::exec::Execution;
use crate::extremality::{
    hermitian_basis_for_input, joint_constraint_matrix, perturbation_from_coefficients,
    zero_marginal_nullspace, ExtremalityError,
};
use crate::format;
use crate::numerics::{real_nullspace, CMatrix, HermitianOperator, DEFAULT_EPSILON};
pub use crate::perturbation::{Perturbation, PerturbationCheck};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecompositionError {
    #[error(transparent)]
    Extremality(#[from] ExtremalityError),
    #[error(transparent)]
    Assemblage(#[from] AssemblageError),
    #[error("perturbation leaves the support of block (outcome {outcome}, input {input}): |D u| = {leak:.3e} on a kernel vector")]
    CokernelViolation {
        outcome: usize,
        input: usize,
        leak: f64,
    },
    #[error("perturbation has no finite maximal weight in the {direction} direction")]
    UnboundedWeight { direction: &'static str },
    #[error("split at depth {depth} did not lower the total rank ({before} -> {plus} / {minus})")]
    NoRankDrop {
        depth: usize,
        before: usize,
        plus: usize,
        minus: usize,
    },
}

/// Largest `w₊, w₋ ≥ 0` with `σ + w₊D ⪰ 0` and `σ - w₋D ⪰ 0` blockwise.
pub fn max_weights(
    sigma: &Assemblage,
    d: &Perturbation,
    epsilon: f64,
) -> Result<(f64, f64), DecompositionError> {
    let leak_tol = 10.0 * epsilon * d.max_block_norm().max(1.0);
    let mut w_plus = f64::INFINITY;
    let mut w_minus = f64::INFINITY;
    for input in 0..sigma.n_inputs() {
        for outcome in 0..sigma.n_outcomes() {
            let block = sigma.block(outcome, input);
            let pert = d.block(outcome, input);
            let (support, kernel) = block.eig().partition(epsilon);
            let leak = kernel
                .iter()
                .map(|u| pert.apply(u).norm())
                .fold(0.0, f64::max);
            if leak > leak_tol {
                return Err(DecompositionError::CokernelViolation {
                    outcome,
                    input,
                    leak,
                });
            }
            if support.is_empty() {
                continue;
            }
            let v = support.vector_matrix(sigma.dim());
            let inv_sqrt: Vec<f64> = support.values.iter().map(|l| 1.0 / l.sqrt()).collect();
            let local = pert.congruence(&v);
            let k = support.len();
            let scaled = CMatrix::from_fn(k, k, |a, b| {
                local.matrix()[(a, b)] * (inv_sqrt[a] * inv_sqrt[b])
            });
            let pencil = HermitianOperator::new(scaled).expect("congruence of a Hermitian block");
            let eigs = pencil.eig().values;
            let (mu_max, mu_min) = (eigs[0], eigs[k - 1]);
            // 1 + w μ ≥ 0 for every eigenvalue μ of the pencil.
            if -mu_min > PENCIL_TINY {
                w_plus = w_plus.min(-1.0 / mu_min);
            }
            if mu_max > PENCIL_TINY {
                w_minus = w_minus.min(1.0 / mu_max);
            }
        }
    }
    if !w_plus.is_finite() {
        return Err(DecompositionError::UnboundedWeight { direction: "+" });
    }
    if !w_minus.is_finite() {
        return Err(DecompositionError::UnboundedWeight { direction: "-" });
    }
    Ok((w_plus, w_minus))
}

const PENCIL_TINY: f64 = 1e-12;

/// The two children of a maximal split, with their relative weights.
#[derive(Clone, Debug)]
pub struct Split {
    pub plus: Assemblage,
    pub minus: Assemblage,
    pub p_plus: f64,
    pub p_minus: f64,
    pub w_plus: f64,
    pub w_minus: f64,
}

pub fn split(
    sigma: &Assemblage,
    d: &Perturbation,
    epsilon: f64,
) -> Result<Split, DecompositionError> {
    let (w_plus, w_minus) = max_weights(sigma, d, epsilon)?;
    let plus = sigma
        .apply_perturbation(d, w_plus, epsilon)?
        .renormalized(epsilon);
    let minus = sigma
        .apply_perturbation(d, -w_minus, epsilon)?
        .renormalized(epsilon);
    let total = w_plus + w_minus;
    Ok(Split {
        plus,
        minus,
        p_plus: w_minus / total,
        p_minus: w_plus / total,
        w_plus,
        w_minus,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    Plus,
    Minus,
}

#[derive(Clone, Debug)]
pub struct DecomposeOptions {
    pub epsilon: f64,
    pub max_leaves: usize,
    /// Defaults to `4 N R d` when `None`.
    pub max_depth: Option<usize>,
    /// Blockwise Frobenius tolerance for merging equivalent leaves.
    pub merge_tol: f64,
    pub execution: Execution,
    /// Check every split perturbation against its assemblage and report the
    /// worst residual in the stats.
    pub check_perturbations: bool,
}

impl Default for DecomposeOptions {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            max_leaves: 100_000,
            max_depth: None,
            merge_tol: 1e-6,
            execution: Execution::default(),
            check_perturbations: false,
        }
    }
}

impl DecomposeOptions {
    pub fn max_depth_for(&self, sigma: &Assemblage) -> usize {
        self.max_depth
            .unwrap_or(4 * sigma.n_outcomes() * sigma.n_inputs() * sigma.dim())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeightedAssemblage {
    pub weight: f64,
    pub assemblage: Assemblage,
}

#[derive(Clone, Debug)]
pub struct TreeLeaf {
    pub weight: f64,
    pub assemblage: Assemblage,
    /// Branches taken from the root.
    pub path: Vec<Side>,
}

/// The first split of the recursion.
#[derive(Clone, Debug)]
pub struct RootSplit {
    /// Input cursor at which it happened; 0 means marginal-changing.
    pub cursor: usize,
    pub w_plus: f64,
    pub w_minus: f64,
    pub p_plus: f64,
    pub p_minus: f64,
    pub marginal_plus: HermitianOperator,
    pub marginal_minus: HermitianOperator,
}

#[derive(Clone, Debug, Default)]
pub struct DecompositionStats {
    /// Assemblages visited.
    pub nodes: usize,
    pub splits: usize,
    pub max_depth: usize,
    /// Leaves before merging.
    pub raw_leaves: usize,
    pub merges: usize,
    /// Worst relative residual over all split perturbations (only when
    /// `check_perturbations` is set).
    pub max_perturbation_residual: f64,
    pub root_split: Option<RootSplit>,
}

/// Leaves in tree order (plus side before minus side), before merging.
#[derive(Clone, Debug)]
pub struct DecompositionTree {
    pub leaves: Vec<TreeLeaf>,
    /// Nodes left unexpanded because a limit was hit.
    pub pending: Vec<TreeLeaf>,
    pub stats: DecompositionStats,
    pub truncated: bool,
}

#[derive(Clone, Debug)]
pub struct DecompositionResult {
    pub leaves: Vec<WeightedAssemblage>,
    pub pending: Vec<WeightedAssemblage>,
    pub stats: DecompositionStats,
    pub truncated: bool,
}

impl DecompositionResult {
    pub fn total_weight(&self) -> f64 {
        self.leaves
            .iter()
            .chain(&self.pending)
            .map(|l| l.weight)
            .sum()
    }

    /// Max blockwise Frobenius distance between `Σ w_i leaf_i` (pending nodes
    /// included) and `input`.
    pub fn reconstruction_residual(&self, input: &Assemblage) -> f64 {
        reconstruction_residual(
            input,
            self.leaves
                .iter()
                .chain(&self.pending)
                .map(|l| (l.weight, &l.assemblage)),
        )
    }
}

pub fn reconstruction_residual<'a, I>(input: &Assemblage, terms: I) -> f64
where
    I: IntoIterator<Item = (f64, &'a Assemblage)>,
{
    match Assemblage::weighted_sum(terms) {
        Some(sum) => sum.max_block_distance(input),
        None => f64::INFINITY,
    }
}

#[derive(Default)]
struct Subtree {
    leaves: Vec<TreeLeaf>,
    pending: Vec<TreeLeaf>,
    nodes: usize,
    splits: usize,
    max_depth: usize,
    truncated: bool,
    max_residual: f64,
    root_split: Option<RootSplit>,
}

impl Subtree {
    fn join(mut self, other: Subtree) -> Subtree {
        self.leaves.extend(other.leaves);
        self.pending.extend(other.pending);
        self.nodes += other.nodes;
        self.splits += other.splits;
        self.max_depth = self.max_depth.max(other.max_depth);
        self.truncated |= other.truncated;
        self.max_residual = self.max_residual.max(other.max_residual);
        self
    }
}

struct Decomposer<'a> {
    opts: &'a DecomposeOptions,
    execution: Execution,
    max_depth: usize,
    leaf_count: AtomicUsize,
}

impl Decomposer<'_> {
    fn find_perturbation(
        &self,
        sigma: &Assemblage,
        cursor: usize,
    ) -> Result<Option<Perturbation>, DecompositionError> {
        let eps = self.opts.epsilon;
        let (m_null, elements) = if cursor > 0 {
            let elements = hermitian_basis_for_input(sigma, cursor - 1, eps)?;
            (
                zero_marginal_nullspace(sigma.dim(), &elements, eps),
                elements,
            )
        } else {
            let (m, elements) = joint_constraint_matrix(sigma, eps)?;
            (real_nullspace(&m, eps), elements)
        };
        Ok(m_null.first().and_then(|c| {
            perturbation_from_coefficients(sigma, &elements, c.as_slice()).normalized()
        }))
    }

    fn node(
        &self,
        sigma: Assemblage,
        weight: f64,
        mut cursor: usize,
        depth: usize,
        path: Vec<Side>,
    ) -> Result<Subtree, DecompositionError> {
        let d = loop {
            match self.find_perturbation(&sigma, cursor)? {
                Some(d) => break d,
                None if cursor > 0 => cursor -= 1,
                None => {
                    self.leaf_count.fetch_add(1, Ordering::Relaxed);
                    return Ok(Subtree {
                        leaves: vec![TreeLeaf {
                            weight,
                            assemblage: sigma,
                            path,
                        }],
                        nodes: 1,
                        max_depth: depth,
                        ..Subtree::default()
                    });
                }
            }
        };

        if depth >= self.max_depth
            || self.leaf_count.load(Ordering::Relaxed) >= self.opts.max_leaves
        {
            return Ok(Subtree {
                pending: vec![TreeLeaf {
                    weight,
                    assemblage: sigma,
                    path,
                }],
                nodes: 1,
                max_depth: depth,
                truncated: true,
                ..Subtree::default()
            });
        }

        let eps = self.opts.epsilon;
        let residual = if self.opts.check_perturbations {
            d.check(&sigma, eps).worst_residual()
        } else {
            0.0
        };
        let s = split(&sigma, &d, eps)?;
        let before = sigma.total_rank(eps);
        let (rank_plus, rank_minus) = (s.plus.total_rank(eps), s.minus.total_rank(eps));
        if rank_plus >= before || rank_minus >= before {
            return Err(DecompositionError::NoRankDrop {
                depth,
                before,
                plus: rank_plus,
                minus: rank_minus,
            });
        }

        let root_split = path.is_empty().then(|| RootSplit {
            cursor,
            w_plus: s.w_plus,
            w_minus: s.w_minus,
            p_plus: s.p_plus,
            p_minus: s.p_minus,
            marginal_plus: s.plus.marginal(),
            marginal_minus: s.minus.marginal(),
        });
        let mut path_plus = path.clone();
        path_plus.push(Side::Plus);
        let mut path_minus = path;
        path_minus.push(Side::Minus);
        let (w_plus, w_minus) = (weight * s.p_plus, weight * s.p_minus);
        let (plus, minus) = (s.plus, s.minus);

        let (left, right) = self.execution.join(
            || self.node(plus, w_plus, cursor, depth + 1, path_plus),
            || self.node(minus, w_minus, cursor, depth + 1, path_minus),
        );
        let mut out = Subtree {
            nodes: 1,
            splits: 1,
            max_depth: depth,
            max_residual: residual,
            root_split,
            ..Subtree::default()
        };
        out = out.join(left?).join(right?);
        Ok(out)
    }
}

/// Runs the recursion and returns leaves in tree order, without merging.
///
/// If a limit truncates a parallel run, the run is repeated sequentially so
/// that the partial result is reproducible.
pub fn decompose_tree(
    sigma: &Assemblage,
    opts: &DecomposeOptions,
) -> Result<DecompositionTree, DecompositionError> {
    sigma.ensure_valid(opts.epsilon)?;
    let run = |execution: Execution| {
        let worker = Decomposer {
            opts,
            execution,
            max_depth: opts.max_depth_for(sigma),
            leaf_count: AtomicUsize::new(0),
        };
        worker.node(sigma.clone(), 1.0, sigma.n_inputs(), 0, Vec::new())
    };
    let mut sub = run(opts.execution)?;
    if sub.truncated && opts.execution.is_parallel() {
        sub = run(Execution::Sequential)?;
    }
    Ok(DecompositionTree {
        stats: DecompositionStats {
            nodes: sub.nodes,
            splits: sub.splits,
            max_depth: sub.max_depth,
            raw_leaves: sub.leaves.len(),
            merges: 0,
            max_perturbation_residual: sub.max_residual,
            root_split: sub.root_split,
        },
        leaves: sub.leaves,
        pending: sub.pending,
        truncated: sub.truncated,
    })
}

/// Decomposes `sigma` into weighted extremal assemblages, merging leaves that
/// agree blockwise within `opts.merge_tol`.
pub fn decompose(
    sigma: &Assemblage,
    opts: &DecomposeOptions,
) -> Result<DecompositionResult, DecompositionError> {
    let tree = decompose_tree(sigma, opts)?;
    let raw = tree
        .leaves
        .into_iter()
        .map(|l| WeightedAssemblage {
            weight: l.weight,
            assemblage: l.assemblage,
        })
        .collect();
    let (leaves, merges) = merge_equivalent(raw, opts.merge_tol);
    let mut stats = tree.stats;
    stats.merges = merges;
    Ok(DecompositionResult {
        leaves,
        pending: tree
            .pending
            .into_iter()
            .map(|l| WeightedAssemblage {
                weight: l.weight,
                assemblage: l.assemblage,
            })
            .collect(),
        stats,
        truncated: tree.truncated,
    })
}

/// Merges leaves whose blocks all agree within `tol` (Frobenius), summing
/// their weights. Each group keeps its earliest member; the output is sorted
/// by the serialized form of the kept assemblage. Returns the merged list and
/// the number of merges performed.
pub fn merge_equivalent(
    leaves: Vec<WeightedAssemblage>,
    tol: f64,
) -> (Vec<WeightedAssemblage>, usize) {
    let n = leaves.len();
    if n == 0 {
        return (leaves, 0);
    }
    // Sweep over a Lipschitz key: if every block is within `tol`, keys differ
    // by at most `window`.
    let key = |a: &Assemblage| -> f64 {
        a.blocks()
            .iter()
            .enumerate()
            .map(|(i, b)| (i + 1) as f64 * (b.trace() + b.matrix()[(0, 0)].re))
            .sum()
    };
    let first = &leaves[0].assemblage;
    let n_blocks = first.blocks().len() as f64;
    let window = tol * ((first.dim() as f64).sqrt() + 1.0) * n_blocks * (n_blocks + 1.0) / 2.0;

    let keys: Vec<f64> = leaves.iter().map(|l| key(&l.assemblage)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| keys[a].total_cmp(&keys[b]).then(a.cmp(&b)));

    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for (pos, &i) in order.iter().enumerate() {
        for &j in &order[pos + 1..] {
            if keys[j] - keys[i] > window {
                break;
            }
            let close = leaves[i]
                .assemblage
                .blocks()
                .iter()
                .zip(leaves[j].assemblage.blocks())
                .all(|(a, b)| a.frobenius_distance(b) <= tol);
            if close {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    // Keep the earliest member as the root.
                    let (lo, hi) = if ri < rj { (ri, rj) } else { (rj, ri) };
                    parent[hi] = lo;
                }
            }
        }
    }

    let mut weights = vec![0.0; n];
    let mut roots = Vec::new();
    for (i, leaf) in leaves.iter().enumerate() {
        let r = find(&mut parent, i);
        if r == i {
            roots.push(i);
        }
        weights[r] += leaf.weight;
    }
    let merges = n - roots.len();
    let mut out: Vec<(String, WeightedAssemblage)> = roots
        .into_iter()
        .map(|r| {
            (
                format::canonical_text(&leaves[r].assemblage),
                WeightedAssemblage {
                    weight: weights[r],
                    assemblage: leaves[r].assemblage.clone(),
                },
            )
        })
        .collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    (out.into_iter().map(|(_, l)| l).collect(), merges)
}
