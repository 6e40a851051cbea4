//! JSON file formats for assemblages and decomposition results.
//!
//! Blocks are nested `[input][outcome][row][col]`, each entry `[re, im]`.
//! Numbers are written with 17 significant digits so parse/serialize round
//! trips are exact.

use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::assemblage::{Assemblage, AssemblageError};
use crate::decomposition::{DecompositionResult, WeightedAssemblage};
use crate::numerics::{hermiticity_deviation, CMatrix, HermitianOperator};
use crate::perturbation::Perturbation;

pub const FORMAT_VERSION: &str = "1";

pub type BlockGrid = Vec<Vec<Vec<Vec<[f64; 2]>>>>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormatError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unsupported format_version {0:?} (expected \"1\")")]
    Version(String),
    #[error("shape: {0}")]
    Shape(String),
}

impl From<serde_json::Error> for FormatError {
    fn from(e: serde_json::Error) -> Self {
        let message = e.to_string();
        // Strip serde_json's own " at line L column C" suffix.
        let message = match message.rfind(" at line ") {
            Some(i) => message[..i].to_string(),
            None => message,
        };
        FormatError::Syntax {
            line: e.line(),
            column: e.column(),
            message,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssemblageFile {
    pub format_version: String,
    pub dim: usize,
    pub n_outcomes: usize,
    pub n_inputs: usize,
    pub blocks: BlockGrid,
}

/// Parsed blocks before any Hermiticity check, indexed `[input][outcome]`.
#[derive(Clone, Debug, PartialEq)]
pub struct RawAssemblage {
    pub dim: usize,
    pub n_outcomes: usize,
    pub n_inputs: usize,
    pub blocks: Vec<Vec<CMatrix>>,
}

impl RawAssemblage {
    /// Largest entrywise `|σ_ij - conj(σ_ji)|` over all blocks, with its
    /// `(outcome, input)`.
    pub fn hermiticity_residual(&self) -> (f64, (usize, usize)) {
        let mut worst = (0.0, (0, 0));
        for (r, row) in self.blocks.iter().enumerate() {
            for (n, m) in row.iter().enumerate() {
                let dev = hermiticity_deviation(m);
                if dev > worst.0 {
                    worst = (dev, (n, r));
                }
            }
        }
        worst
    }

    pub fn to_assemblage(&self) -> Result<Assemblage, AssemblageError> {
        let grid = self
            .blocks
            .iter()
            .map(|row| {
                row.iter()
                    .map(|m| HermitianOperator::new(m.clone()))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        Assemblage::new(grid)
    }
}

fn grid_to_matrices(
    grid: &BlockGrid,
    dim: usize,
    n_outcomes: usize,
    n_inputs: usize,
) -> Result<Vec<Vec<CMatrix>>, FormatError> {
    if dim == 0 || n_outcomes == 0 || n_inputs == 0 {
        return Err(FormatError::Shape(
            "dim, n_outcomes and n_inputs must be positive".into(),
        ));
    }
    if grid.len() != n_inputs {
        return Err(FormatError::Shape(format!(
            "blocks has {} inputs, n_inputs is {n_inputs}",
            grid.len()
        )));
    }
    grid.iter()
        .enumerate()
        .map(|(r, row)| {
            if row.len() != n_outcomes {
                return Err(FormatError::Shape(format!(
                    "input {r} has {} outcomes, n_outcomes is {n_outcomes}",
                    row.len()
                )));
            }
            row.iter()
                .enumerate()
                .map(|(n, block)| {
                    let square = block.len() == dim && block.iter().all(|line| line.len() == dim);
                    if !square {
                        return Err(FormatError::Shape(format!(
                            "block (outcome {n}, input {r}) is not {dim}x{dim}"
                        )));
                    }
                    Ok(CMatrix::from_fn(dim, dim, |i, j| {
                        let [re, im] = block[i][j];
                        Complex64::new(re, im)
                    }))
                })
                .collect()
        })
        .collect()
}

fn matrix_to_grid(m: &CMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|i| {
            (0..m.ncols())
                .map(|j| [m[(i, j)].re, m[(i, j)].im])
                .collect()
        })
        .collect()
}

fn ops_to_grid(ops: &[HermitianOperator], n_outcomes: usize) -> BlockGrid {
    ops.chunks(n_outcomes)
        .map(|input| input.iter().map(|b| matrix_to_grid(b.matrix())).collect())
        .collect()
}

pub fn parse_assemblage(text: &str) -> Result<RawAssemblage, FormatError> {
    let file: AssemblageFile = serde_json::from_str(text)?;
    if file.format_version != FORMAT_VERSION {
        return Err(FormatError::Version(file.format_version));
    }
    let blocks = grid_to_matrices(&file.blocks, file.dim, file.n_outcomes, file.n_inputs)?;
    Ok(RawAssemblage {
        dim: file.dim,
        n_outcomes: file.n_outcomes,
        n_inputs: file.n_inputs,
        blocks,
    })
}

/// A JSON tree with explicit number formatting.
enum Node {
    Obj(Vec<(&'static str, Node)>),
    Arr(Vec<Node>),
    Num(f64),
    Int(usize),
    Str(String),
    Bool(bool),
}

fn num(x: f64) -> String {
    if x == 0.0 {
        // Normalizes -0.
        return "0.0000000000000000e0".into();
    }
    format!("{x:.16e}")
}

impl Node {
    fn inline(&self) -> bool {
        match self {
            Node::Obj(_) => false,
            Node::Arr(items) => items.iter().all(|i| match i {
                Node::Arr(inner) => inner
                    .iter()
                    .all(|x| !matches!(x, Node::Arr(_) | Node::Obj(_))),
                Node::Obj(_) => false,
                _ => true,
            }),
            _ => true,
        }
    }

    fn write(&self, out: &mut String, indent: usize) {
        let pad = |out: &mut String, k: usize| out.extend(std::iter::repeat_n(' ', k));
        match self {
            Node::Num(x) => out.push_str(&num(*x)),
            Node::Int(i) => {
                let _ = write!(out, "{i}");
            }
            Node::Bool(b) => {
                let _ = write!(out, "{b}");
            }
            Node::Str(s) => out.push_str(&serde_json::to_string(s).expect("string")),
            Node::Arr(items) if items.is_empty() => out.push_str("[]"),
            Node::Arr(items) if self.inline() => {
                out.push('[');
                for (k, item) in items.iter().enumerate() {
                    if k > 0 {
                        out.push_str(", ");
                    }
                    item.write(out, indent);
                }
                out.push(']');
            }
            Node::Arr(items) => {
                out.push_str("[\n");
                for (k, item) in items.iter().enumerate() {
                    pad(out, indent + 2);
                    item.write(out, indent + 2);
                    out.push_str(if k + 1 < items.len() { ",\n" } else { "\n" });
                }
                pad(out, indent);
                out.push(']');
            }
            Node::Obj(fields) => {
                out.push_str("{\n");
                for (k, (name, value)) in fields.iter().enumerate() {
                    pad(out, indent + 2);
                    let _ = write!(out, "\"{name}\": ");
                    value.write(out, indent + 2);
                    out.push_str(if k + 1 < fields.len() { ",\n" } else { "\n" });
                }
                pad(out, indent);
                out.push('}');
            }
        }
    }

    fn render(&self) -> String {
        let mut out = String::new();
        self.write(&mut out, 0);
        out.push('\n');
        out
    }
}

fn grid_node(ops: &[HermitianOperator], n_outcomes: usize) -> Node {
    Node::Arr(
        ops.chunks(n_outcomes)
            .map(|input| {
                Node::Arr(
                    input
                        .iter()
                        .map(|b| {
                            let m = b.matrix();
                            Node::Arr(
                                (0..m.nrows())
                                    .map(|i| {
                                        Node::Arr(
                                            (0..m.ncols())
                                                .map(|j| {
                                                    Node::Arr(vec![
                                                        Node::Num(m[(i, j)].re),
                                                        Node::Num(m[(i, j)].im),
                                                    ])
                                                })
                                                .collect(),
                                        )
                                    })
                                    .collect(),
                            )
                        })
                        .collect(),
                )
            })
            .collect(),
    )
}

fn operator_node(op: &HermitianOperator) -> Node {
    grid_node(std::slice::from_ref(op), 1)
}

fn file_node(dim: usize, n_outcomes: usize, n_inputs: usize, ops: &[HermitianOperator]) -> Node {
    Node::Obj(vec![
        ("format_version", Node::Str(FORMAT_VERSION.into())),
        ("dim", Node::Int(dim)),
        ("n_outcomes", Node::Int(n_outcomes)),
        ("n_inputs", Node::Int(n_inputs)),
        ("blocks", grid_node(ops, n_outcomes)),
    ])
}

pub fn assemblage_to_json(sigma: &Assemblage) -> String {
    file_node(
        sigma.dim(),
        sigma.n_outcomes(),
        sigma.n_inputs(),
        sigma.blocks(),
    )
    .render()
}

/// Same layout as an assemblage file.
pub fn perturbation_to_json(d: &Perturbation) -> String {
    file_node(d.dim(), d.n_outcomes(), d.n_inputs(), d.blocks()).render()
}

/// Deterministic text used for hashing and ordering.
pub fn canonical_text(sigma: &Assemblage) -> String {
    assemblage_to_json(sigma)
}

/// SHA-256 of the canonical serialization, hex encoded.
pub fn input_hash(sigma: &Assemblage) -> String {
    hex::encode(Sha256::digest(canonical_text(sigma).as_bytes()))
}

pub fn to_file(sigma: &Assemblage) -> AssemblageFile {
    AssemblageFile {
        format_version: FORMAT_VERSION.into(),
        dim: sigma.dim(),
        n_outcomes: sigma.n_outcomes(),
        n_inputs: sigma.n_inputs(),
        blocks: ops_to_grid(sigma.blocks(), sigma.n_outcomes()),
    }
}

fn leaf_nodes(leaves: &[WeightedAssemblage]) -> Node {
    Node::Arr(
        leaves
            .iter()
            .map(|l| {
                Node::Obj(vec![
                    ("weight", Node::Num(l.weight)),
                    (
                        "blocks",
                        grid_node(l.assemblage.blocks(), l.assemblage.n_outcomes()),
                    ),
                ])
            })
            .collect(),
    )
}

/// Serializes a decomposition of `input`. The residual is recomputed from the
/// leaf list (pending nodes included).
pub fn result_to_json(input: &Assemblage, result: &DecompositionResult, epsilon: f64) -> String {
    let stats = &result.stats;
    let mut stat_fields = vec![
        ("nodes", Node::Int(stats.nodes)),
        ("splits", Node::Int(stats.splits)),
        ("max_depth", Node::Int(stats.max_depth)),
        ("raw_leaves", Node::Int(stats.raw_leaves)),
        ("merges", Node::Int(stats.merges)),
        ("leaf_count", Node::Int(result.leaves.len())),
        ("pending_count", Node::Int(result.pending.len())),
    ];
    if let Some(rs) = &stats.root_split {
        stat_fields.push((
            "root_split",
            Node::Obj(vec![
                ("cursor", Node::Int(rs.cursor)),
                ("w_plus", Node::Num(rs.w_plus)),
                ("w_minus", Node::Num(rs.w_minus)),
                ("p_plus", Node::Num(rs.p_plus)),
                ("p_minus", Node::Num(rs.p_minus)),
                ("marginal_plus", operator_node(&rs.marginal_plus)),
                ("marginal_minus", operator_node(&rs.marginal_minus)),
            ]),
        ));
    }
    Node::Obj(vec![
        ("format_version", Node::Str(FORMAT_VERSION.into())),
        ("input_hash", Node::Str(input_hash(input))),
        ("dim", Node::Int(input.dim())),
        ("n_outcomes", Node::Int(input.n_outcomes())),
        ("n_inputs", Node::Int(input.n_inputs())),
        ("epsilon", Node::Num(epsilon)),
        ("truncated", Node::Bool(result.truncated)),
        ("residual", Node::Num(result.reconstruction_residual(input))),
        ("total_weight", Node::Num(result.total_weight())),
        ("stats", Node::Obj(stat_fields)),
        ("leaves", leaf_nodes(&result.leaves)),
        ("pending", leaf_nodes(&result.pending)),
    ])
    .render()
}

#[derive(Clone, Debug, Deserialize)]
pub struct LeafFile {
    pub weight: f64,
    pub blocks: BlockGrid,
}

/// Parsed result file.
#[derive(Clone, Debug, Deserialize)]
pub struct ResultFile {
    pub format_version: String,
    pub input_hash: String,
    pub dim: usize,
    pub n_outcomes: usize,
    pub n_inputs: usize,
    pub epsilon: f64,
    pub truncated: bool,
    pub residual: f64,
    pub total_weight: f64,
    pub stats: serde_json::Value,
    pub leaves: Vec<LeafFile>,
    pub pending: Vec<LeafFile>,
}

impl ResultFile {
    pub fn parse(text: &str) -> Result<Self, FormatError> {
        let file: ResultFile = serde_json::from_str(text)?;
        if file.format_version != FORMAT_VERSION {
            return Err(FormatError::Version(file.format_version));
        }
        Ok(file)
    }

    fn convert(&self, leaves: &[LeafFile]) -> Result<Vec<WeightedAssemblage>, FormatError> {
        leaves
            .iter()
            .map(|l| {
                let raw = RawAssemblage {
                    dim: self.dim,
                    n_outcomes: self.n_outcomes,
                    n_inputs: self.n_inputs,
                    blocks: grid_to_matrices(&l.blocks, self.dim, self.n_outcomes, self.n_inputs)?,
                };
                let assemblage = raw
                    .to_assemblage()
                    .map_err(|e| FormatError::Shape(e.to_string()))?;
                Ok(WeightedAssemblage {
                    weight: l.weight,
                    assemblage,
                })
            })
            .collect()
    }

    pub fn leaf_assemblages(&self) -> Result<Vec<WeightedAssemblage>, FormatError> {
        self.convert(&self.leaves)
    }

    pub fn pending_assemblages(&self) -> Result<Vec<WeightedAssemblage>, FormatError> {
        self.convert(&self.pending)
    }
}
