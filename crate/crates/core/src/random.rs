//! Random states, measurements and assemblages for property tests and
//! benchmarks. Every assemblage is produced by measuring a bipartite state,
//! so it is valid by construction.

use nalgebra::QR;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::assemblage::Assemblage;
use crate::numerics::{CMatrix, CVector, HermitianOperator};

/// Standard complex Gaussian matrix.
pub fn ginibre<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        let (a, b): (f64, f64) = (gaussian(rng), gaussian(rng));
        Complex64::new(a, b) * std::f64::consts::FRAC_1_SQRT_2
    })
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, d: usize) -> CMatrix {
    QR::new(ginibre(rng, d, d)).q()
}

pub fn random_state_vector<R: Rng + ?Sized>(rng: &mut R, d: usize) -> CVector {
    let v: CVector = ginibre(rng, d, 1).column(0).into_owned();
    let norm = v.norm();
    v / Complex64::new(norm, 0.0)
}

/// Random density matrix of the given rank (`G G† / Tr`).
pub fn random_density<R: Rng + ?Sized>(rng: &mut R, d: usize, rank: usize) -> HermitianOperator {
    let g = ginibre(rng, d, rank.max(1));
    let m = &g * g.adjoint();
    let tr: f64 = m.diagonal().iter().map(|z| z.re).sum();
    HermitianOperator::new(m / Complex64::new(tr, 0.0)).expect("G G† is Hermitian")
}

/// Random Hermitian matrix with Gaussian entries.
pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, d: usize) -> HermitianOperator {
    let g = ginibre(rng, d, d);
    HermitianOperator::new((&g + g.adjoint()) * Complex64::new(0.5, 0.0)).expect("Hermitian")
}

/// POVM with effect `n` of rank `ranks[n]`, built as `S^{-1/2} G_n G_n† S^{-1/2}`.
/// Requires `Σ ranks ≥ d`.
pub fn random_povm<R: Rng + ?Sized>(
    rng: &mut R,
    d: usize,
    ranks: &[usize],
) -> Vec<HermitianOperator> {
    assert!(
        ranks.iter().sum::<usize>() >= d,
        "effects cannot sum to identity"
    );
    let raw: Vec<CMatrix> = ranks
        .iter()
        .map(|&k| {
            if k == 0 {
                CMatrix::zeros(d, d)
            } else {
                let g = ginibre(rng, d, k);
                &g * g.adjoint()
            }
        })
        .collect();
    let total = HermitianOperator::new(raw.iter().fold(CMatrix::zeros(d, d), |acc, m| acc + m))
        .expect("sum of PSD matrices");
    let frame = total.eig();
    let mut inv_sqrt = CMatrix::zeros(d, d);
    for (l, v) in frame.values.iter().zip(&frame.vectors) {
        inv_sqrt += v * v.adjoint() * Complex64::new(1.0 / l.sqrt(), 0.0);
    }
    raw.iter()
        .map(|m| {
            HermitianOperator::new(&inv_sqrt * m * &inv_sqrt).expect("congruence is Hermitian")
        })
        .collect()
}

/// Projective measurement: the columns of a random unitary split into `n`
/// consecutive groups of random size (groups may be empty).
pub fn random_projective<R: Rng + ?Sized>(
    rng: &mut R,
    d: usize,
    n: usize,
) -> Vec<HermitianOperator> {
    let u = random_unitary(rng, d);
    let mut owner: Vec<usize> = (0..d).map(|_| rng.random_range(0..n)).collect();
    owner.sort_unstable();
    (0..n)
        .map(|k| {
            let mut m = CMatrix::zeros(d, d);
            for (col, _) in owner.iter().enumerate().filter(|(_, &o)| o == k) {
                let v = u.column(col);
                m += v * v.adjoint();
            }
            HermitianOperator::new(m).expect("projector")
        })
        .collect()
}

/// Families of random assemblages used by the oracle-equivalence suites.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    /// Full-rank state, full-rank effects.
    FullRank,
    /// Low-rank state and/or projective measurements with uneven ranks.
    RankDeficient,
    /// Rank-one projective measurements on a pure state; extremal for
    /// generic bases whenever there are at least two inputs.
    PureProjective,
    /// Every input deterministic on the same pure state; always extremal.
    Deterministic,
}

impl Family {
    pub const ALL: [Family; 4] = [
        Family::FullRank,
        Family::RankDeficient,
        Family::PureProjective,
        Family::Deterministic,
    ];
}

/// Random valid assemblage on `C^dim` with the given numbers of outcomes and
/// inputs.
pub fn random_assemblage<R: Rng + ?Sized>(
    rng: &mut R,
    family: Family,
    dim: usize,
    n_outcomes: usize,
    n_inputs: usize,
) -> Assemblage {
    let eps = 1e-8;
    match family {
        Family::FullRank => {
            let dim_a = rng.random_range(1..=3usize);
            let rho = random_density(rng, dim_a * dim, dim_a * dim);
            let meas: Vec<_> = (0..n_inputs)
                .map(|_| {
                    let ranks = vec![dim_a; n_outcomes];
                    random_povm(rng, dim_a, &ranks)
                })
                .collect();
            Assemblage::from_state_and_measurements(&rho, dim_a, &meas, eps).expect("valid")
        }
        Family::RankDeficient => {
            let dim_a = rng.random_range(1..=3usize);
            let rank = rng.random_range(1..=(dim_a * dim));
            let rho = random_density(rng, dim_a * dim, rank);
            let meas: Vec<_> = (0..n_inputs)
                .map(|_| {
                    if rng.random_bool(0.5) {
                        random_projective(rng, dim_a, n_outcomes)
                    } else {
                        let mut ranks: Vec<usize> = (0..n_outcomes)
                            .map(|_| rng.random_range(0..=dim_a))
                            .collect();
                        if ranks.iter().sum::<usize>() < dim_a {
                            ranks[0] = dim_a;
                        }
                        random_povm(rng, dim_a, &ranks)
                    }
                })
                .collect();
            Assemblage::from_state_and_measurements(&rho, dim_a, &meas, eps).expect("valid")
        }
        Family::PureProjective => {
            let dim_a = dim;
            let psi = random_state_vector(rng, dim_a * dim);
            let rho = HermitianOperator::projector(&psi);
            let meas: Vec<_> = (0..n_inputs)
                .map(|_| {
                    let u = random_unitary(rng, dim_a);
                    (0..n_outcomes)
                        .map(|k| {
                            // Rank-one effects on the first outcomes; the last
                            // outcome absorbs any leftover columns.
                            let mut m = CMatrix::zeros(dim_a, dim_a);
                            for col in 0..dim_a {
                                let owner = col.min(n_outcomes - 1);
                                if owner == k {
                                    let v = u.column(col);
                                    m += v * v.adjoint();
                                }
                            }
                            HermitianOperator::new(m).expect("projector")
                        })
                        .collect()
                })
                .collect();
            Assemblage::from_state_and_measurements(&rho, dim_a, &meas, eps).expect("valid")
        }
        Family::Deterministic => {
            let phi = HermitianOperator::projector(&random_state_vector(rng, dim));
            let grid = (0..n_inputs)
                .map(|_| {
                    let hit = rng.random_range(0..n_outcomes);
                    (0..n_outcomes)
                        .map(|n| {
                            if n == hit {
                                phi.clone()
                            } else {
                                HermitianOperator::zeros(dim)
                            }
                        })
                        .collect()
                })
                .collect();
            Assemblage::new(grid).expect("shape")
        }
    }
}

/// A random perturbation of `sigma`: a random combination of the directly
/// computed perturbation basis, or `None` when `sigma` is extremal.
pub fn random_perturbation<R: Rng + ?Sized>(
    rng: &mut R,
    sigma: &Assemblage,
    epsilon: f64,
) -> Option<crate::perturbation::Perturbation> {
    let basis = crate::extremality::direct_perturbation_basis(sigma, epsilon).ok()?;
    let first = basis.first()?;
    let mut acc = first.scaled(gaussian(rng));
    for p in &basis[1..] {
        let c = gaussian(rng);
        let blocks = acc
            .blocks()
            .iter()
            .zip(p.blocks())
            .map(|(a, b)| a.plus_scaled(b, c))
            .collect();
        acc = crate::perturbation::Perturbation::from_flat(
            sigma.dim(),
            sigma.n_outcomes(),
            sigma.n_inputs(),
            blocks,
        );
    }
    acc.normalized()
}
