//! Dense Hermitian linear algebra: eigendecomposition, numerical support and
//! rank, the real isometric vectorization of Hermitian operators, and real
//! nullspaces.
//!
//! Everything here is a pure function of its inputs. The heavy lifting is done
//! by `nalgebra` (Hermitian eigensolver and SVD); this module fixes the
//! conventions the rest of the crate relies on: descending eigenvalue order,
//! the ε-rank rule, the vectorization layout, and a deterministic nullspace
//! basis.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use num_complex::Complex64;
use thiserror::Error;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;
pub type RMatrix = DMatrix<f64>;
pub type RVector = DVector<f64>;

/// Eigenvalues (and relative singular values) at or below this are zero.
pub const DEFAULT_EPSILON: f64 = 1e-8;

/// Entrywise deviation from Hermiticity accepted when building an operator,
/// relative to `max(1, max |H_ij|)`.
pub const HERMITICITY_TOL: f64 = 1e-10;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("matrix is {rows}x{cols}; expected a non-empty square matrix")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix contains a non-finite entry")]
    NonFinite,
    #[error("matrix is not Hermitian: max |H_ij - conj(H_ji)| = {deviation:.3e}")]
    NotHermitian { deviation: f64 },
    #[error("operator is not positive semidefinite: minimum eigenvalue {min_eigenvalue:.3e} is below -{epsilon:.1e}")]
    NotPsd { min_eigenvalue: f64, epsilon: f64 },
    #[error(
        "real vector of length {len} does not describe a Hermitian operator of dimension {dim}"
    )]
    BadVectorLength { len: usize, dim: usize },
}

/// Largest entrywise `|H_ij - conj(H_ji)|`.
pub fn hermiticity_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows().min(m.ncols());
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// A `d x d` complex Hermitian matrix.
///
/// Every constructor and arithmetic operation re-symmetrizes as `(H + H†)/2`,
/// so the stored matrix is Hermitian to rounding.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOperator {
    matrix: CMatrix,
}

impl HermitianOperator {
    /// Validates squareness, finiteness and Hermiticity, then symmetrizes.
    pub fn new(matrix: CMatrix) -> Result<Self, NumericsError> {
        let (rows, cols) = matrix.shape();
        if rows == 0 || rows != cols {
            return Err(NumericsError::NotSquare { rows, cols });
        }
        if matrix
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(NumericsError::NonFinite);
        }
        let scale = matrix.iter().fold(1.0f64, |acc, z| acc.max(z.norm()));
        let deviation = hermiticity_deviation(&matrix);
        if deviation > HERMITICITY_TOL * scale {
            return Err(NumericsError::NotHermitian { deviation });
        }
        Ok(Self::symmetrized(matrix))
    }

    pub(crate) fn symmetrized(matrix: CMatrix) -> Self {
        let adjoint = matrix.adjoint();
        Self {
            matrix: (matrix + adjoint) * Complex64::new(0.5, 0.0),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            matrix: CMatrix::zeros(dim, dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: CMatrix::identity(dim, dim),
        }
    }

    pub fn from_real_diagonal(diagonal: &[f64]) -> Self {
        let d = diagonal.len();
        let mut m = CMatrix::zeros(d, d);
        for (i, &x) in diagonal.iter().enumerate() {
            m[(i, i)] = Complex64::new(x, 0.0);
        }
        Self { matrix: m }
    }

    /// `|v⟩⟨v|` (not normalized).
    pub fn projector(v: &CVector) -> Self {
        Self::symmetrized(v * v.adjoint())
    }

    /// `(|a⟩⟨b| + |b⟩⟨a|)/√2`
    pub fn symmetric_pair(a: &CVector, b: &CVector) -> Self {
        let ab = a * b.adjoint();
        let m = (&ab + ab.adjoint()) * Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Self::symmetrized(m)
    }

    /// `(|a⟩⟨b| - |b⟩⟨a|)/(√2 i)`
    pub fn antisymmetric_pair(a: &CVector, b: &CVector) -> Self {
        let ab = a * b.adjoint();
        // 1/(√2 i) = -i/√2
        let m = (&ab - ab.adjoint()) * Complex64::new(0.0, -std::f64::consts::FRAC_1_SQRT_2);
        Self::symmetrized(m)
    }

    /// Builds the operator from a density-matrix Bloch vector, `(I + r·σ)/2`.
    pub fn from_bloch(r: [f64; 3]) -> Self {
        let m = CMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(0.5 * (1.0 + r[2]), 0.0),
                Complex64::new(0.5 * r[0], -0.5 * r[1]),
                Complex64::new(0.5 * r[0], 0.5 * r[1]),
                Complex64::new(0.5 * (1.0 - r[2]), 0.0),
            ],
        );
        Self::symmetrized(m)
    }

    /// `(Tr(Hσx), Tr(Hσy), Tr(Hσz))` for a qubit operator.
    pub fn bloch_components(&self) -> Option<[f64; 3]> {
        if self.dim() != 2 {
            return None;
        }
        let m = &self.matrix;
        Some([
            2.0 * m[(0, 1)].re,
            -2.0 * m[(0, 1)].im,
            (m[(0, 0)] - m[(1, 1)]).re,
        ])
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.diagonal().iter().map(|z| z.re).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn frobenius_distance(&self, other: &Self) -> f64 {
        self.matrix
            .iter()
            .zip(other.matrix.iter())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// `Re Tr(A B)`, the Hilbert-Schmidt inner product of Hermitian operators.
    pub fn inner(&self, other: &Self) -> f64 {
        self.matrix
            .iter()
            .zip(other.matrix.iter())
            .map(|(a, b)| (a.conj() * b).re)
            .sum()
    }

    /// `self + w * other`
    pub fn plus_scaled(&self, other: &Self, w: f64) -> Self {
        Self::symmetrized(&self.matrix + &other.matrix * Complex64::new(w, 0.0))
    }

    /// Transpose in the computational basis (entrywise conjugate).
    pub fn transpose(&self) -> Self {
        Self {
            matrix: self.matrix.transpose(),
        }
    }

    /// `A† H A` for an arbitrary (possibly rectangular) `A`.
    pub fn congruence(&self, a: &CMatrix) -> Self {
        Self::symmetrized(a.adjoint() * &self.matrix * a)
    }

    /// Zero-pads to `dim x dim`, keeping the existing entries in the leading block.
    pub fn padded(&self, dim: usize) -> Self {
        assert!(dim >= self.dim(), "padding cannot shrink an operator");
        let mut m = CMatrix::zeros(dim, dim);
        m.view_mut((0, 0), (self.dim(), self.dim()))
            .copy_from(&self.matrix);
        Self { matrix: m }
    }

    pub fn apply(&self, v: &CVector) -> CVector {
        &self.matrix * v
    }

    pub fn eig(&self) -> EigenFrame {
        hermitian_eig(self)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(self)
    }

    pub fn to_real_vec(&self) -> RVector {
        hermitian_to_real_vec(self)
    }
}

impl Add for &HermitianOperator {
    type Output = HermitianOperator;
    fn add(self, rhs: Self) -> HermitianOperator {
        HermitianOperator::symmetrized(&self.matrix + &rhs.matrix)
    }
}

impl Sub for &HermitianOperator {
    type Output = HermitianOperator;
    fn sub(self, rhs: Self) -> HermitianOperator {
        HermitianOperator::symmetrized(&self.matrix - &rhs.matrix)
    }
}

impl Mul<f64> for &HermitianOperator {
    type Output = HermitianOperator;
    fn mul(self, rhs: f64) -> HermitianOperator {
        HermitianOperator {
            matrix: &self.matrix * Complex64::new(rhs, 0.0),
        }
    }
}

impl Neg for &HermitianOperator {
    type Output = HermitianOperator;
    fn neg(self) -> HermitianOperator {
        self * -1.0
    }
}

/// Eigenpairs of a Hermitian operator, eigenvalues in descending order.
#[derive(Clone, Debug)]
pub struct EigenFrame {
    pub values: Vec<f64>,
    pub vectors: Vec<CVector>,
}

impl EigenFrame {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `Σ_a λ_a |v_a⟩⟨v_a|` as a `dim x dim` operator.
    pub fn reconstruct(&self, dim: usize) -> HermitianOperator {
        let mut m = CMatrix::zeros(dim, dim);
        for (lambda, v) in self.values.iter().zip(&self.vectors) {
            m += v * v.adjoint() * Complex64::new(*lambda, 0.0);
        }
        HermitianOperator::symmetrized(m)
    }

    /// Splits into the pairs with eigenvalue `> epsilon` and the remaining
    /// (kernel) vectors.
    pub fn partition(self, epsilon: f64) -> (EigenFrame, Vec<CVector>) {
        let mut support = EigenFrame {
            values: Vec::new(),
            vectors: Vec::new(),
        };
        let mut kernel = Vec::new();
        for (lambda, v) in self.values.into_iter().zip(self.vectors) {
            if lambda > epsilon {
                support.values.push(lambda);
                support.vectors.push(v);
            } else {
                kernel.push(v);
            }
        }
        (support, kernel)
    }

    /// Eigenvectors as the columns of a `dim x len` matrix.
    pub fn vector_matrix(&self, dim: usize) -> CMatrix {
        if self.vectors.is_empty() {
            return CMatrix::zeros(dim, 0);
        }
        CMatrix::from_columns(&self.vectors)
    }
}

pub fn hermitian_eig(h: &HermitianOperator) -> EigenFrame {
    let eig = SymmetricEigen::new(h.matrix.clone());
    let mut order: Vec<usize> = (0..h.dim()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    EigenFrame {
        values: order.iter().map(|&i| eig.eigenvalues[i]).collect(),
        vectors: order
            .iter()
            .map(|&i| eig.eigenvectors.column(i).into_owned())
            .collect(),
    }
}

/// Eigenpairs with eigenvalue `> epsilon`; the length is the numerical rank.
pub fn support_frame(h: &HermitianOperator, epsilon: f64) -> Result<EigenFrame, NumericsError> {
    let frame = hermitian_eig(h);
    if let Some(&min) = frame.values.last() {
        if min < -epsilon {
            return Err(NumericsError::NotPsd {
                min_eigenvalue: min,
                epsilon,
            });
        }
    }
    Ok(frame.partition(epsilon).0)
}

/// Number of eigenvalues `> epsilon`.
pub fn numerical_rank(h: &HermitianOperator, epsilon: f64) -> usize {
    h.matrix
        .symmetric_eigenvalues()
        .iter()
        .filter(|&&x| x > epsilon)
        .count()
}

pub fn min_eigenvalue(h: &HermitianOperator) -> f64 {
    h.matrix
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

pub fn max_eigenvalue(h: &HermitianOperator) -> f64 {
    h.matrix
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Isometric embedding of `d x d` Hermitian matrices into `R^{d²}`.
///
/// Layout: the `d` diagonal entries, then for each `i < j` in row-major order
/// the pair `(√2 Re H_ij, √2 Im H_ij)`.
pub fn hermitian_to_real_vec(h: &HermitianOperator) -> RVector {
    let d = h.dim();
    let m = &h.matrix;
    let mut out = Vec::with_capacity(d * d);
    out.extend((0..d).map(|i| m[(i, i)].re));
    for i in 0..d {
        for j in (i + 1)..d {
            out.push(std::f64::consts::SQRT_2 * m[(i, j)].re);
            out.push(std::f64::consts::SQRT_2 * m[(i, j)].im);
        }
    }
    RVector::from_vec(out)
}

/// Inverse of [`hermitian_to_real_vec`].
pub fn real_vec_to_hermitian(dim: usize, v: &[f64]) -> Result<HermitianOperator, NumericsError> {
    if v.len() != dim * dim {
        return Err(NumericsError::BadVectorLength { len: v.len(), dim });
    }
    let mut m = CMatrix::from_element(dim, dim, ZERO);
    for i in 0..dim {
        m[(i, i)] = Complex64::new(v[i], 0.0);
    }
    let mut k = dim;
    for i in 0..dim {
        for j in (i + 1)..dim {
            let z = Complex64::new(v[k], v[k + 1]) * std::f64::consts::FRAC_1_SQRT_2;
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
            k += 2;
        }
    }
    Ok(HermitianOperator { matrix: m })
}

/// Orthonormal basis of the numerical nullspace of a real matrix.
///
/// A right-singular vector is kept when its singular value is at most
/// `epsilon * s_max` (`s_max` replaced by 1 for the zero matrix). Vectors come
/// out in ascending singular-value order, each signed so that its first
/// component of magnitude above `1e-10` is positive.
pub fn real_nullspace(m: &RMatrix, epsilon: f64) -> Vec<RVector> {
    let (rows, cols) = m.shape();
    if cols == 0 {
        return Vec::new();
    }
    // nalgebra's SVD is thin; pad wide matrices with zero rows so V is square.
    let work = if rows < cols {
        let mut p = RMatrix::zeros(cols, cols);
        p.view_mut((0, 0), (rows, cols)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = SVD::new(work, false, true);
    let v_t = svd.v_t.expect("SVD computed with V");
    let s_max = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let threshold = epsilon * if s_max > 0.0 { s_max } else { 1.0 };

    let mut picked: Vec<(f64, usize)> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s <= threshold)
        .map(|(i, &s)| (s, i))
        .collect();
    picked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    picked
        .into_iter()
        .map(|(_, i)| {
            let mut v: RVector = v_t.row(i).transpose();
            if let Some(first) = v.iter().find(|x| x.abs() > 1e-10) {
                if *first < 0.0 {
                    v.neg_mut();
                }
            }
            v
        })
        .collect()
}

/// Largest singular value (spectral norm) of a real matrix.
pub fn spectral_norm(m: &RMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().iter().copied().fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn pauli_x() -> HermitianOperator {
        HermitianOperator::new(CMatrix::from_row_slice(
            2,
            2,
            &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)],
        ))
        .unwrap()
    }

    #[test]
    fn identity_eigenvalues() {
        let frame = hermitian_eig(&HermitianOperator::identity(2));
        assert_eq!(frame.len(), 2);
        for v in &frame.values {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn diagonal_eigenpairs() {
        let frame = hermitian_eig(&HermitianOperator::from_real_diagonal(&[1.0, 0.0]));
        assert!((frame.values[0] - 1.0).abs() < 1e-14);
        assert!(frame.values[1].abs() < 1e-14);
        assert!((frame.vectors[0][0].norm() - 1.0).abs() < 1e-12);
        assert!((frame.vectors[1][1].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_hermitian() {
        let m =
            CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        assert!(matches!(
            HermitianOperator::new(m),
            Err(NumericsError::NotHermitian { .. })
        ));
        let m = CMatrix::from_row_slice(1, 2, &[c(1.0, 0.0), c(0.0, 0.0)]);
        assert!(matches!(
            HermitianOperator::new(m),
            Err(NumericsError::NotSquare { .. })
        ));
    }

    #[test]
    fn support_of_zero_is_empty() {
        let frame = support_frame(&HermitianOperator::zeros(3), 1e-8).unwrap();
        assert!(frame.is_empty());
    }

    #[test]
    fn support_of_scaled_projector() {
        let h = HermitianOperator::from_real_diagonal(&[0.5, 0.0]);
        let frame = support_frame(&h, 1e-8).unwrap();
        assert_eq!(frame.len(), 1);
        assert!((frame.values[0] - 0.5).abs() < 1e-14);
        assert!((frame.vectors[0][0].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn support_of_pentagon_effect() {
        let h = &HermitianOperator::from_bloch([1.0, 0.0, 0.0]) * 0.2;
        let frame = support_frame(&h, 1e-8).unwrap();
        assert_eq!(frame.len(), 1);
        assert!((frame.values[0] - 0.2).abs() < 1e-14);
        let v = &frame.vectors[0];
        // |+⟩ up to a global phase
        let overlap = (v[0] + v[1]) * std::f64::consts::FRAC_1_SQRT_2;
        assert!((overlap.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn support_rejects_negative() {
        let h = HermitianOperator::from_real_diagonal(&[1.0, -2.0]);
        assert!(matches!(
            support_frame(&h, 1e-8),
            Err(NumericsError::NotPsd { .. })
        ));
    }

    #[test]
    fn real_vec_of_identity_and_pauli_x() {
        let v = hermitian_to_real_vec(&HermitianOperator::identity(2));
        assert_eq!(v.as_slice(), &[1.0, 1.0, 0.0, 0.0]);
        assert!((v.norm() - 2f64.sqrt()).abs() < 1e-12);

        let v = hermitian_to_real_vec(&pauli_x());
        assert_eq!(v[0], 0.0);
        assert_eq!(v[1], 0.0);
        assert!((v.norm() - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn real_vec_inverse() {
        let h = HermitianOperator::from_bloch([0.3, -0.4, 0.1]);
        let back = real_vec_to_hermitian(2, hermitian_to_real_vec(&h).as_slice()).unwrap();
        assert!(h.frobenius_distance(&back) < 1e-15);
        assert!(real_vec_to_hermitian(2, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn nullspace_of_identity_is_empty() {
        assert!(real_nullspace(&RMatrix::identity(3, 3), 1e-8).is_empty());
    }

    #[test]
    fn nullspace_of_single_row() {
        let ns = real_nullspace(&RMatrix::from_row_slice(1, 2, &[1.0, 1.0]), 1e-8);
        assert_eq!(ns.len(), 1);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((ns[0][0] - h).abs() < 1e-12);
        assert!((ns[0][1] + h).abs() < 1e-12);
    }

    #[test]
    fn nullspace_of_zero_and_empty() {
        assert_eq!(real_nullspace(&RMatrix::zeros(2, 3), 1e-8).len(), 3);
        assert_eq!(real_nullspace(&RMatrix::zeros(0, 2), 1e-8).len(), 2);
        assert!(real_nullspace(&RMatrix::zeros(2, 0), 1e-8).is_empty());
    }

    #[test]
    fn min_eigenvalue_examples() {
        assert!((min_eigenvalue(&HermitianOperator::identity(2)) - 1.0).abs() < 1e-14);
        let h = HermitianOperator::from_real_diagonal(&[1.0, -2.0]);
        assert!((min_eigenvalue(&h) + 2.0).abs() < 1e-14);
    }

    #[test]
    fn pair_operators_are_unit_norm_and_traceless() {
        let a = CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]);
        let b = CVector::from_vec(vec![c(0.0, 0.0), c(1.0, 0.0)]);
        let s = HermitianOperator::symmetric_pair(&a, &b);
        let t = HermitianOperator::antisymmetric_pair(&a, &b);
        for op in [&s, &t] {
            assert!((op.frobenius_norm() - 1.0).abs() < 1e-12);
            assert!(op.trace().abs() < 1e-12);
            assert!(hermiticity_deviation(op.matrix()) < 1e-15);
        }
        // s = σx/√2, t = σy/√2
        assert!((s.matrix()[(0, 1)].re - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((t.matrix()[(0, 1)].im + std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn bloch_round_trip() {
        let r = [0.1, 0.2, -0.3];
        let b = HermitianOperator::from_bloch(r).bloch_components().unwrap();
        for k in 0..3 {
            assert!((b[k] - r[k]).abs() < 1e-15);
        }
    }
}
