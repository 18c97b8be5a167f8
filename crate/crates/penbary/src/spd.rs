//! Eigendecomposition-backed calculus on symmetric and symmetric positive
//! definite matrices: powers, the geometric mean, the Löwner box projection
//! and Frobenius geometry.
//!
//! Every matrix function here goes through a full symmetric eigendecomposition
//! rather than an iterative scheme; problem dimensions stay small (d ≤ 100),
//! so O(d³) exactness wins over iteration.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative eigenvalue floor below which a matrix no longer counts as
/// positive definite: constructions reject λ_min ≤ `SPD_EIGEN_FLOOR` · λ_max.
pub const SPD_EIGEN_FLOOR: f64 = 1e-13;

/// A dense symmetric matrix. Inputs are symmetrized (`(S + Sᵀ)/2`) on
/// construction so floating-point drift cannot accumulate asymmetry.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    data: DMatrix<f64>,
}

impl SymMatrix {
    /// Builds a symmetric matrix from an arbitrary square matrix by
    /// symmetrizing it. Rejects empty, non-square and non-finite input.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() == 0 || m.nrows() != m.ncols() {
            return Err(Error::InvalidInput(format!(
                "expected a nonempty square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(
                "matrix contains non-finite entries".into(),
            ));
        }
        let sym = 0.5 * (&m + m.transpose());
        Ok(Self { data: sym })
    }

    /// Wraps a matrix that is symmetric by construction.
    pub(crate) fn from_symmetric_unchecked(m: DMatrix<f64>) -> Self {
        Self { data: m }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            data: DMatrix::identity(dim, dim),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            data: DMatrix::zeros(dim, dim),
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        if diag.is_empty() {
            return Err(Error::InvalidInput("diagonal must be nonempty".into()));
        }
        Self::new(DMatrix::from_diagonal(&DVector::from_row_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.data
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            data: &self.data * c,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            data: &self.data + &other.data,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            data: &self.data - &other.data,
        }
    }

    /// Frobenius norm √tr(S²).
    pub fn norm(&self) -> f64 {
        self.data.norm()
    }
}

/// Frobenius inner product `tr(XY)` together with `‖X‖_F`.
pub fn frobenius(x: &SymMatrix, y: &SymMatrix) -> Result<(f64, f64)> {
    if x.dim() != y.dim() {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch: {} vs {}",
            x.dim(),
            y.dim()
        )));
    }
    // For symmetric X, Y: tr(XY) = Σ_ij X_ij Y_ij.
    let inner = x.data.iter().zip(y.data.iter()).map(|(a, b)| a * b).sum();
    Ok((inner, x.norm()))
}

/// Frobenius inner product of two symmetric matrices of equal dimension.
pub fn frobenius_inner(x: &SymMatrix, y: &SymMatrix) -> f64 {
    debug_assert_eq!(x.dim(), y.dim());
    x.data.iter().zip(y.data.iter()).map(|(a, b)| a * b).sum()
}

/// Eigendecomposition of a symmetric matrix with eigenvalues sorted in
/// descending order; the returned basis has the permuted eigenvectors as
/// columns, so `S = basis · diag(eigenvalues) · basisᵀ`.
pub fn sym_eigen(s: &SymMatrix) -> (DVector<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(s.data.clone());
    sort_descending(eig.eigenvalues, eig.eigenvectors)
}

fn sort_descending(vals: DVector<f64>, vecs: DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let d = vals.len();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| vals[j].partial_cmp(&vals[i]).expect("finite eigenvalues"));
    let sorted_vals = DVector::from_iterator(d, order.iter().map(|&i| vals[i]));
    let mut sorted_vecs = DMatrix::zeros(d, d);
    for (dst, &src) in order.iter().enumerate() {
        sorted_vecs.set_column(dst, &vecs.column(src));
    }
    (sorted_vals, sorted_vecs)
}

/// A symmetric positive definite matrix with its eigendecomposition cached.
/// Eigenvalues are stored in descending order.
#[derive(Debug, Clone)]
pub struct SpdMatrix {
    base: SymMatrix,
    eigvals: DVector<f64>,
    eigvecs: DMatrix<f64>,
}

impl SpdMatrix {
    /// Strict constructor: rejects matrices whose smallest eigenvalue is not
    /// safely positive (λ_min ≤ [`SPD_EIGEN_FLOOR`] · λ_max), since downstream
    /// code takes inverse powers.
    pub fn new(sym: SymMatrix) -> Result<Self> {
        let (vals, vecs) = sym_eigen(&sym);
        let lambda_max = vals[0];
        let lambda_min = vals[vals.len() - 1];
        if !(lambda_max > 0.0) || lambda_min <= SPD_EIGEN_FLOOR * lambda_max {
            return Err(Error::InvalidInput(format!(
                "matrix is not safely positive definite (eigenvalue range [{lambda_min:e}, {lambda_max:e}])"
            )));
        }
        Ok(Self {
            base: sym,
            eigvals: vals,
            eigvecs: vecs,
        })
    }

    /// Constructor used on solver iterates: clips eigenvalues up to the
    /// relative floor instead of rejecting, so accumulated floating-point
    /// noise cannot knock an iterate out of the cone.
    pub fn clamped(sym: SymMatrix) -> Result<Self> {
        let (vals, vecs) = sym_eigen(&sym);
        let lambda_max = vals[0];
        if !(lambda_max > 0.0) {
            return Err(Error::InvalidInput(
                "matrix has no positive eigenvalue; cannot clip into the SPD cone".into(),
            ));
        }
        let floor = SPD_EIGEN_FLOOR * lambda_max;
        if vals[vals.len() - 1] > floor {
            return Ok(Self {
                base: sym,
                eigvals: vals,
                eigvecs: vecs,
            });
        }
        let clipped = vals.map(|l| l.max(floor));
        Ok(Self::from_parts(clipped, vecs))
    }

    /// Convenience constructor from a raw square matrix.
    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        Self::new(SymMatrix::new(m)?)
    }

    /// Constructor from a row-major `dim * dim` slice.
    pub fn from_row_major(dim: usize, entries: &[f64]) -> Result<Self> {
        if dim == 0 || entries.len() != dim * dim {
            return Err(Error::InvalidInput(format!(
                "expected {} entries for a {dim}x{dim} matrix, got {}",
                dim * dim,
                entries.len()
            )));
        }
        Self::from_matrix(DMatrix::from_row_slice(dim, dim, entries))
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            base: SymMatrix::identity(dim),
            eigvals: DVector::from_element(dim, 1.0),
            eigvecs: DMatrix::identity(dim, dim),
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(SymMatrix::from_diagonal(diag)?)
    }

    /// Rebuilds `basis · diag(vals) · basisᵀ` from a known eigensystem,
    /// re-sorting into descending order (needed after monotone-decreasing
    /// spectral maps such as negative powers).
    fn from_parts(vals: DVector<f64>, vecs: DMatrix<f64>) -> Self {
        let (vals, vecs) = sort_descending(vals, vecs);
        let d = vals.len();
        let mut scaled = vecs.clone();
        for j in 0..d {
            let mut col = scaled.column_mut(j);
            col *= vals[j];
        }
        let m = &scaled * vecs.transpose();
        let sym = SymMatrix::from_symmetric_unchecked(0.5 * (&m + m.transpose()));
        Self {
            base: sym,
            eigvals: vals,
            eigvecs: vecs,
        }
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn as_sym(&self) -> &SymMatrix {
        &self.base
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        self.base.as_matrix()
    }

    /// Eigenvalues in descending order.
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigvals
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigvecs
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigvals[0]
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigvals[self.eigvals.len() - 1]
    }

    /// Applies a positive spectral map λ ↦ g(λ) in the cached eigenbasis.
    pub fn map_eigenvalues<G: Fn(f64) -> f64>(&self, g: G) -> Self {
        Self::from_parts(self.eigvals.map(g), self.eigvecs.clone())
    }

    /// Matrix power `Aᵖ = basis · diag(λᵢᵖ) · basisᵀ`.
    pub fn power(&self, p: f64) -> Self {
        self.map_eigenvalues(|l| l.powf(p))
    }

    pub fn sqrt(&self) -> Self {
        self.map_eigenvalues(f64::sqrt)
    }

    pub fn inverse(&self) -> Self {
        self.map_eigenvalues(f64::recip)
    }

    pub fn inv_sqrt(&self) -> Self {
        self.map_eigenvalues(|l| l.sqrt().recip())
    }

    /// `Σ ln λᵢ`; the overflow-safe carrier for determinant powers.
    pub fn log_det(&self) -> f64 {
        self.eigvals.iter().map(|l| l.ln()).sum()
    }

    /// Geometric mean `A # B = A^{1/2} (A^{-1/2} B A^{-1/2})^{1/2} A^{1/2}`,
    /// the midpoint of A and B in the SPD geometry. Symmetric in A and B.
    pub fn geometric_mean(&self, other: &SpdMatrix) -> Result<SpdMatrix> {
        if self.dim() != other.dim() {
            return Err(Error::InvalidInput(format!(
                "dimension mismatch: {} vs {}",
                self.dim(),
                other.dim()
            )));
        }
        let half = self.sqrt();
        let inv_half = self.inv_sqrt();
        let middle =
            SymMatrix::new(inv_half.as_matrix() * other.as_matrix() * inv_half.as_matrix())?;
        let (vals, vecs) = sym_eigen(&middle);
        let root = SpdMatrix::from_parts(vals.map(|l| l.max(0.0).sqrt()), vecs);
        let m = half.as_matrix() * root.as_matrix() * half.as_matrix();
        SpdMatrix::clamped(SymMatrix::new(m)?)
    }

    /// Congruence `P(X)Y = X·Y·X` (the quadratic representation of X acting
    /// on a symmetric Y).
    pub fn congruence(&self, y: &SymMatrix) -> Result<SymMatrix> {
        if self.dim() != y.dim() {
            return Err(Error::InvalidInput(format!(
                "dimension mismatch: {} vs {}",
                self.dim(),
                y.dim()
            )));
        }
        let m = self.as_matrix() * y.as_matrix() * self.as_matrix();
        Ok(SymMatrix::from_symmetric_unchecked(
            0.5 * (&m + m.transpose()),
        ))
    }
}

/// A Löwner order interval `[α̂ I, β̂ I]` used as the feasible/projection box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LownerInterval {
    lower: f64,
    upper: f64,
}

impl LownerInterval {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite() && 0.0 < lower && lower < upper) {
            return Err(Error::InvalidInput(format!(
                "Löwner interval requires 0 < lower < upper, got [{lower}, {upper}]"
            )));
        }
        Ok(Self { lower, upper })
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn clip(&self, x: f64) -> f64 {
        x.max(self.lower).min(self.upper)
    }

    /// Whether every eigenvalue of `a` lies inside the interval (with a tiny
    /// relative slack for roundoff).
    pub fn contains_spectrum(&self, a: &SpdMatrix, rel_slack: f64) -> bool {
        let slack = rel_slack * self.upper.max(1.0);
        a.lambda_min() >= self.lower - slack && a.lambda_max() <= self.upper + slack
    }
}

/// Projection of a symmetric matrix onto the Löwner box, clipping each
/// eigenvalue into `[α̂, β̂]`. This is the Frobenius-nearest point of the box.
pub fn lowner_project(s: &SymMatrix, interval: &LownerInterval) -> SpdMatrix {
    let (vals, vecs) = sym_eigen(s);
    SpdMatrix::from_parts(vals.map(|l| interval.clip(l)), vecs)
}
