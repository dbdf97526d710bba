//! Small dense linear-algebra helpers on top of nalgebra.
//!
//! Everything here works on `DMatrix<f64>`; the problems this crate targets
//! have at most a few dozen decision variables.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Symmetric part `(m + mᵀ)/2`.
pub fn symmetrize(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn sym_eigenvalues(m: &Mat) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(symmetrize(m)).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

pub fn lambda_max(m: &Mat) -> f64 {
    *sym_eigenvalues(m).last().expect("empty matrix")
}

pub fn lambda_min(m: &Mat) -> f64 {
    sym_eigenvalues(m)[0]
}

/// Singular values in descending order.
pub fn singular_values(m: &Mat) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return vec![0.0];
    }
    let mut sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Spectral norm (largest singular value).
pub fn norm2(m: &Mat) -> f64 {
    singular_values(m)[0]
}

/// `m^power` for a symmetric positive-definite `m`, via its eigendecomposition.
pub fn spd_power(m: &Mat, power: f64) -> Mat {
    let eig = SymmetricEigen::new(symmetrize(m));
    let scaled = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&l| l.max(0.0).powf(power)),
    );
    &eig.eigenvectors * Mat::from_diagonal(&scaled) * eig.eigenvectors.transpose()
}

/// Orthonormal basis (as columns) of the null space of `a`.
///
/// Singular values below `rel_tol * σ_max` count as zero. For an empty `a`
/// (no rows) this is the identity.
pub fn null_space(a: &Mat, rel_tol: f64) -> Mat {
    let cols = a.ncols();
    if a.nrows() == 0 {
        return Mat::identity(cols, cols);
    }
    // Pad to at least square so the SVD returns a full right basis.
    let rows = a.nrows().max(cols);
    let mut padded = Mat::zeros(rows, cols);
    padded.view_mut((0, 0), (a.nrows(), cols)).copy_from(a);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested V");
    let smax = svd.singular_values.max();
    let thresh = rel_tol * smax.max(f64::MIN_POSITIVE);
    let kept: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] <= thresh)
        .collect();
    let mut z = Mat::zeros(cols, kept.len());
    for (j, &i) in kept.iter().enumerate() {
        z.set_column(j, &v_t.row(i).transpose());
    }
    z
}

/// Numerical rank with a relative singular-value threshold.
pub fn rank(a: &Mat, rel_tol: f64) -> usize {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0;
    }
    let sv = singular_values(a);
    let thresh = rel_tol * sv[0];
    sv.iter().filter(|&&s| s > thresh).count()
}

/// Block-diagonal matrix from square or rectangular blocks.
pub fn block_diag(blocks: &[&Mat]) -> Mat {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Mat::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), (b.nrows(), b.ncols())).copy_from(*b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

/// Vertical concatenation; all blocks must have the same column count.
pub fn vstack(blocks: &[&Mat]) -> Mat {
    let cols = blocks.first().map_or(0, |b| b.ncols());
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = Mat::zeros(rows, cols);
    let mut r = 0;
    for b in blocks {
        assert_eq!(b.ncols(), cols, "vstack column mismatch");
        out.view_mut((r, 0), (b.nrows(), cols)).copy_from(*b);
        r += b.nrows();
    }
    out
}

pub fn is_finite(m: &Mat) -> bool {
    m.iter().all(|v| v.is_finite())
}

/// `‖x‖²_m = xᵀ m x`.
pub fn quad_form(m: &Mat, x: &Vector) -> f64 {
    x.dot(&(m * x))
}
