//! Dense complex linear-algebra helpers shared across the crate.
//!
//! nalgebra supplies the factorizations; the wrappers here pin down the
//! conventions everything else relies on: thin SVD with singular values in
//! descending order, a deterministic phase convention for singular vectors
//! and eigenvectors, pseudo-inverses that report rank deficiency, and
//! log-determinants evaluated on the smaller Gram side through a Cholesky
//! factorization.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub const C_ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const C_ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Thin singular value decomposition `a = u * diag(s) * vᴴ`.
///
/// Singular values are sorted in descending order. Each column of `v` is
/// rotated so that its largest-magnitude entry (first such entry on ties) is
/// real and positive, and the paired column of `u` absorbs the conjugate
/// rotation, so the product is unchanged.
pub struct ThinSvd {
    pub u: CMat,
    pub s: Vec<f64>,
    pub v: CMat,
}

pub fn thin_svd(a: &CMat) -> ThinSvd {
    let svd = a.clone().svd(true, true);
    let u = svd.u.expect("svd requested u");
    let v_t = svd.v_t.expect("svd requested v_t");
    let mut v = v_t.adjoint();
    let mut u = u;
    let mut s: Vec<f64> = svd.singular_values.iter().copied().collect();

    // nalgebra sorts descending already; keep a defensive stable sort so the
    // ordering contract never silently depends on the backend.
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&i, &j| s[j].partial_cmp(&s[i]).expect("singular values are finite"));
    if order.iter().enumerate().any(|(k, &i)| k != i) {
        let u_old = u.clone();
        let v_old = v.clone();
        let s_old = s.clone();
        for (k, &i) in order.iter().enumerate() {
            u.set_column(k, &u_old.column(i));
            v.set_column(k, &v_old.column(i));
            s[k] = s_old[i];
        }
    }

    let factors = fix_column_phases(&mut v);
    for (j, f) in factors.iter().enumerate() {
        let scaled = u.column(j) * *f;
        u.set_column(j, &scaled);
    }
    ThinSvd { u, s, v }
}

/// Rotates each column by a unit scalar so its largest-magnitude entry (the
/// first one on ties) becomes real and positive. Zero columns are left alone.
/// Returns the factor applied to each column.
pub fn fix_column_phases(m: &mut CMat) -> Vec<Complex64> {
    let mut factors = Vec::with_capacity(m.ncols());
    for j in 0..m.ncols() {
        let mut best = 0usize;
        let mut best_norm = 0.0f64;
        for i in 0..m.nrows() {
            let n = m[(i, j)].norm_sqr();
            if n > best_norm {
                best_norm = n;
                best = i;
            }
        }
        let factor = if best_norm == 0.0 {
            C_ONE
        } else {
            let z = m[(best, j)];
            z.conj() / z.norm()
        };
        if factor != C_ONE {
            let scaled = m.column(j) * factor;
            m.set_column(j, &scaled);
        }
        factors.push(factor);
    }
    factors
}

/// Eigendecomposition of a Hermitian matrix with eigenvalues in descending
/// order and eigenvector phases fixed by [`fix_column_phases`].
pub fn hermitian_eigen_desc(a: &CMat) -> (Vec<f64>, CMat) {
    assert_eq!(a.nrows(), a.ncols(), "hermitian_eigen_desc needs a square matrix");
    let eig = nalgebra::SymmetricEigen::new(a.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j].partial_cmp(&eig.eigenvalues[i]).expect("eigenvalues are finite")
    });
    let mut values = Vec::with_capacity(order.len());
    let mut vectors = CMat::zeros(a.nrows(), a.ncols());
    for (k, &i) in order.iter().enumerate() {
        values.push(eig.eigenvalues[i]);
        vectors.set_column(k, &eig.eigenvectors.column(i));
    }
    fix_column_phases(&mut vectors);
    (values, vectors)
}

/// Moore-Penrose pseudo-inverse via thin SVD.
///
/// Singular values at or below `rel_tol` times the largest are treated as
/// zero. Returns the pseudo-inverse together with the numerical rank.
pub fn pseudo_inverse(a: &CMat, rel_tol: f64) -> (CMat, usize) {
    let svd = thin_svd(a);
    let cutoff = svd.s.first().copied().unwrap_or(0.0) * rel_tol;
    let mut rank = 0usize;
    let k = svd.s.len();
    let mut inv_s = CMat::zeros(k, k);
    for (i, &s) in svd.s.iter().enumerate() {
        if s > cutoff && s > 0.0 {
            inv_s[(i, i)] = Complex64::new(1.0 / s, 0.0);
            rank += 1;
        }
    }
    let pinv = &svd.v * inv_s * svd.u.adjoint();
    (pinv, rank)
}

/// Numerical rank of a matrix: the number of singular values above `rel_tol`
/// times the largest one.
pub fn numerical_rank(a: &CMat, rel_tol: f64) -> usize {
    let svd = thin_svd(a);
    let cutoff = svd.s.first().copied().unwrap_or(0.0) * rel_tol;
    svd.s.iter().filter(|&&s| s > cutoff && s > 0.0).count()
}

/// `log2 det(I + c * g gᴴ)` for real `c >= 0`, evaluated on whichever Gram
/// side of `g` is smaller (the two determinants agree).
///
/// Uses a Cholesky factorization of the Hermitian positive-definite matrix;
/// if that fails due to rounding right at the PSD boundary, falls back to the
/// eigenvalues with negatives clamped to zero.
pub fn log2_det_i_plus_gram(g: &CMat, c: f64) -> f64 {
    assert!(c >= 0.0, "gram scaling must be non-negative");
    let gram = if g.ncols() <= g.nrows() { g.adjoint() * g } else { g * g.adjoint() };
    let n = gram.nrows();
    let mut m = gram * Complex64::new(c, 0.0);
    for i in 0..n {
        m[(i, i)] += C_ONE;
        // The Gram product's diagonal picks up O(eps) imaginary dust; the
        // factorization below expects an exactly Hermitian input.
        m[(i, i)] = Complex64::new(m[(i, i)].re, 0.0);
    }
    if let Some(chol) = m.clone().cholesky() {
        let l = chol.l();
        let mut acc = 0.0;
        for i in 0..n {
            acc += l[(i, i)].re.ln();
        }
        return 2.0 * acc / std::f64::consts::LN_2;
    }
    let (values, _) = hermitian_eigen_desc(
        &(if g.ncols() <= g.nrows() { g.adjoint() * g } else { g * g.adjoint() }),
    );
    values.iter().map(|&l| (1.0 + c * l.max(0.0)).log2()).sum()
}

/// Squared Frobenius norm.
pub fn frob_sqr(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

/// Frobenius norm.
pub fn frob(a: &CMat) -> f64 {
    frob_sqr(a).sqrt()
}
