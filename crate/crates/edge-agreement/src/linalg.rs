//! Small dense linear-algebra helpers shared by the graph, stability, and
//! simulation modules.
//!
//! Everything here operates on `nalgebra::DMatrix<f64>` / `DVector<f64>` at
//! the sizes this crate cares about (a few dozen rows at most), so plain
//! dense algorithms are the right tool. The two pieces with actual content:
//!
//! * [`spectrum`] — eigenvalues of a real square matrix in a deterministic
//!   order (by real part, then imaginary part), plus [`multisets_match`] for
//!   comparing spectra as multisets with greedy nearest-neighbor pairing.
//! * [`kron_apply`] — applies `A ⊗ I_n` to a block-stacked vector without
//!   materializing the Kronecker product: if `y` stacks blocks `y_1 … y_c`
//!   of length `n`, then block `i` of the result is `Σ_j A[i,j]·y_j`.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

/// Eigenvalues of a square real matrix, sorted by real part then imaginary
/// part. Errors on non-square input.
pub fn spectrum(m: &DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!(
            "spectrum needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let mut eigs: Vec<Complex<f64>> = m.complex_eigenvalues().iter().copied().collect();
    eigs.sort_by(|a, b| {
        a.re.partial_cmp(&b.re)
            .unwrap()
            .then(a.im.partial_cmp(&b.im).unwrap())
    });
    Ok(eigs)
}

/// Greedy nearest-neighbor multiset comparison: every element of `a` must
/// pair with a distinct element of `b` at distance ≤ `tol` (and the lengths
/// must agree). Eigenvalue orderings from different factorizations are not
/// comparable elementwise, so spectra are compared this way.
pub fn multisets_match(a: &[Complex<f64>], b: &[Complex<f64>], tol: f64) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut unused: Vec<Complex<f64>> = b.to_vec();
    for &x in a {
        let best = unused
            .iter()
            .enumerate()
            .min_by(|(_, p), (_, q)| (x - *p).norm().partial_cmp(&(x - *q).norm()).unwrap());
        match best {
            Some((idx, y)) if (x - *y).norm() <= tol => {
                unused.swap_remove(idx);
            }
            _ => return false,
        }
    }
    true
}

/// Splits a spectrum into (near-zero, nonzero) classes at `|λ| < tol`.
pub fn split_zero_class(
    eigs: &[Complex<f64>],
    tol: f64,
) -> (Vec<Complex<f64>>, Vec<Complex<f64>>) {
    let (zero, nonzero): (Vec<_>, Vec<_>) = eigs.iter().partition(|l| l.norm() < tol);
    (zero, nonzero)
}

/// Applies `A ⊗ I_n` to `y` where `y` stacks `A.ncols()` blocks of length `n`.
pub fn kron_apply(a: &DMatrix<f64>, y: &DVector<f64>, n: usize) -> DVector<f64> {
    assert_eq!(
        y.len(),
        a.ncols() * n,
        "kron_apply: vector length {} does not match {} blocks of size {}",
        y.len(),
        a.ncols(),
        n
    );
    let mut out = DVector::zeros(a.nrows() * n);
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            let c = a[(i, j)];
            if c != 0.0 {
                for d in 0..n {
                    out[i * n + d] += c * y[j * n + d];
                }
            }
        }
    }
    out
}

/// Spectral (2-)norm: the largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

/// Extreme eigenvalues of a symmetric matrix (symmetrized defensively).
pub fn symmetric_eig_bounds(m: &DMatrix<f64>) -> (f64, f64) {
    let sym = (m + m.transpose()) * 0.5;
    let eigs = sym.symmetric_eigenvalues();
    (eigs.min(), eigs.max())
}

/// Orthonormalizes the columns of `k` (assumed full column rank) via a thin
/// QR factorization, then flips column signs so the first entry of
/// nonnegligible magnitude in each column is positive. Returns an `r×c`
/// matrix with orthonormal columns spanning the same space.
pub fn orthonormal_columns(k: &DMatrix<f64>) -> DMatrix<f64> {
    if k.ncols() == 0 {
        return k.clone();
    }
    let qr = k.clone().qr();
    let mut q = qr.q();
    for j in 0..q.ncols() {
        let lead = (0..q.nrows()).find(|&i| q[(i, j)].abs() > 1e-12);
        if let Some(i) = lead {
            if q[(i, j)] < 0.0 {
                for r in 0..q.nrows() {
                    q[(r, j)] = -q[(r, j)];
                }
            }
        }
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn spectrum_of_diagonal_is_sorted_diagonal() {
        let m = dmatrix![2.0, 0.0; 0.0, 1.0];
        let eigs = spectrum(&m).unwrap();
        assert!((eigs[0].re - 1.0).abs() < 1e-12 && eigs[0].im.abs() < 1e-14);
        assert!((eigs[1].re - 2.0).abs() < 1e-12 && eigs[1].im.abs() < 1e-14);
    }

    #[test]
    fn spectrum_rejects_rectangular_input() {
        let m = DMatrix::<f64>::zeros(2, 3);
        assert!(matches!(spectrum(&m), Err(Error::Dimension(_))));
    }

    #[test]
    fn multiset_matching_ignores_order_and_respects_tolerance() {
        let a = vec![Complex::new(1.0, 0.0), Complex::new(0.0, 1.0)];
        let b = vec![Complex::new(0.0, 1.0 + 1e-12), Complex::new(1.0, 0.0)];
        assert!(multisets_match(&a, &b, 1e-9));
        let c = vec![Complex::new(0.0, 1.1), Complex::new(1.0, 0.0)];
        assert!(!multisets_match(&a, &c, 1e-9));
        assert!(!multisets_match(&a, &a[..1].to_vec(), 1e-9));
    }

    #[test]
    fn kron_apply_matches_materialized_kronecker() {
        let a = dmatrix![1.0, -2.0, 0.5; 0.0, 3.0, -1.0];
        let n = 3;
        let y = DVector::from_iterator(9, (0..9).map(|i| (i as f64) * 0.7 - 2.0));
        let dense = a.kronecker(&DMatrix::<f64>::identity(n, n));
        let expected = &dense * &y;
        let got = kron_apply(&a, &y, n);
        assert!((got - expected).norm() < 1e-14);
    }

    #[test]
    fn spectral_norm_matches_known_value() {
        // Rank-one matrix u·vᵀ has spectral norm |u|·|v|.
        let u = DVector::from_vec(vec![3.0, 4.0]);
        let v = DVector::from_vec(vec![1.0, 2.0, 2.0]);
        let m = &u * v.transpose();
        assert!((spectral_norm(&m) - 5.0 * 3.0).abs() < 1e-12);
    }

    #[test]
    fn orthonormal_columns_spans_and_signs() {
        let k = dmatrix![-1.0, 0.0; -1.0, 1.0; 1.0, 1.0];
        let q = orthonormal_columns(&k);
        let gram = q.transpose() * &q;
        assert!((gram - DMatrix::<f64>::identity(2, 2)).norm() < 1e-12);
        // Sign convention: first nonzero entry of each column positive.
        for j in 0..q.ncols() {
            let lead = (0..q.nrows()).find(|&i| q[(i, j)].abs() > 1e-12).unwrap();
            assert!(q[(lead, j)] > 0.0);
        }
        // Same column space: projector difference vanishes.
        let pk = {
            let kk = k.transpose() * &k;
            &k * kk.try_inverse().unwrap() * k.transpose()
        };
        let pq = &q * q.transpose();
        assert!((pk - pq).norm() < 1e-10);
    }
}
