//! Small complex linear-algebra helpers on top of `nalgebra`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Squared Frobenius norm.
pub fn frob2(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

/// Keeps only the diagonal of a square matrix.
pub fn diag_part(m: &CMat) -> CMat {
    let n = m.nrows();
    CMat::from_fn(n, n, |i, j| if i == j { m[(i, i)] } else { C64::new(0.0, 0.0) })
}

pub fn real_diag(m: &CMat) -> Vec<f64> {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)].re).collect()
}

pub fn diag_from(values: &[f64]) -> CMat {
    let n = values.len();
    CMat::from_fn(n, n, |i, j| if i == j { C64::new(values[i], 0.0) } else { C64::new(0.0, 0.0) })
}

/// Multiplies row `i` of `m` by `d[i]`, i.e. `diag(d) * m`.
pub fn scale_rows(d: &[f64], m: &CMat) -> CMat {
    let mut out = m.clone();
    for (i, mut row) in out.row_iter_mut().enumerate() {
        row *= C64::new(d[i], 0.0);
    }
    out
}

/// Multiplies column `j` of `m` by `d[j]`, i.e. `m * diag(d)`.
pub fn scale_cols(m: &CMat, d: &[f64]) -> CMat {
    let mut out = m.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        col *= C64::new(d[j], 0.0);
    }
    out
}

/// Real part of the trace of `a * b` without forming the product.
pub fn re_trace_prod(a: &CMat, b: &CMat) -> f64 {
    debug_assert_eq!(a.ncols(), b.nrows());
    debug_assert_eq!(a.nrows(), b.ncols());
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += (a[(i, k)] * b[(k, i)]).re;
        }
    }
    acc
}

/// Lower-triangular factor `L` of a Hermitian positive-definite matrix, `A = L L^H`.
///
/// Written out by hand because the generic `nalgebra` factorization takes complex
/// square roots of nonpositive pivots instead of failing.
#[derive(Debug, Clone)]
pub struct HermitianCholesky {
    l: CMat,
}

impl HermitianCholesky {
    /// Returns `None` unless every pivot is real, finite and strictly positive.
    pub fn new(a: &CMat) -> Option<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return None;
        }
        let mut l = CMat::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)].re;
            for k in 0..j {
                d -= l[(j, k)].norm_sqr();
            }
            if !(d > 0.0 && d.is_finite()) {
                return None;
            }
            let d = d.sqrt();
            l[(j, j)] = C64::new(d, 0.0);
            for i in j + 1..n {
                let mut v = a[(i, j)];
                for k in 0..j {
                    v -= l[(i, k)] * l[(j, k)].conj();
                }
                l[(i, j)] = v / d;
            }
        }
        Some(Self { l })
    }

    pub fn l(&self) -> &CMat {
        &self.l
    }

    /// `L^{-1} b`.
    pub fn solve_lower(&self, b: &CMat) -> CMat {
        let n = self.l.nrows();
        let mut x = b.clone();
        for c in 0..x.ncols() {
            for i in 0..n {
                let mut v = x[(i, c)];
                for k in 0..i {
                    v -= self.l[(i, k)] * x[(k, c)];
                }
                x[(i, c)] = v / self.l[(i, i)].re;
            }
        }
        x
    }

    /// `L^{-H} b`.
    pub fn solve_upper(&self, b: &CMat) -> CMat {
        let n = self.l.nrows();
        let mut x = b.clone();
        for c in 0..x.ncols() {
            for i in (0..n).rev() {
                let mut v = x[(i, c)];
                for k in i + 1..n {
                    v -= self.l[(k, i)].conj() * x[(k, c)];
                }
                x[(i, c)] = v / self.l[(i, i)].re;
            }
        }
        x
    }

    /// `A^{-1} b`.
    pub fn solve(&self, b: &CMat) -> CMat {
        self.solve_upper(&self.solve_lower(b))
    }

    pub fn inverse(&self) -> CMat {
        let n = self.l.nrows();
        hermitian_part(&self.solve(&CMat::identity(n, n)))
    }

    pub fn ln_det(&self) -> f64 {
        2.0 * (0..self.l.nrows()).map(|i| self.l[(i, i)].re.ln()).sum::<f64>()
    }
}

/// Cholesky factorization of a Hermitian positive-definite matrix. On failure a
/// single retry is made with `1e-12 * tr(m) / n` added to the diagonal.
pub fn cholesky(m: &CMat, op: &'static str) -> Result<HermitianCholesky> {
    if m.nrows() != m.ncols() {
        return Err(Error::dims(op, "square matrix", format!("{}x{}", m.nrows(), m.ncols())));
    }
    let herm = hermitian_part(m);
    if let Some(ch) = HermitianCholesky::new(&herm) {
        return Ok(ch);
    }
    let n = herm.nrows();
    let tr: f64 = real_diag(&herm).iter().sum();
    let jitter = 1e-12 * tr.abs().max(f64::MIN_POSITIVE) / n as f64;
    let mut jittered = herm;
    for i in 0..n {
        jittered[(i, i)] += C64::new(jitter, 0.0);
    }
    HermitianCholesky::new(&jittered).ok_or_else(|| {
        Error::numerical(op, format!("matrix not positive definite (jitter {jitter:e} added)"))
    })
}

/// Hermitian inverse via Cholesky.
pub fn inv_hpd(m: &CMat, op: &'static str) -> Result<CMat> {
    Ok(cholesky(m, op)?.inverse())
}

/// `ln det(I + C^{-1} X X^H)` for Hermitian positive-definite `C`, computed on the
/// whitened `k x k` Gram matrix `I + (L^{-1}X)^H (L^{-1}X)`.
pub fn ln_det_eye_plus(c_mat: &CMat, x: &CMat, op: &'static str) -> Result<f64> {
    if c_mat.nrows() != x.nrows() {
        return Err(Error::dims(op, format!("{} rows", c_mat.nrows()), format!("{} rows", x.nrows())));
    }
    if x.ncols() == 0 {
        return Ok(0.0);
    }
    let y = cholesky(c_mat, op)?.solve_lower(x);
    let mut gram = y.adjoint() * &y;
    for i in 0..gram.nrows() {
        gram[(i, i)] += C64::new(1.0, 0.0);
    }
    Ok(cholesky(&gram, op)?.ln_det().max(0.0))
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    let eig = nalgebra::SymmetricEigen::new(hermitian_part(m));
    let mut v: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn is_hermitian(m: &CMat, tol: f64) -> bool {
    m.nrows() == m.ncols() && max_abs_diff(m, &m.adjoint()) <= tol
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_det_matches_direct_determinant() {
        let c_mat = CMat::from_row_slice(2, 2, &[c(2.0, 0.0), c(0.5, 0.5), c(0.5, -0.5), c(3.0, 0.0)]);
        let x = CMat::from_row_slice(2, 1, &[c(1.0, 1.0), c(-0.5, 2.0)]);
        let inv = c_mat.clone().try_inverse().unwrap();
        let m = CMat::identity(2, 2) + inv * &x * x.adjoint();
        let direct = m.determinant().re.ln();
        let got = ln_det_eye_plus(&c_mat, &x, "test").unwrap();
        assert!((got - direct).abs() < 1e-12, "{got} vs {direct}");
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let m = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)]);
        assert!(matches!(cholesky(&m, "test"), Err(Error::Numerical { .. })));
    }

    #[test]
    fn cholesky_jitter_rescues_singular_psd() {
        let m = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0)]);
        assert!(cholesky(&m, "test").is_ok());
    }

    #[test]
    fn cholesky_solves_and_inverts() {
        let a = CMat::from_row_slice(3, 3, &[
            c(4.0, 0.0), c(1.0, 1.0), c(0.0, -0.5),
            c(1.0, -1.0), c(3.0, 0.0), c(0.2, 0.0),
            c(0.0, 0.5), c(0.2, 0.0), c(2.0, 0.0),
        ]);
        let ch = HermitianCholesky::new(&a).unwrap();
        assert!(max_abs_diff(&(ch.l() * ch.l().adjoint()), &a) < 1e-14);
        assert!(max_abs_diff(&(&a * ch.inverse()), &CMat::identity(3, 3)) < 1e-14);
        assert!((ch.ln_det() - a.determinant().re.ln()).abs() < 1e-13);
    }

    #[test]
    fn hermitian_eigenvalues_of_known_matrix() {
        // [[2, i], [-i, 2]] has eigenvalues 1 and 3
        let m = CMat::from_row_slice(2, 2, &[c(2.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(2.0, 0.0)]);
        let ev = hermitian_eigenvalues(&m);
        assert!((ev[0] - 1.0).abs() < 1e-12 && (ev[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn re_trace_prod_matches_product() {
        let a = CMat::from_fn(3, 2, |i, j| c(i as f64 - j as f64, 0.3 * (i + j) as f64));
        let b = CMat::from_fn(2, 3, |i, j| c(1.0 + j as f64, -(i as f64)));
        assert!((re_trace_prod(&a, &b) - (&a * &b).trace().re).abs() < 1e-12);
    }
}
