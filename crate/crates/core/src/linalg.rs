//! Small dense complex linear algebra.
//!
//! Everything in this crate works on vectors of length up to a few hundred
//! and matrices no larger than ~20x20 (beam Grams are 2x2/3x3, the reshaped
//! channel of the KP baselines is M_v x M_h). A cyclic Jacobi eigensolver
//! plus Cholesky-based pencil reduction covers all of it without pulling in
//! a LAPACK binding.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Column-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMat {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![C64::new(0.0, 0.0); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_columns(cols: &[Vec<C64>]) -> Self {
        assert!(!cols.is_empty());
        let rows = cols[0].len();
        let mut m = Self::zeros(rows, cols.len());
        for (j, c) in cols.iter().enumerate() {
            assert_eq!(c.len(), rows);
            m.col_mut(j).copy_from_slice(c);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn col(&self, j: usize) -> &[C64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [C64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    /// A^H x for a column vector x.
    pub fn herm_mul_vec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.rows);
        (0..self.cols).map(|j| inner(self.col(j), x)).collect()
    }

    /// A x for a column vector x.
    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.cols);
        let mut y = vec![C64::new(0.0, 0.0); self.rows];
        for j in 0..self.cols {
            let xj = x[j];
            for (yi, &aij) in y.iter_mut().zip(self.col(j)) {
                *yi += aij * xj;
            }
        }
        y
    }

    /// Gram matrix A^H A.
    pub fn gram(&self) -> CMat {
        let mut g = CMat::zeros(self.cols, self.cols);
        for i in 0..self.cols {
            for j in i..self.cols {
                let v = inner(self.col(i), self.col(j));
                g[(i, j)] = v;
                g[(j, i)] = v.conj();
            }
        }
        g
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        if self.rows != self.cols {
            return false;
        }
        for i in 0..self.rows {
            for j in i..self.cols {
                if (self[(i, j)] - self[(j, i)].conj()).norm() > tol {
                    return false;
                }
            }
        }
        true
    }
}

impl std::ops::Index<(usize, usize)> for CMat {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[j * self.rows + i]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[j * self.rows + i]
    }
}

/// Hermitian inner product a^H b.
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm_sq(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

pub fn norm(a: &[C64]) -> f64 {
    norm_sq(a).sqrt()
}

/// Scale to unit 2-norm. Zero vectors are returned unchanged.
pub fn normalized(a: &[C64]) -> Vec<C64> {
    let n = norm(a);
    if n == 0.0 {
        return a.to_vec();
    }
    a.iter().map(|x| x / n).collect()
}

/// Kronecker product a ⊗ b.
pub fn kron(a: &[C64], b: &[C64]) -> Vec<C64> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for &ai in a {
        for &bj in b {
            out.push(ai * bj);
        }
    }
    out
}

/// Entrywise (Hadamard) product.
pub fn hadamard(a: &[C64], b: &[C64]) -> Vec<C64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

/// Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in descending order with matching unit eigenvectors
/// as the columns of the returned matrix.
pub fn hermitian_eigen(a: &CMat) -> (Vec<f64>, CMat) {
    assert_eq!(a.rows, a.cols);
    let n = a.rows;
    let mut m = a.clone();
    let mut v = CMat::identity(n);

    let frob: f64 = m.data.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    let stop = (1e-14 * frob).max(1e-300);

    for _sweep in 0..60 {
        if off_diag_norm(&m) <= stop {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                let mag = apq.norm();
                if mag <= 1e-2 * stop {
                    continue;
                }
                let phi = apq / mag; // unit modulus
                let app = m[(p, p)].re;
                let aqq = m[(q, q)].re;
                let tau = (app - aqq) / (2.0 * mag);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                // Right-multiply by J: columns p, q.
                for k in 0..n {
                    let akp = m[(k, p)];
                    let akq = m[(k, q)];
                    m[(k, p)] = akp * c + akq * (phi.conj() * s);
                    m[(k, q)] = akq * c - akp * (phi * s);
                }
                // Left-multiply by J^H: rows p, q.
                for k in 0..n {
                    let apk = m[(p, k)];
                    let aqk = m[(q, k)];
                    m[(p, k)] = apk * c + aqk * (phi * s);
                    m[(q, k)] = aqk * c - apk * (phi.conj() * s);
                }
                // Accumulate eigenvectors.
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * c + vkq * (phi.conj() * s);
                    v[(k, q)] = vkq * c - vkp * (phi * s);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let evals: Vec<f64> = (0..n).map(|i| m[(i, i)].re).collect();
    order.sort_by(|&i, &j| evals[j].total_cmp(&evals[i]));

    let sorted_vals: Vec<f64> = order.iter().map(|&i| evals[i]).collect();
    let mut sorted_vecs = CMat::zeros(n, n);
    for (jdst, &jsrc) in order.iter().enumerate() {
        for i in 0..n {
            sorted_vecs[(i, jdst)] = v[(i, jsrc)];
        }
    }
    (sorted_vals, sorted_vecs)
}

fn off_diag_norm(m: &CMat) -> f64 {
    let n = m.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += m[(i, j)].norm_sqr();
            }
        }
    }
    s.sqrt()
}

/// Cholesky factor L (lower triangular) of a Hermitian positive-definite
/// matrix, or `None` when a pivot drops below `tol`.
pub fn cholesky(a: &CMat, tol: f64) -> Option<CMat> {
    assert_eq!(a.rows, a.cols);
    let n = a.rows;
    let mut l = CMat::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if d <= tol {
            return None;
        }
        let dj = d.sqrt();
        l[(j, j)] = C64::new(dj, 0.0);
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / dj;
        }
    }
    Some(l)
}

fn solve_lower(l: &CMat, b: &[C64]) -> Vec<C64> {
    let n = l.rows();
    let mut x = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            let t = l[(i, k)] * x[k];
            x[i] -= t;
        }
        x[i] /= l[(i, i)];
    }
    x
}

fn solve_lower_herm(l: &CMat, b: &[C64]) -> Vec<C64> {
    // Solves L^H x = b.
    let n = l.rows();
    let mut x = b.to_vec();
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            let t = l[(k, i)].conj() * x[k];
            x[i] -= t;
        }
        x[i] /= l[(i, i)].conj();
    }
    x
}

/// Solves the Hermitian-definite generalized eigenproblem A x = λ B x.
///
/// A must be Hermitian, B Hermitian positive definite. Returns eigenvalues
/// in descending order and the matching B-orthogonal eigenvectors scaled to
/// unit 2-norm.
pub fn generalized_hermitian_eigen(a: &CMat, b: &CMat) -> Result<(Vec<f64>, Vec<Vec<C64>>)> {
    let n = a.rows();
    let l = cholesky(b, 1e-14 * b_trace(b).max(1e-300))
        .ok_or_else(|| Error::NumericalDomain("pencil metric is not positive definite".into()))?;
    // C = L^{-1} A L^{-H}
    let mut c = CMat::zeros(n, n);
    for j in 0..n {
        // y = L^{-H} e_j is column j of L^{-H}; instead: take column j of A L^{-H}
        // via solving for each column of A transformed. Work column-wise:
        let ej: Vec<C64> = (0..n)
            .map(|i| if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) })
            .collect();
        let y = solve_lower_herm(&l, &ej); // y = L^{-H} e_j
        let ay = a.mul_vec(&y);
        let cj = solve_lower(&l, &ay); // L^{-1} A L^{-H} e_j
        c.col_mut(j).copy_from_slice(&cj);
    }
    // Symmetrize against rounding.
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = (c[(i, j)] + c[(j, i)].conj()) * 0.5;
            c[(i, j)] = avg;
            c[(j, i)] = avg.conj();
        }
        c[(i, i)] = C64::new(c[(i, i)].re, 0.0);
    }
    let (vals, vecs) = hermitian_eigen(&c);
    let mut out = Vec::with_capacity(n);
    for j in 0..n {
        let x = solve_lower_herm(&l, vecs.col(j));
        out.push(normalized(&x));
    }
    Ok((vals, out))
}

fn b_trace(b: &CMat) -> f64 {
    (0..b.rows()).map(|i| b[(i, i)].re.abs()).sum()
}

/// Condition number of a Hermitian PSD matrix from its eigenvalues.
pub fn hermitian_condition(a: &CMat) -> f64 {
    let (vals, _) = hermitian_eigen(a);
    let max = vals.first().copied().unwrap_or(0.0);
    let min = vals.last().copied().unwrap_or(0.0);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Squared norm of the orthogonal projection of `x` onto the column span of
/// the matrix with Gram `gram` and correlation vector `rhs = A^H x`.
///
/// Computed as rhs^H gram^{-1} rhs via Gaussian elimination with partial
/// pivoting; returns `None` when the Gram is numerically singular.
pub fn projection_gain(gram: &CMat, rhs: &[C64]) -> Option<f64> {
    let z = solve_dense(gram, rhs)?;
    let g: C64 = rhs.iter().zip(&z).map(|(r, zi)| r.conj() * zi).sum();
    Some(g.re)
}

/// Solves a small dense Hermitian system G z = rhs (partial pivoting).
pub fn solve_dense(g: &CMat, rhs: &[C64]) -> Option<Vec<C64>> {
    let n = g.rows();
    assert_eq!(rhs.len(), n);
    let mut a = g.clone();
    let mut b = rhs.to_vec();
    let scale: f64 = (0..n).map(|i| a[(i, i)].norm()).fold(0.0, f64::max).max(1e-300);
    for k in 0..n {
        let (mut piv, mut best) = (k, a[(k, k)].norm());
        for i in (k + 1)..n {
            let m = a[(i, k)].norm();
            if m > best {
                piv = i;
                best = m;
            }
        }
        if best <= 1e-13 * scale {
            return None;
        }
        if piv != k {
            for j in 0..n {
                let t = a[(k, j)];
                a[(k, j)] = a[(piv, j)];
                a[(piv, j)] = t;
            }
            b.swap(k, piv);
        }
        for i in (k + 1)..n {
            let f = a[(i, k)] / a[(k, k)];
            if f.norm_sqr() == 0.0 {
                continue;
            }
            for j in k..n {
                let t = f * a[(k, j)];
                a[(i, j)] -= t;
            }
            let t = f * b[k];
            b[i] -= t;
        }
    }
    let mut x = vec![C64::new(0.0, 0.0); n];
    for i in (0..n).rev() {
        let mut s = b[i];
        for j in (i + 1)..n {
            s -= a[(i, j)] * x[j];
        }
        x[i] = s / a[(i, i)];
    }
    Some(x)
}

/// Hermitian square root via eigendecomposition, clamping eigenvalues at
/// `floor`. Errors when a clearly negative eigenvalue is present.
pub fn hermitian_sqrt(a: &CMat, floor: f64) -> Result<CMat> {
    let (vals, vecs) = hermitian_eigen(a);
    let max = vals.first().copied().unwrap_or(0.0).max(0.0);
    if let Some(&min) = vals.last() {
        if min < -1e-9 * max.max(1.0) {
            return Err(Error::NumericalDomain(format!(
                "matrix square root of an indefinite matrix (min eigenvalue {min:.3e})"
            )));
        }
    }
    let n = a.rows();
    let mut out = CMat::zeros(n, n);
    for k in 0..n {
        let s = vals[k].max(floor).sqrt();
        let vk = vecs.col(k);
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] += vk[i] * vk[j].conj() * s;
            }
        }
    }
    Ok(out)
}

/// Singular vectors of a complex matrix via the eigendecomposition of its
/// Gram matrix A^H A.
///
/// Returns (singular values desc, left vectors u_k, right vectors v_k) with
/// as many pairs as `min(rows, cols)`. Left vectors for vanishing singular
/// values are completed to an orthonormal set deterministically.
pub fn singular_pairs(a: &CMat) -> (Vec<f64>, Vec<Vec<C64>>, Vec<Vec<C64>>) {
    let (rows, cols) = (a.rows(), a.cols());
    let k = rows.min(cols);
    let g = a.gram(); // cols x cols
    let (vals, vecs) = hermitian_eigen(&g);
    let mut sigmas = Vec::with_capacity(k);
    let mut us: Vec<Vec<C64>> = Vec::with_capacity(k);
    let mut vs = Vec::with_capacity(k);
    let scale = vals.first().copied().unwrap_or(0.0).max(1e-300);
    for j in 0..k {
        let lam = vals[j].max(0.0);
        let sigma = lam.sqrt();
        let v = vecs.col(j).to_vec();
        let av = a.mul_vec(&v);
        let u = if lam > 1e-24 * scale {
            av.iter().map(|x| x / sigma).collect()
        } else {
            orthonormal_complement(&us, rows)
        };
        sigmas.push(sigma);
        us.push(u);
        vs.push(v);
    }
    (sigmas, us, vs)
}

/// Deterministic unit vector orthogonal to all of `basis`.
fn orthonormal_complement(basis: &[Vec<C64>], dim: usize) -> Vec<C64> {
    for seed in 0..dim {
        let mut v = vec![C64::new(0.0, 0.0); dim];
        v[seed] = C64::new(1.0, 0.0);
        for b in basis {
            let c = inner(b, &v);
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= c * bi;
            }
        }
        let n = norm(&v);
        if n > 1e-6 {
            return v.iter().map(|x| x / n).collect();
        }
    }
    // Unreachable while basis.len() < dim.
    vec![C64::new(0.0, 0.0); dim]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn jacobi_diagonalizes_hermitian() {
        let mut a = CMat::zeros(3, 3);
        a[(0, 0)] = c(2.0, 0.0);
        a[(1, 1)] = c(-1.0, 0.0);
        a[(2, 2)] = c(0.5, 0.0);
        a[(0, 1)] = c(0.3, 0.7);
        a[(1, 0)] = c(0.3, -0.7);
        a[(0, 2)] = c(-0.2, 0.1);
        a[(2, 0)] = c(-0.2, -0.1);
        a[(1, 2)] = c(0.0, 0.4);
        a[(2, 1)] = c(0.0, -0.4);
        let (vals, vecs) = hermitian_eigen(&a);
        assert!(vals.windows(2).all(|w| w[0] >= w[1]));
        for j in 0..3 {
            let v = vecs.col(j);
            let av = a.mul_vec(v);
            for i in 0..3 {
                assert!((av[i] - v[i] * vals[j]).norm() < 1e-10, "residual too large");
            }
            assert!((norm(v) - 1.0).abs() < 1e-12);
        }
        // Trace and sum of eigenvalues agree.
        let tr = a[(0, 0)].re + a[(1, 1)].re + a[(2, 2)].re;
        assert!((vals.iter().sum::<f64>() - tr).abs() < 1e-10);
    }

    #[test]
    fn generalized_pencil_matches_direct_solution() {
        // A = x x^H rank one, B = Gram of two correlated unit vectors:
        // the dominant eigenvector must satisfy z ∝ B^{-1} rhs.
        let mut b = CMat::zeros(2, 2);
        b[(0, 0)] = c(1.0, 0.0);
        b[(1, 1)] = c(1.0, 0.0);
        b[(0, 1)] = c(0.4, 0.2);
        b[(1, 0)] = c(0.4, -0.2);
        let rhs = [c(0.8, -0.1), c(0.3, 0.6)];
        let mut a = CMat::zeros(2, 2);
        for i in 0..2 {
            for j in 0..2 {
                a[(i, j)] = rhs[i] * rhs[j].conj();
            }
        }
        let (vals, vecs) = generalized_hermitian_eigen(&a, &b).unwrap();
        let direct = solve_dense(&b, &rhs).unwrap();
        let direct = normalized(&direct);
        // Same line: |<v1, direct>| = 1.
        let ip = inner(&vecs[0], &direct).norm();
        assert!((ip - 1.0).abs() < 1e-9, "ip = {ip}");
        let expected = projection_gain(&b, &rhs).unwrap();
        assert!((vals[0] - expected).abs() < 1e-9);
        assert!(vals[1].abs() < 1e-9);
    }

    #[test]
    fn singular_pairs_reconstruct_matrix() {
        let mut a = CMat::zeros(3, 2);
        let entries = [
            c(0.8, 0.1),
            c(-0.3, 0.5),
            c(0.2, -0.2),
            c(0.1, 0.9),
            c(0.7, 0.0),
            c(-0.4, 0.3),
        ];
        a.col_mut(0).copy_from_slice(&entries[0..3]);
        a.col_mut(1).copy_from_slice(&entries[3..6]);
        let (s, us, vs) = singular_pairs(&a);
        let mut recon = CMat::zeros(3, 2);
        for k in 0..2 {
            for i in 0..3 {
                for j in 0..2 {
                    recon[(i, j)] += us[k][i] * vs[k][j].conj() * s[k];
                }
            }
        }
        for j in 0..2 {
            for i in 0..3 {
                assert!((recon[(i, j)] - a[(i, j)]).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn hermitian_sqrt_squares_back() {
        let mut a = CMat::zeros(2, 2);
        a[(0, 0)] = c(2.0, 0.0);
        a[(1, 1)] = c(1.0, 0.0);
        a[(0, 1)] = c(0.5, 0.25);
        a[(1, 0)] = c(0.5, -0.25);
        let r = hermitian_sqrt(&a, 1e-12).unwrap();
        // r * r == a
        for i in 0..2 {
            for j in 0..2 {
                let mut s = c(0.0, 0.0);
                for k in 0..2 {
                    s += r[(i, k)] * r[(k, j)];
                }
                assert!((s - a[(i, j)]).norm() < 1e-10);
            }
        }
        let mut neg = CMat::identity(2);
        neg[(1, 1)] = c(-1.0, 0.0);
        assert!(hermitian_sqrt(&neg, 1e-12).is_err());
    }
}
