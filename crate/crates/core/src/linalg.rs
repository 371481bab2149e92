//! Small dense linear algebra over jets and plain complex scalars.
//!
//! Matrix sizes here are at most `2n <= 8`, so everything is direct:
//! Gauss-Jordan with partial pivoting for jet-valued inversion, a
//! triangular (Cholesky) factorization over jets for metric-supplied
//! models, and a cyclic Jacobi sweep for Hermitian eigenvalues.

use crate::error::{Error, Result};
use crate::jets::{Jet2, C64};

/// Row-major square matrix of jets.
#[derive(Clone, Debug)]
pub struct JetMatrix {
    pub size: usize,
    pub data: Vec<Jet2>,
}

impl JetMatrix {
    pub fn from_fn(size: usize, mut f: impl FnMut(usize, usize) -> Jet2) -> Self {
        let mut data = Vec::with_capacity(size * size);
        for r in 0..size {
            for c in 0..size {
                data.push(f(r, c));
            }
        }
        JetMatrix { size, data }
    }

    pub fn at(&self, r: usize, c: usize) -> &Jet2 {
        &self.data[r * self.size + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: Jet2) {
        self.data[r * self.size + c] = v;
    }

    pub fn values(&self) -> Vec<C64> {
        self.data.iter().map(Jet2::value).collect()
    }

    /// Gauss-Jordan inverse with partial pivoting on coefficient magnitude.
    pub fn inverse(&self, singular_tol: f64) -> Result<JetMatrix> {
        let n = self.size;
        let dim = self.data[0].dim();
        let order = self.data.iter().map(Jet2::order).min().unwrap_or(0);
        let mut a = self.clone();
        let mut inv = JetMatrix::from_fn(n, |r, c| {
            if r == c {
                Jet2::one(dim, order)
            } else {
                Jet2::zero(dim, order)
            }
        });
        for col in 0..n {
            let (pivot_row, pivot_mag) = (col..n)
                .map(|r| (r, a.at(r, col).value().norm()))
                .max_by(|x, y| x.1.total_cmp(&y.1))
                .unwrap();
            if pivot_mag < singular_tol {
                return Err(Error::SingularCoframe {
                    point: String::new(),
                    detail: format!("pivot magnitude {pivot_mag:.3e} below {singular_tol:.1e} in column {col}"),
                });
            }
            if pivot_row != col {
                for c in 0..n {
                    a.data.swap(col * n + c, pivot_row * n + c);
                    inv.data.swap(col * n + c, pivot_row * n + c);
                }
            }
            let pivot_inv = a.at(col, col).recip()?;
            for c in 0..n {
                a.set(col, c, a.at(col, c).mul(&pivot_inv));
                inv.set(col, c, inv.at(col, c).mul(&pivot_inv));
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let factor = a.at(r, col).clone();
                if factor.max_abs() == 0.0 {
                    continue;
                }
                for c in 0..n {
                    a.set(r, c, a.at(r, c).sub(&factor.mul(a.at(col, c))));
                    inv.set(r, c, inv.at(r, c).sub(&factor.mul(inv.at(col, c))));
                }
            }
        }
        Ok(inv)
    }
}

/// Cholesky-style factorization of a Hermitian positive-definite jet matrix:
/// `g = L L*` with `L` lower triangular and positive real diagonal values.
///
/// The returned matrix is `L`. The unitary coframe for a metric `g` is then
/// `phi_i = sum_a L[a][i] dz_a` (the columns of `L`), which reproduces `g`
/// and is upper triangular as a coefficient matrix.
pub fn jet_cholesky(g: &JetMatrix) -> Result<JetMatrix> {
    let n = g.size;
    let dim = g.data[0].dim();
    let order = g.data.iter().map(Jet2::order).min().unwrap_or(0);
    let mut l = JetMatrix::from_fn(n, |_, _| Jet2::zero(dim, order));
    for j in 0..n {
        // diagonal: sqrt of a real positive jet
        let mut acc = g.at(j, j).clone();
        for k in 0..j {
            acc = acc.sub(&l.at(j, k).mul(&l.at(j, k).conj()));
        }
        if acc.value().re <= 0.0 {
            return Err(Error::NotPositiveDefinite {
                point: String::new(),
                min_eig: acc.value().re,
            });
        }
        let diag = acc.sqrt()?;
        let diag_inv = diag.recip()?;
        l.set(j, j, diag);
        for i in j + 1..n {
            let mut acc = g.at(i, j).clone();
            for k in 0..j {
                acc = acc.sub(&l.at(i, k).mul(&l.at(j, k).conj()));
            }
            l.set(i, j, acc.mul(&diag_inv));
        }
    }
    Ok(l)
}

/// Eigenvalues of a Hermitian matrix (plain values) by cyclic Jacobi
/// rotations. Returns eigenvalues sorted ascending.
pub fn hermitian_eigenvalues(matrix: &[C64], size: usize) -> Vec<f64> {
    assert_eq!(matrix.len(), size * size);
    let mut a = matrix.to_vec();
    let idx = |r: usize, c: usize| r * size + c;
    for _sweep in 0..64 {
        let mut off = 0.0f64;
        for r in 0..size {
            for c in r + 1..size {
                off += a[idx(r, c)].norm_sqr();
            }
        }
        if off < 1e-30 {
            break;
        }
        for p in 0..size {
            for q in p + 1..size {
                let apq = a[idx(p, q)];
                if apq.norm() < 1e-300 {
                    continue;
                }
                let app = a[idx(p, p)].re;
                let aqq = a[idx(q, q)].re;
                // unitary 2x2 diagonalization of [[app, apq], [conj(apq), aqq]]:
                // R[p][p] = R[q][q] = cth, R[p][q] = s, R[q][p] = -conj(s)
                let phase = apq / apq.norm();
                let tau = (aqq - app) / (2.0 * apq.norm());
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let cth = 1.0 / (1.0 + t * t).sqrt();
                let s = phase * (t * cth);
                // A <- A R (columns p, q)
                for k in 0..size {
                    let akp = a[idx(k, p)];
                    let akq = a[idx(k, q)];
                    a[idx(k, p)] = akp * cth - akq * s.conj();
                    a[idx(k, q)] = akp * s + akq * cth;
                }
                // A <- R^H A (rows p, q)
                for k in 0..size {
                    let apk = a[idx(p, k)];
                    let aqk = a[idx(q, k)];
                    a[idx(p, k)] = apk * cth - aqk * s;
                    a[idx(q, k)] = apk * s.conj() + aqk * cth;
                }
            }
        }
    }
    let mut eigs: Vec<f64> = (0..size).map(|r| a[idx(r, r)].re).collect();
    eigs.sort_by(f64::total_cmp);
    eigs
}

/// Plain complex matrix inverse (Gauss-Jordan, partial pivoting).
pub fn complex_inverse(matrix: &[C64], size: usize, tol: f64) -> Result<Vec<C64>> {
    let mut a = matrix.to_vec();
    let idx = |r: usize, c: usize| r * size + c;
    let mut inv = vec![C64::default(); size * size];
    for r in 0..size {
        inv[idx(r, r)] = C64::new(1.0, 0.0);
    }
    for col in 0..size {
        let (pivot_row, pivot_mag) = (col..size)
            .map(|r| (r, a[idx(r, col)].norm()))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap();
        if pivot_mag < tol {
            return Err(Error::SingularCoframe {
                point: String::new(),
                detail: format!("matrix numerically singular in column {col}"),
            });
        }
        for c in 0..size {
            a.swap(idx(col, c), idx(pivot_row, c));
            inv.swap(idx(col, c), idx(pivot_row, c));
        }
        let pivot = a[idx(col, col)];
        for c in 0..size {
            a[idx(col, c)] /= pivot;
            inv[idx(col, c)] /= pivot;
        }
        for r in 0..size {
            if r == col {
                continue;
            }
            let factor = a[idx(r, col)];
            if factor.norm() == 0.0 {
                continue;
            }
            for c in 0..size {
                let s1 = factor * a[idx(col, c)];
                a[idx(r, c)] -= s1;
                let s2 = factor * inv[idx(col, c)];
                inv[idx(r, c)] -= s2;
            }
        }
    }
    Ok(inv)
}

/// Determinant of a small complex matrix by Gaussian elimination.
pub fn complex_det(matrix: &[C64], size: usize) -> C64 {
    let mut a = matrix.to_vec();
    let idx = |r: usize, c: usize| r * size + c;
    let mut det = C64::new(1.0, 0.0);
    for col in 0..size {
        let (pivot_row, pivot_mag) = (col..size)
            .map(|r| (r, a[idx(r, col)].norm()))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap();
        if pivot_mag == 0.0 {
            return C64::default();
        }
        if pivot_row != col {
            for c in 0..size {
                a.swap(idx(col, c), idx(pivot_row, c));
            }
            det = -det;
        }
        let pivot = a[idx(col, col)];
        det *= pivot;
        for r in col + 1..size {
            let factor = a[idx(r, col)] / pivot;
            for c in col..size {
                let sub = factor * a[idx(col, c)];
                a[idx(r, c)] -= sub;
            }
        }
    }
    det
}

/// Rank of a complex matrix (rows x cols, row-major) by Gaussian elimination
/// with a magnitude threshold.
pub fn complex_rank(matrix: &[C64], rows: usize, cols: usize, tol: f64) -> usize {
    let mut a = matrix.to_vec();
    let idx = |r: usize, c: usize| r * cols + c;
    let mut rank = 0usize;
    let mut row = 0usize;
    for col in 0..cols {
        let (pivot_row, pivot_mag) = (row..rows)
            .map(|r| (r, a[idx(r, col)].norm()))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap_or((row, 0.0));
        if pivot_mag <= tol {
            continue;
        }
        for c in 0..cols {
            a.swap(idx(row, c), idx(pivot_row, c));
        }
        let pivot = a[idx(row, col)];
        for r in 0..rows {
            if r == row {
                continue;
            }
            let factor = a[idx(r, col)] / pivot;
            if factor.norm() == 0.0 {
                continue;
            }
            for c in 0..cols {
                let sub = factor * a[idx(row, c)];
                a[idx(r, c)] -= sub;
            }
        }
        rank += 1;
        row += 1;
        if row == rows {
            break;
        }
    }
    rank
}
