//! Lie algebras with bi-invariant inner products, compatible complex
//! structures, and the bridge from algebra data to chart-level coframes.
//!
//! The algebraic side works with real structure constants
//! `[X_i, X_j] = sum_k c^k_ij X_k` and an inner product on the algebra.
//! Bi-invariance means `<[X,Y],Z> = -<[X,Z],Y>`; on such algebras every
//! compatible left-invariant complex structure makes the group Bismut flat,
//! and the torsion components reduce to half the complex structure
//! constants. Both facts are verified numerically here rather than assumed.
//!
//! Compatible complex structures are built the classical way: choose a
//! maximal torus, a metric-compatible complex structure on it, and a set of
//! positive roots; the `+i` eigenspace is the torus part plus the chosen
//! root spaces. The construction validates isotropy, integrability, and the
//! direct-sum decomposition of the complexification.
//!
//! [`exp_chart_coframe`] exports a left-invariant unitary coframe in
//! exponential coordinates through a truncated inverse-differential series,
//! so the chart-level machinery can cross-check algebraic flatness.

use std::f64::consts::PI;

use crate::connection::CoframeField;
use crate::error::{Error, Result};
use crate::jets::{ChartPoint, Jet2, C64};
use crate::linalg::{complex_inverse, complex_rank};

/// One bracket relation: `[X_i, X_j] = sum_k coeff_k X_k`, given as
/// `(i, j, [(k, coeff)])`.
pub type BracketRelation = (usize, usize, Vec<(usize, f64)>);

/// A real Lie algebra presented by structure constants and an inner product.
#[derive(Clone, Debug)]
pub struct LieAlgebra {
    pub name: String,
    pub dim: usize,
    pub labels: Vec<String>,
    /// `c[(k * dim + i) * dim + j]` is the `X_k` component of `[X_i, X_j]`.
    c: Vec<f64>,
    /// Inner product matrix (row-major, symmetric positive definite).
    pub metric: Vec<f64>,
    pub bi_invariant: bool,
}

impl LieAlgebra {
    /// Builds an algebra from the nonzero brackets `[X_i, X_j] = sum coeff X_k`
    /// (only `i < j` entries need to be given). Validates antisymmetry by
    /// construction and the Jacobi identity numerically; sets the
    /// bi-invariance flag from the skew-adjointness test.
    pub fn new(
        name: &str,
        labels: Vec<String>,
        brackets: &[BracketRelation],
    ) -> Result<Self> {
        let dim = labels.len();
        let mut c = vec![0.0; dim * dim * dim];
        for (i, j, terms) in brackets {
            for (k, coeff) in terms {
                c[(k * dim + i) * dim + j] = *coeff;
                c[(k * dim + j) * dim + i] = -*coeff;
            }
        }
        let metric = identity_matrix(dim);
        let mut alg = LieAlgebra { name: name.into(), dim, labels, c, metric, bi_invariant: false };
        let jacobi = alg.jacobi_residual();
        if jacobi > 1e-12 {
            return Err(Error::InvalidAlgebra(format!(
                "Jacobi identity violated (residual {jacobi:.3e})"
            )));
        }
        alg.bi_invariant = alg.ad_skew_residual() < 1e-12;
        Ok(alg)
    }

    pub fn structure_constant(&self, k: usize, i: usize, j: usize) -> f64 {
        self.c[(k * self.dim + i) * self.dim + j]
    }

    pub fn bracket(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let n = self.dim;
        let mut out = vec![0.0; n];
        for k in 0..n {
            let mut acc = 0.0;
            for i in 0..n {
                if x[i] == 0.0 {
                    continue;
                }
                for j in 0..n {
                    acc += self.structure_constant(k, i, j) * x[i] * y[j];
                }
            }
            out[k] = acc;
        }
        out
    }

    /// Bilinear extension of the bracket to the complexification.
    pub fn bracket_c(&self, x: &[C64], y: &[C64]) -> Vec<C64> {
        let n = self.dim;
        let mut out = vec![C64::default(); n];
        for k in 0..n {
            let mut acc = C64::default();
            for i in 0..n {
                if x[i].norm() == 0.0 {
                    continue;
                }
                for j in 0..n {
                    acc += x[i] * y[j] * self.structure_constant(k, i, j);
                }
            }
            out[k] = acc;
        }
        out
    }

    /// Bilinear extension of the inner product.
    pub fn inner_c(&self, x: &[C64], y: &[C64]) -> C64 {
        let n = self.dim;
        let mut acc = C64::default();
        for i in 0..n {
            for j in 0..n {
                acc += x[i] * y[j] * self.metric[i * n + j];
            }
        }
        acc
    }

    /// Matrix of `ad_x` acting on column vectors.
    pub fn ad_matrix(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim;
        let mut a = vec![0.0; n * n];
        for r in 0..n {
            for cc in 0..n {
                let mut acc = 0.0;
                for i in 0..n {
                    acc += self.structure_constant(r, i, cc) * x[i];
                }
                a[r * n + cc] = acc;
            }
        }
        a
    }

    pub fn jacobi_residual(&self) -> f64 {
        let n = self.dim;
        let basis = identity_rows(n);
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let a = self.bracket(&basis[i], &self.bracket(&basis[j], &basis[k]));
                    let b = self.bracket(&basis[j], &self.bracket(&basis[k], &basis[i]));
                    let c = self.bracket(&basis[k], &self.bracket(&basis[i], &basis[j]));
                    for r in 0..n {
                        worst = worst.max((a[r] + b[r] + c[r]).abs());
                    }
                }
            }
        }
        worst
    }

    /// Residual of `<[X,Y],Z> + <[X,Z],Y> = 0` over the basis.
    pub fn ad_skew_residual(&self) -> f64 {
        let n = self.dim;
        let basis = identity_rows(n);
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let a = self.inner(&self.bracket(&basis[i], &basis[j]), &basis[k]);
                    let b = self.inner(&self.bracket(&basis[i], &basis[k]), &basis[j]);
                    worst = worst.max((a + b).abs());
                }
            }
        }
        worst
    }

    pub fn inner(&self, x: &[f64], y: &[f64]) -> f64 {
        let n = self.dim;
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += x[i] * y[j] * self.metric[i * n + j];
            }
        }
        acc
    }

    /// Orthogonal direct sum, relabelling nothing (labels must be unique).
    pub fn direct_sum(&self, other: &LieAlgebra, name: &str) -> Result<LieAlgebra> {
        let n = self.dim + other.dim;
        let mut labels = self.labels.clone();
        labels.extend(other.labels.iter().cloned());
        let mut c = vec![0.0; n * n * n];
        for k in 0..self.dim {
            for i in 0..self.dim {
                for j in 0..self.dim {
                    c[(k * n + i) * n + j] = self.structure_constant(k, i, j);
                }
            }
        }
        let o = self.dim;
        for k in 0..other.dim {
            for i in 0..other.dim {
                for j in 0..other.dim {
                    c[((k + o) * n + i + o) * n + j + o] = other.structure_constant(k, i, j);
                }
            }
        }
        let mut metric = vec![0.0; n * n];
        for i in 0..self.dim {
            for j in 0..self.dim {
                metric[i * n + j] = self.metric[i * self.dim + j];
            }
        }
        for i in 0..other.dim {
            for j in 0..other.dim {
                metric[(i + o) * n + j + o] = other.metric[i * other.dim + j];
            }
        }
        let mut alg = LieAlgebra { name: name.into(), dim: n, labels, c, metric, bi_invariant: false };
        alg.bi_invariant = self.bi_invariant && other.bi_invariant;
        Ok(alg)
    }
}

fn identity_matrix(n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = 1.0;
    }
    m
}

fn identity_rows(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| {
            let mut v = vec![0.0; n];
            v[i] = 1.0;
            v
        })
        .collect()
}

/// An orthogonal complex structure on the algebra, as a real matrix acting
/// on column vectors.
#[derive(Clone, Debug)]
pub struct OrthogonalComplexStructure {
    pub dim: usize,
    pub j: Vec<f64>,
}

impl OrthogonalComplexStructure {
    pub fn new(alg: &LieAlgebra, j: Vec<f64>) -> Result<Self> {
        let n = alg.dim;
        if j.len() != n * n {
            return Err(Error::InvalidStructure(format!("J must be {n} x {n}")));
        }
        let s = OrthogonalComplexStructure { dim: n, j };
        let sq = s.square_defect();
        if sq > 1e-12 {
            return Err(Error::InvalidStructure(format!("J^2 != -I (defect {sq:.3e})")));
        }
        let orth = s.orthogonality_defect(alg);
        if orth > 1e-12 {
            return Err(Error::InvalidStructure(format!(
                "J not metric-compatible (defect {orth:.3e})"
            )));
        }
        Ok(s)
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let n = self.dim;
        (0..n)
            .map(|r| (0..n).map(|c| self.j[r * n + c] * v[c]).sum())
            .collect()
    }

    pub fn square_defect(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0f64;
        for r in 0..n {
            for c in 0..n {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += self.j[r * n + k] * self.j[k * n + c];
                }
                let expect = if r == c { -1.0 } else { 0.0 };
                worst = worst.max((acc - expect).abs());
            }
        }
        worst
    }

    pub fn orthogonality_defect(&self, alg: &LieAlgebra) -> f64 {
        let n = self.dim;
        let mut worst = 0.0f64;
        // J^t g J = g
        for r in 0..n {
            for c in 0..n {
                let mut acc = 0.0;
                for a in 0..n {
                    for b in 0..n {
                        acc += self.j[a * n + r] * alg.metric[a * n + b] * self.j[b * n + c];
                    }
                }
                worst = worst.max((acc - alg.metric[r * n + c]).abs());
            }
        }
        worst
    }
}

/// Residual of the integrability condition
/// `J([X,Y] - [JX,JY]) = [JX,Y] + [X,JY]` over all basis pairs.
pub fn check_integrability(alg: &LieAlgebra, j: &OrthogonalComplexStructure) -> f64 {
    let n = alg.dim;
    let basis = identity_rows(n);
    let mut worst = 0.0f64;
    for a in 0..n {
        for b in a + 1..n {
            let x = &basis[a];
            let y = &basis[b];
            let jx = j.apply(x);
            let jy = j.apply(y);
            let mut lhs_arg = alg.bracket(x, y);
            let sub = alg.bracket(&jx, &jy);
            for r in 0..n {
                lhs_arg[r] -= sub[r];
            }
            let lhs = j.apply(&lhs_arg);
            let r1 = alg.bracket(&jx, y);
            let r2 = alg.bracket(x, &jy);
            for r in 0..n {
                worst = worst.max((lhs[r] - r1[r] - r2[r]).abs());
            }
        }
    }
    worst
}

/// Torus subalgebra, positive roots (as functionals on the torus basis,
/// normalized so the bracket eigenvalue is `2 pi i alpha(t)`), and root
/// vectors in the complexification.
#[derive(Clone, Debug)]
pub struct RootDatum {
    pub torus: Vec<Vec<f64>>,
    pub roots: Vec<Vec<f64>>,
    pub root_vectors: Vec<Vec<C64>>,
}

impl RootDatum {
    /// Residual of the defining bracket relation of every root space
    /// against every torus element.
    pub fn bracket_residual(&self, alg: &LieAlgebra) -> f64 {
        let mut worst = 0.0f64;
        for (alpha, u) in self.roots.iter().zip(&self.root_vectors) {
            for (t_idx, t) in self.torus.iter().enumerate() {
                let tc: Vec<C64> = t.iter().map(|&v| C64::new(v, 0.0)).collect();
                let lhs = alg.bracket_c(&tc, u);
                let eig = C64::new(0.0, 2.0 * PI * alpha[t_idx]);
                for r in 0..alg.dim {
                    worst = worst.max((lhs[r] - eig * u[r]).norm());
                }
            }
        }
        worst
    }
}

/// Verifies that a set of signed roots is closed under addition: whenever
/// the sum of two chosen roots is again a root, the sum must itself be a
/// chosen root. Returns the offending pair otherwise.
pub fn check_positive_closure(roots: &[Vec<f64>], signs: &[bool]) -> Result<()> {
    let signed: Vec<Vec<f64>> = roots
        .iter()
        .zip(signs)
        .map(|(r, &s)| r.iter().map(|&v| if s { v } else { -v }).collect())
        .collect();
    let tol = 1e-9;
    let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() < tol);
    for (i, a) in signed.iter().enumerate() {
        for (j, b) in signed.iter().enumerate().skip(i + 1) {
            let sum: Vec<f64> = a.iter().zip(b).map(|(x, y)| x + y).collect();
            // is the sum a root at all (up to sign)?
            let neg: Vec<f64> = sum.iter().map(|v| -v).collect();
            let is_root = roots.iter().any(|r| close(r, &sum) || close(r, &neg));
            if !is_root {
                continue;
            }
            let is_positive = signed.iter().any(|r| close(r, &sum));
            if !is_positive {
                return Err(Error::InvalidStructure(format!(
                    "positive roots not closed under addition: roots {i} and {j} sum to a negative root"
                )));
            }
        }
    }
    Ok(())
}

/// Builds the compatible complex structure whose `+i` eigenspace is the
/// chosen torus half plus the signed root spaces.
///
/// `torus_j` is a `d x d` real matrix giving a metric-compatible complex
/// structure on the torus subalgebra (in the torus basis); `signs[j]`
/// selects the root vector (`true`) or its conjugate (`false`) for root `j`.
pub fn samelson_structure(
    alg: &LieAlgebra,
    datum: &RootDatum,
    torus_j: &[f64],
    signs: &[bool],
) -> Result<OrthogonalComplexStructure> {
    let m = alg.dim;
    if !m.is_multiple_of(2) {
        return Err(Error::InvalidStructure(format!("dimension {m} is odd")));
    }
    let d = datum.torus.len();
    if torus_j.len() != d * d {
        return Err(Error::InvalidStructure(format!("torus J must be {d} x {d}")));
    }
    if signs.len() != datum.roots.len() {
        return Err(Error::InvalidStructure("one sign per root required".into()));
    }
    let residual = datum.bracket_residual(alg);
    if residual > 1e-10 {
        return Err(Error::InvalidStructure(format!(
            "root datum fails the bracket relation (residual {residual:.3e})"
        )));
    }
    check_positive_closure(&datum.roots, signs)?;

    // Assemble the real basis B = (torus, re u_j, im u_j) and J in it.
    let mut basis: Vec<Vec<f64>> = datum.torus.clone();
    for (u, &sign) in datum.root_vectors.iter().zip(signs) {
        let chosen: Vec<C64> = if sign { u.clone() } else { u.iter().map(|c| c.conj()).collect() };
        basis.push(chosen.iter().map(|c| c.re).collect());
        basis.push(chosen.iter().map(|c| c.im).collect());
    }
    if basis.len() != m {
        return Err(Error::InvalidStructure(format!(
            "torus + root spaces span dimension {}, expected {m}",
            basis.len()
        )));
    }
    // J in the B basis: torus block is torus_j; each root pair (a, b)
    // spanned by u = a + ib with J u = i u maps a -> -b, b -> a.
    let mut j_in_b = vec![0.0; m * m];
    for r in 0..d {
        for c in 0..d {
            j_in_b[r * m + c] = torus_j[r * d + c];
        }
    }
    for (pair, _) in datum.roots.iter().enumerate() {
        let a = d + 2 * pair;
        let b = d + 2 * pair + 1;
        j_in_b[b * m + a] = -1.0;
        j_in_b[a * m + b] = 1.0;
    }
    // change of basis: J = B J_B B^{-1} with B columns the basis vectors
    let b_mat: Vec<C64> = {
        let mut v = vec![C64::default(); m * m];
        for (col, vec_) in basis.iter().enumerate() {
            for r in 0..m {
                v[r * m + col] = C64::new(vec_[r], 0.0);
            }
        }
        v
    };
    let b_inv = complex_inverse(&b_mat, m, 1e-12)
        .map_err(|_| Error::InvalidStructure("torus/root basis is degenerate".into()))?;
    let mut j = vec![0.0; m * m];
    for r in 0..m {
        for c in 0..m {
            let mut acc = C64::default();
            for s in 0..m {
                for t in 0..m {
                    acc += b_mat[r * m + s] * j_in_b[s * m + t] * b_inv[t * m + c];
                }
            }
            j[r * m + c] = acc.re;
        }
    }
    let structure = OrthogonalComplexStructure::new(alg, j)?;

    // The construction must be integrable and genuinely polarizing.
    let integ = check_integrability(alg, &structure);
    if integ > 1e-10 {
        return Err(Error::InvalidStructure(format!(
            "constructed J fails integrability (residual {integ:.3e})"
        )));
    }
    let conditions = samelson_conditions(alg, &structure);
    if conditions.isotropy > 1e-10 || !conditions.spans || !conditions.trivial_real_intersection {
        return Err(Error::InvalidStructure(format!(
            "subalgebra conditions failed: isotropy {:.3e}, spans {}, real intersection trivial {}",
            conditions.isotropy, conditions.spans, conditions.trivial_real_intersection
        )));
    }
    Ok(structure)
}

/// The three defining conditions of the polarization subalgebra
/// `s = +i eigenspace of J`: isotropy of the inner product on `s`,
/// `s` meeting the real algebra trivially, and `s + sbar` spanning the
/// complexification.
pub struct SamelsonConditions {
    pub isotropy: f64,
    pub trivial_real_intersection: bool,
    pub spans: bool,
    /// Residual of `[s, s] subset s`, the subalgebra property.
    pub closure: f64,
}

pub fn samelson_conditions(alg: &LieAlgebra, j: &OrthogonalComplexStructure) -> SamelsonConditions {
    let m = alg.dim;
    // s basis: v - i J v over the standard basis (rank m/2).
    let basis = identity_rows(m);
    let s_vectors: Vec<Vec<C64>> = basis
        .iter()
        .map(|v| {
            let jv = j.apply(v);
            (0..m).map(|r| C64::new(v[r], -jv[r])).collect()
        })
        .collect();
    let mut isotropy = 0.0f64;
    for a in &s_vectors {
        for b in &s_vectors {
            isotropy = isotropy.max(alg.inner_c(a, b).norm());
        }
    }
    // rank of s must be m/2; rank of [s; conj(s)] must be m
    let mut stacked = Vec::with_capacity(m * m);
    for v in &s_vectors {
        stacked.extend(v.iter().copied());
    }
    let rank_s = complex_rank(&stacked, m, m, 1e-9);
    let mut both = stacked.clone();
    for v in &s_vectors {
        both.extend(v.iter().map(|c| c.conj()));
    }
    let rank_both = complex_rank(&both, 2 * m, m, 1e-9);
    let spans = rank_both == m;
    let trivial_real_intersection = rank_s * 2 == m && spans;

    // closure: [s, s] stays in s; test on the eigen-projection.
    let mut closure = 0.0f64;
    for a in &s_vectors {
        for b in &s_vectors {
            let br = alg.bracket_c(a, b);
            // component along sbar: (1 - iJ)/2 projects onto s, so the
            // defect is the (1 + iJ)/2 part
            let jbr = apply_c(j, &br);
            for r in 0..m {
                let defect = (br[r] + C64::new(0.0, 1.0) * jbr[r]) / 2.0;
                closure = closure.max(defect.norm());
            }
        }
    }
    SamelsonConditions { isotropy, trivial_real_intersection, spans, closure }
}

fn apply_c(j: &OrthogonalComplexStructure, v: &[C64]) -> Vec<C64> {
    let n = j.dim;
    (0..n)
        .map(|r| (0..n).map(|c| v[c] * j.j[r * n + c]).sum())
        .collect()
}

/// Unitary basis adapted to `J`: orthonormal pairs `(v_i, J v_i)` built by
/// direct construction (never an eigensolver), and the complex frame
/// `e_i = (v_i - i J v_i) / sqrt(2)`.
pub fn adapted_basis(alg: &LieAlgebra, j: &OrthogonalComplexStructure) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    let m = alg.dim;
    let mut pairs: Vec<(Vec<f64>, Vec<f64>)> = Vec::with_capacity(m / 2);
    let mut used: Vec<Vec<f64>> = Vec::with_capacity(m);
    'candidates: for cand in identity_rows(m) {
        if pairs.len() == m / 2 {
            break;
        }
        // project out the span of the pairs found so far
        let mut v = cand;
        for u in &used {
            let coeff = alg.inner(&v, u) / alg.inner(u, u);
            for r in 0..m {
                v[r] -= coeff * u[r];
            }
        }
        let norm = alg.inner(&v, &v).sqrt();
        if norm < 1e-8 {
            continue 'candidates;
        }
        for r in 0..m {
            v[r] /= norm;
        }
        let jv = j.apply(&v);
        used.push(v.clone());
        used.push(jv.clone());
        pairs.push((v, jv));
    }
    if pairs.len() != m / 2 {
        return Err(Error::InvalidStructure("failed to build an adapted basis".into()));
    }
    Ok(pairs)
}

/// Complex frame vectors `e_i = (v_i - i J v_i)/sqrt(2)` from adapted pairs.
fn complex_frame(pairs: &[(Vec<f64>, Vec<f64>)]) -> Vec<Vec<C64>> {
    let s = 1.0 / 2.0f64.sqrt();
    pairs
        .iter()
        .map(|(v, jv)| v.iter().zip(jv).map(|(&a, &b)| C64::new(a * s, -b * s)).collect())
        .collect()
}

/// Numeric report of the algebraic flatness computation.
#[derive(Clone, Debug)]
pub struct AlgebraicBismutReport {
    /// Residual of bi-invariance `<[X,Y],Z> + <[X,Z],Y>` over the basis.
    pub ad_skew: f64,
    /// Integrability residual of `J`.
    pub integrability: f64,
    /// `max |T^k_ij - C^k_ij / 2|`: torsion against complex structure constants.
    pub torsion_vs_structure: f64,
    /// Largest coefficient of the Bismut connection in the invariant frame.
    pub bismut_connection: f64,
    /// Cyclic quadratic torsion identity residual.
    pub torsion_jacobi: f64,
    /// Right side of the conjugate-derivative identity (must vanish here).
    pub conjugate_rhs: f64,
    /// `sum |T^k_ij|^2` over all components.
    pub torsion_norm_sq: f64,
}

impl AlgebraicBismutReport {
    pub fn max_residual(&self) -> f64 {
        self.ad_skew
            .max(self.integrability)
            .max(self.torsion_vs_structure)
            .max(self.bismut_connection)
            .max(self.torsion_jacobi)
            .max(self.conjugate_rhs)
    }
}

/// Computes the invariant-frame Chern/Bismut data of `(G, J, <,>)` directly
/// from structure constants and verifies the flatness package.
pub fn algebraic_bismut_check(
    alg: &LieAlgebra,
    j: &OrthogonalComplexStructure,
) -> Result<AlgebraicBismutReport> {
    if !alg.bi_invariant {
        return Err(Error::InvalidAlgebra(format!(
            "{} does not carry a bi-invariant inner product",
            alg.name
        )));
    }
    let m = alg.dim;
    let n = m / 2;
    let pairs = adapted_basis(alg, j)?;
    let frame = complex_frame(&pairs);
    let frame_bar: Vec<Vec<C64>> = frame
        .iter()
        .map(|e| e.iter().map(|c| c.conj()).collect())
        .collect();

    // expansion of w in {e, ebar}: alpha_i = <w, ebar_i>, beta_i = <w, e_i>
    let expand = |w: &[C64]| -> (Vec<C64>, Vec<C64>) {
        let alpha: Vec<C64> = frame_bar.iter().map(|eb| alg.inner_c(w, eb)).collect();
        let beta: Vec<C64> = frame.iter().map(|e| alg.inner_c(w, e)).collect();
        (alpha, beta)
    };

    // complex structure constants and integrability leak
    let mut cc = vec![C64::default(); n * n * n];
    let mut integrability = check_integrability(alg, j);
    for i in 0..n {
        for jdx in 0..n {
            let br = alg.bracket_c(&frame[i], &frame[jdx]);
            let (alpha, beta) = expand(&br);
            for k in 0..n {
                cc[(k * n + i) * n + jdx] = alpha[k];
                integrability = integrability.max(beta[k].norm());
            }
        }
    }

    // d phi_k(E_a, E_b) = -phi_k([E_a, E_b]); the (1,1) coefficients give
    // the (0,1) half of the connection, closed up skew-Hermitian.
    // s[jdx][k][mm] = d phi_k(e_jdx, ebar_mm)
    let mut s = vec![C64::default(); n * n * n];
    for jdx in 0..n {
        for mm in 0..n {
            let br = alg.bracket_c(&frame[jdx], &frame_bar[mm]);
            let (alpha, _) = expand(&br);
            for k in 0..n {
                s[(jdx * n + k) * n + mm] = -alpha[k];
            }
        }
    }
    // theta_{jk} coefficients over (e_m, ebar_m): theta'' over ebar,
    // theta' = -conj(theta''-transposed) over e.
    let theta_bar = |jdx: usize, k: usize, mm: usize| s[(jdx * n + k) * n + mm];
    let theta_hol =
        |jdx: usize, k: usize, mm: usize| -s[(k * n + jdx) * n + mm].conj();

    // torsion: tau_k(e_i, e_j) = d phi_k(e_i,e_j) + theta_{jk}(e_i) - theta_{ik}(e_j)
    let mut t = vec![C64::default(); n * n * n];
    for k in 0..n {
        for i in 0..n {
            for jdx in 0..n {
                let dphi = -cc[(k * n + i) * n + jdx];
                let tau = dphi + theta_hol(jdx, k, i) - theta_hol(i, k, jdx);
                t[(k * n + i) * n + jdx] = tau / 2.0;
            }
        }
    }

    let mut torsion_vs_structure = 0.0f64;
    for idx in 0..n * n * n {
        torsion_vs_structure = torsion_vs_structure.max((t[idx] - cc[idx] / 2.0).norm());
    }

    // Bismut coefficients: theta^b = theta + 2 gamma with
    // gamma_{ij}(e_m) = T^j_im, gamma_{ij}(ebar_m) = -conj(T^i_jm).
    let t_at = |k: usize, i: usize, jdx: usize| t[(k * n + i) * n + jdx];
    let mut bismut_connection = 0.0f64;
    for i in 0..n {
        for jdx in 0..n {
            for mm in 0..n {
                let hol = theta_hol(i, jdx, mm) + 2.0 * t_at(jdx, i, mm);
                let bar = theta_bar(i, jdx, mm) - 2.0 * t_at(i, jdx, mm).conj();
                bismut_connection = bismut_connection.max(hol.norm()).max(bar.norm());
            }
        }
    }

    // cyclic quadratic identity
    let mut torsion_jacobi = 0.0f64;
    for i in 0..n {
        for jdx in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut acc = C64::default();
                    for r in 0..n {
                        acc += t_at(r, i, jdx) * t_at(l, r, k)
                            + t_at(r, jdx, k) * t_at(l, r, i)
                            + t_at(r, k, i) * t_at(l, r, jdx);
                    }
                    torsion_jacobi = torsion_jacobi.max(acc.norm());
                }
            }
        }
    }

    // conjugate-direction right side; with parallel torsion it must vanish
    let mut conjugate_rhs = 0.0f64;
    for i in 0..n {
        for k in 0..n {
            for l in 0..n {
                for jdx in 0..n {
                    let mut acc = C64::default();
                    for r in 0..n {
                        acc += t_at(i, l, r) * t_at(k, jdx, r).conj()
                            - t_at(i, k, r) * t_at(l, jdx, r).conj()
                            - t_at(jdx, l, r) * t_at(k, i, r).conj()
                            + t_at(jdx, k, r) * t_at(l, i, r).conj()
                            - t_at(r, k, l) * t_at(r, i, jdx).conj();
                    }
                    conjugate_rhs = conjugate_rhs.max((acc * (2.0 / 3.0)).norm());
                }
            }
        }
    }

    let torsion_norm_sq = t.iter().map(|v| v.norm_sqr()).sum();

    Ok(AlgebraicBismutReport {
        ad_skew: alg.ad_skew_residual(),
        integrability,
        torsion_vs_structure,
        bismut_connection,
        torsion_jacobi,
        conjugate_rhs,
        torsion_norm_sq,
    })
}

// ---------------------------------------------------------------------------
// Exponential chart export
// ---------------------------------------------------------------------------

/// Left-invariant unitary coframe of `(G, J, <,>)` in exponential
/// coordinates, evaluated through the truncated series
/// `sum_{k=0}^K (-ad_x)^k / (k+1)!` applied to `dx`.
pub struct MaurerCartanCoframe {
    alg: LieAlgebra,
    pairs: Vec<(Vec<f64>, Vec<f64>)>,
    truncation: usize,
    /// Reject evaluation when the series tail bound exceeds this.
    pub bound_tol: f64,
}

impl MaurerCartanCoframe {
    /// Frobenius norm of `ad_x` at the point's real coordinates.
    fn ad_norm(&self, point: &ChartPoint) -> f64 {
        let x = self.real_coordinates_values(point);
        let a = self.alg.ad_matrix(&x);
        a.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Tail bound `|ad_x|^{K+1} / (K+2)!` for the truncated series.
    pub fn truncation_bound(&self, point: &ChartPoint) -> f64 {
        let norm = self.ad_norm(point);
        let k = self.truncation;
        let mut bound = norm.powi(k as i32 + 1);
        for f in 2..=(k + 2) {
            bound /= f as f64;
        }
        bound
    }

    fn real_coordinates_values(&self, point: &ChartPoint) -> Vec<f64> {
        let m = self.alg.dim;
        let mut x = vec![0.0; m];
        for (i, (v, jv)) in self.pairs.iter().enumerate() {
            let z = point.coord(i);
            for r in 0..m {
                x[r] += z.re * v[r] + z.im * jv[r];
            }
        }
        x
    }

    fn real_coordinate_jets(&self, point: &ChartPoint, order: usize) -> Result<Vec<Jet2>> {
        let m = self.alg.dim;
        let n = point.dim();
        let half = C64::new(0.5, 0.0);
        let half_i = C64::new(0.0, -0.5);
        let mut x = vec![Jet2::zero(n, order); m];
        for (i, (v, jv)) in self.pairs.iter().enumerate() {
            let z = Jet2::coordinate(point, i, false, order)?;
            let zb = Jet2::coordinate(point, i, true, order)?;
            // Re z = (z + zbar)/2, Im z = (z - zbar)/(2i)
            let re = z.add(&zb).scale(half);
            let im = z.sub(&zb).scale(half_i);
            for r in 0..m {
                if v[r] != 0.0 {
                    x[r] = x[r].add(&re.scale(C64::new(v[r], 0.0)));
                }
                if jv[r] != 0.0 {
                    x[r] = x[r].add(&im.scale(C64::new(jv[r], 0.0)));
                }
            }
        }
        Ok(x)
    }
}

impl CoframeField for MaurerCartanCoframe {
    fn dim(&self) -> usize {
        self.alg.dim / 2
    }

    fn in_domain(&self, point: &ChartPoint) -> bool {
        self.truncation_bound(point) <= self.bound_tol
    }

    fn coefficients(&self, point: &ChartPoint, order: usize) -> Result<Vec<Vec<Jet2>>> {
        let bound = self.truncation_bound(point);
        if bound > self.bound_tol {
            return Err(Error::TruncationBound { bound, tol: self.bound_tol });
        }
        let m = self.alg.dim;
        let n = m / 2;
        let x = self.real_coordinate_jets(point, order)?;

        // ad_x as a jet matrix (linear in x)
        let mut ad = vec![Jet2::zero(n, order); m * m];
        for r in 0..m {
            for c in 0..m {
                let mut acc = Jet2::zero(n, order);
                for i in 0..m {
                    let coeff = self.alg.structure_constant(r, i, c);
                    if coeff != 0.0 {
                        acc = acc.add(&x[i].scale(C64::new(coeff, 0.0)));
                    }
                }
                ad[r * m + c] = acc;
            }
        }

        // F = sum_{k<=K} (-ad)^k / (k+1)!
        let mut f: Vec<Jet2> = (0..m * m)
            .map(|idx| {
                if idx / m == idx % m {
                    Jet2::one(n, order)
                } else {
                    Jet2::zero(n, order)
                }
            })
            .collect();
        let mut term = f.clone();
        for k in 1..=self.truncation {
            // term <- term * (-ad) / (k+1)
            let mut next = vec![Jet2::zero(n, order); m * m];
            let scale = C64::new(-1.0 / (k as f64 + 1.0), 0.0);
            for r in 0..m {
                for c in 0..m {
                    let mut acc = Jet2::zero(n, order);
                    for s in 0..m {
                        if term[r * m + s].max_abs() == 0.0 || ad[s * m + c].max_abs() == 0.0 {
                            continue;
                        }
                        acc = acc.add(&term[r * m + s].mul(&ad[s * m + c]));
                    }
                    next[r * m + c] = acc.scale(scale);
                }
            }
            // accumulate: note term already carries 1/(k+1)! after scaling
            term = next;
            for idx in 0..m * m {
                f[idx] = f[idx].add(&term[idx]);
            }
        }

        // phi_i = (1/sqrt(2)) sum_a (v_i + i J v_i)_a sigma^a,
        // sigma^a = sum_b F[a][b] dx_b, dx_b expanded over (dz, dzbar)
        let inv_sqrt2 = 1.0 / 2.0f64.sqrt();
        let mut rows = Vec::with_capacity(n);
        for (v, jv) in &self.pairs {
            let mut row = vec![Jet2::zero(n, order); 2 * n];
            // w_b = sum_a (v + i Jv)_a F[a][b]
            let mut w = vec![Jet2::zero(n, order); m];
            for b in 0..m {
                let mut acc = Jet2::zero(n, order);
                for a in 0..m {
                    let coef = C64::new(v[a] * inv_sqrt2, jv[a] * inv_sqrt2);
                    if coef.norm() == 0.0 {
                        continue;
                    }
                    acc = acc.add(&f[a * m + b].scale(coef));
                }
                w[b] = acc;
            }
            // dx_b = sum_j v_j[b] (dz_j + dzbar_j)/2 + (Jv_j)[b] (dz_j - dzbar_j)/(2i)
            for (jdx, (vj, jvj)) in self.pairs.iter().enumerate() {
                let mut hol = Jet2::zero(n, order);
                let mut bar = Jet2::zero(n, order);
                for b in 0..m {
                    // coefficient of dz_j in dx_b: (v_j[b] - i Jv_j[b]) / 2
                    let cz = C64::new(vj[b] / 2.0, -jvj[b] / 2.0);
                    let czb = C64::new(vj[b] / 2.0, jvj[b] / 2.0);
                    if cz.norm() != 0.0 {
                        hol = hol.add(&w[b].scale(cz));
                    }
                    if czb.norm() != 0.0 {
                        bar = bar.add(&w[b].scale(czb));
                    }
                }
                row[jdx] = hol;
                row[n + jdx] = bar;
            }
            rows.push(row);
        }
        Ok(rows)
    }
}

/// Exports the invariant coframe of `(alg, J)` as a chart-level coframe
/// field in exponential coordinates, truncating the series at order `k`.
pub fn exp_chart_coframe(
    alg: &LieAlgebra,
    j: &OrthogonalComplexStructure,
    k: usize,
    bound_tol: f64,
) -> Result<MaurerCartanCoframe> {
    if k < 1 {
        return Err(Error::InvalidStructure("series truncation must be >= 1".into()));
    }
    let pairs = adapted_basis(alg, j)?;
    Ok(MaurerCartanCoframe { alg: alg.clone(), pairs, truncation: k, bound_tol })
}

/// Wraps the truncated exponential-chart coframe of `(algebra, structure)`
/// as a chart model sampled from the ball of the given radius; integrable
/// structures on bi-invariant algebras carry the Bismut-flat claim.
pub fn exp_chart_model(
    alg: &LieAlgebra,
    j: &OrthogonalComplexStructure,
    structure_label: &str,
    k: usize,
    radius: f64,
    bound_tol: f64,
) -> Result<crate::catalog::HermitianModel> {
    let cf = exp_chart_coframe(alg, j, k, bound_tol)?;
    let integrable = check_integrability(alg, j) < 1e-10;
    let flags = crate::catalog::ModelFlags {
        bismut_flat: alg.bi_invariant && integrable,
        ..Default::default()
    };
    Ok(crate::catalog::HermitianModel {
        name: format!("exp-chart({},{structure_label},K={k},r={radius})", alg.name),
        dim: alg.dim / 2,
        coframe: std::sync::Arc::new(cf),
        flags,
        sampler: crate::catalog::Sampler::Annulus { rmin: 0.0, rmax: radius },
        reference_torsion: None,
    })
}

// ---------------------------------------------------------------------------
// Catalog
// ---------------------------------------------------------------------------

fn su2(labels: [&str; 3]) -> Result<LieAlgebra> {
    LieAlgebra::new(
        "su2",
        labels.iter().map(|s| s.to_string()).collect(),
        &[
            (0, 1, vec![(2, 2.0)]), // [X, Y] = 2Z
            (1, 2, vec![(0, 2.0)]), // [Y, Z] = 2X
            (2, 0, vec![(1, 2.0)]), // [Z, X] = 2Y
        ],
    )
}

fn abelian(k: usize, prefix: &str) -> Result<LieAlgebra> {
    LieAlgebra::new(
        &format!("r{k}"),
        (1..=k).map(|i| format!("{prefix}{i}")).collect(),
        &[],
    )
}

/// Looks up a catalog algebra by name.
pub fn algebra_by_name(name: &str) -> Result<LieAlgebra> {
    match name {
        "su2" => su2(["X", "Y", "Z"]),
        "su2+r" => su2(["X", "Y", "Z"])?.direct_sum(&abelian(1, "W")?, "su2+r"),
        "su2+r3" => su2(["X", "Y", "Z"])?.direct_sum(&abelian(3, "W")?, "su2+r3"),
        "su2+su2" => {
            let a = su2(["X", "Y", "Z"])?;
            let b = su2(["X1", "Y1", "Z1"])?;
            a.direct_sum(&b, "su2+su2")
        }
        "su2+su2+r2" => {
            let a = algebra_by_name("su2+su2")?;
            a.direct_sum(&abelian(2, "U")?, "su2+su2+r2")
        }
        "r2" => abelian(2, "W"),
        "r4" => abelian(4, "W"),
        "r6" => abelian(6, "W"),
        other => Err(Error::Unknown { kind: "algebra", name: other.into() }),
    }
}

/// Builds a named complex structure on a catalog algebra. Structure names:
///
/// * `su2+r`: `central` (JW = X, JY = Z) and `anti` (JW = X, JY = -Z)
/// * `su2+su2`: `central-ce` (JX = X1, JY = Z, JY1 = Z1) and the
///   non-integrable `factor-swap`
/// * `su2+r3`: `split` (JY = Z, JX = W1, JW2 = W3) and the non-integrable
///   `split-flat` (JX = W1, JY = W2, JZ = W3)
/// * `su2+su2+r2`: `mixed:a=A,b=B` with `A^2 + B^2 = 1`
pub fn structure_by_name(alg: &LieAlgebra, name: &str) -> Result<OrthogonalComplexStructure> {
    let m = alg.dim;
    let mut j = vec![0.0; m * m];
    let mut set = |from: usize, to: usize| {
        // J(basis[from]) = basis[to]; complete with J(to) = -from
        j[to * m + from] = 1.0;
        j[from * m + to] = -1.0;
    };
    match (alg.name.as_str(), name) {
        ("su2+r", "central") => {
            set(3, 0); // W -> X
            set(1, 2); // Y -> Z
        }
        ("su2+r", "anti") => {
            set(3, 0);
            set(2, 1); // Z -> Y, i.e. JY = -Z
        }
        ("su2+su2", "central-ce") => {
            set(0, 3); // X -> X1
            set(1, 2); // Y -> Z
            set(4, 5); // Y1 -> Z1
        }
        ("su2+su2", "factor-swap") => {
            set(0, 3);
            set(1, 4);
            set(2, 5);
        }
        ("su2+r3", "split") => {
            set(1, 2); // Y -> Z
            set(0, 3); // X -> W1
            set(4, 5); // W2 -> W3
        }
        ("su2+r3", "split-flat") => {
            set(0, 3); // X -> W1
            set(1, 4); // Y -> W2
            set(2, 5); // Z -> W3
        }
        ("su2+su2+r2", mixed) if mixed.starts_with("mixed") => {
            let mut a = 0.6;
            let mut b = 0.8;
            if let Some(args) = mixed.strip_prefix("mixed:") {
                for part in args.split(',') {
                    let (k, v) = part
                        .split_once('=')
                        .ok_or_else(|| Error::InvalidStructure(format!("bad parameter `{part}`")))?;
                    let value: f64 = v
                        .trim()
                        .parse()
                        .map_err(|_| Error::InvalidStructure(format!("bad number `{v}`")))?;
                    match k.trim() {
                        "a" => a = value,
                        "b" => b = value,
                        other => {
                            return Err(Error::InvalidStructure(format!("unknown parameter `{other}`")))
                        }
                    }
                }
            }
            if (a * a + b * b - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidStructure(format!(
                    "need a^2 + b^2 = 1, got {}",
                    a * a + b * b
                )));
            }
            // torus: X (0), X1 (3), U1 (6), U2 (7)
            // JX = a X1 + b U1; JX1 = -a X - b U2; JU1 = -b X + a U2; JU2 = b X1 - a U1
            let assign = |j: &mut Vec<f64>, from: usize, coeffs: &[(usize, f64)]| {
                for (to, cv) in coeffs {
                    j[to * m + from] = *cv;
                }
            };
            assign(&mut j, 0, &[(3, a), (6, b)]);
            assign(&mut j, 3, &[(0, -a), (7, -b)]);
            assign(&mut j, 6, &[(0, -b), (7, a)]);
            assign(&mut j, 7, &[(3, b), (6, -a)]);
            // root parts: JY = Z, JY1 = Z1
            j[2 * m + 1] = 1.0;
            j[m + 2] = -1.0;
            j[5 * m + 4] = 1.0;
            j[4 * m + 5] = -1.0;
        }
        (_, other) => {
            return Err(Error::Unknown { kind: "structure", name: other.into() });
        }
    }
    OrthogonalComplexStructure::new(alg, j)
}

/// Root datum of the catalog algebras whose semisimple part is built from
/// `su2` factors: torus = one axis per factor plus the abelian block,
/// one root per `su2` factor.
pub fn standard_root_datum(alg: &LieAlgebra) -> Result<RootDatum> {
    let m = alg.dim;
    let (su2_count, abelian_dims): (usize, usize) = match alg.name.as_str() {
        "su2+r" => (1, 1),
        "su2+r3" => (1, 3),
        "su2+su2" => (2, 0),
        "su2+su2+r2" => (2, 2),
        other => {
            return Err(Error::Unknown { kind: "root datum for algebra", name: other.into() })
        }
    };
    let mut torus = Vec::new();
    // one torus direction per su2 factor: its X axis at offset 3*f
    for f in 0..su2_count {
        let mut t = vec![0.0; m];
        t[3 * f] = 1.0;
        torus.push(t);
    }
    for a in 0..abelian_dims {
        let mut t = vec![0.0; m];
        t[3 * su2_count + a] = 1.0;
        torus.push(t);
    }
    let d = torus.len();
    let mut roots = Vec::new();
    let mut root_vectors = Vec::new();
    for f in 0..su2_count {
        let mut alpha = vec![0.0; d];
        alpha[f] = 1.0 / PI; // [X, Y - iZ] = 2i (Y - iZ) = 2 pi i alpha(X) u
        roots.push(alpha);
        let mut u = vec![C64::default(); m];
        u[3 * f + 1] = C64::new(1.0, 0.0);
        u[3 * f + 2] = C64::new(0.0, -1.0);
        root_vectors.push(u);
    }
    Ok(RootDatum { torus, roots, root_vectors })
}

/// Canonical torus complex structure matching the named structures above.
pub fn standard_torus_structure(alg: &LieAlgebra) -> Result<Vec<f64>> {
    // torus basis order comes from standard_root_datum
    match alg.name.as_str() {
        // torus (X, W): JX = -W, JW = X
        "su2+r" => Ok(vec![0.0, 1.0, -1.0, 0.0]),
        // torus (X, X1): JX = X1, JX1 = -X
        "su2+su2" => Ok(vec![0.0, -1.0, 1.0, 0.0]),
        // torus (X, W1, W2, W3): JX = W1, JW2 = W3
        "su2+r3" => {
            let mut tj = vec![0.0; 16];
            tj[4] = 1.0; // X -> W1 (row 1, col 0)
            tj[1] = -1.0;
            tj[14] = 1.0; // W2 -> W3 (row 3, col 2)
            tj[11] = -1.0;
            Ok(tj)
        }
        // torus (X, X1, U1, U2) with the default mixed parameters
        "su2+su2+r2" => {
            let (a, b) = (0.6, 0.8);
            let mut tj = vec![0.0; 16];
            let assign = |tj: &mut Vec<f64>, from: usize, coeffs: &[(usize, f64)]| {
                for (to, cv) in coeffs {
                    tj[to * 4 + from] = *cv;
                }
            };
            assign(&mut tj, 0, &[(1, a), (2, b)]);
            assign(&mut tj, 1, &[(0, -a), (3, -b)]);
            assign(&mut tj, 2, &[(0, -b), (3, a)]);
            assign(&mut tj, 3, &[(1, b), (2, -a)]);
            Ok(tj)
        }
        other => Err(Error::Unknown { kind: "torus structure for algebra", name: other.into() }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connection::{curvature_pack, max_frame_component, ConnectionPack};

    #[test]
    fn su2_algebra_is_bi_invariant() {
        let alg = algebra_by_name("su2").unwrap();
        assert!(alg.bi_invariant);
        assert!(alg.jacobi_residual() < 1e-14);
        assert!(alg.ad_skew_residual() < 1e-14);
        let x = [1.0, 0.0, 0.0];
        let y = [0.0, 1.0, 0.0];
        let br = alg.bracket(&x, &y);
        assert_eq!(br, vec![0.0, 0.0, 2.0]);
    }

    #[test]
    fn abelian_any_orthogonal_j_is_integrable() {
        let alg = algebra_by_name("r4").unwrap();
        let m = 4;
        let mut j = vec![0.0; m * m];
        j[m] = 1.0; // e1 -> e2
        j[1] = -1.0;
        j[3 * m + 2] = 1.0; // e3 -> e4
        j[2 * m + 3] = -1.0;
        let s = OrthogonalComplexStructure::new(&alg, j).unwrap();
        assert_eq!(check_integrability(&alg, &s), 0.0);
        let report = algebraic_bismut_check(&alg, &s).unwrap();
        assert!(report.max_residual() < 1e-14);
        assert!(report.torsion_norm_sq < 1e-28);
    }

    #[test]
    fn su2_r_central_structure_integrable() {
        let alg = algebra_by_name("su2+r").unwrap();
        let j = structure_by_name(&alg, "central").unwrap();
        assert!(check_integrability(&alg, &j) < 1e-12);
        // the orientation-reversed partner is a valid complex structure too
        // (it corresponds to the opposite positive-root choice)
        let j2 = structure_by_name(&alg, "anti").unwrap();
        assert!(check_integrability(&alg, &j2) < 1e-12);
    }

    #[test]
    fn non_integrable_structures_detected() {
        let alg = algebra_by_name("su2+r3").unwrap();
        let j = structure_by_name(&alg, "split-flat").unwrap();
        let residual = check_integrability(&alg, &j);
        assert!(residual > 1.0, "expected gross non-integrability, got {residual}");

        let alg2 = algebra_by_name("su2+su2").unwrap();
        let j2 = structure_by_name(&alg2, "factor-swap").unwrap();
        assert!(check_integrability(&alg2, &j2) > 1.0);
    }

    #[test]
    fn central_ce_passes_algebraic_flatness() {
        let alg = algebra_by_name("su2+su2").unwrap();
        let j = structure_by_name(&alg, "central-ce").unwrap();
        let report = algebraic_bismut_check(&alg, &j).unwrap();
        assert!(report.max_residual() < 1e-12, "{report:?}");
        // |T|^2 = 2 for the doubled cross-product normalization
        assert!((report.torsion_norm_sq - 2.0).abs() < 1e-12, "{}", report.torsion_norm_sq);
    }

    #[test]
    fn su2_r_passes_algebraic_flatness() {
        let alg = algebra_by_name("su2+r").unwrap();
        let j = structure_by_name(&alg, "central").unwrap();
        let report = algebraic_bismut_check(&alg, &j).unwrap();
        assert!(report.max_residual() < 1e-12, "{report:?}");
    }

    #[test]
    fn mixed_torus_structures_integrable_for_unit_parameters() {
        let alg = algebra_by_name("su2+su2+r2").unwrap();
        for (a, b) in [(1.0, 0.0), (0.0, 1.0), (0.6, 0.8), (-0.28, 0.96)] {
            let j = structure_by_name(&alg, &format!("mixed:a={a},b={b}")).unwrap();
            let residual = check_integrability(&alg, &j);
            assert!(residual < 1e-12, "a={a}, b={b}: residual {residual:.3e}");
            let report = algebraic_bismut_check(&alg, &j).unwrap();
            assert!(report.max_residual() < 1e-12);
        }
        assert!(structure_by_name(&alg, "mixed:a=1,b=1").is_err());
    }

    #[test]
    fn samelson_construction_reproduces_named_structures() {
        for (alg_name, structure_name) in
            [("su2+su2", "central-ce"), ("su2+r", "central"), ("su2+r3", "split")]
        {
            let alg = algebra_by_name(alg_name).unwrap();
            let datum = standard_root_datum(&alg).unwrap();
            assert!(datum.bracket_residual(&alg) < 1e-12);
            let torus_j = standard_torus_structure(&alg).unwrap();
            let signs = vec![true; datum.roots.len()];
            let j = samelson_structure(&alg, &datum, &torus_j, &signs).unwrap();
            let named = structure_by_name(&alg, structure_name).unwrap();
            let worst = j
                .j
                .iter()
                .zip(&named.j)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            assert!(worst < 1e-12, "{alg_name}/{structure_name}: J differs by {worst:.3e}");
        }
    }

    #[test]
    fn samelson_sign_choice_flips_root_plane() {
        let alg = algebra_by_name("su2+r").unwrap();
        let datum = standard_root_datum(&alg).unwrap();
        let torus_j = standard_torus_structure(&alg).unwrap();
        let j = samelson_structure(&alg, &datum, &torus_j, &[false]).unwrap();
        let named = structure_by_name(&alg, "anti").unwrap();
        let worst = j
            .j
            .iter()
            .zip(&named.j)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(worst < 1e-12);
        // still a compatible integrable structure
        assert!(check_integrability(&alg, &j) < 1e-12);
        let conditions = samelson_conditions(&alg, &j);
        assert!(conditions.isotropy < 1e-12);
        assert!(conditions.spans);
        assert!(conditions.closure < 1e-12);
    }

    #[test]
    fn positive_closure_check_catches_bad_sign_choices() {
        // synthetic rank-2 system with roots alpha, beta, alpha + beta
        let roots = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]];
        assert!(check_positive_closure(&roots, &[true, true, true]).is_ok());
        // choosing alpha, beta positive but alpha+beta negative breaks closure
        assert!(check_positive_closure(&roots, &[true, true, false]).is_err());
        // flipping one summand makes the sum (0,1)-type: alpha + (-(alpha+beta)) = -beta
        assert!(check_positive_closure(&roots, &[true, false, false]).is_ok());
    }

    #[test]
    fn exp_chart_identity_at_origin() {
        let alg = algebra_by_name("su2+su2").unwrap();
        let j = structure_by_name(&alg, "central-ce").unwrap();
        let cf = exp_chart_coframe(&alg, &j, 8, 1e-9).unwrap();
        let origin = ChartPoint::new(vec![C64::default(); 3]).unwrap();
        let rows = cf.coefficients(&origin, 1).unwrap();
        // at the origin the coframe is dz / sqrt(2) in the adapted chart
        let inv_sqrt2 = 1.0 / 2.0f64.sqrt();
        for (i, row) in rows.iter().enumerate() {
            for (s, jet) in row.iter().enumerate() {
                let expect = if s == i { C64::new(inv_sqrt2, 0.0) } else { C64::default() };
                assert!(
                    (jet.value() - expect).norm() < 1e-14,
                    "entry ({i},{s}) = {}",
                    jet.value()
                );
            }
        }
        assert_eq!(cf.truncation_bound(&origin), 0.0);
    }

    #[test]
    fn exp_chart_is_bismut_flat_numerically() {
        let alg = algebra_by_name("su2+su2").unwrap();
        let j = structure_by_name(&alg, "central-ce").unwrap();
        let cf = exp_chart_coframe(&alg, &j, 20, 1e-9).unwrap();
        let points = [
            vec![C64::new(0.2, 0.1), C64::new(-0.1, 0.15), C64::new(0.05, -0.2)],
            vec![C64::new(-0.25, 0.0), C64::new(0.1, 0.1), C64::new(0.0, 0.3)],
        ];
        for coords in points {
            let p = ChartPoint::new(coords).unwrap();
            assert!(cf.truncation_bound(&p) < 1e-12);
            let pack = ConnectionPack::new(&cf, &p, 2).unwrap();
            let curv = curvature_pack(&pack).unwrap();
            let residual = max_frame_component(&pack.frame, &curv.bismut);
            assert!(residual < 1e-6, "Bismut curvature {residual:.3e} at {p}");
            // torsion norm matches the algebraic value |T|^2 = 2
            assert!((pack.torsion.norm_sq() - 2.0).abs() < 1e-6);
        }
    }

    #[test]
    fn exp_chart_respects_truncation_tolerance() {
        let alg = algebra_by_name("su2").unwrap();
        let alg = alg.direct_sum(&abelian(1, "W").unwrap(), "su2+r").unwrap();
        let j = structure_by_name(&alg, "central").unwrap();
        let cf = exp_chart_coframe(&alg, &j, 2, 1e-12).unwrap();
        let p = ChartPoint::new(vec![C64::new(0.5, 0.0), C64::new(0.0, 0.5)]).unwrap();
        assert!(matches!(
            cf.coefficients(&p, 1),
            Err(Error::TruncationBound { .. })
        ));
    }

    #[test]
    fn abelian_exp_chart_is_constant() {
        let alg = algebra_by_name("r4").unwrap();
        let m = 4;
        let mut jm = vec![0.0; m * m];
        jm[m] = 1.0;
        jm[1] = -1.0;
        jm[3 * m + 2] = 1.0;
        jm[2 * m + 3] = -1.0;
        let j = OrthogonalComplexStructure::new(&alg, jm).unwrap();
        let cf = exp_chart_coframe(&alg, &j, 5, 1e-9).unwrap();
        let p = ChartPoint::new(vec![C64::new(0.4, -0.2), C64::new(0.3, 0.6)]).unwrap();
        let pack = ConnectionPack::new(&cf, &p, 2).unwrap();
        let curv = curvature_pack(&pack).unwrap();
        assert!(curv.chern.max_abs_value() < 1e-14);
        assert!(curv.riem1.max_abs_value() < 1e-14);
        assert!(curv.bismut.max_abs_value() < 1e-14);
        assert!(pack.torsion.norm_sq() < 1e-28);
    }
}
