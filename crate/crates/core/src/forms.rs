//! Pointwise exterior algebra of complex differential forms on a chart.
//!
//! A [`Form`] of degree `k` on `C^n` is a sparse map from strictly
//! increasing multi-indices over the `2n` basis covectors to jet-valued
//! coefficients. The global basis ordering is fixed: slots `0..n` are the
//! unbarred covectors `dz_1..dz_n`, slots `n..2n` are `dzbar_1..dzbar_n`.
//! Multi-indices are stored as bitmasks over those slots, so every sign is
//! normalized at insertion and iteration order (hence every reported
//! residual) is reproducible bit for bit.
//!
//! The same structure doubles as a form over a moving coframe basis: the
//! slot `i` is then read as `phi_i` and slot `n+i` as `phibar_i`, and
//! [`Form::substitute`] converts between the two readings. Type `(p, q)`
//! counts the unbarred and barred slots of each term.

use crate::error::{Error, Result};
use crate::jets::{Jet2, C64};
use std::collections::BTreeMap;

/// Bitmask over the `2n` basis covectors; bit `s` set means slot `s` occurs.
pub type BasisMask = u32;

/// Sign of the permutation that merges two disjoint ascending masks.
fn merge_sign(a: BasisMask, b: BasisMask) -> f64 {
    let mut inversions = 0u32;
    let mut rest = b;
    while rest != 0 {
        let bit = rest.trailing_zeros();
        // count members of `a` strictly above `bit`
        inversions += (a >> (bit + 1)).count_ones();
        rest &= rest - 1;
    }
    if inversions.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// A homogeneous-degree complex differential form with jet coefficients.
#[derive(Clone, Debug)]
pub struct Form {
    dim: usize,
    degree: usize,
    terms: BTreeMap<BasisMask, Jet2>,
}

impl Form {
    pub fn zero(dim: usize, degree: usize) -> Self {
        Form { dim, degree, terms: BTreeMap::new() }
    }

    /// The basis covector in `slot` (0-based; `slot >= dim` means barred).
    pub fn basis(dim: usize, slot: usize, coeff: Jet2) -> Self {
        assert!(slot < 2 * dim);
        let mut f = Form::zero(dim, 1);
        f.insert(1 << slot, coeff);
        f
    }

    /// A scalar (degree-0 form) holding one jet.
    pub fn scalar(dim: usize, value: Jet2) -> Self {
        let mut f = Form::zero(dim, 0);
        f.insert(0, value);
        f
    }

    /// The basis form of an arbitrary mask with unit coefficient.
    pub fn basis_from_mask(dim: usize, mask: BasisMask) -> Self {
        let mut f = Form::zero(dim, mask.count_ones() as usize);
        f.insert(mask, Jet2::one(dim, 0));
        f
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&BasisMask, &Jet2)> {
        self.terms.iter()
    }

    /// Coefficient jet of `mask`, or a zero jet when absent.
    pub fn coefficient(&self, mask: BasisMask) -> Jet2 {
        self.terms
            .get(&mask)
            .cloned()
            .unwrap_or_else(|| Jet2::zero(self.dim, 0))
    }

    pub fn coefficient_value(&self, mask: BasisMask) -> C64 {
        self.terms.get(&mask).map(Jet2::value).unwrap_or_default()
    }

    fn insert(&mut self, mask: BasisMask, coeff: Jet2) {
        debug_assert_eq!(mask.count_ones() as usize, self.degree);
        match self.terms.entry(mask) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(coeff);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let sum = o.get().add(&coeff);
                o.insert(sum);
            }
        }
    }

    /// Removes terms whose coefficient value and derivatives are exactly zero.
    pub fn compact(mut self) -> Self {
        self.terms.retain(|_, j| j.max_abs() != 0.0);
        self
    }

    pub fn add(&self, other: &Form) -> Form {
        assert_eq!(self.dim, other.dim);
        assert_eq!(self.degree, other.degree, "cannot add forms of different degree");
        let mut out = self.clone();
        for (mask, coeff) in &other.terms {
            out.insert(*mask, coeff.clone());
        }
        out
    }

    pub fn sub(&self, other: &Form) -> Form {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Form {
        self.map_coeffs(Jet2::neg)
    }

    pub fn scale(&self, c: C64) -> Form {
        self.map_coeffs(|j| j.scale(c))
    }

    pub fn scale_jet(&self, j: &Jet2) -> Form {
        self.map_coeffs(|coeff| coeff.mul(j))
    }

    fn map_coeffs(&self, f: impl Fn(&Jet2) -> Jet2) -> Form {
        Form {
            dim: self.dim,
            degree: self.degree,
            terms: self.terms.iter().map(|(m, j)| (*m, f(j))).collect(),
        }
    }

    /// Wedge product. Graded-commutative and associative; terms sharing a
    /// basis covector cancel.
    pub fn wedge(&self, other: &Form) -> Form {
        assert_eq!(self.dim, other.dim, "wedge dimension mismatch");
        let mut out = Form::zero(self.dim, self.degree + other.degree);
        if self.degree + other.degree > 2 * self.dim {
            return out;
        }
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                if ma & mb != 0 {
                    continue;
                }
                let sign = merge_sign(*ma, *mb);
                let coeff = ca.mul(cb);
                out.insert(ma | mb, if sign < 0.0 { coeff.neg() } else { coeff });
            }
        }
        out.compact()
    }

    /// Complex conjugate: swaps barred and unbarred slots (with the sign of
    /// the index reordering) and conjugates coefficients.
    pub fn conj(&self) -> Form {
        let n = self.dim as u32;
        let full = (1u32 << (2 * self.dim)) - 1;
        let mut out = Form::zero(self.dim, self.degree);
        for (mask, coeff) in &self.terms {
            let low = mask & ((1 << n) - 1);
            let high = mask >> n;
            let swapped = ((low << n) | high) & full;
            // sign: parity of the permutation sorting the swapped index list.
            // Swapping blocks reverses the relative order of (low, high)
            // groups: each (unbarred, barred) pair crossing contributes one
            // transposition.
            let crossings = (low.count_ones() * high.count_ones()) % 2;
            let coeff = coeff.conj();
            out.insert(swapped, if crossings == 1 { coeff.neg() } else { coeff });
        }
        out
    }

    /// Exterior derivative; requires coefficients of order >= 1 and lowers
    /// the coefficient order by one.
    pub fn d(&self) -> Result<Form> {
        let w = 2 * self.dim;
        let mut out = Form::zero(self.dim, self.degree + 1);
        for (mask, coeff) in &self.terms {
            if coeff.order() == 0 {
                return Err(Error::InsufficientOrder { need: 1, have: 0 });
            }
            for a in 0..w {
                let bit = 1u32 << a;
                if mask & bit != 0 {
                    continue;
                }
                let da = coeff.derivative_jet(a)?;
                if da.max_abs() == 0.0 {
                    continue;
                }
                let sign = merge_sign(bit, *mask);
                out.insert(bit | mask, if sign < 0.0 { da.neg() } else { da });
            }
        }
        Ok(out.compact())
    }

    /// Projection onto terms with exactly `p` unbarred and `q` barred slots.
    pub fn type_project(&self, p: usize, q: usize) -> Result<Form> {
        if p + q != self.degree {
            return Err(Error::DimensionMismatch(format!(
                "type ({p},{q}) incompatible with degree {}",
                self.degree
            )));
        }
        let n = self.dim as u32;
        let low = (1u32 << n) - 1;
        let mut out = Form::zero(self.dim, self.degree);
        for (mask, coeff) in &self.terms {
            let unbarred = (mask & low).count_ones() as usize;
            let barred = (mask >> n).count_ones() as usize;
            if unbarred == p && barred == q {
                out.insert(*mask, coeff.clone());
            }
        }
        Ok(out)
    }

    /// Maximum over terms of a `(p, q)` selector; used for residuals.
    pub fn max_abs_where(&self, f: impl Fn(usize, usize) -> bool) -> f64 {
        let n = self.dim as u32;
        let low = (1u32 << n) - 1;
        let mut m = 0.0f64;
        for (mask, coeff) in &self.terms {
            let unbarred = (mask & low).count_ones() as usize;
            let barred = (mask >> n).count_ones() as usize;
            if f(unbarred, barred) {
                m = m.max(coeff.value().norm());
            }
        }
        m
    }

    /// Largest coefficient magnitude (values only, not derivative entries).
    pub fn max_abs_value(&self) -> f64 {
        self.terms.values().map(|j| j.value().norm()).fold(0.0, f64::max)
    }

    /// Rewrites the form over a new slot basis: `rows[s]` is the 1-form that
    /// old slot `s` equals in the new basis. Coefficients multiply through.
    pub fn substitute(&self, rows: &[Form]) -> Form {
        assert_eq!(rows.len(), 2 * self.dim);
        let mut out = Form::zero(self.dim, self.degree);
        for (mask, coeff) in &self.terms {
            let mut partial = Form::scalar(self.dim, coeff.clone());
            let mut rest = *mask;
            while rest != 0 {
                let slot = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                partial = partial.wedge(&rows[slot]);
            }
            if partial.degree == self.degree {
                out = out.add(&partial);
            }
        }
        out.compact()
    }

    /// Evaluates a degree-1 form on a tangent vector given by its `2n`
    /// coordinate components.
    pub fn eval1(&self, v: &[C64]) -> C64 {
        debug_assert_eq!(self.degree, 1);
        let mut acc = C64::default();
        for (mask, coeff) in &self.terms {
            let slot = mask.trailing_zeros() as usize;
            acc += coeff.value() * v[slot];
        }
        acc
    }

    /// Evaluates a degree-2 form on an ordered pair of tangent vectors.
    pub fn eval2(&self, v: &[C64], w: &[C64]) -> C64 {
        debug_assert_eq!(self.degree, 2);
        let mut acc = C64::default();
        for (mask, coeff) in &self.terms {
            let a = mask.trailing_zeros() as usize;
            let b = (mask & (mask - 1)).trailing_zeros() as usize;
            acc += coeff.value() * (v[a] * w[b] - v[b] * w[a]);
        }
        acc
    }

    /// Truncates every coefficient jet to the given order.
    pub fn truncated(&self, order: usize) -> Form {
        self.map_coeffs(|j| j.truncated(order))
    }
}

/// Rectangular grid of forms of a single degree.
#[derive(Clone, Debug)]
pub struct FormMatrix {
    pub rows: usize,
    pub cols: usize,
    entries: Vec<Form>,
}

impl FormMatrix {
    pub fn zero(dim: usize, rows: usize, cols: usize, degree: usize) -> Self {
        FormMatrix {
            rows,
            cols,
            entries: vec![Form::zero(dim, degree); rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Form) -> Self {
        let mut entries = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                entries.push(f(r, c));
            }
        }
        FormMatrix { rows, cols, entries }
    }

    pub fn at(&self, r: usize, c: usize) -> &Form {
        &self.entries[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, f: Form) {
        self.entries[r * self.cols + c] = f;
    }

    pub fn add(&self, other: &FormMatrix) -> FormMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        FormMatrix::from_fn(self.rows, self.cols, |r, c| self.at(r, c).add(other.at(r, c)))
    }

    pub fn sub(&self, other: &FormMatrix) -> FormMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        FormMatrix::from_fn(self.rows, self.cols, |r, c| self.at(r, c).sub(other.at(r, c)))
    }

    pub fn scale(&self, k: C64) -> FormMatrix {
        FormMatrix::from_fn(self.rows, self.cols, |r, c| self.at(r, c).scale(k))
    }

    pub fn neg(&self) -> FormMatrix {
        FormMatrix::from_fn(self.rows, self.cols, |r, c| self.at(r, c).neg())
    }

    pub fn transpose(&self) -> FormMatrix {
        FormMatrix::from_fn(self.cols, self.rows, |r, c| self.at(c, r).clone())
    }

    pub fn conj(&self) -> FormMatrix {
        FormMatrix::from_fn(self.rows, self.cols, |r, c| self.at(r, c).conj())
    }

    /// Matrix product with wedge as the scalar multiplication.
    pub fn wedge_mul(&self, other: &FormMatrix) -> FormMatrix {
        assert_eq!(self.cols, other.rows);
        let dim = self.entries.first().map(Form::dim).unwrap_or(1);
        let degree = self.entries.first().map(Form::degree).unwrap_or(0)
            + other.entries.first().map(Form::degree).unwrap_or(0);
        FormMatrix::from_fn(self.rows, other.cols, |r, c| {
            let mut acc = Form::zero(dim, degree);
            for k in 0..self.cols {
                acc = acc.add(&self.at(r, k).wedge(other.at(k, c)));
            }
            acc
        })
    }

    pub fn d(&self) -> Result<FormMatrix> {
        let mut out = Vec::with_capacity(self.entries.len());
        for e in &self.entries {
            out.push(e.d()?);
        }
        Ok(FormMatrix { rows: self.rows, cols: self.cols, entries: out })
    }

    /// Largest coefficient magnitude across all entries.
    pub fn max_abs_value(&self) -> f64 {
        self.entries.iter().map(Form::max_abs_value).fold(0.0, f64::max)
    }

    /// How far the matrix is from satisfying `m[i][j] = -conj(m[j][i])`.
    pub fn skew_hermitian_defect(&self) -> f64 {
        assert_eq!(self.rows, self.cols);
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in 0..self.cols {
                let defect = self.at(i, j).add(&self.at(j, i).conj());
                worst = worst.max(defect.max_abs_value());
            }
        }
        worst
    }

    /// How far the matrix is from satisfying `m[i][j] = -m[j][i]`.
    pub fn skew_symmetric_defect(&self) -> f64 {
        assert_eq!(self.rows, self.cols);
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in 0..self.cols {
                let defect = self.at(i, j).add(self.at(j, i));
                worst = worst.max(defect.max_abs_value());
            }
        }
        worst
    }

    pub fn map(&self, f: impl Fn(&Form) -> Form) -> FormMatrix {
        FormMatrix {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(f).collect(),
        }
    }
}
