//! Second-order Wirtinger jets of smooth complex-valued chart functions.
//!
//! A [`Jet2`] carries the value of a function together with its first and
//! second Wirtinger derivatives at a chart point of `C^n`. Derivative slots
//! are ordered `(d/dz_1 .. d/dz_n, d/dzbar_1 .. d/dzbar_n)`, so a jet of
//! order 1 stores `2n` first derivatives and a jet of order 2 additionally
//! stores the symmetric `(2n) x (2n)` second-derivative matrix.
//!
//! All arithmetic propagates derivatives exactly (product, quotient, and
//! chain rules in the Wirtinger basis), so the only error in any derived
//! quantity is floating-point rounding. `conj` swaps the holomorphic and
//! antiholomorphic derivative blocks and conjugates every entry.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Shorthand for the scalar type used throughout the crate.
pub type C64 = Complex64;

/// A point of a chart domain in `C^n`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChartPoint {
    coords: Vec<C64>,
}

impl ChartPoint {
    /// Builds a point, rejecting empty or non-finite coordinate lists.
    pub fn new(coords: Vec<C64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidPoint("need at least one coordinate".into()));
        }
        if let Some(bad) = coords.iter().find(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::InvalidPoint(format!("non-finite coordinate {bad}")));
        }
        Ok(Self { coords })
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coord(&self, index: usize) -> C64 {
        self.coords[index]
    }

    pub fn coords(&self) -> &[C64] {
        &self.coords
    }

    /// Returns a copy with `delta` added to coordinate `index`.
    pub fn shifted(&self, index: usize, delta: C64) -> ChartPoint {
        let mut coords = self.coords.clone();
        coords[index] += delta;
        ChartPoint { coords }
    }

    /// Euclidean norm of the coordinate vector.
    pub fn norm(&self) -> f64 {
        self.coords.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }
}

impl std::fmt::Display for ChartPoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.coords.iter().map(|c| format_c64(*c)).collect();
        write!(f, "({})", parts.join(", "))
    }
}

/// Formats a complex number as `a+bi` with shortest round-trip decimals.
pub fn format_c64(c: C64) -> String {
    if c.im == 0.0 {
        format!("{}", c.re)
    } else if c.im < 0.0 {
        format!("{}{}i", c.re, c.im)
    } else {
        format!("{}+{}i", c.re, c.im)
    }
}

/// Value plus first- and second-order Wirtinger derivatives at a point.
///
/// The stored order is implicit: `d1` is empty at order 0, `d2` is empty
/// below order 2. `d2` is kept as a full row-major `(2n) x (2n)` matrix and
/// is symmetric by construction.
#[derive(Clone, Debug)]
pub struct Jet2 {
    dim: usize,
    value: C64,
    d1: Vec<C64>,
    d2: Vec<C64>,
}

// Arithmetic is exposed as reference-taking inherent methods rather than
// operator traits; jets are not Copy and chained &-operators read worse.
#[allow(clippy::should_implement_trait)]
impl Jet2 {
    /// A constant: value with vanishing derivatives at the requested order.
    pub fn constant(dim: usize, order: usize, value: C64) -> Self {
        let w = 2 * dim;
        Jet2 {
            dim,
            value,
            d1: if order >= 1 { vec![C64::default(); w] } else { Vec::new() },
            d2: if order >= 2 { vec![C64::default(); w * w] } else { Vec::new() },
        }
    }

    pub fn zero(dim: usize, order: usize) -> Self {
        Self::constant(dim, order, C64::default())
    }

    pub fn one(dim: usize, order: usize) -> Self {
        Self::constant(dim, order, C64::new(1.0, 0.0))
    }

    /// Seeds the jet of the coordinate `z_index` (or `zbar_index`) at `point`.
    ///
    /// The first-derivative vector has a single 1 in the matching slot and
    /// the second derivatives vanish identically.
    pub fn coordinate(point: &ChartPoint, index: usize, conjugated: bool, order: usize) -> Result<Self> {
        let n = point.dim();
        if index >= n {
            return Err(Error::IndexOutOfRange { index, dim: n });
        }
        let value = if conjugated { point.coord(index).conj() } else { point.coord(index) };
        let mut jet = Self::constant(n, order, value);
        if order >= 1 {
            let slot = if conjugated { n + index } else { index };
            jet.d1[slot] = C64::new(1.0, 0.0);
        }
        Ok(jet)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Width of the derivative slots, `2n`.
    pub fn slots(&self) -> usize {
        2 * self.dim
    }

    pub fn order(&self) -> usize {
        if !self.d2.is_empty() {
            2
        } else if !self.d1.is_empty() {
            1
        } else {
            0
        }
    }

    pub fn value(&self) -> C64 {
        self.value
    }

    /// First Wirtinger derivative in slot `a` (0..2n).
    pub fn d1(&self, a: usize) -> C64 {
        self.d1[a]
    }

    pub fn d1_slice(&self) -> &[C64] {
        &self.d1
    }

    /// Second Wirtinger derivative in slots `(a, b)`.
    pub fn d2(&self, a: usize, b: usize) -> C64 {
        self.d2[a * self.slots() + b]
    }

    /// Adjusts to exactly `order`: drops higher data, zero-fills missing
    /// slots. Zero-filling is only correct for jets known to be identically
    /// zero beyond their stored order (e.g. absent sparse coefficients).
    pub fn pad_to(&self, order: usize) -> Jet2 {
        if self.order() >= order {
            return self.truncated(order);
        }
        let mut out = Jet2::constant(self.dim, order, self.value);
        let w = self.slots();
        if order >= 1 && !self.d1.is_empty() {
            out.d1[..w].copy_from_slice(&self.d1);
        }
        if order >= 2 && !self.d2.is_empty() {
            out.d2[..w * w].copy_from_slice(&self.d2);
        }
        out
    }

    /// Drops derivative data above `order`.
    pub fn truncated(&self, order: usize) -> Jet2 {
        Jet2 {
            dim: self.dim,
            value: self.value,
            d1: if order >= 1 { self.d1.clone() } else { Vec::new() },
            d2: if order >= 2 { self.d2.clone() } else { Vec::new() },
        }
    }

    /// Reinterprets a jet in `dim` variables as one in `total` variables,
    /// with this jet's variables occupying `offset..offset+dim`. Derivatives
    /// along the other variables are zero (the function does not depend on
    /// them), so block-diagonal product models can reuse factor jets.
    pub fn embedded(&self, offset: usize, total: usize) -> Jet2 {
        let n = self.dim;
        assert!(offset + n <= total);
        let order = self.order();
        let mut out = Jet2::constant(total, order, self.value);
        let map = |s: usize| if s < n { offset + s } else { total + offset + (s - n) };
        if order >= 1 {
            for s in 0..2 * n {
                out.d1[map(s)] = self.d1[s];
            }
        }
        if order >= 2 {
            let wt = 2 * total;
            for s in 0..2 * n {
                for t in 0..2 * n {
                    out.d2[map(s) * wt + map(t)] = self.d2[s * 2 * n + t];
                }
            }
        }
        out
    }

    /// The jet of the derivative `d/d(slot a)` of this function, one order lower.
    pub fn derivative_jet(&self, a: usize) -> Result<Jet2> {
        let order = self.order();
        if order == 0 {
            return Err(Error::InsufficientOrder { need: 1, have: 0 });
        }
        let w = self.slots();
        let d1 = if order == 2 {
            (0..w).map(|b| self.d2[a * w + b]).collect()
        } else {
            Vec::new()
        };
        Ok(Jet2 { dim: self.dim, value: self.d1[a], d1, d2: Vec::new() })
    }

    fn joint_order(&self, other: &Jet2) -> usize {
        self.order().min(other.order())
    }

    fn assert_same_dim(&self, other: &Jet2) {
        assert_eq!(self.dim, other.dim, "jet dimension mismatch");
    }

    pub fn add(&self, other: &Jet2) -> Jet2 {
        self.assert_same_dim(other);
        let order = self.joint_order(other);
        let w = self.slots();
        let mut out = Jet2::constant(self.dim, order, self.value + other.value);
        if order >= 1 {
            for a in 0..w {
                out.d1[a] = self.d1[a] + other.d1[a];
            }
        }
        if order >= 2 {
            for i in 0..w * w {
                out.d2[i] = self.d2[i] + other.d2[i];
            }
        }
        out
    }

    pub fn sub(&self, other: &Jet2) -> Jet2 {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Jet2 {
        let mut out = self.clone();
        out.value = -out.value;
        for a in out.d1.iter_mut() {
            *a = -*a;
        }
        for a in out.d2.iter_mut() {
            *a = -*a;
        }
        out
    }

    pub fn scale(&self, c: C64) -> Jet2 {
        let mut out = self.clone();
        out.value *= c;
        for a in out.d1.iter_mut() {
            *a *= c;
        }
        for a in out.d2.iter_mut() {
            *a *= c;
        }
        out
    }

    pub fn mul(&self, other: &Jet2) -> Jet2 {
        self.assert_same_dim(other);
        let order = self.joint_order(other);
        let w = self.slots();
        let mut out = Jet2::constant(self.dim, order, self.value * other.value);
        if order >= 1 {
            for a in 0..w {
                out.d1[a] = self.d1[a] * other.value + self.value * other.d1[a];
            }
        }
        if order >= 2 {
            for a in 0..w {
                for b in 0..w {
                    out.d2[a * w + b] = self.d2[a * w + b] * other.value
                        + self.value * other.d2[a * w + b]
                        + self.d1[a] * other.d1[b]
                        + self.d1[b] * other.d1[a];
                }
            }
        }
        out
    }

    /// Reciprocal jet `1/self`; fails when the value vanishes.
    pub fn recip(&self) -> Result<Jet2> {
        if self.value.norm() == 0.0 {
            return Err(Error::DivisionByZero);
        }
        let v = self.value;
        let inv = C64::new(1.0, 0.0) / v;
        let inv2 = inv * inv;
        let order = self.order();
        let w = self.slots();
        let mut out = Jet2::constant(self.dim, order, inv);
        if order >= 1 {
            for a in 0..w {
                out.d1[a] = -self.d1[a] * inv2;
            }
        }
        if order >= 2 {
            let inv3 = inv2 * inv;
            for a in 0..w {
                for b in 0..w {
                    out.d2[a * w + b] = (self.d1[a] * self.d1[b] + self.d1[b] * self.d1[a]) * inv3
                        - self.d2[a * w + b] * inv2;
                }
            }
        }
        Ok(out)
    }

    pub fn div(&self, other: &Jet2) -> Result<Jet2> {
        Ok(self.mul(&other.recip()?))
    }

    /// Complex conjugate: swaps the holomorphic/antiholomorphic blocks.
    pub fn conj(&self) -> Jet2 {
        let n = self.dim;
        let w = self.slots();
        let swap = |a: usize| if a < n { a + n } else { a - n };
        let order = self.order();
        let mut out = Jet2::constant(self.dim, order, self.value.conj());
        if order >= 1 {
            for a in 0..w {
                out.d1[a] = self.d1[swap(a)].conj();
            }
        }
        if order >= 2 {
            for a in 0..w {
                for b in 0..w {
                    out.d2[a * w + b] = self.d2[swap(a) * w + swap(b)].conj();
                }
            }
        }
        out
    }

    /// Composes with a holomorphic function given its value and first two
    /// derivatives at `self.value`.
    fn compose_holomorphic(&self, f0: C64, f1: C64, f2: C64) -> Jet2 {
        let order = self.order();
        let w = self.slots();
        let mut out = Jet2::constant(self.dim, order, f0);
        if order >= 1 {
            for a in 0..w {
                out.d1[a] = f1 * self.d1[a];
            }
        }
        if order >= 2 {
            for a in 0..w {
                for b in 0..w {
                    out.d2[a * w + b] = f1 * self.d2[a * w + b] + f2 * self.d1[a] * self.d1[b];
                }
            }
        }
        out
    }

    pub fn exp(&self) -> Jet2 {
        let e = self.value.exp();
        self.compose_holomorphic(e, e, e)
    }

    fn on_branch_cut(v: C64) -> bool {
        v.im == 0.0 && v.re <= 0.0
    }

    /// Principal-branch logarithm; errors on the non-positive real axis.
    pub fn ln(&self) -> Result<Jet2> {
        if Self::on_branch_cut(self.value) {
            return Err(Error::BranchCut { func: "log", value: self.value });
        }
        let v = self.value;
        let inv = C64::new(1.0, 0.0) / v;
        Ok(self.compose_holomorphic(v.ln(), inv, -inv * inv))
    }

    /// Principal-branch square root; errors on the non-positive real axis.
    pub fn sqrt(&self) -> Result<Jet2> {
        if Self::on_branch_cut(self.value) {
            return Err(Error::BranchCut { func: "sqrt", value: self.value });
        }
        let s = self.value.sqrt();
        let f1 = C64::new(0.5, 0.0) / s;
        let f2 = -f1 / (self.value * 2.0);
        Ok(self.compose_holomorphic(s, f1, f2))
    }

    pub fn sin(&self) -> Jet2 {
        self.compose_holomorphic(self.value.sin(), self.value.cos(), -self.value.sin())
    }

    pub fn cos(&self) -> Jet2 {
        self.compose_holomorphic(self.value.cos(), -self.value.sin(), -self.value.cos())
    }

    /// Integer power. Negative exponents require a nonzero value.
    pub fn powi(&self, k: i32) -> Result<Jet2> {
        if k < 0 && self.value.norm() == 0.0 {
            return Err(Error::DivisionByZero);
        }
        let v = self.value;
        let kf = f64::from(k);
        let f0 = v.powi(k);
        let f1 = if k == 0 { C64::default() } else { v.powi(k - 1) * kf };
        let f2 = if k == 0 || k == 1 { C64::default() } else { v.powi(k - 2) * (kf * (kf - 1.0)) };
        Ok(self.compose_holomorphic(f0, f1, f2))
    }

    /// Largest absolute value over the stored value and derivative entries.
    pub fn max_abs(&self) -> f64 {
        let mut m = self.value.norm();
        for c in &self.d1 {
            m = m.max(c.norm());
        }
        for c in &self.d2 {
            m = m.max(c.norm());
        }
        m
    }
}

/// Central-difference Wirtinger derivatives of a black-box scalar field.
///
/// Returns `(d/dz_i f, d/dzbar_i f)` at `point` using step `h` in the real
/// and imaginary directions of coordinate `i`. Used by the identity suite
/// where a quantity needs one more derivative than the jets carry, and by
/// tests as an oracle independent of jet propagation.
pub fn finite_difference_wirtinger<F>(f: F, point: &ChartPoint, index: usize, h: f64) -> Result<(C64, C64)>
where
    F: Fn(&ChartPoint) -> Result<C64>,
{
    let re = C64::new(h, 0.0);
    let im = C64::new(0.0, h);
    let fx = (f(&point.shifted(index, re))? - f(&point.shifted(index, -re))?) / (2.0 * h);
    let fy = (f(&point.shifted(index, im))? - f(&point.shifted(index, -im))?) / (2.0 * h);
    let i = C64::new(0.0, 1.0);
    Ok(((fx - i * fy) / 2.0, (fx + i * fy) / 2.0))
}
