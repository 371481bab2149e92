//! Closed-form chart functions: a small expression language over `C^n`.
//!
//! Grammar (whitespace-insensitive, standard infix precedence):
//!
//! ```text
//! expr    := term (('+'|'-') term)*
//! term    := unary (('*'|'/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' ['-'] integer)?
//! atom    := number | 'i' | 'pi' | var | func '(' expr ')' | '(' expr ')'
//! var     := 'z' digits              # z1 .. zn
//! func    := conj | exp | log | sqrt | sin | cos
//! ```
//!
//! Exponents are restricted to integer literals; general powers must be
//! spelled `exp(k*log(x))` so every branch choice is explicit in the input.
//! `sqrt` and `log` use the principal branch and evaluating exactly on the
//! cut (the non-positive real axis) is an error rather than a convention.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::jets::{ChartPoint, Jet2, C64};

/// Unary functions available in the language (besides `conj` and negation).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnaryFn {
    Exp,
    Log,
    Sqrt,
    Sin,
    Cos,
}

impl UnaryFn {
    fn name(self) -> &'static str {
        match self {
            UnaryFn::Exp => "exp",
            UnaryFn::Log => "log",
            UnaryFn::Sqrt => "sqrt",
            UnaryFn::Sin => "sin",
            UnaryFn::Cos => "cos",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// Expression tree. Nodes remember their byte span in the source text so
/// evaluation errors can point at the offending subtree.
#[derive(Clone, Debug)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: (usize, usize),
}

#[derive(Clone, Debug)]
pub enum ExprKind {
    Literal(C64),
    Var(usize),
    Neg(Box<Expr>),
    Conj(Box<Expr>),
    Unary(UnaryFn, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    PowInt(Box<Expr>, i32),
}

impl PartialEq for Expr {
    /// Structural equality; spans are ignored.
    fn eq(&self, other: &Self) -> bool {
        match (&self.kind, &other.kind) {
            (ExprKind::Literal(a), ExprKind::Literal(b)) => a == b,
            (ExprKind::Var(a), ExprKind::Var(b)) => a == b,
            (ExprKind::Neg(a), ExprKind::Neg(b)) => a == b,
            (ExprKind::Conj(a), ExprKind::Conj(b)) => a == b,
            (ExprKind::Unary(f, a), ExprKind::Unary(g, b)) => f == g && a == b,
            (ExprKind::Binary(o, a, b), ExprKind::Binary(p, c, d)) => o == p && a == c && b == d,
            (ExprKind::PowInt(a, k), ExprKind::PowInt(b, l)) => k == l && a == b,
            _ => false,
        }
    }
}

// Builder combinators mirror the operator names on purpose; Expr is a tree,
// not a number, so operator traits would be misleading.
#[allow(clippy::should_implement_trait)]
impl Expr {
    fn new(kind: ExprKind) -> Self {
        Expr { kind, span: (0, 0) }
    }

    pub fn literal(c: C64) -> Self {
        Self::new(ExprKind::Literal(c))
    }

    pub fn real(x: f64) -> Self {
        Self::literal(C64::new(x, 0.0))
    }

    pub fn var(index: usize) -> Self {
        Self::new(ExprKind::Var(index))
    }

    pub fn neg(self) -> Self {
        Self::new(ExprKind::Neg(Box::new(self)))
    }

    pub fn conj(self) -> Self {
        Self::new(ExprKind::Conj(Box::new(self)))
    }

    pub fn unary(f: UnaryFn, a: Expr) -> Self {
        Self::new(ExprKind::Unary(f, Box::new(a)))
    }

    pub fn sqrt(self) -> Self {
        Self::unary(UnaryFn::Sqrt, self)
    }

    pub fn exp(self) -> Self {
        Self::unary(UnaryFn::Exp, self)
    }

    pub fn add(self, rhs: Expr) -> Self {
        Self::new(ExprKind::Binary(BinaryOp::Add, Box::new(self), Box::new(rhs)))
    }

    pub fn sub(self, rhs: Expr) -> Self {
        Self::new(ExprKind::Binary(BinaryOp::Sub, Box::new(self), Box::new(rhs)))
    }

    pub fn mul(self, rhs: Expr) -> Self {
        Self::new(ExprKind::Binary(BinaryOp::Mul, Box::new(self), Box::new(rhs)))
    }

    pub fn div(self, rhs: Expr) -> Self {
        Self::new(ExprKind::Binary(BinaryOp::Div, Box::new(self), Box::new(rhs)))
    }

    pub fn powi(self, k: i32) -> Self {
        Self::new(ExprKind::PowInt(Box::new(self), k))
    }

    /// True when no `conj` node appears anywhere in the tree.
    pub fn is_conj_free(&self) -> bool {
        match &self.kind {
            ExprKind::Literal(_) | ExprKind::Var(_) => true,
            ExprKind::Neg(a) | ExprKind::Unary(_, a) | ExprKind::PowInt(a, _) => a.is_conj_free(),
            ExprKind::Conj(_) => false,
            ExprKind::Binary(_, a, b) => a.is_conj_free() && b.is_conj_free(),
        }
    }

    /// Largest variable index used, if any.
    pub fn max_var(&self) -> Option<usize> {
        match &self.kind {
            ExprKind::Literal(_) => None,
            ExprKind::Var(i) => Some(*i),
            ExprKind::Neg(a) | ExprKind::Conj(a) | ExprKind::Unary(_, a) | ExprKind::PowInt(a, _) => a.max_var(),
            ExprKind::Binary(_, a, b) => match (a.max_var(), b.max_var()) {
                (Some(x), Some(y)) => Some(x.max(y)),
                (x, y) => x.or(y),
            },
        }
    }

    /// Evaluates the tree into a jet of the requested order at `point`.
    pub fn eval_jet(&self, point: &ChartPoint, order: usize) -> Result<Jet2> {
        let n = point.dim();
        let located = |e: Error| -> Error {
            match e {
                err @ Error::Eval { .. } => err,
                other => Error::Eval {
                    start: self.span.0,
                    end: self.span.1,
                    source: Box::new(other),
                },
            }
        };
        let out = match &self.kind {
            ExprKind::Literal(c) => Jet2::constant(n, order, *c),
            ExprKind::Var(i) => Jet2::coordinate(point, *i, false, order).map_err(located)?,
            ExprKind::Neg(a) => a.eval_jet(point, order)?.neg(),
            ExprKind::Conj(a) => a.eval_jet(point, order)?.conj(),
            ExprKind::Unary(f, a) => {
                let ja = a.eval_jet(point, order)?;
                match f {
                    UnaryFn::Exp => ja.exp(),
                    UnaryFn::Log => ja.ln().map_err(located)?,
                    UnaryFn::Sqrt => ja.sqrt().map_err(located)?,
                    UnaryFn::Sin => ja.sin(),
                    UnaryFn::Cos => ja.cos(),
                }
            }
            ExprKind::Binary(op, a, b) => {
                let ja = a.eval_jet(point, order)?;
                let jb = b.eval_jet(point, order)?;
                match op {
                    BinaryOp::Add => ja.add(&jb),
                    BinaryOp::Sub => ja.sub(&jb),
                    BinaryOp::Mul => ja.mul(&jb),
                    BinaryOp::Div => ja.div(&jb).map_err(located)?,
                }
            }
            ExprKind::PowInt(a, k) => a.eval_jet(point, order)?.powi(*k).map_err(located)?,
        };
        Ok(out)
    }

    /// Plain value at a point (order-0 evaluation).
    pub fn eval(&self, point: &ChartPoint) -> Result<C64> {
        Ok(self.eval_jet(point, 0)?.value())
    }

    /// Canonical fully parenthesized rendering; `parse(print(e))` yields a
    /// structurally equal tree.
    pub fn print(&self) -> String {
        let mut s = String::new();
        self.print_into(&mut s);
        s
    }

    fn print_into(&self, out: &mut String) {
        match &self.kind {
            ExprKind::Literal(c) => {
                if c.im == 0.0 {
                    if c.re < 0.0 {
                        let _ = write!(out, "(0 - {})", -c.re);
                    } else {
                        let _ = write!(out, "{}", c.re);
                    }
                } else if *c == C64::new(0.0, 1.0) {
                    out.push('i');
                } else {
                    // general complex literal: (re + im*i)
                    let _ = write!(out, "(");
                    if c.re < 0.0 {
                        let _ = write!(out, "(0 - {})", -c.re);
                    } else {
                        let _ = write!(out, "{}", c.re);
                    }
                    if c.im < 0.0 {
                        let _ = write!(out, " - {}*i)", -c.im);
                    } else {
                        let _ = write!(out, " + {}*i)", c.im);
                    }
                }
            }
            ExprKind::Var(index) => {
                let _ = write!(out, "z{}", index + 1);
            }
            ExprKind::Neg(a) => {
                out.push_str("(-");
                a.print_into(out);
                out.push(')');
            }
            ExprKind::Conj(a) => {
                out.push_str("conj(");
                a.print_into(out);
                out.push(')');
            }
            ExprKind::Unary(f, a) => {
                out.push_str(f.name());
                out.push('(');
                a.print_into(out);
                out.push(')');
            }
            ExprKind::Binary(op, a, b) => {
                out.push('(');
                a.print_into(out);
                out.push_str(match op {
                    BinaryOp::Add => " + ",
                    BinaryOp::Sub => " - ",
                    BinaryOp::Mul => "*",
                    BinaryOp::Div => "/",
                });
                b.print_into(out);
                out.push(')');
            }
            ExprKind::PowInt(a, k) => {
                out.push('(');
                a.print_into(out);
                if *k < 0 {
                    let _ = write!(out, "^-{}", -(*k as i64));
                } else {
                    let _ = write!(out, "^{k}");
                }
                out.push(')');
            }
        }
    }
}

/// d/dz_var of a conj-free tree. Used internally when a model construction
/// needs the derivative of a user-supplied holomorphic function; the result
/// is an ordinary tree evaluated like any other.
pub fn holomorphic_derivative(e: &Expr, var: usize) -> Result<Expr> {
    match &e.kind {
        ExprKind::Literal(_) => Ok(Expr::real(0.0)),
        ExprKind::Var(i) => Ok(Expr::real(if *i == var { 1.0 } else { 0.0 })),
        ExprKind::Conj(_) => Err(Error::NonHolomorphic { offset: e.span.0 }),
        ExprKind::Neg(a) => Ok(holomorphic_derivative(a, var)?.neg()),
        ExprKind::Unary(f, a) => {
            let da = holomorphic_derivative(a, var)?;
            let chain = match f {
                UnaryFn::Exp => Expr::unary(UnaryFn::Exp, (**a).clone()),
                UnaryFn::Log => Expr::real(1.0).div((**a).clone()),
                UnaryFn::Sqrt => Expr::real(0.5).div(Expr::unary(UnaryFn::Sqrt, (**a).clone())),
                UnaryFn::Sin => Expr::unary(UnaryFn::Cos, (**a).clone()),
                UnaryFn::Cos => Expr::unary(UnaryFn::Sin, (**a).clone()).neg(),
            };
            Ok(chain.mul(da))
        }
        ExprKind::Binary(op, a, b) => {
            let da = holomorphic_derivative(a, var)?;
            let db = holomorphic_derivative(b, var)?;
            match op {
                BinaryOp::Add => Ok(da.add(db)),
                BinaryOp::Sub => Ok(da.sub(db)),
                BinaryOp::Mul => Ok(da.mul((**b).clone()).add((**a).clone().mul(db))),
                BinaryOp::Div => {
                    // (a/b)' = (a'b - ab') / b^2
                    let num = da.mul((**b).clone()).sub((**a).clone().mul(db));
                    Ok(num.div((**b).clone().powi(2)))
                }
            }
        }
        ExprKind::PowInt(a, k) => {
            let da = holomorphic_derivative(a, var)?;
            if *k == 0 {
                return Ok(Expr::real(0.0));
            }
            Ok(Expr::real(f64::from(*k)).mul((**a).clone().powi(*k - 1)).mul(da))
        }
    }
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
    dim: usize,
}

/// Parses `text` as an expression in variables `z1..z{dim}`.
pub fn parse(text: &str, dim: usize) -> Result<Expr> {
    if text.trim().is_empty() {
        return Err(Error::Parse { offset: 0, message: "empty expression".into() });
    }
    let mut p = Parser { bytes: text.as_bytes(), pos: 0, dim };
    let e = p.parse_expr()?;
    p.skip_ws();
    if p.pos != p.bytes.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(e)
}

impl<'a> Parser<'a> {
    fn err(&self, message: &str) -> Error {
        Error::Parse { offset: self.pos, message: message.into() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let b = self.peek();
        if b.is_some() {
            self.pos += 1;
        }
        b
    }

    fn spanned(&self, kind: ExprKind, start: usize) -> Expr {
        Expr { kind, span: (start, self.pos) }
    }

    fn parse_expr(&mut self) -> Result<Expr> {
        let start = self.pos;
        let mut lhs = self.parse_term()?;
        while let Some(op) = self.peek() {
            let bin = match op {
                b'+' => BinaryOp::Add,
                b'-' => BinaryOp::Sub,
                _ => break,
            };
            self.bump();
            let rhs = self.parse_term()?;
            lhs = self.spanned(ExprKind::Binary(bin, Box::new(lhs), Box::new(rhs)), start);
        }
        Ok(lhs)
    }

    fn parse_term(&mut self) -> Result<Expr> {
        let start = self.pos;
        let mut lhs = self.parse_unary()?;
        while let Some(op) = self.peek() {
            let bin = match op {
                b'*' => BinaryOp::Mul,
                b'/' => BinaryOp::Div,
                _ => break,
            };
            self.bump();
            let rhs = self.parse_unary()?;
            lhs = self.spanned(ExprKind::Binary(bin, Box::new(lhs), Box::new(rhs)), start);
        }
        Ok(lhs)
    }

    fn parse_unary(&mut self) -> Result<Expr> {
        let start = self.pos;
        if self.peek() == Some(b'-') {
            self.bump();
            let inner = self.parse_unary()?;
            return Ok(self.spanned(ExprKind::Neg(Box::new(inner)), start));
        }
        self.parse_power()
    }

    fn parse_power(&mut self) -> Result<Expr> {
        let start = self.pos;
        let base = self.parse_atom()?;
        if self.peek() == Some(b'^') {
            self.bump();
            let k = self.parse_int_literal()?;
            return Ok(self.spanned(ExprKind::PowInt(Box::new(base), k), start));
        }
        Ok(base)
    }

    fn parse_int_literal(&mut self) -> Result<i32> {
        self.skip_ws();
        let neg = if self.bytes.get(self.pos) == Some(&b'-') {
            self.pos += 1;
            true
        } else {
            false
        };
        let digit_start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if digit_start == self.pos {
            return Err(self.err("expected integer exponent after '^'"));
        }
        let text = std::str::from_utf8(&self.bytes[digit_start..self.pos]).unwrap();
        let val: i64 = text.parse().map_err(|_| self.err("exponent out of range"))?;
        let val = if neg { -val } else { val };
        i32::try_from(val).map_err(|_| self.err("exponent out of range"))
    }

    fn parse_atom(&mut self) -> Result<Expr> {
        self.skip_ws();
        let start = self.pos;
        match self.peek() {
            None => Err(self.err("unexpected end of input")),
            Some(b'(') => {
                self.bump();
                let inner = self.parse_expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("expected ')'"));
                }
                self.bump();
                Ok(Expr { span: (start, self.pos), ..inner })
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.parse_number(),
            Some(c) if c.is_ascii_alphabetic() => self.parse_ident(),
            Some(_) => Err(self.err("unexpected character")),
        }
    }

    fn parse_number(&mut self) -> Result<Expr> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.bytes.len() && (self.bytes[self.pos].is_ascii_digit() || self.bytes[self.pos] == b'.') {
            self.pos += 1;
        }
        // optional exponent part: e.g. 1.5e-3
        if self.bytes.get(self.pos) == Some(&b'e') || self.bytes.get(self.pos) == Some(&b'E') {
            let mark = self.pos;
            self.pos += 1;
            if matches!(self.bytes.get(self.pos), Some(b'+') | Some(b'-')) {
                self.pos += 1;
            }
            let ds = self.pos;
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if ds == self.pos {
                // not an exponent after all (e.g. "2*exp(..)" split as "2", "e"...)
                self.pos = mark;
            }
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap();
        let value: f64 = text.parse().map_err(|_| Error::Parse {
            offset: start,
            message: format!("invalid number literal `{text}`"),
        })?;
        Ok(self.spanned(ExprKind::Literal(C64::new(value, 0.0)), start))
    }

    fn parse_ident(&mut self) -> Result<Expr> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.bytes.len()
            && (self.bytes[self.pos].is_ascii_alphanumeric() || self.bytes[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap().to_owned();
        match name.as_str() {
            "i" => Ok(self.spanned(ExprKind::Literal(C64::new(0.0, 1.0)), start)),
            "pi" => Ok(self.spanned(ExprKind::Literal(C64::new(std::f64::consts::PI, 0.0)), start)),
            "conj" | "exp" | "log" | "sqrt" | "sin" | "cos" => {
                if self.peek() != Some(b'(') {
                    return Err(self.err("expected '(' after function name"));
                }
                self.bump();
                let inner = self.parse_expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("expected ')'"));
                }
                self.bump();
                let kind = match name.as_str() {
                    "conj" => ExprKind::Conj(Box::new(inner)),
                    "exp" => ExprKind::Unary(UnaryFn::Exp, Box::new(inner)),
                    "log" => ExprKind::Unary(UnaryFn::Log, Box::new(inner)),
                    "sqrt" => ExprKind::Unary(UnaryFn::Sqrt, Box::new(inner)),
                    "sin" => ExprKind::Unary(UnaryFn::Sin, Box::new(inner)),
                    "cos" => ExprKind::Unary(UnaryFn::Cos, Box::new(inner)),
                    _ => unreachable!(),
                };
                Ok(self.spanned(kind, start))
            }
            _ => {
                if let Some(rest) = name.strip_prefix('z') {
                    if !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()) {
                        let idx: usize = rest.parse().map_err(|_| Error::Parse {
                            offset: start,
                            message: format!("invalid variable `{name}`"),
                        })?;
                        if idx == 0 || idx > self.dim {
                            return Err(Error::Parse {
                                offset: start,
                                message: format!("variable `{name}` exceeds dimension {}", self.dim),
                            });
                        }
                        return Ok(self.spanned(ExprKind::Var(idx - 1), start));
                    }
                }
                Err(Error::Parse { offset: start, message: format!("unknown identifier `{name}`") })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn pt(coords: &[C64]) -> ChartPoint {
        ChartPoint::new(coords.to_vec()).unwrap()
    }

    #[test]
    fn parses_mixed_expression() {
        let e = parse("z1*conj(z2) + exp(i*z1)", 2).unwrap();
        let expected = Expr::var(0)
            .mul(Expr::var(1).conj())
            .add(Expr::unary(UnaryFn::Exp, Expr::literal(c(0.0, 1.0)).mul(Expr::var(0))));
        assert_eq!(e, expected);
    }

    #[test]
    fn parses_zero_literal() {
        let e = parse("0", 1).unwrap();
        assert_eq!(e, Expr::real(0.0));
    }

    #[test]
    fn sqrt_of_negative_parses_but_fails_to_evaluate() {
        let e = parse("sqrt(-1)", 1).unwrap();
        let p = pt(&[c(0.3, 0.4)]);
        // -1 is parsed as Neg(1); evaluation hits the branch cut.
        assert!(matches!(e.eval_jet(&p, 1), Err(Error::Eval { .. })));
    }

    #[test]
    fn precedence_and_powers() {
        let p = pt(&[c(3.0, 0.0), c(0.0, 0.0)]);
        let e = parse("z1^2", 2).unwrap();
        let j = e.eval_jet(&p, 1).unwrap();
        assert!((j.value() - c(9.0, 0.0)).norm() < 1e-14);
        assert!((j.d1(0) - c(6.0, 0.0)).norm() < 1e-14);

        // unary minus binds looser than '^'
        let e2 = parse("-z1^2", 2).unwrap();
        assert!((e2.eval(&p).unwrap() - c(-9.0, 0.0)).norm() < 1e-14);

        let e3 = parse("2*z1 + z2/4 - z1*z2", 2).unwrap();
        assert!((e3.eval(&p).unwrap() - c(6.0, 0.0)).norm() < 1e-14);

        let e4 = parse("z1^-1", 2).unwrap();
        assert!((e4.eval(&p).unwrap() - c(1.0 / 3.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn conj_var_jet() {
        let p = pt(&[c(0.0, 1.0), c(0.0, 0.0)]);
        let e = parse("conj(z1)", 2).unwrap();
        let j = e.eval_jet(&p, 1).unwrap();
        assert!((j.value() - c(0.0, -1.0)).norm() < 1e-15);
        assert!((j.d1(2) - c(1.0, 0.0)).norm() < 1e-15);
        assert!(j.d1(0).norm() < 1e-15);
    }

    #[test]
    fn rational_inverse_metric_factor() {
        let p = pt(&[c(1.0, 0.0), c(0.0, 0.0)]);
        let e = parse("1/(1+z1*conj(z1)+z2*conj(z2))", 2).unwrap();
        assert!((e.eval(&p).unwrap() - c(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn variable_out_of_dimension_rejected() {
        assert!(matches!(parse("z3", 2), Err(Error::Parse { .. })));
        assert!(matches!(parse("blah", 2), Err(Error::Parse { .. })));
        assert!(matches!(parse("", 2), Err(Error::Parse { .. })));
        assert!(matches!(parse("z1 +", 2), Err(Error::Parse { .. })));
        assert!(matches!(parse("z1^z2", 2), Err(Error::Parse { .. })));
    }

    /// Random conj-free tree over given dimension with rational-ish coefficients.
    fn random_expr(rng: &mut ChaCha8Rng, dim: usize, depth: usize, allow_conj: bool) -> Expr {
        if depth == 0 {
            return match rng.gen_range(0..3) {
                0 => Expr::var(rng.gen_range(0..dim)),
                1 => {
                    // parser-shaped literals: negatives arrive as Neg(literal)
                    let v = f64::from(rng.gen_range(-4i32..5)) / 2.0;
                    if v < 0.0 {
                        Expr::real(-v).neg()
                    } else {
                        Expr::real(v)
                    }
                }
                _ => Expr::literal(c(0.0, 1.0)),
            };
        }
        let next = depth - 1;
        match rng.gen_range(0..8) {
            0 => random_expr(rng, dim, next, allow_conj).add(random_expr(rng, dim, next, allow_conj)),
            1 => random_expr(rng, dim, next, allow_conj).sub(random_expr(rng, dim, next, allow_conj)),
            2 | 3 => random_expr(rng, dim, next, allow_conj).mul(random_expr(rng, dim, next, allow_conj)),
            4 => {
                // keep denominators bounded away from zero (conj-free variant
                // settles for "usually nonzero"; failed evals are skipped)
                let d = random_expr(rng, dim, next, allow_conj);
                let denom = if allow_conj {
                    d.clone().mul(d.conj()) // |d|^2 >= 0
                } else {
                    d.clone().mul(d)
                };
                random_expr(rng, dim, next, allow_conj)
                    .div(denom.add(Expr::real(f64::from(rng.gen_range(2..5)))))
            }
            5 => {
                let inner = random_expr(rng, dim, next, allow_conj);
                // exp of a bounded combination to avoid overflow
                Expr::unary(UnaryFn::Exp, inner.mul(Expr::real(0.25)))
            }
            6 if allow_conj => random_expr(rng, dim, next, allow_conj).conj(),
            _ => random_expr(rng, dim, next, allow_conj).powi(rng.gen_range(0..4)),
        }
    }

    fn random_point(rng: &mut ChaCha8Rng, dim: usize) -> ChartPoint {
        let coords = (0..dim)
            .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        ChartPoint::new(coords).unwrap()
    }

    #[test]
    fn jets_match_finite_differences_on_random_expressions() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut checked = 0usize;
        while checked < 1000 {
            let dim = rng.gen_range(1..3usize);
            let e = random_expr(&mut rng, dim, 3, true);
            let p = random_point(&mut rng, dim);
            let Ok(jet) = e.eval_jet(&p, 2) else { continue };
            if jet.max_abs() > 1e3 {
                continue;
            }
            let scalar = |q: &ChartPoint| e.eval(q);
            let mut ok = true;
            for idx in 0..dim {
                let Ok((dz, dzb)) = super::super::jets::finite_difference_wirtinger(scalar, &p, idx, 1e-5) else {
                    ok = false;
                    break;
                };
                let scale = 1.0_f64.max(dz.norm()).max(dzb.norm());
                assert!(
                    (jet.d1(idx) - dz).norm() / scale < 1e-7,
                    "dz mismatch for {} at {p}: jet {} vs fd {}",
                    e.print(),
                    jet.d1(idx),
                    dz
                );
                assert!((jet.d1(dim + idx) - dzb).norm() / scale < 1e-7);

                // second derivatives: finite differences of the exact first derivatives
                let grad = |q: &ChartPoint| Ok(e.eval_jet(q, 1)?.d1(idx));
                let Ok((ddz, ddzb)) = super::super::jets::finite_difference_wirtinger(grad, &p, idx, 1e-5)
                else {
                    ok = false;
                    break;
                };
                let scale2 = 1.0_f64.max(ddz.norm()).max(ddzb.norm());
                assert!((jet.d2(idx, idx) - ddz).norm() / scale2 < 1e-5);
                assert!((jet.d2(idx, dim + idx) - ddzb).norm() / scale2 < 1e-5);
            }
            if ok {
                checked += 1;
            }
        }
    }

    #[test]
    fn conj_free_expressions_are_holomorphic() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut checked = 0usize;
        while checked < 200 {
            let dim = rng.gen_range(1..3usize);
            let e = random_expr(&mut rng, dim, 3, false);
            if !e.is_conj_free() {
                continue;
            }
            let p = random_point(&mut rng, dim);
            let Ok(jet) = e.eval_jet(&p, 1) else { continue };
            if jet.max_abs() > 1e6 {
                continue;
            }
            for idx in 0..dim {
                assert!(
                    jet.d1(dim + idx).norm() < 1e-14 * jet.max_abs().max(1.0),
                    "antiholomorphic derivative leaked for {}",
                    e.print()
                );
            }
            checked += 1;
        }
    }

    #[test]
    fn print_parse_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let dim = rng.gen_range(1..4usize);
            let e = random_expr(&mut rng, dim, 3, true);
            let printed = e.print();
            let reparsed = parse(&printed, dim).unwrap_or_else(|err| {
                panic!("failed to reparse `{printed}`: {err}");
            });
            assert_eq!(e, reparsed, "round trip failed for `{printed}`");
            // evaluation agreement at random points
            for _ in 0..10 {
                let p = random_point(&mut rng, dim);
                match (e.eval(&p), reparsed.eval(&p)) {
                    (Ok(a), Ok(b)) => assert!((a - b).norm() <= 1e-14 * a.norm().max(1.0)),
                    (Err(_), Err(_)) => {}
                    (a, b) => panic!("eval disagreement: {a:?} vs {b:?}"),
                }
            }
        }
    }

    #[test]
    fn parser_total_on_random_bytes() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let alphabet: &[u8] = b"z12+-*/^() .econjsqrtlogpixe";
        for _ in 0..100_000 {
            let len = rng.gen_range(0..24usize);
            let s: String = (0..len)
                .map(|_| alphabet[rng.gen_range(0..alphabet.len())] as char)
                .collect();
            // must not panic; any result is acceptable
            let _ = parse(&s, 2);
        }
    }

    #[test]
    fn holomorphic_derivative_matches_jets() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut checked = 0usize;
        while checked < 100 {
            let dim = 2;
            let e = random_expr(&mut rng, dim, 3, false);
            let p = random_point(&mut rng, dim);
            let Ok(jet) = e.eval_jet(&p, 1) else { continue };
            if jet.max_abs() > 1e4 {
                continue;
            }
            for var in 0..dim {
                let de = holomorphic_derivative(&e, var).unwrap();
                let Ok(dval) = de.eval(&p) else { continue };
                assert!(
                    (dval - jet.d1(var)).norm() < 1e-10 * (1.0 + dval.norm()),
                    "derivative mismatch for {}",
                    e.print()
                );
            }
            checked += 1;
        }
    }

    #[test]
    fn holomorphic_derivative_rejects_conj() {
        let e = parse("conj(z1)", 1).unwrap();
        assert!(matches!(holomorphic_derivative(&e, 0), Err(Error::NonHolomorphic { .. })));
    }
}
