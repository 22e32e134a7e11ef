//! Positional encodings built from integer expressions over the 1-based
//! position `n` and the sequence length `N`.

use std::fmt;

use crate::error::Error;
use crate::fxp::{Cfg, Fx};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Expr {
    Pos,
    Len,
    Const(i64),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    /// Floor division; division by zero yields 0.
    Div(Box<Expr>, Box<Expr>),
    /// Euclidean remainder; modulus zero yields 0.
    Mod(Box<Expr>, Box<Expr>),
    Max(Box<Expr>, Box<Expr>),
    Min(Box<Expr>, Box<Expr>),
    PosPart(Box<Expr>),
    If(Box<Cond>, Box<Expr>, Box<Expr>),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Cond {
    True,
    Lt(Expr, Expr),
    Le(Expr, Expr),
    Eq(Expr, Expr),
    And(Box<Cond>, Box<Cond>),
    Or(Box<Cond>, Box<Cond>),
    Not(Box<Cond>),
}

pub fn n() -> Expr {
    Expr::Pos
}

pub fn len() -> Expr {
    Expr::Len
}

pub fn k(v: i64) -> Expr {
    Expr::Const(v)
}

impl Expr {
    pub fn add(self, o: Expr) -> Expr {
        Expr::Add(Box::new(self), Box::new(o))
    }
    pub fn sub(self, o: Expr) -> Expr {
        Expr::Sub(Box::new(self), Box::new(o))
    }
    pub fn mul(self, o: Expr) -> Expr {
        Expr::Mul(Box::new(self), Box::new(o))
    }
    pub fn div(self, o: Expr) -> Expr {
        Expr::Div(Box::new(self), Box::new(o))
    }
    pub fn rem(self, o: Expr) -> Expr {
        Expr::Mod(Box::new(self), Box::new(o))
    }
    pub fn max(self, o: Expr) -> Expr {
        Expr::Max(Box::new(self), Box::new(o))
    }
    pub fn min(self, o: Expr) -> Expr {
        Expr::Min(Box::new(self), Box::new(o))
    }
    pub fn pos(self) -> Expr {
        Expr::PosPart(Box::new(self))
    }
    pub fn lt(self, o: Expr) -> Cond {
        Cond::Lt(self, o)
    }
    pub fn le(self, o: Expr) -> Cond {
        Cond::Le(self, o)
    }
    pub fn gt(self, o: Expr) -> Cond {
        Cond::Lt(o, self)
    }
    pub fn ge(self, o: Expr) -> Cond {
        Cond::Le(o, self)
    }
    pub fn eq(self, o: Expr) -> Cond {
        Cond::Eq(self, o)
    }

    pub fn eval(&self, pos: i64, len: i64) -> i64 {
        use Expr::*;
        let ev = |e: &Expr| e.eval(pos, len);
        match self {
            Pos => pos,
            Len => len,
            Const(v) => *v,
            Add(a, b) => ev(a).saturating_add(ev(b)),
            Sub(a, b) => ev(a).saturating_sub(ev(b)),
            Mul(a, b) => ev(a).saturating_mul(ev(b)),
            Div(a, b) => {
                let d = ev(b);
                if d == 0 {
                    0
                } else {
                    ev(a).div_euclid(d)
                }
            }
            Mod(a, b) => {
                let d = ev(b);
                if d == 0 {
                    0
                } else {
                    ev(a).rem_euclid(d)
                }
            }
            Max(a, b) => ev(a).max(ev(b)),
            Min(a, b) => ev(a).min(ev(b)),
            PosPart(a) => ev(a).max(0),
            If(c, a, b) => {
                if c.eval(pos, len) {
                    ev(a)
                } else {
                    ev(b)
                }
            }
        }
    }

    pub fn uses_len(&self) -> bool {
        use Expr::*;
        match self {
            Len => true,
            Pos | Const(_) => false,
            Add(a, b) | Sub(a, b) | Mul(a, b) | Div(a, b) | Mod(a, b) | Max(a, b) | Min(a, b) => {
                a.uses_len() || b.uses_len()
            }
            PosPart(a) => a.uses_len(),
            If(c, a, b) => c.uses_len() || a.uses_len() || b.uses_len(),
        }
    }
}

impl Cond {
    pub fn and(self, o: Cond) -> Cond {
        Cond::And(Box::new(self), Box::new(o))
    }
    pub fn or(self, o: Cond) -> Cond {
        Cond::Or(Box::new(self), Box::new(o))
    }
    pub fn not(self) -> Cond {
        Cond::Not(Box::new(self))
    }
    pub fn then(self, a: Expr, b: Expr) -> Expr {
        Expr::If(Box::new(self), Box::new(a), Box::new(b))
    }

    pub fn eval(&self, pos: i64, len: i64) -> bool {
        use Cond::*;
        match self {
            True => true,
            Lt(a, b) => a.eval(pos, len) < b.eval(pos, len),
            Le(a, b) => a.eval(pos, len) <= b.eval(pos, len),
            Eq(a, b) => a.eval(pos, len) == b.eval(pos, len),
            And(a, b) => a.eval(pos, len) && b.eval(pos, len),
            Or(a, b) => a.eval(pos, len) || b.eval(pos, len),
            Not(a) => !a.eval(pos, len),
        }
    }

    pub fn uses_len(&self) -> bool {
        use Cond::*;
        match self {
            True => false,
            Lt(a, b) | Le(a, b) | Eq(a, b) => a.uses_len() || b.uses_len(),
            And(a, b) | Or(a, b) => a.uses_len() || b.uses_len(),
            Not(a) => a.uses_len(),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Expr::*;
        match self {
            Pos => write!(f, "n"),
            Len => write!(f, "N"),
            Const(v) => write!(f, "{v}"),
            Add(a, b) => write!(f, "(+ {a} {b})"),
            Sub(a, b) => write!(f, "(- {a} {b})"),
            Mul(a, b) => write!(f, "(* {a} {b})"),
            Div(a, b) => write!(f, "(/ {a} {b})"),
            Mod(a, b) => write!(f, "(% {a} {b})"),
            Max(a, b) => write!(f, "(max {a} {b})"),
            Min(a, b) => write!(f, "(min {a} {b})"),
            PosPart(a) => write!(f, "(pos {a})"),
            If(c, a, b) => write!(f, "(if {c} {a} {b})"),
        }
    }
}

impl fmt::Display for Cond {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Cond::*;
        match self {
            True => write!(f, "true"),
            Lt(a, b) => write!(f, "(< {a} {b})"),
            Le(a, b) => write!(f, "(<= {a} {b})"),
            Eq(a, b) => write!(f, "(= {a} {b})"),
            And(a, b) => write!(f, "(and {a} {b})"),
            Or(a, b) => write!(f, "(or {a} {b})"),
            Not(a) => write!(f, "(not {a})"),
        }
    }
}

/// Token stream for the s-expression syntax used by `Display`.
pub(crate) struct Sexp<'a> {
    toks: Vec<&'a str>,
    at: usize,
}

impl<'a> Sexp<'a> {
    pub(crate) fn new(src: &'a str) -> Self {
        let mut toks = Vec::new();
        let mut start = None;
        for (i, ch) in src.char_indices() {
            match ch {
                '(' | ')' => {
                    if let Some(s) = start.take() {
                        toks.push(&src[s..i]);
                    }
                    toks.push(&src[i..i + 1]);
                }
                c if c.is_whitespace() => {
                    if let Some(s) = start.take() {
                        toks.push(&src[s..i]);
                    }
                }
                _ => {
                    if start.is_none() {
                        start = Some(i);
                    }
                }
            }
        }
        if let Some(s) = start {
            toks.push(&src[s..]);
        }
        Sexp { toks, at: 0 }
    }

    fn next(&mut self) -> std::result::Result<&'a str, String> {
        let t = self.toks.get(self.at).copied().ok_or("unexpected end of expression")?;
        self.at += 1;
        Ok(t)
    }

    fn close(&mut self) -> std::result::Result<(), String> {
        match self.next()? {
            ")" => Ok(()),
            t => Err(format!("expected `)`, found `{t}`")),
        }
    }

    pub(crate) fn done(&self) -> bool {
        self.at >= self.toks.len()
    }

    pub(crate) fn rest(&self) -> Vec<&'a str> {
        self.toks[self.at..].to_vec()
    }

    pub(crate) fn word(&mut self) -> std::result::Result<&'a str, String> {
        self.next()
    }

    pub(crate) fn expr(&mut self) -> std::result::Result<Expr, String> {
        let t = self.next()?;
        match t {
            "n" => Ok(Expr::Pos),
            "N" => Ok(Expr::Len),
            "(" => {
                let op = self.next()?;
                let e = match op {
                    "pos" => Expr::PosPart(Box::new(self.expr()?)),
                    "if" => {
                        let c = self.cond()?;
                        let a = self.expr()?;
                        let b = self.expr()?;
                        Expr::If(Box::new(c), Box::new(a), Box::new(b))
                    }
                    _ => {
                        let a = Box::new(self.expr()?);
                        let b = Box::new(self.expr()?);
                        match op {
                            "+" => Expr::Add(a, b),
                            "-" => Expr::Sub(a, b),
                            "*" => Expr::Mul(a, b),
                            "/" => Expr::Div(a, b),
                            "%" => Expr::Mod(a, b),
                            "max" => Expr::Max(a, b),
                            "min" => Expr::Min(a, b),
                            _ => return Err(format!("unknown operator `{op}`")),
                        }
                    }
                };
                self.close()?;
                Ok(e)
            }
            _ => t.parse().map(Expr::Const).map_err(|_| format!("bad atom `{t}`")),
        }
    }

    pub(crate) fn cond(&mut self) -> std::result::Result<Cond, String> {
        let t = self.next()?;
        if t == "true" {
            return Ok(Cond::True);
        }
        if t != "(" {
            return Err(format!("expected condition, found `{t}`"));
        }
        let op = self.next()?;
        let c = match op {
            "<" => Cond::Lt(self.expr()?, self.expr()?),
            "<=" => Cond::Le(self.expr()?, self.expr()?),
            "=" => Cond::Eq(self.expr()?, self.expr()?),
            "and" => Cond::And(Box::new(self.cond()?), Box::new(self.cond()?)),
            "or" => Cond::Or(Box::new(self.cond()?), Box::new(self.cond()?)),
            "not" => Cond::Not(Box::new(self.cond()?)),
            _ => return Err(format!("unknown condition `{op}`")),
        };
        self.close()?;
        Ok(c)
    }
}

/// One positional-encoding field, written at residual offset `at`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Field {
    pub at: usize,
    pub kind: Kind,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Kind {
    /// Binary digits of the value modulo `2^bits`, most significant first.
    Bin { bits: usize, e: Expr },
    /// Signed binary: each digit mapped to -1 / +1.
    SBin { bits: usize, e: Expr },
    Ind(Cond),
    Const(Fx),
    /// Unit vector `e_v`; values outside `0..size` give the zero vector.
    OneHot { size: usize, e: Expr },
    /// Another encoding evaluated at a remapped position and length. Its
    /// field offsets are relative to `at`.
    Sub { n: Expr, len: Expr, pe: Pe },
}

impl Kind {
    pub fn width(&self) -> usize {
        match self {
            Kind::Bin { bits, .. } | Kind::SBin { bits, .. } => *bits,
            Kind::Ind(_) | Kind::Const(_) => 1,
            Kind::OneHot { size, .. } => *size,
            Kind::Sub { pe, .. } => pe.extent(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Pe {
    pub fields: Vec<Field>,
}

impl Pe {
    pub fn push(&mut self, at: usize, kind: Kind) {
        self.fields.push(Field { at, kind });
    }

    /// One past the highest coordinate written.
    pub fn extent(&self) -> usize {
        self.fields.iter().map(|f| f.at + f.kind.width()).max().unwrap_or(0)
    }

    pub fn uses_len(&self) -> bool {
        self.fields.iter().any(|f| match &f.kind {
            Kind::Bin { e, .. } | Kind::SBin { e, .. } | Kind::OneHot { e, .. } => e.uses_len(),
            Kind::Ind(c) => c.uses_len(),
            Kind::Const(_) => false,
            // the nested encoding only sees the remapped length
            Kind::Sub { n, len, .. } => n.uses_len() || len.uses_len(),
        })
    }

    /// Add `p(pos, len)` into `out[base..]`.
    pub fn eval_into(&self, cfg: Cfg, pos: i64, len: i64, out: &mut [Fx], base: usize) {
        for f in &self.fields {
            let at = base + f.at;
            match &f.kind {
                Kind::Bin { bits, e } | Kind::SBin { bits, e } => {
                    let v = e.eval(pos, len);
                    let signed = matches!(f.kind, Kind::SBin { .. });
                    for i in 0..*bits {
                        let bit = (v >> (bits - 1 - i)) & 1;
                        let val = if signed { 2 * bit - 1 } else { bit };
                        out[at + i] = cfg.add(out[at + i], cfg.int(val));
                    }
                }
                Kind::Ind(c) => {
                    if c.eval(pos, len) {
                        out[at] = cfg.add(out[at], cfg.one());
                    }
                }
                Kind::Const(v) => out[at] = cfg.add(out[at], *v),
                Kind::OneHot { size, e } => {
                    let v = e.eval(pos, len);
                    if (0..*size as i64).contains(&v) {
                        let i = at + v as usize;
                        out[i] = cfg.add(out[i], cfg.one());
                    }
                }
                Kind::Sub { n, len: l, pe } => {
                    pe.eval_into(cfg, n.eval(pos, len), l.eval(pos, len), out, at);
                }
            }
        }
    }

    pub fn eval(&self, cfg: Cfg, pos: i64, len: i64, d: usize) -> Vec<Fx> {
        let mut v = vec![Fx::ZERO; d];
        self.eval_into(cfg, pos, len, &mut v, 0);
        v
    }

    /// Shift every field by `by` coordinates.
    pub fn shifted(&self, by: usize) -> Pe {
        Pe {
            fields: self.fields.iter().map(|f| Field { at: f.at + by, kind: f.kind.clone() }).collect(),
        }
    }
}

/// Bits needed to write every value in `0..=max`.
pub fn bits_for(max: usize) -> usize {
    (usize::BITS - max.leading_zeros()).max(1) as usize
}

pub(crate) fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expr_round_trip_and_eval() {
        let e = n().sub(len()).pos().div(k(3)).add(Cond::True.then(k(1), k(2)));
        let s = e.to_string();
        let back = Sexp::new(&s).expr().unwrap();
        assert_eq!(back, e);
        assert_eq!(e.eval(10, 4), 3);
        assert_eq!(k(7).div(k(0)).eval(1, 1), 0);
        assert_eq!(k(-1).div(k(2)).eval(1, 1), -1);
        assert_eq!(k(-1).rem(k(4)).eval(1, 1), 3);
        let c = n().le(k(3)).and(len().eq(k(5)).not());
        assert_eq!(Sexp::new(&c.to_string()).cond().unwrap(), c);
        assert!(c.eval(2, 4));
        assert!(!c.eval(2, 5));
    }

    #[test]
    fn fields_write_expected_values() {
        let cfg = Cfg::new(3).unwrap();
        let mut pe = Pe::default();
        pe.push(0, Kind::Bin { bits: 3, e: n() });
        pe.push(3, Kind::SBin { bits: 2, e: n() });
        pe.push(5, Kind::Ind(n().eq(len())));
        pe.push(6, Kind::OneHot { size: 3, e: n().sub(k(1)) });
        let mut inner = Pe::default();
        inner.push(0, Kind::Bin { bits: 2, e: n() });
        pe.push(9, Kind::Sub { n: n().add(k(1)), len: k(4), pe: inner });
        let v = pe.eval(cfg, 2, 2, 11);
        let ints: Vec<i64> = v.iter().map(|x| x.raw() / cfg.scale()).collect();
        assert_eq!(ints, vec![0, 1, 0, 1, -1, 1, 0, 1, 0, 1, 1]);
        assert_eq!(pe.extent(), 11);
        assert!(pe.uses_len());
        assert_eq!(bits_for(0), 1);
        assert_eq!(bits_for(7), 3);
        assert_eq!(bits_for(8), 4);
    }
}
