//! Compilation certificates: declared resource bounds as closed forms over
//! `N P T L D`, plus the output alignment between source and target.

use std::fmt;

use crate::error::Result;
use crate::models::Counters;
use crate::oracle::{Alignment, Bounds, Idx};
use crate::tfcore::pe::{parse_err, Sexp};
use crate::tfcore::text::Lines;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Var {
    N,
    P,
    T,
    L,
    D,
}

const VARS: [(Var, &str); 5] = [(Var::N, "N"), (Var::P, "P"), (Var::T, "T"), (Var::L, "L"), (Var::D, "D")];

impl Var {
    fn name(self) -> &'static str {
        VARS.iter().find(|v| v.0 == self).unwrap().1
    }

    fn idx(self) -> usize {
        VARS.iter().position(|v| v.0 == self).unwrap()
    }
}

/// Integer closed form. Division floors; `clog2` is the ceiling of log2
/// (0 for arguments up to 1).
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Formula {
    Num(i64),
    Var(Var),
    Add(Box<Formula>, Box<Formula>),
    Sub(Box<Formula>, Box<Formula>),
    Mul(Box<Formula>, Box<Formula>),
    Div(Box<Formula>, Box<Formula>),
    Max(Box<Formula>, Box<Formula>),
    CLog2(Box<Formula>),
}

pub fn num(v: i64) -> Formula {
    Formula::Num(v)
}

pub fn var(v: Var) -> Formula {
    Formula::Var(v)
}

impl Formula {
    pub fn add(self, o: Formula) -> Formula {
        Formula::Add(Box::new(self), Box::new(o))
    }
    pub fn sub(self, o: Formula) -> Formula {
        Formula::Sub(Box::new(self), Box::new(o))
    }
    pub fn mul(self, o: Formula) -> Formula {
        Formula::Mul(Box::new(self), Box::new(o))
    }
    pub fn div(self, o: Formula) -> Formula {
        Formula::Div(Box::new(self), Box::new(o))
    }
    pub fn max(self, o: Formula) -> Formula {
        Formula::Max(Box::new(self), Box::new(o))
    }
    pub fn clog2(self) -> Formula {
        Formula::CLog2(Box::new(self))
    }

    /// Value under `env`; `None` when a variable is unbound.
    pub fn eval(&self, env: &Env) -> Option<i64> {
        use Formula::*;
        Some(match self {
            Num(v) => *v,
            Var(v) => env.get(*v)?,
            Add(a, b) => a.eval(env)? + b.eval(env)?,
            Sub(a, b) => a.eval(env)? - b.eval(env)?,
            Mul(a, b) => a.eval(env)? * b.eval(env)?,
            Div(a, b) => {
                let d = b.eval(env)?;
                if d == 0 {
                    return None;
                }
                a.eval(env)?.div_euclid(d)
            }
            Max(a, b) => a.eval(env)?.max(b.eval(env)?),
            CLog2(a) => clog2(a.eval(env)?),
        })
    }

    pub fn parse(src: &str) -> std::result::Result<Formula, String> {
        let mut s = Sexp::new(src);
        let f = Self::read(&mut s)?;
        if !s.done() {
            return Err(format!("trailing input `{}`", s.rest().join(" ")));
        }
        Ok(f)
    }

    fn read(s: &mut Sexp) -> std::result::Result<Formula, String> {
        let t = s.word()?;
        if let Some(v) = VARS.iter().find(|v| v.1 == t) {
            return Ok(Formula::Var(v.0));
        }
        if t != "(" {
            return t.parse().map(Formula::Num).map_err(|_| format!("bad atom `{t}`"));
        }
        let op = s.word()?;
        let f = if op == "clog2" {
            Formula::CLog2(Box::new(Self::read(s)?))
        } else {
            let a = Box::new(Self::read(s)?);
            let b = Box::new(Self::read(s)?);
            match op {
                "+" => Formula::Add(a, b),
                "-" => Formula::Sub(a, b),
                "*" => Formula::Mul(a, b),
                "/" => Formula::Div(a, b),
                "max" => Formula::Max(a, b),
                _ => return Err(format!("unknown operator `{op}`")),
            }
        };
        match s.word()? {
            ")" => Ok(f),
            t => Err(format!("expected `)`, found `{t}`")),
        }
    }
}

pub fn clog2(v: i64) -> i64 {
    let mut b = 0;
    while (1i64 << b) < v {
        b += 1;
    }
    b
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Formula::*;
        let bin = |f: &mut fmt::Formatter<'_>, op: &str, a: &Formula, b: &Formula| write!(f, "({op} {a} {b})");
        match self {
            Num(v) => write!(f, "{v}"),
            Var(v) => f.write_str(v.name()),
            Add(a, b) => bin(f, "+", a, b),
            Sub(a, b) => bin(f, "-", a, b),
            Mul(a, b) => bin(f, "*", a, b),
            Div(a, b) => bin(f, "/", a, b),
            Max(a, b) => bin(f, "max", a, b),
            CLog2(a) => write!(f, "(clog2 {a})"),
        }
    }
}

/// Bindings for the formula variables.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Env([Option<i64>; 5]);

impl Env {
    pub fn get(&self, v: Var) -> Option<i64> {
        self.0[v.idx()]
    }

    pub fn set(mut self, v: Var, x: i64) -> Self {
        self.0[v.idx()] = Some(x);
        self
    }
}

/// Evaluated bounds for one input length.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Declared {
    pub steps: Option<usize>,
    pub padding: Option<usize>,
    pub layers: Option<usize>,
    pub width: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Certificate {
    pub source: String,
    pub target: String,
    /// Values of `P T L D` (and `N` for length-specific compilations).
    pub env: Env,
    pub steps: Option<Formula>,
    pub padding: Option<Formula>,
    pub layers: Option<Formula>,
    pub width: Option<Formula>,
    /// Source output index to target output index.
    pub alignment: Alignment,
    pub notes: Vec<String>,
}

impl Certificate {
    pub fn new(source: &str, target: &str) -> Self {
        Certificate {
            source: source.into(),
            target: target.into(),
            env: Env::default(),
            steps: None,
            padding: None,
            layers: None,
            width: None,
            alignment: Alignment::All,
            notes: Vec::new(),
        }
    }

    pub fn bind(mut self, v: Var, x: i64) -> Self {
        self.env = self.env.set(v, x);
        self
    }

    /// Input length the target was built for, if any.
    pub fn fixed_n(&self) -> Option<usize> {
        self.env.get(Var::N).map(|v| v as usize)
    }

    pub fn at(&self, n: usize) -> Declared {
        let env = match self.env.get(Var::N) {
            Some(_) => self.env,
            None => self.env.set(Var::N, n as i64),
        };
        let ev = |f: &Option<Formula>| f.as_ref().and_then(|f| f.eval(&env)).map(|v| v.max(0) as usize);
        Declared { steps: ev(&self.steps), padding: ev(&self.padding), layers: ev(&self.layers), width: ev(&self.width) }
    }

    pub fn bounds(&self, n: usize) -> Bounds {
        let d = self.at(n);
        Bounds { steps: d.steps, padding: d.padding }
    }

    /// Measured counters against the declared steps and padding.
    pub fn check(&self, n: usize, c: &Counters) -> std::result::Result<(), String> {
        let d = self.at(n);
        let steps = c.steps.max(c.loops);
        if let Some(s) = d.steps {
            if steps > s {
                return Err(format!("{steps} steps exceed the declared {s}"));
            }
        }
        if let Some(p) = d.padding {
            if c.padding_used > p {
                return Err(format!("padding {} exceeds the declared {p}", c.padding_used));
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut o = format!("CERT {} -> {}\n", self.source, self.target);
        let binds: Vec<String> = VARS.iter().filter_map(|(v, s)| self.env.get(*v).map(|x| format!("{s}={x}"))).collect();
        if !binds.is_empty() {
            o += &format!("CERT bind {}\n", binds.join(" "));
        }
        for (name, f) in [("steps", &self.steps), ("padding", &self.padding), ("layers", &self.layers), ("width", &self.width)] {
            if let Some(f) = f {
                o += &format!("CERT {name} {f}\n");
            }
        }
        o += &format!("CERT align {}\n", align_text(&self.alignment));
        for n in &self.notes {
            o += &format!("CERT note {n}\n");
        }
        o
    }

    /// Reads consecutive `CERT` lines; returns `None` if there are none.
    pub fn read_from(ls: &mut Lines) -> Result<Option<Self>> {
        let Some((ln, l)) = ls.peek() else { return Ok(None) };
        let Some(head) = l.strip_prefix("CERT ") else { return Ok(None) };
        ls.next()?;
        let (src, tgt) = head.split_once(" -> ").ok_or_else(|| parse_err(ln, "expected `CERT source -> target`"))?;
        let mut c = Certificate::new(src.trim(), tgt.trim());
        while let Some((ln, l)) = ls.peek() {
            let Some(rest) = l.strip_prefix("CERT ") else { break };
            ls.next()?;
            let (key, val) = rest.split_once(' ').unwrap_or((rest, ""));
            let formula = |v: &str| Formula::parse(v).map_err(|e| parse_err(ln, e));
            match key {
                "bind" => {
                    for b in val.split_whitespace() {
                        let (k, v) = b.split_once('=').ok_or_else(|| parse_err(ln, format!("bad binding `{b}`")))?;
                        let var = VARS.iter().find(|x| x.1 == k).ok_or_else(|| parse_err(ln, format!("unknown variable `{k}`")))?.0;
                        let x = v.parse().map_err(|_| parse_err(ln, format!("bad value `{v}`")))?;
                        c.env = c.env.set(var, x);
                    }
                }
                "steps" => c.steps = Some(formula(val)?),
                "padding" => c.padding = Some(formula(val)?),
                "layers" => c.layers = Some(formula(val)?),
                "width" => c.width = Some(formula(val)?),
                "align" => c.alignment = parse_align(val).map_err(|e| parse_err(ln, e))?,
                "note" => c.notes.push(val.to_string()),
                _ => return Err(parse_err(ln, format!("unknown certificate entry `{key}`"))),
            }
        }
        Ok(Some(c))
    }
}

fn idx_text(i: &Idx) -> String {
    match i {
        Idx::Front(i) => format!("f{i}"),
        Idx::Back(i) => format!("b{i}"),
    }
}

fn parse_idx(s: &str) -> std::result::Result<Idx, String> {
    let bad = || format!("bad output index `{s}`");
    let v = s.get(1..).and_then(|x| x.parse().ok()).ok_or_else(bad)?;
    match s.as_bytes().first() {
        Some(b'f') => Ok(Idx::Front(v)),
        Some(b'b') => Ok(Idx::Back(v)),
        _ => Err(bad()),
    }
}

pub fn align_text(a: &Alignment) -> String {
    match a {
        Alignment::All => "all".into(),
        Alignment::Pairs(p) => p.iter().map(|(x, y)| format!("{}={}", idx_text(x), idx_text(y))).collect::<Vec<_>>().join(" "),
    }
}

pub fn parse_align(s: &str) -> std::result::Result<Alignment, String> {
    if s.trim() == "all" {
        return Ok(Alignment::All);
    }
    let pairs = s
        .split_whitespace()
        .map(|p| {
            let (a, b) = p.split_once('=').ok_or_else(|| format!("bad alignment pair `{p}`"))?;
            Ok((parse_idx(a)?, parse_idx(b)?))
        })
        .collect::<std::result::Result<Vec<_>, String>>()?;
    if pairs.is_empty() {
        return Err("empty alignment".into());
    }
    Ok(Alignment::Pairs(pairs))
}
