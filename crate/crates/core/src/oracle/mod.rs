//! Reference evaluators and the equivalence harness.
//!
//! `naive_forward` is a dense, straight-line evaluation of the transformer
//! semantics that shares no evaluation code with the interpreter; only the
//! number system is common.

mod dfa;

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fxp::{Cfg, Fx, FxVec, Mat};
use crate::models::Counters;
use crate::tfcore::pe::{Cond, Expr, Kind, Pe};
use crate::tfcore::{gumbel_from_uniform, MaskMode, ResidualState, TransformerSpec};

pub use dfa::{dfa_eval, dfa_run, DFASpec};

// ------------------------------------------------------------ naive forward

fn expr(e: &Expr, n: i64, len: i64) -> i64 {
    match e {
        Expr::Pos => n,
        Expr::Len => len,
        Expr::Const(v) => *v,
        Expr::Add(a, b) => expr(a, n, len).saturating_add(expr(b, n, len)),
        Expr::Sub(a, b) => expr(a, n, len).saturating_sub(expr(b, n, len)),
        Expr::Mul(a, b) => expr(a, n, len).saturating_mul(expr(b, n, len)),
        Expr::Div(a, b) => match expr(b, n, len) {
            0 => 0,
            d => expr(a, n, len).div_euclid(d),
        },
        Expr::Mod(a, b) => match expr(b, n, len) {
            0 => 0,
            d => expr(a, n, len).rem_euclid(d),
        },
        Expr::Max(a, b) => expr(a, n, len).max(expr(b, n, len)),
        Expr::Min(a, b) => expr(a, n, len).min(expr(b, n, len)),
        Expr::PosPart(a) => expr(a, n, len).max(0),
        Expr::If(c, a, b) => {
            if cond(c, n, len) {
                expr(a, n, len)
            } else {
                expr(b, n, len)
            }
        }
    }
}

fn cond(c: &Cond, n: i64, len: i64) -> bool {
    match c {
        Cond::True => true,
        Cond::Lt(a, b) => expr(a, n, len) < expr(b, n, len),
        Cond::Le(a, b) => expr(a, n, len) <= expr(b, n, len),
        Cond::Eq(a, b) => expr(a, n, len) == expr(b, n, len),
        Cond::And(a, b) => cond(a, n, len) && cond(b, n, len),
        Cond::Or(a, b) => cond(a, n, len) || cond(b, n, len),
        Cond::Not(a) => !cond(a, n, len),
    }
}

fn pe_vec(cfg: Cfg, pe: &Pe, n: i64, len: i64, out: &mut [Fx], base: usize) {
    for f in &pe.fields {
        let at = base + f.at;
        match &f.kind {
            Kind::Bin { bits, e } | Kind::SBin { bits, e } => {
                let v = expr(e, n, len);
                for i in 0..*bits {
                    let b = (v >> (bits - 1 - i)) & 1;
                    let x = match f.kind {
                        Kind::SBin { .. } => 2 * b - 1,
                        _ => b,
                    };
                    out[at + i] = cfg.add(out[at + i], cfg.int(x));
                }
            }
            Kind::Ind(c) => {
                if cond(c, n, len) {
                    out[at] = cfg.add(out[at], cfg.one());
                }
            }
            Kind::Const(v) => out[at] = cfg.add(out[at], *v),
            Kind::OneHot { size, e } => {
                let v = expr(e, n, len);
                if v >= 0 && (v as usize) < *size {
                    out[at + v as usize] = cfg.add(out[at + v as usize], cfg.one());
                }
            }
            Kind::Sub { n: sn, len: sl, pe } => pe_vec(cfg, pe, expr(sn, n, len), expr(sl, n, len), out, at),
        }
    }
}

fn mat_vec(cfg: Cfg, m: &Mat, x: &[Fx]) -> FxVec {
    (0..m.rows).map(|r| cfg.iter_sum(m.row(r).iter().zip(x).map(|(&a, &b)| cfg.mul(a, b)))).collect()
}

/// Dense reference forward pass.
pub fn naive_forward(spec: &TransformerSpec, tokens: &[usize], noise: Option<&Mat>) -> Result<ResidualState> {
    spec.validate()?;
    let cfg = spec.cfg;
    let len = tokens.len();
    if spec.fixed_len.is_some_and(|f| f != len) {
        return Err(Error::Spec("length differs from the compiled length".into()));
    }
    let d = spec.d;
    if noise.is_some_and(|z| z.rows != len || z.cols != d) {
        return Err(Error::Shape("noise does not match the residual".into()));
    }
    let mut h = Mat::zeros(len, d);
    for (i, &t) in tokens.iter().enumerate() {
        if t >= spec.alphabet.len() {
            return Err(Error::UnknownSymbol(format!("#{t}")));
        }
        let mut pe = vec![Fx::ZERO; d];
        pe_vec(cfg, &spec.pe, i as i64 + 1, len as i64, &mut pe, 0);
        for j in 0..d {
            let mut x = cfg.add(spec.embed.get(j, t), pe[j]);
            if let Some(z) = noise {
                x = cfg.add(x, z.get(i, j));
            }
            h.set(i, j, x);
        }
    }
    for layer in &spec.layers {
        let mut g = Mat::zeros(len, d);
        for head in &layer.heads {
            let q: Vec<FxVec> = (0..len).map(|i| mat_vec(cfg, &head.wq, h.row(i))).collect();
            let k: Vec<FxVec> = (0..len).map(|i| mat_vec(cfg, &head.wk, h.row(i))).collect();
            let v: Vec<FxVec> = (0..len).map(|i| mat_vec(cfg, &head.wv, h.row(i))).collect();
            for i in 0..len {
                let scores: FxVec = (0..len)
                    .map(|j| {
                        if spec.mask == MaskMode::Causal && j > i {
                            cfg.neg_bf()
                        } else {
                            cfg.iter_sum(q[i].iter().zip(&k[j]).map(|(&a, &b)| cfg.mul(a, b)))
                        }
                    })
                    .collect();
                let a = cfg.softmax(&scores)?;
                for c in 0..head.wv.rows {
                    let o = cfg.iter_sum((0..len).map(|j| cfg.mul(a[j], v[j][c])));
                    g.set(i, head.offset + c, o);
                }
            }
        }
        for i in 0..len {
            for j in 0..d {
                h.set(i, j, cfg.add(h.get(i, j), g.get(i, j)));
            }
        }
        for mlp in &layer.mlps {
            for i in 0..len {
                let x = h.row(i).to_vec();
                let z: FxVec = mat_vec(cfg, &mlp.w1, &x).iter().zip(&mlp.b1).map(|(&a, &b)| cfg.relu(cfg.add(a, b))).collect();
                let y = mat_vec(cfg, &mlp.w2, &z);
                for j in 0..d {
                    let mut o = cfg.add(y[j], mlp.b2[j]);
                    if mlp.out_relu {
                        o = cfg.relu(o);
                    }
                    h.set(i, j, cfg.add(x[j], o));
                }
            }
        }
    }
    Ok(ResidualState { h, layer: spec.layers.len() })
}

// ----------------------------------------------------------- Gumbel check

/// Empirical Gumbel-max frequencies against the exact softmax of the
/// (already quantized) logits. Passes iff total variation < 0.02.
pub fn gumbel_stat_test(cfg: Cfg, logits: &[Fx], draws: usize, seed: u64) -> (f64, bool) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0usize; logits.len()];
    let mut s = vec![Fx::ZERO; logits.len()];
    for _ in 0..draws {
        for (si, &l) in s.iter_mut().zip(logits) {
            *si = cfg.add(l, gumbel_from_uniform(cfg, rng.gen::<f64>()));
        }
        counts[crate::tfcore::argmax(&s)] += 1;
    }
    let mx = logits.iter().map(|&l| cfg.to_f64(l)).fold(f64::NEG_INFINITY, f64::max);
    let ex: Vec<f64> = logits.iter().map(|&l| (cfg.to_f64(l) - mx).exp()).collect();
    let tot: f64 = ex.iter().sum();
    let tv = counts.iter().zip(&ex).map(|(&c, &e)| (c as f64 / draws as f64 - e / tot).abs()).sum::<f64>() / 2.0;
    (tv, tv < 0.02)
}

// ---------------------------------------------------------------- inputs

/// All strings over `alphabet` of length `lo..=hi`, in shortlex order.
pub fn shortlex(alphabet: &[String], lo: usize, hi: usize) -> Vec<Vec<String>> {
    let mut out = Vec::new();
    let k = alphabet.len();
    for len in lo..=hi {
        let mut idx = vec![0usize; len];
        loop {
            out.push(idx.iter().map(|&i| alphabet[i].clone()).collect());
            let mut j = len;
            loop {
                if j == 0 {
                    break;
                }
                j -= 1;
                idx[j] += 1;
                if idx[j] < k {
                    break;
                }
                idx[j] = 0;
                if j == 0 {
                    j = usize::MAX;
                    break;
                }
            }
            if j == usize::MAX || len == 0 || k == 0 {
                break;
            }
        }
    }
    out
}

/// `count` seeded random strings with lengths in `lo..=hi`.
pub fn random_inputs(alphabet: &[String], count: usize, lo: usize, hi: usize, seed: u64) -> Vec<Vec<String>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let len = rng.gen_range(lo..=hi);
            (0..len).map(|_| alphabet[rng.gen_range(0..alphabet.len())].clone()).collect()
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct InputSet {
    pub descriptor: String,
    pub inputs: Vec<Vec<String>>,
}

impl InputSet {
    pub fn shortlex(alphabet: &[String], lo: usize, hi: usize) -> Self {
        InputSet { descriptor: format!("shortlex lengths {lo}..={hi} over {{{}}}", alphabet.join(",")), inputs: shortlex(alphabet, lo, hi) }
    }

    pub fn random(alphabet: &[String], count: usize, lo: usize, hi: usize, seed: u64) -> Self {
        InputSet {
            descriptor: format!("{count} random lengths {lo}..={hi} seed={seed} (chacha8)"),
            inputs: random_inputs(alphabet, count, lo, hi, seed),
        }
    }
}

// ------------------------------------------------------------ equivalence

/// Measured resources of one run.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Outcome {
    pub outputs: Vec<String>,
    pub counters: Counters,
}

/// Declared resource bounds for inputs of a given length.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Bounds {
    pub steps: Option<usize>,
    pub padding: Option<usize>,
}

type RunFn = dyn Fn(&[String]) -> Result<Outcome> + Send + Sync;
type BoundFn = dyn Fn(usize) -> Bounds + Send + Sync;

/// A named machine: a run function plus its declared bounds.
pub struct Machine {
    pub name: String,
    run: Box<RunFn>,
    bounds: Box<BoundFn>,
}

impl Machine {
    pub fn new(name: impl Into<String>, run: impl Fn(&[String]) -> Result<Outcome> + Send + Sync + 'static) -> Self {
        Machine { name: name.into(), run: Box::new(run), bounds: Box::new(|_| Bounds::default()) }
    }

    pub fn with_bounds(mut self, b: impl Fn(usize) -> Bounds + Send + Sync + 'static) -> Self {
        self.bounds = Box::new(b);
        self
    }

    pub fn run(&self, w: &[String]) -> Result<Outcome> {
        (self.run)(w)
    }

    pub fn bounds(&self, n: usize) -> Bounds {
        (self.bounds)(n)
    }
}

/// Output index counted from the front or the back.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Idx {
    Front(usize),
    Back(usize),
}

impl Idx {
    pub fn get<'a>(&self, v: &'a [String]) -> Option<&'a String> {
        match *self {
            Idx::Front(i) => v.get(i),
            Idx::Back(i) => v.len().checked_sub(i + 1).and_then(|j| v.get(j)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Alignment {
    /// Every output, position by position.
    All,
    Pairs(Vec<(Idx, Idx)>),
}

impl Alignment {
    pub fn last() -> Self {
        Alignment::Pairs(vec![(Idx::Back(0), Idx::Back(0))])
    }

    fn describe(&self) -> String {
        match self {
            Alignment::All => "all outputs".into(),
            Alignment::Pairs(p) => p.iter().map(|(a, b)| format!("{a:?}~{b:?}")).collect::<Vec<_>>().join(","),
        }
    }
}

#[derive(Clone, Debug)]
pub struct CaseResult {
    pub input: Vec<String>,
    pub pass: bool,
    pub detail: String,
    pub a: Counters,
    pub b: Counters,
}

#[derive(Clone, Debug)]
pub struct EquivalenceReport {
    pub machines: (String, String),
    pub inputs: String,
    pub alignment: String,
    pub cases: Vec<CaseResult>,
    pub bound_failures: usize,
}

impl EquivalenceReport {
    pub fn failures(&self) -> Vec<&CaseResult> {
        self.cases.iter().filter(|c| !c.pass).collect()
    }

    pub fn pass(&self) -> bool {
        self.cases.iter().all(|c| c.pass)
    }

    pub fn max_counters(&self) -> (Counters, Counters) {
        let mx = |f: &dyn Fn(&CaseResult) -> Counters| {
            self.cases.iter().map(f).fold(Counters::default(), |a, b| Counters {
                steps: a.steps.max(b.steps),
                loops: a.loops.max(b.loops),
                cot_steps: a.cot_steps.max(b.cot_steps),
                padding_used: a.padding_used.max(b.padding_used),
                evals: a.evals.max(b.evals),
            })
        };
        (mx(&|c| c.a), mx(&|c| c.b))
    }

    pub fn to_text(&self) -> String {
        let mut o = String::new();
        writeln!(o, "report a={} b={}", self.machines.0, self.machines.1).unwrap();
        writeln!(o, "inputs {}", self.inputs).unwrap();
        writeln!(o, "alignment {}", self.alignment).unwrap();
        for c in &self.cases {
            writeln!(o, "{} w={} {}", if c.pass { "ok" } else { "FAIL" }, c.input.join(""), c.detail).unwrap();
        }
        let (ca, cb) = self.max_counters();
        writeln!(o, "max a: steps={} padding={} evals={}", ca.steps, ca.padding_used, ca.evals).unwrap();
        writeln!(o, "max b: steps={} padding={} evals={}", cb.steps, cb.padding_used, cb.evals).unwrap();
        writeln!(
            o,
            "summary cases={} failures={} bound_failures={} verdict={}",
            self.cases.len(),
            self.failures().len(),
            self.bound_failures,
            if self.pass() { "pass" } else { "fail" }
        )
        .unwrap();
        o
    }
}

fn check_bounds(b: Bounds, c: &Counters) -> Option<String> {
    if let Some(s) = b.steps {
        if c.steps > s {
            return Some(format!("steps {} > bound {s}", c.steps));
        }
    }
    if let Some(p) = b.padding {
        if c.padding_used > p {
            return Some(format!("padding {} > bound {p}", c.padding_used));
        }
    }
    None
}

/// Run both machines on every input and compare aligned outputs; measured
/// counters are checked against each machine's declared bounds.
pub fn check_equivalence(a: &Machine, b: &Machine, alignment: &Alignment, inputs: &InputSet) -> EquivalenceReport {
    let cases: Vec<(CaseResult, bool)> = inputs
        .inputs
        .par_iter()
        .map(|w| {
            let (ra, rb) = (a.run(w), b.run(w));
            let mut res = CaseResult { input: w.clone(), pass: false, detail: String::new(), a: Counters::default(), b: Counters::default() };
            let (oa, ob) = match (ra, rb) {
                (Ok(x), Ok(y)) => (x, y),
                (Err(e), _) => {
                    res.detail = format!("{} failed: {e}", a.name);
                    return (res, false);
                }
                (_, Err(e)) => {
                    res.detail = format!("{} failed: {e}", b.name);
                    return (res, false);
                }
            };
            res.a = oa.counters;
            res.b = ob.counters;
            let mut bad_bound = false;
            for (m, c) in [(a, &oa.counters), (b, &ob.counters)] {
                if let Some(msg) = check_bounds(m.bounds(w.len()), c) {
                    res.detail = format!("{}: {msg}", m.name);
                    bad_bound = true;
                }
            }
            let pairs: Vec<(Idx, Idx)> = match alignment {
                Alignment::All => {
                    if oa.outputs.len() != ob.outputs.len() {
                        res.detail = format!("output lengths {} vs {}", oa.outputs.len(), ob.outputs.len());
                        return (res, bad_bound);
                    }
                    (0..oa.outputs.len()).map(|i| (Idx::Front(i), Idx::Front(i))).collect()
                }
                Alignment::Pairs(p) => p.clone(),
            };
            let mut ok = !bad_bound;
            for (ia, ib) in pairs {
                match (ia.get(&oa.outputs), ib.get(&ob.outputs)) {
                    (Some(x), Some(y)) if x == y => {}
                    (Some(x), Some(y)) => {
                        ok = false;
                        res.detail = format!("{ia:?}={x} vs {ib:?}={y}");
                    }
                    _ => {
                        ok = false;
                        res.detail = format!("alignment {ia:?}~{ib:?} out of range");
                    }
                }
            }
            if ok && res.detail.is_empty() {
                res.detail = oa.outputs.last().cloned().unwrap_or_default();
            }
            res.pass = ok;
            (res, bad_bound)
        })
        .collect();
    let bound_failures = cases.iter().filter(|c| c.1).count();
    EquivalenceReport {
        machines: (a.name.clone(), b.name.clone()),
        inputs: inputs.descriptor.clone(),
        alignment: alignment.describe(),
        cases: cases.into_iter().map(|c| c.0).collect(),
        bound_failures,
    }
}

/// Lazily built per-length artifacts (compiled machines are per length).
pub struct PerLen<T> {
    build: Box<dyn Fn(usize) -> Result<T> + Send + Sync>,
    cache: Mutex<HashMap<usize, Arc<T>>>,
}

impl<T> PerLen<T> {
    pub fn new(build: impl Fn(usize) -> Result<T> + Send + Sync + 'static) -> Self {
        PerLen { build: Box::new(build), cache: Mutex::new(HashMap::new()) }
    }

    pub fn get(&self, n: usize) -> Result<Arc<T>> {
        if let Some(t) = self.cache.lock().unwrap().get(&n) {
            return Ok(t.clone());
        }
        let t = Arc::new((self.build)(n)?);
        self.cache.lock().unwrap().insert(n, t.clone());
        Ok(t)
    }
}

#[cfg(test)]
mod tests;
