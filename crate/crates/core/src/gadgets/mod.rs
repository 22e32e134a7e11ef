//! Reusable attention and MLP constructions: position matching, ignoring and
//! focusing, detection, argmax, projection, binary arithmetic, block
//! selection and pointer decoding.
//!
//! Gadgets work on residual coordinates handed in by the caller. Builders
//! that need positional information add fields to a [`SpecB`].

pub mod build;
pub mod suite;

use crate::error::{Error, Result};
use crate::fxp::{Cfg, Fx, FxVec};
use crate::models::PLTSpec;
use crate::tfcore::pe::{bits_for, k, n};
use crate::tfcore::{Cond, Pe, TransformerSpec, MASK};

pub use build::{HeadB, LayerB, MlpB, SpVec, SpecB, Unit};

/// A built fragment together with the slices it reads and writes.
#[derive(Clone, Debug)]
pub struct GadgetHandle {
    pub kind: String,
    pub layers: Vec<LayerB>,
    /// Positional fields the fragment relies on.
    pub pe: Pe,
    pub inputs: Vec<Vec<usize>>,
    pub outputs: Vec<Vec<usize>>,
    /// Stacked MLP sub-layers used.
    pub mlp_depth: usize,
    pub width: usize,
}

impl GadgetHandle {
    /// Run the MLP part on a single residual vector. `inputs` fills the
    /// declared input slices in order; returns the output slices.
    pub fn eval_mlp(&self, cfg: Cfg, inputs: &[&[Fx]]) -> Result<Vec<FxVec>> {
        let mut x = vec![Fx::ZERO; self.width];
        for (slice, vals) in self.inputs.iter().zip(inputs) {
            if slice.len() != vals.len() {
                return Err(Error::Shape(format!("{}: input of {} values for a slice of {}", self.kind, vals.len(), slice.len())));
            }
            for (&c, &v) in slice.iter().zip(vals.iter()) {
                x[c] = v;
            }
        }
        for l in &self.layers {
            for m in &l.mlps {
                let y = m.finish(self.width)?.apply(cfg, &x)?;
                for (xi, yi) in x.iter_mut().zip(&y) {
                    *xi = cfg.add(*xi, *yi);
                }
            }
        }
        Ok(self.outputs.iter().map(|s| s.iter().map(|&c| x[c]).collect()).collect())
    }
}

fn w(c: usize, v: Fx) -> (usize, Fx) {
    (c, v)
}

// ---------------------------------------------------------------- matching

/// Query and key vectors for matching position `target` against key id
/// `id`: `q = B_F * interleave(sbin(target), 1)`, `k = interleave(sbin(id), -1)`.
pub fn pe_match_qk(cfg: Cfg, target: usize, id: usize, bits: usize) -> (FxVec, FxVec) {
    let mut q = Vec::with_capacity(2 * bits);
    let mut kk = Vec::with_capacity(2 * bits);
    let sb = |v: usize, i: usize| if (v >> (bits - 1 - i)) & 1 == 1 { 1 } else { -1 };
    for i in 0..bits {
        q.push(cfg.mul(cfg.bf(), cfg.int(sb(target, i))));
        q.push(cfg.bf());
        kk.push(cfg.int(sb(id, i)));
        kk.push(cfg.neg(cfg.one()));
    }
    (q, kk)
}

/// Query/key rows realizing [`pe_match_qk`] from residual coordinates
/// holding `sbin(target)`, `sbin(id)` and a constant 1.
pub fn match_qk(cfg: Cfg, q_sbin: &[usize], k_sbin: &[usize], one: usize) -> (Vec<SpVec>, Vec<SpVec>) {
    assert_eq!(q_sbin.len(), k_sbin.len());
    let mut q = Vec::new();
    let mut kk = Vec::new();
    for (&a, &b) in q_sbin.iter().zip(k_sbin) {
        q.push(vec![w(a, cfg.bf())]);
        q.push(vec![w(one, cfg.bf())]);
        kk.push(vec![w(b, cfg.one())]);
        kk.push(vec![w(one, cfg.neg(cfg.one()))]);
    }
    (q, kk)
}

/// Hard attention to the position whose id matches the query target,
/// copying `reads` of that position to `offset..`.
pub fn match_head(cfg: Cfg, q_sbin: &[usize], k_sbin: &[usize], one: usize, reads: &[usize], offset: usize) -> HeadB {
    let (q, kk) = match_qk(cfg, q_sbin, k_sbin, one);
    HeadB { q, k: kk, v: reads.iter().map(|&c| vec![w(c, cfg.one())]).collect(), offset }
}

/// Hard attention to the unique position with `flag = 1`.
pub fn flag_head(cfg: Cfg, flag: usize, one: usize, reads: &[usize], offset: usize) -> HeadB {
    HeadB {
        q: vec![vec![w(one, cfg.bf())], vec![w(one, cfg.bf())]],
        k: vec![vec![w(flag, cfg.one())], vec![w(one, cfg.neg(cfg.one()))]],
        v: reads.iter().map(|&c| vec![w(c, cfg.one())]).collect(),
        offset,
    }
}

/// Make every head of `layer` give zero weight to keys with `marker = 1`.
pub fn wrap_ignore(cfg: Cfg, layer: &LayerB, marker: usize, one: usize) -> LayerB {
    let mut out = layer.clone();
    for h in &mut out.heads {
        for _ in 0..2 {
            h.q.push(vec![w(one, cfg.neg_bf())]);
            h.k.push(vec![w(marker, cfg.one())]);
        }
    }
    out
}

/// Restrict every head of `layer` to keys whose `R` (signed binary at
/// `rk`) equals the query's `R` (at `rq`). When `exp(-B_F/2)` underflows
/// (from `p = 3` on) each pair subtracts before it adds back, which keeps
/// every score exact up to weight zero. Below that the pair adds first,
/// and the original scores must stay at most `B_F - B_F/2`.
pub fn wrap_focus(cfg: Cfg, layer: &LayerB, rq: &[usize], rk: &[usize], one: usize) -> LayerB {
    assert_eq!(rq.len(), rk.len());
    let half = cfg.div(cfg.bf(), cfg.int(2)).expect("nonzero divisor");
    let sub_first = cfg.exp(cfg.neg(half)).is_zero();
    let mut out = layer.clone();
    for h in &mut out.heads {
        for _ in 0..2 {
            for (&a, &b) in rq.iter().zip(rk) {
                let pair = [(vec![w(a, half)], vec![w(b, cfg.one())]), (vec![w(one, half)], vec![w(one, cfg.neg(cfg.one()))])];
                let order = if sub_first { [1, 0] } else { [0, 1] };
                for i in order {
                    h.q.push(pair[i].0.clone());
                    h.k.push(pair[i].1.clone());
                }
            }
        }
    }
    out
}

/// Give queries with `flag = 1` a key they always see: position-1 keys
/// (`first = 1`) get their score pushed to `B_F`, so the softmax never
/// comes out empty. Scores of queries with `flag = 0` are unchanged.
/// Append after any ignore or focus wrapping.
pub fn wrap_escape(cfg: Cfg, layer: &LayerB, flag: usize, first: usize) -> LayerB {
    let mut out = layer.clone();
    for h in &mut out.heads {
        for _ in 0..2 {
            h.q.push(vec![w(flag, cfg.bf())]);
            h.k.push(vec![w(first, cfg.one())]);
        }
    }
    out
}

// -------------------------------------------------------------------- MLPs

/// `dst += wt * src` for each move, exact for any signed grid input.
/// Hidden units are interleaved per move so each destination folds its
/// sources in the listed order.
pub fn mlp_moves(cfg: Cfg, moves: &[(usize, usize, Fx)]) -> MlpB {
    let mut m = MlpB::linear();
    let mut outs: Vec<(usize, SpVec)> = Vec::new();
    for &(src, dst, wt) in moves {
        let hp = m.unit(vec![w(src, cfg.one())], Fx::ZERO);
        let hn = m.unit(vec![w(src, cfg.neg(cfg.one()))], Fx::ZERO);
        let row = match outs.iter_mut().find(|(c, _)| *c == dst) {
            Some((_, r)) => r,
            None => {
                outs.push((dst, Vec::new()));
                &mut outs.last_mut().unwrap().1
            }
        };
        row.push(w(hp, wt));
        row.push(w(hn, cfg.neg(wt)));
    }
    for (c, r) in outs {
        m.out(c, r, Fx::ZERO);
    }
    m
}

/// Zero the given coordinates: `x += relu(-x) - relu(x)`.
pub fn mlp_clear(cfg: Cfg, coords: &[usize]) -> MlpB {
    let moves: Vec<_> = coords.iter().map(|&c| (c, c, cfg.neg(cfg.one()))).collect();
    mlp_moves(cfg, &moves)
}

/// Move `src` into `dst` (adding) and zero `src`.
pub fn mlp_move_clear(cfg: Cfg, pairs: &[(usize, usize)]) -> MlpB {
    let mut moves = Vec::new();
    for &(s, d) in pairs {
        moves.push((s, d, cfg.one()));
        moves.push((s, s, cfg.neg(cfg.one())));
    }
    mlp_moves(cfg, &moves)
}

/// `out_d = 1` iff `x_d` is the unique maximum (ties give several ones).
/// With `lowest`, ties resolve to the lowest index instead.
pub fn argmax_mlp(cfg: Cfg, x: &[usize], out: &[usize], lowest: bool) -> MlpB {
    let mut m = MlpB { out_relu: true, ..Default::default() };
    for (d, &xd) in x.iter().enumerate() {
        let mut row = Vec::new();
        for (j, &xj) in x.iter().enumerate() {
            if j == d {
                continue;
            }
            let b = if lowest && j < d { cfg.eps() } else { Fx::ZERO };
            let mut ws = vec![w(xj, cfg.one()), w(xd, cfg.neg(cfg.one()))];
            ws.sort_by_key(|e| e.0);
            let u = m.unit(ws, b);
            row.push(w(u, cfg.neg_bf()));
        }
        m.out(out[d], row, cfg.one());
    }
    m
}

/// `out += <1, relu(x - (1 - e))>`, i.e. `x_d` for a unit vector `e = e_d`
/// and binary `x`.
pub fn projection_mlp(cfg: Cfg, x: &[usize], e: &[usize], out: usize) -> MlpB {
    let mut m = MlpB::linear();
    let mut row = Vec::new();
    for (&xi, &ei) in x.iter().zip(e) {
        let mut ws = vec![w(xi, cfg.one()), w(ei, cfg.one())];
        ws.sort_by_key(|e| e.0);
        row.push(w(m.unit(ws, cfg.neg(cfg.one())), cfg.one()));
    }
    m.out(out, row, Fx::ZERO);
    m
}

/// `out += relu(sum x - (|x| - 1))`: AND of binary inputs.
pub fn and_unit(cfg: Cfg, m: &mut MlpB, x: &[usize]) -> usize {
    let mut ws: SpVec = x.iter().map(|&c| w(c, cfg.one())).collect();
    ws.sort_by_key(|e| e.0);
    m.unit(ws, cfg.int(1 - x.len() as i64))
}

/// Binary `a` (0/1 per bit) to signed binary in `out`.
pub fn sbin_mlp(cfg: Cfg, a: &[usize], out: &[usize]) -> MlpB {
    let mut m = MlpB::linear();
    for (&ai, &oi) in a.iter().zip(out) {
        let u = m.unit(vec![w(ai, cfg.one())], Fx::ZERO);
        m.out(oi, vec![w(u, cfg.int(2))], cfg.neg(cfg.one()));
    }
    m
}

/// Ripple-carry `a + b` (or `a - b` modulo `2^w`), one MLP sub-layer per
/// bit, least significant first. Bits are most significant first.
/// `out` has `w` bits, or `w + 1` for an addition keeping the carry.
/// `carry` is a scratch coordinate left at zero afterwards. With `signed`,
/// the sum bits are written as -1/+1.
pub fn addsub_mlps(cfg: Cfg, a: &[usize], b: &[usize], out: &[usize], carry: usize, sub: bool, signed: bool) -> Result<Vec<MlpB>> {
    let wd = a.len();
    if b.len() != wd || wd == 0 {
        return Err(Error::Shape("adder operands differ in width".into()));
    }
    let keep_carry = out.len() == wd + 1;
    if !(out.len() == wd || keep_carry && !sub) {
        return Err(Error::Overflow(format!("adder of width {wd} cannot write {} bits", out.len())));
    }
    let sum_out = &out[out.len() - wd..];
    let one = cfg.one();
    let mut mlps = Vec::new();
    for i in (0..wd).rev() {
        let lsb = i == wd - 1;
        let mut m = MlpB::linear();
        let bw = if sub { cfg.neg(one) } else { one };
        // t = a + b' + c, where b' = 1 - b when subtracting and the
        // least significant carry-in is 1
        let base = cfg.int(if sub { 1 + lsb as i64 } else { 0 });
        let mut ws = vec![w(a[i], one), w(b[i], bw)];
        if !lsb {
            ws.push(w(carry, one));
        }
        ws.sort_by_key(|e| e.0);
        // r_k = relu(t - k); the sum bit is r0 - 2 r1 + 2 r2, spread over
        // unit-weight copies so partial folds stay within [-3, 3]
        let r = |m: &mut MlpB, k: i64| m.unit(ws.clone(), cfg.sub(base, cfg.int(k)));
        let u = [r(&mut m, 0), r(&mut m, 1), r(&mut m, 1), r(&mut m, 2), r(&mut m, 2)];
        let neg = cfg.neg(one);
        let mut srow = vec![w(u[0], one), w(u[1], neg), w(u[2], neg), w(u[3], one), w(u[4], one)];
        let mut sbias = Fx::ZERO;
        if signed {
            let v = [r(&mut m, 1), r(&mut m, 1), r(&mut m, 0), r(&mut m, 2), r(&mut m, 2)];
            srow.extend([w(v[0], neg), w(v[1], neg), w(v[2], one), w(v[3], one), w(v[4], one)]);
            sbias = neg;
        }
        let uc = if lsb { None } else { Some(m.unit(vec![w(carry, one)], Fx::ZERO)) };
        m.out(sum_out[i], srow, sbias);
        // new carry replaces the old one
        let mut crow = vec![w(u[1], one), w(u[3], neg)];
        if i == 0 {
            if keep_carry {
                m.out(out[0], crow.clone(), Fx::ZERO);
            }
            crow.clear();
        }
        if let Some(uc) = uc {
            crow.push(w(uc, neg));
        }
        if !crow.is_empty() {
            m.out(carry, crow, Fx::ZERO);
        }
        mlps.push(m);
    }
    Ok(mlps)
}

/// Left shift by `s` bits: copies `a` into the top of `out`.
pub fn shift_mlp(cfg: Cfg, a: &[usize], s: usize, out: &[usize]) -> Result<MlpB> {
    if out.len() < a.len() + s {
        return Err(Error::Overflow(format!("shifting {} bits by {s} needs {} output bits, have {}", a.len(), a.len() + s, out.len())));
    }
    let lead = out.len() - a.len() - s;
    let moves: Vec<_> = a.iter().enumerate().map(|(i, &c)| (c, out[lead + i], cfg.one())).collect();
    Ok(mlp_moves(cfg, &moves))
}

/// Two's-complement `a >= 0`.
pub fn geq0_mlp(cfg: Cfg, a: &[usize], out: usize) -> MlpB {
    let mut m = MlpB::linear();
    let u = m.unit(vec![w(a[0], cfg.neg(cfg.one()))], cfg.one());
    m.out(out, vec![w(u, cfg.one())], Fx::ZERO);
    m
}

/// `a == 0` for binary `a`.
pub fn eq0_mlp(cfg: Cfg, a: &[usize], out: usize) -> MlpB {
    let mut m = MlpB::linear();
    let u = m.unit(a.iter().map(|&c| w(c, cfg.neg(cfg.one()))).collect(), cfg.one());
    m.out(out, vec![w(u, cfg.one())], Fx::ZERO);
    m
}

/// Two's-complement positive part: `a` if `a >= 0`, else 0.
pub fn pospart_mlp(cfg: Cfg, a: &[usize], out: &[usize]) -> MlpB {
    let mut m = MlpB::linear();
    for (i, &c) in a.iter().enumerate() {
        let mut ws = vec![w(c, cfg.one())];
        if i > 0 {
            ws.push(w(a[0], cfg.neg(cfg.one())));
        } else {
            ws[0].1 = Fx::ZERO;
        }
        ws.retain(|e| !e.1.is_zero());
        ws.sort_by_key(|e| e.0);
        let u = m.unit(ws, Fx::ZERO);
        m.out(out[i], vec![w(u, cfg.one())], Fx::ZERO);
    }
    m
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Arith {
    Sbin,
    Add,
    Sub,
    Shift(usize),
    Geq0,
    Eq0,
    PosPart,
}

/// Self-contained arithmetic gadget over `width`-bit operands. Inputs are
/// `a` (and `b` for add/sub); the output slice width depends on the kind.
pub fn build_arith_mlp(cfg: Cfg, kind: Arith, width: usize) -> Result<GadgetHandle> {
    let mut d = 0;
    let mut take = |n: usize| {
        d += n;
        (d - n..d).collect::<Vec<usize>>()
    };
    let a = take(width);
    let (inputs, outputs, mlps) = match kind {
        Arith::Sbin => {
            let o = take(width);
            let m = sbin_mlp(cfg, &a, &o);
            (vec![a], vec![o], vec![m])
        }
        Arith::Add | Arith::Sub => {
            let b = take(width);
            let o = take(if kind == Arith::Add { width + 1 } else { width });
            let c = take(1)[0];
            let ms = addsub_mlps(cfg, &a, &b, &o, c, kind == Arith::Sub, false)?;
            (vec![a, b], vec![o], ms)
        }
        Arith::Shift(s) => {
            let o = take(width + s);
            let m = shift_mlp(cfg, &a, s, &o)?;
            (vec![a], vec![o], vec![m])
        }
        Arith::Geq0 => {
            let o = take(1);
            let m = geq0_mlp(cfg, &a, o[0]);
            (vec![a], vec![o], vec![m])
        }
        Arith::Eq0 => {
            let o = take(1);
            let m = eq0_mlp(cfg, &a, o[0]);
            (vec![a], vec![o], vec![m])
        }
        Arith::PosPart => {
            let o = take(width);
            let m = pospart_mlp(cfg, &a, &o);
            (vec![a], vec![o], vec![m])
        }
    };
    let depth = mlps.len();
    Ok(GadgetHandle {
        kind: format!("arith {kind:?}"),
        layers: vec![LayerB { heads: vec![], mlps, note: format!("arith {kind:?}") }],
        pe: Pe::default(),
        inputs,
        outputs,
        mlp_depth: depth,
        width: d,
    })
}

pub fn build_argmax_mlp(cfg: Cfg, dim: usize, lowest: bool) -> GadgetHandle {
    let x: Vec<usize> = (0..dim).collect();
    let o: Vec<usize> = (dim..2 * dim).collect();
    let m = argmax_mlp(cfg, &x, &o, lowest);
    GadgetHandle {
        kind: "argmax".into(),
        layers: vec![LayerB { heads: vec![], mlps: vec![m], note: "argmax".into() }],
        pe: Pe::default(),
        inputs: vec![x],
        outputs: vec![o],
        mlp_depth: 1,
        width: 2 * dim,
    }
}

pub fn build_projection_mlp(cfg: Cfg, dim: usize) -> GadgetHandle {
    let x: Vec<usize> = (0..dim).collect();
    let e: Vec<usize> = (dim..2 * dim).collect();
    let m = projection_mlp(cfg, &x, &e, 2 * dim);
    GadgetHandle {
        kind: "projection".into(),
        layers: vec![LayerB { heads: vec![], mlps: vec![m], note: "projection".into() }],
        pe: Pe::default(),
        inputs: vec![x, e],
        outputs: vec![vec![2 * dim]],
        mlp_depth: 1,
        width: 2 * dim + 1,
    }
}

// ------------------------------------------------------------ whole specs

/// Single unmasked layer; the coordinate named by the returned handle's
/// output holds `1[target occurs in w]` at every position. Output symbols
/// are `0` and `1`.
pub fn build_detector(cfg: Cfg, alphabet: &[&str], target: &str) -> Result<(TransformerSpec, GadgetHandle)> {
    let mut sb = SpecB::new(cfg, alphabet.iter().map(|s| s.to_string()).collect(), vec!["0".into(), "1".into()]);
    let t = sb.sym(target)?;
    let x = sb.alloc(1);
    sb.embed[t].push((x, cfg.one()));
    let agg = sb.alloc(1);
    let out = sb.alloc(1);
    let mut l = LayerB::new("detector");
    l.heads.push(HeadB { q: vec![vec![]], k: vec![vec![]], v: vec![vec![w(x, cfg.one())]], offset: agg });
    let mut m = MlpB::linear();
    let h1 = m.unit(vec![w(agg, cfg.bf())], Fx::ZERO);
    let h2 = m.unit(vec![w(agg, cfg.bf())], cfg.neg(cfg.one()));
    m.out(out, vec![w(h1, cfg.one()), w(h2, cfg.neg(cfg.one()))], Fx::ZERO);
    l.mlps.push(m);
    sb.layers.push(l);
    sb.out[1].push((out, cfg.one()));
    let spec = sb.finish()?;
    let h = GadgetHandle {
        kind: "detector".into(),
        layers: sb.layers.clone(),
        pe: Pe::default(),
        inputs: vec![vec![x]],
        outputs: vec![vec![out]],
        mlp_depth: 1,
        width: sb.d,
    };
    Ok((spec, h))
}

/// One layer marking the first `p` masked, eligible positions: position
/// `n` is selected iff it is masked and eligible while position `n - p`
/// is not (or does not exist). `masked` holds the mask indicator, `id`
/// holds `sbin(n)`. Returns the layer and the selection coordinate.
pub fn select_block(sb: &mut SpecB, masked: usize, one: usize, id: &[usize], p: usize, elig: Option<Cond>) -> (LayerB, usize) {
    let cfg = sb.cfg;
    let pe = p as i64;
    let back = n().sub(k(pe));
    let tgt = sb.pe_sbin(id.len(), back.clone().ge(k(1)).then(back.clone(), n()));
    let e_here = match &elig {
        Some(c) => sb.pe_ind(c.clone()),
        None => one,
    };
    let mut inner = Pe::default();
    let prev_ok = match &elig {
        Some(c) => c.clone().and(n().ge(k(1))),
        None => n().ge(k(1)),
    };
    inner.push(0, crate::tfcore::Kind::Ind(prev_ok));
    let at = sb.alloc(1);
    sb.pe.push(at, crate::tfcore::Kind::Sub { n: back, len: crate::tfcore::pe::len(), pe: inner });
    let e_prev = at;
    let m_prev = sb.alloc(1);
    let sel = sb.alloc(1);
    let mut l = LayerB::new("select block");
    l.heads.push(match_head(cfg, &tgt, id, one, &[masked], m_prev));
    // two stages: a four-way AND would sum past B_F at p = 2
    let prev = sb.alloc(1);
    let mut m = MlpB::linear();
    let a = and_unit(cfg, &mut m, &[m_prev, e_prev]);
    let c = m.unit(vec![w(m_prev, cfg.one())], Fx::ZERO);
    m.out(prev, vec![w(a, cfg.one())], Fx::ZERO);
    m.out(m_prev, vec![w(c, cfg.neg(cfg.one()))], Fx::ZERO);
    l.mlps.push(m);
    let mut m = MlpB::linear();
    let u1 = and_unit(cfg, &mut m, &[masked, e_here]);
    let u2 = and_unit(cfg, &mut m, &[masked, e_here, prev]);
    let c = m.unit(vec![w(prev, cfg.one())], Fx::ZERO);
    m.out(sel, vec![w(u1, cfg.one()), w(u2, cfg.neg(cfg.one()))], Fx::ZERO);
    m.out(prev, vec![w(c, cfg.neg(cfg.one()))], Fx::ZERO);
    l.mlps.push(m);
    (l, sel)
}

/// Planner over `alphabet` (which must contain the mask symbol) selecting
/// the next `p` masked positions. Output symbols `0`, `1`. Positions up to
/// `max_len` are addressable.
pub fn build_select_block(cfg: Cfg, alphabet: &[String], p: usize, elig: Option<Cond>, max_len: usize) -> Result<TransformerSpec> {
    let mut sb = SpecB::new(cfg, alphabet.to_vec(), vec!["0".into(), "1".into()]);
    let mk = sb.sym(MASK)?;
    let masked = sb.alloc(1);
    sb.embed[mk].push((masked, cfg.one()));
    let one = sb.pe_one();
    let id = sb.pe_sbin(bits_for(max_len), n());
    let (l, sel) = select_block(&mut sb, masked, one, &id, p, elig);
    sb.layers.push(l);
    sb.out[1].push((sel, cfg.one()));
    sb.notes.push(format!("select block p={p}"));
    sb.finish()
}

/// Looped transformer turning the pointer string `& b_1 .. b_k` (bits of
/// `n`, most significant first, `k = ceil(log2 len)`) into `bin(n)` held
/// at position `k + 1` after `k` iterations.
pub fn build_pointer_decoder(cfg: Cfg, len: usize) -> Result<(PLTSpec, GadgetHandle)> {
    let kb = pointer_bits(len);
    let mut sb = SpecB::new(cfg, vec!["&".into(), "0".into(), "1".into()], vec!["0".into(), "1".into()]);
    let bit = sb.alloc(1);
    sb.embed[2].push((bit, cfg.one()));
    let amp = sb.alloc(1);
    sb.embed[0].push((amp, cfg.one()));
    let one = sb.pe_one();
    let idb = bits_for(kb + 1);
    let id = sb.pe_sbin(idb, n());
    let prev = n().sub(k(1)).max(k(1));
    let tgt = sb.pe_sbin(idb, prev);
    let oh = sb.pe_onehot(kb, n().sub(k(2)));
    let dslot = sb.slot(kb);
    let scratch = sb.slot(kb);
    let mut l = LayerB::new("pointer step");
    l.heads.push(match_head(cfg, &tgt, &id, one, &dslot, scratch[0]));
    let mut m = MlpB::linear();
    for i in 0..kb {
        let h = m.unit(vec![w(scratch[i], cfg.one())], Fx::ZERO);
        let g = m.unit(vec![w(dslot[i], cfg.one())], Fx::ZERO);
        let b = and_unit(cfg, &mut m, &[bit, oh[i]]);
        m.out(dslot[i], vec![w(h, cfg.one()), w(g, cfg.neg(cfg.one())), w(b, cfg.one())], Fx::ZERO);
        m.out(scratch[i], vec![w(h, cfg.neg(cfg.one()))], Fx::ZERO);
    }
    l.mlps.push(m);
    sb.layers.push(l);
    sb.notes.push(format!("pointer decoder len={len}"));
    let base = sb.finish()?;
    let h = GadgetHandle {
        kind: "pointer decoder".into(),
        layers: sb.layers.clone(),
        pe: sb.pe.clone(),
        inputs: vec![vec![bit, amp]],
        outputs: vec![dslot],
        mlp_depth: 1,
        width: sb.d,
    };
    Ok((PLTSpec::looped(base, (1, 1), 0), h))
}

/// Number of pointer bits for strings of length `len`.
pub fn pointer_bits(len: usize) -> usize {
    let mut b = 0;
    while (1usize << b) < len {
        b += 1;
    }
    b.max(1)
}

/// Bits of `v` modulo `2^width`, most significant first.
pub fn to_bits(v: i64, width: usize) -> Vec<i64> {
    (0..width).map(|i| (v >> (width - 1 - i)) & 1).collect()
}

#[cfg(test)]
mod tests;
