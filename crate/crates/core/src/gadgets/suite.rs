//! Gadget guarantees as runnable checks, shared by the unit tests, the
//! `gadget-test` command and the acceptance run.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::fxp::Mat;
use crate::models::plt_run;

pub type Verdict = std::result::Result<(), String>;

macro_rules! ensure {
    ($c:expr, $($msg:tt)+) => {
        if !$c {
            return Err(format!($($msg)+));
        }
    };
}

fn fail(e: Error) -> String {
    e.to_string()
}

/// One named check at one precision.
#[derive(Clone, Debug)]
pub struct Check {
    pub name: &'static str,
    pub p: u32,
    pub verdict: Verdict,
}

type CheckFn = fn(Cfg, u64) -> Verdict;

pub const CHECKS: [(&str, CheckFn); 9] = [
    ("match-delta", |c, _| match_delta(c, 16)),
    ("ignore", |c, s| ignore_reduces(c, 100, s)),
    ("focus", |c, s| focus_splits(c, 100, s)),
    ("detector", |c, _| detector(c)),
    ("argmax", |c, _| argmax_exhaustive(c)),
    ("arith", |c, _| arith_tables(c, 4)),
    ("select-block", |c, _| select_block_pattern(c)),
    ("pointer-decoder", |c, _| pointer_decoder(c, 8)),
    ("projection", |c, _| projection(c)),
];

/// Every check at every precision in `ps`.
pub fn run_suite(ps: &[u32], seed: u64) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for &p in ps {
        let c = Cfg::new(p)?;
        for (name, f) in CHECKS {
            out.push(Check { name, p, verdict: f(c, seed) });
        }
    }
    Ok(out)
}

/// `exp(<q, k>)` of the position-matching vectors is the Kronecker delta.
pub fn match_delta(c: Cfg, max_n: usize) -> Verdict {
    let bits = bits_for(max_n);
    for t in 1..=max_n {
        for id in 1..=max_n {
            let (q, kk) = pe_match_qk(c, t, id, bits);
            let s = c.inner(&q, &kk).map_err(fail)?;
            let want = if t == id { c.one() } else { Fx::ZERO };
            ensure!(c.exp(s) == want, "n={t} n'={id}: weight {}", c.show(c.exp(s)));
        }
    }
    Ok(())
}

/// Random layer over coordinates `0..content` with small weights.
pub(crate) fn random_layer(rng: &mut ChaCha8Rng, c: Cfg, content: usize) -> LayerB {
    let small = |rng: &mut ChaCha8Rng| c.from_raw(rng.gen_range(-(c.scale() / 2)..=c.scale() / 2));
    let sp = |rng: &mut ChaCha8Rng| -> SpVec {
        let mut v = Vec::new();
        for i in 0..content {
            if rng.gen_bool(0.6) {
                v.push((i, small(rng)));
            }
        }
        v
    };
    let mut l = LayerB::new("random");
    let h1 = HeadB { q: vec![sp(rng), sp(rng)], k: vec![sp(rng), sp(rng)], v: vec![sp(rng), sp(rng)], offset: 0 };
    let h2 = HeadB { q: vec![sp(rng)], k: vec![sp(rng)], v: vec![sp(rng)], offset: 2 };
    l.heads = vec![h1, h2];
    let mut m = MlpB { out_relu: rng.gen_bool(0.5), ..Default::default() };
    for _ in 0..3 {
        let wv = sp(rng);
        let b = small(rng);
        m.unit(wv, b);
    }
    for o in 0..content {
        let row = (0..3).map(|j| (j, small(rng))).collect();
        m.out(o, row, Fx::ZERO);
    }
    l.mlps.push(m);
    l
}

pub(crate) fn run_layer(c: Cfg, l: &LayerB, h: &Mat) -> Result<Mat> {
    let mut spec = TransformerSpec::blank(c, &["a"], &["a"], h.cols);
    spec.layers.push(l.finish(h.cols)?);
    let mut out = h.clone();
    spec.prepare()?.layer(0, &mut out, None)?;
    Ok(out)
}

pub(crate) fn rows(h: &Mat, keep: &[usize]) -> Mat {
    Mat::from_rows(keep.iter().map(|&r| h.row(r).to_vec()).collect()).unwrap()
}

pub(crate) fn random_residual(rng: &mut ChaCha8Rng, c: Cfg, n: usize, d: usize, content: usize) -> Mat {
    let mut h = Mat::zeros(n, d);
    for r in 0..n {
        for j in 0..content {
            h.set(r, j, c.from_raw(rng.gen_range(-c.scale()..=c.scale())));
        }
    }
    h
}

/// Ignoring one marked position equals running on the sequence without
/// it; no marks is the identity; the marked row's content is invisible.
pub fn ignore_reduces(c: Cfg, trials: usize, seed: u64) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let content = 4;
    let (marker, one, d) = (content, content + 1, content + 2);
    for trial in 0..trials {
        let l = random_layer(&mut rng, c, content);
        let wl = wrap_ignore(c, &l, marker, one);
        let n = rng.gen_range(2..=5);
        let mut h = random_residual(&mut rng, c, n, d, content);
        for r in 0..n {
            h.set(r, one, c.one());
        }
        ensure!(run_layer(c, &wl, &h).map_err(fail)? == run_layer(c, &l, &h).map_err(fail)?, "trial {trial}: unmarked run differs");
        let mk = rng.gen_range(0..n);
        h.set(mk, marker, c.one());
        let keep: Vec<usize> = (0..n).filter(|&r| r != mk).collect();
        let got = run_layer(c, &wl, &h).map_err(fail)?;
        let want = run_layer(c, &l, &rows(&h, &keep)).map_err(fail)?;
        ensure!(rows(&got, &keep) == want, "trial {trial}: differs from the reduced sequence");
        let mut h2 = h.clone();
        for j in 0..content {
            h2.set(mk, j, c.from_raw(rng.gen_range(-c.scale()..=c.scale())));
        }
        ensure!(rows(&run_layer(c, &wl, &h2).map_err(fail)?, &keep) == want, "trial {trial}: marked content leaks");
    }
    Ok(())
}

/// Focusing on a two-block index equals running each block alone; a
/// constant index is the identity.
pub fn focus_splits(c: Cfg, trials: usize, seed: u64) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let content = 4;
    let (r0, one, d) = (content, content + 2, content + 3);
    let rsl = [r0, r0 + 1];
    for trial in 0..trials {
        let l = random_layer(&mut rng, c, content);
        let wl = wrap_focus(c, &l, &rsl, &rsl, one);
        let n = 4;
        let mut h = random_residual(&mut rng, c, n, d, content);
        for r in 0..n {
            h.set(r, one, c.one());
            let blk = r / 2;
            h.set(r, r0, c.neg(c.one()));
            h.set(r, r0 + 1, if blk == 1 { c.one() } else { c.neg(c.one()) });
        }
        let got = run_layer(c, &wl, &h).map_err(fail)?;
        for blk in [vec![0, 1], vec![2, 3]] {
            let want = run_layer(c, &l, &rows(&h, &blk)).map_err(fail)?;
            ensure!(rows(&got, &blk) == want, "trial {trial}: block {blk:?} differs");
        }
        let mut hc = h.clone();
        for r in 0..n {
            hc.set(r, r0 + 1, c.neg(c.one()));
        }
        ensure!(run_layer(c, &wl, &hc).map_err(fail)? == run_layer(c, &l, &hc).map_err(fail)?, "trial {trial}: constant index differs");
    }
    Ok(())
}

/// `aa -> 0`, `ab -> 1`, and one occurrence in `2^{2p} + 5` symbols (the
/// softmax denominator clamps) still reads 1.
pub fn detector(c: Cfg) -> Verdict {
    let (spec, h) = build_detector(c, &["a", "b"], "b").map_err(fail)?;
    let out = h.outputs[0][0];
    let at = |w: &[&str], i: usize| -> Result<Fx> { Ok(spec.forward(&spec.encode(w)?, None)?.h.get(i, out)) };
    ensure!(at(&["a", "a"], 1).map_err(fail)? == Fx::ZERO, "aa detected");
    ensure!(at(&["a", "b"], 1).map_err(fail)? == c.one(), "ab missed");
    let n = (1usize << (2 * c.p)) + 5;
    let mut w = vec!["a"; n];
    w[n / 3] = "b";
    ensure!(at(&w, n - 1).map_err(fail)? == c.one(), "single occurrence in {n} symbols missed");
    let sym = spec.next_symbol(&spec.encode(&w).map_err(fail)?).map_err(fail)?;
    ensure!(spec.outputs[sym] == "1", "decoded {}", spec.outputs[sym]);
    Ok(())
}

/// Argmax over every pair of grid values, in both tie conventions.
pub fn argmax_exhaustive(c: Cfg) -> Verdict {
    let g = build_argmax_mlp(c, 2, false);
    let gl = build_argmax_mlp(c, 2, true);
    let (one, zero) = (c.one(), Fx::ZERO);
    for x in c.grid() {
        for y in c.grid() {
            let out = &g.eval_mlp(c, &[&[x, y]]).map_err(fail)?[0];
            let low = &gl.eval_mlp(c, &[&[x, y]]).map_err(fail)?[0];
            let want = if x > y {
                vec![one, zero]
            } else if y > x {
                vec![zero, one]
            } else {
                vec![one, one]
            };
            ensure!(out == &want, "({}, {})", c.show(x), c.show(y));
            let want_low = if y > x { vec![zero, one] } else { vec![one, zero] };
            ensure!(low == &want_low, "lowest tie at ({}, {})", c.show(x), c.show(y));
        }
    }
    Ok(())
}

pub(crate) fn bits(c: Cfg, v: i64, w: usize) -> Vec<Fx> {
    to_bits(v, w).into_iter().map(|b| c.int(b)).collect()
}

/// Truth tables of the binary arithmetic MLPs at `width` bits.
pub fn arith_tables(c: Cfg, width: usize) -> Verdict {
    let top = 1i64 << width;
    let add = build_arith_mlp(c, Arith::Add, width).map_err(fail)?;
    let sub = build_arith_mlp(c, Arith::Sub, width).map_err(fail)?;
    for a in 0..top {
        for b in 0..top {
            let x = [bits(c, a, width), bits(c, b, width)];
            ensure!(add.eval_mlp(c, &[&x[0], &x[1]]).map_err(fail)?[0] == bits(c, a + b, width + 1), "add {a} {b}");
            ensure!(sub.eval_mlp(c, &[&x[0], &x[1]]).map_err(fail)?[0] == bits(c, a - b, width), "sub {a} {b}");
        }
    }
    let sb = build_arith_mlp(c, Arith::Sbin, width).map_err(fail)?;
    let sh = build_arith_mlp(c, Arith::Shift(2), width).map_err(fail)?;
    let ge = build_arith_mlp(c, Arith::Geq0, width).map_err(fail)?;
    let eq = build_arith_mlp(c, Arith::Eq0, width).map_err(fail)?;
    let pp = build_arith_mlp(c, Arith::PosPart, width).map_err(fail)?;
    for a in -(top / 2)..top / 2 {
        let x = bits(c, a, width);
        let sbin: Vec<Fx> = to_bits(a, width).into_iter().map(|b| c.int(2 * b - 1)).collect();
        ensure!(sb.eval_mlp(c, &[&x]).map_err(fail)?[0] == sbin, "sbin {a}");
        ensure!(sh.eval_mlp(c, &[&x]).map_err(fail)?[0] == bits(c, a.rem_euclid(top) << 2, width + 2), "shift {a}");
        ensure!(ge.eval_mlp(c, &[&x]).map_err(fail)?[0] == vec![c.int((a >= 0) as i64)], "geq0 {a}");
        ensure!(eq.eval_mlp(c, &[&x]).map_err(fail)?[0] == vec![c.int((a == 0) as i64)], "eq0 {a}");
        ensure!(pp.eval_mlp(c, &[&x]).map_err(fail)?[0] == bits(c, a.max(0), width), "pospart {a}");
    }
    Ok(())
}

/// Block selection on the first masked cells, after a filled block, and
/// with an eligibility bound.
pub fn select_block_pattern(c: Cfg) -> Verdict {
    let alpha: Vec<String> = ["a", "b", "x", MASK].iter().map(|s| s.to_string()).collect();
    let spec = build_select_block(c, &alpha, 2, None, 16).map_err(fail)?;
    let prep = spec.prepare().map_err(fail)?;
    let sel = |w: &[&str]| -> Result<Vec<usize>> { Ok(prep.decode(&prep.forward(&spec.encode(w)?, None)?)) };
    let m = MASK;
    let cases: [(&[&str], Vec<usize>); 4] = [
        (&["a", "b", m, m, m, m], vec![0, 0, 1, 1, 0, 0]),
        (&["a", "b", "x", "x", m, m], vec![0, 0, 0, 0, 1, 1]),
        (&["a", "b", "x", "x", "x", m], vec![0, 0, 0, 0, 0, 1]),
        (&["a", "b", "x", "x", "x", "x"], vec![0; 6]),
    ];
    for (w, want) in cases {
        let got = sel(w).map_err(fail)?;
        ensure!(got == want, "{w:?}: {got:?}");
    }
    let spec = build_select_block(c, &alpha, 1, Some(n().ge(k(4))), 16).map_err(fail)?;
    let prep = spec.prepare().map_err(fail)?;
    let got = prep.decode(&prep.forward(&spec.encode(&["a", m, m, m, m]).map_err(fail)?, None).map_err(fail)?);
    ensure!(got == vec![0, 0, 0, 1, 0], "eligible from 4: {got:?}");
    Ok(())
}

/// `& bits(v)` decodes to `bin(v)` for every `v < len`.
pub fn pointer_decoder(c: Cfg, len: usize) -> Verdict {
    let (plt, h) = build_pointer_decoder(c, len).map_err(fail)?;
    let kb = pointer_bits(len);
    for v in 0..len as i64 {
        let mut w = vec!["&"];
        w.extend(to_bits(v, kb).into_iter().map(|b| if b == 1 { "1" } else { "0" }));
        let (st, _) = plt_run(&plt, &w, kb, None).map_err(fail)?;
        let got: Vec<Fx> = h.outputs[0].iter().map(|&j| st.h.get(kb, j)).collect();
        ensure!(got == bits(c, v, kb), "n={v}");
    }
    Ok(())
}

/// `x_d` picked out by a one-hot `e_d`, for every binary `x` of width 3.
pub fn projection(c: Cfg) -> Verdict {
    let g = build_projection_mlp(c, 3);
    for b in 0..8 {
        let x: Vec<Fx> = (0..3).map(|i| c.int((b >> i) & 1)).collect();
        for d in 0..3 {
            let e: Vec<Fx> = (0..3).map(|i| if i == d { c.one() } else { Fx::ZERO }).collect();
            ensure!(g.eval_mlp(c, &[&x, &e]).map_err(fail)?[0][0] == x[d], "x={b:03b} d={d}");
        }
    }
    Ok(())
}
