use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::suite::{bits, random_layer, random_residual, run_layer};
use super::*;
use crate::fxp::Mat;
use crate::models::plt_run;
use crate::tfcore::Layer;

fn cfg(p: u32) -> Cfg {
    Cfg::new(p).unwrap()
}

#[test]
fn match_weights_are_kronecker_delta() {
    for p in [2, 4] {
        let c = cfg(p);
        let bits = bits_for(16);
        for t in 1..=16 {
            for id in 1..=16 {
                let (q, kk) = pe_match_qk(c, t, id, bits);
                let s = c.inner(&q, &kk).unwrap();
                let want = if t == id { c.one() } else { Fx::ZERO };
                assert_eq!(c.exp(s), want, "p={p} n={t} n'={id}");
            }
        }
    }
    let c = cfg(2);
    let (q, kk) = pe_match_qk(c, 3, 3, 2);
    assert_eq!(c.inner(&q, &kk).unwrap(), Fx::ZERO);
    let (q, kk) = pe_match_qk(c, 3, 2, 2);
    assert_eq!(c.inner(&q, &kk).unwrap(), c.neg_bf());
}

#[test]
fn ignore_matches_reduced_sequence() {
    suite::ignore_reduces(cfg(3), 100, 1).unwrap();
    suite::ignore_reduces(cfg(2), 30, 5).unwrap();
}

#[test]
fn nested_ignores_equal_union_marker() {
    let c = cfg(3);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let content = 4;
    let (m1, m2, mu, one, d) = (4, 5, 6, 7, 8);
    for _ in 0..50 {
        let l = random_layer(&mut rng, c, content);
        let twice = wrap_ignore(c, &wrap_ignore(c, &l, m1, one), m2, one);
        let union = wrap_ignore(c, &l, mu, one);
        let n = 5;
        let mut h = random_residual(&mut rng, c, n, d, content);
        for r in 0..n {
            h.set(r, one, c.one());
        }
        h.set(1, m1, c.one());
        h.set(1, mu, c.one());
        h.set(3, m2, c.one());
        h.set(3, mu, c.one());
        let a = run_layer(c, &twice, &h).unwrap();
        let b = run_layer(c, &union, &h).unwrap();
        for r in [0, 2, 4] {
            assert_eq!(a.row(r)[..content], b.row(r)[..content]);
        }
    }
}

#[test]
fn focus_matches_each_block() {
    suite::focus_splits(cfg(3), 100, 3).unwrap();
}

#[test]
fn focus_scores_saturate() {
    // a mismatching focus pair drives any admissible score to -B_F
    let c = cfg(3);
    let half = c.div(c.bf(), c.int(2)).unwrap();
    for s in c.grid().filter(|&s| s <= c.sub(c.bf(), half)) {
        let q = [c.one(), half, half, half, half];
        let k = [s, c.neg(c.one()), c.neg(c.one()), c.neg(c.one()), c.neg(c.one())];
        assert_eq!(c.inner(&q, &k).unwrap(), c.neg_bf());
        let k = [s, c.one(), c.neg(c.one()), c.one(), c.neg(c.one())];
        assert_eq!(c.inner(&q, &k).unwrap(), s);
    }
}

#[test]
fn focus_keeps_hard_scores() {
    // from p = 3 the pair subtracts first: any score survives a match up
    // to weight, and a mismatch still zeroes it
    for p in 3..=6 {
        let c = cfg(p);
        let half = c.div(c.bf(), c.int(2)).unwrap();
        for s in c.grid() {
            let q = [c.one(), half, half, half, half];
            let k = [s, c.neg(c.one()), c.one(), c.neg(c.one()), c.one()];
            let got = c.inner(&q, &k).unwrap();
            assert_eq!(c.exp(got), c.exp(s), "p={p} s={}", c.show(s));
            let k = [s, c.neg(c.one()), c.neg(c.one()), c.neg(c.one()), c.neg(c.one())];
            assert!(c.exp(c.inner(&q, &k).unwrap()).is_zero());
        }
    }
}

#[test]
fn detector_cases() {
    let (spec, h) = build_detector(cfg(3), &["a", "b"], "b").unwrap();
    let out = h.outputs[0][0];
    let st = spec.forward(&spec.encode(&["a", "a"]).unwrap(), None).unwrap();
    assert_eq!(st.h.get(1, out), Fx::ZERO);
    let st = spec.forward(&spec.encode(&["a", "b"]).unwrap(), None).unwrap();
    assert_eq!(st.h.get(1, out), cfg(3).one());
    // clamped denominator at p=2
    let c = cfg(2);
    let (spec, h) = build_detector(c, &["a", "b"], "b").unwrap();
    let mut w = vec!["a"; 21];
    w[7] = "b";
    let st = spec.forward(&spec.encode(&w).unwrap(), None).unwrap();
    assert_eq!(st.h.get(20, h.outputs[0][0]), c.one());
    assert_eq!(spec.outputs[spec.next_symbol(&spec.encode(&w).unwrap()).unwrap()], "1");
}

#[test]
fn argmax_exhaustive_p2() {
    let c = cfg(2);
    let g = build_argmax_mlp(c, 2, false);
    let gl = build_argmax_mlp(c, 2, true);
    for x in c.grid() {
        for y in c.grid() {
            let out = &g.eval_mlp(c, &[&[x, y]]).unwrap()[0];
            let low = &gl.eval_mlp(c, &[&[x, y]]).unwrap()[0];
            let (one, zero) = (c.one(), Fx::ZERO);
            let want = if x > y {
                vec![one, zero]
            } else if y > x {
                vec![zero, one]
            } else {
                vec![one, one]
            };
            assert_eq!(out, &want, "{x} {y}");
            let want_low = if y > x { vec![zero, one] } else { vec![one, zero] };
            assert_eq!(low, &want_low);
        }
    }
    assert_eq!(g.eval_mlp(c, &[&[c.one(), c.ratio(1, 2)]]).unwrap()[0], vec![c.one(), Fx::ZERO]);
}

#[test]
fn argmax_then_decode_matches_oracle() {
    let c = cfg(4);
    let dim = 5;
    let g = build_argmax_mlp(c, dim, true);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..10_000 {
        let x: Vec<Fx> = (0..dim).map(|_| c.from_raw(rng.gen_range(-c.max_raw()..=c.max_raw()))).collect();
        let out = &g.eval_mlp(c, &[&x]).unwrap()[0];
        let mut best = 0;
        for i in 1..dim {
            if x[i] > x[best] {
                best = i;
            }
        }
        assert_eq!(crate::tfcore::argmax(out), best);
        assert_eq!(out.iter().filter(|v| !v.is_zero()).count(), 1);
    }
}

#[test]
fn projection_exhaustive() {
    suite::projection(cfg(2)).unwrap();
}

#[test]
fn arithmetic_truth_tables() {
    for p in [2, 3] {
        let c = cfg(p);
        let add = build_arith_mlp(c, Arith::Add, 4).unwrap();
        let sub = build_arith_mlp(c, Arith::Sub, 4).unwrap();
        assert_eq!(add.mlp_depth, 4);
        for a in 0..16 {
            for b in 0..16 {
                assert_eq!(add.eval_mlp(c, &[&bits(c, a, 4), &bits(c, b, 4)]).unwrap()[0], bits(c, a + b, 5));
                assert_eq!(sub.eval_mlp(c, &[&bits(c, a, 4), &bits(c, b, 4)]).unwrap()[0], bits(c, a - b, 4));
            }
        }
        let sb = build_arith_mlp(c, Arith::Sbin, 4).unwrap();
        let sh = build_arith_mlp(c, Arith::Shift(2), 4).unwrap();
        let ge = build_arith_mlp(c, Arith::Geq0, 4).unwrap();
        let eq = build_arith_mlp(c, Arith::Eq0, 4).unwrap();
        let pp = build_arith_mlp(c, Arith::PosPart, 4).unwrap();
        for a in -8..8i64 {
            let x = bits(c, a, 4);
            let sbin: Vec<Fx> = to_bits(a, 4).into_iter().map(|b| c.int(2 * b - 1)).collect();
            assert_eq!(sb.eval_mlp(c, &[&x]).unwrap()[0], sbin);
            assert_eq!(sh.eval_mlp(c, &[&x]).unwrap()[0], bits(c, a.rem_euclid(16) << 2, 6));
            assert_eq!(ge.eval_mlp(c, &[&x]).unwrap()[0], vec![c.int((a >= 0) as i64)]);
            assert_eq!(eq.eval_mlp(c, &[&x]).unwrap()[0], vec![c.int((a == 0) as i64)]);
            assert_eq!(pp.eval_mlp(c, &[&x]).unwrap()[0], bits(c, a.max(0), 4));
        }
    }
    let c = cfg(3);
    assert!(matches!(shift_mlp(c, &[0, 1], 2, &[2, 3, 4]), Err(Error::Overflow(_))));
    assert!(matches!(addsub_mlps(c, &[0, 1], &[2, 3], &[4], 5, false, false), Err(Error::Overflow(_))));
}

#[test]
fn signed_adder_output() {
    let c = cfg(2);
    let (a, b, o, cy) = ([0, 1, 2], [3, 4, 5], [6, 7, 8], 9);
    let ms = addsub_mlps(c, &a, &b, &o, cy, true, true).unwrap();
    let g = GadgetHandle {
        kind: "sub".into(),
        layers: vec![LayerB { heads: vec![], mlps: ms, note: String::new() }],
        pe: Pe::default(),
        inputs: vec![a.to_vec(), b.to_vec()],
        outputs: vec![o.to_vec(), vec![cy]],
        mlp_depth: 3,
        width: 10,
    };
    for x in 0..8 {
        for y in 0..8 {
            let out = g.eval_mlp(c, &[&bits(c, x, 3), &bits(c, y, 3)]).unwrap();
            let want: Vec<Fx> = to_bits(x - y, 3).into_iter().map(|v| c.int(2 * v - 1)).collect();
            assert_eq!(out[0], want);
            assert_eq!(out[1], vec![Fx::ZERO]);
        }
    }
}

#[test]
fn select_block_pattern() {
    suite::select_block_pattern(cfg(3)).unwrap();
}

#[test]
fn suite_passes_at_small_precisions() {
    for ch in suite::run_suite(&[2, 3], 7).unwrap() {
        assert!(ch.verdict.is_ok(), "{} p={}: {:?}", ch.name, ch.p, ch.verdict);
    }
}

#[test]
fn pointer_decoder_recovers_bits() {
    let c = cfg(3);
    let (plt, h) = build_pointer_decoder(c, 4).unwrap();
    let (st, _) = plt_run(&plt, &["&", "1", "0"], 2, None).unwrap();
    let got: Vec<Fx> = h.outputs[0].iter().map(|&j| st.h.get(2, j)).collect();
    assert_eq!(got, vec![c.one(), Fx::ZERO]);
    let (st, _) = plt_run(&plt, &["&", "0", "0"], 2, None).unwrap();
    assert!(h.outputs[0].iter().all(|&j| st.h.get(2, j).is_zero()));
    let (plt, h) = build_pointer_decoder(c, 8).unwrap();
    for v in 0..8 {
        let mut w = vec!["&"];
        w.extend(to_bits(v, 3).into_iter().map(|b| if b == 1 { "1" } else { "0" }));
        let (st, _) = plt_run(&plt, &w, 3, None).unwrap();
        let got: Vec<Fx> = h.outputs[0].iter().map(|&j| st.h.get(3, j)).collect();
        assert_eq!(got, bits(c, v, 3));
    }
}

#[test]
fn import_preserves_layer() {
    let c = cfg(3);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let l = random_layer(&mut rng, c, 4);
    let dense: Layer = l.finish(4).unwrap();
    let wide = LayerB::import(&dense, &|j| j + 3);
    let h = random_residual(&mut rng, c, 3, 4, 4);
    let mut hw = Mat::zeros(3, 9);
    for r in 0..3 {
        for j in 0..4 {
            hw.set(r, j + 3, h.get(r, j));
        }
    }
    let a = run_layer(c, &l, &h).unwrap();
    let b = run_layer(c, &wide, &hw).unwrap();
    for r in 0..3 {
        assert_eq!(a.row(r), &b.row(r)[3..7]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn moves_are_exact(x in -63i64..=63, y in -63i64..=63) {
        let c = cfg(3);
        let m = mlp_moves(c, &[(0, 2, c.one()), (1, 2, c.one()), (1, 1, c.neg(c.one()))]);
        let g = GadgetHandle {
            kind: "moves".into(),
            layers: vec![LayerB { heads: vec![], mlps: vec![m], note: String::new() }],
            pe: Pe::default(),
            inputs: vec![vec![0, 1]],
            outputs: vec![vec![1, 2]],
            mlp_depth: 1,
            width: 3,
        };
        let (a, b) = (c.from_raw(x), c.from_raw(y));
        let out = g.eval_mlp(c, &[&[a, b]]).unwrap();
        prop_assert_eq!(out[0].clone(), vec![Fx::ZERO, c.add(a, b)]);
    }
}
