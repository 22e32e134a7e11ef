use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::pe::{len, n};
use super::*;

fn cfg(p: u32) -> Cfg {
    Cfg::new(p).unwrap()
}

fn random_mat(rng: &mut ChaCha8Rng, cfg: Cfg, rows: usize, cols: usize, lim: i64) -> Mat {
    let mut m = Mat::zeros(rows, cols);
    for x in m.data.iter_mut() {
        if rng.gen_bool(0.5) {
            *x = cfg.from_raw(rng.gen_range(-lim..=lim));
        }
    }
    m
}

fn random_spec(rng: &mut ChaCha8Rng, c: Cfg, mask: MaskMode) -> TransformerSpec {
    let d = 6;
    let mut s = TransformerSpec::blank(c, &["a", "b", "c"], &["a", "b", "c"], d);
    s.mask = mask;
    s.embed = random_mat(rng, c, d, 3, c.scale());
    s.pe.push(0, Kind::Bin { bits: 3, e: n() });
    s.pe.push(3, Kind::Ind(n().eq(len())));
    let lim = c.scale();
    for _ in 0..2 {
        let heads = vec![
            Head { wq: random_mat(rng, c, 2, d, lim), wk: random_mat(rng, c, 2, d, lim), wv: random_mat(rng, c, 3, d, lim), offset: 0 },
            Head { wq: random_mat(rng, c, 1, d, lim), wk: random_mat(rng, c, 1, d, lim), wv: random_mat(rng, c, 2, d, lim), offset: 4 },
        ];
        let mut mlp = Mlp::zero(d, 4);
        mlp.w1 = random_mat(rng, c, 4, d, lim);
        mlp.w2 = random_mat(rng, c, d, 4, lim);
        mlp.b1 = random_mat(rng, c, 1, 4, lim).data;
        mlp.out_relu = rng.gen_bool(0.5);
        s.layers.push(Layer { heads, mlps: vec![mlp], note: String::new() });
    }
    s.out = random_mat(rng, c, 3, d, lim);
    s
}

#[test]
fn zero_weights_give_embedding_plus_pe() {
    let c = cfg(4);
    let mut s = TransformerSpec::blank(c, &["a", "b"], &["a", "b"], 5);
    s.embed.set(0, 0, c.one());
    s.embed.set(1, 1, c.int(2));
    s.pe.push(2, Kind::Bin { bits: 3, e: n() });
    let mut l = Layer::empty("zero");
    l.heads.push(Head { wq: Mat::zeros(1, 5), wk: Mat::zeros(1, 5), wv: Mat::zeros(5, 5), offset: 0 });
    l.mlps.push(Mlp::zero(5, 3));
    s.layers.push(l);
    let toks = s.encode(&["a", "b", "b"]).unwrap();
    let st = s.forward(&toks, None).unwrap();
    let h0 = s.prepare().unwrap().embed(&toks, None).unwrap();
    assert_eq!(st.h, h0);
    assert_eq!(st.h.row(1), &[Fx::ZERO, c.int(2), Fx::ZERO, c.one(), Fx::ZERO][..]);
}

#[test]
fn causal_query_ignores_later_keys() {
    // one head, position 1 may only see itself: its update is its own value
    let c = cfg(4);
    let mut s = TransformerSpec::blank(c, &["a", "b"], &["a", "b"], 2);
    s.mask = MaskMode::Causal;
    s.embed.set(0, 1, c.one());
    let mut wv = Mat::zeros(1, 2);
    wv.set(0, 0, c.one());
    s.layers.push(Layer {
        heads: vec![Head { wq: Mat::zeros(1, 2), wk: Mat::zeros(1, 2), wv, offset: 1 }],
        mlps: vec![],
        note: String::new(),
    });
    let toks = s.encode(&["a", "b", "b"]).unwrap();
    let st = s.forward(&toks, None).unwrap();
    assert_eq!(st.h.get(0, 1), Fx::ZERO);
    assert_eq!(st.h.get(1, 1), c.ratio(1, 2));
    let toks = s.encode(&["b", "a"]).unwrap();
    let st = s.forward(&toks, None).unwrap();
    assert_eq!(st.h.get(0, 1), c.one());
    assert_eq!(st.h.get(1, 1), c.ratio(1, 2));
}

#[test]
fn causal_masking_sound_under_perturbation() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for trial in 0..40 {
        let s = random_spec(&mut rng, cfg(4), MaskMode::Causal);
        let len = 1 + trial % 6;
        let toks: Vec<usize> = (0..len).map(|_| rng.gen_range(0..3)).collect();
        let Ok(base) = s.forward(&toks, None) else { continue };
        for j in 0..len {
            for t in 0..3 {
                let mut alt = toks.clone();
                alt[j] = t;
                let st = s.forward(&alt, None).unwrap();
                for i in 0..j {
                    assert_eq!(st.h.row(i), base.h.row(i), "trial {trial}: pos {i} changed by pos {j}");
                }
            }
        }
    }
}

#[test]
fn unmasked_identical_tokens_give_identical_rows() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut s = random_spec(&mut rng, cfg(4), MaskMode::Unmasked);
    s.pe = Pe::default();
    let st = s.forward(&[1, 1, 1, 1], None).unwrap();
    for i in 1..4 {
        assert_eq!(st.h.row(i), st.h.row(0));
    }
    assert_eq!(st.h.rows, 4);
}

#[test]
fn decode_and_next_symbol() {
    let c = cfg(3);
    let mut s = TransformerSpec::blank(c, &["x", "y"], &["x", "y", "z"], 1);
    s.pe.push(0, Kind::Const(c.one()));
    s.out.set(2, 0, c.one());
    let st = s.forward(&[0, 1, 0], None).unwrap();
    assert_eq!(decode(&st, &s.out, c).unwrap(), vec![2, 2, 2]);
    assert_eq!(s.next_symbol(&[1]).unwrap(), 2);
    // exact tie between x and y
    s.out = Mat::zeros(3, 1);
    s.out.set(0, 0, c.one());
    s.out.set(1, 0, c.one());
    assert_eq!(s.next_symbol(&[0, 0]).unwrap(), 0);
    assert_eq!(argmax(&[c.one(), c.int(2), c.int(2)]), 1);
}

#[test]
fn infill_examples() {
    let c = cfg(2);
    let mut s = TransformerSpec::blank(c, &["a", "b", MASK], &["a", "b", MASK], 1);
    s.pe.push(0, Kind::Const(c.one()));
    let (keep, dist) = s.infill_dist(&[0, 2], 1).unwrap();
    assert_eq!(keep, vec![0, 1]);
    assert_eq!(dist, vec![c.ratio(1, 2), c.ratio(1, 2)]);
    s.out.set(1, 0, c.neg_bf());
    let (_, dist) = s.infill_dist(&[2, 2], 0).unwrap();
    assert_eq!(dist, vec![c.one(), Fx::ZERO]);
    assert!(matches!(s.infill_dist(&[0, 2], 0), Err(Error::NotMasked(1))));
}

#[test]
fn gumbel_examples() {
    let c = cfg(8);
    let lg = [c.bf(), c.neg_bf()];
    assert_eq!(gumbel_sample(c, &lg, &[Fx::ZERO, Fx::ZERO]).unwrap(), 0);
    let lg = [c.ratio(1, 4), c.int(1), c.int(1)];
    assert_eq!(gumbel_sample(c, &lg, &[Fx::ZERO; 3]).unwrap(), 1);
    assert!(gumbel_sample(c, &lg, &[Fx::ZERO; 2]).is_err());
}

#[test]
fn gumbel_frequencies_track_softmax() {
    let c = cfg(8);
    let lg = [c.ratio(1, 2), Fx::ZERO, c.ratio(-1, 4), c.ratio(3, 4)];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let draws = 100_000;
    let mut counts = [0usize; 4];
    for _ in 0..draws {
        let z: Vec<Fx> = (0..4).map(|_| gumbel_from_uniform(c, rng.gen::<f64>())).collect();
        counts[gumbel_sample(c, &lg, &z).unwrap()] += 1;
    }
    let ex: Vec<f64> = lg.iter().map(|x| c.to_f64(*x).exp()).collect();
    let tot: f64 = ex.iter().sum();
    let tv: f64 = (0..4).map(|i| (counts[i] as f64 / draws as f64 - ex[i] / tot).abs()).sum::<f64>() / 2.0;
    assert!(tv < 0.02, "total variation {tv}");
}

#[test]
fn masked_columns_do_not_change_decoding() {
    // appending a key whose score is -B_F against every query leaves results unchanged
    let c = cfg(4);
    let mut s = TransformerSpec::blank(c, &["a", "b", "z"], &["a", "b"], 4);
    s.embed.set(0, 0, c.one());
    s.embed.set(1, 1, c.one());
    s.embed.set(2, 2, c.one());
    s.pe.push(3, Kind::Const(c.one()));
    let mut wq = Mat::zeros(1, 4);
    wq.set(0, 3, c.neg_bf());
    let mut wk = Mat::zeros(1, 4);
    wk.set(0, 2, c.one());
    let mut wv = Mat::zeros(2, 4);
    wv.set(0, 0, c.one());
    wv.set(1, 1, c.one());
    s.layers.push(Layer { heads: vec![Head { wq, wk, wv, offset: 0 }], mlps: vec![], note: String::new() });
    s.out.set(0, 0, c.one());
    s.out.set(1, 1, c.one());
    let p = s.prepare().unwrap();
    let a = p.forward(&[0, 1, 1], None).unwrap();
    let b = p.forward(&[0, 1, 1, 2], None).unwrap();
    assert_eq!(p.decode(&a), p.decode(&b)[..3].to_vec());
}

#[test]
fn fixed_len_and_noise_shape_checked() {
    let c = cfg(3);
    let mut s = TransformerSpec::blank(c, &["a"], &["a"], 2);
    s.fixed_len = Some(2);
    assert!(s.forward(&[0], None).is_err());
    assert!(s.forward(&[0, 0], Some(&Mat::zeros(2, 1))).is_err());
    let mut z = Mat::zeros(2, 2);
    z.set(1, 0, c.one());
    let st = s.forward(&[0, 0], Some(&z)).unwrap();
    assert_eq!(st.h.get(1, 0), c.one());
    assert!(matches!(s.forward(&[3, 0], None), Err(Error::UnknownSymbol(_))));
}

#[test]
fn validate_rejects_overlapping_heads() {
    let c = cfg(3);
    let mut s = TransformerSpec::blank(c, &["a"], &["a"], 3);
    let h = Head { wq: Mat::zeros(1, 3), wk: Mat::zeros(1, 3), wv: Mat::zeros(2, 3), offset: 0 };
    let mut h2 = h.clone();
    h2.offset = 1;
    s.layers.push(Layer { heads: vec![h, h2], mlps: vec![], note: String::new() });
    assert!(matches!(s.validate(), Err(Error::Spec(_))));
}

#[test]
fn text_round_trip_with_sub_pe() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut s = random_spec(&mut rng, cfg(5), MaskMode::Causal);
    let mut inner = Pe::default();
    inner.push(0, Kind::SBin { bits: 1, e: n().rem(k(2)) });
    s.pe.push(4, Kind::Sub { n: n().sub(k(1)).pos(), len: len(), pe: inner });
    s.pe.push(5, Kind::OneHot { size: 1, e: k(0) });
    s.fixed_len = Some(4);
    s.notes.push("random".into());
    s.layers[0].note = "first layer".into();
    let txt = text::write(&s);
    let back = text::read(&txt).unwrap();
    assert_eq!(back, s);
    assert_eq!(text::write(&back), txt);
}

#[test]
fn text_reports_line_of_error() {
    let c = cfg(3);
    let s = TransformerSpec::blank(c, &["a"], &["a"], 1);
    let txt = text::write(&s).replace("WIDTH 1", "WIDTH x");
    match text::read(&txt) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
    let bad = text::write(&s).replace("OUT\n-", "OUT\n0:99");
    assert!(text::read(&bad).is_err());
}

use super::pe::k;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn text_round_trip_random(seed in any::<u64>(), p in 2u32..=8, causal in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_spec(&mut rng, cfg(p), if causal { MaskMode::Causal } else { MaskMode::Unmasked });
        let back = text::read(&text::write(&s)).unwrap();
        prop_assert_eq!(back, s);
    }

    #[test]
    fn forward_is_deterministic_and_on_grid(seed in any::<u64>(), len in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = cfg(4);
        let s = random_spec(&mut rng, c, MaskMode::Unmasked);
        let toks: Vec<usize> = (0..len).map(|_| rng.gen_range(0..3)).collect();
        if let Ok(a) = s.forward(&toks, None) {
            let b = s.forward(&toks, None).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert_eq!(a.h.rows, len);
            prop_assert!(a.h.data.iter().all(|x| x.raw().abs() <= c.max_raw()));
        }
    }
}
