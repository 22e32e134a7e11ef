use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::tfcore::pe::{k, len, n};
use crate::tfcore::{Head, Layer, Mlp};

fn rand_mat(rng: &mut ChaCha8Rng, c: Cfg, rows: usize, cols: usize) -> Mat {
    rand_mat_in(rng, c, rows, cols, c.scale())
}

fn rand_mat_in(rng: &mut ChaCha8Rng, c: Cfg, rows: usize, cols: usize, r: i64) -> Mat {
    let mut m = Mat::zeros(rows, cols);
    for row in 0..rows {
        for col in 0..cols {
            if rng.gen_bool(0.5) {
                m.set(row, col, c.from_raw(rng.gen_range(-r..=r)));
            }
        }
    }
    m
}

fn random_spec(rng: &mut ChaCha8Rng, c: Cfg) -> TransformerSpec {
    let d = 12;
    let alphabet = ["a", "b", "c"];
    let mut s = TransformerSpec::blank(c, &alphabet, &alphabet, d);
    s.embed = rand_mat(rng, c, d, 3);
    s.out = rand_mat(rng, c, 3, d);
    s.mask = if rng.gen_bool(0.5) { MaskMode::Causal } else { MaskMode::Unmasked };
    s.pe.push(6, Kind::Bin { bits: 2, e: n() });
    s.pe.push(8, Kind::SBin { bits: 2, e: len().sub(n()) });
    s.pe.push(10, Kind::Ind(n().eq(k(1))));
    s.pe.push(11, Kind::Const(c.ratio(1, 2)));
    let mut sub = Pe::default();
    sub.push(0, Kind::OneHot { size: 3, e: n().rem(k(3)) });
    s.pe.push(3, Kind::Sub { n: n().add(k(1)), len: len(), pe: sub });
    let qk = (c.scale() / 8).max(1);
    for li in 0..2 {
        let heads = vec![
            Head { wq: rand_mat_in(rng, c, 2, d, qk), wk: rand_mat_in(rng, c, 2, d, qk), wv: rand_mat(rng, c, 3, d), offset: 0 },
            Head { wq: rand_mat_in(rng, c, 1, d, qk), wk: rand_mat_in(rng, c, 1, d, qk), wv: rand_mat(rng, c, 2, d), offset: 5 },
        ];
        let mlps = (0..2)
            .map(|_| Mlp {
                w1: rand_mat(rng, c, 4, d),
                b1: (0..4).map(|_| c.from_raw(rng.gen_range(-c.scale()..=c.scale()))).collect(),
                w2: rand_mat(rng, c, d, 4),
                b2: (0..d).map(|_| c.from_raw(rng.gen_range(-c.scale()..=c.scale()))).collect(),
                out_relu: rng.gen_bool(0.5),
            })
            .collect();
        s.layers.push(Layer { heads, mlps, note: format!("l{li}") });
    }
    s
}

fn same(a: Result<ResidualState>, b: Result<ResidualState>) -> bool {
    match (a, b) {
        (Ok(x), Ok(y)) => x == y,
        (Err(Error::AllMasked), Err(Error::AllMasked)) => true,
        _ => false,
    }
}

#[test]
fn naive_matches_interpreter() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut ok = 0;
    for trial in 0..300 {
        let c = Cfg::new(rng.gen_range(2..=6)).unwrap();
        let s = random_spec(&mut rng, c);
        let nlen = rng.gen_range(1..=7);
        let toks: Vec<usize> = (0..nlen).map(|_| rng.gen_range(0..3)).collect();
        let noise = rng.gen_bool(0.3).then(|| rand_mat(&mut rng, c, nlen, s.d));
        let r = naive_forward(&s, &toks, noise.as_ref());
        ok += r.is_ok() as usize;
        assert!(same(r, s.forward(&toks, noise.as_ref())), "trial {trial}");
    }
    assert!(ok > 200, "only {ok} runs completed");
}

#[test]
fn naive_is_independent_of_the_interpreter() {
    let src = include_str!("mod.rs");
    let body = src.split("// ----------------------------------------------------------- Gumbel check").next().unwrap();
    for banned in ["Prepared", "engine", ".forward(", "eval_into", ".eval(", "prepare(", "Sparse"] {
        assert!(!body.contains(banned), "naive forward mentions `{banned}`");
    }
}

#[test]
fn naive_rejects_bad_noise() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let c = Cfg::new(3).unwrap();
    let s = random_spec(&mut rng, c);
    let z = Mat::zeros(2, 3);
    assert!(matches!(naive_forward(&s, &[0, 1], Some(&z)), Err(Error::Shape(_))));
}

#[test]
fn dfa_examples() {
    let p = DFASpec::parity();
    assert!(dfa_eval(&p, &["1", "0", "1"]).unwrap());
    assert!(!dfa_eval(&p, &["1", "0", "0"]).unwrap());
    assert!(dfa_eval::<&str>(&p, &[]).unwrap());
    let ab = DFASpec::ab_star();
    assert!(dfa_eval(&ab, &["a", "b", "a", "b"]).unwrap());
    assert!(!dfa_eval(&ab, &["a", "b", "a"]).unwrap());
    assert!(!dfa_eval(&ab, &["b", "a"]).unwrap());
    assert!(matches!(dfa_eval(&ab, &["c"]), Err(Error::UnknownSymbol(_))));
    let m3 = DFASpec::mod_count(3);
    assert!(dfa_eval(&m3, &["1", "1", "0", "1"]).unwrap());
}

#[test]
fn dfa_text_round_trip() {
    for d in [DFASpec::parity(), DFASpec::ab_star(), DFASpec::mod_count(5)] {
        assert_eq!(DFASpec::parse(&d.to_text()).unwrap(), d);
    }
    let bad = "DFA\nSTATES x y\nALPHABET 0\nSTART x\nACCEPT x\nT x 0 y\nEND\n";
    assert!(matches!(DFASpec::parse(bad), Err(Error::Parse { .. })));
    let bad = "DFA\nSTATES x\nALPHABET 0\nSTART x\nACCEPT x\nT x 1 x\nEND\n";
    assert!(matches!(DFASpec::parse(bad), Err(Error::Parse { line: 6, .. })));
}

#[test]
fn shortlex_order_and_count() {
    let a: Vec<String> = vec!["0".into(), "1".into()];
    let all = shortlex(&a, 0, 3);
    assert_eq!(all.len(), 1 + 2 + 4 + 8);
    assert!(all[0].is_empty());
    assert_eq!(all[1], vec!["0"]);
    assert_eq!(all[3], vec!["0", "0"]);
    assert_eq!(all[14], vec!["1", "1", "1"]);
    let r1 = random_inputs(&a, 20, 2, 5, 9);
    assert_eq!(r1, random_inputs(&a, 20, 2, 5, 9));
    assert!(r1.iter().all(|w| (2..=5).contains(&w.len())));
}

#[test]
fn gumbel_statistic() {
    let c = Cfg::new(8).unwrap();
    let logits = [c.int(1), c.ratio(1, 2), c.int(-1), c.int(0)];
    let (tv, ok) = gumbel_stat_test(c, &logits, 100_000, 3);
    assert!(ok, "tv={tv}");
}

fn parity_machine(name: &str, flip_on: Option<usize>) -> Machine {
    let d = DFASpec::parity();
    Machine::new(name, move |w| {
        let mut acc = dfa_eval(&d, w)?;
        if flip_on == Some(w.len()) {
            acc = !acc;
        }
        Ok(Outcome {
            outputs: vec![if acc { "<acc>".into() } else { "<rej>".into() }],
            counters: Counters { steps: w.len(), ..Default::default() },
        })
    })
}

#[test]
fn equivalence_report() {
    let a: Vec<String> = vec!["0".into(), "1".into()];
    let inputs = InputSet::shortlex(&a, 0, 4);
    let r = check_equivalence(&parity_machine("x", None), &parity_machine("y", None), &Alignment::last(), &inputs);
    assert!(r.pass());
    let text = r.to_text();
    assert!(text.lines().last().unwrap().ends_with("verdict=pass"));
    assert_eq!(text.lines().filter(|l| l.starts_with("ok ")).count(), 31);

    let r = check_equivalence(&parity_machine("x", None), &parity_machine("y", Some(3)), &Alignment::All, &inputs);
    assert_eq!(r.failures().len(), 8);
    assert!(r.to_text().contains("verdict=fail"));

    let bounded = parity_machine("z", None).with_bounds(|n| Bounds { steps: Some(n.min(2)), padding: None });
    let r = check_equivalence(&parity_machine("x", None), &bounded, &Alignment::last(), &inputs);
    assert_eq!(r.bound_failures, 8 + 16);
    assert!(!r.pass());
}

#[test]
fn per_len_caches() {
    use std::sync::atomic::{AtomicUsize, Ordering};
    static BUILDS: AtomicUsize = AtomicUsize::new(0);
    let p = PerLen::new(|n| {
        BUILDS.fetch_add(1, Ordering::SeqCst);
        Ok(n * 2)
    });
    assert_eq!(*p.get(3).unwrap(), 6);
    assert_eq!(*p.get(3).unwrap(), 6);
    assert_eq!(*p.get(4).unwrap(), 8);
    assert_eq!(BUILDS.load(Ordering::SeqCst), 2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn naive_agrees(seed in any::<u64>(), p in 1u32..=8, nlen in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = Cfg::new(p).unwrap();
        let s = random_spec(&mut rng, c);
        let toks: Vec<usize> = (0..nlen).map(|_| rng.gen_range(0..3)).collect();
        prop_assert!(same(naive_forward(&s, &toks, None), s.forward(&toks, None)));
    }
}
