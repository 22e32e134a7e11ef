//! Acceptance run: one PASS/FAIL line per criterion, each against its time
//! limit. Pass criterion numbers as arguments to run a subset.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use mdmsim::compile::{
    causal_to_unmasked, dfa_cot_core, dfa_schedule, dfa_to_mdm, dump_read_pair, fuse_planner_predictor, mdm_to_pcot, mdm_to_plt, mdm_to_smdm,
    pcot_cells, pcot_to_mdm, plt_bits, plt_symbols, plt_to_mdm, run_padded, unmasked_to_causal, Certificate, MASKED,
};
use mdmsim::fxp::{exp_threshold, Cfg, Fx, Mat};
use mdmsim::gadgets::{build_detector, build_pointer_decoder, build_select_block, pointer_bits, suite, to_bits};
use mdmsim::models::{acceptance, mdm_run, pcot_run, topk_mdm_run, MDMSpec, NoiseStream, PCoTSpec, RunOpts};
use mdmsim::oracle::{dfa_eval, gumbel_stat_test, random_inputs, shortlex, Alignment, DFASpec};
use mdmsim::tfcore::pe::{k, len, n};
use mdmsim::tfcore::{decode, TransformerSpec, MASK};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = std::result::Result<String, String>;

macro_rules! ensure {
    ($c:expr, $($msg:tt)+) => {
        if !$c {
            return Err(format!($($msg)+));
        }
    };
}

fn e<E: std::fmt::Display>(x: E) -> String {
    x.to_string()
}

fn cfg(p: u32) -> Cfg {
    Cfg::new(p).unwrap()
}

fn corpus() -> Vec<(&'static str, DFASpec)> {
    vec![("parity", DFASpec::parity()), ("ab-star", DFASpec::ab_star())]
}

fn aligned(al: &Alignment, src: &[String], tgt: &[String]) -> bool {
    match al {
        Alignment::All => src == tgt,
        Alignment::Pairs(p) => p.iter().all(|(a, b)| a.get(src).is_some() && a.get(src) == b.get(tgt)),
    }
}

fn within(cert: &Certificate, nn: usize, c: &mdmsim::models::Counters, what: &str) -> std::result::Result<(), String> {
    cert.check(nn, c).map_err(|m| format!("{what}: {m}"))
}

// ------------------------------------------------------------------- 1

fn c1_fixed_point() -> Check {
    let mut pts = 0;
    for p in 2..=4 {
        let c = cfg(p);
        let t = exp_threshold(c);
        for x in c.grid() {
            let v = c.to_f64(x);
            if v > t {
                ensure!(c.exp(x) == c.bf(), "p={p}: exp({v}) = {} not B_F", c.show(c.exp(x)));
                pts += 1;
            }
            if v < -t {
                ensure!(c.exp(x).is_zero(), "p={p}: exp({v}) = {} not 0", c.show(c.exp(x)));
                pts += 1;
            }
        }
    }
    let c = cfg(2);
    let xs = [c.quantize(3.75), c.quantize(3.75), c.quantize(-3.75)];
    let folded = c.iter_sum(xs);
    let exact: i64 = xs.iter().map(|x| x.raw()).sum();
    ensure!(folded.is_zero(), "iter_sum gave {}", c.show(folded));
    ensure!(exact == c.quantize(3.75).raw(), "exact sum {exact}");
    Ok(format!("{pts} saturated grid points at p=2..4; (3.75,3.75,-3.75) folds to 0, exact 3.75"))
}

// ------------------------------------------------------------------- 2

fn c2_delta() -> Check {
    for p in [2, 4] {
        suite::match_delta(cfg(p), 16).map_err(|m| format!("p={p}: {m}"))?;
    }
    Ok("all n, n' <= 16 at p=2 and p=4".into())
}

// ------------------------------------------------------------------- 3

fn c3_gadgets() -> Check {
    let checks = suite::run_suite(&[2, 3], 1).map_err(e)?;
    let bad: Vec<String> = checks.iter().filter_map(|c| c.verdict.as_ref().err().map(|m| format!("{} p={}: {m}", c.name, c.p))).collect();
    ensure!(bad.is_empty(), "{}", bad.join("; "));
    Ok(format!("{} checks at p=2,3", checks.len()))
}

// ------------------------------------------------------------------- 4

fn c4_regular() -> Check {
    let mut runs = 0;
    for (name, d) in corpus() {
        let (m, _) = dfa_to_mdm(&d, cfg(3), 64).map_err(e)?;
        let mut inputs = shortlex(&d.alphabet, 0, 10);
        inputs.extend(random_inputs(&d.alphabet, 200, 0, 64, 4));
        for w in &inputs {
            let nn = w.len();
            let (t, p) = dfa_schedule(nn);
            let (y, tr) = mdm_run(&m, w, t, p, RunOpts::default()).map_err(|x| format!("{name} {w:?}: {x}"))?;
            let got = acceptance(&y).map_err(|x| format!("{name} {w:?}: {x}"))?;
            ensure!(got == dfa_eval(&d, w).map_err(e)?, "{name}: disagrees on {}", w.concat());
            let steps_bound = (usize::BITS - nn.saturating_sub(1).leading_zeros()) as usize + 2;
            ensure!(tr.counters.steps <= steps_bound && tr.counters.padding_used <= nn + 1, "{name} N={nn}: {:?}", tr.counters);
            runs += 1;
        }
    }
    Ok(format!("{runs} runs (parity, (ab)*): exhaustive to length 10 plus 200 random to 64"))
}

// ------------------------------------------------------------------- 5

/// Aligned equality for every input of one length, against a
/// certificate.
fn mdm_plt(d: &DFASpec, m: &MDMSpec, nn: usize) -> std::result::Result<usize, String> {
    let (t, p) = dfa_schedule(nn);
    let (plt, cert) = mdm_to_plt(m, t, p, false).map_err(e)?;
    let mut cases = 0;
    for w in shortlex(&d.alphabet, nn, nn) {
        let (y, _) = mdm_run(m, &w, t, p, RunOpts::default()).map_err(e)?;
        let (ys, tr) = plt_symbols(&plt, &w, t, None).map_err(e)?;
        ensure!(aligned(&cert.alignment, &y, &ys), "mdm->plt {w:?}");
        within(&cert, nn, &tr.counters, "mdm->plt")?;
        cases += 1;
    }
    Ok(cases)
}

/// Seeded runs agree, or fail with the same error. Returns (agreed, failed).
fn stochastic_pairing(m: &MDMSpec, d: &DFASpec, nn: usize) -> std::result::Result<(usize, usize), String> {
    let (t, p) = dfa_schedule(nn);
    let (plt, _) = mdm_to_plt(m, t, p, true).map_err(e)?;
    let (mut ok, mut both) = (0, 0);
    for (seed, w) in shortlex(&d.alphabet, nn, nn).iter().enumerate() {
        let seed = seed as u64;
        let mut z = NoiseStream::new(m.cfg(), seed);
        let a = mdm_run(m, w, t, p, RunOpts { noise: Some(&mut z), capture: false });
        let mut z2 = NoiseStream::new(m.cfg(), seed);
        let b = plt_symbols(&plt, w, t, Some(&mut z2));
        match (a, b) {
            (Ok((y, _)), Ok((ys, _))) => {
                ensure!(ys[nn..] == y[..] && z.drawn == z2.drawn, "stochastic mdm->plt seed {seed}");
                ok += 1;
            }
            (Err(x), Err(y)) => {
                ensure!(x.to_string() == y.to_string(), "seed {seed}: {x} vs {y}");
                both += 1;
            }
            (a, b) => return Err(format!("seed {seed}: {:?} vs {:?}", a.map(|x| x.0), b.map(|x| x.0))),
        }
    }
    Ok((ok, both))
}

fn plt_mdm() -> std::result::Result<usize, String> {
    let c = cfg(3);
    let mut cases = 0;
    for l in 2..=8 {
        let (plt, _) = build_pointer_decoder(c, l).map_err(e)?;
        let kb = pointer_bits(l);
        let nn = kb + 1;
        let (m, cert) = plt_to_mdm(&plt, kb, nn, 3).map_err(e)?;
        let cells = cert.at(nn).padding.ok_or("no padding bound")?;
        ensure!(cells == (nn + plt.pad) * plt.base.d, "plt->mdm padding {cells}");
        for v in 0..(1usize << kb) {
            let mut w = vec!["&".to_string()];
            w.extend(to_bits(v as i64, kb).iter().map(|b| b.to_string()));
            let (y, tr) = mdm_run(&m, &w, kb, cells, RunOpts::default()).map_err(e)?;
            ensure!(y == plt_bits(&plt, &w, kb).map_err(e)?, "plt->mdm len={l} v={v}");
            within(&cert, nn, &tr.counters, "plt->mdm")?;
            cases += 1;
        }
    }
    Ok(cases)
}

fn pcot_mdm(d: &DFASpec, nn: usize) -> std::result::Result<usize, String> {
    let core = dfa_cot_core(d, cfg(3), 2 * nn + 1).map_err(e)?;
    let spec = PCoTSpec { core, steps: nn, pprime: 1 };
    let (m, cert) = pcot_to_mdm(&spec, nn).map_err(e)?;
    let p = nn;
    let pad = p + (nn + p) * (nn + p);
    ensure!(cert.at(nn).padding == Some(pad), "pcot->mdm declares {:?}, not P+(N+P)^2 = {pad}", cert.at(nn).padding);
    let mut cases = 0;
    for w in shortlex(&d.alphabet, nn, nn) {
        let (want, _) = pcot_run(&spec, &w, None).map_err(e)?;
        let (y, tr) = mdm_run(&m, &w, nn, pad, RunOpts::default()).map_err(e)?;
        ensure!(aligned(&cert.alignment, &want, &y), "pcot->mdm {w:?}");
        ensure!(tr.counters.padding_used == pad, "pcot->mdm used {}", tr.counters.padding_used);
        within(&cert, nn, &tr.counters, "pcot->mdm")?;
        cases += 1;
    }
    Ok(cases)
}

fn mdm_pcot(d: &DFASpec, m: &MDMSpec, nn: usize) -> std::result::Result<usize, String> {
    let (t, p) = dfa_schedule(nn);
    let (pc, cert) = mdm_to_pcot(m, nn, p, t).map_err(e)?;
    let l = m.planner.layers.len().max(m.predictor.layers.len());
    let pad = l * t * (p + nn);
    ensure!(cert.at(nn).padding == Some(pad), "mdm->pcot declares {:?}, not L T (P+N) = {pad}", cert.at(nn).padding);
    let mut cases = 0;
    for w in shortlex(&d.alphabet, nn, nn) {
        let (y, _) = mdm_run(m, &w, t, p, RunOpts::default()).map_err(e)?;
        let (cells, tr) = pcot_cells(&pc, &w, p).map_err(e)?;
        ensure!(aligned(&cert.alignment, &y, &cells), "mdm->pcot {w:?}");
        ensure!(tr.counters.padding_used == pad, "mdm->pcot used {}", tr.counters.padding_used);
        within(&cert, nn, &tr.counters, "mdm->pcot")?;
        cases += 1;
    }
    Ok(cases)
}

fn mask_pair(src: &TransformerSpec, alpha: &[String], nn: usize, to_causal: bool) -> std::result::Result<usize, String> {
    let l = src.layers.len();
    let (tgt, cert) = if to_causal { unmasked_to_causal(src, nn) } else { causal_to_unmasked(src, nn) }.map_err(e)?;
    let (pad, layers) = if to_causal { (l * (nn - 1), l + 1) } else { ((nn - 1) * nn, 2 * l + 1) };
    ensure!(cert.at(nn).padding == Some(pad) && tgt.layers.len() == layers, "N={nn}: padding {:?} layers {}", cert.at(nn).padding, tgt.layers.len());
    let mut cases = 0;
    for w in shortlex(alpha, nn, nn) {
        let want = run_padded(src, &w, 0).map_err(e)?;
        let got = run_padded(&tgt, &w, pad).map_err(e)?;
        ensure!(aligned(&cert.alignment, &want, &got), "{} N={nn} {w:?}: {want:?} vs {got:?}", if to_causal { "u->c" } else { "c->u" });
        cases += 1;
    }
    Ok(cases)
}

fn masked_as(y: &[String]) -> Vec<String> {
    y.iter().map(|s| if s == MASK { MASKED.to_string() } else { s.clone() }).collect()
}

fn mdm_smdm(d: &DFASpec, m: &MDMSpec, nn: usize) -> std::result::Result<(MDMSpec, usize), String> {
    let (t, p) = dfa_schedule(nn);
    let (s, cert) = mdm_to_smdm(m, t, p, nn).map_err(e)?;
    ensure!(cert.at(nn).padding == Some(t * p), "smdm padding {:?}", cert.at(nn).padding);
    let mut cases = 0;
    for w in shortlex(&d.alphabet, nn, nn) {
        let (y, tr) = mdm_run(m, &w, t, p, RunOpts::default()).map_err(e)?;
        let (ys, trs) = mdm_run(&s, &w, t, t * p, RunOpts::default()).map_err(e)?;
        ensure!(aligned(&cert.alignment, &masked_as(&y), &ys), "mdm->smdm {w:?}");
        for (st, (a, b)) in tr.steps.iter().zip(&trs.steps).enumerate() {
            ensure!(b.y[st * p..(st + 1) * p] == masked_as(&a.y)[..], "mdm->smdm {w:?} block {}", st + 1);
        }
        ensure!(trs.counters.padding_used == t * p, "smdm used {}", trs.counters.padding_used);
        within(&cert, nn, &trs.counters, "mdm->smdm")?;
        cases += 1;
    }
    Ok((s, cases))
}

/// Top-k with the fused model selects the planner's cells, and the logits
/// there (hence the infill distribution) are the predictor's.
fn fused_matches(mdm: &MDMSpec, f: &TransformerSpec, kk: usize, w: &[String], t: usize, p: usize) -> std::result::Result<(), String> {
    let (y, tr) = mdm_run(mdm, w, t, p, RunOpts::default()).map_err(e)?;
    let (yf, trf) = topk_mdm_run(f, kk, w, t, p, None).map_err(e)?;
    ensure!(yf == y, "fused output differs on {w:?}");
    let keep: Vec<usize> = (0..f.outputs.len()).filter(|&o| f.outputs[o] != MASK).collect();
    for (st, (a, b)) in tr.steps.iter().zip(&trf.steps).enumerate() {
        ensure!(a.u == b.u, "top-k set differs on {w:?} step {}", st + 1);
        let before: Vec<String> = if st == 0 { vec![MASK.into(); p] } else { tr.steps[st - 1].y.clone() };
        let mut toks = f.encode(w).map_err(e)?;
        toks.extend(before.iter().map(|s| f.symbol(s).unwrap()));
        let sf = f.forward(&toks, None).map_err(e)?;
        let sp = mdm.predictor.forward(&toks, None).map_err(e)?;
        for c in (0..p).filter(|&c| a.u[c]) {
            let lf = f.logits(&sf, w.len() + c).map_err(e)?;
            let lp = mdm.predictor.logits(&sp, w.len() + c).map_err(e)?;
            ensure!(keep.iter().all(|&o| lf[o] == lp[o]), "infill logits differ on {w:?} cell {c}");
        }
    }
    Ok(())
}

fn soft_predictor(rng: &mut ChaCha8Rng, c: Cfg, alpha: &[&str]) -> TransformerSpec {
    use mdmsim::tfcore::{Head, Layer, MaskMode};
    let d = 4;
    let sc = c.scale();
    let mut s = TransformerSpec::blank(c, alpha, &["a", "b"], d);
    s.mask = MaskMode::Unmasked;
    let mut m = |rows: usize, cols: usize, r: i64| {
        let mut x = Mat::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                x.set(i, j, c.from_raw(rng.gen_range(-r..=r)));
            }
        }
        x
    };
    s.embed = m(d, alpha.len(), sc);
    s.out = m(2, d, 1);
    let heads = vec![Head { wq: m(2, d, sc / 2), wk: m(2, d, sc / 2), wv: m(2, d, sc / 2), offset: 2 }];
    s.layers.push(Layer { heads, mlps: vec![], note: "soft".into() });
    s
}

fn c5_simulations() -> Check {
    let c = cfg(3);
    let mut log = Vec::new();
    let mut tally = |what: &str, n: usize| log.push(format!("{what} {n}"));
    let mut count = [0usize; 8];
    let mut stoch_err = 0;
    // unmasked sources: the detector and a block planner
    let ab: Vec<String> = ["a", "b"].map(String::from).to_vec();
    let (det, _) = build_detector(c, &["a", "b"], "b").map_err(e)?;
    let mut abm = ab.clone();
    abm.push(MASK.into());
    let sel = build_select_block(c, &abm, 2, None, 16).map_err(e)?;
    for nn in 1..=8 {
        count[7] += mask_pair(&det, &ab, nn, true).map_err(|x| format!("detector: {x}"))?;
        if nn <= 6 {
            count[7] += mask_pair(&sel, &abm, nn, true).map_err(|x| format!("select block: {x}"))?;
        }
    }
    let plt_cases = plt_mdm()?;
    // fusion on a soft predictor under a block planner
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (t, pp) = (3, 2);
    let mut soft = 0;
    for _ in 0..3 {
        let predictor = soft_predictor(&mut rng, c, &["a", "b", MASK]);
        let planner = build_select_block(c, &abm, pp, Some(n().gt(len().sub(k((t * pp) as i64)))), 16).map_err(e)?;
        let mdm = MDMSpec { planner, predictor, class: mdmsim::models::PlannerClass::MaskDominated, fanout: Some(pp) };
        let (f, kk) = fuse_planner_predictor(&mdm).map_err(e)?;
        for w in shortlex(&ab, 0, 8) {
            fused_matches(&mdm, &f, kk, &w, t, t * pp)?;
            soft += 1;
        }
    }
    for (name, d) in corpus() {
        let (m, _) = dfa_to_mdm(&d, c, 8).map_err(e)?;
        for nn in 1..=8 {
            let ctx = |x: String| format!("{name} N={nn}: {x}");
            count[0] += mdm_plt(&d, &m, nn).map_err(ctx)?;
            count[1] += pcot_mdm(&d, nn).map_err(ctx)?;
            count[2] += mdm_pcot(&d, &m, nn).map_err(ctx)?;
            let (s, k) = mdm_smdm(&d, &m, nn).map_err(ctx)?;
            count[3] += k;
            let (f, kk) = fuse_planner_predictor(&s).map_err(|x| ctx(x.to_string()))?;
            let (t, p) = dfa_schedule(nn);
            for w in shortlex(&d.alphabet, nn, nn) {
                fused_matches(&s, &f, kk, &w, t, t * p).map_err(ctx)?;
                count[4] += 1;
            }
            let core = dfa_cot_core(&d, c, 2 * nn + 1).map_err(e)?;
            count[5] += mask_pair(&core, &d.alphabet, nn, false).map_err(ctx)?;
        }
        let (ok, both) = stochastic_pairing(&m, &d, 3).map_err(|x| format!("{name}: {x}"))?;
        count[6] += ok;
        stoch_err += both;
    }
    tally("mdm->plt", count[0]);
    tally("plt->mdm", plt_cases);
    tally("stochastic pairs", count[6]);
    tally("stochastic equal errors", stoch_err);
    tally("pcot->mdm", count[1]);
    tally("mdm->pcot", count[2]);
    tally("mdm->smdm", count[3]);
    tally("fused", count[4] + soft);
    tally("causal->unmasked", count[5]);
    tally("unmasked->causal", count[7]);
    Ok(log.join(", "))
}

// ------------------------------------------------------------------- 6

fn c6_dump_read() -> Check {
    let c = cfg(3);
    let (dd, rows) = (6usize, 4usize);
    let (dump, read) = dump_read_pair(c, dd, rows).map_err(e)?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let amp = dump.symbol("&").map_err(e)?;
    let mask = dump.symbol(MASK).map_err(e)?;
    let total = rows + rows * dd;
    for trial in 0..100 {
        let mut h = Mat::zeros(total, dump.d);
        for r in 0..rows {
            for j in 0..dd {
                if rng.gen_bool(0.5) {
                    h.set(r, j, c.one());
                }
            }
        }
        let mut toks = vec![amp; rows];
        toks.extend(std::iter::repeat_n(mask, rows * dd));
        let st = dump.forward(&toks, Some(&h)).map_err(e)?;
        let ids = decode(&st, &dump.out, c).map_err(e)?;
        for (i, &o) in ids.iter().enumerate().skip(rows) {
            toks[i] = read.symbol(&dump.outputs[o]).map_err(e)?;
        }
        let back = read.forward(&toks, None).map_err(e)?;
        for r in 0..rows {
            for j in 0..dd {
                ensure!(back.h.get(r, j) == h.get(r, j), "trial {trial}: row {r} col {j}");
            }
        }
    }
    Ok("100 random binary H, D=6, N=4".into())
}

// ------------------------------------------------------------------- 7

fn c7_bench() -> Check {
    let ns: Vec<usize> = (2..=32).collect();
    let rows = mdmsim::cli::bench_rows(&DFASpec::parity(), &ns, 3, 0).map_err(e)?;
    let mut csv = String::from("N,machine,steps,padding_used,evals\n");
    for r in &rows {
        let c = &r.counters;
        csv += &format!("{},{},{},{},{}\n", r.n, r.machine, c.steps, c.padding_used, c.evals);
        let want = match r.machine {
            "mdm" => (usize::BITS - (r.n - 1).leading_zeros()) as usize + 2,
            _ => r.n,
        };
        ensure!(c.steps == want, "{} at N={}: {} steps, expected {want}", r.machine, r.n, c.steps);
        ensure!(r.correct, "{} at N={} disagrees with the DFA", r.machine, r.n);
    }
    let path = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join("bench_parity.csv");
    std::fs::write(&path, &csv).map_err(e)?;
    print!("{csv}");
    Ok(format!("{} rows, csv at {}", rows.len(), path.display()))
}

// ------------------------------------------------------------------- 8

fn c8_gumbel() -> Check {
    let c = cfg(8);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    for v in 0..20 {
        let k = rng.gen_range(2..=8);
        let logits: Vec<Fx> = (0..k).map(|_| c.quantize(rng.gen_range(-4.0..4.0))).collect();
        let (tv, ok) = gumbel_stat_test(c, &logits, 100_000, 1000 + v);
        let (tv2, _) = gumbel_stat_test(c, &logits, 100_000, 1000 + v);
        ensure!(tv == tv2, "vector {v}: not reproducible");
        ensure!(ok, "vector {v} (|S|={k}): TV {tv:.4}");
        worst = worst.max(tv);
    }
    Ok(format!("20 vectors, 1e5 draws each, worst TV {worst:.4}"))
}

struct Criterion {
    id: usize,
    name: &'static str,
    limit: Duration,
    run: fn() -> Check,
}

fn main() {
    let secs = Duration::from_secs;
    let all = [
        Criterion { id: 1, name: "fixed-point lemmas", limit: secs(10), run: c1_fixed_point },
        Criterion { id: 2, name: "positional delta", limit: secs(5), run: c2_delta },
        Criterion { id: 3, name: "gadget suite", limit: secs(120), run: c3_gadgets },
        Criterion { id: 4, name: "regular languages", limit: secs(300), run: c4_regular },
        Criterion { id: 5, name: "simulation equivalences", limit: secs(1200), run: c5_simulations },
        Criterion { id: 6, name: "dump/read identity", limit: secs(10), run: c6_dump_read },
        Criterion { id: 7, name: "sequentiality table", limit: secs(120), run: c7_bench },
        Criterion { id: 8, name: "gumbel sampler", limit: secs(60), run: c8_gumbel },
    ];
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for c in all.iter().filter(|c| only.is_empty() || only.contains(&c.id)) {
        let t0 = Instant::now();
        let r = catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|_| Err("panicked".into()));
        let el = t0.elapsed();
        let (pass, detail) = match r {
            Ok(d) if el <= c.limit => (true, d),
            Ok(d) => (false, format!("over the {}s limit; {d}", c.limit.as_secs())),
            Err(m) => (false, m),
        };
        failed += !pass as usize;
        println!("criterion {} {} [{:.1}s / {}s] {}: {detail}", c.id, if pass { "PASS" } else { "FAIL" }, el.as_secs_f64(), c.limit.as_secs(), c.name);
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
