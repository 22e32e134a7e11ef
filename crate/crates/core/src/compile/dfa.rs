//! Automata to machines: the log-step MDM recognizer and a causal core that
//! walks the input one symbol per chain-of-thought step.

use crate::error::{Error, Result};
use crate::fxp::{Cfg, Fx};
use crate::gadgets::{addsub_mlps, flag_head, match_head, pospart_mlp, sbin_mlp, HeadB, LayerB, MlpB, SpecB};
use crate::models::{MDMSpec, PlannerClass};
use crate::oracle::{Alignment, DFASpec, Idx};
use crate::tfcore::pe::{bits_for, k, len, n};
use crate::tfcore::{MaskMode, TransformerSpec, ACCEPT, MASK, REJECT};

use super::cert::{num, var, Certificate, Var};
use super::{unit, unitf};

/// Transition maps generated by the letters, closed under composition.
pub struct Monoid {
    pub elems: Vec<Vec<usize>>,
    /// Element of each letter.
    pub letter: Vec<usize>,
    /// `comp[i][j]` is `elems[i] ∘ elems[j]` (apply `j` first).
    pub comp: Vec<Vec<usize>>,
}

impl Monoid {
    pub fn of(dfa: &DFASpec) -> Self {
        let q = dfa.states.len();
        let mut elems: Vec<Vec<usize>> = Vec::new();
        let find = |elems: &mut Vec<Vec<usize>>, f: Vec<usize>| match elems.iter().position(|e| *e == f) {
            Some(i) => i,
            None => {
                elems.push(f);
                elems.len() - 1
            }
        };
        let letter: Vec<usize> =
            (0..dfa.alphabet.len()).map(|a| find(&mut elems, (0..q).map(|s| dfa.delta[s][a]).collect())).collect();
        let mut i = 0;
        while i < elems.len() {
            for j in 0..=i {
                for (x, y) in [(i, j), (j, i)] {
                    let f: Vec<usize> = (0..q).map(|s| elems[x][elems[y][s]]).collect();
                    find(&mut elems, f);
                }
            }
            i += 1;
        }
        let comp = (0..elems.len())
            .map(|x| (0..elems.len()).map(|y| elems.iter().position(|e| (0..q).all(|s| e[s] == elems[x][elems[y][s]])).unwrap()).collect())
            .collect();
        Monoid { elems, letter, comp }
    }
}

/// Cell symbol for element `e`; `c` marks a window reaching the first cell.
pub fn cell_sym(e: usize, c: bool) -> String {
    if c {
        format!("<s{e}c>")
    } else {
        format!("<s{e}>")
    }
}

/// Steps and cells of the compiled recognizer on inputs of length `n`.
pub fn dfa_schedule(n: usize) -> (usize, usize) {
    (super::cert::clog2(n as i64) as usize + 2, n + 1)
}

fn check_alphabet(dfa: &DFASpec, reserved: &[String]) -> Result<()> {
    dfa.validate()?;
    if let Some(a) = dfa.alphabet.iter().find(|a| reserved.contains(a)) {
        return Err(Error::Spec(format!("input symbol `{a}` collides with a compiled symbol")));
    }
    Ok(())
}

/// MDM recognizing the DFA's language in `ceil(log2 N) + 2` steps over
/// `N + 1` cells. Cell `i` holds the composed transition map of a window
/// ending at `i`; complete windows start at the first cell. Every step, each
/// incomplete cell composes with the cell `b` to its left, where `b` is the
/// number of complete cells, so `b` doubles. The last cell then reads the
/// full map of cell `N` and writes the verdict. Inputs up to `max_n`.
pub fn dfa_to_mdm(dfa: &DFASpec, cfg: Cfg, max_n: usize) -> Result<(MDMSpec, Certificate)> {
    let mo = Monoid::of(dfa);
    let ns = mo.elems.len();
    let mut alpha = dfa.alphabet.clone();
    let cells: Vec<String> = (0..ns).flat_map(|e| [cell_sym(e, false), cell_sym(e, true)]).collect();
    let mut reserved = cells.clone();
    reserved.extend([MASK, ACCEPT, REJECT].map(String::from));
    check_alphabet(dfa, &reserved)?;
    alpha.extend(reserved);
    let mut outputs = cells.clone();
    outputs.extend([ACCEPT.to_string(), REJECT.to_string()]);
    let nsig = dfa.alphabet.len();
    let sym_of = |s: &str| alpha.iter().position(|a| a == s).unwrap();
    let big_n = || len().sub(k(1)).div(k(2));
    let w = bits_for(2 * max_n + 1);
    let one_fx = cfg.one();

    // ---- planner: every incomplete cell, and the verdict cell once cell N is complete
    let mut pl = SpecB::new(cfg, alpha.clone(), vec!["0".into(), "1".into()]);
    let cmp = pl.alloc(1);
    for e in 0..ns {
        pl.embed[sym_of(&cell_sym(e, true))].push((cmp, one_fx));
    }
    let one = pl.pe_one();
    let id = pl.pe_sbin(w, n());
    let iscell = pl.pe_ind(n().gt(big_n()).and(n().le(big_n().mul(k(2)))));
    let isacc = pl.pe_ind(n().eq(len()).and(len().gt(k(1))));
    let isempty = pl.pe_ind(len().eq(k(1)));
    let tprev = pl.pe_sbin(w, n().sub(k(1)).max(k(1)));
    let pcmp = pl.alloc(1);
    let go = pl.alloc(1);
    let mut l = LayerB::new("planner");
    l.heads.push(match_head(cfg, &tprev, &id, one, &[cmp], pcmp));
    let mut m = MlpB::linear();
    let u = unit(&mut m, cfg, &[(pcmp, 1), (isacc, 1)], -1);
    m.out(go, vec![(u, one_fx)], Fx::ZERO);
    l.mlps.push(m);
    pl.layers.push(l);
    pl.out[1] = vec![(cmp, cfg.int(-1)), (iscell, one_fx), (isempty, one_fx), (go, one_fx)];
    pl.out[0] = vec![(one, cfg.ratio(1, 2))];
    pl.notes.push("dfa planner".into());
    let planner = pl.finish()?;

    // ---- predictor
    let mut sb = SpecB::new(cfg, alpha.clone(), outputs.clone());
    let f = sb.slot(ns);
    let cmp = sb.alloc(1);
    let masked = sb.alloc(1);
    let inp = sb.slot(nsig);
    for a in 0..nsig {
        sb.embed[a].push((inp[a], one_fx));
    }
    for e in 0..ns {
        for c in [false, true] {
            let s = sym_of(&cell_sym(e, c));
            sb.embed[s].push((f[e], one_fx));
            if c {
                sb.embed[s].push((cmp, one_fx));
            }
        }
    }
    sb.embed[sym_of(MASK)].push((masked, one_fx));
    let one = sb.pe_one();
    let id = sb.pe_sbin(w, n());
    let iscell = sb.pe_ind(n().gt(big_n()).and(n().le(big_n().mul(k(2)))));
    let first = sb.pe_ind(n().eq(big_n().add(k(1))).and(big_n().ge(k(1))));
    let isacc = sb.pe_ind(n().eq(len()).and(len().gt(k(1))));
    let isempty = sb.pe_ind(len().eq(k(1)));

    // layer A: next cell's completeness, own input letter, previous cell
    let tnext = sb.pe_sbin(w, n().add(k(1)).min(len()));
    let tin = sb.pe_sbin(w, n().sub(big_n()).max(k(1)));
    let tprev = sb.pe_sbin(w, n().sub(k(1)).max(k(1)));
    let nc = sb.alloc(1);
    let own = sb.slot(nsig);
    let prev = sb.slot(ns + 1);
    let flag = sb.alloc(1);
    let mut fc = f.clone();
    fc.push(cmp);
    let mut la = LayerB::new("dfa gather");
    la.heads.push(match_head(cfg, &tnext, &id, one, &[cmp], nc));
    la.heads.push(match_head(cfg, &tin, &id, one, &inp, own[0]));
    la.heads.push(match_head(cfg, &tprev, &id, one, &fc, prev[0]));
    let mut m = MlpB::linear();
    let u1 = unit(&mut m, cfg, &[(cmp, 1), (nc, -1)], 0);
    let u2 = unit(&mut m, cfg, &[(first, 1), (cmp, -1)], 0);
    let u3 = unit(&mut m, cfg, &[(isempty, 1)], 0);
    m.out(flag, vec![(u1, one_fx), (u2, one_fx), (u3, one_fx)], Fx::ZERO);
    la.mlps.push(m);
    sb.layers.push(la);

    // layer B: b = index of the last complete cell; partner = max(n - b, 1)
    let idx = sb.pe_bin(w, n().sub(big_n()));
    let b = sb.slot(w);
    let nm1 = sb.pe_bin(w + 1, n().sub(k(1)));
    let kone = sb.pe_bin(w + 1, k(1));
    let zero = sb.alloc(1);
    let diff = sb.slot(w + 1);
    let pos = sb.slot(w + 1);
    let tb = sb.slot(w + 2);
    let ts = sb.slot(w + 2);
    let carry = sb.alloc(1);
    let mut lb = LayerB::new("dfa boundary");
    lb.heads.push(flag_head(cfg, flag, one, &idx, b[0]));
    let mut bpad = vec![zero];
    bpad.extend(&b);
    lb.mlps.extend(addsub_mlps(cfg, &nm1, &bpad, &diff, carry, true, false)?);
    lb.mlps.push(pospart_mlp(cfg, &diff, &pos));
    lb.mlps.extend(addsub_mlps(cfg, &pos, &kone, &tb, carry, false, false)?);
    lb.mlps.push(sbin_mlp(cfg, &tb, &ts));
    sb.layers.push(lb);

    // layer C: partner's map, then compose
    let id2 = sb.pe_sbin(w + 2, n());
    let part = sb.slot(ns + 1);
    let pc = part[ns];
    let r = sb.slot(outputs.len());
    let mut lc = LayerB::new("dfa compose");
    lc.heads.push(match_head(cfg, &ts, &id2, one, &fc, part[0]));
    let mut m = MlpB::linear();
    let mut rows: Vec<Vec<(usize, Fx)>> = vec![Vec::new(); outputs.len()];
    for i in 0..ns {
        for j in 0..ns {
            let h = mo.comp[i][j];
            let uc = unit(&mut m, cfg, &[(f[i], 1), (part[j], 1), (pc, 1)], -2);
            rows[2 * h + 1].push((uc, one_fx));
            let ui = unit(&mut m, cfg, &[(f[i], 1), (part[j], 1), (pc, -1)], -1);
            rows[2 * h].push((ui, one_fx));
        }
    }
    for a in 0..nsig {
        let e = mo.letter[a];
        let uc = unit(&mut m, cfg, &[(own[a], 1), (masked, 1), (iscell, 1), (first, 1)], -3);
        rows[2 * e + 1].push((uc, one_fx));
        let ui = unit(&mut m, cfg, &[(own[a], 1), (masked, 1), (iscell, 1), (first, -1)], -2);
        rows[2 * e].push((ui, one_fx));
    }
    let verdict = |q: usize| if dfa.accept[q] { 2 * ns } else { 2 * ns + 1 };
    for j in 0..ns {
        let u = unit(&mut m, cfg, &[(prev[j], 1), (prev[ns], 1), (isacc, 1)], -2);
        rows[verdict(mo.elems[j][dfa.start])].push((u, one_fx));
    }
    let u = unit(&mut m, cfg, &[(isempty, 1)], 0);
    rows[verdict(dfa.start)].push((u, one_fx));
    for (o, row) in rows.into_iter().enumerate() {
        m.out(r[o], row, Fx::ZERO);
    }
    lc.mlps.push(m);
    sb.layers.push(lc);
    for (o, &c) in r.iter().enumerate() {
        sb.out[o] = vec![(c, cfg.bf())];
    }
    sb.notes.push(format!("dfa predictor over {ns} transition maps"));
    let predictor = sb.finish()?;

    let mdm = MDMSpec { planner, predictor, class: PlannerClass::Deterministic, fanout: None };
    let mut cert = Certificate::new("dfa", "mdm");
    cert.steps = Some(var(Var::N).clog2().add(num(2)));
    cert.padding = Some(var(Var::N).add(num(1)));
    cert.layers = Some(num(3));
    cert.alignment = Alignment::Pairs(vec![(Idx::Back(0), Idx::Back(0))]);
    cert.notes.push(format!("max N {max_n}"));
    Ok((mdm, cert))
}

/// State symbol used by [`dfa_cot_core`].
pub fn state_sym(q: usize) -> String {
    format!("<q{q}>")
}

/// Causal core emitting, at step `s`, the state after `w_1..w_s`, and at
/// step `N` the verdict instead. It serves both reading conventions: at a
/// masked position it extends the state left of it, elsewhere its own.
/// Needs `N >= 1`; positions up to `max_len`.
pub fn dfa_cot_core(dfa: &DFASpec, cfg: Cfg, max_len: usize) -> Result<TransformerSpec> {
    let nq = dfa.states.len();
    let nsig = dfa.alphabet.len();
    let states: Vec<String> = (0..nq).map(state_sym).collect();
    let mut reserved = states.clone();
    reserved.extend([MASK, ACCEPT, REJECT].map(String::from));
    check_alphabet(dfa, &reserved)?;
    let mut alpha = dfa.alphabet.clone();
    alpha.extend(reserved);
    let mut outputs = states.clone();
    outputs.extend([ACCEPT.to_string(), REJECT.to_string()]);
    let w = bits_for(max_len + 3);
    let one_fx = cfg.one();

    let mut sb = SpecB::new(cfg, alpha, outputs.clone());
    sb.mask = MaskMode::Causal;
    let isin = sb.alloc(1);
    let notin = sb.alloc(1);
    let ismask = sb.alloc(1);
    let inp = sb.slot(nsig);
    let st = sb.slot(nq);
    for a in 0..nsig {
        sb.embed[a].extend([(isin, one_fx), (inp[a], one_fx)]);
    }
    for s in nsig..sb.alphabet.len() {
        sb.embed[s].push((notin, one_fx));
    }
    for q in 0..nq {
        sb.embed[nsig + q].push((st[q], one_fx));
    }
    sb.embed[nsig + nq].push((ismask, one_fx));
    let one = sb.pe_one();
    let id = sb.pe_sbin(w, n());
    let first = sb.pe_ind(n().eq(k(1)));

    // layer 1: the first non-input position is flagged
    let tprev = sb.pe_sbin(w, n().sub(k(1)).max(k(1)));
    let prev = sb.slot(nq + 1);
    let flag = sb.alloc(1);
    let mut l1 = LayerB::new("cot previous");
    let mut reads = st.clone();
    reads.push(isin);
    l1.heads.push(match_head(cfg, &tprev, &id, one, &reads, prev[0]));
    let pin = prev[nq];
    let mut m = MlpB::linear();
    let u1 = unit(&mut m, cfg, &[(pin, 1), (isin, -1)], 0);
    let u2 = unit(&mut m, cfg, &[(first, 1), (isin, -1)], 0);
    m.out(flag, vec![(u1, one_fx), (u2, one_fx)], Fx::ZERO);
    l1.mlps.push(m);
    sb.layers.push(l1);

    // layer 2: F = first non-input position (n + 1 at inputs); state to
    // extend; s = n - ismask - F + 2 is the input position to read
    let binn = sb.pe_bin(w, n());
    let np1 = sb.pe_bin(w, n().add(k(1)));
    let np2 = sb.pe_bin(w, n().add(k(2)));
    let fb = sb.slot(w);
    let ff = sb.slot(w);
    let sq = sb.slot(nq);
    let zero = sb.alloc(1);
    let d1 = sb.slot(w);
    let d2 = sb.slot(w);
    let ts = sb.slot(w);
    let carry = sb.alloc(1);
    let mut l2 = LayerB::new("cot locate");
    l2.heads.push(HeadB {
        q: vec![vec![(notin, cfg.bf())], vec![(notin, cfg.bf())]],
        k: vec![vec![(flag, one_fx)], vec![(one, cfg.neg(one_fx))]],
        v: binn.iter().map(|&c| vec![(c, one_fx)]).collect(),
        offset: fb[0],
    });
    let mut m = MlpB::linear();
    for i in 0..w {
        // B_F * isin suppresses the averaged garbage at input queries
        let a = unitf(&mut m, &[(fb[i], one_fx), (isin, cfg.neg_bf())], Fx::ZERO);
        let b2 = unit(&mut m, cfg, &[(np1[i], 1), (isin, 1)], -1);
        m.out(ff[i], vec![(a, one_fx), (b2, one_fx)], Fx::ZERO);
    }
    for q in 0..nq {
        let a = unit(&mut m, cfg, &[(prev[q], 1), (ismask, 1)], -1);
        let b2 = unit(&mut m, cfg, &[(st[q], 1), (ismask, -1)], 0);
        m.out(sq[q], vec![(a, one_fx), (b2, one_fx)], Fx::ZERO);
    }
    l2.mlps.push(m);
    let mut m = MlpB::linear();
    let mut ws: Vec<(usize, i64)> = sq.iter().map(|&c| (c, -1)).collect();
    ws.push((one, 1));
    let u = unit(&mut m, cfg, &ws, 0);
    m.out(sq[dfa.start], vec![(u, one_fx)], Fx::ZERO);
    l2.mlps.push(m);
    l2.mlps.extend(addsub_mlps(cfg, &np2, &ff, &d1, carry, true, false)?);
    let mut mpad = vec![zero; w - 1];
    mpad.push(ismask);
    l2.mlps.extend(addsub_mlps(cfg, &d1, &mpad, &d2, carry, true, false)?);
    l2.mlps.push(sbin_mlp(cfg, &d2, &ts));
    sb.layers.push(l2);

    // layer 3: read w_s, detect s = N (F - s = 1), step the automaton
    let ws_ = sb.slot(nsig);
    let gap = sb.slot(w);
    let last = sb.alloc(1);
    let r = sb.slot(outputs.len());
    let mut l3 = LayerB::new("cot step");
    l3.heads.push(match_head(cfg, &ts, &id, one, &inp, ws_[0]));
    l3.mlps.extend(addsub_mlps(cfg, &ff, &d2, &gap, carry, true, false)?);
    let mut m = MlpB::linear();
    let mut terms: Vec<(usize, i64)> = gap[..w - 1].iter().map(|&c| (c, -1)).collect();
    terms.push((gap[w - 1], 1));
    let u = unit(&mut m, cfg, &terms, 0);
    m.out(last, vec![(u, one_fx)], Fx::ZERO);
    l3.mlps.push(m);
    let mut m = MlpB::linear();
    let mut rows: Vec<Vec<(usize, Fx)>> = vec![Vec::new(); outputs.len()];
    for q in 0..nq {
        for a in 0..nsig {
            let t = dfa.delta[q][a];
            let uf = unit(&mut m, cfg, &[(sq[q], 1), (ws_[a], 1), (last, 1)], -2);
            rows[if dfa.accept[t] { nq } else { nq + 1 }].push((uf, one_fx));
            let us = unit(&mut m, cfg, &[(sq[q], 1), (ws_[a], 1), (last, -1)], -1);
            rows[t].push((us, one_fx));
        }
    }
    for (o, row) in rows.into_iter().enumerate() {
        m.out(r[o], row, Fx::ZERO);
    }
    l3.mlps.push(m);
    sb.layers.push(l3);
    for (o, &c) in r.iter().enumerate() {
        sb.out[o] = vec![(c, cfg.bf())];
    }
    sb.notes.push("dfa step core".into());
    sb.finish()
}
