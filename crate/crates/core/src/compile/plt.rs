//! Masked diffusion models and padded looped transformers, both directions,
//! plus the standalone dump and read layers that move a binary residual
//! through discrete cells.

use crate::error::{Error, Result};
use crate::fxp::{Cfg, Fx, Mat};
use crate::gadgets::{argmax_mlp, match_head, mlp_clear, mlp_moves, wrap_ignore, LayerB, MlpB, SpecB};
use crate::models::{plt_run_tokens, MDMSpec, NoiseStream, PLTSpec, PlannerClass};
use crate::oracle::{shortlex, Alignment, Idx};
use crate::tfcore::pe::{bits_for, k, len, n, Expr};
use crate::tfcore::{Kind, Pe, TransformerSpec, MASK, PAD};

use super::cert::{var, Certificate, Var};
use super::{unit, unitf};

/// Cell symbols of [`plt_to_mdm`].
pub const BIT0: &str = "<b0>";
pub const BIT1: &str = "<b1>";

pub(crate) fn same_shape(a: &TransformerSpec, b: &TransformerSpec) -> Result<()> {
    if a.cfg != b.cfg || a.mask != b.mask || a.fixed_len != b.fixed_len {
        return Err(Error::Spec("planner and predictor differ in precision, masking or length".into()));
    }
    Ok(())
}

/// Moves realizing `dst = E[:, sym] + pe` from a one-hot symbol slice.
pub(crate) fn reinit(cfg: Cfg, spec: &TransformerSpec, y: &[usize], pe_at: usize, dst: usize) -> MlpB {
    let mut moves = Vec::new();
    for r in 0..spec.d {
        for (s, &yc) in y.iter().enumerate() {
            let e = spec.embed.get(r, s);
            if !e.is_zero() {
                moves.push((yc, dst + r, e));
            }
        }
        if pe_covers(&spec.pe, r) {
            moves.push((pe_at + r, dst + r, cfg.one()));
        }
    }
    mlp_moves(cfg, &moves)
}

fn pe_covers(pe: &Pe, r: usize) -> bool {
    pe.fields.iter().any(|f| (f.at..f.at + f.kind.width()).contains(&r))
}

/// `out[o] += sum_c W[o][c] x[src + c]` folded in coordinate order.
pub(crate) fn readout(cfg: Cfg, w: &Mat, rows: &[usize], src: usize, out: &[usize]) -> MlpB {
    let mut moves = Vec::new();
    for (i, &o) in rows.iter().enumerate() {
        for c in 0..w.cols {
            let x = w.get(o, c);
            if !x.is_zero() {
                moves.push((src + c, out[i], x));
            }
        }
    }
    mlp_moves(cfg, &moves)
}

/// Looped transformer running one MDM step per iteration over `P` padding
/// cells. The loop re-embeds the current symbols for the planner, decodes
/// its choice with an argmax MLP, does the same for the predictor over the
/// sampled outputs, writes the selected cells and clears its scratch. With
/// `stochastic`, per-iteration noise lands on the logit slots in the MDM's
/// draw layout, so equal seeds give equal runs.
pub fn mdm_to_plt(mdm: &MDMSpec, t: usize, p: usize, stochastic: bool) -> Result<(PLTSpec, Certificate)> {
    mdm.validate()?;
    let (pl, pr) = (&mdm.planner, &mdm.predictor);
    same_shape(pl, pr)?;
    let cfg = mdm.cfg();
    let alpha = pr.alphabet.clone();
    if alpha.iter().any(|s| s == PAD) {
        return Err(Error::Spec("MDM alphabet already uses the padding symbol".into()));
    }
    let mut palpha = alpha.clone();
    palpha.push(PAD.to_string());
    let keep: Vec<usize> = (0..pr.outputs.len()).filter(|&o| pr.outputs[o] != MASK).collect();
    let nout = keep.len();
    let one_fx = cfg.one();

    let mut sb = SpecB::new(cfg, palpha.clone(), alpha.clone());
    sb.mask = pl.mask;
    sb.fixed_len = pl.fixed_len;
    let y = sb.slot(alpha.len());
    for (s, &c) in y.iter().enumerate() {
        sb.embed[s].push((c, one_fx));
    }
    let mask_sym = pr.symbol(MASK)?;
    sb.embed[alpha.len()] = vec![(y[mask_sym], one_fx)];
    let iscell = sb.pe_ind(n().gt(len().sub(k(p as i64))));
    let a_pl = sb.alloc(pl.d);
    sb.pe.fields.extend(pl.pe.shifted(a_pl).fields);
    let a_pr = sb.alloc(pr.d);
    sb.pe.fields.extend(pr.pe.shifted(a_pr).fields);
    let r_pl = sb.alloc(pl.d);
    let r_pr = sb.alloc(pr.d);
    let noise = sb.slot(2 + nout);
    let u = sb.slot(2);
    let v = sb.slot(nout);
    let sel = sb.alloc(1);

    let mut l = LayerB::new("planner embed");
    l.mlps.push(reinit(cfg, pl, &y, a_pl, r_pl));
    sb.layers.push(l);
    for layer in &pl.layers {
        sb.layers.push(LayerB::import(layer, &|c| r_pl + c));
    }
    let mut l = LayerB::new("planner decide");
    l.mlps.push(readout(cfg, &pl.out, &[0, 1], r_pl, &noise[..2]));
    l.mlps.push(argmax_mlp(cfg, &noise[..2], &u, true));
    sb.layers.push(l);

    let mut l = LayerB::new("predictor embed");
    l.mlps.push(reinit(cfg, pr, &y, a_pr, r_pr));
    sb.layers.push(l);
    for layer in &pr.layers {
        sb.layers.push(LayerB::import(layer, &|c| r_pr + c));
    }
    let mut l = LayerB::new("predictor decide");
    l.mlps.push(readout(cfg, &pr.out, &keep, r_pr, &noise[2..]));
    l.mlps.push(argmax_mlp(cfg, &noise[2..], &v, true));
    sb.layers.push(l);

    // Y_s <- sel ? V_s : Y_s
    let mut l = LayerB::new("write cells");
    let mut m = MlpB::linear();
    let us = unit(&mut m, cfg, &[(u[1], 1), (iscell, 1)], -1);
    m.out(sel, vec![(us, one_fx)], Fx::ZERO);
    l.mlps.push(m);
    let mut m = MlpB::linear();
    for (s, &ys) in y.iter().enumerate() {
        let vs: Vec<usize> = keep.iter().enumerate().filter(|(_, &o)| pr.symbol(&pr.outputs[o]).ok() == Some(s)).map(|(i, _)| v[i]).collect();
        let a = unit(&mut m, cfg, &[(ys, 1), (sel, -1)], 0);
        let c = unit(&mut m, cfg, &[(ys, 1)], 0);
        let mut row = vec![(a, one_fx), (c, cfg.neg(one_fx))];
        for vc in vs {
            let b = unit(&mut m, cfg, &[(vc, 1), (sel, 1)], -1);
            row.push((b, one_fx));
        }
        m.out(ys, row, Fx::ZERO);
    }
    l.mlps.push(m);
    let mut scratch: Vec<usize> = (r_pl..r_pl + pl.d + pr.d).collect();
    scratch.extend(&noise);
    scratch.extend(&u);
    scratch.extend(&v);
    scratch.push(sel);
    l.mlps.push(mlp_clear(cfg, &scratch));
    sb.layers.push(l);
    for (s, &c) in y.iter().enumerate() {
        sb.out[s] = vec![(c, one_fx)];
    }
    sb.notes.push(format!("mdm loop body, {p} cells"));
    let base = sb.finish()?;
    let nl = base.layers.len();
    let mut plt = PLTSpec::looped(base, (1, nl), p);
    if stochastic {
        plt.stochastic = true;
        plt.noise_slice = Some((noise[0], 2 + nout));
    }
    let mut cert = Certificate::new("mdm", "plt").bind(Var::T, t as i64).bind(Var::P, p as i64);
    cert.steps = Some(var(Var::T));
    cert.padding = Some(var(Var::P));
    cert.alignment = back_pairs(p);
    Ok((plt, cert))
}

/// Pairs the last `p` outputs of both machines.
pub(crate) fn back_pairs(p: usize) -> Alignment {
    Alignment::Pairs((0..p).map(|i| (Idx::Back(i), Idx::Back(i))).collect())
}

/// Symbols decoded from a PLT run, one per row.
pub fn plt_symbols<S: AsRef<str>>(plt: &PLTSpec, w: &[S], t: usize, noise: Option<&mut NoiseStream>) -> Result<(Vec<String>, crate::models::RunTrace)> {
    let (st, tr) = crate::models::plt_run(plt, w, t, noise)?;
    let ids = crate::tfcore::decode(&st, &plt.base.out, plt.base.cfg)?;
    Ok((ids.into_iter().map(|i| plt.base.outputs[i].clone()).collect(), tr))
}

// ------------------------------------------------------------------ PLT -> MDM

/// Cell-addressing fields shared by the dump and read layers. Rows are
/// `1..=rows`; row `i`, coordinate `c` lives at cell `(i-1) D + c + 1`,
/// i.e. position `n0 + (i-1) D + c + 1`.
struct Cells {
    one: usize,
    id: Vec<usize>,
    /// Residual slice of the simulated row.
    v: Vec<usize>,
}

/// Row simulated at position `n`. Positions past the last row shadow a
/// real row, so every query of the simulated layers finds its keys.
fn shadow(rows: Expr) -> Expr {
    n().le(rows.clone()).then(n(), n().sub(k(1)).rem(rows).add(k(1)))
}

/// `D` heads reading the cell bits of row `row` into `cells.v`.
fn read_layer(sb: &mut SpecB, c: &Cells, bit: usize, n0: Expr, d: usize, row: Expr) -> LayerB {
    let cfg = sb.cfg;
    let bits = c.id.len();
    let mut l = LayerB::new("read cells");
    for j in 0..d {
        let t = n0.clone().add(row.clone().sub(k(1)).mul(k(d as i64))).add(k(j as i64 + 1));
        let tq = sb.pe_sbin(bits, t);
        l.heads.push(match_head(cfg, &tq, &c.id, c.one, &[bit], c.v[j]));
    }
    l
}

/// Cell `m` reads row `i(m)` and emits bit `c(m)` of `row - pe(row)` as
/// logits over (`<b0>`, `<b1>`) in `out0`, `out1`.
fn dump_layer(sb: &mut SpecB, c: &Cells, n0: Expr, d: usize, rows: Expr, pe: &Pe) -> (LayerB, usize) {
    let cfg = sb.cfg;
    let one_fx = cfg.one();
    let bits = c.id.len();
    let rel = n().sub(n0).sub(k(1));
    let row = rel.clone().div(k(d as i64)).add(k(1));
    let in_range = rel.clone().ge(k(0)).and(row.clone().le(rows.clone()));
    let tq = sb.pe_sbin(bits, in_range.then(row.clone(), n()));
    let s = sb.slot(d);
    let q = sb.alloc(d);
    sb.pe.push(q, Kind::Sub { n: row, len: rows, pe: pe.clone() });
    let e = sb.pe_onehot(d, rel.rem(k(d as i64)));
    let bit = sb.alloc(1);
    let mut l = LayerB::new("dump cells");
    l.heads.push(match_head(cfg, &tq, &c.id, c.one, &c.v, s[0]));
    let mut m = MlpB::linear();
    let mut row_w = Vec::new();
    for j in 0..d {
        let u = unitf(&mut m, &[(s[j], one_fx), (q + j, cfg.neg(one_fx)), (e[j], one_fx)], cfg.neg(one_fx));
        row_w.push((u, one_fx));
    }
    m.out(bit, row_w, Fx::ZERO);
    l.mlps.push(m);
    (l, bit)
}

fn bit_alphabet(base: &[String]) -> Vec<String> {
    let mut a = base.to_vec();
    a.extend([BIT0, BIT1, MASK].map(String::from));
    a
}

/// Standalone dump and read specs over `rows` rows of width `d`, zero
/// positional encoding. The dump spec takes the row values through its
/// noise argument (in its first `d` coordinates) and emits `<b0>`/`<b1>`
/// at the `rows * d` cells following one `&` per row; the read spec loads
/// the cells back into its first `d` coordinates of rows `1..=rows`.
pub fn dump_read_pair(cfg: Cfg, d: usize, rows: usize) -> Result<(TransformerSpec, TransformerSpec)> {
    let alpha = bit_alphabet(&["&".to_string()]);
    let total = rows + rows * d;
    let n0 = k(rows as i64);
    let build = |dump: bool| -> Result<TransformerSpec> {
        let outs = if dump { vec![BIT0.to_string(), BIT1.to_string()] } else { alpha.clone() };
        let mut sb = SpecB::new(cfg, alpha.clone(), outs);
        sb.fixed_len = Some(total);
        let v = sb.slot(d);
        let bit = sb.alloc(1);
        sb.embed[2].push((bit, cfg.one()));
        let one = sb.pe_one();
        let id = sb.pe_sbin(bits_for(total), n());
        let cells = Cells { one, id, v };
        if dump {
            let (l, b) = dump_layer(&mut sb, &cells, n0.clone(), d, k(rows as i64), &Pe::default());
            sb.layers.push(l);
            sb.out[1] = vec![(b, cfg.one())];
            sb.out[0] = vec![(one, cfg.ratio(1, 2))];
        } else {
            let l = read_layer(&mut sb, &cells, bit, n0.clone(), d, shadow(k(rows as i64)));
            sb.layers.push(l);
        }
        sb.finish()
    };
    Ok((build(true)?, build(false)?))
}

/// Probe that every loop iteration leaves `H - PE` binary on the first
/// `T` iterations of all inputs up to length `probe_len`.
fn probe_binary(plt: &PLTSpec, t: usize, probe_len: usize) -> Result<()> {
    let base = &plt.base;
    let cfg = base.cfg;
    let syms: Vec<String> = base.alphabet.iter().filter(|s| *s != PAD && *s != MASK).cloned().collect();
    let pad = if plt.pad > 0 { Some(base.symbol(PAD)?) } else { None };
    for w in shortlex(&syms, 0, probe_len) {
        let mut toks = base.encode(&w)?;
        toks.extend(std::iter::repeat_n(pad.unwrap_or(0), plt.pad));
        if toks.is_empty() || base.fixed_len.is_some_and(|f| f != toks.len()) {
            continue;
        }
        let rows = toks.len();
        let mut bad = None;
        let mut check = |it: usize, h: &Mat| {
            for r in 0..rows {
                let pe = base.pe.eval(cfg, r as i64 + 1, rows as i64, base.d);
                for c in 0..base.d {
                    let x = cfg.sub(h.get(r, c), pe[c]);
                    if x != Fx::ZERO && x != cfg.one() && bad.is_none() {
                        bad = Some(format!("iteration {it}, row {}, coordinate {c} holds {} on {:?}", r + 1, cfg.show(x), w));
                    }
                }
            }
        };
        plt_run_tokens(plt, &toks, t, None, Some(&mut check))?;
        if let Some(b) = bad {
            return Err(Error::Inapplicable(format!("loop residual is not binary: {b}")));
        }
    }
    Ok(())
}

/// MDM that replays one loop iteration per denoising step. The predictor
/// reads the residual rows back from `(N+P) D` bit cells (or embeds the
/// input on the first step, when the cells are still masked), applies the
/// loop block with the cells ignored, and dumps every row into the cells
/// again. The planner selects every cell every step. Needs a deterministic
/// PLT whose loop starts at the first layer and whose loop residual minus
/// its positional encoding is binary; suffix layers are not simulated, so
/// the alignment is with the residual after the last iteration.
pub fn plt_to_mdm(plt: &PLTSpec, t: usize, max_n: usize, probe_len: usize) -> Result<(MDMSpec, Certificate)> {
    plt.validate()?;
    if plt.stochastic {
        return Err(Error::Inapplicable("stochastic PLTs are not compiled".into()));
    }
    if plt.loop_range.0 != 1 {
        return Err(Error::Inapplicable("loop must start at the first layer".into()));
    }
    probe_binary(plt, t, probe_len)?;
    let base = &plt.base;
    let cfg = base.cfg;
    let one_fx = cfg.one();
    let d = base.d;
    let p = plt.pad;
    let dd = d as i64;
    let inputs: Vec<String> = base.alphabet.iter().filter(|s| *s != PAD).cloned().collect();
    let alpha = bit_alphabet(&inputs);
    if inputs.iter().any(|s| s == BIT0 || s == BIT1 || s == MASK) {
        return Err(Error::Spec("PLT alphabet collides with the cell symbols".into()));
    }
    let max_len = max_n + (max_n + p) * d;
    let bits = bits_for(max_len);
    // N = (len - P D) / (D + 1)
    let big_n = || len().sub(k(p as i64 * dd)).div(k(dd + 1));
    let rows = || big_n().add(k(p as i64));
    let n_bit0 = alpha.iter().position(|s| s == BIT0).unwrap();
    let n_mask = alpha.iter().position(|s| s == MASK).unwrap();

    let mut pl = SpecB::new(cfg, alpha.clone(), vec!["0".into(), "1".into()]);
    let c1 = pl.pe_ind(n().gt(big_n()));
    pl.out[1] = vec![(c1, one_fx)];
    let half = pl.pe_one();
    pl.out[0] = vec![(half, cfg.ratio(1, 2))];
    pl.notes.push("every cell".into());
    let planner = pl.finish()?;

    let mut sb = SpecB::new(cfg, alpha.clone(), vec![BIT0.into(), BIT1.into()]);
    sb.mask = base.mask;
    // the gate folds `first` and `one` before `zc`, so `zc` comes last
    let v = sb.slot(d);
    let bit = sb.alloc(1);
    let masked = sb.alloc(1);
    let first = sb.alloc(1);
    let one = sb.pe_one();
    let z = sb.slot(d);
    let zc = sb.slot(d);
    sb.embed[n_bit0 + 1].push((bit, one_fx));
    sb.embed[n_mask].push((masked, one_fx));
    for (s, sym) in inputs.iter().enumerate() {
        let col = base.symbol(sym)?;
        for r in 0..d {
            let e = base.embed.get(r, col);
            if !e.is_zero() {
                sb.embed[s].push((z[r], e));
            }
        }
    }
    let rho = shadow(rows());
    sb.pe.push(v[0], Kind::Sub { n: rho.clone(), len: rows(), pe: base.pe.clone() });
    let id = sb.pe_sbin(bits, n());
    let ispad = sb.pe_ind(rho.clone().gt(big_n()));
    let beyond = sb.pe_ind(n().gt(rows()));
    let cells = Cells { one, id: id.clone(), v: v.clone() };

    // read: bits of the row, the first-step flag, then the input embedding
    let mut l = read_layer(&mut sb, &cells, bit, big_n(), d, rho.clone());
    let tf = sb.pe_sbin(bits, big_n().add(k(1)).min(len()));
    l.heads.push(match_head(cfg, &tf, &id, one, &[masked], first));
    let tr = sb.pe_sbin(bits, rho);
    l.heads.push(match_head(cfg, &tr, &id, one, &z, zc[0]));
    if p > 0 {
        let padc = base.symbol(PAD)?;
        let mv: Vec<_> = (0..d).filter(|&r| !base.embed.get(r, padc).is_zero()).map(|r| (ispad, zc[r], base.embed.get(r, padc))).collect();
        l.mlps.push(mlp_moves(cfg, &mv));
    }
    let mut m = MlpB::linear();
    for r in 0..d {
        let bf = cfg.bf();
        let a = m.unit(vec![(first, bf), (one, cfg.neg_bf()), (zc[r], one_fx)], Fx::ZERO);
        let b = m.unit(vec![(first, bf), (one, cfg.neg_bf()), (zc[r], cfg.neg(one_fx))], Fx::ZERO);
        m.out(v[r], vec![(a, one_fx), (b, cfg.neg(one_fx))], Fx::ZERO);
    }
    l.mlps.push(m);
    l.mlps.push(mlp_clear(cfg, &zc));
    sb.layers.push(l);
    let (l1, l2) = plt.loop_range;
    for layer in &base.layers[l1 - 1..l2] {
        sb.layers.push(wrap_ignore(cfg, &LayerB::import(layer, &|c| v[0] + c), beyond, one));
    }
    let (l, b) = dump_layer(&mut sb, &cells, big_n(), d, rows(), &base.pe);
    sb.layers.push(l);
    sb.out[1] = vec![(b, one_fx)];
    sb.out[0] = vec![(one, cfg.ratio(1, 2))];
    sb.notes.push(format!("plt replay, D={d}, P={p}"));
    let predictor = sb.finish()?;

    let mdm = MDMSpec { planner, predictor, class: PlannerClass::Deterministic, fanout: None };
    let mut cert = Certificate::new("plt", "mdm").bind(Var::T, t as i64).bind(Var::P, p as i64).bind(Var::D, dd);
    cert.steps = Some(var(Var::T));
    cert.padding = Some(var(Var::N).add(var(Var::P)).mul(var(Var::D)));
    cert.notes.push("cells hold the loop residual minus its positional encoding, row-major".into());
    Ok((mdm, cert))
}

/// Row-major `<b0>`/`<b1>` rendering of `H - PE` after `t` iterations,
/// the quantity [`plt_to_mdm`] keeps in its cells.
pub fn plt_bits<S: AsRef<str>>(plt: &PLTSpec, w: &[S], t: usize) -> Result<Vec<String>> {
    let base = &plt.base;
    let cfg = base.cfg;
    let mut toks = base.encode(w)?;
    if plt.pad > 0 {
        toks.extend(std::iter::repeat_n(base.symbol(PAD)?, plt.pad));
    }
    let (st, _) = plt_run_tokens(plt, &toks, t, None, None)?;
    let rows = toks.len();
    let mut out = Vec::new();
    for r in 0..rows {
        let pe = base.pe.eval(cfg, r as i64 + 1, rows as i64, base.d);
        for c in 0..base.d {
            let x = cfg.sub(st.h.get(r, c), pe[c]);
            out.push(if x == cfg.one() { BIT1.into() } else { BIT0.into() });
        }
    }
    Ok(out)
}
