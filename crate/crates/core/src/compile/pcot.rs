//! Parallel chain of thought and masked diffusion, both directions.

use crate::error::{Error, Result};
use crate::fxp::Fx;
use crate::gadgets::{argmax_mlp, build_select_block, match_head, wrap_escape, wrap_focus, LayerB, MlpB, SpecB};
use crate::models::{MDMSpec, PCoTSpec, PlannerClass};
use crate::tfcore::pe::{bits_for, k, n, Expr};
use crate::tfcore::{Kind, MaskMode, MASK, PAD};

use super::cert::{var, Certificate, Var};
use super::mask::{emulate_causal, Region};
use super::plt::{back_pairs, readout, same_shape};
use super::unit;

/// MDM replaying a pCoT run on inputs of length `N`. Its cells are an
/// `(N+P)^2` auxiliary region followed by the `P = T P'` answer cells;
/// the planner opens the next `P'` answer cells each step, and the
/// predictor runs the causal core over `w` and the answer cells inside the
/// auxiliary region, then reads each answer cell's residual back. Needs a
/// core whose positional encoding ignores the length, since the pCoT
/// sequence grows while the MDM's does not.
pub fn pcot_to_mdm(pcot: &PCoTSpec, nn: usize) -> Result<(MDMSpec, Certificate)> {
    let core = &pcot.core;
    core.validate()?;
    if core.mask != MaskMode::Causal {
        return Err(Error::Spec("pCoT core must be causal".into()));
    }
    if core.pe.uses_len() || core.fixed_len.is_some() {
        return Err(Error::Inapplicable("core positional encoding depends on the sequence length".into()));
    }
    core.symbol(MASK)?;
    let cfg = core.cfg;
    let p = pcot.steps * pcot.pprime;
    let nt = (nn + p) as i64;
    let aux = nt * nt;
    let total = nn + aux as usize + p;
    let alpha = core.alphabet.clone();

    let elig = n().gt(crate::tfcore::pe::len().sub(k(p as i64)));
    let mut planner = build_select_block(cfg, &alpha, pcot.pprime, Some(elig), total)?;
    planner.fixed_len = Some(total);

    let mut sb = SpecB::new(cfg, alpha.clone(), core.outputs.clone());
    sb.fixed_len = Some(total);
    let h = sb.alloc(core.d);
    let z = sb.slot(core.d);
    for s in 0..alpha.len() {
        for r in 0..core.d {
            let e = core.embed.get(r, s);
            if !e.is_zero() {
                sb.embed[s].push((z[r], e));
            }
        }
    }
    let one = sb.pe_one();
    let id = sb.pe_sbin(bits_for(total), n());
    let reg = Region { a0: nn as i64, nt, gap_after: nn as i64, gap: aux, pe_len: k(nt) };
    emulate_causal(&mut sb, core, &reg, h, &z, one, &id);

    let h2 = sb.alloc(core.d);
    let answer = n().gt(k(nn as i64 + aux));
    let tq = sb.pe_sbin(id.len(), answer.then(reg.out_pos(n().sub(k(aux))), n()));
    let hs: Vec<usize> = (h..h + core.d).collect();
    let mut l = LayerB::new("read answers");
    l.heads.push(match_head(cfg, &tq, &id, one, &hs, h2));
    sb.layers.push(l);
    for o in 0..core.outputs.len() {
        sb.out[o] = (0..core.d).filter(|&c| !core.out.get(o, c).is_zero()).map(|c| (h2 + c, core.out.get(o, c))).collect();
    }
    sb.notes.push(format!("pcot replay, N={nn}, P'={}", pcot.pprime));
    let predictor = sb.finish()?;

    let mdm = MDMSpec { planner, predictor, class: PlannerClass::MaskDominated, fanout: Some(pcot.pprime) };
    let mut cert = Certificate::new("pcot", "mdm").bind(Var::N, nn as i64).bind(Var::T, pcot.steps as i64).bind(Var::P, p as i64);
    cert.steps = Some(var(Var::T));
    let np = var(Var::N).add(var(Var::P));
    cert.padding = Some(var(Var::P).add(np.clone().mul(np)));
    cert.alignment = back_pairs(p);
    Ok((mdm, cert))
}

/// Symbols a [`mdm_to_pcot`] target emits: the MDM alphabet without the
/// mask, whose role the padding symbol takes.
fn pcot_outputs(alpha: &[String]) -> Vec<String> {
    let mut o: Vec<String> = alpha.iter().filter(|s| *s != MASK).cloned().collect();
    o.push(PAD.into());
    o
}

/// pCoT replaying `T` MDM steps on inputs of length `N` with `P` cells,
/// read on `w PAD^P`. Each step appends `L` chunks of `N + P` positions;
/// chunk `l` of a step runs fused planner and predictor layers `1..l`,
/// each layer focused on the chunk before (layer 1 on the previous step's
/// last chunk, read through a static copy of every position's own
/// embedding). The last chunk writes the new MDM state, with the padding
/// symbol standing for masked cells.
pub fn mdm_to_pcot(mdm: &MDMSpec, nn: usize, p: usize, t: usize) -> Result<(PCoTSpec, Certificate)> {
    mdm.validate()?;
    let (pl, pr) = (&mdm.planner, &mdm.predictor);
    same_shape(pl, pr)?;
    if pl.mask != MaskMode::Unmasked {
        return Err(Error::Spec("MDM planner and predictor must be unmasked".into()));
    }
    let x = nn + p;
    if pl.fixed_len.is_some_and(|f| f != x) {
        return Err(Error::Spec(format!("MDM is compiled for length {}", pl.fixed_len.unwrap())));
    }
    let alpha = pr.alphabet.clone();
    if alpha.iter().any(|s| s == PAD) {
        return Err(Error::Spec("MDM alphabet already uses the padding symbol".into()));
    }
    let cfg = mdm.cfg();
    let one_fx = cfg.one();
    let ll = pl.layers.len().max(pr.layers.len()).max(1);
    let xi = x as i64;
    let li = ll as i64;
    let mask_sym = pr.symbol(MASK)?;
    let keep: Vec<usize> = (0..pr.outputs.len()).filter(|&o| pr.outputs[o] != MASK).collect();
    let nout = keep.len();
    let dd = pl.d + pr.d;

    let mut calpha = alpha.clone();
    calpha.push(PAD.into());
    let outs = pcot_outputs(&alpha);
    let mut sb = SpecB::new(cfg, calpha, outs.clone());
    sb.mask = MaskMode::Causal;
    let h = sb.alloc(dd);
    let e = sb.alloc(dd);
    let y = sb.slot(alpha.len());
    let yc = sb.slot(alpha.len());
    for (s, col) in (0..alpha.len()).map(|s| (s, s)).chain(std::iter::once((alpha.len(), mask_sym))) {
        for r in 0..pl.d {
            let v = pl.embed.get(r, col);
            if !v.is_zero() {
                sb.embed[s].push((e + r, v));
            }
        }
        for r in 0..pr.d {
            let v = pr.embed.get(r, col);
            if !v.is_zero() {
                sb.embed[s].push((e + pl.d + r, v));
            }
        }
        sb.embed[s].push((y[col], one_fx));
    }
    // chunk c = (n-1) div x, token j; step chunks c >= 1 sit at depth lam
    let c = || n().sub(k(1)).div(k(xi));
    let j = || n().sub(k(1)).rem(k(xi)).add(k(1));
    let lam = || c().sub(k(1)).rem(k(li)).add(k(1));
    sb.pe.push(e, Kind::Sub { n: j(), len: k(xi), pe: pl.pe.clone() });
    sb.pe.push(e + pl.d, Kind::Sub { n: j(), len: k(xi), pe: pr.pe.clone() });
    let one = sb.pe_one();
    let max_len = x + t * ll * x;
    let id = sb.pe_sbin(bits_for(max_len), n());
    let chunks = 1 + t * ll;
    let cb = bits_for(chunks);
    let rk = sb.pe_sbin(cb, c());
    let iscell = sb.pe_ind(j().gt(k(nn as i64)));
    let stepped = c().ge(k(1));

    let tail = stepped.clone().then(c().sub(lam()).mul(k(xi)).add(j()), n());
    let tq = sb.pe_sbin(id.len(), tail);
    let mut l = LayerB::new("copy the previous step");
    let es: Vec<usize> = (e..e + dd).collect();
    l.heads.push(match_head(cfg, &tq, &id, one, &es, h));
    l.heads.push(match_head(cfg, &tq, &id, one, &y, yc[0]));
    sb.layers.push(l);

    for lp in 1..=ll {
        let mut fused = LayerB::new(&format!("fused layer {lp}"));
        for (spec, off) in [(pl, 0), (pr, pl.d)] {
            let Some(layer) = spec.layers.get(lp - 1) else { continue };
            let mut imp = LayerB::import(layer, &|cc| h + off + cc);
            if lp == 1 {
                let from_e = LayerB::import(layer, &|cc| e + off + cc);
                for (hd, he) in imp.heads.iter_mut().zip(from_e.heads) {
                    hd.k = he.k;
                    hd.v = he.v;
                }
            }
            fused.heads.extend(imp.heads);
            fused.mlps.extend(imp.mlps);
        }
        let live = stepped.clone().and(k(lp as i64).le(lam()));
        let rq_e: Expr = live.clone().then(c().sub(lam()).add(k(lp as i64 - 1)), c());
        let rq = sb.pe_sbin(cb, rq_e);
        let idle = sb.pe_ind(live.not());
        let first = sb.pe_ind(n().eq(k(1)));
        let wrapped = wrap_escape(cfg, &wrap_focus(cfg, &fused, &rq, &rk, one), idle, first);
        sb.layers.push(wrapped);
    }

    // readout: planner choice, predictor sample, then the new symbol
    let lg_pl = sb.slot(2);
    let u = sb.slot(2);
    let lg_pr = sb.slot(nout);
    let v = sb.slot(nout);
    let sel = sb.alloc(1);
    let snew = sb.slot(alpha.len());
    let last = sb.layers.last_mut().unwrap();
    last.mlps.push(readout(cfg, &pl.out, &[0, 1], h, &lg_pl));
    last.mlps.push(argmax_mlp(cfg, &lg_pl, &u, true));
    last.mlps.push(readout(cfg, &pr.out, &keep, h + pl.d, &lg_pr));
    last.mlps.push(argmax_mlp(cfg, &lg_pr, &v, true));
    let mut m = MlpB::linear();
    let us = unit(&mut m, cfg, &[(u[1], 1), (iscell, 1)], -1);
    m.out(sel, vec![(us, one_fx)], Fx::ZERO);
    last.mlps.push(m);
    let mut m = MlpB::linear();
    for s in 0..alpha.len() {
        let a = unit(&mut m, cfg, &[(yc[s], 1), (sel, -1)], 0);
        let mut row = vec![(a, one_fx)];
        for (i, &o) in keep.iter().enumerate() {
            if pr.symbol(&pr.outputs[o])? == s {
                let b = unit(&mut m, cfg, &[(v[i], 1), (sel, 1)], -1);
                row.push((b, one_fx));
            }
        }
        m.out(snew[s], row, Fx::ZERO);
    }
    last.mlps.push(m);
    for (o, name) in outs.iter().enumerate() {
        let s = if name == PAD { mask_sym } else { pr.symbol(name)? };
        sb.out[o] = vec![(snew[s], one_fx)];
    }
    sb.notes.push(format!("mdm replay, N={nn}, P={p}, L={ll}"));
    let core = sb.finish()?;

    let spec = PCoTSpec { core, steps: t, pprime: ll * x };
    let mut cert = Certificate::new("mdm", "pcot").bind(Var::N, nn as i64).bind(Var::P, p as i64).bind(Var::T, t as i64).bind(Var::L, li);
    cert.steps = Some(var(Var::T));
    cert.padding = Some(var(Var::L).mul(var(Var::T)).mul(var(Var::P).add(var(Var::N))));
    cert.alignment = back_pairs(p);
    cert.notes.push(format!("input is padded with P symbols; `{PAD}` in the output stands for a masked cell"));
    Ok((spec, cert))
}

/// Runs a [`mdm_to_pcot`] target on `w` and maps its last `P` symbols back
/// to MDM cells.
pub fn pcot_cells<S: AsRef<str>>(spec: &PCoTSpec, w: &[S], p: usize) -> Result<(Vec<String>, crate::models::RunTrace)> {
    let mut wp: Vec<String> = w.iter().map(|s| s.as_ref().to_string()).collect();
    wp.extend(std::iter::repeat_n(PAD.to_string(), p));
    let (ys, tr) = crate::models::pcot_run(spec, &wp, None)?;
    let cells = ys[ys.len().saturating_sub(p)..].iter().map(|s| if s == PAD { MASK.to_string() } else { s.clone() }).collect();
    Ok((cells, tr))
}
