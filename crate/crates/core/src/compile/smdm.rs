//! MDMs that never resample a cell, simulating any MDM.
//!
//! `T` steps over `P` cells become `T` fresh blocks of `P` cells. The
//! planner opens the first still-masked block. The predictor loads the
//! frontier (the last unmasked block, or the all-masked first block before
//! any step) into every cell, runs one source step with keys past the first
//! block ignored, and lets every cell copy its new symbol from the first
//! block. A cell the source leaves masked is written as [`MASKED`].

use crate::error::{Error, Result};
use crate::fxp::Fx;
use crate::gadgets::{argmax_mlp, build_select_block, match_head, wrap_escape, wrap_ignore, LayerB, MlpB, SpecB};
use crate::models::{MDMSpec, PlannerClass};
use crate::tfcore::pe::{bits_for, k, len, n, Expr};
use crate::tfcore::{Kind, MASK};

use super::cert::{var, Certificate, Var};
use super::plt::{back_pairs, readout, reinit, same_shape};
use super::{side_by_side, unit};

/// Cell symbol standing for a masked source cell.
pub const MASKED: &str = "<m'>";

/// Mask-dominated MDM running `T` steps over `T P` cells for a source run
/// of `T` steps over `P` cells, on inputs up to `max_n` symbols (ignored
/// when the source has a fixed length). Block `t` of the target holds the
/// source's cells after step `t`. Decoding is exact under argmax only.
pub fn mdm_to_smdm(mdm: &MDMSpec, t: usize, p: usize, max_n: usize) -> Result<(MDMSpec, Certificate)> {
    mdm.validate()?;
    let (pl, pr) = (&mdm.planner, &mdm.predictor);
    same_shape(pl, pr)?;
    if t == 0 || p == 0 {
        return Err(Error::Inapplicable("needs at least one step and one cell".into()));
    }
    let alpha = pr.alphabet.clone();
    if alpha.iter().any(|s| s == MASKED) {
        return Err(Error::Spec(format!("MDM alphabet already uses `{MASKED}`")));
    }
    let cfg = mdm.cfg();
    let one_fx = cfg.one();
    let mask_sym = pr.symbol(MASK)?;
    let keep: Vec<usize> = (0..pr.outputs.len()).filter(|&o| pr.outputs[o] != MASK).collect();
    let nout = keep.len();
    let (ti, pi) = (t as i64, p as i64);
    let fixed_len = pl.fixed_len.map(|f| f + (t - 1) * p);
    let max_len = fixed_len.unwrap_or(max_n + t * p);

    let mut talpha = alpha.clone();
    talpha.push(MASKED.into());
    let mut touts: Vec<String> = keep.iter().map(|&o| pr.outputs[o].clone()).collect();
    touts.push(MASKED.into());

    let cells = len().sub(k(ti * pi));
    let mut planner = build_select_block(cfg, &talpha, p, Some(n().gt(cells.clone())), max_len)?;
    planner.fixed_len = fixed_len;

    let mut sb = SpecB::new(cfg, talpha.clone(), touts.clone());
    sb.mask = pr.mask;
    sb.fixed_len = fixed_len;
    let masked = sb.alloc(1);
    let ys = sb.slot(alpha.len());
    for s in 0..talpha.len() {
        let col = if s == alpha.len() { mask_sym } else { s };
        sb.embed[s].push((ys[col], one_fx));
        if s == mask_sym {
            sb.embed[s].push((masked, one_fx));
        }
    }
    let one = sb.pe_one();
    let id = sb.pe_sbin(bits_for(max_len), n());
    let first = sb.pe_ind(n().eq(k(1)));
    // cells start after N = len - T P; j is the cell's index within its block
    let nn = || len().sub(k(ti * pi));
    let is_cell = || n().gt(nn());
    let j = || n().sub(nn()).sub(k(1)).rem(k(pi)).add(k(1));
    let last_block = || n().gt(nn().add(k((ti - 1) * pi)));
    let cell = sb.pe_ind(is_cell());
    let input = sb.pe_ind(is_cell().not());
    let b1 = sb.pe_ind(is_cell().and(n().le(nn().add(k(pi)))));
    let last = sb.pe_ind(last_block());
    let inner = is_cell().and(last_block().not());
    let nlc = sb.pe_ind(inner.clone());
    let src_pos: Expr = is_cell().then(nn().add(j()), n());
    let a_pl = sb.alloc(pl.d);
    let a_pr = sb.alloc(pr.d);
    let src_len = len().sub(k((ti - 1) * pi));
    sb.pe.push(a_pl, Kind::Sub { n: src_pos.clone(), len: src_len.clone(), pe: pl.pe.clone() });
    sb.pe.push(a_pr, Kind::Sub { n: src_pos.clone(), len: src_len, pe: pr.pe.clone() });
    let jb = bits_for(p + 1);
    let jq = sb.pe_sbin(jb, is_cell().then(j(), k(0)));
    let nxt = sb.pe_sbin(id.len(), inner.then(n().add(k(pi)), n()));
    let home = sb.pe_sbin(id.len(), src_pos);
    let past_first = sb.pe_ind(n().gt(nn().add(k(pi))));

    let nm = sb.alloc(1);
    let nf = sb.alloc(1);
    let s_in = sb.slot(alpha.len());
    let x = sb.slot(alpha.len());
    let r_pl = sb.alloc(pl.d);
    let r_pr = sb.alloc(pr.d);
    let lg_pl = sb.slot(2);
    let u = sb.slot(2);
    let lg_pr = sb.slot(nout);
    let v = sb.slot(nout);
    let snew = sb.slot(alpha.len());
    let snc = sb.slot(alpha.len());

    // frontier: unmasked with the next block masked, unmasked in the last
    // block, or the first block while it is still masked
    let mut l = LayerB::new("find the frontier");
    l.heads.push(match_head(cfg, &nxt, &id, one, &[masked], nm));
    let mut m = MlpB::linear();
    let fa = unit(&mut m, cfg, &[(masked, -1), (nm, 1), (nlc, 1)], -1);
    let fb = unit(&mut m, cfg, &[(masked, -1), (last, 1)], 0);
    let fc = unit(&mut m, cfg, &[(masked, 1), (b1, 1)], -1);
    let neg = cfg.neg(one_fx);
    m.out(nf, vec![(fa, neg), (fb, neg), (fc, neg)], one_fx);
    l.mlps.push(m);
    sb.layers.push(l);

    let mut l = LayerB::new("load the frontier");
    l.heads.push(match_head(cfg, &jq, &jq, one, &ys, s_in[0]));
    let mut l = wrap_escape(cfg, &wrap_ignore(cfg, &l, nf, one), input, first);
    let mut m = MlpB::linear();
    for s in 0..alpha.len() {
        let a = unit(&mut m, cfg, &[(ys[s], 1), (cell, -1)], 0);
        let b = unit(&mut m, cfg, &[(cell, 1), (s_in[s], 1)], -1);
        m.out(x[s], vec![(a, one_fx), (b, one_fx)], Fx::ZERO);
    }
    l.mlps.push(m);
    l.mlps.push(reinit(cfg, pl, &x, a_pl, r_pl));
    l.mlps.push(reinit(cfg, pr, &x, a_pr, r_pr));
    sb.layers.push(l);

    let ll = pl.layers.len().max(pr.layers.len());
    for li in 0..ll {
        let fused = side_by_side(&[(pl, r_pl), (pr, r_pr)], li, &format!("source layer {}", li + 1));
        sb.layers.push(wrap_ignore(cfg, &fused, past_first, one));
    }

    let mut l = LayerB::new("source step");
    l.mlps.push(readout(cfg, &pl.out, &[0, 1], r_pl, &lg_pl));
    l.mlps.push(argmax_mlp(cfg, &lg_pl, &u, true));
    l.mlps.push(readout(cfg, &pr.out, &keep, r_pr, &lg_pr));
    l.mlps.push(argmax_mlp(cfg, &lg_pr, &v, true));
    let mut m = MlpB::linear();
    for s in 0..alpha.len() {
        let a = unit(&mut m, cfg, &[(x[s], 1), (u[1], -1)], 0);
        let mut row = vec![(a, one_fx)];
        for (i, &o) in keep.iter().enumerate() {
            if pr.symbol(&pr.outputs[o])? == s {
                let b = unit(&mut m, cfg, &[(u[1], 1), (v[i], 1)], -1);
                row.push((b, one_fx));
            }
        }
        m.out(snew[s], row, Fx::ZERO);
    }
    l.mlps.push(m);
    sb.layers.push(l);

    let mut l = LayerB::new("copy from the first block");
    l.heads.push(match_head(cfg, &home, &id, one, &snew, snc[0]));
    sb.layers.push(l);
    for (o, name) in touts.iter().enumerate() {
        let s = if name == MASKED { mask_sym } else { pr.symbol(name)? };
        sb.out[o] = vec![(snc[s], one_fx)];
    }
    sb.notes.push(format!("simple MDM, T={t}, P={p}"));
    let predictor = sb.finish()?;

    let target = MDMSpec { planner, predictor, class: PlannerClass::MaskDominated, fanout: Some(p) };
    let mut cert = Certificate::new("mdm", "smdm").bind(Var::T, ti).bind(Var::P, pi);
    cert.steps = Some(var(Var::T));
    cert.padding = Some(var(Var::T).mul(var(Var::P)));
    cert.alignment = back_pairs(p);
    cert.notes.push(format!("`{MASKED}` in the output stands for a masked cell"));
    Ok((target, cert))
}
