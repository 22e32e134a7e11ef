//! Between unmasked and causal attention, for one input length `N`.
//!
//! Unmasked to causal lays `L + 1` blocks of `N` positions out so that each
//! block shares its first position with the last one of the block before
//! and holds a rotation of the input; layer `l` runs in block `l` and reads
//! block `l - 1`. Causal to unmasked gives the `b`-th of `N` blocks the
//! prefix `w_1 .. w_b`, runs every layer per block and then copies each
//! token's residual from the block where it is the last active position.

use crate::error::{Error, Result};
use crate::gadgets::{match_head, mlp_clear, mlp_move_clear, wrap_escape, wrap_focus, wrap_ignore, LayerB, SpecB};
use crate::oracle::{Alignment, Idx};
use crate::tfcore::pe::{bits_for, k, n, Cond, Expr};
use crate::tfcore::{Kind, MaskMode, TransformerSpec, PAD};

use super::cert::{num, var, Certificate, Var};

fn with_pad(tf: &TransformerSpec) -> Result<Vec<String>> {
    if tf.alphabet.iter().any(|s| s == PAD) {
        return Err(Error::Spec("source alphabet already uses the padding symbol".into()));
    }
    let mut a = tf.alphabet.clone();
    a.push(PAD.into());
    Ok(a)
}

fn check_len(tf: &TransformerSpec, nn: usize, mask: MaskMode) -> Result<()> {
    if tf.mask != mask {
        return Err(Error::Spec(format!("source must be {}", if mask == MaskMode::Causal { "causal" } else { "unmasked" })));
    }
    if nn == 0 {
        return Err(Error::Inapplicable("empty input".into()));
    }
    if tf.fixed_len.is_some_and(|f| f != nn) {
        return Err(Error::Spec(format!("source is compiled for length {}", tf.fixed_len.unwrap())));
    }
    Ok(())
}

/// Input embedding of `tf` into `z`; the padding symbol embeds nothing.
fn embed_into(sb: &mut SpecB, tf: &TransformerSpec, z: &[usize]) {
    for s in 0..tf.alphabet.len() {
        for r in 0..tf.d {
            let e = tf.embed.get(r, s);
            if !e.is_zero() {
                sb.embed[s].push((z[r], e));
            }
        }
    }
}

/// Output rows of `tf` read from the slice at `h`.
fn remap_out(sb: &mut SpecB, tf: &TransformerSpec, h: usize) {
    for o in 0..tf.outputs.len() {
        sb.out[o] = (0..tf.d).filter(|&c| !tf.out.get(o, c).is_zero()).map(|c| (h + c, tf.out.get(o, c))).collect();
    }
}

/// Causal machine reading `w PAD^{L(N-1)}` that ends with the unmasked
/// source's residuals in its last `N` positions (rotated by `L`).
pub fn unmasked_to_causal(tf: &TransformerSpec, nn: usize) -> Result<(TransformerSpec, Certificate)> {
    tf.validate()?;
    check_len(tf, nn, MaskMode::Unmasked)?;
    let cfg = tf.cfg;
    let ll = tf.layers.len();
    let ni = nn as i64;
    let total = nn + ll * (nn - 1);
    let mut sb = SpecB::new(cfg, with_pad(tf)?, tf.outputs.clone());
    sb.mask = MaskMode::Causal;
    sb.fixed_len = Some(total);
    let h = sb.alloc(tf.d);
    let z = sb.slot(tf.d);
    embed_into(&mut sb, tf, &z);
    let one = sb.pe_one();
    let bits = bits_for(total);
    let id = sb.pe_sbin(bits, n());
    let first = sb.pe_ind(n().eq(k(1)));

    // block b >= 1 starts at s_b = N + (b-1)(N-1), sharing it with block b-1
    let start = |b: usize| if b == 0 { 1 } else { ni + (b as i64 - 1) * (ni - 1) };
    let tok = if nn == 1 {
        k(1)
    } else {
        let b = n().sub(k(ni + 1)).div(k(ni - 1)).add(k(1));
        let j = n().sub(k(ni)).sub(b.clone().sub(k(1)).mul(k(ni - 1)));
        n().le(k(ni)).then(n(), j.sub(b).rem(k(ni)).add(k(1)))
    };
    sb.pe.push(h, Kind::Sub { n: tok.clone(), len: k(ni), pe: tf.pe.clone() });
    let tq = sb.pe_sbin(bits, tok);
    let mut l = LayerB::new("gather tokens");
    l.heads.push(match_head(cfg, &tq, &id, one, &z, h));
    sb.layers.push(l);

    for (li, layer) in tf.layers.iter().enumerate() {
        let s = start(li);
        let outside = if nn == 1 { Cond::True.not() } else { n().lt(k(s)).or(n().gt(k(s + ni - 1))) };
        let marker = sb.pe_ind(outside);
        let garbage = sb.pe_ind(n().lt(k(start(li + 1))));
        let imported = LayerB::import(layer, &|c| h + c);
        sb.layers.push(wrap_escape(cfg, &wrap_ignore(cfg, &imported, marker, one), garbage, first));
    }
    remap_out(&mut sb, tf, h);
    sb.notes.push(format!("unmasked to causal, N={nn}"));
    let spec = sb.finish()?;

    let pairs = (0..nn).map(|t| (Idx::Front(t), Idx::Back(nn - 1 - (t + ll) % nn))).collect();
    let mut cert = Certificate::new("unmasked", "causal").bind(Var::N, ni).bind(Var::L, ll as i64);
    cert.padding = Some(var(Var::L).mul(var(Var::N).sub(num(1))));
    cert.layers = Some(var(Var::L).add(num(1)));
    cert.alignment = Alignment::Pairs(pairs);
    cert.notes.push("keys reach each layer in rotated order; exact unless a weighted value sum saturates".into());
    Ok((spec, cert))
}

/// Where [`emulate_causal`] lays its blocks out.
pub(crate) struct Region {
    /// Positions before the first block.
    pub a0: i64,
    /// Tokens simulated; blocks are `nt x nt`.
    pub nt: i64,
    /// Token `r` is copied from position `r`, or `r + gap` when
    /// `r > gap_after`, slice `z`.
    pub gap_after: i64,
    pub gap: i64,
    /// Length the source's positional encoding sees.
    pub pe_len: Expr,
}

impl Region {
    fn rel(&self) -> Expr {
        n().sub(k(self.a0 + 1))
    }
    fn inside(&self) -> Cond {
        self.rel().ge(k(0)).and(self.rel().lt(k(self.nt * self.nt)))
    }
    fn block(&self) -> Expr {
        self.rel().div(k(self.nt)).add(k(1))
    }
    fn r(&self) -> Expr {
        self.rel().rem(k(self.nt)).add(k(1))
    }
    fn src(&self) -> Expr {
        self.r().le(k(self.gap_after)).then(self.r(), self.r().add(k(self.gap)))
    }
    /// Position of the last block's cell for token `r` (1-based).
    pub fn out_pos(&self, r: Expr) -> Expr {
        r.add(k(self.a0 + (self.nt - 1) * self.nt))
    }
}

/// Appends the layers simulating causal `tf` over `reg` to `sb`, with the
/// source residual in the slice starting at `h` (width `tf.d`) and the
/// source embedding readable from `z` at the token positions. Returns
/// nothing; the result sits in the last block.
pub(crate) fn emulate_causal(sb: &mut SpecB, tf: &TransformerSpec, reg: &Region, h: usize, z: &[usize], one: usize, id: &[usize]) {
    let cfg = sb.cfg;
    let bits = id.len();
    let nt = reg.nt;
    let inside = reg.inside();
    let active = inside.clone().and(reg.r().le(reg.block()));
    sb.pe.push(h, Kind::Sub { n: inside.clone().then(reg.r(), k(1)), len: reg.pe_len.clone(), pe: tf.pe.clone() });
    let first = sb.pe_ind(n().eq(k(1)));
    let idle = sb.pe_ind(active.not());
    let bb = bits_for(nt as usize);
    let rb = sb.pe_sbin(bb, inside.clone().then(reg.block(), k(0)));
    let tq = sb.pe_sbin(bits, inside.clone().then(reg.src(), n()));
    let dq = sb.pe_sbin(bits, inside.then(reg.r().sub(k(1)).mul(k(nt)).add(reg.r()).add(k(reg.a0)), n()));
    let c = sb.slot(tf.d);

    let mut l = LayerB::new("gather tokens");
    l.heads.push(match_head(cfg, &tq, id, one, z, h));
    sb.layers.push(l);
    for layer in &tf.layers {
        let imported = LayerB::import(layer, &|x| h + x);
        let wrapped = wrap_ignore(cfg, &wrap_focus(cfg, &imported, &rb, &rb, one), idle, one);
        sb.layers.push(wrap_escape(cfg, &wrapped, idle, first));
        let mut l = LayerB::new("take the diagonal");
        let hs: Vec<usize> = (h..h + tf.d).collect();
        l.heads.push(match_head(cfg, &dq, id, one, &hs, c[0]));
        l.mlps.push(mlp_clear(cfg, &hs));
        l.mlps.push(mlp_move_clear(cfg, &hs.iter().zip(&c).map(|(&a, &b)| (b, a)).collect::<Vec<_>>()));
        sb.layers.push(l);
    }
}

/// Unmasked machine reading `w PAD^{(N-1)N}` whose last `N` positions end
/// with the causal source's residuals.
pub fn causal_to_unmasked(tf: &TransformerSpec, nn: usize) -> Result<(TransformerSpec, Certificate)> {
    tf.validate()?;
    check_len(tf, nn, MaskMode::Causal)?;
    let cfg = tf.cfg;
    let ni = nn as i64;
    let total = nn * nn;
    let mut sb = SpecB::new(cfg, with_pad(tf)?, tf.outputs.clone());
    sb.fixed_len = Some(total);
    let h = sb.alloc(tf.d);
    let z = sb.slot(tf.d);
    embed_into(&mut sb, tf, &z);
    let one = sb.pe_one();
    let id = sb.pe_sbin(bits_for(total), n());
    let reg = Region { a0: 0, nt: ni, gap_after: ni, gap: 0, pe_len: k(ni) };
    emulate_causal(&mut sb, tf, &reg, h, &z, one, &id);
    remap_out(&mut sb, tf, h);
    sb.notes.push(format!("causal to unmasked, N={nn}"));
    let spec = sb.finish()?;

    let ll = tf.layers.len() as i64;
    let mut cert = Certificate::new("causal", "unmasked").bind(Var::N, ni).bind(Var::L, ll);
    cert.padding = Some(var(Var::N).sub(num(1)).mul(var(Var::N)));
    cert.layers = Some(num(2).mul(var(Var::L)).add(num(1)));
    cert.alignment = Alignment::Pairs((0..nn).map(|t| (Idx::Front(t), Idx::Back(nn - 1 - t))).collect());
    cert.notes.push("blocks are separated by focusing; exact while source scores stay within B_F/2".into());
    Ok((spec, cert))
}

/// Symbols decoded at every position of `spec` on `w` followed by `pads`
/// padding symbols.
pub fn run_padded<S: AsRef<str>>(spec: &TransformerSpec, w: &[S], pads: usize) -> Result<Vec<String>> {
    let mut toks = spec.encode(w)?;
    if pads > 0 {
        toks.extend(std::iter::repeat_n(spec.symbol(PAD)?, pads));
    }
    let st = spec.forward(&toks, None)?;
    let ids = crate::tfcore::decode(&st, &spec.out, spec.cfg)?;
    Ok(ids.into_iter().map(|i| spec.outputs[i].clone()).collect())
}
