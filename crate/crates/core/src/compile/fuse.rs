//! One transformer standing in for a planner and predictor pair under
//! top-k unmasking.

use crate::error::{Error, Result};
use crate::gadgets::{argmax_mlp, LayerB, SpecB};
use crate::models::MDMSpec;
use crate::tfcore::pe::{len, n};
use crate::tfcore::Kind;

use super::plt::{readout, same_shape};
use super::side_by_side;

/// Runs planner and predictor in parallel slices and reads the
/// predictor's logits, pushed down by `B_F` (saturating) at every position
/// the planner rejects. Returns the fused spec and `k`, the planner's
/// fan-out.
///
/// Top-k then picks exactly the planner's cells as long as each accepted
/// cell's largest logit beats every rejected one's largest logit minus
/// `B_F`; predictor logits within `B_F/4` of zero always do. Logits at
/// accepted cells are the predictor's, bit for bit.
pub fn fuse_planner_predictor(mdm: &MDMSpec) -> Result<(crate::tfcore::TransformerSpec, usize)> {
    mdm.validate()?;
    let k = mdm.fanout.ok_or_else(|| Error::Inapplicable("planner fan-out is not constant".into()))?;
    let (pl, pr) = (&mdm.planner, &mdm.predictor);
    same_shape(pl, pr)?;
    let cfg = mdm.cfg();
    let mut sb = SpecB::new(cfg, pr.alphabet.clone(), pr.outputs.clone());
    sb.mask = pr.mask;
    sb.fixed_len = pr.fixed_len;
    // predictor first so its output rows fold before the rejection term
    let hr = sb.alloc(pr.d);
    let hp = sb.alloc(pl.d);
    for (spec, at) in [(pr, hr), (pl, hp)] {
        for s in 0..spec.alphabet.len() {
            for r in 0..spec.d {
                let e = spec.embed.get(r, s);
                if !e.is_zero() {
                    sb.embed[s].push((at + r, e));
                }
            }
        }
        sb.pe.push(at, Kind::Sub { n: n(), len: len(), pe: spec.pe.clone() });
    }
    let lg = sb.slot(2);
    let u = sb.slot(2);

    let ll = pl.layers.len().max(pr.layers.len());
    for li in 0..ll {
        sb.layers.push(side_by_side(&[(pr, hr), (pl, hp)], li, &format!("fused layer {}", li + 1)));
    }
    if sb.layers.is_empty() {
        sb.layers.push(LayerB::new("decide"));
    }
    let last = sb.layers.last_mut().unwrap();
    last.mlps.push(readout(cfg, &pl.out, &[0, 1], hp, &lg));
    last.mlps.push(argmax_mlp(cfg, &lg, &u, true));

    // u[0] = 1 exactly where the planner keeps the cell masked
    for o in 0..pr.outputs.len() {
        let mut row: Vec<_> = (0..pr.d).filter(|&c| !pr.out.get(o, c).is_zero()).map(|c| (hr + c, pr.out.get(o, c))).collect();
        row.push((u[0], cfg.neg_bf()));
        sb.out[o] = row;
    }
    sb.notes.push(format!("fused planner and predictor, k={k}"));
    Ok((sb.finish()?, k))
}
