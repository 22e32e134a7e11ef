//! Compilers between machine kinds. Each returns the target machine and a
//! [`Certificate`] with its declared resource bounds and output alignment.

pub mod cert;
pub mod dfa;
pub mod file;
pub mod fuse;
pub mod mask;
pub mod pcot;
pub mod plt;
pub mod smdm;

pub use cert::{Certificate, Formula, Var};
pub use dfa::{dfa_cot_core, dfa_schedule, dfa_to_mdm, Monoid};
pub use file::{Machine, MachineFile};
pub use fuse::fuse_planner_predictor;
pub use mask::{causal_to_unmasked, run_padded, unmasked_to_causal};
pub use pcot::{mdm_to_pcot, pcot_cells, pcot_to_mdm};
pub use plt::{dump_read_pair, mdm_to_plt, plt_bits, plt_symbols, plt_to_mdm};
pub use smdm::{mdm_to_smdm, MASKED};

use crate::fxp::{Cfg, Fx};
use crate::gadgets::{LayerB, MlpB, SpVec};
use crate::tfcore::TransformerSpec;

/// Hidden unit `relu(sum w_c x_c + b)` with weights sorted by coordinate.
pub(crate) fn unitf(m: &mut MlpB, terms: &[(usize, Fx)], b: Fx) -> usize {
    let mut ws: SpVec = terms.iter().copied().filter(|t| !t.1.is_zero()).collect();
    ws.sort_by_key(|e| e.0);
    debug_assert!(ws.windows(2).all(|p| p[0].0 < p[1].0), "repeated coordinate in unit");
    m.unit(ws, b)
}

/// [`unitf`] with integer weights and bias.
pub(crate) fn unit(m: &mut MlpB, cfg: Cfg, terms: &[(usize, i64)], b: i64) -> usize {
    let t: Vec<(usize, Fx)> = terms.iter().map(|&(c, v)| (c, cfg.int(v))).collect();
    unitf(m, &t, cfg.int(b))
}

/// Layer `li` of each spec imported at its offset, side by side. Specs
/// with fewer layers contribute nothing.
pub(crate) fn side_by_side(specs: &[(&TransformerSpec, usize)], li: usize, note: &str) -> LayerB {
    let mut l = LayerB::new(note);
    for &(spec, off) in specs {
        if let Some(layer) = spec.layers.get(li) {
            let imp = LayerB::import(layer, &|c| off + c);
            l.heads.extend(imp.heads);
            l.mlps.extend(imp.mlps);
        }
    }
    l
}
