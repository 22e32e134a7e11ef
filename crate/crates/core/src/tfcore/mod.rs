//! Finite-precision transformer: spec types, the forward pass, decoding,
//! infilling and Gumbel-max sampling.

mod engine;
pub mod pe;
pub mod text;

use crate::error::{Error, Result};
use crate::fxp::{Cfg, Fx, FxVec, Mat};

pub use engine::{AttnMap, Prepared};
pub use pe::{Cond, Expr, Kind, Pe};

pub const MASK: &str = "<m>";
pub const ACCEPT: &str = "<acc>";
pub const REJECT: &str = "<rej>";
pub const PAD: &str = "<pad>";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MaskMode {
    Unmasked,
    Causal,
}

/// One attention head. Reads the full residual, writes `wv.rows`
/// coordinates starting at `offset`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Head {
    pub wq: Mat,
    pub wk: Mat,
    pub wv: Mat,
    pub offset: usize,
}

/// `f(x) = act(W2 relu(W1 x + b1) + b2)`, with `act` the identity or a
/// rectifier. Applied with a residual connection.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Mlp {
    pub w1: Mat,
    pub b1: FxVec,
    pub w2: Mat,
    pub b2: FxVec,
    pub out_relu: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Layer {
    pub heads: Vec<Head>,
    /// Stacked MLP sub-layers, each with its own residual connection.
    pub mlps: Vec<Mlp>,
    pub note: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TransformerSpec {
    pub cfg: Cfg,
    pub alphabet: Vec<String>,
    pub outputs: Vec<String>,
    pub d: usize,
    /// `d x |alphabet|`; column `c` embeds symbol `c`.
    pub embed: Mat,
    pub layers: Vec<Layer>,
    /// `|outputs| x d`.
    pub out: Mat,
    pub mask: MaskMode,
    pub pe: Pe,
    /// Compiled per-length specs refuse other lengths.
    pub fixed_len: Option<usize>,
    pub notes: Vec<String>,
}

/// Final residual stream, one row per position.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResidualState {
    pub h: Mat,
    pub layer: usize,
}

impl Mlp {
    pub fn zero(d: usize, hidden: usize) -> Self {
        Mlp {
            w1: Mat::zeros(hidden, d),
            b1: vec![Fx::ZERO; hidden],
            w2: Mat::zeros(d, hidden),
            b2: vec![Fx::ZERO; d],
            out_relu: true,
        }
    }

    pub fn hidden(&self) -> usize {
        self.w1.rows
    }

    /// Evaluate on one residual vector (no residual connection).
    pub fn apply(&self, cfg: Cfg, x: &[Fx]) -> Result<FxVec> {
        let mut z = self.w1.apply(x, cfg)?;
        for (zi, b) in z.iter_mut().zip(&self.b1) {
            *zi = cfg.relu(cfg.add(*zi, *b));
        }
        let mut y = self.w2.apply(&z, cfg)?;
        for (yi, b) in y.iter_mut().zip(&self.b2) {
            *yi = cfg.add(*yi, *b);
            if self.out_relu {
                *yi = cfg.relu(*yi);
            }
        }
        Ok(y)
    }
}

impl Layer {
    pub fn empty(note: &str) -> Self {
        Layer { heads: Vec::new(), mlps: Vec::new(), note: note.to_string() }
    }
}

impl TransformerSpec {
    /// Spec with zero weights and no layers.
    pub fn blank(cfg: Cfg, alphabet: &[&str], outputs: &[&str], d: usize) -> Self {
        TransformerSpec {
            cfg,
            alphabet: alphabet.iter().map(|s| s.to_string()).collect(),
            outputs: outputs.iter().map(|s| s.to_string()).collect(),
            d,
            embed: Mat::zeros(d, alphabet.len()),
            layers: Vec::new(),
            out: Mat::zeros(outputs.len(), d),
            mask: MaskMode::Unmasked,
            pe: Pe::default(),
            fixed_len: None,
            notes: Vec::new(),
        }
    }

    pub fn symbol(&self, s: &str) -> Result<usize> {
        self.alphabet.iter().position(|a| a == s).ok_or_else(|| Error::UnknownSymbol(s.to_string()))
    }

    pub fn output(&self, s: &str) -> Result<usize> {
        self.outputs.iter().position(|a| a == s).ok_or_else(|| Error::UnknownSymbol(s.to_string()))
    }

    pub fn encode<S: AsRef<str>>(&self, syms: &[S]) -> Result<Vec<usize>> {
        syms.iter().map(|s| self.symbol(s.as_ref())).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.d;
        let bad = |m: String| Err(Error::Spec(m));
        if self.embed.rows != d || self.embed.cols != self.alphabet.len() {
            return bad(format!("embedding is {}x{}, want {}x{}", self.embed.rows, self.embed.cols, d, self.alphabet.len()));
        }
        if self.out.rows != self.outputs.len() || self.out.cols != d {
            return bad(format!("output matrix is {}x{}, want {}x{}", self.out.rows, self.out.cols, self.outputs.len(), d));
        }
        if self.pe.extent() > d {
            return bad(format!("positional encoding writes up to {} > width {d}", self.pe.extent()));
        }
        let max = self.cfg.max_raw();
        let on_grid = |m: &Mat| m.data.iter().all(|x| x.raw().abs() <= max);
        for (li, l) in self.layers.iter().enumerate() {
            let mut used = vec![false; d];
            for (hi, h) in l.heads.iter().enumerate() {
                let ctx = format!("layer {li} head {hi}");
                if h.wq.cols != d || h.wk.cols != d || h.wv.cols != d {
                    return bad(format!("{ctx}: projection width mismatch"));
                }
                if h.wq.rows != h.wk.rows {
                    return bad(format!("{ctx}: query/key dims differ"));
                }
                if h.offset + h.wv.rows > d {
                    return bad(format!("{ctx}: output slice out of range"));
                }
                for u in &mut used[h.offset..h.offset + h.wv.rows] {
                    if *u {
                        return bad(format!("{ctx}: output slice overlaps another head"));
                    }
                    *u = true;
                }
                if !(on_grid(&h.wq) && on_grid(&h.wk) && on_grid(&h.wv)) {
                    return bad(format!("{ctx}: weight off grid"));
                }
            }
            for (mi, m) in l.mlps.iter().enumerate() {
                let hdim = m.w1.rows;
                if m.w1.cols != d || m.b1.len() != hdim || m.w2.rows != d || m.w2.cols != hdim || m.b2.len() != d {
                    return bad(format!("layer {li} mlp {mi}: shape mismatch"));
                }
            }
        }
        Ok(())
    }

    pub fn prepare(&self) -> Result<Prepared<'_>> {
        Prepared::new(self)
    }

    pub fn forward(&self, tokens: &[usize], noise: Option<&Mat>) -> Result<ResidualState> {
        self.prepare()?.forward(tokens, noise)
    }

    pub fn next_symbol(&self, tokens: &[usize]) -> Result<usize> {
        if tokens.is_empty() {
            return Err(Error::Spec("next_symbol needs a nonempty input".into()));
        }
        let st = self.forward(tokens, None)?;
        Ok(argmax(&self.logits(&st, tokens.len() - 1)?))
    }

    pub fn logits(&self, st: &ResidualState, pos: usize) -> Result<FxVec> {
        self.out.apply(st.h.row(pos), self.cfg)
    }

    /// Output-symbol distribution at masked position `pos` (0-based),
    /// over every output symbol except the mask symbol.
    pub fn infill_dist(&self, tokens: &[usize], pos: usize) -> Result<(Vec<usize>, FxVec)> {
        let mask = self.symbol(MASK)?;
        if tokens.get(pos) != Some(&mask) {
            return Err(Error::NotMasked(pos + 1));
        }
        let st = self.forward(tokens, None)?;
        let lg = self.logits(&st, pos)?;
        infill_from_logits(self, &lg)
    }
}

pub(crate) fn infill_from_logits(spec: &TransformerSpec, lg: &[Fx]) -> Result<(Vec<usize>, FxVec)> {
    let keep: Vec<usize> = (0..spec.outputs.len()).filter(|&i| spec.outputs[i] != MASK).collect();
    let sel: FxVec = keep.iter().map(|&i| lg[i]).collect();
    Ok((keep, spec.cfg.softmax(&sel)?))
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax(xs: &[Fx]) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate() {
        if *x > xs[best] {
            best = i;
        }
    }
    best
}

/// Per-position argmax of the output logits.
pub fn decode(st: &ResidualState, out: &Mat, cfg: Cfg) -> Result<Vec<usize>> {
    (0..st.h.rows).map(|i| Ok(argmax(&out.apply(st.h.row(i), cfg)?))).collect()
}

/// Argmax of `logits + noise` under fixed-point addition.
pub fn gumbel_sample(cfg: Cfg, logits: &[Fx], noise: &[Fx]) -> Result<usize> {
    if logits.len() != noise.len() {
        return Err(Error::Shape(format!("gumbel: {} logits, {} noise", logits.len(), noise.len())));
    }
    let s: FxVec = logits.iter().zip(noise).map(|(&l, &g)| cfg.add(l, g)).collect();
    Ok(argmax(&s))
}

/// One standard Gumbel draw from a uniform in (0, 1), quantized.
pub fn gumbel_from_uniform(cfg: Cfg, u: f64) -> Fx {
    let u = u.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON);
    cfg.quantize(-(-u.ln()).ln())
}

#[cfg(test)]
mod tests;
