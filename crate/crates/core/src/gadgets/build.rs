//! Sparse, width-deferred spec builders. Compilers allocate residual
//! coordinates as they go and materialize dense matrices at the end.
//!
//! Every fold in the engine runs over coordinates in increasing index order,
//! so remapping a layer into a wider residual with a monotone coordinate map
//! keeps every rounded sum bit-identical.

use crate::error::{Error, Result};
use crate::fxp::{Cfg, Fx, Mat};
use crate::tfcore::{Cond, Expr, Head, Kind, Layer, MaskMode, Mlp, Pe, TransformerSpec};

/// Sparse row: `(coordinate, weight)` pairs.
pub type SpVec = Vec<(usize, Fx)>;

#[derive(Clone, Debug, Default)]
pub struct HeadB {
    pub q: Vec<SpVec>,
    pub k: Vec<SpVec>,
    pub v: Vec<SpVec>,
    pub offset: usize,
}

/// One hidden unit: `relu(w . x + b)`.
#[derive(Clone, Debug)]
pub struct Unit {
    pub w: SpVec,
    pub b: Fx,
}

/// MLP sub-layer. `outs` lists `(coordinate, weights over hidden units, bias)`.
#[derive(Clone, Debug, Default)]
pub struct MlpB {
    pub units: Vec<Unit>,
    pub outs: Vec<(usize, SpVec, Fx)>,
    pub out_relu: bool,
}

#[derive(Clone, Debug, Default)]
pub struct LayerB {
    pub heads: Vec<HeadB>,
    pub mlps: Vec<MlpB>,
    pub note: String,
}

fn dense(rows: &[SpVec], cols: usize) -> Result<Mat> {
    let mut m = Mat::zeros(rows.len(), cols);
    for (r, row) in rows.iter().enumerate() {
        for &(c, w) in row {
            if c >= cols {
                return Err(Error::Shape(format!("coordinate {c} beyond width {cols}")));
            }
            if !m.get(r, c).is_zero() {
                return Err(Error::Shape(format!("duplicate weight at ({r}, {c})")));
            }
            m.set(r, c, w);
        }
    }
    Ok(m)
}

fn sparse(m: &Mat, map: &dyn Fn(usize) -> usize) -> Vec<SpVec> {
    (0..m.rows)
        .map(|r| m.row(r).iter().enumerate().filter(|(_, x)| !x.is_zero()).map(|(c, x)| (map(c), *x)).collect())
        .collect()
}

impl HeadB {
    pub fn finish(&self, d: usize) -> Result<Head> {
        if self.q.len() != self.k.len() {
            return Err(Error::Shape("query/key dims differ".into()));
        }
        Ok(Head { wq: dense(&self.q, d)?, wk: dense(&self.k, d)?, wv: dense(&self.v, d)?, offset: self.offset })
    }
}

impl MlpB {
    pub fn linear() -> Self {
        MlpB { out_relu: false, ..Default::default() }
    }

    pub fn unit(&mut self, w: SpVec, b: Fx) -> usize {
        self.units.push(Unit { w, b });
        self.units.len() - 1
    }

    pub fn out(&mut self, coord: usize, w: SpVec, b: Fx) {
        self.outs.push((coord, w, b));
    }

    pub fn finish(&self, d: usize) -> Result<Mlp> {
        let h = self.units.len();
        let mut m = Mlp::zero(d, h);
        m.out_relu = self.out_relu;
        m.w1 = dense(&self.units.iter().map(|u| u.w.clone()).collect::<Vec<_>>(), d)?;
        m.b1 = self.units.iter().map(|u| u.b).collect();
        let mut seen = vec![false; d];
        for (c, w, b) in &self.outs {
            if *c >= d || seen[*c] {
                return Err(Error::Shape(format!("bad or repeated MLP output coordinate {c}")));
            }
            seen[*c] = true;
            for &(j, x) in w {
                if j >= h {
                    return Err(Error::Shape(format!("hidden unit {j} beyond {h}")));
                }
                m.w2.set(*c, j, x);
            }
            m.b2[*c] = *b;
        }
        Ok(m)
    }
}

impl LayerB {
    pub fn new(note: &str) -> Self {
        LayerB { note: note.to_string(), ..Default::default() }
    }

    pub fn finish(&self, d: usize) -> Result<Layer> {
        Ok(Layer {
            heads: self.heads.iter().map(|h| h.finish(d)).collect::<Result<_>>()?,
            mlps: self.mlps.iter().map(|m| m.finish(d)).collect::<Result<_>>()?,
            note: self.note.clone(),
        })
    }

    /// Import a dense layer, mapping source coordinate `c` to `map(c)`.
    /// The map must be strictly increasing for folds to be preserved.
    pub fn import(layer: &Layer, map: &dyn Fn(usize) -> usize) -> Self {
        let heads = layer
            .heads
            .iter()
            .map(|h| HeadB { q: sparse(&h.wq, map), k: sparse(&h.wk, map), v: sparse(&h.wv, map), offset: map(h.offset) })
            .collect();
        let mlps = layer
            .mlps
            .iter()
            .map(|m| {
                let units = sparse(&m.w1, map).into_iter().zip(&m.b1).map(|(w, b)| Unit { w, b: *b }).collect();
                let w2 = sparse(&m.w2, &|j| j);
                let outs = w2
                    .into_iter()
                    .enumerate()
                    .filter(|(c, w)| !w.is_empty() || !m.b2[*c].is_zero())
                    .map(|(c, w)| (map(c), w, m.b2[c]))
                    .collect();
                MlpB { units, outs, out_relu: m.out_relu }
            })
            .collect();
        LayerB { heads, mlps, note: layer.note.clone() }
    }
}

/// Whole-spec builder with a growing residual.
#[derive(Clone, Debug)]
pub struct SpecB {
    pub cfg: Cfg,
    pub alphabet: Vec<String>,
    pub outputs: Vec<String>,
    pub d: usize,
    /// Embedding column per input symbol.
    pub embed: Vec<SpVec>,
    pub pe: Pe,
    pub layers: Vec<LayerB>,
    /// One row per output symbol.
    pub out: Vec<SpVec>,
    pub mask: MaskMode,
    pub fixed_len: Option<usize>,
    pub notes: Vec<String>,
}

impl SpecB {
    pub fn new(cfg: Cfg, alphabet: Vec<String>, outputs: Vec<String>) -> Self {
        SpecB {
            cfg,
            embed: vec![Vec::new(); alphabet.len()],
            out: vec![Vec::new(); outputs.len()],
            alphabet,
            outputs,
            d: 0,
            pe: Pe::default(),
            layers: Vec::new(),
            mask: MaskMode::Unmasked,
            fixed_len: None,
            notes: Vec::new(),
        }
    }

    /// Reserve `w` fresh coordinates; returns the first.
    pub fn alloc(&mut self, w: usize) -> usize {
        self.d += w;
        self.d - w
    }

    fn field(&mut self, kind: Kind) -> usize {
        let at = self.alloc(kind.width());
        self.pe.push(at, kind);
        at
    }

    pub fn pe_bin(&mut self, bits: usize, e: Expr) -> Vec<usize> {
        let at = self.field(Kind::Bin { bits, e });
        (at..at + bits).collect()
    }

    pub fn pe_sbin(&mut self, bits: usize, e: Expr) -> Vec<usize> {
        let at = self.field(Kind::SBin { bits, e });
        (at..at + bits).collect()
    }

    pub fn pe_ind(&mut self, c: Cond) -> usize {
        self.field(Kind::Ind(c))
    }

    /// Coordinate holding 1 at every position.
    pub fn pe_one(&mut self) -> usize {
        let one = self.cfg.one();
        self.field(Kind::Const(one))
    }

    pub fn pe_onehot(&mut self, size: usize, e: Expr) -> Vec<usize> {
        let at = self.field(Kind::OneHot { size, e });
        (at..at + size).collect()
    }

    /// Fresh coordinates, `w` of them.
    pub fn slot(&mut self, w: usize) -> Vec<usize> {
        let at = self.alloc(w);
        (at..at + w).collect()
    }

    pub fn sym(&self, s: &str) -> Result<usize> {
        self.alphabet.iter().position(|a| a == s).ok_or_else(|| Error::UnknownSymbol(s.to_string()))
    }

    pub fn finish(&self) -> Result<TransformerSpec> {
        let d = self.d;
        let mut embed = Mat::zeros(d, self.alphabet.len());
        for (c, col) in self.embed.iter().enumerate() {
            for &(r, w) in col {
                if r >= d {
                    return Err(Error::Shape(format!("embedding coordinate {r} beyond width {d}")));
                }
                embed.set(r, c, self.cfg.add(embed.get(r, c), w));
            }
        }
        let spec = TransformerSpec {
            cfg: self.cfg,
            alphabet: self.alphabet.clone(),
            outputs: self.outputs.clone(),
            d,
            embed,
            layers: self.layers.iter().map(|l| l.finish(d)).collect::<Result<_>>()?,
            out: dense(&self.out, d)?,
            mask: self.mask,
            pe: self.pe.clone(),
            fixed_len: self.fixed_len,
            notes: self.notes.clone(),
        };
        spec.validate()?;
        Ok(spec)
    }
}
