//! Forward pass over a prepared (sparse) copy of a spec.
//!
//! Zero weights are skipped. This never changes a result: adding a rounded
//! zero product to a partial sum is the identity, so every fold visits the
//! same nonzero terms in the same order as the dense definition.

use crate::error::{Error, Result};
use crate::fxp::{Cfg, Fx, FxVec, Mat};

use super::{MaskMode, ResidualState, TransformerSpec};

struct Sparse {
    rows: Vec<Vec<(usize, Fx)>>,
}

impl Sparse {
    fn new(m: &Mat) -> Self {
        let rows = (0..m.rows)
            .map(|r| m.row(r).iter().enumerate().filter(|(_, x)| !x.is_zero()).map(|(c, x)| (c, *x)).collect())
            .collect();
        Sparse { rows }
    }

    #[inline]
    fn dot(cfg: Cfg, row: &[(usize, Fx)], x: &[Fx]) -> Fx {
        let mut acc = Fx::ZERO;
        for &(c, w) in row {
            let xv = x[c];
            if !xv.is_zero() {
                acc = cfg.add(acc, cfg.mul(w, xv));
            }
        }
        acc
    }

    fn apply_into(&self, cfg: Cfg, x: &[Fx], out: &mut [Fx]) {
        for (o, row) in out.iter_mut().zip(&self.rows) {
            *o = Self::dot(cfg, row, x);
        }
    }
}

struct PHead {
    q: Sparse,
    k: Sparse,
    v: Sparse,
    offset: usize,
}

struct PMlp {
    w1: Sparse,
    b1: FxVec,
    w2: Sparse,
    b2: FxVec,
    out_relu: bool,
}

struct PLayer {
    heads: Vec<PHead>,
    mlps: Vec<PMlp>,
}

/// Attention weights of one head, `N x N` (query row, key column).
#[derive(Clone, Debug)]
pub struct AttnMap {
    pub layer: usize,
    pub head: usize,
    pub w: Mat,
}

pub struct Prepared<'a> {
    pub spec: &'a TransformerSpec,
    layers: Vec<PLayer>,
    out: Sparse,
}

impl<'a> Prepared<'a> {
    pub fn new(spec: &'a TransformerSpec) -> Result<Self> {
        spec.validate()?;
        let layers = spec
            .layers
            .iter()
            .map(|l| PLayer {
                heads: l
                    .heads
                    .iter()
                    .map(|h| PHead { q: Sparse::new(&h.wq), k: Sparse::new(&h.wk), v: Sparse::new(&h.wv), offset: h.offset })
                    .collect(),
                mlps: l
                    .mlps
                    .iter()
                    .map(|m| PMlp {
                        w1: Sparse::new(&m.w1),
                        b1: m.b1.clone(),
                        w2: Sparse::new(&m.w2),
                        b2: m.b2.clone(),
                        out_relu: m.out_relu,
                    })
                    .collect(),
            })
            .collect();
        Ok(Prepared { spec, layers, out: Sparse::new(&spec.out) })
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    /// `H^(0)`: embedding plus positional encoding plus optional noise.
    pub fn embed(&self, tokens: &[usize], noise: Option<&Mat>) -> Result<Mat> {
        let s = self.spec;
        let cfg = s.cfg;
        let n = tokens.len();
        if let Some(fl) = s.fixed_len {
            if n != fl {
                return Err(Error::Spec(format!("spec is compiled for length {fl}, got {n}")));
            }
        }
        if let Some(z) = noise {
            if z.rows != n || z.cols != s.d {
                return Err(Error::Shape(format!("noise is {}x{}, want {}x{}", z.rows, z.cols, n, s.d)));
            }
        }
        let mut h = Mat::zeros(n, s.d);
        for (i, &t) in tokens.iter().enumerate() {
            if t >= s.alphabet.len() {
                return Err(Error::UnknownSymbol(format!("#{t}")));
            }
            let row = h.row_mut(i);
            for (dd, x) in row.iter_mut().enumerate() {
                *x = s.embed.get(dd, t);
            }
            let pe = s.pe.eval(cfg, i as i64 + 1, n as i64, s.d);
            for (x, p) in row.iter_mut().zip(&pe) {
                *x = cfg.add(*x, *p);
            }
            if let Some(z) = noise {
                for (x, g) in row.iter_mut().zip(z.row(i)) {
                    *x = cfg.add(*x, *g);
                }
            }
        }
        Ok(h)
    }

    /// Apply layer `li` in place.
    pub fn layer(&self, li: usize, h: &mut Mat, mut attn: Option<&mut Vec<AttnMap>>) -> Result<()> {
        let cfg = self.spec.cfg;
        let causal = self.spec.mask == MaskMode::Causal;
        let layer = &self.layers[li];
        let n = h.rows;
        let d = h.cols;
        let mut upd = Mat::zeros(n, d);
        for (hi, head) in layer.heads.iter().enumerate() {
            let dk = head.q.rows.len();
            let dv = head.v.rows.len();
            let mut q = vec![Fx::ZERO; n * dk];
            let mut k = vec![Fx::ZERO; n * dk];
            let mut v = vec![Fx::ZERO; n * dv];
            for i in 0..n {
                head.q.apply_into(cfg, h.row(i), &mut q[i * dk..(i + 1) * dk]);
                head.k.apply_into(cfg, h.row(i), &mut k[i * dk..(i + 1) * dk]);
                head.v.apply_into(cfg, h.row(i), &mut v[i * dv..(i + 1) * dv]);
            }
            let mut map = attn.as_ref().map(|_| Mat::zeros(n, n));
            let mut nums = vec![Fx::ZERO; n];
            let mut qnz = Vec::with_capacity(dk);
            for i in 0..n {
                let qi = &q[i * dk..(i + 1) * dk];
                qnz.clear();
                qnz.extend((0..dk).filter(|&c| !qi[c].is_zero()));
                let kend = if causal { i + 1 } else { n };
                for j in 0..kend {
                    let kj = &k[j * dk..(j + 1) * dk];
                    let mut s = Fx::ZERO;
                    for &c in &qnz {
                        s = cfg.add(s, cfg.mul(qi[c], kj[c]));
                    }
                    nums[j] = cfg.exp(s);
                }
                // keys after the query under causal masking score -B_F: weight 0
                let den = cfg.iter_sum(nums[..kend].iter().copied());
                if den.is_zero() {
                    return Err(Error::AllMasked);
                }
                let out = &mut upd.row_mut(i)[head.offset..head.offset + dv];
                for j in 0..kend {
                    if nums[j].is_zero() {
                        continue;
                    }
                    let a = cfg.div(nums[j], den)?;
                    if let Some(m) = map.as_mut() {
                        m.set(i, j, a);
                    }
                    if a.is_zero() {
                        continue;
                    }
                    let vj = &v[j * dv..(j + 1) * dv];
                    for (o, &x) in out.iter_mut().zip(vj) {
                        if !x.is_zero() {
                            *o = cfg.add(*o, cfg.mul(a, x));
                        }
                    }
                }
            }
            if let (Some(list), Some(w)) = (attn.as_deref_mut(), map) {
                list.push(AttnMap { layer: li, head: hi, w });
            }
        }
        for (x, u) in h.data.iter_mut().zip(&upd.data) {
            *x = cfg.add(*x, *u);
        }
        let mut z = Vec::new();
        let mut y = vec![Fx::ZERO; d];
        for m in &layer.mlps {
            z.resize(m.b1.len(), Fx::ZERO);
            for i in 0..n {
                let row = h.row_mut(i);
                m.w1.apply_into(cfg, row, &mut z);
                for (zi, b) in z.iter_mut().zip(&m.b1) {
                    *zi = cfg.relu(cfg.add(*zi, *b));
                }
                m.w2.apply_into(cfg, &z, &mut y);
                for ((x, yi), b) in row.iter_mut().zip(&y).zip(&m.b2) {
                    let mut o = cfg.add(*yi, *b);
                    if m.out_relu {
                        o = cfg.relu(o);
                    }
                    *x = cfg.add(*x, o);
                }
            }
        }
        Ok(())
    }

    pub fn forward(&self, tokens: &[usize], noise: Option<&Mat>) -> Result<ResidualState> {
        let mut h = self.embed(tokens, noise)?;
        for li in 0..self.layers.len() {
            self.layer(li, &mut h, None)?;
        }
        Ok(ResidualState { h, layer: self.layers.len() })
    }

    /// Residual after every layer (index 0 is `H^(0)`), and optionally every
    /// attention map.
    pub fn forward_trace(&self, tokens: &[usize], noise: Option<&Mat>, capture: bool) -> Result<(Vec<Mat>, Vec<AttnMap>)> {
        let mut h = self.embed(tokens, noise)?;
        let mut states = vec![h.clone()];
        let mut maps = Vec::new();
        for li in 0..self.layers.len() {
            self.layer(li, &mut h, if capture { Some(&mut maps) } else { None })?;
            states.push(h.clone());
        }
        Ok((states, maps))
    }

    pub fn logits_row(&self, row: &[Fx]) -> FxVec {
        let mut out = vec![Fx::ZERO; self.out.rows.len()];
        self.out.apply_into(self.spec.cfg, row, &mut out);
        out
    }

    pub fn logits(&self, st: &ResidualState, pos: usize) -> FxVec {
        self.logits_row(st.h.row(pos))
    }

    pub fn decode(&self, st: &ResidualState) -> Vec<usize> {
        (0..st.h.rows).map(|i| super::argmax(&self.logits(st, i))).collect()
    }
}
