//! Executors for masked diffusion models, padded looped transformers and
//! (parallel) chain of thought, with traces and resource counters.

mod trace;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fxp::{Cfg, Fx, FxVec, Mat};
use crate::tfcore::{argmax, gumbel_from_uniform, MaskMode, Prepared, ResidualState, TransformerSpec, ACCEPT, MASK, PAD, REJECT};

pub use trace::{Counters, RunTrace, StepRecord};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PlannerClass {
    /// May resample unmasked cells.
    Unrestricted,
    /// Never selects an unmasked cell; enforced at run time.
    MaskDominated,
    /// Unrestricted, but only ever run under argmax decoding.
    Deterministic,
}

impl PlannerClass {
    pub fn name(self) -> &'static str {
        match self {
            PlannerClass::Unrestricted => "unrestricted",
            PlannerClass::MaskDominated => "mask-dominated",
            PlannerClass::Deterministic => "deterministic",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "unrestricted" => Some(PlannerClass::Unrestricted),
            "mask-dominated" => Some(PlannerClass::MaskDominated),
            "deterministic" => Some(PlannerClass::Deterministic),
            _ => None,
        }
    }
}

/// Planner outputs `0`/`1` per position; predictor outputs symbols of the
/// shared input alphabet. Both read `w` followed by the current cells.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MDMSpec {
    pub planner: TransformerSpec,
    pub predictor: TransformerSpec,
    pub class: PlannerClass,
    /// Number of cells the planner selects per step, when constant.
    pub fanout: Option<usize>,
}

impl MDMSpec {
    pub fn validate(&self) -> Result<()> {
        self.planner.validate()?;
        self.predictor.validate()?;
        if self.planner.alphabet != self.predictor.alphabet {
            return Err(Error::Spec("planner and predictor alphabets differ".into()));
        }
        if self.planner.outputs != ["0", "1"] {
            return Err(Error::Spec("planner outputs must be `0 1`".into()));
        }
        self.planner.symbol(MASK)?;
        for o in &self.predictor.outputs {
            self.predictor.symbol(o)?;
        }
        Ok(())
    }

    pub fn cfg(&self) -> Cfg {
        self.predictor.cfg
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PLTSpec {
    pub base: TransformerSpec,
    /// 1-based inclusive range of looped layers.
    pub loop_range: (usize, usize),
    /// Padding symbols appended to the input.
    pub pad: usize,
    pub stochastic: bool,
    /// Coordinates `(start, width)` receiving noise before each iteration.
    pub noise_slice: Option<(usize, usize)>,
}

impl PLTSpec {
    pub fn looped(base: TransformerSpec, loop_range: (usize, usize), pad: usize) -> Self {
        PLTSpec { base, loop_range, pad, stochastic: false, noise_slice: None }
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        let (l1, l2) = self.loop_range;
        if !(1 <= l1 && l1 <= l2 && l2 <= self.base.layers.len()) {
            return Err(Error::Spec(format!("loop range {l1}..={l2} invalid for {} layers", self.base.layers.len())));
        }
        if self.pad > 0 {
            self.base.symbol(PAD)?;
        }
        if self.stochastic {
            match self.noise_slice {
                Some((s, w)) if s + w <= self.base.d && w > 0 => {}
                _ => return Err(Error::Spec("stochastic PLT needs a noise slice inside the residual".into())),
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PCoTSpec {
    pub core: TransformerSpec,
    pub steps: usize,
    pub pprime: usize,
}

/// Seeded stream of quantized standard Gumbel draws.
#[derive(Clone, Debug)]
pub struct NoiseStream {
    cfg: Cfg,
    rng: ChaCha8Rng,
    pub seed: u64,
    pub drawn: usize,
    pub limit: Option<usize>,
}

impl NoiseStream {
    pub fn new(cfg: Cfg, seed: u64) -> Self {
        NoiseStream { cfg, rng: ChaCha8Rng::seed_from_u64(seed), seed, drawn: 0, limit: None }
    }

    pub fn with_limit(mut self, limit: usize) -> Self {
        self.limit = Some(limit);
        self
    }

    pub fn next(&mut self) -> Result<Fx> {
        if self.limit.is_some_and(|l| self.drawn >= l) {
            return Err(Error::NoiseExhausted);
        }
        self.drawn += 1;
        Ok(gumbel_from_uniform(self.cfg, self.rng.gen::<f64>()))
    }

    pub fn take(&mut self, n: usize) -> Result<FxVec> {
        (0..n).map(|_| self.next()).collect()
    }
}

fn pick(cfg: Cfg, logits: &[Fx], noise: Option<&[Fx]>) -> usize {
    match noise {
        None => argmax(logits),
        Some(z) => {
            let s: FxVec = logits.iter().zip(z).map(|(&l, &g)| cfg.add(l, g)).collect();
            argmax(&s)
        }
    }
}

/// Run options shared by the executors.
#[derive(Default)]
pub struct RunOpts<'a> {
    /// `None` runs under argmax decoding.
    pub noise: Option<&'a mut NoiseStream>,
    /// Keep the predictor's final residual of every step.
    pub capture: bool,
}

pub(crate) fn encode<S: AsRef<str>>(spec: &TransformerSpec, w: &[S]) -> Result<Vec<usize>> {
    spec.encode(w)
}

/// Prepared planner/predictor pair, reusable across runs.
pub struct MdmRunner<'a> {
    pub mdm: &'a MDMSpec,
    planner: Prepared<'a>,
    predictor: Prepared<'a>,
    /// Predictor output index to input symbol index.
    out_sym: Vec<usize>,
    /// Predictor outputs eligible for sampling (all but the mask symbol).
    keep: Vec<usize>,
    mask: usize,
}

impl<'a> MdmRunner<'a> {
    pub fn new(mdm: &'a MDMSpec) -> Result<Self> {
        mdm.validate()?;
        let pr = &mdm.predictor;
        let out_sym = pr.outputs.iter().map(|o| pr.symbol(o)).collect::<Result<_>>()?;
        let keep = (0..pr.outputs.len()).filter(|&i| pr.outputs[i] != MASK).collect();
        Ok(MdmRunner {
            mdm,
            planner: mdm.planner.prepare()?,
            predictor: pr.prepare()?,
            out_sym,
            keep,
            mask: pr.symbol(MASK)?,
        })
    }

    /// The unmasking process: `T` steps over `P` cells following `w`.
    pub fn run<S: AsRef<str>>(&self, w: &[S], t: usize, p: usize, mut opts: RunOpts) -> Result<(Vec<String>, RunTrace)> {
        let cfg = self.mdm.cfg();
        let n = w.len();
        let mut toks = encode(&self.mdm.predictor, w)?;
        toks.extend(std::iter::repeat(self.mask).take(p));
        let len = toks.len();
        let nout = self.keep.len();
        let mut trace = RunTrace::new(opts.noise.as_ref().map(|z| z.seed));
        trace.counters.padding_used = p;
        for step in 1..=t {
            // fixed draw layout: per position, two planner values then one per predictor output
            let noise = match opts.noise.as_deref_mut() {
                Some(z) => Some(z.take(len * (2 + nout))?),
                None => None,
            };
            let z_at = |i: usize, off: usize, k: usize| noise.as_ref().map(|z| &z[i * (2 + nout) + off..i * (2 + nout) + off + k]);
            let ps = self.planner.forward(&toks, None)?;
            trace.counters.evals += 1;
            let mut u = vec![false; p];
            for (c, uc) in u.iter_mut().enumerate() {
                let i = n + c;
                *uc = pick(cfg, &self.planner.logits(&ps, i), z_at(i, 0, 2)) == 1;
                if *uc && self.mdm.class == PlannerClass::MaskDominated && toks[i] != self.mask {
                    return Err(Error::MaskDominated { step, cell: c + 1 });
                }
            }
            let qs = self.predictor.forward(&toks, None)?;
            trace.counters.evals += 1;
            let mut next = toks.clone();
            for c in 0..p {
                if !u[c] {
                    // predictions at unselected cells are discarded
                    continue;
                }
                let i = n + c;
                let lg = self.predictor.logits(&qs, i);
                let sel: FxVec = self.keep.iter().map(|&o| lg[o]).collect();
                let o = self.keep[pick(cfg, &sel, z_at(i, 2, nout))];
                next[i] = self.out_sym[o];
            }
            toks = next;
            trace.counters.steps += 1;
            trace.steps.push(StepRecord {
                step,
                u,
                y: self.names(&toks[n..]),
                residual: if opts.capture { Some(qs.h) } else { None },
            });
        }
        Ok((self.names(&toks[n..]), trace))
    }

    fn names(&self, toks: &[usize]) -> Vec<String> {
        toks.iter().map(|&t| self.mdm.predictor.alphabet[t].clone()).collect()
    }
}

pub fn mdm_run<S: AsRef<str>>(mdm: &MDMSpec, w: &[S], t: usize, p: usize, opts: RunOpts) -> Result<(Vec<String>, RunTrace)> {
    MdmRunner::new(mdm)?.run(w, t, p, opts)
}

/// Reads the accept/reject symbol at the last cell.
pub fn acceptance(y: &[String]) -> Result<bool> {
    match y.last().map(String::as_str) {
        Some(ACCEPT) => Ok(true),
        Some(REJECT) => Ok(false),
        other => Err(Error::Malformed(other.unwrap_or("").to_string())),
    }
}

/// Deterministic acceptance after `T` steps over `P` cells.
pub fn mdm_accepts<S: AsRef<str>>(mdm: &MDMSpec, w: &[S], t: usize, p: usize) -> Result<bool> {
    let (y, _) = mdm_run(mdm, w, t, p, RunOpts::default())?;
    acceptance(&y)
}

/// Prefix layers once, the loop block `T` times, suffix layers once.
pub fn plt_run<S: AsRef<str>>(plt: &PLTSpec, w: &[S], t: usize, noise: Option<&mut NoiseStream>) -> Result<(ResidualState, RunTrace)> {
    plt.validate()?;
    let mut toks = plt.base.encode(w)?;
    if plt.pad > 0 {
        let pad = plt.base.symbol(PAD)?;
        toks.extend(std::iter::repeat(pad).take(plt.pad));
    }
    plt_run_tokens(plt, &toks, t, noise, None)
}

/// As [`plt_run`] on already-padded token ids. `after_iter` sees the
/// residual after every loop iteration.
pub fn plt_run_tokens(
    plt: &PLTSpec,
    toks: &[usize],
    t: usize,
    mut noise: Option<&mut NoiseStream>,
    mut after_iter: Option<&mut dyn FnMut(usize, &Mat)>,
) -> Result<(ResidualState, RunTrace)> {
    let cfg = plt.base.cfg;
    let prep = plt.base.prepare()?;
    if plt.stochastic && noise.is_none() {
        return Err(Error::NoiseMissing);
    }
    let (l1, l2) = plt.loop_range;
    let mut trace = RunTrace::new(noise.as_ref().map(|z| z.seed));
    trace.counters.padding_used = plt.pad;
    let mut h = prep.embed(toks, None)?;
    trace.counters.evals += 1;
    for li in 0..l1 - 1 {
        prep.layer(li, &mut h, None)?;
    }
    for it in 1..=t {
        if plt.stochastic {
            let (s, wd) = plt.noise_slice.expect("validated");
            let z = noise.as_deref_mut().expect("checked").take(h.rows * wd)?;
            for r in 0..h.rows {
                let row = h.row_mut(r);
                for j in 0..wd {
                    row[s + j] = cfg.add(row[s + j], z[r * wd + j]);
                }
            }
        }
        for li in l1 - 1..l2 {
            prep.layer(li, &mut h, None)?;
        }
        trace.counters.loops += 1;
        if let Some(f) = after_iter.as_deref_mut() {
            f(it, &h);
        }
    }
    for li in l2..prep.num_layers() {
        prep.layer(li, &mut h, None)?;
    }
    let layer = prep.num_layers();
    Ok((ResidualState { h, layer }, trace))
}

/// Sequential chain of thought: `T` next-symbol steps.
pub fn cot_run<S: AsRef<str>>(core: &TransformerSpec, w: &[S], t: usize) -> Result<(Vec<String>, RunTrace)> {
    let prep = core.prepare()?;
    let mut toks = core.encode(w)?;
    let n = toks.len();
    let mut trace = RunTrace::new(None);
    for step in 1..=t {
        let st = prep.forward(&toks, None)?;
        trace.counters.evals += 1;
        let o = argmax(&prep.logits(&st, toks.len() - 1));
        toks.push(core.symbol(&core.outputs[o])?);
        trace.counters.cot_steps += 1;
        trace.counters.steps += 1;
        trace.steps.push(StepRecord { step, u: vec![true], y: names(core, &toks[n..]), residual: None });
    }
    Ok((names(core, &toks[n..]), trace))
}

fn names(spec: &TransformerSpec, toks: &[usize]) -> Vec<String> {
    toks.iter().map(|&t| spec.alphabet[t].clone()).collect()
}

/// Parallel chain of thought: each step appends `P'` masked cells and
/// fills them from the core's outputs there.
pub fn pcot_run<S: AsRef<str>>(spec: &PCoTSpec, w: &[S], mut noise: Option<&mut NoiseStream>) -> Result<(Vec<String>, RunTrace)> {
    let core = &spec.core;
    if core.mask != MaskMode::Causal {
        return Err(Error::Spec("pCoT core must be causal".into()));
    }
    let cfg = core.cfg;
    let prep = core.prepare()?;
    let mask = core.symbol(MASK)?;
    let mut toks = core.encode(w)?;
    let n = toks.len();
    let keep: Vec<usize> = (0..core.outputs.len()).filter(|&i| core.outputs[i] != MASK).collect();
    let out_sym: Vec<usize> = core.outputs.iter().map(|o| core.symbol(o)).collect::<Result<_>>()?;
    let mut trace = RunTrace::new(noise.as_ref().map(|z| z.seed));
    for step in 1..=spec.steps {
        let base = toks.len();
        toks.extend(std::iter::repeat(mask).take(spec.pprime));
        let st = prep.forward(&toks, None)?;
        trace.counters.evals += 1;
        for i in base..toks.len() {
            let lg = prep.logits(&st, i);
            let sel: FxVec = keep.iter().map(|&o| lg[o]).collect();
            let z = match noise.as_deref_mut() {
                Some(z) => Some(z.take(keep.len())?),
                None => None,
            };
            toks[i] = out_sym[keep[pick(cfg, &sel, z.as_deref())]];
        }
        trace.counters.cot_steps += 1;
        trace.counters.steps += 1;
        trace.steps.push(StepRecord { step, u: vec![true; spec.pprime], y: names(core, &toks[n..]), residual: None });
    }
    trace.counters.padding_used = toks.len() - n;
    Ok((names(core, &toks[n..]), trace))
}

/// Top-`k` unmasking with a single fused model: each step fills the `k`
/// cells with the largest maximal logit (lowest index on ties). `k` is
/// clamped to the number of cells.
pub fn topk_mdm_run<S: AsRef<str>>(
    fused: &TransformerSpec,
    k: usize,
    w: &[S],
    t: usize,
    p: usize,
    mut noise: Option<&mut NoiseStream>,
) -> Result<(Vec<String>, RunTrace)> {
    if k == 0 {
        return Err(Error::Spec("top-k unmasking needs k >= 1".into()));
    }
    let cfg = fused.cfg;
    let prep = fused.prepare()?;
    let mask = fused.symbol(MASK)?;
    let keep: Vec<usize> = (0..fused.outputs.len()).filter(|&i| fused.outputs[i] != MASK).collect();
    let out_sym: Vec<usize> = fused.outputs.iter().map(|o| fused.symbol(o)).collect::<Result<_>>()?;
    let mut toks = fused.encode(w)?;
    let n = toks.len();
    toks.extend(std::iter::repeat(mask).take(p));
    let mut trace = RunTrace::new(noise.as_ref().map(|z| z.seed));
    trace.counters.padding_used = p;
    let kk = k.min(p);
    for step in 1..=t {
        let st = prep.forward(&toks, None)?;
        trace.counters.evals += 1;
        let mut best: Vec<(Fx, usize, FxVec)> = (0..p)
            .map(|c| {
                let lg = prep.logits(&st, n + c);
                let sel: FxVec = keep.iter().map(|&o| lg[o]).collect();
                let mx = sel.iter().copied().max().unwrap_or(Fx::ZERO);
                (mx, c, sel)
            })
            .collect();
        best.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        let mut u = vec![false; p];
        for (_, c, sel) in best.into_iter().take(kk) {
            let z = match noise.as_deref_mut() {
                Some(z) => Some(z.take(keep.len())?),
                None => None,
            };
            toks[n + c] = out_sym[keep[pick(cfg, &sel, z.as_deref())]];
            u[c] = true;
        }
        trace.counters.steps += 1;
        trace.steps.push(StepRecord { step, u, y: names(fused, &toks[n..]), residual: None });
    }
    Ok((names(fused, &toks[n..]), trace))
}
