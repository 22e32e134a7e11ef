use std::fmt::Write as _;

use crate::fxp::Mat;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Counters {
    /// Denoising steps (MDM), or generation steps (CoT / pCoT).
    pub steps: usize,
    pub loops: usize,
    pub cot_steps: usize,
    pub padding_used: usize,
    /// Transformer forward evaluations.
    pub evals: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepRecord {
    pub step: usize,
    /// Unmask decision per cell.
    pub u: Vec<bool>,
    /// Cells after the step.
    pub y: Vec<String>,
    pub residual: Option<Mat>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RunTrace {
    pub seed: Option<u64>,
    pub steps: Vec<StepRecord>,
    pub counters: Counters,
}

impl RunTrace {
    pub fn new(seed: Option<u64>) -> Self {
        RunTrace { seed, ..Default::default() }
    }

    /// Line-delimited records: a header with the seed, one line per step,
    /// then the counters.
    pub fn to_text(&self) -> String {
        let mut o = String::new();
        match self.seed {
            Some(s) => writeln!(o, "trace seed={s}").unwrap(),
            None => writeln!(o, "trace seed=none").unwrap(),
        }
        for s in &self.steps {
            let u: String = s.u.iter().map(|&b| if b { '1' } else { '0' }).collect();
            writeln!(o, "step={} u={} y={}", s.step, u, s.y.join(" ")).unwrap();
        }
        let c = &self.counters;
        writeln!(
            o,
            "counters steps={} loops={} cot_steps={} padding_used={} evals={}",
            c.steps, c.loops, c.cot_steps, c.padding_used, c.evals
        )
        .unwrap();
        o
    }

    /// Cells that were selected at least once.
    pub fn touched(&self) -> usize {
        let Some(first) = self.steps.first() else { return 0 };
        (0..first.u.len()).filter(|&c| self.steps.iter().any(|s| s.u[c])).count()
    }

    /// Whether the set of unmasked cells never shrinks.
    pub fn monotone(&self, mask: &str) -> bool {
        self.steps.windows(2).all(|w| w[0].y.iter().zip(&w[1].y).all(|(a, b)| a == mask || b != mask))
    }
}
