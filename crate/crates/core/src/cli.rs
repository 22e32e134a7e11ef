//! Command-line front end: run, compile, verify, bench and gadget-test.
//!
//! Commands return their report as text plus an exit status so that the
//! binary, the FFI layer and the tests share one code path.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::compile::{
    causal_to_unmasked, dfa_cot_core, dfa_to_mdm, mdm_to_pcot, mdm_to_plt, mdm_to_smdm, pcot_cells, pcot_to_mdm, plt_symbols, plt_to_mdm,
    run_padded, unmasked_to_causal, Certificate, Machine, MachineFile,
};
use crate::error::{Error, Result};
use crate::fxp::Cfg;
use crate::gadgets::suite::run_suite;
use crate::models::{cot_run, mdm_run, pcot_run, Counters, NoiseStream, PCoTSpec, RunOpts, RunTrace};
use crate::oracle::{self, check_equivalence, dfa_eval, Alignment, DFASpec, InputSet, Outcome};
use crate::tfcore::{ACCEPT, REJECT};

#[derive(Parser, Debug)]
#[command(name = "mdmsim", version, about = "Finite-precision transformer machines: run, compile, verify, bench")]
pub struct Cli {
    #[command(subcommand)]
    pub cmd: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run a machine file on inputs and print outputs and traces.
    Run(RunArgs),
    /// Compile a machine file into another kind, with its certificate.
    Compile(CompileArgs),
    /// Check two machines agree (or run the gadget suite with --gadgets).
    Verify(VerifyArgs),
    /// Steps of the compiled MDM against sequential CoT over input lengths.
    Bench(BenchArgs),
    /// Run the gadget suite.
    GadgetTest(GadgetArgs),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Text,
    Csv,
}

#[derive(Args, Clone, Debug, Default)]
pub struct Common {
    /// Precision bits (a comma list for the gadget suite).
    #[arg(long = "p", value_delimiter = ',')]
    pub p: Vec<u32>,
    /// Sample with this seed instead of decoding by argmax.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Step (or loop) count; raised to the certified bound if below it.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Padding cells; raised to the certified bound if below it.
    #[arg(long)]
    pub padding: Option<usize>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    pub machine: PathBuf,
    /// Input words: symbols separated by spaces, or run together when each
    /// symbol is unambiguous.
    pub words: Vec<String>,
    /// A file with one input per line (`-` for the empty word), or
    /// `shortlex:LO..HI`, or `random:COUNT:LO..HI`.
    #[arg(long)]
    pub inputs: Option<String>,
    /// Write the traces here instead of printing them.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct CompileArgs {
    pub source: PathBuf,
    /// Target kind: mdm, plt, pcot, smdm, causal, unmasked.
    #[arg(long)]
    pub to: String,
    #[arg(short, long)]
    pub out: Option<PathBuf>,
    /// Input length, for length-specific compilations.
    #[arg(long)]
    pub n: Option<usize>,
    /// Longest input the target must handle.
    #[arg(long, default_value_t = 16)]
    pub max_n: usize,
    /// Build a stochastic looped transformer (mdm -> plt).
    #[arg(long)]
    pub stochastic: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    pub a: Option<PathBuf>,
    pub b: Option<PathBuf>,
    #[arg(long)]
    pub gadgets: bool,
    #[arg(long)]
    pub inputs: Option<String>,
    /// Input alphabet for generated inputs, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub alphabet: Vec<String>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// parity, ab-star, mod<K>, or a DFA file.
    #[arg(long, default_value = "parity")]
    pub dfa: String,
    #[arg(long, value_delimiter = ',', default_value = "2,4,8,16,32")]
    pub ns: Vec<usize>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct GadgetArgs {
    #[command(flatten)]
    pub common: Common,
}

/// What a command prints, and how it exits.
#[derive(Clone, Debug, Default)]
pub struct Report {
    pub stdout: String,
    pub warnings: Vec<String>,
    pub code: i32,
}

pub fn execute(cli: Cli) -> Result<Report> {
    match cli.cmd {
        Command::Run(a) => cmd_run(&a),
        Command::Compile(a) => cmd_compile(&a),
        Command::Verify(a) => cmd_verify(&a),
        Command::Bench(a) => cmd_bench(&a),
        Command::GadgetTest(a) => cmd_gadgets(&a.common),
    }
}

// ------------------------------------------------------------------ inputs

/// Input symbols of a machine: its alphabet without bracketed symbols.
pub fn alphabet(m: &Machine) -> Vec<String> {
    let a = match m {
        Machine::Dfa(d) => return d.alphabet.clone(),
        Machine::Mdm(m) => &m.predictor.alphabet,
        Machine::Plt(p) => &p.base.alphabet,
        Machine::Pcot(p) => &p.core.alphabet,
        Machine::Transformer(t) => &t.alphabet,
    };
    // reserved and compiled symbols are all bracketed
    a.iter().filter(|s| !(s.len() > 2 && s.starts_with('<') && s.ends_with('>'))).cloned().collect()
}

/// Splits on whitespace if there is any, otherwise by longest match
/// against `alphabet`.
pub fn tokenize(word: &str, alphabet: &[String]) -> Result<Vec<String>> {
    let word = word.trim();
    if word.is_empty() || word == "-" {
        return Ok(Vec::new());
    }
    if word.contains(char::is_whitespace) {
        return Ok(word.split_whitespace().map(String::from).collect());
    }
    let mut out = Vec::new();
    let mut rest = word;
    while !rest.is_empty() {
        let best = alphabet.iter().filter(|s| !s.is_empty() && rest.starts_with(s.as_str())).max_by_key(|s| s.len());
        match best {
            Some(s) => {
                out.push(s.clone());
                rest = &rest[s.len()..];
            }
            None => return Err(Error::UnknownSymbol(rest.chars().next().unwrap().to_string())),
        }
    }
    Ok(out)
}

fn range(s: &str) -> Option<(usize, usize)> {
    let (a, b) = s.split_once("..")?;
    let b = b.strip_prefix('=').unwrap_or(b);
    Some((a.trim().parse().ok()?, b.trim().parse().ok()?))
}

pub fn parse_inputs(spec: &str, alphabet: &[String], seed: u64) -> Result<InputSet> {
    let bad = || Error::Spec(format!("bad input set `{spec}`"));
    if let Some(r) = spec.strip_prefix("shortlex:") {
        let (lo, hi) = range(r).ok_or_else(bad)?;
        return Ok(InputSet::shortlex(alphabet, lo, hi));
    }
    if let Some(r) = spec.strip_prefix("random:") {
        let (count, r) = r.split_once(':').ok_or_else(bad)?;
        let (lo, hi) = range(r).ok_or_else(bad)?;
        return Ok(InputSet::random(alphabet, count.parse().map_err(|_| bad())?, lo, hi, seed));
    }
    let text = std::fs::read_to_string(spec).map_err(|e| Error::from(e).context(spec.to_string()))?;
    let mut inputs = Vec::new();
    for l in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
        inputs.push(tokenize(l, alphabet)?);
    }
    Ok(InputSet { descriptor: format!("file {spec}"), inputs })
}

fn show(w: &[String]) -> String {
    if w.is_empty() {
        return "-".into();
    }
    if w.iter().all(|s| s.chars().count() == 1) {
        w.concat()
    } else {
        w.join(" ")
    }
}

// ---------------------------------------------------------------- running

fn load(path: &Path) -> Result<MachineFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).context(path.display().to_string()))?;
    MachineFile::parse(&text).map_err(|e| e.context(path.display().to_string()))
}

/// Steps and padding for an input of length `n`: the certificate's values,
/// with overrides raised to them when below.
pub fn resolve(cert: Option<&Certificate>, n: usize, steps: Option<usize>, padding: Option<usize>, warn: &mut Vec<String>) -> (Option<usize>, Option<usize>) {
    let d = cert.map(|c| c.at(n)).unwrap_or_default();
    let mut pick = |flag: &str, over: Option<usize>, cert: Option<usize>| match (over, cert) {
        (Some(o), Some(c)) if o < c => {
            warn.push(format!("--{flag} {o} is below the certified {c} at N={n}; using {c}"));
            Some(c)
        }
        (Some(o), _) => Some(o),
        (None, c) => c,
    };
    (pick("steps", steps, d.steps), pick("padding", padding, d.padding))
}

fn cfg_of(m: &Machine) -> Option<Cfg> {
    match m {
        Machine::Dfa(_) => None,
        Machine::Mdm(m) => Some(m.cfg()),
        Machine::Plt(p) => Some(p.base.cfg),
        Machine::Pcot(p) => Some(p.core.cfg),
        Machine::Transformer(t) => Some(t.cfg),
    }
}

/// Runs `f` on `w` with the given steps and padding. Cell machines (MDM,
/// compiled pCoT) return their cells; the others every decoded position.
pub fn run_machine(f: &MachineFile, w: &[String], steps: Option<usize>, padding: Option<usize>, seed: Option<u64>) -> Result<(Vec<String>, RunTrace)> {
    let mut noise = match (seed, cfg_of(&f.machine)) {
        (Some(s), Some(c)) => Some(NoiseStream::new(c, s)),
        _ => None,
    };
    let need = |v: Option<usize>, what: &str| v.ok_or_else(|| Error::Spec(format!("{} run needs --{what} (no certificate gives it)", f.machine.kind())));
    match &f.machine {
        Machine::Dfa(d) => {
            let v = if dfa_eval(d, w)? { ACCEPT } else { REJECT };
            Ok((vec![v.to_string()], RunTrace::new(None)))
        }
        Machine::Mdm(m) => mdm_run(m, w, need(steps, "steps")?, need(padding, "padding")?, RunOpts { noise: noise.as_mut(), capture: false }),
        Machine::Plt(p) => plt_symbols(p, w, need(steps, "steps")?, noise.as_mut()),
        Machine::Pcot(p) => match &f.cert {
            Some(c) if c.source == "mdm" && c.target == "pcot" => {
                let cells = c.env.get(crate::compile::Var::P).unwrap_or(0) as usize;
                pcot_cells(p, w, cells)
            }
            _ => pcot_run(p, w, noise.as_mut()),
        },
        Machine::Transformer(t) => {
            let pads = padding.unwrap_or(0);
            let y = run_padded(t, w, pads)?;
            let mut tr = RunTrace::new(None);
            tr.counters = Counters { evals: 1, padding_used: pads, ..Default::default() };
            Ok((y, tr))
        }
    }
}

/// [`run_machine`] with steps and padding resolved against the file's
/// certificate.
pub fn run_resolved(f: &MachineFile, w: &[String], c: &Common, warn: &mut Vec<String>) -> Result<(Vec<String>, RunTrace)> {
    let (s, p) = resolve(f.cert.as_ref(), w.len(), c.steps, c.padding, warn);
    run_machine(f, w, s, p, c.seed).map_err(|e| e.context(format!("{} on `{}`", f.machine.kind(), show(w))))
}

fn cmd_run(a: &RunArgs) -> Result<Report> {
    let f = load(&a.machine)?;
    let alpha = alphabet(&f.machine);
    let mut inputs = Vec::new();
    for w in &a.words {
        inputs.push(tokenize(w, &alpha)?);
    }
    if let Some(s) = &a.inputs {
        inputs.extend(parse_inputs(s, &alpha, a.common.seed.unwrap_or(0))?.inputs);
    }
    if inputs.is_empty() {
        return Err(Error::Spec("no inputs given".into()));
    }
    let fmt = a.common.format.unwrap_or_default();
    let mut r = Report::default();
    let mut traces = String::new();
    if fmt == Format::Csv {
        r.stdout += "input,output,steps,padding_used,evals\n";
    }
    for w in &inputs {
        let (y, tr) = run_resolved(&f, w, &a.common, &mut r.warnings)?;
        let c = &tr.counters;
        match fmt {
            Format::Csv => writeln!(r.stdout, "{},{},{},{},{}", show(w), y.join(" "), c.steps.max(c.loops), c.padding_used, c.evals).unwrap(),
            Format::Text => writeln!(r.stdout, "input {} output {}", show(w), y.join(" ")).unwrap(),
        }
        writeln!(traces, "input {}", show(w)).unwrap();
        traces += &tr.to_text();
    }
    match &a.trace {
        Some(p) => std::fs::write(p, traces)?,
        None if fmt == Format::Text => r.stdout += &traces,
        None => {}
    }
    Ok(r)
}

// --------------------------------------------------------------- compiling

pub const PAIRS: [&str; 9] =
    ["dfa->mdm", "dfa->pcot", "mdm->plt", "mdm->pcot", "mdm->smdm", "plt->mdm", "pcot->mdm", "transformer->causal", "transformer->unmasked"];

fn need_n(n: Option<usize>, pair: &str) -> Result<usize> {
    n.ok_or_else(|| Error::Spec(format!("{pair} needs --n")))
}

/// Compiles `src` to `to`. Step and cell counts for MDM sources come from
/// the flags, or from the source's certificate at `--n`.
pub fn compile_file(src: &MachineFile, to: &str, a: &CompileArgs, warn: &mut Vec<String>) -> Result<MachineFile> {
    let pair = format!("{}->{to}", src.machine.kind());
    let p = a.common.p.first().copied().unwrap_or(3);
    let sched = |warn: &mut Vec<String>| -> Result<(usize, usize)> {
        let n = a.n.unwrap_or(0);
        let (t, cells) = resolve(src.cert.as_ref(), n, a.common.steps, a.common.padding, warn);
        match (t, cells) {
            (Some(t), Some(c)) => Ok((t, c)),
            _ => Err(Error::Spec(format!("{pair} needs --steps and --padding, or a source certificate and --n"))),
        }
    };
    let (machine, cert) = match (&src.machine, to) {
        (Machine::Dfa(d), "mdm") => {
            let (m, c) = dfa_to_mdm(d, Cfg::new(p)?, a.max_n)?;
            (Machine::Mdm(m), Some(c))
        }
        (Machine::Dfa(d), "pcot") => {
            let n = need_n(a.n, &pair)?;
            let core = dfa_cot_core(d, Cfg::new(p)?, a.max_n.max(2 * n + 1))?;
            (Machine::Pcot(PCoTSpec { core, steps: n, pprime: 1 }), None)
        }
        (Machine::Mdm(m), "plt") => {
            let (t, cells) = sched(warn)?;
            let (x, c) = mdm_to_plt(m, t, cells, a.stochastic)?;
            (Machine::Plt(x), Some(c))
        }
        (Machine::Mdm(m), "pcot") => {
            let n = need_n(a.n, &pair)?;
            let (t, cells) = sched(warn)?;
            let (x, c) = mdm_to_pcot(m, n, cells, t)?;
            (Machine::Pcot(x), Some(c))
        }
        (Machine::Mdm(m), "smdm") => {
            let (t, cells) = sched(warn)?;
            let (x, c) = mdm_to_smdm(m, t, cells, a.max_n)?;
            (Machine::Mdm(x), Some(c))
        }
        (Machine::Plt(x), "mdm") => {
            let n = need_n(a.n, &pair)?;
            let t = resolve(src.cert.as_ref(), n, a.common.steps, None, warn).0.ok_or_else(|| Error::Spec(format!("{pair} needs --steps")))?;
            let (m, c) = plt_to_mdm(x, t, a.max_n, n)?;
            (Machine::Mdm(m), Some(c))
        }
        (Machine::Pcot(x), "mdm") => {
            let (m, c) = pcot_to_mdm(x, need_n(a.n, &pair)?)?;
            (Machine::Mdm(m), Some(c))
        }
        (Machine::Transformer(t), "causal") => {
            let (x, c) = unmasked_to_causal(t, need_n(a.n, &pair)?)?;
            (Machine::Transformer(x), Some(c))
        }
        (Machine::Transformer(t), "unmasked") => {
            let (x, c) = causal_to_unmasked(t, need_n(a.n, &pair)?)?;
            (Machine::Transformer(x), Some(c))
        }
        _ => return Err(Error::Unsupported(pair, PAIRS.join(", "))),
    };
    Ok(MachineFile::new(machine, cert))
}

fn cmd_compile(a: &CompileArgs) -> Result<Report> {
    let src = load(&a.source)?;
    let mut r = Report::default();
    let out = compile_file(&src, &a.to, a, &mut r.warnings)?;
    let text = out.to_text();
    match &a.out {
        Some(p) => {
            std::fs::write(p, &text)?;
            if let Some(c) = &out.cert {
                r.stdout = c.to_text();
            }
        }
        None => r.stdout = text,
    }
    Ok(r)
}

// --------------------------------------------------------------- verifying

/// Wraps a machine file as an oracle machine. Bounds come from its
/// certificate.
pub fn as_oracle(f: Arc<MachineFile>, name: &str, c: &Common) -> oracle::Machine {
    let c2 = c.clone();
    let g = f.clone();
    let m = oracle::Machine::new(name, move |w: &[String]| {
        let mut warn = Vec::new();
        let (outputs, tr) = run_resolved(&g, w, &c2, &mut warn)?;
        Ok(Outcome { outputs, counters: tr.counters })
    });
    match f.cert.clone() {
        Some(cert) => m.with_bounds(move |n| cert.bounds(n)),
        None => m,
    }
}

/// Equivalence of `a` and `b` on `inputs`, aligned by `b`'s certificate.
pub fn verify_pair(a: Arc<MachineFile>, b: Arc<MachineFile>, inputs: &InputSet, c: &Common) -> oracle::EquivalenceReport {
    // certificates align source with target; `a` may be either side
    let align = match (&b.cert, &a.cert) {
        (Some(x), _) => x.alignment.clone(),
        (None, Some(x)) => match &x.alignment {
            Alignment::Pairs(p) => Alignment::Pairs(p.iter().map(|&(s, t)| (t, s)).collect()),
            Alignment::All => Alignment::All,
        },
        (None, None) => Alignment::All,
    };
    let ma = as_oracle(a.clone(), a.machine.kind(), c);
    let mb = as_oracle(b.clone(), b.machine.kind(), c);
    check_equivalence(&ma, &mb, &align, inputs)
}

fn gadget_report(c: &Common) -> Result<Report> {
    let ps = if c.p.is_empty() { vec![2, 3] } else { c.p.clone() };
    let checks = run_suite(&ps, c.seed.unwrap_or(0))?;
    let mut r = Report::default();
    let csv = c.format == Some(Format::Csv);
    if csv {
        r.stdout += "check,p,pass,detail\n";
    }
    let mut fails = 0;
    for ch in &checks {
        let detail = ch.verdict.as_ref().err().cloned().unwrap_or_default();
        fails += ch.verdict.is_err() as usize;
        if csv {
            writeln!(r.stdout, "{},{},{},{}", ch.name, ch.p, ch.verdict.is_ok(), detail.replace(',', ";")).unwrap();
        } else {
            writeln!(r.stdout, "{} {} p={} {}", if ch.verdict.is_ok() { "ok" } else { "FAIL" }, ch.name, ch.p, detail).unwrap();
        }
    }
    if !csv {
        writeln!(r.stdout, "summary checks={} failures={fails} verdict={}", checks.len(), if fails == 0 { "pass" } else { "fail" }).unwrap();
    }
    r.code = (fails > 0) as i32;
    Ok(r)
}

fn cmd_gadgets(c: &Common) -> Result<Report> {
    gadget_report(c)
}

fn cmd_verify(a: &VerifyArgs) -> Result<Report> {
    if a.gadgets {
        return gadget_report(&a.common);
    }
    let (Some(pa), Some(pb)) = (&a.a, &a.b) else {
        return Err(Error::Spec("verify needs two machine files, or --gadgets".into()));
    };
    let fa = Arc::new(load(pa)?);
    let fb = Arc::new(load(pb)?);
    let alpha = if !a.alphabet.is_empty() {
        a.alphabet.clone()
    } else if let Machine::Dfa(d) = &fb.machine {
        d.alphabet.clone()
    } else {
        alphabet(&fa.machine)
    };
    let fixed = fb.cert.as_ref().and_then(|c| c.fixed_n());
    let inputs = match (&a.inputs, fixed) {
        (Some(s), _) => parse_inputs(s, &alpha, a.common.seed.unwrap_or(0))?,
        (None, Some(n)) => InputSet::shortlex(&alpha, n, n),
        (None, None) => InputSet::shortlex(&alpha, 0, 6),
    };
    let rep = verify_pair(fa, fb, &inputs, &a.common);
    let mut r = Report::default();
    match a.common.format.unwrap_or_default() {
        Format::Text => r.stdout = rep.to_text(),
        Format::Csv => {
            r.stdout += "input,pass,detail\n";
            for c in &rep.cases {
                writeln!(r.stdout, "{},{},{}", show(&c.input), c.pass, c.detail.replace(',', ";")).unwrap();
            }
        }
    }
    r.code = (!rep.pass() || rep.bound_failures > 0) as i32;
    Ok(r)
}

// ------------------------------------------------------------- benchmarking

pub fn named_dfa(s: &str) -> Result<DFASpec> {
    match s {
        "parity" => Ok(DFASpec::parity()),
        "ab-star" => Ok(DFASpec::ab_star()),
        _ => match s.strip_prefix("mod").and_then(|k| k.parse().ok()) {
            Some(k) if k >= 1 => Ok(DFASpec::mod_count(k)),
            _ => match load(Path::new(s))?.machine {
                Machine::Dfa(d) => Ok(d),
                m => Err(Error::Spec(format!("{s} holds a {} machine, not a DFA", m.kind()))),
            },
        },
    }
}

/// One bench row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BenchRow {
    pub n: usize,
    pub machine: &'static str,
    pub counters: Counters,
    pub correct: bool,
}

/// The compiled MDM and the sequential CoT on one random word per length.
pub fn bench_rows(d: &DFASpec, ns: &[usize], p: u32, seed: u64) -> Result<Vec<BenchRow>> {
    let cfg = Cfg::new(p)?;
    let max_n = ns.iter().copied().max().unwrap_or(1).max(1);
    let (mdm, cert) = dfa_to_mdm(d, cfg, max_n)?;
    let core = dfa_cot_core(d, cfg, 2 * max_n + 1)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    for &n in ns {
        let w: Vec<String> = (0..n).map(|_| d.alphabet[rng.gen_range(0..d.alphabet.len())].clone()).collect();
        let want = dfa_eval(d, &w)?;
        let dc = cert.at(n);
        let (y, tr) = mdm_run(&mdm, &w, dc.steps.unwrap_or(0), dc.padding.unwrap_or(0), RunOpts::default())?;
        let ok = y.last().map(|s| s == if want { ACCEPT } else { REJECT }).unwrap_or(false);
        rows.push(BenchRow { n, machine: "mdm", counters: tr.counters, correct: ok });
        let (y, tr) = cot_run(&core, &w, n)?;
        let ok = n == 0 || y.last().map(|s| s == if want { ACCEPT } else { REJECT }).unwrap_or(false);
        rows.push(BenchRow { n, machine: "cot", counters: tr.counters, correct: ok });
    }
    Ok(rows)
}

fn cmd_bench(a: &BenchArgs) -> Result<Report> {
    let d = named_dfa(&a.dfa)?;
    let rows = bench_rows(&d, &a.ns, a.common.p.first().copied().unwrap_or(3), a.common.seed.unwrap_or(0))?;
    let mut r = Report::default();
    let csv = a.common.format.unwrap_or(Format::Csv) == Format::Csv;
    r.stdout += if csv { "N,machine,steps,padding_used,evals\n" } else { "     N machine  steps padding  evals\n" };
    for x in &rows {
        let c = &x.counters;
        if csv {
            writeln!(r.stdout, "{},{},{},{},{}", x.n, x.machine, c.steps, c.padding_used, c.evals).unwrap();
        } else {
            writeln!(r.stdout, "{:>6} {:<7} {:>6} {:>7} {:>6}", x.n, x.machine, c.steps, c.padding_used, c.evals).unwrap();
        }
        if !x.correct {
            r.warnings.push(format!("{} at N={} disagrees with the DFA", x.machine, x.n));
            r.code = 1;
        }
    }
    Ok(r)
}
