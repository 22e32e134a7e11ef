//! Machine files: one machine, optionally preceded by the certificate of
//! the compilation that produced it.
//!
//! ```text
//! MACHINE mdm | plt | pcot | transformer
//! CERT ...                       (optional)
//! CLASS deterministic            (mdm)
//! FANOUT 2                       (mdm, optional)
//! PLANNER / TRANSFORMER..END     (mdm)
//! PREDICTOR / TRANSFORMER..END   (mdm)
//! LOOP 1 3 / PAD 8 / NOISE 4 5   (plt; NOISE marks it stochastic)
//! STEPS 4 / PPRIME 1             (pcot)
//! TRANSFORMER..END               (plt, pcot, transformer)
//! END
//! ```
//!
//! A bare `DFA .. END` file reads as a DFA.

use std::fmt::Write as _;

use crate::error::Result;
use crate::models::{MDMSpec, PCoTSpec, PLTSpec, PlannerClass};
use crate::oracle::DFASpec;
use crate::tfcore::pe::parse_err;
use crate::tfcore::text::{self, Lines};
use crate::tfcore::TransformerSpec;

use super::cert::Certificate;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Machine {
    Transformer(TransformerSpec),
    Mdm(MDMSpec),
    Plt(PLTSpec),
    Pcot(PCoTSpec),
    Dfa(DFASpec),
}

impl Machine {
    pub fn kind(&self) -> &'static str {
        match self {
            Machine::Transformer(_) => "transformer",
            Machine::Mdm(_) => "mdm",
            Machine::Plt(_) => "plt",
            Machine::Pcot(_) => "pcot",
            Machine::Dfa(_) => "dfa",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MachineFile {
    pub machine: Machine,
    pub cert: Option<Certificate>,
}

impl MachineFile {
    pub fn new(machine: Machine, cert: Option<Certificate>) -> Self {
        MachineFile { machine, cert }
    }

    pub fn to_text(&self) -> String {
        if let Machine::Dfa(d) = &self.machine {
            return d.to_text();
        }
        let mut o = format!("MACHINE {}\n", self.machine.kind());
        if let Some(c) = &self.cert {
            o += &c.to_text();
        }
        match &self.machine {
            Machine::Transformer(t) => o += &text::write(t),
            Machine::Mdm(m) => {
                writeln!(o, "CLASS {}", m.class.name()).unwrap();
                if let Some(f) = m.fanout {
                    writeln!(o, "FANOUT {f}").unwrap();
                }
                o += "PLANNER\n";
                o += &text::write(&m.planner);
                o += "PREDICTOR\n";
                o += &text::write(&m.predictor);
            }
            Machine::Plt(p) => {
                writeln!(o, "LOOP {} {}", p.loop_range.0, p.loop_range.1).unwrap();
                writeln!(o, "PAD {}", p.pad).unwrap();
                if p.stochastic {
                    let (s, w) = p.noise_slice.unwrap_or((0, 0));
                    writeln!(o, "NOISE {s} {w}").unwrap();
                }
                o += &text::write(&p.base);
            }
            Machine::Pcot(p) => {
                writeln!(o, "STEPS {}", p.steps).unwrap();
                writeln!(o, "PPRIME {}", p.pprime).unwrap();
                o += &text::write(&p.core);
            }
            Machine::Dfa(_) => unreachable!(),
        }
        o += "END\n";
        o
    }

    pub fn parse(src: &str) -> Result<Self> {
        let mut ls = Lines::new(src);
        let f = Self::read_from(&mut ls)?;
        if let Some((ln, l)) = ls.peek() {
            return Err(parse_err(ln, format!("trailing content `{l}`")));
        }
        Ok(f)
    }

    pub fn read_from(ls: &mut Lines) -> Result<Self> {
        if ls.peek().is_some_and(|(_, l)| l == "DFA") {
            return Ok(MachineFile::new(Machine::Dfa(DFASpec::read_from(ls)?), None));
        }
        let (ln, kind) = ls.expect("MACHINE")?;
        let cert = Certificate::read_from(ls)?;
        let num = |ls: &mut Lines, key: &str| -> Result<usize> {
            let (ln, v) = ls.expect(key)?;
            v.trim().parse().map_err(|_| parse_err(ln, format!("bad {key} value `{v}`")))
        };
        let machine = match kind.trim() {
            "transformer" => Machine::Transformer(text::read_from(ls)?),
            "mdm" => {
                let (ln, c) = ls.expect("CLASS")?;
                let class = PlannerClass::parse(c.trim()).ok_or_else(|| parse_err(ln, format!("unknown planner class `{c}`")))?;
                let fanout = if ls.peek().is_some_and(|(_, l)| l.starts_with("FANOUT")) { Some(num(ls, "FANOUT")?) } else { None };
                ls.expect("PLANNER")?;
                let planner = text::read_from(ls)?;
                ls.expect("PREDICTOR")?;
                let predictor = text::read_from(ls)?;
                let m = MDMSpec { planner, predictor, class, fanout };
                m.validate()?;
                Machine::Mdm(m)
            }
            "plt" => {
                let (ln, l) = ls.expect("LOOP")?;
                let r: Vec<usize> = l.split_whitespace().filter_map(|x| x.parse().ok()).collect();
                if r.len() != 2 {
                    return Err(parse_err(ln, "expected `LOOP first last`"));
                }
                let pad = num(ls, "PAD")?;
                let mut noise_slice = None;
                if ls.peek().is_some_and(|(_, l)| l.starts_with("NOISE")) {
                    let (ln, l) = ls.expect("NOISE")?;
                    let v: Vec<usize> = l.split_whitespace().filter_map(|x| x.parse().ok()).collect();
                    if v.len() != 2 {
                        return Err(parse_err(ln, "expected `NOISE start width`"));
                    }
                    noise_slice = Some((v[0], v[1]));
                }
                let p = PLTSpec { base: text::read_from(ls)?, loop_range: (r[0], r[1]), pad, stochastic: noise_slice.is_some(), noise_slice };
                p.validate()?;
                Machine::Plt(p)
            }
            "pcot" => {
                let steps = num(ls, "STEPS")?;
                let pprime = num(ls, "PPRIME")?;
                Machine::Pcot(PCoTSpec { core: text::read_from(ls)?, steps, pprime })
            }
            k => return Err(parse_err(ln, format!("unknown machine kind `{k}`"))),
        };
        ls.expect("END")?;
        Ok(MachineFile { machine, cert })
    }
}
