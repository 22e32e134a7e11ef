use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::tfcore::pe::parse_err;
use crate::tfcore::text::Lines;

/// Complete deterministic automaton. States are `0..states.len()`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DFASpec {
    pub states: Vec<String>,
    pub alphabet: Vec<String>,
    pub start: usize,
    pub accept: Vec<bool>,
    /// `delta[q][a]`.
    pub delta: Vec<Vec<usize>>,
}

impl DFASpec {
    pub fn validate(&self) -> Result<()> {
        let q = self.states.len();
        if q == 0 || self.alphabet.is_empty() {
            return Err(Error::Spec("dfa needs states and symbols".into()));
        }
        if self.start >= q || self.accept.len() != q || self.delta.len() != q {
            return Err(Error::Spec("dfa tables do not match the state count".into()));
        }
        if self.delta.iter().any(|r| r.len() != self.alphabet.len() || r.iter().any(|&t| t >= q)) {
            return Err(Error::Spec("dfa transition table is incomplete".into()));
        }
        Ok(())
    }

    pub fn symbol(&self, s: &str) -> Result<usize> {
        self.alphabet.iter().position(|a| a == s).ok_or_else(|| Error::UnknownSymbol(s.into()))
    }

    /// Words over {0,1} with an even number of ones.
    pub fn parity() -> Self {
        DFASpec {
            states: vec!["even".into(), "odd".into()],
            alphabet: vec!["0".into(), "1".into()],
            start: 0,
            accept: vec![true, false],
            delta: vec![vec![0, 1], vec![1, 0]],
        }
    }

    /// `(ab)*`.
    pub fn ab_star() -> Self {
        DFASpec {
            states: vec!["s".into(), "a".into(), "dead".into()],
            alphabet: vec!["a".into(), "b".into()],
            start: 0,
            accept: vec![true, false, false],
            delta: vec![vec![1, 2], vec![2, 0], vec![2, 2]],
        }
    }

    /// Counts ones modulo `m`; accepts when the count is 0.
    pub fn mod_count(m: usize) -> Self {
        DFASpec {
            states: (0..m).map(|i| format!("c{i}")).collect(),
            alphabet: vec!["0".into(), "1".into()],
            start: 0,
            accept: (0..m).map(|i| i == 0).collect(),
            delta: (0..m).map(|i| vec![i, (i + 1) % m]).collect(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut o = String::new();
        writeln!(o, "DFA").unwrap();
        writeln!(o, "STATES {}", self.states.join(" ")).unwrap();
        writeln!(o, "ALPHABET {}", self.alphabet.join(" ")).unwrap();
        writeln!(o, "START {}", self.states[self.start]).unwrap();
        let acc: Vec<&str> = (0..self.states.len()).filter(|&q| self.accept[q]).map(|q| self.states[q].as_str()).collect();
        writeln!(o, "ACCEPT {}", acc.join(" ")).unwrap();
        for (q, row) in self.delta.iter().enumerate() {
            for (a, &t) in row.iter().enumerate() {
                writeln!(o, "T {} {} {}", self.states[q], self.alphabet[a], self.states[t]).unwrap();
            }
        }
        writeln!(o, "END").unwrap();
        o
    }

    pub fn parse(src: &str) -> Result<Self> {
        let mut ls = Lines::new(src);
        Self::read_from(&mut ls)
    }

    pub fn read_from(ls: &mut Lines) -> Result<Self> {
        ls.expect("DFA")?;
        let words = |s: &str| s.split_whitespace().map(String::from).collect::<Vec<_>>();
        let states = words(ls.expect("STATES")?.1);
        let alphabet = words(ls.expect("ALPHABET")?.1);
        let find = |ln: usize, s: &str| states.iter().position(|x| x == s).ok_or_else(|| parse_err(ln, format!("unknown state `{s}`")));
        let (ln, s) = ls.expect("START")?;
        let start = find(ln, s)?;
        let (ln, acc) = ls.expect("ACCEPT")?;
        let mut accept = vec![false; states.len()];
        for a in acc.split_whitespace() {
            accept[find(ln, a)?] = true;
        }
        let mut delta = vec![vec![usize::MAX; alphabet.len()]; states.len()];
        loop {
            let (ln, l) = ls.next()?;
            if l == "END" {
                break;
            }
            let f: Vec<&str> = l.split_whitespace().collect();
            if f.len() != 4 || f[0] != "T" {
                return Err(parse_err(ln, format!("expected `T from sym to`, found `{l}`")));
            }
            let a = alphabet.iter().position(|x| x == f[2]).ok_or_else(|| parse_err(ln, format!("unknown symbol `{}`", f[2])))?;
            delta[find(ln, f[1])?][a] = find(ln, f[3])?;
        }
        let d = DFASpec { states, alphabet, start, accept, delta };
        d.validate().map_err(|e| parse_err(ls.line_no(), e.to_string()))?;
        Ok(d)
    }
}

/// State after reading `w`.
pub fn dfa_run<S: AsRef<str>>(dfa: &DFASpec, w: &[S]) -> Result<usize> {
    let mut q = dfa.start;
    for s in w {
        q = dfa.delta[q][dfa.symbol(s.as_ref())?];
    }
    Ok(q)
}

pub fn dfa_eval<S: AsRef<str>>(dfa: &DFASpec, w: &[S]) -> Result<bool> {
    Ok(dfa.accept[dfa_run(dfa, w)?])
}
