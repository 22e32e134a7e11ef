//! Line-oriented spec format. All numerics are raw scaled integers at the
//! declared precision, so a write/read cycle is bit-exact.
//!
//! Matrices are stored one row per line as sparse `col:raw` pairs (`-` for
//! an all-zero row); their shapes come from the enclosing section header.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::fxp::{Cfg, Fx, FxVec, Mat};

use super::pe::{parse_err, Field, Kind, Pe, Sexp};
use super::{Head, Layer, MaskMode, Mlp, TransformerSpec};

fn write_mat(out: &mut String, m: &Mat) {
    for r in 0..m.rows {
        let row = m.row(r);
        let cells: Vec<String> =
            row.iter().enumerate().filter(|(_, x)| !x.is_zero()).map(|(c, x)| format!("{c}:{}", x.raw())).collect();
        if cells.is_empty() {
            out.push_str("-\n");
        } else {
            out.push_str(&cells.join(" "));
            out.push('\n');
        }
    }
}

fn write_vec(out: &mut String, v: &[Fx]) {
    let m = Mat { rows: 1, cols: v.len(), data: v.to_vec() };
    write_mat(out, &m);
}

fn write_pe(out: &mut String, pe: &Pe, depth: usize) {
    let ind = "  ".repeat(depth);
    for Field { at, kind } in &pe.fields {
        match kind {
            Kind::Bin { bits, e } => writeln!(out, "{ind}FIELD {at} bin {bits} {e}"),
            Kind::SBin { bits, e } => writeln!(out, "{ind}FIELD {at} sbin {bits} {e}"),
            Kind::Ind(c) => writeln!(out, "{ind}FIELD {at} ind {c}"),
            Kind::Const(v) => writeln!(out, "{ind}FIELD {at} const {}", v.raw()),
            Kind::OneHot { size, e } => writeln!(out, "{ind}FIELD {at} onehot {size} {e}"),
            Kind::Sub { n, len, pe } => {
                writeln!(out, "{ind}FIELD {at} sub {n} {len}").unwrap();
                write_pe(out, pe, depth + 1);
                writeln!(out, "{ind}ENDSUB")
            }
        }
        .unwrap();
    }
}

pub fn write(spec: &TransformerSpec) -> String {
    let mut o = String::new();
    o.push_str("TRANSFORMER\n");
    for note in &spec.notes {
        writeln!(o, "NOTE {note}").unwrap();
    }
    writeln!(o, "PRECISION {}", spec.cfg.p).unwrap();
    writeln!(o, "WIDTH {}", spec.d).unwrap();
    let mm = match spec.mask {
        MaskMode::Unmasked => "unmasked",
        MaskMode::Causal => "causal",
    };
    writeln!(o, "MASKMODE {mm}").unwrap();
    if let Some(l) = spec.fixed_len {
        writeln!(o, "FIXEDLEN {l}").unwrap();
    }
    writeln!(o, "ALPHABET {}", spec.alphabet.join(" ")).unwrap();
    writeln!(o, "OUTPUTS {}", spec.outputs.join(" ")).unwrap();
    o.push_str("EMBED\n");
    write_mat(&mut o, &spec.embed);
    o.push_str("PE\n");
    write_pe(&mut o, &spec.pe, 1);
    o.push_str("ENDPE\n");
    for l in &spec.layers {
        if l.note.is_empty() {
            o.push_str("LAYER\n");
        } else {
            writeln!(o, "LAYER {}", l.note).unwrap();
        }
        for h in &l.heads {
            writeln!(o, "HEAD {} {} {}", h.wq.rows, h.wv.rows, h.offset).unwrap();
            write_mat(&mut o, &h.wq);
            write_mat(&mut o, &h.wk);
            write_mat(&mut o, &h.wv);
        }
        for m in &l.mlps {
            writeln!(o, "MLP {} {}", m.w1.rows, if m.out_relu { "relu" } else { "linear" }).unwrap();
            write_mat(&mut o, &m.w1);
            write_vec(&mut o, &m.b1);
            write_mat(&mut o, &m.w2);
            write_vec(&mut o, &m.b2);
        }
        o.push_str("ENDLAYER\n");
    }
    o.push_str("OUT\n");
    write_mat(&mut o, &spec.out);
    o.push_str("END\n");
    o
}

/// Cursor over meaningful lines (blank lines and `#` comments skipped).
pub struct Lines<'a> {
    lines: Vec<(usize, &'a str)>,
    at: usize,
}

impl<'a> Lines<'a> {
    pub fn new(src: &'a str) -> Self {
        let lines = src
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
            .collect();
        Lines { lines, at: 0 }
    }

    pub fn peek(&self) -> Option<(usize, &'a str)> {
        self.lines.get(self.at).copied()
    }

    pub fn next(&mut self) -> Result<(usize, &'a str)> {
        let l = self.peek().ok_or_else(|| parse_err(self.lines.last().map_or(0, |l| l.0), "unexpected end of file"))?;
        self.at += 1;
        Ok(l)
    }

    pub fn line_no(&self) -> usize {
        self.peek().map_or(0, |l| l.0)
    }

    /// Next line, which must start with `key`; returns the remainder.
    pub fn expect(&mut self, key: &str) -> Result<(usize, &'a str)> {
        let (ln, l) = self.next()?;
        let mut it = l.splitn(2, char::is_whitespace);
        if it.next() != Some(key) {
            return Err(parse_err(ln, format!("expected `{key}`, found `{l}`")));
        }
        Ok((ln, it.next().unwrap_or("").trim()))
    }
}

fn num<T: std::str::FromStr>(ln: usize, s: &str) -> Result<T> {
    s.parse().map_err(|_| parse_err(ln, format!("bad number `{s}`")))
}

fn read_mat(ls: &mut Lines, cfg: Cfg, rows: usize, cols: usize) -> Result<Mat> {
    let mut m = Mat::zeros(rows, cols);
    for r in 0..rows {
        let (ln, l) = ls.next()?;
        if l == "-" {
            continue;
        }
        for cell in l.split_whitespace() {
            let (c, v) = cell.split_once(':').ok_or_else(|| parse_err(ln, format!("bad cell `{cell}`")))?;
            let c: usize = num(ln, c)?;
            if c >= cols {
                return Err(parse_err(ln, format!("column {c} out of range {cols}")));
            }
            let raw: i64 = num(ln, v)?;
            m.set(r, c, cfg.try_from_raw(raw).map_err(|e| parse_err(ln, e.to_string()))?);
        }
    }
    Ok(m)
}

fn read_vec(ls: &mut Lines, cfg: Cfg, n: usize) -> Result<FxVec> {
    Ok(read_mat(ls, cfg, 1, n)?.data)
}

fn read_pe(ls: &mut Lines, cfg: Cfg, end: &str) -> Result<Pe> {
    let mut pe = Pe::default();
    loop {
        let (ln, l) = ls.next()?;
        if l == end {
            return Ok(pe);
        }
        let rest = l.strip_prefix("FIELD").ok_or_else(|| parse_err(ln, format!("expected FIELD or {end}")))?;
        let mut sx = Sexp::new(rest);
        let perr = |m: String| parse_err(ln, m);
        let at: usize = num(ln, sx.word().map_err(perr)?)?;
        let kw = sx.word().map_err(perr)?;
        let kind = match kw {
            "bin" | "sbin" | "onehot" => {
                let w: usize = num(ln, sx.word().map_err(perr)?)?;
                let e = sx.expr().map_err(perr)?;
                match kw {
                    "bin" => Kind::Bin { bits: w, e },
                    "sbin" => Kind::SBin { bits: w, e },
                    _ => Kind::OneHot { size: w, e },
                }
            }
            "ind" => Kind::Ind(sx.cond().map_err(perr)?),
            "const" => {
                let raw: i64 = num(ln, sx.word().map_err(perr)?)?;
                Kind::Const(cfg.try_from_raw(raw).map_err(|e| parse_err(ln, e.to_string()))?)
            }
            "sub" => {
                let n = sx.expr().map_err(perr)?;
                let len = sx.expr().map_err(perr)?;
                Kind::Sub { n, len, pe: read_pe(ls, cfg, "ENDSUB")? }
            }
            k => return Err(parse_err(ln, format!("unknown field kind `{k}`"))),
        };
        if !sx.done() {
            return Err(parse_err(ln, format!("trailing tokens {:?}", sx.rest())));
        }
        pe.fields.push(Field { at, kind });
    }
}

pub fn read(src: &str) -> Result<TransformerSpec> {
    let mut ls = Lines::new(src);
    let spec = read_from(&mut ls)?;
    if let Some((ln, l)) = ls.peek() {
        return Err(parse_err(ln, format!("trailing content `{l}`")));
    }
    Ok(spec)
}

pub fn read_from(ls: &mut Lines) -> Result<TransformerSpec> {
    ls.expect("TRANSFORMER")?;
    let mut notes = Vec::new();
    while let Some((_, l)) = ls.peek() {
        if let Some(n) = l.strip_prefix("NOTE") {
            notes.push(n.trim().to_string());
            ls.next()?;
        } else {
            break;
        }
    }
    let (ln, p) = ls.expect("PRECISION")?;
    let cfg = Cfg::new(num(ln, p)?).map_err(|e| parse_err(ln, e.to_string()))?;
    let (ln, d) = ls.expect("WIDTH")?;
    let d: usize = num(ln, d)?;
    let (ln, mm) = ls.expect("MASKMODE")?;
    let mask = match mm {
        "unmasked" => MaskMode::Unmasked,
        "causal" => MaskMode::Causal,
        _ => return Err(parse_err(ln, format!("unknown mask mode `{mm}`"))),
    };
    let mut fixed_len = None;
    if ls.peek().is_some_and(|(_, l)| l.starts_with("FIXEDLEN")) {
        let (ln, v) = ls.expect("FIXEDLEN")?;
        fixed_len = Some(num(ln, v)?);
    }
    let words = |s: &str| s.split_whitespace().map(String::from).collect::<Vec<_>>();
    let alphabet = words(ls.expect("ALPHABET")?.1);
    let outputs = words(ls.expect("OUTPUTS")?.1);
    ls.expect("EMBED")?;
    let embed = read_mat(ls, cfg, d, alphabet.len())?;
    ls.expect("PE")?;
    let pe = read_pe(ls, cfg, "ENDPE")?;
    let mut layers = Vec::new();
    while ls.peek().is_some_and(|(_, l)| l.starts_with("LAYER")) {
        let (_, note) = ls.expect("LAYER")?;
        let mut layer = Layer { note: note.to_string(), ..Layer::default() };
        loop {
            let (ln, l) = ls.next()?;
            let f: Vec<&str> = l.split_whitespace().collect();
            match f.first().copied() {
                Some("ENDLAYER") => break,
                Some("HEAD") if f.len() == 4 => {
                    let (dk, dv, off): (usize, usize, usize) = (num(ln, f[1])?, num(ln, f[2])?, num(ln, f[3])?);
                    let wq = read_mat(ls, cfg, dk, d)?;
                    let wk = read_mat(ls, cfg, dk, d)?;
                    let wv = read_mat(ls, cfg, dv, d)?;
                    layer.heads.push(Head { wq, wk, wv, offset: off });
                }
                Some("MLP") if f.len() == 3 => {
                    let hd: usize = num(ln, f[1])?;
                    let out_relu = match f[2] {
                        "relu" => true,
                        "linear" => false,
                        o => return Err(parse_err(ln, format!("unknown activation `{o}`"))),
                    };
                    let w1 = read_mat(ls, cfg, hd, d)?;
                    let b1 = read_vec(ls, cfg, hd)?;
                    let w2 = read_mat(ls, cfg, d, hd)?;
                    let b2 = read_vec(ls, cfg, d)?;
                    layer.mlps.push(Mlp { w1, b1, w2, b2, out_relu });
                }
                _ => return Err(parse_err(ln, format!("unexpected `{l}` in layer"))),
            }
        }
        layers.push(layer);
    }
    ls.expect("OUT")?;
    let out = read_mat(ls, cfg, outputs.len(), d)?;
    ls.expect("END")?;
    let spec = TransformerSpec { cfg, alphabet, outputs, d, embed, layers, out, mask, pe, fixed_len, notes };
    spec.validate().map_err(|e| match e {
        Error::Spec(m) => parse_err(ls.line_no(), m),
        e => e,
    })?;
    Ok(spec)
}
