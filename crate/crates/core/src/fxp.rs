//! Fixed-point number system `F_p`.
//!
//! A value is a signed integer `a` with `|a| <= 2^{2p} - 1`, read as `a * 2^-p`.
//! Every binary operation is computed exactly, rounded to the nearest grid
//! point (ties toward zero) and clamped to `[-B_F, B_F]`.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Largest supported precision: products of two raw values stay inside i64.
pub const MAX_P: u32 = 15;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Cfg {
    pub p: u32,
}

/// A grid point, stored as its scaled integer.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fx(i64);

pub type FxVec = Vec<Fx>;

impl Fx {
    pub const ZERO: Fx = Fx(0);

    pub fn raw(self) -> i64 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

/// Round `num / den` to an integer, ties toward zero.
fn round_div(num: i64, den: i64) -> i64 {
    debug_assert!(den != 0);
    let neg = (num < 0) != (den < 0);
    let (n, d) = (num.unsigned_abs(), den.unsigned_abs());
    let mut q = n / d;
    if 2 * (n % d) > d {
        q += 1;
    }
    if neg {
        -(q as i64)
    } else {
        q as i64
    }
}

/// Round `x / 2^p`, ties toward zero.
#[inline]
fn round_shift(x: i64, p: u32) -> i64 {
    let a = x.unsigned_abs();
    let mut q = a >> p;
    if a & ((1u64 << p) - 1) > 1u64 << (p - 1) {
        q += 1;
    }
    if x < 0 {
        -(q as i64)
    } else {
        q as i64
    }
}

impl Cfg {
    pub fn new(p: u32) -> Result<Self> {
        if p == 0 || p > MAX_P {
            return Err(Error::Precision(p));
        }
        Ok(Cfg { p })
    }

    /// Raw value of `B_F`.
    pub fn max_raw(self) -> i64 {
        (1i64 << (2 * self.p)) - 1
    }

    pub fn scale(self) -> i64 {
        1i64 << self.p
    }

    pub fn bf(self) -> Fx {
        Fx(self.max_raw())
    }

    pub fn neg_bf(self) -> Fx {
        Fx(-self.max_raw())
    }

    pub fn one(self) -> Fx {
        Fx(self.scale())
    }

    pub fn eps(self) -> Fx {
        Fx(1)
    }

    #[inline]
    fn clamp(self, raw: i64) -> Fx {
        let m = self.max_raw();
        Fx(raw.clamp(-m, m))
    }

    pub fn from_raw(self, raw: i64) -> Fx {
        self.clamp(raw)
    }

    /// Raw value that is checked rather than clamped.
    pub fn try_from_raw(self, raw: i64) -> Result<Fx> {
        if raw.unsigned_abs() > self.max_raw() as u64 {
            return Err(Error::OffGrid { raw, p: self.p });
        }
        Ok(Fx(raw))
    }

    pub fn int(self, v: i64) -> Fx {
        self.clamp(v.saturating_mul(self.scale()))
    }

    /// Nearest grid point to `num / den`.
    pub fn ratio(self, num: i64, den: i64) -> Fx {
        self.clamp(round_div(num.saturating_mul(self.scale()), den))
    }

    /// Nearest grid point to a host float. Exact: `x * 2^p` is computed
    /// without error for every finite double in range.
    pub fn quantize(self, x: f64) -> Fx {
        assert!(x.is_finite(), "quantize of non-finite value");
        let lim = (self.max_raw() + 1) as f64;
        let r = x * self.scale() as f64;
        if r >= lim {
            return self.bf();
        }
        if r <= -lim {
            return self.neg_bf();
        }
        let a = r.abs();
        let fl = a.floor();
        let mut q = fl as i64;
        if a - fl > 0.5 {
            q += 1;
        }
        self.clamp(if r < 0.0 { -q } else { q })
    }

    pub fn to_f64(self, x: Fx) -> f64 {
        x.0 as f64 / self.scale() as f64
    }

    #[inline]
    pub fn add(self, a: Fx, b: Fx) -> Fx {
        self.clamp(a.0 + b.0)
    }

    #[inline]
    pub fn sub(self, a: Fx, b: Fx) -> Fx {
        self.clamp(a.0 - b.0)
    }

    pub fn neg(self, a: Fx) -> Fx {
        Fx(-a.0)
    }

    #[inline]
    pub fn mul(self, a: Fx, b: Fx) -> Fx {
        self.clamp(round_shift(a.0 * b.0, self.p))
    }

    pub fn div(self, a: Fx, b: Fx) -> Result<Fx> {
        if b.0 == 0 {
            return Err(Error::DivByZero);
        }
        Ok(self.clamp(round_div(a.0 * self.scale(), b.0)))
    }

    pub fn relu(self, a: Fx) -> Fx {
        Fx(a.0.max(0))
    }

    /// Left fold with rounding after every addition.
    pub fn iter_sum<I: IntoIterator<Item = Fx>>(self, xs: I) -> Fx {
        xs.into_iter().fold(Fx::ZERO, |acc, x| self.add(acc, x))
    }

    /// Fixed-point inner product: products rounded, then folded.
    pub fn inner(self, x: &[Fx], y: &[Fx]) -> Result<Fx> {
        if x.len() != y.len() {
            return Err(Error::Shape(format!("inner: {} vs {}", x.len(), y.len())));
        }
        Ok(self.iter_sum(x.iter().zip(y).map(|(&a, &b)| self.mul(a, b))))
    }

    pub fn exp(self, x: Fx) -> Fx {
        exp_table(self).get(x)
    }

    /// Softmax with fixed-point exp numerators, a clamped iterative
    /// denominator and a rounded division per entry.
    pub fn softmax(self, scores: &[Fx]) -> Result<FxVec> {
        let table = exp_table(self);
        let nums: FxVec = scores.iter().map(|&s| table.get(s)).collect();
        let den = self.iter_sum(nums.iter().copied());
        if den.is_zero() {
            return Err(Error::AllMasked);
        }
        nums.into_iter().map(|n| self.div(n, den)).collect()
    }

    /// Every grid point, ascending.
    pub fn grid(self) -> impl Iterator<Item = Fx> {
        let m = self.max_raw();
        (-m..=m).map(Fx)
    }

    /// Human-readable decimal value.
    pub fn show(self, x: Fx) -> String {
        format!("{}", self.to_f64(x))
    }
}

/// Row-major matrix over `F_p`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: FxVec,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![Fx::ZERO; rows * cols] }
    }

    pub fn from_rows(rows: Vec<FxVec>) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Shape("ragged rows".into()));
        }
        let n = rows.len();
        Ok(Mat { rows: n, cols, data: rows.into_iter().flatten().collect() })
    }

    pub fn identity(n: usize, cfg: Cfg) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m.set(i, i, cfg.one());
        }
        m
    }

    pub fn get(&self, r: usize, c: usize) -> Fx {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: Fx) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[Fx] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [Fx] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn col(&self, c: usize) -> FxVec {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn is_nonzero(&self) -> bool {
        self.data.iter().any(|x| !x.is_zero())
    }

    /// `self * x` for a column vector `x`.
    pub fn apply(&self, x: &[Fx], cfg: Cfg) -> Result<FxVec> {
        if x.len() != self.cols {
            return Err(Error::Shape(format!("apply: {}x{} on {}", self.rows, self.cols, x.len())));
        }
        (0..self.rows).map(|r| cfg.inner(self.row(r), x)).collect()
    }
}

/// Fixed-point matrix product, each entry an `inner` of a row and a column.
pub fn matmul(a: &Mat, b: &Mat, cfg: Cfg) -> Result<Mat> {
    if a.cols != b.rows {
        return Err(Error::Shape(format!("matmul: {}x{} * {}x{}", a.rows, a.cols, b.rows, b.cols)));
    }
    let cols: Vec<FxVec> = (0..b.cols).map(|c| b.col(c)).collect();
    let mut out = Mat::zeros(a.rows, b.cols);
    for r in 0..a.rows {
        for (c, col) in cols.iter().enumerate() {
            out.set(r, c, cfg.inner(a.row(r), col)?);
        }
    }
    Ok(out)
}

/// Saturation threshold for exp: `ln 2 * (p + 1)`. Beyond it exp is B_F
/// (positive side) or 0 (negative side).
pub fn exp_threshold(cfg: Cfg) -> f64 {
    std::f64::consts::LN_2 * (cfg.p as f64 + 1.0)
}

struct ExpTable {
    cfg: Cfg,
    lo: i64,
    vals: Vec<i64>,
}

impl ExpTable {
    fn get(&self, x: Fx) -> Fx {
        let hi = self.lo + self.vals.len() as i64 - 1;
        if x.0 < self.lo {
            Fx::ZERO
        } else if x.0 > hi {
            self.cfg.bf()
        } else {
            Fx(self.vals[(x.0 - self.lo) as usize])
        }
    }
}

fn exp_table(cfg: Cfg) -> Arc<ExpTable> {
    static TABLES: OnceLock<Mutex<HashMap<u32, Arc<ExpTable>>>> = OnceLock::new();
    let tables = TABLES.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = tables.lock().expect("exp table lock");
    guard
        .entry(cfg.p)
        .or_insert_with(|| Arc::new(build_exp_table(cfg)))
        .clone()
}

fn build_exp_table(cfg: Cfg) -> ExpTable {
    // One grid step of slack on each side of the saturation threshold.
    let span = (exp_threshold(cfg) * cfg.scale() as f64).ceil() as i64 + 1;
    let span = span.min(cfg.max_raw());
    let vals = (-span..=span).map(|a| exp_raw(cfg, a)).collect();
    ExpTable { cfg, lo: -span, vals }
}

/// Correctly rounded `exp(a * 2^-p) * 2^p`, clamped.
fn exp_raw(cfg: Cfg, a: i64) -> i64 {
    let s = cfg.scale() as f64;
    let y = (a as f64 / s).exp() * s;
    if y >= (cfg.max_raw() + 1) as f64 {
        return cfg.max_raw();
    }
    let fl = y.floor();
    let frac = y - fl;
    // The exact value is never a tie (e^x is irrational for rational x != 0),
    // so a double is decisive unless it lands right next to one.
    let raw = if (frac - 0.5).abs() > 1e-6 {
        fl as i64 + i64::from(frac > 0.5)
    } else {
        exp_raw_exact(cfg, a)
    };
    raw.min(cfg.max_raw())
}

/// Rigorous fallback: Taylor series in exact rationals with a remainder bound.
fn exp_raw_exact(cfg: Cfg, a: i64) -> i64 {
    if a == 0 {
        return cfg.scale();
    }
    let scale = BigInt::from(cfg.scale());
    let x = BigRational::new(BigInt::from(a.abs()), scale.clone());
    // e^{|x|} by series; e^{-|x|} by reciprocal.
    let mut term = BigRational::one();
    let mut sum = BigRational::one();
    let mut k = 1u64;
    let tol = BigRational::new(BigInt::one(), BigInt::from(1u64) << 80);
    loop {
        term = term * &x / BigRational::from_integer(BigInt::from(k));
        sum += &term;
        k += 1;
        // Remainder after this term is below term * x / (k - x) for k > 2x.
        let kx = BigRational::from_integer(BigInt::from(k));
        if kx > &x * BigRational::from_integer(BigInt::from(2)) && &term * &x / (kx - &x) < tol {
            break;
        }
    }
    let val = if a < 0 { sum.recip() } else { sum };
    let y = val * BigRational::from_integer(scale);
    let fl = y.floor();
    let frac = &y - &fl;
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    let mut r = fl.to_integer();
    if frac > half {
        r += 1;
    }
    debug_assert!(!r.is_negative() && !r.is_zero() || a < 0);
    r.to_i64().unwrap_or(i64::MAX)
}

impl fmt::Display for Fx {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}
