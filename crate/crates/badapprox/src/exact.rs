//! Exact arithmetic substrate.
//!
//! Rationals are `BigRational`. Irrational thresholds such as `b^{r t}` with
//! `b = R^{1/(1+gamma)}` are carried as [`AlgebraicScalar`] values, products of
//! rational powers of positive rationals, whose comparisons are decided exactly
//! by raising both sides to a common integer power.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub type Rat = BigRational;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExactError {
    #[error("weights sum to {0}, expected 1")]
    SumNotOne(String),
    #[error("weight {index} is negative ({value})")]
    NegativeEntry { index: usize, value: String },
    #[error("all weights are zero")]
    AllZero,
    #[error("weight vector is empty")]
    Empty,
    #[error("interval [{lo}, {hi}] has non-positive length")]
    EmptyInterval { lo: String, hi: String },
    #[error("cannot parse {0:?} as a rational")]
    Parse(String),
    #[error("rational power of a negative value {0}")]
    NegativeBase(String),
}

/// Build `n/d` from machine integers.
pub fn rat(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

pub fn big(n: &BigInt) -> Rat {
    Rat::from_integer(n.clone())
}

/// Parse `p/q`, an integer, or a finite decimal such as `-1.25`.
pub fn parse_rat(s: &str) -> Result<Rat, ExactError> {
    let s = s.trim();
    let err = || ExactError::Parse(s.to_string());
    if let Some((p, q)) = s.split_once('/') {
        let p = BigInt::from_str(p.trim()).map_err(|_| err())?;
        let q = BigInt::from_str(q.trim()).map_err(|_| err())?;
        if q.is_zero() {
            return Err(err());
        }
        return Ok(Rat::new(p, q));
    }
    if let Some((whole, frac)) = s.split_once('.') {
        if frac.is_empty() || !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(err());
        }
        let negative = whole.starts_with('-');
        let whole_digits = whole.trim_start_matches(['-', '+']);
        let digits = format!("{}{}", if whole_digits.is_empty() { "0" } else { whole_digits }, frac);
        let mut num = BigInt::from_str(&digits).map_err(|_| err())?;
        if negative {
            num = -num;
        }
        let den = num_traits::pow(BigInt::from(10), frac.len());
        return Ok(Rat::new(num, den));
    }
    BigInt::from_str(s).map(Rat::from_integer).map_err(|_| err())
}

/// Canonical `p/q` text form (the denominator is always written).
pub fn fmt_rat(r: &Rat) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Render `sum c_i * m_i` with signs folded in and unit coefficients dropped.
/// An empty monomial is the constant term.
pub fn fmt_sum<'a>(terms: impl IntoIterator<Item = (&'a Rat, String)>) -> String {
    let mut out = String::new();
    for (c, mono) in terms {
        if c.is_zero() {
            continue;
        }
        let a = c.abs();
        let body = match (a.is_one(), mono.is_empty()) {
            (_, true) => a.to_string(),
            (true, false) => mono,
            (false, false) => format!("{a}*{mono}"),
        };
        match (out.is_empty(), c.is_negative()) {
            (true, true) => out.push_str(&format!("-{body}")),
            (true, false) => out.push_str(&body),
            (false, true) => out.push_str(&format!(" - {body}")),
            (false, false) => out.push_str(&format!(" + {body}")),
        }
    }
    if out.is_empty() {
        out.push('0');
    }
    out
}

pub fn parse_rat_list(s: &str) -> Result<Vec<Rat>, ExactError> {
    s.split(',').filter(|p| !p.trim().is_empty()).map(parse_rat).collect()
}

pub fn rat_to_f64(r: &Rat) -> f64 {
    match (r.numer().to_f64(), r.denom().to_f64()) {
        (Some(n), Some(d)) if n.is_finite() && d.is_finite() => n / d,
        _ => {
            // Large operands: compare bit lengths to keep the quotient finite.
            let shift = r.numer().bits().max(r.denom().bits()) as i64 - 900;
            let shift = shift.max(0) as usize;
            let n = (r.numer() >> shift).to_f64().unwrap_or(0.0);
            let d = (r.denom() >> shift).to_f64().unwrap_or(1.0);
            n / d
        }
    }
}

pub fn floor_int(r: &Rat) -> BigInt {
    r.floor().to_integer()
}

pub fn ceil_int(r: &Rat) -> BigInt {
    r.ceil().to_integer()
}

/// Nearest integer, halves rounded down.
pub fn nearest_int(r: &Rat) -> BigInt {
    let f = r.floor();
    if r - &f > rat(1, 2) {
        f.to_integer() + 1
    } else {
        f.to_integer()
    }
}

/// `r^e` for an integer exponent.
pub fn pow_rat(r: &Rat, e: i64) -> Rat {
    if e >= 0 {
        Rat::new(num_traits::pow(r.numer().clone(), e as usize), num_traits::pow(r.denom().clone(), e as usize))
    } else {
        let p = pow_rat(r, -e);
        p.recip()
    }
}

/// Floor of the `k`-th root of a nonnegative integer.
pub fn iroot_floor(x: &BigInt, k: u32) -> BigInt {
    debug_assert!(!x.is_negative());
    x.nth_root(k)
}

/// Exact `k`-th root of a nonnegative rational when it exists.
pub fn exact_root(x: &Rat, k: u32) -> Option<Rat> {
    if x.is_negative() {
        return None;
    }
    let n = iroot_floor(x.numer(), k);
    let d = iroot_floor(x.denom(), k);
    if num_traits::pow(n.clone(), k as usize) == *x.numer() && num_traits::pow(d.clone(), k as usize) == *x.denom() {
        Some(Rat::new(n, d))
    } else {
        None
    }
}

pub mod serde_rat {
    //! Serialize rationals as canonical `p/q` strings.
    use super::*;

    pub fn serialize<S: Serializer>(r: &Rat, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&fmt_rat(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rat, D::Error> {
        let s = String::deserialize(d)?;
        parse_rat(&s).map_err(serde::de::Error::custom)
    }
}

pub mod serde_rat_vec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[Rat], s: S) -> Result<S::Ok, S::Error> {
        let strings: Vec<String> = v.iter().map(fmt_rat).collect();
        strings.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rat>, D::Error> {
        let v = Vec::<String>::deserialize(d)?;
        v.iter().map(|s| parse_rat(s).map_err(serde::de::Error::custom)).collect()
    }
}

pub mod serde_bigint_vec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[BigInt], s: S) -> Result<S::Ok, S::Error> {
        let strings: Vec<String> = v.iter().map(|x| x.to_string()).collect();
        strings.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<BigInt>, D::Error> {
        let v = Vec::<String>::deserialize(d)?;
        v.iter().map(|s| BigInt::from_str(s).map_err(serde::de::Error::custom)).collect()
    }
}

/// Nonnegative weights summing to one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeightVector {
    entries: Vec<Rat>,
}

impl WeightVector {
    pub fn new(entries: Vec<Rat>) -> Result<Self, ExactError> {
        if entries.is_empty() {
            return Err(ExactError::Empty);
        }
        for (index, value) in entries.iter().enumerate() {
            if value.is_negative() {
                return Err(ExactError::NegativeEntry { index, value: fmt_rat(value) });
            }
        }
        if entries.iter().all(Zero::is_zero) {
            return Err(ExactError::AllZero);
        }
        let sum: Rat = entries.iter().sum();
        if !sum.is_one() {
            return Err(ExactError::SumNotOne(fmt_rat(&sum)));
        }
        Ok(Self { entries })
    }

    pub fn parse(s: &str) -> Result<Self, ExactError> {
        Self::new(parse_rat_list(s)?)
    }

    /// Equal weights `1/k` on the first `k` of `n` coordinates, zero elsewhere.
    pub fn leading_uniform(k: usize, n: usize) -> Result<Self, ExactError> {
        let entries = (0..n).map(|i| if i < k { rat(1, k as i64) } else { Rat::zero() }).collect();
        Self::new(entries)
    }

    pub fn n(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[Rat] {
        &self.entries
    }

    /// Smallest strictly positive weight.
    pub fn tau(&self) -> Rat {
        self.entries.iter().filter(|r| r.is_positive()).min().cloned().expect("validated")
    }

    /// Largest weight.
    pub fn gamma(&self) -> Rat {
        self.entries.iter().max().cloned().expect("validated")
    }

    /// Number of zero weights.
    pub fn zeros(&self) -> usize {
        self.entries.iter().filter(|r| r.is_zero()).count()
    }

    /// `1 / (1 + tau)`.
    pub fn lambda(&self) -> Rat {
        (Rat::one() + self.tau()).recip()
    }
}

impl fmt::Display for WeightVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.entries.iter().map(|r| r.to_string()).collect();
        write!(f, "({})", parts.join(", "))
    }
}

impl Serialize for WeightVector {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        serde_rat_vec::serialize(&self.entries, s)
    }
}

impl<'de> Deserialize<'de> for WeightVector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = serde_rat_vec::deserialize(d)?;
        WeightVector::new(v).map_err(serde::de::Error::custom)
    }
}

/// Closed interval with rational endpoints and positive length.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RatInterval {
    pub lo: Rat,
    pub hi: Rat,
}

impl RatInterval {
    pub fn new(lo: Rat, hi: Rat) -> Result<Self, ExactError> {
        if lo >= hi {
            return Err(ExactError::EmptyInterval { lo: fmt_rat(&lo), hi: fmt_rat(&hi) });
        }
        Ok(Self { lo, hi })
    }

    pub fn len(&self) -> Rat {
        &self.hi - &self.lo
    }

    pub fn mid(&self) -> Rat {
        (&self.lo + &self.hi) / int(2)
    }

    pub fn contains(&self, x: &Rat) -> bool {
        &self.lo <= x && x <= &self.hi
    }

    pub fn contains_interval(&self, other: &RatInterval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    /// Closed intervals meet (sharing an endpoint counts).
    pub fn meets(&self, other: &RatInterval) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    /// Split into `parts` equal closed pieces with shared endpoints.
    pub fn split(&self, parts: u64) -> Vec<RatInterval> {
        let step = self.len() / big(&BigInt::from(parts));
        (0..parts)
            .map(|k| {
                let lo = &self.lo + &step * big(&BigInt::from(k));
                let hi = if k + 1 == parts { self.hi.clone() } else { &lo + &step };
                RatInterval { lo, hi }
            })
            .collect()
    }
}

impl fmt::Display for RatInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

impl Serialize for RatInterval {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        [fmt_rat(&self.lo), fmt_rat(&self.hi)].serialize(s)
    }
}

impl<'de> Deserialize<'de> for RatInterval {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let [lo, hi] = <[String; 2]>::deserialize(d)?;
        let lo = parse_rat(&lo).map_err(serde::de::Error::custom)?;
        let hi = parse_rat(&hi).map_err(serde::de::Error::custom)?;
        RatInterval::new(lo, hi).map_err(serde::de::Error::custom)
    }
}

/// A real number `c * B_1^{e_1} * ... * B_k^{e_k}` with rational `c`, rational
/// bases `B_i > 1` and exponents `e_i` in `(0, 1)`.
///
/// The single-factor case `c * R^{p/q}` with integer `R` covers every threshold
/// of the form `kappa * b^{-t}` or `b^{r_i t}`; several factors appear when
/// such thresholds are multiplied together.
#[derive(Clone, Debug)]
pub struct AlgebraicScalar {
    coef: Rat,
    factors: Vec<(Rat, Rat)>,
}

impl AlgebraicScalar {
    pub fn from_rat(c: Rat) -> Self {
        Self { coef: c, factors: Vec::new() }
    }

    pub fn from_int(n: i64) -> Self {
        Self::from_rat(int(n))
    }

    pub fn one() -> Self {
        Self::from_int(1)
    }

    /// `c * base^exp`. Panics if `base <= 0`.
    pub fn scaled_power(c: Rat, base: Rat, exp: Rat) -> Self {
        assert!(base.is_positive(), "power base must be positive");
        let mut s = Self { coef: c, factors: vec![(base, exp)] };
        s.normalize();
        s
    }

    pub fn power(base: Rat, exp: Rat) -> Self {
        Self::scaled_power(Rat::one(), base, exp)
    }

    pub fn coef(&self) -> &Rat {
        &self.coef
    }

    pub fn factors(&self) -> &[(Rat, Rat)] {
        &self.factors
    }

    pub fn as_rat(&self) -> Option<&Rat> {
        if self.factors.is_empty() {
            Some(&self.coef)
        } else {
            None
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coef.is_zero()
    }

    pub fn signum(&self) -> i32 {
        if self.coef.is_positive() {
            1
        } else if self.coef.is_negative() {
            -1
        } else {
            0
        }
    }

    fn normalize(&mut self) {
        if self.coef.is_zero() {
            self.factors.clear();
            return;
        }
        let mut merged: Vec<(Rat, Rat)> = Vec::new();
        for (base, exp) in self.factors.drain(..) {
            let (base, exp) = if base < Rat::one() { (base.recip(), -exp) } else { (base, exp) };
            if base.is_one() || exp.is_zero() {
                continue;
            }
            if let Some(slot) = merged.iter_mut().find(|(b, _)| *b == base) {
                slot.1 += exp;
            } else {
                merged.push((base, exp));
            }
        }
        let mut out = Vec::new();
        for (base, exp) in merged {
            let whole = exp.floor();
            let frac = &exp - &whole;
            let w = whole.to_integer().to_i64().expect("exponent fits in i64");
            self.coef *= pow_rat(&base, w);
            if frac.is_zero() {
                continue;
            }
            // Absorb perfect powers such as 8^{2/3} = 4.
            let q = frac.denom().to_u32().expect("small denominator");
            let p = frac.numer().to_i64().expect("small numerator");
            if let Some(root) = exact_root(&pow_rat(&base, p), q) {
                self.coef *= root;
            } else {
                out.push((base, frac));
            }
        }
        out.sort_by(|a, b| a.0.cmp(&b.0));
        self.factors = out;
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut s = Self {
            coef: &self.coef * &other.coef,
            factors: self.factors.iter().chain(other.factors.iter()).cloned().collect(),
        };
        s.normalize();
        s
    }

    pub fn mul_rat(&self, r: &Rat) -> Self {
        let mut s = self.clone();
        s.coef *= r;
        s.normalize();
        s
    }

    pub fn recip(&self) -> Self {
        assert!(!self.coef.is_zero(), "reciprocal of zero");
        let mut s = Self {
            coef: self.coef.recip(),
            factors: self.factors.iter().map(|(b, e)| (b.clone(), -e.clone())).collect(),
        };
        s.normalize();
        s
    }

    pub fn div(&self, other: &Self) -> Self {
        self.mul(&other.recip())
    }

    pub fn abs(&self) -> Self {
        Self { coef: self.coef.abs(), factors: self.factors.clone() }
    }

    pub fn neg(&self) -> Self {
        Self { coef: -self.coef.clone(), factors: self.factors.clone() }
    }

    /// `self^e`. Non-integer exponents require a positive value.
    pub fn pow(&self, e: &Rat) -> Result<Self, ExactError> {
        if e.is_integer() {
            let k = e.to_integer().to_i64().expect("exponent fits in i64");
            let mut s = Self {
                coef: pow_rat(&self.coef, k),
                factors: self.factors.iter().map(|(b, x)| (b.clone(), x * e)).collect(),
            };
            s.normalize();
            return Ok(s);
        }
        if !self.coef.is_positive() {
            return Err(ExactError::NegativeBase(self.to_string()));
        }
        let mut factors: Vec<(Rat, Rat)> = self.factors.iter().map(|(b, x)| (b.clone(), x * e)).collect();
        factors.push((self.coef.clone(), e.clone()));
        let mut s = Self { coef: Rat::one(), factors };
        s.normalize();
        Ok(s)
    }

    /// Common denominator of all exponents.
    fn exponent_lcm(&self) -> u64 {
        self.factors.iter().fold(1u64, |acc, (_, e)| acc.lcm(&e.denom().to_u64().expect("small denominator")))
    }

    /// `self^d` for `d` a multiple of every exponent denominator: a rational.
    fn raised_rational(&self, d: u64) -> Rat {
        let mut v = pow_rat(&self.coef, d as i64);
        for (b, e) in &self.factors {
            let k = (e * big(&BigInt::from(d))).to_integer().to_i64().expect("exponent fits");
            v *= pow_rat(b, k);
        }
        v
    }

    /// Exact three-way comparison.
    pub fn cmp_exact(&self, other: &Self) -> Ordering {
        let (sa, sb) = (self.signum(), other.signum());
        if sa != sb {
            return sa.cmp(&sb);
        }
        if sa == 0 {
            return Ordering::Equal;
        }
        // Same nonzero sign: compare |self| / |other| with 1.
        let ratio = self.abs().div(&other.abs());
        let d = ratio.exponent_lcm();
        let raised = ratio.raised_rational(d);
        let ord = raised.cmp(&Rat::one());
        if sa > 0 {
            ord
        } else {
            ord.reverse()
        }
    }

    pub fn cmp_rat(&self, r: &Rat) -> Ordering {
        if self.factors.is_empty() {
            return self.coef.cmp(r);
        }
        self.cmp_exact(&Self::from_rat(r.clone()))
    }

    /// Rational bracket `lo <= self <= hi` with roughly `bits` bits of relative accuracy.
    pub fn bounds(&self, bits: u32) -> (Rat, Rat) {
        if self.factors.is_empty() || self.coef.is_zero() {
            return (self.coef.clone(), self.coef.clone());
        }
        let mut lo = Rat::one();
        let mut hi = Rat::one();
        for (b, e) in &self.factors {
            let p = e.numer().to_i64().expect("small numerator");
            let q = e.denom().to_u32().expect("small denominator");
            let x = pow_rat(b, p);
            // x^{1/q} = (N * M^{q-1})^{1/q} / M
            let n = x.numer();
            let m = x.denom();
            let scale = BigInt::one() << (bits as usize * q as usize);
            let radicand = n * num_traits::pow(m.clone(), (q - 1) as usize) * scale;
            let s = iroot_floor(&radicand, q);
            let exact = num_traits::pow(s.clone(), q as usize) == radicand;
            let den = (BigInt::one() << bits as usize) * m;
            lo *= Rat::new(s.clone(), den.clone());
            hi *= Rat::new(if exact { s } else { s + 1 }, den);
        }
        if self.coef.is_positive() {
            (&lo * &self.coef, &hi * &self.coef)
        } else {
            (&hi * &self.coef, &lo * &self.coef)
        }
    }

    /// Rational `>= self` (tight to about 2^-bits relative).
    pub fn upper_rat(&self, bits: u32) -> Rat {
        self.bounds(bits).1
    }

    /// Rational `<= self`.
    pub fn lower_rat(&self, bits: u32) -> Rat {
        self.bounds(bits).0
    }

    /// Exact floor.
    pub fn floor(&self) -> BigInt {
        if let Some(r) = self.as_rat() {
            return floor_int(r);
        }
        let (lo, _) = self.bounds(64);
        let mut f = floor_int(&lo);
        // Irrational values never equal an integer, but correct any bracket slack.
        while self.cmp_rat(&big(&(&f + 1))) != Ordering::Less {
            f += 1;
        }
        while self.cmp_rat(&big(&f)) == Ordering::Less {
            f -= 1;
        }
        f
    }

    /// Largest integer strictly below `self`.
    pub fn strict_floor(&self) -> BigInt {
        let f = self.floor();
        if self.cmp_rat(&big(&f)) == Ordering::Equal {
            f - 1
        } else {
            f
        }
    }

    pub fn to_f64(&self) -> f64 {
        if self.coef.is_zero() {
            return 0.0;
        }
        let mut ln = rat_to_f64(&self.coef.abs()).ln();
        for (b, e) in &self.factors {
            ln += rat_to_f64(e) * rat_to_f64(b).ln();
        }
        let v = ln.exp();
        if self.coef.is_negative() {
            -v
        } else {
            v
        }
    }
}

impl PartialEq for AlgebraicScalar {
    fn eq(&self, other: &Self) -> bool {
        self.cmp_exact(other) == Ordering::Equal
    }
}

impl Eq for AlgebraicScalar {}

impl PartialOrd for AlgebraicScalar {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for AlgebraicScalar {
    fn cmp(&self, other: &Self) -> Ordering {
        self.cmp_exact(other)
    }
}

impl From<Rat> for AlgebraicScalar {
    fn from(r: Rat) -> Self {
        Self::from_rat(r)
    }
}

impl fmt::Display for AlgebraicScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.coef)?;
        for (b, e) in &self.factors {
            if b.is_integer() {
                write!(f, "*{}^({})", b.numer(), e)?;
            } else {
                write!(f, "*({})^({})", b, e)?;
            }
        }
        Ok(())
    }
}

impl FromStr for AlgebraicScalar {
    type Err = ExactError;

    /// Parses `c`, `c*R^(p/q)` and products of several such factors.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ExactError::Parse(s.to_string());
        let mut parts = s.split('*');
        let coef = parse_rat(parts.next().ok_or_else(err)?)?;
        let mut factors = Vec::new();
        for part in parts {
            let (base, exp) = part.split_once('^').ok_or_else(err)?;
            let base = base.trim().trim_start_matches('(').trim_end_matches(')');
            let exp = exp.trim().trim_start_matches('(').trim_end_matches(')');
            let base = parse_rat(base)?;
            if !base.is_positive() {
                return Err(err());
            }
            factors.push((base, parse_rat(exp)?));
        }
        let mut v = Self { coef, factors };
        v.normalize();
        Ok(v)
    }
}

impl Serialize for AlgebraicScalar {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for AlgebraicScalar {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Exact ordering of `a` against `c * R^e` (requires `R >= 2`, `c > 0`).
pub fn compare_scaled_power(a: &Rat, c: &Rat, r: u64, e: &Rat) -> Ordering {
    assert!(r >= 2 && c.is_positive(), "compare_scaled_power needs R >= 2 and c > 0");
    AlgebraicScalar::scaled_power(c.clone(), int(r as i64), e.clone()).cmp_rat(a).reverse()
}

/// Determinant of a square rational matrix (row-major).
#[allow(clippy::needless_range_loop)]
pub fn det(m: &[Vec<Rat>]) -> Rat {
    let n = m.len();
    let mut a: Vec<Vec<Rat>> = m.to_vec();
    let mut d = Rat::one();
    for col in 0..n {
        let Some(piv) = (col..n).find(|&r| !a[r][col].is_zero()) else {
            return Rat::zero();
        };
        if piv != col {
            a.swap(piv, col);
            d = -d;
        }
        d *= &a[col][col];
        for r in col + 1..n {
            if a[r][col].is_zero() {
                continue;
            }
            let f = &a[r][col] / &a[col][col];
            for c in col..n {
                let v = &f * &a[col][c];
                a[r][c] -= v;
            }
        }
    }
    d
}

/// Inverse of a square rational matrix, `None` when singular.
#[allow(clippy::needless_range_loop)]
pub fn inverse(m: &[Vec<Rat>]) -> Option<Vec<Vec<Rat>>> {
    let n = m.len();
    let mut a: Vec<Vec<Rat>> = m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { Rat::one() } else { Rat::zero() }));
            r
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(piv, col);
        let p = a[col][col].clone();
        for v in a[col].iter_mut() {
            *v /= &p;
        }
        for r in 0..n {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let f = a[r][col].clone();
            for c in 0..2 * n {
                let v = &f * &a[col][c];
                a[r][c] -= v;
            }
        }
    }
    Some(a.into_iter().map(|row| row[n..].to_vec()).collect())
}

pub fn transpose<T: Clone>(m: &[Vec<T>]) -> Vec<Vec<T>> {
    if m.is_empty() {
        return Vec::new();
    }
    (0..m[0].len()).map(|j| m.iter().map(|row| row[j].clone()).collect()).collect()
}

/// Rank of a set of rational vectors.
#[allow(clippy::needless_range_loop)]
pub fn rank(rows: &[Vec<Rat>]) -> usize {
    let mut a: Vec<Vec<Rat>> = rows.to_vec();
    let Some(width) = a.first().map(Vec::len) else {
        return 0;
    };
    let mut rank = 0;
    for col in 0..width {
        let Some(piv) = (rank..a.len()).find(|&r| !a[r][col].is_zero()) else {
            continue;
        };
        a.swap(piv, rank);
        for r in rank + 1..a.len() {
            if a[r][col].is_zero() {
                continue;
            }
            let f = &a[r][col] / &a[rank][col];
            for c in col..width {
                let v = &f * &a[rank][c];
                a[r][c] -= v;
            }
        }
        rank += 1;
    }
    rank
}

/// Rank of a set of integer vectors by fraction-free elimination.
#[allow(clippy::needless_range_loop)]
pub fn integer_rank(rows: &[Vec<BigInt>]) -> usize {
    let mut a: Vec<Vec<BigInt>> = rows.to_vec();
    let Some(width) = a.first().map(Vec::len) else {
        return 0;
    };
    let mut rank = 0;
    for col in 0..width {
        let Some(piv) = (rank..a.len()).find(|&r| !a[r][col].is_zero()) else {
            continue;
        };
        a.swap(piv, rank);
        for r in rank + 1..a.len() {
            if a[r][col].is_zero() {
                continue;
            }
            let (p, q) = (a[rank][col].clone(), a[r][col].clone());
            let g = p.gcd(&q);
            let (p, q) = (p / &g, q / &g);
            for c in 0..width {
                a[r][c] = &a[r][c] * &p - &a[rank][c] * &q;
            }
            let g = a[r].iter().fold(BigInt::zero(), |g, x| g.gcd(x));
            if !g.is_zero() && !g.is_one() {
                for x in a[r].iter_mut() {
                    *x = &*x / &g;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Sign of a `BigInt` as -1, 0, 1.
pub fn sign_of(x: &BigInt) -> i32 {
    match x.sign() {
        Sign::Minus => -1,
        Sign::NoSign => 0,
        Sign::Plus => 1,
    }
}
