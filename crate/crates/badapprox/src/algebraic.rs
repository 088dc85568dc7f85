//! Approximation by integer polynomials and by algebraic numbers.
//!
//! Margins are exact. `bn_margin` minimizes `H(P)^n |P(xi)|` over a height
//! box; `bstar_margin` and `wstar_witnesses` locate real roots of every
//! polynomial in the box with Sturm sequences. The height of a root is taken
//! as the least height of a box polynomial vanishing there, which is never
//! below its true height.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::certify::{BadCertificate, CertifyError, Mode};
use crate::dangerous::{DangerError, PolyCurve};
use crate::exact::{self, big, ceil_int, fmt_rat, int, iroot_floor, nearest_int, parse_rat, pow_rat, Rat, RatInterval};
use crate::poly::Poly;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AlgebraicError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("no integer vector in the box |a_i| <= {q} satisfies the system")]
    NotFound { q: u64 },
    #[error("certificate does not match the expected weights: {0}")]
    WrongWeights(String),
    #[error("certificate point is not on the Veronese curve")]
    NotVeronese,
    #[error("fibered curve is degenerate for d = {d}, u = ({u}); try a larger d")]
    DegenerateFiber { d: u32, u: String },
    #[error("parameter outside the fibered ball: {0}")]
    OutsideDomain(String),
    #[error("polynomial parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Certify(#[from] CertifyError),
}

/// Integer polynomial `a_0 + a_1 x + ... + a_n x^n` with trailing zeros trimmed.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct IntPolynomial {
    coeffs: Vec<BigInt>,
}

impl IntPolynomial {
    pub fn new(mut coeffs: Vec<BigInt>) -> Self {
        while coeffs.last().is_some_and(Zero::is_zero) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn from_i64(coeffs: &[i64]) -> Self {
        Self::new(coeffs.iter().map(|&c| BigInt::from(c)).collect())
    }

    /// Parse a comma-separated coefficient list `a_0,a_1,...`.
    pub fn parse_coefficients(s: &str) -> Result<Self, AlgebraicError> {
        s.split(',')
            .map(|t| BigInt::from_str(t.trim()).map_err(|e| AlgebraicError::Parse(format!("{t}: {e}"))))
            .collect::<Result<Vec<_>, _>>()
            .map(Self::new)
    }

    pub fn coefficients(&self) -> &[BigInt] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn height(&self) -> BigInt {
        self.coeffs.iter().map(|c| c.abs()).max().unwrap_or_default()
    }

    pub fn eval(&self, x: &Rat) -> Rat {
        self.coeffs.iter().rev().fold(Rat::zero(), |acc, c| acc * x + big(c))
    }

    pub fn to_poly(&self) -> Poly {
        Poly::new(self.coeffs.iter().map(big).collect())
    }
}

impl fmt::Display for IntPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_poly())
    }
}

#[derive(Serialize, Deserialize)]
struct IntPolynomialRecord {
    #[serde(with = "exact::serde_bigint_vec")]
    coefficients: Vec<BigInt>,
    degree: i64,
}

impl Serialize for IntPolynomial {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let degree = self.degree().map_or(-1, |d| d as i64);
        IntPolynomialRecord { coefficients: self.coeffs.clone(), degree }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for IntPolynomial {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rec = IntPolynomialRecord::deserialize(d)?;
        let p = IntPolynomial::new(rec.coefficients);
        let degree = p.degree().map_or(-1, |d| d as i64);
        if degree != rec.degree {
            return Err(serde::de::Error::custom(format!("degree {} does not match coefficients", rec.degree)));
        }
        Ok(p)
    }
}

/// A real root of `poly` located inside `root_enclosure`.
///
/// When the root is rational and known exactly it is stored in `exact_root`
/// and the enclosure is a small interval around it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlgebraicWitness {
    pub poly: IntPolynomial,
    pub root_enclosure: RatInterval,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "opt_rat")]
    pub exact_root: Option<Rat>,
    pub height: u64,
}

mod opt_rat {
    use super::*;

    pub fn serialize<S: Serializer>(r: &Option<Rat>, s: S) -> Result<S::Ok, S::Error> {
        r.as_ref().map(fmt_rat).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Rat>, D::Error> {
        Option::<String>::deserialize(d)?.map(|s| parse_rat(&s).map_err(serde::de::Error::custom)).transpose()
    }
}

impl AlgebraicWitness {
    /// Exact check that the polynomial has a root in the enclosure.
    pub fn verify(&self) -> bool {
        if self.poly.degree().unwrap_or(0) < 1 || BigInt::from(self.height) != self.poly.height() {
            return false;
        }
        let iv = &self.root_enclosure;
        match &self.exact_root {
            Some(r) => iv.contains(r) && self.poly.eval(r).is_zero(),
            None => {
                let sf = self.poly.to_poly().squarefree();
                sf.sign_at(&iv.lo) * sf.sign_at(&iv.hi) < 0
            }
        }
    }

    /// Bracket `[lo, hi]` for `|xi - alpha|`.
    pub fn distance(&self, xi: &Rat) -> (Rat, Rat) {
        if let Some(r) = &self.exact_root {
            let d = (xi - r).abs();
            return (d.clone(), d);
        }
        interval_distance(&self.root_enclosure.lo, &self.root_enclosure.hi, xi)
    }
}

fn interval_distance(lo: &Rat, hi: &Rat, xi: &Rat) -> (Rat, Rat) {
    if xi <= lo {
        (lo - xi, hi - xi)
    } else if xi >= hi {
        (xi - hi, xi - lo)
    } else {
        (Rat::zero(), (hi - xi).max(xi - lo))
    }
}

/// Least value of `H(P)^n |P(xi)|` over the height box.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BnMargin {
    #[serde(with = "exact::serde_rat")]
    pub xi: Rat,
    pub n: usize,
    pub h_max: u64,
    #[serde(with = "exact::serde_rat")]
    pub margin: Rat,
    pub witness: IntPolynomial,
}

trait SearchInt: Integer + Signed + Clone + Send + Sync + From<i64> + ToPrimitive {}
impl<T: Integer + Signed + Clone + Send + Sync + From<i64> + ToPrimitive> SearchInt for T {}

type BnBest<T> = (T, i64, Vec<i64>);

fn better<T: SearchInt>(a: &BnBest<T>, b: &BnBest<T>) -> bool {
    (&a.0, a.1, &a.2) < (&b.0, b.1, &b.2)
}

fn int_pow<T: SearchInt>(x: i64, e: usize) -> T {
    let mut acc = T::one();
    for _ in 0..e {
        acc = acc * T::from(x);
    }
    acc
}

/// Exhaustive search with `w[i] = p^i q^(n-i)`, so that `sum a_i w_i = q^n P(p/q)`.
/// For each choice of `a_1..a_n` only a handful of `a_0` can be optimal:
/// the two integers around `-T/q^n`, clamped to `[-h', h']` and to `[-h, h]`,
/// and `+-(h'+1)` where `h'` is the height of `a_1..a_n`.
fn bn_search<T: SearchInt>(w: &[T], n: usize, h: i64) -> BnBest<T> {
    let mut constant = vec![0i64; n + 1];
    constant[0] = 1;
    let seed: BnBest<T> = (w[0].clone(), 1, constant);
    let tasks: Vec<(usize, i64)> = (1..=n).flat_map(|d| (1..=h).map(move |lead| (d, lead))).collect();
    tasks
        .par_iter()
        .map(|&(d, lead)| {
            let mut best: Option<BnBest<T>> = None;
            let mut a = vec![0i64; n + 1];
            a[d] = lead;
            for x in a.iter_mut().take(d).skip(1) {
                *x = -h;
            }
            loop {
                let t: T = (1..=d).fold(T::zero(), |acc, i| acc + T::from(a[i]) * w[i].clone());
                let hp = a[1..=d].iter().map(|x| x.abs()).max().unwrap_or(0);
                let fl = (T::zero() - t.clone()).div_floor(&w[0]);
                let mut cands: Vec<i64> = Vec::with_capacity(8);
                for c in [fl.clone(), fl + T::one()] {
                    let v = if c > T::from(h) { h } else if c < T::from(-h) { -h } else { c.to_i64().expect("inside the box") };
                    cands.push(v);
                    cands.push(v.clamp(-hp, hp));
                }
                if hp < h {
                    cands.push(hp + 1);
                    cands.push(-hp - 1);
                }
                for &a0 in &cands {
                    let hh = a0.abs().max(hp);
                    let form = T::from(a0) * w[0].clone() + t.clone();
                    let v = int_pow::<T>(hh, n) * form.abs();
                    a[0] = a0;
                    let cand = (v, hh, a.clone());
                    if best.as_ref().is_none_or(|b| better(&cand, b)) {
                        best = Some(cand);
                    }
                }
                a[0] = 0;
                let mut i = 1;
                while i < d && a[i] == h {
                    a[i] = -h;
                    i += 1;
                }
                if i >= d {
                    return best.expect("at least one candidate");
                }
                a[i] += 1;
            }
        })
        .reduce(|| seed.clone(), |x, y| if better(&y, &x) { y } else { x })
}

fn check_xi_n_h(n: usize, h_max: u64) -> Result<i64, AlgebraicError> {
    if n == 0 {
        return Err(AlgebraicError::InvalidInput("degree bound n must be at least 1".into()));
    }
    if h_max == 0 {
        return Err(AlgebraicError::InvalidInput("height bound must be at least 1".into()));
    }
    i64::try_from(h_max).map_err(|_| AlgebraicError::InvalidInput("height bound too large".into()))
}

/// `min H(P)^n |P(xi)|` over nonzero integer `P` with `deg P <= n`, `H(P) <= h_max`.
pub fn bn_margin(xi: &Rat, n: usize, h_max: u64) -> Result<BnMargin, AlgebraicError> {
    let h = check_xi_n_h(n, h_max)?;
    let (p, q) = (xi.numer().clone(), xi.denom().clone());
    let w: Vec<BigInt> = (0..=n).map(|i| num_traits::pow(p.clone(), i) * num_traits::pow(q.clone(), n - i)).collect();
    let wmax = w.iter().map(|x| x.abs()).max().expect("n >= 1");
    let bound = wmax * BigInt::from(n as u64 + 2) * num_traits::pow(BigInt::from(h), n + 1);
    let (v, coeffs) = if bound.bits() < 125 {
        let wi: Vec<i128> = w.iter().map(|x| x.to_i128().expect("fits")).collect();
        let (v, _, c) = bn_search::<i128>(&wi, n, h);
        (BigInt::from(v), c)
    } else {
        let (v, _, c) = bn_search::<BigInt>(&w, n, h);
        (v, c)
    };
    let mut witness = IntPolynomial::from_i64(&coeffs);
    if witness.coeffs.last().is_some_and(Signed::is_negative) {
        witness = IntPolynomial::new(witness.coeffs.iter().map(|c| -c).collect());
    }
    Ok(BnMargin { xi: xi.clone(), n, h_max, margin: Rat::new(v, w[0].clone()), witness })
}

/// Visit every integer polynomial of degree `1..=n` and height `<= h` with
/// positive leading coefficient, as `(a_0, ..., a_n)`.
fn for_each_poly(n: usize, h: i64, mut visit: impl FnMut(&[i64])) {
    for d in 1..=n {
        for lead in 1..=h {
            let mut a = vec![0i64; n + 1];
            a[d] = lead;
            for x in a.iter_mut().take(d) {
                *x = -h;
            }
            'odometer: loop {
                visit(&a);
                let mut i = 0;
                while a[i] == h {
                    a[i] = -h;
                    i += 1;
                    if i == d {
                        break 'odometer;
                    }
                }
                a[i] += 1;
            }
        }
    }
}

/// Exact integer filter for "P may have a root within `radius` of xi".
struct RootFilter {
    w: Vec<BigInt>,
    qn: BigInt,
    bpow: Vec<BigInt>,
}

impl RootFilter {
    /// `reach` bounds the radius of every later query.
    fn new(xi: &Rat, n: usize, reach: &Rat) -> Self {
        let (p, q) = (xi.numer().clone(), xi.denom().clone());
        let w: Vec<BigInt> = (0..=n).map(|i| num_traits::pow(p.clone(), i) * num_traits::pow(q.clone(), n - i)).collect();
        let b = ceil_int(&(xi.abs() + reach)).max(BigInt::one());
        let bpow = (0..n).map(|i| num_traits::pow(b.clone(), i)).collect();
        Self { qn: w[0].clone(), w, bpow }
    }

    /// False only when no root lies within `radius` (by the mean value theorem).
    fn may_have_root(&self, a: &[i64], radius: &Rat) -> bool {
        let s: BigInt = a.iter().zip(&self.w).map(|(&ai, wi)| wi * ai).sum();
        if s.is_zero() {
            return true;
        }
        let d: BigInt = a.iter().enumerate().skip(1).map(|(i, &ai)| &self.bpow[i - 1] * (ai.unsigned_abs() * i as u64)).sum();
        s.abs() * radius.denom() <= radius.numer() * &self.qn * d
    }
}

/// A root of `sf` (squarefree) pinned down exactly or strictly inside `(lo, hi)`.
enum Located {
    Exact(Rat),
    Open(Rat, Rat),
}

/// Bisect an isolating enclosure until `xi` is not strictly inside it and its
/// width is at most `width` and at most `2^-16` of its distance to `xi`.
fn tighten(sf: &Poly, lo: Rat, hi: Rat, exact: bool, xi: &Rat, width: &Rat) -> Located {
    if exact {
        return Located::Exact(lo);
    }
    let (mut lo, mut hi) = (lo, hi);
    let s_hi = sf.sign_at(&hi);
    loop {
        let inside = &lo < xi && xi < &hi;
        if !inside {
            let w = &hi - &lo;
            let gap = if xi <= &lo { &lo - xi } else { xi - &hi };
            if w <= *width && w * int(1 << 16) <= gap {
                return Located::Open(lo, hi);
            }
        }
        let m = if inside { xi.clone() } else { (&lo + &hi) / int(2) };
        match sf.sign_at(&m) {
            0 => return Located::Exact(m),
            s if s == s_hi => hi = m,
            _ => lo = m,
        }
    }
}

fn make_witness(a: &[i64], loc: &Located, width: &Rat) -> AlgebraicWitness {
    let poly = IntPolynomial::from_i64(a);
    let height = poly.height().to_u64().expect("small height");
    match loc {
        Located::Exact(r) => {
            let half = width / int(2);
            AlgebraicWitness {
                poly,
                root_enclosure: RatInterval { lo: r - &half, hi: r + &half },
                exact_root: Some(r.clone()),
                height,
            }
        }
        Located::Open(lo, hi) => {
            AlgebraicWitness { poly, root_enclosure: RatInterval { lo: lo.clone(), hi: hi.clone() }, exact_root: None, height }
        }
    }
}

fn located_distance(loc: &Located, xi: &Rat) -> (Rat, Rat) {
    match loc {
        Located::Exact(r) => {
            let d = (xi - r).abs();
            (d.clone(), d)
        }
        Located::Open(lo, hi) => interval_distance(lo, hi, xi),
    }
}

/// Real roots of `a` in the closed ball of `radius` around `xi`.
fn roots_near(a: &[i64], xi: &Rat, radius: &Rat, width: &Rat) -> Vec<(Poly, Located)> {
    let sf = IntPolynomial::from_i64(a).to_poly().squarefree();
    let iv = RatInterval { lo: xi - radius, hi: xi + radius };
    sf.isolate_roots(&iv)
        .into_iter()
        .map(|e| {
            let loc = tighten(&sf, e.lo, e.hi, e.exact, xi, width);
            (sf.clone(), loc)
        })
        .collect()
}

/// Least value of `H(alpha)^(n+1) |xi - alpha|` over real algebraic alpha.
///
/// `margin_lower <= true minimum <= margin_upper`; the two agree when the
/// minimizing root is rational. Enclosures are refined below `1/h_max^(n+2)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BStarMargin {
    #[serde(with = "exact::serde_rat")]
    pub xi: Rat,
    pub n: usize,
    pub h_max: u64,
    #[serde(with = "exact::serde_rat")]
    pub margin_lower: Rat,
    #[serde(with = "exact::serde_rat")]
    pub margin_upper: Rat,
    pub witness: AlgebraicWitness,
}

pub fn bstar_margin(xi: &Rat, n: usize, h_max: u64) -> Result<BStarMargin, AlgebraicError> {
    let h = check_xi_n_h(n, h_max)?;
    let width = pow_rat(&int(h), -(n as i64 + 2));
    let weight = |hh: i64| pow_rat(&int(hh), n as i64 + 1);

    // Seed with the best rational a/b, b <= h.
    let mut seed: Option<(Rat, Vec<i64>)> = None;
    for b in 1..=h {
        let a = nearest_int(&(xi * int(b))).to_i64().unwrap_or(h).clamp(-h, h);
        let v = weight(a.abs().max(b)) * (xi - rat_of(a, b)).abs();
        if seed.as_ref().is_none_or(|(s, _)| v < *s) {
            let mut c = vec![0i64; n + 1];
            c[0] = -a;
            c[1] = b;
            seed = Some((v, c));
        }
    }
    let (mut v, _) = seed.expect("h >= 1");
    let filter = RootFilter::new(xi, n, &v.clone().max(Rat::one()));

    let mut best_lo: Option<(Rat, AlgebraicWitness)> = None;
    let mut best_hi: Option<Rat> = None;
    for_each_poly(n, h, |a| {
        let hh = a.iter().map(|x| x.abs()).max().expect("nonempty");
        let radius = &v / weight(hh);
        if !filter.may_have_root(a, &radius) {
            return;
        }
        for (_, loc) in roots_near(a, xi, &radius, &width) {
            let (dlo, dhi) = located_distance(&loc, xi);
            let (mlo, mhi) = (weight(hh) * dlo, weight(hh) * dhi);
            if best_lo.as_ref().is_none_or(|(b, _)| mlo < *b) {
                best_lo = Some((mlo, make_witness(a, &loc, &width)));
            }
            if best_hi.as_ref().is_none_or(|b| mhi < *b) {
                best_hi = Some(mhi.clone());
                if mhi < v {
                    v = mhi;
                }
            }
        }
    });
    let (margin_lower, witness) = best_lo.expect("the seed polynomial has a root within reach");
    let margin_upper = best_hi.expect("set with best_lo");
    Ok(BStarMargin { xi: xi.clone(), n, h_max, margin_lower, margin_upper, witness })
}

fn rat_of(a: i64, b: i64) -> Rat {
    Rat::new(BigInt::from(a), BigInt::from(b))
}

struct Candidate {
    coeffs: Vec<i64>,
    height: i64,
    sf: Poly,
    loc: Located,
}

fn same_root(x: &Candidate, y: &Candidate) -> bool {
    match (&x.loc, &y.loc) {
        (Located::Exact(r), Located::Exact(s)) => r == s,
        (Located::Exact(r), Located::Open(lo, hi)) | (Located::Open(lo, hi), Located::Exact(r)) => {
            let sf = if matches!(x.loc, Located::Open(..)) { &x.sf } else { &y.sf };
            lo < r && r < hi && sf.eval(r).is_zero()
        }
        (Located::Open(l1, h1), Located::Open(l2, h2)) => {
            let lo = l1.max(l2);
            let hi = h1.min(h2);
            if lo >= hi {
                return false;
            }
            x.sf.gcd(&y.sf).count_roots(lo, hi) > 0
        }
    }
}

/// Every real algebraic alpha with `deg <= n`, `H(alpha)` in `[h_lo, h_hi]` and
/// `|xi - alpha| < c2 H(alpha)^(-n-1)`, each inequality certified by its enclosure.
pub fn wstar_witnesses(xi: &Rat, n: usize, c2: &Rat, h_lo: u64, h_hi: u64) -> Result<Vec<AlgebraicWitness>, AlgebraicError> {
    if h_lo > h_hi || h_hi == 0 {
        return Ok(Vec::new());
    }
    let h = check_xi_n_h(n, h_hi)?;
    if !c2.is_positive() {
        return Ok(Vec::new());
    }
    let width = pow_rat(&int(h), -(n as i64 + 2));
    let weight = |hh: i64| pow_rat(&int(hh), n as i64 + 1);
    let filter = RootFilter::new(xi, n, &c2.clone().max(Rat::one()));

    let mut cands: Vec<Candidate> = Vec::new();
    for_each_poly(n, h, |a| {
        let hh = a.iter().map(|x| x.abs()).max().expect("nonempty");
        let radius = c2 / weight(hh);
        if filter.may_have_root(a, &radius) {
            for (sf, loc) in roots_near(a, xi, &radius, &width) {
                cands.push(Candidate { coeffs: a.to_vec(), height: hh, sf, loc });
            }
        }
    });
    cands.sort_by(|x, y| x.height.cmp(&y.height).then_with(|| x.coeffs.cmp(&y.coeffs)));

    let mut kept: Vec<Candidate> = Vec::new();
    for c in cands {
        if !kept.iter().any(|k| same_root(k, &c)) {
            kept.push(c);
        }
    }

    let mut out = Vec::new();
    for c in kept {
        if (c.height as u64) < h_lo {
            continue;
        }
        let bound = c2 / weight(c.height);
        if let Some(loc) = decide_within(&c.sf, c.loc, xi, &bound) {
            let wit = make_witness(&c.coeffs, &loc, &width);
            debug_assert!(wit.verify());
            out.push(wit);
        }
    }
    out.sort_by(|x, y| x.root_enclosure.lo.cmp(&y.root_enclosure.lo));
    Ok(out)
}

/// Refine until the root is certified strictly within `bound` of `xi`
/// (returns the final location) or certified not to be.
fn decide_within(sf: &Poly, loc: Located, xi: &Rat, bound: &Rat) -> Option<Located> {
    let (mut lo, mut hi) = match loc {
        Located::Exact(r) => return ((xi - &r).abs() < *bound).then_some(Located::Exact(r)),
        Located::Open(lo, hi) => (lo, hi),
    };
    let (left, right) = (xi - bound, xi + bound);
    for edge in [&left, &right] {
        if &lo < edge && edge < &hi && sf.eval(edge).is_zero() {
            return None;
        }
    }
    let s_hi = sf.sign_at(&hi);
    loop {
        if left < lo && hi < right {
            return Some(Located::Open(lo, hi));
        }
        if hi <= left || lo >= right {
            return None;
        }
        let m = (&lo + &hi) / int(2);
        match sf.sign_at(&m) {
            0 => {
                let r = m;
                return ((xi - &r).abs() < *bound).then_some(Located::Exact(r));
            }
            s if s == s_hi => hi = m,
            _ => lo = m,
        }
    }
}

/// `(1 + n^2 max{1, |xi|^n})^(-n) c1`.
pub fn minkowski_eps0(xi: &Rat, n: usize, c1: &Rat) -> Rat {
    let base = Rat::one() + int(n as i64 * n as i64) * pow_rat(&xi.abs(), n as i64).max(Rat::one());
    c1 / pow_rat(&base, n as i64)
}

/// Volume of `{|P(xi)| <= eps0 Q^-n, |P'(xi)| <= Q/eps0, |a_i| <= Q (i >= 2)}`.
///
/// The two linear forms have determinant one together with the box
/// coordinates, so this is `4 Q^(1-n) (2Q)^(n-1) = 2^(n+1)` for every input.
pub fn minkowski_volume(n: usize, q: u64, eps0: &Rat) -> Rat {
    let qr = int(q as i64);
    int(2) * eps0 * pow_rat(&qr, -(n as i64)) * int(2) * &qr / eps0 * pow_rat(&(int(2) * &qr), n as i64 - 1)
}

/// A nonzero `(a_0, ..., a_n)` in the box `|a_i| <= Q` with
/// `|P(xi)| < eps0 Q^-n` and `|P'(xi)| < Q/eps0`.
pub fn minkowski_polynomial(xi: &Rat, n: usize, q: u64, eps0: &Rat) -> Result<IntPolynomial, AlgebraicError> {
    minkowski_search(xi, n, q, eps0, false)
}

/// Nonzero integer point of the closed body whose volume is `2^(n+1)`:
/// `|P(xi)| <= eps0 Q^-n`, `|P'(xi)| <= Q/eps0`, `|a_i| <= Q` for `i >= 2`.
/// Minkowski's theorem guarantees one exists, so `NotFound` here is a bug.
pub fn minkowski_body_point(xi: &Rat, n: usize, q: u64, eps0: &Rat) -> Result<IntPolynomial, AlgebraicError> {
    minkowski_search(xi, n, q, eps0, true)
}

const MINKOWSKI_RANGE_LIMIT: u64 = 10_000_000;

fn minkowski_search(xi: &Rat, n: usize, q: u64, eps0: &Rat, closed: bool) -> Result<IntPolynomial, AlgebraicError> {
    if n == 0 {
        return Err(AlgebraicError::InvalidInput("degree bound n must be at least 1".into()));
    }
    if q < 2 {
        return Err(AlgebraicError::InvalidInput("Q must exceed 1".into()));
    }
    if !eps0.is_positive() {
        return Err(AlgebraicError::InvalidInput("eps0 must be positive".into()));
    }
    let qi = q as i64;
    let qr = int(qi);
    let b0 = eps0 * pow_rat(&qr, -(n as i64));
    let b1 = &qr / eps0;
    let pw: Vec<Rat> = (0..=n).map(|i| pow_rat(xi, i as i64)).collect();

    // Integers k with |k + s| < b (or <= b when closed), optionally within [-q, q].
    let range = |s: &Rat, b: &Rat, boxed: bool| -> Result<(BigInt, BigInt), AlgebraicError> {
        let (lo_r, hi_r) = (-s - b, -s + b);
        let mut lo = if closed { ceil_int(&lo_r) } else { lo_r.floor().to_integer() + 1 };
        let mut hi = if closed { hi_r.floor().to_integer() } else { ceil_int(&hi_r) - 1 };
        if boxed {
            lo = lo.max(BigInt::from(-qi));
            hi = hi.min(BigInt::from(qi));
        }
        if &hi - &lo > BigInt::from(MINKOWSKI_RANGE_LIMIT) {
            return Err(AlgebraicError::InvalidInput("coefficient range too large to enumerate".into()));
        }
        Ok((lo, hi))
    };

    let zigzag: Vec<i64> = std::iter::once(0).chain((1..=qi).flat_map(|k| [k, -k])).collect();
    let mut idx = vec![0usize; n.saturating_sub(1)];
    loop {
        let high: Vec<i64> = idx.iter().map(|&k| zigzag[k]).collect();
        let s1: Rat = high.iter().enumerate().map(|(j, &a)| int(a * (j as i64 + 2)) * &pw[j + 1]).sum();
        let (lo1, hi1) = range(&s1, &b1, !closed)?;
        let mut a1 = lo1;
        while a1 <= hi1 {
            let s0: Rat = big(&a1) * &pw[1] + high.iter().enumerate().map(|(j, &a)| int(a) * &pw[j + 2]).sum::<Rat>();
            let (lo0, hi0) = range(&s0, &b0, !closed)?;
            let mut a0 = lo0;
            while a0 <= hi0 {
                if !(a0.is_zero() && a1.is_zero() && high.iter().all(|&x| x == 0)) {
                    let mut c = vec![a0.clone(), a1.clone()];
                    c.extend(high.iter().map(|&x| BigInt::from(x)));
                    return Ok(IntPolynomial::new(c));
                }
                a0 += 1;
            }
            a1 += 1;
        }
        let mut i = 0;
        loop {
            if i == idx.len() {
                return Err(AlgebraicError::NotFound { q });
            }
            if idx[i] + 1 < zigzag.len() {
                idx[i] += 1;
                break;
            }
            idx[i] = 0;
            i += 1;
        }
    }
}

/// Exact check of the three Minkowski-system inequalities.
pub fn minkowski_holds(p: &IntPolynomial, xi: &Rat, n: usize, q: u64, eps0: &Rat) -> bool {
    let qr = int(q as i64);
    !p.is_zero()
        && p.degree().is_some_and(|d| d <= n)
        && p.height() <= BigInt::from(q)
        && p.eval(xi).abs() < eps0 * pow_rat(&qr, -(n as i64))
        && p.to_poly().derivative().eval(xi).abs() < &qr / eps0
}

/// `(x, x^2, ..., x^n)` on `domain`.
pub fn veronese(n: usize, domain: RatInterval) -> PolyCurve {
    PolyCurve::veronese(n, domain)
}

/// Outcome of checking, for one point and one height box, that polynomial
/// badness transfers to badness by algebraic numbers.
///
/// With `c1 = bn_margin(xi, n, h)`, Taylor expansion at each root gives
/// `H(P)^(n+1) |xi - alpha| >= c1 / K` for every `P` of height `<= h`, where
/// `K = sum_{i=1..n} ((A+1)^i - A^i)` and `A = |xi| + 1`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InclusionReport {
    #[serde(with = "exact::serde_rat")]
    pub xi: Rat,
    pub n: usize,
    pub h: u64,
    pub h_prime: u64,
    #[serde(with = "exact::serde_rat")]
    pub c1: Rat,
    #[serde(with = "exact::serde_rat")]
    pub taylor_constant: Rat,
    #[serde(with = "exact::serde_rat")]
    pub predicted: Rat,
    pub bstar: Option<BStarMargin>,
    pub violations: Vec<IntPolynomial>,
    pub holds: bool,
}

pub fn taylor_constant(xi: &Rat, n: usize) -> Rat {
    let a = xi.abs() + Rat::one();
    let a1 = &a + Rat::one();
    (1..=n as i64).map(|i| pow_rat(&a1, i) - pow_rat(&a, i)).sum()
}

/// Check the transfer at scale `h`, searching roots over heights up to
/// `h' = floor(h / (1 + n^2 max{1, |xi|^n}))`. No root within the predicted
/// distance may exist; every polynomial is tested exactly with Sturm counts.
pub fn inclusion_check(xi: &Rat, n: usize, h: u64) -> Result<InclusionReport, AlgebraicError> {
    check_xi_n_h(n, h)?;
    let c1 = bn_margin(xi, n, h)?.margin;
    let scale = Rat::one() + int(n as i64 * n as i64) * pow_rat(&xi.abs(), n as i64).max(Rat::one());
    let h_prime = (int(h as i64) / scale).floor().to_integer().to_u64().unwrap_or(0);
    let k = taylor_constant(xi, n);
    let predicted = &c1 / &k;
    let mut violations = Vec::new();
    if c1.is_positive() && h_prime >= 1 {
        let hp = h_prime as i64;
        let filter = RootFilter::new(xi, n, &Rat::one());
        for_each_poly(n, hp, |a| {
            let hh = a.iter().map(|x| x.abs()).max().expect("nonempty");
            let radius = &predicted / pow_rat(&int(hh), n as i64 + 1);
            if !filter.may_have_root(a, &radius) {
                return;
            }
            let p = IntPolynomial::from_i64(a).to_poly();
            let (lo, hi) = (xi - &radius, xi + &radius);
            let open = p.count_roots(&lo, &hi) - usize::from(p.eval(&hi).is_zero());
            if open > 0 {
                violations.push(IntPolynomial::from_i64(a));
            }
        });
    }
    let bstar = if h_prime >= 1 { Some(bstar_margin(xi, n, h_prime)?) } else { None };
    let holds = violations.is_empty() && bstar.as_ref().is_none_or(|b| b.margin_upper >= predicted);
    Ok(InclusionReport { xi: xi.clone(), n, h, h_prime, c1, taylor_constant: k, predicted, bstar, violations, holds })
}

/// Polynomial badness derived from a dual certificate on the Veronese curve.
///
/// Every `P` with `deg P <= k` and `H(P) <= valid_height` satisfies
/// `H(P)^k |P(xi)| >= constant`. The strict box `|a_i| < H^(1/k)` turns a dual
/// margin `c` into `constant = c/2`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BkClaim {
    #[serde(with = "exact::serde_rat")]
    pub xi: Rat,
    pub k: usize,
    #[serde(with = "exact::serde_rat")]
    pub source_margin: Rat,
    pub source_bound: u64,
    #[serde(with = "exact::serde_rat")]
    pub constant: Rat,
    pub valid_height: u64,
    pub cross_check: Option<BnMargin>,
    pub consistent: bool,
}

pub fn badr_to_bk(cert: &BadCertificate, k: usize) -> Result<BkClaim, AlgebraicError> {
    if cert.mode != Mode::Dual {
        return Err(AlgebraicError::WrongWeights("a dual certificate is required".into()));
    }
    let w = cert.weights.entries();
    let n = w.len();
    if k == 0 || k > n {
        return Err(AlgebraicError::WrongWeights(format!("k = {k} but the certificate has {n} weights")));
    }
    let expected = |i: usize| if i < k { Rat::new(BigInt::one(), BigInt::from(k)) } else { Rat::zero() };
    if w.iter().enumerate().any(|(i, wi)| *wi != expected(i)) {
        return Err(AlgebraicError::WrongWeights(format!("expected {k} leading weights 1/{k}, got {}", cert.weights)));
    }
    let y = &cert.subject.point;
    let xi = y[0].clone();
    if y.iter().enumerate().any(|(i, yi)| *yi != pow_rat(&xi, i as i64 + 1)) {
        return Err(AlgebraicError::NotVeronese);
    }
    let c = cert.margin.as_rat().cloned().ok_or_else(|| AlgebraicError::WrongWeights("dual margin is not rational".into()))?;
    let constant = &c / int(2);
    let valid_height = if cert.bound >= 2 { iroot_floor(&BigInt::from(cert.bound - 1), k as u32).to_u64().expect("fits") } else { 0 };
    let cross_check = if valid_height >= 1 { Some(bn_margin(&xi, k, valid_height)?) } else { None };
    let consistent = cross_check.as_ref().is_none_or(|b| b.margin >= constant);
    Ok(BkClaim { xi, k, source_margin: c, source_bound: cert.bound, constant, valid_height, cross_check, consistent })
}

/// Multivariate polynomial with rational coefficients in `x1, ..., xm`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultiPoly {
    vars: usize,
    terms: BTreeMap<Vec<u32>, Rat>,
}

impl MultiPoly {
    pub fn new(vars: usize, terms: impl IntoIterator<Item = (Vec<u32>, Rat)>) -> Result<Self, AlgebraicError> {
        let mut map: BTreeMap<Vec<u32>, Rat> = BTreeMap::new();
        for (e, c) in terms {
            if e.len() != vars {
                return Err(AlgebraicError::Parse(format!("exponent vector of length {} for {vars} variables", e.len())));
            }
            *map.entry(e).or_insert_with(Rat::zero) += c;
        }
        map.retain(|_, c| !c.is_zero());
        Ok(Self { vars, terms: map })
    }

    pub fn vars(&self) -> usize {
        self.vars
    }

    /// Parse sums of products such as `x1 + 3/2*x1^2*x2 - x2`.
    pub fn parse(s: &str, vars: usize) -> Result<Self, AlgebraicError> {
        let err = |m: &str| AlgebraicError::Parse(format!("{m} in \"{s}\""));
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if compact.is_empty() {
            return Err(err("empty polynomial"));
        }
        let mut pieces: Vec<(bool, String)> = Vec::new();
        let mut cur = String::new();
        let mut neg = false;
        for ch in compact.chars() {
            if (ch == '+' || ch == '-') && !cur.is_empty() && !cur.ends_with('^') {
                pieces.push((neg, std::mem::take(&mut cur)));
                neg = ch == '-';
            } else if (ch == '+' || ch == '-') && cur.is_empty() {
                neg ^= ch == '-';
            } else {
                cur.push(ch);
            }
        }
        if cur.is_empty() {
            return Err(err("dangling sign"));
        }
        pieces.push((neg, cur));
        let mut terms = Vec::new();
        for (neg, body) in pieces {
            let mut coef = if neg { -Rat::one() } else { Rat::one() };
            let mut exps = vec![0u32; vars];
            for factor in body.split('*') {
                if let Some(rest) = factor.strip_prefix('x') {
                    let (idx, pow) = match rest.split_once('^') {
                        Some((i, p)) => (i, p.parse::<u32>().map_err(|_| err("bad exponent"))?),
                        None => (rest, 1),
                    };
                    let i: usize = idx.parse().map_err(|_| err("bad variable index"))?;
                    if i == 0 || i > vars {
                        return Err(err("variable index out of range"));
                    }
                    exps[i - 1] += pow;
                } else {
                    coef *= parse_rat(factor).map_err(|_| err("bad coefficient"))?;
                }
            }
            terms.push((exps, coef));
        }
        Self::new(vars, terms)
    }

    pub fn eval(&self, x: &[Rat]) -> Rat {
        self.terms
            .iter()
            .map(|(e, c)| e.iter().zip(x).fold(c.clone(), |acc, (&k, xi)| acc * pow_rat(xi, k as i64)))
            .sum()
    }

    /// Substitute `x_1 = t`, `x_j = u_j t^(d^(j-1))` for `j >= 2`.
    pub fn fiber(&self, d: u32, u: &[Rat]) -> Poly {
        let mut coeffs: BTreeMap<u64, Rat> = BTreeMap::new();
        for (e, c) in &self.terms {
            let mut deg = e[0] as u64;
            let mut coef = c.clone();
            for j in 1..self.vars {
                deg += e[j] as u64 * (d as u64).pow(j as u32);
                coef *= pow_rat(&u[j - 1], e[j] as i64);
            }
            *coeffs.entry(deg).or_insert_with(Rat::zero) += coef;
        }
        let top = coeffs.keys().next_back().copied().unwrap_or(0) as usize;
        let mut v = vec![Rat::zero(); top + 1];
        for (k, c) in coeffs {
            v[k as usize] = c;
        }
        Poly::new(v)
    }
}

impl fmt::Display for MultiPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms = self.terms.iter().map(|(e, c)| {
            let vars: Vec<String> = e
                .iter()
                .enumerate()
                .filter(|(_, &k)| k > 0)
                .map(|(i, &k)| if k == 1 { format!("x{}", i + 1) } else { format!("x{}^{}", i + 1, k) })
                .collect();
            (c, vars.join("*"))
        });
        write!(f, "{}", exact::fmt_sum(terms))
    }
}

/// Polynomial map on the open sup-norm ball of `radius` around `center`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PolyMap {
    pub components: Vec<MultiPoly>,
    pub center: Vec<Rat>,
    pub radius: Rat,
}

impl PolyMap {
    pub fn new(components: Vec<MultiPoly>, center: Vec<Rat>, radius: Rat) -> Result<Self, AlgebraicError> {
        if center.is_empty() || components.is_empty() {
            return Err(AlgebraicError::InvalidInput("map needs variables and components".into()));
        }
        if components.iter().any(|c| c.vars() != center.len()) {
            return Err(AlgebraicError::InvalidInput("component variable count differs from the ball dimension".into()));
        }
        if !radius.is_positive() {
            return Err(AlgebraicError::InvalidInput("radius must be positive".into()));
        }
        Ok(Self { components, center, radius })
    }

    pub fn vars(&self) -> usize {
        self.center.len()
    }

    /// Whether `u = (u_2, ..., u_m)` lies in the projection of the ball.
    pub fn in_fibered_ball(&self, u: &[Rat]) -> bool {
        u.len() + 1 == self.vars() && u.iter().zip(&self.center[1..]).all(|(ui, ci)| (ui - ci).abs() < self.radius)
    }

    /// Closure of the fiber `{t : (t, u) in ball}`.
    pub fn fiber_domain(&self) -> RatInterval {
        RatInterval { lo: &self.center[0] - &self.radius, hi: &self.center[0] + &self.radius }
    }
}

#[derive(Serialize, Deserialize)]
struct PolyMapRecord {
    components: Vec<String>,
    #[serde(with = "exact::serde_rat_vec")]
    center: Vec<Rat>,
    #[serde(with = "exact::serde_rat")]
    radius: Rat,
}

impl Serialize for PolyMap {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        PolyMapRecord {
            components: self.components.iter().map(|c| c.to_string()).collect(),
            center: self.center.clone(),
            radius: self.radius.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for PolyMap {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rec = PolyMapRecord::deserialize(d)?;
        let m = rec.center.len();
        let comps = rec
            .components
            .iter()
            .map(|c| MultiPoly::parse(c, m))
            .collect::<Result<Vec<_>, _>>()
            .map_err(serde::de::Error::custom)?;
        PolyMap::new(comps, rec.center, rec.radius).map_err(serde::de::Error::custom)
    }
}

/// Univariate restriction of a map along `(t, u_2 t^d, ..., u_m t^(d^(m-1)))`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiberCurve {
    pub d: u32,
    pub u: Vec<Rat>,
    pub curve: PolyCurve,
    pub wronskian: Poly,
}

pub fn fiber_map(f: &PolyMap, d: u32, u: &[Rat]) -> Result<FiberCurve, AlgebraicError> {
    if d < 2 {
        return Err(AlgebraicError::InvalidInput("d must be at least 2".into()));
    }
    let fmt_u = || u.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
    if !f.in_fibered_ball(u) {
        return Err(AlgebraicError::OutsideDomain(format!("u = ({})", fmt_u())));
    }
    let comps = f.components.iter().map(|c| c.fiber(d, u)).collect();
    let curve = PolyCurve::new(comps, f.fiber_domain()).map_err(|e| match e {
        DangerError::Dependent | DangerError::DegenerateWronskian => AlgebraicError::DegenerateFiber { d, u: fmt_u() },
        other => AlgebraicError::InvalidInput(other.to_string()),
    })?;
    let wronskian = curve.wronskian();
    Ok(FiberCurve { d, u: u.to_vec(), curve, wronskian })
}
