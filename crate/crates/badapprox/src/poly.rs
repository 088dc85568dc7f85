//! Univariate polynomials with rational coefficients: exact evaluation, interval
//! evaluation, Sturm-sequence root isolation and bounds for `|p|` on intervals.

use std::cmp::Ordering;
use std::fmt;

use num_traits::{One, Signed, Zero};

use crate::exact::{int, rat, rat_to_f64, Rat, RatInterval};

/// Coefficients stored lowest degree first, trailing zeros trimmed.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Poly {
    coeffs: Vec<Rat>,
}

/// A closed interval containing exactly one root. When `exact` is set the root
/// equals `lo == hi`; otherwise the root lies strictly inside `(lo, hi)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RootEnclosure {
    pub lo: Rat,
    pub hi: Rat,
    pub exact: bool,
}

impl RootEnclosure {
    pub fn width(&self) -> Rat {
        &self.hi - &self.lo
    }

    pub fn mid(&self) -> Rat {
        (&self.lo + &self.hi) / int(2)
    }
}

impl Poly {
    pub fn new(mut coeffs: Vec<Rat>) -> Self {
        while coeffs.last().is_some_and(Zero::is_zero) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn from_ints(coeffs: &[i64]) -> Self {
        Self::new(coeffs.iter().map(|&c| int(c)).collect())
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn constant(c: Rat) -> Self {
        Self::new(vec![c])
    }

    /// The polynomial `x`.
    pub fn x() -> Self {
        Self::new(vec![Rat::zero(), Rat::one()])
    }

    pub fn coeffs(&self) -> &[Rat] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree, with `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn leading(&self) -> Rat {
        self.coeffs.last().cloned().unwrap_or_else(Rat::zero)
    }

    pub fn coeff(&self, i: usize) -> Rat {
        self.coeffs.get(i).cloned().unwrap_or_else(Rat::zero)
    }

    pub fn eval(&self, x: &Rat) -> Rat {
        let mut acc = Rat::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    pub fn eval_f64(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * x + rat_to_f64(c))
    }

    pub fn sign_at(&self, x: &Rat) -> i32 {
        let v = self.eval(x);
        if v.is_positive() {
            1
        } else if v.is_negative() {
            -1
        } else {
            0
        }
    }

    /// Enclosure of `{p(x) : x in [lo, hi]}` by Horner's scheme in interval arithmetic.
    pub fn eval_interval(&self, lo: &Rat, hi: &Rat) -> (Rat, Rat) {
        let mut a = Rat::zero();
        let mut b = Rat::zero();
        for c in self.coeffs.iter().rev() {
            let products = [&a * lo, &a * hi, &b * lo, &b * hi];
            let mn = products.iter().min().expect("nonempty").clone();
            let mx = products.iter().max().expect("nonempty").clone();
            a = mn + c;
            b = mx + c;
        }
        (a, b)
    }

    pub fn derivative(&self) -> Self {
        Self::new(self.coeffs.iter().enumerate().skip(1).map(|(i, c)| c * int(i as i64)).collect())
    }

    pub fn nth_derivative(&self, k: usize) -> Self {
        (0..k).fold(self.clone(), |p, _| p.derivative())
    }

    pub fn add(&self, other: &Self) -> Self {
        let len = self.coeffs.len().max(other.coeffs.len());
        Self::new((0..len).map(|i| self.coeff(i) + other.coeff(i)).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        let len = self.coeffs.len().max(other.coeffs.len());
        Self::new((0..len).map(|i| self.coeff(i) - other.coeff(i)).collect())
    }

    pub fn scale(&self, c: &Rat) -> Self {
        Self::new(self.coeffs.iter().map(|x| x * c).collect())
    }

    pub fn add_const(&self, c: &Rat) -> Self {
        self.add(&Self::constant(c.clone()))
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        let mut out = vec![Rat::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::new(out)
    }

    /// `p(a + h x)`.
    pub fn compose_linear(&self, a: &Rat, h: &Rat) -> Self {
        let lin = Self::new(vec![a.clone(), h.clone()]);
        let mut acc = Self::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc.mul(&lin).add_const(c);
        }
        acc
    }

    /// Euclidean division. Panics on a zero divisor.
    pub fn divrem(&self, d: &Self) -> (Self, Self) {
        assert!(!d.is_zero(), "division by the zero polynomial");
        let dd = d.degree().expect("nonzero");
        let lead = d.leading();
        let mut rem = self.coeffs.clone();
        let mut quot = vec![Rat::zero(); self.coeffs.len().saturating_sub(dd).max(1)];
        while rem.len() > dd && !rem.is_empty() {
            let k = rem.len() - 1 - dd;
            let f = rem.last().expect("nonempty") / &lead;
            for (j, c) in d.coeffs.iter().enumerate() {
                rem[k + j] -= &f * c;
            }
            quot[k] = f;
            rem.pop();
            while rem.last().is_some_and(Zero::is_zero) {
                rem.pop();
            }
        }
        (Self::new(quot), Self::new(rem))
    }

    pub fn monic(&self) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        self.scale(&self.leading().recip())
    }

    /// Monic greatest common divisor.
    pub fn gcd(&self, other: &Self) -> Self {
        let (mut a, mut b) = (self.clone(), other.clone());
        while !b.is_zero() {
            let (_, r) = a.divrem(&b);
            a = b;
            b = r;
        }
        a.monic()
    }

    /// `p / gcd(p, p')`: same real roots, all simple.
    pub fn squarefree(&self) -> Self {
        if self.degree().unwrap_or(0) < 1 {
            return self.clone();
        }
        let g = self.gcd(&self.derivative());
        self.divrem(&g).0
    }

    /// Every real root has absolute value below this bound.
    pub fn root_bound(&self) -> Rat {
        let lead = self.leading().abs();
        let m = self.coeffs[..self.coeffs.len().saturating_sub(1)].iter().map(|c| c.abs() / &lead).max();
        Rat::one() + m.unwrap_or_else(Rat::zero)
    }

    /// Sturm sequence of a square-free polynomial.
    pub fn sturm_chain(&self) -> Vec<Poly> {
        let mut chain = vec![self.clone()];
        let d = self.derivative();
        if d.is_zero() {
            return chain;
        }
        chain.push(d);
        loop {
            let k = chain.len();
            let (_, r) = chain[k - 2].divrem(&chain[k - 1]);
            if r.is_zero() {
                break;
            }
            chain.push(r.scale(&int(-1)));
        }
        chain
    }

    /// Number of distinct real roots in `(a, b]`.
    pub fn count_roots(&self, a: &Rat, b: &Rat) -> usize {
        if self.degree().unwrap_or(0) < 1 {
            return 0;
        }
        let chain = self.squarefree().sturm_chain();
        let va = sign_variations(&chain, a);
        let vb = sign_variations(&chain, b);
        va.saturating_sub(vb)
    }

    /// Isolating enclosures of all distinct real roots in the closed interval, sorted.
    pub fn isolate_roots(&self, iv: &RatInterval) -> Vec<RootEnclosure> {
        if self.degree().unwrap_or(0) < 1 {
            return Vec::new();
        }
        let p = self.squarefree();
        if p.degree() == Some(1) {
            let x = -p.coeff(0) / p.coeff(1);
            return if iv.contains(&x) { vec![RootEnclosure { lo: x.clone(), hi: x, exact: true }] } else { Vec::new() };
        }
        if iv.lo == iv.hi {
            return if p.eval(&iv.lo).is_zero() { vec![RootEnclosure { lo: iv.lo.clone(), hi: iv.lo.clone(), exact: true }] } else { Vec::new() };
        }
        let chain = p.sturm_chain();
        let mut out = Vec::new();
        if p.eval(&iv.lo).is_zero() {
            out.push(RootEnclosure { lo: iv.lo.clone(), hi: iv.lo.clone(), exact: true });
        }
        let mut right_root = false;
        let mut c = sign_variations(&chain, &iv.lo).saturating_sub(sign_variations(&chain, &iv.hi));
        if p.eval(&iv.hi).is_zero() {
            right_root = true;
            c -= 1;
        }
        isolate_open(&p, &chain, iv.lo.clone(), iv.hi.clone(), c, &mut out);
        if right_root {
            out.push(RootEnclosure { lo: iv.hi.clone(), hi: iv.hi.clone(), exact: true });
        }
        out.sort_by(|x, y| x.lo.cmp(&y.lo));
        out
    }

    /// Shrink an open enclosure by bisection until its width is at most `width`.
    pub fn refine(&self, e: &RootEnclosure, width: &Rat) -> RootEnclosure {
        let p = self.squarefree();
        let mut e = e.clone();
        let s_hi = p.sign_at(&e.hi);
        while !e.exact && e.width() > *width {
            let m = e.mid();
            match p.sign_at(&m) {
                0 => e = RootEnclosure { lo: m.clone(), hi: m, exact: true },
                s if s == s_hi => e.hi = m,
                _ => e.lo = m,
            }
        }
        e
    }

    /// Enclosure of `{p(x) : x in iv}` that is exact at the endpoints and tight
    /// around interior extrema (each critical point enclosed to width `tol`).
    pub fn range_on(&self, iv: &RatInterval, tol: &Rat) -> (Rat, Rat) {
        let a = self.eval(&iv.lo);
        let b = self.eval(&iv.hi);
        let (mut lo, mut hi) = if a < b { (a.clone(), b) } else { (b.clone(), a) };
        let d = self.derivative();
        for e in d.isolate_roots(iv) {
            let e = d.refine(&e, tol);
            let (l, h) = if e.exact {
                let v = self.eval(&e.lo);
                (v.clone(), v)
            } else {
                self.eval_interval(&e.lo, &e.hi)
            };
            if l < lo {
                lo = l;
            }
            if h > hi {
                hi = h;
            }
        }
        (lo, hi)
    }

    /// A rational `<= min |p(x)|` over `iv` (zero when `p` vanishes there).
    pub fn abs_lower_bound(&self, iv: &RatInterval, tol: &Rat) -> Rat {
        let (lo, hi) = self.range_on(iv, tol);
        if lo.is_positive() {
            lo
        } else if hi.is_negative() {
            -hi
        } else {
            Rat::zero()
        }
    }

    /// A rational `>= max |p(x)|` over `iv`.
    pub fn abs_upper_bound(&self, iv: &RatInterval, tol: &Rat) -> Rat {
        let (lo, hi) = self.range_on(iv, tol);
        lo.abs().max(hi.abs())
    }
}

fn sign_variations(chain: &[Poly], x: &Rat) -> usize {
    let mut prev = 0;
    let mut count = 0;
    for p in chain {
        let s = p.sign_at(x);
        if s == 0 {
            continue;
        }
        if prev != 0 && s != prev {
            count += 1;
        }
        prev = s;
    }
    count
}

fn isolate_open(p: &Poly, chain: &[Poly], a: Rat, b: Rat, c: usize, out: &mut Vec<RootEnclosure>) {
    if c == 0 {
        return;
    }
    if c == 1 && !p.eval(&a).is_zero() && !p.eval(&b).is_zero() {
        out.push(RootEnclosure { lo: a, hi: b, exact: false });
        return;
    }
    let m = (&a + &b) / int(2);
    let vm = sign_variations(chain, &m);
    let va = sign_variations(chain, &a);
    let mid_root = p.eval(&m).is_zero();
    let left = va.saturating_sub(vm) - usize::from(mid_root);
    if mid_root {
        out.push(RootEnclosure { lo: m.clone(), hi: m.clone(), exact: true });
    }
    let right = c - left - usize::from(mid_root);
    isolate_open(p, chain, a, m.clone(), left, out);
    isolate_open(p, chain, m, b, right, out);
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms = self.coeffs.iter().enumerate().map(|(i, c)| {
            let mono = match i {
                0 => String::new(),
                1 => "x".to_string(),
                _ => format!("x^{i}"),
            };
            (c, mono)
        });
        write!(f, "{}", crate::exact::fmt_sum(terms))
    }
}

/// Compare two enclosures by position; overlapping ones compare equal.
pub fn enclosure_order(a: &RootEnclosure, b: &RootEnclosure) -> Ordering {
    if a.hi < b.lo || (a.hi == b.lo && !(a.exact && b.exact)) {
        Ordering::Less
    } else if b.hi < a.lo || (b.hi == a.lo && !(a.exact && b.exact)) {
        Ordering::Greater
    } else {
        Ordering::Equal
    }
}

/// `1/2^k`.
pub fn dyadic(k: u32) -> Rat {
    rat(1, 1) / Rat::from_integer(num_bigint::BigInt::one() << k as usize)
}
