//! Polynomial curves, their nondegeneracy constants, and certified outer covers
//! of the sets where `|a_0 + a.f(x)|` is small.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exact::{self, big, ceil_int, floor_int, int, rat_to_f64, serde_bigint_vec, AlgebraicScalar, Rat, RatInterval, WeightVector};
use crate::poly::{dyadic, Poly, RootEnclosure};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DangerError {
    #[error("curve components together with 1 are linearly dependent")]
    Dependent,
    #[error("Wronskian of the derivatives vanishes identically")]
    DegenerateWronskian,
    #[error("no subinterval of length at least {0} satisfies the bounds")]
    NoValidSubinterval(String),
    #[error("derivative band is empty on the interval")]
    BandEmpty,
    #[error("generator is outside the box |a_i| < b^(r_i t)")]
    OutOfBox,
    #[error("generator must be nonzero")]
    ZeroGenerator,
    #[error("generator box needs {needed} vectors, budget is {budget}")]
    BoxTooLarge { needed: u128, budget: u64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("interval lies outside the curve domain")]
    OutsideDomain,
}

/// A polynomial map `x -> (f_1(x), ..., f_n(x))` on a closed interval.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PolyCurve {
    pub components: Vec<Poly>,
    pub domain: RatInterval,
}

impl PolyCurve {
    pub fn new(components: Vec<Poly>, domain: RatInterval) -> Result<Self, DangerError> {
        if components.is_empty() {
            return Err(DangerError::DimensionMismatch("curve needs at least one component".into()));
        }
        let width = components.iter().map(|p| p.coeffs().len()).max().unwrap_or(0).max(1);
        let mut rows = vec![(0..width).map(|i| if i == 0 { Rat::one() } else { Rat::zero() }).collect::<Vec<_>>()];
        rows.extend(components.iter().map(|p| (0..width).map(|i| p.coeff(i)).collect()));
        if exact::rank(&rows) != rows.len() {
            return Err(DangerError::Dependent);
        }
        let c = Self { components, domain };
        if c.wronskian().is_zero() {
            return Err(DangerError::DegenerateWronskian);
        }
        Ok(c)
    }

    /// `(x, x^2, ..., x^n)`.
    pub fn veronese(n: usize, domain: RatInterval) -> Self {
        let comps = (1..=n)
            .map(|k| {
                let mut c = vec![Rat::zero(); k + 1];
                c[k] = Rat::one();
                Poly::new(c)
            })
            .collect();
        Self::new(comps, domain).expect("the Veronese curve is nondegenerate")
    }

    pub fn n(&self) -> usize {
        self.components.len()
    }

    pub fn eval(&self, x: &Rat) -> Vec<Rat> {
        self.components.iter().map(|p| p.eval(x)).collect()
    }

    /// `det(f_j^{(i)})_{1 <= i, j <= n}`.
    pub fn wronskian(&self) -> Poly {
        let n = self.n();
        let m: Vec<Vec<Poly>> = (1..=n).map(|i| self.components.iter().map(|f| f.nth_derivative(i)).collect()).collect();
        poly_det(&m)
    }

    /// `a.f` as a polynomial.
    pub fn combination(&self, a: &[BigInt]) -> Poly {
        self.components.iter().zip(a).fold(Poly::zero(), |acc, (f, ai)| acc.add(&f.scale(&big(ai))))
    }

    pub fn describe(&self) -> String {
        let parts: Vec<String> = self.components.iter().map(|p| p.to_string()).collect();
        format!("({}) on {}", parts.join(", "), self.domain)
    }
}

#[derive(Serialize, Deserialize)]
struct CurveRecord {
    components: Vec<Vec<String>>,
    domain: RatInterval,
}

impl Serialize for PolyCurve {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let components = self.components.iter().map(|p| p.coeffs().iter().map(exact::fmt_rat).collect()).collect();
        CurveRecord { components, domain: self.domain.clone() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for PolyCurve {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let rec = CurveRecord::deserialize(d)?;
        let comps = rec
            .components
            .iter()
            .map(|c| c.iter().map(|x| exact::parse_rat(x)).collect::<Result<Vec<_>, _>>().map(Poly::new))
            .collect::<Result<Vec<_>, _>>()
            .map_err(D::Error::custom)?;
        PolyCurve::new(comps, rec.domain).map_err(D::Error::custom)
    }
}

fn poly_det(m: &[Vec<Poly>]) -> Poly {
    let n = m.len();
    if n == 1 {
        return m[0][0].clone();
    }
    let mut acc = Poly::zero();
    for j in 0..n {
        if m[0][j].is_zero() {
            continue;
        }
        let minor: Vec<Vec<Poly>> =
            m[1..].iter().map(|row| row.iter().enumerate().filter(|(k, _)| *k != j).map(|(_, p)| p.clone()).collect()).collect();
        let term = m[0][j].mul(&poly_det(&minor));
        acc = if j % 2 == 0 { acc.add(&term) } else { acc.sub(&term) };
    }
    acc
}

/// Certified nondegeneracy constants on an interval:
/// `|W| > c0`, `|f'_j| > c0`, `|f_j^{(i)}| < c1` for `1 <= i <= n`,
/// `c2 = c0 c1^{1-n} / (2 n!)`, and `delta0` a length on which every
/// `f_j^{(i)}` moves by less than `c2 / n`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropertyFConstants {
    #[serde(with = "exact::serde_rat")]
    pub c0: Rat,
    #[serde(with = "exact::serde_rat")]
    pub c1: Rat,
    #[serde(with = "exact::serde_rat")]
    pub c2: Rat,
    #[serde(with = "exact::serde_rat")]
    pub delta0: Rat,
    pub interval: RatInterval,
}

fn factorial(n: usize) -> i64 {
    (1..=n as i64).product()
}

/// Certify the constants for a finite family of curves, shrinking `i0` to the
/// longest subinterval avoiding zeros of the Wronskians and first derivatives.
pub fn property_f(curves: &[PolyCurve], i0: &RatInterval, min_len: &Rat) -> Result<PropertyFConstants, DangerError> {
    let n = curves.first().ok_or_else(|| DangerError::DimensionMismatch("no curves".into()))?.n();
    if curves.iter().any(|c| c.n() != n) {
        return Err(DangerError::DimensionMismatch("curves of different dimension".into()));
    }
    let lower: Vec<Poly> = curves
        .iter()
        .flat_map(|c| std::iter::once(c.wronskian()).chain(c.components.iter().map(Poly::derivative)))
        .collect();
    let mut roots: Vec<RootEnclosure> = lower.iter().flat_map(|p| p.isolate_roots(i0)).collect();
    roots.sort_by(|a, b| a.lo.cmp(&b.lo));
    let interval = if roots.is_empty() {
        i0.clone()
    } else {
        // Gaps between consecutive zero enclosures, shrunk away from the zeros.
        let mut cuts: Vec<(Rat, Rat, bool, bool)> = Vec::new();
        let mut prev = (i0.lo.clone(), false);
        for r in &roots {
            cuts.push((prev.0.clone(), r.lo.clone(), prev.1, true));
            if r.hi > prev.0 {
                prev = (r.hi.clone(), true);
            }
        }
        cuts.push((prev.0, i0.hi.clone(), prev.1, false));
        let best = cuts
            .into_iter()
            .filter(|(a, b, _, _)| a < b)
            .map(|(a, b, za, zb)| {
                let w = &b - &a;
                let pad = &w / int(8);
                let lo = if za { &a + &pad } else { a };
                let hi = if zb { &b - &pad } else { b };
                (lo, hi)
            })
            .max_by(|x, y| (&x.1 - &x.0).cmp(&(&y.1 - &y.0)))
            .ok_or_else(|| DangerError::NoValidSubinterval(exact::fmt_rat(min_len)))?;
        RatInterval::new(best.0, best.1).map_err(|_| DangerError::NoValidSubinterval(exact::fmt_rat(min_len)))?
    };
    if interval.len() < *min_len {
        return Err(DangerError::NoValidSubinterval(exact::fmt_rat(min_len)));
    }
    let tol = interval.len() * dyadic(24);
    let min_lower = lower.iter().map(|p| p.abs_lower_bound(&interval, &tol)).min().expect("nonempty");
    if !min_lower.is_positive() {
        return Err(DangerError::NoValidSubinterval(exact::fmt_rat(min_len)));
    }
    let c0 = (min_lower / int(2)).min(Rat::new(BigInt::one(), BigInt::from(2)));
    let mut upper = Rat::zero();
    let mut lipschitz = Rat::zero();
    for c in curves {
        for f in &c.components {
            for i in 1..=n {
                upper = upper.max(f.nth_derivative(i).abs_upper_bound(&interval, &tol));
                lipschitz = lipschitz.max(f.nth_derivative(i + 1).abs_upper_bound(&interval, &tol));
            }
        }
    }
    let c1 = upper + Rat::one();
    let c2 = &c0 * exact::pow_rat(&c1, 1 - n as i64) / int(2 * factorial(n));
    let delta0 = if lipschitz.is_zero() {
        interval.len()
    } else {
        (&c2 / (int(n as i64) * &lipschitz) / int(2)).min(interval.len())
    };
    Ok(PropertyFConstants { c0, c1, c2, delta0, interval })
}

/// Outer cover of a dangerous set, optionally restricted to one derivative band.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DangerousCover {
    /// `(a_0, a_1, ..., a_n)`.
    #[serde(with = "serde_bigint_vec")]
    pub generator: Vec<BigInt>,
    pub t: u32,
    pub ell: Option<u32>,
    pub intervals: Vec<RatInterval>,
    pub length_bound: Option<AlgebraicScalar>,
    pub count_bound: Option<u64>,
}

impl DangerousCover {
    pub fn measure(&self) -> Rat {
        self.intervals.iter().map(RatInterval::len).sum()
    }

    /// Both bounds hold (vacuous when absent).
    pub fn respects_bounds(&self) -> bool {
        let len_ok = self.length_bound.as_ref().is_none_or(|b| {
            self.intervals.iter().all(|iv| AlgebraicScalar::from_rat(iv.len()) <= *b)
        });
        let count_ok = self.count_bound.is_none_or(|c| self.intervals.len() as u64 <= c);
        len_ok && count_ok
    }
}

/// Outer cover of `{x in domain : pred}` where `pred` can only change at roots of `breaks`.
///
/// Gaps between root enclosures are decided by `point_pred` at their midpoint;
/// enclosures themselves by the conservative `interval_pred`.
fn cover_by_breakpoints(
    domain: &RatInterval,
    breaks: &[Poly],
    tol: &Rat,
    point_pred: impl Fn(&Rat) -> bool,
    interval_pred: impl Fn(&Rat, &Rat) -> bool,
) -> Vec<RatInterval> {
    let mut encs: Vec<(Rat, Rat)> = Vec::new();
    for p in breaks {
        for e in p.isolate_roots(domain) {
            let e = p.refine(&e, tol);
            let (lo, hi) = if e.exact {
                ((&e.lo - tol).max(domain.lo.clone()), (&e.hi + tol).min(domain.hi.clone()))
            } else {
                (e.lo, e.hi)
            };
            encs.push((lo, hi));
        }
    }
    encs.sort();
    let mut blocks: Vec<(Rat, Rat)> = Vec::new();
    for (lo, hi) in encs {
        match blocks.last_mut() {
            Some(last) if lo <= last.1 => {
                if hi > last.1 {
                    last.1 = hi;
                }
            }
            _ => blocks.push((lo, hi)),
        }
    }
    let mut pieces: Vec<(Rat, Rat)> = Vec::new();
    let mut cursor = domain.lo.clone();
    for (lo, hi) in &blocks {
        if *lo > cursor {
            let mid = (&cursor + lo) / int(2);
            if point_pred(&mid) {
                pieces.push((cursor.clone(), lo.clone()));
            }
        }
        if lo < hi && interval_pred(lo, hi) {
            pieces.push((lo.clone(), hi.clone()));
        }
        cursor = cursor.max(hi.clone());
    }
    if domain.hi > cursor {
        let mid = (&cursor + &domain.hi) / int(2);
        if point_pred(&mid) {
            pieces.push((cursor, domain.hi.clone()));
        }
    }
    merge_pieces(pieces)
}

fn merge_pieces(mut pieces: Vec<(Rat, Rat)>) -> Vec<RatInterval> {
    pieces.sort();
    let mut out: Vec<(Rat, Rat)> = Vec::new();
    for (lo, hi) in pieces {
        match out.last_mut() {
            Some(last) if lo <= last.1 => {
                if hi > last.1 {
                    last.1 = hi;
                }
            }
            _ => out.push((lo, hi)),
        }
    }
    out.into_iter().filter_map(|(lo, hi)| RatInterval::new(lo, hi).ok()).collect()
}

/// `kappa * b^{-t}`.
pub fn danger_threshold(b: &AlgebraicScalar, kappa: &AlgebraicScalar, t: u32) -> AlgebraicScalar {
    kappa.mul(&b.pow(&int(-(t as i64))).expect("b > 0"))
}

/// Largest integers strictly below `b^{r_i t}`.
pub fn generator_box(r: &WeightVector, b: &AlgebraicScalar, t: u32) -> Vec<i64> {
    r.entries()
        .iter()
        .map(|ri| {
            if ri.is_zero() {
                0
            } else {
                b.pow(&(ri * int(t as i64))).expect("b > 0").strict_floor().to_i64().expect("fits")
            }
        })
        .collect()
}

fn interval_near_zero(p: &Poly, lo: &Rat, hi: &Rat, eps: &Rat) -> bool {
    let (a, b) = p.eval_interval(lo, hi);
    a < *eps && b > -eps.clone()
}

/// Certified outer cover of the `D^1` set of one generator in derivative band `ell`:
/// `|a_0 + a.f| < kappa b^{-t}` and `b^{gamma t - (1+gamma) ell} <= |a.f'| < b^{gamma t - (1+gamma)(ell-1)}`.
///
/// Pieces longer than `kappa b^{-(1+gamma)(t-ell)}` are split. The cardinality bound is
/// `max((n+1)n/2 + 1, ceil(2 c1 n / c2) + 1) * (ceil(|I0| / delta0) + 1)`.
#[allow(clippy::too_many_arguments)]
pub fn d1_cover(
    t: u32,
    ell: u32,
    r: &WeightVector,
    b: &AlgebraicScalar,
    kappa: &AlgebraicScalar,
    f: &PolyCurve,
    a0: &BigInt,
    a: &[BigInt],
    k: &PropertyFConstants,
) -> Result<DangerousCover, DangerError> {
    let n = f.n();
    if a.len() != n || r.n() != n {
        return Err(DangerError::DimensionMismatch("generator length".into()));
    }
    if a.iter().all(Zero::is_zero) {
        return Err(DangerError::ZeroGenerator);
    }
    let bx = generator_box(r, b, t);
    if a.iter().zip(&bx).any(|(ai, &m)| ai.abs() > BigInt::from(m)) {
        return Err(DangerError::OutOfBox);
    }
    let gamma = r.gamma();
    let one_g = Rat::one() + &gamma;
    let tr = int(t as i64);
    let lr = int(ell as i64);
    let lower = b.pow(&(&gamma * &tr - &one_g * &lr)).expect("b > 0");
    let upper = b.pow(&(&gamma * &tr - &one_g * (&lr - Rat::one()))).expect("b > 0");
    let eps = danger_threshold(b, kappa, t);
    let eps_hi = eps.upper_rat(64);
    let l_lo = lower.lower_rat(64);
    let u_hi = upper.upper_rat(64);
    let length_bound = kappa.mul(&b.pow(&(-&one_g * (&tr - &lr))).expect("b > 0"));
    let len_lo = length_bound.lower_rat(64);

    let i0 = &k.interval;
    let p = f.combination(a).add_const(&big(a0));
    let dp = p.derivative();
    let tol = (&len_lo * dyadic(12)).min(i0.len() * dyadic(30));

    // Band alone first: an empty band is reported separately.
    let band_breaks = [dp.add_const(&-l_lo.clone()), dp.add_const(&l_lo), dp.add_const(&-u_hi.clone()), dp.add_const(&u_hi)];
    let in_band = |x: &Rat| {
        let v = dp.eval(x).abs();
        l_lo <= v && v <= u_hi
    };
    let band_iv = |lo: &Rat, hi: &Rat| {
        let (a, b) = dp.eval_interval(lo, hi);
        let m_hi = a.abs().max(b.abs());
        let m_lo = if a.is_positive() || b.is_negative() { a.abs().min(b.abs()) } else { Rat::zero() };
        m_hi >= l_lo && m_lo <= u_hi
    };
    if cover_by_breakpoints(i0, &band_breaks, &tol, in_band, band_iv).is_empty() {
        return Err(DangerError::BandEmpty);
    }
    let mut breaks = band_breaks.to_vec();
    breaks.push(p.add_const(&-eps_hi.clone()));
    breaks.push(p.add_const(&eps_hi));
    let pieces = cover_by_breakpoints(
        i0,
        &breaks,
        &tol,
        |x| p.eval(x).abs() < eps_hi && in_band(x),
        |lo, hi| interval_near_zero(&p, lo, hi, &eps_hi) && band_iv(lo, hi),
    );
    let mut intervals = Vec::new();
    for iv in pieces {
        let parts = ceil_int(&(iv.len() / &len_lo)).to_u64().expect("fits").max(1);
        intervals.extend(iv.split(parts));
    }
    let nn = n as i64;
    let first = (nn + 1) * nn / 2 + 1;
    let second = ceil_int(&(int(2) * &k.c1 * int(nn) / &k.c2)).to_i64().expect("fits") + 1;
    let cover_count = ceil_int(&(i0.len() / &k.delta0)).to_i64().expect("fits") + 1;
    let count_bound = (first.max(second) * cover_count) as u64;
    let mut generator = vec![a0.clone()];
    generator.extend(a.iter().cloned());
    Ok(DangerousCover { generator, t, ell: Some(ell), intervals, length_bound: Some(length_bound), count_bound: Some(count_bound) })
}

/// Telemetry for one level of dangerous-set computation.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct UnionTelemetry {
    pub t: u32,
    pub box_size: u64,
    pub generators: u64,
    pub pieces: u64,
    pub measure: f64,
}

/// Iterate over the nonzero integer vectors of the box `|a_i| <= bx_i`.
pub fn for_each_generator(bx: &[i64], mut visit: impl FnMut(&[i64])) {
    let n = bx.len();
    let mut a: Vec<i64> = bx.iter().map(|&x| -x).collect();
    loop {
        if a.iter().any(|&x| x != 0) {
            visit(&a);
        }
        let mut i = n;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if a[i] < bx[i] {
                a[i] += 1;
                break;
            }
            a[i] = -bx[i];
        }
    }
}

pub fn box_size(bx: &[i64]) -> u128 {
    bx.iter().map(|&x| 2 * x as u128 + 1).product()
}

/// Outer covers of every nonempty set `{x in I : |a_0 + a.f(x)| < kappa b^{-t}}`
/// over all admissible nonzero `a` and all `a_0`.
pub fn dangerous_union(
    t: u32,
    r: &WeightVector,
    b: &AlgebraicScalar,
    kappa: &AlgebraicScalar,
    f: &PolyCurve,
    i: &RatInterval,
    budget: u64,
) -> Result<(Vec<DangerousCover>, UnionTelemetry), DangerError> {
    if r.n() != f.n() {
        return Err(DangerError::DimensionMismatch("weights and curve".into()));
    }
    let bx = generator_box(r, b, t);
    let needed = box_size(&bx);
    if needed > budget as u128 {
        return Err(DangerError::BoxTooLarge { needed, budget });
    }
    let eps_hi = danger_threshold(b, kappa, t).upper_rat(64);
    let tol = (&eps_hi * dyadic(8)).min(i.len() * dyadic(30));
    let range_tol = i.len() * dyadic(20);
    let mut covers = Vec::new();
    let mut tel = UnionTelemetry { t, box_size: needed as u64, ..Default::default() };
    for_each_generator(&bx, |a| {
        tel.generators += 1;
        let ab: Vec<BigInt> = a.iter().map(|&x| BigInt::from(x)).collect();
        let p = f.combination(&ab);
        let (lo, hi) = p.range_on(i, &range_tol);
        let kmin = ceil_int(&(&lo - &eps_hi));
        let kmax = floor_int(&(&hi + &eps_hi));
        let mut k = kmin;
        while k <= kmax {
            let q = p.add_const(&-big(&k));
            let pieces = cover_by_breakpoints(
                i,
                &[q.add_const(&-eps_hi.clone()), q.add_const(&eps_hi)],
                &tol,
                |x| q.eval(x).abs() < eps_hi,
                |lo, hi| interval_near_zero(&q, lo, hi, &eps_hi),
            );
            if !pieces.is_empty() {
                tel.pieces += pieces.len() as u64;
                let mut generator = vec![-k.clone()];
                generator.extend(ab.iter().cloned());
                covers.push(DangerousCover { generator, t, ell: None, intervals: pieces, length_bound: None, count_bound: None });
            }
            k += 1;
        }
    });
    let all: Vec<(Rat, Rat)> = covers.iter().flat_map(|c| c.intervals.iter().map(|iv| (iv.lo.clone(), iv.hi.clone()))).collect();
    tel.measure = merge_pieces(all).iter().map(|iv| rat_to_f64(&iv.len())).sum();
    Ok((covers, tel))
}

/// Does a nonzero `(a_0, a)` solve `|a_0 + a.f(x)| < kappa b^{-t}`, `|a_i| < b^{r_i t}` at `x`?
pub fn point_is_dangerous(
    t: u32,
    r: &WeightVector,
    b: &AlgebraicScalar,
    kappa: &AlgebraicScalar,
    f: &PolyCurve,
    x: &Rat,
    budget: u64,
) -> Result<Option<Vec<BigInt>>, DangerError> {
    crate::lattice::flow_violation(&f.eval(x), r, b, kappa, t, budget).map_err(|e| match e {
        crate::lattice::LatticeError::BudgetExceeded { needed, budget } => DangerError::BoxTooLarge { needed, budget },
        other => DangerError::DimensionMismatch(other.to_string()),
    })
}

/// Uniform grid of `cells` closed cells `[lo + k h, lo + (k+1) h]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Grid {
    pub lo: Rat,
    pub h: Rat,
    pub cells: u64,
}

impl Grid {
    pub fn new(iv: &RatInterval, cells: u64) -> Self {
        Self { lo: iv.lo.clone(), h: iv.len() / int(cells as i64), cells }
    }

    pub fn point(&self, j: u64) -> Rat {
        &self.lo + &self.h * big(&BigInt::from(j))
    }

    pub fn cell(&self, k: u64) -> RatInterval {
        RatInterval { lo: self.point(k), hi: self.point(k + 1) }
    }

    /// Index of the cell containing `x` (the left one at shared endpoints), clamped.
    pub fn cell_of(&self, x: &Rat) -> u64 {
        let k = floor_int(&((x - &self.lo) / &self.h));
        if k.is_negative() {
            0
        } else {
            k.to_u64().unwrap_or(u64::MAX).min(self.cells - 1)
        }
    }
}

/// A run of consecutive grid cells `[start, end)` flagged for one generator,
/// with `|P'|` sampled at the run (used only to suggest bucket choices).
#[derive(Clone, Debug, PartialEq)]
pub struct DangerRun {
    pub start: u64,
    pub end: u64,
    pub slope: f64,
}

/// `P(lo + h j)` scaled to integer coefficients, plus the scale.
struct ScaledPoly {
    coeffs: Vec<BigInt>,
    scale: BigInt,
}

impl ScaledPoly {
    fn new(p: &Poly, grid: &Grid, eps_den: &BigInt) -> Self {
        let q = p.compose_linear(&grid.lo, &grid.h);
        let den = q.coeffs().iter().fold(BigInt::one(), |acc, c| acc.lcm(c.denom()));
        let coeffs = q.coeffs().iter().map(|c| c.numer() * (&den / c.denom()) * eps_den).collect();
        Self { coeffs, scale: den }
    }

    fn eval(&self, j: u64) -> BigInt {
        let x = BigInt::from(j);
        self.coeffs.iter().rev().fold(BigInt::zero(), |acc, c| acc * &x + c)
    }
}

/// First index in `[lo, hi]` where the monotone predicate becomes true
/// (`None` if never), searching from a floating-point guess.
fn first_true(lo: u64, hi: u64, guess: u64, pred: impl Fn(u64) -> bool) -> Option<u64> {
    if !pred(hi) {
        return None;
    }
    let g = guess.clamp(lo, hi);
    // Bracket [a, b] with pred(a) false (or a = lo - 1 conceptually) and pred(b) true.
    let (mut a, mut b): (Option<u64>, u64);
    if pred(g) {
        b = g;
        let mut step = 1u64;
        loop {
            if b == lo {
                return Some(lo);
            }
            let c = b.saturating_sub(step).max(lo);
            if pred(c) {
                b = c;
                step = step.saturating_mul(2);
            } else {
                a = Some(c);
                break;
            }
        }
    } else {
        a = Some(g);
        let mut step = 1u64;
        loop {
            let c = g.saturating_add(step).min(hi);
            if pred(c) {
                b = c;
                break;
            }
            a = Some(c);
            step = step.saturating_mul(2);
        }
    }
    let mut a = a.expect("bracketed");
    while b - a > 1 {
        let m = a + (b - a) / 2;
        if pred(m) {
            b = m;
        } else {
            a = m;
        }
    }
    Some(b)
}

/// Cells of `grid` meeting `{x : dist(P(x), Z) < eps}`, as runs, using exact
/// integer evaluation at grid points. `eps_hi` must be at least the true threshold.
pub fn danger_cells(p: &Poly, eps_hi: &Rat, grid: &Grid) -> Vec<DangerRun> {
    let n_cells = grid.cells;
    let domain = RatInterval { lo: grid.lo.clone(), hi: grid.point(n_cells) };
    let dp = p.derivative();
    let mut out = Vec::new();

    // Cells containing critical points are decided by interval evaluation.
    let mut critical: Vec<(u64, u64)> = Vec::new();
    if !dp.is_zero() {
        for e in dp.isolate_roots(&domain) {
            let e = dp.refine(&e, &grid.h);
            let c0 = grid.cell_of(&e.lo).saturating_sub(1);
            let c1 = (grid.cell_of(&e.hi) + 1).min(n_cells - 1);
            critical.push((c0, c1 + 1));
        }
    }
    critical.sort();
    let mut merged: Vec<(u64, u64)> = Vec::new();
    for (s, e) in critical {
        match merged.last_mut() {
            Some(last) if s <= last.1 => last.1 = last.1.max(e),
            _ => merged.push((s, e)),
        }
    }
    for &(s, e) in &merged {
        for c in s..e {
            let cell = grid.cell(c);
            let (lo, hi) = p.eval_interval(&cell.lo, &cell.hi);
            let k = ceil_int(&(&lo - eps_hi));
            if big(&k) <= &hi + eps_hi {
                let slope = rat_to_f64(&dp.eval(&cell.lo)).abs();
                out.push(DangerRun { start: c, end: c + 1, slope });
            }
        }
    }

    // Monotone segments between critical blocks, as grid point ranges [gs, ge].
    let mut segments: Vec<(u64, u64)> = Vec::new();
    let mut cursor = 0u64;
    for &(s, e) in &merged {
        if s > cursor {
            segments.push((cursor, s));
        }
        cursor = e;
    }
    if cursor < n_cells {
        segments.push((cursor, n_cells));
    }

    let eps_num = eps_hi.numer().clone();
    let eps_den = eps_hi.denom().clone();
    let sp = ScaledPoly::new(p, grid, &eps_den);
    let lo_f = rat_to_f64(&grid.lo);
    let h_f = rat_to_f64(&grid.h);
    let eps_f = rat_to_f64(eps_hi);
    let cf: Vec<f64> = p.coeffs().iter().map(rat_to_f64).collect();
    let pf = |j: u64| {
        let x = lo_f + h_f * j as f64;
        cf.iter().rev().fold(0.0, |acc, c| acc * x + c)
    };

    for (gs, ge) in segments {
        let vs = sp.eval(gs);
        let ve = sp.eval(ge);
        let increasing = match vs.cmp(&ve) {
            Ordering::Less => true,
            Ordering::Greater => false,
            Ordering::Equal => continue,
        };
        let sign = if increasing { 1 } else { -1 };
        // Work with the increasing function s * P.
        let val = |j: u64| -> BigInt {
            let v = sp.eval(j);
            if increasing {
                v
            } else {
                -v
            }
        };
        let val_f = |j: u64| pf(j) * sign as f64;
        let scale = &sp.scale;
        let (vmin, vmax) = if increasing { (vs.clone(), ve.clone()) } else { (-vs.clone(), -ve.clone()) };
        // k ranges over integers with k - eps < max and k + eps > min, in units of scale*eps_den.
        let unit = scale * &eps_den;
        let kmin = (&vmin - scale * &eps_num).div_floor(&unit);
        let kmax = (&vmax + scale * &eps_num).div_ceil(&unit);
        let slope = rat_to_f64(&dp.eval(&grid.point((gs + ge) / 2))).abs();
        let mut k = kmin;
        while k <= kmax {
            let kf = k.to_f64().unwrap_or(0.0);
            let low_t = &unit * &k - scale * &eps_num;
            let high_t = &unit * &k + scale * &eps_num;
            // A: first point with value > k - eps.
            let guess_a = float_guess(gs, ge, |j| val_f(j) > kf - eps_f);
            let a = first_true(gs, ge, guess_a, |j| val(j) > low_t);
            // B: last point with value < k + eps, i.e. (first point with value >= k + eps) - 1.
            let guess_b = float_guess(gs, ge, |j| val_f(j) >= kf + eps_f);
            let b_next = first_true(gs, ge, guess_b, |j| val(j) >= high_t);
            if let Some(a) = a {
                let b = match b_next {
                    Some(0) => None,
                    Some(x) if x <= gs => None,
                    Some(x) => Some(x - 1),
                    None => Some(ge),
                };
                if let Some(b) = b {
                    let start = a.saturating_sub(1).max(gs);
                    let end = b.min(ge - 1);
                    if start <= end {
                        out.push(DangerRun { start, end: end + 1, slope });
                    }
                }
            }
            k += 1;
        }
    }
    out
}

fn float_guess(lo: u64, hi: u64, pred: impl Fn(u64) -> bool) -> u64 {
    let (mut a, mut b) = (lo, hi);
    if pred(a) {
        return a;
    }
    if !pred(b) {
        return b;
    }
    while b - a > 1 {
        let m = a + (b - a) / 2;
        if pred(m) {
            b = m;
        } else {
            a = m;
        }
    }
    b
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::rat;
    use proptest::prelude::*;

    fn s(x: Rat) -> AlgebraicScalar {
        AlgebraicScalar::from_rat(x)
    }

    fn iv(a: Rat, b: Rat) -> RatInterval {
        RatInterval::new(a, b).unwrap()
    }

    #[test]
    fn veronese_property_f() {
        let c = PolyCurve::veronese(2, iv(rat(1, 10), rat(9, 10)));
        assert_eq!(c.wronskian(), Poly::from_ints(&[2]));
        let k = property_f(&[c], &iv(rat(1, 10), rat(9, 10)), &rat(1, 100)).unwrap();
        assert_eq!(k.interval, iv(rat(1, 10), rat(9, 10)));
        assert_eq!(k.c0, rat(1, 10));
        assert_eq!(k.c1, int(3));
        assert_eq!(k.c2, &k.c0 * exact::pow_rat(&k.c1, -1) / int(4));
        assert!(k.delta0.is_positive());
    }

    #[test]
    fn property_f_avoids_derivative_zero() {
        // f = (x^2 - x, x^3): f_1' vanishes at 1/2.
        let c = PolyCurve::new(vec![Poly::from_ints(&[0, -1, 1]), Poly::from_ints(&[0, 0, 0, 1])], iv(int(0), int(1))).unwrap();
        let k = property_f(&[c], &iv(rat(1, 5), int(1)), &rat(1, 100)).unwrap();
        assert!(!k.interval.contains(&rat(1, 2)));
        assert!(k.c0 < Rat::one() && Rat::one() < k.c1);
    }

    #[test]
    fn dependent_curves_rejected() {
        let r = PolyCurve::new(vec![Poly::from_ints(&[0, 1]), Poly::from_ints(&[1, 2])], iv(int(0), int(1)));
        assert_eq!(r, Err(DangerError::Dependent));
    }

    #[test]
    fn linear_d1_cover() {
        let f = PolyCurve::veronese(1, iv(rat(-1, 2), rat(1, 2)));
        let k = property_f(std::slice::from_ref(&f), &f.domain, &rat(1, 10)).unwrap();
        let r = WeightVector::parse("1").unwrap();
        let b = s(int(2));
        let kappa = s(rat(1, 4));
        // t = 3, a = 1: |x| < 1/32; |a f'| = 1 lies in band ell with 2^{2 ell - 3}... pick ell = 2: [2^{-1}, 2^{1}).
        // The dangerous set has length exactly the piece bound 1/16, so the outer cover is split.
        let c = d1_cover(3, 2, &r, &b, &kappa, &f, &BigInt::zero(), &[BigInt::one()], &k).unwrap();
        assert_eq!(c.intervals.len(), 2);
        assert!(c.intervals[0].contains(&rat(-1, 32)) && c.intervals[1].contains(&rat(1, 32)));
        assert!(c.respects_bounds());
        // Derivative 1 is below the band for ell = 0: [2^3, 2^5).
        let e = d1_cover(3, 0, &r, &b, &kappa, &f, &BigInt::zero(), &[BigInt::one()], &k);
        assert_eq!(e, Err(DangerError::BandEmpty));
    }

    #[test]
    fn veronese_cover_near_one() {
        let f = PolyCurve::veronese(2, iv(rat(1, 10), int(1)));
        let r = WeightVector::parse("1/2,1/2").unwrap();
        let b = s(int(4));
        // kappa b^{-t} = 1/100 with t = 1, kappa = 1/25.
        let (covers, _) = dangerous_union(1, &r, &b, &s(rat(1, 25)), &f, &f.domain, 1000).unwrap();
        let gen = covers.iter().find(|c| c.generator == vec![BigInt::from(-1), BigInt::zero(), BigInt::one()]).unwrap();
        assert_eq!(gen.intervals.len(), 1);
        let piece = &gen.intervals[0];
        assert!(piece.contains(&int(1)) || piece.hi >= rat(99, 100));
        assert!(piece.lo < int(1) && piece.lo > rat(99, 100));
    }

    #[test]
    fn empty_box_gives_empty_union() {
        let f = PolyCurve::veronese(1, iv(int(0), int(1)));
        let r = WeightVector::parse("1").unwrap();
        let (covers, tel) = dangerous_union(0, &r, &s(int(2)), &s(rat(1, 4)), &f, &f.domain, 10).unwrap();
        assert!(covers.is_empty());
        assert_eq!(tel.box_size, 1);
    }

    #[test]
    fn farey_neighbourhoods() {
        // n = 1, f = x on [0,1], b = 2, kappa = 1/4, t = 2: |a_1| < 4 and |a_0 + a_1 x| < 1/16.
        let f = PolyCurve::veronese(1, iv(int(0), int(1)));
        let r = WeightVector::parse("1").unwrap();
        let (covers, _) = dangerous_union(2, &r, &s(int(2)), &s(rat(1, 4)), &f, &f.domain, 100).unwrap();
        let pieces: Vec<(Rat, Rat)> = covers.iter().flat_map(|c| c.intervals.iter().map(|i| (i.lo.clone(), i.hi.clone()))).collect();
        let union = merge_pieces(pieces);
        // Direct: x with ||a x|| < 1/16 for some 1 <= a <= 3.
        for k in 0..=400 {
            let x = rat(k, 400);
            let direct = (1..=3).any(|a| crate::certify::nearest_int_dist(&(int(a) * &x)) < rat(1, 16));
            let covered = union.iter().any(|i| i.contains(&x));
            if direct {
                assert!(covered, "{x} dangerous but uncovered");
            }
        }
        // The cover is tight up to the refinement tolerance.
        let measure: f64 = union.iter().map(|i| rat_to_f64(&i.len())).sum();
        assert!(measure < 0.5);
    }

    #[test]
    fn grid_cells_match_pointwise() {
        let p = Poly::new(vec![rat(1, 7), rat(-3, 2), rat(5, 1)]);
        let grid = Grid::new(&iv(int(0), int(1)), 4096);
        let eps = rat(1, 200);
        let runs = danger_cells(&p, &eps, &grid);
        let mut flagged = vec![false; grid.cells as usize];
        for r in &runs {
            for c in r.start..r.end {
                flagged[c as usize] = true;
            }
        }
        for c in 0..grid.cells {
            let cell = grid.cell(c);
            for j in 0..=4 {
                let x = &cell.lo + (&cell.hi - &cell.lo) * rat(j, 4);
                if crate::certify::nearest_int_dist(&p.eval(&x)) < eps {
                    assert!(flagged[c as usize], "cell {c} missed at {x}");
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn grid_cells_are_outer(c in proptest::collection::vec(-30i64..30, 2..5), e in 50i64..400) {
            let p = Poly::from_ints(&c);
            prop_assume!(p.degree().unwrap_or(0) >= 1);
            let grid = Grid::new(&iv(rat(-1, 1), rat(1, 1)), 1024);
            let eps = rat(1, e);
            let runs = danger_cells(&p, &eps, &grid);
            let mut flagged = vec![false; grid.cells as usize];
            for r in &runs {
                for k in r.start..r.end {
                    flagged[k as usize] = true;
                }
            }
            for k in 0..grid.cells {
                let cell = grid.cell(k);
                for j in 0..=2 {
                    let x = &cell.lo + (&cell.hi - &cell.lo) * rat(j, 2);
                    if crate::certify::nearest_int_dist(&p.eval(&x)) < eps {
                        prop_assert!(flagged[k as usize]);
                    }
                }
            }
        }

        #[test]
        fn shrinking_kappa_shrinks_union(m in 2i64..5) {
            let f = PolyCurve::veronese(1, iv(int(0), int(1)));
            let r = WeightVector::parse("1").unwrap();
            let b = s(int(2));
            let big_k = s(rat(1, 1 << m));
            let small_k = s(rat(1, 1 << (m + 1)));
            let (a, _) = dangerous_union(3, &r, &b, &big_k, &f, &f.domain, 100).unwrap();
            let (c, _) = dangerous_union(3, &r, &b, &small_k, &f, &f.domain, 100).unwrap();
            let ua = merge_pieces(a.iter().flat_map(|c| c.intervals.iter().map(|i| (i.lo.clone(), i.hi.clone()))).collect());
            for cov in &c {
                for piece in &cov.intervals {
                    prop_assert!(ua.iter().any(|u| u.contains_interval(piece)));
                }
            }
        }
    }
}
