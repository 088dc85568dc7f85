//! Badness margins by exhaustive search, constructive transference between the
//! simultaneous and dual formulations, and continued fractions.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exact::{
    self, big, fmt_rat, int, iroot_floor, rat_to_f64, serde_bigint_vec, serde_rat_vec, AlgebraicScalar, Rat,
    RatInterval, WeightVector,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CertifyError {
    #[error("search bound must be at least 1")]
    EmptySearch,
    #[error("point has {point} coordinates but weights have {weights}")]
    DimensionMismatch { point: usize, weights: usize },
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("search exhausted without finding a point")]
    SearchExhausted,
    #[error("linear forms are singular")]
    Singular,
    #[error("continued fraction undetermined on the interval")]
    Undetermined,
    #[error("continued fraction length must be at least 1")]
    BadLength,
    #[error("this check needs every weight positive")]
    ZeroWeight,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Simultaneous,
    Dual,
}

/// The point whose margin was measured, and optionally the interval it was drawn from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subject {
    #[serde(with = "serde_rat_vec")]
    pub point: Vec<Rat>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub enclosure: Option<RatInterval>,
}

/// Result of an exhaustive margin search.
///
/// For `Simultaneous` the witness is `(q, p_1, ..., p_n)`; for `Dual` it is
/// `(a_0, a_1, ..., a_n)` and `witness_height` is the least admissible `H`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BadCertificate {
    pub subject: Subject,
    pub weights: WeightVector,
    pub mode: Mode,
    pub bound: u64,
    pub margin: AlgebraicScalar,
    #[serde(with = "serde_bigint_vec")]
    pub witness: Vec<BigInt>,
    pub witness_height: u64,
}

impl BadCertificate {
    /// Re-evaluate the witness and confirm it attains the stated margin.
    pub fn recheck(&self) -> bool {
        let y = &self.subject.point;
        match self.mode {
            Mode::Simultaneous => {
                let q = &self.witness[0];
                if !q.is_positive() || q > &BigInt::from(self.bound) {
                    return false;
                }
                simultaneous_value(y, &self.weights, q) == self.margin
            }
            Mode::Dual => {
                let a = &self.witness[1..];
                if self.witness.iter().all(Zero::is_zero) {
                    return false;
                }
                let h = dual_height(a, &self.weights);
                if h != BigInt::from(self.witness_height) || h > BigInt::from(self.bound) {
                    return false;
                }
                let form = big(&self.witness[0]) + a.iter().zip(y).map(|(ai, yi)| big(ai) * yi).sum::<Rat>();
                AlgebraicScalar::from_rat(big(&h) * form.abs()) == self.margin
            }
        }
    }
}

/// Distance from `x` to the nearest integer.
pub fn nearest_int_dist(x: &Rat) -> Rat {
    let f = x - x.floor();
    let g = Rat::one() - &f;
    f.min(g)
}

fn check_dims(y: &[Rat], r: &WeightVector) -> Result<(), CertifyError> {
    if y.len() != r.n() {
        return Err(CertifyError::DimensionMismatch { point: y.len(), weights: r.n() });
    }
    Ok(())
}

/// `q * max_i ||q y_i||^{1/r_i}`, zero weights contributing 0.
pub fn simultaneous_value(y: &[Rat], r: &WeightVector, q: &BigInt) -> AlgebraicScalar {
    let qr = big(q);
    let mut best = AlgebraicScalar::from_int(0);
    for (yi, ri) in y.iter().zip(r.entries()) {
        if ri.is_zero() {
            continue;
        }
        let d = nearest_int_dist(&(&qr * yi));
        let term = AlgebraicScalar::from_rat(d).pow(&ri.recip()).expect("nonnegative base");
        if term > best {
            best = term;
        }
    }
    best.mul_rat(&qr)
}

/// `min_{1 <= q <= q_max} q * max_i ||q y_i||^{1/r_i}` with its minimizing `(q, p)`.
pub fn simultaneous_margin(y: &[Rat], r: &WeightVector, q_max: u64) -> Result<BadCertificate, CertifyError> {
    check_dims(y, r)?;
    if q_max < 1 {
        return Err(CertifyError::EmptySearch);
    }
    let inv: Vec<f64> = r.entries().iter().map(|w| if w.is_zero() { 0.0 } else { 1.0 / rat_to_f64(w) }).collect();
    // Residues `q * numer mod denom`, stepped by one addition per q.
    let steps: Vec<BigInt> = y.iter().map(|yi| yi.numer().mod_floor(yi.denom())).collect();
    let mut res: Vec<BigInt> = vec![BigInt::zero(); y.len()];
    let mut best: Option<(AlgebraicScalar, f64, u64)> = None;
    for q in 1..=q_max {
        let qb = BigInt::from(q);
        let mut vf: f64 = 0.0;
        for (i, yi) in y.iter().enumerate() {
            let den = yi.denom();
            res[i] += &steps[i];
            if res[i] >= *den {
                res[i] -= den;
            }
            if inv[i] == 0.0 {
                continue;
            }
            let near = (&res[i]).min(&(den - &res[i])).clone();
            let d = rat_to_f64(&Rat::new_raw(near, den.clone()));
            vf = vf.max(d.powf(inv[i]));
        }
        let vf = vf * q as f64;
        if let Some((_, bf, _)) = &best {
            if vf > bf * (1.0 + 1e-9) + 1e-300 {
                continue;
            }
        }
        let v = simultaneous_value(y, r, &qb);
        let better = match &best {
            None => true,
            Some((b, _, _)) => v < *b,
        };
        if better {
            let zero = v.is_zero();
            best = Some((v, vf, q));
            if zero {
                break;
            }
        }
    }
    let (margin, _, q) = best.expect("q_max >= 1");
    let qr = int(q as i64);
    let mut witness = vec![BigInt::from(q)];
    witness.extend(y.iter().map(|yi| exact::nearest_int(&(&qr * yi))));
    Ok(BadCertificate {
        subject: Subject { point: y.to_vec(), enclosure: None },
        weights: r.clone(),
        mode: Mode::Simultaneous,
        bound: q_max,
        margin,
        witness,
        witness_height: q,
    })
}

/// Least integer `H >= 1` with `|a_i| < H^{r_i}` for every positive weight.
pub fn dual_height(a: &[BigInt], r: &WeightVector) -> BigInt {
    a.iter()
        .zip(r.entries())
        .filter(|(_, w)| w.is_positive())
        .map(|(ai, w)| height_for(&ai.abs(), w))
        .max()
        .unwrap_or_else(BigInt::one)
}

/// `floor(x^{1/w}) + 1`.
fn height_for(x: &BigInt, w: &Rat) -> BigInt {
    if x.is_zero() {
        return BigInt::one();
    }
    let e = w.recip();
    let p = e.numer().to_usize().expect("small exponent");
    let q = e.denom().to_u32().expect("small exponent");
    iroot_floor(&num_traits::pow(x.clone(), p), q) + 1
}

/// Largest integer strictly below `h^{w}` (0 for `w = 0`).
pub fn dual_box_bound(h: u64, w: &Rat) -> i64 {
    if w.is_zero() {
        return 0;
    }
    AlgebraicScalar::power(int(h as i64), w.clone()).strict_floor().to_i64().expect("bound fits in i64")
}

/// Smallest `H(a) * |a_0 + a.y|` over nonzero `(a_0, a)` with `|a_i| < H_max^{r_i}`.
///
/// `H(a)` is the least admissible height for `a`, and `a_0` is the nearest
/// integer to `-a.y`. Coordinates with zero weight are forced to vanish. The
/// vector `a = 0` contributes `|a_0| >= 1`, so the margin never exceeds 1.
pub fn dual_margin(y: &[Rat], r: &WeightVector, h_max: u64) -> Result<BadCertificate, CertifyError> {
    check_dims(y, r)?;
    if h_max < 1 {
        return Err(CertifyError::EmptySearch);
    }
    let n = y.len();
    let den = y.iter().fold(BigInt::one(), |acc, yi| acc.lcm(yi.denom()));
    let nums: Vec<BigInt> = y.iter().map(|yi| yi.numer() * (&den / yi.denom())).collect();
    let bounds: Vec<i64> = r.entries().iter().map(|w| dual_box_bound(h_max, w)).collect();
    let heights: Vec<Vec<BigInt>> = bounds
        .iter()
        .zip(r.entries())
        .map(|(&b, w)| {
            (0..=b).map(|k| if w.is_zero() { BigInt::one() } else { height_for(&BigInt::from(k), w) }).collect()
        })
        .collect();

    // best = (H * dist numerator, H, a_0, a); a = 0 with a_0 = 1 has value 1.
    let mut best: Option<(BigInt, BigInt, BigInt, Vec<i64>)> = Some((den.clone(), BigInt::one(), BigInt::one(), vec![0; n]));
    let mut a: Vec<i64> = bounds.iter().map(|&b| -b).collect();
    'outer: loop {
        // Skip zero and take one representative from each pair {a, -a}.
        if let Some(first) = a.iter().find(|&&x| x != 0) {
            if *first > 0 {
                let s: BigInt = a.iter().zip(&nums).map(|(&ai, yi)| yi * ai).sum();
                let rem = s.mod_floor(&den);
                let (dist, a0) = if &rem * 2 <= den {
                    (rem.clone(), -((&s - &rem) / &den))
                } else {
                    (&den - &rem, -((&s - &rem) / &den) - 1)
                };
                let h = a
                    .iter()
                    .enumerate()
                    .map(|(i, &ai)| &heights[i][ai.unsigned_abs() as usize])
                    .max()
                    .expect("n >= 1")
                    .clone();
                let v = &h * &dist;
                let better = match &best {
                    None => true,
                    Some((bv, bh, _, _)) => v < *bv || (v == *bv && h < *bh),
                };
                if better {
                    let zero = v.is_zero();
                    best = Some((v, h, a0, a.clone()));
                    if zero {
                        break 'outer;
                    }
                }
            }
        }
        let mut i = n;
        loop {
            if i == 0 {
                break 'outer;
            }
            i -= 1;
            if a[i] < bounds[i] {
                a[i] += 1;
                break;
            }
            a[i] = -bounds[i];
        }
    }
    let (v, h, a0, a) = best.ok_or(CertifyError::EmptySearch)?;
    let mut witness = vec![a0];
    witness.extend(a.iter().map(|&x| BigInt::from(x)));
    Ok(BadCertificate {
        subject: Subject { point: y.to_vec(), enclosure: None },
        weights: r.clone(),
        mode: Mode::Dual,
        bound: h_max,
        margin: AlgebraicScalar::from_rat(Rat::new(v, den)),
        witness,
        witness_height: h.to_u64().expect("height fits"),
    })
}

/// A system of linear forms `L_i(u) = sum_j M_ij u_j`, its transposed system
/// `L'` with `sum_i L_i(u) L'_i(v) = u.v`, and bounds `T_i`.
#[derive(Clone, Debug)]
pub struct LinearSystemPair {
    pub forms: Vec<Vec<Rat>>,
    pub transposed: Vec<Vec<Rat>>,
    pub bounds: Vec<AlgebraicScalar>,
    pub det: Rat,
}

impl LinearSystemPair {
    pub fn new(forms: Vec<Vec<Rat>>, bounds: Vec<AlgebraicScalar>) -> Result<Self, CertifyError> {
        let k = forms.len();
        if k < 2 || forms.iter().any(|row| row.len() != k) || bounds.len() != k {
            return Err(CertifyError::PreconditionViolated("need a square system of at least two forms".into()));
        }
        if bounds.iter().any(|t| t.signum() <= 0) {
            return Err(CertifyError::PreconditionViolated("bounds must be positive".into()));
        }
        let det = exact::det(&forms);
        if det.is_zero() {
            return Err(CertifyError::Singular);
        }
        let inv = exact::inverse(&forms).ok_or(CertifyError::Singular)?;
        Ok(Self { transposed: exact::transpose(&inv), forms, bounds, det })
    }

    /// The forms `L_0 = u_0`, `L_i = u_0 y_i - u_i` and their transposes
    /// `L'_0 = v_0 + v.y`, `L'_i = -v_i`.
    pub fn simultaneous(y: &[Rat], bounds: Vec<AlgebraicScalar>) -> Result<Self, CertifyError> {
        let k = y.len() + 1;
        let mut forms = vec![vec![Rat::zero(); k]; k];
        forms[0][0] = Rat::one();
        for (i, yi) in y.iter().enumerate() {
            forms[i + 1][0] = yi.clone();
            forms[i + 1][i + 1] = int(-1);
        }
        Self::new(forms, bounds)
    }

    /// Exchange the roles of the two systems, keeping the given bounds for the new `L`.
    pub fn swapped(&self, bounds: Vec<AlgebraicScalar>) -> Result<Self, CertifyError> {
        Self::new(self.transposed.clone(), bounds)
    }

    /// `n = (number of forms) - 1`.
    pub fn n(&self) -> usize {
        self.forms.len() - 1
    }

    /// `lambda` with `lambda^n = T_0 ... T_n / |d|`.
    pub fn lambda(&self) -> AlgebraicScalar {
        let prod = self.bounds.iter().fold(AlgebraicScalar::one(), |acc, t| acc.mul(t));
        prod.mul_rat(&self.det.abs().recip()).pow(&Rat::new(BigInt::one(), BigInt::from(self.n()))).expect("positive")
    }

    /// Bounds `n lambda / T_0` and `lambda / T_i` for the transposed system.
    pub fn transposed_bounds(&self) -> Vec<AlgebraicScalar> {
        let lambda = self.lambda();
        self.bounds
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let b = lambda.div(t);
                if i == 0 {
                    b.mul_rat(&int(self.n() as i64))
                } else {
                    b
                }
            })
            .collect()
    }
}

pub fn apply_form(row: &[Rat], v: &[BigInt]) -> Rat {
    row.iter().zip(v).map(|(c, x)| c * big(x)).sum()
}

/// Does `|rows_i(v)| <= bounds_i` hold for every `i`?
pub fn within_bounds(rows: &[Vec<Rat>], bounds: &[AlgebraicScalar], v: &[BigInt]) -> bool {
    rows.iter().zip(bounds).all(|(row, b)| AlgebraicScalar::from_rat(apply_form(row, v).abs()) <= *b)
}

/// Find a nonzero integer `v` with `|L'_0(v)| <= n lambda / T_0` and
/// `|L'_i(v)| <= lambda / T_i`, given a nonzero `u` with `|L_i(u)| <= T_i`.
///
/// The search box comes from `v = M^T w` with `|w_i|` bounded; one coordinate
/// is solved for from the forms so only the remaining ones are enumerated.
pub fn mahler_transfer(sys: &LinearSystemPair, u: &[BigInt]) -> Result<Vec<BigInt>, CertifyError> {
    let k = sys.forms.len();
    if u.len() != k || u.iter().all(Zero::is_zero) {
        return Err(CertifyError::PreconditionViolated("u must be a nonzero vector of the right length".into()));
    }
    if !within_bounds(&sys.forms, &sys.bounds, u) {
        return Err(CertifyError::PreconditionViolated("u does not satisfy |L_i(u)| <= T_i".into()));
    }
    let targets = sys.transposed_bounds();
    search_box(&sys.transposed, &sys.forms, &targets).ok_or(CertifyError::SearchExhausted)
}

/// Nonzero integer `v` with `|rows_i(v)| <= targets_i`, where `inverse_t` is
/// the transpose of the inverse of `rows` (so `v_j = sum_i inverse_t[i][j] rows_i(v)`).
fn search_box(rows: &[Vec<Rat>], inverse_t: &[Vec<Rat>], targets: &[AlgebraicScalar]) -> Option<Vec<BigInt>> {
    let k = rows.len();
    let t_hi: Vec<f64> = targets.iter().map(|t| rat_to_f64(&t.upper_rat(40))).collect();
    let box_hi: Vec<i64> = (0..k)
        .map(|j| {
            let s: f64 = (0..k).map(|i| rat_to_f64(&inverse_t[i][j]).abs() * t_hi[i]).sum();
            (s * (1.0 + 1e-9) + 1e-9).floor() as i64
        })
        .collect();
    // Solve for the widest coordinate.
    let anchor = (0..k).max_by_key(|&j| (box_hi[j], std::cmp::Reverse(j))).expect("k >= 2");
    let rows_f: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(rat_to_f64).collect()).collect();
    let free: Vec<usize> = (0..k).filter(|&j| j != anchor).collect();
    let mut v = vec![0i64; k];
    for &j in &free {
        v[j] = -box_hi[j];
    }
    loop {
        let (mut lo, mut hi) = (-(box_hi[anchor] as f64), box_hi[anchor] as f64);
        for (i, row) in rows_f.iter().enumerate() {
            let c = row[anchor];
            if c == 0.0 {
                continue;
            }
            let rest: f64 = free.iter().map(|&j| row[j] * v[j] as f64).sum();
            let slack = 1e-7 * (1.0 + rest.abs() + t_hi[i]);
            let a = (-t_hi[i] - rest) / c;
            let b = (t_hi[i] - rest) / c;
            let (a, b) = if a < b { (a, b) } else { (b, a) };
            lo = lo.max(a - slack);
            hi = hi.min(b + slack);
        }
        if lo <= hi {
            let mut x = lo.ceil() as i64;
            while x as f64 <= hi.floor() {
                v[anchor] = x;
                if v.iter().any(|&c| c != 0) {
                    let vb: Vec<BigInt> = v.iter().map(|&c| BigInt::from(c)).collect();
                    if within_bounds(rows, targets, &vb) {
                        return Some(vb);
                    }
                }
                x += 1;
            }
        }
        let mut idx = free.len();
        loop {
            if idx == 0 {
                return None;
            }
            idx -= 1;
            let j = free[idx];
            if v[j] < box_hi[j] {
                v[j] += 1;
                break;
            }
            v[j] = -box_hi[j];
        }
    }
}

/// Outcome of a transference check in either direction.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TransferenceReport {
    /// Integer solution of the starting system.
    #[serde(with = "serde_bigint_vec")]
    pub start: Vec<BigInt>,
    /// Point produced by the transfer.
    #[serde(with = "serde_bigint_vec")]
    pub produced: Vec<BigInt>,
    /// Margin certified on the starting side.
    pub start_margin: AlgebraicScalar,
    /// Value attained by the produced point on the other side.
    pub produced_value: AlgebraicScalar,
    /// Upper bound that the value must respect.
    pub predicted: AlgebraicScalar,
    /// Search bound on the other side that covers the produced point.
    pub other_bound: u64,
    /// Everything verified exactly.
    pub holds: bool,
}

fn require_positive(r: &WeightVector) -> Result<(), CertifyError> {
    if r.zeros() > 0 {
        return Err(CertifyError::ZeroWeight);
    }
    Ok(())
}

/// Simultaneous to dual.
///
/// With `(q, p)` the simultaneous witness at bound `Q`, put `T_0 = Q` and
/// `T_i = delta Q^{-r_i}` where `delta = max_i ||q y_i|| Q^{r_i}`. Then
/// `lambda = delta` and the transferred `v` satisfies `|v_i| <= Q^{r_i}` and
/// `|v_0 + v.y| <= n delta / Q`, so its dual value is at most
/// `n delta H(v) / Q` with `H(v) <= Q + 1`.
pub fn transfer_simultaneous_to_dual(y: &[Rat], r: &WeightVector, q_max: u64) -> Result<TransferenceReport, CertifyError> {
    require_positive(r)?;
    let n = y.len();
    let cert = simultaneous_margin(y, r, q_max)?;
    let u = cert.witness.clone();
    let qb = int(q_max as i64);
    let mut delta = AlgebraicScalar::from_int(0);
    for (i, ri) in r.entries().iter().enumerate() {
        let d = apply_form(&[y[i].clone()], &u[..1]) - big(&u[i + 1]);
        let v = AlgebraicScalar::scaled_power(d.abs(), qb.clone(), ri.clone());
        if v > delta {
            delta = v;
        }
    }
    if delta.is_zero() {
        return Err(CertifyError::PreconditionViolated("rational point: simultaneous margin is zero".into()));
    }
    let mut bounds = vec![AlgebraicScalar::from_rat(qb.clone())];
    for ri in r.entries() {
        bounds.push(AlgebraicScalar::scaled_power(Rat::one(), qb.clone(), -ri.clone()).mul(&delta));
    }
    let sys = LinearSystemPair::simultaneous(y, bounds)?;
    let lambda_ok = sys.lambda() == delta;
    let v = mahler_transfer(&sys, &u)?;
    let targets = sys.transposed_bounds();
    let bounds_ok = within_bounds(&sys.transposed, &targets, &v);
    let a: Vec<BigInt> = v[1..].iter().map(|x| -x).collect();
    let h = dual_height(&a, r);
    let form = big(&v[0]) - a.iter().zip(y).map(|(ai, yi)| big(ai) * yi).sum::<Rat>();
    let produced_value = AlgebraicScalar::from_rat(big(&h) * form.abs());
    let predicted = delta.mul_rat(&(int(n as i64) * big(&h) / &qb));
    let h_u = h.to_u64().expect("height fits");
    let value_ok = produced_value <= predicted && h_u <= q_max + 1;
    let dual = dual_margin(y, r, q_max + 1)?;
    let dual_ok = dual.margin <= produced_value;
    Ok(TransferenceReport {
        start: u,
        produced: v,
        start_margin: cert.margin,
        produced_value,
        predicted,
        other_bound: q_max + 1,
        holds: lambda_ok && bounds_ok && value_ok && dual_ok,
    })
}

/// Dual to simultaneous.
///
/// From the dual witness `(a_0, a)` with value `d = H |a_0 + a.y| < 1` at height
/// `H`, the transposed system with `T_0 = d / H`, `T_i = H^{r_i}` has
/// `lambda = d^{1/n}`. The transferred `u` has `|u_0| <= n d^{1/n - 1} H` and
/// `|u_0 y_i - u_i| <= d^{1/n} H^{-r_i}`, hence a simultaneous value of at most
/// `n d^{1/n - 1 + 1/(n gamma)}`.
pub fn transfer_dual_to_simultaneous(y: &[Rat], r: &WeightVector, h_max: u64) -> Result<TransferenceReport, CertifyError> {
    require_positive(r)?;
    let n = y.len();
    let cert = dual_margin(y, r, h_max)?;
    let d = cert.margin.as_rat().expect("dual margins are rational").clone();
    if d.is_zero() || d >= Rat::one() {
        return Err(CertifyError::PreconditionViolated("dual margin must lie in (0, 1)".into()));
    }
    let h = int(cert.witness_height as i64);
    let v = cert.witness.clone();
    let mut bounds = vec![AlgebraicScalar::from_rat(&d / &h)];
    for ri in r.entries() {
        bounds.push(AlgebraicScalar::power(h.clone(), ri.clone()));
    }
    let forward = LinearSystemPair::simultaneous(y, vec![AlgebraicScalar::one(); n + 1])?;
    let sys = forward.swapped(bounds)?;
    let inv_n = Rat::new(BigInt::one(), BigInt::from(n));
    let lambda_ok = sys.lambda() == AlgebraicScalar::from_rat(d.clone()).pow(&inv_n).expect("positive");
    let u = mahler_transfer(&sys, &v)?;
    let targets = sys.transposed_bounds();
    let bounds_ok = within_bounds(&sys.transposed, &targets, &u);
    let q = u[0].abs();
    let nonzero_ok = !q.is_zero();
    let q_bound = targets[0].floor();
    let produced_value = if nonzero_ok { simultaneous_value(y, r, &q) } else { AlgebraicScalar::from_int(0) };
    let exponent = &inv_n - Rat::one() + &inv_n / r.gamma();
    let predicted = AlgebraicScalar::from_rat(d.clone()).pow(&exponent).expect("positive").mul_rat(&int(n as i64));
    let value_ok = produced_value <= predicted;
    let other_bound = q_bound.to_u64().expect("bound fits").max(1);
    let sim_ok = nonzero_ok && simultaneous_margin(y, r, other_bound)?.margin <= produced_value;
    Ok(TransferenceReport {
        start: v,
        produced: u,
        start_margin: cert.margin,
        produced_value,
        predicted,
        other_bound,
        holds: lambda_ok && bounds_ok && nonzero_ok && value_ok && sim_ok,
    })
}

/// Input to [`cf_expansion`].
#[derive(Clone, Debug)]
pub enum CfInput {
    Point(Rat),
    Interval(RatInterval),
}

fn cf_of(x: &Rat, k: usize) -> (Vec<BigInt>, bool) {
    let mut out = Vec::new();
    let mut x = x.clone();
    while out.len() < k {
        let a = x.floor();
        out.push(a.to_integer());
        let f = &x - &a;
        if f.is_zero() {
            return (out, true);
        }
        x = f.recip();
    }
    (out, false)
}

/// First `k` partial quotients. For an interval only the quotients shared by
/// every point of it are returned.
pub fn cf_expansion(x: &CfInput, k: usize) -> Result<Vec<BigInt>, CertifyError> {
    if k < 1 {
        return Err(CertifyError::BadLength);
    }
    match x {
        CfInput::Point(x) => Ok(cf_of(x, k).0),
        CfInput::Interval(iv) => {
            let (mut a, ta) = cf_of(&iv.lo, k);
            let (mut b, tb) = cf_of(&iv.hi, k);
            // The last quotient of a terminating expansion is shared with a
            // neighbouring cylinder, so it does not determine nearby points.
            if ta {
                a.pop();
            }
            if tb {
                b.pop();
            }
            let prefix: Vec<BigInt> = a.iter().zip(&b).take_while(|(x, y)| x == y).map(|(x, _)| x.clone()).collect();
            if prefix.is_empty() {
                Err(CertifyError::Undetermined)
            } else {
                Ok(prefix)
            }
        }
    }
}

impl std::fmt::Display for BadCertificate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let y: Vec<String> = self.subject.point.iter().map(fmt_rat).collect();
        write!(
            f,
            "{:?} margin {} (~{:.6}) at bound {} for y=({}) r={}",
            self.mode,
            self.margin,
            self.margin.to_f64(),
            self.bound,
            y.join(", "),
            self.weights
        )
    }
}

/// Compare two margins with a rational threshold.
pub fn margin_at_least(c: &BadCertificate, threshold: &AlgebraicScalar) -> bool {
    c.margin.cmp(threshold) != Ordering::Less
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::rat;
    use proptest::prelude::*;

    fn w(v: &[(i64, i64)]) -> WeightVector {
        WeightVector::new(v.iter().map(|&(a, b)| rat(a, b)).collect()).unwrap()
    }

    fn bi(v: &[i64]) -> Vec<BigInt> {
        v.iter().map(|&x| BigInt::from(x)).collect()
    }

    #[test]
    fn nearest_int_dist_examples() {
        assert_eq!(nearest_int_dist(&rat(7, 2)), rat(1, 2));
        assert_eq!(nearest_int_dist(&int(5)), int(0));
        assert_eq!(nearest_int_dist(&rat(13, 10)), rat(3, 10));
        assert_eq!(nearest_int_dist(&rat(-13, 10)), rat(3, 10));
    }

    #[test]
    fn simultaneous_examples() {
        let c = simultaneous_margin(&[rat(1, 2)], &w(&[(1, 1)]), 1).unwrap();
        assert_eq!(c.margin, AlgebraicScalar::from_rat(rat(1, 2)));
        assert_eq!(c.witness[0], BigInt::from(1));
        let c = simultaneous_margin(&[int(0), int(0)], &w(&[(1, 2), (1, 2)]), 7).unwrap();
        assert!(c.margin.is_zero());
        assert!(matches!(simultaneous_margin(&[rat(1, 2)], &w(&[(1, 1)]), 0), Err(CertifyError::EmptySearch)));
    }

    #[test]
    fn dual_examples() {
        // |a_1| < H forces H = 3 for the vector (-1, 2).
        let c = dual_margin(&[rat(1, 2)], &w(&[(1, 1)]), 2).unwrap();
        assert_eq!(c.margin, AlgebraicScalar::one());
        let c = dual_margin(&[rat(1, 2)], &w(&[(1, 1)]), 3).unwrap();
        assert!(c.margin.is_zero());
        assert_eq!(c.witness, bi(&[-1, 2]));
        let c = dual_margin(&[rat(1, 3), rat(2, 7)], &w(&[(1, 1), (0, 1)]), 50).unwrap();
        assert!(c.witness[2].is_zero());
        assert!(c.recheck());
    }

    #[test]
    fn mahler_identity_and_small_system() {
        let id: Vec<Vec<Rat>> = (0..3).map(|i| (0..3).map(|j| if i == j { int(1) } else { int(0) }).collect()).collect();
        let sys = LinearSystemPair::new(id, vec![AlgebraicScalar::one(); 3]).unwrap();
        let v = mahler_transfer(&sys, &bi(&[1, 0, 0])).unwrap();
        assert!(v.iter().any(|x| !x.is_zero()));
        assert!(v.iter().all(|x| x.abs() <= BigInt::from(2)));

        let bounds = vec![AlgebraicScalar::from_int(3), AlgebraicScalar::from_rat(rat(1, 3))];
        let sys = LinearSystemPair::simultaneous(&[rat(1, 3)], bounds).unwrap();
        assert_eq!(sys.lambda(), AlgebraicScalar::one());
        let v = mahler_transfer(&sys, &bi(&[3, 1])).unwrap();
        assert!(within_bounds(&sys.transposed, &sys.transposed_bounds(), &v));
        assert!(matches!(mahler_transfer(&sys, &bi(&[1, 1])), Err(CertifyError::PreconditionViolated(_))));
    }

    #[test]
    fn cf_examples() {
        assert_eq!(cf_expansion(&CfInput::Point(rat(22, 7)), 3).unwrap(), bi(&[3, 7]));
        assert_eq!(cf_expansion(&CfInput::Point(int(0)), 1).unwrap(), bi(&[0]));
        let iv = RatInterval::new(rat(16179, 10000), rat(16181, 10000)).unwrap();
        let p = cf_expansion(&CfInput::Interval(iv), 6).unwrap();
        assert!(p.len() >= 5 && p.iter().all(|x| x.is_one()));
        let iv = RatInterval::new(rat(9, 10), rat(11, 10)).unwrap();
        assert_eq!(cf_expansion(&CfInput::Interval(iv), 3), Err(CertifyError::Undetermined));
    }

    #[test]
    fn transference_small_cases() {
        let r = w(&[(1, 2), (1, 2)]);
        let y = [rat(37, 101), rat(58, 97)];
        let f = transfer_simultaneous_to_dual(&y, &r, 40).unwrap();
        assert!(f.holds, "{f:?}");
        let b = transfer_dual_to_simultaneous(&y, &r, 12).unwrap();
        assert!(b.holds, "{b:?}");
    }

    proptest! {
        #[test]
        fn margins_monotone(p in 1i64..200, q in 201i64..400, b in 1u64..30) {
            let y = [rat(p, q)];
            let r = w(&[(1, 1)]);
            let a = simultaneous_margin(&y, &r, b).unwrap();
            let c = simultaneous_margin(&y, &r, b + 7).unwrap();
            prop_assert!(c.margin <= a.margin);
            let a = dual_margin(&y, &r, b).unwrap();
            let c = dual_margin(&y, &r, b + 7).unwrap();
            prop_assert!(c.margin <= a.margin);
            prop_assert!(a.recheck() && c.recheck());
        }

        #[test]
        fn dual_respects_zero_weights(p in 0i64..50, q in 51i64..90, h in 1u64..40) {
            let y = [rat(p, q), rat(q - p, q + 3)];
            let r = w(&[(1, 1), (0, 1)]);
            let c = dual_margin(&y, &r, h).unwrap();
            prop_assert!(c.witness[2].is_zero());
        }
    }
}
