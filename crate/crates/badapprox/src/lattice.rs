//! Lattices of the form `diag(s) * M * Z^l` with rational `M`, the flow matrices
//! `g^t G(kappa; y)`, sup-norm minima, exact point counts in centred boxes, and
//! checkers for the classical counting inequalities.

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exact::{self, big, int, rat_to_f64, AlgebraicScalar, Rat, WeightVector};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LatticeError {
    #[error("kappa must lie in (0, 1)")]
    KappaOutOfRange,
    #[error("b must exceed 1")]
    BaseOutOfRange,
    #[error("enumeration box is not finite")]
    UnboundedSearch,
    #[error("enumeration needs {needed} candidates, budget is {budget}")]
    BudgetExceeded { needed: u128, budget: u64 },
    #[error("points span rank {rank} < {ell}")]
    RankDeficient { rank: usize, ell: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("box half-widths must be positive")]
    NonPositiveBox,
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
}

/// Where a basis came from. The flow variant lets `delta` decide `>= 1`
/// through the equivalent integer system.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Origin {
    Generic,
    Flow(Box<FlowOrigin>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlowOrigin {
    pub y: Vec<Rat>,
    pub r: WeightVector,
    pub b: AlgebraicScalar,
    pub kappa: AlgebraicScalar,
    pub t: u32,
}

/// Lattice `{ diag(row_scale) * matrix * z : z in Z^l }` in `R^{n+1}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LatticeBasis {
    row_scale: Vec<AlgebraicScalar>,
    matrix: Vec<Vec<Rat>>,
    pub origin: Origin,
}

/// Centred open box `|x_i| < theta_i`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CenteredBox {
    pub theta: Vec<AlgebraicScalar>,
}

impl CenteredBox {
    pub fn new(theta: Vec<AlgebraicScalar>) -> Result<Self, LatticeError> {
        if theta.is_empty() || theta.iter().any(|t| t.signum() <= 0) {
            return Err(LatticeError::NonPositiveBox);
        }
        Ok(Self { theta })
    }

    pub fn from_rats(theta: &[Rat]) -> Result<Self, LatticeError> {
        Self::new(theta.iter().cloned().map(AlgebraicScalar::from_rat).collect())
    }

    /// `Pi(b, u)`: half-widths `(b^u, 1, ..., 1)`.
    pub fn pi_bu(b: &AlgebraicScalar, u: &Rat, n: usize) -> Self {
        let mut theta = vec![b.pow(u).expect("b > 0")];
        theta.extend((0..n).map(|_| AlgebraicScalar::one()));
        Self { theta }
    }

    /// Largest product of `ell` half-widths.
    pub fn theta_ell(&self, ell: usize) -> AlgebraicScalar {
        let mut sorted = self.theta.clone();
        sorted.sort_by(|a, b| b.cmp(a));
        sorted.iter().take(ell).fold(AlgebraicScalar::one(), |acc, t| acc.mul(t))
    }

    pub fn volume(&self) -> AlgebraicScalar {
        self.theta.iter().fold(AlgebraicScalar::one(), |acc, t| acc.mul_rat(&int(2)).mul(t))
    }
}

impl LatticeBasis {
    pub fn new(row_scale: Vec<AlgebraicScalar>, matrix: Vec<Vec<Rat>>) -> Result<Self, LatticeError> {
        let rows = row_scale.len();
        if rows == 0 || matrix.len() != rows {
            return Err(LatticeError::DimensionMismatch("row scale and matrix disagree".into()));
        }
        let cols = matrix[0].len();
        if cols == 0 || cols > rows || matrix.iter().any(|r| r.len() != cols) {
            return Err(LatticeError::DimensionMismatch("ragged or oversized basis".into()));
        }
        if row_scale.iter().any(AlgebraicScalar::is_zero) {
            return Err(LatticeError::DimensionMismatch("zero row scale".into()));
        }
        if exact::rank(&exact::transpose(&matrix)) != cols {
            return Err(LatticeError::DimensionMismatch("basis columns are dependent".into()));
        }
        Ok(Self { row_scale, matrix, origin: Origin::Generic })
    }

    /// Lattice generated by the columns of a rational matrix.
    pub fn from_rational(matrix: Vec<Vec<Rat>>) -> Result<Self, LatticeError> {
        let rows = matrix.len();
        Self::new(vec![AlgebraicScalar::one(); rows], matrix)
    }

    pub fn integer_lattice(dim: usize) -> Self {
        let m = (0..dim).map(|i| (0..dim).map(|j| if i == j { int(1) } else { int(0) }).collect()).collect();
        Self::from_rational(m).expect("identity is a basis")
    }

    /// Ambient dimension `n + 1`.
    pub fn ambient(&self) -> usize {
        self.matrix.len()
    }

    /// Rank `l`.
    pub fn dim(&self) -> usize {
        self.matrix[0].len()
    }

    pub fn matrix(&self) -> &[Vec<Rat>] {
        &self.matrix
    }

    pub fn row_scale(&self) -> &[AlgebraicScalar] {
        &self.row_scale
    }

    pub fn entry(&self, i: usize, j: usize) -> AlgebraicScalar {
        self.row_scale[i].mul_rat(&self.matrix[i][j])
    }

    /// Left-multiply by a diagonal matrix.
    pub fn apply_diag(&self, d: &[AlgebraicScalar]) -> Self {
        assert_eq!(d.len(), self.ambient());
        Self {
            row_scale: self.row_scale.iter().zip(d).map(|(s, x)| s.mul(x)).collect(),
            matrix: self.matrix.clone(),
            origin: Origin::Generic,
        }
    }

    /// Determinant of a full-rank basis (absolute value).
    pub fn det(&self) -> Result<AlgebraicScalar, LatticeError> {
        if self.dim() != self.ambient() {
            return Err(LatticeError::DimensionMismatch("determinant needs a square basis".into()));
        }
        let d = exact::det(&self.matrix).abs();
        Ok(self.row_scale.iter().fold(AlgebraicScalar::from_rat(d), |acc, s| acc.mul(&s.abs())))
    }

    /// `B z`.
    pub fn point(&self, z: &[BigInt]) -> Vec<AlgebraicScalar> {
        self.matrix
            .iter()
            .zip(&self.row_scale)
            .map(|(row, s)| s.mul_rat(&row.iter().zip(z).map(|(c, x)| c * big(x)).sum::<Rat>()))
            .collect()
    }

    pub fn sup_norm(&self, z: &[BigInt]) -> AlgebraicScalar {
        self.point(z).into_iter().map(|x| x.abs()).max().unwrap_or_else(|| AlgebraicScalar::from_int(0))
    }

    /// Bounds on `|(M z)_i|` equivalent to `|x_i| < theta_i`.
    fn row_bounds(&self, theta: &[AlgebraicScalar]) -> Vec<AlgebraicScalar> {
        theta.iter().zip(&self.row_scale).map(|(t, s)| t.div(&s.abs())).collect()
    }

    /// Visit every `z` whose image lies in the box (`strict` selects `<` over `<=`).
    pub fn for_each_in_box(
        &self,
        theta: &[AlgebraicScalar],
        strict: bool,
        budget: u64,
        visit: impl FnMut(&[BigInt]),
    ) -> Result<(), LatticeError> {
        if theta.len() != self.ambient() {
            return Err(LatticeError::DimensionMismatch("box and lattice dimensions differ".into()));
        }
        enumerate_box(&self.matrix, &self.row_bounds(theta), strict, budget, visit)
    }
}

/// Default enumeration budget (candidate vectors).
pub const DEFAULT_BUDGET: u64 = 50_000_000;

/// Enumerate integer `z` with `|rows_i . z| < bounds_i` (or `<=`).
///
/// A subset of rows forming an invertible square matrix bounds `z`; the widest
/// coordinate is then solved from the row constraints so only the others are
/// enumerated. Floating point only narrows ranges (with slack); every visited
/// vector is checked exactly.
pub fn enumerate_box(
    rows: &[Vec<Rat>],
    bounds: &[AlgebraicScalar],
    strict: bool,
    budget: u64,
    mut visit: impl FnMut(&[BigInt]),
) -> Result<(), LatticeError> {
    let k = rows[0].len();
    // Choose k independent rows.
    let mut chosen: Vec<usize> = Vec::new();
    for i in 0..rows.len() {
        let mut trial: Vec<Vec<Rat>> = chosen.iter().map(|&c| rows[c].clone()).collect();
        trial.push(rows[i].clone());
        if exact::rank(&trial) == trial.len() {
            chosen.push(i);
            if chosen.len() == k {
                break;
            }
        }
    }
    if chosen.len() < k {
        return Err(LatticeError::UnboundedSearch);
    }
    let sub: Vec<Vec<Rat>> = chosen.iter().map(|&c| rows[c].clone()).collect();
    let inv = exact::inverse(&sub).ok_or(LatticeError::UnboundedSearch)?;
    let b_hi: Vec<f64> = bounds.iter().map(|b| rat_to_f64(&b.upper_rat(40))).collect();
    let zb: Vec<i64> = (0..k)
        .map(|j| {
            let s: f64 = chosen.iter().enumerate().map(|(ci, &c)| rat_to_f64(&inv[j][ci]).abs() * b_hi[c]).sum();
            (s * (1.0 + 1e-9) + 1e-9).floor() as i64
        })
        .collect();
    let anchor = (0..k).max_by_key(|&j| (zb[j], std::cmp::Reverse(j))).expect("k >= 1");
    let free: Vec<usize> = (0..k).filter(|&j| j != anchor).collect();
    let needed: u128 = free.iter().map(|&j| 2 * zb[j] as u128 + 1).product();
    if needed > budget as u128 {
        return Err(LatticeError::BudgetExceeded { needed, budget });
    }
    let rows_f: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(rat_to_f64).collect()).collect();
    let exact_ok = |z: &[BigInt]| {
        rows.iter().zip(bounds).all(|(row, b)| {
            let v = AlgebraicScalar::from_rat(row.iter().zip(z).map(|(c, x)| c * big(x)).sum::<Rat>().abs());
            if strict {
                v < *b
            } else {
                v <= *b
            }
        })
    };
    let mut z = vec![0i64; k];
    for &j in &free {
        z[j] = -zb[j];
    }
    loop {
        let (mut lo, mut hi) = (-(zb[anchor] as f64), zb[anchor] as f64);
        for (i, row) in rows_f.iter().enumerate() {
            let c = row[anchor];
            let rest: f64 = free.iter().map(|&j| row[j] * z[j] as f64).sum();
            if c == 0.0 {
                if rest.abs() > b_hi[i] * (1.0 + 1e-9) + 1e-9 {
                    lo = 1.0;
                    hi = 0.0;
                }
                continue;
            }
            let slack = 1e-7 * (1.0 + rest.abs() + b_hi[i]);
            let a = (-b_hi[i] - rest) / c;
            let b = (b_hi[i] - rest) / c;
            let (a, b) = if a < b { (a, b) } else { (b, a) };
            lo = lo.max(a - slack);
            hi = hi.min(b + slack);
        }
        if lo <= hi {
            let mut x = lo.ceil() as i64;
            let end = hi.floor() as i64;
            while x <= end {
                z[anchor] = x;
                let zb_big: Vec<BigInt> = z.iter().map(|&c| BigInt::from(c)).collect();
                if exact_ok(&zb_big) {
                    visit(&zb_big);
                }
                x += 1;
            }
        }
        let mut idx = free.len();
        loop {
            if idx == 0 {
                return Ok(());
            }
            idx -= 1;
            let j = free[idx];
            if z[j] < zb[j] {
                z[j] += 1;
                break;
            }
            z[j] = -zb[j];
        }
    }
}

/// `G(kappa; y)`: first row `kappa^{-1} (1, y)`, then `(0, I_n)`.
pub fn build_g(kappa: &AlgebraicScalar, y: &[Rat]) -> Result<LatticeBasis, LatticeError> {
    if kappa.signum() <= 0 || kappa.cmp_rat(&Rat::one()) != std::cmp::Ordering::Less {
        return Err(LatticeError::KappaOutOfRange);
    }
    let n = y.len();
    let mut m = vec![vec![Rat::zero(); n + 1]; n + 1];
    m[0][0] = Rat::one();
    for (j, yj) in y.iter().enumerate() {
        m[0][j + 1] = yj.clone();
        m[j + 1][j + 1] = Rat::one();
    }
    let mut scale = vec![kappa.recip()];
    scale.extend((0..n).map(|_| AlgebraicScalar::one()));
    LatticeBasis::new(scale, m)
}

/// Diagonal entries `(b^t, b^{-r_1 t}, ..., b^{-r_n t})`.
pub fn gt_diagonal(r: &WeightVector, b: &AlgebraicScalar, t: i64) -> Vec<AlgebraicScalar> {
    let tr = int(t);
    let mut d = vec![b.pow(&tr).expect("b > 0")];
    d.extend(r.entries().iter().map(|ri| b.pow(&(-ri * &tr)).expect("b > 0")));
    d
}

/// `g^t_{r,b}` as a lattice basis.
pub fn build_gt(r: &WeightVector, b: &AlgebraicScalar, t: u32) -> Result<LatticeBasis, LatticeError> {
    if b.cmp_rat(&Rat::one()) != std::cmp::Ordering::Greater {
        return Err(LatticeError::BaseOutOfRange);
    }
    Ok(LatticeBasis::integer_lattice(r.n() + 1).apply_diag(&gt_diagonal(r, b, t as i64)))
}

/// `g^t G(kappa; y) Z^{n+1}`, tagged so `delta` can use the integer system.
pub fn build_flow(
    y: &[Rat],
    r: &WeightVector,
    b: &AlgebraicScalar,
    kappa: &AlgebraicScalar,
    t: u32,
) -> Result<LatticeBasis, LatticeError> {
    if y.len() != r.n() {
        return Err(LatticeError::DimensionMismatch("point and weights".into()));
    }
    if b.cmp_rat(&Rat::one()) != std::cmp::Ordering::Greater {
        return Err(LatticeError::BaseOutOfRange);
    }
    let mut l = build_g(kappa, y)?.apply_diag(&gt_diagonal(r, b, t as i64));
    l.origin = Origin::Flow(Box::new(FlowOrigin { y: y.to_vec(), r: r.clone(), b: b.clone(), kappa: kappa.clone(), t }));
    Ok(l)
}

/// Outcome of [`delta`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DeltaResult {
    /// Exact shortest nonzero sup norm and a vector attaining it.
    Value { delta: AlgebraicScalar, witness: Vec<BigInt> },
    /// Decision of `delta >= 1`, with a witness `z` of norm `< 1` when it fails.
    AtLeastOne { holds: bool, witness: Option<Vec<BigInt>> },
}

/// Nonzero integer solution `(a_0, a)` of `|a_0 + a.y| < kappa b^{-t}`,
/// `|a_i| < b^{r_i t}`, if any. `a_0` is tried only at the two integers nearest `-a.y`.
pub fn flow_violation(
    y: &[Rat],
    r: &WeightVector,
    b: &AlgebraicScalar,
    kappa: &AlgebraicScalar,
    t: u32,
    budget: u64,
) -> Result<Option<Vec<BigInt>>, LatticeError> {
    let n = y.len();
    let eps = kappa.mul(&b.pow(&int(-(t as i64))).expect("b > 0"));
    let bounds: Vec<i64> = r
        .entries()
        .iter()
        .map(|ri| {
            if ri.is_zero() {
                0
            } else {
                b.pow(&(ri * int(t as i64))).expect("b > 0").strict_floor().to_i64().expect("fits")
            }
        })
        .collect();
    let needed: u128 = bounds.iter().map(|&x| 2 * x as u128 + 1).product();
    if needed > budget as u128 {
        return Err(LatticeError::BudgetExceeded { needed, budget });
    }
    if eps.cmp_rat(&Rat::one()) == std::cmp::Ordering::Greater {
        // a = 0, a_0 = 1 already violates.
        let mut w = vec![BigInt::one()];
        w.extend((0..n).map(|_| BigInt::zero()));
        return Ok(Some(w));
    }
    let mut a = bounds.iter().map(|&x| -x).collect::<Vec<i64>>();
    loop {
        if a.iter().any(|&x| x != 0) {
            let s: Rat = a.iter().zip(y).map(|(&ai, yi)| yi * int(ai)).sum();
            let f = (-&s).floor().to_integer();
            for a0 in [f.clone(), f + 1] {
                let v = (big(&a0) + &s).abs();
                if AlgebraicScalar::from_rat(v) < eps {
                    let mut w = vec![a0];
                    w.extend(a.iter().map(|&x| BigInt::from(x)));
                    return Ok(Some(w));
                }
            }
        }
        let mut i = n;
        loop {
            if i == 0 {
                return Ok(None);
            }
            i -= 1;
            if a[i] < bounds[i] {
                a[i] += 1;
                break;
            }
            a[i] = -bounds[i];
        }
    }
}

/// Shortest nonzero sup norm, or (with `certify_ge_one`) whether it is at least 1.
pub fn delta(l: &LatticeBasis, certify_ge_one: bool, budget: u64) -> Result<DeltaResult, LatticeError> {
    if certify_ge_one {
        if let Origin::Flow(fl) = &l.origin {
            let FlowOrigin { y, r, b, kappa, t } = fl.as_ref();
            let w = flow_violation(y, r, b, kappa, *t, budget)?;
            return Ok(DeltaResult::AtLeastOne { holds: w.is_none(), witness: w });
        }
        let theta = vec![AlgebraicScalar::one(); l.ambient()];
        let mut found = None;
        l.for_each_in_box(&theta, true, budget, |z| {
            if found.is_none() && z.iter().any(|x| !x.is_zero()) {
                found = Some(z.to_vec());
            }
        })?;
        return Ok(DeltaResult::AtLeastOne { holds: found.is_none(), witness: found });
    }
    // Start from the shortest basis column, then shrink.
    let k = l.dim();
    let mut best_z: Vec<BigInt> = Vec::new();
    let mut best: Option<AlgebraicScalar> = None;
    for j in 0..k {
        let z: Vec<BigInt> = (0..k).map(|i| if i == j { BigInt::one() } else { BigInt::zero() }).collect();
        let v = l.sup_norm(&z);
        if best.as_ref().is_none_or(|b| v < *b) {
            best = Some(v);
            best_z = z;
        }
    }
    let mut best = best.expect("k >= 1");
    loop {
        let half = best.mul_rat(&Rat::new(BigInt::one(), BigInt::from(2)));
        let theta = vec![half; l.ambient()];
        let mut found: Option<(AlgebraicScalar, Vec<BigInt>)> = None;
        l.for_each_in_box(&theta, false, budget, |z| {
            if found.is_none() && z.iter().any(|x| !x.is_zero()) {
                found = Some((l.sup_norm(z), z.to_vec()));
            }
        })?;
        match found {
            Some((v, z)) => {
                best = v;
                best_z = z;
            }
            None => break,
        }
    }
    let theta = vec![best.clone(); l.ambient()];
    let mut cands: Vec<(AlgebraicScalar, Vec<BigInt>)> = Vec::new();
    l.for_each_in_box(&theta, false, budget, |z| {
        if z.iter().any(|x| !x.is_zero()) {
            cands.push((l.sup_norm(z), z.to_vec()));
        }
    })?;
    for (v, z) in cands {
        if v < best {
            best = v;
            best_z = z;
        }
    }
    Ok(DeltaResult::Value { delta: best, witness: best_z })
}

/// Points of the lattice in a centred open box.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoxCount {
    pub count: u64,
    pub rank: usize,
    pub points: Vec<Vec<BigInt>>,
}

/// Exact `#(L ∩ box)` and the rank of the points found.
pub fn count_in_box(l: &LatticeBasis, b: &CenteredBox, budget: u64) -> Result<BoxCount, LatticeError> {
    let mut points = Vec::new();
    l.for_each_in_box(&b.theta, true, budget, |z| points.push(z.to_vec()))?;
    let rank = exact::integer_rank(&points);
    Ok(BoxCount { count: points.len() as u64, rank, points })
}

/// `2^l (n+1)^{l/2} Theta_l`.
pub fn slice_volume_bound(theta: &CenteredBox, ell: usize, n: usize) -> AlgebraicScalar {
    AlgebraicScalar::scaled_power(int(1 << ell), int(n as i64 + 1), Rat::new(BigInt::from(ell), BigInt::from(2)))
        .mul(&theta.theta_ell(ell))
}

/// `4^{n+1} (n+1)^{(n+1)/2} (n+1)!`.
pub fn c_n(n: usize) -> AlgebraicScalar {
    let m = n as i64 + 1;
    let fact: i64 = (1..=m).product();
    AlgebraicScalar::scaled_power(int(4i64.pow(m as u32) * fact), int(m), Rat::new(BigInt::from(m), BigInt::from(2)))
}

/// `2 c(n) b^tau b^{lambda u}`.
pub fn generator_count_bound(n: usize, b: &AlgebraicScalar, r: &WeightVector, u: &Rat) -> AlgebraicScalar {
    let e = r.tau() + r.lambda() * u;
    c_n(n).mul_rat(&int(2)).mul(&b.pow(&e).expect("b > 0"))
}

/// Two sides of a counting inequality.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub lhs: AlgebraicScalar,
    pub rhs: AlgebraicScalar,
    pub holds: bool,
}

impl InequalityReport {
    pub fn le(lhs: AlgebraicScalar, rhs: AlgebraicScalar) -> Self {
        let holds = lhs <= rhs;
        Self { lhs, rhs, holds }
    }
}

/// `#(K ∩ L) <= l! vol(K) / det L + l` for a full-rank lattice and a centred box.
pub fn blichfeldt_check(l: &LatticeBasis, b: &CenteredBox, budget: u64) -> Result<InequalityReport, LatticeError> {
    let ell = l.dim();
    let det = l.det()?;
    let c = count_in_box(l, b, budget)?;
    if c.rank < ell {
        return Err(LatticeError::RankDeficient { rank: c.rank, ell });
    }
    let fact: i64 = (1..=ell as i64).product();
    let rhs = b.volume().mul_rat(&int(fact)).div(&det);
    // Add l to a scalar with irrational part: compare count - l against l! vol / det.
    let lhs = AlgebraicScalar::from_int(c.count as i64 - ell as i64);
    let holds = lhs <= rhs;
    Ok(InequalityReport { lhs: AlgebraicScalar::from_int(c.count as i64), rhs: rhs_plus(&rhs, ell), holds })
}

/// Display helper: rational upper bracket of `x + k` when `x` is irrational.
fn rhs_plus(x: &AlgebraicScalar, k: usize) -> AlgebraicScalar {
    match x.as_rat() {
        Some(r) => AlgebraicScalar::from_rat(r + int(k as i64)),
        None => AlgebraicScalar::from_rat(x.upper_rat(60) + int(k as i64)),
    }
}

/// Lattice points of `{x in Z^l : |A x|_i < theta_i}` span rank `<= l - 1`
/// whenever the body has volume `< 1/l!`. Returns the rank found.
pub fn rank_bound_check(a: &[Vec<Rat>], theta: &CenteredBox, budget: u64) -> Result<(bool, usize), LatticeError> {
    let l = LatticeBasis::from_rational(a.to_vec())?;
    let ell = l.dim();
    if l.ambient() != ell {
        return Err(LatticeError::DimensionMismatch("body map must be square".into()));
    }
    let vol = theta.volume().div(&AlgebraicScalar::from_rat(exact::det(a).abs()));
    let fact: i64 = (1..=ell as i64).product();
    if vol.cmp_rat(&Rat::new(BigInt::one(), BigInt::from(fact))) != std::cmp::Ordering::Less {
        return Err(LatticeError::PreconditionViolated("body volume is not below 1/l!".into()));
    }
    let c = count_in_box(&l, theta, budget)?;
    Ok((c.rank < ell, c.rank))
}

/// `det L >= (delta(L)/2)^l` for a full-rank lattice.
pub fn det_delta_check(l: &LatticeBasis, budget: u64) -> Result<InequalityReport, LatticeError> {
    let d = match delta(l, false, budget)? {
        DeltaResult::Value { delta, .. } => delta,
        DeltaResult::AtLeastOne { .. } => unreachable!("direct mode"),
    };
    let lhs = d.mul_rat(&Rat::new(BigInt::one(), BigInt::from(2))).pow(&int(l.dim() as i64)).expect("positive");
    Ok(InequalityReport::le(lhs, l.det()?))
}

/// Minkowski: a centred box of volume `> 2^l det L` holds a nonzero lattice point.
/// Returns `None` when the volume hypothesis fails, otherwise whether a point was found.
pub fn minkowski_check(l: &LatticeBasis, b: &CenteredBox, budget: u64) -> Result<Option<bool>, LatticeError> {
    let ell = l.dim();
    let need = l.det()?.mul_rat(&int(1 << ell));
    if b.volume() <= need {
        return Ok(None);
    }
    let c = count_in_box(l, b, budget)?;
    Ok(Some(c.count > 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::rat;
    use proptest::prelude::*;

    fn s(x: Rat) -> AlgebraicScalar {
        AlgebraicScalar::from_rat(x)
    }

    #[test]
    fn build_g_examples() {
        let g = build_g(&s(rat(1, 2)), &[rat(1, 3)]).unwrap();
        assert_eq!(g.entry(0, 0), s(int(2)));
        assert_eq!(g.entry(0, 1), s(rat(2, 3)));
        assert_eq!(g.entry(1, 0), s(int(0)));
        assert_eq!(g.entry(1, 1), s(int(1)));
        let g = build_g(&s(rat(1, 4)), &[int(0), int(0)]).unwrap();
        assert_eq!(g.det().unwrap(), s(int(4)));
        assert_eq!(build_g(&s(int(1)), &[int(0)]), Err(LatticeError::KappaOutOfRange));
    }

    #[test]
    fn build_gt_examples() {
        let half = WeightVector::parse("1/2,1/2").unwrap();
        let g = build_gt(&half, &s(int(4)), 1).unwrap();
        assert_eq!(g.entry(0, 0), s(int(4)));
        assert_eq!(g.entry(1, 1), s(rat(1, 2)));
        assert_eq!(g.entry(2, 2), s(rat(1, 2)));
        assert_eq!(g.det().unwrap(), s(int(1)));
        let g = build_gt(&half, &s(int(4)), 0).unwrap();
        assert_eq!(g.entry(0, 0), s(int(1)));
        let g = build_gt(&WeightVector::parse("1,0").unwrap(), &s(int(2)), 3).unwrap();
        assert_eq!(g.entry(0, 0), s(int(8)));
        assert_eq!(g.entry(1, 1), s(rat(1, 8)));
        assert_eq!(g.entry(2, 2), s(int(1)));
    }

    #[test]
    fn delta_examples() {
        let z2 = LatticeBasis::integer_lattice(2);
        match delta(&z2, false, DEFAULT_BUDGET).unwrap() {
            DeltaResult::Value { delta, .. } => assert_eq!(delta, s(int(1))),
            _ => unreachable!(),
        }
        let two = LatticeBasis::from_rational(vec![vec![int(2), int(0)], vec![int(0), int(2)]]).unwrap();
        match delta(&two, false, DEFAULT_BUDGET).unwrap() {
            DeltaResult::Value { delta, .. } => assert_eq!(delta, s(int(2))),
            _ => unreachable!(),
        }
        let r = WeightVector::parse("1").unwrap();
        let l = build_flow(&[rat(1, 3)], &r, &s(int(2)), &s(rat(1, 2)), 1).unwrap();
        let direct = match delta(&l, false, DEFAULT_BUDGET).unwrap() {
            DeltaResult::Value { delta, .. } => delta,
            _ => unreachable!(),
        };
        let DeltaResult::AtLeastOne { holds, .. } = delta(&l, true, DEFAULT_BUDGET).unwrap() else { unreachable!() };
        assert_eq!(holds, direct >= s(int(1)));
    }

    #[test]
    fn count_examples() {
        let z2 = LatticeBasis::integer_lattice(2);
        let c = count_in_box(&z2, &CenteredBox::from_rats(&[rat(3, 2), rat(3, 2)]).unwrap(), DEFAULT_BUDGET).unwrap();
        assert_eq!((c.count, c.rank), (9, 2));
        let c = count_in_box(&z2, &CenteredBox::from_rats(&[rat(1, 2), rat(1, 2)]).unwrap(), DEFAULT_BUDGET).unwrap();
        assert_eq!((c.count, c.rank), (1, 0));
    }

    #[test]
    fn volume_and_count_bounds() {
        let b = CenteredBox::from_rats(&[int(2), int(3), int(5)]).unwrap();
        assert_eq!(slice_volume_bound(&b, 2, 2), s(int(180)));
        let b = CenteredBox::from_rats(&[int(7), int(1), int(1)]).unwrap();
        assert_eq!(slice_volume_bound(&b, 1, 2), AlgebraicScalar::scaled_power(int(14), int(3), rat(1, 2)));
        assert_eq!(c_n(1), s(int(64)));
        let r = WeightVector::parse("1").unwrap();
        // n = 1: bound 128 b^{tau + lambda u}; tau = 1, lambda = 1/2.
        assert_eq!(generator_count_bound(1, &s(int(2)), &r, &int(2)), s(int(128 * 4)));
    }

    #[test]
    fn blichfeldt_examples() {
        let z2 = LatticeBasis::integer_lattice(2);
        let rep = blichfeldt_check(&z2, &CenteredBox::from_rats(&[rat(6, 5), rat(6, 5)]).unwrap(), DEFAULT_BUDGET).unwrap();
        assert_eq!(rep.lhs, s(int(9)));
        assert_eq!(rep.rhs, s(rat(338, 25)));
        assert!(rep.holds);
        let z1 = LatticeBasis::integer_lattice(1);
        let rep = blichfeldt_check(&z1, &CenteredBox::from_rats(&[rat(5, 2)]).unwrap(), DEFAULT_BUDGET).unwrap();
        assert_eq!((rep.lhs, rep.rhs), (s(int(5)), s(int(6))));
        let err = blichfeldt_check(&z2, &CenteredBox::from_rats(&[rat(1, 2), rat(1, 2)]).unwrap(), DEFAULT_BUDGET);
        assert!(matches!(err, Err(LatticeError::RankDeficient { rank: 0, ell: 2 })));
    }

    #[test]
    fn rank_bound_examples() {
        let id = vec![vec![int(1), int(0)], vec![int(0), int(1)]];
        let (ok, rank) = rank_bound_check(&id, &CenteredBox::from_rats(&[rat(1, 10), rat(1, 10)]).unwrap(), DEFAULT_BUDGET).unwrap();
        assert!(ok && rank == 0);
        // Slab along e_1: |x_0| < 3, |x_1| < 1/25, volume 6 * 2/25 = 12/25 < 1/2.
        let (ok, rank) = rank_bound_check(&id, &CenteredBox::from_rats(&[int(3), rat(1, 25)]).unwrap(), DEFAULT_BUDGET).unwrap();
        assert!(ok && rank == 1);
    }

    proptest! {
        #[test]
        fn gt_is_unimodular(a in 1i64..6, t in 0u32..5, bn in 2i64..9) {
            let r = WeightVector::new(vec![rat(a, 6), rat(6 - a, 6)]).unwrap();
            let g = build_gt(&r, &AlgebraicScalar::power(int(bn), rat(2, 3)), t).unwrap();
            prop_assert_eq!(g.det().unwrap(), AlgebraicScalar::one());
        }

        #[test]
        fn g_determinant(p in 1i64..50, q in 51i64..100, y1 in -9i64..9, y2 in 1i64..9) {
            let k = rat(p, q);
            let g = build_g(&s(k.clone()), &[rat(y1, y2), rat(y2, 7)]).unwrap();
            prop_assert_eq!(g.det().unwrap(), s(k.recip()));
        }

        #[test]
        fn counts_are_odd(m in proptest::collection::vec(-4i64..5, 4), t0 in 1i64..20, t1 in 1i64..20) {
            let mat = vec![vec![int(m[0]), int(m[1])], vec![int(m[2]), int(m[3])]];
            prop_assume!(exact::det(&mat) != Rat::zero());
            let l = LatticeBasis::from_rational(mat).unwrap();
            let c = count_in_box(&l, &CenteredBox::from_rats(&[rat(t0, 3), rat(t1, 3)]).unwrap(), DEFAULT_BUDGET).unwrap();
            prop_assert_eq!(c.count % 2, 1);
        }

        #[test]
        fn delta_modes_agree(p in 0i64..40, q in 41i64..80, t in 0u32..6, m in 1i64..4) {
            let r = WeightVector::parse("1").unwrap();
            let b = s(int(2));
            let kappa = s(rat(1, 1 << m));
            let l = build_flow(&[rat(p, q)], &r, &b, &kappa, t).unwrap();
            let DeltaResult::Value { delta: d, .. } = delta(&l, false, DEFAULT_BUDGET).unwrap() else { unreachable!() };
            let DeltaResult::AtLeastOne { holds, .. } = delta(&l, true, DEFAULT_BUDGET).unwrap() else { unreachable!() };
            prop_assert_eq!(holds, d >= AlgebraicScalar::one());
        }
    }
}
