use std::path::{Path, PathBuf};
use std::time::Instant;

use badapprox::algebraic::{
    badr_to_bk, bn_margin, AlgebraicWitness, bstar_margin, fiber_map, inclusion_check, minkowski_holds, minkowski_polynomial,
    wstar_witnesses, BkClaim, MultiPoly, PolyMap,
};
use badapprox::cantor::{
    build_r_sequence, compute_dq, dimension_lower_bound, extract_point, intersect_sequences, CantorError,
    ConstructionParams, DimensionBound, ExtractMode, Halt, RSequence,
};
use badapprox::certify::{dual_margin, simultaneous_margin, BadCertificate};
use badapprox::exact::{fmt_rat, int, rat_to_f64, AlgebraicScalar, Rat, RatInterval, WeightVector};
use badapprox::lattice::{blichfeldt_check, count_in_box, det_delta_check, minkowski_check, CenteredBox, LatticeBasis};
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{
    parse_curve, parse_interval, parse_rational, parse_rationals, parse_weights, veronese_dimension, AlgebraicOp,
    RunConfig, DEFAULT_BUDGET, DEFAULT_CURVE, DEFAULT_I0,
};
use crate::persist::{self, Staging};
use crate::report::{Inequality, RunReport, Table, SCHEMA_VERSION};
use crate::CliError;

/// Run `f` inside a rayon pool of the configured size.
pub fn with_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

fn inputs(cfg: &RunConfig) -> serde_json::Value {
    serde_json::to_value(cfg).expect("config serializes")
}

fn margin_string(m: &AlgebraicScalar) -> String {
    format!("{m} (~{:.6})", m.to_f64())
}

pub fn cmd_certify(cfg: &RunConfig) -> Result<RunReport, CliError> {
    let start = Instant::now();
    let c = &cfg.certify;
    let y = parse_rationals(c.y.as_deref().ok_or_else(|| CliError::Usage("certify needs --y".into()))?)?;
    let w = parse_weights(c.weights.as_deref().ok_or_else(|| CliError::Usage("certify needs --weights".into()))?)?;
    let dual = c.dual.unwrap_or(false);
    let cert = with_pool(cfg.threads(), || {
        if dual {
            dual_margin(&y, &w, c.h_max.unwrap_or(100))
        } else {
            simultaneous_margin(&y, &w, c.q_max.unwrap_or(1000))
        }
    })??;
    let mut rep = RunReport::new("certify", inputs(cfg));
    rep.field("mode", if dual { "dual" } else { "simultaneous" });
    rep.field("point", y.iter().map(ToString::to_string).collect::<Vec<_>>().join(", "));
    rep.field("weights", &w);
    rep.field(if dual { "H_max" } else { "Q_max" }, cert.bound);
    rep.field("margin", margin_string(&cert.margin));
    rep.field("witness", cert.witness.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", "));
    if dual {
        rep.field("witness height", cert.witness_height);
    }
    rep.field("recheck", if cert.recheck() { "ok" } else { "FAILED" });
    rep.payload = serde_json::to_value(&cert).expect("certificate serializes");
    rep.elapsed_ms = start.elapsed().as_millis() as u64;
    Ok(rep)
}

/// Resolved construction inputs.
#[derive(Clone, Debug)]
pub struct ConstructSetup {
    pub params: Vec<ConstructionParams>,
    pub curve_spec: String,
    pub extract: ExtractMode,
    pub name: String,
}

fn default_weights(n: usize) -> String {
    vec![format!("1/{n}"); n].join(",")
}

fn run_name(r: u64, m: u32, q_max: u32, weights: &[String]) -> String {
    let w: Vec<String> = weights
        .iter()
        .map(|w| {
            w.chars()
                .filter_map(|c| match c {
                    '/' => Some('_'),
                    ',' => Some('.'),
                    c if c.is_ascii_alphanumeric() || c == '-' => Some(c),
                    _ => None,
                })
                .collect()
        })
        .collect();
    format!("R{r}-m{m}-q{q_max}-w{}", w.join("+"))
}

pub fn construct_setup(cfg: &RunConfig) -> Result<ConstructSetup, CliError> {
    let c = &cfg.construct;
    let curve_spec = c.curve.clone().unwrap_or_else(|| DEFAULT_CURVE.into());
    let i0 = parse_interval(c.i0.as_deref().unwrap_or(DEFAULT_I0))?;
    let curve = parse_curve(&curve_spec, &i0)?;
    let weights = c.weights.clone().unwrap_or_else(|| vec![default_weights(curve.n())]);
    if weights.is_empty() {
        return Err(CliError::Usage("construct needs at least one weight vector".into()));
    }
    let big_r = c.big_r.unwrap_or(8);
    let m = c.m.unwrap_or(2);
    let q_max = c.q_max.unwrap_or(m + 4);
    let params = weights
        .iter()
        .map(|w| {
            let p = ConstructionParams {
                big_r,
                m,
                q_max,
                weights: parse_weights(w)?,
                curve: curve.clone(),
                i0: i0.clone(),
                budget: c.budget.unwrap_or(DEFAULT_BUDGET),
                threads: cfg.threads(),
            };
            p.validate()?;
            Ok(p)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let name = c.name.clone().unwrap_or_else(|| run_name(big_r, m, q_max, &weights));
    Ok(ConstructSetup { params, curve_spec, extract: c.extract.unwrap_or(ExtractMode::Midmost), name })
}

fn halt_error(h: &Halt, r: u64, m: u32) -> CliError {
    match h {
        Halt::LevelEmpty { q, t } => CliError::LevelEmpty {
            q: *q,
            t: *t,
            advice: format!("no cell survives at R = {r}, m = {m}; try a larger R or m, or a shorter I0"),
        },
        Halt::BudgetExceeded { t, needed, budget } => CliError::Cantor(CantorError::BudgetExceeded {
            t: *t,
            needed: needed.parse().unwrap_or(u128::MAX),
            budget: *budget,
        }),
    }
}

/// Build every component and intersect when there are several.
pub fn build_sequence(params: &[ConstructionParams]) -> Result<RSequence, CliError> {
    let mut seqs = Vec::new();
    for p in params {
        let s = build_r_sequence(p)?;
        if let Some(h) = &s.halt {
            return Err(halt_error(h, p.big_r, p.m));
        }
        seqs.push(s);
    }
    if seqs.len() == 1 {
        return Ok(seqs.pop().expect("one"));
    }
    let s = intersect_sequences(&seqs)?;
    if let Some(h) = &s.halt {
        return Err(halt_error(h, params[0].big_r, params[0].m));
    }
    Ok(s)
}

/// `floor(b^t_max)`, the dual height bound matching the deepest level.
pub fn certificate_height(p: &ConstructionParams) -> u64 {
    p.b().pow(&int(p.t_max() as i64)).expect("b > 0").floor().to_u64().unwrap_or(u64::MAX).max(1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightCertificate {
    pub weights: WeightVector,
    pub b: AlgebraicScalar,
    pub kappa: AlgebraicScalar,
    pub t_max: u32,
    pub h_max: u64,
    pub threshold: AlgebraicScalar,
    pub certificate: BadCertificate,
    pub check: Inequality,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub q: u32,
    pub survivors: u64,
    pub removed: u64,
    pub dq_upper: String,
    pub dq_lower: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateFile {
    pub schema: u32,
    pub curve: String,
    #[serde(rename = "R")]
    pub big_r: u64,
    pub m: u32,
    pub depth: u32,
    pub i0: RatInterval,
    pub enclosure: RatInterval,
    pub x: String,
    pub point: Vec<String>,
    pub levels: Vec<LevelSummary>,
    pub d_upper: String,
    pub d_lower: String,
    pub dimension: Option<DimensionBound>,
    pub weights: Vec<WeightCertificate>,
    pub bk: Vec<BkClaim>,
    pub checks: Vec<Inequality>,
}

impl CertificateFile {
    pub fn all_hold(&self) -> bool {
        self.checks.iter().all(|c| c.holds)
    }
}

/// Extract a point, certify it for every weight vector, and derive the
/// polynomial-badness claims when the curve is a Veronese curve.
pub fn certify_sequence(s: &RSequence, setup: &ConstructSetup) -> Result<CertificateFile, CliError> {
    let p0 = &setup.params[0];
    let enclosure = extract_point(s, setup.extract)?;
    let x = enclosure.mid();
    let y = p0.curve.eval(&x);

    let mut levels = Vec::new();
    let (mut d_up, mut d_lo) = (Rat::zero(), Rat::zero());
    for l in s.levels.iter().skip(1) {
        let up = compute_dq(s, l.q)?;
        let lo = s
            .telemetry
            .iter()
            .find(|t| t.q == l.q)
            .map(|t| crate::config::parse_rational(&t.dq_lower))
            .transpose()?
            .unwrap_or_else(Rat::zero);
        d_up = d_up.max(up.clone());
        d_lo = d_lo.max(lo.clone());
        levels.push(LevelSummary {
            q: l.q,
            survivors: l.count(),
            removed: l.removed_count(),
            dq_upper: fmt_rat(&up),
            dq_lower: fmt_rat(&lo),
        });
    }

    let mut checks = Vec::new();
    let mut weights = Vec::new();
    for p in &setup.params {
        let h_max = certificate_height(p);
        let cert = dual_margin(&y, &p.weights, h_max)?;
        let threshold = p.kappa().div(&p.b());
        let check = Inequality::ge(format!("dual margin for r = {}", p.weights), &cert.margin, &threshold);
        checks.push(check.clone());
        checks.push(Inequality::new(
            format!("certificate recheck for r = {}", p.weights),
            cert.recheck(),
            "==",
            true,
            cert.recheck(),
        ));
        weights.push(WeightCertificate {
            weights: p.weights.clone(),
            b: p.b(),
            kappa: p.kappa(),
            t_max: p.t_max(),
            h_max,
            threshold,
            certificate: cert,
            check,
        });
    }

    let mut bk = Vec::new();
    if let Some(n) = veronese_dimension(&setup.curve_spec) {
        for k in 1..=n {
            let rk = WeightVector::leading_uniform(k, n).map_err(|e| CliError::Config(e.to_string()))?;
            let cert = match weights.iter().find(|w| w.weights == rk) {
                Some(w) => w.certificate.clone(),
                None => {
                    let pk = ConstructionParams { weights: rk.clone(), ..p0.clone() };
                    dual_margin(&y, &rk, certificate_height(&pk))?
                }
            };
            let claim = badr_to_bk(&cert, k)?;
            if let Some(bn) = &claim.cross_check {
                checks.push(Inequality::new(
                    format!("B_{k} margin at H <= {}", claim.valid_height),
                    bn.margin.to_string(),
                    ">=",
                    claim.constant.to_string(),
                    bn.margin >= claim.constant,
                ));
            }
            bk.push(claim);
        }
    }

    Ok(CertificateFile {
        schema: SCHEMA_VERSION,
        curve: p0.curve.describe(),
        big_r: p0.big_r,
        m: p0.m,
        depth: s.depth(),
        i0: s.i0.clone(),
        enclosure,
        x: fmt_rat(&x),
        point: y.iter().map(fmt_rat).collect(),
        levels,
        d_upper: fmt_rat(&d_up),
        d_lower: fmt_rat(&d_lo),
        dimension: dimension_lower_bound(p0.big_r, &d_up),
        weights,
        bk,
        checks,
    })
}

fn level_table(cert: &CertificateFile) -> Table {
    let mut t = Table::new("levels", &["q", "survivors", "removed", "d_q upper", "d_q lower"]);
    for l in &cert.levels {
        let f = |s: &str| parse_rational(s).map(|r| format!("{:.4}", rat_to_f64(&r))).unwrap_or_else(|_| s.to_string());
        t.push(vec![l.q.to_string(), l.survivors.to_string(), l.removed.to_string(), f(&l.dq_upper), f(&l.dq_lower)]);
    }
    t
}

fn summarize_certificate(rep: &mut RunReport, cert: &CertificateFile) {
    rep.field("curve", &cert.curve);
    rep.field("R, m, depth", format!("{}, {}, {}", cert.big_r, cert.m, cert.depth));
    rep.field("enclosure", &cert.enclosure);
    let short = |s: &str| parse_rational(s).map(|r| r.to_string()).unwrap_or_else(|_| s.to_string());
    rep.field("d upper / lower", format!("{} / {}", short(&cert.d_upper), short(&cert.d_lower)));
    match &cert.dimension {
        Some(d) => rep.field("dimension lower bound", format!("{} (~{:.4})", d.expression, d.value)),
        None => rep.field("dimension lower bound", "not certified (d > 1)"),
    }
    for w in &cert.weights {
        rep.field(&format!("margin r={}", w.weights), margin_string(&w.certificate.margin));
    }
    for c in &cert.bk {
        rep.field(&format!("B_{} constant", c.k), format!("{} valid to H = {}", c.constant, c.valid_height));
    }
    rep.tables.push(level_table(cert));
    rep.inequalities = cert.checks.clone();
}

/// Persist a built sequence and its certificate as a run directory.
fn write_run(
    root: &Path,
    name: &str,
    force: bool,
    cfg: &RunConfig,
    s: &RSequence,
    cert: &CertificateFile,
    rep: &mut RunReport,
) -> Result<PathBuf, CliError> {
    let st = Staging::new(root, name)?;
    st.write_json(persist::PARAMS_FILE, &json!({ "schema": SCHEMA_VERSION, "config": cfg, "params": s.params }))?;
    persist::save_sequence(&st, s)?;
    st.write_json(persist::CERTIFICATE_FILE, cert)?;
    rep.artifacts = [persist::PARAMS_FILE, persist::SEQUENCE_FILE, persist::LEVELS_DIR, persist::TELEMETRY_FILE, persist::CERTIFICATE_FILE, persist::REPORT_FILE]
        .iter()
        .map(|f| st.target().join(f).display().to_string())
        .collect();
    st.write_json(persist::REPORT_FILE, rep)?;
    st.commit(force)
}

pub fn cmd_construct(cfg: &RunConfig, force: bool) -> Result<(RunReport, PathBuf), CliError> {
    let start = Instant::now();
    let setup = construct_setup(cfg)?;
    let s = build_sequence(&setup.params)?;
    let cert = with_pool(cfg.threads(), || certify_sequence(&s, &setup))??;
    let mut rep = RunReport::new("construct", inputs(cfg));
    if let Some(w) = setup.params.iter().find_map(ConstructionParams::tau_warning) {
        rep.field("warning", w);
    }
    summarize_certificate(&mut rep, &cert);
    rep.payload = serde_json::to_value(&cert).expect("certificate serializes");
    rep.elapsed_ms = start.elapsed().as_millis() as u64;
    let dir = write_run(&cfg.output_root(), &setup.name, force, cfg, &s, &cert, &mut rep)?;
    Ok((rep, dir))
}

/// Intersect persisted runs (same `R`, `I0`) into a new run.
pub fn cmd_intersect(cfg: &RunConfig, runs: &[PathBuf], name: Option<String>, force: bool) -> Result<(RunReport, PathBuf), CliError> {
    let start = Instant::now();
    if runs.len() < 2 {
        return Err(CliError::Usage("intersect needs at least two run directories".into()));
    }
    let seqs = runs.iter().map(|d| persist::load_sequence(d)).collect::<Result<Vec<_>, _>>()?;
    let s = intersect_sequences(&seqs)?;
    let params: Vec<ConstructionParams> = s.params.clone();
    if let Some(h) = &s.halt {
        return Err(halt_error(h, params[0].big_r, params[0].m));
    }
    let mut curve_spec = String::new();
    for d in runs {
        let v: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(d.join(persist::PARAMS_FILE)).map_err(|e| CliError::Io(e.to_string()))?,
        )
        .map_err(|e| CliError::Io(e.to_string()))?;
        let spec = v["config"]["construct"]["curve"].as_str().unwrap_or(DEFAULT_CURVE).to_string();
        if !curve_spec.is_empty() && spec != curve_spec {
            return Err(CliError::Config("runs use different curves".into()));
        }
        curve_spec = spec;
    }
    let depth = s.depth();
    let params: Vec<ConstructionParams> = params.into_iter().map(|p| ConstructionParams { q_max: depth, ..p }).collect();
    let setup = ConstructSetup {
        name: name.unwrap_or_else(|| {
            let ws: Vec<String> = params.iter().map(|p| p.weights.entries().iter().map(fmt_rat).collect::<Vec<_>>().join(",")).collect();
            format!("{}-intersect", run_name(params[0].big_r, params[0].m, depth, &ws))
        }),
        params,
        curve_spec,
        extract: cfg.construct.extract.unwrap_or(ExtractMode::Midmost),
    };
    let cert = with_pool(cfg.threads(), || certify_sequence(&s, &setup))??;
    let mut rep = RunReport::new("intersect", json!({ "runs": runs, "config": cfg }));
    summarize_certificate(&mut rep, &cert);
    rep.payload = serde_json::to_value(&cert).expect("certificate serializes");
    rep.elapsed_ms = start.elapsed().as_millis() as u64;
    let dir = write_run(&cfg.output_root(), &setup.name, force, cfg, &s, &cert, &mut rep)?;
    Ok((rep, dir))
}

fn parse_matrix(s: &str) -> Result<Vec<Vec<Rat>>, CliError> {
    let rows = s.split(';').map(parse_rationals).collect::<Result<Vec<_>, _>>()?;
    if rows.is_empty() || rows.iter().any(|r| r.len() != rows[0].len()) {
        return Err(CliError::Config("matrix rows must have equal length".into()));
    }
    Ok(rows)
}

pub fn cmd_count(cfg: &RunConfig) -> Result<RunReport, CliError> {
    let start = Instant::now();
    let c = &cfg.count;
    let m = parse_matrix(c.matrix.as_deref().ok_or_else(|| CliError::Usage("count needs --matrix".into()))?)?;
    let theta = parse_rationals(c.half_widths.as_deref().ok_or_else(|| CliError::Usage("count needs --box".into()))?)?;
    let budget = c.budget.unwrap_or(DEFAULT_BUDGET);
    let l = LatticeBasis::from_rational(m)?;
    let bx = CenteredBox::from_rats(&theta)?;
    let bc = count_in_box(&l, &bx, budget)?;
    let mut rep = RunReport::new("count", inputs(cfg));
    rep.field("count", bc.count);
    rep.field("rank", bc.rank);
    let square = l.ambient() == l.dim();
    if square && bc.rank == l.dim() {
        let b = blichfeldt_check(&l, &bx, budget)?;
        rep.inequalities.push(Inequality::new("count <= l! vol/det + l", &b.lhs, "<=", &b.rhs, b.holds));
    }
    if square {
        let d = det_delta_check(&l, budget)?;
        rep.inequalities.push(Inequality::new("(delta/2)^l <= det", &d.lhs, "<=", &d.rhs, d.holds));
        match minkowski_check(&l, &bx, budget)? {
            Some(found) => rep.inequalities.push(Inequality::new("nonzero point when vol > 2^l det", found, "==", true, found)),
            None => rep.field("minkowski", "volume hypothesis does not hold"),
        }
    }
    let mut t = Table::new("points", &["z"]);
    for p in bc.points.iter().take(50) {
        t.push(vec![p.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")]);
    }
    rep.tables.push(t);
    rep.payload = json!({ "count": bc.count, "rank": bc.rank, "points": bc.points.iter().map(|p| p.iter().map(|x| x.to_string()).collect::<Vec<_>>()).collect::<Vec<_>>() });
    rep.elapsed_ms = start.elapsed().as_millis() as u64;
    Ok(rep)
}

fn root_text(w: &AlgebraicWitness) -> String {
    match &w.exact_root {
        Some(r) => format!("at {r}"),
        None => format!("in {}", w.root_enclosure),
    }
}

pub fn cmd_algebraic(cfg: &RunConfig) -> Result<RunReport, CliError> {
    let start = Instant::now();
    let a = &cfg.algebraic;
    let op = a.op.ok_or_else(|| CliError::Usage("algebraic needs an operation".into()))?;
    let need_xi = || -> Result<Rat, CliError> { parse_rational(a.xi.as_deref().ok_or_else(|| CliError::Usage("--xi is required".into()))?) };
    let n = a.n.unwrap_or(2);
    let h = a.h_max.unwrap_or(20);
    let mut rep = RunReport::new("algebraic", inputs(cfg));
    let payload = with_pool(cfg.threads(), || -> Result<serde_json::Value, CliError> {
        Ok(match op {
            AlgebraicOp::Bn => {
                let m = bn_margin(&need_xi()?, n, h)?;
                rep.field("margin", format!("{} (~{:.6e})", m.margin, rat_to_f64(&m.margin)));
                rep.field("witness", &m.witness);
                serde_json::to_value(&m)
            }
            AlgebraicOp::Bstar => {
                let m = bstar_margin(&need_xi()?, n, h)?;
                rep.field("margin lower", format!("{} (~{:.6e})", m.margin_lower, rat_to_f64(&m.margin_lower)));
                rep.field("margin upper", format!("{} (~{:.6e})", m.margin_upper, rat_to_f64(&m.margin_upper)));
                rep.field("witness", format!("{} {}", m.witness.poly, root_text(&m.witness)));
                serde_json::to_value(&m)
            }
            AlgebraicOp::Wstar => {
                let c2 = parse_rational(a.c2.as_deref().unwrap_or("1"))?;
                let w = wstar_witnesses(&need_xi()?, n, &c2, a.h_min.unwrap_or(1), h)?;
                rep.field("witnesses", w.len());
                let mut t = Table::new("witnesses", &["H", "polynomial", "root"]);
                for x in &w {
                    t.push(vec![x.height.to_string(), x.poly.to_string(), root_text(x)]);
                }
                rep.tables.push(t);
                serde_json::to_value(&w)
            }
            AlgebraicOp::Minkowski => {
                let xi = need_xi()?;
                let q = a.q.unwrap_or(5);
                let eps0 = parse_rational(a.eps0.as_deref().ok_or_else(|| CliError::Usage("--eps0 is required".into()))?)?;
                let p = minkowski_polynomial(&xi, n, q, &eps0)?;
                rep.field("polynomial", &p);
                rep.inequalities.push(Inequality::new("system holds", minkowski_holds(&p, &xi, n, q, &eps0), "==", true, minkowski_holds(&p, &xi, n, q, &eps0)));
                serde_json::to_value(&p)
            }
            AlgebraicOp::Inclusion => {
                let r = inclusion_check(&need_xi()?, n, h)?;
                rep.field("c1", &r.c1);
                rep.field("H'", r.h_prime);
                rep.field("violations", r.violations.len());
                if let Some(b) = &r.bstar {
                    rep.inequalities.push(Inequality::new("B* margin upper >= c1/K", b.margin_upper.to_string(), ">=", r.predicted.to_string(), b.margin_upper >= r.predicted));
                }
                rep.inequalities.push(Inequality::new("roots closer than c1/(K H^(n+1))", r.violations.len(), "==", 0, r.violations.is_empty()));
                serde_json::to_value(&r)
            }
            AlgebraicOp::Fiber => {
                let center = parse_rationals(a.center.as_deref().ok_or_else(|| CliError::Usage("--center is required".into()))?)?;
                let map = a.map.as_deref().ok_or_else(|| CliError::Usage("--map is required".into()))?;
                let comps = map.split(';').map(|c| MultiPoly::parse(c, center.len())).collect::<Result<Vec<_>, _>>()?;
                let f = PolyMap::new(comps, center, parse_rational(a.radius.as_deref().unwrap_or("1"))?)?;
                let u = match a.u.as_deref() {
                    Some(s) if !s.is_empty() => parse_rationals(s)?,
                    _ => Vec::new(),
                };
                let fc = fiber_map(&f, a.d.unwrap_or(2), &u)?;
                rep.field("curve", fc.curve.describe());
                rep.field("wronskian", &fc.wronskian);
                Ok(json!({ "curve": fc.curve, "wronskian": fc.wronskian.to_string(), "d": fc.d }))
            }
        }
        .expect("serializes"))
    })??;
    rep.field("operation", format!("{op:?}").to_lowercase());
    rep.payload = payload;
    rep.elapsed_ms = start.elapsed().as_millis() as u64;
    Ok(rep)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(rename = "R")]
    pub big_r: u64,
    pub m: u32,
    pub q_max: u32,
    pub deepest: u32,
    pub status: String,
    pub d_upper: Option<String>,
    pub d_lower: Option<String>,
}

impl SweepRow {
    pub fn complete(&self) -> bool {
        self.status == "complete"
    }

    fn d_at_most_one(&self) -> bool {
        self.d_upper.as_deref().and_then(|d| parse_rational(d).ok()).is_some_and(|d| d <= Rat::from_integer(1.into()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub selected: Option<(u64, u32)>,
    pub rule: String,
}

/// Build every `(R, m)` to `m + depth`; pick the smallest `(R, m)` with
/// `d <= 1` at full depth, else the smallest reaching full depth.
pub fn sweep(cfg: &RunConfig) -> Result<SweepResult, CliError> {
    let c = &cfg.sweep;
    let curve_spec = c.curve.clone().unwrap_or_else(|| DEFAULT_CURVE.into());
    let i0 = parse_interval(c.i0.as_deref().unwrap_or(DEFAULT_I0))?;
    let curve = parse_curve(&curve_spec, &i0)?;
    let weights = c.weights.clone().unwrap_or_else(|| vec![default_weights(curve.n())]);
    let depth = c.depth.unwrap_or(4);
    let mut rs = c.big_r.clone().unwrap_or_else(|| vec![8, 16]);
    let mut ms = c.m.clone().unwrap_or_else(|| vec![2, 3, 4]);
    rs.sort_unstable();
    rs.dedup();
    ms.sort_unstable();
    ms.dedup();
    let mut rows = Vec::new();
    for &r in &rs {
        for &m in &ms {
            let q_max = m + depth;
            let mut seqs = Vec::new();
            let mut status = "complete".to_string();
            let mut deepest = q_max;
            for w in &weights {
                let p = ConstructionParams {
                    big_r: r,
                    m,
                    q_max,
                    weights: parse_weights(w)?,
                    curve: curve.clone(),
                    i0: i0.clone(),
                    budget: c.budget.unwrap_or(DEFAULT_BUDGET),
                    threads: cfg.threads(),
                };
                let s = build_r_sequence(&p)?;
                match &s.halt {
                    Some(Halt::LevelEmpty { q, .. }) => {
                        status = "empty".into();
                        deepest = deepest.min(q - 1);
                    }
                    Some(Halt::BudgetExceeded { .. }) => {
                        status = "budget".into();
                        deepest = deepest.min(s.depth());
                    }
                    None => {}
                }
                seqs.push(s);
            }
            let (mut d_upper, mut d_lower) = (None, None);
            if status == "complete" {
                let s = if seqs.len() == 1 { seqs.pop().expect("one") } else { intersect_sequences(&seqs)? };
                if let Some(Halt::LevelEmpty { q, .. }) = &s.halt {
                    status = "empty".into();
                    deepest = q - 1;
                } else {
                    let mut up = Rat::zero();
                    let mut lo = Rat::zero();
                    for q in 1..=s.depth() {
                        up = up.max(compute_dq(&s, q)?);
                        if let Some(t) = s.telemetry.iter().find(|t| t.q == q) {
                            lo = lo.max(parse_rational(&t.dq_lower)?);
                        }
                    }
                    d_upper = Some(fmt_rat(&up));
                    d_lower = Some(fmt_rat(&lo));
                }
            }
            rows.push(SweepRow { big_r: r, m, q_max, deepest, status, d_upper, d_lower });
        }
    }
    let (selected, rule) = match rows.iter().find(|r| r.complete() && r.d_at_most_one()) {
        Some(r) => (Some((r.big_r, r.m)), "smallest (R, m) with d <= 1 at full depth".to_string()),
        None => match rows.iter().find(|r| r.complete()) {
            Some(r) => (Some((r.big_r, r.m)), "no pair reached d <= 1; smallest (R, m) nonempty at full depth".to_string()),
            None if rows.is_empty() => (None, "grid is empty".to_string()),
            None => (None, "no pair stayed nonempty".to_string()),
        },
    };
    Ok(SweepResult { rows, selected, rule })
}

pub fn cmd_sweep(cfg: &RunConfig) -> Result<RunReport, CliError> {
    let start = Instant::now();
    let res = sweep(cfg)?;
    let mut rep = RunReport::new("sweep", inputs(cfg));
    let mut t = Table::new("sweep", &["R", "m", "q_max", "deepest", "status", "d upper", "d lower"]);
    let approx = |d: &Option<String>| {
        d.as_deref()
            .and_then(|s| parse_rational(s).ok())
            .map(|r| format!("{:.4}", rat_to_f64(&r)))
            .unwrap_or_else(|| "-".into())
    };
    for r in &res.rows {
        t.push(vec![
            r.big_r.to_string(),
            r.m.to_string(),
            r.q_max.to_string(),
            r.deepest.to_string(),
            r.status.clone(),
            approx(&r.d_upper),
            approx(&r.d_lower),
        ]);
    }
    rep.tables.push(t);
    match res.selected {
        Some((r, m)) => rep.field("selected", format!("R = {r}, m = {m}")),
        None => rep.field("selected", "none"),
    }
    rep.field("rule", &res.rule);
    rep.payload = serde_json::to_value(&res).expect("serializes");
    rep.elapsed_ms = start.elapsed().as_millis() as u64;
    Ok(rep)
}

fn runs_nested(child: &[(u64, u64)], parent: &[(u64, u64)], r: u64) -> bool {
    child.iter().all(|&(a, b)| {
        let (pa, pb) = (a / r, (b - 1) / r + 1);
        let i = parent.partition_point(|&(_, e)| e <= pa);
        i < parent.len() && parent[i].0 <= pa && pb <= parent[i].1
    })
}

/// Re-read a run directory and re-verify everything it asserts.
pub fn cmd_report(dir: &Path) -> Result<RunReport, CliError> {
    let start = Instant::now();
    let s = persist::load_sequence(dir)?;
    let cert: CertificateFile = serde_json::from_value(persist::read_certificate(dir)?).map_err(|e| CliError::Io(format!("{}: {e}", persist::CERTIFICATE_FILE)))?;
    let mut rep = RunReport::new("report", json!({ "run": dir }));
    summarize_certificate(&mut rep, &cert);
    rep.inequalities.clear();

    let nested = s.levels.windows(2).all(|w| runs_nested(&w[1].runs, &w[0].runs, s.big_r));
    rep.inequalities.push(Inequality::new("levels nested", nested, "==", true, nested));
    let contains = cert.enclosure.lo >= s.i0.lo && cert.enclosure.hi <= s.i0.hi;
    let deepest = s.level(s.depth())?;
    let g = s.grid(s.depth());
    let cell = g.cell_of(&cert.enclosure.lo);
    let member = contains && deepest.contains_cell(cell) && g.cell(cell) == cert.enclosure;
    rep.inequalities.push(Inequality::new("enclosure is a surviving cell", member, "==", true, member));
    let x = parse_rational(&cert.x)?;
    let on_curve = s.params[0].curve.eval(&x).iter().map(fmt_rat).collect::<Vec<_>>() == cert.point;
    rep.inequalities.push(Inequality::new("point lies on the curve", on_curve, "==", true, on_curve));
    for l in &cert.levels {
        let up = compute_dq(&s, l.q)?;
        let ok = fmt_rat(&up) == l.dq_upper;
        rep.inequalities.push(Inequality::new(format!("d_{} recomputed", l.q), fmt_rat(&up), "==", &l.dq_upper, ok));
    }
    for w in &cert.weights {
        let ok = w.certificate.recheck() && w.certificate.subject.point.iter().map(fmt_rat).collect::<Vec<_>>() == cert.point;
        rep.inequalities.push(Inequality::new(format!("certificate r = {} rechecks", w.weights), ok, "==", true, ok));
        rep.inequalities.push(Inequality::ge(format!("dual margin for r = {}", w.weights), &w.certificate.margin, &w.threshold));
    }
    rep.field("verified", if rep.all_hold() { "yes" } else { "no" });
    rep.elapsed_ms = start.elapsed().as_millis() as u64;
    Ok(rep)
}
