//! Declarative run configuration. Every field is optional; flags override the
//! file and command defaults fill the rest.

use std::path::{Path, PathBuf};

use badapprox::algebraic::MultiPoly;
use badapprox::cantor::ExtractMode;
use badapprox::dangerous::PolyCurve;
use badapprox::exact::{parse_rat, parse_rat_list, Rat, RatInterval, WeightVector};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "BADAPPROX_OUT";

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(skip_serializing_if = "is_default")]
    pub certify: CertifyConfig,
    #[serde(skip_serializing_if = "is_default")]
    pub construct: ConstructConfig,
    #[serde(skip_serializing_if = "is_default")]
    pub sweep: SweepConfig,
    #[serde(skip_serializing_if = "is_default")]
    pub count: CountConfig,
    #[serde(skip_serializing_if = "is_default")]
    pub algebraic: AlgebraicConfig,
}

fn is_default<T: Default + PartialEq>(t: &T) -> bool {
    *t == T::default()
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertifyConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dual: Option<bool>,
    #[serde(rename = "Q_max", skip_serializing_if = "Option::is_none")]
    pub q_max: Option<u64>,
    #[serde(rename = "H_max", skip_serializing_if = "Option::is_none")]
    pub h_max: Option<u64>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstructConfig {
    /// `veronese:N` or univariate components in `x` separated by `;`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub curve: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<String>>,
    #[serde(rename = "R", skip_serializing_if = "Option::is_none")]
    pub big_r: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_max: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub i0: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extract: Option<ExtractMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub curve: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<String>>,
    #[serde(rename = "R", skip_serializing_if = "Option::is_none")]
    pub big_r: Option<Vec<u64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<Vec<u32>>,
    /// Levels built beyond `m`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub i0: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget: Option<u64>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CountConfig {
    /// Rows separated by `;`, entries by `,`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matrix: Option<String>,
    #[serde(rename = "box", skip_serializing_if = "Option::is_none")]
    pub half_widths: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget: Option<u64>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlgebraicConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub op: Option<AlgebraicOp>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xi: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(rename = "H_max", skip_serializing_if = "Option::is_none")]
    pub h_max: Option<u64>,
    #[serde(rename = "H_min", skip_serializing_if = "Option::is_none")]
    pub h_min: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c2: Option<String>,
    #[serde(rename = "Q", skip_serializing_if = "Option::is_none")]
    pub q: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps0: Option<String>,
    /// Map components in `x1..xm` separated by `;`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub map: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum AlgebraicOp {
    Bn,
    Bstar,
    Wstar,
    Minkowski,
    Inclusion,
    Fiber,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Flag, then file, then `$BADAPPROX_OUT`, then `./runs`.
    pub fn output_root(&self) -> PathBuf {
        self.output
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("runs"))
    }

    pub fn threads(&self) -> usize {
        self.threads.unwrap_or(1).max(1)
    }
}

pub const DEFAULT_CURVE: &str = "veronese:2";
pub const DEFAULT_I0: &str = "1/2,1";
pub const DEFAULT_BUDGET: u64 = 50_000_000;

pub fn parse_interval(s: &str) -> Result<RatInterval, CliError> {
    let v = parse_rat_list(s).map_err(|e| CliError::Config(format!("interval \"{s}\": {e}")))?;
    if v.len() != 2 {
        return Err(CliError::Config(format!("interval \"{s}\" needs two endpoints")));
    }
    RatInterval::new(v[0].clone(), v[1].clone()).map_err(|e| CliError::Config(e.to_string()))
}

pub fn parse_weights(s: &str) -> Result<WeightVector, CliError> {
    WeightVector::parse(s).map_err(|e| CliError::Config(format!("weights \"{s}\": {e}")))
}

pub fn parse_rational(s: &str) -> Result<Rat, CliError> {
    parse_rat(s).map_err(|e| CliError::Config(format!("\"{s}\": {e}")))
}

pub fn parse_rationals(s: &str) -> Result<Vec<Rat>, CliError> {
    parse_rat_list(s).map_err(|e| CliError::Config(format!("\"{s}\": {e}")))
}

/// Dimension of a `veronese:N` curve string.
pub fn veronese_dimension(spec: &str) -> Option<usize> {
    spec.strip_prefix("veronese:").and_then(|n| n.trim().parse().ok())
}

/// `veronese:N` or components such as `x;x^2+x` on `domain`.
pub fn parse_curve(spec: &str, domain: &RatInterval) -> Result<PolyCurve, CliError> {
    if let Some(n) = veronese_dimension(spec) {
        if n == 0 {
            return Err(CliError::Config("veronese dimension must be at least 1".into()));
        }
        return Ok(PolyCurve::veronese(n, domain.clone()));
    }
    let comps = spec
        .split(';')
        .map(|c| {
            let renamed = rename_x(c);
            MultiPoly::parse(&renamed, 1).map(|m| m.fiber(2, &[])).map_err(|e| CliError::Config(e.to_string()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    PolyCurve::new(comps, domain.clone()).map_err(|e| CliError::Config(format!("curve \"{spec}\": {e}")))
}

/// Bare `x` becomes `x1`.
fn rename_x(s: &str) -> String {
    let chars: Vec<char> = s.chars().collect();
    let mut out = String::new();
    for (i, &c) in chars.iter().enumerate() {
        out.push(c);
        if c == 'x' && !chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()) {
            out.push('1');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trips() {
        let mut c = RunConfig::default();
        assert_eq!(c.to_json(), "{}");
        c.threads = Some(2);
        c.construct.big_r = Some(8);
        c.construct.weights = Some(vec!["1/2,1/2".into(), "2/3,1/3".into()]);
        c.construct.extract = Some(ExtractMode::Midmost);
        c.algebraic.op = Some(AlgebraicOp::Bstar);
        c.certify.q_max = Some(1000);
        let back: RunConfig = serde_json::from_str(&c.to_json()).unwrap();
        assert_eq!(back, c);
        assert!(serde_json::from_str::<RunConfig>(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn curves_parse() {
        let d = parse_interval("1/2,1").unwrap();
        assert_eq!(parse_curve("veronese:2", &d).unwrap(), PolyCurve::veronese(2, d.clone()));
        assert_eq!(parse_curve("x; x^2", &d).unwrap(), PolyCurve::veronese(2, d.clone()));
        assert!(parse_curve("x; 2*x", &d).is_err());
        assert!(parse_interval("1,1/2").is_err());
    }
}
