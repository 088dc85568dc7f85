//! Run directories. Everything is written under a hidden staging directory
//! and renamed into place at the end, so a failed run leaves nothing behind.

use std::fs;
use std::path::{Path, PathBuf};

use badapprox::cantor::{Halt, Level, LevelTelemetry, RSequence, RemovedRun};
use badapprox::dangerous::PropertyFConstants;
use badapprox::exact::{self, Rat, RatInterval};
use badapprox::cantor::ConstructionParams;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::report::SCHEMA_VERSION;
use crate::CliError;

pub const PARAMS_FILE: &str = "params.json";
pub const SEQUENCE_FILE: &str = "sequence.json";
pub const CERTIFICATE_FILE: &str = "certificate.json";
pub const TELEMETRY_FILE: &str = "telemetry.csv";
pub const REPORT_FILE: &str = "report.json";
pub const LEVELS_DIR: &str = "levels";

pub struct Staging {
    tmp: PathBuf,
    target: PathBuf,
}

impl Staging {
    pub fn new(root: &Path, name: &str) -> Result<Self, CliError> {
        if name.is_empty() || name.contains(['/', '\\']) || name.starts_with('.') {
            return Err(CliError::Config(format!("invalid run name \"{name}\"")));
        }
        fs::create_dir_all(root).map_err(|e| io_err(root, e))?;
        let tmp = root.join(format!(".{name}.tmp-{}", std::process::id()));
        if tmp.exists() {
            fs::remove_dir_all(&tmp).map_err(|e| io_err(&tmp, e))?;
        }
        fs::create_dir_all(tmp.join(LEVELS_DIR)).map_err(|e| io_err(&tmp, e))?;
        Ok(Self { tmp, target: root.join(name) })
    }

    pub fn write_json<T: Serialize>(&self, rel: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
        text.push('\n');
        self.write_bytes(rel, text.as_bytes())
    }

    pub fn write_bytes(&self, rel: &str, bytes: &[u8]) -> Result<(), CliError> {
        let p = self.tmp.join(rel);
        fs::write(&p, bytes).map_err(|e| io_err(&p, e))
    }

    /// Move the staged directory into place, replacing an older run only with `force`.
    pub fn commit(self, force: bool) -> Result<PathBuf, CliError> {
        if self.target.exists() {
            if !force {
                let msg = format!("{} exists; pass --force to replace it", self.target.display());
                let _ = fs::remove_dir_all(&self.tmp);
                return Err(CliError::Config(msg));
            }
            let old = self.target.with_extension(format!("old-{}", std::process::id()));
            fs::rename(&self.target, &old).map_err(|e| io_err(&self.target, e))?;
            fs::rename(&self.tmp, &self.target).map_err(|e| io_err(&self.tmp, e))?;
            fs::remove_dir_all(&old).map_err(|e| io_err(&old, e))?;
        } else {
            fs::rename(&self.tmp, &self.target).map_err(|e| io_err(&self.tmp, e))?;
        }
        Ok(self.target.clone())
    }

    pub fn target(&self) -> &Path {
        &self.target
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        if self.tmp.exists() {
            let _ = fs::remove_dir_all(&self.tmp);
        }
    }
}

fn io_err(p: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", p.display()))
}

#[derive(Serialize, Deserialize)]
struct SequenceFile {
    schema: u32,
    #[serde(rename = "R")]
    big_r: u64,
    i0: RatInterval,
    depth: u32,
    params: Vec<ConstructionParams>,
    constants: Option<PropertyFConstants>,
    halt: Option<Halt>,
}

#[derive(Serialize, Deserialize)]
struct GridRecord {
    #[serde(with = "exact::serde_rat")]
    lo: Rat,
    #[serde(with = "exact::serde_rat")]
    cell_width: Rat,
    cells: u64,
}

#[derive(Serialize, Deserialize)]
struct LevelFile {
    schema: u32,
    q: u32,
    grid: GridRecord,
    survivors: u64,
    runs: Vec<(u64, u64)>,
    removed: Vec<RemovedRun>,
}

pub fn level_file(q: u32) -> String {
    format!("{LEVELS_DIR}/{q}.json")
}

/// Write the sequence metadata, one file per level, and the telemetry CSV.
pub fn save_sequence(st: &Staging, s: &RSequence) -> Result<(), CliError> {
    st.write_json(
        SEQUENCE_FILE,
        &SequenceFile {
            schema: SCHEMA_VERSION,
            big_r: s.big_r,
            i0: s.i0.clone(),
            depth: s.depth(),
            params: s.params.clone(),
            constants: s.constants.clone(),
            halt: s.halt.clone(),
        },
    )?;
    for l in &s.levels {
        let g = s.grid(l.q);
        st.write_json(
            &level_file(l.q),
            &LevelFile {
                schema: SCHEMA_VERSION,
                q: l.q,
                grid: GridRecord { lo: g.lo.clone(), cell_width: g.h.clone(), cells: g.cells },
                survivors: l.count(),
                runs: l.runs.clone(),
                removed: l.removed.clone(),
            },
        )?;
    }
    st.write_bytes(TELEMETRY_FILE, &telemetry_csv(&s.telemetry)?)
}

pub fn telemetry_csv(rows: &[LevelTelemetry]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Io(e.to_string()))?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}

fn read_json<T: DeserializeOwned>(p: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(p).map_err(|e| io_err(p, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))
}

fn check_schema(found: u32, p: &Path) -> Result<(), CliError> {
    if found != SCHEMA_VERSION {
        return Err(CliError::Io(format!("{}: schema {found}, expected {SCHEMA_VERSION}", p.display())));
    }
    Ok(())
}

/// Rebuild a sequence from a run directory.
pub fn load_sequence(dir: &Path) -> Result<RSequence, CliError> {
    let meta_path = dir.join(SEQUENCE_FILE);
    let meta: SequenceFile = read_json(&meta_path)?;
    check_schema(meta.schema, &meta_path)?;
    let mut levels = Vec::new();
    for q in 0..=meta.depth {
        let p = dir.join(level_file(q));
        let lf: LevelFile = read_json(&p)?;
        check_schema(lf.schema, &p)?;
        if lf.q != q || lf.grid.cells != meta.big_r.pow(q) {
            return Err(CliError::Io(format!("{}: level header does not match", p.display())));
        }
        levels.push(Level { q, runs: lf.runs, removed: lf.removed });
    }
    let telemetry = match fs::read(dir.join(TELEMETRY_FILE)) {
        Ok(bytes) => csv::Reader::from_reader(bytes.as_slice())
            .deserialize()
            .collect::<Result<Vec<LevelTelemetry>, _>>()
            .map_err(|e| CliError::Io(format!("{TELEMETRY_FILE}: {e}")))?,
        Err(_) => Vec::new(),
    };
    Ok(RSequence {
        big_r: meta.big_r,
        i0: meta.i0,
        levels,
        params: meta.params,
        constants: meta.constants,
        telemetry,
        halt: meta.halt,
    })
}

pub fn read_certificate(dir: &Path) -> Result<serde_json::Value, CliError> {
    read_json(&dir.join(CERTIFICATE_FILE))
}
