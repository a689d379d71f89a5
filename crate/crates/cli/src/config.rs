//! Run configuration: JSON file merged with command-line flags, flags
//! winning. Strict schema: unknown fields and unknown parameter keys are
//! rejected with a field-path message.

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use std::collections::BTreeMap;
use std::path::Path;

/// Where a resolved value came from, echoed in reports.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Default,
    File,
    Flag,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::Default => "default",
            Provenance::File => "file",
            Provenance::Flag => "flag",
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    pub t0: f64,
    pub t1: f64,
    pub dt: f64,
}

/// On-disk configuration file (all fields optional; flags override).
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub family: Option<String>,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    pub grid: Option<GridSpec>,
    pub time: Option<TimeSpec>,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    pub out_dir: Option<String>,
    #[serde(default)]
    pub formats: Vec<String>,
}

const KNOWN_PARAMS: &[&str] = &[
    "omega", "l", "g", "h", "mu", "alpha", "beta", "sigma", "xi", "zeta", "n", "big_n", "energy",
    "u0", "v0", "b2_0", "sign", "k1_override", "dl", "dg", "x", "y", "dt_fd",
];

pub fn load_config_file(path: &Path) -> Result<ConfigFile> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config file {}", path.display()))?;
    let cfg: ConfigFile = serde_json::from_str(&text).map_err(|e| {
        anyhow::anyhow!(
            "malformed config {} at line {}, column {}: {}",
            path.display(),
            e.line(),
            e.column(),
            e
        )
    })?;
    for key in cfg.params.keys() {
        if !KNOWN_PARAMS.contains(&key.as_str()) {
            bail!("config field `params.{key}`: unknown parameter key");
        }
    }
    for (key, value) in &cfg.tolerances {
        if *value <= 0.0 {
            bail!("config field `tolerances.{key}`: tolerance must be positive, got {value}");
        }
    }
    if let Some(grid) = &cfg.grid {
        validate_grid(grid)?;
    }
    if let Some(time) = &cfg.time {
        if time.t1 <= time.t0 || time.dt <= 0.0 {
            bail!("config field `time`: need t1 > t0 and dt > 0");
        }
    }
    for f in &cfg.formats {
        if !["json", "csv", "svg"].contains(&f.as_str()) {
            bail!("config field `formats`: unknown format `{f}` (expected json, csv, svg)");
        }
    }
    Ok(cfg)
}

pub fn validate_grid(grid: &GridSpec) -> Result<()> {
    if grid.x_max <= grid.x_min {
        bail!("config field `grid`: x_max must exceed x_min");
    }
    if grid.n_points < 16 {
        bail!(
            "config field `grid.n_points`: need at least 16 points, got {}",
            grid.n_points
        );
    }
    Ok(())
}

/// A scalar parameter resolved from flag > file > default, with provenance.
#[derive(Clone, Copy, Debug)]
pub struct Resolved {
    pub value: f64,
    pub provenance: Provenance,
}

pub struct ParamResolver<'a> {
    file: &'a BTreeMap<String, f64>,
}

impl<'a> ParamResolver<'a> {
    pub fn new(file: &'a BTreeMap<String, f64>) -> Self {
        ParamResolver { file }
    }

    pub fn resolve(&self, name: &str, flag: Option<f64>, default: f64) -> Resolved {
        if let Some(v) = flag {
            Resolved {
                value: v,
                provenance: Provenance::Flag,
            }
        } else if let Some(v) = self.file.get(name) {
            Resolved {
                value: *v,
                provenance: Provenance::File,
            }
        } else {
            Resolved {
                value: default,
                provenance: Provenance::Default,
            }
        }
    }
}
