use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use qfim3d::beam::{grid_for, BeamSpec};
use qfim3d::grid::Grid;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum BeamKind {
    Gaussian,
    Lg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ClosedForm,
    Subspace,
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Json,
}

/// Everything a command needs. Lengths follow the beam: `s`, `x0` and the
/// `s_*` range are in units of `w0`; `t`, `z0` and the `t_*`, `z_*` ranges
/// in units of `z_r`. `w0` and `lambda` are in metres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub beam: BeamKind,
    pub w0: f64,
    pub lambda: f64,
    pub p: u32,
    pub l: i32,

    pub nx: usize,
    pub ny: usize,
    /// Window half-width in units of `w0`; sized from the beam when absent.
    pub half_width: Option<f64>,

    pub method: Method,
    pub x0: f64,
    pub s: f64,
    pub z0: f64,
    pub t: f64,
    pub q: f64,

    pub s_min: f64,
    pub s_max: f64,
    pub s_steps: usize,
    pub t_min: f64,
    pub t_max: f64,
    pub t_steps: usize,
    pub z_min: f64,
    pub z_max: f64,
    pub z_steps: usize,

    pub p_max: u32,
    pub l_max: u32,

    /// Treat `q` as a fourth unknown in the ℜ map.
    pub estimate_q: bool,
    /// Add grid-computed CFI columns to the sweep.
    pub numeric: bool,
    /// Repeat grid computations on a refined grid and flag disagreement.
    pub refine: bool,
    /// Separation scale for `limit-check`.
    pub epsilon: f64,
    /// Run the whole validation lattice rather than its quick subset.
    pub full: bool,

    pub output: Option<PathBuf>,
    pub format: Option<Format>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            beam: BeamKind::Gaussian,
            w0: 100e-6,
            lambda: 0.5e-6,
            p: 0,
            l: 0,
            nx: 256,
            ny: 256,
            half_width: None,
            method: Method::ClosedForm,
            x0: 0.0,
            s: 1.0,
            z0: 0.0,
            t: 0.5,
            q: 0.5,
            s_min: 0.0,
            s_max: 2.0,
            s_steps: 50,
            t_min: 0.0,
            t_max: 2.0,
            t_steps: 50,
            z_min: -3.0,
            z_max: 3.0,
            z_steps: 301,
            p_max: 3,
            l_max: 3,
            estimate_q: false,
            numeric: true,
            refine: false,
            epsilon: 1e-5,
            full: false,
            output: None,
            format: None,
        }
    }
}

fn is_false(b: &bool) -> bool {
    !*b
}

/// Command-line overrides. Every flag left unset falls through to the
/// config file, then to the defaults.
#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct ConfigArgs {
    /// Flat JSON file with any of the keys below
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beam: Option<BeamKind>,
    /// Waist radius [m]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w0: Option<f64>,
    /// Wavelength [m]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    /// Radial index of the LG mode
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<u32>,
    /// Azimuthal index of the LG mode
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l: Option<i32>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nx: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ny: Option<usize>,
    /// Window half-width [w0]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub half_width: Option<f64>,

    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<Method>,
    /// Transverse centroid [w0]
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<f64>,
    /// Transverse separation [w0]
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    /// Longitudinal centroid [z_r]
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z0: Option<f64>,
    /// Longitudinal separation [z_r]
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    /// Relative intensity of emitter 1
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,

    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_max: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_steps: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_steps: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z_max: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z_steps: Option<usize>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_max: Option<u32>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l_max: Option<u32>,

    /// Include q among the unknowns of the ℜ map
    #[arg(long)]
    #[serde(skip_serializing_if = "is_false")]
    pub estimate_q: bool,
    /// Skip the grid-computed CFI columns
    #[arg(long)]
    #[serde(skip)]
    pub no_numeric: bool,
    /// Cross-check grid results on a twice finer grid
    #[arg(long)]
    #[serde(skip_serializing_if = "is_false")]
    pub refine: bool,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// Run the whole validation lattice
    #[arg(long)]
    #[serde(skip_serializing_if = "is_false")]
    pub full: bool,

    /// Output file; stdout when absent
    #[arg(long, short)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
}

impl ConfigArgs {
    /// Defaults, overlaid by the config file, overlaid by the flags.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut merged = match &self.config {
            Some(path) => read_flat(path)?,
            None => Map::new(),
        };
        let Value::Object(flags) = serde_json::to_value(self)? else {
            unreachable!("flags serialize to an object");
        };
        merged.extend(flags);
        if self.no_numeric {
            merged.insert("numeric".into(), Value::Bool(false));
        }
        let cfg: RunConfig = serde_json::from_value(Value::Object(merged))
            .map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn read_flat(path: &Path) -> Result<Map<String, Value>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    match serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
    {
        Value::Object(map) => {
            if let Some((key, _)) = map.iter().find(|(_, v)| v.is_object() || v.is_array()) {
                return Err(CliError::Config(format!(
                    "{}: key `{key}` is nested; the config file is flat",
                    path.display()
                )));
            }
            Ok(map)
        }
        _ => Err(CliError::Config(format!(
            "{}: expected a JSON object",
            path.display()
        ))),
    }
}

fn bad(msg: String) -> CliError {
    CliError::Config(msg)
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.w0 > 0.0 && self.w0.is_finite()) {
            return Err(bad(format!("w0 must be positive, got {}", self.w0)));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(bad(format!("lambda must be positive, got {}", self.lambda)));
        }
        if self.beam == BeamKind::Gaussian && (self.p != 0 || self.l != 0) {
            return Err(bad("p and l only apply to --beam lg".into()));
        }
        if let Some(h) = self.half_width {
            if !(h > 0.0 && h.is_finite()) {
                return Err(bad(format!("half_width must be positive, got {h}")));
            }
        }
        if !(self.q > 0.0 && self.q < 1.0) {
            return Err(bad(format!("q must lie in (0, 1), got {}", self.q)));
        }
        for (name, v) in [
            ("x0", self.x0),
            ("s", self.s),
            ("z0", self.z0),
            ("t", self.t),
        ] {
            if !v.is_finite() {
                return Err(bad(format!("{name} must be finite")));
            }
        }
        for (name, lo, hi, n) in [
            ("s", self.s_min, self.s_max, self.s_steps),
            ("t", self.t_min, self.t_max, self.t_steps),
            ("z", self.z_min, self.z_max, self.z_steps),
        ] {
            if n == 0 {
                return Err(bad(format!("{name}_steps must be at least 1")));
            }
            if !(lo.is_finite() && hi.is_finite()) || lo > hi || (n > 1 && lo == hi) {
                return Err(bad(format!("{name} range [{lo}, {hi}] is empty")));
            }
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(bad(format!(
                "epsilon must lie in (0, 1), got {}",
                self.epsilon
            )));
        }
        Ok(())
    }

    pub fn spec(&self) -> Result<BeamSpec, CliError> {
        Ok(match self.beam {
            BeamKind::Gaussian => BeamSpec::gaussian(self.w0, self.lambda)?,
            BeamKind::Lg => BeamSpec::laguerre_gauss(self.w0, self.lambda, self.p, self.l)?,
        })
    }

    /// Grid holding every emitter within `|x| ≤ max_x`, `|z| ≤ max_z`
    /// (metres), or the configured window if one is set.
    pub fn grid(&self, spec: &BeamSpec, max_x: f64, max_z: f64) -> Result<Arc<Grid>, CliError> {
        Ok(match self.half_width {
            Some(h) => {
                let half = h * spec.w0;
                Grid::new(
                    self.nx,
                    self.ny,
                    2.0 * half / self.nx as f64,
                    2.0 * half / self.ny as f64,
                )?
            }
            None if self.nx == self.ny => grid_for(spec, self.nx, max_x, max_z)?,
            None => {
                let half = grid_for(spec, self.nx, max_x, max_z)?.half_width_x();
                Grid::new(
                    self.nx,
                    self.ny,
                    2.0 * half / self.nx as f64,
                    2.0 * half / self.ny as f64,
                )?
            }
        })
    }
}

/// `n` evenly spaced points over `[lo, hi]`; `lo` alone when `n = 1`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}
