//! JSON run configuration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::spectral::Grid1D;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BottomKind {
    Flat,
    Cosine,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BottomConfig {
    #[serde(rename = "type")]
    pub kind: BottomKind,
    #[serde(default)]
    pub amplitude: f64,
    #[serde(default = "default_mode")]
    pub mode: u32,
}

fn default_mode() -> u32 {
    1
}

impl Default for BottomConfig {
    fn default() -> Self {
        BottomConfig { kind: BottomKind::Flat, amplitude: 0.0, mode: 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub rho1: f64,
    pub rho2: f64,
    pub h1: f64,
    pub h2: f64,
    pub g: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub p_list: Vec<u32>,
    #[serde(rename = "L")]
    pub length: f64,
    #[serde(rename = "M")]
    pub points: usize,
    #[serde(default)]
    pub bottom: BottomConfig,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default = "default_cg_tol")]
    pub cg_tol: f64,
    #[serde(default = "default_cg_max_iter")]
    pub cg_max_iter: usize,
    /// Non-cavitation threshold; `None` resolves to `0.01·min(h1, h2)`.
    #[serde(default)]
    pub h_min: Option<f64>,
    #[serde(default)]
    pub margin_min: f64,
    #[serde(default = "default_output_every")]
    pub output_every: usize,
}

fn default_dt() -> f64 {
    0.01
}
fn default_t_end() -> f64 {
    1.0
}
pub fn default_cg_tol() -> f64 {
    1e-10
}
pub fn default_cg_max_iter() -> usize {
    500
}
fn default_output_every() -> usize {
    10
}

/// Built-in run used when no config file is given.
impl Default for Config {
    fn default() -> Self {
        Config {
            rho1: 1.0,
            rho2: 2.0,
            h1: 1.0,
            h2: 3.0,
            g: 9.81,
            n: 1,
            p_list: vec![0, 2],
            length: 20.0,
            points: 64,
            bottom: BottomConfig::default(),
            dt: default_dt(),
            t_end: default_t_end(),
            epsilon: 0.0,
            cg_tol: default_cg_tol(),
            cg_max_iter: default_cg_max_iter(),
            h_min: None,
            margin_min: 0.0,
            output_every: default_output_every(),
        }
    }
}

impl Config {
    /// Parse and validate. Error messages name the offending key and position.
    pub fn from_json_str(text: &str) -> Result<Config> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Config = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            if path.is_empty() || path == "." {
                Error::Config(inner.to_string())
            } else {
                Error::Config(format!("key `{path}`: {inner}"))
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Config> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    /// Copy with every optional value filled in.
    pub fn resolved(&self) -> Config {
        let mut c = self.clone();
        c.h_min = Some(self.h_min_value());
        c
    }

    pub fn h_min_value(&self) -> f64 {
        self.h_min.unwrap_or(0.01 * self.h1.min(self.h2))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: String| Err(Error::Config(format!("key `{key}`: {msg}")));
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad("dt", format!("must be positive, got {}", self.dt));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return bad("t_end", format!("must be non-negative, got {}", self.t_end));
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return bad("epsilon", format!("must be non-negative, got {}", self.epsilon));
        }
        if !(self.cg_tol.is_finite() && self.cg_tol > 0.0) {
            return bad("cg_tol", format!("must be positive, got {}", self.cg_tol));
        }
        if self.cg_max_iter == 0 {
            return bad("cg_max_iter", "must be at least 1".into());
        }
        if let Some(h) = self.h_min {
            if !(h.is_finite() && h > 0.0) {
                return bad("h_min", format!("must be positive, got {h}"));
            }
        }
        if !self.margin_min.is_finite() {
            return bad("margin_min", "must be finite".into());
        }
        if self.output_every == 0 {
            return bad("output_every", "must be at least 1".into());
        }
        if !self.bottom.amplitude.is_finite() {
            return bad("bottom.amplitude", "must be finite".into());
        }
        self.grid().map_err(|e| Error::Config(e.to_string()))?;
        self.model_params().map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid1D> {
        Grid1D::new(self.length, self.points)
    }

    pub fn bottom_field(&self, grid: &Grid1D) -> Vec<f64> {
        match self.bottom.kind {
            BottomKind::Flat => vec![0.0; grid.points],
            BottomKind::Cosine => {
                let k = grid.wavenumber(self.bottom.mode as i64);
                let a = self.bottom.amplitude;
                grid.sample(|x| a * (k * x).cos())
            }
        }
    }

    pub fn model_params(&self) -> Result<ModelParams> {
        let grid = self.grid()?;
        if self.bottom.kind == BottomKind::Cosine && (self.bottom.mode == 0 || 2 * self.bottom.mode as usize >= grid.points) {
            return Err(Error::InvalidParams(format!(
                "bottom mode {} must lie in 1..{}",
                self.bottom.mode,
                grid.points / 2
            )));
        }
        ModelParams::new(
            self.rho1,
            self.rho2,
            self.h1,
            self.h2,
            self.g,
            self.n,
            self.p_list.clone(),
            self.bottom_field(&grid),
        )
    }

    pub fn solver_options(&self) -> crate::elliptic::SolverOptions {
        crate::elliptic::SolverOptions { cg_tol: self.cg_tol, cg_max_iter: self.cg_max_iter }
    }
}
