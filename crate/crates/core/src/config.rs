//! Run configuration, read from TOML.

use std::path::PathBuf;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::backlund::BtParams;
use crate::curve::DEFAULT_TAIL_THRESHOLD;
use crate::error::{Error, Result};
use crate::lift::{BranchPolicy, LiftOptions};
use crate::nls::{step_count, NlsOptions, NlsScheme};
use crate::spectral::PeriodicGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VfeRoute {
    /// Antidifferentiate the Schrödinger curve.
    #[default]
    Flow,
    /// h-frame lift and the Sym formula; `curve` names a filament.
    Sym,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BacklundConfig {
    /// Pole `α` as `[re, im]`.
    pub alpha: [f64; 2],
    /// Line `V` as `[[re, im], [re, im]]`.
    pub v: [[f64; 2]; 2],
    /// Evaluation parameter; defaults to `−c₀` of the lift.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda0: Option<f64>,
}

impl Default for BacklundConfig {
    fn default() -> Self {
        Self { alpha: [1.0, -1.0], v: [[1.0, 0.0], [0.0, 1.0]], lambda0: None }
    }
}

impl BacklundConfig {
    pub fn params(&self, c0: f64) -> Result<BtParams> {
        let c = |p: [f64; 2]| C64::new(p[0], p[1]);
        BtParams::new(c(self.alpha), [c(self.v[0]), c(self.v[1])], self.lambda0.unwrap_or(-c0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VfeConfig {
    pub route: VfeRoute,
    /// Step of the central difference in `λ` (Sym route).
    pub delta: f64,
}

impl Default for VfeConfig {
    fn default() -> Self {
        Self { route: VfeRoute::Flow, delta: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Library curve name or path to a sample file.
    pub curve: String,
    pub n: usize,
    pub dt: f64,
    pub t_final: f64,
    /// Number of output intervals between `output_from` and `t_final`; the
    /// interval is rounded down to whole steps and the last step is always
    /// kept.
    pub snapshots: usize,
    pub output_from: f64,
    pub scheme: NlsScheme,
    pub tol_fp: f64,
    pub max_iter: usize,
    pub dealias: bool,
    pub branch: BranchPolicy,
    pub tail_threshold: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub backlund: Option<BacklundConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vfe: Option<VfeConfig>,
    pub output: PathBuf,
    /// Leave wall-clock data out of the manifest.
    pub deterministic: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            curve: "great_circle".into(),
            n: 512,
            dt: 1e-3,
            t_final: 0.1,
            snapshots: 4,
            output_from: 0.0,
            scheme: NlsScheme::SplitStep,
            tol_fp: 1e-12,
            max_iter: 50,
            dealias: false,
            branch: BranchPolicy::Projective,
            tail_threshold: DEFAULT_TAIL_THRESHOLD,
            backlund: None,
            vfe: None,
            output: PathBuf::from("out"),
            deterministic: true,
        }
    }
}

impl RunConfig {
    /// Parses and validates; parse errors carry the line and key.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string().trim().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration always serializes")
    }

    pub fn grid(&self) -> Result<PeriodicGrid> {
        PeriodicGrid::new(self.n)
    }

    pub fn steps(&self) -> Result<usize> {
        step_count(self.t_final, self.dt)
    }

    /// Steps between outputs and the first output step.
    pub fn output_stride(&self) -> Result<(usize, usize)> {
        let steps = self.steps()?;
        let first = if self.output_from > 0.0 { step_count(self.output_from, self.dt)? } else { 0 };
        if first > steps {
            return Err(Error::InvalidConfig("output_from is past t_final".into()));
        }
        let stride = ((steps - first) / self.snapshots).max(1);
        if first % stride != 0 {
            return Err(Error::InvalidConfig("output_from must be a multiple of the snapshot interval".into()));
        }
        Ok((stride, first))
    }

    pub fn validate(&self) -> Result<()> {
        self.grid()?;
        if !(self.dt > 0.0) || !(self.t_final >= self.dt) {
            return Err(Error::InvalidConfig(format!("need 0 < dt <= t_final, got dt = {}, t_final = {}", self.dt, self.t_final)));
        }
        if self.snapshots == 0 {
            return Err(Error::InvalidConfig("snapshots must be at least 1".into()));
        }
        if !(self.tol_fp > 0.0) || self.max_iter == 0 {
            return Err(Error::InvalidConfig("fixed-point tolerance and iteration cap must be positive".into()));
        }
        if !(self.tail_threshold > 0.0) {
            return Err(Error::InvalidConfig("tail_threshold must be positive".into()));
        }
        if let Some(v) = &self.vfe {
            if !(v.delta > 0.0) {
                return Err(Error::InvalidConfig("vfe.delta must be positive".into()));
            }
        }
        if let Some(b) = &self.backlund {
            b.params(0.0)?;
        }
        self.output_stride()?;
        Ok(())
    }

    pub fn nls_options(&self) -> NlsOptions {
        NlsOptions { scheme: self.scheme, tol_fp: self.tol_fp, max_iter: self.max_iter, dealias: self.dealias }
    }

    pub fn lift_options(&self) -> LiftOptions {
        LiftOptions { branch: self.branch, tail_threshold: self.tail_threshold, ..LiftOptions::default() }
    }
}

/// Names accepted by [`demo_config`].
pub const DEMOS: [&str; 7] = ["great_circle", "energy", "viviani", "sinusoid", "sinusoid_late", "backlund", "smoke_ring"];

/// Named preset runs.
pub fn demo_config(name: &str) -> Result<RunConfig> {
    let base = RunConfig::default();
    let cfg = match name {
        "great_circle" => RunConfig { n: 512, dt: 1e-3, t_final: 0.1, snapshots: 10, ..base },
        "energy" => RunConfig { n: 1024, dt: 1e-4, t_final: 0.5, snapshots: 10, ..base },
        "viviani" => RunConfig { curve: "viviani".into(), n: 1024, dt: 1e-3, t_final: 2.0, ..base },
        "sinusoid" => RunConfig { curve: "spherical_sinusoid".into(), n: 1024, dt: 0.01, t_final: 4.0, ..base },
        "sinusoid_late" => RunConfig {
            curve: "spherical_sinusoid".into(),
            n: 1024,
            dt: 0.01,
            t_final: 3.3,
            output_from: 3.1,
            ..base
        },
        "backlund" => RunConfig { n: 256, dt: 0.01, t_final: 4.0, backlund: Some(BacklundConfig::default()), ..base },
        "smoke_ring" => RunConfig {
            curve: "smoke_ring".into(),
            n: 256,
            dt: 1e-3,
            t_final: 2.0,
            vfe: Some(VfeConfig { route: VfeRoute::Sym, ..VfeConfig::default() }),
            ..base
        },
        other => return Err(Error::InvalidConfig(format!("unknown demo '{other}'; expected one of {}", DEMOS.join(", ")))),
    };
    let cfg = RunConfig { output: PathBuf::from(format!("out/{name}")), ..cfg };
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn round_trip() {
        let cfg = RunConfig {
            backlund: Some(BacklundConfig::default()),
            vfe: Some(VfeConfig { route: VfeRoute::Sym, delta: 2e-4 }),
            ..RunConfig::default()
        };
        let text = cfg.to_toml_string();
        assert_eq!(RunConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn parse_partial() {
        let cfg = RunConfig::from_toml_str("curve = \"viviani\"\nn = 1024\nt_final = 2.0\nscheme = \"implicit_spectral\"\n").unwrap();
        assert_eq!(cfg.n, 1024);
        assert_eq!(cfg.scheme, NlsScheme::ImplicitSpectral);
        assert_eq!(cfg.output_stride().unwrap(), (500, 0));
    }

    #[test]
    fn errors_name_line_and_key() {
        let e = RunConfig::from_toml_str("n = 64\nbogus = 1\n").unwrap_err();
        let msg = e.to_string();
        assert!(matches!(e, Error::InvalidConfig(_)));
        assert!(msg.contains("bogus") && msg.contains('2'), "{msg}");
        let e = RunConfig::from_toml_str("dt = \"fast\"\n").unwrap_err();
        assert!(e.to_string().contains("dt"), "{e}");
    }

    #[test]
    fn invalid_values() {
        assert!(matches!(RunConfig::from_toml_str("n = 100"), Err(Error::InvalidGrid(100))));
        assert!(RunConfig::from_toml_str("dt = 0.0").is_err());
        assert!(RunConfig::from_toml_str("dt = 0.1\nt_final = 0.05").is_err());
        assert!(RunConfig::from_toml_str("snapshots = 0").is_err());
        assert!(RunConfig::from_toml_str("output_from = 0.2").is_err());
        assert!(RunConfig::from_toml_str("[backlund]\nalpha = [1.0, 0.0]\nv = [[1.0, 0.0], [0.0, 1.0]]").is_err());
    }

    #[test]
    fn demos_are_valid() {
        for d in DEMOS {
            demo_config(d).unwrap();
        }
        assert!(demo_config("nope").is_err());
    }

    #[test]
    fn late_window() {
        let cfg = RunConfig { dt: 0.01, t_final: 3.3, output_from: 3.1, ..RunConfig::default() };
        assert_eq!(cfg.output_stride().unwrap(), (5, 310));
    }
}
