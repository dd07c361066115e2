//! Experiment configuration.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    build_sphere_array, build_spheroid_array, spheroid_from_radii, ArrayGeometry, Axis, PlaneWave, ProlateParams,
};
use crate::sim::{required_table_order, CaseSpec, GridSpec};
use crate::swf::PrecisionMode;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SphereConfig {
    pub radius: f64,
    pub n_theta: usize,
    pub n_phi: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpheroidConfig {
    pub r_long: f64,
    pub r_short: f64,
    pub n_eta: usize,
    pub n_phi: usize,
    pub long_axis: Axis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Incidence {
    pub name: String,
    /// Propagation direction, normalized on load.
    pub direction: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub frequency_hz: f64,
    pub sound_speed: f64,
    /// Encoding order `N`.
    pub order: usize,
    /// Tikhonov weight.
    pub sigma: f64,
    /// Upper spheroidal degree summed when transcoding.
    pub n_sum: usize,
    pub threshold_db: f64,
    pub sphere: SphereConfig,
    pub spheroid: SpheroidConfig,
    pub incidences: Vec<Incidence>,
    pub grid: GridSpec,
    pub precision: PrecisionMode,
    pub cache_dir: Option<String>,
    pub output_dir: Option<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            frequency_hz: 541.8,
            sound_speed: 343.0,
            order: 12,
            sigma: 0.0,
            n_sum: 12,
            threshold_db: 30.0,
            sphere: SphereConfig {
                radius: 0.198,
                n_theta: 16,
                n_phi: 32,
            },
            spheroid: SpheroidConfig {
                r_long: 1.0,
                r_short: 0.05,
                n_eta: 16,
                n_phi: 32,
                long_axis: Axis::X,
            },
            incidences: vec![
                Incidence {
                    name: "fig2".into(),
                    direction: [1.0, 0.0, 0.0],
                },
                Incidence {
                    name: "fig3".into(),
                    direction: [0.0, 1.0, 0.0],
                },
                Incidence {
                    name: "fig4".into(),
                    direction: [h, h, 0.0],
                },
            ],
            grid: GridSpec::default(),
            precision: PrecisionMode::Double,
            cache_dir: None,
            output_dir: None,
        }
    }
}

fn config_error(key: &str, message: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_string(),
        message: message.into(),
    }
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(config_error(key, format!("must be positive, got {v}")))
    }
}

fn nonzero(key: &str, v: usize) -> Result<()> {
    if v > 0 {
        Ok(())
    } else {
        Err(config_error(key, "must be at least 1"))
    }
}

impl ExperimentConfig {
    /// One of the built-in single-incidence presets `fig2`, `fig3`, `fig4`.
    pub fn preset(name: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let Some(inc) = cfg.incidences.iter().find(|i| i.name == name).cloned() else {
            return Err(config_error(
                "preset",
                format!("unknown preset `{name}`, expected fig2, fig3 or fig4"),
            ));
        };
        cfg.incidences = vec![inc];
        Ok(cfg)
    }

    /// Parses JSON; unknown keys, type errors and invalid values name the key.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let mut cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            config_error(&path, e.into_inner().to_string())
        })?;
        cfg.normalize()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    /// Checks every physical quantity and normalizes incidence directions.
    pub fn normalize(&mut self) -> Result<()> {
        positive("frequency_hz", self.frequency_hz)?;
        positive("sound_speed", self.sound_speed)?;
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(config_error("sigma", format!("must be nonnegative, got {}", self.sigma)));
        }
        if self.n_sum < self.order {
            return Err(config_error(
                "n_sum",
                format!("must be at least order = {}, got {}", self.order, self.n_sum),
            ));
        }
        if !self.threshold_db.is_finite() {
            return Err(config_error("threshold_db", "must be finite"));
        }
        positive("sphere.radius", self.sphere.radius)?;
        nonzero("sphere.n_theta", self.sphere.n_theta)?;
        nonzero("sphere.n_phi", self.sphere.n_phi)?;
        positive("spheroid.r_short", self.spheroid.r_short)?;
        if !(self.spheroid.r_long > self.spheroid.r_short) {
            return Err(config_error(
                "spheroid.r_long",
                format!(
                    "must exceed r_short = {}, got {}",
                    self.spheroid.r_short, self.spheroid.r_long
                ),
            ));
        }
        nonzero("spheroid.n_eta", self.spheroid.n_eta)?;
        nonzero("spheroid.n_phi", self.spheroid.n_phi)?;
        self.grid
            .validate()
            .map_err(|e| config_error("grid", e.to_string()))?;
        if self.incidences.is_empty() {
            return Err(config_error("incidences", "at least one incidence is required"));
        }
        for (i, inc) in self.incidences.iter_mut().enumerate() {
            let n = inc.direction.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !(n > 0.0) || !n.is_finite() {
                return Err(config_error(
                    &format!("incidences[{i}].direction"),
                    "must be a nonzero finite vector",
                ));
            }
            for v in inc.direction.iter_mut() {
                *v /= n;
            }
        }
        Ok(())
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.frequency_hz / self.sound_speed
    }

    pub fn spheroid_params(&self) -> Result<ProlateParams> {
        spheroid_from_radii(self.spheroid.r_long, self.spheroid.r_short)
    }

    /// Spheroidal parameter `c = k a`.
    pub fn spheroidal_c(&self) -> Result<f64> {
        Ok(self.wavenumber() * self.spheroid_params()?.a)
    }

    /// Highest degree of spheroidal tables the experiment needs.
    pub fn table_order(&self) -> usize {
        required_table_order(self.order, self.n_sum)
    }

    pub fn sphere_array(&self) -> Result<ArrayGeometry> {
        build_sphere_array(self.sphere.radius, self.sphere.n_theta, self.sphere.n_phi)
    }

    pub fn spheroid_array(&self) -> Result<ArrayGeometry> {
        build_spheroid_array(
            self.spheroid_params()?,
            self.spheroid.n_eta,
            self.spheroid.n_phi,
            self.spheroid.long_axis,
        )
    }

    pub fn wave(&self, incidence: &Incidence) -> Result<PlaneWave> {
        PlaneWave::new(self.frequency_hz, self.sound_speed, incidence.direction)
    }

    pub fn cases(&self) -> Result<Vec<CaseSpec>> {
        let sphere = self.sphere_array()?;
        let spheroid = self.spheroid_array()?;
        self.incidences
            .iter()
            .map(|inc| {
                Ok(CaseSpec {
                    name: inc.name.clone(),
                    wave: self.wave(inc)?,
                    sphere: sphere.clone(),
                    spheroid: spheroid.clone(),
                    order: self.order,
                    sigma: self.sigma,
                    n_sum: self.n_sum,
                    grid: self.grid,
                    threshold_db: self.threshold_db,
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = ExperimentConfig::default();
        let back = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
        assert!((cfg.spheroidal_c().unwrap() - 9.912_45).abs() < 1e-4);
    }

    #[test]
    fn presets() {
        let cfg = ExperimentConfig::preset("fig3").unwrap();
        assert_eq!(cfg.incidences.len(), 1);
        assert_eq!(cfg.incidences[0].direction, [0.0, 1.0, 0.0]);
        assert!(ExperimentConfig::preset("fig9").is_err());
    }

    #[test]
    fn errors_name_the_key() {
        let err = ExperimentConfig::from_json(r#"{"order": 12, "bogus": 1}"#).unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
        let err = ExperimentConfig::from_json(r#"{"sphere": {"radius": "big", "n_theta": 1, "n_phi": 1}}"#).unwrap_err();
        assert!(err.to_string().contains("sphere.radius"), "{err}");
        let err = ExperimentConfig::from_json(r#"{"frequency_hz": -3}"#).unwrap_err();
        assert!(err.to_string().contains("frequency_hz"), "{err}");
        let err = ExperimentConfig::from_json(r#"{"n_sum": 4}"#).unwrap_err();
        assert!(err.to_string().contains("n_sum"), "{err}");
    }

    #[test]
    fn directions_are_normalized() {
        let cfg = ExperimentConfig::from_json(r#"{"incidences": [{"name": "a", "direction": [3, 4, 0]}]}"#).unwrap();
        assert_eq!(cfg.incidences[0].direction, [0.6, 0.8, 0.0]);
    }
}
