//! Experiment configuration: a TOML file selecting the web, the sampling
//! box and the numerical controls.

use serde::{Deserialize, Serialize};
use weblab_core::conics::{ConfocalFamily, Slope};
use weblab_core::rank::{
    confocal_bipolar_transforms, confocal_cartesian_transforms, six_web_transforms,
    CollocationConfig, Transform,
};
use weblab_core::web::{SampleBox, Web};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WebKind {
    Cartesian,
    Bipolar,
    Tangent,
    Sixweb,
    Custom,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FamilyConfig {
    pub a2: f64,
    pub b2: f64,
}

impl Default for FamilyConfig {
    fn default() -> Self {
        Self { a2: 2.0, b2: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BoxConfig {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl Default for BoxConfig {
    fn default() -> Self {
        Self {
            xmin: 0.3,
            xmax: 2.5,
            ymin: 0.3,
            ymax: 2.0,
        }
    }
}

impl From<BoxConfig> for SampleBox {
    fn from(b: BoxConfig) -> Self {
        SampleBox::new(b.xmin, b.xmax, b.ymin, b.ymax)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CollocationSection {
    pub degree: Option<usize>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_gap")]
    pub gap_threshold: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Per-foliation integral transforms; defaults adapted to the kind.
    pub transforms: Option<Vec<Transform>>,
}

fn default_samples() -> usize {
    800
}
fn default_gap() -> f64 {
    1e3
}
fn default_seed() -> u64 {
    42
}

impl Default for CollocationSection {
    fn default() -> Self {
        Self {
            degree: None,
            samples: default_samples(),
            gap_threshold: default_gap(),
            seed: default_seed(),
            transforms: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Tolerances {
    #[serde(default = "default_ode")]
    pub ode: f64,
    #[serde(default = "default_fit")]
    pub fit: f64,
    #[serde(default = "default_incidence")]
    pub incidence: f64,
}

fn default_ode() -> f64 {
    1e-10
}
fn default_fit() -> f64 {
    1e-6
}
fn default_incidence() -> f64 {
    1e-5
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            ode: default_ode(),
            fit: default_fit(),
            incidence: default_incidence(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct CustomSection {
    /// Slopes of parallel-line pencils; the string "vertical" denotes the
    /// vertical pencil.
    pub slopes: Vec<toml::Value>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: WebKind,
    #[serde(default)]
    pub family: FamilyConfig,
    /// Pencil parameter of the tangent member (tangent kind only).
    #[serde(default)]
    pub lambda0: f64,
    #[serde(rename = "box", default)]
    pub bbox: BoxConfig,
    #[serde(default = "default_margin")]
    pub margin: f64,
    /// Inner sampling box used by the rank suite; defaults per kind keep
    /// the collocation spectra well conditioned on the standard box.
    pub rank_box: Option<BoxConfig>,
    #[serde(default)]
    pub collocation: CollocationSection,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub custom: CustomSection,
}

fn default_margin() -> f64 {
    0.05
}

impl ExperimentConfig {
    pub fn defaults_for(kind: WebKind) -> Self {
        Self {
            kind,
            family: FamilyConfig::default(),
            lambda0: 0.0,
            bbox: BoxConfig::default(),
            margin: default_margin(),
            rank_box: None,
            collocation: CollocationSection::default(),
            tolerances: Tolerances::default(),
            custom: CustomSection::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, String> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| format!("config parse error: {e}"))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.family.a2 > self.family.b2 && self.family.b2 > 0.0) {
            return Err(format!(
                "family requires a2 > b2 > 0, got a2 = {}, b2 = {}",
                self.family.a2, self.family.b2
            ));
        }
        if self.bbox.xmin >= self.bbox.xmax || self.bbox.ymin >= self.bbox.ymax {
            return Err("box must have positive extent".into());
        }
        if self.kind == WebKind::Tangent {
            let l = self.lambda0;
            let ok = l < self.family.b2
                || (self.family.b2 < l && l < self.family.a2);
            if !ok {
                return Err(format!(
                    "lambda0 = {l} is degenerate for the family (needs lambda0 < b2 or b2 < lambda0 < a2)"
                ));
            }
        }
        if self.kind == WebKind::Custom && self.custom.slopes.len() < 2 {
            return Err("custom webs need at least two slopes".into());
        }
        Ok(())
    }

    pub fn family(&self) -> ConfocalFamily {
        ConfocalFamily::new(self.family.a2, self.family.b2).expect("validated family")
    }

    pub fn sample_box(&self) -> SampleBox {
        self.bbox.into()
    }

    /// Sampling box for the rank suite.
    pub fn rank_sample_box(&self) -> SampleBox {
        if let Some(b) = self.rank_box {
            return b.into();
        }
        match self.kind {
            // inner box keeping the confocal parameters clear of their
            // degenerate values, which conditions the density spectra
            WebKind::Cartesian | WebKind::Bipolar | WebKind::Sixweb => {
                SampleBox::new(0.5, 2.2, 0.5, 1.6)
            }
            _ => self.sample_box(),
        }
    }

    /// Base collocation degree for the kind.
    pub fn rank_degree(&self) -> usize {
        self.collocation.degree.unwrap_or(match self.kind {
            WebKind::Bipolar => 12,
            _ => 8,
        })
    }

    /// Transforms adapted to the kind.
    pub fn rank_transforms(&self) -> Vec<Transform> {
        if let Some(t) = &self.collocation.transforms {
            return t.clone();
        }
        let (a2, b2) = (self.family.a2, self.family.b2);
        match self.kind {
            WebKind::Cartesian => confocal_cartesian_transforms(a2, b2),
            WebKind::Bipolar => confocal_bipolar_transforms(a2, b2),
            WebKind::Sixweb => six_web_transforms(a2, b2),
            WebKind::Tangent | WebKind::Custom => Vec::new(),
        }
    }

    pub fn collocation_config(&self) -> CollocationConfig {
        CollocationConfig {
            degree: self.rank_degree(),
            samples: self.collocation.samples,
            gap_threshold: self.collocation.gap_threshold,
            seed: self.collocation.seed,
            transforms: self.rank_transforms(),
        }
    }

    /// Build the web of this configuration over the given box.
    pub fn build_web_over(&self, bbox: SampleBox) -> Result<Web, String> {
        let fam = self.family();
        match self.kind {
            WebKind::Cartesian => Ok(Web::confocal_cartesian(fam, bbox, self.margin)),
            WebKind::Bipolar => Ok(Web::confocal_bipolar(fam, bbox, self.margin)),
            WebKind::Sixweb => Ok(Web::six_web(fam, bbox, self.margin)),
            WebKind::Tangent => Web::confocal_tangent(fam, self.lambda0, bbox, self.margin)
                .map_err(|e| e.to_string()),
            WebKind::Custom => {
                let mut fols = Vec::new();
                for v in &self.custom.slopes {
                    let slope = match v {
                        toml::Value::String(s) if s == "vertical" => Slope::Vertical,
                        toml::Value::Float(m) => Slope::Finite(*m),
                        toml::Value::Integer(m) => Slope::Finite(*m as f64),
                        other => return Err(format!("bad slope entry: {other}")),
                    };
                    fols.push(weblab_core::web::Foliation::parallel_lines(slope));
                }
                Ok(Web::new(
                    fols,
                    weblab_core::web::Domain::plain(bbox),
                ))
            }
        }
    }

    pub fn build_web(&self) -> Result<Web, String> {
        self.build_web_over(self.sample_box())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_round_trips_through_toml() {
        let cfg = ExperimentConfig::defaults_for(WebKind::Cartesian);
        let text = toml::to_string(&cfg).unwrap();
        let back = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(back.kind, WebKind::Cartesian);
        assert_eq!(back.collocation.seed, 42);
    }

    #[test]
    fn minimal_config_parses() {
        let cfg = ExperimentConfig::from_toml("kind = \"bipolar\"\n").unwrap();
        assert_eq!(cfg.kind, WebKind::Bipolar);
        assert_eq!(cfg.rank_degree(), 12);
        assert_eq!(cfg.bbox.xmax, 2.5);
    }

    #[test]
    fn invalid_family_is_rejected() {
        let err = ExperimentConfig::from_toml("kind = \"cartesian\"\n[family]\na2 = 1.0\nb2 = 2.0\n");
        assert!(err.is_err());
    }

    #[test]
    fn degenerate_lambda0_is_rejected() {
        let err =
            ExperimentConfig::from_toml("kind = \"tangent\"\nlambda0 = 1.0\n");
        assert!(err.is_err());
        let ok = ExperimentConfig::from_toml("kind = \"tangent\"\nlambda0 = 1.5\n");
        assert!(ok.is_ok());
    }
}
