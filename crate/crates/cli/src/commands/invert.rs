use std::path::PathBuf;

use anyhow::{anyhow, Context};
use serde::{Deserialize, Serialize};

use elastic_lens::inversion::{
    compare, herglotz_invert, layer_strip_invert, CompareReport, OffsetCurve, Profile, TravelTimeCurve,
};
use elastic_lens::model::{Mode, Model};

use crate::stage::{Stage, StageExt};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum CurveGeometry {
    /// Epicentral distance on a disk of radius R.
    #[default]
    Radial,
    /// Surface offset over a depth profile.
    Layered,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InvertConfig {
    /// CSV with header `distance,time`.
    pub curve: Option<PathBuf>,
    /// Disk radius for radial curves.
    pub radius: f64,
    pub mode: CurveGeometry,
    /// Surface speed for layer stripping; estimated from the two shortest
    /// offsets when absent.
    pub top_speed: Option<f64>,
    pub out: Option<PathBuf>,
}

impl Default for InvertConfig {
    fn default() -> Self {
        Self { curve: None, radius: 1.0, mode: CurveGeometry::Radial, top_speed: None, out: None }
    }
}

pub fn invert_text(text: &str, cfg: &InvertConfig) -> anyhow::Result<Profile> {
    let profile = match cfg.mode {
        CurveGeometry::Radial => {
            let curve = TravelTimeCurve::from_csv(text).stage(Stage::Config)?;
            herglotz_invert(&curve, cfg.radius).map(Profile::Radial)
        }
        CurveGeometry::Layered => {
            let curve = OffsetCurve::from_csv(text).stage(Stage::Config)?;
            layer_strip_invert(&curve, cfg.top_speed).map(|s| Profile::Depth(s.profile))
        }
    };
    profile.stage(Stage::Inversion)
}

pub fn invert(cfg: &InvertConfig) -> anyhow::Result<Profile> {
    let path = crate::config::required(&cfg.curve, "curve").stage(Stage::Config)?;
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).stage(Stage::Config)?;
    invert_text(&text, cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct CompareConfig {
    /// Recovered profile CSV (`r,c` or `z,c`).
    pub profile: Option<PathBuf>,
    /// Model file with the true speed.
    pub truth: Option<PathBuf>,
    /// Wave mode of a material truth model; its speed when absent.
    pub mode: Option<Mode>,
    pub out: Option<PathBuf>,
}

pub fn compare_with(profile: &Profile, truth: &Model, mode: Option<Mode>) -> anyhow::Result<CompareReport> {
    let speed = truth.speed_for(mode).stage(Stage::Config)?;
    if profile.nodes().is_empty() {
        return Err(anyhow!("profile has no nodes")).stage(Stage::Inversion);
    }
    compare(profile, &speed).stage(Stage::Inversion)
}
