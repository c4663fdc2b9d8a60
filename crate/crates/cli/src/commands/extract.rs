use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};

use elastic_lens::analysis::{extract_lens, ExtractConfig as PickSettings, ExtractionSummary};
use elastic_lens::model::Domain;
use elastic_lens::ray::{LensTable, RayConfig};
use elastic_lens::sim::TractionTrace;

use super::simulate::RunMeta;
use crate::stage::{Stage, StageExt};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractConfig {
    /// Simulation output directory.
    pub traces: Option<PathBuf>,
    /// Lens table of the P speed.
    pub lens: Option<PathBuf>,
    /// Lens table of the S speed.
    pub lens_s: Option<PathBuf>,
    /// Wavelet centre frequency; the recorded source's when absent.
    pub f0: Option<f64>,
    /// Pick threshold relative to the envelope maximum.
    pub eta: f64,
    pub support_level: f64,
    pub ambiguity_periods: f64,
    pub separation_periods: f64,
    pub out: Option<PathBuf>,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        let d = PickSettings::new(1.0, 0.05);
        Self {
            traces: None,
            lens: None,
            lens_s: None,
            f0: None,
            eta: d.pick.eta,
            support_level: d.support_level,
            ambiguity_periods: d.ambiguity_periods,
            separation_periods: d.separation_periods,
            out: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExtractReport {
    pub receivers: usize,
    pub no_pick: usize,
    pub max_rel_err_p: Option<f64>,
    pub max_rel_err_s: Option<f64>,
    pub reference_pick: f64,
}

impl From<&ExtractionSummary> for ExtractReport {
    fn from(s: &ExtractionSummary) -> Self {
        Self {
            receivers: s.records.len(),
            no_pick: s.no_pick,
            max_rel_err_p: s.max_rel_err_p,
            max_rel_err_s: s.max_rel_err_s,
            reference_pick: s.reference_pick,
        }
    }
}

pub fn read_table(path: &Path, domain: &Domain) -> anyhow::Result<LensTable> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    LensTable::from_csv(&text, domain, RayConfig::default()).with_context(|| format!("parsing {}", path.display()))
}

pub fn run(
    meta: &RunMeta,
    traces: &[TractionTrace],
    lens_p: Option<&LensTable>,
    lens_s: Option<&LensTable>,
    cfg: &ExtractConfig,
) -> anyhow::Result<ExtractionSummary> {
    let f0 = cfg.f0.unwrap_or(meta.source.pulse.f0);
    let settings = PickSettings {
        support_level: cfg.support_level,
        ambiguity_periods: cfg.ambiguity_periods,
        separation_periods: cfg.separation_periods,
        ..PickSettings::new(f0, cfg.eta)
    };
    extract_lens(traces, &meta.source, &meta.domain, lens_p, lens_s, &settings).stage(Stage::Extraction)
}
