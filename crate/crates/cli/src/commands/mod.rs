pub mod extract;
pub mod foliation;
pub mod invert;
pub mod pipeline;
pub mod rays;
pub mod simulate;

use std::path::Path;

use anyhow::Context;

use elastic_lens::model::Model;

use crate::stage::{Stage, StageExt};

pub fn load_model(path: &Path) -> anyhow::Result<Model> {
    Model::load(path).with_context(|| format!("loading model {}", path.display())).stage(Stage::Model)
}

/// Prints a value as pretty JSON on stdout.
pub fn print_json(value: &impl serde::Serialize) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}
