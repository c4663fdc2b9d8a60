use std::fmt;

/// Pipeline stage a failure belongs to; each maps to its own exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Model,
    Foliation,
    Simulation,
    Extraction,
    Inversion,
}

impl Stage {
    pub fn exit_code(self) -> u8 {
        match self {
            Stage::Config => 2,
            Stage::Model => 3,
            Stage::Foliation => 4,
            Stage::Simulation => 5,
            Stage::Extraction => 6,
            Stage::Inversion => 7,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Stage::Config => "config",
            Stage::Model => "model",
            Stage::Foliation => "foliation",
            Stage::Simulation => "simulation",
            Stage::Extraction => "extraction",
            Stage::Inversion => "inversion",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} stage failed", self.name())
    }
}

/// Tags errors with the stage they belong to.
pub trait StageExt<T> {
    fn stage(self, stage: Stage) -> anyhow::Result<T>;
}

impl<T, E> StageExt<T> for Result<T, E>
where
    E: Into<anyhow::Error>,
{
    fn stage(self, stage: Stage) -> anyhow::Result<T> {
        self.map_err(|e| {
            let e: anyhow::Error = e.into();
            // keep the innermost stage when errors are re-tagged
            if e.downcast_ref::<Stage>().is_some() {
                e
            } else {
                e.context(stage)
            }
        })
    }
}

/// Exit status for an error: its stage, or the config status when untagged.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    err.downcast_ref::<Stage>().map_or(Stage::Config.exit_code(), |s| s.exit_code())
}
