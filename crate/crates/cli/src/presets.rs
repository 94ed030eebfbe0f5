//! Embedded experiment presets.

use crate::config::RunConfig;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Budget {
    Seconds,
    Minutes,
    Stretch,
}

impl Budget {
    pub fn as_str(self) -> &'static str {
        match self {
            Budget::Seconds => "seconds",
            Budget::Minutes => "minutes",
            Budget::Stretch => "stretch",
        }
    }
}

pub struct Preset {
    pub name: &'static str,
    pub budget: Budget,
    pub source: &'static str,
}

macro_rules! preset {
    ($name:literal, $budget:ident) => {
        Preset { name: $name, budget: Budget::$budget, source: include_str!(concat!("../presets/", $name, ".toml")) }
    };
}

pub const PRESETS: &[Preset] = &[
    preset!("fig1b-4x4", Seconds),
    preset!("fig2b", Seconds),
    preset!("fig2c", Minutes),
    preset!("fig3b-4x4", Seconds),
    preset!("figS1", Minutes),
    preset!("figS2", Seconds),
    preset!("figS3", Seconds),
    preset!("figS5", Minutes),
    preset!("figS6", Minutes),
    preset!("honeycomb18", Minutes),
    preset!("honeycomb32", Stretch),
];

impl Preset {
    pub fn config(&self) -> Result<RunConfig, CliError> {
        RunConfig::from_toml(self.source)
    }
}

pub fn find(name: &str) -> Result<&'static Preset, CliError> {
    if let Some(p) = PRESETS.iter().find(|p| p.name == name) {
        return Ok(p);
    }
    let best = PRESETS
        .iter()
        .map(|p| (strsim::levenshtein(&name.to_lowercase(), &p.name.to_lowercase()), p.name))
        .min()
        .map(|(_, n)| n)
        .unwrap_or("fig1b-4x4");
    Err(CliError::Validation(format!("unknown preset '{name}'; did you mean '{best}'?")))
}
