//! Configurations shipped with the crate.

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};

const PRESETS: [(&str, &str); 3] = [
    ("bv-t3", include_str!("../presets/bv-t3.toml")),
    ("catxid", include_str!("../presets/catxid.toml")),
    ("linear-only", include_str!("../presets/linear-only.toml")),
];

pub fn names() -> Vec<&'static str> {
    PRESETS.iter().map(|(n, _)| *n).collect()
}

/// The preset file as shipped, comments included.
pub fn source(name: &str) -> Result<&'static str> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, s)| *s)
        .ok_or_else(|| Error::config("preset", format!("unknown preset `{name}`; known: {}", names().join(", "))))
}

pub fn get(name: &str) -> Result<ExperimentConfig> {
    ExperimentConfig::from_toml(source(name)?)
}
