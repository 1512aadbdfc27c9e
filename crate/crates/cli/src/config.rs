//! Scenario files: TOML with unknown keys rejected.

use std::fs;
use std::path::{Path, PathBuf};

use otaform_core::sim::ScenarioConfig;

pub const RUN1: &str = include_str!("../configs/run1.cfg");
pub const RUN2: &str = include_str!("../configs/run2.cfg");
pub const RUN3: &str = include_str!("../configs/run3.cfg");

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{origin}: {source}")]
    Parse { origin: String, source: toml::de::Error },
    #[error("{origin}: {source}")]
    Invalid { origin: String, source: otaform_core::Error },
}

pub fn parse_config(text: &str, origin: &str) -> Result<ScenarioConfig, ConfigError> {
    let config: ScenarioConfig =
        toml::from_str(text).map_err(|source| ConfigError::Parse { origin: origin.into(), source })?;
    config.validate().map_err(|source| ConfigError::Invalid { origin: origin.into(), source })?;
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
    parse_config(&text, &path.display().to_string())
}

/// The three bundled experiments, in order.
pub fn paper_configs() -> [ScenarioConfig; 3] {
    [RUN1, RUN2, RUN3].map(|text| parse_config(text, "bundled config").expect("bundled configs are valid"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_configs_parse() {
        let [a, b, c] = paper_configs();
        assert_eq!((a.name.as_str(), b.name.as_str(), c.name.as_str()), ("run1", "run2", "run3"));
        assert_eq!(a.seed, b.seed);
    }

    #[test]
    fn unknown_keys_are_named() {
        let text = RUN1.replace("radius = 5.0", "radius = 5.0\nwidth = 2.0");
        let err = parse_config(&text, "x").unwrap_err().to_string();
        assert!(err.contains("width"), "{err}");
    }

    #[test]
    fn invalid_values_are_named() {
        let text = RUN1.replace("t_max = 0.1", "t_max = 0.05");
        let err = parse_config(&text, "x").unwrap_err().to_string();
        assert!(err.contains("schedule.t_max") || err.contains("schedule.t_min"), "{err}");
    }
}
