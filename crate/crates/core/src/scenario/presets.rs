use super::config::{ConfigError, ScenarioConfig};

const PRESETS: [(&str, &str); 4] = [
    ("leganes-add", include_str!("../../presets/leganes-add.toml")),
    ("timers-25", include_str!("../../presets/timers-25.toml")),
    ("ctd-1000", include_str!("../../presets/ctd-1000.toml")),
    ("routing-3mrp", include_str!("../../presets/routing-3mrp.toml")),
];

pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}

/// TOML text of a bundled preset.
pub fn preset_source(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

/// Parse and validate a bundled preset.
pub fn preset(name: &str) -> Result<ScenarioConfig, ConfigError> {
    let src = preset_source(name).ok_or_else(|| ConfigError::UnknownPreset(name.to_string()))?;
    let cfg = ScenarioConfig::from_toml_str(src)?;
    cfg.check()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_validates() {
        for name in preset_names() {
            let cfg = preset(name).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(cfg.name, name);
        }
    }

    #[test]
    fn unknown_preset() {
        assert!(matches!(preset("nope"), Err(ConfigError::UnknownPreset(_))));
    }
}
