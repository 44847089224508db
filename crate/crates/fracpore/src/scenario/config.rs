//! Scenario (de)serialization: TOML as the primary format (sectioned
//! key = value), JSON accepted as an alternative. Unknown keys are rejected;
//! every parse runs the physical validation.

use std::path::Path;

use super::Scenario;
use crate::error::{FracporeError, Result};

/// Parses a scenario file; the format is decided by the extension
/// (`.json` -> JSON, anything else -> TOML).
pub fn parse_config(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)?;
    let json = path
        .extension()
        .map(|e| e.eq_ignore_ascii_case("json"))
        .unwrap_or(false);
    parse_config_str(&text, json)
}

pub fn parse_config_str(text: &str, json: bool) -> Result<Scenario> {
    let scenario: Scenario = if json {
        serde_json::from_str(text).map_err(|e| FracporeError::Parse(format!("JSON: {e}")))?
    } else {
        toml::from_str(text).map_err(|e| FracporeError::Parse(format!("TOML: {e}")))?
    };
    scenario.validate()?;
    Ok(scenario)
}

/// Serializes a scenario to TOML (SI values).
pub fn dump_config(scenario: &Scenario) -> Result<String> {
    toml::to_string_pretty(scenario).map_err(|e| FracporeError::Parse(format!("TOML dump: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::builtin_scenario;

    #[test]
    fn toml_round_trip_is_identity() {
        for name in ["gas_injection_cross", "tunnel_desaturation"] {
            let s = builtin_scenario(name).unwrap();
            let text = dump_config(&s).unwrap();
            let back = parse_config_str(&text, false).unwrap();
            let text2 = dump_config(&back).unwrap();
            assert_eq!(text, text2, "round trip must be stable for {name}");
        }
    }

    #[test]
    fn json_is_accepted() {
        let s = builtin_scenario("gas_injection_cross").unwrap();
        let json = serde_json::to_string_pretty(&s).unwrap();
        let back = parse_config_str(&json, true).unwrap();
        assert_eq!(back.name, s.name);
        assert_eq!(back.rock.permeability.0, s.rock.permeability.0);
    }

    #[test]
    fn units_in_config_text() {
        let s = builtin_scenario("gas_injection_cross").unwrap();
        let text: String = dump_config(&s)
            .unwrap()
            .lines()
            .map(|l| {
                if l.starts_with("t_final") {
                    "t_final = \"1000 d\"".to_string()
                } else {
                    l.to_string()
                }
            })
            .collect::<Vec<_>>()
            .join("\n");
        let back = parse_config_str(&text, false).unwrap();
        assert_eq!(back.time.t_final.0, 1000.0 * crate::units::DAY);
    }

    #[test]
    fn unknown_keys_rejected() {
        let s = builtin_scenario("gas_injection_cross").unwrap();
        let mut text = dump_config(&s).unwrap();
        text.push_str("\nbogus_key = 3\n");
        assert!(matches!(
            parse_config_str(&text, false),
            Err(FracporeError::Parse(_))
        ));
    }

    #[test]
    fn validation_runs_on_parse() {
        let mut s = builtin_scenario("gas_injection_cross").unwrap();
        s.rock.permeability = super::super::Qty(-3e-15);
        let text = dump_config(&s).unwrap();
        assert!(matches!(
            parse_config_str(&text, false),
            Err(FracporeError::Validation(_))
        ));
    }
}
