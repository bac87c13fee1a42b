//! `--set path=value` overrides addressed by the config's TOML key paths.

use toml::{Table, Value};
use trajloc::config::ExperimentConfig;

use crate::error::{CliError, CliResult};

/// Parses the right-hand side as a TOML value, falling back to a bare
/// string so `--set model.wiring=mimo` works without quoting.
fn parse_value(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

/// Applies each `a.b.c=value` to `config`. Unknown paths are rejected by the
/// config's own schema.
pub fn apply_overrides(config: &ExperimentConfig, sets: &[String]) -> CliResult<ExperimentConfig> {
    if sets.is_empty() {
        return Ok(config.clone());
    }
    let text = config.to_toml_string()?;
    let mut root: Table = text
        .parse()
        .map_err(|e: toml::de::Error| CliError::Override(String::new(), e.to_string()))?;
    for s in sets {
        let (path, raw) = s
            .split_once('=')
            .ok_or_else(|| CliError::Override(s.clone(), "expected path=value".into()))?;
        let keys: Vec<&str> = path.trim().split('.').collect();
        if keys.iter().any(|k| k.is_empty()) {
            return Err(CliError::Override(s.clone(), "empty key".into()));
        }
        let (last, parents) = keys.split_last().expect("split yields one key");
        let mut table = &mut root;
        for k in parents {
            let entry = table
                .entry(k.to_string())
                .or_insert_with(|| Value::Table(Table::new()));
            table = entry
                .as_table_mut()
                .ok_or_else(|| CliError::Override(s.clone(), format!("'{k}' is not a section")))?;
        }
        table.insert(last.to_string(), parse_value(raw.trim()));
    }
    let out = toml::to_string(&root).map_err(|e| CliError::Override(sets.join(" "), e.to_string()))?;
    ExperimentConfig::from_toml_str(&out)
        .map_err(|e| CliError::Override(sets.join(" "), e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use trajloc::Wiring;

    #[test]
    fn nested_and_typed() {
        let c = apply_overrides(
            &ExperimentConfig::default(),
            &[
                "model.hidden=16".into(),
                "model.wiring=mimo".into(),
                "seed=3".into(),
                "eval.speeds=[1.0, 2.0]".into(),
                "model.optimizer.learning_rate=0.01".into(),
            ],
        )
        .unwrap();
        assert_eq!(c.model.hidden, 16);
        assert_eq!(c.model.wiring, Wiring::Mimo);
        assert_eq!(c.seed, 3);
        assert_eq!(c.eval.speeds, vec![1.0, 2.0]);
        assert_eq!(c.model.optimizer.learning_rate, 0.01);
    }

    #[test]
    fn optional_field_can_be_set() {
        let c = apply_overrides(&ExperimentConfig::default(), &["motion.truncation_radius=3.0".into()]).unwrap();
        assert_eq!(c.motion.truncation_radius, Some(3.0));
    }

    #[test]
    fn bad_paths_rejected() {
        let d = ExperimentConfig::default();
        assert!(apply_overrides(&d, &["model.hiden=3".into()]).is_err());
        assert!(apply_overrides(&d, &["seed".into()]).is_err());
        assert!(apply_overrides(&d, &["seed.x=1".into()]).is_err());
        assert_eq!(apply_overrides(&d, &["model..x=1".into()]).unwrap_err().exit_code(), 2);
    }
}
