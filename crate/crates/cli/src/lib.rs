//! Config loading and saving for the `krauscope` binary.
//!
//! Configs are JSON. Schema errors carry the JSON path of the offending
//! field; physics errors (a non-unitary `U¹`, an incomplete Kraus set, ...)
//! carry the residual that failed.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use krauscope::harness::ExperimentConfig;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("invalid config: field `{field}` at JSON path {json_path}: {message}")]
    Schema {
        field: String,
        json_path: String,
        message: String,
    },
    #[error("invalid config: {0}")]
    Invalid(#[from] krauscope::Error),
}

/// Parses and validates a config. Validation runs on the resolved config so
/// that defaults are checked too, but the unresolved form is returned.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let field = e
            .path()
            .iter()
            .next_back()
            .map(|seg| seg.to_string())
            .unwrap_or_else(|| "<root>".into());
        ConfigError::Schema {
            field,
            json_path: if path == "." { "$".into() } else { format!("$.{path}") },
            message: e.into_inner().to_string(),
        }
    })?;
    cfg.resolved().validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text)
}

pub fn save_config(cfg: &ExperimentConfig, path: &Path) -> io::Result<()> {
    let text = serde_json::to_string_pretty(cfg).map_err(io::Error::other)?;
    fs::write(path, text + "\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use krauscope::harness::{InstanceSource, Kind, ModeConfig, Sweep};
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config(r#"{"kind": "kraus", "d_s": 3, "seeds": [1]}"#).unwrap();
        assert_eq!(cfg.theta, FRAC_PI_2);
        assert_eq!(cfg.d_e, 2);
        assert_eq!(cfg.mode, ModeConfig::Exact);
        assert_eq!(cfg.input_lambda, 0.3);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_eq!(cfg.probe, [[h, 0.0], [h, 0.0]]);
        let resolved = cfg.resolved();
        let xi = resolved.environment_state.unwrap();
        assert!(xi.iter().all(|&[re, im]| (re - h).abs() < 1e-15 && im == 0.0));
    }

    #[test]
    fn schema_errors_name_the_path() {
        let err = parse_config(r#"{"kind": "kraus", "d_s": 2, "seeds": [0], "mode": {"sampled": {"shots": "many"}}}"#)
            .unwrap_err();
        match err {
            ConfigError::Schema { field, json_path, .. } => {
                assert_eq!(field, "shots");
                assert_eq!(json_path, "$.mode.sampled.shots");
            }
            other => panic!("unexpected {other}"),
        }
        let err = parse_config(r#"{"kind": "kraus", "d_s": 2, "seeds": [0], "thetta": 1}"#).unwrap_err();
        assert!(err.to_string().contains("thetta"), "{err}");
        let err = parse_config(r#"{"kind": "qutrit", "d_s": 2, "seeds": [0]}"#).unwrap_err();
        assert!(matches!(err, ConfigError::Schema { ref field, .. } if field == "kind"), "{err}");
    }

    #[test]
    fn physics_errors_report_residual() {
        let err = parse_config(
            r#"{"kind": "kraus", "d_s": 2, "seeds": [0],
                "instance": {"explicit": {"operators": [
                    {"dims": [2, 2], "entries": [[1, 0], [0, 0], [0, 0], [1, 0]]},
                    {"dims": [2, 2], "entries": [[1, 0], [0, 0], [0, 0], [1, 0]]}]}}}"#,
        )
        .unwrap_err();
        assert!(matches!(err, ConfigError::Invalid(krauscope::Error::Completeness { .. })));
        assert!(err.to_string().contains("1.414e0"), "{err}");
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            load_config(Path::new("/nonexistent/krauscope.json")),
            Err(ConfigError::Io { .. })
        ));
    }

    #[test]
    fn save_then_load_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        let mut cfg = ExperimentConfig::new(Kind::Unitary, 3, vec![0, 17, u64::MAX]);
        cfg.theta = 0.1 + 0.2;
        cfg.mode = ModeConfig::Sampled { shots: 12_345 };
        cfg.instance = InstanceSource::Explicit {
            operators: vec![(&krauscope::matcore::random_unitary(3, 9)).into()],
        };
        cfg.sweep = Some(Sweep::Shots {
            levels: vec![1_000, 2_000, 4_000],
            repetitions: 60,
        });
        save_config(&cfg, &path).unwrap();
        assert_eq!(load_config(&path).unwrap(), cfg);

        let resolved = ExperimentConfig::new(Kind::Density, 4, vec![2]).resolved();
        save_config(&resolved, &path).unwrap();
        let back = load_config(&path).unwrap();
        assert_eq!(back, resolved);
        assert_eq!(
            back.reference.unwrap().to_matrix().unwrap(),
            krauscope::matcore::dft(4)
        );
    }
}
