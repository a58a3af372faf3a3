//! Gateway configuration: a small TOML file validated into typed form.
//!
//! Validation is strict and happens entirely at load: unknown keys,
//! malformed timestamps, or an impossible certificate window all fail
//! before anything touches the journal or the network.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Deserialize;

use cte_core::{Certificate, Cnpj, Timestamp, Uf};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid TOML: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

fn invalid(field: &str, detail: impl std::fmt::Display) -> ConfigError {
    ConfigError::Invalid(format!("{field}: {detail}"))
}

/// Which authority environment this gateway targets. Informational on the
/// wire; the authority enforces enablement on its side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetEnvironment {
    Approval,
    Production,
}

impl TargetEnvironment {
    pub fn as_str(self) -> &'static str {
        match self {
            TargetEnvironment::Approval => "approval",
            TargetEnvironment::Production => "production",
        }
    }

    pub fn parse(s: &str) -> Result<Self, ConfigError> {
        match s {
            "approval" => Ok(TargetEnvironment::Approval),
            "production" => Ok(TargetEnvironment::Production),
            other => Err(invalid(
                "environment",
                format!("expected \"approval\" or \"production\", got {other:?}"),
            )),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    in_dir: String,
    out_dir: String,
    journal_path: String,
    snapshot_path: Option<String>,
    tick_interval_secs: Option<u64>,
    authority_endpoint: String,
    environment: String,
    uf: u8,
    certificate: RawCertificate,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCertificate {
    subject_cnpj: String,
    not_before: String,
    not_after: String,
    key_id_hex: String,
    secret: String,
}

#[derive(Debug, Clone)]
pub struct GatewayConfig {
    pub in_dir: PathBuf,
    pub out_dir: PathBuf,
    pub journal_path: PathBuf,
    pub snapshot_path: PathBuf,
    pub tick_interval: Duration,
    pub authority_endpoint: String,
    pub environment: TargetEnvironment,
    pub uf: Uf,
    pub certificate: Certificate,
}

impl GatewayConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text)?;
        let tick_secs = raw.tick_interval_secs.unwrap_or(60);
        if tick_secs == 0 {
            return Err(invalid("tick_interval_secs", "must be positive"));
        }
        let uf = Uf::new(raw.uf).map_err(|e| invalid("uf", e))?;
        let environment = TargetEnvironment::parse(&raw.environment)?;
        if raw.authority_endpoint.trim().is_empty() {
            return Err(invalid("authority_endpoint", "must not be empty"));
        }

        let subject = Cnpj::parse(&raw.certificate.subject_cnpj)
            .map_err(|e| invalid("certificate.subject_cnpj", e))?;
        let not_before = Timestamp::parse_rfc3339(&raw.certificate.not_before)
            .map_err(|e| invalid("certificate.not_before", e))?;
        let not_after = Timestamp::parse_rfc3339(&raw.certificate.not_after)
            .map_err(|e| invalid("certificate.not_after", e))?;
        let key_id =
            decode_hex(&raw.certificate.key_id_hex).map_err(|e| invalid("certificate.key_id_hex", e))?;
        if key_id.is_empty() {
            return Err(invalid("certificate.key_id_hex", "must not be empty"));
        }
        if raw.certificate.secret.is_empty() {
            return Err(invalid("certificate.secret", "must not be empty"));
        }
        let certificate = Certificate::new(
            subject,
            not_before,
            not_after,
            key_id,
            raw.certificate.secret.into_bytes(),
        )
        .map_err(|e| invalid("certificate", e))?;

        let journal_path = PathBuf::from(raw.journal_path);
        let snapshot_path = match raw.snapshot_path {
            Some(p) => PathBuf::from(p),
            None => {
                let mut os = journal_path.clone().into_os_string();
                os.push(".snap");
                PathBuf::from(os)
            }
        };

        Ok(GatewayConfig {
            in_dir: PathBuf::from(raw.in_dir),
            out_dir: PathBuf::from(raw.out_dir),
            journal_path,
            snapshot_path,
            tick_interval: Duration::from_secs(tick_secs),
            authority_endpoint: raw.authority_endpoint,
            environment,
            uf,
            certificate,
        })
    }
}

fn decode_hex(s: &str) -> Result<Vec<u8>, String> {
    if s.len() % 2 != 0 {
        return Err("odd number of hex digits".into());
    }
    (0..s.len())
        .step_by(2)
        .map(|i| {
            u8::from_str_radix(&s[i..i + 2], 16).map_err(|_| format!("not hex: {}", &s[i..i + 2]))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(extra: &str) -> String {
        format!(
            r#"
in_dir = "in"
out_dir = "out"
journal_path = "journal.log"
authority_endpoint = "http://127.0.0.1:8800"
environment = "approval"
uf = 35
{extra}
[certificate]
subject_cnpj = "11222333000181"
not_before = "2026-01-01T00:00:00Z"
not_after = "2027-01-01T00:00:00Z"
key_id_hex = "6b65792d31"
secret = "secret-1"
"#
        )
    }

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = GatewayConfig::from_toml(&sample("")).unwrap();
        assert_eq!(cfg.tick_interval, Duration::from_secs(60));
        assert_eq!(cfg.snapshot_path, PathBuf::from("journal.log.snap"));
        assert_eq!(cfg.environment, TargetEnvironment::Approval);
        assert_eq!(cfg.uf.code(), 35);
        assert_eq!(cfg.certificate.key_id, b"key-1");
    }

    #[test]
    fn zero_tick_interval_is_refused() {
        let err = GatewayConfig::from_toml(&sample("tick_interval_secs = 0")).unwrap_err();
        assert!(matches!(err, ConfigError::Invalid(_)), "{err}");
    }

    #[test]
    fn unknown_keys_are_refused() {
        let err = GatewayConfig::from_toml(&sample("tick_interva = 5")).unwrap_err();
        assert!(matches!(err, ConfigError::Toml(_)), "{err}");
    }

    #[test]
    fn bad_environment_and_uf_are_refused() {
        let text = sample("").replace("\"approval\"", "\"staging\"");
        assert!(GatewayConfig::from_toml(&text).is_err());
        let text = sample("").replace("uf = 35", "uf = 34");
        assert!(GatewayConfig::from_toml(&text).is_err());
    }

    #[test]
    fn certificate_window_must_be_ordered() {
        let text = sample("").replace("2027-01-01", "2025-01-01");
        let err = GatewayConfig::from_toml(&text).unwrap_err();
        assert!(matches!(err, ConfigError::Invalid(_)), "{err}");
    }

    #[test]
    fn mistyped_subject_cnpj_is_refused() {
        let text = sample("").replace("11222333000181", "11222333000199");
        assert!(GatewayConfig::from_toml(&text).is_err());
    }
}
