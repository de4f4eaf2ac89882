use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::acquisition::AcquisitionConfig;
use crate::llm::GatewayConfig;

/// Prefix of the environment variables that override file settings.
pub const ENV_PREFIX: &str = "POLICYSCOPE_";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub bind: SocketAddr,
    pub store_path: PathBuf,
    /// Enables the activity log and the /events endpoints.
    pub study_mode: bool,
    /// Allowed CORS origins. Empty means browser-extension origins only.
    pub allowed_origins: Vec<String>,
    /// Optional TOML file replacing the built-in prompt templates.
    pub templates: Option<PathBuf>,
    pub provider: ProviderConfig,
    pub models: GatewayConfig,
    pub acquisition: AcquisitionConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderConfig {
    /// Answer from scripted replies instead of a real model.
    pub mock: bool,
    /// Directory of mock scenario files; the bundled demo replies are used when unset.
    pub scenario_dir: Option<PathBuf>,
    /// Base URL of an OpenAI-compatible API.
    pub base_url: String,
    /// Environment variable holding the API key.
    pub api_key_env: String,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            bind: SocketAddr::from(([127, 0, 0, 1], 8787)),
            store_path: PathBuf::from("policyscope.sqlite3"),
            study_mode: false,
            allowed_origins: Vec::new(),
            templates: None,
            provider: ProviderConfig::default(),
            models: GatewayConfig::default(),
            acquisition: AcquisitionConfig::default(),
        }
    }
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            mock: false,
            scenario_dir: None,
            base_url: "https://api.openai.com/v1".into(),
            api_key_env: "OPENAI_API_KEY".into(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parsing {path}: {source}")]
    Parse { path: String, source: toml::de::Error },
    #[error("invalid configuration: {}", .0.join("; "))]
    Invalid(Vec<String>),
}

impl ServiceConfig {
    /// Reads the file (if any), applies environment overrides and validates.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut config = match path {
            Some(path) => Self::from_file(path)?,
            None => Self::default(),
        };
        let env = |name: &str| std::env::var(name).ok();
        config.apply_env(env)?;
        config.validate(env)?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let source = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        toml::from_str(&source).map_err(|source| ConfigError::Parse {
            path: path.display().to_string(),
            source,
        })
    }

    /// Applies `POLICYSCOPE_*` overrides read through `lookup`.
    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        let var = |name: &str| lookup(&format!("{ENV_PREFIX}{name}")).filter(|v| !v.is_empty());
        let mut problems = Vec::new();
        let flag = |name: &str, value: String, problems: &mut Vec<String>| match value.to_lowercase().as_str() {
            "1" | "true" | "yes" | "on" => Some(true),
            "0" | "false" | "no" | "off" => Some(false),
            _ => {
                problems.push(format!("{ENV_PREFIX}{name} must be a boolean, got {value:?}"));
                None
            }
        };

        if let Some(v) = var("BIND") {
            match v.parse() {
                Ok(addr) => self.bind = addr,
                Err(_) => problems.push(format!("{ENV_PREFIX}BIND is not a socket address: {v:?}")),
            }
        }
        if let Some(v) = var("STORE") {
            self.store_path = v.into();
        }
        if let Some(v) = var("STUDY_MODE") {
            if let Some(b) = flag("STUDY_MODE", v, &mut problems) {
                self.study_mode = b;
            }
        }
        if let Some(v) = var("MOCK") {
            if let Some(b) = flag("MOCK", v, &mut problems) {
                self.provider.mock = b;
            }
        }
        if let Some(v) = var("SCENARIO_DIR") {
            self.provider.scenario_dir = Some(v.into());
        }
        if let Some(v) = var("BASE_URL") {
            self.provider.base_url = v;
        }
        if let Some(v) = var("ASSESSMENT_MODEL") {
            self.models.assessment_model = v;
        }
        if let Some(v) = var("LIGHTWEIGHT_MODEL") {
            self.models.lightweight_model = v;
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(problems))
        }
    }

    /// Checks the configuration. A real provider needs a parseable base URL
    /// and an API key in the configured variable; mock mode needs neither.
    pub fn validate(&self, lookup: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        let mut problems = Vec::new();
        let m = &self.models;
        if m.assessment_model.trim().is_empty() || m.lightweight_model.trim().is_empty() {
            problems.push("model names must not be empty".to_string());
        }
        if m.assessment_max_tokens == 0 || m.chat_max_tokens == 0 || m.suggestion_max_tokens == 0 {
            problems.push("max token limits must be positive".to_string());
        }
        for (name, t) in [
            ("assessment", m.assessment_temperature),
            ("chat", m.chat_temperature),
            ("suggestion", m.suggestion_temperature),
        ] {
            if !(0.0..=2.0).contains(&t) {
                problems.push(format!("{name} temperature {t} is outside 0..=2"));
            }
        }
        if m.context_budget_tokens < 1000 {
            problems.push("context budget must be at least 1000 tokens".to_string());
        }
        if m.timeout_secs == 0 || self.acquisition.timeout_secs == 0 {
            problems.push("timeouts must be positive".to_string());
        }
        if self.acquisition.min_words == 0 {
            problems.push("acquisition.min_words must be positive".to_string());
        }

        if !self.provider.mock {
            match url::Url::parse(&self.provider.base_url) {
                Ok(u) if matches!(u.scheme(), "http" | "https") => {}
                _ => problems.push(format!(
                    "provider.base_url {:?} is not an http(s) URL",
                    self.provider.base_url
                )),
            }
            if lookup(&self.provider.api_key_env).is_none_or(|k| k.trim().is_empty()) {
                problems.push(format!(
                    "no API key in ${}; set it or enable mock mode",
                    self.provider.api_key_env
                ));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(problems))
        }
    }
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;

    use super::*;

    fn env(pairs: &[(&str, &str)]) -> impl Fn(&str) -> Option<String> {
        let map: HashMap<String, String> = pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        move |k| map.get(k).cloned()
    }

    #[test]
    fn defaults_need_a_key() {
        let config = ServiceConfig::default();
        let err = config.validate(env(&[])).unwrap_err().to_string();
        assert!(err.contains("OPENAI_API_KEY"), "{err}");
        config.validate(env(&[("OPENAI_API_KEY", "sk-test")])).unwrap();
    }

    #[test]
    fn mock_mode_needs_no_provider() {
        let mut config = ServiceConfig::default();
        config.provider.mock = true;
        config.provider.base_url = "nonsense".into();
        config.validate(env(&[])).unwrap();
    }

    #[test]
    fn file_and_env_overrides() {
        let mut config: ServiceConfig = toml::from_str(
            r#"
            bind = "127.0.0.1:9000"
            study_mode = true
            [models]
            assessment_model = "big"
            [acquisition]
            min_words = 50
            "#,
        )
        .unwrap();
        assert_eq!(config.models.lightweight_model, "gpt-4o-mini");
        assert_eq!(config.acquisition.min_words, 50);
        config
            .apply_env(env(&[
                ("POLICYSCOPE_BIND", "0.0.0.0:1234"),
                ("POLICYSCOPE_MOCK", "true"),
                ("POLICYSCOPE_STUDY_MODE", "0"),
                ("POLICYSCOPE_ASSESSMENT_MODEL", "bigger"),
            ]))
            .unwrap();
        assert_eq!(config.bind.port(), 1234);
        assert!(config.provider.mock);
        assert!(!config.study_mode);
        assert_eq!(config.models.assessment_model, "bigger");
    }

    #[test]
    fn rejects_bad_values() {
        let mut config = ServiceConfig::default();
        assert!(config.apply_env(env(&[("POLICYSCOPE_MOCK", "maybe")])).is_err());
        config.provider.mock = true;
        config.models.chat_max_tokens = 0;
        config.models.suggestion_temperature = 3.0;
        let ConfigError::Invalid(problems) = config.validate(env(&[])).unwrap_err() else {
            panic!("expected validation problems");
        };
        assert_eq!(problems.len(), 2);
        assert!(toml::from_str::<ServiceConfig>("unknown_key = 1").is_err());
    }
}
