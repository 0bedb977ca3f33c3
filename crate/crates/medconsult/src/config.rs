//! Runtime configuration: an optional TOML file overridden by environment
//! variables, overridden in turn by command-line flags.
//!
//! ```toml
//! graph = "fixtures/kg"
//! templates = "en"              # "en", "zh" or a path to a template table
//! store_dir = "sessions"
//! listen = "127.0.0.1:8080"
//! generator_url = "http://127.0.0.1:9000/generate"
//! seed = 7
//! ```
//!
//! Every key has a `MEDCONSULT_<KEY>` environment override.

use std::env;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use medconsult_core::dialogue::{Engine, EngineConfig};
use medconsult_core::intents::IntentLexicon;
use medconsult_core::nlu::{NegationCues, NluConfig};
use medconsult_core::templates::TemplateTable;
use serde::Deserialize;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Invalid { path: PathBuf, message: String },
    #[error("environment variable {name}: {message}")]
    Env { name: String, message: String },
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub graph: Option<PathBuf>,
    /// `en`, `zh` or a template table path.
    pub templates: Option<String>,
    pub negation_cues: Option<PathBuf>,
    pub intents: Option<PathBuf>,
    /// Root for relative drug image paths; defaults to the graph directory.
    pub asset_root: Option<PathBuf>,
    pub store_dir: Option<PathBuf>,
    pub listen: Option<String>,
    pub generator_url: Option<String>,
    pub generator_timeout_ms: Option<u64>,
    pub link_threshold: Option<f64>,
    pub history_window: Option<usize>,
    pub seed: Option<u64>,
    pub static_dir: Option<PathBuf>,
}

pub const DEFAULT_LISTEN: &str = "127.0.0.1:8080";
pub const DEFAULT_STORE_DIR: &str = "sessions";
pub const DEFAULT_GENERATOR_TIMEOUT_MS: u64 = 5_000;

fn env_value<T: std::str::FromStr>(name: &str) -> Result<Option<T>, ConfigError>
where
    T::Err: std::fmt::Display,
{
    match env::var(name) {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|e: T::Err| ConfigError::Env { name: name.to_string(), message: e.to_string() }),
        _ => Ok(None),
    }
}

impl Config {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        toml::from_str(&text).map_err(|e| ConfigError::Invalid { path: path.to_path_buf(), message: e.to_string() })
    }

    /// Loads `path` if given, then applies environment overrides.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut config = match path {
            Some(path) => Self::from_file(path)?,
            None => Self::default(),
        };
        config.apply_env()?;
        Ok(config)
    }

    pub fn apply_env(&mut self) -> Result<(), ConfigError> {
        macro_rules! over {
            ($field:ident, $name:literal) => {
                if let Some(v) = env_value($name)? {
                    self.$field = Some(v);
                }
            };
        }
        over!(graph, "MEDCONSULT_GRAPH");
        over!(templates, "MEDCONSULT_TEMPLATES");
        over!(negation_cues, "MEDCONSULT_NEGATION_CUES");
        over!(intents, "MEDCONSULT_INTENTS");
        over!(asset_root, "MEDCONSULT_ASSET_ROOT");
        over!(store_dir, "MEDCONSULT_STORE_DIR");
        over!(listen, "MEDCONSULT_LISTEN");
        over!(generator_url, "MEDCONSULT_GENERATOR_URL");
        over!(generator_timeout_ms, "MEDCONSULT_GENERATOR_TIMEOUT_MS");
        over!(link_threshold, "MEDCONSULT_LINK_THRESHOLD");
        over!(history_window, "MEDCONSULT_HISTORY_WINDOW");
        over!(seed, "MEDCONSULT_SEED");
        over!(static_dir, "MEDCONSULT_STATIC_DIR");
        Ok(())
    }

    pub fn asset_root(&self) -> Option<PathBuf> {
        self.asset_root.clone().or_else(|| self.graph.clone())
    }

    pub fn store_dir(&self) -> PathBuf {
        self.store_dir.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_STORE_DIR))
    }

    pub fn listen(&self) -> String {
        self.listen.clone().unwrap_or_else(|| DEFAULT_LISTEN.to_string())
    }

    pub fn generator_timeout(&self) -> Duration {
        Duration::from_millis(self.generator_timeout_ms.unwrap_or(DEFAULT_GENERATOR_TIMEOUT_MS))
    }

    pub fn template_table(&self) -> Result<TemplateTable, ConfigError> {
        match self.templates.as_deref() {
            None | Some("en") => Ok(TemplateTable::english()),
            Some("zh") => Ok(TemplateTable::chinese()),
            Some(path) => {
                let path = PathBuf::from(path);
                let text = fs::read_to_string(&path).map_err(|source| ConfigError::Io { path: path.clone(), source })?;
                TemplateTable::parse(&text).map_err(|e| ConfigError::Invalid { path, message: e.to_string() })
            }
        }
    }

    /// Builds the dialogue engine described by this configuration.
    pub fn engine(&self) -> Result<Engine, ConfigError> {
        let templates = self.template_table()?;
        let negation = match &self.negation_cues {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.clone(), source })?;
                NegationCues::parse(&text)
            }
            None => NegationCues::default(),
        };
        let intents = match &self.intents {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.clone(), source })?;
                IntentLexicon::parse(&text)
                    .map_err(|e| ConfigError::Invalid { path: path.clone(), message: e.to_string() })?
            }
            None => IntentLexicon::default(),
        };
        let mut nlu = NluConfig { negation, ..NluConfig::default() };
        if let Some(threshold) = self.link_threshold {
            if !(0.0..=1.0).contains(&threshold) {
                return Err(ConfigError::Invalid {
                    path: PathBuf::from("link_threshold"),
                    message: format!("{threshold} is outside [0, 1]"),
                });
            }
            nlu.link_threshold = threshold;
        }
        let mut config = EngineConfig { nlu, ..EngineConfig::default() };
        if let Some(window) = self.history_window {
            config.history_window = window;
        }
        Ok(Engine::new(templates, intents, config))
    }
}
