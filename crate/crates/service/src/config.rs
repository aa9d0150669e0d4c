use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use wikicheck::evalkit::DEFAULT_TAU;
use wikicheck::nli::{EncoderSpec, DEFAULT_BATCH_SIZE};
use wikicheck::query::{NerBackend, QueryStrategy};
use wikicheck::wikiclient::{DEFAULT_API_URL, DEFAULT_MAX_INFLIGHT};

pub const ENV_PREFIX: &str = "WIKICHECK_";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid value for {key}: {message}")]
    Value { key: String, message: String },
}

fn value_err(key: &str, message: impl ToString) -> ConfigError {
    ConfigError::Value {
        key: key.to_string(),
        message: message.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WikiSection {
    pub api_url: String,
    /// When set, the fixture backend rooted here replaces the live API.
    pub fixture_path: Option<PathBuf>,
}

impl Default for WikiSection {
    fn default() -> Self {
        WikiSection {
            api_url: DEFAULT_API_URL.to_string(),
            fixture_path: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NerSection {
    pub backend: NerBackend,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuerySection {
    pub strategy: QueryStrategy,
    pub n: usize,
}

impl Default for QuerySection {
    fn default() -> Self {
        QuerySection {
            strategy: QueryStrategy::Separate,
            n: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NliSection {
    pub encoder: EncoderSpec,
    /// Without a head the service starts but refuses to classify.
    pub head_path: Option<PathBuf>,
    pub batch_size: usize,
}

impl Default for NliSection {
    fn default() -> Self {
        NliSection {
            encoder: EncoderSpec::default(),
            head_path: None,
            batch_size: DEFAULT_BATCH_SIZE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AggSection {
    pub tau: f64,
}

impl Default for AggSection {
    fn default() -> Self {
        AggSection { tau: DEFAULT_TAU }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CacheSection {
    pub capacity: usize,
    pub ttl_seconds: u64,
}

impl Default for CacheSection {
    fn default() -> Self {
        CacheSection {
            capacity: 4096,
            ttl_seconds: 3600,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HttpSection {
    pub host: String,
    pub port: u16,
}

impl Default for HttpSection {
    fn default() -> Self {
        HttpSection {
            host: "127.0.0.1".to_string(),
            port: 8080,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConcurrencySection {
    pub max_inflight: usize,
}

impl Default for ConcurrencySection {
    fn default() -> Self {
        ConcurrencySection {
            max_inflight: DEFAULT_MAX_INFLIGHT,
        }
    }
}

/// Service configuration: a TOML file whose every key can be overridden
/// by a `WIKICHECK_<SECTION>_<KEY>` environment variable.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub wiki: WikiSection,
    pub ner: NerSection,
    pub query: QuerySection,
    pub nli: NliSection,
    pub agg: AggSection,
    pub cache: CacheSection,
    pub http: HttpSection,
    pub concurrency: ConcurrencySection,
}

fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    v.trim().parse().map_err(|e| value_err(key, e))
}

fn optional_path(v: &str) -> Option<PathBuf> {
    (!v.trim().is_empty()).then(|| PathBuf::from(v.trim()))
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<PipelineConfig, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<PipelineConfig, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    /// Optional file, then process environment, then validation.
    pub fn load(path: Option<&Path>) -> Result<PipelineConfig, ConfigError> {
        let mut cfg = match path {
            Some(p) => Self::from_file(p)?,
            None => PipelineConfig::default(),
        };
        cfg.apply_overrides(std::env::vars())?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies `WIKICHECK_*` variables; anything else is ignored, unknown
    /// `WIKICHECK_*` keys are rejected.
    pub fn apply_overrides<I, K, V>(&mut self, vars: I) -> Result<(), ConfigError>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        for (k, v) in vars {
            let Some(key) = k.as_ref().strip_prefix(ENV_PREFIX) else {
                continue;
            };
            let v = v.as_ref();
            let name = k.as_ref();
            match key {
                "WIKI_API_URL" => self.wiki.api_url = v.trim().to_string(),
                "WIKI_FIXTURE_PATH" => self.wiki.fixture_path = optional_path(v),
                "NER_BACKEND" => self.ner.backend = parse(name, v)?,
                "QUERY_STRATEGY" => self.query.strategy = parse(name, v)?,
                "QUERY_N" => self.query.n = parse(name, v)?,
                "NLI_ENCODER" => self.nli.encoder = parse(name, v)?,
                "NLI_HEAD_PATH" => self.nli.head_path = optional_path(v),
                "NLI_BATCH_SIZE" => self.nli.batch_size = parse(name, v)?,
                "AGG_TAU" => self.agg.tau = parse(name, v)?,
                "CACHE_CAPACITY" => self.cache.capacity = parse(name, v)?,
                "CACHE_TTL_SECONDS" => self.cache.ttl_seconds = parse(name, v)?,
                "HTTP_HOST" => self.http.host = v.trim().to_string(),
                "HTTP_PORT" => self.http.port = parse(name, v)?,
                "CONCURRENCY_MAX_INFLIGHT" => self.concurrency.max_inflight = parse(name, v)?,
                "LOG" | "CONFIG" => {}
                _ => return Err(value_err(name, "unknown configuration key")),
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = |key: &str, v: u64| {
            if v == 0 {
                Err(value_err(key, "must be positive"))
            } else {
                Ok(())
            }
        };
        positive("query.n", self.query.n as u64)?;
        positive("nli.batch_size", self.nli.batch_size as u64)?;
        positive("cache.capacity", self.cache.capacity as u64)?;
        positive("cache.ttl_seconds", self.cache.ttl_seconds)?;
        positive("http.port", self.http.port as u64)?;
        positive("concurrency.max_inflight", self.concurrency.max_inflight as u64)?;
        if !(self.agg.tau > 0.0 && self.agg.tau < 1.0) {
            return Err(value_err("agg.tau", "must lie in (0, 1)"));
        }
        if self.wiki.fixture_path.is_none() && self.wiki.api_url.trim().is_empty() {
            return Err(value_err("wiki.api_url", "required when no fixture_path is set"));
        }
        Ok(())
    }
}
