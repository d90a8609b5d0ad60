// SPDX-License-Identifier: MIT OR Apache-2.0

//! Run configuration files and provider resolution.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::decoder::SamplerConfig;
use crate::ensemble::{DebiasedProvider, EnsembleConfig, Mode, SignalSpec, DEFAULT_ALPHA};
use crate::error::{Error, Result};
use crate::lm::{DistributionProvider, NGramModel, SharedProvider, UniformProvider};
use crate::metrics::ConfigEcho;
use crate::remote::RemoteEndpoint;
use crate::vocab::{TextCodec, Vocabulary};

pub const ENDPOINT_ENV: &str = "STEERED_DECODE_ENDPOINT";
pub const DEFAULT_TIMEOUT_MS: u64 = 30_000;

/// Where a model comes from: `uniform`, an `http(s)://` endpoint, or an
/// n-gram model file.
pub type ModelSpec = String;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expert: Option<ModelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anti_expert: Option<ModelSpec>,
    #[serde(default = "one")]
    pub weight: f64,
}

fn one() -> f64 {
    1.0
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

/// Ensemble config file: `{"alpha", "mode", "signals": [{"expert", "anti_expert", "weight"}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleFile {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub signals: Vec<SignalFile>,
}

impl Default for EnsembleFile {
    fn default() -> Self {
        EnsembleFile { alpha: DEFAULT_ALPHA, mode: Mode::None, signals: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vocab: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<ModelSpec>,
    #[serde(default)]
    pub ensemble: EnsembleFile,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default = "default_timeout")]
    pub timeout_ms: u64,
}

fn default_timeout() -> u64 {
    DEFAULT_TIMEOUT_MS
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            vocab: None,
            base: None,
            ensemble: EnsembleFile::default(),
            sampler: SamplerConfig::default(),
            timeout_ms: DEFAULT_TIMEOUT_MS,
        }
    }
}

fn is_url(spec: &str) -> bool {
    spec.starts_with("http://") || spec.starts_with("https://")
}

impl RunConfig {
    /// Reads a config file; relative paths inside it are resolved against
    /// the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| Error::data(path, e.line(), e.to_string()))?;
        cfg.make_absolute(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("serializable") + "\n";
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn make_absolute(&mut self, dir: &Path) {
        let fix = |s: &mut String| {
            if s != "uniform" && !is_url(s) && Path::new(s.as_str()).is_relative() {
                *s = dir.join(&*s).to_string_lossy().into_owned();
            }
        };
        if let Some(v) = &mut self.vocab {
            if v.is_relative() {
                *v = dir.join(&*v);
            }
        }
        if let Some(b) = &mut self.base {
            fix(b);
        }
        for s in &mut self.ensemble.signals {
            s.expert.iter_mut().for_each(fix);
            s.anti_expert.iter_mut().for_each(fix);
        }
    }

    pub fn ensemble_config(&self) -> EnsembleConfig {
        EnsembleConfig { alpha: self.ensemble.alpha, mode: self.ensemble.mode }
    }

    pub fn echo(&self) -> ConfigEcho {
        let mut echo = ConfigEcho {
            alpha: Some(self.ensemble.alpha),
            mode: Some(self.ensemble.mode.to_string()),
            seed: Some(self.sampler.seed),
            ..Default::default()
        };
        echo.extra.insert(
            "run_config".into(),
            serde_json::to_value(self).expect("serializable"),
        );
        echo
    }

    /// Loads vocabulary and models and assembles the steered provider.
    pub fn resolve(&self) -> Result<Resolved> {
        self.sampler.validate()?;
        self.ensemble_config().validate()?;
        let base_spec = match &self.base {
            Some(b) => b.clone(),
            None => std::env::var(ENDPOINT_ENV).map_err(|_| {
                Error::InvalidArgument(format!("no base model configured and {ENDPOINT_ENV} is unset"))
            })?,
        };
        let mut loader = Loader {
            vocab: match &self.vocab {
                Some(p) => Some(Arc::new(Vocabulary::load(p)?)),
                None => None,
            },
            timeout: Duration::from_millis(self.timeout_ms),
            remotes: HashMap::new(),
            models: HashMap::new(),
        };
        let base = loader.load(&base_spec)?;
        let codec: Arc<dyn TextCodec> = if is_url(&base_spec) {
            loader.remotes[&base_spec].clone()
        } else {
            loader.vocab.clone().expect("local base needs vocab (checked in load)")
        };
        let mut signals = Vec::new();
        for s in &self.ensemble.signals {
            let expert = s.expert.as_ref().map(|m| loader.load(m)).transpose()?;
            let anti_expert = s.anti_expert.as_ref().map(|m| loader.load(m)).transpose()?;
            signals.push(SignalSpec { expert, anti_expert, weight: s.weight });
        }
        let steered = if self.ensemble.mode == Mode::None || signals.is_empty() {
            let cfg = EnsembleConfig { mode: Mode::None, ..self.ensemble_config() };
            DebiasedProvider::new(base.clone(), signals, cfg)?
        } else {
            DebiasedProvider::new(base.clone(), signals, self.ensemble_config())?
        };
        Ok(Resolved {
            base,
            steered: Arc::new(steered),
            codec,
            vocab: loader.vocab,
        })
    }
}

struct Loader {
    vocab: Option<Arc<Vocabulary>>,
    timeout: Duration,
    remotes: HashMap<String, Arc<RemoteEndpoint>>,
    models: HashMap<String, SharedProvider>,
}

impl Loader {
    fn load(&mut self, spec: &str) -> Result<SharedProvider> {
        if let Some(p) = self.models.get(spec) {
            return Ok(p.clone());
        }
        let provider: SharedProvider = if is_url(spec) {
            let ep = Arc::new(RemoteEndpoint::handshake(spec, self.timeout)?);
            self.remotes.insert(spec.to_string(), ep.clone());
            ep
        } else {
            let vocab = self.vocab.as_ref().ok_or_else(|| {
                Error::InvalidArgument(format!("model {spec:?} is local but no vocab is configured"))
            })?;
            if spec == "uniform" {
                Arc::new(UniformProvider::for_vocab(vocab))
            } else {
                let m = NGramModel::load(spec)?;
                if m.fingerprint() != vocab.fingerprint() {
                    return Err(Error::Incompatible {
                        left_name: "vocab".into(),
                        left: vocab.fingerprint(),
                        left_size: vocab.len(),
                        right_name: spec.to_string(),
                        right: m.fingerprint(),
                        right_size: m.vocab_size(),
                    });
                }
                Arc::new(m)
            }
        };
        self.models.insert(spec.to_string(), provider.clone());
        Ok(provider)
    }
}

/// Providers ready for decoding or evaluation.
pub struct Resolved {
    pub base: SharedProvider,
    pub steered: Arc<DebiasedProvider>,
    pub codec: Arc<dyn TextCodec>,
    pub vocab: Option<Arc<Vocabulary>>,
}
