//! Run configuration.
//!
//! Every flag has a config-file (TOML) equivalent; a flag overrides the
//! file. Validation collects every violation before reporting, and the
//! effective configuration is echoed into the run artifact for provenance.

use arag_core::decision::{DecisionPolicy, TaAreConfig};
use arag_core::modelio::{GenerationParams, Matcher, ScriptEntry, ScriptedClient};
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::{Path, PathBuf};

/// TOML value for the threshold: a number or the word "none".
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ThresholdValue {
    Number(f64),
    Word(String),
}

/// The flat key-value configuration document. All fields optional; required
/// ones are enforced by [`resolve_run`].
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub dataset: Option<PathBuf>,
    pub policy: Option<String>,
    pub t: Option<ThresholdValue>,
    pub model: Option<String>,
    pub base_url: Option<String>,
    pub retriever: Option<String>,
    pub cache: Option<PathBuf>,
    pub workers: Option<usize>,
    pub k_docs: Option<usize>,
    pub temperature: Option<f64>,
    pub top_p: Option<f64>,
    pub max_tokens: Option<u32>,
    pub demo_pool: Option<PathBuf>,
    pub date: Option<String>,
    pub k_yes: Option<usize>,
    pub k_no: Option<usize>,
    pub include_date: Option<bool>,
    pub max_doc_chars: Option<usize>,
    pub timestamp: Option<String>,
    pub out: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let content = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        toml::from_str(&content).map_err(|e| format!("config {}: {e}", path.display()))
    }
}

#[derive(Debug)]
pub struct ConfigError {
    pub violations: Vec<String>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invalid configuration:")?;
        for violation in &self.violations {
            writeln!(f, "  - {violation}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendSpec {
    Scripted { path: PathBuf },
    Remote { base_url: String, model_id: String },
}

impl BackendSpec {
    pub fn model_id(&self) -> String {
        match self {
            BackendSpec::Scripted { path } => format!("scripted:{}", path.display()),
            BackendSpec::Remote { model_id, .. } => model_id.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RetrieverSpec {
    Static,
    Lexical(PathBuf),
}

/// Fully validated run settings.
#[derive(Debug, Clone)]
pub struct RunSettings {
    pub dataset: PathBuf,
    pub policy: DecisionPolicy,
    pub backend: BackendSpec,
    pub retriever: RetrieverSpec,
    pub cache: Option<PathBuf>,
    pub params: GenerationParams,
    pub k_docs: usize,
    pub workers: usize,
    pub max_doc_chars: Option<usize>,
    pub timestamp: Option<String>,
    pub demo_pool: Option<PathBuf>,
    pub out: PathBuf,
}

impl RunSettings {
    /// The effective configuration, echoed into the run artifact.
    pub fn echo(&self) -> serde_json::Value {
        serde_json::json!({
            "dataset": self.dataset.display().to_string(),
            "policy": self.policy,
            "model": self.backend.model_id(),
            "retriever": match &self.retriever {
                RetrieverSpec::Static => "static".to_string(),
                RetrieverSpec::Lexical(path) => format!("lexical:{}", path.display()),
            },
            "cache": self.cache.as_ref().map(|p| p.display().to_string()),
            "workers": self.workers,
            "k_docs": self.k_docs,
            "temperature": self.params.temperature,
            "top_p": self.params.top_p,
            "max_tokens": self.params.max_tokens,
            "demo_pool": self.demo_pool.as_ref().map(|p| p.display().to_string()),
            "max_doc_chars": self.max_doc_chars,
        })
    }
}

pub fn parse_model_spec(
    spec: &str,
    base_url: Option<&str>,
    violations: &mut Vec<String>,
) -> Option<BackendSpec> {
    if let Some(path) = spec.strip_prefix("scripted:") {
        if path.is_empty() {
            violations.push("model: scripted spec needs a script path (scripted:<file>)".into());
            return None;
        }
        return Some(BackendSpec::Scripted {
            path: PathBuf::from(path),
        });
    }
    if let Some(model_id) = spec.strip_prefix("remote:") {
        if model_id.is_empty() {
            violations.push("model: remote spec needs a model id (remote:<model-id>)".into());
            return None;
        }
        match base_url {
            Some(url) => {
                return Some(BackendSpec::Remote {
                    base_url: url.to_string(),
                    model_id: model_id.to_string(),
                })
            }
            None => {
                violations.push("base_url: required for a remote backend".into());
                return None;
            }
        }
    }
    violations.push(format!(
        "model: {spec:?} is not scripted:<file> or remote:<model-id>"
    ));
    None
}

fn parse_retriever_spec(spec: &str, violations: &mut Vec<String>) -> Option<RetrieverSpec> {
    if spec == "static" {
        return Some(RetrieverSpec::Static);
    }
    if let Some(path) = spec.strip_prefix("lexical:") {
        if path.is_empty() {
            violations.push("retriever: lexical spec needs an index path (lexical:<file>)".into());
            return None;
        }
        return Some(RetrieverSpec::Lexical(PathBuf::from(path)));
    }
    violations.push(format!(
        "retriever: {spec:?} is not static or lexical:<index>"
    ));
    None
}

fn parse_threshold(value: &ThresholdValue, violations: &mut Vec<String>) -> Option<Option<f64>> {
    match value {
        ThresholdValue::Number(t) => {
            if (0.0..=1.0).contains(t) {
                Some(Some(*t))
            } else {
                violations.push(format!("t: {t} is outside [0,1]"));
                None
            }
        }
        ThresholdValue::Word(word) if word.eq_ignore_ascii_case("none") => Some(None),
        ThresholdValue::Word(word) => {
            violations.push(format!("t: {word:?} is not a number in [0,1] or \"none\""));
            None
        }
    }
}

/// Validate the merged configuration for the `run` command, reporting every
/// violated field at once.
pub fn resolve_run(config: &FileConfig) -> Result<RunSettings, ConfigError> {
    let mut violations = Vec::new();

    let dataset = match &config.dataset {
        Some(path) => Some(path.clone()),
        None => {
            violations.push("dataset: required".into());
            None
        }
    };
    let out = match &config.out {
        Some(path) => Some(path.clone()),
        None => {
            violations.push("out: required (artifact directory)".into());
            None
        }
    };

    let backend = match &config.model {
        Some(spec) => parse_model_spec(spec, config.base_url.as_deref(), &mut violations),
        None => {
            violations.push("model: required (scripted:<file> or remote:<model-id>)".into());
            None
        }
    };

    let retriever = match config.retriever.as_deref() {
        None => Some(RetrieverSpec::Static),
        Some(spec) => parse_retriever_spec(spec, &mut violations),
    };

    let threshold = config.t.as_ref().and_then(|value| parse_threshold(value, &mut violations));

    let date = match config.date.as_deref() {
        None => None,
        Some(text) => match NaiveDate::parse_from_str(text, "%Y-%m-%d") {
            Ok(date) => Some(date),
            Err(_) => {
                violations.push(format!("date: {text:?} is not YYYY-MM-DD"));
                None
            }
        },
    };

    let policy = match config.policy.as_deref() {
        None => {
            violations.push("policy: required (always|never|threshold|vanilla|ta-are)".into());
            None
        }
        Some("always") => Some(DecisionPolicy::Always),
        Some("never") => Some(DecisionPolicy::Never),
        Some("threshold") => {
            if config.t.is_none() {
                violations.push("t: required for the threshold policy (number or \"none\")".into());
                None
            } else {
                threshold.map(|t| DecisionPolicy::Threshold { t })
            }
        }
        Some("vanilla") | Some("vanilla_prompt") => Some(DecisionPolicy::VanillaPrompt),
        Some("ta-are") | Some("ta_are") => {
            if config.demo_pool.is_none() {
                violations.push("demo_pool: required for the ta-are policy".into());
            }
            let defaults = TaAreConfig::default();
            Some(DecisionPolicy::TaAre(TaAreConfig {
                k_yes: config.k_yes.unwrap_or(defaults.k_yes),
                k_no: config.k_no.unwrap_or(defaults.k_no),
                include_date: config.include_date.unwrap_or(defaults.include_date),
                date: date.unwrap_or(defaults.date),
            }))
        }
        Some(other) => {
            violations.push(format!(
                "policy: {other:?} is not always|never|threshold|vanilla|ta-are"
            ));
            None
        }
    };
    if config.t.is_some() && !matches!(config.policy.as_deref(), Some("threshold")) {
        violations.push("t: only valid with the threshold policy".into());
    }

    let workers = config.workers.unwrap_or(1);
    if workers == 0 {
        violations.push("workers: must be at least 1".into());
    }
    let k_docs = config.k_docs.unwrap_or(5);
    if k_docs == 0 {
        violations.push("k_docs: must be at least 1".into());
    }

    let defaults = GenerationParams::default();
    let params = GenerationParams {
        temperature: config.temperature.unwrap_or(defaults.temperature),
        top_p: config.top_p.unwrap_or(defaults.top_p),
        max_tokens: config.max_tokens.unwrap_or(defaults.max_tokens),
    };
    if params.temperature < 0.0 {
        violations.push(format!("temperature: {} is negative", params.temperature));
    }
    if !(params.top_p > 0.0 && params.top_p <= 1.0) {
        violations.push(format!("top_p: {} is outside (0,1]", params.top_p));
    }
    if params.max_tokens == 0 {
        violations.push("max_tokens: must be at least 1".into());
    }

    if !violations.is_empty() {
        return Err(ConfigError { violations });
    }

    Ok(RunSettings {
        dataset: dataset.expect("validated"),
        policy: policy.expect("validated"),
        backend: backend.expect("validated"),
        retriever: retriever.expect("validated"),
        cache: config.cache.clone(),
        params,
        k_docs,
        workers,
        max_doc_chars: config.max_doc_chars,
        timestamp: config.timestamp.clone(),
        demo_pool: config.demo_pool.clone(),
        out: out.expect("validated"),
    })
}

/// One line of a script file for the scripted backend.
#[derive(Debug, Deserialize)]
#[serde(tag = "match", rename_all = "snake_case", deny_unknown_fields)]
enum ScriptLine {
    Exact {
        pattern: String,
        text: String,
        #[serde(default)]
        score: Option<f64>,
    },
    Contains {
        #[serde(default)]
        pattern: Option<String>,
        #[serde(default)]
        patterns: Vec<String>,
        text: String,
        #[serde(default)]
        score: Option<f64>,
    },
    Default {
        text: String,
        #[serde(default)]
        score: Option<f64>,
    },
}

/// Load a scripted backend from a JSONL script file. Rules apply in file
/// order; at most one `default` line is honored (the last).
pub fn load_script(path: &Path) -> Result<ScriptedClient, String> {
    let content = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read script {}: {e}", path.display()))?;
    let mut entries = Vec::new();
    let mut default = None;
    for (idx, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed: ScriptLine = serde_json::from_str(line)
            .map_err(|e| format!("script {} line {}: {e}", path.display(), idx + 1))?;
        match parsed {
            ScriptLine::Exact {
                pattern,
                text,
                score,
            } => {
                let mut entry = ScriptEntry::new(Matcher::Exact(pattern), text);
                entry.score = score;
                entries.push(entry);
            }
            ScriptLine::Contains {
                pattern,
                mut patterns,
                text,
                score,
            } => {
                if let Some(single) = pattern {
                    patterns.insert(0, single);
                }
                if patterns.is_empty() {
                    return Err(format!(
                        "script {} line {}: contains rule needs pattern or patterns",
                        path.display(),
                        idx + 1
                    ));
                }
                let mut entry = ScriptEntry::new(Matcher::Contains(patterns), text);
                entry.score = score;
                entries.push(entry);
            }
            ScriptLine::Default { text, score } => default = Some((text, score)),
        }
    }
    let mut client = ScriptedClient::new(entries);
    if let Some((text, score)) = default {
        client = client.with_default(text, score);
    }
    Ok(client)
}
