//! Optional TOML run configuration. Command-line flags win over environment
//! variables, which win over this file; anything still unset falls back to
//! the library defaults.

use std::path::Path;

use serde::Deserialize;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub adapter_url: Option<String>,
    pub adapter_workers: Option<usize>,
    pub model: Option<String>,
    #[serde(default)]
    pub ingest: IngestSection,
    #[serde(default)]
    pub evaluate: EvaluateSection,
    #[serde(default)]
    pub probe: ProbeSection,
    #[serde(default)]
    pub update: UpdateSection,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestSection {
    pub endpoint: Option<String>,
    pub limit: Option<usize>,
    pub tau: Option<f64>,
    pub workers: Option<usize>,
    pub requests_per_second: Option<f64>,
    pub profile_sample: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateSection {
    pub best_template: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSection {
    /// Comma-separated fractions, same syntax as `--schedule`.
    pub schedule: Option<String>,
    pub control: Option<bool>,
    pub frequency_bins: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UpdateSection {
    pub conf_threshold: Option<f64>,
    pub percentiles: Option<usize>,
}

impl FileConfig {
    pub fn read(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(toml::from_str(&text)?)
    }
}

/// First value present, in precedence order.
pub fn pick<T>(flag_or_env: Option<T>, file: Option<T>, default: T) -> T {
    flag_or_env.or(file).unwrap_or(default)
}
