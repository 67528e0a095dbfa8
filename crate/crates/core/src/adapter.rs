//! Client side of the model adapter protocol.
//!
//! An adapter serves one causal language model over HTTP:
//!
//! * `POST /generate` takes [`GenerateRequest`] and returns the greedy
//!   continuation with the probability of its first token.
//! * `POST /represent` takes [`RepresentRequest`] and returns the last-layer
//!   hidden state at the last input token, hex-encoded little-endian `f32`.
//! * `GET /health` describes the model.
//!
//! Errors come back as a non-2xx status with an [`ErrorBody`].

use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::header::RETRY_AFTER;
use reqwest::StatusCode;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::cloze;
use crate::dataset::Dataset;
use crate::net::{parallel_map, with_retry, Attempt, RetryPolicy};
use crate::probe::SplitItem;
use crate::types::{PredictionRecord, RepresentationRecord, TEMPLATES_PER_RELATION};
use crate::update::{UpdateCase, UpdateGeneration};

pub const DEFAULT_MAX_NEW_TOKENS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateRequest {
    pub prompt: String,
    pub max_new_tokens: usize,
    #[serde(default)]
    pub instruction_mode: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateResponse {
    pub generation: String,
    pub first_token_probability: f64,
    pub token_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepresentRequest {
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepresentResponse {
    #[serde(with = "crate::hexvec")]
    pub vector: Vec<f32>,
    pub d: usize,
    pub layer: String,
    pub position: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub model_id: String,
    pub d: usize,
    pub context_length: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}

#[derive(Debug, thiserror::Error)]
pub enum AdapterError {
    #[error("adapter unreachable after {attempts} attempts: {message}")]
    Unreachable { attempts: u32, message: String },
    #[error("adapter rejected the request ({status}): {message}")]
    Rejected { status: u16, message: String },
    #[error("adapter response violates the protocol: {0}")]
    Protocol(String),
}

impl GenerateResponse {
    pub fn validate(&self) -> Result<(), AdapterError> {
        let p = self.first_token_probability;
        if !(p > 0.0 && p <= 1.0) {
            return Err(AdapterError::Protocol(format!("first_token_probability {p} outside (0, 1]")));
        }
        Ok(())
    }
}

impl RepresentResponse {
    pub fn validate(&self, expected_d: Option<usize>) -> Result<(), AdapterError> {
        if self.vector.len() != self.d {
            return Err(AdapterError::Protocol(format!(
                "vector has {} components but d = {}",
                self.vector.len(),
                self.d
            )));
        }
        if let Some(d) = expected_d.filter(|d| *d != self.d) {
            return Err(AdapterError::Protocol(format!("d = {} but the model reports {d}", self.d)));
        }
        if self.vector.iter().any(|v| !v.is_finite()) {
            return Err(AdapterError::Protocol("non-finite vector component".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct AdapterConfig {
    pub url: String,
    pub timeout: Duration,
    pub retry: RetryPolicy,
    pub workers: usize,
    pub max_new_tokens: usize,
    pub instruction_mode: bool,
}

impl AdapterConfig {
    pub fn new(url: impl Into<String>) -> Self {
        AdapterConfig {
            url: url.into(),
            timeout: Duration::from_secs(120),
            retry: RetryPolicy::default(),
            workers: 1,
            max_new_tokens: DEFAULT_MAX_NEW_TOKENS,
            instruction_mode: false,
        }
    }
}

/// Blocking client for one adapter.
pub struct AdapterClient {
    client: Client,
    config: AdapterConfig,
}

impl AdapterClient {
    pub fn new(config: AdapterConfig) -> Result<Self, AdapterError> {
        let client = Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| AdapterError::Protocol(format!("http client: {e}")))?;
        Ok(AdapterClient { client, config })
    }

    pub fn config(&self) -> &AdapterConfig {
        &self.config
    }

    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.config.url.trim_end_matches('/'))
    }

    fn call<B: Serialize, T: DeserializeOwned>(&self, path: &str, body: Option<&B>) -> Result<T, AdapterError> {
        let url = self.url(path);
        let text = with_retry(&self.config.retry, || {
            let req = match body {
                Some(b) => self.client.post(&url).json(b),
                None => self.client.get(&url),
            };
            let resp = match req.send() {
                Ok(r) => r,
                Err(e) if e.is_timeout() || e.is_connect() || e.is_request() => return Attempt::Retry(e.to_string(), None),
                Err(e) => return Attempt::Fail(e.to_string()),
            };
            let status = resp.status();
            let after = resp
                .headers()
                .get(RETRY_AFTER)
                .and_then(|v| v.to_str().ok())
                .and_then(|v| v.trim().parse::<u64>().ok())
                .map(Duration::from_secs);
            let text = match resp.text() {
                Ok(t) => t,
                Err(e) => return Attempt::Retry(e.to_string(), None),
            };
            if status.is_server_error() || status == StatusCode::TOO_MANY_REQUESTS {
                return Attempt::Retry(format!("status {status}: {text}"), after);
            }
            Attempt::Done((status, text))
        })
        .map_err(|(message, attempts)| AdapterError::Unreachable { attempts, message })?;
        let (status, text) = text;
        if !status.is_success() {
            let message = serde_json::from_str::<ErrorBody>(&text).map(|e| e.error).unwrap_or(text);
            return Err(AdapterError::Rejected {
                status: status.as_u16(),
                message,
            });
        }
        serde_json::from_str(&text).map_err(|e| AdapterError::Protocol(format!("{path}: {e}")))
    }

    pub fn health(&self) -> Result<Health, AdapterError> {
        self.call::<(), Health>("/health", None)
    }

    pub fn generate(&self, prompt: &str) -> Result<GenerateResponse, AdapterError> {
        let req = GenerateRequest {
            prompt: prompt.to_string(),
            max_new_tokens: self.config.max_new_tokens,
            instruction_mode: self.config.instruction_mode,
        };
        let resp: GenerateResponse = self.call("/generate", Some(&req))?;
        resp.validate()?;
        Ok(resp)
    }

    pub fn represent(&self, text: &str, expected_d: Option<usize>) -> Result<RepresentResponse, AdapterError> {
        let resp: RepresentResponse = self.call(
            "/represent",
            Some(&RepresentRequest {
                text: text.to_string(),
            }),
        )?;
        resp.validate(expected_d)?;
        Ok(resp)
    }
}

/// Greedy generations for every query under every template, in dataset
/// order.
pub fn predict_dataset(client: &AdapterClient, dataset: &Dataset) -> Result<Vec<PredictionRecord>, AdapterError> {
    let rels = dataset.relation_index();
    let mut jobs = Vec::new();
    for q in &dataset.queries {
        let rel = rels
            .get(&q.query.relation_pid)
            .ok_or_else(|| AdapterError::Protocol(format!("unknown relation {}", q.query.relation_pid)))?;
        for t in 0..TEMPLATES_PER_RELATION {
            let prompt = cloze::prompt(&rel.templates[t], &q.query.subject_label)
                .map_err(|e| AdapterError::Protocol(e.to_string()))?;
            jobs.push((q.query.query_id.clone(), t, prompt));
        }
    }
    parallel_map(client.config.workers, &jobs, |(qid, t, prompt)| {
        let r = client.generate(prompt)?;
        Ok(PredictionRecord {
            query_id: qid.clone(),
            template_index: *t,
            prompt: prompt.clone(),
            generation: r.generation,
            first_token_probability: r.first_token_probability,
        })
    })
}

/// Representations for each planned (query, template, object) triple, with
/// the template fully verbalized.
pub fn represent_items(
    client: &AdapterClient,
    dataset: &Dataset,
    items: &[&SplitItem],
) -> Result<Vec<RepresentationRecord>, AdapterError> {
    let d = client.health()?.d;
    let qidx = dataset.query_index();
    let rels = dataset.relation_index();
    parallel_map(client.config.workers, items, |item| {
        let q = qidx
            .get(item.query_id.as_str())
            .ok_or_else(|| AdapterError::Protocol(format!("unknown query {}", item.query_id)))?;
        let template = &rels[&item.relation].templates[item.template_index];
        let text = cloze::fill(template, &q.query.subject_label, &item.object)
            .map_err(|e| AdapterError::Protocol(e.to_string()))?;
        let r = client.represent(&text, Some(d))?;
        Ok(RepresentationRecord {
            query_id: item.query_id.clone(),
            template_index: item.template_index,
            object_used: item.object.clone(),
            vector: r.vector,
            label: item.label,
        })
    })
}

/// Generations for update prompts, in case order.
pub fn generate_updates(client: &AdapterClient, cases: &[UpdateCase]) -> Result<Vec<UpdateGeneration>, AdapterError> {
    parallel_map(client.config.workers, cases, |c| {
        Ok(UpdateGeneration {
            query_id: c.query_id.clone(),
            prompt: c.prompt.clone(),
            generation: client.generate(&c.prompt)?.generation,
        })
    })
}
