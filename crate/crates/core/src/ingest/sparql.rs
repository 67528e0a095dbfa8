use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::header::{ACCEPT, RETRY_AFTER};
use reqwest::{StatusCode, Url};
use serde::Deserialize;

use super::source::{rank_subjects, KnowledgeSource, RankedSubject, SourceError, SubjectPage};
use crate::net::{with_retry, Attempt, RateLimiter, RetryPolicy};
use crate::types::{Answer, EntityId, Pid};

pub const DEFAULT_ENDPOINT: &str = "https://query.wikidata.org/sparql";

#[derive(Debug, Clone)]
pub struct SparqlConfig {
    pub endpoint: String,
    pub timeout: Duration,
    pub user_agent: String,
    pub requests_per_second: f64,
    pub retry: RetryPolicy,
    /// Rows per subject-listing request.
    pub page_size: usize,
}

impl Default for SparqlConfig {
    fn default() -> Self {
        SparqlConfig {
            endpoint: DEFAULT_ENDPOINT.to_string(),
            timeout: Duration::from_secs(60),
            user_agent: concat!("mutaprobe/", env!("CARGO_PKG_VERSION")).to_string(),
            requests_per_second: 2.0,
            retry: RetryPolicy::default(),
            page_size: 500,
        }
    }
}

#[derive(Deserialize)]
struct SparqlResults {
    results: Bindings,
}

#[derive(Deserialize)]
struct Bindings {
    bindings: Vec<std::collections::HashMap<String, Term>>,
}

#[derive(Deserialize)]
struct Term {
    value: String,
}

/// Knowledge source backed by a SPARQL endpoint with Wikidata vocabulary.
pub struct SparqlSource {
    client: Client,
    config: SparqlConfig,
    limiter: RateLimiter,
}

impl SparqlSource {
    pub fn new(config: SparqlConfig) -> Result<Self, SourceError> {
        let client = Client::builder()
            .timeout(config.timeout)
            .user_agent(config.user_agent.clone())
            .build()
            .map_err(|e| SourceError::Malformed(format!("http client: {e}")))?;
        let limiter = RateLimiter::per_second(config.requests_per_second);
        Ok(SparqlSource { client, config, limiter })
    }

    fn select(&self, query: &str) -> Result<Vec<std::collections::HashMap<String, Term>>, SourceError> {
        let url = Url::parse_with_params(&self.config.endpoint, &[("query", query), ("format", "json")])
            .map_err(|e| SourceError::Malformed(format!("endpoint url: {e}")))?;
        let body = with_retry(&self.config.retry, || {
            self.limiter.acquire();
            let resp = match self
                .client
                .get(url.clone())
                .header(ACCEPT, "application/sparql-results+json")
                .send()
            {
                Ok(r) => r,
                Err(e) if e.is_timeout() || e.is_connect() || e.is_request() => {
                    return Attempt::Retry(e.to_string(), None)
                }
                Err(e) => return Attempt::Fail(e.to_string()),
            };
            let status = resp.status();
            if status == StatusCode::TOO_MANY_REQUESTS || status.is_server_error() {
                let after = resp
                    .headers()
                    .get(RETRY_AFTER)
                    .and_then(|v| v.to_str().ok())
                    .and_then(|v| v.trim().parse::<u64>().ok())
                    .map(Duration::from_secs);
                return Attempt::Retry(format!("status {status}"), after);
            }
            if !status.is_success() {
                return Attempt::Fail(format!("status {status}"));
            }
            match resp.text() {
                Ok(t) => Attempt::Done(t),
                Err(e) => Attempt::Retry(e.to_string(), None),
            }
        })
        .map_err(|(message, attempts)| SourceError::Exhausted { attempts, message })?;
        let parsed: SparqlResults = serde_json::from_str(&body).map_err(|e| SourceError::Malformed(e.to_string()))?;
        Ok(parsed.results.bindings)
    }
}

/// `http://www.wikidata.org/entity/Q183` -> `Q183`.
fn entity_id(uri: &str) -> EntityId {
    EntityId::new(uri.rsplit('/').next().unwrap_or(uri))
}

fn subjects_query(pid: &Pid, limit: usize, offset: usize) -> String {
    format!(
        "SELECT ?s ?sLabel ?links WHERE {{ \
           {{ SELECT DISTINCT ?s WHERE {{ ?s wdt:{pid} ?o . }} }} \
           ?s wikibase:sitelinks ?links . \
           SERVICE wikibase:label {{ bd:serviceParam wikibase:language \"en\". }} \
         }} ORDER BY DESC(?links) ?s LIMIT {limit} OFFSET {offset}"
    )
}

fn objects_query(subject: &EntityId, pid: &Pid) -> String {
    format!(
        "SELECT ?o ?oLabel ?alias WHERE {{ \
           wd:{subject} wdt:{pid} ?o . \
           OPTIONAL {{ ?o skos:altLabel ?alias . FILTER(LANG(?alias) = \"en\") }} \
           SERVICE wikibase:label {{ bd:serviceParam wikibase:language \"en\". }} \
         }}"
    )
}

impl KnowledgeSource for SparqlSource {
    fn popular_subjects(&self, pid: &Pid, limit: usize) -> Result<SubjectPage, SourceError> {
        let mut page = SubjectPage::default();
        let mut offset = 0;
        while offset < limit {
            let size = self.config.page_size.max(1).min(limit - offset);
            let rows = match self.select(&subjects_query(pid, size, offset)) {
                Ok(r) => r,
                Err(e) if offset > 0 => {
                    page.warnings.push(format!("{pid}: subject page at offset {offset} dropped: {e}"));
                    break;
                }
                Err(e) => return Err(e),
            };
            let n = rows.len();
            for row in rows {
                let (Some(s), Some(links)) = (row.get("s"), row.get("links")) else {
                    continue;
                };
                let id = entity_id(&s.value);
                let label = row.get("sLabel").map(|t| t.value.clone()).unwrap_or_else(|| id.to_string());
                page.subjects.push(RankedSubject {
                    id,
                    label,
                    sitelinks: links.value.parse().unwrap_or(0),
                });
            }
            if n < size {
                break;
            }
            offset += size;
        }
        page.subjects = rank_subjects(page.subjects, limit);
        Ok(page)
    }

    fn objects(&self, subject: &EntityId, pid: &Pid) -> Result<Vec<Answer>, SourceError> {
        let rows = self.select(&objects_query(subject, pid))?;
        let mut out: Vec<(EntityId, Answer)> = Vec::new();
        for row in rows {
            let Some(o) = row.get("o") else { continue };
            let id = entity_id(&o.value);
            let pos = match out.iter().position(|(k, _)| *k == id) {
                Some(p) => p,
                None => {
                    let label = row.get("oLabel").map(|t| t.value.clone()).unwrap_or_else(|| o.value.clone());
                    out.push((id, Answer::new(label)));
                    out.len() - 1
                }
            };
            if let Some(alias) = row.get("alias") {
                let answer = &mut out[pos].1;
                if !answer.aliases.contains(&alias.value) {
                    answer.aliases.push(alias.value.clone());
                }
            }
        }
        Ok(out.into_iter().map(|(_, a)| a).collect())
    }
}
