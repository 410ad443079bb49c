//! JSON-over-HTTP backend.
//!
//! ```text
//! POST /embed    {"texts": [..]}                          -> {"vectors": [[..], ..]}
//! POST /score    {"tier", "query", "passages": [..]}      -> {"scores": [..]}
//! POST /spans    {"query", "document", "max_spans"}       -> {"spans": [{"start","end"}, ..]}
//! POST /generate {"prompt", "max_tokens"}                 -> {"text": ".."}
//! ```
//!
//! Non-2xx responses carry `{"error": ".."}`. Transport errors and 5xx are
//! retried with exponential backoff; 4xx are not.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{
    Capability, EmbeddingBackend, EmbeddingVector, GatewayError, GatewayResult, GenerationBackend, ScoringBackend,
    Span, SpanBackend, Tier,
};

#[derive(Debug, Clone)]
pub struct HttpOptions {
    pub timeout: Duration,
    pub retries: u32,
    pub backoff: Duration,
    pub max_in_flight: usize,
}

impl Default for HttpOptions {
    fn default() -> Self {
        HttpOptions {
            timeout: Duration::from_secs(120),
            retries: 2,
            backoff: Duration::from_millis(200),
            max_in_flight: 8,
        }
    }
}

/// Counting semaphore bounding concurrent requests.
#[derive(Debug)]
struct Limiter {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Limiter {
    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap();
        while *free == 0 {
            free = self.cv.wait(free).unwrap();
        }
        *free -= 1;
        Permit(self)
    }
}

struct Permit<'a>(&'a Limiter);

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap() += 1;
        self.0.cv.notify_one();
    }
}

#[derive(Debug)]
pub struct HttpBackend {
    base: url::Url,
    client: reqwest::blocking::Client,
    opts: HttpOptions,
    limiter: Limiter,
}

#[derive(Deserialize)]
struct ErrorBody {
    error: String,
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct ScoreResponse {
    scores: Vec<f64>,
}

#[derive(Deserialize)]
struct SpansResponse {
    spans: Vec<Span>,
}

#[derive(Deserialize)]
struct GenerateResponse {
    text: String,
}

impl HttpBackend {
    pub fn new(base: &str, opts: HttpOptions) -> crate::Result<Self> {
        let mut base =
            url::Url::parse(base).map_err(|e| crate::Error::Config(format!("invalid backend URL {base:?}: {e}")))?;
        if !base.path().ends_with('/') {
            let p = format!("{}/", base.path());
            base.set_path(&p);
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(opts.timeout)
            .build()
            .map_err(|e| crate::Error::Config(format!("cannot build HTTP client: {e}")))?;
        let limiter = Limiter {
            free: Mutex::new(opts.max_in_flight.max(1)),
            cv: Condvar::new(),
        };
        Ok(HttpBackend {
            base,
            client,
            opts,
            limiter,
        })
    }

    fn post<B: Serialize, R: DeserializeOwned>(&self, cap: Capability, endpoint: &str, body: &B) -> GatewayResult<R> {
        let url = self.base.join(endpoint).map_err(|e| GatewayError::Protocol {
            capability: cap,
            message: e.to_string(),
        })?;
        let _permit = self.limiter.acquire();
        let mut attempt = 0;
        loop {
            let outcome = self.client.post(url.clone()).json(body).send();
            let retryable = match outcome {
                Ok(resp) if resp.status().is_success() => {
                    return resp.json::<R>().map_err(|e| GatewayError::Protocol {
                        capability: cap,
                        message: e.to_string(),
                    });
                }
                Ok(resp) => {
                    let status = resp.status();
                    let message = resp
                        .text()
                        .ok()
                        .and_then(|t| serde_json::from_str::<ErrorBody>(&t).ok().map(|b| b.error).or(Some(t)))
                        .unwrap_or_default();
                    let err = GatewayError::Status {
                        capability: cap,
                        status: status.as_u16(),
                        retries: attempt,
                        message,
                    };
                    if status.is_client_error() {
                        return Err(err);
                    }
                    err
                }
                Err(e) => GatewayError::Transport {
                    capability: cap,
                    retries: attempt,
                    message: e.to_string(),
                },
            };
            if attempt >= self.opts.retries {
                return Err(retryable);
            }
            std::thread::sleep(self.opts.backoff * 2u32.pow(attempt));
            attempt += 1;
        }
    }
}

impl EmbeddingBackend for HttpBackend {
    fn embed(&self, texts: &[String]) -> GatewayResult<Vec<EmbeddingVector>> {
        let r: EmbedResponse = self.post(Capability::Embed, "embed", &json!({ "texts": texts }))?;
        let dim = r.vectors.first().map_or(0, Vec::len);
        if r.vectors.iter().any(|v| v.len() != dim) {
            return Err(GatewayError::Protocol {
                capability: Capability::Embed,
                message: "vectors of mixed dimension".into(),
            });
        }
        Ok(r.vectors.into_iter().map(EmbeddingVector).collect())
    }
}

impl ScoringBackend for HttpBackend {
    fn score(&self, tier: Tier, query: &str, passages: &[String]) -> GatewayResult<Vec<f64>> {
        let body = json!({ "tier": tier, "query": query, "passages": passages });
        let r: ScoreResponse = self.post(Capability::Score, "score", &body)?;
        Ok(r.scores)
    }
}

impl SpanBackend for HttpBackend {
    fn spans(&self, query: &str, document: &str, max_spans: usize) -> GatewayResult<Vec<Span>> {
        let body = json!({ "query": query, "document": document, "max_spans": max_spans });
        let r: SpansResponse = self.post(Capability::Spans, "spans", &body)?;
        Ok(r.spans)
    }
}

impl GenerationBackend for HttpBackend {
    fn generate(&self, prompt: &str, max_tokens: usize) -> GatewayResult<String> {
        let body = json!({ "prompt": prompt, "max_tokens": max_tokens });
        let r: GenerateResponse = self.post(Capability::Generate, "generate", &body)?;
        Ok(r.text)
    }
}
