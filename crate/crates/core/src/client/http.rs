use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{DecodingConfig, TranslationCache, TranslationRequest};
use crate::error::{Error, Result};

/// Base URL of the serving endpoint; requests go to `<base>/translate`.
pub const ENDPOINT_ENV: &str = "MTGENDER_ENDPOINT";
/// Optional bearer token.
pub const TOKEN_ENV: &str = "MTGENDER_TOKEN";

#[derive(Serialize)]
struct WireRequest<'a> {
    prompt: &'a str,
    decoding: &'a DecodingConfig,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct WireResponse {
    text: String,
}

#[derive(Debug, Clone)]
pub struct HttpBackend {
    url: String,
    token: Option<String>,
    pub max_in_flight: usize,
    pub max_retries: u32,
    pub initial_backoff: Duration,
    pub max_backoff: Duration,
    pub timeout: Duration,
}

enum Failure {
    Transient(String),
    Fatal(String),
}

impl HttpBackend {
    pub fn new(base_url: impl Into<String>, token: Option<String>) -> Self {
        let base: String = base_url.into();
        Self {
            url: format!("{}/translate", base.trim_end_matches('/')),
            token,
            max_in_flight: 4,
            max_retries: 5,
            initial_backoff: Duration::from_millis(250),
            max_backoff: Duration::from_secs(8),
            timeout: Duration::from_secs(120),
        }
    }

    /// Reads the endpoint and token from the environment.
    pub fn from_env() -> Result<Self> {
        let base = std::env::var(ENDPOINT_ENV)
            .map_err(|_| Error::Config(format!("{ENDPOINT_ENV} is not set")))?;
        Ok(Self::new(base, std::env::var(TOKEN_ENV).ok()))
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    fn call(
        &self,
        client: &reqwest::blocking::Client,
        prompt: &str,
        decoding: &DecodingConfig,
    ) -> Result<String, Failure> {
        let body = WireRequest {
            prompt,
            decoding,
            max_tokens: decoding.max_tokens,
        };
        let mut request = client.post(&self.url).json(&body);
        if let Some(token) = &self.token {
            request = request.bearer_auth(token);
        }
        let response = request
            .send()
            .map_err(|e| Failure::Transient(e.to_string()))?;
        let status = response.status();
        if status.is_server_error() || status == reqwest::StatusCode::TOO_MANY_REQUESTS {
            return Err(Failure::Transient(format!("HTTP {status}")));
        }
        if !status.is_success() {
            return Err(Failure::Fatal(format!("HTTP {status}")));
        }
        response
            .json::<WireResponse>()
            .map(|r| r.text)
            .map_err(|e| Failure::Fatal(format!("bad response body: {e}")))
    }

    fn call_with_retries(
        &self,
        client: &reqwest::blocking::Client,
        prompt: &str,
        decoding: &DecodingConfig,
    ) -> std::result::Result<String, String> {
        let mut backoff = self.initial_backoff;
        let mut attempt = 0;
        loop {
            match self.call(client, prompt, decoding) {
                Ok(text) => return Ok(text),
                Err(Failure::Fatal(e)) => return Err(e),
                Err(Failure::Transient(e)) if attempt >= self.max_retries => {
                    return Err(format!("giving up after {} attempts: {e}", attempt + 1))
                }
                Err(Failure::Transient(e)) => {
                    log::debug!("transient failure ({e}); retrying in {backoff:?}");
                    std::thread::sleep(backoff);
                    backoff = (backoff * 2).min(self.max_backoff);
                    attempt += 1;
                }
            }
        }
    }

    /// Issues one request per distinct digest not already cached, with at
    /// most `max_in_flight` concurrent requests.
    pub(crate) fn translate_all(
        &self,
        requests: &[TranslationRequest],
        digests: &[String],
        decoding: &DecodingConfig,
        cache: Option<&TranslationCache>,
    ) -> Vec<std::result::Result<String, String>> {
        let client = match reqwest::blocking::Client::builder()
            .timeout(self.timeout)
            .build()
        {
            Ok(c) => c,
            Err(e) => {
                return requests
                    .iter()
                    .map(|_| Err(format!("http client: {e}")))
                    .collect()
            }
        };
        // First request index per distinct uncached digest.
        let mut pending: Vec<usize> = Vec::new();
        let mut seen = HashMap::new();
        for (i, d) in digests.iter().enumerate() {
            if cache.and_then(|c| c.get(d)).is_none() && !seen.contains_key(d) {
                seen.insert(d.clone(), i);
                pending.push(i);
            }
        }
        let fetched: Mutex<HashMap<String, std::result::Result<String, String>>> =
            Mutex::new(HashMap::new());
        let next = AtomicUsize::new(0);
        let workers = self.max_in_flight.max(1).min(pending.len().max(1));
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let k = next.fetch_add(1, Ordering::SeqCst);
                    let Some(&i) = pending.get(k) else { break };
                    let mut result = self.call_with_retries(&client, &requests[i].prompt, decoding);
                    if let (Ok(text), Some(cache)) = (&result, cache) {
                        if let Err(e) = cache.insert(&digests[i], text) {
                            result = Err(e.to_string());
                        }
                    }
                    fetched
                        .lock()
                        .expect("results lock")
                        .insert(digests[i].clone(), result);
                });
            }
        });
        let fetched = fetched.into_inner().expect("results lock");
        digests
            .iter()
            .map(|d| match fetched.get(d) {
                Some(r) => r.clone(),
                None => cache
                    .and_then(|c| c.get(d))
                    .ok_or_else(|| "result missing".to_string()),
            })
            .collect()
    }
}
