//! Client for an external response generator.
//!
//! The service POSTs the prompt bundle as `{history, entities, prefix_id}`
//! and expects `{"text": "..."}` back. Any failure (connection, timeout,
//! status, body) is reported as a [`GeneratorError`]; the dialogue engine
//! then falls back to the template backend.

use std::time::Duration;

use medconsult_core::dialogue::{Generator, GeneratorError, PromptBundle};
use serde::Deserialize;

#[derive(Debug, Deserialize)]
struct Reply {
    text: String,
}

#[derive(Debug, Clone)]
pub struct HttpGenerator {
    url: String,
    client: reqwest::blocking::Client,
}

impl HttpGenerator {
    pub fn new(url: impl Into<String>, timeout: Duration) -> Result<Self, GeneratorError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| GeneratorError(e.to_string()))?;
        Ok(Self { url: url.into(), client })
    }

    pub fn url(&self) -> &str {
        &self.url
    }
}

impl Generator for HttpGenerator {
    fn generate(&self, bundle: &PromptBundle) -> Result<String, GeneratorError> {
        let response = self
            .client
            .post(&self.url)
            .json(bundle)
            .send()
            .and_then(|r| r.error_for_status())
            .map_err(|e| GeneratorError(e.to_string()))?;
        let reply: Reply = response.json().map_err(|e| GeneratorError(e.to_string()))?;
        let text = reply.text.trim();
        if text.is_empty() {
            return Err(GeneratorError("empty reply".into()));
        }
        Ok(text.to_string())
    }
}
