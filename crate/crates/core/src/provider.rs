//! Optional HTTP client for an external text-embedding service.
//!
//! The service accepts `POST {base}/embed` with body `{"texts": [...]}` and
//! answers `{"vectors": [[...], ...]}`, one vector per text in order.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::ArticleRecord;

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [String],
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct EmbeddingProvider {
    endpoint: String,
    pub batch_size: usize,
    pub max_retries: u32,
    pub initial_backoff: Duration,
    agent: ureq::Agent,
}

impl EmbeddingProvider {
    pub fn new(base_url: &str) -> Self {
        EmbeddingProvider {
            endpoint: format!("{}/embed", base_url.trim_end_matches('/')),
            batch_size: 32,
            max_retries: 4,
            initial_backoff: Duration::from_millis(250),
            agent: ureq::AgentBuilder::new().timeout(Duration::from_secs(60)).build(),
        }
    }

    pub fn with_batch_size(mut self, batch_size: usize) -> Self {
        self.batch_size = batch_size.max(1);
        self
    }

    pub fn with_retries(mut self, max_retries: u32, initial_backoff: Duration) -> Self {
        self.max_retries = max_retries;
        self.initial_backoff = initial_backoff;
        self
    }

    fn post_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>> {
        let mut backoff = self.initial_backoff;
        let mut attempt = 0;
        loop {
            let outcome = self
                .agent
                .post(&self.endpoint)
                .send_json(EmbedRequest { texts })
                .map_err(|e| e.to_string())
                .and_then(|resp| resp.into_json::<EmbedResponse>().map_err(|e| e.to_string()));
            match outcome {
                Ok(resp) if resp.vectors.len() == texts.len() => return Ok(resp.vectors),
                Ok(resp) => {
                    return Err(Error::Provider(format!(
                        "asked for {} vectors, received {}",
                        texts.len(),
                        resp.vectors.len()
                    )))
                }
                Err(e) if attempt < self.max_retries => {
                    log::warn!("embedding request failed (attempt {}): {e}; retrying in {backoff:?}", attempt + 1);
                    std::thread::sleep(backoff);
                    backoff *= 2;
                    attempt += 1;
                }
                Err(e) => {
                    return Err(Error::Provider(format!(
                        "giving up after {} attempts: {e}",
                        attempt + 1
                    )))
                }
            }
        }
    }

    pub fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(texts.len());
        for batch in texts.chunks(self.batch_size) {
            out.extend(self.post_batch(batch)?);
        }
        Ok(out)
    }

    /// Fill in embeddings for articles that carry text but no vectors.
    /// Returns the number of articles embedded.
    pub fn embed_missing(&self, articles: &mut [ArticleRecord]) -> Result<usize> {
        let targets: Vec<usize> = articles
            .iter()
            .enumerate()
            .filter(|(_, a)| a.embedding.is_none() && a.chunk_embeddings.is_none() && a.text.is_some())
            .map(|(i, _)| i)
            .collect();
        if targets.is_empty() {
            return Ok(0);
        }
        let texts: Vec<String> = targets.iter().map(|&i| articles[i].text.clone().unwrap_or_default()).collect();
        let vectors = self.embed(&texts)?;
        for (i, v) in targets.iter().zip(vectors) {
            articles[*i].embedding = Some(v);
        }
        Ok(targets.len())
    }
}
