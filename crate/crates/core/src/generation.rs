//! Text-to-image backend client.
//!
//! Remote backends speak a small JSON protocol:
//!
//! ```text
//! POST {endpoint}/generate
//! {"prompt": "...", "seed": 7, "width": 512, "height": 512, "steps": 30, "guidance_scale": 7.5}
//!
//! 200 OK
//! {"image_base64": "<PNG bytes, base64>"}
//! ```
//!
//! Any other status is a server error. The mock backend renders a
//! deterministic four-quadrant PNG from the prompt and seed instead.

use std::io::Cursor;
use std::time::{Duration, Instant};

use base64::Engine;
use futures::stream::{self, StreamExt};
use image::{ImageFormat, RgbImage};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hash::fnv1a64;

/// Overrides [`BackendConfig::endpoint`] when set.
pub const BACKEND_URL_ENV: &str = "SEMAUG_BACKEND_URL";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub prompt: String,
    pub seed: u64,
    pub width: u32,
    pub height: u32,
    pub steps: u32,
    pub guidance_scale: f64,
}

impl GenerationRequest {
    /// A request with the default sampler settings (512×512, 30 steps,
    /// guidance 7.5).
    pub fn new(prompt: impl Into<String>, seed: u64) -> Self {
        RequestTemplate::default().request(prompt, seed)
    }

    pub fn validate(&self) -> Result<(), GenerationError> {
        let bad = |reason: String| Err(GenerationError::InvalidRequest(reason));
        if self.prompt.trim().is_empty() {
            return bad("prompt is empty".into());
        }
        if self.width == 0
            || self.height == 0
            || !self.width.is_multiple_of(8)
            || !self.height.is_multiple_of(8)
        {
            return bad(format!(
                "dimensions {}x{} must be positive multiples of 8",
                self.width, self.height
            ));
        }
        if self.steps == 0 {
            return bad("steps must be positive".into());
        }
        if !(self.guidance_scale.is_finite() && self.guidance_scale > 0.0) {
            return bad(format!(
                "guidance_scale must be positive, got {}",
                self.guidance_scale
            ));
        }
        Ok(())
    }
}

/// Sampler settings shared by every request of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RequestTemplate {
    pub width: u32,
    pub height: u32,
    pub steps: u32,
    pub guidance_scale: f64,
}

impl Default for RequestTemplate {
    fn default() -> Self {
        Self {
            width: 512,
            height: 512,
            steps: 30,
            guidance_scale: 7.5,
        }
    }
}

impl RequestTemplate {
    pub fn request(&self, prompt: impl Into<String>, seed: u64) -> GenerationRequest {
        GenerationRequest {
            prompt: prompt.into(),
            seed,
            width: self.width,
            height: self.height,
            steps: self.steps,
            guidance_scale: self.guidance_scale,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationResult {
    /// PNG bytes.
    pub image: Vec<u8>,
    pub request_echo: GenerationRequest,
    pub backend_id: String,
    pub elapsed_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Remote,
    Mock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub endpoint: Option<String>,
    pub timeout_ms: u64,
    pub max_in_flight: usize,
    pub retries: u32,
    pub backoff_base_ms: u64,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            kind: BackendKind::Mock,
            endpoint: None,
            timeout_ms: 120_000,
            max_in_flight: 4,
            retries: 3,
            backoff_base_ms: 500,
        }
    }
}

impl BackendConfig {
    pub fn mock() -> Self {
        Self::default()
    }

    pub fn remote(endpoint: impl Into<String>) -> Self {
        Self {
            kind: BackendKind::Remote,
            endpoint: Some(endpoint.into()),
            ..Self::default()
        }
    }

    /// Replaces the endpoint with `url` when one is given (typically the
    /// value of [`BACKEND_URL_ENV`]).
    pub fn with_endpoint_override(mut self, url: Option<String>) -> Self {
        if let Some(url) = url.filter(|u| !u.trim().is_empty()) {
            self.endpoint = Some(url);
        }
        self
    }

    pub fn validate(&self) -> Result<(), GenerationError> {
        let bad = |reason: &str| Err(GenerationError::Config(reason.to_string()));
        if self.kind == BackendKind::Remote
            && self.endpoint.as_deref().is_none_or(|e| e.trim().is_empty())
        {
            return bad("remote backend requires an endpoint");
        }
        if self.timeout_ms == 0 {
            return bad("timeout_ms must be positive");
        }
        if self.max_in_flight == 0 {
            return bad("max_in_flight must be positive");
        }
        if self.backoff_base_ms == 0 {
            return bad("backoff_base_ms must be positive");
        }
        Ok(())
    }

    /// Delay before retry number `retry` (1-based): base, 2×base, 4×base, ...
    pub fn backoff(&self, retry: u32) -> Duration {
        let factor = 1u64 << retry.saturating_sub(1).min(20);
        Duration::from_millis(self.backoff_base_ms.saturating_mul(factor))
    }
}

#[derive(Debug, Error)]
pub enum GenerationError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("invalid backend config: {0}")]
    Config(String),
    #[error("request timed out")]
    Timeout,
    #[error("server returned {status}: {body}")]
    ServerError { status: u16, body: String },
    #[error("connection failed: {0}")]
    Connection(String),
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("gave up after {attempts} attempts: {last}")]
    TransportFailed {
        attempts: u32,
        last: Box<GenerationError>,
    },
}

impl GenerationError {
    fn is_retryable(&self) -> bool {
        match self {
            GenerationError::Timeout | GenerationError::Connection(_) => true,
            GenerationError::ServerError { status, .. } => {
                *status >= 500 || *status == 429 || *status == 408
            }
            _ => false,
        }
    }
}

/// Quadrant colors for the mock image: `h = fnv1a64(prompt) ^ seed`, its
/// big-endian bytes repeated twice, three bytes per quadrant in the order
/// top-left, top-right, bottom-left, bottom-right.
pub fn mock_palette(prompt: &str, seed: u64) -> [[u8; 3]; 4] {
    let h = (fnv1a64(prompt.as_bytes()) ^ seed).to_be_bytes();
    let mut doubled = [0u8; 16];
    doubled[..8].copy_from_slice(&h);
    doubled[8..].copy_from_slice(&h);
    std::array::from_fn(|k| [doubled[3 * k], doubled[3 * k + 1], doubled[3 * k + 2]])
}

/// Deterministic stand-in for a diffusion model. The request must be valid.
pub fn mock_generate(req: &GenerationRequest) -> GenerationResult {
    let palette = mock_palette(&req.prompt, req.seed);
    let (half_w, half_h) = (req.width / 2, req.height / 2);
    let img = RgbImage::from_fn(req.width, req.height, |x, y| {
        let k = usize::from(x >= half_w) + 2 * usize::from(y >= half_h);
        image::Rgb(palette[k])
    });
    let mut png = Vec::new();
    img.write_to(&mut Cursor::new(&mut png), ImageFormat::Png)
        .expect("encoding an in-memory PNG cannot fail");
    GenerationResult {
        image: png,
        request_echo: req.clone(),
        backend_id: "mock".to_string(),
        elapsed_ms: 0,
    }
}

/// Checks that `png` decodes to exactly `width`×`height`.
pub fn check_image(png: &[u8], width: u32, height: u32) -> Result<(), GenerationError> {
    let img = image::load_from_memory_with_format(png, ImageFormat::Png)
        .map_err(|e| GenerationError::InvalidImage(e.to_string()))?;
    if img.width() != width || img.height() != height {
        return Err(GenerationError::InvalidImage(format!(
            "expected {width}x{height}, got {}x{}",
            img.width(),
            img.height()
        )));
    }
    Ok(())
}

#[derive(Deserialize)]
struct WireResponse {
    image_base64: String,
}

/// A configured backend. Cheap to share by reference across tasks.
#[derive(Debug, Clone)]
pub struct Generator {
    cfg: BackendConfig,
    client: Option<reqwest::Client>,
}

impl Generator {
    pub fn new(cfg: BackendConfig) -> Result<Self, GenerationError> {
        cfg.validate()?;
        let client = match cfg.kind {
            BackendKind::Mock => None,
            BackendKind::Remote => Some(
                reqwest::Client::builder()
                    .timeout(Duration::from_millis(cfg.timeout_ms))
                    .build()
                    .map_err(|e| GenerationError::Config(e.to_string()))?,
            ),
        };
        Ok(Self { cfg, client })
    }

    pub fn config(&self) -> &BackendConfig {
        &self.cfg
    }

    /// Generates one image, retrying transient failures with exponential
    /// backoff.
    pub async fn generate(
        &self,
        req: GenerationRequest,
    ) -> Result<GenerationResult, GenerationError> {
        req.validate()?;
        let Some(client) = &self.client else {
            return tokio::task::spawn_blocking(move || mock_generate(&req))
                .await
                .map_err(|e| GenerationError::Connection(e.to_string()));
        };

        let mut attempt = 0;
        loop {
            attempt += 1;
            match self.post_once(client, &req).await {
                Ok(result) => return Ok(result),
                Err(err) if !err.is_retryable() => return Err(err),
                Err(err) if attempt > self.cfg.retries => {
                    return Err(GenerationError::TransportFailed {
                        attempts: attempt,
                        last: Box::new(err),
                    })
                }
                Err(err) => {
                    let delay = self.cfg.backoff(attempt);
                    tracing::warn!(attempt, ?delay, error = %err, "generation failed, retrying");
                    tokio::time::sleep(delay).await;
                }
            }
        }
    }

    async fn post_once(
        &self,
        client: &reqwest::Client,
        req: &GenerationRequest,
    ) -> Result<GenerationResult, GenerationError> {
        let endpoint = self.cfg.endpoint.as_deref().unwrap_or_default();
        let url = format!("{}/generate", endpoint.trim_end_matches('/'));
        let started = Instant::now();

        let response = client
            .post(&url)
            .json(req)
            .send()
            .await
            .map_err(transport_error)?;
        let status = response.status();
        let body = response.bytes().await.map_err(transport_error)?;
        if status != reqwest::StatusCode::OK {
            let excerpt: String = String::from_utf8_lossy(&body).chars().take(200).collect();
            return Err(GenerationError::ServerError {
                status: status.as_u16(),
                body: excerpt,
            });
        }

        let wire: WireResponse = serde_json::from_slice(&body)
            .map_err(|e| GenerationError::InvalidImage(format!("bad response body: {e}")))?;
        let image = base64::engine::general_purpose::STANDARD
            .decode(wire.image_base64.trim())
            .map_err(|e| GenerationError::InvalidImage(format!("bad base64: {e}")))?;
        check_image(&image, req.width, req.height)?;

        Ok(GenerationResult {
            image,
            request_echo: req.clone(),
            backend_id: endpoint.to_string(),
            elapsed_ms: started.elapsed().as_millis() as u64,
        })
    }

    /// Runs every request with at most `max_in_flight` outstanding. Slot `i`
    /// of the output holds the outcome of `reqs[i]`.
    pub async fn batch_generate(
        &self,
        reqs: Vec<GenerationRequest>,
    ) -> Vec<Result<GenerationResult, GenerationError>> {
        stream::iter(reqs.into_iter().map(|r| self.generate(r)))
            .buffered(self.cfg.max_in_flight)
            .collect()
            .await
    }
}

fn transport_error(e: reqwest::Error) -> GenerationError {
    if e.is_timeout() {
        GenerationError::Timeout
    } else {
        GenerationError::Connection(e.to_string())
    }
}

pub async fn generate(
    cfg: &BackendConfig,
    req: GenerationRequest,
) -> Result<GenerationResult, GenerationError> {
    Generator::new(cfg.clone())?.generate(req).await
}

pub async fn batch_generate(
    cfg: &BackendConfig,
    reqs: Vec<GenerationRequest>,
) -> Result<Vec<Result<GenerationResult, GenerationError>>, GenerationError> {
    Ok(Generator::new(cfg.clone())?.batch_generate(reqs).await)
}
