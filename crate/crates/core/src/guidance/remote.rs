//! HTTP client for the score-distillation service.

use std::io::Read;
use std::time::Duration;

use super::protocol::{decode_response, encode_request};
use super::{GuidanceContext, GuidanceGradient, GuidanceOracle, ViewInfo};
use crate::error::{Error, Result};
use crate::renderer::RgbImage;

#[derive(Clone, Debug)]
pub struct RemoteOracle {
    pub endpoint: String,
    pub attempts: u32,
    /// Delay before the second attempt; doubles after each failure.
    pub backoff: Duration,
    pub timeout: Duration,
    /// Square input size the service expects, if any; renders are
    /// upsampled to it before submission.
    pub input_size: Option<usize>,
    agent: ureq::Agent,
}

enum Failure {
    Retry(String),
    Fatal(Error),
}

impl RemoteOracle {
    pub fn new(endpoint: impl Into<String>) -> Self {
        let timeout = Duration::from_secs(60);
        Self {
            endpoint: endpoint.into().trim_end_matches('/').to_string(),
            attempts: 3,
            backoff: Duration::from_millis(250),
            timeout,
            input_size: None,
            agent: ureq::AgentBuilder::new().timeout(timeout).build(),
        }
    }

    pub fn with_backoff(mut self, backoff: Duration) -> Self {
        self.backoff = backoff;
        self
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self.agent = ureq::AgentBuilder::new().timeout(timeout).build();
        self
    }

    pub fn with_input_size(mut self, size: usize) -> Self {
        self.input_size = Some(size);
        self
    }

    fn url(&self) -> String {
        format!("{}/sds_grad", self.endpoint)
    }

    fn attempt(&self, body: &[u8], height: usize, width: usize) -> std::result::Result<GuidanceGradient, Failure> {
        match self.agent.post(&self.url()).set("Content-Type", "application/octet-stream").send_bytes(body) {
            Ok(resp) => {
                let mut buf = Vec::new();
                resp.into_reader()
                    .read_to_end(&mut buf)
                    .map_err(|e| Failure::Retry(format!("reading response: {e}")))?;
                decode_response(&buf, height, width).map_err(Failure::Fatal)
            }
            Err(ureq::Error::Status(code, resp)) => {
                let text = resp.into_string().unwrap_or_default();
                if code == 429 || code >= 500 {
                    Err(Failure::Retry(format!("HTTP {code}: {text}")))
                } else {
                    Err(Failure::Fatal(Error::Protocol(format!("service rejected the request with HTTP {code}: {text}"))))
                }
            }
            Err(ureq::Error::Transport(t)) => Err(Failure::Retry(t.to_string())),
        }
    }

    /// Submit `image` and return the service's gradient, retrying transient
    /// failures with exponential backoff.
    pub fn remote_sds_gradient(&self, image: &RgbImage, ctx: &GuidanceContext) -> Result<GuidanceGradient> {
        ctx.validate()?;
        let body = encode_request(image, ctx);
        let mut delay = self.backoff;
        let mut last = String::new();
        for attempt in 1..=self.attempts.max(1) {
            match self.attempt(&body, image.height, image.width) {
                Ok(g) => return Ok(g),
                Err(Failure::Fatal(e)) => return Err(e),
                Err(Failure::Retry(msg)) => {
                    last = msg;
                    if attempt < self.attempts {
                        std::thread::sleep(delay);
                        delay *= 2;
                    }
                }
            }
        }
        Err(Error::Transport {
            endpoint: self.endpoint.clone(),
            attempts: self.attempts.max(1),
            message: last,
        })
    }
}

impl GuidanceOracle for RemoteOracle {
    fn name(&self) -> &str {
        "remote"
    }

    fn input_size(&self) -> Option<usize> {
        self.input_size
    }

    fn gradient(&mut self, image: &RgbImage, ctx: &GuidanceContext, _view: &ViewInfo<'_>) -> Result<GuidanceGradient> {
        self.remote_sds_gradient(image, ctx)
    }
}
