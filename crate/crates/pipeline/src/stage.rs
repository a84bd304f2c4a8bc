//! Stage kinds, service endpoints and the transport layer.

use crate::mock;
use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::path::Path;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageKind {
    PromptGen,
    TextToImage,
    DepthEstimate,
    TextureAugment,
    DragEdit,
    #[serde(rename = "image_to_3d")]
    ImageTo3D,
    PoolIngest,
    SceneCompose,
}

impl StageKind {
    /// Stage DAG order.
    pub const ALL: [StageKind; 8] = [
        StageKind::PromptGen,
        StageKind::TextToImage,
        StageKind::DepthEstimate,
        StageKind::TextureAugment,
        StageKind::DragEdit,
        StageKind::ImageTo3D,
        StageKind::PoolIngest,
        StageKind::SceneCompose,
    ];

    /// Stages served by an external model.
    pub const GENERATIVE: [StageKind; 6] = [
        StageKind::PromptGen,
        StageKind::TextToImage,
        StageKind::DepthEstimate,
        StageKind::TextureAugment,
        StageKind::DragEdit,
        StageKind::ImageTo3D,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StageKind::PromptGen => "prompt_gen",
            StageKind::TextToImage => "text_to_image",
            StageKind::DepthEstimate => "depth_estimate",
            StageKind::TextureAugment => "texture_augment",
            StageKind::DragEdit => "drag_edit",
            StageKind::ImageTo3D => "image_to_3d",
            StageKind::PoolIngest => "pool_ingest",
            StageKind::SceneCompose => "scene_compose",
        }
    }

    pub fn is_generative(self) -> bool {
        Self::GENERATIVE.contains(&self)
    }

    /// The stage that feeds this one, if any.
    pub fn upstream(self) -> Option<StageKind> {
        let i = Self::ALL.iter().position(|&s| s == self)?;
        i.checked_sub(1).map(|j| Self::ALL[j])
    }
}

impl std::fmt::Display for StageKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "transport", rename_all = "snake_case")]
pub enum Transport {
    Mock,
    /// Run through `sh -c` after substituting `{in}` and `{out}` with the
    /// request and response file paths.
    Subprocess { command: String },
    /// POST the request envelope to `url`.
    Http { url: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceEndpoint {
    pub stage: StageKind,
    #[serde(flatten)]
    pub transport: Transport,
    #[serde(default = "default_timeout")]
    pub timeout_s: f64,
    #[serde(default = "default_retries")]
    pub retries: u32,
    /// First retry delay; doubles on each further attempt.
    #[serde(default = "default_backoff")]
    pub backoff_base_s: f64,
}

fn default_timeout() -> f64 {
    300.0
}

fn default_retries() -> u32 {
    2
}

fn default_backoff() -> f64 {
    1.0
}

impl ServiceEndpoint {
    pub fn mock(stage: StageKind) -> Self {
        Self {
            stage,
            transport: Transport::Mock,
            timeout_s: default_timeout(),
            retries: default_retries(),
            backoff_base_s: default_backoff(),
        }
    }

    pub fn check(&self) -> Result<(), StageError> {
        if !self.stage.is_generative() {
            return Err(StageError::Config(format!("{} is not served by an endpoint", self.stage)));
        }
        if !(self.timeout_s > 0.0 && self.timeout_s.is_finite()) {
            return Err(StageError::Config(format!("{}: timeout must be positive", self.stage)));
        }
        if !(self.backoff_base_s >= 0.0 && self.backoff_base_s.is_finite()) {
            return Err(StageError::Config(format!("{}: backoff must be non-negative", self.stage)));
        }
        Ok(())
    }

    /// Delay before retry number `attempt` (1-based).
    pub fn backoff(&self, attempt: u32) -> Duration {
        Duration::from_secs_f64(self.backoff_base_s * 2f64.powi(attempt as i32 - 1))
    }
}

#[derive(Debug, Error)]
pub enum StageError {
    #[error("{stage}: {message}")]
    Transport {
        stage: StageKind,
        message: String,
        #[source]
        cause: Option<Box<dyn std::error::Error + Send + Sync>>,
    },
    #[error("{stage}: timed out after {seconds} s")]
    Timeout { stage: StageKind, seconds: f64 },
    #[error("{stage}: malformed response: {message}")]
    Malformed { stage: StageKind, message: String },
    #[error("{stage}: gave up after {attempts} attempts")]
    Exhausted {
        stage: StageKind,
        attempts: u32,
        #[source]
        last: Box<StageError>,
    },
    #[error("invalid payload: {0}")]
    Payload(String),
    #[error("endpoint config: {0}")]
    Config(String),
}

/// One stage invocation. Serializes to the wire envelope
/// `{"stage", "params", "inputs": [base64]}`.
#[derive(Debug, Clone, PartialEq)]
pub struct StageRequest {
    pub stage: StageKind,
    pub params: Value,
    pub inputs: Vec<Vec<u8>>,
}

#[derive(Serialize, Deserialize)]
struct RequestEnvelope {
    stage: StageKind,
    params: Value,
    inputs: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct ResponseEnvelope {
    outputs: Vec<String>,
}

impl StageRequest {
    pub fn to_envelope(&self) -> Vec<u8> {
        serde_json::to_vec(&RequestEnvelope {
            stage: self.stage,
            params: self.params.clone(),
            inputs: self.inputs.iter().map(|b| B64.encode(b)).collect(),
        })
        .expect("envelope serializes")
    }

    pub fn from_envelope(bytes: &[u8]) -> Result<Self, StageError> {
        let env: RequestEnvelope =
            serde_json::from_slice(bytes).map_err(|e| StageError::Payload(format!("request envelope: {e}")))?;
        let inputs = env
            .inputs
            .iter()
            .map(|s| B64.decode(s))
            .collect::<Result<_, _>>()
            .map_err(|e| StageError::Payload(format!("request envelope: {e}")))?;
        Ok(Self {
            stage: env.stage,
            params: env.params,
            inputs,
        })
    }
}

pub fn encode_response(outputs: &[Vec<u8>]) -> Vec<u8> {
    serde_json::to_vec(&ResponseEnvelope {
        outputs: outputs.iter().map(|b| B64.encode(b)).collect(),
    })
    .expect("envelope serializes")
}

pub fn decode_response(stage: StageKind, bytes: &[u8]) -> Result<Vec<Vec<u8>>, StageError> {
    let malformed = |message: String| StageError::Malformed { stage, message };
    let env: ResponseEnvelope = serde_json::from_slice(bytes).map_err(|e| malformed(e.to_string()))?;
    env.outputs
        .iter()
        .map(|s| B64.decode(s).map_err(|e| malformed(e.to_string())))
        .collect()
}

/// Dispatches `request` to `endpoint`, retrying failed attempts with
/// exponential backoff.
pub fn call_stage(endpoint: &ServiceEndpoint, request: &StageRequest) -> Result<Vec<Vec<u8>>, StageError> {
    endpoint.check()?;
    if endpoint.stage != request.stage {
        return Err(StageError::Config(format!(
            "{} endpoint asked to serve a {} request",
            endpoint.stage, request.stage
        )));
    }
    let attempts = endpoint.retries + 1;
    let mut last = None;
    for attempt in 0..attempts {
        if attempt > 0 {
            std::thread::sleep(endpoint.backoff(attempt));
        }
        match call_once(endpoint, request) {
            Ok(out) => return Ok(out),
            Err(e) => last = Some(e),
        }
    }
    Err(StageError::Exhausted {
        stage: request.stage,
        attempts,
        last: Box::new(last.expect("at least one attempt")),
    })
}

fn call_once(endpoint: &ServiceEndpoint, request: &StageRequest) -> Result<Vec<Vec<u8>>, StageError> {
    match &endpoint.transport {
        Transport::Mock => mock::serve(request),
        Transport::Subprocess { command } => call_subprocess(endpoint, command, request),
        Transport::Http { url } => call_http(endpoint, url, request),
    }
}

fn transport_error(
    stage: StageKind,
    message: impl Into<String>,
    cause: impl std::error::Error + Send + Sync + 'static,
) -> StageError {
    StageError::Transport {
        stage,
        message: message.into(),
        cause: Some(Box::new(cause)),
    }
}

fn shell_quote(p: &Path) -> String {
    format!("'{}'", p.display().to_string().replace('\'', r"'\''"))
}

fn call_subprocess(endpoint: &ServiceEndpoint, command: &str, request: &StageRequest) -> Result<Vec<Vec<u8>>, StageError> {
    let stage = request.stage;
    let dir = tempfile::tempdir().map_err(|e| transport_error(stage, "creating scratch dir", e))?;
    let input = dir.path().join("request.json");
    let output = dir.path().join("response.json");
    std::fs::write(&input, request.to_envelope()).map_err(|e| transport_error(stage, "writing request", e))?;
    let cmd = command
        .replace("{in}", &shell_quote(&input))
        .replace("{out}", &shell_quote(&output));
    let mut child = Command::new("sh")
        .arg("-c")
        .arg(&cmd)
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| transport_error(stage, format!("spawning {cmd:?}"), e))?;

    let deadline = Instant::now() + Duration::from_secs_f64(endpoint.timeout_s);
    let status = loop {
        match child.try_wait().map_err(|e| transport_error(stage, "waiting for child", e))? {
            Some(status) => break status,
            None if Instant::now() >= deadline => {
                let _ = child.kill();
                let _ = child.wait();
                return Err(StageError::Timeout {
                    stage,
                    seconds: endpoint.timeout_s,
                });
            }
            None => std::thread::sleep(Duration::from_millis(5)),
        }
    };
    if !status.success() {
        let mut stderr = String::new();
        if let Some(mut e) = child.stderr.take() {
            use std::io::Read;
            let _ = e.read_to_string(&mut stderr);
        }
        return Err(StageError::Transport {
            stage,
            message: format!("command exited with {status}: {}", stderr.trim()),
            cause: None,
        });
    }
    let bytes = std::fs::read(&output).map_err(|e| transport_error(stage, "reading response file", e))?;
    decode_response(stage, &bytes)
}

/// Response bodies above this are rejected.
const MAX_RESPONSE_BYTES: u64 = 512 * 1024 * 1024;

fn call_http(endpoint: &ServiceEndpoint, url: &str, request: &StageRequest) -> Result<Vec<Vec<u8>>, StageError> {
    let stage = request.stage;
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_secs_f64(endpoint.timeout_s)))
        .http_status_as_error(true)
        .build()
        .into();
    let response = agent
        .post(url)
        .header("content-type", "application/json")
        .send(&request.to_envelope()[..])
        .map_err(|e| match e {
            ureq::Error::Timeout(_) => StageError::Timeout {
                stage,
                seconds: endpoint.timeout_s,
            },
            e => transport_error(stage, format!("POST {url}"), e),
        })?;
    let body = response
        .into_body()
        .with_config()
        .limit(MAX_RESPONSE_BYTES)
        .read_to_vec()
        .map_err(|e| transport_error(stage, "reading response body", e))?;
    decode_response(stage, &body)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn dag_order() {
        assert_eq!(StageKind::PromptGen.upstream(), None);
        assert_eq!(StageKind::ImageTo3D.upstream(), Some(StageKind::DragEdit));
        assert_eq!(StageKind::SceneCompose.upstream(), Some(StageKind::PoolIngest));
        assert!(!StageKind::PoolIngest.is_generative());
    }

    #[test]
    fn serde_names_match_as_str() {
        for s in StageKind::ALL {
            assert_eq!(serde_json::to_value(s).unwrap(), json!(s.as_str()));
            assert_eq!(serde_json::from_value::<StageKind>(json!(s.as_str())).unwrap(), s);
        }
    }

    #[test]
    fn envelope_field_names() {
        let req = StageRequest {
            stage: StageKind::DepthEstimate,
            params: json!({"b": 1, "a": 2}),
            inputs: vec![b"hi".to_vec()],
        };
        let text = String::from_utf8(req.to_envelope()).unwrap();
        assert_eq!(text, r#"{"stage":"depth_estimate","params":{"a":2,"b":1},"inputs":["aGk="]}"#);
        assert_eq!(StageRequest::from_envelope(text.as_bytes()).unwrap(), req);
        assert_eq!(String::from_utf8(encode_response(&[b"hi".to_vec()])).unwrap(), r#"{"outputs":["aGk="]}"#);
    }

    #[test]
    fn endpoint_json_shape() {
        let e: ServiceEndpoint =
            serde_json::from_str(r#"{"stage":"drag_edit","transport":"http","url":"http://x/","retries":5}"#).unwrap();
        assert_eq!(e.transport, Transport::Http { url: "http://x/".into() });
        assert_eq!(e.retries, 5);
        assert_eq!(e.timeout_s, 300.0);
        let m: ServiceEndpoint = serde_json::from_str(r#"{"stage":"prompt_gen","transport":"mock"}"#).unwrap();
        assert_eq!(m, ServiceEndpoint::mock(StageKind::PromptGen));
    }

    #[test]
    fn backoff_doubles() {
        let e = ServiceEndpoint::mock(StageKind::TextToImage);
        assert_eq!(e.backoff(1), Duration::from_secs(1));
        assert_eq!(e.backoff(2), Duration::from_secs(2));
        assert_eq!(e.backoff(4), Duration::from_secs(8));
    }

    #[test]
    fn malformed_responses() {
        assert!(matches!(decode_response(StageKind::DragEdit, b"{}"), Err(StageError::Malformed { .. })));
        assert!(matches!(
            decode_response(StageKind::DragEdit, br#"{"outputs":["@@"]}"#),
            Err(StageError::Malformed { .. })
        ));
    }

    #[test]
    fn stage_mismatch_is_a_config_error() {
        let e = ServiceEndpoint::mock(StageKind::TextToImage);
        let req = StageRequest {
            stage: StageKind::DragEdit,
            params: json!({}),
            inputs: vec![],
        };
        assert!(matches!(call_stage(&e, &req), Err(StageError::Config(_))));
    }
}
