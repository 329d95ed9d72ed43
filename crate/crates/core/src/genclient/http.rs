use std::time::{Duration, Instant};

use serde::Serialize;

use super::protocol::{CAPABILITIES_PATH, INPAINT_PATH, SCENE_PATH};
use super::{
    AdmissionGate, Capabilities, ErrorReply, GenBackend, GenError, GenReply, GenResult, InpaintBody, InpaintRequest, RetryPolicy,
    SceneBody, SceneGenRequest,
};

const MAX_REPLY_BYTES: u64 = 512 << 20;

/// Client for a remote generation service.
///
/// Transient failures are retried with exponential backoff; every attempt
/// carries the same idempotency key. At most `max_in_flight` requests are
/// outstanding at once across all threads sharing the client.
#[derive(Debug)]
pub struct HttpBackend {
    endpoint: String,
    agent: ureq::Agent,
    policy: RetryPolicy,
    gate: AdmissionGate,
    capabilities: Capabilities,
}

fn map_ureq(e: ureq::Error) -> GenError {
    match e {
        ureq::Error::Timeout(_) => GenError::Timeout,
        other => GenError::Transport(other.to_string()),
    }
}

impl HttpBackend {
    /// Connects and performs the capability handshake.
    pub fn connect(endpoint: &str, policy: RetryPolicy, max_in_flight: usize) -> Result<Self, GenError> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(policy.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let mut client = HttpBackend {
            endpoint: endpoint.trim_end_matches('/').to_string(),
            agent,
            policy,
            gate: AdmissionGate::new(max_in_flight),
            capabilities: Capabilities { backend_id: String::new(), max_width: 0, max_height: 0, endpoints: vec![] },
        };
        let caps: Capabilities = client.with_retries(|| client.get_json(CAPABILITIES_PATH))?;
        for path in [SCENE_PATH, INPAINT_PATH] {
            if !caps.endpoints.iter().any(|e| e == path) {
                log::warn!("{} does not advertise {path}", client.endpoint);
            }
        }
        client.capabilities = caps;
        Ok(client)
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    pub fn gate(&self) -> &AdmissionGate {
        &self.gate
    }

    fn read_reply<T: serde::de::DeserializeOwned>(mut resp: ureq::http::Response<ureq::Body>) -> Result<T, GenError> {
        let status = resp.status().as_u16();
        let text = resp.body_mut().with_config().limit(MAX_REPLY_BYTES).read_to_string().map_err(map_ureq)?;
        if status != 200 {
            return Err(match serde_json::from_str::<ErrorReply>(&text) {
                Ok(e) => GenError::Backend { code: e.code, message: e.message },
                Err(_) => GenError::Backend { code: status.to_string(), message: text.chars().take(200).collect() },
            });
        }
        serde_json::from_str(&text).map_err(|e| GenError::Decode(e.to_string()))
    }

    fn get_json<T: serde::de::DeserializeOwned>(&self, path: &str) -> Result<T, GenError> {
        let resp = self.agent.get(format!("{}{path}", self.endpoint)).call().map_err(map_ureq)?;
        Self::read_reply(resp)
    }

    fn post_json<B: Serialize, T: serde::de::DeserializeOwned>(&self, path: &str, body: &B, key: &str) -> Result<T, GenError> {
        let text = serde_json::to_string(body).map_err(|e| GenError::InvalidRequest(e.to_string()))?;
        let resp = self
            .agent
            .post(format!("{}{path}", self.endpoint))
            .header("content-type", "application/json")
            .header("idempotency-key", key)
            .send(text.as_str())
            .map_err(map_ureq)?;
        Self::read_reply(resp)
    }

    fn with_retries<T>(&self, mut call: impl FnMut() -> Result<T, GenError>) -> Result<T, GenError> {
        let mut attempt = 0;
        loop {
            match call() {
                Err(e) if e.is_transient() && attempt < self.policy.max_retries => {
                    let d = self.policy.delay(attempt);
                    log::debug!("attempt {attempt} failed ({e}); retrying in {d:?}");
                    std::thread::sleep(d);
                    attempt += 1;
                }
                other => return other,
            }
        }
    }

    fn post_with_gate<B: Serialize>(&self, path: &str, body: &B, key: &str) -> Result<GenResult, GenError> {
        let _permit = self.gate.acquire();
        let t = Instant::now();
        let reply: GenReply = self.with_retries(|| self.post_json(path, body, key))?;
        reply.into_result(t.elapsed())
    }
}

impl GenBackend for HttpBackend {
    fn backend_id(&self) -> &str {
        &self.capabilities.backend_id
    }

    fn capabilities(&self) -> &Capabilities {
        &self.capabilities
    }

    fn generate_scene(&self, req: &SceneGenRequest) -> Result<GenResult, GenError> {
        let body = SceneBody::from_request(req);
        self.post_with_gate(SCENE_PATH, &body, &body.idempotency_key)
    }

    fn inpaint(&self, req: &InpaintRequest) -> Result<GenResult, GenError> {
        let body = InpaintBody::from_request(req);
        self.post_with_gate(INPAINT_PATH, &body, &body.idempotency_key)
    }
}

impl RetryPolicy {
    /// Policy with no waiting, for tests and local mocks.
    pub fn immediate(max_retries: u32, timeout: Duration) -> Self {
        RetryPolicy { max_retries, base_delay: Duration::ZERO, factor: 1.0, timeout }
    }
}
