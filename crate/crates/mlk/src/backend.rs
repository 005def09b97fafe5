//! Where commands execute: an in-process lake or a remote service.

use modellake::Lake;
use modellake_server::api::{self, ApiError, Query, Write};
use percent_encoding::{utf8_percent_encode, NON_ALPHANUMERIC};

#[derive(Debug)]
pub enum Failure {
    Api(ApiError),
    /// Local IO, configuration or transport trouble.
    Setup(String),
}

impl From<ApiError> for Failure {
    fn from(e: ApiError) -> Self {
        Self::Api(e)
    }
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Api(e) => match e.code.as_str() {
                "not_found" => 2,
                "internal" => 3,
                _ => 1,
            },
            Self::Setup(_) => 3,
        }
    }
}

pub enum Backend {
    Embedded {
        lake: Box<Lake>,
        swamp_threshold: f64,
    },
    Remote {
        endpoint: String,
        agent: ureq::Agent,
    },
}

fn seg(s: &str) -> String {
    utf8_percent_encode(s, NON_ALPHANUMERIC).to_string()
}

impl Backend {
    pub fn remote(endpoint: &str) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .build()
            .into();
        Self::Remote {
            endpoint: endpoint.trim_end_matches('/').to_string(),
            agent,
        }
    }

    /// Runs a read; returns the canonical response body.
    pub fn query(&mut self, q: &Query) -> Result<Vec<u8>, Failure> {
        match self {
            Self::Embedded {
                lake,
                swamp_threshold,
            } => Ok(api::to_body(&api::query(lake, *swamp_threshold, q)?)),
            Self::Remote { endpoint, agent } => {
                let (path, params) = route(q);
                let req = agent
                    .get(&format!("{endpoint}{path}"))
                    .query_pairs(params.iter().map(|(k, v)| (*k, v.as_str())));
                finish(req.call()).map(|(_, body)| body)
            }
        }
    }

    /// Runs a write; returns whether it created anything and the body.
    pub fn write(&mut self, w: Write) -> Result<(bool, Vec<u8>), Failure> {
        match self {
            Self::Embedded { lake, .. } => {
                let (created, v) = api::write(lake, w)?;
                Ok((created, api::to_body(&v)))
            }
            Self::Remote { endpoint, agent } => {
                let resp = match w {
                    Write::Artifact { payload, kind } => agent
                        .post(&format!("{endpoint}/artifacts"))
                        .header("Content-Type", "application/octet-stream")
                        .header("X-Artifact-Kind", kind.as_str())
                        .send(&payload[..]),
                    Write::Register { record_type, body } => agent
                        .post(&format!("{endpoint}/{}", api::collection(record_type)))
                        .header("Content-Type", "application/json")
                        .send(&body[..]),
                };
                finish(resp).map(|(status, body)| (status == 201, body))
            }
        }
    }
}

fn route(q: &Query) -> (String, Vec<(&'static str, String)>) {
    match q {
        Query::Status => ("/health".into(), vec![]),
        Query::Search(sq) => ("/search".into(), api::search_params(sq)),
        Query::Lineage(id) => (format!("/lineage/{}", seg(id)), vec![]),
        Query::Versions(id) => (format!("/versions/{}", seg(id)), vec![]),
        Query::Diff(a, b) => (format!("/diff/{}/{}", seg(a), seg(b)), vec![]),
        Query::Compliance { model, approved } => {
            let list = approved.iter().cloned().collect::<Vec<_>>().join(",");
            (
                format!("/audit/compliance/{}", seg(model)),
                vec![("approved", list)],
            )
        }
        Query::Repro(a) => (format!("/audit/repro/{}", seg(a)), vec![]),
        Query::Bias(m) => (format!("/audit/bias/{}", seg(m)), vec![]),
        Query::Evolution(h) => (format!("/audit/evolution/{}", seg(h)), vec![]),
        Query::Health { threshold } => (
            "/audit/health".into(),
            threshold
                .map(|t| ("threshold", t.to_string()))
                .into_iter()
                .collect(),
        ),
        Query::Project(s) => (format!("/projects/{}", seg(s)), vec![]),
    }
}

fn finish(
    resp: Result<ureq::http::Response<ureq::Body>, ureq::Error>,
) -> Result<(u16, Vec<u8>), Failure> {
    let mut resp = resp.map_err(|e| Failure::Setup(format!("request failed: {e}")))?;
    let status = resp.status().as_u16();
    let body = resp
        .body_mut()
        .with_config()
        .limit(u64::MAX)
        .read_to_vec()
        .map_err(|e| Failure::Setup(format!("reading response: {e}")))?;
    if (200..300).contains(&status) {
        return Ok((status, body));
    }
    match serde_json::from_slice::<ApiError>(&body) {
        Ok(e) => Err(Failure::Api(e)),
        Err(_) => Err(Failure::Setup(format!(
            "service answered {status}: {}",
            String::from_utf8_lossy(&body)
        ))),
    }
}
