//! HTTP transport to a remote authority.
//!
//! One POST per service call. HTTP-level failures of any kind surface as
//! transport errors; the gateway treats those as transient and retries on
//! a later tick, so a flapping connection never corrupts anything.

use std::time::Duration;

use cte_core::{ServiceKind, Transport, TransportError};

pub struct HttpTransport {
    base: String,
    agent: ureq::Agent,
}

impl HttpTransport {
    /// `base` is `scheme://host:port`, without the service path.
    pub fn new(base: &str) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(30)))
            .build();
        HttpTransport {
            base: base.trim_end_matches('/').to_string(),
            agent: ureq::Agent::new_with_config(config),
        }
    }
}

impl Transport for HttpTransport {
    fn call(&self, service: ServiceKind, request: &[u8]) -> Result<Vec<u8>, TransportError> {
        let url = format!("{}{}", self.base, service.path());
        let mut response = self
            .agent
            .post(&url)
            .content_type("application/xml")
            .send(request)
            .map_err(|e| match e {
                ureq::Error::StatusCode(code) => {
                    TransportError::Unavailable(format!("authority answered HTTP {code}"))
                }
                other => TransportError::Io(other.to_string()),
            })?;
        response
            .body_mut()
            .read_to_vec()
            .map_err(|e| TransportError::Io(e.to_string()))
    }
}
