//! HTTP front end: one endpoint per service under /ws/, plus an in-process
//! transport with identical semantics for tests and simulations.

use std::io::Read;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use tiny_http::{Header, Response, Server};

use cte_core::{Clock, ServiceKind, Transport, TransportError};

use crate::authority::Authority;

/// Requests larger than this are refused outright; the largest legal batch
/// plus envelope overhead stays well under it.
const MAX_REQUEST_BYTES: usize = 1_048_576;

/// Serves an [`Authority`] over HTTP. While marked down, every request gets
/// 503 so clients exercise their unavailability handling.
pub struct AuthorityServer {
    authority: Arc<Authority>,
    server: Arc<Server>,
    down: Arc<AtomicBool>,
    stop: Arc<AtomicBool>,
    workers: Vec<JoinHandle<()>>,
}

impl AuthorityServer {
    pub fn start(
        authority: Arc<Authority>,
        clock: Arc<dyn Clock>,
        addr: &str,
        worker_count: usize,
    ) -> std::io::Result<AuthorityServer> {
        let server = Arc::new(
            Server::http(addr).map_err(|e| std::io::Error::other(e.to_string()))?,
        );
        let down = Arc::new(AtomicBool::new(false));
        let stop = Arc::new(AtomicBool::new(false));
        let workers = (0..worker_count.max(1))
            .map(|_| {
                let server = Arc::clone(&server);
                let authority = Arc::clone(&authority);
                let clock = Arc::clone(&clock);
                let down = Arc::clone(&down);
                let stop = Arc::clone(&stop);
                std::thread::spawn(move || {
                    while !stop.load(Ordering::Acquire) {
                        match server.recv_timeout(Duration::from_millis(100)) {
                            Ok(Some(request)) => {
                                serve_one(&authority, clock.as_ref(), &down, request)
                            }
                            Ok(None) => {}
                            Err(_) => break,
                        }
                    }
                })
            })
            .collect();
        Ok(AuthorityServer {
            authority,
            server,
            down,
            stop,
            workers,
        })
    }

    pub fn authority(&self) -> &Arc<Authority> {
        &self.authority
    }

    pub fn local_addr(&self) -> Option<SocketAddr> {
        self.server.server_addr().to_ip()
    }

    /// Marks the service down (503) or back up.
    pub fn set_down(&self, down: bool) {
        self.down.store(down, Ordering::Release);
    }

    pub fn shutdown(mut self) {
        self.stop.store(true, Ordering::Release);
        self.server.unblock();
        for worker in self.workers.drain(..) {
            let _ = worker.join();
        }
    }
}

impl Drop for AuthorityServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::Release);
        self.server.unblock();
        for worker in self.workers.drain(..) {
            let _ = worker.join();
        }
    }
}

fn serve_one(
    authority: &Authority,
    clock: &dyn Clock,
    down: &AtomicBool,
    mut request: tiny_http::Request,
) {
    let xml_header =
        Header::from_bytes(&b"Content-Type"[..], &b"application/xml"[..]).expect("static header");
    if down.load(Ordering::Acquire) {
        let _ = request.respond(Response::from_string("service unavailable").with_status_code(503));
        return;
    }
    let service = request
        .url()
        .strip_prefix("/ws/")
        .and_then(ServiceKind::from_wire_name);
    let Some(service) = service else {
        let _ = request.respond(Response::from_string("unknown endpoint").with_status_code(404));
        return;
    };
    if request.body_length().is_some_and(|n| n > MAX_REQUEST_BYTES) {
        let _ = request.respond(Response::from_string("request too large").with_status_code(413));
        return;
    }
    let mut body = Vec::new();
    if request
        .as_reader()
        .take(MAX_REQUEST_BYTES as u64 + 1)
        .read_to_end(&mut body)
        .is_err()
        || body.len() > MAX_REQUEST_BYTES
    {
        let _ = request.respond(Response::from_string("request unreadable").with_status_code(400));
        return;
    }
    let response = authority.handle(service, &body, clock.now());
    let _ = request.respond(
        Response::from_data(response)
            .with_status_code(200)
            .with_header(xml_header),
    );
}

/// Calls the authority directly, no sockets involved. Same byte-level
/// behavior as the HTTP path; `set_down` simulates outage.
pub struct InProcessTransport {
    authority: Arc<Authority>,
    clock: Arc<dyn Clock>,
    down: AtomicBool,
}

impl InProcessTransport {
    pub fn new(authority: Arc<Authority>, clock: Arc<dyn Clock>) -> Self {
        InProcessTransport {
            authority,
            clock,
            down: AtomicBool::new(false),
        }
    }

    pub fn set_down(&self, down: bool) {
        self.down.store(down, Ordering::Release);
    }
}

impl Transport for InProcessTransport {
    fn call(&self, service: ServiceKind, request: &[u8]) -> Result<Vec<u8>, TransportError> {
        if self.down.load(Ordering::Acquire) {
            return Err(TransportError::Unavailable(
                "authority marked down".to_string(),
            ));
        }
        Ok(self.authority.handle(service, request, self.clock.now()))
    }
}
