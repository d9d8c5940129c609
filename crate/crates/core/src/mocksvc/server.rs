use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};

use tiny_http::{Header, Response, Server};

use super::{MockError, MockService};

/// The mock service on a local HTTP port, answered by a pool of worker
/// threads. Dropping the server stops it.
pub struct MockServer {
    server: Arc<Server>,
    addr: SocketAddr,
    stopping: Arc<AtomicBool>,
    workers: Vec<JoinHandle<()>>,
}

impl MockServer {
    /// Bind `addr` (port 0 picks a free port) and start `threads` workers.
    pub fn start(service: Arc<MockService>, addr: &str, threads: usize) -> Result<Self, MockError> {
        let server = Server::http(addr).map_err(|e| MockError::Bind {
            addr: addr.to_string(),
            message: e.to_string(),
        })?;
        let bound = server.server_addr().to_ip().ok_or_else(|| MockError::Bind {
            addr: addr.to_string(),
            message: "not an IP listener".into(),
        })?;
        let server = Arc::new(server);
        let stopping = Arc::new(AtomicBool::new(false));
        let workers = (0..threads.max(1))
            .map(|_| {
                let server = server.clone();
                let service = service.clone();
                let stopping = stopping.clone();
                thread::spawn(move || worker(&server, &service, &stopping))
            })
            .collect();
        Ok(Self {
            server,
            addr: bound,
            stopping,
            workers,
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Block until the workers exit, which only happens after `shutdown`
    /// from another handle; used by the CLI to serve forever.
    pub fn join(mut self) {
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }

    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        self.stopping.store(true, Ordering::SeqCst);
        // Each unblock wakes a single waiting worker.
        for _ in 0..self.workers.len() {
            self.server.unblock();
        }
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        if !self.workers.is_empty() {
            self.stop();
        }
    }
}

fn worker(server: &Server, service: &MockService, stopping: &AtomicBool) {
    let json = Header::from_bytes(&b"Content-Type"[..], &b"application/json"[..]).expect("static header");
    loop {
        let mut request = match server.recv() {
            Ok(r) => r,
            Err(_) if stopping.load(Ordering::SeqCst) => return,
            Err(e) => {
                log::warn!("mock server accept error: {e}");
                continue;
            }
        };
        let mut body = Vec::new();
        let (status, payload) = match request.as_reader().read_to_end(&mut body) {
            Ok(_) => {
                let method = request.method().as_str().to_string();
                let path = request.url().split('?').next().unwrap_or("").to_string();
                service.handle_http(&method, &path, &body)
            }
            Err(e) => (400, format!("{{\"error\":\"unreadable body: {e}\"}}").into_bytes()),
        };
        let response = Response::from_data(payload)
            .with_status_code(status)
            .with_header(json.clone());
        if let Err(e) = request.respond(response) {
            log::warn!("mock server write error: {e}");
        }
    }
}
