//! HTTP-style service exposing the planner-facing interaction: submit a
//! dataflow request, adjust or drop its priority, signal fts-done, and read
//! status and link utilization.
//!
//! Connections are handled on their own threads, but every state-changing
//! command funnels through one channel into the single kernel-owner thread
//! and waits for its reply, so the service is linearizable by construction.
//! In service mode the kernel advances in real-time-scaled virtual time
//! before each command executes.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{sync_channel, Receiver, SyncSender};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Instant;

use log::{debug, info};
use serde::Deserialize;

use crate::dmm::DataflowRequest;
use crate::engine::Simulation;
use crate::transfer::synthesize_files;
use crate::{Error, Result};

#[derive(Debug, Deserialize)]
struct SubmitBody {
    request_id: String,
    bytes: u64,
    src_site: String,
    dst_site: String,
    priority: u32,
    #[serde(default)]
    file_count: Option<u64>,
}

#[derive(Debug, Deserialize)]
struct PatchBody {
    #[serde(default)]
    priority: Option<u32>,
    #[serde(default)]
    best_effort: Option<bool>,
}

#[derive(Debug)]
enum ApiRequest {
    Submit(SubmitBody),
    Status { request_id: String },
    Patch { request_id: String, body: PatchBody },
    FtsDone { request_id: String },
    Links,
}

struct Command {
    request: ApiRequest,
    reply: SyncSender<(u16, String)>,
}

fn error_body(err: &Error) -> (u16, String) {
    (
        err.status_code(),
        serde_json::json!({ "error": err.to_string() }).to_string(),
    )
}

fn apply(sim: &mut Simulation, request: ApiRequest) -> (u16, String) {
    let outcome: Result<String> = (|| match request {
        ApiRequest::Submit(body) => {
            let files = synthesize_files(&body.request_id, body.bytes, body.file_count.unwrap_or(1))?;
            let request = DataflowRequest {
                request_id: body.request_id,
                bytes: body.bytes,
                src_site: body.src_site,
                dst_site: body.dst_site,
                priority: body.priority,
            };
            let response = sim.submit_request(request, files)?;
            Ok(serde_json::to_string(&response).expect("response serializes"))
        }
        ApiRequest::Status { request_id } => {
            let service_id = sim.current_service_id(&request_id)?;
            let snapshot = sim.query_status(&service_id)?;
            Ok(serde_json::to_string(&snapshot).expect("snapshot serializes"))
        }
        ApiRequest::Patch { request_id, body } => {
            let service_id = sim.current_service_id(&request_id)?;
            let rate = match (body.priority, body.best_effort) {
                (Some(priority), None) => sim.update_priority(&service_id, priority)?,
                (None, Some(true)) => sim.demote_to_best_effort(&service_id)?,
                _ => {
                    return Err(Error::InvalidRequest(
                        "body must set exactly one of priority or best_effort=true".into(),
                    ))
                }
            };
            Ok(serde_json::json!({
                "service_id": service_id,
                "guaranteed_rate_gbps": rate,
            })
            .to_string())
        }
        ApiRequest::FtsDone { request_id } => {
            let service_id = sim.current_service_id(&request_id)?;
            sim.mark_fts_done(&service_id)?;
            Ok(serde_json::json!({
                "service_id": service_id,
                "state": "RELEASED",
            })
            .to_string())
        }
        ApiRequest::Links => {
            Ok(serde_json::to_string(&sim.link_snapshot()).expect("links serialize"))
        }
    })();
    match outcome {
        Ok(body) => (200, body),
        Err(err) => error_body(&err),
    }
}

fn kernel_loop(mut sim: Simulation, commands: Receiver<Command>, time_scale: f64) {
    let start = Instant::now();
    while let Ok(command) = commands.recv() {
        let target = start.elapsed().as_secs_f64() * time_scale;
        if target > sim.now() {
            if let Err(err) = sim.run_until(target) {
                debug!("virtual time advance failed: {err}");
            }
        }
        let reply = apply(&mut sim, command.request);
        let _ = command.reply.send(reply);
    }
}

fn parse_request(stream: &mut TcpStream) -> std::result::Result<ApiRequest, (u16, String)> {
    let bad = |msg: &str| (400u16, serde_json::json!({ "error": msg }).to_string());
    let mut reader = BufReader::new(stream);
    let mut request_line = String::new();
    reader
        .read_line(&mut request_line)
        .map_err(|_| bad("unreadable request line"))?;
    let mut parts = request_line.split_whitespace();
    let method = parts.next().unwrap_or("").to_uppercase();
    let target = parts.next().unwrap_or("").to_string();

    let mut content_length = 0usize;
    loop {
        let mut line = String::new();
        let n = reader.read_line(&mut line).map_err(|_| bad("bad header"))?;
        if n == 0 || line.trim().is_empty() {
            break;
        }
        if let Some((name, value)) = line.split_once(':') {
            if name.eq_ignore_ascii_case("content-length") {
                content_length = value.trim().parse().map_err(|_| bad("bad content-length"))?;
            }
        }
    }
    let mut body = vec![0u8; content_length];
    if content_length > 0 {
        reader
            .read_exact(&mut body)
            .map_err(|_| bad("truncated body"))?;
    }

    let path: Vec<&str> = target.trim_end_matches('/').split('/').skip(1).collect();
    match (method.as_str(), path.as_slice()) {
        ("POST", ["api", "v1", "requests"]) => {
            let body: SubmitBody = serde_json::from_slice(&body)
                .map_err(|e| bad(&format!("invalid request body: {e}")))?;
            Ok(ApiRequest::Submit(body))
        }
        ("GET", ["api", "v1", "requests", id]) => Ok(ApiRequest::Status {
            request_id: (*id).to_string(),
        }),
        ("PATCH", ["api", "v1", "requests", id]) => {
            let body: PatchBody = serde_json::from_slice(&body)
                .map_err(|e| bad(&format!("invalid patch body: {e}")))?;
            Ok(ApiRequest::Patch {
                request_id: (*id).to_string(),
                body,
            })
        }
        ("POST", ["api", "v1", "requests", id, "fts-done"]) => Ok(ApiRequest::FtsDone {
            request_id: (*id).to_string(),
        }),
        ("GET", ["api", "v1", "links"]) => Ok(ApiRequest::Links),
        _ => Err((
            404,
            serde_json::json!({ "error": format!("no route for {method} {target}") }).to_string(),
        )),
    }
}

fn write_response(stream: &mut TcpStream, status: u16, body: &str) {
    let reason = match status {
        200 => "OK",
        400 => "Bad Request",
        404 => "Not Found",
        405 => "Method Not Allowed",
        409 => "Conflict",
        _ => "Internal Server Error",
    };
    let response = format!(
        "HTTP/1.1 {status} {reason}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
        body.len()
    );
    let _ = stream.write_all(response.as_bytes());
    let _ = stream.flush();
}

fn handle_connection(mut stream: TcpStream, commands: SyncSender<Command>) {
    let (status, body) = match parse_request(&mut stream) {
        Ok(request) => {
            let (reply_tx, reply_rx) = sync_channel(1);
            let sent = commands.send(Command {
                request,
                reply: reply_tx,
            });
            match sent {
                Ok(()) => reply_rx.recv().unwrap_or((
                    500,
                    serde_json::json!({ "error": "kernel stopped" }).to_string(),
                )),
                Err(_) => (
                    500,
                    serde_json::json!({ "error": "kernel stopped" }).to_string(),
                ),
            }
        }
        Err(reply) => reply,
    };
    write_response(&mut stream, status, &body);
}

/// A running service instance.
pub struct Server {
    addr: SocketAddr,
    shutdown: Arc<AtomicBool>,
    listener: Option<JoinHandle<()>>,
    kernel: Option<JoinHandle<()>>,
}

impl Server {
    /// Bind `port` (0 picks an ephemeral port) and serve `sim` until
    /// [`Server::shutdown`] or drop.
    pub fn spawn(sim: Simulation, port: u16, time_scale: f64) -> Result<Server> {
        let listener = TcpListener::bind(("127.0.0.1", port))
            .map_err(|e| Error::io(format!("bind 127.0.0.1:{port}"), e))?;
        let addr = listener
            .local_addr()
            .map_err(|e| Error::io("local_addr".to_string(), e))?;
        let (cmd_tx, cmd_rx) = sync_channel::<Command>(64);
        let kernel = std::thread::spawn(move || kernel_loop(sim, cmd_rx, time_scale));
        let shutdown = Arc::new(AtomicBool::new(false));
        let accept_shutdown = Arc::clone(&shutdown);
        let listener_handle = std::thread::spawn(move || {
            for stream in listener.incoming() {
                if accept_shutdown.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = stream else { continue };
                let tx = cmd_tx.clone();
                std::thread::spawn(move || handle_connection(stream, tx));
            }
            // cmd_tx drops here; the kernel loop drains and exits.
        });
        info!("serving on {addr} (time scale {time_scale})");
        Ok(Server {
            addr,
            shutdown,
            listener: Some(listener_handle),
            kernel: Some(kernel),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Stop accepting, let in-flight commands finish, and join the threads.
    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        // Poke the accept loop so it observes the flag.
        let _ = TcpStream::connect(self.addr);
        if let Some(handle) = self.listener.take() {
            let _ = handle.join();
        }
        if let Some(handle) = self.kernel.take() {
            let _ = handle.join();
        }
    }

    /// Block until the listener thread ends (service mode foreground).
    pub fn join(mut self) {
        if let Some(handle) = self.listener.take() {
            let _ = handle.join();
        }
        if let Some(handle) = self.kernel.take() {
            let _ = handle.join();
        }
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        if self.listener.is_some() {
            self.stop();
        }
    }
}
