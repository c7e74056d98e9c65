use std::io::{self, BufRead, BufReader, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::time::Duration;

use thiserror::Error;

use super::codec::to_canonical;
use super::message::{Op, Request, Response, PROTOCOL_VERSION};
use crate::engines::{Engine, EngineError, EngineRole, StepFrame};
use crate::world::WorldState;

pub const DEFAULT_PORT: u16 = 7471;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(5);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RemoteError {
    #[error("timed out waiting for remote engine")]
    Timeout,
    #[error("remote engine disconnected: {0}")]
    Disconnected(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("remote engine error: {0}")]
    Server(String),
}

impl From<io::Error> for RemoteError {
    fn from(e: io::Error) -> Self {
        match e.kind() {
            io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut => Self::Timeout,
            _ => Self::Disconnected(e.to_string()),
        }
    }
}

/// Port used when an endpoint omits one: `TASKSEQ_PORT` if set, else 7471.
pub fn default_port() -> u16 {
    std::env::var("TASKSEQ_PORT")
        .ok()
        .and_then(|p| p.parse().ok())
        .unwrap_or(DEFAULT_PORT)
}

/// Appends the default port to a bare host.
pub fn resolve_endpoint(endpoint: &str) -> String {
    let has_port = endpoint
        .rsplit_once(':')
        .is_some_and(|(_, p)| !p.is_empty() && p.bytes().all(|b| b.is_ascii_digit()));
    if has_port {
        endpoint.to_string()
    } else {
        format!("{endpoint}:{}", default_port())
    }
}

/// Client side of the line protocol, usable as a pipeline engine.
pub struct RemoteEngine {
    role: EngineRole,
    endpoint: String,
    reader: BufReader<TcpStream>,
    writer: TcpStream,
    next_id: u64,
}

impl RemoteEngine {
    /// Connects and checks that the server hosts an engine of `role`.
    pub fn connect(role: EngineRole, endpoint: &str) -> Result<Self, RemoteError> {
        Self::connect_with_timeout(role, endpoint, DEFAULT_TIMEOUT)
    }

    pub fn connect_with_timeout(role: EngineRole, endpoint: &str, timeout: Duration) -> Result<Self, RemoteError> {
        let endpoint = resolve_endpoint(endpoint);
        let addrs: Vec<_> = endpoint
            .to_socket_addrs()
            .map_err(|e| RemoteError::Disconnected(format!("{endpoint}: {e}")))?
            .collect();
        let mut last = RemoteError::Disconnected(format!("{endpoint}: no address"));
        for addr in addrs {
            match TcpStream::connect_timeout(&addr, timeout) {
                Ok(stream) => {
                    stream.set_read_timeout(Some(timeout))?;
                    stream.set_write_timeout(Some(timeout))?;
                    let _ = stream.set_nodelay(true);
                    let writer = stream.try_clone()?;
                    let mut client = Self {
                        role,
                        endpoint: endpoint.clone(),
                        reader: BufReader::new(stream),
                        writer,
                        next_id: 1,
                    };
                    let info = client.info()?;
                    if info.role != Some(role) || info.protocol != Some(PROTOCOL_VERSION) {
                        return Err(RemoteError::Protocol(format!(
                            "{endpoint} hosts {:?} (protocol {:?}), expected {role}",
                            info.role, info.protocol
                        )));
                    }
                    return Ok(client);
                }
                Err(e) => last = RemoteError::Disconnected(format!("{endpoint}: {e}")),
            }
        }
        Err(last)
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    /// Sends one request and waits for its response.
    pub fn request(&mut self, mut req: Request) -> Result<Response, RemoteError> {
        req.id = self.next_id;
        self.next_id += 1;
        let raw = self.exchange(&req)?;
        if raw.id != req.id {
            return Err(RemoteError::Protocol(format!("response id {} for request {}", raw.id, req.id)));
        }
        if !raw.ok {
            return Err(RemoteError::Server(raw.error.unwrap_or_default()));
        }
        Ok(raw)
    }

    /// Sends `req` with its id untouched and returns whatever comes back.
    pub fn exchange(&mut self, req: &Request) -> Result<Response, RemoteError> {
        let mut line = to_canonical(req).map_err(|e| RemoteError::Protocol(e.to_string()))?;
        line.push('\n');
        self.writer.write_all(line.as_bytes())?;
        self.writer.flush()?;
        let mut buf = String::new();
        if self.reader.read_line(&mut buf)? == 0 {
            return Err(RemoteError::Disconnected(format!("{} closed the connection", self.endpoint)));
        }
        serde_json::from_str(&buf).map_err(|e| RemoteError::Protocol(e.to_string()))
    }

    pub fn info(&mut self) -> Result<Response, RemoteError> {
        self.request(Request::new(0, Op::Info))
    }

    pub fn reset(&mut self) -> Result<(), RemoteError> {
        self.request(Request::new(0, Op::Reset)).map(|_| ())
    }

    pub fn set_state(&mut self, state: &WorldState) -> Result<(), RemoteError> {
        let mut req = Request::new(0, Op::SetState);
        req.state = Some(state.clone());
        self.request(req).map(|_| ())
    }

    pub fn get_state(&mut self) -> Result<WorldState, RemoteError> {
        self.request(Request::new(0, Op::GetState))?
            .state
            .ok_or_else(|| RemoteError::Protocol("get_state response without state".into()))
    }

    /// Runs the hosted engine on `frame` remotely.
    pub fn remote_step(&mut self, frame: StepFrame) -> Result<StepFrame, RemoteError> {
        let mut req = Request::new(0, Op::Step);
        req.state = Some(frame.world);
        req.command = Some(frame.command);
        req.noise_seed = Some(frame.noise_seed);
        req.features = frame.features;
        req.observation = frame.observation;
        let resp = self.request(req)?;
        Ok(StepFrame {
            world: resp
                .state
                .ok_or_else(|| RemoteError::Protocol("step response without state".into()))?,
            command: resp
                .command
                .ok_or_else(|| RemoteError::Protocol("step response without command".into()))?,
            noise_seed: resp.noise_seed.unwrap_or(frame.noise_seed),
            features: resp.features,
            observation: resp.observation,
        })
    }
}

impl Engine for RemoteEngine {
    fn role(&self) -> EngineRole {
        self.role
    }

    fn step(&mut self, frame: StepFrame) -> Result<StepFrame, EngineError> {
        Ok(self.remote_step(frame)?)
    }
}

pub fn remote_engine_step(
    client: &mut RemoteEngine,
    world: &WorldState,
    command: &crate::engines::Command,
) -> Result<WorldState, RemoteError> {
    let frame = StepFrame::new(world.clone(), *command, 0);
    client.remote_step(frame).map(|f| f.world)
}
