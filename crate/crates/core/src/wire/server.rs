use std::io::{self, BufRead, BufReader, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};

use log::{debug, warn};

use super::codec::to_canonical;
use super::message::{Op, Request, Response, PROTOCOL_VERSION};
use crate::engines::{Command, Engine, StepFrame};
use crate::world::WorldState;

/// Handle to a running engine server. Dropping it stops the server.
pub struct ServerHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    active: Arc<Mutex<Option<TcpStream>>>,
    thread: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Stops accepting, drops the current connection and joins the server thread.
    pub fn shutdown(mut self) {
        self.stop_now();
    }

    /// Blocks until the server thread exits.
    pub fn join(mut self) {
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }

    fn stop_now(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(s) = self.active.lock().expect("server lock").take() {
            let _ = s.shutdown(Shutdown::Both);
        }
        // Wake the blocking accept.
        let _ = TcpStream::connect(self.addr);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        if self.thread.is_some() {
            self.stop_now();
        }
    }
}

struct Session<'a> {
    engine: &'a mut dyn Engine,
    current: Option<WorldState>,
    last_id: Option<u64>,
}

enum Reply {
    Continue(Response),
    Close(Response),
}

impl Session<'_> {
    fn handle(&mut self, line: &str) -> Reply {
        let req: Request = match serde_json::from_str(line) {
            Ok(r) => r,
            Err(e) => return Reply::Close(Response::error(0, format!("malformed request: {e}"))),
        };
        if self.last_id.is_some_and(|last| req.id <= last) {
            return Reply::Close(Response::error(
                req.id,
                format!("non-monotonic id {} after {}", req.id, self.last_id.unwrap_or(0)),
            ));
        }
        self.last_id = Some(req.id);
        let id = req.id;
        match req.op {
            Op::Info => Reply::Continue(Response {
                role: Some(self.engine.role()),
                protocol: Some(PROTOCOL_VERSION),
                ..Response::ok(id)
            }),
            Op::Reset => {
                self.current = None;
                Reply::Continue(Response::ok(id))
            }
            Op::SetState => match req.state {
                Some(s) => {
                    self.current = Some(s);
                    Reply::Continue(Response::ok(id))
                }
                None => Reply::Close(Response::error(id, "set_state requires state")),
            },
            Op::GetState => match &self.current {
                Some(s) => Reply::Continue(Response {
                    state: Some(s.clone()),
                    ..Response::ok(id)
                }),
                None => Reply::Continue(Response::error(id, "no state has been set")),
            },
            Op::Step => {
                let Some(world) = req.state.or_else(|| self.current.clone()) else {
                    return Reply::Close(Response::error(id, "step requires state"));
                };
                let frame = StepFrame {
                    world,
                    command: req.command.unwrap_or_else(Command::zero),
                    noise_seed: req.noise_seed.unwrap_or(0),
                    features: req.features,
                    observation: req.observation,
                };
                match self.engine.step(frame) {
                    Ok(out) => {
                        self.current = Some(out.world.clone());
                        Reply::Continue(Response {
                            state: Some(out.world),
                            command: Some(out.command),
                            noise_seed: Some(out.noise_seed),
                            features: out.features,
                            observation: out.observation,
                            ..Response::ok(id)
                        })
                    }
                    Err(e) => Reply::Continue(Response::error(id, e.to_string())),
                }
            }
        }
    }
}

fn write_response(stream: &mut TcpStream, resp: &Response) -> io::Result<()> {
    let mut line = to_canonical(resp).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
    line.push('\n');
    stream.write_all(line.as_bytes())?;
    stream.flush()
}

fn serve_connection(engine: &mut dyn Engine, stream: TcpStream) -> io::Result<()> {
    let mut writer = stream.try_clone()?;
    let reader = BufReader::new(stream);
    let mut session = Session {
        engine,
        current: None,
        last_id: None,
    };
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match session.handle(&line) {
            Reply::Continue(resp) => write_response(&mut writer, &resp)?,
            Reply::Close(resp) => {
                warn!("closing connection: {}", resp.error.as_deref().unwrap_or(""));
                write_response(&mut writer, &resp)?;
                let _ = writer.shutdown(Shutdown::Both);
                break;
            }
        }
    }
    Ok(())
}

/// Hosts `engine` on `endpoint`, serving one connection at a time with
/// strictly sequential request handling.
pub fn serve_engine(mut engine: Box<dyn Engine>, endpoint: &str) -> io::Result<ServerHandle> {
    let listener = TcpListener::bind(endpoint)?;
    let addr = listener.local_addr()?;
    let stop = Arc::new(AtomicBool::new(false));
    let active: Arc<Mutex<Option<TcpStream>>> = Arc::new(Mutex::new(None));
    let (stop_t, active_t) = (stop.clone(), active.clone());
    let thread = thread::Builder::new()
        .name(format!("engine-{}", engine.role()))
        .spawn(move || {
            for conn in listener.incoming() {
                if stop_t.load(Ordering::SeqCst) {
                    break;
                }
                let stream = match conn {
                    Ok(s) => s,
                    Err(e) => {
                        warn!("accept failed: {e}");
                        continue;
                    }
                };
                let _ = stream.set_nodelay(true);
                if let Ok(clone) = stream.try_clone() {
                    *active_t.lock().expect("server lock") = Some(clone);
                }
                if let Err(e) = serve_connection(engine.as_mut(), stream) {
                    debug!("connection ended: {e}");
                }
                active_t.lock().expect("server lock").take();
            }
        })?;
    Ok(ServerHandle {
        addr,
        stop,
        active,
        thread: Some(thread),
    })
}
