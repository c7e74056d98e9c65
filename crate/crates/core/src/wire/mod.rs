//! Bit-exact state serialization and the newline-delimited TCP protocol that
//! lets any engine role run in a separate process.
//!
//! Every message is one JSON object per line with sorted keys; reals travel
//! as IEEE-754 hex-float strings so a state survives the round trip bit for bit.

mod client;
mod codec;
pub mod hexfloat;
mod message;
mod server;

pub use client::{
    default_port, remote_engine_step, resolve_endpoint, RemoteEngine, RemoteError, DEFAULT_PORT,
    DEFAULT_TIMEOUT,
};
pub use codec::{decode_state, encode_state, from_canonical, to_canonical, CodecError};
pub use message::{Op, Request, Response, PROTOCOL_VERSION};
pub use server::{serve_engine, ServerHandle};
