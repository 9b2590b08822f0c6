//! Live bridge: one authoritative simulation stepped on a wall-clock tick,
//! streamed to any number of WebSocket clients that may disturb it.

pub mod protocol;
pub mod server;
pub mod session;

pub use protocol::{Ack, AckStatus, Command, Param, Rejection, Request, ServerMessage, SimStatus, Snapshot};
pub use server::{serve, start, RunningServer, ServerConfig, ServerError};
pub use session::{Session, SessionError};
