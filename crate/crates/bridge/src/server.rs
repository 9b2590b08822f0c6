//! WebSocket endpoint around a [`Session`].
//!
//! Routes: `GET /ws` upgrades to the v1 message stream, `GET /log` returns
//! the event log as JSON lines, `GET /snapshot` the latest snapshot envelope.

use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::http::header;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::Router;
use futures_util::{SinkExt, StreamExt};
use tokio::sync::{broadcast, mpsc, watch};

use assembly_core::{EventRecord, Scenario64};

use crate::protocol::{parse_request, Ack, Command, ServerMessage};
use crate::session::{validate_for, Session, SessionError};

#[derive(Clone, Debug)]
pub struct ServerConfig {
    pub port: u16,
    /// Loopback by default; set to 0.0.0.0 to expose.
    pub host: [u8; 4],
    pub seed: u64,
    pub tick_hz: f64,
    /// Per-client outbound queue; a client this far behind is disconnected.
    pub queue_capacity: usize,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            port: 8765,
            host: [127, 0, 0, 1],
            seed: 0,
            tick_hz: 30.0,
            queue_capacity: 256,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ServerError {
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: SocketAddr, source: std::io::Error },
    #[error("invalid server config: {0}")]
    Config(String),
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error("server i/o: {0}")]
    Io(#[from] std::io::Error),
}

struct Shared {
    commands: mpsc::UnboundedSender<Command>,
    snapshots: broadcast::Sender<String>,
    latest: watch::Receiver<String>,
    log: Mutex<Vec<EventRecord>>,
    seq: AtomicU64,
    num_components: usize,
}

impl Shared {
    fn next_seq(&self) -> u64 {
        self.seq.fetch_add(1, Ordering::Relaxed)
    }
}

/// A server bound to a port and running in the background.
pub struct RunningServer {
    pub addr: SocketAddr,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    task: tokio::task::JoinHandle<()>,
    sim: tokio::task::JoinHandle<()>,
}

impl RunningServer {
    pub async fn shutdown(mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        let _ = self.task.await;
        self.sim.abort();
    }
}

/// Binds and starts the simulation loop and HTTP listener.
pub async fn start(scenario: Scenario64, cfg: ServerConfig) -> Result<RunningServer, ServerError> {
    if !(cfg.tick_hz > 0.0 && cfg.tick_hz.is_finite()) || cfg.queue_capacity == 0 {
        return Err(ServerError::Config(format!(
            "tick_hz must be > 0 and queue_capacity >= 1 (got {}, {})",
            cfg.tick_hz, cfg.queue_capacity
        )));
    }
    let addr = SocketAddr::from((cfg.host, cfg.port));
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|source| ServerError::Bind { addr, source })?;
    let addr = listener.local_addr()?;

    let session = Session::new(scenario, cfg.seed)?;
    let (cmd_tx, cmd_rx) = mpsc::unbounded_channel();
    let (snap_tx, _) = broadcast::channel(cfg.queue_capacity);
    let first = ServerMessage::Snapshot(session.snapshot()).encode(0);
    let (latest_tx, latest_rx) = watch::channel(first);
    let shared = Arc::new(Shared {
        commands: cmd_tx,
        snapshots: snap_tx,
        latest: latest_rx,
        log: Mutex::new(Vec::new()),
        seq: AtomicU64::new(1),
        num_components: session.num_components(),
    });

    let period = Duration::from_secs_f64(1.0 / cfg.tick_hz);
    let sim = tokio::spawn(sim_loop(session, cmd_rx, latest_tx, shared.clone(), period));

    let app = Router::new()
        .route("/ws", get(ws_upgrade))
        .route("/log", get(log_jsonl))
        .route("/snapshot", get(latest_snapshot))
        .with_state(shared);
    let (tx, rx) = tokio::sync::oneshot::channel::<()>();
    let task = tokio::spawn(async move {
        let serve = axum::serve(listener, app).with_graceful_shutdown(async {
            let _ = rx.await;
        });
        if let Err(e) = serve.await {
            log::error!("http server stopped: {e}");
        }
    });
    log::info!("live bridge listening on ws://{addr}/ws");
    Ok(RunningServer {
        addr,
        shutdown: Some(tx),
        task,
        sim,
    })
}

/// Runs until the process is terminated.
pub async fn serve(scenario: Scenario64, cfg: ServerConfig) -> Result<(), ServerError> {
    let server = start(scenario, cfg).await?;
    let _ = server.task.await;
    Ok(())
}

async fn sim_loop(
    mut session: Session,
    mut commands: mpsc::UnboundedReceiver<Command>,
    latest: watch::Sender<String>,
    shared: Arc<Shared>,
    period: Duration,
) {
    let mut ticker = tokio::time::interval(period);
    ticker.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
    loop {
        ticker.tick().await;
        let (mut reset, mut drained) = (false, false);
        while let Ok(cmd) = commands.try_recv() {
            reset |= matches!(cmd, Command::Reset { .. });
            drained = true;
            session.enqueue(cmd);
        }
        let steps = match session.tick() {
            Ok(n) => n,
            Err(e) => {
                log::error!("simulation step failed: {e}");
                0
            }
        };
        {
            let mut log = shared.log.lock().expect("log mutex poisoned");
            if reset {
                log.clear();
            }
            let records = &session.log().records;
            if records.len() > log.len() {
                let new = &records[log.len()..];
                log.extend_from_slice(new);
            }
        }
        // paused and idle: nothing new to show
        if steps == 0 && !drained {
            continue;
        }
        let msg = ServerMessage::Snapshot(session.snapshot()).encode(shared.next_seq());
        latest.send_replace(msg.clone());
        // no receivers is fine: the simulation runs headless
        let _ = shared.snapshots.send(msg);
    }
}

async fn ws_upgrade(ws: WebSocketUpgrade, State(shared): State<Arc<Shared>>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| client(socket, shared))
}

async fn client(socket: WebSocket, shared: Arc<Shared>) {
    let (mut sink, mut stream) = socket.split();
    let mut updates = shared.snapshots.subscribe();
    let hello = shared.latest.borrow().clone();
    if sink.send(Message::Text(hello.into())).await.is_err() {
        return;
    }
    loop {
        tokio::select! {
            incoming = stream.next() => {
                let text = match incoming {
                    Some(Ok(Message::Text(t))) => t,
                    Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                    Some(Ok(_)) => continue,
                };
                let (ack, cmd) = match parse_request(text.as_str()) {
                    Ok(req) => match validate_for(shared.num_components, &req.command) {
                        Ok(()) => (Ack::accepted(req.seq), Some(req.command)),
                        Err(r) => (Ack::rejected(Some(req.seq), &r), None),
                    },
                    Err((seq, r)) => (Ack::rejected(seq, &r), None),
                };
                let frame = ServerMessage::Ack(ack).encode(shared.next_seq());
                if sink.send(Message::Text(frame.into())).await.is_err() {
                    break;
                }
                if let Some(cmd) = cmd {
                    if shared.commands.send(cmd).is_err() {
                        break;
                    }
                }
            }
            update = updates.recv() => match update {
                Ok(frame) => {
                    if sink.send(Message::Text(frame.into())).await.is_err() {
                        break;
                    }
                }
                Err(broadcast::error::RecvError::Lagged(n)) => {
                    log::warn!("dropping slow client ({n} snapshots behind)");
                    break;
                }
                Err(broadcast::error::RecvError::Closed) => break,
            },
        }
    }
}

async fn log_jsonl(State(shared): State<Arc<Shared>>) -> impl IntoResponse {
    let records = shared.log.lock().expect("log mutex poisoned").clone();
    let mut body = String::new();
    for r in &records {
        body.push_str(&serde_json::to_string(r).expect("records serialize"));
        body.push('\n');
    }
    ([(header::CONTENT_TYPE, "application/x-ndjson")], body)
}

async fn latest_snapshot(State(shared): State<Arc<Shared>>) -> impl IntoResponse {
    let body = shared.latest.borrow().clone();
    ([(header::CONTENT_TYPE, "application/json")], body)
}
