//! Live session host. One sensor and up to two consoles connect over TCP
//! (newline-framed JSON) or WebSocket (one JSON message per text frame).

use std::collections::BTreeMap;
use std::io::{self, Write};
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use futures_util::{SinkExt, StreamExt};
use musictraces_core::interaction::{InputEvent, InputKind};
use musictraces_core::scene::SceneState;
use musictraces_core::{Effects, Engine};
use tokio::io::{AsyncBufReadExt, AsyncReadExt, AsyncWriteExt, BufReader};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{mpsc, oneshot};
use tokio::task::JoinHandle;
use tokio::time::{interval, timeout, MissedTickBehavior};
use tokio_tungstenite::tungstenite;

use crate::delta::{self, StateDelta};
use crate::message::{
    decode, encode_line, Body, DecodeError, Digest, ErrorCode, Message, Role, Snapshot, MAX_MESSAGE_BYTES,
    PROTOCOL_VERSION,
};
use crate::session::{Session, SessionError};

pub const MAX_CONSOLES: usize = 2;
pub const HANDSHAKE_TIMEOUT: Duration = Duration::from_secs(5);
/// Ticks between state deltas when nothing changed.
pub const HEARTBEAT_TICKS: u64 = 30;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClockMode {
    /// The server steps the engine at the configured tick rate.
    Wall,
    /// Time advances only with the ticks carried by sensor input.
    Sensor,
}

#[derive(Clone, Debug)]
pub struct ServerOptions {
    pub tcp: SocketAddr,
    pub ws: Option<SocketAddr>,
    pub clock: ClockMode,
    pub handshake_timeout: Duration,
    pub started_unix_ms: u64,
}

impl ServerOptions {
    pub fn local(clock: ClockMode) -> Self {
        Self {
            tcp: ([127, 0, 0, 1], 0).into(),
            ws: Some(([127, 0, 0, 1], 0).into()),
            clock,
            handshake_timeout: HANDSHAKE_TIMEOUT,
            started_unix_ms: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ServerSummary {
    pub end_tick: u64,
    pub final_hash: u64,
}

pub struct ServerHandle {
    pub tcp_addr: SocketAddr,
    pub ws_addr: Option<SocketAddr>,
    shutdown: oneshot::Sender<()>,
    hub: JoinHandle<io::Result<ServerSummary>>,
    listeners: Vec<JoinHandle<()>>,
}

impl ServerHandle {
    /// Stops accepting, writes the log trailer and reports the final state.
    pub async fn shutdown(self) -> io::Result<ServerSummary> {
        for l in &self.listeners {
            l.abort();
        }
        let _ = self.shutdown.send(());
        self.hub.await.map_err(io::Error::other)?
    }
}

#[allow(clippy::large_enum_variant)]
enum HubMsg {
    Join {
        id: u64,
        role: Role,
        hello_seq: u64,
        tx: mpsc::UnboundedSender<Message>,
        accepted: oneshot::Sender<bool>,
    },
    Frame {
        id: u64,
        msg: Result<Message, DecodeError>,
    },
    Leave {
        id: u64,
    },
}

/// Binds the listeners and starts the session. `sink` receives the log.
pub async fn start<W: Write + Send + 'static>(
    engine: Engine,
    sink: W,
    opts: ServerOptions,
) -> io::Result<ServerHandle> {
    let tick_rate = engine.config().tick_rate;
    let session = Session::new(engine, opts.started_unix_ms, sink)?;
    let (hub_tx, hub_rx) = mpsc::unbounded_channel();
    let (shutdown, shutdown_rx) = oneshot::channel();
    let ids = Arc::new(AtomicU64::new(1));

    let tcp = TcpListener::bind(opts.tcp).await?;
    let tcp_addr = tcp.local_addr()?;
    let mut listeners = vec![tokio::spawn(accept_tcp(
        tcp,
        hub_tx.clone(),
        ids.clone(),
        opts.handshake_timeout,
    ))];
    let mut ws_addr = None;
    if let Some(addr) = opts.ws {
        let ws = TcpListener::bind(addr).await?;
        ws_addr = Some(ws.local_addr()?);
        listeners.push(tokio::spawn(accept_ws(ws, hub_tx.clone(), ids, opts.handshake_timeout)));
    }
    drop(hub_tx);
    let hub = Hub::new(session, opts.clock);
    let hub = tokio::spawn(hub.run(hub_rx, shutdown_rx, tick_rate));
    Ok(ServerHandle {
        tcp_addr,
        ws_addr,
        shutdown,
        hub,
        listeners,
    })
}

async fn accept_tcp(listener: TcpListener, hub: mpsc::UnboundedSender<HubMsg>, ids: Arc<AtomicU64>, wait: Duration) {
    while let Ok((stream, _)) = listener.accept().await {
        let id = ids.fetch_add(1, Ordering::Relaxed);
        tokio::spawn(serve_tcp(stream, id, hub.clone(), wait));
    }
}

async fn accept_ws(listener: TcpListener, hub: mpsc::UnboundedSender<HubMsg>, ids: Arc<AtomicU64>, wait: Duration) {
    while let Ok((stream, _)) = listener.accept().await {
        let id = ids.fetch_add(1, Ordering::Relaxed);
        tokio::spawn(serve_ws(stream, id, hub.clone(), wait));
    }
}

async fn serve_tcp(stream: TcpStream, id: u64, hub: mpsc::UnboundedSender<HubMsg>, wait: Duration) {
    let _ = stream.set_nodelay(true);
    let (read, mut write) = stream.into_split();
    let (out_tx, mut out_rx) = mpsc::unbounded_channel::<Message>();
    let writer = tokio::spawn(async move {
        while let Some(m) = out_rx.recv().await {
            if write.write_all(encode_line(&m).as_bytes()).await.is_err() {
                break;
            }
        }
        let _ = write.shutdown().await;
    });
    let (frame_tx, frame_rx) = mpsc::channel::<Vec<u8>>(64);
    let reader = tokio::spawn(async move {
        let mut read = BufReader::new(read);
        loop {
            let mut buf = Vec::new();
            let mut limited = (&mut read).take(MAX_MESSAGE_BYTES as u64 + 1);
            match limited.read_until(b'\n', &mut buf).await {
                Ok(0) | Err(_) => break,
                Ok(_) => {
                    let oversized = buf.len() > MAX_MESSAGE_BYTES;
                    if frame_tx.send(buf).await.is_err() || oversized {
                        break;
                    }
                }
            }
        }
    });
    run_client(id, frame_rx, out_tx, hub, wait).await;
    reader.abort();
    let _ = writer.await;
}

async fn serve_ws(stream: TcpStream, id: u64, hub: mpsc::UnboundedSender<HubMsg>, wait: Duration) {
    let _ = stream.set_nodelay(true);
    let Ok(Ok(ws)) = timeout(wait, tokio_tungstenite::accept_async(stream)).await else {
        return;
    };
    let (mut sink, mut source) = ws.split();
    let (out_tx, mut out_rx) = mpsc::unbounded_channel::<Message>();
    let writer = tokio::spawn(async move {
        while let Some(m) = out_rx.recv().await {
            let text = String::from_utf8(crate::message::encode(&m)).expect("JSON is UTF-8");
            if sink.send(tungstenite::Message::Text(text)).await.is_err() {
                break;
            }
        }
        let _ = sink.close().await;
    });
    let (frame_tx, frame_rx) = mpsc::channel::<Vec<u8>>(64);
    let reader = tokio::spawn(async move {
        while let Some(Ok(frame)) = source.next().await {
            let bytes = match frame {
                tungstenite::Message::Text(t) => t.into_bytes(),
                tungstenite::Message::Binary(b) => b,
                tungstenite::Message::Close(_) => break,
                _ => continue,
            };
            if frame_tx.send(bytes).await.is_err() {
                break;
            }
        }
    });
    run_client(id, frame_rx, out_tx, hub, wait).await;
    reader.abort();
    let _ = writer.await;
}

fn error(seq: u64, code: ErrorCode, message: impl Into<String>) -> Message {
    Message::new(
        seq,
        0,
        Body::Error {
            code,
            message: message.into(),
        },
    )
}

/// Handshake, then forwards frames to the hub until the peer goes away.
async fn run_client(
    id: u64,
    mut frames: mpsc::Receiver<Vec<u8>>,
    out: mpsc::UnboundedSender<Message>,
    hub: mpsc::UnboundedSender<HubMsg>,
    wait: Duration,
) {
    let first = match timeout(wait, frames.recv()).await {
        Ok(Some(bytes)) => bytes,
        Ok(None) => return,
        Err(_) => {
            let _ = out.send(error(
                1,
                ErrorCode::HandshakeTimeout,
                "no hello within the handshake window",
            ));
            return;
        }
    };
    let hello = match decode(&first) {
        Ok(m) => m,
        Err(e) => {
            let _ = out.send(error(1, ErrorCode::Decode, e.to_string()));
            return;
        }
    };
    if hello.version != PROTOCOL_VERSION {
        let reason = format!(
            "protocol version {} is not supported, expected {PROTOCOL_VERSION}",
            hello.version
        );
        let _ = out.send(error(1, ErrorCode::UnsupportedVersion, reason));
        return;
    }
    let Body::Hello { role } = hello.body else {
        let _ = out.send(error(1, ErrorCode::HandshakeRequired, "first message must be hello"));
        return;
    };
    let (accepted, verdict) = oneshot::channel();
    let join = HubMsg::Join {
        id,
        role,
        hello_seq: hello.seq,
        tx: out,
        accepted,
    };
    if hub.send(join).is_err() || verdict.await != Ok(true) {
        return;
    }
    while let Some(bytes) = frames.recv().await {
        if hub
            .send(HubMsg::Frame {
                id,
                msg: decode(&bytes),
            })
            .is_err()
        {
            return;
        }
    }
    let _ = hub.send(HubMsg::Leave { id });
}

struct Client {
    role: Role,
    tx: mpsc::UnboundedSender<Message>,
    out_seq: u64,
    in_seq: u64,
}

struct Hub<W: Write> {
    session: Session<W>,
    clock: ClockMode,
    clients: BTreeMap<u64, Client>,
    sensor: Option<u64>,
    mirror: SceneState,
    last_sent: u64,
}

impl<W: Write + Send + 'static> Hub<W> {
    fn new(session: Session<W>, clock: ClockMode) -> Self {
        let mirror = session.engine().scene().clone();
        Self {
            session,
            clock,
            clients: BTreeMap::new(),
            sensor: None,
            mirror,
            last_sent: 0,
        }
    }

    async fn run(
        mut self,
        mut rx: mpsc::UnboundedReceiver<HubMsg>,
        mut shutdown: oneshot::Receiver<()>,
        tick_rate: u32,
    ) -> io::Result<ServerSummary> {
        let mut clock = interval(Duration::from_secs_f64(1.0 / tick_rate as f64));
        clock.set_missed_tick_behavior(MissedTickBehavior::Burst);
        loop {
            tokio::select! {
                _ = &mut shutdown => break,
                msg = rx.recv() => match msg {
                    Some(msg) => self.handle(msg)?,
                    None => break,
                },
                _ = clock.tick(), if self.clock == ClockMode::Wall => {
                    let next = self.session.tick() + 1;
                    let fx = self.session.advance_to(next)?;
                    self.dispatch(fx);
                }
            }
            self.broadcast_delta();
        }
        let end_tick = self.session.tick();
        let (final_hash, _, _) = self.session.finish(end_tick)?;
        Ok(ServerSummary { end_tick, final_hash })
    }

    fn send(&mut self, id: u64, body: Body) {
        let tick = self.session.tick();
        if let Some(c) = self.clients.get_mut(&id) {
            c.out_seq += 1;
            let _ = c.tx.send(Message::new(c.out_seq, tick, body));
        }
    }

    fn send_role(&mut self, role: Role, body: &Body) {
        let ids: Vec<u64> = self
            .clients
            .iter()
            .filter(|(_, c)| c.role == role)
            .map(|(id, _)| *id)
            .collect();
        for id in ids {
            self.send(id, body.clone());
        }
    }

    fn reject(tx: &mpsc::UnboundedSender<Message>, code: ErrorCode, reason: &str) {
        let _ = tx.send(error(1, code, reason));
    }

    fn handle(&mut self, msg: HubMsg) -> io::Result<()> {
        match msg {
            HubMsg::Join {
                id,
                role,
                hello_seq,
                tx,
                accepted,
            } => {
                let consoles = self.clients.values().filter(|c| c.role == Role::Console).count();
                match role {
                    Role::Sensor if self.sensor.is_some() => {
                        Self::reject(&tx, ErrorCode::RoleConflict, "a sensor is already connected");
                        let _ = accepted.send(false);
                        return Ok(());
                    }
                    Role::Console if consoles >= MAX_CONSOLES => {
                        Self::reject(&tx, ErrorCode::ConsoleLimit, "console limit reached");
                        let _ = accepted.send(false);
                        return Ok(());
                    }
                    _ => {}
                }
                self.clients.insert(
                    id,
                    Client {
                        role,
                        tx,
                        out_seq: 0,
                        in_seq: hello_seq,
                    },
                );
                let _ = accepted.send(true);
                self.send(id, Body::Ack { seq: hello_seq });
                match role {
                    Role::Sensor => {
                        self.sensor = Some(id);
                        for d in self.session.engine().initial_effects().devices {
                            self.send(id, Body::DeviceCommand(d));
                        }
                    }
                    Role::Console => {
                        let scene = self.session.engine().scene().clone();
                        let hash = Digest(self.session.engine().hash());
                        self.send(id, Body::Snapshot(Snapshot { scene, hash }));
                    }
                }
            }
            HubMsg::Leave { id } => {
                self.clients.remove(&id);
                if self.sensor == Some(id) {
                    self.sensor = None;
                    let ev = InputEvent {
                        tick: self.session.tick(),
                        kind: InputKind::SensorLost,
                    };
                    match self.session.input(&ev) {
                        Ok(fx) => self.dispatch(fx),
                        Err(SessionError::Io(e)) => return Err(e),
                        Err(SessionError::Engine(_)) => {}
                    }
                }
            }
            HubMsg::Frame { id, msg } => self.frame(id, msg)?,
        }
        Ok(())
    }

    fn frame(&mut self, id: u64, msg: Result<Message, DecodeError>) -> io::Result<()> {
        let Some(client) = self.clients.get_mut(&id) else {
            return Ok(());
        };
        let role = client.role;
        let msg = match msg {
            Ok(m) => m,
            Err(e) => {
                self.send(
                    id,
                    Body::Error {
                        code: ErrorCode::Decode,
                        message: e.to_string(),
                    },
                );
                return Ok(());
            }
        };
        if msg.version != PROTOCOL_VERSION {
            let message = format!("protocol version {} is not supported", msg.version);
            self.send(
                id,
                Body::Error {
                    code: ErrorCode::UnsupportedVersion,
                    message,
                },
            );
            return Ok(());
        }
        if msg.seq <= client.in_seq {
            let message = format!("seq {} does not follow {}", msg.seq, client.in_seq);
            self.send(
                id,
                Body::Error {
                    code: ErrorCode::OutOfSequence,
                    message,
                },
            );
            return Ok(());
        }
        client.in_seq = msg.seq;
        let result = match (role, msg.body) {
            (Role::Sensor, Body::Input(mut ev)) => {
                if ev.kind == InputKind::SensorLost {
                    self.not_allowed(id, "sensor_lost is reserved for the host");
                    return Ok(());
                }
                match self.clock {
                    ClockMode::Wall if ev.kind == InputKind::Tick => return Ok(()),
                    ClockMode::Wall => ev.tick = self.session.tick(),
                    ClockMode::Sensor if ev.kind == InputKind::Tick && ev.tick >= self.session.tick() => {
                        let fx = self.session.advance_to(ev.tick)?;
                        self.dispatch(fx);
                        return Ok(());
                    }
                    ClockMode::Sensor => {}
                }
                self.session.input(&ev).map_err(|e| (ErrorCode::InvalidInput, e))
            }
            (Role::Console, Body::Control(cmd)) => match self.session.control(&cmd) {
                Ok(fx) => {
                    self.send(id, Body::Ack { seq: msg.seq });
                    Ok(fx)
                }
                Err(e) => Err((ErrorCode::InvalidCommand, e)),
            },
            (_, Body::HashCheck { .. }) => {
                let hash = Digest(self.session.engine().hash());
                self.send(id, Body::HashCheck { hash });
                return Ok(());
            }
            (_, body) => {
                self.not_allowed(id, &format!("{} is not accepted from a {role:?} client", body.kind()));
                return Ok(());
            }
        };
        match result {
            Ok(fx) => self.dispatch(fx),
            Err((_, SessionError::Io(e))) => return Err(e),
            Err((code, SessionError::Engine(e))) => self.send(
                id,
                Body::Error {
                    code,
                    message: e.to_string(),
                },
            ),
        }
        Ok(())
    }

    fn not_allowed(&mut self, id: u64, message: &str) {
        self.send(
            id,
            Body::Error {
                code: ErrorCode::NotAllowed,
                message: message.to_string(),
            },
        );
    }

    fn dispatch(&mut self, fx: Effects) {
        for n in fx.notes {
            self.send_role(Role::Console, &Body::NoteEvent(n));
        }
        for n in fx.notifications {
            self.send_role(Role::Console, &Body::Notification(n));
        }
        for d in fx.devices {
            self.send_role(Role::Sensor, &Body::DeviceCommand(d));
        }
    }

    fn broadcast_delta(&mut self) {
        let scene = self.session.engine().scene();
        let d: StateDelta = delta::diff(&self.mirror, scene);
        let heartbeat = scene.tick >= self.last_sent + HEARTBEAT_TICKS;
        if !(d.touches_objects() || header_changed(&self.mirror, scene) || heartbeat) {
            return;
        }
        self.mirror = scene.clone();
        self.last_sent = scene.tick;
        let ids: Vec<u64> = self.clients.keys().copied().collect();
        for id in ids {
            self.send(id, Body::StateDelta(d.clone()));
        }
    }
}

fn header_changed(prev: &SceneState, next: &SceneState) -> bool {
    prev.paused != next.paused
        || prev.input_digest != next.input_digest
        || prev.current_chord != next.current_chord
        || prev.floor != next.floor
        || prev.players != next.players
        || prev.background_color != next.background_color
        || prev.area_overuse != next.area_overuse
        || prev.tutorial_step != next.tutorial_step
}
