use std::io::{self, Write};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use futures_util::{SinkExt, StreamExt};
use musictraces_core::control::ControlCommand;
use musictraces_core::geometry::Vec2;
use musictraces_core::hints::NotificationKind;
use musictraces_core::interaction::{InputEvent, InputKind};
use musictraces_core::{default_model, scene_hash, Engine, EngineConfig};
use musictraces_protocol::client::LineClient;
use musictraces_protocol::server::{self, ClockMode, ServerHandle, ServerOptions};
use musictraces_protocol::{decode, encode, replay_text, Body, ErrorCode, Message, Role};

const WAIT: Duration = Duration::from_secs(5);

#[derive(Clone, Default)]
struct SharedBuf(Arc<Mutex<Vec<u8>>>);

impl Write for SharedBuf {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        self.0.lock().unwrap().extend_from_slice(buf);
        Ok(buf.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

impl SharedBuf {
    fn text(&self) -> String {
        String::from_utf8(self.0.lock().unwrap().clone()).unwrap()
    }
}

async fn start(clock: ClockMode) -> (ServerHandle, SharedBuf) {
    start_with(ServerOptions::local(clock)).await
}

async fn start_with(opts: ServerOptions) -> (ServerHandle, SharedBuf) {
    let engine = Engine::new(EngineConfig::default(), default_model()).unwrap();
    let log = SharedBuf::default();
    (server::start(engine, log.clone(), opts).await.unwrap(), log)
}

fn is_error(m: &Message, want: ErrorCode) -> bool {
    matches!(&m.body, Body::Error { code, .. } if *code == want)
}

fn input(tick: u64, kind: InputKind) -> Body {
    Body::Input(InputEvent { tick, kind })
}

#[tokio::test]
async fn console_handshake_gets_ack_then_snapshot() {
    let (srv, _) = start(ClockMode::Sensor).await;
    let (mut console, ack) = LineClient::join(srv.tcp_addr, Role::Console).await.unwrap();
    assert_eq!(ack.body, Body::Ack { seq: 1 });
    let snap = console.recv_within(WAIT).await.unwrap();
    let Body::Snapshot(s) = snap.body else {
        panic!("{snap:?}")
    };
    assert_eq!(s.hash.0, scene_hash(&s.scene));
    srv.shutdown().await.unwrap();
}

#[tokio::test]
async fn second_sensor_is_refused() {
    let (srv, _) = start(ClockMode::Sensor).await;
    let (_sensor, ack) = LineClient::join(srv.tcp_addr, Role::Sensor).await.unwrap();
    assert!(matches!(ack.body, Body::Ack { .. }));
    let (mut other, reply) = LineClient::join(srv.tcp_addr, Role::Sensor).await.unwrap();
    assert!(is_error(&reply, ErrorCode::RoleConflict), "{reply:?}");
    assert!(other.recv().await.unwrap().is_none());
    srv.shutdown().await.unwrap();
}

#[tokio::test]
async fn third_console_is_refused() {
    let (srv, _) = start(ClockMode::Sensor).await;
    let _a = LineClient::join(srv.tcp_addr, Role::Console).await.unwrap();
    let _b = LineClient::join(srv.tcp_addr, Role::Console).await.unwrap();
    let (_, reply) = LineClient::join(srv.tcp_addr, Role::Console).await.unwrap();
    assert!(is_error(&reply, ErrorCode::ConsoleLimit), "{reply:?}");
    srv.shutdown().await.unwrap();
}

#[tokio::test]
async fn version_mismatch_and_missing_hello_close_the_connection() {
    let (srv, _) = start(ClockMode::Sensor).await;
    let mut c = LineClient::connect(srv.tcp_addr).await.unwrap();
    let mut hello = Message::new(1, 0, Body::Hello { role: Role::Console });
    hello.version = 99;
    c.send_message(&hello).await.unwrap();
    let reply = c.recv_within(WAIT).await.unwrap();
    assert!(is_error(&reply, ErrorCode::UnsupportedVersion), "{reply:?}");
    assert!(c.recv().await.unwrap().is_none());

    let mut c = LineClient::connect(srv.tcp_addr).await.unwrap();
    c.send(0, Body::Control(ControlCommand::Pause)).await.unwrap();
    let reply = c.recv_within(WAIT).await.unwrap();
    assert!(is_error(&reply, ErrorCode::HandshakeRequired), "{reply:?}");
    srv.shutdown().await.unwrap();
}

#[tokio::test]
async fn silent_client_times_out() {
    let mut opts = ServerOptions::local(ClockMode::Sensor);
    opts.handshake_timeout = Duration::from_millis(150);
    let (srv, _) = start_with(opts).await;
    let mut c = LineClient::connect(srv.tcp_addr).await.unwrap();
    let reply = c.recv_within(WAIT).await.unwrap();
    assert!(is_error(&reply, ErrorCode::HandshakeTimeout), "{reply:?}");
    assert!(c.recv().await.unwrap().is_none());
    srv.shutdown().await.unwrap();
}

#[tokio::test]
async fn controls_only_from_consoles() {
    let (srv, _) = start(ClockMode::Sensor).await;
    let (mut sensor, _) = LineClient::join(srv.tcp_addr, Role::Sensor).await.unwrap();
    sensor.send(0, Body::Control(ControlCommand::Pause)).await.unwrap();
    let reply = sensor
        .wait_for(WAIT, |m| matches!(m.body, Body::Error { .. }))
        .await
        .unwrap();
    assert!(is_error(&reply, ErrorCode::NotAllowed), "{reply:?}");

    let (mut console, _) = LineClient::join(srv.tcp_addr, Role::Console).await.unwrap();
    console.send(0, input(1, InputKind::Tick)).await.unwrap();
    let reply = console
        .wait_for(WAIT, |m| matches!(m.body, Body::Error { .. }))
        .await
        .unwrap();
    assert!(is_error(&reply, ErrorCode::NotAllowed), "{reply:?}");
    srv.shutdown().await.unwrap();
}

#[tokio::test]
async fn pause_is_acked_and_broadcast_to_everyone() {
    let (srv, _) = start(ClockMode::Sensor).await;
    let (mut sensor, _) = LineClient::join(srv.tcp_addr, Role::Sensor).await.unwrap();
    let (mut a, _) = LineClient::join(srv.tcp_addr, Role::Console).await.unwrap();
    let (mut b, _) = LineClient::join(srv.tcp_addr, Role::Console).await.unwrap();
    let seq = a.send(0, Body::Control(ControlCommand::Pause)).await.unwrap();
    a.wait_for(WAIT, |m| m.body == Body::Ack { seq }).await.unwrap();
    let paused = |m: &Message| matches!(&m.body, Body::StateDelta(d) if d.paused());
    for c in [&mut a, &mut b, &mut sensor] {
        c.wait_for(WAIT, paused).await.unwrap();
    }
    srv.shutdown().await.unwrap();
}

#[tokio::test]
async fn invalid_command_is_reported_not_applied() {
    let (srv, _) = start(ClockMode::Sensor).await;
    let (mut a, _) = LineClient::join(srv.tcp_addr, Role::Console).await.unwrap();
    let hint = ControlCommand::TriggerHint {
        shape: musictraces_core::hints::HintShape::Star,
        pos: Vec2 { x: 1.5, y: 0.5 },
        player: musictraces_core::PlayerId::P1,
        style: musictraces_core::hints::HintStyle::Dashed,
    };
    a.send(0, Body::Control(hint)).await.unwrap();
    let reply = a
        .wait_for(WAIT, |m| matches!(m.body, Body::Error { .. }))
        .await
        .unwrap();
    assert!(is_error(&reply, ErrorCode::InvalidCommand), "{reply:?}");
    srv.shutdown().await.unwrap();
}

#[tokio::test]
async fn malformed_frames_get_errors_without_disconnect() {
    let (srv, _) = start(ClockMode::Sensor).await;
    let (mut c, _) = LineClient::join(srv.tcp_addr, Role::Console).await.unwrap();
    c.send_raw(b"{\"version\":1,\"seq\":5,\"kind\":\"launch\"}\n")
        .await
        .unwrap();
    let reply = c
        .wait_for(WAIT, |m| matches!(m.body, Body::Error { .. }))
        .await
        .unwrap();
    assert!(is_error(&reply, ErrorCode::Decode), "{reply:?}");
    c.send(
        0,
        Body::HashCheck {
            hash: musictraces_protocol::Digest(0),
        },
    )
    .await
    .unwrap();
    c.wait_for(WAIT, |m| matches!(m.body, Body::HashCheck { .. }))
        .await
        .unwrap();
    let stale = Message::new(
        1,
        0,
        Body::HashCheck {
            hash: musictraces_protocol::Digest(0),
        },
    );
    c.send_message(&stale).await.unwrap();
    let reply = c
        .wait_for(WAIT, |m| matches!(m.body, Body::Error { .. }))
        .await
        .unwrap();
    assert!(is_error(&reply, ErrorCode::OutOfSequence), "{reply:?}");
    srv.shutdown().await.unwrap();
}

#[tokio::test]
async fn sensor_loss_pauses_and_notifies_consoles() {
    let (srv, log) = start(ClockMode::Sensor).await;
    let (mut console, _) = LineClient::join(srv.tcp_addr, Role::Console).await.unwrap();
    let (mut sensor, _) = LineClient::join(srv.tcp_addr, Role::Sensor).await.unwrap();
    sensor.send(0, input(10, InputKind::Tick)).await.unwrap();
    sensor.send(0, input(10, InputKind::Tick)).await.unwrap();
    drop(sensor);
    let note = console
        .wait_for(
            WAIT,
            |m| matches!(&m.body, Body::Notification(n) if n.kind == NotificationKind::SensorLost),
        )
        .await
        .unwrap();
    assert_eq!(note.tick, 10);
    console
        .wait_for(WAIT, |m| matches!(&m.body, Body::StateDelta(d) if d.paused()))
        .await
        .unwrap();

    let (mut back, ack) = LineClient::join(srv.tcp_addr, Role::Sensor).await.unwrap();
    assert!(matches!(ack.body, Body::Ack { .. }));
    back.send(
        0,
        input(
            20,
            InputKind::BrushButton {
                player: 1,
                pressed: true,
            },
        ),
    )
    .await
    .unwrap();
    let summary = srv.shutdown().await.unwrap();
    let replayed = replay_text(&log.text()).unwrap();
    assert_eq!(replayed.final_hash, summary.final_hash);
    assert!(replayed.engine.scene().paused);
    assert!(!replayed.engine.scene().players[0].brush_pressed);
}

#[tokio::test]
async fn rejoining_console_snapshot_matches_live_hash() {
    let (srv, _) = start(ClockMode::Sensor).await;
    let (mut sensor, _) = LineClient::join(srv.tcp_addr, Role::Sensor).await.unwrap();
    let (console, _) = LineClient::join(srv.tcp_addr, Role::Console).await.unwrap();
    sensor
        .send(
            0,
            input(
                3,
                InputKind::BrushButton {
                    player: 1,
                    pressed: true,
                },
            ),
        )
        .await
        .unwrap();
    for i in 0..15u64 {
        let pos = Vec2::new(0.2 + 0.03 * i as f64, 0.4);
        let kind = InputKind::HandMove {
            player: 1,
            pos,
            screen_distance: 1.8,
        };
        sensor.send(0, input(4 + i, kind)).await.unwrap();
    }
    sensor
        .send(
            0,
            Body::HashCheck {
                hash: musictraces_protocol::Digest(0),
            },
        )
        .await
        .unwrap();
    sensor
        .wait_for(WAIT, |m| matches!(m.body, Body::HashCheck { .. }))
        .await
        .unwrap();
    drop(console);
    let (mut again, _) = LineClient::join(srv.tcp_addr, Role::Console).await.unwrap();
    let snap = again
        .wait_for(WAIT, |m| matches!(m.body, Body::Snapshot(_)))
        .await
        .unwrap();
    let Body::Snapshot(s) = snap.body else { unreachable!() };
    again.send(0, Body::HashCheck { hash: s.hash }).await.unwrap();
    let live = again
        .wait_for(WAIT, |m| matches!(m.body, Body::HashCheck { .. }))
        .await
        .unwrap();
    assert_eq!(live.body, Body::HashCheck { hash: s.hash });
    assert_eq!(s.scene.objects.len(), 1);
    srv.shutdown().await.unwrap();
}

#[tokio::test]
async fn served_session_replays_to_the_same_hash() {
    let (srv, log) = start(ClockMode::Sensor).await;
    let (mut sensor, _) = LineClient::join(srv.tcp_addr, Role::Sensor).await.unwrap();
    let (mut console, _) = LineClient::join(srv.tcp_addr, Role::Console).await.unwrap();
    sensor
        .send(
            0,
            input(
                2,
                InputKind::BrushButton {
                    player: 2,
                    pressed: true,
                },
            ),
        )
        .await
        .unwrap();
    for i in 0..30u64 {
        let pos = Vec2::new(0.3 + 0.01 * i as f64, 0.3 + 0.012 * i as f64);
        let kind = InputKind::HandMove {
            player: 2,
            pos,
            screen_distance: 2.2,
        };
        sensor.send(0, input(3 + i, kind)).await.unwrap();
    }
    sensor
        .send(
            0,
            input(
                40,
                InputKind::BrushButton {
                    player: 2,
                    pressed: false,
                },
            ),
        )
        .await
        .unwrap();
    sensor.send(0, input(60, InputKind::Tick)).await.unwrap();
    sensor
        .send(
            0,
            Body::HashCheck {
                hash: musictraces_protocol::Digest(0),
            },
        )
        .await
        .unwrap();
    sensor
        .wait_for(WAIT, |m| matches!(m.body, Body::HashCheck { .. }))
        .await
        .unwrap();
    let seq = console
        .send(0, Body::Control(ControlCommand::PlayAllMelodies))
        .await
        .unwrap();
    console.wait_for(WAIT, |m| m.body == Body::Ack { seq }).await.unwrap();
    sensor.send(0, input(700, InputKind::Tick)).await.unwrap();
    sensor
        .send(
            0,
            Body::HashCheck {
                hash: musictraces_protocol::Digest(0),
            },
        )
        .await
        .unwrap();
    sensor
        .wait_for(WAIT, |m| matches!(m.body, Body::HashCheck { .. }))
        .await
        .unwrap();
    let summary = srv.shutdown().await.unwrap();
    assert_eq!(summary.end_tick, 700);
    let text = log.text();
    let replayed = replay_text(&text).unwrap();
    assert_eq!(replayed.final_hash, summary.final_hash);
    assert_eq!(replayed.hash_checks, 2);
    assert_eq!(replayed.engine.scene().lines().count(), 1);
}

#[tokio::test]
async fn wall_clock_advances_on_its_own() {
    let (srv, log) = start(ClockMode::Wall).await;
    let (mut c, _) = LineClient::join(srv.tcp_addr, Role::Console).await.unwrap();
    tokio::time::sleep(Duration::from_millis(400)).await;
    c.send(
        0,
        Body::HashCheck {
            hash: musictraces_protocol::Digest(0),
        },
    )
    .await
    .unwrap();
    let reply = c
        .wait_for(WAIT, |m| matches!(m.body, Body::HashCheck { .. }))
        .await
        .unwrap();
    assert!(reply.tick >= 5, "tick {}", reply.tick);
    let summary = srv.shutdown().await.unwrap();
    assert!(summary.end_tick >= reply.tick);
    assert_eq!(replay_text(&log.text()).unwrap().final_hash, summary.final_hash);
}

#[tokio::test]
async fn websocket_console_speaks_the_same_protocol() {
    let (srv, _) = start(ClockMode::Sensor).await;
    let url = format!("ws://{}", srv.ws_addr.unwrap());
    let (mut ws, _) = tokio_tungstenite::connect_async(url).await.unwrap();
    let hello = Message::new(1, 0, Body::Hello { role: Role::Console });
    let text = String::from_utf8(encode(&hello)).unwrap();
    ws.send(tokio_tungstenite::tungstenite::Message::Text(text))
        .await
        .unwrap();
    let mut kinds = Vec::new();
    while kinds.len() < 2 {
        let frame = tokio::time::timeout(WAIT, ws.next()).await.unwrap().unwrap().unwrap();
        if let tokio_tungstenite::tungstenite::Message::Text(t) = frame {
            kinds.push(decode(t.as_bytes()).unwrap().body.kind());
        }
    }
    assert_eq!(kinds, ["ack", "snapshot"]);
    let (_tcp, reply) = LineClient::join(srv.tcp_addr, Role::Console).await.unwrap();
    assert!(matches!(reply.body, Body::Ack { .. }));
    let (_, reply) = LineClient::join(srv.tcp_addr, Role::Console).await.unwrap();
    assert!(
        is_error(&reply, ErrorCode::ConsoleLimit),
        "websocket console must count toward the limit"
    );
    srv.shutdown().await.unwrap();
}
