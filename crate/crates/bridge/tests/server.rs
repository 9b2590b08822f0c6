use std::time::Duration;

use assembly_bridge::protocol::encode_request;
use assembly_bridge::{start, Command, ServerConfig, ServerMessage, SimStatus, Snapshot};
use assembly_core::{Pose64, Scenario64};
use futures_util::{SinkExt, StreamExt};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio_tungstenite::tungstenite::Message;

type Ws = tokio_tungstenite::WebSocketStream<tokio_tungstenite::MaybeTlsStream<tokio::net::TcpStream>>;

async fn connect(addr: std::net::SocketAddr) -> Ws {
    let (ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/ws")).await.unwrap();
    ws
}

async fn next_msg(ws: &mut Ws) -> (u64, ServerMessage) {
    loop {
        let msg = tokio::time::timeout(Duration::from_secs(10), ws.next())
            .await
            .expect("server went quiet")
            .unwrap()
            .unwrap();
        if let Message::Text(t) = msg {
            return ServerMessage::decode(t.as_str()).unwrap();
        }
    }
}

async fn next_snapshot(ws: &mut Ws) -> Snapshot {
    loop {
        if let (_, ServerMessage::Snapshot(s)) = next_msg(ws).await {
            return s;
        }
    }
}

async fn send(ws: &mut Ws, seq: u64, cmd: &Command) {
    ws.send(Message::Text(encode_request(seq, cmd).into())).await.unwrap();
}

async fn http_get(addr: std::net::SocketAddr, path: &str) -> String {
    let mut tcp = tokio::net::TcpStream::connect(addr).await.unwrap();
    let req = format!("GET {path} HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n");
    tcp.write_all(req.as_bytes()).await.unwrap();
    let mut out = String::new();
    tcp.read_to_string(&mut out).await.unwrap();
    out
}

fn config(tick_hz: f64) -> ServerConfig {
    ServerConfig {
        port: 0,
        tick_hz,
        ..ServerConfig::default()
    }
}

#[tokio::test]
async fn joining_client_gets_current_snapshot_then_stream() {
    let server = start(Scenario64::load("arrow4").unwrap(), config(200.0)).await.unwrap();
    let mut a = connect(server.addr).await;
    let first = next_snapshot(&mut a).await;
    assert_eq!(first.components.len(), 4);
    let later = next_snapshot(&mut a).await;
    assert!(later.step > first.step || first.step == 0);
    // a second concurrent client sees the same stream
    let mut b = connect(server.addr).await;
    let joined = next_snapshot(&mut b).await;
    assert!(joined.step >= later.step);
    server.shutdown().await;
}

#[tokio::test]
async fn simulation_runs_without_clients() {
    let server = start(Scenario64::load("arrow4").unwrap(), config(500.0)).await.unwrap();
    tokio::time::sleep(Duration::from_millis(200)).await;
    let body = http_get(server.addr, "/snapshot").await;
    let json = body.split("\r\n\r\n").nth(1).unwrap();
    let (_, msg) = ServerMessage::decode(json).unwrap();
    match msg {
        ServerMessage::Snapshot(s) => assert!(s.step > 10),
        other => panic!("{other:?}"),
    }
    server.shutdown().await;
}

#[tokio::test]
async fn pause_and_single_step_over_the_wire() {
    let server = start(Scenario64::load("arrow4").unwrap(), config(100.0)).await.unwrap();
    let mut ws = connect(server.addr).await;
    send(&mut ws, 1, &Command::Pause).await;
    let paused_at = loop {
        match next_msg(&mut ws).await {
            (_, ServerMessage::Ack(a)) => assert!(a.is_accepted() && a.ack_seq == Some(1)),
            (_, ServerMessage::Snapshot(s)) if s.sim_status == SimStatus::Paused => break s.step,
            _ => {}
        }
    };
    for seq in 2..5 {
        send(&mut ws, seq, &Command::SingleStep).await;
    }
    let mut acks = 0;
    let mut last = paused_at;
    let deadline = tokio::time::Instant::now() + Duration::from_secs(2);
    while tokio::time::Instant::now() < deadline {
        match tokio::time::timeout(Duration::from_millis(300), next_msg(&mut ws)).await {
            Ok((_, ServerMessage::Ack(a))) => {
                assert!(a.is_accepted());
                acks += 1;
            }
            Ok((_, ServerMessage::Snapshot(s))) => last = s.step,
            Err(_) => break,
        }
    }
    assert_eq!(acks, 3);
    assert_eq!(last, paused_at + 3);
    server.shutdown().await;
}

#[tokio::test]
async fn malformed_and_unknown_id_rejected_and_move_logged() {
    let server = start(Scenario64::load("arrow4").unwrap(), config(100.0)).await.unwrap();
    let mut ws = connect(server.addr).await;
    ws.send(Message::Text("{oops".into())).await.unwrap();
    ws.send(Message::Text(r#"{"v":1,"type":"move_component","payload":{"id":42,"pose":{"p":[0,0,0]}},"seq":8}"#.into()))
        .await
        .unwrap();
    let pose = Pose64::planar(0.2, 0.3, 0.1).unwrap();
    send(&mut ws, 9, &Command::MoveComponent { id: 1, pose }).await;
    let mut reasons = Vec::new();
    while reasons.len() < 3 {
        if let (_, ServerMessage::Ack(a)) = next_msg(&mut ws).await {
            reasons.push((a.ack_seq, a.reason.unwrap_or_default()));
        }
    }
    assert_eq!(reasons[0].0, None);
    assert!(reasons[0].1.starts_with("parse"));
    assert_eq!(reasons[1].0, Some(8));
    assert!(reasons[1].1.starts_with("id"));
    assert_eq!(reasons[2], (Some(9), String::new()));
    // the accepted move shows up in the downloadable log
    let mut found = false;
    for _ in 0..50 {
        let body = http_get(server.addr, "/log").await;
        if body.contains(r#""kind":"disturbance","hand":null,"component":1"#) {
            found = true;
            break;
        }
        tokio::time::sleep(Duration::from_millis(20)).await;
    }
    assert!(found);
    server.shutdown().await;
}

#[tokio::test]
async fn port_in_use_is_a_startup_error() {
    let server = start(Scenario64::load("arrow4").unwrap(), config(30.0)).await.unwrap();
    let again = start(
        Scenario64::load("arrow4").unwrap(),
        ServerConfig {
            port: server.addr.port(),
            ..config(30.0)
        },
    )
    .await;
    assert!(matches!(again, Err(assembly_bridge::ServerError::Bind { .. })));
    server.shutdown().await;
}
