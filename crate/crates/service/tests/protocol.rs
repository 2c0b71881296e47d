use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use amrvol_core::io::{decode_png, generate_synthetic, FieldKind, SyntheticSpec};
use amrvol_core::{BrickBuildParams, Scene, TransferFunction, VolumeData};
use amrvol_service::{bind, serve, ServiceError, Session, SessionOptions};
use futures::{SinkExt, StreamExt};
use serde_json::{json, Value};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::TcpStream;
use tokio::sync::oneshot;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{connect_async, MaybeTlsStream, WebSocketStream};

type Client = WebSocketStream<MaybeTlsStream<TcpStream>>;

fn scene() -> Scene {
    let spec = SyntheticSpec {
        field: FieldKind::Gaussian,
        root_cells: [4, 4, 4],
        max_level: 2,
        thresholds: vec![0.05],
        seed: 1,
        hole_fraction: 0.0,
    };
    let cells = generate_synthetic(&spec).unwrap();
    let data = VolumeData::from_cells(&cells, &BrickBuildParams::default()).unwrap();
    let (lo, hi) = data.model.value_range(0);
    Scene::new(Arc::new(data), 0, TransferFunction::cool_warm([lo as f64, hi as f64], 0.4)).unwrap()
}

struct Server {
    addr: SocketAddr,
    stop: Option<oneshot::Sender<()>>,
    task: tokio::task::JoinHandle<Result<(), ServiceError>>,
}

impl Server {
    async fn start(options: SessionOptions) -> Self {
        let session = Arc::new(Session::new(scene(), options));
        let listener = bind("127.0.0.1:0".parse().unwrap()).await.unwrap();
        let addr = listener.local_addr().unwrap();
        let (tx, rx) = oneshot::channel();
        let task = tokio::spawn(serve(listener, session, async {
            rx.await.ok();
        }));
        Server { addr, stop: Some(tx), task }
    }

    async fn client(&self) -> Client {
        connect_async(format!("ws://{}/ws", self.addr)).await.unwrap().0
    }

    async fn shutdown(mut self) {
        self.stop.take().unwrap().send(()).unwrap();
        self.task.await.unwrap().unwrap();
    }
}

async fn send(c: &mut Client, v: Value) {
    c.send(Message::Text(v.to_string().into())).await.unwrap();
}

async fn recv_json(c: &mut Client) -> Value {
    loop {
        match tokio::time::timeout(Duration::from_secs(60), c.next()).await.unwrap().unwrap().unwrap() {
            Message::Text(t) => return serde_json::from_str(t.as_str()).unwrap(),
            Message::Ping(_) | Message::Pong(_) => continue,
            other => panic!("expected text, got {other:?}"),
        }
    }
}

async fn recv_binary(c: &mut Client) -> Vec<u8> {
    match tokio::time::timeout(Duration::from_secs(60), c.next()).await.unwrap().unwrap().unwrap() {
        Message::Binary(b) => b.to_vec(),
        other => panic!("expected binary, got {other:?}"),
    }
}

/// Requests a frame and returns its header and decoded pixels.
async fn frame(c: &mut Client, w: u32, h: u32) -> (Value, Vec<u8>) {
    send(c, json!({"type": "request_frame", "width": w, "height": h})).await;
    let header = recv_json(c).await;
    assert_eq!(header["type"], "frame", "{header}");
    let png = recv_binary(c).await;
    let (pw, ph, pixels) = decode_png(&png).unwrap();
    assert_eq!((pw, ph), (w, h));
    (header, pixels)
}

fn tf_json(domain: [f64; 2], alpha: f32) -> Value {
    let rgba: Vec<[f32; 4]> = (0..256).map(|i| [i as f32 / 255.0, 0.5, 1.0 - i as f32 / 255.0, alpha]).collect();
    json!({"type": "set_tf", "domain": domain, "rgba": rgba})
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn scripted_session() {
    let server = Server::start(SessionOptions::default()).await;
    let mut c = server.client().await;

    send(&mut c, json!({"type": "hello"})).await;
    let info = recv_json(&mut c).await;
    assert_eq!(info["type"], "info");
    assert_eq!(info["fields"], json!(["gaussian"]));
    assert_eq!(info["bounds"], json!([[0.0, 0.0, 0.0], [16.0, 16.0, 16.0]]));
    assert!(info["stats"]["regions"].as_u64().unwrap() > 0);
    let range = [info["valueRange"][0].as_f64().unwrap(), info["valueRange"][1].as_f64().unwrap()];

    send(&mut c, tf_json(range, 0.3)).await;
    send(&mut c, json!({"type": "set_iso", "value": 0.5 * (range[0] + range[1])})).await;
    send(&mut c, json!({"type": "set_camera", "pos": [40, 30, 35], "look": [8, 8, 8], "up": [0, 1, 0], "fov": 40})).await;
    let mut last_id = 0;
    for _ in 0..3 {
        let (h, pixels) = frame(&mut c, 40, 30).await;
        let id = h["id"].as_u64().unwrap();
        assert!(id > last_id);
        last_id = id;
        assert_eq!(h["encoding"], "png");
        for key in ["ms", "regions", "samples", "bvhRebuildMs"] {
            assert!(h["stats"][key].is_number(), "{key}: {h}");
        }
        assert!(h["stats"]["samples"].as_u64().unwrap() > 0);
        assert_eq!(pixels.len(), 40 * 30 * 4);
    }
    drop(c);
    server.shutdown().await;
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn transparent_tf_takes_no_samples() {
    let server = Server::start(SessionOptions::default()).await;
    let mut c = server.client().await;
    send(&mut c, tf_json([0.0, 1.0], 0.0)).await;
    let (h, _) = frame(&mut c, 16, 16).await;
    assert_eq!(h["stats"]["samples"], 0);
    assert_eq!(h["stats"]["regions"], 0);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn rebuild_time_is_reported_once() {
    let server = Server::start(SessionOptions::default()).await;
    let mut c = server.client().await;
    let (h, _) = frame(&mut c, 8, 8).await;
    assert_eq!(h["stats"]["bvhRebuildMs"], 0.0);

    send(&mut c, json!({"type": "set_iso", "value": 0.3})).await;
    let (h, _) = frame(&mut c, 8, 8).await;
    assert!(h["stats"]["bvhRebuildMs"].as_f64().unwrap() > 0.0, "{h}");
    let (h, _) = frame(&mut c, 8, 8).await;
    assert_eq!(h["stats"]["bvhRebuildMs"], 0.0);

    // camera and quality edits never rebuild
    send(&mut c, json!({"type": "set_camera", "pos": [30, 20, -10], "look": [8, 8, 8], "up": [0, 1, 0], "fov": 50})).await;
    send(&mut c, json!({"type": "set_params", "rateScale": 2.0, "gradientMode": "central"})).await;
    let (h, _) = frame(&mut c, 8, 8).await;
    assert_eq!(h["stats"]["bvhRebuildMs"], 0.0);

    send(&mut c, tf_json([0.0, 1.0], 0.2)).await;
    let (h, _) = frame(&mut c, 8, 8).await;
    assert!(h["stats"]["bvhRebuildMs"].as_f64().unwrap() > 0.0);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn errors_keep_the_connection_open() {
    let server = Server::start(SessionOptions::default()).await;
    let mut c = server.client().await;
    let (before, before_pixels) = frame(&mut c, 12, 12).await;

    c.send(Message::Text("{not json".into())).await.unwrap();
    let e = recv_json(&mut c).await;
    assert_eq!((e["type"].as_str(), e["code"].as_str()), (Some("error"), Some("bad_json")));

    send(&mut c, json!({"type": "teleport"})).await;
    assert_eq!(recv_json(&mut c).await["code"], "unsupported");

    send(&mut c, json!({"type": "set_tf", "domain": [0, 1], "rgba": [[0, 0, 0, 1]]})).await;
    assert_eq!(recv_json(&mut c).await["code"], "invalid");

    send(&mut c, json!({"type": "set_params", "gradientMode": "sideways"})).await;
    assert_eq!(recv_json(&mut c).await["code"], "invalid");

    send(&mut c, json!({"type": "set_camera", "pos": [0, 0, 0], "look": [0, 0, 0], "up": [0, 1, 0], "fov": 40})).await;
    assert_eq!(recv_json(&mut c).await["code"], "invalid");

    send(&mut c, json!({"type": "request_frame", "width": 0, "height": 5})).await;
    assert_eq!(recv_json(&mut c).await["code"], "invalid");

    // failed edits leave the previous snapshot in place
    let (after, after_pixels) = frame(&mut c, 12, 12).await;
    assert_eq!(after_pixels, before_pixels);
    assert_eq!(after["snapshot"], before["snapshot"]);
    assert!(after["id"].as_u64() > before["id"].as_u64());

    send(&mut c, json!({"type": "hello"})).await;
    assert_eq!(recv_json(&mut c).await["type"], "info");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn frames_never_see_a_half_applied_edit() {
    let server = Server::start(SessionOptions { rebuild_delay: Some(Duration::from_millis(600)) }).await;
    let mut reader = server.client().await;
    let mut writer = server.client().await;

    let (first, old_pixels) = frame(&mut reader, 24, 24).await;
    let old_samples = first["stats"]["samples"].as_u64().unwrap();
    assert!(old_samples > 0);
    let old_version = first["snapshot"].as_u64().unwrap();

    send(&mut writer, tf_json([0.0, 1.0], 0.0)).await;
    send(&mut writer, json!({"type": "request_frame", "width": 24, "height": 24})).await;

    let mut during = 0;
    let mut saw_new = false;
    for _ in 0..400 {
        let (h, pixels) = frame(&mut reader, 24, 24).await;
        let version = h["snapshot"].as_u64().unwrap();
        let samples = h["stats"]["samples"].as_u64().unwrap();
        if version == old_version {
            during += 1;
            assert_eq!(samples, old_samples);
            assert_eq!(pixels, old_pixels);
        } else {
            assert_eq!(samples, 0, "new snapshot must be fully transparent");
            saw_new = true;
            break;
        }
    }
    assert!(saw_new);
    assert!(during > 0, "no frame was rendered while the rebuild ran");

    let h = recv_json(&mut writer).await;
    assert_eq!(h["stats"]["samples"], 0);
    recv_binary(&mut writer).await;
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn rapid_tf_edits_coalesce_to_the_latest() {
    let session = Arc::new(Session::new(scene(), SessionOptions { rebuild_delay: Some(Duration::from_millis(300)) }));
    let tfs: Vec<TransferFunction> =
        (1..=4).map(|i| TransferFunction::constant([0.0, 1.0], [0.5, 0.5, 0.5, i as f32 / 10.0])).collect();
    let first = {
        let (s, tf) = (session.clone(), tfs[0].clone());
        tokio::spawn(async move { s.set_tf(tf).await })
    };
    tokio::time::sleep(Duration::from_millis(50)).await;
    let mut rest = Vec::new();
    for tf in &tfs[1..] {
        let (s, tf) = (session.clone(), tf.clone());
        rest.push(tokio::spawn(async move { s.set_tf(tf).await }));
        tokio::time::sleep(Duration::from_millis(10)).await;
    }
    first.await.unwrap().unwrap();
    for r in rest {
        r.await.unwrap().unwrap();
    }
    let snap = session.snapshot();
    assert_eq!(*snap.scene.tf, tfs[3]);
    // the first edit plus one coalesced rebuild for the three queued ones
    assert_eq!(snap.rebuild_seq, 2);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn iso_edit_keeps_the_volume_hierarchy() {
    let session = Session::new(scene(), SessionOptions::default());
    let before = session.snapshot();
    session.set_iso(Some(0.4)).await.unwrap();
    let after = session.snapshot();
    assert!(Arc::ptr_eq(&before.scene.volume_bvh, &after.scene.volume_bvh));
    assert!(after.scene.iso.is_some());
    session.set_tf(TransferFunction::cool_warm([0.0, 1.0], 0.1)).await.unwrap();
    let tf_edit = session.snapshot();
    assert!(!Arc::ptr_eq(&after.scene.volume_bvh, &tf_edit.scene.volume_bvh));
    assert!(Arc::ptr_eq(&after.scene.iso.as_ref().unwrap().bvh, &tf_edit.scene.iso.as_ref().unwrap().bvh));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn health_reports_scene_info() {
    let server = Server::start(SessionOptions::default()).await;
    let mut tcp = TcpStream::connect(server.addr).await.unwrap();
    tcp.write_all(b"GET /health HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n").await.unwrap();
    let mut raw = String::new();
    tcp.read_to_string(&mut raw).await.unwrap();
    assert!(raw.starts_with("HTTP/1.1 200"), "{raw}");
    let body = raw.split("\r\n\r\n").nth(1).unwrap();
    let v: Value = serde_json::from_str(body).unwrap();
    assert_eq!(v["service"], "amrvol");
    assert_eq!(v["fields"], json!(["gaussian"]));
    assert!(v["stats"]["cells"].as_u64().unwrap() > 0);
    server.shutdown().await;
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn second_bind_on_same_port_fails() {
    let server = Server::start(SessionOptions::default()).await;
    match bind(server.addr).await {
        Err(ServiceError::Bind { port, .. }) => assert_eq!(port, server.addr.port()),
        other => panic!("expected a bind error, got {other:?}"),
    }
}
