#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::{Body, Bytes};
use axum::http::{header, Method, Request, StatusCode};
use http_body_util::BodyExt;
use interplay::{router, AppState, ServiceConfig};
use interplay_core::sketcher::{Checkpoint, ModelParams, SketcherConfig};
use interplay_core::stroke::{PlayerChannel, Point, Sketch, Stroke};
use serde_json::{json, Value};
use tower::ServiceExt;

pub const CANVAS: (f64, f64) = (400.0, 300.0);

/// A small untrained checkpoint; completions only need to be deterministic.
pub fn tiny_checkpoint(dir: &Path) -> PathBuf {
    let cfg = SketcherConfig {
        hidden_size: 8,
        num_mixtures: 2,
        seed: 11,
        ..SketcherConfig::default()
    };
    let path = dir.join("tiny.iskt");
    Checkpoint::new(cfg, 1.0, ModelParams::init(8, 2, 11))
        .save(&path)
        .unwrap();
    path
}

pub fn config(dir: &Path) -> ServiceConfig {
    ServiceConfig {
        checkpoint: tiny_checkpoint(dir),
        data_dir: dir.join("data"),
        calibration: Some(dir.join("calibration.json")),
        projector_size: (320, 240),
        ..ServiceConfig::default()
    }
}

pub fn open(cfg: &ServiceConfig) -> Arc<AppState> {
    AppState::open(cfg.clone()).unwrap()
}

pub struct Reply {
    pub status: StatusCode,
    pub content_type: Option<String>,
    pub bytes: Bytes,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_slice(&self.bytes)
            .unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&self.bytes)))
    }

    /// Asserts the status and returns the JSON body.
    pub fn expect(&self, status: StatusCode) -> Value {
        assert_eq!(
            self.status,
            status,
            "{}",
            String::from_utf8_lossy(&self.bytes)
        );
        self.json()
    }
}

pub async fn send(app: &Arc<AppState>, req: Request<Body>) -> Reply {
    let res = router(app.clone()).oneshot(req).await.unwrap();
    let status = res.status();
    let content_type = res
        .headers()
        .get(header::CONTENT_TYPE)
        .map(|v| v.to_str().unwrap().to_string());
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    Reply {
        status,
        content_type,
        bytes,
    }
}

pub async fn call(app: &Arc<AppState>, method: Method, uri: &str, body: Option<Value>) -> Reply {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(v) => req
            .header(header::CONTENT_TYPE, "application/json")
            .body(Body::from(v.to_string())),
        None => req.body(Body::empty()),
    };
    send(app, req.unwrap()).await
}

pub async fn get(app: &Arc<AppState>, uri: &str) -> Reply {
    call(app, Method::GET, uri, None).await
}

pub async fn post(app: &Arc<AppState>, uri: &str, body: Value) -> Reply {
    call(app, Method::POST, uri, Some(body)).await
}

pub fn line(ch: PlayerChannel, a: (f64, f64), b: (f64, f64)) -> Sketch {
    Sketch::new(
        CANVAS,
        vec![Stroke::new(
            ch,
            vec![Point::new(a.0, a.1), Point::new(b.0, b.1)],
        )],
    )
}

pub fn theme() -> Sketch {
    Sketch::new(
        CANVAS,
        vec![Stroke::new(
            PlayerChannel::Black,
            vec![
                Point::new(100.0, 100.0),
                Point::new(300.0, 100.0),
                Point::new(300.0, 200.0),
            ],
        )],
    )
}

pub async fn create(app: &Arc<AppState>, id: &str) -> Value {
    post(app, "/sessions", json!({ "id": id, "theme": theme() }))
        .await
        .expect(StatusCode::CREATED)
}

pub async fn strokes(app: &Arc<AppState>, id: &str, sketch: &Sketch) -> Reply {
    let player = sketch.strokes[0].channel;
    post(
        app,
        &format!("/sessions/{id}/strokes"),
        json!({ "player": player, "sketch": sketch }),
    )
    .await
}

/// Theme, red, green, machine (emitter, accepted), red, green, machine
/// (receptor, rejected), then both painters end the game. Returns the two
/// suggestion payloads.
pub async fn scripted_game(app: &Arc<AppState>, id: &str) -> (Value, Value) {
    use PlayerChannel::*;
    create(app, id).await;
    strokes(app, id, &line(Red, (50.0, 50.0), (80.0, 90.0)))
        .await
        .expect(StatusCode::OK);
    strokes(app, id, &line(Green, (200.0, 250.0), (260.0, 250.0)))
        .await
        .expect(StatusCode::OK);
    let first = post(
        app,
        &format!("/sessions/{id}/complete"),
        json!({ "policy": "emitter", "amount": 1, "temperature": 0.5, "seed": 3 }),
    )
    .await
    .expect(StatusCode::OK);
    post(
        app,
        &format!("/sessions/{id}/resolve"),
        json!({ "decision": "accept" }),
    )
    .await
    .expect(StatusCode::OK);
    strokes(app, id, &line(Red, (10.0, 280.0), (40.0, 200.0)))
        .await
        .expect(StatusCode::OK);
    strokes(app, id, &line(Green, (350.0, 20.0), (390.0, 60.0)))
        .await
        .expect(StatusCode::OK);
    let second = post(
        app,
        &format!("/sessions/{id}/complete"),
        json!({ "policy": "receptor", "amount": 2, "temperature": 0.5, "seed": 4 }),
    )
    .await
    .expect(StatusCode::OK);
    post(
        app,
        &format!("/sessions/{id}/resolve"),
        json!({ "decision": "reject" }),
    )
    .await
    .expect(StatusCode::OK);
    for player in [Red, Green] {
        post(
            app,
            &format!("/sessions/{id}/consensus"),
            json!({ "player": player }),
        )
        .await
        .expect(StatusCode::OK);
    }
    (first, second)
}

pub fn bin() -> std::process::Command {
    std::process::Command::new(env!("CARGO_BIN_EXE_interplay"))
}
