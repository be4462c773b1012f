use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{DefaultBodyLimit, Multipart, Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures_util::{SinkExt, StreamExt};
use interplay_core::calibration::{CalibrationSet, Frame};
use interplay_core::session::{CompletionPolicy, Decision, Event, Session, DEFAULT_TURN_ORDER};
use interplay_core::stroke::{PlayerChannel, Sketch, DEFAULT_CANVAS_MM};
use interplay_core::vision::{extract_new_strokes, render_overlay_png, Raster};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::broadcast::error::RecvError;

use crate::error::{ApiError, ApiResult};
use crate::state::{session_view, AppState};

type AppRef = State<Arc<AppState>>;

const MAX_UPLOAD_BYTES: usize = 64 * 1024 * 1024;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/calibration", post(calibrate))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/strokes", post(submit_strokes))
        .route("/sessions/{id}/complete", post(request_completion))
        .route("/sessions/{id}/resolve", post(resolve))
        .route("/sessions/{id}/consensus", post(consensus))
        .route("/sessions/{id}/stats", get(stats))
        .route("/sessions/{id}/suggestion.png", get(suggestion_png))
        .route("/sessions/{id}/capture", post(capture))
        .route("/sessions/{id}/events", get(events))
        .layer(DefaultBodyLimit::max(MAX_UPLOAD_BYTES))
        .with_state(state)
}

fn parse<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body)
        .map_err(|e| ApiError::bad_request(format!("invalid JSON body: {e}")))
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateRequest {
    id: Option<String>,
    theme: Option<Sketch>,
    canvas_size: Option<(f64, f64)>,
    turn_order: Option<Vec<PlayerChannel>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StrokesRequest {
    player: PlayerChannel,
    sketch: Sketch,
}

fn default_amount() -> usize {
    1
}

fn default_temperature() -> f64 {
    0.4
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CompleteRequest {
    policy: CompletionPolicy,
    #[serde(default = "default_amount")]
    amount: usize,
    #[serde(default = "default_temperature")]
    temperature: f64,
    #[serde(default)]
    seed: u64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConsensusRequest {
    player: PlayerChannel,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CalibrationRequest {
    sets: Vec<CalibrationSet>,
}

#[derive(Deserialize)]
struct SuggestionQuery {
    /// Round of a resolved suggestion; the pending one when absent.
    round: Option<usize>,
}

async fn healthz(State(app): AppRef) -> Json<Value> {
    let calibrated = app.calibration.read().expect("calibration lock").is_some();
    Json(json!({
        "status": "ok",
        "checkpoint_id": app.model.id,
        "sessions": app.session_count(),
        "calibrated": calibrated,
    }))
}

async fn create_session(State(app): AppRef, body: Bytes) -> ApiResult<Response> {
    let req: CreateRequest = if body.is_empty() {
        CreateRequest::default()
    } else {
        parse(&body)?
    };
    let canvas = req
        .canvas_size
        .or(req.theme.as_ref().map(|t| t.canvas_size))
        .unwrap_or(DEFAULT_CANVAS_MM);
    let theme = req.theme.unwrap_or_else(|| Sketch::empty(canvas));
    let id = req.id.unwrap_or_else(|| uuid::Uuid::new_v4().to_string());
    let order = req
        .turn_order
        .unwrap_or_else(|| DEFAULT_TURN_ORDER.to_vec());
    let session = Session::create(id, canvas, order, theme)?;
    let location = format!("/sessions/{}", session.id);
    let view = app.insert(session)?;
    tracing::info!(%location, "session created");
    Ok((
        StatusCode::CREATED,
        [(header::LOCATION, location)],
        Json(view),
    )
        .into_response())
}

async fn get_session(State(app): AppRef, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let slot = app.slot(&id)?;
    let s = slot.session.lock().await;
    Ok(Json(session_view(&s)))
}

async fn submit_strokes(
    State(app): AppRef,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<Value>> {
    let req: StrokesRequest = parse(&body)?;
    let (view, _) = app
        .mutate(&id, |s| s.submit_strokes(req.player, req.sketch).cloned())
        .await?;
    Ok(Json(view))
}

async fn request_completion(
    State(app): AppRef,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<Value>> {
    let req: CompleteRequest = parse(&body)?;
    let model = &app.model;
    let (_, entry) = app
        .mutate(&id, |s| {
            s.request_completion(req.policy, req.amount, req.temperature, req.seed, model)
                .cloned()
        })
        .await?;
    let Event::CompletionRequested(pending) = entry.event else {
        return Err(ApiError::internal(
            "completion produced an unexpected event",
        ));
    };
    Ok(Json(
        serde_json::to_value(&*pending).expect("suggestion serializes"),
    ))
}

async fn resolve(
    State(app): AppRef,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<Value>> {
    let decision: Decision = parse(&body)?;
    let (view, _) = app
        .mutate(&id, |s| s.resolve_suggestion(decision).cloned())
        .await?;
    Ok(Json(view))
}

async fn consensus(
    State(app): AppRef,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<Value>> {
    let req: ConsensusRequest = parse(&body)?;
    let (view, _) = app
        .mutate(&id, |s| s.signal_consensus(req.player).cloned())
        .await?;
    Ok(Json(view))
}

async fn stats(State(app): AppRef, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let slot = app.slot(&id)?;
    let s = slot.session.lock().await;
    Ok(Json(json!(s.contribution_stats())))
}

async fn suggestion_png(
    State(app): AppRef,
    Path(id): Path<String>,
    Query(q): Query<SuggestionQuery>,
) -> ApiResult<Response> {
    let sketch = {
        let slot = app.slot(&id)?;
        let s = slot.session.lock().await;
        match q.round {
            None => s
                .pending
                .as_ref()
                .map(|p| p.sketch.clone())
                .ok_or_else(|| {
                    ApiError::new(
                        StatusCode::NOT_FOUND,
                        "no_suggestion",
                        "no suggestion is pending",
                    )
                })?,
            Some(r) => s
                .rounds
                .get(r)
                .and_then(|round| round.suggestion.as_ref())
                .map(|rec| rec.pending.sketch.clone())
                .ok_or_else(|| {
                    ApiError::new(
                        StatusCode::NOT_FOUND,
                        "no_suggestion",
                        format!("round {r} has no suggestion"),
                    )
                })?,
        }
    };
    let to_projector = {
        let calib = app.calibration.read().expect("calibration lock");
        let calib = calib.as_ref().ok_or_else(calibration_missing)?;
        calib.map_between(Frame::Canvas, Frame::Projector)?
    };
    let (w, h) = app.config.projector_size;
    let png = render_overlay_png(
        &sketch,
        &to_projector,
        w,
        h,
        app.config.overlay_width_px,
        PlayerChannel::Blue.rgb(),
    )?;
    Ok(([(header::CONTENT_TYPE, "image/png")], png).into_response())
}

fn calibration_missing() -> ApiError {
    ApiError::new(
        StatusCode::CONFLICT,
        "calibration_missing",
        "no calibration is loaded; POST /calibration first",
    )
}

/// Multipart fields: `image` (PNG, required), `player` (channel whose strokes
/// to submit) and `submit` (`true` to submit them as the player's turn).
async fn capture(
    State(app): AppRef,
    Path(id): Path<String>,
    mut form: Multipart,
) -> ApiResult<Json<Value>> {
    let (mut image, mut player, mut submit) = (None, None, false);
    while let Some(field) = form
        .next_field()
        .await
        .map_err(|e| ApiError::bad_request(format!("multipart: {e}")))?
    {
        let name = field.name().unwrap_or_default().to_string();
        let data = field
            .bytes()
            .await
            .map_err(|e| ApiError::bad_request(format!("multipart field {name}: {e}")))?;
        let text = || String::from_utf8_lossy(&data).trim().to_string();
        match name.as_str() {
            "image" => image = Some(data.clone()),
            "player" => {
                player = Some(
                    text()
                        .parse::<PlayerChannel>()
                        .map_err(|e| ApiError::bad_request(e.to_string()))?,
                )
            }
            "submit" => submit = matches!(text().as_str(), "true" | "1" | "yes"),
            other => return Err(ApiError::bad_request(format!("unexpected field {other:?}"))),
        }
    }
    let image = image.ok_or_else(|| ApiError::bad_request("missing field \"image\""))?;
    let raster = Raster::from_png_bytes(&image)?;
    let px_to_mm = {
        let calib = app.calibration.read().expect("calibration lock");
        let calib = calib.as_ref().ok_or_else(calibration_missing)?;
        calib.map_between(Frame::Camera, Frame::Canvas)?
    };
    let prev = {
        let slot = app.slot(&id)?;
        let s = slot.session.lock().await;
        s.sketch()
    };
    let palette = app.config.palette.clone();
    let found = extract_new_strokes(&prev, &raster, &palette, &px_to_mm)?;

    if !submit {
        return Ok(Json(
            json!({ "strokes": found, "submitted": 0, "ignored": 0 }),
        ));
    }
    let player = player.ok_or_else(|| ApiError::bad_request("submit needs a \"player\" field"))?;
    let (mine, other): (Vec<_>, Vec<_>) = found
        .strokes
        .iter()
        .cloned()
        .partition(|s| s.channel == player);
    let sketch = Sketch::new(found.canvas_size, mine);
    let submitted = sketch.strokes.len();
    let (view, _) = app
        .mutate(&id, |s| s.submit_strokes(player, sketch).cloned())
        .await?;
    Ok(Json(json!({
        "strokes": found,
        "submitted": submitted,
        "ignored": other.len(),
        "session": view,
    })))
}

async fn calibrate(State(app): AppRef, body: Bytes) -> ApiResult<Json<Value>> {
    let req: CalibrationRequest = parse(&body)?;
    if req.sets.is_empty() {
        return Err(ApiError::bad_request("no correspondence sets"));
    }
    let mut next = app
        .calibration
        .read()
        .expect("calibration lock")
        .clone()
        .unwrap_or_default();
    next.solve(&req.sets)?;
    let text = next.to_json();
    if let Some(path) = &app.config.calibration {
        std::fs::write(path, &text)
            .map_err(|e| ApiError::internal(format!("writing {}: {e}", path.display())))?;
    }
    *app.calibration.write().expect("calibration lock") = Some(next);
    Ok(Json(serde_json::from_str(&text).expect("calibration JSON")))
}

async fn events(
    State(app): AppRef,
    Path(id): Path<String>,
    ws: WebSocketUpgrade,
) -> ApiResult<Response> {
    let slot = app.slot(&id)?;
    Ok(ws.on_upgrade(move |socket| async move {
        // subscribe under the session lock so the snapshot and the stream
        // neither overlap nor leave a gap
        let (snapshot, mut rx) = {
            let s = slot.session.lock().await;
            let rx = slot.events.subscribe();
            let snap = json!({ "event": "snapshot", "round": s.rounds.len(), "payload": session_view(&s) });
            (snap, rx)
        };
        stream_events(socket, snapshot, &mut rx).await;
    }))
}

async fn stream_events(
    socket: WebSocket,
    snapshot: Value,
    rx: &mut tokio::sync::broadcast::Receiver<Value>,
) {
    let (mut tx, mut incoming) = socket.split();
    if tx
        .send(Message::Text(snapshot.to_string().into()))
        .await
        .is_err()
    {
        return;
    }
    loop {
        tokio::select! {
            msg = rx.recv() => match msg {
                Ok(v) => {
                    if tx.send(Message::Text(v.to_string().into())).await.is_err() {
                        return;
                    }
                }
                Err(RecvError::Lagged(n)) => {
                    let warn = json!({ "event": "lagged", "round": null, "payload": { "missed": n } });
                    if tx.send(Message::Text(warn.to_string().into())).await.is_err() {
                        return;
                    }
                }
                Err(RecvError::Closed) => return,
            },
            inbound = incoming.next() => match inbound {
                None | Some(Err(_)) | Some(Ok(Message::Close(_))) => return,
                Some(Ok(_)) => {}
            },
        }
    }
}
