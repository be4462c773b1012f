mod common;

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::Path;
use std::process::{Output, Stdio};

use common::*;
use interplay_core::calibration::{CalibrationSet, Frame, Homography};
use interplay_core::stroke::{hausdorff, PlayerChannel, Point, Sketch, Stroke};
use interplay_core::vision::render_sketch;
use serde_json::{json, Value};

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Slightly jittered squares in QuickDraw NDJSON.
fn squares_ndjson(n: usize) -> String {
    (0..n)
        .map(|i| {
            let (x, y, s) = (10 + i % 7, 20 + (i * 3) % 11, 40 + (i * 5) % 30);
            format!(
                "{{\"word\":\"square\",\"drawing\":[[[{x},{},{},{x},{x}],[{y},{y},{},{},{y}]]]}}\n",
                x + s,
                x + s,
                y + s,
                y + s
            )
        })
        .collect()
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = run(&["complete", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("--bogus") && err.contains("Usage"), "{err}");
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn operation_failure_exits_one_with_message() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.jsonl");
    let out = run(&["replay", "--journal", p(&missing)]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.starts_with("error:") && err.contains("nope.jsonl"),
        "{err}"
    );
    assert!(out.stdout.is_empty());
}

#[test]
fn complete_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = tiny_checkpoint(dir.path());
    let input = dir.path().join("s.json");
    let mut sketch = theme();
    sketch.extend(&line(PlayerChannel::Red, (50.0, 50.0), (80.0, 90.0)));
    std::fs::write(&input, sketch.to_json()).unwrap();

    let complete = |tag: &str, tau: &str, seed: &str| {
        let out = dir.path().join(format!("{tag}.json"));
        let svg = dir.path().join(format!("{tag}.svg"));
        ok(&[
            "complete",
            "--in",
            p(&input),
            "--checkpoint",
            p(&ckpt),
            "--amount",
            "1",
            "--temperature",
            tau,
            "--seed",
            seed,
            "--out",
            p(&out),
            "--svg",
            p(&svg),
        ]);
        (
            std::fs::read(out).unwrap(),
            std::fs::read_to_string(svg).unwrap(),
        )
    };
    let a = complete("a", "0", "1");
    let b = complete("b", "0", "1");
    assert_eq!(a, b);
    // greedy decoding ignores the seed, which is only recorded
    let strip = |bytes: &[u8]| {
        let v: Value = serde_json::from_slice(bytes).unwrap();
        (v["suggestion"]["rows"].clone(), v["sketch"].clone())
    };
    assert_eq!(strip(&complete("c", "0", "99").0), strip(&a.0));
    assert_eq!(complete("d", "0.7", "5"), complete("e", "0.7", "5"));
    assert!(a.1.contains("<svg"));

    let c: Value = serde_json::from_slice(&a.0).unwrap();
    assert_eq!(c["suggestion"]["policy_used"], "receptor");
    let s: Sketch = serde_json::from_value(c["sketch"].clone()).unwrap();
    assert!(s.strokes.iter().all(|st| st.channel == PlayerChannel::Blue));

    // red-only input leaves the emitter nothing
    let red = dir.path().join("red.json");
    std::fs::write(
        &red,
        line(PlayerChannel::Red, (5.0, 5.0), (9.0, 9.0)).to_json(),
    )
    .unwrap();
    let out = run(&[
        "complete",
        "--in",
        p(&red),
        "--checkpoint",
        p(&ckpt),
        "--policy",
        "emitter",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("receptor"));
}

fn correspondence_file(dir: &Path) -> std::path::PathBuf {
    // camera at 2 px/mm with a small offset
    let truth = Homography::new([2.0, 0.0, 10.0, 0.0, 2.0, 6.0, 0.0, 0.0, 1.0]).unwrap();
    let pts = [
        (0.0, 0.0),
        (400.0, 0.0),
        (400.0, 300.0),
        (0.0, 300.0),
        (200.0, 100.0),
        (90.0, 210.0),
    ];
    let set = CalibrationSet::new(
        Frame::Canvas,
        Frame::Camera,
        pts.iter()
            .map(|&(x, y)| {
                let q = Point::new(x, y);
                (q, truth.map_point(q).unwrap())
            })
            .collect(),
    );
    let path = dir.join("corr.json");
    std::fs::write(&path, json!({ "sets": [set] }).to_string()).unwrap();
    path
}

#[test]
fn calibrate_then_vectorize_recovers_a_render() {
    let dir = tempfile::tempdir().unwrap();
    let calib = dir.path().join("calib.json");
    ok(&[
        "calibrate",
        "--in",
        p(&correspondence_file(dir.path())),
        "--out",
        p(&calib),
    ]);
    let stored: Value = serde_json::from_str(&std::fs::read_to_string(&calib).unwrap()).unwrap();
    assert_eq!(stored["frames"], json!([["canvas", "camera"]]));
    let m: Vec<f64> = serde_json::from_value(stored["matrices"][0].clone()).unwrap();
    for (a, b) in m.iter().zip([2.0, 0.0, 10.0, 0.0, 2.0, 6.0, 0.0, 0.0, 1.0]) {
        assert!((a - b).abs() <= 1e-6, "{m:?}");
    }

    let truth = Sketch::new(
        CANVAS,
        vec![
            Stroke::new(
                PlayerChannel::Black,
                vec![
                    Point::new(30.0, 40.0),
                    Point::new(150.0, 60.0),
                    Point::new(170.0, 120.0),
                ],
            ),
            Stroke::new(
                PlayerChannel::Green,
                vec![Point::new(250.0, 200.0), Point::new(360.0, 260.0)],
            ),
            Stroke::new(
                PlayerChannel::Blue,
                vec![Point::new(60.0, 250.0), Point::new(120.0, 180.0)],
            ),
        ],
    );
    let to_px = Homography::new([2.0, 0.0, 10.0, 0.0, 2.0, 6.0, 0.0, 0.0, 1.0]).unwrap();
    let capture = dir.path().join("capture.png");
    render_sketch(&truth, &to_px, 830, 620, 3.0)
        .unwrap()
        .save_png(&capture)
        .unwrap();

    let out = dir.path().join("v.json");
    let debug = dir.path().join("debug");
    ok(&[
        "vectorize",
        "--in",
        p(&capture),
        "--calib",
        p(&calib),
        "--canvas",
        "400x300",
        "--out",
        p(&out),
        "--debug-dir",
        p(&debug),
    ]);
    assert!(debug.join("corrected.png").exists());
    let got = Sketch::from_json(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(got.canvas_size, CANVAS);
    assert_eq!(got.strokes.len(), truth.strokes.len());
    for t in &truth.strokes {
        let (best, d) = got
            .strokes
            .iter()
            .map(|g| (g, hausdorff(&g.points, &t.points, 0.25)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        assert_eq!(best.channel, t.channel);
        // 2 px at 2 px/mm
        assert!(d <= 1.0, "{d}");
    }

    let out = run(&["vectorize", "--in", p(&capture), "--canvas", "4x"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn ingest_train_finetune_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let nd = dir.path().join("squares.ndjson");
    std::fs::write(&nd, squares_ndjson(20)).unwrap();
    let data = dir.path().join("ds");
    let manifest: Value = serde_json::from_str(&ok(&[
        "ingest",
        "--ndjson",
        p(&nd),
        "--out",
        p(&data),
        "--seed",
        "3",
    ]))
    .unwrap();
    assert_eq!(manifest["count"], 20);
    assert!(data.join("manifest.json").exists());

    let train = |tag: &str| {
        let ckpt = dir.path().join(format!("{tag}.iskt"));
        let csv = dir.path().join(format!("{tag}.csv"));
        let summary = ok(&[
            "train",
            "--data",
            p(&data),
            "--out",
            p(&ckpt),
            "--epochs",
            "2",
            "--hidden",
            "8",
            "--mixtures",
            "2",
            "--batch-size",
            "4",
            "--seed",
            "5",
            "--loss-csv",
            p(&csv),
        ]);
        (
            std::fs::read(&ckpt).unwrap(),
            std::fs::read_to_string(csv).unwrap(),
            summary,
            ckpt,
        )
    };
    let (a, csv, summary, ckpt) = train("a");
    let (b, csv_b, _, _) = train("b");
    assert_eq!(a, b);
    assert_eq!(csv, csv_b);
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.starts_with("epoch,train_nll,val_nll"));
    let s: Value = serde_json::from_str(&summary).unwrap();
    assert_eq!(s["epochs"], 2);

    // straight from NDJSON too
    let direct = dir.path().join("direct.iskt");
    ok(&[
        "train",
        "--data",
        p(&nd),
        "--out",
        p(&direct),
        "--epochs",
        "1",
        "--hidden",
        "4",
        "--mixtures",
        "1",
    ]);

    let tuned = dir.path().join("tuned.iskt");
    let out: Value = serde_json::from_str(&ok(&[
        "finetune",
        "--checkpoint",
        p(&ckpt),
        "--data",
        p(&data),
        "--out",
        p(&tuned),
        "--epochs",
        "1",
    ]))
    .unwrap();
    assert_eq!(out["epochs"], 1);
    assert_ne!(std::fs::read(&tuned).unwrap(), a);

    let bad = run(&[
        "train",
        "--data",
        p(&data),
        "--out",
        p(&tuned),
        "--hidden",
        "0",
    ]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn ingest_from_captures() {
    let dir = tempfile::tempdir().unwrap();
    let shots = dir.path().join("shots");
    std::fs::create_dir(&shots).unwrap();
    for i in 0..4 {
        let k = i as f64 * 20.0;
        let sketch = Sketch::new(
            CANVAS,
            vec![
                Stroke::new(
                    PlayerChannel::Red,
                    vec![Point::new(40.0 + k, 40.0), Point::new(200.0, 90.0 + k)],
                ),
                Stroke::new(
                    PlayerChannel::Green,
                    vec![Point::new(60.0, 200.0), Point::new(300.0 - k, 260.0)],
                ),
            ],
        );
        render_sketch(&sketch, &Homography::IDENTITY, 400, 300, 3.0)
            .unwrap()
            .save_png(shots.join(format!("shot{i}.png")))
            .unwrap();
    }
    let out = dir.path().join("ds");
    let sketches = dir.path().join("recovered.json");
    let manifest: Value = serde_json::from_str(&ok(&[
        "ingest",
        "--captures",
        p(&shots),
        "--out",
        p(&out),
        "--sketches-out",
        p(&sketches),
    ]))
    .unwrap();
    assert_eq!(manifest["count"], 4);
    let recovered: Vec<Sketch> =
        serde_json::from_str(&std::fs::read_to_string(sketches).unwrap()).unwrap();
    assert!(recovered.iter().all(|s| s.strokes.len() == 2));

    assert_eq!(run(&["ingest", "--out", p(&out)]).status.code(), Some(2));
}

#[test]
fn marker_pattern_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let png = dir.path().join("markers.png");
    let pts = dir.path().join("points.json");
    ok(&[
        "markers",
        "--count",
        "12",
        "--projector",
        "640x360",
        "--out",
        p(&png),
        "--points",
        p(&pts),
    ]);
    let placed: Vec<Point> = serde_json::from_str(&std::fs::read_to_string(&pts).unwrap()).unwrap();
    let found: Vec<Point> =
        serde_json::from_str(&ok(&["markers", "--detect", p(&png), "--min-area", "4"])).unwrap();
    assert_eq!(placed.len(), 12);
    assert_eq!(found.len(), 12);
    for q in &placed {
        assert!(found.iter().any(|f| f.distance(q) <= 0.5));
    }
    assert_eq!(
        run(&["markers", "--count", "3", "--out", p(&png)])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn replay_matches_the_live_service() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path());
    let rt = tokio::runtime::Runtime::new().unwrap();
    let app = open(&cfg);
    let live = rt.block_on(async {
        scripted_game(&app, "r").await;
        get(&app, "/sessions/r").await.json()
    });
    let journal = cfg.sessions_dir().join("r.jsonl");
    let replayed: Value = serde_json::from_str(&ok(&["replay", "--journal", p(&journal)])).unwrap();
    assert_eq!(replayed, live);
    assert_eq!(replayed["status"], "closed");
}

#[test]
fn serve_answers_until_killed() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = tiny_checkpoint(dir.path());
    let data = dir.path().join("data");
    let mut child = bin()
        .args([
            "serve",
            "--listen",
            "127.0.0.1:0",
            "--checkpoint",
            p(&ckpt),
            "--data-dir",
            p(&data),
        ])
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut first = String::new();
    BufReader::new(child.stdout.take().unwrap())
        .read_line(&mut first)
        .unwrap();
    let addr = first
        .trim()
        .strip_prefix("listening on ")
        .expect(&first)
        .to_string();

    let mut conn = TcpStream::connect(&addr).unwrap();
    write!(
        conn,
        "GET /healthz HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n\r\n"
    )
    .unwrap();
    let mut reply = String::new();
    conn.read_to_string(&mut reply).unwrap();
    child.kill().unwrap();
    child.wait().unwrap();
    assert!(reply.starts_with("HTTP/1.1 200"), "{reply}");
    assert!(reply.contains("\"status\":\"ok\""));
    assert!(data.join("sessions").is_dir());

    // startup errors are fatal
    let missing = dir.path().join("missing.iskt");
    let out = run(&[
        "serve",
        "--listen",
        "127.0.0.1:0",
        "--checkpoint",
        p(&missing),
        "--data-dir",
        p(&data),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.iskt"));

    let busy = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let taken = busy.local_addr().unwrap().to_string();
    let out = run(&[
        "serve",
        "--listen",
        &taken,
        "--checkpoint",
        p(&ckpt),
        "--data-dir",
        p(&data),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("binding"));
}
