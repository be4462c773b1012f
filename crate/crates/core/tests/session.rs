use std::collections::BTreeMap;

use interplay_core::session::{
    parse_journal, replay, to_jsonl, CompletionPolicy, Decision, Event, Session, SessionError,
    StrokeRef, DEFAULT_TURN_ORDER,
};
use interplay_core::sketcher::{Checkpoint, LoadedModel, ModelParams, SketcherConfig};
use interplay_core::stroke::{PlayerChannel, Point, Sketch, Stroke};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CANVAS: (f64, f64) = (400.0, 300.0);

fn model() -> LoadedModel {
    let cfg = SketcherConfig {
        hidden_size: 8,
        num_mixtures: 2,
        ..SketcherConfig::default()
    };
    LoadedModel::new(Checkpoint::new(cfg, 1.0, ModelParams::init(8, 2, 11)))
}

fn random_sketch(rng: &mut ChaCha8Rng, channel: PlayerChannel) -> Sketch {
    let strokes = (0..rng.random_range(1..4))
        .map(|_| {
            let pts: Vec<Point> = (0..rng.random_range(1..6))
                .map(|_| {
                    Point::new(
                        rng.random_range(0.0..CANVAS.0),
                        rng.random_range(0.0..CANVAS.1),
                    )
                })
                .collect();
            Stroke::merged(channel, pts)
        })
        .collect();
    Sketch::new(CANVAS, strokes)
}

fn theme(rng: &mut ChaCha8Rng) -> Sketch {
    if rng.random_bool(0.3) {
        Sketch::empty(CANVAS)
    } else {
        random_sketch(rng, PlayerChannel::Black)
    }
}

fn random_order(rng: &mut ChaCha8Rng) -> Vec<PlayerChannel> {
    let mut order = DEFAULT_TURN_ORDER.to_vec();
    let i = rng.random_range(0..3);
    order.swap(0, i);
    order
}

/// Checks the recorded context of the pending suggestion against the
/// policy it was requested with.
fn assert_context_follows_policy(s: &Session) {
    let p = s.pending.as_ref().expect("pending suggestion");
    let all: Vec<StrokeRef> = s.all_strokes().into_iter().map(|(r, _)| r).collect();
    match p.policy {
        CompletionPolicy::Emitter => {
            assert!(p
                .context
                .iter()
                .all(|r| !matches!(r.channel, PlayerChannel::Red | PlayerChannel::Green)));
            let expected: Vec<StrokeRef> = all
                .into_iter()
                .filter(|r| matches!(r.channel, PlayerChannel::Blue | PlayerChannel::Black))
                .collect();
            assert_eq!(p.context, expected);
        }
        CompletionPolicy::Receptor => assert_eq!(p.context, all),
        CompletionPolicy::Custom(_) => {}
    }
    assert!(p
        .sketch
        .strokes
        .iter()
        .all(|st| st.channel == PlayerChannel::Blue));
}

/// Plays a random valid game, occasionally trying invalid moves that must
/// be rejected without changing the state.
fn random_game(seed: u64, model: &LoadedModel) -> Session {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = theme(&mut rng);
    let mut s = Session::create(format!("g{seed}"), CANVAS, random_order(&mut rng), t).unwrap();
    for _ in 0..rng.random_range(0..12) {
        if s.status == interplay_core::session::Status::Closed {
            break;
        }
        if rng.random_bool(0.15) {
            let before = s.clone();
            let wrong = match s.next_player() {
                PlayerChannel::Red => PlayerChannel::Green,
                _ => PlayerChannel::Red,
            };
            let sketch = random_sketch(&mut rng, wrong);
            let err = s.submit_strokes(wrong, sketch).unwrap_err();
            assert!(
                matches!(
                    err,
                    SessionError::TurnViolation { .. } | SessionError::SuggestionPending
                ),
                "{err}"
            );
            assert_eq!(s, before);
        }
        if rng.random_bool(0.1) {
            let voter = if rng.random_bool(0.5) {
                PlayerChannel::Red
            } else {
                PlayerChannel::Green
            };
            s.signal_consensus(voter).unwrap();
            continue;
        }
        match s.next_player() {
            PlayerChannel::Blue => {
                let policy = if rng.random_bool(0.5) {
                    CompletionPolicy::Emitter
                } else {
                    CompletionPolicy::Receptor
                };
                let amount = rng.random_range(1..3);
                let tau = [0.0, 0.5, 1.0][rng.random_range(0..3)];
                let seed = rng.random();
                let res = s.request_completion(policy.clone(), amount, tau, seed, model);
                match res {
                    Ok(_) => {}
                    Err(SessionError::EmptyContext(_)) => {
                        assert_eq!(policy, CompletionPolicy::Emitter);
                        s.request_completion(CompletionPolicy::Receptor, amount, tau, seed, model)
                            .unwrap();
                    }
                    Err(e) => panic!("{e}"),
                }
                assert_context_follows_policy(&s);
                let decision = match rng.random_range(0..3) {
                    0 => Decision::Accept,
                    1 => Decision::Reject,
                    _ => Decision::Modify(random_sketch(&mut rng, PlayerChannel::Blue)),
                };
                s.resolve_suggestion(decision).unwrap();
            }
            player => {
                let sketch = random_sketch(&mut rng, player);
                s.submit_strokes(player, sketch).unwrap();
            }
        }
    }
    s
}

#[test]
fn replay_equals_live_state() {
    let m = model();
    for seed in 0..200 {
        let live = random_game(seed, &m);
        assert_eq!(replay(live.journal()).unwrap(), live, "seed {seed}");
        let text = to_jsonl(live.journal());
        let parsed = parse_journal(&text).unwrap();
        assert_eq!(parsed, live.journal(), "seed {seed}");
        let again = replay(&parsed).unwrap();
        assert_eq!(again, live, "seed {seed}");
        assert_eq!(to_jsonl(again.journal()), text);
    }
}

/// Stroke counts, ink and rounds recomputed from the raw journal events.
fn recount(s: &Session) -> BTreeMap<PlayerChannel, (usize, f64, usize)> {
    let mut out: BTreeMap<PlayerChannel, (usize, f64, usize)> = BTreeMap::new();
    let mut pending: Option<Sketch> = None;
    let add = |out: &mut BTreeMap<_, _>, sketch: &Sketch| {
        for st in &sketch.strokes {
            let e: &mut (usize, f64, usize) = out.entry(st.channel).or_default();
            e.0 += 1;
            e.1 += st
                .points
                .windows(2)
                .map(|w| ((w[1].x - w[0].x).powi(2) + (w[1].y - w[0].y).powi(2)).sqrt())
                .sum::<f64>();
        }
    };
    for entry in s.journal() {
        match &entry.event {
            Event::SessionCreated { theme, .. } => add(&mut out, theme),
            Event::StrokesSubmitted { player, sketch } => {
                add(&mut out, sketch);
                out.entry(*player).or_default().2 += 1;
            }
            Event::CompletionRequested(p) => pending = Some(p.sketch.clone()),
            Event::SuggestionResolved(d) => {
                let suggested = pending.take().unwrap();
                match d {
                    Decision::Accept => add(&mut out, &suggested),
                    Decision::Modify(edit) => add(&mut out, edit),
                    Decision::Reject => {}
                }
                out.entry(PlayerChannel::Blue).or_default().2 += 1;
            }
            Event::ConsensusSignaled { .. } => {}
        }
    }
    out
}

#[test]
fn contribution_stats_match_recount() {
    let m = model();
    for seed in 0..50 {
        let s = random_game(seed, &m);
        let stats = s.contribution_stats();
        let recounted = recount(&s);
        for ch in PlayerChannel::ALL {
            let (n, ink, rounds) = recounted.get(&ch).copied().unwrap_or_default();
            let got = stats[&ch];
            assert_eq!(got.stroke_count, n, "seed {seed} {ch}");
            assert_eq!(got.rounds, rounds, "seed {seed} {ch}");
            assert!(
                (got.ink_length_mm - ink).abs() <= 1e-9 * ink.max(1.0),
                "seed {seed} {ch}"
            );
        }
    }
}

fn scripted_game(m: &LoadedModel) -> Session {
    let theme = Sketch::new(
        CANVAS,
        vec![Stroke::new(
            PlayerChannel::Black,
            vec![
                Point::new(100.0, 100.0),
                Point::new(300.0, 100.0),
                Point::new(300.0, 200.0),
            ],
        )],
    );
    let line = |ch, a: (f64, f64), b: (f64, f64)| {
        Sketch::new(
            CANVAS,
            vec![Stroke::new(
                ch,
                vec![Point::new(a.0, a.1), Point::new(b.0, b.1)],
            )],
        )
    };
    let mut s = Session::create("scripted", CANVAS, DEFAULT_TURN_ORDER.to_vec(), theme).unwrap();
    s.submit_strokes(
        PlayerChannel::Red,
        line(PlayerChannel::Red, (50.0, 50.0), (80.0, 90.0)),
    )
    .unwrap();
    s.submit_strokes(
        PlayerChannel::Green,
        line(PlayerChannel::Green, (200.0, 250.0), (260.0, 250.0)),
    )
    .unwrap();
    s.request_completion(CompletionPolicy::Emitter, 1, 0.5, 3, m)
        .unwrap();
    s.resolve_suggestion(Decision::Accept).unwrap();
    s.submit_strokes(
        PlayerChannel::Red,
        line(PlayerChannel::Red, (10.0, 280.0), (40.0, 200.0)),
    )
    .unwrap();
    s.submit_strokes(
        PlayerChannel::Green,
        line(PlayerChannel::Green, (350.0, 20.0), (390.0, 60.0)),
    )
    .unwrap();
    s.request_completion(CompletionPolicy::Receptor, 2, 0.5, 4, m)
        .unwrap();
    s.resolve_suggestion(Decision::Reject).unwrap();
    s.signal_consensus(PlayerChannel::Red).unwrap();
    s.signal_consensus(PlayerChannel::Green).unwrap();
    s
}

#[test]
fn scripted_game_closes_with_expected_stats() {
    let m = model();
    let mut s = scripted_game(&m);
    assert_eq!(s.status, interplay_core::session::Status::Closed);
    assert_eq!(s.rounds.len(), 6);
    let stats = s.contribution_stats();
    assert_eq!(stats[&PlayerChannel::Red].stroke_count, 2);
    assert_eq!(stats[&PlayerChannel::Green].stroke_count, 2);
    assert_eq!(stats[&PlayerChannel::Black].stroke_count, 1);
    assert_eq!(stats[&PlayerChannel::Red].rounds, 2);
    assert_eq!(stats[&PlayerChannel::Blue].rounds, 2);
    assert_eq!(stats[&PlayerChannel::Black].ink_length_mm, 300.0);
    assert_eq!(
        stats[&PlayerChannel::Red].ink_length_mm,
        50.0 + 85.44003745317531
    );
    let accepted = &s.rounds[2].suggestion.as_ref().unwrap().pending.sketch;
    assert_eq!(
        stats[&PlayerChannel::Blue].stroke_count,
        accepted.strokes.len()
    );
    assert!(matches!(
        s.submit_strokes(PlayerChannel::Red, Sketch::empty(CANVAS)),
        Err(SessionError::Closed)
    ));
    // same seeds, same game
    let again = scripted_game(&m);
    assert_eq!(again.rounds, s.rounds);
}

#[test]
fn reordered_or_damaged_journals_are_rejected() {
    let m = model();
    let live = scripted_game(&m);
    let mut swapped = live.journal().to_vec();
    swapped.swap(1, 2);
    match replay(&swapped) {
        Err(SessionError::Replay { index: 1, .. }) => {}
        other => panic!("{other:?}"),
    }

    let text = to_jsonl(live.journal());
    let cut = text.len() - 20;
    match parse_journal(&text[..cut]) {
        Err(SessionError::Journal { line, .. }) => assert_eq!(line, live.journal().len()),
        other => panic!("{other:?}"),
    }

    let mut missing_start = live.journal().to_vec();
    missing_start.remove(0);
    assert!(replay(&missing_start).is_err());
    assert!(replay(&[]).is_err());

    // a journal cut at an event boundary is a valid earlier state
    let prefix = replay(&live.journal()[..4]).unwrap();
    assert_eq!(prefix.rounds.len(), 2);
    assert!(prefix.pending.is_some());
}

#[test]
fn emitter_without_context_points_to_receptor() {
    let m = model();
    let mut s = Session::create(
        "blank",
        CANVAS,
        vec![
            PlayerChannel::Blue,
            PlayerChannel::Red,
            PlayerChannel::Green,
        ],
        Sketch::empty(CANVAS),
    )
    .unwrap();
    let err = s
        .request_completion(CompletionPolicy::Emitter, 1, 0.5, 0, &m)
        .unwrap_err();
    assert_eq!(err.code(), "empty_context");
    assert!(err.to_string().contains("receptor"));
    // blank start under receptor draws from the canvas center
    s.request_completion(CompletionPolicy::Receptor, 1, 0.0, 0, &m)
        .unwrap();
    let p = s.pending.as_ref().unwrap();
    assert_eq!(p.anchor, Point::new(200.0, 150.0));
    assert!(p.suggestion.starts_at_anchor);
    assert_eq!(p.scale, 15.0);
}
