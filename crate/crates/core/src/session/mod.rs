//! Event-sourced game state.
//!
//! Every mutation is expressed as an [`Event`], checked and folded by
//! [`Session::apply`]. Live operations build an event and apply it; replay
//! applies recorded events through the same function, so a journal always
//! folds back to the state that produced it.

mod journal;
mod svg;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sketcher::{complete, LoadedModel, SketcherError, Suggestion};
use crate::stroke::{
    offset_rms, scale_offsets, to_stroke5, PlayerChannel, Point, Sketch, Stroke, Stroke5Row,
    StrokeError,
};

pub use journal::{parse_journal, replay, to_jsonl, JournalEntry};
pub use svg::render_svg;

pub const DEFAULT_TURN_ORDER: [PlayerChannel; 3] = [
    PlayerChannel::Red,
    PlayerChannel::Green,
    PlayerChannel::Blue,
];

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("invalid theme: {0}")]
    InvalidTheme(String),
    #[error("invalid turn order: {0}")]
    InvalidTurnOrder(String),
    #[error("it is {expected}'s turn, not {got}'s")]
    TurnViolation {
        expected: PlayerChannel,
        got: PlayerChannel,
    },
    #[error("channel error: {0}")]
    Channel(String),
    #[error("session is closed")]
    Closed,
    #[error("a suggestion is already pending")]
    SuggestionPending,
    #[error("no suggestion is pending")]
    NoSuggestion,
    #[error("{0} does not vote on ending the painting; only red and green do")]
    NotAVoter(PlayerChannel),
    #[error("empty context: {0}")]
    EmptyContext(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Stroke(#[from] StrokeError),
    #[error(transparent)]
    Sketcher(#[from] SketcherError),
    #[error("event {index}: {source}")]
    Replay {
        index: usize,
        #[source]
        source: Box<SessionError>,
    },
    #[error("journal line {line}: {message}")]
    Journal { line: usize, message: String },
}

impl SessionError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            SessionError::InvalidTheme(_) => "invalid_theme",
            SessionError::InvalidTurnOrder(_) => "invalid_turn_order",
            SessionError::TurnViolation { .. } => "turn_violation",
            SessionError::Channel(_) => "channel_error",
            SessionError::Closed => "session_closed",
            SessionError::SuggestionPending => "suggestion_pending",
            SessionError::NoSuggestion => "no_suggestion",
            SessionError::NotAVoter(_) => "not_a_voter",
            SessionError::EmptyContext(_) => "empty_context",
            SessionError::InvalidInput(_) | SessionError::Stroke(_) => "invalid_input",
            SessionError::Sketcher(_) => "sketcher_error",
            SessionError::Replay { .. } => "replay_error",
            SessionError::Journal { .. } => "journal_error",
        }
    }
}

/// Which strokes the machine gets to see.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CompletionPolicy {
    /// Its own blue strokes and the black theme.
    Emitter,
    /// Every stroke on the canvas.
    Receptor,
    Custom(BTreeSet<PlayerChannel>),
}

impl CompletionPolicy {
    pub fn includes(&self, channel: PlayerChannel) -> bool {
        match self {
            CompletionPolicy::Emitter => {
                matches!(channel, PlayerChannel::Blue | PlayerChannel::Black)
            }
            CompletionPolicy::Receptor => true,
            CompletionPolicy::Custom(set) => set.contains(&channel),
        }
    }

    pub fn validate(&self) -> Result<(), SessionError> {
        match self {
            CompletionPolicy::Custom(set) if set.is_empty() => Err(SessionError::InvalidInput(
                "custom policy needs at least one channel".into(),
            )),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for CompletionPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CompletionPolicy::Emitter => f.write_str("emitter"),
            CompletionPolicy::Receptor => f.write_str("receptor"),
            CompletionPolicy::Custom(set) => {
                let names: Vec<&str> = set.iter().map(|c| c.as_str()).collect();
                write!(f, "custom({})", names.join(","))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "decision", content = "sketch", rename_all = "lowercase")]
pub enum Decision {
    Accept,
    Modify(Sketch),
    Reject,
}

/// Location of a stroke in the session: `round` is `None` for the theme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrokeRef {
    pub round: Option<usize>,
    pub index: usize,
    pub channel: PlayerChannel,
}

/// A suggestion awaiting the painters' decision, with everything needed to
/// reproduce it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingSuggestion {
    pub policy: CompletionPolicy,
    pub amount: usize,
    pub temperature: f64,
    pub seed: u64,
    pub checkpoint_id: String,
    /// Strokes fed to the sketcher, in the order fed.
    pub context: Vec<StrokeRef>,
    /// Canvas mm per model unit used to normalize the context.
    pub scale: f64,
    /// Point the suggestion starts from.
    pub anchor: Point,
    pub suggestion: Suggestion,
    /// The suggestion as blue canvas strokes.
    pub sketch: Sketch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuggestionRecord {
    pub pending: PendingSuggestion,
    pub decision: Decision,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Round {
    pub index: usize,
    pub player: PlayerChannel,
    pub strokes: Sketch,
    pub suggestion: Option<SuggestionRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Open,
    Closed,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Consensus {
    pub red: bool,
    pub green: bool,
}

/// A state change. The journal is a sequence of these.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "payload", rename_all = "snake_case")]
pub enum Event {
    SessionCreated {
        id: String,
        canvas_size: (f64, f64),
        turn_order: Vec<PlayerChannel>,
        theme: Sketch,
    },
    StrokesSubmitted {
        player: PlayerChannel,
        sketch: Sketch,
    },
    CompletionRequested(Box<PendingSuggestion>),
    SuggestionResolved(Decision),
    ConsensusSignaled {
        player: PlayerChannel,
    },
}

impl Event {
    pub fn name(&self) -> &'static str {
        match self {
            Event::SessionCreated { .. } => "session_created",
            Event::StrokesSubmitted { .. } => "strokes_submitted",
            Event::CompletionRequested(_) => "completion_requested",
            Event::SuggestionResolved(_) => "suggestion_resolved",
            Event::ConsensusSignaled { .. } => "consensus_signaled",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub stroke_count: usize,
    pub ink_length_mm: f64,
    pub rounds: usize,
}

/// Something that can continue a stroke-5 prefix.
pub trait Completer {
    fn complete(
        &self,
        prefix: &[Stroke5Row],
        amount: usize,
        temperature: f64,
        seed: u64,
    ) -> Result<Suggestion, SketcherError>;

    fn checkpoint_id(&self) -> String;
}

impl Completer for LoadedModel {
    fn complete(
        &self,
        prefix: &[Stroke5Row],
        amount: usize,
        temperature: f64,
        seed: u64,
    ) -> Result<Suggestion, SketcherError> {
        complete(&self.checkpoint.params, prefix, amount, temperature, seed)
    }

    fn checkpoint_id(&self) -> String {
        self.id.clone()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Session {
    pub id: String,
    pub canvas_size: (f64, f64),
    pub theme: Sketch,
    pub rounds: Vec<Round>,
    pub turn_order: Vec<PlayerChannel>,
    pub pending: Option<PendingSuggestion>,
    pub consensus: Consensus,
    pub status: Status,
    #[serde(skip)]
    pub journal: Vec<JournalEntry>,
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Micros, true)
}

fn check_turn_order(order: &[PlayerChannel]) -> Result<(), SessionError> {
    let mut sorted = order.to_vec();
    sorted.sort();
    if sorted
        != [
            PlayerChannel::Red,
            PlayerChannel::Green,
            PlayerChannel::Blue,
        ]
    {
        return Err(SessionError::InvalidTurnOrder(format!(
            "must be a permutation of red, green, blue; got {order:?}"
        )));
    }
    Ok(())
}

fn check_channel(sketch: &Sketch, expected: PlayerChannel) -> Result<(), SessionError> {
    for (i, s) in sketch.strokes.iter().enumerate() {
        if s.channel == expected {
            continue;
        }
        let why = if s.channel == PlayerChannel::Blue {
            "blue is the machine's color and is not assigned to any player".to_string()
        } else {
            format!("expected {expected}")
        };
        return Err(SessionError::Channel(format!(
            "stroke {i} is {}: {why}",
            s.channel
        )));
    }
    Ok(())
}

/// Gives `sketch` the session canvas and checks it fits.
fn on_canvas(sketch: &Sketch, canvas: (f64, f64)) -> Result<Sketch, SessionError> {
    let s = Sketch::new(canvas, sketch.strokes.clone());
    s.validate()?;
    Ok(s)
}

fn empty_emitter_context() -> SessionError {
    SessionError::EmptyContext(
        "there are no blue or black strokes for the emitter policy; use receptor to complete the players' strokes".into(),
    )
}

/// A decoded machine continuation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub suggestion: Suggestion,
    /// The suggestion as blue strokes in canvas millimeters.
    pub sketch: Sketch,
    pub anchor: Point,
    /// Canvas mm per model unit.
    pub scale: f64,
}

/// Continues `context` as given, with no policy filtering.
///
/// The context is encoded, divided by its own offset spread (a twentieth of
/// the smaller canvas side when it has no offsets), fed to `completer`, and
/// the result is decoded back to canvas millimeters from the last context
/// point, or the canvas center for an empty context.
pub fn complete_context(
    context: &Sketch,
    policy: &CompletionPolicy,
    amount: usize,
    temperature: f64,
    seed: u64,
    completer: &dyn Completer,
) -> Result<Completion, SessionError> {
    let (w, h) = context.canvas_size;
    let rows = to_stroke5(context, usize::MAX)?;
    let scale = match offset_rms(&rows) {
        Some(s) if s > 0.0 => s,
        _ => w.min(h) / 20.0,
    };
    let normalized = scale_offsets(&rows, 1.0 / scale);
    let anchor = context
        .strokes
        .last()
        .and_then(|s| s.points.last().copied())
        .unwrap_or(Point::new(w / 2.0, h / 2.0));
    let mut suggestion = completer.complete(&normalized, amount, temperature, seed)?;
    suggestion.policy_used = Some(policy.clone());
    let mut sketch = suggestion.decode(anchor, scale, PlayerChannel::Blue, context.canvas_size);
    sketch.clamp_to_canvas();
    Ok(Completion {
        suggestion,
        sketch,
        anchor,
        scale,
    })
}

/// Filters `sketch` through `policy` and continues what is left, applying
/// the same empty-context rule as a live session.
pub fn complete_sketch(
    sketch: &Sketch,
    policy: &CompletionPolicy,
    amount: usize,
    temperature: f64,
    seed: u64,
    completer: &dyn Completer,
) -> Result<Completion, SessionError> {
    policy.validate()?;
    if amount == 0 {
        return Err(SessionError::InvalidInput(
            "amount must be at least 1".into(),
        ));
    }
    sketch.validate()?;
    let strokes: Vec<Stroke> = sketch
        .strokes
        .iter()
        .filter(|s| policy.includes(s.channel))
        .cloned()
        .collect();
    if strokes.is_empty() && *policy == CompletionPolicy::Emitter {
        return Err(empty_emitter_context());
    }
    complete_context(
        &Sketch::new(sketch.canvas_size, strokes),
        policy,
        amount,
        temperature,
        seed,
        completer,
    )
}

impl Session {
    /// Applies `SessionCreated` to an empty state.
    pub fn create(
        id: impl Into<String>,
        canvas_size: (f64, f64),
        turn_order: Vec<PlayerChannel>,
        theme: Sketch,
    ) -> Result<Self, SessionError> {
        let entry = JournalEntry {
            event: Event::SessionCreated {
                id: id.into(),
                canvas_size,
                turn_order,
                theme,
            },
            round: 0,
            timestamp: now(),
        };
        Self::from_created(&entry)
    }

    fn from_created(entry: &JournalEntry) -> Result<Self, SessionError> {
        let Event::SessionCreated {
            id,
            canvas_size,
            turn_order,
            theme,
        } = &entry.event
        else {
            return Err(SessionError::InvalidInput(format!(
                "a journal must start with session_created, found {}",
                entry.event.name()
            )));
        };
        if entry.round != 0 {
            return Err(SessionError::InvalidInput(
                "session_created must be round 0".into(),
            ));
        }
        if id.is_empty() {
            return Err(SessionError::InvalidInput("session id is empty".into()));
        }
        check_turn_order(turn_order)?;
        let (w, h) = *canvas_size;
        if !(w > 0.0 && h > 0.0 && w.is_finite() && h.is_finite()) {
            return Err(SessionError::InvalidInput(format!("canvas size {w} x {h}")));
        }
        if let Some(s) = theme
            .strokes
            .iter()
            .find(|s| s.channel != PlayerChannel::Black)
        {
            return Err(SessionError::InvalidTheme(format!(
                "theme strokes must be black, found {}",
                s.channel
            )));
        }
        let theme = on_canvas(theme, *canvas_size)
            .map_err(|e| SessionError::InvalidTheme(e.to_string()))?;
        Ok(Self {
            id: id.clone(),
            canvas_size: *canvas_size,
            theme,
            rounds: Vec::new(),
            turn_order: turn_order.clone(),
            pending: None,
            consensus: Consensus::default(),
            status: Status::Open,
            journal: vec![entry.clone()],
        })
    }

    /// Player whose turn it is.
    pub fn next_player(&self) -> PlayerChannel {
        self.turn_order[self.rounds.len() % self.turn_order.len()]
    }

    /// Started without theme strokes.
    pub fn blank_start(&self) -> bool {
        self.theme.is_empty()
    }

    fn ensure_open(&self) -> Result<(), SessionError> {
        match self.status {
            Status::Open => Ok(()),
            Status::Closed => Err(SessionError::Closed),
        }
    }

    fn ensure_turn(&self, player: PlayerChannel) -> Result<(), SessionError> {
        let expected = self.next_player();
        if expected != player {
            return Err(SessionError::TurnViolation {
                expected,
                got: player,
            });
        }
        Ok(())
    }

    /// Checks `entry` against the current state and folds it in. Nothing
    /// changes when an error is returned.
    pub fn apply(&mut self, entry: &JournalEntry) -> Result<(), SessionError> {
        if entry.round != self.rounds.len() {
            return Err(SessionError::InvalidInput(format!(
                "event is for round {} but the session is at round {}",
                entry.round,
                self.rounds.len()
            )));
        }
        match &entry.event {
            Event::SessionCreated { .. } => {
                return Err(SessionError::InvalidInput("session already created".into()))
            }
            Event::StrokesSubmitted { player, sketch } => {
                self.ensure_open()?;
                if !matches!(player, PlayerChannel::Red | PlayerChannel::Green) {
                    return Err(SessionError::Channel(format!(
                        "{player} is not a human player; blue belongs to the machine and black to the theme"
                    )));
                }
                if self.pending.is_some() {
                    return Err(SessionError::SuggestionPending);
                }
                self.ensure_turn(*player)?;
                check_channel(sketch, *player)?;
                let strokes = on_canvas(sketch, self.canvas_size)?;
                self.rounds.push(Round {
                    index: self.rounds.len(),
                    player: *player,
                    strokes,
                    suggestion: None,
                });
            }
            Event::CompletionRequested(pending) => {
                self.ensure_open()?;
                if self.pending.is_some() {
                    return Err(SessionError::SuggestionPending);
                }
                self.ensure_turn(PlayerChannel::Blue)?;
                pending.policy.validate()?;
                check_channel(&pending.sketch, PlayerChannel::Blue)?;
                for r in &pending.context {
                    if !pending.policy.includes(r.channel) || self.stroke_at(r) != Some(r.channel) {
                        return Err(SessionError::InvalidInput(format!(
                            "context reference {r:?} does not match the session or policy"
                        )));
                    }
                }
                self.pending = Some(pending.as_ref().clone());
            }
            Event::SuggestionResolved(decision) => {
                self.ensure_open()?;
                let pending = self.pending.as_ref().ok_or(SessionError::NoSuggestion)?;
                let strokes = match decision {
                    Decision::Accept => pending.sketch.clone(),
                    Decision::Modify(edit) => {
                        check_channel(edit, PlayerChannel::Blue)?;
                        on_canvas(edit, self.canvas_size)?
                    }
                    Decision::Reject => Sketch::empty(self.canvas_size),
                };
                let pending = self.pending.take().expect("checked above");
                self.rounds.push(Round {
                    index: self.rounds.len(),
                    player: PlayerChannel::Blue,
                    strokes,
                    suggestion: Some(SuggestionRecord {
                        pending,
                        decision: decision.clone(),
                    }),
                });
            }
            Event::ConsensusSignaled { player } => {
                self.ensure_open()?;
                match player {
                    PlayerChannel::Red => self.consensus.red = true,
                    PlayerChannel::Green => self.consensus.green = true,
                    other => return Err(SessionError::NotAVoter(*other)),
                }
                if self.consensus.red && self.consensus.green {
                    self.status = Status::Closed;
                }
            }
        }
        self.journal.push(entry.clone());
        Ok(())
    }

    fn record(&mut self, event: Event) -> Result<&JournalEntry, SessionError> {
        let entry = JournalEntry {
            event,
            round: self.rounds.len(),
            timestamp: now(),
        };
        self.apply(&entry)?;
        Ok(self.journal.last().expect("just pushed"))
    }

    pub fn submit_strokes(
        &mut self,
        player: PlayerChannel,
        sketch: Sketch,
    ) -> Result<&JournalEntry, SessionError> {
        self.record(Event::StrokesSubmitted { player, sketch })
    }

    pub fn resolve_suggestion(
        &mut self,
        decision: Decision,
    ) -> Result<&JournalEntry, SessionError> {
        self.record(Event::SuggestionResolved(decision))
    }

    pub fn signal_consensus(
        &mut self,
        player: PlayerChannel,
    ) -> Result<&JournalEntry, SessionError> {
        self.record(Event::ConsensusSignaled { player })
    }

    /// Asks the sketcher for `amount` new strokes.
    ///
    /// The context is every stroke the policy admits, theme first and then
    /// rounds in order; see [`complete_context`].
    pub fn request_completion(
        &mut self,
        policy: CompletionPolicy,
        amount: usize,
        temperature: f64,
        seed: u64,
        completer: &dyn Completer,
    ) -> Result<&JournalEntry, SessionError> {
        self.ensure_open()?;
        if self.pending.is_some() {
            return Err(SessionError::SuggestionPending);
        }
        self.ensure_turn(PlayerChannel::Blue)?;
        policy.validate()?;
        if amount == 0 {
            return Err(SessionError::InvalidInput(
                "amount must be at least 1".into(),
            ));
        }
        let (refs, strokes) = self.context(&policy);
        if strokes.is_empty() && policy == CompletionPolicy::Emitter {
            return Err(empty_emitter_context());
        }
        let context = Sketch::new(self.canvas_size, strokes);
        let Completion {
            suggestion,
            sketch,
            anchor,
            scale,
        } = complete_context(&context, &policy, amount, temperature, seed, completer)?;
        let pending = PendingSuggestion {
            policy,
            amount,
            temperature,
            seed,
            checkpoint_id: completer.checkpoint_id(),
            context: refs,
            scale,
            anchor,
            suggestion,
            sketch,
        };
        self.record(Event::CompletionRequested(Box::new(pending)))
    }

    fn stroke_at(&self, r: &StrokeRef) -> Option<PlayerChannel> {
        let sketch = match r.round {
            None => &self.theme,
            Some(i) => &self.rounds.get(i)?.strokes,
        };
        sketch.strokes.get(r.index).map(|s| s.channel)
    }

    /// Every stroke in chronological order with its location.
    pub fn all_strokes(&self) -> Vec<(StrokeRef, &Stroke)> {
        let theme = self.theme.strokes.iter().enumerate().map(|(i, s)| {
            (
                StrokeRef {
                    round: None,
                    index: i,
                    channel: s.channel,
                },
                s,
            )
        });
        let rounds = self.rounds.iter().flat_map(|r| {
            r.strokes.strokes.iter().enumerate().map(move |(i, s)| {
                (
                    StrokeRef {
                        round: Some(r.index),
                        index: i,
                        channel: s.channel,
                    },
                    s,
                )
            })
        });
        theme.chain(rounds).collect()
    }

    /// Strokes the policy admits, in chronological order.
    pub fn context(&self, policy: &CompletionPolicy) -> (Vec<StrokeRef>, Vec<Stroke>) {
        self.all_strokes()
            .into_iter()
            .filter(|(r, _)| policy.includes(r.channel))
            .map(|(r, s)| (r, s.clone()))
            .unzip()
    }

    /// The painting so far: theme plus every committed round.
    pub fn sketch(&self) -> Sketch {
        Sketch::new(
            self.canvas_size,
            self.all_strokes()
                .into_iter()
                .map(|(_, s)| s.clone())
                .collect(),
        )
    }

    pub fn contribution_stats(&self) -> BTreeMap<PlayerChannel, ChannelStats> {
        let mut stats: BTreeMap<PlayerChannel, ChannelStats> = PlayerChannel::ALL
            .iter()
            .map(|c| (*c, ChannelStats::default()))
            .collect();
        for (r, s) in self.all_strokes() {
            let e = stats.get_mut(&r.channel).expect("all channels present");
            e.stroke_count += 1;
            e.ink_length_mm += s.length();
        }
        for r in &self.rounds {
            stats
                .get_mut(&r.player)
                .expect("all channels present")
                .rounds += 1;
        }
        stats
    }

    pub fn journal(&self) -> &[JournalEntry] {
        &self.journal
    }

    pub fn to_svg(&self) -> String {
        render_svg(&self.sketch(), self.pending.as_ref().map(|p| &p.sketch))
    }
}
