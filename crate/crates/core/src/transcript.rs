//! Agent/game dialog transcripts, word-piece counting and context packing.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::category::ActionCategory;
use crate::error::{Error, Result};

/// Cue appended to every prompt; the model continues with the next action.
pub const ACTION_CUE: &str = "A:";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogTurn {
    pub action: String,
    pub observation: String,
}

impl DialogTurn {
    pub fn new(action: impl Into<String>, observation: impl Into<String>) -> Result<Self> {
        let turn = DialogTurn {
            action: action.into(),
            observation: observation.into(),
        };
        turn.validate()?;
        Ok(turn)
    }

    fn validate(&self) -> Result<()> {
        for (what, text) in [("action", &self.action), ("observation", &self.observation)] {
            if text.trim().is_empty() {
                return Err(Error::InvalidTurn(format!("empty {what}")));
            }
            if text.contains('\n') {
                return Err(Error::InvalidTurn(format!(
                    "{what} spans several lines: {text:?}"
                )));
            }
        }
        Ok(())
    }

    fn render_into(&self, out: &mut String) {
        out.push_str("A: ");
        out.push_str(&self.action);
        out.push_str("\nG: ");
        out.push_str(&self.observation);
        out.push('\n');
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnAnnotation {
    /// Score after the turn.
    pub score: u32,
    pub category: Option<ActionCategory>,
    pub intercepted: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub task_description: String,
    turns: Vec<DialogTurn>,
    annotations: Vec<TurnAnnotation>,
}

impl Transcript {
    pub fn new(task_description: impl Into<String>) -> Self {
        Transcript {
            task_description: task_description.into(),
            turns: Vec::new(),
            annotations: Vec::new(),
        }
    }

    pub fn push(&mut self, turn: DialogTurn, annotation: TurnAnnotation) {
        self.turns.push(turn);
        self.annotations.push(annotation);
    }

    pub fn turns(&self) -> &[DialogTurn] {
        &self.turns
    }

    pub fn annotations(&self) -> &[TurnAnnotation] {
        &self.annotations
    }

    pub fn len(&self) -> usize {
        self.turns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.turns.is_empty()
    }
}

/// Description, a blank line, then one "A:"/"G:" pair per turn. With no
/// turns the description stands alone.
pub fn render_turns(task_description: &str, turns: &[DialogTurn]) -> String {
    let mut out = String::with_capacity(task_description.len() + turns.len() * 64);
    out.push_str(task_description);
    if !turns.is_empty() {
        out.push_str("\n\n");
        for turn in turns {
            turn.render_into(&mut out);
        }
    }
    out
}

pub fn render(transcript: &Transcript) -> String {
    render_turns(&transcript.task_description, &transcript.turns)
}

/// Inverse of [`render`]; annotations are not part of the text and come
/// back empty.
pub fn parse_transcript(text: &str) -> Result<Transcript> {
    let (description, body) = match text.split_once("\n\n") {
        Some((d, b)) => (d, b),
        None => (text, ""),
    };
    let mut transcript = Transcript::new(description);
    let mut lines = body.split_terminator('\n');
    while let Some(line) = lines.next() {
        let action = line.strip_prefix("A: ").ok_or_else(|| {
            Error::MalformedTranscript(format!("expected an action line, got {line:?}"))
        })?;
        let observation = lines
            .next()
            .and_then(|l| l.strip_prefix("G: "))
            .ok_or_else(|| {
                Error::MalformedTranscript(format!("action {action:?} has no observation line"))
            })?;
        transcript.push(
            DialogTurn::new(action, observation)?,
            TurnAnnotation::default(),
        );
    }
    if render(&transcript) != text {
        return Err(Error::MalformedTranscript(
            "text does not round-trip".into(),
        ));
    }
    Ok(transcript)
}

/// Word-piece counting function.
pub trait PieceCounter: Send + Sync {
    fn count(&self, text: &str) -> usize;
}

impl<F: Fn(&str) -> usize + Send + Sync> PieceCounter for F {
    fn count(&self, text: &str) -> usize {
        self(text)
    }
}

/// Whitespace tokens with every punctuation mark split off as its own
/// piece, scaled by 1.3 and rounded down.
#[derive(Debug, Clone, Copy, Default)]
pub struct DefaultCounter;

pub fn raw_pieces(text: &str) -> usize {
    let mut count = 0;
    for token in text.split_whitespace() {
        let mut in_word = false;
        for c in token.chars() {
            if c.is_alphanumeric() {
                if !in_word {
                    count += 1;
                    in_word = true;
                }
            } else {
                count += 1;
                in_word = false;
            }
        }
    }
    count
}

impl PieceCounter for DefaultCounter {
    fn count(&self, text: &str) -> usize {
        raw_pieces(text) * 13 / 10
    }
}

pub fn count_pieces(text: &str, counter: &dyn PieceCounter) -> usize {
    counter.count(text)
}

#[derive(Clone)]
pub struct TokenBudget {
    pub max_pieces: usize,
    pub counter: Arc<dyn PieceCounter>,
}

impl TokenBudget {
    pub const DEFAULT_MAX: usize = 2048;

    pub fn new(max_pieces: usize) -> Self {
        TokenBudget {
            max_pieces,
            counter: Arc::new(DefaultCounter),
        }
    }

    pub fn with_counter(max_pieces: usize, counter: Arc<dyn PieceCounter>) -> Self {
        TokenBudget {
            max_pieces,
            counter,
        }
    }

    pub fn count(&self, text: &str) -> usize {
        self.counter.count(text)
    }
}

impl Default for TokenBudget {
    fn default() -> Self {
        TokenBudget::new(Self::DEFAULT_MAX)
    }
}

impl std::fmt::Debug for TokenBudget {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TokenBudget")
            .field("max_pieces", &self.max_pieces)
            .finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HistoryMode {
    #[default]
    FullHistory,
    Markov,
}

impl std::str::FromStr for HistoryMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "full-history" | "full" => Ok(HistoryMode::FullHistory),
            "markov" => Ok(HistoryMode::Markov),
            other => Err(format!("unknown history mode {other}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackedContext {
    pub text: String,
    /// Number of most-recent turns included.
    pub turns: usize,
    pub pieces: usize,
}

/// Prompt text holding the last `k` turns, ending with the action cue.
pub fn prompt_with_suffix(task_description: &str, turns: &[DialogTurn], k: usize) -> String {
    let mut text = render_turns(task_description, &turns[turns.len() - k..]);
    if k == 0 {
        text.push_str("\n\n");
    }
    text.push_str(ACTION_CUE);
    text
}

/// Packs the description plus the longest suffix of whole turns whose
/// prompt (cue included) fits the budget. Markov mode takes exactly the
/// latest turn. Relies on the counter being monotone under concatenation,
/// so the fitting suffixes form a prefix of 1, 2, ... turns.
pub fn pack_context(
    task_description: &str,
    turns: &[DialogTurn],
    budget: &TokenBudget,
    mode: HistoryMode,
) -> Result<PackedContext> {
    let measure = |k: usize| {
        let text = prompt_with_suffix(task_description, turns, k);
        let pieces = budget.count(&text);
        (text, pieces)
    };
    let minimum = turns.len().min(1);
    let (text, pieces) = measure(minimum);
    if pieces > budget.max_pieces {
        return Err(Error::LatestTurnExceedsBudget {
            needed: pieces,
            budget: budget.max_pieces,
        });
    }
    if mode == HistoryMode::Markov || turns.len() <= 1 {
        return Ok(PackedContext {
            text,
            turns: minimum,
            pieces,
        });
    }
    let fits = |k: usize| measure(k).1 <= budget.max_pieces;
    // Gallop to bracket the boundary, then binary search inside it.
    let mut good = 1;
    let mut step = 1;
    let bad = loop {
        let probe = (good + step).min(turns.len());
        if !fits(probe) {
            break probe;
        }
        good = probe;
        if good == turns.len() {
            break turns.len() + 1;
        }
        step *= 2;
    };
    let (mut lo, mut hi) = (good, bad);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if fits(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (text, pieces) = measure(lo);
    Ok(PackedContext {
        text,
        turns: lo,
        pieces,
    })
}

pub fn pack_transcript(
    transcript: &Transcript,
    budget: &TokenBudget,
    mode: HistoryMode,
) -> Result<PackedContext> {
    pack_context(
        &transcript.task_description,
        &transcript.turns,
        budget,
        mode,
    )
}
