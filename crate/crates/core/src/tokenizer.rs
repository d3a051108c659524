//! Bar-wise event tokenization.
//!
//! A score serializes bar by bar, left to right. Each bar opens with a bar
//! token followed immediately by a time-signature token; each note follows as
//! a position / pitch / duration triple in ascending onset order. One
//! end-of-sequence token closes the whole score.
//!
//! Token ids are assigned in a frozen canonical order (kind first, then
//! payload ascending) so that identical corpora always produce identical
//! vocabularies: PAD, EOS, BAR, then every observed time signature, position,
//! pitch and duration value. PAD always has id 0; it exists for model
//! training windows and is never emitted by `encode`.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::score::{Bar, Note, Score, TimeSignature};

pub type TokenId = u32;

/// Longest duration payload a token may carry, in ticks (four 4/4 bars).
/// Notes longer than this are split when a corpus is prepared for
/// tokenization; see [`split_long_notes`].
pub const DURATION_CAP_TICKS: u32 = 192;

/// One vocabulary symbol. The variant order here is the canonical id order.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Token {
    Pad,
    Eos,
    Bar,
    TimeSig { num: u8, den: u8 },
    Position { tick: u32 },
    Pitch { pitch: u8 },
    Duration { ticks: u32 },
}

impl std::fmt::Display for Token {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Token::Pad => write!(f, "PAD"),
            Token::Eos => write!(f, "EOS"),
            Token::Bar => write!(f, "BAR"),
            Token::TimeSig { num, den } => write!(f, "TIMESIG({num}/{den})"),
            Token::Position { tick } => write!(f, "POSITION({tick})"),
            Token::Pitch { pitch } => write!(f, "PITCH({pitch})"),
            Token::Duration { ticks } => write!(f, "DURATION({ticks})"),
        }
    }
}

/// Dense token <-> id mapping in canonical order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<Token>,
    index: HashMap<Token, TokenId>,
}

impl Vocabulary {
    /// Collect every event of the corpus plus the PAD/EOS/BAR specials.
    pub fn build(scores: &[Score]) -> Self {
        let mut set = BTreeSet::new();
        set.insert(Token::Pad);
        set.insert(Token::Eos);
        set.insert(Token::Bar);
        for score in scores {
            for bar in &score.bars {
                set.insert(Token::TimeSig {
                    num: bar.time_signature.numerator,
                    den: bar.time_signature.denominator,
                });
                for note in &bar.notes {
                    set.insert(Token::Position { tick: note.onset });
                    set.insert(Token::Pitch { pitch: note.pitch });
                    set.insert(Token::Duration {
                        ticks: note.duration,
                    });
                }
            }
        }
        Self::from_sorted(set.into_iter().collect())
    }

    fn from_sorted(tokens: Vec<Token>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (*t, i as TokenId))
            .collect();
        Vocabulary { tokens, index }
    }

    /// Rebuild from a descriptor list, enforcing the canonical order and the
    /// PAD/EOS invariants.
    pub fn from_tokens(tokens: Vec<Token>) -> Result<Self, VocabularyError> {
        if tokens.windows(2).any(|w| w[0] >= w[1]) {
            return Err(VocabularyError::NotCanonical);
        }
        if tokens.first() != Some(&Token::Pad) {
            return Err(VocabularyError::MissingPad);
        }
        if !tokens.contains(&Token::Eos) {
            return Err(VocabularyError::MissingEos);
        }
        Ok(Self::from_sorted(tokens))
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: Token) -> Option<TokenId> {
        self.index.get(&token).copied()
    }

    pub fn token(&self, id: TokenId) -> Option<Token> {
        self.tokens.get(id as usize).copied()
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn pad_id(&self) -> TokenId {
        0
    }

    pub fn eos_id(&self) -> TokenId {
        self.id(Token::Eos).expect("vocabulary always contains EOS")
    }

    pub fn bar_id(&self) -> TokenId {
        self.id(Token::Bar).expect("vocabulary always contains BAR")
    }
}

impl Serialize for Vocabulary {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.tokens.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Vocabulary {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let tokens = Vec::<Token>::deserialize(deserializer)?;
        Vocabulary::from_tokens(tokens).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum VocabularyError {
    #[error("token list is not in canonical order or contains duplicates")]
    NotCanonical,
    #[error("vocabulary must contain PAD at id 0")]
    MissingPad,
    #[error("vocabulary must contain EOS")]
    MissingEos,
}

/// A sequence of token ids over some vocabulary.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenSequence(pub Vec<TokenId>);

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn ids(&self) -> &[TokenId] {
        &self.0
    }
}

impl From<Vec<TokenId>> for TokenSequence {
    fn from(ids: Vec<TokenId>) -> Self {
        TokenSequence(ids)
    }
}

impl std::ops::Deref for TokenSequence {
    type Target = [TokenId];

    fn deref(&self) -> &Self::Target {
        &self.0
    }
}

/// Token count `encode` would produce, without needing a vocabulary:
/// one EOS plus, per bar, two header tokens and three per note.
pub fn encoded_len(score: &Score) -> usize {
    1 + score
        .bars
        .iter()
        .map(|b| 2 + 3 * b.notes.len())
        .sum::<usize>()
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum TokenizeError {
    #[error("event not in vocabulary: {token}")]
    OutOfVocabulary { token: Token },
}

pub fn encode(score: &Score, vocab: &Vocabulary) -> Result<TokenSequence, TokenizeError> {
    let mut ids = Vec::with_capacity(encoded_len(score));
    let lookup = |token: Token| {
        vocab
            .id(token)
            .ok_or(TokenizeError::OutOfVocabulary { token })
    };
    for bar in &score.bars {
        ids.push(lookup(Token::Bar)?);
        ids.push(lookup(Token::TimeSig {
            num: bar.time_signature.numerator,
            den: bar.time_signature.denominator,
        })?);
        for note in &bar.notes {
            ids.push(lookup(Token::Position { tick: note.onset })?);
            ids.push(lookup(Token::Pitch { pitch: note.pitch })?);
            ids.push(lookup(Token::Duration {
                ticks: note.duration,
            })?);
        }
    }
    ids.push(lookup(Token::Eos)?);
    Ok(TokenSequence(ids))
}

/// Split notes whose duration exceeds [`DURATION_CAP_TICKS`] into chained
/// segments at successive onsets within their bar. A remainder that cannot
/// claim a free onset inside the bar is folded into the last segment's cap.
pub fn split_long_notes(score: &Score) -> Score {
    let bars = score
        .bars
        .iter()
        .map(|bar| {
            let capacity = bar.time_signature.capacity_ticks();
            let taken: BTreeSet<u32> = bar.notes.iter().map(|n| n.onset).collect();
            let mut notes = Vec::with_capacity(bar.notes.len());
            for note in &bar.notes {
                let mut onset = note.onset;
                let mut remaining = note.duration;
                while remaining > DURATION_CAP_TICKS {
                    let next_onset = onset + DURATION_CAP_TICKS;
                    if next_onset >= capacity || taken.contains(&next_onset) {
                        break;
                    }
                    notes.push(Note::new(note.pitch, onset, DURATION_CAP_TICKS));
                    onset = next_onset;
                    remaining -= DURATION_CAP_TICKS;
                }
                notes.push(Note::new(
                    note.pitch,
                    onset,
                    remaining.min(DURATION_CAP_TICKS),
                ));
            }
            Bar::new(bar.time_signature, notes)
        })
        .collect();
    Score::new(score.name.clone(), bars)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeMode {
    /// Fail on the first grammar violation.
    Strict,
    /// Skip minimal malformed runs and report the consumed fraction.
    Lenient,
}

/// One skipped run of tokens in a lenient decode.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SkippedRun {
    pub offset: usize,
    pub len: usize,
    pub reason: String,
}

/// Outcome bookkeeping for a decode: which token runs were skipped and what
/// fraction of the input ended up inside valid structure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WellformednessReport {
    pub rate: f64,
    pub consumed: usize,
    pub total: usize,
    pub skips: Vec<SkippedRun>,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum DecodeError {
    #[error("token {offset}: {reason}")]
    Malformed { offset: usize, reason: String },
    #[error("sequence contains no complete bar")]
    Empty,
    #[error("token {offset}: id {id} not in vocabulary")]
    UnknownId { offset: usize, id: TokenId },
}

struct Decoder {
    bars: Vec<Bar>,
    current: Option<Bar>,
    consumed: usize,
    skips: Vec<SkippedRun>,
}

impl Decoder {
    fn new() -> Self {
        Decoder {
            bars: Vec::new(),
            current: None,
            consumed: 0,
            skips: Vec::new(),
        }
    }

    fn skip(&mut self, offset: usize, len: usize, reason: &str) {
        match self.skips.last_mut() {
            Some(run) if run.offset + run.len == offset => run.len += len,
            _ => self.skips.push(SkippedRun {
                offset,
                len,
                reason: reason.to_string(),
            }),
        }
    }

    fn close_bar(&mut self) {
        if let Some(bar) = self.current.take() {
            self.bars.push(bar);
        }
    }

    /// Try to consume one structural unit at position `pos`. Returns the new
    /// position on success, or the violation reason.
    fn step(&mut self, tokens: &[Token], pos: usize) -> Result<usize, String> {
        match tokens[pos] {
            Token::Bar => match tokens.get(pos + 1) {
                Some(&Token::TimeSig { num, den }) => {
                    let ts = TimeSignature::new(num, den);
                    if !ts.is_valid() {
                        return Err(format!("invalid time signature {ts}"));
                    }
                    self.close_bar();
                    self.current = Some(Bar::empty(ts));
                    self.consumed += 2;
                    Ok(pos + 2)
                }
                _ => Err("bar token not followed by a time signature".into()),
            },
            Token::Position { tick } => {
                let bar = self
                    .current
                    .as_ref()
                    .ok_or("position token with no open bar")?;
                let capacity = bar.time_signature.capacity_ticks();
                if tick >= capacity {
                    return Err(format!("onset {tick} outside bar capacity {capacity}"));
                }
                if let Some(last) = bar.notes.last() {
                    if tick <= last.onset {
                        return Err(format!(
                            "onset {tick} does not increase past {}",
                            last.onset
                        ));
                    }
                }
                let pitch = match tokens.get(pos + 1) {
                    Some(&Token::Pitch { pitch }) => pitch,
                    _ => return Err("position token not followed by a pitch".into()),
                };
                let ticks = match tokens.get(pos + 2) {
                    Some(&Token::Duration { ticks }) => ticks,
                    _ => return Err("note triple missing its duration".into()),
                };
                self.current
                    .as_mut()
                    .expect("checked above")
                    .notes
                    .push(Note::new(pitch, tick, ticks));
                self.consumed += 3;
                Ok(pos + 3)
            }
            Token::Eos => {
                self.close_bar();
                self.consumed += 1;
                Ok(pos + 1)
            }
            Token::Pad => Err("pad token inside a sequence".into()),
            Token::TimeSig { .. } => Err("time signature without a preceding bar token".into()),
            Token::Pitch { .. } => Err("pitch token without a preceding position".into()),
            Token::Duration { .. } => Err("duration token outside a note triple".into()),
        }
    }

    fn finish(mut self, total: usize) -> Result<(Score, WellformednessReport), DecodeError> {
        self.close_bar();
        if self.bars.is_empty() {
            return Err(DecodeError::Empty);
        }
        let rate = if total == 0 {
            0.0
        } else {
            self.consumed as f64 / total as f64
        };
        Ok((
            Score::new("decoded", self.bars),
            WellformednessReport {
                rate,
                consumed: self.consumed,
                total,
                skips: self.skips,
            },
        ))
    }
}

/// Rebuild a score from token ids.
///
/// Strict mode errors at the first grammar violation. Lenient mode skips
/// minimal malformed runs, never produces an invalid score, and reports the
/// fraction of tokens consumed into valid structure.
pub fn decode(
    ids: &[TokenId],
    vocab: &Vocabulary,
    mode: DecodeMode,
) -> Result<(Score, WellformednessReport), DecodeError> {
    let mut tokens = Vec::with_capacity(ids.len());
    for (offset, &id) in ids.iter().enumerate() {
        match vocab.token(id) {
            Some(t) => tokens.push(t),
            None => match mode {
                DecodeMode::Strict => return Err(DecodeError::UnknownId { offset, id }),
                // stand-in that every rule rejects
                DecodeMode::Lenient => tokens.push(Token::Pad),
            },
        }
    }

    let mut decoder = Decoder::new();
    let mut pos = 0;
    let mut saw_eos_at: Option<usize> = None;
    while pos < tokens.len() {
        if tokens[pos] == Token::Eos && saw_eos_at.is_none() {
            saw_eos_at = Some(pos);
        }
        match decoder.step(&tokens, pos) {
            Ok(next) => pos = next,
            Err(reason) => match mode {
                DecodeMode::Strict => {
                    return Err(DecodeError::Malformed {
                        offset: pos,
                        reason,
                    })
                }
                DecodeMode::Lenient => {
                    decoder.skip(pos, 1, &reason);
                    pos += 1;
                }
            },
        }
        // Anything after a consumed EOS is off the end of the piece.
        if let Some(eos) = saw_eos_at {
            if pos > eos && pos < tokens.len() {
                match mode {
                    DecodeMode::Strict => {
                        return Err(DecodeError::Malformed {
                            offset: pos,
                            reason: "tokens after end of sequence".into(),
                        })
                    }
                    DecodeMode::Lenient => {
                        decoder.skip(pos, tokens.len() - pos, "tokens after end of sequence");
                        pos = tokens.len();
                    }
                }
            }
        }
    }
    decoder.finish(ids.len())
}
