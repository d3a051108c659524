//! Monophonic score model: notes on a 1/12-beat tick grid, grouped into bars.
//!
//! The "beat" is the denominator unit of the time signature (a quarter note
//! in 4/4, an eighth in 6/8), so a bar always holds `numerator * 12` ticks.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tick resolution of the grid. All onsets and durations are integers at
/// this resolution.
pub const TICKS_PER_BEAT: u32 = 12;

/// One note. `onset` is relative to the containing bar's start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Note {
    pub pitch: u8,
    pub onset: u32,
    #[serde(rename = "dur")]
    pub duration: u32,
}

impl Note {
    pub fn new(pitch: u8, onset: u32, duration: u32) -> Self {
        Note {
            pitch,
            onset,
            duration,
        }
    }

    /// Identity triple used by the bar similarity metric.
    pub fn identity(&self) -> (u8, u32, u32) {
        (self.pitch, self.onset, self.duration)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "(u8, u8)", from = "(u8, u8)")]
pub struct TimeSignature {
    pub numerator: u8,
    pub denominator: u8,
}

impl TimeSignature {
    pub fn new(numerator: u8, denominator: u8) -> Self {
        TimeSignature {
            numerator,
            denominator,
        }
    }

    /// Number of ticks a bar with this signature can hold.
    pub fn capacity_ticks(&self) -> u32 {
        u32::from(self.numerator) * TICKS_PER_BEAT
    }

    pub fn is_valid(&self) -> bool {
        self.numerator >= 1 && matches!(self.denominator, 1 | 2 | 4 | 8 | 16)
    }
}

impl From<TimeSignature> for (u8, u8) {
    fn from(ts: TimeSignature) -> Self {
        (ts.numerator, ts.denominator)
    }
}

impl From<(u8, u8)> for TimeSignature {
    fn from((numerator, denominator): (u8, u8)) -> Self {
        TimeSignature {
            numerator,
            denominator,
        }
    }
}

impl std::fmt::Display for TimeSignature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.numerator, self.denominator)
    }
}

/// One bar: a time signature plus notes sorted by `(onset, pitch)`.
/// Monophony: no two notes share an onset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bar {
    #[serde(rename = "ts")]
    pub time_signature: TimeSignature,
    pub notes: Vec<Note>,
}

impl Bar {
    pub fn new(time_signature: TimeSignature, mut notes: Vec<Note>) -> Self {
        notes.sort_by_key(|n| (n.onset, n.pitch));
        Bar {
            time_signature,
            notes,
        }
    }

    pub fn empty(time_signature: TimeSignature) -> Self {
        Bar {
            time_signature,
            notes: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Score {
    pub name: String,
    pub bars: Vec<Bar>,
}

impl Score {
    pub fn new(name: impl Into<String>, bars: Vec<Bar>) -> Self {
        Score {
            name: name.into(),
            bars,
        }
    }

    pub fn note_count(&self) -> usize {
        self.bars.iter().map(|b| b.notes.len()).sum()
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        if self.bars.is_empty() {
            return Err(ValidationError::NoBars {
                score: self.name.clone(),
            });
        }
        for (bar_idx, bar) in self.bars.iter().enumerate() {
            if !bar.time_signature.is_valid() {
                return Err(ValidationError::BadTimeSignature {
                    score: self.name.clone(),
                    bar: bar_idx,
                    time_signature: bar.time_signature,
                });
            }
            let capacity = bar.time_signature.capacity_ticks();
            let mut prev: Option<&Note> = None;
            for (note_idx, note) in bar.notes.iter().enumerate() {
                if note.pitch > 127 {
                    return Err(ValidationError::PitchOutOfRange {
                        score: self.name.clone(),
                        bar: bar_idx,
                        note: note_idx,
                        pitch: note.pitch,
                    });
                }
                if note.duration == 0 {
                    return Err(ValidationError::ZeroDuration {
                        score: self.name.clone(),
                        bar: bar_idx,
                        note: note_idx,
                    });
                }
                if note.onset >= capacity {
                    return Err(ValidationError::OnsetOutsideBar {
                        score: self.name.clone(),
                        bar: bar_idx,
                        note: note_idx,
                        onset: note.onset,
                        capacity,
                    });
                }
                if let Some(p) = prev {
                    if p.onset == note.onset {
                        return Err(ValidationError::SharedOnset {
                            score: self.name.clone(),
                            bar: bar_idx,
                            onset: note.onset,
                        });
                    }
                    if (p.onset, p.pitch) > (note.onset, note.pitch) {
                        return Err(ValidationError::UnsortedNotes {
                            score: self.name.clone(),
                            bar: bar_idx,
                            note: note_idx,
                        });
                    }
                }
                prev = Some(note);
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ValidationError {
    #[error("score '{score}' has no bars")]
    NoBars { score: String },
    #[error("score '{score}', bar {bar}: invalid time signature {time_signature}")]
    BadTimeSignature {
        score: String,
        bar: usize,
        time_signature: TimeSignature,
    },
    #[error("score '{score}', bar {bar}, note {note}: pitch {pitch} out of range 0..=127")]
    PitchOutOfRange {
        score: String,
        bar: usize,
        note: usize,
        pitch: u8,
    },
    #[error("score '{score}', bar {bar}, note {note}: duration must be at least 1 tick")]
    ZeroDuration {
        score: String,
        bar: usize,
        note: usize,
    },
    #[error("score '{score}', bar {bar}, note {note}: onset {onset} outside bar capacity {capacity}")]
    OnsetOutsideBar {
        score: String,
        bar: usize,
        note: usize,
        onset: u32,
        capacity: u32,
    },
    #[error("score '{score}', bar {bar}: two notes share onset {onset}")]
    SharedOnset {
        score: String,
        bar: usize,
        onset: u32,
    },
    #[error("score '{score}', bar {bar}, note {note}: notes not sorted by (onset, pitch)")]
    UnsortedNotes {
        score: String,
        bar: usize,
        note: usize,
    },
}

#[cfg(test)]
mod tests {
    use super::*;

    fn four_four() -> TimeSignature {
        TimeSignature::new(4, 4)
    }

    #[test]
    fn bar_capacity_follows_denominator_unit() {
        assert_eq!(four_four().capacity_ticks(), 48);
        assert_eq!(TimeSignature::new(6, 8).capacity_ticks(), 72);
        assert_eq!(TimeSignature::new(3, 4).capacity_ticks(), 36);
    }

    #[test]
    fn valid_score_passes() {
        let s = Score::new(
            "t",
            vec![Bar::new(
                four_four(),
                vec![Note::new(60, 0, 12), Note::new(62, 12, 12)],
            )],
        );
        assert!(s.validate().is_ok());
    }

    #[test]
    fn zero_duration_names_duration() {
        let s = Score::new("t", vec![Bar::new(four_four(), vec![Note::new(60, 0, 0)])]);
        let err = s.validate().unwrap_err();
        assert!(err.to_string().contains("duration"));
    }

    #[test]
    fn shared_onset_rejected() {
        let s = Score::new(
            "t",
            vec![Bar::new(
                four_four(),
                vec![Note::new(60, 0, 6), Note::new(64, 0, 6)],
            )],
        );
        assert!(matches!(
            s.validate(),
            Err(ValidationError::SharedOnset { onset: 0, .. })
        ));
    }

    #[test]
    fn onset_at_capacity_rejected() {
        let s = Score::new("t", vec![Bar::new(four_four(), vec![Note::new(60, 48, 6)])]);
        assert!(matches!(
            s.validate(),
            Err(ValidationError::OnsetOutsideBar { onset: 48, .. })
        ));
    }

    #[test]
    fn invalid_denominator_rejected() {
        let s = Score::new("t", vec![Bar::empty(TimeSignature::new(4, 3))]);
        assert!(matches!(
            s.validate(),
            Err(ValidationError::BadTimeSignature { .. })
        ));
    }

    #[test]
    fn empty_score_rejected() {
        let s = Score::new("t", vec![]);
        assert!(matches!(s.validate(), Err(ValidationError::NoBars { .. })));
    }

    #[test]
    fn bar_constructor_sorts_notes() {
        let b = Bar::new(four_four(), vec![Note::new(62, 12, 6), Note::new(60, 0, 6)]);
        assert_eq!(b.notes[0].onset, 0);
        assert_eq!(b.notes[1].onset, 12);
    }
}
