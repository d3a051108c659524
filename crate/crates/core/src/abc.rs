//! Parser and renderer for a deliberately small ABC notation subset.
//!
//! A tune is five header lines in fixed order (X index, T title, M meter,
//! L unit note length, K key) followed by body lines of notes, rests and bar
//! lines. Notes carry optional accidentals (`^`, `_`, `=`), octave marks
//! (`'`, `,`) and duration multipliers/divisors. Accidentals apply to their
//! own note only; they do not carry through the bar. Chords, ties, slurs,
//! tuplets, grace notes, repeats, decorations and inline fields are rejected
//! by name. Multiple tunes in one file are separated by blank lines.

use thiserror::Error;

use crate::score::{Bar, Note, Score, TimeSignature, ValidationError, TICKS_PER_BEAT};

#[derive(Debug, Error)]
pub enum AbcError {
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("tune {name:?}: {source}")]
    Invalid {
        name: String,
        source: ValidationError,
    },
}

fn parse_err(line: usize, column: usize, message: impl Into<String>) -> AbcError {
    AbcError::Parse {
        line,
        column,
        message: message.into(),
    }
}

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("score has no bars")]
    Empty,
    #[error("bars use more than one time signature")]
    MixedTimeSignatures,
    #[error("name {name:?} does not survive a header round trip")]
    UnrenderableName { name: String },
}

/// Parse every tune in `text`, stopping at the first malformed one.
pub fn parse_abc(text: &str) -> Result<Vec<Score>, AbcError> {
    parse_abc_tunes(text).into_iter().collect()
}

/// Parse every tune in `text`, yielding one result per blank-line-separated
/// block so callers can count successes and failures independently.
pub fn parse_abc_tunes(text: &str) -> Vec<Result<Score, AbcError>> {
    let lines: Vec<&str> = text.split('\n').map(|l| l.trim_end_matches('\r')).collect();
    let mut blocks: Vec<Vec<(usize, &str)>> = Vec::new();
    let mut current: Vec<(usize, &str)> = Vec::new();
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            if !current.is_empty() {
                blocks.push(std::mem::take(&mut current));
            }
        } else {
            current.push((i + 1, line));
        }
    }
    if !current.is_empty() {
        blocks.push(current);
    }
    blocks.iter().map(|block| parse_tune(block)).collect()
}

/// Per-letter semitone adjustment implied by a key signature, indexed A..G.
type KeyAdjustments = [i32; 7];

fn letter_index(letter: char) -> usize {
    (letter.to_ascii_uppercase() as u8 - b'A') as usize
}

// Natural pitch classes for letters A..G.
const LETTER_PITCH_CLASS: [i32; 7] = [9, 11, 0, 2, 4, 5, 7];
// Position of each letter on the line of fifths, A..G.
const LETTER_FIFTHS: [i32; 7] = [3, 5, 0, 2, 4, -1, 1];
// Order in which sharps and flats accumulate, as letter indices.
const SHARP_ORDER: [usize; 7] = [5, 2, 6, 3, 0, 4, 1]; // F C G D A E B
const FLAT_ORDER: [usize; 7] = [1, 4, 0, 3, 6, 2, 5]; // B E A D G C F

fn mode_offset(mode: &str) -> Option<i32> {
    match mode {
        "" | "maj" | "major" | "ion" | "ionian" => Some(0),
        "m" | "min" | "minor" | "aeo" | "aeolian" => Some(-3),
        "mix" | "mixolydian" => Some(-1),
        "dor" | "dorian" => Some(-2),
        "phr" | "phrygian" => Some(-4),
        "lyd" | "lydian" => Some(1),
        "loc" | "locrian" => Some(-5),
        _ => None,
    }
}

fn parse_key(value: &str, line: usize) -> Result<KeyAdjustments, AbcError> {
    let compact: String = value.split_whitespace().collect();
    let mut chars = compact.chars();
    let tonic = chars
        .next()
        .filter(|c| c.is_ascii_alphabetic() && ('A'..='G').contains(&c.to_ascii_uppercase()))
        .ok_or_else(|| parse_err(line, 1, format!("unknown key {value:?}")))?;
    let rest = chars.as_str();
    let (accidental, mode_str) = match rest.chars().next() {
        Some('#') => (7, &rest[1..]),
        Some('b') => (-7, &rest[1..]),
        _ => (0, rest),
    };
    let offset = mode_offset(&mode_str.to_ascii_lowercase())
        .ok_or_else(|| parse_err(line, 1, format!("unknown mode {mode_str:?}")))?;
    let signature = LETTER_FIFTHS[letter_index(tonic)] + accidental + offset;
    if signature.abs() > 7 {
        return Err(parse_err(
            line,
            1,
            format!("key {value:?} needs more than seven accidentals"),
        ));
    }
    let mut adjustments = [0; 7];
    if signature > 0 {
        for &idx in SHARP_ORDER.iter().take(signature as usize) {
            adjustments[idx] = 1;
        }
    } else {
        for &idx in FLAT_ORDER.iter().take((-signature) as usize) {
            adjustments[idx] = -1;
        }
    }
    Ok(adjustments)
}

fn parse_meter(value: &str, line: usize) -> Result<TimeSignature, AbcError> {
    let value = value.trim();
    let ts = match value {
        "C" => TimeSignature::new(4, 4),
        "C|" => TimeSignature::new(2, 2),
        _ => {
            let (num, den) = value
                .split_once('/')
                .ok_or_else(|| parse_err(line, 1, format!("invalid meter {value:?}")))?;
            let num = num
                .trim()
                .parse()
                .map_err(|_| parse_err(line, 1, format!("invalid meter {value:?}")))?;
            let den = den
                .trim()
                .parse()
                .map_err(|_| parse_err(line, 1, format!("invalid meter {value:?}")))?;
            TimeSignature::new(num, den)
        }
    };
    if !ts.is_valid() {
        return Err(parse_err(line, 1, format!("unsupported meter {value:?}")));
    }
    Ok(ts)
}

fn parse_unit_length(value: &str, line: usize) -> Result<(u64, u64), AbcError> {
    let bad = || parse_err(line, 1, format!("invalid unit note length {value:?}"));
    let (num, den) = value.trim().split_once('/').ok_or_else(bad)?;
    let num: u64 = num.trim().parse().map_err(|_| bad())?;
    let den: u64 = den.trim().parse().map_err(|_| bad())?;
    if num == 0 || den == 0 {
        return Err(bad());
    }
    Ok((num, den))
}

fn header_value<'a>(
    block: &[(usize, &'a str)],
    position: usize,
    letter: char,
) -> Result<(usize, &'a str), AbcError> {
    let (line_no, line) = *block.get(position).ok_or_else(|| {
        let last = block.last().map(|(n, _)| *n).unwrap_or(1);
        parse_err(last, 1, format!("expected {letter}: header"))
    })?;
    let rest = line
        .strip_prefix(letter)
        .and_then(|r| r.strip_prefix(':'))
        .ok_or_else(|| parse_err(line_no, 1, format!("expected {letter}: header")))?;
    Ok((line_no, rest.trim()))
}

struct BodyChar {
    line: usize,
    column: usize,
    ch: char,
}

fn unsupported(ch: char) -> Option<&'static str> {
    match ch {
        '[' | ']' => Some("chord"),
        '-' => Some("tie"),
        '(' | ')' => Some("slur or tuplet"),
        '{' | '}' => Some("grace notes"),
        ':' => Some("repeat"),
        '"' => Some("annotation"),
        '!' | '+' | '~' => Some("decoration"),
        '<' | '>' => Some("broken rhythm"),
        _ => None,
    }
}

fn parse_tune(block: &[(usize, &str)]) -> Result<Score, AbcError> {
    let (index_line, index_value) = header_value(block, 0, 'X')?;
    index_value
        .parse::<u64>()
        .map_err(|_| parse_err(index_line, 1, format!("invalid tune index {index_value:?}")))?;
    let (_, title) = header_value(block, 1, 'T')?;
    let (meter_line, meter_value) = header_value(block, 2, 'M')?;
    let time_signature = parse_meter(meter_value, meter_line)?;
    let (unit_line, unit_value) = header_value(block, 3, 'L')?;
    let (unit_num, unit_den) = parse_unit_length(unit_value, unit_line)?;
    let (key_line, key_value) = header_value(block, 4, 'K')?;
    let key = parse_key(key_value, key_line)?;

    let mut body = Vec::new();
    for (line_no, line) in &block[5..] {
        for (i, ch) in line.chars().enumerate() {
            body.push(BodyChar {
                line: *line_no,
                column: i + 1,
                ch,
            });
        }
    }

    let mut bars: Vec<Bar> = Vec::new();
    let mut notes: Vec<Note> = Vec::new();
    let mut cursor: u32 = 0;
    let mut bar_has_content = false;
    let mut pos = 0;

    let mut close_bar = |notes: &mut Vec<Note>, cursor: &mut u32, has_content: &mut bool| {
        if *has_content {
            bars.push(Bar::new(time_signature, std::mem::take(notes)));
        }
        *cursor = 0;
        *has_content = false;
    };

    while pos < body.len() {
        let BodyChar { line, column, ch } = body[pos];
        if ch.is_whitespace() {
            pos += 1;
            continue;
        }
        if ch == '|' {
            pos += 1;
            if matches!(body.get(pos), Some(b) if b.ch == '|' || b.ch == ']') {
                pos += 1;
            }
            close_bar(&mut notes, &mut cursor, &mut bar_has_content);
            continue;
        }
        if let Some(name) = unsupported(ch) {
            return Err(parse_err(
                line,
                column,
                format!("unsupported construct: {name}"),
            ));
        }

        let mut accidental: Option<i32> = None;
        if matches!(ch, '^' | '_' | '=') {
            if matches!(body.get(pos + 1), Some(b) if b.ch == ch && ch != '=') {
                return Err(parse_err(
                    line,
                    column,
                    "unsupported construct: double accidental",
                ));
            }
            accidental = Some(match ch {
                '^' => 1,
                '_' => -1,
                _ => 0,
            });
            pos += 1;
        }

        let head = match body.get(pos) {
            Some(b) => b,
            None => return Err(parse_err(line, column, "accidental with no note")),
        };
        let (head_line, head_column, head_ch) = (head.line, head.column, head.ch);
        let is_rest = head_ch == 'z';
        let is_note = head_ch.is_ascii_alphabetic()
            && ('A'..='G').contains(&head_ch.to_ascii_uppercase());
        if !is_rest && !is_note {
            return Err(parse_err(
                head_line,
                head_column,
                format!("unexpected character {head_ch:?}"),
            ));
        }
        if is_rest && accidental.is_some() {
            return Err(parse_err(head_line, head_column, "accidental on a rest"));
        }
        pos += 1;

        let mut octave_shift: i32 = 0;
        while let Some(b) = body.get(pos) {
            match b.ch {
                '\'' => octave_shift += 12,
                ',' => octave_shift -= 12,
                _ => break,
            }
            pos += 1;
        }

        // Duration grammar: optional multiplier digits, then any number of
        // '/' groups, each halving unless followed by explicit digits.
        let mut mult: u64 = 1;
        let mut div: u64 = 1;
        let mut saw_digits = false;
        let mut digits = 0u64;
        while let Some(b) = body.get(pos) {
            if let Some(d) = b.ch.to_digit(10) {
                saw_digits = true;
                digits = digits.saturating_mul(10).saturating_add(u64::from(d));
                pos += 1;
            } else {
                break;
            }
        }
        if saw_digits {
            if digits == 0 {
                return Err(parse_err(head_line, head_column, "zero duration"));
            }
            mult = digits;
        }
        while matches!(body.get(pos), Some(b) if b.ch == '/') {
            pos += 1;
            let mut digits = 0u64;
            let mut saw = false;
            while let Some(b) = body.get(pos) {
                if let Some(d) = b.ch.to_digit(10) {
                    saw = true;
                    digits = digits.saturating_mul(10).saturating_add(u64::from(d));
                    pos += 1;
                } else {
                    break;
                }
            }
            if saw {
                if digits == 0 {
                    return Err(parse_err(head_line, head_column, "zero duration"));
                }
                div = div.saturating_mul(digits);
            } else {
                div = div.saturating_mul(2);
            }
        }

        // ticks = unit * (mult/div) * meter_denominator * TICKS_PER_BEAT,
        // rounded half up, never below one tick.
        let n = unit_num
            .saturating_mul(mult)
            .saturating_mul(u64::from(time_signature.denominator))
            .saturating_mul(u64::from(TICKS_PER_BEAT));
        let d = unit_den.saturating_mul(div);
        let ticks = (n.saturating_mul(2).saturating_add(d) / d.saturating_mul(2)).max(1);
        let ticks = u32::try_from(ticks)
            .map_err(|_| parse_err(head_line, head_column, "duration out of range"))?;

        if is_note {
            let idx = letter_index(head_ch);
            let base = if head_ch.is_ascii_uppercase() { 60 } else { 72 };
            let adjust = accidental.unwrap_or(key[idx]);
            let pitch = base + LETTER_PITCH_CLASS[idx] + adjust + octave_shift;
            let pitch = u8::try_from(pitch)
                .map_err(|_| parse_err(head_line, head_column, "pitch out of range"))?;
            notes.push(Note::new(pitch, cursor, ticks));
        }
        bar_has_content = true;
        cursor = cursor.saturating_add(ticks);
    }
    close_bar(&mut notes, &mut cursor, &mut bar_has_content);

    let score = Score::new(title, bars);
    score.validate().map_err(|source| AbcError::Invalid {
        name: score.name.clone(),
        source,
    })?;
    Ok(score)
}

fn push_duration(out: &mut String, ticks: u32) {
    let g = gcd(u64::from(ticks), u64::from(TICKS_PER_BEAT));
    let num = u64::from(ticks) / g;
    let den = u64::from(TICKS_PER_BEAT) / g;
    if num != 1 {
        out.push_str(&num.to_string());
    }
    if den != 1 {
        out.push('/');
        out.push_str(&den.to_string());
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

// Rendered spelling for each pitch class under K:C, black keys as sharps.
const PITCH_CLASS_SPELLING: [(char, bool); 12] = [
    ('C', false),
    ('C', true),
    ('D', false),
    ('D', true),
    ('E', false),
    ('F', false),
    ('F', true),
    ('G', false),
    ('G', true),
    ('A', false),
    ('A', true),
    ('B', false),
];

fn push_pitch(out: &mut String, pitch: u8) {
    let rel = i32::from(pitch) - 60;
    let shift = rel.div_euclid(12);
    let (letter, sharp) = PITCH_CLASS_SPELLING[rel.rem_euclid(12) as usize];
    if sharp {
        out.push('^');
    }
    if shift >= 1 {
        out.push(letter.to_ascii_lowercase());
        for _ in 1..shift {
            out.push('\'');
        }
    } else {
        out.push(letter);
        for _ in shift..0 {
            out.push(',');
        }
    }
}

/// Render a single-time-signature score back to the subset. Gaps become
/// rests, empty bars become whole-bar rests, black keys are spelled as
/// sharps under K:C. `parse_abc` of the result reproduces the score.
pub fn render_abc(score: &Score) -> Result<String, RenderError> {
    let first = score.bars.first().ok_or(RenderError::Empty)?;
    let ts = first.time_signature;
    if score.bars.iter().any(|b| b.time_signature != ts) {
        return Err(RenderError::MixedTimeSignatures);
    }
    if score.name.trim() != score.name || score.name.contains('\n') {
        return Err(RenderError::UnrenderableName {
            name: score.name.clone(),
        });
    }

    let mut out = String::new();
    out.push_str("X:1\n");
    out.push_str(&format!("T:{}\n", score.name));
    out.push_str(&format!("M:{}/{}\n", ts.numerator, ts.denominator));
    out.push_str(&format!("L:1/{}\n", ts.denominator));
    out.push_str("K:C\n");
    for bar in &score.bars {
        let mut cursor = 0;
        for note in &bar.notes {
            if note.onset > cursor {
                out.push('z');
                push_duration(&mut out, note.onset - cursor);
                out.push(' ');
            }
            push_pitch(&mut out, note.pitch);
            push_duration(&mut out, note.duration);
            out.push(' ');
            cursor = note.onset + note.duration;
        }
        if bar.notes.is_empty() {
            out.push('z');
            push_duration(&mut out, ts.capacity_ticks());
            out.push(' ');
        }
        if out.ends_with(' ') {
            out.pop();
        }
        out.push('|');
    }
    out.push_str("]\n");
    Ok(out)
}
