//! Synthetic tune generator with controllable repetition structure.
//!
//! Each tune picks a major key, draws one short motif per distinct letter of
//! the form string, lays the motifs out in form order, and then applies rare
//! single-note chromatic mutations. Before mutation every tune is exactly
//! diatonic and every repeated section is bar-identical, which gives the
//! evaluation metrics known ground truth values.

use thiserror::Error;

use crate::rng::{stable_hash, StableRng};
use crate::score::{Bar, Note, Score, TimeSignature, TICKS_PER_BEAT};

/// Scale steps of the major scale, in semitones above the root.
pub const MAJOR_SCALE: [u8; 7] = [0, 2, 4, 5, 7, 9, 11];

#[derive(Debug, Clone, PartialEq)]
pub struct FormSpec {
    /// Section layout; each distinct ASCII uppercase letter names one motif.
    pub form: String,
    /// Bars per motif.
    pub motif_bars: usize,
    pub time_signature: TimeSignature,
    /// Chance that any laid-out note is shifted a semitone off the scale.
    pub mutation_probability: f64,
    /// Major-key roots (pitch classes) to draw from, one per tune.
    pub key_roots: Vec<u8>,
}

impl Default for FormSpec {
    fn default() -> Self {
        FormSpec {
            form: "AABB".to_string(),
            motif_bars: 2,
            time_signature: TimeSignature::new(4, 4),
            mutation_probability: 0.1,
            key_roots: (0..12).collect(),
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ToyGenError {
    #[error("n_tunes must be at least 1")]
    NoTunes,
    #[error("form must be a non-empty string of ASCII uppercase letters, got {form:?}")]
    BadForm { form: String },
    #[error("motif_bars must be at least 1")]
    NoMotifBars,
    #[error("mutation_probability {p} is outside [0, 1]")]
    BadMutationProbability { p: f64 },
    #[error("key_roots must be non-empty pitch classes below 12")]
    BadKeyRoots,
    #[error("time signature {ts} is not valid")]
    BadTimeSignature { ts: TimeSignature },
}

fn validate_spec(n_tunes: usize, spec: &FormSpec) -> Result<(), ToyGenError> {
    if n_tunes == 0 {
        return Err(ToyGenError::NoTunes);
    }
    if spec.form.is_empty() || !spec.form.chars().all(|c| c.is_ascii_uppercase()) {
        return Err(ToyGenError::BadForm {
            form: spec.form.clone(),
        });
    }
    if spec.motif_bars == 0 {
        return Err(ToyGenError::NoMotifBars);
    }
    if !(0.0..=1.0).contains(&spec.mutation_probability) {
        return Err(ToyGenError::BadMutationProbability {
            p: spec.mutation_probability,
        });
    }
    if spec.key_roots.is_empty() || spec.key_roots.iter().any(|&r| r >= 12) {
        return Err(ToyGenError::BadKeyRoots);
    }
    if !spec.time_signature.is_valid() {
        return Err(ToyGenError::BadTimeSignature {
            ts: spec.time_signature,
        });
    }
    Ok(())
}

/// Map a diatonic degree (0..=14, two octaves) to a pitch in the key.
fn degree_pitch(root: u8, degree: usize) -> u8 {
    let octave = (degree / 7) as u8;
    60 + root + 12 * octave + MAJOR_SCALE[degree % 7]
}

fn draw_motif(rng: &mut StableRng, spec: &FormSpec, root: u8, degree: &mut usize) -> Vec<Bar> {
    let capacity = spec.time_signature.capacity_ticks();
    (0..spec.motif_bars)
        .map(|_| {
            // Bars open on the tonic, so bar openings are as predictable as
            // the walk itself even for models with short context windows.
            *degree = 7;
            let mut notes = Vec::new();
            let mut cursor = 0;
            while cursor < capacity {
                let duration = TICKS_PER_BEAT.min(capacity - cursor);
                // Mostly repeated notes, rare small leaps. Strong beats hold the
                // line harder than weak beats, so conditional sharpness varies
                // with metric position instead of being one flat archetype.
                let (stay, near) = if cursor % (2 * TICKS_PER_BEAT) == 0 {
                    (0.85, 0.055)
                } else {
                    (0.76, 0.085)
                };
                let u = rng.uniform();
                let step: i64 = if u < stay {
                    0
                } else if u < stay + near {
                    -1
                } else if u < stay + 2.0 * near {
                    1
                } else if u < (1.0 + stay + 2.0 * near) / 2.0 {
                    -2
                } else {
                    2
                };
                *degree = (*degree as i64 + step).clamp(0, 14) as usize;
                notes.push(Note::new(degree_pitch(root, *degree), cursor, duration));
                cursor += duration;
            }
            Bar::new(spec.time_signature, notes)
        })
        .collect()
}

pub fn generate_toy_corpus(
    n_tunes: usize,
    seed: u64,
    spec: &FormSpec,
) -> Result<Vec<Score>, ToyGenError> {
    validate_spec(n_tunes, spec)?;

    let mut letters: Vec<char> = Vec::new();
    for c in spec.form.chars() {
        if !letters.contains(&c) {
            letters.push(c);
        }
    }

    let scores = (0..n_tunes)
        .map(|index| {
            let mut rng = StableRng::new(stable_hash(&[seed, index as u64]));
            let root = spec.key_roots[rng.below(spec.key_roots.len() as u64) as usize];
            let mut degree = 7;

            let mut motifs: Vec<Vec<Bar>> = Vec::with_capacity(letters.len());
            for _ in &letters {
                // Redraw on the unlikely event of a duplicate motif, so each
                // letter really names distinct material.
                let mut motif = draw_motif(&mut rng, spec, root, &mut degree);
                for _ in 0..16 {
                    if !motifs.contains(&motif) {
                        break;
                    }
                    motif = draw_motif(&mut rng, spec, root, &mut degree);
                }
                motifs.push(motif);
            }

            let mut bars: Vec<Bar> = Vec::with_capacity(spec.form.len() * spec.motif_bars);
            for c in spec.form.chars() {
                let motif = &motifs[letters.iter().position(|&l| l == c).unwrap()];
                bars.extend(motif.iter().cloned());
            }

            for bar in &mut bars {
                for note in &mut bar.notes {
                    if rng.uniform() < spec.mutation_probability {
                        let delta = if rng.uniform() < 0.5 { -1 } else { 1 };
                        note.pitch = (i16::from(note.pitch) + delta).clamp(0, 127) as u8;
                    }
                }
            }

            Score::new(format!("toy-{index:05}"), bars)
        })
        .collect();
    Ok(scores)
}
