//! Brute-force reference implementations the acceptance suite checks the
//! library against, written as directly as possible from the definitions
//! and sharing no code with the optimized paths.

use ceol_core::score::{Bar, Score};

pub fn naive_bar_similarity(a: &Bar, b: &Bar) -> f64 {
    let notes_a: Vec<(u8, u32, u32)> = a.notes.iter().map(|n| (n.pitch, n.onset, n.duration)).collect();
    let notes_b: Vec<(u8, u32, u32)> = b.notes.iter().map(|n| (n.pitch, n.onset, n.duration)).collect();
    let mut union: Vec<(u8, u32, u32)> = notes_a.clone();
    for n in &notes_b {
        if !union.contains(n) {
            union.push(*n);
        }
    }
    if union.is_empty() {
        return 1.0;
    }
    let intersection = notes_a.iter().filter(|n| notes_b.contains(n)).count();
    intersection as f64 / union.len() as f64
}

pub fn naive_lag_profile(scores: &[Score], max_lag: usize) -> Vec<f64> {
    let mut profile = Vec::with_capacity(max_lag);
    for lag in 1..=max_lag {
        let mut total = 0.0;
        for score in scores {
            for i in 0..score.bars.len() {
                if i + lag < score.bars.len() {
                    total += naive_bar_similarity(&score.bars[i], &score.bars[i + lag]);
                }
            }
        }
        profile.push(total / scores.len() as f64);
    }
    profile
}

pub fn naive_self_similarity(profile: &[f64]) -> f64 {
    let mut total = 0.0;
    for value in profile {
        total += value;
    }
    total / profile.len() as f64
}

pub fn naive_similarity_deviation(reference: &[f64], sample: &[f64]) -> f64 {
    assert_eq!(reference.len(), sample.len());
    let mut total = 0.0;
    for (r, s) in reference.iter().zip(sample) {
        total += (r - s).abs();
    }
    total / reference.len() as f64
}

pub fn naive_scale_consistency(score: &Score) -> f64 {
    let pitches: Vec<u8> = score
        .bars
        .iter()
        .flat_map(|b| b.notes.iter().map(|n| n.pitch))
        .collect();
    assert!(!pitches.is_empty());
    let mut best = 0usize;
    for root in 0..12u8 {
        let mut member = [false; 12];
        for step in [0u8, 2, 4, 5, 7, 9, 11] {
            member[((root + step) % 12) as usize] = true;
        }
        let fitting = pitches.iter().filter(|&&p| member[(p % 12) as usize]).count();
        if fitting > best {
            best = fitting;
        }
    }
    best as f64 / pitches.len() as f64
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        // Average the ranks across a run of equal values.
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &index in &order[i..=j] {
            out[index] = rank;
        }
        i = j + 1;
    }
    out
}

pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    assert!(x.len() >= 2);
    let rx = ranks(x);
    let ry = ranks(y);
    let n = x.len() as f64;
    let mean_x = rx.iter().sum::<f64>() / n;
    let mean_y = ry.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        cov += (a - mean_x) * (b - mean_y);
        var_x += (a - mean_x) * (a - mean_x);
        var_y += (b - mean_y) * (b - mean_y);
    }
    cov / (var_x.sqrt() * var_y.sqrt())
}
