//! Reference computations written independently of the library.

use std::hash::Hasher;

use semaug::embedding::{tokenize, EmbeddingTable};

/// Exhaustive reference: recompute every token's similarity with plain
/// arithmetic and take the first maximum.
pub fn brute_force_match(
    caption: &str,
    label: &str,
    table: &EmbeddingTable,
    floor: f64,
) -> Option<(usize, f64)> {
    let mean = |words: Vec<String>| -> Option<Vec<f64>> {
        let vecs: Vec<&[f64]> = words.iter().filter_map(|w| table.get(w)).collect();
        if vecs.is_empty() {
            return None;
        }
        let mut acc = vec![0.0; table.dimension()];
        for v in &vecs {
            for (a, x) in acc.iter_mut().zip(v.iter()) {
                *a += x;
            }
        }
        if vecs.len() > 1 {
            acc.iter_mut().for_each(|a| *a /= vecs.len() as f64);
        }
        Some(acc)
    };
    let label_vec = mean(label.split_whitespace().map(str::to_lowercase).collect())?;
    let mut scores = Vec::new();
    for (i, tok) in tokenize(caption).iter().enumerate() {
        let Some(v) = table.get(&tok.text) else {
            continue;
        };
        let dot: f64 = v.iter().zip(&label_vec).map(|(a, b)| a * b).sum();
        let nv: f64 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        let nl: f64 = label_vec.iter().map(|a| a * a).sum::<f64>().sqrt();
        if nv == 0.0 || nl == 0.0 {
            continue;
        }
        scores.push((i, (dot / (nv * nl)).clamp(-1.0, 1.0)));
    }
    let best = scores
        .iter()
        .map(|(_, s)| *s)
        .fold(f64::NEG_INFINITY, f64::max);
    scores
        .into_iter()
        .find(|(_, s)| *s == best)
        .filter(|(_, s)| *s >= floor)
}

/// FNV-1a-64 from the `fnv` crate.
pub fn reference_fnv(bytes: &[u8]) -> u64 {
    let mut h = fnv::FnvHasher::default();
    h.write(bytes);
    h.finish()
}

/// Expected top-left, top-right, bottom-left, bottom-right colors.
pub fn expected_quadrants(prompt: &str, seed: u64) -> [[u8; 3]; 4] {
    let digest = (reference_fnv(prompt.as_bytes()) ^ seed).to_be_bytes();
    let doubled: Vec<u8> = digest.iter().chain(digest.iter()).copied().collect();
    std::array::from_fn(|k| [doubled[3 * k], doubled[3 * k + 1], doubled[3 * k + 2]])
}

/// Corner pixels of a decoded PNG, in the same quadrant order.
pub fn corner_colors(png: &[u8]) -> [[u8; 3]; 4] {
    let img = image::load_from_memory(png).unwrap().to_rgb8();
    let (w, h) = img.dimensions();
    [
        img.get_pixel(0, 0).0,
        img.get_pixel(w - 1, 0).0,
        img.get_pixel(0, h - 1).0,
        img.get_pixel(w - 1, h - 1).0,
    ]
}
