mod common;

use std::io::Write;

use common::oracle::brute_force_match;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use semaug::embedding::{load_embeddings, tokenize};
use semaug::matcher::{match_label_word, DEFAULT_MIN_SCORE};

#[test]
fn fixture_table_shape() {
    let t = common::fixture_table();
    assert_eq!(t.dimension(), 50);
    let lines = std::fs::read_to_string(common::fixture_path("vectors50.txt"))
        .unwrap()
        .lines()
        .count();
    assert_eq!(t.len(), lines);
}

#[test]
fn ten_thousand_word_file_loads() {
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let mut file = tempfile::NamedTempFile::new().unwrap();
    for i in 0..10_000 {
        let values: Vec<String> = (0..50)
            .map(|_| format!("{:.5}", rng.random_range(-1.0..1.0)))
            .collect();
        writeln!(file, "w{i:05} {}", values.join(" ")).unwrap();
    }
    file.flush().unwrap();
    let t = load_embeddings(std::io::BufReader::new(file.reopen().unwrap())).unwrap();
    assert_eq!((t.dimension(), t.len()), (50, 10_000));
}

#[test]
fn corpus_tokens_are_clean() {
    let d = common::fixture_dataset();
    for cap in &d.captions {
        let chars: Vec<char> = cap.caption.chars().collect();
        for tok in tokenize(&cap.caption) {
            assert!(!tok.text.is_empty());
            assert!(!tok.text.chars().any(char::is_whitespace));
            assert!(!tok.text.starts_with(|c: char| c.is_ascii_punctuation()));
            assert!(!tok.text.ends_with(|c: char| c.is_ascii_punctuation()));
            let slice: String = chars[tok.start..tok.end].iter().collect();
            assert_eq!(slice.to_lowercase(), tok.text);
        }
    }
}

#[test]
fn woman_stands_for_person() {
    let t = common::fixture_table();
    let m = match_label_word(
        "a woman sitting on a couch",
        "person",
        &t,
        DEFAULT_MIN_SCORE,
    )
    .unwrap()
    .unwrap();
    assert_eq!(m.token.text, "woman");
}

#[test]
fn agrees_with_exhaustive_scan() {
    let d = common::fixture_dataset();
    let t = common::fixture_table();
    let pairs = common::caption_label_pairs(&d, 200);
    let mut matched = 0;
    for (caption, label) in &pairs {
        let got = match_label_word(caption, label, &t, DEFAULT_MIN_SCORE).unwrap();
        let want = brute_force_match(caption, label, &t, DEFAULT_MIN_SCORE);
        let tokens = tokenize(caption);
        match (got, want) {
            (None, None) => {}
            (Some(m), Some((idx, score))) => {
                assert_eq!(m.token, tokens[idx], "{caption} / {label}");
                assert!((m.score - score).abs() < 1e-12);
                matched += 1;
            }
            (got, want) => panic!("{caption} / {label}: {got:?} vs {want:?}"),
        }
    }
    // Most own-image pairs name their label.
    assert!(matched > 120, "only {matched} matches");
}

#[test]
fn scaling_the_table_keeps_winners() {
    let d = common::fixture_dataset();
    let t = common::fixture_table();
    let pairs = common::caption_label_pairs(&d, 200);
    for alpha in [0.01, 3.5, 1e4] {
        let scaled = t.scaled(alpha);
        for (caption, label) in &pairs {
            let a = match_label_word(caption, label, &t, -1.0)
                .unwrap()
                .map(|m| m.token);
            let b = match_label_word(caption, label, &scaled, -1.0)
                .unwrap()
                .map(|m| m.token);
            assert_eq!(a, b);
        }
    }
}

#[test]
fn raising_the_floor_only_flips_to_no_match() {
    let d = common::fixture_dataset();
    let t = common::fixture_table();
    for (caption, label) in common::caption_label_pairs(&d, 200) {
        let base = match_label_word(&caption, &label, &t, -1.0)
            .unwrap()
            .unwrap();
        for floor in [0.0, 0.2, 0.35, 0.5, 0.8, 0.95] {
            if let Some(m) = match_label_word(&caption, &label, &t, floor).unwrap() {
                assert_eq!(m.token, base.token);
            } else {
                assert!(base.score < floor);
            }
        }
    }
}

#[test]
fn cosine_properties_on_random_pairs() {
    use semaug::cosine_similarity;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..10_000 {
        let dim = rng.random_range(1..64);
        let u: Vec<f64> = (0..dim).map(|_| rng.random_range(-5.0..5.0)).collect();
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-5.0..5.0)).collect();
        let alpha = 10f64.powf(rng.random_range(-3.0..3.0));
        let s = cosine_similarity(&u, &v).unwrap();
        assert!((-1.0..=1.0).contains(&s));
        assert!((s - cosine_similarity(&v, &u).unwrap()).abs() < 1e-9);
        let scaled: Vec<f64> = u.iter().map(|x| x * alpha).collect();
        assert!((s - cosine_similarity(&scaled, &v).unwrap()).abs() < 1e-9);
        assert!((cosine_similarity(&u, &u).unwrap() - 1.0).abs() < 1e-9);
    }
}
