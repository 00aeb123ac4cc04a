#![allow(dead_code)]

pub mod oracle;
pub mod stub;

use std::path::PathBuf;

use semaug::{load_embeddings, parse_dataset, Dataset, EmbeddingTable};

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

pub fn fixture_bytes(name: &str) -> Vec<u8> {
    std::fs::read(fixture_path(name)).expect("fixture present")
}

pub fn fixture_dataset() -> Dataset {
    parse_dataset(&fixture_bytes("fixture_coco20.json")).expect("fixture parses")
}

pub fn fixture_table() -> EmbeddingTable {
    load_embeddings(fixture_bytes("vectors50.txt").as_slice()).expect("fixture vectors load")
}

/// `n` (caption, label name) pairs: every caption with each label of its own
/// image first, then captions paired with the labels of the following image.
pub fn caption_label_pairs(d: &Dataset, n: usize) -> Vec<(String, String)> {
    let index = d.index();
    let own = d.captions.iter().flat_map(|cap| {
        index
            .labels(cap.image_id)
            .into_iter()
            .map(|l| (cap.caption.clone(), l.name))
    });
    let cross = d.captions.iter().flat_map(|cap| {
        let pos = d.images.iter().position(|i| i.id == cap.image_id).unwrap();
        let next = d.images[(pos + 1) % d.images.len()].id;
        index
            .labels(next)
            .into_iter()
            .map(|l| (cap.caption.clone(), l.name))
    });
    let pairs: Vec<_> = own.chain(cross).take(n).collect();
    assert_eq!(pairs.len(), n, "fixture corpus too small");
    pairs
}
