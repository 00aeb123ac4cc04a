//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Run with `cargo test -p semaug --test acceptance`.

mod common;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;
use std::time::{Duration, Instant};

use common::oracle::{brute_force_match, corner_colors, expected_quadrants};
use common::stub::{self, Behavior};
use rand::distr::{Alphanumeric, SampleString};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use semaug::augment::{apply_compound, apply_prefix, apply_replacement, apply_suffix};
use semaug::builder::Source;
use semaug::matcher::DEFAULT_MIN_SCORE;
use semaug::{
    augment_caption, build_augmented_dataset, cosine_similarity, match_label_word, mix,
    mock_generate, parse_dataset, plan_augmentation, tokenize, validate, write_dataset,
    AugmentationConfig, AugmentedCaption, BackendConfig, ChoiceSource, Dataset, GenerationRequest,
    Generator, RequestTemplate, StrategyKind,
};

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

fn within(started: Instant, limit: Duration) -> Result<(), String> {
    let elapsed = started.elapsed();
    if elapsed < limit {
        Ok(())
    } else {
        Err(format!("took {elapsed:?}, limit {limit:?}"))
    }
}

fn coco_round_trip() -> Check {
    let started = Instant::now();
    let raw = common::fixture_bytes("fixture_coco20.json");
    let parsed = parse_dataset(&raw).map_err(|e| e.to_string())?;
    ensure!(
        parsed.images.len() == 20,
        "fixture has {} images",
        parsed.images.len()
    );
    let reparsed = parse_dataset(&write_dataset(&parsed)).map_err(|e| e.to_string())?;
    ensure!(reparsed == parsed, "fixture differs after round trip");

    let mut detail = "fixture: 0 diffs".to_string();
    match std::env::var("SEMAUG_COCO_ANNOTATIONS") {
        Ok(path) => {
            let raw = std::fs::read(&path).map_err(|e| format!("{path}: {e}"))?;
            let real = parse_dataset(&raw).map_err(|e| e.to_string())?;
            let again = parse_dataset(&write_dataset(&real)).map_err(|e| e.to_string())?;
            ensure!(again == real, "{path} differs after round trip");
            detail.push_str(&format!(
                "; {path}: 0 diffs over {} images",
                real.images.len()
            ));
        }
        Err(_) => detail.push_str("; real COCO file not configured (SEMAUG_COCO_ANNOTATIONS)"),
    }
    within(started, Duration::from_secs(5))?;
    Ok(detail)
}

fn label_matcher_oracle() -> Check {
    let started = Instant::now();
    let d = common::fixture_dataset();
    let t = common::fixture_table();
    let mut agree = 0;
    for (caption, label) in common::caption_label_pairs(&d, 200) {
        let got = match_label_word(&caption, &label, &t, DEFAULT_MIN_SCORE)
            .map_err(|e| e.to_string())?
            .map(|m| m.token);
        let want = brute_force_match(&caption, &label, &t, DEFAULT_MIN_SCORE)
            .map(|(i, _)| tokenize(&caption)[i].clone());
        if got == want {
            agree += 1;
        }
    }
    ensure!(agree == 200, "agreement {agree}/200");
    let woman = match_label_word(
        "a woman sitting on a couch",
        "person",
        &t,
        DEFAULT_MIN_SCORE,
    )
    .map_err(|e| e.to_string())?
    .map(|m| m.token.text);
    ensure!(
        woman.as_deref() == Some("woman"),
        "person matched {woman:?}"
    );
    within(started, Duration::from_secs(10))?;
    Ok("200/200 agree; person -> woman".into())
}

fn cosine_properties() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for i in 0..10_000 {
        let dim = rng.random_range(1..=300);
        let u: Vec<f64> = (0..dim).map(|_| rng.random_range(-10.0..10.0)).collect();
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-10.0..10.0)).collect();
        let alpha = 10f64.powf(rng.random_range(-4.0..4.0));
        let uv = cosine_similarity(&u, &v).map_err(|e| e.to_string())?;
        let vu = cosine_similarity(&v, &u).map_err(|e| e.to_string())?;
        let uu = cosine_similarity(&u, &u).map_err(|e| e.to_string())?;
        let scaled: Vec<f64> = u.iter().map(|x| x * alpha).collect();
        let su = cosine_similarity(&scaled, &v).map_err(|e| e.to_string())?;
        ensure!((-1.0..=1.0).contains(&uv), "pair {i}: {uv} out of range");
        ensure!((uv - vu).abs() <= 1e-9, "pair {i}: asymmetric");
        ensure!((uu - 1.0).abs() <= 1e-9, "pair {i}: self similarity {uu}");
        ensure!((uv - su).abs() <= 1e-9, "pair {i}: not scale invariant");
    }
    Ok("10000 pairs within 1e-9".into())
}

fn augment_all(d: &Dataset, seed: u64) -> Vec<AugmentedCaption> {
    let t = common::fixture_table();
    let cfg = AugmentationConfig::default();
    let index = d.index();
    d.captions
        .iter()
        .map(|cap| {
            let labels = index.labels(cap.image_id);
            let mut choices = ChoiceSource::for_caption(seed, cap.id);
            augment_caption(cap, &labels, &d.taxonomy, &t, &cfg, &mut choices)
        })
        .collect()
}

fn augmenter_suite() -> Check {
    let d = common::fixture_dataset();
    let t = common::fixture_table();
    let cfg = AugmentationConfig::default();
    let index = d.index();

    let a = serde_json::to_vec(&augment_all(&d, 42)).unwrap();
    let b = serde_json::to_vec(&augment_all(&d, 42)).unwrap();
    ensure!(a == b, "seed 42 runs differ");

    let supercategory: BTreeMap<u64, &str> = d
        .taxonomy
        .iter()
        .map(|c| (c.id, c.supercategory.as_str()))
        .collect();
    let (mut swaps, mut violations) = (0, 0);
    for run in 0..500u64 {
        let cap = &d.captions[run as usize % d.captions.len()];
        let labels = index.labels(cap.image_id);
        let mut choices = ChoiceSource::for_caption(run, cap.id);
        let out = apply_replacement(&cap.caption, &labels, &d.taxonomy, &t, &cfg, &mut choices);
        for r in &out.replacements {
            swaps += 1;
            if supercategory[&r.old_category_id] != supercategory[&r.new_category_id] {
                violations += 1;
            }
        }
    }
    ensure!(
        violations == 0,
        "{violations} of {swaps} swaps left the supercategory"
    );

    for n in 0..100u64 {
        let cap = &d.captions[n as usize % d.captions.len()];
        let labels = index.labels(cap.image_id);
        let stream = ChoiceSource::for_caption(1000 + n, cap.id);
        let mut compound_choices = stream.clone();
        let compound = apply_compound(
            &cap.caption,
            &labels,
            &d.taxonomy,
            &t,
            &cfg,
            &mut compound_choices,
        );
        let mut manual = stream;
        let prefix = &cfg.prefixes[manual.index(cfg.prefixes.len())];
        let suffix = &cfg.suffixes[manual.index(cfg.suffixes.len())];
        let framed = apply_suffix(&apply_prefix(&cap.caption, prefix), suffix);
        let replaced = apply_replacement(&framed, &labels, &d.taxonomy, &t, &cfg, &mut manual);
        ensure!(
            compound == replaced,
            "compound differs on caption {}",
            cap.id
        );
    }

    let n = 10_000u64;
    let mut counts: BTreeMap<StrategyKind, u64> = BTreeMap::new();
    for id in 1..=n {
        let cap = &d.captions[id as usize % d.captions.len()];
        let mut probe = cap.clone();
        probe.id = id;
        let labels = index.labels(cap.image_id);
        let mut choices = ChoiceSource::for_caption(42, id);
        let aug = augment_caption(&probe, &labels, &d.taxonomy, &t, &cfg, &mut choices);
        *counts.entry(aug.strategy).or_default() += 1;
    }
    let mut freqs = Vec::new();
    for s in StrategyKind::ALL {
        let f = counts.get(&s).copied().unwrap_or(0) as f64 / n as f64;
        ensure!((f - 0.25).abs() <= 0.02, "{s} frequency {f}");
        freqs.push(format!("{s}={f:.4}"));
    }
    Ok(format!(
        "deterministic; 0/{swaps} supercategory violations; 100/100 compound; {}",
        freqs.join(" ")
    ))
}

fn snapshot(dir: &Path, out: &mut BTreeMap<String, Vec<u8>>, root: &Path) {
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            snapshot(&path, out, root);
        } else {
            let rel = path
                .strip_prefix(root)
                .unwrap()
                .to_string_lossy()
                .into_owned();
            out.insert(rel, std::fs::read(&path).unwrap());
        }
    }
}

async fn run_pipeline(dir: &Path) -> Result<(usize, usize, usize), String> {
    let d = common::fixture_dataset();
    let jobs = plan_augmentation(
        &d,
        &common::fixture_table(),
        &AugmentationConfig::default(),
        &RequestTemplate::default(),
        1.0,
        42,
    )
    .map_err(|e| e.to_string())?;
    let out = build_augmented_dataset(&d, &jobs, &BackendConfig::mock(), dir)
        .await
        .map_err(|e| e.to_string())?;
    let manifest = mix(&d, &out.dataset, 1.0, 42).map_err(|e| e.to_string())?;
    std::fs::write(dir.join("manifest.json"), manifest.to_json()).map_err(|e| e.to_string())?;

    let pngs = std::fs::read_dir(dir.join("images"))
        .map_err(|e| e.to_string())?
        .filter(|e| {
            e.as_ref()
                .is_ok_and(|e| e.path().extension().is_some_and(|x| x == "png"))
        })
        .count();
    let written = std::fs::read(dir.join("annotations.json")).map_err(|e| e.to_string())?;
    let violations = validate(&parse_dataset(&written).map_err(|e| e.to_string())?).len();
    ensure!(
        manifest.missing_files(None, dir).is_empty(),
        "manifest references missing files"
    );
    let augmented = manifest
        .entries
        .iter()
        .filter(|e| e.source == Source::Augmented)
        .count();
    ensure!(augmented == 20, "{augmented} augmented entries");
    Ok((pngs, violations, manifest.entries.len()))
}

async fn mock_pipeline() -> Check {
    let started = Instant::now();
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (pngs, violations, entries) = run_pipeline(a.path()).await?;
    ensure!(pngs == 20, "{pngs} PNGs");
    ensure!(violations == 0, "{violations} validation violations");
    ensure!(entries == 40, "{entries} manifest entries");
    run_pipeline(b.path()).await?;
    let (mut sa, mut sb) = (BTreeMap::new(), BTreeMap::new());
    snapshot(a.path(), &mut sa, a.path());
    snapshot(b.path(), &mut sb, b.path());
    let differing: Vec<_> = sa.keys().filter(|k| sa.get(*k) != sb.get(*k)).collect();
    ensure!(
        sa.len() == sb.len() && differing.is_empty(),
        "rerun differs: {differing:?}"
    );
    within(started, Duration::from_secs(30))?;
    Ok(format!(
        "20 PNGs, 0 violations, 40 entries, {} files byte-identical on rerun",
        sa.len()
    ))
}

fn small(prompt: &str, seed: u64) -> GenerationRequest {
    GenerationRequest {
        width: 64,
        height: 64,
        ..GenerationRequest::new(prompt, seed)
    }
}

async fn generation_client() -> Check {
    // Bounded concurrency.
    let slow = stub::spawn(Behavior {
        latency: Duration::from_millis(100),
        ..Default::default()
    })
    .await;
    let generator = Generator::new(BackendConfig {
        max_in_flight: 4,
        ..BackendConfig::remote(&slow.url)
    })
    .map_err(|e| e.to_string())?;
    let results = generator
        .batch_generate((0..12).map(|i| small(&format!("p{i}"), i)).collect())
        .await;
    ensure!(
        results.iter().all(Result::is_ok),
        "concurrency batch had failures"
    );
    ensure!(slow.peak() <= 4, "peak in-flight {} > 4", slow.peak());

    // Retry schedule.
    let flaky = stub::spawn(Behavior {
        fail_first: 3,
        ..Default::default()
    })
    .await;
    let generator = Generator::new(BackendConfig::remote(&flaky.url)).map_err(|e| e.to_string())?;
    generator
        .generate(small("a cat", 1))
        .await
        .map_err(|e| format!("retry run failed: {e}"))?;
    let arrivals = flaky.arrivals();
    ensure!(arrivals.len() == 4, "{} attempts", arrivals.len());
    let mut gaps = Vec::new();
    for (i, expected) in [500.0, 1000.0, 2000.0].into_iter().enumerate() {
        let gap = arrivals[i + 1].duration_since(arrivals[i]).as_secs_f64() * 1000.0;
        ensure!(
            (gap - expected).abs() <= expected * 0.5,
            "retry {} after {gap:.0} ms",
            i + 1
        );
        gaps.push(format!("{gap:.0}"));
    }

    // Failure isolation.
    let poisoned = stub::spawn(Behavior {
        poison: Some("POISON".into()),
        ..Default::default()
    })
    .await;
    let generator = Generator::new(BackendConfig {
        retries: 0,
        ..BackendConfig::remote(&poisoned.url)
    })
    .map_err(|e| e.to_string())?;
    let results = generator
        .batch_generate(
            ["a", "b", "POISON", "d", "e"]
                .iter()
                .map(|p| small(p, 1))
                .collect(),
        )
        .await;
    let ok = results.iter().filter(|r| r.is_ok()).count();
    ensure!(ok == 4 && results[2].is_err(), "{ok} successes");

    Ok(format!(
        "peak {} <= 4; retry gaps {} ms; 4/5 succeed with one poisoned",
        slow.peak(),
        gaps.join("/")
    ))
}

fn mock_image_hash() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut seen = HashSet::new();
    for _ in 0..100 {
        let len = rng.random_range(1..64);
        let prompt = Alphanumeric.sample_string(&mut rng, len);
        let seed: u64 = rng.random();
        let got = corner_colors(&mock_generate(&small(&prompt, seed)).image);
        let want = expected_quadrants(&prompt, seed);
        ensure!(got == want, "{prompt:?}/{seed}: {got:?} vs {want:?}");
        seen.insert(prompt);
    }
    Ok(format!("{} prompts exact", seen.len()))
}

fn main() {
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(4)
        .enable_all()
        .build()
        .expect("tokio runtime");

    let results: Vec<(&str, Check)> = vec![
        ("coco round trip", coco_round_trip()),
        ("label matcher oracle", label_matcher_oracle()),
        ("cosine properties", cosine_properties()),
        ("augmenter suite", augmenter_suite()),
        (
            "mock pipeline end to end",
            runtime.block_on(mock_pipeline()),
        ),
        ("generation client", runtime.block_on(generation_client())),
        ("mock image hash", mock_image_hash()),
    ];

    let mut failed = BTreeSet::new();
    for (name, result) in &results {
        match result {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(reason) => {
                println!("FAIL  {name}: {reason}");
                failed.insert(*name);
            }
        }
    }
    println!(
        "{}/{} criteria passed",
        results.len() - failed.len(),
        results.len()
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
