//! End-to-end pipeline: plan caption augmentations, generate their images,
//! write the augmented COCO dataset and mix it with the original.
//!
//! Output layout under `out_dir`:
//!
//! ```text
//! images/aug_000000.png ...   one PNG per successful job
//! annotations.json            augmented dataset (COCO)
//! failures.json               jobs that failed after retries
//! manifest.json               mixed training list (written by callers of `mix`)
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use futures::stream::{self, StreamExt};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::augment::{augment_caption, AugmentationConfig, AugmentedCaption, StrategyKind};
use crate::choice::{fingerprint, ChoiceSource};
use crate::coco::{write_dataset, CaptionAnnotation, Dataset, Extra, ImageRecord, LabelAnnotation};
use crate::embedding::EmbeddingProvider;
use crate::generation::{
    BackendConfig, GenerationError, GenerationRequest, Generator, RequestTemplate,
};
use crate::hash::fnv1a64;

pub const IMAGES_DIR: &str = "images";
pub const ANNOTATIONS_FILE: &str = "annotations.json";
pub const FAILURES_FILE: &str = "failures.json";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Image-record keys carrying augmentation provenance in `annotations.json`.
pub const STRATEGY_KEY: &str = "strategy";
pub const SOURCE_CAPTION_KEY: &str = "source_caption_id";
pub const SOURCE_IMAGE_KEY: &str = "source_image_id";

#[derive(Debug, Error)]
pub enum BuildError {
    #[error("ratio must be a finite nonnegative number, got {0}")]
    BadRatio(f64),
    #[error("no image in the dataset has a caption")]
    NoCaptions,
    #[error("cannot write to {path}: {source}")]
    OutputNotWritable {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("all {0} generation jobs failed")]
    AllJobsFailed(usize),
    #[error("ratio {ratio} needs {needed} augmented images but only {available} exist")]
    RatioUnsatisfiable {
        ratio: f64,
        needed: usize,
        available: usize,
    },
    #[error(transparent)]
    Generation(#[from] GenerationError),
}

/// Number of augmented images for `ratio` augmentations per original image.
///
/// `floor(ratio × originals)`, computed with a small tolerance so products
/// such as `2.3 × 10` are not truncated by binary rounding.
pub fn augmented_quota(ratio: f64, originals: usize) -> usize {
    (ratio * originals as f64 + 1e-9).floor() as usize
}

fn check_ratio(ratio: f64) -> Result<(), BuildError> {
    if ratio.is_finite() && ratio >= 0.0 {
        Ok(())
    } else {
        Err(BuildError::BadRatio(ratio))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationJob {
    pub ordinal: usize,
    pub source_image_id: u64,
    pub augmented: AugmentedCaption,
    pub request: GenerationRequest,
    /// Relative to the output directory.
    pub output_file: String,
}

pub fn output_file_for(ordinal: usize) -> String {
    format!("{IMAGES_DIR}/aug_{ordinal:06}.png")
}

/// Seed for round `round` of image cycling. Round 0 uses the run seed
/// itself so a single pass keys streams exactly by `run_seed ^ fingerprint`.
fn round_seed(run_seed: u64, round: usize) -> u64 {
    if round == 0 {
        return run_seed;
    }
    let mut bytes = run_seed.to_le_bytes().to_vec();
    bytes.extend_from_slice(&(round as u64).to_le_bytes());
    fnv1a64(&bytes)
}

/// Choice stream used by the planner for caption `caption_id` in `round`.
/// Exposed so tests can rebuild a job's choices independently.
pub fn caption_stream(run_seed: u64, round: usize, caption_id: u64) -> ChoiceSource {
    ChoiceSource::from_seed(round_seed(run_seed, round) ^ fingerprint(caption_id))
}

fn image_stream(seed: u64, image_id: u64) -> ChoiceSource {
    let mut key = b"image:".to_vec();
    key.extend_from_slice(&image_id.to_le_bytes());
    ChoiceSource::from_seed(seed ^ fnv1a64(&key))
}

/// Generation seed for job `ordinal`: FNV-1a-64 over the ordinal and the run
/// seed (both little-endian).
pub fn generation_seed(ordinal: usize, run_seed: u64) -> u64 {
    let mut bytes = (ordinal as u64).to_le_bytes().to_vec();
    bytes.extend_from_slice(&run_seed.to_le_bytes());
    fnv1a64(&bytes)
}

/// Plans `floor(ratio × images)` augmentation jobs.
///
/// Images are visited in ascending id order, cycling as often as needed.
/// Each visit picks one of the image's captions uniformly and augments it.
/// Images without captions are skipped and the next image fills the slot.
pub fn plan_augmentation<P: EmbeddingProvider + ?Sized>(
    d: &Dataset,
    provider: &P,
    cfg: &AugmentationConfig,
    template: &RequestTemplate,
    ratio: f64,
    run_seed: u64,
) -> Result<Vec<GenerationJob>, BuildError> {
    check_ratio(ratio)?;
    let quota = augmented_quota(ratio, d.images.len());
    if quota == 0 {
        return Ok(Vec::new());
    }

    let index = d.index();
    let mut image_ids: Vec<u64> = d.images.iter().map(|i| i.id).collect();
    image_ids.sort_unstable();
    if image_ids.iter().all(|id| index.captions(*id).is_empty()) {
        return Err(BuildError::NoCaptions);
    }

    let mut jobs = Vec::with_capacity(quota);
    let mut warned = BTreeSet::new();
    let mut cursor = 0usize;
    while jobs.len() < quota {
        let round = cursor / image_ids.len();
        let image_id = image_ids[cursor % image_ids.len()];
        cursor += 1;

        let captions = index.captions(image_id);
        if captions.is_empty() {
            if warned.insert(image_id) {
                tracing::warn!(image_id, "image has no captions; skipping");
            }
            continue;
        }
        let seed = round_seed(run_seed, round);
        let caption = captions[image_stream(seed, image_id).index(captions.len())];
        let labels = index.labels(image_id);
        let mut choices = caption_stream(run_seed, round, caption.id);
        let augmented = augment_caption(caption, &labels, &d.taxonomy, provider, cfg, &mut choices);

        let ordinal = jobs.len();
        jobs.push(GenerationJob {
            ordinal,
            source_image_id: image_id,
            request: template.request(augmented.text.clone(), generation_seed(ordinal, run_seed)),
            augmented,
            output_file: output_file_for(ordinal),
        });
    }
    Ok(jobs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobFailure {
    pub ordinal: usize,
    pub output_file: String,
    pub source_caption_id: u64,
    pub prompt: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildOutput {
    pub dataset: Dataset,
    pub failures: Vec<JobFailure>,
}

fn writable(path: &Path) -> impl FnOnce(std::io::Error) -> BuildError + '_ {
    move |source| BuildError::OutputNotWritable {
        path: path.to_path_buf(),
        source,
    }
}

/// Generates every job's image and writes the augmented dataset.
///
/// Image ids continue after the original dataset's largest id
/// (`max + ordinal + 1`). Failed jobs are left out of the dataset and listed
/// in `failures.json`; the build only fails outright when every job does.
pub async fn build_augmented_dataset(
    original: &Dataset,
    jobs: &[GenerationJob],
    backend: &BackendConfig,
    out_dir: &Path,
) -> Result<BuildOutput, BuildError> {
    let images_dir = out_dir.join(IMAGES_DIR);
    std::fs::create_dir_all(&images_dir).map_err(writable(&images_dir))?;
    let generator = Generator::new(backend.clone())?;

    let outcomes: Vec<Result<(), String>> = stream::iter(jobs.iter().map(|job| {
        let generator = &generator;
        async move {
            let result = generator
                .generate(job.request.clone())
                .await
                .map_err(|e| e.to_string())?;
            let path = out_dir.join(&job.output_file);
            tokio::fs::write(&path, &result.image)
                .await
                .map_err(|e| format!("writing {}: {e}", path.display()))
        }
    }))
    .buffered(backend.max_in_flight)
    .collect()
    .await;

    let base_id = original.max_image_id();
    let mut dataset = Dataset {
        taxonomy: original.taxonomy.clone(),
        ..Dataset::default()
    };
    let mut failures = Vec::new();
    let mut label_id = 0u64;
    for (job, outcome) in jobs.iter().zip(outcomes) {
        if let Err(error) = outcome {
            tracing::warn!(ordinal = job.ordinal, %error, "generation job failed");
            failures.push(JobFailure {
                ordinal: job.ordinal,
                output_file: job.output_file.clone(),
                source_caption_id: job.augmented.source_caption_id,
                prompt: job.request.prompt.clone(),
                error,
            });
            continue;
        }
        let image_id = base_id + job.ordinal as u64 + 1;
        let mut extra = Extra::new();
        extra.insert(STRATEGY_KEY.into(), job.augmented.strategy.as_str().into());
        extra.insert(
            SOURCE_CAPTION_KEY.into(),
            job.augmented.source_caption_id.into(),
        );
        extra.insert(SOURCE_IMAGE_KEY.into(), job.source_image_id.into());
        extra.insert("generation_seed".into(), job.request.seed.into());
        dataset.images.push(ImageRecord {
            id: image_id,
            file_name: job.output_file.clone(),
            width: job.request.width,
            height: job.request.height,
            extra,
        });
        dataset.captions.push(CaptionAnnotation::new(
            job.ordinal as u64 + 1,
            image_id,
            job.augmented.text.clone(),
        ));
        for category_id in &job.augmented.labels_after {
            label_id += 1;
            dataset
                .labels
                .push(LabelAnnotation::new(label_id, image_id, *category_id));
        }
    }

    let failures_path = out_dir.join(FAILURES_FILE);
    let mut failures_json = serde_json::to_vec_pretty(&failures).expect("serializable");
    failures_json.push(b'\n');
    std::fs::write(&failures_path, failures_json).map_err(writable(&failures_path))?;

    if !jobs.is_empty() && failures.len() == jobs.len() {
        return Err(BuildError::AllJobsFailed(jobs.len()));
    }

    let annotations_path = out_dir.join(ANNOTATIONS_FILE);
    std::fs::write(&annotations_path, write_dataset(&dataset))
        .map_err(writable(&annotations_path))?;
    Ok(BuildOutput { dataset, failures })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Original,
    Augmented,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub image_file: String,
    pub labels: BTreeSet<u64>,
    pub source: Source,
    pub strategy: Option<StrategyKind>,
    pub source_caption_id: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixManifest {
    pub entries: Vec<ManifestEntry>,
    pub ratio: f64,
    pub run_seed: u64,
}

impl MixManifest {
    pub fn to_json(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("serializable");
        out.push(b'\n');
        out
    }

    /// Referenced files that do not exist. Augmented paths resolve against
    /// `augmented_root`; original paths against `original_root` and are only
    /// checked when it is given.
    pub fn missing_files(
        &self,
        original_root: Option<&Path>,
        augmented_root: &Path,
    ) -> Vec<PathBuf> {
        self.entries
            .iter()
            .filter_map(|e| match e.source {
                Source::Augmented => Some(augmented_root.join(&e.image_file)),
                Source::Original => original_root.map(|root| root.join(&e.image_file)),
            })
            .filter(|p| !p.exists())
            .collect()
    }
}

/// Combines every original image with `floor(ratio × originals)` augmented
/// images (lowest ids first) and shuffles the result with `run_seed`.
pub fn mix(
    original: &Dataset,
    augmented: &Dataset,
    ratio: f64,
    run_seed: u64,
) -> Result<MixManifest, BuildError> {
    check_ratio(ratio)?;
    let needed = augmented_quota(ratio, original.images.len());
    if augmented.images.len() < needed {
        return Err(BuildError::RatioUnsatisfiable {
            ratio,
            needed,
            available: augmented.images.len(),
        });
    }

    let label_sets = |d: &Dataset| {
        let mut sets: BTreeMap<u64, BTreeSet<u64>> = BTreeMap::new();
        for l in &d.labels {
            sets.entry(l.image_id).or_default().insert(l.category_id);
        }
        sets
    };
    let original_labels = label_sets(original);
    let augmented_labels = label_sets(augmented);

    let mut originals: Vec<&ImageRecord> = original.images.iter().collect();
    originals.sort_by_key(|i| i.id);
    let mut chosen: Vec<&ImageRecord> = augmented.images.iter().collect();
    chosen.sort_by_key(|i| i.id);
    chosen.truncate(needed);

    let mut entries: Vec<ManifestEntry> = originals
        .into_iter()
        .map(|img| ManifestEntry {
            image_file: img.file_name.clone(),
            labels: original_labels.get(&img.id).cloned().unwrap_or_default(),
            source: Source::Original,
            strategy: None,
            source_caption_id: None,
        })
        .collect();
    entries.extend(chosen.into_iter().map(|img| {
        ManifestEntry {
            image_file: img.file_name.clone(),
            labels: augmented_labels.get(&img.id).cloned().unwrap_or_default(),
            source: Source::Augmented,
            strategy: img
                .extra
                .get(STRATEGY_KEY)
                .and_then(|v| serde_json::from_value(v.clone()).ok()),
            source_caption_id: img.extra.get(SOURCE_CAPTION_KEY).and_then(Value::as_u64),
        }
    }));

    entries.shuffle(&mut ChaCha8Rng::seed_from_u64(run_seed));
    Ok(MixManifest {
        entries,
        ratio,
        run_seed,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CategoryCount {
    pub original: usize,
    pub mixed: usize,
    /// Share of mixed entries carrying the label minus the share of
    /// original entries carrying it.
    pub frequency_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub total: usize,
    pub original: usize,
    pub augmented: usize,
    pub per_strategy: BTreeMap<StrategyKind, usize>,
    pub per_category: BTreeMap<u64, CategoryCount>,
}

pub fn stats(manifest: &MixManifest) -> StatsReport {
    let mut per_strategy: BTreeMap<StrategyKind, usize> =
        StrategyKind::ALL.iter().map(|s| (*s, 0)).collect();
    let mut per_category: BTreeMap<u64, CategoryCount> = BTreeMap::new();
    let mut original = 0;
    let mut augmented = 0;

    for entry in &manifest.entries {
        match entry.source {
            Source::Original => original += 1,
            Source::Augmented => {
                augmented += 1;
                if let Some(s) = entry.strategy {
                    *per_strategy.entry(s).or_default() += 1;
                }
            }
        }
        for label in &entry.labels {
            let count = per_category.entry(*label).or_default();
            count.mixed += 1;
            if entry.source == Source::Original {
                count.original += 1;
            }
        }
    }

    let total = manifest.entries.len();
    let share = |n: usize, of: usize| if of == 0 { 0.0 } else { n as f64 / of as f64 };
    for count in per_category.values_mut() {
        count.frequency_delta = share(count.mixed, total) - share(count.original, original);
    }

    StatsReport {
        total,
        original,
        augmented,
        per_strategy,
        per_category,
    }
}

impl fmt::Display for StatsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "entries: {} ({} original, {} augmented)",
            self.total, self.original, self.augmented
        )?;
        let strategies: Vec<String> = self
            .per_strategy
            .iter()
            .map(|(s, n)| format!("{s}={n}"))
            .collect();
        writeln!(f, "strategies: {}", strategies.join(" "))?;
        writeln!(f, "categories: {}", self.per_category.len())?;
        for (id, c) in &self.per_category {
            writeln!(
                f,
                "  {id:>4}  original {:>5}  mixed {:>5}  delta {:+.4}",
                c.original, c.mixed, c.frequency_delta
            )?;
        }
        Ok(())
    }
}
