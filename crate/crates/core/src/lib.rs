//! Semantic caption augmentation for image-classification datasets.
//!
//! Captions of a COCO dataset are rewritten (prefix, suffix, label
//! replacement or all three), each rewritten caption is rendered by a
//! text-to-image backend, and the resulting images are written as a second
//! COCO dataset that can be mixed into training at a chosen ratio.

pub mod augment;
pub mod builder;
pub mod choice;
pub mod coco;
pub mod embedding;
pub mod generation;
pub mod hash;
pub mod matcher;

pub use augment::{
    apply_compound, apply_prefix, apply_replacement, apply_suffix, augment_caption,
    AugmentationConfig, AugmentedCaption, Replacement, StrategyKind,
};
pub use builder::{
    build_augmented_dataset, mix, plan_augmentation, stats, BuildError, BuildOutput, GenerationJob,
    MixManifest, StatsReport,
};
pub use choice::ChoiceSource;
pub use coco::{
    labels_for_image, parse_dataset, supercategory_peers, validate, write_dataset, Category,
    CocoError, Dataset, ValidationReport,
};
pub use embedding::{
    cosine_similarity, load_embeddings, tokenize, EmbeddingProvider, EmbeddingTable, Token,
};
pub use generation::{
    mock_generate, BackendConfig, BackendKind, GenerationError, GenerationRequest,
    GenerationResult, Generator, RequestTemplate,
};
pub use matcher::{match_label_word, MatchResult};
