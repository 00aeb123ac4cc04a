//! COCO caption + instance annotation model.
//!
//! Caption files (`captions_*.json`) and instance files (`instances_*.json`)
//! share the same top-level layout; an annotation carrying `caption` is a
//! caption annotation and one carrying `category_id` is a label annotation.
//! Both shapes may appear in one document and are always merged internally.
//!
//! Fields this module does not interpret (`bbox`, `license`, `info`, ...)
//! are kept as opaque JSON and written back out unchanged.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use serde_json::{Map, Value};
use thiserror::Error;

/// Opaque JSON members preserved across a parse/write cycle.
pub type Extra = BTreeMap<String, Value>;

#[derive(Debug, Clone, PartialEq)]
pub struct Category {
    pub id: u64,
    pub name: String,
    pub supercategory: String,
    pub extra: Extra,
}

impl Category {
    pub fn new(id: u64, name: impl Into<String>, supercategory: impl Into<String>) -> Self {
        Self {
            id,
            name: name.into(),
            supercategory: supercategory.into(),
            extra: Extra::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageRecord {
    pub id: u64,
    pub file_name: String,
    pub width: u32,
    pub height: u32,
    pub extra: Extra,
}

impl ImageRecord {
    pub fn new(id: u64, file_name: impl Into<String>, width: u32, height: u32) -> Self {
        Self {
            id,
            file_name: file_name.into(),
            width,
            height,
            extra: Extra::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaptionAnnotation {
    pub id: u64,
    pub image_id: u64,
    pub caption: String,
    pub extra: Extra,
}

impl CaptionAnnotation {
    pub fn new(id: u64, image_id: u64, caption: impl Into<String>) -> Self {
        Self {
            id,
            image_id,
            caption: caption.into(),
            extra: Extra::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelAnnotation {
    pub id: u64,
    pub image_id: u64,
    pub category_id: u64,
    pub extra: Extra,
}

impl LabelAnnotation {
    pub fn new(id: u64, image_id: u64, category_id: u64) -> Self {
        Self {
            id,
            image_id,
            category_id,
            extra: Extra::new(),
        }
    }
}

/// A merged caption + label dataset.
///
/// Values produced by [`parse_dataset`] are valid and sorted by id within
/// each record list.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub images: Vec<ImageRecord>,
    pub captions: Vec<CaptionAnnotation>,
    pub labels: Vec<LabelAnnotation>,
    pub taxonomy: Vec<Category>,
    /// Top-level members other than images/annotations/categories.
    pub extra: Extra,
}

/// The record family an id or reference belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RecordKind {
    Image,
    Caption,
    Label,
    Category,
}

impl fmt::Display for RecordKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RecordKind::Image => "image",
            RecordKind::Caption => "caption",
            RecordKind::Label => "label",
            RecordKind::Category => "category",
        })
    }
}

/// One invariant violation found by [`validate`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Violation {
    DuplicateId {
        kind: RecordKind,
        id: u64,
    },
    /// A record of `kind` with id `id` points at a missing `target`.
    DanglingReference {
        kind: RecordKind,
        id: u64,
        target: RecordKind,
        target_id: u64,
    },
    DuplicateCategoryName {
        name: String,
    },
    InvalidField {
        kind: RecordKind,
        id: u64,
        field: &'static str,
        reason: &'static str,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateId { kind, id } => write!(f, "duplicate {kind} id {id}"),
            Violation::DanglingReference {
                kind,
                id,
                target,
                target_id,
            } => write!(f, "{kind} {id} references missing {target} {target_id}"),
            Violation::DuplicateCategoryName { name } => {
                write!(f, "duplicate category name {name:?}")
            }
            Violation::InvalidField {
                kind,
                id,
                field,
                reason,
            } => write!(f, "{kind} {id}: field `{field}` {reason}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn len(&self) -> usize {
        self.violations.len()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum CocoError {
    #[error("malformed JSON: {0}")]
    MalformedJson(String),
    #[error("missing field `{0}`")]
    MissingField(String),
    #[error("field `{field}` has an invalid value: {reason}")]
    InvalidField { field: String, reason: String },
    #[error("{kind} {id} references a missing record")]
    DanglingReference { kind: RecordKind, id: u64 },
    #[error("duplicate {kind} id {id}")]
    DuplicateId { kind: RecordKind, id: u64 },
    #[error("invalid dataset: {0}")]
    Invalid(Violation),
    #[error("unknown image id {0}")]
    UnknownImage(u64),
    #[error("unknown category id {0}")]
    UnknownCategory(u64),
}

/// Parses and validates a COCO annotation document.
pub fn parse_dataset(raw: &[u8]) -> Result<Dataset, CocoError> {
    let dataset = parse_unchecked(raw)?;
    let report = validate(&dataset);
    match report.violations.into_iter().next() {
        None => Ok(dataset),
        Some(Violation::DuplicateId { kind, id }) => Err(CocoError::DuplicateId { kind, id }),
        Some(Violation::DanglingReference { kind, id, .. }) => {
            Err(CocoError::DanglingReference { kind, id })
        }
        Some(other) => Err(CocoError::Invalid(other)),
    }
}

/// Parses a COCO document into canonical (id-sorted) form without checking
/// dataset invariants. Only JSON shape errors are reported.
pub fn parse_unchecked(raw: &[u8]) -> Result<Dataset, CocoError> {
    let root: Value =
        serde_json::from_slice(raw).map_err(|e| CocoError::MalformedJson(e.to_string()))?;
    let Value::Object(mut root) = root else {
        return Err(CocoError::MalformedJson(
            "top level is not an object".to_string(),
        ));
    };

    let images = take_array(&mut root, "images")?
        .into_iter()
        .map(parse_image)
        .collect::<Result<Vec<_>, _>>()?;

    let mut captions = Vec::new();
    let mut labels = Vec::new();
    for entry in take_array(&mut root, "annotations")? {
        let mut obj = into_object(entry, "annotations[]")?;
        let has_caption = obj.contains_key("caption");
        let has_category = obj.contains_key("category_id");
        if !has_caption && !has_category {
            return Err(CocoError::MissingField(
                "annotations[].caption or annotations[].category_id".to_string(),
            ));
        }
        let id = take_u64(&mut obj, "id")?;
        let image_id = take_u64(&mut obj, "image_id")?;
        match (has_caption, has_category) {
            (true, true) => {
                let caption = take_string(&mut obj, "caption")?;
                let category_id = take_u64(&mut obj, "category_id")?;
                let extra: Extra = obj.into_iter().collect();
                captions.push(CaptionAnnotation {
                    id,
                    image_id,
                    caption,
                    extra: extra.clone(),
                });
                labels.push(LabelAnnotation {
                    id,
                    image_id,
                    category_id,
                    extra,
                });
            }
            (true, false) => {
                let caption = take_string(&mut obj, "caption")?;
                captions.push(CaptionAnnotation {
                    id,
                    image_id,
                    caption,
                    extra: obj.into_iter().collect(),
                });
            }
            _ => {
                let category_id = take_u64(&mut obj, "category_id")?;
                labels.push(LabelAnnotation {
                    id,
                    image_id,
                    category_id,
                    extra: obj.into_iter().collect(),
                });
            }
        }
    }

    // Caption-only COCO files carry no taxonomy.
    let categories = if root.contains_key("categories") {
        take_array(&mut root, "categories")?
    } else {
        Vec::new()
    };
    let taxonomy = categories
        .into_iter()
        .map(parse_category)
        .collect::<Result<Vec<_>, _>>()?;

    let mut dataset = Dataset {
        images,
        captions,
        labels,
        taxonomy,
        extra: root.into_iter().collect(),
    };
    dataset.canonicalize();
    Ok(dataset)
}

fn take_array(root: &mut Map<String, Value>, key: &str) -> Result<Vec<Value>, CocoError> {
    match root.remove(key) {
        Some(Value::Array(items)) => Ok(items),
        Some(_) => Err(CocoError::InvalidField {
            field: key.to_string(),
            reason: "expected an array".to_string(),
        }),
        None => Err(CocoError::MissingField(key.to_string())),
    }
}

fn into_object(value: Value, ctx: &str) -> Result<Map<String, Value>, CocoError> {
    match value {
        Value::Object(obj) => Ok(obj),
        _ => Err(CocoError::InvalidField {
            field: ctx.to_string(),
            reason: "expected an object".to_string(),
        }),
    }
}

fn take_u64(obj: &mut Map<String, Value>, key: &str) -> Result<u64, CocoError> {
    let value = obj
        .remove(key)
        .ok_or_else(|| CocoError::MissingField(key.to_string()))?;
    // Some exporters write integral floats ("id": 12.0).
    let parsed = value.as_u64().or_else(|| {
        value
            .as_f64()
            .filter(|f| f.fract() == 0.0 && *f >= 0.0 && *f <= u64::MAX as f64)
            .map(|f| f as u64)
    });
    parsed.ok_or_else(|| CocoError::InvalidField {
        field: key.to_string(),
        reason: format!("expected a nonnegative integer, found {value}"),
    })
}

fn take_u32(obj: &mut Map<String, Value>, key: &str) -> Result<u32, CocoError> {
    let v = take_u64(obj, key)?;
    u32::try_from(v).map_err(|_| CocoError::InvalidField {
        field: key.to_string(),
        reason: format!("{v} does not fit in 32 bits"),
    })
}

fn take_string(obj: &mut Map<String, Value>, key: &str) -> Result<String, CocoError> {
    match obj.remove(key) {
        Some(Value::String(s)) => Ok(s),
        Some(other) => Err(CocoError::InvalidField {
            field: key.to_string(),
            reason: format!("expected a string, found {other}"),
        }),
        None => Err(CocoError::MissingField(key.to_string())),
    }
}

fn parse_image(value: Value) -> Result<ImageRecord, CocoError> {
    let mut obj = into_object(value, "images[]")?;
    Ok(ImageRecord {
        id: take_u64(&mut obj, "id")?,
        file_name: take_string(&mut obj, "file_name")?,
        width: take_u32(&mut obj, "width")?,
        height: take_u32(&mut obj, "height")?,
        extra: obj.into_iter().collect(),
    })
}

fn parse_category(value: Value) -> Result<Category, CocoError> {
    let mut obj = into_object(value, "categories[]")?;
    Ok(Category {
        id: take_u64(&mut obj, "id")?,
        name: take_string(&mut obj, "name")?,
        supercategory: take_string(&mut obj, "supercategory")?,
        extra: obj.into_iter().collect(),
    })
}

/// Serializes a dataset as COCO JSON in canonical form: records sorted by
/// id, object keys sorted, two-space indentation.
pub fn write_dataset(d: &Dataset) -> Vec<u8> {
    let mut canonical = d.clone();
    canonical.canonicalize();

    let mut root: Map<String, Value> = canonical.extra.into_iter().collect();
    root.insert(
        "images".to_string(),
        Value::Array(
            canonical
                .images
                .into_iter()
                .map(|img| {
                    let mut obj = img.extra;
                    obj.insert("id".into(), img.id.into());
                    obj.insert("file_name".into(), img.file_name.into());
                    obj.insert("width".into(), img.width.into());
                    obj.insert("height".into(), img.height.into());
                    Value::Object(obj.into_iter().collect())
                })
                .collect(),
        ),
    );
    let captions = canonical.captions.into_iter().map(|c| {
        let mut obj = c.extra;
        obj.insert("id".into(), c.id.into());
        obj.insert("image_id".into(), c.image_id.into());
        obj.insert("caption".into(), c.caption.into());
        Value::Object(obj.into_iter().collect())
    });
    let labels = canonical.labels.into_iter().map(|l| {
        let mut obj = l.extra;
        obj.insert("id".into(), l.id.into());
        obj.insert("image_id".into(), l.image_id.into());
        obj.insert("category_id".into(), l.category_id.into());
        Value::Object(obj.into_iter().collect())
    });
    root.insert(
        "annotations".to_string(),
        Value::Array(captions.chain(labels).collect()),
    );
    root.insert(
        "categories".to_string(),
        Value::Array(
            canonical
                .taxonomy
                .into_iter()
                .map(|c| {
                    let mut obj = c.extra;
                    obj.insert("id".into(), c.id.into());
                    obj.insert("name".into(), c.name.into());
                    obj.insert("supercategory".into(), c.supercategory.into());
                    Value::Object(obj.into_iter().collect())
                })
                .collect(),
        ),
    );

    let mut out = serde_json::to_vec_pretty(&Value::Object(root))
        .expect("serializing a JSON value cannot fail");
    out.push(b'\n');
    out
}

impl Dataset {
    /// Sorts every record list by id. Stable, so duplicate ids keep their
    /// relative order.
    pub fn canonicalize(&mut self) {
        self.images.sort_by_key(|r| r.id);
        self.captions.sort_by_key(|r| r.id);
        self.labels.sort_by_key(|r| r.id);
        self.taxonomy.sort_by_key(|r| r.id);
    }

    pub fn image(&self, id: u64) -> Option<&ImageRecord> {
        self.images.iter().find(|i| i.id == id)
    }

    pub fn category(&self, id: u64) -> Option<&Category> {
        self.taxonomy.iter().find(|c| c.id == id)
    }

    pub fn max_image_id(&self) -> u64 {
        self.images.iter().map(|i| i.id).max().unwrap_or(0)
    }

    /// Builds per-image lookup tables for captions and labels.
    pub fn index(&self) -> DatasetIndex<'_> {
        let mut captions: HashMap<u64, Vec<&CaptionAnnotation>> = HashMap::new();
        for c in &self.captions {
            captions.entry(c.image_id).or_default().push(c);
        }
        let mut labels: HashMap<u64, BTreeSet<u64>> = HashMap::new();
        for l in &self.labels {
            labels.entry(l.image_id).or_default().insert(l.category_id);
        }
        let categories = self.taxonomy.iter().map(|c| (c.id, c)).collect();
        DatasetIndex {
            captions,
            labels,
            categories,
        }
    }
}

/// Borrowed per-image lookups over a [`Dataset`].
pub struct DatasetIndex<'a> {
    captions: HashMap<u64, Vec<&'a CaptionAnnotation>>,
    labels: HashMap<u64, BTreeSet<u64>>,
    categories: HashMap<u64, &'a Category>,
}

impl<'a> DatasetIndex<'a> {
    /// Captions of an image in ascending id order.
    pub fn captions(&self, image_id: u64) -> &[&'a CaptionAnnotation] {
        self.captions.get(&image_id).map_or(&[], |v| v.as_slice())
    }

    pub fn label_ids(&self, image_id: u64) -> BTreeSet<u64> {
        self.labels.get(&image_id).cloned().unwrap_or_default()
    }

    pub fn labels(&self, image_id: u64) -> Vec<Category> {
        self.labels
            .get(&image_id)
            .into_iter()
            .flatten()
            .filter_map(|id| self.categories.get(id).map(|c| (*c).clone()))
            .collect()
    }
}

/// Categories labelled on `image_id`, deduplicated and in ascending id order.
pub fn labels_for_image(d: &Dataset, image_id: u64) -> Result<Vec<Category>, CocoError> {
    if d.image(image_id).is_none() {
        return Err(CocoError::UnknownImage(image_id));
    }
    let ids: BTreeSet<u64> = d
        .labels
        .iter()
        .filter(|l| l.image_id == image_id)
        .map(|l| l.category_id)
        .collect();
    Ok(ids
        .into_iter()
        .filter_map(|id| d.category(id).cloned())
        .collect())
}

/// Every other category sharing `category_id`'s supercategory, ascending by id.
pub fn supercategory_peers(
    taxonomy: &[Category],
    category_id: u64,
) -> Result<Vec<Category>, CocoError> {
    let target = taxonomy
        .iter()
        .find(|c| c.id == category_id)
        .ok_or(CocoError::UnknownCategory(category_id))?;
    let mut peers: Vec<Category> = taxonomy
        .iter()
        .filter(|c| c.id != category_id && c.supercategory == target.supercategory)
        .cloned()
        .collect();
    peers.sort_by_key(|c| c.id);
    peers.dedup_by_key(|c| c.id);
    Ok(peers)
}

/// Checks every dataset invariant and reports each violation found.
pub fn validate(d: &Dataset) -> ValidationReport {
    let mut violations = Vec::new();

    let image_ids = unique_ids(
        RecordKind::Image,
        d.images.iter().map(|r| r.id),
        &mut violations,
    );
    unique_ids(
        RecordKind::Caption,
        d.captions.iter().map(|r| r.id),
        &mut violations,
    );
    unique_ids(
        RecordKind::Label,
        d.labels.iter().map(|r| r.id),
        &mut violations,
    );
    let category_ids = unique_ids(
        RecordKind::Category,
        d.taxonomy.iter().map(|r| r.id),
        &mut violations,
    );

    let mut invalid = |kind, id, field, reason| {
        violations.push(Violation::InvalidField {
            kind,
            id,
            field,
            reason,
        })
    };

    for img in &d.images {
        if img.id == 0 {
            invalid(RecordKind::Image, img.id, "id", "must be positive");
        }
        if img.width == 0 {
            invalid(RecordKind::Image, img.id, "width", "must be at least 1");
        }
        if img.height == 0 {
            invalid(RecordKind::Image, img.id, "height", "must be at least 1");
        }
        if img.file_name.is_empty() {
            invalid(RecordKind::Image, img.id, "file_name", "must not be empty");
        }
    }
    for cap in &d.captions {
        if cap.id == 0 {
            invalid(RecordKind::Caption, cap.id, "id", "must be positive");
        }
        if cap.caption.trim().is_empty() {
            invalid(RecordKind::Caption, cap.id, "caption", "must not be blank");
        }
    }
    for lab in &d.labels {
        if lab.id == 0 {
            invalid(RecordKind::Label, lab.id, "id", "must be positive");
        }
    }
    for cat in &d.taxonomy {
        if cat.id == 0 {
            invalid(RecordKind::Category, cat.id, "id", "must be positive");
        }
        if cat.name.is_empty() {
            invalid(RecordKind::Category, cat.id, "name", "must not be empty");
        }
        if cat.supercategory.is_empty() {
            invalid(
                RecordKind::Category,
                cat.id,
                "supercategory",
                "must not be empty",
            );
        }
    }

    let mut names = HashSet::new();
    let mut reported_names = HashSet::new();
    for cat in &d.taxonomy {
        if !names.insert(cat.name.as_str()) && reported_names.insert(cat.name.as_str()) {
            violations.push(Violation::DuplicateCategoryName {
                name: cat.name.clone(),
            });
        }
    }

    for cap in &d.captions {
        if !image_ids.contains(&cap.image_id) {
            violations.push(Violation::DanglingReference {
                kind: RecordKind::Caption,
                id: cap.id,
                target: RecordKind::Image,
                target_id: cap.image_id,
            });
        }
    }
    for lab in &d.labels {
        if !image_ids.contains(&lab.image_id) {
            violations.push(Violation::DanglingReference {
                kind: RecordKind::Label,
                id: lab.id,
                target: RecordKind::Image,
                target_id: lab.image_id,
            });
        }
        if !category_ids.contains(&lab.category_id) {
            violations.push(Violation::DanglingReference {
                kind: RecordKind::Label,
                id: lab.id,
                target: RecordKind::Category,
                target_id: lab.category_id,
            });
        }
    }

    ValidationReport { violations }
}

fn unique_ids(
    kind: RecordKind,
    ids: impl Iterator<Item = u64>,
    violations: &mut Vec<Violation>,
) -> HashSet<u64> {
    let mut seen = HashSet::new();
    let mut reported = HashSet::new();
    for id in ids {
        if !seen.insert(id) && reported.insert(id) {
            violations.push(Violation::DuplicateId { kind, id });
        }
    }
    seen
}
