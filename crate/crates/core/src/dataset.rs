//! Training/testing data model, file ingestion, and with-replacement subsampling.
//!
//! A [`Dataset`] is an ordered, indexed sequence of labeled examples. Duplicates
//! are permitted and counted with multiplicity, so drawing `k` indices with
//! replacement defines a probability space of exactly `n^k` ordered tuples.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// One labeled example: a finite real feature vector and a dense label in `[0, c)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub features: Vec<f64>,
    pub label: usize,
}

impl Example {
    pub fn new(features: Vec<f64>, label: usize) -> Self {
        Example { features, label }
    }
}

/// An immutable training or testing set.
///
/// Invariants: at least one example, all feature vectors share one dimension,
/// all features are finite, and every label is below the label-space size `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    examples: Vec<Example>,
    label_count: usize,
    dim: usize,
}

impl Dataset {
    /// Builds a dataset, inferring `c = max label + 1` unless `label_count`
    /// is given explicitly (test sets may omit some labels).
    pub fn new(examples: Vec<Example>, label_count: Option<usize>) -> Result<Self> {
        if examples.is_empty() {
            return Err(Error::Validation("dataset must contain at least one example".into()));
        }
        let dim = examples[0].features.len();
        let mut max_label = 0usize;
        for (i, ex) in examples.iter().enumerate() {
            if ex.features.len() != dim {
                return Err(Error::Validation(format!(
                    "example {i} has {} features, expected {dim}",
                    ex.features.len()
                )));
            }
            if ex.features.iter().any(|f| !f.is_finite()) {
                return Err(Error::Validation(format!("example {i} has a non-finite feature")));
            }
            max_label = max_label.max(ex.label);
        }
        let c = match label_count {
            Some(c) => {
                if max_label >= c {
                    return Err(Error::Validation(format!(
                        "label {max_label} is outside the declared label space of size {c}"
                    )));
                }
                c
            }
            None => max_label + 1,
        };
        Ok(Dataset { examples, label_count: c, dim })
    }

    /// Number of examples `n`.
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        false // n >= 1 by construction
    }

    /// Label-space size `c`.
    pub fn label_count(&self) -> usize {
        self.label_count
    }

    /// Feature dimension shared by all examples.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn example(&self, index: usize) -> &Example {
        &self.examples[index]
    }

    /// Widens the label space to `c` (labels already present must still fit).
    pub fn set_label_count(&mut self, c: usize) -> Result<()> {
        if let Some(ex) = self.examples.iter().find(|ex| ex.label >= c) {
            return Err(Error::Validation(format!(
                "label {} is outside the declared label space of size {c}",
                ex.label
            )));
        }
        self.label_count = c;
        Ok(())
    }
}

/// An ordered list of `k` indices into a dataset, drawn with replacement.
///
/// Order is preserved and duplicates are allowed: the ordered k-tuples are the
/// sample space, each with probability `1/n^k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subsample {
    indices: Vec<usize>,
}

impl Subsample {
    /// Wraps explicit indices, checking them against the dataset size.
    pub fn from_indices(indices: Vec<usize>, n: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::Validation("subsample size k must be at least 1".into()));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
            return Err(Error::Validation(format!(
                "subsample index {bad} out of range for dataset of size {n}"
            )));
        }
        Ok(Subsample { indices })
    }

    pub fn k(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }
}

/// Draws `k` indices independently and uniformly from `[0, n)`, with
/// replacement. Deterministic for a given seed, so parallel callers own
/// independent generator states by deriving their own seeds.
pub fn draw_subsample(dataset: &Dataset, k: usize, seed: u64) -> Result<Subsample> {
    if k == 0 {
        return Err(Error::Validation("subsample size k must be at least 1".into()));
    }
    let n = dataset.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let indices = (0..k).map(|_| rng.gen_range(0..n)).collect();
    Ok(Subsample { indices })
}

/// Loads a dataset from a UTF-8 CSV file with header `label,f0,...,f{d-1}`.
///
/// Labels must be non-negative integers; `c` is inferred as `max label + 1`
/// (use [`Dataset::set_label_count`] to override).
pub fn load_csv(path: &Path) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(file));

    let headers = reader
        .headers()
        .map_err(|e| Error::Format(format!("cannot read CSV header: {e}")))?
        .clone();
    if headers.is_empty() || headers.get(0) != Some("label") {
        return Err(Error::Format(
            "CSV header must start with `label` followed by feature columns".into(),
        ));
    }
    let dim = headers.len() - 1;

    let mut examples = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| match e.position() {
            Some(pos) => Error::Parse { line: pos.line(), msg: e.to_string() },
            None => Error::Format(e.to_string()),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != dim + 1 {
            return Err(Error::Parse {
                line,
                msg: format!("expected {} fields, found {}", dim + 1, record.len()),
            });
        }
        let label_field = record.get(0).unwrap();
        let label: usize = label_field.parse().map_err(|_| {
            Error::Validation(format!(
                "line {line}: label `{label_field}` is not a non-negative integer"
            ))
        })?;
        let mut features = Vec::with_capacity(dim);
        for (j, field) in record.iter().skip(1).enumerate() {
            let value: f64 = field.parse().map_err(|_| Error::Parse {
                line,
                msg: format!("feature f{j} `{field}` is not a number"),
            })?;
            features.push(value);
        }
        examples.push(Example::new(features, label));
    }
    if examples.is_empty() {
        return Err(Error::Validation(format!(
            "{}: no data rows after the header",
            path.display()
        )));
    }
    Dataset::new(examples, None)
}

/// Writes a dataset as CSV with the canonical `label,f0,...` header.
///
/// Floats are printed with their shortest round-trip representation, so a
/// written dataset re-loads element-wise identical.
pub fn save_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let mut write = |s: String| -> Result<()> {
        out.write_all(s.as_bytes()).map_err(|e| Error::io(path, e))
    };
    let header: Vec<String> = std::iter::once("label".to_string())
        .chain((0..dataset.dim()).map(|j| format!("f{j}")))
        .collect();
    write(header.join(","))?;
    write("\n".into())?;
    for ex in dataset.examples() {
        let mut row = ex.label.to_string();
        for f in &ex.features {
            row.push(',');
            row.push_str(&f.to_string());
        }
        row.push('\n');
        write(row)?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Loads an image/label pair in the big-endian IDX binary layout used by
/// MNIST. Pixels are scaled to `[0, 1]` and the label space is fixed at 10.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let images = read_all(images_path)?;
    let labels = read_all(labels_path)?;

    let img_magic = read_u32(&images, 0, images_path)?;
    if img_magic != IDX_IMAGES_MAGIC {
        return Err(Error::Format(format!(
            "{}: magic {img_magic:#010x}, expected {IDX_IMAGES_MAGIC:#010x}",
            images_path.display()
        )));
    }
    let lbl_magic = read_u32(&labels, 0, labels_path)?;
    if lbl_magic != IDX_LABELS_MAGIC {
        return Err(Error::Format(format!(
            "{}: magic {lbl_magic:#010x}, expected {IDX_LABELS_MAGIC:#010x}",
            labels_path.display()
        )));
    }

    let count = read_u32(&images, 4, images_path)? as usize;
    let rows = read_u32(&images, 8, images_path)? as usize;
    let cols = read_u32(&images, 12, images_path)? as usize;
    let lbl_count = read_u32(&labels, 4, labels_path)? as usize;
    if count != lbl_count {
        return Err(Error::Format(format!(
            "image count {count} does not match label count {lbl_count}"
        )));
    }
    let dim = rows * cols;
    let pixels = &images[16..];
    if pixels.len() != count * dim {
        return Err(Error::Format(format!(
            "{}: expected {} pixel bytes, found {}",
            images_path.display(),
            count * dim,
            pixels.len()
        )));
    }
    let label_bytes = &labels[8..];
    if label_bytes.len() != count {
        return Err(Error::Format(format!(
            "{}: expected {count} label bytes, found {}",
            labels_path.display(),
            label_bytes.len()
        )));
    }

    let mut examples = Vec::with_capacity(count);
    for i in 0..count {
        let label = label_bytes[i] as usize;
        if label > 9 {
            return Err(Error::Format(format!("label {label} at index {i} exceeds 9")));
        }
        let features = pixels[i * dim..(i + 1) * dim]
            .iter()
            .map(|&b| f64::from(b) / 255.0)
            .collect();
        examples.push(Example::new(features, label));
    }
    Dataset::new(examples, Some(10))
}

fn read_all(path: &Path) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(|e| Error::io(path, e))?;
    Ok(buf)
}

fn read_u32(bytes: &[u8], offset: usize, path: &Path) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Format(format!("{}: truncated file", path.display())))
}
