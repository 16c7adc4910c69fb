use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::{ingest, EvaluationRecord, Registry, RegistryError, Result};

pub const MODELS_FILE: &str = "models.json";
pub const DATASETS_FILE: &str = "datasets.json";
pub const TRANSFERS_FILE: &str = "transfers.csv";
pub const RECORDS_FILE: &str = "records.csv";
pub const MEANS_FILE: &str = "means.csv";
pub const TRAITS_FILE: &str = "traits.json";

/// An immutable, shareable registry together with the sha256 digest of its
/// canonical serialization.
#[derive(Clone, Debug)]
pub struct Snapshot {
    registry: Arc<Registry>,
    digest: String,
}

impl Snapshot {
    pub fn new(registry: Registry) -> Snapshot {
        let registry = registry.canonical();
        let digest = hex::encode(Sha256::digest(registry.canonical_bytes()));
        Snapshot {
            registry: Arc::new(registry),
            digest,
        }
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    /// Lowercase hex sha256 of the canonical document.
    pub fn digest(&self) -> &str {
        &self.digest
    }

    pub fn load_dir(dir: &Path) -> Result<Snapshot> {
        Registry::load_dir(dir).map(Snapshot::new)
    }
}

impl std::ops::Deref for Snapshot {
    type Target = Registry;

    fn deref(&self) -> &Registry {
        &self.registry
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RegistryError + '_ {
    move |source| RegistryError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn read_optional(path: &Path) -> Result<Option<Vec<u8>>> {
    match fs::read(path) {
        Ok(b) => Ok(Some(b)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(io_err(path)(e)),
    }
}

#[derive(Serialize)]
struct SampleOut<'a> {
    model: &'a str,
    dataset: String,
    scope: super::Scope,
    sample_index: usize,
    iou: f64,
}

#[derive(Serialize)]
struct MeanOut<'a> {
    model: &'a str,
    dataset: String,
    scope: super::Scope,
    mean_iou: f64,
}

impl Registry {
    /// Copy with every collection sorted by name (records by model, unit,
    /// scope), so that equal content serializes identically regardless of
    /// ingestion order.
    pub fn canonical(&self) -> Registry {
        let mut r = self.clone();
        r.models.sort_by(|a, b| a.name.cmp(&b.name));
        r.datasets.sort_by(|a, b| a.name.cmp(&b.name));
        r.transfers.sort();
        r.traits.sort_by(|a, b| a.dataset.cmp(&b.dataset));
        r.records.sort_by_key(EvaluationRecord::key);
        r
    }

    /// Canonical JSON document used for digests.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(&self.canonical()).expect("registry serializes")
    }

    /// Builds a registry from a directory in the file layout written by
    /// [`Registry::write_dir`]. Only the two card files are required.
    pub fn load_dir(dir: &Path) -> Result<Registry> {
        let models_path = dir.join(MODELS_FILE);
        let datasets_path = dir.join(DATASETS_FILE);
        let models = ingest::parse_model_cards(&fs::read(&models_path).map_err(io_err(&models_path))?)?;
        let datasets =
            ingest::parse_dataset_cards(&fs::read(&datasets_path).map_err(io_err(&datasets_path))?)?;
        let mut reg = Registry::new(models, datasets)?;
        if let Some(bytes) = read_optional(&dir.join(TRANSFERS_FILE))? {
            reg = reg.with_transfers(&ingest::parse_transfer_pairs(&bytes)?)?;
        }
        if let Some(bytes) = read_optional(&dir.join(TRAITS_FILE))? {
            reg = reg.with_traits(ingest::parse_traits(&bytes)?)?;
        }
        let samples = read_optional(&dir.join(RECORDS_FILE))?;
        let means = read_optional(&dir.join(MEANS_FILE))?;
        if samples.is_some() || means.is_some() {
            reg = reg.ingest_records(samples.as_deref(), means.as_deref())?;
        }
        Ok(reg)
    }

    /// Serialized files of the canonical registry, as `(file name, bytes)`.
    pub fn to_files(&self) -> Vec<(&'static str, Vec<u8>)> {
        let r = self.canonical();
        let mut files = vec![
            (MODELS_FILE, pretty(&r.models)),
            (DATASETS_FILE, pretty(&r.datasets)),
        ];

        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["source", "target"]).expect("in-memory write");
        for t in &r.transfers {
            w.write_record([&t.source, &t.target]).expect("in-memory write");
        }
        files.push((TRANSFERS_FILE, w.into_inner().expect("flush")));

        let mut w = headerless();
        w.write_record(["model", "dataset", "scope", "sample_index", "iou"])
            .expect("in-memory write");
        for rec in &r.records {
            for (i, &iou) in rec.sample_ious.iter().enumerate() {
                w.serialize(SampleOut {
                    model: &rec.model,
                    dataset: rec.unit(),
                    scope: rec.scope,
                    sample_index: i,
                    iou,
                })
                .expect("in-memory write");
            }
        }
        files.push((RECORDS_FILE, w.into_inner().expect("flush")));

        let mut w = headerless();
        w.write_record(["model", "dataset", "scope", "mean_iou"])
            .expect("in-memory write");
        for rec in &r.records {
            w.serialize(MeanOut {
                model: &rec.model,
                dataset: rec.unit(),
                scope: rec.scope,
                mean_iou: rec.mean_iou,
            })
            .expect("in-memory write");
        }
        files.push((MEANS_FILE, w.into_inner().expect("flush")));

        files.push((TRAITS_FILE, pretty(&r.traits)));
        files
    }

    /// Writes the registry into `dir`, creating it if needed.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        for (name, bytes) in self.to_files() {
            let path = dir.join(name);
            fs::write(&path, bytes).map_err(io_err(&path))?;
        }
        Ok(())
    }
}

/// Writer whose header row is written explicitly, so empty tables still
/// carry one.
fn headerless() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new())
}

fn pretty<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("serializes");
    out.push(b'\n');
    out
}
