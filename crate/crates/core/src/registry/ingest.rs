use serde::Deserialize;

use super::{DatasetCard, DatasetTraits, ModelCard, Registry, RegistryError, Result, Scope};

fn json_error(file: &str, e: serde_json::Error) -> RegistryError {
    RegistryError::Parse {
        file: file.to_string(),
        line: e.line() as u64,
        column: e.column() as u64,
        message: e.to_string(),
    }
}

fn csv_error(file: &str, e: csv::Error) -> RegistryError {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    let message = match e.kind() {
        csv::ErrorKind::Deserialize { err, .. } => match err.field() {
            Some(i) => format!("field {}: {}", i + 1, err.kind()),
            None => err.kind().to_string(),
        },
        _ => e.to_string(),
    };
    RegistryError::Parse {
        file: file.to_string(),
        line,
        column: 0,
        message,
    }
}

/// Parses a model-card document (a JSON array), keeping file order.
pub fn parse_model_cards(bytes: &[u8]) -> Result<Vec<ModelCard>> {
    let cards: Vec<ModelCard> =
        serde_json::from_slice(bytes).map_err(|e| json_error("models.json", e))?;
    Registry::new(cards.clone(), Vec::new())?;
    Ok(cards)
}

/// Parses a dataset-card document (a JSON array), keeping file order.
pub fn parse_dataset_cards(bytes: &[u8]) -> Result<Vec<DatasetCard>> {
    let cards: Vec<DatasetCard> =
        serde_json::from_slice(bytes).map_err(|e| json_error("datasets.json", e))?;
    Registry::new(Vec::new(), cards.clone())?;
    Ok(cards)
}

/// Parses asserted dataset traits (a JSON array).
pub fn parse_traits(bytes: &[u8]) -> Result<Vec<DatasetTraits>> {
    serde_json::from_slice(bytes).map_err(|e| json_error("traits.json", e))
}

#[derive(Deserialize)]
struct PairRow {
    source: String,
    target: String,
}

/// Parses `transfers.csv` into raw `(source, target)` name pairs.
pub fn parse_transfer_pairs(bytes: &[u8]) -> Result<Vec<(String, String)>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes);
    rdr.deserialize::<PairRow>()
        .map(|r| {
            r.map(|p| (p.source, p.target))
                .map_err(|e| csv_error("transfers.csv", e))
        })
        .collect()
}

#[derive(Debug, Deserialize)]
pub(super) struct SampleRow {
    pub model: String,
    pub dataset: String,
    pub scope: Scope,
    pub sample_index: usize,
    pub iou: f64,
}

#[derive(Debug, Deserialize)]
pub(super) struct MeanRow {
    pub model: String,
    pub dataset: String,
    pub scope: Scope,
    pub mean_iou: f64,
}

pub(super) fn parse_sample_rows(bytes: &[u8]) -> Result<Vec<SampleRow>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes);
    rdr.deserialize()
        .map(|r| r.map_err(|e| csv_error("records.csv", e)))
        .collect()
}

pub(super) fn parse_mean_rows(bytes: &[u8]) -> Result<Vec<MeanRow>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes);
    rdr.deserialize()
        .map(|r| r.map_err(|e| csv_error("means.csv", e)))
        .collect()
}
