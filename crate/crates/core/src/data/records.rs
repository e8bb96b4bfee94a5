//! Metadata records and the CSV formats around them.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FEATURE_COUNT: usize = 12;

/// Canonical feature names, in schema order.
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "Focus", "Eyes", "Face", "Near", "Action", "Accessory", "Group", "Collage", "Human",
    "Occlusion", "Info", "Blur",
];

/// Column headers of the competition CSV, in schema order.
pub const CSV_HEADERS: [&str; FEATURE_COUNT] = [
    "Subject Focus", "Eyes", "Face", "Near", "Action", "Accessory", "Group", "Collage", "Human",
    "Occlusion", "Info", "Blur",
];

const EYES: usize = 1;
const BLUR: usize = 11;

/// Schema position of a column header, matched case-insensitively against
/// both the canonical names and the CSV header variants.
pub fn feature_index(header: &str) -> Option<usize> {
    let h = header.trim();
    FEATURE_NAMES
        .iter()
        .zip(CSV_HEADERS.iter())
        .position(|(n, c)| n.eq_ignore_ascii_case(h) || c.eq_ignore_ascii_case(h))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetadataRecord {
    pub id: String,
    pub features: [u8; FEATURE_COUNT],
    pub pawpularity: Option<u8>,
    pub image_path: Option<PathBuf>,
}

impl MetadataRecord {
    pub fn new(id: impl Into<String>, features: [u8; FEATURE_COUNT], pawpularity: Option<u8>) -> Self {
        Self {
            id: id.into(),
            features,
            pawpularity,
            image_path: None,
        }
    }

    pub fn label(&self) -> Option<f64> {
        self.pawpularity.map(f64::from)
    }
}

enum Column {
    Id,
    Feature(usize),
    Pawpularity,
}

pub fn parse_csv(path: impl AsRef<Path>) -> Result<Vec<MetadataRecord>> {
    parse_csv_reader(File::open(path)?)
}

/// Parses the competition CSV: `Id`, the 12 features in any order, and an
/// optional `Pawpularity` column.
pub fn parse_csv_reader(reader: impl Read) -> Result<Vec<MetadataRecord>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();

    let mut columns = Vec::with_capacity(headers.len());
    let mut seen = [false; FEATURE_COUNT];
    let (mut has_id, mut has_label) = (false, false);
    for h in headers.iter() {
        let col = if h.trim().eq_ignore_ascii_case("id") {
            has_id = true;
            Column::Id
        } else if h.trim().eq_ignore_ascii_case("pawpularity") {
            has_label = true;
            Column::Pawpularity
        } else if let Some(i) = feature_index(h) {
            if seen[i] {
                return Err(Error::Schema(format!("feature column `{h}` appears twice")));
            }
            seen[i] = true;
            Column::Feature(i)
        } else {
            return Err(Error::Schema(format!("unknown column `{h}`")));
        };
        columns.push(col);
    }
    if !has_id {
        return Err(Error::Schema("missing `Id` column".into()));
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        return Err(Error::Schema(format!("missing feature column `{}`", CSV_HEADERS[i])));
    }
    log::debug!("csv header ok (labels: {has_label})");

    let mut records = Vec::new();
    let mut ids = HashSet::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let row_err = |message: String| Error::Row { line, message };

        let mut id = String::new();
        let mut features = [0u8; FEATURE_COUNT];
        let mut pawpularity = None;
        for (col, field) in columns.iter().zip(row.iter()) {
            let field = field.trim();
            match col {
                Column::Id => id = field.to_string(),
                Column::Feature(i) => {
                    features[*i] = match field {
                        "0" => 0,
                        "1" => 1,
                        other => {
                            return Err(row_err(format!(
                                "`{}` must be 0 or 1, got `{other}`",
                                CSV_HEADERS[*i]
                            )))
                        }
                    }
                }
                Column::Pawpularity if field.is_empty() => {}
                Column::Pawpularity => match field.parse::<u8>() {
                    Ok(v) if v <= 100 => pawpularity = Some(v),
                    _ => return Err(row_err(format!("Pawpularity must be 0..=100, got `{field}`"))),
                },
            }
        }
        if id.is_empty() {
            return Err(row_err("empty Id".into()));
        }
        if !ids.insert(id.clone()) {
            return Err(Error::IdCollision(id));
        }
        if features[BLUR] == 1 && features[EYES] == 1 {
            log::warn!("line {line}: `{id}` has Blur=1 and Eyes=1");
        }
        records.push(MetadataRecord::new(id, features, pawpularity));
    }
    Ok(records)
}

/// Writes records with the competition header. The `Pawpularity` column is
/// present when any record carries a label.
pub fn write_csv(records: &[MetadataRecord], writer: impl Write) -> Result<()> {
    let labeled = records.iter().any(|r| r.pawpularity.is_some());
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["Id"];
    header.extend(CSV_HEADERS);
    if labeled {
        header.push("Pawpularity");
    }
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![r.id.clone()];
        row.extend(r.features.iter().map(u8::to_string));
        if labeled {
            row.push(r.pawpularity.map(|p| p.to_string()).unwrap_or_default());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `Id,Pawpularity` with predictions on the 0–100 scale.
pub fn write_predictions(rows: &[(String, f64)], writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["Id", "Pawpularity"])?;
    for (id, value) in rows {
        w.write_record([id.as_str(), &format!("{value:.6}")])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Species {
    Cat,
    Dog,
    Unknown,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub species: Species,
    pub count: u32,
}

/// Reads an `id,species,count` annotation file produced by an external
/// detector.
pub fn parse_annotations(reader: impl Read) -> Result<BTreeMap<String, Annotation>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_lowercase()).collect();
    if headers != ["id", "species", "count"] {
        return Err(Error::Schema(format!(
            "annotation header must be `id,species,count`, got `{}`",
            headers.join(",")
        )));
    }
    let mut out = BTreeMap::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let species = match row[1].trim().to_lowercase().as_str() {
            "cat" => Species::Cat,
            "dog" => Species::Dog,
            "unknown" => Species::Unknown,
            other => {
                return Err(Error::Row {
                    line,
                    message: format!("unknown species `{other}`"),
                })
            }
        };
        let count = row[2].trim().parse().map_err(|_| Error::Row {
            line,
            message: format!("bad count `{}`", &row[2]),
        })?;
        let id = row[0].trim().to_string();
        if out.insert(id.clone(), Annotation { species, count }).is_some() {
            return Err(Error::IdCollision(id));
        }
    }
    Ok(out)
}
