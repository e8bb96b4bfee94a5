//! Dataset statistics: size, aspect ratio and label histograms, feature
//! correlations, duplicate summary and optional per-species label stats.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::dedup::{find_duplicates, DuplicateGroup, HashedItem};
use super::phash::{HashAlgorithm, PerceptualHash};
use super::records::{Annotation, MetadataRecord, Species, FEATURE_NAMES};
use crate::error::{Error, Result};
use crate::vision::ImageTensor;

pub const SIZE_BIN: f64 = 100.0;
pub const RATIO_BIN: f64 = 0.05;

/// Per-image facts gathered once, so a report never needs pixel data.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageInfo {
    pub id: String,
    pub width: usize,
    pub height: usize,
    pub hash: PerceptualHash,
}

impl ImageInfo {
    pub fn of(id: impl Into<String>, image: &ImageTensor, algorithm: HashAlgorithm) -> Self {
        Self {
            id: id.into(),
            width: image.width(),
            height: image.height(),
            hash: PerceptualHash::of(image, algorithm),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureCorrelation {
    pub feature: String,
    /// Pearson r; `0` when undefined.
    pub r: f64,
    /// Set when the feature or the label has zero variance.
    pub undefined: bool,
}

/// Fixed-width histogram whose first bin starts at `start`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub start: f64,
    pub bin_width: f64,
    pub counts: Vec<usize>,
}

impl Histogram {
    /// Bins `[start + i·w, start + (i+1)·w)`, as many as the largest value needs.
    pub fn from_values(values: &[f64], start: f64, bin_width: f64) -> Self {
        // Tolerates values that sit on an edge but land a rounding error below it.
        let bin = |v: f64| ((v - start) / bin_width + 1e-9).floor().max(0.0) as usize;
        let n = values.iter().map(|&v| bin(v) + 1).max().unwrap_or(0);
        let mut counts = vec![0; n];
        for &v in values {
            counts[bin(v)] += 1;
        }
        Self { start, bin_width, counts }
    }

    /// Exactly `bins` unit-free bins, values above the last bin are clamped into it.
    pub fn with_bins(values: &[f64], start: f64, bin_width: f64, bins: usize) -> Self {
        let mut h = Self::from_values(values, start, bin_width);
        let overflow: usize = h.counts.iter().skip(bins).sum();
        h.counts.resize(bins, 0);
        if let Some(last) = h.counts.last_mut() {
            *last += overflow;
        }
        h
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn bin_low(&self, i: usize) -> f64 {
        self.start + i as f64 * self.bin_width
    }

    /// CSV with columns `bin_low,bin_high,count`.
    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["bin_low", "bin_high", "count"])?;
        for (i, c) in self.counts.iter().enumerate() {
            w.write_record([
                format_edge(self.bin_low(i)),
                format_edge(self.bin_low(i + 1)),
                c.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn format_edge(v: f64) -> String {
    // Trim float noise such as 0.15000000000000002.
    let s = format!("{v:.6}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DuplicateSummary {
    pub threshold: u32,
    pub algorithm: HashAlgorithm,
    pub groups: Vec<DuplicateGroup>,
    pub images_in_groups: usize,
}

/// Five-number label summary for one species.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeciesStats {
    pub species: Species,
    pub n: usize,
    pub mean: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean_count: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdaReport {
    pub records: usize,
    pub images: usize,
    pub missing_images: Vec<String>,
    pub width: Histogram,
    pub height: Histogram,
    pub ratio: Histogram,
    pub pawpularity: Histogram,
    pub correlations: Vec<FeatureCorrelation>,
    pub duplicates: DuplicateSummary,
    pub species: Option<Vec<SpeciesStats>>,
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx.sqrt() * syy.sqrt()))
}

/// Pearson correlation of every feature with the label.
pub fn correlation_vector(records: &[MetadataRecord]) -> Result<Vec<FeatureCorrelation>> {
    if records.len() < 3 {
        return Err(Error::contract(format!("correlation needs at least 3 records, got {}", records.len())));
    }
    let labels: Vec<f64> = records
        .iter()
        .map(|r| r.label().ok_or_else(|| Error::contract(format!("record `{}` has no label", r.id))))
        .collect::<Result<_>>()?;
    Ok(FEATURE_NAMES
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let col: Vec<f64> = records.iter().map(|r| f64::from(r.features[j])).collect();
            let r = pearson(&col, &labels);
            FeatureCorrelation {
                feature: (*name).to_string(),
                r: r.unwrap_or(0.0),
                undefined: r.is_none(),
            }
        })
        .collect())
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn species_stats(records: &[MetadataRecord], annotations: &BTreeMap<String, Annotation>) -> Vec<SpeciesStats> {
    let mut by_species: BTreeMap<Species, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for r in records {
        if let (Some(a), Some(label)) = (annotations.get(&r.id), r.label()) {
            let e = by_species.entry(a.species).or_default();
            e.0.push(label);
            e.1.push(f64::from(a.count));
        }
    }
    by_species
        .into_iter()
        .map(|(species, (mut labels, counts))| {
            labels.sort_by(f64::total_cmp);
            let n = labels.len();
            SpeciesStats {
                species,
                n,
                mean: labels.iter().sum::<f64>() / n as f64,
                min: labels[0],
                q1: quantile(&labels, 0.25),
                median: quantile(&labels, 0.5),
                q3: quantile(&labels, 0.75),
                max: labels[n - 1],
                mean_count: counts.iter().sum::<f64>() / n as f64,
            }
        })
        .collect()
}

/// Builds the report. Records without an entry in `images` are listed in
/// `missing_images` and logged; size histograms cover the images found.
pub fn eda_report(
    records: &[MetadataRecord],
    images: &[ImageInfo],
    annotations: Option<&BTreeMap<String, Annotation>>,
    threshold: u32,
) -> Result<EdaReport> {
    let correlations = correlation_vector(records)?;
    let by_id: HashMap<&str, &ImageInfo> = images.iter().map(|i| (i.id.as_str(), i)).collect();
    let mut found = Vec::new();
    let mut missing_images = Vec::new();
    for r in records {
        match by_id.get(r.id.as_str()) {
            Some(info) => found.push((*info, r.pawpularity)),
            None => {
                log::warn!("no image for record `{}`", r.id);
                missing_images.push(r.id.clone());
            }
        }
    }
    let widths: Vec<f64> = found.iter().map(|(i, _)| i.width as f64).collect();
    let heights: Vec<f64> = found.iter().map(|(i, _)| i.height as f64).collect();
    let ratios: Vec<f64> = found.iter().map(|(i, _)| i.width as f64 / i.height as f64).collect();
    let labels: Vec<f64> = records.iter().filter_map(MetadataRecord::label).collect();

    let hashed: Vec<HashedItem> = found
        .iter()
        .map(|(i, label)| HashedItem {
            id: i.id.clone(),
            hash: i.hash,
            label: *label,
        })
        .collect();
    let groups = find_duplicates(&hashed, threshold)?;
    let algorithm = found.first().map_or_else(HashAlgorithm::default, |(i, _)| i.hash.algorithm);

    Ok(EdaReport {
        records: records.len(),
        images: found.len(),
        missing_images,
        width: Histogram::from_values(&widths, 0.0, SIZE_BIN),
        height: Histogram::from_values(&heights, 0.0, SIZE_BIN),
        ratio: Histogram::from_values(&ratios, 0.0, RATIO_BIN),
        pawpularity: Histogram::with_bins(&labels, 0.0, 1.0, 101),
        correlations,
        duplicates: DuplicateSummary {
            threshold,
            algorithm,
            images_in_groups: groups.iter().map(|g| g.ids.len()).sum(),
            groups,
        },
        species: annotations.map(|a| species_stats(records, a)),
    })
}

impl EdaReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is plain data")
    }

    /// Writes `eda_report.json` and one `hist_<name>.csv` per histogram;
    /// returns the written paths.
    pub fn write_to_dir(&self, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let report = dir.join("eda_report.json");
        std::fs::write(&report, self.to_json() + "\n")?;
        let mut paths = vec![report];
        for (name, h) in [
            ("width", &self.width),
            ("height", &self.height),
            ("ratio", &self.ratio),
            ("pawpularity", &self.pawpularity),
        ] {
            let p = dir.join(format!("hist_{name}.csv"));
            h.write_csv(std::fs::File::create(&p)?)?;
            paths.push(p);
        }
        Ok(paths)
    }
}
