//! CSV inputs for the memorability evaluation.
//!
//! Ratings, one row per image, one column per rater:
//!
//! ```text
//! image_id,r01,r02,r03
//! img001,7,6,8
//! ```
//!
//! Features, one row per image:
//!
//! ```text
//! image_id,neutral,happy,sad,surprise,fear,disgust,anger,contempt,novelty,complexity
//! img001,0.1,0.8,0,0,0,0,0.1,0,0.42,0.37
//! ```

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use super::cv::ImageFeatures;
use super::{EvalError, RatingsMatrix};
use crate::salience::{Emotion, EmotionVector};

fn io_err(path: &Path, e: impl std::fmt::Display) -> EvalError {
    EvalError::Io { path: path.display().to_string(), message: e.to_string() }
}

fn open(path: &Path) -> Result<std::fs::File, EvalError> {
    std::fs::File::open(path).map_err(|e| io_err(path, e))
}

fn parse_cell(v: &str, line: u64, col: &str) -> Result<f64, EvalError> {
    v.trim()
        .parse::<f64>()
        .map_err(|_| EvalError::Schema(format!("line {line}, column {col}: {v:?} is not a number")))
}

fn line_of(r: &csv::StringRecord) -> u64 {
    r.position().map(|p| p.line()).unwrap_or(0)
}

pub fn parse_ratings<R: Read>(reader: R) -> Result<RatingsMatrix, EvalError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| EvalError::Schema(e.to_string()))?.clone();
    if header.get(0) != Some("image_id") || header.len() < 2 {
        return Err(EvalError::Schema("ratings header must be image_id followed by rater ids".into()));
    }
    let raters: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut images = Vec::new();
    let mut values = vec![Vec::new(); raters.len()];
    for rec in rdr.records() {
        let rec = rec.map_err(|e| EvalError::Schema(e.to_string()))?;
        let line = line_of(&rec);
        images.push(rec[0].to_string());
        for (r, rater) in raters.iter().enumerate() {
            let cell = rec.get(r + 1).ok_or_else(|| EvalError::Schema(format!("line {line}: missing rating for {rater}")))?;
            values[r].push(parse_cell(cell, line, rater)?);
        }
    }
    RatingsMatrix::new(images, raters, values)
}

pub fn read_ratings(path: &Path) -> Result<RatingsMatrix, EvalError> {
    parse_ratings(open(path)?)
}

fn feature_header() -> Vec<String> {
    let mut h = vec!["image_id".to_string()];
    h.extend(Emotion::ALL.iter().map(|e| e.name().to_string()));
    h.push("novelty".into());
    h.push("complexity".into());
    h
}

pub fn parse_features<R: Read>(reader: R) -> Result<Vec<(String, ImageFeatures)>, EvalError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| EvalError::Schema(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let expected = feature_header();
    if header != expected {
        return Err(EvalError::Schema(format!("features header must be {}", expected.join(","))));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| EvalError::Schema(e.to_string()))?;
        let line = line_of(&rec);
        let num = |i: usize| parse_cell(&rec[i], line, &expected[i]);
        let mut p = [0.0; 8];
        for (i, slot) in p.iter_mut().enumerate() {
            *slot = num(i + 1)?;
        }
        let emotions = EmotionVector::new(p).map_err(|e| EvalError::Schema(format!("line {line}: {e}")))?;
        out.push((rec[0].to_string(), ImageFeatures { emotions, novelty: num(9)?, complexity: num(10)? }));
    }
    Ok(out)
}

pub fn read_features(path: &Path) -> Result<Vec<(String, ImageFeatures)>, EvalError> {
    parse_features(open(path)?)
}

/// Orders feature rows to match `image_ids`; every id must be present once.
pub fn align_features(
    image_ids: &[String],
    rows: Vec<(String, ImageFeatures)>,
) -> Result<Vec<ImageFeatures>, EvalError> {
    let n_rows = rows.len();
    let mut by_id: HashMap<String, ImageFeatures> = HashMap::with_capacity(n_rows);
    for (id, f) in rows {
        if by_id.insert(id.clone(), f).is_some() {
            return Err(EvalError::Schema(format!("duplicate feature row for {id}")));
        }
    }
    if n_rows != image_ids.len() {
        return Err(EvalError::Schema(format!("{n_rows} feature rows for {} rated images", image_ids.len())));
    }
    image_ids
        .iter()
        .map(|id| by_id.remove(id).ok_or_else(|| EvalError::Schema(format!("no features for image {id}"))))
        .collect()
}

pub fn write_ratings<W: Write>(m: &RatingsMatrix, w: W) -> Result<(), EvalError> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["image_id".to_string()];
    header.extend(m.rater_ids().iter().cloned());
    let err = |e: csv::Error| EvalError::Schema(e.to_string());
    wtr.write_record(&header).map_err(err)?;
    for (i, id) in m.image_ids().iter().enumerate() {
        let mut row = vec![id.clone()];
        row.extend((0..m.rater_count()).map(|r| m.value(r, i).to_string()));
        wtr.write_record(&row).map_err(err)?;
    }
    wtr.flush().map_err(|e| EvalError::Schema(e.to_string()))
}

pub fn write_features<W: Write>(rows: &[(String, ImageFeatures)], w: W) -> Result<(), EvalError> {
    let mut wtr = csv::Writer::from_writer(w);
    let err = |e: csv::Error| EvalError::Schema(e.to_string());
    wtr.write_record(feature_header()).map_err(err)?;
    for (id, f) in rows {
        let mut row = vec![id.clone()];
        row.extend(f.emotions.as_array().iter().map(f64::to_string));
        row.push(f.novelty.to_string());
        row.push(f.complexity.to_string());
        wtr.write_record(&row).map_err(err)?;
    }
    wtr.flush().map_err(|e| EvalError::Schema(e.to_string()))
}
