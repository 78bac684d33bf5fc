use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Loaded, Warning};
use crate::error::{Error, Result};
use crate::perception::Dimension;

/// One rater's 0–10 rating of one image on one perception dimension.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurveyResponse {
    pub image_id: String,
    pub rater_id: String,
    pub dimension: Dimension,
    pub rating: u8,
}

pub fn load_survey_responses(path: impl AsRef<Path>) -> Result<Loaded<Vec<SurveyResponse>>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_survey_responses(&bytes, &path.display().to_string())
}

/// Reads `image_id,rater_id,dimension,rating` rows. A repeated
/// (image, rater, dimension) triple replaces the earlier rating in place
/// and raises a warning.
pub fn parse_survey_responses(bytes: &[u8], source_name: &str) -> Result<Loaded<Vec<SurveyResponse>>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes);
    let headers = reader
        .headers()
        .map_err(|e| Error::parse(source_name, 1, e.to_string()))?
        .clone();
    let expected = ["image_id", "rater_id", "dimension", "rating"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::parse(
            source_name,
            1,
            format!("header must be {}", expected.join(",")),
        ));
    }
    let mut out: Vec<SurveyResponse> = Vec::new();
    let mut slot: HashMap<(String, String, Dimension), usize> = HashMap::new();
    let mut warnings = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            Error::parse(source_name, line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let dim_raw = &rec[2];
        let dimension = Dimension::parse(dim_raw).ok_or_else(|| {
            Error::Validation(format!("{source_name} line {line}: unknown dimension {dim_raw:?}"))
        })?;
        let rating = rec[3]
            .parse::<u8>()
            .ok()
            .filter(|r| *r <= 10)
            .ok_or_else(|| {
                Error::Validation(format!(
                    "{source_name} line {line}: rating {:?} is not an integer in 0..=10",
                    &rec[3]
                ))
            })?;
        let resp = SurveyResponse {
            image_id: rec[0].to_string(),
            rater_id: rec[1].to_string(),
            dimension,
            rating,
        };
        let key = (resp.image_id.clone(), resp.rater_id.clone(), dimension);
        match slot.get(&key) {
            Some(&i) => {
                warnings.push(Warning(format!(
                    "{source_name} line {line}: duplicate rating by {} for {} on {}, keeping the later one",
                    resp.rater_id, resp.image_id, dimension
                )));
                out[i] = resp;
            }
            None => {
                slot.insert(key, out.len());
                out.push(resp);
            }
        }
    }
    Ok(Loaded::new(out, warnings))
}
