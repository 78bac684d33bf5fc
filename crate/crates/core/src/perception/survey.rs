use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::Dimension;
use crate::error::{Error, Result};
use crate::ingest::SurveyResponse;
use crate::stats::median;

/// Median absolute deviation, without a consistency constant.
pub fn mad(values: &[f64]) -> Result<f64> {
    let m = median(values).ok_or_else(|| Error::InvalidArgument("MAD of an empty list".into()))?;
    let devs: Vec<f64> = values.iter().map(|x| (x - m).abs()).collect();
    Ok(median(&devs).expect("non-empty"))
}

/// Keeps values whose distance from the median is at most `threshold`
/// MADs, preserving order. With MAD = 0 nothing is removed.
pub fn filter_outliers(values: &[f64], threshold: f64) -> Vec<f64> {
    let Some(m) = median(values) else {
        return Vec::new();
    };
    let d = mad(values).expect("non-empty");
    if d == 0.0 {
        return values.to_vec();
    }
    values.iter().copied().filter(|x| (x - m).abs() / d <= threshold).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreCell {
    /// Mean of the retained ratings, 0–10.
    pub mean: f64,
    pub retained: usize,
    pub responses: usize,
}

/// Aggregated ratings per image and dimension.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PerceptionScoreTable {
    pub cells: BTreeMap<String, BTreeMap<Dimension, ScoreCell>>,
}

impl PerceptionScoreTable {
    pub fn get(&self, image_id: &str, dimension: Dimension) -> Option<&ScoreCell> {
        self.cells.get(image_id)?.get(&dimension)
    }

    /// `(image_id, mean)` for every image rated on `dimension`, by image id.
    pub fn scores(&self, dimension: Dimension) -> Vec<(String, f64)> {
        self.cells
            .iter()
            .filter_map(|(id, m)| m.get(&dimension).map(|c| (id.clone(), c.mean)))
            .collect()
    }
}

/// Outlier-filtered mean rating per (image, dimension) cell.
pub fn aggregate_survey(responses: &[SurveyResponse], threshold: f64) -> PerceptionScoreTable {
    let mut groups: BTreeMap<(&str, Dimension), Vec<f64>> = BTreeMap::new();
    for r in responses {
        groups
            .entry((r.image_id.as_str(), r.dimension))
            .or_default()
            .push(f64::from(r.rating));
    }
    let mut table = PerceptionScoreTable::default();
    for ((image, dim), mut ratings) in groups {
        // sorted so the mean does not depend on response order
        ratings.sort_by(f64::total_cmp);
        let kept = filter_outliers(&ratings, threshold);
        let mean = kept.iter().sum::<f64>() / kept.len() as f64;
        table.cells.entry(image.to_string()).or_default().insert(
            dim,
            ScoreCell {
                mean,
                retained: kept.len(),
                responses: ratings.len(),
            },
        );
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mad_cases() {
        assert_eq!(mad(&[1.0, 2.0, 3.0, 4.0, 100.0]).unwrap(), 1.0);
        assert_eq!(mad(&[7.0; 4]).unwrap(), 0.0);
        assert_eq!(mad(&[1.0, 2.0]).unwrap(), 0.5);
        assert!(matches!(mad(&[]), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn filter_cases() {
        assert_eq!(filter_outliers(&[1.0, 2.0, 3.0, 4.0, 100.0], 3.0), vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(filter_outliers(&[2.0; 5], 3.0), vec![2.0; 5]);
        assert_eq!(filter_outliers(&[4.0, 5.0, 6.0], 3.0), vec![4.0, 5.0, 6.0]);
    }

    fn resp(image: &str, rater: &str, rating: u8) -> SurveyResponse {
        SurveyResponse {
            image_id: image.into(),
            rater_id: rater.into(),
            dimension: Dimension::Safety,
            rating,
        }
    }

    #[test]
    fn aggregate_cases() {
        let mut rs: Vec<_> = (0..7).map(|i| resp("a", &format!("r{i}"), 5)).collect();
        rs.push(resp("a", "r7", 10));
        rs.push(resp("b", "r0", 0));
        rs.push(resp("b", "r1", 10));
        rs.push(resp("c", "r0", 7));
        let t = aggregate_survey(&rs, 3.0);
        assert_eq!(t.get("a", Dimension::Safety).unwrap().mean, 5.625);
        assert_eq!(t.get("b", Dimension::Safety).unwrap().mean, 5.0);
        assert_eq!(t.get("c", Dimension::Safety).unwrap().mean, 7.0);
        assert!(t.get("c", Dimension::Beauty).is_none());
    }
}
