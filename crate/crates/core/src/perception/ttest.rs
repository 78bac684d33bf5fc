use serde::{Deserialize, Serialize};

use super::{Dimension, FeatureMatrix, PerceptionScoreTable, FEATURE_NAMES};
use crate::error::{Error, Result};
use crate::stats::{mean, sample_variance, student_t_two_sided_p};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchTest {
    pub t: f64,
    /// Welch–Satterthwaite degrees of freedom.
    pub df: f64,
    /// Two-sided p value.
    pub p_value: f64,
    pub mean_a: f64,
    pub mean_b: f64,
}

/// Welch's unequal-variance t-test of `a` against `b`.
pub fn welch_t(a: &[f64], b: &[f64]) -> Result<WelchTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::NotComputable(format!(
            "Welch test needs at least 2 values per group, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let (ma, mb) = (mean(a), mean(b));
    let (va, vb) = (sample_variance(a) / a.len() as f64, sample_variance(b) / b.len() as f64);
    let se2 = va + vb;
    if !(se2 > 0.0) || !se2.is_finite() {
        return Err(Error::NotComputable("both groups have zero variance".into()));
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (va * va / (a.len() - 1) as f64 + vb * vb / (b.len() - 1) as f64);
    Ok(WelchTest {
        t,
        df,
        p_value: student_t_two_sided_p(t, df),
        mean_a: ma,
        mean_b: mb,
    })
}

/// Welch test of one perception dimension between images above and below
/// the mean of one feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub feature: String,
    pub dimension: Dimension,
    /// Absent when the test is not computable.
    pub t: Option<f64>,
    pub df: Option<f64>,
    pub p_value: Option<f64>,
    pub mean_below: Option<f64>,
    pub mean_above: Option<f64>,
    pub n_below: usize,
    pub n_above: usize,
    pub significant: bool,
}

/// Splits images at each feature's mean (above means `x >= mean`) and tests
/// the score difference, for every feature and rated dimension.
pub fn feature_score_analysis(x: &FeatureMatrix, scores: &PerceptionScoreTable, alpha: f64) -> Vec<TTestResult> {
    let mut out = Vec::new();
    for dim in Dimension::ALL {
        let pairs: Vec<(&[f64; 26], f64)> = scores
            .scores(dim)
            .into_iter()
            .filter_map(|(id, s)| x.row_of(&id).map(|r| (r, s)))
            .collect();
        if pairs.is_empty() {
            continue;
        }
        for (j, name) in FEATURE_NAMES.iter().enumerate() {
            let col: Vec<f64> = pairs.iter().map(|(r, _)| r[j]).collect();
            let cut = mean(&col);
            let constant = col.iter().all(|&v| v == col[0]);
            let (mut above, mut below) = (Vec::new(), Vec::new());
            for (v, (_, s)) in col.iter().zip(&pairs) {
                if constant || *v >= cut {
                    above.push(*s);
                } else {
                    below.push(*s);
                }
            }
            let avg = |g: &[f64]| (!g.is_empty()).then(|| mean(g));
            let test = welch_t(&above, &below).ok();
            out.push(TTestResult {
                feature: name.to_string(),
                dimension: dim,
                t: test.map(|w| w.t),
                df: test.map(|w| w.df),
                p_value: test.map(|w| w.p_value),
                mean_below: avg(&below),
                mean_above: avg(&above),
                n_below: below.len(),
                n_above: above.len(),
                significant: test.is_some_and(|w| w.p_value < alpha),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_case() {
        let w = welch_t(&[1.0, 2.0, 3.0], &[2.0, 3.0, 4.0]).unwrap();
        assert!((w.t + 1.224_744_871_391_589).abs() < 1e-12);
        assert!((w.df - 4.0).abs() < 1e-12);
        let r = welch_t(&[2.0, 3.0, 4.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(r.t, -w.t);
        assert_eq!(r.p_value, w.p_value);
    }

    #[test]
    fn identical_groups() {
        let w = welch_t(&[1.0, 5.0, 2.0], &[1.0, 5.0, 2.0]).unwrap();
        assert_eq!(w.t, 0.0);
        assert!((w.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn not_computable() {
        assert!(matches!(welch_t(&[1.0], &[1.0, 2.0]), Err(Error::NotComputable(_))));
        assert!(matches!(welch_t(&[3.0, 3.0], &[1.0, 1.0]), Err(Error::NotComputable(_))));
    }
}
