//! Equal-weight composition of indicator vectors into the 0–100 index, its
//! source-restricted variants, and their comparison.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::indicators::{Category, IndicatorVector, Source};
use crate::stats::{mean, sample_sd};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    All,
    SviOnly,
    NonSviOnly,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::All, Variant::SviOnly, Variant::NonSviOnly];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::All => "all",
            Variant::SviOnly => "svi_only",
            Variant::NonSviOnly => "non_svi_only",
        }
    }

    pub fn includes(self, source: Source) -> bool {
        match self {
            Variant::All => true,
            Variant::SviOnly => source == Source::Svi,
            Variant::NonSviOnly => source == Source::NonSvi,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositeScore {
    pub point_id: String,
    pub city: String,
    pub variant: Variant,
    /// Score per category that has at least one active indicator.
    pub category_scores: BTreeMap<Category, f64>,
    pub total: f64,
}

/// Equal-weight index: each active category contributes `100 / N_c` times
/// the mean of its active indicators. Categories left without indicators by
/// the variant are excluded from `N_c`.
pub fn compose(v: &IndicatorVector, variant: Variant) -> Result<CompositeScore> {
    let mut groups: BTreeMap<Category, (f64, usize)> = BTreeMap::new();
    for e in v.entries.iter().filter(|e| variant.includes(e.source)) {
        let x = e.value.ok_or_else(|| {
            Error::InvalidArgument(format!("point {}: indicator {} is missing", v.point_id, e.name))
        })?;
        let g = groups.entry(e.category).or_insert((0.0, 0));
        g.0 += x;
        g.1 += 1;
    }
    if groups.is_empty() {
        return Err(Error::Configuration(format!("variant {variant} leaves no active indicators")));
    }
    let weight = 100.0 / groups.len() as f64;
    let category_scores: BTreeMap<Category, f64> = groups
        .into_iter()
        .map(|(c, (sum, n))| (c, weight * (sum / n as f64)))
        .collect();
    let total = category_scores.values().sum();
    Ok(CompositeScore {
        point_id: v.point_id.clone(),
        city: v.city.clone(),
        variant,
        category_scores,
        total,
    })
}

/// Sample Pearson correlation.
pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "correlation needs two equal-length series of at least 2, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::NotComputable("correlation of a constant series".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Excess kurtosis `m4 / m2² − 3` from population moments.
pub fn excess_kurtosis(x: &[f64]) -> Result<f64> {
    if x.len() < 4 {
        return Err(Error::InvalidArgument(format!("kurtosis needs at least 4 values, got {}", x.len())));
    }
    let m = mean(x);
    let n = x.len() as f64;
    let (mut m2, mut m4) = (0.0, 0.0);
    for v in x {
        let d2 = (v - m) * (v - m);
        m2 += d2;
        m4 += d2 * d2;
    }
    let (m2, m4) = (m2 / n, m4 / n);
    if m2 == 0.0 {
        return Err(Error::NotComputable("kurtosis of a constant series".into()));
    }
    Ok(m4 / (m2 * m2) - 3.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub variant: Variant,
    pub n: usize,
    pub mean: f64,
    /// NaN for a single point.
    #[serde(with = "crate::stats::nan_as_null")]
    pub sd: f64,
    /// Absent for fewer than 4 points or constant scores.
    pub kurtosis: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairComparison {
    pub variant_a: Variant,
    pub variant_b: Variant,
    pub n: usize,
    /// Absent when either series is constant.
    pub pearson_r: Option<f64>,
    pub r2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub summaries: Vec<VariantSummary>,
    pub pairs: Vec<PairComparison>,
}

/// Aligns variants on their shared point ids, then reports per-variant
/// mean, sd and excess kurtosis and pairwise correlation of totals.
pub fn compare_variants(scores: &BTreeMap<Variant, Vec<CompositeScore>>) -> Result<ComparisonReport> {
    let maps: BTreeMap<Variant, BTreeMap<&str, f64>> = scores
        .iter()
        .map(|(v, s)| (*v, s.iter().map(|c| (c.point_id.as_str(), c.total)).collect()))
        .collect();
    let mut shared: Option<BTreeSet<&str>> = None;
    for m in maps.values() {
        let keys: BTreeSet<&str> = m.keys().copied().collect();
        shared = Some(match shared {
            None => keys,
            Some(s) => s.intersection(&keys).copied().collect(),
        });
    }
    let shared = shared.unwrap_or_default();
    if shared.is_empty() {
        return Err(Error::Alignment("variants share no sample points".into()));
    }
    if maps.values().any(|m| m.len() != shared.len()) {
        log::warn!("variant comparison restricted to {} shared points", shared.len());
    }
    let series: BTreeMap<Variant, Vec<f64>> = maps
        .iter()
        .map(|(v, m)| (*v, shared.iter().map(|id| m[id]).collect()))
        .collect();
    let summaries = series
        .iter()
        .map(|(v, s)| VariantSummary {
            variant: *v,
            n: s.len(),
            mean: mean(s),
            sd: sample_sd(s),
            kurtosis: excess_kurtosis(s).ok(),
        })
        .collect();
    let variants: Vec<Variant> = series.keys().copied().collect();
    let mut pairs = Vec::new();
    for (i, a) in variants.iter().enumerate() {
        for b in &variants[i + 1..] {
            let r = pearson_r(&series[a], &series[b]).ok();
            pairs.push(PairComparison {
                variant_a: *a,
                variant_b: *b,
                n: shared.len(),
                pearson_r: r,
                r2: r.map(|r| r * r),
            });
        }
    }
    Ok(ComparisonReport { summaries, pairs })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub city: String,
    /// A category name or `total`.
    pub category: String,
    pub mean: f64,
    /// NaN for a single point.
    #[serde(with = "crate::stats::nan_as_null")]
    pub sd: f64,
}

/// Mean and sample sd of each category score and the total, per city.
pub fn summary_statistics(scores: &[CompositeScore]) -> Vec<SummaryRow> {
    let mut by_city: BTreeMap<&str, Vec<&CompositeScore>> = BTreeMap::new();
    for s in scores {
        by_city.entry(s.city.as_str()).or_default().push(s);
    }
    let mut out = Vec::new();
    for (city, rows) in by_city {
        let cats: BTreeSet<Category> = rows.iter().flat_map(|s| s.category_scores.keys().copied()).collect();
        let mut push = |category: String, values: Vec<f64>| {
            out.push(SummaryRow {
                city: city.to_string(),
                category,
                mean: mean(&values),
                sd: sample_sd(&values),
            })
        };
        for c in cats {
            push(
                c.as_str().to_string(),
                rows.iter().filter_map(|s| s.category_scores.get(&c).copied()).collect(),
            );
        }
        push("total".into(), rows.iter().map(|s| s.total).collect());
    }
    out
}
