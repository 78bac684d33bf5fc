//! Stage runner with on-disk caching.
//!
//! Stages run in a fixed order. Each writes `<output>/cache/<stage>.json`
//! holding its payload and a digest of everything it depends on: its slice
//! of the config, the digests of upstream stages and, for ingest, the bytes
//! of every input file. A stage whose cached digest matches is not rerun.
//! Datasets are parsed only when some stage actually needs them.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::{CityConfig, RunConfig};
use crate::error::{Error, Result};
use crate::export;
use crate::index::{compare_variants, compose, summary_statistics, ComparisonReport, CompositeScore, SummaryRow, Variant};
use crate::indicators::{
    finalize, scale_table, AssembledTable, Datasets, Extraction, Extractor, PerceptionPredictions, RawTable, Registry,
    ScaledTable,
};
use crate::ingest::{
    load_aqi_stations, load_dem_ascii_grid, load_feature_records, load_land_use, load_street_graph,
    load_survey_responses, AqiStation, DemGrid, FeatureRecord, LandUseDataset, StreetGraph, SurveyResponse,
};
use crate::perception::{
    aggregate_survey, assemble_features, feature_score_analysis, predict_scores, train_regressor, Dimension,
    MetricsReport, RegressionModel, TTestResult,
};
use crate::sampling::{bind_images, sample_points, SamplePoint};

/// Bumped whenever a payload layout changes, invalidating old caches.
const CACHE_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Ingest,
    Sample,
    Extract,
    Scale,
    Perception,
    Assemble,
    Compose,
    Compare,
    Export,
}

impl Stage {
    pub const ALL: [Stage; 9] = [
        Stage::Ingest,
        Stage::Sample,
        Stage::Extract,
        Stage::Scale,
        Stage::Perception,
        Stage::Assemble,
        Stage::Compose,
        Stage::Compare,
        Stage::Export,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Sample => "sample",
            Stage::Extract => "extract",
            Stage::Scale => "scale",
            Stage::Perception => "perception",
            Stage::Assemble => "assemble",
            Stage::Compose => "compose",
            Stage::Compare => "compare",
            Stage::Export => "export",
        }
    }

    /// Stages whose payloads this one consumes.
    pub fn upstream(self) -> &'static [Stage] {
        match self {
            Stage::Ingest => &[],
            Stage::Sample => &[Stage::Ingest],
            Stage::Extract => &[Stage::Ingest, Stage::Sample],
            Stage::Scale => &[Stage::Extract],
            Stage::Perception => &[Stage::Ingest],
            Stage::Assemble => &[Stage::Extract, Stage::Scale, Stage::Perception],
            Stage::Compose => &[Stage::Assemble],
            Stage::Compare => &[Stage::Compose],
            Stage::Export => &[Stage::Assemble, Stage::Compose, Stage::Compare, Stage::Perception],
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Computed,
    Cached,
}

/// A failure, tagged with the stage it happened in. Config validation
/// failures happen before any stage and carry no stage.
#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(#[source] Error),
    #[error("stage {stage} failed: {error}")]
    Stage {
        stage: Stage,
        #[source]
        error: Error,
    },
}

impl PipelineError {
    pub fn error(&self) -> &Error {
        match self {
            PipelineError::Config(e) | PipelineError::Stage { error: e, .. } => e,
        }
    }

    pub fn stage(&self) -> Option<Stage> {
        match self {
            PipelineError::Config(_) => None,
            PipelineError::Stage { stage, .. } => Some(*stage),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CityIngest {
    pub city: String,
    pub nodes: usize,
    pub edges: usize,
    pub pois: usize,
    pub transit_stops: usize,
    pub land_use_polygons: usize,
    pub aqi_stations: usize,
    pub feature_records: usize,
    pub survey_responses: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CitySample {
    pub city: String,
    pub points: Vec<SamplePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerceptionOutput {
    pub models: BTreeMap<Dimension, RegressionModel>,
    pub metrics: BTreeMap<Dimension, MetricsReport>,
    pub ttests: Vec<TTestResult>,
    pub predictions: PerceptionPredictions,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareOutput {
    pub comparison: ComparisonReport,
    pub summary: Vec<SummaryRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportOutput {
    /// Path relative to the output directory, and the sha256 of its bytes.
    pub files: BTreeMap<String, String>,
}

/// Everything a run produced, up to the last stage requested.
#[derive(Debug, Default)]
pub struct RunOutcome {
    pub report: Vec<(Stage, StageStatus)>,
    pub ingest: Option<Vec<CityIngest>>,
    pub sample: Option<Vec<CitySample>>,
    pub extract: Option<RawTable>,
    pub scale: Option<ScaledTable>,
    pub perception: Option<PerceptionOutput>,
    pub assemble: Option<AssembledTable>,
    pub compose: Option<BTreeMap<Variant, Vec<CompositeScore>>>,
    pub compare: Option<CompareOutput>,
    pub export: Option<ExportOutput>,
}

impl RunOutcome {
    pub fn status(&self, stage: Stage) -> Option<StageStatus> {
        self.report.iter().find(|(s, _)| *s == stage).map(|(_, st)| *st)
    }
}

struct CityData {
    graph: StreetGraph,
    dem: DemGrid,
    land_use: LandUseDataset,
    aqi: Vec<AqiStation>,
    records: Vec<FeatureRecord>,
    survey: Vec<SurveyResponse>,
    warnings: Vec<String>,
}

fn load_city(c: &CityConfig) -> Result<CityData> {
    let mut warnings = Vec::new();
    let mut take = |ws: Vec<crate::ingest::Warning>| warnings.extend(ws.into_iter().map(|w| w.0));
    let graph = load_street_graph(&c.street_network)?;
    take(graph.warnings);
    let dem = load_dem_ascii_grid(&c.dem)?;
    take(dem.warnings);
    let land_use = load_land_use(&c.land_use)?;
    take(land_use.warnings);
    let aqi = load_aqi_stations(&c.aqi)?;
    take(aqi.warnings);
    let records = load_feature_records(&c.features)?;
    take(records.warnings);
    let survey = match &c.survey {
        Some(p) => {
            let s = load_survey_responses(p)?;
            take(s.warnings);
            s.value
        }
        None => Vec::new(),
    };
    Ok(CityData {
        graph: graph.value,
        dem: dem.value,
        land_use: land_use.value,
        aqi: aqi.value,
        records: records.value,
        survey,
        warnings,
    })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn file_sha256(path: &Path) -> Result<String> {
    Ok(sha256_hex(&std::fs::read(path).map_err(|e| Error::io(path, e))?))
}

/// Applies `f` to every item on up to `threads` scoped workers. Results come
/// back in input order; the first error (by position) wins.
pub fn par_map<T, U, F>(items: &[T], threads: usize, f: F) -> Result<Vec<U>>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> Result<U> + Sync,
{
    let threads = threads.max(1).min(items.len().max(1));
    if threads == 1 {
        return items.iter().map(&f).collect();
    }
    let chunk = items.len().div_ceil(threads);
    let parts: Vec<Result<Vec<U>>> = std::thread::scope(|s| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|c| s.spawn(|| c.iter().map(&f).collect::<Result<Vec<U>>>()))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("extraction worker panicked"))
            .collect()
    });
    let mut out = Vec::with_capacity(items.len());
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

fn worker_count(configured: usize) -> usize {
    if configured > 0 {
        configured
    } else {
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
    }
}

#[derive(Serialize, Deserialize)]
struct CacheFile<T> {
    stage: Stage,
    digest: String,
    payload: T,
}

/// Runs one configured pipeline, stage by stage.
pub struct Pipeline {
    config: RunConfig,
    registry: Registry,
    cache_dir: PathBuf,
    data: Option<Vec<CityData>>,
    digests: BTreeMap<Stage, String>,
    outcome: RunOutcome,
}

impl Pipeline {
    /// Validates the config (including that every input file exists) and
    /// loads the indicator registry. No dataset is read yet.
    pub fn new(config: RunConfig) -> std::result::Result<Self, PipelineError> {
        config.validate().map_err(PipelineError::Config)?;
        let registry = config.load_registry().map_err(PipelineError::Config)?;
        let cache_dir = config.output_dir.join("cache");
        Ok(Pipeline {
            config,
            registry,
            cache_dir,
            data: None,
            digests: BTreeMap::new(),
            outcome: RunOutcome::default(),
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    /// Runs every stage up to and including `last`.
    pub fn run_until(mut self, last: Stage) -> std::result::Result<RunOutcome, PipelineError> {
        std::fs::create_dir_all(&self.cache_dir)
            .map_err(|e| PipelineError::Stage {
                stage: Stage::Ingest,
                error: Error::io(&self.cache_dir, e),
            })?;
        for stage in Stage::ALL.into_iter().filter(|s| *s <= last) {
            self.run_stage(stage)
                .map_err(|error| PipelineError::Stage { stage, error })?;
        }
        Ok(self.outcome)
    }

    fn data(&mut self) -> Result<&[CityData]> {
        if self.data.is_none() {
            let loaded = self.config.cities.iter().map(load_city).collect::<Result<Vec<_>>>()?;
            self.data = Some(loaded);
        }
        Ok(self.data.as_deref().expect("datasets loaded"))
    }

    fn config_slice(&self, stage: Stage) -> Result<Value> {
        let c = &self.config;
        let registry = serde_json::to_value(&self.registry).expect("registry serializes");
        Ok(match stage {
            Stage::Ingest => {
                let mut cities = Vec::new();
                for city in &c.cities {
                    let mut files = BTreeMap::new();
                    for (role, path) in city.paths() {
                        files.insert(role, file_sha256(path)?);
                    }
                    cities.push(json!({"name": city.name, "files": files}));
                }
                json!({"cities": cities})
            }
            Stage::Sample => json!({
                "seed": c.seed,
                "sample_size": c.cities.iter().map(|city| c.sample_size_for(city)).collect::<Vec<_>>(),
                "image_max_distance": c.image_max_distance,
            }),
            Stage::Extract => json!({"extraction": c.extraction, "registry": registry}),
            Stage::Scale => json!({"scaling_scope": c.scaling_scope, "registry": registry}),
            Stage::Perception => json!({
                "seed": c.seed,
                "mad_threshold": c.mad_threshold,
                "regressor": c.regressor,
                "split": c.split,
                "alpha": c.alpha,
            }),
            Stage::Assemble => json!({
                "scaling_scope": c.scaling_scope,
                "max_missing_fraction": c.max_missing_fraction,
                "registry": registry,
            }),
            Stage::Compose => json!({"variants": c.variants}),
            Stage::Compare | Stage::Export => json!({}),
        })
    }

    fn digest(&self, stage: Stage) -> Result<String> {
        let mut h = Sha256::new();
        h.update(CACHE_VERSION.as_bytes());
        h.update([0]);
        h.update(stage.as_str().as_bytes());
        h.update([0]);
        h.update(self.config_slice(stage)?.to_string().as_bytes());
        for up in stage.upstream() {
            h.update([0]);
            h.update(self.digests[up].as_bytes());
        }
        Ok(hex::encode(h.finalize()))
    }

    fn cache_path(&self, stage: Stage) -> PathBuf {
        self.cache_dir.join(format!("{stage}.json"))
    }

    fn read_cache<T: DeserializeOwned>(&self, stage: Stage, digest: &str) -> Option<T> {
        let text = std::fs::read_to_string(self.cache_path(stage)).ok()?;
        let file: CacheFile<T> = match serde_json::from_str(&text) {
            Ok(f) => f,
            Err(e) => {
                log::warn!("ignoring unreadable cache for {stage}: {e}");
                return None;
            }
        };
        (file.stage == stage && file.digest == digest).then_some(file.payload)
    }

    fn write_cache<T: Serialize>(&self, stage: Stage, digest: &str, payload: &T) -> Result<()> {
        let path = self.cache_path(stage);
        let text = serde_json::to_string(&CacheFile {
            stage,
            digest: digest.to_string(),
            payload,
        })
        .map_err(|e| Error::Validation(format!("cannot serialize {stage} payload: {e}")))?;
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    /// Returns the cached payload when the digest matches, otherwise
    /// computes and caches it.
    fn cached<T, F>(&mut self, stage: Stage, compute: F) -> Result<T>
    where
        T: Serialize + DeserializeOwned,
        F: FnOnce(&mut Self) -> Result<T>,
    {
        let digest = self.digest(stage)?;
        let hit = self.read_cache::<T>(stage, &digest).filter(|p| self.still_valid(stage, p));
        let (payload, status) = match hit {
            Some(p) => (p, StageStatus::Cached),
            None => {
                let p = compute(self)?;
                self.write_cache(stage, &digest, &p)?;
                (p, StageStatus::Computed)
            }
        };
        log::info!("{stage}: {status:?}");
        self.digests.insert(stage, digest);
        self.outcome.report.push((stage, status));
        Ok(payload)
    }

    fn still_valid<T: Serialize>(&self, stage: Stage, payload: &T) -> bool {
        if stage != Stage::Export {
            return true;
        }
        let Ok(Value::Object(v)) = serde_json::to_value(payload) else {
            return false;
        };
        let Some(Value::Object(files)) = v.get("files") else {
            return false;
        };
        files.iter().all(|(rel, hash)| {
            file_sha256(&self.config.output_dir.join(rel))
                .map(|h| Some(h.as_str()) == hash.as_str())
                .unwrap_or(false)
        })
    }

    fn run_stage(&mut self, stage: Stage) -> Result<()> {
        match stage {
            Stage::Ingest => {
                let p = self.cached(stage, |s| s.compute_ingest())?;
                self.outcome.ingest = Some(p);
            }
            Stage::Sample => {
                let p = self.cached(stage, |s| s.compute_sample())?;
                self.outcome.sample = Some(p);
            }
            Stage::Extract => {
                let p = self.cached(stage, |s| s.compute_extract())?;
                self.outcome.extract = Some(p);
            }
            Stage::Scale => {
                let p = self.cached(stage, |s| {
                    let raw = s.outcome.extract.as_ref().expect("extract ran");
                    scale_table(raw, &s.registry, s.config.scaling_scope)
                })?;
                self.outcome.scale = Some(p);
            }
            Stage::Perception => {
                let p = self.cached(stage, |s| s.compute_perception())?;
                self.outcome.perception = Some(p);
            }
            Stage::Assemble => {
                let p = self.cached(stage, |s| s.compute_assemble())?;
                self.outcome.assemble = Some(p);
            }
            Stage::Compose => {
                let p = self.cached(stage, |s| s.compute_compose())?;
                self.outcome.compose = Some(p);
            }
            Stage::Compare => {
                let p = self.cached(stage, |s| {
                    let scores = s.outcome.compose.as_ref().expect("compose ran");
                    let comparison = compare_variants(scores)?;
                    let summary = match scores.get(&Variant::All) {
                        Some(all) => summary_statistics(all),
                        None => {
                            log::warn!("summary statistics need the all-indicator variant; none written");
                            Vec::new()
                        }
                    };
                    Ok(CompareOutput { comparison, summary })
                })?;
                self.outcome.compare = Some(p);
            }
            Stage::Export => {
                let p = self.cached(stage, |s| s.compute_export())?;
                self.outcome.export = Some(p);
            }
        }
        Ok(())
    }

    fn compute_ingest(&mut self) -> Result<Vec<CityIngest>> {
        let names: Vec<String> = self.config.cities.iter().map(|c| c.name.clone()).collect();
        let data = self.data()?;
        let mut seen = std::collections::BTreeMap::new();
        for (name, d) in names.iter().zip(data) {
            for r in &d.records {
                if let Some(other) = seen.insert(r.image_id.as_str(), name) {
                    return Err(Error::Integrity {
                        message: format!("image id appears in cities {other} and {name}"),
                        ids: vec![r.image_id.clone()],
                    });
                }
            }
        }
        Ok(names
            .iter()
            .zip(data)
            .map(|(name, d)| CityIngest {
                city: name.clone(),
                nodes: d.graph.nodes().len(),
                edges: d.graph.edges().len(),
                pois: d.graph.pois().len(),
                transit_stops: d.graph.transit_stops().len(),
                land_use_polygons: d.land_use.polygons.len(),
                aqi_stations: d.aqi.len(),
                feature_records: d.records.len(),
                survey_responses: d.survey.len(),
                warnings: d.warnings.clone(),
            })
            .collect())
    }

    fn compute_sample(&mut self) -> Result<Vec<CitySample>> {
        let cities = self.config.cities.clone();
        let (seed, max_distance) = (self.config.seed, self.config.image_max_distance);
        let sizes: Vec<usize> = cities.iter().map(|c| self.config.sample_size_for(c)).collect();
        let data = self.data()?;
        cities
            .iter()
            .zip(data)
            .zip(sizes)
            .map(|((c, d), n)| {
                let points = sample_points(&d.graph, n, seed)?;
                let points = bind_images(&points, &d.records, max_distance)?;
                let unbound = points.iter().filter(|p| p.image_id.is_none()).count();
                if unbound > 0 {
                    log::warn!("{}: {unbound} of {} points have no image within {max_distance} m", c.name, points.len());
                }
                Ok(CitySample {
                    city: c.name.clone(),
                    points,
                })
            })
            .collect()
    }

    /// Raw values of every indicator except the perception ones, which are
    /// filled in once the perception models exist.
    fn compute_extract(&mut self) -> Result<RawTable> {
        let threads = worker_count(self.config.threads);
        let settings = self.config.extraction.clone();
        let samples = self.outcome.sample.clone().expect("sample ran");
        let registry = self.registry.clone();
        let data = self.data()?;
        let mut table = RawTable::new(&registry, Vec::new());
        for (sample, d) in samples.iter().zip(data) {
            let extractor = Extractor::new(
                Datasets {
                    graph: &d.graph,
                    dem: Some(&d.dem),
                    land_use: Some(&d.land_use),
                    aqi: &d.aqi,
                    records: &d.records,
                },
                settings.clone(),
            )?;
            extractor.check_registry(&registry)?;
            let rows = par_map(&sample.points, threads, |p| {
                let mut row = extractor.raw_row(&sample.city, p, &registry)?;
                row.point_id = format!("{}:{}", sample.city, p.id);
                Ok(row)
            })?;
            table.append(RawTable::new(&registry, rows))?;
        }
        Ok(table)
    }

    fn compute_perception(&mut self) -> Result<PerceptionOutput> {
        let c = self.config.clone();
        let data = self.data()?;
        let records: Vec<FeatureRecord> = data.iter().flat_map(|d| d.records.iter().cloned()).collect();
        let responses: Vec<SurveyResponse> = data.iter().flat_map(|d| d.survey.iter().cloned()).collect();
        let features = assemble_features(&records)?;
        let scores = aggregate_survey(&responses, c.mad_threshold);
        let mut out = PerceptionOutput {
            models: BTreeMap::new(),
            metrics: BTreeMap::new(),
            ttests: Vec::new(),
            predictions: BTreeMap::new(),
            warnings: Vec::new(),
        };
        for dim in Dimension::ALL {
            let rated: Vec<(String, f64)> = scores
                .scores(dim)
                .into_iter()
                .filter(|(id, _)| features.row_of(id).is_some())
                .collect();
            if rated.is_empty() {
                let w = format!("no rated images with features for {dim}; its indicator stays missing");
                log::warn!("{w}");
                out.warnings.push(w);
                continue;
            }
            let ids: Vec<String> = rated.iter().map(|(id, _)| id.clone()).collect();
            let y: Vec<f64> = rated.iter().map(|(_, s)| *s).collect();
            let x = features.select(&ids)?;
            let (model, metrics) = train_regressor(&x, &y, &c.regressor, c.split, c.seed)?;
            for (id, v) in predict_scores(&model, &features) {
                out.predictions.entry(id).or_default().insert(dim, v);
            }
            out.models.insert(dim, model);
            out.metrics.insert(dim, metrics);
        }
        if !scores.cells.is_empty() {
            out.ttests = feature_score_analysis(&features, &scores, c.alpha);
        }
        Ok(out)
    }

    fn compute_assemble(&mut self) -> Result<AssembledTable> {
        let mut raw = self.outcome.extract.clone().expect("extract ran");
        let predictions = &self.outcome.perception.as_ref().expect("perception ran").predictions;
        for (j, spec) in self.registry.specs().iter().enumerate() {
            if let Extraction::Perception { dimension } = &spec.extraction {
                for row in &mut raw.rows {
                    row.values[j] = row
                        .image_id
                        .as_ref()
                        .and_then(|id| predictions.get(id))
                        .and_then(|m| m.get(dimension))
                        .copied();
                }
            }
        }
        let scaled = scale_table(&raw, &self.registry, self.config.scaling_scope)?;
        finalize(&scaled, &self.registry, self.config.max_missing_fraction)
    }

    fn compute_compose(&mut self) -> Result<BTreeMap<Variant, Vec<CompositeScore>>> {
        let threads = worker_count(self.config.threads);
        let table = self.outcome.assemble.as_ref().expect("assemble ran");
        let mut out = BTreeMap::new();
        for &variant in &self.config.variants {
            out.insert(variant, par_map(&table.vectors, threads, |v| compose(v, variant))?);
        }
        Ok(out)
    }

    fn compute_export(&mut self) -> Result<ExportOutput> {
        let dir = self.config.output_dir.clone();
        let models_dir = dir.join("models");
        std::fs::create_dir_all(&models_dir).map_err(|e| Error::io(&models_dir, e))?;
        let table = self.outcome.assemble.as_ref().expect("assemble ran");
        let scores = self.outcome.compose.as_ref().expect("compose ran");
        let compare = self.outcome.compare.as_ref().expect("compare ran");
        let perception = self.outcome.perception.as_ref().expect("perception ran");

        let mut written = vec![
            export::GEOJSON_FILE.to_string(),
            export::METRICS_FILE.to_string(),
            export::TTEST_FILE.to_string(),
            export::COMPARISON_FILE.to_string(),
            export::SUMMARY_FILE.to_string(),
        ];
        export::export_geojson(&table.vectors, scores, dir.join(export::GEOJSON_FILE))?;
        export::write_perception_metrics(&perception.metrics, dir.join(export::METRICS_FILE))?;
        export::write_ttests(&perception.ttests, dir.join(export::TTEST_FILE))?;
        export::write_variant_comparison(&compare.comparison, dir.join(export::COMPARISON_FILE))?;
        export::write_summary_statistics(&compare.summary, dir.join(export::SUMMARY_FILE))?;
        for (dim, model) in &perception.models {
            let rel = format!("models/{}.json", dim.as_str());
            model.save(dir.join(&rel))?;
            written.push(rel);
        }
        let mut files = BTreeMap::new();
        for rel in written {
            files.insert(rel.clone(), file_sha256(&dir.join(&rel))?);
        }
        Ok(ExportOutput { files })
    }
}

/// Validates `config` and runs every stage up to `last`.
pub fn run_pipeline(config: RunConfig, last: Stage) -> std::result::Result<RunOutcome, PipelineError> {
    Pipeline::new(config)?.run_until(last)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn par_map_keeps_order_and_first_error() {
        let items: Vec<i32> = (0..103).collect();
        for t in [1, 2, 7, 200] {
            assert_eq!(par_map(&items, t, |x| Ok(x * 2)).unwrap(), items.iter().map(|x| x * 2).collect::<Vec<_>>());
        }
        let err = par_map(&items, 4, |x| {
            if *x == 30 || *x == 90 {
                Err(Error::InvalidArgument(x.to_string()))
            } else {
                Ok(*x)
            }
        });
        assert!(matches!(err, Err(Error::InvalidArgument(s)) if s == "30"));
        assert!(par_map(&Vec::<i32>::new(), 4, |x| Ok(*x)).unwrap().is_empty());
    }

    #[test]
    fn stage_order_respects_dependencies() {
        for s in Stage::ALL {
            assert!(s.upstream().iter().all(|u| *u < s));
        }
    }
}
