//! Named end-to-end pipelines: data preparation, baseline and transformed
//! readouts, ρ scans, parameter search, circuit runs and split studies.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::attractor::{AttractorKind, AttractorSpec, IntegrationConfig};
use crate::circuit::{circuit_transform, power_estimate, CircuitConfig, PowerReport};
use crate::data::{
    generate_sinc, import_embedding, load_csv, load_mnist_idx, normalize_target_01, pca_reduce, read_idx, smote_balance,
    split_indices, zscore_apply, zscore_fit, CategoricalEncoding, CsvSchema, Dataset, MissingPolicy, Split,
    SplitConfig, SuspectPolicy, Target, DEFAULT_SINC_SAMPLES,
};
use crate::error::{Error, Result};
use crate::hyperopt::{optimize, optimize_dual_rho, OptResult, SearchSpace, Strategy};
use crate::lyapunov::{lle_accuracy_scan, write_scan_csv, LleConfig, ScanConfig, ScanRow};
use crate::readout::{
    confusion, fit_pipeline, iteration_sweep, score, sweep_features, ConfusionMatrix, MetricKind, Prediction,
    ReadoutKind, SelectionMode, SweepConfig, SweepResult,
};
use crate::stats::{paired_t, pearson_r, TTest};
use crate::transform::{save_tensor, stack_slices, transform, Encoding, TrajectoryTensor};

/// Environment variable naming the directory that holds dataset files.
pub const DATA_DIR_ENV: &str = "CHAOSLEARN_DATA";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Benchmark {
    Sinc,
    SincDual,
    Abalone,
    Iris,
    Liver,
    Mnist,
}

impl Benchmark {
    pub const ALL: [Benchmark; 6] = [
        Benchmark::Sinc,
        Benchmark::SincDual,
        Benchmark::Abalone,
        Benchmark::Iris,
        Benchmark::Liver,
        Benchmark::Mnist,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Benchmark::Sinc => "sinc",
            Benchmark::SincDual => "sinc-dual",
            Benchmark::Abalone => "abalone",
            Benchmark::Iris => "iris",
            Benchmark::Liver => "liver",
            Benchmark::Mnist => "mnist",
        }
    }

    pub fn is_classification(self) -> bool {
        matches!(self, Benchmark::Iris | Benchmark::Liver | Benchmark::Mnist)
    }
}

impl fmt::Display for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Benchmark {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Benchmark::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown benchmark '{s}' (expected sinc, sinc-dual, abalone, iris, liver or mnist)")))
    }
}

/// Where the z-score statistics come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalerFit {
    /// Whole dataset, before splitting.
    #[default]
    Full,
    /// Training rows only.
    Train,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DataConfig {
    /// Directory searched for default file names. Falls back to
    /// `$CHAOSLEARN_DATA`, then `./data`.
    pub dir: Option<PathBuf>,
    /// CSV file (abalone, iris, liver).
    pub path: Option<PathBuf>,
    /// IDX files (mnist).
    pub images: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    /// Headerless CSV of precomputed low-dimensional coordinates (mnist);
    /// replaces the built-in PCA reduction.
    pub embedding: Option<PathBuf>,
    /// Synthetic sample count (sinc).
    pub n_samples: usize,
    pub generator_seed: u32,
    pub abalone_sex: CategoricalEncoding,
    pub hcv_suspect: SuspectPolicy,
    pub missing: MissingPolicy,
    pub smote_k: usize,
    pub smote_seed: u32,
    /// Target dimension of the built-in reduction (mnist).
    pub reduce_dims: usize,
    /// Use only the first `limit` samples.
    pub limit: Option<usize>,
    pub scaler_fit: ScalerFit,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            dir: None,
            path: None,
            images: None,
            labels: None,
            embedding: None,
            n_samples: DEFAULT_SINC_SAMPLES,
            generator_seed: 0,
            abalone_sex: CategoricalEncoding::Integer,
            hcv_suspect: SuspectPolicy::Drop,
            missing: MissingPolicy::Drop,
            smote_k: crate::data::DEFAULT_SMOTE_K,
            smote_seed: 0,
            reduce_dims: 7,
            limit: None,
            scaler_fit: ScalerFit::Full,
        }
    }
}

impl DataConfig {
    pub fn data_dir(&self) -> PathBuf {
        self.dir
            .clone()
            .or_else(|| std::env::var_os(DATA_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("data"))
    }

    fn find(&self, explicit: &Option<PathBuf>, candidates: &[&str], what: &str) -> Result<PathBuf> {
        if let Some(p) = explicit {
            return if p.exists() {
                Ok(p.clone())
            } else {
                Err(Error::MissingData(format!("{what} file {} does not exist", p.display())))
            };
        }
        let dir = self.data_dir();
        candidates
            .iter()
            .map(|c| dir.join(c))
            .find(|p| p.exists())
            .ok_or_else(|| {
                Error::MissingData(format!(
                    "no {what} file in {} (looked for {}); set data.path or ${DATA_DIR_ENV}",
                    dir.display(),
                    candidates.join(", ")
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScanSettings {
    pub rho_min: f64,
    pub rho_max: f64,
    pub rho_step: f64,
    pub readout: ReadoutKind,
    pub lle: LleConfig,
}

impl Default for ScanSettings {
    fn default() -> Self {
        ScanSettings {
            rho_min: 1.0,
            rho_max: 100.0,
            rho_step: 1.0,
            readout: ReadoutKind::linear_svm(),
            lle: LleConfig::default(),
        }
    }
}

impl ScanSettings {
    pub fn grid(&self) -> Vec<f64> {
        let n = ((self.rho_max - self.rho_min) / self.rho_step + 1e-9).floor() as usize + 1;
        (0..n).map(|i| self.rho_min + i as f64 * self.rho_step).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizeSettings {
    pub budget: usize,
    pub strategy: Strategy,
    pub seed: u32,
    /// Parameters named after the flow's coefficients (`sigma`, `beta`,
    /// `rho` for Lorenz) or `rho1`/`rho2` for two transformers. `None`
    /// uses the benchmark's default space.
    pub space: Option<SearchSpace>,
}

impl Default for OptimizeSettings {
    fn default() -> Self {
        OptimizeSettings {
            budget: 60,
            strategy: Strategy::CoarseToFine,
            seed: 0,
            space: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub benchmark: Benchmark,
    #[serde(default)]
    pub data: DataConfig,
    /// One spec per parallel transformer; their features are concatenated.
    pub transformers: Vec<AttractorSpec>,
    #[serde(default)]
    pub integration: IntegrationConfig,
    #[serde(default)]
    pub encoding: Encoding,
    /// The first readout drives optimization objectives.
    pub readouts: Vec<ReadoutKind>,
    /// Insert an LDA projection (maximal components) before classifiers.
    #[serde(default)]
    pub lda: bool,
    pub split: SplitConfig,
    #[serde(default)]
    pub mode: SelectionMode,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub circuit: CircuitConfig,
    #[serde(default)]
    pub scan: ScanSettings,
    #[serde(default)]
    pub optimize: OptimizeSettings,
    #[serde(default = "default_n_splits")]
    pub n_splits: usize,
}

fn default_n_splits() -> usize {
    20
}

/// `sinc-dual` pair, rounded from a coarse-to-fine search (budget 60, seed 0).
pub const DEFAULT_DUAL_RHOS: (f64, f64) = (27.1, 99.6);

impl ExperimentConfig {
    /// Reference settings for each benchmark.
    pub fn preset(benchmark: Benchmark) -> Self {
        let lorenz = |rho: f64| AttractorSpec::lorenz_rho(rho).expect("valid preset");
        let (transformers, readouts, lda, train_fraction) = match benchmark {
            Benchmark::Sinc => (vec![lorenz(28.0)], vec![ReadoutKind::LinearRegression], false, 0.8),
            Benchmark::SincDual => (
                vec![lorenz(DEFAULT_DUAL_RHOS.0), lorenz(DEFAULT_DUAL_RHOS.1)],
                vec![ReadoutKind::LinearRegression],
                false,
                0.8,
            ),
            Benchmark::Abalone => (
                vec![AttractorSpec::lorenz(10.0, 2.667, 64.917).expect("valid preset")],
                vec![ReadoutKind::LinearRegression],
                false,
                0.8,
            ),
            Benchmark::Iris => (vec![lorenz(97.0)], vec![ReadoutKind::ridge_classifier()], true, 0.7),
            Benchmark::Liver => (
                vec![lorenz(97.0)],
                vec![ReadoutKind::ridge_classifier(), ReadoutKind::linear_svm()],
                false,
                0.8,
            ),
            Benchmark::Mnist => (vec![lorenz(97.0)], vec![ReadoutKind::ridge_classifier()], false, 0.8),
        };
        let rho = transformers[0].param("rho").unwrap_or(97.0);
        ExperimentConfig {
            benchmark,
            data: DataConfig::default(),
            transformers,
            integration: IntegrationConfig::default(),
            encoding: Encoding::default(),
            readouts,
            lda,
            split: SplitConfig::new(train_fraction, 0).expect("valid preset"),
            mode: SelectionMode::Paper,
            output_dir: None,
            circuit: CircuitConfig::default().with_rho(rho).expect("valid preset"),
            scan: ScanSettings::default(),
            optimize: OptimizeSettings::default(),
            n_splits: default_n_splits(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.transformers.is_empty() {
            return Err(Error::InvalidConfig("at least one transformer is required".into()));
        }
        let kind = self.transformers[0].kind();
        if self.transformers.iter().any(|t| t.kind() != kind) {
            return Err(Error::InvalidConfig("parallel transformers must share a flow".into()));
        }
        if self.benchmark == Benchmark::SincDual && self.transformers.len() != 2 {
            return Err(Error::InvalidConfig("sinc-dual needs exactly two transformers".into()));
        }
        if self.readouts.is_empty() {
            return Err(Error::InvalidConfig("at least one readout is required".into()));
        }
        for r in &self.readouts {
            if r.is_classifier() != self.benchmark.is_classification() {
                return Err(Error::InvalidConfig(format!(
                    "readout {} does not fit the {} task",
                    r.label(),
                    if self.benchmark.is_classification() { "classification" } else { "regression" }
                )));
            }
        }
        if self.lda && !self.benchmark.is_classification() {
            return Err(Error::InvalidConfig("LDA applies to classification benchmarks only".into()));
        }
        self.split.validate()?;
        self.circuit.validate()?;
        if self.n_splits == 0 {
            return Err(Error::InvalidConfig("n_splits must be at least 1".into()));
        }
        if self.data.n_samples == 0 || self.data.reduce_dims == 0 || self.data.smote_k == 0 {
            return Err(Error::InvalidConfig("data sizes must be positive".into()));
        }
        if !(self.scan.rho_step > 0.0 && self.scan.rho_min <= self.scan.rho_max) {
            return Err(Error::InvalidConfig("scan grid needs rho_step > 0 and rho_min <= rho_max".into()));
        }
        if self.optimize.budget == 0 {
            return Err(Error::InvalidConfig("optimize.budget must be at least 1".into()));
        }
        Ok(())
    }

    fn sweep_config(&self, readout: ReadoutKind) -> SweepConfig {
        SweepConfig {
            readout,
            lda: self.lda.then_some(None),
            mode: self.mode,
            validation_fraction: 0.2,
            seed: self.split.seed,
        }
    }
}

/// Dataset after every step that precedes the transform, with its split.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub dataset: Dataset,
    pub split: Split,
}

fn standardize(ds: &Dataset, rows: Option<&[usize]>) -> Result<Dataset> {
    let scaler = match rows {
        Some(r) => zscore_fit(&ds.x().select_rows(r))?,
        None => zscore_fit(ds.x())?,
    };
    ds.with_x(zscore_apply(&scaler, ds.x())?, ds.feature_names().to_vec())
}

fn limit(ds: Dataset, limit: Option<usize>) -> Dataset {
    match limit {
        Some(n) if n < ds.n_samples() => ds.select_rows(&(0..n).collect::<Vec<_>>()),
        _ => ds,
    }
}

fn load_raw(cfg: &ExperimentConfig) -> Result<Dataset> {
    let d = &cfg.data;
    Ok(match cfg.benchmark {
        Benchmark::Sinc | Benchmark::SincDual => generate_sinc(d.n_samples, d.generator_seed)?,
        Benchmark::Iris => load_csv(d.find(&d.path, &["iris.csv"], "iris")?, &CsvSchema::iris())?,
        Benchmark::Abalone => {
            let ds = load_csv(d.find(&d.path, &["abalone.data", "abalone.csv"], "abalone")?, &CsvSchema::abalone(d.abalone_sex))?;
            let y = normalize_target_01(ds.values()?)?;
            ds.with_target(Target::Real(y))?
        }
        Benchmark::Liver => {
            let mut schema = CsvSchema::hcv(d.hcv_suspect);
            schema.missing = d.missing;
            load_csv(d.find(&d.path, &["hcvdat0.csv", "hcv.csv"], "HCV")?, &schema)?
        }
        Benchmark::Mnist => {
            let labels = d.find(&d.labels, &["train-labels-idx1-ubyte", "train-labels-idx1-ubyte.gz"], "MNIST labels")?;
            if let Some(emb) = &d.embedding {
                let lab = read_idx(labels)?;
                let names: Vec<String> = (0..10).map(|i| i.to_string()).collect();
                let y: Vec<usize> = lab.data.iter().map(|&v| v as usize).collect();
                let x = import_embedding(emb, Some(y.len()))?;
                Dataset::new(x, Target::Class { labels: y, names }, Vec::new())?
            } else {
                let images = d.find(&d.images, &["train-images-idx3-ubyte", "train-images-idx3-ubyte.gz"], "MNIST images")?;
                load_mnist_idx(images, labels)?
            }
        }
    })
}

/// Loads and preprocesses the benchmark data: [reduction] → z-score →
/// [SMOTE] → split. Sinc data is left unscaled.
pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    cfg.validate()?;
    let mut ds = limit(load_raw(cfg)?, cfg.data.limit);
    if cfg.benchmark == Benchmark::Mnist && cfg.data.embedding.is_none() {
        let (_, reduced) = pca_reduce(ds.x(), cfg.data.reduce_dims)?;
        let names = (0..cfg.data.reduce_dims).map(|i| format!("pc{}", i + 1)).collect();
        ds = ds.with_x(reduced, names)?;
    }
    let scaled = !matches!(cfg.benchmark, Benchmark::Sinc | Benchmark::SincDual);
    let smote = cfg.benchmark == Benchmark::Liver;
    match cfg.data.scaler_fit {
        ScalerFit::Full => {
            if scaled {
                ds = standardize(&ds, None)?;
            }
            if smote {
                ds = smote_balance(&ds, cfg.data.smote_k, cfg.data.smote_seed)?;
            }
            let split = split_indices(ds.n_samples(), &cfg.split)?;
            Ok(Prepared { dataset: ds, split })
        }
        ScalerFit::Train => {
            if smote {
                ds = smote_balance(&ds, cfg.data.smote_k, cfg.data.smote_seed)?;
            }
            let split = split_indices(ds.n_samples(), &cfg.split)?;
            if scaled {
                ds = standardize(&ds, Some(&split.train))?;
            }
            Ok(Prepared { dataset: ds, split })
        }
    }
}

pub fn transform_all(cfg: &ExperimentConfig, ds: &Dataset) -> Result<Vec<TrajectoryTensor>> {
    cfg.transformers
        .iter()
        .map(|spec| crate::transform::transform_with(ds.x(), spec, &cfg.integration, &cfg.encoding))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub n_samples: usize,
    pub n_features: usize,
    pub n_classes: usize,
    #[serde(default)]
    pub class_names: Vec<String>,
    pub n_train: usize,
    pub n_test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadoutReport {
    pub readout: ReadoutKind,
    pub metric: MetricKind,
    /// Same readout on the untransformed features.
    pub baseline: f64,
    #[serde(default)]
    pub baseline_confusion: Option<ConfusionMatrix>,
    pub sweep: SweepResult,
    #[serde(default)]
    pub confusion: Option<ConfusionMatrix>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub rows: Vec<ScanRow>,
    /// Over rows where both values are finite; NaN if fewer than three.
    #[serde(with = "crate::serde_float")]
    pub pearson_r: f64,
    /// Over rows with a positive exponent.
    #[serde(with = "crate::serde_float")]
    pub pearson_r_chaotic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitStudyReport {
    pub readout: ReadoutKind,
    /// 1-based iteration held fixed across splits.
    pub iteration: usize,
    pub seeds: Vec<u32>,
    pub values: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub baseline_values: Vec<f64>,
    pub baseline_mean: f64,
    pub baseline_std: f64,
    /// Transformed vs baseline; absent with a single split.
    #[serde(default)]
    pub paired: Option<TTest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub experiment_id: String,
    pub config: ExperimentConfig,
    pub dataset: DatasetSummary,
    pub readouts: Vec<ReadoutReport>,
    #[serde(default)]
    pub scan: Option<ScanReport>,
    #[serde(default)]
    pub optimization: Option<OptResult>,
    #[serde(default)]
    pub power: Option<PowerReport>,
    #[serde(default)]
    pub split_study: Option<Vec<SplitStudyReport>>,
    /// Wall time; the only field that varies between identical runs.
    pub elapsed_seconds: f64,
}

impl Report {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Copy with the timing zeroed, for reproducibility comparisons.
    pub fn without_timing(&self) -> Report {
        Report {
            elapsed_seconds: 0.0,
            ..self.clone()
        }
    }

    pub fn readout(&self, label: &str) -> Option<&ReadoutReport> {
        self.readouts.iter().find(|r| r.readout.label() == label)
    }

    /// Human-readable one-liners.
    pub fn summary(&self) -> Vec<String> {
        let mut out = vec![format!(
            "{}: {} samples ({} train / {} test), {} features",
            self.experiment_id, self.dataset.n_samples, self.dataset.n_train, self.dataset.n_test, self.dataset.n_features
        )];
        for r in &self.readouts {
            out.push(format!(
                "  {:<18} baseline {:.4}  transformed {:.4} at iteration {} ({:?} mode, selection {:.4})",
                r.readout.label(),
                r.baseline,
                r.sweep.reported_metric,
                r.sweep.best_iteration,
                r.sweep.mode,
                r.sweep.best_metric
            ));
        }
        if let Some(s) = &self.scan {
            out.push(format!(
                "  scan: {} rows, pearson r {:.3} (chaotic rows {:.3})",
                s.rows.len(),
                s.pearson_r,
                s.pearson_r_chaotic
            ));
        }
        if let Some(o) = &self.optimization {
            let params: Vec<String> = o.names.iter().zip(&o.best_params).map(|(n, v)| format!("{n}={v:.4}")).collect();
            out.push(format!(
                "  optimum {} objective {:.6} after {} evaluations",
                params.join(" "),
                o.best_objective,
                o.log.len()
            ));
        }
        if let Some(p) = &self.power {
            out.push(format!("  power {:.0} mW ({})", p.total_mw, p.note));
        }
        for s in self.split_study.iter().flatten() {
            out.push(format!(
                "  {} over {} splits at iteration {}: {:.4} ± {:.4} (baseline {:.4} ± {:.4})",
                s.readout.label(),
                s.values.len(),
                s.iteration,
                s.mean,
                s.std,
                s.baseline_mean,
                s.baseline_std
            ));
        }
        out
    }
}

fn summarize(p: &Prepared) -> DatasetSummary {
    DatasetSummary {
        n_samples: p.dataset.n_samples(),
        n_features: p.dataset.n_vars(),
        n_classes: p.dataset.n_classes(),
        class_names: p.dataset.class_names().map(<[String]>::to_vec).unwrap_or_default(),
        n_train: p.split.train.len(),
        n_test: p.split.test.len(),
    }
}

fn select_target(t: &Target, rows: &[usize]) -> Target {
    crate::readout::select_target(t, rows)
}

/// Fits on the training rows of `x` and scores the test rows.
fn evaluate(x: &DMatrix<f64>, target: &Target, split: &Split, cfg: &SweepConfig) -> Result<(f64, Prediction)> {
    let model = fit_pipeline(&x.select_rows(&split.train), &select_target(target, &split.train), &cfg.readout, cfg.lda, cfg.seed)?;
    let pred = model.predict(&x.select_rows(&split.test))?;
    Ok((score(&pred, &select_target(target, &split.test))?, pred))
}

fn confusion_for(pred: &Prediction, target: &Target, split: &Split) -> Result<Option<ConfusionMatrix>> {
    match (pred, target) {
        (Prediction::Labels(p), Target::Class { labels, names }) => {
            let truth: Vec<usize> = split.test.iter().map(|&i| labels[i]).collect();
            Ok(Some(confusion(p, &truth, names.len())?))
        }
        _ => Ok(None),
    }
}

/// Baseline and transformed readouts over a prepared dataset, sweeping
/// `n_iterations` feature matrices.
fn readout_reports<F>(cfg: &ExperimentConfig, prepared: &Prepared, n_iterations: usize, features: F) -> Result<Vec<ReadoutReport>>
where
    F: Fn(usize) -> Result<DMatrix<f64>> + Sync,
{
    let ds = &prepared.dataset;
    cfg.readouts
        .iter()
        .map(|&readout| {
            let sc = cfg.sweep_config(readout);
            let (baseline, base_pred) = evaluate(ds.x(), ds.target(), &prepared.split, &sc)?;
            let sweep = sweep_features(n_iterations, &features, ds.target(), &prepared.split, &sc)?;
            log::info!(
                "{}: baseline {baseline:.4}, transformed {:.4} at iteration {}",
                readout.label(),
                sweep.reported_metric,
                sweep.best_iteration
            );
            Ok(ReadoutReport {
                readout,
                metric: readout.metric(),
                baseline,
                baseline_confusion: confusion_for(&base_pred, ds.target(), &prepared.split)?,
                confusion: confusion_for(&sweep.predictions, ds.target(), &prepared.split)?,
                sweep,
            })
        })
        .collect()
}

fn report(id: String, cfg: &ExperimentConfig, prepared: &Prepared, readouts: Vec<ReadoutReport>, start: Instant) -> Report {
    Report {
        experiment_id: id,
        config: cfg.clone(),
        dataset: summarize(prepared),
        readouts,
        scan: None,
        optimization: None,
        power: None,
        split_study: None,
        elapsed_seconds: start.elapsed().as_secs_f64(),
    }
}

/// Runs the benchmark pipeline with its untransformed baseline.
pub fn run_benchmark(cfg: &ExperimentConfig) -> Result<Report> {
    let start = Instant::now();
    let prepared = prepare(cfg)?;
    let tensors = transform_all(cfg, &prepared.dataset)?;
    let readouts = readout_reports(cfg, &prepared, cfg.integration.n_steps, |k| Ok(stack_slices(&tensors, k)?.values))?;
    Ok(report(cfg.benchmark.name().into(), cfg, &prepared, readouts, start))
}

/// The same pipeline with the circuit model as transformer.
pub fn run_circuit(cfg: &ExperimentConfig) -> Result<Report> {
    let start = Instant::now();
    let prepared = prepare(cfg)?;
    let tensor = circuit_transform(prepared.dataset.x(), &cfg.circuit, &cfg.encoding)?;
    let readouts = readout_reports(cfg, &prepared, cfg.circuit.n_steps, |k| Ok(stack_slices(std::slice::from_ref(&tensor), k)?.values))?;
    let mut r = report(format!("circuit:{}", cfg.benchmark), cfg, &prepared, readouts, start);
    r.power = Some(power_estimate(&cfg.circuit));
    r.elapsed_seconds = start.elapsed().as_secs_f64();
    Ok(r)
}

fn finite_pearson(rows: &[ScanRow], keep: impl Fn(&ScanRow) -> bool) -> f64 {
    let (a, b): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| r.lle.is_finite() && r.best_accuracy.is_finite() && keep(r))
        .map(|r| (r.lle, r.best_accuracy))
        .unzip();
    pearson_r(&a, &b).unwrap_or(f64::NAN)
}

/// Exponent and best accuracy for every ρ in the scan grid, with σ and β
/// taken from the first transformer.
pub fn run_scan(cfg: &ExperimentConfig) -> Result<Report> {
    let start = Instant::now();
    if !cfg.benchmark.is_classification() {
        return Err(Error::InvalidConfig("the scan needs a classification benchmark".into()));
    }
    let spec = cfg.transformers[0];
    if spec.kind() != AttractorKind::Lorenz {
        return Err(Error::InvalidConfig("the scan varies the Lorenz ρ".into()));
    }
    let prepared = prepare(cfg)?;
    let scan_cfg = ScanConfig {
        sigma: spec.param("sigma").expect("lorenz"),
        beta: spec.param("beta").expect("lorenz"),
        integration: cfg.integration,
        lle: cfg.scan.lle,
        sweep: cfg.sweep_config(cfg.scan.readout),
    };
    let rows = lle_accuracy_scan(&prepared.dataset, &prepared.split, &cfg.scan.grid(), &scan_cfg)?;
    let mut r = report(format!("scan:{}", cfg.benchmark), cfg, &prepared, Vec::new(), start);
    r.scan = Some(ScanReport {
        pearson_r: finite_pearson(&rows, |_| true),
        pearson_r_chaotic: finite_pearson(&rows, |r| r.lle > 0.0),
        rows,
    });
    r.elapsed_seconds = start.elapsed().as_secs_f64();
    Ok(r)
}

/// Default search space: ρ alone for the single-transformer sinc task,
/// (β, ρ) for abalone, and (ρ1, ρ2) for two transformers.
pub fn default_space(cfg: &ExperimentConfig) -> Result<SearchSpace> {
    let t = &cfg.transformers[0];
    let fixed: Vec<(&str, f64)> = t
        .kind()
        .param_names()
        .iter()
        .filter(|&&n| n != "rho" && !(cfg.benchmark == Benchmark::Abalone && n == "beta"))
        .map(|&n| (n, t.param(n).expect("named parameter")))
        .collect();
    if t.kind() != AttractorKind::Lorenz {
        return Err(Error::InvalidConfig("the default search space varies the Lorenz ρ; give optimize.space".into()));
    }
    match (cfg.transformers.len(), cfg.benchmark) {
        (2, _) => SearchSpace::build(&[("rho1", 1.0, 100.0), ("rho2", 1.0, 100.0)], &fixed),
        (1, Benchmark::Abalone) => SearchSpace::build(&[("beta", 0.5, 5.0), ("rho", 1.0, 100.0)], &fixed),
        (1, _) => SearchSpace::build(&[("rho", 1.0, 100.0)], &fixed),
        _ => Err(Error::InvalidConfig("default search handles one or two transformers".into())),
    }
}

/// Builds transformer specs from a point of the search space: names that
/// are flow parameters apply to every transformer, `rho1`/`rho2` to the
/// first/second one.
fn specs_at(cfg: &ExperimentConfig, names: &[&str], values: &[f64]) -> Result<Vec<AttractorSpec>> {
    cfg.transformers
        .iter()
        .enumerate()
        .map(|(i, base)| {
            let mut spec = *base;
            for (&n, &v) in names.iter().zip(values) {
                let target = match n {
                    "rho1" if i == 0 => "rho",
                    "rho2" if i == 1 => "rho",
                    "rho1" | "rho2" => continue,
                    other => other,
                };
                spec = spec.with_param(target, v)?;
            }
            Ok(spec)
        })
        .collect()
}

/// Minimizes the paper-mode sweep optimum of the first readout (RMSE, or
/// 1 − accuracy) over the search space, then reruns the benchmark at the
/// optimum.
pub fn run_optimize(cfg: &ExperimentConfig) -> Result<Report> {
    let start = Instant::now();
    let prepared = prepare(cfg)?;
    let space = match &cfg.optimize.space {
        Some(s) => s.clone(),
        None => default_space(cfg)?,
    };
    let names = space.names();
    let readout = cfg.readouts[0];
    let sweep_cfg = SweepConfig {
        mode: SelectionMode::Paper,
        ..cfg.sweep_config(readout)
    };
    let objective = |values: &[f64]| -> Result<f64> {
        let specs = specs_at(cfg, &names, values)?;
        let tensors: Vec<TrajectoryTensor> = specs
            .iter()
            .map(|s| transform(prepared.dataset.x(), s, &cfg.integration))
            .collect::<Result<_>>()?;
        let r = iteration_sweep(&tensors, prepared.dataset.target(), &prepared.split, &sweep_cfg)?;
        Ok(match r.metric {
            MetricKind::Rmse => r.best_metric,
            MetricKind::Accuracy => 1.0 - r.best_metric,
        })
    };
    let o = &cfg.optimize;
    let dual = names.contains(&"rho1") && names.contains(&"rho2");
    let result = if dual {
        optimize_dual_rho(objective, &space, o.budget, o.strategy, o.seed)?
    } else {
        optimize(objective, &space, o.budget, o.strategy, o.seed)?
    };
    let mut best_cfg = cfg.clone();
    best_cfg.transformers = specs_at(cfg, &names, &result.best_params)?;
    let tensors = transform_all(&best_cfg, &prepared.dataset)?;
    let readouts = readout_reports(&best_cfg, &prepared, cfg.integration.n_steps, |k| Ok(stack_slices(&tensors, k)?.values))?;
    let mut r = report(format!("optimize:{}", cfg.benchmark), cfg, &prepared, readouts, start);
    r.optimization = Some(result);
    r.elapsed_seconds = start.elapsed().as_secs_f64();
    Ok(r)
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (m, 0.0);
    }
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, var.sqrt())
}

/// Fixes each readout's best iteration from the configured split, then
/// re-splits with seeds `0..n_splits` and reports mean and sample standard
/// deviation of the test metric, with the baseline alongside.
pub fn emit_split_study(cfg: &ExperimentConfig, n_splits: usize) -> Result<Report> {
    let start = Instant::now();
    if n_splits == 0 {
        return Err(Error::InvalidConfig("n_splits must be at least 1".into()));
    }
    if !cfg.benchmark.is_classification() {
        return Err(Error::InvalidConfig("split studies apply to classification benchmarks".into()));
    }
    let prepared = prepare(cfg)?;
    let tensors = transform_all(cfg, &prepared.dataset)?;
    let readouts = readout_reports(cfg, &prepared, cfg.integration.n_steps, |k| Ok(stack_slices(&tensors, k)?.values))?;
    let ds = &prepared.dataset;
    let seeds: Vec<u32> = (0..n_splits as u32).collect();
    let study = readouts
        .iter()
        .map(|rr| {
            let sc = cfg.sweep_config(rr.readout);
            let features = stack_slices(&tensors, rr.sweep.best_iteration - 1)?.values;
            let mut values = Vec::with_capacity(n_splits);
            let mut baseline_values = Vec::with_capacity(n_splits);
            for &seed in &seeds {
                let split = split_indices(ds.n_samples(), &cfg.split.with_seed(seed))?;
                values.push(evaluate(&features, ds.target(), &split, &sc)?.0);
                baseline_values.push(evaluate(ds.x(), ds.target(), &split, &sc)?.0);
            }
            let (mean, std) = mean_std(&values);
            let (baseline_mean, baseline_std) = mean_std(&baseline_values);
            let paired = if n_splits >= 2 { Some(paired_t(&values, &baseline_values)?) } else { None };
            Ok(SplitStudyReport {
                readout: rr.readout,
                iteration: rr.sweep.best_iteration,
                seeds: seeds.clone(),
                values,
                mean,
                std,
                baseline_values,
                baseline_mean,
                baseline_std,
                paired,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut r = report(format!("split-study:{}", cfg.benchmark), cfg, &prepared, readouts, start);
    r.split_study = Some(study);
    r.elapsed_seconds = start.elapsed().as_secs_f64();
    Ok(r)
}

/// Writes the first transformer's tensor for the prepared data.
pub fn export_transform(cfg: &ExperimentConfig, path: impl AsRef<Path>) -> Result<TrajectoryTensor> {
    let prepared = prepare(cfg)?;
    let t = crate::transform::transform_with(prepared.dataset.x(), &cfg.transformers[0], &cfg.integration, &cfg.encoding)?;
    save_tensor(&t, path)?;
    Ok(t)
}

/// `report.json` plus whichever CSV artifacts the report carries:
/// `curve.csv`, `confusion.csv`, `scan.csv`, `optimization.csv`.
pub fn write_artifacts(report: &Report, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    use std::io::Write;
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let path = dir.join("report.json");
    std::fs::write(&path, report.to_json()?)?;
    written.push(path);
    if !report.readouts.is_empty() {
        let path = dir.join("curve.csv");
        let mut w = std::io::BufWriter::new(std::fs::File::create(&path)?);
        writeln!(w, "readout,iteration,selection_metric,test_metric")?;
        for r in &report.readouts {
            for (k, (s, t)) in r.sweep.curve.iter().zip(&r.sweep.test_curve).enumerate() {
                writeln!(w, "{},{},{},{}", r.readout.label(), k + 1, s, t)?;
            }
        }
        w.flush()?;
        written.push(path);
    }
    let names = &report.dataset.class_names;
    if report.readouts.iter().any(|r| r.confusion.is_some()) {
        let path = dir.join("confusion.csv");
        let mut w = std::io::BufWriter::new(std::fs::File::create(&path)?);
        writeln!(w, "readout,stage,true,predicted,count,fraction,percent")?;
        for r in &report.readouts {
            for (stage, cm) in [("baseline", &r.baseline_confusion), ("transformed", &r.confusion)] {
                let Some(cm) = cm else { continue };
                let pct = cm.percent_rounded();
                for t in 0..cm.n_classes() {
                    for p in 0..cm.n_classes() {
                        let name = |k: usize| names.get(k).cloned().unwrap_or_else(|| k.to_string());
                        writeln!(
                            w,
                            "{},{stage},{},{},{},{},{}",
                            r.readout.label(),
                            name(t),
                            name(p),
                            cm.counts[(t, p)],
                            cm.normalized[(t, p)],
                            pct[(t, p)]
                        )?;
                    }
                }
            }
        }
        w.flush()?;
        written.push(path);
    }
    if let Some(s) = &report.scan {
        let path = dir.join("scan.csv");
        write_scan_csv(&s.rows, std::io::BufWriter::new(std::fs::File::create(&path)?))?;
        written.push(path);
    }
    if let Some(o) = &report.optimization {
        let path = dir.join("optimization.csv");
        o.write_log_csv(std::io::BufWriter::new(std::fs::File::create(&path)?))?;
        written.push(path);
    }
    Ok(written)
}
