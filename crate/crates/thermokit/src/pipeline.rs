//! End-to-end orchestration: cohort acquisition, normalization,
//! factorization with optional eigenvector shrinkage, heterogeneity
//! embedding, thermomic features, spectral reduction, and
//! cross-validated classification — plus the method-comparison harness
//! that runs a Cartesian product of factorizations and embeddings on one
//! shared cohort with shared fold assignments.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classify::{
    cross_validate_with_folds, stratified_fold_assignments, ClassificationReport, ClassifierSpec,
    Dataset,
};
use crate::embedding::{embed, write_csv, write_pgm, EmbeddedImage, EmbeddingKind, EmbeddingParams};
use crate::error::{Error, Result};
use crate::factorize::{factorize, FactorizeConfig, Method};
use crate::jse::{jse_shrink, CovSpectrum, JseResult};
use crate::seqio::{
    build_heat_matrix, generate_phantom, load_sequence, normalize_by_reference, save_sequence,
    HeatMatrix, Mask, PhantomLabel, PhantomSpec, ThermalSequence,
};
use crate::thermomics::{extract_features, spectral_embed, ReducedFeatures, FEATURE_NAMES};

const SEED_STRIDE: u64 = 0x9e37_79b9_7f4a_7c15;

const STAGE_NAMES: [&str; 7] = [
    "input",
    "normalize",
    "heat-matrix",
    "factorize",
    "embed",
    "features",
    "classify",
];

/// Geometry and physics shared by every phantom of a cohort. Healthy
/// members drop the hotspots; abnormal members keep them.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct PhantomTemplate {
    pub height: usize,
    pub width: usize,
    pub frames: usize,
    pub hotspot_count: usize,
    pub hotspot_amplitude: f64,
    pub hotspot_sigma: f64,
    pub flicker_amplitude: f64,
    pub noise_sigma: f64,
}

impl Default for PhantomTemplate {
    fn default() -> Self {
        PhantomTemplate {
            height: 32,
            width: 32,
            frames: 23,
            hotspot_count: 3,
            hotspot_amplitude: 2.0,
            hotspot_sigma: 2.5,
            flicker_amplitude: 0.3,
            noise_sigma: 0.05,
        }
    }
}

impl PhantomTemplate {
    pub fn member_spec(&self, label: PhantomLabel, seed: u64) -> PhantomSpec {
        let active = label == PhantomLabel::Abnormal;
        PhantomSpec {
            height: self.height,
            width: self.width,
            frames: self.frames,
            label,
            hotspot_count: if active { self.hotspot_count } else { 0 },
            hotspot_amplitude: if active { self.hotspot_amplitude } else { 0.0 },
            hotspot_sigma: self.hotspot_sigma,
            flicker_amplitude: self.flicker_amplitude,
            noise_sigma: self.noise_sigma,
            seed,
        }
    }
}

/// Where the cohort comes from: synthesized phantoms or a directory with
/// `healthy/` and `abnormal/` subdirectories of sequence containers.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputSpec {
    PhantomCohort {
        healthy: usize,
        abnormal: usize,
        #[serde(default)]
        template: PhantomTemplate,
    },
    Directory {
        path: PathBuf,
    },
}

impl Default for InputSpec {
    fn default() -> Self {
        InputSpec::PhantomCohort {
            healthy: 30,
            abnormal: 30,
            template: PhantomTemplate::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct FactorizationSettings {
    pub method: Method,
    pub config: FactorizeConfig,
}

impl Default for FactorizationSettings {
    fn default() -> Self {
        FactorizationSettings {
            method: Method::Pct,
            config: FactorizeConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct FeatureSettings {
    /// Gray levels for quantized first-order/GLCM features.
    pub levels: usize,
    /// Spectral embedding dimension.
    pub spectral_d: usize,
    /// kNN graph degree; raised automatically if the graph disconnects.
    pub graph_k: usize,
}

impl Default for FeatureSettings {
    fn default() -> Self {
        FeatureSettings {
            levels: 32,
            spectral_d: 7,
            graph_k: 10,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct ClassifierSettings {
    pub spec: ClassifierSpec,
    pub folds: usize,
    pub repeats: usize,
}

impl Default for ClassifierSettings {
    fn default() -> Self {
        ClassifierSettings {
            spec: ClassifierSpec::default(),
            folds: 5,
            repeats: 3,
        }
    }
}

/// Everything a run needs; serialized verbatim into the manifest so an
/// experiment is reproducible from the manifest alone.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct PipelineConfig {
    pub input: InputSpec,
    pub factorization: FactorizationSettings,
    pub apply_jse: bool,
    pub embedding: EmbeddingParams,
    pub features: FeatureSettings,
    pub classifier: ClassifierSettings,
    pub output_dir: PathBuf,
    pub master_seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            input: InputSpec::default(),
            factorization: FactorizationSettings::default(),
            apply_jse: true,
            embedding: EmbeddingParams::default(),
            features: FeatureSettings::default(),
            classifier: ClassifierSettings::default(),
            output_dir: PathBuf::from("out"),
            master_seed: 7,
        }
    }
}

impl PipelineConfig {
    /// Configuration-level checks (exit code 2 territory). Stage-level
    /// problems like p = 0 are deliberately left to the stages.
    pub fn validate(&self) -> Result<()> {
        match &self.input {
            InputSpec::PhantomCohort {
                healthy,
                abnormal,
                template,
            } => {
                if *healthy == 0 || *abnormal == 0 {
                    return Err(Error::PipelineConfig(
                        "phantom cohort needs at least one member per class".into(),
                    ));
                }
                template
                    .member_spec(PhantomLabel::Abnormal, 0)
                    .validate()
                    .map_err(|e| Error::PipelineConfig(e.to_string()))?;
            }
            InputSpec::Directory { path } => {
                if !path.is_dir() {
                    return Err(Error::PipelineConfig(format!(
                        "input directory {} does not exist",
                        path.display()
                    )));
                }
            }
        }
        if self.features.levels < 2 {
            return Err(Error::PipelineConfig("levels must be >= 2".into()));
        }
        if self.features.spectral_d == 0 || self.features.graph_k == 0 {
            return Err(Error::PipelineConfig(
                "spectral_d and graph_k must be >= 1".into(),
            ));
        }
        if self.classifier.folds < 2 {
            return Err(Error::PipelineConfig("folds must be >= 2".into()));
        }
        if self.classifier.repeats == 0 {
            return Err(Error::PipelineConfig("repeats must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StageRecord {
    pub name: String,
    pub status: String,
}

/// Run record: the full config, every seed, stage outcomes, and the
/// artifact list. `partial` is set when a stage failed after earlier
/// artifacts were already written.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub config: PipelineConfig,
    pub master_seed: u64,
    pub stages: Vec<StageRecord>,
    pub partial: bool,
    pub sample_ids: Vec<String>,
    pub labels: Vec<u8>,
    pub fold_assignment_sha256: Option<String>,
    pub graph_k_used: Option<usize>,
    pub spectral_sigma: Option<f64>,
    pub jse_applied: bool,
    pub artifacts: Vec<String>,
}

#[derive(Debug)]
pub struct PipelineOutcome {
    pub report: ClassificationReport,
    pub report_path: PathBuf,
    pub manifest_path: PathBuf,
    pub features_path: PathBuf,
    pub fold_assignment_sha256: String,
}

pub struct CohortMember {
    pub id: String,
    pub label: u8,
    pub seq: ThermalSequence,
}

struct PreparedSample {
    id: String,
    label: u8,
    heat: HeatMatrix,
    roi: Mask,
}

struct ProcessedSample {
    img: EmbeddedImage,
    features: Vec<f64>,
    jse: Option<JseResult>,
}

/// Shrink the leading basis vector toward its entry mean using the
/// sample covariance of the heat matrix across frames. Works for any
/// factorization: the "eigenvalue" is the Rayleigh quotient b'Sb, which
/// coincides with the top eigenvalue when b comes from PCT.
pub fn jse_correct_leading(x: &HeatMatrix, basis: &DVector<f64>) -> Result<JseResult> {
    let p = x.pixels();
    let n = x.frames();
    if n < 2 {
        return Err(Error::DegenerateCovariance(
            "need at least 2 frames for covariance".into(),
        ));
    }
    let norm = basis.norm();
    if norm == 0.0 {
        return Err(Error::DegenerateCovariance("zero basis vector".into()));
    }
    let b = basis / norm;

    let mut centered = x.data.clone();
    for i in 0..p {
        let mean = centered.row(i).sum() / n as f64;
        for j in 0..n {
            centered[(i, j)] -= mean;
        }
    }
    let denom = (n - 1) as f64;
    let trace = centered.iter().map(|v| v * v).sum::<f64>() / denom;
    let lambda2 = (centered.transpose() * &b).norm_squared() / denom;

    let spectrum = CovSpectrum {
        trace,
        leading_eigenvalue: lambda2,
        leading_eigenvector: b,
        p,
        n,
        tail_eigenvalues: Vec::new(),
    };
    jse_shrink(&spectrum)
}

fn member_seed(master_seed: u64, index: usize) -> u64 {
    master_seed.wrapping_add(((index + 1) as u64).wrapping_mul(SEED_STRIDE))
}

/// Synthesize a phantom cohort: healthy members first, then abnormal,
/// each with its own derived seed.
pub fn generate_cohort(
    healthy: usize,
    abnormal: usize,
    template: &PhantomTemplate,
    master_seed: u64,
) -> Result<Vec<CohortMember>> {
    let mut members = Vec::with_capacity(healthy + abnormal);
    for i in 0..healthy + abnormal {
        let label = if i < healthy {
            PhantomLabel::Healthy
        } else {
            PhantomLabel::Abnormal
        };
        let spec = template.member_spec(label, member_seed(master_seed, i));
        let id = match label {
            PhantomLabel::Healthy => format!("healthy_{i:03}"),
            PhantomLabel::Abnormal => format!("abnormal_{:03}", i - healthy),
        };
        members.push(CohortMember {
            id,
            label: u8::from(label == PhantomLabel::Abnormal),
            seq: generate_phantom(&spec)?,
        });
    }
    Ok(members)
}

/// Write a phantom cohort to disk as `healthy/*.thsq` and
/// `abnormal/*.thsq`, the layout the directory input expects.
pub fn write_phantom_cohort(
    healthy: usize,
    abnormal: usize,
    template: &PhantomTemplate,
    master_seed: u64,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    let members = generate_cohort(healthy, abnormal, template, master_seed)?;
    fs::create_dir_all(out_dir.join("healthy"))?;
    fs::create_dir_all(out_dir.join("abnormal"))?;
    let mut written = Vec::with_capacity(members.len());
    for m in &members {
        let sub = if m.label == 1 { "abnormal" } else { "healthy" };
        let path = out_dir.join(sub).join(format!("{}.thsq", m.id));
        save_sequence(&m.seq, &path)?;
        written.push(path);
    }
    Ok(written)
}

fn load_cohort_dir(dir: &Path) -> Result<Vec<CohortMember>> {
    let mut members = Vec::new();
    for (sub, label) in [("healthy", 0u8), ("abnormal", 1u8)] {
        let class_dir = dir.join(sub);
        if !class_dir.is_dir() {
            return Err(Error::PipelineConfig(format!(
                "missing cohort subdirectory {}",
                class_dir.display()
            )));
        }
        let mut paths: Vec<PathBuf> = fs::read_dir(&class_dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "thsq"))
            .collect();
        paths.sort();
        for path in paths {
            let id = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            members.push(CohortMember {
                id,
                label,
                seq: load_sequence(&path)?,
            });
        }
    }
    if !members.iter().any(|m| m.label == 0) || !members.iter().any(|m| m.label == 1) {
        return Err(Error::PipelineConfig(
            "cohort directory must hold at least one sequence per class".into(),
        ));
    }
    Ok(members)
}

fn acquire_cohort(input: &InputSpec, master_seed: u64) -> Result<Vec<CohortMember>> {
    match input {
        InputSpec::PhantomCohort {
            healthy,
            abnormal,
            template,
        } => generate_cohort(*healthy, *abnormal, template, master_seed),
        InputSpec::Directory { path } => load_cohort_dir(path),
    }
}

/// Spectral reduction with automatic graph-degree escalation: a
/// disconnected kNN graph doubles k (capped at n-1, where the union
/// graph is complete and always connected).
fn spectral_with_retry(
    features: &DMatrix<f64>,
    d: usize,
    k0: usize,
) -> Result<(ReducedFeatures, usize)> {
    let n = features.nrows();
    let mut k = k0.min(n.saturating_sub(1)).max(1);
    loop {
        match spectral_embed(features, d, k) {
            Ok(r) => return Ok((r, k)),
            Err(Error::DisconnectedGraph { .. }) if k < n - 1 => k = (k * 2).min(n - 1),
            Err(e) => return Err(e),
        }
    }
}

fn process_sample(prepared: &PreparedSample, cfg: &PipelineConfig) -> Result<ProcessedSample> {
    let mut result = factorize(
        cfg.factorization.method,
        &prepared.heat,
        &cfg.factorization.config,
    )
    .map_err(|e| e.at_stage("factorize"))?;

    let jse = if cfg.apply_jse {
        let corrected = jse_correct_leading(&prepared.heat, &result.leading_basis())
            .map_err(|e| e.at_stage("factorize"))?;
        result.basis.set_column(0, &corrected.b_jse);
        Some(corrected)
    } else {
        None
    };

    let img = embed(&result.basis, &prepared.roi, &cfg.embedding)
        .map_err(|e| e.at_stage("embed"))?;
    let features = extract_features(&img, &prepared.roi, cfg.features.levels)
        .map_err(|e| e.at_stage("features"))?;

    Ok(ProcessedSample {
        img,
        features: features.values,
        jse,
    })
}

fn fold_hash(assignments: &[Vec<usize>]) -> String {
    let mut hasher = Sha256::new();
    for repeat in assignments {
        for &fold in repeat {
            hasher.update((fold as u64).to_le_bytes());
        }
    }
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn write_features_csv(
    path: &Path,
    ids: &[String],
    labels: &[u8],
    features: &[Vec<f64>],
) -> Result<()> {
    let mut out = String::from("id,label");
    for name in FEATURE_NAMES {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for ((id, &label), row) in ids.iter().zip(labels).zip(features) {
        out.push_str(id);
        out.push(',');
        out.push_str(&label.to_string());
        for v in row {
            out.push_str(&format!(",{v:.17e}"));
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

fn write_roc_csv(path: &Path, points: &[(f64, f64)]) -> Result<()> {
    let mut out = String::from("fpr,tpr\n");
    for (fpr, tpr) in points {
        out.push_str(&format!("{fpr},{tpr}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}

fn write_confusion_csv(path: &Path, report: &ClassificationReport) -> Result<()> {
    let c = report.pooled_confusion;
    let out = format!(
        "tp,fp,fn,tn\n{},{},{},{}\n",
        c.tp, c.fp, c.fn_, c.tn
    );
    fs::write(path, out)?;
    Ok(())
}

/// Execute the full workflow and write all artifacts under
/// `cfg.output_dir`. On a stage failure the manifest is still written
/// with the failed stage marked and `partial: true`.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineOutcome> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.output_dir)?;

    let mut stages: Vec<StageRecord> = STAGE_NAMES
        .iter()
        .map(|n| StageRecord {
            name: n.to_string(),
            status: "pending".to_string(),
        })
        .collect();

    match run_stages(cfg, &mut stages) {
        Ok(outcome) => Ok(outcome),
        Err(err) => {
            if let Error::Stage { stage, .. } = &err {
                for s in stages.iter_mut() {
                    if s.name == *stage {
                        s.status = "failed".to_string();
                    }
                }
            }
            let manifest = Manifest {
                config: cfg.clone(),
                master_seed: cfg.master_seed,
                stages,
                partial: true,
                sample_ids: Vec::new(),
                labels: Vec::new(),
                fold_assignment_sha256: None,
                graph_k_used: None,
                spectral_sigma: None,
                jse_applied: cfg.apply_jse,
                artifacts: Vec::new(),
            };
            if let Ok(bytes) = serde_json::to_vec_pretty(&manifest) {
                let _ = fs::write(cfg.output_dir.join("manifest.json"), bytes);
            }
            Err(err)
        }
    }
}

fn run_stages(cfg: &PipelineConfig, stages: &mut [StageRecord]) -> Result<PipelineOutcome> {
    let done = |name: &str, stages: &mut [StageRecord]| {
        for s in stages.iter_mut() {
            if s.name == name {
                s.status = "ok".to_string();
            }
        }
    };

    let members = acquire_cohort(&cfg.input, cfg.master_seed)
        .map_err(|e| e.at_stage("input"))?;
    done("input", stages);

    let prepared: Vec<PreparedSample> = members
        .into_iter()
        .map(|m| {
            let normalized = normalize_by_reference(&m.seq);
            let roi = normalized.roi.clone();
            let heat = build_heat_matrix(&normalized).map_err(|e| e.at_stage("heat-matrix"))?;
            Ok(PreparedSample {
                id: m.id,
                label: m.label,
                heat,
                roi,
            })
        })
        .collect::<Result<_>>()?;
    done("normalize", stages);
    done("heat-matrix", stages);

    let processed: Vec<ProcessedSample> = prepared
        .par_iter()
        .map(|s| process_sample(s, cfg))
        .collect::<Result<_>>()?;
    done("factorize", stages);
    done("embed", stages);

    let ids: Vec<String> = prepared.iter().map(|s| s.id.clone()).collect();
    let labels: Vec<u8> = prepared.iter().map(|s| s.label).collect();

    // Per-sample heterogeneity maps.
    let embedded_dir = cfg.output_dir.join("embedded");
    fs::create_dir_all(&embedded_dir)?;
    let mut artifacts = Vec::new();
    for (sample, prep) in processed.iter().zip(&prepared) {
        let id = &prep.id;
        let pgm = embedded_dir.join(format!("{id}.pgm"));
        let csv = embedded_dir.join(format!("{id}.csv"));
        write_pgm(&sample.img, &prep.roi, &pgm).map_err(|e| e.at_stage("embed"))?;
        write_csv(&sample.img, &csv).map_err(|e| e.at_stage("embed"))?;
        artifacts.push(pgm.display().to_string());
        artifacts.push(csv.display().to_string());
    }

    let feature_rows: Vec<Vec<f64>> = processed.iter().map(|s| s.features.clone()).collect();
    let features_path = cfg.output_dir.join("features.csv");
    write_features_csv(&features_path, &ids, &labels, &feature_rows)
        .map_err(|e| e.at_stage("features"))?;
    artifacts.push(features_path.display().to_string());

    let n = feature_rows.len();
    let feature_matrix =
        DMatrix::from_fn(n, FEATURE_NAMES.len(), |r, c| feature_rows[r][c]);
    let (reduced, graph_k_used) =
        spectral_with_retry(&feature_matrix, cfg.features.spectral_d, cfg.features.graph_k)
            .map_err(|e| e.at_stage("features"))?;
    done("features", stages);

    let ds = Dataset::new(reduced.matrix.clone(), labels.clone(), ids.clone())
        .map_err(|e| e.at_stage("classify"))?;
    let assignments = stratified_fold_assignments(
        &labels,
        cfg.classifier.folds,
        cfg.classifier.repeats,
        cfg.master_seed,
    )
    .map_err(|e| e.at_stage("classify"))?;
    let hash = fold_hash(&assignments);
    let report = cross_validate_with_folds(&ds, &cfg.classifier.spec, &assignments, cfg.master_seed)
        .map_err(|e| e.at_stage("classify"))?;
    done("classify", stages);

    let report_path = cfg.output_dir.join("report.json");
    fs::write(&report_path, serde_json::to_vec_pretty(&report)?)?;
    artifacts.push(report_path.display().to_string());

    let roc_path = cfg.output_dir.join("roc.csv");
    write_roc_csv(&roc_path, &report.roc_points)?;
    artifacts.push(roc_path.display().to_string());

    let confusion_path = cfg.output_dir.join("confusion.csv");
    write_confusion_csv(&confusion_path, &report)?;
    artifacts.push(confusion_path.display().to_string());

    let manifest_path = cfg.output_dir.join("manifest.json");
    let manifest = Manifest {
        config: cfg.clone(),
        master_seed: cfg.master_seed,
        stages: stages.to_vec(),
        partial: false,
        sample_ids: ids,
        labels,
        fold_assignment_sha256: Some(hash.clone()),
        graph_k_used: Some(graph_k_used),
        spectral_sigma: Some(reduced.sigma),
        jse_applied: cfg.apply_jse && processed.iter().all(|s| s.jse.is_some()),
        artifacts,
    };
    fs::write(&manifest_path, serde_json::to_vec_pretty(&manifest)?)?;

    Ok(PipelineOutcome {
        report,
        report_path,
        manifest_path,
        features_path,
        fold_assignment_sha256: hash,
    })
}

/// One cell of the comparison table.
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonRow {
    pub method: String,
    pub embedding: String,
    pub accuracy_median: f64,
    pub accuracy_q25: f64,
    pub accuracy_q75: f64,
    pub kappa_median: f64,
    pub kappa_q25: f64,
    pub kappa_q75: f64,
    pub auc: f64,
    /// Factorization time for the method plus this cell's embedding,
    /// feature, and cross-validation time.
    pub wall_clock_s: f64,
    pub fold_assignment_sha256: String,
}

/// The comparison's default method set: the seven factorizations the
/// comparison table covers (convex NMF is exposed but not part of the
/// default table).
pub fn comparison_methods() -> Vec<Method> {
    Method::ALL
        .iter()
        .copied()
        .filter(|m| *m != Method::ConvexNmf)
        .collect()
}

/// Run methods x embeddings on one shared cohort with shared fold
/// assignments and write `comparison.csv` under `cfg.output_dir`.
pub fn run_comparison(
    cfg: &PipelineConfig,
    methods: &[Method],
    embeddings: &[EmbeddingKind],
) -> Result<(Vec<ComparisonRow>, PathBuf)> {
    if methods.is_empty() || embeddings.is_empty() {
        return Err(Error::PipelineConfig(
            "comparison needs at least one method and one embedding".into(),
        ));
    }
    cfg.validate()?;
    fs::create_dir_all(&cfg.output_dir)?;

    let members =
        acquire_cohort(&cfg.input, cfg.master_seed).map_err(|e| e.at_stage("input"))?;
    let prepared: Vec<PreparedSample> = members
        .into_iter()
        .map(|m| {
            let normalized = normalize_by_reference(&m.seq);
            let roi = normalized.roi.clone();
            let heat = build_heat_matrix(&normalized).map_err(|e| e.at_stage("heat-matrix"))?;
            Ok(PreparedSample {
                id: m.id,
                label: m.label,
                heat,
                roi,
            })
        })
        .collect::<Result<_>>()?;

    let ids: Vec<String> = prepared.iter().map(|s| s.id.clone()).collect();
    let labels: Vec<u8> = prepared.iter().map(|s| s.label).collect();
    let assignments = stratified_fold_assignments(
        &labels,
        cfg.classifier.folds,
        cfg.classifier.repeats,
        cfg.master_seed,
    )
    .map_err(|e| e.at_stage("classify"))?;
    let hash = fold_hash(&assignments);

    let mut rows = Vec::with_capacity(methods.len() * embeddings.len());
    for &method in methods {
        let fact_start = Instant::now();
        let bases: Vec<DMatrix<f64>> = prepared
            .par_iter()
            .map(|s| {
                let mut result = factorize(method, &s.heat, &cfg.factorization.config)
                    .map_err(|e| e.at_stage("factorize"))?;
                if cfg.apply_jse {
                    let corrected = jse_correct_leading(&s.heat, &result.leading_basis())
                        .map_err(|e| e.at_stage("factorize"))?;
                    result.basis.set_column(0, &corrected.b_jse);
                }
                Ok(result.basis)
            })
            .collect::<Result<_>>()?;
        let fact_secs = fact_start.elapsed().as_secs_f64();

        for &kind in embeddings {
            let cell_start = Instant::now();
            let mut params = cfg.embedding.clone();
            params.kind = kind;
            let feature_rows: Vec<Vec<f64>> = prepared
                .par_iter()
                .zip(&bases)
                .map(|(s, basis)| {
                    let img = embed(basis, &s.roi, &params).map_err(|e| e.at_stage("embed"))?;
                    let fv = extract_features(&img, &s.roi, cfg.features.levels)
                        .map_err(|e| e.at_stage("features"))?;
                    Ok(fv.values)
                })
                .collect::<Result<_>>()?;
            let n = feature_rows.len();
            let feature_matrix =
                DMatrix::from_fn(n, FEATURE_NAMES.len(), |r, c| feature_rows[r][c]);
            let (reduced, _) = spectral_with_retry(
                &feature_matrix,
                cfg.features.spectral_d,
                cfg.features.graph_k,
            )
            .map_err(|e| e.at_stage("features"))?;
            let ds = Dataset::new(reduced.matrix.clone(), labels.clone(), ids.clone())
                .map_err(|e| e.at_stage("classify"))?;
            let report =
                cross_validate_with_folds(&ds, &cfg.classifier.spec, &assignments, cfg.master_seed)
                    .map_err(|e| e.at_stage("classify"))?;

            rows.push(ComparisonRow {
                method: method.name().to_string(),
                embedding: kind.name().to_string(),
                accuracy_median: report.accuracy_median,
                accuracy_q25: report.accuracy_iqr.0,
                accuracy_q75: report.accuracy_iqr.1,
                kappa_median: report.kappa_median,
                kappa_q25: report.kappa_iqr.0,
                kappa_q75: report.kappa_iqr.1,
                auc: report.auc,
                wall_clock_s: fact_secs + cell_start.elapsed().as_secs_f64(),
                fold_assignment_sha256: hash.clone(),
            });
        }
    }

    let path = cfg.output_dir.join("comparison.csv");
    let mut out = String::from(
        "method,embedding,accuracy_median,accuracy_q25,accuracy_q75,\
         kappa_median,kappa_q25,kappa_q75,auc,wall_clock_s,fold_assignment_sha256\n",
    );
    for row in &rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            row.method,
            row.embedding,
            row.accuracy_median,
            row.accuracy_q25,
            row.accuracy_q75,
            row.kappa_median,
            row.kappa_q25,
            row.kappa_q75,
            row.auc,
            row.wall_clock_s,
            row.fold_assignment_sha256,
        ));
    }
    fs::write(&path, out)?;
    Ok((rows, path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::ClassifierSpec;

    /// Small, fast configuration used by the module tests.
    fn tiny_config(out: &Path) -> PipelineConfig {
        PipelineConfig {
            input: InputSpec::PhantomCohort {
                healthy: 8,
                abnormal: 8,
                template: PhantomTemplate {
                    height: 16,
                    width: 16,
                    frames: 12,
                    ..PhantomTemplate::default()
                },
            },
            classifier: ClassifierSettings {
                spec: ClassifierSpec::NaiveBayes,
                folds: 2,
                repeats: 2,
            },
            features: FeatureSettings {
                levels: 16,
                spectral_d: 2,
                graph_k: 4,
            },
            output_dir: out.to_path_buf(),
            master_seed: 11,
            ..PipelineConfig::default()
        }
    }

    #[test]
    fn tiny_run_produces_all_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_config(dir.path());
        let outcome = run_pipeline(&cfg).unwrap();
        assert!(outcome.report_path.is_file());
        assert!(outcome.features_path.is_file());
        assert!(dir.path().join("roc.csv").is_file());
        assert!(dir.path().join("confusion.csv").is_file());
        assert!(dir.path().join("embedded/healthy_000.pgm").is_file());

        let manifest: serde_json::Value =
            serde_json::from_slice(&fs::read(&outcome.manifest_path).unwrap()).unwrap();
        let stages = manifest["stages"].as_array().unwrap();
        assert_eq!(stages.len(), 7);
        assert!(stages.iter().all(|s| s["status"] == "ok"));
        assert_eq!(manifest["partial"], false);
    }

    #[test]
    fn rerun_is_byte_identical() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let a = run_pipeline(&tiny_config(dir_a.path())).unwrap();
        let b = run_pipeline(&tiny_config(dir_b.path())).unwrap();
        assert_eq!(
            fs::read(&a.report_path).unwrap(),
            fs::read(&b.report_path).unwrap()
        );
        assert_eq!(a.fold_assignment_sha256, b.fold_assignment_sha256);
    }

    #[test]
    fn zero_rank_fails_in_the_factorize_stage() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_config(dir.path());
        cfg.factorization.config.p = 0;
        let err = run_pipeline(&cfg).unwrap_err();
        match err {
            Error::Stage { stage, .. } => assert_eq!(stage, "factorize"),
            other => panic!("expected stage error, got {other}"),
        }
        // The manifest still lands, flagged partial.
        let manifest: serde_json::Value =
            serde_json::from_slice(&fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
        assert_eq!(manifest["partial"], true);
    }

    #[test]
    fn missing_input_directory_is_a_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_config(dir.path());
        cfg.input = InputSpec::Directory {
            path: dir.path().join("nope"),
        };
        assert!(matches!(
            run_pipeline(&cfg).unwrap_err(),
            Error::PipelineConfig(_)
        ));
    }

    #[test]
    fn written_cohort_round_trips_through_directory_input() {
        let dir = tempfile::tempdir().unwrap();
        let cohort_dir = dir.path().join("cohort");
        let template = PhantomTemplate {
            height: 16,
            width: 16,
            frames: 12,
            ..PhantomTemplate::default()
        };
        let written = write_phantom_cohort(4, 4, &template, 3, &cohort_dir).unwrap();
        assert_eq!(written.len(), 8);

        let mut cfg = tiny_config(&dir.path().join("out"));
        cfg.input = InputSpec::Directory { path: cohort_dir };
        cfg.classifier.folds = 2;
        cfg.classifier.repeats = 1;
        run_pipeline(&cfg).unwrap();
    }

    #[test]
    fn single_cell_comparison_matches_the_pipeline_report() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_config(&dir.path().join("run"));
        let outcome = run_pipeline(&cfg).unwrap();

        let mut cmp_cfg = cfg.clone();
        cmp_cfg.output_dir = dir.path().join("cmp");
        let (rows, path) =
            run_comparison(&cmp_cfg, &[Method::Pct], &[EmbeddingKind::Weibull]).unwrap();
        assert!(path.is_file());
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].accuracy_median, outcome.report.accuracy_median);
        assert_eq!(rows[0].kappa_median, outcome.report.kappa_median);
        assert_eq!(rows[0].auc, outcome.report.auc);
        assert_eq!(rows[0].fold_assignment_sha256, outcome.fold_assignment_sha256);
    }

    #[test]
    fn config_json_defaults_fill_in() {
        let cfg: PipelineConfig =
            serde_json::from_str(r#"{"master_seed": 21, "apply_jse": false}"#).unwrap();
        assert_eq!(cfg.master_seed, 21);
        assert!(!cfg.apply_jse);
        assert_eq!(cfg.classifier.folds, 5);
        assert_eq!(cfg.features.levels, 32);
    }
}
