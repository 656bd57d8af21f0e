//! Command implementations behind the `pdo` binary: single-point training,
//! preference tracing, frontier sweeps, evaluation, gradient checking, and
//! benchmark data generation, with reproducible artifact directories.
//!
//! Every run directory is self-describing: `config.json` holds the resolved
//! configuration and seed, and rerunning it reproduces the artifacts byte
//! for byte.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use ndarray::Array1;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{apply_schema_to_test, load_csv, split, DatasetSchema, FittedEncoder, GroupedDataset};
use crate::error::{Error, Result};
use crate::fairness::{
    build_objectives, evaluate_metrics, FairnessBundle, FairnessMetrics, FairnessNotion,
    LinearModelSpec, Penalty,
};
use crate::frontier::{merge_runs, non_dominated_filter, FrontierSet};
use crate::objective::{
    evaluate, finite_difference_check, finite_difference_check_bundle, gradient_matrix,
    GaussianPair, ObjectiveBundle, ParameterVector,
};
use crate::pbpdo::{kl_gradient, run_pbpdo, PbpdoConfig, PreferenceVector};
use crate::pdo::{run_pdo, OptimizerRun};
use crate::synth;

/// Default seed for the generated benchmark files: they play the role of a
/// fixed published dataset, so everything downstream sees one canonical
/// draw.
pub const DATA_MASTER_SEED: u64 = 17;

pub const BUILTIN_SCHEMAS: [(&str, &str); 4] = [
    ("adult-gender", include_str!("../../../schemas/adult_gender.toml")),
    ("adult-race", include_str!("../../../schemas/adult_race.toml")),
    ("compas-sex", include_str!("../../../schemas/compas_sex.toml")),
    ("compas-race", include_str!("../../../schemas/compas_race.toml")),
];

/// Resolve `--schema`: a path to a TOML file, or the name of a bundled one.
pub fn resolve_schema(spec: &str) -> Result<DatasetSchema> {
    let path = Path::new(spec);
    if path.exists() {
        return DatasetSchema::from_toml_file(path);
    }
    for (name, text) in BUILTIN_SCHEMAS {
        if name == spec {
            let schema: DatasetSchema = toml::from_str(text)
                .map_err(|e| Error::usage(format!("builtin schema {name}: {e}")))?;
            schema.validate()?;
            return Ok(schema);
        }
    }
    Err(Error::usage(format!(
        "schema '{spec}' is neither a file nor a builtin ({})",
        BUILTIN_SCHEMAS.map(|(n, _)| n).join(", ")
    )))
}

/// Fully resolved run description; serializes losslessly to `config.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    /// Train/evaluation data path; `None` only in synthetic mode.
    pub data: Option<PathBuf>,
    /// Held-out data path, encoded with the training encoder.
    pub test: Option<PathBuf>,
    /// Schema file path or builtin schema name.
    pub schema: Option<String>,
    /// Hold out this fraction via a stratified split when no test file is
    /// given.
    pub split_fraction: Option<f64>,
    /// Run on the synthetic two-objective benchmark instead of data.
    #[serde(default)]
    pub synthetic: bool,
    pub notion: Option<FairnessNotion>,
    pub model: LinearModelSpec,
    pub penalty: Penalty,
    pub optimizer: PbpdoConfig,
    /// Preference vectors for trace (exactly one) and frontier (one or more).
    #[serde(default)]
    pub preferences: Vec<Vec<f64>>,
    pub seed: u64,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data: None,
            test: None,
            schema: None,
            split_fraction: None,
            synthetic: false,
            notion: Some(FairnessNotion::Eo),
            model: LinearModelSpec::smooth_hinge(),
            penalty: Penalty::Squared,
            optimizer: PbpdoConfig::default(),
            preferences: Vec::new(),
            seed: 1,
            out: PathBuf::from("runs/out"),
        }
    }
}

impl RunConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::data(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::usage(format!("invalid config {}: {e}", path.display())))
    }
}

/// Loaded data bundle shared by the commands.
struct Prepared {
    train: Arc<GroupedDataset>,
    test: Option<GroupedDataset>,
    encoder: FittedEncoder,
}

fn prepare_data(config: &RunConfig) -> Result<Prepared> {
    let data_path = config
        .data
        .as_ref()
        .ok_or_else(|| Error::usage("--data is required unless --synthetic is set"))?;
    let schema_ref = config
        .schema
        .as_ref()
        .ok_or_else(|| Error::usage("--schema (path or builtin name) is required"))?;
    let schema = resolve_schema(schema_ref)?;
    let (full, encoder) = load_csv(data_path, &schema)?;
    if let Some(test_path) = &config.test {
        let test = apply_schema_to_test(test_path, &encoder)?;
        return Ok(Prepared {
            train: Arc::new(full),
            test: Some(test),
            encoder,
        });
    }
    if let Some(fraction) = config.split_fraction {
        let (train, test) = split(&full, fraction, config.seed)?;
        return Ok(Prepared {
            train: Arc::new(train),
            test: Some(test),
            encoder,
        });
    }
    Ok(Prepared {
        train: Arc::new(full),
        test: None,
        encoder,
    })
}

/// Deterministic near-zero start: the all-zeros vector is itself Pareto
/// stationary for squared-penalty bundles, so runs start just off it.
fn initial_point(dim: usize, seed: u64) -> ParameterVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array1::from_iter((0..dim).map(|_| rng.gen_range(-1e-3..1e-3)))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::usage(format!("serialization failed: {e}")))?;
    fs::write(path, text)?;
    Ok(())
}

fn fmt_float(v: f64) -> String {
    // 17 significant digits: round-trip exact for f64
    format!("{v:.16e}")
}

fn write_trajectory_csv(path: &Path, run: &OptimizerRun, m: usize) -> Result<()> {
    let alpha_cols = run
        .trajectory
        .iter()
        .filter_map(|p| p.alpha.as_ref().map(|a| a.len()))
        .max()
        .unwrap_or(m);
    let mut out = String::from("iteration,mode");
    for i in 0..m {
        out.push_str(&format!(",h_{i}"));
    }
    out.push_str(",direction_norm");
    for i in 0..alpha_cols {
        out.push_str(&format!(",alpha_{i}"));
    }
    out.push('\n');
    for point in &run.trajectory {
        out.push_str(&format!("{},{}", point.iteration, point.mode.as_str()));
        for v in point.objective_values.iter() {
            out.push(',');
            out.push_str(&fmt_float(*v));
        }
        out.push(',');
        out.push_str(&fmt_float(point.direction_norm));
        match &point.alpha {
            Some(alpha) => {
                for i in 0..alpha_cols {
                    out.push(',');
                    if i < alpha.len() {
                        out.push_str(&fmt_float(alpha.as_array()[i]));
                    }
                }
            }
            None => {
                // kl-only rows carry no inner-solve weights
                for _ in 0..alpha_cols {
                    out.push(',');
                }
            }
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

#[derive(Serialize)]
struct ModelArtifact<'a> {
    weights: Vec<f64>,
    feature_names: &'a [String],
    model: &'a LinearModelSpec,
    notion: Option<FairnessNotion>,
    penalty: Penalty,
    encoder: &'a FittedEncoder,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    weights: Vec<f64>,
    feature_names: Vec<String>,
    model: LinearModelSpec,
    notion: Option<FairnessNotion>,
    penalty: Penalty,
    encoder: FittedEncoder,
}

#[derive(Serialize)]
struct MetricsArtifact {
    train: FairnessMetrics,
    #[serde(skip_serializing_if = "Option::is_none")]
    test: Option<FairnessMetrics>,
}

fn summarize(metrics: &FairnessMetrics, label: &str) {
    // human-facing table at 6 significant digits
    println!(
        "{label}: accuracy {:.6}  deo {:.6}",
        metrics.total_accuracy, metrics.deo
    );
    for (i, name) in metrics.group_names.iter().enumerate() {
        let tpr = metrics.group_tpr[i]
            .map(|v| format!("{v:.6}"))
            .unwrap_or_else(|| "undefined".into());
        let fpr = metrics.group_fpr[i]
            .map(|v| format!("{v:.6}"))
            .unwrap_or_else(|| "undefined".into());
        println!(
            "  {name}: n={} accuracy {:.6} tpr {tpr} fpr {fpr}",
            metrics.group_support[i], metrics.group_accuracy[i]
        );
    }
}

fn build_bundle(config: &RunConfig, prepared: &Prepared) -> Result<FairnessBundle> {
    build_objectives(
        config.notion,
        &config.model,
        prepared.train.clone(),
        config.penalty,
    )
}

fn write_run_artifacts(
    dir: &Path,
    config: &RunConfig,
    prepared: &Prepared,
    run: &OptimizerRun,
    m: usize,
) -> Result<MetricsArtifact> {
    fs::create_dir_all(dir)?;
    write_json(&dir.join("config.json"), config)?;
    write_trajectory_csv(&dir.join("trajectory.csv"), run, m)?;
    let artifact = ModelArtifact {
        weights: run.final_w.to_vec(),
        feature_names: &prepared.train.feature_names,
        model: &config.model,
        notion: config.notion,
        penalty: config.penalty,
        encoder: &prepared.encoder,
    };
    write_json(&dir.join("model.json"), &artifact)?;
    let metrics = MetricsArtifact {
        train: evaluate_metrics(&run.final_w, &prepared.train),
        test: prepared
            .test
            .as_ref()
            .map(|t| evaluate_metrics(&run.final_w, t)),
    };
    write_json(&dir.join("metrics.json"), &metrics)?;
    Ok(metrics)
}

fn synthetic_artifacts(dir: &Path, config: &RunConfig, run: &OptimizerRun) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_json(&dir.join("config.json"), config)?;
    write_trajectory_csv(&dir.join("trajectory.csv"), run, 2)?;
    let pair = GaussianPair::standard();
    let h = evaluate(&pair, &run.final_w)?;
    #[derive(Serialize)]
    struct FinalPoint {
        w: Vec<f64>,
        objective_values: Vec<f64>,
        steps_taken: usize,
        converged: bool,
    }
    write_json(
        &dir.join("final_point.json"),
        &FinalPoint {
            w: run.final_w.to_vec(),
            objective_values: h.to_vec(),
            steps_taken: run.steps_taken,
            converged: run.converged,
        },
    )?;
    Ok(())
}

/// `train`: PDO to a single Pareto-stationary point, with artifacts.
pub fn cmd_train(config: &RunConfig) -> Result<PathBuf> {
    let dir = config.out.clone();
    if config.synthetic {
        let pair = GaussianPair::standard();
        let w0 = initial_point(2, config.seed);
        let run = run_pdo(&pair, &w0, &config.optimizer.base)?;
        synthetic_artifacts(&dir, config, &run)?;
        println!("synthetic train: {} steps, converged: {}", run.steps_taken, run.converged);
        return Ok(dir);
    }
    let prepared = prepare_data(config)?;
    let bundle = build_bundle(config, &prepared)?;
    let w0 = initial_point(bundle.param_dim(), config.seed);
    let run = run_pdo(&bundle, &w0, &config.optimizer.base)?;
    let metrics = write_run_artifacts(&dir, config, &prepared, &run, bundle.num_objectives())?;
    summarize(&metrics.train, "train");
    if let Some(test) = &metrics.test {
        summarize(test, "test");
    }
    Ok(dir)
}

fn parse_preference(config: &RunConfig, m: usize) -> Result<PreferenceVector> {
    if config.preferences.len() != 1 {
        return Err(Error::usage(format!(
            "trace needs exactly one preference vector, got {}",
            config.preferences.len()
        )));
    }
    let pref = PreferenceVector::new(config.preferences[0].clone())?;
    if pref.len() != m {
        return Err(Error::usage(format!(
            "preference vector has length {}, objective vector has {m} entries",
            pref.len()
        )));
    }
    Ok(pref)
}

#[derive(Serialize)]
struct TraceReport {
    objective_values: Vec<f64>,
    kl_value: f64,
    ratio_residuals: Vec<f64>,
    steps_taken: usize,
    converged: bool,
}

fn trace_report(
    bundle: &dyn ObjectiveBundle,
    pref: &PreferenceVector,
    run: &OptimizerRun,
) -> Result<TraceReport> {
    let h = evaluate(bundle, &run.final_w)?;
    let raw = gradient_matrix(bundle, &run.final_w, false)?;
    let state = kl_gradient(&h, &raw, pref)?;
    let residuals = pref.ratio_residuals(&h);
    Ok(TraceReport {
        objective_values: h.to_vec(),
        kl_value: state.kl_value,
        ratio_residuals: residuals,
        steps_taken: run.steps_taken,
        converged: run.converged,
    })
}

/// `trace`: PB-PDO toward one preference vector.
pub fn cmd_trace(config: &RunConfig) -> Result<PathBuf> {
    let dir = config.out.clone();
    if config.synthetic {
        let pair = GaussianPair::standard();
        let pref = parse_preference(config, 2)?;
        let w0 = initial_point(2, config.seed);
        let run = run_pbpdo(&pair, &pref, &w0, &config.optimizer)?;
        synthetic_artifacts(&dir, config, &run)?;
        let report = trace_report(&pair, &pref, &run)?;
        write_json(&dir.join("trace.json"), &report)?;
        println!(
            "synthetic trace: h = {:?}, ratio residuals = {:?}",
            report.objective_values, report.ratio_residuals
        );
        return Ok(dir);
    }
    let prepared = prepare_data(config)?;
    let bundle = build_bundle(config, &prepared)?;
    let pref = parse_preference(config, bundle.num_objectives())?;
    let w0 = initial_point(bundle.param_dim(), config.seed);
    let run = run_pbpdo(&bundle, &pref, &w0, &config.optimizer)?;
    let metrics = write_run_artifacts(&dir, config, &prepared, &run, bundle.num_objectives())?;
    let report = trace_report(&bundle, &pref, &run)?;
    write_json(&dir.join("trace.json"), &report)?;
    summarize(&metrics.train, "train");
    if let Some(test) = &metrics.test {
        summarize(test, "test");
    }
    println!("terminal pi-ratio residuals: {:?}", report.ratio_residuals);
    Ok(dir)
}

fn write_frontier_loss_csv(path: &Path, set: &FrontierSet) -> Result<()> {
    let mut out = String::from("run,iteration");
    for i in 0..set.objective_dim {
        out.push_str(&format!(",h_{i}"));
    }
    out.push('\n');
    for p in &set.points {
        out.push_str(&format!("{},{}", p.run, p.iteration));
        for v in p.objectives.iter() {
            out.push(',');
            out.push_str(&fmt_float(*v));
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// `frontier`: one PB-PDO run per preference vector, merged into a
/// non-dominated loss-space frontier, plus the error/DEO mapping.
pub fn cmd_frontier(config: &RunConfig) -> Result<PathBuf> {
    if config.preferences.is_empty() {
        return Err(Error::usage("frontier needs at least one --pref"));
    }
    let dir = config.out.clone();
    fs::create_dir_all(&dir)?;
    write_json(&dir.join("config.json"), config)?;

    if config.synthetic {
        let pair = GaussianPair::standard();
        let mut runs = Vec::new();
        for (k, raw) in config.preferences.iter().enumerate() {
            let pref = PreferenceVector::new(raw.clone())?;
            if pref.len() != 2 {
                return Err(Error::usage("synthetic preferences have length 2"));
            }
            let w0 = initial_point(2, config.seed);
            let run = run_pbpdo(&pair, &pref, &w0, &config.optimizer)?;
            let sub = dir.join(format!("run_{k:02}"));
            synthetic_artifacts(&sub, config, &run)?;
            runs.push(run);
        }
        let mut merged = merge_runs(&runs)?;
        merged.sort_canonical();
        write_frontier_loss_csv(&dir.join("frontier_loss.csv"), &merged)?;
        println!("frontier: {} non-dominated points", merged.len());
        return Ok(dir);
    }

    let prepared = prepare_data(config)?;
    let bundle = build_bundle(config, &prepared)?;
    let m = bundle.num_objectives();
    let mut runs = Vec::new();
    for (k, raw) in config.preferences.iter().enumerate() {
        let pref = PreferenceVector::new(raw.clone())?;
        if pref.len() != m {
            return Err(Error::usage(format!(
                "preference {k} has length {}, objective vector has {m} entries",
                pref.len()
            )));
        }
        let w0 = initial_point(bundle.param_dim(), config.seed);
        let run = run_pbpdo(&bundle, &pref, &w0, &config.optimizer).map_err(|e| {
            Error::numeric(format!(
                "frontier run {k} failed ({e}); earlier run directories are preserved"
            ))
        })?;
        let sub = dir.join(format!("run_{k:02}"));
        let mut sub_config = config.clone();
        sub_config.preferences = vec![raw.clone()];
        sub_config.out = sub.clone();
        write_run_artifacts(&sub, &sub_config, &prepared, &run, m)?;
        runs.push(run);
    }

    let mut merged = merge_runs(&runs)?;
    merged.sort_canonical();
    write_frontier_loss_csv(&dir.join("frontier_loss.csv"), &merged)?;

    // map the loss-space frontier into error/DEO per split and re-filter;
    // the mapping lands in a discrete space, so points collapse or become
    // dominated there
    let mut out = String::from("split,run,iteration,error,deo\n");
    let mut splits: Vec<(&str, &GroupedDataset)> = vec![("train", &prepared.train)];
    if let Some(test) = &prepared.test {
        splits.push(("test", test));
    }
    for (split_name, data) in splits {
        let mapped: Vec<Array1<f64>> = merged
            .points
            .iter()
            .map(|p| {
                let metrics = evaluate_metrics(&p.w, data);
                ndarray::arr1(&[1.0 - metrics.total_accuracy, metrics.deo])
            })
            .collect();
        let kept = non_dominated_filter(&mapped)?;
        for idx in kept {
            let p = &merged.points[idx];
            out.push_str(&format!(
                "{split_name},{},{},{},{}\n",
                p.run,
                p.iteration,
                fmt_float(mapped[idx][0]),
                fmt_float(mapped[idx][1])
            ));
        }
    }
    fs::write(dir.join("frontier_metrics.csv"), out)?;
    println!("frontier: {} non-dominated loss-space points", merged.len());
    Ok(dir)
}

/// `eval`: metrics of a saved model on a data file.
pub fn cmd_eval(model_path: &Path, data_path: &Path, out: Option<&Path>) -> Result<FairnessMetrics> {
    let text = fs::read_to_string(model_path)
        .map_err(|e| Error::data(format!("cannot read model {}: {e}", model_path.display())))?;
    let model: ModelFile = serde_json::from_str(&text)
        .map_err(|e| Error::data(format!("invalid model {}: {e}", model_path.display())))?;
    let data = apply_schema_to_test(data_path, &model.encoder)?;
    if model.weights.len() != data.num_features() {
        return Err(Error::usage(format!(
            "model has {} weights, encoded data has {} features",
            model.weights.len(),
            data.num_features()
        )));
    }
    let w = Array1::from_vec(model.weights);
    let metrics = evaluate_metrics(&w, &data);
    summarize(&metrics, "eval");
    if let Some(path) = out {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        write_json(path, &metrics)?;
    }
    Ok(metrics)
}

/// `check-grads`: finite-difference verification of every analytic gradient
/// family; exits nonzero when any check exceeds the tolerance.
pub fn cmd_check_grads(config: &RunConfig) -> Result<()> {
    const TOL: f64 = 1e-5;
    let mut worst: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let pair = GaussianPair::standard();
    for _ in 0..20 {
        let w = Array1::from_iter((0..2).map(|_| rng.gen_range(-3.0..3.0)));
        for index in 0..2 {
            worst = worst.max(finite_difference_check_bundle(&pair, index, &w, 1e-6));
        }
        let pref = PreferenceVector::new(vec![rng.gen_range(0.5..3.0), rng.gen_range(0.5..3.0)])?;
        let values = evaluate(&pair, &w)?;
        let raw = gradient_matrix(&pair, &w, false)?;
        let state = kl_gradient(&values, &raw, &pref)?;
        let p = pref.clone();
        let err = finite_difference_check(
            |x| crate::pbpdo::kl_objective(&evaluate(&pair, x).unwrap(), &p),
            &state.kl_gradient,
            &w,
            1e-6,
        );
        worst = worst.max(err);
    }
    println!("synthetic pair + preference gradients: max fd error {worst:.3e}");

    if config.data.is_some() {
        let prepared = prepare_data(config)?;
        for notion in [None, Some(FairnessNotion::Eo), Some(FairnessNotion::Eod), Some(FairnessNotion::Dm)] {
            let bundle = match build_objectives(
                notion,
                &config.model,
                prepared.train.clone(),
                config.penalty,
            ) {
                Ok(b) => b,
                Err(Error::Usage(_)) => continue, // notion not applicable to this data
                Err(e) => return Err(e),
            };
            let mut notion_worst: f64 = 0.0;
            for _ in 0..3 {
                let w = Array1::from_iter(
                    (0..bundle.param_dim()).map(|_| rng.gen_range(-0.5..0.5)),
                );
                for index in 0..bundle.num_objectives() {
                    notion_worst =
                        notion_worst.max(finite_difference_check_bundle(&bundle, index, &w, 1e-6));
                }
            }
            println!("{notion:?} bundle gradients: max fd error {notion_worst:.3e}");
            worst = worst.max(notion_worst);
        }
    }

    if worst > TOL {
        return Err(Error::numeric(format!(
            "gradient check failed: max relative error {worst:.3e} > {TOL:.0e}"
        )));
    }
    println!("all gradient checks passed (tolerance {TOL:.0e})");
    Ok(())
}

/// `gen-data`: write the deterministic benchmark CSVs.
pub fn cmd_gen_data(out: &Path, dataset: &str, seed: u64) -> Result<()> {
    match dataset {
        "adult" => {
            let (train, test) = synth::write_adult_like(out, seed)?;
            println!("wrote {} and {}", train.display(), test.display());
        }
        "compas" => {
            let path = synth::write_compas_like(out, seed)?;
            println!("wrote {}", path.display());
        }
        "all" => {
            let (train, test) = synth::write_adult_like(out, seed)?;
            let compas = synth::write_compas_like(out, seed)?;
            println!(
                "wrote {}, {} and {}",
                train.display(),
                test.display(),
                compas.display()
            );
        }
        other => {
            return Err(Error::usage(format!(
                "unknown dataset '{other}' (expected adult, compas, or all)"
            )))
        }
    }
    Ok(())
}

/// Re-filter a frontier_loss.csv; used to verify exported frontiers satisfy
/// their own invariant (re-filtering is a no-op).
pub fn refilter_frontier_csv(path: &Path) -> Result<(usize, usize)> {
    let text = fs::read_to_string(path)?;
    let mut points = Vec::new();
    for line in text.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        let values: Vec<f64> = fields[2..]
            .iter()
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::data(format!("{}: {e}", path.display())))?;
        points.push(Array1::from_vec(values));
    }
    let kept = non_dominated_filter(&points)?;
    Ok((points.len(), kept.len()))
}
