use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use lsm_core::analysis::{bound_report, matched_error, BoundReport, BoundValue};
use lsm_core::assign::canonical_assignment;
use lsm_core::estimator::{estimate, EstimateResult, SolverStatus};
use lsm_core::io::{dataset_to_csv, parse_dataset_csv};
use lsm_core::metrics::compute_metrics;
use lsm_core::model::{
    derive_seed, switching_generator, Dataset, InputSequence, ParameterMatrix, Simulation, Truth,
};
use lsm_core::LsmError;

use crate::config::{InputDist, ScenarioConfig};
use crate::views::{
    BoundTag, BoundsFile, DatasetSidecar, EstimateFile, EstimateView, MetricsFile, Provenance, Which,
};
use crate::CliError;

pub fn read_bytes(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// Writes through a temporary file so a crashed run never leaves a partial
/// output behind.
pub fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        }
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, contents).map_err(|e| CliError::Io(format!("{}: {e}", tmp.display())))?;
    std::fs::rename(&tmp, path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("output serialises");
    text.push('\n');
    write_file(path, text.as_bytes())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, bytes: &[u8]) -> Result<T, CliError> {
    serde_json::from_slice(bytes).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

/// Draws the system, switching signal, inputs and noise of one scenario.
pub fn simulate_config(cfg: &ScenarioConfig) -> Result<Simulation, CliError> {
    let root = cfg.root_seed();
    let map = cfg.feature_map();
    let a_true = cfg.true_parameters()?;
    let len = cfg.data.n_samples;
    let sigma = switching_generator(&cfg.system.switching, len, cfg.system.s, derive_seed(root, 1))?;
    let inputs = match cfg.data.input_dist {
        InputDist::Gaussian => InputSequence::gaussian(&map, len, derive_seed(root, 2)),
        InputDist::Uniform => InputSequence::uniform(&map, len, derive_seed(root, 2)),
    };
    Ok(lsm_core::model::simulate(&a_true, &sigma, &inputs, &map, &cfg.noise)?)
}

pub fn cmd_simulate(cfg: &ScenarioConfig) -> Result<(), CliError> {
    let sim = simulate_config(cfg)?;
    let data = &sim.dataset;
    let truth = data.truth().expect("simulated data carries truth");
    let csv = dataset_to_csv(data);
    let provenance = Provenance {
        command: "simulate".into(),
        config_hash: cfg.hash_with_inputs(&[]),
        root_seed: cfg.root_seed(),
    };
    let sidecar = DatasetSidecar {
        provenance,
        n: data.n(),
        s: cfg.system.s,
        n_samples: data.len(),
        feature_map: cfg.feature_map(),
        a_true: truth.a_true.columns(),
        outliers: sim.outliers.iter().map(|&t| t + 1).collect(),
        noise_l1: truth.v.iter().map(|v| v.abs()).sum(),
    };
    let dir = &cfg.output.dir;
    write_file(&dir.join("dataset.csv"), csv.as_bytes())?;
    write_json(&dir.join("dataset.json"), &sidecar)
}

/// Loads a dataset CSV; the true parameters come from the sidecar next to
/// it, when there is one.
pub fn load_dataset(path: &Path) -> Result<(Dataset, Vec<u8>), CliError> {
    let bytes = read_bytes(path)?;
    let text = std::str::from_utf8(&bytes).map_err(|_| CliError::Input(format!("{}: not UTF-8", path.display())))?;
    let parsed = parse_dataset_csv(text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let side = sidecar_path(path);
    let a_true = if side.exists() {
        let side_bytes = read_bytes(&side)?;
        let sc: DatasetSidecar = read_json(&side, &side_bytes)?;
        Some(ParameterMatrix::from_columns(&sc.a_true)?)
    } else {
        None
    };
    let truth = match (parsed.labels, a_true) {
        (Some((sigma, v)), Some(a_true)) => Some(Truth { a_true, sigma, v }),
        _ => None,
    };
    let data = Dataset::new(parsed.x, parsed.y, truth).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok((data, bytes))
}

fn check_dims(cfg: &ScenarioConfig, data: &Dataset) -> Result<(), CliError> {
    if data.n() != cfg.system.n {
        return Err(CliError::Input(format!(
            "dataset has n = {}, config says n = {}",
            data.n(),
            cfg.system.n
        )));
    }
    Ok(())
}

/// Runs the estimator; returns true when every heuristic run converged.
pub fn cmd_estimate(cfg: &ScenarioConfig, data_path: &Path) -> Result<bool, CliError> {
    let (data, bytes) = load_dataset(data_path)?;
    check_dims(cfg, &data)?;
    let s = cfg.system.s;
    let est = estimate(&data, s, &cfg.estimator)?;
    let best = est.best();
    let which = if est.heuristic.as_ref().is_some_and(|h| std::ptr::eq(h, best)) {
        Which::Heuristic
    } else {
        Which::Oracle
    };
    let matched = data
        .truth()
        .filter(|t| t.a_true.s() == s)
        .map(|t| matched_error(&t.a_true, &best.a_hat, None));
    let file = EstimateFile {
        provenance: Provenance {
            command: "estimate".into(),
            config_hash: cfg.hash_with_inputs(&[&bytes]),
            root_seed: cfg.root_seed(),
        },
        n: data.n(),
        s,
        n_samples: data.len(),
        best: which,
        best_cost: best.cost,
        heuristic: est.heuristic.as_ref().map(EstimateView::from_result),
        oracle: est.oracle.as_ref().map(EstimateView::from_result),
        matched_error: matched,
    };
    let dir = &cfg.output.dir;
    write_json(&dir.join("estimate.json"), &file)?;
    if cfg.output.csv() {
        if let Some(h) = &est.heuristic {
            write_file(&dir.join("trace.csv"), trace_csv(h).as_bytes())?;
        }
    }
    Ok(est.heuristic.as_ref().is_none_or(|h| h.status == SolverStatus::Converged))
}

fn trace_csv(r: &EstimateResult) -> String {
    let mut out = String::from("restart,iteration,cost\n");
    for (k, trace) in r.traces.iter().enumerate() {
        for (i, c) in trace.iter().enumerate() {
            let _ = writeln!(out, "{},{},{:?}", k + 1, i, c);
        }
    }
    out
}

pub fn cmd_metrics(cfg: &ScenarioConfig, data_path: &Path) -> Result<(), CliError> {
    let (data, bytes) = load_dataset(data_path)?;
    check_dims(cfg, &data)?;
    let report = compute_metrics(&data, cfg.system.s, &cfg.metrics, Vec::new())?;
    let file = MetricsFile {
        provenance: Provenance {
            command: "metrics".into(),
            config_hash: cfg.hash_with_inputs(&[&bytes]),
            root_seed: cfg.root_seed(),
        },
        report,
    };
    write_json(&cfg.output.dir.join("metrics.json"), &file)
}

/// Oracle estimate as far as the analysis needs it: the optimal column sets.
fn oracle_stub(view: &EstimateView, data: &Dataset, tie_tol: f64) -> Result<EstimateResult, CliError> {
    let a_hat = view.a_hat()?;
    Ok(EstimateResult {
        assignment: canonical_assignment(data, &a_hat, tie_tol)?,
        a_hat,
        cost: view.cost,
        trajectory: view.trajectory.clone(),
        status: view.status,
        restarts_used: view.restarts_used,
        best_restart: view.best_restart,
        traces: Vec::new(),
        distinct_optima: view.distinct_optima()?,
        empty_modes: view.empty_modes.iter().map(|&m| m - 1).collect(),
    })
}

pub fn bound_tag(b: &BoundValue) -> BoundTag {
    match b {
        BoundValue::Finite { certified: true, .. } => BoundTag::Certified,
        BoundValue::Finite { certified: false, .. } => BoundTag::Optimistic,
        BoundValue::Vacuous { .. } => BoundTag::Vacuous,
    }
}

/// Drops the parts of the report whose check is disabled in the config.
pub fn apply_analysis_flags(cfg: &ScenarioConfig, report: &mut BoundReport) {
    let f = &cfg.analysis.enable;
    let mut drop: Vec<&str> = Vec::new();
    if !f.proposition1 {
        report.proposition1 = None;
        drop.extend(["sigma_match", "proposition1_condition"]);
    }
    if !f.lemma5 {
        drop.push("lemma5_sufficient");
    }
    if !f.lemma7 {
        report.lemma7 = None;
        drop.push("distinguishability");
    }
    if !f.theorem1 {
        drop.extend(["theorem1_predicted", "theorem1_witnessed"]);
    }
    if !f.bounds {
        let off = BoundValue::Vacuous {
            reason: "disabled in config".into(),
        };
        report.bound_value = off.clone();
        report.certified_bound = off;
        report.theorem2 = None;
        report.noise_relaxation = None;
    }
    report.conditions.retain(|c| !drop.contains(&c.condition.as_str()));
}

pub fn conditions_csv(report: &BoundReport) -> String {
    let mut out = String::from("condition,holds,margin\n");
    for c in &report.conditions {
        let holds = c.holds.map(|h| h.to_string()).unwrap_or_default();
        let margin = c.margin.map(|m| format!("{m:?}")).unwrap_or_default();
        let _ = writeln!(out, "{},{},{}", c.condition, holds, margin);
    }
    out
}

pub fn cmd_bounds(
    cfg: &ScenarioConfig,
    data_path: &Path,
    estimate_path: &Path,
    metrics_path: &Path,
) -> Result<(), CliError> {
    let (data, data_bytes) = load_dataset(data_path)?;
    let est_bytes = read_bytes(estimate_path)?;
    let met_bytes = read_bytes(metrics_path)?;
    let est: EstimateFile = read_json(estimate_path, &est_bytes)?;
    let met: MetricsFile = read_json(metrics_path, &met_bytes)?;
    if est.n != data.n() || met.report.n != data.n() || met.report.n_samples != data.len() {
        return Err(CliError::Input("dataset, estimate and metrics files do not match".into()));
    }
    let tie_tol = cfg.estimator.tie_tol;
    let a_hat = est.best_view().a_hat()?;
    let oracle = est.oracle.as_ref().map(|o| oracle_stub(o, &data, tie_tol)).transpose()?;
    let mut report = bound_report(&data, &a_hat, &met.report, oracle.as_ref(), tie_tol)?;
    apply_analysis_flags(cfg, &mut report);
    let file = BoundsFile {
        provenance: Provenance {
            command: "bounds".into(),
            config_hash: cfg.hash_with_inputs(&[&data_bytes, &est_bytes, &met_bytes]),
            root_seed: cfg.root_seed(),
        },
        bound_tag: bound_tag(&report.bound_value),
        truth_available: data.truth().is_some(),
        report,
    };
    let dir = &cfg.output.dir;
    write_json(&dir.join("bounds.json"), &file)?;
    if cfg.output.csv() {
        write_file(&dir.join("conditions.csv"), conditions_csv(&file.report).as_bytes())?;
    }
    Ok(())
}

impl From<LsmError> for CliError {
    fn from(e: LsmError) -> Self {
        match e {
            LsmError::BudgetExceeded { needed, budget, advice } => CliError::Budget {
                needed,
                budget,
                message: format!("exceeds combinatorial budget: {needed} evaluations requested, budget is {budget}; {advice}"),
            },
            other => CliError::Input(other.to_string()),
        }
    }
}
