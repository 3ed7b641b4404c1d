use std::collections::BTreeMap;
use std::fs;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;
use vat_core::eval::mock::{Echo, KeywordJudge, MockBehavior, MockReply, MockServer, Narration, OracleModel};
use vat_core::eval::{
    judge_batch, render_prompt, run_batch, BatchItem, ChatEndpoint, EndpointConfig, EvalRecord, HttpEndpoint,
    PromptRendering, RecordStatus, TranscriptLog,
};
use vat_core::instance::{check_consistent_pairs, generate_materials_report, TminTable, VatInstance};
use vat_core::logic::{FunctionClass, FunctionId};
use vat_core::pair::{choose2, Pair};
use vat_core::solvers::{pruning_profile, solve, PruningSummary, SolveError, SolveTrace, Strategy};
use vat_core::stats::{
    compare_models, decision_landscape, fit_logistic, information_ratio, log_hypothesis_space, predict_strategy,
    FitError, LandscapeModel, ModelComparison, ModelSpec, RegressionFit, RegressionRow,
};

use crate::config::{MockKind, RunConfig};
use crate::dataset::{fmt_f, read_instances, read_instances_lenient, write_instances, RunDir};
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub struct GenSummary {
    pub instances: usize,
    pub failed_cells: usize,
}

pub fn cmd_gen(cfg: &RunConfig, dir: &RunDir) -> CliResult<GenSummary> {
    let functions = cfg.grid.functions().map_err(|e| CliError::Config(e.to_string()))?;
    let tmin = TminTable::compute(&functions, &cfg.grid.n_values, cfg.master_seed, cfg.max_attempts)
        .map_err(|e| CliError::Generation(e.to_string()))?;
    let report = generate_materials_report(&cfg.grid, cfg.master_seed, &tmin, cfg.tmin_convention, cfg.max_attempts)
        .map_err(|e| CliError::Generation(e.to_string()))?;

    fs::create_dir_all(dir.root())?;
    write_instances(&dir.instances(), &report.instances)?;
    tmin.write_csv(fs::File::create(dir.tmin())?)?;

    let mut w = csv::Writer::from_path(dir.reports()?.join("generation.csv"))?;
    w.write_record(["instance_id", "function_id", "N", "offset", "replicate", "T", "attempts", "status"])?;
    for c in &report.cells {
        let status = match &c.failure {
            None => "ok".to_string(),
            Some(reason) => format!("failed: {reason:?}"),
        };
        w.write_record([
            c.cell.instance_id(),
            c.cell.function_id.to_string(),
            c.cell.n_vars.to_string(),
            c.cell.offset.to_string(),
            c.cell.replicate.to_string(),
            c.n_trials.to_string(),
            c.attempts.to_string(),
            status,
        ])?;
    }
    w.flush()?;

    let failed: Vec<_> = report.failures().collect();
    if !failed.is_empty() {
        let ids: Vec<String> = failed.iter().take(5).map(|c| c.cell.instance_id()).collect();
        let msg = format!("{} cell(s) failed, e.g. {}", failed.len(), ids.join(", "));
        if cfg.allow_holes {
            log::warn!("{msg}; continuing because holes are allowed");
        } else {
            return Err(CliError::Generation(msg));
        }
    }
    Ok(GenSummary {
        instances: report.instances.len(),
        failed_cells: failed.len(),
    })
}

pub fn render_all(cfg: &RunConfig, instances: &[VatInstance]) -> CliResult<Vec<PromptRendering>> {
    instances
        .iter()
        .map(|inst| {
            render_prompt(inst, cfg.prompt_mode, &cfg.prompt_template).map_err(|e| CliError::Config(e.to_string()))
        })
        .collect()
}

/// Writes the rendered prompts to `transcripts/prompts.jsonl`.
pub fn cmd_export(cfg: &RunConfig, dir: &RunDir) -> CliResult<usize> {
    let instances = read_instances(&dir.instances())?;
    let prompts = render_all(cfg, &instances)?;
    let path = dir.transcripts()?.join("prompts.jsonl");
    let mut text = String::new();
    for p in &prompts {
        text.push_str(&serde_json::to_string(p)?);
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(prompts.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum StrategyChoice {
    Both,
    Permutation,
    Elimination,
}

impl StrategyChoice {
    fn strategies(self) -> &'static [Strategy] {
        match self {
            StrategyChoice::Both => &[Strategy::Permutation, Strategy::Elimination],
            StrategyChoice::Permutation => &[Strategy::Permutation],
            StrategyChoice::Elimination => &[Strategy::Elimination],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveSummary {
    pub instances: usize,
    pub trace_rows: usize,
    pub error_rows: usize,
    /// Fraction of valid instances on which every requested strategy and the
    /// brute-force oracle named the truth pair.
    pub agreement_rate: f64,
}

struct SolvedInstance {
    id: String,
    function_id: u8,
    class: Option<FunctionClass>,
    n: usize,
    t: usize,
    truth: Option<Pair>,
    traces: Vec<Result<SolveTrace, SolveError>>,
    error: Option<String>,
    agree: bool,
}

fn solve_instance(inst: &VatInstance, strategies: &[Strategy]) -> SolvedInstance {
    let mut out = SolvedInstance {
        id: inst.instance_id.clone(),
        function_id: inst.function.id().get(),
        class: inst.function.class(),
        n: inst.n_vars(),
        t: inst.n_trials(),
        truth: Some(inst.truth_pair),
        traces: Vec::new(),
        error: None,
        agree: false,
    };
    if let Err(v) = inst.validate() {
        out.error = Some(v.to_string());
        return out;
    }
    let oracle = check_consistent_pairs(&inst.design, &inst.outputs, &inst.function).unwrap_or_default();
    let oracle_ok = oracle.len() == 1 && oracle.contains(&inst.truth_pair);
    out.traces = strategies
        .iter()
        .map(|&s| solve(s, &inst.design, &inst.outputs, &inst.function))
        .collect();
    out.agree = oracle_ok
        && out
            .traces
            .iter()
            .all(|t| t.as_ref().is_ok_and(|t| t.predicted_pair == inst.truth_pair));
    out
}

/// Runs the requested solvers on every instance and writes
/// `traces/traces.csv`, `traces/summary.csv` and `traces/pruning.csv`.
#[derive(Default)]
struct GroupStats {
    instances: usize,
    agree: usize,
    /// Indexed by strategy: permutation, elimination.
    checks: [u64; 2],
    runs: [usize; 2],
}

pub fn cmd_solve(dir: &RunDir, choice: StrategyChoice) -> CliResult<SolveSummary> {
    let (instances, bad) = read_instances_lenient(&dir.instances())?;
    if instances.is_empty() && bad.is_empty() {
        return Err(CliError::InvalidData("no instances to solve".into()));
    }
    let strategies = choice.strategies();
    let solved: Vec<SolvedInstance> = instances.par_iter().map(|i| solve_instance(i, strategies)).collect();
    let traces_dir = dir.traces()?;

    let mut w = csv::Writer::from_path(traces_dir.join("traces.csv"))?;
    w.write_record([
        "instance_id",
        "function_id",
        "class",
        "N",
        "T",
        "strategy",
        "status",
        "predicted_pair",
        "correct",
        "consistency_checks",
        "trials_processed",
        "peak_working_set",
        "resolved_at",
        "normalized_area",
        "surviving_counts",
    ])?;
    let mut trace_rows = 0;
    let mut error_rows = 0;
    let blank = |w: &mut csv::Writer<fs::File>, id: &str, status: &str| {
        w.write_record([id, "", "", "", "", "", status, "", "", "", "", "", "", "", ""])
    };
    for b in &bad {
        blank(&mut w, &b.instance_id, &format!("error: {}", b.error))?;
        error_rows += 1;
    }
    for s in &solved {
        let class = s.class.map(|c| c.as_str()).unwrap_or("");
        if let Some(e) = &s.error {
            blank(&mut w, &s.id, &format!("error: {e}"))?;
            error_rows += 1;
            continue;
        }
        for (strategy, trace) in strategies.iter().zip(&s.traces) {
            let head = [
                s.id.clone(),
                s.function_id.to_string(),
                class.to_string(),
                s.n.to_string(),
                s.t.to_string(),
                strategy.to_string(),
            ];
            match trace {
                Ok(t) => {
                    let counts: Vec<String> = t.surviving_counts.iter().map(usize::to_string).collect();
                    w.write_record(head.into_iter().chain([
                        "ok".to_string(),
                        t.predicted_pair.to_string(),
                        (Some(t.predicted_pair) == s.truth).to_string(),
                        t.consistency_checks.to_string(),
                        t.trials_processed.to_string(),
                        t.peak_working_set.to_string(),
                        t.resolved_at.to_string(),
                        t.normalized_area(s.n).map(fmt_f).unwrap_or_default(),
                        counts.join(";"),
                    ]))?;
                    trace_rows += 1;
                }
                Err(e) => {
                    w.write_record(head.into_iter().chain([
                        format!("error: {e}"),
                        String::new(),
                        String::new(),
                        String::new(),
                        String::new(),
                        String::new(),
                        String::new(),
                        String::new(),
                        String::new(),
                    ]))?;
                    error_rows += 1;
                }
            }
        }
    }
    w.flush()?;

    let mut jsonl = String::new();
    for s in solved.iter().filter(|s| s.error.is_none()) {
        for trace in s.traces.iter().flatten() {
            let line = serde_json::json!({ "instance_id": s.id, "trace": trace });
            jsonl.push_str(&serde_json::to_string(&line)?);
            jsonl.push('\n');
        }
    }
    fs::write(traces_dir.join("traces.jsonl"), jsonl)?;

    // mean checks by (N, T, class)
    let mut groups: BTreeMap<(usize, usize, &str), GroupStats> = BTreeMap::new();
    for s in solved.iter().filter(|s| s.error.is_none()) {
        let g = groups
            .entry((s.n, s.t, s.class.map(|c| c.as_str()).unwrap_or("")))
            .or_default();
        g.instances += 1;
        g.agree += usize::from(s.agree);
        for (strategy, trace) in strategies.iter().zip(&s.traces) {
            if let Ok(t) = trace {
                let k = usize::from(*strategy == Strategy::Elimination);
                g.checks[k] += t.consistency_checks;
                g.runs[k] += 1;
            }
        }
    }
    let mut w = csv::Writer::from_path(traces_dir.join("summary.csv"))?;
    w.write_record([
        "N",
        "T",
        "class",
        "instances",
        "agreement_rate",
        "mean_checks_permutation",
        "mean_checks_elimination",
    ])?;
    let mean = |sum: u64, n: usize| if n == 0 { String::new() } else { fmt_f(sum as f64 / n as f64) };
    for ((n, t, class), g) in &groups {
        w.write_record([
            n.to_string(),
            t.to_string(),
            class.to_string(),
            g.instances.to_string(),
            fmt_f(g.agree as f64 / g.instances as f64),
            mean(g.checks[0], g.runs[0]),
            mean(g.checks[1], g.runs[1]),
        ])?;
    }
    w.flush()?;

    if strategies.contains(&Strategy::Elimination) {
        let k = strategies.iter().position(|&s| s == Strategy::Elimination).expect("present");
        let items = solved.iter().filter_map(|s| {
            let class = s.class?;
            s.traces.get(k)?.as_ref().ok().map(|t| (class, s.n, t))
        });
        write_pruning(&traces_dir.join("pruning.csv"), &pruning_profile(items).unwrap_or_default())?;
    }

    let valid = solved.iter().filter(|s| s.error.is_none()).count();
    let agreed = solved.iter().filter(|s| s.agree).count();
    let summary = SolveSummary {
        instances: instances.len() + bad.len(),
        trace_rows,
        error_rows,
        agreement_rate: if valid == 0 { 0.0 } else { agreed as f64 / valid as f64 },
    };
    if error_rows > 0 {
        return Err(CliError::InvalidData(format!(
            "{error_rows} instance(s) or trace(s) failed; see traces/traces.csv"
        )));
    }
    Ok(summary)
}

fn write_pruning(path: &std::path::Path, profile: &BTreeMap<FunctionClass, PruningSummary>) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["class", "runs", "mean_trials_to_singleton", "mean_normalized_area", "decoy_retention"])?;
    for (class, s) in profile {
        w.write_record([
            class.as_str().to_string(),
            s.runs.to_string(),
            fmt_f(s.mean_trials_to_singleton),
            fmt_f(s.mean_normalized_area),
            fmt_f(s.decoy_retention),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Elimination pruning statistics per function class over a set of instances.
pub fn class_pruning(instances: &[VatInstance]) -> BTreeMap<FunctionClass, PruningSummary> {
    let traces: Vec<(FunctionClass, usize, SolveTrace)> = instances
        .par_iter()
        .filter_map(|i| {
            let class = i.function.class()?;
            let t = solve(Strategy::Elimination, &i.design, &i.outputs, &i.function).ok()?;
            Some((class, i.n_vars(), t))
        })
        .collect();
    pruning_profile(traces.iter().map(|(c, n, t)| (*c, *n, t))).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub records: usize,
    pub failed: usize,
    pub correct: usize,
    pub unparsed: usize,
    pub judged: usize,
}

/// Strategy mix of the scripted model: elimination grows more likely with
/// the hypothesis space and less likely with more trials.
pub const MOCK_NARRATION: Narration = Narration::Logistic {
    intercept: -2.15,
    log_space: 1.0,
    trials: -0.15,
};

struct BoxedBehavior(Box<dyn MockBehavior>);

impl MockBehavior for BoxedBehavior {
    fn respond(&self, prompt: &str, call: u32) -> MockReply {
        self.0.respond(prompt, call)
    }
}

fn mock_model(kind: MockKind) -> BoxedBehavior {
    BoxedBehavior(match kind {
        MockKind::Oracle => Box::new(OracleModel {
            wrong_on: Vec::new(),
            narration: MOCK_NARRATION,
        }),
        MockKind::WrongOnXor => Box::new(OracleModel {
            wrong_on: vec![FunctionId::new(6).expect("XOR id")],
            narration: MOCK_NARRATION,
        }),
        MockKind::Echo => Box::new(Echo),
    })
}

/// Sends every instance prompt to the model endpoint (or a local mock),
/// grades the answers, optionally judges the strategy, and appends the
/// records to `transcripts/records.jsonl`.
pub fn cmd_run(cfg: &RunConfig, dir: &RunDir, judge: bool) -> CliResult<RunSummary> {
    if cfg.mock.is_none() && cfg.endpoint.is_none() {
        return Err(CliError::Config("run needs --endpoint or --mock".into()));
    }
    let instances = read_instances(&dir.instances())?;
    let prompts = render_all(cfg, &instances)?;
    let items: Vec<BatchItem> = instances
        .into_iter()
        .zip(prompts)
        .map(|(instance, prompt)| BatchItem { instance, prompt })
        .collect();
    let transcripts = dir.transcripts()?;
    let attempts = transcripts.join("attempts.jsonl");

    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?;
    let records: Vec<EvalRecord> = runtime.block_on(async {
        let mut servers = Vec::new();
        let (model, model_cfg): (Arc<dyn ChatEndpoint>, EndpointConfig) = match (&cfg.endpoint, cfg.mock) {
            (Some(ep), _) => (
                Arc::new(HttpEndpoint::new(ep.clone()).map_err(|e| CliError::Endpoint(e.to_string()))?),
                ep.clone(),
            ),
            (None, Some(kind)) => {
                let server = MockServer::start(mock_model(kind))
                    .await
                    .map_err(|e| CliError::Endpoint(e.to_string()))?;
                let name = format!("mock-{}", serde_json::to_value(kind)?.as_str().unwrap_or("model"));
                let ep = server.config(&name);
                servers.push(server);
                (
                    Arc::new(HttpEndpoint::new(ep.clone()).map_err(|e| CliError::Endpoint(e.to_string()))?),
                    ep,
                )
            }
            (None, None) => unreachable!("checked above"),
        };
        let mut records = run_batch(items, model, &model_cfg, Some(attempts.clone())).await?;

        if judge {
            let judge_ep = match (&cfg.judge_endpoint, cfg.mock) {
                (Some(ep), _) => Some(ep.clone()),
                (None, Some(_)) => {
                    let server = MockServer::start(KeywordJudge)
                        .await
                        .map_err(|e| CliError::Endpoint(e.to_string()))?;
                    let ep = server.config("mock-judge");
                    servers.push(server);
                    Some(ep)
                }
                (None, None) => {
                    log::warn!("no judge endpoint configured; strategy labels left empty");
                    None
                }
            };
            if let Some(ep) = judge_ep {
                let endpoint: Arc<dyn ChatEndpoint> =
                    Arc::new(HttpEndpoint::new(ep.clone()).map_err(|e| CliError::Endpoint(e.to_string()))?);
                records = judge_batch(records, endpoint, &cfg.judge_template, &ep, Some(attempts.clone())).await?;
            }
        }
        for s in servers {
            s.stop().await;
        }
        Ok::<_, CliError>(records)
    })?;

    let log = TranscriptLog::<EvalRecord>::new(dir.records());
    for r in &records {
        log.append(r)?;
    }
    let summary = RunSummary {
        records: records.len(),
        failed: records.iter().filter(|r| r.status == RecordStatus::Failed).count(),
        correct: records.iter().filter(|r| r.correct).count(),
        unparsed: records
            .iter()
            .filter(|r| r.status == RecordStatus::Completed && r.unparsed)
            .count(),
        judged: records.iter().filter(|r| r.judge_label.is_some()).count(),
    };
    if summary.failed > 0 {
        return Err(CliError::Endpoint(format!(
            "{} of {} request(s) failed after retries",
            summary.failed, summary.records
        )));
    }
    Ok(summary)
}

pub const REGRESSION_INPUT: &str = "regression_input.csv";

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct RegressionInputRow {
    pub instance_id: String,
    pub function_id: u8,
    #[serde(rename = "N")]
    pub n_vars: usize,
    #[serde(rename = "T")]
    pub n_trials: usize,
    pub y: u8,
    pub log_space: f64,
    pub rho: f64,
}

impl RegressionInputRow {
    pub fn new(instance_id: String, function_id: u8, n: usize, t: usize, elimination: bool) -> Self {
        RegressionInputRow {
            instance_id,
            function_id,
            n_vars: n,
            n_trials: t,
            y: u8::from(elimination),
            log_space: log_hypothesis_space(n),
            rho: information_ratio(n, t).unwrap_or(f64::NAN),
        }
    }

    pub fn to_row(&self) -> RegressionRow {
        RegressionRow {
            y: self.y == 1,
            log_space: self.log_space,
            trials: self.n_trials as f64,
            rho: self.rho,
        }
    }
}

pub fn read_regression_input(dir: &RunDir) -> CliResult<Vec<RegressionInputRow>> {
    let path = dir.root().join(crate::dataset::REPORTS).join(REGRESSION_INPUT);
    let mut r = csv::Reader::from_path(&path).map_err(|e| CliError::InvalidData(format!("{}: {e}", path.display())))?;
    let rows = r.deserialize().collect::<Result<Vec<RegressionInputRow>, _>>()?;
    if rows.is_empty() {
        return Err(CliError::InvalidData(format!("{} is empty", path.display())));
    }
    Ok(rows)
}

pub fn model_specs(rho_log: bool) -> Vec<ModelSpec> {
    ModelSpec::TABLE
        .iter()
        .map(|&s| if rho_log && s == ModelSpec::Rho { ModelSpec::LogRho } else { s })
        .collect()
}

#[derive(Debug)]
pub struct FitOutcome {
    pub fits: Vec<RegressionFit>,
    pub errors: Vec<(ModelSpec, FitError)>,
    pub comparison: Option<ModelComparison>,
}

/// Fits every comparison spec. Writes `model_comparison.csv`, `fits.json`
/// and `fit_errors.csv` (when any spec failed).
pub fn cmd_fit(cfg: &RunConfig, dir: &RunDir) -> CliResult<FitOutcome> {
    let input = read_regression_input(dir)?;
    let rows: Vec<RegressionRow> = input.iter().map(RegressionInputRow::to_row).collect();
    let mut fits = Vec::new();
    let mut errors = Vec::new();
    for spec in model_specs(cfg.rho_log) {
        match fit_logistic(&rows, spec) {
            Ok(f) => fits.push(f),
            Err(e) => {
                log::warn!("{spec}: {e}");
                errors.push((spec, e));
            }
        }
    }
    let reports = dir.reports()?;
    let comparison = if fits.is_empty() {
        None
    } else {
        let c = compare_models(&fits).map_err(|e| CliError::InvalidData(e.to_string()))?;
        c.write_csv(fs::File::create(reports.join("model_comparison.csv"))?)?;
        Some(c)
    };
    fs::write(reports.join("fits.json"), serde_json::to_string_pretty(&fits)? + "\n")?;
    let errors_path = reports.join("fit_errors.csv");
    if errors.is_empty() {
        let _ = fs::remove_file(&errors_path);
    } else {
        let mut w = csv::Writer::from_path(&errors_path)?;
        w.write_record(["model", "error"])?;
        for (spec, e) in &errors {
            w.write_record([spec.as_str(), &e.to_string()])?;
        }
        w.flush()?;
    }

    let outcome = FitOutcome {
        fits,
        errors,
        comparison,
    };
    if let Some((spec, e)) = outcome
        .errors
        .iter()
        .find(|(_, e)| matches!(e, FitError::NonConvergence { .. }))
    {
        return Err(CliError::NonConvergence(format!("{spec}: {e}")));
    }
    if outcome.fits.is_empty() {
        let (_, e) = &outcome.errors[0];
        return Err(CliError::InvalidData(format!("no model could be fitted: {e}")));
    }
    Ok(outcome)
}

/// Fits the interaction model and writes the probability grid, the 50%
/// contour and the mean trial count per N.
pub fn cmd_landscape(cfg: &RunConfig, dir: &RunDir) -> CliResult<vat_core::stats::Landscape> {
    let input = read_regression_input(dir)?;
    let rows: Vec<RegressionRow> = input.iter().map(RegressionInputRow::to_row).collect();
    let fit = fit_logistic(&rows, ModelSpec::Interaction).map_err(|e| match e {
        FitError::NonConvergence { .. } => CliError::NonConvergence(e.to_string()),
        other => CliError::InvalidData(other.to_string()),
    })?;
    let model = LandscapeModel::from_fit(&fit).map_err(|e| CliError::InvalidData(e.to_string()))?;

    let mut n_values = cfg.grid.n_values.clone();
    n_values.extend(input.iter().map(|r| r.n_vars));
    n_values.sort_unstable();
    n_values.dedup();
    let t_lo = input.iter().map(|r| r.n_trials).min().unwrap_or(1).max(1);
    let t_hi = input.iter().map(|r| r.n_trials).max().unwrap_or(1);
    let t_values: Vec<usize> = (t_lo..=t_hi).collect();
    let landscape =
        decision_landscape(&model, &n_values, &t_values).map_err(|e| CliError::InvalidData(e.to_string()))?;

    let reports = dir.reports()?;
    let mut w = csv::Writer::from_path(reports.join("landscape.csv"))?;
    w.write_record(["N", "T", "log_space", "probability"])?;
    for c in &landscape.cells {
        w.write_record([c.n_vars.to_string(), c.trials.to_string(), fmt_f(c.log_space), fmt_f(c.probability)])?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(reports.join("contour.csv"))?;
    w.write_record(["N", "log_space", "T"])?;
    for p in &landscape.contour {
        w.write_record([fmt_f(p.n_vars), fmt_f(p.log_space), fmt_f(p.trials)])?;
    }
    w.flush()?;
    let mut by_n: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for r in &input {
        let e = by_n.entry(r.n_vars).or_default();
        e.0 += r.n_trials;
        e.1 += 1;
    }
    let mut w = csv::Writer::from_path(reports.join("mean_path.csv"))?;
    w.write_record(["N", "log_space", "mean_T", "observations"])?;
    for (n, (sum, count)) in by_n {
        w.write_record([
            n.to_string(),
            fmt_f(log_hypothesis_space(n)),
            fmt_f(sum as f64 / count as f64),
            count.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(landscape)
}

/// Cost-model strategy prediction for every (N, T, class) present in the dataset.
pub fn cmd_predict(cfg: &RunConfig, dir: &RunDir) -> CliResult<usize> {
    let instances = read_instances(&dir.instances())?;
    let pruning = class_pruning(&instances);
    let mut cells: Vec<(usize, usize, FunctionClass)> = instances
        .iter()
        .filter_map(|i| Some((i.n_vars(), i.n_trials(), i.function.class()?)))
        .collect();
    cells.sort_unstable();
    cells.dedup();
    let mut w = csv::Writer::from_path(dir.reports()?.join("cost_prediction.csv"))?;
    w.write_record([
        "N",
        "T",
        "class",
        "hypotheses",
        "decoy_retention",
        "permutation_cost",
        "elimination_cost",
        "strategy",
    ])?;
    for &(n, t, class) in &cells {
        let p = predict_strategy(&cfg.cost, n, t, class, &pruning).map_err(|e| CliError::InvalidData(e.to_string()))?;
        w.write_record([
            n.to_string(),
            t.to_string(),
            class.as_str().to_string(),
            choose2(n).to_string(),
            fmt_f(pruning[&class].decoy_retention),
            fmt_f(p.permutation_cost),
            fmt_f(p.elimination_cost),
            p.strategy.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(cells.len())
}
