use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use vat_cli::commands::{RegressionInputRow, REGRESSION_INPUT};
use vat_cli::dataset::{read_latest_records, RunDir};
use vat_cli::report::cmd_report;
use vat_core::eval::mock::{KeywordJudge, MockServer};
use vat_core::eval::{judge_batch, EvalRecord, HttpEndpoint, JudgeLabel, JudgeTemplate, PromptMode, RecordStatus};
use vat_core::instance::{lower_bound_trials, MaterialsGrid, TminTable, DEFAULT_MASTER_SEED, DEFAULT_MAX_ATTEMPTS};
use vat_core::stats::{cohen_kappa, confusion_from_labels};

fn vat(dir: &Path, args: &[&str]) -> i32 {
    let mut argv = vec!["vat".to_string(), "--out".to_string(), dir.display().to_string()];
    argv.extend(args.iter().map(|s| s.to_string()));
    vat_cli::main_with_args(argv)
}

fn lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("{}: {e}", path.display()))
        .lines()
        .map(str::to_string)
        .collect()
}

fn csv_rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path)
        .unwrap()
        .records()
        .collect::<Result<_, _>>()
        .unwrap()
}

fn manifest_path(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(rel)
}

const SMALL_GRID: &str = "n=3,5;offsets=0,1;samples=2";

#[test]
fn function_filter_limits_generation() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("xor");
    assert_eq!(vat(&dir, &["--functions", "XOR", "gen"]), 0);
    let instances = lines(&dir.join("instances.jsonl"));
    assert_eq!(instances.len(), 300);
    assert!(instances.iter().all(|l| l.contains("\"function_id\":6")));
}

#[test]
fn gen_and_solve_are_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        assert_eq!(vat(dir, &["--grid", SMALL_GRID, "--seed", "99", "gen"]), 0);
        assert_eq!(vat(dir, &["solve"]), 0);
    }
    for f in ["instances.jsonl", "tmin.csv", "config.resolved", "reports/generation.csv", "traces/traces.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let c = tmp.path().join("c");
    assert_eq!(vat(&c, &["--grid", SMALL_GRID, "--seed", "100", "gen"]), 0);
    assert_ne!(
        fs::read(a.join("instances.jsonl")).unwrap(),
        fs::read(c.join("instances.jsonl")).unwrap()
    );
}

#[test]
fn single_instance_gets_one_row_per_strategy() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("one");
    assert_eq!(vat(&dir, &["--grid", "n=4;offsets=0;samples=1", "--functions", "AND", "gen"]), 0);
    assert_eq!(vat(&dir, &["solve"]), 0);
    assert_eq!(csv_rows(&dir.join("traces/traces.csv")).len(), 2);
    assert_eq!(vat(&dir, &["solve", "--strategy", "elimination"]), 0);
    let rows = csv_rows(&dir.join("traces/traces.csv"));
    assert_eq!(rows.len(), 1);
    assert_eq!(&rows[0][5], "elimination");
    assert_eq!(&rows[0][8], "true");
}

#[test]
fn corrupted_outputs_become_error_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("bad");
    assert_eq!(vat(&dir, &["--grid", SMALL_GRID, "gen"]), 0);
    let path = dir.join("instances.jsonl");
    let mut all = lines(&path);
    let mut first: serde_json::Value = serde_json::from_str(&all[0]).unwrap();
    let flipped: String = first["outputs"]
        .as_str()
        .unwrap()
        .chars()
        .enumerate()
        .map(|(i, c)| match (i, c) {
            (0, '0') => '1',
            (0, _) => '0',
            (_, c) => c,
        })
        .collect();
    first["outputs"] = flipped.into();
    all[0] = first.to_string();
    fs::write(&path, all.join("\n") + "\n").unwrap();

    assert_eq!(vat(&dir, &["solve"]), 6);
    let rows = csv_rows(&dir.join("traces/traces.csv"));
    let errors: Vec<_> = rows.iter().filter(|r| &r[6] != "ok").collect();
    assert!(!errors.is_empty());
    assert!(errors.iter().all(|r| r[0] == *first["instance_id"].as_str().unwrap()));
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("codes");
    assert_eq!(vat(&dir, &["--grid", "n=2", "gen"]), 2);
    assert_eq!(vat(&dir, &["--functions", "MAYBE", "gen"]), 2);
    assert_eq!(vat(&dir, &["--grid", SMALL_GRID, "gen"]), 0);
    // neither an endpoint nor a mock
    assert_eq!(vat(&dir, &["run"]), 2);

    let endpoint = tmp.path().join("endpoint.json");
    fs::write(
        &endpoint,
        r#"{"base_url": "http://127.0.0.1:9/v1", "model_name": "m", "max_retries": 0, "timeout_ms": 2000}"#,
    )
    .unwrap();
    assert_eq!(vat(&dir, &["--endpoint", endpoint.to_str().unwrap(), "run", "--no-judge"]), 4);
    let records = read_latest_records(&RunDir::new(&dir).records()).unwrap();
    assert_eq!(records.len(), 80);
    assert!(records.values().all(|r| r.status == RecordStatus::Failed));
    // config.resolved must never carry a secret, only the variable name
    let resolved = fs::read_to_string(dir.join("config.resolved")).unwrap();
    assert!(!resolved.contains("Bearer"));
}

fn rewrite_judge_labels(dir: &Path, label: JudgeLabel) {
    let path = RunDir::new(dir).records();
    let text: String = read_latest_records(&path)
        .unwrap()
        .into_values()
        .map(|mut r| {
            r.judge_label = Some(label);
            serde_json::to_string(&r).unwrap() + "\n"
        })
        .collect();
    fs::write(path, text).unwrap();
}

#[test]
fn mock_pipeline_report_and_degenerate_fit() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("mock");
    assert_eq!(vat(&dir, &["--grid", SMALL_GRID, "--mock", "oracle", "gen"]), 0);
    assert_eq!(vat(&dir, &["run"]), 0);
    assert_eq!(vat(&dir, &["report"]), 0);
    let bundle = cmd_report(&RunDir::new(&dir)).unwrap();
    assert_eq!(bundle.overall.records, 80);
    assert!(bundle.accuracy.values().all(|t| t.accuracy() == Some(1.0)));
    assert!(dir.join("reports/summary.md").is_file());

    rewrite_judge_labels(&dir, JudgeLabel::Permutation);
    assert_eq!(vat(&dir, &["report"]), 0);
    let bundle = cmd_report(&RunDir::new(&dir)).unwrap();
    assert_eq!(bundle.strategy_overall.proportion(), Some(0.0));
    assert!(bundle.strategy_by_n.values().all(|s| s.proportion() == Some(0.0)));
    for row in csv_rows(&dir.join("reports/elimination_by_n.csv")) {
        assert!(row.iter().any(|c| c == "0.000000"), "{row:?}");
    }
    // every regression response is 0, so no model can be fitted
    assert_eq!(vat(&dir, &["fit"]), 6);
    assert!(dir.join("reports/fit_errors.csv").is_file());
}

#[test]
fn planted_interaction_is_the_best_fit() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("fit");
    // materials for the cost prediction; the regression input below is synthetic
    assert_eq!(vat(&dir, &["--grid", SMALL_GRID, "gen"]), 0);
    let grid = MaterialsGrid::default();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut cells = Vec::new();
    for i in 0..4000 {
        let n = grid.n_values[rng.random_range(0..grid.n_values.len())];
        let t = lower_bound_trials(n).unwrap() + rng.random_range(0..6);
        cells.push((i, n, t));
    }
    let planted = |n: usize, t: usize| {
        let row = RegressionInputRow::new(String::new(), 1, n, t, false);
        let (l, tc) = (row.log_space - 2.8, t as f64 - 6.5);
        1.0 / (1.0 + (-(l - 0.15 * tc + 0.35 * l * tc)).exp())
    };
    let mut w = csv::Writer::from_path(dir.join("reports").join(REGRESSION_INPUT)).unwrap();
    for (i, n, t) in cells {
        let y = rng.random::<f64>() < planted(n, t);
        w.serialize(RegressionInputRow::new(format!("s{i}"), 1, n, t, y)).unwrap();
    }
    w.flush().unwrap();

    assert_eq!(vat(&dir, &["fit"]), 0);
    let comparison = csv_rows(&dir.join("reports/model_comparison.csv"));
    assert_eq!(comparison.len(), 5);
    assert_eq!(&comparison[0][0], "interaction");
    assert_eq!(comparison[0][3].parse::<f64>().unwrap(), 0.0);
    assert_eq!(vat(&dir, &["landscape"]), 0);
    assert!(!csv_rows(&dir.join("reports/contour.csv")).is_empty());
    assert_eq!(vat(&dir, &["predict"]), 0);
    assert!(!csv_rows(&dir.join("reports/cost_prediction.csv")).is_empty());
}

#[test]
fn shipped_tmin_table_matches_recomputation() {
    let grid = MaterialsGrid::default();
    let table = TminTable::compute(
        &grid.functions().unwrap(),
        &grid.n_values,
        DEFAULT_MASTER_SEED,
        DEFAULT_MAX_ATTEMPTS,
    )
    .unwrap();
    let mut fresh = Vec::new();
    table.write_csv(&mut fresh).unwrap();
    let shipped = fs::read(manifest_path("../../data/tmin_default.csv")).unwrap();
    assert_eq!(String::from_utf8(fresh).unwrap(), String::from_utf8(shipped).unwrap());
}

#[derive(Deserialize)]
struct LabeledResponse {
    id: String,
    reasoning_text: String,
    response_text: String,
    human_label: JudgeLabel,
}

fn fixture_record(item: &LabeledResponse) -> EvalRecord {
    EvalRecord {
        instance_id: item.id.clone(),
        model_name: "fixture".into(),
        template_version: "vat-prompt-v1".into(),
        mode: PromptMode::Reasoning,
        prompt: String::new(),
        response_text: item.response_text.clone(),
        reasoning_text: item.reasoning_text.clone(),
        char_count_total: EvalRecord::char_count(&item.reasoning_text, &item.response_text),
        parsed_answer: None,
        unparsed: false,
        correct: false,
        judge_label: None,
        judge_flagged: false,
        status: RecordStatus::Completed,
        error: None,
        attempt_count: 1,
        temperature: None,
        started_at: String::new(),
        finished_at: String::new(),
    }
}

#[test]
fn keyword_judge_agreement_on_labeled_fixture() {
    let items: Vec<LabeledResponse> = lines(&manifest_path("tests/fixtures/judge_labeled.jsonl"))
        .iter()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(items.len(), 100);
    let records: Vec<EvalRecord> = items.iter().map(fixture_record).collect();

    let rt = tokio::runtime::Runtime::new().unwrap();
    let judged = rt.block_on(async {
        let server = MockServer::start(KeywordJudge).await.unwrap();
        let config = server.config("keyword-judge");
        let judge = Arc::new(HttpEndpoint::new(config.clone()).unwrap());
        judge_batch(records, judge, &JudgeTemplate::default(), &config, None)
            .await
            .unwrap()
    });

    let pairs = judged.iter().zip(&items).map(|(r, item)| {
        let label = r.judge_label.expect("every fixture item judged");
        (label.index(), item.human_label.index())
    });
    let confusion = confusion_from_labels(pairs, JudgeLabel::ALL.len()).unwrap();
    assert_eq!(confusion, vec![vec![44, 5, 0], vec![4, 45, 0], vec![2, 0, 0]]);
    let report = cohen_kappa(&confusion).unwrap();
    assert!((report.accuracy - 0.89).abs() < 1e-12);
    assert!((report.expected_agreement - 0.49).abs() < 1e-12);
    assert!((report.kappa.unwrap() - 0.40 / 0.51).abs() < 1e-12);
}
