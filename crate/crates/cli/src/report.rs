//! Report bundle built from graded, judged transcripts.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;

use vat_core::eval::{EvalRecord, JudgeLabel, RecordStatus};
use vat_core::instance::VatInstance;
use vat_core::logic::FunctionClass;

use crate::commands::{class_pruning, RegressionInputRow, REGRESSION_INPUT};
use crate::dataset::{fmt_f, fmt_opt, read_instances, read_latest_records, RunDir};
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Tally {
    pub records: usize,
    pub completed: usize,
    pub correct: usize,
    pub unparsed: usize,
    pub failed: usize,
}

impl Tally {
    fn add(&mut self, r: &EvalRecord) {
        self.records += 1;
        match r.status {
            RecordStatus::Completed => {
                self.completed += 1;
                self.correct += usize::from(r.correct);
                self.unparsed += usize::from(r.unparsed);
            }
            RecordStatus::Failed => self.failed += 1,
        }
    }

    /// Correct over completed records; endpoint failures are not model answers.
    pub fn accuracy(&self) -> Option<f64> {
        (self.completed > 0).then(|| self.correct as f64 / self.completed as f64)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StrategyTally {
    pub permutation: usize,
    pub elimination: usize,
    pub invalid: usize,
    pub unjudged: usize,
}

impl StrategyTally {
    fn add(&mut self, r: &EvalRecord) {
        if r.status != RecordStatus::Completed {
            return;
        }
        match r.judge_label {
            Some(JudgeLabel::Permutation) => self.permutation += 1,
            Some(JudgeLabel::Elimination) => self.elimination += 1,
            Some(JudgeLabel::Invalid) => self.invalid += 1,
            None => self.unjudged += 1,
        }
    }

    /// Elimination over permutation plus elimination; invalid labels are excluded.
    pub fn proportion(&self) -> Option<f64> {
        let d = self.permutation + self.elimination;
        (d > 0).then(|| self.elimination as f64 / d as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportBundle {
    pub overall: Tally,
    /// Keyed by (function id, N).
    pub accuracy: BTreeMap<(u8, usize), Tally>,
    pub by_function: BTreeMap<u8, Tally>,
    pub strategy_overall: StrategyTally,
    pub strategy_by_n: BTreeMap<usize, StrategyTally>,
    pub strategy_by_t: BTreeMap<usize, StrategyTally>,
    pub strategy_by_function: BTreeMap<u8, StrategyTally>,
    pub regression_rows: usize,
    pub pruning_area: BTreeMap<FunctionClass, f64>,
}

#[derive(Default)]
struct CharTally {
    sum: usize,
    count: usize,
}

fn class_name(inst: &VatInstance) -> &'static str {
    inst.function.class().map(FunctionClass::as_str).unwrap_or("")
}

fn strategy_csv<K: ToString>(
    path: &std::path::Path,
    key: &str,
    rows: &BTreeMap<K, StrategyTally>,
) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([key, "permutation", "elimination", "invalid", "unjudged", "elimination_proportion"])?;
    for (k, s) in rows {
        w.write_record([
            k.to_string(),
            s.permutation.to_string(),
            s.elimination.to_string(),
            s.invalid.to_string(),
            s.unjudged.to_string(),
            fmt_opt(s.proportion()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn chars_csv(path: &std::path::Path, key: &str, rows: &BTreeMap<(usize, &'static str), CharTally>) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([key, "class", "records", "mean_chars"])?;
    for ((k, class), c) in rows {
        w.write_record([
            k.to_string(),
            class.to_string(),
            c.count.to_string(),
            fmt_f(c.sum as f64 / c.count as f64),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Joins the latest record per instance with the dataset and writes every
/// report table plus `summary.md`.
pub fn cmd_report(dir: &RunDir) -> CliResult<ReportBundle> {
    let instances = read_instances(&dir.instances())?;
    let records = read_latest_records(&dir.records())?;
    if records.is_empty() {
        return Err(CliError::InvalidData("no transcript records to report".into()));
    }
    let by_id: BTreeMap<&str, &VatInstance> = instances.iter().map(|i| (i.instance_id.as_str(), i)).collect();
    let mut joined = Vec::with_capacity(records.len());
    for (id, rec) in &records {
        let inst = by_id
            .get(id.as_str())
            .ok_or_else(|| CliError::InvalidData(format!("record `{id}` has no matching instance")))?;
        joined.push((*inst, rec));
    }

    let mut bundle = ReportBundle {
        overall: Tally::default(),
        accuracy: BTreeMap::new(),
        by_function: BTreeMap::new(),
        strategy_overall: StrategyTally::default(),
        strategy_by_n: BTreeMap::new(),
        strategy_by_t: BTreeMap::new(),
        strategy_by_function: BTreeMap::new(),
        regression_rows: 0,
        pruning_area: BTreeMap::new(),
    };
    let mut chars_n: BTreeMap<(usize, &'static str), CharTally> = BTreeMap::new();
    let mut chars_t: BTreeMap<(usize, &'static str), CharTally> = BTreeMap::new();
    let mut regression = Vec::new();
    for &(inst, rec) in &joined {
        let fid = inst.function.id().get();
        let (n, t) = (inst.n_vars(), inst.n_trials());
        bundle.overall.add(rec);
        bundle.accuracy.entry((fid, n)).or_default().add(rec);
        bundle.by_function.entry(fid).or_default().add(rec);
        bundle.strategy_overall.add(rec);
        bundle.strategy_by_n.entry(n).or_default().add(rec);
        bundle.strategy_by_t.entry(t).or_default().add(rec);
        bundle.strategy_by_function.entry(fid).or_default().add(rec);
        if rec.status == RecordStatus::Completed {
            for (map, key) in [(&mut chars_n, n), (&mut chars_t, t)] {
                let c = map.entry((key, class_name(inst))).or_default();
                c.sum += rec.char_count_total;
                c.count += 1;
            }
            match rec.judge_label {
                Some(JudgeLabel::Permutation) | Some(JudgeLabel::Elimination) => regression.push(
                    RegressionInputRow::new(
                        inst.instance_id.clone(),
                        fid,
                        n,
                        t,
                        rec.judge_label == Some(JudgeLabel::Elimination),
                    ),
                ),
                _ => {}
            }
        }
    }
    bundle.regression_rows = regression.len();
    bundle.pruning_area = class_pruning(&instances)
        .into_iter()
        .map(|(c, s)| (c, s.mean_normalized_area))
        .collect();

    let reports = dir.reports()?;
    let name = |fid: u8| {
        vat_core::logic::FunctionId::new(fid)
            .map(|f| f.function().name().to_string())
            .unwrap_or_default()
    };
    let class_of = |fid: u8| {
        vat_core::logic::FunctionId::new(fid)
            .and_then(|f| f.function().class())
            .map(|c| c.as_str())
            .unwrap_or("")
    };

    let mut w = csv::Writer::from_path(reports.join("accuracy_by_function_n.csv"))?;
    w.write_record(["function_id", "function", "class", "N", "records", "correct", "accuracy", "unparsed", "failed"])?;
    for (&(fid, n), t) in &bundle.accuracy {
        w.write_record([
            fid.to_string(),
            name(fid),
            class_of(fid).to_string(),
            n.to_string(),
            t.records.to_string(),
            t.correct.to_string(),
            fmt_opt(t.accuracy()),
            t.unparsed.to_string(),
            t.failed.to_string(),
        ])?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(reports.join("accuracy_by_function.csv"))?;
    w.write_record(["function_id", "function", "class", "records", "correct", "accuracy", "unparsed", "failed"])?;
    for (&fid, t) in &bundle.by_function {
        w.write_record([
            fid.to_string(),
            name(fid),
            class_of(fid).to_string(),
            t.records.to_string(),
            t.correct.to_string(),
            fmt_opt(t.accuracy()),
            t.unparsed.to_string(),
            t.failed.to_string(),
        ])?;
    }
    w.flush()?;

    strategy_csv(&reports.join("elimination_by_n.csv"), "N", &bundle.strategy_by_n)?;
    strategy_csv(&reports.join("elimination_by_t.csv"), "T", &bundle.strategy_by_t)?;
    let by_fn_named: BTreeMap<String, StrategyTally> = bundle
        .strategy_by_function
        .iter()
        .map(|(&fid, s)| (format!("{fid:02} {}", name(fid)), s.clone()))
        .collect();
    strategy_csv(&reports.join("elimination_by_function.csv"), "function", &by_fn_named)?;
    chars_csv(&reports.join("chars_by_n.csv"), "N", &chars_n)?;
    chars_csv(&reports.join("chars_by_t.csv"), "T", &chars_t)?;

    let mut w = csv::Writer::from_path(reports.join(REGRESSION_INPUT))?;
    for row in &regression {
        w.serialize(row)?;
    }
    if regression.is_empty() {
        w.write_record(["instance_id", "function_id", "N", "T", "y", "log_space", "rho"])?;
    }
    w.flush()?;

    fs::write(reports.join("summary.md"), summary_markdown(&bundle, &name))?;
    Ok(bundle)
}

fn summary_markdown(b: &ReportBundle, name: &dyn Fn(u8) -> String) -> String {
    let mut s = String::from("# Run summary\n\n");
    let o = &b.overall;
    let _ = writeln!(s, "- records: {}", o.records);
    let _ = writeln!(s, "- completed: {}", o.completed);
    let _ = writeln!(s, "- endpoint failures: {}", o.failed);
    let _ = writeln!(s, "- unparsed answers: {}", o.unparsed);
    let _ = writeln!(s, "- accuracy: {}", fmt_opt(o.accuracy()));
    let st = &b.strategy_overall;
    let _ = writeln!(
        s,
        "- strategy labels: {} permutation, {} elimination, {} invalid, {} unjudged",
        st.permutation, st.elimination, st.invalid, st.unjudged
    );
    let _ = writeln!(s, "- elimination proportion: {}", fmt_opt(st.proportion()));
    let _ = writeln!(s, "- regression observations: {}", b.regression_rows);

    s.push_str("\n## Accuracy by function\n\n| function | records | accuracy | unparsed |\n|---|---|---|---|\n");
    for (&fid, t) in &b.by_function {
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} |",
            name(fid),
            t.records,
            fmt_opt(t.accuracy()),
            t.unparsed
        );
    }

    s.push_str("\n## Elimination pruning by function class\n\n| class | mean normalized area |\n|---|---|\n");
    for (c, a) in &b.pruning_area {
        let _ = writeln!(s, "| {c} | {} |", fmt_f(*a));
    }
    if let (Some(conj), Some(xor)) = (
        b.pruning_area.get(&FunctionClass::Conjunctive),
        b.pruning_area.get(&FunctionClass::XorLike),
    ) {
        let verdict = if conj < xor {
            "conjunctive functions prune faster than XOR-like ones"
        } else {
            "XOR-like functions prune at least as fast as conjunctive ones"
        };
        let _ = writeln!(s, "\nFinding: {verdict} (difference {}).", fmt_f(xor - conj));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use vat_core::eval::PromptMode;

    fn record(status: RecordStatus, correct: bool, label: Option<JudgeLabel>) -> EvalRecord {
        EvalRecord {
            instance_id: "f01-n03-o0-r0".into(),
            model_name: "m".into(),
            template_version: "v".into(),
            mode: PromptMode::Reasoning,
            prompt: String::new(),
            response_text: String::new(),
            reasoning_text: String::new(),
            char_count_total: 0,
            parsed_answer: None,
            unparsed: !correct,
            correct,
            judge_label: label,
            judge_flagged: false,
            status,
            error: None,
            attempt_count: 1,
            temperature: None,
            started_at: String::new(),
            finished_at: String::new(),
        }
    }

    #[test]
    fn failed_records_leave_accuracy_alone() {
        let mut t = Tally::default();
        assert_eq!(t.accuracy(), None);
        t.add(&record(RecordStatus::Completed, true, None));
        t.add(&record(RecordStatus::Completed, false, None));
        t.add(&record(RecordStatus::Failed, false, None));
        assert_eq!((t.records, t.completed, t.failed, t.unparsed), (3, 2, 1, 1));
        assert_eq!(t.accuracy(), Some(0.5));
    }

    #[test]
    fn invalid_labels_leave_the_proportion_alone() {
        let mut s = StrategyTally::default();
        assert_eq!(s.proportion(), None);
        for label in [
            Some(JudgeLabel::Elimination),
            Some(JudgeLabel::Permutation),
            Some(JudgeLabel::Permutation),
            Some(JudgeLabel::Invalid),
            None,
        ] {
            s.add(&record(RecordStatus::Completed, true, label));
        }
        s.add(&record(RecordStatus::Failed, false, Some(JudgeLabel::Elimination)));
        assert_eq!((s.invalid, s.unjudged), (1, 1));
        assert!((s.proportion().unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }
}
