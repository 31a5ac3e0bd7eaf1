//! Pipeline staging and artifact writing behind the subcommands.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use modtraj_core::cues::{cue_flags, in_block_messages, word_bag, CueLexicon};
use modtraj_core::features::{block_context, engagement_features, FeatureOptions};
use modtraj_core::ingest::{
    block_entry_to_json, comment_to_json, group_and_merge, index_comments, load_comments_path,
    parse_block_log_path, ReasonTable,
};
use modtraj_core::matching::{build_all_pairs, MatchReport, Tolerance};
use modtraj_core::model::{
    compare_to_baselines, run_all_tasks, EvalReport, ModelConfig, UserRow,
};
use modtraj_core::report::{
    cohort_table, cues_table, engagement_comparison, engagement_table, features_table, fmt_f64,
    fmt_opt_f64, hazard_table, labels_table, pairs_table, sha256_hex_file, spans_table, CsvTable,
    Manifest,
};
use modtraj_core::stats::{chi_squared_2x2, fightin_words, mosaic_table, ContingencyTable2x2};
use modtraj_core::synth::{generate, SynthConfig};
use modtraj_core::trajectory::{
    build_timelines, hazard_curves, labels_for_cohort, select_cohort, CohortSelection, HazardKind,
};
use modtraj_core::types::{
    BlockAction, BlockLogEntry, BlockSpan, CohortConfig, CueFlags, EngagementFeatures,
    TrajectoryLabel, UserId, UserTimeline, SECONDS_PER_DAY,
};
use serde_json::{json, Value};

use crate::{CliError, PipelineArgs, SynthArgs};

/// Everything the analysis stages share, derived once per run.
pub struct Pipeline {
    pub cfg: CohortConfig,
    pub entries: Vec<BlockLogEntry>,
    pub spans_by_user: BTreeMap<UserId, Vec<BlockSpan>>,
    pub timelines: BTreeMap<UserId, UserTimeline>,
    pub selection: CohortSelection,
    pub labels: Vec<TrajectoryLabel>,
    pub skipped_blocks: usize,
    pub skipped_comments: usize,
    pub merge_warnings: usize,
}

fn validate_args(args: &PipelineArgs) -> Result<(), CliError> {
    if !(args.tolerance > 0.0) {
        return Err(CliError::Config("tolerance must be positive".into()));
    }
    if let Some(d) = args.tolerance_days {
        if !(d > 0.0) {
            return Err(CliError::Config("tolerance-days must be positive".into()));
        }
    }
    if args.hazard_months == 0 {
        return Err(CliError::Config("hazard-months must be at least 1".into()));
    }
    if !(args.fw_alpha > 0.0) {
        return Err(CliError::Config("fw-alpha must be positive".into()));
    }
    if args.epochs == 0 {
        return Err(CliError::Config("epochs must be at least 1".into()));
    }
    if !(0.0..0.95).contains(&args.dev_fraction) {
        return Err(CliError::Config("dev-fraction must be in [0, 0.95)".into()));
    }
    if args.c_grid.is_empty() || args.c_grid.iter().any(|&c| !(c > 0.0)) {
        return Err(CliError::Config("c-grid needs at least one positive value".into()));
    }
    Ok(())
}

fn read_config_file(path: &Path, what: &str) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {what} {}: {e}", path.display())))
}

fn reason_table(args: &PipelineArgs) -> Result<ReasonTable, CliError> {
    match &args.reason_table {
        None => Ok(ReasonTable::default()),
        Some(p) => ReasonTable::from_json(&read_config_file(p, "reason table")?)
            .map_err(|e| CliError::Config(format!("reason table invalid: {e}"))),
    }
}

fn cue_lexicon(args: &PipelineArgs) -> Result<CueLexicon, CliError> {
    match &args.cue_lexicon {
        None => Ok(CueLexicon::default()),
        Some(p) => CueLexicon::from_json(&read_config_file(p, "cue lexicon")?)
            .map_err(|e| CliError::Config(format!("cue lexicon invalid: {e}"))),
    }
}

pub fn load(args: &PipelineArgs) -> Result<Pipeline, CliError> {
    validate_args(args)?;
    let table = reason_table(args)?;

    let blocks = parse_block_log_path(&args.input_blocks, args.strict)
        .map_err(|e| CliError::Data(format!("block log: {e}")))?;
    let comments = load_comments_path(&args.input_comments, args.strict)
        .map_err(|e| CliError::Data(format!("comment record: {e}")))?;
    if blocks.entries.is_empty() && comments.events.is_empty() {
        return Err(CliError::Data("inputs contain no usable events".into()));
    }

    let dataset_end = match args.dataset_end_days {
        Some(d) => (d * SECONDS_PER_DAY as f64).round() as i64,
        None => blocks
            .entries
            .iter()
            .map(|e| e.ts)
            .chain(comments.events.iter().map(|e| e.ts))
            .max()
            .unwrap_or(0),
    };
    let cfg = CohortConfig {
        horizon_days: args.horizon_days,
        short_window_days: args.short_window_days,
        min_tenure_days: args.min_tenure_days,
        min_comments: args.min_comments,
        community_burnin_days: args.burnin_days,
        dataset_end,
    };
    cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;

    let skipped_blocks = blocks.skipped.len();
    let skipped_comments = comments.skipped.len();
    let (spans_by_user, warnings) = group_and_merge(blocks.entries.clone(), &table);
    let store = index_comments(comments.events);
    let timelines = build_timelines(&store, &spans_by_user);
    let selection = select_cohort(&timelines, &cfg);
    let labels = labels_for_cohort(&timelines, &selection.members, &cfg)
        .map_err(|e| CliError::Internal(format!("labeling a selected user failed: {e}")))?;

    Ok(Pipeline {
        cfg,
        entries: blocks.entries,
        spans_by_user,
        timelines,
        selection,
        labels,
        skipped_blocks,
        skipped_comments,
        merge_warnings: warnings.len(),
    })
}

// ---------------------------------------------------------------- output

struct OutDir {
    dir: PathBuf,
    written: Vec<String>,
}

impl OutDir {
    fn create(dir: &Path) -> Result<OutDir, CliError> {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))?;
        Ok(OutDir {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, content: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, content)
            .map_err(|e| CliError::Internal(format!("cannot write {}: {e}", path.display())))?;
        self.written.push(name.to_string());
        Ok(())
    }
}

fn base_manifest(command: &str, args: &PipelineArgs, p: &Pipeline) -> Result<Manifest, CliError> {
    let mut m = Manifest::new(command);
    for (key, path) in [
        ("blocks", &args.input_blocks),
        ("comments", &args.input_comments),
    ] {
        let digest = sha256_hex_file(path)
            .map_err(|e| CliError::Data(format!("cannot hash {}: {e}", path.display())))?;
        m.inputs.insert(key.to_string(), digest);
    }
    let tolerance = match args.tolerance_days {
        Some(d) => json!({ "absolute_days": d }),
        None => json!({ "relative": args.tolerance }),
    };
    for (k, v) in [
        ("horizon_days", json!(args.horizon_days)),
        ("short_window_days", json!(args.short_window_days)),
        ("min_tenure_days", json!(args.min_tenure_days)),
        ("min_comments", json!(args.min_comments)),
        ("burnin_days", json!(args.burnin_days)),
        ("dataset_end", json!(p.cfg.dataset_end)),
        ("tolerance", tolerance),
        ("count_edits", json!(args.count_edits)),
        ("hazard_months", json!(args.hazard_months)),
        ("fw_alpha", json!(args.fw_alpha)),
        ("seed", json!(args.seed)),
        ("c_grid", json!(args.c_grid)),
        ("dev_fraction", json!(args.dev_fraction)),
        ("epochs", json!(args.epochs)),
        ("strict", json!(args.strict)),
    ] {
        m.config.insert(k.to_string(), v);
    }
    m.notes.push(format!("block lines skipped: {}", p.skipped_blocks));
    m.notes.push(format!("comment lines skipped: {}", p.skipped_comments));
    m.notes.push(format!("merge warnings: {}", p.merge_warnings));
    m.notes
        .push("direct question detection is a surface pattern approximation".to_string());
    Ok(m)
}

fn finish(mut out: OutDir, mut manifest: Manifest) -> Result<(), CliError> {
    manifest.artifacts = out.written.clone();
    out.write("manifest.json", &manifest.to_json())
}

// ---------------------------------------------------------------- stages

fn matched_pairs(args: &PipelineArgs, p: &Pipeline) -> MatchReport {
    let tol = match args.tolerance_days {
        Some(d) => Tolerance::AbsoluteDays(d),
        None => Tolerance::Relative(args.tolerance),
    };
    build_all_pairs(&p.timelines, &p.selection.members, &p.labels, &p.cfg, tol)
}

fn cohort_features(
    args: &PipelineArgs,
    p: &Pipeline,
) -> Result<BTreeMap<UserId, EngagementFeatures>, CliError> {
    let opts = FeatureOptions {
        count_edits: args.count_edits,
    };
    let mut out = BTreeMap::new();
    for user in &p.selection.members {
        let tl = &p.timelines[user];
        let cutoff = tl.spans[0].start;
        let f = engagement_features(tl, cutoff, opts)
            .map_err(|e| CliError::Internal(format!("features for {user}: {e}")))?;
        out.insert(user.clone(), f);
    }
    Ok(out)
}

/// Features for every user that can anchor one: blocked users at
/// their first block, never-blocked users at their final comment
/// (exclusive cutoff moved one second past it so the whole history
/// counts). Users with no pre-anchor history are skipped.
fn comparison_features(
    args: &PipelineArgs,
    p: &Pipeline,
) -> BTreeMap<UserId, EngagementFeatures> {
    let opts = FeatureOptions {
        count_edits: args.count_edits,
    };
    let mut out = BTreeMap::new();
    for (user, tl) in &p.timelines {
        let cutoff = match tl.spans.first() {
            Some(s) => s.start,
            None => tl.last_activity + 1,
        };
        if let Ok(f) = engagement_features(tl, cutoff, opts) {
            out.insert(user.clone(), f);
        }
    }
    out
}

fn cohort_cues(args: &PipelineArgs, p: &Pipeline) -> Result<BTreeMap<UserId, CueFlags>, CliError> {
    let lex = cue_lexicon(args)?;
    let mut out = BTreeMap::new();
    for user in &p.selection.members {
        let tl = &p.timelines[user];
        let messages = in_block_messages(tl, &tl.spans[0]);
        out.insert(user.clone(), cue_flags(&messages, &lex));
    }
    Ok(out)
}

fn median(values: &mut Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.partial_cmp(b).expect("no NaN"));
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    })
}

fn sample_sd(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    Some((values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt())
}

fn ratio(num: usize, den: usize) -> Value {
    if den == 0 {
        Value::Null
    } else {
        json!(num as f64 / den as f64)
    }
}

fn test_json(t: Result<modtraj_core::stats::TestResult, modtraj_core::error::StatsError>) -> Value {
    match t {
        Ok(r) => json!({ "statistic": r.statistic, "p_value": r.p_value, "dof": r.dof }),
        Err(_) => Value::Null,
    }
}

/// The run-level summary: corpus counts, duration and unblock shape,
/// outcome rates, severity contrasts, and the apology/unblock test.
fn stats_json(p: &Pipeline, cues: &BTreeMap<UserId, CueFlags>) -> Value {
    let block_entries: Vec<&BlockLogEntry> = p
        .entries
        .iter()
        .filter(|e| e.action == BlockAction::Block)
        .collect();
    let blocked_users: std::collections::BTreeSet<&str> =
        block_entries.iter().map(|e| e.target.as_str()).collect();
    let moderators: std::collections::BTreeSet<&str> =
        block_entries.iter().map(|e| e.admin.as_str()).collect();
    let f = &p.selection.funnel;

    // imposed duration shape, per block action
    let mut finite_days: Vec<f64> = block_entries
        .iter()
        .filter_map(|e| match e.duration {
            Some(modtraj_core::types::BlockDuration::Seconds(s)) => {
                Some(s as f64 / SECONDS_PER_DAY as f64)
            }
            _ => None,
        })
        .collect();
    let n_finite = finite_days.len();
    let duration_sd = sample_sd(&finite_days);
    let duration_median = median(&mut finite_days);

    // early unblocks over merged spans
    let all_spans: Vec<&BlockSpan> = p.spans_by_user.values().flatten().collect();
    let reduced: Vec<&&BlockSpan> = all_spans.iter().filter(|s| s.reduced_early).collect();
    let mut reduction_hours: Vec<f64> = reduced
        .iter()
        .filter_map(|s| s.reduction_s)
        .map(|r| r as f64 / 3600.0)
        .collect();
    let median_reduction_hours = median(&mut reduction_hours);
    let users_with_reduction = p
        .spans_by_user
        .values()
        .filter(|spans| spans.iter().any(|s| s.reduced_early))
        .count();

    // outcome rates over the cohort
    let n = p.labels.len();
    let count = |f: &dyn Fn(&TrajectoryLabel) -> bool| p.labels.iter().filter(|l| f(l)).count();
    let mut tt: Vec<f64> = p.labels.iter().filter_map(|l| l.time_to_reoffense_days).collect();
    let median_tt = median(&mut tt);

    // severity contrast over unmodified first blocks
    let mut short_dep = (0u64, 0u64); // (departed within 30 days, stayed)
    let mut long_dep = (0u64, 0u64);
    let mut short_rec = (0u64, 0u64);
    let mut long_rec = (0u64, 0u64);
    for (user, label) in p.selection.members.iter().zip(&p.labels) {
        let span = &p.timelines[user].spans[0];
        if !span.duration_unchanged() {
            continue;
        }
        let Ok(ctx) = block_context(span) else { continue };
        let departed_month =
            (label.departure_time - span.start) as f64 <= 30.0 * SECONDS_PER_DAY as f64;
        let is_long = ctx.duration_class == modtraj_core::types::DurationClass::Long;
        let dep = if is_long { &mut long_dep } else { &mut short_dep };
        if departed_month {
            dep.0 += 1;
        } else {
            dep.1 += 1;
        }
        let rec = if is_long { &mut long_rec } else { &mut short_rec };
        if label.recidivist_long {
            rec.0 += 1;
        } else {
            rec.1 += 1;
        }
    }
    let severity_dep_test = chi_squared_2x2(ContingencyTable2x2 {
        a: short_dep.0,
        b: short_dep.1,
        c: long_dep.0,
        d: long_dep.1,
    });
    let severity_rec_test = chi_squared_2x2(ContingencyTable2x2 {
        a: short_rec.0,
        b: short_rec.1,
        c: long_rec.0,
        d: long_rec.1,
    });

    // apology while blocked against early unblock of that block
    let mut apology_unblock = ContingencyTable2x2 { a: 0, b: 0, c: 0, d: 0 };
    for user in &p.selection.members {
        let apology = cues[user].apology;
        let lifted = p.timelines[user].spans[0].reduced_early;
        match (apology, lifted) {
            (true, true) => apology_unblock.a += 1,
            (true, false) => apology_unblock.b += 1,
            (false, true) => apology_unblock.c += 1,
            (false, false) => apology_unblock.d += 1,
        }
    }

    let rate_den = |pair: (u64, u64)| -> Value {
        let den = pair.0 + pair.1;
        if den == 0 {
            Value::Null
        } else {
            json!(pair.0 as f64 / den as f64)
        }
    };

    json!({
        "counts": {
            "block_entries": block_entries.len(),
            "blocked_users": blocked_users.len(),
            "moderators": moderators.len(),
            "timeline_blocked_users": f.blocked_users,
            "any_disruption": f.any_disruption,
            "first_disruption": f.first_disruption,
            "first_finite": f.first_finite,
            "enough_comments": f.enough_comments,
            "enough_tenure": f.enough_tenure,
            "past_burnin": f.past_burnin,
            "cohort": p.selection.members.len(),
        },
        "durations": {
            "n_finite": n_finite,
            "median_days": duration_median,
            "sd_days": duration_sd,
            "indefinite_fraction": ratio(block_entries.len() - n_finite, block_entries.len()),
        },
        "unblocks": {
            "span_reduced_fraction": ratio(reduced.len(), all_spans.len()),
            "median_reduction_hours": median_reduction_hours,
            "users_with_reduction_fraction": ratio(users_with_reduction, p.spans_by_user.len()),
        },
        "outcomes": {
            "cohort": n,
            "no_reoffense_fraction": ratio(count(&|l| l.time_to_reoffense_days.is_none()), n),
            "median_days_to_reoffense": median_tt,
            "recid_long_fraction": ratio(count(&|l| l.recidivist_long), n),
            "recid_short_fraction": ratio(count(&|l| l.recidivist_short), n),
            "departed_within_horizon_fraction": ratio(count(&|l| l.departed_within_horizon), n),
            "departed_during_block_fraction": ratio(count(&|l| l.departed_during_block), n),
        },
        "severity": {
            "n_unchanged": short_dep.0 + short_dep.1 + long_dep.0 + long_dep.1,
            "departed_month_short_rate": rate_den(short_dep),
            "departed_month_long_rate": rate_den(long_dep),
            "departure_test": test_json(severity_dep_test),
            "recid_short_class_rate": rate_den(short_rec),
            "recid_long_class_rate": rate_den(long_rec),
            "recidivism_test": test_json(severity_rec_test),
        },
        "apology_unblock": {
            "table": [apology_unblock.a, apology_unblock.b, apology_unblock.c, apology_unblock.d],
            "test": test_json(chi_squared_2x2(apology_unblock)),
        },
    })
}

fn mosaics_csv(p: &Pipeline, cues: &BTreeMap<UserId, CueFlags>) -> CsvTable {
    let mut rows = Vec::new();
    let getters: [(&str, fn(&CueFlags) -> bool); 3] = [
        ("apology", |c| c.apology),
        ("direct_question", |c| c.direct_question),
        ("unfairness", |c| c.unfairness),
    ];
    for (name, get) in getters {
        let obs: Vec<(bool, bool)> = p
            .selection
            .members
            .iter()
            .zip(&p.labels)
            .map(|(u, l)| (get(&cues[u]), l.recidivist_long))
            .collect();
        if let Ok(result) = mosaic_table(&obs) {
            for g in &result.groups {
                rows.push(vec![
                    name.to_string(),
                    if g.present { "present" } else { "absent" }.to_string(),
                    fmt_f64(g.positive_ratio),
                    fmt_f64(g.negative_ratio),
                    g.n.to_string(),
                ]);
            }
        }
    }
    CsvTable {
        header: &["cue", "group", "recid_ratio", "reform_ratio", "n"],
        rows,
    }
}

fn fightin_words_csv(args: &PipelineArgs, p: &Pipeline) -> CsvTable {
    let mut texts_recid: Vec<&str> = Vec::new();
    let mut texts_reform: Vec<&str> = Vec::new();
    for (user, label) in p.selection.members.iter().zip(&p.labels) {
        let tl = &p.timelines[user];
        for msg in in_block_messages(tl, &tl.spans[0]) {
            if label.recidivist_long {
                texts_recid.push(&msg.text);
            } else {
                texts_reform.push(&msg.text);
            }
        }
    }
    let bag_a = word_bag(texts_recid);
    let bag_b = word_bag(texts_reform);
    let rows = match fightin_words(&bag_a, &bag_b, args.fw_alpha) {
        Err(_) => Vec::new(),
        Ok(words) => words
            .into_iter()
            .map(|w| {
                vec![w.word, fmt_f64(w.z), w.count_a.to_string(), w.count_b.to_string()]
            })
            .collect(),
    };
    CsvTable {
        header: &["word", "z", "count_a", "count_b"],
        rows,
    }
}

fn predict_outputs(
    args: &PipelineArgs,
    p: &Pipeline,
    features: &BTreeMap<UserId, EngagementFeatures>,
) -> Result<(CsvTable, String), CliError> {
    let mut rows = Vec::new();
    for (user, label) in p.selection.members.iter().zip(&p.labels) {
        let span = &p.timelines[user].spans[0];
        let context = block_context(span)
            .map_err(|e| CliError::Internal(format!("block context for {user}: {e}")))?;
        rows.push(UserRow {
            user: user.clone(),
            label: label.clone(),
            features: features[user].clone(),
            context,
        });
    }
    let mut grid = args.c_grid.clone();
    grid.sort_by(|a, b| a.partial_cmp(b).expect("validated grid"));
    grid.dedup();
    let cfg = ModelConfig {
        c_grid: grid,
        dev_fraction: args.dev_fraction,
        seed: args.seed,
        epochs: args.epochs,
    };
    let reports = run_all_tasks(&rows, &cfg)
        .map_err(|e| CliError::Data(format!("forecaster training failed: {e}")))?;
    let comparisons = compare_to_baselines(&reports);

    let table = CsvTable {
        header: &[
            "task",
            "feature_set",
            "chosen_c",
            "dev_accuracy",
            "loocv_accuracy",
            "n_pool",
            "n_dev",
        ],
        rows: reports
            .iter()
            .map(|r: &EvalReport| {
                vec![
                    r.task.name().to_string(),
                    r.feature_set.name().to_string(),
                    fmt_f64(r.report.chosen_c),
                    fmt_opt_f64(r.report.dev_accuracy),
                    fmt_f64(r.report.accuracy),
                    r.report.n_pool.to_string(),
                    r.report.n_dev.to_string(),
                ]
            })
            .collect(),
    };

    let report_values: Vec<Value> = reports
        .iter()
        .map(|r| {
            json!({
                "task": r.task.name(),
                "feature_set": r.feature_set.name(),
                "chosen_c": r.report.chosen_c,
                "dev_accuracy": r.report.dev_accuracy,
                "loocv_accuracy": r.report.accuracy,
                "n_pool": r.report.n_pool,
                "n_dev": r.report.n_dev,
                "predictions": r.report.predictions.iter().map(|q| json!({
                    "user": q.user,
                    "truth": q.truth,
                    "predicted": q.predicted,
                })).collect::<Vec<Value>>(),
            })
        })
        .collect();
    let comparison_values: Vec<Value> = comparisons
        .iter()
        .map(|c| {
            json!({
                "task": c.task.name(),
                "feature_set": c.feature_set.name(),
                "baseline": c.baseline.name(),
                "accuracy_delta": c.accuracy_delta,
                "statistic": c.test.statistic,
                "p_value": c.test.p_value,
            })
        })
        .collect();
    let mut predictions_json = serde_json::to_string_pretty(&json!({
        "reports": report_values,
        "comparisons": comparison_values,
    }))
    .expect("serializable");
    predictions_json.push('\n');
    Ok((table, predictions_json))
}

// ---------------------------------------------------------------- commands

pub fn cmd_ingest(args: &PipelineArgs) -> Result<(), CliError> {
    let p = load(args)?;
    let mut out = OutDir::create(&args.out)?;
    out.write("spans.csv", &spans_table(&p.spans_by_user).render())?;
    finish(out, base_manifest("ingest", args, &p)?)
}

pub fn cmd_cohort(args: &PipelineArgs) -> Result<(), CliError> {
    let p = load(args)?;
    let mut out = OutDir::create(&args.out)?;
    out.write(
        "cohort.csv",
        &cohort_table(&p.selection.members, &p.spans_by_user).render(),
    )?;
    finish(out, base_manifest("cohort", args, &p)?)
}

pub fn cmd_label(args: &PipelineArgs) -> Result<(), CliError> {
    let p = load(args)?;
    let mut out = OutDir::create(&args.out)?;
    out.write("labels.csv", &labels_table(&p.labels).render())?;
    finish(out, base_manifest("label", args, &p)?)
}

pub fn cmd_match(args: &PipelineArgs) -> Result<(), CliError> {
    let p = load(args)?;
    let report = matched_pairs(args, &p);
    let mut out = OutDir::create(&args.out)?;
    out.write("pairs.csv", &pairs_table(&report.pairs).render())?;
    let mut m = base_manifest("match", args, &p)?;
    for (kind, n) in &report.unmatched {
        m.notes.push(format!("unmatched {}: {}", kind.name(), n));
    }
    finish(out, m)
}

pub fn cmd_features(args: &PipelineArgs) -> Result<(), CliError> {
    let p = load(args)?;
    let features = cohort_features(args, &p)?;
    let mut out = OutDir::create(&args.out)?;
    out.write("features.csv", &features_table(&features).render())?;
    finish(out, base_manifest("features", args, &p)?)
}

pub fn cmd_cues(args: &PipelineArgs) -> Result<(), CliError> {
    let p = load(args)?;
    let cues = cohort_cues(args, &p)?;
    let mut out = OutDir::create(&args.out)?;
    out.write("cues.csv", &cues_table(&cues).render())?;
    finish(out, base_manifest("cues", args, &p)?)
}

pub fn cmd_stats(args: &PipelineArgs) -> Result<(), CliError> {
    let p = load(args)?;
    let cues = cohort_cues(args, &p)?;
    let mut out = OutDir::create(&args.out)?;
    let mut stats = serde_json::to_string_pretty(&stats_json(&p, &cues)).expect("serializable");
    stats.push('\n');
    out.write("stats.json", &stats)?;
    out.write("mosaics.csv", &mosaics_csv(&p, &cues).render())?;
    out.write("fightin_words.csv", &fightin_words_csv(args, &p).render())?;
    finish(out, base_manifest("stats", args, &p)?)
}

pub fn cmd_figures(args: &PipelineArgs) -> Result<(), CliError> {
    let p = load(args)?;
    let mut out = OutDir::create(&args.out)?;
    let dep = hazard_curves(&p.timelines, HazardKind::Departure, args.hazard_months, &p.cfg);
    let blk = hazard_curves(&p.timelines, HazardKind::Block, args.hazard_months, &p.cfg);
    out.write("hazard_departure.csv", &hazard_table(&dep).render())?;
    out.write("hazard_block.csv", &hazard_table(&blk).render())?;
    let pairs = matched_pairs(args, &p);
    let comparison = engagement_comparison(&pairs.pairs, &comparison_features(args, &p));
    out.write("engagement_comparison.csv", &engagement_table(&comparison).render())?;
    finish(out, base_manifest("figures", args, &p)?)
}

pub fn cmd_predict(args: &PipelineArgs) -> Result<(), CliError> {
    let p = load(args)?;
    let features = cohort_features(args, &p)?;
    let (table, predictions) = predict_outputs(args, &p, &features)?;
    let mut out = OutDir::create(&args.out)?;
    out.write("predict.csv", &table.render())?;
    out.write("predictions.json", &predictions)?;
    finish(out, base_manifest("predict", args, &p)?)
}

pub fn cmd_all(args: &PipelineArgs) -> Result<(), CliError> {
    let p = load(args)?;
    let features = cohort_features(args, &p)?;
    let cues = cohort_cues(args, &p)?;
    let pairs = matched_pairs(args, &p);
    let (predict_table, predictions) = predict_outputs(args, &p, &features)?;

    let mut out = OutDir::create(&args.out)?;
    out.write("spans.csv", &spans_table(&p.spans_by_user).render())?;
    out.write(
        "cohort.csv",
        &cohort_table(&p.selection.members, &p.spans_by_user).render(),
    )?;
    out.write("labels.csv", &labels_table(&p.labels).render())?;
    out.write("pairs.csv", &pairs_table(&pairs.pairs).render())?;
    out.write("features.csv", &features_table(&features).render())?;
    out.write("cues.csv", &cues_table(&cues).render())?;
    out.write("mosaics.csv", &mosaics_csv(&p, &cues).render())?;
    out.write("fightin_words.csv", &fightin_words_csv(args, &p).render())?;
    let dep = hazard_curves(&p.timelines, HazardKind::Departure, args.hazard_months, &p.cfg);
    let blk = hazard_curves(&p.timelines, HazardKind::Block, args.hazard_months, &p.cfg);
    out.write("hazard_departure.csv", &hazard_table(&dep).render())?;
    out.write("hazard_block.csv", &hazard_table(&blk).render())?;
    let comparison = engagement_comparison(&pairs.pairs, &comparison_features(args, &p));
    out.write("engagement_comparison.csv", &engagement_table(&comparison).render())?;
    let mut stats = serde_json::to_string_pretty(&stats_json(&p, &cues)).expect("serializable");
    stats.push('\n');
    out.write("stats.json", &stats)?;
    out.write("predict.csv", &predict_table.render())?;
    out.write("predictions.json", &predictions)?;

    let mut m = base_manifest("all", args, &p)?;
    for (kind, n) in &pairs.unmatched {
        m.notes.push(format!("unmatched {}: {}", kind.name(), n));
    }
    finish(out, m)
}

pub fn cmd_synth(args: &SynthArgs) -> Result<(), CliError> {
    let cfg = SynthConfig {
        n_users: args.n_users,
        seed: args.seed,
        monthly_departure_hazard: args.departure_hazard,
        block_rate: args.block_rate,
        base_recid_prob: args.base_recid_prob,
        recid_multiplier_for_high_activity: args.recid_multiplier,
        apology_recid_odds_ratio: args.apology_odds_ratio,
        unblock_rate: args.unblock_rate,
        median_block_duration_days: args.median_duration_days,
        horizon_days: args.horizon_days,
        short_window_days: args.short_window_days,
        min_tenure_days: args.min_tenure_days,
        min_comments: args.min_comments,
        community_burnin_days: args.burnin_days,
        dataset_end_days: args.dataset_end_days,
    };
    let data = generate(&cfg).map_err(|e| CliError::Config(e.to_string()))?;

    let mut blocks = String::new();
    for e in &data.blocks {
        blocks.push_str(&block_entry_to_json(e));
        blocks.push('\n');
    }
    let mut comments = String::new();
    for e in &data.comments {
        comments.push_str(&comment_to_json(e));
        comments.push('\n');
    }
    let truth = CsvTable {
        header: &[
            "user",
            "blocked",
            "in_cohort",
            "departed_during",
            "departed_horizon",
            "recid_short",
            "recid_long",
            "reformed",
            "tt_reoffense_days",
            "departure_ts",
            "apologized",
            "questioned",
            "claimed_unfairness",
            "high_activity",
        ],
        rows: data
            .truth
            .iter()
            .map(|t| {
                vec![
                    t.user.clone(),
                    t.blocked.to_string(),
                    t.in_cohort.to_string(),
                    t.departed_during_block.to_string(),
                    t.departed_within_horizon.to_string(),
                    t.recidivist_short.to_string(),
                    t.recidivist_long.to_string(),
                    t.reformed.to_string(),
                    fmt_opt_f64(t.time_to_reoffense_days),
                    t.departure_time.to_string(),
                    t.apologized.to_string(),
                    t.questioned.to_string(),
                    t.claimed_unfairness.to_string(),
                    t.high_activity.to_string(),
                ]
            })
            .collect(),
    };

    let mut out = OutDir::create(&args.out)?;
    out.write("blocks.jsonl", &blocks)?;
    out.write("comments.jsonl", &comments)?;
    out.write("truth.csv", &truth.render())?;
    let mut m = Manifest::new("synth");
    for (k, v) in [
        ("n_users", json!(args.n_users)),
        ("seed", json!(args.seed)),
        ("block_rate", json!(args.block_rate)),
        ("departure_hazard", json!(args.departure_hazard)),
        ("base_recid_prob", json!(args.base_recid_prob)),
        ("recid_multiplier", json!(args.recid_multiplier)),
        ("apology_odds_ratio", json!(args.apology_odds_ratio)),
        ("unblock_rate", json!(args.unblock_rate)),
        ("median_duration_days", json!(args.median_duration_days)),
        ("horizon_days", json!(args.horizon_days)),
        ("short_window_days", json!(args.short_window_days)),
        ("min_tenure_days", json!(args.min_tenure_days)),
        ("min_comments", json!(args.min_comments)),
        ("burnin_days", json!(args.burnin_days)),
        ("dataset_end_days", json!(args.dataset_end_days)),
    ] {
        m.config.insert(k.to_string(), v);
    }
    finish(out, m)
}
