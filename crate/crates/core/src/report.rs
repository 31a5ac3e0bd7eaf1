//! Artifact serialization: CSV tables, the run manifest, and digests.
//!
//! All writers are deterministic: rows arrive in caller-defined
//! canonical order, floats print through `Display` (shortest exact
//! round-trip), and optional values render as empty fields. The
//! manifest deliberately carries no timestamps so reruns on the same
//! inputs are byte-identical.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::stats::normal_quantile;
use crate::trajectory::HazardPoint;
use crate::types::{
    BlockSpan, CueFlags, EngagementFeatures, MatchedPair, PairKind, SpanEnd, TrajectoryLabel,
    UserId,
};

/// Quote a CSV field only when it needs it (comma, quote, newline).
pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        let mut out = String::with_capacity(s.len() + 2);
        out.push('"');
        for ch in s.chars() {
            if ch == '"' {
                out.push('"');
            }
            out.push(ch);
        }
        out.push('"');
        out
    } else {
        s.to_string()
    }
}

pub fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

pub fn fmt_opt_f64(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn fmt_span_end(e: SpanEnd) -> String {
    match e {
        SpanEnd::Finite(t) => t.to_string(),
        SpanEnd::Indefinite => String::new(),
    }
}

/// A header plus rows, rendered with `\n` line endings.
pub struct CsvTable {
    pub header: &'static [&'static str],
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.header.join(","));
        for row in &self.rows {
            debug_assert_eq!(row.len(), self.header.len());
            let line: Vec<String> = row.iter().map(|f| csv_field(f)).collect();
            let _ = writeln!(out, "{}", line.join(","));
        }
        out
    }
}

pub fn spans_table(spans_by_user: &BTreeMap<UserId, Vec<BlockSpan>>) -> CsvTable {
    let mut rows = Vec::new();
    for (user, spans) in spans_by_user {
        for s in spans {
            rows.push(vec![
                user.clone(),
                s.start.to_string(),
                fmt_span_end(s.original_end),
                fmt_span_end(s.effective_end),
                s.reduced_early.to_string(),
                s.reduction_s.map(|r| r.to_string()).unwrap_or_default(),
                s.reason_category.name().to_string(),
                s.entries.len().to_string(),
            ]);
        }
    }
    CsvTable {
        header: &[
            "user",
            "start",
            "original_end",
            "effective_end",
            "reduced_early",
            "reduction_s",
            "reason",
            "n_entries",
        ],
        rows,
    }
}

/// One row per cohort member: the anchoring first block.
pub fn cohort_table(
    cohort: &[UserId],
    spans_by_user: &BTreeMap<UserId, Vec<BlockSpan>>,
) -> CsvTable {
    let rows = cohort
        .iter()
        .map(|u| {
            let first = &spans_by_user[u][0];
            vec![
                u.clone(),
                first.start.to_string(),
                first.reason_category.name().to_string(),
            ]
        })
        .collect();
    CsvTable {
        header: &["user", "block_start", "reason"],
        rows,
    }
}

pub fn labels_table(labels: &[TrajectoryLabel]) -> CsvTable {
    let rows = labels
        .iter()
        .map(|l| {
            vec![
                l.user.clone(),
                l.departed_during_block.to_string(),
                l.departed_within_horizon.to_string(),
                l.recidivist_short.to_string(),
                l.recidivist_long.to_string(),
                l.reformed.to_string(),
                fmt_opt_f64(l.time_to_reoffense_days),
                l.departure_time.to_string(),
            ]
        })
        .collect();
    CsvTable {
        header: &[
            "user",
            "departed_during",
            "departed_horizon",
            "recid_short",
            "recid_long",
            "reformed",
            "tt_reoffense_days",
            "departure_ts",
        ],
        rows,
    }
}

pub fn pairs_table(pairs: &[MatchedPair]) -> CsvTable {
    let rows = pairs
        .iter()
        .map(|p| {
            vec![
                p.kind.name().to_string(),
                p.left.clone(),
                p.right.clone(),
                fmt_f64(p.match_stat),
            ]
        })
        .collect();
    CsvTable {
        header: &["kind", "left", "right", "match_stat"],
        rows,
    }
}

pub fn features_table(features: &BTreeMap<UserId, EngagementFeatures>) -> CsvTable {
    let rows = features
        .iter()
        .map(|(u, f)| {
            vec![
                u.clone(),
                fmt_f64(f.received_per_day),
                fmt_f64(f.contributed_per_day),
                f.received_raw.to_string(),
                f.contributed_raw.to_string(),
                fmt_opt_f64(f.received_spread),
                fmt_opt_f64(f.contributed_spread),
                fmt_f64(f.community_age_days),
            ]
        })
        .collect();
    CsvTable {
        header: &[
            "user",
            "received_per_day",
            "contributed_per_day",
            "received_raw",
            "contributed_raw",
            "received_spread",
            "contributed_spread",
            "community_age_days",
        ],
        rows,
    }
}

pub fn cues_table(cues: &BTreeMap<UserId, CueFlags>) -> CsvTable {
    let rows = cues
        .iter()
        .map(|(u, c)| {
            vec![
                u.clone(),
                c.apology.to_string(),
                c.direct_question.to_string(),
                c.unfairness.to_string(),
                c.n_messages.to_string(),
            ]
        })
        .collect();
    CsvTable {
        header: &["user", "apology", "direct_question", "unfairness", "n_messages"],
        rows,
    }
}

pub fn hazard_table(points: &[HazardPoint]) -> CsvTable {
    let rows = points
        .iter()
        .map(|p| {
            vec![
                p.month.to_string(),
                p.condition.name().to_string(),
                fmt_opt_f64(p.p),
                fmt_opt_f64(p.ci.map(|c| c.0)),
                fmt_opt_f64(p.ci.map(|c| c.1)),
                p.n.to_string(),
            ]
        })
        .collect();
    CsvTable {
        header: &["month", "condition", "p", "ci_lo", "ci_hi", "n"],
        rows,
    }
}

/// Mean and a normal-approximation 95% interval for one matched side.
#[derive(Clone, Copy, Debug)]
pub struct GroupStat {
    pub mean: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub n: usize,
}

fn summarize(values: &[f64]) -> Option<GroupStat> {
    if values.is_empty() {
        return None;
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return Some(GroupStat { mean, ci_lo: mean, ci_hi: mean, n });
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    let half = normal_quantile(0.975) * (var / n as f64).sqrt();
    Some(GroupStat { mean, ci_lo: mean - half, ci_hi: mean + half, n })
}

#[derive(Clone, Debug)]
pub struct EngagementRow {
    pub kind: PairKind,
    pub feature: &'static str,
    pub left: Option<GroupStat>,
    pub right: Option<GroupStat>,
    pub n_pairs: usize,
}

type FeatureGet = fn(&EngagementFeatures) -> Option<f64>;

const FEATURE_ACCESSORS: [(&str, FeatureGet); 7] = [
    ("received_per_day", |f| Some(f.received_per_day)),
    ("contributed_per_day", |f| Some(f.contributed_per_day)),
    ("received_raw", |f| Some(f.received_raw as f64)),
    ("contributed_raw", |f| Some(f.contributed_raw as f64)),
    ("received_spread", |f| f.received_spread),
    ("contributed_spread", |f| f.contributed_spread),
    ("community_age_days", |f| Some(f.community_age_days)),
];

/// Per pair family, compare each engagement feature across the two
/// sides. Users whose features are missing are skipped per feature,
/// so the per-side n can be below the pair count.
pub fn engagement_comparison(
    pairs: &[MatchedPair],
    features: &BTreeMap<UserId, EngagementFeatures>,
) -> Vec<EngagementRow> {
    let mut by_kind: BTreeMap<PairKind, Vec<&MatchedPair>> = BTreeMap::new();
    for p in pairs {
        by_kind.entry(p.kind).or_default().push(p);
    }
    let mut rows = Vec::new();
    for (kind, members) in &by_kind {
        for (name, get) in FEATURE_ACCESSORS {
            let side = |pick: fn(&MatchedPair) -> &UserId| -> Vec<f64> {
                members
                    .iter()
                    .filter_map(|p| features.get(pick(p)).and_then(get))
                    .collect()
            };
            let left = summarize(&side(|p| &p.left));
            let right = summarize(&side(|p| &p.right));
            rows.push(EngagementRow {
                kind: *kind,
                feature: name,
                left,
                right,
                n_pairs: members.len(),
            });
        }
    }
    rows
}

pub fn engagement_table(rows: &[EngagementRow]) -> CsvTable {
    let fmt_stat = |s: &Option<GroupStat>| -> [String; 3] {
        match s {
            Some(g) => [fmt_f64(g.mean), fmt_f64(g.ci_lo), fmt_f64(g.ci_hi)],
            None => [String::new(), String::new(), String::new()],
        }
    };
    let out = rows
        .iter()
        .map(|r| {
            let l = fmt_stat(&r.left);
            let rt = fmt_stat(&r.right);
            vec![
                r.kind.name().to_string(),
                r.feature.to_string(),
                l[0].clone(),
                l[1].clone(),
                l[2].clone(),
                rt[0].clone(),
                rt[1].clone(),
                rt[2].clone(),
                r.n_pairs.to_string(),
            ]
        })
        .collect();
    CsvTable {
        header: &[
            "kind",
            "feature",
            "left_mean",
            "left_ci_lo",
            "left_ci_hi",
            "right_mean",
            "right_ci_lo",
            "right_ci_hi",
            "n_pairs",
        ],
        rows: out,
    }
}

/// Rerun-stable record of what a command produced. No timestamps.
#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub config: BTreeMap<String, serde_json::Value>,
    /// Input path -> SHA-256 of its bytes.
    pub inputs: BTreeMap<String, String>,
    pub artifacts: Vec<String>,
    pub notes: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str) -> Manifest {
        Manifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: BTreeMap::new(),
            inputs: BTreeMap::new(),
            artifacts: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    let digest = h.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        let _ = write!(out, "{b:02x}");
    }
    out
}

pub fn sha256_hex_file(path: &Path) -> std::io::Result<String> {
    let mut f = std::fs::File::open(path)?;
    let mut h = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    let mut out = String::with_capacity(64);
    for b in h.finalize() {
        let _ = write!(out, "{b:02x}");
    }
    Ok(out)
}
