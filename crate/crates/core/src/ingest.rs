//! Input parsing and block-span reconstruction.
//!
//! Both input streams are UTF-8 line-delimited JSON. Parsing is
//! skip-and-count by default: malformed lines are reported with their
//! line number and the rest of the stream is kept. Strict mode turns
//! the first bad line into an error, for CI fixtures.
//!
//! Span merging turns one user's raw Block/Unblock/Modify entries into
//! disjoint effective intervals: a Block or Modify issued while a span
//! is active (or exactly at its effective end) extends or replaces the
//! open end, an Unblock truncates it, and anything left empty is
//! dropped with a warning.

use std::collections::{BTreeMap, HashSet};
use std::io::BufRead;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::IngestError;
use crate::types::{
    BlockAction, BlockDuration, BlockLogEntry, CommentAction, CommentEvent, PageKind,
    ReasonCategory, SpanEnd, Timestamp, UserId,
};

/// Wire form of one block log line.
#[derive(Debug, Serialize, Deserialize)]
pub struct RawBlockLine {
    pub ts: i64,
    pub admin: String,
    pub target: String,
    pub action: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_s: Option<RawDuration>,
    pub reason: String,
}

/// Duration field: an integer second count or the string "indefinite".
#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RawDuration {
    Seconds(i64),
    Tag(String),
}

/// Wire form of one comment line.
#[derive(Debug, Serialize, Deserialize)]
pub struct RawCommentLine {
    pub id: String,
    pub author: String,
    pub owner: String,
    pub page_kind: String,
    pub ts: i64,
    pub action: String,
    #[serde(default)]
    pub text: String,
}

#[derive(Debug, Default)]
pub struct BlockParse {
    /// Well-formed entries in file order.
    pub entries: Vec<BlockLogEntry>,
    pub skipped: Vec<IngestError>,
}

#[derive(Debug, Default)]
pub struct CommentParse {
    pub events: Vec<CommentEvent>,
    pub skipped: Vec<IngestError>,
}

pub fn parse_block_log(reader: impl BufRead, strict: bool) -> Result<BlockParse, IngestError> {
    let mut out = BlockParse::default();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| IngestError::Io {
            path: format!("<line {lineno}>"),
            source: e,
        })?;
        match parse_block_line(&line, lineno) {
            Ok(entry) => out.entries.push(entry),
            Err(err) if strict => return Err(err),
            Err(err) => out.skipped.push(err),
        }
    }
    Ok(out)
}

pub fn parse_block_log_path(path: &Path, strict: bool) -> Result<BlockParse, IngestError> {
    let file = std::fs::File::open(path).map_err(|e| IngestError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    parse_block_log(std::io::BufReader::new(file), strict)
}

fn parse_block_line(line: &str, lineno: usize) -> Result<BlockLogEntry, IngestError> {
    let raw: RawBlockLine =
        serde_json::from_str(line).map_err(|e| IngestError::MalformedRecord {
            line: lineno,
            detail: e.to_string(),
        })?;
    if raw.ts < 0 {
        return Err(IngestError::MalformedRecord {
            line: lineno,
            detail: format!("negative timestamp {}", raw.ts),
        });
    }
    let action = match raw.action.as_str() {
        "block" => BlockAction::Block,
        "unblock" => BlockAction::Unblock,
        "modify" => BlockAction::Modify,
        other => {
            return Err(IngestError::UnknownAction {
                line: lineno,
                action: other.to_string(),
            })
        }
    };
    let duration = match (action, raw.duration_s) {
        (BlockAction::Unblock, None) => None,
        (BlockAction::Unblock, Some(_)) => {
            return Err(IngestError::MalformedRecord {
                line: lineno,
                detail: "unblock entry carries a duration".into(),
            })
        }
        (_, Some(RawDuration::Seconds(s))) if s > 0 => Some(BlockDuration::Seconds(s)),
        (_, Some(RawDuration::Seconds(s))) => {
            return Err(IngestError::NonPositiveDuration {
                line: lineno,
                duration: s,
            })
        }
        (_, Some(RawDuration::Tag(tag))) if tag == "indefinite" => Some(BlockDuration::Indefinite),
        (_, Some(RawDuration::Tag(tag))) => {
            return Err(IngestError::MalformedRecord {
                line: lineno,
                detail: format!("unknown duration {tag:?}"),
            })
        }
        (_, None) => {
            return Err(IngestError::MalformedRecord {
                line: lineno,
                detail: "block/modify entry lacks duration_s".into(),
            })
        }
    };
    Ok(BlockLogEntry {
        ts: raw.ts,
        admin: raw.admin,
        target: raw.target,
        action,
        duration,
        reason_text: raw.reason,
    })
}

pub fn block_entry_to_json(entry: &BlockLogEntry) -> String {
    let raw = RawBlockLine {
        ts: entry.ts,
        admin: entry.admin.clone(),
        target: entry.target.clone(),
        action: match entry.action {
            BlockAction::Block => "block",
            BlockAction::Unblock => "unblock",
            BlockAction::Modify => "modify",
        }
        .to_string(),
        duration_s: entry.duration.map(|d| match d {
            BlockDuration::Seconds(s) => RawDuration::Seconds(s),
            BlockDuration::Indefinite => RawDuration::Tag("indefinite".to_string()),
        }),
        reason: entry.reason_text.clone(),
    };
    serde_json::to_string(&raw).expect("block line serializes")
}

pub fn load_comments(reader: impl BufRead, strict: bool) -> Result<CommentParse, IngestError> {
    let mut out = CommentParse::default();
    let mut seen_ids: HashSet<String> = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| IngestError::Io {
            path: format!("<line {lineno}>"),
            source: e,
        })?;
        match parse_comment_line(&line, lineno) {
            Ok(event) => {
                if !seen_ids.insert(event.id.clone()) {
                    let err = IngestError::DuplicateId {
                        line: lineno,
                        id: event.id.clone(),
                    };
                    if strict {
                        return Err(err);
                    }
                    out.skipped.push(err);
                } else {
                    out.events.push(event);
                }
            }
            Err(err) if strict => return Err(err),
            Err(err) => out.skipped.push(err),
        }
    }
    Ok(out)
}

pub fn load_comments_path(path: &Path, strict: bool) -> Result<CommentParse, IngestError> {
    let file = std::fs::File::open(path).map_err(|e| IngestError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    load_comments(std::io::BufReader::new(file), strict)
}

fn parse_comment_line(line: &str, lineno: usize) -> Result<CommentEvent, IngestError> {
    let raw: RawCommentLine =
        serde_json::from_str(line).map_err(|e| IngestError::MalformedRecord {
            line: lineno,
            detail: e.to_string(),
        })?;
    if raw.ts < 0 {
        return Err(IngestError::MalformedRecord {
            line: lineno,
            detail: format!("negative timestamp {}", raw.ts),
        });
    }
    let page_kind = match raw.page_kind.as_str() {
        "user" => PageKind::UserTalk,
        "article" => PageKind::ArticleTalk,
        other => {
            return Err(IngestError::MalformedRecord {
                line: lineno,
                detail: format!("unknown page_kind {other:?}"),
            })
        }
    };
    let action = match raw.action.as_str() {
        "add" => CommentAction::Add,
        "edit" => CommentAction::Edit,
        "delete" => CommentAction::Delete,
        other => {
            return Err(IngestError::UnknownAction {
                line: lineno,
                action: other.to_string(),
            })
        }
    };
    if raw.text.is_empty() && action != CommentAction::Delete {
        return Err(IngestError::MalformedRecord {
            line: lineno,
            detail: "empty text on a non-delete action".into(),
        });
    }
    Ok(CommentEvent {
        id: raw.id,
        author: raw.author,
        owner: raw.owner,
        page_kind,
        ts: raw.ts,
        action,
        text: raw.text,
    })
}

pub fn comment_to_json(event: &CommentEvent) -> String {
    let raw = RawCommentLine {
        id: event.id.clone(),
        author: event.author.clone(),
        owner: event.owner.clone(),
        page_kind: match event.page_kind {
            PageKind::UserTalk => "user",
            PageKind::ArticleTalk => "article",
        }
        .to_string(),
        ts: event.ts,
        action: match event.action {
            CommentAction::Add => "add",
            CommentAction::Edit => "edit",
            CommentAction::Delete => "delete",
        }
        .to_string(),
        text: event.text.clone(),
    };
    serde_json::to_string(&raw).expect("comment line serializes")
}

/// Comment events indexed by author and by talk-page owner. Each index
/// holds positions into `events`, sorted by (ts, id).
#[derive(Debug, Default)]
pub struct CommentStore {
    pub events: Vec<CommentEvent>,
    pub by_author: BTreeMap<UserId, Vec<usize>>,
    pub by_owner: BTreeMap<String, Vec<usize>>,
}

pub fn index_comments(events: Vec<CommentEvent>) -> CommentStore {
    let mut by_author: BTreeMap<UserId, Vec<usize>> = BTreeMap::new();
    let mut by_owner: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, e) in events.iter().enumerate() {
        by_author.entry(e.author.clone()).or_default().push(i);
        by_owner.entry(e.owner.clone()).or_default().push(i);
    }
    let sort_key = |&i: &usize| (events[i].ts, events[i].id.clone());
    for list in by_author.values_mut().chain(by_owner.values_mut()) {
        list.sort_by_key(sort_key);
    }
    CommentStore {
        events,
        by_author,
        by_owner,
    }
}

// ---- reason categorization ----

/// Keyword table mapping lowercase substrings to categories, checked
/// in a fixed priority order; the first matching category wins and an
/// unmatched reason is Unknown.
#[derive(Clone, Debug)]
pub struct ReasonTable {
    rules: Vec<(ReasonCategory, Vec<String>)>,
}

/// Priority order for categorization.
const CATEGORY_PRIORITY: [ReasonCategory; 6] = [
    ReasonCategory::PersonalAttack,
    ReasonCategory::Harassment,
    ReasonCategory::EditWarring,
    ReasonCategory::DisruptiveEditing,
    ReasonCategory::OtherDisruption,
    ReasonCategory::Protection,
];

impl Default for ReasonTable {
    fn default() -> ReasonTable {
        let kw = |words: &[&str]| words.iter().map(|w| w.to_string()).collect::<Vec<_>>();
        ReasonTable {
            rules: vec![
                (
                    ReasonCategory::PersonalAttack,
                    kw(&["personal attack", "incivility", "civility", "npa", "insult"]),
                ),
                (
                    ReasonCategory::Harassment,
                    kw(&["harass", "intimidat", "stalk", "threat", "outing"]),
                ),
                (
                    ReasonCategory::EditWarring,
                    kw(&["edit war", "edit-war", "3rr", "revert war", "three-revert"]),
                ),
                (
                    ReasonCategory::DisruptiveEditing,
                    kw(&["disrupt", "vandal", "spam", "sock", "pov push", "unsourced"]),
                ),
                (ReasonCategory::OtherDisruption, vec![]),
                (
                    ReasonCategory::Protection,
                    kw(&["protect", "proxy", "webhost", "compromised", "school"]),
                ),
            ],
        }
    }
}

impl ReasonTable {
    /// Load from a JSON object mapping category names to lowercase
    /// substring lists. Missing categories keep empty keyword lists.
    pub fn from_json(json: &str) -> Result<ReasonTable, String> {
        let map: BTreeMap<String, Vec<String>> =
            serde_json::from_str(json).map_err(|e| e.to_string())?;
        let mut by_cat: BTreeMap<ReasonCategory, Vec<String>> = BTreeMap::new();
        for (name, words) in map {
            let cat = ReasonCategory::from_name(&name)
                .ok_or_else(|| format!("unknown reason category {name:?}"))?;
            if cat == ReasonCategory::Unknown {
                return Err("the unknown category cannot carry keywords".into());
            }
            by_cat.insert(cat, words);
        }
        Ok(ReasonTable {
            rules: CATEGORY_PRIORITY
                .iter()
                .map(|&cat| (cat, by_cat.get(&cat).cloned().unwrap_or_default()))
                .collect(),
        })
    }

    pub fn categorize(&self, reason_text: &str) -> ReasonCategory {
        let lowered = reason_text.to_lowercase();
        for (cat, words) in &self.rules {
            if words.iter().any(|w| lowered.contains(w.as_str())) {
                return *cat;
            }
        }
        ReasonCategory::Unknown
    }
}

// ---- span merging ----

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MergeWarningKind {
    /// Unblock with no active block at its timestamp; entry ignored.
    UnblockWithoutActiveBlock,
    /// A span whose effective interval came out empty; span dropped.
    EmptySpanDropped,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MergeWarning {
    pub target: UserId,
    pub ts: Timestamp,
    pub kind: MergeWarningKind,
}

/// Canonical processing order: by timestamp, impositions before
/// releases at the same instant (Block, then Modify, then Unblock),
/// original position as the final tie-break.
pub fn canonical_entry_order(entries: &mut [BlockLogEntry]) {
    let rank = |a: BlockAction| match a {
        BlockAction::Block => 0u8,
        BlockAction::Modify => 1,
        BlockAction::Unblock => 2,
    };
    entries.sort_by(|x, y| x.ts.cmp(&y.ts).then_with(|| rank(x.action).cmp(&rank(y.action))));
}

struct OpenSpan {
    start: Timestamp,
    imposed: SpanEnd,
    effective: SpanEnd,
    entries: Vec<BlockLogEntry>,
}

impl OpenSpan {
    fn close(
        self,
        table: &ReasonTable,
        warnings: &mut Vec<MergeWarning>,
    ) -> Option<crate::types::BlockSpan> {
        if self.effective <= SpanEnd::Finite(self.start) {
            warnings.push(MergeWarning {
                target: self.entries[0].target.clone(),
                ts: self.start,
                kind: MergeWarningKind::EmptySpanDropped,
            });
            return None;
        }
        let (reduced_early, reduction_s) = match (self.imposed, self.effective) {
            (SpanEnd::Finite(i), SpanEnd::Finite(e)) => (e < i, Some(i - e)),
            (SpanEnd::Indefinite, SpanEnd::Indefinite) => (false, Some(0)),
            // lifted early from an indefinite block: the cut is unbounded
            (SpanEnd::Indefinite, SpanEnd::Finite(_)) => (true, None),
            (SpanEnd::Finite(_), SpanEnd::Indefinite) => {
                unreachable!("effective end can never exceed the imposed end")
            }
        };
        Some(crate::types::BlockSpan {
            target: self.entries[0].target.clone(),
            start: self.start,
            original_end: self.imposed,
            effective_end: self.effective,
            reduced_early,
            reduction_s,
            reason_category: table.categorize(&self.entries[0].reason_text),
            entries: self.entries,
        })
    }
}

/// Merge one user's canonically sorted entries into disjoint spans.
///
/// A span's reason category comes from its first entry (later re-blocks
/// merged into the same span do not change it). The imposed end tracks
/// the latest Block/Modify target; Unblock only lowers the effective
/// end, so a later re-block can cancel an earlier truncation.
pub fn merge_block_spans(
    entries: &[BlockLogEntry],
    table: &ReasonTable,
) -> (Vec<crate::types::BlockSpan>, Vec<MergeWarning>) {
    debug_assert!(entries.windows(2).all(|w| w[0].ts <= w[1].ts));
    debug_assert!(entries.windows(2).all(|w| w[0].target == w[1].target));
    let mut spans = Vec::new();
    let mut warnings = Vec::new();
    let mut open: Option<OpenSpan> = None;
    for entry in entries {
        match entry.action {
            BlockAction::Block => {
                let new_end = entry.duration.expect("block has duration").end_from(entry.ts);
                match open.as_mut() {
                    Some(o) if SpanEnd::Finite(entry.ts) <= o.effective => {
                        o.effective = o.effective.max(new_end);
                        o.imposed = o.imposed.max(new_end);
                        o.entries.push(entry.clone());
                    }
                    _ => {
                        if let Some(o) = open.take() {
                            spans.extend(o.close(table, &mut warnings));
                        }
                        open = Some(OpenSpan {
                            start: entry.ts,
                            imposed: new_end,
                            effective: new_end,
                            entries: vec![entry.clone()],
                        });
                    }
                }
            }
            BlockAction::Modify => {
                let new_end = entry.duration.expect("modify has duration").end_from(entry.ts);
                match open.as_mut() {
                    Some(o) if SpanEnd::Finite(entry.ts) <= o.effective => {
                        // latest-wins: replaces the end rather than stacking
                        o.effective = new_end;
                        o.imposed = new_end;
                        o.entries.push(entry.clone());
                    }
                    _ => {
                        // an orphan modify still imposes a block interval
                        if let Some(o) = open.take() {
                            spans.extend(o.close(table, &mut warnings));
                        }
                        open = Some(OpenSpan {
                            start: entry.ts,
                            imposed: new_end,
                            effective: new_end,
                            entries: vec![entry.clone()],
                        });
                    }
                }
            }
            BlockAction::Unblock => match open.as_mut() {
                Some(o) if SpanEnd::Finite(entry.ts) < o.effective => {
                    o.effective = SpanEnd::Finite(entry.ts);
                    o.entries.push(entry.clone());
                }
                _ => warnings.push(MergeWarning {
                    target: entry.target.clone(),
                    ts: entry.ts,
                    kind: MergeWarningKind::UnblockWithoutActiveBlock,
                }),
            },
        }
    }
    if let Some(o) = open.take() {
        spans.extend(o.close(table, &mut warnings));
    }
    (spans, warnings)
}

/// Group a full log by target, canonically order each group, and merge.
/// Returned map iterates users in id order; warnings follow that order.
pub fn group_and_merge(
    mut entries: Vec<BlockLogEntry>,
    table: &ReasonTable,
) -> (BTreeMap<UserId, Vec<crate::types::BlockSpan>>, Vec<MergeWarning>) {
    entries.sort_by(|a, b| a.target.cmp(&b.target));
    let mut groups: Vec<(UserId, Vec<BlockLogEntry>)> = Vec::new();
    for entry in entries {
        match groups.last_mut() {
            Some((target, group)) if *target == entry.target => group.push(entry),
            _ => groups.push((entry.target.clone(), vec![entry])),
        }
    }
    let merged: Vec<(UserId, Vec<crate::types::BlockSpan>, Vec<MergeWarning>)> = groups
        .into_par_iter()
        .map(|(target, mut group)| {
            canonical_entry_order(&mut group);
            let (spans, warnings) = merge_block_spans(&group, table);
            (target, spans, warnings)
        })
        .collect();
    let mut by_user = BTreeMap::new();
    let mut all_warnings = Vec::new();
    for (target, spans, warnings) in merged {
        all_warnings.extend(warnings);
        if !spans.is_empty() {
            by_user.insert(target, spans);
        }
    }
    (by_user, all_warnings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::BlockSpan;

    const DAY: i64 = 86_400;

    fn block(ts: i64, dur: i64) -> BlockLogEntry {
        BlockLogEntry {
            ts,
            admin: "adm".into(),
            target: "u1".into(),
            action: BlockAction::Block,
            duration: Some(BlockDuration::Seconds(dur)),
            reason_text: "edit warring".into(),
        }
    }

    fn unblock(ts: i64) -> BlockLogEntry {
        BlockLogEntry {
            ts,
            admin: "adm".into(),
            target: "u1".into(),
            action: BlockAction::Unblock,
            duration: None,
            reason_text: String::new(),
        }
    }

    fn modify(ts: i64, dur: i64) -> BlockLogEntry {
        BlockLogEntry {
            ts,
            admin: "adm".into(),
            target: "u1".into(),
            action: BlockAction::Modify,
            duration: Some(BlockDuration::Seconds(dur)),
            reason_text: "adjusting".into(),
        }
    }

    fn merge(entries: &[BlockLogEntry]) -> (Vec<BlockSpan>, Vec<MergeWarning>) {
        merge_block_spans(entries, &ReasonTable::default())
    }

    #[test]
    fn empty_stream_parses_to_nothing() {
        let parsed = parse_block_log(std::io::Cursor::new(""), false).unwrap();
        assert!(parsed.entries.is_empty());
        assert!(parsed.skipped.is_empty());
        let comments = load_comments(std::io::Cursor::new(""), false).unwrap();
        assert!(comments.events.is_empty());
    }

    #[test]
    fn single_block_line_round_trips() {
        let line = r#"{"ts":100,"admin":"A","target":"B","action":"block","duration_s":86400,"reason":"edit warring"}"#;
        let parsed = parse_block_log(std::io::Cursor::new(line), true).unwrap();
        assert_eq!(parsed.entries.len(), 1);
        let e = &parsed.entries[0];
        assert_eq!(e.ts, 100);
        assert_eq!(e.admin, "A");
        assert_eq!(e.target, "B");
        assert_eq!(e.action, BlockAction::Block);
        assert_eq!(e.duration, Some(BlockDuration::Seconds(86_400)));
        assert_eq!(e.reason_text, "edit warring");
        let json = block_entry_to_json(e);
        let reparsed = parse_block_log(std::io::Cursor::new(json), true).unwrap();
        assert_eq!(reparsed.entries, parsed.entries);
    }

    #[test]
    fn corrupted_lines_are_skipped_and_counted() {
        let mut lines = Vec::new();
        for i in 0..50 {
            if [7usize, 21, 40].contains(&i) {
                lines.push("not json at all".to_string());
            } else {
                lines.push(format!(
                    r#"{{"ts":{},"admin":"a","target":"t{}","action":"block","duration_s":3600,"reason":"spam"}}"#,
                    i * 10,
                    i
                ));
            }
        }
        let parsed = parse_block_log(std::io::Cursor::new(lines.join("\n")), false).unwrap();
        assert_eq!(parsed.entries.len(), 47);
        assert_eq!(parsed.skipped.len(), 3);
        let lines_reported: Vec<usize> = parsed
            .skipped
            .iter()
            .map(|e| match e {
                IngestError::MalformedRecord { line, .. } => *line,
                other => panic!("unexpected issue {other:?}"),
            })
            .collect();
        assert_eq!(lines_reported, vec![8, 22, 41]);
        // strict mode fails fast on the first bad line
        assert!(parse_block_log(std::io::Cursor::new(lines.join("\n")), true).is_err());
    }

    #[test]
    fn invalid_fields_are_rejected() {
        let bad_action = r#"{"ts":1,"admin":"a","target":"b","action":"banish","duration_s":5,"reason":""}"#;
        assert!(matches!(
            parse_block_log(std::io::Cursor::new(bad_action), true),
            Err(IngestError::UnknownAction { line: 1, .. })
        ));
        let zero_dur = r#"{"ts":1,"admin":"a","target":"b","action":"block","duration_s":0,"reason":""}"#;
        assert!(matches!(
            parse_block_log(std::io::Cursor::new(zero_dur), true),
            Err(IngestError::NonPositiveDuration { duration: 0, .. })
        ));
        let indefinite = r#"{"ts":1,"admin":"a","target":"b","action":"block","duration_s":"indefinite","reason":""}"#;
        let parsed = parse_block_log(std::io::Cursor::new(indefinite), true).unwrap();
        assert_eq!(parsed.entries[0].duration, Some(BlockDuration::Indefinite));
    }

    #[test]
    fn comment_parsing_validates_and_indexes() {
        let lines = [
            r#"{"id":"c1","author":"u1","owner":"u2","page_kind":"user","ts":10,"action":"add","text":"hello"}"#,
            r#"{"id":"c2","author":"u1","owner":"art1","page_kind":"article","ts":5,"action":"add","text":"note"}"#,
            r#"{"id":"c3","author":"u1","owner":"u2","page_kind":"user","ts":20,"action":"delete","text":""}"#,
            r#"{"id":"c1","author":"u9","owner":"u2","page_kind":"user","ts":30,"action":"add","text":"dup id"}"#,
        ]
        .join("\n");
        let parsed = load_comments(std::io::Cursor::new(lines.as_str()), false).unwrap();
        assert_eq!(parsed.events.len(), 3);
        assert!(matches!(parsed.skipped[0], IngestError::DuplicateId { .. }));
        let store = index_comments(parsed.events);
        assert_eq!(store.by_author.len(), 1);
        assert_eq!(store.by_owner.len(), 2);
        // author index is time-sorted even though input was not
        let times: Vec<i64> = store.by_author["u1"].iter().map(|&i| store.events[i].ts).collect();
        assert_eq!(times, vec![5, 10, 20]);
        // empty text is only valid on delete
        let bad = r#"{"id":"c9","author":"u1","owner":"u2","page_kind":"user","ts":1,"action":"add","text":""}"#;
        assert!(load_comments(std::io::Cursor::new(bad), true).is_err());
    }

    #[test]
    fn index_matches_naive_grouping() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let events: Vec<CommentEvent> = (0..10_000)
            .map(|i| CommentEvent {
                id: format!("c{i}"),
                author: format!("u{}", rng.random_range(0..200)),
                owner: format!("u{}", rng.random_range(0..200)),
                page_kind: if rng.random_bool(0.5) {
                    PageKind::UserTalk
                } else {
                    PageKind::ArticleTalk
                },
                ts: rng.random_range(0..1_000_000),
                action: CommentAction::Add,
                text: "t".into(),
            })
            .collect();
        let store = index_comments(events.clone());
        let mut naive_author: BTreeMap<String, Vec<(i64, String)>> = BTreeMap::new();
        let mut naive_owner: BTreeMap<String, Vec<(i64, String)>> = BTreeMap::new();
        for e in &events {
            naive_author
                .entry(e.author.clone())
                .or_default()
                .push((e.ts, e.id.clone()));
            naive_owner
                .entry(e.owner.clone())
                .or_default()
                .push((e.ts, e.id.clone()));
        }
        for list in naive_author.values_mut().chain(naive_owner.values_mut()) {
            list.sort();
        }
        let flatten = |idx: &BTreeMap<String, Vec<usize>>| {
            idx.iter()
                .map(|(k, v)| {
                    (
                        k.clone(),
                        v.iter()
                            .map(|&i| (store.events[i].ts, store.events[i].id.clone()))
                            .collect::<Vec<_>>(),
                    )
                })
                .collect::<BTreeMap<_, _>>()
        };
        assert_eq!(flatten(&store.by_author), naive_author);
        assert_eq!(flatten(&store.by_owner), naive_owner);
    }

    #[test]
    fn categorize_follows_priority_order() {
        let table = ReasonTable::default();
        assert_eq!(
            table.categorize("Personal attacks or harassment"),
            ReasonCategory::PersonalAttack
        );
        assert_eq!(
            table.categorize("edit warring: 3RR violation"),
            ReasonCategory::EditWarring
        );
        assert_eq!(table.categorize(""), ReasonCategory::Unknown);
        assert_eq!(table.categorize("harassing other users"), ReasonCategory::Harassment);
        assert_eq!(
            table.categorize("Vandalism after final warning"),
            ReasonCategory::DisruptiveEditing
        );
        assert_eq!(table.categorize("open proxy"), ReasonCategory::Protection);
    }

    #[test]
    fn custom_reason_table_loads() {
        let table =
            ReasonTable::from_json(r#"{"edit_warring":["rollback"],"protection":["office"]}"#)
                .unwrap();
        assert_eq!(table.categorize("mass rollback"), ReasonCategory::EditWarring);
        assert_eq!(table.categorize("office action"), ReasonCategory::Protection);
        assert_eq!(table.categorize("edit warring"), ReasonCategory::Unknown);
        assert!(ReasonTable::from_json(r#"{"bogus":[]}"#).is_err());
    }

    #[test]
    fn truncation_by_unblock() {
        let (spans, _) = merge(&[block(0, 7 * DAY), unblock(2 * DAY)]);
        assert_eq!(spans.len(), 1);
        let s = &spans[0];
        assert_eq!(s.start, 0);
        assert_eq!(s.effective_end, SpanEnd::Finite(2 * DAY));
        assert_eq!(s.original_end, SpanEnd::Finite(7 * DAY));
        assert!(s.reduced_early);
        assert_eq!(s.reduction_s, Some(5 * DAY));
    }

    #[test]
    fn overlapping_blocks_merge_to_union() {
        let (spans, _) = merge(&[block(0, 3 * DAY), block(2 * DAY, 5 * DAY)]);
        assert_eq!(spans.len(), 1);
        assert_eq!(spans[0].start, 0);
        assert_eq!(spans[0].effective_end, SpanEnd::Finite(7 * DAY));
        assert!(!spans[0].reduced_early);
        assert_eq!(spans[0].reduction_s, Some(0));
    }

    #[test]
    fn adjacent_block_extends_while_adjacent_unblock_is_ignored() {
        // re-block exactly at the effective end continues the span
        let (spans, _) = merge(&[block(0, DAY), block(DAY, DAY)]);
        assert_eq!(spans.len(), 1);
        assert_eq!(spans[0].effective_end, SpanEnd::Finite(2 * DAY));
        // unblock exactly at the effective end has nothing to cut
        let (spans, warnings) = merge(&[block(0, DAY), unblock(DAY)]);
        assert_eq!(spans.len(), 1);
        assert!(!spans[0].reduced_early);
        assert_eq!(warnings[0].kind, MergeWarningKind::UnblockWithoutActiveBlock);
    }

    #[test]
    fn separate_blocks_stay_separate() {
        let (spans, _) = merge(&[block(0, DAY), block(5 * DAY, DAY)]);
        assert_eq!(spans.len(), 2);
        assert_eq!(spans[0].effective_end, SpanEnd::Finite(DAY));
        assert_eq!(spans[1].start, 5 * DAY);
    }

    #[test]
    fn modify_replaces_the_end() {
        // shortening: a 10-day block cut to end at day 3
        let (spans, _) = merge(&[block(0, 10 * DAY), modify(DAY, 2 * DAY)]);
        assert_eq!(spans[0].effective_end, SpanEnd::Finite(3 * DAY));
        assert_eq!(spans[0].original_end, SpanEnd::Finite(3 * DAY));
        assert!(!spans[0].reduced_early);
        // orphan modify opens a span by itself
        let (spans, _) = merge(&[modify(10, 100)]);
        assert_eq!(spans.len(), 1);
        assert_eq!(spans[0].start, 10);
        assert_eq!(spans[0].effective_end, SpanEnd::Finite(110));
    }

    #[test]
    fn reblock_after_unblock_cancels_reduction() {
        // unblock cuts to day 4, then a block at day 4 re-imposes day 10
        let (spans, _) = merge(&[block(0, 10 * DAY), unblock(4 * DAY), block(4 * DAY, 6 * DAY)]);
        assert_eq!(spans.len(), 1);
        assert_eq!(spans[0].effective_end, SpanEnd::Finite(10 * DAY));
        assert!(!spans[0].reduced_early);
        assert_eq!(spans[0].reduction_s, Some(0));
    }

    #[test]
    fn indefinite_handling() {
        let indef = BlockLogEntry {
            duration: Some(BlockDuration::Indefinite),
            ..block(0, 1)
        };
        // never lifted: indefinite through and through
        let (spans, _) = merge(std::slice::from_ref(&indef));
        assert_eq!(spans[0].effective_end, SpanEnd::Indefinite);
        assert!(!spans[0].reduced_early);
        assert_eq!(spans[0].reduction_s, Some(0));
        // lifted early: unbounded reduction
        let (spans, _) = merge(&[indef.clone(), unblock(3 * DAY)]);
        assert_eq!(spans[0].effective_end, SpanEnd::Finite(3 * DAY));
        assert!(spans[0].reduced_early);
        assert_eq!(spans[0].reduction_s, None);
        // a finite block during an indefinite span disappears into it
        let (spans, _) = merge(&[indef, block(DAY, DAY)]);
        assert_eq!(spans.len(), 1);
        assert_eq!(spans[0].effective_end, SpanEnd::Indefinite);
    }

    #[test]
    fn unblock_at_start_drops_empty_span() {
        let (spans, warnings) = merge(&[block(100, DAY), unblock(100)]);
        assert!(spans.is_empty());
        assert_eq!(warnings[0].kind, MergeWarningKind::EmptySpanDropped);
    }

    #[test]
    fn span_reason_comes_from_first_entry() {
        let mut second = block(DAY, DAY);
        second.reason_text = "harassing people".into();
        let (spans, _) = merge(&[block(0, 2 * DAY), second]);
        assert_eq!(spans.len(), 1);
        assert_eq!(spans[0].reason_category, ReasonCategory::EditWarring);
        assert_eq!(spans[0].entries.len(), 2);
    }

    #[test]
    fn grouping_is_per_target_and_sorted() {
        let mut entries = Vec::new();
        for (t, target) in [(50, "b"), (0, "a"), (100, "a")] {
            let mut e = block(t, 10);
            e.target = target.into();
            entries.push(e);
        }
        let (by_user, _) = group_and_merge(entries, &ReasonTable::default());
        assert_eq!(by_user.keys().cloned().collect::<Vec<_>>(), vec!["a", "b"]);
        assert_eq!(by_user["a"].len(), 2);
        assert_eq!(by_user["a"][0].start, 0);
        assert_eq!(by_user["a"][1].start, 100);
    }

    #[test]
    fn merged_spans_are_disjoint_sorted_and_consistent() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..300 {
            let mut entries: Vec<BlockLogEntry> = (0..rng.random_range(1..15))
                .map(|_| {
                    let ts = rng.random_range(0..5_000);
                    match rng.random_range(0..10) {
                        0..=5 => block(ts, rng.random_range(1..800)),
                        6..=7 => modify(ts, rng.random_range(1..800)),
                        _ => unblock(ts),
                    }
                })
                .collect();
            canonical_entry_order(&mut entries);
            let (spans, _) = merge(&entries);
            for s in &spans {
                assert!(SpanEnd::Finite(s.start) < s.effective_end);
                assert!(s.effective_end <= s.original_end);
                match s.reduction_s {
                    Some(r) => assert_eq!(s.reduced_early, r > 0),
                    None => assert!(s.reduced_early),
                }
            }
            for w in spans.windows(2) {
                let prev_end = w[0].effective_end.finite().expect("non-final spans are finite");
                assert!(prev_end <= w[1].start);
            }
        }
    }
}
