//! Shared record types: raw block-log entries, merged block spans,
//! talk-page events, per-user timelines, and the knobs that control
//! cohort selection.
//!
//! All instants are integer seconds relative to the dataset epoch (the
//! community's founding instant). Day-valued quantities used for
//! matching and configuration are plain `f64` fractions of a day.

use serde::{Deserialize, Serialize};

pub type Timestamp = i64;
pub type UserId = String;

pub const SECONDS_PER_DAY: i64 = 86_400;

/// Days since the dataset epoch, as a fraction.
pub fn ts_to_days(ts: Timestamp) -> f64 {
    ts as f64 / SECONDS_PER_DAY as f64
}

/// Day count converted to seconds, rounded to the nearest second.
pub fn days_to_seconds(days: f64) -> i64 {
    (days * SECONDS_PER_DAY as f64).round() as i64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockAction {
    Block,
    Unblock,
    Modify,
}

/// Duration attached to a Block or Modify entry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BlockDuration {
    Seconds(i64),
    Indefinite,
}

impl BlockDuration {
    pub fn end_from(self, start: Timestamp) -> SpanEnd {
        match self {
            BlockDuration::Seconds(s) => SpanEnd::Finite(start + s),
            BlockDuration::Indefinite => SpanEnd::Indefinite,
        }
    }
}

/// Right endpoint of a block interval. `Finite(t)` is exclusive;
/// `Indefinite` compares greater than every finite end.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SpanEnd {
    Finite(Timestamp),
    Indefinite,
}

impl SpanEnd {
    pub fn is_finite(self) -> bool {
        matches!(self, SpanEnd::Finite(_))
    }

    pub fn finite(self) -> Option<Timestamp> {
        match self {
            SpanEnd::Finite(t) => Some(t),
            SpanEnd::Indefinite => None,
        }
    }
}

/// One line of the block log.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockLogEntry {
    pub ts: Timestamp,
    pub admin: UserId,
    pub target: UserId,
    pub action: BlockAction,
    /// `None` exactly for Unblock entries.
    pub duration: Option<BlockDuration>,
    pub reason_text: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ReasonCategory {
    PersonalAttack,
    Harassment,
    EditWarring,
    DisruptiveEditing,
    OtherDisruption,
    Protection,
    Unknown,
}

impl ReasonCategory {
    /// The four categories that gate cohort membership.
    pub fn is_disruption(self) -> bool {
        matches!(
            self,
            ReasonCategory::PersonalAttack
                | ReasonCategory::Harassment
                | ReasonCategory::EditWarring
                | ReasonCategory::DisruptiveEditing
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            ReasonCategory::PersonalAttack => "personal_attack",
            ReasonCategory::Harassment => "harassment",
            ReasonCategory::EditWarring => "edit_warring",
            ReasonCategory::DisruptiveEditing => "disruptive_editing",
            ReasonCategory::OtherDisruption => "other_disruption",
            ReasonCategory::Protection => "protection",
            ReasonCategory::Unknown => "unknown",
        }
    }

    pub fn from_name(name: &str) -> Option<ReasonCategory> {
        Some(match name {
            "personal_attack" => ReasonCategory::PersonalAttack,
            "harassment" => ReasonCategory::Harassment,
            "edit_warring" => ReasonCategory::EditWarring,
            "disruptive_editing" => ReasonCategory::DisruptiveEditing,
            "other_disruption" => ReasonCategory::OtherDisruption,
            "protection" => ReasonCategory::Protection,
            "unknown" => ReasonCategory::Unknown,
            _ => return None,
        })
    }
}

impl std::fmt::Display for ReasonCategory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// An effective contiguous blocked interval for one user, after merging
/// overlapping or adjacent entries and applying early unblocks.
///
/// `original_end` is the end as last imposed (latest Block/Modify);
/// `effective_end` accounts for truncation by Unblock. Invariants:
/// `start < effective_end`, `effective_end <= original_end`, and for a
/// user the spans are pairwise disjoint and sorted by start.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockSpan {
    pub target: UserId,
    pub start: Timestamp,
    pub original_end: SpanEnd,
    pub effective_end: SpanEnd,
    pub reduced_early: bool,
    /// Seconds cut from the imposed duration. `None` when the imposed
    /// end was indefinite but the block was lifted early, which leaves
    /// the reduction unbounded.
    pub reduction_s: Option<i64>,
    pub reason_category: ReasonCategory,
    /// Constituent log entries in canonical order.
    pub entries: Vec<BlockLogEntry>,
}

impl BlockSpan {
    pub fn is_temporary(&self) -> bool {
        self.original_end.is_finite()
    }

    pub fn original_duration_s(&self) -> Option<i64> {
        self.original_end.finite().map(|e| e - self.start)
    }

    pub fn effective_duration_s(&self) -> Option<i64> {
        self.effective_end.finite().map(|e| e - self.start)
    }

    /// True when no entry ever changed the imposed duration: exactly
    /// one Block entry and nothing else.
    pub fn duration_unchanged(&self) -> bool {
        self.entries.len() == 1 && self.entries[0].action == BlockAction::Block
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PageKind {
    #[serde(rename = "user")]
    UserTalk,
    #[serde(rename = "article")]
    ArticleTalk,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CommentAction {
    Add,
    Edit,
    Delete,
}

/// One talk-page action. `owner` is the talk page's subject: a user id
/// for user talk, an article id otherwise. `text` is empty only for
/// Delete.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CommentEvent {
    pub id: String,
    pub author: UserId,
    pub owner: String,
    pub page_kind: PageKind,
    pub ts: Timestamp,
    pub action: CommentAction,
    pub text: String,
}

/// Everything known about one user, assembled from both input streams.
/// `authored` holds every comment action by the user (any page kind);
/// `received` holds actions by others on the user's own talk page.
/// Both are sorted by (ts, id). A timeline exists only for users with
/// at least one authored comment.
#[derive(Clone, Debug)]
pub struct UserTimeline {
    pub user: UserId,
    pub first_activity: Timestamp,
    pub last_activity: Timestamp,
    pub authored: Vec<CommentEvent>,
    pub received: Vec<CommentEvent>,
    pub spans: Vec<BlockSpan>,
}

/// Cohort selection and labeling windows. Months are fixed 30-day
/// windows; "six months" is 180 days and "five years" is 1826 days,
/// keeping every label calendar-independent.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CohortConfig {
    pub horizon_days: f64,
    pub short_window_days: f64,
    pub min_tenure_days: f64,
    pub min_comments: usize,
    pub community_burnin_days: f64,
    pub dataset_end: Timestamp,
}

impl CohortConfig {
    pub fn new(dataset_end: Timestamp) -> CohortConfig {
        CohortConfig {
            horizon_days: 180.0,
            short_window_days: 7.0,
            min_tenure_days: 30.0,
            min_comments: 8,
            community_burnin_days: 1826.0,
            dataset_end,
        }
    }

    pub fn horizon_s(&self) -> f64 {
        self.horizon_days * SECONDS_PER_DAY as f64
    }

    pub fn short_window_s(&self) -> f64 {
        self.short_window_days * SECONDS_PER_DAY as f64
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.short_window_days > 0.0 && self.horizon_days > 0.0) {
            return Err("horizon and short window must be positive".into());
        }
        if self.short_window_days >= self.horizon_days {
            return Err("short window must be smaller than the horizon".into());
        }
        if self.min_tenure_days <= 0.0 || self.community_burnin_days < 0.0 {
            return Err("tenure and burn-in must be non-negative".into());
        }
        Ok(())
    }
}

/// Per-user outcome flags over the first block.
///
/// Invariants: `recidivist_short` implies `recidivist_long`;
/// `departed_during_block` implies `departed_within_horizon`;
/// `reformed` is exactly `!recidivist_long`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryLabel {
    pub user: UserId,
    pub departed_during_block: bool,
    pub departed_within_horizon: bool,
    pub recidivist_short: bool,
    pub recidivist_long: bool,
    pub reformed: bool,
    /// Days from first block start to the second block start, for any
    /// second block at all (even past the horizon).
    pub time_to_reoffense_days: Option<f64>,
    pub departure_time: Timestamp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PairKind {
    DepartureBlocked,
    DepartureControl,
    RecidShort,
    RecidLong,
    RecidControl,
}

impl PairKind {
    pub fn name(self) -> &'static str {
        match self {
            PairKind::DepartureBlocked => "departure_blocked",
            PairKind::DepartureControl => "departure_control",
            PairKind::RecidShort => "recid_short",
            PairKind::RecidLong => "recid_long",
            PairKind::RecidControl => "recid_control",
        }
    }
}

impl std::fmt::Display for PairKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Two users with opposite outcomes bound by one matching statistic:
/// days for date matching, an action count for activity matching.
/// `left` carries the positive outcome (departer, recidivist, or
/// first offender), `right` the opposite one.
#[derive(Clone, Debug, PartialEq)]
pub struct MatchedPair {
    pub kind: PairKind,
    pub left: UserId,
    pub right: UserId,
    pub match_stat: f64,
}

/// Pre-block engagement summary at a cutoff instant. Rates are per day
/// of tenure; spreads are unique-counterpart ratios and undefined
/// (`None`) when the corresponding count is zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EngagementFeatures {
    pub received_per_day: f64,
    pub contributed_per_day: f64,
    pub received_raw: u64,
    pub contributed_raw: u64,
    pub received_spread: Option<f64>,
    pub contributed_spread: Option<f64>,
    pub community_age_days: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DurationClass {
    Short,
    Long,
}

impl DurationClass {
    pub fn name(self) -> &'static str {
        match self {
            DurationClass::Short => "short",
            DurationClass::Long => "long",
        }
    }
}

/// Severity view of one finite block span. The class is decided by the
/// duration as imposed, not the effective one: a week-long block lifted
/// after an hour still counts as Long.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlockContext {
    pub duration_class: DurationClass,
    pub effective_duration_s: i64,
    pub reason_category: ReasonCategory,
    pub unblocked_early: bool,
    pub reduction_s: i64,
}

impl BlockContext {
    pub fn original_duration_s(&self) -> i64 {
        self.effective_duration_s + self.reduction_s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CueKind {
    Apology,
    DirectQuestion,
    Unfairness,
}

impl CueKind {
    pub fn name(self) -> &'static str {
        match self {
            CueKind::Apology => "apology",
            CueKind::DirectQuestion => "direct_question",
            CueKind::Unfairness => "unfairness",
        }
    }
}

impl std::fmt::Display for CueKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Cue detection outcome over a user's in-block messages. Every true
/// flag is witnessed by at least one snippet, quoted verbatim from a
/// message.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CueFlags {
    pub apology: bool,
    pub direct_question: bool,
    pub unfairness: bool,
    pub n_messages: usize,
    pub matched_snippets: Vec<(CueKind, String)>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn span_end_ordering() {
        assert!(SpanEnd::Finite(10) < SpanEnd::Finite(11));
        assert!(SpanEnd::Finite(i64::MAX) < SpanEnd::Indefinite);
        assert_eq!(SpanEnd::Finite(5).finite(), Some(5));
        assert_eq!(SpanEnd::Indefinite.finite(), None);
    }

    #[test]
    fn day_conversions_round_trip() {
        assert_eq!(days_to_seconds(1.0), 86_400);
        assert_eq!(ts_to_days(43_200), 0.5);
        assert_eq!(days_to_seconds(ts_to_days(1_234_567)), 1_234_567);
    }

    #[test]
    fn disruption_subset() {
        assert!(ReasonCategory::PersonalAttack.is_disruption());
        assert!(ReasonCategory::Harassment.is_disruption());
        assert!(ReasonCategory::EditWarring.is_disruption());
        assert!(ReasonCategory::DisruptiveEditing.is_disruption());
        assert!(!ReasonCategory::Protection.is_disruption());
        assert!(!ReasonCategory::Unknown.is_disruption());
        assert!(!ReasonCategory::OtherDisruption.is_disruption());
    }

    #[test]
    fn reason_names_round_trip() {
        for cat in [
            ReasonCategory::PersonalAttack,
            ReasonCategory::Harassment,
            ReasonCategory::EditWarring,
            ReasonCategory::DisruptiveEditing,
            ReasonCategory::OtherDisruption,
            ReasonCategory::Protection,
            ReasonCategory::Unknown,
        ] {
            assert_eq!(ReasonCategory::from_name(cat.name()), Some(cat));
        }
        assert_eq!(ReasonCategory::from_name("nope"), None);
    }

    #[test]
    fn config_validation() {
        let mut cfg = CohortConfig::new(1_000_000);
        assert!(cfg.validate().is_ok());
        cfg.short_window_days = 200.0;
        assert!(cfg.validate().is_err());
    }
}
