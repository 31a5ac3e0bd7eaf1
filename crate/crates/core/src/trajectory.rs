//! Timeline assembly, cohort selection, outcome labels, and hazard
//! curves.
//!
//! All windows are measured in seconds from fixed anchors: tenure and
//! activity months from a user's first authored comment, outcome
//! windows from the start of the first block. A "month" is exactly 30
//! days. Departure is the timestamp of the last comment the user ever
//! authored anywhere, any action type.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::TrajectoryError;
use crate::ingest::CommentStore;
use crate::stats::wilson_ci;
use crate::types::{
    BlockSpan, CohortConfig, CommentAction, PageKind, SpanEnd, Timestamp, TrajectoryLabel,
    UserId, UserTimeline, SECONDS_PER_DAY,
};

pub const MONTH_S: i64 = 30 * SECONDS_PER_DAY;

/// Assemble per-user timelines. A timeline exists only for users who
/// authored at least one comment; their block spans (possibly none)
/// are attached. Users who appear only as block targets get none.
pub fn build_timelines(
    store: &CommentStore,
    spans_by_user: &BTreeMap<UserId, Vec<BlockSpan>>,
) -> BTreeMap<UserId, UserTimeline> {
    let users: Vec<&UserId> = store.by_author.keys().collect();
    let timelines: Vec<UserTimeline> = users
        .par_iter()
        .map(|user| {
            let authored: Vec<_> = store.by_author[*user]
                .iter()
                .map(|&i| store.events[i].clone())
                .collect();
            let received: Vec<_> = store
                .by_owner
                .get(*user)
                .map(|idx| {
                    idx.iter()
                        .map(|&i| &store.events[i])
                        .filter(|e| e.page_kind == PageKind::UserTalk && e.author != **user)
                        .cloned()
                        .collect()
                })
                .unwrap_or_default();
            UserTimeline {
                user: (*user).clone(),
                first_activity: authored.first().expect("non-empty author group").ts,
                last_activity: authored.last().expect("non-empty author group").ts,
                authored,
                received,
                spans: spans_by_user.get(*user).cloned().unwrap_or_default(),
            }
        })
        .collect();
    timelines.into_iter().map(|t| (t.user.clone(), t)).collect()
}

/// Progressive funnel counts for cohort selection; each count applies
/// one more filter on top of the previous one.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CohortFunnel {
    /// Users with a timeline and at least one block span.
    pub blocked_users: usize,
    /// ... whose spans include a disruption-subset reason.
    pub any_disruption: usize,
    /// ... whose FIRST span has a disruption-subset reason.
    pub first_disruption: usize,
    /// ... whose first span was imposed with a finite duration.
    pub first_finite: usize,
    /// ... with enough pre-block comments.
    pub enough_comments: usize,
    /// ... with enough tenure before the first block.
    pub enough_tenure: usize,
    /// ... first-blocked after the community burn-in period.
    pub past_burnin: usize,
    /// ... first-blocked early enough for the horizon to be observed.
    pub horizon_observable: usize,
}

#[derive(Clone, Debug, Default)]
pub struct CohortSelection {
    /// Members in user-id order.
    pub members: Vec<UserId>,
    pub funnel: CohortFunnel,
}

/// Comments authored strictly before `cutoff` with the add action, any
/// page kind. This is the activity measure used by cohort filters.
pub fn pre_cutoff_comment_count(tl: &UserTimeline, cutoff: Timestamp) -> usize {
    tl.authored
        .iter()
        .filter(|e| e.ts < cutoff && e.action == CommentAction::Add)
        .count()
}

pub fn select_cohort(
    timelines: &BTreeMap<UserId, UserTimeline>,
    cfg: &CohortConfig,
) -> CohortSelection {
    let mut funnel = CohortFunnel::default();
    let mut members = Vec::new();
    for (user, tl) in timelines {
        let Some(first) = tl.spans.first() else { continue };
        funnel.blocked_users += 1;
        if !tl.spans.iter().any(|s| s.reason_category.is_disruption()) {
            continue;
        }
        funnel.any_disruption += 1;
        if !first.reason_category.is_disruption() {
            continue;
        }
        funnel.first_disruption += 1;
        if !first.original_end.is_finite() {
            continue;
        }
        funnel.first_finite += 1;
        if pre_cutoff_comment_count(tl, first.start) < cfg.min_comments {
            continue;
        }
        funnel.enough_comments += 1;
        let tenure_s = (first.start - tl.first_activity) as f64;
        if tenure_s < cfg.min_tenure_days * SECONDS_PER_DAY as f64 {
            continue;
        }
        funnel.enough_tenure += 1;
        if (first.start as f64) < cfg.community_burnin_days * SECONDS_PER_DAY as f64 {
            continue;
        }
        funnel.past_burnin += 1;
        if ((cfg.dataset_end - first.start) as f64) < cfg.horizon_s() {
            continue;
        }
        funnel.horizon_observable += 1;
        members.push(user.clone());
    }
    CohortSelection { members, funnel }
}

/// Label one user's trajectory around their first block.
pub fn label_user(tl: &UserTimeline, cfg: &CohortConfig) -> Result<TrajectoryLabel, TrajectoryError> {
    if tl.authored.is_empty() {
        return Err(TrajectoryError::NoAuthoredComments(tl.user.clone()));
    }
    let first = tl
        .spans
        .first()
        .ok_or_else(|| TrajectoryError::NoBlockSpan(tl.user.clone()))?;
    if !first.original_end.is_finite() {
        return Err(TrajectoryError::IndefiniteFirstSpan(tl.user.clone()));
    }
    let departure_time = tl.last_activity;
    let within_horizon = (departure_time - first.start) as f64 <= cfg.horizon_s();
    // "during the block" additionally requires the silence to begin
    // while the block is still in force
    let departed_during_block =
        within_horizon && SpanEnd::Finite(departure_time) < first.effective_end;
    let second_start = tl.spans.get(1).map(|s| s.start);
    let time_to_reoffense_days =
        second_start.map(|t2| (t2 - first.start) as f64 / SECONDS_PER_DAY as f64);
    let recidivist_long = second_start
        .map(|t2| (t2 - first.start) as f64 <= cfg.horizon_s())
        .unwrap_or(false);
    let recidivist_short = second_start
        .map(|t2| (t2 - first.start) as f64 <= cfg.short_window_s())
        .unwrap_or(false);
    Ok(TrajectoryLabel {
        user: tl.user.clone(),
        departed_during_block,
        departed_within_horizon: within_horizon,
        recidivist_short,
        recidivist_long,
        reformed: !recidivist_long,
        time_to_reoffense_days,
        departure_time,
    })
}

/// Labels for every cohort member, in cohort (user-id) order.
pub fn labels_for_cohort(
    timelines: &BTreeMap<UserId, UserTimeline>,
    cohort: &[UserId],
    cfg: &CohortConfig,
) -> Result<Vec<TrajectoryLabel>, TrajectoryError> {
    cohort
        .par_iter()
        .map(|user| label_user(&timelines[user], cfg))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HazardKind {
    /// Event: the user's last-ever comment falls in the month.
    Departure,
    /// Event: a (further) block span starts in the month.
    Block,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum HazardCondition {
    /// No block span started before the month began.
    NeverBlockedBefore,
    /// Some block span started in an earlier month.
    BlockedPrior,
    /// A block span starts within this very month (overlay group; its
    /// members also sit in one of the two groups above).
    BlockedSameMonth,
}

impl HazardCondition {
    pub fn name(self) -> &'static str {
        match self {
            HazardCondition::NeverBlockedBefore => "never_blocked_before",
            HazardCondition::BlockedPrior => "blocked_prior",
            HazardCondition::BlockedSameMonth => "blocked_same_month",
        }
    }
}

pub const HAZARD_CONDITIONS: [HazardCondition; 3] = [
    HazardCondition::NeverBlockedBefore,
    HazardCondition::BlockedPrior,
    HazardCondition::BlockedSameMonth,
];

#[derive(Clone, Debug, PartialEq)]
pub struct HazardPoint {
    pub month: u32,
    pub condition: HazardCondition,
    /// None when nobody was observable in the bucket.
    pub p: Option<f64>,
    pub ci: Option<(f64, f64)>,
    pub n: u64,
}

/// Month index of `ts` on a user's own activity clock.
fn activity_month(tl: &UserTimeline, ts: Timestamp) -> i64 {
    (ts - tl.first_activity).div_euclid(MONTH_S)
}

/// Per-month conditional event rates over every user with a timeline.
///
/// A user contributes to month m's denominator only while still alive
/// (their final comment lies in month m or later) and only when the
/// whole bucket is observable before the record ends; departure
/// buckets additionally need a full horizon after the month to confirm
/// that a silence is final. Rates come with Wilson 95% intervals.
pub fn hazard_curves(
    timelines: &BTreeMap<UserId, UserTimeline>,
    kind: HazardKind,
    months: u32,
    cfg: &CohortConfig,
) -> Vec<HazardPoint> {
    struct UserView {
        departure_month: i64,
        block_months: Vec<i64>,
        observable_until: f64,
    }
    let views: Vec<UserView> = timelines
        .values()
        .map(|tl| UserView {
            departure_month: activity_month(tl, tl.last_activity),
            block_months: tl.spans.iter().map(|s| activity_month(tl, s.start)).collect(),
            observable_until: (cfg.dataset_end - tl.first_activity) as f64,
        })
        .collect();
    let horizon_slack = match kind {
        HazardKind::Departure => cfg.horizon_s(),
        HazardKind::Block => 0.0,
    };
    let mut points = Vec::with_capacity(months as usize * 3);
    for month in 0..months {
        let m = month as i64;
        for condition in HAZARD_CONDITIONS {
            let mut n = 0u64;
            let mut events = 0u64;
            for v in &views {
                if v.departure_month < m {
                    continue;
                }
                if ((m + 1) * MONTH_S) as f64 + horizon_slack > v.observable_until {
                    continue;
                }
                let blocked_before = v.block_months.iter().any(|&b| b < m);
                let blocked_same = v.block_months.iter().filter(|&&b| b == m).count();
                let in_group = match condition {
                    HazardCondition::NeverBlockedBefore => !blocked_before,
                    HazardCondition::BlockedPrior => blocked_before,
                    HazardCondition::BlockedSameMonth => blocked_same > 0,
                };
                if !in_group {
                    continue;
                }
                n += 1;
                let is_event = match kind {
                    HazardKind::Departure => v.departure_month == m,
                    // for the same-month group the conditioning block
                    // itself is not an event; a further one is
                    HazardKind::Block => match condition {
                        HazardCondition::BlockedSameMonth => blocked_same >= 2,
                        _ => blocked_same >= 1,
                    },
                };
                if is_event {
                    events += 1;
                }
            }
            let (p, ci) = if n == 0 {
                (None, None)
            } else {
                let ci = wilson_ci(events, n, 0.95).expect("n > 0");
                (Some(events as f64 / n as f64), Some(ci))
            };
            points.push(HazardPoint {
                month,
                condition,
                p,
                ci,
                n,
            });
        }
    }
    points
}
