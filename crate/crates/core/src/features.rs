//! Engagement features over the window before a cutoff (normally the
//! first block), plus the severity view of a block span.
//!
//! Contributed activity means posts the user added on other people's
//! talk pages; received activity means posts others added on the
//! user's own talk page. Rates are per day of tenure up to the cutoff,
//! and spreads measure how many distinct counterparts the activity
//! touched relative to its volume.

use crate::error::FeatureError;
use crate::types::{
    BlockContext, BlockSpan, CommentAction, DurationClass, EngagementFeatures, PageKind,
    Timestamp, UserTimeline, SECONDS_PER_DAY,
};

/// One day, the observed median imposed duration: the Short/Long split.
pub const SEVERITY_THRESHOLD_S: i64 = SECONDS_PER_DAY;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FeatureOptions {
    /// Count edit actions alongside adds. Off by default: an edit
    /// reworks an existing post rather than engaging someone new.
    pub count_edits: bool,
}

impl FeatureOptions {
    fn counts(self, action: CommentAction) -> bool {
        match action {
            CommentAction::Add => true,
            CommentAction::Edit => self.count_edits,
            CommentAction::Delete => false,
        }
    }
}

/// Engagement profile of one user strictly before `cutoff`.
pub fn engagement_features(
    tl: &UserTimeline,
    cutoff: Timestamp,
    opts: FeatureOptions,
) -> Result<EngagementFeatures, FeatureError> {
    if cutoff <= tl.first_activity {
        return Err(FeatureError::CutoffBeforeFirstActivity {
            cutoff,
            first_activity: tl.first_activity,
        });
    }
    let tenure_days = (cutoff - tl.first_activity) as f64 / SECONDS_PER_DAY as f64;

    let contributed: Vec<&str> = tl
        .authored
        .iter()
        .filter(|e| {
            e.ts < cutoff
                && opts.counts(e.action)
                && e.page_kind == PageKind::UserTalk
                && e.owner != tl.user
        })
        .map(|e| e.owner.as_str())
        .collect();
    let received: Vec<&str> = tl
        .received
        .iter()
        .filter(|e| e.ts < cutoff && opts.counts(e.action))
        .map(|e| e.author.as_str())
        .collect();

    let spread = |counterparts: &[&str]| {
        if counterparts.is_empty() {
            return None;
        }
        let unique: std::collections::BTreeSet<&str> = counterparts.iter().copied().collect();
        Some(unique.len() as f64 / counterparts.len() as f64)
    };

    Ok(EngagementFeatures {
        received_per_day: received.len() as f64 / tenure_days,
        contributed_per_day: contributed.len() as f64 / tenure_days,
        received_raw: received.len() as u64,
        contributed_raw: contributed.len() as u64,
        received_spread: spread(&received),
        contributed_spread: spread(&contributed),
        community_age_days: tl.first_activity as f64 / SECONDS_PER_DAY as f64,
    })
}

/// Severity view of a finite span. The Short/Long class reflects the
/// duration as imposed, so an early unblock cannot reclassify a block.
pub fn block_context(span: &BlockSpan) -> Result<BlockContext, FeatureError> {
    let original = span
        .original_duration_s()
        .ok_or(FeatureError::IndefiniteSpan)?;
    let effective = span
        .effective_duration_s()
        .ok_or(FeatureError::IndefiniteSpan)?;
    Ok(BlockContext {
        duration_class: if original > SEVERITY_THRESHOLD_S {
            DurationClass::Long
        } else {
            DurationClass::Short
        },
        effective_duration_s: effective,
        reason_category: span.reason_category,
        unblocked_early: span.reduced_early,
        reduction_s: original - effective,
    })
}
