//! Matched-pair construction.
//!
//! Every matcher is greedy without replacement over deterministic
//! orders, so a given input always yields the same pairs and a prefix
//! of the left pool is matched exactly as it would be alone. Date
//! matching picks the nearest candidate inside a tolerance window;
//! activity matching picks the tightest candidate at or above the
//! left's count. All ties break toward the smaller user id.

use std::collections::{BTreeMap, BTreeSet};

use crate::types::{
    CohortConfig, MatchedPair, PairKind, Timestamp, TrajectoryLabel, UserId, UserTimeline,
    SECONDS_PER_DAY,
};

/// Date-window tolerance. Relative scales with the block date itself
/// (an early-record block tolerates less drift in seconds than a late
/// one); absolute is a flat day count.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Tolerance {
    Relative(f64),
    AbsoluteDays(f64),
}

impl Default for Tolerance {
    fn default() -> Tolerance {
        Tolerance::Relative(0.01)
    }
}

impl Tolerance {
    fn window_s(self, anchor_s: Timestamp) -> f64 {
        match self {
            Tolerance::Relative(r) => r * anchor_s as f64,
            Tolerance::AbsoluteDays(d) => d * SECONDS_PER_DAY as f64,
        }
    }
}

/// Pairs produced by one matcher plus the lefts it could not place.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MatchOutcome {
    pub pairs: Vec<MatchedPair>,
    pub unmatched_lefts: Vec<UserId>,
}

/// One side of a date match: a user anchored to a timestamp.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatedUser {
    pub user: UserId,
    pub ts: Timestamp,
}

/// One side of an activity match: a user with an action count.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CountedUser {
    pub user: UserId,
    pub count: u64,
}

/// Greedy nearest-date matching. Lefts are processed in the given
/// order; each takes the unused candidate closest to its anchor within
/// the tolerance window (ties toward the smaller user id).
pub fn match_by_date(
    lefts: &[DatedUser],
    candidates: &[DatedUser],
    tol: Tolerance,
    kind: PairKind,
) -> MatchOutcome {
    let mut pool: BTreeMap<Timestamp, BTreeSet<&UserId>> = BTreeMap::new();
    for c in candidates {
        pool.entry(c.ts).or_default().insert(&c.user);
    }
    let mut out = MatchOutcome::default();
    for left in lefts {
        let window = tol.window_s(left.ts);
        let lo = left.ts - window.floor() as i64;
        let hi = left.ts + window.floor() as i64;
        let best = pool
            .range(lo..=hi)
            .flat_map(|(&ts, users)| {
                let gap = (ts - left.ts).abs();
                users.iter().map(move |&u| (gap, u.clone(), ts))
            })
            .min_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
        match best {
            Some((gap, user, ts)) => {
                let bucket = pool.get_mut(&ts).expect("candidate bucket exists");
                bucket.retain(|u| **u != user);
                if bucket.is_empty() {
                    pool.remove(&ts);
                }
                out.pairs.push(MatchedPair {
                    kind,
                    left: left.user.clone(),
                    right: user,
                    match_stat: gap as f64 / SECONDS_PER_DAY as f64,
                });
            }
            None => out.unmatched_lefts.push(left.user.clone()),
        }
    }
    out
}

/// Greedy tightest-count matching: each left takes the unused
/// candidate with the smallest count at or above its own.
pub fn match_by_count(
    lefts: &[CountedUser],
    candidates: &[CountedUser],
    kind: PairKind,
) -> MatchOutcome {
    let mut pool: BTreeSet<(u64, &UserId)> =
        candidates.iter().map(|c| (c.count, &c.user)).collect();
    let mut out = MatchOutcome::default();
    let empty_id = UserId::new();
    for left in lefts {
        // the copied tuple borrows `candidates`, not the pool itself
        let found = pool.range((left.count, &empty_id)..).next().copied();
        match found {
            Some((count, user)) => {
                pool.remove(&(count, user));
                out.pairs.push(MatchedPair {
                    kind,
                    left: left.user.clone(),
                    right: user.clone(),
                    match_stat: (count - left.count) as f64,
                });
            }
            None => out.unmatched_lefts.push(left.user.clone()),
        }
    }
    out
}

/// Authored actions (any type, any page) with start < ts <= end.
fn authored_between(tl: &UserTimeline, start: Timestamp, end: Timestamp) -> u64 {
    tl.authored.iter().filter(|e| e.ts > start && e.ts <= end).count() as u64
}

/// Authored actions strictly before the cutoff.
fn authored_before(tl: &UserTimeline, cutoff: Timestamp) -> u64 {
    tl.authored.iter().filter(|e| e.ts < cutoff).count() as u64
}

struct CohortView<'a> {
    tl: &'a UserTimeline,
    label: &'a TrajectoryLabel,
}

/// All matched pairs plus per-kind unmatched-left counts, kinds in
/// their declaration order.
#[derive(Clone, Debug, Default)]
pub struct MatchReport {
    pub pairs: Vec<MatchedPair>,
    pub unmatched: Vec<(PairKind, usize)>,
}

/// Build every pair family over one labeled cohort.
///
/// Departure pairs set users who fell silent during their first block
/// against blocked users who stayed, matched on the block date; their
/// control pairs mirror each matched departure with two never-blocked
/// users around the same date. Recidivism pairs set repeat offenders
/// against reformed users with at least as much post-block activity,
/// and their controls set each first offender against a never-blocked
/// user at least as active before the block date.
pub fn build_all_pairs(
    timelines: &BTreeMap<UserId, UserTimeline>,
    cohort: &[UserId],
    labels: &[TrajectoryLabel],
    cfg: &CohortConfig,
    tol: Tolerance,
) -> MatchReport {
    assert_eq!(cohort.len(), labels.len(), "labels must align with the cohort");
    let views: Vec<CohortView> = cohort
        .iter()
        .zip(labels)
        .map(|(user, label)| {
            debug_assert_eq!(*user, label.user);
            CohortView {
                tl: &timelines[user],
                label,
            }
        })
        .collect();
    let clean: Vec<&UserTimeline> = timelines
        .values()
        .filter(|tl| tl.spans.is_empty())
        .collect();

    let mut report = MatchReport::default();
    let mut push = |outcome: MatchOutcome, kind: PairKind| {
        report.unmatched.push((kind, outcome.unmatched_lefts.len()));
        report.pairs.extend(outcome.pairs);
    };

    // departers during the first block vs blocked stayers, by block date
    let mut departers: Vec<DatedUser> = views
        .iter()
        .filter(|v| v.label.departed_during_block)
        .map(|v| DatedUser {
            user: v.label.user.clone(),
            ts: v.tl.spans[0].start,
        })
        .collect();
    departers.sort_by(|a, b| a.ts.cmp(&b.ts).then_with(|| a.user.cmp(&b.user)));
    let stayers: Vec<DatedUser> = views
        .iter()
        .filter(|v| !v.label.departed_within_horizon)
        .map(|v| DatedUser {
            user: v.label.user.clone(),
            ts: v.tl.spans[0].start,
        })
        .collect();
    let departure_pairs = match_by_date(&departers, &stayers, tol, PairKind::DepartureBlocked);

    // never-blocked control around each matched blocked departure
    let departure_by_user: BTreeMap<&UserId, Timestamp> = views
        .iter()
        .map(|v| (&v.label.user, v.label.departure_time))
        .collect();
    let confirmed_clean: Vec<DatedUser> = clean
        .iter()
        .filter(|tl| (cfg.dataset_end - tl.last_activity) as f64 >= cfg.horizon_s())
        .map(|tl| DatedUser {
            user: tl.user.clone(),
            ts: tl.last_activity,
        })
        .collect();
    let mut ctrl_pool: BTreeMap<Timestamp, BTreeSet<&UserId>> = BTreeMap::new();
    for c in &confirmed_clean {
        ctrl_pool.entry(c.ts).or_default().insert(&c.user);
    }
    let clean_by_activity: BTreeSet<(Timestamp, &UserId)> =
        clean.iter().map(|tl| (tl.last_activity, &tl.user)).collect();
    let mut used_stayers: BTreeSet<UserId> = BTreeSet::new();
    let mut control_outcome = MatchOutcome::default();
    for pair in &departure_pairs.pairs {
        let anchor = departure_by_user[&pair.left];
        let nearest = ctrl_pool
            .iter()
            .flat_map(|(&ts, users)| {
                let gap = (ts - anchor).abs();
                users.iter().map(move |&u| (gap, u.clone(), ts))
            })
            .min_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
        let Some((gap, ctrl_user, ctrl_ts)) = nearest else {
            control_outcome.unmatched_lefts.push(pair.left.clone());
            continue;
        };
        // a stayer is any never-blocked user still active a full
        // horizon past the control's departure date
        let min_activity = ctrl_ts + cfg.horizon_s() as i64;
        let stayer = clean_by_activity
            .range((min_activity, &UserId::new())..)
            .map(|&(_, u)| u)
            .filter(|u| **u != ctrl_user && !used_stayers.contains(*u))
            .min()
            .cloned();
        let Some(stayer) = stayer else {
            control_outcome.unmatched_lefts.push(pair.left.clone());
            continue;
        };
        let bucket = ctrl_pool.get_mut(&ctrl_ts).expect("control bucket exists");
        bucket.retain(|u| **u != ctrl_user);
        if bucket.is_empty() {
            ctrl_pool.remove(&ctrl_ts);
        }
        used_stayers.insert(stayer.clone());
        control_outcome.pairs.push(MatchedPair {
            kind: PairKind::DepartureControl,
            left: ctrl_user,
            right: stayer,
            match_stat: gap as f64 / SECONDS_PER_DAY as f64,
        });
    }

    push(departure_pairs, PairKind::DepartureBlocked);
    push(control_outcome, PairKind::DepartureControl);

    // recidivists vs reformed users with as much post-block activity
    let reformed: Vec<CountedUser> = views
        .iter()
        .filter(|v| v.label.reformed)
        .map(|v| CountedUser {
            user: v.label.user.clone(),
            count: authored_between(v.tl, v.tl.spans[0].start, Timestamp::MAX),
        })
        .collect();
    for (kind, flag) in [
        (PairKind::RecidShort, &|l: &TrajectoryLabel| l.recidivist_short as u8),
        (PairKind::RecidLong, &|l: &TrajectoryLabel| l.recidivist_long as u8),
    ] as [(PairKind, &dyn Fn(&TrajectoryLabel) -> u8); 2]
    {
        let recid: Vec<CountedUser> = views
            .iter()
            .filter(|v| flag(v.label) == 1)
            .map(|v| CountedUser {
                user: v.label.user.clone(),
                count: authored_between(v.tl, v.tl.spans[0].start, v.tl.spans[1].start),
            })
            .collect();
        push(match_by_count(&recid, &reformed, kind), kind);
    }

    // every first offender vs an equally active never-blocked user
    let clean_counted: Vec<(&UserTimeline, ())> = clean.iter().map(|tl| (*tl, ())).collect();
    let mut recid_control = MatchOutcome::default();
    let mut used_clean: BTreeSet<&UserId> = BTreeSet::new();
    for v in &views {
        let cutoff = v.tl.spans[0].start;
        let own = authored_before(v.tl, cutoff);
        let best = clean_counted
            .iter()
            .filter(|(tl, _)| !used_clean.contains(&tl.user))
            .filter_map(|(tl, _)| {
                let count = authored_before(tl, cutoff);
                (count >= own).then_some((count, &tl.user))
            })
            .min();
        match best {
            Some((count, user)) => {
                used_clean.insert(user);
                recid_control.pairs.push(MatchedPair {
                    kind: PairKind::RecidControl,
                    left: v.label.user.clone(),
                    right: user.clone(),
                    match_stat: (count - own) as f64,
                });
            }
            None => recid_control.unmatched_lefts.push(v.label.user.clone()),
        }
    }
    push(recid_control, PairKind::RecidControl);

    report
}
