//! Synthetic moderation-log and conversation generator with planted
//! ground truth.
//!
//! Every user draws from an independent, seed-derived random stream,
//! so output is byte-stable for a given config regardless of thread
//! count, and adding users never disturbs earlier ones. Outcomes are
//! planted with wide margins around every label boundary (departure
//! horizons, recidivism windows, span adjacency), then the truth
//! record is recomputed from the final integer timestamps, so label
//! reconstruction downstream can be checked for exact agreement.
//!
//! The generator's placement windows assume windows close to the
//! defaults (a ~180 day horizon, a ~7 day short window); `validate`
//! enforces the ranges the margins were designed for.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::SynthError;
use crate::types::{
    BlockAction, BlockDuration, BlockLogEntry, CohortConfig, CommentAction, CommentEvent,
    PageKind, Timestamp, UserId, SECONDS_PER_DAY,
};

#[derive(Clone, Debug)]
pub struct SynthConfig {
    pub n_users: usize,
    pub seed: u64,
    /// Per-month hazard of a never-blocked user going silent.
    pub monthly_departure_hazard: f64,
    /// Fraction of users that get blocked at least once.
    pub block_rate: f64,
    /// Base probability that a cohort user reoffends in the horizon.
    pub base_recid_prob: f64,
    /// Multiplies the recidivism probability of high-activity users.
    pub recid_multiplier_for_high_activity: f64,
    /// Odds ratio applied to recidivism for users who apologize.
    pub apology_recid_odds_ratio: f64,
    /// Fraction of first blocks lifted early by an unblock.
    pub unblock_rate: f64,
    pub median_block_duration_days: f64,
    pub horizon_days: f64,
    pub short_window_days: f64,
    pub min_tenure_days: f64,
    pub min_comments: usize,
    pub community_burnin_days: f64,
    pub dataset_end_days: f64,
}

impl Default for SynthConfig {
    fn default() -> SynthConfig {
        SynthConfig {
            n_users: 500,
            seed: 42,
            monthly_departure_hazard: 0.10,
            block_rate: 0.55,
            base_recid_prob: 0.45,
            recid_multiplier_for_high_activity: 1.0,
            apology_recid_odds_ratio: 1.0,
            unblock_rate: 0.15,
            median_block_duration_days: 1.0,
            horizon_days: 180.0,
            short_window_days: 7.0,
            min_tenure_days: 30.0,
            min_comments: 8,
            community_burnin_days: 1826.0,
            dataset_end_days: 5200.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.n_users == 0 {
            return Err(SynthError::InvalidConfig("n_users must be positive".into()));
        }
        for (name, p) in [
            ("monthly_departure_hazard", self.monthly_departure_hazard),
            ("block_rate", self.block_rate),
            ("base_recid_prob", self.base_recid_prob),
            ("unblock_rate", self.unblock_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(SynthError::InvalidConfig(format!("{name} must be in [0, 1]")));
            }
        }
        if !(self.apology_recid_odds_ratio > 0.0) || !(self.recid_multiplier_for_high_activity >= 0.0)
        {
            return Err(SynthError::InvalidConfig(
                "odds ratio must be positive and the activity multiplier non-negative".into(),
            ));
        }
        if !(0.25..=6.0).contains(&self.median_block_duration_days) {
            return Err(SynthError::InvalidConfig(
                "median block duration must be in [0.25, 6] days".into(),
            ));
        }
        // the planted margins are built around the default windows
        if !(176.0..=190.0).contains(&self.horizon_days) {
            return Err(SynthError::InvalidConfig("horizon must be 176-190 days".into()));
        }
        if !(6.6..=7.4).contains(&self.short_window_days) {
            return Err(SynthError::InvalidConfig("short window must be 6.6-7.4 days".into()));
        }
        if !(10.0..=340.0).contains(&self.min_tenure_days) {
            return Err(SynthError::InvalidConfig("min tenure must be 10-340 days".into()));
        }
        if self.min_comments < 2 || self.min_comments > 400 {
            return Err(SynthError::InvalidConfig("min comments must be 2-400".into()));
        }
        if self.community_burnin_days < 0.0 {
            return Err(SynthError::InvalidConfig("burn-in must be non-negative".into()));
        }
        if self.dataset_end_days < self.community_burnin_days + 2200.0 {
            return Err(SynthError::InvalidConfig(
                "record must extend 2200+ days past the burn-in".into(),
            ));
        }
        Ok(())
    }

    /// The cohort settings under which the planted truth holds.
    pub fn cohort_config(&self) -> CohortConfig {
        CohortConfig {
            horizon_days: self.horizon_days,
            short_window_days: self.short_window_days,
            min_tenure_days: self.min_tenure_days,
            min_comments: self.min_comments,
            community_burnin_days: self.community_burnin_days,
            dataset_end: dsec(self.dataset_end_days),
        }
    }
}

/// Planted outcome for one generated user, recomputed from the final
/// integer timestamps.
#[derive(Clone, Debug, PartialEq)]
pub struct TruthRecord {
    pub user: UserId,
    pub blocked: bool,
    pub in_cohort: bool,
    pub departed_during_block: bool,
    pub departed_within_horizon: bool,
    pub recidivist_short: bool,
    pub recidivist_long: bool,
    pub reformed: bool,
    pub time_to_reoffense_days: Option<f64>,
    pub departure_time: Timestamp,
    pub apologized: bool,
    pub questioned: bool,
    pub claimed_unfairness: bool,
    pub high_activity: bool,
}

#[derive(Clone, Debug, Default)]
pub struct SynthOutput {
    /// Block log entries sorted by (ts, target).
    pub blocks: Vec<BlockLogEntry>,
    /// Comment events sorted by (ts, id).
    pub comments: Vec<CommentEvent>,
    /// One record per user, in user-id order.
    pub truth: Vec<TruthRecord>,
}

pub const APOLOGY_TEMPLATES: [&str; 3] = [
    "I apologize for the disruption I caused on the article.",
    "I am sorry about the revert mess and it will not happen again.",
    "I regret the tone I used in that discussion.",
];

pub const QUESTION_TEMPLATES: [&str; 3] = [
    "Why was this account blocked for the talk page discussion?",
    "What policy did I break with those edits?",
    "How long will this restriction stay in place?",
];

pub const UNFAIRNESS_TEMPLATES: [&str; 3] = [
    "This block is unfair and completely unwarranted.",
    "I have been wrongly accused of vandalism here.",
    "The sanction is unjust and the evidence is unfounded.",
];

pub const NEUTRAL_TEMPLATES: [&str; 3] = [
    "I have read the policy page and will wait for the review.",
    "Thank you for the explanation, I understand the decision.",
    "I asked the reviewing admin to take another look at the diffs.",
];

const FILLER_TEMPLATES: [&str; 5] = [
    "Discussing the sourcing for the recent changes.",
    "Added a note about the structure of the section.",
    "Following up on the earlier conversation here.",
    "Leaving a pointer to the relevant guideline.",
    "Replied on the main discussion thread.",
];

const REASON_PERSONAL_ATTACK: [&str; 3] = [
    "personal attacks on other editors",
    "gross incivility in discussions",
    "repeated insults toward editors",
];
const REASON_HARASSMENT: [&str; 3] = [
    "harassment of another user",
    "intimidation and stalking behaviour",
    "threats against a contributor",
];
const REASON_EDIT_WARRING: [&str; 3] = [
    "edit warring on multiple pages",
    "3rr violation after warning",
    "slow revert war on the article",
];
const REASON_DISRUPTIVE: [&str; 4] = [
    "persistent disruptive editing",
    "vandalism after final warning",
    "spam links added repeatedly",
    "pov pushing against consensus",
];
const REASON_PROTECTION: [&str; 3] = [
    "blocked as an open proxy",
    "compromised account protection",
    "webhost provider range",
];
const REASON_UNKNOWN: [&str; 2] = ["see discussion on noticeboard", "per arbitration decision"];

fn dsec(days: f64) -> i64 {
    (days * SECONDS_PER_DAY as f64).round() as i64
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn user_rng(seed: u64, idx: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(idx as u64 + 1)))
}

fn geometric_months(rng: &mut ChaCha8Rng, hazard: f64) -> i64 {
    if hazard >= 1.0 {
        return 0;
    }
    let u: f64 = rng.random();
    ((1.0 - u).ln() / (1.0 - hazard).ln()).floor() as i64
}

fn odds_apply(p: f64, odds_ratio: f64) -> f64 {
    let odds = p / (1.0 - p) * odds_ratio;
    odds / (1.0 + odds)
}

/// What keeps a blocked user out of the analysis cohort, if anything.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Exclusion {
    None,
    Reason,
    IndefiniteFirst,
    FewComments,
    ShortTenure,
}

struct UserGen {
    blocks: Vec<BlockLogEntry>,
    comments: Vec<CommentEvent>,
    truth: TruthRecord,
}

struct Emitter<'a> {
    idx: usize,
    user: UserId,
    n_users: usize,
    seq: usize,
    comments: Vec<CommentEvent>,
    rng: &'a mut ChaCha8Rng,
}

impl<'a> Emitter<'a> {
    fn new(idx: usize, n_users: usize, rng: &'a mut ChaCha8Rng) -> Emitter<'a> {
        Emitter {
            idx,
            user: format!("u{idx:05}"),
            n_users,
            seq: 0,
            comments: Vec::new(),
            rng,
        }
    }

    fn next_id(&mut self) -> String {
        let id = format!("c{:05}_{:03}", self.idx, self.seq);
        self.seq += 1;
        id
    }

    /// An authored comment on a random article or another user's talk.
    fn authored(&mut self, ts: Timestamp, action: CommentAction) {
        let (owner, page_kind) = if self.rng.random_bool(0.5) {
            (format!("art{:03}", self.rng.random_range(0..50)), PageKind::ArticleTalk)
        } else {
            let j = self.rng.random_range(0..self.n_users);
            if j == self.idx {
                (format!("art{:03}", self.rng.random_range(0..50)), PageKind::ArticleTalk)
            } else {
                (format!("u{j:05}"), PageKind::UserTalk)
            }
        };
        let text = if action == CommentAction::Delete {
            String::new()
        } else {
            FILLER_TEMPLATES[self.rng.random_range(0..FILLER_TEMPLATES.len())].to_string()
        };
        let id = self.next_id();
        self.comments.push(CommentEvent {
            id,
            author: self.user.clone(),
            owner,
            page_kind,
            ts,
            action,
            text,
        });
    }

    /// A message on the user's own talk page (the in-block channel).
    fn own_talk(&mut self, ts: Timestamp, text: &str) {
        let id = self.next_id();
        self.comments.push(CommentEvent {
            id,
            author: self.user.clone(),
            owner: self.user.clone(),
            page_kind: PageKind::UserTalk,
            ts,
            action: CommentAction::Add,
            text: text.to_string(),
        });
    }

    /// Someone else's post on this user's talk page.
    fn received(&mut self, ts: Timestamp) {
        let author = format!("amb{:04}", self.rng.random_range(0..200));
        let id = self.next_id();
        self.comments.push(CommentEvent {
            id,
            author,
            owner: self.user.clone(),
            page_kind: PageKind::UserTalk,
            ts,
            action: CommentAction::Add,
            text: FILLER_TEMPLATES[self.rng.random_range(0..FILLER_TEMPLATES.len())].to_string(),
        });
    }
}

fn pick<'t>(rng: &mut ChaCha8Rng, pool: &[&'t str]) -> &'t str {
    pool[rng.random_range(0..pool.len())]
}

fn block_entry(
    rng: &mut ChaCha8Rng,
    target: &str,
    ts: Timestamp,
    action: BlockAction,
    duration: Option<BlockDuration>,
    reason: &str,
) -> BlockLogEntry {
    BlockLogEntry {
        ts,
        admin: format!("adm{:02}", rng.random_range(0..8)),
        target: target.to_string(),
        action,
        duration,
        reason_text: reason.to_string(),
    }
}

fn gen_user(idx: usize, cfg: &SynthConfig) -> UserGen {
    let mut rng = user_rng(cfg.seed, idx);
    let high_activity = rng.random_bool(0.5);
    let rate_per_day = if high_activity {
        rng.random_range(1.2..2.5)
    } else {
        rng.random_range(0.08..0.35)
    };
    let blocked = rng.random_bool(cfg.block_rate);
    if blocked {
        gen_blocked_user(idx, cfg, &mut rng, high_activity, rate_per_day)
    } else {
        gen_clean_user(idx, cfg, &mut rng, high_activity, rate_per_day)
    }
}

fn gen_clean_user(
    idx: usize,
    cfg: &SynthConfig,
    rng: &mut ChaCha8Rng,
    high_activity: bool,
    rate_per_day: f64,
) -> UserGen {
    let first_days = cfg.community_burnin_days + rng.random_range(10.0..2010.0);
    let mut months = geometric_months(rng, cfg.monthly_departure_hazard);
    // keep the whole silence confirmable inside the record
    let cap =
        ((cfg.dataset_end_days - cfg.horizon_days - first_days) / 30.0).floor() as i64 - 1;
    months = months.clamp(0, cap.max(0));
    let offset_days = months as f64 * 30.0 + rng.random_range(1.0..29.0);
    let first_s = dsec(first_days);
    let dep_s = dsec(first_days + offset_days);

    let mut em = Emitter::new(idx, cfg.n_users, rng);
    em.authored(first_s, CommentAction::Add);
    let n_mid = ((rate_per_day * offset_days) as usize).min(1200);
    for _ in 0..n_mid {
        let ts = em.rng.random_range(first_s + 1..dep_s);
        em.authored(ts, CommentAction::Add);
    }
    em.authored(dep_s, CommentAction::Add);
    for _ in 0..em.rng.random_range(0..4) {
        let ts = em.rng.random_range(first_s..=dep_s);
        em.received(ts);
    }
    let truth = finish_truth(
        &em.user,
        &em.comments,
        &[],
        cfg,
        Exclusion::None,
        false,
        false,
        false,
        high_activity,
    );
    UserGen {
        blocks: Vec::new(),
        comments: em.comments,
        truth,
    }
}

#[allow(clippy::too_many_arguments)]
fn gen_blocked_user(
    idx: usize,
    cfg: &SynthConfig,
    rng: &mut ChaCha8Rng,
    high_activity: bool,
    rate_per_day: f64,
) -> UserGen {
    let excl = {
        let r: f64 = rng.random();
        if r < 0.12 {
            Exclusion::Reason
        } else if r < 0.16 {
            Exclusion::IndefiniteFirst
        } else if r < 0.21 {
            Exclusion::FewComments
        } else if r < 0.24 {
            Exclusion::ShortTenure
        } else {
            Exclusion::None
        }
    };
    let b1_days = cfg.community_burnin_days + rng.random_range(20.0..2000.0);
    let tenure_days = if excl == Exclusion::ShortTenure {
        rng.random_range(5.0..cfg.min_tenure_days - 3.0)
    } else {
        rng.random_range(cfg.min_tenure_days + 3.0..350.0)
    };
    let first_days = b1_days - tenure_days;
    let t1_s = dsec(b1_days);
    let first_s = dsec(first_days);

    let reason1: &str = match excl {
        Exclusion::Reason => {
            if rng.random_bool(0.5) {
                pick(rng, &REASON_PROTECTION)
            } else {
                pick(rng, &REASON_UNKNOWN)
            }
        }
        _ => match rng.random_range(0..4) {
            0 => pick(rng, &REASON_PERSONAL_ATTACK),
            1 => pick(rng, &REASON_HARASSMENT),
            2 => pick(rng, &REASON_EDIT_WARRING),
            _ => pick(rng, &REASON_DISRUPTIVE),
        },
    };

    // ---- outcome plan (cohort users only get the full machinery) ----
    let cohort = excl == Exclusion::None;
    let mut apologized = false;
    let mut questioned = false;
    let mut claimed_unfair = false;
    let mut is_recid = false;
    let mut recid_is_short = false;
    if cohort {
        let mut p = cfg.base_recid_prob;
        if high_activity {
            p = (p * cfg.recid_multiplier_for_high_activity).clamp(0.02, 0.98);
        }
        apologized = rng.random_bool(0.5);
        if apologized {
            p = odds_apply(p, cfg.apology_recid_odds_ratio);
        }
        questioned = rng.random_bool(0.3);
        claimed_unfair = rng.random_bool(0.3);
        is_recid = rng.random_bool(p);
        recid_is_short = is_recid && rng.random_bool(0.4);
    }

    // ---- first span geometry, all margins in days ----
    let median = cfg.median_block_duration_days;
    let dur1_days = if !cohort {
        (median * (rng.random_range(-2.0..5.0f64)).exp2()).min(32.0)
    } else if recid_is_short {
        rng.random_range(0.25..2.0)
    } else if is_recid {
        (median * (rng.random_range(-2.0..2.5f64)).exp2()).min(5.9)
    } else {
        (median * (rng.random_range(-2.0..5.0f64)).exp2()).min(32.0)
    };
    let indefinite = excl == Exclusion::IndefiniteFirst;
    let dur1_s = dsec(dur1_days);

    let mut blocks = vec![block_entry(
        rng,
        &format!("u{idx:05}"),
        t1_s,
        BlockAction::Block,
        Some(if indefinite {
            BlockDuration::Indefinite
        } else {
            BlockDuration::Seconds(dur1_s)
        }),
        reason1,
    )];

    // effective end: an early unblock or (for some reformed users) a
    // modify can move it; margins keep every variant strictly inside
    // the first span's imposed end
    let mut eff_s = t1_s + dur1_s;
    if cohort {
        if rng.random_bool(cfg.unblock_rate) {
            let tu_s = t1_s + dsec(rng.random_range(0.1..0.85) * dur1_days);
            blocks.push(block_entry(
                rng,
                &format!("u{idx:05}"),
                tu_s,
                BlockAction::Unblock,
                None,
                "lifting after discussion",
            ));
            eff_s = tu_s;
        } else if !is_recid && rng.random_bool(0.1) {
            let tm_s = t1_s + dsec(rng.random_range(0.1..0.5) * dur1_days);
            let dm_s = dsec(rng.random_range(0.3..1.2) * dur1_days);
            blocks.push(block_entry(
                rng,
                &format!("u{idx:05}"),
                tm_s,
                BlockAction::Modify,
                Some(BlockDuration::Seconds(dm_s)),
                "adjusting duration",
            ));
            eff_s = tm_s + dm_s;
        }
    }
    let eff_rel_days = (eff_s - t1_s) as f64 / SECONDS_PER_DAY as f64;

    // ---- second span for recidivists ----
    let mut t2_rel_days = f64::NAN;
    let mut dur2_days = 0.0;
    if is_recid {
        t2_rel_days = if recid_is_short {
            rng.random_range(dur1_days + 0.4..6.5)
        } else {
            rng.random_range(dur1_days.max(7.0) + 0.5..170.0)
        };
        dur2_days = rng.random_range(0.25..3.0);
        let t2_s = t1_s + dsec(t2_rel_days);
        let reason2 = match rng.random_range(0..4) {
            0 => pick(rng, &REASON_PERSONAL_ATTACK),
            1 => pick(rng, &REASON_HARASSMENT),
            2 => pick(rng, &REASON_EDIT_WARRING),
            _ => pick(rng, &REASON_DISRUPTIVE),
        };
        blocks.push(block_entry(
            rng,
            &format!("u{idx:05}"),
            t2_s,
            BlockAction::Block,
            Some(BlockDuration::Seconds(dsec(dur2_days))),
            reason2,
        ));
    }

    // ---- comments ----
    let mut em = Emitter::new(idx, cfg.n_users, rng);
    let n_pre = if excl == Exclusion::FewComments {
        em.rng.random_range(1..cfg.min_comments)
    } else {
        ((rate_per_day * tenure_days).round() as usize).clamp(cfg.min_comments, 1200)
    };
    em.authored(first_s, CommentAction::Add);
    for _ in 1..n_pre {
        let ts = em.rng.random_range(first_s + 3600..t1_s - 3600);
        em.authored(ts, CommentAction::Add);
    }
    // extra edits and deletes sharpen the add-only activity filters
    for _ in 0..(n_pre / 10).min(50) {
        let ts = em.rng.random_range(first_s + 3600..t1_s - 3600);
        let action = if em.rng.random_bool(0.5) {
            CommentAction::Edit
        } else {
            CommentAction::Delete
        };
        em.authored(ts, action);
    }
    for _ in 0..em.rng.random_range(1..6) {
        let ts = em.rng.random_range(first_s + 1..t1_s);
        em.received(ts);
    }

    // in-block messages on the user's own talk page, one per planted
    // cue, a neutral note when no cue fires
    let mut message_texts: Vec<String> = Vec::new();
    if cohort {
        if apologized {
            message_texts.push(pick(em.rng, &APOLOGY_TEMPLATES).to_string());
        }
        if questioned {
            message_texts.push(pick(em.rng, &QUESTION_TEMPLATES).to_string());
        }
        if claimed_unfair {
            message_texts.push(pick(em.rng, &UNFAIRNESS_TEMPLATES).to_string());
        }
        if message_texts.is_empty() {
            message_texts.push(pick(em.rng, &NEUTRAL_TEMPLATES).to_string());
        }
    } else if em.rng.random_bool(0.5) {
        message_texts.push(pick(em.rng, &NEUTRAL_TEMPLATES).to_string());
    }
    let mut message_ts: Vec<i64> = message_texts
        .iter()
        .map(|_| em.rng.random_range(t1_s + 60..eff_s - 60))
        .collect();
    message_ts.sort_unstable();
    let n_messages = message_texts.len();
    for (ts, text) in message_ts.iter().zip(&message_texts) {
        em.own_talk(*ts, text);
    }

    // ---- departure plan ----
    // during-block departers just stop at their last in-block message;
    // the others keep commenting in windows that dodge the second span
    let (departs_during, departs_horizon);
    if cohort && n_messages > 0 && em.rng.random_bool(0.10) {
        departs_during = true;
        departs_horizon = true;
    } else {
        departs_during = false;
        departs_horizon = cohort && em.rng.random_bool(0.22);
    }
    if !departs_during {
        let last_rel_days = if departs_horizon {
            if is_recid {
                let w1 = (eff_rel_days + 0.3, t2_rel_days - 0.3);
                if w1.1 - w1.0 >= 1.0 && em.rng.random_bool(0.5) {
                    em.rng.random_range(w1.0..w1.1)
                } else {
                    em.rng.random_range(t2_rel_days + dur2_days + 0.3..175.0)
                }
            } else {
                em.rng.random_range(eff_rel_days + 0.5..175.0)
            }
        } else {
            let floor = if is_recid {
                (t2_rel_days + dur2_days + 1.0).max(191.0)
            } else {
                191.0
            };
            em.rng.random_range(floor..floor + 209.0)
        };
        let last_s = t1_s + dsec(last_rel_days);
        // mid-window activity between the block and the final comment,
        // clear of the second span
        let n_post = ((rate_per_day * last_rel_days * 0.3) as usize).min(200);
        for _ in 0..n_post {
            let rel = em.rng.random_range(eff_rel_days + 0.2..last_rel_days);
            if is_recid && rel > t2_rel_days - 0.2 && rel < t2_rel_days + dur2_days + 0.2 {
                continue;
            }
            em.authored(t1_s + dsec(rel), CommentAction::Add);
        }
        em.authored(last_s, CommentAction::Add);
    }

    let truth = finish_truth(
        &em.user,
        &em.comments,
        &blocks,
        cfg,
        excl,
        apologized,
        questioned,
        claimed_unfair,
        high_activity,
    );
    UserGen {
        blocks,
        comments: em.comments,
        truth,
    }
}

/// Recompute the outcome record from the emitted integers, mirroring
/// the label definitions with plain comparisons.
#[allow(clippy::too_many_arguments)]
fn finish_truth(
    user: &UserId,
    comments: &[CommentEvent],
    blocks: &[BlockLogEntry],
    cfg: &SynthConfig,
    excl: Exclusion,
    apologized: bool,
    questioned: bool,
    claimed_unfair: bool,
    high_activity: bool,
) -> TruthRecord {
    let authored: Vec<&CommentEvent> = comments.iter().filter(|c| c.author == *user).collect();
    let first_activity = authored.iter().map(|c| c.ts).min().expect("authored comments");
    let departure_time = authored.iter().map(|c| c.ts).max().expect("authored comments");
    let horizon_s = cfg.horizon_days * SECONDS_PER_DAY as f64;
    let short_s = cfg.short_window_days * SECONDS_PER_DAY as f64;

    let block_starts: Vec<Timestamp> = blocks
        .iter()
        .filter(|b| b.action == BlockAction::Block && b.target == *user)
        .map(|b| b.ts)
        .collect();
    let blocked = !block_starts.is_empty();
    if !blocked {
        return TruthRecord {
            user: user.clone(),
            blocked: false,
            in_cohort: false,
            departed_during_block: false,
            departed_within_horizon: false,
            recidivist_short: false,
            recidivist_long: false,
            reformed: true,
            time_to_reoffense_days: None,
            departure_time,
            apologized,
            questioned,
            claimed_unfairness: claimed_unfair,
            high_activity,
        };
    }
    let t1 = block_starts[0];
    // effective end of the first span: last imposition before the
    // second block start, truncated by any unblock
    let second_start = block_starts.get(1).copied();
    let mut eff_end: Option<Timestamp> = None;
    for b in blocks {
        if second_start.is_some_and(|t2| b.ts >= t2) {
            break;
        }
        match (b.action, b.duration) {
            (BlockAction::Block | BlockAction::Modify, Some(BlockDuration::Seconds(s))) => {
                eff_end = Some(b.ts + s);
            }
            (BlockAction::Block | BlockAction::Modify, Some(BlockDuration::Indefinite)) => {
                eff_end = None; // unbounded
            }
            (BlockAction::Unblock, _) => {
                eff_end = Some(b.ts);
            }
            _ => unreachable!("block/modify always carry a duration"),
        }
    }
    let within_horizon = (departure_time - t1) as f64 <= horizon_s;
    let during = within_horizon && eff_end.is_none_or(|e| departure_time < e);
    let tt_days = second_start.map(|t2| (t2 - t1) as f64 / SECONDS_PER_DAY as f64);
    let recid_long = second_start.is_some_and(|t2| (t2 - t1) as f64 <= horizon_s);
    let recid_short = second_start.is_some_and(|t2| (t2 - t1) as f64 <= short_s);

    // the cohort predicate, restated over the emitted integers
    let n_pre_adds = authored
        .iter()
        .filter(|c| c.ts < t1 && c.action == CommentAction::Add)
        .count();
    let first_is_finite = !matches!(blocks[0].duration, Some(BlockDuration::Indefinite));
    let disruption_reason = crate::ingest::ReasonTable::default()
        .categorize(&blocks[0].reason_text)
        .is_disruption();
    let in_cohort = disruption_reason
        && first_is_finite
        && n_pre_adds >= cfg.min_comments
        && (t1 - first_activity) as f64 >= cfg.min_tenure_days * SECONDS_PER_DAY as f64
        && t1 as f64 >= cfg.community_burnin_days * SECONDS_PER_DAY as f64
        && (dsec(cfg.dataset_end_days) - t1) as f64 >= horizon_s;
    debug_assert_eq!(in_cohort, excl == Exclusion::None, "planted exclusion must hold");

    TruthRecord {
        user: user.clone(),
        blocked: true,
        in_cohort,
        departed_during_block: during,
        departed_within_horizon: within_horizon,
        recidivist_short: recid_short,
        recidivist_long: recid_long,
        reformed: !recid_long,
        time_to_reoffense_days: tt_days,
        departure_time,
        apologized,
        questioned,
        claimed_unfairness: claimed_unfair,
        high_activity,
    }
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthOutput, SynthError> {
    cfg.validate()?;
    let per_user: Vec<UserGen> = (0..cfg.n_users)
        .into_par_iter()
        .map(|idx| gen_user(idx, cfg))
        .collect();
    let mut out = SynthOutput::default();
    for u in per_user {
        out.blocks.extend(u.blocks);
        out.comments.extend(u.comments);
        out.truth.push(u.truth);
    }
    out.blocks
        .sort_by(|a, b| a.ts.cmp(&b.ts).then_with(|| a.target.cmp(&b.target)));
    out.comments
        .sort_by(|a, b| a.ts.cmp(&b.ts).then_with(|| a.id.cmp(&b.id)));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cues::{detect_apology, detect_direct_question, detect_unfairness, CueLexicon};
    use crate::ingest::ReasonTable;
    use crate::types::ReasonCategory;

    #[test]
    fn cue_templates_trigger_exactly_their_detector() {
        let lex = CueLexicon::default();
        for t in APOLOGY_TEMPLATES {
            assert!(detect_apology(t, &lex).is_some(), "apology missed: {t}");
            assert!(detect_direct_question(t, &lex).is_none(), "question hit: {t}");
            assert!(detect_unfairness(t, &lex).is_none(), "unfairness hit: {t}");
        }
        for t in QUESTION_TEMPLATES {
            assert!(detect_direct_question(t, &lex).is_some(), "question missed: {t}");
            assert!(detect_apology(t, &lex).is_none(), "apology hit: {t}");
            assert!(detect_unfairness(t, &lex).is_none(), "unfairness hit: {t}");
        }
        for t in UNFAIRNESS_TEMPLATES {
            assert!(detect_unfairness(t, &lex).is_some(), "unfairness missed: {t}");
            assert!(detect_apology(t, &lex).is_none(), "apology hit: {t}");
            assert!(detect_direct_question(t, &lex).is_none(), "question hit: {t}");
        }
        for t in NEUTRAL_TEMPLATES.iter().chain(&FILLER_TEMPLATES) {
            assert!(detect_apology(t, &lex).is_none(), "apology hit: {t}");
            assert!(detect_direct_question(t, &lex).is_none(), "question hit: {t}");
            assert!(detect_unfairness(t, &lex).is_none(), "unfairness hit: {t}");
        }
    }

    #[test]
    fn reason_phrases_categorize_as_planted() {
        let table = ReasonTable::default();
        for (pool, cat) in [
            (&REASON_PERSONAL_ATTACK[..], ReasonCategory::PersonalAttack),
            (&REASON_HARASSMENT[..], ReasonCategory::Harassment),
            (&REASON_EDIT_WARRING[..], ReasonCategory::EditWarring),
            (&REASON_DISRUPTIVE[..], ReasonCategory::DisruptiveEditing),
            (&REASON_PROTECTION[..], ReasonCategory::Protection),
            (&REASON_UNKNOWN[..], ReasonCategory::Unknown),
        ] {
            for phrase in pool {
                assert_eq!(table.categorize(phrase), cat, "phrase: {phrase}");
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = SynthConfig { n_users: 60, seed: 9, ..SynthConfig::default() };
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        assert_eq!(a.blocks, b.blocks);
        assert_eq!(a.comments, b.comments);
        assert_eq!(a.truth, b.truth);
        let c = generate(&SynthConfig { seed: 10, ..cfg }).unwrap();
        assert_ne!(a.comments.len(), 0);
        assert!(a.blocks != c.blocks || a.comments != c.comments);
    }

    #[test]
    fn output_is_sorted_and_ids_unique() {
        let cfg = SynthConfig { n_users: 80, seed: 3, ..SynthConfig::default() };
        let out = generate(&cfg).unwrap();
        assert!(out.blocks.windows(2).all(|w| (w[0].ts, &w[0].target) <= (w[1].ts, &w[1].target)));
        assert!(out
            .comments
            .windows(2)
            .all(|w| (w[0].ts, &w[0].id) < (w[1].ts, &w[1].id)));
        let ids: std::collections::BTreeSet<&str> =
            out.comments.iter().map(|c| c.id.as_str()).collect();
        assert_eq!(ids.len(), out.comments.len());
        assert!(out.truth.windows(2).all(|w| w[0].user < w[1].user));
        assert_eq!(out.truth.len(), 80);
    }

    #[test]
    fn planted_populations_appear() {
        let cfg = SynthConfig { n_users: 400, seed: 11, ..SynthConfig::default() };
        let out = generate(&cfg).unwrap();
        let blocked = out.truth.iter().filter(|t| t.blocked).count();
        let cohort = out.truth.iter().filter(|t| t.in_cohort).count();
        let recid = out.truth.iter().filter(|t| t.recidivist_long).count();
        let short = out.truth.iter().filter(|t| t.recidivist_short).count();
        let during = out.truth.iter().filter(|t| t.departed_during_block).count();
        let horizon_only = out
            .truth
            .iter()
            .filter(|t| t.departed_within_horizon && !t.departed_during_block)
            .count();
        // rough sanity on the planted mix (block 55%, cohort 76% of
        // blocked, recid 45% of cohort, 40% of those short)
        assert!((170..=270).contains(&blocked), "blocked {blocked}");
        assert!((120..=220).contains(&cohort), "cohort {cohort}");
        assert!(recid > 40 && short > 10 && short < recid);
        assert!(during > 5, "during {during}");
        assert!(horizon_only > 15, "horizon_only {horizon_only}");
        // indefinite first blocks and non-disruption reasons exist
        let table = ReasonTable::default();
        let mut indef = 0;
        let mut nondisrupt = 0;
        let mut by_target: std::collections::BTreeMap<&str, &BlockLogEntry> =
            std::collections::BTreeMap::new();
        for b in &out.blocks {
            if b.action == BlockAction::Block {
                by_target.entry(b.target.as_str()).or_insert(b);
            }
        }
        for first in by_target.values() {
            if first.duration == Some(BlockDuration::Indefinite) {
                indef += 1;
            }
            if !table.categorize(&first.reason_text).is_disruption() {
                nondisrupt += 1;
            }
        }
        assert!(indef > 2, "indefinite firsts {indef}");
        assert!(nondisrupt > 10, "non-disruption firsts {nondisrupt}");
    }

    #[test]
    fn spans_never_touch_their_successor() {
        // second block must start strictly after the first span's
        // effective end, or the merger would fuse them
        let cfg = SynthConfig {
            n_users: 300,
            seed: 21,
            base_recid_prob: 0.9,
            ..SynthConfig::default()
        };
        let out = generate(&cfg).unwrap();
        let mut per_user: std::collections::BTreeMap<&str, Vec<&BlockLogEntry>> =
            std::collections::BTreeMap::new();
        for b in &out.blocks {
            per_user.entry(b.target.as_str()).or_default().push(b);
        }
        let mut recid_seen = 0;
        for entries in per_user.values() {
            let starts: Vec<&&BlockLogEntry> =
                entries.iter().filter(|e| e.action == BlockAction::Block).collect();
            if starts.len() < 2 {
                continue;
            }
            recid_seen += 1;
            let mut eff = match starts[0].duration.unwrap() {
                BlockDuration::Seconds(s) => starts[0].ts + s,
                BlockDuration::Indefinite => i64::MAX,
            };
            for e in entries.iter() {
                if e.ts >= starts[1].ts {
                    break;
                }
                match (e.action, e.duration) {
                    (BlockAction::Modify, Some(BlockDuration::Seconds(s))) => eff = e.ts + s,
                    (BlockAction::Unblock, _) => eff = e.ts,
                    _ => {}
                }
            }
            assert!(starts[1].ts > eff, "second span fused for {}", starts[0].target);
        }
        assert!(recid_seen > 50, "recidivists generated: {recid_seen}");
    }

    #[test]
    fn truth_windows_hold_with_margin() {
        let cfg = SynthConfig { n_users: 300, seed: 13, ..SynthConfig::default() };
        let out = generate(&cfg).unwrap();
        let horizon = cfg.horizon_days;
        let short = cfg.short_window_days;
        for t in out.truth.iter().filter(|t| t.in_cohort) {
            if let Some(tt) = t.time_to_reoffense_days {
                assert!(tt > 0.0);
                if t.recidivist_short {
                    assert!(tt <= short - 0.3, "short margin: {tt}");
                } else if t.recidivist_long {
                    assert!(tt > short + 0.3 && tt <= horizon - 5.0, "long margin: {tt}");
                }
            }
            assert_eq!(t.reformed, !t.recidivist_long);
        }
        // labels partition sensibly
        assert!(out.truth.iter().all(|t| !t.departed_during_block || t.departed_within_horizon));
    }

    #[test]
    fn apology_odds_ratio_shifts_recidivism() {
        let base = SynthConfig {
            n_users: 1200,
            seed: 17,
            block_rate: 0.9,
            apology_recid_odds_ratio: 0.4,
            ..SynthConfig::default()
        };
        let out = generate(&base).unwrap();
        let rate = |apol: bool| {
            let grp: Vec<&TruthRecord> = out
                .truth
                .iter()
                .filter(|t| t.in_cohort && t.apologized == apol)
                .collect();
            grp.iter().filter(|t| t.recidivist_long).count() as f64 / grp.len() as f64
        };
        assert!(
            rate(true) + 0.08 < rate(false),
            "apology OR did not lower recidivism: {} vs {}",
            rate(true),
            rate(false)
        );
    }

    #[test]
    fn config_validation_rejects_nonsense() {
        let ok = SynthConfig::default();
        assert!(ok.validate().is_ok());
        for bad in [
            SynthConfig { n_users: 0, ..ok.clone() },
            SynthConfig { block_rate: 1.5, ..ok.clone() },
            SynthConfig { apology_recid_odds_ratio: 0.0, ..ok.clone() },
            SynthConfig { horizon_days: 30.0, ..ok.clone() },
            SynthConfig { short_window_days: 20.0, ..ok.clone() },
            SynthConfig { min_comments: 1, ..ok.clone() },
            SynthConfig { dataset_end_days: 3000.0, ..ok.clone() },
        ] {
            assert!(bad.validate().is_err());
        }
    }
}
