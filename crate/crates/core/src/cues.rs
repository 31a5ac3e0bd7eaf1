//! Linguistic cue detection over the messages a user writes on their
//! own talk page while blocked.
//!
//! Detection is deliberately surface-level: lowercase token and prefix
//! lists plus short phrases, and a question rule keyed on the first
//! word of a sentence that ends in a question mark. Prefix matching
//! over-triggers on rare inventions ("sorrytown" reads as an apology);
//! that trade is accepted to keep the cue definitions auditable.
//!
//! The tokenizer is ASCII-oriented: tokens are runs of ASCII
//! alphanumerics with interior apostrophes, and any other character,
//! multi-byte ones included, separates tokens. Offsets are byte
//! offsets into the original text and always fall on char boundaries.

use serde::{Deserialize, Serialize};

use std::collections::BTreeMap;

use crate::types::{
    BlockSpan, CommentAction, CommentEvent, CueFlags, CueKind, PageKind, SpanEnd, UserTimeline,
};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token<'a> {
    pub text: &'a str,
    /// ASCII-lowercased form used for every comparison.
    pub lower: String,
    pub start: usize,
    pub end: usize,
}

pub fn tokenize(text: &str) -> Vec<Token<'_>> {
    let bytes = text.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if !bytes[i].is_ascii_alphanumeric() {
            i += 1;
            continue;
        }
        let start = i;
        while i < bytes.len() {
            if bytes[i].is_ascii_alphanumeric() {
                i += 1;
            } else if bytes[i] == b'\''
                && i + 1 < bytes.len()
                && bytes[i + 1].is_ascii_alphanumeric()
            {
                // interior apostrophe: don't, i'm
                i += 2;
            } else {
                break;
            }
        }
        let text_slice = &text[start..i];
        tokens.push(Token {
            text: text_slice,
            lower: text_slice.to_ascii_lowercase(),
            start,
            end: i,
        });
    }
    tokens
}

/// A sentence: a half-open token range, its byte range, and the
/// punctuation that closed it (None at end of text).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Sentence {
    pub token_start: usize,
    pub token_end: usize,
    pub byte_start: usize,
    pub byte_end: usize,
    pub terminator: Option<char>,
}

pub fn split_sentences(text: &str, tokens: &[Token]) -> Vec<Sentence> {
    let mut sentences = Vec::new();
    let mut byte_start = 0;
    let mut token_start = 0;
    let mut push = |byte_start: usize, byte_end: usize, token_start: &mut usize, term: Option<char>| {
        let mut token_end = *token_start;
        while token_end < tokens.len() && tokens[token_end].start < byte_end {
            token_end += 1;
        }
        if token_end > *token_start {
            sentences.push(Sentence {
                token_start: *token_start,
                token_end,
                byte_start,
                byte_end,
                terminator: term,
            });
        }
        *token_start = token_end;
    };
    for (pos, ch) in text.char_indices() {
        if matches!(ch, '.' | '?' | '!') {
            push(byte_start, pos, &mut token_start, Some(ch));
            byte_start = pos + ch.len_utf8();
        }
    }
    push(byte_start, text.len(), &mut token_start, None);
    sentences
}

/// Word lists driving the three detectors. Every entry is compared
/// against ASCII-lowercased tokens; phrases are adjacent-token
/// sequences. Partial JSON overrides keep the remaining defaults.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(default)]
pub struct CueLexicon {
    pub apology_prefixes: Vec<String>,
    pub apology_phrases: Vec<String>,
    pub question_starters: Vec<String>,
    /// Words that make "so ..." a direct question ("so what ...?").
    pub question_so_followers: Vec<String>,
    pub unfairness_tokens: Vec<String>,
    pub unfairness_prefixes: Vec<String>,
    pub unfairness_phrases: Vec<String>,
}

fn strings(words: &[&str]) -> Vec<String> {
    words.iter().map(|w| w.to_string()).collect()
}

impl Default for CueLexicon {
    fn default() -> CueLexicon {
        CueLexicon {
            apology_prefixes: strings(&["apolog", "sorry", "forgiv", "regret"]),
            apology_phrases: strings(&["excuse me", "my mistake", "my bad"]),
            question_starters: strings(&["why", "how", "what", "who"]),
            question_so_followers: strings(&["what", "why"]),
            unfairness_tokens: strings(&[
                "unjust",
                "unjustified",
                "illegitimate",
                "illegal",
                "unfair",
                "wrongly",
                "falsely",
                "injustice",
                "unfounded",
                "unwarranted",
            ]),
            unfairness_prefixes: strings(&["accus", "alleg"]),
            unfairness_phrases: strings(&["not fair"]),
        }
    }
}

impl CueLexicon {
    pub fn from_json(json: &str) -> Result<CueLexicon, String> {
        serde_json::from_str(json).map_err(|e| e.to_string())
    }
}

/// Index of the first token of a phrase occurrence, if any.
fn find_phrase(tokens: &[Token], phrase: &str) -> Option<usize> {
    let parts: Vec<String> = phrase
        .split_ascii_whitespace()
        .map(|w| w.to_ascii_lowercase())
        .collect();
    if parts.is_empty() || tokens.len() < parts.len() {
        return None;
    }
    (0..=tokens.len() - parts.len()).find(|&i| {
        parts
            .iter()
            .enumerate()
            .all(|(j, part)| tokens[i + j].lower == *part)
    })
}

fn sentence_snippet(text: &str, sentences: &[Sentence], token_idx: usize) -> String {
    let sentence = sentences
        .iter()
        .find(|s| s.token_start <= token_idx && token_idx < s.token_end)
        .expect("every token belongs to a sentence");
    text[sentence.byte_start..sentence.byte_end].trim().to_string()
}

/// Apology: any token starting with an apology stem, or an apology
/// phrase. Returns the containing sentence.
pub fn detect_apology(text: &str, lex: &CueLexicon) -> Option<String> {
    let tokens = tokenize(text);
    let sentences = split_sentences(text, &tokens);
    let stem_hit = tokens
        .iter()
        .position(|t| lex.apology_prefixes.iter().any(|p| t.lower.starts_with(p.as_str())));
    let hit = stem_hit.or_else(|| {
        lex.apology_phrases
            .iter()
            .find_map(|ph| find_phrase(&tokens, ph))
    })?;
    Some(sentence_snippet(text, &sentences, hit))
}

/// Direct question: a sentence that ends with '?' and opens with an
/// interrogative ("why ...", "so what ...").
pub fn detect_direct_question(text: &str, lex: &CueLexicon) -> Option<String> {
    let tokens = tokenize(text);
    for s in split_sentences(text, &tokens) {
        if s.terminator != Some('?') {
            continue;
        }
        let first = &tokens[s.token_start].lower;
        let opens_question = lex.question_starters.iter().any(|w| w == first)
            || (first == "so"
                && s.token_end - s.token_start >= 2
                && lex
                    .question_so_followers
                    .iter()
                    .any(|w| *w == tokens[s.token_start + 1].lower));
        if opens_question {
            return Some(text[s.byte_start..s.byte_end].trim().to_string());
        }
    }
    None
}

/// Perceived unfairness: an exact token from the list, a token with an
/// accusation stem, or a listed phrase.
pub fn detect_unfairness(text: &str, lex: &CueLexicon) -> Option<String> {
    let tokens = tokenize(text);
    let sentences = split_sentences(text, &tokens);
    let token_hit = tokens.iter().position(|t| {
        lex.unfairness_tokens.iter().any(|w| *w == t.lower)
            || lex.unfairness_prefixes.iter().any(|p| t.lower.starts_with(p.as_str()))
    });
    let hit = token_hit.or_else(|| {
        lex.unfairness_phrases
            .iter()
            .find_map(|ph| find_phrase(&tokens, ph))
    })?;
    Some(sentence_snippet(text, &sentences, hit))
}

/// Messages the user posted on their own talk page while the block was
/// in force: adds and edits in [start, effective end).
pub fn in_block_messages<'a>(tl: &'a UserTimeline, span: &BlockSpan) -> Vec<&'a CommentEvent> {
    tl.authored
        .iter()
        .filter(|e| {
            e.owner == tl.user
                && e.page_kind == PageKind::UserTalk
                && matches!(e.action, CommentAction::Add | CommentAction::Edit)
                && e.ts >= span.start
                && SpanEnd::Finite(e.ts) < span.effective_end
        })
        .collect()
}

/// Cue presence over a set of messages. Each cue keeps the snippet of
/// its first match.
pub fn cue_flags(messages: &[&CommentEvent], lex: &CueLexicon) -> CueFlags {
    let mut flags = CueFlags {
        n_messages: messages.len(),
        ..CueFlags::default()
    };
    for msg in messages {
        if !flags.apology {
            if let Some(snippet) = detect_apology(&msg.text, lex) {
                flags.apology = true;
                flags.matched_snippets.push((CueKind::Apology, snippet));
            }
        }
        if !flags.direct_question {
            if let Some(snippet) = detect_direct_question(&msg.text, lex) {
                flags.direct_question = true;
                flags.matched_snippets.push((CueKind::DirectQuestion, snippet));
            }
        }
        if !flags.unfairness {
            if let Some(snippet) = detect_unfairness(&msg.text, lex) {
                flags.unfairness = true;
                flags.matched_snippets.push((CueKind::Unfairness, snippet));
            }
        }
    }
    flags
}

/// Lowercased token counts over many texts, for corpus comparisons.
pub fn word_bag<'a>(texts: impl IntoIterator<Item = &'a str>) -> BTreeMap<String, u64> {
    let mut bag = BTreeMap::new();
    for text in texts {
        for token in tokenize(text) {
            *bag.entry(token.lower).or_insert(0) += 1;
        }
    }
    bag
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{BlockLogEntry, ReasonCategory};

    fn lex() -> CueLexicon {
        CueLexicon::default()
    }

    #[test]
    fn tokenizer_offsets_and_apostrophes() {
        let text = "I don't know, really -- dogs' toys!";
        let tokens = tokenize(text);
        let words: Vec<&str> = tokens.iter().map(|t| t.text).collect();
        assert_eq!(words, vec!["I", "don't", "know", "really", "dogs", "toys"]);
        for t in &tokens {
            assert_eq!(&text[t.start..t.end], t.text);
        }
        // leading apostrophe is skipped, trailing one ends the token
        let words: Vec<String> = tokenize("'ello there'").into_iter().map(|t| t.lower).collect();
        assert_eq!(words, vec!["ello", "there"]);
        // multi-byte characters separate tokens and never panic
        let words: Vec<String> = tokenize("café blocked ☃ now").into_iter().map(|t| t.lower).collect();
        assert_eq!(words, vec!["caf", "blocked", "now"]);
    }

    #[test]
    fn sentences_track_terminators() {
        let text = "I did it. Why me? Fine!";
        let tokens = tokenize(text);
        let sentences = split_sentences(text, &tokens);
        assert_eq!(sentences.len(), 3);
        assert_eq!(sentences[0].terminator, Some('.'));
        assert_eq!(sentences[1].terminator, Some('?'));
        assert_eq!(sentences[2].terminator, Some('!'));
        assert_eq!(&text[sentences[1].byte_start..sentences[1].byte_end].trim().to_string(), "Why me");
        // trailing text without punctuation still forms a sentence
        let text = "no closer";
        let tokens = tokenize(text);
        let sentences = split_sentences(text, &tokens);
        assert_eq!(sentences.len(), 1);
        assert_eq!(sentences[0].terminator, None);
    }

    #[test]
    fn apology_detection() {
        for text in [
            "I apologize for the disruption.",
            "I'm so sorry about that revert.",
            "Please forgive me for the mess.",
            "I regret the tone I used.",
            "Well, my bad.",
            "Excuse me for the noise.",
            "MY MISTAKE, won't happen again.",
        ] {
            assert!(detect_apology(text, &lex()).is_some(), "missed: {text}");
        }
        for text in ["Thanks for the review.", "The block was fair.", "I was bad at my job."] {
            assert!(detect_apology(text, &lex()).is_none(), "false hit: {text}");
        }
        // stems over-trigger by design on made-up words
        assert!(detect_apology("see you in sorrytown", &lex()).is_some());
        // snippet is the containing sentence
        let snippet = detect_apology("First part. I apologize for it. Last part.", &lex()).unwrap();
        assert_eq!(snippet, "I apologize for it");
    }

    #[test]
    fn direct_question_detection() {
        for text in [
            "Why was I blocked?",
            "What policy did I break?",
            "How long will this last?",
            "Who decided this?",
            "So what policy, precisely, have I violated?",
            "I read the page. Why was I blocked?",
        ] {
            assert!(detect_direct_question(text, &lex()).is_some(), "missed: {text}");
        }
        for text in [
            "Why was I blocked.",
            "I wonder why this happened?",
            "So there you have it?",
            "Why",
            "The question of what happened matters?",
        ] {
            assert!(detect_direct_question(text, &lex()).is_none(), "false hit: {text}");
        }
        let snippet = detect_direct_question("I read it. Why me? Unbelievable.", &lex()).unwrap();
        assert_eq!(snippet, "Why me");
    }

    #[test]
    fn unfairness_detection() {
        for text in [
            "This block is unfair.",
            "this block is unjustified",
            "I was wrongly accused.",
            "The accusations are baseless.",
            "They alleged things I never did.",
            "It is just not fair at all.",
            "What an injustice!",
        ] {
            assert!(detect_unfairness(text, &lex()).is_some(), "missed: {text}");
        }
        for text in [
            "Fair enough, I accept it.",
            "The block was fair.",
            "Justice was served.",
        ] {
            assert!(detect_unfairness(text, &lex()).is_none(), "false hit: {text}");
        }
    }

    #[test]
    fn question_detector_agrees_with_naive_oracle() {
        use rand::prelude::*;
        let lex = lex();
        let naive = |text: &str| -> bool {
            // independent restatement: split on terminators, keep the
            // terminator, strip non-word chars, inspect leading words
            let mut rest = text;
            let mut sentences: Vec<(String, char)> = Vec::new();
            while let Some(pos) = rest.find(['.', '?', '!']) {
                let (body, tail) = rest.split_at(pos);
                sentences.push((body.to_string(), tail.chars().next().unwrap()));
                rest = &tail[1..];
            }
            sentences.iter().any(|(body, term)| {
                if *term != '?' {
                    return false;
                }
                let words: Vec<String> = body
                    .split(|c: char| !(c.is_ascii_alphanumeric() || c == '\''))
                    .filter(|w| !w.is_empty())
                    .map(|w| w.to_ascii_lowercase())
                    .collect();
                match words.first().map(String::as_str) {
                    Some("why" | "how" | "what" | "who") => true,
                    Some("so") => matches!(words.get(1).map(String::as_str), Some("what" | "why")),
                    _ => false,
                }
            })
        };
        let openers = ["why", "So what", "I think", "the block", "What", "perhaps so", "who"];
        let middles = ["was I blocked", "did this happen", "is going on", "about the rules"];
        let closers = ["?", ".", "!", "? right.", ". Why now?"];
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..300 {
            let text = format!(
                "{} {}{}",
                openers.choose(&mut rng).unwrap(),
                middles.choose(&mut rng).unwrap(),
                closers.choose(&mut rng).unwrap()
            );
            assert_eq!(
                detect_direct_question(&text, &lex).is_some(),
                naive(&text),
                "disagree on: {text}"
            );
        }
    }

    #[test]
    fn lexicon_partial_json_keeps_defaults() {
        let lex = CueLexicon::from_json(r#"{"apology_prefixes":["custom"]}"#).unwrap();
        assert_eq!(lex.apology_prefixes, vec!["custom"]);
        assert_eq!(lex.question_starters, CueLexicon::default().question_starters);
        assert!(detect_apology("customized greeting", &lex).is_some());
        assert!(detect_apology("I am sorry", &lex).is_none());
        assert!(CueLexicon::from_json("[1,2]").is_err());
    }

    fn msg(id: &str, owner: &str, ts: i64, action: CommentAction, text: &str) -> CommentEvent {
        CommentEvent {
            id: id.into(),
            author: "u".into(),
            owner: owner.into(),
            page_kind: if owner.starts_with("art") {
                PageKind::ArticleTalk
            } else {
                PageKind::UserTalk
            },
            ts,
            action,
            text: text.into(),
        }
    }

    fn span(start: i64, end: i64) -> BlockSpan {
        BlockSpan {
            target: "u".into(),
            start,
            original_end: SpanEnd::Finite(end),
            effective_end: SpanEnd::Finite(end),
            reduced_early: false,
            reduction_s: Some(0),
            reason_category: ReasonCategory::EditWarring,
            entries: vec![BlockLogEntry {
                ts: start,
                admin: "adm".into(),
                target: "u".into(),
                action: crate::types::BlockAction::Block,
                duration: Some(crate::types::BlockDuration::Seconds(end - start)),
                reason_text: "edit warring".into(),
            }],
        }
    }

    #[test]
    fn in_block_window_is_half_open_and_own_talk_only() {
        let authored = vec![
            msg("m0", "u", 50, CommentAction::Add, "before the block"),
            msg("m1", "u", 100, CommentAction::Add, "at block start"),
            msg("m2", "u", 150, CommentAction::Edit, "editing my note"),
            msg("m3", "art1", 160, CommentAction::Add, "on an article"),
            msg("m4", "v", 170, CommentAction::Add, "on someone else's talk"),
            msg("m5", "u", 180, CommentAction::Delete, "x"),
            msg("m6", "u", 200, CommentAction::Add, "at the end already"),
        ];
        let tl = UserTimeline {
            user: "u".into(),
            first_activity: 50,
            last_activity: 200,
            authored,
            received: vec![],
            spans: vec![span(100, 200)],
        };
        let msgs = in_block_messages(&tl, &tl.spans[0]);
        let ids: Vec<&str> = msgs.iter().map(|e| e.id.as_str()).collect();
        assert_eq!(ids, vec!["m1", "m2"]);

        // indefinite effective end keeps everything after the start
        let mut s = span(100, 200);
        s.effective_end = SpanEnd::Indefinite;
        s.original_end = SpanEnd::Indefinite;
        let ids: Vec<&str> = in_block_messages(&tl, &s).iter().map(|e| e.id.as_str()).collect();
        assert_eq!(ids, vec!["m1", "m2", "m6"]);
    }

    #[test]
    fn flags_aggregate_across_messages() {
        let m1 = msg("m1", "u", 1, CommentAction::Add, "Why was I blocked?");
        let m2 = msg("m2", "u", 2, CommentAction::Add, "This is unfair and I am sorry.");
        let flags = cue_flags(&[&m1, &m2], &lex());
        assert!(flags.apology && flags.direct_question && flags.unfairness);
        assert_eq!(flags.n_messages, 2usize);
        assert_eq!(flags.matched_snippets.len(), 3);

        let flags = cue_flags(&[], &lex());
        assert!(!flags.apology && !flags.direct_question && !flags.unfairness);
        assert_eq!(flags.n_messages, 0);

        // adding a message can only switch flags on, never off
        let neutral = msg("m3", "u", 3, CommentAction::Add, "Noted, thank you.");
        let base = cue_flags(&[&neutral], &lex());
        assert!(!base.apology);
        let extended = cue_flags(&[&neutral, &m2], &lex());
        assert!(extended.apology && extended.unfairness);
    }

    #[test]
    fn word_bag_counts_lowercased_tokens() {
        let bag = word_bag(["The block THE Block", "block again"]);
        assert_eq!(bag["the"], 2);
        assert_eq!(bag["block"], 3);
        assert_eq!(bag["again"], 1);
        assert_eq!(bag.len(), 3);
    }
}
