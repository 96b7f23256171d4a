//! Ranking prompts for a panel of vision-language judges.
//!
//! Candidates are shown under anonymous letters in a seeded random order; the
//! returned permutation maps letters back to the caller's candidates.
//!
//! Expected answer format, one line per candidate:
//!
//! ```text
//! B: rank 1, score 8
//! A: rank 2, score 6
//! ```

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{LlmError, PromptBundle};

pub const JURY_FRAME_COUNT: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JuryCandidate {
    /// Caller-side name (e.g. the method that produced the text); never shown to the judge.
    pub name: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JuryPrompt {
    pub bundle: PromptBundle,
    /// Letters in display order.
    pub labels: Vec<String>,
    /// `permutation[slot]` is the caller's index of the candidate shown at `slot`.
    pub permutation: Vec<usize>,
}

impl JuryPrompt {
    pub fn original_index(&self, label: &str) -> Option<usize> {
        let slot = self.labels.iter().position(|l| l.eq_ignore_ascii_case(label.trim()))?;
        Some(self.permutation[slot])
    }

    /// Maps a best-to-worst list of letters to caller indices.
    pub fn depermute(&self, ranking: &[String]) -> Option<Vec<usize>> {
        ranking.iter().map(|l| self.original_index(l)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JuryVerdict {
    pub label: String,
    pub rank: u32,
    pub score: u32,
}

fn letter(i: usize) -> String {
    char::from(b'A' + i as u8).to_string()
}

pub fn build_jury_prompt(frame_refs: &[String], candidates: &[JuryCandidate], seed: u64) -> Result<JuryPrompt, LlmError> {
    if frame_refs.len() != JURY_FRAME_COUNT {
        return Err(LlmError::FrameCount {
            expected: JURY_FRAME_COUNT,
            got: frame_refs.len(),
        });
    }
    if !(2..=26).contains(&candidates.len()) {
        return Err(LlmError::CandidateCount(candidates.len()));
    }
    let n = candidates.len();
    let mut permutation: Vec<usize> = (0..n).collect();
    permutation.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let labels: Vec<String> = (0..n).map(letter).collect();

    let system = format!(
        "You are shown {frames} frames sampled uniformly from one video, followed by {n} candidate descriptions \
of that video labeled {first} to {last}. Rank the descriptions from best to worst based on richness and factual \
correctness with respect to the frames. For each description also give a score between 1 and 10. Answer with \
exactly one line per description, best first, in the form `<label>: rank <r>, score <s>`, and nothing else.",
        frames = JURY_FRAME_COUNT,
        first = labels[0],
        last = labels[n - 1],
    );
    let mut user = String::new();
    for (slot, &orig) in permutation.iter().enumerate() {
        if slot > 0 {
            user.push('\n');
        }
        user.push_str(&format!("Description {}:\n{}\n", labels[slot], candidates[orig].text.trim()));
    }

    Ok(JuryPrompt {
        bundle: PromptBundle {
            system_instructions: system,
            user_content: user,
            attachments: Some(frame_refs.to_vec()),
        },
        labels,
        permutation,
    })
}

fn parse_line(line: &str) -> Option<(String, u32, u32)> {
    let (label, rest) = line.split_once(':')?;
    let label = label.trim().trim_matches(|c| c == '*' || c == '`').trim().to_ascii_uppercase();
    let rest = rest.to_ascii_lowercase();
    let mut rank = None;
    let mut score = None;
    for part in rest.split(',') {
        let mut words = part.split_whitespace();
        match (words.next(), words.next(), words.next()) {
            (Some("rank"), Some(v), None) => rank = v.parse().ok(),
            (Some("score"), Some(v), None) => score = v.parse().ok(),
            _ => return None,
        }
    }
    Some((label, rank?, score?))
}

/// Parses a judge's answer for `n` candidates; blank lines are skipped.
/// Ranks must be a permutation of `1..=n` and scores lie in `1..=10`.
pub fn parse_jury_response(text: &str, n: usize) -> Result<Vec<JuryVerdict>, LlmError> {
    let bad = |m: String| Err(LlmError::JuryResponse(m));
    let mut verdicts = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let Some((label, rank, score)) = parse_line(line) else {
            return bad(format!("line {}: expected `<label>: rank <r>, score <s>`", i + 1));
        };
        verdicts.push(JuryVerdict { label, rank, score });
    }
    if verdicts.len() != n {
        return bad(format!("expected {n} verdicts, got {}", verdicts.len()));
    }
    let mut labels: Vec<&str> = verdicts.iter().map(|v| v.label.as_str()).collect();
    labels.sort_unstable();
    let expected: Vec<String> = (0..n).map(letter).collect();
    if labels != expected.iter().map(String::as_str).collect::<Vec<_>>() {
        return bad(format!("labels {labels:?} do not match {expected:?}"));
    }
    let mut ranks: Vec<u32> = verdicts.iter().map(|v| v.rank).collect();
    ranks.sort_unstable();
    if ranks != (1..=n as u32).collect::<Vec<_>>() {
        return bad(format!("ranks {ranks:?} are not 1..={n}"));
    }
    if let Some(v) = verdicts.iter().find(|v| !(1..=10).contains(&v.score)) {
        return bad(format!("score {} for {} outside 1..=10", v.score, v.label));
    }
    verdicts.sort_by_key(|v| v.rank);
    Ok(verdicts)
}
