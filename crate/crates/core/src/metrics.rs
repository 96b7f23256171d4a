//! BLEU@4 and ROUGE-L for generated descriptions, with corpus aggregation.
//!
//! Tokenization lowercases the text, splits on whitespace, and makes every
//! character that is neither alphanumeric nor whitespace a token of its own,
//! so `"cup."` becomes `["cup", "."]`.
//!
//! BLEU follows the common sentence-level formulation with smoothing by
//! adding one to both the matched and total counts of every order above one
//! (unigrams stay unsmoothed). Total counts are floored at one. The brevity
//! penalty uses the reference length closest to the candidate, preferring
//! the shorter on ties. A candidate with no unigram match scores zero.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut word = String::new();
    for c in text.chars().flat_map(char::to_lowercase) {
        if c.is_alphanumeric() {
            word.push(c);
            continue;
        }
        if !word.is_empty() {
            out.push(std::mem::take(&mut word));
        }
        if !c.is_whitespace() {
            out.push(c.to_string());
        }
    }
    if !word.is_empty() {
        out.push(word);
    }
    out
}

fn ngram_counts<T: AsRef<str>>(tokens: &[T], n: usize) -> HashMap<Vec<&str>, u32> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w.iter().map(AsRef::as_ref).collect()).or_insert(0) += 1;
        }
    }
    counts
}

/// Clipped matches and total candidate n-grams of order `n`.
fn modified_precision<T: AsRef<str>>(candidate: &[T], references: &[Vec<T>], n: usize) -> (u32, u32) {
    let counts = ngram_counts(candidate, n);
    let ref_counts: Vec<_> = references.iter().map(|r| ngram_counts(r, n)).collect();
    let mut matched = 0;
    for (gram, &c) in &counts {
        let max_ref = ref_counts.iter().map(|rc| rc.get(gram).copied().unwrap_or(0)).max().unwrap_or(0);
        matched += c.min(max_ref);
    }
    let total: u32 = counts.values().sum();
    (matched, total.max(1))
}

fn closest_ref_len<T>(references: &[Vec<T>], cand_len: usize) -> usize {
    references
        .iter()
        .map(Vec::len)
        .min_by_key(|&r| (r.abs_diff(cand_len), r))
        .unwrap_or(0)
}

/// Smoothed sentence BLEU over orders 1 to 4 with uniform weights.
pub fn bleu4<T: AsRef<str>>(candidate: &[T], references: &[Vec<T>]) -> f64 {
    if candidate.is_empty() || references.is_empty() {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 1..=4 {
        let (mut num, mut den) = modified_precision(candidate, references, n);
        if n == 1 {
            if num == 0 {
                return 0.0;
            }
        } else {
            num += 1;
            den += 1;
        }
        log_sum += 0.25 * (num as f64 / den as f64).ln();
    }
    let c = candidate.len() as f64;
    let r = closest_ref_len(references, candidate.len()) as f64;
    let bp = if c > r { 1.0 } else { (1.0 - r / c).exp() };
    (bp * log_sum.exp()).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RougeScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { up.max(row[j]) };
            diag = up;
        }
    }
    row[b.len()]
}

pub fn rouge_l_single<T: AsRef<str>>(candidate: &[T], reference: &[T]) -> RougeScore {
    if candidate.is_empty() || reference.is_empty() {
        return RougeScore::default();
    }
    let c: Vec<&str> = candidate.iter().map(AsRef::as_ref).collect();
    let r: Vec<&str> = reference.iter().map(AsRef::as_ref).collect();
    let lcs = lcs_len(&c, &r) as f64;
    let precision = lcs / c.len() as f64;
    let recall = lcs / r.len() as f64;
    let f1 = if lcs == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    RougeScore { precision, recall, f1 }
}

/// ROUGE-L against the reference giving the highest F1; the first such
/// reference wins ties.
pub fn rouge_l<T: AsRef<str>>(candidate: &[T], references: &[Vec<T>]) -> RougeScore {
    let mut best = RougeScore::default();
    for r in references {
        let s = rouge_l_single(candidate, r);
        if s.f1 > best.f1 {
            best = s;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalPair {
    pub video_id: String,
    pub candidate: String,
    pub references: Vec<String>,
    /// Dataset or split the video belongs to.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
}

pub const DEFAULT_GROUP: &str = "all";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoScores {
    pub video_id: String,
    pub group: String,
    pub bleu4: f64,
    pub rouge_l: RougeScore,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MeanScores {
    pub count: usize,
    pub bleu4: f64,
    pub rouge_l_precision: f64,
    pub rouge_l_recall: f64,
    pub rouge_l_f1: f64,
}

impl MeanScores {
    fn of<'a>(scores: impl Iterator<Item = &'a VideoScores>) -> Self {
        let mut m = MeanScores::default();
        for s in scores {
            m.count += 1;
            m.bleu4 += s.bleu4;
            m.rouge_l_precision += s.rouge_l.precision;
            m.rouge_l_recall += s.rouge_l.recall;
            m.rouge_l_f1 += s.rouge_l.f1;
        }
        if m.count > 0 {
            let n = m.count as f64;
            m.bleu4 /= n;
            m.rouge_l_precision /= n;
            m.rouge_l_recall /= n;
            m.rouge_l_f1 /= n;
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalReport {
    /// Sorted by `(group, video_id)`.
    pub videos: Vec<VideoScores>,
    pub groups: BTreeMap<String, MeanScores>,
    pub overall: MeanScores,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Fixed-width table, scores in percent.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<24} {:<12} {:>8} {:>8} {:>8} {:>8}", "video", "group", "bleu4", "rl_p", "rl_r", "rl_f1");
        for v in &self.videos {
            let _ = writeln!(
                out,
                "{:<24} {:<12} {:>8.2} {:>8.2} {:>8.2} {:>8.2}",
                v.video_id,
                v.group,
                100.0 * v.bleu4,
                100.0 * v.rouge_l.precision,
                100.0 * v.rouge_l.recall,
                100.0 * v.rouge_l.f1
            );
        }
        let row = |out: &mut String, name: &str, m: &MeanScores| {
            let _ = writeln!(
                out,
                "{:<24} {:<12} {:>8.2} {:>8.2} {:>8.2} {:>8.2}",
                format!("mean (n={})", m.count),
                name,
                100.0 * m.bleu4,
                100.0 * m.rouge_l_precision,
                100.0 * m.rouge_l_recall,
                100.0 * m.rouge_l_f1
            );
        };
        for (g, m) in &self.groups {
            row(&mut out, g, m);
        }
        row(&mut out, "*", &self.overall);
        out
    }
}

pub fn score_pair(pair: &EvalPair) -> VideoScores {
    let cand = tokenize(&pair.candidate);
    let refs: Vec<Vec<String>> = pair.references.iter().map(|r| tokenize(r)).collect();
    VideoScores {
        video_id: pair.video_id.clone(),
        group: pair.group.clone().unwrap_or_else(|| DEFAULT_GROUP.to_string()),
        bleu4: bleu4(&cand, &refs),
        rouge_l: rouge_l(&cand, &refs),
    }
}

pub fn evaluate_corpus(pairs: &[EvalPair]) -> EvalReport {
    let mut videos: Vec<VideoScores> = pairs.iter().map(score_pair).collect();
    videos.sort_by(|a, b| (&a.group, &a.video_id).cmp(&(&b.group, &b.video_id)));
    let mut groups = BTreeMap::new();
    for g in videos.iter().map(|v| v.group.clone()) {
        groups
            .entry(g.clone())
            .or_insert_with(|| MeanScores::of(videos.iter().filter(|v| v.group == g)));
    }
    let overall = MeanScores::of(videos.iter());
    EvalReport { videos, groups, overall }
}

#[derive(Debug, Error)]
pub enum EvalInputError {
    #[error("read error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: duplicate video id `{video_id}`")]
    Duplicate { line: usize, video_id: String },
    #[error("video ids differ between candidates and references; missing candidates: {missing_candidates:?}; missing references: {missing_references:?}")]
    Mismatch {
        missing_candidates: Vec<String>,
        missing_references: Vec<String>,
    },
}

/// One line of a candidates file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateLine {
    pub video_id: String,
    pub text: String,
}

/// One line of a references file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceLine {
    pub video_id: String,
    pub references: Vec<String>,
    #[serde(default)]
    pub group: Option<String>,
}

fn parse_jsonl<T, R>(reader: R, check: impl Fn(&T) -> Result<&str, String>) -> Result<Vec<T>, EvalInputError>
where
    T: serde::de::DeserializeOwned,
    R: BufRead,
{
    let mut out = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let n = i + 1;
        let item: T = serde_json::from_str(&line).map_err(|e| EvalInputError::Malformed {
            line: n,
            message: e.to_string(),
        })?;
        let id = check(&item).map_err(|message| EvalInputError::Malformed { line: n, message })?;
        if !seen.insert(id.to_string()) {
            return Err(EvalInputError::Duplicate {
                line: n,
                video_id: id.to_string(),
            });
        }
        out.push(item);
    }
    Ok(out)
}

fn check_id(id: &str) -> Result<&str, String> {
    if id.trim().is_empty() {
        Err("empty video_id".into())
    } else {
        Ok(id)
    }
}

/// Reads `{"video_id": .., "text": ..}` lines.
pub fn parse_candidates<R: BufRead>(reader: R) -> Result<Vec<CandidateLine>, EvalInputError> {
    parse_jsonl(reader, |c: &CandidateLine| check_id(&c.video_id))
}

/// Reads `{"video_id": .., "references": [..], "group": ..}` lines.
pub fn parse_references<R: BufRead>(reader: R) -> Result<Vec<ReferenceLine>, EvalInputError> {
    parse_jsonl(reader, |r: &ReferenceLine| {
        if r.references.is_empty() {
            return Err(format!("video `{}` has no references", r.video_id));
        }
        check_id(&r.video_id)
    })
}

/// Joins the two files by video id. Any id present in only one of them is
/// reported; the result is in reference-file order.
pub fn align(candidates: Vec<CandidateLine>, references: Vec<ReferenceLine>) -> Result<Vec<EvalPair>, EvalInputError> {
    let mut by_id: BTreeMap<String, String> = candidates.into_iter().map(|c| (c.video_id, c.text)).collect();
    let mut missing_candidates = Vec::new();
    let mut pairs = Vec::new();
    for r in references {
        match by_id.remove(&r.video_id) {
            Some(text) => pairs.push(EvalPair {
                video_id: r.video_id,
                candidate: text,
                references: r.references,
                group: r.group,
            }),
            None => missing_candidates.push(r.video_id),
        }
    }
    let missing_references: Vec<String> = by_id.into_keys().collect();
    if !missing_candidates.is_empty() || !missing_references.is_empty() {
        missing_candidates.sort();
        return Err(EvalInputError::Mismatch {
            missing_candidates,
            missing_references,
        });
    }
    Ok(pairs)
}
