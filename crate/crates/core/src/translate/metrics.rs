//! Translation quality metrics: corpus BLEU-4 with add-one smoothing and
//! a brevity penalty, and METEOR with exact and stem matching stages.

use serde::Serialize;
use std::collections::HashMap;

use super::MtError;

/// Characters treated as punctuation by [`tokenize`]: ASCII punctuation
/// plus the common typographic marks comic lettering actually uses.
fn is_punct(c: char) -> bool {
    c.is_ascii_punctuation() || matches!(c, '…' | '‘' | '’' | '“' | '”' | '—' | '–' | '¿' | '¡')
}

/// Metric tokenization: casefold, then split on whitespace with leading
/// and trailing punctuation peeled off as their own tokens. Interior
/// punctuation (apostrophes, hyphens) stays attached.
pub fn tokenize(text: &str) -> Vec<String> {
    let lowered = text.to_lowercase();
    let mut tokens = Vec::new();
    for word in lowered.split_whitespace() {
        let chars: Vec<char> = word.chars().collect();
        let mut start = 0;
        let mut end = chars.len();
        while start < end && is_punct(chars[start]) {
            start += 1;
        }
        while end > start && is_punct(chars[end - 1]) {
            end -= 1;
        }
        for c in &chars[..start] {
            tokens.push(c.to_string());
        }
        if start < end {
            tokens.push(chars[start..end].iter().collect());
        }
        for c in &chars[end..] {
            tokens.push(c.to_string());
        }
    }
    tokens
}

/// Clipped n-gram counts for one hypothesis/reference pair: how many
/// hypothesis n-grams also occur in the reference, each capped at its
/// reference frequency, plus the total hypothesis n-gram count.
/// A hypothesis shorter than `n` contributes `(0, 0)`.
pub fn ngram_clipped_precision(
    hypothesis: &[String],
    reference: &[String],
    n: usize,
) -> (usize, usize) {
    assert!(n >= 1);
    if hypothesis.len() < n {
        return (0, 0);
    }
    let mut ref_counts: HashMap<&[String], usize> = HashMap::new();
    if reference.len() >= n {
        for gram in reference.windows(n) {
            *ref_counts.entry(gram).or_insert(0) += 1;
        }
    }
    let mut hyp_counts: HashMap<&[String], usize> = HashMap::new();
    for gram in hypothesis.windows(n) {
        *hyp_counts.entry(gram).or_insert(0) += 1;
    }
    let clipped = hyp_counts
        .iter()
        .map(|(gram, count)| (*count).min(ref_counts.get(gram).copied().unwrap_or(0)))
        .sum();
    (clipped, hypothesis.len() - n + 1)
}

/// Corpus-level BLEU-4 over `(hypothesis, reference)` pairs, single
/// reference each.
///
/// Clipped precisions p1..p4 aggregate over the whole corpus; any pn with
/// a zero numerator gets add-one smoothing `(m+1)/(t+1)` (short bubble
/// texts make unsmoothed 4-gram counts degenerate). The brevity penalty
/// is `exp(1 - ref_len/hyp_len)` when the hypothesis side is shorter.
/// Empty hypotheses across the board score 0.
pub fn bleu<S: AsRef<str>>(pairs: &[(S, S)]) -> f64 {
    const MAX_N: usize = 4;
    let mut matches = [0usize; MAX_N];
    let mut totals = [0usize; MAX_N];
    let (mut hyp_len, mut ref_len) = (0usize, 0usize);
    for (hyp, reference) in pairs {
        let h = tokenize(hyp.as_ref());
        let r = tokenize(reference.as_ref());
        for (n, (m, t)) in (1..=MAX_N).map(|n| (n, ngram_clipped_precision(&h, &r, n))) {
            matches[n - 1] += m;
            totals[n - 1] += t;
        }
        hyp_len += h.len();
        ref_len += r.len();
    }
    if hyp_len == 0 {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 0..MAX_N {
        let p = if matches[n] == 0 {
            (matches[n] + 1) as f64 / (totals[n] + 1) as f64
        } else {
            matches[n] as f64 / totals[n] as f64
        };
        log_sum += p.ln();
    }
    let brevity = if hyp_len < ref_len {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    } else {
        1.0
    };
    brevity * (log_sum / MAX_N as f64).exp()
}

/// Lightweight English suffix stripper used by METEOR's stem stage.
///
/// One suffix from a fixed longest-first list comes off when at least
/// three characters remain; `ies`/`ied` restore the `y`, and a trailing
/// doubled consonant (except l/s/z) collapses so `running` and `run`
/// meet at the same stem. Both sides stem identically, which is all the
/// matcher needs.
pub fn stem(word: &str) -> String {
    const SUFFIXES: [&str; 16] = [
        "ingly", "edly", "fully", "ness", "ment", "tion", "sion", "ies", "ied", "ing", "est", "ed",
        "er", "ly", "es", "s",
    ];
    for suffix in SUFFIXES {
        if let Some(base) = word.strip_suffix(suffix) {
            if base.chars().count() < 3 {
                continue;
            }
            if suffix == "ies" || suffix == "ied" {
                return format!("{base}y");
            }
            let chars: Vec<char> = base.chars().collect();
            let n = chars.len();
            if n >= 2
                && chars[n - 1] == chars[n - 2]
                && !"aeiou".contains(chars[n - 1])
                && !"lsz".contains(chars[n - 1])
            {
                return chars[..n - 1].iter().collect();
            }
            return base.to_string();
        }
    }
    word.to_string()
}

/// (hypothesis index, reference index) pairs of aligned tokens.
type Alignment = Vec<(usize, usize)>;

/// Align hypothesis to reference in two stages: exact surface match,
/// then stem match over the leftovers. Within a stage, hypothesis tokens
/// are scanned left to right and each takes the reference position that
/// extends the previous matched run when possible, otherwise the
/// leftmost free candidate. Deterministic.
fn align(hypothesis: &[String], reference: &[String]) -> Alignment {
    let mut hyp_taken = vec![false; hypothesis.len()];
    let mut ref_taken = vec![false; reference.len()];
    let mut matches: Alignment = Vec::new();

    let run_stage = |key: &dyn Fn(&str) -> String,
                     hyp_taken: &mut Vec<bool>,
                     ref_taken: &mut Vec<bool>,
                     matches: &mut Alignment| {
        let ref_keys: Vec<String> = reference.iter().map(|w| key(w)).collect();
        let mut last_ref: Option<usize> = None;
        for (i, word) in hypothesis.iter().enumerate() {
            if hyp_taken[i] {
                // Keep run tracking consistent with already-made matches.
                if let Some(&(_, j)) = matches.iter().find(|(hi, _)| *hi == i) {
                    last_ref = Some(j);
                }
                continue;
            }
            let hkey = key(word);
            let continuation = last_ref
                .map(|j| j + 1)
                .filter(|&j| j < reference.len() && !ref_taken[j] && ref_keys[j] == hkey);
            let choice = continuation
                .or_else(|| (0..reference.len()).find(|&j| !ref_taken[j] && ref_keys[j] == hkey));
            if let Some(j) = choice {
                hyp_taken[i] = true;
                ref_taken[j] = true;
                matches.push((i, j));
                last_ref = Some(j);
            }
        }
    };

    run_stage(
        &|w| w.to_string(),
        &mut hyp_taken,
        &mut ref_taken,
        &mut matches,
    );
    run_stage(&|w| stem(w), &mut hyp_taken, &mut ref_taken, &mut matches);

    matches.sort_by_key(|&(i, _)| i);
    matches
}

/// Contiguous aligned runs: adjacent in both hypothesis and reference.
fn count_chunks(matches: &Alignment) -> usize {
    if matches.is_empty() {
        return 0;
    }
    let mut chunks = 1;
    for pair in matches.windows(2) {
        let (i0, j0) = pair[0];
        let (i1, j1) = pair[1];
        if i1 != i0 + 1 || j1 != j0 + 1 {
            chunks += 1;
        }
    }
    chunks
}

/// METEOR segment score over token slices.
///
/// `F = P*R / (alpha*P + (1-alpha)*R)` with alpha = 0.9, fragmentation
/// penalty `gamma * (chunks/m)^beta` with gamma = 0.5, beta = 3, and
/// score `F * (1 - penalty)`. Zero matches score 0. No synonym stage:
/// no synonym resource is pinned down, so matching stops at stems.
pub fn meteor_tokens(hypothesis: &[String], reference: &[String]) -> f64 {
    const ALPHA: f64 = 0.9;
    const BETA: f64 = 3.0;
    const GAMMA: f64 = 0.5;

    let matches = align(hypothesis, reference);
    let m = matches.len() as f64;
    if matches.is_empty() {
        return 0.0;
    }
    let precision = m / hypothesis.len() as f64;
    let recall = m / reference.len() as f64;
    let fmean = precision * recall / (ALPHA * precision + (1.0 - ALPHA) * recall);
    let chunks = count_chunks(&matches) as f64;
    let penalty = GAMMA * (chunks / m).powf(BETA);
    fmean * (1.0 - penalty)
}

/// METEOR on raw strings, via [`tokenize`].
pub fn meteor(hypothesis: &str, reference: &str) -> f64 {
    meteor_tokens(&tokenize(hypothesis), &tokenize(reference))
}

/// Corpus METEOR: arithmetic mean of segment scores.
pub fn corpus_meteor<S: AsRef<str>>(pairs: &[(S, S)]) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    pairs
        .iter()
        .map(|(h, r)| meteor(h.as_ref(), r.as_ref()))
        .sum::<f64>()
        / pairs.len() as f64
}

/// The two translation-quality numbers plus how many segments they cover.
#[derive(Debug, Clone, Serialize)]
pub struct MtReport {
    pub bleu: f64,
    pub meteor: f64,
    pub segments: usize,
}

/// Score a corpus of `(hypothesis, reference)` pairs.
pub fn mt_report<S: AsRef<str>>(pairs: &[(S, S)]) -> Result<MtReport, MtError> {
    if pairs.is_empty() {
        return Err(MtError::EmptyCorpus);
    }
    Ok(MtReport {
        bleu: bleu(pairs),
        meteor: corpus_meteor(pairs),
        segments: pairs.len(),
    })
}
