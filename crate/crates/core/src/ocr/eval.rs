//! Character and word error rates: Levenshtein distance with unit costs
//! normalized by reference length, plus corpus-level aggregation.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use super::OcrError;

/// Levenshtein distance with unit costs over arbitrary symbols.
pub fn edit_distance<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> usize {
    if reference.is_empty() {
        return hypothesis.len();
    }
    if hypothesis.is_empty() {
        return reference.len();
    }
    let mut prev: Vec<usize> = (0..=hypothesis.len()).collect();
    let mut curr = vec![0usize; hypothesis.len() + 1];
    for (i, r) in reference.iter().enumerate() {
        curr[0] = i + 1;
        for (j, h) in hypothesis.iter().enumerate() {
            let cost = usize::from(r != h);
            curr[j + 1] = (prev[j + 1] + 1).min(curr[j] + 1).min(prev[j] + cost);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[hypothesis.len()]
}

/// Character error rate: character-level edit distance over the
/// reference character count. Can exceed 1 for long hypotheses.
pub fn cer(reference: &str, hypothesis: &str) -> Result<f64, OcrError> {
    let r: Vec<char> = reference.chars().collect();
    if r.is_empty() {
        return Err(OcrError::EmptyReference("CER"));
    }
    let h: Vec<char> = hypothesis.chars().collect();
    Ok(edit_distance(&r, &h) as f64 / r.len() as f64)
}

/// Word error rate: token-level edit distance over the reference token
/// count. Tokens split on Unicode whitespace; punctuation stays attached.
pub fn wer(reference: &str, hypothesis: &str) -> Result<f64, OcrError> {
    let r: Vec<&str> = reference.split_whitespace().collect();
    if r.is_empty() {
        return Err(OcrError::EmptyReference("WER"));
    }
    let h: Vec<&str> = hypothesis.split_whitespace().collect();
    Ok(edit_distance(&r, &h) as f64 / r.len() as f64)
}

/// How per-line rates combine into a corpus figure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Averaging {
    /// Length-weighted: total distance over total reference length.
    #[default]
    Micro,
    /// Plain mean of the per-line rates.
    Macro,
}

#[derive(Debug, Clone, Serialize)]
pub struct OcrReport {
    pub cer: f64,
    pub wer: f64,
    pub lines: usize,
}

/// Corpus CER/WER over (reference, hypothesis) pairs.
///
/// `casefold` lowercases both sides first; comic lettering is usually
/// all-caps while ground truth often is not.
pub fn ocr_report(
    pairs: &[(String, String)],
    casefold: bool,
    averaging: Averaging,
) -> Result<OcrReport, OcrError> {
    if pairs.is_empty() {
        return Err(OcrError::EmptyReference("corpus CER/WER"));
    }
    let prepared: Vec<(String, String)> = pairs
        .iter()
        .map(|(r, h)| {
            if casefold {
                (r.to_lowercase(), h.to_lowercase())
            } else {
                (r.clone(), h.clone())
            }
        })
        .collect();

    let (mut char_dist, mut char_len) = (0usize, 0usize);
    let (mut word_dist, mut word_len) = (0usize, 0usize);
    let mut cer_rates = Vec::new();
    let mut wer_rates = Vec::new();
    for (r, h) in &prepared {
        let rc: Vec<char> = r.chars().collect();
        if rc.is_empty() {
            return Err(OcrError::EmptyReference("CER"));
        }
        let hc: Vec<char> = h.chars().collect();
        let cd = edit_distance(&rc, &hc);
        char_dist += cd;
        char_len += rc.len();
        cer_rates.push(cd as f64 / rc.len() as f64);

        let rw: Vec<&str> = r.split_whitespace().collect();
        if rw.is_empty() {
            return Err(OcrError::EmptyReference("WER"));
        }
        let hw: Vec<&str> = h.split_whitespace().collect();
        let wd = edit_distance(&rw, &hw);
        word_dist += wd;
        word_len += rw.len();
        wer_rates.push(wd as f64 / rw.len() as f64);
    }

    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (cer, wer) = match averaging {
        Averaging::Micro => (
            char_dist as f64 / char_len as f64,
            word_dist as f64 / word_len as f64,
        ),
        Averaging::Macro => (mean(&cer_rates), mean(&wer_rates)),
    };
    Ok(OcrReport {
        cer,
        wer,
        lines: pairs.len(),
    })
}

/// Ground-truth transcripts: either a two-column TSV `crop_id<TAB>text`
/// or a directory of `<crop_id>.txt` files.
pub fn load_transcripts(path: &Path) -> Result<BTreeMap<String, String>, OcrError> {
    let mut map = BTreeMap::new();
    if path.is_dir() {
        for entry in std::fs::read_dir(path)? {
            let p = entry?.path();
            if p.extension().is_some_and(|e| e == "txt") {
                let id = p.file_stem().unwrap().to_string_lossy().into_owned();
                let text = std::fs::read_to_string(&p)?;
                map.insert(id, text.trim_end_matches(['\n', '\r']).to_string());
            }
        }
    } else {
        let text = std::fs::read_to_string(path)?;
        for (lineno, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let (id, value) = line.split_once('\t').ok_or_else(|| OcrError::Transcript {
                path: path.to_string_lossy().into_owned(),
                message: format!("line {}: expected 'crop_id<TAB>text'", lineno + 1),
            })?;
            map.insert(id.to_string(), value.to_string());
        }
    }
    Ok(map)
}

/// Join reference and hypothesis transcripts on crop id. References
/// without a hypothesis pair with empty text; unmatched hypothesis ids
/// are an error (they usually mean a typo'd id, not a silent OCR miss).
pub fn pair_transcripts(
    references: &BTreeMap<String, String>,
    hypotheses: &BTreeMap<String, String>,
) -> Result<Vec<(String, String)>, OcrError> {
    for id in hypotheses.keys() {
        if !references.contains_key(id) {
            return Err(OcrError::Transcript {
                path: id.clone(),
                message: "hypothesis id has no reference".into(),
            });
        }
    }
    Ok(references
        .iter()
        .map(|(id, r)| (r.clone(), hypotheses.get(id).cloned().unwrap_or_default()))
        .collect())
}
